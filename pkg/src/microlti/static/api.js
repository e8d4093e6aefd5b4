// Typed client for the tool provider's session endpoints. The player only
// ever sees answer-stripped content; correctness comes back from the server
// in the submission result.
export class SessionExpiredError extends Error {
    constructor() {
        super("The session has expired. Relaunch the activity from your course.");
        this.name = "SessionExpiredError";
    }
}
const defaultFetch = (input, init) => fetch(input, init);
export async function fetchContent(token, options = {}) {
    const { base = "", fetchImpl = defaultFetch } = options;
    const res = await fetchImpl(`${base}/api/session/${encodeURIComponent(token)}/content`);
    if (res.status === 401)
        throw new SessionExpiredError();
    if (!res.ok)
        throw new Error(`Loading the content failed (HTTP ${res.status}).`);
    return (await res.json());
}
export async function submitAnswers(token, answers, options = {}) {
    const { base = "", fetchImpl = defaultFetch } = options;
    const res = await fetchImpl(`${base}/api/session/${encodeURIComponent(token)}/submit`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ answers }),
    });
    if (res.status === 401)
        throw new SessionExpiredError();
    if (!res.ok)
        throw new Error(`Submitting the quiz failed (HTTP ${res.status}).`);
    return (await res.json());
}
