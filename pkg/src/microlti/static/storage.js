// Mid-quiz persistence: responses are kept per session token so a reload
// restores what the student already entered.
const keyFor = (token) => `microlti-player:${token}`;
export function saveResponses(token, responses, storage) {
    storage.setItem(keyFor(token), JSON.stringify(responses));
}
export function loadResponses(token, count, storage) {
    const raw = storage.getItem(keyFor(token));
    if (raw === null)
        return null;
    let parsed;
    try {
        parsed = JSON.parse(raw);
    }
    catch {
        return null;
    }
    if (!Array.isArray(parsed) || parsed.length !== count)
        return null;
    return parsed.map((value) => {
        if (value === null || typeof value === "number" || typeof value === "string")
            return value;
        if (Array.isArray(value) && value.every((item) => typeof item === "number"))
            return value;
        return null;
    });
}
export function clearResponses(token, storage) {
    storage.removeItem(keyFor(token));
}
