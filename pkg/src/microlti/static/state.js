// Player state machine: intro -> explanation -> quiz -> result, forward
// only, with an explicit retry hop from result back to quiz. Submission is
// gated on every question having a response.
const FORWARD = {
    intro: "explanation",
    explanation: "quiz",
    quiz: "quiz", // leaving quiz requires a submission result
    result: "result",
};
export function initialState(content, saved) {
    const responses = saved && saved.length === content.quiz.length ? saved : content.quiz.map(() => null);
    return { phase: "intro", content, responses, result: null };
}
export function advance(state) {
    return { ...state, phase: FORWARD[state.phase] };
}
export function answerQuestion(state, index, value) {
    if (state.phase !== "quiz")
        throw new Error(`cannot answer during phase ${state.phase}`);
    if (index < 0 || index >= state.responses.length)
        throw new Error(`no question ${index}`);
    const responses = state.responses.slice();
    responses[index] = value;
    return { ...state, responses };
}
export function isAnswered(value) {
    if (value === null)
        return false;
    if (Array.isArray(value))
        return value.length > 0;
    if (typeof value === "string")
        return value.trim().length > 0;
    return true;
}
export function allAnswered(state) {
    return state.responses.every(isAnswered);
}
export function canSubmit(state) {
    return state.phase === "quiz" && allAnswered(state);
}
export function applyResult(state, result) {
    if (state.phase !== "quiz")
        throw new Error(`cannot apply a result during phase ${state.phase}`);
    return { ...state, phase: "result", result };
}
export function retry(state) {
    if (state.phase !== "result")
        throw new Error(`cannot retry during phase ${state.phase}`);
    return { ...state, phase: "quiz", result: null };
}
export function formatScorePercent(score) {
    return `${Math.round(score * 100)}%`;
}
export function passbackNotice(passback) {
    switch (passback.status) {
        case "delivered":
            return { level: "ok", message: "Your grade was delivered to your course." };
        case "failed":
            return {
                level: "warn",
                message: `Your grade could not be delivered to your course${passback.reason ? ` (${passback.reason})` : ""}. Your score is shown below; try submitting again later.`,
            };
        default:
            return { level: "info", message: "This launch does not report grades back to your course." };
    }
}
