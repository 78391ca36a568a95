/**
 * Pure state machine for the candidate-review workflow. The DOM layer
 * dispatches actions and performs the effects this module requests; all
 * transition logic lives here so the whole flow is unit-testable, and the
 * keyboard path exercises exactly these transitions.
 *
 * Server state is authoritative: a selection becomes final only when the
 * POST succeeds and the class list is re-read; a failed POST keeps the
 * pending choice so the operator can retry.
 */
export function initialState() {
    return {
        classes: [],
        activeClass: 0,
        candidates: [],
        focused: 0,
        pending: null,
        error: null,
    };
}
export function selectedCount(state) {
    return state.classes.filter((c) => c.has_selection).length;
}
export function allSelected(state) {
    return state.classes.length > 0 &&
        selectedCount(state) === state.classes.length;
}
export function activeClassName(state) {
    return state.classes[state.activeClass]?.class_name ?? null;
}
function step(state, effect = { kind: "none" }) {
    return { state, effect };
}
export function classesLoaded(state, classes) {
    const active = Math.min(state.activeClass, Math.max(classes.length - 1, 0));
    const name = classes[active]?.class_name;
    return step({ ...state, classes, activeClass: active }, name ? { kind: "load_candidates", className: name } : { kind: "none" });
}
export function candidatesLoaded(state, candidates) {
    return step({
        ...state,
        candidates,
        focused: 0,
        pending: null,
        error: null,
    });
}
export function moveClass(state, delta) {
    if (state.classes.length === 0)
        return step(state);
    const next = (state.activeClass + delta + state.classes.length) % state.classes.length;
    if (next === state.activeClass)
        return step(state);
    return step({ ...state, activeClass: next, candidates: [], focused: 0, error: null }, { kind: "load_candidates", className: state.classes[next].class_name });
}
export function moveFocus(state, delta) {
    if (state.candidates.length === 0)
        return step(state);
    const next = (state.focused + delta + state.candidates.length) %
        state.candidates.length;
    return step({ ...state, focused: next });
}
export function focusCandidate(state, index) {
    if (index < 0 || index >= state.candidates.length)
        return step(state);
    return step({ ...state, focused: index });
}
/** Choose the focused candidate: optimistic pending + a POST effect. */
export function choose(state) {
    const name = activeClassName(state);
    if (name === null || state.candidates.length === 0)
        return step(state);
    return step({ ...state, pending: state.focused, error: null }, { kind: "post_selection", className: name, index: state.focused });
}
/** Server confirmed: mark the class selected and advance to the next
 * class without a selection (keyboard flow never needs the mouse). */
export function selectionConfirmed(state, className) {
    const classes = state.classes.map((c) => c.class_name === className ? { ...c, has_selection: true } : c);
    const merged = { ...state, classes, pending: null };
    const unselected = classes.findIndex((c) => !c.has_selection);
    if (unselected < 0)
        return step(merged);
    return step({ ...merged, activeClass: unselected, candidates: [], focused: 0 }, { kind: "load_candidates", className: classes[unselected].class_name });
}
/** Server rejected or network failed: keep the choice, surface the error,
 * and let the operator retry with the same keystroke. */
export function selectionFailed(state, message) {
    return step({ ...state, error: message });
}
export function retry(state) {
    const name = activeClassName(state);
    if (name === null || state.pending === null)
        return step(state);
    return step({ ...state, error: null }, { kind: "post_selection", className: name, index: state.pending });
}
