import assert from "node:assert/strict";
import { test } from "node:test";
import { keyToAction } from "../src/keyboard.js";
import * as review from "../src/reviewState.js";
function classes(n) {
    return Array.from({ length: n }, (_, i) => ({
        class_name: `Class ${i}`,
        definition: `definition ${i}`,
        source: "",
        has_selection: false,
    }));
}
function loaded(n = 3, candidates = 5) {
    let step = review.classesLoaded(review.initialState(), classes(n));
    step = review.candidatesLoaded(step.state, Array.from({ length: candidates }, (_, i) => `candidate ${i}`));
    return step.state;
}
test("loading classes requests the first pool", () => {
    const step = review.classesLoaded(review.initialState(), classes(4));
    assert.equal(step.effect.kind, "load_candidates");
    assert.equal(step.effect.className, "Class 0");
});
test("focus moves wrap around", () => {
    let state = loaded();
    state = review.moveFocus(state, 1).state;
    assert.equal(state.focused, 1);
    state = review.moveFocus(state, -2).state;
    assert.equal(state.focused, 4);
});
test("choose emits a POST effect for the focused candidate", () => {
    let state = loaded();
    state = review.moveFocus(state, 2).state;
    const step = review.choose(state);
    assert.deepEqual(step.effect, {
        kind: "post_selection",
        className: "Class 0",
        index: 2,
    });
    assert.equal(step.state.pending, 2);
});
test("confirmation marks the class and advances to the next unselected", () => {
    let state = loaded(3);
    const step = review.selectionConfirmed(state, "Class 0");
    assert.equal(step.state.classes[0].has_selection, true);
    assert.equal(step.state.activeClass, 1);
    assert.equal(step.effect.kind, "load_candidates");
    assert.equal(review.selectedCount(step.state), 1);
});
test("failure keeps the pending choice and surfaces the error", () => {
    let state = loaded();
    state = review.choose(state).state;
    const failed = review.selectionFailed(state, "boom").state;
    assert.equal(failed.pending, state.pending);
    assert.equal(failed.error, "boom");
    const retry = review.retry(failed);
    assert.deepEqual(retry.effect, {
        kind: "post_selection",
        className: "Class 0",
        index: failed.pending,
    });
});
test("all-selected gate opens only at full coverage", () => {
    let state = loaded(2);
    assert.equal(review.allSelected(state), false);
    state = review.selectionConfirmed(state, "Class 0").state;
    assert.equal(review.allSelected(state), false);
    state = review.selectionConfirmed(state, "Class 1").state;
    assert.equal(review.allSelected(state), true);
});
test("22-class review flow completes keyboard-only", () => {
    // simulate the full loop: for each class, j/j to move focus, Enter to
    // choose, server confirms; candidate reload happens between classes
    let state = loaded(22);
    let posts = 0;
    for (let guard = 0; guard < 100 && !review.allSelected(state); guard++) {
        for (const key of ["j", "j", "Enter"]) {
            const action = keyToAction(key);
            if (action.kind === "focus_next") {
                state = review.moveFocus(state, 1).state;
            }
            else if (action.kind === "choose") {
                const step = review.choose(state);
                state = step.state;
                assert.equal(step.effect.kind, "post_selection");
                posts += 1;
                const effect = step.effect;
                assert.equal(effect.index, 2);
                // server confirms, state advances, pool for next class arrives
                state = review.selectionConfirmed(state, effect.className).state;
                state = review.candidatesLoaded(state, ["a b c d e", "f g h i j", "k l m n o", "p q r s t", "u v w x y"]).state;
            }
        }
    }
    assert.equal(posts, 22);
    assert.equal(review.selectedCount(state), 22);
    assert.equal(review.allSelected(state), true);
});
test("digit keys jump focus directly", () => {
    let state = loaded();
    const action = keyToAction("4");
    assert.deepEqual(action, { kind: "focus_index", index: 3 });
    state = review.focusCandidate(state, 3).state;
    assert.equal(state.focused, 3);
});
test("unmapped keys are ignored", () => {
    assert.deepEqual(keyToAction("z"), { kind: "none" });
    assert.deepEqual(keyToAction("0"), { kind: "none" });
});
test("class navigation wraps and requests pools", () => {
    const state = loaded(3);
    const step = review.moveClass(state, -1);
    assert.equal(step.state.activeClass, 2);
    assert.equal(step.effect.kind, "load_candidates");
});
