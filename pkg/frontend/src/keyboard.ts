/**
 * Keyboard bindings for the review workflow. Keys map to named actions;
 * the app dispatches them through the review state machine, so the whole
 * 22-class flow is completable without a pointer:
 *
 *   j / ArrowDown   focus next candidate      k / ArrowUp   previous
 *   1..9            jump to candidate         Enter / Space  choose
 *   l / ArrowRight  next class                h / ArrowLeft  previous class
 *   r               retry a failed POST
 */

export type ReviewAction =
  | { kind: "focus_next" }
  | { kind: "focus_prev" }
  | { kind: "focus_index"; index: number }
  | { kind: "choose" }
  | { kind: "next_class" }
  | { kind: "prev_class" }
  | { kind: "retry" }
  | { kind: "none" };

export function keyToAction(key: string): ReviewAction {
  switch (key) {
    case "j":
    case "ArrowDown":
      return { kind: "focus_next" };
    case "k":
    case "ArrowUp":
      return { kind: "focus_prev" };
    case "Enter":
    case " ":
      return { kind: "choose" };
    case "l":
    case "ArrowRight":
      return { kind: "next_class" };
    case "h":
    case "ArrowLeft":
      return { kind: "prev_class" };
    case "r":
      return { kind: "retry" };
    default: {
      const digit = Number.parseInt(key, 10);
      if (Number.isInteger(digit) && digit >= 1 && digit <= 9) {
        return { kind: "focus_index", index: digit - 1 };
      }
      return { kind: "none" };
    }
  }
}
