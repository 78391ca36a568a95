/**
 * DOM wiring. All review-flow logic lives in reviewState.ts; this layer
 * renders state, performs requested effects, and forwards keyboard and
 * pointer events. Metric numbers shown anywhere come verbatim from API
 * payloads.
 */

import { ApiClient, ApiError } from "./api.js";
import type { CasePayload, RunEntry } from "./api.js";
import { keyToAction } from "./keyboard.js";
import {
  fitTransform,
  renderOverlay,
  type LayerToggles,
} from "./overlay.js";
import * as review from "./reviewState.js";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

/* ---------------------------------------------------------------- review */

let state = review.initialState();

async function runEffect(effect: review.Effect): Promise<void> {
  if (effect.kind === "load_candidates") {
    try {
      const pool = await api.getCandidates(effect.className);
      apply(review.candidatesLoaded(state, pool.candidates));
    } catch (err) {
      state = { ...state, candidates: [], error: describe(err) };
      renderReview();
    }
  } else if (effect.kind === "post_selection") {
    try {
      const record = await api.postSelection(effect.className, effect.index);
      apply(review.selectionConfirmed(state, record.class_name));
    } catch (err) {
      apply(review.selectionFailed(state, describe(err)));
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  return err instanceof Error ? err.message : String(err);
}

function apply(step: review.Step): void {
  state = step.state;
  renderReview();
  if (step.effect.kind !== "none") {
    void runEffect(step.effect);
  }
}

function renderReview(): void {
  const list = el<HTMLUListElement>("class-list");
  list.innerHTML = "";
  state.classes.forEach((entry, idx) => {
    const item = document.createElement("li");
    item.textContent = `${entry.has_selection ? "✓ " : "· "}${entry.class_name}`;
    item.className = idx === state.activeClass ? "active" : "";
    item.onclick = () => apply(review.moveClass(state, idx - state.activeClass));
    list.appendChild(item);
  });

  const progress = el<HTMLSpanElement>("progress");
  progress.textContent =
    `${review.selectedCount(state)} / ${state.classes.length} selected`;

  const exportHint = el<HTMLDivElement>("export-hint");
  exportHint.style.display = review.allSelected(state) ? "block" : "none";

  const active = state.classes[state.activeClass];
  el<HTMLHeadingElement>("active-class").textContent =
    active ? active.class_name : "no classes";
  el<HTMLParagraphElement>("definition").textContent =
    active ? active.definition : "";

  const cards = el<HTMLDivElement>("candidates");
  cards.innerHTML = "";
  state.candidates.forEach((text, idx) => {
    const card = document.createElement("div");
    card.className = "card" + (idx === state.focused ? " focused" : "");
    const label = document.createElement("span");
    label.className = "index";
    label.textContent = String(idx + 1);
    const body = document.createElement("span");
    body.textContent = text;
    card.append(label, body);
    card.onclick = () => {
      apply(review.focusCandidate(state, idx));
      apply(review.choose(state));
    };
    cards.appendChild(card);
  });

  const errorBox = el<HTMLDivElement>("review-error");
  if (state.error) {
    errorBox.textContent = `${state.error} — press r to retry`;
    errorBox.style.display = "block";
  } else {
    errorBox.style.display = "none";
  }
}

function onReviewKey(event: KeyboardEvent): void {
  const action = keyToAction(event.key);
  if (action.kind === "none") return;
  event.preventDefault();
  switch (action.kind) {
    case "focus_next":
      apply(review.moveFocus(state, 1));
      break;
    case "focus_prev":
      apply(review.moveFocus(state, -1));
      break;
    case "focus_index":
      apply(review.focusCandidate(state, action.index));
      break;
    case "choose":
      apply(review.choose(state));
      break;
    case "next_class":
      apply(review.moveClass(state, 1));
      break;
    case "prev_class":
      apply(review.moveClass(state, -1));
      break;
    case "retry":
      apply(review.retry(state));
      break;
  }
}

/* --------------------------------------------------------------- overlay */

interface OverlayView {
  runs: RunEntry[];
  runId: string | null;
  caseId: number | null;
  payload: CasePayload | null;
  toggles: LayerToggles;
  zoom: number;
  panX: number;
  panY: number;
  image: HTMLImageElement | null;
}

const overlayView: OverlayView = {
  runs: [],
  runId: null,
  caseId: null,
  payload: null,
  toggles: { gt: true, predictions: true, matches: true },
  zoom: 1,
  panX: 0,
  panY: 0,
  image: null,
};

function drawOverlay(): void {
  const canvas = el<HTMLCanvasElement>("overlay-canvas");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const payload = overlayView.payload;
  if (!payload) return;

  const dims = payload.dims ?? { width: 1000, height: 1000 };
  const t = fitTransform(dims, canvas.width, canvas.height,
    overlayView.zoom, overlayView.panX, overlayView.panY);

  ctx.fillStyle = "#0b0e13";
  ctx.fillRect(t.offsetX, t.offsetY, dims.width * t.scale,
    dims.height * t.scale);
  if (overlayView.image) {
    ctx.drawImage(overlayView.image, t.offsetX, t.offsetY,
      dims.width * t.scale, dims.height * t.scale);
  }

  const summary = renderOverlay(ctx, payload, t, overlayView.toggles);
  const badge = el<HTMLDivElement>("overlay-badge");
  badge.textContent = summary.badge ?? "";
  badge.style.display = summary.badge ? "block" : "none";

  el<HTMLDivElement>("case-meta").textContent =
    `${payload.image_id} / ${payload.class_name}: ` +
    `${payload.gt_boxes.length} gt, ${payload.predictions.length} ` +
    `predictions, ${payload.pairs.length} matched`;
}

async function openCase(runId: string, caseId: number): Promise<void> {
  const payload = await api.getCase(runId, caseId);
  overlayView.runId = runId;
  overlayView.caseId = caseId;
  overlayView.payload = payload;
  overlayView.zoom = 1;
  overlayView.panX = 0;
  overlayView.panY = 0;
  overlayView.image = null;
  if (payload.image) {
    const image = new Image();
    image.onload = () => {
      overlayView.image = image;
      drawOverlay();
    };
    image.src = payload.image;
  }
  drawOverlay();
}

async function loadRuns(): Promise<void> {
  overlayView.runs = await api.getRuns();
  const select = el<HTMLSelectElement>("run-select");
  select.innerHTML = "";
  for (const run of overlayView.runs) {
    const option = document.createElement("option");
    option.value = run.run_id;
    option.textContent = `${run.run_id} (${run.n_cases} cases)`;
    select.appendChild(option);
  }
  if (overlayView.runs.length > 0) {
    await loadCases(overlayView.runs[0].run_id);
  }
}

async function loadCases(runId: string): Promise<void> {
  const cases = await api.getCases(runId);
  const select = el<HTMLSelectElement>("case-select");
  select.innerHTML = "";
  for (const entry of cases) {
    const option = document.createElement("option");
    option.value = String(entry.case_id);
    option.textContent =
      `#${entry.case_id} ${entry.image_id} ${entry.class_name} ` +
      `(${entry.n_gt} gt / ${entry.n_pred} pred)`;
    select.appendChild(option);
  }
  if (cases.length > 0) {
    await openCase(runId, cases[0].case_id);
  }
}

function wireOverlayControls(): void {
  el<HTMLSelectElement>("run-select").onchange = (event) => {
    void loadCases((event.target as HTMLSelectElement).value);
  };
  el<HTMLSelectElement>("case-select").onchange = (event) => {
    if (overlayView.runId) {
      void openCase(overlayView.runId,
        Number((event.target as HTMLSelectElement).value));
    }
  };
  for (const layer of ["gt", "predictions", "matches"] as const) {
    el<HTMLInputElement>(`layer-${layer}`).onchange = (event) => {
      overlayView.toggles[layer] = (event.target as HTMLInputElement).checked;
      drawOverlay();
    };
  }
  const canvas = el<HTMLCanvasElement>("overlay-canvas");
  canvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    const factor = event.deltaY < 0 ? 1.15 : 1 / 1.15;
    overlayView.zoom = Math.min(16, Math.max(0.2, overlayView.zoom * factor));
    drawOverlay();
  });
  let dragging: [number, number] | null = null;
  canvas.addEventListener("mousedown", (event) => {
    dragging = [event.offsetX - overlayView.panX,
      event.offsetY - overlayView.panY];
  });
  canvas.addEventListener("mousemove", (event) => {
    if (dragging) {
      overlayView.panX = event.offsetX - dragging[0];
      overlayView.panY = event.offsetY - dragging[1];
      drawOverlay();
    }
  });
  canvas.addEventListener("mouseup", () => {
    dragging = null;
  });
}

/* ------------------------------------------------------------------ tabs */

function showTab(name: "review" | "overlay"): void {
  el<HTMLDivElement>("review-pane").style.display =
    name === "review" ? "grid" : "none";
  el<HTMLDivElement>("overlay-pane").style.display =
    name === "overlay" ? "block" : "none";
  el<HTMLButtonElement>("tab-review").className =
    name === "review" ? "tab active" : "tab";
  el<HTMLButtonElement>("tab-overlay").className =
    name === "overlay" ? "tab active" : "tab";
  if (name === "overlay" && overlayView.runs.length === 0) {
    void loadRuns();
  }
}

async function boot(): Promise<void> {
  el<HTMLButtonElement>("tab-review").onclick = () => showTab("review");
  el<HTMLButtonElement>("tab-overlay").onclick = () => showTab("overlay");
  document.addEventListener("keydown", (event) => {
    if (el<HTMLDivElement>("review-pane").style.display !== "none") {
      onReviewKey(event);
    }
  });
  wireOverlayControls();
  showTab("review");
  try {
    apply(review.classesLoaded(state, await api.getClasses()));
  } catch (err) {
    state = { ...state, error: describe(err) };
    renderReview();
  }
}

void boot();
