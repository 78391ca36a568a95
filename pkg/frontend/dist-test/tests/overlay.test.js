import assert from "node:assert/strict";
import { test } from "node:test";
import { GT_COLOR, PRED_COLOR, PRED_FILL_ALPHA, fitTransform, renderOverlay, toImage, toViewport, } from "../src/overlay.js";
class RecordingSurface {
    constructor() {
        this.lineWidth = 1;
        this.strokeStyle = "";
        this.fillStyle = "";
        this.globalAlpha = 1;
        this.font = "";
        this.ops = [];
    }
    record(op, ...args) {
        this.ops.push({
            op,
            args,
            stroke: String(this.strokeStyle),
            fill: String(this.fillStyle),
            alpha: this.globalAlpha,
        });
    }
    beginPath() { this.record("beginPath"); }
    moveTo(x, y) { this.record("moveTo", x, y); }
    lineTo(x, y) { this.record("lineTo", x, y); }
    stroke() { this.record("stroke"); }
    strokeRect(x, y, w, h) {
        this.record("strokeRect", x, y, w, h);
    }
    fillRect(x, y, w, h) {
        this.record("fillRect", x, y, w, h);
    }
    fillText(text, x, y) {
        this.record("fillText", text, x, y);
    }
    setLineDash(segments) { this.record("setLineDash", segments); }
}
function fixturePayload() {
    return {
        case_id: 0,
        run_id: "r",
        image_id: "img_a",
        class_name: "Cardiomegaly",
        dims: { width: 1000, height: 1000 },
        gt_boxes: [
            [100, 100, 300, 300],
            [400, 400, 500, 520],
        ],
        predictions: [
            { label: "Cardiomegaly", box: [110, 105, 310, 300], score: 1, rank: 0 },
            { label: "Cardiomegaly", box: [395, 405, 505, 515], score: 1, rank: 1 },
        ],
        pairs: [
            { pred: 0, gt: 0, iou: 0.9, loc: 0.97, shape: 0.98, cls: 1 },
            { pred: 1, gt: 1, iou: 0.8, loc: 0.95, shape: 0.9, cls: 1 },
        ],
        unmatched_preds: [],
        unmatched_gts: [],
        image: null,
    };
}
const ALL_ON = { gt: true, predictions: true, matches: true };
test("identity-ish transform maps image corners to the viewport", () => {
    const t = fitTransform({ width: 1000, height: 1000 }, 500, 500);
    assert.deepEqual(toViewport(t, 0, 0), [0, 0]);
    assert.deepEqual(toViewport(t, 1000, 1000), [500, 500]);
});
test("non-square image letterboxes and centers", () => {
    const t = fitTransform({ width: 2000, height: 1000 }, 800, 800);
    // scale fits width: 800/2000 = 0.4; vertical offset centers 400px content
    assert.equal(t.scale, 0.4);
    assert.deepEqual(toViewport(t, 0, 0), [0, 200]);
    assert.deepEqual(toViewport(t, 2000, 1000), [800, 600]);
});
test("viewport transform round-trips under zoom and pan", () => {
    const t = fitTransform({ width: 1024, height: 768 }, 960, 720, 2.5, 40, -12);
    const [vx, vy] = toViewport(t, 333.25, 81.5);
    const [x, y] = toImage(t, vx, vy);
    assert.ok(Math.abs(x - 333.25) < 1e-9);
    assert.ok(Math.abs(y - 81.5) < 1e-9);
});
test("fixture case renders 2 solid gt, 2 translucent preds, 2 links", () => {
    const ctx = new RecordingSurface();
    const t = fitTransform({ width: 1000, height: 1000 }, 1000, 1000);
    const summary = renderOverlay(ctx, fixturePayload(), t, ALL_ON);
    assert.deepEqual([summary.gtDrawn, summary.predictionsDrawn, summary.linksDrawn], [2, 2, 2]);
    assert.equal(summary.badge, null);
    const gtStrokes = ctx.ops.filter((o) => o.op === "strokeRect" && o.stroke === GT_COLOR);
    assert.equal(gtStrokes.length, 2);
    assert.ok(gtStrokes.every((o) => o.alpha === 1));
    // gt boxes land at their payload coordinates under the unit transform
    assert.deepEqual(gtStrokes[0].args, [100, 100, 200, 200]);
    const predFills = ctx.ops.filter((o) => o.op === "fillRect" && o.fill === PRED_COLOR);
    assert.equal(predFills.length, 2);
    assert.ok(predFills.every((o) => o.alpha === PRED_FILL_ALPHA));
    assert.deepEqual(predFills[0].args, [110, 105, 200, 195]);
    const links = ctx.ops.filter((o) => o.op === "lineTo");
    assert.equal(links.length, 2);
    const texts = ctx.ops.filter((o) => o.op === "fillText");
    assert.equal(texts.length, 2);
    assert.match(String(texts[0].args[0]), /iou 0\.90 loc 0\.97 shape 0\.98/);
});
test("prediction layer off leaves only solid gt boxes", () => {
    const ctx = new RecordingSurface();
    const t = fitTransform({ width: 1000, height: 1000 }, 1000, 1000);
    const summary = renderOverlay(ctx, fixturePayload(), t, {
        gt: true,
        predictions: false,
        matches: true,
    });
    assert.deepEqual([summary.gtDrawn, summary.predictionsDrawn, summary.linksDrawn], [2, 0, 0]);
    assert.equal(ctx.ops.filter((o) => o.op === "fillRect").length, 0);
});
test("zero-prediction case shows the badge with gt only", () => {
    const payload = { ...fixturePayload(), predictions: [], pairs: [] };
    const ctx = new RecordingSurface();
    const t = fitTransform({ width: 1000, height: 1000 }, 1000, 1000);
    const summary = renderOverlay(ctx, payload, t, ALL_ON);
    assert.equal(summary.badge, "no predictions");
    assert.equal(summary.gtDrawn, 2);
    assert.equal(summary.predictionsDrawn, 0);
});
test("boxes follow the single transform under zoom", () => {
    const ctx = new RecordingSurface();
    // zoom 2 about the viewport center: scale 2, offsets
    // (1000 - 1000*2)/2 + pan = -490 / -480
    const t = fitTransform({ width: 1000, height: 1000 }, 1000, 1000, 2, 10, 20);
    renderOverlay(ctx, fixturePayload(), t, { gt: true, predictions: false, matches: false });
    const [x, y, w, h] = ctx.ops.find((o) => o.op === "strokeRect").args;
    assert.deepEqual([x, y, w, h], [100 * 2 - 490, 100 * 2 - 480, 400, 400]);
});
