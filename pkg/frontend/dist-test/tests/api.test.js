import assert from "node:assert/strict";
import { test } from "node:test";
import { ApiClient, ApiError } from "../src/api.js";
function fakeFetch(status, payload, log) {
    return async (url, init) => {
        log.push({ url, init });
        return {
            ok: status >= 200 && status < 300,
            status,
            json: async () => payload,
        };
    };
}
test("class names are URL-encoded in paths", async () => {
    const log = [];
    const api = new ApiClient("http://x", fakeFetch(200, [], log));
    await api.getCandidates("Nodule / Mass");
    assert.equal(log[0].url, "http://x/api/classes/Nodule%20%2F%20Mass/candidates");
});
test("selection POST carries the index as JSON", async () => {
    const log = [];
    const api = new ApiClient("", fakeFetch(200, { selected_index: 3 }, log));
    await api.postSelection("Edema", 3);
    assert.equal(log[0].url, "/api/classes/Edema/selection");
    assert.equal(log[0].init?.method, "POST");
    assert.deepEqual(JSON.parse(String(log[0].init?.body)), { index: 3 });
});
test("non-2xx responses raise ApiError with the payload", async () => {
    const log = [];
    const api = new ApiClient("", fakeFetch(422, { error: "index 9 out of range", bounds: [0, 4] }, log));
    await assert.rejects(api.postSelection("Edema", 9), (err) => {
        assert.ok(err instanceof ApiError);
        assert.equal(err.status, 422);
        assert.deepEqual(err.payload.bounds, [0, 4]);
        assert.match(err.message, /out of range/);
        return true;
    });
});
test("case payloads come back typed", async () => {
    const payload = {
        case_id: 1,
        gt_boxes: [[0, 0, 5, 5]],
        predictions: [],
        pairs: [],
    };
    const api = new ApiClient("", fakeFetch(200, payload, []));
    const got = await api.getCase("run1", 1);
    assert.equal(got.case_id, 1);
    assert.equal(got.gt_boxes.length, 1);
});
