/**
 * Typed client for the review service API. All server communication goes
 * through here; the fetch implementation is injectable for tests.
 */
export class ApiError extends Error {
    constructor(status, payload) {
        super(typeof payload.error === "string" ? payload.error : `HTTP ${status}`);
        this.status = status;
        this.payload = payload;
    }
}
export class ApiClient {
    constructor(base = "", fetchImpl = (...args) => fetch(...args)) {
        this.base = base.replace(/\/$/, "");
        this.fetchImpl = fetchImpl;
    }
    async request(path, init) {
        const resp = await this.fetchImpl(this.base + path, init);
        const body = (await resp.json());
        if (!resp.ok) {
            throw new ApiError(resp.status, body);
        }
        return body;
    }
    getClasses() {
        return this.request("/api/classes");
    }
    getCandidates(className) {
        return this.request(`/api/classes/${encodeURIComponent(className)}/candidates`);
    }
    postSelection(className, index) {
        return this.request(`/api/classes/${encodeURIComponent(className)}/selection`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ index }),
        });
    }
    getRuns() {
        return this.request("/api/runs");
    }
    getCases(runId) {
        return this.request(`/api/runs/${encodeURIComponent(runId)}/cases`);
    }
    getCase(runId, caseId) {
        return this.request(`/api/runs/${encodeURIComponent(runId)}/cases/${caseId}`);
    }
}
