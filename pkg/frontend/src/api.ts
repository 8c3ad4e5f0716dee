// Typed client for the rating endpoints. The browser harness talks to the
// study server through exactly three routes: GET /api/session, the image
// URLs embedded in the descriptor, and POST /api/score.

export interface PairDescriptor {
    index: number;
    original_url: string;
    transformed_url: string;
    left: "original" | "transformed";
    scored: boolean;
}

export interface SessionDescriptor {
    participant: string;
    batch: string;
    pair_count: number;
    scored_count: number;
    time_limit_s: number;
    score_labels: Record<string, string>;
    pairs: PairDescriptor[];
}

export interface ScoreResult {
    accepted: boolean;
    pair: number;
    scored_count: number;
    pair_count: number;
    completed: boolean;
}

/** Non-2xx response. Network failures stay plain TypeErrors from fetch. */
export class ApiError extends Error {
    status: number;

    constructor(status: number, message: string) {
        super(message);
        this.status = status;
    }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(r: Response): Promise<string> {
    try {
        const body = await r.json();
        if (body && typeof body.detail === "string") return body.detail;
    } catch {
        // non-JSON error body, fall through to the status line
    }
    return `request failed with status ${r.status}`;
}

export class StudyApi {
    private base: string;
    private fetchFn: FetchLike;

    constructor(base = "", fetchFn?: FetchLike) {
        this.base = base.replace(/\/$/, "");
        this.fetchFn = fetchFn ?? ((url, init) => globalThis.fetch(url, init));
    }

    async getSession(participant: string): Promise<SessionDescriptor> {
        const url = `${this.base}/api/session?participant=${encodeURIComponent(participant)}`;
        const r = await this.fetchFn(url);
        if (!r.ok) throw new ApiError(r.status, await errorDetail(r));
        return r.json();
    }

    async postScore(participant: string, pair: number, score: number): Promise<ScoreResult> {
        const r = await this.fetchFn(`${this.base}/api/score`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ participant, pair, score }),
        });
        if (!r.ok) throw new ApiError(r.status, await errorDetail(r));
        return r.json();
    }

    /** Image URLs arrive relative to the API origin. */
    imageUrl(path: string): string {
        return `${this.base}${path}`;
    }
}
