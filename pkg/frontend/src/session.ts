// Session state machine. Keeps the rating flow honest: one pair on screen
// at a time, no skipping ahead of an unscored pair, and the progress figure
// only ever reflects rows the server has confirmed. Scores that fail to
// reach the server queue locally and retry until they land, so a flaky
// connection loses nothing.

import { ApiError, PairDescriptor, SessionDescriptor, StudyApi } from "./api.js";

export type Phase = "idle" | "loading" | "rating" | "done" | "failed";

export interface PendingScore {
    pair: number;
    score: number;
}

export interface ScoreOption {
    value: number;
    label: string;
}

export interface PairSides {
    leftUrl: string;
    rightUrl: string;
    leftKind: "original" | "transformed";
    rightKind: "original" | "transformed";
}

// Impairment scale, highest first, as rendered on the buttons.
export const DEFAULT_SCORE_LABELS: Record<number, string> = {
    5: "Imperceptible",
    4: "Perceptible, but not annoying",
    3: "Slightly annoying",
    2: "Annoying",
    1: "Very annoying",
};

/** Which image goes on which side, per the descriptor's placement. */
export function pairSides(pair: PairDescriptor): PairSides {
    if (pair.left === "original") {
        return {
            leftUrl: pair.original_url,
            rightUrl: pair.transformed_url,
            leftKind: "original",
            rightKind: "transformed",
        };
    }
    return {
        leftUrl: pair.transformed_url,
        rightUrl: pair.original_url,
        leftKind: "transformed",
        rightKind: "original",
    };
}

export class StudySession {
    phase: Phase = "idle";
    descriptor: SessionDescriptor | null = null;
    notice = "";
    private api: StudyApi;
    private participant: string;
    private confirmed = 0;
    // Pair indices handed to the server at least once, confirmed or not.
    private submitted = new Set<number>();
    private pending: PendingScore[] = [];
    private syncing = false;
    private flushing = false;

    constructor(api: StudyApi, participant: string) {
        this.api = api;
        this.participant = participant;
    }

    async start(): Promise<void> {
        this.phase = "loading";
        this.notice = "";
        try {
            this.adopt(await this.api.getSession(this.participant));
        } catch (err) {
            this.phase = "failed";
            this.notice = describe(err);
        }
    }

    /** The one pair the rater may score now; null when none remain. */
    current(): PairDescriptor | null {
        if (!this.descriptor || this.phase !== "rating") return null;
        for (const pair of this.descriptor.pairs) {
            if (!pair.scored && !this.submitted.has(pair.index)) return pair;
        }
        return null;
    }

    progress(): { scored: number; total: number } {
        return { scored: this.confirmed, total: this.descriptor?.pair_count ?? 0 };
    }

    pendingCount(): number {
        return this.pending.length;
    }

    /** Buttons render these verbatim; the server's labels win when present. */
    scoreOptions(): ScoreOption[] {
        const labels = this.descriptor?.score_labels;
        return [5, 4, 3, 2, 1].map((value) => ({
            value,
            label: labels?.[String(value)] ?? DEFAULT_SCORE_LABELS[value],
        }));
    }

    canSubmit(score: number): boolean {
        return (
            this.phase === "rating" &&
            this.current() !== null &&
            Number.isInteger(score) &&
            score >= 1 &&
            score <= 5
        );
    }

    /**
     * Record the rater's score for the pair on screen. Returns true when the
     * session moved on to the next pair (even with the score still queued);
     * false when there was nothing to submit.
     */
    async submit(score: number): Promise<boolean> {
        const pair = this.current();
        if (pair === null || !this.canSubmit(score)) return false;
        this.submitted.add(pair.index);
        try {
            const result = await this.api.postScore(this.participant, pair.index, score);
            this.confirm(result.scored_count, result.completed);
            this.notice = "";
        } catch (err) {
            if (err instanceof ApiError && err.status === 409) {
                // Someone (or a retry) already scored it; trust the server.
                await this.resync();
            } else if (err instanceof ApiError) {
                // The server refused the row outright; let the rater retry.
                this.submitted.delete(pair.index);
                this.notice = describe(err);
                return false;
            } else {
                this.pending.push({ pair: pair.index, score });
                this.notice = "Connection lost. Your score is saved and will be retried.";
            }
        }
        return true;
    }

    /** Retry queued scores in order. Returns true when the queue drained. */
    async flushPending(): Promise<boolean> {
        if (this.flushing) return this.pending.length === 0;
        this.flushing = true;
        try {
            while (this.pending.length > 0) {
                const next = this.pending[0];
                try {
                    const result = await this.api.postScore(this.participant, next.pair, next.score);
                    this.confirm(result.scored_count, result.completed);
                } catch (err) {
                    if (err instanceof ApiError && err.status === 409) {
                        await this.resync();
                    } else {
                        return false;
                    }
                }
                this.pending.shift();
            }
            if (this.phase === "rating") this.notice = "";
            return true;
        } finally {
            this.flushing = false;
        }
    }

    /** Pull a fresh descriptor so local state matches the server's rows. */
    async resync(): Promise<void> {
        if (this.syncing) return;
        this.syncing = true;
        try {
            this.adopt(await this.api.getSession(this.participant));
        } catch (err) {
            this.notice = describe(err);
        } finally {
            this.syncing = false;
        }
    }

    private adopt(descriptor: SessionDescriptor): void {
        this.descriptor = descriptor;
        this.confirmed = descriptor.scored_count;
        for (const pair of descriptor.pairs) {
            if (pair.scored) this.submitted.add(pair.index);
        }
        this.phase = this.confirmed >= descriptor.pair_count ? "done" : "rating";
    }

    private confirm(scoredCount: number, completed: boolean): void {
        this.confirmed = scoredCount;
        if (completed) this.phase = "done";
    }
}

function describe(err: unknown): string {
    if (err instanceof ApiError) return err.message;
    return "Could not reach the study server.";
}
