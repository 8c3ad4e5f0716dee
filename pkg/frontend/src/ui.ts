// DOM layer. Everything stateful lives in StudySession; this file just
// projects it onto the page and feeds rater input back in.

import { StudyApi } from "./api.js";
import { StudySession, pairSides } from "./session.js";
import { Countdown } from "./timer.js";

const RETRY_INTERVAL_MS = 3000;

function h<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className = "",
    text = "",
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text) node.textContent = text;
    return node;
}

export class StudyView {
    private root: HTMLElement;
    private api: StudyApi;
    private session: StudySession;
    private countdown: Countdown;
    private timerEl: HTMLElement | null = null;
    private shownPair = -1;

    constructor(root: HTMLElement, api: StudyApi, session: StudySession) {
        this.root = root;
        this.api = api;
        this.session = session;
        this.countdown = new Countdown(
            20,
            (remaining) => this.paintTimer(remaining),
            () => this.pulseTimer(),
        );
        document.addEventListener("keydown", (ev) => this.onKey(ev));
        window.setInterval(() => this.retryPending(), RETRY_INTERVAL_MS);
    }

    async boot(): Promise<void> {
        this.render();
        await this.session.start();
        const descriptor = this.session.descriptor;
        if (descriptor) this.countdown = new Countdown(
            descriptor.time_limit_s,
            (remaining) => this.paintTimer(remaining),
            () => this.pulseTimer(),
        );
        this.render();
    }

    private async onKey(ev: KeyboardEvent): Promise<void> {
        const score = Number.parseInt(ev.key, 10);
        if (this.session.canSubmit(score)) {
            await this.session.submit(score);
            this.render();
        }
    }

    private async retryPending(): Promise<void> {
        if (this.session.pendingCount() === 0) return;
        await this.session.flushPending();
        this.render();
    }

    private async submit(score: number): Promise<void> {
        if (!this.session.canSubmit(score)) return;
        await this.session.submit(score);
        this.render();
    }

    private paintTimer(remaining: number): void {
        if (!this.timerEl) return;
        this.timerEl.textContent = `${Math.max(remaining, 0)} s`;
        this.timerEl.classList.toggle("overdue", remaining <= 0);
    }

    private pulseTimer(): void {
        // Advisory only: pulse the display, keep the pair scoreable.
        this.timerEl?.classList.add("pulse");
    }

    render(): void {
        const session = this.session;
        this.root.textContent = "";

        if (session.phase === "idle" || session.phase === "loading") {
            this.root.append(h("p", "status", "Loading session..."));
            return;
        }
        if (session.phase === "failed") {
            const retry = h("button", "retry", "Retry");
            retry.addEventListener("click", () => {
                void this.boot();
            });
            this.root.append(h("p", "status error", session.notice), retry);
            return;
        }

        const progress = session.progress();
        const header = h("header");
        header.append(
            h("span", "progress", `${progress.scored} / ${progress.total} scored`),
        );
        if (session.notice) header.append(h("span", "notice", session.notice));
        this.root.append(header);

        if (session.phase === "done") {
            this.countdown.stop();
            const doneBox = h("section", "done");
            doneBox.append(
                h("h1", "", "All pairs scored"),
                h(
                    "p",
                    "",
                    `The server recorded ${progress.scored} of ${progress.total} ratings. Thank you.`,
                ),
            );
            const buttons = h("div", "scores");
            for (const option of session.scoreOptions()) {
                const btn = h("button", "score-btn", `${option.value} ${option.label}`);
                btn.disabled = true;
                btn.title = "The session is complete; scoring is closed.";
                buttons.append(btn);
            }
            doneBox.append(buttons);
            this.root.append(doneBox);
            return;
        }

        const pair = session.current();
        if (pair === null) {
            // Scores are still in flight; hold until the server confirms.
            this.root.append(
                h("p", "status", "Waiting for the server to confirm your last scores..."),
            );
            return;
        }

        const sides = pairSides(pair);
        const stage = h("section", "stage");
        for (const side of [
            { url: sides.leftUrl, kind: sides.leftKind },
            { url: sides.rightUrl, kind: sides.rightKind },
        ]) {
            const fig = h("figure", "panel");
            const img = h("img");
            img.src = this.api.imageUrl(side.url);
            img.alt = side.kind === "original" ? "original image" : "transformed image";
            fig.append(img, h("figcaption", "", side.kind === "original" ? "Original" : "Transformed"));
            stage.append(fig);
        }
        this.root.append(stage);

        const timer = h("div", "timer");
        this.timerEl = timer;
        this.root.append(timer);
        if (pair.index !== this.shownPair) {
            this.shownPair = pair.index;
            this.countdown.start();
        } else {
            this.paintTimer(this.countdown.left());
        }

        const prompt = h(
            "p",
            "prompt",
            "Rate the visual impairment of the transformed image.",
        );
        this.root.append(prompt);

        const buttons = h("div", "scores");
        for (const option of session.scoreOptions()) {
            const btn = h("button", "score-btn", `${option.value} ${option.label}`);
            btn.addEventListener("click", () => {
                void this.submit(option.value);
            });
            buttons.append(btn);
        }
        this.root.append(buttons);
        this.root.append(
            h("p", "hint", "Keys 1 to 5 score the pair as well. The timer is a pacing aid, not a cutoff."),
        );
    }
}
