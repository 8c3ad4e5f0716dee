import { afterEach, beforeEach, describe, expect, test, vi } from "vitest";

import { Countdown } from "../src/timer.js";

describe("advisory countdown", () => {
    beforeEach(() => {
        vi.useFakeTimers();
    });
    afterEach(() => {
        vi.useRealTimers();
    });

    test("counts a 20 second budget down to zero and expires once", () => {
        const ticks: number[] = [];
        let expired = 0;
        const timer = new Countdown(20, (r) => ticks.push(r), () => {
            expired += 1;
        });
        timer.start();
        expect(ticks).toEqual([20]);

        vi.advanceTimersByTime(19_000);
        expect(ticks[ticks.length - 1]).toBe(1);
        expect(expired).toBe(0);

        vi.advanceTimersByTime(1_000);
        expect(ticks[ticks.length - 1]).toBe(0);
        expect(expired).toBe(1);

        // Advisory: nothing else happens after expiry, however long we wait.
        vi.advanceTimersByTime(60_000);
        expect(ticks.length).toBe(21);
        expect(expired).toBe(1);
    });

    test("restarting between pairs resets the budget", () => {
        const ticks: number[] = [];
        const timer = new Countdown(20, (r) => ticks.push(r), () => {});
        timer.start();
        vi.advanceTimersByTime(7_000);
        expect(timer.left()).toBe(13);

        timer.start();
        expect(timer.left()).toBe(20);
        vi.advanceTimersByTime(2_000);
        expect(timer.left()).toBe(18);
        timer.stop();
        vi.advanceTimersByTime(10_000);
        expect(timer.left()).toBe(18);
    });
});
