// Advisory per-pair countdown. It nudges the rater along and pulses when
// time runs out; it never blocks scoring or advances the pair by itself.

export class Countdown {
    private seconds: number;
    private remaining: number;
    private handle: ReturnType<typeof setInterval> | null = null;
    private onTick: (remaining: number) => void;
    private onExpire: () => void;

    constructor(seconds: number, onTick: (remaining: number) => void, onExpire: () => void) {
        this.seconds = seconds;
        this.remaining = seconds;
        this.onTick = onTick;
        this.onExpire = onExpire;
    }

    /** (Re)start from the full budget; safe to call between pairs. */
    start(): void {
        this.stop();
        this.remaining = this.seconds;
        this.onTick(this.remaining);
        this.handle = setInterval(() => {
            this.remaining -= 1;
            this.onTick(this.remaining);
            if (this.remaining <= 0) {
                this.stop();
                this.onExpire();
            }
        }, 1000);
    }

    stop(): void {
        if (this.handle !== null) {
            clearInterval(this.handle);
            this.handle = null;
        }
    }

    left(): number {
        return this.remaining;
    }
}
