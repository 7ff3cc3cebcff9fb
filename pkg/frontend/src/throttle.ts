// Trailing-edge rate limiter for slider drags: at most one call per
// interval, and the final value of a burst is always delivered.

export type TimerHandle = unknown;

export interface ThrottleClock {
    now(): number;
    setTimer(fn: () => void, ms: number): TimerHandle;
    clearTimer(handle: TimerHandle): void;
}

export const realClock: ThrottleClock = {
    now: () => Date.now(),
    setTimer: (fn, ms) => setTimeout(fn, ms),
    clearTimer: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
};

export class Throttle<T> {
    private lastFired = -Infinity;
    private pending: T | undefined;
    private timer: TimerHandle | null = null;

    constructor(
        private readonly emit: (value: T) => void,
        private readonly intervalMs: number = 100,
        private readonly clock: ThrottleClock = realClock,
    ) {}

    call(value: T): void {
        const now = this.clock.now();
        if (now - this.lastFired >= this.intervalMs && this.timer === null) {
            this.lastFired = now;
            this.emit(value);
            return;
        }
        this.pending = value;
        if (this.timer === null) {
            const wait = Math.max(this.intervalMs - (now - this.lastFired), 0);
            this.timer = this.clock.setTimer(() => this.flush(), wait);
        }
    }

    private flush(): void {
        this.timer = null;
        if (this.pending === undefined) return;
        const value = this.pending;
        this.pending = undefined;
        this.lastFired = this.clock.now();
        this.emit(value);
    }

    cancel(): void {
        if (this.timer !== null) {
            this.clock.clearTimer(this.timer);
            this.timer = null;
        }
        this.pending = undefined;
    }
}
