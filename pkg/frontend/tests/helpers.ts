import { SocketFactory, SocketLike } from "../src/client.js";
import { ThrottleClock, TimerHandle } from "../src/throttle.js";

interface FakeTimer {
    id: number;
    at: number;
    fn: () => void;
}

/** Deterministic clock + timer wheel for throttle/backoff tests. */
export class FakeClock implements ThrottleClock {
    private t = 0;
    private timers: FakeTimer[] = [];
    private nextId = 1;

    now(): number {
        return this.t;
    }

    setTimer(fn: () => void, ms: number): TimerHandle {
        const timer = { id: this.nextId++, at: this.t + ms, fn };
        this.timers.push(timer);
        return timer.id;
    }

    clearTimer(handle: TimerHandle): void {
        this.timers = this.timers.filter((timer) => timer.id !== handle);
    }

    advance(ms: number): void {
        const deadline = this.t + ms;
        for (;;) {
            const due = this.timers
                .filter((timer) => timer.at <= deadline)
                .sort((a, b) => a.at - b.at)[0];
            if (!due) break;
            this.timers = this.timers.filter((timer) => timer.id !== due.id);
            this.t = due.at;
            due.fn();
        }
        this.t = deadline;
    }

    pendingTimers(): number {
        return this.timers.length;
    }
}

/** Scripted in-memory socket the BridgeClient can talk to. */
export class FakeSocket implements SocketLike {
    binaryType = "blob";
    sent: string[] = [];
    closed = false;
    onopen: ((ev?: unknown) => void) | null = null;
    onmessage: ((ev: { data: unknown }) => void) | null = null;
    onclose: ((ev?: unknown) => void) | null = null;
    onerror: ((ev?: unknown) => void) | null = null;

    send(data: string): void {
        this.sent.push(data);
    }

    close(): void {
        this.closed = true;
        this.onclose?.();
    }

    // test-side controls
    open(): void {
        this.onopen?.();
    }

    deliver(message: unknown): void {
        this.onmessage?.({ data: JSON.stringify(message) });
    }

    deliverRaw(data: unknown): void {
        this.onmessage?.({ data });
    }

    dropFromServer(): void {
        this.onclose?.();
    }
}

export function fakeFactory(sockets: FakeSocket[]): SocketFactory {
    return () => {
        const socket = new FakeSocket();
        sockets.push(socket);
        return socket;
    };
}

export function hello(seq = 1, protocol = 1) {
    return {
        type: "hello",
        seq,
        payload: { protocol, engine_version: "0.1.0" },
    };
}

export function snapshot(seq = 2, mode = "synthetic") {
    return {
        type: "snapshot",
        seq,
        payload: { mode, recording: false, metrics: metricsMsg(0, 0).payload, params: paramsMsg(0, 0).payload },
    };
}

export function paramsMsg(seq: number, t: number, power = 6.0) {
    return {
        type: "params",
        seq,
        payload: {
            t,
            power,
            color_mix: [0.5, 0.5, 0.5] as [number, number, number],
            bw: 0.5,
            dpower_per_s: 0.25,
            loop_freq_hz: 0.017142857,
            rendered_power: power,
            phase: (t / 58.33) % 1,
        },
    };
}

export function metricsMsg(seq: number, t: number, attention = 0.5) {
    return {
        type: "metrics",
        seq,
        payload: {
            t,
            values: {
                attention,
                engagement: 0.5,
                excitement: 0.5,
                interest: 0.5,
                relaxation: 0.5,
                stress: 0.5,
            },
        },
    };
}

/** Tiny deterministic PRNG for scripted sessions. */
export function mulberry32(seed: number): () => number {
    let a = seed >>> 0;
    return () => {
        a = (a + 0x6d2b79f5) >>> 0;
        let t = a;
        t = Math.imul(t ^ (t >>> 15), t | 1);
        t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}
