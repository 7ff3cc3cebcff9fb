import { describe, expect, it } from "vitest";

import { Throttle } from "../src/throttle.js";
import { FakeClock } from "./helpers.js";

describe("Throttle", () => {
    it("passes an isolated call through immediately", () => {
        const clock = new FakeClock();
        const seen: number[] = [];
        const throttle = new Throttle<number>((v) => seen.push(v), 100, clock);
        throttle.call(1);
        expect(seen).toEqual([1]);
    });

    it("caps a 1-second drag burst at 10 commands", () => {
        const clock = new FakeClock();
        const seen: number[] = [];
        const throttle = new Throttle<number>((v) => seen.push(v), 100, clock);
        // 100 drag events over one second
        for (let i = 0; i < 100; i++) {
            throttle.call(i);
            clock.advance(10);
        }
        clock.advance(200); // let any trailing timer flush
        expect(seen.length).toBeLessThanOrEqual(10 + 1); // +1 trailing flush
        expect(seen.length).toBeGreaterThanOrEqual(9);
    });

    it("always delivers the final value of a burst", () => {
        const clock = new FakeClock();
        const seen: number[] = [];
        const throttle = new Throttle<number>((v) => seen.push(v), 100, clock);
        for (let i = 0; i <= 30; i++) throttle.call(i); // instantaneous burst
        clock.advance(150);
        expect(seen[0]).toBe(0);
        expect(seen.at(-1)).toBe(30);
    });

    it("cancel drops pending work", () => {
        const clock = new FakeClock();
        const seen: number[] = [];
        const throttle = new Throttle<number>((v) => seen.push(v), 100, clock);
        throttle.call(1);
        throttle.call(2);
        throttle.cancel();
        clock.advance(500);
        expect(seen).toEqual([1]);
        expect(clock.pendingTimers()).toBe(0);
    });
});
