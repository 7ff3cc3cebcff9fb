// Bounded timeline buffer: 3000 points holds five minutes at 10 Hz.

export interface TimelinePoint {
    t: number;
    value: number;
}

export const TIMELINE_CAPACITY = 3000;

export class Ring {
    private buffer: TimelinePoint[];
    private head = 0;
    private count = 0;

    constructor(readonly capacity: number = TIMELINE_CAPACITY) {
        if (capacity < 1) throw new Error("ring capacity must be positive");
        this.buffer = new Array<TimelinePoint>(capacity);
    }

    get length(): number {
        return this.count;
    }

    push(point: TimelinePoint): void {
        this.buffer[(this.head + this.count) % this.capacity] = point;
        if (this.count < this.capacity) {
            this.count += 1;
        } else {
            this.head = (this.head + 1) % this.capacity;
        }
    }

    /** Oldest-first snapshot of the buffered points. */
    toArray(): TimelinePoint[] {
        const out = new Array<TimelinePoint>(this.count);
        for (let i = 0; i < this.count; i++) {
            out[i] = this.buffer[(this.head + i) % this.capacity];
        }
        return out;
    }

    last(): TimelinePoint | undefined {
        if (this.count === 0) return undefined;
        return this.buffer[(this.head + this.count - 1) % this.capacity];
    }
}
