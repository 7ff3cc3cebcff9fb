// Console state: everything the UI renders, fed exclusively by bridge
// messages. Values shown on charts are exactly the broadcast values (no
// client-side recomputation of the engine mapping), and mode changes are
// never rendered optimistically: the authoritative mode comes from acks
// and broadcasts only.

import {
    BridgeMessage,
    FrameHeader,
    MetricName,
    METRIC_NAMES,
    ParamsPayload,
    SUPPORTED_PROTOCOL,
} from "./protocol.js";
import { Ring, TIMELINE_CAPACITY } from "./ring.js";

export type ConnectionStatus =
    | "idle"
    | "connecting"
    | "connected"
    | "reconnecting"
    | "version-mismatch";

export interface Toast {
    text: string;
    at: number;
}

export interface PendingCommand {
    id: number;
    action: string;
    detail: Record<string, unknown>;
    sentAt: number;
}

export interface FrameUpdate {
    header: FrameHeader;
    jpeg: Uint8Array;
}

export const PARAM_SERIES = [
    "power",
    "rendered_power",
    "bw",
    "loop_freq_hz",
    "dpower_per_s",
] as const;
export type ParamSeries = (typeof PARAM_SERIES)[number];

export class ConsoleState {
    connection: ConnectionStatus = "idle";
    banner: string | null = null;
    engineVersion: string | null = null;
    mode: string | null = null;
    pendingMode: string | null = null;
    recording = false;

    metricValues: Partial<Record<MetricName, number>> = {};
    latestParams: ParamsPayload | null = null;

    paramTimelines: Record<ParamSeries, Ring>;
    metricTimelines: Record<MetricName, Ring>;
    gapMarkers: number[] = [];
    toasts: Toast[] = [];

    pending = new Map<number, PendingCommand>();
    lastSeq: number | null = null;
    lastFrameSeq: number | null = null;
    lastFrame: FrameUpdate | null = null;
    framesDropped = 0;

    constructor(capacity: number = TIMELINE_CAPACITY) {
        this.paramTimelines = Object.fromEntries(
            PARAM_SERIES.map((name) => [name, new Ring(capacity)]),
        ) as Record<ParamSeries, Ring>;
        this.metricTimelines = Object.fromEntries(
            METRIC_NAMES.map((name) => [name, new Ring(capacity)]),
        ) as Record<MetricName, Ring>;
    }

    /** Note a reconnect boundary so charts can draw a discontinuity mark. */
    markGap(): void {
        const t = this.latestParams?.t;
        if (t !== undefined) this.gapMarkers.push(t);
        this.lastSeq = null;
    }

    private trackSeq(seq: number): void {
        if (this.lastSeq !== null && seq > this.lastSeq + 1) {
            const t = this.latestParams?.t;
            if (t !== undefined) this.gapMarkers.push(t);
        }
        this.lastSeq = seq;
    }

    handleMessage(msg: BridgeMessage): void {
        this.trackSeq(msg.seq);
        switch (msg.type) {
            case "hello": {
                if (msg.payload.protocol !== SUPPORTED_PROTOCOL) {
                    this.connection = "version-mismatch";
                    this.banner =
                        `protocol mismatch: bridge speaks v${msg.payload.protocol}, ` +
                        `console expects v${SUPPORTED_PROTOCOL}`;
                    return;
                }
                this.engineVersion = msg.payload.engine_version;
                this.connection = "connected";
                this.banner = null;
                return;
            }
            case "snapshot": {
                this.mode = msg.payload.mode;
                this.recording = msg.payload.recording;
                if (msg.payload.metrics) this.applyMetrics(msg.payload.metrics.t, msg.payload.metrics.values);
                if (msg.payload.params) this.applyParams(msg.payload.params);
                return;
            }
            case "metrics": {
                this.applyMetrics(msg.payload.t, msg.payload.values);
                return;
            }
            case "params": {
                this.applyParams(msg.payload);
                return;
            }
            case "phrase":
                return;
            case "ack": {
                const pending = this.pending.get(msg.payload.id ?? -1);
                if (pending) this.pending.delete(pending.id);
                this.mode = msg.payload.state.mode;
                this.recording = msg.payload.state.recording;
                if (pending?.action === "set_mode") this.pendingMode = null;
                if (
                    pending?.action === "set_metric" &&
                    typeof msg.payload.state.value === "number"
                ) {
                    // authoritative echo of the slider value
                    this.metricValues[pending.detail.name as MetricName] =
                        msg.payload.state.value;
                }
                return;
            }
            case "error": {
                const pending = this.pending.get(msg.payload.id ?? -1);
                if (pending) {
                    this.pending.delete(pending.id);
                    if (pending.action === "set_mode") this.pendingMode = null;
                    // set_metric rejection: metricValues was never updated
                    // optimistically, so the bound slider snaps back on render
                }
                this.toasts.push({ text: msg.payload.error, at: Date.now() });
                return;
            }
        }
    }

    private applyMetrics(t: number, values: Record<MetricName, number>): void {
        for (const name of METRIC_NAMES) {
            const value = values[name];
            if (typeof value !== "number") continue;
            this.metricValues[name] = value;
            this.metricTimelines[name].push({ t, value });
        }
    }

    private applyParams(payload: ParamsPayload): void {
        this.latestParams = payload;
        for (const series of PARAM_SERIES) {
            this.paramTimelines[series].push({ t: payload.t, value: payload[series] });
        }
    }

    /** Frames may be dropped upstream but must never render out of order. */
    handleFrame(header: FrameHeader, jpeg: Uint8Array): void {
        if (this.lastFrameSeq !== null && header.seq <= this.lastFrameSeq) {
            this.framesDropped += 1;
            return;
        }
        this.lastFrameSeq = header.seq;
        this.lastFrame = { header, jpeg };
    }
}
