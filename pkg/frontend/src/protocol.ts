// Bridge wire protocol: JSON text frames for control/state, binary frames
// for JPEG previews (2-byte big-endian header length + JSON header + payload).

export const SUPPORTED_PROTOCOL = 1;

export const METRIC_NAMES = [
    "attention",
    "engagement",
    "excitement",
    "interest",
    "relaxation",
    "stress",
] as const;

export type MetricName = (typeof METRIC_NAMES)[number];

export interface MetricsPayload {
    t: number;
    values: Record<MetricName, number>;
}

export interface ParamsPayload {
    t: number;
    power: number;
    color_mix: [number, number, number];
    bw: number;
    dpower_per_s: number;
    loop_freq_hz: number;
    rendered_power: number;
    phase: number;
}

export interface SnapshotPayload {
    mode: string;
    recording: boolean;
    metrics?: MetricsPayload;
    params?: ParamsPayload;
}

export interface AckPayload {
    id: number | null;
    state: { mode: string; recording: boolean; [key: string]: unknown };
}

export interface ErrorPayload {
    id?: number | null;
    error: string;
}

export type BridgeMessage =
    | { type: "hello"; seq: number; payload: { protocol: number; engine_version: string } }
    | { type: "snapshot"; seq: number; payload: SnapshotPayload }
    | { type: "metrics"; seq: number; payload: MetricsPayload }
    | { type: "params"; seq: number; payload: ParamsPayload }
    | { type: "phrase"; seq: number; payload: { event: string; [key: string]: unknown } }
    | { type: "ack"; seq: number; payload: AckPayload }
    | { type: "error"; seq: number; payload: ErrorPayload };

export interface FrameHeader {
    type: "frame";
    seq: number;
    encoding: string;
    width: number;
    height: number;
}

export interface CommandMessage {
    type: "command";
    id: number;
    payload: Record<string, unknown>;
}

export function parseMessage(raw: string): BridgeMessage {
    const data = JSON.parse(raw) as BridgeMessage;
    if (typeof data !== "object" || data === null || typeof data.type !== "string") {
        throw new Error("malformed bridge message");
    }
    return data;
}

/** Split a binary preview frame into its JSON header and JPEG bytes. */
export function decodeFrame(data: ArrayBuffer): { header: FrameHeader; jpeg: Uint8Array } {
    const view = new DataView(data);
    const headerLength = view.getUint16(0, false);
    const headerBytes = new Uint8Array(data, 2, headerLength);
    const header = JSON.parse(new TextDecoder().decode(headerBytes)) as FrameHeader;
    return { header, jpeg: new Uint8Array(data, 2 + headerLength) };
}
