// Bridge client: one WebSocket with reconnecting glue around ConsoleState.
// The socket constructor and timers are injectable so tests can run against
// fake sockets or a node `ws` implementation.

import { CommandMessage, decodeFrame, parseMessage } from "./protocol.js";
import { ConsoleState } from "./state.js";
import { realClock, Throttle, ThrottleClock } from "./throttle.js";

export interface SocketLike {
    binaryType: string;
    send(data: string): void;
    close(): void;
    onopen: ((ev?: unknown) => void) | null;
    onmessage: ((ev: { data: unknown }) => void) | null;
    onclose: ((ev?: unknown) => void) | null;
    onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface BridgeClientOptions {
    url: string;
    socketFactory?: SocketFactory;
    clock?: ThrottleClock;
    baseBackoffMs?: number;
    maxBackoffMs?: number;   // reconnect delay cap
    commandRateMs?: number;  // per-slider throttle interval
    onUpdate?: (state: ConsoleState) => void;
}

const defaultFactory: SocketFactory = (url) =>
    new WebSocket(url) as unknown as SocketLike;

export class BridgeClient {
    readonly state = new ConsoleState();
    private socket: SocketLike | null = null;
    private closedByUser = false;
    private attempts = 0;
    private nextCommandId = 1;
    private reconnectTimer: unknown = null;
    private throttles = new Map<string, Throttle<number>>();

    private readonly factory: SocketFactory;
    private readonly clock: ThrottleClock;
    private readonly baseBackoffMs: number;
    private readonly maxBackoffMs: number;
    private readonly commandRateMs: number;
    private readonly onUpdate: (state: ConsoleState) => void;

    constructor(private readonly options: BridgeClientOptions) {
        this.factory = options.socketFactory ?? defaultFactory;
        this.clock = options.clock ?? realClock;
        this.baseBackoffMs = options.baseBackoffMs ?? 250;
        this.maxBackoffMs = options.maxBackoffMs ?? 10_000;
        this.commandRateMs = options.commandRateMs ?? 100;
        this.onUpdate = options.onUpdate ?? (() => undefined);
    }

    connect(): void {
        this.closedByUser = false;
        this.state.connection = this.attempts > 0 ? "reconnecting" : "connecting";
        this.notify();
        const socket = this.factory(this.options.url);
        this.socket = socket;
        socket.binaryType = "arraybuffer";
        socket.onopen = () => undefined; // backoff resets on handshake, not on open
        socket.onmessage = (ev) => this.handleData(ev.data);
        socket.onerror = () => undefined; // close always follows
        socket.onclose = () => {
            this.socket = null;
            if (this.closedByUser || this.state.connection === "version-mismatch") {
                return; // no silent reconnect after a handshake failure
            }
            this.state.connection = "reconnecting";
            this.state.markGap();
            this.notify();
            this.scheduleReconnect();
        };
    }

    private scheduleReconnect(): void {
        const delay = Math.min(
            this.baseBackoffMs * 2 ** this.attempts,
            this.maxBackoffMs,
        );
        this.attempts += 1;
        this.reconnectTimer = this.clock.setTimer(() => this.connect(), delay);
    }

    close(): void {
        this.closedByUser = true;
        if (this.reconnectTimer !== null) {
            this.clock.clearTimer(this.reconnectTimer);
            this.reconnectTimer = null;
        }
        for (const throttle of this.throttles.values()) throttle.cancel();
        this.socket?.close();
        this.socket = null;
    }

    private handleData(data: unknown): void {
        if (typeof data === "string") {
            this.state.handleMessage(parseMessage(data));
            if (this.state.connection === "connected") {
                this.attempts = 0; // a completed handshake resets the backoff
            } else if (this.state.connection === "version-mismatch") {
                this.socket?.close();
            }
        } else if (data instanceof ArrayBuffer) {
            const { header, jpeg } = decodeFrame(data);
            this.state.handleFrame(header, jpeg);
        } else if (ArrayBuffer.isView(data as ArrayBufferView)) {
            const view = data as ArrayBufferView;
            const copy = new Uint8Array(view.byteLength);
            copy.set(new Uint8Array(view.buffer, view.byteOffset, view.byteLength));
            const { header, jpeg } = decodeFrame(copy.buffer);
            this.state.handleFrame(header, jpeg);
        }
        this.notify();
    }

    private notify(): void {
        this.onUpdate(this.state);
    }

    sendCommand(payload: Record<string, unknown>, action?: string): number {
        const id = this.nextCommandId++;
        const message: CommandMessage = { type: "command", id, payload };
        this.state.pending.set(id, {
            id,
            action: action ?? String(payload.action ?? "unknown"),
            detail: payload,
            sentAt: this.clock.now(),
        });
        this.socket?.send(JSON.stringify(message));
        return id;
    }

    /** Mode switches are optimistic-intent only; UI waits for the ack. */
    setMode(mode: string): void {
        this.state.pendingMode = mode;
        this.sendCommand({ action: "set_mode", mode }, "set_mode");
        this.notify();
    }

    /** Slider input path: throttled to at most one command per 100 ms. */
    overrideMetric(name: string, value: number): void {
        let throttle = this.throttles.get(name);
        if (!throttle) {
            throttle = new Throttle<number>(
                (v) => this.sendCommand({ action: "set_metric", name, value: v }, "set_metric"),
                this.commandRateMs,
                this.clock,
            );
            this.throttles.set(name, throttle);
        }
        throttle.call(value);
    }

    startRecording(path: string): void {
        this.sendCommand({ action: "record_start", path }, "record_start");
    }

    stopRecording(): void {
        this.sendCommand({ action: "record_stop" }, "record_stop");
    }

    /** Hands-free demos: swap the engine's seeded synthetic source. */
    setSyntheticProfile(profile: string): void {
        this.sendCommand({ action: "set_profile", profile }, "set_profile");
    }
}
