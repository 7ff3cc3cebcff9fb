// DOM wiring for the operator console. Connects to the engine bridge at
// ws://<?bridge=host:port>/ws (defaults to the page host, port 8777).

import { BridgeClient } from "./client.js";
import { drawChart } from "./charts.js";
import { METRIC_NAMES, MetricName } from "./protocol.js";
import { ConsoleState } from "./state.js";

function bridgeUrl(): string {
    const param = new URLSearchParams(location.search).get("bridge");
    const host = param ?? `${location.hostname || "127.0.0.1"}:8777`;
    return `ws://${host}/ws`;
}

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing #${id}`);
    return node as T;
}

const statusEl = el<HTMLSpanElement>("status");
const bannerEl = el<HTMLDivElement>("banner");
const modeEl = el<HTMLSpanElement>("mode");
const toastsEl = el<HTMLDivElement>("toasts");
const frameImg = el<HTMLImageElement>("preview");
const frameMeta = el<HTMLSpanElement>("preview-meta");
const paramsCanvas = el<HTMLCanvasElement>("params-chart");
const metricsCanvas = el<HTMLCanvasElement>("metrics-chart");

const sliders = new Map<MetricName, HTMLInputElement>();
const sliderReadouts = new Map<MetricName, HTMLSpanElement>();
const slidersBox = el<HTMLDivElement>("sliders");
const dragging = new Set<MetricName>();

const METRIC_COLORS: Record<MetricName, string> = {
    attention: "#6fd08c",
    engagement: "#8cb9ff",
    excitement: "#ff8c6f",
    interest: "#d6c36f",
    relaxation: "#9a8cff",
    stress: "#ff6f9a",
};

for (const name of METRIC_NAMES) {
    const row = document.createElement("div");
    row.className = "slider-row";
    const label = document.createElement("label");
    label.textContent = name;
    label.style.color = METRIC_COLORS[name];
    const input = document.createElement("input");
    input.type = "range";
    input.min = "0";
    input.max = "1";
    input.step = "0.01";
    input.value = "0.5";
    const readout = document.createElement("span");
    readout.textContent = "0.50";
    input.addEventListener("pointerdown", () => dragging.add(name));
    input.addEventListener("pointerup", () => dragging.delete(name));
    input.addEventListener("input", () => {
        readout.textContent = Number(input.value).toFixed(2);
        client.overrideMetric(name, Number(input.value));
    });
    row.append(label, input, readout);
    slidersBox.append(row);
    sliders.set(name, input);
    sliderReadouts.set(name, readout);
}

let lastToastCount = 0;
let frameUrl: string | null = null;

function render(state: ConsoleState): void {
    statusEl.textContent = state.connection;
    statusEl.dataset.state = state.connection;
    bannerEl.textContent = state.banner ?? "";
    bannerEl.style.display = state.banner ? "block" : "none";
    modeEl.textContent =
        state.mode === null
            ? "…"
            : state.pendingMode
              ? `${state.mode} (switching to ${state.pendingMode}…)`
              : state.mode;

    // sliders track the authoritative values unless actively dragged,
    // so a rejected override visibly snaps back
    for (const name of METRIC_NAMES) {
        const value = state.metricValues[name];
        const slider = sliders.get(name)!;
        if (value !== undefined && !dragging.has(name)) {
            slider.value = String(value);
            sliderReadouts.get(name)!.textContent = value.toFixed(2);
        }
        slider.disabled = state.mode !== "manual";
    }

    if (state.toasts.length !== lastToastCount) {
        lastToastCount = state.toasts.length;
        toastsEl.replaceChildren(
            ...state.toasts.slice(-4).map((toast) => {
                const div = document.createElement("div");
                div.className = "toast";
                div.textContent = toast.text;
                return div;
            }),
        );
    }

    if (state.lastFrame) {
        const blob = new Blob([state.lastFrame.jpeg.slice().buffer], { type: "image/jpeg" });
        const next = URL.createObjectURL(blob);
        if (frameUrl) URL.revokeObjectURL(frameUrl);
        frameUrl = next;
        frameImg.src = next;
        frameMeta.textContent =
            `#${state.lastFrame.header.seq} ` +
            `${state.lastFrame.header.width}×${state.lastFrame.header.height}` +
            (state.framesDropped ? ` (${state.framesDropped} dropped)` : "");
    }

    const pctx = paramsCanvas.getContext("2d");
    if (pctx) {
        drawChart(
            pctx,
            paramsCanvas.width,
            paramsCanvas.height,
            [
                {
                    points: state.paramTimelines.power.toArray(),
                    style: { label: "power", color: "#6fd08c", min: 2, max: 10 },
                },
                {
                    points: state.paramTimelines.rendered_power.toArray(),
                    style: { label: "rendered", color: "#3f8c5c", min: 2, max: 10 },
                },
                {
                    points: state.paramTimelines.bw.toArray(),
                    style: { label: "bw", color: "#8cb9ff", min: 0, max: 1 },
                },
                {
                    points: state.paramTimelines.loop_freq_hz.toArray(),
                    style: { label: "loop Hz", color: "#d6c36f", min: 1 / 70, max: 1 / 50 },
                },
            ],
            state.gapMarkers,
        );
    }
    const mctx = metricsCanvas.getContext("2d");
    if (mctx) {
        drawChart(
            mctx,
            metricsCanvas.width,
            metricsCanvas.height,
            METRIC_NAMES.map((name) => ({
                points: state.metricTimelines[name].toArray(),
                style: { label: name, color: METRIC_COLORS[name], min: 0, max: 1 },
            })),
            state.gapMarkers,
        );
    }
}

const client = new BridgeClient({ url: bridgeUrl(), onUpdate: render });

for (const mode of ["live", "replay", "synthetic", "manual"]) {
    el<HTMLButtonElement>(`mode-${mode}`).addEventListener("click", () =>
        client.setMode(mode),
    );
}
for (const profile of ["calm", "agitated", "drifting"]) {
    el<HTMLButtonElement>(`profile-${profile}`).addEventListener("click", () =>
        client.setSyntheticProfile(profile),
    );
}
el<HTMLButtonElement>("record-toggle").addEventListener("click", () => {
    if (client.state.recording) client.stopRecording();
    else client.startRecording(`console-session-${Date.now()}.fbsession.jsonl`);
});

client.connect();
