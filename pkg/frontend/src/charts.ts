// Minimal canvas strip charts. Pure draw-from-data: the series handed in
// are exactly the broadcast values held in ConsoleState rings.

import { TimelinePoint } from "./ring.js";

export interface SeriesStyle {
    label: string;
    color: string;
    min: number;
    max: number;
}

export interface ChartInput {
    points: TimelinePoint[];
    style: SeriesStyle;
}

const BG = "#101018";
const GRID = "#2a2a3a";
const GAP = "#705020";
const TEXT = "#9aa0b0";

export function drawChart(
    ctx: CanvasRenderingContext2D,
    width: number,
    height: number,
    series: ChartInput[],
    gapMarkers: number[],
    windowSeconds = 300,
): void {
    ctx.fillStyle = BG;
    ctx.fillRect(0, 0, width, height);
    if (series.length === 0) return;

    const newest = series
        .map((s) => s.points.at(-1)?.t ?? 0)
        .reduce((a, b) => Math.max(a, b), 0);
    const t0 = newest - windowSeconds;
    const toX = (t: number) => ((t - t0) / windowSeconds) * width;

    ctx.strokeStyle = GRID;
    ctx.lineWidth = 1;
    for (let i = 1; i < 4; i++) {
        const y = (i / 4) * height;
        ctx.beginPath();
        ctx.moveTo(0, y);
        ctx.lineTo(width, y);
        ctx.stroke();
    }

    ctx.strokeStyle = GAP;
    for (const t of gapMarkers) {
        if (t < t0) continue;
        const x = toX(t);
        ctx.beginPath();
        ctx.moveTo(x, 0);
        ctx.lineTo(x, height);
        ctx.stroke();
    }

    let labelY = 14;
    for (const { points, style } of series) {
        const span = style.max - style.min || 1;
        const toY = (v: number) => height - ((v - style.min) / span) * height;
        ctx.strokeStyle = style.color;
        ctx.lineWidth = 1.5;
        ctx.beginPath();
        let started = false;
        for (const point of points) {
            if (point.t < t0) continue;
            const x = toX(point.t);
            const y = toY(point.value);
            if (started) ctx.lineTo(x, y);
            else {
                ctx.moveTo(x, y);
                started = true;
            }
        }
        ctx.stroke();
        ctx.fillStyle = style.color;
        ctx.font = "11px monospace";
        const latest = points.at(-1)?.value;
        ctx.fillText(
            `${style.label}${latest !== undefined ? " " + latest.toFixed(3) : ""}`,
            6,
            labelY,
        );
        labelY += 13;
    }
    ctx.fillStyle = TEXT;
    ctx.font = "10px monospace";
    ctx.fillText(`${windowSeconds}s window`, width - 78, height - 6);
}
