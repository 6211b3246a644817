/** Pure geometry for the panels: 3-D rotation/projection, rectangle brush
 * hit-testing, parallel-axis interval brushes, and heatmap row ordering.
 * Everything here is side-effect free and unit-tested. */

import type { AxisScale } from "./scale.js";
import { toUnit } from "./scale.js";

// ---------------------------------------------------------------------------
// 3-D scatter
// ---------------------------------------------------------------------------

export interface Rotation {
    yaw: number;   // radians around the vertical axis
    pitch: number; // radians around the horizontal axis
}

export interface Projected {
    x: number;
    y: number;
    depth: number;
}

/** Rotate a 3-vector by yaw then pitch. */
export function rotatePoint(p: readonly number[], rot: Rotation): [number, number, number] {
    const [x, y, z] = p;
    const cy = Math.cos(rot.yaw);
    const sy = Math.sin(rot.yaw);
    const x1 = cy * x + sy * z;
    const z1 = -sy * x + cy * z;
    const cp = Math.cos(rot.pitch);
    const sp = Math.sin(rot.pitch);
    const y2 = cp * y - sp * z1;
    const z2 = sp * y + cp * z1;
    return [x1, y2, z2];
}

/** Orthographic screen projection of all points, centered in the viewport
 * and uniformly scaled to fit. */
export function projectPoints(
    coords: readonly number[][], rot: Rotation, width: number, height: number,
    margin = 20,
): Projected[] {
    const rotated = coords.map((p) => rotatePoint(p, rot));
    let ext = 1e-12;
    for (const [x, y] of rotated) {
        ext = Math.max(ext, Math.abs(x), Math.abs(y));
    }
    const half = Math.min(width, height) / 2 - margin;
    const scale = half / ext;
    const cx = width / 2;
    const cy = height / 2;
    return rotated.map(([x, y, z]) => ({
        x: cx + scale * x,
        y: cy - scale * y,
        depth: z,
    }));
}

export interface Rect {
    x0: number;
    y0: number;
    x1: number;
    y1: number;
}

export function normalizeRect(r: Rect): Rect {
    return {
        x0: Math.min(r.x0, r.x1),
        y0: Math.min(r.y0, r.y1),
        x1: Math.max(r.x0, r.x1),
        y1: Math.max(r.y0, r.y1),
    };
}

/** Indices of projected points inside a screen-space rectangle. */
export function pointsInRect(points: readonly Projected[], rect: Rect): number[] {
    const r = normalizeRect(rect);
    const out: number[] = [];
    points.forEach((pt, i) => {
        if (pt.x >= r.x0 && pt.x <= r.x1 && pt.y >= r.y0 && pt.y <= r.y1) {
            out.push(i);
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Parallel coordinates
// ---------------------------------------------------------------------------

/** Horizontal pixel position of each axis. */
export function axisX(p: number, width: number, pad = 30): number[] {
    if (p === 1) return [width / 2];
    const span = width - 2 * pad;
    const out: number[] = [];
    for (let j = 0; j < p; j++) out.push(pad + (span * j) / (p - 1));
    return out;
}

/** Vertical pixel position of a raw value on axis j (min at the bottom). */
export function valueY(
    v: number, scale: AxisScale, height: number, pad = 14,
): number {
    const unit = toUnit(v, scale);
    return height - pad - unit * (height - 2 * pad);
}

/** Nearest axis to a pixel x, or -1 when outside the tolerance. */
export function nearestAxis(x: number, axes: readonly number[], tolerance: number): number {
    let best = -1;
    let bestDist = tolerance;
    axes.forEach((ax, j) => {
        const d = Math.abs(x - ax);
        if (d <= bestDist) {
            best = j;
            bestDist = d;
        }
    });
    return best;
}

/** Samples whose polyline crosses axis j inside the pixel interval. */
export function brushAxisInterval(
    matrix: readonly number[][], axis: number, scale: AxisScale,
    yLo: number, yHi: number, height: number, pad = 14,
): number[] {
    const lo = Math.min(yLo, yHi);
    const hi = Math.max(yLo, yHi);
    const out: number[] = [];
    matrix.forEach((row, i) => {
        const y = valueY(row[axis], scale, height, pad);
        if (y >= lo && y <= hi) out.push(i);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Votes heatmap
// ---------------------------------------------------------------------------

/** Vote margin for the true class: fraction voting the truth minus the
 * strongest other class.  Uncovered samples (all-zero fractions) get -1. */
export function oobMargin(fractions: readonly number[], label: number): number {
    let total = 0;
    for (const f of fractions) total += f;
    if (total <= 0) return -1;
    let other = 0;
    fractions.forEach((f, c) => {
        if (c !== label && f > other) other = f;
    });
    return fractions[label] - other;
}

/** Display order: by true class, then by descending margin inside a class
 * (most confidently-correct samples first), index as the final tiebreak. */
export function heatmapOrder(labels: readonly number[], fractions: readonly number[][]): number[] {
    const order = labels.map((_, i) => i);
    const margins = labels.map((lab, i) => oobMargin(fractions[i], lab));
    order.sort((a, b) => {
        if (labels[a] !== labels[b]) return labels[a] - labels[b];
        if (margins[a] !== margins[b]) return margins[b] - margins[a];
        return a - b;
    });
    return order;
}

/** Map a display-row pixel range back to sample indices. */
export function rowsInRange(
    order: readonly number[], yLo: number, yHi: number, rowHeight: number,
): number[] {
    const lo = Math.min(yLo, yHi);
    const hi = Math.max(yLo, yHi);
    const first = Math.max(0, Math.floor(lo / rowHeight));
    const last = Math.min(order.length - 1, Math.floor(hi / rowHeight));
    const out: number[] = [];
    for (let r = first; r <= last; r++) out.push(order[r]);
    return out;
}
