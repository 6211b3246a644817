/** Per-axis min-max scaling.  Axes are scaled independently from the loaded
 * data (no global normalization); raw values stay available for tooltips
 * and exports. */

export interface AxisScale {
    min: number;
    max: number;
}

export function axisScales(matrix: number[][], p: number): AxisScale[] {
    const scales: AxisScale[] = [];
    for (let j = 0; j < p; j++) {
        let lo = Infinity;
        let hi = -Infinity;
        for (const row of matrix) {
            const v = row[j];
            if (v < lo) lo = v;
            if (v > hi) hi = v;
        }
        if (!Number.isFinite(lo)) {
            lo = 0;
            hi = 1;
        }
        scales.push({ min: lo, max: hi });
    }
    return scales;
}

/** Map a raw value to [0, 1]; constant axes pin to the middle. */
export function toUnit(v: number, s: AxisScale): number {
    if (s.max === s.min) return 0.5;
    return (v - s.min) / (s.max - s.min);
}

export function classPalette(count: number): string[] {
    const base = [
        "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
        "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac",
    ];
    const out: string[] = [];
    for (let i = 0; i < count; i++) out.push(base[i % base.length]);
    return out;
}
