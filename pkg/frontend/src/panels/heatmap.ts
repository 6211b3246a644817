/** Class-votes heatmap: one row per sample (sorted by true class, then by
 * OOB vote margin), one column per tree when per-tree votes shipped in the
 * bundle, otherwise one column per class shaded by vote fraction.
 * Dragging selects a row range (shift = additive). */

import { heatmapOrder, rowsInRange } from "../geometry.js";
import { classPalette } from "../scale.js";
import type { Selection, SelectionStore } from "../state.js";
import type { VizBundle } from "../types.js";

export class HeatmapPanel {
    readonly order: number[];
    readonly perTree: boolean;
    private palette: string[];
    private drag: { y0: number; y1: number } | null = null;

    constructor(
        private canvas: HTMLCanvasElement,
        private bundle: VizBundle,
        private store: SelectionStore,
    ) {
        this.order = heatmapOrder(bundle.labels, bundle.vote_fractions);
        this.perTree = bundle.per_tree_votes !== null;
        this.palette = classPalette(bundle.class_names.length);
        canvas.addEventListener("pointerdown", (e) => this.down(e));
        canvas.addEventListener("pointermove", (e) => this.move(e));
        canvas.addEventListener("pointerup", (e) => this.up(e));
    }

    private rowHeight(): number {
        return this.canvas.height / this.bundle.n;
    }

    private posY(e: PointerEvent): number {
        const r = this.canvas.getBoundingClientRect();
        return (e.clientY - r.top) * (this.canvas.height / r.height);
    }

    private down(e: PointerEvent): void {
        const y = this.posY(e);
        this.drag = { y0: y, y1: y };
        this.canvas.setPointerCapture(e.pointerId);
    }

    private move(e: PointerEvent): void {
        if (!this.drag) return;
        this.drag.y1 = this.posY(e);
        this.render(this.store.get());
    }

    private up(e: PointerEvent): void {
        if (!this.drag) return;
        const { y0, y1 } = this.drag;
        this.drag = null;
        const picked = Math.abs(y1 - y0) < 2
            ? []
            : rowsInRange(this.order, y0, y1, this.rowHeight());
        this.store.set(picked, "heatmap", e.shiftKey);
    }

    render(sel: Selection): void {
        const ctx = this.canvas.getContext("2d");
        if (!ctx) return;
        const { width, height } = this.canvas;
        ctx.clearRect(0, 0, width, height);
        const rh = this.rowHeight();
        const selected = new Set(sel.indices);
        const votes = this.bundle.per_tree_votes;

        if (this.perTree && votes) {
            const B = votes[0].length;
            const cw = width / B;
            this.order.forEach((i, row) => {
                const y = row * rh;
                for (let t = 0; t < B; t++) {
                    ctx.fillStyle = this.palette[votes[i][t]];
                    ctx.globalAlpha = selected.size === 0 || selected.has(i) ? 0.95 : 0.15;
                    ctx.fillRect(t * cw, y, Math.ceil(cw), Math.ceil(rh));
                }
            });
        } else {
            const C = this.bundle.class_names.length;
            const cw = width / C;
            this.order.forEach((i, row) => {
                const y = row * rh;
                for (let c = 0; c < C; c++) {
                    ctx.fillStyle = this.palette[c];
                    const frac = this.bundle.vote_fractions[i][c];
                    const alpha = selected.size === 0 || selected.has(i) ? 1 : 0.15;
                    ctx.globalAlpha = alpha * (0.08 + 0.88 * frac);
                    ctx.fillRect(c * cw, y, Math.ceil(cw), Math.ceil(rh));
                }
            });
        }
        ctx.globalAlpha = 1;

        // selection ticks in the left gutter
        ctx.fillStyle = "#111";
        this.order.forEach((i, row) => {
            if (selected.has(i)) ctx.fillRect(0, row * rh, 3, Math.ceil(rh));
        });

        if (this.drag) {
            ctx.strokeStyle = "#444";
            ctx.setLineDash([4, 3]);
            const lo = Math.min(this.drag.y0, this.drag.y1);
            ctx.strokeRect(1, lo, width - 2, Math.abs(this.drag.y1 - this.drag.y0));
            ctx.setLineDash([]);
        }
    }
}
