/** Rotatable 3-D MDS scatter colored by class.
 *
 * Drag rotates (yaw/pitch); in brush mode drag sweeps a screen-space
 * rectangle instead (shift = additive).  The selection is an index set, so
 * rotating never changes it: rotation only re-projects the same points. */

import type { Projected, Rect, Rotation } from "../geometry.js";
import { pointsInRect, projectPoints } from "../geometry.js";
import { classPalette } from "../scale.js";
import type { Selection, SelectionStore } from "../state.js";
import type { VizBundle } from "../types.js";

export class Scatter3dPanel {
    rotation: Rotation = { yaw: 0.5, pitch: 0.35 };
    brushMode = false;
    private projected: Projected[] = [];
    private palette: string[];
    private drag: { x: number; y: number } | null = null;
    private rect: Rect | null = null;

    constructor(
        private canvas: HTMLCanvasElement,
        private bundle: VizBundle,
        private store: SelectionStore,
    ) {
        this.palette = classPalette(bundle.class_names.length);
        canvas.addEventListener("pointerdown", (e) => this.down(e));
        canvas.addEventListener("pointermove", (e) => this.move(e));
        canvas.addEventListener("pointerup", (e) => this.up(e));
    }

    private pos(e: PointerEvent): { x: number; y: number } {
        const r = this.canvas.getBoundingClientRect();
        return {
            x: (e.clientX - r.left) * (this.canvas.width / r.width),
            y: (e.clientY - r.top) * (this.canvas.height / r.height),
        };
    }

    private down(e: PointerEvent): void {
        const p = this.pos(e);
        this.drag = p;
        if (this.brushMode) this.rect = { x0: p.x, y0: p.y, x1: p.x, y1: p.y };
        this.canvas.setPointerCapture(e.pointerId);
    }

    private move(e: PointerEvent): void {
        if (!this.drag) return;
        const p = this.pos(e);
        if (this.brushMode && this.rect) {
            this.rect.x1 = p.x;
            this.rect.y1 = p.y;
        } else {
            this.rotation = {
                yaw: this.rotation.yaw + (p.x - this.drag.x) * 0.01,
                pitch: this.rotation.pitch + (p.y - this.drag.y) * 0.01,
            };
            this.drag = p;
        }
        this.render(this.store.get());
    }

    private up(e: PointerEvent): void {
        if (this.brushMode && this.rect) {
            const r = this.rect;
            this.rect = null;
            this.drag = null;
            const tiny = Math.abs(r.x1 - r.x0) < 2 && Math.abs(r.y1 - r.y0) < 2;
            const picked = tiny ? [] : pointsInRect(this.projected, r);
            this.store.set(picked, "mds3d", e.shiftKey);
            return;
        }
        this.drag = null;
        this.render(this.store.get());
    }

    render(sel: Selection): void {
        const ctx = this.canvas.getContext("2d");
        if (!ctx) return;
        const { width, height } = this.canvas;
        ctx.clearRect(0, 0, width, height);
        this.projected = projectPoints(this.bundle.mds_coordinates,
                                       this.rotation, width, height);
        const selected = new Set(sel.indices);
        const dim = selected.size > 0;
        // painter's order: far points first
        const order = this.projected.map((_, i) => i)
            .sort((a, b) => this.projected[a].depth - this.projected[b].depth);
        for (const i of order) {
            const pt = this.projected[i];
            const isSel = selected.has(i);
            ctx.globalAlpha = !dim || isSel ? 0.95 : 0.2;
            ctx.fillStyle = this.palette[this.bundle.labels[i]];
            ctx.beginPath();
            ctx.arc(pt.x, pt.y, isSel ? 5 : 3, 0, 2 * Math.PI);
            ctx.fill();
            if (isSel) {
                ctx.strokeStyle = "#222";
                ctx.lineWidth = 1.2;
                ctx.stroke();
            }
        }
        ctx.globalAlpha = 1;
        if (this.rect) {
            ctx.strokeStyle = "#444";
            ctx.setLineDash([4, 3]);
            ctx.strokeRect(Math.min(this.rect.x0, this.rect.x1),
                           Math.min(this.rect.y0, this.rect.y1),
                           Math.abs(this.rect.x1 - this.rect.x0),
                           Math.abs(this.rect.y1 - this.rect.y0));
            ctx.setLineDash([]);
        }
    }
}
