/** Parallel-coordinates panel, used twice: raw features (top-left) and
 * local importance (bottom-left).  Axes scale per-axis min-max from the
 * loaded data; hovering reports the raw values of the nearest polyline.
 * Dragging vertically near an axis brushes an interval on that axis
 * (shift = additive). */

import { axisX, brushAxisInterval, nearestAxis, valueY } from "../geometry.js";
import type { AxisScale } from "../scale.js";
import { axisScales, classPalette } from "../scale.js";
import type { Selection, SelectionStore } from "../state.js";
import type { VizBundle } from "../types.js";

const PAD_Y = 14;
const AXIS_TOLERANCE = 18;

export class ParallelPanel {
    private scales: AxisScale[];
    private axes: number[] = [];
    private palette: string[];
    private drag: { axis: number; y0: number; y1: number } | null = null;

    constructor(
        private canvas: HTMLCanvasElement,
        private bundle: VizBundle,
        private matrix: number[][],
        private store: SelectionStore,
        private panelName: string,
        private onHover: (text: string) => void,
    ) {
        this.scales = axisScales(matrix, bundle.feature_names.length);
        this.palette = classPalette(bundle.class_names.length);
        canvas.addEventListener("pointerdown", (e) => this.down(e));
        canvas.addEventListener("pointermove", (e) => this.move(e));
        canvas.addEventListener("pointerup", (e) => this.up(e));
        canvas.addEventListener("pointerleave", () => onHover(""));
    }

    private pos(e: PointerEvent): { x: number; y: number } {
        const r = this.canvas.getBoundingClientRect();
        return {
            x: (e.clientX - r.left) * (this.canvas.width / r.width),
            y: (e.clientY - r.top) * (this.canvas.height / r.height),
        };
    }

    private down(e: PointerEvent): void {
        const { x, y } = this.pos(e);
        const axis = nearestAxis(x, this.axes, AXIS_TOLERANCE);
        if (axis < 0) return;
        this.drag = { axis, y0: y, y1: y };
        this.canvas.setPointerCapture(e.pointerId);
    }

    private move(e: PointerEvent): void {
        const { x, y } = this.pos(e);
        if (this.drag) {
            this.drag.y1 = y;
            this.render(this.store.get());
            return;
        }
        this.hover(x, y);
    }

    private up(e: PointerEvent): void {
        if (!this.drag) return;
        const { axis, y0, y1 } = this.drag;
        this.drag = null;
        const picked = Math.abs(y1 - y0) < 2
            ? []
            : brushAxisInterval(this.matrix, axis, this.scales[axis], y0, y1,
                                this.canvas.height, PAD_Y);
        this.store.set(picked, this.panelName, e.shiftKey);
    }

    private hover(x: number, y: number): void {
        const axis = nearestAxis(x, this.axes, AXIS_TOLERANCE);
        if (axis < 0) {
            this.onHover("");
            return;
        }
        let best = -1;
        let bestDist = 10;
        this.matrix.forEach((row, i) => {
            const d = Math.abs(valueY(row[axis], this.scales[axis],
                                      this.canvas.height, PAD_Y) - y);
            if (d < bestDist) {
                best = i;
                bestDist = d;
            }
        });
        if (best < 0) {
            this.onHover("");
            return;
        }
        const name = this.bundle.feature_names[axis];
        this.onHover(`#${best} ${name} = ${this.matrix[best][axis].toPrecision(5)} `
            + `(class ${this.bundle.class_names[this.bundle.labels[best]]})`);
    }

    render(sel: Selection): void {
        const ctx = this.canvas.getContext("2d");
        if (!ctx) return;
        const { width, height } = this.canvas;
        const p = this.bundle.feature_names.length;
        this.axes = axisX(p, width);
        ctx.clearRect(0, 0, width, height);

        ctx.strokeStyle = "#d0d0d0";
        ctx.lineWidth = 1;
        for (const ax of this.axes) {
            ctx.beginPath();
            ctx.moveTo(ax, PAD_Y);
            ctx.lineTo(ax, height - PAD_Y);
            ctx.stroke();
        }

        const selected = new Set(sel.indices);
        const dim = selected.size > 0;
        const drawLine = (i: number): void => {
            ctx.beginPath();
            for (let j = 0; j < p; j++) {
                const y = valueY(this.matrix[i][j], this.scales[j], height, PAD_Y);
                if (j === 0) ctx.moveTo(this.axes[j], y);
                else ctx.lineTo(this.axes[j], y);
            }
            ctx.stroke();
        };

        ctx.lineWidth = 1;
        for (let i = 0; i < this.matrix.length; i++) {
            if (selected.has(i)) continue;
            ctx.strokeStyle = this.palette[this.bundle.labels[i]]
                + (dim ? "22" : "88");
            drawLine(i);
        }
        ctx.lineWidth = 1.8;
        for (const i of sel.indices) {
            ctx.strokeStyle = this.palette[this.bundle.labels[i]];
            drawLine(i);
        }

        if (this.drag) {
            const { axis, y0, y1 } = this.drag;
            ctx.fillStyle = "rgba(60, 60, 60, 0.18)";
            ctx.fillRect(this.axes[axis] - 7, Math.min(y0, y1), 14, Math.abs(y1 - y0));
        }
    }
}
