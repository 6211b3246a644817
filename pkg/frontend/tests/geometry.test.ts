import { describe, expect, it } from "vitest";

import {
    axisX,
    brushAxisInterval,
    heatmapOrder,
    nearestAxis,
    oobMargin,
    pointsInRect,
    projectPoints,
    rotatePoint,
    rowsInRange,
    valueY,
} from "../src/geometry.js";
import { axisScales } from "../src/scale.js";
import { SelectionStore } from "../src/state.js";
import { makeBundle } from "./fixtures.js";

describe("3d projection", () => {
    it("zero rotation is the identity on x/y", () => {
        const [x, y, z] = rotatePoint([1, 2, 3], { yaw: 0, pitch: 0 });
        expect([x, y, z]).toEqual([1, 2, 3]);
    });

    it("rotation preserves vector length", () => {
        const v = [0.3, -1.2, 2.2];
        const r = rotatePoint(v, { yaw: 0.9, pitch: -0.4 });
        const norm = (a: number[]) => Math.hypot(a[0], a[1], a[2]);
        expect(norm(r)).toBeCloseTo(norm(v), 12);
    });

    it("projects every point inside the viewport", () => {
        const pts = makeBundle().mds_coordinates;
        const proj = projectPoints(pts, { yaw: 0.7, pitch: 0.3 }, 400, 300);
        for (const p of proj) {
            expect(p.x).toBeGreaterThanOrEqual(0);
            expect(p.x).toBeLessThanOrEqual(400);
            expect(p.y).toBeGreaterThanOrEqual(0);
            expect(p.y).toBeLessThanOrEqual(300);
        }
    });

    it("pointsInRect picks the cluster under the rectangle", () => {
        const pts = makeBundle().mds_coordinates;
        const proj = projectPoints(pts, { yaw: 0, pitch: 0 }, 400, 300);
        // samples 0..2 sit at negative x: brush the left half
        const picked = pointsInRect(proj, { x0: 0, y0: 0, x1: 200, y1: 300 });
        expect(picked).toEqual([0, 1, 2]);
    });

    it("rotating re-projects but never touches the selection", () => {
        const store = new SelectionStore();
        const pts = makeBundle().mds_coordinates;
        const before = projectPoints(pts, { yaw: 0, pitch: 0 }, 400, 300);
        store.set(pointsInRect(before, { x0: 0, y0: 0, x1: 200, y1: 300 }), "mds3d");
        const selected = store.get().indices.slice();
        // rotation = recomputing projections only; the stored index set stays
        projectPoints(pts, { yaw: 2.4, pitch: 1.1 }, 400, 300);
        expect(store.get().indices).toEqual(selected);
    });

    it("empty rectangle selects nothing", () => {
        const proj = projectPoints(makeBundle().mds_coordinates,
                                   { yaw: 0, pitch: 0 }, 400, 300);
        expect(pointsInRect(proj, { x0: -10, y0: -10, x1: -5, y1: -5 })).toEqual([]);
    });
});

describe("parallel coordinates", () => {
    it("axes spread across the width", () => {
        const axes = axisX(3, 400, 30);
        expect(axes).toEqual([30, 200, 370]);
        expect(axisX(1, 400)).toEqual([200]);
    });

    it("nearestAxis respects tolerance", () => {
        const axes = [30, 200, 370];
        expect(nearestAxis(205, axes, 18)).toBe(1);
        expect(nearestAxis(120, axes, 18)).toBe(-1);
    });

    it("valueY maps min to bottom and max to top", () => {
        const s = { min: 0, max: 10 };
        expect(valueY(0, s, 100, 10)).toBe(90);
        expect(valueY(10, s, 100, 10)).toBe(10);
    });

    it("axis interval brush picks crossing polylines", () => {
        const bundle = makeBundle();
        const scales = axisScales(bundle.features, 2);
        // axis 0 (alpha): the class-1 cluster sits near the max -> top pixels
        const picked = brushAxisInterval(bundle.features, 0, scales[0],
                                         0, 40, 300, 14);
        expect(picked).toEqual([3, 4, 5]);
    });
});

describe("votes heatmap", () => {
    it("margin is truth fraction minus strongest rival", () => {
        expect(oobMargin([0.75, 0.25], 0)).toBeCloseTo(0.5);
        expect(oobMargin([0.4, 0.6], 0)).toBeCloseTo(-0.2);
        expect(oobMargin([0, 0], 0)).toBe(-1); // uncovered
    });

    it("orders by class then descending margin", () => {
        const bundle = makeBundle();
        const order = heatmapOrder(bundle.labels, bundle.vote_fractions);
        // class 0 block first (samples 0..2), then class 1 (3..5)
        expect(order.slice(0, 3).every((i) => bundle.labels[i] === 0)).toBe(true);
        expect(order.slice(3).every((i) => bundle.labels[i] === 1)).toBe(true);
        // within class 0: margins 1.0, 0.5, -0.2 -> 0, 1, 2
        expect(order.slice(0, 3)).toEqual([0, 1, 2]);
        // within class 1: margins 1.0 (s3), 0.5 (s4), -1 uncovered (s5)
        expect(order.slice(3)).toEqual([3, 4, 5]);
    });

    it("row range maps back to sample indices", () => {
        const order = [2, 0, 1];
        expect(rowsInRange(order, 0, 19, 10)).toEqual([2, 0]);
        expect(rowsInRange(order, 25, 25, 10)).toEqual([1]);
        expect(rowsInRange(order, -50, 500, 10)).toEqual([2, 0, 1]);
    });
});

describe("linked brushing across panels (logic level)", () => {
    it("a brush from any panel yields the identical index set everywhere", () => {
        const store = new SelectionStore();
        const seenBy: Record<string, number[]> = {};
        for (const panel of ["features", "mds3d", "local", "votes"]) {
            store.subscribe((sel) => {
                seenBy[panel] = sel.indices;
            });
        }
        store.set([4, 0], "heatmap");
        expect(seenBy.features).toEqual([4, 0]);
        expect(seenBy.mds3d).toEqual([4, 0]);
        expect(seenBy.local).toEqual([4, 0]);
        expect(seenBy.votes).toEqual([4, 0]);
    });

    it("additive brushes in two panels union their indices", () => {
        const store = new SelectionStore();
        store.set([1, 2], "mds3d");
        store.set([2, 5], "features", true);
        expect(store.get().indices).toEqual([1, 2, 5]);
    });
});
