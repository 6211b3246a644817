import { describe, expect, it } from "vitest";

import { BundleError, validateBundle } from "../src/types.js";
import { makeBundle } from "./fixtures.js";

describe("validateBundle", () => {
    it("accepts a valid bundle", () => {
        const doc = validateBundle(JSON.parse(JSON.stringify(makeBundle())));
        expect(doc.n).toBe(6);
        expect(doc.per_tree_votes).not.toBeNull();
    });

    it("accepts per_tree_votes null (fraction fallback contract)", () => {
        const doc = validateBundle(
            JSON.parse(JSON.stringify(makeBundle({ per_tree_votes: null }))));
        expect(doc.per_tree_votes).toBeNull();
    });

    function failingField(raw: unknown): string {
        try {
            validateBundle(raw);
        } catch (err) {
            if (err instanceof BundleError) return err.field;
            throw err;
        }
        throw new Error("expected a BundleError");
    }

    it("names the failing field: wrong version", () => {
        expect(failingField({ ...makeBundle(), version: 2 })).toBe("version");
    });

    it("names the failing field: missing block", () => {
        const doc: Record<string, unknown> = { ...makeBundle() };
        delete doc.outlier_scores;
        expect(failingField(doc)).toBe("outlier_scores");
    });

    it("names the failing field with the row that is wrong", () => {
        const doc = makeBundle();
        const coords = doc.mds_coordinates.map((r) => r.slice());
        coords[4] = [1.0, 2.0];
        expect(failingField({ ...doc, mds_coordinates: coords }))
            .toBe("mds_coordinates/4");
    });

    it("names the failing field: label out of range", () => {
        const doc = makeBundle();
        expect(failingField({ ...doc, labels: [0, 0, 0, 1, 1, 9] }))
            .toBe("labels/5");
    });

    it("names the failing field: non-finite feature", () => {
        const doc = makeBundle();
        const feats = doc.features.map((r) => r.slice());
        feats[2][1] = Number.NaN;
        expect(failingField({ ...doc, features: feats })).toBe("features/2/1");
    });

    it("names the failing field: metadata", () => {
        const doc = makeBundle();
        expect(failingField({
            ...doc,
            metadata: { ...doc.metadata, casewise: "yes" },
        })).toBe("metadata/casewise");
    });

    it("rejects row-count mismatches against n", () => {
        const doc = makeBundle();
        expect(failingField({ ...doc, outlier_scores: [1, 2, 3] }))
            .toBe("outlier_scores");
    });

    it("rejects non-objects", () => {
        expect(failingField("nope")).toBe("(root)");
    });
});
