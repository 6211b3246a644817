import type { VizBundle } from "../src/types.js";

/** A small, valid 6-sample / 2-feature / 2-class bundle. */
export function makeBundle(overrides: Partial<VizBundle> = {}): VizBundle {
    const base: VizBundle = {
        version: 1,
        n: 6,
        feature_names: ["alpha", "beta"],
        feature_kinds: ["numeric", "numeric"],
        features: [
            [0.0, 10.0], [0.2, 12.0], [0.1, 11.0],
            [5.0, 30.0], [5.2, 29.0], [5.1, 31.0],
        ],
        labels: [0, 0, 0, 1, 1, 1],
        class_names: ["red", "blue"],
        oob_predictions: [0, 0, 1, 1, 1, -1],
        vote_fractions: [
            [1.0, 0.0], [0.75, 0.25], [0.4, 0.6],
            [0.0, 1.0], [0.25, 0.75], [0.0, 0.0],
        ],
        per_tree_votes: [
            [0, 0, 0], [0, 0, 1], [1, 0, 1],
            [1, 1, 1], [1, 0, 1], [0, 1, 1],
        ],
        local_importance: [
            [0.5, 0.0], [0.4, 0.1], [0.3, 0.0],
            [0.6, 0.2], [0.5, 0.1], [0.0, 0.0],
        ],
        mds_coordinates: [
            [-1.0, -0.5, 0.1], [-1.1, -0.4, 0.0], [-0.9, -0.6, -0.1],
            [1.0, 0.5, 0.1], [1.1, 0.4, 0.0], [0.9, 0.6, -0.1],
        ],
        mds_eigenvalues: [3.2, 1.1, 0.4],
        outlier_scores: [1.0, 1.2, 4.5, 1.1, 1.0, 9.9],
        sample_ids: [0, 1, 2, 3, 4, 5],
        metadata: { trees: 3, seed: 17, backend: "FullTriangle", casewise: false },
    };
    return { ...base, ...overrides };
}
