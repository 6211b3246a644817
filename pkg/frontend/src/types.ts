/** Bundle payload produced by `rfx viz-export` (schema version 1). */

export interface BundleMetadata {
    trees: number;
    seed: number;
    backend: string;
    casewise: boolean;
    sampled?: boolean;
}

export interface VizBundle {
    version: number;
    n: number;
    feature_names: string[];
    feature_kinds: ("numeric" | "categorical")[];
    features: number[][];
    labels: number[];
    class_names: string[];
    oob_predictions: number[];
    vote_fractions: number[][];
    per_tree_votes: number[][] | null;
    local_importance: number[][];
    mds_coordinates: number[][];
    mds_eigenvalues: number[];
    outlier_scores: number[];
    sample_ids: number[];
    metadata: BundleMetadata;
}

/** Validation failure carrying the path of the offending field. */
export class BundleError extends Error {
    constructor(public readonly field: string, detail: string) {
        super(`bundle field "${field}": ${detail}`);
        this.name = "BundleError";
    }
}

function requireArray(doc: Record<string, unknown>, field: string): unknown[] {
    const v = doc[field];
    if (!Array.isArray(v)) throw new BundleError(field, "missing or not an array");
    return v;
}

function requireMatrix(
    doc: Record<string, unknown>, field: string, rows: number, cols: number | null,
): number[][] {
    const arr = requireArray(doc, field);
    if (arr.length !== rows) {
        throw new BundleError(field, `expected ${rows} rows, got ${arr.length}`);
    }
    for (let i = 0; i < arr.length; i++) {
        const row = arr[i];
        if (!Array.isArray(row)) throw new BundleError(`${field}/${i}`, "row is not an array");
        if (cols !== null && row.length !== cols) {
            throw new BundleError(`${field}/${i}`, `expected ${cols} columns, got ${row.length}`);
        }
        for (let j = 0; j < row.length; j++) {
            if (typeof row[j] !== "number" || !Number.isFinite(row[j])) {
                throw new BundleError(`${field}/${i}/${j}`, "not a finite number");
            }
        }
    }
    return arr as number[][];
}

function requireNumberVec(
    doc: Record<string, unknown>, field: string, len: number,
): number[] {
    const arr = requireArray(doc, field);
    if (arr.length !== len) {
        throw new BundleError(field, `expected length ${len}, got ${arr.length}`);
    }
    arr.forEach((v, i) => {
        if (typeof v !== "number" || !Number.isFinite(v)) {
            throw new BundleError(`${field}/${i}`, "not a finite number");
        }
    });
    return arr as number[];
}

/** Validate an untrusted document; throws BundleError naming the field. */
export function validateBundle(raw: unknown): VizBundle {
    if (typeof raw !== "object" || raw === null) {
        throw new BundleError("(root)", "bundle is not an object");
    }
    const doc = raw as Record<string, unknown>;
    if (doc.version !== 1) {
        throw new BundleError("version", `expected 1, got ${String(doc.version)}`);
    }
    const n = doc.n;
    if (typeof n !== "number" || !Number.isInteger(n) || n < 1) {
        throw new BundleError("n", "must be a positive integer");
    }

    const featureNames = requireArray(doc, "feature_names");
    featureNames.forEach((v, i) => {
        if (typeof v !== "string") throw new BundleError(`feature_names/${i}`, "not a string");
    });
    const p = featureNames.length;

    const kinds = requireArray(doc, "feature_kinds");
    if (kinds.length !== p) {
        throw new BundleError("feature_kinds", `expected ${p} entries, got ${kinds.length}`);
    }
    kinds.forEach((v, i) => {
        if (v !== "numeric" && v !== "categorical") {
            throw new BundleError(`feature_kinds/${i}`, `unknown kind ${String(v)}`);
        }
    });

    const classNames = requireArray(doc, "class_names");
    if (classNames.length < 2) throw new BundleError("class_names", "need at least 2 classes");
    classNames.forEach((v, i) => {
        if (typeof v !== "string") throw new BundleError(`class_names/${i}`, "not a string");
    });
    const C = classNames.length;

    const features = requireMatrix(doc, "features", n, p);
    const labels = requireNumberVec(doc, "labels", n);
    labels.forEach((v, i) => {
        if (!Number.isInteger(v) || v < 0 || v >= C) {
            throw new BundleError(`labels/${i}`, `class code ${v} out of range`);
        }
    });
    const preds = requireNumberVec(doc, "oob_predictions", n);
    preds.forEach((v, i) => {
        if (!Number.isInteger(v) || v < -1 || v >= C) {
            throw new BundleError(`oob_predictions/${i}`, `class code ${v} out of range`);
        }
    });
    const fractions = requireMatrix(doc, "vote_fractions", n, C);

    let perTree: number[][] | null = null;
    if (doc.per_tree_votes !== null && doc.per_tree_votes !== undefined) {
        perTree = requireMatrix(doc, "per_tree_votes", n, null);
    }

    const local = requireMatrix(doc, "local_importance", n, p);
    const coords = requireMatrix(doc, "mds_coordinates", n, 3);
    const eigenvalues = requireArray(doc, "mds_eigenvalues") as number[];
    const outliers = requireNumberVec(doc, "outlier_scores", n);
    outliers.forEach((v, i) => {
        if (v < 0) throw new BundleError(`outlier_scores/${i}`, "negative score");
    });
    const sampleIds = requireNumberVec(doc, "sample_ids", n);

    const meta = doc.metadata;
    if (typeof meta !== "object" || meta === null) {
        throw new BundleError("metadata", "missing or not an object");
    }
    const m = meta as Record<string, unknown>;
    for (const key of ["trees", "seed"]) {
        if (typeof m[key] !== "number") throw new BundleError(`metadata/${key}`, "not a number");
    }
    if (typeof m.backend !== "string") throw new BundleError("metadata/backend", "not a string");
    if (typeof m.casewise !== "boolean") throw new BundleError("metadata/casewise", "not a boolean");

    return {
        version: 1,
        n,
        feature_names: featureNames as string[],
        feature_kinds: kinds as ("numeric" | "categorical")[],
        features,
        labels,
        class_names: classNames as string[],
        oob_predictions: preds,
        vote_fractions: fractions,
        per_tree_votes: perTree,
        local_importance: local,
        mds_coordinates: coords,
        mds_eigenvalues: eigenvalues,
        outlier_scores: outliers,
        sample_ids: sampleIds,
        metadata: {
            trees: m.trees as number,
            seed: m.seed as number,
            backend: m.backend as string,
            casewise: m.casewise as boolean,
            sampled: m.sampled === true,
        },
    };
}
