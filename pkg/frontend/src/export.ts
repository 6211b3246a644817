/** Selection export: one record per selected sample carrying everything the
 * panels show, plus lossless index round-tripping for re-import. */

import type { Selection } from "./state.js";
import type { VizBundle } from "./types.js";

export interface ExportRecord {
    index: number;
    sample_id: number;
    features: Record<string, number>;
    true_class: string;
    predicted_class: string | null;
    outlier_score: number;
    local_importance: Record<string, number>;
}

export interface SelectionExport {
    source: string;
    count: number;
    indices: number[];
    records: ExportRecord[];
}

export function buildSelectionExport(bundle: VizBundle, sel: Selection): SelectionExport {
    const records = sel.indices.map((i) => {
        const features: Record<string, number> = {};
        const local: Record<string, number> = {};
        bundle.feature_names.forEach((name, j) => {
            features[name] = bundle.features[i][j];
            local[name] = bundle.local_importance[i][j];
        });
        const pred = bundle.oob_predictions[i];
        return {
            index: i,
            sample_id: bundle.sample_ids[i],
            features,
            true_class: bundle.class_names[bundle.labels[i]],
            predicted_class: pred >= 0 ? bundle.class_names[pred] : null,
            outlier_score: bundle.outlier_scores[i],
            local_importance: local,
        };
    });
    return {
        source: sel.source,
        count: records.length,
        indices: sel.indices.slice(),
        records,
    };
}

/** Parse a previously exported selection back into an index list.
 * Accepts the full export document or a bare index array. */
export function parseSelectionImport(raw: unknown, n: number): number[] {
    let indices: unknown;
    if (Array.isArray(raw)) {
        indices = raw;
    } else if (typeof raw === "object" && raw !== null &&
               Array.isArray((raw as Record<string, unknown>).indices)) {
        indices = (raw as Record<string, unknown>).indices;
    } else {
        throw new Error("selection import: expected an index array or an export document");
    }
    const out: number[] = [];
    for (const v of indices as unknown[]) {
        if (typeof v !== "number" || !Number.isInteger(v) || v < 0 || v >= n) {
            throw new Error(`selection import: invalid index ${String(v)}`);
        }
        out.push(v);
    }
    return out;
}
