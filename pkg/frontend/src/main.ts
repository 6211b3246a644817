/** App wiring: load a bundle file, mount the 2x2 grid, route one shared
 * selection through all four panels, and export selections as JSON (file
 * download + console array). */

import { buildSelectionExport, parseSelectionImport } from "./export.js";
import { HeatmapPanel } from "./panels/heatmap.js";
import { ParallelPanel } from "./panels/parallel.js";
import { Scatter3dPanel } from "./panels/scatter3d.js";
import { SelectionStore } from "./state.js";
import type { VizBundle } from "./types.js";
import { BundleError, validateBundle } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
    const el = document.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
};

export const store = new SelectionStore();
let bundle: VizBundle | null = null;

export function currentBundle(): VizBundle | null {
    return bundle;
}

function showError(message: string): void {
    const screen = $("error-screen");
    screen.textContent = message;
    screen.style.display = "block";
    $("grid").style.display = "none";
}

function mount(doc: VizBundle): void {
    bundle = doc;
    $("error-screen").style.display = "none";
    $("grid").style.display = "grid";
    const hover = $("hover-line");
    const setHover = (text: string): void => {
        hover.textContent = text;
    };

    const features = new ParallelPanel(
        $("panel-features") as unknown as HTMLCanvasElement, doc, doc.features,
        store, "features", setHover);
    const scatter = new Scatter3dPanel(
        $("panel-mds") as unknown as HTMLCanvasElement, doc, store);
    const localImp = new ParallelPanel(
        $("panel-local") as unknown as HTMLCanvasElement, doc,
        doc.local_importance, store, "local-importance", setHover);
    const heat = new HeatmapPanel(
        $("panel-votes") as unknown as HTMLCanvasElement, doc, store);

    const brushToggle = $("brush-mode") as HTMLInputElement;
    brushToggle.onchange = () => {
        scatter.brushMode = brushToggle.checked;
    };

    const exportBtn = $("export-btn") as HTMLButtonElement;
    const status = $("status-line");
    store.subscribe((sel) => {
        features.render(sel);
        scatter.render(sel);
        localImp.render(sel);
        heat.render(sel);
        exportBtn.disabled = sel.indices.length === 0;
        status.textContent = sel.indices.length === 0
            ? `${doc.n} samples, ${doc.metadata.trees} trees `
              + `(${doc.per_tree_votes ? "per-tree votes" : "vote fractions"})`
            : `${sel.indices.length} selected via ${sel.source}`;
    });

    $("meta-line").textContent =
        `backend ${doc.metadata.backend} | seed ${doc.metadata.seed} | `
        + `casewise ${doc.metadata.casewise}`
        + (doc.metadata.sampled ? " | subsampled" : "");
}

export function loadText(text: string): void {
    try {
        mount(validateBundle(JSON.parse(text)));
        store.clear();
    } catch (err) {
        if (err instanceof BundleError) {
            showError(`Bundle rejected. ${err.message}`);
        } else {
            showError(`Could not load bundle: ${String(err)}`);
        }
    }
}

export function wireControls(): void {
    const fileInput = $("bundle-file") as HTMLInputElement;
    fileInput.onchange = async () => {
        const file = fileInput.files?.[0];
        if (file) loadText(await file.text());
    };

    ($("clear-btn") as HTMLButtonElement).onclick = () => store.clear();

    ($("export-btn") as HTMLButtonElement).onclick = () => {
        if (!bundle) return;
        const sel = store.get();
        if (sel.indices.length === 0) return;
        const doc = buildSelectionExport(bundle, sel);
        // console array for programmatic follow-up
        console.log("selected samples:", doc.indices, doc.records);
        const blob = new Blob([JSON.stringify(doc, null, 1)],
                              { type: "application/json" });
        const a = document.createElement("a");
        a.href = URL.createObjectURL(blob);
        a.download = "selection.json";
        a.click();
        URL.revokeObjectURL(a.href);
    };

    const importInput = $("selection-file") as HTMLInputElement;
    importInput.onchange = async () => {
        const file = importInput.files?.[0];
        if (!file || !bundle) return;
        try {
            const indices = parseSelectionImport(JSON.parse(await file.text()),
                                                 bundle.n);
            store.set(indices, "import");
        } catch (err) {
            $("status-line").textContent = String(err);
        }
    };
}

// bootstrap only when the full page is present (tests import pieces directly)
if (document.getElementById("bundle-file")) {
    wireControls();
}
