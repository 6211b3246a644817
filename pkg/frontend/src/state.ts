/** The single source of truth for the current selection.
 *
 * Every panel reads the same ordered index set and re-renders on change, so
 * a brush made anywhere highlights the identical samples everywhere.
 * Additive updates union in order (existing first, new appended, no
 * duplicates); plain updates replace.
 */

export interface Selection {
    indices: number[];
    source: string;
}

export type SelectionListener = (sel: Selection) => void;

export function orderedUnion(existing: number[], incoming: number[]): number[] {
    const seen = new Set(existing);
    const out = existing.slice();
    for (const idx of incoming) {
        if (!seen.has(idx)) {
            seen.add(idx);
            out.push(idx);
        }
    }
    return out;
}

export function dedupe(indices: number[]): number[] {
    return orderedUnion([], indices);
}

export class SelectionStore {
    private sel: Selection = { indices: [], source: "none" };
    private listeners: SelectionListener[] = [];

    get(): Selection {
        return this.sel;
    }

    has(index: number): boolean {
        return this.sel.indices.includes(index);
    }

    set(indices: number[], source: string, additive = false): void {
        const clean = dedupe(indices);
        const merged = additive ? orderedUnion(this.sel.indices, clean) : clean;
        this.sel = { indices: merged, source };
        this.emit();
    }

    clear(): void {
        this.sel = { indices: [], source: "none" };
        this.emit();
    }

    subscribe(fn: SelectionListener): () => void {
        this.listeners.push(fn);
        fn(this.sel);
        return () => {
            this.listeners = this.listeners.filter((l) => l !== fn);
        };
    }

    private emit(): void {
        for (const fn of this.listeners) fn(this.sel);
    }
}
