"""Numba kernels for tree growth, descent, and pairwise accumulation.

Everything here operates on flat primitive arrays so the hot loops compile to
machine code.  All routines are deterministic functions of their inputs; the
only randomness enters through explicit PCG32 stream states.

Node array convention (one set per tree, length = node_count):
  status      int8     0 internal, 1 terminal
  split_var   int32    feature index, -1 for terminals
  threshold   float64  numeric split value, left iff x <= threshold
  cat_mask    int64    categorical level bitmask, bit k set => level k left
  left/right  int32    child node ids (> parent id), -1 for terminals
  node_class  int32    majority class (ties -> lowest class code)
  class_pops  int64    (node_count, C) bootstrap-weighted class populations
  node_raw    int32    distinct in-bag samples reaching the node
  node_weight int64    bootstrap-weighted sample count reaching the node
"""

import numpy as np
from numba import njit

from .rng import make_stream, partial_shuffle, pcg32_bounded, shuffle_inplace

#: node scans below this many samples use insertion sort; larger use argsort
SORT_CUTOFF = 64


@njit(cache=True, nogil=True)
def bootstrap_counts(n, state):
    """n draws with replacement; returns int32 in-bag count vector."""
    counts = np.zeros(n, dtype=np.int32)
    for _ in range(n):
        counts[int(pcg32_bounded(state, n))] += 1
    return counts


@njit(cache=True, inline="always")
def _gini_f(counts, total, n_classes):
    s = 0.0
    for c in range(n_classes):
        f = counts[c] / total
        s += f * f
    return 1.0 - s


@njit(cache=True, nogil=True)
def _threshold_scan(m, vbuf, ybuf, wbuf, order, pops, left_counts, n_classes, ip, wtot):
    """Best threshold for the m gathered (value, label, weight) triples.

    Returns (delta, tau); delta <= 0 means no improving split.  Candidate
    thresholds are the unique values themselves; left = {x <= tau}; ties on
    delta keep the smallest tau.
    """
    if m < SORT_CUTOFF:
        for k in range(1, m):
            v = vbuf[k]
            y = ybuf[k]
            w = wbuf[k]
            t = k - 1
            while t >= 0 and vbuf[t] > v:
                vbuf[t + 1] = vbuf[t]
                ybuf[t + 1] = ybuf[t]
                wbuf[t + 1] = wbuf[t]
                t -= 1
            vbuf[t + 1] = v
            ybuf[t + 1] = y
            wbuf[t + 1] = w
    else:
        ordv = np.argsort(vbuf[:m])
        for k in range(m):
            order[k] = ordv[k]
        # permute the three buffers through scratch copies
        vtmp = vbuf[:m].copy()
        ytmp = ybuf[:m].copy()
        wtmp = wbuf[:m].copy()
        for k in range(m):
            o = order[k]
            vbuf[k] = vtmp[o]
            ybuf[k] = ytmp[o]
            wbuf[k] = wtmp[o]

    for c in range(n_classes):
        left_counts[c] = 0
    lw = 0
    best_delta = -1.0
    best_tau = 0.0
    for k in range(m - 1):
        left_counts[ybuf[k]] += wbuf[k]
        lw += wbuf[k]
        if vbuf[k] < vbuf[k + 1]:
            rw = wtot - lw
            il = 0.0
            ir = 0.0
            for c in range(n_classes):
                fl = left_counts[c] / lw
                fr = (pops[c] - left_counts[c]) / rw
                il += fl * fl
                ir += fr * fr
            il = 1.0 - il
            ir = 1.0 - ir
            delta = ip - (lw / wtot) * il - (rw / wtot) * ir
            if delta > best_delta:
                best_delta = delta
                best_tau = vbuf[k]
    return best_delta, best_tau


@njit(cache=True, nogil=True)
def _garside_scan(m, vbuf, ybuf, wbuf, n_levels, lvl_counts, lvl_w, left_counts,
                  pops, n_classes, ip, wtot):
    """Best categorical partition over all 2^(K-1) - 1 canonical masks.

    Masks always contain level 0 (bit 0 set) and never all K levels.  Returns
    (delta, mask); delta <= 0 means no improving split; ties keep the
    smallest mask.
    """
    for k in range(n_levels):
        lvl_w[k] = 0
        for c in range(n_classes):
            lvl_counts[k, c] = 0
    for t in range(m):
        code = int(vbuf[t])
        lvl_counts[code, ybuf[t]] += wbuf[t]
        lvl_w[code] += wbuf[t]
    present = 0
    for k in range(n_levels):
        if lvl_w[k] > 0:
            present += 1
    if present < 2:
        return -1.0, np.int64(0)

    full = (np.int64(1) << np.int64(n_levels)) - np.int64(1)
    best_delta = -1.0
    best_mask = np.int64(0)
    mask = np.int64(1)
    while mask < full:
        lw = 0
        for c in range(n_classes):
            left_counts[c] = 0
        for k in range(n_levels):
            if (mask >> np.int64(k)) & np.int64(1):
                lw += lvl_w[k]
                for c in range(n_classes):
                    left_counts[c] += lvl_counts[k, c]
        rw = wtot - lw
        if lw > 0 and rw > 0:
            il = 0.0
            ir = 0.0
            for c in range(n_classes):
                fl = left_counts[c] / lw
                fr = (pops[c] - left_counts[c]) / rw
                il += fl * fl
                ir += fr * fr
            delta = ip - (lw / wtot) * (1.0 - il) - (rw / wtot) * (1.0 - ir)
            if delta > best_delta:
                best_delta = delta
                best_mask = mask
        mask += np.int64(2)
    return best_delta, best_mask


@njit(cache=True, nogil=True)
def grow_tree_kernel(values, col_cat, col_levels, labels, n_classes, inbag,
                     mtry, min_node_size, max_nodes, state,
                     status, split_var, threshold, cat_mask, left, right,
                     node_class, class_pops, node_raw, node_weight):
    """Grow one tree into the preallocated node arrays; returns node_count,
    or -1 if max_nodes would be exceeded."""
    n = labels.shape[0]
    p = col_cat.shape[0]

    total = 0
    for i in range(n):
        if inbag[i] > 0:
            total += 1
    idx = np.empty(total, dtype=np.int32)
    k = 0
    for i in range(n):
        if inbag[i] > 0:
            idx[k] = i
            k += 1

    node_start = np.empty(max_nodes, dtype=np.int32)
    node_end = np.empty(max_nodes, dtype=np.int32)
    node_start[0] = 0
    node_end[0] = total
    count = 1

    feat_buf = np.empty(p, dtype=np.int64)
    vbuf = np.empty(total, dtype=np.float64)
    ybuf = np.empty(total, dtype=np.int32)
    wbuf = np.empty(total, dtype=np.int64)
    order = np.empty(total, dtype=np.int64)
    tmp = np.empty(total, dtype=np.int32)
    pops = np.empty(n_classes, dtype=np.int64)
    left_counts = np.empty(n_classes, dtype=np.int64)
    lvl_counts = np.empty((32, n_classes), dtype=np.int64)
    lvl_w = np.empty(32, dtype=np.int64)

    node_id = 0
    while node_id < count:
        start = node_start[node_id]
        end = node_end[node_id]
        m = end - start

        for c in range(n_classes):
            pops[c] = 0
        w = 0
        for t in range(start, end):
            i = idx[t]
            wt = inbag[i]
            pops[labels[i]] += wt
            w += wt

        best_c = 0
        for c in range(1, n_classes):
            if pops[c] > pops[best_c]:
                best_c = c
        node_class[node_id] = best_c
        node_raw[node_id] = m
        node_weight[node_id] = w
        for c in range(n_classes):
            class_pops[node_id, c] = pops[c]

        pure = pops[best_c] == w
        if pure or w < min_node_size or m < 2:
            status[node_id] = 1
            split_var[node_id] = -1
            left[node_id] = -1
            right[node_id] = -1
            node_id += 1
            continue

        ip = _gini_f(pops, w, n_classes)

        for j in range(p):
            feat_buf[j] = j
        partial_shuffle(state, feat_buf, mtry)

        found = False
        best_delta = 0.0
        best_feat = -1
        best_tau = 0.0
        best_mask = np.int64(0)
        for fidx in range(mtry):
            j = int(feat_buf[fidx])
            for t in range(start, end):
                i = idx[t]
                vbuf[t - start] = values[i, j]
                ybuf[t - start] = labels[i]
                wbuf[t - start] = inbag[i]
            if col_cat[j] == 1:
                delta, mask = _garside_scan(
                    m, vbuf, ybuf, wbuf, col_levels[j], lvl_counts, lvl_w,
                    left_counts, pops, n_classes, ip, w)
                tau = 0.0
            else:
                delta, tau = _threshold_scan(
                    m, vbuf, ybuf, wbuf, order, pops, left_counts, n_classes, ip, w)
                mask = np.int64(0)
            if delta > 0.0:
                better = False
                if not found:
                    better = True
                elif delta > best_delta:
                    better = True
                elif delta == best_delta and j < best_feat:
                    better = True
                if better:
                    found = True
                    best_delta = delta
                    best_feat = j
                    best_tau = tau
                    best_mask = mask

        if not found:
            status[node_id] = 1
            split_var[node_id] = -1
            left[node_id] = -1
            right[node_id] = -1
            node_id += 1
            continue

        is_cat = col_cat[best_feat] == 1
        nl = 0
        for t in range(start, end):
            i = idx[t]
            v = values[i, best_feat]
            if is_cat:
                go = ((best_mask >> np.int64(v)) & np.int64(1)) == 1
            else:
                go = v <= best_tau
            if go:
                nl += 1
        a = 0
        b = nl
        for t in range(start, end):
            i = idx[t]
            v = values[i, best_feat]
            if is_cat:
                go = ((best_mask >> np.int64(v)) & np.int64(1)) == 1
            else:
                go = v <= best_tau
            if go:
                tmp[a] = i
                a += 1
            else:
                tmp[b] = i
                b += 1
        for t in range(m):
            idx[start + t] = tmp[t]

        if count + 2 > max_nodes:
            return -1
        lc = count
        rc = count + 1
        count += 2
        node_start[lc] = start
        node_end[lc] = start + nl
        node_start[rc] = start + nl
        node_end[rc] = end
        status[node_id] = 0
        split_var[node_id] = best_feat
        threshold[node_id] = best_tau
        cat_mask[node_id] = best_mask
        left[node_id] = lc
        right[node_id] = rc
        node_id += 1

    return count


@njit(cache=True, nogil=True, inline="always")
def descend(status, split_var, threshold, cat_mask, left, right, col_cat, values, i):
    """Route sample i from the root to its terminal node; returns node id."""
    node = 0
    while status[node] == 0:
        j = split_var[node]
        v = values[i, j]
        if col_cat[j] == 1:
            go = ((cat_mask[node] >> np.int64(v)) & np.int64(1)) == 1
        else:
            go = v <= threshold[node]
        if go:
            node = left[node]
        else:
            node = right[node]
    return node


@njit(cache=True, nogil=True, inline="always")
def _descend_override(status, split_var, threshold, cat_mask, left, right,
                      col_cat, values, i, j_over, v_over):
    node = 0
    while status[node] == 0:
        j = split_var[node]
        v = v_over if j == j_over else values[i, j]
        if col_cat[j] == 1:
            go = ((cat_mask[node] >> np.int64(v)) & np.int64(1)) == 1
        else:
            go = v <= threshold[node]
        if go:
            node = left[node]
        else:
            node = right[node]
    return node


@njit(cache=True, nogil=True)
def descend_all(status, split_var, threshold, cat_mask, left, right, col_cat,
                values, out):
    for i in range(values.shape[0]):
        out[i] = descend(status, split_var, threshold, cat_mask, left, right,
                         col_cat, values, i)


@njit(cache=True, nogil=True)
def oob_votes_tree(status, split_var, threshold, cat_mask, left, right,
                   node_class, col_cat, values, inbag, votes):
    """Add this tree's votes for its out-of-bag samples into votes (n, C)."""
    for i in range(values.shape[0]):
        if inbag[i] == 0:
            leaf = descend(status, split_var, threshold, cat_mask, left, right,
                           col_cat, values, i)
            votes[i, node_class[leaf]] += 1


@njit(cache=True, nogil=True)
def importance_tree_kernel(status, split_var, threshold, cat_mask, left, right,
                           node_class, node_raw, node_weight, col_cat,
                           values, labels, inbag, perm_seed_base, perm_seq,
                           identity_perms,
                           scores, scores_cw, vsum, vsum_cw):
    """Permutation scores for one tree, all features.

    For feature j the tree's OOB samples receive feature-j values permuted
    among themselves (stream seed = perm_seed_base + j).  Per-sample delta is
    1(original correct) - 1(permuted correct); ``scores`` accumulates the
    plain per-tree sums, ``scores_cw`` the tnodewt-weighted sums, and the
    (n, p) matrices vsum / vsum_cw the per-sample terms.  Returns the tree's
    OOB sample count.
    """
    n = labels.shape[0]
    p = col_cat.shape[0]

    n_oob = 0
    for i in range(n):
        if inbag[i] == 0:
            n_oob += 1
    if n_oob == 0:
        return 0
    oob = np.empty(n_oob, dtype=np.int32)
    k = 0
    for i in range(n):
        if inbag[i] == 0:
            oob[k] = i
            k += 1

    orig_ok = np.empty(n_oob, dtype=np.uint8)
    wts = np.empty(n_oob, dtype=np.float64)
    for t in range(n_oob):
        i = oob[t]
        leaf = descend(status, split_var, threshold, cat_mask, left, right,
                       col_cat, values, i)
        orig_ok[t] = 1 if node_class[leaf] == labels[i] else 0
        # tnodewt: average in-bag multiplicity inside the terminal node
        wts[t] = node_weight[leaf] / node_raw[leaf]

    perm = np.empty(n_oob, dtype=np.int64)
    for j in range(p):
        st = make_stream(perm_seed_base + j, perm_seq)
        for t in range(n_oob):
            perm[t] = t
        if identity_perms == 0:
            shuffle_inplace(st, perm)
        for t in range(n_oob):
            i = oob[t]
            src = oob[perm[t]]
            v_over = values[src, j]
            leaf2 = _descend_override(status, split_var, threshold, cat_mask,
                                      left, right, col_cat, values, i, j, v_over)
            ok2 = 1 if node_class[leaf2] == labels[i] else 0
            d = float(orig_ok[t]) - float(ok2)
            if d != 0.0:
                scores[j] += d
                scores_cw[j] += wts[t] * d
                vsum[i, j] += d
                vsum_cw[i, j] += wts[t] * d
    return n_oob


@njit(cache=True, nogil=True)
def accumulate_pair_counts_block(codes, leaf_count, row_lo, row_hi, block):
    """Add one tree's leaf co-membership for pairs whose row index i falls in
    [row_lo, row_hi) into the rectangular counter block[(i - row_lo), j]
    (columns j > i only)."""
    n = codes.shape[0]
    occ = np.zeros(leaf_count + 1, dtype=np.int64)
    for i in range(n):
        occ[codes[i] + 1] += 1
    for l in range(leaf_count):
        occ[l + 1] += occ[l]
    bucket = np.empty(n, dtype=np.int64)
    pos = occ[:leaf_count].copy()
    for i in range(n):
        c = codes[i]
        bucket[pos[c]] = i
        pos[c] += 1
    for l in range(leaf_count):
        lo = occ[l]
        hi = occ[l + 1]
        for a in range(lo, hi):
            i = bucket[a]
            if i >= row_hi:
                break
            if i < row_lo:
                continue
            row = i - row_lo
            for b in range(a + 1, hi):
                block[row, bucket[b]] += 1


@njit(cache=True, nogil=True)
def accumulate_pair_counts(codes, leaf_count, pair_counts):
    """Add one tree's leaf co-membership to the packed i<j pair counter.

    codes: int32 leaf code per sample for this tree.
    pair_counts: int64 packed upper triangle, row-major over i < j.
    """
    n = codes.shape[0]
    occ = np.zeros(leaf_count + 1, dtype=np.int64)
    for i in range(n):
        occ[codes[i] + 1] += 1
    for l in range(leaf_count):
        occ[l + 1] += occ[l]
    bucket = np.empty(n, dtype=np.int64)
    pos = occ[:leaf_count].copy()
    for i in range(n):
        c = codes[i]
        bucket[pos[c]] = i
        pos[c] += 1
    for l in range(leaf_count):
        lo = occ[l]
        hi = occ[l + 1]
        for a in range(lo, hi):
            i = bucket[a]
            base = i * (2 * n - i - 1) // 2 - i - 1
            for b in range(a + 1, hi):
                j = bucket[b]
                pair_counts[base + j] += 1
