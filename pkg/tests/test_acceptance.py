"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line (run with ``pytest tests/test_acceptance.py -s -v`` to see them).

Tolerances are pinned here and nowhere else:
  A1 Wine OOB: B=500, error <= 6%, every per-class accuracy >= 95%,
     single-threaded runtime <= 60 s
  A2 backend equivalence: B=1000 TriBlock(tau=1e-4) entries == full above
     1e-6, embedding correlation >= 0.999
  A3 low-rank quality ordering: rho(r=100, i8) >= 0.95 and
     rho(r=100) > rho(r=32)
  A4 planner golden rows: 80 GB / 29.8 GiB (+-2%) / 6.4 MB / 3.2 MB /
     ~381 MB model subtotal
  A5 proximity == O(n^2 B) brute force on 20 random fixtures
  A6 factor-route MDS vs dense route: Procrustes residual <= 1e-4,
     eigenpair residuals <= 1e-6
  A7 casewise top-5 mean strictly above non-casewise
  A8 quantization bounds on 1000 random blocks per mode
  A9 bit-identical artifacts regardless of RFX_THREADS
"""

import time

import numpy as np
from scipy.linalg import orthogonal_procrustes

import rfx
from rfx import importance as imp
from rfx import mds
from rfx import proximity as prox
from rfx.forest import forest_to_bytes
from rfx.quantize import dequantize, nf4_max_gap, quantize


def report(name: str, passed: bool, detail: str) -> bool:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return passed


def test_a1_wine_oob_accuracy(wine_ds, monkeypatch):
    monkeypatch.setenv("RFX_THREADS", "1")
    results = []
    elapsed = None
    for seed in (17, 1303):
        t0 = time.perf_counter()
        forest = rfx.train(wine_ds, rfx.TrainConfig(ntree=500, iseed=seed))
        dt = time.perf_counter() - t0
        if seed == 17:
            elapsed = dt
        rep = rfx.oob_report(forest, wine_ds)
        results.append((seed, rep.error_rate, rep.per_class_accuracy.min(), dt))
    ok = all(err <= 0.06 and acc_min >= 0.95 for _, err, acc_min, _ in results)
    ok = ok and elapsed <= 60.0
    detail = "; ".join(
        f"seed {s}: err={e:.3%}, min class acc={a:.3%}, {t:.2f}s"
        for s, e, a, t in results)
    assert report("A1 wine-oob-accuracy", ok, detail)


def test_a2_backend_equivalence(membership1000, full1000):
    tb = prox.triblock_proximity(membership1000, tau=1e-4)
    n = full1000.n
    exact = True
    for i in range(n):
        for j in range(i + 1, n):
            want = full1000.entry(i, j)
            got = tb.entry(i, j)
            if want > prox.ZERO_TIER:
                if got != want:
                    exact = False
            elif got != 0.0:
                exact = False
    emb_full = mds.mds_full(full1000)
    emb_tb = mds.mds_full(tb)
    rho = mds.mds_correlation(emb_tb, emb_full)
    ok = exact and rho >= 0.999
    assert report("A2 backend-equivalence", ok,
                  f"entries exact above 1e-6: {exact}; mds corr={rho:.6f}")


def test_a3_lowrank_quality_ordering(membership1000, full1000):
    emb_full = mds.mds_full(full1000)
    rho = {}
    for r in (32, 100):
        rep = prox.lowrank_proximity(membership1000, rank=r, mode="i8", seed=3)
        emb = mds.mds_lowrank(rep, mds.PowerIterConfig(seed=3))
        rho[r] = mds.mds_correlation(emb, emb_full)
    ok = rho[100] >= 0.95 and rho[100] > rho[32]
    assert report("A3 lowrank-quality-ordering", ok,
                  f"rho(100,i8)={rho[100]:.6f}, rho(32,i8)={rho[32]:.6f}")


def test_a4_memory_planner_golden_rows():
    plan = prox.memory_plan(100_000, tree_count=10_000)
    full_gb = plan["full_headline_bytes"] / 1e9
    tb_gib = plan["triblock_bytes"] / 2**30
    i8_mb = plan["lowrank_r32_bytes"]["i8"]["two_factor"] / 1e6
    nf4_mb = plan["lowrank_r32_bytes"]["nf4"]["two_factor"] / 1e6
    model_mb = plan["model"]["subtotal"] / 1e6
    ok = (full_gb == 80.0
          and abs(tb_gib - 29.8) / 29.8 <= 0.02
          and i8_mb == 6.4
          and nf4_mb == 3.2
          and abs(model_mb - 381.2) <= 1.0)
    assert report(
        "A4 memory-planner-golden-rows", ok,
        f"full={full_gb:.1f} GB, triblock={tb_gib:.2f} GiB, i8r32={i8_mb} MB, "
        f"nf4r32={nf4_mb} MB, model={model_mb:.1f} MB")


def test_a5_bruteforce_proximity_oracle():
    rng = np.random.default_rng(42)
    all_exact = True
    for _ in range(20):
        n = int(rng.integers(5, 51))
        B = int(rng.integers(1, 21))
        codes = np.zeros((n, B), dtype=np.int32)
        leaf_counts = np.zeros(B, dtype=np.int32)
        for b in range(B):
            k = int(rng.integers(1, max(2, n // 2 + 1)))
            codes[:, b] = rng.integers(0, k, size=n)
            leaf_counts[b] = codes[:, b].max() + 1
        mem = prox.LeafMembership(codes=codes, leaf_counts=leaf_counts)
        got = prox.full_proximity(mem).to_dense()
        want = np.zeros((n, n))
        for b in range(B):
            c = codes[:, b]
            want += c[:, None] == c[None, :]
        want /= B
        if not np.array_equal(got, want):
            all_exact = False
    assert report("A5 bruteforce-proximity-oracle", all_exact,
                  "20 random fixtures (n<=50, B<=20) exact")


def _unequal_clusters(sizes, seed):
    """Cluster sizes differ so the Gram spectrum has clean gaps (equal-size
    symmetric clusters make the top eigenvalues degenerate and individual
    eigenvectors ill-defined)."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-10, 10, size=(len(sizes), 4))
    X = np.vstack([centers[c] + 0.05 * (1 + c) * rng.standard_normal((s, 4))
                   for c, s in enumerate(sizes)])
    y = np.repeat(np.arange(len(sizes)), sizes)
    return X, y


def test_a6_mds_oracle(membership1000, full1000):
    fixtures = [("wine-b1000", membership1000, full1000)]
    for name, (sizes, seed) in [("clusters-96", ([40, 28, 18, 10], 23)),
                                ("clusters-60", ([30, 18, 12], 11))]:
        X, y = _unequal_clusters(sizes, seed)
        ds = rfx.from_arrays(X, y)
        forest = rfx.train(ds, rfx.TrainConfig(ntree=40, iseed=seed))
        mem = prox.leaf_membership(forest, ds)
        fixtures.append((name, mem, prox.full_proximity(mem)))

    details = []
    ok = True
    for name, mem, full in fixtures:
        bound = min(mem.n, mem.total_leaves)
        rep = prox.lowrank_proximity(mem, rank=bound, mode="f32", seed=7)
        emb_lr = mds.mds_lowrank(rep, mds.PowerIterConfig(seed=7))
        emb_full = mds.mds_full(full)
        k_common = min(emb_lr.k, emb_full.k)
        A = emb_lr.coordinates[:, :k_common]
        Bc = emb_full.coordinates[:, :k_common]
        R, _ = orthogonal_procrustes(A, Bc)
        resid = np.linalg.norm(A @ R - Bc) / np.linalg.norm(Bc)
        eig_ok = np.all(emb_lr.residuals <= 1e-6)
        details.append(f"{name}: procrustes={resid:.2e}, eig residuals ok={eig_ok}")
        ok = ok and resid <= 1e-4 and eig_ok
    assert report("A6 mds-oracle", ok, "; ".join(details))


def test_a7_casewise_pattern(forest500, wine_ds):
    ncw, _ = imp.permutation_importance(forest500, wine_ds, casewise=False)
    cw, _ = imp.permutation_importance(forest500, wine_ds, casewise=True)
    top5 = np.argsort(ncw)[::-1][:5]
    ok = cw[top5].mean() > ncw[top5].mean()
    assert report(
        "A7 casewise-pattern", ok,
        f"top-5 mean: casewise={cw[top5].mean():.3f} vs "
        f"non-casewise={ncw[top5].mean():.3f} "
        f"(ratio {cw[top5].mean() / ncw[top5].mean():.2f})")


def test_a8_quantization_bounds():
    rng = np.random.default_rng(7)
    worst_i8 = 0.0
    worst_nf4 = 0.0
    ok = True
    gap_half = nf4_max_gap() / 2
    for trial in range(1000):
        m = int(rng.integers(1, 200))
        block = rng.normal(scale=10 ** rng.uniform(-3, 3), size=m)
        absmax = np.abs(block).max()

        err_i8 = np.abs(block - dequantize(quantize(block, "i8"))).max()
        if absmax > 0:
            worst_i8 = max(worst_i8, err_i8 / (absmax / 127))
        if err_i8 > absmax / 127 + 1e-12:
            ok = False

        dec = dequantize(quantize(block, "nf4"))
        for b in range(0, m, 64):
            hi = min(b + 64, m)
            bm = np.abs(block[b:hi]).max()
            err = np.abs(block[b:hi] - dec[b:hi]).max()
            if bm > 0:
                worst_nf4 = max(worst_nf4, err / (bm * gap_half))
            if err > bm * gap_half + 1e-12:
                ok = False

    zeros_ok = all(
        np.all(dequantize(quantize(np.zeros(130), mode)) == 0.0)
        for mode in ("f32", "f16", "i8", "nf4"))
    ok = ok and zeros_ok
    assert report(
        "A8 quantization-bounds", ok,
        f"worst i8 err = {worst_i8:.3f} of bound, worst nf4 = {worst_nf4:.3f} "
        f"of bound, zero blocks decode to zeros: {zeros_ok}")


def test_a9_determinism_across_threads(wine_ds, monkeypatch):
    blobs = {}
    for threads in ("1", "4"):
        monkeypatch.setenv("RFX_THREADS", threads)
        forest = rfx.train(wine_ds, rfx.TrainConfig(ntree=120, iseed=31))
        mem = prox.leaf_membership(forest, wine_ds)
        full = prox.full_proximity(mem)
        tb = prox.triblock_proximity(mem, tau=1e-4)
        lr = prox.lowrank_proximity(mem, rank=32, mode="i8", seed=31)
        blobs[threads] = (
            forest_to_bytes(forest),
            prox.fulltriangle_to_bytes(full),
            prox.triblock_to_bytes(tb),
            prox.lowrank_to_bytes(lr),
        )
    names = ("forest", "full", "triblock", "lowrank")
    same = [blobs["1"][i] == blobs["4"][i] for i in range(4)]
    ok = all(same)
    assert report("A9 determinism-across-threads", ok,
                  ", ".join(f"{n}: {'identical' if s else 'DIFFERS'}"
                            for n, s in zip(names, same)))
