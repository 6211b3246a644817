"""Quantization roundtrip error bounds, property-tested per mode."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rfx.quantize import (
    NF4_BLOCK,
    NF4_CODEBOOK,
    dequantize,
    nf4_max_gap,
    quantize,
)

# the published 16-level normal-float table, frozen independently here so a
# codebook regression cannot silently relax the error bounds
EXPECTED_CODEBOOK = [
    -1.0, -0.6961928009986877, -0.5250730514526367, -0.39491748809814453,
    -0.28444138169288635, -0.18477343022823334, -0.09105003625154495, 0.0,
    0.07958029955625534, 0.16093020141124725, 0.24611230194568634,
    0.33791524171829224, 0.44070982933044434, 0.5626170039176941,
    0.7229568362236023, 1.0,
]


def test_codebook_frozen():
    assert NF4_CODEBOOK.tolist() == EXPECTED_CODEBOOK
    assert len(NF4_CODEBOOK) == 16
    assert np.all(np.diff(NF4_CODEBOOK) > 0)


def test_max_gap_value():
    gaps = np.diff(EXPECTED_CODEBOOK)
    assert nf4_max_gap() == pytest.approx(gaps.max())
    assert nf4_max_gap() == pytest.approx(0.3038071990013123)


finite_blocks = arrays(np.float64, st.integers(min_value=1, max_value=300),
                       elements=st.floats(min_value=-1e6, max_value=1e6,
                                          allow_nan=False))


@given(finite_blocks)
@settings(max_examples=250, deadline=None)
def test_i8_roundtrip_bound(block):
    qf = quantize(block, "i8")
    decoded = dequantize(qf)
    absmax = np.abs(block).max()
    assert np.all(np.abs(block - decoded) <= absmax / 127 + 1e-12)


@given(finite_blocks)
@settings(max_examples=250, deadline=None)
def test_nf4_roundtrip_bound(block):
    qf = quantize(block, "nf4")
    decoded = dequantize(qf)
    # per-block absmax bound
    n = len(block)
    bound = np.empty(n)
    for b in range(0, n, NF4_BLOCK):
        hi = min(b + NF4_BLOCK, n)
        bound[b:hi] = np.abs(block[b:hi]).max()
    assert np.all(np.abs(block - decoded) <= bound * nf4_max_gap() / 2 + 1e-12)


def test_zero_block_decodes_to_zeros():
    for mode in ("i8", "nf4", "f16", "f32"):
        qf = quantize(np.zeros(100), mode)
        assert np.all(dequantize(qf) == 0.0)
        if mode in ("i8", "nf4"):
            assert np.all(qf.scales == 0.0)


def test_identical_value_block_nf4():
    v = 0.37
    block = np.full(64, v)
    decoded = dequantize(quantize(block, "nf4"))
    # absmax normalization maps everything to 1.0 -> decodes exactly to v
    assert np.allclose(decoded, v, atol=v * nf4_max_gap() / 2)


def test_f16_roundtrip():
    rng = np.random.default_rng(0)
    block = rng.normal(size=500)
    decoded = dequantize(quantize(block, "f16"))
    assert np.all(np.abs(block - decoded) <= np.abs(block) * 1e-3 + 1e-6)


def test_f32_near_identity():
    rng = np.random.default_rng(1)
    block = rng.normal(size=500)
    decoded = dequantize(quantize(block, "f32"))
    assert np.all(np.abs(block - decoded) <= np.abs(block) * 1e-6)


def test_matrix_shape_preserved():
    rng = np.random.default_rng(2)
    mat = rng.normal(size=(37, 5))
    for mode in ("f32", "f16", "i8", "nf4"):
        decoded = dequantize(quantize(mat, mode))
        assert decoded.shape == (37, 5)


def test_i8_per_column_scales():
    mat = np.array([[1.0, 100.0], [-2.0, 50.0]])
    qf = quantize(mat, "i8")
    assert qf.scales == pytest.approx([2.0 / 127, 100.0 / 127])


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        quantize(np.zeros(4), "int4")


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        quantize(np.array([1.0, np.inf]), "i8")


def test_nf4_partial_last_block():
    rng = np.random.default_rng(3)
    block = rng.normal(size=70)  # 64 + 6
    decoded = dequantize(quantize(block, "nf4"))
    assert decoded.shape == (70,)
    bound = np.abs(block[:64]).max() * nf4_max_gap() / 2
    assert np.all(np.abs(block[:64] - decoded[:64]) <= bound + 1e-12)
