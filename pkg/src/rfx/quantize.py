"""Factor quantization: F32 / F16 identity-style rounding, INT8 with
symmetric per-column scales, and 4-bit normal-float (NF4) with per-block
absmax scaling against a fixed 16-level codebook.

Error contracts (property-tested):
  i8   |x - decode| <= absmax / 127 per element (scale = absmax/127, half-up
       rounding error is scale/2)
  nf4  |x - decode| <= absmax * (max adjacent codebook gap) / 2
  all-zero blocks quantize to scale 0 and decode to exact zeros
"""

from dataclasses import dataclass

import numpy as np

MODES = ("f32", "f16", "i8", "nf4")

#: bytes per stored element, by mode (payload only, metadata excluded)
BYTES_PER_ELEMENT = {"f32": 4.0, "f16": 2.0, "i8": 1.0, "nf4": 0.5}

NF4_BLOCK = 64

#: 16-level normal-float codebook (quantiles of a standard normal, scaled to
#: [-1, 1], with an exact zero); index 0 is -1.0, index 15 is +1.0.
NF4_CODEBOOK = np.array([
    -1.0,
    -0.6961928009986877,
    -0.5250730514526367,
    -0.39491748809814453,
    -0.28444138169288635,
    -0.18477343022823334,
    -0.09105003625154495,
    0.0,
    0.07958029955625534,
    0.16093020141124725,
    0.24611230194568634,
    0.33791524171829224,
    0.44070982933044434,
    0.5626170039176941,
    0.7229568362236023,
    1.0,
], dtype=np.float64)


def nf4_max_gap() -> float:
    return float(np.diff(NF4_CODEBOOK).max())


@dataclass
class QuantFactor:
    """A quantized real block/matrix plus the metadata to decode it.

    ``data`` is mode-dependent: float32/float16 arrays in the original shape,
    int8 codes in the original shape, or a flat packed uint8 array of 4-bit
    NF4 codes (two per byte, column-major element order).  ``scales`` holds
    per-column scales (i8) or per-block absmax values (nf4).
    """

    mode: str
    shape: tuple
    data: np.ndarray
    scales: np.ndarray | None = None

    def dequantize(self) -> np.ndarray:
        return dequantize(self)

    def payload_nbytes(self) -> int:
        total = self.data.nbytes
        if self.scales is not None:
            total += self.scales.nbytes
        return total


def _as_matrix(values):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        return arr.reshape(-1, 1), arr.shape
    if arr.ndim == 2:
        return arr, arr.shape
    raise ValueError("quantize expects a 1-D block or a 2-D matrix")


def quantize(values, mode: str) -> QuantFactor:
    if mode not in MODES:
        raise ValueError(f"unknown quantization mode {mode!r}; expected one of {MODES}")
    mat, shape = _as_matrix(values)
    if not np.isfinite(mat).all():
        raise ValueError("quantize requires finite inputs")

    if mode == "f32":
        return QuantFactor(mode, shape, mat.astype(np.float32).reshape(shape))
    if mode == "f16":
        return QuantFactor(mode, shape, mat.astype(np.float16).reshape(shape))
    if mode == "i8":
        absmax = np.abs(mat).max(axis=0)
        scales = absmax / 127.0
        safe = np.where(scales > 0, scales, 1.0)
        codes = np.rint(mat / safe)
        np.clip(codes, -127, 127, out=codes)
        return QuantFactor(mode, shape, codes.astype(np.int8).reshape(shape),
                           scales.astype(np.float64))

    # nf4: flatten column-major, blocks of 64, per-block absmax
    flat = mat.reshape(-1, order="F")
    n_elem = flat.size
    n_blocks = (n_elem + NF4_BLOCK - 1) // NF4_BLOCK
    padded = np.zeros(n_blocks * NF4_BLOCK, dtype=np.float64)
    padded[:n_elem] = flat
    blocks = padded.reshape(n_blocks, NF4_BLOCK)
    absmax = np.abs(blocks).max(axis=1)
    safe = np.where(absmax > 0, absmax, 1.0)
    normalized = blocks / safe[:, None]
    codes = np.abs(normalized[:, :, None] - NF4_CODEBOOK).argmin(axis=2)
    codes = codes.reshape(-1).astype(np.uint8)
    # block length is even, so the code stream always pairs up exactly
    packed = (codes[0::2] | (codes[1::2] << 4)).astype(np.uint8)
    return QuantFactor(mode, shape, packed, absmax.astype(np.float64))


def dequantize(qf: QuantFactor) -> np.ndarray:
    if qf.mode == "f32" or qf.mode == "f16":
        return qf.data.astype(np.float64)
    if qf.mode == "i8":
        mat = qf.data.astype(np.float64)
        if mat.ndim == 1:
            return mat * qf.scales[0]
        return mat * qf.scales[None, :]
    if qf.mode == "nf4":
        n_elem = int(np.prod(qf.shape))
        n_blocks = qf.scales.shape[0]
        codes = np.empty(n_blocks * NF4_BLOCK, dtype=np.uint8)
        codes[0::2] = qf.data & 0x0F
        codes[1::2] = qf.data >> 4
        vals = NF4_CODEBOOK[codes].reshape(n_blocks, NF4_BLOCK)
        vals *= qf.scales[:, None]
        flat = vals.reshape(-1)[:n_elem]
        if len(qf.shape) == 1:
            return flat
        return flat.reshape(qf.shape, order="F")
    raise ValueError(f"unknown quantization mode {qf.mode!r}")
