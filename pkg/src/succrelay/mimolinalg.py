"""Linear algebra for the equivalent multiple-access MIMO channel.

With L codewords sent over L+1 slots, the destination sees an (L+1) x L
bidiagonal channel matrix H: column k carries the direct coefficient on
row k and the forwarding relay's coefficient on row k+1, relays
alternating R1, R2, R1, ...  This module builds H, evaluates the sum-rate
log-determinant bound, and extracts per-stream MMSE successive
interference cancellation (V-BLAST) SINRs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import ChannelRealization

_LN2 = np.log(2.0)

# Relative slack for asserting the per-stream SINR bound; the bound is exact
# in exact arithmetic, the slack only absorbs solver rounding.
_SINR_BOUND_RTOL = 1e-9


class DetectionOrder(Enum):
    """Stream selection rule for successive interference cancellation."""

    STRONGEST_FIRST = "strongest_first"
    NATURAL = "natural"


@dataclass(frozen=True, eq=False)
class EquivalentChannel:
    """The (L+1) x L bidiagonal matrix of one frame."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] + 1 or m.shape[1] < 1:
            raise ValueError(f"expected an (l+1) x l matrix, got shape {m.shape}")
        l = m.shape[1]
        off = m.copy()
        idx = np.arange(l)
        off[idx, idx] = 0.0
        off[idx + 1, idx] = 0.0
        if np.any(off != 0.0):
            raise ValueError("matrix must be zero off the two diagonals")
        diag = m[idx, idx]
        if l > 1 and not np.all(diag == diag[0]):
            raise ValueError("main diagonal must repeat the direct coefficient")

    @property
    def l(self) -> int:
        return self.matrix.shape[1]


def build_equivalent_channel(real: ChannelRealization, l: int) -> EquivalentChannel:
    """Assemble the frame's bidiagonal channel matrix for ``l`` codewords."""
    if l < 1:
        raise ValueError(f"frame length l must be >= 1, got {l}")
    m = np.zeros((l + 1, l), dtype=complex)
    for k in range(l):
        m[k, k] = real.h_sd
        m[k + 1, k] = real.h_r1d if k % 2 == 0 else real.h_r2d
    return EquivalentChannel(m)


def build_equivalent_channel_batch(
    h_sd: np.ndarray, h_r1d: np.ndarray, h_r2d: np.ndarray, l: int
) -> np.ndarray:
    """Stacked (n, l+1, l) channel matrices from coefficient arrays."""
    if l < 1:
        raise ValueError(f"frame length l must be >= 1, got {l}")
    n = h_sd.shape[0]
    m = np.zeros((n, l + 1, l), dtype=complex)
    for k in range(l):
        m[:, k, k] = h_sd
        m[:, k + 1, k] = h_r1d if k % 2 == 0 else h_r2d
    return m


def logdet_capacity_batch(h: np.ndarray, snr: float) -> np.ndarray:
    """log2 det(I + snr * H H^H) for stacked matrices, via Cholesky."""
    if snr < 0.0:
        raise ValueError(f"snr must be >= 0, got {snr}")
    n, rows, _ = h.shape
    gram = snr * (h @ h.conj().swapaxes(-1, -2))
    gram[:, np.arange(rows), np.arange(rows)] += 1.0
    chol = np.linalg.cholesky(gram)
    diag = np.real(np.einsum("nii->ni", chol))
    return 2.0 * np.sum(np.log(diag), axis=1) / _LN2


def logdet_capacity(channel: EquivalentChannel, snr: float) -> float:
    """Total bits over the frame: log2 det(I + snr * H H^H).

    The Gram matrix is Hermitian positive definite for any snr >= 0, so the
    Cholesky factorization is always well defined.
    """
    return float(logdet_capacity_batch(channel.matrix[None, :, :], snr)[0])


@dataclass(frozen=True, eq=False)
class SinrChain:
    """Per-stream post-detection SINRs of one SIC pass.

    ``order[j]`` is the stream detected at stage j; ``sinr[k]`` is the SINR
    stream k saw at the stage it was detected (linear power ratio).
    """

    order: tuple[int, ...]
    sinr: np.ndarray

    def __post_init__(self) -> None:
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"order must be a permutation, got {self.order}")
        if np.any(self.sinr < 0.0) or not np.all(np.isfinite(self.sinr)):
            raise ValueError("sinr values must be finite and >= 0")

    def sum_rate(self) -> float:
        """Chain-rule sum rate, sum_k log2(1 + sinr_k), in bits."""
        return float(np.sum(np.log1p(self.sinr)) / _LN2)


def mmse_sic_sinrs_batch(
    h: np.ndarray, snr: float, ordering: DetectionOrder = DetectionOrder.STRONGEST_FIRST
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized MMSE-SIC over stacked channels.

    At each stage the SINR of an undetected stream k is
    snr * h_k^H (I + snr * sum_{j in A, j != k} h_j h_j^H)^-1 h_k with A the
    set of still-undetected streams; the detected stream's column is then
    removed.  Strongest-first picks the maximal-SINR stream (ties go to the
    lowest index); natural order detects streams in time order.

    Returns (orders, sinrs): (n, l) arrays, sinrs indexed by stream.
    """
    if snr < 0.0:
        raise ValueError(f"snr must be >= 0, got {snr}")
    n, rows, l = h.shape
    eye = np.eye(rows)
    active = np.ones((n, l), dtype=bool)
    orders = np.empty((n, l), dtype=np.intp)
    sinrs = np.zeros((n, l))
    rows_idx = np.arange(n)

    def candidate_sinr(k: int) -> np.ndarray:
        # Interference-only covariance: build the Gram afresh from the
        # remaining columns minus k (no rank-one downdates, no cancellation).
        mask = active.copy()
        mask[:, k] = False
        hm = h * mask[:, None, :]
        a = eye + snr * (hm @ hm.conj().swapaxes(-1, -2))
        x = np.linalg.solve(a, h[:, :, k][:, :, None])[:, :, 0]
        q = np.real(np.einsum("ni,ni->n", h[:, :, k].conj(), x))
        return snr * np.maximum(q, 0.0)

    for stage in range(l):
        if ordering is DetectionOrder.NATURAL:
            sel = np.full(n, stage, dtype=np.intp)
            sel_sinr = candidate_sinr(stage)
        else:
            cand = np.full((n, l), -np.inf)
            for k in range(l):
                live = active[:, k]
                if not live.any():
                    continue
                cand[live, k] = candidate_sinr(k)[live]
            sel = np.argmax(cand, axis=1)
            sel_sinr = cand[rows_idx, sel]
        orders[:, stage] = sel
        sinrs[rows_idx, sel] = sel_sinr
        active[rows_idx, sel] = False

    # Post-detection SINR can never exceed the interference-free bound
    # snr * ||h_k||^2; violations beyond rounding indicate a solver bug.
    bound = snr * np.sum(np.abs(h) ** 2, axis=1)
    assert np.all(
        sinrs <= bound * (1.0 + _SINR_BOUND_RTOL) + 1e-12
    ), "per-stream SINR exceeded the column-norm bound"
    return orders, sinrs


def mmse_sic_sinrs(
    channel: EquivalentChannel,
    snr: float,
    ordering: DetectionOrder = DetectionOrder.STRONGEST_FIRST,
) -> SinrChain:
    """MMSE-SIC detection order and per-stream SINRs for one frame."""
    orders, sinrs = mmse_sic_sinrs_batch(channel.matrix[None, :, :], snr, ordering)
    return SinrChain(order=tuple(int(k) for k in orders[0]), sinr=sinrs[0])
