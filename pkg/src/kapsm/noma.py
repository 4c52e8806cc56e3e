"""Synthetic NOMA uplink: Gray-coded modulation, flat Rayleigh channels,
superposed reception, and end-to-end BER trials.

The received signal model is

    r(t) = sum_k sqrt(p_k) b_k(t) h_k + n(t),   r(t) in C^M,

with per-user powers ``p_k``, channel signatures ``h_k`` and circular complex
Gaussian noise.  ``noise_var`` is the per-complex-dimension noise variance
(real and imaginary part carry ``noise_var / 2`` each), and SNR is defined as

    SNR = sum_k p_k E||h_k||^2 E|b|^2 / (M * noise_var),

which reduces to ``sum_k p_k / noise_var`` for unit-variance channel entries
and unit-energy constellations.

Channels are non-dispersive (flat); when a frame is described as spanning
multiple subcarriers, the subcarrier count is bookkeeping only — every symbol
sees an independent use of the same flat channel and the stream is ordered
time-major across subcarriers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .apsm import ApsmConfig, train
from .engine import EngineConfig, batch_detect
from .kernels import zero_filter

__all__ = [
    "SCHEMES",
    "Constellation",
    "get_constellation",
    "modulate",
    "demodulate_hard",
    "ChannelModel",
    "FrameSpec",
    "TrialReport",
    "draw_channel",
    "noise_var_for_snr",
    "synthesize_received",
    "run_trial",
    "ber",
]

SCHEMES = ("BPSK", "QPSK", "QAM16", "QAM64")

# Per-axis amplitude for each Gray label, most significant bit first.  The
# 2- and 3-bit tables are the reflected Gray orderings of the 4- and 8-level
# amplitude grids.
_GRAY_AXIS_2 = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}
_GRAY_AXIS_3 = {
    0b000: -7.0,
    0b001: -5.0,
    0b011: -3.0,
    0b010: -1.0,
    0b110: 1.0,
    0b111: 3.0,
    0b101: 5.0,
    0b100: 7.0,
}


@dataclass(frozen=True)
class Constellation:
    """A Gray-labeled constellation with unit average energy.

    ``points[i]`` is the symbol whose label is the ``bits_per_symbol``-bit
    binary expansion of ``i`` (most significant bit first).
    """

    scheme: str
    points: np.ndarray
    bits_per_symbol: int

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=np.complex128))


def _build_constellation(scheme: str) -> Constellation:
    if scheme == "BPSK":
        return Constellation("BPSK", [1.0 + 0.0j, -1.0 + 0.0j], 1)
    if scheme == "QPSK":
        pts = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2.0)
        return Constellation("QPSK", pts, 2)
    if scheme in ("QAM16", "QAM64"):
        axis = _GRAY_AXIS_2 if scheme == "QAM16" else _GRAY_AXIS_3
        half = 2 if scheme == "QAM16" else 3
        scale = 1.0 / np.sqrt(10.0 if scheme == "QAM16" else 42.0)
        pts = np.empty(1 << (2 * half), dtype=np.complex128)
        for idx in range(pts.size):
            i_label = idx >> half
            q_label = idx & ((1 << half) - 1)
            pts[idx] = scale * (axis[i_label] + 1j * axis[q_label])
        return Constellation(scheme, pts, 2 * half)
    raise ValueError(f"unknown modulation scheme {scheme!r}; expected one of {SCHEMES}")


@lru_cache(maxsize=None)
def get_constellation(scheme: str) -> Constellation:
    return _build_constellation(scheme)


def modulate(bits, scheme: str) -> np.ndarray:
    """Map a bit sequence to constellation symbols (MSB-first per symbol)."""
    con = get_constellation(scheme)
    bits = np.asarray(bits, dtype=np.int64)
    if bits.ndim != 1:
        raise ValueError("bits must be a 1-D sequence")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    k = con.bits_per_symbol
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} is not a multiple of {k} ({scheme})")
    idx = bits.reshape(-1, k) @ (1 << np.arange(k - 1, -1, -1))
    return con.points[idx]


def demodulate_hard(estimates, scheme: str) -> np.ndarray:
    """Hard decisions: Gray label of the Euclidean-nearest point per estimate.

    Distance ties break toward the lowest point index.
    """
    con = get_constellation(scheme)
    est = np.atleast_1d(np.asarray(estimates, dtype=np.complex128))
    idx = np.abs(est[:, None] - con.points[None, :]).argmin(axis=1)
    k = con.bits_per_symbol
    shifts = np.arange(k - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.int64).reshape(-1)


@dataclass(frozen=True)
class ChannelModel:
    """Static uplink: K users, M antennas, signatures h (K x M), powers p,
    and per-complex-dimension noise variance."""

    K: int
    M: int
    h: np.ndarray
    p: np.ndarray
    noise_var: float

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128).reshape(self.K, self.M)
        p = np.asarray(self.p, dtype=np.float64).reshape(self.K)
        if not np.all(np.isfinite(h)):
            raise ValueError("channel signatures must be finite")
        if np.any(p < 0):
            raise ValueError("transmit powers must be >= 0")
        if self.noise_var < 0:
            raise ValueError("noise_var must be >= 0")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class FrameSpec:
    """Frame layout: training/data symbol totals, modulation, seed.

    ``subcarriers`` is a counting convention for describing how the totals
    split across flat subcarriers (time-major ordering); it never changes the
    generated stream.
    """

    n_train: int
    n_data: int
    scheme: str = "QPSK"
    subcarriers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_train < 0 or self.n_data < 0:
            raise ValueError("symbol counts must be >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown modulation scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.subcarriers < 1:
            raise ValueError("subcarriers must be >= 1")


@dataclass(frozen=True)
class TrialReport:
    """Outcome of one trial: BER, dictionary size, detection wall time."""

    ber: float
    trained_atoms: int
    detect_us: float


def draw_channel(K: int, M: int, power_profile="uniform", noise_var: float = 0.0,
                 rng: Optional[np.random.Generator] = None) -> ChannelModel:
    """Draw i.i.d. circular complex Gaussian signatures (unit-variance entries).

    ``power_profile`` is either ``"uniform"`` (all p_k = 1) or a length-K
    sequence of nonnegative powers.
    """
    if K < 1 or M < 1:
        raise ValueError("K and M must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    h = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))) / np.sqrt(2.0)
    if isinstance(power_profile, str):
        if power_profile != "uniform":
            raise ValueError(f"unknown power profile {power_profile!r}")
        p = np.ones(K)
    else:
        p = np.asarray(power_profile, dtype=np.float64)
    return ChannelModel(K, M, h, p, float(noise_var))


def noise_var_for_snr(powers, snr_db: float) -> float:
    """Per-complex-dimension noise variance achieving the given SNR.

    Uses the documented convention SNR = sum_k p_k E||h_k||^2 E|b|^2 /
    (M * noise_var), which for unit-variance channel entries and unit-energy
    constellations is sum_k p_k / noise_var.
    """
    total = float(np.sum(np.asarray(powers, dtype=np.float64)))
    if total <= 0:
        raise ValueError("total transmit power must be positive")
    return total / 10.0 ** (snr_db / 10.0)


def synthesize_received(symbols, ch: ChannelModel, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Superpose K users' symbol streams through the channel and add noise.

    ``symbols`` is a (K, T) complex matrix; the result is a (T, M) complex
    matrix of received vectors.  Noiseless synthesis (noise_var = 0) draws no
    randomness.
    """
    b = np.atleast_2d(np.asarray(symbols, dtype=np.complex128))
    if b.shape[0] != ch.K:
        raise ValueError(f"symbol matrix has {b.shape[0]} rows, channel has K={ch.K}")
    t = b.shape[1]
    rx = b.T @ (np.sqrt(ch.p)[:, None] * ch.h) if ch.K else np.zeros((t, ch.M), dtype=np.complex128)
    if ch.noise_var > 0:
        if rng is None:
            raise ValueError("noisy synthesis requires an rng")
        scale = np.sqrt(ch.noise_var / 2.0)
        rx = rx + scale * (rng.standard_normal((t, ch.M)) + 1j * rng.standard_normal((t, ch.M)))
    return rx


def run_trial(ch: ChannelModel, frame: FrameSpec, cfg: ApsmConfig, engine: EngineConfig,
              target_user: int = 0, rng: Optional[np.random.Generator] = None) -> TrialReport:
    """One end-to-end transmission: train on pilots, detect the data segment.

    Draws per-user bit streams, synthesizes the received frame, trains one
    filter for ``target_user`` on the ``n_train`` pilot symbols, batch-detects
    the ``n_data`` data symbols, hard-demodulates, and scores BER against the
    transmitted bits.  Deterministic for a given rng state.
    """
    if not 0 <= target_user < ch.K:
        raise ValueError(f"target_user {target_user} out of range for K={ch.K}")
    if frame.n_data < 1:
        raise ValueError("need at least one data symbol to score")
    if rng is None:
        rng = np.random.default_rng(frame.seed)
    con = get_constellation(frame.scheme)
    k = con.bits_per_symbol
    t = frame.n_train + frame.n_data
    bits = rng.integers(0, 2, size=(ch.K, t * k))
    symbols = np.stack([modulate(bits[u], frame.scheme) for u in range(ch.K)])
    rx = synthesize_received(symbols, ch, rng)

    f = train(
        zero_filter(2 * ch.M),
        zip(rx[: frame.n_train], symbols[target_user, : frame.n_train]),
        cfg,
    )
    t0 = time.perf_counter()
    estimates = batch_detect(f, rx[frame.n_train :], cfg.params, engine)
    detect_us = (time.perf_counter() - t0) * 1e6
    rx_bits = demodulate_hard(estimates, frame.scheme)
    tx_bits = bits[target_user, frame.n_train * k :]
    return TrialReport(ber(tx_bits, rx_bits), f.n_atoms, detect_us)


def ber(tx_bits, rx_bits) -> float:
    """Fraction of differing bit positions (lengths must match, nonzero)."""
    tx = np.asarray(tx_bits)
    rx = np.asarray(rx_bits)
    if tx.shape != rx.shape or tx.ndim != 1:
        raise ValueError(f"bit streams must be 1-D and equal length, got {tx.shape} vs {rx.shape}")
    if tx.size == 0:
        raise ValueError("ber is undefined for empty bit streams")
    return float(np.mean(tx != rx))
