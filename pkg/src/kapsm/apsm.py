"""Online APSM learner for partially linear filters.

The adaptive projected subgradient method (APSM) processes a stream of
training samples ``(r_n, b_n)``.  Each sample defines a consistency set

    C_n = { f in H : |f(r_n) - b_n| <= epsilon },

and each step combines relaxed projections onto the sets of a sliding window
``J_n`` of the most recent ``W`` samples:

    f_{n+1} = sum_{j in J_n} q_j * P_{C_j}(f_n),
    P_{C_j}(f_n) = f_n + beta_j * kappa(r_j, .),

with uniform weights ``q_j = 1 / |J_n|``.  All projections within one step
are computed from the same ``f_n``; they are mutually independent.

Complex baseband data enters through the standard complex-to-real mapping:
each received vector ``r in C^M`` and pilot symbol ``b`` produce two real
samples (index ``n = 2t + l - 1`` for symbol time ``t`` and part ``l``), and
detection recombines the two real responses into a complex estimate
``g(r) = f(r1) + i f(r2)``.

Two training paths are provided:

* :func:`apsm_step` — the literal one-step update that appends one dictionary
  atom per nonzero projection.  Transparent, but the dictionary then grows
  with ``W`` atoms per step, which is wasteful: a sample re-projected in
  later windows re-appends the same atom.
* :class:`ApsmTrainer` / :func:`train` — the production path.  Because every
  appended atom is some training sample ``r_i``, the filter always admits the
  form ``f_n = sum_i gamma_i kappa(r_i, .)`` with one coefficient per sample;
  the trainer accumulates ``gamma_i`` in place (and folds linear parts into
  ``theta``), producing the same function with at most one atom per sample.
  The equivalence of the two paths is covered by tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .kernels import (
    FilterState,
    KernelParams,
    evaluate,
    self_kernel,
    zero_filter,
)

__all__ = [
    "TrainingSample",
    "ApsmConfig",
    "DegenerateSampleError",
    "DictionaryCapacityError",
    "window_indices",
    "uniform_weights",
    "complex_to_real_pair",
    "realify_batch",
    "beta",
    "apsm_step",
    "ApsmTrainer",
    "train",
    "detect_symbol",
]


class DegenerateSampleError(ValueError):
    """Raised when a sample has kappa(r, r) = 0 (zero vector with w_g = 0)."""


class DictionaryCapacityError(RuntimeError):
    """Raised when an update would push the Gaussian dictionary past max_atoms."""


@dataclass(frozen=True)
class TrainingSample:
    """One realified training pair (r, b) defining a consistency set."""

    r: np.ndarray
    b: float

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.float64)
        if r.ndim != 1:
            raise ValueError("sample vector must be 1-D")
        if not np.all(np.isfinite(r)) or not np.isfinite(self.b):
            raise ValueError("training sample must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "b", float(self.b))


@dataclass(frozen=True)
class ApsmConfig:
    """APSM hyperparameters.

    Parameters
    ----------
    window : int
        Sliding window size W (number of concurrent projections), >= 1.
    epsilon : float
        Noise tolerance of the consistency sets, > 0.  The default 0.01 suits
        unit-average-energy constellations.
    params : KernelParams
        Sum-space kernel weights and Gaussian width.
    weight_scheme : str
        Projection weighting; only ``"uniform"`` is supported.
    max_atoms : int or None
        Optional hard cap on the Gaussian dictionary size.  When an update
        would exceed it, DictionaryCapacityError is raised — atoms are never
        silently dropped.
    """

    window: int = 20
    epsilon: float = 0.01
    params: KernelParams = field(default_factory=KernelParams)
    weight_scheme: str = "uniform"
    max_atoms: Optional[int] = None

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.weight_scheme != "uniform":
            raise ValueError(f"unsupported weight_scheme {self.weight_scheme!r}")
        if self.max_atoms is not None and self.max_atoms < 1:
            raise ValueError(f"max_atoms must be >= 1 or None, got {self.max_atoms}")


def window_indices(n: int, window: int) -> range:
    """Indices J_n = {n-W+1, ..., n} for n >= W-1, else {0, ..., n}."""
    if n < 0:
        raise ValueError(f"sample index must be >= 0, got {n}")
    return range(max(0, n - window + 1), n + 1)


def uniform_weights(count: int) -> np.ndarray:
    """Uniform combination weights of length ``count`` summing to 1.0 exactly.

    The last entry absorbs the rounding defect of the explicit summation,
    iterating until the sum is exactly 1.0 under numpy's reduction order.
    """
    if count < 1:
        raise ValueError("weight count must be >= 1")
    w = np.full(count, 1.0 / count)
    for _ in range(10):
        defect = 1.0 - float(np.sum(w))
        if defect == 0.0:
            break
        w[-1] += defect
    return w


def complex_to_real_pair(r, b) -> Tuple[TrainingSample, TrainingSample]:
    """Map a complex pair to its two real training samples.

    Sample 1 is ``([Re r; Im r], Re b)`` and sample 2 is
    ``([Im r; -Re r], Im b)``; the ordering matches the stream index
    convention ``n = 2t + l - 1``.
    """
    r = np.asarray(r, dtype=np.complex128)
    if r.ndim != 1:
        raise ValueError("received vector must be 1-D")
    b = complex(b)
    r1 = np.concatenate([r.real, r.imag])
    r2 = np.concatenate([r.imag, -r.real])
    return TrainingSample(r1, b.real), TrainingSample(r2, b.imag)


def realify_batch(rx) -> np.ndarray:
    """Realify T complex vectors into 2T interleaved real vectors.

    Row ``2t`` is ``[Re r(t); Im r(t)]`` and row ``2t + 1`` is
    ``[Im r(t); -Re r(t)]``, matching :func:`complex_to_real_pair`.
    """
    rx = np.atleast_2d(np.asarray(rx, dtype=np.complex128))
    out = np.empty((2 * rx.shape[0], 2 * rx.shape[1]))
    out[0::2] = np.hstack([rx.real, rx.imag])
    out[1::2] = np.hstack([rx.imag, -rx.real])
    return out


def _beta_from_residual(residual: float, epsilon: float, denom: float) -> float:
    """Three-case projection coefficient given residual = f(r) - b."""
    if residual < -epsilon:
        return (-residual - epsilon) / denom
    if residual > epsilon:
        return (-residual + epsilon) / denom
    return 0.0


def beta(f: FilterState, s: TrainingSample, epsilon: float, params: KernelParams) -> float:
    """Projection coefficient onto the consistency set of sample ``s``.

    Returns 0 when the filter already responds within ``epsilon`` of the
    target; otherwise the signed step that lands ``f + beta * kappa(r, .)``
    exactly on the epsilon-boundary of the set.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    denom = self_kernel(s.r, params)
    if denom <= 0.0:
        raise DegenerateSampleError(
            "kappa(r, r) = 0: zero sample vector with a weightless Gaussian kernel"
        )
    y = evaluate(f, s.r, params)
    return _beta_from_residual(y - s.b, epsilon, denom)


def apsm_step(f: FilterState, window: Sequence[TrainingSample], cfg: ApsmConfig) -> FilterState:
    """One APSM update over a window of samples (literal append semantics).

    All projection coefficients are computed from the same input filter.  The
    returned filter has ``theta += w_l * sum_j q_j beta_j r_j`` and one new
    dictionary atom per nonzero ``beta_j``, appended in window order with
    coefficient ``q_j beta_j``.
    """
    if not window:
        raise ValueError("window must contain at least one sample")
    p = cfg.params
    q = uniform_weights(len(window))
    betas = np.array([beta(f, s, cfg.epsilon, p) for s in window])
    active = np.nonzero(betas)[0]
    if active.size == 0:
        return f
    if cfg.max_atoms is not None and f.n_atoms + active.size > cfg.max_atoms:
        raise DictionaryCapacityError(
            f"update needs {active.size} new atoms but the dictionary holds "
            f"{f.n_atoms} of max {cfg.max_atoms}"
        )
    rows = np.stack([window[j].r for j in active])
    qb = q[active] * betas[active]
    theta = f.theta + p.w_l * (qb @ rows)
    atoms = np.vstack([f.atoms, rows]) if f.n_atoms else rows
    coeffs = np.concatenate([f.coeffs, qb])
    return FilterState(theta, atoms, coeffs)


class ApsmTrainer:
    """Incremental APSM learner with a coalesced per-sample dictionary.

    Feed realified samples one at a time with :meth:`observe`; each call runs
    one window update.  Because every projection atom is one of the observed
    samples, the trainer keeps a single accumulated coefficient per distinct
    sample instead of appending an atom per projection — the represented
    function is identical, the dictionary roughly ``W`` times smaller.

    A warm-start filter may be supplied; its dictionary becomes a read-only
    prefix and its theta the starting linear part.
    """

    def __init__(self, dim: int, cfg: ApsmConfig, f0: Optional[FilterState] = None):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.cfg = cfg
        self.dim = dim
        p = cfg.params
        self._inv2s = 1.0 / (2.0 * p.sigma_sq)
        if f0 is None:
            f0 = zero_filter(dim)
        if f0.dim != dim:
            raise ValueError(f"f0 has dimension {f0.dim}, expected {dim}")
        self.theta = f0.theta.copy()
        # Dictionary buffers: warm-start atoms first, then one slot per
        # distinct observed sample that ever received a nonzero projection.
        cap = max(256, 2 * f0.n_atoms)
        self._atoms = np.empty((cap, dim))
        self._anorm = np.empty(cap)
        self._gamma = np.empty(cap)
        self._n_atoms = f0.n_atoms
        if f0.n_atoms:
            self._atoms[: f0.n_atoms] = f0.atoms
            self._anorm[: f0.n_atoms] = np.einsum("ij,ij->i", f0.atoms, f0.atoms)
            self._gamma[: f0.n_atoms] = f0.coeffs
        # Sample history (the sliding window re-reads recent samples).
        self._samples = np.empty((256, dim))
        self._targets = np.empty(256)
        self._snorm = np.empty(256)
        self._slot = np.empty(256, dtype=np.int64)
        self.n_seen = 0

    @staticmethod
    def _grow(*arrays):
        return [np.concatenate([a, np.empty_like(a)]) for a in arrays]

    def _window_response(self, lo: int, hi: int) -> np.ndarray:
        """Evaluate the current filter on samples lo..hi-1 (vectorized)."""
        rw = self._samples[lo:hi]
        y = rw @ self.theta
        p = self.cfg.params
        if p.w_g != 0.0 and self._n_atoms:
            a = self._atoms[: self._n_atoms]
            d2 = (
                self._anorm[: self._n_atoms, None]
                + self._snorm[lo:hi][None, :]
                - 2.0 * (a @ rw.T)
            )
            np.maximum(d2, 0.0, out=d2)
            y = y + p.w_g * (self._gamma[: self._n_atoms] @ np.exp(-d2 * self._inv2s))
        return y

    def observe(self, r, b: float):
        """Ingest one realified sample and run one APSM window update."""
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (self.dim,):
            raise ValueError(f"sample has shape {r.shape}, trainer dimension is {self.dim}")
        n = self.n_seen
        if n == len(self._targets):
            self._samples, = self._grow(self._samples)
            self._targets, self._snorm = self._grow(self._targets, self._snorm)
            self._slot, = self._grow(self._slot)
        self._samples[n] = r
        self._targets[n] = b
        self._snorm[n] = r @ r
        self._slot[n] = -1
        self.n_seen = n + 1

        p = self.cfg.params
        lo = window_indices(n, self.cfg.window).start
        y = self._window_response(lo, n + 1)
        res = y - self._targets[lo : n + 1]
        denom = p.w_l * self._snorm[lo : n + 1] + p.w_g
        if np.any(denom <= 0.0):
            raise DegenerateSampleError(
                "kappa(r, r) = 0: zero sample vector with a weightless Gaussian kernel"
            )
        eps = self.cfg.epsilon
        betas = np.where(
            res < -eps, (-res - eps) / denom, np.where(res > eps, (-res + eps) / denom, 0.0)
        )
        active = np.nonzero(betas)[0]
        if active.size == 0:
            return
        q = uniform_weights(n + 1 - lo)
        qb = q[active] * betas[active]
        self.theta += p.w_l * (qb @ self._samples[lo + active])
        if p.w_g == 0.0:
            return
        for step, j in enumerate(active):
            i = lo + int(j)
            slot = self._slot[i]
            if slot < 0:
                cap = self.cfg.max_atoms
                if cap is not None and self._n_atoms >= cap:
                    raise DictionaryCapacityError(
                        f"dictionary is at its cap of {cap} atoms"
                    )
                if self._n_atoms == len(self._gamma):
                    self._atoms, = self._grow(self._atoms)
                    self._anorm, self._gamma = self._grow(self._anorm, self._gamma)
                slot = self._n_atoms
                self._slot[i] = slot
                self._atoms[slot] = self._samples[i]
                self._anorm[slot] = self._snorm[i]
                self._gamma[slot] = 0.0
                self._n_atoms += 1
            self._gamma[slot] += qb[step]

    def observe_symbol(self, r, b):
        """Ingest one complex pair: two realified samples, two window updates."""
        s1, s2 = complex_to_real_pair(r, b)
        self.observe(s1.r, s1.b)
        self.observe(s2.r, s2.b)

    def state(self) -> FilterState:
        """Snapshot the current filter as an immutable FilterState."""
        k = self._n_atoms
        return FilterState(
            self.theta.copy(), self._atoms[:k].copy(), self._gamma[:k].copy()
        )


def train(
    f0: Optional[FilterState],
    stream: Iterable[Tuple[np.ndarray, complex]],
    cfg: ApsmConfig,
) -> FilterState:
    """Train over a stream of (complex received vector, complex pilot) pairs.

    Each pair contributes two realified samples in the order ``n = 2t + l - 1``
    and each new sample triggers one window update, so a stream of T symbols
    performs 2T updates.  An empty stream returns ``f0`` (or the zero filter).
    """
    trainer = None
    for r, b in stream:
        if trainer is None:
            r = np.asarray(r, dtype=np.complex128)
            trainer = ApsmTrainer(2 * r.shape[0], cfg, f0=f0)
        trainer.observe_symbol(r, b)
    if trainer is None:
        if f0 is None:
            raise ValueError("empty stream with no initial filter: dimension unknown")
        return f0
    return trainer.state()


def detect_symbol(f: FilterState, r, params: KernelParams) -> complex:
    """Complex symbol estimate ``g(r) = f(r1) + i f(r2)``."""
    r = np.asarray(r, dtype=np.complex128)
    if r.ndim != 1 or 2 * r.shape[0] != f.dim:
        raise ValueError(f"received vector of length {r.shape} does not match filter dim {f.dim}")
    r1 = np.concatenate([r.real, r.imag])
    r2 = np.concatenate([r.imag, -r.real])
    return complex(evaluate(f, r1, params), evaluate(f, r2, params))
