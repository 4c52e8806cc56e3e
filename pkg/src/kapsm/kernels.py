"""Sum-space kernel machinery for partially linear filters.

A partially linear filter lives in the sum ``H = H_L + H_G`` of the RKHS
induced by the linear kernel ``kappa_L(u, v) = u.v`` and the RKHS induced by
the Gaussian kernel ``kappa_G(u, v) = exp(-||u - v||^2 / (2 sigma^2))``.  The
sum space is itself an RKHS with kernel

    kappa(u, v) = w_L * kappa_L(u, v) + w_G * kappa_G(u, v)

and inner product

    <f, g>_H = <f_L, g_L>_{H_L} / w_L + <f_G, g_G>_{H_G} / w_G.

This module stores filters in collapsed form: the linear component is folded
into a single coefficient vector ``theta`` (so evaluating it is O(dim)
regardless of how many projections built it), while the Gaussian component
keeps an explicit dictionary of atoms and raw coefficients.  ``w_G`` is
applied at evaluation time, so the same dictionary can be re-weighted without
being rebuilt.

All reference-path arithmetic is 64-bit; vectors are 1-D ``float64`` arrays
of length ``2 * M`` (realified complex baseband samples).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KernelParams",
    "FilterState",
    "kernel_linear",
    "kernel_gaussian",
    "kernel_sum",
    "self_kernel",
    "evaluate",
    "inner_product",
    "norm_sq",
    "zero_filter",
    "from_expansion",
]


@dataclass(frozen=True)
class KernelParams:
    """Weights and width defining the sum-space kernel.

    Parameters
    ----------
    w_l : float
        Weight of the linear kernel, >= 0.
    w_g : float
        Weight of the Gaussian kernel, >= 0.  ``w_l + w_g`` must be positive.
    sigma_sq : float
        Gaussian kernel variance sigma^2, > 0.
    """

    w_l: float = 0.5
    w_g: float = 0.5
    sigma_sq: float = 0.05

    def __post_init__(self):
        if not self.sigma_sq > 0:
            raise ValueError(f"sigma_sq must be > 0, got {self.sigma_sq}")
        if self.w_l < 0 or self.w_g < 0:
            raise ValueError(f"kernel weights must be >= 0, got w_l={self.w_l}, w_g={self.w_g}")
        if self.w_l + self.w_g <= 0:
            raise ValueError("at least one kernel weight must be positive")


@dataclass(frozen=True)
class FilterState:
    """A partially linear filter in collapsed representation.

    ``theta`` holds the collapsed linear part: ``f_L(u) = theta . u``, with
    the linear kernel weight and all projection coefficients already absorbed.
    ``atoms`` and ``coeffs`` hold the Gaussian dictionary: ``f_G(u) =
    w_g * sum_i coeffs[i] * kappa_G(atoms[i], u)`` (coefficients are stored
    raw, without ``w_g``).

    Instances are immutable values and safe to share across threads.
    """

    theta: np.ndarray
    atoms: np.ndarray = field(default=None)  # shape (n_atoms, dim)
    coeffs: np.ndarray = field(default=None)  # shape (n_atoms,)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        atoms = self.atoms
        coeffs = self.coeffs
        if atoms is None:
            atoms = np.empty((0, theta.shape[0]))
        atoms = np.asarray(atoms, dtype=np.float64)
        if coeffs is None:
            coeffs = np.empty(0)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if theta.ndim != 1:
            raise ValueError("theta must be a 1-D vector")
        if atoms.ndim != 2 or atoms.shape[1] != theta.shape[0]:
            raise ValueError(
                f"atoms must have shape (n_atoms, {theta.shape[0]}), got {atoms.shape}"
            )
        if coeffs.shape != (atoms.shape[0],):
            raise ValueError(
                f"coeffs must have shape ({atoms.shape[0]},), got {coeffs.shape}"
            )
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]


def zero_filter(dim: int) -> FilterState:
    """The zero function in H, with an empty Gaussian dictionary."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return FilterState(np.zeros(dim), np.empty((0, dim)), np.empty(0))


def from_expansion(gammas, atoms, params: KernelParams) -> FilterState:
    """Collapse an explicit kernel expansion ``f = sum_i gammas[i] kappa(atoms[i], .)``.

    The linear parts fold into ``theta = w_l * sum_i gammas[i] * atoms[i]``;
    the Gaussian parts keep one dictionary entry per expansion term.
    """
    atoms = np.atleast_2d(np.asarray(atoms, dtype=np.float64))
    gammas = np.asarray(gammas, dtype=np.float64)
    if gammas.shape != (atoms.shape[0],):
        raise ValueError(f"need one coefficient per atom, got {gammas.shape} for {atoms.shape[0]} atoms")
    theta = params.w_l * (gammas @ atoms)
    return FilterState(theta, atoms.copy(), gammas.copy())


def _check_dims(u: np.ndarray, v: np.ndarray):
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")


def kernel_linear(u, v) -> float:
    """Linear kernel ``u . v``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_dims(u, v)
    return float(u @ v)


def kernel_gaussian(u, v, sigma_sq: float) -> float:
    """Gaussian kernel ``exp(-||u - v||^2 / (2 sigma_sq))``; value in (0, 1]."""
    if not sigma_sq > 0:
        raise ValueError(f"sigma_sq must be > 0, got {sigma_sq}")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_dims(u, v)
    d = u - v
    return float(np.exp(-(d @ d) / (2.0 * sigma_sq)))


def kernel_sum(u, v, params: KernelParams) -> float:
    """Sum-space kernel ``w_l * kappa_L + w_g * kappa_G``."""
    out = 0.0
    if params.w_l != 0.0:
        out += params.w_l * kernel_linear(u, v)
    if params.w_g != 0.0:
        out += params.w_g * kernel_gaussian(u, v, params.sigma_sq)
    else:
        # Still validate shapes when the Gaussian branch is skipped.
        _check_dims(np.asarray(u), np.asarray(v))
    return out


def self_kernel(u, params: KernelParams) -> float:
    """Fast path for ``kappa(u, u) = w_l * ||u||^2 + w_g``."""
    u = np.asarray(u, dtype=np.float64)
    return float(params.w_l * (u @ u) + params.w_g)


def _gaussian_cross(f_atoms: np.ndarray, u: np.ndarray, sigma_sq: float) -> np.ndarray:
    """kappa_G between every dictionary atom and one input vector."""
    d = f_atoms - u
    d2 = np.einsum("ij,ij->i", d, d)
    return np.exp(-d2 / (2.0 * sigma_sq))


def evaluate(f: FilterState, u, params: KernelParams) -> float:
    """Evaluate the filter: ``theta . u + w_g * sum_i coeffs[i] kappa_G(atoms[i], u)``.

    This is the 64-bit reference path; the batch engine provides the
    high-throughput equivalents.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (f.dim,):
        raise ValueError(f"input has shape {u.shape}, filter dimension is {f.dim}")
    out = float(f.theta @ u)
    if params.w_g != 0.0 and f.n_atoms:
        out += params.w_g * float(f.coeffs @ _gaussian_cross(f.atoms, u, params.sigma_sq))
    return out


def _component_inner(theta_f, theta_g, w: float, label: str) -> float:
    """Linear-component term ``theta_f . theta_g / w`` with zero-weight handling."""
    if w > 0:
        return float(theta_f @ theta_g) / w
    if np.any(theta_f != 0) or np.any(theta_g != 0):
        raise ValueError(f"{label} weight is zero but a filter has a nonzero {label} component")
    return 0.0


def inner_product(f: FilterState, g: FilterState, params: KernelParams) -> float:
    """Sum-space inner product of two collapsed filters.

    Closed form: ``theta_f . theta_g / w_l + w_g * sum_ij c_f[i] c_g[j]
    kappa_G(a_f[i], a_g[j])``.  A weight of zero is only accepted when both
    filters have a vanishing corresponding component (the sum-space inner
    product requires strictly positive weights otherwise).
    """
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")
    out = _component_inner(f.theta, g.theta, params.w_l, "linear")
    f_gauss = bool(f.n_atoms) and bool(np.any(f.coeffs != 0))
    g_gauss = bool(g.n_atoms) and bool(np.any(g.coeffs != 0))
    if params.w_g > 0:
        if f_gauss and g_gauss:
            # Gram block between the two dictionaries, kept vectorized: the
            # Fejer-monotonicity checks call this once per training step.
            d2 = (
                np.einsum("ij,ij->i", f.atoms, f.atoms)[:, None]
                + np.einsum("ij,ij->i", g.atoms, g.atoms)[None, :]
                - 2.0 * (f.atoms @ g.atoms.T)
            )
            gram = np.exp(-np.maximum(d2, 0.0) / (2.0 * params.sigma_sq))
            out += params.w_g * float(f.coeffs @ gram @ g.coeffs)
    elif f_gauss or g_gauss:
        raise ValueError("Gaussian weight is zero but a filter has a nonzero Gaussian component")
    return out


def norm_sq(f: FilterState, params: KernelParams) -> float:
    """Squared H-norm ``<f, f>_H``; clamps tiny negative rounding residue to 0."""
    v = inner_product(f, f, params)
    if -1e-12 < v < 0.0:
        return 0.0
    return v
