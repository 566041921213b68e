"""Exact small-scale spectral oracle and Chebyshev polynomial filtering.

The dense eigendecomposition is the ground-truth oracle on desk-scale
graphs. At scale, spectral projectors are replaced by Chebyshev expansions
of the ideal low-pass response (optionally Jackson-damped to suppress
ripple), applied through the sparse Laplacian only. Randomised trace
estimation on filtered noise counts eigenvalues below a threshold, and a
bisection on that count locates the band edge without any eigenvectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .graphs import Laplacian


@dataclass(frozen=True)
class SpectralBasis:
    """First k eigenpairs of a Laplacian, ascending, orthonormal columns.

    ``lambda_next`` is the (k+1)-th eigenvalue and ``lambda_top`` the largest
    one, kept for reconstruction-bound evaluation; either may be None when k
    equals the graph size.
    """

    lambdas: np.ndarray
    vectors: np.ndarray
    lambda_next: float | None = None
    lambda_top: float | None = None

    @property
    def k(self) -> int:
        return int(self.lambdas.size)

    @property
    def n(self) -> int:
        return int(self.vectors.shape[0])


def dense_spectrum(lap: Laplacian, k: int, guard: int = 5000) -> SpectralBasis:
    """Exact first-k eigenpairs by dense symmetric eigendecomposition.

    Eigenvector signs are fixed so the first non-negligible coordinate of
    each column is positive. Raises when the band edge is ambiguous
    (equal k-th and (k+1)-th eigenvalues).
    """
    n = lap.n
    if n > guard:
        raise ValueError(f"dense spectrum guarded to n <= {guard}, got n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"band size k={k} outside [1, {n}]")
    values, vectors = scipy.linalg.eigh(lap.dense(guard=guard))
    values = np.maximum(values, 0.0) if values[0] > -1e-9 else values
    u_k = vectors[:, :k].copy()
    for col in range(k):
        v = u_k[:, col]
        idx = np.flatnonzero(np.abs(v) > 1e-8 * max(1.0, np.abs(v).max()))
        if idx.size and v[idx[0]] < 0:
            u_k[:, col] = -v
    lambda_next = float(values[k]) if k < n else None
    if lambda_next is not None and lambda_next - values[k - 1] <= 1e-12 * max(1.0, values[-1]):
        raise ValueError(
            f"ambiguous bandlimit: eigenvalues {k} and {k + 1} coincide ({values[k - 1]:.6g})"
        )
    return SpectralBasis(
        lambdas=values[:k].copy(),
        vectors=u_k,
        lambda_next=lambda_next,
        lambda_top=float(values[-1]),
    )


def estimate_lambda_max(lap: Laplacian, iters: int = 100, tol: float = 1e-7, seed: int = 0) -> float:
    """Upper estimate of the largest eigenvalue by power iteration.

    The converged Rayleigh quotient is inflated by 1% so the Chebyshev
    domain always covers the spectrum.
    """
    rng = np.random.default_rng((seed, 0x1A))
    v = rng.standard_normal(lap.n)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        return 0.0
    v /= nrm
    value = 0.0
    for _ in range(iters):
        w = lap.apply(v)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        new_value = float(v @ w)
        v = w / nrm
        if abs(new_value - value) <= tol * max(abs(new_value), 1e-30):
            value = new_value
            break
        value = new_value
    return 1.01 * max(value, 0.0)


def jackson_coefficients(order: int) -> np.ndarray:
    """Damping factors of the Jackson kernel for a degree-``order`` expansion."""
    alpha = math.pi / (order + 2)
    j = np.arange(order + 1)
    return (
        (order + 2 - j) * math.sin(alpha) * np.cos(j * alpha)
        + math.cos(alpha) * np.sin(j * alpha)
    ) / ((order + 2) * math.sin(alpha))


@dataclass(frozen=True)
class PolynomialFilter:
    """Chebyshev-basis polynomial on [0, lambda_max].

    ``coeffs[j]`` multiplies the j-th Chebyshev polynomial of the rescaled
    variable; evaluation and operator application share the same three-term
    recurrence.
    """

    coeffs: np.ndarray
    lambda_max: float
    damped: bool = False
    target: str = ""

    @property
    def order(self) -> int:
        return int(self.coeffs.size - 1)

    def evaluate(self, t) -> np.ndarray:
        """Value of the polynomial at scalar(s) ``t``."""
        t = np.asarray(t, dtype=float)
        y = 2.0 * t / self.lambda_max - 1.0 if self.lambda_max > 0 else np.zeros_like(t)
        out = np.full_like(y, self.coeffs[0], dtype=float)
        if self.coeffs.size == 1:
            return out
        t_prev = np.ones_like(y)
        t_cur = y.copy()
        out = out + self.coeffs[1] * t_cur
        for c in self.coeffs[2:]:
            t_prev, t_cur = t_cur, 2.0 * y * t_cur - t_prev
            out = out + c * t_cur
        return out

    def to_text(self) -> str:
        head = f"lambda_max={self.lambda_max!r} damped={int(self.damped)} target={self.target}"
        return head + "\n" + " ".join(repr(float(c)) for c in self.coeffs) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolynomialFilter":
        head, coeffs = text.strip().split("\n")
        fields = dict(item.split("=", 1) for item in head.split(" ", 2))
        return cls(
            coeffs=np.array([float(tok) for tok in coeffs.split()]),
            lambda_max=float(fields["lambda_max"]),
            damped=bool(int(fields["damped"])),
            target=fields.get("target", ""),
        )


def lowpass_filter(
    lambda_c: float, lambda_max: float, order: int, jackson: bool = True
) -> PolynomialFilter:
    """Chebyshev expansion of the ideal low-pass response with the given cutoff.

    Closed-form coefficients of the step indicator on [0, lambda_max],
    multiplied by the Jackson damping factors when requested.
    """
    if not 0 < lambda_c < lambda_max:
        raise ValueError(f"cutoff {lambda_c} outside (0, {lambda_max})")
    if order < 1:
        raise ValueError("filter order must be >= 1")
    theta_c = math.acos(2.0 * lambda_c / lambda_max - 1.0)
    coeffs = np.empty(order + 1)
    coeffs[0] = (math.pi - theta_c) / math.pi
    j = np.arange(1, order + 1)
    coeffs[1:] = -2.0 * np.sin(j * theta_c) / (math.pi * j)
    if jackson:
        coeffs = coeffs * jackson_coefficients(order)
    return PolynomialFilter(
        coeffs=coeffs,
        lambda_max=lambda_max,
        damped=jackson,
        target=f"lowpass(cutoff={lambda_c:.6g})",
    )


def apply_filter(lap: Laplacian, filt: PolynomialFilter, x: np.ndarray) -> np.ndarray:
    """Apply the filter polynomial of the Laplacian to one or more signals.

    Uses the Chebyshev three-term recurrence: ``order`` sparse matrix-vector
    products per signal, nothing dense.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != lap.n:
        raise ValueError(f"signal length {x.shape[0]} != n={lap.n}")
    lam = filt.lambda_max
    if lam <= 0:
        return filt.coeffs.sum() * x

    def shifted(v):
        return (2.0 / lam) * lap.apply(v) - v

    out = filt.coeffs[0] * x
    if filt.coeffs.size == 1:
        return out
    t_prev = x
    t_cur = shifted(x)
    out = out + filt.coeffs[1] * t_cur
    for c in filt.coeffs[2:]:
        t_prev, t_cur = t_cur, 2.0 * shifted(t_cur) - t_prev
        out = out + c * t_cur
    return out


def default_probe_count(n: int) -> int:
    return 2 * max(1, math.ceil(math.log2(max(n, 2))))


def estimate_eigcount(
    lap: Laplacian,
    lambda_bar: float,
    order: int = 50,
    R: int | None = None,
    seed: int = 0,
    lambda_max: float | None = None,
    jackson: bool = True,
) -> float:
    """Randomised estimate of how many eigenvalues lie at or below ``lambda_bar``.

    Filters R standard-normal probes with the low-pass expansion and
    averages their squared norms; the expectation equals the exact count up
    to the polynomial approximation error.
    """
    if R is None:
        R = default_probe_count(lap.n)
    if R < 1:
        raise ValueError("need at least one probe signal")
    if lambda_bar <= 0:
        return 0.0
    if lambda_max is None:
        lambda_max = estimate_lambda_max(lap, seed=seed)
    domain = max(lambda_max, lambda_bar * (1.0 + 1e-9)) or 1.0
    if lambda_bar >= domain:
        domain = lambda_bar * (1.0 + 1e-9)
    filt = lowpass_filter(lambda_bar, domain, order, jackson=jackson)
    rng = np.random.default_rng((seed, 0x2B))
    probes = rng.standard_normal((lap.n, R))
    filtered = apply_filter(lap, filt, probes)
    return float((filtered**2).sum() / R)


def estimate_lambda_k(
    lap: Laplacian,
    k: int,
    order: int = 50,
    R: int | None = None,
    max_bisect: int = 30,
    seed: int = 0,
) -> float:
    """Estimate the k-th eigenvalue by bisection on the randomised count.

    Shrinks the bracket until the count at the midpoint is within 0.5 of k
    or the iteration cap is hit, then returns the midpoint. Deterministic
    given the seed: each count call derives its own stream.
    """
    if not 1 <= k <= lap.n:
        raise ValueError(f"k={k} outside [1, {lap.n}]")
    lambda_max = estimate_lambda_max(lap, seed=seed)
    if lambda_max == 0.0:
        return 0.0
    lo, hi = 0.0, lambda_max
    for it in range(max_bisect):
        mid = 0.5 * (lo + hi)
        count = estimate_eigcount(
            lap, mid, order=order, R=R, seed=seed + 7919 * (it + 1), lambda_max=lambda_max
        )
        if abs(count - k) <= 0.5:
            return mid
        if count > k:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
