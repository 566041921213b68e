"""Decoders for group-sampled bandlimited signals.

The full-dimension decoder solves the reweighted regularised least squares
through its normal equations with conjugate gradient, all actions
matrix-free. For signals nearly piecewise constant over the groups, the
reduced operator (averaging composed with the smoothness polynomial of the
Laplacian) shrinks the unknown from n to N; the reduced solution is lifted
back by the averaging adjoint. The vanishing-regularisation limits are
solved explicitly as equality-constrained quadratic programs with an
accelerated projected gradient method.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .graphs import Laplacian
from .groups import GroupPartition, OverlapError, SampleOperators, group_average, group_lift
from .spectral import SpectralBasis


class SolverBreakdownError(RuntimeError):
    """A solver produced non-finite values."""


class InfeasibleConstraintsError(ValueError):
    """Duplicate selections carry contradictory measured values."""


@dataclass(frozen=True)
class SmoothnessFilter:
    """Nonnegative nondecreasing polynomial used as the smoothness penalty.

    Coefficients are in the monomial basis, lowest degree first.
    """

    coeffs: np.ndarray

    @classmethod
    def identity(cls) -> "SmoothnessFilter":
        return cls(coeffs=np.array([0.0, 1.0]))

    @property
    def degree(self) -> int:
        return int(np.asarray(self.coeffs).size - 1)

    def evaluate(self, t) -> np.ndarray:
        return np.polyval(np.asarray(self.coeffs, dtype=float)[::-1], np.asarray(t, dtype=float))

    def apply(self, lap: Laplacian, x: np.ndarray) -> np.ndarray:
        """Horner evaluation of the polynomial of the Laplacian on signals."""
        coeffs = np.asarray(self.coeffs, dtype=float)
        out = coeffs[-1] * x
        for c in coeffs[-2::-1]:
            out = lap.apply(out) + c * x
        return out

    def validate(self, lambda_max: float, grid: int = 1000):
        """Check nonnegativity and monotonicity on a grid of [0, lambda_max]."""
        t = np.linspace(0.0, lambda_max, grid)
        values = self.evaluate(t)
        if values.min() < -1e-12:
            raise ValueError("smoothness polynomial takes negative values on the domain")
        if (np.diff(values) < -1e-12).any():
            raise ValueError("smoothness polynomial is not nondecreasing on the domain")


@dataclass
class DecodeResult:
    """Solver output: full-length estimate plus convergence metadata.

    ``reduced`` holds the N-dimensional solution when a reduced decoder ran,
    in which case ``estimate`` is its lift. ``hit_cap`` flags an iteration
    cap; ``residual`` is then the last relative residual reached.
    """

    estimate: np.ndarray
    iterations: int
    residual: float
    gamma: float | None
    reduced: np.ndarray | None = None
    hit_cap: bool = False
    wall_ms: float = 0.0


def _conjugate_gradient(apply_a, b, tol, max_iter, x0=None):
    """CG on a symmetric PSD system; returns (x, iterations, rel_residual, hit_cap)."""
    b_norm = np.linalg.norm(b)
    if b_norm == 0:
        return np.zeros_like(b), 0, 0.0, False
    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = b - apply_a(x)
    p = r.copy()
    rs = float(r @ r)
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        denom = float(p @ ap)
        if not np.isfinite(denom):
            raise SolverBreakdownError("conjugate gradient produced non-finite values")
        if denom <= 0:
            # numerically semi-definite direction; the current iterate is as
            # good as the normal equations define
            return x, it - 1, np.sqrt(rs) / b_norm, False
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        if not np.isfinite(rs_new):
            raise SolverBreakdownError("conjugate gradient produced non-finite values")
        if np.sqrt(rs_new) <= tol * b_norm:
            return x, it, np.sqrt(rs_new) / b_norm, False
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, max_iter, np.sqrt(rs) / b_norm, True


def full_decode(
    lap: Laplacian,
    g: SmoothnessFilter,
    ops: SampleOperators,
    y: np.ndarray,
    gamma: float,
    tol: float = 1e-8,
    max_iter: int = 2000,
    x0: np.ndarray | None = None,
) -> DecodeResult:
    """Minimise the reweighted data misfit plus ``gamma`` times the smoothness
    energy, via conjugate gradient on the normal equations."""
    if gamma <= 0:
        raise ValueError("gamma must be positive; use constrained_decode for the limit")
    y = np.asarray(y, dtype=float)
    if y.shape != (ops.m,):
        raise ValueError(f"measurement length {y.shape} != m={ops.m}")

    def apply_a(z):
        return ops.apply_mt_p2_m(z) + gamma * g.apply(lap, z)

    b = ops.apply_mt_p2(y)
    start = time.perf_counter()
    x, iters, residual, capped = _conjugate_gradient(apply_a, b, tol, max_iter, x0=x0)
    wall = (time.perf_counter() - start) * 1e3
    return DecodeResult(
        estimate=x, iterations=iters, residual=residual, gamma=gamma, hit_cap=capped, wall_ms=wall
    )


class ReducedLaplacian:
    """The N-by-N operator: average, smoothness polynomial, lift.

    Materialised as a dense symmetric PSD matrix when N is small enough;
    otherwise applied matrix-free by lifting to the signal domain, filtering,
    and averaging back.
    """

    def __init__(self, lap: Laplacian, part: GroupPartition, g: SmoothnessFilter,
                 materialize_threshold: int = 10_000, chunk: int = 64):
        if not part.is_strict:
            raise OverlapError("the reduced operator requires non-overlapping groups")
        self.lap = lap
        self.part = part
        self.g = g
        self.N = part.N
        self.matrix = None
        if part.N <= materialize_threshold:
            cols = np.zeros((part.N, part.N))
            basis = np.eye(part.N)
            for start in range(0, part.N, chunk):
                block = basis[:, start : start + chunk]
                lifted = group_lift(block, part)
                cols[:, start : start + chunk] = group_average(self.g.apply(lap, lifted), part)
            self.matrix = 0.5 * (cols + cols.T)

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ z
        return group_average(self.g.apply(self.lap, group_lift(z, self.part)), self.part)


def build_reduced_laplacian(
    lap: Laplacian, part: GroupPartition, g: SmoothnessFilter | None = None, **kwargs
) -> ReducedLaplacian:
    return ReducedLaplacian(lap, part, g or SmoothnessFilter.identity(), **kwargs)


def fast_decode(
    reduced: ReducedLaplacian,
    ops: SampleOperators,
    y_tilde: np.ndarray,
    gamma: float,
    tol: float = 1e-8,
    max_iter: int = 2000,
    z0: np.ndarray | None = None,
) -> DecodeResult:
    """Reduced-dimension decoder; the estimate is the lifted N-vector solution."""
    if gamma <= 0:
        raise ValueError("gamma must be positive; use constrained_decode for the limit")
    y_tilde = np.asarray(y_tilde, dtype=float)
    if y_tilde.shape != (ops.s,):
        raise ValueError(f"reduced measurement length {y_tilde.shape} != s={ops.s}")
    diag = ops.reduced_diagonal()

    def apply_a(z):
        return diag * z + gamma * reduced.apply(z)

    b = ops.apply_m_tilde_t(ops.apply_p_tilde(ops.apply_p_tilde(y_tilde)))
    start = time.perf_counter()
    z, iters, residual, capped = _conjugate_gradient(apply_a, b, tol, max_iter, x0=z0)
    wall = (time.perf_counter() - start) * 1e3
    return DecodeResult(
        estimate=group_lift(z, ops.part),
        iterations=iters,
        residual=residual,
        gamma=gamma,
        reduced=z,
        hit_cap=capped,
        wall_ms=wall,
    )


def dedupe_constraints(indices, values, tol: float = 1e-9):
    """Collapse duplicate selections, averaging their measured values.

    Raises when duplicates disagree by more than ``tol`` (the equality
    constraint would be infeasible).
    """
    indices = np.asarray(indices, dtype=int)
    values = np.asarray(values, dtype=float)
    unique, inverse = np.unique(indices, return_inverse=True)
    sums = np.bincount(inverse, weights=values)
    counts = np.bincount(inverse)
    means = sums / counts
    spread = np.zeros(unique.size)
    np.maximum.at(spread, inverse, np.abs(values - means[inverse]))
    if (spread > tol).any():
        bad = unique[int(np.argmax(spread))]
        raise InfeasibleConstraintsError(
            f"duplicate selections of index {int(bad)} disagree beyond {tol}"
        )
    return unique, means


def _power_step_size(apply_q, dim, seed=0, iters=60, tol=1e-4):
    rng = np.random.default_rng((seed, 0x5E))
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    value = 0.0
    for _ in range(iters):
        w = apply_q(v)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 1.0
        new_value = float(v @ w)
        v = w / nrm
        if abs(new_value - value) <= tol * max(abs(new_value), 1e-30):
            value = new_value
            break
        value = new_value
    return 1.0 / max(value * 1.01, 1e-12)


def constrained_decode(
    apply_q,
    dim: int,
    indices,
    values,
    tol: float = 1e-8,
    max_iter: int = 5000,
    x0: np.ndarray | None = None,
    dedupe_tol: float = 1e-9,
    seed: int = 0,
    trace: list | None = None,
) -> DecodeResult:
    """Minimise ``z' Q z`` subject to fixed values on selected coordinates.

    Accelerated projected gradient: gradient steps of length one over the
    power-estimated largest eigenvalue of Q, projection resets the selected
    coordinates, momentum restarts whenever the objective would increase, so
    the accepted objective sequence is nonincreasing. Duplicate selections
    are averaged first.
    """
    idx, vals = dedupe_constraints(indices, values, tol=dedupe_tol)
    free = np.ones(dim, dtype=bool)
    free[idx] = False

    def project(z):
        out = z.copy()
        out[idx] = vals
        return out

    step = _power_step_size(apply_q, dim, seed=seed)
    x = project(np.zeros(dim) if x0 is None else np.asarray(x0, dtype=float))
    if not free.any():
        return DecodeResult(estimate=x, iterations=0, residual=0.0, gamma=None)

    def objective(z):
        return float(z @ apply_q(z))

    start = time.perf_counter()
    y = x.copy()
    f_x = objective(x)
    if trace is not None:
        trace.append(f_x)
    t_mom = 1.0
    grad0_norm = None
    iterations = 0
    residual = np.inf
    capped = True
    for it in range(1, max_iter + 1):
        iterations = it
        grad = 2.0 * apply_q(y)
        if not np.isfinite(grad).all():
            raise SolverBreakdownError("projected gradient produced non-finite values")
        candidate = project(y - step * grad)
        f_candidate = objective(candidate)
        if f_candidate > f_x:
            # momentum overshoot: restart from the last accepted iterate,
            # backtracking if the step estimate was itself too long
            t_mom = 1.0
            y = x.copy()
            grad = 2.0 * apply_q(y)
            candidate = project(y - step * grad)
            f_candidate = objective(candidate)
            while f_candidate > f_x and step > 1e-18:
                step *= 0.5
                candidate = project(y - step * grad)
                f_candidate = objective(candidate)
        grad_free = np.linalg.norm(grad[free])
        if grad0_norm is None:
            grad0_norm = max(grad_free, 1e-30)
        residual = grad_free / grad0_norm
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom**2))
        y = candidate + ((t_mom - 1.0) / t_next) * (candidate - x)
        y = project(y)
        moved = np.linalg.norm(candidate - x)
        x, f_x, t_mom = candidate, f_candidate, t_next
        if trace is not None:
            trace.append(f_x)
        if residual <= tol or moved <= 1e-15 * max(np.linalg.norm(x), 1.0):
            capped = False
            break
    wall = (time.perf_counter() - start) * 1e3
    return DecodeResult(
        estimate=x,
        iterations=iterations,
        residual=residual,
        gamma=None,
        hit_cap=capped,
        wall_ms=wall,
    )


def constrained_fast_decode(
    reduced: ReducedLaplacian, draw_omega, y_tilde, part: GroupPartition, **kwargs
) -> DecodeResult:
    """Vanishing-regularisation reduced decoder; estimate is the lifted solution."""
    result = constrained_decode(reduced.apply, reduced.N, draw_omega, y_tilde, **kwargs)
    result.reduced = result.estimate
    result.estimate = group_lift(result.reduced, part)
    return result


def constrained_full_decode(
    lap: Laplacian, g: SmoothnessFilter, indices, values, **kwargs
) -> DecodeResult:
    """Vanishing-regularisation full-dimension decoder on pinned node values."""
    return constrained_decode(lambda z: g.apply(lap, z), lap.n, indices, values, **kwargs)


def split_projections(xhat: np.ndarray, basis: SpectralBasis):
    """Split a signal into its in-band projection and the residual."""
    coords = basis.vectors.T @ xhat
    alpha = basis.vectors @ coords
    return alpha, xhat - alpha


@dataclass(frozen=True)
class BoundInputs:
    """Quantities entering the reduced-decoder error bounds."""

    s: int
    delta: float
    gamma: float
    g_lambda_k: float
    g_lambda_k1: float
    g_lambda_n: float
    m_max: float
    epsilon: float
    x_norm: float
    weighted_noise_norm: float


def decode_error_bounds(p: BoundInputs) -> tuple[float, float]:
    """Worst-case bounds on the in-band error and the out-of-band energy of
    the lifted reduced-decoder solution."""
    if not 0 < p.delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if p.g_lambda_k1 <= 0:
        raise ValueError("the smoothness polynomial must be positive above the band")
    root_gk = np.sqrt(p.gamma * p.g_lambda_k)
    root_gn = np.sqrt(p.gamma * p.g_lambda_n)
    ratio_k = np.sqrt(p.g_lambda_k / p.g_lambda_k1)
    ratio_n = np.sqrt(p.g_lambda_n / p.g_lambda_k1)
    noise = p.weighted_noise_norm
    bound_alpha = (
        (2.0 + p.m_max / np.sqrt(p.gamma * p.g_lambda_k1)) * noise
        + (p.m_max * ratio_k + root_gk) * p.x_norm
        + p.epsilon * (2.0 * p.m_max + p.m_max * ratio_n + root_gn) * p.x_norm
    ) / np.sqrt(p.s * (1.0 - p.delta))
    bound_beta = (
        noise / np.sqrt(p.gamma * p.g_lambda_k1)
        + ratio_k * p.x_norm
        + p.epsilon * ratio_n * p.x_norm
    )
    return float(bound_alpha), float(bound_beta)


def save_decode_result(result: DecodeResult, path):
    """Write the estimate as CSV plus a metadata sidecar next to it."""
    path = str(path)
    with open(path, "w") as fh:
        fh.write("value\n")
        for v in result.estimate:
            fh.write(f"{float(v)!r}\n")
    with open(path + ".meta.txt", "w") as fh:
        fh.write(f"iterations={result.iterations}\n")
        fh.write(f"residual={float(result.residual)!r}\n")
        fh.write(f"gamma={result.gamma!r}\n")
        fh.write(f"hit_cap={int(result.hit_cap)}\n")
        fh.write(f"wall_ms={float(result.wall_ms)!r}\n")
