"""Group coherences, optimal sampling distributions, and their scalable estimates.

The per-group coherence measures how much energy a bandlimited signal can
concentrate on that group: the squared spectral norm of the restricted band
basis, or its squared Frobenius norm for the cheaper relaxation. Normalising
a coherence profile gives the distribution that minimises the cumulative
coherence, which in turn drives the number of groups to sample. Both
profiles can be estimated at scale through polynomial low-pass filtering,
without ever forming the eigenvector basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import Laplacian
from .groups import GroupPartition, SampleDraw, extend, restrict
from .spectral import (
    PolynomialFilter,
    SpectralBasis,
    apply_filter,
    default_probe_count,
    estimate_lambda_max,
    lowpass_filter,
)

SPECTRAL = "spectral"
FROBENIUS = "frobenius"


@dataclass(frozen=True)
class CoherenceProfile:
    """Per-group squared coherence values of one flavor.

    ``exact`` marks profiles computed from an eigenvector oracle rather than
    estimated by filtering; ``converged`` records per-group power-iteration
    convergence for estimated spectral profiles.
    """

    values: np.ndarray
    flavor: str
    k: int
    exact: bool
    converged: np.ndarray | None = None

    @property
    def N(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class SamplingDistribution:
    """Strictly positive probabilities over the N groups."""

    probs: np.ndarray
    provenance: str = "custom"

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if (probs <= 0).any():
            raise ValueError("all group probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @property
    def N(self) -> int:
        return int(self.probs.size)


def uniform_distribution(n_groups: int) -> SamplingDistribution:
    return SamplingDistribution(np.full(n_groups, 1.0 / n_groups), provenance="uniform")


def local_coherence_exact(
    basis: SpectralBasis, part: GroupPartition, flavor: str = SPECTRAL
) -> CoherenceProfile:
    """Exact per-group coherence from an eigenvector oracle.

    Spectral flavor: largest squared singular value of the band basis
    restricted to the group. Frobenius flavor: its squared Frobenius norm.
    Overlapping groups use the multiplicity-scaled restriction.
    """
    if flavor not in (SPECTRAL, FROBENIUS):
        raise ValueError(f"unknown coherence flavor {flavor!r}")
    u_k = basis.vectors
    values = np.empty(part.N)
    for g in range(part.N):
        sub = u_k[part.groups[g]]
        if part._scales is not None:
            sub = sub * part._scales[g][:, None]
        if flavor == FROBENIUS:
            values[g] = float((sub**2).sum())
        else:
            gram = sub.T @ sub
            values[g] = float(np.linalg.eigvalsh(gram)[-1])
    return CoherenceProfile(values=values, flavor=flavor, k=basis.k, exact=True)


def optimal_distribution(profile: CoherenceProfile) -> SamplingDistribution:
    """Normalise a coherence profile into the coherence-minimising distribution."""
    total = float(profile.values.sum())
    if total <= 0:
        raise ValueError("degenerate coherence profile: total mass is zero")
    provenance = ("optimal-" if profile.exact else "estimated-") + profile.flavor
    if profile.converged is not None and not profile.converged.all():
        provenance += "+unconverged"
    return SamplingDistribution(profile.values / total, provenance=provenance)


def coherence(dist: SamplingDistribution, profile: CoherenceProfile) -> float:
    """Squared cumulative coherence: worst per-group value over probability."""
    if dist.N != profile.N:
        raise ValueError(f"distribution over {dist.N} groups, profile over {profile.N}")
    return float((profile.values / dist.probs).max())


def sample_bound(delta: float, xi: float, nu_sq: float, k: int) -> int:
    """Smallest group count certifying the stable-embedding bound."""
    if not 0 < delta < 1 or not 0 < xi < 1:
        raise ValueError("delta and xi must lie in (0, 1)")
    if nu_sq <= 0 or k < 1:
        raise ValueError("need nu_sq > 0 and k >= 1")
    return int(math.ceil(3.0 / delta**2 * nu_sq * math.log(2.0 * k / xi)))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance between two distributions."""
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def _band_filter(
    lap: Laplacian,
    k: int,
    order: int,
    lambda_k: float | None,
    seed: int,
) -> tuple[PolynomialFilter, float]:
    from .spectral import estimate_lambda_k

    lambda_max = estimate_lambda_max(lap, seed=seed)
    if lambda_k is None:
        lambda_k = estimate_lambda_k(lap, k, order=order, seed=seed)
    cutoff = min(max(lambda_k, 1e-12 * max(lambda_max, 1.0)), lambda_max * (1 - 1e-9))
    return lowpass_filter(cutoff, lambda_max, order, jackson=True), lambda_k


def estimate_spectral_profile(
    lap: Laplacian,
    part: GroupPartition,
    k: int,
    order: int = 50,
    power_iters: int = 50,
    tol: float = 1e-6,
    lambda_k: float | None = None,
    seed: int = 0,
) -> CoherenceProfile:
    """Estimate the spectral coherence profile by per-group power iteration.

    For each group the dominant eigenvalue of (restrict . filter . extend)
    is tracked through zero-extension, polynomial low-pass filtering, and
    restriction; ripple can make the Rayleigh quotient slightly negative, so
    estimates are floored at a tiny positive value to keep all groups
    selectable.
    """
    filt, _ = _band_filter(lap, k, order, lambda_k, seed)
    values = np.empty(part.N)
    converged = np.zeros(part.N, dtype=bool)
    for g in range(part.N):
        rng = np.random.default_rng((seed, 0x3C, g))
        v = rng.standard_normal(part.sizes[g])
        v /= np.linalg.norm(v)
        estimate = 0.0
        for _ in range(power_iters):
            w = restrict(apply_filter(lap, filt, extend(v, part, g)), part, g)
            nrm = np.linalg.norm(w)
            if nrm == 0:
                estimate = 0.0
                converged[g] = True
                break
            new_estimate = float(v @ w)
            v = w / nrm
            if abs(new_estimate - estimate) <= tol * max(abs(new_estimate), 1e-30):
                estimate = new_estimate
                converged[g] = True
                break
            estimate = new_estimate
        values[g] = max(estimate, 1e-12)
    return CoherenceProfile(
        values=values, flavor=SPECTRAL, k=k, exact=False, converged=converged
    )


def estimate_frobenius_profile(
    lap: Laplacian,
    part: GroupPartition,
    k: int,
    order: int = 50,
    R: int | None = None,
    lambda_k: float | None = None,
    seed: int = 0,
) -> CoherenceProfile:
    """Estimate the Frobenius coherence profile by filtering random probes.

    The mean squared value of R filtered standard-normal signals at node i
    estimates the band energy of the unit vector there; group values sum the
    per-node energies (multiplicity-weighted when groups overlap). Exactly R
    filterings regardless of the number of groups.
    """
    if R is None:
        R = default_probe_count(lap.n)
    filt, _ = _band_filter(lap, k, order, lambda_k, seed)
    rng = np.random.default_rng((seed, 0x4D))
    probes = rng.standard_normal((lap.n, R))
    filtered = apply_filter(lap, filt, probes)
    per_node = (filtered**2).sum(axis=1) / R
    if not part.is_strict:
        per_node = per_node / part.beta
    values = np.array([max(per_node[g].sum(), 1e-12) for g in part.groups])
    return CoherenceProfile(values=values, flavor=FROBENIUS, k=k, exact=False)


def estimate_spectral_distribution(lap, part, k, **kwargs) -> SamplingDistribution:
    return optimal_distribution(estimate_spectral_profile(lap, part, k, **kwargs))


def estimate_frobenius_distribution(lap, part, k, **kwargs) -> SamplingDistribution:
    return optimal_distribution(estimate_frobenius_profile(lap, part, k, **kwargs))


def draw_groups(
    dist: SamplingDistribution, s: int, seed, part: GroupPartition
) -> SampleDraw:
    """Draw s group indices i.i.d. with replacement; duplicates keep draw order."""
    if s < 1:
        raise ValueError("need at least one draw")
    if dist.N != part.N:
        raise ValueError(f"distribution over {dist.N} groups, partition has {part.N}")
    rng = np.random.default_rng(seed)
    omega = rng.choice(part.N, size=s, p=dist.probs)
    return SampleDraw(omega=omega, probs=dist.probs, m=int(part.sizes[omega].sum()))


# ---------------------------------------------------------------------------
# CSV serialisation (group ids are 1-based on disk)

def save_distribution_csv(dist: SamplingDistribution, path, header: str | None = None):
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write(f"# provenance={dist.provenance}\n")
        fh.write("group_id,probability\n")
        for g, p in enumerate(dist.probs, start=1):
            fh.write(f"{g},{float(p)!r}\n")


def load_distribution_csv(path) -> SamplingDistribution:
    provenance = "custom"
    probs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# provenance="):
                provenance = line.split("=", 1)[1]
            if not line or line.startswith("#") or line.startswith("group_id"):
                continue
            _, p = line.split(",")
            probs.append(float(p))
    return SamplingDistribution(np.array(probs), provenance=provenance)


def save_profile_csv(profile: CoherenceProfile, path, header: str | None = None):
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write(f"# k={profile.k} exact={int(profile.exact)}\n")
        fh.write("group_id,value,flavor\n")
        for g, v in enumerate(profile.values, start=1):
            fh.write(f"{g},{float(v)!r},{profile.flavor}\n")
