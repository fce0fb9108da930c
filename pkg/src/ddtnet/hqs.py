"""Moment-matched null difference networks via random Gram matrices.

A null network is built as C = L L^T with L an n x m matrix of iid
N(mu, sigma^2) entries. Choosing

    mu     = sqrt(ebar / m)
    sigma2 = -mu^2 + sqrt(mu^4 + vbar / m)

makes every off-diagonal entry match the observed logit-scale mean ebar and
variance vbar exactly:

    E[c_ij]   = m mu^2                          = ebar
    Var[c_ij] = m (sigma2 + mu^2)^2 - m mu^4    = vbar

Each off-diagonal entry is distributed as (sigma2/2) (T - Q) with
T ~ noncentral chi^2_m(lambda), lambda = 2 m mu^2 / sigma2, Q ~ chi^2_m,
T independent of Q. mixture_sample draws that law directly, which is what
the parametric threshold uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DdtError,
    DifferenceNetwork,
    ValidationError,
    inv_logit,
    substream,
    triu_index_pairs,
)


class NonpositiveMeanError(DdtError):
    """Observed logit-scale mean is <= 0, so mu = sqrt(ebar/m) is undefined."""


class ZeroVarianceError(DdtError):
    """Observed logit-scale variance is zero (constant difference network)."""


@dataclass(frozen=True)
class MomentSummary:
    """First/second moments of the observed network and the matched
    Gaussian parameters for the generator.

    The inner dimension m is fixed at 2 by default: the diagonal of the
    generated Gram matrix is discarded, and the off-diagonal moments match
    for any m, so m only needs to be a valid positive integer. (The
    diagonal mean of the observed logit-scale network is not computable;
    its diagonal is identically zero.)
    """

    ebar: float
    vbar: float
    m: int
    mu: float
    sigma2: float

    @classmethod
    def from_moments(cls, ebar: float, vbar: float, m: int = 2) -> "MomentSummary":
        if m < 1:
            raise ValidationError(f"inner dimension m must be >= 1, got {m}")
        if ebar <= 0.0:
            raise NonpositiveMeanError(
                f"logit-scale mean of the difference network is {ebar:.6g} <= 0; "
                "the generator needs a positive mean (mu = sqrt(ebar/m))")
        if vbar <= 0.0:
            raise ZeroVarianceError(
                "logit-scale variance of the difference network is zero")
        mu = np.sqrt(ebar / m)
        sigma2 = -mu * mu + np.sqrt(mu ** 4 + vbar / m)
        return cls(ebar=float(ebar), vbar=float(vbar), m=int(m),
                   mu=float(mu), sigma2=float(sigma2))

    @property
    def noncentrality(self) -> float:
        """lambda = m * (4 mu^2) / (2 sigma^2) of the T component."""
        return 2.0 * self.m * self.mu ** 2 / self.sigma2

    def to_dict(self) -> dict:
        return {"ebar": self.ebar, "vbar": self.vbar, "m": self.m,
                "mu": self.mu, "sigma2": self.sigma2,
                "noncentrality": self.noncentrality}

    @classmethod
    def from_dict(cls, d: dict) -> "MomentSummary":
        return cls.from_moments(float(d["ebar"]), float(d["vbar"]),
                                int(d.get("m", 2)))


def observed_moments(dn: DifferenceNetwork, m: int = 2) -> MomentSummary:
    """Logit-scale mean and population variance of the off-diagonal entries."""
    dbar = dn.logit_values()
    ebar = float(dbar.mean())
    vbar = float(dbar.var())    # population variance: moments of the matrix itself
    return MomentSummary.from_moments(ebar, vbar, m=m)


@dataclass(frozen=True)
class NullEnsemble:
    """M generated null networks sharing the observed first two moments.

    logit_entries holds the raw off-diagonal Gram entries, one row per
    replicate in canonical upper-triangle order; the probability-scale
    networks are materialized on demand.
    """

    moments: MomentSummary
    n: int
    seed: int
    logit_entries: np.ndarray   # shape (M, n*(n-1)/2)

    def __post_init__(self):
        entries = np.asarray(self.logit_entries, dtype=float)
        if entries.ndim != 2 or entries.shape[1] != self.n * (self.n - 1) // 2:
            raise ValidationError(
                f"expected (M, {self.n * (self.n - 1) // 2}) entries, got "
                f"{entries.shape}")
        if entries.shape[0] < 1:
            raise ValidationError("ensemble needs at least one network")
        object.__setattr__(self, "logit_entries", entries)

    @property
    def size(self) -> int:
        return self.logit_entries.shape[0]

    def network(self, i: int) -> DifferenceNetwork:
        """Probability-scale view of replicate i (diagonal zeroed)."""
        return DifferenceNetwork(n=self.n, d=inv_logit(self.logit_entries[i]))

    @property
    def networks(self) -> list[DifferenceNetwork]:
        return [self.network(i) for i in range(self.size)]

    def pooled_logit_values(self) -> np.ndarray:
        return self.logit_entries.ravel()


def generate_null(moments: MomentSummary, n: int, size: int,
                  seed: int = 0) -> NullEnsemble:
    """Generate `size` null networks of n nodes.

    Replicate i draws its Gaussian factor from the (seed, i) substream, so
    ensembles are reproducible and order-stable under any scheduling.
    """
    if n < 2:
        raise ValidationError(f"need at least 2 nodes, got n={n}")
    if size < 1:
        raise ValidationError(f"ensemble size must be >= 1, got {size}")
    iu, ju = triu_index_pairs(n)
    sd = np.sqrt(moments.sigma2)
    entries = np.empty((size, len(iu)))
    for i in range(size):
        rng = substream(seed, i)
        L = rng.normal(moments.mu, sd, size=(n, moments.m))
        gram = L @ L.T
        entries[i] = gram[iu, ju]
    return NullEnsemble(moments=moments, n=n, seed=seed, logit_entries=entries)


def mixture_sample(moments: MomentSummary, count: int, seed: int = 0,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw iid samples of the null edge law (sigma2/2) (T - Q).

    T is sampled exactly through its Poisson mixture of central chi-squares:
    T ~ chi^2_{m + 2K} with K ~ Poisson(lambda / 2).
    """
    if count < 1:
        raise ValidationError(f"sample count must be >= 1, got {count}")
    if rng is None:
        rng = np.random.default_rng(seed)
    k = rng.poisson(moments.noncentrality / 2.0, size=count)
    t = rng.chisquare(moments.m + 2 * k)
    q = rng.chisquare(moments.m, size=count)
    return 0.5 * moments.sigma2 * (t - q)
