"""Core numeric types and transforms shared across the toolkit.

Symmetric matrices are stored as their upper triangle plus an explicit
diagonal, since every downstream statistic ignores the diagonal. All
containers are immutable after construction and safe to share between
workers; the transforms here are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# p-values are clamped into [P_MIN, 1 - P_MIN] before the logit transform;
# permutation tests and degenerate edges can emit exact 0/1.
P_MIN = 1e-10
# correlations with |r| = 1 are clamped to +/-R_MAX before the Fisher Z
# transform; the clamp count is surfaced in run reports.
R_MAX = 1.0 - 1e-7

SYMMETRY_TOL = 1e-8


class DdtError(Exception):
    """Base class for toolkit errors."""


class ValidationError(DdtError):
    """Input data violates a structural contract."""


def logit(x):
    """ln(x / (1 - x)) for x in (0, 1)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        raise ValidationError("logit requires arguments strictly inside (0, 1)")
    out = np.log(x) - np.log1p(-x)
    return float(out) if out.ndim == 0 else out

def inv_logit(x):
    """1 / (1 + exp(-x)); maps the real line onto (0, 1)."""
    x = np.asarray(x, dtype=float)
    # evaluate on the non-positive side only so large |x| cannot overflow
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return float(out) if out.ndim == 0 else out


def fisher_z(r):
    """atanh(r), the variance-stabilizing transform for correlations."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) >= 1.0):
        raise ValidationError("fisher_z requires |r| < 1; clamp degenerate "
                              "correlations first (see fisher_z_clamped)")
    out = np.arctanh(r)
    return float(out) if out.ndim == 0 else out


def fisher_z_clamped(r: np.ndarray) -> tuple[np.ndarray, int]:
    """Fisher Z with |r| >= 1 clamped to +/-R_MAX.

    Returns the transformed array and the number of clamped entries, which
    callers surface in run reports.
    """
    r = np.asarray(r, dtype=float)
    clipped = np.clip(r, -R_MAX, R_MAX)
    n_clamped = int(np.count_nonzero(clipped != r))
    return np.arctanh(clipped), n_clamped


def clamp_pvalues(p: np.ndarray) -> np.ndarray:
    """Clamp p-values into [P_MIN, 1 - P_MIN] so 1 - p survives the logit."""
    return np.clip(np.asarray(p, dtype=float), P_MIN, 1.0 - P_MIN)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic generator for a (seed, key...) substream.

    Substreams derived this way are independent of evaluation order, which
    is what makes parallel edge tests and null replicates reproducible.
    """
    return np.random.default_rng([int(seed), *[int(k) for k in key]])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def triu_index_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the upper triangle in canonical (i, j) order."""
    return np.triu_indices(n, k=1)


@dataclass(frozen=True)
class SymmetricMatrix:
    """Symmetric n x n matrix stored as upper triangle plus diagonal."""

    n: int
    values: np.ndarray          # shape (n*(n-1)/2,), canonical i<j order
    diagonal: np.ndarray        # shape (n,)

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"need at least 2 nodes, got n={self.n}")
        values = np.asarray(self.values, dtype=float)
        diagonal = np.asarray(self.diagonal, dtype=float)
        if values.shape != (self.n_edges,):
            raise ValidationError(
                f"expected {self.n_edges} upper-triangle values for n={self.n}, "
                f"got shape {values.shape}")
        if diagonal.shape != (self.n,):
            raise ValidationError(
                f"expected diagonal of length {self.n}, got shape {diagonal.shape}")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "diagonal", _frozen(diagonal))

    @property
    def n_edges(self) -> int:
        return self.n * (self.n - 1) // 2

    @classmethod
    def from_dense(cls, dense: np.ndarray, *, tol: float = SYMMETRY_TOL) -> "SymmetricMatrix":
        dense = np.asarray(dense, dtype=float)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {dense.shape}")
        n = dense.shape[0]
        asym = np.nanmax(np.abs(dense - dense.T)) if n else 0.0
        if asym > tol:
            raise ValidationError(
                f"matrix is asymmetric beyond tolerance ({asym:.3g} > {tol:.3g})")
        iu, ju = triu_index_pairs(n)
        # average the two triangles so tiny read asymmetries do not leak through
        vals = 0.5 * (dense[iu, ju] + dense[ju, iu])
        return cls(n=n, values=vals, diagonal=np.diag(dense).copy())

    @classmethod
    def from_upper(cls, n: int, values: np.ndarray,
                   diagonal: np.ndarray | float = 0.0) -> "SymmetricMatrix":
        diag = np.full(n, diagonal, dtype=float) if np.isscalar(diagonal) else diagonal
        return cls(n=n, values=values, diagonal=diag)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=float)
        iu, ju = triu_index_pairs(self.n)
        out[iu, ju] = self.values
        out[ju, iu] = self.values
        out[np.diag_indices(self.n)] = self.diagonal
        return out

    def value(self, i: int, j: int) -> float:
        if i == j:
            return float(self.diagonal[i])
        i, j = (i, j) if i < j else (j, i)
        # linear index of (i, j) in canonical upper-triangle order
        k = i * (2 * self.n - i - 1) // 2 + (j - i - 1)
        return float(self.values[k])


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Binary symmetric matrix with zero diagonal (selected edge set)."""

    n: int
    selected: np.ndarray        # bool, shape (n*(n-1)/2,), canonical order

    def __post_init__(self):
        sel = np.asarray(self.selected, dtype=bool)
        expected = self.n * (self.n - 1) // 2
        if sel.shape != (expected,):
            raise ValidationError(
                f"expected {expected} edge indicators for n={self.n}, got {sel.shape}")
        object.__setattr__(self, "selected", _frozen(sel))

    @property
    def n_edges_selected(self) -> int:
        return int(self.selected.sum())

    def degrees(self) -> np.ndarray:
        iu, ju = triu_index_pairs(self.n)
        w = self.selected.astype(np.int64)
        return (np.bincount(iu, weights=w, minlength=self.n)
                + np.bincount(ju, weights=w, minlength=self.n)).astype(np.int64)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=int)
        iu, ju = triu_index_pairs(self.n)
        out[iu, ju] = self.selected
        out[ju, iu] = self.selected
        return out

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "AdjacencyMatrix":
        dense = np.asarray(dense)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {dense.shape}")
        uniq = np.unique(dense[~np.isnan(dense.astype(float))])
        if not np.all(np.isin(uniq, (0, 1))):
            raise ValidationError("adjacency entries must be 0 or 1")
        if np.any(dense != dense.T):
            raise ValidationError("adjacency matrix must be symmetric")
        iu, ju = triu_index_pairs(dense.shape[0])
        return cls(n=dense.shape[0], selected=dense[iu, ju].astype(bool))


@dataclass(frozen=True)
class DifferenceNetwork:
    """Edge-wise difference strengths d_ij = 1 - p_ij, zero diagonal.

    Entries are kept strictly inside (0, 1) (p-values are clamped on
    construction) so the logit-scale view is always finite.
    """

    n: int
    d: np.ndarray               # shape (n*(n-1)/2,), in (0, 1)

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        expected = self.n * (self.n - 1) // 2
        if d.shape != (expected,):
            raise ValidationError(
                f"expected {expected} edge values for n={self.n}, got {d.shape}")
        if np.any(d <= 0.0) or np.any(d >= 1.0):
            raise ValidationError("difference-network entries must lie in (0, 1); "
                                  "clamp p-values first")
        object.__setattr__(self, "d", _frozen(d))

    @classmethod
    def from_pvalues(cls, pmat: "SymmetricMatrix") -> "DifferenceNetwork":
        p = clamp_pvalues(pmat.values)
        return cls(n=pmat.n, d=1.0 - p)

    def logit_values(self) -> np.ndarray:
        """Logit-scale view of the off-diagonal entries."""
        return np.log(self.d) - np.log1p(-self.d)

    def to_symmetric(self) -> SymmetricMatrix:
        return SymmetricMatrix.from_upper(self.n, self.d, diagonal=0.0)


@dataclass(frozen=True)
class ConnectivityCohort:
    """Two groups of subject connectivity matrices plus optional covariates.

    Covariates are one row per subject, subjects ordered group 1 then
    group 2 (the on-disk manifest convention).
    """

    group1: tuple[SymmetricMatrix, ...]
    group2: tuple[SymmetricMatrix, ...]
    covariates: np.ndarray | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "group1", tuple(self.group1))
        object.__setattr__(self, "group2", tuple(self.group2))
        if self.covariates is not None:
            cov = np.asarray(self.covariates, dtype=float)
            object.__setattr__(self, "covariates", _frozen(cov))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def n(self) -> int:
        return self.group1[0].n

    @property
    def n1(self) -> int:
        return len(self.group1)

    @property
    def n2(self) -> int:
        return len(self.group2)

    def edge_samples(self, group: int) -> np.ndarray:
        """(n_subjects, n_edges) matrix of per-subject edge values."""
        mats = self.group1 if group == 1 else self.group2
        return np.vstack([m.values for m in mats])


def validate_cohort(cohort: ConnectivityCohort) -> ConnectivityCohort:
    """Check dimensions, group sizes, finiteness and covariate alignment.

    Returns the cohort unchanged when valid; raises ValidationError with the
    offending (subject, i, j) coordinates otherwise.
    """
    if len(cohort.group1) < 2 or len(cohort.group2) < 2:
        raise ValidationError(
            f"each group needs at least 2 subjects (got {len(cohort.group1)} "
            f"and {len(cohort.group2)}); per-edge variance is not estimable")
    n = cohort.group1[0].n
    for gi, group in ((1, cohort.group1), (2, cohort.group2)):
        for si, mat in enumerate(group):
            if mat.n != n:
                raise ValidationError(
                    f"dimension mismatch: group {gi} subject {si} has n={mat.n}, "
                    f"expected n={n}")
            bad = ~np.isfinite(mat.values)
            if bad.any():
                iu, ju = triu_index_pairs(mat.n)
                k = int(np.flatnonzero(bad)[0])
                raise ValidationError(
                    f"invalid value in group {gi} subject {si} at edge "
                    f"({int(iu[k])}, {int(ju[k])})")
    if cohort.labels is not None and len(cohort.labels) != n:
        raise ValidationError(
            f"{len(cohort.labels)} node labels for n={n} nodes")
    if cohort.covariates is not None:
        cov = cohort.covariates
        n_subj = len(cohort.group1) + len(cohort.group2)
        if cov.ndim != 2 or cov.shape[0] != n_subj:
            raise ValidationError(
                f"covariates must be one row per subject ({n_subj}), got shape "
                f"{cov.shape}")
        if not np.all(np.isfinite(cov)):
            raise ValidationError("covariates contain non-finite values")
    return cohort
