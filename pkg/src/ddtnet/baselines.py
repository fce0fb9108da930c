"""Competing node-level tests: degree t-test at fixed density and
multiplicity-corrected binomial tests.

The density baseline thresholds each subject's connectivity matrix to a
fixed edge density, then compares nodal degrees between groups with a
Welch t-test. The binomial baselines detect edges under Bonferroni or BH
correction and test each node's count of incident detections against an
exact binomial null.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConnectivityCohort, SymmetricMatrix, ValidationError, validate_cohort
from .degree_test import NodeTestResult, binomial_upper_tail
from .edgetests import PValueMatrix, welch_t_edge
from .thresholds import benjamini_hochberg

RANKINGS = ("signed", "absolute")
CORRECTIONS = ("bonferroni", "fdr")


@dataclass(frozen=True)
class BaselineConfig:
    density: float = 0.10
    alpha: float = 0.05
    correction: str = "bonferroni"
    # ranking of edge weights when thresholding to the target density;
    # "signed" keeps the largest values, "absolute" the largest magnitudes
    ranking: str = "signed"

    def __post_init__(self):
        if not 0.0 < self.density < 1.0:
            raise ValidationError(f"density must be in (0, 1), got {self.density}")
        if self.correction not in CORRECTIONS:
            raise ValidationError(f"correction must be one of {CORRECTIONS}")
        if self.ranking not in RANKINGS:
            raise ValidationError(f"ranking must be one of {RANKINGS}")


@dataclass(frozen=True)
class DegreeTTestResult:
    """Per-node p-values and decisions of the density-degree t-test."""

    pvalues: np.ndarray
    significant: np.ndarray
    density: float
    alpha: float


def density_edge_count(n_edges: int, density: float) -> int:
    return int(round(density * n_edges))


def degree_at_density(g: SymmetricMatrix, density: float = 0.10,
                      ranking: str = "signed") -> np.ndarray:
    """Nodal degrees after keeping the top round(density * E) edges.

    Edges are ranked descending (signed values or magnitudes); ties are
    broken by the canonical (i, j) order, so exactly k edges survive.
    """
    if ranking not in RANKINGS:
        raise ValidationError(f"ranking must be one of {RANKINGS}")
    vals = g.values if ranking == "signed" else np.abs(g.values)
    k = density_edge_count(g.n_edges, density)
    selected = np.zeros(g.n_edges, dtype=bool)
    if k > 0:
        order = np.argsort(-vals, kind="stable")
        selected[order[:k]] = True
    iu, ju = np.triu_indices(g.n, k=1)
    w = selected.astype(np.int64)
    return (np.bincount(iu, weights=w, minlength=g.n)
            + np.bincount(ju, weights=w, minlength=g.n)).astype(np.int64)


def degree_ttest(cohort: ConnectivityCohort, density: float = 0.10,
                 alpha: float = 0.05, ranking: str = "signed") -> DegreeTTestResult:
    """Welch two-sample t-test of density-thresholded nodal degrees."""
    validate_cohort(cohort)
    d1 = np.vstack([degree_at_density(m, density, ranking) for m in cohort.group1])
    d2 = np.vstack([degree_at_density(m, density, ranking) for m in cohort.group2])
    p = np.array([welch_t_edge(d1[:, i], d2[:, i]) for i in range(cohort.n)])
    return DegreeTTestResult(pvalues=p, significant=p < alpha,
                             density=density, alpha=alpha)


def binomial_corrected(pmat: PValueMatrix, correction: str = "bonferroni",
                       alpha: float = 0.05) -> tuple[NodeTestResult, ...]:
    """Binomial node test on multiplicity-corrected edge detections.

    Bonferroni detects edges with p < alpha/E and uses the per-edge false
    detection rate p0 = alpha/E as the binomial null. BH detects by step-up
    at level alpha and uses p0 = max(alpha/E, D/E) with D the total number
    of detections, the expected per-edge detection rate under its own
    selection.
    """
    if correction not in CORRECTIONS:
        raise ValidationError(f"correction must be one of {CORRECTIONS}")
    n, n_edges = pmat.n, pmat.n_edges
    if correction == "bonferroni":
        detected = pmat.values < alpha / n_edges
        p0 = alpha / n_edges
    else:
        detected = benjamini_hochberg(pmat.values, alpha)
        p0 = max(alpha / n_edges, detected.sum() / n_edges)
    iu, ju = np.triu_indices(n, k=1)
    w = detected.astype(np.int64)
    degrees = (np.bincount(iu, weights=w, minlength=n)
               + np.bincount(ju, weights=w, minlength=n)).astype(int)
    results = []
    for i in range(n):
        pv = binomial_upper_tail(int(degrees[i]), n - 1, p0)
        results.append(NodeTestResult(node=i, degree=int(degrees[i]), p_null=p0,
                                      pvalue=pv, significant=pv < alpha))
    return tuple(results)
