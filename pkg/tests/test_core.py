import numpy as np
import pytest

from ddtnet.core import (
    ConnectivityCohort,
    DifferenceNetwork,
    SymmetricMatrix,
    ValidationError,
    fisher_z,
    fisher_z_clamped,
    inv_logit,
    logit,
    validate_cohort,
)


def test_logit_examples():
    assert logit(0.5) == 0.0
    assert logit(0.95) == pytest.approx(np.log(19), abs=1e-9)
    assert inv_logit(logit(0.3)) == pytest.approx(0.3, abs=1e-12)


def test_logit_domain_errors():
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValidationError):
            logit(bad)


def test_inv_logit_examples():
    assert inv_logit(0.0) == 0.5
    assert inv_logit(2.944439) == pytest.approx(0.95, abs=1e-6)
    x = np.linspace(-30, 30, 101)
    assert np.allclose(inv_logit(x) + inv_logit(-x), 1.0, atol=1e-12)
    assert np.all(np.diff(inv_logit(x)) > 0)
    # extreme arguments evaluate without overflow; strictly inside (0, 1)
    # wherever float64 resolution allows (upper side saturates at x ~ 36.7)
    assert 0.0 < inv_logit(-36.0) < inv_logit(36.0) < 1.0
    assert 0.0 < inv_logit(-700.0) < 1e-300
    assert inv_logit(800.0) == 1.0


def test_logit_inv_logit_roundtrip_grid():
    grid = np.linspace(1e-6, 1 - 1e-6, 2001)
    back = inv_logit(logit(grid))
    assert np.allclose(back, grid, rtol=1e-12, atol=0)


def test_fisher_z_examples():
    assert fisher_z(0.0) == 0.0
    assert fisher_z(0.5) == pytest.approx(0.549306, abs=1e-6)
    assert fisher_z(-0.5) == pytest.approx(-0.549306, abs=1e-6)
    grid = np.linspace(-0.999, 0.999, 999)
    z = fisher_z(grid)
    assert np.all(np.diff(z) > 0)
    assert np.allclose(z, -fisher_z(-grid), atol=1e-12)
    with pytest.raises(ValidationError):
        fisher_z(1.0)


def test_fisher_z_clamped_counts():
    z, clamped = fisher_z_clamped(np.array([0.2, 1.0, -1.0, 0.5]))
    assert clamped == 2
    assert np.all(np.isfinite(z))


def test_symmetric_matrix_roundtrip_and_lookup():
    rng = np.random.default_rng(0)
    dense = rng.normal(size=(6, 6))
    dense = (dense + dense.T) / 2
    m = SymmetricMatrix.from_dense(dense)
    assert np.array_equal(m.to_dense(), dense)
    for i in range(6):
        for j in range(6):
            assert m.value(i, j) == dense[i, j]
            assert m.value(i, j) == m.value(j, i)


def test_symmetric_matrix_rejects_asymmetry_and_size():
    bad = np.array([[1.0, 0.2], [0.4, 1.0]])
    with pytest.raises(ValidationError):
        SymmetricMatrix.from_dense(bad)
    with pytest.raises(ValidationError):
        SymmetricMatrix.from_upper(1, np.array([]), diagonal=0.0)
    # asymmetry within tolerance is averaged away
    almost = np.array([[1.0, 0.2], [0.2 + 1e-9, 1.0]])
    m = SymmetricMatrix.from_dense(almost)
    assert m.value(0, 1) == pytest.approx(0.2, abs=1e-9)


def _cohort(n_nodes=3, n1=3, n2=3, seed=0):
    rng = np.random.default_rng(seed)

    def mats(k):
        out = []
        for _ in range(k):
            d = rng.uniform(-0.5, 0.5, size=(n_nodes, n_nodes))
            d = (d + d.T) / 2
            np.fill_diagonal(d, 1.0)
            out.append(SymmetricMatrix.from_dense(d))
        return tuple(out)

    return ConnectivityCohort(group1=mats(n1), group2=mats(n2))


def test_validate_cohort_accepts_valid():
    assert validate_cohort(_cohort()) is not None


def test_validate_cohort_dimension_mismatch():
    good = _cohort()
    odd = SymmetricMatrix.from_dense(np.eye(4))
    bad = ConnectivityCohort(group1=good.group1[:2] + (odd,), group2=good.group2)
    with pytest.raises(ValidationError, match="dimension mismatch"):
        validate_cohort(bad)


def test_validate_cohort_nan_reports_coordinates():
    good = _cohort()
    dense = good.group1[0].to_dense()
    dense[0, 2] = dense[2, 0] = np.nan
    bad = ConnectivityCohort(
        group1=(SymmetricMatrix.from_dense(dense),) + good.group1[1:],
        group2=good.group2)
    with pytest.raises(ValidationError, match=r"group 1 subject 0 at edge \(0, 2\)"):
        validate_cohort(bad)


def test_validate_cohort_group_size():
    good = _cohort()
    bad = ConnectivityCohort(group1=good.group1[:1], group2=good.group2)
    with pytest.raises(ValidationError, match="at least 2 subjects"):
        validate_cohort(bad)


def test_validate_cohort_covariate_alignment():
    good = _cohort()
    bad = ConnectivityCohort(group1=good.group1, group2=good.group2,
                             covariates=np.zeros((4, 2)))
    with pytest.raises(ValidationError, match="one row per subject"):
        validate_cohort(bad)


def test_difference_network_clamps_and_logits():
    pm = SymmetricMatrix.from_upper(3, np.array([1.0, 0.5, 1e-15]),
                                    diagonal=1.0)
    dn = DifferenceNetwork.from_pvalues(pm)
    assert np.all((dn.d > 0) & (dn.d < 1))
    assert np.all(np.isfinite(dn.logit_values()))
    # d = 1 - p ordering is preserved
    assert dn.d[2] > dn.d[1] > dn.d[0]
