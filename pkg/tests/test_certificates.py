import math

import numpy as np
import pytest

from cohten.certificates import (
    CHECK_NAMES,
    Check,
    certify_model,
    check_coherence_kruskal,
    check_corollary,
    check_existence_bound,
    check_kruskal,
    check_sparse_recovery_bounds,
)
from cohten.coherence_metrics import coherence, krank_lower_bound, spark
from cohten.degeneracy import DslInstance, dsl_limit_model
from cohten.tensor_core import CpModel, DomainError, cp_evaluate, frobenius_norm

from conftest import random_orthonormal, random_unit_columns


def test_kruskal_examples():
    c = check_kruskal(2, 2, 2, 2)
    assert c.holds and c.margin == 0
    assert check_kruskal(3, 3, 3, 3).holds
    assert not check_kruskal(1, 1, 1, 1).holds


def test_coherence_kruskal_examples():
    assert check_coherence_kruskal(0.1, 0.1, 0.1, 14).holds
    assert not check_coherence_kruskal(0.1, 0.1, 0.1, 15).holds
    assert check_coherence_kruskal(1, 1, 1, 1).holds


def test_coherence_kruskal_zero_mu_is_infinite_margin():
    c = check_coherence_kruskal(0.0, 0.5, 0.5, 100)
    assert c.holds and math.isinf(c.margin)


@pytest.mark.parametrize("bad", [-0.1, 1.5])
def test_coherence_kruskal_domain(bad):
    with pytest.raises(DomainError):
        check_coherence_kruskal(bad, 0.5, 0.5, 1)


def test_existence_bound_examples():
    assert check_existence_bound(0.5, 0.5, 0.5, 7).holds
    assert not check_existence_bound(0.5, 0.5, 0.5, 8).holds
    assert check_existence_bound(0.0, 0.9, 1.0, 1000).holds


def test_corollary_examples():
    assert check_corollary(0.3, 0.3, 0.3, 4).holds
    assert not check_corollary(0.3, 0.3, 0.3, 5).holds
    assert check_corollary(1, 1, 1, 1).holds
    assert check_corollary(0.125, 0.125, 0.125, 10).holds
    with pytest.raises(DomainError):
        check_corollary(0.0, 0.5, 0.5, 1)


def test_sparse_recovery_examples():
    assert check_sparse_recovery_bounds(3, spark=6).holds
    assert check_sparse_recovery_bounds(3, mu=0.2).holds
    assert not check_sparse_recovery_bounds(2, mu=1.0).holds
    with pytest.raises(ValueError):
        check_sparse_recovery_bounds(1)


def test_coherence_recovery_never_beats_spark_recovery(rng):
    for _ in range(200):
        V = random_unit_columns(rng, rng.integers(2, 5), rng.integers(2, 7))
        k = int(rng.integers(0, 5))
        mu, s = coherence(V), spark(V)
        if check_sparse_recovery_bounds(k, mu=mu).holds:
            assert check_sparse_recovery_bounds(k, spark=s).holds


def test_check_holds_consistent_with_margin():
    for c in (check_kruskal(2, 3, 4, 3), check_existence_bound(0.5, 0.4, 0.3, 10),
              check_corollary(0.5, 0.4, 0.3, 3)):
        assert c.holds == (c.margin > 0 or (c.relation == ">=" and c.margin == 0))
        assert c.name in CHECK_NAMES


def test_unknown_check_name():
    with pytest.raises(ValueError):
        Check.evaluate("made_up", 1, 0, ">")


def test_certify_orthonormal_model(rng):
    M = CpModel([1.0, 2.0], *(random_orthonormal(rng, 3, 2) for _ in range(3)))
    cert = certify_model(M)
    assert cert.mu_u < 1e-12 or cert.mu_u == 0.0
    exact = CpModel([1.0, 2.0], np.eye(2), np.eye(2), np.eye(2))
    cert = certify_model(exact)
    assert (cert.mu_u, cert.mu_v, cert.mu_w) == (0.0, 0.0, 0.0)
    assert all(c.holds for c in cert.checks)
    assert math.isinf(cert["coherence_kruskal"].margin)
    assert math.isinf(cert["corollary_bound"].margin)
    assert cert.rank_certified


def test_certify_limit_representation():
    cert = certify_model(dsl_limit_model(DslInstance.orthonormal()))
    assert (cert.mu_u, cert.mu_v, cert.mu_w) == (1.0, 1.0, 1.0)
    assert (cert.krank_u, cert.krank_v, cert.krank_w) == (1, 1, 1)
    assert not cert["coherence_kruskal"].holds
    assert not cert["kruskal"].holds


def test_certify_collinear_columns(rng):
    U = random_unit_columns(rng, 3, 2)
    U[:, 1] = U[:, 0]
    V = np.column_stack([U[:, 0], U[:, 0]])
    M = CpModel([1.0, 1.0], U, V, V)
    cert = certify_model(M)
    assert cert.mu_u == pytest.approx(1.0)
    assert not cert["coherence_kruskal"].holds


def test_certify_large_rank_uses_bounds(rng):
    r = 26
    M = CpModel(np.ones(r), *(random_orthonormal(rng, 30, r) for _ in range(3)))
    cert = certify_model(M)
    assert not cert.krank_exact
    assert cert.krank_u <= r


def test_certify_zero_weight_blocks_rank(rng):
    M = CpModel([1.0, 0.0], np.eye(2), np.eye(2), np.eye(2))
    assert not certify_model(M).rank_certified


def random_mus(rng):
    return tuple(rng.uniform(0, 1, 3)), int(rng.integers(1, 30))


def test_corollary_implies_existence_and_coherence_kruskal(rng):
    for _ in range(1000):
        mus, r = random_mus(rng)
        if check_corollary(*mus, r).holds:
            assert check_existence_bound(*mus, r).holds
            assert check_coherence_kruskal(*mus, r).holds


def test_corollary_without_existence_at_unit_coherence():
    # at r = 1 with all mu = 1 the corollary holds but the product is not < 1
    assert check_corollary(1, 1, 1, 1).holds
    assert not check_existence_bound(1, 1, 1, 1).holds


def test_coherence_kruskal_implies_ceil_bound_sum(rng):
    # ceil(1/mu) summed reaches 2r + 1; see the counterexample below for 2r + 2
    for _ in range(1000):
        mus, r = random_mus(rng)
        if check_coherence_kruskal(*mus, r).holds:
            total = sum(krank_lower_bound(mu, 10**6) for mu in mus)
            assert total >= 2 * r + 1


def test_coherence_kruskal_does_not_imply_ceil_kruskal():
    mus = (1 / 1.9, 1 / 1.9, 1 / 2.9)
    r = 3
    assert check_coherence_kruskal(*mus, r).holds
    kr = [krank_lower_bound(mu, r) for mu in mus]
    assert kr == [2, 2, 3]
    assert not check_kruskal(*kr, r).holds


def test_checks_symmetric_in_modes(rng):
    for _ in range(100):
        mus, r = random_mus(rng)
        perm = tuple(np.array(mus)[rng.permutation(3)])
        for fn in (check_coherence_kruskal, check_existence_bound, check_corollary):
            assert fn(*mus, r).holds == fn(*perm, r).holds


def test_coercivity_inequality(rng):
    violations = 0
    for _ in range(500):
        r = int(rng.integers(1, 5))
        dims = rng.integers(1, 7, size=3)
        factors = [random_unit_columns(rng, d, r) for d in dims]
        lam = rng.standard_normal(r) + 1j * rng.standard_normal(r)
        M = CpModel(lam, *factors)
        mu = [coherence(F) for F in M.factors]
        rhs = (1 - r * mu[0] * mu[1] * mu[2]) * np.sum(np.abs(M.weights) ** 2)
        if rhs > 0:
            lhs = frobenius_norm(cp_evaluate(M)) ** 2
            violations += lhs < rhs * (1 - 1e-8)
    assert violations == 0
