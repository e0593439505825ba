import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qicost.experiments import (
    BooleanFunctionTable,
    PhaseEnsemble,
    appendix_inequality_suite,
    disjointness_sanity,
    full_matrix_phase_entropy,
    ip_report,
    mass_shift_distribution,
    phase_entropy,
    qic_lower_bound_check,
    random_function_experiment,
    renyi2_phase_entropy,
)
from qicost.generators import random_distribution, random_product_distribution, stream
from qicost.library import and_table, bounce, exchange_classical, inner_product_table, send_x_classical
from qicost.protocol import ModelContractError
from qicost.state import InputDistribution
from qicost.transforms import quantize_classical

DIAG = InputDistribution(np.array([[0.5, 0], [0, 0.5]]))
ANTI = InputDistribution(np.array([[0, 0.5], [0.5, 0]]))


def test_constant_function_has_no_phase_entropy():
    f = BooleanFunctionTable.constant(4, 4, 1)
    assert phase_entropy(f) == pytest.approx(0, abs=1e-12)
    assert renyi2_phase_entropy(f) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_inner_product_is_maximal(n):
    f = BooleanFunctionTable.inner_product(n)
    g = PhaseEnsemble.of(f).gram()
    assert np.allclose(g, np.eye(2**n) / 2**n, atol=1e-12)
    assert phase_entropy(f) == pytest.approx(n, abs=1e-9)
    assert renyi2_phase_entropy(f) == pytest.approx(n, abs=1e-9)


def test_single_column_dependence():
    # f(x, y) = x: the two states differ by a global sign only
    f = np.array([[0, 0], [1, 1]])
    assert phase_entropy(f) == pytest.approx(0, abs=1e-12)
    # f(x, y) = y: both states are the same vector
    assert phase_entropy(f.T) == pytest.approx(0, abs=1e-12)


def test_biased_marginals():
    f = inner_product_table(1)
    mx = np.array([0.5, 0.5])
    my = np.array([0.9, 0.1])
    # the two states have overlap 0.9 - 0.1 = 0.8
    lam = np.array([0.9, 0.1])
    want = -float(np.sum(lam * np.log2(lam)))
    assert phase_entropy(f, mx, my) == pytest.approx(want, abs=1e-12)
    assert full_matrix_phase_entropy(f, mx, my) == pytest.approx(want, abs=1e-12)


@given(st.integers(0, 10**6), st.integers(1, 3))
def test_gram_matches_full_matrix(seed, n):
    rng = stream(seed)
    f = BooleanFunctionTable.random(rng, n)
    mx, my = rng.dirichlet(np.ones(2**n)), rng.dirichlet(np.ones(2**n))
    h = phase_entropy(f, mx, my)
    assert h == pytest.approx(full_matrix_phase_entropy(f, mx, my), abs=1e-9)
    assert renyi2_phase_entropy(f, mx, my) <= h + 1e-9
    assert -1e-12 <= h <= n + 1e-9


def test_random_function_experiment_is_deterministic():
    a = random_function_experiment(2, 10, seed=4)
    b = random_function_experiment(2, 10, seed=4)
    assert a.deterministic() == b.deterministic()
    assert a.ok
    assert random_function_experiment(2, 10, seed=5).deterministic() != a.deterministic()


def test_random_function_small_case():
    rep = random_function_experiment(1, 4, seed=0)
    assert rep.ok
    assert all(0 <= h <= 1 + 1e-12 for h in rep.values["h"])
    assert rep.values["delta"] == 1.0 and rep.values["threshold"] == 0.0
    assert rep.values["violation_fraction"] == 0.0
    assert rep.values["tail_bound"] == pytest.approx(math.exp(-0.5))
    with pytest.raises(ValueError):
        random_function_experiment(7, 1, seed=0)


@pytest.mark.parametrize("n", [1, 2])
def test_lower_bound_is_tight_for_inner_product(n):
    f = inner_product_table(n)
    p = quantize_classical(send_x_classical(f))
    rep = qic_lower_bound_check(p, f, InputDistribution.uniform(2**n, 2**n))
    assert rep.holds and rep.tight
    assert rep.qic == pytest.approx(n)


def test_lower_bound_holds_under_product_distributions(rng):
    f = and_table()
    p = quantize_classical(exchange_classical(f))
    for _ in range(5):
        assert qic_lower_bound_check(p, f, random_product_distribution(rng, 2, 2)).holds


def test_lower_bound_input_errors(rng):
    f = and_table()
    p = quantize_classical(send_x_classical(f))
    with pytest.raises(ValueError, match="product"):
        qic_lower_bound_check(p, f, DIAG)
    with pytest.raises(ModelContractError):
        qic_lower_bound_check(p, np.array([[0, 1], [1, 0]]), InputDistribution.uniform(2, 2))


def test_ip_report_values():
    rep = ip_report(2)
    assert rep.ok
    assert rep.values["tight"]
    assert rep.values["phase_entropy"] == pytest.approx(2)


def test_mass_shift_distribution():
    mu = InputDistribution(np.array([[0.2, 0.3], [0.25, 0.25]]))
    mu0, w = mass_shift_distribution(mu)
    assert w == 0.25
    assert np.allclose(mu0.probs, [[0.2 / 0.75, 0.3 / 0.75], [0.25 / 0.75, 0]])
    with pytest.raises(ValueError):
        mass_shift_distribution(InputDistribution(np.array([[0.1, 0.1], [0.1, 0.7]])))


def test_mass_shift_equality_without_mass(rng):
    p = quantize_classical(send_x_classical(and_table()))
    mu = random_distribution(rng, 2, 2)
    probs = mu.probs.copy()
    probs[1, 1] = 0
    checks = appendix_inequality_suite(p, InputDistribution(probs / probs.sum()))
    eq = [c for c in checks if c.name == "mass_shift_equality(w=0)"]
    assert len(eq) == 1 and eq[0].holds


def test_single_entropy_upper_bound_fails_on_exchange():
    # exchanging both bits costs 2 on the mixture but 0 on either half
    p = quantize_classical(exchange_classical(and_table()))
    checks = {c.name: c for c in appendix_inequality_suite(p, splits=[(0.5, DIAG, ANTI)])}
    assert not checks["split0(p=0.5):upper"].holds
    assert checks["split0(p=0.5):upper"].lhs == pytest.approx(2)
    assert checks["split0(p=0.5):upper"].rhs == pytest.approx(1)
    for k in ("lower", "upper_two_sided", "upper_a_to_b", "upper_b_to_a"):
        assert checks[f"split0(p=0.5):{k}"].holds


def test_mass_split_single_entropy_fails():
    p = quantize_classical(exchange_classical(and_table()))
    checks = {c.name: c for c in appendix_inequality_suite(p, InputDistribution.uniform(2, 2))}
    assert checks["mass_shift(w=0.25)"].holds
    assert not checks["mass_split(w=0.25):upper"].holds
    assert checks["mass_split(w=0.25):upper_two_sided"].holds


def test_suite_requires_certified_protocol():
    with pytest.raises(ModelContractError, match="certified"):
        appendix_inequality_suite(bounce(copy=False), InputDistribution.uniform(2, 2))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_disjointness_sanity(n):
    rep = disjointness_sanity(n)
    assert rep.ok
    assert rep.values["qic"] == pytest.approx(n)
    with pytest.raises(ValueError):
        disjointness_sanity(4)
