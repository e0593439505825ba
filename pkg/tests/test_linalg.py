import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qicost.linalg import (
    DimensionCapError,
    NormalizationError,
    NotHermitianError,
    PositivityError,
    binary_entropy,
    cqmi,
    dim_cap,
    hermitian_eigenvalues,
    kron,
    renyi2_entropy,
    shannon_entropy,
    von_neumann_entropy,
)
from qicost.state import PureState, RegisterSystem
from qicost.generators import random_pure_state

seeds = st.integers(0, 2**32 - 1)


def random_density(rng, d, rank=None):
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def test_kron_basics(rng):
    assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    p0, p1 = np.diag([1, 0]), np.diag([0, 1])
    assert np.array_equal(kron(p0, p1), np.diag([0, 1, 0, 0]))
    a, b = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    k = kron(a, b)
    for i, j, m, n in np.ndindex(2, 2, 2, 2):
        assert k[2 * i + m, 2 * j + n] == pytest.approx(a[i, j] * b[m, n])


def test_kron_respects_cap():
    with dim_cap(8):
        with pytest.raises(DimensionCapError):
            kron(np.eye(4), np.eye(4))


def test_eigenvalues_known():
    assert np.allclose(hermitian_eigenvalues(np.diag([0.5, 0.5])), [0.5, 0.5])
    assert np.allclose(hermitian_eigenvalues([[0, 1], [1, 0]]), [1, -1])


def test_eigenvalues_reject_non_hermitian():
    with pytest.raises(NotHermitianError):
        hermitian_eigenvalues([[0, 1], [0, 0]])
    with pytest.raises(NotHermitianError):
        hermitian_eigenvalues(np.ones((2, 3)))


@given(seeds, st.integers(1, 6))
def test_eigenvalues_trace_moments(seed, d):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = g + g.conj().T
    ev = hermitian_eigenvalues(h)
    assert np.all(np.diff(ev) <= 1e-12)
    assert ev.sum() == pytest.approx(np.trace(h).real, abs=1e-9)
    assert (ev**2).sum() == pytest.approx(np.trace(h @ h).real, abs=1e-9)


def test_von_neumann_known_values():
    psi = np.array([1, 1j]) / math.sqrt(2)
    assert von_neumann_entropy(np.outer(psi, psi.conj())) == pytest.approx(0, abs=1e-12)
    assert von_neumann_entropy(np.eye(2) / 2) == pytest.approx(1)
    assert von_neumann_entropy(np.eye(4) / 4) == pytest.approx(2)


def test_entropy_clipping_and_errors():
    assert von_neumann_entropy(np.diag([1 + 5e-9, -5e-9])) == pytest.approx(0, abs=1e-7)
    with pytest.raises(PositivityError):
        von_neumann_entropy(np.diag([1.1, -0.1]))
    with pytest.raises(NormalizationError):
        von_neumann_entropy(np.diag([0.5, 0.4]))
    with pytest.raises(NotHermitianError):
        von_neumann_entropy([[0.5, 0.5], [0, 0.5]])


def test_renyi2_known_values():
    assert renyi2_entropy(np.eye(8) / 8) == pytest.approx(3)
    assert renyi2_entropy(np.diag([1.0, 0.0])) == pytest.approx(0)
    assert renyi2_entropy(np.diag([0.5, 0.25, 0.25])) == pytest.approx(-math.log2(0.375))


@given(seeds, st.integers(1, 5))
def test_renyi_below_von_neumann(seed, d):
    rho = random_density(np.random.default_rng(seed), d)
    assert renyi2_entropy(rho) <= von_neumann_entropy(rho) + 1e-10
    assert von_neumann_entropy(rho) <= math.log2(d) + 1e-10


def test_binary_entropy():
    assert binary_entropy(0.5) == 1
    assert binary_entropy(0) == 0
    assert binary_entropy(0.25) == pytest.approx(0.8112781244591328)
    with pytest.raises(ValueError):
        binary_entropy(1.5)


def test_shannon_matches_binary():
    assert shannon_entropy([0.25, 0.75]) == pytest.approx(binary_entropy(0.25))
    assert shannon_entropy([[0.25, 0.25], [0.25, 0.25]]) == pytest.approx(2)


def bell(a="A", b="B"):
    return PureState(RegisterSystem.of((a, 2), (b, 2)), np.array([1, 0, 0, 1]) / math.sqrt(2))


def test_cqmi_bell_pair():
    assert cqmi(bell(), {"A"}, {"B"}) == pytest.approx(2)


def test_cqmi_overlapping_sets_rejected():
    with pytest.raises(ValueError):
        cqmi(bell(), {"A"}, {"A", "B"})


@given(seeds)
def test_cqmi_additive_on_products(seed):
    rng = np.random.default_rng(seed)
    s1 = random_pure_state(rng, [("A", 2), ("B", 2), ("C", 2)])
    s2 = random_pure_state(rng, [("D", 2), ("E", 2), ("F", 2)])
    both = s1.tensor_with(s2)
    lhs = cqmi(both, {"A", "D"}, {"B", "E"}, {"C", "F"})
    assert lhs == pytest.approx(cqmi(s1, {"A"}, {"B"}, {"C"}) + cqmi(s2, {"D"}, {"E"}, {"F"}), abs=1e-9)


@given(seeds)
def test_cqmi_pure_four_party_symmetry(seed):
    s = random_pure_state(np.random.default_rng(seed), [("A", 2), ("B", 2), ("C", 2), ("D", 2)])
    assert cqmi(s, {"A"}, {"B"}, {"C"}) == pytest.approx(cqmi(s, {"A"}, {"B"}, {"D"}), abs=1e-9)


@given(seeds)
def test_cqmi_nonnegative_and_chain_rule(seed):
    s = random_pure_state(np.random.default_rng(seed), [("A", 2), ("B", 2), ("C", 2), ("D", 2), ("E", 2)])
    assert cqmi(s, {"A"}, {"B"}, {"C"}) >= -1e-10
    # I(A; BC | D) = I(A; C | D) + I(A; B | CD)
    lhs = cqmi(s, {"A"}, {"B", "C"}, {"D"})
    rhs = cqmi(s, {"A"}, {"C"}, {"D"}) + cqmi(s, {"A"}, {"B"}, {"C", "D"})
    assert lhs == pytest.approx(rhs, abs=1e-9)
