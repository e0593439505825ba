import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qicost.generators import random_distribution, random_pure_state
from qicost.linalg import von_neumann_entropy
from qicost.state import (
    DensityOperator,
    InputDistribution,
    PureState,
    Register,
    RegisterSystem,
    canonical_purification,
    partial_trace,
    permute_registers,
)

seeds = st.integers(0, 2**32 - 1)


def reduced_oracle(state: PureState, keep):
    """Partial trace by an explicit einsum over the full tensor."""
    names = list(state.names)
    keep = list(keep)
    letters = "abcdefghijklmnop"
    row = [letters[i] for i in range(len(names))]
    col = [letters[i].upper() if n in keep else letters[i] for i, n in enumerate(names)]
    out = [letters[names.index(n)] for n in keep] + [letters[names.index(n)].upper() for n in keep]
    t = np.einsum(f"{''.join(row)},{''.join(col)}->{''.join(out)}", state.tensor, state.tensor.conj())
    d = int(np.prod([state.system.dim_of(n) for n in keep]))
    return t.reshape(d, d)


def test_register_validation():
    with pytest.raises(ValueError):
        Register("", 2)
    with pytest.raises(ValueError):
        Register("A", 0)
    with pytest.raises(ValueError):
        RegisterSystem.of(("A", 2), ("A", 2))


def test_state_norm_checked():
    with pytest.raises(ValueError):
        PureState(RegisterSystem.of(("A", 2)), [1, 1])


def test_swap_permutation():
    s = PureState.basis(RegisterSystem.of(("A", 2), ("B", 2)), (0, 1))
    t = permute_registers(s, ["B", "A"])
    assert t.names == ("B", "A")
    assert t.tensor[1, 0] == 1


@given(seeds)
def test_permutation_preserves_entropies(seed):
    s = random_pure_state(np.random.default_rng(seed), [("A", 2), ("B", 3), ("C", 2)])
    t = s.permute(["C", "A", "B"])
    for sub in ({"A"}, {"B"}, {"A", "C"}):
        assert t.entropy(sub) == pytest.approx(s.entropy(sub), abs=1e-12)
    assert np.allclose(s.permute(["A", "B", "C"]).tensor, s.tensor)


def test_bell_reduced_is_maximally_mixed():
    s = PureState(RegisterSystem.of(("A", 2), ("B", 2)), np.array([1, 0, 0, 1]) / math.sqrt(2))
    assert np.allclose(partial_trace(s, ["A"]).matrix, np.eye(2) / 2)


def test_product_reduced_is_pure():
    psi = np.array([0.6, 0.8])
    phi = np.array([1, 1j]) / math.sqrt(2)
    s = PureState(RegisterSystem.of(("A", 2), ("B", 2)), np.kron(psi, phi))
    assert np.allclose(s.reduced(["A"]).matrix, np.outer(psi, psi))


@given(seeds)
def test_reduced_state_matches_einsum_oracle(seed):
    s = random_pure_state(np.random.default_rng(seed), [("A", 2), ("B", 3), ("C", 2)])
    for keep in (["A"], ["B", "C"], ["C", "A"]):
        assert np.allclose(s.reduced(keep).matrix, reduced_oracle(s, keep), atol=1e-12)
        assert s.entropy(keep) == pytest.approx(von_neumann_entropy(reduced_oracle(s, keep)), abs=1e-9)


@given(seeds)
def test_complementary_entropies(seed):
    s = random_pure_state(np.random.default_rng(seed), [("A", 2), ("B", 2), ("C", 3)])
    assert s.entropy({"A", "B"}) == pytest.approx(s.entropy({"C"}), abs=1e-9)


@given(seeds)
def test_sparse_state_entropy_matches_dense(seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=16) * (rng.random(16) < 0.4)
    if not amps.any():
        amps[0] = 1
    s = PureState(RegisterSystem.of(("A", 2), ("B", 2), ("C", 4)), amps / np.linalg.norm(amps))
    rho = DensityOperator.from_pure(s)
    for keep in ({"A"}, {"B", "C"}, {"A", "C"}):
        assert s.entropy(keep) == pytest.approx(rho.entropy(keep), abs=1e-9)


def test_split_register():
    s = random_pure_state(np.random.default_rng(1), [("X", 4), ("Y", 2)])
    t = s.split("X", [("X1", 2), ("X2", 2)])
    assert t.names == ("X1", "X2", "Y")
    assert t.entropy({"X1", "X2"}) == pytest.approx(s.entropy({"X"}))
    with pytest.raises(ValueError):
        s.split("X", [("X1", 3), ("X2", 2)])


def test_apply_and_partial_support():
    s = PureState.basis(RegisterSystem.of(("A", 2)), (1,))
    x = np.array([[0, 1], [1, 0]])
    assert s.apply(x, ["A"], [Register("A", 2)]).tensor[0] == 1
    proj = np.array([[1, 0]])
    with pytest.raises(ValueError):
        s.apply(proj, ["A"], [Register("Z", 1)], partial=True)


def test_density_operator_validation():
    sys = RegisterSystem.of(("A", 2))
    with pytest.raises(ValueError):
        DensityOperator(sys, np.diag([0.5, 0.4]))
    with pytest.raises(ValueError):
        DensityOperator(sys, np.diag([1.5, -0.5]))
    rho = DensityOperator(sys, np.diag([0.25, 0.75]))
    assert rho.is_classical()
    assert np.allclose(rho.diagonal(), [0.25, 0.75])


def test_input_distribution_validation():
    with pytest.raises(ValueError):
        InputDistribution([[0.5, 0.6]])
    with pytest.raises(ValueError):
        InputDistribution([[1.5, -0.5]])
    with pytest.raises(ValueError):
        InputDistribution([0.5, 0.5])
    mu = InputDistribution.product([0.25, 0.75], [0.5, 0.5])
    assert mu.is_product()
    assert not InputDistribution.diagonal(2).is_product()
    mix = InputDistribution.diagonal(2).mix(InputDistribution.uniform(2, 2), 0.5)
    assert mix.probs[0, 0] == pytest.approx(0.375)


def test_purification_point_mass():
    s = canonical_purification(InputDistribution.point(2, 2, 0, 0))
    assert s.tensor[0, 0, 0, 0] == 1


def test_purification_correlated_bits():
    s = canonical_purification(InputDistribution.diagonal(2))
    expected = np.zeros(16)
    expected[0] = expected[15] = 1 / math.sqrt(2)
    assert np.allclose(s.vector, expected)
    assert von_neumann_entropy(reduced_oracle(s, ["X", "RX"])) == pytest.approx(1)


def test_purification_independent_bits():
    # for a product distribution X RX is itself pure; X alone carries the bit
    s = canonical_purification(InputDistribution.uniform(2, 2))
    assert von_neumann_entropy(reduced_oracle(s, ["X", "RX"])) == pytest.approx(0, abs=1e-9)
    assert von_neumann_entropy(reduced_oracle(s, ["X"])) == pytest.approx(1)
    assert s.entropy({"X"}) == pytest.approx(1)


@given(seeds)
def test_purification_reference_mirrors_input(seed):
    mu = random_distribution(np.random.default_rng(seed), 2, 3)
    s = canonical_purification(mu)
    rho = s.reduced(["X", "RX"])
    # weights mu_X on |xx>, nothing off the copy diagonal
    diag = rho.diagonal()
    assert np.allclose(np.diag(diag), mu.mu_x)
    assert np.allclose(diag.sum(), 1)
    for name in ("X", "RX"):
        assert np.allclose(s.reduced([name]).matrix, np.diag(mu.mu_x), atol=1e-12)
