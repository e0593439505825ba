import numpy as np
import pytest
from hypothesis import given, strategies as st

from qicost.costs import (
    Decomposition,
    ProcessStep,
    TwoWayProcess,
    UnsafeProtocolError,
    cic,
    cric,
    decomposition_family,
    flow_lemma_terms,
    hic,
    hybrid_costs,
    info_costs,
    no_forget_certify,
    protocol_flow_residual,
    qic,
    superposed_costs,
    superposed_terms,
)
from qicost.generators import (
    random_distribution,
    random_process,
    random_product_distribution,
    random_protocol,
    random_pure_state,
    stream,
)
from qicost.library import and_table, bounce, send_input, send_x_classical, send_x_compute
from qicost.linalg import shannon_entropy
from qicost.protocol import QuantumProtocol, run_trace
from qicost.state import InputDistribution
from qicost.transforms import clean_protocol, quantize_classical, reverse_composition, safe_version

U = InputDistribution.uniform(2, 2)
D = InputDistribution.diagonal(2)
seeds = st.integers(0, 10**6)


def trace(p, mu=U):
    return run_trace(p, mu)


def test_qic_send_input():
    assert qic(trace(send_input(2), D)).total == pytest.approx(1)
    assert qic(trace(send_input(2), U)).total == pytest.approx(2)
    assert qic(trace(QuantumProtocol(2, 2))).total == 0


def test_safe_copy_costs():
    tr = trace(send_input(2, copy=True))
    assert cic(tr).a_to_b == pytest.approx(1)
    assert cric(tr).total == pytest.approx(0, abs=1e-12)
    rep = info_costs(trace(QuantumProtocol(2, 2)))
    assert all(v == 0 for v in rep.measures().values())


def test_returned_input_shows_up_as_reverse_cost():
    tr = trace(safe_version(bounce(copy=False)))
    c = cric(tr)
    assert c.a_to_b == pytest.approx(1)
    assert [t.value for t in c.terms_a_to_b] == pytest.approx([1])


def test_unsafe_protocols_only_have_qic():
    tr = trace(send_input(2))
    with pytest.raises(UnsafeProtocolError):
        cic(tr)
    rep = info_costs(tr)
    assert not rep.safe and rep.residuals() == {}


def test_hic_of_kept_copy_is_conditional_entropy(rng):
    mu = random_distribution(rng, 2, 2)
    h_x_given_y = shannon_entropy(mu.probs) - shannon_entropy(mu.mu_y)
    assert hic(trace(send_input(2, copy=True), mu)).a_to_b == pytest.approx(h_x_given_y, abs=1e-10)


def test_hic_zero_when_everything_is_uncomputed():
    # forward then backward with nothing kept: the final state is the initial one
    p = reverse_composition(send_x_compute(and_table()))
    h = hic(trace(p, random_distribution(np.random.default_rng(3), 2, 2)))
    assert h.a_to_b == pytest.approx(0, abs=1e-10)
    assert h.b_to_a == pytest.approx(0, abs=1e-10)
    # keeping the answer leaves information behind
    kept = hic(trace(clean_protocol(send_x_compute(and_table())), U))
    assert kept.a_to_b > 0.1


@pytest.mark.parametrize("m", [1, 2])
def test_hic_of_bounced_copy_counts_bits(m):
    d = 2**m
    p = safe_version(bounce(d, 2, copy=True))
    assert hic(trace(p, InputDistribution.uniform(d, 2))).a_to_b == pytest.approx(m)


@given(seeds)
def test_identities_on_random_safe_protocols(seed):
    rng = stream(seed)
    p = random_protocol(rng, safe=True)
    rep = info_costs(trace(p, random_distribution(rng, 2, 2)))
    for name, v in rep.residuals().items():
        assert v <= 1e-8, name
    assert rep.qic.total >= -1e-10
    # every term is at most 2 lg dim(message)
    assert rep.qic.total <= 2 * rep.qcc["total"] + 1e-9


@given(seeds)
def test_superposed_split_on_product_inputs(seed):
    rng = stream(seed)
    p = random_protocol(rng, safe=True)
    tr = trace(p, random_product_distribution(rng, 2, 2))
    s = superposed_costs(tr)
    q = qic(tr)
    assert q.total == pytest.approx(s.scic.total + s.scric.total, abs=1e-8)
    assert s.shic.a_to_b == pytest.approx(s.scic.a_to_b - s.scric.a_to_b, abs=1e-8)
    assert s.shic.b_to_a == pytest.approx(s.scic.b_to_a - s.scric.b_to_a, abs=1e-8)


def test_superposed_costs_need_product_distribution():
    tr = trace(send_input(2, copy=True), D)
    with pytest.raises(ValueError):
        superposed_costs(tr)
    assert superposed_terms(tr).scic.total >= 0
    zero = superposed_costs(trace(QuantumProtocol(2, 2)))
    assert zero.scic.total == zero.scric.total == 0


@given(seeds)
def test_hybrid_identity(seed):
    rng = stream(seed)
    p = random_protocol(rng, safe=True, x_dim=4, y_dim=4, max_messages=2)
    d = Decomposition(rng.dirichlet(np.ones(4)).reshape(2, 2), rng.dirichlet(np.ones(4)).reshape(2, 2))
    assert hybrid_costs(trace(p, d.distribution()), d).residual <= 1e-9


def test_hybrid_with_classical_factor_only_is_the_classical_family(rng):
    p = random_protocol(rng, 2, safe=True)
    mu = random_distribution(rng, 2, 2)
    d = Decomposition(mu.probs, [[1.0]])
    tr = trace(p, mu)
    h = hybrid_costs(tr, d)
    c, r, hh = cic(tr), cric(tr), hic(tr)
    assert h.hcic.total == pytest.approx(c.total, abs=1e-9)
    assert h.hcric.total == pytest.approx(r.total, abs=1e-9)
    assert h.hhic.a_to_b == pytest.approx(hh.a_to_b, abs=1e-9)
    assert h.hhic.b_to_a == pytest.approx(hh.b_to_a, abs=1e-9)


def test_hybrid_with_superposed_factor_only_matches_superposed(rng):
    # X = X1 (all of X) x X2 (trivial), Y = Y1 (trivial) x Y2 (all of Y)
    p = random_protocol(rng, 2, safe=True)
    mx, my = rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(2))
    d = Decomposition(mx.reshape(2, 1), my.reshape(1, 2))
    tr = trace(p, d.distribution())
    h, s = hybrid_costs(tr, d), superposed_costs(tr)
    assert h.hcic.a_to_b == pytest.approx(s.scic.a_to_b, abs=1e-9)
    assert h.hcric.a_to_b == pytest.approx(s.scric.a_to_b, abs=1e-9)
    assert h.hhic.a_to_b == pytest.approx(s.shic.a_to_b, abs=1e-9)


def test_hybrid_rejects_mismatched_inputs(rng):
    p = random_protocol(rng, 1, safe=True)
    d = Decomposition(np.full((2, 2), 0.25), np.full((2, 2), 0.25))
    with pytest.raises(ValueError):
        hybrid_costs(trace(p), d)


def test_flow_without_communication():
    init = random_pure_state(np.random.default_rng(0), [("A0", 2), ("B0", 2), ("E", 2), ("F", 2)])
    proc = TwoWayProcess(init, ("A0",), ("B0",), (ProcessStep(),))
    fc = flow_lemma_terms(proc, ("E",), ("F",))
    assert fc.lhs == pytest.approx(0, abs=1e-12) and fc.rhs == 0


@given(seeds)
def test_flow_identity_on_random_processes(seed):
    proc, e, f = random_process(stream(seed))
    assert flow_lemma_terms(proc, e, f).residual <= 1e-8


@given(seeds)
def test_flow_identity_on_protocol_runs(seed):
    rng = stream(seed)
    p = random_protocol(rng, safe=bool(seed % 2))
    tr = trace(p, random_distribution(rng, 2, 2))
    assert protocol_flow_residual(tr).residual <= 1e-8
    assert protocol_flow_residual(tr, ("RY",), ("RX",)).residual <= 1e-8


def test_no_forget_quantized_classical_structural():
    rep = no_forget_certify(quantize_classical(send_x_classical(and_table())))
    assert rep.certified and rep.criterion == "structural"


def test_no_forget_rejects_returned_message():
    p = safe_version(bounce(copy=False))
    rep = no_forget_certify(p, decomposition_family(2, 2))
    assert not rep.certified
    assert rep.max_hcric > 0.5 and rep.witness is not None
    assert "not certified" in rep.summary()


def test_no_forget_empty_protocol():
    assert no_forget_certify(QuantumProtocol(2, 2)).certified
