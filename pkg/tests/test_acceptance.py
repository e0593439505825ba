"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line. Two stated
bounds do not hold on their natural corpora; those tests are strict xfails
(they must keep failing) and the attainable parts are separate passing tests.
The analysis for both is in the README.
"""

import time

import numpy as np
import pytest

from qicost.classical import (
    classical_channel,
    ic,
    pad_messages,
    canonical_randomness_form,
    ric,
    run_reversible,
    safe_reversible,
    tensor_product,
    transcript_distribution,
    unforget_simulation,
)
from qicost.costs import (
    decomposition_family,
    flow_lemma_residual,
    hybrid_costs,
    info_costs,
    no_forget_certify,
    qic,
    superposed_costs,
)
from qicost.experiments import (
    appendix_inequality_suite,
    full_matrix_phase_entropy,
    ip_report,
    phase_entropy,
    random_function_experiment,
)
from qicost.generators import (
    random_and_protocol,
    random_classical_protocol,
    random_distribution,
    random_extension,
    random_process,
    random_product_distribution,
    random_protocol,
    random_reversible_protocol,
    stream,
)
from qicost.library import and_table, bounce, exchange_classical, send_input, send_x_classical, send_x_compute
from qicost.protocol import channel_of, run_trace
from qicost.state import InputDistribution
from qicost.transforms import (
    clean_fidelity,
    clean_protocol,
    phase_protocol,
    quantize_classical,
    safe_version,
    simulate_classical,
)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return emit


def _qic(p, mu):
    return qic(run_trace(p, mu)).total


def _max_diff(a: dict, b: dict) -> float:
    return max((abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b)), default=0.0)


def test_criterion_1_flow_identity(report):
    start = time.perf_counter()
    worst = 0.0
    for i in range(500):
        proc, e, f = random_process(stream(1, i), max_steps=3)
        worst = max(worst, flow_lemma_residual(proc, e, f))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed <= 60
    report(1, ok, f"500 processes, max residual {worst:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_2_input_copy_examples(report):
    U, D = InputDistribution.uniform(2, 2), InputDistribution.diagonal(2)
    cases = [
        ("send X, X=Y", send_input(2), D, 1.0, 0.0),
        ("send X, independent", send_input(2), U, 2.0, 1.0),
        ("bounce uncopied", bounce(copy=False), U, 4.0, 2.0),
    ]
    for r in (1, 2, 3):
        cases.append((f"bounce copied r={r}", bounce(bounces=r), U, 2 * r + 1.0, 1.0))
    bad = []
    for name, p, mu, want, want_safe in cases:
        got, got_safe = _qic(p, mu), _qic(safe_version(p), mu)
        if abs(got - want) > 1e-9 or abs(got_safe - want_safe) > 1e-9:
            bad.append(f"{name}: {got} vs {got_safe}")
    report(2, not bad, f"{len(cases)} examples" + (f", mismatches {bad}" if bad else ""))
    assert not bad


def test_criterion_3_identity_suite(report):
    worst = {}

    def upd(k, v):
        worst[k] = max(worst.get(k, 0.0), v)

    for i in range(200):
        rng = stream(3, i)
        p = random_protocol(rng, safe=True, max_messages=3)
        mu = random_product_distribution(rng, 2, 2) if i % 2 == 0 else random_distribution(rng, 2, 2)
        tr = run_trace(p, mu)
        rep = info_costs(tr)
        for k, v in rep.residuals().items():
            upd(k, v)
        if i % 2 == 0:
            s = superposed_costs(tr)
            upd("superposed", abs(rep.qic.total - (s.scic.total + s.scric.total)))
        d = decomposition_family(2, 2, rng)[int(rng.integers(0, 8))]
        upd("hybrid", hybrid_costs(run_trace(p, d.distribution()), d).residual)
    ok = max(worst.values()) <= 1e-8
    report(3, ok, "200 safe protocols, max residuals " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_4_safe_copy_monotone(report):
    worst_up, worst_eq = -np.inf, 0.0
    for i in range(200):
        rng = stream(4, i)
        p = random_protocol(rng, safe=bool(rng.random() < 0.3))
        mu = random_distribution(rng, 2, 2)
        worst_up = max(worst_up, _qic(safe_version(p), mu) - _qic(p, mu))
    for i in range(100):
        rng = stream(40, i)
        p = random_protocol(rng, safe=True)
        mu = random_distribution(rng, 2, 2)
        worst_eq = max(worst_eq, abs(_qic(safe_version(p), mu) - _qic(p, mu)))
    ok = worst_up <= 1e-8 and worst_eq <= 1e-8
    report(4, ok, f"max QIC(safe) - QIC {worst_up:.2e}; already-safe max change {worst_eq:.2e}")
    assert ok


def test_criterion_5_classical_simulation(report):
    worst = {"qic-ic": 0.0, "channel": 0.0, "cric": 0.0, "qcc-cc": 0.0}
    coin_sizes = 0
    for i in range(100):
        rng = stream(5, i)
        order = ("alternating", "fixed", "variable")[i % 3]
        rounds = int(rng.integers(1, 3 if order == "variable" else 4))
        pi = random_classical_protocol(rng, rounds, order=order, coins="none" if i % 5 == 0 else "per_round",
                                       public=i % 4 == 0)
        mu = random_distribution(rng, 2, 2)
        padded = pad_messages(pi)
        canon = canonical_randomness_form(padded)
        coin_sizes = max([coin_sizes] + [c.size for c in canon.coins_a + canon.coins_b])
        q = quantize_classical(canon)
        tr = run_trace(q, mu)
        rep = info_costs(tr)
        worst["qic-ic"] = max(worst["qic-ic"], abs(rep.qic.total - ic(pi, mu).total))
        worst["cric"] = max(worst["cric"], rep.cric.total)
        worst["channel"] = max(worst["channel"], float(np.max(np.abs(channel_of(q, mu, trace=tr) - classical_channel(pi, mu)))))
        worst["qcc-cc"] = max(worst["qcc-cc"], abs(q.qcc()["total"] - padded.cc()))
    ok = (worst["qic-ic"] <= 1e-8 and worst["channel"] <= 1e-9 and worst["cric"] <= 1e-8
          and worst["qcc-cc"] <= 1e-12 and coin_sizes <= 2)
    report(5, ok, "100 protocols, " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
           + f", largest canonical coin {coin_sizes} values")
    assert ok


def _reversible_pairs(count=100, seed=11):
    for i in range(count):
        rng = stream(seed, i)
        m = int(rng.integers(1, 4))
        rp1 = random_reversible_protocol(rng, m, public=i % 3 == 0)
        rp2 = random_reversible_protocol(rng, m)
        yield rng, rp1, rp2, random_distribution(rng, 2, 2), random_distribution(rng, 2, 2)


def test_criterion_6_reversible_suite(report):
    worst = {"extension": 0.0, "safe": -np.inf, "subadditivity": -np.inf, "transcript": 0.0}
    for rng, rp1, rp2, mu1, mu2 in _reversible_pairs():
        r1 = ric(rp1, mu1).total
        worst["extension"] = max(worst["extension"], abs(ric(rp1, mu1, random_extension(rng, mu1, 3)).total - r1))
        s1 = safe_reversible(rp1)
        worst["safe"] = max(worst["safe"], ric(s1, mu1).total - r1)
        mu12 = InputDistribution(np.einsum("ac,bd->abcd", mu1.probs, mu2.probs).reshape(4, 4))
        worst["subadditivity"] = max(worst["subadditivity"],
                                     ric(tensor_product(rp1, rp2), mu12).total - r1 - ric(rp2, mu2).total)
        run = run_reversible(s1, mu1)
        sent = run.table.distribution([s["message"][0] for s in run.snapshots])
        worst["transcript"] = max(worst["transcript"], _max_diff(transcript_distribution(unforget_simulation(s1), mu1), sent))
    ok = (worst["extension"] <= 1e-10 and worst["safe"] <= 1e-10 and worst["subadditivity"] <= 1e-9
          and worst["transcript"] <= 1e-12)
    report(6, ok, "100 pairs (extension, safe, subadditivity, transcripts): "
           + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


@pytest.mark.xfail(strict=True, reason="IC(unforget_simulation) <= RIC fails when randomness is given away")
def test_criterion_6_unforget_bound(report):
    worst, bad = -np.inf, 0
    for _, rp1, _, mu1, _ in _reversible_pairs():
        s1 = safe_reversible(rp1)
        excess = ic(unforget_simulation(s1), mu1).total - ric(s1, mu1).total
        worst = max(worst, excess)
        bad += excess > 1e-10
    # supplementary: the deterministic class meets the bound
    det = -np.inf
    for i in range(100):
        rng = stream(13, i)
        s = safe_reversible(random_reversible_protocol(rng, int(rng.integers(1, 5)), coins=False, max_inputs=3))
        mu = random_distribution(rng, 2, 2)
        det = max(det, ic(unforget_simulation(s), mu).total - ric(s, mu).total)
    ok = bad == 0
    report(6, ok, f"unforget bound IC <= RIC: {bad}/100 violations, worst excess {worst:.3f} bits "
           f"(deterministic protocols: worst excess {det:.1e}, bound holds)")
    assert det <= 1e-10
    assert ok


def test_criterion_7_clean_and_phase(report):
    worst_q, worst_f = 0.0, 0.0
    for i in range(20):
        rng = stream(7, i)
        n = 1 + i % 2
        f = rng.integers(0, 2, size=(2**n, 2**n))
        p = send_x_compute(f) if i % 4 < 2 else quantize_classical(send_x_classical(f))
        mu = random_distribution(rng, 2**n, 2**n)
        base = _qic(p, mu)
        for mode, t in (("clean", clean_protocol(p, f)), ("phase", phase_protocol(p, f))):
            worst_q = max(worst_q, abs(qic(run_trace(t, mu)).a_to_b - base))
            worst_f = max(worst_f, 1 - clean_fidelity(t, mu, f, mode))
    ok = worst_q <= 1e-8 and worst_f <= 1e-10
    report(7, ok, f"20 protocols, max |QIC_A->B(transformed) - QIC| {worst_q:.1e}, max 1 - fidelity {worst_f:.1e}")
    assert ok


def test_criterion_8_inner_product(report):
    vals, t4 = [], 0.0
    ok = True
    for n in range(1, 5):
        rep = ip_report(n)
        vals.append((rep.values["phase_entropy"], rep.values["qic"]))
        ok &= abs(rep.values["phase_entropy"] - n) <= 1e-9 and abs(rep.values["qic"] - n) <= 1e-8
        if n == 4:
            t4 = rep.wall_clock
    ok &= t4 <= 30
    report(8, ok, "n=1..4 (H, QIC) = " + ", ".join(f"({h:.9f}, {q:.9f})" for h, q in vals) + f", n=4 in {t4:.2f} s")
    assert ok


def test_criterion_9_random_functions(report):
    rep = random_function_experiment(3, 200, seed=9)
    dev = 0.0
    for n in (1, 2):
        for i in range(20):
            f = stream(90 + n, i).integers(0, 2, size=(2**n, 2**n))
            dev = max(dev, abs(phase_entropy(f) - full_matrix_phase_entropy(f)))
    dev = max(dev, rep.values["max_full_matrix_deviation"])
    ok = rep.ok and dev <= 1e-9
    v = rep.values
    report(9, ok, f"n=3, 200 samples, H2 <= H <= 3 on all, Gram vs full {dev:.1e}; "
           f"reported: P[H2 < {v['threshold']:.3f}] = {v['violation_fraction']:.3f}, tail bound {v['tail_bound']:.3g}")
    assert ok


def _and_corpus():
    """50 certified AND protocols: the two basic ones plus random prefixes."""
    f = and_table()
    protos = [quantize_classical(send_x_classical(f)), quantize_classical(exchange_classical(f))]
    i = 0
    while len(protos) < 50:
        protos.append(simulate_classical(random_and_protocol(stream(10, i))))
        i += 1
    for p in protos:
        assert no_forget_certify(p).certified
    return protos


def _with_mass(rng, w):
    v = rng.dirichlet(np.ones(3))
    probs = np.array([[v[0], v[1]], [v[2], 0.0]]) * (1 - w)
    probs[1, 1] = w
    return InputDistribution(probs)


def _convexity_checks():
    diag = InputDistribution(np.array([[0.5, 0], [0, 0.5]]))
    anti = InputDistribution(np.array([[0, 0.5], [0.5, 0]]))
    results = []
    for k, p in enumerate(_and_corpus()):
        rng = stream(100, k)
        for w in (0.0, 1 / 8, 1 / 4, 1 / 2):
            splits = [(prob, random_distribution(rng, 2, 2), random_distribution(rng, 2, 2)) for prob in (0.25, 0.5)]
            if k < 2:
                splits.append((0.5, diag, anti))
            results += appendix_inequality_suite(p, _with_mass(rng, w), splits)
    return results


@pytest.fixture(scope="module")
def convexity_results():
    return _convexity_checks()


def test_criterion_10_corrected_and_lower_bounds(report, convexity_results):
    kinds = ("lower", "upper_two_sided", "upper_a_to_b", "upper_b_to_a", "mass_shift_two_sided", "mass_shift_equality")
    sel = [c for c in convexity_results if c.name.split(":")[-1].split("(")[0] in kinds]
    bad = [c for c in sel if not c.holds]
    report(10, not bad, f"supplementary: quasi-convexity lower bound and per-direction (2 H) upper bounds hold "
           f"on {len(sel)} checks over 50 protocols")
    assert not bad


@pytest.mark.xfail(strict=True, reason="the single-H(p) and single-H(w) upper bounds fail on exchange AND")
def test_criterion_10_stated_bounds(report, convexity_results):
    sel = [c for c in convexity_results if c.name.endswith(":upper") or c.name.startswith("mass_shift(")]
    bad = [c for c in sel if not c.holds]
    worst = max(c.lhs - c.rhs for c in sel)
    report(10, not bad, f"stated upper bounds (single H): {len(bad)}/{len(sel)} violations, worst excess {worst:.3f} bits")
    assert not bad
