"""Information-cost functionals over protocol traces.

Every cost is a sum of conditional mutual informations evaluated on the
round states of a trace. Conditioning sets always come from the trace's
holdings: for a message sent at some round, the receiver's holdings exclude
the message itself, and the sender's holdings are what the sender keeps
after sending.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .linalg import cqmi
from .protocol import (
    ALICE,
    BOB,
    REFERENCES,
    Isometry,
    ModelContractError,
    ProtocolTrace,
    QuantumProtocol,
    run_trace,
    validate_protocol,
)
from .state import InputDistribution, PureState

__all__ = [
    "UnsafeProtocolError",
    "Term",
    "Directional",
    "InfoCostReport",
    "qic",
    "cic",
    "cric",
    "hic",
    "info_costs",
    "SuperposedReport",
    "superposed_costs",
    "superposed_terms",
    "Decomposition",
    "HybridReport",
    "hybrid_costs",
    "decomposition_family",
    "ProcessStep",
    "TwoWayProcess",
    "FlowCheck",
    "flow_lemma_terms",
    "flow_lemma_residual",
    "protocol_flow_residual",
    "NoForgetReport",
    "no_forget_certify",
    "structural_no_forget",
]


class UnsafeProtocolError(ModelContractError):
    """A safe-protocol cost was requested for an unsafe protocol."""


@dataclass(frozen=True)
class Term:
    message: int  # 1-based message number
    sender: str
    value: float


@dataclass(frozen=True)
class Directional:
    """A cost split by direction.

    For forward costs ``a_to_b`` collects Alice's messages; for reverse costs
    (CRIC and its variants) ``a_to_b`` holds the "A from B" part, i.e. Bob's
    messages measured against X, and ``b_to_a`` the "B from A" part.
    """

    a_to_b: float
    b_to_a: float
    terms_a_to_b: tuple[Term, ...] = ()
    terms_b_to_a: tuple[Term, ...] = ()

    @property
    def total(self) -> float:
        return self.a_to_b + self.b_to_a

    @property
    def terms(self) -> tuple[Term, ...]:
        return tuple(sorted(self.terms_a_to_b + self.terms_b_to_a, key=lambda t: t.message))


def _directional(a_terms: list[Term], b_terms: list[Term]) -> Directional:
    return Directional(
        float(sum(t.value for t in a_terms)),
        float(sum(t.value for t in b_terms)),
        tuple(a_terms),
        tuple(b_terms),
    )


def _require_safe(trace: ProtocolTrace, what: str):
    if not trace.protocol.is_safe():
        raise UnsafeProtocolError(
            f"{what} is defined for safe protocols only; convert with transforms.safe_version first"
        )


def qic(trace: ProtocolTrace) -> Directional:
    """Per message: I(C; RX RY | receiver's holdings)."""
    a, b = [], []
    for st in trace.steps:
        s = trace.states[st.state_index]
        v = cqmi(s, {st.register}, set(REFERENCES), st.receiver_holdings)
        (a if st.sender == ALICE else b).append(Term(st.index, st.sender, v))
    return _directional(a, b)


def cic(trace: ProtocolTrace) -> Directional:
    """Alice's messages: I(C; X | Bob's holdings); Bob's: I(C; Y | Alice's)."""
    _require_safe(trace, "CIC")
    a, b = [], []
    for st in trace.steps:
        s = trace.states[st.state_index]
        target = "X" if st.sender == ALICE else "Y"
        v = cqmi(s, {st.register}, {target}, st.receiver_holdings)
        (a if st.sender == ALICE else b).append(Term(st.index, st.sender, v))
    return _directional(a, b)


def cric(trace: ProtocolTrace) -> Directional:
    """Bob's messages: I(C; X | Bob's kept holdings) (A from B);
    Alice's messages: I(C; Y | Alice's kept holdings) (B from A)."""
    _require_safe(trace, "CRIC")
    a_from_b, b_from_a = [], []
    for st in trace.steps:
        s = trace.states[st.state_index]
        target = "Y" if st.sender == ALICE else "X"
        v = cqmi(s, {st.register}, {target}, st.sender_holdings)
        (b_from_a if st.sender == ALICE else a_from_b).append(Term(st.index, st.sender, v))
    return _directional(a_from_b, b_from_a)


def hic(trace: ProtocolTrace) -> Directional:
    """I(X; Bob's final registers | Y) and I(Y; Alice's final registers | X)."""
    _require_safe(trace, "HIC")
    s = trace.final
    fin = trace.final_holdings
    ab = cqmi(s, {"X"}, fin[BOB] - {"Y"}, {"Y"})
    ba = cqmi(s, {"Y"}, fin[ALICE] - {"X"}, {"X"})
    return Directional(ab, ba)


@dataclass
class InfoCostReport:
    qic: Directional
    cic: Directional | None = None
    cric: Directional | None = None
    hic: Directional | None = None
    qcc: dict = field(default_factory=dict)

    @property
    def safe(self) -> bool:
        return self.cic is not None

    def measures(self) -> dict[str, float]:
        """Flat name -> value map in a fixed order."""
        out = {
            "qic_a_to_b": self.qic.a_to_b,
            "qic_b_to_a": self.qic.b_to_a,
            "qic": self.qic.total,
        }
        if self.safe:
            out.update(
                cic_a_to_b=self.cic.a_to_b,
                cic_b_to_a=self.cic.b_to_a,
                cic=self.cic.total,
                cric_a_from_b=self.cric.a_to_b,
                cric_b_from_a=self.cric.b_to_a,
                cric=self.cric.total,
                hic_a_to_b=self.hic.a_to_b,
                hic_b_to_a=self.hic.b_to_a,
                hic=self.hic.total,
            )
        if self.qcc:
            out.update(qcc_a_to_b=self.qcc["a_to_b"], qcc_b_to_a=self.qcc["b_to_a"], qcc=self.qcc["total"])
        return out

    def residuals(self) -> dict[str, float]:
        """Deviations from the exact identities (all should be ~0).

        identity_a: HIC = CIC - CRIC per direction; identity_b: QIC = CIC + CRIC
        per direction; sandwich: how far QIC falls outside [CIC, 2 CIC]
        (0 when inside).
        """
        if not self.safe:
            return {}
        q, c, r, h = self.qic, self.cic, self.cric, self.hic
        return {
            "identity_a_a_to_b": abs(h.a_to_b - (c.a_to_b - r.a_to_b)),
            "identity_a_b_to_a": abs(h.b_to_a - (c.b_to_a - r.b_to_a)),
            "identity_b_a_to_b": abs(q.a_to_b - (c.a_to_b + r.b_to_a)),
            "identity_b_b_to_a": abs(q.b_to_a - (c.b_to_a + r.a_to_b)),
            "sandwich": max(0.0, c.total - q.total, q.total - 2 * c.total),
        }


def info_costs(trace: ProtocolTrace) -> InfoCostReport:
    """Everything computable for this trace: QIC always, the classical-input
    family only when the protocol is safe."""
    rep = InfoCostReport(qic=qic(trace), qcc=trace.protocol.qcc())
    if trace.protocol.is_safe():
        rep.cic, rep.cric, rep.hic = cic(trace), cric(trace), hic(trace)
    return rep


# -- superposed inputs ------------------------------------------------------


@dataclass(frozen=True)
class SuperposedReport:
    scic: Directional
    scric: Directional  # a_to_b field = SCRIC_{A<-B}, b_to_a = SCRIC_{B<-A}
    shic: Directional


def superposed_terms(trace: ProtocolTrace) -> SuperposedReport:
    """The superposed-input sums without checking that mu is a product.

    Alice's messages: SCIC term I(C; X | RY, Bob's holdings), SCRIC term
    I(C; Y | RX, Alice's kept holdings); Bob's messages symmetrically.
    """
    _require_safe(trace, "superposed costs")
    scic_a, scic_b, scric_ab, scric_ba = [], [], [], []
    for st in trace.steps:
        s = trace.states[st.state_index]
        c = {st.register}
        if st.sender == ALICE:
            scic_a.append(Term(st.index, ALICE, cqmi(s, c, {"X"}, st.receiver_holdings | {"RY"})))
            scric_ba.append(Term(st.index, ALICE, cqmi(s, c, {"Y"}, st.sender_holdings | {"RX"})))
        else:
            scic_b.append(Term(st.index, BOB, cqmi(s, c, {"Y"}, st.receiver_holdings | {"RX"})))
            scric_ab.append(Term(st.index, BOB, cqmi(s, c, {"X"}, st.sender_holdings | {"RY"})))
    fin, s = trace.final_holdings, trace.final
    shic = Directional(
        cqmi(s, {"X"}, fin[BOB] | {"RY"}, ()),
        cqmi(s, {"Y"}, fin[ALICE] | {"RX"}, ()),
    )
    return SuperposedReport(_directional(scic_a, scic_b), _directional(scric_ab, scric_ba), shic)


def superposed_costs(trace: ProtocolTrace, tol: float = 1e-10) -> SuperposedReport:
    if not trace.mu.is_product(tol):
        raise ValueError(
            "superposed costs are interpreted only for product distributions; "
            "use superposed_terms for the formal sums"
        )
    return superposed_terms(trace)


# -- hybrid inputs ----------------------------------------------------------


class Decomposition:
    """X = X1 (x) X2, Y = Y1 (x) Y2 with mu = mu1(X1 Y1) (x) mu2(X2 Y2).

    Indices are big-endian: x = x1 * |X2| + x2, likewise for y.
    """

    def __init__(self, mu1, mu2):
        self.mu1 = InputDistribution(mu1)
        self.mu2 = InputDistribution(mu2)

    @property
    def x_dims(self) -> tuple[int, int]:
        return self.mu1.x_dim, self.mu2.x_dim

    @property
    def y_dims(self) -> tuple[int, int]:
        return self.mu1.y_dim, self.mu2.y_dim

    def __repr__(self):
        return f"Decomposition(X={self.x_dims}, Y={self.y_dims})"

    def distribution(self) -> InputDistribution:
        (a1, a2), (b1, b2) = self.x_dims, self.y_dims
        p = np.einsum("ac,bd->abcd", self.mu1.probs, self.mu2.probs).reshape(a1 * a2, b1 * b2)
        return InputDistribution(p)


@dataclass(frozen=True)
class HybridReport:
    hcic: Directional
    hcric: Directional  # a_to_b = HCRIC_{A<-B}, b_to_a = HCRIC_{B<-A}
    hhic: Directional
    residual: float  # max directional |HHIC - (HCIC - HCRIC)|


_SPLIT = {"X": ("X1", "X2"), "RX": ("RX1", "RX2"), "Y": ("Y1", "Y2"), "RY": ("RY1", "RY2")}


def _split_state(s: PureState, d: Decomposition) -> PureState:
    dims = {"X": d.x_dims, "RX": d.x_dims, "Y": d.y_dims, "RY": d.y_dims}
    for name, (n1, n2) in _SPLIT.items():
        if name in s.system:
            d1, d2 = dims[name]
            s = s.split(name, [(n1, d1), (n2, d2)])
    return s


def _split_set(regs: Iterable[str]) -> set[str]:
    out = set()
    for r in regs:
        out.update(_SPLIT.get(r, (r,)))
    return out


def hybrid_costs(trace: ProtocolTrace, d: Decomposition, tol: float = 1e-10) -> HybridReport:
    """Hybrid costs: X1, Y1 treated as classical inputs, X2, Y2 in superposition.

    Alice's message C with Bob holding B: HCIC term I(C; X1 | RX2 RY2 Y1 Y2 B),
    HCRIC term I(C; Y1 | RY2 RX2 X1 X2 A) with A Alice's kept registers; Bob's
    messages are the mirror image.
    """
    _require_safe(trace, "hybrid costs")
    p = trace.protocol
    if (d.x_dims[0] * d.x_dims[1], d.y_dims[0] * d.y_dims[1]) != (p.x_dim, p.y_dim):
        raise ValueError(f"{d} does not factor the inputs ({p.x_dim}, {p.y_dim})")
    if np.max(np.abs(d.distribution().probs - trace.mu.probs)) > tol:
        raise ValueError("trace was not run on the decomposition's product distribution")
    cache: dict[int, PureState] = {}

    def state(i):
        if i not in cache:
            cache[i] = _split_state(trace.states[i], d)
        return cache[i]

    hcic_a, hcic_b, hcric_ab, hcric_ba = [], [], [], []
    bob_ref = {"RX2", "RY2"}
    alice_ref = {"RY2", "RX2"}
    for st in trace.steps:
        s = state(st.state_index)
        c = {st.register}
        recv, send = _split_set(st.receiver_holdings), _split_set(st.sender_holdings)
        if st.sender == ALICE:
            hcic_a.append(Term(st.index, ALICE, cqmi(s, c, {"X1"}, recv | bob_ref)))
            hcric_ba.append(Term(st.index, ALICE, cqmi(s, c, {"Y1"}, send | alice_ref)))
        else:
            hcic_b.append(Term(st.index, BOB, cqmi(s, c, {"Y1"}, recv | alice_ref)))
            hcric_ab.append(Term(st.index, BOB, cqmi(s, c, {"X1"}, send | bob_ref)))
    fin = trace.final_holdings
    s = state(len(trace.states) - 1)
    bob_fin = _split_set(fin[BOB]) - {"Y1"}
    alice_fin = _split_set(fin[ALICE]) - {"X1"}
    hhic = Directional(
        cqmi(s, {"X1"}, bob_fin | {"RY2"}, {"Y1", "RX2"}),
        cqmi(s, {"Y1"}, alice_fin | {"RX2"}, {"X1", "RY2"}),
    )
    hcic = _directional(hcic_a, hcic_b)
    hcric = _directional(hcric_ab, hcric_ba)
    residual = max(
        abs(hhic.a_to_b - (hcic.a_to_b - hcric.a_to_b)),
        abs(hhic.b_to_a - (hcic.b_to_a - hcric.b_to_a)),
    )
    return HybridReport(hcic, hcric, hhic, residual)


def _divisor_pairs(n: int) -> list[tuple[int, int]]:
    return [(a, n // a) for a in range(1, n + 1) if n % a == 0]


def decomposition_family(x_dim: int, y_dim: int, rng: np.random.Generator | None = None,
                         random_per_split: int = 1) -> list[Decomposition]:
    """Every factorisation of the input alphabets, each with the uniform
    distribution and ``random_per_split`` random product distributions."""
    rng = rng if rng is not None else np.random.default_rng(0)
    fam = []
    for x1, x2 in _divisor_pairs(x_dim):
        for y1, y2 in _divisor_pairs(y_dim):
            fam.append(Decomposition(np.full((x1, y1), 1 / (x1 * y1)), np.full((x2, y2), 1 / (x2 * y2))))
            for _ in range(random_per_split):
                m1 = rng.dirichlet(np.ones(x1 * y1)).reshape(x1, y1)
                m2 = rng.dirichlet(np.ones(x2 * y2)).reshape(x2, y2)
                fam.append(Decomposition(m1, m2))
    return fam


# -- information flow -------------------------------------------------------


@dataclass(frozen=True)
class ProcessStep:
    """Simultaneous local isometries; ``alice_message`` (an output of Alice's
    map) goes to Bob, ``bob_message`` to Alice. Either map may be absent."""

    alice: Isometry | None = None
    bob: Isometry | None = None
    alice_message: str | None = None
    bob_message: str | None = None


@dataclass(frozen=True)
class TwoWayProcess:
    initial: PureState
    alice_registers: tuple[str, ...]
    bob_registers: tuple[str, ...]
    steps: tuple[ProcessStep, ...] = ()


@dataclass(frozen=True)
class FlowCheck:
    lhs: float
    rhs: float
    terms: tuple[float, ...]

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def flow_lemma_terms(process: TwoWayProcess, e: Iterable[str], f: Iterable[str]) -> FlowCheck:
    """Both sides of the information-flow identity for Bob's knowledge of E
    given F: the change of I(E; Bob | F) against the per-step sum of
    I(E; C_i | F B_i) - I(E; D_i | F B_i)."""
    e, f = frozenset(e), frozenset(f)
    names = set(process.initial.names)
    for r in e | f:
        if r not in names:
            raise KeyError(f"unknown register {r!r}")
        if r in process.alice_registers or r in process.bob_registers:
            raise ModelContractError(f"extension register {r!r} is held by a party")
    for k, stp in enumerate(process.steps):
        for iso in (stp.alice, stp.bob):
            if iso is not None and (set(iso.in_names) | set(iso.out_names)) & (e | f):
                raise ModelContractError(f"step {k + 1} acts on an extension register")
    hold = {ALICE: set(process.alice_registers), BOB: set(process.bob_registers)}
    state = process.initial
    bob0 = frozenset(hold[BOB])
    terms = []
    for k, stp in enumerate(process.steps):
        for party, iso in ((ALICE, stp.alice), (BOB, stp.bob)):
            if iso is None:
                continue
            missing = set(iso.in_names) - hold[party]
            if missing:
                raise ModelContractError(f"step {k + 1}: {party} does not hold {sorted(missing)}")
            state = state.apply(iso.matrix, iso.in_names, iso.out_registers, partial=iso.partial)
            hold[party] = (hold[party] - set(iso.in_names)) | set(iso.out_names)
        c, dmsg = stp.alice_message, stp.bob_message
        bob_i = hold[BOB] - {dmsg} if dmsg else set(hold[BOB])
        t = 0.0
        if c is not None:
            t += cqmi(state, e, {c}, f | bob_i)
        if dmsg is not None:
            t -= cqmi(state, e, {dmsg}, f | bob_i)
        terms.append(t)
        if c is not None:
            hold[ALICE].discard(c)
            hold[BOB].add(c)
        if dmsg is not None:
            hold[BOB].discard(dmsg)
            hold[ALICE].add(dmsg)
    lhs = cqmi(state, e, hold[BOB], f) - cqmi(process.initial, e, bob0, f)
    return FlowCheck(lhs, float(sum(terms)), tuple(terms))


def flow_lemma_residual(process: TwoWayProcess, e: Iterable[str], f: Iterable[str]) -> float:
    return flow_lemma_terms(process, e, f).residual


def protocol_flow_residual(trace: ProtocolTrace, e: Sequence[str] = ("RX",),
                           f: Sequence[str] = ("RY",)) -> FlowCheck:
    """The identity for a protocol run, with extension registers taken among
    the references: Bob's gain about E given F equals the signed sum over
    messages (Alice's counted against Bob's holdings, Bob's against his kept
    holdings)."""
    e, f = frozenset(e), frozenset(f)
    if not (e | f) <= set(REFERENCES):
        raise ModelContractError("extension registers must be references in a protocol run")
    terms = []
    for st in trace.steps:
        s = trace.states[st.state_index]
        if st.sender == ALICE:
            terms.append(cqmi(s, e, {st.register}, f | st.receiver_holdings))
        else:
            terms.append(-cqmi(s, e, {st.register}, f | st.sender_holdings))
    lhs = cqmi(trace.final, e, trace.final_holdings[BOB], f) - cqmi(trace.states[0], e, trace.holdings[0][BOB], f)
    return FlowCheck(lhs, float(sum(terms)), tuple(terms))


# -- no-forget certification ------------------------------------------------


@dataclass
class NoForgetReport:
    certified: bool
    criterion: str  # "structural", "family" or "none"
    structural: bool
    structural_reasons: list[str]
    family_size: int = 0
    max_hcric: float | None = None
    witness: int | None = None  # index into the family of the worst decomposition

    def summary(self) -> str:
        if self.criterion == "structural":
            return "certified by the structural copy condition (a sufficient condition added here)"
        if self.criterion == "family":
            return f"certified by HCRIC <= tol on all {self.family_size} tested decompositions"
        extra = f"; max HCRIC {self.max_hcric:.3e} at decomposition {self.witness}" if self.max_hcric is not None else ""
        return "not certified" + extra


def structural_no_forget(p: QuantumProtocol) -> list[str]:
    """Reasons the structural no-forget condition fails (empty when it holds).

    The condition: the protocol is safe and every round is a classical
    append map, i.e. a basis-to-basis isometry that keeps every input as a
    control and only creates fresh registers, so each message is a copy of a
    value its sender still holds.
    """
    reasons = []
    if not p.is_safe():
        reasons.append("protocol is not safe")
    for k, r in enumerate(p.rounds):
        iso = r.isometry
        tag = f"round {k + 1}"
        if iso.partial or not iso.is_classical():
            reasons.append(f"{tag}: isometry is not a classical basis map")
        free = [n for n in iso.in_names if n not in r.controls]
        if free:
            reasons.append(f"{tag}: inputs {free} are not kept as controls")
        if r.message is not None and r.message in iso.in_names:
            reasons.append(f"{tag}: message {r.message!r} is sent without a retained copy")
    return reasons


def no_forget_certify(p: QuantumProtocol, family: Sequence[Decomposition] = (),
                      tol: float = 1e-8) -> NoForgetReport:
    """Certify that neither party forgets information.

    Passes when the structural condition holds, or when every decomposition
    in ``family`` has both hybrid reverse costs <= tol. When both are
    available the family acts as a cross-check and any violation wins.
    """
    validate_protocol(p).raise_if_invalid()
    reasons = structural_no_forget(p)
    rep = NoForgetReport(False, "none", not reasons, reasons, family_size=len(family))
    if family and p.is_safe():
        worst, idx = -np.inf, None
        for i, d in enumerate(family):
            tr = run_trace(p, d.distribution(), check=False)
            h = hybrid_costs(tr, d)
            v = max(h.hcric.a_to_b, h.hcric.b_to_a)
            if v > worst:
                worst, idx = v, i
        rep.max_hcric, rep.witness = float(worst), idx
        if worst > tol:
            return rep
        if not rep.structural:
            rep.certified, rep.criterion = True, "family"
            return rep
    if rep.structural:
        rep.certified, rep.criterion = True, "structural"
    return rep
