"""Two-party interactive protocols built from round isometries, and their
exact purified execution.

Alice initially holds the input register ``X`` and her share of the
entanglement; Bob holds ``Y`` and his share. Each round is an isometry
applied by its owner to registers they hold; a round may name one of its
output registers as the message, which then belongs to the other party.
The reference registers ``RX`` and ``RY`` of the canonical purification are
never acted on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .state import InputDistribution, PureState, Register, RegisterSystem, canonical_purification

__all__ = [
    "ALICE",
    "BOB",
    "INPUTS",
    "REFERENCES",
    "ProtocolError",
    "ModelContractError",
    "Isometry",
    "Round",
    "QuantumProtocol",
    "ValidationReport",
    "MessageStep",
    "ProtocolTrace",
    "validate_protocol",
    "run_trace",
    "channel_of",
    "output_distribution",
    "solves",
    "other_party",
]

ALICE, BOB = "A", "B"
INPUTS = {ALICE: "X", BOB: "Y"}
REFERENCES = ("RX", "RY")
ISOMETRY_TOL = 1e-10
NORM_TOL = 1e-10


class ProtocolError(ValueError):
    """The protocol violates the structural model (flow, isometry, order)."""


class ModelContractError(ValueError):
    """An operation's model precondition failed on a valid protocol."""


def other_party(p: str) -> str:
    return BOB if p == ALICE else ALICE


def _regs(regs) -> tuple[Register, ...]:
    out = []
    for r in regs:
        out.append(r if isinstance(r, Register) else Register(*r))
    return tuple(out)


def _prod(dims) -> int:
    return int(np.prod(list(dims), dtype=np.int64)) if len(dims) else 1


class Isometry:
    """A linear map from ``in_registers`` to ``out_registers``.

    ``matrix`` has shape dim(out) x dim(in) in big-endian register order.
    A ``partial`` operator is the adjoint of an isometry (V V^dag = I); it is
    only applied to states inside its support, which the runner checks.
    """

    def __init__(self, in_registers, out_registers, matrix, *, partial: bool = False):
        self.in_registers = _regs(in_registers)
        self.out_registers = _regs(out_registers)
        for regs in (self.in_registers, self.out_registers):
            names = [r.name for r in regs]
            if len(set(names)) != len(names):
                raise ProtocolError(f"repeated register in {names}")
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape != (self.d_out, self.d_in):
            raise ProtocolError(
                f"matrix shape {m.shape} does not match dim(out) x dim(in) = ({self.d_out}, {self.d_in})"
            )
        m.flags.writeable = False
        self.matrix = m
        self.partial = bool(partial)

    @property
    def in_names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.in_registers)

    @property
    def out_names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.out_registers)

    @property
    def d_in(self) -> int:
        return _prod([r.dim for r in self.in_registers])

    @property
    def d_out(self) -> int:
        return _prod([r.dim for r in self.out_registers])

    def __repr__(self):
        kind = "PartialIsometry" if self.partial else "Isometry"
        return f"{kind}({list(self.in_names)} -> {list(self.out_names)})"

    def __eq__(self, other):
        return (
            isinstance(other, Isometry)
            and self.in_registers == other.in_registers
            and self.out_registers == other.out_registers
            and self.partial == other.partial
            and np.array_equal(self.matrix, other.matrix)
        )

    __hash__ = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls, regs) -> "Isometry":
        regs = _regs(regs)
        return cls(regs, regs, np.eye(_prod([r.dim for r in regs])))

    @classmethod
    def prepare(cls, regs, vector) -> "Isometry":
        """Create fresh registers in a fixed state (map from the trivial space)."""
        regs = _regs(regs)
        v = np.asarray(vector, dtype=complex).reshape(-1, 1)
        return cls((), regs, v)

    @classmethod
    def from_function(cls, in_registers, out_registers, fn: Callable[..., Sequence[int]]) -> "Isometry":
        """Basis-state map |v> -> |fn(v)>; ``fn`` must be injective."""
        ins, outs = _regs(in_registers), _regs(out_registers)
        in_dims = [r.dim for r in ins]
        out_dims = [r.dim for r in outs]
        d_in, d_out = _prod(in_dims), _prod(out_dims)
        m = np.zeros((d_out, d_in), dtype=complex)
        for col, vals in enumerate(itertools.product(*[range(d) for d in in_dims])):
            target = tuple(int(t) for t in fn(*vals))
            if len(target) != len(outs):
                raise ProtocolError(f"function returned {len(target)} values for {len(outs)} registers")
            row = int(np.ravel_multi_index(target, out_dims)) if outs else 0
            if np.any(m[row]):
                raise ProtocolError(f"basis map is not injective (collision at output {target})")
            m[row, col] = 1.0
        return cls(ins, outs, m)

    @classmethod
    def controlled(cls, controls, in_registers, out_registers, blocks) -> "Isometry":
        """sum_c |c><c| (x) V_c with the control registers first on both sides.

        ``blocks`` is a sequence indexed by the flattened control value.
        """
        ctrl, ins, outs = _regs(controls), _regs(in_registers), _regs(out_registers)
        dc = _prod([r.dim for r in ctrl])
        di, do = _prod([r.dim for r in ins]), _prod([r.dim for r in outs])
        blocks = list(blocks)
        if len(blocks) != dc:
            raise ProtocolError(f"need {dc} blocks, got {len(blocks)}")
        m = np.zeros((dc * do, dc * di), dtype=complex)
        for c, b in enumerate(blocks):
            b = np.asarray(b, dtype=complex)
            if b.shape != (do, di):
                raise ProtocolError(f"block {c} has shape {b.shape}, expected {(do, di)}")
            m[c * do : (c + 1) * do, c * di : (c + 1) * di] = b
        return cls(ctrl + ins, ctrl + outs, m)

    # -- derived -----------------------------------------------------------

    def adjoint(self) -> "Isometry":
        return Isometry(self.out_registers, self.in_registers, self.matrix.conj().T, partial=not self.partial)

    def rename(self, mapping: Mapping[str, str]) -> "Isometry":
        ren = lambda regs: tuple(Register(mapping.get(r.name, r.name), r.dim) for r in regs)
        return Isometry(ren(self.in_registers), ren(self.out_registers), self.matrix, partial=self.partial)

    def permuted(self, in_order: Sequence[str] | None = None, out_order: Sequence[str] | None = None) -> "Isometry":
        """Same map with the register lists reordered."""
        in_order = list(in_order or self.in_names)
        out_order = list(out_order or self.out_names)
        ia = [self.in_names.index(n) for n in in_order]
        oa = [self.out_names.index(n) for n in out_order]
        t = self.matrix.reshape([r.dim for r in self.out_registers] + [r.dim for r in self.in_registers])
        k = len(self.out_registers)
        t = np.transpose(t, oa + [k + a for a in ia])
        ins = tuple(self.in_registers[a] for a in ia)
        outs = tuple(self.out_registers[a] for a in oa)
        return Isometry(ins, outs, t.reshape(self.d_out, self.d_in), partial=self.partial)

    def deviation(self) -> float:
        """max-entry deviation of V^dag V (or V V^dag if partial) from I."""
        m = self.matrix
        g = m @ m.conj().T if self.partial else m.conj().T @ m
        return float(np.max(np.abs(g - np.eye(g.shape[0])), initial=0.0))

    def control_violation(self, name: str) -> float:
        """Largest matrix entry that changes the basis value of ``name``."""
        i_out = self.out_names.index(name)
        i_in = self.in_names.index(name)
        d = self.out_registers[i_out].dim
        k = len(self.out_registers)
        t = self.matrix.reshape([r.dim for r in self.out_registers] + [r.dim for r in self.in_registers])
        t = np.moveaxis(t, (i_out, k + i_in), (0, 1)).reshape(d, d, -1)
        off = ~np.eye(d, dtype=bool)
        return float(np.max(np.abs(t[off]), initial=0.0))

    def is_classical(self, tol: float = 1e-12) -> bool:
        """Every column is a single basis vector (a classical injective map)."""
        a = np.abs(self.matrix)
        big = a > tol
        if not np.all(big.sum(axis=0) == 1):
            return False
        return bool(np.all(np.abs(a[big] - 1.0) <= 1e-9))


@dataclass(frozen=True)
class Round:
    owner: str
    isometry: Isometry
    message: str | None = None
    controls: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))

    def rename(self, mapping: Mapping[str, str]) -> "Round":
        return Round(
            self.owner,
            self.isometry.rename(mapping),
            None if self.message is None else mapping.get(self.message, self.message),
            tuple(mapping.get(c, c) for c in self.controls),
        )


@dataclass(frozen=True)
class QuantumProtocol:
    """Round-isometry protocol on classical inputs X (Alice) and Y (Bob).

    ``entanglement`` is a pure state whose registers listed in
    ``alice_registers`` start with Alice and the rest with Bob.
    ``a_out``/``b_out`` designate output registers among the final holdings;
    every other final register is discarded.
    """

    x_dim: int
    y_dim: int
    rounds: tuple[Round, ...] = ()
    entanglement: PureState | None = None
    alice_registers: tuple[str, ...] = ()
    a_out: tuple[str, ...] = ()
    b_out: tuple[str, ...] = ()
    custom_order: bool = False

    def __post_init__(self):
        for f in ("rounds", "alice_registers", "a_out", "b_out"):
            object.__setattr__(self, f, tuple(getattr(self, f)))

    @property
    def bob_registers(self) -> tuple[str, ...]:
        if self.entanglement is None:
            return ()
        return tuple(n for n in self.entanglement.names if n not in self.alice_registers)

    def initial_holdings(self) -> dict[str, frozenset]:
        return {
            ALICE: frozenset({"X", *self.alice_registers}),
            BOB: frozenset({"Y", *self.bob_registers}),
        }

    def message_rounds(self) -> list[tuple[int, Round]]:
        return [(k, r) for k, r in enumerate(self.rounds) if r.message is not None]

    def register_dims(self) -> dict[str, int]:
        dims = {"X": self.x_dim, "Y": self.y_dim}
        if self.entanglement is not None:
            dims.update(zip(self.entanglement.names, self.entanglement.system.dims))
        for r in self.rounds:
            for reg in r.isometry.in_registers + r.isometry.out_registers:
                dims.setdefault(reg.name, reg.dim)
        return dims

    def is_safe(self) -> bool:
        """Inputs are only ever used as controls and never sent."""
        for r in self.rounds:
            touched = set(r.isometry.in_names) | set(r.isometry.out_names)
            for name in ("X", "Y"):
                if name in touched and name not in r.controls:
                    return False
                if r.message == name:
                    return False
        return True

    def qcc(self) -> dict[str, float]:
        """Qubits sent in each direction: sum of lg dim(message)."""
        sent = {ALICE: 0.0, BOB: 0.0}
        for _, r in self.message_rounds():
            d = dict((reg.name, reg.dim) for reg in r.isometry.out_registers)[r.message]
            sent[r.owner] += float(np.log2(d))
        return {"a_to_b": sent[ALICE], "b_to_a": sent[BOB], "total": sent[ALICE] + sent[BOB]}

    def with_rounds(self, rounds, **changes) -> "QuantumProtocol":
        return replace(self, rounds=tuple(rounds), **changes)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def raise_if_invalid(self):
        if self.violations:
            raise ProtocolError("invalid protocol:\n  " + "\n  ".join(self.violations))


def validate_protocol(p: QuantumProtocol) -> ValidationReport:
    rep = ValidationReport()
    v = rep.violations
    if p.x_dim < 1 or p.y_dim < 1:
        v.append("input dimensions must be positive")
    dims: dict[str, int] = {"X": p.x_dim, "Y": p.y_dim}
    hold = {ALICE: {"X"}, BOB: {"Y"}}
    if p.entanglement is not None:
        ent = p.entanglement
        if abs(ent.norm() - 1.0) > 1e-8:
            v.append("entanglement state is not normalized")
        for a in p.alice_registers:
            if a not in ent.names:
                v.append(f"alice register {a!r} is not part of the entanglement")
        for reg in ent.system.registers:
            if reg.name in ("X", "Y") or reg.name in REFERENCES:
                v.append(f"entanglement register uses reserved name {reg.name!r}")
            dims[reg.name] = reg.dim
        hold[ALICE] |= set(p.alice_registers)
        hold[BOB] |= set(p.bob_registers)
    elif p.alice_registers:
        v.append("alice_registers given without an entanglement state")

    senders = []
    for k, r in enumerate(p.rounds):
        tag = f"round {k + 1}"
        if r.owner not in (ALICE, BOB):
            v.append(f"{tag}: owner must be 'A' or 'B', got {r.owner!r}")
            continue
        iso = r.isometry
        if iso.partial:
            if iso.d_out > iso.d_in:
                v.append(f"{tag}: partial isometry must not enlarge the space")
        elif iso.d_out < iso.d_in:
            v.append(f"{tag}: dim(out) {iso.d_out} < dim(in) {iso.d_in}")
        dev = iso.deviation()
        if dev > ISOMETRY_TOL:
            v.append(f"{tag}: isometry violation (max deviation {dev:.3e})")
        mine, theirs = hold[r.owner], hold[other_party(r.owner)]
        for reg in iso.in_registers:
            if reg.name not in mine:
                where = "the other party" if reg.name in theirs else "nobody"
                v.append(f"{tag}: flow violation, {r.owner} consumes {reg.name!r} held by {where}")
            if reg.name in dims and dims[reg.name] != reg.dim:
                v.append(f"{tag}: register {reg.name!r} has dim {reg.dim}, expected {dims[reg.name]}")
        for reg in iso.out_registers:
            if reg.name in REFERENCES:
                v.append(f"{tag}: reference register {reg.name!r} may not be produced")
            if reg.name in (mine | theirs) and reg.name not in iso.in_names:
                v.append(f"{tag}: output {reg.name!r} is already held")
            if reg.name in dims and dims[reg.name] != reg.dim:
                v.append(f"{tag}: register {reg.name!r} has dim {reg.dim}, expected {dims[reg.name]}")
            dims.setdefault(reg.name, reg.dim)
        for c in r.controls:
            if c not in iso.in_names or c not in iso.out_names:
                v.append(f"{tag}: control {c!r} must be both an input and an output")
                continue
            bad = iso.control_violation(c)
            if bad > ISOMETRY_TOL:
                v.append(f"{tag}: not block-diagonal in control {c!r} (off-block entry {bad:.3e})")
        mine -= set(iso.in_names)
        mine |= set(iso.out_names)
        if r.message is not None:
            if r.message not in iso.out_names:
                v.append(f"{tag}: message {r.message!r} is not an output register")
            else:
                mine.discard(r.message)
                theirs.add(r.message)
            senders.append(r.owner)
    if not p.custom_order:
        for i, s in enumerate(senders):
            expect = ALICE if i % 2 == 0 else BOB
            if s != expect:
                v.append(f"message {i + 1} sent by {s}, expected {expect} (alternating order)")
                break
    for party, outs in ((ALICE, p.a_out), (BOB, p.b_out)):
        for o in outs:
            if o not in hold[party]:
                v.append(f"output {o!r} is not in {party}'s final holdings")
    return rep


@dataclass(frozen=True)
class MessageStep:
    """One transmitted message, located in the trace."""

    index: int  # 1-based message number
    round_index: int  # 0-based position in protocol.rounds
    state_index: int  # trace.states[state_index] is the state right after sending
    sender: str
    register: str
    receiver_holdings: frozenset  # receiver's registers, message excluded
    sender_holdings: frozenset  # sender's registers after sending

    @property
    def receiver(self) -> str:
        return other_party(self.sender)


@dataclass
class ProtocolTrace:
    protocol: QuantumProtocol
    mu: InputDistribution
    states: list[PureState]
    holdings: list[dict[str, frozenset]]
    steps: list[MessageStep]

    @property
    def final(self) -> PureState:
        return self.states[-1]

    @property
    def final_holdings(self) -> dict[str, frozenset]:
        return self.holdings[-1]

    @property
    def safe(self) -> bool:
        return self.protocol.is_safe()


def run_trace(p: QuantumProtocol, mu: InputDistribution, *, check: bool = True) -> ProtocolTrace:
    if check:
        validate_protocol(p).raise_if_invalid()
    if (mu.x_dim, mu.y_dim) != (p.x_dim, p.y_dim):
        raise ValueError(f"distribution is {mu.x_dim}x{mu.y_dim}, protocol inputs are {p.x_dim}x{p.y_dim}")
    state = canonical_purification(mu)
    if p.entanglement is not None:
        state = state.tensor_with(p.entanglement)
    hold = {k: set(v) for k, v in p.initial_holdings().items()}
    states = [state]
    holdings = [{k: frozenset(v) for k, v in hold.items()}]
    steps = []
    for k, r in enumerate(p.rounds):
        iso = r.isometry
        state = state.apply(iso.matrix, iso.in_names, iso.out_registers, partial=iso.partial, tol=NORM_TOL)
        if abs(state.norm() - 1.0) > NORM_TOL:
            raise ProtocolError(f"round {k + 1}: norm not preserved ({state.norm():.3e})")
        mine, theirs = hold[r.owner], hold[other_party(r.owner)]
        mine -= set(iso.in_names)
        mine |= set(iso.out_names)
        if r.message is not None:
            mine.discard(r.message)
            steps.append(
                MessageStep(
                    index=len(steps) + 1,
                    round_index=k,
                    state_index=k + 1,
                    sender=r.owner,
                    register=r.message,
                    receiver_holdings=frozenset(theirs),
                    sender_holdings=frozenset(mine),
                )
            )
            theirs.add(r.message)
        states.append(state)
        holdings.append({kk: frozenset(vv) for kk, vv in hold.items()})
    return ProtocolTrace(p, mu, states, holdings, steps)


def _final_marginal(trace: ProtocolTrace, tol: float):
    p = trace.protocol
    keep = list(REFERENCES) + list(p.a_out) + list(p.b_out)
    rho = trace.final.reduced(keep)
    mass = rho.off_diagonal_mass()
    if mass > tol:
        raise ModelContractError(f"final marginal on {keep} is not classical (off-diagonal mass {mass:.3e})")
    return rho


def channel_of(p: QuantumProtocol, mu: InputDistribution, *, trace: ProtocolTrace | None = None,
               tol: float = 1e-8) -> np.ndarray:
    """Joint distribution P[x, y, a, b] of inputs and (flattened) outputs."""
    trace = trace if trace is not None else run_trace(p, mu)
    rho = _final_marginal(trace, tol)
    diag = np.clip(rho.diagonal(), 0.0, None)
    dims = trace.final.system
    na = _prod([dims.dim_of(n) for n in p.a_out])
    nb = _prod([dims.dim_of(n) for n in p.b_out])
    return diag.reshape(p.x_dim, p.y_dim, na, nb)


def output_distribution(p: QuantumProtocol, party: str = BOB) -> np.ndarray:
    """P[out | x, y] for every input pair (computed on the uniform distribution)."""
    mu = InputDistribution.uniform(p.x_dim, p.y_dim)
    joint = channel_of(p, mu)
    marg = joint.sum(axis=3) if party == ALICE else joint.sum(axis=2)
    return marg / mu.probs[:, :, None]


def solves(p: QuantumProtocol, f, mu: InputDistribution, epsilon: float, *,
           worst_case: bool = False, party: str = BOB) -> bool:
    """Does the designated output of ``party`` equal f(x, y) up to error epsilon?"""
    f = np.asarray(f, dtype=int)
    if f.shape != (p.x_dim, p.y_dim):
        raise ValueError(f"truth table shape {f.shape} does not match inputs ({p.x_dim}, {p.y_dim})")
    if worst_case:
        cond = output_distribution(p, party)
        correct = np.take_along_axis(cond, f[:, :, None], axis=2)[:, :, 0]
        return bool(np.max(1.0 - correct) <= epsilon + 1e-12)
    joint = channel_of(p, mu)
    marg = joint.sum(axis=3) if party == ALICE else joint.sum(axis=2)
    correct = np.take_along_axis(marg, f[:, :, None], axis=2)[:, :, 0].sum()
    return bool(1.0 - correct <= epsilon + 1e-12)
