"""Protocol transformations: input-copying safe versions, quantization of
classical protocols, and the reverse-composition family (clean and phase
protocols).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .classical import (
    ClassicalProtocol,
    _message_dependencies,
    canonical_randomness_form,
    coin_dependencies,
    pad_messages,
)
from .protocol import (
    ALICE,
    BOB,
    Isometry,
    ModelContractError,
    QuantumProtocol,
    Round,
    other_party,
    output_distribution,
    run_trace,
    validate_protocol,
)
from .state import InputDistribution, PureState, Register, RegisterSystem, canonical_purification

__all__ = [
    "safe_version",
    "quantize_classical",
    "simulate_classical",
    "is_canonical",
    "reverse_composition",
    "infer_function",
    "clean_protocol",
    "phase_protocol",
    "expected_clean_state",
    "clean_fidelity",
]


def _all_names(p: QuantumProtocol) -> set[str]:
    names = {"X", "Y", "RX", "RY"}
    if p.entanglement is not None:
        names |= set(p.entanglement.names)
    for r in p.rounds:
        names |= set(r.isometry.in_names) | set(r.isometry.out_names)
    return names


def _fresh(base: str, taken: set[str]) -> str:
    name, k = base, 1
    while name in taken:
        k += 1
        name = f"{base}{k}"
    taken.add(name)
    return name


def safe_version(p: QuantumProtocol) -> QuantumProtocol:
    """Both parties first copy their input; the rest runs on the copies.

    Alice copies X into Xs and Bob copies Y into Ys in two local rounds, and
    every later use of X, Y (including output designations) is renamed, so
    the inputs themselves are only ever controls.
    """
    validate_protocol(p).raise_if_invalid()
    taken = _all_names(p)
    xs, ys = _fresh("Xs", taken), _fresh("Ys", taken)
    mapping = {"X": xs, "Y": ys}
    pre = [
        Round(ALICE, Isometry.from_function([Register("X", p.x_dim)], [Register("X", p.x_dim), Register(xs, p.x_dim)],
                                            lambda v: (v, v)), None, ("X",)),
        Round(BOB, Isometry.from_function([Register("Y", p.y_dim)], [Register("Y", p.y_dim), Register(ys, p.y_dim)],
                                          lambda v: (v, v)), None, ("Y",)),
    ]
    rounds = pre + [r.rename(mapping) for r in p.rounds]
    return p.with_rounds(
        rounds,
        a_out=tuple(mapping.get(n, n) for n in p.a_out),
        b_out=tuple(mapping.get(n, n) for n in p.b_out),
    )


# -- quantization -----------------------------------------------------------


def is_canonical(pi: ClassicalProtocol) -> bool:
    """Every private coin component is read by at most one table."""
    for party in (ALICE, BOB):
        tables = [r.table_a if party == ALICE else r.table_b for r in pi.rounds if r.speaker == party]
        out = pi.out_a if party == ALICE else pi.out_b
        if out is not None:
            tables.append(out)
        seen: set[int] = set()
        for t in tables:
            deps = set(coin_dependencies(pi, party, t))
            if deps & seen:
                return False
            seen |= deps
    return True


def _pair_state(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    v = np.zeros((p.size, p.size))
    v[np.arange(p.size), np.arange(p.size)] = np.sqrt(p)
    return v.reshape(-1)


def quantize_classical(pi: ClassicalProtocol) -> QuantumProtocol:
    """Coherent version of an alternating classical protocol in canonical form.

    The public coin becomes an entangled pair RA/RB, each private coin
    component of Alice a pair TA{k}/TA{k}p that she holds both halves of
    (Bob likewise). Message i is computed into a fresh register C{i} by a
    classical append map controlled on exactly the registers its table
    depends on; the sender also writes a copy MA{i} (MB{i}) when one of
    their later tables reads that message. Outputs go to Aout and Bout.
    """
    if not pi.alternating:
        raise ModelContractError("quantization needs an alternating protocol starting with Alice (pad it first)")
    if not is_canonical(pi):
        raise ModelContractError("quantization needs canonical randomness (each coin read by one table)")

    # shared state: public coin and private coin purifications
    ent_regs: list[Register] = []
    ent_vec = np.ones(1, dtype=complex)
    alice_regs: list[str] = []
    coin_reg = {ALICE: {}, BOB: {}}
    if pi.nr > 1:
        ent_regs += [Register("RA", pi.nr), Register("RB", pi.nr)]
        ent_vec = np.kron(ent_vec, _pair_state(pi.public))
        alice_regs.append("RA")
    for party, coins, tag in ((ALICE, pi.coins_a, "TA"), (BOB, pi.coins_b, "TB")):
        for k, c in enumerate(coins):
            if c.size == 1:
                continue
            name = f"{tag}{k}"
            ent_regs += [Register(name, c.size), Register(name + "p", c.size)]
            ent_vec = np.kron(ent_vec, _pair_state(c))
            coin_reg[party][k] = name
            if party == ALICE:
                alice_regs += [name, name + "p"]
    ent = PureState(RegisterSystem(tuple(ent_regs)), ent_vec) if ent_regs else None

    sizes = pi.sizes
    speakers = [r.speaker for r in pi.rounds]

    def tables_of(party):
        out = []
        for i, r in enumerate(pi.rounds):
            if r.speaker == party:
                out.append((i, r.table_a if party == ALICE else r.table_b))
        t = pi.out_a if party == ALICE else pi.out_b
        if t is not None:
            out.append((len(pi.rounds), t))
        return out

    # which own messages are read later by their sender
    needs_copy = set()
    for party in (ALICE, BOB):
        for i, t in tables_of(party):
            for j in _message_dependencies(pi, party, t):
                if speakers[j] == party:
                    needs_copy.add(j)

    def message_reg(j: int, reader: str) -> Register:
        if speakers[j] == reader:
            return Register(f"M{reader}{j + 1}", sizes[j])
        return Register(f"C{j + 1}", sizes[j])

    def build(party: str, i: int, table: np.ndarray, outs: list[Register]) -> Isometry:
        ncoin = len(pi.coin_dims(party))
        n_in = pi.nx if party == ALICE else pi.ny
        coin_deps = coin_dependencies(pi, party, table)
        msg_deps = _message_dependencies(pi, party, table)
        use_input = table.shape[0] > 1 and bool(np.any(table != table[[0]]))
        r_axis = 1 + ncoin
        use_r = pi.nr > 1 and bool(np.any(table != np.take(table, [0], axis=r_axis)))
        ctrl: list[tuple[Register, int]] = []  # (register, table axis)
        if use_input:
            ctrl.append((Register("X" if party == ALICE else "Y", n_in), 0))
        for k in coin_deps:
            ctrl.append((Register(coin_reg[party][k], pi.coin_dims(party)[k]), 1 + k))
        if use_r:
            ctrl.append((Register("RA" if party == ALICE else "RB", pi.nr), r_axis))
        for j in msg_deps:
            ctrl.append((message_reg(j, party), 2 + ncoin + j))
        regs = [c for c, _ in ctrl]

        def fn(*vals):
            idx = [0] * table.ndim
            for (_, axis), v in zip(ctrl, vals):
                idx[axis] = v
            m = int(table[tuple(idx)])
            return tuple(vals) + (m,) * len(outs)

        return Isometry.from_function(regs, regs + outs, fn), tuple(r.name for r in regs)

    rounds = []
    for i, r in enumerate(pi.rounds):
        party = r.speaker
        table = r.table_a if party == ALICE else r.table_b
        outs = [Register(f"C{i + 1}", r.size)]
        if i in needs_copy:
            outs.append(Register(f"M{party}{i + 1}", r.size))
        iso, ctrl = build(party, i, table, outs)
        rounds.append(Round(party, iso, f"C{i + 1}", ctrl))
    a_out, b_out = (), ()
    for party, t, n in ((ALICE, pi.out_a, pi.out_a_size), (BOB, pi.out_b, pi.out_b_size)):
        if t is None:
            continue
        name = "Aout" if party == ALICE else "Bout"
        iso, ctrl = build(party, len(pi.rounds), t, [Register(name, n)])
        rounds.append(Round(party, iso, None, ctrl))
        if party == ALICE:
            a_out = (name,)
        else:
            b_out = (name,)
    return QuantumProtocol(pi.nx, pi.ny, tuple(rounds), ent, tuple(alice_regs), a_out=a_out, b_out=b_out)


def simulate_classical(pi: ClassicalProtocol) -> QuantumProtocol:
    """Pad, move to canonical randomness, then quantize."""
    return quantize_classical(canonical_randomness_form(pad_messages(pi)))


# -- reverse composition ----------------------------------------------------


def _held_after(p: QuantumProtocol) -> dict[str, set]:
    hold = {k: set(v) for k, v in p.initial_holdings().items()}
    for r in p.rounds:
        mine = hold[r.owner]
        mine -= set(r.isometry.in_names)
        mine |= set(r.isometry.out_names)
        if r.message is not None:
            mine.discard(r.message)
            hold[other_party(r.owner)].add(r.message)
    return hold


def reverse_composition(p: QuantumProtocol, middle: Sequence[Round] = ()) -> QuantumProtocol:
    """Run ``p``, then the ``middle`` rounds, then ``p`` backwards.

    Backward rounds apply the adjoint of each forward isometry (a partial
    isometry). Before the adjoint of a round owned by one party, any of that
    round's output registers now held by the other party are sent back:
    as the message of the immediately preceding backward round when that
    round belongs to the other party and sends nothing yet, otherwise by an
    extra identity round.
    """
    validate_protocol(p).raise_if_invalid()
    fwd = QuantumProtocol(p.x_dim, p.y_dim, tuple(p.rounds) + tuple(middle), p.entanglement,
                          p.alice_registers, custom_order=True)
    hold = _held_after(fwd)
    back: list[Round] = []
    dims = fwd.register_dims()
    for r in reversed(p.rounds):
        owner, other = r.owner, other_party(r.owner)
        for name in r.isometry.out_names:
            if name in hold[owner]:
                continue
            if name not in hold[other]:
                raise ModelContractError(f"register {name!r} is needed for reversal but nobody holds it")
            last = back[-1] if back else None
            if last is not None and last.owner == other and last.message is None and name in last.isometry.out_names:
                back[-1] = Round(last.owner, last.isometry, name, last.controls)
            else:
                back.append(Round(other, Isometry.identity([Register(name, dims[name])]), name))
            hold[other].discard(name)
            hold[owner].add(name)
        inv = r.isometry.adjoint()
        back.append(Round(owner, inv, None, r.controls))
        hold[owner] -= set(inv.in_names)
        hold[owner] |= set(inv.out_names)
    rounds = tuple(p.rounds) + tuple(middle) + tuple(back)
    senders = [r.owner for r in rounds if r.message is not None]
    alternating = all(s == (ALICE if i % 2 == 0 else BOB) for i, s in enumerate(senders))
    return QuantumProtocol(p.x_dim, p.y_dim, rounds, p.entanglement, p.alice_registers,
                           custom_order=p.custom_order or not alternating)


def infer_function(p: QuantumProtocol, f=None, tol: float = 1e-10) -> np.ndarray:
    """The function Bob's output computes with zero error.

    Raises ModelContractError when some input pair has a non-deterministic
    output, or when a supplied truth table disagrees.
    """
    if len(p.b_out) == 0:
        raise ModelContractError("protocol has no designated output for Bob")
    cond = output_distribution(p, BOB)
    vals = np.argmax(cond, axis=2)
    err = 1.0 - np.take_along_axis(cond, vals[:, :, None], axis=2)[:, :, 0]
    if np.max(err) > tol:
        x, y = np.unravel_index(np.argmax(err), err.shape)
        raise ModelContractError(f"protocol is not zero-error: output on (x={x}, y={y}) errs with probability {err[x, y]:.3e}")
    if f is not None:
        f = np.asarray(f, dtype=int)
        if f.shape != vals.shape or np.any(f != vals):
            raise ModelContractError("protocol output differs from the supplied function")
    return vals


def _bob_output(p: QuantumProtocol) -> Register:
    if len(p.b_out) != 1:
        raise ModelContractError("clean and phase protocols need exactly one output register for Bob")
    return Register(p.b_out[0], p.register_dims()[p.b_out[0]])


def clean_protocol(p: QuantumProtocol, f=None) -> QuantumProtocol:
    """Compute f, copy Bob's answer into a fresh register, uncompute.

    The result leaves every register as it was at the start, plus Bob's
    copy of f(x, y).
    """
    f = infer_function(p, f)
    out = _bob_output(p)
    q = Register(_fresh("Bq", _all_names(p)), out.dim)
    mid = Round(BOB, Isometry.from_function([out], [out, q], lambda b: (b, b)), None, (out.name,))
    res = reverse_composition(p, [mid])
    return QuantumProtocol(res.x_dim, res.y_dim, res.rounds, res.entanglement, res.alice_registers,
                           b_out=(q.name,), custom_order=res.custom_order)


def phase_protocol(p: QuantumProtocol, f=None) -> QuantumProtocol:
    """Compute a boolean f, kick back (-1)^f(x,y) onto the state, uncompute.

    The kickback uses a fresh qubit of Bob's prepared in |->, which stays
    with him and carries no information.
    """
    f = infer_function(p, f)
    if f.max() > 1:
        raise ModelContractError("phase protocols need a boolean function")
    out = _bob_output(p)
    q = Register(_fresh("Bq", _all_names(p)), 2)
    m = np.zeros((out.dim * 2, out.dim), dtype=complex)
    minus = np.array([1, -1]) / math.sqrt(2)
    for b in range(out.dim):
        m[b * 2 : b * 2 + 2, b] = (-1) ** (b % 2) * minus
    mid = Round(BOB, Isometry([out], [out, q], m), None, (out.name,))
    res = reverse_composition(p, [mid])
    return QuantumProtocol(res.x_dim, res.y_dim, res.rounds, res.entanglement, res.alice_registers,
                           custom_order=res.custom_order)


def expected_clean_state(p: QuantumProtocol, mu: InputDistribution, f, mode: str = "clean",
                         extra: str = "Bq") -> PureState:
    """sum_xy sqrt(mu) (+-1) |x x y y> |entanglement> |ancilla> for comparison."""
    f = np.asarray(f, dtype=int)
    base = canonical_purification(mu)
    amps = base.tensor  # axes X, RX, Y, RY
    if mode == "phase":
        signs = (-1.0) ** f
        amps = amps * signs[:, None, :, None]
        anc = PureState(RegisterSystem.of((extra, 2)), np.array([1, -1]) / math.sqrt(2))
        st = PureState(base.system, amps.reshape(-1))
    else:
        d = p.register_dims()[extra]
        t = np.zeros(amps.shape + (d,), dtype=complex)
        for x in range(mu.x_dim):
            for y in range(mu.y_dim):
                t[x, x, y, y, f[x, y]] = amps[x, x, y, y]
        st = PureState(RegisterSystem(base.system.registers + (Register(extra, d),)), t.reshape(-1))
        anc = None
    if p.entanglement is not None:
        st = st.tensor_with(p.entanglement)
    if anc is not None:
        st = st.tensor_with(anc)
    return st


def clean_fidelity(p_transformed: QuantumProtocol, mu: InputDistribution, f, mode: str = "clean") -> float:
    """Fidelity of the final state with the ideal clean (or phase) state."""
    final = run_trace(p_transformed, mu).final
    extra = [n for n in final.names if n not in {"X", "RX", "Y", "RY"} and
             (p_transformed.entanglement is None or n not in p_transformed.entanglement.names)]
    if len(extra) != 1:
        return 0.0
    ideal = expected_clean_state(p_transformed, mu, f, mode, extra[0])
    if set(ideal.names) != set(final.names):
        return 0.0
    return final.fidelity(ideal)
