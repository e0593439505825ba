"""Random instances: isometries, states, protocols, processes, distributions.

All generators take an explicit ``numpy.random.Generator`` so that callers
control reproducibility.
"""

from __future__ import annotations

import math

import numpy as np

from .classical import Circuit, ClassicalProtocol, ClassicalRound, Extension, ReversibleProtocol
from .costs import ProcessStep, TwoWayProcess
from .protocol import ALICE, BOB, Isometry, QuantumProtocol, Round
from .state import InputDistribution, PureState, Register, RegisterSystem

__all__ = [
    "random_isometry",
    "random_unitary",
    "random_pure_state",
    "random_distribution",
    "random_product_distribution",
    "random_protocol",
    "random_process",
    "stream",
    "random_classical_protocol",
    "random_reversible_protocol",
    "random_extension",
    "random_and_protocol",
]


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for sample ``index`` of a seeded experiment."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def random_isometry(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    if d_out < d_in:
        raise ValueError("an isometry needs d_out >= d_in")
    z = rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in))
    q, r = np.linalg.qr(z)
    # fix column phases so the distribution is Haar-like
    ph = np.diag(r)
    ph = np.where(np.abs(ph) > 0, ph / np.abs(ph), 1.0)
    return q * ph


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    return random_isometry(rng, d, d)


def random_pure_state(rng: np.random.Generator, registers) -> PureState:
    sys = RegisterSystem(tuple(r if isinstance(r, Register) else Register(*r) for r in registers))
    v = rng.normal(size=sys.total_dim) + 1j * rng.normal(size=sys.total_dim)
    return PureState(sys, v / np.linalg.norm(v))


def random_distribution(rng: np.random.Generator, x_dim: int, y_dim: int, sparse: bool = False) -> InputDistribution:
    p = rng.dirichlet(np.ones(x_dim * y_dim))
    if sparse:
        p = p * (rng.random(p.size) < 0.7)
        if p.sum() == 0:
            p[rng.integers(p.size)] = 1.0
    return InputDistribution((p / p.sum()).reshape(x_dim, y_dim))


def random_product_distribution(rng: np.random.Generator, x_dim: int, y_dim: int) -> InputDistribution:
    return InputDistribution.product(rng.dirichlet(np.ones(x_dim)), rng.dirichlet(np.ones(y_dim)))


def _memory(prefix: str, count: int) -> list[Register]:
    return [Register(f"{prefix}{j}", 2) for j in range(count)]


def random_protocol(rng: np.random.Generator, messages: int | None = None, *, x_dim: int = 2,
                    y_dim: int = 2, safe: bool = True, entangled: bool | None = None,
                    max_messages: int = 3) -> QuantumProtocol:
    """A random protocol with qubit registers (inputs aside).

    Safe protocols use their input only as a control in every round; unsafe
    ones swallow the input into the first round of each party. The receiver
    of the last message finishes with a local isometry producing an output
    qubit; the other party also applies a final local isometry.
    """
    if messages is None:
        messages = int(rng.integers(0, max_messages + 1))
    if entangled is None:
        entangled = bool(rng.random() < 0.5)
    inputs = {ALICE: Register("X", x_dim), BOB: Register("Y", y_dim)}
    mem: dict[str, list[Register]] = {ALICE: [], BOB: []}
    ent = None
    alice_regs: tuple[str, ...] = ()
    if entangled:
        ent = random_pure_state(rng, [("TA", 2), ("TB", 2)])
        alice_regs = ("TA",)
        mem[ALICE].append(Register("TA", 2))
        mem[BOB].append(Register("TB", 2))
    consumed = {ALICE: False, BOB: False}
    rounds = []
    counter = 0
    incoming: dict[str, list[Register]] = {ALICE: [], BOB: []}

    def make_round(owner: str, message: Register | None, out_prefix: str, extra: list[Register] = ()):
        nonlocal counter
        ins = mem[owner] + incoming[owner]
        uses_input = not safe and not consumed[owner]
        if uses_input:
            ins = [inputs[owner]] + ins
            consumed[owner] = True
        d_in = int(np.prod([r.dim for r in ins])) if ins else 1
        fixed = [message] if message is not None else []
        fixed += list(extra)
        d_fixed = int(np.prod([r.dim for r in fixed])) if fixed else 1
        k = max(0, math.ceil(math.log2(max(1, d_in / d_fixed))))
        if rng.random() < 0.25:
            k += 1
        counter += 1
        outs = fixed + _memory(f"{out_prefix}{counter}_", k)
        d_out = int(np.prod([r.dim for r in outs])) if outs else 1
        if safe:
            ctrl = inputs[owner]
            blocks = [random_isometry(rng, d_in, d_out) for _ in range(ctrl.dim)]
            iso = Isometry.controlled([ctrl], ins, outs, blocks)
            controls = (ctrl.name,)
        else:
            iso = Isometry(ins, outs, random_isometry(rng, d_in, d_out))
            controls = ()
        rounds.append(Round(owner, iso, message.name if message is not None else None, controls))
        mem[owner] = [r for r in outs if message is None or r.name != message.name]
        incoming[owner] = []
        if message is not None:
            incoming[BOB if owner == ALICE else ALICE] = [message]

    for i in range(messages):
        owner = ALICE if i % 2 == 0 else BOB
        make_round(owner, Register(f"C{i + 1}", 2), owner)
    last = BOB if messages % 2 == 1 else ALICE
    first_final = BOB if last == ALICE else ALICE
    # the party that did not receive the last message finishes first
    order = [first_final, last] if messages else [ALICE, BOB]
    outs = {}
    for party in order:
        out = Register("Aout" if party == ALICE else "Bout", 2)
        make_round(party, None, party + "f", extra=[out])
        outs[party] = out.name
    return QuantumProtocol(
        x_dim, y_dim, tuple(rounds), ent, alice_regs,
        a_out=(outs[ALICE],), b_out=(outs[BOB],),
    )


def random_process(rng: np.random.Generator, steps: int | None = None, max_steps: int = 3) -> tuple[TwoWayProcess, tuple[str, ...], tuple[str, ...]]:
    """A random two-way process with qubit registers and an untouched
    extension E, F plus a purifying environment G.

    Returns (process, e, f).
    """
    if steps is None:
        steps = int(rng.integers(1, max_steps + 1))
    init = random_pure_state(rng, [("A0", 2), ("B0", 2), ("E", 2), ("F", 2), ("G", 2)])
    mem = {ALICE: [Register("A0", 2)], BOB: [Register("B0", 2)]}
    incoming: dict[str, list[Register]] = {ALICE: [], BOB: []}
    out_steps = []

    def local(party: str, tag: str, message: Register | None):
        ins = mem[party] + incoming[party]
        d_in = int(np.prod([r.dim for r in ins]))
        d_msg = message.dim if message is not None else 1
        k = max(0, math.ceil(math.log2(max(1, d_in / d_msg))))
        outs = ([message] if message is not None else []) + _memory(f"{party}{tag}_", k)
        d_out = int(np.prod([r.dim for r in outs])) if outs else 1
        iso = Isometry(ins, outs, random_isometry(rng, d_in, d_out))
        mem[party] = [r for r in outs if message is None or r.name != message.name]
        return iso

    for i in range(1, steps + 2):
        final = i == steps + 1
        c = None if final or rng.random() < 0.2 else Register(f"C{i}", 2)
        d = None if final or rng.random() < 0.2 else Register(f"D{i}", 2)
        ua = local(ALICE, str(i), c)
        vb = local(BOB, str(i), d)
        incoming[BOB] = [c] if c is not None else []
        incoming[ALICE] = [d] if d is not None else []
        out_steps.append(ProcessStep(ua, vb, c.name if c else None, d.name if d else None))
    proc = TwoWayProcess(init, ("A0",), ("B0",), tuple(out_steps))
    return proc, ("E",), ("F",)


def random_classical_protocol(rng: np.random.Generator, rounds: int | None = None, *, max_rounds: int = 3,
                              nx: int = 2, ny: int = 2, size: int = 2, order: str = "alternating",
                              coins: str = "per_round", public: bool = False,
                              outputs: bool = True) -> ClassicalProtocol:
    """A random message-table protocol.

    ``order`` is "alternating", "fixed" (random fixed speakers) or
    "variable" (the speaker of later rounds depends on earlier messages).
    ``coins``:
      - "none": deterministic parties;
      - "per_round": every round gets its own binary coin for its speaker,
        read at exactly one view (input, public coin, earlier messages), so
        the canonical form has at most one random view per round;
      - "shared": each party has one coin component read by all their tables.
    """
    if rounds is None:
        rounds = int(rng.integers(1, max_rounds + 1))
    nr = 2 if public else 1
    pub = rng.dirichlet(np.ones(nr)) if public else None
    speakers = []
    for i in range(rounds):
        if order == "alternating":
            speakers.append("A" if i % 2 == 0 else "B")
        elif order == "fixed":
            speakers.append("A" if rng.random() < 0.5 else "B")
        elif order == "variable":
            speakers.append(None)
        else:
            raise ValueError(f"unknown order {order!r}")
    coin_a, coin_b, owner_of = [], [], {}
    if coins == "shared":
        coin_a, coin_b = [rng.dirichlet(np.ones(2))], [rng.dirichlet(np.ones(2))]
    elif coins == "per_round":
        for i in range(rounds):
            sp = speakers[i] if speakers[i] is not None else ("A" if rng.random() < 0.5 else "B")
            owner_of[i] = sp
            (coin_a if sp == "A" else coin_b).append(rng.dirichlet(np.ones(2)))
    elif coins != "none":
        raise ValueError(f"unknown coin mode {coins!r}")
    index_of = {}
    counts = {"A": 0, "B": 0}
    for i in sorted(owner_of):
        index_of[i] = counts[owner_of[i]]
        counts[owner_of[i]] += 1
    sizes = [size] * rounds

    def table(party: str, i: int, n_out: int) -> np.ndarray:
        n_in = nx if party == "A" else ny
        cdims = [c.size for c in (coin_a if party == "A" else coin_b)]
        det = rng.integers(0, n_out, size=(n_in, nr, *sizes[:i]))
        t = np.broadcast_to(np.expand_dims(det, tuple(range(1, 1 + len(cdims)))),
                            (n_in, *cdims, nr, *sizes[:i])).copy()
        if coins == "shared" and cdims:
            alt = rng.integers(0, n_out, size=(n_in, nr, *sizes[:i]))
            mask = rng.random(det.shape) < 0.5
            for s in range(cdims[0]):
                sl = t[:, s]
                sl[...] = np.where(mask & (s == 1), alt, sl)
        elif coins == "per_round" and owner_of.get(i) == party:
            k = index_of[i]
            view = tuple(int(rng.integers(0, d)) for d in (n_in, nr, *sizes[:i]))
            for s in range(cdims[k]):
                idx = [view[0]] + [slice(None)] * len(cdims) + list(view[1:])
                idx[1 + k] = s
                t[tuple(idx)] = (det[view] + s) % n_out
        return t

    out = []
    for i in range(rounds):
        if speakers[i] is None:
            spk = rng.integers(0, 2, size=tuple(sizes[:i]))
            if i == 0:
                spk = np.asarray(0 if owner_of.get(0, "A") == "A" else 1)
            out.append(ClassicalRound(spk, size, table("A", i, size), table("B", i, size)))
        else:
            t = table(speakers[i], i, size)
            out.append(ClassicalRound(speakers[i], size, t if speakers[i] == "A" else None,
                                      t if speakers[i] == "B" else None))
    kw = {}
    if outputs:
        for party, key in (("A", "out_a"), ("B", "out_b")):
            n_in = nx if party == "A" else ny
            cdims = [c.size for c in (coin_a if party == "A" else coin_b)]
            det = rng.integers(0, 2, size=(n_in, nr, *sizes))
            kw[key] = np.broadcast_to(np.expand_dims(det, tuple(range(1, 1 + len(cdims)))),
                                      (n_in, *cdims, nr, *sizes)).copy()
        kw.update(out_a_size=2, out_b_size=2)
    return ClassicalProtocol(nx, ny, out, coins_a=coin_a, coins_b=coin_b, public=pub, **kw)


def random_reversible_protocol(rng: np.random.Generator, messages: int | None = None, *, max_messages: int = 3,
                               safe: bool = False, coins: bool = True, public: bool = False,
                               retain_randomness: bool = False, max_inputs: int = 2) -> ReversibleProtocol:
    """A random reversible protocol over bit registers X (Alice) and Y (Bob).

    Message circuits alternate starting with Alice; each reads up to
    ``max_inputs`` of the owner's registers plus one fresh ancilla bit, applies
    a random permutation and sends its first output bit. With ``safe`` the
    inputs X, Y are only copied by an initial circuit, never consumed. With
    ``retain_randomness`` coin registers are never consumed either: a circuit
    may read them only as controls (a separate random permutation per coin
    value).
    """
    if messages is None:
        messages = int(rng.integers(1, max_messages + 1))
    sizes = {"X": 2, "Y": 2}
    hold = {"A": ["X"], "B": ["Y"]}
    coin_list, pub_list, circuits = [], [], []
    if coins:
        for party, name in (("A", "SA"), ("B", "SB")):
            if rng.random() < 0.6:
                sizes[name] = 2
                coin_list.append((party, name, rng.dirichlet(np.ones(2))))
                hold[party].append(name)
    if public:
        sizes["RA"] = sizes["RB"] = 2
        pub_list.append(("RA", "RB", rng.dirichlet(np.ones(2))))
        hold["A"].append("RA")
        hold["B"].append("RB")
    protected = set()
    randomness = {n for _, n, _ in coin_list} | {n for a, b, _ in pub_list for n in (a, b)}
    if retain_randomness:
        protected |= randomness
    if safe:
        for party, name in (("A", "X"), ("B", "Y")):
            sizes[name + "c"] = 2
            circuits.append(Circuit.copy(party, name, name + "c", 2))
            hold[party].append(name + "c")
            protected.add(name)
    for k in range(messages):
        party = "A" if k % 2 == 0 else "B"
        other = "B" if party == "A" else "A"
        avail = [n for n in hold[party] if n not in protected]
        n_in = int(rng.integers(0, min(max_inputs, len(avail)) + 1))
        ins = [str(n) for n in rng.choice(avail, size=n_in, replace=False)] if n_in else []
        ctrl = []
        if retain_randomness:
            ctrl = [n for n in hold[party] if n in randomness and rng.random() < 0.5]
        anc = f"a{k}"
        outs = [f"m{k}"] + [f"w{k}_{j}" for j in range(n_in)]
        for n in [anc] + outs:
            sizes[n] = 2
        d = 2 ** (n_in + 1)
        table = np.concatenate([c * d + rng.permutation(d) for c in range(2 ** len(ctrl))])
        circuits.append(Circuit(party, tuple(ctrl + ins), tuple(ctrl + outs), table, (anc,), (outs[0],)))
        hold[party] = [n for n in hold[party] if n not in ins] + outs[1:]  # controls stay held
        hold[other].append(outs[0])
    return ReversibleProtocol(sizes, ("X",), ("Y",), tuple(circuits), coins=tuple(coin_list),
                              public=tuple(pub_list))


def random_extension(rng: np.random.Generator, mu: InputDistribution, nd: int = 2):
    """D drawn from a random channel of (X, Y)."""
    k = rng.dirichlet(np.ones(nd), size=mu.probs.shape)
    return Extension(mu.probs[:, :, None] * k)


def random_and_protocol(rng: np.random.Generator, *, max_prefix: int = 2) -> ClassicalProtocol:
    """A zero-error AND protocol: a random alternating prefix with private
    coins, then (if needed) Bob sends y, then Alice sends x and Bob outputs
    x AND y."""
    pre = random_classical_protocol(rng, int(rng.integers(0, max_prefix + 1)), coins="per_round", outputs=False)
    rounds = list(pre.rounds)

    def reveal(party: str):
        shape = ((2,) + pre.coin_dims(party) + (pre.nr,) + tuple(r.size for r in rounds))
        t = np.zeros(shape, dtype=np.int64)
        t[1] = 1
        return t

    if len(rounds) % 2 == 1:
        rounds.append(ClassicalRound(BOB, 2, None, reveal(BOB)))
    rounds.append(ClassicalRound(ALICE, 2, reveal(ALICE), None))
    shape = (2,) + pre.coin_dims(BOB) + (pre.nr,) + tuple(r.size for r in rounds)
    out_b = np.zeros(shape, dtype=np.int64)
    out_b[1, ..., 1] = 1  # y = 1 and the last message x = 1
    return ClassicalProtocol(2, 2, rounds, coins_a=pre.coins_a, coins_b=pre.coins_b, public=pre.public,
                             out_b=out_b, out_b_size=2)
