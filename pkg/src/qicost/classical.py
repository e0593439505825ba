"""Classical protocols: message-table protocols with public and private
coins, reversible-circuit protocols, and the Shannon quantities over them.

Everything is computed by exhaustive enumeration into a :class:`JointTable`.

Message tables are numpy integer arrays. For a round spoken by Alice the
table is indexed ``[x, *s_A, r, *m_prev]`` where ``s_A`` runs over Alice's
private coin components, ``r`` is the public coin and ``m_prev`` are the
earlier messages; Bob's tables use ``y`` and ``s_B``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .linalg import cqmi
from .state import InputDistribution

__all__ = [
    "ATOM_CAP",
    "JointTable",
    "ClassicalRound",
    "ClassicalProtocol",
    "Extension",
    "run_classical",
    "ICReport",
    "ic",
    "ic_extended",
    "markov_violations",
    "transcript_distribution",
    "classical_channel",
    "pad_messages",
    "canonical_randomness_form",
    "coin_dependencies",
    "Circuit",
    "ReversibleProtocol",
    "run_reversible",
    "RICReport",
    "ric",
    "safe_reversible",
    "tensor_product",
    "unforget_simulation",
]

ATOM_CAP = 10**6


class CapError(ValueError):
    """An enumeration would exceed the atom cap."""


# -- joint tables -------------------------------------------------------------


class JointTable:
    """A finite joint distribution stored as weighted atoms.

    ``columns`` maps variable names to integer arrays, one entry per atom.
    """

    def __init__(self, probs, columns: Mapping[str, np.ndarray], *, tol: float = 1e-12):
        self.probs = np.asarray(probs, dtype=float)
        self.columns = {k: np.asarray(v, dtype=np.int64) for k, v in columns.items()}
        for k, v in self.columns.items():
            if v.shape != self.probs.shape:
                raise ValueError(f"column {k!r} has {v.shape[0]} entries for {self.probs.size} atoms")
        s = self.probs.sum()
        if abs(s - 1.0) > tol:
            raise ValueError(f"joint table sums to {s:.15f}")
        self._cache: dict[frozenset, float] = {}

    def __len__(self):
        return self.probs.size

    def _codes(self, names: Sequence[str]) -> np.ndarray:
        cols = [self.columns[n] for n in names]
        stacked = np.stack(cols, axis=1)
        _, inv = np.unique(stacked, axis=0, return_inverse=True)
        return inv.reshape(-1)

    def entropy(self, names: Iterable[str]) -> float:
        key = frozenset(names)
        if key not in self._cache:
            for n in key:
                if n not in self.columns:
                    raise KeyError(f"unknown variable {n!r}")
            if not key:
                self._cache[key] = 0.0
            else:
                codes = self._codes(sorted(key))
                w = np.bincount(codes, weights=self.probs)
                w = w[w > 0]
                self._cache[key] = float(-np.sum(w * np.log2(w)))
        return self._cache[key]

    def cmi(self, a: Iterable[str], b: Iterable[str], c: Iterable[str] = ()) -> float:
        return cqmi(self, a, b, c)

    def distribution(self, names: Sequence[str]) -> dict[tuple, float]:
        out: dict[tuple, float] = {}
        cols = [self.columns[n] for n in names]
        for i, p in enumerate(self.probs):
            if p > 0:
                k = tuple(int(c[i]) for c in cols)
                out[k] = out.get(k, 0.0) + float(p)
        return out


# -- standard protocols ---------------------------------------------------------


@dataclass(frozen=True)
class ClassicalRound:
    """One message. ``speaker`` is 'A', 'B', or an integer array indexed by the
    earlier messages (0 = Alice speaks, 1 = Bob speaks)."""

    speaker: object
    size: int
    table_a: np.ndarray | None = None
    table_b: np.ndarray | None = None

    @property
    def fixed(self) -> bool:
        return isinstance(self.speaker, str)

    def speakers(self) -> set[str]:
        if self.fixed:
            return {self.speaker}
        vals = set(np.unique(np.asarray(self.speaker)).tolist())
        return {"A" if v == 0 else "B" for v in vals}


def _as_int(a) -> np.ndarray | None:
    return None if a is None else np.asarray(a, dtype=np.int64)


class ClassicalProtocol:
    """A standard classical protocol given by message truth tables."""

    def __init__(self, nx: int, ny: int, rounds: Sequence[ClassicalRound] = (), *,
                 coins_a: Sequence = (), coins_b: Sequence = (), public=None,
                 out_a=None, out_b=None, out_a_size: int | None = None, out_b_size: int | None = None):
        self.nx, self.ny = int(nx), int(ny)
        self.coins_a = tuple(np.asarray(c, dtype=float) for c in coins_a)
        self.coins_b = tuple(np.asarray(c, dtype=float) for c in coins_b)
        self.public = np.asarray([1.0] if public is None else public, dtype=float)
        self.rounds = tuple(
            ClassicalRound(
                r.speaker if isinstance(r.speaker, str) else np.asarray(r.speaker, dtype=np.int64),
                int(r.size), _as_int(r.table_a), _as_int(r.table_b),
            )
            for r in rounds
        )
        self.out_a, self.out_b = _as_int(out_a), _as_int(out_b)
        self.out_a_size = out_a_size if out_a_size is not None else (int(self.out_a.max()) + 1 if self.out_a is not None else 1)
        self.out_b_size = out_b_size if out_b_size is not None else (int(self.out_b.max()) + 1 if self.out_b is not None else 1)
        self._validate()

    # -- shape bookkeeping ------------------------------------------------

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(r.size for r in self.rounds)

    @property
    def nr(self) -> int:
        return self.public.size

    def coin_dims(self, party: str) -> tuple[int, ...]:
        return tuple(c.size for c in (self.coins_a if party == "A" else self.coins_b))

    def table_shape(self, party: str, i: int) -> tuple[int, ...]:
        n_in = self.nx if party == "A" else self.ny
        return (n_in, *self.coin_dims(party), self.nr, *self.sizes[:i])

    def output_shape(self, party: str) -> tuple[int, ...]:
        return self.table_shape(party, len(self.rounds))

    def _validate(self):
        for name, dists in (("coins_a", self.coins_a), ("coins_b", self.coins_b), ("public", (self.public,))):
            for d in dists:
                if d.ndim != 1 or d.size < 1 or np.any(d < 0) or abs(d.sum() - 1) > 1e-10:
                    raise ValueError(f"{name}: invalid distribution {d}")
        for i, r in enumerate(self.rounds):
            if r.size < 1:
                raise ValueError(f"round {i + 1}: message alphabet must be non-empty")
            if r.fixed:
                if r.speaker not in ("A", "B"):
                    raise ValueError(f"round {i + 1}: speaker must be 'A' or 'B'")
            else:
                sp = np.asarray(r.speaker)
                if sp.shape != self.sizes[:i]:
                    raise ValueError(f"round {i + 1}: speaker table shape {sp.shape}, expected {self.sizes[:i]}")
                if not np.all((sp == 0) | (sp == 1)):
                    raise ValueError(f"round {i + 1}: speaker table entries must be 0 or 1")
            for party, t in (("A", r.table_a), ("B", r.table_b)):
                if party in r.speakers():
                    if t is None:
                        raise ValueError(f"round {i + 1}: missing message table for {party}")
                if t is not None:
                    if t.shape != self.table_shape(party, i):
                        raise ValueError(
                            f"round {i + 1}: table for {party} has shape {t.shape}, expected {self.table_shape(party, i)}"
                        )
                    if t.size and (t.min() < 0 or t.max() >= r.size):
                        raise ValueError(f"round {i + 1}: message values outside [0, {r.size})")
        for party, t, n in (("A", self.out_a, self.out_a_size), ("B", self.out_b, self.out_b_size)):
            if t is not None:
                if t.shape != self.output_shape(party):
                    raise ValueError(f"output table for {party} has shape {t.shape}, expected {self.output_shape(party)}")
                if t.size and (t.min() < 0 or t.max() >= n):
                    raise ValueError(f"output values for {party} outside [0, {n})")

    # -- properties -------------------------------------------------------

    @property
    def fixed_order(self) -> bool:
        return all(r.fixed for r in self.rounds)

    @property
    def alternating(self) -> bool:
        return self.fixed_order and all(r.speaker == ("A" if i % 2 == 0 else "B") for i, r in enumerate(self.rounds))

    @property
    def has_private_coins(self) -> bool:
        return any(c.size > 1 for c in self.coins_a + self.coins_b)

    def cc(self) -> float:
        """Communication in bits: sum of lg |alphabet| over messages."""
        return float(sum(math.log2(s) for s in self.sizes))

    def __repr__(self):
        order = "".join(r.speaker if r.fixed else "?" for r in self.rounds)
        return f"ClassicalProtocol(nx={self.nx}, ny={self.ny}, rounds={order or '-'}, sizes={self.sizes})"

    def equals(self, other: "ClassicalProtocol") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(np.asarray(a), np.asarray(b))

        if (self.nx, self.ny, self.sizes) != (other.nx, other.ny, other.sizes):
            return False
        if len(self.coins_a) != len(other.coins_a) or len(self.coins_b) != len(other.coins_b):
            return False
        if not all(same(a, b) for a, b in zip(self.coins_a + self.coins_b, other.coins_a + other.coins_b)):
            return False
        if not same(self.public, other.public):
            return False
        for r, s in zip(self.rounds, other.rounds):
            if r.fixed != s.fixed or (r.fixed and r.speaker != s.speaker) or (not r.fixed and not same(r.speaker, s.speaker)):
                return False
            if not (same(r.table_a, s.table_a) and same(r.table_b, s.table_b)):
                return False
        return same(self.out_a, other.out_a) and same(self.out_b, other.out_b)


@dataclass(frozen=True)
class Extension:
    """Joint distribution over (x, y, d); the copies X', Y' are implicit."""

    probs: np.ndarray  # shape (nx, ny, nd)

    def check(self, mu: InputDistribution, tol: float = 1e-12):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 3 or p.shape[:2] != mu.probs.shape:
            raise ValueError(f"extension shape {p.shape} incompatible with inputs {mu.probs.shape}")
        if np.any(p < 0) or np.max(np.abs(p.sum(axis=2) - mu.probs)) > tol:
            raise ValueError("extension marginal on XY differs from mu")

    @classmethod
    def trivial(cls, mu: InputDistribution) -> "Extension":
        return cls(mu.probs[:, :, None].copy())

    @classmethod
    def function(cls, mu: InputDistribution, f: Callable[[int, int], int], nd: int) -> "Extension":
        p = np.zeros(mu.probs.shape + (nd,))
        for x, y in np.ndindex(*mu.probs.shape):
            p[x, y, f(x, y)] = mu.probs[x, y]
        return cls(p)

    @classmethod
    def channel(cls, mu: InputDistribution, kernel) -> "Extension":
        """D drawn from kernel[x, d] (a noisy channel of X)."""
        k = np.asarray(kernel, dtype=float)
        return cls(mu.probs[:, :, None] * k[:, None, :])


def _atoms(weights: list[tuple[str, np.ndarray]]) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Enumerate the support of a product of independent factors.

    Each factor is (name, weights array); multi-dimensional weights give one
    column per axis named name0, name1, ...
    """
    shape = []
    for _, w in weights:
        shape.extend(w.shape)
    total = int(np.prod(shape, dtype=np.int64)) if shape else 1
    if total > ATOM_CAP * 16:
        raise CapError(f"enumeration grid of {total} points exceeds the cap")
    p = np.ones(())
    for _, w in weights:
        p = np.multiply.outer(p, w)
    idx = np.flatnonzero(p)
    if idx.size > ATOM_CAP:
        raise CapError(f"joint support of {idx.size} atoms exceeds the cap {ATOM_CAP}")
    coords = np.unravel_index(idx, p.shape) if p.ndim else ()
    cols = {}
    k = 0
    for name, w in weights:
        if w.ndim == 1:
            cols[name] = coords[k]
        else:
            for j in range(w.ndim):
                cols[f"{name}{j}"] = coords[k + j]
        k += w.ndim
    return p.reshape(-1)[idx], cols


def _lookup(table: np.ndarray, index_cols: list[np.ndarray]) -> np.ndarray:
    if not index_cols:
        return np.broadcast_to(table, ()).copy()
    return table[tuple(index_cols)]


def run_classical(pi: ClassicalProtocol, mu: InputDistribution, ext: Extension | None = None) -> JointTable:
    """Exact joint distribution over inputs, coins, messages and outputs.

    Columns: x, y, (d), sa0.., sb0.., r, m1.., a_out, b_out.
    """
    if (mu.x_dim, mu.y_dim) != (pi.nx, pi.ny):
        raise ValueError("distribution does not match the protocol's input alphabets")
    factors = []
    if ext is not None:
        ext.check(mu)
        factors.append(("xyd", np.asarray(ext.probs, float)))
    else:
        factors.append(("xy", mu.probs))
    for k, c in enumerate(pi.coins_a):
        factors.append((f"sa{k}", c))
    for k, c in enumerate(pi.coins_b):
        factors.append((f"sb{k}", c))
    factors.append(("r", pi.public))
    probs, cols = _atoms(factors)
    if ext is not None:
        cols["x"], cols["y"], cols["d"] = cols.pop("xyd0"), cols.pop("xyd1"), cols.pop("xyd2")
    else:
        cols["x"], cols["y"] = cols.pop("xy0"), cols.pop("xy1")
    sa = [cols[f"sa{k}"] for k in range(len(pi.coins_a))]
    sb = [cols[f"sb{k}"] for k in range(len(pi.coins_b))]
    msgs: list[np.ndarray] = []
    for i, rd in enumerate(pi.rounds):
        va = vb = None
        if rd.table_a is not None:
            va = _lookup(rd.table_a, [cols["x"], *sa, cols["r"], *msgs])
        if rd.table_b is not None:
            vb = _lookup(rd.table_b, [cols["y"], *sb, cols["r"], *msgs])
        if rd.fixed:
            m = va if rd.speaker == "A" else vb
        else:
            spk = _lookup(rd.speaker, msgs) if msgs else np.full(probs.size, int(rd.speaker))
            m = np.where(spk == 0, va if va is not None else 0, vb if vb is not None else 0)
        m = np.broadcast_to(m, probs.shape).astype(np.int64)
        msgs.append(m)
        cols[f"m{i + 1}"] = m
    for party, t, key in (("A", pi.out_a, "a_out"), ("B", pi.out_b, "b_out")):
        if t is None:
            cols[key] = np.zeros(probs.size, dtype=np.int64)
        else:
            own = cols["x"] if party == "A" else cols["y"]
            coins = sa if party == "A" else sb
            cols[key] = np.broadcast_to(_lookup(t, [own, *coins, cols["r"], *msgs]), probs.shape)
    table = JointTable(probs, cols)
    bad = markov_violations(pi, table)
    if bad:
        raise AssertionError("message determinism violated: " + "; ".join(bad))
    return table


def _coin_cols(pi: ClassicalProtocol, party: str) -> list[str]:
    n = len(pi.coins_a) if party == "A" else len(pi.coins_b)
    return [f"{'sa' if party == 'A' else 'sb'}{k}" for k in range(n)]


def _msg_cols(pi: ClassicalProtocol, upto: int | None = None) -> list[str]:
    n = len(pi.rounds) if upto is None else upto
    return [f"m{i + 1}" for i in range(n)]


def markov_violations(pi: ClassicalProtocol, table: JointTable, tol: float = 1e-12) -> list[str]:
    """Each message must be a function of its speaker's view."""
    bad = []
    for i, rd in enumerate(pi.rounds):
        prev = _msg_cols(pi, i)
        if rd.fixed:
            own = ["x"] + _coin_cols(pi, "A") if rd.speaker == "A" else ["y"] + _coin_cols(pi, "B")
            view = own + ["r"] + prev
        else:
            view = ["x", "y", "r"] + _coin_cols(pi, "A") + _coin_cols(pi, "B") + prev
        h = table.entropy(view + [f"m{i + 1}"]) - table.entropy(view)
        if h > tol:
            bad.append(f"round {i + 1}: H(M | view) = {h:.3e}")
    return bad


@dataclass(frozen=True)
class ICReport:
    a_to_b: float
    b_to_a: float

    @property
    def total(self) -> float:
        return self.a_to_b + self.b_to_a


def ic(pi: ClassicalProtocol, mu: InputDistribution, table: JointTable | None = None) -> ICReport:
    """I(X; M | R Y) + I(Y; M | R X) with M the whole transcript."""
    t = table if table is not None else run_classical(pi, mu)
    m = _msg_cols(pi)
    return ICReport(t.cmi({"x"}, m, {"r", "y"}), t.cmi({"y"}, m, {"r", "x"}))


def ic_extended(pi: ClassicalProtocol, mu: InputDistribution, ext: Extension) -> float:
    """Per-message form against an extension D of the inputs:
    sum_i I(XYD; M_i | R S_B Y M_<i) + I(XYD; M_i | R S_A X M_<i)."""
    t = run_classical(pi, mu, ext)
    total = 0.0
    sa, sb = _coin_cols(pi, "A"), _coin_cols(pi, "B")
    for i in range(len(pi.rounds)):
        prev = _msg_cols(pi, i)
        mi = {f"m{i + 1}"}
        for cond in (["r", "y", *sb, *prev], ["r", "x", *sa, *prev]):
            total += t.cmi({"x", "y", "d"} - set(cond), mi, cond)
    return total


def transcript_distribution(pi: ClassicalProtocol, mu: InputDistribution) -> dict[tuple, float]:
    return run_classical(pi, mu).distribution(_msg_cols(pi))


def classical_channel(pi: ClassicalProtocol, mu: InputDistribution) -> np.ndarray:
    """Joint distribution P[x, y, a, b] of inputs and outputs."""
    table = run_classical(pi, mu)
    out = np.zeros((pi.nx, pi.ny, pi.out_a_size, pi.out_b_size))
    for (x, y, a, b), p in table.distribution(["x", "y", "a_out", "b_out"]).items():
        out[x, y, a, b] += p
    return out


# -- padding and canonical randomness ---------------------------------------------


def _tabulate(shape: Sequence[int], fn: Callable[[tuple], int]) -> np.ndarray:
    out = np.zeros(tuple(shape), dtype=np.int64)
    for idx in np.ndindex(*shape):
        out[idx] = fn(idx)
    return out


def pad_messages(pi: ClassicalProtocol) -> ClassicalProtocol:
    """Fixed alternating order starting with Alice.

    A round spoken by a fixed party that is out of turn gets a one-letter
    dummy round before it; a round whose speaker depends on the transcript
    becomes two rounds (one per party), the silent party sending the pad
    letter, which is an extra symbol appended to the alphabet.
    """
    if pi.alternating:
        return pi
    slots = []  # (owner, size, original round, padded)
    for i, rd in enumerate(pi.rounds):
        nxt = "A" if len(slots) % 2 == 0 else "B"
        if rd.fixed:
            if rd.speaker != nxt:
                slots.append((nxt, 1, None, False))
            slots.append((rd.speaker, rd.size, i, False))
        else:
            other = "B" if nxt == "A" else "A"
            slots.append((nxt, rd.size + 1, i, True))
            slots.append((other, rd.size + 1, i, True))
    slot_of = {}
    for k, (_, _, orig, _) in enumerate(slots):
        if orig is not None:
            slot_of.setdefault(orig, []).append(k)

    def decode(padded: Sequence[int], upto: int) -> list[int]:
        """Original messages for rounds < upto from a padded prefix."""
        orig = []
        for i in range(upto):
            rd = pi.rounds[i]
            ks = slot_of[i]
            if rd.fixed:
                v = padded[ks[0]]
            else:
                spk = "A" if int(np.asarray(rd.speaker)[tuple(orig)]) == 0 else "B"
                k = next(k for k in ks if slots[k][0] == spk)
                v = padded[k]
            orig.append(min(int(v), rd.size - 1))  # the pad letter only on unreachable prefixes
        return orig

    sizes = [s for _, s, _, _ in slots]
    rounds = []
    for k, (owner, size, orig, padded) in enumerate(slots):
        shape = (pi.nx if owner == "A" else pi.ny, *pi.coin_dims(owner), pi.nr, *sizes[:k])
        ncoin = len(pi.coin_dims(owner))
        if orig is None:
            table = np.zeros(shape, dtype=np.int64)
        else:
            rd = pi.rounds[orig]
            src = rd.table_a if owner == "A" else rd.table_b

            def fn(idx, rd=rd, src=src, orig=orig, owner=owner, padded=padded, ncoin=ncoin, size=size):
                head = idx[: 2 + ncoin]
                prev = decode(idx[2 + ncoin :], orig)
                if padded:
                    spk = "A" if int(np.asarray(rd.speaker)[tuple(prev)]) == 0 else "B"
                    if spk != owner:
                        return size - 1
                return int(src[tuple(head) + tuple(prev)])

            table = _tabulate(shape, fn)
        rounds.append(ClassicalRound(owner, size, table if owner == "A" else None, table if owner == "B" else None))

    outs = {}
    for party, t in (("A", pi.out_a), ("B", pi.out_b)):
        if t is None:
            outs[party] = None
            continue
        ncoin = len(pi.coin_dims(party))
        shape = (pi.nx if party == "A" else pi.ny, *pi.coin_dims(party), pi.nr, *sizes)
        outs[party] = _tabulate(
            shape, lambda idx, t=t, ncoin=ncoin: int(t[tuple(idx[: 2 + ncoin]) + tuple(decode(idx[2 + ncoin :], len(pi.rounds)))])
        )
    return ClassicalProtocol(
        pi.nx, pi.ny, rounds, coins_a=pi.coins_a, coins_b=pi.coins_b, public=pi.public,
        out_a=outs["A"], out_b=outs["B"], out_a_size=pi.out_a_size, out_b_size=pi.out_b_size,
    )


def coin_dependencies(pi: ClassicalProtocol, party: str, table: np.ndarray) -> list[int]:
    """Indices of the coin components a table actually depends on."""
    deps = []
    for k in range(len(pi.coin_dims(party))):
        axis = 1 + k
        if table.shape[axis] > 1 and np.any(table != np.take(table, [0], axis=axis)):
            deps.append(k)
    return deps


def _message_dependencies(pi: ClassicalProtocol, party: str, table: np.ndarray) -> list[int]:
    ncoin = len(pi.coin_dims(party))
    deps = []
    for j in range(table.ndim - 2 - ncoin):
        axis = 2 + ncoin + j
        if table.shape[axis] > 1 and np.any(table != np.take(table, [0], axis=axis)):
            deps.append(j)
    return deps


def canonical_randomness_form(pi: ClassicalProtocol, cap: int = ATOM_CAP) -> ClassicalProtocol:
    """Replace each party's private coins by fresh per-round randomness.

    For a round spoken by Alice and every view (x, r, m_<i) the new coin has
    an independent coordinate distributed as the message given that view,
    i.e. under the posterior of Alice's coins given her earlier messages.
    Views where the message is deterministic, or that no inputs and coins
    can produce, get no coordinate. Outputs are treated as one more round. Requires a fixed
    speaking order (apply pad_messages first).
    """
    if not pi.fixed_order:
        raise ValueError("canonical randomness form needs a fixed speaking order; pad the protocol first")
    if not pi.has_private_coins:
        return pi

    # views that occur for some inputs and coins; the rest stay deterministic
    reach_table = run_classical(pi, InputDistribution.uniform(pi.nx, pi.ny))
    reachable = {}
    for party, own in (("A", "x"), ("B", "y")):
        for i in range(len(pi.rounds) + 1):
            reachable[party, i] = set(reach_table.distribution([own, "r", *_msg_cols(pi, i)]))
    plan = {"A": [], "B": []}  # per party: list of (round index or 'out', views, supports, probs)

    for party in ("A", "B"):
        dims = pi.coin_dims(party)
        prior = np.ones(())
        for c in (pi.coins_a if party == "A" else pi.coins_b):
            prior = np.multiply.outer(prior, c)
        n_in = pi.nx if party == "A" else pi.ny
        own_rounds = [i for i, rd in enumerate(pi.rounds) if rd.speaker == party]
        targets = own_rounds + (["out"] if (pi.out_a if party == "A" else pi.out_b) is not None else [])
        for tgt in targets:
            i = len(pi.rounds) if tgt == "out" else tgt
            table = (pi.out_a if party == "A" else pi.out_b) if tgt == "out" else (
                pi.rounds[i].table_a if party == "A" else pi.rounds[i].table_b)
            size = (pi.out_a_size if party == "A" else pi.out_b_size) if tgt == "out" else pi.rounds[i].size
            views, supports, probs, det = [], [], [], {}
            for view in itertools.product(range(n_in), range(pi.nr), *[range(s) for s in pi.sizes[:i]]):
                inp, r, prev = view[0], view[1], view[2:]
                if view not in reachable[party, i]:
                    det[view] = int(np.asarray(table[(inp, *[0] * len(dims), r, *prev)]))
                    continue
                post = prior.copy() if dims else np.ones(())
                for j in own_rounds:
                    if j >= i:
                        break
                    tj = pi.rounds[j].table_a if party == "A" else pi.rounds[j].table_b
                    sl = tj[(inp, *[slice(None)] * len(dims), r, *prev[:j])]
                    post = post * (sl == prev[j])
                vals = table[(inp, *[slice(None)] * len(dims), r, *prev)]
                z = post.sum()
                if z <= 0:
                    det[view] = int(np.asarray(vals).reshape(-1)[0])
                    continue
                dist = np.bincount(np.asarray(vals).reshape(-1), weights=(post / z).reshape(-1), minlength=size)
                supp = np.flatnonzero(dist > 1e-15)
                if supp.size == 1:
                    det[view] = int(supp[0])
                    continue
                views.append(view)
                supports.append(supp)
                probs.append(dist[supp] / dist[supp].sum())
            comp_size = int(np.prod([s.size for s in supports], dtype=object)) if supports else 1
            if comp_size > cap:
                raise CapError(
                    f"{party} {'output' if tgt == 'out' else f'round {i + 1}'}: {len(views)} random views "
                    f"give a fresh coin with {comp_size} values, over the cap {cap}"
                )
            plan[party].append((tgt, views, supports, probs, det))

    def components(party):
        comps = []
        for tgt, views, supports, probs, det in plan[party]:
            if views:
                dist = np.ones(())
                for p in probs:
                    dist = np.multiply.outer(dist, p)
                comps.append((tgt, dist.reshape(-1)))
        return comps

    comps = {p: components(p) for p in ("A", "B")}
    new_coin_dims = {p: tuple(d.size for _, d in comps[p]) for p in ("A", "B")}

    def build(party, tgt):
        i = len(pi.rounds) if tgt == "out" else tgt
        entry = next(e for e in plan[party] if e[0] == tgt)
        _, views, supports, probs, det = entry
        n_in = pi.nx if party == "A" else pi.ny
        cdims = new_coin_dims[party]
        shape = (n_in, *cdims, pi.nr, *pi.sizes[:i])
        out = np.zeros(shape, dtype=np.int64)
        comp_index = [t for t, _ in comps[party]].index(tgt) if views else None
        radix = [s.size for s in supports]
        for view, v in det.items():
            out[(view[0], *[slice(None)] * len(cdims), view[1], *view[2:])] = v
        if views:
            coords = np.array(np.unravel_index(np.arange(int(np.prod(radix))), radix))
            for k, view in enumerate(views):
                vals = supports[k][coords[k]]
                shape_b = [1] * len(cdims)
                shape_b[comp_index] = vals.size
                block = np.broadcast_to(vals.reshape(shape_b), cdims)
                out[(view[0], *[slice(None)] * len(cdims), view[1], *view[2:])] = block
        return out

    rounds = []
    for i, rd in enumerate(pi.rounds):
        t = build(rd.speaker, i)
        rounds.append(ClassicalRound(rd.speaker, rd.size, t if rd.speaker == "A" else None, t if rd.speaker == "B" else None))
    out_a = build("A", "out") if pi.out_a is not None else None
    out_b = build("B", "out") if pi.out_b is not None else None
    return ClassicalProtocol(
        pi.nx, pi.ny, rounds,
        coins_a=[d for _, d in comps["A"]], coins_b=[d for _, d in comps["B"]], public=pi.public,
        out_a=out_a, out_b=out_b, out_a_size=pi.out_a_size, out_b_size=pi.out_b_size,
    )


# -- reversible protocols ------------------------------------------------------


GATES = {"NOT": 1, "CNOT": 2, "TOFFOLI": 3, "SWAP": 2}


@dataclass(frozen=True)
class Circuit:
    """A bijection from (inputs + ancillas) to outputs, as a flat index table.

    Ancillas are fresh registers that start at value 0. ``message`` lists the
    output registers handed to the other party after the circuit.
    """

    owner: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    table: np.ndarray
    ancillas: tuple[str, ...] = ()
    message: tuple[str, ...] = ()

    def __post_init__(self):
        for f in ("inputs", "outputs", "ancillas", "message"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        object.__setattr__(self, "table", np.asarray(self.table, dtype=np.int64))

    @property
    def domain(self) -> tuple[str, ...]:
        return self.inputs + self.ancillas

    @classmethod
    def from_function(cls, owner, inputs, outputs, sizes: Mapping[str, int], fn, *, ancillas=(), message=()) -> "Circuit":
        dom = tuple(inputs) + tuple(ancillas)
        dd = [sizes[n] for n in dom]
        od = [sizes[n] for n in outputs]
        table = np.zeros(int(np.prod(dd, dtype=np.int64)) if dd else 1, dtype=np.int64)
        for k, vals in enumerate(itertools.product(*[range(d) for d in dd])):
            table[k] = np.ravel_multi_index(tuple(int(v) for v in fn(*vals)), od) if od else 0
        return cls(owner, tuple(inputs), tuple(outputs), table, tuple(ancillas), tuple(message))

    @classmethod
    def from_gates(cls, owner, inputs, gates, *, ancillas=(), outputs=None, message=()) -> "Circuit":
        """Compile NOT/CNOT/TOFFOLI/SWAP gates over bit registers.

        ``outputs`` renames the wires positionally (default: unchanged names).
        """
        wires = list(inputs) + list(ancillas)
        outputs = list(outputs) if outputs is not None else wires
        if len(outputs) != len(wires):
            raise ValueError("outputs must rename every wire")
        pos = {w: k for k, w in enumerate(wires)}
        for g in gates:
            name, args = g[0].upper(), g[1:]
            if name not in GATES or len(args) != GATES[name]:
                raise ValueError(f"bad gate {g}")
            for a in args:
                if a not in pos:
                    raise ValueError(f"gate {g} uses unknown wire {a!r}")

        def fn(*bits):
            b = list(bits)
            for g in gates:
                name, args = g[0].upper(), [pos[a] for a in g[1:]]
                if name == "NOT":
                    b[args[0]] ^= 1
                elif name == "CNOT":
                    b[args[1]] ^= b[args[0]]
                elif name == "TOFFOLI":
                    b[args[2]] ^= b[args[0]] & b[args[1]]
                else:
                    b[args[0]], b[args[1]] = b[args[1]], b[args[0]]
            return b

        sizes = {w: 2 for w in wires + outputs}
        return cls.from_function(owner, inputs, outputs, sizes, fn, ancillas=ancillas, message=message)

    @classmethod
    def copy(cls, owner, src: str, dst: str, size: int) -> "Circuit":
        """(s, 0) -> (s, s) realised as the bijection (s, a) -> (s, a + s mod size)."""
        return cls.from_function(owner, [src], [src, dst], {src: size, dst: size},
                                 lambda s, a: (s, (a + s) % size), ancillas=[dst])

    def is_bijection(self, sizes: Mapping[str, int]) -> bool:
        d_dom = int(np.prod([sizes[n] for n in self.domain], dtype=np.int64)) if self.domain else 1
        d_out = int(np.prod([sizes[n] for n in self.outputs], dtype=np.int64)) if self.outputs else 1
        if d_dom != d_out or self.table.shape != (d_dom,):
            return False
        inv = np.full(d_out, -1)
        ok = np.all((self.table >= 0) & (self.table < d_out))
        if not ok:
            return False
        inv[self.table] = np.arange(d_dom)
        return bool(np.all(inv >= 0) and np.array_equal(self.table[inv], np.arange(d_out)))

    def rename(self, mapping: Mapping[str, str]) -> "Circuit":
        m = lambda names: tuple(mapping.get(n, n) for n in names)
        return Circuit(self.owner, m(self.inputs), m(self.outputs), self.table, m(self.ancillas), m(self.message))


@dataclass(frozen=True)
class ReversibleProtocol:
    """Reversible-circuit protocol.

    Alice starts with ``x_registers``, her private coins and the Alice side
    of each public coin; Bob symmetrically. ``coins`` entries are
    (owner, register, distribution); ``public`` entries are
    (alice_register, bob_register, distribution) holding equal values.
    """

    sizes: Mapping[str, int]
    x_registers: tuple[str, ...]
    y_registers: tuple[str, ...]
    circuits: tuple[Circuit, ...] = ()
    coins: tuple = ()
    public: tuple = ()
    a_out: tuple[str, ...] = ()
    b_out: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sizes", dict(self.sizes))
        for f in ("x_registers", "y_registers", "circuits", "a_out", "b_out"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        object.__setattr__(self, "coins", tuple((o, n, np.asarray(d, float)) for o, n, d in self.coins))
        object.__setattr__(self, "public", tuple((a, b, np.asarray(d, float)) for a, b, d in self.public))

    @property
    def nx(self) -> int:
        return int(np.prod([self.sizes[n] for n in self.x_registers], dtype=np.int64))

    @property
    def ny(self) -> int:
        return int(np.prod([self.sizes[n] for n in self.y_registers], dtype=np.int64))

    def initial_holdings(self) -> dict[str, set]:
        hold = {"A": set(self.x_registers), "B": set(self.y_registers)}
        for owner, name, _ in self.coins:
            hold[owner].add(name)
        for a, b, _ in self.public:
            hold["A"].add(a)
            hold["B"].add(b)
        return hold

    def message_circuits(self) -> list[int]:
        return [k for k, c in enumerate(self.circuits) if c.message]

    def validate(self) -> list[str]:
        v = []
        hold = self.initial_holdings()
        for k, c in enumerate(self.circuits):
            tag = f"circuit {k + 1}"
            if c.owner not in ("A", "B"):
                v.append(f"{tag}: bad owner {c.owner!r}")
                continue
            other = "B" if c.owner == "A" else "A"
            for n in c.domain + c.outputs:
                if n not in self.sizes:
                    v.append(f"{tag}: register {n!r} has no declared size")
            if v:
                continue
            if not c.is_bijection(self.sizes):
                v.append(f"{tag}: table is not a bijection")
            for n in c.inputs:
                if n not in hold[c.owner]:
                    v.append(f"{tag}: {c.owner} does not hold {n!r}")
            for n in c.ancillas:
                if n in hold["A"] | hold["B"]:
                    v.append(f"{tag}: ancilla {n!r} is already in use")
            hold[c.owner] -= set(c.inputs)
            for n in c.outputs:
                if n in hold["A"] | hold["B"]:
                    v.append(f"{tag}: output {n!r} is already held")
            hold[c.owner] |= set(c.outputs)
            for n in c.message:
                if n not in c.outputs:
                    v.append(f"{tag}: message {n!r} is not an output")
                else:
                    hold[c.owner].discard(n)
                    hold[other].add(n)
        for party, outs in (("A", self.a_out), ("B", self.b_out)):
            for n in outs:
                if n not in hold[party]:
                    v.append(f"output {n!r} is not held by {party} at the end")
        return v


@dataclass
class ReversibleRun:
    table: JointTable
    snapshots: list[dict]  # per message circuit: sender, message cols, receiver cols, sender cols


def _unravel(values: np.ndarray, dims: Sequence[int]) -> list[np.ndarray]:
    if not dims:
        return []
    return list(np.unravel_index(values, dims))


def run_reversible(rp: ReversibleProtocol, mu: InputDistribution, ext: Extension | None = None) -> ReversibleRun:
    bad = rp.validate()
    if bad:
        raise ValueError("invalid reversible protocol: " + "; ".join(bad))
    if (mu.x_dim, mu.y_dim) != (rp.nx, rp.ny):
        raise ValueError("distribution does not match the protocol's input alphabets")
    factors = []
    if ext is not None:
        ext.check(mu)
        factors.append(("xyd", np.asarray(ext.probs, float)))
    else:
        factors.append(("xy", mu.probs))
    for k, (_, name, d) in enumerate(rp.coins):
        factors.append((f"coin{k}", d))
    for k, (_, _, d) in enumerate(rp.public):
        factors.append((f"pub{k}", d))
    probs, cols = _atoms(factors)
    pre = "xyd" if ext is not None else "xy"
    x, y = cols.pop(f"{pre}0"), cols.pop(f"{pre}1")
    out_cols = {"x": x, "y": y}
    if ext is not None:
        out_cols["d"] = cols.pop("xyd2")
    vals: dict[str, np.ndarray] = {}
    for n, v in zip(rp.x_registers, _unravel(x, [rp.sizes[n] for n in rp.x_registers])):
        vals[n] = v
    for n, v in zip(rp.y_registers, _unravel(y, [rp.sizes[n] for n in rp.y_registers])):
        vals[n] = v
    for k, (_, name, _) in enumerate(rp.coins):
        vals[name] = cols[f"coin{k}"]
    for k, (a, b, _) in enumerate(rp.public):
        vals[a] = cols[f"pub{k}"]
        vals[b] = cols[f"pub{k}"].copy()
    hold = rp.initial_holdings()
    snaps = []
    n = probs.size
    for k, c in enumerate(rp.circuits):
        dom_vals = [vals[nm] for nm in c.inputs] + [np.zeros(n, dtype=np.int64) for _ in c.ancillas]
        dd = [rp.sizes[nm] for nm in c.domain]
        flat = np.ravel_multi_index(dom_vals, dd) if dd else np.zeros(n, dtype=np.int64)
        res = c.table[flat]
        for nm in c.inputs:
            del vals[nm]
        for nm, v in zip(c.outputs, _unravel(res, [rp.sizes[o] for o in c.outputs])):
            vals[nm] = v
        hold[c.owner] = (hold[c.owner] - set(c.inputs)) | set(c.outputs)
        if c.message:
            other = "B" if c.owner == "A" else "A"
            hold[c.owner] -= set(c.message)
            snap = {"sender": c.owner, "circuit": k, "message": [], "receiver": [], "kept": []}
            for nm in sorted(c.message):
                key = f"{k}:msg:{nm}"
                out_cols[key] = vals[nm]
                snap["message"].append(key)
            for party, field_ in ((other, "receiver"), (c.owner, "kept")):
                for nm in sorted(hold[party]):
                    key = f"{k}:{party}:{nm}"
                    out_cols[key] = vals[nm]
                    snap[field_].append(key)
            snaps.append(snap)
            hold[other] |= set(c.message)
    for party, outs, key in (("A", rp.a_out, "a_out"), ("B", rp.b_out, "b_out")):
        dims = [rp.sizes[o] for o in outs]
        out_cols[key] = np.ravel_multi_index([vals[o] for o in outs], dims) if outs else np.zeros(n, dtype=np.int64)
    return ReversibleRun(JointTable(probs, out_cols), snaps)


@dataclass(frozen=True)
class RICReport:
    total: float
    terms: tuple[tuple[int, str, float, float], ...]  # (message number, sender, receiver term, sender term)


def ric(rp: ReversibleProtocol, mu: InputDistribution, ext: Extension | None = None) -> RICReport:
    """sum over messages of I(X'Y'D; M | receiver) + I(X'Y'D; M | sender's kept registers)."""
    run = run_reversible(rp, mu, ext)
    t = run.table
    src = {"x", "y", "d"} if ext is not None else {"x", "y"}
    terms = []
    for j, s in enumerate(run.snapshots):
        recv = t.cmi(src, s["message"], s["receiver"])
        send = t.cmi(src, s["message"], s["kept"])
        terms.append((j + 1, s["sender"], recv, send))
    return RICReport(float(sum(a + b for _, _, a, b in terms)), tuple(terms))


def _fresh(name: str, taken: set) -> str:
    cand = name + "_s"
    while cand in taken:
        cand += "s"
    return cand


def safe_reversible(rp: ReversibleProtocol) -> ReversibleProtocol:
    """Both parties first copy their inputs and run the protocol on the copies."""
    taken = set(rp.sizes)
    for c in rp.circuits:
        taken |= set(c.domain) | set(c.outputs)
    mapping, sizes, pre = {}, dict(rp.sizes), []
    for owner, regs in (("A", rp.x_registers), ("B", rp.y_registers)):
        for n in regs:
            new = _fresh(n, taken)
            taken.add(new)
            mapping[n] = new
            sizes[new] = rp.sizes[n]
            pre.append(Circuit.copy(owner, n, new, rp.sizes[n]))
    circuits = tuple(pre) + tuple(c.rename(mapping) for c in rp.circuits)
    return replace(
        rp, sizes=sizes, circuits=circuits,
        a_out=tuple(mapping.get(n, n) for n in rp.a_out),
        b_out=tuple(mapping.get(n, n) for n in rp.b_out),
    )


def tensor_product(rp1: ReversibleProtocol, rp2: ReversibleProtocol) -> ReversibleProtocol:
    """Run two protocols side by side, circuit by circuit (owners must match)."""
    if len(rp1.circuits) != len(rp2.circuits) or any(a.owner != b.owner for a, b in zip(rp1.circuits, rp2.circuits)):
        raise ValueError("tensor product needs equal circuit sequences (same owners)")
    m1 = {n: f"p1.{n}" for n in rp1.sizes}
    m2 = {n: f"p2.{n}" for n in rp2.sizes}
    sizes = {m1[n]: d for n, d in rp1.sizes.items()}
    sizes.update({m2[n]: d for n, d in rp2.sizes.items()})
    circuits = []
    for a, b in zip(rp1.circuits, rp2.circuits):
        a, b = a.rename(m1), b.rename(m2)
        dims_in_a = [sizes[n] for n in a.inputs]
        dims_in_b = [sizes[n] for n in b.inputs]
        dims_an_a = [sizes[n] for n in a.ancillas]
        dims_an_b = [sizes[n] for n in b.ancillas]
        dom = dims_in_a + dims_in_b + dims_an_a + dims_an_b
        total = int(np.prod(dom, dtype=np.int64)) if dom else 1
        idx = np.unravel_index(np.arange(total), dom) if dom else ()
        la, lb, lc = len(dims_in_a), len(dims_in_b), len(dims_an_a)
        ia = list(idx[:la]) + list(idx[la + lb : la + lb + lc])
        ib = list(idx[la : la + lb]) + list(idx[la + lb + lc :])
        fa = np.ravel_multi_index(ia, dims_in_a + dims_an_a) if ia else np.zeros(total, dtype=np.int64)
        fb = np.ravel_multi_index(ib, dims_in_b + dims_an_b) if ib else np.zeros(total, dtype=np.int64)
        oa, ob = a.table[fa], b.table[fb]
        od_a = [sizes[n] for n in a.outputs]
        od_b = [sizes[n] for n in b.outputs]
        parts = _unravel(oa, od_a) + _unravel(ob, od_b)
        table = np.ravel_multi_index(parts, od_a + od_b) if parts else np.zeros(total, dtype=np.int64)
        circuits.append(Circuit(a.owner, a.inputs + b.inputs, a.outputs + b.outputs, table,
                                a.ancillas + b.ancillas, a.message + b.message))
    return ReversibleProtocol(
        sizes,
        tuple(m1[n] for n in rp1.x_registers) + tuple(m2[n] for n in rp2.x_registers),
        tuple(m1[n] for n in rp1.y_registers) + tuple(m2[n] for n in rp2.y_registers),
        tuple(circuits),
        coins=tuple((o, m1[n], d) for o, n, d in rp1.coins) + tuple((o, m2[n], d) for o, n, d in rp2.coins),
        public=tuple((m1[a], m1[b], d) for a, b, d in rp1.public) + tuple((m2[a], m2[b], d) for a, b, d in rp2.public),
        a_out=tuple(m1[n] for n in rp1.a_out) + tuple(m2[n] for n in rp2.a_out),
        b_out=tuple(m1[n] for n in rp1.b_out) + tuple(m2[n] for n in rp2.b_out),
    )


def unforget_simulation(rp: ReversibleProtocol) -> ClassicalProtocol:
    """The standard protocol sending the same messages as ``rp``.

    A standard protocol's parties remember every message, so nothing sent is
    ever forgotten. Message i is the value the sender's circuits produce from
    their input, coins, public coins and the messages received so far; the
    alphabet of a message is the product of its registers' sizes.
    """
    bad = rp.validate()
    if bad:
        raise ValueError("invalid reversible protocol: " + "; ".join(bad))
    msgs = rp.message_circuits()
    msg_dims = [[rp.sizes[n] for n in rp.circuits[k].message] for k in msgs]
    sizes = [int(np.prod(d, dtype=np.int64)) for d in msg_dims]
    coins = {p: [(name, d) for o, name, d in rp.coins if o == p] for p in ("A", "B")}
    pub_dims = [d.size for _, _, d in rp.public]
    public = np.ones(())
    for _, _, d in rp.public:
        public = np.multiply.outer(public, d)
    public = public.reshape(-1)

    def simulate(party: str, grid_shape, upto_msg: int | None):
        """Run ``party``'s circuits over a grid of (input, coins, r, messages).

        Returns the register values after the circuit sending message
        ``upto_msg`` (0-based), or after all circuits when None.
        """
        n = int(np.prod(grid_shape, dtype=np.int64))
        idx = np.unravel_index(np.arange(n), grid_shape)
        inp = idx[0]
        ncoin = len(coins[party])
        coin_idx = idx[1 : 1 + ncoin]
        r = idx[1 + ncoin]
        m_idx = idx[2 + ncoin :]
        vals = {}
        regs = rp.x_registers if party == "A" else rp.y_registers
        for name, v in zip(regs, _unravel(inp, [rp.sizes[nm] for nm in regs])):
            vals[name] = v
        for (name, _), v in zip(coins[party], coin_idx):
            vals[name] = v
        for (a, b, _), v in zip(rp.public, _unravel(r, pub_dims)):
            vals[a if party == "A" else b] = v
        sent = None
        for j, k in enumerate(msgs + [None]):
            lo = 0 if j == 0 else msgs[j - 1] + 1
            hi = len(rp.circuits) if k is None else k + 1
            for kk in range(lo, hi):
                c = rp.circuits[kk]
                if c.owner != party:
                    continue
                dom_vals = [vals[nm] for nm in c.inputs] + [np.zeros(n, dtype=np.int64) for _ in c.ancillas]
                dd = [rp.sizes[nm] for nm in c.domain]
                flat = np.ravel_multi_index(dom_vals, dd) if dd else np.zeros(n, dtype=np.int64)
                res = c.table[flat]
                for nm in c.inputs:
                    del vals[nm]
                for nm, v in zip(c.outputs, _unravel(res, [rp.sizes[o] for o in c.outputs])):
                    vals[nm] = v
            if k is None:
                break
            c = rp.circuits[k]
            if upto_msg is not None and j == upto_msg:
                dims = msg_dims[j]
                sent = np.ravel_multi_index([vals[nm] for nm in c.message], dims) if dims else np.zeros(n, dtype=np.int64)
                return vals, sent
            if c.owner == party:
                for nm in c.message:
                    del vals[nm]
            else:
                # received message values come from the grid
                for nm, v in zip(c.message, _unravel(m_idx[j], msg_dims[j])):
                    vals[nm] = v
        return vals, sent

    rounds = []
    for j, k in enumerate(msgs):
        party = rp.circuits[k].owner
        n_in = rp.nx if party == "A" else rp.ny
        shape = (n_in, *[d.size for _, d in coins[party]], public.size, *sizes[:j])
        _, sent = simulate(party, shape, j)
        table = sent.reshape(shape)
        rounds.append(ClassicalRound(party, sizes[j], table if party == "A" else None, table if party == "B" else None))
    outs = {}
    for party, names in (("A", rp.a_out), ("B", rp.b_out)):
        n_in = rp.nx if party == "A" else rp.ny
        shape = (n_in, *[d.size for _, d in coins[party]], public.size, *sizes)
        vals, _ = simulate(party, shape, None)
        dims = [rp.sizes[nm] for nm in names]
        n = int(np.prod(shape, dtype=np.int64))
        flat = np.ravel_multi_index([vals[nm] for nm in names], dims) if names else np.zeros(n, dtype=np.int64)
        outs[party] = (flat.reshape(shape), int(np.prod(dims, dtype=np.int64)) if dims else 1)
    return ClassicalProtocol(
        rp.nx, rp.ny, rounds,
        coins_a=[d for _, d in coins["A"]], coins_b=[d for _, d in coins["B"]], public=public,
        out_a=outs["A"][0], out_b=outs["B"][0], out_a_size=outs["A"][1], out_b_size=outs["B"][1],
    )
