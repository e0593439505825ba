"""JSON file formats for protocols, distributions, classical and reversible
protocols.

Complex entries are [re, im] pairs; matrices are row-major with registers in
big-endian order. Every document carries a ``format`` tag. Parsing errors
raise FormatError with a line/column (JSON syntax) or a path into the
document (schema).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .classical import Circuit, ClassicalProtocol, ClassicalRound, ReversibleProtocol
from .protocol import ALICE, BOB, Isometry, ProtocolError, QuantumProtocol, Round, validate_protocol
from .state import InputDistribution, PureState, Register, RegisterSystem

__all__ = [
    "FormatError",
    "PROTOCOL_FORMAT",
    "DISTRIBUTION_FORMAT",
    "CLASSICAL_FORMAT",
    "REVERSIBLE_FORMAT",
    "protocol_to_dict",
    "protocol_from_dict",
    "distribution_to_dict",
    "distribution_from_dict",
    "classical_to_dict",
    "classical_from_dict",
    "reversible_to_dict",
    "reversible_from_dict",
    "loads",
    "load",
    "dumps",
    "protocols_equal",
]

PROTOCOL_FORMAT = "qicost-protocol/1"
DISTRIBUTION_FORMAT = "qicost-distribution/1"
CLASSICAL_FORMAT = "qicost-classical/1"
REVERSIBLE_FORMAT = "qicost-reversible/1"


class FormatError(ValueError):
    """A document that does not parse or does not match its schema."""


def _req(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise FormatError(f"{where}: expected an object")
    if key not in d:
        raise FormatError(f"{where}: missing field {key!r}")
    return d[key]


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise FormatError(f"{where}: expected an integer, got {v!r}")
    return v


def _complex_array(v, where: str) -> np.ndarray:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as e:
        raise FormatError(f"{where}: expected [re, im] pairs ({e})") from None
    if a.ndim < 1 or a.shape[-1] != 2:
        raise FormatError(f"{where}: expected [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def _pairs(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _check_format(doc, expected: str):
    tag = _req(doc, "format", "document")
    if tag != expected:
        raise FormatError(f"document: format {tag!r}, expected {expected!r}")


# -- quantum protocols --------------------------------------------------------


def protocol_to_dict(p: QuantumProtocol) -> dict:
    dims = p.register_dims()
    ent = set(p.entanglement.names) if p.entanglement is not None else set()
    regs = []
    for name, d in dims.items():
        entry = {"name": name, "dim": int(d)}
        if name in ent:
            entry["owner"] = ALICE if name in p.alice_registers else BOB
        regs.append(entry)
    doc = {"format": PROTOCOL_FORMAT, "x_dim": p.x_dim, "y_dim": p.y_dim, "registers": regs}
    if p.entanglement is not None:
        doc["entanglement"] = {
            "registers": list(p.entanglement.names),
            "amplitudes": _pairs(p.entanglement.vector),
        }
    doc["rounds"] = [
        {
            "owner": r.owner,
            "in": list(r.isometry.in_names),
            "out": list(r.isometry.out_names),
            "controls": list(r.controls),
            "message": r.message,
            "partial": r.isometry.partial,
            "matrix": _pairs(r.isometry.matrix),
        }
        for r in p.rounds
    ]
    doc["outputs"] = {"A": list(p.a_out), "B": list(p.b_out)}
    doc["custom_order"] = p.custom_order
    return doc


def protocol_from_dict(doc: dict, *, validate: bool = True) -> QuantumProtocol:
    _check_format(doc, PROTOCOL_FORMAT)
    x_dim = _int(_req(doc, "x_dim", "document"), "x_dim")
    y_dim = _int(_req(doc, "y_dim", "document"), "y_dim")
    dims = {"X": x_dim, "Y": y_dim}
    owners = {}
    for k, r in enumerate(doc.get("registers", [])):
        where = f"registers[{k}]"
        name = _req(r, "name", where)
        dims[name] = _int(_req(r, "dim", where), where + ".dim")
        if "owner" in r:
            if r["owner"] not in (ALICE, BOB):
                raise FormatError(f"{where}.owner: expected 'A' or 'B'")
            owners[name] = r["owner"]

    def reg(name, where):
        if name not in dims:
            raise FormatError(f"{where}: undeclared register {name!r}")
        return Register(name, dims[name])

    ent, alice = None, ()
    if doc.get("entanglement") is not None:
        e = doc["entanglement"]
        names = _req(e, "registers", "entanglement")
        sys = RegisterSystem(tuple(reg(n, "entanglement.registers") for n in names))
        amps = _complex_array(_req(e, "amplitudes", "entanglement"), "entanglement.amplitudes")
        try:
            ent = PureState(sys, amps)
        except ValueError as err:
            raise FormatError(f"entanglement: {err}") from None
        missing = [n for n in names if n not in owners]
        if missing:
            raise FormatError(f"entanglement: registers {missing} have no owner")
        alice = tuple(n for n in names if owners[n] == ALICE)
    rounds = []
    for k, r in enumerate(_req(doc, "rounds", "document")):
        where = f"rounds[{k}]"
        owner = _req(r, "owner", where)
        if owner not in (ALICE, BOB):
            raise FormatError(f"{where}.owner: expected 'A' or 'B'")
        ins = [reg(n, where + ".in") for n in _req(r, "in", where)]
        outs = [reg(n, where + ".out") for n in _req(r, "out", where)]
        m = _complex_array(_req(r, "matrix", where), where + ".matrix")
        try:
            iso = Isometry(ins, outs, m, partial=bool(r.get("partial", False)))
        except ProtocolError as err:
            raise FormatError(f"{where}: {err}") from None
        rounds.append(Round(owner, iso, r.get("message"), tuple(r.get("controls", ()))))
    outs = doc.get("outputs", {})
    p = QuantumProtocol(x_dim, y_dim, tuple(rounds), ent, alice, tuple(outs.get("A", ())),
                        tuple(outs.get("B", ())), bool(doc.get("custom_order", False)))
    if validate:
        validate_protocol(p).raise_if_invalid()
    return p


def protocols_equal(p: QuantumProtocol, q: QuantumProtocol) -> bool:
    """Entrywise equality, including the entanglement amplitudes."""
    if (p.x_dim, p.y_dim, p.a_out, p.b_out, p.custom_order, p.alice_registers) != (
            q.x_dim, q.y_dim, q.a_out, q.b_out, q.custom_order, q.alice_registers):
        return False
    if (p.entanglement is None) != (q.entanglement is None):
        return False
    if p.entanglement is not None:
        if p.entanglement.system != q.entanglement.system:
            return False
        if not np.array_equal(p.entanglement.vector, q.entanglement.vector):
            return False
    return p.rounds == q.rounds


# -- input distributions ------------------------------------------------------


def distribution_to_dict(mu: InputDistribution) -> dict:
    return {"format": DISTRIBUTION_FORMAT, "probs": mu.probs.tolist()}


def distribution_from_dict(doc: dict) -> InputDistribution:
    _check_format(doc, DISTRIBUTION_FORMAT)
    try:
        return InputDistribution(np.asarray(_req(doc, "probs", "document"), dtype=float))
    except (TypeError, ValueError) as err:
        raise FormatError(f"probs: {err}") from None


# -- classical protocols --------------------------------------------------------


def _table(v):
    return None if v is None else np.asarray(v).tolist()


def classical_to_dict(pi: ClassicalProtocol) -> dict:
    return {
        "format": CLASSICAL_FORMAT,
        "nx": pi.nx,
        "ny": pi.ny,
        "coins_a": [c.tolist() for c in pi.coins_a],
        "coins_b": [c.tolist() for c in pi.coins_b],
        "public": pi.public.tolist(),
        "rounds": [
            {
                "speaker": r.speaker if r.fixed else np.asarray(r.speaker).tolist(),
                "size": r.size,
                "table_a": _table(r.table_a),
                "table_b": _table(r.table_b),
            }
            for r in pi.rounds
        ],
        "out_a": _table(pi.out_a),
        "out_b": _table(pi.out_b),
        "out_a_size": int(pi.out_a_size),
        "out_b_size": int(pi.out_b_size),
    }


def classical_from_dict(doc: dict) -> ClassicalProtocol:
    _check_format(doc, CLASSICAL_FORMAT)
    rounds = []
    for k, r in enumerate(_req(doc, "rounds", "document")):
        where = f"rounds[{k}]"
        sp = _req(r, "speaker", where)
        rounds.append(ClassicalRound(sp, _int(_req(r, "size", where), where + ".size"),
                                     r.get("table_a"), r.get("table_b")))
    try:
        return ClassicalProtocol(
            _int(_req(doc, "nx", "document"), "nx"), _int(_req(doc, "ny", "document"), "ny"), rounds,
            coins_a=doc.get("coins_a", ()), coins_b=doc.get("coins_b", ()), public=doc.get("public"),
            out_a=doc.get("out_a"), out_b=doc.get("out_b"),
            out_a_size=doc.get("out_a_size"), out_b_size=doc.get("out_b_size"),
        )
    except (TypeError, ValueError) as err:
        raise FormatError(f"classical protocol: {err}") from None


# -- reversible protocols -------------------------------------------------------


def reversible_to_dict(rp: ReversibleProtocol) -> dict:
    return {
        "format": REVERSIBLE_FORMAT,
        "sizes": {k: int(v) for k, v in rp.sizes.items()},
        "x_registers": list(rp.x_registers),
        "y_registers": list(rp.y_registers),
        "coins": [{"owner": o, "register": n, "dist": d.tolist()} for o, n, d in rp.coins],
        "public": [{"a": a, "b": b, "dist": d.tolist()} for a, b, d in rp.public],
        "circuits": [
            {
                "owner": c.owner,
                "inputs": list(c.inputs),
                "outputs": list(c.outputs),
                "ancillas": list(c.ancillas),
                "message": list(c.message),
                "table": c.table.tolist(),
            }
            for c in rp.circuits
        ],
        "a_out": list(rp.a_out),
        "b_out": list(rp.b_out),
    }


def reversible_from_dict(doc: dict) -> ReversibleProtocol:
    """Circuits give either a permutation ``table`` or a ``gates`` list such
    as [["CNOT", "x", "m"]] over bit registers."""
    _check_format(doc, REVERSIBLE_FORMAT)
    circuits = []
    for k, c in enumerate(_req(doc, "circuits", "document")):
        where = f"circuits[{k}]"
        owner = _req(c, "owner", where)
        inputs = _req(c, "inputs", where)
        anc = c.get("ancillas", ())
        msg = c.get("message", ())
        if "gates" in c:
            try:
                circuits.append(Circuit.from_gates(owner, inputs, c["gates"], ancillas=anc,
                                                   outputs=c.get("outputs"), message=msg))
            except ValueError as err:
                raise FormatError(f"{where}.gates: {err}") from None
        else:
            circuits.append(Circuit(owner, inputs, _req(c, "outputs", where), _req(c, "table", where), anc, msg))
    try:
        rp = ReversibleProtocol(
            _req(doc, "sizes", "document"), doc.get("x_registers", ()), doc.get("y_registers", ()), circuits,
            tuple((e["owner"], e["register"], e["dist"]) for e in doc.get("coins", ())),
            tuple((e["a"], e["b"], e["dist"]) for e in doc.get("public", ())),
            doc.get("a_out", ()), doc.get("b_out", ()),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f"reversible protocol: {err}") from None
    bad = rp.validate()
    if bad:
        raise FormatError("invalid reversible protocol:\n  " + "\n  ".join(bad))
    return rp


# -- documents ----------------------------------------------------------------

_READERS = {
    PROTOCOL_FORMAT: protocol_from_dict,
    DISTRIBUTION_FORMAT: distribution_from_dict,
    CLASSICAL_FORMAT: classical_from_dict,
    REVERSIBLE_FORMAT: reversible_from_dict,
}


def loads(text: str, expected: str | None = None):
    """Parse a document; ``expected`` restricts the accepted format."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise FormatError(f"line {err.lineno}, column {err.colno}: {err.msg}") from None
    tag = _req(doc, "format", "document")
    if expected is not None and tag != expected:
        raise FormatError(f"document: format {tag!r}, expected {expected!r}")
    if tag not in _READERS:
        raise FormatError(f"document: unknown format {tag!r}")
    return _READERS[tag](doc)


def load(path, expected: str | None = None):
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise FormatError(f"{path}: {err.strerror}") from None
    try:
        return loads(text, expected)
    except FormatError as err:
        raise FormatError(f"{path}: {err}") from None


def dumps(obj) -> str:
    if isinstance(obj, QuantumProtocol):
        doc = protocol_to_dict(obj)
    elif isinstance(obj, InputDistribution):
        doc = distribution_to_dict(obj)
    elif isinstance(obj, ClassicalProtocol):
        doc = classical_to_dict(obj)
    elif isinstance(obj, ReversibleProtocol):
        doc = reversible_to_dict(obj)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return json.dumps(doc, indent=1) + "\n"
