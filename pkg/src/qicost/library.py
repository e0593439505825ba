"""Small named protocols used as fixtures, examples and CLI demos."""

from __future__ import annotations

import numpy as np

from .classical import ClassicalProtocol, ClassicalRound
from .protocol import ALICE, BOB, Isometry, QuantumProtocol, Round
from .state import Register

__all__ = [
    "copy_isometry",
    "send_input",
    "send_x_compute",
    "send_x_classical",
    "exchange_classical",
    "bounce",
    "inner_product_table",
    "and_table",
]


def copy_isometry(src: str, dst: str, dim: int) -> Isometry:
    """|v>_src -> |v>_src |v>_dst."""
    return Isometry.from_function([Register(src, dim)], [Register(src, dim), Register(dst, dim)], lambda v: (v, v))


def send_input(x_dim: int, y_dim: int = 2, *, copy: bool = False) -> QuantumProtocol:
    """Alice sends her input.

    Without ``copy`` the input register itself is the message (an unsafe
    protocol); with it Alice sends a fresh copy C and keeps X.
    """
    if copy:
        rnd = Round(ALICE, copy_isometry("X", "C", x_dim), "C", ("X",))
    else:
        rnd = Round(ALICE, Isometry.identity([Register("X", x_dim)]), "X")
    return QuantumProtocol(x_dim, y_dim, (rnd,))


def send_x_compute(f, *, out: str = "Bout") -> QuantumProtocol:
    """Alice sends a copy of x; Bob writes f(x, y) into a fresh register.

    A safe, zero-error protocol for any function f given as a truth table.
    """
    f = np.asarray(f, dtype=int)
    nx, ny = f.shape
    n_out = int(f.max()) + 1 if f.size else 1
    n_out = max(n_out, 2)
    r1 = Round(ALICE, copy_isometry("X", "C", nx), "C", ("X",))
    iso = Isometry.from_function(
        [Register("Y", ny), Register("C", nx)],
        [Register("Y", ny), Register("C", nx), Register(out, n_out)],
        lambda y, c: (y, c, f[c, y]),
    )
    r2 = Round(BOB, iso, None, ("Y", "C"))
    return QuantumProtocol(nx, ny, (r1, r2), b_out=(out,))


def send_x_classical(f) -> ClassicalProtocol:
    """Classical protocol: Alice sends x in one message, Bob outputs f(x, y)."""
    f = np.asarray(f, dtype=int)
    nx, ny = f.shape
    ta = np.arange(nx).reshape(nx, 1)
    out_b = np.transpose(f)[:, None, :].copy()  # indexed [y, r, m]
    return ClassicalProtocol(nx, ny, [ClassicalRound(ALICE, nx, ta)], out_b=out_b,
                             out_b_size=max(2, int(f.max()) + 1))


def exchange_classical(f) -> ClassicalProtocol:
    """Alice sends x, Bob sends y, and Bob outputs f(x, y)."""
    f = np.asarray(f, dtype=int)
    nx, ny = f.shape
    ta = np.arange(nx).reshape(nx, 1)
    tb = np.broadcast_to(np.arange(ny).reshape(ny, 1, 1), (ny, 1, nx)).copy()
    out_b = np.zeros((ny, 1, nx, ny), dtype=int)
    for y in range(ny):
        out_b[y, 0] = f[:, y][:, None]
    return ClassicalProtocol(nx, ny, [ClassicalRound(ALICE, nx, ta), ClassicalRound(BOB, ny, None, tb)],
                             out_b=out_b, out_b_size=max(2, int(f.max()) + 1))


def bounce(x_dim: int = 2, y_dim: int = 2, bounces: int = 1, *, copy: bool = True) -> QuantumProtocol:
    """Alice's input register travels back and forth.

    Each bounce is two messages: Alice sends X itself and Bob returns it.
    With ``copy`` Bob first copies X into a fresh register B{k}; otherwise he
    returns it untouched.
    """
    if bounces < 1:
        raise ValueError("need at least one bounce")
    xr = Register("X", x_dim)
    rounds = []
    for k in range(1, bounces + 1):
        rounds.append(Round(ALICE, Isometry.identity([xr]), "X"))
        if copy:
            rounds.append(Round(BOB, copy_isometry("X", f"B{k}", x_dim), "X", ("X",)))
        else:
            rounds.append(Round(BOB, Isometry.identity([xr]), "X"))
    return QuantumProtocol(x_dim, y_dim, tuple(rounds))


def inner_product_table(n: int) -> np.ndarray:
    """IP_n(x, y) = <x, y> mod 2 on n-bit strings (big-endian bits)."""
    v = np.arange(2**n)
    return np.array([[bin(x & y).count("1") % 2 for y in v] for x in v], dtype=int)


def and_table() -> np.ndarray:
    return np.array([[0, 0], [0, 1]], dtype=int)
