"""Labeled register systems, pure states, density operators and input
distributions.

States are stored as numpy tensors with one axis per register, in the order
of the system's register list (big-endian when flattened: the first register
is the most significant digit).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .linalg import (
    CLIP_TOL,
    HERMITIAN_TOL,
    DimensionCapError,
    check_dim,
    entropy_from_spectrum,
    get_dim_cap,
    hermitian_eigenvalues,
    is_hermitian,
)

__all__ = [
    "Register",
    "RegisterSystem",
    "PureState",
    "DensityOperator",
    "InputDistribution",
    "permute_registers",
    "partial_trace",
    "canonical_purification",
    "check_state_size",
]

NORM_TOL = 1e-8
CLASSICAL_TOL = 1e-9


@dataclass(frozen=True)
class Register:
    name: str
    dim: int

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("register name must be a non-empty string")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"register {self.name!r}: dim must be a positive integer")


@dataclass(frozen=True)
class RegisterSystem:
    registers: tuple[Register, ...]

    def __post_init__(self):
        object.__setattr__(self, "registers", tuple(self.registers))
        names = [r.name for r in self.registers]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate register names: {dup}")

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "RegisterSystem":
        return cls(tuple(Register(n, d) for n, d in pairs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.registers else 1

    def __contains__(self, name) -> bool:
        return name in self.names

    def __len__(self) -> int:
        return len(self.registers)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown register {name!r}") from None

    def dim_of(self, name: str) -> int:
        return self.registers[self.index(name)].dim

    def subsystem(self, names: Iterable[str]) -> "RegisterSystem":
        return RegisterSystem(tuple(self.registers[self.index(n)] for n in names))

    def permuted(self, order: Sequence[str]) -> "RegisterSystem":
        if sorted(order) != sorted(self.names):
            raise ValueError(f"{list(order)} is not a permutation of {list(self.names)}")
        return self.subsystem(order)


def check_state_size(total: int) -> None:
    """State vectors may be as long as cap**2: every reduced operator of a
    pure state then still fits under the cap on its smaller side."""
    cap = get_dim_cap()
    if total > cap * cap:
        raise DimensionCapError(f"state dimension {total} exceeds cap^2 = {cap * cap}")


def _ordered_keep(system: RegisterSystem, keep: Iterable[str]) -> list[str]:
    keep = list(keep)
    for n in keep:
        system.index(n)
    if len(set(keep)) != len(keep):
        raise ValueError(f"repeated registers in {keep}")
    return keep


class PureState:
    """A unit vector on a labeled register system."""

    def __init__(self, system: RegisterSystem, amplitudes, *, check: bool = True):
        amps = np.asarray(amplitudes, dtype=complex)
        if amps.size != system.total_dim:
            raise ValueError(f"expected {system.total_dim} amplitudes, got {amps.size}")
        check_state_size(system.total_dim)
        self.system = system
        self.tensor = amps.reshape(system.dims) if system.registers else amps.reshape(())
        self.tensor.flags.writeable = False
        if check:
            n = self.norm()
            if abs(n - 1.0) > NORM_TOL:
                raise ValueError(f"state norm {n:.12f} is not 1")
        self._entropy_cache: dict[frozenset, float] = {}
        self._support = None

    @classmethod
    def basis(cls, system: RegisterSystem, values: Sequence[int]) -> "PureState":
        amps = np.zeros(system.dims, dtype=complex)
        amps[tuple(values)] = 1.0
        return cls(system, amps)

    @classmethod
    def empty(cls) -> "PureState":
        return cls(RegisterSystem(()), np.ones(1))

    @property
    def vector(self) -> np.ndarray:
        return self.tensor.reshape(-1)

    @property
    def names(self) -> tuple[str, ...]:
        return self.system.names

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.tensor) ** 2)))

    def __repr__(self):
        regs = ", ".join(f"{r.name}:{r.dim}" for r in self.system.registers)
        return f"PureState([{regs}])"

    # -- structure ---------------------------------------------------------

    def permute(self, order: Sequence[str]) -> "PureState":
        new_sys = self.system.permuted(order)
        axes = [self.system.index(n) for n in order]
        return PureState(new_sys, np.transpose(self.tensor, axes), check=False)

    def tensor_with(self, other: "PureState") -> "PureState":
        sys = RegisterSystem(self.system.registers + other.system.registers)
        check_state_size(sys.total_dim)
        return PureState(sys, np.multiply.outer(self.tensor, other.tensor), check=False)

    def rename(self, mapping: dict[str, str]) -> "PureState":
        regs = tuple(Register(mapping.get(r.name, r.name), r.dim) for r in self.system.registers)
        return PureState(RegisterSystem(regs), self.tensor, check=False)

    def split(self, name: str, parts: Sequence[tuple[str, int]]) -> "PureState":
        """Reinterpret one register as a big-endian product of several."""
        i = self.system.index(name)
        dims = [d for _, d in parts]
        if int(np.prod(dims)) != self.system.registers[i].dim:
            raise ValueError(f"cannot split {name} (dim {self.system.registers[i].dim}) into {dims}")
        regs = list(self.system.registers)
        regs[i : i + 1] = [Register(n, d) for n, d in parts]
        sys = RegisterSystem(tuple(regs))
        return PureState(sys, self.tensor.reshape(sys.dims), check=False)

    def apply(self, matrix, in_names: Sequence[str], out_registers: Sequence[Register],
              *, partial: bool = False, tol: float = 1e-10) -> "PureState":
        """Apply ``matrix`` (dim(out) x dim(in)) on ``in_names``.

        The output registers come first in the new system, followed by the
        untouched registers in their previous order. With ``partial`` the
        matrix is only a partial isometry and the state must lie in its
        support; the norm is checked to ``tol``.
        """
        matrix = np.asarray(matrix, dtype=complex)
        in_axes = [self.system.index(n) for n in in_names]
        in_dims = [self.system.dims[a] for a in in_axes]
        d_in = int(np.prod(in_dims, dtype=np.int64))
        out_dims = [r.dim for r in out_registers]
        d_out = int(np.prod(out_dims, dtype=np.int64))
        if matrix.shape != (d_out, d_in):
            raise ValueError(f"operator shape {matrix.shape} does not match ({d_out}, {d_in})")
        rest_axes = [a for a in range(len(self.system)) if a not in in_axes]
        rest_regs = tuple(self.system.registers[a] for a in rest_axes)
        sys = RegisterSystem(tuple(out_registers) + rest_regs)
        check_state_size(sys.total_dim)
        t = np.transpose(self.tensor, in_axes + rest_axes).reshape(d_in, -1)
        new = (matrix @ t).reshape(sys.dims)
        out = PureState(sys, new, check=False)
        if partial:
            n = out.norm()
            if abs(n - 1.0) > tol:
                raise ValueError(f"state is not in the support of the operator (norm {n:.3e})")
        return out

    # -- reduced states and entropies -------------------------------------

    def _nonzero(self):
        if self._support is None:
            flat = self.vector
            idx = np.flatnonzero(flat)
            coords = np.unravel_index(idx, self.system.dims) if self.system.registers else ()
            self._support = (idx, coords, flat[idx])
        return self._support

    def _compressed(self, keep: list[str], compress_rows: bool):
        # M with rho_keep = M M^dag; columns (and optionally rows) restricted
        # to indices that actually occur in the support of the state
        axes = [self.system.index(n) for n in keep]
        rest = [a for a in range(len(self.system)) if a not in axes]
        dims = self.system.dims
        k_dims = [dims[a] for a in axes]
        r_dims = [dims[a] for a in rest]
        d_k = int(np.prod(k_dims, dtype=np.int64))
        d_r = int(np.prod(r_dims, dtype=np.int64))
        idx, coords, vals = self._nonzero()
        if idx.size == self.vector.size:
            m = np.transpose(self.tensor, axes + rest).reshape(d_k, d_r)
            return m
        rows = np.ravel_multi_index([coords[a] for a in axes], k_dims) if axes else np.zeros(idx.size, dtype=np.int64)
        cols = np.ravel_multi_index([coords[a] for a in rest], r_dims) if rest else np.zeros(idx.size, dtype=np.int64)
        uc, ci = np.unique(cols, return_inverse=True)
        if compress_rows:
            ur, ri = np.unique(rows, return_inverse=True)
            m = np.zeros((ur.size, uc.size), dtype=complex)
            m[ri, ci] = vals
        else:
            m = np.zeros((d_k, uc.size), dtype=complex)
            m[rows, ci] = vals
        return m

    def entropy(self, names: Iterable[str]) -> float:
        key = frozenset(names)
        if key not in self._entropy_cache:
            self._entropy_cache[key] = self._entropy(key)
        return self._entropy_cache[key]

    def _entropy(self, key: frozenset) -> float:
        for n in key:
            self.system.index(n)
        if not key or len(key) == len(self.system):
            return 0.0
        keep = [n for n in self.system.names if n in key]
        m = self._compressed(keep, compress_rows=True)
        small = min(m.shape)
        check_dim(small, "reduced state")
        gram = m @ m.conj().T if m.shape[0] <= m.shape[1] else m.conj().T @ m
        return entropy_from_spectrum(hermitian_eigenvalues(gram))

    def reduced(self, keep: Iterable[str]) -> "DensityOperator":
        keep = _ordered_keep(self.system, keep)
        d_k = int(np.prod([self.system.dim_of(n) for n in keep], dtype=np.int64))
        check_dim(d_k, "reduced state")
        m = self._compressed(keep, compress_rows=False)
        rho = m @ m.conj().T
        return DensityOperator(self.system.subsystem(keep), rho, check=False)

    def overlap(self, other: "PureState") -> complex:
        """<self|other>, aligning other's registers to self's order."""
        if sorted(other.names) != sorted(self.names):
            raise ValueError("states live on different register systems")
        o = other.permute(self.names) if other.names != self.names else other
        for a, b in zip(self.system.dims, o.system.dims):
            if a != b:
                raise ValueError("register dimensions differ")
        return complex(np.vdot(self.vector, o.vector))

    def fidelity(self, other: "PureState") -> float:
        return abs(self.overlap(other)) ** 2


class DensityOperator:
    """A density matrix on a labeled register system."""

    def __init__(self, system: RegisterSystem, matrix, *, check: bool = True):
        m = np.asarray(matrix, dtype=complex)
        d = system.total_dim
        if m.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got {m.shape}")
        check_dim(d, "density operator")
        self.system = system
        self.matrix = m
        self.matrix.flags.writeable = False
        self._entropy_cache: dict[frozenset, float] = {}
        if check:
            if not is_hermitian(m, HERMITIAN_TOL):
                raise ValueError("density operator is not Hermitian")
            tr = float(np.real(np.trace(m)))
            if abs(tr - 1.0) > NORM_TOL:
                raise ValueError(f"density operator trace {tr:.12f} is not 1")
            low = hermitian_eigenvalues(m)[-1] if d else 0.0
            if low < -CLIP_TOL:
                raise ValueError(f"density operator has eigenvalue {low:.3e}")

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityOperator":
        v = state.vector
        return cls(state.system, np.outer(v, v.conj()), check=False)

    @property
    def names(self) -> tuple[str, ...]:
        return self.system.names

    def __repr__(self):
        regs = ", ".join(f"{r.name}:{r.dim}" for r in self.system.registers)
        return f"DensityOperator([{regs}])"

    def permute(self, order: Sequence[str]) -> "DensityOperator":
        new_sys = self.system.permuted(order)
        axes = [self.system.index(n) for n in order]
        k = len(axes)
        t = self.matrix.reshape(self.system.dims * 2)
        t = np.transpose(t, axes + [a + k for a in axes])
        d = self.system.total_dim
        return DensityOperator(new_sys, t.reshape(d, d), check=False)

    def partial_trace(self, keep: Iterable[str]) -> "DensityOperator":
        keep = _ordered_keep(self.system, keep)
        n = len(self.system)
        axes = [self.system.index(x) for x in keep]
        # einsum labels: row axes 0..n-1, column axes n..2n-1, traced ones shared
        row = list(range(n))
        col = [n + a if a in axes else a for a in range(n)]
        out = axes + [n + a for a in axes]
        t = self.matrix.reshape(self.system.dims * 2) if n else self.matrix.reshape(())
        red = np.einsum(t, row + col, out) if n else t
        sub = self.system.subsystem(keep)
        d = sub.total_dim
        return DensityOperator(sub, np.asarray(red).reshape(d, d), check=False)

    def entropy(self, names: Iterable[str]) -> float:
        key = frozenset(names)
        if key not in self._entropy_cache:
            for x in key:
                self.system.index(x)
            if not key:
                self._entropy_cache[key] = 0.0
            else:
                keep = [x for x in self.system.names if x in key]
                red = self.partial_trace(keep)
                self._entropy_cache[key] = entropy_from_spectrum(hermitian_eigenvalues(red.matrix))
        return self._entropy_cache[key]

    def off_diagonal_mass(self) -> float:
        m = self.matrix
        return float(np.sum(np.abs(m)) - np.sum(np.abs(np.diag(m))))

    def is_classical(self, tol: float = CLASSICAL_TOL) -> bool:
        return self.off_diagonal_mass() <= tol

    def diagonal(self) -> np.ndarray:
        """Computational-basis probabilities as a tensor over the registers."""
        p = np.real(np.diag(self.matrix)).copy()
        return p.reshape(self.system.dims) if len(self.system) else p.reshape(())


def permute_registers(s, new_order: Sequence[str]):
    return s.permute(new_order)


def partial_trace(s, keep: Iterable[str]) -> DensityOperator:
    if isinstance(s, PureState):
        return s.reduced(keep)
    return s.partial_trace(keep)


class InputDistribution:
    """A distribution mu(x, y) over classical input pairs."""

    def __init__(self, probs, *, tol: float = 1e-10):
        p = np.array(probs, dtype=float)
        if p.ndim != 2:
            raise ValueError("input distribution must be a 2-d table mu[x, y]")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("input alphabets must be non-empty")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        s = p.sum()
        if abs(s - 1.0) > tol:
            raise ValueError(f"probabilities sum to {s:.12f}, not 1")
        self.probs = p
        self.probs.flags.writeable = False

    @property
    def x_dim(self) -> int:
        return self.probs.shape[0]

    @property
    def y_dim(self) -> int:
        return self.probs.shape[1]

    def __repr__(self):
        return f"InputDistribution({self.x_dim}x{self.y_dim})"

    def __eq__(self, other):
        return isinstance(other, InputDistribution) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    @classmethod
    def uniform(cls, x_dim: int, y_dim: int) -> "InputDistribution":
        return cls(np.full((x_dim, y_dim), 1.0 / (x_dim * y_dim)))

    @classmethod
    def product(cls, mu_x, mu_y) -> "InputDistribution":
        return cls(np.outer(np.asarray(mu_x, float), np.asarray(mu_y, float)))

    @classmethod
    def diagonal(cls, dim: int) -> "InputDistribution":
        """X = Y uniform."""
        return cls(np.eye(dim) / dim)

    @classmethod
    def point(cls, x_dim: int, y_dim: int, x: int, y: int) -> "InputDistribution":
        p = np.zeros((x_dim, y_dim))
        p[x, y] = 1.0
        return cls(p)

    @property
    def mu_x(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    @property
    def mu_y(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    def is_product(self, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.probs - np.outer(self.mu_x, self.mu_y))) <= tol)

    def mix(self, other: "InputDistribution", p: float) -> "InputDistribution":
        """p * self + (1 - p) * other."""
        return InputDistribution(p * self.probs + (1 - p) * other.probs)


def canonical_purification(mu: InputDistribution) -> PureState:
    """sum_xy sqrt(mu(x,y)) |x>_X |x>_RX |y>_Y |y>_RY."""
    dx, dy = mu.x_dim, mu.y_dim
    sys = RegisterSystem.of(("X", dx), ("RX", dx), ("Y", dy), ("RY", dy))
    amps = np.zeros((dx, dx, dy, dy), dtype=complex)
    xs, ys = np.meshgrid(np.arange(dx), np.arange(dy), indexing="ij")
    amps[xs, xs, ys, ys] = np.sqrt(mu.probs)
    return PureState(sys, amps)
