"""Reproducible drivers: phase-state entropy bounds, Inner Product, random
Boolean functions, the convexity-type inequalities for no-forget AND
protocols, and a small Disjointness sanity check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classical import ic, run_classical
from .costs import info_costs, no_forget_certify
from .generators import stream
from .library import inner_product_table, send_x_classical
from .linalg import binary_entropy, entropy_from_spectrum, hermitian_eigenvalues, von_neumann_entropy
from .protocol import ModelContractError, QuantumProtocol, channel_of, run_trace
from .state import InputDistribution
from .transforms import infer_function, quantize_classical

__all__ = [
    "BooleanFunctionTable",
    "PhaseEnsemble",
    "ExperimentReport",
    "phase_entropy",
    "renyi2_phase_entropy",
    "full_matrix_phase_entropy",
    "LowerBoundReport",
    "qic_lower_bound_check",
    "ip_report",
    "random_function_experiment",
    "InequalityCheck",
    "appendix_inequality_suite",
    "mass_shift_distribution",
    "disjointness_sanity",
]


@dataclass(frozen=True)
class BooleanFunctionTable:
    values: np.ndarray  # shape (2**n_x, 2**n_y), entries 0/1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=int)
        if v.ndim != 2 or not np.all((v == 0) | (v == 1)):
            raise ValueError("a Boolean function table is a 2-d array of 0/1 values")
        object.__setattr__(self, "values", v)

    @property
    def n_x(self) -> float:
        return math.log2(self.values.shape[0])

    @property
    def n_y(self) -> float:
        return math.log2(self.values.shape[1])

    @classmethod
    def inner_product(cls, n: int) -> "BooleanFunctionTable":
        return cls(inner_product_table(n))

    @classmethod
    def random(cls, rng: np.random.Generator, n: int) -> "BooleanFunctionTable":
        return cls(rng.integers(0, 2, size=(2**n, 2**n)))

    @classmethod
    def constant(cls, nx: int, ny: int, value: int = 0) -> "BooleanFunctionTable":
        return cls(np.full((nx, ny), value))


def _as_table(f) -> np.ndarray:
    return f.values if isinstance(f, BooleanFunctionTable) else np.asarray(f, dtype=int)


def _marginals(f: np.ndarray, mu_x, mu_y):
    nx, ny = f.shape
    mx = np.full(nx, 1 / nx) if mu_x is None else np.asarray(mu_x, dtype=float)
    my = np.full(ny, 1 / ny) if mu_y is None else np.asarray(mu_y, dtype=float)
    if mx.shape != (nx,) or my.shape != (ny,):
        raise ValueError("marginals do not match the function table")
    return mx, my


@dataclass(frozen=True)
class PhaseEnsemble:
    """States sum_y (-1)^f(x,y) sqrt(mu_Y(y)) |y>|y> with weights mu_X(x).

    Only the diagonal |yy> span is populated, so each state is stored by its
    |Y| amplitudes.
    """

    f: np.ndarray
    mu_x: np.ndarray
    mu_y: np.ndarray

    @classmethod
    def of(cls, f, mu_x=None, mu_y=None) -> "PhaseEnsemble":
        t = _as_table(f)
        mx, my = _marginals(t, mu_x, mu_y)
        return cls(t, mx, my)

    def amplitudes(self) -> np.ndarray:
        return ((-1.0) ** self.f) * np.sqrt(self.mu_y)[None, :]

    def gram(self) -> np.ndarray:
        """G[x, x'] = sqrt(mu_X(x) mu_X(x')) sum_y mu_Y(y) (-1)^(f(x,y) + f(x',y))."""
        a = self.amplitudes()
        w = np.sqrt(self.mu_x)
        return (w[:, None] * w[None, :]) * (a @ a.T)

    def density_matrix(self) -> np.ndarray:
        """The full operator on Y R_Y (dimension |Y|^2)."""
        ny = self.f.shape[1]
        a = self.amplitudes()
        vecs = np.zeros((a.shape[0], ny * ny))
        vecs[:, np.arange(ny) * (ny + 1)] = a
        return (vecs * self.mu_x[:, None]).T @ vecs


def phase_entropy(f, mu_x=None, mu_y=None) -> float:
    """H(Y R_Y) of the phase ensemble, from the |X| x |X| Gram matrix."""
    return entropy_from_spectrum(hermitian_eigenvalues(PhaseEnsemble.of(f, mu_x, mu_y).gram()))


def renyi2_phase_entropy(f, mu_x=None, mu_y=None) -> float:
    g = PhaseEnsemble.of(f, mu_x, mu_y).gram()
    return float(-math.log2(np.sum(g * g)))


def full_matrix_phase_entropy(f, mu_x=None, mu_y=None) -> float:
    """Oracle: diagonalize the |Y|^2-dimensional operator directly."""
    return von_neumann_entropy(PhaseEnsemble.of(f, mu_x, mu_y).density_matrix())


@dataclass
class ExperimentReport:
    name: str
    params: dict
    values: dict
    checks: dict = field(default_factory=dict)
    seed: int | None = None
    wall_clock: float = 0.0

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def deterministic(self) -> dict:
        """Everything except timing; identical across runs for a fixed seed."""
        return {"name": self.name, "params": self.params, "values": self.values,
                "checks": self.checks, "seed": self.seed}


@dataclass(frozen=True)
class LowerBoundReport:
    qic: float
    phase_entropy: float
    holds: bool
    tight: bool


def qic_lower_bound_check(p: QuantumProtocol, f, mu: InputDistribution, tol: float = 1e-8) -> LowerBoundReport:
    """QIC(p, mu) >= H(Y R_Y) of the phase ensemble, for zero-error p and product mu."""
    t = _as_table(f)
    if not mu.is_product():
        raise ValueError("the phase-entropy bound is for product distributions")
    infer_function(p, t)
    q = info_costs(run_trace(p, mu)).qic.total
    h = phase_entropy(t, mu.mu_x, mu.mu_y)
    return LowerBoundReport(q, h, q >= h - tol, abs(q - h) <= tol)


def ip_report(n: int, tol: float = 1e-8) -> ExperimentReport:
    """Phase entropy of IP_n under uniform inputs and the QIC of the lifted
    send-x protocol; both should equal n."""
    start = time.perf_counter()
    f = inner_product_table(n)
    mu = InputDistribution.uniform(2**n, 2**n)
    h = phase_entropy(f)
    p = quantize_classical(send_x_classical(f))
    lb = qic_lower_bound_check(p, f, mu, tol)
    rep = ExperimentReport(
        "ip", {"n": n},
        {"phase_entropy": h, "qic": lb.qic, "tight": lb.tight},
        {"phase_entropy_equals_n": abs(h - n) <= 1e-9, "qic_equals_n": abs(lb.qic - n) <= tol,
         "bound_holds": lb.holds},
    )
    rep.wall_clock = time.perf_counter() - start
    return rep


def _quantiles(v: Sequence[float]) -> dict:
    a = np.asarray(v, dtype=float)
    qs = np.quantile(a, [0.0, 0.25, 0.5, 0.75, 1.0])
    return dict(zip(("min", "q25", "median", "q75", "max"), (float(q) for q in qs)))


def random_function_experiment(n: int, samples: int, seed: int, *, full_check: bool | None = None,
                               tol: float = 1e-9) -> ExperimentReport:
    """Uniformly random f on n-bit inputs, uniform product distribution.

    Sample i draws f from the stream (seed, i). Reports H2 and H, the
    fraction of samples with H2 < (1 - delta) n for delta = 1/sqrt(n), and
    the tail bound exp(-(2^(delta n) - 1)^2 / 2) next to it. Only the
    unconditional facts H2 <= H <= n (and agreement with the full-matrix
    entropy when n <= 3) are checked.
    """
    if n < 1 or n > 6:
        raise ValueError("random-function experiments support 1 <= n <= 6")
    start = time.perf_counter()
    full_check = n <= 3 if full_check is None else full_check
    h2s, hs, dev = [], [], 0.0
    for i in range(samples):
        f = BooleanFunctionTable.random(stream(seed, i), n)
        h2, h = renyi2_phase_entropy(f), phase_entropy(f)
        h2s.append(h2)
        hs.append(h)
        if full_check:
            dev = max(dev, abs(full_matrix_phase_entropy(f) - h))
    delta = 1 / math.sqrt(n)
    threshold = (1 - delta) * n
    frac = float(np.mean(np.asarray(h2s) < threshold - tol)) if samples else 0.0
    bound = math.exp(-((2 ** (delta * n) - 1) ** 2) / 2)
    checks = {
        "renyi_le_entropy": all(a <= b + tol for a, b in zip(h2s, hs)),
        "entropy_le_n": all(b <= n + tol for b in hs),
        "renyi_nonnegative": all(a >= -tol for a in h2s),
    }
    if full_check:
        checks["gram_matches_full_matrix"] = dev <= tol
    values = {
        "h2": h2s, "h": hs, "h2_quantiles": _quantiles(h2s) if samples else {},
        "h_quantiles": _quantiles(hs) if samples else {},
        "delta": delta, "threshold": threshold, "violation_fraction": frac, "tail_bound": bound,
        "max_full_matrix_deviation": dev if full_check else None,
    }
    rep = ExperimentReport("randomfn", {"n": n, "samples": samples}, values, checks, seed)
    rep.wall_clock = time.perf_counter() - start
    return rep


# -- convexity-type inequalities ------------------------------------------------


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs: float
    holds: bool


def mass_shift_distribution(mu: InputDistribution) -> tuple[InputDistribution, float]:
    """(mu0, w): mu with the (1,1) mass removed and the rest renormalized."""
    w = float(mu.probs[1, 1])
    if w > 0.5:
        raise ValueError(f"mu(1,1) = {w} exceeds 1/2")
    p0 = mu.probs.copy()
    p0[1, 1] = 0.0
    return InputDistribution(p0 / p0.sum()), w


def _costs(p: QuantumProtocol, mu: InputDistribution):
    rep = info_costs(run_trace(p, mu, check=False))
    return rep.qic.total, (rep.hic.a_to_b, rep.hic.b_to_a)


def _split_checks(tag: str, p: QuantumProtocol, prob: float, mu1, mu2, tol: float) -> list[InequalityCheck]:
    mu = mu1.mix(mu2, prob)
    q, hic = _costs(p, mu)
    q1, hic1 = _costs(p, mu1)
    q2, hic2 = _costs(p, mu2)
    avg = prob * q1 + (1 - prob) * q2
    h = binary_entropy(prob)
    out = [
        InequalityCheck(f"{tag}:lower", avg, q, avg <= q + tol),
        InequalityCheck(f"{tag}:upper", q, avg + h, q <= avg + h + tol),
        InequalityCheck(f"{tag}:upper_two_sided", q, avg + 2 * h, q <= avg + 2 * h + tol),
    ]
    for k, d in enumerate(("a_to_b", "b_to_a")):
        a = prob * hic1[k] + (1 - prob) * hic2[k]
        out.append(InequalityCheck(f"{tag}:upper_{d}", hic[k], a + h, hic[k] <= a + h + tol))
    return out


def appendix_inequality_suite(p: QuantumProtocol, mu: InputDistribution | None = None,
                              splits: Sequence[tuple[float, InputDistribution, InputDistribution]] = (),
                              tol: float = 1e-8) -> list[InequalityCheck]:
    """Quasi-convexity and mass-shift checks for a no-forget AND protocol.

    For each convex split mu = p mu1 + (1-p) mu2:
      lower: p QIC(mu1) + (1-p) QIC(mu2) <= QIC(mu);
      upper: QIC(mu) <= p QIC(mu1) + (1-p) QIC(mu2) + H(p);
      upper_two_sided: the same with 2 H(p);
      upper_a_to_b / upper_b_to_a: each direction's HIC with H(p).
    For ``mu`` with w = mu(1,1) <= 1/2, the mass shift QIC(mu) <= QIC(mu0) + H(w)
    (and its 2 H(w) form), plus the split mu = (1-w) mu0 + w delta_11.
    The single-H forms are the ones to watch: they can fail (see README).
    """
    cert = no_forget_certify(p)
    if not cert.certified:
        raise ModelContractError("convexity checks need a protocol certified not to forget: " + cert.summary())
    if (p.x_dim, p.y_dim) != (2, 2):
        raise ValueError("AND protocols have one-bit inputs")
    checks: list[InequalityCheck] = []
    for k, (prob, mu1, mu2) in enumerate(splits):
        checks += _split_checks(f"split{k}(p={prob:g})", p, prob, mu1, mu2, tol)
    if mu is not None:
        mu0, w = mass_shift_distribution(mu)
        q, _ = _costs(p, mu)
        q0, _ = _costs(p, mu0)
        h = binary_entropy(w)
        checks.append(InequalityCheck(f"mass_shift(w={w:g})", q, q0 + h, q <= q0 + h + tol))
        checks.append(InequalityCheck(f"mass_shift_two_sided(w={w:g})", q, q0 + 2 * h, q <= q0 + 2 * h + tol))
        if w > 0:
            checks += _split_checks(f"mass_split(w={w:g})", p, 1 - w, mu0, InputDistribution.point(2, 2, 1, 1), tol)
        else:
            checks.append(InequalityCheck("mass_shift_equality(w=0)", q, q0, abs(q - q0) <= tol))
    return checks


def disjointness_sanity(n: int) -> ExperimentReport:
    """DISJ_n through the lifted send-x protocol: zero error and QIC = IC.

    A sanity consumer of the quantization pipeline; no lower bounds are
    claimed.
    """
    if not 1 <= n <= 3:
        raise ValueError("the disjointness sanity driver supports 1 <= n <= 3")
    v = np.arange(2**n)
    f = ((v[:, None] & v[None, :]) == 0).astype(int)
    pi = send_x_classical(f)
    p = quantize_classical(pi)
    mu = InputDistribution.uniform(2**n, 2**n)
    tr = run_trace(p, mu)
    chan = channel_of(p, mu, trace=tr)
    correct = sum(chan[x, y, :, f[x, y]].sum() for x in range(2**n) for y in range(2**n))
    q = info_costs(tr).qic.total
    i = ic(pi, mu).total
    return ExperimentReport(
        "disj", {"n": n}, {"qic": q, "ic": i, "success": float(correct)},
        {"zero_error": bool(abs(correct - 1) <= 1e-9), "qic_equals_ic": abs(q - i) <= 1e-8},
    )
