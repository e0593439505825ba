"""Command-line front end.

Every command prints a short human-readable block followed by
machine-readable ``key=value`` lines (numbers with 9 decimals). Exit status:
0 when every check passes, 1 when a check fails, 2 on input errors.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import io
from .classical import (
    CapError,
    canonical_randomness_form,
    classical_channel,
    ic,
    pad_messages,
    ric,
    safe_reversible,
    unforget_simulation,
)
from .costs import flow_lemma_terms, info_costs
from .experiments import ip_report, random_function_experiment
from .generators import random_process, stream
from .linalg import DimensionCapError, PositivityError, set_dim_cap
from .protocol import BOB, ModelContractError, ProtocolError, channel_of, output_distribution, run_trace
from .state import InputDistribution
from .transforms import (
    clean_fidelity,
    clean_protocol,
    infer_function,
    phase_protocol,
    quantize_classical,
    reverse_composition,
    safe_version,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

INPUT_ERRORS = (io.FormatError, ProtocolError, ModelContractError, DimensionCapError, CapError, PositivityError)


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9f}"
    return str(v)


def emit(**pairs) -> None:
    print(" ".join(f"{k}={fmt(v)}" for k, v in pairs.items()))


def measure(name: str, value: float) -> None:
    emit(measure=name, value=value)


def check(name: str, ok: bool, detail: str = "") -> bool:
    print(f"check={name} status={'pass' if ok else 'fail'}" + (f" {detail}" if detail else ""))
    return bool(ok)


def _distribution(path, x_dim: int, y_dim: int) -> InputDistribution:
    if path is None:
        return InputDistribution.uniform(x_dim, y_dim)
    mu = io.load(path, io.DISTRIBUTION_FORMAT)
    if (mu.x_dim, mu.y_dim) != (x_dim, y_dim):
        raise io.FormatError(f"{path}: distribution is {mu.x_dim}x{mu.y_dim}, protocol inputs are {x_dim}x{y_dim}")
    return mu


def _write(obj, path) -> None:
    text = io.dumps(obj)
    if path is None:
        return
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
        print(f"wrote {path}")


# -- commands -----------------------------------------------------------------


def cmd_costs(args) -> int:
    p = io.load(args.protocol, io.PROTOCOL_FORMAT)
    mu = _distribution(args.distribution, p.x_dim, p.y_dim)
    if args.safe and not p.is_safe():
        p = safe_version(p)
        print("converted to the safe version (inputs copied before use)")
    tr = run_trace(p, mu)
    rep = info_costs(tr)
    if not rep.safe:
        print("protocol is unsafe: only QIC is defined (use --safe for the full family)")
    print(f"{'measure':<14}{'A->B':>14}{'B->A':>14}{'total':>14}")
    rows = [("QIC", rep.qic)]
    if rep.safe:
        rows += [("CIC", rep.cic), ("CRIC", rep.cric), ("HIC", rep.hic)]
    for name, d in rows:
        print(f"{name:<14}{d.a_to_b:>14.9f}{d.b_to_a:>14.9f}{d.total:>14.9f}")
    for t in rep.qic.terms:
        emit(term="qic", message=t.message, sender=t.sender, value=t.value)
    for name, v in rep.measures().items():
        measure(name, v)
    ok = True
    for name, v in rep.residuals().items():
        measure(f"residual_{name}", v)
        ok &= check(f"residual_{name}", v <= args.tol)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_quantize(args) -> int:
    pi = io.load(args.classical, io.CLASSICAL_FORMAT)
    mu = _distribution(args.distribution, pi.nx, pi.ny)
    padded = pad_messages(pi)
    canon = canonical_randomness_form(padded)
    q = quantize_classical(canon)
    tr = run_trace(q, mu)
    rep = info_costs(tr)
    i = ic(pi, mu).total
    chan_c = classical_channel(pi, mu)
    chan_q = channel_of(q, mu, trace=tr)
    if chan_c.shape != chan_q.shape:
        dev = float("inf")
    elif args.worst_case:
        px = mu.probs[:, :, None, None]
        mask = px[:, :, 0, 0] > 0
        dev = float(np.max(np.abs(chan_c - chan_q)[mask] / px[mask])) if mask.any() else 0.0
    else:
        dev = float(np.max(np.abs(chan_c - chan_q)))
    measure("ic", i)
    measure("qic", rep.qic.total)
    measure("cric", rep.cric.total)
    measure("cc", pi.cc())
    measure("cc_padded", padded.cc())
    measure("qcc", rep.qcc["total"])
    measure("channel_deviation", dev)
    ok = check("qic_equals_ic", abs(rep.qic.total - i) <= args.tol)
    ok &= check("qcc_equals_padded_cc", abs(rep.qcc["total"] - padded.cc()) <= 1e-12)
    ok &= check("channel_equal", dev <= args.tol)
    _write(q, args.output)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_safe(args) -> int:
    p = io.load(args.protocol, io.PROTOCOL_FORMAT)
    s = safe_version(p)
    ok = True
    if args.distribution is not None:
        mu = _distribution(args.distribution, p.x_dim, p.y_dim)
        q0 = info_costs(run_trace(p, mu)).qic.total
        q1 = info_costs(run_trace(s, mu)).qic.total
        measure("qic", q0)
        measure("qic_safe", q1)
        ok = check("safe_not_larger", q1 <= q0 + args.tol)
    _write(s, args.output or "-")
    return EXIT_OK if ok else EXIT_FAIL


def _clean_like(args, mode: str) -> int:
    p = io.load(args.protocol, io.PROTOCOL_FORMAT)
    mu = _distribution(args.distribution, p.x_dim, p.y_dim)
    f = infer_function(p)
    t = clean_protocol(p, f) if mode == "clean" else phase_protocol(p, f)
    base = info_costs(run_trace(p, mu)).qic
    new = info_costs(run_trace(t, mu)).qic
    fid = clean_fidelity(t, mu, f, mode)
    cond = output_distribution(p, BOB)
    correct = np.take_along_axis(cond, f[:, :, None], axis=2)[:, :, 0]
    err = float(np.max(1 - correct)) if args.worst_case else float(np.sum(mu.probs * (1 - correct)))
    measure("error", err)
    measure("qic", base.total)
    measure(f"qic_a_to_b_{mode}", new.a_to_b)
    measure(f"qic_{mode}", new.total)
    measure("fidelity", fid)
    ok = check("qic_a_to_b_matches", abs(new.a_to_b - base.total) <= args.tol)
    ok &= check("restored", fid >= 1 - 1e-10)
    _write(t, args.output)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_clean(args) -> int:
    return _clean_like(args, "clean")


def cmd_phase(args) -> int:
    return _clean_like(args, "phase")


def cmd_reverse(args) -> int:
    p = io.load(args.protocol, io.PROTOCOL_FORMAT)
    r = reverse_composition(p)
    ok = True
    if args.distribution is not None:
        mu = _distribution(args.distribution, p.x_dim, p.y_dim)
        q0 = info_costs(run_trace(p, mu)).qic.total
        q1 = info_costs(run_trace(r, mu)).qic.total
        measure("qic", q0)
        measure("qic_reverse_composition", q1)
        ok = check("qic_doubles", abs(q1 - 2 * q0) <= args.tol)
    _write(r, args.output or "-")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_ip(args) -> int:
    if not 1 <= args.n <= 5:
        raise io.FormatError("ip: n must be between 1 and 5")
    rep = ip_report(args.n, args.tol)
    v = rep.values
    emit(phase_entropy=v["phase_entropy"], qic=v["qic"], tight=v["tight"])
    emit(wall_clock=rep.wall_clock)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_randomfn(args) -> int:
    n = args.n
    samples = args.samples if args.samples is not None else (args.samples_pos if args.samples_pos is not None else 200)
    seed = args.seed if args.seed is not None else (args.seed_pos if args.seed_pos is not None else 0)
    if not 1 <= n <= 6:
        raise io.FormatError("randomfn: n must be between 1 and 6")
    rep = random_function_experiment(n, samples, seed)
    v = rep.values
    for k, (h2, h) in enumerate(zip(v["h2"], v["h"])):
        emit(sample=k, h2=h2, h=h)
    for key in ("h2_quantiles", "h_quantiles"):
        for q, val in v[key].items():
            emit(**{f"{key[:-10]}_{q}": val})
    emit(delta=v["delta"], threshold=v["threshold"], violation_fraction=v["violation_fraction"],
         tail_bound=v["tail_bound"])
    if v["max_full_matrix_deviation"] is not None:
        emit(max_full_matrix_deviation=v["max_full_matrix_deviation"])
    ok = all(check(k, c) for k, c in rep.checks.items())
    return EXIT_OK if ok else EXIT_FAIL


def cmd_flowcheck(args) -> int:
    trials = args.trials
    seed = args.seed if args.seed is not None else (args.seed_pos if args.seed_pos is not None else 0)
    start = time.perf_counter()
    worst = 0.0
    for i in range(trials):
        proc, e, f = random_process(stream(seed, i))
        worst = max(worst, flow_lemma_terms(proc, e, f).residual)
    emit(trials=trials, seed=seed, max_residual=worst)
    emit(wall_clock=time.perf_counter() - start)
    return EXIT_OK if check("flow_identity", worst <= args.tol) else EXIT_FAIL


def cmd_ricsim(args) -> int:
    rp = io.load(args.reversible, io.REVERSIBLE_FORMAT)
    mu = _distribution(args.distribution, rp.nx, rp.ny)
    safe = safe_reversible(rp)
    sim = unforget_simulation(safe)
    r0 = ric(rp, mu).total
    r = ric(safe, mu).total
    i = ic(sim, mu).total
    measure("ric", r0)
    measure("ric_safe", r)
    measure("ic_simulation", i)
    measure("cc_simulation", sim.cc())
    ok = check("safe_not_larger", r <= r0 + args.tol)
    ok &= check("simulation_ic_le_ric", i <= r + args.tol)
    _write(sim, args.output)
    return EXIT_OK if ok else EXIT_FAIL


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-8, help="tolerance for checks (default 1e-8)")
    common.add_argument("--dim-cap", type=int, default=None,
                        help="largest operator side to diagonalize (default: $QICOST_DIM_CAP or 4096)")

    ap = argparse.ArgumentParser(prog="qicost", description="Information costs of two-party protocols")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("costs", parents=[common], help="all information-cost measures of a protocol")
    c.add_argument("protocol")
    c.add_argument("distribution", nargs="?")
    c.add_argument("--safe", action="store_true", help="convert to the safe version first")
    c.set_defaults(func=cmd_costs)

    c = sub.add_parser("quantize", parents=[common], help="lift a classical protocol and compare costs")
    c.add_argument("classical")
    c.add_argument("distribution", nargs="?")
    c.add_argument("--worst-case", action="store_true", help="compare channels per input pair")
    c.add_argument("--output", help="write the lifted protocol here ('-' for stdout)")
    c.set_defaults(func=cmd_quantize)

    c = sub.add_parser("safe", parents=[common], help="safe version of a protocol")
    c.add_argument("protocol")
    c.add_argument("distribution", nargs="?")
    c.add_argument("--output")
    c.set_defaults(func=cmd_safe)

    for name, fn, what in (("clean", cmd_clean, "compute, copy the answer, uncompute"),
                           ("phase", cmd_phase, "compute, kick the answer into a phase, uncompute")):
        c = sub.add_parser(name, parents=[common], help=what)
        c.add_argument("protocol")
        c.add_argument("distribution", nargs="?")
        c.add_argument("--worst-case", action="store_true", help="report the worst-case error")
        c.add_argument("--output")
        c.set_defaults(func=fn)

    c = sub.add_parser("reverse", parents=[common], help="protocol followed by its time reversal")
    c.add_argument("protocol")
    c.add_argument("distribution", nargs="?")
    c.add_argument("--output")
    c.set_defaults(func=cmd_reverse)

    c = sub.add_parser("ip", parents=[common], help="inner product: phase entropy and QIC")
    c.add_argument("n", type=int)
    c.set_defaults(func=cmd_ip)

    c = sub.add_parser("randomfn", parents=[common], help="phase entropies of random Boolean functions")
    c.add_argument("n", type=int)
    c.add_argument("samples_pos", nargs="?", type=int, metavar="samples")
    c.add_argument("seed_pos", nargs="?", type=int, metavar="seed")
    c.add_argument("--samples", type=int)
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_randomfn)

    c = sub.add_parser("flowcheck", parents=[common], help="information-flow identity on random processes")
    c.add_argument("trials", nargs="?", type=int, default=100)
    c.add_argument("seed_pos", nargs="?", type=int, metavar="seed")
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_flowcheck)

    c = sub.add_parser("ricsim", parents=[common], help="simulate a reversible protocol by a standard one")
    c.add_argument("reversible")
    c.add_argument("distribution", nargs="?")
    c.add_argument("--output")
    c.set_defaults(func=cmd_ricsim)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.dim_cap is not None:
        set_dim_cap(args.dim_cap)
    try:
        return args.func(args)
    except INPUT_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        if args.dim_cap is not None:
            set_dim_cap(None)


if __name__ == "__main__":
    sys.exit(main())
