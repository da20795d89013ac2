"""Command-line interface.

Subcommands::

    analyze          channel metrics and capacity bounds            (JSON)
    transform        one combine/split step                         (CSV)
    polarize         full tree evolution and polarization fraction  (CSV)
    construct        build a code spec                              (spec text)
    encode / decode  message <-> codeword through a spec            (symbols)
    simulate         Monte Carlo block error rate                   (JSON)
    decompose        multi-level split of a composite channel       (CSV)
    rate-experiment  empirical rate-of-polarization probability     (JSON)

CSV columns:
    transform:  name,q,outputs,I_normalized,I_nats,z_avg,z_max,ml_error
    polarize:   path,I_normalized,z_avg,z_max,merge_loss
    decompose:  level,radix,outputs,I_nats,I_normalized

Every CSV starts with a ``# config_digest=...`` comment line; JSON artifacts
carry the digest as a key.  Exit status: 0 success, 2 usage error, 1
computation error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel import capacity_bounds_from_z, is_equidistant, metrics, symmetric_capacity
from .codec import dump_spec, encode, format_symbols, load_spec, parse_symbols, sc_decode
from .construction import (
    DEFAULT_MERGE_BUDGET,
    construct_code,
    evolve_tree,
    leaves_to_csv,
    polarization_fraction,
    rate_experiment,
)
from .errors import BadParam, FileParseError, PolarError
from .harness import config_digest, parse_channel, simulate_bler
from .kernels import VARIANTS, apply_kernel, decompose_composite, make_kernel


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"argument {flag}: {message}")
        self.flag = flag


def _channel(args):
    try:
        return parse_channel(args.channel)
    except (BadParam, FileParseError) as exc:
        raise UsageError("--channel", str(exc)) from None
    except PolarError as exc:
        raise UsageError("--channel", str(exc)) from None


def _kernel(args, q: int, fixed: bool = False):
    try:
        return make_kernel(args.kernel, q, fixed=fixed)
    except PolarError as exc:
        raise UsageError("--kernel", str(exc)) from None


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("out", "func")}
    channel = cfg.get("channel")
    if isinstance(channel, str) and channel.partition(":")[0] in ("file", "from_file"):
        cfg["channel_file_sha256"] = _file_hash(channel.partition(":")[2])
    for key in ("spec", "input"):
        if cfg.get(key):
            cfg[key + "_sha256"] = _file_hash(cfg[key])
            del cfg[key]
    return cfg


def _file_hash(path: str) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError:
        return "unreadable"


def _write(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)


def _dump_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _f(v: float) -> str:
    return f"{v:.6f}"


def _check_positive(value: int, flag: str, minimum: int = 1) -> None:
    if value < minimum:
        raise UsageError(flag, f"must be at least {minimum}, got {value}")


# ---------------------------------------------------------------- subcommands

def cmd_analyze(args) -> int:
    W = _channel(args)
    mt = metrics(W, make_kernel("group", W.q).group)
    lower, upper = capacity_bounds_from_z(mt.z_avg, W.q)
    digest = config_digest(_config(args))
    report = {
        "config_digest": digest,
        "q": W.q,
        "outputs": W.m,
        "I_normalized": mt.capacity_normalized,
        "I_nats": mt.capacity_nats,
        "z_avg": mt.z_avg,
        "z_max": mt.z_max,
        "z_profile": list(mt.z_profile),
        "ml_error": mt.ml_error,
        "ml_error_bound": (W.q - 1) * mt.z_avg,
        "capacity_lower_bound": lower,
        "capacity_upper_bound": upper,
        "equidistant": is_equidistant(W, 1e-9),
    }
    _write(args, _dump_json(report))
    print(f"channel {args.channel}: q={W.q} outputs={W.m}")
    print(f"I={_f(mt.capacity_normalized)} z_avg={_f(mt.z_avg)} z_max={_f(mt.z_max)} "
          f"ml_error={_f(mt.ml_error)} bounds=[{_f(lower)}, {_f(upper)}]")
    return 0


def cmd_transform(args) -> int:
    W = _channel(args)
    k = _kernel(args, W.q)
    wm, wp, _, _ = apply_kernel(W, k)
    digest = config_digest(_config(args))
    buf = io.StringIO()
    buf.write(f"# config_digest={digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "q", "outputs", "I_normalized", "I_nats", "z_avg", "z_max", "ml_error"])
    for name, ch in (("W", W), ("W-", wm), ("W+", wp)):
        mt = metrics(ch, k.group)
        w.writerow([name, ch.q, ch.m, repr(mt.capacity_normalized), repr(mt.capacity_nats),
                    repr(mt.z_avg), repr(mt.z_max), repr(mt.ml_error)])
        print(f"{name:3s} outputs={ch.m:5d} I={_f(mt.capacity_normalized)} z_avg={_f(mt.z_avg)} "
              f"z_max={_f(mt.z_max)}")
    _write(args, buf.getvalue())
    return 0


def cmd_polarize(args) -> int:
    W = _channel(args)
    k = _kernel(args, W.q)
    _check_positive(args.levels, "--levels", 0)
    if not 0 < args.delta < 0.5:
        raise UsageError("--delta", "must lie in (0, 0.5)")
    tree = evolve_tree(W, args.levels, k, args.merge_budget)
    frac = polarization_fraction(tree.leaves, args.delta)
    mean_i = float(np.mean([leaf.metrics.capacity_normalized for leaf in tree.leaves]))
    loss = sum(leaf.merge_loss for leaf in tree.leaves) / len(tree.leaves)
    _write(args, leaves_to_csv(tree.leaves, config_digest(_config(args))))
    print(f"leaves={len(tree.leaves)} kernel={k.describe()} delta={args.delta}")
    print(f"polarization_fraction={frac:.6f} mean_I={mean_i:.9f} mean_merge_loss_nats={loss:.3g}")
    return 0


def _code_size(args, N: int):
    if args.k is not None:
        if not 0 <= args.k <= N:
            raise UsageError("--k", f"must lie in 0..{N}")
        return args.k, None
    if args.rate is None:
        raise UsageError("--rate", "give --rate or --k")
    if not 0 <= args.rate <= 1:
        raise UsageError("--rate", "must lie in [0, 1]")
    return None, args.rate


def _build_spec(args, W):
    _check_positive(args.levels, "--levels", 0)
    k = _kernel(args, W.q, fixed=True)
    K, rate = _code_size(args, 1 << args.levels)
    spec, tree = construct_code(W, args.levels, k, K=K, rate=rate, merge_budget=args.merge_budget)
    return spec, tree


def cmd_construct(args) -> int:
    W = _channel(args)
    spec, tree = _build_spec(args, W)
    digest = config_digest(_config(args))
    _write(args, f"# config_digest={digest}\n" + dump_spec(spec))
    print(f"N={spec.N} K={spec.K} rate={spec.rate:.4f} kernel={spec.kernel}")
    print("info " + " ".join(map(str, spec.info_set)))
    return 0


def _read_spec(args):
    try:
        return load_spec(Path(args.spec).read_text())
    except OSError as exc:
        raise UsageError("--spec", str(exc)) from None
    except PolarError as exc:
        raise UsageError("--spec", str(exc)) from None


def _read_input(args) -> list:
    try:
        return parse_symbols(Path(args.input).read_text())
    except OSError as exc:
        raise UsageError("--input", str(exc)) from None
    except FileParseError as exc:
        raise UsageError("--input", str(exc)) from None


def cmd_encode(args) -> int:
    spec = _read_spec(args)
    x = encode(spec, _read_input(args))
    text = format_symbols(x)
    _write(args, text)
    sys.stdout.write(text)
    return 0


def cmd_decode(args) -> int:
    spec = _read_spec(args)
    W = _channel(args)
    rx = _read_input(args)
    if any(not 0 <= y < W.m for y in rx):
        raise UsageError("--input", f"output indices must lie in 0..{W.m - 1}")
    msg, _ = sc_decode(spec, W, W.matrix[:, rx].T)
    text = format_symbols(msg)
    _write(args, text)
    sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    W = _channel(args)
    _check_positive(args.trials, "--trials")
    if args.spec:
        spec = _read_spec(args)
    else:
        spec, _ = _build_spec(args, W)
    rep = simulate_bler(spec, W, args.trials, args.seed)
    out = rep.to_dict()
    out["run_digest"] = config_digest(_config(args))
    out.update(N=spec.N, K=spec.K, rate=spec.rate)
    _write(args, _dump_json(out))
    print(f"N={spec.N} K={spec.K} trials={rep.trials} block_errors={rep.block_errors} "
          f"bler={rep.bler:.6f} +/- {rep.wilson_95_halfwidth:.6f} ser={rep.ser:.6f}")
    return 0


def cmd_decompose(args) -> int:
    W = _channel(args)
    try:
        radices = [int(r) for r in args.radices.split(",")]
    except ValueError:
        raise UsageError("--radices", f"bad list {args.radices!r}") from None
    try:
        levels = decompose_composite(W, radices)
    except PolarError as exc:
        raise UsageError("--radices", str(exc)) from None
    digest = config_digest(_config(args))
    buf = io.StringIO()
    buf.write(f"# config_digest={digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "radix", "outputs", "I_nats", "I_normalized"])
    total = 0.0
    for i, (r, ch) in enumerate(zip(radices, levels), start=1):
        cap = symmetric_capacity(ch)
        total += cap.nats
        w.writerow([i, r, ch.m, repr(cap.nats), repr(cap.normalized)])
        print(f"level {i}: radix={r} I_nats={cap.nats:.9f}")
    print(f"sum I_nats={total:.9f} channel I_nats={symmetric_capacity(W).nats:.9f}")
    _write(args, buf.getvalue())
    return 0


def cmd_rate_experiment(args) -> int:
    W = _channel(args)
    _check_positive(args.trials, "--trials")
    _check_positive(args.levels, "--levels")
    if not 0 < args.beta < 1:
        raise UsageError("--beta", "must lie in (0, 1)")
    k = _kernel(args, W.q)
    est = rate_experiment(W, args.levels, args.beta, args.trials, args.seed, kernel=k,
                          merge_budget=args.merge_budget)
    out = {
        "config_digest": config_digest(_config(args)),
        "estimate": est.estimate,
        "halfwidth_95": est.halfwidth,
        "successes": est.successes,
        "trials": est.trials,
        "log2_threshold": est.log2_threshold,
        "method": est.method,
        "I0": symmetric_capacity(W).normalized,
        "seed": args.seed,
    }
    _write(args, _dump_json(out))
    print(f"P(T_n <= 2^-2^(beta n)) = {est.estimate:.4f} +/- {est.halfwidth:.4f} "
          f"(n={args.levels}, beta={args.beta}, I0={out['I0']:.4f}, method={est.method})")
    return 0


# ---------------------------------------------------------------- parser

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qpolar", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_, *flags):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func)
        for flag in flags:
            flag(sp)
        sp.add_argument("--out", help="artifact path")
        return sp

    def channel(sp, required=True):
        sp.add_argument("--channel", required=required,
                        help="qsc:Q:P | qec:Q:EPS | counterexample4 | noiseless:Q | useless:Q | file:PATH")

    def kernel(sp):
        sp.add_argument("--kernel", choices=VARIANTS, default="group")

    def levels(sp):
        sp.add_argument("--levels", type=int, required=True)

    def budget(sp):
        sp.add_argument("--merge-budget", type=int, default=DEFAULT_MERGE_BUDGET)

    def size(sp):
        sp.add_argument("--rate", type=float)
        sp.add_argument("--k", type=int)

    def spec(sp, required=True):
        sp.add_argument("--spec", required=required, help="code spec file")

    def inp(sp):
        sp.add_argument("--input", required=True, help="whitespace-separated symbols")

    def seed(sp):
        sp.add_argument("--seed", type=int, default=0)

    def trials(sp, default):
        sp.add_argument("--trials", type=int, default=default)

    add("analyze", cmd_analyze, "channel metrics and capacity bounds", channel)
    add("transform", cmd_transform, "one combine/split step", channel, kernel)
    sp = add("polarize", cmd_polarize, "evolve the polarization tree", channel, kernel, levels, budget)
    sp.add_argument("--delta", type=float, default=0.1)
    add("construct", cmd_construct, "construct a polar code", channel, kernel, levels, size, budget)
    add("encode", cmd_encode, "encode a message", spec, inp)
    add("decode", cmd_decode, "SC-decode received output indices", spec, channel, inp)
    sp = add("simulate", cmd_simulate, "Monte Carlo BLER", channel, kernel, size, budget, seed,
             lambda s: trials(s, 1000), lambda s: spec(s, False))
    sp.add_argument("--levels", type=int, default=6)
    sp = add("decompose", cmd_decompose, "multi-level decomposition", channel)
    sp.add_argument("--radices", required=True, help="comma-separated primes, least significant first")
    sp = add("rate-experiment", cmd_rate_experiment, "rate-of-polarization experiment", channel, kernel,
             levels, budget, seed, lambda s: trials(s, 10000))
    sp.add_argument("--beta", type=float, default=0.3)
    return p


def run_cli(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if hasattr(args, "merge_budget") and args.merge_budget < 1:
        parser.print_usage(sys.stderr)
        print(f"qpolar: error: argument --merge-budget: must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qpolar {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except PolarError as exc:
        print(f"qpolar {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
