"""Command-line entry point.

Exit codes: 0 success, 1 usage error or malformed input, 2 verification failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import gadgets
from .docexchange import FAIL, SCHEMES as DE_SCHEMES, ResourceExceeded
from .dtw import dtw, dtw0, edit_distance
from .harness import SEED_ENV, ConfigError, ExperimentConfig, format_summary, run_experiment
from .io import FormatError, format_sequences, parse_metric_spec, read_config, read_metric, read_sequence
from .metric import MetricError, validate
from .protocols import SCHEMES, Estimate, GapBit, Message, ProtocolConfig, alice, bob
from .wire import WireError

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _metric(source: str):
    """A metric file path, or an inline header such as ``line 256``."""
    if Path(source).is_file():
        return read_metric(source)
    return parse_metric_spec(source)


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


def _protocol_config(args) -> ProtocolConfig:
    base = ProtocolConfig.forced() if args.forced else ProtocolConfig()
    return base.with_(de_scheme=DE_SCHEMES[args.de_scheme], search=getattr(args, "search", None))


def format_outcome(out) -> str:
    if out is FAIL:
        return "fail"
    if isinstance(out, GapBit):
        return f"gap {out.b}"
    if isinstance(out, Estimate):
        return f"estimate {out.t!r}"
    raise TypeError(out)


# ---------------------------------------------------------------------------
# subcommands


def cmd_exact(args) -> int:
    space = _metric(args.metric)
    x, y = read_sequence(args.x, space), read_sequence(args.y, space)
    print(f"dtw {dtw(x, y)}")
    print(f"dtw0 {dtw0(x, y)}")
    print(f"ed {edit_distance(x, y)}")
    return EXIT_OK


def cmd_sketch(args) -> int:
    space = _metric(args.metric)
    x = read_sequence(args.x, space)
    seed = args.seed if args.seed is not None else _default_seed()
    msg = alice(args.protocol, space, x, args.alpha, args.delta, seed, _protocol_config(args),
                r=args.r)
    Path(args.output).write_bytes(msg.to_bytes())
    print(f"bits {msg.total_bits}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    space = _metric(args.metric)
    y = read_sequence(args.y, space)
    msg = Message.from_bytes(Path(args.message).read_bytes())
    out = bob(msg, space, y, _protocol_config(args), search=args.search)
    print(format_outcome(out))
    print(f"bits {msg.total_bits}")
    return EXIT_OK


def cmd_gap(args) -> int:
    space = _metric(args.metric)
    x, y = read_sequence(args.x, space), read_sequence(args.y, space)
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = _protocol_config(args)
    msg = alice(args.protocol, space, x, args.alpha, args.delta, seed, cfg, r=args.r)
    out = bob(msg, space, y, cfg)
    print(format_outcome(out))
    print(f"bits {msg.total_bits}")
    if args.check:
        d = dtw(x, y)
        n = len(x)
        if (d <= n * args.r / args.alpha and out.b != 0) or (d > n * args.r and out.b != 1):
            print(f"promise violated: dtw {d}", file=sys.stderr)
            return EXIT_VERIFY
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_mapping(read_config(args.config))
    if args.output:
        cfg.output = args.output
    records, summary = run_experiment(cfg)
    print(format_summary(summary))
    if cfg.min_success is not None:
        rate = summary["success_rate"]
        if rate is None or rate < cfg.min_success:
            print(f"success rate {rate} below {cfg.min_success}", file=sys.stderr)
            return EXIT_VERIFY
    return EXIT_OK


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def cmd_gadget(args) -> int:
    fam = args.family
    if fam == "index":
        g = gadgets.gen_index_gadget(args.bits, args.i, args.alpha)
        if args.t is not None and args.t != len(args.bits):
            raise UsageError(f"--t {args.t} does not match {len(args.bits)} bits")
    elif fam == "int":
        g = gadgets.gen_int_gadget(_ints(args.x), args.i, args.y, args.alpha, args.m)
    elif fam == "set":
        g = gadgets.gen_set_gadget(_ints(args.S), args.a, args.alpha, args.n)
    else:
        g = gadgets.gen_linear_gadget(args.bits, args.i)
    value = g.evaluate()
    text = format_sequences([g.x, g.y], comments=[
        f"family {g.family} metric {g.space.header()}",
        f"expect {g.predicate}",
        f"observed {g.measure} {value}",
    ])
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if not g.holds(value):
        print(f"gadget predicate {g.predicate} fails: {value}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_validate(args) -> int:
    space = _metric(args.metric)
    rep = validate(space, n=args.n, poly_degree=args.poly_degree)
    print(f"kind {space.kind}")
    print(f"size {space.size}")
    print(f"aspect_ratio {rep.aspect_ratio:g}")
    if args.n is not None:
        print(f"poly_bounded {'yes' if rep.poly_bounded else 'no'}")
    for v in rep.violations:
        print(f"violation {v}")
    print("ok" if rep.ok else "invalid")
    return EXIT_OK if rep.ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# parser


def _protocol_flags(p, protocols, default):
    p.add_argument("--metric", required=True, help="metric file or inline header, e.g. 'line 256'")
    p.add_argument("--protocol", choices=protocols, default=default)
    p.add_argument("--forced", action="store_true",
                   help="use shrunken constants so the tree/partition routes engage at small alpha")
    p.add_argument("--de-scheme", choices=sorted(DE_SCHEMES), default="chunked")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dtwsketch", description="One-way DTW sketching protocols and oracles.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("exact", help="print dtw, dtw0 and edit distance of two sequence files")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--metric", required=True)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("sketch", help="Alice: write the message for x")
    p.add_argument("x")
    _protocol_flags(p, sorted(SCHEMES), "adtw_tree")
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--search", choices=["linear", "binary"], default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("estimate", help="Bob: answer from a message file and y")
    p.add_argument("message")
    p.add_argument("y")
    p.add_argument("--metric", required=True)
    p.add_argument("--forced", action="store_true")
    p.add_argument("--de-scheme", choices=sorted(DE_SCHEMES), default="chunked")
    p.add_argument("--search", choices=["linear", "binary"], default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("gap", help="run a gap protocol on two sequence files")
    p.add_argument("x")
    p.add_argument("y")
    _protocol_flags(p, ["gap_tree", "gap_partition"], "gap_partition")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--check", action="store_true", help="exit 2 if the promise answer is wrong")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("experiment", help="run an experiment config and write its CSV")
    p.add_argument("config")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("gadget", help="emit a lower-bound instance pair")
    p.add_argument("family", choices=sorted(gadgets.FAMILIES))
    p.add_argument("--alpha", type=int, default=2)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--i", type=int, default=1)
    p.add_argument("--bits", default="0")
    p.add_argument("--x", default="1", help="int family: comma-separated block values")
    p.add_argument("--y", type=int, default=1, help="int family: Bob's probed value")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--S", default="0", help="set family: comma-separated members")
    p.add_argument("--a", type=int, default=0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_gadget)

    p = sub.add_parser("validate-metric", help="check a metric file")
    p.add_argument("metric")
    p.add_argument("--n", type=int, default=None, help="sequence length for the poly(n) check")
    p.add_argument("--poly-degree", type=float, default=3.0)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("dtwsketch: a subcommand is required (see --help)")
        return args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ConfigError, MetricError, WireError, gadgets.GadgetError,
            OSError, ValueError) as e:
        print(f"dtwsketch: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceExceeded as e:
        print(f"dtwsketch: decoder budget exceeded: {e}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
