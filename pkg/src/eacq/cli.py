"""Command-line front end.

Exit codes: 0 success, 1 domain error, 2 verification failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from fractions import Fraction
from pathlib import Path

from .errors import DomainError, EACQError, VerificationError

EXIT_OK, EXIT_DOMAIN, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# -- argument helpers ---------------------------------------------------------------

def _params(args):
    from .region import IIDParams, SingletonParams

    if args.delta is not None:
        if args.n is not None or args.d is not None:
            raise UsageError("give either --n/--d or --delta, not both")
        return IIDParams(args.q, Fraction(args.delta))
    if args.n is None or args.d is None:
        raise UsageError("need --n and --d (block erasure) or --delta (i.i.d. erasure)")
    return SingletonParams(args.n, args.d, args.q)


def _scale(args) -> tuple[str, float | None]:
    """Output units and the factor turning log-q units into bits (None when exact)."""
    if args.units == "logq":
        return "logq", None
    return "bits", math.log2(args.q)


def _render(x: Fraction, factor):
    return str(x) if factor is None else float(x) * factor


def _channel(spec: str, q: int, n: int | None):
    from .channels import BlockErasureSpec, build_block_erasure, build_iid_erasure

    kind, _, rest = spec.partition(":")
    if kind == "erasure":
        if n is None:
            raise DomainError("erasure:delta needs the number of channel uses")
        return build_iid_erasure(q, Fraction(rest), n)
    if kind == "block":
        try:
            n_ch, w = (int(x) for x in rest.split(","))
        except ValueError:
            raise UsageError(f"block channel spec must be block:n,w, got {spec!r}") from None
        if n is not None and n_ch != n:
            raise DomainError(f"channel has {n_ch} uses but the input has {n}")
        return build_block_erasure(BlockErasureSpec(q, n_ch, w))
    raise UsageError(f"unknown channel spec {spec!r}; use erasure:delta or block:n,w")


# -- commands -----------------------------------------------------------------------

def cmd_region(args) -> tuple[str, int]:
    from .region import export_slice, geometry, hrep_singleton

    p = _params(args)
    units, factor = _scale(args)
    if args.slice:
        m = re.fullmatch(r"([CQE])=(.+)", args.slice)
        if not m:
            raise UsageError("--slice must look like C=0, Q=1/2 or E=1")
        csv_text = export_slice(p, (m.group(1), Fraction(m.group(2))), Fraction(args.step),
                                None if args.lo is None else Fraction(args.lo),
                                None if args.hi is None else Fraction(args.hi))
        if factor is not None:
            lines = csv_text.splitlines()
            body = [",".join([repr(float(Fraction(x)) * factor), repr(float(Fraction(y)) * factor), mem])
                    for x, y, mem in (ln.split(",") for ln in lines[1:])]
            csv_text = "\n".join(lines[:1] + body) + "\n"
        return f"# units={units} fixed={args.slice}\n" + csv_text, EXIT_OK
    if args.geometry:
        g = geometry(p).to_json()
        if factor is not None:
            g["a0"] = [_render(Fraction(x), factor) for x in g["a0"]]
            g["a1"] = [_render(Fraction(x), factor) for x in g["a1"]]
            g["units"] = units
        return _dump(g), EXIT_OK
    h = hrep_singleton(p)
    rows = [[str(c) for c in row[:3]] + [_render(row[3], factor)] for row in h.rows]
    out = {"rows": rows, "infeasible": h.infeasible, "form": "cC*C + cQ*Q + cE*E <= rhs", "units": units,
           "achievability": "converse-only away from the extreme points"}
    return _dump(out), EXIT_OK


def cmd_member(args) -> tuple[str, int]:
    from .region import RateTriple, membership

    p = _params(args)
    r = RateTriple.parse(args.triple)
    out = membership(p, r).to_json()
    out["triple"] = r.to_json()
    out["units"] = "logq"
    return _dump(out), EXIT_OK


def cmd_lemmas(args) -> tuple[str, int]:
    from .lemmas import run_suites, summary_to_json

    dims = tuple(int(x) for x in args.dims.split(","))
    summaries = run_suites(args.suite, trials=args.trials, seed=args.seed, dims=dims)
    out = summary_to_json(summaries)
    return _dump(out), EXIT_OK if out["pass"] else EXIT_VERIFY


def cmd_converse(args) -> tuple[str, int]:
    from .converse import CodeRates, check_rates, thm1_bounds
    from .hilbert import ensemble_from_json

    ens = ensemble_from_json(json.loads(Path(args.ensemble).read_text()))
    rates = CodeRates.from_json(json.loads(Path(args.rates).read_text())) if args.rates else CodeRates()
    a_prime = tuple(lab for lab in ens.layout.labels if re.fullmatch(r"A\d+", lab))
    if not a_prime:
        raise DomainError("ensemble has no channel-input factors named A1, A2, ...")
    q = ens.layout.dims[ens.layout.index(a_prime[0])]
    ch = _channel(args.channel, q, len(a_prime))
    bounds = thm1_bounds(ens, ch, rates, a_prime=a_prime)
    ok = check_rates(bounds, rates)
    out = {"bounds": bounds.to_json(), "rates": rates.to_json(), "within_bounds": ok,
           "channel": args.channel, "units": "bits"}
    return _dump(out), EXIT_OK if ok else EXIT_VERIFY


def cmd_simulate(args) -> tuple[str, int]:
    from .codes import load_code, simulate
    from .config import TOL_ALG

    code = load_code(args.code)
    ch = _channel(args.channel, code.q, code.n)
    res = simulate(code, ch, snapshots=False)
    out = res.to_json(code)
    out["channel"] = args.channel
    out["zero_error"] = res.epsilon <= TOL_ALG
    out["units"] = {"epsilon": "dimensionless", "rates_bits": "bits", "triple_logq": "logq"}
    return _dump(out), EXIT_OK


def cmd_codes(args) -> tuple[str, int]:
    from .codes import SHIPPED, load_code
    from .codes.eaq import LINEAR, SUPPORTED

    items = []
    for name, spec in SHIPPED.items():
        code = load_code(spec)
        items.append({"name": name, "spec": spec, "tag": code.tag(), "triple": code.triple().to_json(),
                      "q": code.q, "n": code.n})
    out = {"codes": items, "protocols": ["teleport", "dense_code", "qubit_to_ebit"],
           "eaq_instances": [list(x) for x in SUPPORTED + LINEAR], "units": "logq"}
    return _dump(out), EXIT_OK


# -- parser -------------------------------------------------------------------------

def _region_flags(p):
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--delta", help="i.i.d. erasure probability, e.g. 1/4")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eacq", description="Singleton rate regions and EACQ codes.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("region", help="H-representation, geometry or a CSV slice of the region")
    _region_flags(p)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--hrep", action="store_true")
    mode.add_argument("--geometry", action="store_true")
    mode.add_argument("--slice", metavar="COORD=VALUE")
    p.add_argument("--step", default="1/4")
    p.add_argument("--lo")
    p.add_argument("--hi")
    p.add_argument("--units", choices=("bits", "logq"), default="logq")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("member", help="membership of a rate triple (log q units)")
    _region_flags(p)
    p.add_argument("--triple", required=True, metavar="C,Q,E")
    p.add_argument("--units", choices=("bits", "logq"), default="logq")
    p.set_defaults(func=cmd_member)

    p = sub.add_parser("lemmas", help="seeded randomized entropy-inequality suites")
    p.add_argument("--suite", choices=("fannes", "af", "avg", "crazy", "ssa", "all"), default="all")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", default="2,2")
    p.add_argument("--units", choices=("bits", "logq"), default="bits")
    p.set_defaults(func=cmd_lemmas)

    p = sub.add_parser("converse", help="converse bounds for a witness ensemble")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--channel", required=True, metavar="erasure:DELTA|block:N,W")
    p.add_argument("--rates")
    p.add_argument("--units", choices=("bits", "logq"), default="bits")
    p.set_defaults(func=cmd_converse)

    p = sub.add_parser("simulate", help="run a code through a channel exactly")
    p.add_argument("--code", required=True, metavar="NAME|rs:q,n,k|eaq:n,d,q|FILE.json")
    p.add_argument("--channel", required=True, metavar="erasure:DELTA|block:N,W")
    p.add_argument("--units", choices=("bits", "logq"), default="bits")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("codes", help="list shipped codes")
    p.set_defaults(func=cmd_codes)

    for sp in sub.choices.values():
        sp.add_argument("--out", help="write output to this path instead of stdout")
    return parser


def run(argv=None) -> tuple[int, str]:
    """Parse and dispatch; returns ``(exit code, output text)``."""
    try:
        args = build_parser().parse_args(argv)
        text, code = args.func(args)
    except UsageError as exc:
        return EXIT_USAGE, f"usage error: {exc}\n"
    except VerificationError as exc:
        return EXIT_VERIFY, _dump({"error": "verification", "message": str(exc)})
    except (EACQError, NotImplementedError, ValueError, OSError) as exc:
        return EXIT_DOMAIN, _dump({"error": type(exc).__name__, "message": str(exc)})
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
        return code, ""
    return code, text


def main(argv=None) -> int:
    code, text = run(argv)
    stream = sys.stdout if code in (EXIT_OK, EXIT_VERIFY) else sys.stderr
    stream.write(text)
    return code
