"""Command line entry point.

Subcommands: ``plan``, ``sweep``, ``ingest``, ``estimate-cn``, ``complexity``.
Exit codes: 0 success, 1 validation error, 2 I/O error, 3 non-convergence.
"""

import argparse
import dataclasses
import json
import sys

from . import harness
from .errors import FormatError, RSTCError
from .mismatch import fit_rvq_scaling
from .ratesplit import NEVER, phase_threshold

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_CONVERGENCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _number_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _cn(text):
    if text in ("default", "estimate"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("c_n must be a number, 'default' or 'estimate'")


def _optional_float(text):
    return None if text.lower() == "none" else float(text)


_OVERRIDE_TYPES = {
    "rates": _number_list,
    "cn_bits": _int_list,
    "c_n": _cn,
    "factor_share": _optional_float,
}


def _add_overrides(p):
    g = p.add_argument_group("config overrides (same names as config-file keys)")
    for f in dataclasses.fields(harness.ExperimentConfig):
        if f.name == "seed":
            continue
        kind = _OVERRIDE_TYPES.get(f.name)
        if kind is None:
            default = f.default
            kind = {bool: _bool, int: int, float: float, str: str}[type(default)]
        flag = "--" + f.name.replace("_", "-")
        g.add_argument(flag, dest=f.name, type=kind, default=None, metavar=f.name.upper())


def _add_common(p, overrides=True):
    p.add_argument("--config", help="flat TOML file of config keys")
    p.add_argument("--p-values", dest="p_values", type=_int_list, default=None,
                   help="comma-separated dominant-column counts to sweep over")
    p.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    if overrides:
        _add_overrides(p)


def build_parser():
    parser = _Parser(prog="rstc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="analytic split, threshold and model distortion")
    _add_common(p)
    p = sub.add_parser("sweep", help="full Monte Carlo rate-distortion sweep")
    _add_common(p)
    p = sub.add_parser("ingest", help="channel dump -> moment-matched plan or sweep")
    p.add_argument("path", help="channel dump file (CSID format)")
    p.add_argument("--simulate", action="store_true", help="run the Monte Carlo sweep too")
    _add_common(p)

    p = sub.add_parser("estimate-cn", help="fit the RVQ constant c_N")
    p.add_argument("--n", type=int, required=True, help="vector dimension")
    p.add_argument("--bits", type=_int_list, default=[4, 6, 8, 10, 12])
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("complexity", help="parameter and FLOP count of the separable transform")
    p.add_argument("--nt", type=int, default=32)
    p.add_argument("--nc", type=int, default=32)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--out")
    return parser


def _config(args, **extra):
    mapping = harness.load_config(args.config) if args.config else {}
    overrides = {f.name: getattr(args, f.name, None)
                 for f in dataclasses.fields(harness.ExperimentConfig)}
    overrides.update(extra)
    return harness.make_config(mapping, **overrides)


def _emit(records, args):
    if args.out:
        harness.emit_results(records, args.out, args.format)
    else:
        harness.write_results(records, sys.stdout, args.format)


def _write_json(obj, out):
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        try:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise FormatError(f"{out}: cannot write ({exc.strerror or exc})") from exc
    else:
        sys.stdout.write(text)


def _report_threshold(config, source, model):
    if config.basis == "perfect" or model.p == 0:
        return
    th = phase_threshold(source.spectrum, model)
    if th.beneficial:
        print(f"# N={source.n} p={model.p} tau={config.tau} beta0={model.beta0:.6g} "
              f"alpha0={model.alpha0:.6g} R_th={th.rate:.9g} (closed form {th.closed_form:.9g})",
              file=sys.stderr)
    else:
        print(f"# basis feedback never beneficial (R_th sentinel {NEVER:g})", file=sys.stderr)


def _run(args):
    if args.command == "complexity":
        params, flops = harness.structured_complexity(args.nt, args.nc, args.p)
        _write_json({"nt": args.nt, "nc": args.nc, "parameters": params, "flops": flops,
                     "flop_convention": "1 complex MAC = 2 FLOPs"}, args.out)
        return
    if args.command == "estimate-cn":
        fit = fit_rvq_scaling(args.n, args.bits, args.trials, args.seed)
        _write_json(dataclasses.asdict(fit), args.out)
        return

    extra = {"source": args.path} if args.command == "ingest" else {}
    if args.seed is not None:
        extra["seed"] = args.seed
    config = _config(args, **extra)
    source = harness.prepare_source(config)
    if args.command == "ingest":
        print(f"# ingested {source.channels.count} realizations of dim {source.n}; "
              f"moment-matched trace {source.spectrum.sum():.6g}", file=sys.stderr)
    model = harness.resolve_model(config, source)
    _report_threshold(config, source, model)
    simulate = args.command == "sweep" or (args.command == "ingest" and args.simulate)
    if args.p_values:
        records = harness.run_p_sweep(config, args.p_values, simulate=simulate)
    else:
        records = harness.run_rd_sweep(config, simulate=simulate, source=source, model=model)
    _emit(records, args)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _run(args)
    except RSTCError as exc:
        print(f"rstc: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"rstc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
