"""``cohten`` command line interface.

Exit codes: 0 success, 1 I/O or usage error, 2 certificate failure or
infeasible constrained fit, 3 numeric domain error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import coherence_metrics as coh
from .array_model import ground_truth_from_model, load_scenario, synthesize
from .certificates import certify_model
from .degeneracy import DslInstance, demo_degeneracy
from .io import FormatError, read_cmx, read_cpj, read_ct3, write_cpj, write_ct3
from .recovery import extract_waveforms
from .solver import InfeasibleError, SolverOptions, decompose
from .tensor_core import DimensionError, DomainError

EXIT_OK = 0
EXIT_IO = 1
EXIT_CHECK = 2
EXIT_DOMAIN = 3

logger = logging.getLogger("cohten")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_triple(text: str):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return vals


def _int_list(text: str):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_text(path, text: str):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _write_manifest(args, inputs, outputs, seed, started):
    target = args.manifest
    if target is None and outputs:
        target = f"{outputs[0]}.manifest.json"
    if target is None:
        return
    options = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "manifest")}
    manifest = {
        "command": args.command,
        "options": options,
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "wall_time_s": time.perf_counter() - started,
        "checksums": {str(p): _sha256(p) for p in outputs},
        "version": __version__,
    }
    _write_text(target, json.dumps(manifest, indent=1, default=str) + "\n")


# ----------------------------------------------------------------------------
# subcommands


def cmd_synth(args, started):
    scn = load_scenario(args.config, seed=args.seed)
    A, truth = synthesize(scn, noise_snr_db=args.snr_db, seed=args.seed)
    write_ct3(args.out, A)
    outputs = [args.out]
    if args.truth:
        write_cpj(args.truth, truth.model)
        outputs.append(args.truth)
    print(f"wrote {args.out}: dims {A.dims}, {len(scn.sources)} sources, "
          f"mu = ({truth.mu_u:.6g}, {truth.mu_v:.6g}, {truth.mu_w:.6g})")
    _write_manifest(args, [args.config], outputs, args.seed, started)
    return EXIT_OK


def cmd_decompose(args, started):
    A = read_ct3(args.input)
    opts = SolverOptions(
        rank=args.rank,
        mu_caps=args.mu_caps,
        max_iter=args.max_iter,
        rel_tol=args.tol,
        restarts=args.restarts,
        seed=args.seed,
    )
    try:
        model, trace = decompose(A, opts)
        code = EXIT_OK
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        model, trace, code = exc.model, exc.trace, EXIT_CHECK
    outputs = []
    if code == EXIT_OK:
        write_cpj(args.out, model)
        outputs.append(args.out)
    if args.trace and trace is not None:
        _write_text(args.trace, trace.to_csv())
        outputs.append(args.trace)
    print(f"status {trace.status}, residual {trace.final_residual:.6g} "
          f"after {trace.iters[-1]} iterations")
    _write_manifest(args, [args.input], outputs, args.seed, started)
    return code


def cmd_certify(args, started):
    M = read_cpj(args.model)
    cert = certify_model(M, tol=args.tol)
    print(f"r = {cert.r}; mu = ({cert.mu_u:.6g}, {cert.mu_v:.6g}, {cert.mu_w:.6g}); "
          f"krank = ({cert.krank_u}, {cert.krank_v}, {cert.krank_w})"
          + ("" if cert.krank_exact else " [coherence lower bounds]"))
    print(f"{'check':<20}{'lhs':>14}{'rhs':>14}  {'verdict':<8}{'margin':>14}")
    for c in cert.checks:
        verdict = "holds" if c.holds else "FAILS"
        print(f"{c.name:<20}{c.lhs:>14.6g}{c.rhs:>14.6g}  {verdict:<8}{c.margin:>14.6g}")
    if not cert.weights_nonzero:
        print("warning: some weights are numerically zero; rank not certified")
    _write_manifest(args, [args.model], [], None, started)
    return EXIT_OK if cert["coherence_kruskal"].holds else EXIT_CHECK


def cmd_localize(args, started):
    M = read_cpj(args.model)
    scn = load_scenario(args.config, seed=0)
    truth = None
    inputs = [args.model, args.config]
    if args.truth:
        truth = ground_truth_from_model(read_cpj(args.truth),
                                        np.stack([s.direction for s in scn.sources]))
        inputs.append(args.truth)
    result = extract_waveforms(M, truth, scn.translations, scn.omega, scn.celerity)
    _write_text(args.out, json.dumps(result.to_dict(), indent=1) + "\n")
    for p, s in enumerate(result.sources):
        d = "unresolved" if s.direction is None else np.array2string(s.direction, precision=4)
        extra = ""
        if s.rho is not None:
            extra = f" rho {s.rho:.6f}"
        if s.direction_error_deg is not None:
            extra += f" error {s.direction_error_deg:.4g} deg"
        flags = f" [{','.join(s.flags)}]" if s.flags else ""
        print(f"source {p}: direction {d}{extra}{flags}")
    _write_manifest(args, inputs, [args.out], None, started)
    return EXIT_OK


def cmd_spark(args, started):
    X = read_cmx(args.matrix)
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0.0):
        raise DomainError("matrix has a zero column")
    V = X / norms
    rep = coh.coherence_report(V, args.tol)
    spark_lb, krank_lb = coh.spark_coherence_bounds(V)
    print(f"mu {rep.mu:.17g}")
    print(f"spark {rep.spark}")
    print(f"krank {rep.krank}")
    print(f"girth {rep.girth}")
    print(f"spark_lower_bound {spark_lb:.17g}")
    print(f"krank_lower_bound {krank_lb:.17g}")
    _write_manifest(args, [args.matrix], [], None, started)
    return EXIT_OK


def cmd_demo_degeneracy(args, started):
    opts = SolverOptions(rank=2, max_iter=args.max_iter, restarts=args.restarts,
                         seed=args.seed, rel_tol=args.tol)
    report = demo_degeneracy(DslInstance.orthonormal(), args.n_list, opts,
                             caps=args.constrained_caps)
    _write_text(args.out, report.to_csv())
    outputs = [args.out]
    stem = str(Path(args.out).with_suffix(""))
    model, trace = report.unconstrained
    path = f"{stem}.unconstrained.trace.csv"
    _write_text(path, trace.to_csv())
    outputs.append(path)
    print(f"unconstrained: status {trace.status}, residual {trace.final_residual:.6g}, "
          f"max|lambda| {trace.lambda_max[-1]:.6g}")
    code = EXIT_OK
    if report.constrained is not None:
        model, trace = report.constrained
        path = f"{stem}.constrained.trace.csv"
        _write_text(path, trace.to_csv())
        outputs.append(path)
        print(f"constrained: status {trace.status}, residual {trace.final_residual:.6g}, "
              f"max|lambda| {trace.lambda_max[-1]:.6g}")
    elif report.constrained_error:
        print(f"constrained: {report.constrained_error}", file=sys.stderr)
        code = EXIT_CHECK
    _write_manifest(args, [], outputs, args.seed, started)
    return code


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cohten", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cohten {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--manifest", help="run manifest path (default: <first output>.manifest.json)")
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "synthesize a measurement tensor from a scenario file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--truth")

    p = add("decompose", cmd_decompose, "fit a rank-r CP model")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--mu-caps", type=_float_triple, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")

    p = add("certify", cmd_certify, "evaluate existence/uniqueness conditions of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--tol", type=float, default=coh.DEFAULT_TOL)

    p = add("localize", cmd_localize, "recover source directions and waveforms")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--truth")
    p.add_argument("--out", required=True)

    p = add("spark", cmd_spark, "coherence, spark and k-rank of matrix columns")
    p.add_argument("--matrix", required=True)
    p.add_argument("--tol", type=float, default=coh.DEFAULT_TOL)

    p = add("demo-degeneracy", cmd_demo_degeneracy,
            "tabulate the border-rank sequence and fit rank 2 to its limit")
    p.add_argument("--n-list", type=_int_list, default=[1, 10, 100, 1000])
    p.add_argument("--constrained-caps", type=_float_triple, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        return args.func(args, started)
    except (OSError, FormatError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"cohten {args.command}: input/output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, DimensionError, coh.CapacityError, ValueError) as exc:
        print(f"cohten {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main():
    sys.exit(dispatch())
