"""Command-line front end: ``gqs <command> ...``.

Every run writes a manifest (argv, seed, tolerance, version, wall clock,
output digest). With ``--output PATH`` it goes to ``PATH.manifest.json``
(or ``--manifest``); otherwise it is printed to stderr as one JSON line.
``gqs replay MANIFEST`` re-executes the recorded argv.

Exit codes: 0 success, 1 failed verification, 2 schema/usage/file error,
3 invariant violation. Diagnostics are single lines prefixed ``error:``.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import time
import warnings
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import io as gio
from .canonical import CanonicalSpec, compare_geometric_gibbs
from .errors import GqsError, SchemaError
from .gstate import density_matrix, histogram, povm_statistics
from .hybrid import HybridDecomposition, capacity_bounds, pushforward, reduced_density_matrix
from .thermo import (
    BipartitePureState,
    environment_density_matrix,
    environment_scaling_report,
    geometric_state_of,
    reduce,
)
from .verify import CHECKS, run_checks

EXIT_VERIFY_FAILED = 1
EXIT_SCHEMA = 2
EXIT_INVARIANT = 3


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SchemaError(f"usage: {message}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# --- command implementations: each returns (text, exit_code) ---------------


def _load(path):
    return gio.load_state(gio.read_json(path))


def cmd_rho(args):
    obj = _load(args.state)
    if isinstance(obj, HybridDecomposition):
        rho = reduced_density_matrix(obj)
    elif isinstance(obj, BipartitePureState):
        rho = reduce(obj).system_density_matrix()
    else:
        rho = density_matrix(gio.as_geometric_state(obj))
    return _dumps({"rho": gio.density_matrix_to_json(rho)}), 0


def cmd_povm(args):
    state = gio.as_geometric_state(_load(args.state))
    povm = gio.povm_from_json(gio.read_json(args.povm))
    probs = povm_statistics(state, povm)
    return _dumps({"probabilities": [float(x) for x in probs]}), 0


def _bins(args):
    bp = args.bins_p or args.bins
    bn = args.bins_phase or args.bins
    return bp, bn


def cmd_histogram(args):
    state = gio.as_geometric_state(_load(args.state))
    h = histogram(state, *_bins(args))
    if args.format == "json":
        return _dumps({"p_edges": h.p_edges.tolist(), "nu_edges": h.nu_edges.tolist(), "mass": h.mass.tolist()}), 0
    return h.to_csv(), 0


def _report_json(r) -> dict:
    doc = {
        "method": r.method,
        "rho_geom": gio.density_matrix_to_json(r.rho_geom),
        "rho_gibbs": gio.density_matrix_to_json(r.rho_gibbs),
        "energies": [float(x) for x in r.energies],
        "populations_geom": [float(x) for x in r.populations_geom],
        "populations_gibbs": [float(x) for x in r.populations_gibbs],
        "population_gap": [float(x) for x in r.population_gap],
        "max_abs_diff": r.max_abs_diff,
        "commutator_geom": r.commutator_geom,
        "commutator_gibbs": r.commutator_gibbs,
    }
    if r.stderr is not None:
        doc["stderr"] = {"real": r.stderr.real.tolist(), "imag": r.stderr.imag.tolist()}
    return doc


def cmd_canonical(args):
    spec = CanonicalSpec(gio.observable_from_json(gio.read_json(args.hamiltonian)), args.beta)
    report = compare_geometric_gibbs(
        spec,
        bins_p=args.grid,
        bins_phase=args.bins_phase,
        n_samples=args.samples,
        seed=args.seed,
        rtol=args.tolerance,
    )
    return _dumps(_report_json(report)), 0


def _load_decomposition(path) -> HybridDecomposition:
    obj = _load(path)
    if not isinstance(obj, HybridDecomposition):
        raise SchemaError(f"{path}: expected a state file of kind 'hybrid'")
    return obj


def cmd_hybrid_decompose(args):
    return _dumps(gio.decomposition_to_json(_load_decomposition(args.state))), 0


def cmd_hybrid_reduce(args):
    rho = reduced_density_matrix(_load_decomposition(args.state))
    return _dumps({"rho": gio.density_matrix_to_json(rho)}), 0


def cmd_hybrid_pushforward(args):
    ens = pushforward(_load_decomposition(args.state), args.samples, args.seed)
    if args.format == "csv":
        return histogram(ens, *_bins(args)).to_csv(), 0
    return _dumps(gio.geometric_state_to_json(ens)), 0


def cmd_hybrid_bounds(args):
    b = capacity_bounds(args.n, args.d)
    return _dumps({"n": args.n, "d": args.d, "m_full": b.m_full, "m_prod": b.m_prod}), 0


def _load_bipartite(args) -> BipartitePureState:
    doc = gio.read_json(args.state)
    if isinstance(doc, dict) and "kind" not in doc and "psi" in doc:
        doc = {"version": gio.FORMAT_VERSION, "kind": "bipartite", **doc}
    if args.ds is not None and isinstance(doc, dict):
        doc.setdefault("d_s", args.ds)
    obj = gio.load_state(doc)
    if not isinstance(obj, BipartitePureState):
        raise SchemaError(f"{args.state}: expected a state file of kind 'bipartite'")
    return obj


def cmd_thermo_reduce(args):
    ens = reduce(_load_bipartite(args))
    doc = {
        "ensemble": gio.labeled_ensemble_to_json(ens),
        "rho_s": gio.density_matrix_to_json(ens.system_density_matrix()),
        "rho_e": gio.density_matrix_to_json(environment_density_matrix(ens)),
    }
    if ens.d_s == 2:
        h = histogram(geometric_state_of(ens), *_bins(args))
        if args.format == "csv":
            return h.to_csv(), 0
        if args.histogram:
            Path(args.histogram).write_text(h.to_csv())
    return _dumps(doc), 0


def cmd_thermo_scaling(args):
    try:
        des = [int(x) for x in args.de.split(",") if x.strip()]
    except ValueError:
        raise SchemaError(f"--de must be a comma-separated list of integers, got {args.de!r}") from None
    rows = environment_scaling_report(args.ds, des, args.seed, args.seeds, *_bins(args))
    if args.format == "csv":
        buf = io.StringIO()
        buf.write("d_e,mean_trace_distance,stderr\n")
        for r in rows:
            buf.write(f"{r.d_e},{r.mean_distance!r},{r.stderr!r}\n")
        return buf.getvalue(), 0
    out = []
    for r in rows:
        entry = {
            "d_e": r.d_e,
            "mean_trace_distance": r.mean_distance,
            "stderr": r.stderr,
            "trace_distances": r.distances.tolist(),
        }
        if r.histogram is not None:
            entry["histogram"] = r.histogram.mass.tolist()
        out.append(entry)
    return _dumps({"d_s": args.ds, "seed": args.seed, "n_seeds": args.seeds, "rows": out}), 0


def cmd_verify(args):
    if args.list:
        return "".join(f"{c.name}\t{'gated' if c.gated else 'report'}\t{c.source}\n" for c in CHECKS), 0
    override = gio.matrix_from_json(gio.read_json(args.rho)) if args.rho else None
    results = run_checks(override, q1_bins=args.q1_bins)
    text = "".join(r.line() + "\n" for r in results)
    failed = [r for r in results if r.gated and not r.passed]
    text += f"{len(results) - len(failed)}/{len(results)} checks ok, {len(failed)} failed\n"
    return text, EXIT_VERIFY_FAILED if failed else 0


# --- parser -----------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="RNG seed for sampled paths")
    p.add_argument("--tolerance", type=float, default=1e-3, help="grid refinement tolerance (relative)")
    p.add_argument("--output", help="write the result here instead of stdout")
    p.add_argument("--manifest", help="manifest path (default: OUTPUT.manifest.json, else stderr)")
    p.add_argument("--format", choices=["json", "csv"], default=None)
    return p


def _bin_args(p):
    p.add_argument("--bins", type=int, default=10, help="bins per axis")
    p.add_argument("--bins-p", type=int, default=None)
    p.add_argument("--bins-phase", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="gqs", description="Geometric quantum state toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rho", parents=[common], help="density matrix of a state file")
    p.add_argument("state")
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("povm", parents=[common], help="POVM outcome probabilities")
    p.add_argument("state")
    p.add_argument("--povm", required=True, help="JSON file with {'effects': [matrix, ...]}")
    p.set_defaults(func=cmd_povm)

    p = sub.add_parser("histogram", parents=[common], help="(p, nu) histogram of a qubit state as CSV")
    p.add_argument("state")
    _bin_args(p)
    p.set_defaults(func=cmd_histogram, default_format="csv")

    p = sub.add_parser("canonical", parents=[common], help="geometric canonical vs Gibbs ensemble")
    p.add_argument("--hamiltonian", required=True)
    p.add_argument("--beta", type=float, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--grid", type=int, default=256, help="probability bins per axis")
    g.add_argument("--samples", type=int, default=None, help="Metropolis samples instead of a grid")
    p.add_argument("--bins-phase", type=int, default=None)
    p.set_defaults(func=cmd_canonical)

    hy = sub.add_parser("hybrid", help="hybrid continuous-discrete states")
    hsub = hy.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name, func, helptext in [
        ("decompose", cmd_hybrid_decompose, "f, p_s, phi_s fields"),
        ("reduce", cmd_hybrid_reduce, "reduced density matrix of the discrete factor"),
    ]:
        p = hsub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("state")
        p.set_defaults(func=func)
    p = hsub.add_parser("pushforward", parents=[common], help="sample the pushforward geometric state")
    p.add_argument("state")
    p.add_argument("--samples", type=int, default=10000)
    _bin_args(p)
    p.set_defaults(func=cmd_hybrid_pushforward)
    p = hsub.add_parser("bounds", parents=[common], help="qudit capacity bounds")
    p.add_argument("--n", type=int, required=True, help="continuous degrees of freedom")
    p.add_argument("--d", type=int, required=True, help="qudit dimension")
    p.set_defaults(func=cmd_hybrid_bounds)

    th = sub.add_parser("thermo", help="system-environment reduction")
    tsub = th.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = tsub.add_parser("reduce", parents=[common], help="labeled ensemble of a bipartite pure state")
    p.add_argument("--state", required=True)
    p.add_argument("--ds", type=int, default=None, help="system dimension for flat psi vectors")
    p.add_argument("--histogram", default=None, help="also write the qubit histogram CSV here")
    _bin_args(p)
    p.set_defaults(func=cmd_thermo_reduce)
    p = tsub.add_parser("scaling", parents=[common], help="concentration of rho^S as d_E grows")
    p.add_argument("--ds", type=int, default=2)
    p.add_argument("--de", default="2,8,64,512", help="comma-separated environment dimensions")
    p.add_argument("--seeds", type=int, default=100)
    _bin_args(p)
    p.set_defaults(func=cmd_thermo_scaling)

    p = sub.add_parser("verify", parents=[common], help="run the reference-example checks")
    p.add_argument("--list", action="store_true", help="list checks without running them")
    p.add_argument("--rho", default=None, help="density matrix JSON replacing the computed one")
    p.add_argument("--q1-bins", type=int, default=512)
    p.set_defaults(func=cmd_verify, default_format="text")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--output", default=None, help="override the recorded output path")
    p.set_defaults(func=None)
    return parser


def _manifest(argv, args, text, started, elapsed) -> dict:
    return {
        "tool": "gqs",
        "version": tool_version(),
        "argv": list(argv),
        "command": " ".join(x for x in (args.command, getattr(args, "action", None)) if x),
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "default_format")},
        "seed": getattr(args, "seed", None),
        "tolerance": getattr(args, "tolerance", None),
        "started_at": started,
        "wall_clock_seconds": elapsed,
        "output_sha256": hashlib.sha256(text.encode()).hexdigest(),
    }


def _replay_argv(args) -> list[str]:
    doc = gio.read_json(args.manifest)
    if not isinstance(doc, dict) or not isinstance(doc.get("argv"), list):
        raise SchemaError(f"{args.manifest}: not a gqs manifest")
    argv = list(doc["argv"])
    if args.output:
        if "--output" in argv:
            argv[argv.index("--output") + 1] = args.output
        else:
            argv += ["--output", args.output]
    return argv


def run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        return run(_replay_argv(args))
    if args.format is None:
        args.format = getattr(args, "default_format", "json")
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    text, code = args.func(args)
    elapsed = time.perf_counter() - t0
    manifest = _manifest(argv, args, text, started, elapsed)
    if args.output:
        Path(args.output).write_text(text)
        Path(args.manifest or f"{args.output}.manifest.json").write_text(_dumps(manifest))
    else:
        sys.stdout.write(text)
        if args.manifest:
            Path(args.manifest).write_text(_dumps(manifest))
        else:
            sys.stderr.write("manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
    return code


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.showwarning = _show_warning
            return run(argv)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}".replace("\n", " "), file=sys.stderr)
        return EXIT_SCHEMA
    except (GqsError, ValueError) as exc:
        print(f"error: {exc}".replace("\n", " "), file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
