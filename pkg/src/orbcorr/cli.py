"""Command-line front end: ``orbcorr analyze | fci | ino``.

Exit codes: 0 success, 1 analysis error, 2 bad input (missing/unparsable
files, bad arguments), 3 solver non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from orbcorr import __version__
from orbcorr.errors import ConvergenceError, OrbcorrError, ParseError
from orbcorr.fci import DEFAULT_DENSE_THRESHOLD, ground_state, hubbard_hamiltonian
from orbcorr.info import ENTROPY_UNIT, CorrelationReport, build_report
from orbcorr.orbitals import ino_loop, read_fcidump, write_fcidump
from orbcorr.wfncore import read_wavefunction, truncate_top_chi, write_wavefunction

log = logging.getLogger("orbcorr")

DEFAULT_CHI = 10**6
SIG_DIGITS = 12
EXIT_ANALYSIS, EXIT_INPUT, EXIT_CONVERGENCE = 1, 2, 3


@dataclass
class RunConfig:
    subcommand: str
    inputs: list[str] = field(default_factory=list)
    chi: int = DEFAULT_CHI
    renormalize: bool = True
    gamma_tol: float = 1e-8
    max_iter: int = 10
    out: str = "."
    workers: int = 1
    formats: tuple[str, ...] = ("json", "csv")
    hubbard: int | None = None
    t: float = 1.0
    u: float = 0.0
    periodic: bool = False
    nelec: int | None = None
    ms2: int | None = None
    dense_threshold: int = DEFAULT_DENSE_THRESHOLD

    def __post_init__(self):
        if self.chi < 1:
            raise ValueError("chi must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def echo(self) -> dict:
        """Settings that influence results; output location and worker count are left out so
        reports stay byte-identical across machines and pool sizes."""
        keys = ["subcommand", "inputs", "chi", "renormalize"]
        if self.subcommand in ("fci", "ino"):
            keys += ["hubbard", "t", "u", "periodic", "nelec", "ms2", "dense_threshold"]
        if self.subcommand == "ino":
            keys += ["gamma_tol", "max_iter"]
        return {k: getattr(self, k) for k in keys}


def fmt(x: float) -> str:
    return format(x, f".{SIG_DIGITS}g")


def _num(x):
    """JSON-ready float rounded to 12 significant digits; NaN/inf become null."""
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(fmt(x))


def _matrix(m: np.ndarray):
    return [[_num(v) for v in row] for row in m]


def _vector(v):
    return [_num(x) for x in v]


def report_to_dict(report: CorrelationReport, config: RunConfig) -> dict:
    mi = report.mi
    return {
        "tool": "orbcorr",
        "version": __version__,
        "config": config.echo(),
        "chi": report.chi,
        "unit": report.unit,
        "n_qubits": mi.n,
        "l1_percent": _num(report.l1_percent),
        "l1_defined": report.l1_percent is not None,
        "gamma": _num(report.gamma),
        "mi_quantum": _matrix(mi.quantum),
        "mi_classical": _matrix(mi.classical),
        "entropies_vn": _vector(report.entropies_vn),
        "entropies_sh": _vector(report.entropies_sh),
        "sorted_mi_quantum": _vector(report.sorted_mi_quantum),
        "sorted_mi_classical": _vector(report.sorted_mi_classical),
        "mi_difference": _vector(report.mi_difference),
        "sorted_entropy": _vector(report.sorted_entropy),
        "sorted_entropy_classical": _vector(report.sorted_entropy_classical),
        "entropy_difference": _vector(report.entropy_difference),
        "top_entropy_qubits": list(report.top_entropy_qubits),
        "warnings": list(report.warnings),
    }


def _csv_text(rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _provenance(report_chi: int | None = None):
    lines = [f"orbcorr {__version__}", f"unit={ENTROPY_UNIT}"]
    if report_chi is not None:
        lines.append(f"chi={report_chi}")
    return lines


def heatmap_rows(report: CorrelationReport):
    """Top-entropy qubits in ascending index order; upper triangle quantum MI,
    lower triangle classical MI, empty diagonal."""
    qubits = sorted(report.top_entropy_qubits)
    rows = [["qubit"] + [str(q) for q in qubits]]
    for a in qubits:
        row = [str(a)]
        for b in qubits:
            if a == b:
                row.append("")
            elif a < b:
                row.append(fmt(report.mi.quantum[a, b]))
            else:
                row.append(fmt(report.mi.classical[a, b]))
        rows.append(row)
    return rows


def curve_rows(report: CorrelationReport):
    rows = [["kind", "rank", "von_neumann", "shannon", "shannon_minus_von_neumann"]]
    for k, (q, c, d) in enumerate(zip(report.sorted_mi_quantum, report.sorted_mi_classical, report.mi_difference)):
        rows.append(["pair_mi", str(k), fmt(q), fmt(c), fmt(d)])
    for k, (q, c, d) in enumerate(zip(report.sorted_entropy, report.sorted_entropy_classical,
                                      report.entropy_difference)):
        rows.append(["qubit_entropy", str(k), fmt(q), fmt(c), fmt(d)])
    return rows


def write_report(report: CorrelationReport, config: RunConfig, outdir: Path, stem: str = "report") -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in config.formats:
        path = outdir / f"{stem}.json"
        path.write_text(json.dumps(report_to_dict(report, config), indent=1) + "\n", encoding="utf-8")
        written.append(path)
    if "csv" in config.formats:
        meta = _provenance(report.chi)
        for name, rows in (("heatmap", heatmap_rows(report)), ("sorted_curves", curve_rows(report))):
            path = outdir / f"{stem}_{name}.csv"
            path.write_text(_csv_text(rows, meta), encoding="utf-8")
            written.append(path)
    return written


def cmd_analyze(config: RunConfig) -> int:
    path = config.inputs[0]
    if not Path(path).is_file():
        print(f"error: wavefunction file not found: {path}", file=sys.stderr)
        return EXIT_INPUT
    try:
        wfn = read_wavefunction(path)
    except (OrbcorrError, ValueError) as exc:
        print(f"error: cannot parse {path}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    wfn = truncate_top_chi(wfn, config.chi, config.renormalize)
    report = build_report(wfn, workers=config.workers)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    written = write_report(report, config, Path(config.out))
    l1 = "undefined" if report.l1_percent is None else fmt(report.l1_percent)
    print(f"L1 = {l1} %")
    for p in written:
        print(f"wrote {p}")
    return 0


def _load_hamiltonian(config: RunConfig):
    """Hamiltonian plus (n_alpha, n_beta) from an FCIDUMP or the Hubbard builder."""
    if config.hubbard is not None:
        h = hubbard_hamiltonian(config.hubbard, config.t, config.u, config.periodic)
        nelec = config.nelec if config.nelec is not None else config.hubbard
        ms2 = config.ms2 or 0
        label = f"hubbard(sites={config.hubbard}, t={config.t}, u={config.u}, periodic={config.periodic})"
    else:
        if not config.inputs:
            raise ParseError("either an FCIDUMP path or --hubbard is required")
        path = config.inputs[0]
        if not Path(path).is_file():
            raise FileNotFoundError(path)
        h = read_fcidump(path)
        nelec = config.nelec if config.nelec is not None else h.n_elec
        ms2 = config.ms2 if config.ms2 is not None else (h.ms2 or 0)
        if nelec is None:
            raise ParseError("electron count unknown: FCIDUMP has no NELEC and --nelec not given")
        label = path
    if (nelec + ms2) % 2 or abs(ms2) > nelec:
        raise ParseError(f"inconsistent electron count {nelec} and MS2 {ms2}")
    n_alpha, n_beta = (nelec + ms2) // 2, (nelec - ms2) // 2
    return h, n_alpha, n_beta, label


def cmd_fci(config: RunConfig) -> int:
    h, na, nb, label = _load_hamiltonian(config)
    gs = ground_state(h, na, nb, dense_threshold=config.dense_threshold)
    for w in gs.warnings:
        print(f"warning: {w}", file=sys.stderr)
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    wfn = truncate_top_chi(gs.wfn, config.chi, config.renormalize)
    wfn_path = outdir / "ground_state.wfn"
    write_wavefunction(wfn, wfn_path)
    if "json" in config.formats:
        meta = {
            "tool": "orbcorr",
            "version": __version__,
            "config": config.echo(),
            "system": label,
            "energy_hartree": _num(gs.energy),
            "gap_hartree": _num(gs.gap),
            "degenerate": gs.degenerate,
            "method": gs.method,
            "n_determinants": len(gs.wfn),
            "chi": len(wfn),
            "warnings": gs.warnings,
        }
        (outdir / "fci.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")
    print(f"energy = {gs.energy:.9f} hartree")
    print(f"wrote {wfn_path}")
    return 0


def cmd_ino(config: RunConfig) -> int:
    h, na, nb, label = _load_hamiltonian(config)
    if h.n_elec is None:
        h = replace(h, n_elec=na + nb, ms2=na - nb)
    result = ino_loop(h, na, nb, gamma_tol=config.gamma_tol, max_iter=config.max_iter,
                      dense_threshold=config.dense_threshold, workers=config.workers,
                      chi=config.chi, renormalize=config.renormalize)
    tr = result.trace
    for w in tr.warnings:
        print(f"warning: {w}", file=sys.stderr)
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = [["iter", "energy", "gamma", "l1_percent"]]
    for s in tr.steps:
        rows.append([str(s.iteration), fmt(s.energy), fmt(s.gamma), "" if s.l1_percent is None else fmt(s.l1_percent)])
    text = _csv_text(rows, _provenance() + [f"system={label}"])
    text += f"# converged={'true' if tr.converged else 'false'} oscillating={'true' if tr.oscillating else 'false'}\n"
    trace_path = outdir / "ino_trace.csv"
    trace_path.write_text(text, encoding="utf-8")
    write_fcidump(result.hamiltonian, outdir / "final.fcidump")
    final_wfn = truncate_top_chi(result.wfn, config.chi, config.renormalize)
    write_wavefunction(final_wfn, outdir / "final.wfn")
    if "json" in config.formats:
        meta = {
            "tool": "orbcorr",
            "version": __version__,
            "config": config.echo(),
            "system": label,
            "unit": ENTROPY_UNIT,
            "chi": len(final_wfn),
            "converged": tr.converged,
            "oscillating": tr.oscillating,
            "steps": [
                {"iter": s.iteration, "energy": _num(s.energy), "gamma": _num(s.gamma), "l1_percent": _num(s.l1_percent)}
                for s in tr.steps
            ],
            "rotation": _matrix(result.rotation.u),
            "warnings": tr.warnings,
        }
        (outdir / "ino.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")
    last = tr.steps[-1]
    print(f"iterations = {len(tr)}  converged = {str(tr.converged).lower()}")
    print(f"final energy = {last.energy:.9f} hartree  gamma = {fmt(last.gamma)}")
    print(f"wrote {trace_path}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--chi", type=int, default=DEFAULT_CHI, help="number of largest determinants kept")
    p.add_argument("--no-renormalize", dest="renormalize", action="store_false",
                   help="do not renormalize after truncation")
    p.add_argument("--gamma-tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", dest="formats", default="json,csv", help="comma-separated: json,csv")


def _add_system(p: argparse.ArgumentParser) -> None:
    p.add_argument("fcidump", nargs="?", help="FCIDUMP file (omit with --hubbard)")
    p.add_argument("--hubbard", type=int, metavar="SITES", help="built-in Hubbard chain with SITES sites")
    p.add_argument("--t", type=float, default=1.0, help="Hubbard hopping")
    p.add_argument("--u", type=float, default=0.0, help="Hubbard on-site repulsion")
    p.add_argument("--periodic", action="store_true")
    p.add_argument("--nelec", type=int)
    p.add_argument("--ms2", type=int)
    p.add_argument("--dense-threshold", type=int, default=DEFAULT_DENSE_THRESHOLD,
                   help="largest FCI space solved densely (Davidson above)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbcorr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"orbcorr {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    a = sub.add_parser("analyze", help="quantum vs classical MI report for a wavefunction file")
    a.add_argument("wavefunction")
    _add_common(a)
    for name, helptext in (("fci", "ground state of an FCIDUMP or Hubbard model"),
                           ("ino", "iterative natural orbitals with per-iteration gamma and L1")):
        p = sub.add_parser(name, help=helptext)
        _add_system(p)
        _add_common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
    bad = set(formats) - {"json", "csv"}
    if bad:
        raise ValueError(f"unknown report format(s): {', '.join(sorted(bad))}")
    cfg = RunConfig(subcommand=args.subcommand, chi=args.chi, renormalize=args.renormalize,
                    gamma_tol=args.gamma_tol, max_iter=args.max_iter, out=args.out,
                    workers=args.workers, formats=formats)
    if args.subcommand == "analyze":
        cfg.inputs = [args.wavefunction]
    else:
        cfg.inputs = [args.fcidump] if args.fcidump else []
        cfg.hubbard, cfg.t, cfg.u, cfg.periodic = args.hubbard, args.t, args.u, args.periodic
        cfg.nelec, cfg.ms2, cfg.dense_threshold = args.nelec, args.ms2, args.dense_threshold
    return cfg


COMMANDS = {"analyze": cmd_analyze, "fci": cmd_fci, "ino": cmd_ino}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        return COMMANDS[config.subcommand](config)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"error: {exc} (residual {exc.residual})", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OrbcorrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
