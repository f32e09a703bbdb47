"""Command-line front end: ``bergman-extremal run`` and ``bergman-extremal selftest``.

Config file (JSON)::

    {
      "scenario": "circle",            # circle | interval | annulus_pair
      "degrees": [8, 16, 32],          # nonempty, strictly increasing, each >= 1
      "grid": {"radial": 8, "angular": 16},
      "nodes": null,                   # fixed node count, or null for per-degree defaults
      "phi": {"tol": 1e-6, "max_iter": 5000},
      "out_dir": "out",
      "threads": 0                     # 0 = number of cores, capped at 16
    }

Exit codes: 0 all enabled checks pass, 2 some check failed, 1 bad config or
runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .errors import BergmanError, ConfigurationError
from .extremal import C0, ConvergenceReport, auto_threads, bm_exponent, convergence_report
from .geometry import ProjectivePoint, make_eval_grid
from .scenarios import SCENARIOS, get_scenario

log = logging.getLogger("bergman_extremal")

EXIT_OK, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2

GRID_RADIAL_BOUNDS = (2, 256)
GRID_ANGULAR_BOUNDS = (4, 1024)
CONFIG_KEYS = {"scenario", "degrees", "grid", "nodes", "phi", "out_dir", "threads"}

TRACE_RTOL = 1e-8
CIRCLE_BM_RTOL = 1e-6
PHI_GAP_SLACK = 1e-5
RATE_ENVELOPE = (0.1, 3.0)
RATE_R2_MIN = 0.95
CIRCLE_CFIT = (0.3, 0.8)


@dataclass
class RunConfig:
    scenario: str
    degrees: list
    grid_radial: int = 8
    grid_angular: int = 16
    nodes: Optional[int] = None
    phi_tol: float = 1e-6
    phi_max_iter: int = 5000
    out_dir: str = "out"
    threads: int = 0

    def validate(self) -> "RunConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"scenario: unknown {self.scenario!r}, expected one of {sorted(SCENARIOS)}")
        if not isinstance(self.degrees, list) or not self.degrees:
            raise ConfigurationError("degrees: must be a nonempty list")
        if any(not _is_int(n) or n < 1 for n in self.degrees):
            raise ConfigurationError(f"degrees: every entry must be an integer >= 1, got {self.degrees}")
        if any(b <= a for a, b in zip(self.degrees, self.degrees[1:])):
            raise ConfigurationError(f"degrees: must be strictly increasing, got {self.degrees}")
        _check_range("grid.radial", self.grid_radial, *GRID_RADIAL_BOUNDS)
        _check_range("grid.angular", self.grid_angular, *GRID_ANGULAR_BOUNDS)
        if self.nodes is not None and (not _is_int(self.nodes) or self.nodes < 4):
            raise ConfigurationError(f"nodes: must be null or an integer >= 4, got {self.nodes!r}")
        if not isinstance(self.phi_tol, (int, float)) or not 0 < self.phi_tol < 1:
            raise ConfigurationError(f"phi.tol: must lie in (0, 1), got {self.phi_tol!r}")
        if not _is_int(self.phi_max_iter) or self.phi_max_iter < 1:
            raise ConfigurationError(f"phi.max_iter: must be an integer >= 1, got {self.phi_max_iter!r}")
        if not _is_int(self.threads) or self.threads < 0:
            raise ConfigurationError(f"threads: must be an integer >= 0, got {self.threads!r}")
        if not isinstance(self.out_dir, str) or not self.out_dir:
            raise ConfigurationError("out_dir: must be a nonempty string")
        return self


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_range(name, v, lo, hi):
    if not _is_int(v) or not lo <= v <= hi:
        raise ConfigurationError(f"{name}: must be an integer in [{lo}, {hi}], got {v!r}")


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config: top level must be a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"config: unknown keys {sorted(unknown)}")
    for key in ("scenario", "degrees"):
        if key not in data:
            raise ConfigurationError(f"{key}: required")
    grid = data.get("grid") or {}
    phi = data.get("phi") or {}
    if not isinstance(grid, dict) or set(grid) - {"radial", "angular"}:
        raise ConfigurationError("grid: must be an object with keys radial, angular")
    if not isinstance(phi, dict) or set(phi) - {"tol", "max_iter"}:
        raise ConfigurationError("phi: must be an object with keys tol, max_iter")
    defaults = RunConfig(scenario="", degrees=[])
    return RunConfig(
        scenario=data["scenario"],
        degrees=data["degrees"],
        grid_radial=grid.get("radial", defaults.grid_radial),
        grid_angular=grid.get("angular", defaults.grid_angular),
        nodes=data.get("nodes"),
        phi_tol=phi.get("tol", defaults.phi_tol),
        phi_max_iter=phi.get("max_iter", defaults.phi_max_iter),
        out_dir=data.get("out_dir", defaults.out_dir),
        threads=data.get("threads", defaults.threads),
    ).validate()


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"config: cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config: malformed JSON in {path}: {exc}") from None
    return parse_config(data)


# -- property checks ---------------------------------------------------------


def evaluate_checks(report: ConvergenceReport) -> dict[str, bool]:
    """Pass/fail of every property that applies to the report's scenario."""
    scen = get_scenario(report.scenario)
    rows = report.rows
    checks = {
        "trace_identity": all(abs(r.trace - r.d_n) <= TRACE_RTOL * r.d_n for r in rows),
        "sandwich_lower": all(r.sandwich_lower_ok for r in rows),
        "sandwich_upper": all(r.sandwich_upper_ok for r in rows),
        "phi_gap_bound": all(
            r.phi_gap_n is None or r.phi_gap_n <= math.log(r.M_n * r.d_n) / (2 * r.n) + PHI_GAP_SLACK for r in rows
        ),
    }
    if scen.check_growth:
        checks["bm_growth"] = all(r.M_n <= r.n**C0 for r in rows if r.n >= 2)
    if scen.name == "circle":
        checks["bm_circle_closed_form"] = all(abs(r.M_n - (r.n + 1)) <= CIRCLE_BM_RTOL * (r.n + 1) for r in rows)
    if scen.name == "interval":
        checks["bm_interval_linear"] = all(r.M_n <= 4 * r.n for r in rows)
    if scen.has_oracle:
        lo, hi = RATE_ENVELOPE
        checks["rate_envelope"] = all(lo <= r.E_scaled <= hi for r in rows if r.E_scaled is not None)
        if sum(1 for r in rows if r.n >= 2) >= 2:
            checks["rate_fit_r2"] = report.r2 is not None and report.r2 >= RATE_R2_MIN
        if scen.name == "circle" and report.c_fit is not None and math.isfinite(report.c_fit):
            checks["circle_c_fit"] = CIRCLE_CFIT[0] <= report.c_fit <= CIRCLE_CFIT[1]
    return checks


# -- output ------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, comments: list[str], header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


COLUMN_NOTES = {
    "n": "degree of the line bundle power",
    "d_n": "dimension of degree-n sections, n + 1",
    "nodes": "number of quadrature nodes discretizing (K, mu)",
    "M_n": "best Bernstein-Markov constant: max over nodes of B_n(y) exp(-2 n q(y))",
    "E_n": "max over grid of |(1/2n) log B_n - V|, V the closed-form extremal function",
    "E_n_scaled": "E_n * n / log n, the constant in the O(log n / n) rate",
    "phi_gap_n": "max over certified Phi points of |(1/2n) log B_n - (1/n) log Phi_n|",
    "sandwich_min": "min over certified points of B_n / Phi_n^2 (lower bound 1/(mu(K) d_n))",
    "sandwich_max": "max over certified points of B_n / Phi_n^2 (upper bound M_n d_n)",
    "phi_points": "grid points where Phi_n was solved",
    "phi_unconverged": "Phi solves whose certified bracket stayed wider than tol (excluded above)",
}


def write_outputs(report: ConvergenceReport, cfg: RunConfig, out: Path) -> list[str]:
    has_E = get_scenario(report.scenario).has_oracle
    cols = ["n", "d_n", "nodes", "M_n"]
    if has_E:
        cols += ["E_n", "E_n_scaled"]
    cols += ["phi_gap_n", "sandwich_min", "sandwich_max", "phi_points", "phi_unconverged"]
    rows = []
    for r in report.rows:
        vals = {
            "n": r.n, "d_n": r.d_n, "nodes": r.nodes, "M_n": r.M_n, "E_n": r.E_n, "E_n_scaled": r.E_scaled,
            "phi_gap_n": r.phi_gap_n, "sandwich_min": r.sandwich_min, "sandwich_max": r.sandwich_max,
            "phi_points": r.phi_points, "phi_unconverged": r.phi_unconverged,
        }
        rows.append([vals[c] for c in cols])
    comments = [
        "bergman-extremal convergence table",
        f"scenario: {report.scenario}",
        f"grid: {report.grid.description}",
        f"phi: tol={cfg.phi_tol!r} max_iter={cfg.phi_max_iter}",
    ] + [f"{c}: {COLUMN_NOTES[c]}" for c in cols]
    table = out / "convergence.csv"
    _write_csv(table, comments, cols, rows)
    written = [table.name]

    dump = report.dump
    if dump is not None:
        gcols = ["index", "chart", "re", "im", "half_log_B_over_n"]
        if dump.V is not None:
            gcols.append("V")
        gcols += ["log_phi_over_n", "phi_converged"]
        grows = []
        for i, p in enumerate(dump.points):
            row = [i, p.chart.value, float(p.coord.real), float(p.coord.imag), float(dump.half_log_B[i])]
            if dump.V is not None:
                row.append(float(dump.V[i]))
            row += [dump.log_phi_over_n.get(i), dump.phi_converged.get(i)]
            grows.append(row)
        gcomments = [
            f"bergman-extremal grid dump, scenario {report.scenario}, n = {dump.n}",
            f"grid: {report.grid.description}",
            "half_log_B_over_n: (1/2n) log B_n at the point",
            "V: closed-form extremal function",
            "log_phi_over_n: (1/n) log Phi_n, blank where not solved or not certified",
        ]
        gpath = out / f"grid_n{dump.n}.csv"
        _write_csv(gpath, gcomments, gcols, grows)
        written.append(gpath.name)
    return written


def run(cfg: RunConfig) -> int:
    """Run one configured sweep, write its artifacts and return the exit status."""
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigurationError(f"out_dir: cannot write to {out}: {exc}") from None

    grid = make_eval_grid(cfg.grid_radial, cfg.grid_angular)
    t0 = time.perf_counter()
    report = convergence_report(
        cfg.scenario,
        cfg.degrees,
        grid,
        nodes=cfg.nodes,
        phi_tol=cfg.phi_tol,
        phi_max_iter=cfg.phi_max_iter,
        threads=cfg.threads,
    )
    elapsed = time.perf_counter() - t0
    checks = evaluate_checks(report)
    written = write_outputs(report, cfg, out)
    summary = {
        "version": __version__,
        "config": asdict(cfg),
        "threads_used": auto_threads(cfg.threads),
        "grid": {"radial": grid.radial, "angular": grid.angular, "points": len(grid)},
        "c_fit": report.c_fit,
        "r2": report.r2,
        "bm_exponent": dict(zip(("slope", "max"), bm_exponent(report.degrees, [r.M_n for r in report.rows]))),
        "checks": checks,
        "all_passed": all(checks.values()),
        "phi_unconverged_total": sum(r.phi_unconverged for r in report.rows),
        "phi_above_V": {str(r.n): r.phi_above_V for r in report.rows},
        "wall_time": {str(r.n): r.wall_time for r in report.rows},
        "wall_time_total": elapsed,
        "outputs": written,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    _print_summary(report, checks, sys.stdout)
    return EXIT_OK if summary["all_passed"] else EXIT_CHECK_FAILED


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(type(o).__name__)


def _print_summary(report: ConvergenceReport, checks: dict, stream) -> None:
    stream.write(f"scenario {report.scenario}, {report.grid.description}\n")
    stream.write(f"{'n':>4} {'M_n':>10} {'E_n':>10} {'E*n/logn':>9} {'phi_gap':>10} {'unconv':>6}\n")
    for r in report.rows:
        E = f"{r.E_n:10.3e}" if r.E_n is not None else f"{'-':>10}"
        Es = f"{r.E_scaled:9.4f}" if r.E_scaled is not None else f"{'-':>9}"
        g = f"{r.phi_gap_n:10.3e}" if r.phi_gap_n is not None else f"{'-':>10}"
        stream.write(f"{r.n:>4} {r.M_n:10.4f} {E} {Es} {g} {r.phi_unconverged:>6}\n")
    if report.c_fit is not None:
        stream.write(f"fit E_n ~ c log n / n: c = {report.c_fit:.4f}, R^2 = {report.r2:.4f}\n")
    slope, cmax = bm_exponent(report.degrees, [r.M_n for r in report.rows])
    if math.isfinite(cmax):
        stream.write(f"observed M_n growth: log-log slope {slope:.4f}, max log M_n / log n {cmax:.4f}\n")
    for name, ok in checks.items():
        stream.write(f"  {'PASS' if ok else 'FAIL'}  {name}\n")


# -- selftest ----------------------------------------------------------------

GOLDEN: dict[str, Callable[[int], float]] = {
    "gram_diagonal": lambda n: 2.0**-n,
    "bergman_origin": lambda n: 2.0**n,
    "bergman_on_K": lambda n: n + 1.0,
    "bm_constant": lambda n: n + 1.0,
    "phi_origin": lambda n: 2.0 ** (n / 2),
    "sandwich_n0": lambda n: 1.0,
}
SELFTEST_DEGREES = (2, 4, 8, 16, 32)
SELFTEST_RTOL = 1e-9
SELFTEST_PHI_RTOL = 1e-5


def selftest(golden: Optional[dict] = None, stream=None) -> int:
    """Closed-form battery on the unit circle; exit 0 iff every row matches."""
    from .extremal import phi_log, sandwich_check
    from .kernel import bergman_log, bm_constant, gram_inner, orthonormalize
    from .measure import circle_set

    golden = {**GOLDEN, **(golden or {})}
    stream = stream or sys.stdout
    results = []

    def record(name, n, got, rtol):
        want = golden[name](n)
        ok = math.isfinite(got) and abs(got - want) <= rtol * abs(want)
        results.append((name, n, want, got, ok))

    origin, on_K = ProjectivePoint.affine(0.0), ProjectivePoint.affine(1.0)
    for n in SELFTEST_DEGREES:
        wset = circle_set(1.0, 4 * n + 8)
        eye = np.eye(n + 1)
        diag = [gram_inner(eye[j], eye[j], wset, n).real for j in range(n + 1)]
        off = max((abs(gram_inner(eye[j], eye[k], wset, n)) for j in range(n + 1) for k in range(j)), default=0.0)
        record("gram_diagonal", n, max(diag, key=lambda v: abs(v - golden["gram_diagonal"](n))) + off, SELFTEST_RTOL)
        K = orthonormalize(wset, n)
        record("bergman_origin", n, math.exp(bergman_log(K, origin)), SELFTEST_RTOL)
        record("bergman_on_K", n, math.exp(bergman_log(K, on_K)), SELFTEST_RTOL)
        record("bm_constant", n, bm_constant(K, wset).M_n, SELFTEST_RTOL)
        ph = phi_log(wset, n, origin, kernel=K)
        record("phi_origin", n, math.exp(ph.log_phi) if ph.converged else math.nan, SELFTEST_PHI_RTOL)

    wset = circle_set(1.0, 8)
    K = orthonormalize(wset, 0)
    ph = phi_log(wset, 0, origin, kernel=K)
    rec = sandwich_check(K, wset, origin, ph)
    # at n = 0 both bounds collapse to 1/mu(K) = 1, so the ratio is pinned
    want = golden["sandwich_n0"](0)
    pinned = all(abs(v - want) <= SELFTEST_RTOL for v in (rec.ratio, rec.lower_bound, rec.upper_bound))
    results.append(("sandwich_n0", 0, want, rec.ratio, rec.lower_ok and rec.upper_ok and pinned))

    stream.write(f"{'check':<16} {'n':>3} {'expected':>24} {'computed':>24}  status\n")
    for name, n, want, got, ok in results:
        stream.write(f"{name:<16} {n:>3} {want:>24.16g} {got:>24.16g}  {'PASS' if ok else 'FAIL'}\n")
    passed = sum(ok for *_, ok in results)
    stream.write(f"{passed}/{len(results)} passed\n")
    return EXIT_OK if passed == len(results) else EXIT_CHECK_FAILED


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bergman-extremal", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a degree sweep from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    p_run.add_argument("--out", help="output directory (overrides out_dir)")
    p_run.add_argument("--threads", type=int, help="worker threads, 0 = auto (overrides threads)")
    sub.add_parser("selftest", help="closed-form conformance battery")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "selftest":
            return selftest()
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.threads is not None:
            cfg.threads = args.threads
        cfg.validate()
        return run(cfg)
    except BergmanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
