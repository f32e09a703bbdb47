"""Extremal quantities: Phi_n by dual reweighting, closed-form V, sandwich checks, rate fits.

For the atomic constraint set {y_k}, the sup

    Phi_n(p) = sup { ||s(p)|| : ||s(y_k)|| exp(-n q_k) <= 1 for all k }

equals sqrt(min_w B_n^{(w)}(p)) over probability weights w on the nodes,
where B_n^{(w)} is the Bergman function of the reweighted measure. Every
iterate w gives an upper bound (the dual value) and its reproducing
section, rescaled to be feasible, gives a lower bound, so each result
carries a certified bracket.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.optimize import linprog, nnls

from .errors import ConfigurationError, UnconvergedError, UnsupportedOracleError
from .geometry import Chart, EvalGrid, ProjectivePoint, point_arrays, section_local_values
from .kernel import (
    BergmanKernel,
    BernsteinMarkovEstimate,
    basis_values,
    bergman_log_many,
    bm_constant,
    orthonormalize,
    section_space_dimension,
    trace_mass,
)
from .measure import WeightedCompactSet
from .scenarios import Scenario, get_scenario

C0 = 2.0
SANDWICH_RTOL = 1e-6
MAX_EXPONENT = 8.0


# -- closed-form extremal functions -----------------------------------------


def circle_V(p: ProjectivePoint) -> float:
    """V for K = unit circle, q = 0: log+|z| + 1/2 log 2 - 1/2 log(1 + |z|^2)."""
    # symmetric under z -> 1/z, so the same formula serves both charts
    r = abs(p.coord)
    lp = math.log(r) if r > 1.0 else 0.0
    return lp + 0.5 * math.log(2.0) - 0.5 * math.log1p(r * r)


def _log_joukowski_inverse(z: complex) -> float:
    """log |z + sqrt(z^2 - 1)| on the branch with modulus >= 1; zero on [-1, 1]."""
    if z.imag == 0.0 and abs(z.real) <= 1.0:
        return 0.0
    s = np.sqrt(complex(z) ** 2 - 1.0)
    return max(math.log(abs(z + s)), math.log(abs(z - s)), 0.0)


def interval_V(p: ProjectivePoint) -> float:
    """V for K = [-1, 1], q = -phi: log|z + sqrt(z^2 - 1)| - 1/2 log(1 + |z|^2)."""
    x = p.coord
    if p.chart is Chart.ZERO:
        return _log_joukowski_inverse(x) - 0.5 * math.log1p(abs(x) ** 2)
    # with w = 1/z: |z + sqrt(z^2-1)| / sqrt(1+|z|^2) = |1 + sqrt(1-w^2)| / sqrt(1+|w|^2)
    s = np.sqrt(1.0 - complex(x) ** 2)
    big = max(abs(1.0 + s), abs(1.0 - s))
    return math.log(big) - 0.5 * math.log1p(abs(x) ** 2)


ORACLES: dict[str, Callable[[ProjectivePoint], float]] = {
    "circle": circle_V,
    "interval": interval_V,
}


def oracle_V(scenario: str, p: ProjectivePoint) -> float:
    try:
        fn = ORACLES[scenario]
    except KeyError:
        raise UnsupportedOracleError(f"no closed-form extremal function for scenario {scenario!r}") from None
    return fn(p)


# -- Phi_n by dual reweighting ----------------------------------------------


@dataclass(frozen=True)
class PhiSolveResult:
    n: int
    point: ProjectivePoint
    log_phi: float
    iterations: int
    converged: bool
    final_gap: float
    log_phi_lower: float
    log_phi_upper: float


def _dual_step(E: np.ndarray, w: np.ndarray, a: np.ndarray):
    """Return (f, r): f = a M^-1 a^H and r = E M^-1 a^H for M = E^H diag(w) E."""
    R = qr(np.sqrt(w)[:, None] * E, mode="r", check_finite=False)[0]
    R = R[: E.shape[1]]
    try:
        y = solve_triangular(R, a.conj(), trans="C", check_finite=False)
    except np.linalg.LinAlgError:
        return math.inf, np.full(E.shape[0], math.nan)
    f = float(np.vdot(y, y).real)
    r = E @ solve_triangular(R, y, check_finite=False)
    return f, r


class _Bracket:
    """Best certified bounds on log Phi (in the rescaled units of the solve)."""

    def __init__(self):
        self.upper, self.lower = math.inf, -math.inf

    def add_dual(self, f: float, r: np.ndarray) -> bool:
        if not (math.isfinite(f) and f > 0 and np.all(np.isfinite(r))):
            return False
        self.upper = min(self.upper, 0.5 * math.log(f))
        self.lower = max(self.lower, math.log(f) - math.log(float(np.max(np.abs(r)))))
        return True

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def _multiplicative(E, a, w, bracket: _Bracket, tol: float, max_steps: int) -> int:
    f, r = _dual_step(E, w, a)
    rho, it = 0.5, 0
    while bracket.add_dual(f, r) and bracket.gap > tol and it < max_steps:
        gain = np.abs(r) ** 2 / f
        while True:
            it += 1
            wn = w * gain**rho
            wn /= wn.sum()
            fn, rn = _dual_step(E, wn, a)
            if rho == 0.5 or (math.isfinite(fn) and fn <= f):
                break
            rho = 0.5
        w, f, r = wn, fn, rn
        rho = min(2.0 * rho, MAX_EXPONENT)
    return it


def _barrier(E, a, bracket: _Bracket, tol: float, max_newton: int) -> int:
    """Log-barrier path following for max Re(a.c) s.t. |E_k c| <= 1.

    At barrier parameter t the multipliers z_k = 2 v_k / (t (1 - |v_k|^2))
    satisfy sum_k conj(z_k) E_k = a on the central path; w_k ~ |z_k| is then
    the next dual measure, and is certified through the reweighted Bergman
    function exactly as in the multiplicative phase.
    """
    d = E.shape[1]
    Bre = np.hstack([E.real, -E.imag])
    Bim = np.hstack([E.imag, E.real])
    o = np.concatenate([a.real, -a.imag])

    def slack(x):
        m = np.hypot(Bre @ x, Bim @ x)
        return (1.0 - m) * (1.0 + m)

    def merit(x, t):
        g = slack(x)
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            return math.inf
        return float(-t * (o @ x) - np.sum(np.log(g)))

    x = np.zeros(2 * d)
    t = math.exp(-bracket.upper) if math.isfinite(bracket.upper) else 1.0
    newton = 0
    while newton < max_newton:
        before = newton
        for _ in range(100):
            u, s = Bre @ x, Bim @ x
            g = slack(x)
            grad = -t * o + Bre.T @ (2 * u / g) + Bim.T @ (2 * s / g)
            # Newton system through a QR of the Hessian's square-root factor;
            # forming the Hessian itself squares a condition number that
            # reaches 1e10 once slacks on the active nodes fall near 1/t
            J = u[:, None] * Bre + s[:, None] * Bim
            sg = np.sqrt(2 / g)[:, None]
            Rc = np.linalg.qr(np.vstack([sg * Bre, sg * Bim, (2 / g)[:, None] * J]), mode="r")
            try:
                dx = -solve_triangular(Rc, solve_triangular(Rc, grad, trans="T", check_finite=False), check_finite=False)
            except np.linalg.LinAlgError:
                break
            lam2 = float(-grad @ dx)
            newton += 1
            if not math.isfinite(lam2) or lam2 < 2e-10 or newton >= max_newton:
                break
            step, f0 = 1.0, merit(x, t)
            while not merit(x + step * dx, t) <= f0 - 0.25 * step * lam2 and step > 1e-12:
                step *= 0.5
            if step <= 1e-12:
                break
            x = x + step * dx
        u, s = Bre @ x, Bim @ x
        g = slack(x)
        z = 2.0 * np.hypot(u, s) / (t * g)
        if z.sum() > 0:
            f, r = _dual_step(E, np.maximum(z / z.sum(), 1e-300), a)
            bracket.add_dual(f, r)
        _kkt_duals(E, a, x, Bre, Bim, o, bracket)
        val, vmax = float(o @ x), float(np.sqrt(np.max(1.0 - g)))
        if val > 0 and vmax > 0:
            bracket.lower = max(bracket.lower, math.log(val / vmax))
        if bracket.gap <= tol or newton == before:
            break
        t *= 10.0
    return newton


def _kkt_duals(E, a, x, Bre, Bim, o, bracket: _Bracket) -> None:
    """Dual measures recovered from a primal iterate by nonnegative least squares.

    Near the optimum the barrier multipliers lose precision on degenerate
    problems (many nearly active nodes). Stationarity o = sum_k mu_k grad|E_k c|^2
    over the nearly active set gives the multipliers directly; each candidate
    is certified through the usual dual step, so a poor guess costs nothing.
    """
    u, s = Bre @ x, Bim @ x
    m = np.hypot(u, s)
    top = float(m.max())
    if not top > 0:
        return
    for delta in (1e-2, 1e-4, 1e-6, 1e-8):
        act = np.flatnonzero(m >= top * (1.0 - delta))
        if act.size < 1:
            continue
        J = u[act, None] * Bre[act] + s[act, None] * Bim[act]
        mu, _ = nnls(J.T, o, maxiter=50 * act.size)
        if np.count_nonzero(mu) == 0:
            continue
        # a small uniform floor keeps M(w) invertible at the cost of a
        # factor (1 - 1e-10) in the bound
        w = np.full(E.shape[0], 1e-10 / E.shape[0])
        w[act] += (1.0 - 1e-10) * mu / mu.sum()
        f, r = _dual_step(E, w, a)
        bracket.add_dual(f, r)


PHI_METHODS = ("auto", "multiplicative", "barrier")
MULTIPLICATIVE_PHASE = 64


def phi_log(
    wset: WeightedCompactSet,
    n: int,
    p: ProjectivePoint,
    tol: float = 1e-6,
    max_iter: int = 5000,
    kernel: Optional[BergmanKernel] = None,
    method: str = "auto",
) -> PhiSolveResult:
    """log Phi_n(p) for the node-discretized constraint, with a certified bracket.

    The dual measure starts at mu and is updated multiplicatively,
    w_k <- w_k (|r_k|^2 / f)^rho, where r_k is the weighted value at y_k of
    the reproducing section at p for the current measure and f its value at
    p. rho = 1/2 is Lawson's monotone update; larger exponents are tried
    first and kept only while the dual value decreases.

    On dense node sets the neighbours of active nodes decay very slowly under
    that update, so ``method="auto"`` hands over after a short multiplicative
    phase to a barrier Newton method whose multipliers supply the dual
    measure. ``"multiplicative"`` and ``"barrier"`` force one phase.

    Stops once the bracket width log(upper) - log(lower) is at most ``tol``;
    ``max_iter`` bounds the total count of weight updates and Newton steps.
    """
    if method not in PHI_METHODS:
        raise ConfigurationError(f"unknown Phi method {method!r}; expected one of {PHI_METHODS}")
    K = kernel if kernel is not None else orthonormalize(wset, n)
    E = K.node_basis / np.sqrt(wset.masses)[:, None]
    vals, ls = basis_values(K, [p])
    a = vals[0]
    amax = float(np.max(np.abs(a)))
    a = a / amax
    offset = float(ls[0]) + math.log(amax)

    bracket = _Bracket()
    it = 0
    if method != "barrier":
        steps = max_iter if method == "multiplicative" else min(max_iter, MULTIPLICATIVE_PHASE)
        it += _multiplicative(E, a, wset.masses / wset.total_mass, bracket, tol, steps)
    if method != "multiplicative" and not bracket.gap <= tol and it < max_iter:
        # trial steps may leave the feasible set; merit() rejects them
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            it += _barrier(E, a, bracket, tol, max_iter - it)

    gap = bracket.gap
    ok = math.isfinite(gap)
    lower, upper = bracket.lower + offset, bracket.upper + offset
    return PhiSolveResult(
        n=n,
        point=p,
        log_phi=0.5 * (lower + upper) if ok else math.nan,
        iterations=it,
        converged=ok and gap <= tol,
        final_gap=gap if ok else math.inf,
        log_phi_lower=lower,
        log_phi_upper=upper,
    )


@dataclass(frozen=True)
class LPOracleResult:
    log_upper: float  # circumscribed polygon: >= log Phi_n
    log_lower: float  # inscribed polygon: <= log Phi_n
    status: str


def phi_lp_oracle(wset: WeightedCompactSet, n: int, p: ProjectivePoint, phases: int = 64) -> LPOracleResult:
    """Independent LP bracket for log Phi_n(p) in the monomial basis.

    The disk constraint |v| <= 1 is replaced by Re(exp(-i theta_j) v) <= 1 at
    ``phases`` equally spaced angles. Intended for small n only.
    """
    d = n + 1
    eye = np.eye(d, dtype=complex)
    V = section_local_values(eye, wset.nodes, n).T  # (nodes, d)
    vp = section_local_values(eye, [p], n)[:, 0]
    theta = 2.0 * np.pi * np.arange(phases) / phases
    cos, sin = np.cos(theta), np.sin(theta)
    # Re(e^{-it} v.c) = cos t (Re v.x - Im v.y) + sin t (Im v.x + Re v.y),  c = x + i y
    re_row = np.hstack([V.real, -V.imag])
    im_row = np.hstack([V.imag, V.real])
    A = (cos[None, :, None] * re_row[:, None, :] + sin[None, :, None] * im_row[:, None, :]).reshape(-1, 2 * d)
    b = np.repeat(np.exp(n * wset.q_values), phases)
    obj = -np.concatenate([vp.real, -vp.imag])
    res = linprog(obj, A_ub=A, b_ub=b, bounds=[(None, None)] * (2 * d), method="highs")
    if res.status != 0:
        return LPOracleResult(math.nan, math.nan, res.message)
    upper = math.log(-res.fun)
    return LPOracleResult(upper, upper + math.log(math.cos(math.pi / phases)), "optimal")


# -- sandwich and rate -------------------------------------------------------


@dataclass(frozen=True)
class SandwichRecord:
    lower_ok: bool
    upper_ok: bool
    ratio: float
    log_ratio: float
    lower_bound: float
    upper_bound: float
    growth_upper_bound: Optional[float]


def sandwich_check(
    K: BergmanKernel,
    wset: WeightedCompactSet,
    p: ProjectivePoint,
    phi: PhiSolveResult,
    bm: Optional[BernsteinMarkovEstimate] = None,
    log_B: Optional[float] = None,
) -> SandwichRecord:
    """Check 1/(mu(K) d_n) <= B_n(p)/Phi_n(p)^2 <= M_n d_n at one point."""
    if not phi.converged:
        raise UnconvergedError(
            f"Phi_{phi.n} at {p} did not converge (gap {phi.final_gap:.3g} after {phi.iterations} iterations)"
        )
    n = K.degree
    d = section_space_dimension(n)
    bm = bm if bm is not None else bm_constant(K, wset)
    if log_B is None:
        log_B = float(bergman_log_many(K, [p])[0])
    log_ratio = log_B - 2.0 * phi.log_phi
    ratio = math.exp(log_ratio)
    lower = 1.0 / (wset.total_mass * d)
    upper = bm.M_n * d
    return SandwichRecord(
        lower_ok=ratio >= lower * (1.0 - SANDWICH_RTOL),
        upper_ok=ratio <= upper * (1.0 + SANDWICH_RTOL),
        ratio=ratio,
        log_ratio=log_ratio,
        lower_bound=lower,
        upper_bound=upper,
        growth_upper_bound=(n**C0) * d if n >= 1 else None,
    )


def fit_rate(degrees: Sequence[int], errors: Sequence[float]) -> tuple[float, float]:
    """Least-squares c in E_n ~ c log(n)/n through the origin, and its R^2.

    R^2 uses the centered total sum of squares. Degrees below 2 carry no
    information (log 1 = 0) and are skipped.
    """
    pairs = [(math.log(n) / n, e) for n, e in zip(degrees, errors) if n >= 2 and e is not None]
    if not pairs:
        return math.nan, math.nan
    x = np.array([u for u, _ in pairs])
    y = np.array([v for _, v in pairs])
    c = float(np.dot(x, y) / np.dot(x, x))
    ss_res = float(np.sum((y - c * x) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else math.nan
    else:
        r2 = 1.0 - ss_res / ss_tot
    return c, r2


def bm_exponent(degrees: Sequence[int], M: Sequence[float]) -> tuple[float, float]:
    """Observed growth of M_n: the log-log slope, and max log M_n / log n.

    The second value is the smallest C with M_n <= n^C at every degree
    given. Degrees below 2 are skipped.
    """
    pairs = [(math.log(n), math.log(m)) for n, m in zip(degrees, M) if n >= 2]
    if not pairs:
        return math.nan, math.nan
    x = np.array([u for u, _ in pairs])
    y = np.array([v for _, v in pairs])
    slope = float(np.polyfit(x, y, 1)[0]) if len(pairs) >= 2 else math.nan
    return slope, float(np.max(y / x))


# -- convergence report ------------------------------------------------------


def auto_threads(threads: int) -> int:
    if threads < 0:
        raise ConfigurationError(f"thread count must be >= 0, got {threads}")
    return threads if threads > 0 else min(os.cpu_count() or 1, 16)


def _homogeneous(points: Sequence[ProjectivePoint]) -> np.ndarray:
    inf, c = point_arrays(points)
    h = np.where(inf[:, None], np.stack([c, np.ones_like(c)], 1), np.stack([np.ones_like(c), c], 1))
    return h / np.linalg.norm(h, axis=1)[:, None]


def distance_to_nodes(points: Sequence[ProjectivePoint], wset: WeightedCompactSet) -> np.ndarray:
    """Chordal distance from each point to the nearest node."""
    a, b = _homogeneous(points), _homogeneous(wset.nodes)
    det = np.abs(a[:, 0][:, None] * b[:, 1][None, :] - a[:, 1][:, None] * b[:, 0][None, :])
    return det.min(axis=1)


def phi_sample_indices(grid: EvalGrid, wset: WeightedCompactSet, stride: int = 8, k_adjacent: int = 8) -> list[int]:
    """Grid indices where Phi_n is solved: every ``stride``-th point, both origins,
    and the ``k_adjacent`` points closest to K."""
    pts = grid.points
    chosen = set(range(0, len(pts), stride))
    chosen.update(i for i, p in enumerate(pts) if p.coord == 0)
    dist = distance_to_nodes(pts, wset)
    for i in np.argsort(dist, kind="stable"):
        if k_adjacent <= 0:
            break
        if int(i) not in chosen:
            chosen.add(int(i))
            k_adjacent -= 1
    return sorted(chosen)


@dataclass
class DegreeRow:
    n: int
    d_n: int
    nodes: int
    M_n: float
    argmax_node: int
    trace: float
    E_n: Optional[float]
    phi_gap_n: Optional[float]
    sandwich_min: Optional[float]
    sandwich_max: Optional[float]
    sandwich_lower_ok: bool
    sandwich_upper_ok: bool
    phi_points: int
    phi_unconverged: int
    phi_above_V: Optional[int]
    cond_estimate: float
    wall_time: float = 0.0

    @property
    def E_scaled(self) -> Optional[float]:
        if self.E_n is None or self.n < 2:
            return None
        return self.E_n * self.n / math.log(self.n)


@dataclass
class GridDump:
    n: int
    points: tuple[ProjectivePoint, ...]
    half_log_B: np.ndarray
    V: Optional[np.ndarray]
    log_phi_over_n: dict[int, float] = field(default_factory=dict)
    phi_converged: dict[int, bool] = field(default_factory=dict)


@dataclass
class ConvergenceReport:
    scenario: str
    degrees: list[int]
    grid: EvalGrid
    rows: list[DegreeRow]
    c_fit: Optional[float]
    r2: Optional[float]
    dump: Optional[GridDump]

    @property
    def E_n(self) -> list[Optional[float]]:
        return [r.E_n for r in self.rows]


def _degree_unit(
    scen: Scenario,
    n: int,
    grid: EvalGrid,
    nodes: Optional[int],
    phi_tol: float,
    phi_max_iter: int,
    pool: ThreadPoolExecutor,
    stride: int,
):
    t0 = time.perf_counter()
    wset = scen.build(n, nodes)
    K = orthonormalize(wset, n)
    bm = bm_constant(K, wset)
    trace = trace_mass(K, wset)
    d = section_space_dimension(n)
    logB = bergman_log_many(K, grid.points)
    half = logB / (2 * n)
    V = np.array([oracle_V(scen.name, p) for p in grid.points]) if scen.has_oracle else None
    E = float(np.max(np.abs(half - V))) if V is not None else None

    idx = phi_sample_indices(grid, wset, stride=stride)
    phis = list(pool.map(lambda i: phi_log(wset, n, grid.points[i], phi_tol, phi_max_iter, kernel=K), idx))

    ratios, gaps, lower_ok, upper_ok, above = [], [], True, True, 0
    dump = GridDump(n=n, points=grid.points, half_log_B=half, V=V)
    for i, ph in zip(idx, phis):
        dump.phi_converged[i] = ph.converged
        if not ph.converged:
            continue
        dump.log_phi_over_n[i] = ph.log_phi / n
        rec = sandwich_check(K, wset, grid.points[i], ph, bm=bm, log_B=float(logB[i]))
        ratios.append(rec.ratio)
        lower_ok &= rec.lower_ok
        upper_ok &= rec.upper_ok
        gaps.append(abs(half[i] - ph.log_phi / n))
        if V is not None and ph.log_phi / n > V[i] + 1e-6:
            above += 1
    row = DegreeRow(
        n=n,
        d_n=d,
        nodes=len(wset),
        M_n=bm.M_n,
        argmax_node=bm.argmax_node,
        trace=trace,
        E_n=E,
        phi_gap_n=max(gaps) if gaps else None,
        sandwich_min=min(ratios) if ratios else None,
        sandwich_max=max(ratios) if ratios else None,
        sandwich_lower_ok=lower_ok,
        sandwich_upper_ok=upper_ok,
        phi_points=len(idx),
        phi_unconverged=sum(not ph.converged for ph in phis),
        phi_above_V=above if V is not None else None,
        cond_estimate=K.cond_estimate,
        wall_time=time.perf_counter() - t0,
    )
    return row, dump


def convergence_report(
    scenario: str,
    degrees: Sequence[int],
    grid: EvalGrid,
    *,
    nodes: Optional[int] = None,
    phi_tol: float = 1e-6,
    phi_max_iter: int = 5000,
    threads: int = 0,
    phi_stride: int = 8,
) -> ConvergenceReport:
    """Sweep degrees: sup-grid errors against V, Phi sandwich records, and the rate fit.

    Phi solves run on a thread pool; each is a pure function of immutable
    inputs and results are gathered in grid order, so output does not
    depend on the thread count.
    """
    scen = get_scenario(scenario)
    degrees = list(degrees)
    if not degrees or any(n < 1 for n in degrees) or any(b <= a for a, b in zip(degrees, degrees[1:])):
        raise ConfigurationError(f"degrees must be nonempty, strictly increasing and >= 1, got {degrees}")
    rows, dump = [], None
    with ThreadPoolExecutor(max_workers=auto_threads(threads)) as pool:
        for n in degrees:
            row, dump = _degree_unit(scen, n, grid, nodes, phi_tol, phi_max_iter, pool, phi_stride)
            rows.append(row)
    c_fit = r2 = None
    if scen.has_oracle:
        c_fit, r2 = fit_rate(degrees, [r.E_n for r in rows])
    return ConvergenceReport(scenario=scen.name, degrees=degrees, grid=grid, rows=rows, c_fit=c_fit, r2=r2, dump=dump)
