"""Weighted Bergman kernels on H^0(P^1, O(n)).

The inner product on sections is the discrete weighted L2 product

    <s1, s2> = sum_k mass_k h_n(s1(y_k), s2(y_k)) exp(-2 n q_k)

over the nodes of a :class:`WeightedCompactSet`. An orthonormal basis
S_0..S_n is built by weighted Arnoldi iteration on the node coordinates
(a stable QR of the weighted Vandermonde matrix that never forms monomial
powers), and B_n(x) = sum_j ||S_j(x)||^2 is evaluated through the same
three-term-free Hessenberg recurrence. Everything is carried in log units
with per-point rescaling, so degrees up to a few hundred stay representable.

An explicit Gram + Cholesky path (``method="gram"``) is kept as an oracle
for well-conditioned cases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, IllConditionedError, RankDeficiencyError
from .geometry import ProjectivePoint, fs_weight_array, point_arrays, section_local_values
from .measure import WeightedCompactSet

log = logging.getLogger(__name__)

COND_WARN = 1e12
GRAM_COND_MAX = 1e8
_RESCALE_AT = 1e100
_BREAKDOWN = 1e-12


@dataclass(frozen=True)
class SectionSpaceBasis:
    """Monomial basis of H^0(P^m, O(n)); kernels only run at m = 1."""

    degree: int
    m: int = 1

    @property
    def dimension(self) -> int:
        return section_space_dimension(self.degree, self.m)


def section_space_dimension(n: int, m: int = 1) -> int:
    """dim H^0(P^m, O(n)) = binomial(n + m, m)."""
    if n < 0 or m < 1:
        raise DimensionError(f"need n >= 0 and m >= 1, got n={n}, m={m}")
    return math.comb(n + m, m)


@dataclass(frozen=True, eq=False)
class BergmanKernel:
    """Orthonormal basis of H^0(P^1, O(n)) for a discrete weighted measure.

    ``coeff_matrix[j]`` holds the monomial coefficients of S_j. For
    ill-conditioned node sets those coefficients are only a diagnostic;
    evaluation always goes through the recurrence (``hessenberg``) or, on
    the Gram path, through the coefficients themselves.
    """

    degree: int
    coeff_matrix: np.ndarray
    source: str
    cond_estimate: float
    method: str
    log_shift: float
    node_basis: np.ndarray
    hessenberg: np.ndarray | None = None
    h0: float = 1.0
    warnings: tuple[str, ...] = ()

    @property
    def dimension(self) -> int:
        return self.degree + 1


@dataclass(frozen=True)
class BernsteinMarkovEstimate:
    n: int
    M_n: float
    log_M_n: float
    argmax_node: int


def _check_support(wset: WeightedCompactSet, n: int) -> None:
    if wset.distinct_node_count < n + 1:
        raise RankDeficiencyError(
            f"{wset.label}: {wset.distinct_node_count} distinct nodes cannot separate "
            f"degree-{n} sections (need {n + 1})"
        )


def gram_inner(a, b, wset: WeightedCompactSet, n: int) -> complex:
    """Weighted inner product of two sections given by monomial coefficients."""
    a = np.asarray(a, dtype=complex).reshape(-1)
    b = np.asarray(b, dtype=complex).reshape(-1)
    if a.size != n + 1 or b.size != n + 1:
        raise DimensionError(f"expected {n + 1} coefficients, got {a.size} and {b.size}")
    _check_support(wset, n)
    vals = section_local_values(np.vstack([a, b]), wset.nodes, n)
    w = wset.masses * np.exp(-2.0 * n * wset.q_values)
    return complex(np.sum(w * vals[0] * np.conj(vals[1])))


def _node_affine(wset: WeightedCompactSet) -> np.ndarray:
    inf, coords = wset.arrays
    if np.any(inf & (coords == 0)):
        raise RankDeficiencyError("nodes at the point at infinity are not supported")
    y = coords.copy()
    y[inf] = 1.0 / coords[inf]
    return y


def _log_node_weights(wset: WeightedCompactSet, y: np.ndarray, n: int) -> np.ndarray:
    """log of sqrt(mass) * exp(-n phi) * exp(-n q) per node."""
    return 0.5 * np.log(wset.masses) - n * fs_weight_array(y) - n * wset.q_values


def _design_cond(D: np.ndarray, y: np.ndarray, n: int) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        A = D[:, None] * y[:, None] ** np.arange(n + 1)[None, :]
        if not np.all(np.isfinite(A)):
            return math.inf
        s = np.linalg.svd(A, compute_uv=False)
    return math.inf if s[-1] == 0 else float(s[0] / s[-1])


def orthonormalize(wset: WeightedCompactSet, n: int, method: str = "arnoldi") -> BergmanKernel:
    """Orthonormal basis of degree-n sections for the weighted node measure."""
    if n < 0:
        raise DimensionError(f"degree must be >= 0, got {n}")
    _check_support(wset, n)
    y = _node_affine(wset)
    logD = _log_node_weights(wset, y, n)
    shift = float(np.max(logD))
    D = np.exp(logD - shift)
    cond = _design_cond(D, y, n)
    warnings: list[str] = []
    if cond > COND_WARN:
        msg = f"{wset.label}, n={n}: weighted Vandermonde condition estimate {cond:.3g}"
        warnings.append(msg)
        log.debug(msg)
    if method == "arnoldi":
        return _arnoldi(wset, n, y, D, shift, cond, tuple(warnings))
    if method == "gram":
        return _gram(wset, n, y, D, shift, cond, tuple(warnings))
    raise ValueError(f"unknown orthonormalization method {method!r}")


def _arnoldi(wset, n, y, D, shift, cond, warnings) -> BergmanKernel:
    N, d = y.size, n + 1
    Q = np.zeros((N, d), dtype=complex)
    H = np.zeros((d, max(n, 1)), dtype=complex)
    h0 = float(np.linalg.norm(D))
    Q[:, 0] = D / h0
    for k in range(n):
        v = y * Q[:, k]
        before = np.linalg.norm(v)
        for _ in range(2):  # classical Gram-Schmidt, twice
            c = Q[:, : k + 1].conj().T @ v
            v = v - Q[:, : k + 1] @ c
            H[: k + 1, k] += c
        hk = np.linalg.norm(v)
        if not hk > _BREAKDOWN * before:
            raise RankDeficiencyError(
                f"{wset.label}: Arnoldi breakdown at step {k + 1} of {n}; "
                f"effective node count too small for degree {n}"
            )
        H[k + 1, k] = hk
        Q[:, k + 1] = v / hk

    C = np.zeros((d, d), dtype=complex)
    C[0, 0] = 1.0 / h0
    for k in range(n):
        row = np.zeros(d, dtype=complex)
        row[1:] = C[k, :-1]
        row -= H[: k + 1, k] @ C[: k + 1]
        C[k + 1] = row / H[k + 1, k].real
    with np.errstate(over="ignore"):
        C = C * np.exp(-shift)

    return BergmanKernel(
        degree=n,
        coeff_matrix=C,
        source=wset.label,
        cond_estimate=cond,
        method="arnoldi",
        log_shift=shift,
        node_basis=Q,
        hessenberg=H,
        h0=h0,
        warnings=warnings,
    )


def _gram(wset, n, y, D, shift, cond, warnings) -> BergmanKernel:
    if cond * cond > GRAM_COND_MAX:
        raise IllConditionedError(
            f"{wset.label}, n={n}: Gram condition estimate {cond * cond:.3g} exceeds {GRAM_COND_MAX:g}"
        )
    A = D[:, None] * y[:, None] ** np.arange(n + 1)[None, :]
    G = A.conj().T @ A
    L = np.linalg.cholesky(G)
    Linv = solve_triangular(L, np.eye(n + 1), lower=True)
    Cs = np.conj(Linv)
    return BergmanKernel(
        degree=n,
        coeff_matrix=Cs * math.exp(-shift),
        source=wset.label,
        cond_estimate=cond,
        method="gram",
        log_shift=shift,
        node_basis=A @ Cs.T,
        warnings=warnings,
    )


def basis_values(K: BergmanKernel, points: Sequence[ProjectivePoint]) -> tuple[np.ndarray, np.ndarray]:
    """Weighted values of the orthonormal sections at ``points``.

    Returns ``(vals, logscale)`` with shape ``(P, d)`` and ``(P,)`` such that
    ``|vals[i, j]| * exp(logscale[i]) = ||S_j(p_i)||_{h_n}``.
    """
    inf, coords = point_arrays(points)
    return _basis_values(K, inf, coords)


def _basis_values(K: BergmanKernel, inf: np.ndarray, coords: np.ndarray):
    n, d = K.degree, K.degree + 1
    P = np.zeros((coords.size, d), dtype=complex)
    ls = -n * fs_weight_array(coords) - K.log_shift
    if K.method == "gram":
        Cs = K.coeff_matrix * math.exp(K.log_shift)
        j = np.arange(d)
        expo = np.where(inf[:, None], n - j[None, :], j[None, :])
        P[:] = (coords[:, None] ** expo) @ Cs.T
        return P, ls

    H, h0 = K.hessenberg, K.h0
    P[:, 0] = 1.0 / h0
    wz = coords
    if n:
        # chart Infinity: homogenized recurrence for P_k(w) = w^k p_k(1/w)
        jpow = np.arange(d)
        for k in range(n):
            acc_z = wz * P[:, k] - P[:, : k + 1] @ H[: k + 1, k]
            if inf.any():
                wi = wz[inf]
                pw = wi[:, None] ** (k + 1 - jpow[None, : k + 1])
                acc_w = P[inf, k] - (P[inf, : k + 1] * pw) @ H[: k + 1, k]
                acc_z[inf] = acc_w
            P[:, k + 1] = acc_z / H[k + 1, k].real
            big = np.abs(P[:, k + 1]) > _RESCALE_AT
            if big.any():
                s = np.abs(P[big, k + 1])
                P[big, : k + 2] /= s[:, None]
                ls[big] += np.log(s)
        if inf.any():
            P[inf] *= wz[inf][:, None] ** (n - jpow)[None, :]
    return P, ls


def _log_sumsq(P: np.ndarray) -> np.ndarray:
    m = np.max(np.abs(P), axis=1)
    safe = np.where(m > 0, m, 1.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.abs(P / safe[:, None]) ** 2, axis=1)) + 2.0 * np.log(safe)
    return np.where(m > 0, out, -np.inf)


def bergman_log_many(K: BergmanKernel, points: Sequence[ProjectivePoint]) -> np.ndarray:
    """log B_n at each point."""
    P, ls = basis_values(K, points)
    return _log_sumsq(P) + 2.0 * ls


def bergman_log(K: BergmanKernel, p: ProjectivePoint) -> float:
    """log B_n(p) = log sum_j ||S_j(p)||^2_{h_n}."""
    return float(bergman_log_many(K, [p])[0])


def weighted_bergman_log_at_nodes(K: BergmanKernel, wset: WeightedCompactSet) -> np.ndarray:
    """log (B_n(y_k) exp(-2 n q_k)) at every node."""
    return bergman_log_many(K, wset.nodes) - 2.0 * K.degree * wset.q_values


def bm_constant(K: BergmanKernel, wset: WeightedCompactSet) -> BernsteinMarkovEstimate:
    """Best constant M_n in the weighted Bernstein-Markov inequality.

    For the atomic measure the extremal ratio of weighted sup norm to L2
    norm is attained by a reproducing section, so M_n is the max over nodes
    of B_n(y_k) exp(-2 n q_k). Ties go to the lowest node index.
    """
    if len(wset) != K.node_basis.shape[0]:
        raise DimensionError("kernel was not built from this node set")
    vals = weighted_bergman_log_at_nodes(K, wset)
    top = float(np.max(vals))
    idx = int(np.flatnonzero(vals >= top - 1e-12 * max(1.0, abs(top)))[0])
    return BernsteinMarkovEstimate(n=K.degree, M_n=math.exp(top), log_M_n=top, argmax_node=idx)


def trace_mass(K: BergmanKernel, wset: WeightedCompactSet) -> float:
    """sum_k mass_k B_n(y_k) exp(-2 n q_k); equals d_n for a probability measure."""
    vals = weighted_bergman_log_at_nodes(K, wset) + np.log(wset.masses)
    top = np.max(vals)
    return float(math.exp(top) * math.fsum(np.exp(vals - top)))


def orthonormality_defect(K: BergmanKernel) -> float:
    """max |<S_j, S_k> - delta_jk| from the stored node basis."""
    Q = K.node_basis
    return float(np.max(np.abs(Q.conj().T @ Q - np.eye(Q.shape[1]))))
