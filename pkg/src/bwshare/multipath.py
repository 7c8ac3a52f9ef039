"""Reduction of multi-path routing to a single capacity matrix.

With routes grouped into source-destination pairs by a zero-one matrix H,
the feasible pair throughputs form the projection H*Y of the route-level
polytope Y = {y >= 0 : Abar y <= Cbar}.  That projection is again a
down-closed bounded polytope {Lam >= 0 : A Lam <= C} with A >= 0, C > 0
and no zero column, so the pair-level allocation problem reduces to the
ordinary single-matrix one.  project computes (A, C) by Fourier-Motzkin
elimination in exact rational arithmetic, which keeps fractional cut
coefficients (such as the 1/2 in pooled-resource constraints) exact.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigInvalid, EliminationBlowup, Unbounded

FM_ROW_CAP = 100000
FM_WARN_VARS = 20
SNAP_TOL = 1e-9
LP_TOL = 1e-8


@dataclass(frozen=True)
class MultipathSpec:
    """Multi-path network: routes K, pairs I, resources L.

    H is I x K zero-one with unit column sums (each route serves exactly
    one pair); A_bar is L x K zero-one with no zero column; C_bar holds
    the positive resource capacities.  Traffic parameters are per pair.
    """

    H: np.ndarray
    A_bar: np.ndarray
    C_bar: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    kappa: np.ndarray
    alpha: float

    @property
    def I(self) -> int:
        return self.H.shape[0]

    @property
    def K(self) -> int:
        return self.H.shape[1]

    @property
    def L(self) -> int:
        return self.A_bar.shape[0]


@dataclass(frozen=True)
class ReducedRepresentation:
    """Pair-level capacity system {Lam >= 0 : A Lam <= C}.

    certificates[j] is a point of the polytope lying on the j-th
    hyperplane, witnessing that the inequality is supporting.
    """

    A: np.ndarray
    C: np.ndarray
    certificates: np.ndarray


def validate_multipath(mspec: MultipathSpec) -> None:
    H = np.asarray(mspec.H, dtype=float)
    Ab = np.asarray(mspec.A_bar, dtype=float)
    Cb = np.asarray(mspec.C_bar, dtype=float)
    if H.ndim != 2 or Ab.ndim != 2:
        raise ConfigInvalid("H and A_bar must be matrices")
    I, K = H.shape
    L = Ab.shape[0]
    if Ab.shape[1] != K:
        raise ConfigInvalid(f"A_bar has {Ab.shape[1]} columns, expected {K}")
    if Cb.shape != (L,):
        raise ConfigInvalid(f"C_bar has shape {Cb.shape}, expected ({L},)")
    if not np.all((H == 0.0) | (H == 1.0)):
        raise ConfigInvalid("H must be a zero-one matrix")
    if not np.all(H.sum(axis=0) == 1.0):
        raise ConfigInvalid("each column of H must sum to exactly 1")
    if not np.all((Ab == 0.0) | (Ab == 1.0)):
        raise ConfigInvalid("A_bar must be a zero-one matrix")
    if np.any(Ab.sum(axis=0) == 0.0):
        raise ConfigInvalid("A_bar has a zero column (route using no resource)")
    if np.any(Cb <= 0.0):
        raise ConfigInvalid("C_bar must be strictly positive")
    for name in ("nu", "mu", "kappa"):
        vec = np.asarray(getattr(mspec, name), dtype=float)
        if vec.shape != (I,):
            raise ConfigInvalid(f"{name} has shape {vec.shape}, expected ({I},)")
        if np.any(vec <= 0.0):
            raise ConfigInvalid(f"{name} must be strictly positive")
    if not mspec.alpha > 0:
        raise ConfigInvalid("alpha must be positive")


def _dominance_prune(rows):
    """Keep, per coefficient vector, only the smallest right-hand side."""
    best = {}
    for coeff, rhs in rows:
        key = tuple(coeff)
        if key not in best or rhs < best[key]:
            best[key] = rhs
    return [(list(k), v) for k, v in best.items()]


def _eliminate(rows, col, cap):
    pos, neg, zero = [], [], []
    for coeff, rhs in rows:
        c = coeff[col]
        if c > 0:
            pos.append((coeff, rhs, c))
        elif c < 0:
            neg.append((coeff, rhs, -c))
        else:
            zero.append((coeff, rhs))
    out = list(zero)
    for pc, pr, pscale in pos:
        for nc, nr, nscale in neg:
            coeff = [a / pscale + b / nscale for a, b in zip(pc, nc)]
            coeff[col] = Fraction(0)
            out.append((coeff, pr / pscale + nr / nscale))
            if len(out) > cap:
                raise EliminationBlowup(
                    f"intermediate system exceeded {cap} inequalities")
    return _dominance_prune(out)


def project(mspec: MultipathSpec) -> ReducedRepresentation:
    """Eliminate the route variables, returning the minimal (A, C).

    The equalities H y = Lam remove one route variable per pair; the rest
    leave by Fourier-Motzkin over exact rationals.  Inequalities through
    the origin are dropped (no retained hyperplane contains it), each row
    is scaled so its largest coefficient is 1 (keeping C on the scale of
    the input capacities), and redundant rows are removed by maximizing
    each inequality over the others.
    """
    validate_multipath(mspec)
    H = np.asarray(mspec.H, dtype=int)
    Ab = np.asarray(mspec.A_bar, dtype=int)
    Cb = [Fraction(float(c)) for c in np.asarray(mspec.C_bar, dtype=float)]
    I, K = H.shape
    if K > FM_WARN_VARS:
        warnings.warn(f"eliminating {K} route variables; expect slow projection",
                      RuntimeWarning, stacklevel=2)
    # columns 0..K-1 are the route variables, K..K+I-1 the pair totals
    n_cols = K + I
    rows = []
    for l in range(mspec.L):
        coeff = [Fraction(int(Ab[l, k])) for k in range(K)] + [Fraction(0)] * I
        rows.append((coeff, Cb[l]))
    for k in range(K):
        coeff = [Fraction(0)] * n_cols
        coeff[k] = Fraction(-1)
        rows.append((coeff, Fraction(0)))
    # substitute the representative route of each pair: y_r = Lam_i - rest
    pair_of = [int(np.argmax(H[:, k])) for k in range(K)]
    rep_route = [int(np.argmax(H[i])) for i in range(I)]
    for coeff, _ in rows:
        for i in range(I):
            r = rep_route[i]
            c = coeff[r]
            if c == 0:
                continue
            coeff[r] = Fraction(0)
            coeff[K + i] += c
            for k in range(K):
                if k != r and pair_of[k] == i:
                    coeff[k] -= c
    remaining = [k for k in range(K) if k not in set(rep_route)]
    while remaining:
        def cost(col):
            p = sum(1 for coeff, _ in rows if coeff[col] > 0)
            n = sum(1 for coeff, _ in rows if coeff[col] < 0)
            return p * n
        col = min(remaining, key=cost)
        remaining.remove(col)
        rows = _eliminate(rows, col, FM_ROW_CAP)
    # restrict to the pair columns; drop vacuous rows and origin hyperplanes
    final = []
    for coeff, rhs in rows:
        a = coeff[K:]
        assert rhs >= 0, "projection produced an infeasible row"
        if rhs == 0 or all(x <= 0 for x in a):
            continue
        top = max(a)
        final.append(([x / top for x in a], rhs / top))
    final = _dominance_prune(final)
    A0 = np.array([[_snap(x) for x in coeff] for coeff, _ in final])
    C0 = np.array([_snap(rhs) for _, rhs in final])
    keep = _redundancy_sweep(A0, C0)
    A0, C0 = A0[keep], C0[keep]
    assert np.all(C0 > 0) and np.all(A0 >= 0)
    assert np.all((A0 > 0).any(axis=0)), "projection left a pair unbounded"
    certs = np.empty_like(A0)
    for j in range(len(C0)):
        res = linprog(-A0[j], A_ub=A0, b_ub=C0, bounds=(0, None), method="highs")
        assert res.status == 0
        assert abs(A0[j] @ res.x - C0[j]) <= LP_TOL * max(1.0, C0[j])
        certs[j] = res.x
    return ReducedRepresentation(A=A0, C=C0, certificates=certs)


def _snap(fr: Fraction) -> float:
    x = float(fr)
    r = round(x)
    return float(r) if abs(x - r) < SNAP_TOL else x


def _redundancy_sweep(A0, C0):
    keep = list(range(len(C0)))
    i = 0
    while i < len(keep):
        j = keep[i]
        others = keep[:i] + keep[i + 1:]
        if not others:
            i += 1
            continue
        res = linprog(-A0[j], A_ub=A0[others], b_ub=C0[others], bounds=(0, None),
                      method="highs")
        if res.status == 0 and -res.fun <= C0[j] + LP_TOL * max(1.0, abs(C0[j])):
            keep.pop(i)
        else:
            # maximum exceeds the bound (or is unbounded): row is essential
            i += 1
    return keep


def local_traffic_check(A):
    """Per resource row, find a pair served by that row alone.

    Returns (all_rows_ok, witnesses) where witnesses[j] is a column index
    whose only positive entry sits in row j, or None when row j has no
    such private column.
    """
    A = np.asarray(A, dtype=float)
    if np.any(A < 0):
        raise ValueError("A must be nonnegative")
    witnesses = []
    for j in range(A.shape[0]):
        found = None
        for i in range(A.shape[1]):
            if A[j, i] > 0 and np.all(np.abs(np.delete(A[:, i], j)) <= 1e-12):
                found = i
                break
        witnesses.append(found)
    return all(w is not None for w in witnesses), tuple(witnesses)


def _as_rows(rep, dim):
    if isinstance(rep, ReducedRepresentation):
        A, C = rep.A, rep.C
    else:
        A, C = rep
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    if A.ndim != 2 or A.shape[1] != dim or C.shape != (A.shape[0],):
        raise ValueError(f"representation rows inconsistent with dimension {dim}")
    return A, C


def _check_bounded(A, C):
    res = linprog(-np.ones(A.shape[1]), A_ub=A, b_ub=C, bounds=(0, None),
                  method="highs")
    if res.status == 3:
        raise Unbounded("capacity system does not bound the throughput")


def polytopes_equal(rep1, rep2, dim: int) -> bool:
    """Mutual inclusion of {Lam >= 0 : A Lam <= C} systems via LP."""
    A1, C1 = _as_rows(rep1, dim)
    A2, C2 = _as_rows(rep2, dim)
    _check_bounded(A1, C1)
    _check_bounded(A2, C2)
    for Aa, Ca, Ab, Cb in ((A1, C1, A2, C2), (A2, C2, A1, C1)):
        for j in range(len(Cb)):
            res = linprog(-Ab[j], A_ub=Aa, b_ub=Ca, bounds=(0, None),
                          method="highs")
            if res.status == 3:
                return False
            if res.status == 0 and -res.fun > Cb[j] + LP_TOL * max(1.0, abs(Cb[j])):
                return False
    return True
