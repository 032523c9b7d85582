"""Dense symmetric eigensolvers.

Two routes compute the same thing:

* ``method="lapack"`` calls ``scipy.linalg.eigh(driver="ev")``, i.e. LAPACK
  ``dsyev``: Householder tridiagonalisation followed by implicit QL/QR.
* ``method="ql"`` is a self-contained Householder reduction plus implicit QL
  with Wilkinson shifts, written in numpy. It is slower (the QL sweep is a
  Python loop) and exists as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, ValidationError

RESIDUAL_RTOL = 1e-9


@dataclass(frozen=True)
class EigenResult:
    values: np.ndarray          # ascending
    vectors: np.ndarray | None  # columns, matching ``values``
    residual: float             # max_j ||M v_j - lambda_j v_j|| / ||v_j||


def eig_symmetric(m, method: str = "lapack", vectors: bool = True) -> EigenResult:
    """All eigenvalues of a symmetric matrix, ascending, with the achieved residual.

    Raises ``ConvergenceError`` when the residual exceeds ``1e-9 * ||M||_2``.
    With ``vectors=False`` the residual is not computed and reported as NaN.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if not np.array_equal(m, m.T):
        raise ValidationError("matrix is not exactly symmetric")
    if method == "lapack":
        if vectors:
            w, v = scipy.linalg.eigh(m, driver="ev")
        else:
            w, v = scipy.linalg.eigh(m, eigvals_only=True, driver="ev"), None
    elif method == "ql":
        d, e, q = tridiagonalize(m)
        w, v = tridiagonal_ql(d, e, q if vectors else None)
    else:
        raise ValidationError(f"unknown eigensolver method {method!r}")
    if v is None:
        return EigenResult(w, None, math.nan)
    resid = residual(m, w, v)
    scale = max(np.max(np.abs(w)), 1.0) if w.size else 1.0
    if resid > RESIDUAL_RTOL * scale:
        raise ConvergenceError(
            f"eigenpair residual {resid:.3e} exceeds {RESIDUAL_RTOL:g} * ||M||", resid)
    return EigenResult(w, v, resid)


def residual(m, w, v) -> float:
    r = m @ v - v * w
    norms = np.linalg.norm(v, axis=0)
    return float(np.max(np.linalg.norm(r, axis=0) / norms)) if w.size else 0.0


def tridiagonalize(a):
    """Householder reduction ``Q^T A Q = T``.

    Returns the diagonal ``d``, sub-diagonal ``e`` (length n-1) and the
    orthogonal ``Q``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    q = np.eye(n)
    for k in range(n - 2):
        x = a[k + 1:, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        alpha = -math.copysign(math.hypot(x[0], tail), x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        # A <- H A H with H = I - 2 v v^T acting on indices k+1..n-1
        sub = a[k + 1:, k:]
        sub -= 2.0 * np.outer(v, v @ sub)
        sub = a[k:, k + 1:]
        sub -= 2.0 * np.outer(sub @ v, v)
        qs = q[:, k + 1:]
        qs -= 2.0 * np.outer(qs @ v, v)
    d = np.diag(a).copy()
    e = np.diag(a, -1).copy()
    return d, e, q


def tridiagonal_ql(d, e, z=None, max_iter: int = 50):
    """Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.

    ``e[i]`` couples rows ``i`` and ``i+1``. When ``z`` is given its columns
    are rotated along, so passing the tridiagonalising ``Q`` yields
    eigenvectors of the original matrix.
    """
    d = np.array(d, dtype=float)
    n = d.size
    e = np.append(np.asarray(e, dtype=float), 0.0)
    zt = None if z is None else np.array(z, dtype=float).T.copy()
    eps = np.finfo(float).eps
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                raise ConvergenceError(f"QL failed to converge for eigenvalue {l}")
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if zt is not None:
                    zi = zt[i].copy()
                    zt[i] = c * zi - s * zt[i + 1]
                    zt[i + 1] = s * zi + c * zt[i + 1]
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    order = np.argsort(d, kind="stable")
    if zt is None:
        return d[order], None
    return d[order], zt[order].T.copy()
