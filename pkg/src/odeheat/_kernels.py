"""Time-marching kernels for bordered tridiagonal step systems.

Every implicit step solves a system of the form

    [ T   c ] [y]   [f]
    [ r^T d ] [z] = [g]

where ``T`` is tridiagonal (``lo``, ``di``, ``up`` with row ``i`` reading
``lo[i] y[i-1] + di[i] y[i] + up[i] y[i+1]``), ``c``/``r`` are dense
borders and ``d`` is a scalar.  Per-step coefficients are stacked along a
leading step axis.

Two backends implement the same kernels: numba-compiled loops (default) and
a numpy path that hands the tridiagonal solves to LAPACK through
``scipy.linalg.solve_banded``.  Set ``ODEHEAT_BACKEND=numpy`` to force the
fallback.
"""

import os

import numpy as np
from scipy.linalg import solve_banded

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


class SingularStepError(ArithmeticError):
    pass


def _requested_backend():
    name = os.environ.get("ODEHEAT_BACKEND", "numba" if HAVE_NUMBA else "numpy").lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"ODEHEAT_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        name = "numpy"
    return name


BACKEND = _requested_backend()


# ---------------------------------------------------------------- numpy path


def _bordered_solve_np(lo, di, up, col, row, cor, rhs):
    n = di.size
    ab = np.empty((3, n))
    ab[0, 0] = 0.0
    ab[0, 1:] = up[:-1]
    ab[1] = di
    ab[2, :-1] = lo[1:]
    ab[2, -1] = 0.0
    try:
        pq = solve_banded((1, 1), ab, np.column_stack((rhs[:n], col)), check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularStepError(str(exc)) from None
    schur = cor - row @ pq[:, 1]
    if schur == 0.0:
        raise SingularStepError("zero Schur complement in bordered step")
    out = np.empty(n + 1)
    out[n] = (rhs[n] - row @ pq[:, 0]) / schur
    out[:n] = pq[:, 0] - out[n] * pq[:, 1]
    return out


def _bordered_matvec_np(lo, di, up, col, row, cor, x):
    n = di.size
    y = np.empty(n + 1)
    xy = x[:n]
    y[:n] = di * xy + col * x[n]
    y[1:n] += lo[1:] * xy[:-1]
    y[: n - 1] += up[:-1] * xy[1:]
    y[n] = row @ xy + cor * x[n]
    return y


def _transpose_tri(lo, di, up):
    # row i of T^T: T[i-1, i] x[i-1] + T[i, i] x[i] + T[i+1, i] x[i+1]
    lo_t = np.zeros_like(lo)
    up_t = np.zeros_like(up)
    lo_t[..., 1:] = up[..., :-1]
    up_t[..., :-1] = lo[..., 1:]
    return lo_t, di, up_t


def _march_np(A, B, extra, x0):
    nsteps = extra.shape[0]
    X = np.empty((nsteps + 1, x0.size))
    X[0] = x0
    for k in range(nsteps):
        r = _bordered_matvec_np(*(m[k] for m in B), X[k]) + extra[k]
        X[k + 1] = _bordered_solve_np(*(m[k] for m in A), r)
    return X


def _march_transposed_np(A, B, v_last):
    nsteps = A[1].shape[0]
    At = _transpose_tri(*A[:3]) + (A[4], A[3], A[5])
    Bt = _transpose_tri(*B[:3]) + (B[4], B[3], B[5])
    V = np.empty((nsteps + 1, v_last.size))
    Z = np.zeros_like(V)
    V[nsteps] = v_last
    for k in range(nsteps - 1, -1, -1):
        Z[k + 1] = _bordered_solve_np(*(m[k] for m in At), V[k + 1])
        V[k] = _bordered_matvec_np(*(m[k] for m in Bt), Z[k + 1])
    return V, Z


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _bordered_solve_nb(lo, di, up, col, row, cor, rhs, out, cp, p, q):
        # Thomas elimination on [rhs_y, col] simultaneously, then Schur step.
        n = di.size
        b = di[0]
        if b == 0.0:
            raise ZeroDivisionError("singular step matrix")
        cp[0] = up[0] / b
        p[0] = rhs[0] / b
        q[0] = col[0] / b
        for i in range(1, n):
            b = di[i] - lo[i] * cp[i - 1]
            if b == 0.0:
                raise ZeroDivisionError("singular step matrix")
            cp[i] = up[i] / b
            p[i] = (rhs[i] - lo[i] * p[i - 1]) / b
            q[i] = (col[i] - lo[i] * q[i - 1]) / b
        for i in range(n - 2, -1, -1):
            p[i] -= cp[i] * p[i + 1]
            q[i] -= cp[i] * q[i + 1]
        rp = 0.0
        rq = 0.0
        for i in range(n):
            rp += row[i] * p[i]
            rq += row[i] * q[i]
        schur = cor - rq
        if schur == 0.0:
            raise ZeroDivisionError("singular step matrix")
        z = (rhs[n] - rp) / schur
        out[n] = z
        for i in range(n):
            out[i] = p[i] - z * q[i]

    @njit(cache=True)
    def _bordered_matvec_nb(lo, di, up, col, row, cor, x, out):
        n = di.size
        acc = cor * x[n]
        for i in range(n):
            s = di[i] * x[i] + col[i] * x[n]
            if i > 0:
                s += lo[i] * x[i - 1]
            if i < n - 1:
                s += up[i] * x[i + 1]
            out[i] = s
            acc += row[i] * x[i]
        out[n] = acc

    @njit(cache=True)
    def _march_nb(alo, adi, aup, acol, arow, acor, blo, bdi, bup, bcol, brow, bcor, extra, x0):
        nsteps, n = adi.shape
        X = np.empty((nsteps + 1, n + 1))
        X[0] = x0
        r = np.empty(n + 1)
        cp = np.empty(n)
        p = np.empty(n)
        q = np.empty(n)
        for k in range(nsteps):
            _bordered_matvec_nb(blo[k], bdi[k], bup[k], bcol[k], brow[k], bcor[k], X[k], r)
            for i in range(n + 1):
                r[i] += extra[k, i]
            _bordered_solve_nb(alo[k], adi[k], aup[k], acol[k], arow[k], acor[k], r, X[k + 1], cp, p, q)
        return X

    @njit(cache=True)
    def _march_transposed_nb(alo, adi, aup, acol, arow, acor, blo, bdi, bup, bcol, brow, bcor, v_last):
        nsteps, n = adi.shape
        V = np.empty((nsteps + 1, n + 1))
        Z = np.zeros((nsteps + 1, n + 1))
        V[nsteps] = v_last
        lo_t = np.zeros(n)
        up_t = np.zeros(n)
        cp = np.empty(n)
        p = np.empty(n)
        q = np.empty(n)
        for k in range(nsteps - 1, -1, -1):
            for i in range(n):
                lo_t[i] = aup[k, i - 1] if i > 0 else 0.0
                up_t[i] = alo[k, i + 1] if i < n - 1 else 0.0
            _bordered_solve_nb(lo_t, adi[k], up_t, arow[k], acol[k], acor[k], V[k + 1], Z[k + 1], cp, p, q)
            for i in range(n):
                lo_t[i] = bup[k, i - 1] if i > 0 else 0.0
                up_t[i] = blo[k, i + 1] if i < n - 1 else 0.0
            _bordered_matvec_nb(lo_t, bdi[k], up_t, brow[k], bcol[k], bcor[k], Z[k + 1], V[k])
        return V, Z


# ---------------------------------------------------------------- dispatch


def march(A, B, extra, x0, backend=None):
    """Run ``A_k x_{k+1} = B_k x_k + extra_k`` for every step ``k``.

    ``A`` and ``B`` are 6-tuples ``(lo, di, up, col, row, cor)`` of stacked
    per-step coefficients.  Returns all iterates, ``x0`` included.
    """
    backend = backend or BACKEND
    if backend == "numba":
        try:
            return _march_nb(*A, *B, extra, x0)
        except ZeroDivisionError as exc:
            raise SingularStepError(str(exc)) from None
    return _march_np(A, B, extra, x0)


def march_transposed(A, B, v_last, backend=None):
    """Transpose of :func:`march` run backwards from ``v_last``.

    Solves ``A_k^T z_{k+1} = v_{k+1}`` then sets ``v_k = B_k^T z_{k+1}``.
    Returns ``(V, Z)``; ``Z[0]`` is zero.
    """
    backend = backend or BACKEND
    if backend == "numba":
        try:
            return _march_transposed_nb(*A, *B, v_last)
        except ZeroDivisionError as exc:
            raise SingularStepError(str(exc)) from None
    return _march_transposed_np(A, B, v_last)


def bordered_solve(lo, di, up, col, row, cor, rhs, backend=None):
    """Solve one bordered tridiagonal system."""
    backend = backend or BACKEND
    if backend == "numba":
        n = di.size
        out = np.empty(n + 1)
        try:
            _bordered_solve_nb(lo, di, up, col, row, float(cor), rhs, out, np.empty(n), np.empty(n), np.empty(n))
        except ZeroDivisionError as exc:
            raise SingularStepError(str(exc)) from None
        return out
    return _bordered_solve_np(lo, di, up, col, row, cor, rhs)
