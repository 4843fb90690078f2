"""Dense nonsymmetric eigenvalues: balancing, Householder reduction to Hessenberg form
and the Francis double-shift QR iteration, compiled with numba."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import SolverError

_MACH_EPS = np.finfo(float).eps


@njit(cache=True)
def _balance(a):
    # Parlett-Reinsch diagonal scaling by powers of two; returns the scaling vector
    n = a.shape[0]
    scale = np.ones(n)
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            r = 0.0
            c = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j, i])
                    r += abs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / radix
                f = 1.0
                s = c + r
                while c < g:
                    f *= radix
                    c *= sqrdx
                g = r * radix
                while c > g:
                    f /= radix
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    scale[i] *= f
                    for j in range(n):
                        a[i, j] *= g
                    for j in range(n):
                        a[j, i] *= f
    return scale


@njit(cache=True)
def _hessenberg(a):
    # Householder reflections; loops ordered for row-major access
    n = a.shape[0]
    v = np.zeros(n)
    s = np.zeros(n)
    for k in range(n - 2):
        alpha = 0.0
        for i in range(k + 1, n):
            alpha += a[i, k] * a[i, k]
        alpha = math.sqrt(alpha)
        if alpha == 0.0:
            continue
        if a[k + 1, k] > 0:
            alpha = -alpha
        vn = 0.0
        for i in range(k + 1, n):
            v[i] = a[i, k]
        v[k + 1] -= alpha
        for i in range(k + 1, n):
            vn += v[i] * v[i]
        if vn == 0.0:
            continue
        vn = math.sqrt(vn)
        for i in range(k + 1, n):
            v[i] /= vn
        # rows: A <- (I - 2 v v^T) A
        for j in range(k, n):
            s[j] = 0.0
        for i in range(k + 1, n):
            vi = v[i]
            for j in range(k, n):
                s[j] += vi * a[i, j]
        for i in range(k + 1, n):
            vi = 2.0 * v[i]
            for j in range(k, n):
                a[i, j] -= vi * s[j]
        # columns: A <- A (I - 2 v v^T)
        for i in range(n):
            t = 0.0
            for j in range(k + 1, n):
                t += a[i, j] * v[j]
            t *= 2.0
            for j in range(k + 1, n):
                a[i, j] -= t * v[j]
        for i in range(k + 2, n):
            a[i, k] = 0.0
    return a


@njit(cache=True)
def _hqr(a, max_its):
    """Eigenvalues of an upper Hessenberg matrix (overwritten). Returns (wr, wi, status),
    status = -1 on success or the index of the eigenvalue that failed to converge."""
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = 0.0
    for i in range(n):
        for j in range(max(i - 1, 0), n):
            anorm += abs(a[i, j])
    nn = n - 1
    t = 0.0
    x = y = z = w = p = q = r = s = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= _MACH_EPS * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = x + z
                    wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = 0.0
                    wi[nn] = 0.0
                else:
                    wr[nn - 1] = x + p
                    wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if its >= max_its:
                return wr, wi, nn
            if its > 0 and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = 0.75 * s
                y = x
                w = -0.4375 * s * s
            its += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u <= _MACH_EPS * v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            k = m
            while k <= nn - 1:
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = 0.0
                    if k != nn - 1:
                        r = a[k + 2, k - 1]
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s != 0.0:
                    if k == m:
                        if l != m:
                            a[k, k - 1] = -a[k, k - 1]
                    else:
                        a[k, k - 1] = -s * x
                    p += s
                    x = p / s
                    y = q / s
                    z = r / s
                    q /= p
                    r /= p
                    for j in range(k, nn + 1):
                        p = a[k, j] + q * a[k + 1, j]
                        if k != nn - 1:
                            p += r * a[k + 2, j]
                            a[k + 2, j] -= p * z
                        a[k + 1, j] -= p * y
                        a[k, j] -= p * x
                    mmin = nn if nn < k + 3 else k + 3
                    for i in range(l, mmin + 1):
                        p = x * a[i, k] + y * a[i, k + 1]
                        if k != nn - 1:
                            p += z * a[i, k + 2]
                            a[i, k + 2] -= p * r
                        a[i, k + 1] -= p * q
                        a[i, k] -= p
                k += 1
    return wr, wi, -1


def hessenberg(a: np.ndarray) -> np.ndarray:
    """Upper Hessenberg matrix orthogonally similar to ``a``."""
    return _hessenberg(np.array(a, dtype=float, order="C"))


def eigvals_qr(a: np.ndarray, balance: bool = True, max_its: int = 60) -> np.ndarray:
    """All eigenvalues of a real square matrix by Hessenberg reduction and shifted QR."""
    a = np.array(a, dtype=float, order="C")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("eigvals_qr needs a square matrix")
    if not np.all(np.isfinite(a)):
        raise SolverError("matrix has non-finite entries")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n == 1:
        return a[0].astype(complex)
    if balance:
        _balance(a)
    _hessenberg(a)
    h = a.copy()
    wr, wi, status = _hqr(a, max_its)
    if status >= 0:
        dump = {"failed_index": int(status), "subdiagonal": np.diag(h, -1)[max(status - 3, 0):status + 1].tolist()}
        raise SolverError(f"QR iteration did not converge: {dump}", float(status))
    return wr + 1j * wi
