# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernel; see ``_kernel_py`` for the reference version.

Built-in coefficient codes are evaluated in C and the integration loop runs
without the GIL.  Callback coefficients re-acquire the GIL per evaluation.
"""

import numpy as np

from libc.math cimport cos, sin, log, sqrt, exp, pow, isfinite, nextafter, INFINITY, fabs

from ._tableau import A as _A, B as _B, C as _C, E3 as _E3, E5 as _E5, N_STAGES as _NS

NAME = "cython"

ctypedef double complex cplx

DEF NS = 12

cdef double TA[NS][NS]
cdef double TB[NS]
cdef double TC[NS]
cdef double TE3[NS + 1]
cdef double TE5[NS + 1]

assert _NS == NS
for _i in range(NS):
    for _j in range(NS):
        TA[_i][_j] = _A[_i][_j] if _j < len(_A[_i]) else 0.0
    TB[_i] = _B[_i]
    TC[_i] = _C[_i]
for _i in range(NS + 1):
    TE3[_i] = _E3[_i]
    TE5[_i] = _E5[_i]

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef double ERR_EXP = -1.0 / 8.0

cdef double SH1 = exp(1.0)
cdef double SH2 = exp(SH1)
cdef double SH3 = exp(SH2)


cdef struct Sys:
    int system
    int kind
    double p0
    double p1
    void* cb
    double lam
    double s_ref


cdef int coef_eval(Sys* sy, double t, double* b, double* bp) noexcept nogil:
    cdef double x, v, d, den, rate, lg, sc
    cdef int n, k, j
    if sy.kind == 0:
        b[0] = 0.0
        bp[0] = 0.0
    elif sy.kind == 1:
        x = 1.0 + t
        v = sy.p0 * pow(x, -sy.p1)
        b[0] = v
        bp[0] = -sy.p1 * v / x
    elif sy.kind == 2:
        n = <int>sy.p1
        den = 1.0 + t
        rate = 1.0 / den
        for k in range(1, n + 1):
            if k == 1:
                x = SH1 + t
            elif k == 2:
                x = SH2 + t
            else:
                x = SH3 + t
            d = 1.0
            for j in range(k):
                d = d / x
                x = log(x)
            den = den * x
            rate = rate + d / x
        v = sy.p0 / den
        b[0] = v
        bp[0] = -v * rate
    elif sy.kind == 3:
        sc = sy.p0
        x = SH1 + t
        lg = log(x)
        v = 0.25 / x + 1.0 / (x * lg)
        d = -0.25 / (x * x) - (lg + 1.0) / ((x * lg) * (x * lg))
        b[0] = sc * v
        bp[0] = sc * d
    else:
        with gil:
            try:
                res = (<object>sy.cb)(t)
                b[0] = float(res[0])
                bp[0] = float(res[1])
            except Exception:
                return 1
    return 0


cdef int rhs(Sys* sy, double t, cplx* y, cplx* out) noexcept nogil:
    cdef double b, bp, beta, dbeta, den, d, im, off, dd, x, c, s, f
    cdef cplx f00, f01, f10, f11, e, ec
    if coef_eval(sy, t, &b, &bp) != 0:
        return 1
    if sy.system == 0:
        f00 = 0.0
        f01 = sy.lam
        f10 = -sy.lam
        f11 = -2.0 * b
    elif sy.system == 1:
        beta = b / (2.0 * sy.lam)
        dbeta = bp / (2.0 * sy.lam)
        den = 1.0 - beta * beta
        d = beta * dbeta / den
        im = b * beta / den
        off = -b * beta * beta / den
        dd = dbeta / den
        x = 2.0 * sy.lam * (t - sy.s_ref)
        e = cos(x) + 1j * sin(x)
        ec = cos(x) - 1j * sin(x)
        f00 = d + 1j * im
        f01 = e * (off - 1j * dd)
        f10 = ec * (off + 1j * dd)
        f11 = d - 1j * im
    else:
        x = sy.lam * (t - sy.s_ref)
        c = cos(x)
        s = sin(x)
        f = -2.0 * b
        f00 = f * s * s
        f01 = -f * s * c
        f10 = -f * s * c
        f11 = f * c * c
    out[0] = f00 * y[0] + f01 * y[2]
    out[1] = f00 * y[1] + f01 * y[3]
    out[2] = f10 * y[0] + f11 * y[2]
    out[3] = f10 * y[1] + f11 * y[3]
    return 0


cdef inline double cabs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double cabs_(cplx z) noexcept nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


cdef int run(Sys* sy, double t0, cplx* y0, double* times, int n_out, cplx* out,
             double rtol, double atol, double hmax, long max_steps,
             long* nsteps_out, double* t_fail) noexcept nogil:
    cdef double t = t0, h_abs, h, h0, h1, d0, d1, d2, dm, target, t_new, err
    cdef double e5sq, e3sq, sc, factor, min_step, a
    cdef cplx y[4]
    cdef cplx y_new[4]
    cdef cplx yi[4]
    cdef cplx K[NS + 1][4]
    cdef cplx acc[4]
    cdef cplx s5, s3
    cdef int i, j, c, k_out = 0, land, rejected = 0
    cdef long nsteps = 0
    for c in range(4):
        y[c] = y0[c]
    nsteps_out[0] = 0
    t_fail[0] = t
    while k_out < n_out and times[k_out] <= t:
        for c in range(4):
            out[4 * k_out + c] = y[c]
        k_out += 1
    if k_out == n_out:
        return 0

    if rhs(sy, t, y, K[0]) != 0:
        return 4
    d0 = 0.0
    d1 = 0.0
    for c in range(4):
        sc = atol + cabs_(y[c]) * rtol
        d0 += cabs2(y[c] / sc)
        d1 += cabs2(K[0][c] / sc)
    d0 = sqrt(d0 / 4.0)
    d1 = sqrt(d1 / 4.0)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > hmax:
        h0 = hmax
    for c in range(4):
        yi[c] = y[c] + h0 * K[0][c]
    if rhs(sy, t + h0, yi, K[1]) != 0:
        return 4
    d2 = 0.0
    for c in range(4):
        sc = atol + cabs_(y[c]) * rtol
        d2 += cabs2((K[1][c] - K[0][c]) / sc)
    d2 = sqrt(d2 / 4.0) / h0
    dm = d1 if d1 > d2 else d2
    if dm <= 1e-15:
        h1 = h0 * 1e-3
        if h1 < 1e-6:
            h1 = 1e-6
    else:
        h1 = pow(0.01 / dm, 1.0 / 8.0)
    h_abs = 100.0 * h0
    if h1 < h_abs:
        h_abs = h1
    if hmax < h_abs:
        h_abs = hmax

    while k_out < n_out:
        target = times[k_out]
        if nsteps >= max_steps:
            nsteps_out[0] = nsteps
            t_fail[0] = t
            return 2
        min_step = 10.0 * (nextafter(t, INFINITY) - t)
        if h_abs < min_step:
            nsteps_out[0] = nsteps
            t_fail[0] = t
            return 1
        h = h_abs
        land = 0
        if t + h >= target:
            h = target - t
            land = 1
        else:
            # step by the representable increment so that t tracks y exactly
            h = (t + h) - t
        for i in range(1, NS):
            for c in range(4):
                acc[c] = 0.0
            for j in range(i):
                a = TA[i][j]
                if a != 0.0:
                    for c in range(4):
                        acc[c] = acc[c] + a * K[j][c]
            for c in range(4):
                yi[c] = y[c] + h * acc[c]
            if rhs(sy, t + TC[i] * h, yi, K[i]) != 0:
                t_fail[0] = t
                return 4
        for c in range(4):
            acc[c] = 0.0
        for j in range(NS):
            a = TB[j]
            if a != 0.0:
                for c in range(4):
                    acc[c] = acc[c] + a * K[j][c]
        for c in range(4):
            y_new[c] = y[c] + h * acc[c]
        if land:
            t_new = target
        else:
            t_new = t + h
        if rhs(sy, t_new, y_new, K[NS]) != 0:
            t_fail[0] = t
            return 4

        e5sq = 0.0
        e3sq = 0.0
        for c in range(4):
            d0 = cabs_(y[c])
            d1 = cabs_(y_new[c])
            sc = atol + (d0 if d0 > d1 else d1) * rtol
            s5 = 0.0
            s3 = 0.0
            for j in range(NS + 1):
                s5 = s5 + TE5[j] * K[j][c]
                s3 = s3 + TE3[j] * K[j][c]
            e5sq += cabs2(s5 / sc)
            e3sq += cabs2(s3 / sc)
        if e5sq == 0.0 and e3sq == 0.0:
            err = 0.0
        else:
            err = fabs(h) * e5sq / sqrt((e5sq + 0.01 * e3sq) * 4.0)
        if not isfinite(err):
            nsteps_out[0] = nsteps
            t_fail[0] = t
            return 3

        if err < 1.0:
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * pow(err, ERR_EXP)
                if factor > MAX_FACTOR:
                    factor = MAX_FACTOR
            if rejected and factor > 1.0:
                factor = 1.0
            if not land:
                h_abs = h_abs * factor
            elif factor > 1.0:
                if h * factor > h_abs:
                    h_abs = h * factor
            else:
                h_abs = h_abs * factor
            if h_abs > hmax:
                h_abs = hmax
            rejected = 0
            t = t_new
            for c in range(4):
                y[c] = y_new[c]
                K[0][c] = K[NS][c]
            nsteps += 1
            while k_out < n_out and times[k_out] <= t:
                for c in range(4):
                    out[4 * k_out + c] = y[c]
                k_out += 1
        else:
            factor = SAFETY * pow(err, ERR_EXP)
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            if land:
                h_abs = h * factor
            else:
                h_abs = h_abs * factor
            rejected = 1
    nsteps_out[0] = nsteps
    t_fail[0] = t
    return 0


def coefficient(int kind, params, callback, double t):
    """Return ``(b(t), b'(t))`` for a kernel coefficient code."""
    cdef Sys sy
    cdef double b, bp
    sy.kind = kind
    sy.p0 = params[0] if len(params) > 0 else 0.0
    sy.p1 = params[1] if len(params) > 1 else 0.0
    sy.cb = <void*>callback
    if coef_eval(&sy, t, &b, &bp) != 0:
        raise RuntimeError("coefficient callback failed")
    return b, bp


def propagate(int system, int kind, params, callback, double lam, double s_ref,
              double t0, y0, times, double rtol, double atol, double hmax,
              long max_steps):
    """Same contract as ``_kernel_py.propagate``."""
    cdef Sys sy
    cdef double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef int n_out = tv.shape[0]
    out_arr = np.zeros((max(n_out, 1), 4), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    cdef cplx y[4]
    cdef long nsteps = 0
    cdef double t_fail = t0
    cdef int status
    cdef int c
    for c in range(4):
        y[c] = complex(y0[c])
    sy.system = system
    sy.kind = kind
    sy.p0 = params[0] if len(params) > 0 else 0.0
    sy.p1 = params[1] if len(params) > 1 else 0.0
    sy.cb = <void*>callback
    sy.lam = lam
    sy.s_ref = s_ref
    if n_out == 0:
        return [], 0, 0, t0
    if kind == 4:
        status = run(&sy, t0, y, &tv[0], n_out, &out[0, 0], rtol, atol, hmax,
                     max_steps, &nsteps, &t_fail)
    else:
        with nogil:
            status = run(&sy, t0, y, &tv[0], n_out, &out[0, 0], rtol, atol, hmax,
                         max_steps, &nsteps, &t_fail)
    n_done = n_out
    if status != 0:
        n_done = int(np.searchsorted(np.asarray(tv), t_fail, side="right"))
    states = [tuple(out_arr[k]) for k in range(n_done)]
    return states, nsteps, status, t_fail
