# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner k-integrals of the real-frequency stress.

Same algorithm as ``_stress_kernel_py``: 21-point Gauss-Kronrod panels,
worst-panel bisection driven by a binary max-heap. The refinement loop runs
without the GIL.
"""
from libc.math cimport sin, cos, exp, expm1, sqrt
from libc.complex cimport csqrt, cexp, cabs, creal, cimag
from libc.stdlib cimport malloc, free

cdef double XGK[11]
cdef double WGK[11]
cdef double WG5[5]
XGK[:] = [0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
          0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
          0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
          0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
          0.294392862701460198131126603103866, 0.148874338981631210884826001129720, 0.0]
WGK[:] = [0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
          0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
          0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
          0.123491976262065851077600525532816, 0.134709217311473325928054001771707,
          0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
          0.149445554002916905664936468389821]
WG5[:] = [0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
          0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
          0.295524224714752870173892994651483]

BACKEND = "cython"

cdef double NOISE_FLOOR = 1e-14


cdef inline double complex cexpm1(double complex z) noexcept nogil:
    cdef double x = creal(z), y = cimag(z)
    cdef double s = sin(0.5 * y)
    return (expm1(x) * cos(y) - 2.0 * s * s) + 1j * (exp(x) * sin(y))


cdef struct Params:
    double K
    double d
    double complex w2
    double complex delta
    double complex eps
    double complex rb2
    double complex one_m_rb2
    int toy
    int region


cdef inline double complex qw_fresnel(double complex q, double complex km, double complex e,
                                      double d) noexcept nogil:
    # q r^2 e^{-2qd} / (1 - r^2 e^{-2qd}) for r = (e q - km)/(e q + km)
    cdef double complex x = 2.0 * q * d
    cdef double complex E = cexp(-x)
    cdef double complex m = -cexpm1(-x)
    cdef double complex a = e * q
    cdef double complex N = (a * a + km * km) * m + 2.0 * a * km * (1.0 + E)
    return q * (a - km) * (a - km) * E / N


cdef inline double complex kw_const(double complex k, double complex r2, double complex one_m_r2,
                                    double d) noexcept nogil:
    cdef double complex x = 2.0 * k * d
    cdef double complex E = cexp(-x)
    cdef double complex m = -cexpm1(-x)
    return k * r2 * E / (one_m_r2 + r2 * m)


cdef inline double complex vac_q(double complex z) noexcept nogil:
    # Re q >= 0; on the cut take Im q <= 0
    if cimag(z) == 0.0 and creal(z) < 0.0:
        return -1j * sqrt(-creal(z))
    return csqrt(z)


cdef inline double complex integrand(double t, Params* p) noexcept nogil:
    cdef double complex q, km, z
    cdef double K = p.K, st, ct, k, jac
    if p.region == 2:
        return -t * kw_const(t, p.rb2, p.one_m_rb2, p.d)
    if p.region == 0:
        st = sin(t)
        ct = cos(t)
        k = K * st
        jac = K * K * st * ct
        z = p.delta - (K * ct) * (K * ct)
    else:
        k = sqrt(t * t + K * K)
        jac = t
        z = p.delta + t * t
    q = vac_q(z)
    if p.toy:
        return jac * (2.0 * kw_const(q, p.rb2, p.one_m_rb2, p.d) - kw_const(k, p.rb2, p.one_m_rb2, p.d))
    km = csqrt(z + (1.0 - p.eps) * p.w2)
    return jac * (qw_fresnel(q, km, 1.0, p.d) + qw_fresnel(q, km, p.eps, p.d)
                  - kw_const(k, p.rb2, p.one_m_rb2, p.d))


cdef void gk21(double a, double b, Params* p, double complex* res, double* err) noexcept nogil:
    cdef double h = 0.5 * (b - a), c = 0.5 * (a + b)
    cdef double complex fc = integrand(c, p), f1, f2
    cdef double complex rk = WGK[10] * fc, rg = 0.0
    cdef int j
    for j in range(10):
        f1 = integrand(c - h * XGK[j], p)
        f2 = integrand(c + h * XGK[j], p)
        rk = rk + WGK[j] * (f1 + f2)
        if j % 2 == 1:
            rg = rg + WG5[j // 2] * (f1 + f2)
    res[0] = rk * h
    err[0] = cabs((rk - rg) * h)


cdef inline bint worse(double* er, int i, int j) noexcept nogil:
    # heap order: larger error first, ties broken by lower panel index
    return er[i] > er[j] or (er[i] == er[j] and i < j)


cdef inline void heap_push(int* hp, int* hn, double* er, int idx) noexcept nogil:
    cdef int i = hn[0], par, tmp
    hp[i] = idx
    hn[0] += 1
    while i > 0:
        par = (i - 1) // 2
        if not worse(er, hp[i], hp[par]):
            break
        tmp = hp[par]; hp[par] = hp[i]; hp[i] = tmp
        i = par


cdef inline int heap_pop(int* hp, int* hn, double* er) noexcept nogil:
    cdef int top = hp[0], i = 0, l, r, big, tmp
    hn[0] -= 1
    hp[0] = hp[hn[0]]
    while True:
        l = 2 * i + 1
        r = l + 1
        big = i
        if l < hn[0] and worse(er, hp[l], hp[big]):
            big = l
        if r < hn[0] and worse(er, hp[r], hp[big]):
            big = r
        if big == i:
            break
        tmp = hp[big]; hp[big] = hp[i]; hp[i] = tmp
        i = big
    return top


cdef inline double target(double complex tot, double absum, double rel_tol, double abs_tol) noexcept nogil:
    cdef double t = rel_tol * cabs(tot)
    if abs_tol > t:
        t = abs_tol
    if NOISE_FLOOR * absum > t:
        t = NOISE_FLOOR * absum
    return t


cdef void resum(int n, double complex* vl, double* er, double complex* tot, double* etot,
                double* absum) noexcept nogil:
    cdef int i
    tot[0] = 0.0
    etot[0] = 0.0
    absum[0] = 0.0
    for i in range(n):
        tot[0] = tot[0] + vl[i]
        etot[0] = etot[0] + er[i]
        absum[0] = absum[0] + cabs(vl[i])


cdef tuple adapt(double[::1] bps, Params* p, double rel_tol, double abs_tol, int max_sub):
    cdef int n = bps.shape[0] - 1
    if n < 1:
        raise ValueError("need at least two breakpoints")
    cdef int cap = n + max_sub + 2
    cdef double* lo = <double*>malloc(cap * sizeof(double))
    cdef double* hi = <double*>malloc(cap * sizeof(double))
    cdef double* er = <double*>malloc(cap * sizeof(double))
    cdef double complex* vl = <double complex*>malloc(cap * sizeof(double complex))
    cdef int* hp = <int*>malloc(cap * sizeof(int))
    if lo == NULL or hi == NULL or er == NULL or vl == NULL or hp == NULL:
        free(lo); free(hi); free(er); free(vl); free(hp)
        raise MemoryError()
    cdef int hn = 0, i, imax, nsub = 0
    cdef double complex tot = 0.0, r1, r2
    cdef double etot = 0.0, e1, e2, m, absum = 0.0
    cdef bint conv, nan_seen = False
    with nogil:
        for i in range(n):
            lo[i] = bps[i]
            hi[i] = bps[i + 1]
            gk21(lo[i], hi[i], p, &vl[i], &er[i])
            heap_push(hp, &hn, er, i)
        resum(n, vl, er, &tot, &etot, &absum)
        while etot > target(tot, absum, rel_tol, abs_tol) and nsub < max_sub:
            if etot != etot:
                nan_seen = True
                break
            imax = heap_pop(hp, &hn, er)
            m = 0.5 * (lo[imax] + hi[imax])
            if m <= lo[imax] or m >= hi[imax]:
                break
            gk21(lo[imax], m, p, &r1, &e1)
            gk21(m, hi[imax], p, &r2, &e2)
            tot = tot + (r1 + r2 - vl[imax])
            etot = etot + (e1 + e2 - er[imax])
            absum = absum + (cabs(r1) + cabs(r2) - cabs(vl[imax]))
            lo[n] = m; hi[n] = hi[imax]; vl[n] = r2; er[n] = e2
            hi[imax] = m; vl[imax] = r1; er[imax] = e1
            heap_push(hp, &hn, er, imax)
            heap_push(hp, &hn, er, n)
            n += 1
            nsub += 1
            if nsub % 64 == 0:
                # incremental sums drift; refresh them
                resum(n, vl, er, &tot, &etot, &absum)
        resum(n, vl, er, &tot, &etot, &absum)
        conv = etot <= target(tot, absum, rel_tol, abs_tol)
    free(lo); free(hi); free(er); free(vl); free(hp)
    if nan_seen or tot != tot:
        raise ArithmeticError("stress kernel integrand returned NaN")
    return complex(tot), etot, n * 21, bool(conv)


cdef void set_params(Params* p, double complex omega, double d, double c, double complex eps,
                     double complex rb2, double complex one_m_rb2, bint toy):
    cdef double wr = omega.real / c, wi = omega.imag / c
    p.K = wr
    p.w2 = omega * omega / (c * c)
    # K^2 - omega^2/c^2, formed without cancellation
    p.delta = wi * wi - 2j * wr * wi
    p.d = d
    p.eps = eps
    p.rb2 = rb2
    p.one_m_rb2 = one_m_rb2
    p.toy = toy


def calt_inner(double complex omega, double d, double c, double complex eps, double complex rb2,
               double complex one_m_rb2, bint toy, double[::1] bps_theta, double[::1] bps_t,
               double rel_tol, double abs_tol, int max_sub):
    """Propagating (theta) and evanescent (t) pieces of the transverse k-integral.

    Returns two ``(value, error, evaluations, converged)`` tuples. Both values
    are integrals of ``k dk {q W_TE + q W_TM - k W(rbar^2)}`` without the
    1/(2 pi) prefactor.
    """
    cdef Params p
    set_params(&p, omega, d, c, eps, rb2, one_m_rb2, toy)
    p.region = 0
    a = adapt(bps_theta, &p, rel_tol, abs_tol, max_sub)
    p.region = 1
    b = adapt(bps_t, &p, rel_tol, abs_tol, max_sub)
    return a, b


def long_inner(double d, double complex rb2, double complex one_m_rb2, double[::1] bps_k,
               double rel_tol, double abs_tol, int max_sub):
    """``-int k^2 W(2 k d, rbar^2) dk`` as ``(value, error, evaluations, converged)``."""
    cdef Params p
    p.K = 0.0
    p.d = d
    p.rb2 = rb2
    p.one_m_rb2 = one_m_rb2
    p.toy = 0
    p.region = 2
    return adapt(bps_k, &p, rel_tol, abs_tol, max_sub)


def eval_integrand(int region, double t, double complex omega, double d, double c,
                   double complex eps, double complex rb2, double complex one_m_rb2, bint toy):
    """Single integrand value, for testing against the pure-Python backend."""
    cdef Params p
    set_params(&p, omega, d, c, eps, rb2, one_m_rb2, toy)
    p.region = region
    return integrand(t, &p)
