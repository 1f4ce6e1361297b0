# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled postfilter kernel; same contract as ``_kernels_py.process_block``."""

from libc.math cimport sqrt, sin, cos, fabs

cdef double CDR_MAX = 1e4
cdef double EPS_DEN = 1e-6
cdef double EPS_COH = 1e-4
cdef double EPS_D = 1e-4
cdef double EPS_A = 1e-4
cdef double PSD_FLOOR_REL = 1e-12

cdef enum:
    DOA_INDEP = 0
    DOA_DEP = 1
    THIERGART = 2
    JEUB = 3

cdef enum:
    FLAG_LOW_ENERGY = 1
    FLAG_CLAMPED = 2
    FLAG_WARMUP = 4


cdef inline double _abs2(double x, double y) noexcept nogil:
    # magnitudes here are O(1); libm hypot's overflow guards are not needed
    return sqrt(x * x + y * y)


cdef inline double _estimate(int kind, double gr, double gi, double gn,
                             double cs, double ss, bint *clamped) noexcept nogil:
    cdef double mag2, rad, num, den, value, pnum, pden, proj, mag, er, ei, dr, di, nr, ni
    cdef bint singular = False
    if kind == DOA_INDEP:
        mag2 = gr * gr + gi * gi
        rad = (gn - gr) * (gn - gr) + gi * gi * (1.0 - gn * gn)
        if rad < 0.0:
            rad = 0.0
        num = gn * gr - mag2 - sqrt(rad)
        den = mag2 - 1.0
        if fabs(den) < EPS_DEN:
            singular = True
        else:
            value = num / den
    elif kind == DOA_DEP:
        pnum = 1.0 - gn * cs
        pden = _abs2(gn - cs, ss)
        den = cs * gr + ss * gi - 1.0
        if fabs(den) < EPS_DEN or pden < EPS_DEN:
            singular = True
        else:
            value = pnum / pden * _abs2(gn - gr, gi) / fabs(den)
    elif kind == THIERGART:
        mag = _abs2(gr, gi)
        if mag > 0.0:
            er = gr / mag
            ei = gi / mag
        else:
            er = 1.0
            ei = 0.0
        dr = gr - er
        di = gi - ei
        den = dr * dr + di * di
        if sqrt(den) < EPS_DEN:
            singular = True
        else:
            nr = gn - gr
            ni = -gi
            value = (nr * dr + ni * di) / den
    else:
        proj = cs * gr + ss * gi
        den = proj - 1.0
        if fabs(den) < EPS_DEN:
            singular = True
        else:
            value = (gn - proj) / den
    if singular:
        clamped[0] = True
        return CDR_MAX
    if value < 0.0:
        value = 0.0
    if value >= CDR_MAX:
        clamped[0] = True
        return CDR_MAX
    return value


def process_block(const double complex[:, :, ::1] X,
                  const double[:, ::1] dtau,
                  const double[:, ::1] a_gamma,
                  const double[::1] freqs,
                  const double[:, ::1] gamma_n,
                  const Py_ssize_t[::1] pair_p,
                  const Py_ssize_t[::1] pair_q,
                  double[:, ::1] auto_psd,
                  double complex[:, ::1] cross_psd,
                  long frames_seen, double lam, int estimator, double mu,
                  double g_min, long warmup,
                  double[:, ::1] gain, double[:, ::1] dbar,
                  double[:, ::1] cdr_in, double[:, ::1] cdr_bf,
                  unsigned char[:, ::1] flags):
    cdef Py_ssize_t n_frames = X.shape[0]
    cdef Py_ssize_t n_ch = X.shape[1]
    cdef Py_ssize_t n_bins = X.shape[2]
    cdef Py_ssize_t n_pairs = pair_p.shape[0]
    cdef Py_ssize_t l, n, f, k, p, q
    cdef double one_m = 1.0 - lam
    cdef double total, floor, xr, xi, yr, yi, ap, aq, denom, gr, gi, mag, scale
    cdef double gn, phase, cs, ss, cdr, dsum, d, ci, cb, a, g
    cdef double limit = 1.0 - EPS_COH
    cdef double two_pi = 6.283185307179586
    cdef bint low, clamped, needs_doa = estimator == DOA_DEP or estimator == JEUB
    cdef unsigned char fl
    cdef double complex c

    with nogil:
        for l in range(n_frames):
            total = 0.0
            for n in range(n_ch):
                for f in range(n_bins):
                    xr = X[l, n, f].real
                    xi = X[l, n, f].imag
                    auto_psd[n, f] = lam * auto_psd[n, f] + one_m * (xr * xr + xi * xi)
                    total = total + auto_psd[n, f]
            for k in range(n_pairs):
                p = pair_p[k]
                q = pair_q[k]
                for f in range(n_bins):
                    xr = X[l, p, f].real
                    xi = X[l, p, f].imag
                    yr = X[l, q, f].real
                    yi = X[l, q, f].imag
                    c = cross_psd[k, f]
                    cross_psd[k, f] = (lam * c.real + one_m * (xr * yr + xi * yi)) \
                        + 1j * (lam * c.imag + one_m * (xi * yr - xr * yi))
            frames_seen += 1
            floor = PSD_FLOOR_REL * (total / (n_ch * n_bins))

            for f in range(n_bins):
                fl = 0
                dsum = 0.0
                clamped = False
                for k in range(n_pairs):
                    p = pair_p[k]
                    q = pair_q[k]
                    gn = gamma_n[k, f]
                    ap = auto_psd[p, f]
                    aq = auto_psd[q, f]
                    low = ap <= floor or aq <= floor
                    if low:
                        fl = fl | FLAG_LOW_ENERGY
                        gr = gn
                        gi = 0.0
                    else:
                        denom = sqrt(ap * aq)
                        gr = cross_psd[k, f].real / denom
                        gi = cross_psd[k, f].imag / denom
                        mag = _abs2(gr, gi)
                        if mag > limit:
                            scale = limit / mag
                            gr = gr * scale
                            gi = gi * scale
                    if needs_doa:
                        phase = two_pi * freqs[f] * dtau[l, k]
                        cs = cos(phase)
                        ss = sin(phase)
                    else:
                        cs = 1.0
                        ss = 0.0
                    cdr = _estimate(estimator, gr, gi, gn, cs, ss, &clamped)
                    dsum = dsum + 1.0 / (1.0 + cdr)
                d = dsum / n_pairs
                if d < EPS_D:
                    d = EPS_D
                elif d > 1.0:
                    d = 1.0
                ci = (1.0 - d) / d
                a = a_gamma[l, f]
                if a < EPS_A:
                    a = EPS_A
                cb = ci / a
                if cb >= CDR_MAX:
                    cb = CDR_MAX
                    clamped = True
                g = 1.0 - mu / (1.0 + cb)
                if g < g_min:
                    g = g_min
                if clamped:
                    fl = fl | FLAG_CLAMPED
                if frames_seen <= warmup:
                    g = 1.0
                    fl = fl | FLAG_WARMUP
                gain[l, f] = g
                dbar[l, f] = d
                cdr_in[l, f] = ci
                cdr_bf[l, f] = cb
                flags[l, f] = fl
    return frames_seen
