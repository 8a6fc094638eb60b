# cython: language_level=3
"""Compiled inner loops.

Every function here has a line-for-line twin in :mod:`seolock._pykernels`;
the two must accept the same arguments and return the same values (up to
floating-point rounding).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, floor, sqrt, M_PI

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI


cdef inline double _perturbation(double q, const long[:] ks, const double[:] amp,
                                 const double[:] off, Py_ssize_t nh) noexcept nogil:
    cdef double frac = q - floor(q)
    cdef double s = 0.0
    cdef Py_ssize_t j
    for j in range(nh):
        s += amp[j] * cos(TWO_PI * ks[j] * frac + off[j])
    return s


def iterate_lift(double q0, Py_ssize_t n, double alpha, const long[:] ks,
                 const double[:] amp, const double[:] off):
    """Lifted orbit ``q[0..n]`` of ``q -> q + alpha + sum_j amp_j cos(2 pi k_j q + off_j)``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n + 1, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i, nh = ks.shape[0]
    cdef double q = q0
    with nogil:
        o[0] = q
        for i in range(n):
            q = q + alpha + _perturbation(q, ks, amp, off, nh)
            o[i + 1] = q
    return out


def winding_batch(double q0, const double[:] alpha, const long[:] ks,
                  const double[:, :] amp, const double[:, :] off,
                  Py_ssize_t n_transient, Py_ssize_t n_avg):
    """Winding number for each row ``i`` (parameters ``alpha[i], amp[i], off[i]``)."""
    cdef Py_ssize_t na = alpha.shape[0], nh = ks.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(na, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i, it
    cdef double q, qs, a
    with nogil:
        for i in range(na):
            q = q0
            a = alpha[i]
            for it in range(n_transient):
                q = q + a + _perturbation(q, ks, amp[i], off[i], nh)
            qs = q
            for it in range(n_avg):
                q = q + a + _perturbation(q, ks, amp[i], off[i], nh)
            o[i] = (q - qs) / n_avg
    return out


def envelope_em(double complex a0, Py_ssize_t step0, double dt, Py_ssize_t n_steps,
                Py_ssize_t stride, double gamma0, double gamma2, double detune0,
                double omega2, double frame_omega, const double[:] f_amp,
                const double[:] f_w, const double[:] f_ph, const double[:, :] noise,
                double limit):
    """Fixed-step Euler-Maruyama for the envelope in a frame rotating at ``frame_omega``.

    Step ``i`` starts at ``(step0 + i) * dt``; integer step counting keeps the
    time grid identical however a run is split into calls. ``noise`` holds
    pre-scaled increments (shape ``(n_steps, 2)``) or has zero rows
    for noise-free runs. Returns ``(samples, final_state, steps_done, blew_up)``.
    ``samples`` are rotated back to the lab frame, ``samples[0]`` being the
    start state, with one sample kept every ``stride`` steps;
    ``final_state`` stays in the rotating frame for the next call.
    """
    cdef Py_ssize_t n_samples = n_steps // stride + 1
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n_samples, dtype=np.complex128)
    cdef double complex[:] o = out
    cdef Py_ssize_t nf = f_amp.shape[0]
    cdef bint noisy = noise.shape[0] > 0
    cdef double ar = a0.real, ai = a0.imag
    cdef double r2, g, w, tm, tt, xi, dr, di, c, s
    cdef Py_ssize_t i, j, k = 1
    cdef bint blew_up = False
    cdef double lim2 = limit * limit
    tt = step0 * dt
    o[0] = a0 * (cos(frame_omega * tt) - 1j * sin(frame_omega * tt))
    with nogil:
        for i in range(n_steps):
            tm = (step0 + i + 0.5) * dt
            r2 = ar * ar + ai * ai
            g = gamma0 + gamma2 * r2
            w = detune0 + omega2 * r2
            xi = 0.0
            for j in range(nf):
                xi += f_amp[j] * sin(f_w[j] * tm + f_ph[j])
            c = cos(frame_omega * tm)
            s = sin(frame_omega * tm)
            # -(g + i w) a + xi e^{i frame_omega t}
            dr = -(g * ar - w * ai) + xi * c
            di = -(g * ai + w * ar) + xi * s
            ar = ar + dr * dt
            ai = ai + di * dt
            if noisy:
                ar = ar + noise[i, 0]
                ai = ai + noise[i, 1]
            if ar * ar + ai * ai > lim2 or ar != ar or ai != ai:
                blew_up = True
                break
            if (i + 1) % stride == 0:
                # back to the lab frame, one libm call per sample
                tt = (step0 + i + 1) * dt
                c = cos(frame_omega * tt)
                s = sin(frame_omega * tt)
                o[k] = (ar * c + ai * s) + 1j * (ai * c - ar * s)
                k += 1
    steps = i + 1 if n_steps > 0 else 0
    return out[:k], ar + 1j * ai, steps, blew_up


cdef inline double _intensity(double x, double c, double kopt, double xr,
                              double bp2) noexcept nogil:
    return c / (1.0 - cos(kopt * (x - xr)) + bp2)


def full_rk4(double x0, double v0, double T0, double dt, Py_ssize_t n_steps,
             Py_ssize_t stride, double gamma0, double omega0, double beta,
             double theta, double eta, double kappa, double c, double kopt,
             double xr, double bp2, const double[:] p_half, double limit):
    """Classical RK4 for the coupled resonator/thermal system.

    ``p_half[2 i + m]`` is the injected power at ``t0 + (i + m/2) dt``.
    Returns ``(x_samples, v_samples, T_samples, steps_done, blew_up, (x, v, T))``
    with the final state last.
    """
    cdef Py_ssize_t n_samples = n_steps // stride + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.empty(n_samples, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vs = np.empty(n_samples, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Ts = np.empty(n_samples, dtype=np.float64)
    cdef double[:] xo = xs
    cdef double[:] vo = vs
    cdef double[:] To = Ts
    cdef double x = x0, v = v0, T = T0
    cdef double k1x, k1v, k1T, k2x, k2v, k2T, k3x, k3v, k3T, k4x, k4v, k4T
    cdef double xt, vt, Tt, P0, P1, P2, wf
    cdef Py_ssize_t i, k = 1
    cdef bint blew_up = False
    xo[0] = x
    vo[0] = v
    To[0] = T
    with nogil:
        for i in range(n_steps):
            P0 = p_half[2 * i]
            P1 = p_half[2 * i + 1]
            P2 = p_half[2 * i + 2]

            wf = omega0 - beta * T
            k1x = v
            k1v = -2.0 * gamma0 * v - wf * wf * x + theta * T
            k1T = eta * P0 * _intensity(x, c, kopt, xr, bp2) - kappa * T

            xt = x + 0.5 * dt * k1x
            vt = v + 0.5 * dt * k1v
            Tt = T + 0.5 * dt * k1T
            wf = omega0 - beta * Tt
            k2x = vt
            k2v = -2.0 * gamma0 * vt - wf * wf * xt + theta * Tt
            k2T = eta * P1 * _intensity(xt, c, kopt, xr, bp2) - kappa * Tt

            xt = x + 0.5 * dt * k2x
            vt = v + 0.5 * dt * k2v
            Tt = T + 0.5 * dt * k2T
            wf = omega0 - beta * Tt
            k3x = vt
            k3v = -2.0 * gamma0 * vt - wf * wf * xt + theta * Tt
            k3T = eta * P1 * _intensity(xt, c, kopt, xr, bp2) - kappa * Tt

            xt = x + dt * k3x
            vt = v + dt * k3v
            Tt = T + dt * k3T
            wf = omega0 - beta * Tt
            k4x = vt
            k4v = -2.0 * gamma0 * vt - wf * wf * xt + theta * Tt
            k4T = eta * P2 * _intensity(xt, c, kopt, xr, bp2) - kappa * Tt

            x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            v = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            T = T + dt / 6.0 * (k1T + 2.0 * k2T + 2.0 * k3T + k4T)
            if not (x == x and T == T) or x > limit or x < -limit:
                blew_up = True
                break
            if (i + 1) % stride == 0:
                xo[k] = x
                vo[k] = v
                To[k] = T
                k += 1
    steps = i + 1 if n_steps > 0 else 0
    return xs[:k], vs[:k], Ts[:k], steps, blew_up, (x, v, T)
