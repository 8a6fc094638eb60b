"""Pure-Python/numpy twins of the compiled kernels in ``_kernels.pyx``.

Used when the extension is not built or when ``SEOLOCK_PURE_PYTHON=1``.
The winding-number batch is vectorised over parameter rows; the
integrators are plain loops and are slow for long runs.
"""
import math

import numpy as np

TWO_PI = 2.0 * math.pi


def _perturbation(q, ks, amp, off):
    frac = q - math.floor(q)
    s = 0.0
    for k, a, o in zip(ks, amp, off):
        s += a * math.cos(TWO_PI * k * frac + o)
    return s


def iterate_lift(q0, n, alpha, ks, amp, off):
    ks = [int(k) for k in ks]
    amp = [float(a) for a in amp]
    off = [float(o) for o in off]
    out = np.empty(n + 1, dtype=np.float64)
    q = float(q0)
    out[0] = q
    for i in range(n):
        q = q + alpha + _perturbation(q, ks, amp, off)
        out[i + 1] = q
    return out


def winding_batch(q0, alpha, ks, amp, off, n_transient, n_avg):
    alpha = np.asarray(alpha, dtype=np.float64)
    ks = np.asarray(ks, dtype=np.int64)
    amp = np.asarray(amp, dtype=np.float64)
    off = np.asarray(off, dtype=np.float64)
    q = np.full(alpha.shape, float(q0))
    phase = TWO_PI * ks[None, :]

    def step(q):
        frac = q - np.floor(q)
        return q + alpha + np.sum(amp * np.cos(phase * frac[:, None] + off), axis=1)

    for _ in range(n_transient):
        q = step(q)
    start = q.copy()
    for _ in range(n_avg):
        q = step(q)
    return (q - start) / n_avg


def envelope_em(a0, step0, dt, n_steps, stride, gamma0, gamma2, detune0, omega2,
                frame_omega, f_amp, f_w, f_ph, noise, limit):
    forcing = list(zip((float(a) for a in f_amp), (float(w) for w in f_w),
                       (float(p) for p in f_ph)))
    noisy = noise.shape[0] > 0
    tt = step0 * dt
    samples = [complex(a0) * complex(math.cos(frame_omega * tt), -math.sin(frame_omega * tt))]
    ar, ai = float(a0.real), float(a0.imag)
    lim2 = limit * limit
    blew_up = False
    steps = 0
    for i in range(n_steps):
        tm = (step0 + i + 0.5) * dt
        r2 = ar * ar + ai * ai
        g = gamma0 + gamma2 * r2
        w = detune0 + omega2 * r2
        xi = 0.0
        for a, fw, ph in forcing:
            xi += a * math.sin(fw * tm + ph)
        c = math.cos(frame_omega * tm)
        s = math.sin(frame_omega * tm)
        dr = -(g * ar - w * ai) + xi * c
        di = -(g * ai + w * ar) + xi * s
        ar = ar + dr * dt
        ai = ai + di * dt
        if noisy:
            ar = ar + noise[i, 0]
            ai = ai + noise[i, 1]
        steps = i + 1
        if ar * ar + ai * ai > lim2 or ar != ar or ai != ai:
            blew_up = True
            break
        if (i + 1) % stride == 0:
            tt = (step0 + i + 1) * dt
            c = math.cos(frame_omega * tt)
            s = math.sin(frame_omega * tt)
            samples.append(complex(ar * c + ai * s, ai * c - ar * s))
    return np.array(samples, dtype=np.complex128), complex(ar, ai), steps, blew_up


def full_rk4(x0, v0, T0, dt, n_steps, stride, gamma0, omega0, beta, theta, eta,
             kappa, c, kopt, xr, bp2, p_half, limit):
    def rhs(x, v, T, P):
        wf = omega0 - beta * T
        return (v,
                -2.0 * gamma0 * v - wf * wf * x + theta * T,
                eta * P * c / (1.0 - math.cos(kopt * (x - xr)) + bp2) - kappa * T)

    xs, vs, Ts = [x0], [v0], [T0]
    x, v, T = float(x0), float(v0), float(T0)
    blew_up = False
    steps = 0
    for i in range(n_steps):
        P0, P1, P2 = p_half[2 * i], p_half[2 * i + 1], p_half[2 * i + 2]
        k1 = rhs(x, v, T, P0)
        k2 = rhs(x + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1], T + 0.5 * dt * k1[2], P1)
        k3 = rhs(x + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1], T + 0.5 * dt * k2[2], P1)
        k4 = rhs(x + dt * k3[0], v + dt * k3[1], T + dt * k3[2], P2)
        x = x + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        v = v + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        T = T + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        steps = i + 1
        if not (x == x and T == T) or abs(x) > limit:
            blew_up = True
            break
        if (i + 1) % stride == 0:
            xs.append(x)
            vs.append(v)
            Ts.append(T)
    return np.array(xs), np.array(vs), np.array(Ts), steps, blew_up, (x, v, T)
