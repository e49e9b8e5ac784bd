"""Independent reference solutions for the continuum-limit problem.

A single excited level coupled to a Lorentzian continuum has a closed-form
amplitude; everything here is derived from that one integro-differential
equation without touching the discrete-bath integrator, so the two routes
can be compared honestly. The split-register V configuration factorizes,
so the same formulas serve each of its channels.

Memory kernel convention: with the detuning defined as
delta = omega_system - omega_c and phases Omega_k = (nu_k - omega_c) - delta,
the continuum kernel is f(tau) = (gamma0 lam / 2) exp(-(lam - i delta) tau).
Flipping the sign convention of delta only flips the shift rate S(t).
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad


def _branch(gamma0: float, lam: float, delta: float):
    z = complex(lam, -delta)
    d = np.sqrt(z * z - 2.0 * gamma0 * lam)
    return z, d


def memory_kernel(gamma0: float, lam: float, delta: float, tau):
    """f(tau): two-time correlation of the Lorentzian continuum."""
    tau = np.asarray(tau, dtype=float)
    z, _ = _branch(gamma0, lam, delta)
    return 0.5 * gamma0 * lam * np.exp(-z * tau)


def exact_amplitude(gamma0: float, lam: float, delta: float, t):
    """Closed-form excited amplitude c(t) with c(0) = 1."""
    t = np.asarray(t, dtype=float)
    z, d = _branch(gamma0, lam, delta)
    if abs(d) < 1e-12:
        return np.exp(-0.5 * z * t) * (1.0 + 0.5 * z * t)
    return np.exp(-0.5 * z * t) * (np.cosh(0.5 * d * t) + (z / d) * np.sinh(0.5 * d * t))


def exact_amplitude_derivative(gamma0: float, lam: float, delta: float, t):
    """dc/dt of the closed form; equals -(gamma0 lam / d) e^{-zt/2} sinh(dt/2)."""
    t = np.asarray(t, dtype=float)
    z, d = _branch(gamma0, lam, delta)
    if abs(d) < 1e-12:
        # limit d -> 0 of the expression below
        return -0.5 * gamma0 * lam * t * np.exp(-0.5 * z * t)
    return -(gamma0 * lam / d) * np.exp(-0.5 * z * t) * np.sinh(0.5 * d * t)


def exact_rates(gamma0: float, lam: float, delta: float, t):
    """Time-local (Delta, S) of the continuum problem, from -2 cdot / c."""
    t = np.asarray(t, dtype=float)
    z, d = _branch(gamma0, lam, delta)
    if abs(d) < 1e-12:
        ratio = np.where(t == 0, 0.0, -0.5 * gamma0 * lam * t / (1.0 + 0.5 * z * t))
    else:
        sh = np.sinh(0.5 * d * t)
        ch = np.cosh(0.5 * d * t)
        ratio = -gamma0 * lam * sh / (d * ch + z * sh)
    return -2.0 * ratio.real, -2.0 * ratio.imag


def kernel_residual(gamma0: float, lam: float, delta: float, times) -> np.ndarray:
    """|cdot(t) + int_0^t f(t - s) c(s) ds| at each requested time.

    The integral is done by adaptive quadrature on the closed forms; small
    residuals certify that amplitude, derivative and kernel belong to the
    same equation.
    """
    out = np.empty(len(times))
    for i, t in enumerate(times):
        def integrand_re(s):
            return (memory_kernel(gamma0, lam, delta, t - s)
                    * exact_amplitude(gamma0, lam, delta, s)).real

        def integrand_im(s):
            return (memory_kernel(gamma0, lam, delta, t - s)
                    * exact_amplitude(gamma0, lam, delta, s)).imag

        re, _ = quad(integrand_re, 0.0, t, limit=200)
        im, _ = quad(integrand_im, 0.0, t, limit=200)
        out[i] = abs(exact_amplitude_derivative(gamma0, lam, delta, t)
                     + complex(re, im))
    return out


def volterra_amplitude(gamma0: float, lam: float, delta: float, t_max: float,
                       dt: float = 1e-4):
    """Direct solve of cdot = -int_0^t f(t-s) c(s) ds, trapezoid memory.

    Predictor-corrector stepping; the exponential kernel lets the history
    sum update in O(1) per step. Second-order accurate in dt.
    """
    z, _ = _branch(gamma0, lam, delta)
    pref = 0.5 * gamma0 * lam
    n_steps = int(round(t_max / dt))
    c = np.empty(n_steps + 1, dtype=complex)
    c[0] = 1.0
    decay = np.exp(-z * dt)

    def integral(s_run, cn, e_tn):
        # trapezoid: sum has full weight everywhere, subtract half endpoints
        return pref * (s_run - 0.5 * dt * (cn + e_tn * c[0]))

    s_run = dt * c[0]
    e_t = 1.0 + 0.0j
    i_n = integral(s_run, c[0], e_t)
    for n in range(n_steps):
        cp = c[n] - dt * i_n
        s_p = decay * s_run + dt * cp
        e_t1 = e_t * decay
        i_p = integral(s_p, cp, e_t1)
        cc = c[n] - 0.5 * dt * (i_n + i_p)
        s_c = decay * s_run + dt * cc
        i_c = integral(s_c, cc, e_t1)
        cc = c[n] - 0.5 * dt * (i_n + i_c)
        c[n + 1] = cc
        s_run = decay * s_run + dt * cc
        e_t = e_t1
        i_n = integral(s_run, cc, e_t)
    return dt * np.arange(n_steps + 1), c


def tcl2_rates(gamma0: float, lam: float, delta: float, t):
    """Second-order time-local rates by adaptive quadrature.

    Delta_2(t) = gamma0 lam int_0^t e^{-lam tau} cos(delta tau) dtau and the
    matching sine integral for S_2. Exact only to second order in the
    coupling; at strong coupling it deviates structurally from the
    all-orders rate (different oscillation frequency, never negative for
    Delta at delta != 0 beyond the first dip).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    d2 = np.empty(t.size)
    s2 = np.empty(t.size)
    for i, ti in enumerate(t):
        re, _ = quad(lambda tau: np.exp(-lam * tau) * np.cos(delta * tau),
                     0.0, ti, limit=200)
        im, _ = quad(lambda tau: np.exp(-lam * tau) * np.sin(delta * tau),
                     0.0, ti, limit=200)
        d2[i] = gamma0 * lam * re
        s2[i] = gamma0 * lam * im
    return d2, s2


def tcl2_rates_closed(gamma0: float, lam: float, delta: float, t):
    """Antiderivatives of the quadrature above, for cross-checking it."""
    t = np.asarray(t, dtype=float)
    den = lam * lam + delta * delta
    e = np.exp(-lam * t)
    d2 = gamma0 * lam * (lam - e * (lam * np.cos(delta * t) - delta * np.sin(delta * t))) / den
    s2 = gamma0 * lam * (delta - e * (lam * np.sin(delta * t) + delta * np.cos(delta * t))) / den
    return d2, s2


def master_evolve(rates, rho0, ground: int, excited, dt: float):
    """RK4 solve of the time-local master equation on the system space.

    rho' = -i[H, rho] + sum_i Delta_i (C_i rho C_i^dag - {C_i^dag C_i, rho}/2)
    with H = sum_i (S_i / 2) |i><i| and C_i = |ground><i|. Rates come from a
    RateSeries on a dense grid; steps span two grid intervals. Masked rates
    are only legal while the channel population (and its coherences) are
    empty.

    Returns (node_steps, rho) with rho of shape (n_nodes, d, d).
    """
    rho = np.asarray(rho0, dtype=complex).copy()
    d = rho.shape[0]
    idx = list(excited)
    n_steps = rates.t.size - 1

    delta = rates.delta
    shift = rates.shift

    def liouville(dl, sh, r):
        out = np.zeros_like(r)
        # diagonal H only dephases coherences; do it channel by channel
        for a, i in enumerate(idx):
            hi = 0.5 * sh[a]
            di = dl[a]
            # -i [h_i |i><i|, rho]
            out[i, :] += -1j * hi * r[i, :]
            out[:, i] += 1j * hi * r[:, i]
            # jump part
            out[ground, ground] += di * r[i, i]
            out[i, :] -= 0.5 * di * r[i, :]
            out[:, i] -= 0.5 * di * r[:, i]
        return out

    def node(n):
        dl = delta[n].copy()
        sh = shift[n].copy()
        bad = ~rates.defined[n]
        if bad.any():
            for a in np.nonzero(bad)[0]:
                i = idx[a]
                occupied = abs(rho[i, i]) > 1e-12 or np.abs(rho[i, :]).max() > 1e-10
                if occupied:
                    raise RuntimeError(
                        f"rate for channel {rates.channels[a]} undefined at "
                        f"step {n} while its population is nonzero")
                dl[a] = 0.0
                sh[a] = 0.0
        return dl, sh

    node_steps = [0]
    out = [rho.copy()]
    n = 0
    while n < n_steps:
        if n + 2 <= n_steps:
            n_mid, n_end, h = n + 1, n + 2, 2.0 * dt
        else:
            n_mid, n_end, h = n, n + 1, dt
        d0, s0 = node(n)
        dm, sm = node(n_mid)
        d1, s1 = node(n_end)
        if n_mid == n:
            dm, sm = 0.5 * (d0 + d1), 0.5 * (s0 + s1)
        k1 = liouville(d0, s0, rho)
        k2 = liouville(dm, sm, rho + 0.5 * h * k1)
        k3 = liouville(dm, sm, rho + 0.5 * h * k2)
        k4 = liouville(d1, s1, rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        node_steps.append(n_end)
        out.append(rho.copy())
        n = n_end
    return np.asarray(node_steps), np.asarray(out)
