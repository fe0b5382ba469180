"""Fixed-step RK4 integration loop, JIT-compiled.

Everything here operates on plain float64/int64 scalars and preallocated
arrays so numba can compile one tight loop.  The public surface lives in
``engine``; the controller arithmetic here must stay in lockstep with the
pure-python reference implementations there.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# magnet modes
PRESCRIBED = 0
FULL_ODE = 1
# gradient signal kinds
GRAD_NONE = 0
GRAD_CONSTANT = 1
GRAD_SINE = 2
# run exit status
DONE = 0
PULLED_IN = 1

TWO_PI = 2.0 * np.pi


@njit(cache=True)
def _grad_b(t, kind, amp, w):
    # amp is the level for constant kind, half peak-to-peak for sine
    if kind == GRAD_NONE:
        return 0.0
    if kind == GRAD_CONSTANT:
        return amp
    return amp * np.sin(w * t)


@njit(cache=True)
def _run_loop(
    m_s, c_s, k0s, drive_amp, a_target, tau1f,
    a_cas, s0, g_min,
    a_m, tau2f, k0m, m_m, c_m, pump_k,
    grad_kind, grad_amp, grad_w, defl_per_tm, force_per_tm,
    full_ode, agc_on, locked,
    dt, n_steps, decim,
    omega0, gain0, x_s0, v_s0, x_m0, v_m0,
    rec_t, rec_xs, rec_xm, rec_xsm, rec_drive, rec_fhat,
    cross_t, cross_f,
):
    """Integrate the coupled system; returns status and controller tallies.

    The magnet is either evaluated from the prescribed pump waveform at
    every stage time (PRESCRIBED) or integrated as a second oscillator
    (FULL_ODE).  The drive/pump waveforms are re-anchored to the latest
    negative-slope zero crossing of x_S; omega and the AGC gain are held
    constant between crossings.
    """
    xs = x_s0
    vs = v_s0
    xm = x_m0
    vm = v_m0

    omega = omega0
    gain = gain0
    anchor = 0.0
    last_tc = 0.0
    period = 0.0
    n_cross = 0
    cyc_max = xs
    cyc_min = xs

    ring = np.zeros(20)
    ring_i = 0
    steady_time = -1.0

    status = DONE
    pullin_time = -1.0
    cross_cap = cross_t.shape[0]

    rec_i = 0
    i = 0
    while i <= n_steps:
        t = i * dt
        if i % decim == 0:
            # prescribed magnet position is recomputed from the waveform so
            # the recorded trace matches the controller state exactly
            if full_ode == 0:
                xm = a_m * np.sin(2.0 * omega * (t - anchor + tau2f)) \
                    + defl_per_tm * _grad_b(t, grad_kind, grad_amp, grad_w)
            rec_t[rec_i] = t
            rec_xs[rec_i] = xs
            rec_xm[rec_i] = xm
            rec_xsm[rec_i] = s0 + xs - xm
            rec_drive[rec_i] = gain * drive_amp * np.sin(
                omega * (t - anchor + tau1f))
            rec_fhat[rec_i] = omega / TWO_PI
            rec_i += 1
        if i == n_steps:
            break

        # --- one RK4 step from t to t + dt ---
        th = t + 0.5 * dt
        tf = t + dt

        if full_ode == 0:
            d0 = defl_per_tm * _grad_b(t, grad_kind, grad_amp, grad_w)
            dh = defl_per_tm * _grad_b(th, grad_kind, grad_amp, grad_w)
            df = defl_per_tm * _grad_b(tf, grad_kind, grad_amp, grad_w)
            xm0_ = a_m * np.sin(2.0 * omega * (t - anchor + tau2f)) + d0
            xmh_ = a_m * np.sin(2.0 * omega * (th - anchor + tau2f)) + dh
            xmf_ = a_m * np.sin(2.0 * omega * (tf - anchor + tau2f)) + df

            f0_ = gain * drive_amp * np.sin(omega * (t - anchor + tau1f))
            fh_ = gain * drive_amp * np.sin(omega * (th - anchor + tau1f))
            ff_ = gain * drive_amp * np.sin(omega * (tf - anchor + tau1f))

            # k1
            g1 = s0 + xs - xm0_
            if g1 <= g_min:
                status = PULLED_IN
                pullin_time = t
                break
            a1 = (f0_ - a_cas / g1**3 - c_s * vs - k0s * xs) / m_s
            # k2
            x2 = xs + 0.5 * dt * vs
            v2 = vs + 0.5 * dt * a1
            g2 = s0 + x2 - xmh_
            if g2 <= g_min:
                status = PULLED_IN
                pullin_time = th
                break
            a2 = (fh_ - a_cas / g2**3 - c_s * v2 - k0s * x2) / m_s
            # k3
            x3 = xs + 0.5 * dt * v2
            v3 = vs + 0.5 * dt * a2
            g3 = s0 + x3 - xmh_
            if g3 <= g_min:
                status = PULLED_IN
                pullin_time = th
                break
            a3 = (fh_ - a_cas / g3**3 - c_s * v3 - k0s * x3) / m_s
            # k4
            x4 = xs + dt * v3
            v4 = vs + dt * a3
            g4 = s0 + x4 - xmf_
            if g4 <= g_min:
                status = PULLED_IN
                pullin_time = tf
                break
            a4 = (ff_ - a_cas / g4**3 - c_s * v4 - k0s * x4) / m_s

            x_prev = xs
            xs = xs + dt / 6.0 * (vs + 2.0 * v2 + 2.0 * v3 + v4)
            vs = vs + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            xm = xmf_
        else:
            b0 = _grad_b(t, grad_kind, grad_amp, grad_w)
            bh = _grad_b(th, grad_kind, grad_amp, grad_w)
            bf = _grad_b(tf, grad_kind, grad_amp, grad_w)

            f0_ = gain * drive_amp * np.sin(omega * (t - anchor + tau1f))
            fh_ = gain * drive_amp * np.sin(omega * (th - anchor + tau1f))
            ff_ = gain * drive_amp * np.sin(omega * (tf - anchor + tau1f))
            p0_ = pump_k * a_m * np.sin(2.0 * omega * (t - anchor + tau2f)) \
                + force_per_tm * b0
            ph_ = pump_k * a_m * np.sin(2.0 * omega * (th - anchor + tau2f)) \
                + force_per_tm * bh
            pf_ = pump_k * a_m * np.sin(2.0 * omega * (tf - anchor + tau2f)) \
                + force_per_tm * bf

            # k1
            g1 = s0 + xs - xm
            if g1 <= g_min:
                status = PULLED_IN
                pullin_time = t
                break
            fc1 = a_cas / g1**3
            as1 = (f0_ - fc1 - c_s * vs - k0s * xs) / m_s
            am1 = (p0_ + fc1 - c_m * vm - k0m * xm) / m_m
            # k2
            xs2 = xs + 0.5 * dt * vs
            vs2 = vs + 0.5 * dt * as1
            xm2 = xm + 0.5 * dt * vm
            vm2 = vm + 0.5 * dt * am1
            g2 = s0 + xs2 - xm2
            if g2 <= g_min:
                status = PULLED_IN
                pullin_time = th
                break
            fc2 = a_cas / g2**3
            as2 = (fh_ - fc2 - c_s * vs2 - k0s * xs2) / m_s
            am2 = (ph_ + fc2 - c_m * vm2 - k0m * xm2) / m_m
            # k3
            xs3 = xs + 0.5 * dt * vs2
            vs3 = vs + 0.5 * dt * as2
            xm3 = xm + 0.5 * dt * vm2
            vm3 = vm + 0.5 * dt * am2
            g3 = s0 + xs3 - xm3
            if g3 <= g_min:
                status = PULLED_IN
                pullin_time = th
                break
            fc3 = a_cas / g3**3
            as3 = (fh_ - fc3 - c_s * vs3 - k0s * xs3) / m_s
            am3 = (ph_ + fc3 - c_m * vm3 - k0m * xm3) / m_m
            # k4
            xs4 = xs + dt * vs3
            vs4 = vs + dt * as3
            xm4 = xm + dt * vm3
            vm4 = vm + dt * am3
            g4 = s0 + xs4 - xm4
            if g4 <= g_min:
                status = PULLED_IN
                pullin_time = tf
                break
            fc4 = a_cas / g4**3
            as4 = (ff_ - fc4 - c_s * vs4 - k0s * xs4) / m_s
            am4 = (pf_ + fc4 - c_m * vm4 - k0m * xm4) / m_m

            x_prev = xs
            xs = xs + dt / 6.0 * (vs + 2.0 * vs2 + 2.0 * vs3 + vs4)
            vs = vs + dt / 6.0 * (as1 + 2.0 * as2 + 2.0 * as3 + as4)
            xm = xm + dt / 6.0 * (vm + 2.0 * vm2 + 2.0 * vm3 + vm4)
            vm = vm + dt / 6.0 * (am1 + 2.0 * am2 + 2.0 * am3 + am4)

        # --- controller: negative-slope zero crossing of x_S ---
        # the zero reference is the commanded rest position x_S = 0; the
        # AGC regulates the per-cycle |x_S| peak to the target amplitude
        if x_prev > 0.0 and xs <= 0.0 and vs < 0.0:
            tc = t + dt * x_prev / (x_prev - xs)
            n_cross += 1
            if n_cross >= 2:
                period = tc - last_tc
                cyc_amp = abs(cyc_max)
                if abs(cyc_min) > cyc_amp:
                    cyc_amp = abs(cyc_min)
                if locked == 0:
                    omega = TWO_PI / period
                    if agc_on == 1 and cyc_amp > 0.0:
                        r = a_target / cyc_amp
                        if r < 0.5:
                            r = 0.5
                        elif r > 2.0:
                            r = 2.0
                        gain = gain * r
                ring[ring_i % 20] = cyc_amp
                ring_i += 1
                if steady_time < 0.0 and ring_i >= 20:
                    mx = ring[0]
                    mn = ring[0]
                    sm = ring[0]
                    for j in range(1, 20):
                        if ring[j] > mx:
                            mx = ring[j]
                        if ring[j] < mn:
                            mn = ring[j]
                        sm += ring[j]
                    if (mx - mn) < 0.01 * (sm / 20.0):
                        steady_time = tc
            if n_cross <= cross_cap:
                cross_t[n_cross - 1] = tc
                cross_f[n_cross - 1] = omega / TWO_PI
            if locked == 0:
                anchor = tc
            last_tc = tc
            cyc_max = xs
            cyc_min = xs
        if xs > cyc_max:
            cyc_max = xs
        if xs < cyc_min:
            cyc_min = xs

        i += 1

    return (status, rec_i, n_cross, pullin_time, steady_time,
            omega, gain, anchor, last_tc, period, xs, vs, xm, vm)
