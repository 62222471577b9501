"""Electrical models of the renewable sources.

The PV panel is the five-parameter single-diode model. Its terminal
current at voltage v and irradiance g is the root i of

    i = i_ph*(g/g_stc) - i_0*(exp((v + i*r_s)/n_vt) - 1) - (v + i*r_s)/r_sh

solved by damped Newton iteration. The wind turbine simulator is a
motor-generator pair reduced to a quasi-static electrical model: shaft
speed follows k_w * wind with an optional first-order lag, and the
terminal voltage is the back-EMF minus the armature drop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NoConvergence

NEWTON_TOL = 1e-9  # residual tolerance, A
NEWTON_MAX_ITER = 100
MPP_SWEEP_STEP = 1e-3  # oracle voltage resolution, V


@dataclass(frozen=True)
class PvPanel:
    """Single-diode panel; n_vt is ideality factor x cell count x thermal voltage."""

    i_ph_stc: float
    i_0: float
    n_vt: float
    r_s: float
    r_sh: float
    g_stc: float = 1000.0


@dataclass(frozen=True)
class WindMG:
    k_e: float  # back-EMF constant, V*s/rad
    r_a: float  # armature resistance, Ohm
    k_w: float  # wind speed to shaft speed gain, (rad/s)/(m/s)
    tau: float = 0.0  # speed lag time constant, s (0 = immediate)


def _diode_current(panel: PvPanel, w: float) -> float:
    # w = v + i*r_s is the junction voltage
    arg = w / panel.n_vt
    if arg > 700.0:  # exp overflow guard; forces damping to back off
        return math.inf
    return panel.i_0 * math.expm1(arg)


def pv_current(panel: PvPanel, v: float, g: float) -> float:
    """Terminal current at terminal voltage v (>= 0) and irradiance g (>= 0).

    Damped Newton on the implicit single-diode equation; the returned root
    satisfies the equation to better than 1e-9 A. Raises NoConvergence after
    the iteration cap (pathological parameters).
    """
    i_ph = panel.i_ph_stc * (g / panel.g_stc)

    def residual(i: float) -> float:
        w = v + i * panel.r_s
        return i_ph - _diode_current(panel, w) - w / panel.r_sh - i

    i = i_ph  # photocurrent is the natural starting point
    f = residual(i)
    for _ in range(NEWTON_MAX_ITER):
        if abs(f) < NEWTON_TOL:
            return i
        w = v + i * panel.r_s
        dfdi = (-_diode_current_slope(panel, w) * panel.r_s
                - panel.r_s / panel.r_sh - 1.0)
        step = -f / dfdi
        # halve the step until the residual actually shrinks
        scale = 1.0
        while scale > 1e-12:
            i_new = i + scale * step
            f_new = residual(i_new)
            if abs(f_new) < abs(f):
                i, f = i_new, f_new
                break
            scale *= 0.5
        else:
            break
    if abs(f) < NEWTON_TOL:
        return i
    raise NoConvergence(
        f"pv_current failed at v={v}, g={g}: residual {f:.3e} A after {NEWTON_MAX_ITER} iterations")


def _diode_current_slope(panel: PvPanel, w: float) -> float:
    arg = w / panel.n_vt
    if arg > 700.0:
        return math.inf
    return panel.i_0 * math.exp(arg) / panel.n_vt


def pv_voltage(panel: PvPanel, i: float, g: float, w_guess: float = 0.0) -> float:
    """Terminal voltage that makes the panel source current i at irradiance g.

    Inverse of pv_current on the generating branch. If the demanded current
    exceeds what the panel can deliver at v = 0 the voltage collapses and 0
    is returned. w_guess warm-starts the Newton iteration.
    """
    i_ph = panel.i_ph_stc * (g / panel.g_stc)

    def residual(w: float) -> float:
        return i_ph - _diode_current(panel, w) - w / panel.r_sh - i

    if residual(0.0) <= 0.0:  # demand at or above the short-circuit current
        return 0.0
    w = max(w_guess, 0.0)
    f = residual(w)
    for _ in range(NEWTON_MAX_ITER):
        if abs(f) < NEWTON_TOL:
            break
        dfdw = -_diode_current_slope(panel, w) - 1.0 / panel.r_sh
        step = -f / dfdw
        scale = 1.0
        while scale > 1e-12:
            w_new = w + scale * step
            f_new = residual(w_new)
            if abs(f_new) < abs(f):
                w, f = w_new, f_new
                break
            scale *= 0.5
        else:
            break
    if not abs(f) < NEWTON_TOL:
        raise NoConvergence(f"pv_voltage failed at i={i}, g={g}: residual {f:.3e} A")
    return max(w - i * panel.r_s, 0.0)


def open_circuit_voltage(panel: PvPanel, g: float) -> float:
    """Terminal voltage at zero current (bisection on the monotone I-V curve)."""
    i_ph = panel.i_ph_stc * (g / panel.g_stc)
    if i_ph <= 0.0:
        return 0.0
    # upper bracket from the ideal-diode estimate, padded
    hi = panel.n_vt * math.log(i_ph / panel.i_0 + 1.0) + 1.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if pv_current(panel, mid, g) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9:
            break
    return 0.5 * (lo + hi)


def mpp_oracle(panel: PvPanel, g: float) -> tuple[float, float]:
    """Ground-truth maximum power point by exhaustive 1 mV voltage sweep.

    Returns (v_mpp, p_mpp). This is the reference every MPPT result is
    measured against; it shares pv_current but is independent of any
    tracking logic.
    """
    if g <= 0.0:
        raise ValueError("mpp_oracle requires g > 0")
    v_oc = open_circuit_voltage(panel, g)
    n = int(v_oc / MPP_SWEEP_STEP)
    best_v, best_p = 0.0, 0.0
    for k in range(n + 1):
        v = k * MPP_SWEEP_STEP
        p = v * pv_current(panel, v, g)
        if p > best_p:
            best_v, best_p = v, p
    return best_v, best_p


def wind_terminal(mg: WindMG, wind: float, i_load: float, omega_prev: float,
                  dt: float) -> tuple[float, float]:
    """Advance the shaft speed one step and return (v_terminal, omega).

    The speed relaxes toward k_w * wind with time constant tau (exact
    exponential update, so the result does not depend on how dt subdivides
    a constant-wind interval); tau = 0 snaps immediately. The terminal
    voltage is the back-EMF minus the armature drop, floored at zero.
    """
    omega_target = mg.k_w * wind
    if mg.tau <= 0.0:
        omega = omega_target
    else:
        omega = omega_target + (omega_prev - omega_target) * math.exp(-dt / mg.tau)
    v = mg.k_e * omega - mg.r_a * i_load
    return max(v, 0.0), omega


def wind_emf_terminal(mg: WindMG, omega: float, i_load: float) -> float:
    """Terminal voltage at a known shaft speed (shared with the engine)."""
    return max(mg.k_e * omega - mg.r_a * i_load, 0.0)
