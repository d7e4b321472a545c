"""Reference library of body and hand trajectories.

Every label maps to a clearance curve: the signed heights of the upper
(front) and lower (back) edge of the obstructing body across the LoS, in
metres, as a function of time. See :mod:`harvsense.physics` for the sign
convention.

Respiration
    A torso below the LoS with the chest edge at a posture-dependent
    baseline. The chest edge is displaced by ``amplitude_m * b(f t + phase)``
    where ``b`` is ``sin(2 pi x)`` for ``waveform="sine"`` or the sharpened
    breath pulse ``max(sin(2 pi x), 0) ** k`` for ``waveform="pulse"``, with
    ``k`` chosen so the pulse keeps ``pulse_width_s`` seconds of standard
    deviation at any rate. Both start at the baseline at phase 0 and reach
    ``baseline + amplitude_m`` a quarter period later. When standing, the back
    edge moves too (``back_coupling`` times the chest displacement).

Activities
    A torso of ``thickness_m`` that rests below the LoS with its upper edge at
    ``rest_front_m``. Each activity raises the torso into the first Fresnel
    zone by ``amp * shape(tau)`` metres, ``tau`` being normalised time within
    the active phase. ``walk`` instead carries the whole torso across the link
    from ``walk_start_m`` to ``walk_end_m``.

    ===========  ==========================================================
    walk         linear traversal of the full torso through the zone
    sit_up       one symmetric raised-cosine rise, 0.45 m
    push_up      trapezoid: 20 % ramps, 60 % hold, 0.28 m
    high_knee    four cusped humps ``|sin(4 pi tau)|``, 0.22 m
    leg_lift     slow 70 % rise then fast 30 % fall, 0.35 m
    lunge        fast 25 % rise then slow 75 % fall, 0.35 m
    plank_hold   15 % ramps around a hold with an 8-cycle tremor, 0.18 m
    squat        two raised-cosine dips, the second at 70 % depth, 0.30 m
    crunchy      three smooth cycles ``(1 - cos(6 pi tau)) / 2``, 0.25 m
    sit_down     rise to 0.40 m then settle at 0.20 m (new rest level)
    ===========  ==========================================================

Gestures
    A hand modelled as a thin strip of ``hand_thickness_m`` centred at height
    ``y``; it rests above the LoS at ``rest_y_m`` and gestures lower it into
    the zone. ``depth`` is the dip below the rest height:

    ===========  ==========================================================
    slide        linear sweep from rest to the mirror height below the LoS
    front_back   one raised-cosine dip, 0.50 m
    up_down      two raised-cosine dips, 0.40 m
    zig_zag      three triangular dips with sharp corners, 0.35 m
    wave         held 0.30 m in the zone with a 5-cycle 0.08 m oscillation
    circle       one circular orbit: height and apparent thickness in
                 quadrature
    triangle     three straight strokes to 0.45 m, 0.20 m, 0
    square       four smoothed steps 0.35 / 0.15 / 0.35 / 0 m
    flap         held 0.30 m with the apparent thickness flapping 3 times
    flip_palm    held 0.33 m, thickness 0.02 -> 0.12 -> 0.02 m once
    ===========  ==========================================================

Outside the active phase every trajectory holds its start or end state, so
traces carry quiet lead-in and tail periods.
"""

from __future__ import annotations

import math

import numpy as np

RESPIRATION_LABELS = ("lying", "sitting", "standing")
ACTIVITY_LABELS = ("walk", "sit_up", "push_up", "high_knee", "leg_lift",
                   "lunge", "plank_hold", "squat", "crunchy", "sit_down")
GESTURE_LABELS = ("slide", "front_back", "up_down", "zig_zag", "wave",
                  "circle", "triangle", "square", "flap", "flip_palm")

TASK_LABELS = {
    "respiration": RESPIRATION_LABELS,
    "activity": ACTIVITY_LABELS,
    "gesture": GESTURE_LABELS,
}

POSTURE_BASELINE_M = {"lying": -0.035, "sitting": -0.025, "standing": -0.015}

_TORSO_THICKNESS_M = 0.30


def default_motion(task: str, label: str) -> dict:
    """Nominal motion parameters for one label; see module docstring."""
    if task == "respiration":
        return {
            "rate_hz": 0.25,
            "amplitude_m": 0.010,
            "phase": 0.0,
            "baseline_m": POSTURE_BASELINE_M[label],
            "thickness_m": _TORSO_THICKNESS_M,
            "waveform": "pulse",
            "pulse_width_s": 0.12,
            "back_coupling": 0.5 if label == "standing" else 0.0,
        }
    if task == "activity":
        motion = {
            "lead_s": 1.0,
            "active_s": 3.5 if label == "walk" else 3.0,
            "amp": 1.0,
            "rest_front_m": -0.30,
            "thickness_m": _TORSO_THICKNESS_M,
        }
        if label == "walk":
            motion.update(walk_start_m=-0.9, walk_end_m=0.9)
        return motion
    if task == "gesture":
        return {
            "lead_s": 1.0,
            "active_s": 2.0,
            "amp": 1.0,
            "rest_y_m": 0.45,
            "hand_thickness_m": 0.06,
        }
    raise ValueError(f"unknown task {task!r}")


def nominal_duration(task: str, motion: dict) -> float:
    if task == "respiration":
        return 60.0
    return motion["lead_s"] + motion["active_s"] + 1.0


def _hann(tau):
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * tau))


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * x))


def _ramp_hold(tau, ramp):
    return np.minimum(_smoothstep(tau / ramp), _smoothstep((1.0 - tau) / ramp))


def _asym_bump(tau, peak_at):
    up = _smoothstep(tau / peak_at)
    down = _smoothstep((1.0 - tau) / (1.0 - peak_at))
    return np.where(tau < peak_at, up, down)


def _triangle_wave(tau, cycles):
    x = (tau * cycles) % 1.0
    return 1.0 - np.abs(2.0 * x - 1.0)


def _piecewise_linear(tau, knots, values):
    return np.interp(tau, knots, values)


def _activity_shape(label, tau):
    if label == "sit_up":
        return 0.45 * _hann(tau)
    if label == "push_up":
        return 0.28 * _ramp_hold(tau, 0.2)
    if label == "high_knee":
        return 0.22 * np.abs(np.sin(4.0 * np.pi * tau))
    if label == "leg_lift":
        return 0.35 * _asym_bump(tau, 0.7)
    if label == "lunge":
        return 0.35 * _asym_bump(tau, 0.25)
    if label == "plank_hold":
        return 0.18 * _ramp_hold(tau, 0.15) + 0.02 * np.sin(16.0 * np.pi * tau) * _ramp_hold(tau, 0.15)
    if label == "squat":
        first = np.where(tau < 0.5, _hann(2.0 * tau), 0.0)
        second = np.where(tau >= 0.5, 0.7 * _hann(2.0 * tau - 1.0), 0.0)
        return 0.30 * (first + second)
    if label == "crunchy":
        return 0.25 * 0.5 * (1.0 - np.cos(6.0 * np.pi * tau))
    if label == "sit_down":
        rise = 0.40 * _smoothstep(tau / 0.4)
        settle = 0.40 - 0.20 * _smoothstep((tau - 0.4) / 0.6)
        return np.where(tau < 0.4, rise, settle)
    raise ValueError(f"unknown activity label {label!r}")


def _gesture_shape(label, tau):
    """(depth below rest in m, extra apparent thickness in m)."""
    zero = np.zeros_like(tau)
    if label == "front_back":
        return 0.50 * _hann(tau), zero
    if label == "up_down":
        return 0.40 * _hann((2.0 * tau) % 1.0), zero
    if label == "zig_zag":
        return 0.35 * _triangle_wave(tau, 3), zero
    if label == "wave":
        env = _ramp_hold(tau, 0.15)
        return env * (0.30 + 0.08 * np.sin(10.0 * np.pi * tau)), zero
    if label == "circle":
        env = _ramp_hold(tau, 0.15)
        return env * (0.30 + 0.12 * np.sin(2.0 * np.pi * tau)), env * 0.06 * (1.0 + np.cos(2.0 * np.pi * tau))
    if label == "triangle":
        return _piecewise_linear(tau, [0.0, 0.3, 0.6, 1.0], [0.0, 0.45, 0.20, 0.0]), zero
    if label == "square":
        steps = (0.35 * _smoothstep((tau - 0.02) / 0.08)
                 - 0.20 * _smoothstep((tau - 0.30) / 0.08)
                 + 0.20 * _smoothstep((tau - 0.55) / 0.08)
                 - 0.35 * _smoothstep((tau - 0.85) / 0.08))
        return steps, zero
    if label == "flap":
        env = _ramp_hold(tau, 0.15)
        return env * 0.30, env * 0.06 * (1.0 - np.cos(6.0 * np.pi * tau))
    if label == "flip_palm":
        env = _ramp_hold(tau, 0.15)
        return env * 0.33, env * 0.06 * (1.0 - np.cos(2.0 * np.pi * tau)) * 0.833
    raise ValueError(f"unknown gesture label {label!r}")


def _breath(waveform, x, pulse_k):
    s = np.sin(2.0 * np.pi * x)
    if waveform == "sine":
        return s
    if waveform == "pulse":
        return np.maximum(s, 0.0) ** pulse_k
    raise ValueError(f"unknown respiration waveform {waveform!r}")


def pulse_exponent(rate_hz: float, pulse_width_s: float) -> float:
    # sin^k near its peak ~ exp(-k (2 pi f dt)^2 / 2): std = 1 / (2 pi f sqrt(k))
    return max(1.0, (1.0 / (2.0 * math.pi * rate_hz * pulse_width_s)) ** 2)


def edges(task: str, label: str, motion: dict, t: np.ndarray):
    """Upper and lower edge heights (front, back) at times ``t``."""
    t = np.asarray(t, dtype=np.float64)
    if task == "respiration":
        x = motion["rate_hz"] * t + motion["phase"] / (2.0 * math.pi)
        k = pulse_exponent(motion["rate_hz"], motion.get("pulse_width_s", 0.12))
        disp = motion["amplitude_m"] * _breath(motion.get("waveform", "pulse"), x, k)
        front = motion["baseline_m"] + disp
        back = motion["baseline_m"] - motion["thickness_m"] - motion.get("back_coupling", 0.0) * disp
        return front, back

    tau = np.clip((t - motion["lead_s"]) / motion["active_s"], 0.0, 1.0)
    amp = motion.get("amp", 1.0)
    if task == "activity":
        thick = motion["thickness_m"]
        if label == "walk":
            center = motion["walk_start_m"] + (motion["walk_end_m"] - motion["walk_start_m"]) * tau
            return center + thick / 2.0, center - thick / 2.0
        front = motion["rest_front_m"] + amp * _activity_shape(label, tau)
        return front, front - thick
    if task == "gesture":
        rest = motion["rest_y_m"]
        half = motion["hand_thickness_m"] / 2.0
        if label == "slide":
            y = rest - 2.0 * rest * tau
            return y + half, y - half
        depth, extra = _gesture_shape(label, tau)
        y = rest - amp * depth
        half = half + extra / 2.0
        return y + half, y - half
    raise ValueError(f"unknown task {task!r}")
