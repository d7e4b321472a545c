"""RF energy transmission model for a single Tx-Rx link with one diffractor.

Conventions
-----------
Clearances are signed heights of the body's two edges measured across the
line of sight (LoS), positive on the "upper" side. ``clearance_front_h`` is
the upper edge and ``clearance_back_h`` the lower edge. The aperture left
open by an opaque body is the region above the upper edge plus the region
below the lower edge, so

    F_front(v) = (1+j)/2 * integral_v^inf     exp(-j pi z^2 / 2) dz
    F_back(v)  = (1+j)/2 * integral_-inf^v    exp(-j pi z^2 / 2) dz

with ``v = sqrt(2) * h / r1``. A body far below the LoS gives
``v_front -> -inf`` and ``v_back -> -inf``, i.e. F_front -> 1 and
F_back -> 0: an unobstructed link. A body straddling the LoS with both
edges far away gives F_front -> 0 and F_back -> 0: total blockage.

The symbol ``n`` is used twice in the literature; here the Fresnel zone
index is ``zone_index_n`` and the path-loss exponent is ``exponent_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError

#: Diffraction gain of a fully blocked link (|F_front + F_back| == 0).
DIFFRACTION_BLOCKED = -math.inf

#: Path-loss composition modes accepted by :func:`harvested_power`.
PATH_LOSS_MODES = ("excess", "full", "none")

_HALF_1PJ = 0.5 + 0.5j


def _check_positive(name, value):
    try:
        ok = math.isfinite(value) and value > 0
    except TypeError:
        ok = False
    if not ok:
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class ChannelGeometry:
    """Friis link parameters. Gains are linear, power in watts."""

    distance_d: float = 1.0
    wavelength_lambda: float = 0.125
    gain_tx: float = 10 ** (2.3 / 10)
    gain_rx: float = 10 ** (2.3 / 10)
    power_tx: float = 0.1

    def __post_init__(self):
        _check_positive("distance_d", self.distance_d)
        _check_positive("wavelength_lambda", self.wavelength_lambda)
        _check_positive("gain_tx", self.gain_tx)
        _check_positive("gain_rx", self.gain_rx)
        if not (math.isfinite(self.power_tx) and self.power_tx >= 0):
            raise DomainError(f"power_tx must be finite and >= 0, got {self.power_tx!r}")


@dataclass(frozen=True)
class FresnelGeometry:
    """Position of the target along the link and the zone it is measured in."""

    geometry: ChannelGeometry
    distance_to_target_d1: float
    zone_index_n: int = 1

    def __post_init__(self):
        fresnel_radius(self.geometry, self.distance_to_target_d1, self.zone_index_n)

    @property
    def semi_minor_r1(self) -> float:
        return fresnel_radius(self.geometry, self.distance_to_target_d1, self.zone_index_n)


@dataclass(frozen=True, eq=False)
class BodySnapshot:
    """Signed edge heights of the body relative to the LoS, in metres.

    Fields may be floats or equally shaped arrays (one entry per instant).
    Use ``math.inf`` / ``-math.inf`` for edges that extend without bound.
    """

    clearance_front_h: float | np.ndarray
    clearance_back_h: float | np.ndarray

    def u(self, r1):
        """Normalised clearances (front, back) = h / r1."""
        return (np.divide(self.clearance_front_h, r1), np.divide(self.clearance_back_h, r1))

    def v(self, r1):
        """Fresnel-Kirchhoff parameters (front, back) = sqrt(2) * h / r1."""
        uf, ub = self.u(r1)
        return math.sqrt(2.0) * uf, math.sqrt(2.0) * ub


@dataclass(frozen=True)
class PathLossEnv:
    """Log-distance path-loss environment (all attenuations in dB)."""

    pl_d0: float = 40.05
    d0: float = 1.0
    exponent_n: float = 2.0
    faf: float = 0.0
    partitions_p: int = 0
    walls_q: int = 0
    af_partition: float = 0.0
    af_wall: float = 0.0

    def __post_init__(self):
        _check_positive("d0", self.d0)
        _check_positive("exponent_n", self.exponent_n)
        if not math.isfinite(self.pl_d0):
            raise DomainError(f"pl_d0 must be finite, got {self.pl_d0!r}")
        for name in ("partitions_p", "walls_q"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
        for name in ("faf", "af_partition", "af_wall"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class HarvesterModel:
    """Square-root RF-to-DC transfer with a sensitivity floor and saturation."""

    efficiency_eta: float = 0.5
    v_max: float = 3.3
    p_ref: float = 1e-4
    sensitivity_floor: float = 1e-6

    def __post_init__(self):
        if not (0 < self.efficiency_eta <= 1):
            raise DomainError(f"efficiency_eta must lie in (0, 1], got {self.efficiency_eta!r}")
        _check_positive("v_max", self.v_max)
        if not (math.isfinite(self.sensitivity_floor) and self.sensitivity_floor >= 0):
            raise DomainError(f"sensitivity_floor must be >= 0, got {self.sensitivity_floor!r}")
        if not (math.isfinite(self.p_ref) and self.p_ref > self.sensitivity_floor):
            raise DomainError("p_ref must exceed sensitivity_floor")


def _friis_factor(geom: ChannelGeometry) -> float:
    return geom.gain_tx * geom.gain_rx * geom.wavelength_lambda**2 / (4 * math.pi * geom.distance_d) ** 2


def friis_received_power(geom: ChannelGeometry) -> float:
    """Free-space received power P_t G_t G_r lambda^2 / (4 pi d)^2 in watts."""
    return geom.power_tx * _friis_factor(geom)


def friis_gain_db(geom: ChannelGeometry) -> float:
    """Free-space link gain 10 log10(G_t G_r lambda^2 / (4 pi d)^2) in dB."""
    return 10.0 * math.log10(_friis_factor(geom))


def fresnel_radius(geom: ChannelGeometry, d1: float, n: int = 1) -> float:
    """Semi-minor radius of the n-th Fresnel zone at distance ``d1`` from Tx.

    General ellipse form sqrt(n lambda d1 (d - d1) / d). At the midpoint with
    n = 1 this is sqrt(lambda d1 / 2).
    """
    d = geom.distance_d
    if not (math.isfinite(d1) and 0 < d1 < d):
        raise DomainError(f"d1 must lie strictly inside (0, {d}), got {d1!r}")
    if int(n) != n or n < 1:
        raise DomainError(f"zone index must be an integer >= 1, got {n!r}")
    return math.sqrt(n * geom.wavelength_lambda * d1 * (d - d1) / d)


def midpoint_radius(geom: ChannelGeometry) -> float:
    return fresnel_radius(geom, geom.distance_d / 2, 1)


def _as_float_array(v):
    arr = np.asarray(v, dtype=np.float64)
    if np.isnan(arr).any():
        raise DomainError("Fresnel parameter v must not be NaN")
    return arr


def _scalar_or_array(arr, like):
    if np.ndim(like) == 0:
        return complex(arr.item()) if np.iscomplexobj(arr) else float(arr.item())
    return arr


def fresnel_amplitude_front(v):
    """Diffracted amplitude from the half-plane above clearance parameter ``v``."""
    arr = _as_float_array(v)
    c, s = kernels.fresnel_cs(arr)
    out = _HALF_1PJ * ((0.5 - c) - 1j * (0.5 - s))
    return _scalar_or_array(out, v)


def fresnel_amplitude_back(v):
    """Diffracted amplitude from the half-plane below clearance parameter ``v``."""
    arr = _as_float_array(v)
    c, s = kernels.fresnel_cs(arr)
    out = _HALF_1PJ * ((c + 0.5) - 1j * (s + 0.5))
    return _scalar_or_array(out, v)


def diffraction_amplitude(snapshot: BodySnapshot, r1: float):
    """Total relative field F_front(v_front) + F_back(v_back)."""
    _check_positive("r1", r1)
    v_front, v_back = snapshot.v(r1)
    arr_f = np.asarray(v_front, dtype=np.float64)
    arr_b = np.asarray(v_back, dtype=np.float64)
    total = np.asarray(fresnel_amplitude_front(arr_f)) + np.asarray(fresnel_amplitude_back(arr_b))
    return complex(total) if total.ndim == 0 else total


def diffraction_gain_db(snapshot: BodySnapshot, r1: float):
    """Diffraction gain 20 log10 |F_front + F_back| in dB.

    A fully blocked link returns :data:`DIFFRACTION_BLOCKED` (``-inf``)
    rather than NaN.
    """
    mag = np.abs(np.asarray(diffraction_amplitude(snapshot, r1)))
    with np.errstate(divide="ignore"):
        gain = np.where(mag > 0, 20.0 * np.log10(np.where(mag > 0, mag, 1.0)), DIFFRACTION_BLOCKED)
    return float(gain) if gain.ndim == 0 else gain


def path_loss_db(env: PathLossEnv, d: float) -> float:
    """Total log-distance path loss PL(d) in dB."""
    if not (math.isfinite(d) and d >= env.d0):
        raise DomainError(f"distance {d!r} must be finite and >= d0={env.d0}")
    return (env.pl_d0 + 10 * env.exponent_n * math.log10(d / env.d0) + env.faf
            + env.partitions_p * env.af_partition + env.walls_q * env.af_wall)


def excess_path_loss_db(env: PathLossEnv, d: float) -> float:
    """Path loss beyond free space: exponent above 2 plus floor/partition/wall terms.

    PL(d0) and the inverse-square part of the distance term are already in
    the Friis gain and are left out here.
    """
    if not (math.isfinite(d) and d >= env.d0):
        raise DomainError(f"distance {d!r} must be finite and >= d0={env.d0}")
    return (10 * (env.exponent_n - 2.0) * math.log10(d / env.d0) + env.faf
            + env.partitions_p * env.af_partition + env.walls_q * env.af_wall)


def harvested_power(geom: ChannelGeometry, env: PathLossEnv, snapshot: BodySnapshot | None = None,
                    r1: float | None = None, path_loss_mode: str = "excess"):
    """Received RF power in watts: Friis gain + diffraction gain - path loss.

    ``path_loss_mode`` picks the loss term: ``"excess"`` (default) applies
    only what free space does not already account for, ``"full"`` subtracts
    PL(d) verbatim on top of Friis, ``"none"`` ignores the environment.
    The dB sum is evaluated as the equivalent product of linear factors.
    Returns a float, or an array when the snapshot holds arrays.
    """
    if path_loss_mode == "excess":
        loss_db = excess_path_loss_db(env, geom.distance_d)
    elif path_loss_mode == "full":
        loss_db = path_loss_db(env, geom.distance_d)
    elif path_loss_mode == "none":
        loss_db = 0.0
    else:
        raise DomainError(f"path_loss_mode must be one of {PATH_LOSS_MODES}, got {path_loss_mode!r}")

    power = friis_received_power(geom)
    if loss_db != 0.0:
        power = power * 10.0 ** (-loss_db / 10.0)
    if snapshot is None:
        return power
    amp = np.asarray(diffraction_amplitude(snapshot, midpoint_radius(geom) if r1 is None else r1))
    out = power * (amp.real**2 + amp.imag**2)
    return float(out) if out.ndim == 0 else out


def power_to_voltage(model: HarvesterModel, p):
    """Rectified DC voltage for RF input ``p`` watts (scalar or array)."""
    arr = np.asarray(p, dtype=np.float64)
    if (arr < 0).any() or np.isnan(arr).any():
        raise DomainError("input power must be >= 0")
    excess = np.maximum(arr - model.sensitivity_floor, 0.0)
    v = np.minimum(model.v_max * np.sqrt(model.efficiency_eta * excess / model.p_ref), model.v_max)
    return float(v) if v.ndim == 0 else v


def charge_time(capacitance: float, v_target: float, p_net: float) -> float:
    """Seconds to charge ``capacitance`` from 0 V to ``v_target`` at constant net power."""
    _check_positive("capacitance", capacitance)
    _check_positive("v_target", v_target)
    if not (math.isfinite(p_net) and p_net > 0):
        raise DomainError(f"net charging power must be > 0, got {p_net!r}")
    return capacitance * v_target**2 / (2.0 * p_net)


#: Storage array of eight parallel 330 uF capacitors.
CAPACITOR_ARRAY_F = 8 * 330e-6
#: Supply voltage of the Bluetooth module powered from the array.
BLUETOOTH_SUPPLY_V = 3.3
#: Net charging power that reproduces the 44.1 s charge at 1.0 m.
NET_POWER_AT_1M_W = CAPACITOR_ARRAY_F * BLUETOOTH_SUPPLY_V**2 / (2.0 * 44.1)
