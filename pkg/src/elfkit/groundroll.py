"""Landing ground-roll distance with slope and surface corrections.

The deceleration on the ground is modelled as ``a(V) = g*(K_T + K_A*V**2)``
with constant thrust/friction term ``K_T`` and aerodynamic term ``K_A``.
Integrating ``V/a`` from touchdown to standstill and adding the free roll
before braking gives the ground roll

    s_g = V_td*t_r + ln(K_T / (K_T + K_A*V_td**2)) / (2*g*K_A)

Slopes are angles in the landing direction, positive uphill.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

# EASA runway-length factors for grass surfaces
GRASS_FIRM = 1.15
WET_SHORT_GRASS = 1.6

# length surcharge per percent of downslope
DOWNSLOPE_SURCHARGE = 0.05


class GroundRollError(ValueError):
    """Raised when the physics cannot produce a finite stopping distance."""


class NonStoppingError(GroundRollError):
    pass


@dataclass(frozen=True)
class AircraftConfig:
    """Aircraft parameters; defaults are the Diamond DA20-C1."""

    mass: float = 800.0  # kg
    wing_area: float = 11.6  # m^2
    wing_span: float = 10.89  # m
    ld_max: float = 11.0
    mu: float = 0.2  # soft turf, brakes on
    reaction_time: float = 3.0  # s
    touchdown_speed: float = 21.298  # m/s, 1.15 * V_stall
    thrust: float = 0.0  # N

    def __post_init__(self):
        for name in ("mass", "wing_area", "wing_span", "ld_max", "reaction_time",
                     "touchdown_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.mu <= 1:
            raise ValueError("mu must lie in (0, 1]")
        if self.thrust < 0:
            raise ValueError("thrust must be non-negative")


@dataclass(frozen=True)
class Atmosphere:
    rho: float = 1.225  # kg/m^3, ISA sea level at 15 C
    g: float = 9.807  # m/s^2

    def __post_init__(self):
        if not (self.rho > 0 and self.g > 0):
            raise ValueError("rho and g must be positive")


@dataclass(frozen=True)
class AeroConstants:
    aspect_ratio: float
    oswald: float
    k_induced: float
    cd0: float
    dynamic_pressure: float
    cl: float
    k_t: float
    k_a: float
    weight: float


def derive_aero(config: AircraftConfig, atm: Atmosphere = Atmosphere(),
                alpha: float = 0.0) -> AeroConstants:
    """Aerodynamic constants of the deceleration model at slope ``alpha`` (rad)."""
    if not abs(alpha) < math.pi / 2:
        raise ValueError("slope angle must satisfy |alpha| < pi/2")
    weight = config.mass * atm.g
    aspect = config.wing_span ** 2 / config.wing_area
    oswald = 1.78 * (1 - 0.045 * aspect ** 0.68) - 0.64
    if oswald <= 0:
        raise GroundRollError(f"Oswald factor {oswald:.4f} <= 0 for aspect ratio {aspect:.3f}")
    k = 1.0 / (math.pi * aspect * oswald)
    cd0 = 1.0 / ((2 * config.ld_max) ** 2 * k)
    q = 0.5 * atm.rho * config.touchdown_speed ** 2
    cl = weight / (q * config.wing_area)
    k_t = config.thrust / weight - math.sin(alpha) - config.mu * math.cos(alpha)
    k_a = atm.rho * config.wing_area / (2 * weight) * (config.mu * cl - cd0 - k * cl * cl)
    return AeroConstants(aspect, oswald, k, cd0, q, cl, k_t, k_a, weight)


def deceleration(aero: AeroConstants, atm: Atmosphere, speed: float) -> float:
    """Longitudinal acceleration at ground speed ``speed`` (negative = braking)."""
    return atm.g * (aero.k_t + aero.k_a * speed * speed)


def ground_roll_distance(config: AircraftConfig, atm: Atmosphere = Atmosphere(),
                         alpha: float = 0.0) -> float:
    """Free roll plus braked ground roll to standstill, meters."""
    aero = derive_aero(config, atm, alpha)
    return _ground_roll(aero, atm, config.touchdown_speed, config.reaction_time)


def _ground_roll(aero: AeroConstants, atm: Atmosphere, v_td: float, t_r: float) -> float:
    k_t, k_a = aero.k_t, aero.k_a
    if k_a == 0:
        raise GroundRollError("aerodynamic term K_A is zero")
    end = k_t + k_a * v_td * v_td
    # braking must persist over the whole speed range 0..V_td
    if not (k_t < 0 and end < 0):
        raise NonStoppingError(
            f"non-stopping configuration: K_T={k_t:.6g}, K_T+K_A*V^2={end:.6g}")
    ratio = k_t / end
    if not (ratio > 0 and math.isfinite(ratio)):
        raise NonStoppingError(f"non-stopping configuration: log argument {ratio!r}")
    return v_td * t_r + math.log(ratio) / (2 * atm.g * k_a)


def ground_roll_expanded(config: AircraftConfig, atm: Atmosphere = Atmosphere(),
                         alpha: float = 0.0) -> float:
    """Same distance written out in the primitive parameters, with no
    intermediate constants (used to cross-check the factored form)."""
    m, S, b = config.mass, config.wing_area, config.wing_span
    mu, v, t_r, rho, g = config.mu, config.touchdown_speed, config.reaction_time, atm.rho, atm.g
    A = b ** 2 / S
    e = 1.78 * (1 - 0.045 * A ** 0.68) - 0.64
    K = 1.0 / (math.pi * A * e)
    W = m * g
    cl = W / (0.5 * rho * v ** 2 * S)
    cd0 = 1.0 / ((2 * config.ld_max) ** 2 * K)
    aero = rho * S / (2 * W) * (mu * cl - cd0 - K * cl * cl)
    base = config.thrust / W - math.sin(alpha) - mu * math.cos(alpha)
    return v * t_r + 1.0 / (2 * g * aero) * math.log(base / (base + aero * v ** 2))


def ground_roll_slope_derivative(config: AircraftConfig, atm: Atmosphere = Atmosphere(),
                                 alpha: float = 0.0) -> float:
    """Analytic d(s_g)/d(alpha), meters per radian."""
    aero = derive_aero(config, atm, alpha)
    v2 = config.touchdown_speed ** 2
    dkt = -math.cos(alpha) + config.mu * math.sin(alpha)
    return dkt * (1.0 / aero.k_t - 1.0 / (aero.k_t + aero.k_a * v2)) / (2 * atm.g * aero.k_a)


def downslope_factor(slope_pct: float) -> float:
    return 1.0 + DOWNSLOPE_SURCHARGE * abs(slope_pct) if slope_pct < 0 else 1.0


def required_length(ground_roll: float, surface_factor: float = 1.0,
                    slope_pct: float = 0.0) -> float:
    """Runway length after surface factor and the 5 %-per-% downslope surcharge.

    For a downslope, ``ground_roll`` must already be computed at that slope.
    """
    if not ground_roll > 0:
        raise ValueError("ground roll must be positive")
    if surface_factor < 1:
        raise ValueError("surface factor must be >= 1")
    return ground_roll * surface_factor * downslope_factor(slope_pct)


def slope_angle(slope_pct: float) -> float:
    """Inclination angle in radians for a slope given in percent."""
    return math.atan(slope_pct / 100.0)


def required_length_at_slope(config: AircraftConfig, atm: Atmosphere = Atmosphere(),
                             slope_pct: float = 0.0, surface_factor: float = GRASS_FIRM) -> float:
    s_g = ground_roll_distance(config, atm, slope_angle(slope_pct))
    return required_length(s_g, surface_factor, slope_pct)


# key names accepted in aircraft config files
_AIRCRAFT_KEYS = {f.name for f in fields(AircraftConfig)}
_ATM_KEYS = {f.name for f in fields(Atmosphere)}


def load_config(path) -> tuple[AircraftConfig, Atmosphere]:
    """Read ``key = value`` lines; keys may carry an ``aircraft.``/``atmosphere.`` prefix.

    Unknown keys and keys from other sections are ignored.
    """
    from .config import read_keyvalue

    values = read_keyvalue(path)
    air, atm = {}, {}
    for key, raw in values.items():
        section, _, name = key.rpartition(".")
        if section in ("", "aircraft") and name in _AIRCRAFT_KEYS:
            air[name] = float(raw)
        elif section in ("", "atmosphere") and name in _ATM_KEYS:
            atm[name] = float(raw)
    return AircraftConfig(**air), Atmosphere(**atm)
