"""Physical constants for orbit prediction and path geometry.

Earth constants are the exact values used throughout the toolkit; the
rotation period and angular rate are redundant and checked against each
other at import time (``omega_e`` must equal ``2*pi/T_e`` to 1e-9
relative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

#: Speed of light in vacuum (m/s); not part of the orbit constant set.
SPEED_OF_LIGHT_M_S = 299_792_458.0


@dataclass(frozen=True)
class EarthConstants:
    """Constant set required for orbit prediction.

    Units: km, kg, s, rad/s; ``grav_const`` is in km^3 s^-2 kg^-1 so that
    ``grav_const * mass_kg`` is directly usable with km-valued radii.
    """

    radius_km: float = 6378.137
    mass_kg: float = 5.9722e24
    rotation_period_s: float = 86164.09054
    rotation_rate_rad_s: float = 7.29211585453e-5
    grav_const: float = 6.67408e-20
    j2: float = 0.001082636

    @property
    def mu_km3_s2(self) -> float:
        """Gravitational parameter G*M_e (km^3/s^2)."""
        return self.grav_const * self.mass_kg

    def check_consistency(self, rtol: float = 1e-9) -> None:
        """Raise if the two rotation constants disagree beyond ``rtol``."""
        derived = 2.0 * math.pi / self.rotation_period_s
        rel = abs(self.rotation_rate_rad_s - derived) / self.rotation_rate_rad_s
        if rel >= rtol:
            raise ValueError(
                f"rotation rate {self.rotation_rate_rad_s} inconsistent with "
                f"2*pi/T_e = {derived} (relative error {rel:.3e})"
            )


#: Canonical Earth constant set.
EARTH = EarthConstants()
EARTH.check_consistency()
