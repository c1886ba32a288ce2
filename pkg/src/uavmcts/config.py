"""World parameters for the UAV-aided MEC simulator.

All quantities are stored in SI units. Noise power and the reference channel
gain are configured in dBm / dB and converted on access.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

LAYOUTS = ("grid2d", "uniform2d", "planes3d")


class ConfigError(ValueError):
    """Raised when a configuration value is out of range or inconsistent."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class WorldConfig:
    region_size: float = 500.0
    num_users: int = 10
    num_hover_points: int = 20
    hover_layout: str = "grid2d"
    altitude: float = 100.0
    plane_heights: tuple[float, ...] = (25.0, 50.0, 75.0)
    uav_mass: float = 10.0
    uav_speed: float = 20.0
    # speed at which the reward's energy normaliser is evaluated, so rewards
    # at different speeds share one scale
    norm_speed: float = 20.0
    uav_accel: float = 15.0
    gravity: float = 9.8
    noise_power_dbm: float = -120.0
    ref_gain_db: float = -50.0
    hover_power: float = 1.0
    upload_power: float = 0.1
    task_bits: float = 1e5
    kappa1: float = 0.03
    kappa2: float = 5.0
    cpu_cycles: float = 1000.0
    cpu_freq: float = 2e9
    switched_cap: float = 1e-28
    task_mean: float = 10.0
    task_std: float = 5.0
    task_threshold: float = 15.0
    battery_e0: float = 1.5e6
    battery_threshold: float = 0.1
    mobility_epsilon: float = 25.0
    tree_depth: int = 10
    u_max: int = 25
    allow_hover_in_place: bool = False
    start_hover_id: int = 0
    dist_tie_tol: float = field(default=1e-6, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "plane_heights", tuple(float(h) for h in self.plane_heights))
        self.validate()

    def validate(self) -> None:
        if not self.region_size > 0:
            raise ConfigError("region_size must be > 0")
        if self.num_users < 1:
            raise ConfigError("num_users must be >= 1")
        if self.num_hover_points < 1:
            raise ConfigError("num_hover_points must be >= 1")
        if self.hover_layout not in LAYOUTS:
            raise ConfigError(f"hover_layout must be one of {LAYOUTS}, got {self.hover_layout!r}")
        if not 0.0 < self.battery_threshold < 1.0:
            raise ConfigError("battery_threshold must lie in (0, 1)")
        if self.u_max < self.task_mean:
            raise ConfigError("u_max must be >= task_mean")
        if self.uav_speed <= 0:
            raise ConfigError("uav_speed must be > 0")
        if self.norm_speed <= 0:
            raise ConfigError("norm_speed must be > 0")
        if self.task_std < 0 or self.mobility_epsilon < 0:
            raise ConfigError("task_std and mobility_epsilon must be >= 0")
        if self.tree_depth < 1:
            raise ConfigError("tree_depth must be >= 1")
        if self.battery_e0 <= 0:
            raise ConfigError("battery_e0 must be > 0")
        if self.hover_layout == "planes3d":
            hs = self.plane_heights
            if not hs or any(b <= a for a, b in zip(hs, hs[1:])):
                raise ConfigError("plane_heights must be strictly increasing")
            if hs[0] <= 0:
                raise ConfigError("plane_heights must be positive")
            if self.num_hover_points % len(hs):
                raise ConfigError(
                    f"planes3d needs num_hover_points divisible by {len(hs)}, got {self.num_hover_points}"
                )
        elif self.altitude <= 0:
            raise ConfigError("altitude must be > 0")
        if not 0 <= self.start_hover_id < self.num_hover_points:
            raise ConfigError("start_hover_id out of range")
        if self.num_hover_points < 2 and not self.allow_hover_in_place:
            raise ConfigError("a single hover point needs allow_hover_in_place")

    @property
    def is_3d(self) -> bool:
        return self.hover_layout == "planes3d"

    @property
    def noise_power(self) -> float:
        return dbm_to_watts(self.noise_power_dbm)

    @property
    def ref_gain(self) -> float:
        return db_to_linear(self.ref_gain_db)

    @property
    def user_z_max(self) -> float:
        return max(self.plane_heights) if self.is_3d else 0.0

    @property
    def energy_budget(self) -> float:
        """Energy that may be spent before the battery hits the threshold."""
        return (1.0 - self.battery_threshold) * self.battery_e0

    @cached_property
    def w_max(self) -> float:
        """Upper bound on the energy of any single interval.

        Worst case flight is the region diagonal, worst hover is ``u_max``
        tasks uploaded at the rate of the farthest possible user. The flight
        term is taken at ``norm_speed``, or at ``uav_speed`` when that costs
        more, so the bound holds while the scale stays fixed across slower
        speeds.
        """
        from .env import channel_gain_d2, fly_energy, upload_rate

        r = self.region_size
        if self.is_3d:
            hs = self.plane_heights
            fly_d = math.sqrt(2 * r * r + (hs[-1] - hs[0]) ** 2)
            user_d2 = 2 * r * r + hs[-1] ** 2
        else:
            fly_d = math.sqrt(2) * r
            user_d2 = 2 * r * r + self.altitude**2
        e_f1, e_f2 = max(
            (fly_energy(fly_d, replace(self, uav_speed=v)) for v in (self.uav_speed, self.norm_speed)),
            key=sum,
        )
        bits = self.u_max * self.task_bits
        rate = upload_rate(channel_gain_d2(user_d2, self), self)
        e_h = self.hover_power * bits / rate
        e_c = self.switched_cap * self.cpu_cycles * bits * self.cpu_freq**2
        return e_h + e_c + e_f1 + e_f2
