"""System-level model parameters for the broadcast channel.

Rates are nats per channel use, powers are watts with unit-slot
normalization; see `swipt.units` for the CLI-facing conversions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError


class Architecture(str, Enum):
    """Receiver front-end kind."""

    IDEAL = "ideal"
    TIME_SWITCHING = "time_switching"
    POWER_SPLITTING = "power_splitting"

    @classmethod
    def parse(cls, value) -> "Architecture":
        if isinstance(value, Architecture):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "ideal": cls.IDEAL,
            "ts": cls.TIME_SWITCHING,
            "time_switching": cls.TIME_SWITCHING,
            "ps": cls.POWER_SPLITTING,
            "power_splitting": cls.POWER_SPLITTING,
        }
        if key not in aliases:
            raise InvalidParameterError(f"unknown receiver architecture: {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class SystemConfig:
    """Scalar model parameters shared by the solver and simulator.

    Attributes:
        num_users: number of receivers L.
        noise_vars: per-user noise variances (power units), all > 0.
        min_rates: per-user minimum rates rho(l) in nats/use, >= 0.
        deficits: per-user average energy deficits Delta_l (power units), >= 0.
        efficiency: harvesting efficiency eta in (0, 1].
        tx_budget: mean transmitter harvest E[Y^s] (power units), > 0.
        architectures: per-user receiver kind.
        rx_ambient_mean / rx_consumption_mean: optional per-user means of the
            receiver-side ambient harvest and consumption processes; when both
            are given, deficits must equal max(0, consumption - ambient).
    """

    num_users: int
    noise_vars: np.ndarray
    min_rates: np.ndarray
    deficits: np.ndarray
    efficiency: float
    tx_budget: float
    architectures: tuple[Architecture, ...]
    rx_ambient_mean: np.ndarray | None = field(default=None)
    rx_consumption_mean: np.ndarray | None = field(default=None)

    def __post_init__(self):
        L = int(self.num_users)
        if L < 1:
            raise InvalidParameterError("num_users must be >= 1")

        def as_vec(name, value):
            arr = np.asarray(value, dtype=float)
            if arr.shape == ():
                arr = np.full(L, float(arr))
            if arr.shape != (L,):
                raise InvalidParameterError(f"{name} must have one entry per user")
            arr.setflags(write=False)
            return arr

        noise = as_vec("noise_vars", self.noise_vars)
        rates = as_vec("min_rates", self.min_rates)
        ambient = None if self.rx_ambient_mean is None else as_vec("rx_ambient_mean", self.rx_ambient_mean)
        consumption = None if self.rx_consumption_mean is None else as_vec("rx_consumption_mean", self.rx_consumption_mean)

        deficits = self.deficits
        if deficits is None:
            if ambient is None or consumption is None:
                raise InvalidParameterError("deficits or both receiver-side means are required")
            deficits = np.maximum(0.0, consumption - ambient)
        deficits = as_vec("deficits", deficits)

        if np.any(noise <= 0.0):
            raise InvalidParameterError("noise variances must be strictly positive")
        if np.any(rates < 0.0):
            raise InvalidParameterError("minimum rates must be nonnegative")
        if np.any(deficits < 0.0):
            raise InvalidParameterError("deficits must be nonnegative")
        if not (0.0 < float(self.efficiency) <= 1.0):
            raise InvalidParameterError("efficiency must be in (0, 1]")
        if float(self.tx_budget) <= 0.0:
            raise InvalidParameterError("tx_budget must be positive")
        if ambient is not None and consumption is not None:
            implied = np.maximum(0.0, consumption - ambient)
            if np.max(np.abs(implied - deficits)) > 1e-12:
                raise InvalidParameterError(
                    "deficits inconsistent with receiver-side means: "
                    f"expected {implied}, got {deficits}"
                )

        archs = tuple(Architecture.parse(a) for a in self.architectures)
        if len(archs) != L:
            raise InvalidParameterError("architectures must have one entry per user")

        object.__setattr__(self, "num_users", L)
        object.__setattr__(self, "noise_vars", noise)
        object.__setattr__(self, "min_rates", rates)
        object.__setattr__(self, "deficits", deficits)
        object.__setattr__(self, "efficiency", float(self.efficiency))
        object.__setattr__(self, "tx_budget", float(self.tx_budget))
        object.__setattr__(self, "architectures", archs)
        object.__setattr__(self, "rx_ambient_mean", ambient)
        object.__setattr__(self, "rx_consumption_mean", consumption)

    @property
    def is_time_switching(self) -> np.ndarray:
        return np.array([a is Architecture.TIME_SWITCHING for a in self.architectures])

    @property
    def is_power_splitting(self) -> np.ndarray:
        return np.array([a is Architecture.POWER_SPLITTING for a in self.architectures])

    @property
    def is_ideal(self) -> np.ndarray:
        return np.array([a is Architecture.IDEAL for a in self.architectures])

    def replace(self, **kwargs) -> "SystemConfig":
        """Return a copy with some fields overridden."""
        base = {
            "num_users": self.num_users,
            "noise_vars": self.noise_vars,
            "min_rates": self.min_rates,
            "deficits": self.deficits,
            "efficiency": self.efficiency,
            "tx_budget": self.tx_budget,
            "architectures": self.architectures,
            "rx_ambient_mean": self.rx_ambient_mean,
            "rx_consumption_mean": self.rx_consumption_mean,
        }
        base.update(kwargs)
        return SystemConfig(**base)

    def permuted(self, perm: Sequence[int]) -> "SystemConfig":
        """Relabel users so new index i is old index perm[i]."""
        perm = list(perm)
        take = lambda arr: None if arr is None else arr[perm]
        return SystemConfig(
            num_users=self.num_users,
            noise_vars=take(self.noise_vars),
            min_rates=take(self.min_rates),
            deficits=take(self.deficits),
            efficiency=self.efficiency,
            tx_budget=self.tx_budget,
            architectures=tuple(self.architectures[i] for i in perm),
            rx_ambient_mean=take(self.rx_ambient_mean),
            rx_consumption_mean=take(self.rx_consumption_mean),
        )

    def to_dict(self) -> dict:
        d = {
            "num_users": self.num_users,
            "noise_vars": self.noise_vars.tolist(),
            "min_rates": self.min_rates.tolist(),
            "deficits": self.deficits.tolist(),
            "efficiency": self.efficiency,
            "tx_budget": self.tx_budget,
            "architectures": [a.value for a in self.architectures],
        }
        if self.rx_ambient_mean is not None:
            d["rx_ambient_mean"] = self.rx_ambient_mean.tolist()
        if self.rx_consumption_mean is not None:
            d["rx_consumption_mean"] = self.rx_consumption_mean.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        return cls(
            num_users=int(d["num_users"]),
            noise_vars=np.asarray(d["noise_vars"], dtype=float),
            min_rates=np.asarray(d["min_rates"], dtype=float),
            deficits=np.asarray(d["deficits"], dtype=float),
            efficiency=float(d["efficiency"]),
            tx_budget=float(d["tx_budget"]),
            architectures=tuple(d["architectures"]),
            rx_ambient_mean=None if "rx_ambient_mean" not in d else np.asarray(d["rx_ambient_mean"], dtype=float),
            rx_consumption_mean=None if "rx_consumption_mean" not in d else np.asarray(d["rx_consumption_mean"], dtype=float),
        )


@dataclass(frozen=True)
class HarvestFractions:
    """Per-user harvest fraction pi_E(l) in [0, 1].

    For a time-switching receiver this is the probability of spending a slot
    harvesting; for a power-splitting receiver it is the constant split sent
    to the rectenna.  `decode` is the complement 1 - pi_E.
    """

    harvest: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.harvest, dtype=float)
        if arr.ndim != 1:
            raise InvalidParameterError("harvest fractions must be a 1-D vector")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InvalidParameterError("harvest fractions must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "harvest", arr)

    @property
    def decode(self) -> np.ndarray:
        return 1.0 - self.harvest

    @classmethod
    def zeros(cls, num_users: int) -> "HarvestFractions":
        return cls(harvest=np.zeros(num_users))

    def __len__(self) -> int:
        return self.harvest.size
