"""
Base counter-forensic attack.

This module provides the attack instance record and the abstract base class all
attack families implement.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from forgefighter.constants import DEFAULT_ATTACK_RANGES, AttackFamily
from forgefighter.core.errors import PreconditionError
from forgefighter.utils.seeding import make_rng


def _format_value(value):
    if isinstance(value, (tuple, list, np.ndarray)):
        return ",".join(_format_value(v) for v in np.asarray(value).ravel().tolist())
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _parse_value(text):
    if "," in text:
        return tuple(float(v) for v in text.split(","))
    try:
        return int(text)
    except ValueError:
        return float(text)


@dataclass(frozen=True)
class AttackInstance:
    """An attack family with fully materialized parameters and the seed they came from."""

    family: AttackFamily
    params: dict = field(default_factory=dict)
    seed: int = 0

    def to_record(self):
        """
        Serialize as ``family;key=value;...;seed=...`` with keys in alphabetical order.

        Returns:
            str: Text record
        """
        parts = [self.family.value]
        for key in sorted(self.params):
            parts.append(f"{key}={_format_value(self.params[key])}")
        parts.append(f"seed={int(self.seed)}")
        return ";".join(parts)

    @classmethod
    def from_record(cls, record):
        """Parse a record produced by to_record."""
        fields = record.strip().split(";")
        family = AttackFamily.parse(fields[0])
        params = {}
        seed = 0
        for item in fields[1:]:
            key, _, value = item.partition("=")
            if key == "seed":
                seed = int(value)
            else:
                params[key] = _parse_value(value)
        return cls(family=family, params=params, seed=seed)

    def __getitem__(self, key):
        return self.params[key]


class BaseAttack(ABC):
    """
    Base class for all counter-forensic attacks.

    Subclasses set ``family`` and implement parameter sampling and application.
    Geometric families also override ``transform_prior``.
    """

    family = None

    def __init__(self, ranges=None):
        """
        Initialize the attack.

        Args:
            ranges: Optional per-parameter (low, high) overrides
        """
        self.ranges = dict(DEFAULT_ATTACK_RANGES[self.family])
        if ranges:
            unknown = set(ranges) - set(self.ranges)
            if unknown:
                raise PreconditionError(
                    f"Unknown {self.family.value} parameters: {sorted(unknown)}"
                )
            self.ranges.update({k: tuple(v) for k, v in ranges.items()})
        self.name = self.family.value

    def sample(self, seed):
        """
        Draw an instance from the documented ranges with a seeded generator.

        Args:
            seed: 64-bit seed

        Returns:
            AttackInstance: Instance recording the seed
        """
        rng = make_rng(seed)
        return AttackInstance(family=self.family, params=self.sample_params(rng), seed=int(seed))

    @abstractmethod
    def sample_params(self, rng):
        """
        Draw this family's parameters.

        Args:
            rng: numpy Generator

        Returns:
            dict: Parameter record
        """
        pass

    @abstractmethod
    def apply(self, img, inst, prior=None):
        """
        Apply the attack.

        Args:
            img: (H, W, 3) image
            inst: AttackInstance of this family
            prior: Optional weak prior grid at the image resolution

        Returns:
            numpy.ndarray: Attacked image of the same size
        """
        pass

    def transform_prior(self, grid, inst):
        """
        Transport a prior grid through the attack. Photometric by default.

        Args:
            grid: Prior grid
            inst: AttackInstance of this family

        Returns:
            numpy.ndarray: Transported grid
        """
        self.check_instance(inst)
        return np.array(grid, dtype=np.float64, copy=True)

    def check_instance(self, inst):
        if inst.family != self.family:
            raise PreconditionError(
                f"{self.__class__.__name__} cannot apply a {inst.family.value} instance"
            )

    def uniform(self, rng, key):
        low, high = self.ranges[key]
        return float(rng.uniform(low, high))

    def integer(self, rng, key):
        low, high = self.ranges[key]
        return int(rng.integers(int(low), int(high) + 1))
