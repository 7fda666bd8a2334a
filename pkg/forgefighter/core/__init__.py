"""
Core functionality for the ForgeFighter system.

This module provides the error hierarchy, the base attack class and the attack
manager. The detector, objective, trainer and defense live in their own modules.
"""

from .errors import (
    ForgeFighterError,
    ImageFormatError,
    ManifestError,
    MissingCacheError,
    PreconditionError,
    UndefinedMetricError,
)
from .base_attack import AttackInstance, BaseAttack
from .attack_manager import AttackManager
