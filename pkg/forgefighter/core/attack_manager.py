"""
Counter-forensic attack manager.

This module provides a manager class that loads the attack families and
dispatches sampling, application and prior transport.
"""

import importlib
import logging

from forgefighter.constants import FAMILY_ORDER, AttackFamily
from forgefighter.core.errors import PreconditionError
from forgefighter.utils.seeding import make_rng, seed_for

logger = logging.getLogger(__name__)

# Slot reserved for the candidate-family draw; candidate k uses slot k.
CANDIDATE_FAMILY_SLOT = -1


class AttackManager:
    """Manager for the counter-forensic attack families."""

    def __init__(self, range_overrides=None, families_to_load=None):
        """
        Initialize the attack manager.

        Args:
            range_overrides: Optional {family: {param: (low, high)}} overrides
            families_to_load: Families to load (default: all six)
        """
        self.range_overrides = range_overrides or {}
        self.attacks = {}
        self._load_attacks(families_to_load)

    def _load_attacks(self, families_to_load=None):
        """
        Import and initialize each attack family.

        Args:
            families_to_load: Iterable of AttackFamily, or None for all
        """
        if families_to_load is None:
            families_to_load = FAMILY_ORDER

        for family in families_to_load:
            family = AttackFamily.parse(family)
            # e.g. REGRAIN -> forgefighter.attacks.regrain_attack.RegrainAttack
            module_name = f"{family.value}_attack"
            class_name = f"{family.value.capitalize()}Attack"
            try:
                module = importlib.import_module(f"forgefighter.attacks.{module_name}")
                attack_class = getattr(module, class_name)
            except (ImportError, AttributeError) as e:
                logger.warning(f"Failed to load attack {class_name}: {e}")
                continue

            overrides = self.range_overrides.get(family) or self.range_overrides.get(
                family.value
            )
            self.attacks[family] = attack_class(ranges=overrides)
            logger.debug(f"Loaded attack: {family.value}")

    def get_attack(self, family):
        """
        Look up a loaded attack.

        Args:
            family: AttackFamily or its name

        Returns:
            BaseAttack: The attack implementation
        """
        family = AttackFamily.parse(family)
        if family not in self.attacks:
            raise PreconditionError(f"Attack family not loaded: {family.value}")
        return self.attacks[family]

    def get_available_families(self):
        """
        Get the loaded families in canonical order.

        Returns:
            list: AttackFamily members
        """
        return [f for f in FAMILY_ORDER if f in self.attacks]

    def sample_attack(self, family, seed):
        return self.get_attack(family).sample(seed)

    def apply(self, img, inst, prior=None):
        return self.get_attack(inst.family).apply(img, inst, prior)

    def transform_prior(self, grid, inst):
        return self.get_attack(inst.family).transform_prior(grid, inst)

    def sample_candidates(self, global_seed, image_id, epoch, k):
        """
        Draw K candidate instances over distinct families.

        Families are drawn without replacement; candidate k's parameters use the
        seed derived for slot k.

        Args:
            global_seed: Run seed
            image_id: Sample id
            epoch: Epoch index
            k: Number of candidates (1..number of loaded families)

        Returns:
            list: AttackInstance per slot
        """
        families = self.get_available_families()
        if not 1 <= k <= len(families):
            raise PreconditionError(f"K must be in [1, {len(families)}], got {k}")

        rng = make_rng(seed_for(global_seed, image_id, epoch, CANDIDATE_FAMILY_SLOT))
        order = rng.permutation(len(families))[:k]
        return [
            self.sample_attack(families[idx], seed_for(global_seed, image_id, epoch, slot))
            for slot, idx in enumerate(order)
        ]

    def evaluation_instance(self, family, global_seed, image_id):
        """One deterministic instance per (family, test image), seeded from the id."""
        family = AttackFamily.parse(family)
        slot = FAMILY_ORDER.index(family)
        return self.sample_attack(family, seed_for(global_seed, image_id, 0, slot))


_default_manager = None


def default_manager():
    """Shared manager with the documented default ranges."""
    global _default_manager
    if _default_manager is None:
        _default_manager = AttackManager()
    return _default_manager


def get_attack(family):
    return default_manager().get_attack(family)


def sample_attack(family, seed):
    """
    Sample an attack instance with the default ranges.

    Args:
        family: AttackFamily or name
        seed: 64-bit seed

    Returns:
        AttackInstance: Reproducible instance
    """
    return default_manager().sample_attack(family, seed)
