"""
Run configuration.

Composes the training, defense, loss and attack-range settings with the global
run options and round-trips them through a flat ``section.key=value`` text file
that is echoed into every output directory.
"""

import logging
from dataclasses import dataclass, field, fields

from forgefighter.constants import DEFAULT_ATTACK_RANGES, FAMILY_ORDER, AttackFamily
from forgefighter.core.defense import DefenseConfig
from forgefighter.core.errors import PreconditionError
from forgefighter.core.objective import LossWeights
from forgefighter.core.trainer import TrainConfig
from forgefighter.utils.preprocess import DEFAULT_WORKING_SIZE

logger = logging.getLogger(__name__)

RUN_CONFIG_FILE = "run_config.txt"


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(_format(v) for v in value)
    return str(value)


def _coerce(text, template):
    """Parse text into the type of the template value."""
    if isinstance(template, bool):
        if text not in ("true", "false"):
            raise PreconditionError(f"Expected true/false, got {text!r}")
        return text == "true"
    if isinstance(template, int):
        return int(text)
    if isinstance(template, float):
        return float(text)
    if isinstance(template, tuple):
        parts = text.split(",")
        if len(parts) != len(template):
            raise PreconditionError(f"Expected {len(template)} values, got {text!r}")
        return tuple(_coerce(p, t) for p, t in zip(parts, template))
    return text


@dataclass
class RunOptions:
    """Global run settings outside the component configs."""

    working_size: int = DEFAULT_WORKING_SIZE
    mask_grid: int = 32
    theta: float = 0.5
    dilate_radius: int = 8
    bins: int = 10
    prior_margin: float = 0.15
    prior_sigma_frac: float = 0.05
    surveillance_threshold: float = 0.35
    out_dir: str = "runs"


@dataclass
class RunConfig:
    """Everything needed to reproduce a run."""

    run: RunOptions = field(default_factory=RunOptions)
    train: TrainConfig = field(default_factory=TrainConfig)
    defense: DefenseConfig = field(default_factory=DefenseConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    attack_ranges: dict = field(default_factory=dict)

    SECTIONS = ("run", "train", "defense", "loss")

    def effective_ranges(self):
        """Per-family parameter ranges with overrides applied."""
        ranges = {}
        for family in FAMILY_ORDER:
            merged = dict(DEFAULT_ATTACK_RANGES[family])
            merged.update(self.attack_ranges.get(family.value, {}))
            ranges[family.value] = merged
        return ranges

    def set_range(self, family, param, low, high):
        family = AttackFamily.parse(family)
        if param not in DEFAULT_ATTACK_RANGES[family]:
            raise PreconditionError(f"Unknown {family.value} parameter: {param}")
        template = DEFAULT_ATTACK_RANGES[family][param]
        self.attack_ranges.setdefault(family.value, {})[param] = _coerce(
            f"{low},{high}", tuple(template)
        )

    def to_text(self):
        """
        Serialize as sorted ``section.key=value`` lines.

        Returns:
            str: Text form, newline terminated
        """
        lines = []
        for section in self.SECTIONS:
            component = getattr(self, section)
            for f in fields(component):
                lines.append(f"{section}.{f.name}={_format(getattr(component, f.name))}")
        for family, params in self.effective_ranges().items():
            for param, bounds in params.items():
                lines.append(f"attack.{family}.{param}={_format(tuple(bounds))}")
        return "\n".join(sorted(lines)) + "\n"

    @classmethod
    def from_text(cls, text):
        """
        Parse the text form; unknown keys are errors, missing keys keep defaults.

        Returns:
            RunConfig: Parsed configuration
        """
        values = {section: {} for section in cls.SECTIONS}
        config = cls()
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise PreconditionError(f"Line {number}: expected key=value, got {raw!r}")
            parts = key.split(".")
            if parts[0] == "attack" and len(parts) == 3:
                low, _, high = value.partition(",")
                config.set_range(parts[1], parts[2], low, high)
                continue
            if len(parts) != 2 or parts[0] not in values:
                raise PreconditionError(f"Line {number}: unknown key {key!r}")
            values[parts[0]][parts[1]] = value

        for section, entries in values.items():
            component = getattr(config, section)
            known = {f.name for f in fields(component)}
            unknown = set(entries) - known
            if unknown:
                raise PreconditionError(f"Unknown {section} keys: {sorted(unknown)}")
            kwargs = {
                name: _coerce(text, getattr(component, name)) for name, text in entries.items()
            }
            current = {f.name: getattr(component, f.name) for f in fields(component)}
            current.update(kwargs)
            setattr(config, section, type(component)(**current))

        # drop entries equal to the defaults
        config.attack_ranges = {
            family: {
                p: b
                for p, b in params.items()
                if tuple(b) != tuple(DEFAULT_ATTACK_RANGES[AttackFamily.parse(family)][p])
            }
            for family, params in config.attack_ranges.items()
        }
        config.attack_ranges = {f: p for f, p in config.attack_ranges.items() if p}
        return config

    def range_overrides(self):
        """Overrides in the form AttackManager expects."""
        return {family: dict(params) for family, params in self.attack_ranges.items()}


def load_run_config(path):
    with open(path, encoding="utf-8") as f:
        return RunConfig.from_text(f.read())


def save_run_config(config, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(config.to_text())
