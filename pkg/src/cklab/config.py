"""Experiment configs: flat key = value text, canonical round-trip."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .activations import parse_activation
from .distributions import parse_distribution
from .ensemble import Shape
from .errors import ConfigError

__all__ = ["ExperimentConfig", "parse_config", "load_config", "CONFIG_KEYS"]

CONFIG_KEYS = (
    "n0", "n1", "m",
    "dist_w", "dist_x", "activation",
    "trials", "seed", "out", "convention", "bins",
)

_INT_KEYS = {"n0", "n1", "m", "trials", "seed"}
_REQUIRED = ("n0", "n1", "m")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: shape, entry laws, activation, trial plan, output options.

    Distribution and activation specs are normalized to their canonical
    strings at construction, so equal configs serialize identically and
    ``parse_config(cfg.canonical()) == cfg``.
    """

    n0: int
    n1: int
    m: int
    dist_w: str = "gaussian(var=1.0)"
    dist_x: str = "gaussian(var=1.0)"
    activation: str = "identity"
    trials: int = 1
    seed: int = 0
    out: str = "cklab-out"
    convention: str = "covariant"
    bins: str = "fd"

    def __post_init__(self):
        object.__setattr__(self, "dist_w", parse_distribution(self.dist_w).spec)
        object.__setattr__(self, "dist_x", parse_distribution(self.dist_x).spec)
        object.__setattr__(self, "activation", parse_activation(self.activation).label)
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.convention not in ("paper", "covariant"):
            raise ConfigError(
                f"convention must be 'paper' or 'covariant', got {self.convention!r}"
            )
        if not (self.bins == "fd" or self.bins.isdigit()):
            raise ConfigError(f"bins must be 'fd' or an integer, got {self.bins!r}")
        self.shape()  # validates dimensions

    def shape(self) -> Shape:
        return Shape(self.n0, self.n1, self.m)

    def canonical(self) -> str:
        """Canonical flat text; fixed key order, one key per line."""
        lines = [f"{key} = {getattr(self, key)}" for key in CONFIG_KEYS]
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` text ('#' comments allowed)."""
    items: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in items:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        items[key] = (value, lineno)
    for key in _REQUIRED:
        if key not in items:
            raise ConfigError(f"missing required key {key!r}")
    kwargs = {}
    for key, (value, lineno) in items.items():
        if key in _INT_KEYS:
            try:
                kwargs[key] = int(value)
            except ValueError as exc:
                raise ConfigError(
                    f"line {lineno}: field {key!r} needs an integer, got {value!r}"
                ) from exc
        else:
            kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except Exception as exc:  # normalize nested validation errors
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            return parse_config(fh.read())
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
