"""Run configuration: one flat record binding every pipeline parameter.

Serialized as plain key=value text (one key per line, '#' comments).
Parsing rejects unknown keys, and serialize -> parse -> serialize is an
identity so configs can be hashed for reproducibility manifests.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass

VARIANTS = ("pisa", "fpisa")
NORMALIZATIONS = ("sigmoid", "max-min", "log", "exp")

# The fast variant ships with its own tolerance, arm length, and prior
# strength; everything else is shared.
_FPISA_OVERRIDES = {
    "variant": "fpisa",
    "tau": 50.0,
    "l_max": 5,
    "boundary_weight": 2.0e3,
    "falloff": 0.035,
}


@dataclass
class RunConfig:
    variant: str = "pisa"
    tau: float = 60.0
    l_max: int = 10
    levels: int = 24
    boundary_weight: float = 2.5e4
    falloff: float = 0.006
    prior_cutoff: float = 30.0
    reserved_delta: float = 0.001  # accepted and recorded; no stage consumes it
    border_width: int = 10
    sigma: float | None = None  # None: 0.1 x image half-diagonal at run time
    color_weight: float = 0.5
    k0_color: int = 256
    k0_om: int = 64
    coverage: float = 0.95
    normalization: str = "sigmoid"
    use_cc: bool = True
    use_sc: bool = True
    use_center: bool = True
    use_boundary: bool = True
    normalized_upsample: bool = False
    seed: int = 0
    threads: int = 0  # 0: PISA_THREADS env var, else CPU count

    @classmethod
    def for_variant(cls, variant: str) -> "RunConfig":
        """Defaults for the named variant."""
        if variant == "pisa":
            return cls()
        if variant == "fpisa":
            return cls(**_FPISA_OVERRIDES)
        raise ValueError(f"unknown variant: {variant!r}")

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant: {self.variant!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization: {self.normalization!r}")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.l_max < 0:
            raise ValueError("l_max must be non-negative")
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if self.k0_color < 1 or self.k0_om < 1:
            raise ValueError("initial cluster counts must be >= 1")
        if not 0.0 < self.coverage <= 1.0:
            raise ValueError("coverage must be in (0, 1]")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive or auto")
        if self.border_width < 0:
            raise ValueError("border_width must be non-negative")
        if self.boundary_weight < 0 or self.falloff < 0 or self.prior_cutoff < 0:
            raise ValueError("prior parameters must be non-negative")

    def replace(self, **overrides) -> "RunConfig":
        return dataclasses.replace(self, **overrides)

    def resolve_threads(self) -> int:
        if self.threads > 0:
            return self.threads
        env = os.environ.get("PISA_THREADS", "")
        if env.strip():
            n = int(env)
            if n > 0:
                return n
        return os.cpu_count() or 1

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "sigma" and value is None:
                text = "auto"
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name}={text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in fields:
                raise ValueError(f"line {lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, val)
        config = cls(**values)
        config.validate()
        return config

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def digest(self) -> str:
        """Stable hash of the serialized config, for run manifests."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


_BOOL_KEYS = frozenset(
    {"use_cc", "use_sc", "use_center", "use_boundary", "normalized_upsample"}
)
_INT_KEYS = frozenset(
    {"l_max", "levels", "border_width", "k0_color", "k0_om", "seed", "threads"}
)
_FLOAT_KEYS = frozenset(
    {
        "tau",
        "boundary_weight",
        "falloff",
        "prior_cutoff",
        "reserved_delta",
        "color_weight",
        "coverage",
    }
)


def _coerce(key: str, val: str):
    if key == "sigma":
        return None if val == "auto" else float(val)
    if key in _BOOL_KEYS:
        if val not in ("true", "false"):
            raise ValueError(f"{key} must be true or false, got {val!r}")
        return val == "true"
    if key in _INT_KEYS:
        return int(val)
    if key in _FLOAT_KEYS:
        return float(val)
    return val
