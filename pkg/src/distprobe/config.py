"""Campaign config: flat key/value text with dotted keys, strictly validated.

The format is intentionally dumb. One ``section.key = value`` per line,
``#`` comments, no nesting, no interpolation. Unknown keys are an error
rather than a warning so that a typo cannot silently run a different
campaign than the one written down.
"""

from __future__ import annotations

import hashlib
import os


class ConfigError(ValueError):
    """Anything wrong with the campaign definition; maps to exit code 2."""


def _as_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}") from None


def _as_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}") from None


def _as_str(raw: str) -> str:
    return raw


def _choice(*options):
    def parse(raw: str) -> str:
        if raw not in options:
            raise ConfigError(f"expected one of {options}, got {raw!r}")
        return raw

    return parse


# key -> (parser, default); default None means "unset"
KNOWN_KEYS = {
    "dataset.images": (_as_str, None),
    "dataset.labels": (_as_str, None),
    "dataset.classes": (_as_int, None),
    "latent.source": (_choice("pca", "external"), "pca"),
    "latent.dim": (_as_int, 4),
    "latent.means": (_as_str, None),
    "latent.stds": (_as_str, None),
    "backend.kind": (_choice("builtin", "subprocess"), "builtin"),
    "backend.manifest": (_as_str, None),
    "backend.command": (_as_str, None),
    "backend.batch_cap": (_as_int, 256),
    "radius.mode": (_choice("fixed", "auto"), "fixed"),
    "radius.value": (_as_float, None),
    "radius.sample_cap": (_as_int, 2000),
    "select.indicator": (_choice("grad", "sep"), "grad"),
    "select.k": (_as_int, 10),
    "select.budget": (_as_int, None),
    "ga.population": (_as_int, 1000),
    "ga.iters": (_as_int, 500),
    "ga.alpha": (_as_float, 1.0),
    "ga.metric": (_choice("mse", "psnr", "ssim"), "mse"),
    "ga.mutation_rate": (_as_float, 0.05),
    "ga.plateau_window": (_as_int, 50),
    "ga.plateau_tol": (_as_float, 1e-4),
    "ga.mode": (_choice("two_step", "regular"), "two_step"),
    "pgd.steps": (_as_int, 10),
    "pgd.step_size": (_as_float, 2.0 / 255.0),
    "robust.n_mc": (_as_int, 2000),
    "run.seed": (_as_int, 0),
}

_PATH_KEYS = (
    "dataset.images",
    "dataset.labels",
    "latent.means",
    "latent.stds",
    "backend.manifest",
)


class Config:
    def __init__(self, values: dict, source_text: str, base_dir: str):
        self._values = values
        self.source_text = source_text
        self.base_dir = base_dir

    def __contains__(self, key: str) -> bool:
        return self._values.get(key) is not None

    def get(self, key: str):
        if key not in KNOWN_KEYS:
            raise KeyError(key)
        return self._values.get(key)

    def require(self, key: str):
        value = self.get(key)
        if value is None:
            raise ConfigError(f"config is missing required key {key!r}")
        return value

    def path(self, key: str) -> str:
        """Resolve a path value relative to the config file's directory."""
        raw = self.require(key)
        resolved = raw if os.path.isabs(raw) else os.path.join(self.base_dir, raw)
        if not os.path.exists(resolved):
            raise ConfigError(f"{key} points to a missing path: {resolved}")
        return resolved

    def sha256(self) -> str:
        return hashlib.sha256(self.source_text.encode("utf-8")).hexdigest()

    def as_dict(self) -> dict:
        return {k: v for k, v in sorted(self._values.items()) if v is not None}


def parse_config_text(text: str, base_dir: str = ".") -> Config:
    values = {key: default for key, (_, default) in KNOWN_KEYS.items()}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, raw_value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        parser, _ = KNOWN_KEYS[key]
        try:
            values[key] = parser(raw_value)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    return Config(values, text, base_dir)


def load_config(path) -> Config:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, os.path.dirname(os.path.abspath(path)))
