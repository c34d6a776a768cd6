"""Flat ``key = value`` configuration files.

One assignment per line; ``#`` starts a comment; list values are
comma-separated. Keys not known to the subcommand are rejected.
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key, raw: str, default):
    try:
        if isinstance(default, bool):
            return _parse_bool(raw)
        if isinstance(default, list):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            elem = type(default[0]) if default else str
            return [elem(x) for x in items]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None


def parse_config_text(text: str, defaults: dict, source: str = "<config>") -> dict:
    cfg = {k: (list(v) if isinstance(v, list) else v) for k, v in defaults.items()}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in defaults:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r} (known: {', '.join(sorted(defaults))})")
        cfg[key] = _convert(key, raw, defaults[key])
    return cfg


def load_config(path, defaults: dict) -> dict:
    if path is None:
        return parse_config_text("", defaults)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, defaults, str(path))


FIGURE1 = {
    "k": 8,
    "d": [10, 20, 50, 100, 200, 500, 1000],
    "T": [100, 200, 500, 1000],
    "designs": ["star", "simple"],
    "schedule": "linear",
    "beta_min": 1e-4,
    "beta_max": 0.02,
    "c0": 2.0,
    "c1": 4.0,
    "tv_samples": 200_000,
    "timing": True,
    "seed": 0,
}

THEOREM2 = {
    "T": 1000,
    "d": 64,
    "k": 8,
    "t": [0],  # 0 means the default list {2, T/2, T}
    "schedule": "paper",
    "beta_min": 1e-4,
    "beta_max": 0.02,
    "c0": 2.0,
    "c1": 4.0,
    "eta_shift_min": -0.05,
    "eta_shift_max": 0.05,
    "eta_shift_points": 21,
    "sigma_scale_min": 0.5,  # geometric spacing; 1 is always on the grid
    "sigma_scale_max": 2.0,
    "sigma_scale_points": 21,
    "seed": 0,
}

RATE = {
    "T": [100, 200, 400, 800, 1600],
    "d": 64,
    "k": 8,
    "design": "star",
    "schedule": "paper",
    "beta_min": 1e-4,
    "beta_max": 0.02,
    "c0": 2.0,
    "c1": 4.0,
    "tv_samples": 0,
    "timing": True,
    "seed": 0,
}

PERTURB = {
    "eps": [0.0, 0.01, 0.02, 0.05, 0.1],
    "model": "constant-bias",
    "T": 200,
    "d": 32,
    "k": 8,
    "design": "star",
    "schedule": "linear",
    "beta_min": 1e-4,
    "beta_max": 0.02,
    "c0": 2.0,
    "c1": 4.0,
    "n": 20_000,
    "chunk_size": 8192,
    "tv_samples": 200_000,
    "timing": True,
    "seed": 0,
}

COVERING = {
    "points": "",  # CSV path; empty means use the synthetic grid below
    "grid_r": 2,
    "grid_per_side": 61,
    "grid_d": 50,
    "grid_side": 1.0,
    "T": 10,
    "c_eps": 1.0,
    "C_cover": 1.0,
    "net_out": "",
    "seed": 0,
}

DUMP_SCHEDULE = {
    "schedule": "paper",
    "T": 1000,
    "design": "star",
    "beta_min": 1e-4,
    "beta_max": 0.02,
    "c0": 2.0,
    "c1": 4.0,
    "seed": 0,
}
