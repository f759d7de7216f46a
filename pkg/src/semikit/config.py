"""Plain-text experiment configuration: schema, defaults, parsing, printing.

The config format is a sectioned ``key = value`` file with five section
kinds: ``[dataset]``, ``[train]``, ``[augment]``, ``[plan]``, and one
``[algorithm.<name>]`` block per algorithm whose hyperparameters are being
overridden. Blank lines and lines starting with ``#`` or ``;`` are ignored.
Every key is validated against a typed schema; unknown sections, unknown
keys, duplicates, and values of the wrong type are hard errors that name
the offender and its line number. ``format_defaults()`` renders the full
default configuration as a parseable file, so the schema is self-documenting
and round-trips through ``parse_config``.
"""

from __future__ import annotations

import copy

from .curriculum import MAPPINGS
from .data import SYNTHETIC_KINDS
from .errors import ParseError
from .losses import ALGORITHM_NAMES, algorithm_spec

# ---------------------------------------------------------------------------
# value converters


def _to_int(text):
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _to_float(text):
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def _to_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _to_str(text):
    return text.strip()


def _choice(options):
    def convert(text):
        value = text.strip()
        if value not in options:
            raise ValueError(
                f"expected one of {', '.join(options)}; got {value!r}"
            )
        return value

    return convert


def _list_of(converter):
    def convert(text):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("expected a comma-separated list, got nothing")
        return [converter(p) for p in parts]

    return convert


def _algorithm_name(text):
    # normalize spellings like Flex-PL / FLEXMATCH to canonical names
    name = text.strip().lower().replace("-", "_")
    if name not in ALGORITHM_NAMES:
        raise ValueError(
            f"unknown algorithm {text!r}; choose from {', '.join(ALGORITHM_NAMES)}"
        )
    return name


# ---------------------------------------------------------------------------
# schema: section -> key -> (default, converter)

SCHEMA = {
    "dataset": {
        "kind": ("two_moons", _choice(SYNTHETIC_KINDS)),
        "n_samples": (2510, _to_int),
        "n_classes": (2, _to_int),
        "noise": (0.1, _to_float),
        "imbalance_ratio": (1.0, _to_float),
        "eval_fraction": (0.2, _to_float),
        "seed": (0, _to_int),
    },
    "train": {
        "iterations": (20000, _to_int),
        "batch_size": (64, _to_int),
        "lr": (0.03, _to_float),
        "momentum": (0.9, _to_float),
        "ema_momentum": (0.999, _to_float),
        "weight_decay": (0.0005, _to_float),
        "checkpoint_every": (200, _to_int),
        "mapping": ("convex", _choice(MAPPINGS)),
        "warmup": (True, _to_bool),
        "threshold_floor": (0.0, _to_float),
        "hidden_sizes": ([64, 64], _list_of(_to_int)),
        "balance_weight": (0.0, _to_float),
    },
    "augment": {
        "weak_noise": (0.05, _to_float),
        "strong_noise": (0.25, _to_float),
        "strong_dropout": (0.2, _to_float),
        "strong_scale_min": (0.7, _to_float),
        "strong_scale_max": (1.3, _to_float),
    },
    "plan": {
        "algorithms": (list(ALGORITHM_NAMES), _list_of(_algorithm_name)),
        "label_budgets": ([4], _list_of(_to_int)),
        "seeds": ([1, 2, 3], _list_of(_to_int)),
        "out": ("runs", _to_str),
        "jobs": (1, _to_int),
    },
}

# per-algorithm override keys allowed inside [algorithm.<name>] sections
ALGORITHM_KEYS = {
    "tau": _to_float,
    "mu": _to_int,
    "lam": _to_float,
    "temperature": _to_float,
}


def default_config():
    """Full default configuration as a nested dict.

    The ``algorithm`` entry maps canonical algorithm names to override dicts
    and starts empty: built-in per-algorithm defaults apply unless a config
    file (or flag) says otherwise.
    """
    config = {
        section: {key: copy.deepcopy(default) for key, (default, _) in keys.items()}
        for section, keys in SCHEMA.items()
    }
    config["algorithm"] = {}
    return config


# ---------------------------------------------------------------------------
# parsing


def _parse_section_header(line, path, lineno):
    name = line[1:-1].strip()
    if name in SCHEMA:
        return name, None
    if name.startswith("algorithm."):
        try:
            algorithm = _algorithm_name(name[len("algorithm."):])
        except ValueError as exc:
            raise ParseError(str(exc), path=path, line=lineno) from None
        return "algorithm", algorithm
    known = ", ".join(list(SCHEMA) + ["algorithm.<name>"])
    raise ParseError(
        f"unknown section [{name}]; expected one of {known}",
        path=path, line=lineno,
    )


def parse_config_text(text, path="<string>", config=None):
    """Parse config text into (a copy of) the defaults; returns the dict."""
    if config is None:
        config = default_config()
    section = None          # current section name, e.g. "train"
    algorithm = None        # current algorithm when section == "algorithm"
    seen = set()            # (section, algorithm, key) triples for dup checks
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section, algorithm = _parse_section_header(line, path, lineno)
            if section == "algorithm":
                config["algorithm"].setdefault(algorithm, {})
            continue
        if "=" not in line:
            raise ParseError(
                f"expected 'key = value' or '[section]', got {line!r}",
                path=path, line=lineno,
            )
        if section is None:
            raise ParseError(
                "key appears before any [section] header",
                path=path, line=lineno,
            )
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if section == "algorithm":
            converter = ALGORITHM_KEYS.get(key)
            where = f"[algorithm.{algorithm}]"
        else:
            entry = SCHEMA[section].get(key)
            converter = entry[1] if entry else None
            where = f"[{section}]"
        if converter is None:
            raise ParseError(
                f"unknown key {key!r} in section {where}",
                path=path, line=lineno,
            )
        if (section, algorithm, key) in seen:
            raise ParseError(
                f"duplicate key {key!r} in section {where}",
                path=path, line=lineno,
            )
        seen.add((section, algorithm, key))
        try:
            parsed = converter(value)
        except ValueError as exc:
            raise ParseError(
                f"bad value for {key!r}: {exc}", path=path, line=lineno
            ) from None
        if section == "algorithm":
            config["algorithm"][algorithm][key] = parsed
        else:
            config[section][key] = parsed
    return config


def parse_config(path):
    """Read and validate a config file; returns the nested config dict."""
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ParseError(f"cannot read config file: {exc}", path=str(path))
    return parse_config_text(text, path=str(path))


# ---------------------------------------------------------------------------
# printing


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def format_defaults():
    """Render every default as a parseable config file.

    Includes one ``[algorithm.<name>]`` block per algorithm showing its
    built-in hyperparameters, so the whole surface is documented in one
    place. Parsing the output reproduces the defaults exactly.
    """
    lines = ["# all supported keys with their default values", ""]
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (default, _) in keys.items():
            lines.append(f"{key} = {_format_value(default)}")
        lines.append("")
    for name in ALGORITHM_NAMES:
        spec = algorithm_spec(name)
        lines.append(f"[algorithm.{name}]")
        lines.append(f"tau = {_format_value(spec.tau)}")
        lines.append(f"mu = {_format_value(spec.mu)}")
        lines.append(f"lam = {_format_value(spec.lam)}")
        if spec.temperature is not None:
            lines.append(f"temperature = {_format_value(spec.temperature)}")
        lines.append("")
    return "\n".join(lines)
