"""YAML experiment configs: schema validation with line-referenced errors and overrides."""

import copy
import hashlib
import json

import jsonschema
import yaml

from .corr_models import KINDS

__all__ = ["ConfigError", "EXPERIMENTS", "load_config", "validate", "apply_overrides", "config_digest"]

EXPERIMENTS = ("sample", "outage", "approx", "measure", "converge", "telatar", "schedule")


class ConfigError(Exception):
    """Invalid experiment configuration (CLI exit status 2)."""


_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG = {"type": "number", "minimum": 0}
_PROB = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_CORR_ONE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "r": _COMPLEX,
        "n": _POS_INT,
        "matrix": {"type": "array", "minItems": 1, "items": {"type": "array", "items": _COMPLEX}},
    },
    "oneOf": [{"required": ["kind"]}, {"required": ["matrix"]}],
}
_CORR = {"oneOf": [_CORR_ONE, {"type": "array", "minItems": 1, "items": _CORR_ONE}]}
_GAINS = {"type": "array", "minItems": 1, "items": _COMPLEX}
_INT_LIST = {"type": "array", "minItems": 1, "items": _POS_INT}
_OUTPUT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"csv": {"type": "string"}, "summary": {"type": "string"}},
}
_GRID = {
    "type": "object",
    "additionalProperties": False,
    "required": ["start", "stop", "num"],
    "properties": {"start": {"type": "number"}, "stop": {"type": "number"}, "num": {"type": "integer", "minimum": 2}},
}

_COMMON = {
    "experiment": {"enum": list(EXPERIMENTS)},
    "seed": {"type": "integer", "minimum": 0},
    "n_trials": _POS_INT,
    "workers": _POS_INT,
    "output": _OUTPUT,
}

_CHANNEL = {
    "n_r": _POS_INT,
    "M": _POS_INT,
    "gains": _GAINS,
    "corr": _CORR_ONE,
    "tx_corr": _CORR,
    "rx_corr": _CORR,
    "snr": _NONNEG,
}

_KIND_PROPS = {
    "sample": (
        {**_CHANNEL, "n_t": _POS_INT, "method": {"enum": ["direct", "wishart"]}},
        ["n_t", "n_r", "snr"],
    ),
    "outage": (
        {**_CHANNEL, "n_t": {"oneOf": [_POS_INT, _INT_LIST]}, "rate_grid": _GRID},
        ["n_t", "n_r", "snr"],
    ),
    "approx": (
        {
            **_CHANNEL,
            "n_t": _POS_INT,
            "channel_class": {"enum": ["FRMK", "RDMK"]},
            "method": {"enum": ["direct", "wishart"]},
            "epsilon": _PROB,
            "as_printed": {"type": "boolean"},
            "rate_grid": _GRID,
        },
        ["n_t", "n_r", "snr"],
    ),
    "measure": (
        {"corr": _CORR_ONE, "compare": _CORR_ONE},
        ["corr"],
    ),
    "converge": (
        {
            **_CHANNEL,
            "mode": {"enum": ["antenna", "keyhole"]},
            "n_t": {"oneOf": [_POS_INT, _INT_LIST]},
            "M": {"oneOf": [_POS_INT, _INT_LIST]},
        },
        ["mode", "n_t", "n_r", "snr"],
    ),
    "telatar": (
        {**_CHANNEL, "n_t": _POS_INT, "k": _INT_LIST, "epsilon": _PROB, "rate": _NONNEG},
        ["n_t", "n_r", "snr"],
    ),
    "schedule": (
        {
            "mu": _NONNEG,
            "sigma": _NONNEG,
            "K": _INT_LIST,
            "oracle_reps": _POS_INT,
            "relay": {
                "type": "object",
                "additionalProperties": False,
                "required": ["n_t", "n_r", "relay_snr"],
                "properties": {
                    "n_t": _POS_INT,
                    "n_r": _POS_INT,
                    "M": _POS_INT,
                    "gains": _GAINS,
                    "tx_corr": _CORR,
                    "rx_corr": _CORR,
                    "relay_snr": _NONNEG,
                    "regime": {"enum": ["exact", "low_snr", "high_snr"]},
                },
            },
            "feedback": {
                "type": "object",
                "additionalProperties": False,
                "required": ["granularity", "outage_target"],
                "properties": {"granularity": {"type": "number", "exclusiveMinimum": 0}, "outage_target": _PROB},
            },
        },
        ["K"],
    ),
}


def schema_for(kind):
    props, required = _KIND_PROPS[kind]
    return {
        "type": "object",
        "additionalProperties": False,
        "required": ["experiment", *required],
        "properties": {**_COMMON, **props},
    }


def _node_at(node, path):
    """Walk a composed YAML node along a jsonschema path; stop at the deepest match."""
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == str(key)), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
    return node


def _key_node(node, key):
    if isinstance(node, yaml.MappingNode):
        for k, _ in node.value:
            if k.value == key:
                return k
    return None


def _where(root, error, overridden):
    path = list(error.absolute_path)
    if path and path[0] in overridden:
        return "--set " + ".".join(str(p) for p in path)
    if root is None:
        return "line 1"
    node = _node_at(root, path)
    if error.validator == "additionalProperties" and isinstance(error.instance, dict):
        allowed = set(error.schema.get("properties", {}))
        for extra in sorted(set(error.instance) - allowed):
            k = _key_node(node, extra)
            if k is not None:
                return f"line {k.start_mark.line + 1}"
    return f"line {node.start_mark.line + 1}"


def _describe(error):
    loc = ".".join(str(p) for p in error.absolute_path) or "<top level>"
    if error.validator == "required":
        return f"{loc}: {error.message}"
    if error.validator == "additionalProperties":
        return f"{loc}: unknown key(s): {error.message}"
    return f"{loc}: {error.message}"


def validate(data, kind, root=None, overridden=()):
    """Validate ``data`` against the schema of ``kind``; raise :class:`ConfigError` listing every problem."""
    if not isinstance(data, dict):
        raise ConfigError("line 1: config must be a mapping of keys to values")
    exp = data.get("experiment", kind)
    if exp != kind:
        raise ConfigError(f"config is for experiment {exp!r} but subcommand is {kind!r}")
    data.setdefault("experiment", kind)
    validator = jsonschema.Draft7Validator(schema_for(kind))
    errors = sorted(validator.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        lines = [f"{_where(root, e, overridden)}: {_describe(e)}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))
    return data


def apply_overrides(data, pairs):
    """Apply ``key.sub=value`` overrides; values are parsed as YAML scalars."""
    data = copy.deepcopy(data)
    touched = set()
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} must look like key=value")
        key, raw = pair.split("=", 1)
        parts = key.strip().split(".")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {pair!r}: cannot parse value ({exc})") from None
        target = data
        for p in parts[:-1]:
            target = target.setdefault(p, {})
            if not isinstance(target, dict):
                raise ConfigError(f"override {pair!r}: {p!r} is not a mapping")
        target[parts[-1]] = value
        touched.add(parts[0])
    return data, touched


def load_config(path, kind, overrides=()):
    """Read, override and validate a YAML config file.

    Returns the validated mapping.  Any problem raises :class:`ConfigError`
    with line numbers from the original file.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path!r} is not valid YAML: {exc}") from None
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("line 1: config must be a mapping of keys to values")
    data, touched = apply_overrides(data, overrides)
    return validate(data, kind, root, touched)


def config_digest(data, exclude=("workers", "output")):
    """Short sha256 of the canonical JSON form of the config (run-invariant keys only)."""
    clean = {k: v for k, v in data.items() if k not in exclude}
    blob = json.dumps(clean, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
