"""JSON schemas for device presets and study configurations."""

import jsonschema

from .errors import ConfigError

_TRANSMON = {
    "type": "object",
    "required": ["bare_frequency", "anharmonicity"],
    "properties": {
        "bare_frequency": {"type": "number", "exclusiveMinimum": 0},
        "anharmonicity": {"type": "number", "exclusiveMaximum": 0},
        "levels": {"type": "integer", "minimum": 2},
    },
    "additionalProperties": False,
}

_COUPLER = {
    "type": "object",
    "required": ["ec", "jj_ratio"],
    "properties": {
        "ej_sum": {"type": "number", "exclusiveMinimum": 0},
        "f_max": {"type": "number", "exclusiveMinimum": 0},
        "ec": {"type": "number", "exclusiveMinimum": 0},
        "jj_ratio": {"type": "number", "minimum": 1},
        "levels": {"type": "integer", "minimum": 2},
    },
    "oneOf": [{"required": ["ej_sum"]}, {"required": ["f_max"]}],
    "additionalProperties": False,
}

PRESET_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["q1", "q2", "coupler", "rho_12", "rho_1c", "rho_2c"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "q1": _TRANSMON,
        "q2": _TRANSMON,
        "coupler": _COUPLER,
        "rho_12": {"type": "number"},
        "rho_1c": {"type": "number"},
        "rho_2c": {"type": "number"},
        "operating_points": {
            "type": "object",
            "additionalProperties": {"type": "number"},
        },
        "notes": {"type": "object"},
    },
    "additionalProperties": False,
}

STUDIES = ("spectrum", "dfactor", "pulse", "leakage", "compare", "fit", "rb")

STUDY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["study"],
    "properties": {
        "study": {"enum": list(STUDIES)},
        "preset": {"type": "string"},
        "output": {"type": "string"},
        "seed": {"type": "integer"},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}


def _validate(data, schema, what):
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"invalid {what} at {path}: {err.message}")


def validate_preset(data: dict) -> None:
    _validate(data, PRESET_SCHEMA, "device preset")


def validate_study(data: dict) -> None:
    _validate(data, STUDY_SCHEMA, "study config")
