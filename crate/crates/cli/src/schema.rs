use serde_json::{json, Value};

fn profile() -> Value {
    let num = json!({"type": "number"});
    json!({
        "oneOf": [
            {"const": "zero"},
            {
                "type": "object", "additionalProperties": false, "required": ["bump"],
                "properties": {"bump": {
                    "type": "object", "additionalProperties": false,
                    "required": ["amplitude", "center", "width"],
                    "properties": {
                        "amplitude": num, "center": {"type": "number", "minimum": 0},
                        "width": {"type": "number", "exclusiveMinimum": 0},
                        "steepness": {"type": "number", "exclusiveMinimum": 0, "default": 1.0}
                    }
                }}
            },
            {
                "type": "object", "additionalProperties": false, "required": ["gaussian"],
                "properties": {"gaussian": {
                    "type": "object", "additionalProperties": false,
                    "required": ["amplitude", "center", "width"],
                    "properties": {
                        "amplitude": num, "center": {"type": "number", "minimum": 0},
                        "width": {"type": "number", "exclusiveMinimum": 0}
                    }
                }}
            }
        ]
    })
}

pub fn scenario() -> Value {
    let num = |d: f64| json!({"type": "number", "default": d});
    json!({
        "type": "object",
        "additionalProperties": false,
        "required": ["name", "potential", "protocol", "initial", "grid", "t_end", "output_interval"],
        "properties": {
            "name": {"type": "string", "minLength": 1},
            "potential": {
                "type": "string",
                "description": "free, E<n>, T<n>, natural, axion, dbrane1, dbrane2, hilltop1, hilltop2, monodromy:q=<q>, log"
            },
            "hubble": {"type": "number", "minimum": 0, "default": 0.0},
            "protocol": {"enum": ["thm1", "thm2", "thm3", "exploratory"]},
            "initial": {
                "type": "object", "additionalProperties": false, "required": ["phi"],
                "properties": {"phi": profile(), "phi_t": profile()}
            },
            "grid": {
                "type": "object", "additionalProperties": false, "required": ["n_cells"],
                "properties": {
                    "n_cells": {"type": "integer", "minimum": 16, "multipleOf": 2},
                    "r_max": {"type": ["number", "null"], "exclusiveMinimum": 0}
                }
            },
            "t_end": {"type": "number", "minimum": 0},
            "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 1, "default": 0.5},
            "dt": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "output_interval": {"type": "number", "exclusiveMinimum": 0},
            "decay_radius": num(10.0),
            "cone_b": num(2.0),
            "cone_sigma": {"type": ["number", "null"]},
            "thresholds": {
                "type": "object", "additionalProperties": false,
                "properties": {
                    "w_ratio": num(1e-2),
                    "local_e_ratio": num(1e-2),
                    "cone_e_ratio": num(1e-3),
                    "saturation": num(0.05),
                    "sup_growth": num(2.0),
                    "dissipation": num(1e-3),
                    "monotone_tol": num(1e-6)
                }
            }
        }
    })
}

pub fn run_config() -> Value {
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "inflaton simulate config",
        "type": "object",
        "additionalProperties": false,
        "required": ["scenario"],
        "properties": {
            "scenario": scenario(),
            "output_dir": {"type": ["string", "null"]},
            "seed": {"type": "integer", "minimum": 0, "default": 0},
            "emit_plots": {"type": "boolean", "default": false}
        }
    })
}

pub fn sweep_config() -> Value {
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "inflaton sweep config",
        "type": "object",
        "additionalProperties": false,
        "required": ["base", "output_dir"],
        "properties": {
            "base": scenario(),
            "amplitudes": {"type": "array", "items": {"type": "number"}},
            "hubbles": {"type": "array", "items": {"type": "number", "minimum": 0}},
            "jitter": {"type": "number", "minimum": 0, "exclusiveMaximum": 1, "default": 0.0},
            "seed": {"type": "integer", "minimum": 0, "default": 0},
            "output_dir": {"type": "string"},
            "emit_plots": {"type": "boolean", "default": false}
        }
    })
}
