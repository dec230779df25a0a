//! The document catalog behind `--schema <name>`: one informal JSON-Schema
//! entry per document the CLI reads or writes, each with a worked example.
//!
//! Every probability, mass, or weight in these documents is an exact
//! rational in a string (`"3/8"`, `"1"`, `"-1/4"`); the only floating-point
//! documents are the `param-check` configuration and report, which carry
//! their tolerances explicitly.

use serde_json::{json, Value};

/// Names accepted by `--schema`, sorted.
pub fn names() -> Vec<&'static str> {
    let mut names = vec![
        "bounds-query",
        "bounds-report",
        "collection",
        "ddc-data",
        "ddc-measure",
        "distribution",
        "fd-measure",
        "fd-rule",
        "flow",
        "measure",
        "param-config",
        "param-report",
        "rationalizability-report",
        "rc-bounds-query",
        "rc-measure",
        "rc-rule",
        "rule",
        "ryser-basis",
        "support",
        "swap",
    ];
    names.sort_unstable();
    names
}

/// The schema document for a name, or `None` when unknown.
pub fn schema(name: &str) -> Option<Value> {
    let rational = json!({
        "type": "string",
        "pattern": "^-?[0-9]+(/[0-9]+)?$",
        "description": "an exact rational"
    });
    let alternatives = json!({
        "type": "array",
        "items": {"type": "string", "minLength": 1, "maxLength": 1},
        "description": "single-character alternative labels, sorted and distinct"
    });
    let doc = match name {
        "measure" => json!({
            "title": "measure",
            "description": "A signed rational measure over preferences; \
                            rankings are permutation strings of the universe.",
            "type": "object",
            "required": ["alternatives", "mass"],
            "properties": {
                "alternatives": alternatives,
                "mass": {"type": "object", "additionalProperties": rational}
            },
            "examples": [{
                "alternatives": ["a", "b", "c"],
                "mass": {"abc": "1/2", "cba": "-1/2"}
            }]
        }),
        "distribution" => json!({
            "title": "distribution",
            "description": "A measure document that is a probability \
                            distribution: every mass nonnegative, total \
                            exactly 1.",
            "type": "object",
            "required": ["alternatives", "mass"],
            "properties": {
                "alternatives": alternatives,
                "mass": {"type": "object", "additionalProperties": rational}
            },
            "examples": [{
                "alternatives": ["a", "b", "c", "d"],
                "mass": {"abcd": "1/4", "abdc": "3/8", "bacd": "1/8", "badc": "1/4"}
            }]
        }),
        "rule" => json!({
            "title": "rule",
            "description": "Choice probabilities per menu; menu keys are \
                            sorted member strings, every member keyed, rows \
                            sum to 1. Complete rules cover every nonempty \
                            menu.",
            "type": "object",
            "required": ["alternatives", "probabilities"],
            "properties": {
                "alternatives": alternatives,
                "probabilities": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "object",
                        "additionalProperties": rational
                    }
                }
            },
            "examples": [{
                "alternatives": ["a", "b"],
                "probabilities": {
                    "a": {"a": "1"},
                    "ab": {"a": "5/8", "b": "3/8"},
                    "b": {"b": "1"}
                }
            }]
        }),
        "flow" => json!({
            "title": "flow",
            "description": "An edge-mass map over a lattice or model graph; \
                            edge ids are zero-padded (`e0000`, …).",
            "type": "object",
            "additionalProperties": rational,
            "examples": [{"e0000": "5/8", "e0001": "3/8"}]
        }),
        "support" => json!({
            "title": "support",
            "description": "A declared admissible-preference set.",
            "type": "object",
            "required": ["alternatives", "preferences"],
            "properties": {
                "alternatives": alternatives,
                "preferences": {"type": "array", "items": {"type": "string"}}
            },
            "examples": [{
                "alternatives": ["a", "b", "c", "d"],
                "preferences": ["abcd", "abdc", "bacd", "badc"]
            }]
        }),
        "bounds-query" => json!({
            "title": "bounds-query",
            "description": "A linear functional over preferences plus the \
                            data pinning the identified set: exactly one of \
                            `base` (a distribution) or `rule` (an observed \
                            complete rule), and an optional support \
                            restriction.",
            "type": "object",
            "required": ["functional"],
            "properties": {
                "functional": {"type": "object", "additionalProperties": rational},
                "base": {"$ref": "distribution"},
                "rule": {"$ref": "rule"},
                "support": {"type": "array", "items": {"type": "string"}}
            },
            "examples": [{
                "base": {
                    "alternatives": ["a", "b", "c", "d"],
                    "mass": {"abcd": "1/4", "abdc": "3/8", "bacd": "1/8", "badc": "1/4"}
                },
                "functional": {"abdc": "1"}
            }]
        }),
        "bounds-report" => json!({
            "title": "bounds-report",
            "description": "Exact bounds of a functional over an identified \
                            set, with attaining distributions.",
            "type": "object",
            "required": ["min", "max", "argmin", "argmax"],
            "properties": {
                "min": rational,
                "max": rational,
                "argmin": {"$ref": "distribution"},
                "argmax": {"$ref": "distribution"}
            }
        }),
        "rationalizability-report" => json!({
            "title": "rationalizability-report",
            "description": "Outcome of the consistency test: negative \
                            lattice-edge masses (empty iff rationalizable) \
                            and, on success, a witness distribution \
                            generating the rule.",
            "type": "object",
            "required": ["rationalizable", "negative_edges", "witness"],
            "properties": {
                "rationalizable": {"type": "boolean"},
                "negative_edges": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["edge", "menu", "alternative", "mass"],
                        "properties": {
                            "edge": {"type": "string"},
                            "menu": {"type": "string"},
                            "alternative": {"type": "string"},
                            "mass": rational
                        }
                    }
                },
                "witness": {"oneOf": [{"$ref": "distribution"}, {"type": "null"}]}
            }
        }),
        "ryser-basis" => json!({
            "title": "ryser-basis",
            "description": "A basis of the swap span as measure documents; \
                            the dimension is n!−(2^n−n−1)−1 wherever the \
                            space is nontrivial.",
            "type": "object",
            "required": ["dimension", "basis"],
            "properties": {
                "dimension": {"type": "integer", "minimum": 0},
                "basis": {"type": "array", "items": {"$ref": "measure"}}
            }
        }),
        "swap" => json!({
            "title": "swap",
            "description": "A compatible pair with its conjugates; the \
                            realized measure adds the plus pair and \
                            subtracts the minus pair.",
            "type": "object",
            "required": ["plus", "minus", "k"],
            "properties": {
                "plus": {"type": "array", "items": {"type": "string"}},
                "minus": {"type": "array", "items": {"type": "string"}},
                "k": {"type": "integer", "minimum": 1}
            },
            "examples": [{"minus": ["abcd", "bacd"], "plus": ["abcd", "bacd"], "k": 2}]
        }),
        "collection" => json!({
            "title": "collection",
            "description": "An observed menu collection; menu keys are \
                            sorted member strings, distinct, at least one.",
            "type": "object",
            "required": ["alternatives", "menus"],
            "properties": {
                "alternatives": alternatives,
                "menus": {"type": "array", "items": {"type": "string"}, "minItems": 1}
            },
            "examples": [{"alternatives": ["a", "b", "c"], "menus": ["ab", "bc"]}]
        }),
        "rc-rule" => json!({
            "title": "rc-rule",
            "description": "A rule document restricted to an explicit menu \
                            collection: the `rule` shape plus a `menus` \
                            list naming the observed menus (layer order).",
            "type": "object",
            "required": ["alternatives", "menus", "probabilities"],
            "properties": {
                "alternatives": alternatives,
                "menus": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "probabilities": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "object",
                        "additionalProperties": rational
                    }
                }
            },
            "examples": [{
                "alternatives": ["a", "b", "c"],
                "menus": ["ab", "bc"],
                "probabilities": {
                    "ab": {"a": "1/2", "b": "1/2"},
                    "bc": {"b": "1", "c": "0"}
                }
            }]
        }),
        "rc-measure" => json!({
            "title": "rc-measure",
            "description": "A measure over collection-indexed choice \
                            functions: the collection plus masses keyed by \
                            pick strings (one picked member per menu, layer \
                            order).",
            "type": "object",
            "required": ["alternatives", "menus", "mass"],
            "properties": {
                "alternatives": alternatives,
                "menus": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "mass": {"type": "object", "additionalProperties": rational}
            },
            "examples": [{
                "alternatives": ["a", "b", "c"],
                "menus": ["ab", "bc"],
                "mass": {"ab": "1/2", "bc": "1/2"}
            }]
        }),
        "rc-bounds-query" => json!({
            "title": "rc-bounds-query",
            "description": "Bounds over distributions of collection-indexed \
                            choice functions: an rc-rule, a support (either \
                            explicit pick strings or the string \"rational\" \
                            for the preference-induced functions), and a \
                            functional over pick strings.",
            "type": "object",
            "required": ["rule", "support", "objective"],
            "properties": {
                "rule": {"$ref": "rc-rule"},
                "support": {
                    "oneOf": [
                        {"type": "array", "items": {"type": "string"}},
                        {"const": "rational"}
                    ]
                },
                "objective": {"type": "object", "additionalProperties": rational}
            }
        }),
        "ddc-data" => json!({
            "title": "ddc-data",
            "description": "A conditional choice system: first-period \
                            probabilities and one conditional table per \
                            later period. Rows are complete; rows \
                            conditioned on unreachable choices are \
                            identically zero.",
            "type": "object",
            "required": ["alternatives", "T", "rho1", "cond"],
            "properties": {
                "alternatives": alternatives,
                "T": {"type": "integer", "minimum": 1},
                "rho1": {"type": "object", "additionalProperties": rational},
                "cond": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": {
                            "type": "object",
                            "additionalProperties": rational
                        }
                    }
                }
            },
            "examples": [{
                "alternatives": ["x", "y"],
                "T": 2,
                "rho1": {"x": "1/2", "y": "1/2"},
                "cond": [{
                    "x": {"x": "1/3", "y": "2/3"},
                    "y": {"x": "3/4", "y": "1/4"}
                }]
            }]
        }),
        "ddc-measure" => json!({
            "title": "ddc-measure",
            "description": "A measure over choice histories (one character \
                            per period).",
            "type": "object",
            "required": ["alternatives", "T", "mass"],
            "properties": {
                "alternatives": alternatives,
                "T": {"type": "integer", "minimum": 1},
                "mass": {"type": "object", "additionalProperties": rational}
            },
            "examples": [{
                "alternatives": ["x", "y"],
                "T": 3,
                "mass": {"xxx": "1/2", "yxy": "1/2"}
            }]
        }),
        "fd-rule" => json!({
            "title": "fd-rule",
            "description": "Frame-dependent data: one complete probability \
                            row per recommendation set (every subset; \"{}\" \
                            keys the empty one), each summing to 1.",
            "type": "object",
            "required": ["alternatives", "probabilities"],
            "properties": {
                "alternatives": alternatives,
                "probabilities": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "object",
                        "additionalProperties": rational
                    }
                }
            },
            "examples": [{
                "alternatives": ["a", "b"],
                "probabilities": {
                    "{}": {"a": "1/3", "b": "2/3"},
                    "a": {"a": "1", "b": "0"},
                    "ab": {"a": "1", "b": "0"},
                    "b": {"a": "1/3", "b": "2/3"}
                }
            }]
        }),
        "fd-measure" => json!({
            "title": "fd-measure",
            "description": "A measure over truncated preferences, keyed \
                            \"prefix|terminal\" (framed prefix in ranking \
                            order, then the unframed terminal, which must \
                            repeat a prefix entry).",
            "type": "object",
            "required": ["alternatives", "mass"],
            "properties": {
                "alternatives": alternatives,
                "mass": {"type": "object", "additionalProperties": rational}
            },
            "examples": [{
                "alternatives": ["a", "b"],
                "mass": {"a|a": "1/3", "ab|b": "2/3"}
            }]
        }),
        "param-config" => json!({
            "title": "param-config",
            "description": "A param-check request: a builtin model plus at \
                            least one probe section. Floating point is \
                            native here; every tolerance is explicit or \
                            defaulted and echoed in the report.",
            "type": "object",
            "required": ["model"],
            "properties": {
                "model": {"enum": ["luce", "habit-submodel", "habit-full"]},
                "k": {"type": "integer", "description": "size for luce"},
                "n": {"type": "integer", "description": "size for the habit builtins"},
                "local": {
                    "type": "object",
                    "required": ["lower", "upper"],
                    "properties": {
                        "lower": {"type": "array", "items": {"type": "number"}},
                        "upper": {"type": "array", "items": {"type": "number"}},
                        "points_per_axis": {"type": "integer", "default": 5},
                        "tol": {"type": "number", "default": 1e-10}
                    }
                },
                "rays": {
                    "type": "object",
                    "required": ["base"],
                    "properties": {
                        "base": {"type": "array", "items": {"type": "number"}},
                        "steps": {"type": "integer", "default": 40},
                        "seed": {"type": "integer", "default": 7},
                        "starts": {"type": "integer", "default": 24},
                        "tol": {"type": "number", "default": 1e-8},
                        "interior_margin": {"type": "number", "default": 1e-2}
                    }
                },
                "collision": {
                    "type": "object",
                    "properties": {
                        "attempts": {"type": "integer", "default": 60},
                        "tol": {"type": "number", "default": 1e-9},
                        "seed": {"type": "integer", "default": 7},
                        "separation_floor": {"type": "number", "default": 1e-3}
                    }
                }
            },
            "examples": [{
                "model": "luce",
                "k": 3,
                "local": {"lower": [0.2, 0.2, 0.2], "upper": [5.0, 5.0, 5.0]}
            }]
        }),
        "param-report" => json!({
            "title": "param-report",
            "description": "The param-check output: the probe fragments \
                            that ran (with their grids, tolerances, and \
                            witnesses), an overall verdict, and — when a \
                            collision search was requested — the re-verified \
                            collision or null. Witnesses are numerical \
                            evidence, never proofs.",
            "type": "object",
            "required": ["model", "verdict"],
            "properties": {
                "model": {"type": "string"},
                "local": {"type": ["object", "null"]},
                "rays": {"type": ["object", "null"]},
                "verdict": {
                    "enum": [
                        "no-violation-found",
                        "local-failure-witness",
                        "properness-violation-witness"
                    ]
                },
                "collision": {"type": ["object", "null"]},
                "collision_options": {"type": "object"}
            }
        }),
        _ => return None,
    };
    Some(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_name_resolves_and_is_an_object() {
        for name in names() {
            let doc = schema(name).expect("listed names resolve");
            assert!(doc.is_object(), "{name} is an object");
            assert_eq!(doc["title"], name, "{name} titles itself");
        }
        assert!(schema("no-such-document").is_none());
    }
}
