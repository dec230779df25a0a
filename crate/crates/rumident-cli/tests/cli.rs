//! End-to-end tests driving the compiled binary: document round trips,
//! exact goldens on the running example, exit-code conventions, and byte
//! determinism of the output.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use rumident::choicecore::{phi, Distribution, Universe};
use serde_json::{json, Value};

/// Runs the binary with `args`, optionally piping `stdin`, and returns
/// `(exit code, stdout, stderr)`.
fn run(dir: &Path, args: &[&str], stdin: Option<&str>) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rumident"));
    cmd.args(args)
        .current_dir(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = cmd.spawn().expect("binary spawns");
    if let Some(text) = stdin {
        child
            .stdin
            .as_mut()
            .expect("stdin is piped")
            .write_all(text.as_bytes())
            .expect("stdin accepts the document");
    }
    drop(child.stdin.take());
    let out = child.wait_with_output().expect("binary exits");
    (
        out.status.code().expect("no signal"),
        String::from_utf8(out.stdout).expect("stdout is UTF-8"),
        String::from_utf8(out.stderr).expect("stderr is UTF-8"),
    )
}

/// Parses stdout as one JSON document.
fn parse(stdout: &str) -> Value {
    serde_json::from_str(stdout).expect("output is JSON")
}

fn write_doc(dir: &Path, name: &str, doc: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).expect("temp files write");
    name.to_owned()
}

/// The running example: 1/4·abcd + 1/4·badc + 3/8·abdc + 1/8·bacd.
fn example_doc() -> Value {
    json!({
        "alternatives": ["a", "b", "c", "d"],
        "mass": {"abcd": "1/4", "badc": "1/4", "abdc": "3/8", "bacd": "1/8"}
    })
}

/// The uniform distribution over all rankings of `abcd`, as a document.
fn uniform_doc() -> Value {
    let labels: Vec<String> = "abcd".chars().map(String::from).collect();
    let u = Universe::from_labels(&labels, 8).unwrap();
    let prefs = u.all_preferences();
    Distribution::uniform(u.clone(), &prefs).unwrap().to_json()
}

/// The rule document generated by the running example, with a `menus` list
/// appended so the same document also serves the rc commands.
fn example_rc_rule_doc() -> Value {
    let labels: Vec<String> = "abcd".chars().map(String::from).collect();
    let u = Universe::from_labels(&labels, 8).unwrap();
    let mu = Distribution::from_json(&example_doc(), 8).unwrap();
    let mut doc = phi(&mu).to_json();
    let menus: Vec<String> = u.all_menus().iter().map(|m| m.key().to_owned()).collect();
    doc.as_object_mut()
        .unwrap()
        .insert("menus".to_owned(), json!(menus));
    doc
}

#[test]
fn the_running_example_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let base = write_doc(dir.path(), "base.json", &example_doc());

    let (code, stdout, _) = run(dir.path(), &["phi", &base], None);
    assert_eq!(code, 0);
    let rule = parse(&stdout);
    assert_eq!(rule["probabilities"]["ab"]["a"], "5/8");
    assert_eq!(rule["probabilities"]["cd"]["c"], "3/8");
    let rule_file = write_doc(dir.path(), "rule.json", &rule);

    let (code, stdout, _) = run(dir.path(), &["rationalize", &rule_file], None);
    assert_eq!(code, 0);
    let report = parse(&stdout);
    assert_eq!(report["rationalizable"], json!(true));
    assert_eq!(report["negative_edges"], json!([]));
    let witness = write_doc(dir.path(), "witness.json", &report["witness"]);

    let (code, stdout, _) = run(dir.path(), &["equiv", &base, &witness], None);
    assert_eq!(code, 0);
    assert_eq!(parse(&stdout), json!({"equivalent": true}));
}

#[test]
fn bounds_report_the_exact_interval_and_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let query = write_doc(
        dir.path(),
        "query.json",
        &json!({"base": example_doc(), "functional": {"abdc": "1"}}),
    );

    let (code, first, _) = run(dir.path(), &["bounds", &query], None);
    assert_eq!(code, 0);
    let report = parse(&first);
    assert_eq!(report["min"], "1/4");
    assert_eq!(report["max"], "5/8");
    assert_eq!(
        report["argmin"]["mass"],
        json!({"abcd": "3/8", "abdc": "1/4", "badc": "3/8"})
    );
    assert_eq!(
        report["argmax"]["mass"],
        json!({"abdc": "5/8", "bacd": "3/8"})
    );

    // Byte determinism: a repeated run prints the identical document.
    let (_, second, _) = run(dir.path(), &["bounds", &query], None);
    assert_eq!(first, second);

    // The full-simplex route agrees on the interval.
    let (code, stdout, _) = run(dir.path(), &["bounds", &query, "--route", "simplex"], None);
    assert_eq!(code, 0);
    let report = parse(&stdout);
    assert_eq!(report["min"], "1/4");
    assert_eq!(report["max"], "5/8");
}

#[test]
fn observational_equivalence_of_a_file_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let base = write_doc(dir.path(), "base.json", &example_doc());
    let (code, stdout, _) = run(dir.path(), &["equiv", &base, &base], None);
    assert_eq!(code, 0);
    assert_eq!(parse(&stdout), json!({"equivalent": true}));
}

#[test]
fn the_uniform_rule_swap_progresses_to_twelve_preferences() {
    let dir = tempfile::tempdir().unwrap();
    let uniform = write_doc(dir.path(), "uniform.json", &uniform_doc());
    let (code, stdout, _) = run(dir.path(), &["phi", &uniform], None);
    assert_eq!(code, 0);
    let rule = write_doc(dir.path(), "rule.json", &parse(&stdout));

    let (code, stdout, _) = run(dir.path(), &["swap-progressive", &rule, "abcd"], None);
    assert_eq!(code, 0);
    let mass = parse(&stdout)["mass"].as_object().unwrap().clone();
    assert_eq!(mass.len(), 12);
    assert!(mass.values().all(|v| v == "1/12"));
    let keys: Vec<&str> = mass.keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        [
            "abcd", "acbd", "adbc", "badc", "bcad", "bdac", "cadb", "cbda", "cdab", "dacb",
            "dbca", "dcba"
        ]
    );
}

#[test]
fn ryser_bases_report_the_swap_span_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(dir.path(), &["ryser-basis", "abcd"], None);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(doc["dimension"], 6);
    assert_eq!(doc["basis"].as_array().unwrap().len(), 6);

    let (code, stdout, _) = run(dir.path(), &["ryser-basis", "abc"], None);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(doc["dimension"], 0);
    assert_eq!(doc["basis"], json!([]));
}

#[test]
fn extreme_points_enumerate_the_two_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let base = write_doc(dir.path(), "base.json", &example_doc());
    let (_, stdout, _) = run(dir.path(), &["phi", &base], None);
    let rule = write_doc(dir.path(), "rule.json", &parse(&stdout));

    let support = "abcd,badc,abdc,bacd";
    let (code, stdout, _) = run(
        dir.path(),
        &["extreme-points", &rule, "--support", support],
        None,
    );
    assert_eq!(code, 0);
    let points = parse(&stdout)["points"].as_array().unwrap().clone();
    let masses: Vec<Value> = points.iter().map(|p| p["mass"].clone()).collect();
    assert!(masses.contains(&json!({"abcd": "3/8", "abdc": "1/4", "badc": "3/8"})));
    assert!(masses.contains(&json!({"abdc": "5/8", "bacd": "3/8"})));
    assert_eq!(points.len(), 2);

    // The full example distribution sits strictly between the vertices.
    let (code, stdout, _) = run(
        dir.path(),
        &["extreme", &base, "--support", support],
        None,
    );
    assert_eq!(code, 0);
    assert_eq!(parse(&stdout), json!({"extreme": false}));
}

#[test]
fn support_identification_distinguishes_the_example_sets() {
    let dir = tempfile::tempdir().unwrap();
    let four = write_doc(
        dir.path(),
        "four.json",
        &json!({
            "alternatives": ["a", "b", "c", "d"],
            "preferences": ["abcd", "badc", "abdc", "bacd"]
        }),
    );
    let (code, stdout, _) = run(dir.path(), &["support-id", &four], None);
    assert_eq!(code, 0);
    assert_eq!(parse(&stdout), json!({"identifying": false}));

    let three = write_doc(
        dir.path(),
        "three.json",
        &json!({
            "alternatives": ["a", "b", "c", "d"],
            "preferences": ["abcd", "badc", "abdc"]
        }),
    );
    let (code, stdout, _) = run(dir.path(), &["support-id", &three], None);
    assert_eq!(code, 0);
    assert_eq!(parse(&stdout), json!({"identifying": true}));
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("garbage.json"), "not json {").unwrap();

    let (code, stdout, _) = run(dir.path(), &["phi", "garbage.json"], None);
    assert_eq!(code, 2);
    assert_eq!(parse(&stdout)["reason"], "bad-document");

    let (code, stdout, _) = run(dir.path(), &["phi", "missing.json"], None);
    assert_eq!(code, 2);
    assert_eq!(parse(&stdout)["reason"], "io-error");

    let (code, stdout, _) = run(dir.path(), &["frobnicate", "x.json"], None);
    assert_eq!(code, 2);
    assert_eq!(parse(&stdout)["reason"], "bad-arguments");

    let (code, stdout, _) = run(dir.path(), &[], None);
    assert_eq!(code, 2);
    assert_eq!(parse(&stdout)["reason"], "bad-arguments");

    // A distribution whose masses do not sum to one is a document error.
    let short = write_doc(
        dir.path(),
        "short.json",
        &json!({"alternatives": ["a", "b"], "mass": {"ab": "1/2"}}),
    );
    let (code, stdout, _) = run(dir.path(), &["phi", &short], None);
    assert_eq!(code, 2);
    assert_eq!(parse(&stdout)["reason"], "bad-document");
}

#[test]
fn domain_rejections_exit_one() {
    let dir = tempfile::tempdir().unwrap();

    // A frame-dependent rule that violates the flow inequalities.
    let bad = write_doc(
        dir.path(),
        "bad.json",
        &json!({
            "alternatives": ["a", "b"],
            "probabilities": {
                "{}": {"a": "1/2", "b": "1/2"},
                "a": {"a": "1/4", "b": "3/4"},
                "b": {"a": "1/2", "b": "1/2"},
                "ab": {"a": "1/2", "b": "1/2"}
            }
        }),
    );
    let (code, stdout, _) = run(dir.path(), &["fd-rationalize", &bad], None);
    assert_eq!(code, 1);
    assert_eq!(parse(&stdout)["reason"], "not-rationalizable");

    // The uniform rule has no representation on the example's support.
    let uniform = write_doc(dir.path(), "uniform.json", &uniform_doc());
    let (_, stdout, _) = run(dir.path(), &["phi", &uniform], None);
    let rule = write_doc(dir.path(), "rule.json", &parse(&stdout));
    let (code, stdout, _) = run(
        dir.path(),
        &["extreme-points", &rule, "--support", "abcd,badc,abdc,bacd"],
        None,
    );
    assert_eq!(code, 1);
    assert_eq!(parse(&stdout)["reason"], "no-representation");

    // An overridden cap rejects loudly rather than silently truncating.
    let (code, stdout, stderr) = run(
        dir.path(),
        &["extreme-points", &rule, "--cap", "2"],
        None,
    );
    assert_eq!(code, 1);
    assert_eq!(parse(&stdout)["reason"], "cap-exceeded");
    assert!(stderr.contains("warning"), "the override warns on stderr");
}

#[test]
fn a_rule_that_fails_the_flow_test_reports_its_edges() {
    let dir = tempfile::tempdir().unwrap();
    // Choice from the triple exceeds choice from the pair: no random
    // utility model can produce this rule.
    let rule = write_doc(
        dir.path(),
        "rule.json",
        &json!({
            "alternatives": ["a", "b", "c"],
            "probabilities": {
                "a": {"a": "1"}, "b": {"b": "1"}, "c": {"c": "1"},
                "ab": {"a": "1/2", "b": "1/2"},
                "ac": {"a": "1/2", "c": "1/2"},
                "bc": {"b": "1/2", "c": "1/2"},
                "abc": {"a": "2/3", "b": "1/3", "c": "0"}
            }
        }),
    );
    let (code, stdout, _) = run(dir.path(), &["rationalize", &rule], None);
    assert_eq!(code, 1);
    let report = parse(&stdout);
    assert_eq!(report["rationalizable"], json!(false));
    assert_eq!(report["witness"], Value::Null);
    let negatives = report["negative_edges"].as_array().unwrap();
    assert!(!negatives.is_empty());
    assert!(negatives
        .iter()
        .any(|e| e["menu"] == "ab" && e["alternative"] == "a" && e["mass"] == "-1/6"));

    // The flow itself is still printable, with its edge legend.
    let (code, stdout, _) = run(dir.path(), &["bm", "rule.json"], None);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    let flow = doc["flow"].as_object().unwrap();
    let edges = doc["edges"].as_object().unwrap();
    assert!(!flow.is_empty());
    for id in edges.keys() {
        assert!(flow.contains_key(id), "legend ids appear in the flow");
    }
}

#[test]
fn schemas_print_for_every_documented_name() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "distribution",
        "rule",
        "bounds-query",
        "rc-rule",
        "ddc-data",
        "fd-measure",
        "param-config",
    ] {
        let (code, stdout, _) = run(dir.path(), &["--schema", name], None);
        assert_eq!(code, 0, "schema {name} prints");
        assert_eq!(parse(&stdout)["title"], name);
    }
    let (code, stdout, _) = run(dir.path(), &["--schema", "nope"], None);
    assert_eq!(code, 2);
    assert_eq!(parse(&stdout)["reason"], "bad-arguments");
}

#[test]
fn stdin_documents_read_through_a_dash() {
    let dir = tempfile::tempdir().unwrap();
    let text = serde_json::to_string(&example_doc()).unwrap();
    let (code, stdout, _) = run(dir.path(), &["phi", "-"], Some(&text));
    assert_eq!(code, 0);
    assert_eq!(parse(&stdout)["probabilities"]["ab"]["a"], "5/8");
}

#[test]
fn restricted_collections_round_trip_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let rc_rule = example_rc_rule_doc();
    let rule_file = write_doc(dir.path(), "rcrule.json", &rc_rule);

    // Swap-progressive representation, then its pushforward recovers the
    // restricted rule row for row.
    let (code, stdout, _) = run(
        dir.path(),
        &["rc-swap-progressive", &rule_file, "abcd"],
        None,
    );
    assert_eq!(code, 0);
    let measure = parse(&stdout);
    let measure_file = write_doc(dir.path(), "rcmeasure.json", &measure);
    let (code, stdout, _) = run(dir.path(), &["rc-phi", &measure_file], None);
    assert_eq!(code, 0);
    assert_eq!(parse(&stdout)["probabilities"], rc_rule["probabilities"]);

    // A measure is equivalent to itself.
    let (code, stdout, _) = run(
        dir.path(),
        &["rc-equiv", &measure_file, &measure_file],
        None,
    );
    assert_eq!(code, 0);
    assert_eq!(parse(&stdout), json!({"equivalent": true}));

    // Bounds over the rational support reproduce the running example's
    // interval through the choice-function encoding.
    let menus: Vec<String> = rc_rule["menus"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m.as_str().unwrap().to_owned())
        .collect();
    let objective_key: String = menus
        .iter()
        .map(|menu| "abdc".chars().find(|x| menu.contains(*x)).unwrap())
        .collect();
    let query = write_doc(
        dir.path(),
        "rcquery.json",
        &json!({
            "rule": rc_rule,
            "support": "rational",
            "objective": {objective_key: "1"}
        }),
    );
    let (code, stdout, _) = run(dir.path(), &["rc-bounds", &query], None);
    assert_eq!(code, 0);
    let report = parse(&stdout);
    assert_eq!(report["min"], "1/4");
    assert_eq!(report["max"], "5/8");
}

#[test]
fn dynamic_documents_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let measure = write_doc(
        dir.path(),
        "histories.json",
        &json!({
            "alternatives": ["x", "y"],
            "T": 3,
            "mass": {"xxx": "1/4", "xyx": "1/8", "yxy": "1/2", "yyy": "1/8"}
        }),
    );
    let (code, stdout, _) = run(dir.path(), &["ddc-phi", &measure], None);
    assert_eq!(code, 0);
    let data = parse(&stdout);
    assert_eq!(data["rho1"], json!({"x": "3/8", "y": "5/8"}));
    let data_file = write_doc(dir.path(), "tables.json", &data);

    let (code, stdout, _) = run(dir.path(), &["ddc-rationalize", &data_file], None);
    assert_eq!(code, 0);
    let recovered = write_doc(dir.path(), "recovered.json", &parse(&stdout));

    let (code, stdout, _) = run(dir.path(), &["ddc-equiv", &measure, &recovered], None);
    assert_eq!(code, 0);
    assert_eq!(parse(&stdout), json!({"equivalent": true}));
}

#[test]
fn frame_dependent_documents_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let measure = write_doc(
        dir.path(),
        "truncated.json",
        &json!({
            "alternatives": ["a", "b"],
            "mass": {"a|a": "1/3", "ab|b": "1/3", "ba|b": "1/3"}
        }),
    );
    let (code, stdout, _) = run(dir.path(), &["fd-phi", &measure], None);
    assert_eq!(code, 0);
    let rule = parse(&stdout);
    assert_eq!(rule["probabilities"]["a"], json!({"a": "1", "b": "0"}));
    assert_eq!(rule["probabilities"]["{}"]["b"], "2/3");
    let rule_file = write_doc(dir.path(), "fdrule.json", &rule);

    let (code, stdout, _) = run(dir.path(), &["fd-rationalize", &rule_file], None);
    assert_eq!(code, 0);
    let recovered = write_doc(dir.path(), "recovered.json", &parse(&stdout));

    let (code, stdout, _) = run(dir.path(), &["fd-equiv", &measure, &recovered], None);
    assert_eq!(code, 0);
    assert_eq!(parse(&stdout), json!({"equivalent": true}));
}

#[test]
fn param_check_reports_carry_their_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_doc(
        dir.path(),
        "probe.json",
        &json!({
            "model": "luce",
            "k": 3,
            "local": {"lower": [0.5, 0.5, 0.5], "upper": [2.0, 2.0, 2.0], "points_per_axis": 3},
            "collision": {"attempts": 5}
        }),
    );
    let (code, stdout, _) = run(dir.path(), &["param-check", &config], None);
    assert_eq!(code, 0);
    let report = parse(&stdout);
    assert_eq!(report["model"], "luce");
    assert_eq!(report["verdict"], "no-violation-found");
    assert_eq!(report["collision"], Value::Null);
    assert_eq!(report["collision_options"]["tol"], 1e-9);

    // A config without any probe section is malformed.
    let empty = write_doc(dir.path(), "empty.json", &json!({"model": "luce", "k": 3}));
    let (code, stdout, _) = run(dir.path(), &["param-check", &empty], None);
    assert_eq!(code, 2);
    assert_eq!(parse(&stdout)["reason"], "bad-document");
}
