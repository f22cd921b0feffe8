use std::fs;
use std::path::Path;

use pandora_core::harness::experiment::{build_environment, run_experiment, ExperimentSpec};
use pandora_core::{Environment, HarnessError};

fn shipped(name: &str) -> ExperimentSpec {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name);
    ExperimentSpec::from_file(&path).unwrap()
}

#[test]
fn shipped_specs_validate() {
    for name in ["default.json", "contextual.json", "n_sweep.json"] {
        let spec = shipped(name);
        spec.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        build_environment(&spec.resolve(None).0).unwrap();
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    fs::write(
        &path,
        r#"{"instance":{"n":2,"family":"grid","cost":0.1,"colour":1},"learner":{"mode":"pandora"},"run":{"T":16,"seeds":1}}"#,
    )
    .unwrap();
    assert!(matches!(ExperimentSpec::from_file(&path), Err(HarnessError::Json(_))));
}

#[test]
fn fixed_contexts_file_is_resolved_and_used() {
    let dir = tempfile::tempdir().unwrap();
    let contexts = r#"{
        "thetas": [[0.5, 0.0], [0.0, 0.5]],
        "rounds": [[[1.0, 0.0], [0.0, 1.0]], [[0.6, 0.8], [0.8, 0.6]]]
    }"#;
    fs::write(dir.path().join("ctx.json"), contexts).unwrap();
    let spec = r#"{
        "instance": {"n": 2, "d": 2, "family": "grid", "support_size": 3, "cost": 0.05,
                     "contextual": true, "contexts_file": "ctx.json", "seed": 1},
        "learner": {"mode": "pandora"},
        "run": {"T": 16, "seeds": 2}
    }"#;
    let path = dir.path().join("spec.json");
    fs::write(&path, spec).unwrap();

    let spec = ExperimentSpec::from_file(&path).unwrap();
    assert_eq!(spec.instance.contexts_file.as_deref(), Some(dir.path().join("ctx.json").as_path()));
    let env = build_environment(&spec.resolve(None).0).unwrap();
    let Environment::Contextual(ctx) = &env else {
        panic!("expected a contextual environment");
    };
    assert_eq!(ctx.thetas(), &[vec![0.5, 0.0], vec![0.0, 0.5]]);
    let round1 = env.contexts_at(0, 1).unwrap().unwrap();
    assert_eq!(round1, vec![vec![0.6, 0.8], vec![0.8, 0.6]]);
    // Sequences wrap around.
    assert_eq!(env.contexts_at(0, 2).unwrap(), env.contexts_at(5, 0).unwrap());

    let summary = run_experiment(&spec, &dir.path().join("out"), 1).unwrap();
    assert_eq!(summary.cells.len(), 2);
}

#[test]
fn fixed_contexts_violating_the_mean_range_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ctx.json"), r#"{"thetas": [[1.0]], "rounds": [[[1.0]]]}"#).unwrap();
    let spec = r#"{
        "instance": {"n": 1, "d": 1, "family": "grid", "cost": 0.05, "contextual": true, "contexts_file": "ctx.json"},
        "learner": {"mode": "pandora"},
        "run": {"T": 16, "seeds": 1}
    }"#;
    let path = dir.path().join("spec.json");
    fs::write(&path, spec).unwrap();
    let spec = ExperimentSpec::from_file(&path).unwrap();
    assert!(build_environment(&spec.resolve(None).0).is_err());
}
