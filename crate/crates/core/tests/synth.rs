use lsm_core::config::Resources;
use lsm_core::pipeline::analyze_all;
use lsm_core::stats::{model_suite, SuiteOptions};
use lsm_core::synth::{generate, write_to_disk, Noise, PlantedModel, SynthSpec};

#[test]
fn ground_truth_lsm0_matches_pipeline() {
    let spec = SynthSpec {
        projects: 60,
        seed: 11,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).unwrap();
    let out = analyze_all(&corpus.inputs(), &Resources::default(), 1);
    for (a, t) in out.iter().zip(&corpus.truth.projects) {
        let a = a.as_ref().unwrap();
        let got = a.lsm.as_ref().ok().map(|v| v.lsm[0]);
        match (got, t.lsm0) {
            (Some(g), Some(w)) => assert!((g - w).abs() < 1e-12, "{}: {g} vs {w}", t.project),
            (g, w) => assert_eq!(g.is_some(), w.is_some(), "{}", t.project),
        }
        assert!(a.record.flags.is_empty(), "{}: {:?}", t.project, a.record.flags);
    }
}

#[test]
fn noiseless_linear_outcome_is_recovered() {
    let spec = SynthSpec {
        projects: 80,
        seed: 3,
        style_gap: [0.5, 2.0],
        new_c: PlantedModel {
            intercept: 10.0,
            beta: 4.0,
            beta_sq: 0.0,
            center: 0.0,
            noise: Noise::Sd(0.0),
        },
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).unwrap();
    let records: Vec<_> = analyze_all(&corpus.inputs(), &Resources::default(), 1)
        .into_iter()
        .map(|r| r.unwrap().record)
        .collect();
    let opts = SuiteOptions {
        diagnostics: false,
        ..SuiteOptions::default()
    };
    let suite = model_suite(&records, &opts).unwrap();
    let fit = &suite.get("newc_comp").unwrap().fit;
    // Only the rounding of monthly commit counts is left as noise.
    assert!(fit.r_squared > 0.999, "r2 {}", fit.r_squared);
    let (b, _) = fit.coef("lsm0").unwrap();
    assert!((b - 4.0).abs() < 0.1, "{b}");
}

#[test]
fn bundles_round_trip_through_disk() {
    let spec = SynthSpec {
        projects: 3,
        seed: 2,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_to_disk(&corpus, dir.path()).unwrap();
    for p in &corpus.projects {
        let loaded = lsm_core::pipeline::load_bundle(&dir.path().join(&p.meta.name).join("meta.toml")).unwrap();
        let direct = p.input();
        assert_eq!(loaded.meta, direct.meta);
        assert_eq!(loaded.events, direct.events);
        assert_eq!(loaded.accounts, direct.accounts);
    }
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["projects"].as_array().unwrap().len(), 3);
    let cfg = lsm_core::RunConfig::load(&dir.path().join("run.toml")).unwrap();
    assert_eq!(cfg.meta_paths().len(), 3);
    cfg.validate().unwrap();
}
