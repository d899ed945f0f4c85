use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lsm_core::config::Resources;
use lsm_core::metrics::lsm_category;
use lsm_core::pipeline::{analyze_all, analyze_project};
use lsm_core::stats::{model_suite, SuiteOptions};
use lsm_core::synth::{generate, SynthSpec};
use lsm_core::textprep::{prepare, AcronymDict};

const COMMENT: &str = "Thanks @alice, I think the fix in `parse_header()` is right but we should \
also handle the CI failure:\n\n```\nthread 'main' panicked at src/lib.rs:10\n```\n\n> quoted text \
from earlier\nSee https://example.org/issues/12 and commit 1a2b3c4d5e for context. LGTM otherwise, \
we'll merge after the PR is rebased.";

fn text(c: &mut Criterion) {
    let acronyms = AcronymDict::seed();
    c.bench_function("prepare_comment", |b| b.iter(|| prepare(black_box(COMMENT), &acronyms)));
    c.bench_function("lsm_category_1k", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..1000 {
                let x = i as f64 * 0.01;
                acc += lsm_category(black_box(x), black_box(10.0 - x)).unwrap();
            }
            acc
        })
    });
}

fn pipeline(c: &mut Criterion) {
    let spec = SynthSpec {
        projects: 200,
        ..SynthSpec::default()
    };
    let corpus = generate(&spec).expect("default spec is feasible");
    let inputs = corpus.inputs();
    let res = Resources::default();
    c.bench_function("analyze_project", |b| {
        b.iter(|| analyze_project(black_box(&inputs[0]), &res).unwrap())
    });
    let records: Vec<_> = analyze_all(&inputs, &res, 1)
        .into_iter()
        .map(|r| r.expect("synthetic project analyzes").record)
        .collect();
    let opts = SuiteOptions {
        vif_threshold: 5.0,
        diagnostics: true,
    };
    let mut group = c.benchmark_group("suite");
    group.sample_size(10);
    group.bench_function("model_suite_200", |b| b.iter(|| model_suite(black_box(&records), &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, text, pipeline);
criterion_main!(benches);
