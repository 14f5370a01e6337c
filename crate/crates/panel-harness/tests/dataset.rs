//! Guards on the checked-in synthetic dataset: it must be exactly what the
//! generator produces for the default count and seed, and it must parse
//! cleanly, so nobody can edit the file (or the generator) without noticing.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use panel_core::task::{parse_dataset, render_dataset, Domain};
use panel_harness::synth;

fn on_disk() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synth.tasks");
    fs::read_to_string(&path).expect("data/synth.tasks is checked in")
}

#[test]
fn checked_in_dataset_matches_the_generator() {
    let generated = render_dataset(&synth::generate(synth::DEFAULT_COUNT, synth::DEFAULT_SEED));
    assert_eq!(
        on_disk(),
        generated,
        "data/synth.tasks drifted from the generator; rebuild it with `panel gen-synth`"
    );
}

#[test]
fn checked_in_dataset_parses_cleanly() {
    let (dataset, warnings) = parse_dataset("synth", &on_disk()).unwrap();
    assert!(warnings.is_empty(), "unexpected parse warnings: {warnings:?}");
    assert_eq!(dataset.tasks.len(), 200);

    let ids: BTreeSet<&str> = dataset.tasks.iter().map(|t| t.id.as_str()).collect();
    assert_eq!(ids.len(), dataset.tasks.len(), "task ids must be unique");

    let domains: BTreeSet<Domain> = dataset.tasks.iter().map(|t| t.domain).collect();
    assert_eq!(domains.len(), Domain::ALL.len(), "every domain is represented");

    for task in &dataset.tasks {
        let gold: i64 = task.gold.parse().expect("gold answers are integers");
        assert!((1..=999).contains(&gold), "{}: gold {gold} out of range", task.id);
        assert!(
            task.prompt.lines().last().unwrap_or_default().starts_with("ORACLE "),
            "{}: prompt must end with its control line",
            task.id
        );
    }
}
