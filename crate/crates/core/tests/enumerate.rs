mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Duration;

use common::levels;
use oagma::enumerate::{run_campaign, Campaign, EnumerationMode};
use oagma::iso::canonical_key;
use oagma::spectra::{check_gwp_residues, check_j_parity, gwp, j_spectrum};
use oagma::{DesignParams, Error};

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timings.txt")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn campaign(k_max: usize, budget: Option<Duration>) -> Campaign {
    let mut c = Campaign::new(
        DesignParams::new(20, 2, 2, 2).unwrap(),
        EnumerationMode::Full,
    );
    c.k_max = Some(k_max);
    c.budget = budget;
    c
}

#[test]
fn resume_matches_uninterrupted_run() {
    let straight = tempfile::tempdir().unwrap();
    let state = run_campaign(&campaign(7, None), straight.path(), false).unwrap();
    assert_eq!(state.last_k(), 7);

    let split = tempfile::tempdir().unwrap();
    run_campaign(&campaign(4, None), split.path(), false).unwrap();
    match run_campaign(&campaign(7, Some(Duration::ZERO)), split.path(), true) {
        Err(Error::BudgetExceeded { completed_k }) => assert_eq!(completed_k, 4),
        other => panic!("expected a budget stop, got {other:?}"),
    }
    let resumed = run_campaign(&campaign(7, None), split.path(), true).unwrap();
    assert_eq!(resumed.per_level, state.per_level);
    assert_eq!(snapshot(split.path()), snapshot(straight.path()));
}

#[test]
fn directed_classes_are_full_classes() {
    let full = levels(20, 2, 6, &EnumerationMode::Full);
    let directed = levels(20, 2, 6, &EnumerationMode::Directed);
    for (f, d) in full.iter().zip(&directed) {
        let keys: BTreeSet<_> = f.iter().map(canonical_key).collect();
        assert!(d.iter().all(|x| keys.contains(&canonical_key(x))));
    }
}

#[test]
fn enumerated_designs_pass_parity_and_residue_checks() {
    for d in levels(20, 2, 8, &EnumerationMode::Full).iter().flatten() {
        assert!(
            check_j_parity(&j_spectrum(d, d.factors()).unwrap()).is_empty(),
            "{d:?}"
        );
        assert!(check_gwp_residues(&gwp(d)).is_empty(), "{d:?}");
    }
}
