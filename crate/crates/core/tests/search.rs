mod common;

use std::path::PathBuf;

use common::{arb_oa, levels};
use oagma::catalog::{self, compare_against_catalog, validate_entry, CatalogEntry, Status};
use oagma::enumerate::{seed_design, EnumerationMode};
use oagma::extend::ExtensionMode;
use oagma::hadamard::{derive_oas, kronecker, load_hadamard, Alphabet, HadamardMatrix};
use oagma::heuristics::{backward_search, forward_backward_search, SearchConfig};
use oagma::iso::reduce_to_classes;
use oagma::spectra::{distance_distribution, gwp, verify_strength};
use oagma::DesignParams;
use proptest::prelude::*;

fn hadamard(name: &str) -> HadamardMatrix {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data/hadamard")
        .join(name);
    load_hadamard(&path, Alphabet::PlusMinus).unwrap()
}

#[test]
fn shipped_hadamard_files_derive_saturated_arrays() {
    for name in [
        "h2.had",
        "h4.had",
        "h12.had",
        "h20.had",
        "h24_paley.had",
        "h24_kron.had",
    ] {
        let h = hadamard(name);
        if h.order() < 4 {
            assert!(derive_oas(&h).is_err());
            continue;
        }
        let oas = derive_oas(&h).unwrap();
        assert_eq!(oas.len(), h.order());
        assert!(oas
            .iter()
            .all(|d| d.factors() == h.order() - 1 && verify_strength(d, 2)));
    }
    assert_eq!(
        reduce_to_classes(&derive_oas(&hadamard("h4.had")).unwrap())
            .unwrap()
            .len(),
        1
    );
    assert_eq!(
        kronecker(&hadamard("h12.had"), &hadamard("h2.had")),
        hadamard("h24_kron.had")
    );
    for (a, b) in [
        ("h2.had", "h12.had"),
        ("h4.had", "h4.had"),
        ("h4.had", "h20.had"),
    ] {
        let k = kronecker(&hadamard(a), &hadamard(b));
        assert!(HadamardMatrix::new((0..k.order()).map(|i| k.row(i).to_vec()).collect()).is_ok());
    }
}

#[test]
fn backward_search_reaches_catalog_at_k12() {
    let parents = derive_oas(&hadamard("h24_kron.had")).unwrap();
    let r = backward_search(&parents[0], 12, &SearchConfig::default()).unwrap();
    let cmp = compare_against_catalog(&r.design, catalog::builtin()).unwrap();
    assert_eq!(cmp.status, Status::MatchesGma);
}

#[test]
fn backward_search_is_reproducible() {
    let parent = &derive_oas(&hadamard("h20.had")).unwrap()[3];
    let cfg = SearchConfig {
        seed: 11,
        restarts: 8,
        ..SearchConfig::default()
    };
    let a = backward_search(parent, 9, &cfg).unwrap();
    let b = backward_search(parent, 9, &cfg).unwrap();
    assert_eq!(
        (&a.design, &a.columns, a.restart),
        (&b.design, &b.columns, b.restart)
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let c = pool.install(|| backward_search(parent, 9, &cfg)).unwrap();
    assert_eq!(c.columns, b.columns);
}

#[test]
fn forward_backward_log_never_regresses() {
    for mode in [ExtensionMode::Plain, ExtensionMode::Directed] {
        let cfg = SearchConfig {
            seed: 5,
            max_iterations: Some(150),
            mode,
            ..SearchConfig::default()
        };
        let best = forward_backward_search(&DesignParams::new(20, 2, 2, 2).unwrap(), &cfg).unwrap();
        for (k, (d, g)) in &best.entries {
            assert_eq!(d.factors(), *k);
            assert!(verify_strength(d, 2));
            assert_eq!(&gwp(d), g);
        }
        let mut last: std::collections::BTreeMap<usize, Vec<i128>> = Default::default();
        for step in &best.log {
            if let Some(prev) = last.get(&step.k) {
                assert!(step.gwp[1..] < prev[1..], "k={} regressed", step.k);
            }
            last.insert(step.k, step.gwp.clone());
        }
        for (k, g) in &last {
            assert_eq!(best.entries[k].1.scaled(), &g[..]);
        }
    }
}

#[test]
fn catalog_statuses() {
    let seed = seed_design(&DesignParams::new(20, 2, 2, 2).unwrap()).unwrap();
    assert_eq!(
        compare_against_catalog(&seed, catalog::builtin())
            .unwrap()
            .status,
        Status::NoEntry
    );
    for d in levels(20, 2, 5, &EnumerationMode::Full).iter().flatten() {
        let own = CatalogEntry::from_scaled(
            *d.params(),
            distance_distribution(d).scaled().to_vec(),
            "self",
        )
        .unwrap();
        assert!(validate_entry(&own).is_empty());
        let cmp = compare_against_catalog(d, std::slice::from_ref(&own)).unwrap();
        assert_eq!(cmp.status, Status::MatchesGma);
        assert_eq!(cmp.first_difference, None);
    }
    let worse = levels(24, 2, 5, &EnumerationMode::Full).pop().unwrap();
    let statuses: Vec<Status> = worse
        .iter()
        .map(|d| {
            compare_against_catalog(d, catalog::builtin())
                .unwrap()
                .status
        })
        .collect();
    assert!(statuses.contains(&Status::MatchesGma));
    assert!(statuses.contains(&Status::Worse));
    assert!(!statuses.contains(&Status::Better));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_restart_never_ends_above_its_start(parent in arb_oa(), k in 2usize..14, seed in any::<u64>()) {
        prop_assume!(k < parent.factors());
        let cfg = SearchConfig { seed, restarts: 1, ..SearchConfig::default() };
        let r = backward_search(&parent, k, &cfg).unwrap();
        prop_assert!(r.gwp.scaled()[1..] <= r.start_gwp[1..]);
        prop_assert_eq!(r.design.clone(), parent.project(&r.columns).unwrap().with_params(*r.design.params()).unwrap());
        prop_assert!(verify_strength(&r.design, 2));
    }
}
