#![allow(dead_code)]

use oagma::enumerate::{extend_level, seed_design, EnumerationMode};
use oagma::hadamard::{derive_oas, kronecker, parse_hadamard, Alphabet};
use oagma::iso::random_isomorph;
use oagma::{Design, DesignParams};
use proptest::prelude::*;

/// Class representatives for `k = t..=k_max` (index 0 is the seed level).
pub fn levels(n: usize, t: usize, k_max: usize, mode: &EnumerationMode) -> Vec<Vec<Design>> {
    let params = DesignParams::new(n, t, 2, t).unwrap();
    let mut out = vec![vec![seed_design(&params).unwrap()]];
    for _ in t + 1..=k_max {
        let (next, _) = extend_level(out.last().unwrap(), mode).unwrap();
        out.push(next);
    }
    out
}

fn sorted_rows(rows: impl Iterator<Item = Vec<u8>>) -> Vec<Vec<u8>> {
    let mut v: Vec<Vec<u8>> = rows.collect();
    v.sort_unstable();
    v
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Exhaustive test over all column permutations and level flips of a
/// two-level design, matching rows as sorted multisets.
pub fn brute_force_isomorphic(a: &Design, b: &Design) -> bool {
    assert_eq!(a.levels(), 2);
    if a.params() != b.params() {
        return false;
    }
    let k = a.factors();
    let target = sorted_rows(a.rows().map(<[u8]>::to_vec));
    let mut perm: Vec<usize> = (0..k).collect();
    loop {
        for flips in 0u32..1 << k {
            let image = sorted_rows(b.rows().map(|r| {
                perm.iter()
                    .enumerate()
                    .map(|(j, &c)| r[c] ^ ((flips >> j) & 1) as u8)
                    .collect()
            }));
            if image == target {
                return true;
            }
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

/// Arbitrary `N x k` matrix over `s` levels, declared strength 1.
pub fn arb_design(s: usize, max_mult: usize, max_k: usize) -> impl Strategy<Value = Design> {
    (1..=max_mult, 1..=max_k).prop_flat_map(move |(m, k)| {
        let n = s * m;
        proptest::collection::vec(0..s as u8, n * k).prop_map(move |cells| {
            let params = DesignParams::new(n, k, s, 1).unwrap();
            Design::new(params, cells).unwrap()
        })
    })
}

/// Columns `cols` of the saturated OA(16,15,2,2) from the order-16
/// Sylvester matrix, rows stacked `copies` times, then randomly relabeled.
pub fn sylvester_projection(cols: &[usize], copies: usize, seed: u64) -> Design {
    let h2 = parse_hadamard("++\n+-\n", Alphabet::PlusMinus).unwrap();
    let mut h = h2.clone();
    for _ in 0..3 {
        h = kronecker(&h, &h2);
    }
    let sat = derive_oas(&h).unwrap().swap_remove(0);
    let proj = sat.project(cols).unwrap();
    let rows: Vec<Vec<u8>> = (0..copies)
        .flat_map(|_| proj.rows().map(<[u8]>::to_vec))
        .collect();
    random_isomorph(&Design::from_rows(2, 2, &rows).unwrap(), seed)
}

/// Random strength-2 array from [`sylvester_projection`].
pub fn arb_oa() -> impl Strategy<Value = Design> {
    (
        proptest::collection::btree_set(0usize..15, 2..=15),
        1..=2usize,
        any::<u64>(),
    )
        .prop_map(|(cols, copies, seed)| {
            sylvester_projection(&cols.into_iter().collect::<Vec<_>>(), copies, seed)
        })
}
