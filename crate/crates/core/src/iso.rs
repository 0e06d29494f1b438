//! Canonical forms of designs under row permutations, column permutations
//! and per-column level permutations.
//!
//! The canonical form is the minimal image, in column-major order, of the
//! row-sorted matrix over all column orders and level relabelings that list
//! columns by an invariant color. Colors come from the multiset of
//! `(t+1)`-column projection patterns each column takes part in, refined
//! once by the colors of the partners. Row permutations are absorbed by
//! always reading rows in sorted order, so the search only branches over
//! `(column, level permutation)` pairs and keeps those whose next column
//! reading is minimal.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::design::{Design, DesignParams};
use crate::error::{Error, Result};
use crate::spectra::{binomial, for_each_subset};

/// Byte string constant on isomorphism classes; ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(Vec<u8>);

impl CanonicalKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

/// Subsets examined for column colors are capped to keep coloring cheap.
const MAX_COLOR_SUBSETS: i128 = 250_000;

fn column_colors(d: &Design) -> Vec<u32> {
    let k = d.factors();
    let s = d.levels();
    let w = d.params().strength() + 1;
    if w >= k || binomial(k, w) > MAX_COLOR_SUBSETS {
        return vec![0; k];
    }
    let cells = s.pow(w as u32);
    let mut subset_inv: Vec<(u64, Vec<u32>)> = Vec::new();
    let mut counts = vec![0u32; cells];
    for_each_subset(k, w, |mask| {
        let cols: Vec<usize> = (0..k).filter(|&j| mask >> j & 1 == 1).collect();
        counts.iter_mut().for_each(|c| *c = 0);
        for row in d.rows() {
            let idx = cols.iter().fold(0usize, |a, &c| a * s + row[c] as usize);
            counts[idx] += 1;
        }
        let mut inv = counts.clone();
        inv.sort_unstable();
        subset_inv.push((mask, inv));
    });
    let ids = rank(subset_inv.iter().map(|(_, inv)| inv.clone()).collect());
    let subsets: Vec<(u64, u32)> = subset_inv
        .iter()
        .zip(&ids)
        .map(|((mask, _), &id)| (*mask, id))
        .collect();

    let mut per_col: Vec<Vec<u32>> = vec![Vec::new(); k];
    for &(mask, id) in &subsets {
        for (j, col) in per_col.iter_mut().enumerate() {
            if mask >> j & 1 == 1 {
                col.push(id);
            }
        }
    }
    per_col.iter_mut().for_each(|v| v.sort_unstable());
    let colors = rank(per_col);

    // one refinement round: subset pattern together with the partners' colors
    let mut refined: Vec<Vec<(u32, u32, Vec<u32>)>> = vec![Vec::new(); k];
    for &(mask, id) in &subsets {
        for (j, entry) in refined.iter_mut().enumerate() {
            if mask >> j & 1 == 1 {
                let mut others: Vec<u32> = (0..k)
                    .filter(|&o| o != j && mask >> o & 1 == 1)
                    .map(|o| colors[o])
                    .collect();
                others.sort_unstable();
                entry.push((colors[j], id, others));
            }
        }
    }
    refined.iter_mut().for_each(|v| v.sort_unstable());
    rank(refined)
}

/// Dense ranks of values in sorted order.
fn rank<T: Ord + Clone>(values: Vec<T>) -> Vec<u32> {
    let mut sorted = values.clone();
    sorted.sort_unstable();
    sorted.dedup();
    values
        .iter()
        .map(|v| sorted.binary_search(v).expect("value present") as u32)
        .collect()
}

fn level_permutations(s: usize) -> Vec<Vec<u8>> {
    fn go(cur: &mut Vec<u8>, used: &mut Vec<bool>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                cur.push(v as u8);
                go(cur, used, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; s], &mut out);
    out
}

struct MinImage<'a> {
    columns: Vec<Vec<u8>>,
    colors: Vec<u32>,
    color_seq: Vec<u32>,
    perms: &'a [Vec<u8>],
    s: usize,
    used: Vec<bool>,
    path: Vec<Vec<u8>>,
    best: Option<Vec<Vec<u8>>>,
}

impl MinImage<'_> {
    /// Column reading of `col` under `perm` with rows grouped into `blocks`
    /// (each block listed in current row order); ties inside a block are
    /// resolved by sorting values ascending.
    fn reading(&self, col: usize, perm: &[u8], order: &[u32], bounds: &[usize], out: &mut Vec<u8>) {
        out.clear();
        let column = &self.columns[col];
        let mut counts = [0usize; 256];
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            counts[..self.s].iter_mut().for_each(|c| *c = 0);
            for &r in &order[a..b] {
                counts[perm[column[r as usize] as usize] as usize] += 1;
            }
            for (v, &c) in counts[..self.s].iter().enumerate() {
                out.extend(std::iter::repeat_n(v as u8, c));
            }
        }
    }

    fn refine(
        &self,
        col: usize,
        perm: &[u8],
        order: &[u32],
        bounds: &[usize],
    ) -> (Vec<u32>, Vec<usize>) {
        let column = &self.columns[col];
        let mut new_order = Vec::with_capacity(order.len());
        let mut new_bounds = vec![0];
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            for v in 0..self.s as u8 {
                let before = new_order.len();
                new_order.extend(
                    order[a..b]
                        .iter()
                        .copied()
                        .filter(|&r| perm[column[r as usize] as usize] == v),
                );
                if new_order.len() > before {
                    new_bounds.push(new_order.len());
                }
            }
        }
        (new_order, new_bounds)
    }

    fn search(&mut self, depth: usize, order: &[u32], bounds: &[usize], tied: bool) {
        let k = self.columns.len();
        if depth == k {
            if !tied || self.best.is_none() {
                self.best = Some(self.path.clone());
            }
            return;
        }
        let want = self.color_seq[depth];
        let mut min: Option<Vec<u8>> = None;
        let mut cands: Vec<(usize, usize)> = Vec::new();
        let mut buf = Vec::with_capacity(order.len());
        for c in 0..k {
            if self.used[c] || self.colors[c] != want {
                continue;
            }
            for (pi, perm) in self.perms.iter().enumerate() {
                self.reading(c, perm, order, bounds, &mut buf);
                match min.as_ref().map(|m| buf.as_slice().cmp(m.as_slice())) {
                    None | Some(std::cmp::Ordering::Less) => {
                        min = Some(buf.clone());
                        cands.clear();
                        cands.push((c, pi));
                    }
                    Some(std::cmp::Ordering::Equal) => cands.push((c, pi)),
                    Some(std::cmp::Ordering::Greater) => {}
                }
            }
        }
        let Some(min) = min else { return };
        let mut tied = tied;
        if tied {
            if let Some(best) = &self.best {
                match min.cmp(&best[depth]) {
                    std::cmp::Ordering::Greater => return,
                    std::cmp::Ordering::Less => tied = false,
                    std::cmp::Ordering::Equal => {}
                }
            }
        }
        self.path.push(min);
        for (c, pi) in cands {
            // an earlier sibling may have improved the incumbent
            if tied {
                if let Some(best) = &self.best {
                    if self.path[depth] > best[depth] {
                        break;
                    }
                }
            }
            let (new_order, new_bounds) = self.refine(c, &self.perms[pi], order, bounds);
            self.used[c] = true;
            self.search(depth + 1, &new_order, &new_bounds, tied);
            self.used[c] = false;
            if !tied {
                // the incumbent is now this branch's prefix; later siblings tie with it
                tied = true;
            }
        }
        self.path.pop();
    }
}

/// Canonical key and canonical representative (the minimal image, rows sorted).
pub fn canonical_form(d: &Design) -> (CanonicalKey, Design) {
    let p = *d.params();
    let (n, k, s) = (p.runs(), p.factors(), p.levels());
    let colors = column_colors(d);
    let mut color_seq = colors.clone();
    color_seq.sort_unstable();
    let perms = level_permutations(s);
    let mut search = MinImage {
        columns: d.columns(),
        colors,
        color_seq: color_seq.clone(),
        perms: &perms,
        s,
        used: vec![false; k],
        path: Vec::with_capacity(k),
        best: None,
    };
    let order: Vec<u32> = (0..n as u32).collect();
    search.search(0, &order, &[0, n], true);
    let best = search.best.expect("search always reaches a leaf");

    let mut bytes = Vec::with_capacity(16 + 4 * k + n * k);
    for v in [n, k, s, p.strength()] {
        bytes.extend_from_slice(&(v as u32).to_be_bytes());
    }
    for c in &color_seq {
        bytes.extend_from_slice(&c.to_be_bytes());
    }
    for col in &best {
        bytes.extend_from_slice(col);
    }
    let form = Design::from_columns(p, &best).expect("image keeps the shape");
    (CanonicalKey(bytes), form)
}

pub fn canonical_key(d: &Design) -> CanonicalKey {
    canonical_form(d).0
}

/// One canonical representative per isomorphism class, sorted by key.
pub fn reduce_to_classes(ds: &[Design]) -> Result<Vec<Design>> {
    reduce_with_keys(ds).map(|v| v.into_iter().map(|(_, d)| d).collect())
}

/// As [`reduce_to_classes`], keeping the keys.
pub fn reduce_with_keys(ds: &[Design]) -> Result<Vec<(CanonicalKey, Design)>> {
    if let Some(first) = ds.first() {
        let p: &DesignParams = first.params();
        if let Some(bad) = ds.iter().find(|d| d.params() != p) {
            return Err(Error::ParamMismatch(format!("{} vs {}", p, bad.params())));
        }
    }
    let forms: Vec<(CanonicalKey, Design)> = ds.par_iter().map(canonical_form).collect();
    let classes: BTreeMap<CanonicalKey, Design> = forms.into_iter().collect();
    Ok(classes.into_iter().collect())
}

/// Seeded random row permutation, column permutation and level relabeling.
pub fn random_isomorph(d: &Design, seed: u64) -> Design {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, k, s) = (d.runs(), d.factors(), d.levels());
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let mut cols: Vec<usize> = (0..k).collect();
    cols.shuffle(&mut rng);
    let relabel: Vec<Vec<u8>> = (0..k)
        .map(|_| {
            let mut p: Vec<u8> = (0..s as u8).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    let mut cells = Vec::with_capacity(n * k);
    for &r in &rows {
        for &c in &cols {
            cells.push(relabel[c][d.get(r, c) as usize]);
        }
    }
    Design::new(*d.params(), cells).expect("isomorph keeps the shape")
}
