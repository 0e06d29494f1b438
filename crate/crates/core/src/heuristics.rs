//! Backward search (column-subset hill climbing on a large parent) and
//! forward-and-backward search (random-objective extension walks).
//!
//! Randomness comes from ChaCha8 seeded with the 64-bit user seed; restart
//! `r` of a backward search reads stream `r`, a forward walk reads stream
//! `u64::MAX` so the two never overlap.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::design::{Design, DesignParams};
use crate::enumerate::seed_design;
use crate::error::{Error, Result};
use crate::extend::{build_problem, enumerate_solutions, ExtensionMode};
use crate::spectra::{self, cached_krawtchouk, Gwp, KrawtchoukTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    pub seed: u64,
    pub restarts: usize,
    /// Wall-clock limit; runs stopped by it are not reproducible.
    pub time_budget: Option<Duration>,
    /// Cap on extension solves (forward search) for reproducible stops.
    pub max_iterations: Option<u64>,
    pub mode: ExtensionMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 0,
            restarts: 100,
            time_budget: None,
            max_iterations: None,
            mode: ExtensionMode::Plain,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// For each factor `r < s-1`, a 0/1 vector of length `N` with `N/s` ones.
pub fn random_objective(params: &DesignParams, seed: u64) -> Vec<Vec<u8>> {
    draw_objective(params, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn draw_objective(params: &DesignParams, rng: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
    let (n, s) = (params.runs(), params.levels());
    (0..s - 1)
        .map(|_| {
            let mut v = vec![0u8; n];
            v[..n / s].fill(1);
            v.shuffle(rng);
            v
        })
        .collect()
}

/// Pairwise "levels differ" bitsets per parent column, so that the distance
/// distribution of any column subset is a popcount-free histogram update.
struct PairTable {
    n: usize,
    pairs: usize,
    /// `diff[c][p]`: rows of pair `p` differ in column `c`.
    diff: Vec<Vec<bool>>,
}

impl PairTable {
    fn new(d: &Design) -> Self {
        let n = d.runs();
        let mut diff = vec![Vec::with_capacity(n * (n - 1) / 2); d.factors()];
        for a in 0..n {
            for b in a + 1..n {
                for (c, out) in diff.iter_mut().enumerate() {
                    out.push(d.get(a, c) != d.get(b, c));
                }
            }
        }
        PairTable {
            n,
            pairs: n * (n - 1) / 2,
            diff,
        }
    }

    fn distances(&self, cols: &[usize]) -> Vec<u8> {
        let mut dist = vec![0u8; self.pairs];
        for &c in cols {
            for (x, &f) in dist.iter_mut().zip(&self.diff[c]) {
                *x += f as u8;
            }
        }
        dist
    }

    /// `N^2 A` after swapping `out` for `inn` in a subset with pair distances `dist`.
    fn gwp_after_swap(
        &self,
        dist: &[u8],
        out: usize,
        inn: usize,
        table: &KrawtchoukTable,
    ) -> Vec<i128> {
        let k = table.k();
        let mut hist = vec![0i128; k + 1];
        let (o, i) = (&self.diff[out], &self.diff[inn]);
        for p in 0..self.pairs {
            let v = dist[p] as usize + i[p] as usize - o[p] as usize;
            hist[v] += 2;
        }
        hist[0] += self.n as i128;
        krawtchouk_apply(&hist, table)
    }

    fn gwp_of(&self, dist: &[u8], table: &KrawtchoukTable) -> Vec<i128> {
        let mut hist = vec![0i128; table.k() + 1];
        for &v in dist {
            hist[v as usize] += 2;
        }
        hist[0] += self.n as i128;
        krawtchouk_apply(&hist, table)
    }
}

fn krawtchouk_apply(b: &[i128], table: &KrawtchoukTable) -> Vec<i128> {
    (0..b.len())
        .map(|j| {
            b.iter()
                .enumerate()
                .map(|(i, &x)| table.value(j, i) * x)
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackwardResult {
    pub design: Design,
    pub gwp: Gwp,
    /// Parent columns kept, ascending.
    pub columns: Vec<usize>,
    /// Restart that produced the result.
    pub restart: usize,
    /// GWP of that restart's random starting subset.
    pub start_gwp: Vec<i128>,
}

/// Local optimum of one restart: columns, `N^2 A`, starting `N^2 A`.
fn climb(
    pt: &PairTable,
    k0: usize,
    k: usize,
    seed: u64,
    restart: usize,
    table: &KrawtchoukTable,
) -> (Vec<usize>, Vec<i128>, Vec<i128>) {
    let mut rng = rng_for(seed, restart as u64);
    let mut cols = index::sample(&mut rng, k0, k).into_vec();
    cols.sort_unstable();
    let mut dist = pt.distances(&cols);
    let mut current = pt.gwp_of(&dist, table);
    let start = current.clone();
    loop {
        let mut best: Option<(usize, usize, Vec<i128>)> = None;
        for (pos, &out) in cols.iter().enumerate() {
            for inn in (0..k0).filter(|c| cols.binary_search(c).is_err()) {
                let a = pt.gwp_after_swap(&dist, out, inn, table);
                let target = best.as_ref().map_or(&current, |b| &b.2);
                if a[1..] < target[1..] {
                    best = Some((pos, inn, a));
                }
            }
        }
        let Some((pos, inn, a)) = best else { break };
        let out = cols[pos];
        for (x, (&o, &i)) in dist.iter_mut().zip(pt.diff[out].iter().zip(&pt.diff[inn])) {
            *x = *x + i as u8 - o as u8;
        }
        cols[pos] = inn;
        cols.sort_unstable();
        current = a;
    }
    (cols, current, start)
}

/// Best `k`-column projection of `parent` found by `cfg.restarts` seeded
/// hill climbs over single-column swaps.
///
/// Each climb takes the swap with the lexicographically smallest resulting
/// GWP (ties: lowest outgoing column, then lowest incoming column) until no
/// swap improves. The best local optimum wins, earliest restart on ties.
pub fn backward_search(parent: &Design, k: usize, cfg: &SearchConfig) -> Result<BackwardResult> {
    let k0 = parent.factors();
    if k >= k0 || k == 0 {
        return Err(Error::BadProjection { k, parent: k0 });
    }
    let restarts = cfg.restarts.max(1);
    let table = cached_krawtchouk(parent.levels(), k)?;
    let pt = PairTable::new(parent);
    let runs: Vec<(Vec<usize>, Vec<i128>, Vec<i128>)> = (0..restarts)
        .into_par_iter()
        .map(|r| climb(&pt, k0, k, cfg.seed, r, &table))
        .collect();
    let (restart, (cols, a, start)) = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, x), (j, y)| x.1[1..].cmp(&y.1[1..]).then(i.cmp(j)))
        .expect("at least one restart");
    let design = parent.project(&cols)?;
    let gwp = Gwp::new(*design.params(), a)?;
    Ok(BackwardResult {
        design,
        gwp,
        columns: cols,
        restart,
        start_gwp: start,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Improvement {
    pub k: usize,
    pub gwp: Vec<i128>,
    /// Extension solves performed when the improvement was found.
    pub iteration: u64,
    pub elapsed: Duration,
    /// Found as a delete-one projection rather than by extension.
    pub from_projection: bool,
}

/// Best design seen at each `k`, only ever replaced by a strictly better GWP.
#[derive(Debug, Clone, Default)]
pub struct BestPerK {
    pub entries: BTreeMap<usize, (Design, Gwp)>,
    pub log: Vec<Improvement>,
    pub iterations: u64,
    pub walks: u64,
    pub stopped_by_time: bool,
}

impl BestPerK {
    pub fn k_max(&self) -> Option<usize> {
        self.entries.keys().next_back().copied()
    }

    /// Inserts `d` if it beats the stored design at its `k`.
    fn offer(
        &mut self,
        d: &Design,
        iteration: u64,
        elapsed: Duration,
        from_projection: bool,
    ) -> bool {
        let a = spectra::gwp(d);
        let k = d.factors();
        let better = match self.entries.get(&k) {
            None => true,
            Some((_, old)) => a.scaled()[1..].cmp(&old.scaled()[1..]) == Ordering::Less,
        };
        if better {
            self.log.push(Improvement {
                k,
                gwp: a.scaled().to_vec(),
                iteration,
                elapsed,
                from_projection,
            });
            self.entries.insert(k, (d.clone(), a));
        }
        better
    }
}

/// Random-objective extension walks from the seed design.
///
/// Each walk starts at the `s^t` factorial and extends one column at a time
/// with the cheapest extension under a fresh random objective, until the
/// extension problem is infeasible. A new best at `k` also offers its `k`
/// delete-one projections to `k - 1`. Stops when either budget runs out;
/// with neither set it runs a single walk.
pub fn forward_backward_search(params: &DesignParams, cfg: &SearchConfig) -> Result<BestPerK> {
    let started = Instant::now();
    let t = params.strength();
    let seed = seed_design(&params.with_factors(t)?)?;
    let mut best = BestPerK::default();
    best.offer(&seed, 0, started.elapsed(), false);
    let mut rng = rng_for(cfg.seed, u64::MAX);
    let unbounded = cfg.time_budget.is_none() && cfg.max_iterations.is_none();
    let out_of_budget = |best: &mut BestPerK| {
        if cfg.max_iterations.is_some_and(|m| best.iterations >= m) {
            return true;
        }
        if cfg.time_budget.is_some_and(|b| started.elapsed() >= b) {
            best.stopped_by_time = true;
            return true;
        }
        false
    };
    'walks: loop {
        if unbounded && best.walks == 1 {
            break;
        }
        best.walks += 1;
        let mut d = seed.clone();
        loop {
            if out_of_budget(&mut best) {
                break 'walks;
            }
            best.iterations += 1;
            let objective = draw_objective(d.params(), &mut rng);
            let problem = build_problem(&d, cfg.mode, Some(objective))?;
            let Some(next) = enumerate_solutions(&problem)?.pop() else {
                break;
            };
            d = next;
            if best.offer(&d, best.iterations, started.elapsed(), false) && d.factors() > t + 1 {
                for c in 0..d.factors() {
                    let proj = d.delete_column(c)?;
                    best.offer(&proj, best.iterations, started.elapsed(), true);
                }
            }
        }
    }
    Ok(best)
}
