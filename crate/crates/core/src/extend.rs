//! Column extension as an all-solutions 0/1 feasibility problem.
//!
//! A parent `OA(N, k-1, s, t)` is extended by one factor. The new factor is
//! encoded by `s-1` binary columns `x_r`; each row carries at most one set
//! bit, so the solver assigns a level `0..s` per row directly. Every
//! constraint is a cardinality bound on "rows of a fixed set taking a fixed
//! level", which keeps propagation to running counts and capacities.

use std::collections::BTreeMap;

use crate::design::{Design, DesignParams};
use crate::encode::{self, BinaryExpansion};
use crate::error::{Error, Result};
use crate::spectra::{self, for_each_subset, residue_pair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtensionMode {
    Plain,
    /// Adds the cell constraints forcing every `|J_{t+1}|` to its minimum `2^t`.
    Directed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `sum_i x_{i,r} = N / s`.
    Balance,
    /// Product of `q - 1` parent bit columns against `x_r`, `= N / s^q`.
    Product { bit_columns: Vec<usize> },
    /// Directed cell of a `t`-column projection of the parent.
    DirectedCell { columns: Vec<usize>, cell: Vec<u8> },
}

/// Rows of `rows` taking `level` number between `lo` and `hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardinalityConstraint {
    pub kind: ConstraintKind,
    pub rows: Vec<usize>,
    pub level: u8,
    pub lo: usize,
    pub hi: usize,
}

#[derive(Debug, Clone)]
pub struct ExtensionProblem {
    parent: Design,
    expansion: BinaryExpansion,
    mode: ExtensionMode,
    objective: Option<Vec<Vec<u8>>>,
    enumerate_all: bool,
    constraints: Vec<CardinalityConstraint>,
    /// Previous row equal to this one in the parent, if any.
    prev_equal: Vec<Option<usize>>,
}

impl ExtensionProblem {
    pub fn parent(&self) -> &Design {
        &self.parent
    }

    pub fn expansion(&self) -> &BinaryExpansion {
        &self.expansion
    }

    pub fn mode(&self) -> ExtensionMode {
        self.mode
    }

    pub fn objective(&self) -> Option<&[Vec<u8>]> {
        self.objective.as_deref()
    }

    pub fn enumerate_all(&self) -> bool {
        self.enumerate_all
    }

    pub fn constraints(&self) -> &[CardinalityConstraint] {
        &self.constraints
    }

    /// Pairs `(i, j)`, `i < j`, of equal parent rows with `i` the nearest
    /// earlier copy of `j`; each yields `level(i) <= level(j)`.
    pub fn ordering_pairs(&self) -> Vec<(usize, usize)> {
        self.prev_equal
            .iter()
            .enumerate()
            .filter_map(|(j, p)| p.map(|i| (i, j)))
            .collect()
    }

    /// Number of directed inequalities (two per directed cell).
    pub fn directed_inequalities(&self) -> usize {
        2 * self
            .constraints
            .iter()
            .filter(|c| matches!(c.kind, ConstraintKind::DirectedCell { .. }))
            .count()
    }

    /// Switches between returning all solutions and one optimal solution.
    pub fn set_enumerate_all(&mut self, all: bool) {
        self.enumerate_all = all;
    }
}

/// Compiles the extension system for `parent`.
///
/// `objective[r][i]` is the cost of row `i` taking level `r` (`r < s-1`);
/// each row of the matrix must hold exactly `N/s` ones. With an objective
/// the problem defaults to returning a single optimal solution.
pub fn build_problem(
    parent: &Design,
    mode: ExtensionMode,
    objective: Option<Vec<Vec<u8>>>,
) -> Result<ExtensionProblem> {
    let p = *parent.params();
    let (n, s, t) = (p.runs(), p.levels(), p.strength());
    let km1 = p.factors();
    if mode == ExtensionMode::Directed && (s != 2 || p.lambda().is_multiple_of(2)) {
        return Err(Error::DirectedUnsupported {
            s,
            lambda: p.lambda(),
        });
    }
    if n % s != 0 {
        return Err(Error::InvalidParams {
            n,
            k: km1 + 1,
            s,
            t,
            reason: "s must divide N",
        });
    }
    if let Some(obj) = &objective {
        let ok = obj.len() == s - 1
            && obj.iter().all(|row| {
                row.len() == n
                    && row.iter().all(|&c| c <= 1)
                    && row.iter().filter(|&&c| c == 1).count() == n / s
            });
        if !ok {
            return Err(Error::Shape(format!(
                "objective must be {} rows of length {n} with exactly {} ones",
                s - 1,
                n / s
            )));
        }
    }

    let expansion = encode::expand(parent);
    let sm1 = s - 1;
    let mut constraints = Vec::new();
    let all_rows: Vec<usize> = (0..n).collect();
    for r in 0..sm1 {
        constraints.push(CardinalityConstraint {
            kind: ConstraintKind::Balance,
            rows: all_rows.clone(),
            level: r as u8,
            lo: n / s,
            hi: n / s,
        });
    }
    let mut sq = s;
    for q in 2..=t {
        sq *= s;
        if q - 1 > km1 {
            break;
        }
        let target = n / sq;
        for_each_subset(km1, q - 1, |mask| {
            let factors: Vec<usize> = (0..km1).filter(|&j| mask >> j & 1 == 1).collect();
            // every choice of one bit column (level < s-1) per factor
            let mut choice = vec![0usize; factors.len()];
            loop {
                let bit_columns: Vec<usize> = factors
                    .iter()
                    .zip(&choice)
                    .map(|(&f, &r)| sm1 * f + r)
                    .collect();
                let prod = encode::product_column(&expansion, &bit_columns)
                    .expect("distinct factors give distinct blocks");
                let rows = prod.ones_indices();
                for r in 0..sm1 {
                    constraints.push(CardinalityConstraint {
                        kind: ConstraintKind::Product {
                            bit_columns: bit_columns.clone(),
                        },
                        rows: rows.clone(),
                        level: r as u8,
                        lo: target,
                        hi: target,
                    });
                }
                let mut pos = 0;
                while pos < choice.len() {
                    choice[pos] += 1;
                    if choice[pos] < sm1 {
                        break;
                    }
                    choice[pos] = 0;
                    pos += 1;
                }
                if pos == choice.len() {
                    break;
                }
            }
        });
    }
    if mode == ExtensionMode::Directed && km1 >= t {
        let lambda = p.lambda();
        let (lo, hi) = ((lambda - 1) / 2, lambda.div_ceil(2));
        for_each_subset(km1, t, |mask| {
            let columns: Vec<usize> = (0..km1).filter(|&j| mask >> j & 1 == 1).collect();
            let mut cells: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
            for cell in 0..(1usize << t) {
                let key: Vec<u8> = (0..t).map(|b| (cell >> (t - 1 - b) & 1) as u8).collect();
                cells.insert(key, Vec::new());
            }
            for i in 0..n {
                let key: Vec<u8> = columns.iter().map(|&c| parent.get(i, c)).collect();
                cells.get_mut(&key).expect("two-level cell").push(i);
            }
            for (cell, rows) in cells {
                constraints.push(CardinalityConstraint {
                    kind: ConstraintKind::DirectedCell {
                        columns: columns.clone(),
                        cell,
                    },
                    rows,
                    level: 0,
                    lo,
                    hi,
                });
            }
        });
    }

    let mut prev_equal = vec![None; n];
    let mut last_seen: BTreeMap<&[u8], usize> = BTreeMap::new();
    for (i, row) in parent.rows().enumerate() {
        if let Some(prev) = last_seen.insert(row, i) {
            prev_equal[i] = Some(prev);
        }
    }

    let enumerate_all = objective.is_none();
    Ok(ExtensionProblem {
        parent: parent.clone(),
        expansion,
        mode,
        objective,
        enumerate_all,
        constraints,
        prev_equal,
    })
}

struct Solver<'a> {
    problem: &'a ExtensionProblem,
    s: usize,
    row_cons: Vec<Vec<usize>>,
    count: Vec<usize>,
    remaining: Vec<usize>,
    levels: Vec<u8>,
    solutions: Vec<Vec<u8>>,
    // objective state
    cost: Vec<Vec<u8>>,
    spent: usize,
    need: Vec<usize>,
    free_zero: Vec<usize>,
    best: Option<(usize, Vec<u8>)>,
}

impl<'a> Solver<'a> {
    fn new(problem: &'a ExtensionProblem) -> Self {
        let n = problem.parent.runs();
        let s = problem.parent.levels();
        let mut row_cons = vec![Vec::new(); n];
        for (c, con) in problem.constraints.iter().enumerate() {
            for &i in &con.rows {
                row_cons[i].push(c);
            }
        }
        let remaining = problem.constraints.iter().map(|c| c.rows.len()).collect();
        let cost = problem.objective.clone().unwrap_or_default();
        let need = vec![n / s; s - 1];
        let free_zero = cost
            .iter()
            .map(|row| row.iter().filter(|&&c| c == 0).count())
            .collect();
        Solver {
            problem,
            s,
            row_cons,
            count: vec![0; problem.constraints.len()],
            remaining,
            levels: vec![0; n],
            solutions: Vec::new(),
            cost,
            spent: 0,
            need,
            free_zero,
            best: None,
        }
    }

    fn assign(&mut self, row: usize, level: u8) -> bool {
        let mut ok = true;
        for &c in &self.row_cons[row] {
            let con = &self.problem.constraints[c];
            self.remaining[c] -= 1;
            if con.level == level {
                self.count[c] += 1;
            }
            if self.count[c] > con.hi || self.count[c] + self.remaining[c] < con.lo {
                ok = false;
            }
        }
        ok
    }

    fn unassign(&mut self, row: usize, level: u8) {
        for &c in &self.row_cons[row] {
            self.remaining[c] += 1;
            if self.problem.constraints[c].level == level {
                self.count[c] -= 1;
            }
        }
    }

    fn objective_bound(&self) -> usize {
        self.spent
            + self
                .need
                .iter()
                .zip(&self.free_zero)
                .map(|(&need, &zeros)| need.saturating_sub(zeros))
                .sum::<usize>()
    }

    fn search(&mut self, row: usize) {
        let n = self.levels.len();
        if row == n {
            if self.problem.enumerate_all || self.problem.objective.is_none() {
                self.solutions.push(self.levels.clone());
            } else if self.best.as_ref().is_none_or(|(c, _)| self.spent < *c) {
                self.best = Some((self.spent, self.levels.clone()));
            }
            return;
        }
        let optimizing = !self.problem.enumerate_all && self.problem.objective.is_some();
        let min_level = match self.problem.prev_equal[row] {
            Some(p) => self.levels[p],
            None => 0,
        };
        let max_level = if row == 0 { 0 } else { self.s as u8 - 1 };
        for level in min_level..=max_level {
            if !self.assign(row, level) {
                self.unassign(row, level);
                continue;
            }
            let mut row_cost = 0;
            if optimizing {
                for r in 0..self.s - 1 {
                    if self.cost[r][row] == 0 {
                        self.free_zero[r] -= 1;
                    }
                }
                if (level as usize) < self.s - 1 {
                    row_cost = self.cost[level as usize][row] as usize;
                    self.need[level as usize] -= 1;
                }
                self.spent += row_cost;
            }
            let prune = optimizing
                && self
                    .best
                    .as_ref()
                    .is_some_and(|(c, _)| self.objective_bound() >= *c);
            if !prune {
                self.levels[row] = level;
                self.search(row + 1);
            }
            if optimizing {
                self.spent -= row_cost;
                if (level as usize) < self.s - 1 {
                    self.need[level as usize] += 1;
                }
                for r in 0..self.s - 1 {
                    if self.cost[r][row] == 0 {
                        self.free_zero[r] += 1;
                    }
                }
            }
            self.unassign(row, level);
        }
    }
}

/// New columns (as level vectors) solving the problem, in ascending
/// lexicographic order. With an objective and `enumerate_all == false`
/// the result holds at most one minimum-cost column, the smallest among ties.
pub fn solve_columns(problem: &ExtensionProblem) -> Vec<Vec<u8>> {
    if problem.parent.runs() == 0 {
        return Vec::new();
    }
    let mut solver = Solver::new(problem);
    solver.search(0);
    if !problem.enumerate_all && problem.objective.is_some() {
        solver.best.map(|(_, col)| vec![col]).unwrap_or_default()
    } else {
        solver.solutions
    }
}

/// All extensions of the parent (or one optimal one, see [`solve_columns`]),
/// each the parent plus the new factor. Infeasible problems give an empty list.
pub fn enumerate_solutions(problem: &ExtensionProblem) -> Result<Vec<Design>> {
    let mut out = Vec::new();
    for col in solve_columns(problem) {
        let bits = solution_expansion(problem, &col)?;
        let new_col = encode::collapse(&bits)?.column(0);
        debug_assert_eq!(new_col, col);
        out.push(problem.parent.with_column(&new_col)?);
    }
    Ok(out)
}

/// The solution matrix `[x_1 .. x_{s-1}]` for a level column.
fn solution_expansion(problem: &ExtensionProblem, col: &[u8]) -> Result<BinaryExpansion> {
    let p = problem.parent.params();
    let single = DesignParams::new(p.runs(), 1, p.levels(), 1)?;
    let sm1 = p.levels() - 1;
    let mut bits = vec![encode::BitColumn::zeros(p.runs()); sm1];
    for (i, &v) in col.iter().enumerate() {
        if (v as usize) < sm1 {
            bits[v as usize].set(i, true);
        }
    }
    BinaryExpansion::from_bits(single, bits)
}

/// Which reading of the recursion bound to apply between levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecursionMode {
    /// Re-lifts the floored quotient onto the residue lattice: `phi_1 + m phi_2`.
    Sharpened,
    /// Uses the floored quotient `m` itself as the next bound.
    Literal,
}

/// Upper bounds on `N^2 A_{t+2}` for `k = k_input` down to `t + 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecursionBoundChain {
    params: DesignParams,
    k_input: usize,
    mode: RecursionMode,
    /// `None` marks a level where the chain is infeasible.
    bounds: BTreeMap<usize, Option<i128>>,
}

impl RecursionBoundChain {
    pub fn k_input(&self) -> usize {
        self.k_input
    }

    pub fn mode(&self) -> RecursionMode {
        self.mode
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    /// Lowest level covered by the chain (`t + 2`).
    pub fn k_min(&self) -> usize {
        self.params.strength() + 2
    }

    pub fn bound(&self, k: usize) -> Option<Option<i128>> {
        self.bounds.get(&k).copied()
    }

    pub fn bounds(&self) -> &BTreeMap<usize, Option<i128>> {
        &self.bounds
    }
}

/// Derives the chain from `N^2 A_{t+2} <= a_bound_scaled` at `k_input`.
///
/// Going from `k` to `k - 1`: `raw = floor(bound_k (k - t - 2) / k)`,
/// `m = floor((raw - phi_1(k-1, t, t+2)) / phi_2(t, t+2))`.
pub fn recursion_chain(
    params: &DesignParams,
    k_input: usize,
    a_bound_scaled: i128,
    mode: RecursionMode,
) -> Result<RecursionBoundChain> {
    let (s, t) = (params.levels(), params.strength());
    if s != 2 {
        return Err(Error::DirectedUnsupported {
            s,
            lambda: params.lambda(),
        });
    }
    if k_input < t + 2 {
        return Err(Error::OutOfChain {
            k: k_input,
            lo: t + 2,
            hi: k_input,
        });
    }
    let params = params.with_factors(k_input)?;
    let j = t + 2;
    let mut bounds = BTreeMap::new();
    let mut current = (a_bound_scaled >= 0).then_some(a_bound_scaled);
    bounds.insert(k_input, current);
    for k in (t + 3..=k_input).rev() {
        current = current.and_then(|b| {
            let raw = (b * (k - t - 2) as i128).div_euclid(k as i128);
            let (offset, modulus) = residue_pair(k - 1, t, j, params.lambda() % 2 == 1);
            let m = (raw - offset).div_euclid(modulus);
            if m < 0 {
                return None;
            }
            Some(match mode {
                RecursionMode::Sharpened => offset + m * modulus,
                RecursionMode::Literal => m,
            })
        });
        bounds.insert(k - 1, current);
    }
    Ok(RecursionBoundChain {
        params,
        k_input,
        mode,
        bounds,
    })
}

/// `N^2 A_{t+2}(d) <= bound[k]`.
pub fn passes_bound(d: &Design, chain: &RecursionBoundChain) -> Result<bool> {
    let k = d.factors();
    let lo = chain.k_min();
    let Some(bound) = chain.bound(k) else {
        return Err(Error::OutOfChain {
            k,
            lo,
            hi: chain.k_input,
        });
    };
    let Some(bound) = bound else {
        return Ok(false);
    };
    let a = spectra::gwp(d);
    Ok(a.scaled()[chain.params.strength() + 2] <= bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::verify_strength;

    fn factorial_2x2() -> Design {
        Design::from_rows(2, 2, &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap()
    }

    fn replicated(lambda: usize) -> Design {
        let rows: Vec<Vec<u8>> = (0..4)
            .flat_map(|c| std::iter::repeat_n(vec![(c >> 1) as u8, (c & 1) as u8], lambda))
            .collect();
        Design::from_rows(2, 2, &rows).unwrap()
    }

    #[test]
    fn factorial_constraints() {
        let p = build_problem(&factorial_2x2(), ExtensionMode::Plain, None).unwrap();
        let sets: Vec<(Vec<usize>, usize)> = p
            .constraints()
            .iter()
            .map(|c| (c.rows.clone(), c.lo))
            .collect();
        assert_eq!(
            sets,
            vec![(vec![0, 1, 2, 3], 2), (vec![0, 1], 1), (vec![0, 2], 1)]
        );
        assert!(p.ordering_pairs().is_empty());
    }

    #[test]
    fn factorial_has_single_extension() {
        let p = build_problem(&factorial_2x2(), ExtensionMode::Plain, None).unwrap();
        let sols = enumerate_solutions(&p).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].column(2), vec![0, 1, 1, 0]);
    }

    #[test]
    fn twenty_run_seed_has_five_extensions() {
        let p = build_problem(&replicated(5), ExtensionMode::Plain, None).unwrap();
        let sols = enumerate_solutions(&p).unwrap();
        assert_eq!(sols.len(), 5);
        assert!(sols.iter().all(|d| verify_strength(d, 2)));
        assert!(sols.windows(2).all(|w| w[0].column(2) < w[1].column(2)));
    }

    #[test]
    fn equal_rows_give_ordering_pairs() {
        let p = build_problem(&replicated(2), ExtensionMode::Plain, None).unwrap();
        assert_eq!(p.ordering_pairs(), vec![(0, 1), (2, 3), (4, 5), (6, 7)]);
    }

    #[test]
    fn directed_cell_counts() {
        let rows: Vec<Vec<u8>> = (0..28)
            .map(|i| vec![(i % 2) as u8, (i / 2 % 2) as u8, (i / 4 % 2) as u8])
            .collect();
        // 28 rows of a 3-column pattern; only the shape of the constraint set matters
        let d = Design::from_rows(2, 2, &rows).unwrap();
        let p = build_problem(&d, ExtensionMode::Directed, None).unwrap();
        assert_eq!(p.directed_inequalities(), 2 * 3 * 4);
        let cell = p
            .constraints()
            .iter()
            .find(|c| matches!(c.kind, ConstraintKind::DirectedCell { .. }))
            .unwrap();
        assert_eq!((cell.lo, cell.hi), (3, 4));
    }

    #[test]
    fn directed_requires_odd_index() {
        assert!(matches!(
            build_problem(&replicated(2), ExtensionMode::Directed, None),
            Err(Error::DirectedUnsupported { .. })
        ));
    }

    #[test]
    fn objective_picks_cheapest_column() {
        let d = replicated(5);
        let obj = vec![(0..20).map(|i| u8::from(i >= 10)).collect::<Vec<u8>>()];
        let p = build_problem(&d, ExtensionMode::Plain, Some(obj.clone())).unwrap();
        let best = solve_columns(&p);
        assert_eq!(best.len(), 1);
        let mut all = p.clone();
        all.set_enumerate_all(true);
        let cost = |c: &Vec<u8>| {
            c.iter()
                .zip(&obj[0])
                .filter(|(&v, &w)| v == 0 && w == 1)
                .count()
        };
        let min = solve_columns(&all).iter().map(cost).min().unwrap();
        assert_eq!(cost(&best[0]), min);
        let first_min = solve_columns(&all)
            .into_iter()
            .find(|c| cost(c) == min)
            .unwrap();
        assert_eq!(best[0], first_min);
    }

    #[test]
    fn malformed_objective_rejected() {
        let obj = vec![vec![1u8; 20]];
        assert!(build_problem(&replicated(5), ExtensionMode::Plain, Some(obj)).is_err());
    }

    #[test]
    fn chain_arithmetic() {
        let p = DesignParams::new(20, 10, 2, 2).unwrap();
        let c = recursion_chain(&p, 10, 5500, RecursionMode::Sharpened).unwrap();
        let got: Vec<i128> = (4..=10)
            .rev()
            .map(|k| c.bound(k).unwrap().unwrap())
            .collect();
        assert_eq!(got, vec![5500, 3296, 1760, 816, 240, 80, 16]);
        let lit = recursion_chain(&p, 10, 5500, RecursionMode::Literal).unwrap();
        assert_eq!(lit.bound(9), Some(Some(10)));
    }

    #[test]
    fn chain_goes_infeasible_below_negative_quotient() {
        let p = DesignParams::new(20, 10, 2, 2).unwrap();
        let lit = recursion_chain(&p, 10, 5500, RecursionMode::Literal).unwrap();
        let first_none = (4..=10)
            .rev()
            .find(|&k| lit.bound(k) == Some(None))
            .unwrap();
        assert!((4..first_none).all(|k| lit.bound(k) == Some(None)));
    }
}
