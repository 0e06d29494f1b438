//! Shared domain types: parameter tuples and level matrices.

use std::fmt;

use crate::error::{Error, Result};

/// The tuple `(N, k, s, t)` of an orthogonal array together with its index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DesignParams {
    runs: usize,
    factors: usize,
    levels: usize,
    strength: usize,
    lambda: usize,
}

impl DesignParams {
    /// Validates `(N, k, s, t)`: `s >= 2`, `1 <= t <= k` and `s^t | N`.
    pub fn new(runs: usize, factors: usize, levels: usize, strength: usize) -> Result<Self> {
        let fail = |reason| Error::InvalidParams {
            n: runs,
            k: factors,
            s: levels,
            t: strength,
            reason,
        };
        if runs == 0 || factors == 0 {
            return Err(fail("N and k must be positive"));
        }
        if levels < 2 {
            return Err(fail("s must be at least 2"));
        }
        if strength < 1 {
            return Err(fail("t must be at least 1"));
        }
        if strength > factors {
            return Err(fail("t must not exceed k"));
        }
        let cells = checked_pow(levels, strength).ok_or_else(|| fail("s^t overflows"))?;
        if !runs.is_multiple_of(cells) {
            return Err(fail("s^t must divide N"));
        }
        Ok(DesignParams {
            runs,
            factors,
            levels,
            strength,
            lambda: runs / cells,
        })
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn strength(&self) -> usize {
        self.strength
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    /// Same `(N, s, t)` with a different number of factors.
    pub fn with_factors(&self, factors: usize) -> Result<Self> {
        DesignParams::new(self.runs, factors, self.levels, self.strength)
    }

    /// `(N, s, t)` agree; `k` may differ.
    pub fn same_family(&self, other: &DesignParams) -> bool {
        self.runs == other.runs && self.levels == other.levels && self.strength == other.strength
    }
}

impl fmt::Display for DesignParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "OA({},{},{},{})",
            self.runs, self.factors, self.levels, self.strength
        )
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// An `N x k` level matrix over `{0, .., s-1}`, stored row-major.
///
/// Strength is not part of the type: use [`crate::spectra::verify_strength`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Design {
    params: DesignParams,
    cells: Vec<u8>,
}

impl Design {
    pub fn new(params: DesignParams, cells: Vec<u8>) -> Result<Self> {
        if params.levels() > 256 {
            return Err(Error::Shape("at most 256 levels are supported".into()));
        }
        if cells.len() != params.runs() * params.factors() {
            return Err(Error::Shape(format!(
                "{} cells for a {}x{} design",
                cells.len(),
                params.runs(),
                params.factors()
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v as usize >= params.levels()) {
            return Err(Error::LevelOutOfRange {
                level: bad as usize,
                s: params.levels(),
            });
        }
        Ok(Design { params, cells })
    }

    /// Builds a design from rows; `N` and `k` come from the row count and width.
    pub fn from_rows(levels: usize, strength: usize, rows: &[Vec<u8>]) -> Result<Self> {
        let (n, s, t) = (rows.len(), levels, strength);
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let params = DesignParams::new(n, k, s, t)?;
        Design::new(params, rows.concat())
    }

    /// Builds a design from columns of equal length.
    pub fn from_columns(params: DesignParams, columns: &[Vec<u8>]) -> Result<Self> {
        if columns.len() != params.factors() || columns.iter().any(|c| c.len() != params.runs()) {
            return Err(Error::Shape("column count or length mismatch".into()));
        }
        let n = params.runs();
        let k = params.factors();
        let mut cells = vec![0u8; n * k];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                cells[i * k + j] = v;
            }
        }
        Design::new(params, cells)
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    pub fn runs(&self) -> usize {
        self.params.runs()
    }

    pub fn factors(&self) -> usize {
        self.params.factors()
    }

    pub fn levels(&self) -> usize {
        self.params.levels()
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.params.factors() + col]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let k = self.params.factors();
        &self.cells[i * k..(i + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.cells.chunks(self.params.factors())
    }

    pub fn column(&self, j: usize) -> Vec<u8> {
        (0..self.runs()).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<u8>> {
        (0..self.factors()).map(|j| self.column(j)).collect()
    }

    /// Appends one factor, keeping `(N, s, t)`.
    pub fn with_column(&self, col: &[u8]) -> Result<Design> {
        if col.len() != self.runs() {
            return Err(Error::Shape("new column length differs from N".into()));
        }
        let k = self.factors();
        let params = self.params.with_factors(k + 1)?;
        let mut cells = Vec::with_capacity(self.cells.len() + col.len());
        for (row, &v) in self.rows().zip(col) {
            cells.extend_from_slice(row);
            cells.push(v);
        }
        Design::new(params, cells)
    }

    /// Keeps the listed columns in the given order.
    pub fn project(&self, cols: &[usize]) -> Result<Design> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.factors()) {
            return Err(Error::Shape(format!("column {c} out of range")));
        }
        let params = self.params.with_factors(cols.len())?;
        let mut cells = Vec::with_capacity(self.runs() * cols.len());
        for row in self.rows() {
            cells.extend(cols.iter().map(|&c| row[c]));
        }
        Design::new(params, cells)
    }

    /// Delete-one-factor projection `Y(-i)`.
    pub fn delete_column(&self, col: usize) -> Result<Design> {
        let keep: Vec<usize> = (0..self.factors()).filter(|&c| c != col).collect();
        self.project(&keep)
    }

    /// Rows in lexicographic order; row permutations are isomorphisms.
    pub fn sorted_rows(&self) -> Design {
        let mut rows: Vec<&[u8]> = self.rows().collect();
        rows.sort_unstable();
        Design {
            params: self.params,
            cells: rows.concat(),
        }
    }

    /// Same matrix under different `(N, k, s, t)` bookkeeping (e.g. another strength).
    pub fn with_params(&self, params: DesignParams) -> Result<Design> {
        Design::new(params, self.cells.clone())
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}
