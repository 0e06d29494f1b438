//! Hadamard matrices: text input, Kronecker products, and the saturated
//! two-level arrays obtained by normalizing on each column.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::design::{Design, DesignParams};
use crate::error::{Error, Result};

/// Square `+1/-1` matrix with `H H^T = N I`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HadamardMatrix {
    order: usize,
    entries: Vec<i8>,
}

/// Character alphabet of a `.had` file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alphabet {
    /// `+` is `+1`, `-` is `-1`.
    #[default]
    PlusMinus,
    /// `0` is `+1`, `1` is `-1` (the same recoding used for derived arrays).
    Binary,
}

impl HadamardMatrix {
    pub fn new(rows: Vec<Vec<i8>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(
                "Hadamard matrix must be square and nonempty".into(),
            ));
        }
        if rows.iter().flatten().any(|&v| v != 1 && v != -1) {
            return Err(Error::Shape("Hadamard entries must be +1 or -1".into()));
        }
        let h = HadamardMatrix {
            order: n,
            entries: rows.concat(),
        };
        h.check()?;
        Ok(h)
    }

    fn check(&self) -> Result<()> {
        let n = self.order;
        for a in 0..n {
            for b in a..n {
                let dot: i64 = self
                    .row(a)
                    .iter()
                    .zip(self.row(b))
                    .map(|(&x, &y)| (x * y) as i64)
                    .sum();
                if dot != if a == b { n as i64 } else { 0 } {
                    return Err(Error::NotHadamard(n));
                }
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.order + j]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }
}

impl fmt::Display for HadamardMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.order {
            let line: String = self
                .row(i)
                .iter()
                .map(|&v| if v > 0 { '+' } else { '-' })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// One row per line; whitespace inside a row is ignored, `#` lines and
/// blank lines are skipped.
pub fn parse_hadamard(text: &str, alphabet: Alphabet) -> Result<HadamardMatrix> {
    let mut rows = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match (alphabet, c) {
                (Alphabet::PlusMinus, '+') | (Alphabet::Binary, '0') => Ok(1),
                (Alphabet::PlusMinus, '-') | (Alphabet::Binary, '1') => Ok(-1),
                _ => Err(Error::parse(
                    Some(no + 1),
                    format!("unexpected character {c:?}"),
                )),
            })
            .collect::<Result<Vec<i8>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::parse(
                    Some(no + 1),
                    format!("row has {} entries, expected {first}", row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.first().is_some_and(|r| r.len() != rows.len()) {
        return Err(Error::parse(
            None,
            format!("{} rows of length {}", rows.len(), rows[0].len()),
        ));
    }
    HadamardMatrix::new(rows)
}

pub fn load_hadamard(path: &Path, alphabet: Alphabet) -> Result<HadamardMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_hadamard(&text, alphabet)
}

pub fn kronecker(a: &HadamardMatrix, b: &HadamardMatrix) -> HadamardMatrix {
    let (na, nb) = (a.order, b.order);
    let n = na * nb;
    let mut entries = vec![0i8; n * n];
    for i in 0..n {
        for j in 0..n {
            entries[i * n + j] = a.get(i / nb, j / nb) * b.get(i % nb, j % nb);
        }
    }
    HadamardMatrix { order: n, entries }
}

/// For each column `c`: multiply every column by column `c`, drop the now
/// constant column `c`, recode `+1 -> 0`, `-1 -> 1`. Gives `N` arrays
/// OA(N, N-1, 2, 2).
pub fn derive_oas(h: &HadamardMatrix) -> Result<Vec<Design>> {
    let n = h.order;
    let params = DesignParams::new(n, n.saturating_sub(1), 2, 2)?;
    (0..n)
        .map(|c| {
            let mut cells = Vec::with_capacity(n * (n - 1));
            for i in 0..n {
                let sign = h.get(i, c);
                for j in (0..n).filter(|&j| j != c) {
                    cells.push((h.get(i, j) * sign < 0) as u8);
                }
            }
            Design::new(params, cells)
        })
        .collect()
}
