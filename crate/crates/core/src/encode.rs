//! Binary expansion of an `s`-level design into `(s-1) k` indicator columns
//! and the inverse map back to levels.

use crate::design::{Design, DesignParams};
use crate::error::{Error, Result};

/// Column-packed 0/1 vector of length `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitColumn {
    len: usize,
    words: Vec<u64>,
}

impl BitColumn {
    pub fn zeros(len: usize) -> Self {
        BitColumn {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut c = BitColumn::zeros(len);
        for i in 0..len {
            c.set(i, true);
        }
        c
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut c = BitColumn::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            c.set(i, b);
        }
        c
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let (w, b) = (i / 64, i % 64);
        if v {
            self.words[w] |= 1 << b;
        } else {
            self.words[w] &= !(1 << b);
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn and(&self, other: &BitColumn) -> BitColumn {
        BitColumn {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    /// Indices of the set bits, ascending.
    pub fn ones_indices(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i)).collect()
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }
}

/// `Y'`: bit column `(s-1) j + r` (zero-based) flags "factor `j` has level `r`"
/// for `r` in `0..s-1`. Level `s-1` is the all-zero block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryExpansion {
    params: DesignParams,
    bits: Vec<BitColumn>,
}

impl BinaryExpansion {
    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    pub fn bit_columns(&self) -> &[BitColumn] {
        &self.bits
    }

    pub fn bit(&self, row: usize, col: usize) -> bool {
        self.bits[col].get(row)
    }

    /// Factor block a bit column belongs to.
    pub fn block_of(&self, col: usize) -> usize {
        col / (self.params.levels() - 1)
    }

    /// Builds an expansion from raw bit columns, checking only the shape.
    pub fn from_bits(params: DesignParams, bits: Vec<BitColumn>) -> Result<Self> {
        let width = (params.levels() - 1) * params.factors();
        if bits.len() != width || bits.iter().any(|c| c.len() != params.runs()) {
            return Err(Error::Shape(format!(
                "expansion needs {width} bit columns of length {}",
                params.runs()
            )));
        }
        Ok(BinaryExpansion { params, bits })
    }
}

pub fn expand(d: &Design) -> BinaryExpansion {
    let p = *d.params();
    let sm1 = p.levels() - 1;
    let n = p.runs();
    let mut bits = vec![BitColumn::zeros(n); sm1 * p.factors()];
    for i in 0..n {
        for j in 0..p.factors() {
            let v = d.get(i, j) as usize;
            if v < sm1 {
                bits[sm1 * j + v].set(i, true);
            }
        }
    }
    BinaryExpansion { params: p, bits }
}

/// Inverse of [`expand`]: level `r` where bit `r` of the block is set, else `s-1`.
pub fn collapse(y: &BinaryExpansion) -> Result<Design> {
    let p = y.params;
    let sm1 = p.levels() - 1;
    let (n, k) = (p.runs(), p.factors());
    let mut cells = vec![0u8; n * k];
    for i in 0..n {
        for j in 0..k {
            let mut level = sm1;
            let mut seen = false;
            for r in 0..sm1 {
                if y.bits[sm1 * j + r].get(i) {
                    if seen {
                        return Err(Error::MalformedExpansion { row: i, factor: j });
                    }
                    seen = true;
                    level = r;
                }
            }
            cells[i * k + j] = level as u8;
        }
    }
    Design::new(p, cells)
}

/// Entry-wise AND of bit columns drawn from pairwise-distinct factor blocks.
pub fn product_column(y: &BinaryExpansion, cols: &[usize]) -> Result<BitColumn> {
    let width = y.bits.len();
    if let Some(&c) = cols.iter().find(|&&c| c >= width) {
        return Err(Error::Shape(format!("bit column {c} out of range")));
    }
    for (a, &ca) in cols.iter().enumerate() {
        for &cb in &cols[a + 1..] {
            if y.block_of(ca) == y.block_of(cb) {
                return Err(Error::SameFactorBlock(ca, cb));
            }
        }
    }
    let mut acc = BitColumn::ones(y.params.runs());
    for &c in cols {
        acc = acc.and(&y.bits[c]);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_expansion_is_level_zero_indicator() {
        let d = Design::from_rows(2, 2, &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap();
        let y = expand(&d);
        assert_eq!(y.bit_columns().len(), 2);
        for i in 0..4 {
            for j in 0..2 {
                assert_eq!(y.bit(i, j), d.get(i, j) == 0);
            }
        }
        assert_eq!(collapse(&y).unwrap(), d);
    }

    #[test]
    fn three_level_block() {
        let d = Design::from_rows(3, 1, &[vec![0], vec![1], vec![2]]).unwrap();
        let y = expand(&d);
        let rows: Vec<(bool, bool)> = (0..3).map(|i| (y.bit(i, 0), y.bit(i, 1))).collect();
        assert_eq!(rows, vec![(true, false), (false, true), (false, false)]);
        assert_eq!(collapse(&y).unwrap(), d);
    }

    #[test]
    fn collapse_rejects_double_flags() {
        let p = DesignParams::new(3, 1, 3, 1).unwrap();
        let y = BinaryExpansion::from_bits(
            p,
            vec![
                BitColumn::from_bits(&[true, false, false]),
                BitColumn::from_bits(&[true, true, false]),
            ],
        )
        .unwrap();
        assert!(matches!(
            collapse(&y),
            Err(Error::MalformedExpansion { row: 0, factor: 0 })
        ));
    }

    #[test]
    fn product_of_orthogonal_indicators() {
        let rows: Vec<Vec<u8>> = (0..8)
            .map(|i| vec![(i >> 2 & 1) as u8, (i >> 1 & 1) as u8, (i & 1) as u8])
            .collect();
        let d = Design::from_rows(2, 2, &rows).unwrap();
        let y = expand(&d);
        assert_eq!(product_column(&y, &[0]).unwrap(), y.bit_columns()[0]);
        assert_eq!(product_column(&y, &[0, 2]).unwrap().count_ones(), 2);
        let d3 = Design::from_rows(3, 1, &[vec![0], vec![1], vec![2]]).unwrap();
        assert!(matches!(
            product_column(&expand(&d3), &[0, 1]),
            Err(Error::SameFactorBlock(0, 1))
        ));
    }
}
