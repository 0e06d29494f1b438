//! J-characteristics, generalized word-length patterns, distance
//! distributions and the Krawtchouk transforms connecting them.
//!
//! Every `A_j` and `B_i` is carried as the exact integer `N^2 A_j` resp.
//! `N B_i`; no floating point enters a comparison.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::design::{Design, DesignParams};
use crate::error::{Error, Result};

/// `values[j][x] = P_j(x, s, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KrawtchoukTable {
    s: usize,
    k: usize,
    values: Vec<Vec<i128>>,
}

impl KrawtchoukTable {
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn value(&self, j: usize, x: usize) -> i128 {
        self.values[j][x]
    }

    pub fn row(&self, j: usize) -> &[i128] {
        &self.values[j]
    }
}

/// Builds the table from the three-term recursion
/// `P_j(x) = P_j(x-1) - P_{j-1}(x-1) - (s-1) P_{j-1}(x)` with
/// `P_0(x) = 1` and `P_j(0) = (s-1)^j C(k, j)`.
pub fn krawtchouk_table(s: usize, k: usize) -> Result<KrawtchoukTable> {
    let sm1 = s as i128 - 1;
    let mut values = vec![vec![0i128; k + 1]; k + 1];
    values[0].iter_mut().for_each(|v| *v = 1);
    for j in 1..=k {
        let init = binomial(k, j)
            .checked_mul(checked_pow_i128(sm1, j).ok_or(Error::Overflow("krawtchouk"))?)
            .ok_or(Error::Overflow("krawtchouk"))?;
        values[j][0] = init;
        for x in 1..=k {
            let v = values[j][x - 1]
                .checked_sub(values[j - 1][x - 1])
                .and_then(|v| v.checked_sub(sm1.checked_mul(values[j - 1][x])?))
                .ok_or(Error::Overflow("krawtchouk"))?;
            values[j][x] = v;
        }
    }
    Ok(KrawtchoukTable { s, k, values })
}

/// Shared, memoized tables keyed by `(s, k)`.
pub fn cached_krawtchouk(s: usize, k: usize) -> Result<Arc<KrawtchoukTable>> {
    type Cache = RwLock<HashMap<(usize, usize), Arc<KrawtchoukTable>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache
        .read()
        .expect("krawtchouk cache poisoned")
        .get(&(s, k))
    {
        return Ok(Arc::clone(t));
    }
    let table = Arc::new(krawtchouk_table(s, k)?);
    cache
        .write()
        .expect("krawtchouk cache poisoned")
        .entry((s, k))
        .or_insert_with(|| Arc::clone(&table));
    Ok(table)
}

/// Direct summation `sum_i (-1)^i (s-1)^(j-i) C(x,i) C(k-x, j-i)` in
/// arbitrary precision.
pub fn krawtchouk_direct(j: usize, x: usize, s: usize, k: usize) -> BigInt {
    let sm1 = BigInt::from(s as i64 - 1);
    let mut total = BigInt::zero();
    for i in 0..=j {
        if i > x || j - i > k - x {
            continue;
        }
        let mut term =
            big_binomial(x, i) * big_binomial(k - x, j - i) * num_traits::pow(sm1.clone(), j - i);
        if i % 2 == 1 {
            term = -term;
        }
        total += term;
    }
    total
}

fn big_binomial(n: usize, r: usize) -> BigInt {
    if r > n {
        return BigInt::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigInt::one();
    for i in 0..r {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Exact `C(n, r)` (saturating at `i128::MAX`, far beyond any size used here).
pub fn binomial(n: usize, r: usize) -> i128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: i128 = 1;
    for i in 0..r {
        acc = match acc.checked_mul((n - i) as i128) {
            Some(v) => v / (i as i128 + 1),
            None => return i128::MAX,
        };
    }
    acc
}

fn checked_pow_i128(base: i128, exp: usize) -> Option<i128> {
    let mut acc: i128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Generalized word-length pattern; `scaled[j] = N^2 A_j`, `scaled[0] = N^2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gwp {
    params: DesignParams,
    scaled: Vec<i128>,
}

impl Gwp {
    pub fn new(params: DesignParams, scaled: Vec<i128>) -> Result<Self> {
        let n2 = (params.runs() * params.runs()) as i128;
        if scaled.len() != params.factors() + 1 {
            return Err(Error::Shape(format!(
                "GWP needs {} entries, got {}",
                params.factors() + 1,
                scaled.len()
            )));
        }
        if scaled[0] != n2 {
            return Err(Error::Shape(format!("A_0 must scale to N^2 = {n2}")));
        }
        if let Some(j) = scaled.iter().position(|&a| a < 0) {
            return Err(Error::NegativeGwp(j));
        }
        Ok(Gwp { params, scaled })
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    /// `N^2 A_j` for `j = 0..=k`.
    pub fn scaled(&self) -> &[i128] {
        &self.scaled
    }

    pub fn denominator(&self) -> i128 {
        (self.params.runs() * self.params.runs()) as i128
    }

    /// `A_j` rounded half away from zero to `places` decimals.
    pub fn decimal(&self, j: usize, places: u32) -> String {
        render_decimal(self.scaled[j], self.denominator(), places)
    }

    /// `A_j` as a reduced fraction.
    pub fn exact(&self, j: usize) -> String {
        render_fraction(self.scaled[j], self.denominator())
    }

    /// Index of the first nonzero entry among `A_1..A_k`.
    pub fn first_nonzero(&self) -> Option<usize> {
        self.scaled
            .iter()
            .skip(1)
            .position(|&a| a != 0)
            .map(|p| p + 1)
    }
}

/// Distance distribution; `scaled[i] = N B_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DistanceDistribution {
    params: DesignParams,
    scaled: Vec<i128>,
}

impl DistanceDistribution {
    pub fn new(params: DesignParams, scaled: Vec<i128>) -> Result<Self> {
        let n = params.runs() as i128;
        if scaled.len() != params.factors() + 1 {
            return Err(Error::Shape(format!(
                "distance distribution needs {} entries, got {}",
                params.factors() + 1,
                scaled.len()
            )));
        }
        if scaled.iter().any(|&b| b < 0) {
            return Err(Error::Shape("negative distance count".into()));
        }
        if scaled.iter().sum::<i128>() != n * n {
            return Err(Error::Shape("distance counts must sum to N^2".into()));
        }
        if scaled[0] < n {
            return Err(Error::Shape("N B_0 must be at least N".into()));
        }
        Ok(DistanceDistribution { params, scaled })
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    /// `N B_i` for `i = 0..=k`.
    pub fn scaled(&self) -> &[i128] {
        &self.scaled
    }

    pub fn decimal(&self, i: usize, places: u32) -> String {
        render_decimal(self.scaled[i], self.params.runs() as i128, places)
    }
}

/// J-characteristics of a two-level design, keyed by factor subsets encoded
/// as bit masks (bit `j` = factor `j`, zero-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JSpectrum {
    params: DesignParams,
    rmax: usize,
    entries: BTreeMap<u64, i64>,
}

impl JSpectrum {
    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    pub fn rmax(&self) -> usize {
        self.rmax
    }

    pub fn entries(&self) -> &BTreeMap<u64, i64> {
        &self.entries
    }

    pub fn get(&self, subset: u64) -> Option<i64> {
        self.entries.get(&subset).copied()
    }

    /// `J(l) / 2^t` when the division is exact.
    pub fn reduced(&self, subset: u64) -> Option<i64> {
        let j = self.get(subset)?;
        let unit = 1i64 << self.params.strength();
        (j % unit == 0).then_some(j / unit)
    }

    /// All `J` values over subsets of exactly `size` factors.
    pub fn of_size(&self, size: usize) -> impl Iterator<Item = (u64, i64)> + '_ {
        self.entries
            .iter()
            .filter(move |(l, _)| l.count_ones() as usize == size)
            .map(|(&l, &j)| (l, j))
    }
}

/// Largest `k` for which the full spectrum is computed with a dense transform.
const DENSE_SPECTRUM_MAX_K: usize = 26;

/// `J_r(l) = sum_i prod_{j in l} y_ij` with levels mapped `y = 1 - 2 * level`,
/// for every nonempty `l` with `|l| <= rmax`.
pub fn j_spectrum(d: &Design, rmax: usize) -> Result<JSpectrum> {
    let p = *d.params();
    if p.levels() != 2 {
        return Err(Error::UnsupportedLevels(p.levels()));
    }
    let k = p.factors();
    if k > 63 {
        return Err(Error::Shape(
            "J-spectrum supports at most 63 factors".into(),
        ));
    }
    let rmax = rmax.clamp(1, k);
    let row_masks: Vec<u64> = d
        .rows()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold(0u64, |m, (j, &v)| m | ((v as u64) << j))
        })
        .collect();
    let mut entries = BTreeMap::new();
    if k <= DENSE_SPECTRUM_MAX_K {
        // Walsh-Hadamard transform of the row histogram.
        let size = 1usize << k;
        let mut h = vec![0i64; size];
        for &m in &row_masks {
            h[m as usize] += 1;
        }
        let mut len = 1;
        while len < size {
            for start in (0..size).step_by(len * 2) {
                for i in start..start + len {
                    let (a, b) = (h[i], h[i + len]);
                    h[i] = a + b;
                    h[i + len] = a - b;
                }
            }
            len *= 2;
        }
        for (l, &j) in h.iter().enumerate().skip(1) {
            if (l.count_ones() as usize) <= rmax {
                entries.insert(l as u64, j);
            }
        }
    } else {
        for size in 1..=rmax {
            for_each_subset(k, size, |l| {
                let j: i64 = row_masks
                    .iter()
                    .map(|&m| if (m & l).count_ones() % 2 == 0 { 1 } else { -1 })
                    .sum();
                entries.insert(l, j);
            });
        }
    }
    Ok(JSpectrum {
        params: p,
        rmax,
        entries,
    })
}

/// Calls `f` with every `size`-subset of `{0..k}` as a bit mask.
pub(crate) fn for_each_subset(k: usize, size: usize, mut f: impl FnMut(u64)) {
    if size > k {
        return;
    }
    if size == 0 {
        f(0);
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        f(idx.iter().fold(0u64, |m, &i| m | (1 << i)));
        let mut p = size;
        while p > 0 && idx[p - 1] == k - size + p - 1 {
            p -= 1;
        }
        if p == 0 {
            return;
        }
        idx[p - 1] += 1;
        for q in p..size {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// `N^2 A_r = sum_{|l| = r} J_r(l)^2`.
pub fn gwp_from_j(js: &JSpectrum) -> Result<Gwp> {
    let p = js.params;
    let k = p.factors();
    if js.rmax < k {
        return Err(Error::IncompleteSpectrum(js.rmax + 1));
    }
    let n = p.runs() as i128;
    let mut scaled = vec![0i128; k + 1];
    scaled[0] = n * n;
    for (&l, &j) in &js.entries {
        scaled[l.count_ones() as usize] += (j as i128) * (j as i128);
    }
    Gwp::new(p, scaled)
}

/// Histogram of Hamming distances over all ordered row pairs.
pub fn distance_distribution(d: &Design) -> DistanceDistribution {
    let n = d.runs();
    let k = d.factors();
    let mut counts = vec![0i128; k + 1];
    counts[0] = n as i128;
    for i in 0..n {
        let ri = d.row(i);
        for j in i + 1..n {
            let dist = ri.iter().zip(d.row(j)).filter(|(a, b)| a != b).count();
            counts[dist] += 2;
        }
    }
    DistanceDistribution {
        params: *d.params(),
        scaled: counts,
    }
}

/// `N^2 A_j = sum_i P_j(i, s, k) N B_i`.
pub fn gwp_from_distance(b: &DistanceDistribution) -> Result<Gwp> {
    let p = b.params;
    let k = p.factors();
    let table = cached_krawtchouk(p.levels(), k)?;
    let mut scaled = vec![0i128; k + 1];
    for (j, out) in scaled.iter_mut().enumerate() {
        let mut acc: i128 = 0;
        for (i, &bi) in b.scaled.iter().enumerate() {
            acc = table
                .value(j, i)
                .checked_mul(bi)
                .and_then(|v| acc.checked_add(v))
                .ok_or(Error::Overflow("gwp_from_distance"))?;
        }
        if acc < 0 {
            return Err(Error::NegativeGwp(j));
        }
        *out = acc;
    }
    Gwp::new(p, scaled)
}

/// `N B_j = s^-k sum_i P_j(i, s, k) N^2 A_i`, with the division checked.
pub fn distance_from_gwp(a: &Gwp) -> Result<DistanceDistribution> {
    let p = a.params;
    let k = p.factors();
    let table = cached_krawtchouk(p.levels(), k)?;
    let sk = checked_pow_i128(p.levels() as i128, k).ok_or(Error::Overflow("s^k"))?;
    let mut scaled = vec![0i128; k + 1];
    for (j, out) in scaled.iter_mut().enumerate() {
        let mut acc: i128 = 0;
        for (i, &ai) in a.scaled.iter().enumerate() {
            acc = table
                .value(j, i)
                .checked_mul(ai)
                .and_then(|v| acc.checked_add(v))
                .ok_or(Error::Overflow("distance_from_gwp"))?;
        }
        if acc % sk != 0 {
            return Err(Error::NotIntegral(j));
        }
        *out = acc / sk;
    }
    DistanceDistribution::new(p, scaled).map_err(|_| Error::NotIntegral(0))
}

/// GWP of a design through its distance distribution (any `s`).
pub fn gwp(d: &Design) -> Gwp {
    gwp_from_distance(&distance_distribution(d))
        .expect("distance distribution of a design always transforms to a valid GWP")
}

fn check_same(a: &DesignParams, b: &DesignParams) -> Result<()> {
    if a != b {
        return Err(Error::ParamMismatch(format!("{a} vs {b}")));
    }
    Ok(())
}

/// Lexicographic order on `(A_1, .., A_k)`; `Less` is strictly better.
pub fn compare_gwp(a: &Gwp, b: &Gwp) -> Result<Ordering> {
    check_same(&a.params, &b.params)?;
    Ok(a.scaled[1..].cmp(&b.scaled[1..]))
}

/// Same index and value of the first nonzero entry, or both all-zero.
pub fn weak_gma_equal(a: &Gwp, b: &Gwp) -> Result<bool> {
    check_same(&a.params, &b.params)?;
    Ok(match (a.first_nonzero(), b.first_nonzero()) {
        (None, None) => true,
        (Some(i), Some(j)) => i == j && a.scaled[i] == b.scaled[j],
        _ => false,
    })
}

/// Direct count: every `t`-column projection holds each level combination
/// exactly `N / s^t` times.
pub fn verify_strength(d: &Design, t: usize) -> bool {
    let k = d.factors();
    let n = d.runs();
    let s = d.levels();
    if t == 0 {
        return true;
    }
    if t > k {
        return false;
    }
    let Some(cells) = crate::design::checked_pow(s, t) else {
        return false;
    };
    if !n.is_multiple_of(cells) {
        return false;
    }
    let lambda = n / cells;
    let mut counts = vec![0usize; cells];
    let mut ok = true;
    for_each_subset(k, t, |mask| {
        if !ok {
            return;
        }
        let cols: Vec<usize> = (0..k).filter(|&j| mask >> j & 1 == 1).collect();
        counts.iter_mut().for_each(|c| *c = 0);
        for row in d.rows() {
            let idx = cols
                .iter()
                .fold(0usize, |acc, &c| acc * s + row[c] as usize);
            counts[idx] += 1;
        }
        ok = counts.iter().all(|&c| c == lambda);
    });
    ok
}

/// Largest `t` for which [`verify_strength`] holds (0 if none).
pub fn strength_of(d: &Design) -> usize {
    (1..=d.factors())
        .take_while(|&t| verify_strength(d, t))
        .last()
        .unwrap_or(0)
}

/// `C(n, m)` is odd iff the bits of `m` are a subset of those of `n`.
fn binomial_is_odd(n: i64, m: i64) -> bool {
    if m < 0 || n < 0 || m > n {
        return false;
    }
    (m & !n) == 0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParityIssue {
    /// `J(l)` is not a multiple of `2^t`.
    NotDivisible,
    /// `J(l) / 2^t` has the wrong parity for the index and `|l|`.
    WrongParity { expected_odd: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityViolation {
    pub subset: u64,
    pub j: i64,
    pub issue: ParityIssue,
}

/// Divisibility and parity of `J(l) / 2^t` for every subset in the
/// spectrum of size at least `t + 1`. Empty for genuine `OA(N,k,2,t)`.
pub fn check_j_parity(js: &JSpectrum) -> Vec<ParityViolation> {
    let t = js.params.strength();
    let lambda_even = js.params.lambda().is_multiple_of(2);
    let unit = 1i64 << t;
    let mut out = Vec::new();
    for (&l, &j) in &js.entries {
        let size = l.count_ones() as i64;
        if size < t as i64 + 1 {
            continue;
        }
        if j % unit != 0 {
            out.push(ParityViolation {
                subset: l,
                j,
                issue: ParityIssue::NotDivisible,
            });
            continue;
        }
        let mu_odd = (j / unit) % 2 != 0;
        let expected_odd = !lambda_even && binomial_is_odd(size - 1, size - t as i64 - 1);
        if mu_odd != expected_odd {
            out.push(ParityViolation {
                subset: l,
                j,
                issue: ParityIssue::WrongParity { expected_odd },
            });
        }
    }
    out
}

/// `I(t, j)`: 1 when `C(j - 1, j - t - 1)` is odd.
pub fn residue_indicator(t: usize, j: usize) -> bool {
    binomial_is_odd(j as i64 - 1, j as i64 - t as i64 - 1)
}

/// `(phi_1(k, t, j), phi_2(t, j))` with `phi_1 = I C(k, j) 2^(2t)` and
/// `phi_2 = 2^(2t + 2 + I)`; `k` and the parity of the index come from `params`.
///
/// The odd-residue case only exists for odd index: with even index every
/// `J = mu 2^t` has even `mu`, so `I` is taken as 0.
pub fn gwp_residue(params: &DesignParams, j: usize) -> (i128, i128) {
    residue_pair(
        params.factors(),
        params.strength(),
        j,
        params.lambda() % 2 == 1,
    )
}

pub(crate) fn residue_pair(k: usize, t: usize, j: usize, odd_index: bool) -> (i128, i128) {
    let ind = (odd_index && residue_indicator(t, j)) as u32;
    let offset = ind as i128 * binomial(k, j) * (1i128 << (2 * t));
    let modulus = 1i128 << (2 * t as u32 + 2 + ind);
    (offset, modulus)
}

/// Indices `j` in `t+1..=k` where `(N^2 A_j - phi_1) / phi_2` is not a
/// nonnegative integer. Only meaningful for `s = 2`.
pub fn check_gwp_residues(a: &Gwp) -> Vec<usize> {
    let p = a.params;
    let (k, t) = (p.factors(), p.strength());
    (t + 1..=k)
        .filter(|&j| {
            let (offset, modulus) = residue_pair(k, t, j, p.lambda() % 2 == 1);
            let r = a.scaled[j] - offset;
            r < 0 || r % modulus != 0
        })
        .collect()
}

/// `num / den` rounded half away from zero to `places` decimals.
pub fn render_decimal(num: i128, den: i128, places: u32) -> String {
    assert!(den > 0, "denominator must be positive");
    let scale = 10i128.pow(places);
    let neg = num < 0;
    let mag = num.unsigned_abs() * scale as u128;
    let den_u = den as u128;
    let mut q = mag / den_u;
    if (mag % den_u) * 2 >= den_u {
        q += 1;
    }
    let int_part = q / scale as u128;
    let frac = q % scale as u128;
    let sign = if neg && q != 0 { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac:0width$}", width = places as usize)
    }
}

/// `num / den` in lowest terms (`"n"` when integral).
pub fn render_fraction(num: i128, den: i128) -> String {
    let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i128;
    let (n, d) = (num / g, den / g);
    if d == 1 {
        n.to_string()
    } else {
        format!("{n}/{d}")
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
