//! Known GMA distance distributions shipped as golden data, with integrity
//! checks and a comparison against candidate designs.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use crate::design::{Design, DesignParams};
use crate::error::{Error, Result};
use crate::spectra::{self, cached_krawtchouk, gwp_residue, DistanceDistribution, Gwp};

const BUILTIN: &str = include_str!("../data/gma_catalog.txt");

/// One catalog row: parameters and the exact scaled distribution `N B_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    params: DesignParams,
    label: String,
    distance: Vec<i128>,
    gwp: Vec<i128>,
}

impl CatalogEntry {
    /// Builds an entry from `N B_i` without checking the invariants; see [`validate_entry`].
    pub fn from_scaled(
        params: DesignParams,
        distance: Vec<i128>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if distance.len() != params.factors() + 1 {
            return Err(Error::Shape(format!(
                "{params} needs {} distance entries, got {}",
                params.factors() + 1,
                distance.len()
            )));
        }
        let gwp = krawtchouk_apply(&params, &distance)?;
        Ok(CatalogEntry {
            params,
            label: label.into(),
            distance,
            gwp,
        })
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    /// Where the entry came from, e.g. `builtin:42`.
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn distance_scaled(&self) -> &[i128] {
        &self.distance
    }

    /// `N^2 A_j` from the raw transform, valid or not.
    pub fn gwp_scaled(&self) -> &[i128] {
        &self.gwp
    }

    pub fn distance(&self) -> Result<DistanceDistribution> {
        DistanceDistribution::new(self.params, self.distance.clone())
    }

    pub fn gwp(&self) -> Result<Gwp> {
        Gwp::new(self.params, self.gwp.clone())
    }
}

/// `out_j = sum_i P_j(i) v_i`.
fn krawtchouk_apply(params: &DesignParams, v: &[i128]) -> Result<Vec<i128>> {
    let table = cached_krawtchouk(params.levels(), params.factors())?;
    (0..v.len())
        .map(|j| {
            v.iter().enumerate().try_fold(0i128, |acc, (i, &x)| {
                table
                    .value(j, i)
                    .checked_mul(x)
                    .and_then(|y| acc.checked_add(y))
                    .ok_or(Error::Overflow("catalog transform"))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Issue {
    SumNotSquare { sum: i128 },
    DistanceOutOfRange(usize),
    NegativeGwp(usize),
    LowWordNonzero(usize),
    RoundTrip(usize),
    Divisibility(usize),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::SumNotSquare { sum } => write!(f, "N B_i sum to {sum}, not N^2"),
            Issue::DistanceOutOfRange(i) => write!(f, "N B_{i} out of range"),
            Issue::NegativeGwp(j) => write!(f, "A_{j} is negative"),
            Issue::LowWordNonzero(j) => write!(f, "A_{j} is nonzero below the strength"),
            Issue::RoundTrip(j) => write!(f, "B -> A -> B differs at index {j}"),
            Issue::Divisibility(j) => write!(f, "N^2 A_{j} fails the residue condition"),
        }
    }
}

/// Empty when the entry is a consistent distance distribution of a strength-`t` array.
pub fn validate_entry(e: &CatalogEntry) -> Vec<Issue> {
    let p = e.params;
    let n = p.runs() as i128;
    let mut out = Vec::new();
    let sum: i128 = e.distance.iter().sum();
    if sum != n * n {
        out.push(Issue::SumNotSquare { sum });
    }
    for (i, &b) in e.distance.iter().enumerate() {
        if b < 0 || (i == 0 && b < n) {
            out.push(Issue::DistanceOutOfRange(i));
        }
    }
    for (j, &a) in e.gwp.iter().enumerate() {
        if a < 0 {
            out.push(Issue::NegativeGwp(j));
        }
        if (1..=p.strength()).contains(&j) && a != 0 {
            out.push(Issue::LowWordNonzero(j));
        }
    }
    let sk = (p.levels() as i128).checked_pow(p.factors() as u32);
    match (krawtchouk_apply(&p, &e.gwp), sk) {
        (Ok(back), Some(sk)) => {
            for (j, (&b, &orig)) in back.iter().zip(&e.distance).enumerate() {
                if b != orig * sk {
                    out.push(Issue::RoundTrip(j));
                }
            }
        }
        _ => out.push(Issue::RoundTrip(0)),
    }
    if p.levels() == 2 {
        for j in p.strength() + 1..=p.factors() {
            let (offset, modulus) = gwp_residue(&p, j);
            let r = e.gwp[j] - offset;
            if r < 0 || r % modulus != 0 {
                out.push(Issue::Divisibility(j));
            }
        }
    }
    out
}

/// `round(N d)` for a printed decimal `d`, if within `0.02 N` of an integer.
fn scale_decimal(word: &str, n: i128) -> Option<i128> {
    let (int, frac) = word.split_once('.').unwrap_or((word, ""));
    if int.is_empty()
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    if int.len() + frac.len() > 30 {
        return None;
    }
    let den = 10i128.pow(frac.len() as u32);
    let digits: i128 = format!("{int}{frac}").parse().ok()?;
    let num = digits * n;
    let r = (2 * num + den).div_euclid(2 * den);
    // |N d - r| < 0.02 N  <=>  50 |num - r den| < N den
    (50 * (num - r * den).abs() < n * den).then_some(r)
}

fn parse_params(head: &str) -> Option<DesignParams> {
    let inner = head.trim().strip_prefix("OA(")?.strip_suffix(')')?;
    let v: Vec<usize> = inner
        .split(',')
        .map(|w| w.trim().parse().ok())
        .collect::<Option<_>>()?;
    let [n, k, s, t] = v[..] else { return None };
    DesignParams::new(n, k, s, t).ok()
}

/// Parses every data row independently; each result carries the row's label.
pub fn check_rows(text: &str, source: &str) -> Vec<Result<CatalogEntry>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim().starts_with('#'))
        .map(|(no, line)| parse_row(line.trim(), format!("{source}:{}", no + 1)))
        .collect()
}

fn parse_row(line: &str, label: String) -> Result<CatalogEntry> {
    let bad = |msg: String| Error::CatalogRowInvalid {
        row: label.clone(),
        msg,
    };
    let (head, body) = line
        .split_once(':')
        .ok_or_else(|| bad("missing ':'".into()))?;
    let params = parse_params(head).ok_or_else(|| bad(format!("bad parameters {head:?}")))?;
    let n = params.runs() as i128;
    let distance: Vec<i128> = body
        .split(',')
        .map(|w| {
            scale_decimal(w.trim(), n)
                .ok_or_else(|| bad(format!("{:?} is not N-integral", w.trim())))
        })
        .collect::<Result<_>>()?;
    let entry = CatalogEntry::from_scaled(params, distance, label.clone())
        .map_err(|e| bad(e.to_string()))?;
    if let Some(first) = validate_entry(&entry).first() {
        return Err(bad(first.to_string()));
    }
    Ok(entry)
}

/// Parses catalog text; the first row failing [`validate_entry`] is an error.
pub fn parse_catalog(text: &str, source: &str) -> Result<Vec<CatalogEntry>> {
    check_rows(text, source).into_iter().collect()
}

/// Raw text of the shipped catalog.
pub fn builtin_text() -> &'static str {
    BUILTIN
}

pub fn load_catalog(path: &Path) -> Result<Vec<CatalogEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_catalog(&text, &path.display().to_string())
}

/// The shipped catalog, parsed once.
pub fn builtin() -> &'static [CatalogEntry] {
    static CATALOG: OnceLock<Vec<CatalogEntry>> = OnceLock::new();
    CATALOG.get_or_init(|| parse_catalog(BUILTIN, "builtin").expect("shipped catalog is valid"))
}

pub fn lookup<'a>(catalog: &'a [CatalogEntry], params: &DesignParams) -> Option<&'a CatalogEntry> {
    catalog.iter().find(|e| &e.params == params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    MatchesGma,
    WeakGma,
    Worse,
    /// Lexicographically below the catalog value, i.e. the catalog row is not minimal.
    Better,
    NoEntry,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub status: Status,
    pub design: Gwp,
    pub catalog: Option<Gwp>,
    /// First `j` with differing `N^2 A_j`.
    pub first_difference: Option<usize>,
}

pub fn compare_against_catalog(d: &Design, catalog: &[CatalogEntry]) -> Result<Comparison> {
    let a = spectra::gwp(d);
    let Some(entry) = lookup(catalog, d.params()) else {
        return Ok(Comparison {
            status: Status::NoEntry,
            design: a,
            catalog: None,
            first_difference: None,
        });
    };
    let g = entry.gwp()?;
    let first_difference = a.scaled().iter().zip(g.scaled()).position(|(x, y)| x != y);
    let status = match spectra::compare_gwp(&a, &g)? {
        Ordering::Equal => Status::MatchesGma,
        _ if spectra::weak_gma_equal(&a, &g)? => Status::WeakGma,
        Ordering::Less => Status::Better,
        Ordering::Greater => Status::Worse,
    };
    Ok(Comparison {
        status,
        design: a,
        catalog: Some(g),
        first_difference,
    })
}
