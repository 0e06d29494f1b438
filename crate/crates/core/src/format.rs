//! Plain-text design files.
//!
//! A design is a header line `N k s t` followed by `N` lines of `k`
//! space-separated levels. A design set starts with `# designs: n` and
//! separates designs by a blank line. Other `#` lines are comments.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::design::{Design, DesignParams};
use crate::error::{Error, Result};

pub fn render_design(d: &Design) -> String {
    let p = d.params();
    let mut out = format!(
        "{} {} {} {}\n",
        p.runs(),
        p.factors(),
        p.levels(),
        p.strength()
    );
    out.push_str(&d.to_string());
    out
}

pub fn render_design_set(ds: &[Design]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# designs: {}", ds.len());
    for (i, d) in ds.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&render_design(d));
    }
    out
}

fn numbers(line: &str, lineno: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|w| {
            w.parse::<usize>().map_err(|_| {
                Error::parse(Some(lineno), format!("not a nonnegative integer: {w:?}"))
            })
        })
        .collect()
}

/// Parses every design in `text`; a single design needs no count header.
pub fn parse_design_set(text: &str) -> Result<Vec<Design>> {
    let mut expected = None;
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    loop {
        let mut header = None;
        for (no, line) in lines.by_ref() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(n) = rest.trim().strip_prefix("designs:") {
                    let n = n
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(Some(no), "bad design count"))?;
                    expected = Some(n);
                }
                continue;
            }
            if !line.is_empty() {
                header = Some((no, line));
                break;
            }
        }
        let Some((no, line)) = header else { break };
        let h = numbers(line, no)?;
        let [n, k, s, t] = h[..] else {
            return Err(Error::parse(Some(no), "header must be `N k s t`"));
        };
        let params = DesignParams::new(n, k, s, t)?;
        let mut cells = Vec::with_capacity(n * k);
        for r in 0..n {
            let Some((no, line)) = lines.next() else {
                return Err(Error::parse(
                    None,
                    format!("design ends after {r} of {n} rows"),
                ));
            };
            let row = numbers(line, no)?;
            if row.len() != k {
                return Err(Error::parse(
                    Some(no),
                    format!("expected {k} entries, found {}", row.len()),
                ));
            }
            for v in row {
                if v >= s {
                    return Err(Error::parse(
                        Some(no),
                        format!("level {v} out of range for s = {s}"),
                    ));
                }
                cells.push(v as u8);
            }
        }
        out.push(Design::new(params, cells)?);
    }
    if let Some(n) = expected {
        if n != out.len() {
            return Err(Error::parse(
                None,
                format!("header announces {n} designs, found {}", out.len()),
            ));
        }
    }
    Ok(out)
}

pub fn parse_design(text: &str) -> Result<Design> {
    let mut ds = parse_design_set(text)?;
    match ds.len() {
        1 => Ok(ds.pop().unwrap()),
        n => Err(Error::parse(
            None,
            format!("expected one design, found {n}"),
        )),
    }
}

pub fn read_design_set(path: &Path) -> Result<Vec<Design>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_design_set(&text)
}

pub fn read_design(path: &Path) -> Result<Design> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_design(&text)
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let mut f = fs::File::create(tmp).map_err(|e| Error::io(tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(tmp, e))?;
    f.sync_all().map_err(|e| Error::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_design_round_trip() {
        let d = Design::from_rows(2, 2, &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap();
        let text = render_design(&d);
        assert_eq!(text, "4 2 2 2\n0 0\n0 1\n1 0\n1 1\n");
        assert_eq!(parse_design(&text).unwrap(), d);
    }

    #[test]
    fn set_round_trip_and_count_check() {
        let a = Design::from_rows(2, 1, &[vec![0], vec![1]]).unwrap();
        let b = Design::from_rows(3, 1, &[vec![2], vec![0], vec![1]]).unwrap();
        let text = render_design_set(&[a.clone(), b.clone()]);
        assert_eq!(parse_design_set(&text).unwrap(), vec![a, b]);
        assert!(parse_design_set(&text.replace("designs: 2", "designs: 3")).is_err());
        assert!(parse_design_set(&render_design_set(&[]))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            parse_design("2 1 2 1\n0\n0 1\n"),
            Err(Error::Parse { line: Some(3), .. })
        ));
        assert!(parse_design("2 1 2 1\n0\n2\n").is_err());
        assert!(parse_design("2 1 2 1\n0\n").is_err());
        assert!(parse_design("2 1 2\n0\n1\n").is_err());
    }
}
