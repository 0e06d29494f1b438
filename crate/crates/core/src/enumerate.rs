//! Level-by-level enumeration campaigns with on-disk checkpoints.
//!
//! Checkpoint directory layout:
//!
//! ```text
//! state.txt            key = value manifest (deterministic)
//! level_03.designs     class representatives at k = 3, sorted by canonical key
//! timings.txt          wall-clock per level (not part of the manifest)
//! ```
//!
//! The manifest records the sha256 of every level file; a resume refuses to
//! continue when a hash does not match.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::design::{Design, DesignParams};
use crate::error::{Error, Result};
use crate::extend::{
    build_problem, enumerate_solutions, passes_bound, ExtensionMode, RecursionBoundChain,
};
use crate::format::{parse_design_set, render_design_set, write_atomic};
use crate::iso::reduce_to_classes;
use crate::spectra::{gwp, Gwp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnumerationMode {
    Full,
    Directed,
    /// Directed constraints plus the `A_{t+2}` bound chain, up to `k_input`.
    DirectedWithRecursion(RecursionBoundChain),
}

impl EnumerationMode {
    fn extension_mode(&self) -> ExtensionMode {
        match self {
            EnumerationMode::Full => ExtensionMode::Plain,
            _ => ExtensionMode::Directed,
        }
    }

    fn chain(&self) -> Option<&RecursionBoundChain> {
        match self {
            EnumerationMode::DirectedWithRecursion(c) => Some(c),
            _ => None,
        }
    }

    /// Stable one-line description stored in the manifest.
    pub fn describe(&self) -> String {
        match self {
            EnumerationMode::Full => "full".into(),
            EnumerationMode::Directed => "directed".into(),
            EnumerationMode::DirectedWithRecursion(c) => {
                let top = c
                    .bound(c.k_input())
                    .flatten()
                    .map_or("none".into(), |b| b.to_string());
                format!(
                    "directed-recursion {:?} k_input={} bound={}",
                    c.mode(),
                    c.k_input(),
                    top
                )
                .to_lowercase()
            }
        }
    }
}

/// The `s^t` full factorial repeated `lambda` times, rows sorted.
pub fn seed_design(params: &DesignParams) -> Result<Design> {
    let (s, t) = (params.levels(), params.strength());
    if params.factors() != t {
        return Err(Error::ParamMismatch(format!(
            "seed needs k = t, got {params}"
        )));
    }
    let cells_per_copy = params.runs() / params.lambda();
    let mut rows = Vec::with_capacity(params.runs());
    for code in 0..cells_per_copy {
        let mut row = vec![0u8; t];
        let mut c = code;
        for j in (0..t).rev() {
            row[j] = (c % s) as u8;
            c /= s;
        }
        for _ in 0..params.lambda() {
            rows.push(row.clone());
        }
    }
    Design::new(*params, rows.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelStats {
    pub k: usize,
    /// `|M|`: extensions found before isomorphism reduction (after any bound filter).
    pub candidates: usize,
    pub classes: usize,
    pub elapsed: Duration,
}

/// Extends every representative by one column and reduces to classes.
pub fn extend_level(reps: &[Design], mode: &EnumerationMode) -> Result<(Vec<Design>, LevelStats)> {
    let started = Instant::now();
    let Some(first) = reps.first() else {
        return Ok((
            Vec::new(),
            LevelStats {
                k: 0,
                candidates: 0,
                classes: 0,
                elapsed: started.elapsed(),
            },
        ));
    };
    let k = first.factors() + 1;
    let ext = mode.extension_mode();
    let found: Vec<Vec<Design>> = reps
        .par_iter()
        .map(|p| enumerate_solutions(&build_problem(p, ext, None)?))
        .collect::<Result<_>>()?;
    let mut pool: Vec<Design> = found.into_iter().flatten().collect();
    if let Some(chain) = mode.chain() {
        let t = first.params().strength();
        if k >= t + 2 {
            let keep: Vec<bool> = pool
                .par_iter()
                .map(|d| passes_bound(d, chain))
                .collect::<Result<_>>()?;
            let mut it = keep.into_iter();
            pool.retain(|_| it.next().unwrap());
        }
    }
    let classes = reduce_to_classes(&pool)?;
    let stats = LevelStats {
        k,
        candidates: pool.len(),
        classes: classes.len(),
        elapsed: started.elapsed(),
    };
    Ok((classes, stats))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelRecord {
    pub classes: usize,
    pub candidates: usize,
    pub file: String,
    pub sha256: String,
}

/// Progress of a campaign; mirrors `state.txt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationState {
    pub params: DesignParams,
    pub mode: String,
    pub per_level: BTreeMap<usize, LevelRecord>,
    /// Lexicographically smallest GWP at each level with its representative.
    pub gma_per_k: BTreeMap<usize, (Gwp, Design)>,
    /// Set once a level came out empty.
    pub extinct: bool,
    /// Wall-clock per level for this process; not persisted in the manifest.
    pub timings: BTreeMap<usize, Duration>,
}

impl EnumerationState {
    pub fn last_k(&self) -> usize {
        *self
            .per_level
            .keys()
            .next_back()
            .expect("seed level always present")
    }

    pub fn class_counts(&self) -> Vec<(usize, usize)> {
        self.per_level
            .iter()
            .map(|(&k, r)| (k, r.classes))
            .collect()
    }

    pub fn candidate_counts(&self) -> Vec<(usize, usize)> {
        self.per_level
            .iter()
            .map(|(&k, r)| (k, r.candidates))
            .collect()
    }

    fn manifest(&self) -> String {
        let p = self.params;
        let mut out = String::new();
        let _ = writeln!(out, "params = {} {} {}", p.runs(), p.levels(), p.strength());
        let _ = writeln!(out, "mode = {}", self.mode);
        for (k, r) in &self.per_level {
            let _ = writeln!(out, "level.{k}.classes = {}", r.classes);
            let _ = writeln!(out, "level.{k}.candidates = {}", r.candidates);
            let _ = writeln!(out, "level.{k}.file = {}", r.file);
            let _ = writeln!(out, "level.{k}.sha256 = {}", r.sha256);
            if let Some((a, _)) = self.gma_per_k.get(k) {
                let _ = writeln!(out, "level.{k}.gma = {}", join(a.scaled()));
            }
        }
        let _ = writeln!(out, "extinct = {}", self.extinct);
        out
    }
}

fn join(v: &[i128]) -> String {
    v.iter().map(i128::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub params: DesignParams,
    pub mode: EnumerationMode,
    pub k_max: Option<usize>,
    pub budget: Option<Duration>,
}

impl Campaign {
    pub fn new(params: DesignParams, mode: EnumerationMode) -> Self {
        Campaign {
            params,
            mode,
            k_max: None,
            budget: None,
        }
    }

    fn k_limit(&self) -> Option<usize> {
        let chain = self.mode.chain().map(RecursionBoundChain::k_input);
        match (self.k_max, chain) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

const STATE_FILE: &str = "state.txt";
const TIMINGS_FILE: &str = "timings.txt";

fn level_file(k: usize) -> String {
    format!("level_{k:02}.designs")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn smallest_gwp(reps: &[Design]) -> Option<(Gwp, Design)> {
    let scored: Vec<Gwp> = reps.par_iter().map(gwp).collect();
    let mut best: Option<usize> = None;
    for i in 0..scored.len() {
        // reps are sorted by canonical key, so the first minimum is a stable choice
        if best.is_none_or(|b| scored[i].scaled() < scored[b].scaled()) {
            best = Some(i);
        }
    }
    best.map(|i| (scored[i].clone(), reps[i].clone()))
}

struct Checkpoint {
    dir: PathBuf,
}

impl Checkpoint {
    fn write_level(&self, k: usize, reps: &[Design]) -> Result<(String, String)> {
        let name = level_file(k);
        let text = render_design_set(reps);
        write_atomic(&self.dir.join(&name), text.as_bytes())?;
        Ok((name, sha256_hex(text.as_bytes())))
    }

    fn write_state(&self, state: &EnumerationState) -> Result<()> {
        write_atomic(&self.dir.join(STATE_FILE), state.manifest().as_bytes())?;
        let mut t = String::new();
        for (k, d) in &state.timings {
            let _ = writeln!(t, "level.{k}.seconds = {:.3}", d.as_secs_f64());
        }
        write_atomic(&self.dir.join(TIMINGS_FILE), t.as_bytes())
    }

    fn read_level(&self, rec: &LevelRecord) -> Result<Vec<Design>> {
        let path = self.dir.join(&rec.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if sha256_hex(&bytes) != rec.sha256 {
            return Err(Error::CheckpointCorrupt(format!(
                "hash mismatch for {}",
                rec.file
            )));
        }
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::CheckpointCorrupt(format!("{} is not UTF-8", rec.file)))?;
        let reps = parse_design_set(&text)?;
        if reps.len() != rec.classes {
            return Err(Error::CheckpointCorrupt(format!(
                "{} holds {} designs, manifest says {}",
                rec.file,
                reps.len(),
                rec.classes
            )));
        }
        Ok(reps)
    }

    /// Loads the manifest and verifies it belongs to this campaign.
    fn load(&self, campaign: &Campaign) -> Result<Option<(EnumerationState, Vec<Design>)>> {
        let path = self.dir.join(STATE_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let corrupt = |m: String| Error::CheckpointCorrupt(m);
        let mut kv = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| corrupt(format!("bad line {line:?}")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let p = campaign.params;
        let expect_params = format!("{} {} {}", p.runs(), p.levels(), p.strength());
        if kv.get("params") != Some(&expect_params) {
            return Err(corrupt(format!(
                "checkpoint is for params {:?}",
                kv.get("params")
            )));
        }
        let mode = campaign.mode.describe();
        if kv.get("mode") != Some(&mode) {
            return Err(corrupt(format!(
                "checkpoint is for mode {:?}",
                kv.get("mode")
            )));
        }
        let mut state = EnumerationState {
            params: p,
            mode,
            per_level: BTreeMap::new(),
            gma_per_k: BTreeMap::new(),
            extinct: kv.get("extinct").map(String::as_str) == Some("true"),
            timings: BTreeMap::new(),
        };
        let field = |k: usize, f: &str| kv.get(&format!("level.{k}.{f}")).cloned();
        let num = |s: Option<String>, what: &str| -> Result<usize> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| corrupt(format!("missing or bad {what}")))
        };
        let mut last = Vec::new();
        let mut k = p.strength();
        while let Some(file) = field(k, "file") {
            let rec = LevelRecord {
                classes: num(field(k, "classes"), "classes")?,
                candidates: num(field(k, "candidates"), "candidates")?,
                file,
                sha256: field(k, "sha256")
                    .ok_or_else(|| corrupt(format!("missing hash for k = {k}")))?,
            };
            let reps = self.read_level(&rec)?;
            if let Some((a, d)) = smallest_gwp(&reps) {
                let stored = field(k, "gma").unwrap_or_default();
                if stored != join(a.scaled()) {
                    return Err(corrupt(format!(
                        "stored GWP for k = {k} disagrees with level file"
                    )));
                }
                state.gma_per_k.insert(k, (a, d));
            }
            state.per_level.insert(k, rec);
            last = reps;
            k += 1;
        }
        if state.per_level.is_empty() {
            return Err(corrupt("manifest lists no levels".into()));
        }
        Ok(Some((state, last)))
    }
}

/// Runs (or resumes) a campaign, checkpointing after every level.
///
/// Stops at `k_max`, at the chain's `k_input`, or when a level is empty.
/// With a budget, the run stops cleanly at a level boundary and returns
/// `BudgetExceeded`; the checkpoint is complete up to that level.
pub fn run_campaign(campaign: &Campaign, dir: &Path, resume: bool) -> Result<EnumerationState> {
    let started = Instant::now();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ckpt = Checkpoint {
        dir: dir.to_path_buf(),
    };
    let seed_params = campaign.params.with_factors(campaign.params.strength())?;

    let loaded = if resume { ckpt.load(campaign)? } else { None };
    let (mut state, mut reps) = match loaded {
        Some(x) => x,
        None => {
            let seed = seed_design(&seed_params)?;
            let t = seed_params.strength();
            let (file, sha256) = ckpt.write_level(t, std::slice::from_ref(&seed))?;
            let mut state = EnumerationState {
                params: seed_params,
                mode: campaign.mode.describe(),
                per_level: BTreeMap::new(),
                gma_per_k: BTreeMap::new(),
                extinct: false,
                timings: BTreeMap::new(),
            };
            state.per_level.insert(
                t,
                LevelRecord {
                    classes: 1,
                    candidates: 1,
                    file,
                    sha256,
                },
            );
            state.gma_per_k.insert(t, (gwp(&seed), seed.clone()));
            ckpt.write_state(&state)?;
            (state, vec![seed])
        }
    };

    loop {
        let k = state.last_k() + 1;
        if state.extinct || campaign.k_limit().is_some_and(|m| k > m) {
            break;
        }
        if campaign.budget.is_some_and(|b| started.elapsed() >= b) {
            return Err(Error::BudgetExceeded { completed_k: k - 1 });
        }
        let (next, stats) = extend_level(&reps, &campaign.mode)?;
        let (file, sha256) = ckpt.write_level(k, &next)?;
        state.per_level.insert(
            k,
            LevelRecord {
                classes: stats.classes,
                candidates: stats.candidates,
                file,
                sha256,
            },
        );
        if let Some(best) = smallest_gwp(&next) {
            state.gma_per_k.insert(k, best);
        }
        state.extinct = next.is_empty();
        state.timings.insert(k, stats.elapsed);
        ckpt.write_state(&state)?;
        reps = next;
    }
    Ok(state)
}

/// Reads the manifest text of a checkpoint directory.
pub fn manifest_text(dir: &Path) -> Result<String> {
    let path = dir.join(STATE_FILE);
    fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::verify_strength;

    #[test]
    fn seed_is_replicated_factorial() {
        let p = DesignParams::new(20, 2, 2, 2).unwrap();
        let d = seed_design(&p).unwrap();
        assert_eq!(d.runs(), 20);
        assert!(verify_strength(&d, 2));
        assert_eq!(d.sorted_rows(), d);
        let p = DesignParams::new(81, 3, 3, 3).unwrap();
        let d = seed_design(&p).unwrap();
        assert_eq!((d.runs(), d.factors()), (81, 3));
        assert!(verify_strength(&d, 3));
        let p = DesignParams::new(4, 2, 2, 2).unwrap();
        assert_eq!(seed_design(&p).unwrap().cells(), &[0, 0, 0, 1, 1, 0, 1, 1]);
        assert!(seed_design(&DesignParams::new(8, 3, 2, 2).unwrap()).is_err());
    }

    #[test]
    fn empty_level_stays_empty() {
        let (out, stats) = extend_level(&[], &EnumerationMode::Full).unwrap();
        assert!(out.is_empty());
        assert_eq!(stats.classes, 0);
    }

    #[test]
    fn small_campaign_reaches_extinction() {
        let dir = tempfile::tempdir().unwrap();
        let p = DesignParams::new(8, 2, 2, 2).unwrap();
        let st = run_campaign(&Campaign::new(p, EnumerationMode::Full), dir.path(), false).unwrap();
        // OA(8,k,2,2) exists up to k = 7, one class at k = 7
        assert!(st.extinct);
        assert_eq!(st.last_k(), 8);
        assert_eq!(st.per_level[&7].classes, 1);
        assert_eq!(st.per_level[&8].classes, 0);
        let again =
            run_campaign(&Campaign::new(p, EnumerationMode::Full), dir.path(), true).unwrap();
        assert_eq!(again.per_level, st.per_level);
    }

    #[test]
    fn tampered_level_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = DesignParams::new(8, 2, 2, 2).unwrap();
        let mut c = Campaign::new(p, EnumerationMode::Full);
        c.k_max = Some(4);
        run_campaign(&c, dir.path(), false).unwrap();
        let f = dir.path().join(level_file(4));
        let text = fs::read_to_string(&f).unwrap();
        fs::write(&f, text + "# edited\n").unwrap();
        assert!(matches!(
            run_campaign(&c, dir.path(), true),
            Err(Error::CheckpointCorrupt(_))
        ));
    }
}
