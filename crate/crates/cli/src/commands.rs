use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use oagma::catalog::{self, CatalogEntry, Status};
use oagma::enumerate::{manifest_text, run_campaign, Campaign, EnumerationMode, EnumerationState};
use oagma::extend::{recursion_chain, ExtensionMode, RecursionMode};
use oagma::format::{read_design, read_design_set, render_design, render_design_set, write_atomic};
use oagma::hadamard::{derive_oas, kronecker, load_hadamard, Alphabet};
use oagma::heuristics::{backward_search, forward_backward_search, SearchConfig};
use oagma::iso::reduce_to_classes;
use oagma::spectra::{
    self, check_gwp_residues, check_j_parity, distance_distribution, j_spectrum, verify_strength,
    Gwp,
};
use oagma::{Design, DesignParams};

use crate::{
    BackwardArgs, CatalogCommand, Command, EnumerateArgs, FbArgs, GwpArgs, HadamardCommand, IlpArg,
    ModeArg, RecursionArg, SearchCommand,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] oagma::Error),
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(oagma::Error::BudgetExceeded { .. }) => 3,
            CliError::Data(_) | CliError::Output(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Enumerate(a) => enumerate(a, out),
        Command::Gwp(a) => gwp_report(a, out),
        Command::Search(SearchCommand::Backward(a)) => backward(a, out),
        Command::Search(SearchCommand::Fb(a)) => fb(a, out),
        Command::Hadamard(HadamardCommand::Derive {
            file,
            out: dir,
            binary,
            dedupe,
        }) => derive(&file, &dir, binary, dedupe, out),
        Command::Hadamard(HadamardCommand::Kron {
            a,
            b,
            out: target,
            binary,
        }) => kron(&a, &b, &target, binary, out),
        Command::Catalog(CatalogCommand::Validate { file }) => validate(file, out),
        Command::Catalog(CatalogCommand::Compare { design, file }) => compare(&design, file, out),
    }
}

/// `NUM/DEN` with `DEN > 0`.
fn parse_ratio(s: &str) -> Result<(i128, i128)> {
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: i128 = n
        .trim()
        .parse()
        .map_err(|_| usage(format!("bad numerator in {s:?}")))?;
    let d: i128 = d
        .trim()
        .parse()
        .map_err(|_| usage(format!("bad denominator in {s:?}")))?;
    if d <= 0 {
        return Err(usage("denominator must be positive"));
    }
    Ok((n, d))
}

fn seconds(v: Option<f64>) -> Result<Option<Duration>> {
    v.map(|s| Duration::try_from_secs_f64(s).map_err(|_| usage(format!("bad duration {s}"))))
        .transpose()
}

fn join(v: &[i128]) -> String {
    v.iter().map(i128::to_string).collect::<Vec<_>>().join(",")
}

fn gwp_prefix(a: &Gwp, from: usize, count: usize) -> String {
    (from..a.scaled().len())
        .take(count)
        .map(|j| a.decimal(j, 2))
        .collect::<Vec<_>>()
        .join(" ")
}

fn enumerate(a: EnumerateArgs, out: &mut dyn Write) -> Result<()> {
    let params = DesignParams::new(a.runs, a.t, a.s, a.t)?;
    let mode = match a.mode {
        ModeArg::Full => EnumerationMode::Full,
        ModeArg::Directed => EnumerationMode::Directed,
        ModeArg::DirectedRecursion => {
            let kinput = a
                .kinput
                .ok_or_else(|| usage("--kinput is required with --mode directed-recursion"))?;
            let bound = a
                .a_bound
                .as_deref()
                .ok_or_else(|| usage("--a-bound is required with --mode directed-recursion"))?;
            let (num, den) = parse_ratio(bound)?;
            let n2 = (a.runs * a.runs) as i128;
            let scaled = (n2 * num).div_euclid(den);
            let reading = match a.recursion {
                RecursionArg::Sharpened => RecursionMode::Sharpened,
                RecursionArg::Literal => RecursionMode::Literal,
            };
            EnumerationMode::DirectedWithRecursion(recursion_chain(
                &params, kinput, scaled, reading,
            )?)
        }
    };
    let mut campaign = Campaign::new(params, mode);
    campaign.k_max = a.kmax;
    campaign.budget = seconds(a.budget)?;
    match run_campaign(&campaign, &a.out, a.resume) {
        Ok(state) => {
            write!(out, "{}", summary(&state))?;
            write!(out, "{}", manifest_text(&a.out)?)?;
            Ok(())
        }
        Err(e @ oagma::Error::BudgetExceeded { .. }) => {
            writeln!(out, "stopped: {e}")?;
            write!(out, "{}", manifest_text(&a.out)?)?;
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn summary(state: &EnumerationState) -> String {
    let t = state.params.strength();
    let mut out = String::new();
    let _ = writeln!(out, "{} mode = {}", state.params, state.mode);
    let _ = writeln!(
        out,
        "{:>4} {:>9} {:>9}  {:<28} {:>9}",
        "k",
        "classes",
        "|M|",
        format!("GMA A{}..A{}", t + 1, t + 4),
        "seconds"
    );
    for (&k, rec) in state.per_level.range(t + 1..) {
        let gma = state
            .gma_per_k
            .get(&k)
            .map(|(a, _)| gwp_prefix(a, t + 1, 4))
            .unwrap_or_default();
        let secs = state
            .timings
            .get(&k)
            .map_or("-".into(), |d| format!("{:.2}", d.as_secs_f64()));
        let _ = writeln!(
            out,
            "{k:>4} {:>9} {:>9}  {gma:<28} {secs:>9}",
            rec.classes, rec.candidates
        );
    }
    out
}

fn gwp_report(a: GwpArgs, out: &mut dyn Write) -> Result<()> {
    let designs = read_design_set(&a.file)?;
    for (i, d) in designs.iter().enumerate() {
        if designs.len() > 1 {
            if i > 0 {
                writeln!(out)?;
            }
            writeln!(out, "# design {}", i + 1)?;
        }
        report_one(d, a.exact, out)?;
    }
    Ok(())
}

fn report_one(d: &Design, exact: bool, out: &mut dyn Write) -> Result<()> {
    let p = *d.params();
    let (n, k, t) = (p.runs(), p.factors(), p.strength());
    writeln!(out, "{p}")?;
    let found = spectra::strength_of(d);
    writeln!(
        out,
        "strength = {found}{}",
        if found < t {
            format!(" (declared {t} does not hold)")
        } else {
            String::new()
        }
    )?;
    let b = distance_distribution(d);
    writeln!(out, "distance.scaled = {}", join(b.scaled()))?;
    writeln!(
        out,
        "distance = {}",
        (0..=k)
            .map(|i| b.decimal(i, 3))
            .collect::<Vec<_>>()
            .join(" ")
    )?;
    let g = spectra::gwp(d);
    writeln!(out, "gwp.scaled = {}", join(g.scaled()))?;
    writeln!(
        out,
        "gwp = {}",
        (1..=k)
            .map(|j| g.decimal(j, 2))
            .collect::<Vec<_>>()
            .join(" ")
    )?;
    if exact {
        writeln!(
            out,
            "gwp.exact = {}",
            (1..=k).map(|j| g.exact(j)).collect::<Vec<_>>().join(" ")
        )?;
    }
    if p.levels() != 2 {
        writeln!(out, "residue checks skipped (s = {})", p.levels())?;
        return Ok(());
    }
    if !verify_strength(d, t) {
        writeln!(out, "residue checks skipped (not strength {t})")?;
        return Ok(());
    }
    let parity = if p.lambda() % 2 == 1 { "odd" } else { "even" };
    writeln!(out, "index = {} ({parity})", n / (1 << t))?;
    if k <= 24 {
        let js = j_spectrum(d, k)?;
        let v = check_j_parity(&js);
        writeln!(out, "parity.violations = {}", v.len())?;
        for x in v.iter().take(10) {
            writeln!(out, "  subset {:#b}: J = {} ({:?})", x.subset, x.j, x.issue)?;
        }
    } else {
        writeln!(out, "parity check skipped (k > 24)")?;
    }
    let bad = check_gwp_residues(&g);
    writeln!(
        out,
        "divisibility.violations = {}{}",
        bad.len(),
        if bad.is_empty() {
            String::new()
        } else {
            format!(" at j = {bad:?}")
        }
    )?;
    Ok(())
}

fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let bad = || usage(format!("--k expects K or A-B, got {s:?}"));
    let (lo, hi) = match s.split_once('-') {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let k = s.trim().parse().map_err(|_| bad())?;
            (k, k)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn out_dir(dir: &Option<PathBuf>) -> Result<()> {
    if let Some(d) = dir {
        fs::create_dir_all(d).map_err(|e| oagma::Error::Io {
            path: d.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::MatchesGma => "matches-gma",
        Status::WeakGma => "weak-gma",
        Status::Worse => "worse",
        Status::Better => "better-than-catalog",
        Status::NoEntry => "no-entry",
    }
}

fn backward(a: BackwardArgs, out: &mut dyn Write) -> Result<()> {
    let parent = read_design(&a.parent)?;
    let ks = parse_k_range(&a.k)?;
    let cfg = SearchConfig {
        seed: a.seed,
        restarts: a.restarts,
        ..SearchConfig::default()
    };
    out_dir(&a.out)?;
    let header = format!(
        "# prng = chacha8 seed = {} restarts = {}",
        a.seed, a.restarts
    );
    let mut log = format!("{header}\n");
    writeln!(out, "{header}")?;
    for k in ks {
        let r = backward_search(&parent, k, &cfg)?;
        let cmp = catalog::compare_against_catalog(&r.design, catalog::builtin())?;
        let line = format!(
            "k = {k} gwp = {} start = {} restart = {} columns = {:?} catalog = {}",
            join(&r.gwp.scaled()[1..]),
            join(&r.start_gwp[1..]),
            r.restart,
            r.columns,
            status_name(cmp.status)
        );
        writeln!(out, "{line}")?;
        log.push_str(&line);
        log.push('\n');
        if let Some(dir) = &a.out {
            let text = format!("{header}\n{}", render_design(&r.design));
            write_atomic(&dir.join(format!("best_k{k:02}.design")), text.as_bytes())?;
        }
    }
    if let Some(dir) = &a.out {
        write_atomic(&dir.join("backward.log"), log.as_bytes())?;
    }
    Ok(())
}

fn fb(a: FbArgs, out: &mut dyn Write) -> Result<()> {
    let params = DesignParams::new(a.runs, a.t, a.s, a.t)?;
    let cfg = SearchConfig {
        seed: a.seed,
        time_budget: seconds(a.budget)?,
        max_iterations: a.iterations,
        mode: match a.mode {
            IlpArg::Plain => ExtensionMode::Plain,
            IlpArg::Directed => ExtensionMode::Directed,
        },
        ..SearchConfig::default()
    };
    out_dir(&a.out)?;
    let best = forward_backward_search(&params, &cfg)?;
    let header = format!("# prng = chacha8 seed = {}", a.seed);
    let mut log = format!("{header}\n");
    for i in &best.log {
        let t = params.strength();
        let prefix: Vec<String> = i
            .gwp
            .iter()
            .skip(t + 1)
            .take(4)
            .map(i128::to_string)
            .collect();
        let _ = writeln!(
            log,
            "improve k = {} gwp = {} iteration = {} seconds = {:.3}{}",
            i.k,
            prefix.join(","),
            i.iteration,
            i.elapsed.as_secs_f64(),
            if i.from_projection {
                " (projection)"
            } else {
                ""
            }
        );
    }
    write!(out, "{log}")?;
    writeln!(
        out,
        "walks = {} iterations = {} k_max = {} stopped_by_time = {}",
        best.walks,
        best.iterations,
        best.k_max().unwrap_or(0),
        best.stopped_by_time
    )?;
    for (k, (d, g)) in &best.entries {
        let cmp = catalog::compare_against_catalog(d, catalog::builtin())?;
        writeln!(
            out,
            "k = {k} gwp = {} catalog = {}",
            join(&g.scaled()[1..]),
            status_name(cmp.status)
        )?;
        if let Some(dir) = &a.out {
            let text = format!("{header}\n{}", render_design(d));
            write_atomic(&dir.join(format!("best_k{k:02}.design")), text.as_bytes())?;
        }
    }
    if let Some(dir) = &a.out {
        write_atomic(&dir.join("fb.log"), log.as_bytes())?;
    }
    Ok(())
}

fn alphabet(binary: bool) -> Alphabet {
    if binary {
        Alphabet::Binary
    } else {
        Alphabet::PlusMinus
    }
}

fn derive(file: &Path, dir: &Path, binary: bool, dedupe: bool, out: &mut dyn Write) -> Result<()> {
    let h = load_hadamard(file, alphabet(binary))?;
    let mut designs: Vec<Design> = derive_oas(&h)?;
    let derived = designs.len();
    if dedupe {
        designs = reduce_to_classes(&designs)?;
    }
    fs::create_dir_all(dir).map_err(|e| oagma::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let stem = file
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("hadamard");
    let target = dir.join(format!("{stem}.designs"));
    write_atomic(&target, render_design_set(&designs).as_bytes())?;
    writeln!(out, "derived = {derived}")?;
    if dedupe {
        writeln!(out, "classes = {}", designs.len())?;
    }
    writeln!(out, "written = {}", target.display())?;
    Ok(())
}

fn kron(a: &Path, b: &Path, target: &Path, binary: bool, out: &mut dyn Write) -> Result<()> {
    let ha = load_hadamard(a, alphabet(binary))?;
    let hb = load_hadamard(b, alphabet(binary))?;
    let h = kronecker(&ha, &hb);
    write_atomic(target, h.to_string().as_bytes())?;
    writeln!(out, "order = {}", h.order())?;
    Ok(())
}

fn catalog_entries(file: Option<PathBuf>) -> Result<Vec<CatalogEntry>> {
    Ok(match file {
        Some(p) => catalog::load_catalog(&p)?,
        None => catalog::builtin().to_vec(),
    })
}

fn validate(file: Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    let (text, source) = match &file {
        Some(p) => (
            fs::read_to_string(p).map_err(|e| oagma::Error::Io {
                path: p.clone(),
                source: e,
            })?,
            p.display().to_string(),
        ),
        None => (catalog::builtin_text().to_string(), "builtin".to_string()),
    };
    let rows = catalog::check_rows(&text, &source);
    let mut failed = 0;
    for r in &rows {
        if let Err(e) = r {
            failed += 1;
            writeln!(out, "FAIL {e}")?;
        }
    }
    writeln!(out, "{}/{} rows pass", rows.len() - failed, rows.len())?;
    if failed > 0 {
        return Err(CliError::Data(oagma::Error::CatalogRowInvalid {
            row: source,
            msg: format!("{failed} rows failed"),
        }));
    }
    Ok(())
}

fn compare(design: &Path, file: Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    let d = read_design(design)?;
    let entries = catalog_entries(file)?;
    let cmp = catalog::compare_against_catalog(&d, &entries)?;
    let k = d.factors();
    writeln!(out, "status = {}", status_name(cmp.status))?;
    writeln!(
        out,
        "design = {}",
        (1..=k)
            .map(|j| cmp.design.decimal(j, 2))
            .collect::<Vec<_>>()
            .join(" ")
    )?;
    if let Some(c) = &cmp.catalog {
        writeln!(
            out,
            "catalog = {}",
            (1..=k)
                .map(|j| c.decimal(j, 2))
                .collect::<Vec<_>>()
                .join(" ")
        )?;
    }
    if let Some(j) = cmp.first_difference {
        writeln!(out, "first_difference = A{j}")?;
    }
    Ok(())
}
