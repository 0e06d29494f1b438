use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Orthogonal array enumeration, GWP reports and GMA searches.
#[derive(Parser)]
#[command(name = "oagma", version)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate OA(N,k,s,t) classes level by level with checkpoints.
    Enumerate(EnumerateArgs),
    /// Print distance distribution, GWP and residue checks of a design file.
    Gwp(GwpArgs),
    /// Heuristic searches for low-aberration designs.
    #[command(subcommand)]
    Search(SearchCommand),
    /// Hadamard matrix utilities.
    #[command(subcommand)]
    Hadamard(HadamardCommand),
    /// GMA catalog checks.
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Directed,
    DirectedRecursion,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecursionArg {
    Sharpened,
    Literal,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long = "N")]
    runs: usize,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    t: usize,
    /// Stop after this many factors (default: until no class survives).
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long, value_enum, default_value = "full")]
    mode: ModeArg,
    /// Top of the bound chain (directed-recursion only).
    #[arg(long)]
    kinput: Option<usize>,
    /// Upper bound on A_{t+2} at k_input, as NUM/DEN.
    #[arg(long)]
    a_bound: Option<String>,
    #[arg(long, value_enum, default_value = "sharpened")]
    recursion: RecursionArg,
    /// Checkpoint directory.
    #[arg(long)]
    out: PathBuf,
    /// Continue from the checkpoint in --out.
    #[arg(long)]
    resume: bool,
    /// Stop at the next level boundary after this many seconds.
    #[arg(long)]
    budget: Option<f64>,
}

#[derive(Args)]
struct GwpArgs {
    file: PathBuf,
    /// Also print exact fractions.
    #[arg(long)]
    exact: bool,
}

#[derive(Subcommand)]
enum SearchCommand {
    /// Hill-climb over k-column projections of a parent design.
    Backward(BackwardArgs),
    /// Random-objective extension walks with delete-one projections.
    Fb(FbArgs),
}

#[derive(Args)]
struct BackwardArgs {
    #[arg(long)]
    parent: PathBuf,
    /// Target size `K` or range `A-B`.
    #[arg(long)]
    k: String,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for best designs and the log (default: print only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum IlpArg {
    Plain,
    Directed,
}

#[derive(Args)]
struct FbArgs {
    #[arg(long = "N")]
    runs: usize,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    t: usize,
    #[arg(long, value_enum, default_value = "plain")]
    mode: IlpArg,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// Cap on extension solves; gives reproducible stops.
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum HadamardCommand {
    /// Derive the N saturated OA(N,N-1,2,2) of a Hadamard matrix.
    Derive {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Input uses 0/1 (0 = +1) instead of +/-.
        #[arg(long)]
        binary: bool,
        /// Keep one design per isomorphism class.
        #[arg(long)]
        dedupe: bool,
    },
    /// Kronecker product of two Hadamard matrices.
    Kron {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        binary: bool,
    },
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// Load and check every catalog row.
    Validate {
        /// Catalog file (default: the built-in one).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Compare a design's GWP with the catalog entry for its parameters.
    Compare {
        design: PathBuf,
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

/// Parses `args` and runs the command, writing results to `out`; returns the
/// process exit code.
fn execute<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            eprint!("{}", e.render());
            return 1;
        }
        Err(e) => {
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return 1;
        }
    }
    match commands::run(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(execute(std::env::args_os(), &mut std::io::stdout().lock()))
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use clap::CommandFactory;
    use oagma::catalog::{self, compare_against_catalog, Status};
    use oagma::enumerate::{extend_level, seed_design, EnumerationMode};
    use oagma::format::render_design;
    use oagma::DesignParams;

    use super::*;

    fn run(args: &[&str]) -> (u8, String) {
        let mut out = Vec::new();
        let code = execute(
            std::iter::once("oagma").chain(args.iter().copied()),
            &mut out,
        );
        (code, String::from_utf8(out).unwrap())
    }

    fn data(name: &str) -> String {
        let p = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../core/data/hadamard")
            .join(name);
        p.to_str().unwrap().to_string()
    }

    fn s(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        let (code, help) = run(&["--help"]);
        assert_eq!(code, 0);
        assert!(help.contains("Usage: oagma"));
        assert_eq!(run(&["enumerate", "--N", "20"]).0, 1);
        assert_eq!(run(&["gwp", "/nonexistent/design"]).0, 2);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let base = [
            "enumerate",
            "--N",
            "12",
            "--s",
            "2",
            "--t",
            "2",
            "--out",
            s(&out),
        ];
        assert_eq!(run(&[&base[..], &["--budget", "0"]].concat()).0, 3);
        let (code, text) = run(&[&base[..], &["--resume"]].concat());
        assert_eq!(code, 0);
        assert!(text.contains("extinct = true"));
        assert_eq!(
            run(&[&base[..], &["--mode", "directed-recursion"]].concat()).0,
            1
        );
        assert_eq!(
            run(&[
                &base[..],
                &[
                    "--mode",
                    "directed-recursion",
                    "--kinput",
                    "6",
                    "--a-bound",
                    "1/0"
                ]
            ]
            .concat())
            .0,
            1
        );
    }

    #[test]
    fn catalog_validate_counts_rows() {
        let (code, text) = run(&["catalog", "validate"]);
        assert_eq!(code, 0);
        assert_eq!(text.lines().last(), Some("127/127 rows pass"));

        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("cat.txt");
        std::fs::write(
            &file,
            "OA(4,3,2,2) : 1, 0, 3, 0\nOA(4,3,2,2) : 1, 0, 2, 1\n",
        )
        .unwrap();
        let (code, text) = run(&["catalog", "validate", "--file", s(&file)]);
        assert_eq!(code, 2);
        assert!(text.contains("1/2 rows pass"));
    }

    #[test]
    fn hadamard_derive_and_kron() {
        let dir = tempfile::tempdir().unwrap();
        let (code, text) = run(&[
            "hadamard",
            "derive",
            &data("h4.had"),
            "--out",
            s(dir.path()),
            "--dedupe",
        ]);
        assert_eq!(code, 0);
        assert!(text.contains("derived = 4") && text.contains("classes = 1"));
        assert!(std::fs::read_to_string(dir.path().join("h4.designs"))
            .unwrap()
            .starts_with("# designs: 1"));

        let k = dir.path().join("k.had");
        assert_eq!(
            run(&[
                "hadamard",
                "kron",
                &data("h12.had"),
                &data("h2.had"),
                "--out",
                s(&k)
            ])
            .0,
            0
        );
        assert_eq!(
            std::fs::read(&k).unwrap(),
            std::fs::read(data("h24_kron.had")).unwrap()
        );
    }

    #[test]
    fn gwp_report_on_28_runs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let args = [
            "enumerate",
            "--N",
            "28",
            "--s",
            "2",
            "--t",
            "2",
            "--mode",
            "directed",
            "--kmax",
            "4",
            "--out",
            s(&out),
        ];
        let (code, table) = run(&args);
        assert_eq!(code, 0);
        assert!(table.contains("level.4.classes = 3"));
        let (code, report) = run(&["gwp", s(&out.join("level_04.designs")), "--exact"]);
        assert_eq!(code, 0);
        assert!(report.contains("OA(28,4,2,2)"));
        assert!(report.contains("index = 7 (odd)"));
        assert!(report.contains("parity.violations = 0"));
        assert!(report.contains("divisibility.violations = 0"));
        assert!(report.contains("gwp.exact = 0 0 4/49"));
    }

    #[test]
    fn catalog_compare_reports_first_difference() {
        let params = DesignParams::new(24, 2, 2, 2).unwrap();
        let mut level = vec![seed_design(&params).unwrap()];
        for _ in 0..3 {
            level = extend_level(&level, &EnumerationMode::Full).unwrap().0;
        }
        let worse = level
            .iter()
            .find(|d| {
                compare_against_catalog(d, catalog::builtin())
                    .unwrap()
                    .status
                    == Status::Worse
            })
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("worse.design");
        std::fs::write(&file, render_design(worse)).unwrap();
        let (code, text) = run(&["catalog", "compare", s(&file)]);
        assert_eq!(code, 0);
        assert!(text.contains("status = worse"));
        assert!(text.contains("design = ") && text.contains("catalog = "));
        assert!(text.contains("first_difference = A"));
    }

    #[test]
    fn searches_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            run(&[
                "hadamard",
                "derive",
                &data("h24_kron.had"),
                "--out",
                s(dir.path())
            ])
            .0,
            0
        );
        let parent = dir.path().join("h24_kron.designs");
        // a multi-design file is not a single parent
        assert_eq!(
            run(&["search", "backward", "--parent", s(&parent), "--k", "5"]).0,
            2
        );

        let one = dir.path().join("one.design");
        let set = std::fs::read_to_string(&parent).unwrap();
        let first: String = set
            .lines()
            .skip(1)
            .take(25)
            .map(|l| format!("{l}\n"))
            .collect();
        std::fs::write(&one, first).unwrap();
        assert_eq!(
            run(&["search", "backward", "--parent", s(&one), "--k", "9-5"]).0,
            1
        );
        let backward = |tag: &str| {
            let out = dir.path().join(tag);
            let args = [
                "search",
                "backward",
                "--parent",
                s(&one),
                "--k",
                "4-8",
                "--restarts",
                "10",
                "--seed",
                "7",
                "--out",
                s(&out),
            ];
            let (code, text) = run(&args);
            assert_eq!(code, 0);
            (text, std::fs::read(out.join("best_k06.design")).unwrap())
        };
        let a = backward("a");
        assert!(a.0.starts_with("# prng = chacha8 seed = 7"));
        assert_eq!(a, backward("b"));

        let fb = || {
            let (code, text) = run(&[
                "search",
                "fb",
                "--N",
                "24",
                "--s",
                "2",
                "--t",
                "2",
                "--iterations",
                "60",
                "--seed",
                "4",
            ]);
            assert_eq!(code, 0);
            text.lines()
                .map(|l| l.split(" seconds = ").next().unwrap().to_string())
                .collect::<Vec<_>>()
        };
        let first = fb();
        assert!(first.iter().any(|l| l.starts_with("walks = ")));
        assert_eq!(first, fb());
    }
}
