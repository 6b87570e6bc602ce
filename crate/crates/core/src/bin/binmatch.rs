use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use binmatch::features::{extract, make_pattern, read_descriptors, write_descriptors};
use binmatch::fuzzy::{parse_trapezoid, FuzzyMatcherConfig, TrapezoidMF};
use binmatch::geometry::{RansacParams, DEFAULT_EPS, DEFAULT_RANSAC_ITERS};
use binmatch::harness::{
    emit_csv, evaluate, parse_modes, EvalParams, ExtractionParams, Mode, DEFAULT_FAST_THRESHOLD,
    DEFAULT_MAX_KEYPOINTS,
};
use binmatch::imageio::load_image;
use binmatch::matcher::{match_sets, MatchCandidate, Rule};
use binmatch::features::DEFAULT_PATTERN_SEED;

#[derive(Parser)]
#[command(name = "binmatch", version, about = "Fuzzy and constant-threshold binary descriptor matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect keypoints and write their descriptors.
    Detect {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FAST_THRESHOLD, value_parser = clap::value_parser!(u8).range(1..))]
        threshold: u8,
        #[arg(long = "max-kp", default_value_t = DEFAULT_MAX_KEYPOINTS)]
        max_kp: usize,
        #[arg(long, default_value_t = DEFAULT_PATTERN_SEED, value_parser = clap::value_parser!(u64).range(1..))]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match two descriptor files and write the matches as CSV.
    Match {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Constant threshold in bits (accept distance < t).
        #[arg(long, conflicts_with = "fuzzy", required_unless_present = "fuzzy")]
        t: Option<u32>,
        #[arg(long)]
        fuzzy: bool,
        #[command(flatten)]
        fuzzy_cfg: FuzzyArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the M / CM evaluation over a dataset directory.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "t5,t10,t15,fuzzy", value_parser = parse_mode_list)]
        modes: ModeList,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long = "ransac-iters", default_value_t = DEFAULT_RANSAC_ITERS)]
        ransac_iters: usize,
        /// Seeds both the sampling pattern and RANSAC.
        #[arg(long, default_value_t = DEFAULT_PATTERN_SEED, value_parser = clap::value_parser!(u64).range(1..))]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_FAST_THRESHOLD, value_parser = clap::value_parser!(u8).range(1..))]
        threshold: u8,
        #[arg(long = "max-kp", default_value_t = DEFAULT_MAX_KEYPOINTS)]
        max_kp: usize,
        #[command(flatten)]
        fuzzy_cfg: FuzzyArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FuzzyArgs {
    /// LOW trapezoid a,b,c,d
    #[arg(long, value_parser = parse_trapezoid)]
    low: Option<TrapezoidMF>,
    /// HIGH trapezoid a,b,c,d
    #[arg(long, value_parser = parse_trapezoid)]
    high: Option<TrapezoidMF>,
    #[arg(long)]
    cutoff: Option<f64>,
}

impl FuzzyArgs {
    fn config(&self) -> Result<FuzzyMatcherConfig, String> {
        let d = FuzzyMatcherConfig::default();
        FuzzyMatcherConfig::with_sets(
            self.low.unwrap_or(*d.low()),
            self.high.unwrap_or(*d.high()),
            self.cutoff.unwrap_or(d.cutoff()),
        )
        .map_err(|e| e.to_string())
    }
}

#[derive(Clone)]
struct ModeList(Vec<Mode>);

fn parse_mode_list(s: &str) -> Result<ModeList, String> {
    parse_modes(s).map(ModeList).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Data(String),
}

impl<E: Into<binmatch::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into().to_string())
    }
}

fn write_matches(path: &PathBuf, matches: &[MatchCandidate]) -> Result<(), Failure> {
    let data = |e: csv::Error| Failure::Data(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(data)?;
    w.write_record(["index_a", "index_b", "distance_bits", "degree"])
        .map_err(data)?;
    for m in matches {
        w.write_record([
            m.index_a.to_string(),
            m.index_b.to_string(),
            m.distance_bits.to_string(),
            m.degree.map(|d| format!("{d:.6}")).unwrap_or_default(),
        ])
        .map_err(data)?;
    }
    w.flush().map_err(|e| Failure::Data(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Detect {
            image,
            threshold,
            max_kp,
            seed,
            out,
        } => {
            let img = load_image(&image)?;
            let pattern = make_pattern(seed)?;
            let (kps, descs) = extract(&img, threshold, max_kp, &pattern)?;
            write_descriptors(&out, &kps, &descs)?;
            println!("{}: {} keypoints -> {}", image.display(), kps.len(), out.display());
        }
        Command::Match {
            a,
            b,
            t,
            fuzzy,
            fuzzy_cfg,
            out,
        } => {
            let cfg = fuzzy_cfg.config().map_err(Failure::Usage)?;
            let (_, da) = read_descriptors(&a)?;
            let (_, db) = read_descriptors(&b)?;
            let rule = match (t, fuzzy) {
                (Some(t), false) => Rule::Constant(t),
                _ => Rule::Fuzzy(&cfg),
            };
            let matches = match_sets(&da, &db, rule, true)?;
            write_matches(&out, &matches)?;
            println!("M = {} ({} x {} descriptors)", matches.len(), da.len(), db.len());
        }
        Command::Eval {
            dataset,
            modes,
            eps,
            ransac_iters,
            seed,
            threshold,
            max_kp,
            fuzzy_cfg,
            out,
        } => {
            if !(eps > 0.0) {
                return Err(Failure::Usage("--eps must be positive".into()));
            }
            if ransac_iters == 0 {
                return Err(Failure::Usage("--ransac-iters must be at least 1".into()));
            }
            let params = EvalParams {
                extraction: ExtractionParams {
                    fast_threshold: threshold,
                    max_keypoints: max_kp,
                    pattern_seed: seed,
                },
                modes: modes.0,
                fuzzy: fuzzy_cfg.config().map_err(Failure::Usage)?,
                eps,
                ransac: Some(RansacParams {
                    iters: ransac_iters,
                    inlier_eps: eps,
                    seed,
                }),
            };
            info!("fuzzy config: {}", params.fuzzy);
            let records = evaluate(&dataset, &params)?;
            for r in &records {
                let ransac = r
                    .ransac_inliers
                    .map_or_else(|| "-".to_string(), |n| n.to_string());
                println!(
                    "{:<10} {:<4} {:<6} M={:<6} CM={:<5} ransac_inliers={:<5} {:.2} ns/decision",
                    r.dataset,
                    r.pair,
                    r.mode.to_string(),
                    r.m,
                    r.cm,
                    ransac,
                    r.ns_per_decision
                );
            }
            emit_csv(&records, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
