//! Command-line front end.
//!
//! Exit codes: 0 feasible or success, 1 well-formed but infeasible (or no
//! candidate found), 2 usage or validation error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use macfcs::fmt::csv_float;
use macfcs::model::{build_cf_joint, build_df_joint, make_common_part_source, source_stats, CfInput, Channel, DfInput, SourcePair};
use macfcs::optimizer::{describe_cards, search, SearchConfig, SearchResult, Strategy};
use macfcs::regions::{
    cf_constraints_with, cf_raw_system_from_terms, cf_terms, df_constraints_with, slepian_wolf_region, system_feasible,
    FeasibilityReport, RateConstraintSystem, Tolerances,
};
use macfcs::simulator::{simulate_df, simulate_mac, simulate_sw, trend_csv, trend_report, SimConfig};
use macfcs::{Error, Result};

const ML_NOTE: &str = "note: decoders use maximum-likelihood decoding in place of joint-typicality decoding";

#[derive(Parser)]
#[command(name = "macfcs", version, about = "Transmissibility checks, searches and simulations for the MAC with feedback and correlated sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropy statistics of a source pair.
    Stats {
        #[arg(long)]
        source: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Slepian-Wolf rate region of a source pair.
    SwRegion {
        #[arg(long)]
        source: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate the decode-forward conditions for a candidate.
    CheckDf(CheckArgs),
    /// Evaluate the compress-forward conditions for a candidate.
    CheckCf {
        #[command(flatten)]
        check: CheckArgs,
        /// Also write the unreduced rate system to this path.
        #[arg(long, value_name = "PATH")]
        emit_raw_system: Option<PathBuf>,
    },
    /// Evaluate the conditions of either strategy.
    Check {
        #[arg(long)]
        strategy: StrategyArg,
        #[command(flatten)]
        check: CheckArgs,
    },
    /// Search auxiliary distributions for a feasible candidate.
    Optimize {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value = "df")]
        strategy: StrategyArg,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run a Monte-Carlo simulation over several block lengths.
    Simulate(SimulateArgs),
    /// Optimize over a one-parameter source family.
    Sweep(SweepArgs),
    /// Decide feasibility of a linear rate system by Fourier-Motzkin elimination.
    Fm {
        #[arg(long)]
        system: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Df,
    Cf,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Df => Strategy::Df,
            StrategyArg::Cf => Strategy::Cf,
        }
    }
}

#[derive(Args)]
struct OutArg {
    /// Write output here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long)]
    source: PathBuf,
    /// Candidate document, or a search result containing one.
    #[arg(long)]
    candidate: PathBuf,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SearchArgs {
    /// Auxiliary alphabet sizes, e.g. `W0=2,W1=3`.
    #[arg(long, value_name = "NAME=K,...")]
    cards: Option<String>,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every available processor.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl SearchArgs {
    fn config(&self) -> Result<SearchConfig> {
        let mut cards = BTreeMap::new();
        if let Some(spec) = &self.cards {
            for (k, v) in parse_pairs(spec)? {
                let k_int = v as usize;
                if k_int as f64 != v {
                    return Err(Error::InvalidConfig(format!("cardinality {k}={v} is not an integer")));
                }
                cards.insert(k, k_int);
            }
        }
        Ok(SearchConfig {
            cards,
            restarts: self.restarts,
            seed: self.seed,
            workers: self.workers,
            ..SearchConfig::default()
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Sw,
    Mac,
    Df,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scheme: Scheme,
    #[arg(long)]
    channel: Option<PathBuf>,
    #[arg(long)]
    source: Option<PathBuf>,
    /// Decode-forward candidate; for `mac`, a candidate with single-symbol
    /// auxiliaries supplies the input distributions (uniform otherwise).
    #[arg(long)]
    candidate: Option<PathBuf>,
    /// Block lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Rates in bits per symbol, e.g. `R1=0.5,R2=0.5`.
    #[arg(long, value_name = "NAME=R,...")]
    rates: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Draw channel codewords without replacement (`mac` only).
    #[arg(long)]
    distinct_codewords: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    /// Doubly symmetric binary source with crossover `p`.
    Dsbs,
    /// Common-part source; the parameter is the size named by `--vary`.
    Common,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long)]
    family: Family,
    #[arg(long)]
    start: f64,
    #[arg(long)]
    stop: f64,
    #[arg(long)]
    step: f64,
    /// Common-part size swept by the parameter (d, e or f).
    #[arg(long, default_value = "d")]
    vary: String,
    /// Fixed common-part sizes, e.g. `e=2,f=2`; missing sizes are 1.
    #[arg(long, value_name = "NAME=K,...")]
    fixed: Option<String>,
    #[arg(long, default_value = "df")]
    strategy: StrategyArg,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    out: OutArg,
}

enum Outcome {
    Success,
    Infeasible,
}

fn parse_pairs(spec: &str) -> Result<Vec<(String, f64)>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected NAME=VALUE, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("`{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: &OutArg, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &out.out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_channel(p: &Path) -> Result<Channel> {
    Channel::load(&read(p)?)
}

fn load_source(p: &Path) -> Result<SourcePair> {
    SourcePair::load(&read(p)?)
}

/// The candidate document itself, or the `best_input` of a search result.
fn candidate_doc(p: &Path) -> Result<String> {
    let text = read(p)?;
    let v: Value = serde_json::from_str(&text)?;
    match v.get("best_input") {
        Some(inner) => Ok(inner.to_string()),
        None => Ok(text),
    }
}

fn check_report(strategy: Strategy, args: &CheckArgs) -> Result<(FeasibilityReport, Option<RateConstraintSystem>)> {
    let ch = load_channel(&args.channel)?;
    let st = source_stats(&load_source(&args.source)?);
    let doc = candidate_doc(&args.candidate)?;
    let tol = Tolerances::default();
    match strategy {
        Strategy::Df => {
            let input = DfInput::load(&doc)?;
            Ok((df_constraints_with(&build_df_joint(&ch, &input)?, &st, &tol)?, None))
        }
        Strategy::Cf => {
            let input = CfInput::load(&doc)?;
            let joint = build_cf_joint(&ch, &input)?;
            let raw = cf_raw_system_from_terms(&cf_terms(&joint)?, &st, &tol);
            Ok((cf_constraints_with(&joint, &st, &tol)?, Some(raw)))
        }
    }
}

fn verdict(feasible: bool) -> Outcome {
    if feasible {
        Outcome::Success
    } else {
        Outcome::Infeasible
    }
}

fn report_progress(r: &SearchResult) {
    let mut best = f64::NEG_INFINITY;
    for (i, &v) in r.trace.iter().enumerate() {
        best = best.max(v);
        eprintln!("restart {i}: objective {} best {}", csv_float(v), csv_float(best));
    }
}

fn no_candidate(r: &SearchResult) -> String {
    format!("no candidate found at cardinalities {}", describe_cards(&r.cards))
}

fn sweep_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(Error::InvalidConfig(format!(
            "empty range start={start} stop={stop} step={step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn family_source(args: &SweepArgs, p: f64) -> Result<SourcePair> {
    match args.family {
        Family::Dsbs => SourcePair::dsbs(p),
        Family::Common => {
            let mut sizes: BTreeMap<String, usize> = ["d", "e", "f"].iter().map(|k| (k.to_string(), 1)).collect();
            if let Some(spec) = &args.fixed {
                for (k, v) in parse_pairs(spec)? {
                    if !sizes.contains_key(&k) || v < 1.0 || v.fract() != 0.0 {
                        return Err(Error::InvalidConfig(format!("invalid common-part size {k}={v}")));
                    }
                    sizes.insert(k, v as usize);
                }
            }
            if !sizes.contains_key(&args.vary) {
                return Err(Error::InvalidConfig(format!("--vary must be d, e or f, got `{}`", args.vary)));
            }
            let k = p.round();
            if k < 1.0 || (k - p).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("common-part size {p} is not a positive integer")));
            }
            sizes.insert(args.vary.clone(), k as usize);
            make_common_part_source(sizes["d"], sizes["e"], sizes["f"])
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Stats { source, out } => {
            let st = source_stats(&load_source(&source)?).rounded();
            emit(&out, &serde_json::to_string_pretty(&st)?)?;
            Ok(Outcome::Success)
        }
        Command::SwRegion { source, out } => {
            let sys = slepian_wolf_region(&source_stats(&load_source(&source)?));
            emit(&out, &serde_json::to_string_pretty(&sys)?)?;
            Ok(Outcome::Success)
        }
        Command::CheckDf(args) => {
            let (r, _) = check_report(Strategy::Df, &args)?;
            emit(&args.out, &r.to_json_string())?;
            Ok(verdict(r.feasible))
        }
        Command::CheckCf { check, emit_raw_system } => {
            let (r, raw) = check_report(Strategy::Cf, &check)?;
            if let (Some(path), Some(raw)) = (emit_raw_system, raw) {
                emit(&OutArg { out: Some(path) }, &serde_json::to_string_pretty(&raw)?)?;
            }
            emit(&check.out, &r.to_json_string())?;
            Ok(verdict(r.feasible))
        }
        Command::Check { strategy, check } => {
            let (r, _) = check_report(strategy.into(), &check)?;
            emit(&check.out, &r.to_json_string())?;
            Ok(verdict(r.feasible))
        }
        Command::Optimize { channel, source, strategy, search: sargs, out } => {
            let ch = load_channel(&channel)?;
            let st = source_stats(&load_source(&source)?);
            let r = search(strategy.into(), &ch, &st, &sargs.config()?)?;
            report_progress(&r);
            emit(&out, &r.to_json_string())?;
            if !r.feasible {
                eprintln!("{}", no_candidate(&r));
            }
            Ok(verdict(r.feasible))
        }
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => {
            let ch = load_channel(&args.channel)?;
            let cfg = args.search.config()?;
            let mut csv = String::from("param,feasible,min_margin,best_objective\n");
            for p in sweep_values(args.start, args.stop, args.step)? {
                let st = source_stats(&family_source(&args, p)?);
                let r = search(args.strategy.into(), &ch, &st, &cfg)?;
                if !r.feasible {
                    eprintln!("param {}: {}", csv_float(p), no_candidate(&r));
                }
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    csv_float(p),
                    r.feasible,
                    csv_float(r.report.min_margin),
                    csv_float(r.objective)
                ));
            }
            emit(&args.out, &csv)?;
            Ok(Outcome::Success)
        }
        Command::Fm { system, out } => {
            let sys = RateConstraintSystem::load(&read(&system)?)?;
            let v = system_feasible(&sys);
            emit(&out, &serde_json::to_string_pretty(&v)?)?;
            Ok(verdict(v.feasible))
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<Outcome> {
    let rates: BTreeMap<String, f64> = match &args.rates {
        Some(spec) => parse_pairs(spec)?.into_iter().collect(),
        None => BTreeMap::new(),
    };
    if args.n.is_empty() {
        return Err(Error::InvalidConfig("at least one block length is required".into()));
    }
    let cfgs: Vec<SimConfig> = args
        .n
        .iter()
        .map(|&n| SimConfig {
            n,
            blocks: args.blocks,
            trials: args.trials,
            seed: args.seed,
            rates: rates.clone(),
            epsilon: args.epsilon,
            workers: args.workers,
            distinct_codewords: args.distinct_codewords,
        })
        .collect();
    let need = |p: &Option<PathBuf>, flag: &str| {
        p.clone().ok_or_else(|| Error::InvalidConfig(format!("--{flag} is required for this scheme")))
    };
    eprintln!("{ML_NOTE}");
    let rows = match args.scheme {
        Scheme::Sw => {
            let src = load_source(&need(&args.source, "source")?)?;
            trend_report(|c| simulate_sw(&src, c), &cfgs)?
        }
        Scheme::Mac => {
            let ch = load_channel(&need(&args.channel, "channel")?)?;
            let [x1, x2, ..] = ch.cards();
            let (px1, px2) = match &args.candidate {
                Some(p) => {
                    let input = DfInput::load(&candidate_doc(p)?)?;
                    let c = input.cards();
                    if c[..3] != [1, 1, 1] {
                        return Err(Error::InvalidConfig(
                            "mac simulation needs a candidate with single-symbol auxiliaries".into(),
                        ));
                    }
                    (input.f_x1.row(0).to_vec(), input.f_x2.row(0).to_vec())
                }
                None => (vec![1.0 / x1 as f64; x1], vec![1.0 / x2 as f64; x2]),
            };
            trend_report(|c| simulate_mac(&ch, c, &px1, &px2), &cfgs)?
        }
        Scheme::Df => {
            let ch = load_channel(&need(&args.channel, "channel")?)?;
            let src = load_source(&need(&args.source, "source")?)?;
            let [x1, x2, ..] = ch.cards();
            let input = match &args.candidate {
                Some(p) => DfInput::load(&candidate_doc(p)?)?,
                None => DfInput::uniform([1, 1, 1, x1, x2])?,
            };
            trend_report(|c| simulate_df(&ch, &src, &input, c), &cfgs)?
        }
    };
    emit(&args.out, &trend_csv(&rows))?;
    Ok(Outcome::Success)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
