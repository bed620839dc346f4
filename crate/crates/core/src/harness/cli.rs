use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sweep::{default_weight, rows_to_csv};
use super::{attack, simulate, sweep, AttackReport, CodeReport, Experiment, HarnessError, SweepParameter, SweepSpec};
use crate::adversary::StrategySpec;
use crate::codes::{find_code, CodeFile};
use crate::protocol::{ProtocolConfig, ValueOrder, Variant};

/// Environment variable that, when set, replaces `--seed`.
pub const SEED_ENV: &str = "QSSLAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "qsslab", version, about = "Quantum secret sharing simulator and attack harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one execution and write its transcript.
    Simulate(ExperimentArgs),
    /// Repeat an attack over many seeded trials and report rates.
    Attack(AttackArgs),
    /// Repeat an attack for each value of a parameter and emit CSV.
    Sweep(SweepArgs),
    /// Search for a code usable by the secure variant.
    Codes(CodesArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value = "original")]
    pub variant: Variant,
    #[arg(long, default_value_t = 5)]
    pub participants: usize,
    /// Defaults to the code length with --code, otherwise 100.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Code file for the secure variant.
    #[arg(long)]
    pub code: Option<PathBuf>,
    #[arg(long, default_value = "honest")]
    pub strategy: StrategySpec,
    #[arg(long)]
    pub cheater: Option<usize>,
    /// Honest pair `a,b` around a secure-variant cheater.
    #[arg(long, value_parser = parse_pair)]
    pub honest: Option<(usize, usize)>,
    #[arg(long, default_value_t = 0.5)]
    pub check_fraction: f64,
    /// random, first:<k> or last:<k>.
    #[arg(long, default_value = "random", value_parser = parse_value_order)]
    pub value_order: ValueOrder,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Record wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// `n` (runs) or `N` (participants).
    #[arg(long, default_value = "n")]
    pub param: SweepParameter,
    /// Ascending, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<usize>,
    /// Codes drawn per value in secure sweeps over n.
    #[arg(long, default_value_t = 32)]
    pub code_pool: usize,
}

#[derive(Debug, Args)]
pub struct CodesArgs {
    #[arg(long)]
    pub n: usize,
    /// Defaults to ceil(0.7 n).
    #[arg(long)]
    pub w: Option<usize>,
    /// Evaluate the parameters at this distance instead of searching.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random generator matrices tried per dimension.
    #[arg(long, default_value_t = 4000)]
    pub tries: usize,
    /// Smallest acceptable number of weight-w codewords.
    #[arg(long, default_value_t = 1)]
    pub min_words: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected a,b, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_value_order(s: &str) -> Result<ValueOrder, String> {
    if s == "random" {
        return Ok(ValueOrder::Random);
    }
    let (kind, p) = s.split_once(':').ok_or_else(|| format!("expected random, first:<k> or last:<k>, got {s:?}"))?;
    let p: usize = p.parse().map_err(|e| format!("{p:?}: {e}"))?;
    match kind {
        "first" => Ok(ValueOrder::First(p)),
        "last" => Ok(ValueOrder::Last(p)),
        _ => Err(format!("expected first or last, got {kind:?}")),
    }
}

/// `--seed`, unless the environment overrides it.
fn effective_seed(flag: u64) -> Result<u64, HarnessError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|e| HarnessError::Config(format!("{SEED_ENV}={v:?}: {e}"))),
        Err(_) => Ok(flag),
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

/// Writes to `out` when given, to standard output otherwise.
fn emit(out: Option<&Path>, contents: &str) -> Result<(), HarnessError> {
    match out {
        Some(path) => write(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

impl ExperimentArgs {
    pub fn experiment(&self, trials: usize) -> Result<Experiment, HarnessError> {
        let mut protocol = ProtocolConfig::new(self.variant, self.participants, self.runs.unwrap_or(100), 0);
        protocol.seed = effective_seed(self.seed)?;
        protocol.check_fraction = self.check_fraction;
        protocol.value_order = self.value_order;
        if let Some(path) = &self.code {
            let file = CodeFile::from_json(&read(path)?)?;
            let code = file.to_code()?;
            if let Some(runs) = self.runs.filter(|&r| r != code.n()) {
                return Err(HarnessError::Config(format!("--runs {runs} differs from code length {}", code.n())));
            }
            protocol = protocol.with_code(code, file.w);
        }
        let mut exp = Experiment::new(protocol, self.strategy, trials);
        if let Some(k) = self.cheater {
            exp = exp.with_cheater(k);
        }
        if let Some((a, b)) = self.honest {
            exp = exp.with_honest(a, b);
        }
        Ok(exp)
    }
}

/// Flat two-line CSV of the headline fields of a report.
pub fn report_to_csv(report: &AttackReport) -> Result<String, HarnessError> {
    let mut header = vec!["variant", "participants", "runs", "seed", "strategy", "cheater", "trials"];
    let mut values = vec![
        serde_json::to_value(report.variant)?.as_str().unwrap_or_default().to_string(),
        report.participants.to_string(),
        report.runs.to_string(),
        report.seed.to_string(),
        report.strategy.clone(),
        report.cheater.to_string(),
        report.trials.to_string(),
    ];
    let rates = [
        ("detection_rate", Some(report.detection_rate)),
        ("valid_run_rate", Some(report.valid_run_rate)),
        ("pass_probability", Some(report.pass_probability)),
        ("secret_recovery_rate", report.secret_recovery_rate),
        ("epsilon_estimate", report.epsilon_estimate),
        ("both_z_detection_rate", report.both_z_detection_rate),
    ];
    let mut names = Vec::new();
    for (name, est) in rates {
        names.push((name.to_string(), est.map(|e| e.rate)));
        names.push((format!("{name}_ci_low"), est.map(|e| e.ci_low)));
        names.push((format!("{name}_ci_high"), est.map(|e| e.ci_high)));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let owned: Vec<String> = names.iter().map(|(n, _)| n.clone()).collect();
    header.extend(owned.iter().map(String::as_str));
    values.extend(names.iter().map(|(_, v)| v.map_or(String::new(), |x| x.to_string())));
    writer.write_record(&header)?;
    writer.write_record(&values)?;
    let bytes = writer.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate(args) => {
            let exp = args.experiment(1)?;
            let (transcript, summary) = simulate(&exp)?;
            if let Some(path) = &args.out {
                write(path, &transcript.to_json())?;
            }
            print!("{summary}");
        }
        Command::Attack(args) => {
            let mut exp = args.experiment.experiment(args.trials)?;
            exp.timing = args.timing;
            let report = attack(&exp)?;
            let text = match args.format {
                Format::Json => report.to_json() + "\n",
                Format::Csv => report_to_csv(&report)?,
            };
            emit(args.experiment.out.as_deref(), &text)?;
        }
        Command::Sweep(args) => {
            let base = args.experiment.experiment(args.trials)?;
            let spec = SweepSpec {
                base,
                parameter: args.param,
                values: args.values.clone(),
                cheater: args.experiment.cheater,
                honest: args.experiment.honest,
                code_pool: args.code_pool,
            };
            let rows = sweep(&spec)?;
            for row in rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("{}={}: {}", row.parameter, row.value, row.error.as_deref().unwrap_or_default());
            }
            emit(args.experiment.out.as_deref(), &rows_to_csv(&rows)?)?;
        }
        Command::Codes(args) => {
            let w = args.w.unwrap_or_else(|| default_weight(args.n));
            if args.d.is_some() {
                print!("{}", CodeReport::new(args.n, w, None, args.d));
                return Ok(());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(effective_seed(args.seed)?);
            let found = find_code(args.n, w, args.min_words, &mut rng, args.tries);
            let (code, params) = match found {
                Ok(found) => found,
                Err(e) => {
                    eprint!("{}", CodeReport::new(args.n, w, None, None));
                    return Err(e.into());
                }
            };
            print!("{}", CodeReport::new(args.n, w, Some(code.k()), Some(params.d)));
            let file = CodeFile::from_code(&code, w).to_json() + "\n";
            match &args.out {
                Some(path) => write(path, &file)?,
                None => print!("{file}"),
            }
        }
    }
    Ok(())
}
