use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kwise_probing::adversary::{self, AdversaryInstance, Multiplier, PairProtocol, Sampling};
use kwise_probing::bounds;
use kwise_probing::field_hash::FamilyKind;
use kwise_probing::harness::{self, trial_rng, ExperimentSpec};
use kwise_probing::verify::Suite;

#[derive(Parser)]
#[command(
    name = "kwprobe",
    version,
    about = "Probing tables under limited-independence hashing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments described by a JSON config.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
    /// Insert the adversarial key set with a pairwise family; one CSV row per trial.
    Adversary {
        /// Comma-separated log2 table sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        log_r: Vec<u32>,
        /// Trials per size; defaults to 200, or p - 1 with stratified multipliers.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, value_enum, default_value_t = PairwiseFamily::Cw)]
        family: PairwiseFamily,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Use the worst of all 28 part pairs instead of a random pair per trial.
        #[arg(long)]
        worst_pair: bool,
        #[arg(long, value_enum, default_value_t = MultiplierArg::Uniform)]
        multiplier: MultiplierArg,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the analytic bounds as CSV.
    Bounds {
        #[arg(long, value_delimiter = ',', required = true)]
        alpha_grid: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    /// Run self-check suites; exits nonzero if any check fails.
    Verify {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "moments,lemma2,pairwise,differential"
        )]
        suite: Vec<String>,
    },
}

#[derive(Subcommand)]
enum ExperimentAction {
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MultiplierArg {
    /// Draw a with the rest of the function.
    Uniform,
    /// Trial t uses a = (1 + t mod (p - 1))^-1.
    Stratified,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairwiseFamily {
    Cw,
    Star,
}

impl From<PairwiseFamily> for FamilyKind {
    fn from(f: PairwiseFamily) -> Self {
        match f {
            PairwiseFamily::Cw => FamilyKind::Cw,
            PairwiseFamily::Star => FamilyKind::Star,
        }
    }
}

type BoxResult<T> = Result<T, Box<dyn std::error::Error>>;

fn output(path: Option<&PathBuf>) -> BoxResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

struct AdversaryArgs<'a> {
    log_r: &'a [u32],
    trials: Option<u64>,
    family: FamilyKind,
    seed: u64,
    worst_pair: bool,
    multiplier: Multiplier,
    out: Option<&'a PathBuf>,
}

fn run_adversary(args: AdversaryArgs<'_>) -> BoxResult<()> {
    let AdversaryArgs {
        log_r,
        trials,
        family,
        seed,
        worst_pair,
        multiplier,
        out,
    } = args;
    let mut w = csv::Writer::from_writer(output(out)?);
    w.write_record(adversary::CSV_HEADER)?;
    for &lr in log_r {
        let p = adversary::modulus_for_log_r(lr)?;
        let instance = AdversaryInstance::build(p, None, &mut trial_rng(seed, u64::MAX))?;
        let trials = trials.unwrap_or(match multiplier {
            Multiplier::Uniform => 200,
            Multiplier::Stratified => p.get() - 1,
        });
        let stats = if worst_pair {
            let (pair, stats) =
                adversary::measure_worst_pair(&instance, family, trials, seed, multiplier)?;
            eprintln!("r = {}: worst pair {pair:?}", instance.r());
            stats
        } else {
            let sampling = Sampling {
                pair: PairProtocol::Randomized,
                multiplier,
            };
            adversary::measure_cost(&instance, family, trials, seed, sampling)?
        };
        eprintln!(
            "r = {}: mean total steps {:.1} (std {:.1}, {} trials)",
            instance.r(),
            stats.mean_total_steps,
            stats.std,
            trials
        );
        stats.write_csv(instance.r(), &mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn run_bounds(alphas: &[f64], eps: f64) -> BoxResult<()> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["alpha", "eps", "T", "U", "I", "D", "S", "eq1"])?;
    let fmt =
        |v: Result<f64, bounds::BoundsError>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for &alpha in alphas {
        let t = bounds::t_alpha_eps(alpha, eps)?;
        let b = bounds::theorem4_bounds(alpha, eps)?;
        w.write_record([
            format!("{alpha:.6}"),
            format!("{eps:.6}"),
            format!("{t:.6}"),
            format!("{:.6}", b.unsuccessful),
            format!("{:.6}", b.insert),
            format!("{:.6}", b.delete),
            format!("{:.6}", b.successful),
            fmt(bounds::full_independence_unsuccessful_bound(alpha)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> BoxResult<bool> {
    match cli.command {
        Command::Experiment {
            action: ExperimentAction::Run { config, out },
        } => {
            let spec = ExperimentSpec::from_path(&config)?;
            let results = harness::run_experiment(&spec)?;
            harness::emit_csv(&spec, &results, BufWriter::new(File::create(&out)?))?;
            Ok(true)
        }
        Command::Adversary {
            log_r,
            trials,
            family,
            seed,
            worst_pair,
            multiplier,
            out,
        } => {
            run_adversary(AdversaryArgs {
                log_r: &log_r,
                trials,
                family: family.into(),
                seed,
                worst_pair,
                multiplier: match multiplier {
                    MultiplierArg::Uniform => Multiplier::Uniform,
                    MultiplierArg::Stratified => Multiplier::Stratified,
                },
                out: out.as_ref(),
            })?;
            Ok(true)
        }
        Command::Bounds { alpha_grid, eps } => {
            run_bounds(&alpha_grid, eps)?;
            Ok(true)
        }
        Command::Verify { suite } => {
            let suites = if suite.iter().any(|s| s == "all") {
                Suite::ALL.to_vec()
            } else {
                suite
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<Vec<Suite>, _>>()?
            };
            let mut ok = true;
            for s in suites {
                for check in s.run() {
                    println!("[{s}] {check}");
                    ok &= check.passed;
                }
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
