use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aoi_grr::config::{Config, ConfigError};
use aoi_grr::mc::{self, McError, Target};
use aoi_grr::sweep::{self, SweepError};
use aoi_grr_core::bounds::{ipq, spq};
use aoi_grr_core::{BoundError, Discipline, IterationSchedule, Query, SourceId, SystemSpec};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(version, about = "Peak age of information under generalized round-robin scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Disc {
    Ipq,
    Spq,
}

impl From<Disc> for Discipline {
    fn from(d: Disc) -> Self {
        match d {
            Disc::Ipq => Discipline::Ipq,
            Disc::Spq => Discipline::Spq,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the service order of the first rounds.
    Schedule {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        rounds: u64,
    },
    /// Simulate and write a per-update trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        discipline: Disc,
        #[arg(long)]
        iterations: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the analytic bound for one source and update.
    Bound {
        #[arg(long, value_enum)]
        discipline: Disc,
        #[arg(long)]
        config: PathBuf,
        /// Source as `g,i` with groups numbered as in the configuration.
        #[arg(long, value_parser = parse_source)]
        source: (usize, usize),
        #[arg(long)]
        k: u64,
        #[arg(long)]
        x: f64,
        /// Report the n → ∞ decay-rate bounds instead of a probability.
        #[arg(long)]
        limit_n: bool,
        /// Slack added to the lower-bound exponent.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Monte Carlo estimate of a violation probability.
    Estimate {
        #[arg(long, value_enum)]
        discipline: Disc,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_source)]
        source: (usize, usize),
        /// Update index; omit together with `--longrun`.
        #[arg(long, required_unless_present = "longrun")]
        k: Option<u64>,
        #[arg(long)]
        x: f64,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        /// Time-average over one long run instead of a fixed update.
        #[arg(long)]
        longrun: bool,
        /// Iterations of the long run.
        #[arg(long, default_value_t = 20_000)]
        iterations: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the sweep described by a preset and write CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn parse_source(s: &str) -> Result<(usize, usize), String> {
    let (g, i) = s.split_once(',').ok_or("expected g,i")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((parse(g)?, parse(i)?))
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sim(#[from] aoi_grr_core::SimError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Sweep(SweepError::Config(_) | SweepError::MissingSweep | SweepError::Invalid(_)) => 2,
            CliError::Bound(BoundError::Model(_)) => 2,
            CliError::Mc(McError::Model(_)) => 2,
            _ => 3,
        }
    }
}

fn output(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(path: &Path) -> Result<(Config, SystemSpec), CliError> {
    let cfg = Config::load(path)?;
    let spec = cfg.system()?;
    Ok((cfg, spec))
}

fn source_id(spec: &SystemSpec, (g, i): (usize, usize)) -> Result<SourceId, CliError> {
    if g == 0 {
        return Err(CliError::Usage("groups are numbered from 1".into()));
    }
    let s = SourceId::new(spec.internal_group(g), i);
    spec.check_source(s).map_err(|e| CliError::Config(e.into()))?;
    Ok(s)
}

fn label(spec: &SystemSpec, s: SourceId) -> String {
    match spec.user_group(s.g) {
        Some(g) => format!("({g},{})", s.i),
        None => "(virtual)".into(),
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Schedule { config, rounds } => {
            let (_, spec) = load(&config)?;
            let sched = IterationSchedule::build(&spec);
            let rounds = if rounds == 0 { sched.d_tilde() } else { rounds };
            let mut out = output(None)?;
            writeln!(out, "# d_tilde = {}", sched.d_tilde())?;
            for r in 0..rounds {
                let slots: Vec<String> = sched.round(r).iter().map(|s| label(&spec, *s)).collect();
                writeln!(out, "{r}: {}", slots.join(" "))?;
            }
            out.flush()?;
        }
        Command::Simulate { config, discipline, iterations, seed, out } => {
            let (cfg, spec) = load(&config)?;
            let seed = match seed {
                Some(s) => s,
                None => cfg.seed()?,
            };
            let sched = IterationSchedule::build(&spec);
            let trace = aoi_grr_core::sim::simulate(
                &spec,
                &sched,
                discipline.into(),
                iterations,
                rand_chacha_rng(seed),
            )?;
            let mut w = csv::Writer::from_writer(output(out.as_ref())?);
            w.write_record(["g", "i", "k", "S_prev", "D", "A", "W", "V", "preempted"])?;
            for s in trace.slots.iter().filter(|s| !s.is_virtual) {
                let g = spec.user_group(s.source.g).unwrap_or(s.source.g);
                w.write_record([
                    g.to_string(),
                    s.source.i.to_string(),
                    s.k.to_string(),
                    s.s_prev.to_string(),
                    s.departure.to_string(),
                    s.peak_age().to_string(),
                    s.waiting().to_string(),
                    s.service.to_string(),
                    s.preempted.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Command::Bound { discipline, config, source, k, x, limit_n, epsilon } => {
            let (_, spec) = load(&config)?;
            let sched = IterationSchedule::build(&spec);
            let q = Query::new(source_id(&spec, source)?, k, x);
            let mut out = output(None)?;
            writeln!(out, "exponent,prefactor,probability,argmin_ell,theta_star,lb_exponent,lb_probability")?;
            let row = match (Discipline::from(discipline), limit_n) {
                (Discipline::Ipq, false) => {
                    let u = ipq::theorem1_upper(&spec, &sched, &q)?;
                    let l = ipq::theorem2_lower(&spec, &sched, &q, epsilon)?;
                    [Some(u.exponent), Some(u.prefactor), Some(u.probability), Some(u.argmin_ell as f64), Some(u.theta_star), Some(l.exponent), Some(l.probability)]
                }
                (Discipline::Ipq, true) => {
                    let r = ipq::corollary1_asymptotic(&spec, &sched, &q)?;
                    [Some(r.at_least.value), None, None, Some(r.at_least.argmin_ell as f64), Some(r.at_least.theta_star), Some(r.at_most.value + epsilon), None]
                }
                (Discipline::Spq, false) => {
                    let u = spq::theorem3_upper(&spec, &sched, &q)?;
                    [Some(u.exponent), Some(u.prefactor), Some(u.probability), Some(0.0), Some(u.theta_star), None, None]
                }
                (Discipline::Spq, true) => {
                    let e = spq::corollary6_asymptotic(&spec, &sched, &q)?;
                    [Some(e.value), None, None, Some(0.0), Some(e.theta_star), None, None]
                }
            };
            let cells: Vec<String> = row.into_iter().map(num).collect();
            writeln!(out, "{}", cells.join(","))?;
            out.flush()?;
        }
        Command::Estimate { discipline, config, source, k, x, reps, longrun, iterations, seed, threads } => {
            let (cfg, spec) = load(&config)?;
            let seed = match seed {
                Some(s) => s,
                None => cfg.seed()?,
            };
            let sched = IterationSchedule::build(&spec);
            let source = source_id(&spec, source)?;
            let threshold = spec.scale() * x;
            let est = if longrun {
                mc::estimate_longrun_fraction(&spec, &sched, discipline.into(), source, threshold, iterations, seed)?
            } else {
                let target = Target { source, k: k.unwrap_or(1), threshold };
                mc::with_threads(threads, || {
                    mc::estimate_violation(&spec, &sched, discipline.into(), &[target], reps, seed)
                })??[0]
            };
            let mut out = output(None)?;
            writeln!(out, "p_hat,ci_low,ci_high,reps")?;
            writeln!(out, "{},{},{},{}", est.p_hat, est.ci_low, est.ci_high, est.reps)?;
            if est.below_resolution {
                eprintln!("no violations observed: below resolution, upper limit {}", est.ci_high);
            }
            out.flush()?;
        }
        Command::Sweep { config, out, seed, threads } => {
            let cfg = Config::load(&config)?;
            let seed = match seed {
                Some(s) => s,
                None => cfg.seed()?,
            };
            let rows = mc::with_threads(threads, || sweep::run_sweep(&cfg, seed))??;
            sweep::write_csv(&rows, output(out.as_ref())?)?;
        }
    }
    Ok(())
}

fn rand_chacha_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
