//! Command-line front end: experiment parsing, execution and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use crate::environments::{build_oracle, EnvConfig, EnvKind};
use crate::error::{Error, Result};
use crate::harness::{
    run_game, tune_eta_firstorder, tune_eta_sparse, tune_eta_worstcase, LearnerConfig, RunOptions,
    RunResult, Tuning,
};
use crate::samplers::Scheme;
use crate::symlinalg::SymMatrix;

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "BANDIT_PCA_SEED";

/// Horizons of the regret-sweep preset.
pub const REGRET_SWEEP_HORIZONS: [usize; 9] = [
    1 << 8,
    1 << 9,
    1 << 10,
    1 << 11,
    1 << 12,
    1 << 13,
    1 << 14,
    1 << 15,
    1 << 16,
];

/// Dimensions of the timing preset.
pub const TIMING_DIMS: [usize; 5] = [64, 128, 256, 512, 1024];
pub const TIMING_HORIZON: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Dense,
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EnvArg {
    Rank1,
    Psd,
    Spiked,
    Static,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TuneArg {
    Worstcase,
    Sparse,
    Firstorder,
    Manual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    RegretSweep,
    Timing,
}

#[derive(Debug, Parser)]
#[command(name = "bandit-pca", version, about = "Bandit online PCA experiments")]
pub struct CliArgs {
    #[arg(long, value_enum, default_value = "sparse")]
    pub scheme: SchemeArg,
    #[arg(long, value_enum, default_value = "rank1")]
    pub env: EnvArg,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "T")]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub tune: Option<TuneArg>,
    /// Bound on the average squared Frobenius norm of the losses.
    #[arg(long)]
    pub r: Option<f64>,
    /// Bound on the comparator's cumulative loss.
    #[arg(long)]
    pub lstar: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Output CSV; stdout when absent for single runs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated `d:T` pairs.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    pub preset: Option<PresetArg>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub allow_unbounded: bool,
    #[arg(long)]
    pub probe_variance: bool,
    /// Record learner-update wallclock (makes output non-reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Skip comparator and pseudo-regret computation.
    #[arg(long)]
    pub no_regret: bool,
    /// Rank-one vectors, one per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Planted-direction strength for generated rank-one streams.
    #[arg(long, default_value_t = 0.0)]
    pub signal: f64,
    /// Spike strength; defaults to d/(4√T).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Rank of PSD losses; defaults to d.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Use level one for every PSD component.
    #[arg(long)]
    pub unit_levels: bool,
    /// Static loss matrix, rows separated by `;`, entries by `,`.
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: Option<String>,
    #[arg(long, default_value_t = crate::harness::DEFAULT_REORTHOGONALIZE_EVERY)]
    pub reorthogonalize_every: usize,
}

/// How the step size is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum TuningRule {
    Worstcase,
    Sparse { r: f64 },
    FirstOrder { lstar: f64 },
    Manual { eta: f64, gamma: f64 },
}

impl TuningRule {
    pub fn resolve(&self, d: usize, horizon: usize) -> Result<Tuning> {
        let horizon = horizon.max(2);
        match *self {
            TuningRule::Worstcase => tune_eta_worstcase(d, horizon),
            TuningRule::Sparse { r } => tune_eta_sparse(d, horizon, r),
            TuningRule::FirstOrder { lstar } => tune_eta_firstorder(d, horizon, lstar),
            TuningRule::Manual { eta, gamma } => Ok(Tuning { eta, gamma }),
        }
    }
}

/// One `(d, T)` cell of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepEntry {
    pub d: usize,
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub scheme: Scheme,
    /// Environment template; `dim`, `horizon` and `seed` are overwritten per entry.
    pub env: EnvConfig,
    pub d: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Sparse tuning without `--r` carries `r = NaN` and resolves to `r = d` per entry.
    pub tuning: TuningRule,
    pub sweep: Option<Vec<SweepEntry>>,
    pub out: Option<PathBuf>,
    pub options: RunOptions,
    pub workers: usize,
    pub reorthogonalize_every: usize,
}

impl ExperimentSpec {
    pub fn entries(&self) -> Vec<SweepEntry> {
        self.sweep.clone().unwrap_or_else(|| {
            vec![SweepEntry {
                d: self.d,
                horizon: self.horizon,
            }]
        })
    }
}

/// `"4:100,8:200"` into sweep entries.
pub fn parse_sweep(text: &str) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (d, t) = item
            .split_once(':')
            .ok_or_else(|| Error::Usage(format!("sweep entry `{item}` is not d:T")))?;
        let d: usize = d
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("bad dimension in sweep entry `{item}`")))?;
        let horizon: usize = t
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("bad horizon in sweep entry `{item}`")))?;
        if d == 0 || horizon == 0 {
            return Err(Error::Usage(format!(
                "sweep entry `{item}` must be positive"
            )));
        }
        out.push(SweepEntry { d, horizon });
    }
    if out.is_empty() {
        return Err(Error::Usage("empty sweep".into()));
    }
    Ok(out)
}

/// `"a,b;c,d"` into a symmetric matrix.
pub fn parse_matrix(text: &str) -> Result<SymMatrix> {
    let rows = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Usage(format!("bad matrix entry `{}`", x.trim())))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SymMatrix::from_rows(&rows).map_err(|e| Error::Usage(format!("--matrix: {e}")))
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn tuning_rule(args: &CliArgs) -> Result<TuningRule> {
    if args.gamma.is_some() && args.eta.is_none() {
        return Err(usage(
            "--gamma requires --eta (manual tuning is incomplete)",
        ));
    }
    let tune = match args.tune {
        Some(t) => t,
        None if args.eta.is_some() => TuneArg::Manual,
        None if args.r.is_some() => TuneArg::Sparse,
        None if args.lstar.is_some() => TuneArg::Firstorder,
        None => match args.scheme {
            SchemeArg::Dense => TuneArg::Worstcase,
            SchemeArg::Sparse => TuneArg::Sparse,
        },
    };
    let conflict =
        |flag: &str| usage(format!("{flag} conflicts with --tune {tune:?}").to_lowercase());
    if tune != TuneArg::Manual && args.eta.is_some() {
        return Err(conflict("--eta"));
    }
    if tune != TuneArg::Sparse && args.r.is_some() {
        return Err(conflict("--r"));
    }
    if tune != TuneArg::Firstorder && args.lstar.is_some() {
        return Err(conflict("--lstar"));
    }
    Ok(match tune {
        TuneArg::Worstcase => TuningRule::Worstcase,
        TuneArg::Sparse => TuningRule::Sparse {
            r: args.r.unwrap_or(f64::NAN),
        },
        TuneArg::Firstorder => TuningRule::FirstOrder {
            lstar: args
                .lstar
                .ok_or_else(|| usage("--tune firstorder requires --lstar"))?,
        },
        TuneArg::Manual => {
            let eta = args
                .eta
                .ok_or_else(|| usage("--tune manual requires --eta"))?;
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(usage(format!("--eta must be positive, got {eta}")));
            }
            TuningRule::Manual {
                eta,
                gamma: args.gamma.unwrap_or(0.0),
            }
        }
    })
}

/// Parses flags into a validated spec. `env_seed` is the value of
/// [`SEED_ENV`], when set.
pub fn spec_from_args(args: CliArgs, env_seed: Option<&str>) -> Result<ExperimentSpec> {
    let tuning = tuning_rule(&args)?;
    let seed = match env_seed {
        Some(s) => s
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV}=`{s}` is not an unsigned integer")))?,
        None => args.seed,
    };
    let scheme = match args.scheme {
        SchemeArg::Dense => Scheme::Dense,
        SchemeArg::Sparse => Scheme::Sparse,
    };

    let mut options = RunOptions {
        allow_unbounded: args.allow_unbounded,
        probe_variance: args.probe_variance,
        track_regret: !args.no_regret,
        timing: args.timing,
    };

    let sweep = match (&args.preset, &args.sweep) {
        (Some(_), Some(_)) => return Err(usage("--preset and --sweep are mutually exclusive")),
        (Some(PresetArg::RegretSweep), None) => {
            let d = args
                .d
                .ok_or_else(|| usage("--preset regret-sweep requires --d"))?;
            Some(
                REGRET_SWEEP_HORIZONS
                    .iter()
                    .map(|&horizon| SweepEntry { d, horizon })
                    .collect(),
            )
        }
        (Some(PresetArg::Timing), None) => {
            options.timing = true;
            options.track_regret = false;
            let horizon = args.horizon.unwrap_or(TIMING_HORIZON);
            Some(
                TIMING_DIMS
                    .iter()
                    .map(|&d| SweepEntry { d, horizon })
                    .collect(),
            )
        }
        (None, Some(text)) => Some(parse_sweep(text)?),
        (None, None) => None,
    };
    let (d, horizon) = match &sweep {
        Some(entries) => (entries[0].d, entries[0].horizon),
        None => (
            args.d.ok_or_else(|| usage("missing --d"))?,
            args.horizon.ok_or_else(|| usage("missing --T"))?,
        ),
    };
    if sweep.is_some() && args.out.is_none() {
        return Err(usage("sweeps need --out to name the per-entry files"));
    }
    if args.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }

    let kind = match args.env {
        EnvArg::Rank1 => EnvKind::RankOneStream,
        EnvArg::Psd => EnvKind::PsdStream,
        EnvArg::Spiked => {
            if !args.allow_unbounded {
                return Err(usage(
                    "--env spiked has unbounded losses (spectral norm may exceed 1); pass --allow-unbounded",
                ));
            }
            EnvKind::SpikedGaussian
        }
        EnvArg::Static => EnvKind::StaticMatrix(parse_matrix(
            args.matrix
                .as_deref()
                .ok_or_else(|| usage("--env static requires --matrix"))?,
        )?),
    };
    if args.input.is_some() && args.env != EnvArg::Rank1 {
        return Err(usage("--input only applies to --env rank1"));
    }
    if args.matrix.is_some() && args.env != EnvArg::Static {
        return Err(usage("--matrix only applies to --env static"));
    }
    let mut env = EnvConfig::new(kind, d, horizon, seed);
    env.epsilon = args.epsilon;
    env.rank = args.rank.unwrap_or(0);
    env.unit_levels = args.unit_levels;
    env.signal = args.signal;
    env.input = args.input.clone();

    let spec = ExperimentSpec {
        scheme,
        env,
        d,
        horizon,
        seed,
        tuning,
        sweep,
        out: args.out,
        options,
        workers: args.workers,
        reorthogonalize_every: args.reorthogonalize_every,
    };
    for entry in spec.entries() {
        entry_env(&spec, entry)
            .validate()
            .map_err(|e| usage(e.to_string()))?;
        learner_config(&spec, entry)?
            .validate()
            .map_err(|e| usage(e.to_string()))?;
    }
    Ok(spec)
}

/// Parses `argv` (program name first) with the seed override read from the
/// process environment.
pub fn parse_args<I, T>(argv: I) -> Result<ExperimentSpec>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = CliArgs::try_parse_from(argv).map_err(|e| {
        let text = e.to_string();
        usage(
            text.lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string(),
        )
    })?;
    let env_seed = std::env::var(SEED_ENV).ok();
    spec_from_args(args, env_seed.as_deref())
}

fn entry_env(spec: &ExperimentSpec, entry: SweepEntry) -> EnvConfig {
    let mut env = spec.env.clone();
    env.dim = entry.d;
    env.horizon = entry.horizon;
    env.seed = spec.seed;
    if env.rank == 0 {
        env.rank = entry.d;
    }
    env
}

fn learner_config(spec: &ExperimentSpec, entry: SweepEntry) -> Result<LearnerConfig> {
    let rule = match spec.tuning {
        TuningRule::Sparse { r } if r.is_nan() => TuningRule::Sparse { r: entry.d as f64 },
        ref other => other.clone(),
    };
    let tuning = rule.resolve(entry.d, entry.horizon)?;
    let mut cfg = LearnerConfig::with_tuning(entry.d, tuning, spec.seed);
    cfg.reorthogonalize_every = spec.reorthogonalize_every;
    Ok(cfg)
}

/// Runs one sweep entry.
pub fn run_entry(spec: &ExperimentSpec, entry: SweepEntry) -> Result<RunResult> {
    let env = entry_env(spec, entry);
    let mut oracle = build_oracle(&env)?;
    let cfg = learner_config(spec, entry)?;
    run_game(
        &cfg,
        spec.scheme,
        oracle.as_mut(),
        entry.horizon,
        spec.options,
    )
}

/// `run.csv` with `(8, 1000)` becomes `run_d8_T1000.csv`.
pub fn sweep_path(base: &Path, entry: SweepEntry) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!(
            "{stem}_d{}_T{}.{}",
            entry.d,
            entry.horizon,
            ext.to_string_lossy()
        ),
        None => format!("{stem}_d{}_T{}", entry.d, entry.horizon),
    };
    base.with_file_name(name)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_float)
}

/// Seventeen significant digits: parses back to the identical `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(result: &RunResult, probe: bool, out: &mut W) -> std::io::Result<()> {
    write!(out, "t,loss,cum_loss,branch,eta,gamma,update_ns")?;
    if probe {
        write!(out, ",mh_term,logdet_term")?;
    }
    writeln!(out)?;
    for r in &result.records {
        write!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            fmt_float(r.loss),
            fmt_float(r.cum_loss),
            r.branch,
            fmt_float(r.eta),
            fmt_float(r.gamma),
            r.update_ns
        )?;
        if probe {
            let (mh, ld) = r.probe.unwrap_or((f64::NAN, f64::NAN));
            write!(out, ",{},{}", fmt_float(mh), fmt_float(ld))?;
        }
        writeln!(out)?;
    }
    writeln!(out, "# regret_realized={}", fmt_opt(result.regret_realized))?;
    writeln!(out, "# regret_pseudo={}", fmt_opt(result.regret_pseudo))?;
    let comparator = result
        .comparator_realized
        .as_ref()
        .or(result.comparator_pseudo.as_ref())
        .map(|c| c.value);
    writeln!(out, "# comparator={}", fmt_opt(comparator))?;
    writeln!(
        out,
        "# comparator_pseudo={}",
        fmt_opt(result.comparator_pseudo.as_ref().map(|c| c.value))
    )?;
    writeln!(out, "# total_runtime_ns={}", result.total_runtime_ns)?;
    Ok(())
}

pub fn emit_csv(result: &RunResult, probe: bool, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    write_csv(result, probe, &mut w).map_err(io)?;
    w.flush().map_err(io)
}

/// One data row read back from a CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub t: usize,
    pub loss: f64,
    pub cum_loss: f64,
    pub branch: String,
    pub eta: f64,
    pub gamma: f64,
    pub update_ns: u64,
    pub probe: Option<(f64, f64)>,
}

/// `# key=value` lines in file order.
pub type Summary = Vec<(String, String)>;

/// Reads data rows and `# key=value` summary lines.
pub fn read_csv(text: &str) -> Result<(Vec<CsvRow>, Summary)> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, h)| h)
        .ok_or_else(|| Error::MalformedRow {
            line: 1,
            reason: "missing header".into(),
        })?;
    let cols = header.split(',').count();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (k, line) in lines {
        let bad = |reason: &str| Error::MalformedRow {
            line: k + 1,
            reason: reason.to_string(),
        };
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| bad("summary without `=`"))?;
            summary.push((key.to_string(), value.to_string()));
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols {
            return Err(bad("wrong field count"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad float"));
        rows.push(CsvRow {
            t: f[0].parse().map_err(|_| bad("bad trial index"))?,
            loss: num(f[1])?,
            cum_loss: num(f[2])?,
            branch: f[3].to_string(),
            eta: num(f[4])?,
            gamma: num(f[5])?,
            update_ns: f[6].parse().map_err(|_| bad("bad update_ns"))?,
            probe: if cols == 9 {
                Some((num(f[7])?, num(f[8])?))
            } else {
                None
            },
        });
    }
    Ok((rows, summary))
}

/// Runs every entry and writes its CSV. Returns the files written.
pub fn execute(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    let entries = spec.entries();
    let probe = spec.options.probe_variance;
    let Some(sweep) = &spec.sweep else {
        let result = run_entry(spec, entries[0])?;
        return match &spec.out {
            Some(path) => {
                emit_csv(&result, probe, path)?;
                Ok(vec![path.clone()])
            }
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                write_csv(&result, probe, &mut lock).map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
                Ok(Vec::new())
            }
        };
    };
    let base = spec
        .out
        .as_ref()
        .ok_or_else(|| usage("sweeps need --out"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        sweep
            .par_iter()
            .map(|&entry| {
                let path = sweep_path(base, entry);
                let result = run_entry(spec, entry)?;
                emit_csv(&result, probe, &path)?;
                Ok(path)
            })
            .collect()
    })
}

/// Full CLI behavior; returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match CliArgs::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error:usage:{first}");
            return 2;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match spec_from_args(args, env_seed.as_deref()).and_then(|spec| execute(&spec)) {
        Ok(_) => 0,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error:{}:{msg}", e.kind());
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &str) -> Result<ExperimentSpec> {
        let argv = std::iter::once("bandit-pca").chain(args.split_whitespace());
        let parsed = CliArgs::try_parse_from(argv).map_err(|e| usage(e.to_string()))?;
        spec_from_args(parsed, None)
    }

    #[test]
    fn well_formed_spec() {
        let s = parse("--scheme sparse --env rank1 --d 8 --T 10000 --tune sparse --r 1 --seed 7 --out run.csv")
            .unwrap();
        assert_eq!(s.scheme, Scheme::Sparse);
        assert_eq!((s.d, s.horizon, s.seed), (8, 10000, 7));
        assert_eq!(s.tuning, TuningRule::Sparse { r: 1.0 });
        assert_eq!(s.out, Some(PathBuf::from("run.csv")));
    }

    #[test]
    fn gamma_without_eta_is_rejected() {
        assert!(matches!(
            parse("--scheme dense --gamma 0.5 --d 3 --T 10"),
            Err(Error::Usage(m)) if m.contains("--eta")
        ));
    }

    #[test]
    fn spiked_needs_opt_in() {
        match parse("--env spiked --d 3 --T 10") {
            Err(Error::Usage(m)) => assert!(m.contains("spectral norm")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("--env spiked --d 3 --T 10 --allow-unbounded").is_ok());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("--d 3").is_err());
        assert!(parse("--T 3").is_err());
        assert!(parse("--d 3 --T 10 --bogus").is_err());
        assert!(parse("--d 3 --T 10 --tune worstcase --eta 0.1").is_err());
        assert!(parse("--d 3 --T 10 --tune worstcase --r 1").is_err());
        assert!(parse("--d 3 --T 10 --tune firstorder").is_err());
        assert!(parse("--d 3 --T 10 --tune manual").is_err());
        assert!(parse("--d 3 --T 10 --eta -1").is_err());
        assert!(parse("--d 3 --T 10 --tune sparse --r 4").is_err());
        assert!(parse("--d 3 --T 10 --sweep 3:10").is_err());
        assert!(parse("--d 2 --T 10 --env static --matrix 1,2;2,1").is_err());
        assert!(parse("--d 2 --T 10 --env static").is_err());
        assert!(parse("--sweep 0:10 --out x.csv").is_err());
    }

    #[test]
    fn tuning_defaults() {
        assert_eq!(
            parse("--scheme dense --d 3 --T 10").unwrap().tuning,
            TuningRule::Worstcase
        );
        let s = parse("--scheme dense --d 3 --T 10 --eta 0.01 --gamma 0.2").unwrap();
        assert_eq!(
            s.tuning,
            TuningRule::Manual {
                eta: 0.01,
                gamma: 0.2
            }
        );
        let s = parse("--d 3 --T 10 --lstar 5").unwrap();
        assert_eq!(s.tuning, TuningRule::FirstOrder { lstar: 5.0 });
    }

    #[test]
    fn seed_override() {
        let argv = ["bandit-pca", "--d", "3", "--T", "5", "--seed", "1"];
        let s = spec_from_args(CliArgs::try_parse_from(argv).unwrap(), Some("42")).unwrap();
        assert_eq!(s.seed, 42);
        assert!(spec_from_args(CliArgs::try_parse_from(argv).unwrap(), Some("x")).is_err());
    }

    #[test]
    fn sweep_parsing_and_paths() {
        let e = parse_sweep("4:100, 8:200").unwrap();
        assert_eq!(
            e,
            vec![
                SweepEntry { d: 4, horizon: 100 },
                SweepEntry { d: 8, horizon: 200 }
            ]
        );
        assert!(parse_sweep("4-100").is_err());
        assert_eq!(
            sweep_path(Path::new("/tmp/run.csv"), e[1]),
            PathBuf::from("/tmp/run_d8_T200.csv")
        );
        assert_eq!(
            sweep_path(Path::new("out"), e[0]),
            PathBuf::from("out_d4_T100")
        );
    }

    #[test]
    fn presets_expand() {
        let s = parse("--preset regret-sweep --d 5 --out r.csv").unwrap();
        let e = s.entries();
        assert_eq!(e.len(), 9);
        assert_eq!(e[0].horizon, 256);
        assert_eq!(e[8].horizon, 65536);
        let s = parse("--preset timing --out t.csv").unwrap();
        assert!(s.options.timing);
        assert_eq!(s.entries().last().unwrap().d, 1024);
    }

    #[test]
    fn matrix_parsing() {
        let m = parse_matrix("0.5, 0.1; 0.1, -0.2").unwrap();
        assert_eq!(m.get(0, 1), 0.1);
        assert!(parse_matrix("1,2;3").is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
    }
}
