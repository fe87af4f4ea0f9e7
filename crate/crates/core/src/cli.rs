//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or precondition error, 3 optimizer or
//! iteration non-convergence, 4 I/O failure.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ensemble::{make_signal_set, SignalEnsemble};
use crate::error::Error;
use crate::experiment::{simulate_counts, sweep_offset, write_records_csv, SweepConfig, SweepResult};
use crate::info::{
    accessible_information, blahut_arimoto, c1_alternating, mutual_information, OptimizerOptions,
    ProbabilityVector,
};
use crate::interferometer::{imperfect_rates, ImperfectionParams, MzSetting};
use crate::pom::{channel_matrix, davies_pom, min_error_pom, projective_pom, ChannelMatrix, Pom};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "pomkit", version, about = "Optimal detection of symmetric polarization signals")]
pub struct Cli {
    /// Emit JSON instead of a table.
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,
    /// Emit CSV instead of a table.
    #[arg(long, global = true)]
    pub csv: bool,
    /// TOML or JSON file with default parameters; flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write output to a file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the channel matrix of a measurement on the signal set.
    Channel(ChannelArgs),
    /// Information quantities.
    #[command(subcommand)]
    Info(InfoCommand),
    /// Mutual information against the offset angle.
    Sweep(SweepArgs),
    /// Simulated raw counts for one offset angle, as CSV records.
    Counts(CountsArgs),
}

#[derive(Debug, Args, Clone, Default)]
#[command(group(ArgGroup::new("selector").args(["m", "minerr", "phi"])))]
pub struct Selection {
    /// Number of letter states.
    #[arg(long = "M", value_name = "M")]
    pub letters: Option<usize>,
    /// Three-outcome POM parameter, M/4 < m < M/2.
    #[arg(long = "m", allow_negative_numbers = true)]
    pub m: Option<i64>,
    /// Use the minimum-error (square-root) POM.
    #[arg(long)]
    pub minerr: bool,
    /// Use the projective measurement at this angle (radians).
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    /// Offset angle of the signal set (radians).
    #[arg(long, allow_negative_numbers = true)]
    pub theta0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    #[command(flatten)]
    pub sel: Selection,
    /// Decimal places in table and CSV output.
    #[arg(long, default_value_t = 3)]
    pub precision: usize,
}

#[derive(Debug, Args, Clone, Default)]
pub struct OptimizerArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum InfoCommand {
    /// Mutual information of a fixed measurement.
    Mi {
        #[command(flatten)]
        sel: Selection,
        /// Channel matrix CSV instead of a measurement.
        #[arg(long, value_name = "PATH")]
        channel: Option<PathBuf>,
        /// Comma-separated prior probabilities (default uniform).
        #[arg(long, value_delimiter = ',')]
        priors: Option<Vec<f64>>,
    },
    /// Accessible information by numerical optimization over POMs.
    Access {
        #[arg(long = "M", value_name = "M")]
        letters: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        theta0: Option<f64>,
        #[arg(long)]
        outputs: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        priors: Option<Vec<f64>>,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Capacity of a classical channel by Blahut–Arimoto.
    Capacity {
        #[command(flatten)]
        sel: Selection,
        #[arg(long, value_name = "PATH")]
        channel: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Lower bound on the capacity over both priors and POMs.
    C1 {
        #[arg(long = "M", value_name = "M")]
        letters: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        theta0: Option<f64>,
        #[arg(long)]
        outputs: Option<usize>,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
}

#[derive(Debug, Args, Clone, Default)]
pub struct ImperfectionArgs {
    /// Use bench imperfections (the default when simulating).
    #[arg(long, conflicts_with_all = ["perfect", "ideal_only"])]
    pub nominal: bool,
    /// Simulate counting with perfect optics and no dark or background counts.
    #[arg(long, conflicts_with = "ideal_only")]
    pub perfect: bool,
    #[arg(long)]
    pub visibility: Option<f64>,
    #[arg(long)]
    pub extinction: Option<f64>,
    #[arg(long = "dark-rate")]
    pub dark_rate: Option<f64>,
    #[arg(long = "background-rate")]
    pub background_rate: Option<f64>,
    #[arg(long)]
    pub flux: Option<f64>,
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Subtract this rate (counts/s) from every port before forming ratios.
    #[arg(long = "subtract-background")]
    pub subtract_background: Option<f64>,
    /// Counting window in seconds.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exact curve only; no counting simulation.
    #[arg(long = "ideal-only")]
    pub ideal_only: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "M", value_name = "M")]
    pub letters: Option<usize>,
    #[arg(long = "m", allow_negative_numbers = true)]
    pub m: Option<i64>,
    /// Grid step in radians (default π/90).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub end: Option<f64>,
    #[command(flatten)]
    pub imp: ImperfectionArgs,
    /// Also write a gnuplot script next to the output file.
    #[arg(long = "plot-script", requires = "out")]
    pub plot_script: bool,
}

#[derive(Debug, Args)]
pub struct CountsArgs {
    #[arg(long = "M", value_name = "M")]
    pub letters: Option<usize>,
    #[arg(long = "m", allow_negative_numbers = true)]
    pub m: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta0: Option<f64>,
    #[command(flatten)]
    pub imp: ImperfectionArgs,
}

/// Defaults read from `--config`. Every key is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "M")]
    pub letters: Option<usize>,
    pub m: Option<i64>,
    pub theta0: Option<f64>,
    pub phi: Option<f64>,
    pub outputs: Option<usize>,
    pub priors: Option<Vec<f64>>,
    pub step: Option<f64>,
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub window: Option<f64>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub subtract_background: Option<f64>,
    pub optimizer: Option<OptimizerOptions>,
    pub imperfections: Option<ImperfectionParams>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|x| x.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Convergence(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Convergence(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. } => CliError::Convergence(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Table,
    Json,
    Csv,
}

struct Ctx {
    format: Format,
    file: FileConfig,
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let format = if cli.json {
        Format::Json
    } else if cli.csv {
        Format::Csv
    } else {
        Format::Table
    };
    let ctx = Ctx { format, file, out: cli.out };
    match cli.command {
        Command::Channel(a) => cmd_channel(&ctx, a, stdout),
        Command::Info(i) => cmd_info(&ctx, i, stdout, stderr),
        Command::Sweep(a) => cmd_sweep(&ctx, a, stdout),
        Command::Counts(a) => cmd_counts(&ctx, a, stdout),
    }
}

fn emit(ctx: &Ctx, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &ctx.out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing required {flag}")))
}

enum Measurement {
    Davies(i64),
    MinError,
    Projective(f64),
}

impl Measurement {
    fn pom(&self, letters: usize) -> Result<Pom, CliError> {
        Ok(match *self {
            Measurement::Davies(m) => davies_pom(letters, m)?,
            Measurement::MinError => min_error_pom(letters)?,
            Measurement::Projective(phi) => projective_pom(phi),
        })
    }

    fn describe(&self) -> serde_json::Value {
        match *self {
            Measurement::Davies(m) => json!({"kind": "davies", "m": m}),
            Measurement::MinError => json!({"kind": "minerr"}),
            Measurement::Projective(phi) => json!({"kind": "projective", "phi": phi}),
        }
    }
}

struct Resolved {
    ensemble: SignalEnsemble,
    measurement: Measurement,
    pom: Pom,
    channel: ChannelMatrix,
}

fn resolve_selection(ctx: &Ctx, sel: &Selection, priors: Option<Vec<f64>>) -> Result<Resolved, CliError> {
    let letters = need(sel.letters.or(ctx.file.letters), "--M")?;
    let theta0 = sel.theta0.or(ctx.file.theta0).unwrap_or(0.0);
    let measurement = if let Some(m) = sel.m {
        Measurement::Davies(m)
    } else if sel.minerr {
        Measurement::MinError
    } else if let Some(phi) = sel.phi {
        Measurement::Projective(phi)
    } else if let Some(m) = ctx.file.m {
        Measurement::Davies(m)
    } else if let Some(phi) = ctx.file.phi {
        Measurement::Projective(phi)
    } else {
        return Err(CliError::Usage("one of --m, --minerr or --phi is required".into()));
    };
    let priors = priors.or_else(|| ctx.file.priors.clone());
    let ensemble = make_signal_set(letters, theta0, priors)?;
    let pom = measurement.pom(letters)?;
    let channel = channel_matrix(&ensemble, &pom)?;
    Ok(Resolved { ensemble, measurement, pom, channel })
}

fn channel_table(ch: &ChannelMatrix, precision: usize) -> String {
    let width = precision + 4;
    let mut s = String::new();
    let _ = write!(s, "{:>4}", "");
    for j in 0..ch.cols() {
        let _ = write!(s, "{:>width$}", format!("y{j}"));
    }
    s.push('\n');
    for i in 0..ch.rows() {
        let _ = write!(s, "{:>4}", format!("x{i}"));
        for x in ch.row(i) {
            let _ = write!(s, "{x:>width$.precision$}");
        }
        s.push('\n');
    }
    s
}

fn cmd_channel(ctx: &Ctx, a: ChannelArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let r = resolve_selection(ctx, &a.sel, None)?;
    let text = match ctx.format {
        Format::Table => channel_table(&r.channel, a.precision),
        Format::Csv => {
            let mut buf = Vec::new();
            r.channel.write_csv(&mut buf, a.precision).map_err(|e| CliError::Io(e.to_string()))?;
            String::from_utf8(buf).expect("csv output is utf-8")
        }
        Format::Json => to_json(&json!({
            "ensemble": r.ensemble,
            "measurement": r.measurement.describe(),
            "pom": r.pom,
            "channel": r.channel,
        })),
    };
    emit(ctx, &text, stdout)?;
    Ok(EXIT_OK)
}

fn to_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn optimizer_options(ctx: &Ctx, a: &OptimizerArgs) -> OptimizerOptions {
    let base = ctx.file.optimizer.unwrap_or_default();
    OptimizerOptions {
        tol: a.tol.unwrap_or(base.tol),
        restarts: a.restarts.unwrap_or(base.restarts),
        seed: a.seed.or(ctx.file.seed).unwrap_or(base.seed),
        max_iter: a.max_iter.unwrap_or(base.max_iter),
    }
}

fn scalar_text(ctx: &Ctx, bits: f64, extra: serde_json::Value) -> String {
    match ctx.format {
        Format::Json => {
            let mut v = extra;
            v["bits"] = json!(bits);
            to_json(&v)
        }
        Format::Csv => format!("bits\n{bits:.9}\n"),
        Format::Table => format!("{bits:.6}\n"),
    }
}

fn read_channel(path: &Path) -> Result<ChannelMatrix, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(ChannelMatrix::read_csv(f)?)
}

fn cmd_info(ctx: &Ctx, cmd: InfoCommand, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        InfoCommand::Mi { sel, channel, priors } => {
            let (ch, pri, extra) = match channel {
                Some(path) => {
                    let ch = read_channel(&path)?;
                    let pri = match priors.or_else(|| ctx.file.priors.clone()) {
                        Some(p) => ProbabilityVector::new(p)?,
                        None => ProbabilityVector::uniform(ch.rows()),
                    };
                    (ch, pri, json!({}))
                }
                None => {
                    let r = resolve_selection(ctx, &sel, priors)?;
                    let pri = ProbabilityVector::new(r.ensemble.priors().to_vec())?;
                    let extra = json!({"measurement": r.measurement.describe(), "pom": r.pom});
                    (r.channel, pri, extra)
                }
            };
            let bits = mutual_information(&ch, &pri)?;
            let mut extra = extra;
            extra["priors"] = json!(pri);
            emit(ctx, &scalar_text(ctx, bits, extra), stdout)?;
            Ok(EXIT_OK)
        }
        InfoCommand::Access { letters, theta0, outputs, priors, opt } => {
            let letters = need(letters.or(ctx.file.letters), "--M")?;
            let theta0 = theta0.or(ctx.file.theta0).unwrap_or(0.0);
            let n = outputs.or(ctx.file.outputs).unwrap_or(3);
            let e = make_signal_set(letters, theta0, priors.or_else(|| ctx.file.priors.clone()))?;
            let opts = optimizer_options(ctx, &opt);
            let r = accessible_information(&e, n, &opts)?;
            let extra = json!({
                "pom": r.pom,
                "priors": e.priors(),
                "iterations": r.iterations,
                "converged": r.converged,
                "options": opts,
            });
            emit(ctx, &scalar_text(ctx, r.mutual_info, extra), stdout)?;
            if !r.converged {
                let _ = writeln!(stderr, "warning: optimizer did not converge to tol {:e}", opts.tol);
                return Ok(EXIT_CONVERGENCE);
            }
            Ok(EXIT_OK)
        }
        InfoCommand::Capacity { sel, channel, tol } => {
            let ch = match channel {
                Some(path) => read_channel(&path)?,
                None => resolve_selection(ctx, &sel, None)?.channel,
            };
            let tol = tol.or(ctx.file.optimizer.map(|o| o.tol)).unwrap_or(1e-10);
            let r = blahut_arimoto(&ch, tol)?;
            let extra = json!({"priors": r.priors, "iterations": r.iterations, "gap": r.gap});
            emit(ctx, &scalar_text(ctx, r.capacity, extra), stdout)?;
            Ok(EXIT_OK)
        }
        InfoCommand::C1 { letters, theta0, outputs, opt } => {
            let letters = need(letters.or(ctx.file.letters), "--M")?;
            let theta0 = theta0.or(ctx.file.theta0).unwrap_or(0.0);
            let n = outputs.or(ctx.file.outputs).unwrap_or(3);
            let e = make_signal_set(letters, theta0, ctx.file.priors.clone())?;
            let opts = optimizer_options(ctx, &opt);
            let r = c1_alternating(&e, n, &opts)?;
            let extra = json!({
                "priors": r.priors,
                "pom": r.pom,
                "rounds": r.rounds,
                "converged": r.converged,
                "lower_bound": true,
            });
            emit(ctx, &scalar_text(ctx, r.bits, extra), stdout)?;
            if !r.converged {
                let _ = writeln!(stderr, "warning: alternating maximization did not converge");
                return Ok(EXIT_CONVERGENCE);
            }
            Ok(EXIT_OK)
        }
    }
}

fn imperfections(ctx: &Ctx, a: &ImperfectionArgs) -> ImperfectionParams {
    let base = if a.perfect {
        ImperfectionParams::ideal()
    } else if a.nominal {
        ImperfectionParams::nominal()
    } else {
        ctx.file.imperfections.unwrap_or_default()
    };
    ImperfectionParams {
        visibility: a.visibility.unwrap_or(base.visibility),
        extinction: a.extinction.unwrap_or(base.extinction),
        dark_rate: a.dark_rate.unwrap_or(base.dark_rate),
        background_rate: a.background_rate.unwrap_or(base.background_rate),
        flux: a.flux.unwrap_or(base.flux),
        coupling: a.coupling.unwrap_or(base.coupling),
    }
}

fn sweep_config(ctx: &Ctx, a: &SweepArgs) -> Result<SweepConfig, CliError> {
    let d = SweepConfig::default();
    let f = &ctx.file;
    Ok(SweepConfig {
        letters: need(a.letters.or(f.letters), "--M")?,
        m: need(a.m.or(f.m), "--m")?,
        start: a.start.or(f.start).unwrap_or(d.start),
        end: a.end.or(f.end).unwrap_or(d.end),
        step: a.step.or(f.step).unwrap_or(d.step),
        imperfections: imperfections(ctx, &a.imp),
        window: a.imp.window.or(f.window).unwrap_or(d.window),
        repeats: a.imp.repeats.or(f.repeats).unwrap_or(d.repeats),
        seed: a.imp.seed.or(f.seed).unwrap_or(d.seed),
        subtract_background: a.imp.subtract_background.or(f.subtract_background),
        ideal_only: a.imp.ideal_only,
        von_neumann_grid: d.von_neumann_grid,
    })
}

fn sweep_table(r: &SweepResult) -> String {
    let mut s = format!(
        "{:>10} {:>10} {:>10} {:>10} {:>14}\n",
        "theta0", "mi_mean", "mi_std", "ideal_mi", "von_neumann_mi"
    );
    for k in 0..r.len() {
        let _ = writeln!(
            s,
            "{:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>14.6}",
            r.theta0_grid[k], r.mi_mean[k], r.mi_std[k], r.ideal_mi[k], r.von_neumann_mi[k]
        );
    }
    s
}

fn gnuplot_script(data: &Path, json_data: bool, cfg: &SweepConfig) -> String {
    let name = data.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let note = if json_data {
        "# the data file is JSON; rerun with --csv to plot it directly\n"
    } else {
        ""
    };
    format!(
        "{note}set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'theta0 (rad)'\n\
         set ylabel 'mutual information (bits)'\n\
         set title 'M = {}, m = {}'\n\
         plot '{name}' using 1:2:3 with yerrorbars title 'simulated', \\\n\
         \x20    '' using 1:4 with lines title 'ideal', \\\n\
         \x20    '' using 1:5 with lines dashtype 2 title 'von Neumann'\n",
        cfg.letters, cfg.m
    )
}

fn cmd_sweep(ctx: &Ctx, a: SweepArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = sweep_config(ctx, &a)?;
    if cfg.step > PI {
        return Err(CliError::Usage(format!("step {} exceeds π", cfg.step)));
    }
    let r = sweep_offset(&cfg)?;
    let csv_text = || -> Result<String, CliError> {
        let mut buf = Vec::new();
        r.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    };
    let text = match (ctx.format, &ctx.out) {
        (Format::Json, _) => to_json(&json!({"config": cfg, "result": r})),
        (Format::Csv, _) | (Format::Table, Some(_)) => csv_text()?,
        (Format::Table, None) => sweep_table(&r),
    };
    emit(ctx, &text, stdout)?;
    if a.plot_script {
        let out = ctx.out.as_ref().expect("clap enforces --out");
        let script = out.with_extension("gp");
        fs::write(&script, gnuplot_script(out, ctx.format == Format::Json, &cfg))
            .map_err(|e| CliError::Io(format!("{}: {e}", script.display())))?;
    }
    Ok(EXIT_OK)
}

fn cmd_counts(ctx: &Ctx, a: CountsArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let f = &ctx.file;
    let letters = need(a.letters.or(f.letters), "--M")?;
    let m = need(a.m.or(f.m), "--m")?;
    let theta0 = a.theta0.or(f.theta0).unwrap_or(0.0);
    let imp = imperfections(ctx, &a.imp);
    let e = make_signal_set(letters, theta0, None)?;
    let gamma = MzSetting::for_design(letters, m)?.gamma;
    let rates: Vec<Vec<f64>> = imperfect_rates(&e, gamma, &imp)?.iter().map(|r| r.to_vec()).collect();
    let window = a.imp.window.or(f.window).unwrap_or(1.0);
    let repeats = a.imp.repeats.or(f.repeats).unwrap_or(5);
    let seed = a.imp.seed.or(f.seed).unwrap_or(0);
    let records = simulate_counts(&rates, window, repeats, seed)?;
    let text = if ctx.format == Format::Json {
        to_json(&json!(records))
    } else {
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(buf).expect("csv output is utf-8")
    };
    emit(ctx, &text, stdout)?;
    Ok(EXIT_OK)
}
