use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use droem_core::cutoff::{nonlinear_sl2_probe, CutoffSpec};
use droem_core::qpft::{lie_identity_suite, IdentityReport};
use droem_core::render::compose_fibers;
use droem_core::session::server::{serve, ServeOptions};
use droem_core::session::{replay, run_scripted, GazeEvent, RunRecord, RunStatus, Runner, SessionConfig};
use droem_core::symmetries::{
    asymptotic_scan, defect, extended_generator, group_law_residual, to_orthonormal_frame, GeneratorKind,
    GroupLawReport, ScanResult,
};
use droem_core::{make_module, DroemError, Rational, ScalarMode};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "droem", version, about = "Truncated Verma module checks and gaze-steered image sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scripted session from a config and an ND-JSON gaze trajectory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep stepping (holding the last gaze) until this time.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Verify the sl(2) and W1 commutation relations exactly.
    CheckAlgebra {
        #[arg(long)]
        h: Rational,
        #[arg(long)]
        trunc: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Probe the nonlinear sl(2) relations of the cut-off operators.
    CheckCutoff {
        #[arg(long)]
        h: Rational,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        trunc: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Scan extension defects over a grid of weights and truncations.
    CheckSymmetries {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Re-run a recorded session and write its frames as PPM images.
    Render {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        frames: PathBuf,
    },
    /// Serve sessions over newline-delimited JSON on 127.0.0.1.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "runs")]
        record_dir: PathBuf,
    },
    /// Re-run a recorded session and compare digests.
    Replay {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        verify: bool,
    },
    /// Print the built-in demo session config.
    DemoConfig,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] DroemError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}:{line}: {source}", path.display())]
    Trajectory { path: PathBuf, line: usize, source: serde_json::Error },
}

type CliResult<T> = std::result::Result<T, CliError>;

enum Outcome {
    Passed,
    Failed,
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|source| CliError::Json { path: path.into(), source })
}

fn read_run(path: &Path) -> CliResult<RunRecord> {
    Ok(RunRecord::parse(&read_text(path)?)?)
}

/// Writes pretty JSON to `path`, or to stdout without one.
fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|source| CliError::Io { path: p.into(), source }),
        None => {
            // A closed pipe (`droem ... | head`) is not an error.
            match writeln!(io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                    Err(CliError::Io { path: "<stdout>".into(), source: e })
                }
                _ => Ok(()),
            }
        }
    }
}

/// One gaze event per line; blank lines and `#` comments are skipped.
fn read_trajectory(path: &Path) -> CliResult<Vec<GazeEvent>> {
    let text = read_text(path)?;
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let e = serde_json::from_str(line).map_err(|source| CliError::Trajectory {
            path: path.into(),
            line: i + 1,
            source,
        })?;
        events.push(e);
    }
    Ok(events)
}

fn simulate(config: &Path, trajectory: &Path, out: &Path, duration: Option<f64>) -> CliResult<Outcome> {
    let config: SessionConfig = read_json(config)?;
    let events = read_trajectory(trajectory)?;
    log::info!("{} events from {}", events.len(), trajectory.display());
    let record = run_scripted(config, &events, duration)?;
    record.write(out)?;
    let last = record.steps.last().map(|s| s.state.as_str()).unwrap_or(record.header.initial_state.as_str());
    println!("{} steps, final state digest {last}", record.steps.len());
    match record.status() {
        Some(RunStatus::Aborted) => {
            let why = record.final_line.as_ref().and_then(|f| f.error.clone()).unwrap_or_default();
            eprintln!("run aborted: {why}");
            Ok(Outcome::Failed)
        }
        _ => Ok(Outcome::Passed),
    }
}

#[derive(Serialize)]
struct AlgebraReport {
    h: String,
    #[serde(rename = "D")]
    degree: usize,
    all_exact: bool,
    relations: Vec<IdentityReport>,
}

fn check_algebra(h: Rational, trunc: usize, report: Option<&Path>) -> CliResult<Outcome> {
    let module = make_module(h.0.clone(), trunc, ScalarMode::ExactRational)?;
    let relations = lie_identity_suite(&module)?;
    let all_exact = relations.iter().all(|r| r.exact);
    for r in relations.iter().filter(|r| !r.exact) {
        eprintln!("{}: residual {:e}", r.relation, r.max_residual);
    }
    let out = AlgebraReport { h: h.to_string(), degree: trunc, all_exact, relations };
    emit_json(&out, report)?;
    Ok(if all_exact { Outcome::Passed } else { Outcome::Failed })
}

/// The solved dilatation must satisfy `[X, J₋₁] = Id` exactly; the other
/// probe entries are measurements and do not affect the exit code.
fn check_cutoff(h: Rational, n: usize, trunc: usize, report: Option<&Path>) -> CliResult<Outcome> {
    let module = make_module(h.0.clone(), trunc, ScalarMode::ExactRational)?;
    let probe = nonlinear_sl2_probe(&CutoffSpec::new(&module, n)?)?;
    emit_json(&probe, report)?;
    let verdict = probe.find("[L1cut,J-1cut]=1", "solved; identity").map(|e| e.verdict.as_str());
    if verdict == Some("exact") {
        Ok(Outcome::Passed)
    } else {
        eprintln!("solved dilatation: {}", verdict.unwrap_or("missing"));
        Ok(Outcome::Failed)
    }
}

/// Input of `check-symmetries`. Sections other than the scan are optional.
#[derive(Deserialize)]
struct Grid {
    h: Vec<Rational>,
    pairs: Vec<(i64, i64)>,
    degree: usize,
    window: usize,
    #[serde(default)]
    stability: Option<StabilityGrid>,
    #[serde(default)]
    group_law: Option<GroupLawGrid>,
}

#[derive(Deserialize)]
struct StabilityGrid {
    h: Rational,
    pair: (i64, i64),
    window: usize,
    degrees: Vec<usize>,
}

#[derive(Deserialize)]
struct GroupLawGrid {
    h: Rational,
    degree: usize,
    order: i64,
    times: Vec<f64>,
}

#[derive(Serialize)]
struct WindowNorm {
    #[serde(rename = "D")]
    degree: usize,
    norm: f64,
}

#[derive(Serialize)]
struct SymmetryReport {
    scan: Vec<ScanResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    stability: Vec<WindowNorm>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    group_law: Vec<GroupLawReport>,
}

fn check_symmetries(grid: &Path, report: Option<&Path>) -> CliResult<Outcome> {
    let g: Grid = read_json(grid)?;
    let hs: Vec<_> = g.h.iter().map(|r| r.0.clone()).collect();
    let scan = asymptotic_scan(&hs, &g.pairs, g.degree, g.window)?;
    let vf = GeneratorKind::VectorField;
    let mut stability = Vec::new();
    if let Some(s) = &g.stability {
        for &d in &s.degrees {
            let module = make_module(s.h.0.clone(), d, ScalarMode::ExactRational)?;
            let r = defect(&module, (s.pair.0, vf), (s.pair.1, vf), s.window)?;
            stability.push(WindowNorm { degree: d, norm: r.tail_norms[0] });
        }
    }
    let mut group_law = Vec::new();
    if let Some(gl) = &g.group_law {
        let module = make_module(gl.h.0.clone(), gl.degree, ScalarMode::ExactRational)?;
        let up = extended_generator(&module, gl.order, vf)?.op;
        let down = extended_generator(&module, -gl.order, vf)?.op;
        let x = to_orthonormal_frame(&up.add(&down)?, &module.shapovalov_form()?);
        for &t in &gl.times {
            for &s in &gl.times {
                group_law.push(group_law_residual(&x, t, s)?);
            }
        }
    }
    emit_json(&SymmetryReport { scan, stability, group_law }, report)?;
    Ok(Outcome::Passed)
}

fn render(run: &Path, dir: &Path) -> CliResult<Outcome> {
    let record = read_run(run)?;
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    let mut runner = Runner::new(record.header.config.clone())?;
    let palette = runner.engine().palette();
    let mut written = 0usize;
    let mut put = |step: u64, frames: &[droem_core::render::Frame]| -> CliResult<()> {
        for (k, frame) in frames.iter().enumerate() {
            let path = dir.join(format!("frame-{step:06}-obs{k}.ppm"));
            let image = compose_fibers(frame, &palette)?;
            let file = fs::File::create(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            let mut w = BufWriter::new(file);
            w.write_all(&image.to_ppm()).map_err(|source| CliError::Io { path: path.clone(), source })?;
            written += 1;
        }
        Ok(())
    };
    put(0, &runner.engine().render_all()?)?;
    for s in &record.steps {
        for e in &s.gaze {
            runner.hold(e.clone())?;
        }
        let out = runner.step_once()?;
        if let Some(frames) = out.frames {
            put(s.step, &frames)?;
        }
    }
    println!("wrote {written} images to {}", dir.display());
    Ok(Outcome::Passed)
}

fn replay_run(run: &Path, verify: bool) -> CliResult<Outcome> {
    let record = read_run(run)?;
    let report = replay(&record)?;
    for m in &report.mismatches {
        eprintln!("step {}: {} recorded {} replayed {}", m.step, m.what, m.recorded, m.replayed);
    }
    println!("{} steps, {} mismatches", report.steps, report.mismatches.len());
    if verify && !report.passed() {
        return Ok(Outcome::Failed);
    }
    Ok(Outcome::Passed)
}

fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Simulate { config, trajectory, out, duration } => simulate(&config, &trajectory, &out, duration),
        Command::CheckAlgebra { h, trunc, report } => check_algebra(h, trunc, report.as_deref()),
        Command::CheckCutoff { h, n, trunc, report } => check_cutoff(h, n, trunc, report.as_deref()),
        Command::CheckSymmetries { grid, report } => check_symmetries(&grid, report.as_deref()),
        Command::Render { run, frames } => render(&run, &frames),
        Command::Serve { config, port, record_dir } => {
            let config = match config {
                Some(p) => read_json(&p)?,
                None => SessionConfig::demo(),
            };
            let options = ServeOptions { record_dir: Some(record_dir), max_connections: None };
            log::info!("listening on 127.0.0.1:{port}");
            serve(config, port, options)?;
            Ok(Outcome::Passed)
        }
        Command::Replay { run, verify } => replay_run(&run, verify),
        Command::DemoConfig => {
            emit_json(&SessionConfig::demo(), None)?;
            Ok(Outcome::Passed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DROEM_LOG", "warn")).init();
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
