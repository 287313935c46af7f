//! Subcommands and the files they write.

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use eprbec::correlators::{CorrelatorError, EprResult};
use eprbec::losses::{loss_estimate, LossBudget};
use eprbec::meanfield::snapshot::write_snapshot;
use eprbec::meanfield::{ground_state, FockVector, MeanFieldError};
use eprbec::oracle4mode::{evolve_exact, oracle_witness, Chi, FourModeState};
use eprbec::sequence::{
    adiabatic_chi, chi_profile, run_protocol, ProtocolConfig, ProtocolError, ProtocolOutput, ProtocolPotentials,
};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde_json::{json, Value};
use thiserror::Error;

use crate::checks;
use crate::config::{parse_config, ConfigError, Format, RunConfig, CONFIG_FORMAT_VERSION};
use crate::output::{
    epr_values, point_row, Table, CSV_SCHEMA_VERSION, DENSE_COLUMNS, LOSS_COLUMNS, ORACLE_COLUMNS, POINT_COLUMNS,
    SWEEP_COLUMNS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
    Oracle,
    Losses,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Sweep => "sweep",
            Command::Oracle => "oracle",
            Command::Losses => "losses",
            Command::Check => "check",
        }
    }
}

/// Command-line overrides of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub snapshot: bool,
    pub format: Option<Format>,
    /// Suppress progress messages on stderr.
    pub quiet: bool,
}

#[derive(Debug)]
pub struct Outcome {
    /// Points (or checks) that did not produce a result.
    pub failures: usize,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures > 0 {
            2
        } else {
            0
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads the configuration and applies the command-line overrides.
pub fn load(opts: &Options) -> Result<(PathBuf, RunConfig), CliError> {
    let path = opts
        .config
        .clone()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut cfg = parse_config(&text).map_err(|source| CliError::Config {
        path: path.clone(),
        source,
    })?;
    if let Some(out) = &opts.out {
        cfg.out_dir = out.clone();
    }
    if let Some(w) = opts.workers {
        cfg.workers = w;
    }
    if let Some(f) = opts.format {
        cfg.format = f;
    }
    cfg.snapshot |= opts.snapshot;
    Ok((path, cfg))
}

fn pool(workers: usize) -> Result<ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("worker pool: {e}")))
}

pub fn execute(command: Command, opts: &Options) -> Result<Outcome, CliError> {
    if command == Command::Check {
        let workers = opts.workers.unwrap_or(0);
        let results = pool(workers)?.install(checks::run_suite);
        for r in &results {
            println!("{r}");
        }
        return Ok(Outcome {
            failures: results.iter().filter(|r| !r.passed).count(),
            files: Vec::new(),
        });
    }
    let (path, cfg) = load(opts)?;
    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let started = Instant::now();
    let workers = pool(cfg.workers)?;
    let log = |msg: String| {
        if !opts.quiet {
            eprintln!("eprbec {}: {msg}", command.name());
        }
    };
    let mut report = workers.install(|| match command {
        Command::Run => protocol_runs(&cfg, vec![cfg.protocol.clone()], false, &log),
        Command::Sweep => protocol_runs(&cfg, cfg.sweep_points(), true, &log),
        Command::Oracle => oracle_only(&cfg, &log),
        Command::Losses => losses(&cfg),
        Command::Check => unreachable!(),
    })?;

    let resolved = cfg.to_config_text();
    let cfg_path = cfg.out_dir.join("resolved.cfg");
    fs::write(&cfg_path, &resolved).map_err(io_err(&cfg_path))?;
    report.files.push(cfg_path);

    let manifest = json!({
        "command": command.name(),
        "config_file": path.display().to_string(),
        "config": resolved,
        "config_format_version": CONFIG_FORMAT_VERSION,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "versions": { "eprbec": eprbec::VERSION, "eprbec-cli": env!("CARGO_PKG_VERSION") },
        "deterministic": true,
        "workers": workers.current_num_threads(),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "failures": report.failures,
        "files": report.files.iter().map(|p| file_name(p)).collect::<Vec<_>>(),
        "details": report.details,
    });
    let manifest_path = cfg.out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
    fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
    report.files.push(manifest_path);
    log(format!(
        "{} file(s) in {}, {} failure(s)",
        report.files.len(),
        cfg.out_dir.display(),
        report.failures
    ));
    Ok(Outcome {
        failures: report.failures,
        files: report.files,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

struct Report {
    failures: usize,
    files: Vec<PathBuf>,
    details: Value,
}

fn budget_json(b: &LossBudget) -> Value {
    json!({
        "rate_one_body_per_s": b.rate_one_body,
        "rate_two_body_11_per_s": b.rate_two_body_11,
        "rate_two_body_01_per_s": b.rate_two_body_01,
        "rate_three_body_per_s": b.rate_three_body,
        "duration_s": b.duration,
        "two_body_lost": b.two_body_lost(),
        "n_lost": b.n_lost,
        "lost_fraction": b.lost_fraction,
    })
}

fn sweep_prefix(p: &ProtocolConfig) -> [f64; 4] {
    [p.n_a as f64, p.n_b as f64, p.dz_max, p.t_r]
}

fn write_state(
    path: PathBuf,
    out: &ProtocolOutput,
    state: &eprbec::meanfield::ComponentState,
) -> Result<PathBuf, CliError> {
    let file = File::create(&path).map_err(io_err(&path))?;
    write_snapshot(BufWriter::new(file), &out.grid, state).map_err(io_err(&path))?;
    Ok(path)
}

fn protocol_runs(
    cfg: &RunConfig,
    configs: Vec<ProtocolConfig>,
    sweep: bool,
    log: &dyn Fn(String),
) -> Result<Report, CliError> {
    let n_points: usize = configs.iter().map(|c| c.t_int.len()).sum();
    log(format!("{} configuration(s), {n_points} point(s)", configs.len()));
    let results: Vec<Result<ProtocolOutput, ProtocolError>> = configs.par_iter().map(run_protocol).collect();

    let prefix: &[&str] = if sweep { &SWEEP_COLUMNS } else { &[] };
    let mut table = Table::new(&[prefix, &POINT_COLUMNS[..]].concat());
    let mut dense = Table::new(&[prefix, &DENSE_COLUMNS[..]].concat());
    let mut failures = Vec::new();
    let mut runs = Vec::new();
    let mut files = Vec::new();
    for (k, (pc, result)) in configs.iter().zip(results).enumerate() {
        let omega = pc.params.omega;
        let pre = if sweep { sweep_prefix(pc).to_vec() } else { Vec::new() };
        let out = match result {
            Ok(out) => out,
            Err(e) if sweep => {
                for (index, t) in pc.t_int.iter().enumerate() {
                    failures.push(
                        json!({ "sweep_index": k, "index": index, "t_int_s": t / omega, "error": e.to_string() }),
                    );
                }
                runs.push(json!({ "sweep_index": k, "error": e.to_string() }));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for p in &out.points {
            match point_row(p, omega) {
                Some(row) => table.push([pre.clone(), row].concat()),
                None => failures.push(json!({
                    "sweep_index": k,
                    "index": p.index,
                    "t_int_s": p.t_int / omega,
                    "error": p.outcome.as_ref().err(),
                })),
            }
        }
        for (t, r) in &out.dense {
            let vals = r.as_ref().map_or([f64::NAN; 9], epr_values);
            dense.push([pre.clone(), vec![t / omega], vals.to_vec()].concat());
        }
        if cfg.snapshot {
            let tag = if sweep { format!("_{k}") } else { String::new() };
            files.push(write_state(
                cfg.out_dir.join(format!("snapshot{tag}_prepared.bin")),
                &out,
                &out.prepared,
            )?);
            files.push(write_state(
                cfg.out_dir.join(format!("snapshot{tag}_hold.bin")),
                &out,
                &out.last_central,
            )?);
        }
        let losses = loss_estimate(&out.grid, &out.last_central, cfg.loss_duration, &pc.params);
        let g = &out.grid;
        runs.push(json!({
            "sweep_index": k,
            "n_a": pc.n_a,
            "n_b": pc.n_b,
            "dz_max_a0": pc.dz_max,
            "t_r_trap": pc.t_r,
            "grid": { "n_r": g.n_r(), "n_z": g.n_z(), "dr": g.dr(), "dz": g.dz(), "z_min": g.z_min(), "axial": format!("{:?}", g.axial()) },
            "dt": out.dt,
            "dt_limit": out.dt_limit,
            "mu": out.mu,
            "timings_s": {
                "ground_state": out.timings.ground_state,
                "main_trajectory": out.timings.main_trajectory,
                "branches": out.timings.branches,
                "oracle": out.timings.oracle,
            },
            "loss_budget_at_hold": budget_json(&losses),
        }));
        log(format!(
            "configuration {k}: {} point(s), {} failed",
            out.points.len(),
            out.failures()
        ));
    }
    for f in &failures {
        log(format!("failed point {f}"));
    }
    files.insert(
        0,
        table
            .write(&cfg.out_dir, "results", cfg.format)
            .map_err(io_err(&cfg.out_dir))?,
    );
    if !dense.rows.is_empty() {
        files.push(
            dense
                .write(&cfg.out_dir, "dense", cfg.format)
                .map_err(io_err(&cfg.out_dir))?,
        );
    }
    Ok(Report {
        failures: failures.len(),
        files,
        details: json!({ "runs": runs, "failed_points": failures }),
    })
}

fn oracle_row(cfg: &ProtocolConfig, t: f64, chi: Chi) -> Result<Vec<f64>, CorrelatorError> {
    let start = FourModeState::coherent(cfg.n_a, cfg.n_b, cfg.pulse.coefficients());
    let r: EprResult = oracle_witness(&evolve_exact(&start, chi.a, chi.b, chi.ab))?;
    Ok(vec![
        t / cfg.params.omega,
        chi.a,
        chi.b,
        chi.ab,
        r.e_epr,
        r.alpha,
        r.beta,
        r.spin_len[0],
        r.spin_len[1],
    ])
}

/// Exact four-mode evolution, either with constant `χ` from the
/// configuration or with the mean-field `χ` along the transport schedule.
fn oracle_only(cfg: &RunConfig, log: &dyn Fn(String)) -> Result<Report, CliError> {
    let pc = &cfg.protocol;
    let (source, jobs): (&str, Vec<(f64, Chi)>) = match cfg.chi {
        Some(c) => (
            "constant",
            pc.t_int
                .iter()
                .map(|&t| {
                    (
                        t,
                        Chi {
                            a: c.a * t,
                            b: c.b * t,
                            ab: c.ab * t,
                        },
                    )
                })
                .collect(),
        ),
        None => {
            let grid = pc.build_grid()?;
            log(format!("tabulating chi at {} displacements", pc.oracle_samples));
            let profile = chi_profile(pc, &grid)?;
            (
                "mean_field_schedule",
                pc.t_int
                    .iter()
                    .map(|&t| (2.0 * pc.t_r + t, adiabatic_chi(pc, &profile, t)))
                    .collect(),
            )
        }
    };
    let rows: Vec<_> = jobs.par_iter().map(|&(t, chi)| oracle_row(pc, t, chi)).collect();
    let mut table = Table::new(&ORACLE_COLUMNS);
    let mut failures = Vec::new();
    for (index, (row, (t, _))) in rows.into_iter().zip(&jobs).enumerate() {
        match row {
            Ok(row) => table.push(row),
            Err(e) => failures.push(json!({ "index": index, "t_s": t / pc.params.omega, "error": e.to_string() })),
        }
    }
    let file = table
        .write(&cfg.out_dir, "oracle", cfg.format)
        .map_err(io_err(&cfg.out_dir))?;
    Ok(Report {
        failures: failures.len(),
        files: vec![file],
        details: json!({ "chi_source": source, "failed_points": failures }),
    })
}

/// Loss budget of the overlapped configuration: ground state with the
/// traps frozen at full displacement and half of each well in each state.
fn losses(cfg: &RunConfig) -> Result<Report, CliError> {
    let pc = &cfg.protocol;
    let grid = pc.build_grid()?;
    let traps = ProtocolPotentials::new(pc, None).frozen(pc.dz_max);
    let fock = FockVector::balanced(pc.n_a, pc.n_b);
    let gs = ground_state(fock, &grid, &traps, &pc.couplings(), &pc.ground)?;
    let b = loss_estimate(&grid, &gs.state, cfg.loss_duration, &pc.params);
    let mut table = Table::new(&LOSS_COLUMNS);
    table.push(vec![
        b.rate_one_body,
        b.rate_two_body_11,
        b.rate_two_body_01,
        b.rate_three_body,
        b.duration,
        b.two_body_lost(),
        b.n_lost,
        b.lost_fraction,
    ]);
    println!(
        "two-body loss over {:.3} s: {:.3} atoms; total lost fraction {:.4e}",
        b.duration,
        b.two_body_lost(),
        b.lost_fraction
    );
    let file = table
        .write(&cfg.out_dir, "losses", cfg.format)
        .map_err(io_err(&cfg.out_dir))?;
    Ok(Report {
        failures: 0,
        files: vec![file],
        details: json!({ "populations": fock.0, "mu": gs.mu, "budget": budget_json(&b) }),
    })
}
