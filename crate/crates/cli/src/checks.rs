//! Invariant suite on a small grid, run by `eprbec check`.

use std::fmt;

use eprbec::fockflow::init_trajectories;
use eprbec::meanfield::{energy, Couplings, HarmonicTraps, Propagator};
use eprbec::sequence::{measure, prepare, run_protocol, GridSpec, MoveMode, ProtocolConfig, ProtocolPotentials};

use crate::config::parse_config;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match f() {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn tiny() -> ProtocolConfig {
    ProtocolConfig {
        n_a: 20,
        n_b: 20,
        dz_max: 6.0,
        t_r: 10.0,
        t_int: vec![0.0, 1.0],
        grid: GridSpec {
            dr: 0.4,
            dz: 0.4,
            r_max: 4.0,
            z_margin: 4.0,
            ..Default::default()
        },
        dt: 0.02,
        ..Default::default()
    }
}

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn coherent_baseline() -> Result<String, String> {
    let cfg = tiny();
    let grid = cfg.build_grid().map_err(|e| e.to_string())?;
    let (prepared, _) = prepare(&cfg, &grid).map_err(|e| e.to_string())?;
    let set = init_trajectories(cfg.n_a, cfg.n_b, cfg.beta, &prepared).map_err(|e| e.to_string())?;
    let (m, epr) = measure(&grid, &set, cfg.pulse.coefficients(), cfg.window_mult).map_err(|e| e.to_string())?;
    let n = cfg.n_a as f64;
    let mut worst: f64 = 0.0;
    for s in [0, 3] {
        worst = worst.max((m.mean[s] - n / 2.0).abs());
        let z = s + 2;
        worst = worst.max((m.second[z][z] - m.mean[z] * m.mean[z] - n / 4.0).abs());
    }
    for i in 0..3 {
        for j in 3..6 {
            worst = worst.max((m.second[i][j] - m.mean[i] * m.mean[j]).abs());
        }
    }
    worst = worst.max((epr.e_epr - 1.0).abs());
    ensure(worst < 1e-8, format!("largest deviation {worst:.2e}"))
}

fn trajectories() -> Result<String, String> {
    let cfg = tiny();
    let grid = cfg.build_grid().map_err(|e| e.to_string())?;
    let (prepared, _) = prepare(&cfg, &grid).map_err(|e| e.to_string())?;
    let mut set = init_trajectories(cfg.n_a, cfg.n_b, cfg.beta, &prepared).map_err(|e| e.to_string())?;
    let (steps, dt) = cfg.ramp_steps();
    let prop = Propagator::new(&grid, cfg.couplings(), dt);
    let pots = ProtocolPotentials::new(&cfg, None);
    let start: f64 = set
        .configs()
        .iter()
        .map(|c| c.max_norm_error(&grid))
        .fold(0.0, f64::max);
    for _ in 0..steps / 2 {
        set.advance(&prop, &pots).map_err(|e| e.to_string())?;
    }
    let end: f64 = set
        .configs()
        .iter()
        .map(|c| c.max_norm_error(&grid))
        .fold(0.0, f64::max);
    let per_step = (end - start).abs() / (steps / 2) as f64;
    let zero = set.theta(0, 0);
    let mut antisym: f64 = 0.0;
    for (da, db) in [(1, 0), (0, 1), (1, 1), (2, -1), (-3, 2)] {
        antisym = antisym.max((set.theta(da, db) + set.theta(-da, -db)).abs());
    }
    ensure(
        per_step < 1e-10 && zero == 0.0 && antisym == 0.0,
        format!("norm drift {per_step:.2e}/step, Theta(0) = {zero:e}, antisymmetry residual {antisym:e}"),
    )
}

fn energy_drift() -> Result<String, String> {
    let cfg = tiny();
    let grid = cfg.build_grid().map_err(|e| e.to_string())?;
    let (mut state, _) = prepare(&cfg, &grid).map_err(|e| e.to_string())?;
    // displaced static traps make the clouds slosh
    let traps = HarmonicTraps {
        centers: cfg.base_centers().map(|c| c + 0.8),
    };
    let couplings: Couplings = cfg.couplings();
    let dt = 0.005;
    let prop = Propagator::new(&grid, couplings, dt);
    let e0 = energy(&state, &grid, &traps, &couplings);
    for _ in 0..(25.0 / dt).round() as usize {
        prop.step(&mut state, &traps).map_err(|e| e.to_string())?;
    }
    let drift = ((energy(&state, &grid, &traps, &couplings) - e0) / e0).abs();
    ensure(drift < 1e-6, format!("relative energy drift {drift:.2e} over 25/omega"))
}

fn free_gas() -> Result<String, String> {
    let mut cfg = tiny();
    cfg.params.a00 = 0.0;
    cfg.params.a11 = 0.0;
    cfg.params.a01 = 0.0;
    cfg.move_mode = MoveMode::Single;
    let out = run_protocol(&cfg).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for p in &out.points {
        worst = worst.max((p.outcome.as_ref()?.epr.e_epr - 1.0).abs());
    }
    ensure(worst < 1e-6, format!("|E_EPR - 1| <= {worst:.2e}"))
}

fn config_echo() -> Result<String, String> {
    let c = parse_config("N = 20\ndz_max = 6 a0\nt_int = linspace(0, 20, 3) ms\nomega = 2*pi*20 Hz\n")
        .map_err(|e| e.to_string())?;
    let back = parse_config(&c.to_config_text()).map_err(|e| e.to_string())?;
    ensure(back == c, "resolved configuration parses back to itself".into())
}

pub fn run_suite() -> Vec<CheckResult> {
    vec![
        check("coherent_baseline", coherent_baseline),
        check("norm_and_reduced_phase", trajectories),
        check("static_energy", energy_drift),
        check("ideal_gas_witness", free_gas),
        check("config_echo", config_echo),
    ]
}
