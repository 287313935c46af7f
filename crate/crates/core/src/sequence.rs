//! The transport protocol: preparation, π/2 pulse, forward ramp, hold,
//! backward ramp and measurement, for a list of interaction times.
//!
//! All points share the forward ramp and the hold; each point branches off
//! the main trajectory at `t_R + t_int` and is ramped back on its own.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::correlators::{
    epr_witness, spin_moments, CorrelatorEngine, CorrelatorError, CorrelatorInput, EprResult, SpinMoments,
    DEFAULT_WINDOW_MULT,
};
use crate::fockflow::{init_trajectories, FockFlowError, TrajectorySet};
use crate::grid::{AxialScheme, CylGrid, GridError};
use crate::meanfield::{
    density_overlap, ground_state, ground_state_from, stable_dt, Component, ComponentState, Couplings, FockVector,
    GroundStateOptions, HarmonicTraps, MeanFieldError, PhysicalParams, Potentials, Propagator, Well,
};
use crate::oracle4mode::{chi_step, evolve_exact, extract_chi, oracle_witness, Chi, ChiProfile, FourModeState};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid protocol: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error(transparent)]
    FockFlow(#[from] FockFlowError),
    #[error(transparent)]
    Correlator(#[from] CorrelatorError),
    #[error("failure injected at point {0}")]
    Injected(usize),
}

/// Which state-0 traps are transported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MoveMode {
    /// a0 and b0 both move by `+δz(t)`; a0 lands on b1, b0 on the next site.
    #[default]
    Mirror,
    /// Only a0 moves.
    Single,
}

impl MoveMode {
    pub fn moving(self) -> [bool; 4] {
        match self {
            MoveMode::Mirror => [true, false, true, false],
            MoveMode::Single => [true, false, false, false],
        }
    }
}

/// Mixing pulse: `C_σ0 = cos(θ/2)`, `C_σ1 = sin(θ/2) e^{iφ_σ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub angle: f64,
    pub phase: [f64; 2],
}

impl Default for Pulse {
    fn default() -> Self {
        Self {
            angle: PI / 2.0,
            phase: [0.0; 2],
        }
    }
}

impl Pulse {
    pub fn coefficients(&self) -> [C64; 4] {
        let (s, c) = (self.angle / 2.0).sin_cos();
        [
            C64::new(c, 0.0),
            C64::from_polar(s, self.phase[0]),
            C64::new(c, 0.0),
            C64::from_polar(s, self.phase[1]),
        ]
    }
}

/// Lattice spacing and extent around the trap geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dr: f64,
    pub dz: f64,
    pub r_max: f64,
    /// Room kept beyond the outermost trap centres along z.
    pub z_margin: f64,
    pub axial: AxialScheme,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dr: 0.2,
            dz: 0.3,
            r_max: 6.0,
            z_margin: 6.0,
            axial: AxialScheme::Spectral,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub n_a: u64,
    pub n_b: u64,
    /// Initial well separation in oscillator lengths.
    pub dz_max: f64,
    /// Ramp duration in `1/ω`.
    pub t_r: f64,
    /// Interaction times in `1/ω`.
    pub t_int: Vec<f64>,
    pub pulse: Pulse,
    pub params: PhysicalParams,
    pub grid: GridSpec,
    pub dt: f64,
    pub beta: u64,
    pub window_mult: f64,
    pub move_mode: MoveMode,
    pub ground: GroundStateOptions,
    /// Evaluate the witness on the main trajectory every this many steps.
    pub sample_every: Option<usize>,
    /// Compute the adiabatic four-mode prediction for each point.
    pub oracle: bool,
    /// Displacements at which `χ` is tabulated for the adiabatic model.
    pub oracle_samples: usize,
    /// Points whose evaluation is made to fail on purpose.
    pub inject_failure: Vec<usize>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n_a: 100,
            n_b: 100,
            dz_max: 10.0,
            t_r: 10.0,
            t_int: vec![0.0],
            pulse: Pulse::default(),
            params: PhysicalParams::default(),
            grid: GridSpec::default(),
            dt: 0.005,
            beta: 1,
            window_mult: DEFAULT_WINDOW_MULT,
            move_mode: MoveMode::Mirror,
            ground: GroundStateOptions::default(),
            sample_every: None,
            oracle: false,
            oracle_samples: 21,
            inject_failure: Vec::new(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: &str| Err(ProtocolError::Invalid(m.to_string()));
        if !(self.dz_max > 0.0 && self.dz_max.is_finite()) {
            return bad("dz_max must be positive");
        }
        if !(self.t_r > 0.0 && self.t_r.is_finite()) {
            return bad("t_R must be positive");
        }
        if self.t_int.is_empty() {
            return bad("the list of interaction times is empty");
        }
        if self.t_int.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return bad("interaction times must be non-negative");
        }
        if !(self.dt > 0.0 && self.dt <= self.t_r) {
            return bad("time step must be positive and at most t_R");
        }
        if self.n_a == 0 || self.n_b == 0 {
            return bad("both wells need atoms");
        }
        let g = &self.grid;
        if !(g.dr > 0.0 && g.dz > 0.0 && g.r_max > g.dr && g.z_margin > 0.0) {
            return bad("grid spacings and extents must be positive");
        }
        if !(self.window_mult > 0.0) {
            return bad("window multiplier must be positive");
        }
        if self.oracle && self.oracle_samples < 2 {
            return bad("the adiabatic model needs at least two samples");
        }
        if self.sample_every == Some(0) {
            return bad("sampling stride must be positive");
        }
        self.params.validate().map_err(ProtocolError::Invalid)
    }

    pub fn couplings(&self) -> Couplings {
        self.params.couplings()
    }

    /// Trap centres at zero displacement: well a at `-δz_max/2`, b at `+δz_max/2`.
    pub fn base_centers(&self) -> [f64; 4] {
        let h = self.dz_max / 2.0;
        [-h, -h, h, h]
    }

    pub fn build_grid(&self) -> Result<CylGrid, ProtocolError> {
        let g = &self.grid;
        let base = self.base_centers();
        let moving = self.move_mode.moving();
        let far = (0..4)
            .map(|k| base[k] + if moving[k] { self.dz_max } else { 0.0 })
            .fold(f64::MIN, f64::max);
        let z_min = base[0] - g.z_margin;
        let z_max = far + g.z_margin;
        let mut n_z = ((z_max - z_min) / g.dz).ceil() as usize;
        if g.axial == AxialScheme::Spectral {
            // transform length 2 (n_z + 1)
            while !is_smooth(n_z + 1) {
                n_z += 1;
            }
        }
        let n_r = (g.r_max / g.dr).ceil() as usize;
        Ok(CylGrid::new(n_r, n_z, g.dr, g.dz, z_min)?.with_axial(g.axial))
    }

    /// Steps per ramp and the step actually used, `t_R / n_R`.
    pub fn ramp_steps(&self) -> (usize, f64) {
        let n = (self.t_r / self.dt).round().max(1.0) as usize;
        (n, self.t_r / n as f64)
    }

    /// Hold steps for each interaction time (rounded to whole steps).
    pub fn hold_steps(&self) -> Vec<usize> {
        let (_, dt) = self.ramp_steps();
        self.t_int.iter().map(|t| (t / dt).round() as usize).collect()
    }
}

/// True when `n` has no prime factor above 5.
fn is_smooth(mut n: usize) -> bool {
    for p in [2, 3, 5] {
        while n % p == 0 {
            n /= p;
        }
    }
    n == 1
}

/// `δz(t) = δz_max [tanh(4t/t_R - 2) + tanh 2] / (2 tanh 2)`, clamped to
/// `[0, t_R]`.
pub fn ramp_displacement(t: f64, t_r: f64, dz_max: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= t_r {
        return dz_max;
    }
    let th2 = 2f64.tanh();
    dz_max * ((4.0 * t / t_r - 2.0).tanh() + th2) / (2.0 * th2)
}

/// Time-dependent traps of the protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolPotentials {
    base: [f64; 4],
    moving: [bool; 4],
    t_r: f64,
    dz_max: f64,
    /// Start of the backward ramp minus `t_R`; `None` holds forever.
    t_int: Option<f64>,
}

impl ProtocolPotentials {
    pub fn new(config: &ProtocolConfig, t_int: Option<f64>) -> Self {
        Self {
            base: config.base_centers(),
            moving: config.move_mode.moving(),
            t_r: config.t_r,
            dz_max: config.dz_max,
            t_int,
        }
    }

    /// Displacement of the moving traps at time `t`.
    pub fn displacement(&self, t: f64) -> f64 {
        let up = ramp_displacement(t, self.t_r, self.dz_max);
        match self.t_int {
            Some(hold) if t > self.t_r + hold => ramp_displacement(2.0 * self.t_r + hold - t, self.t_r, self.dz_max),
            _ => up,
        }
    }

    pub fn centers(&self, t: f64) -> [f64; 4] {
        let d = self.displacement(t);
        std::array::from_fn(|k| self.base[k] + if self.moving[k] { d } else { 0.0 })
    }

    /// Static traps frozen at displacement `d`.
    pub fn frozen(&self, d: f64) -> HarmonicTraps {
        HarmonicTraps {
            centers: std::array::from_fn(|k| self.base[k] + if self.moving[k] { d } else { 0.0 }),
        }
    }
}

impl Potentials for ProtocolPotentials {
    fn value(&self, component: Component, t: f64, r: f64, z: f64) -> f64 {
        let dz = z - self.centers(t)[component.index()];
        0.5 * (r * r + dz * dz)
    }
}

/// Potential fields of the four components at time `t`.
pub fn component_potentials(t: f64, config: &ProtocolConfig, grid: &CylGrid, t_int: f64) -> [Vec<f64>; 4] {
    let p = ProtocolPotentials::new(config, Some(t_int));
    std::array::from_fn(|k| p.sample(grid, Component::ALL[k], t))
}

/// Everything measured at the end of one point.
#[derive(Debug, Clone)]
pub struct PointData {
    pub epr: EprResult,
    pub moments: SpinMoments,
    /// Adiabatic four-mode prediction of `E_EPR`.
    pub oracle_e_epr: Option<f64>,
    /// Largest density overlap between a component of well a and one of well b.
    pub separation: f64,
    pub mixed_curvature: [f64; 4],
    pub theta: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct ProtocolPoint {
    pub index: usize,
    /// Interaction time actually simulated, `1/ω`.
    pub t_int: f64,
    /// `2 t_R + t_int`, `1/ω`.
    pub t_total: f64,
    pub outcome: Result<PointData, String>,
}

#[derive(Debug, Clone, Default)]
pub struct Timings {
    pub ground_state: f64,
    pub main_trajectory: f64,
    pub branches: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutput {
    pub points: Vec<ProtocolPoint>,
    /// Witness along the main trajectory when dense sampling is on.
    pub dense: Vec<(f64, Result<EprResult, String>)>,
    pub chi_profile: Option<ChiProfile>,
    /// Chemical potentials of the prepared state.
    pub mu: [f64; 4],
    pub grid: CylGrid,
    pub dt: f64,
    /// Largest step allowed by `max(|V| + Σ g N n) dt < 0.05` on the pulsed
    /// initial state.
    pub dt_limit: f64,
    /// Prepared state and the state of the main trajectory at the latest hold time.
    pub prepared: ComponentState,
    pub last_central: ComponentState,
    pub timings: Timings,
}

impl ProtocolOutput {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.is_err()).count()
    }
}

/// Moments and witness of the current state of a trajectory set.
pub fn measure(
    grid: &CylGrid,
    set: &TrajectorySet,
    pulse: [C64; 4],
    window_mult: f64,
) -> Result<(SpinMoments, EprResult), CorrelatorError> {
    let grads = set.phase_gradients();
    let input = CorrelatorInput::from_set(grid.weights(), set, &grads, pulse, window_mult);
    let mut engine = CorrelatorEngine::new(input)?;
    let moments = spin_moments(&mut engine);
    let mut epr = epr_witness(&moments)?;
    epr.overlap = [set.density_overlap(grid, Well::A), set.density_overlap(grid, Well::B)];
    epr.t = set.t();
    Ok((moments, epr))
}

fn separation(grid: &CylGrid, state: &ComponentState) -> f64 {
    let mut worst: f64 = 0.0;
    for a in Well::A.components() {
        for b in Well::B.components() {
            worst = worst.max(density_overlap(grid, state.component(a), state.component(b)));
        }
    }
    worst
}

/// Ground state with all atoms of each well in state 0.
pub fn prepare(config: &ProtocolConfig, grid: &CylGrid) -> Result<(ComponentState, [f64; 4]), ProtocolError> {
    let pots = ProtocolPotentials::new(config, None);
    let fock = FockVector::new(config.n_a, 0, config.n_b, 0);
    let gs = ground_state(fock, grid, &pots, &config.couplings(), &config.ground)?;
    Ok((gs.state, gs.mu))
}

/// `χ` along the ramp from ground states at `oracle_samples` displacements.
pub fn chi_profile(config: &ProtocolConfig, grid: &CylGrid) -> Result<ChiProfile, ProtocolError> {
    let pots = ProtocolPotentials::new(config, None);
    let couplings = config.couplings();
    let nbar = FockVector::balanced(config.n_a, config.n_b);
    let dn = chi_step(config.n_a.min(config.n_b));
    let opts = GroundStateOptions {
        tol: config.ground.tol.min(1e-10),
        ..config.ground.clone()
    };
    let k = config.oracle_samples;
    let displacement: Vec<f64> = (0..k).map(|i| config.dz_max * i as f64 / (k - 1) as f64).collect();
    let chi = displacement
        .par_iter()
        .map(|&d| {
            let traps = pots.frozen(d);
            let centre = ground_state(nbar, grid, &traps, &couplings, &opts)?;
            let warm: [Vec<f64>; 4] = std::array::from_fn(|c| centre.state.psi[c].iter().map(|v| v.re).collect());
            extract_chi(nbar, dn, |n| {
                ground_state_from(n, warm.clone(), grid, &traps, &couplings, &opts).map(|g| g.mu)
            })
        })
        .collect::<Result<Vec<_>, MeanFieldError>>()?;
    Ok(ChiProfile { displacement, chi })
}

/// `∫ χ dt` over the whole schedule with hold `t_int`.
pub fn adiabatic_chi(config: &ProtocolConfig, profile: &ChiProfile, t_int: f64) -> Chi {
    let pots = ProtocolPotentials::new(config, Some(t_int));
    let t_total = 2.0 * config.t_r + t_int;
    let steps = ((t_total / 0.01).ceil() as usize).max(100);
    profile.integrate(|t| pots.displacement(t), t_total, steps)
}

/// Adiabatic four-mode witness after total time `t_total` of the schedule
/// with hold `t_int`.
pub fn adiabatic_witness(config: &ProtocolConfig, profile: &ChiProfile, t_int: f64) -> Result<f64, CorrelatorError> {
    let chi = adiabatic_chi(config, profile, t_int);
    let start = FourModeState::coherent(config.n_a, config.n_b, config.pulse.coefficients());
    Ok(oracle_witness(&evolve_exact(&start, chi.a, chi.b, chi.ab))?.e_epr)
}

fn measure_point(config: &ProtocolConfig, grid: &CylGrid, set: &TrajectorySet) -> Result<PointData, ProtocolError> {
    let (moments, epr) = measure(grid, set, config.pulse.coefficients(), config.window_mult)?;
    Ok(PointData {
        epr,
        moments,
        oracle_e_epr: None,
        separation: separation(grid, set.central()),
        mixed_curvature: set.mixed_curvature(grid),
        theta: set.theta_units(),
    })
}

/// Runs the full protocol for every interaction time of `config`.
pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolOutput, ProtocolError> {
    config.validate()?;
    let grid = config.build_grid()?;
    let (n_ramp, dt) = config.ramp_steps();
    let holds = config.hold_steps();
    let couplings = config.couplings();
    let prop = Propagator::new(&grid, couplings, dt);
    let mut timings = Timings::default();

    let clock = Instant::now();
    let (prepared, mu) = prepare(config, &grid)?;
    timings.ground_state = clock.elapsed().as_secs_f64();

    let mut set = init_trajectories(config.n_a, config.n_b, config.beta, &prepared)?;
    let main = ProtocolPotentials::new(config, None);
    let dt_limit = stable_dt(set.central(), &grid, &main, &couplings);

    // branch points in increasing hold length
    let mut order: Vec<usize> = (0..holds.len()).collect();
    order.sort_by_key(|&i| (holds[i], i));
    let last = n_ramp + holds.iter().copied().max().unwrap_or(0);

    let clock = Instant::now();
    let mut starts: Vec<Option<Result<TrajectorySet, String>>> = vec![None; holds.len()];
    let mut dense = Vec::new();
    let mut next = 0;
    let mut failure: Option<String> = None;
    for step in 0..=last {
        while next < order.len() && n_ramp + holds[order[next]] == step {
            starts[order[next]] = Some(match &failure {
                None => Ok(set.clone()),
                Some(e) => Err(e.clone()),
            });
            next += 1;
        }
        if let (Some(every), None) = (config.sample_every, &failure) {
            if step % every == 0 {
                let r = measure(&grid, &set, config.pulse.coefficients(), config.window_mult)
                    .map(|(_, e)| e)
                    .map_err(|e| e.to_string());
                dense.push((set.t(), r));
            }
        }
        if step == last || next == order.len() && config.sample_every.is_none() {
            break;
        }
        if failure.is_none() {
            if let Err(e) = set.advance(&prop, &main) {
                failure = Some(format!("main trajectory at t = {:.6}: {e}", set.t()));
            }
        }
    }
    timings.main_trajectory = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let jobs: Vec<(usize, Result<TrajectorySet, String>)> = starts
        .into_iter()
        .enumerate()
        .map(|(i, s)| (i, s.expect("every hold reached")))
        .collect();
    let mut points: Vec<ProtocolPoint> = jobs
        .into_par_iter()
        .map(|(index, start)| {
            let t_int = holds[index] as f64 * dt;
            let outcome = (|| -> Result<PointData, String> {
                if config.inject_failure.contains(&index) {
                    return Err(ProtocolError::Injected(index).to_string());
                }
                let mut branch = start?;
                let pots = ProtocolPotentials::new(config, Some(t_int));
                for _ in 0..n_ramp {
                    branch.advance(&prop, &pots).map_err(|e| e.to_string())?;
                }
                measure_point(config, &grid, &branch).map_err(|e| e.to_string())
            })();
            ProtocolPoint {
                index,
                t_int,
                t_total: 2.0 * n_ramp as f64 * dt + t_int,
                outcome,
            }
        })
        .collect();
    timings.branches = clock.elapsed().as_secs_f64();

    let mut chi = None;
    if config.oracle {
        let clock = Instant::now();
        let profile = chi_profile(config, &grid)?;
        for p in points.iter_mut() {
            if let Ok(data) = p.outcome.as_mut() {
                data.oracle_e_epr = adiabatic_witness(config, &profile, p.t_int).ok();
            }
        }
        chi = Some(profile);
        timings.oracle = clock.elapsed().as_secs_f64();
    }
    points.sort_by_key(|p| p.index);

    Ok(ProtocolOutput {
        points,
        dense,
        chi_profile: chi,
        mu,
        grid,
        dt,
        dt_limit,
        prepared,
        last_central: set.central().clone(),
        timings,
    })
}
