//! Run configuration: one `key = value [unit]` per line, `#` comments.
//!
//! Values are arithmetic expressions (`2*pi*20`, `81e-21`, `pi/2`). A
//! trailing unit, separated by whitespace, converts the value; without one
//! the default unit of the key applies. Lists are comma separated and accept
//! `linspace(start, stop, count)`; a unit after the list applies to every
//! element. Keys are case-insensitive.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use eprbec::grid::AxialScheme;
use eprbec::meanfield::{ATOMIC_MASS_UNIT, BOHR_RADIUS};
use eprbec::oracle4mode::Chi;
use eprbec::sequence::{MoveMode, ProtocolConfig};
use thiserror::Error;

use crate::expr::eval;

/// Version of the key set and value syntax.
pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Parameter lists spanned by the `sweep` command; empty lists keep the
/// single value of the base configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepAxes {
    pub n: Vec<u64>,
    pub dz_max: Vec<f64>,
    pub t_r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub protocol: ProtocolConfig,
    pub sweep: SweepAxes,
    /// Hold time of the loss estimate, seconds.
    pub loss_duration: f64,
    /// Constant nonlinearities (`ħω`) for the oracle-only mode.
    pub chi: Option<Chi>,
    pub out_dir: PathBuf,
    pub format: Format,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub snapshot: bool,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    File(String),
}

fn at(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Line {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Count,
    CountList,
    Real,
    Bool,
    Choice(&'static [&'static str]),
    Length,
    LengthList,
    Time,
    TimeList,
    Duration,
    Frequency,
    Mass,
    Scattering,
    Kappa2,
    Kappa3,
    Lifetime,
    Angle,
    Energy,
    Path,
}

/// Unit names with their factor to the internal value; the first entry is
/// the default. `None` factors depend on the trap and are resolved later.
fn units(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::Length | Kind::LengthList => &["a0", "m", "um", "nm"],
        Kind::Time | Kind::TimeList => &["1/omega", "s", "ms", "us"],
        Kind::Duration => &["s", "ms", "us", "1/omega"],
        Kind::Frequency => &["rad/s", "Hz", "1/s"],
        Kind::Mass => &["kg", "u", "amu"],
        Kind::Scattering => &["a_B", "R_B", "bohr", "nm"],
        Kind::Kappa2 => &["m^3/s", "cm^3/s"],
        Kind::Kappa3 => &["m^6/s", "cm^6/s"],
        Kind::Lifetime => &["s", "ms"],
        Kind::Angle => &["rad", "deg"],
        Kind::Energy => &["hbar*omega"],
        _ => &[],
    }
}

/// Trap-independent unit factors.
fn fixed_factor(unit: &str) -> Option<f64> {
    Some(match unit {
        "rad/s" | "Hz" | "1/s" | "kg" | "a_B" | "R_B" | "bohr" | "m^3/s" | "m^6/s" | "rad" | "hbar*omega" | "a0"
        | "1/omega" => 1.0,
        "u" | "amu" => ATOMIC_MASS_UNIT,
        "nm" => 1e-9,
        "cm^3/s" => 1e-6,
        "cm^6/s" => 1e-12,
        "deg" => std::f64::consts::PI / 180.0,
        _ => return None,
    })
}

/// Every recognised key with its kind and a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("n", "atoms per well, sets both n_a and n_b"),
    ("n_a", "atoms in well a"),
    ("n_b", "atoms in well b"),
    ("omega", "trap angular frequency [rad/s | Hz | 1/s]"),
    ("mass", "atomic mass [kg | u | amu]"),
    ("a00", "scattering length 0-0 [a_B | R_B | bohr | nm]"),
    ("a11", "scattering length 1-1"),
    ("a01", "scattering length 0-1"),
    ("kappa_11", "two-body loss constant 1-1 [m^3/s | cm^3/s]"),
    ("kappa_01", "two-body loss constant 0-1"),
    ("kappa_000", "three-body loss constant [m^6/s | cm^6/s]"),
    ("tau_1", "one-body lifetime [s | ms], inf disables"),
    ("dz_max", "initial well separation [a0 | m | um | nm]"),
    ("t_r", "ramp duration [1/omega | s | ms | us]"),
    ("t_int", "interaction times, list"),
    ("pulse_angle", "mixing pulse angle [rad | deg]"),
    ("pulse_phase_a", "pulse phase in well a"),
    ("pulse_phase_b", "pulse phase in well b"),
    ("dr", "radial step"),
    ("dz", "axial step"),
    ("r_max", "radial extent"),
    ("z_margin", "axial room beyond the outermost trap centres"),
    ("axial", "axial derivative: spectral | finite_difference"),
    ("dt", "time step"),
    ("beta", "population offset of the phase-gradient trajectories"),
    ("window_mult", "Fock window half-width in units of sqrt(N)/2"),
    ("move_mode", "transported traps: mirror | single"),
    (
        "sample_every",
        "witness along the main trajectory every k steps, 0 = off",
    ),
    ("oracle", "adiabatic four-mode prediction per point"),
    ("oracle_samples", "displacements at which chi is tabulated"),
    ("ground_tau", "gradient-flow step of the ground-state solver"),
    ("ground_tol", "ground-state residual target"),
    ("ground_max_iter", "ground-state iteration cap"),
    (
        "loss_duration",
        "hold time of the loss estimate [s | ms | us | 1/omega]",
    ),
    ("chi_a", "oracle-only mode: constant chi_a [hbar*omega]"),
    ("chi_b", "oracle-only mode: constant chi_b"),
    ("chi_ab", "oracle-only mode: constant chi_ab"),
    ("sweep_n", "sweep: atoms per well, list"),
    ("sweep_dz_max", "sweep: separations, list"),
    ("sweep_t_r", "sweep: ramp durations, list"),
    ("inject_failure", "point indices forced to fail (error-path testing)"),
    ("workers", "worker threads, 0 = all cores"),
    ("format", "result format: csv | json"),
    ("out", "output directory"),
    ("snapshot", "write binary wavefunction snapshots"),
];

fn kind_of(key: &str) -> Option<Kind> {
    Some(match key {
        "n" | "n_a" | "n_b" | "beta" | "sample_every" | "oracle_samples" | "ground_max_iter" | "workers" => Kind::Count,
        "sweep_n" | "inject_failure" => Kind::CountList,
        "window_mult" | "ground_tau" | "ground_tol" => Kind::Real,
        "oracle" | "snapshot" => Kind::Bool,
        "axial" => Kind::Choice(&["spectral", "finite_difference"]),
        "move_mode" => Kind::Choice(&["mirror", "single"]),
        "format" => Kind::Choice(&["csv", "json"]),
        "omega" => Kind::Frequency,
        "mass" => Kind::Mass,
        "a00" | "a11" | "a01" => Kind::Scattering,
        "kappa_11" | "kappa_01" => Kind::Kappa2,
        "kappa_000" => Kind::Kappa3,
        "tau_1" => Kind::Lifetime,
        "dz_max" | "dr" | "dz" | "r_max" | "z_margin" => Kind::Length,
        "sweep_dz_max" => Kind::LengthList,
        "t_r" | "dt" => Kind::Time,
        "t_int" | "sweep_t_r" => Kind::TimeList,
        "loss_duration" => Kind::Duration,
        "pulse_angle" | "pulse_phase_a" | "pulse_phase_b" => Kind::Angle,
        "chi_a" | "chi_b" | "chi_ab" => Kind::Energy,
        "out" => Kind::Path,
        _ => return None,
    })
}

/// Splits a trailing unit off `text`.
fn split_unit<'a>(text: &'a str, kind: Kind) -> Result<(&'a str, Option<&'static str>), String> {
    let text = text.trim();
    let mut allowed: Vec<&'static str> = units(kind).to_vec();
    allowed.sort_by_key(|u| std::cmp::Reverse(u.len()));
    for u in allowed {
        if let Some(head) = text.strip_suffix(u) {
            if head.ends_with(char::is_whitespace) {
                return Ok((head.trim_end(), Some(u)));
            }
        }
    }
    if let Some((head, last)) = text.rsplit_once(char::is_whitespace) {
        let looks_like_unit = last.chars().any(|c| c.is_alphabetic()) && eval(last).is_err() && !last.ends_with(')');
        if looks_like_unit && !head.trim_end().ends_with(|c: char| "+-*/^(,".contains(c)) {
            let expected = units(kind);
            return Err(if expected.is_empty() {
                format!("`{last}`: this key takes no unit")
            } else {
                format!("unit mismatch: `{last}` is not one of {}", expected.join(", "))
            });
        }
    }
    Ok((text, None))
}

/// Splits on commas outside parentheses.
fn split_top(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(text[start..].trim());
    parts
}

fn eval_list(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in split_top(text) {
        if item.is_empty() {
            return Err("empty list element".into());
        }
        if let Some(inner) = item.strip_prefix("linspace(").and_then(|s| s.strip_suffix(')')) {
            let args = split_top(inner);
            if args.len() != 3 {
                return Err("linspace takes (start, stop, count)".into());
            }
            let (a, b) = (eval(args[0])?, eval(args[1])?);
            let n = as_count(eval(args[2])?)?;
            if n == 0 {
                return Err("linspace count must be positive".into());
            }
            for k in 0..n {
                out.push(if n == 1 {
                    a
                } else {
                    a + (b - a) * k as f64 / (n - 1) as f64
                });
            }
        } else {
            out.push(eval(item)?);
        }
    }
    Ok(out)
}

fn as_count(v: f64) -> Result<u64, String> {
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
        Ok(v as u64)
    } else {
        Err(format!("{v} is not a non-negative integer"))
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Values with the unit still attached, converted once `omega` and `mass`
/// are known.
struct Resolver {
    entries: HashMap<String, Entry>,
    a0: f64,
    omega: f64,
}

impl Resolver {
    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn factor(&self, unit: &str) -> f64 {
        match unit {
            "m" => 1.0 / self.a0,
            "um" => 1e-6 / self.a0,
            "s" => 1.0,
            "ms" => 1e-3,
            "us" => 1e-6,
            _ => fixed_factor(unit).expect("known unit"),
        }
    }

    /// Scale from the parsed unit to the internal one of `kind`.
    fn scale(&self, kind: Kind, unit: Option<&str>) -> f64 {
        let Some(u) = unit else { return 1.0 };
        match kind {
            Kind::Length | Kind::LengthList if u == "nm" => 1e-9 / self.a0,
            Kind::Length | Kind::LengthList => self.factor(u),
            // times in 1/ω
            Kind::Time | Kind::TimeList if u == "1/omega" => 1.0,
            Kind::Time | Kind::TimeList => self.factor(u) * self.omega,
            // durations in seconds
            Kind::Duration if u == "1/omega" => 1.0 / self.omega,
            Kind::Scattering if u == "nm" => 1e-9 / BOHR_RADIUS,
            _ => self.factor(u),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        let kind = kind_of(key).expect("known key");
        let (expr, unit) = split_unit(&e.value, kind).map_err(|m| at(e.line, format!("{key}: {m}")))?;
        let v = eval(expr).map_err(|m| at(e.line, format!("{key}: {m}")))?;
        Ok(Some(v * self.scale(kind, unit)))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        let kind = kind_of(key).expect("known key");
        let (expr, unit) = split_unit(&e.value, kind).map_err(|m| at(e.line, format!("{key}: {m}")))?;
        let s = self.scale(kind, unit);
        let v = eval_list(expr).map_err(|m| at(e.line, format!("{key}: {m}")))?;
        Ok(Some(v.into_iter().map(|x| x * s).collect()))
    }

    fn count(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.number(key)? {
            None => Ok(None),
            Some(v) => as_count(v)
                .map(Some)
                .map_err(|m| at(self.line(key), format!("{key}: {m}"))),
        }
    }

    fn counts(&self, key: &str) -> Result<Option<Vec<u64>>, ConfigError> {
        match self.list(key)? {
            None => Ok(None),
            Some(v) => v
                .into_iter()
                .map(as_count)
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|m| at(self.line(key), format!("{key}: {m}"))),
        }
    }

    fn word(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        let v = e.value.trim();
        if let Some(Kind::Choice(options)) = kind_of(key) {
            if !options.contains(&v) {
                return Err(at(e.line, format!("{key}: `{v}` is not one of {}", options.join(", "))));
            }
        }
        Ok(Some(v))
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        match e.value.trim() {
            "true" | "yes" | "on" | "1" => Ok(Some(true)),
            "false" | "no" | "off" | "0" => Ok(Some(false)),
            other => Err(at(e.line, format!("{key}: `{other}` is not a boolean"))),
        }
    }

    /// Checks `ok(value)` and reports a constraint violation at the key's line.
    fn require<T: Copy>(
        &self,
        key: &str,
        value: Option<T>,
        ok: impl Fn(T) -> bool,
        what: &str,
    ) -> Result<Option<T>, ConfigError> {
        match value {
            Some(v) if !ok(v) => Err(at(self.line(key), format!("{key} must be {what}"))),
            v => Ok(v),
        }
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn non_negative(v: f64) -> bool {
    v >= 0.0 && v.is_finite()
}

/// Parses and validates a configuration; defaults fill every key but `N`.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: HashMap<String, Entry> = HashMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(at(line, format!("expected `key = value`, found `{content}`")));
        };
        let key = key.trim().to_lowercase();
        let value = value.trim();
        if key.is_empty() {
            return Err(at(line, "missing key"));
        }
        if kind_of(&key).is_none() {
            return Err(at(line, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(at(line, format!("{key}: missing value")));
        }
        if let Some(prev) = entries.get(&key) {
            return Err(at(line, format!("{key} already set on line {}", prev.line)));
        }
        entries.insert(
            key,
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }

    let mut cfg = ProtocolConfig::default();
    let mut r = Resolver {
        entries,
        a0: 1.0,
        omega: 1.0,
    };

    let p = &mut cfg.params;
    if let Some(v) = r.require("omega", r.number("omega")?, positive, "positive")? {
        p.omega = v;
    }
    if let Some(v) = r.require("mass", r.number("mass")?, positive, "positive")? {
        p.mass = v;
    }
    r.a0 = p.osc_length();
    r.omega = p.omega;
    for (key, slot) in [("a00", &mut p.a00), ("a11", &mut p.a11), ("a01", &mut p.a01)] {
        if let Some(v) = r.require(key, r.number(key)?, non_negative, "non-negative")? {
            *slot = v;
        }
    }
    for (key, slot) in [
        ("kappa_11", &mut p.kappa_11),
        ("kappa_01", &mut p.kappa_01),
        ("kappa_000", &mut p.kappa_000),
    ] {
        if let Some(v) = r.require(key, r.number(key)?, non_negative, "non-negative")? {
            *slot = v;
        }
    }
    if let Some(v) = r.require("tau_1", r.number("tau_1")?, |v: f64| v > 0.0, "positive")? {
        p.tau_1 = v;
    }

    let both = r.count("n")?;
    let (n_a, n_b) = (r.count("n_a")?.or(both), r.count("n_b")?.or(both));
    let (Some(n_a), Some(n_b)) = (n_a, n_b) else {
        return Err(ConfigError::File(
            "atom number unset: give `N` or both `N_a` and `N_b`".into(),
        ));
    };
    let key_n = |specific: &str| {
        if r.raw(specific).is_some() {
            specific.to_string()
        } else {
            "n".to_string()
        }
    };
    r.require(&key_n("n_a"), Some(n_a), |v| v > 0, "positive")?;
    r.require(&key_n("n_b"), Some(n_b), |v| v > 0, "positive")?;
    cfg.n_a = n_a;
    cfg.n_b = n_b;

    if let Some(v) = r.require("dz_max", r.number("dz_max")?, positive, "positive")? {
        cfg.dz_max = v;
    }
    if let Some(v) = r.require("t_r", r.number("t_r")?, positive, "positive")? {
        cfg.t_r = v;
    }
    if let Some(v) = r.list("t_int")? {
        if v.iter().any(|t| !non_negative(*t)) {
            return Err(at(r.line("t_int"), "t_int values must be non-negative"));
        }
        cfg.t_int = v;
    }
    if let Some(v) = r.number("pulse_angle")? {
        cfg.pulse.angle = v;
    }
    if let Some(v) = r.number("pulse_phase_a")? {
        cfg.pulse.phase[0] = v;
    }
    if let Some(v) = r.number("pulse_phase_b")? {
        cfg.pulse.phase[1] = v;
    }
    for (key, slot) in [
        ("dr", &mut cfg.grid.dr),
        ("dz", &mut cfg.grid.dz),
        ("r_max", &mut cfg.grid.r_max),
        ("z_margin", &mut cfg.grid.z_margin),
    ] {
        if let Some(v) = r.require(key, r.number(key)?, positive, "positive")? {
            *slot = v;
        }
    }
    if let Some(w) = r.word("axial")? {
        cfg.grid.axial = if w == "spectral" {
            AxialScheme::Spectral
        } else {
            AxialScheme::FiniteDifference
        };
    }
    if let Some(v) = r.require("dt", r.number("dt")?, positive, "positive")? {
        cfg.dt = v;
    }
    if let Some(v) = r.require("beta", r.count("beta")?, |v| v > 0, "positive")? {
        cfg.beta = v;
    }
    if let Some(v) = r.require("window_mult", r.number("window_mult")?, positive, "positive")? {
        cfg.window_mult = v;
    }
    if let Some(w) = r.word("move_mode")? {
        cfg.move_mode = if w == "mirror" {
            MoveMode::Mirror
        } else {
            MoveMode::Single
        };
    }
    if let Some(v) = r.count("sample_every")? {
        cfg.sample_every = if v == 0 { None } else { Some(v as usize) };
    }
    if let Some(v) = r.flag("oracle")? {
        cfg.oracle = v;
    }
    if let Some(v) = r.require("oracle_samples", r.count("oracle_samples")?, |v| v >= 2, "at least 2")? {
        cfg.oracle_samples = v as usize;
    }
    if let Some(v) = r.require("ground_tau", r.number("ground_tau")?, positive, "positive")? {
        cfg.ground.tau = v;
    }
    if let Some(v) = r.require("ground_tol", r.number("ground_tol")?, positive, "positive")? {
        cfg.ground.tol = v;
    }
    if let Some(v) = r.require("ground_max_iter", r.count("ground_max_iter")?, |v| v > 0, "positive")? {
        cfg.ground.max_iter = v as usize;
    }
    if let Some(v) = r.counts("inject_failure")? {
        cfg.inject_failure = v.into_iter().map(|k| k as usize).collect();
    }
    if cfg.dt > cfg.t_r {
        return Err(at(r.line("dt").max(r.line("t_r")), "dt must not exceed t_R"));
    }
    cfg.validate().map_err(|e| ConfigError::File(e.to_string()))?;

    let loss_duration = r
        .require(
            "loss_duration",
            r.number("loss_duration")?,
            non_negative,
            "non-negative",
        )?
        .unwrap_or(0.2);
    let chi_keys = [r.number("chi_a")?, r.number("chi_b")?, r.number("chi_ab")?];
    let chi = if chi_keys.iter().any(Option::is_some) {
        Some(Chi {
            a: chi_keys[0].unwrap_or(0.0),
            b: chi_keys[1].unwrap_or(0.0),
            ab: chi_keys[2].unwrap_or(0.0),
        })
    } else {
        None
    };

    let sweep_n = r.counts("sweep_n")?.unwrap_or_default();
    if sweep_n.contains(&0) {
        return Err(at(r.line("sweep_n"), "sweep_n values must be positive"));
    }
    let sweep_dz = r.list("sweep_dz_max")?.unwrap_or_default();
    if sweep_dz.iter().any(|v| !positive(*v)) {
        return Err(at(r.line("sweep_dz_max"), "sweep_dz_max values must be positive"));
    }
    let sweep_tr = r.list("sweep_t_r")?.unwrap_or_default();
    if sweep_tr.iter().any(|v| !positive(*v) || *v < cfg.dt) {
        return Err(at(
            r.line("sweep_t_r"),
            "sweep_t_r values must be positive and at least dt",
        ));
    }

    let format = r
        .word("format")?
        .map(|w| Format::parse(w).expect("checked choice"))
        .unwrap_or_default();
    let out_dir = r
        .raw("out")
        .map_or_else(|| PathBuf::from("results"), |e| PathBuf::from(e.value.trim()));
    let workers = r.count("workers")?.unwrap_or(0) as usize;
    let snapshot = r.flag("snapshot")?.unwrap_or(false);

    Ok(RunConfig {
        protocol: cfg,
        sweep: SweepAxes {
            n: sweep_n,
            dz_max: sweep_dz,
            t_r: sweep_tr,
        },
        loss_duration,
        chi,
        out_dir,
        format,
        workers,
        snapshot,
    })
}

fn list_text<T: std::fmt::LowerExp>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Every setting in canonical units; parsing the text gives back `self`.
    pub fn to_config_text(&self) -> String {
        let c = &self.protocol;
        let p = &c.params;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("n_a", c.n_a.to_string());
        put("n_b", c.n_b.to_string());
        put("omega", format!("{:e} rad/s", p.omega));
        put("mass", format!("{:e} kg", p.mass));
        put("a00", format!("{:e} a_B", p.a00));
        put("a11", format!("{:e} a_B", p.a11));
        put("a01", format!("{:e} a_B", p.a01));
        put("kappa_11", format!("{:e} m^3/s", p.kappa_11));
        put("kappa_01", format!("{:e} m^3/s", p.kappa_01));
        put("kappa_000", format!("{:e} m^6/s", p.kappa_000));
        put("tau_1", format!("{:e} s", p.tau_1));
        put("dz_max", format!("{:e} a0", c.dz_max));
        put("t_r", format!("{:e} 1/omega", c.t_r));
        put("t_int", format!("{} 1/omega", list_text(&c.t_int)));
        put("pulse_angle", format!("{:e} rad", c.pulse.angle));
        put("pulse_phase_a", format!("{:e} rad", c.pulse.phase[0]));
        put("pulse_phase_b", format!("{:e} rad", c.pulse.phase[1]));
        put("dr", format!("{:e} a0", c.grid.dr));
        put("dz", format!("{:e} a0", c.grid.dz));
        put("r_max", format!("{:e} a0", c.grid.r_max));
        put("z_margin", format!("{:e} a0", c.grid.z_margin));
        put(
            "axial",
            match c.grid.axial {
                AxialScheme::Spectral => "spectral".into(),
                AxialScheme::FiniteDifference => "finite_difference".into(),
            },
        );
        put("dt", format!("{:e} 1/omega", c.dt));
        put("beta", c.beta.to_string());
        put("window_mult", format!("{:e}", c.window_mult));
        put(
            "move_mode",
            match c.move_mode {
                MoveMode::Mirror => "mirror".into(),
                MoveMode::Single => "single".into(),
            },
        );
        put("sample_every", c.sample_every.unwrap_or(0).to_string());
        put("oracle", c.oracle.to_string());
        put("oracle_samples", c.oracle_samples.to_string());
        put("ground_tau", format!("{:e}", c.ground.tau));
        put("ground_tol", format!("{:e}", c.ground.tol));
        put("ground_max_iter", c.ground.max_iter.to_string());
        put("loss_duration", format!("{:e} s", self.loss_duration));
        if let Some(chi) = self.chi {
            put("chi_a", format!("{:e} hbar*omega", chi.a));
            put("chi_b", format!("{:e} hbar*omega", chi.b));
            put("chi_ab", format!("{:e} hbar*omega", chi.ab));
        }
        if !self.sweep.n.is_empty() {
            put(
                "sweep_n",
                self.sweep.n.iter().map(u64::to_string).collect::<Vec<_>>().join(", "),
            );
        }
        if !self.sweep.dz_max.is_empty() {
            put("sweep_dz_max", format!("{} a0", list_text(&self.sweep.dz_max)));
        }
        if !self.sweep.t_r.is_empty() {
            put("sweep_t_r", format!("{} 1/omega", list_text(&self.sweep.t_r)));
        }
        if !c.inject_failure.is_empty() {
            put(
                "inject_failure",
                c.inject_failure
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(", "),
            );
        }
        put("workers", self.workers.to_string());
        put("format", self.format.name().into());
        put("out", self.out_dir.display().to_string());
        put("snapshot", self.snapshot.to_string());
        s
    }

    /// The configurations spanned by the sweep axes, in row-major order
    /// (N slowest, t_R fastest).
    pub fn sweep_points(&self) -> Vec<ProtocolConfig> {
        let base = &self.protocol;
        let ns: Vec<(u64, u64)> = if self.sweep.n.is_empty() {
            vec![(base.n_a, base.n_b)]
        } else {
            self.sweep.n.iter().map(|&n| (n, n)).collect()
        };
        let dzs = if self.sweep.dz_max.is_empty() {
            vec![base.dz_max]
        } else {
            self.sweep.dz_max.clone()
        };
        let trs = if self.sweep.t_r.is_empty() {
            vec![base.t_r]
        } else {
            self.sweep.t_r.clone()
        };
        let mut out = Vec::new();
        for &(n_a, n_b) in &ns {
            for &dz_max in &dzs {
                for &t_r in &trs {
                    out.push(ProtocolConfig {
                        n_a,
                        n_b,
                        dz_max,
                        t_r,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}
