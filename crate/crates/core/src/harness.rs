//! Scenario configuration, end-to-end runs, sweeps and file formats.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analysis::{
    apriori_bound_check, energy_inequality_check, fit_decay_rate, gallay_wayne_from_values, plateau_ratio,
    splitting_summary, DecayReport, DuhamelTracker, LqSampler, PressureSampler, Verdict, GAMMA_TOL,
    PLATEAU_RATIO,
};
use crate::decomposition::{far_field_annulus, far_field_exponent, radial_energy_decompose, Decomposition};
use crate::error::{Error, Result};
use crate::heat::{estimate_heat_exponent, make_initial_data, HeatDecayProfile};
use crate::solver::{simulate, EnergyRow, EnergySeries, Mode, Observer, RunSetup, SeriesSink, StepView};
use crate::spectral::{GridSpec, SpectralField, VelocityField};
use crate::vortex::RadialVortexParams;

/// Overrides `output.dir` when set.
pub const OUTPUT_DIR_ENV: &str = "NSDECAY_OUTPUT_DIR";

/// Header of `series.csv`.
pub const SERIES_HEADER: &str = "t,E,D,Tv,v_inf,E_low,E_high,r2";

/// Header of `sweep.csv`.
pub const SWEEP_HEADER: &str = "index,config_hash,gamma_target,gamma_fitted,apriori_constant,violations,status,wall_time";

/// Number of pressure snapshots per run.
pub const PRESSURE_SNAPSHOTS: usize = 20;

/// Pass threshold for the Taylor-Green exact-solution error.
pub const EXACT_TOL: f64 = 1e-8;

/// Heat-energy samples used by `check-heat`.
pub const HEAT_SAMPLES: usize = 32;

/// Pass threshold for `check-heat`.
pub const HEAT_GAMMA_TOL: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitKind {
    PrescribedGamma,
    VorticityFile,
    TaylorGreen,
    Zero,
}

impl InitKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitKind::PrescribedGamma => "prescribed_gamma",
            InitKind::VorticityFile => "vorticity_file",
            InitKind::TaylorGreen => "taylor_green",
            InitKind::Zero => "zero",
        }
    }
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prescribed_gamma" => Ok(InitKind::PrescribedGamma),
            "vorticity_file" => Ok(InitKind::VorticityFile),
            "taylor_green" => Ok(InitKind::TaylorGreen),
            "zero" => Ok(InitKind::Zero),
            other => Err(Error::param("init.kind", format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub grid_n: usize,
    pub grid_length: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    /// Start of the decay analysis.
    pub t0: f64,
    pub alpha: f64,
    /// Age shift of the background vortex.
    pub vortex_t0: f64,
    pub init_kind: InitKind,
    pub gamma: f64,
    pub seed: u64,
    pub amplitude: f64,
    pub init_file: Option<PathBuf>,
    pub mode: Mode,
    pub fit_t_min: Option<f64>,
    pub fit_t_max: Option<f64>,
    pub c0: f64,
    pub q: f64,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            grid_n: 256,
            grid_length: 64.0,
            dt: 2e-3,
            t_end: 100.0,
            sample_interval: 0.25,
            t0: 1.0,
            alpha: 1.0,
            vortex_t0: 1.0,
            init_kind: InitKind::PrescribedGamma,
            gamma: 1.0,
            seed: 0,
            amplitude: 1.0,
            init_file: None,
            mode: Mode::Perturbation,
            fit_t_min: None,
            fit_t_max: None,
            c0: 1.0,
            q: 4.0,
            output_dir: PathBuf::from("output"),
        }
    }
}

const KEYS: [&str; 19] = [
    "grid.n",
    "grid.length",
    "time.dt",
    "time.t_end",
    "time.sample_interval",
    "time.t0",
    "vortex.alpha",
    "vortex.t0",
    "init.kind",
    "init.gamma",
    "init.seed",
    "init.amplitude",
    "init.file",
    "run.mode",
    "fit.t_min",
    "fit.t_max",
    "analysis.C0",
    "analysis.q",
    "output.dir",
];

fn num<T: FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::param(key, format!("cannot parse `{value}`")))
}

impl ScenarioConfig {
    fn set(&mut self, key: &'static str, value: &str) -> Result<()> {
        match key {
            "grid.n" => self.grid_n = num(key, value)?,
            "grid.length" => self.grid_length = num(key, value)?,
            "time.dt" => self.dt = num(key, value)?,
            "time.t_end" => self.t_end = num(key, value)?,
            "time.sample_interval" => self.sample_interval = num(key, value)?,
            "time.t0" => self.t0 = num(key, value)?,
            "vortex.alpha" => self.alpha = num(key, value)?,
            "vortex.t0" => self.vortex_t0 = num(key, value)?,
            "init.kind" => self.init_kind = value.parse()?,
            "init.gamma" => self.gamma = num(key, value)?,
            "init.seed" => self.seed = num(key, value)?,
            "init.amplitude" => self.amplitude = num(key, value)?,
            "init.file" => self.init_file = Some(PathBuf::from(value)),
            "run.mode" => self.mode = value.parse()?,
            "fit.t_min" => self.fit_t_min = Some(num(key, value)?),
            "fit.t_max" => self.fit_t_max = Some(num(key, value)?),
            "analysis.C0" => self.c0 = num(key, value)?,
            "analysis.q" => self.q = num(key, value)?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            _ => unreachable!("key list and setter disagree"),
        }
        Ok(())
    }

    /// Checks ranges and cross-field rules.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive and finite, got {v}")))
            }
        };
        self.grid()?;
        positive("time.dt", self.dt)?;
        positive("time.t_end", self.t_end)?;
        positive("time.sample_interval", self.sample_interval)?;
        positive("time.t0", self.t0)?;
        positive("vortex.t0", self.vortex_t0)?;
        positive("analysis.C0", self.c0)?;
        if !self.alpha.is_finite() {
            return Err(Error::param("vortex.alpha", "must be finite"));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::param("init.amplitude", "must be nonnegative and finite"));
        }
        if self.init_kind == InitKind::PrescribedGamma && !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::param("init.gamma", format!("must lie in (0, 1], got {}", self.gamma)));
        }
        if self.init_kind == InitKind::VorticityFile && self.init_file.is_none() {
            return Err(Error::param("init.file", "required when init.kind = vorticity_file"));
        }
        if !(self.q > 2.0) {
            return Err(Error::param("analysis.q", format!("must exceed 2, got {}", self.q)));
        }
        if self.t0 > self.t_end {
            return Err(Error::param("time.t0", "must not exceed time.t_end"));
        }
        for (name, v) in [("fit.t_min", self.fit_t_min), ("fit.t_max", self.fit_t_max)] {
            if let Some(v) = v {
                if !(v >= self.t0 && v <= self.t_end) {
                    return Err(Error::param(name, format!("{v} lies outside [time.t0, time.t_end]")));
                }
            }
        }
        let (lo, hi) = self.fit_window();
        if self.fit_t_min.is_some() || self.fit_t_max.is_some() {
            if !(lo < hi) {
                return Err(Error::param("fit.t_max", format!("fit window [{lo}, {hi}] is empty")));
            }
        }
        self.setup_with_alpha(self.alpha)?.schedule()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid_n, self.grid_length).map_err(|e| match e {
            Error::InvalidGrid(reason) => Error::param("grid.n", reason),
            other => other,
        })
    }

    /// `[10, min(100, 0.5 (L / 2 pi)^2, t_end)]` unless set explicitly.
    pub fn fit_window(&self) -> (f64, f64) {
        let box_limit = 0.5 * (self.grid_length / (2.0 * std::f64::consts::PI)).powi(2);
        (
            self.fit_t_min.unwrap_or(10.0),
            self.fit_t_max.unwrap_or(100f64.min(box_limit).min(self.t_end)),
        )
    }

    fn setup_with_alpha(&self, alpha: f64) -> Result<RunSetup> {
        Ok(RunSetup {
            grid: self.grid()?,
            mode: self.mode,
            vortex: RadialVortexParams::new(alpha, self.vortex_t0)?,
            dt: self.dt,
            t_end: self.t_end,
            sample_interval: self.sample_interval,
            c0: self.c0,
        })
    }

    /// Applies [`OUTPUT_DIR_ENV`] when it is set and nonempty.
    pub fn apply_env(&mut self) {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
    }

    /// Canonical text form; `parse_config` reads it back unchanged.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let value = match key {
                "grid.n" => Some(self.grid_n.to_string()),
                "grid.length" => Some(self.grid_length.to_string()),
                "time.dt" => Some(self.dt.to_string()),
                "time.t_end" => Some(self.t_end.to_string()),
                "time.sample_interval" => Some(self.sample_interval.to_string()),
                "time.t0" => Some(self.t0.to_string()),
                "vortex.alpha" => Some(self.alpha.to_string()),
                "vortex.t0" => Some(self.vortex_t0.to_string()),
                "init.kind" => Some(self.init_kind.as_str().to_string()),
                "init.gamma" => Some(self.gamma.to_string()),
                "init.seed" => Some(self.seed.to_string()),
                "init.amplitude" => Some(self.amplitude.to_string()),
                "init.file" => self.init_file.as_ref().map(|p| p.display().to_string()),
                "run.mode" => Some(self.mode.as_str().to_string()),
                "fit.t_min" => self.fit_t_min.map(|v| v.to_string()),
                "fit.t_max" => self.fit_t_max.map(|v| v.to_string()),
                "analysis.C0" => Some(self.c0.to_string()),
                "analysis.q" => Some(self.q.to_string()),
                "output.dir" => Some(self.output_dir.display().to_string()),
                _ => unreachable!(),
            };
            if let Some(v) = value {
                let _ = writeln!(s, "{key} = {v}");
            }
        }
        s
    }

    /// Short content hash of everything except `output.dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let digest = Sha256::digest(c.serialize().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let config_err = |message: String| Error::Config {
            line: Some(line_no),
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("expected `section.key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let key: &'static str = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| config_err(format!("unknown key `{key}`")))?;
        if value.is_empty() {
            return Err(config_err(format!("empty value for {key}")));
        }
        if !seen.insert(key) {
            return Err(config_err(format!("duplicate key {key}")));
        }
        cfg.set(key, value).map_err(|e| config_err(e.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if let Some(file) = &cfg.init_file {
        if file.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.init_file = Some(dir.join(file));
            }
        }
    }
    Ok(cfg)
}

/// Reads a vorticity snapshot: a header line `n,length`, then `n^2` reals in
/// row-major order (rows along the second coordinate).
pub fn read_vorticity_file(path: &Path) -> Result<SpectralField> {
    parse_vorticity(&fs::read_to_string(path)?)
}

pub fn parse_vorticity(text: &str) -> Result<SpectralField> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Config {
        line: None,
        message: "vorticity file is empty".into(),
    })?;
    let bad_header = || Error::Config {
        line: Some(1),
        message: format!("expected header `n,length`, got `{}`", header.trim()),
    };
    let (n, length) = header.split_once(',').ok_or_else(bad_header)?;
    let n: usize = n.trim().parse().map_err(|_| bad_header())?;
    let length: f64 = length.trim().parse().map_err(|_| bad_header())?;
    let grid = GridSpec::new(n, length)?;
    let mut samples = Vec::with_capacity(grid.len());
    for (i, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Config {
                line: Some(i + 1),
                message: format!("cannot parse `{tok}`"),
            })?;
            samples.push(v);
        }
    }
    if samples.len() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            found: samples.len(),
        });
    }
    SpectralField::from_physical(&samples, grid)
}

pub fn write_vorticity_file(path: &Path, omega: &SpectralField) -> Result<()> {
    let grid = omega.grid();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},{}", grid.n(), grid.length())?;
    for row in omega.to_physical().chunks(grid.n()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Taylor-Green wavenumber on the box: the multiple of the lattice unit
/// closest to 1.
pub fn taylor_green_wavenumber(grid: &GridSpec) -> f64 {
    let unit = grid.wavenumber_unit();
    unit * (1.0 / unit).round().max(1.0)
}

pub fn taylor_green(grid: GridSpec, amplitude: f64) -> VelocityField {
    let k = taylor_green_wavenumber(&grid);
    let (u1, u2): (Vec<f64>, Vec<f64>) = (0..grid.len())
        .map(|j| {
            let [x, y] = grid.point(j);
            (
                amplitude * (k * x).sin() * (k * y).cos(),
                -amplitude * (k * x).cos() * (k * y).sin(),
            )
        })
        .unzip();
    VelocityField::from_physical(&u1, &u2, grid).expect("grid-sized")
}

/// Initial perturbation and the circulation of the background.
pub fn initial_data(cfg: &ScenarioConfig) -> Result<(VelocityField, f64)> {
    let grid = cfg.grid()?;
    match cfg.init_kind {
        InitKind::PrescribedGamma => Ok((make_initial_data(cfg.gamma, grid, cfg.seed, cfg.amplitude)?, cfg.alpha)),
        InitKind::TaylorGreen => Ok((taylor_green(grid, cfg.amplitude), cfg.alpha)),
        InitKind::Zero => Ok((VelocityField::zeros(grid), cfg.alpha)),
        InitKind::VorticityFile => {
            let path = cfg.init_file.as_ref().ok_or(Error::param("init.file", "missing"))?;
            let omega = read_vorticity_file(path)?;
            if omega.grid() != &grid {
                return Err(Error::param("init.file", "file grid differs from grid.n / grid.length"));
            }
            let d = radial_energy_decompose(&omega, cfg.vortex_t0)?;
            Ok((d.u0, d.vortex.alpha()))
        }
    }
}

struct CsvSink<W: Write> {
    out: W,
}

impl<W: Write> CsvSink<W> {
    fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{SERIES_HEADER}")?;
        Ok(CsvSink { out })
    }
}

impl<W: Write> SeriesSink for CsvSink<W> {
    fn push(&mut self, r: &EnergyRow) -> Result<()> {
        writeln!(
            self.out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.e, r.d, r.tv, r.v_inf, r.e_low, r.e_high, r.r2
        )?;
        Ok(())
    }
}

struct FinalField {
    step: u64,
    u: Option<VelocityField>,
}

impl Observer for FinalField {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        if view.step == self.step {
            self.u = Some(view.u.clone());
        }
        Ok(())
    }
}

/// Series and report of a finished run.
#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub series: EnergySeries,
    pub report: DecayReport,
}

impl ScenarioOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            0
        } else {
            1
        }
    }
}

/// Runs one scenario, writing `series.csv`, `report.txt` and `report.csv`
/// under `output.dir`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let (u0, alpha) = initial_data(cfg)?;
    let setup = cfg.setup_with_alpha(alpha)?;
    let (per, samples) = setup.schedule()?;
    let total = per * samples;

    fs::create_dir_all(&cfg.output_dir)?;
    let mut sink = CsvSink::new(BufWriter::new(File::create(cfg.output_dir.join("series.csv"))?))?;
    let mut pressure = PressureSampler::new(total, PRESSURE_SNAPSHOTS);
    // Steps coarser than the quadrature spacing leave the Duhamel check skipped.
    let mut duhamel = DuhamelTracker::new(&u0, cfg.dt, cfg.mode).ok();
    let mut lq = LqSampler::new(cfg.q, per, cfg.t0)?;
    let mut last = FinalField { step: total, u: None };
    let series = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut pressure, &mut last];
        if let Some(d) = duhamel.as_mut() {
            observers.push(d);
        }
        if cfg.mode == Mode::Perturbation {
            observers.push(&mut lq);
        }
        let result = simulate(&setup, u0.clone(), &mut sink, &mut observers);
        sink.out.flush()?;
        result?
    };

    let exact_error = match (cfg.init_kind, cfg.mode, &last.u) {
        (InitKind::TaylorGreen, m, Some(u)) if m != Mode::Perturbation || alpha == 0.0 => {
            let k = taylor_green_wavenumber(&setup.grid);
            let exact = u0.scale((-2.0 * k * k * cfg.t_end).exp());
            let norm = u0.energy().sqrt();
            Some(if norm > 0.0 { u.sub(&exact).energy().sqrt() / norm } else { 0.0 })
        }
        _ => None,
    };
    let gw = if cfg.mode == Mode::Perturbation && cfg.t_end >= 10.0 * cfg.t0 {
        Some(gallay_wayne_from_values(lq.values, cfg.q)?)
    } else {
        None
    };
    let report = build_report(
        cfg,
        &series,
        ReportInputs {
            pressure,
            duhamel: duhamel.map(|d| d.report()).unwrap_or_default(),
            gw,
            exact_error,
        },
    )?;
    fs::write(cfg.output_dir.join("report.txt"), report.to_text())?;
    fs::write(
        cfg.output_dir.join("report.csv"),
        format!("{}\n{}\n", report.csv_header(), report.csv_row()),
    )?;
    Ok(ScenarioOutcome { series, report })
}

struct ReportInputs {
    pressure: PressureSampler,
    duhamel: crate::analysis::DuhamelReport,
    gw: Option<crate::analysis::GallayWayneReport>,
    exact_error: Option<f64>,
}

fn build_report(cfg: &ScenarioConfig, series: &EnergySeries, inputs: ReportInputs) -> Result<DecayReport> {
    let window = cfg.fit_window();
    let gamma_target = (cfg.init_kind == InitKind::PrescribedGamma).then_some(cfg.gamma);
    let fit = if window.0 < window.1 {
        fit_decay_rate(series, window).ok()
    } else {
        None
    };
    let gamma_fitted = fit.map(|f| -f.slope);
    let plateau = match (gamma_target, fit) {
        (Some(g), Some(_)) => Some(plateau_ratio(series, window, g)),
        _ => None,
    };
    let mut verdicts = Vec::new();
    verdicts.push((
        "rate",
        match (gamma_target, gamma_fitted, plateau) {
            (Some(g), Some(f), Some(p)) => Verdict::from_bool((f - g).abs() <= GAMMA_TOL && p <= PLATEAU_RATIO),
            (Some(_), _, _) if cfg.amplitude > 0.0 => Verdict::Fail,
            _ => Verdict::Skipped,
        },
    ));

    let apriori = if cfg.t_end >= 10.0 * cfg.t0 {
        Some(apriori_bound_check(series, cfg.t0)?)
    } else {
        None
    };
    verdicts.push((
        "apriori",
        apriori.map_or(Verdict::Skipped, |a| Verdict::from_bool(a.pass)),
    ));

    let split = splitting_summary(series);
    verdicts.push(("splitting", Verdict::from_bool(split.violations == 0)));

    let pressure = inputs.pressure.result;
    verdicts.push(("pressure", Verdict::from_bool(pressure.violations == 0)));

    let duhamel = inputs.duhamel;
    verdicts.push((
        "duhamel",
        if duhamel.checks == 0 {
            Verdict::Skipped
        } else {
            Verdict::from_bool(duhamel.violations == 0)
        },
    ));

    let energy = if series.rows.len() >= 3 {
        Some(energy_inequality_check(series)?)
    } else {
        None
    };
    verdicts.push((
        "energy_inequality",
        energy.map_or(Verdict::Skipped, |e| Verdict::from_bool(e.violations == 0)),
    ));

    verdicts.push((
        "gallay_wayne",
        inputs.gw.as_ref().map_or(Verdict::Skipped, |g| Verdict::from_bool(g.pass)),
    ));
    verdicts.push((
        "exact_solution",
        inputs
            .exact_error
            .map_or(Verdict::Skipped, |e| Verdict::from_bool(e <= EXACT_TOL)),
    ));

    Ok(DecayReport {
        gamma_target,
        gamma_fitted,
        gamma_stderr: fit.map(|f| f.stderr),
        fit_window: window,
        plateau_ratio: plateau,
        apriori_constant: apriori.map(|a| a.constant),
        splitting_violations: split.violations,
        splitting_checked: split.checked,
        c0: cfg.c0,
        pressure_violations: pressure.violations,
        pressure_snapshots: inputs.pressure.snapshots,
        duhamel_violations: duhamel.violations,
        duhamel_checks: duhamel.checks,
        energy_violations: energy.map_or(0, |e| e.violations),
        gw_first: inputs.gw.as_ref().map(|g| g.first_decade_avg),
        gw_last: inputs.gw.as_ref().map(|g| g.last_decade_avg),
        exact_error: inputs.exact_error,
        verdicts,
    })
}

/// One line of `sweep.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub hash: String,
    pub gamma_target: Option<f64>,
    pub gamma_fitted: Option<f64>,
    pub apriori_constant: Option<f64>,
    pub violations: Option<usize>,
    /// `pass`, `fail`, or `error: ...`.
    pub status: String,
    pub wall_time: f64,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "pass"
    }

    pub fn csv(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.16e}"));
        format!(
            "{},{},{},{},{},{},{},{:.3}",
            self.index,
            self.hash,
            f(self.gamma_target),
            f(self.gamma_fitted),
            f(self.apriori_constant),
            self.violations.map_or_else(|| "NA".to_string(), |v| v.to_string()),
            self.status.replace([',', '\n'], ";"),
            self.wall_time
        )
    }
}

/// Runs `configs` on `jobs` threads. Scenario `i` writes into
/// `out_dir/<i>_<hash>`; the table goes to `out_dir/sweep.csv` in input order.
pub fn run_sweep(configs: &[ScenarioConfig], jobs: usize, out_dir: &Path) -> Result<Vec<SweepRow>> {
    if jobs == 0 {
        return Err(Error::param("jobs", "must be at least 1"));
    }
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::param("jobs", e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(index, cfg)| {
                let hash = cfg.hash();
                let mut cfg = cfg.clone();
                cfg.output_dir = out_dir.join(format!("{index:03}_{hash}"));
                let start = Instant::now();
                let result = run_scenario(&cfg);
                let wall_time = start.elapsed().as_secs_f64();
                let target = (cfg.init_kind == InitKind::PrescribedGamma).then_some(cfg.gamma);
                match result {
                    Ok(o) => SweepRow {
                        index,
                        hash,
                        gamma_target: target,
                        gamma_fitted: o.report.gamma_fitted,
                        apriori_constant: o.report.apriori_constant,
                        violations: Some(o.report.violations()),
                        status: if o.report.passed() { "pass" } else { "fail" }.to_string(),
                        wall_time,
                    },
                    Err(e) => SweepRow {
                        index,
                        hash,
                        gamma_target: target,
                        gamma_fitted: None,
                        apriori_constant: None,
                        violations: None,
                        status: format!("error: {e}"),
                        wall_time,
                    },
                }
            })
            .collect()
    });
    let mut text = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        text.push_str(&r.csv());
        text.push('\n');
    }
    fs::write(out_dir.join("sweep.csv"), text)?;
    Ok(rows)
}

/// Heat-flow exponent of the configured initial data over the fit window,
/// clipped to the box-validity window.
pub fn check_heat(cfg: &ScenarioConfig) -> Result<HeatDecayProfile> {
    cfg.validate()?;
    let (u0, _) = initial_data(cfg)?;
    let (lo, hi) = cfg.fit_window();
    let limit = u0.grid().validity_time();
    let hi = hi.min(limit * (1.0 - 1e-9));
    estimate_heat_exponent(&u0, (lo, hi), HEAT_SAMPLES)
}

/// Summary of `decompose`.
#[derive(Clone, Debug)]
pub struct DecomposeSummary {
    pub decomposition: Decomposition,
    pub u0_l2: f64,
    pub far_field: Option<(f64, f64, bool)>,
}

pub fn decompose_file(path: &Path, t0: f64) -> Result<DecomposeSummary> {
    let omega = read_vorticity_file(path)?;
    let grid = *omega.grid();
    let decomposition = radial_energy_decompose(&omega, t0)?;
    let (r_lo, r_hi) = far_field_annulus(&grid);
    let radii: Vec<f64> = (0..8).map(|i| r_lo * (r_hi / r_lo).powf(i as f64 / 7.0)).collect();
    let far_field = far_field_exponent(&decomposition.u0, &radii)
        .ok()
        .map(|f| (f.slope, f.stderr, f.localized));
    Ok(DecomposeSummary {
        u0_l2: decomposition.u0.energy().sqrt(),
        decomposition,
        far_field,
    })
}

impl DecomposeSummary {
    pub fn to_text(&self) -> String {
        let d = &self.decomposition;
        let mut s = String::new();
        let _ = writeln!(s, "alpha = {:.16e}", d.vortex.alpha());
        let _ = writeln!(s, "t0 = {:.16e}", d.vortex.t0());
        let _ = writeln!(s, "residual_circulation = {:.16e}", d.residual_circulation);
        let _ = writeln!(s, "u0_l2 = {:.16e}", self.u0_l2);
        match self.far_field {
            Some((slope, stderr, localized)) => {
                let _ = writeln!(s, "far_field_slope = {slope:.16e}");
                let _ = writeln!(s, "far_field_stderr = {stderr:.16e}");
                let _ = writeln!(s, "far_field_localized = {localized}");
            }
            None => {
                let _ = writeln!(s, "far_field_slope = NA");
            }
        }
        s
    }
}
