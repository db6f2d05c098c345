//! Verdicts on sampled runs: decay-rate fits, the Fourier splitting
//! inequality, the a priori growth bound, the pressure and Duhamel Fourier
//! bounds, the self-similar comparison, and the energy inequality.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::solver::{EnergyRow, EnergySeries, Mode, Observer, StepView};
use crate::spectral::{
    forward_normalized, split_packed, to_physical_pair, Complex64, GridSpec, SpectralField,
    VelocityField,
};
use crate::stats::{fit_line, lp_norm_vec};
use crate::vortex::{OseenField, RadialVortexParams};

/// Relative rounding allowance for inequalities that hold exactly.
pub const EXACT_TOL: f64 = 1e-10;

/// Minimum number of samples in a rate-fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Absolute tolerance on the fitted exponent for the decay verdict.
pub const GAMMA_TOL: f64 = 0.15;

/// Largest allowed max/min ratio of `E (1 + t)^gamma` over the fit window.
pub const PLATEAU_RATIO: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// Slope of `log E` against `log(1 + t)`; the decay exponent is `-slope`.
    pub slope: f64,
    pub stderr: f64,
    pub samples: usize,
}

pub fn fit_decay_rate(series: &EnergySeries, window: (f64, f64)) -> Result<RateFit> {
    let rows: Vec<&EnergyRow> = in_window(series, window);
    if rows.is_empty() {
        return Err(Error::Empty("fit window"));
    }
    if rows.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            found: rows.len(),
        });
    }
    if rows.iter().any(|r| !(r.e > 0.0)) {
        return Err(Error::Degenerate("nonpositive energy in fit window"));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.t.ln_1p()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.e.ln()).collect();
    let fit = fit_line(&x, &y)?;
    Ok(RateFit {
        slope: fit.slope,
        stderr: fit.stderr,
        samples: rows.len(),
    })
}

fn in_window(series: &EnergySeries, (lo, hi): (f64, f64)) -> Vec<&EnergyRow> {
    let eps = 1e-9 * hi.abs().max(1.0);
    series
        .rows
        .iter()
        .filter(|r| r.t >= lo - eps && r.t <= hi + eps)
        .collect()
}

/// `max / min` of `E (1 + t)^gamma` over the window.
pub fn plateau_ratio(series: &EnergySeries, window: (f64, f64), gamma: f64) -> f64 {
    let vals: Vec<f64> = in_window(series, window)
        .iter()
        .map(|r| r.e * (1.0 + r.t).powf(gamma))
        .collect();
    let max = vals.iter().copied().fold(0.0, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCheck {
    pub r2: f64,
    pub e_low: f64,
    pub e_high: f64,
    /// `r^2 E_high`.
    pub lhs: f64,
    /// `||grad u||_2^2`.
    pub rhs: f64,
    pub holds: bool,
}

/// Splits the energy at `r^2 = (1 + C0) / (t + 1)` and compares `r^2 E_high`
/// with the dissipation.
pub fn fourier_split_check(u: &VelocityField, t: f64, c0: f64) -> SplitCheck {
    let grid = *u.grid();
    let l2 = grid.length() * grid.length();
    let r2 = (1.0 + c0) / (t + 1.0);
    let (a, b) = (u.u1().coeffs(), u.u2().coeffs());
    let (mut low, mut high, mut d) = (0.0, 0.0, 0.0);
    for j in 0..grid.len() {
        let kk = grid.k_squared(j);
        let m = a[j].norm_sqr() + b[j].norm_sqr();
        if kk < r2 {
            low += m;
        } else {
            high += m;
        }
        d += kk * m;
    }
    split_verdict(r2, l2 * low, l2 * high, l2 * d)
}

fn split_verdict(r2: f64, e_low: f64, e_high: f64, d: f64) -> SplitCheck {
    let lhs = r2 * e_high;
    SplitCheck {
        r2,
        e_low,
        e_high,
        lhs,
        rhs: d,
        holds: lhs <= d * (1.0 + EXACT_TOL),
    }
}

/// The splitting inequality evaluated on a recorded row.
pub fn split_from_row(row: &EnergyRow) -> SplitCheck {
    split_verdict(row.r2, row.e_low, row.e_high, row.d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSummary {
    pub checked: usize,
    pub violations: usize,
    /// Smallest `(rhs - lhs) / rhs` over rows with `rhs > 0`.
    pub min_margin: f64,
    /// Largest `|E_low + E_high - E| / E`.
    pub partition_defect: f64,
}

pub fn splitting_summary(series: &EnergySeries) -> SplitSummary {
    let mut s = SplitSummary {
        checked: 0,
        violations: 0,
        min_margin: f64::INFINITY,
        partition_defect: 0.0,
    };
    for row in &series.rows {
        let c = split_from_row(row);
        s.checked += 1;
        if !c.holds {
            s.violations += 1;
        }
        if c.rhs > 0.0 {
            s.min_margin = s.min_margin.min((c.rhs - c.lhs) / c.rhs);
        }
        if row.e > 0.0 {
            s.partition_defect = s.partition_defect.max((row.e_low + row.e_high - row.e).abs() / row.e);
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AprioriReport {
    /// `sup_{t >= t0} E(t) / (1 + t)`.
    pub constant: f64,
    pub first_decade_sup: f64,
    pub last_decade_sup: f64,
    pub pass: bool,
}

pub fn apriori_bound_check(series: &EnergySeries, t0: f64) -> Result<AprioriReport> {
    let first = series.rows.first().ok_or(Error::Empty("energy series"))?;
    if first.t > t0 {
        return Err(Error::param("t0", format!("series starts at {} after t0 = {t0}", first.t)));
    }
    let t_end = series.rows.last().map(|r| r.t).unwrap_or(0.0);
    let eps = 1e-9 * t_end.max(1.0);
    let ratio = |r: &&EnergyRow| r.e / (1.0 + r.t);
    let sup_over = |lo: f64, hi: f64| {
        series
            .rows
            .iter()
            .filter(|r| r.t >= lo - eps && r.t <= hi + eps)
            .map(|r| ratio(&r))
            .fold(0.0, f64::max)
    };
    let constant = sup_over(t0, t_end);
    let first_decade_sup = sup_over(t0, 10.0 * t0);
    let last_decade_sup = sup_over((t_end / 10.0).max(t0), t_end);
    Ok(AprioriReport {
        constant,
        first_decade_sup,
        last_decade_sup,
        pass: constant.is_finite() && last_decade_sup <= first_decade_sup * (1.0 + 1e-12),
    })
}

/// Fourier transforms of `u (x) u` and `v (x) u` on the grid.
pub struct TensorSpectra {
    /// `(u1 u1, u1 u2, u2 u2)`.
    pub uu: [Vec<Complex64>; 3],
    /// `v_i u_j` at index `2 i + j`; empty without a background.
    pub vu: Vec<Vec<Complex64>>,
}

impl TensorSpectra {
    pub fn new(grid: &GridSpec, u1: &[f64], u2: &[f64], bg: Option<&OseenField>) -> Self {
        let len = grid.len();
        let mut fields: Vec<Vec<f64>> = vec![
            (0..len).map(|j| u1[j] * u1[j]).collect(),
            (0..len).map(|j| u1[j] * u2[j]).collect(),
            (0..len).map(|j| u2[j] * u2[j]).collect(),
        ];
        if let Some(bg) = bg {
            let v = [&bg.v1, &bg.v2];
            let u = [u1, u2];
            for i in 0..2 {
                for jj in 0..2 {
                    fields.push((0..len).map(|j| v[i][j] * u[jj][j]).collect());
                }
            }
        }
        let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(fields.len());
        for chunk in fields.chunks(2) {
            let mut buf: Vec<Complex64> = match chunk {
                [a, b] => a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect(),
                [a] => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                _ => unreachable!(),
            };
            forward_normalized(grid, &mut buf);
            let (fa, fb) = split_packed(grid, &buf);
            spectra.push(fa);
            if chunk.len() == 2 {
                spectra.push(fb);
            }
        }
        let vu = spectra.split_off(3);
        let uu = [spectra.remove(0), spectra.remove(0), spectra.remove(0)];
        TensorSpectra { uu, vu }
    }

    /// `|(u (x) u)^(k)|` as a Frobenius norm.
    pub fn uu_norm(&self, j: usize) -> f64 {
        let [a, b, c] = &self.uu;
        (a[j].norm_sqr() + 2.0 * b[j].norm_sqr() + c[j].norm_sqr()).sqrt()
    }

    /// `|(v (x) u)^(k)|` as a Frobenius norm; zero without a background.
    pub fn vu_norm(&self, j: usize) -> f64 {
        self.vu.iter().map(|f| f[j].norm_sqr()).sum::<f64>().sqrt()
    }

    /// `M = u (x) u + v (x) u + u (x) v` at mode `j`, row-major.
    fn m(&self, j: usize) -> [Complex64; 4] {
        let [a, b, c] = &self.uu;
        let mut m = [a[j], b[j], b[j], c[j]];
        if !self.vu.is_empty() {
            for i in 0..2 {
                for jj in 0..2 {
                    m[2 * i + jj] += self.vu[2 * i + jj][j] + self.vu[2 * jj + i][j];
                }
            }
        }
        m
    }

    /// `p(k) = -k k^T : M(k) / |k|^2`.
    pub fn pressure(&self, grid: &GridSpec, j: usize) -> Complex64 {
        if j == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let [k1, k2] = grid.wavevector(j);
        let m = self.m(j);
        -(k1 * k1 * m[0] + k1 * k2 * (m[1] + m[2]) + k2 * k2 * m[3]) / (k1 * k1 + k2 * k2)
    }
}

fn background_for(grid: &GridSpec, t: f64, vortex: &RadialVortexParams) -> Option<OseenField> {
    (vortex.alpha() != 0.0).then(|| OseenField::sample(vortex, grid, t))
}

/// Diagnostic pressure of the perturbation equation at time `t`.
pub fn reconstruct_pressure(u: &VelocityField, t: f64, vortex: &RadialVortexParams) -> SpectralField {
    let grid = *u.grid();
    let bg = background_for(&grid, t, vortex);
    let (u1, u2) = to_physical_pair(u.u1(), u.u2());
    let ts = TensorSpectra::new(&grid, &u1, &u2, bg.as_ref());
    let coeffs = (0..grid.len()).map(|j| ts.pressure(&grid, j)).collect();
    SpectralField::from_coeffs(grid, coeffs).expect("grid-sized")
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PressureCheck {
    pub modes: usize,
    pub violations: usize,
    /// Largest `|p| / (2 |v u| + |u u|)` over modes with a nonzero bound.
    pub max_ratio: f64,
}

impl PressureCheck {
    pub fn merge(&mut self, other: PressureCheck) {
        self.modes += other.modes;
        self.violations += other.violations;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
    }
}

/// Counts modes where `|p| > 2 |(v u)^| + |(u u)^|`.
pub fn pressure_bound_check(u: &VelocityField, t: f64, vortex: &RadialVortexParams) -> PressureCheck {
    let grid = *u.grid();
    let bg = background_for(&grid, t, vortex);
    let (u1, u2) = to_physical_pair(u.u1(), u.u2());
    pressure_from(&grid, &u1, &u2, bg.as_ref())
}

fn pressure_from(grid: &GridSpec, u1: &[f64], u2: &[f64], bg: Option<&OseenField>) -> PressureCheck {
    let ts = TensorSpectra::new(grid, u1, u2, bg);
    let bounds: Vec<f64> = (0..grid.len()).map(|j| 2.0 * ts.vu_norm(j) + ts.uu_norm(j)).collect();
    let scale = bounds.iter().copied().fold(0.0, f64::max);
    let mut out = PressureCheck::default();
    for j in 1..grid.len() {
        let p = ts.pressure(grid, j).norm();
        out.modes += 1;
        if p > bounds[j] + EXACT_TOL * scale {
            out.violations += 1;
        }
        if bounds[j] > 0.0 {
            out.max_ratio = out.max_ratio.max(p / bounds[j]);
        }
    }
    out
}

/// Checks the pressure bound at a fixed set of steps during a run.
pub struct PressureSampler {
    steps: Vec<u64>,
    pub result: PressureCheck,
    pub snapshots: usize,
}

impl PressureSampler {
    /// `count` snapshots spread evenly over `total_steps`.
    pub fn new(total_steps: u64, count: usize) -> Self {
        let mut steps: Vec<u64> = (0..count)
            .map(|i| {
                if count == 1 {
                    total_steps
                } else {
                    (i as u64 * total_steps) / (count as u64 - 1)
                }
            })
            .collect();
        steps.dedup();
        PressureSampler {
            steps,
            result: PressureCheck::default(),
            snapshots: 0,
        }
    }
}

impl Observer for PressureSampler {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        if self.steps.binary_search(&view.step).is_ok() {
            let (u1, u2) = to_physical_pair(view.u.u1(), view.u.u2());
            self.result
                .merge(pressure_from(view.u.grid(), &u1, &u2, view.background));
            self.snapshots += 1;
        }
        Ok(())
    }
}

/// Largest spacing between Duhamel quadrature nodes.
pub const DUHAMEL_MAX_SPACING: f64 = 1.0 / 16.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DuhamelReport {
    pub modes: usize,
    pub checks: usize,
    pub violations: usize,
    /// Smallest `(rhs - lhs) / rhs` over checks with `rhs > 0`.
    pub min_margin: f64,
}

/// Streaming trapezoid quadrature of the low-mode Duhamel bound
/// `|u(k,t)| <= e^{-|k|^2 t} |u0(k)| + int_0^t e^{-|k|^2 (t-s)} g(k,s) ds`,
/// `g = |k| (|(v u)^| + |(u u)^| + |(u v)^| + |p|)`.
///
/// Runs two quadratures, at spacing `h` and `2h`; their difference is the
/// quadrature tolerance at the shared nodes.
pub struct DuhamelTracker {
    stride: u64,
    forced: bool,
    modes: Vec<usize>,
    kk: Vec<f64>,
    u0_abs: Vec<f64>,
    fine: Vec<f64>,
    coarse: Vec<f64>,
    g_fine: Vec<f64>,
    g_coarse: Vec<f64>,
    t_fine: f64,
    t_coarse: f64,
    nodes: u64,
    report: DuhamelReport,
}

impl DuhamelTracker {
    /// In heat mode the forcing vanishes and the bound is an equality.
    pub fn new(u0: &VelocityField, dt: f64, mode: Mode) -> Result<Self> {
        let stride = (DUHAMEL_MAX_SPACING / dt * (1.0 + 1e-9)).floor() as u64;
        Self::with_stride(u0, stride.max(1), dt, mode)
    }

    pub fn with_stride(u0: &VelocityField, stride: u64, dt: f64, mode: Mode) -> Result<Self> {
        if stride == 0 || stride as f64 * dt > DUHAMEL_MAX_SPACING * (1.0 + 1e-9) {
            return Err(Error::TooFewSamples {
                needed: 16,
                found: (1.0 / (stride as f64 * dt)).floor() as usize,
            });
        }
        let grid = *u0.grid();
        let n = grid.n();
        let modes: Vec<usize> = (1..grid.len())
            .filter(|&j| {
                let (m1, m2) = (grid.mode(j % n), grid.mode(j / n));
                (m2 > 0 || (m2 == 0 && m1 > 0)) && grid.k_squared(j) < 1.0 && grid.is_resolved(j)
            })
            .collect();
        let (a, b) = (u0.u1().coeffs(), u0.u2().coeffs());
        let u0_abs = modes.iter().map(|&j| (a[j].norm_sqr() + b[j].norm_sqr()).sqrt()).collect();
        let kk = modes.iter().map(|&j| grid.k_squared(j)).collect();
        let m = modes.len();
        Ok(DuhamelTracker {
            stride,
            forced: mode != Mode::Heat,
            modes,
            kk,
            u0_abs,
            fine: vec![0.0; m],
            coarse: vec![0.0; m],
            g_fine: vec![0.0; m],
            g_coarse: vec![0.0; m],
            t_fine: 0.0,
            t_coarse: 0.0,
            nodes: 0,
            report: DuhamelReport {
                modes: m,
                min_margin: f64::INFINITY,
                ..Default::default()
            },
        })
    }

    pub fn report(&self) -> DuhamelReport {
        self.report
    }

    /// Adds a quadrature node at time `t`.
    pub fn push(&mut self, t: f64, u: &VelocityField, bg: Option<&OseenField>) {
        let g = if self.forced {
            let grid = *u.grid();
            let (u1, u2) = to_physical_pair(u.u1(), u.u2());
            let ts = TensorSpectra::new(&grid, &u1, &u2, bg);
            self.modes
                .iter()
                .zip(&self.kk)
                .map(|(&j, &kk)| kk.sqrt() * (ts.uu_norm(j) + 2.0 * ts.vu_norm(j) + ts.pressure(&grid, j).norm()))
                .collect()
        } else {
            vec![0.0; self.modes.len()]
        };
        let node = self.nodes;
        self.nodes += 1;
        if node == 0 {
            self.g_fine.clone_from(&g);
            self.g_coarse = g;
            self.t_fine = t;
            self.t_coarse = t;
            return;
        }
        trapezoid(&mut self.fine, &self.kk, &self.g_fine, &g, t - self.t_fine);
        self.g_fine.clone_from(&g);
        self.t_fine = t;
        if node % 2 != 0 {
            return;
        }
        trapezoid(&mut self.coarse, &self.kk, &self.g_coarse, &g, t - self.t_coarse);
        self.g_coarse = g;
        self.t_coarse = t;
        let (a, b) = (u.u1().coeffs(), u.u2().coeffs());
        for (i, &j) in self.modes.iter().enumerate() {
            let lhs = (a[j].norm_sqr() + b[j].norm_sqr()).sqrt();
            let free = (-self.kk[i] * t).exp() * self.u0_abs[i];
            let rhs = free + self.fine[i];
            let tol = (self.fine[i] - self.coarse[i]).abs() + EXACT_TOL * rhs;
            self.report.checks += 1;
            if lhs > rhs + tol {
                self.report.violations += 1;
            }
            if rhs > 0.0 {
                self.report.min_margin = self.report.min_margin.min((rhs - lhs) / rhs);
            }
        }
    }
}

fn trapezoid(acc: &mut [f64], kk: &[f64], g_prev: &[f64], g: &[f64], h: f64) {
    for i in 0..acc.len() {
        let decay = (-kk[i] * h).exp();
        acc[i] = decay * acc[i] + 0.5 * h * (decay * g_prev[i] + g[i]);
    }
}

impl Observer for DuhamelTracker {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        if view.step % self.stride == 0 {
            self.push(view.t, view.u, view.background);
        }
        Ok(())
    }
}

/// Batch form of the Duhamel check over stored snapshots `(t, u)`, the
/// first at `t = 0`, spaced uniformly by at most 1/16.
pub fn duhamel_lowmode_check(
    snapshots: &[(f64, VelocityField)],
    u0: &VelocityField,
    mode: Mode,
    vortex: &RadialVortexParams,
) -> Result<DuhamelReport> {
    if snapshots.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: snapshots.len(),
        });
    }
    let h = snapshots[1].0 - snapshots[0].0;
    let uniform = snapshots
        .windows(2)
        .all(|w| ((w[1].0 - w[0].0) - h).abs() <= 1e-9 * h.abs().max(1e-300));
    if snapshots[0].0 != 0.0 || !uniform || !(h > 0.0) {
        return Err(Error::param("snapshots", "must start at t = 0 with uniform spacing"));
    }
    let mut tracker = DuhamelTracker::with_stride(u0, 1, h, mode)?;
    for (t, u) in snapshots {
        let bg = match mode {
            Mode::Perturbation => background_for(u.grid(), *t, vortex),
            _ => None,
        };
        tracker.push(*t, u, bg.as_ref());
    }
    Ok(tracker.report())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GallayWayneReport {
    pub q: f64,
    /// `(t, t^(1/2 - 1/q) ||u(t)||_q)`.
    pub scaled: Vec<(f64, f64)>,
    pub first_decade_avg: f64,
    pub last_decade_avg: f64,
    pub pass: bool,
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 2.0) {
        return Err(Error::param("analysis.q", format!("must exceed 2, got {q}")));
    }
    Ok(())
}

/// `t^(1/2 - 1/q) ||u||_q`.
pub fn gallay_wayne_value(u: &VelocityField, t: f64, q: f64) -> f64 {
    let (a, b) = u.to_physical();
    t.powf(0.5 - 1.0 / q) * lp_norm_vec(&a, &b, u.grid().cell_area(), q)
}

pub fn gallay_wayne_check(snapshots: &[(f64, VelocityField)], q: f64) -> Result<GallayWayneReport> {
    check_q(q)?;
    let scaled: Vec<(f64, f64)> = snapshots
        .iter()
        .filter(|s| s.0 > 0.0)
        .map(|(t, u)| (*t, gallay_wayne_value(u, *t, q)))
        .collect();
    gallay_wayne_from_values(scaled, q)
}

/// Trend verdict on precomputed `(t, t^(1/2 - 1/q) ||u||_q)` values.
pub fn gallay_wayne_from_values(mut scaled: Vec<(f64, f64)>, q: f64) -> Result<GallayWayneReport> {
    check_q(q)?;
    scaled.retain(|s| s.0 > 0.0);
    scaled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (first, last) = match (scaled.first(), scaled.last()) {
        (Some(f), Some(l)) => (f.0, l.0),
        _ => return Err(Error::Empty("snapshot list")),
    };
    let eps = 1e-9 * last;
    let avg = |lo: f64, hi: f64| {
        let vals: Vec<f64> = scaled
            .iter()
            .filter(|s| s.0 >= lo - eps && s.0 <= hi + eps)
            .map(|s| s.1)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let first_decade_avg = avg(first, 10.0 * first);
    let last_decade_avg = avg(last / 10.0, last);
    Ok(GallayWayneReport {
        q,
        scaled,
        first_decade_avg,
        last_decade_avg,
        pass: last_decade_avg == 0.0 || last_decade_avg < first_decade_avg,
    })
}

/// Records `t^(1/2 - 1/q) ||u||_q` at sampled steps with `t >= t_start`.
pub struct LqSampler {
    q: f64,
    stride: u64,
    t_start: f64,
    pub values: Vec<(f64, f64)>,
}

impl LqSampler {
    pub fn new(q: f64, stride: u64, t_start: f64) -> Result<Self> {
        check_q(q)?;
        Ok(LqSampler {
            q,
            stride: stride.max(1),
            t_start,
            values: Vec::new(),
        })
    }
}

impl Observer for LqSampler {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        if view.step % self.stride == 0 && view.t >= self.t_start * (1.0 - 1e-12) && view.t > 0.0 {
            self.values.push((view.t, gallay_wayne_value(view.u, view.t, self.q)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyInequalityReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest `dE/dt - (-2 D + 2 |Tv|) - tol`, positive on violation.
    pub max_excess: f64,
}

/// Compares centered `dE/dt` with `-2 D + 2 |Tv|` at interior samples.
///
/// The tolerance is a Richardson estimate of the difference-quotient error,
/// `2 |D_h - D_2h| / 3`, plus `1e-8 (1 + 2 D + 2 |Tv|)`.
pub fn energy_inequality_check(series: &EnergySeries) -> Result<EnergyInequalityReport> {
    let rows = &series.rows;
    if rows.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: rows.len(),
        });
    }
    let mut out = EnergyInequalityReport {
        checked: 0,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
    };
    for i in 1..rows.len() - 1 {
        let d_h = (rows[i + 1].e - rows[i - 1].e) / (rows[i + 1].t - rows[i - 1].t);
        let richardson = if i >= 2 && i + 2 < rows.len() {
            let d_2h = (rows[i + 2].e - rows[i - 2].e) / (rows[i + 2].t - rows[i - 2].t);
            2.0 * (d_h - d_2h).abs() / 3.0
        } else {
            // Near the ends, compare the centered and one-sided quotients.
            let fwd = (rows[i + 1].e - rows[i].e) / (rows[i + 1].t - rows[i].t);
            let bwd = (rows[i].e - rows[i - 1].e) / (rows[i].t - rows[i - 1].t);
            (fwd - bwd).abs()
        };
        let r = &rows[i];
        let bound = -2.0 * r.d + 2.0 * r.tv.abs();
        let tol = richardson + 1e-8 * (1.0 + 2.0 * r.d + 2.0 * r.tv.abs());
        let excess = d_h - bound - tol;
        out.checked += 1;
        out.max_excess = out.max_excess.max(excess);
        if excess > 0.0 {
            out.violations += 1;
        }
    }
    Ok(out)
}

/// Outcome of one check in a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skipped => "skipped",
        }
    }
}

/// Flat summary of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub gamma_target: Option<f64>,
    pub gamma_fitted: Option<f64>,
    pub gamma_stderr: Option<f64>,
    pub fit_window: (f64, f64),
    pub plateau_ratio: Option<f64>,
    pub apriori_constant: Option<f64>,
    pub splitting_violations: usize,
    pub splitting_checked: usize,
    pub c0: f64,
    pub pressure_violations: usize,
    pub pressure_snapshots: usize,
    pub duhamel_violations: usize,
    pub duhamel_checks: usize,
    pub energy_violations: usize,
    pub gw_first: Option<f64>,
    pub gw_last: Option<f64>,
    pub exact_error: Option<f64>,
    /// `(check name, verdict)` in a fixed order.
    pub verdicts: Vec<(&'static str, Verdict)>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.16e}"))
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|(_, v)| *v != Verdict::Fail)
    }

    /// Total count of inequality violations across all checks.
    pub fn violations(&self) -> usize {
        self.splitting_violations + self.pressure_violations + self.duhamel_violations + self.energy_violations
    }

    fn fields(&self) -> Vec<(String, String)> {
        let mut f = vec![
            ("gamma_target".to_string(), opt(self.gamma_target)),
            ("gamma_fitted".to_string(), opt(self.gamma_fitted)),
            ("gamma_stderr".to_string(), opt(self.gamma_stderr)),
            ("fit_t_min".to_string(), format!("{:.16e}", self.fit_window.0)),
            ("fit_t_max".to_string(), format!("{:.16e}", self.fit_window.1)),
            ("plateau_ratio".to_string(), opt(self.plateau_ratio)),
            ("apriori_constant".to_string(), opt(self.apriori_constant)),
            ("C0".to_string(), format!("{:.16e}", self.c0)),
            ("splitting_checked".to_string(), self.splitting_checked.to_string()),
            ("splitting_violations".to_string(), self.splitting_violations.to_string()),
            ("pressure_snapshots".to_string(), self.pressure_snapshots.to_string()),
            ("pressure_violations".to_string(), self.pressure_violations.to_string()),
            ("duhamel_checks".to_string(), self.duhamel_checks.to_string()),
            ("duhamel_violations".to_string(), self.duhamel_violations.to_string()),
            ("energy_violations".to_string(), self.energy_violations.to_string()),
            ("gw_first_decade".to_string(), opt(self.gw_first)),
            ("gw_last_decade".to_string(), opt(self.gw_last)),
            ("exact_error".to_string(), opt(self.exact_error)),
        ];
        for (name, v) in &self.verdicts {
            f.push((format!("verdict_{name}"), v.as_str().to_string()));
        }
        f.push((
            "verdict".to_string(),
            if self.passed() { "pass" } else { "fail" }.to_string(),
        ));
        f
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn csv_header(&self) -> String {
        self.fields().into_iter().map(|(k, _)| k).collect::<Vec<_>>().join(",")
    }

    pub fn csv_row(&self) -> String {
        self.fields().into_iter().map(|(_, v)| v).collect::<Vec<_>>().join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::make_initial_data;
    use crate::solver::{simulate, RunSetup};
    use crate::spectral::SpectralField;

    fn series(f: impl Fn(f64) -> f64, times: impl Iterator<Item = f64>) -> EnergySeries {
        EnergySeries {
            rows: times
                .map(|t| EnergyRow {
                    t,
                    e: f(t),
                    d: 0.0,
                    tv: 0.0,
                    v_inf: 0.0,
                    e_low: 0.0,
                    e_high: 0.0,
                    r2: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn fits_synthetic_power_laws() {
        let s = series(|t| 3.0 * (1.0 + t).powf(-0.5), (0..200).map(|i| i as f64 * 0.5));
        let fit = fit_decay_rate(&s, (10.0, 90.0)).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12 && fit.stderr < 1e-12);
        let c = series(|_| 2.0, (0..40).map(|i| i as f64));
        assert!(fit_decay_rate(&c, (5.0, 30.0)).unwrap().slope.abs() < 1e-14);
        assert!(matches!(fit_decay_rate(&c, (100.0, 200.0)), Err(Error::Empty(_))));
        assert!(matches!(fit_decay_rate(&c, (5.0, 8.0)), Err(Error::TooFewSamples { .. })));
        let z = series(|_| 0.0, (0..40).map(|i| i as f64));
        assert!(fit_decay_rate(&z, (5.0, 30.0)).is_err());
    }

    #[test]
    fn plateau_of_exact_power_law_is_one() {
        let s = series(|t| (1.0 + t).powf(-0.75), (0..100).map(|i| i as f64));
        assert!((plateau_ratio(&s, (10.0, 90.0), 0.75) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn splitting_examples() {
        let g = GridSpec::new(16, 2.0 * PI_L).unwrap();
        // One mode with |k|^2 = 2 > r^2 = 1 at t = 1, C0 = 1.
        let u = VelocityField::new(
            SpectralField::from_fn(g, |x, y| x.sin() * y.cos()),
            SpectralField::from_fn(g, |x, y| -x.cos() * y.sin()),
        )
        .unwrap();
        let c = fourier_split_check(&u, 1.0, 1.0);
        assert!(c.holds && (c.rhs - 2.0 * c.lhs).abs() < 1e-12 * c.rhs);
        assert!((c.e_low + c.e_high - u.energy()).abs() < 1e-12);
        // All energy below r: at t = 0, r^2 = 2 + ... use a large C0.
        let c = fourier_split_check(&u, 0.0, 10.0);
        assert!(c.lhs < 1e-25);
        assert!(c.holds);
    }

    const PI_L: f64 = std::f64::consts::PI;

    #[test]
    fn apriori_examples() {
        let s = series(|t| 1.0 + t, (0..=100).map(|i| i as f64));
        let r = apriori_bound_check(&s, 1.0).unwrap();
        assert_eq!(r.constant, 1.0);
        assert!(r.pass);
        let late = series(|t| 1.0 + t, (2..=100).map(|i| i as f64));
        assert!(apriori_bound_check(&late, 1.0).is_err());
        let heat = series(|t| 1.0 / (1.0 + t), (0..=100).map(|i| i as f64));
        let r = apriori_bound_check(&heat, 1.0).unwrap();
        assert!(r.pass && (r.constant - 0.25).abs() < 1e-15);
        let grow = series(|t| (1.0 + t).powi(2), (0..=100).map(|i| i as f64));
        assert!(!apriori_bound_check(&grow, 1.0).unwrap().pass);
    }

    #[test]
    fn pressure_of_taylor_green() {
        let g = GridSpec::new(32, 2.0 * PI_L).unwrap();
        let u = VelocityField::new(
            SpectralField::from_fn(g, |x, y| x.sin() * y.cos()),
            SpectralField::from_fn(g, |x, y| -x.cos() * y.sin()),
        )
        .unwrap();
        let none = RadialVortexParams::new(0.0, 1.0).unwrap();
        let p = reconstruct_pressure(&u, 0.0, &none);
        for (m1, m2) in [(2, 0), (-2, 0), (0, 2), (0, -2)] {
            assert!((p.coeff(m1, m2) - Complex64::new(0.125, 0.0)).norm() < 1e-14);
        }
        assert!(p.max_amplitude() <= 0.125 + 1e-14);
        let c = pressure_bound_check(&u, 0.0, &none);
        assert_eq!(c.violations, 0);
        assert_eq!(pressure_bound_check(&VelocityField::zeros(g), 0.0, &none).violations, 0);
    }

    #[test]
    fn pressure_bound_with_vortex() {
        let g = GridSpec::new(64, 32.0).unwrap();
        let u = make_initial_data(0.5, g, 2, 1.0).unwrap();
        let vortex = RadialVortexParams::new(3.0, 1.0).unwrap();
        let c = pressure_bound_check(&u, 0.5, &vortex);
        assert_eq!(c.violations, 0);
        assert!(c.max_ratio <= 1.0 + 1e-10 && c.max_ratio > 0.0);
    }

    fn run_with_snapshots(mode: Mode, alpha: f64, u0: VelocityField, dt: f64, steps: usize) -> Vec<(f64, VelocityField)> {
        let g = *u0.grid();
        let vortex = RadialVortexParams::new(alpha, 1.0).unwrap();
        let mut stepper = crate::solver::Stepper::new(g, mode, vortex, dt).unwrap();
        let mut state = crate::solver::SolverState {
            u: u0,
            t: 0.0,
            dt,
            mode,
            vortex,
        };
        let mut out = vec![(0.0, state.u.clone())];
        for _ in 0..steps {
            stepper.step(&mut state).unwrap();
            out.push((state.t, state.u.clone()));
        }
        out
    }

    #[test]
    fn duhamel_heat_is_equality() {
        let g = GridSpec::new(32, 64.0).unwrap();
        let u0 = make_initial_data(1.0, g, 1, 1.0).unwrap();
        let snaps = run_with_snapshots(Mode::Heat, 0.0, u0.clone(), 0.05, 40);
        let none = RadialVortexParams::new(0.0, 1.0).unwrap();
        let r = duhamel_lowmode_check(&snaps, &u0, Mode::Heat, &none).unwrap();
        assert!(r.checks > 0 && r.violations == 0);
        assert!(r.min_margin.abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn duhamel_zero_data_with_vortex() {
        let g = GridSpec::new(32, 32.0).unwrap();
        let u0 = VelocityField::zeros(g);
        let snaps = run_with_snapshots(Mode::Perturbation, 2.0, u0.clone(), 0.05, 10);
        let vortex = RadialVortexParams::new(2.0, 1.0).unwrap();
        let r = duhamel_lowmode_check(&snaps, &u0, Mode::Perturbation, &vortex).unwrap();
        assert_eq!(r.violations, 0);
        assert!(snaps.iter().all(|s| s.1.energy() == 0.0));
    }

    #[test]
    fn duhamel_perturbation_holds() {
        let g = GridSpec::new(64, 32.0).unwrap();
        let u0 = make_initial_data(1.0, g, 4, 2.0).unwrap();
        let snaps = run_with_snapshots(Mode::Perturbation, 3.0, u0.clone(), 0.05, 60);
        let vortex = RadialVortexParams::new(3.0, 1.0).unwrap();
        let r = duhamel_lowmode_check(&snaps, &u0, Mode::Perturbation, &vortex).unwrap();
        assert!(r.checks > 0);
        assert_eq!(r.violations, 0, "{r:?}");
    }

    #[test]
    fn duhamel_requires_dense_snapshots() {
        let g = GridSpec::new(16, 16.0).unwrap();
        let u0 = VelocityField::zeros(g);
        let snaps: Vec<_> = (0..5).map(|i| (i as f64 * 0.1, u0.clone())).collect();
        let none = RadialVortexParams::new(0.0, 1.0).unwrap();
        assert!(matches!(
            duhamel_lowmode_check(&snaps, &u0, Mode::NavierStokes, &none),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn gallay_wayne_examples() {
        let g = GridSpec::new(32, 32.0).unwrap();
        let z: Vec<_> = (1..20).map(|i| (i as f64, VelocityField::zeros(g))).collect();
        let r = gallay_wayne_check(&z, 4.0).unwrap();
        assert!(r.pass && r.scaled.iter().all(|s| s.1 == 0.0));
        assert!(gallay_wayne_check(&z, 2.0).is_err());

        // Heat flow of localized data: t^(1/2) ||u||_inf decreases.
        let u0 = make_initial_data(1.0, GridSpec::new(64, 64.0).unwrap(), 3, 1.0).unwrap();
        let snaps: Vec<_> = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 24.0]
            .iter()
            .map(|&t| (t, crate::heat::heat_evolve_velocity(&u0, t).unwrap()))
            .collect();
        let r = gallay_wayne_check(&snaps, f64::INFINITY).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn energy_inequality_modes() {
        let g = GridSpec::new(64, 32.0).unwrap();
        let u0 = make_initial_data(1.0, g, 6, 1.0).unwrap();
        for (mode, alpha) in [(Mode::Heat, 0.0), (Mode::NavierStokes, 0.0), (Mode::Perturbation, 1.0)] {
            let setup = RunSetup {
                grid: g,
                mode,
                vortex: RadialVortexParams::new(alpha, 1.0).unwrap(),
                dt: 0.02,
                t_end: 4.0,
                sample_interval: 0.02,
                c0: 1.0,
            };
            let mut rows = Vec::new();
            let s = simulate(&setup, u0.clone(), &mut rows, &mut []).unwrap();
            let r = energy_inequality_check(&s).unwrap();
            assert_eq!(r.violations, 0, "{mode}: {r:?}");
            if mode != Mode::Perturbation {
                // Equality case: the centered quotient tracks -2D closely.
                for w in s.rows.windows(3) {
                    let de = (w[2].e - w[0].e) / (w[2].t - w[0].t);
                    assert!((de + 2.0 * w[1].d).abs() < 1e-3 * w[1].d, "{} {}", de, w[1].d);
                }
            }
            let split = splitting_summary(&s);
            assert_eq!(split.violations, 0);
            assert!(split.partition_defect < 1e-10);
        }
        assert!(energy_inequality_check(&EnergySeries::default()).is_err());
    }

    #[test]
    fn report_formats() {
        let r = DecayReport {
            gamma_target: Some(1.0),
            gamma_fitted: None,
            gamma_stderr: None,
            fit_window: (10.0, 100.0),
            plateau_ratio: None,
            apriori_constant: Some(0.5),
            splitting_violations: 0,
            splitting_checked: 3,
            c0: 1.0,
            pressure_violations: 0,
            pressure_snapshots: 20,
            duhamel_violations: 0,
            duhamel_checks: 10,
            energy_violations: 0,
            gw_first: None,
            gw_last: None,
            exact_error: None,
            verdicts: vec![("splitting", Verdict::Pass), ("rate", Verdict::Skipped)],
        };
        assert!(r.passed());
        let text = r.to_text();
        assert!(text.contains("gamma_fitted = NA\n"));
        assert!(text.contains("verdict_rate = skipped\n"));
        assert_eq!(r.csv_header().split(',').count(), r.csv_row().split(',').count());
    }
}
