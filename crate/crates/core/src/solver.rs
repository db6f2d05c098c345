//! Time integration of the perturbation equation
//! `u_t + u.grad u + grad p - Laplacian u = -u.grad v - v.grad u`
//! around the Oseen background, with pure Navier-Stokes and heat modes.
//!
//! Diffusion is integrated exactly with `exp(-|k|^2 dt)` factors and the
//! remaining terms with classical RK4 (Lawson form). Products are formed in
//! physical space, dealiased, and Leray projected.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{
    forward_normalized, inverse_normalized, split_packed, Complex64, GridSpec, SpectralField,
    VelocityField,
};
use crate::vortex::{OseenField, RadialVortexParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative tolerance for treating `dt`, sample interval and end time as commensurate.
pub const COMMENSURATE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Perturbation,
    NavierStokes,
    Heat,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Perturbation => "perturbation",
            Mode::NavierStokes => "navier_stokes",
            Mode::Heat => "heat",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perturbation" => Ok(Mode::Perturbation),
            "navier_stokes" => Ok(Mode::NavierStokes),
            "heat" => Ok(Mode::Heat),
            other => Err(Error::param("run.mode", format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub u: VelocityField,
    pub t: f64,
    pub dt: f64,
    pub mode: Mode,
    pub vortex: RadialVortexParams,
}

/// Physical-space snapshot of a velocity and its gradient.
pub(crate) struct PhysicalVelocity {
    pub u: [Vec<f64>; 2],
    /// `d_j u_i` stored as `grad[i][j]`.
    pub grad: [[Vec<f64>; 2]; 2],
}

/// Reusable integrator for one grid, mode, background and step size.
pub struct Stepper {
    grid: GridSpec,
    mode: Mode,
    vortex: RadialVortexParams,
    dt: f64,
    kx: Vec<f64>,
    ky: Vec<f64>,
    kk: Vec<f64>,
    resolved: Vec<bool>,
    half: Vec<f64>,
    full: Vec<f64>,
    cache: Vec<(u64, Arc<OseenField>)>,
}

type Pair = (Vec<Complex64>, Vec<Complex64>);

impl Stepper {
    pub fn new(grid: GridSpec, mode: Mode, vortex: RadialVortexParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("time.dt", format!("must be positive, got {dt}")));
        }
        let len = grid.len();
        let (mut kx, mut ky, mut kk) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for i in 0..len {
            let [a, b] = grid.wavevector(i);
            kx[i] = a;
            ky[i] = b;
            kk[i] = a * a + b * b;
        }
        let resolved = (0..len).map(|i| grid.is_resolved(i)).collect();
        let half = kk.iter().map(|k| (-0.5 * k * dt).exp()).collect();
        let full = kk.iter().map(|k| (-k * dt).exp()).collect();
        Ok(Stepper {
            grid,
            mode,
            vortex,
            dt,
            kx,
            ky,
            kk,
            resolved,
            half,
            full,
            cache: Vec::new(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Whether the background enters the equations.
    pub fn has_background(&self) -> bool {
        self.mode == Mode::Perturbation && self.vortex.alpha() != 0.0
    }

    /// Oseen field on the grid at time `t`, if the background is active.
    pub fn background(&mut self, t: f64) -> Option<Arc<OseenField>> {
        if !self.has_background() {
            return None;
        }
        let key = t.to_bits();
        if let Some((_, f)) = self.cache.iter().find(|(k, _)| *k == key) {
            return Some(f.clone());
        }
        let field = Arc::new(OseenField::sample(&self.vortex, &self.grid, t));
        if self.cache.len() >= 3 {
            self.cache.remove(0);
        }
        self.cache.push((key, field.clone()));
        Some(field)
    }

    /// Velocity and gradient in physical space, using three packed transforms.
    pub(crate) fn physical(&self, a: &[Complex64], b: &[Complex64]) -> PhysicalVelocity {
        let i = Complex64::new(0.0, 1.0);
        let unpack = |buf: Vec<Complex64>| -> (Vec<f64>, Vec<f64>) {
            let mut buf = buf;
            inverse_normalized(&self.grid, &mut buf);
            buf.into_iter().map(|c| (c.re, c.im)).unzip()
        };
        let (u1, u2) = unpack(a.iter().zip(b).map(|(x, y)| x + i * y).collect());
        // d1 u1 + i d1 u2 = i k1 (a + i b).
        let (d1u1, d1u2) = unpack(
            (0..a.len())
                .map(|j| i * self.kx[j] * (a[j] + i * b[j]))
                .collect(),
        );
        let (d2u1, d2u2) = unpack(
            (0..a.len())
                .map(|j| i * self.ky[j] * (a[j] + i * b[j]))
                .collect(),
        );
        PhysicalVelocity {
            u: [u1, u2],
            grad: [[d1u1, d2u1], [d1u2, d2u2]],
        }
    }

    /// Projected, dealiased `-(u.grad u + u.grad v + v.grad u)`.
    fn nonlinear(&mut self, a: &[Complex64], b: &[Complex64], t: f64) -> Pair {
        let len = self.grid.len();
        if self.mode == Mode::Heat {
            return (vec![ZERO; len], vec![ZERO; len]);
        }
        let phys = self.physical(a, b);
        let [u1, u2] = &phys.u;
        let g = &phys.grad;
        let mut packed: Vec<Complex64> = match self.background(t) {
            None => (0..len)
                .map(|j| {
                    let n1 = u1[j] * g[0][0][j] + u2[j] * g[0][1][j];
                    let n2 = u1[j] * g[1][0][j] + u2[j] * g[1][1][j];
                    Complex64::new(-n1, -n2)
                })
                .collect(),
            Some(bg) => {
                let (v1, v2, h) = (&bg.v1, &bg.v2, &bg.grad);
                (0..len)
                    .map(|j| {
                        let (w1, w2) = (u1[j] + v1[j], u2[j] + v2[j]);
                        let n1 = w1 * g[0][0][j] + w2 * g[0][1][j] + u1[j] * h[0][0][j] + u2[j] * h[0][1][j];
                        let n2 = w1 * g[1][0][j] + w2 * g[1][1][j] + u1[j] * h[1][0][j] + u2[j] * h[1][1][j];
                        Complex64::new(-n1, -n2)
                    })
                    .collect()
            }
        };
        forward_normalized(&self.grid, &mut packed);
        let (mut n1, mut n2) = split_packed(&self.grid, &packed);
        n1[0] = ZERO;
        n2[0] = ZERO;
        for j in 1..len {
            if !self.resolved[j] {
                n1[j] = ZERO;
                n2[j] = ZERO;
                continue;
            }
            let proj = (self.kx[j] * n1[j] + self.ky[j] * n2[j]) / self.kk[j];
            n1[j] -= self.kx[j] * proj;
            n2[j] -= self.ky[j] * proj;
        }
        (n1, n2)
    }

    /// Full tendency `P N(u) + Laplacian u` at time `t`.
    pub fn tendency(&mut self, u: &VelocityField, t: f64) -> VelocityField {
        let (mut n1, mut n2) = self.nonlinear(u.u1().coeffs(), u.u2().coeffs(), t);
        let (a, b) = (u.u1().coeffs(), u.u2().coeffs());
        for j in 0..self.grid.len() {
            n1[j] -= self.kk[j] * a[j];
            n2[j] -= self.kk[j] * b[j];
        }
        pair_to_velocity(self.grid, (n1, n2))
    }

    /// One integrating-factor RK4 step over `[t, t + dt]`, with the three
    /// stage times supplied so that repeated steps share cached backgrounds.
    fn advance(&mut self, u: &Pair, t: f64, t_half: f64, t_next: f64) -> Pair {
        let len = self.grid.len();
        let dt = self.dt;
        let (a, b) = (&u.0, &u.1);
        let k1 = self.nonlinear(a, b, t);
        let stage = |k: &Pair, c: f64, pre: &dyn Fn(usize, Complex64, Complex64) -> Complex64| -> Pair {
            let s1 = (0..len).map(|j| pre(j, a[j], c * k.0[j])).collect();
            let s2 = (0..len).map(|j| pre(j, b[j], c * k.1[j])).collect();
            (s1, s2)
        };
        let eh = self.half.clone();
        let ef = self.full.clone();
        let ua = stage(&k1, 0.5 * dt, &|j, x, k| eh[j] * (x + k));
        let k2 = self.nonlinear(&ua.0, &ua.1, t_half);
        let ub = stage(&k2, 0.5 * dt, &|j, x, k| eh[j] * x + k);
        let k3 = self.nonlinear(&ub.0, &ub.1, t_half);
        let uc = stage(&k3, dt, &|j, x, k| ef[j] * x + eh[j] * k);
        let k4 = self.nonlinear(&uc.0, &uc.1, t_next);
        let combine = |x: &[Complex64], k1: &[Complex64], k2: &[Complex64], k3: &[Complex64], k4: &[Complex64]| -> Vec<Complex64> {
            (0..len)
                .map(|j| ef[j] * x[j] + dt / 6.0 * (ef[j] * k1[j] + 2.0 * eh[j] * (k2[j] + k3[j]) + k4[j]))
                .collect()
        };
        (
            combine(a, &k1.0, &k2.0, &k3.0, &k4.0),
            combine(b, &k1.1, &k2.1, &k3.1, &k4.1),
        )
    }

    /// Advances `state` by one step of size `self.dt()`.
    pub fn step(&mut self, state: &mut SolverState) -> Result<()> {
        let t = state.t;
        let u = (state.u.u1().coeffs().to_vec(), state.u.u2().coeffs().to_vec());
        let next = self.advance(&u, t, t + 0.5 * self.dt, t + self.dt);
        let next = pair_to_velocity(self.grid, next);
        check_finite(&next, 0, t + self.dt)?;
        state.u = next;
        state.t = t + self.dt;
        Ok(())
    }
}

fn pair_to_velocity(grid: GridSpec, (a, b): Pair) -> VelocityField {
    VelocityField::from_parts_unchecked(
        SpectralField::from_coeffs(grid, a).expect("grid-sized"),
        SpectralField::from_coeffs(grid, b).expect("grid-sized"),
    )
}

fn check_finite(u: &VelocityField, step: u64, t: f64) -> Result<()> {
    let e = u.energy();
    if !e.is_finite() || e > 1e300 {
        return Err(Error::NumericalAbort {
            step,
            t,
            reason: format!("energy became {e}"),
        });
    }
    Ok(())
}

/// Tendency of the equations at `u` and time `t`.
pub fn rhs(u: &VelocityField, t: f64, mode: Mode, vortex: &RadialVortexParams) -> VelocityField {
    let mut stepper = Stepper::new(*u.grid(), mode, *vortex, 1.0).expect("unit step is valid");
    stepper.tendency(u, t)
}

/// One step of size `state.dt`; builds a fresh [`Stepper`].
pub fn step(state: &SolverState) -> Result<SolverState> {
    let mut stepper = Stepper::new(*state.u.grid(), state.mode, state.vortex, state.dt)?;
    let bound = stability_bound(&stepper, &state.u, state.t);
    if state.dt > bound {
        return Err(Error::Unstable {
            dt: state.dt,
            bound,
            t: state.t,
        });
    }
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// `0.5 min(h / max(|u| + |v|), 1)`.
pub fn stability_bound(stepper: &Stepper, u: &VelocityField, t: f64) -> f64 {
    let (u1, u2) = u.to_physical();
    let mut stepper_bg = None;
    if stepper.has_background() {
        stepper_bg = Some(OseenField::sample(&stepper.vortex, &stepper.grid, t));
    }
    bound_from(&stepper.grid, &u1, &u2, stepper_bg.as_ref())
}

fn bound_from(grid: &GridSpec, u1: &[f64], u2: &[f64], bg: Option<&OseenField>) -> f64 {
    let speed = (0..u1.len())
        .map(|j| {
            let v = bg.map_or(0.0, |b| b.v1[j].hypot(b.v2[j]));
            u1[j].hypot(u2[j]) + v
        })
        .fold(0.0, f64::max);
    if speed == 0.0 {
        return 0.5;
    }
    0.5 * (grid.spacing() / speed).min(1.0)
}

/// One sampled row of energy functionals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRow {
    pub t: f64,
    /// `||u||_2^2`.
    pub e: f64,
    /// `||grad u||_2^2`.
    pub d: f64,
    /// Grid transfer `<u.grad v + v.grad u, u>`.
    pub tv: f64,
    pub v_inf: f64,
    pub e_low: f64,
    pub e_high: f64,
    /// Split radius squared `(1 + C0) / (t + 1)`.
    pub r2: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergySeries {
    pub rows: Vec<EnergyRow>,
}

impl EnergySeries {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e).collect()
    }
}

/// Receives rows as they are produced.
pub trait SeriesSink {
    fn push(&mut self, row: &EnergyRow) -> Result<()>;
}

impl SeriesSink for Vec<EnergyRow> {
    fn push(&mut self, row: &EnergyRow) -> Result<()> {
        Vec::push(self, *row);
        Ok(())
    }
}

/// What an observer sees after every step (and at the initial time).
pub struct StepView<'a> {
    pub step: u64,
    pub t: f64,
    pub u: &'a VelocityField,
    /// Background at `t`, when active.
    pub background: Option<&'a OseenField>,
    pub stepper: &'a Stepper,
}

/// Hook for diagnostics that need the full field during a run.
pub trait Observer {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()>;
}

/// Solver settings for one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSetup {
    pub grid: GridSpec,
    pub mode: Mode,
    pub vortex: RadialVortexParams,
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    /// Splitting constant: `r^2 = (1 + C0) / (t + 1)`.
    pub c0: f64,
}

impl RunSetup {
    /// `(steps per sample, number of samples after t = 0)`.
    pub fn schedule(&self) -> Result<(u64, u64)> {
        let per = whole_ratio(self.sample_interval, self.dt, "time.sample_interval")?;
        let samples = if self.t_end == 0.0 {
            0
        } else {
            whole_ratio(self.t_end, self.sample_interval, "time.t_end")?
        };
        Ok((per, samples))
    }
}

fn whole_ratio(a: f64, b: f64, name: &'static str) -> Result<u64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::param(name, format!("must be positive, got {a}")));
    }
    let r = a / b;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > COMMENSURATE_TOL * r {
        return Err(Error::param(name, format!("{a} is not a whole multiple of {b}")));
    }
    Ok(n as u64)
}

/// Energy functionals of `u` at time `t`.
pub(crate) fn energy_row(
    stepper: &Stepper,
    u: &VelocityField,
    t: f64,
    background: Option<&OseenField>,
    c0: f64,
) -> (EnergyRow, PhysicalVelocity) {
    let grid = stepper.grid;
    let l2 = grid.length() * grid.length();
    let r2 = (1.0 + c0) / (t + 1.0);
    let (a, b) = (u.u1().coeffs(), u.u2().coeffs());
    let (mut e_low, mut e_high, mut d) = (0.0, 0.0, 0.0);
    for j in 0..grid.len() {
        let m = a[j].norm_sqr() + b[j].norm_sqr();
        if stepper.kk[j] < r2 {
            e_low += m;
        } else {
            e_high += m;
        }
        d += stepper.kk[j] * m;
    }
    let phys = stepper.physical(a, b);
    let (tv, v_inf) = match background {
        None => (0.0, 0.0),
        Some(bg) => {
            let [u1, u2] = &phys.u;
            let (g, h) = (&phys.grad, &bg.grad);
            let mut s = 0.0;
            for j in 0..grid.len() {
                let uv1 = u1[j] * h[0][0][j] + u2[j] * h[0][1][j] + bg.v1[j] * g[0][0][j] + bg.v2[j] * g[0][1][j];
                let uv2 = u1[j] * h[1][0][j] + u2[j] * h[1][1][j] + bg.v1[j] * g[1][0][j] + bg.v2[j] * g[1][1][j];
                s += u1[j] * uv1 + u2[j] * uv2;
            }
            (s * grid.cell_area(), bg.sup_norm())
        }
    };
    let row = EnergyRow {
        t,
        e: l2 * (e_low + e_high),
        d: l2 * d,
        tv,
        v_inf,
        e_low: l2 * e_low,
        e_high: l2 * e_high,
        r2,
    };
    (row, phys)
}

/// Runs from `t = 0` to `t_end`, emitting a row every sample interval.
///
/// Time is `step * dt`. The stability bound is checked at every sample and
/// the run aborts rather than sub-stepping.
pub fn simulate(
    setup: &RunSetup,
    u0: VelocityField,
    sink: &mut dyn SeriesSink,
    observers: &mut [&mut dyn Observer],
) -> Result<EnergySeries> {
    if u0.grid() != &setup.grid {
        return Err(Error::GridMismatch);
    }
    if !(setup.c0 > 0.0) {
        return Err(Error::param("analysis.C0", "must be positive"));
    }
    let (per, samples) = setup.schedule()?;
    let mut stepper = Stepper::new(setup.grid, setup.mode, setup.vortex, setup.dt)?;
    let mut series = EnergySeries::default();
    let mut u = (u0.u1().coeffs().to_vec(), u0.u2().coeffs().to_vec());
    let total = per * samples;
    let mut field = u0;
    for step in 0..=total {
        let t = step as f64 * setup.dt;
        let bg = stepper.background(t);
        if step % per == 0 {
            let (row, phys) = energy_row(&stepper, &field, t, bg.as_deref(), setup.c0);
            let bound = bound_from(&setup.grid, &phys.u[0], &phys.u[1], bg.as_deref());
            if setup.dt > bound {
                return Err(Error::Unstable {
                    dt: setup.dt,
                    bound,
                    t,
                });
            }
            sink.push(&row)?;
            series.rows.push(row);
        }
        {
            let view = StepView {
                step,
                t,
                u: &field,
                background: bg.as_deref(),
                stepper: &stepper,
            };
            for obs in observers.iter_mut() {
                obs.observe(&view)?;
            }
        }
        if step == total {
            break;
        }
        let t_half = (step as f64 + 0.5) * setup.dt;
        let t_next = (step + 1) as f64 * setup.dt;
        u = stepper.advance(&u, t, t_half, t_next);
        field = pair_to_velocity(setup.grid, (u.0.clone(), u.1.clone()));
        check_finite(&field, step + 1, t_next).map_err(|e| match e {
            Error::NumericalAbort { step, t, reason } => Error::NumericalAbort {
                step,
                t,
                reason: format!("{reason} after series row {}", series.rows.len()),
            },
            other => other,
        })?;
    }
    Ok(series)
}
