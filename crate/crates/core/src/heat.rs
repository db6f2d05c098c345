//! Heat semigroup in spectral space, heat-energy decay exponents, and
//! initial data with a prescribed low-frequency envelope.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{dealias_velocity, Complex64, GridSpec, SpectralField, VelocityField};
use crate::stats::{fit_line, log1p_spaced, lp_norm};

/// Exponents above this are reported as non-algebraic.
pub const GAMMA_CLAMP: f64 = 1.5;

/// `f(k) exp(-|k|^2 t)`.
pub fn heat_evolve(f: &SpectralField, t: f64) -> Result<SpectralField> {
    check_time(t)?;
    Ok(f.map_modes(|[k1, k2], c| c * (-(k1 * k1 + k2 * k2) * t).exp()))
}

pub fn heat_evolve_velocity(u: &VelocityField, t: f64) -> Result<VelocityField> {
    Ok(VelocityField::from_parts_unchecked(
        heat_evolve(u.u1(), t)?,
        heat_evolve(u.u2(), t)?,
    ))
}

/// `||exp(t Laplacian) u||_2^2` without forming the evolved field.
pub fn heat_energy(u: &VelocityField, t: f64) -> f64 {
    let grid = *u.grid();
    let l2 = grid.length() * grid.length();
    let (a, b) = (u.u1().coeffs(), u.u2().coeffs());
    l2 * (0..grid.len())
        .map(|i| (-2.0 * grid.k_squared(i) * t).exp() * (a[i].norm_sqr() + b[i].norm_sqr()))
        .sum::<f64>()
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be a finite nonnegative time, got {t}")));
    }
    Ok(())
}

/// Outcome of [`heat_lp_decay_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct LpDecayReport {
    pub p: f64,
    /// `(t, t^(1 - 1/p) ||exp(t Laplacian) omega||_p)`.
    pub scaled: Vec<(f64, f64)>,
    pub sup: f64,
    pub pass: bool,
}

/// Relative growth allowed between the two halves of the time list.
pub const LP_GROWTH_TOL: f64 = 0.1;

/// Samples `t^(1 - 1/p) ||exp(t Laplacian) omega||_p` and checks that it does
/// not grow across the window.
pub fn heat_lp_decay_check(omega0: &SpectralField, p: f64, times: &[f64]) -> Result<LpDecayReport> {
    if times.is_empty() {
        return Err(Error::Empty("time list"));
    }
    if !(p >= 1.0) {
        return Err(Error::param("p", format!("must lie in [1, inf], got {p}")));
    }
    let grid = *omega0.grid();
    let limit = grid.validity_time();
    let (lo, hi) = times
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    if !(lo > 0.0) || hi >= limit {
        return Err(Error::OutsideValidityWindow {
            t_min: lo,
            t_max: hi,
            limit,
        });
    }
    let exponent = 1.0 - 1.0 / p;
    let scaled: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| {
            let samples = heat_evolve(omega0, t).expect("positive time").to_physical();
            (t, t.powf(exponent) * lp_norm(&samples, grid.cell_area(), p))
        })
        .collect();
    let sup = scaled.iter().map(|s| s.1).fold(0.0, f64::max);
    let mut order: Vec<&(f64, f64)> = scaled.iter().collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mid = order.len() / 2;
    let first = order[..mid.max(1)].iter().map(|s| s.1).fold(0.0, f64::max);
    let second = order[mid..].iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(LpDecayReport {
        p,
        scaled,
        sup,
        pass: second <= (1.0 + LP_GROWTH_TOL) * first,
    })
}

/// Divergence-free data with `|u0(k)| = A |k|^(gamma - 1) exp(-|k|^2)`, so that
/// `||exp(t Laplacian) u0||_2^2` is proportional to `(1 + t)^(-gamma)` on the plane.
///
/// The stream function carries a smooth odd random phase, which keeps the
/// data localized near the origin; `||u0||_2 = amplitude`.
pub fn make_initial_data(gamma: f64, grid: GridSpec, seed: u64, amplitude: f64) -> Result<VelocityField> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param("gamma", format!("must lie in (0, 1], got {gamma}")));
    }
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::param("amplitude", format!("must be positive, got {amplitude}")));
    }
    let phase = RandomPhase::new(seed);
    let i = Complex64::new(0.0, 1.0);
    let mut u1 = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut u2 = u1.clone();
    for idx in 1..grid.len() {
        let k = grid.wavevector(idx);
        let kk = k[0] * k[0] + k[1] * k[1];
        let psi = Complex64::from_polar(kk.powf(0.5 * gamma - 1.0) * (-kk).exp(), phase.at(k));
        // u = curl^perp psi = (-d2 psi, d1 psi).
        u1[idx] = -i * k[1] * psi;
        u2[idx] = i * k[0] * psi;
    }
    let raw = VelocityField::from_parts_unchecked(
        SpectralField::from_coeffs(grid, u1)?,
        SpectralField::from_coeffs(grid, u2)?,
    );
    let raw = dealias_velocity(&raw);
    let energy = raw.energy();
    if energy == 0.0 {
        return Err(Error::Degenerate("grid resolves no modes of the envelope"));
    }
    Ok(raw.scale(amplitude / energy.sqrt()))
}

/// Odd phase `theta(k) = k.c + sum_j a_j sin(k.b_j)`.
struct RandomPhase {
    shift: [f64; 2],
    terms: Vec<(f64, [f64; 2])>,
}

impl RandomPhase {
    const TERMS: usize = 3;

    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut polar = |rmin: f64, rmax: f64| {
            let r = rng.gen_range(rmin..rmax);
            let a = rng.gen_range(0.0..2.0 * PI);
            [r * a.cos(), r * a.sin()]
        };
        let shift = polar(0.0, 2.0);
        let dirs: Vec<[f64; 2]> = (0..Self::TERMS).map(|_| polar(1.0, 3.0)).collect();
        let terms = dirs
            .into_iter()
            .map(|b| (rng.gen_range(0.5..1.5), b))
            .collect();
        RandomPhase { shift, terms }
    }

    fn at(&self, k: [f64; 2]) -> f64 {
        let dot = |b: [f64; 2]| k[0] * b[0] + k[1] * b[1];
        dot(self.shift)
            + self
                .terms
                .iter()
                .map(|&(a, b)| a * dot(b).sin())
                .sum::<f64>()
    }
}

/// Heat-energy samples and the fitted algebraic exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatDecayProfile {
    /// Fitted exponent clamped to `[0, GAMMA_CLAMP]`.
    pub gamma: f64,
    /// Unclamped `-d log E / d log(1 + t)`.
    pub raw_exponent: f64,
    pub stderr: f64,
    /// `(t, ||exp(t Laplacian) u0||_2^2)`.
    pub samples: Vec<(f64, f64)>,
    pub fit_window: (f64, f64),
    /// False when the raw exponent leaves `[0, GAMMA_CLAMP]`.
    pub algebraic: bool,
}

pub fn estimate_heat_exponent(u0: &VelocityField, window: (f64, f64), n_samples: usize) -> Result<HeatDecayProfile> {
    let (t_min, t_max) = window;
    let limit = u0.grid().validity_time();
    if !(t_min > 0.0 && t_min < t_max && t_max < limit) {
        return Err(Error::OutsideValidityWindow { t_min, t_max, limit });
    }
    if n_samples < 8 {
        return Err(Error::TooFewSamples {
            needed: 8,
            found: n_samples,
        });
    }
    let times = log1p_spaced(t_min, t_max, n_samples);
    let samples: Vec<(f64, f64)> = times.iter().map(|&t| (t, heat_energy(u0, t))).collect();
    if samples.iter().any(|s| !(s.1 > 0.0)) {
        return Err(Error::Degenerate("heat energy vanishes in the window"));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0.ln_1p()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let fit = fit_line(&x, &y)?;
    let raw = -fit.slope;
    Ok(HeatDecayProfile {
        gamma: raw.clamp(0.0, GAMMA_CLAMP),
        raw_exponent: raw,
        stderr: fit.stderr,
        samples,
        fit_window: window,
        algebraic: (0.0..=GAMMA_CLAMP).contains(&raw),
    })
}
