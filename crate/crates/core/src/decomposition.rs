//! Splitting a velocity with integrable vorticity into a finite-energy part
//! and a Gaussian vortex carrying all of the circulation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, SpectralField, VelocityField};
use crate::stats::{fit_line, lp_norm_vec};
use crate::vortex::{biot_savart_spectral, radial_vorticity, RadialVortexParams};

/// Largest fraction of `|omega|` mass allowed outside radius `L/4`.
pub const BOUNDARY_MASS_FRACTION: f64 = 0.01;

/// Largest periodic-image contamination tolerated in far-field fits.
pub const IMAGE_CONTAMINATION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub u0: VelocityField,
    pub vortex: RadialVortexParams,
    /// Grid integral of `omega0` minus the sampled Gaussian.
    pub residual_circulation: f64,
}

impl Decomposition {
    /// The Gaussian vorticity of the vortex part sampled on `grid`.
    pub fn sampled_background(&self, grid: GridSpec) -> SpectralField {
        sampled_gaussian(&self.vortex, grid)
    }
}

fn sampled_gaussian(params: &RadialVortexParams, grid: GridSpec) -> SpectralField {
    SpectralField::from_fn(grid, |x, y| radial_vorticity(params, [x, y], 0.0))
}

pub fn radial_energy_decompose(omega0: &SpectralField, t0: f64) -> Result<Decomposition> {
    let grid = *omega0.grid();
    let length = grid.length();
    if !(t0 > 0.0) {
        return Err(Error::param("t0", format!("must be positive, got {t0}")));
    }
    if 2.0 * t0.sqrt() > length / 8.0 {
        return Err(Error::param(
            "t0",
            format!("Gaussian core 2 sqrt(t0) = {} exceeds L/8 = {}", 2.0 * t0.sqrt(), length / 8.0),
        ));
    }
    let samples = omega0.to_physical();
    let (mut total, mut outer) = (0.0, 0.0);
    for (i, w) in samples.iter().enumerate() {
        let [x, y] = grid.point(i);
        total += w.abs();
        if x.hypot(y) > length / 4.0 {
            outer += w.abs();
        }
    }
    if total > 0.0 && outer > BOUNDARY_MASS_FRACTION * total {
        return Err(Error::param(
            "omega0",
            format!(
                "{:.2}% of the vorticity mass lies outside radius L/4",
                100.0 * outer / total
            ),
        ));
    }
    let alpha = omega0.integral();
    let vortex = RadialVortexParams::new(alpha, t0)?;
    let diff = omega0.sub(&sampled_gaussian(&vortex, grid));
    Ok(Decomposition {
        u0: biot_savart_spectral(&diff),
        vortex,
        residual_circulation: diff.integral(),
    })
}

/// Radii `r` on which periodic images perturb a point-vortex-like tail by
/// less than [`IMAGE_CONTAMINATION`]: `L/8 < r < min(0.45 L, L sqrt(0.1 / pi))`.
pub fn far_field_annulus(grid: &GridSpec) -> (f64, f64) {
    let l = grid.length();
    (l / 8.0, (0.45 * l).min(l * (IMAGE_CONTAMINATION / PI).sqrt()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FarFieldFit {
    /// Slope of `log max_{|x| = r} |u0|` against `log r`.
    pub slope: f64,
    pub stderr: f64,
    /// `(r, max over the circle)`.
    pub profile: Vec<(f64, f64)>,
    /// False when the slope is shallower than -1/2.
    pub localized: bool,
}

pub fn far_field_exponent(u0: &VelocityField, radii: &[f64]) -> Result<FarFieldFit> {
    let grid = *u0.grid();
    let (lo, hi) = far_field_annulus(&grid);
    if radii.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: radii.len(),
        });
    }
    if let Some(r) = radii.iter().find(|&&r| !(r > lo && r < hi)) {
        return Err(Error::param(
            "radii",
            format!("{r} lies outside the uncontaminated annulus ({lo}, {hi})"),
        ));
    }
    let (a, b) = u0.to_physical();
    let speed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.hypot(*y)).collect();
    let profile: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| (r, circle_max(&speed, &grid, r)))
        .collect();
    if profile.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::Degenerate("velocity vanishes on a sampling circle"));
    }
    let x: Vec<f64> = profile.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = profile.iter().map(|p| p.1.ln()).collect();
    let fit = fit_line(&x, &y)?;
    Ok(FarFieldFit {
        slope: fit.slope,
        stderr: fit.stderr,
        profile,
        localized: fit.slope <= -0.5,
    })
}

fn circle_max(samples: &[f64], grid: &GridSpec, r: f64) -> f64 {
    let m = ((16.0 * PI * r / grid.spacing()).ceil() as usize).max(64);
    (0..m)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / m as f64;
            bilinear(samples, grid, r * th.cos(), r * th.sin())
        })
        .fold(0.0, f64::max)
}

/// Periodic bilinear interpolation of grid samples.
fn bilinear(samples: &[f64], grid: &GridSpec, x: f64, y: f64) -> f64 {
    let n = grid.n();
    let h = grid.spacing();
    let fx = (x + 0.5 * grid.length()) / h;
    let fy = (y + 0.5 * grid.length()) / h;
    let (ix, iy) = (fx.floor(), fy.floor());
    let (sx, sy) = (fx - ix, fy - iy);
    let wrap = |i: f64| (i as i64).rem_euclid(n as i64) as usize;
    let (c0, c1) = (wrap(ix), wrap(ix + 1.0));
    let (r0, r1) = (wrap(iy), wrap(iy + 1.0));
    let f = |r: usize, c: usize| samples[r * n + c];
    (1.0 - sy) * ((1.0 - sx) * f(r0, c0) + sx * f(r0, c1)) + sy * ((1.0 - sx) * f(r1, c0) + sx * f(r1, c1))
}

/// `||u0||_p` over the box for `p` in `(1, 2]`.
pub fn lp_membership_check(u0: &VelocityField, p: f64) -> Result<f64> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::param("p", format!("must lie in (1, 2], got {p}")));
    }
    let (a, b) = u0.to_physical();
    Ok(lp_norm_vec(&a, &b, u0.grid().cell_area(), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::estimate_heat_exponent;
    use crate::spectral::curl2d;
    use crate::vortex::oseen_velocity;

    fn dipole(grid: GridSpec) -> SpectralField {
        SpectralField::from_fn(grid, |x, y| x * (-(x * x + y * y)).exp())
    }

    fn offset_gaussian(grid: GridSpec) -> SpectralField {
        SpectralField::from_fn(grid, |x, y| {
            let (x, y) = (x - 1.0, y);
            (-(x * x + y * y) / 4.0).exp() / (4.0 * PI)
        })
    }

    #[test]
    fn self_decomposition_is_trivial() {
        let g = GridSpec::new(128, 64.0).unwrap();
        let p = RadialVortexParams::new(2.5, 1.0).unwrap();
        let w = SpectralField::from_fn(g, |x, y| radial_vorticity(&p, [x, y], 0.0));
        let d = radial_energy_decompose(&w, 1.0).unwrap();
        assert!((d.vortex.alpha() - 2.5).abs() < 1e-12);
        assert!(d.u0.energy().sqrt() < 1e-14);
        assert!(d.residual_circulation.abs() < 1e-14);
    }

    #[test]
    fn dipole_has_no_vortex_part() {
        let g = GridSpec::new(128, 64.0).unwrap();
        let w = dipole(g);
        let d = radial_energy_decompose(&w, 1.0).unwrap();
        assert!(d.vortex.alpha().abs() < 1e-14);
        let direct = biot_savart_spectral(&w);
        assert!(d.u0.sub(&direct).max_amplitude() < 1e-14);
        assert!(d.u0.energy().is_finite() && d.u0.energy() > 0.0);
    }

    #[test]
    fn offset_gaussian_bookkeeping() {
        let g = GridSpec::new(128, 64.0).unwrap();
        let w = offset_gaussian(g);
        let d = radial_energy_decompose(&w, 1.0).unwrap();
        assert!((d.vortex.alpha() - 1.0).abs() < 1e-10);
        assert!(d.residual_circulation.abs() < 1e-10);
        assert!(d.u0.energy().is_finite());
        let rebuilt = curl2d(&d.u0).add(&d.sampled_background(g));
        assert!(rebuilt.sub(&w).max_amplitude() < 1e-10);
    }

    #[test]
    fn decomposition_depends_on_t0_but_curl_sum_does_not() {
        let g = GridSpec::new(128, 64.0).unwrap();
        let w = offset_gaussian(g);
        let a = radial_energy_decompose(&w, 0.5).unwrap();
        let b = radial_energy_decompose(&w, 2.0).unwrap();
        assert!(a.u0.sub(&b.u0).max_amplitude() > 1e-6);
        let sa = curl2d(&a.u0).add(&a.sampled_background(g));
        let sb = curl2d(&b.u0).add(&b.sampled_background(g));
        assert!(sa.sub(&sb).max_amplitude() < 1e-10);
    }

    #[test]
    fn decomposition_errors() {
        let g = GridSpec::new(64, 32.0).unwrap();
        let w = dipole(g);
        assert!(radial_energy_decompose(&w, 0.0).is_err());
        // Core 2 sqrt(t0) = 6 > 32/8.
        assert!(radial_energy_decompose(&w, 9.0).is_err());
        let wide = SpectralField::from_fn(g, |x, y| (-(x * x + y * y) / 200.0).exp());
        assert!(radial_energy_decompose(&wide, 1.0).is_err());
    }

    #[test]
    fn annulus_bounds() {
        let g = GridSpec::new(64, 64.0).unwrap();
        let (lo, hi) = far_field_annulus(&g);
        assert_eq!(lo, 8.0);
        assert!((hi - 64.0 * (0.1 / PI).sqrt()).abs() < 1e-12);
    }

    fn radii(g: &GridSpec, k: usize) -> Vec<f64> {
        let (lo, hi) = far_field_annulus(g);
        (0..k)
            .map(|i| lo * 1.02 + (hi * 0.98 - lo * 1.02) * i as f64 / (k - 1) as f64)
            .collect()
    }

    #[test]
    fn dipole_far_field_is_inverse_square() {
        let g = GridSpec::new(256, 128.0).unwrap();
        let d = radial_energy_decompose(&offset_gaussian(g), 1.0).unwrap();
        let fit = far_field_exponent(&d.u0, &radii(&g, 8)).unwrap();
        assert!((-2.4..=-1.6).contains(&fit.slope), "slope {}", fit.slope);
        assert!(fit.localized);
    }

    #[test]
    fn periodic_mode_is_not_localized() {
        let g = GridSpec::new(64, 64.0).unwrap();
        let k = g.wavenumber_unit();
        let u2 = SpectralField::from_fn(g, |x, _| (k * x).cos());
        let u = VelocityField::new(SpectralField::zeros(g), u2).unwrap();
        let fit = far_field_exponent(&u, &radii(&g, 6)).unwrap();
        assert!(fit.slope.abs() < 0.1 && !fit.localized);
    }

    #[test]
    fn oseen_tail_decays_like_inverse_radius() {
        let g = GridSpec::new(128, 64.0).unwrap();
        let p = RadialVortexParams::new(1.0, 1.0).unwrap();
        let (a, b): (Vec<f64>, Vec<f64>) = (0..g.len())
            .map(|i| {
                let v = oseen_velocity(&p, g.point(i), 0.0);
                (v[0], v[1])
            })
            .unzip();
        let u = VelocityField::from_physical(&a, &b, g).unwrap();
        let fit = far_field_exponent(&u, &radii(&g, 6)).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.2, "slope {}", fit.slope);
    }

    #[test]
    fn radii_outside_annulus_rejected() {
        let g = GridSpec::new(64, 64.0).unwrap();
        let u = VelocityField::zeros(g);
        assert!(far_field_exponent(&u, &[4.0, 10.0]).is_err());
        assert!(far_field_exponent(&u, &[10.0, 30.0]).is_err());
        assert!(far_field_exponent(&u, &[10.0]).is_err());
    }

    #[test]
    fn bilinear_reproduces_linear_functions() {
        let g = GridSpec::new(16, 8.0).unwrap();
        let s: Vec<f64> = (0..g.len()).map(|i| {
            let [x, y] = g.point(i);
            2.0 * x - y
        }).collect();
        let v = bilinear(&s, &g, 0.3, -1.1);
        assert!((v - (0.6 + 1.1)).abs() < 1e-14);
    }

    #[test]
    fn lp_membership() {
        let g = GridSpec::new(128, 64.0).unwrap();
        let d = radial_energy_decompose(&dipole(g), 1.0).unwrap();
        let l2 = lp_membership_check(&d.u0, 2.0).unwrap();
        assert!((l2 * l2 / d.u0.energy() - 1.0).abs() < 1e-12);
        assert!(lp_membership_check(&d.u0, 1.0).is_err());
        assert!(lp_membership_check(&d.u0, 2.5).is_err());

        let l15 = lp_membership_check(&d.u0, 1.5).unwrap();
        assert!(l15.is_finite());
        let prof = estimate_heat_exponent(&d.u0, (1.0, 20.0), 16).unwrap();
        assert!(prof.gamma >= 0.6, "gamma {}", prof.gamma);
    }

    #[test]
    fn lp_near_one_grows_with_box() {
        let norm = |l: f64| {
            let g = GridSpec::new((2.0 * l) as usize, l).unwrap();
            let d = radial_energy_decompose(&dipole(g), 1.0).unwrap();
            lp_membership_check(&d.u0, 1.05).unwrap()
        };
        let (small, large) = (norm(32.0), norm(128.0));
        assert!(large > 1.05 * small, "{small} {large}");
    }
}
