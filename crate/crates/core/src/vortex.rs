//! The radial vortex background: Gaussian vorticity, its closed-form
//! (Oseen) velocity, spectral Biot-Savart inversion on the box, and decay
//! checks for the background.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{Complex64, GridSpec, SpectralField, VelocityField};
use crate::stats::{lp_norm, lp_norm_vec};

/// Circulation and core time offset of the Gaussian vortex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialVortexParams {
    alpha: f64,
    t0: f64,
}

impl RadialVortexParams {
    pub fn new(alpha: f64, t0: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        if !(t0 > 0.0) || !t0.is_finite() {
            return Err(Error::param("t0", format!("must be positive, got {t0}")));
        }
        Ok(RadialVortexParams { alpha, t0 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Age of the vortex at time `t`.
    pub fn age(&self, t: f64) -> f64 {
        t + self.t0
    }
}

/// `alpha / (4 pi (t + t0)) exp(-|x|^2 / (4 (t + t0)))`.
pub fn radial_vorticity(params: &RadialVortexParams, x: [f64; 2], t: f64) -> f64 {
    let c = params.age(t);
    params.alpha / (4.0 * PI * c) * (-(x[0] * x[0] + x[1] * x[1]) / (4.0 * c)).exp()
}

/// `(1 - e^-z) / z` and its derivative.
fn profile(z: f64) -> (f64, f64) {
    if z < 1e-3 {
        let f = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
        let df = -0.5 + z / 3.0 - z * z / 8.0 + z * z * z / 30.0;
        (f, df)
    } else {
        let em1 = (-z).exp_m1();
        let f = -em1 / z;
        let df = (em1 * (1.0 + z) + z) / (z * z);
        (f, df)
    }
}

/// `(alpha / 2 pi) x_perp / |x|^2 (1 - exp(-|x|^2 / (4 (t + t0))))`.
pub fn oseen_velocity(params: &RadialVortexParams, x: [f64; 2], t: f64) -> [f64; 2] {
    let c = params.age(t);
    let z = (x[0] * x[0] + x[1] * x[1]) / (4.0 * c);
    let s = params.alpha / (8.0 * PI * c) * profile(z).0;
    [-x[1] * s, x[0] * s]
}

/// Velocity gradient `g[i][j] = d_j v_i` of the Oseen field.
pub fn oseen_gradient(params: &RadialVortexParams, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
    let c = params.age(t);
    let z = (x[0] * x[0] + x[1] * x[1]) / (4.0 * c);
    let (f, df) = profile(z);
    let a = params.alpha / (8.0 * PI * c);
    let perp = [-x[1], x[0]];
    let dz = [x[0] / (2.0 * c), x[1] / (2.0 * c)];
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = a * perp[i] * df * dz[j];
        }
    }
    g[0][1] -= a * f;
    g[1][0] += a * f;
    g
}

/// Oseen velocity and gradient sampled on the grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct OseenField {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// `d_j v_i` stored as `grad[i][j]`.
    pub grad: [[Vec<f64>; 2]; 2],
}

impl OseenField {
    pub fn sample(params: &RadialVortexParams, grid: &GridSpec, t: f64) -> Self {
        let values: Vec<([f64; 2], [[f64; 2]; 2])> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.point(i);
                (oseen_velocity(params, x, t), oseen_gradient(params, x, t))
            })
            .collect();
        let pick = |f: &dyn Fn(&([f64; 2], [[f64; 2]; 2])) -> f64| values.iter().map(f).collect::<Vec<f64>>();
        OseenField {
            v1: pick(&|s| s.0[0]),
            v2: pick(&|s| s.0[1]),
            grad: [
                [pick(&|s| s.1[0][0]), pick(&|s| s.1[0][1])],
                [pick(&|s| s.1[1][0]), pick(&|s| s.1[1][1])],
            ],
        }
    }

    /// Grid maximum of `|v|`.
    pub fn sup_norm(&self) -> f64 {
        lp_norm_vec(&self.v1, &self.v2, 1.0, f64::INFINITY)
    }

    /// Pointwise Frobenius norm of the gradient.
    pub fn grad_magnitude(&self) -> Vec<f64> {
        let g = &self.grad;
        (0..self.v1.len())
            .map(|i| (g[0][0][i].powi(2) + g[0][1][i].powi(2) + g[1][0][i].powi(2) + g[1][1][i].powi(2)).sqrt())
            .collect()
    }
}

/// Relative accuracy requested from the radial quadrature.
pub const PROFILE_QUAD_TOL: f64 = 1e-10;

/// Velocity of a radial vorticity profile, `x_perp / |x|^2 int_0^|x| s w(s) ds`.
pub fn radial_velocity_from_profile(profile: impl Fn(f64) -> f64, x: [f64; 2]) -> Result<[f64; 2]> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 == 0.0 {
        return Ok([0.0, 0.0]);
    }
    let r = r2.sqrt();
    let integrand = |s: f64| s * profile(s);
    // Scale the absolute target by a coarse estimate of the integral size.
    let coarse = quadrature::integrate(integrand, 0.0, r, 1e-6);
    let target = (PROFILE_QUAD_TOL * coarse.integral.abs()).max(1e-300);
    let out = quadrature::integrate(integrand, 0.0, r, target);
    if !out.integral.is_finite() || out.error_estimate > 1e-8 * out.integral.abs().max(1e-300) && out.error_estimate > 1e-14 {
        return Err(Error::NotIntegrable { radius: r });
    }
    Ok([-x[1] * out.integral / r2, x[0] * out.integral / r2])
}

/// `u(k) = i (k2, -k1) w(k) / |k|^2`, with the mean of `w` dropped.
pub fn biot_savart_spectral(omega: &SpectralField) -> VelocityField {
    let grid = *omega.grid();
    let i = Complex64::new(0.0, 1.0);
    let mut u1 = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut u2 = u1.clone();
    for idx in 1..grid.len() {
        let [k1, k2] = grid.wavevector(idx);
        let w = omega.coeffs()[idx] / (k1 * k1 + k2 * k2);
        u1[idx] = i * k2 * w;
        u2[idx] = -i * k1 * w;
    }
    VelocityField::from_parts_unchecked(
        SpectralField::from_coeffs(grid, u1).expect("grid-sized"),
        SpectralField::from_coeffs(grid, u2).expect("grid-sized"),
    )
}

/// A sampled background: velocity and gradient at the grid points at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundSnapshot {
    pub t: f64,
    pub cell_area: f64,
    pub field: OseenField,
}

impl BackgroundSnapshot {
    pub fn oseen(params: &RadialVortexParams, grid: &GridSpec, t: f64) -> Self {
        BackgroundSnapshot {
            t,
            cell_area: grid.cell_area(),
            field: OseenField::sample(params, grid, t),
        }
    }

    /// The vortex sampled when its age equals `age`, stamped with that age.
    pub fn oseen_at_age(params: &RadialVortexParams, grid: &GridSpec, age: f64) -> Result<Self> {
        if age < params.t0() {
            return Err(Error::param("age", format!("must be at least t0 = {}", params.t0())));
        }
        let mut s = Self::oseen(params, grid, age - params.t0());
        s.t = age;
        Ok(s)
    }
}

/// Allowed growth of the scaled norm across one decade of time.
pub const DECADE_DRIFT_TOL: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct VassReport {
    pub eta: f64,
    pub deriv: u32,
    /// `(t, t^(1/2 + deriv/2 - 1/eta) ||grad^deriv v(t)||_eta)`.
    pub scaled: Vec<(f64, f64)>,
    pub sup: f64,
    /// Largest relative increase between samples at most a decade apart.
    pub max_increase: f64,
    /// Largest relative change, either direction, over the same pairs.
    pub max_drift: f64,
    pub pass: bool,
}

pub fn vass_check(snapshots: &[BackgroundSnapshot], eta: f64, deriv: u32) -> Result<VassReport> {
    let admissible = match deriv {
        0 => eta > 2.0,
        1 => eta.is_infinite() && eta > 0.0,
        _ => false,
    };
    if !admissible {
        return Err(Error::param(
            "eta",
            format!("(deriv = {deriv}, eta = {eta}) is not an admissible pair"),
        ));
    }
    if snapshots.iter().any(|s| !(s.t > 0.0)) {
        return Err(Error::param("t", "snapshot times must be positive"));
    }
    let exponent = 0.5 + 0.5 * deriv as f64 - 1.0 / eta;
    let mut scaled: Vec<(f64, f64)> = snapshots
        .iter()
        .map(|s| {
            let norm = if deriv == 0 {
                lp_norm_vec(&s.field.v1, &s.field.v2, s.cell_area, eta)
            } else {
                lp_norm(&s.field.grad_magnitude(), s.cell_area, eta)
            };
            (s.t, s.t.powf(exponent) * norm)
        })
        .collect();
    scaled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sup = scaled.iter().map(|s| s.1).fold(0.0, f64::max);
    let (mut max_increase, mut max_drift) = (0.0f64, 0.0f64);
    for (a, &(ta, qa)) in scaled.iter().enumerate() {
        for &(tb, qb) in &scaled[a + 1..] {
            if tb > 10.0 * ta * (1.0 + 1e-12) || qa == 0.0 {
                continue;
            }
            let rel = qb / qa - 1.0;
            max_increase = max_increase.max(rel);
            max_drift = max_drift.max(rel.abs());
        }
    }
    Ok(VassReport {
        eta,
        deriv,
        scaled,
        sup,
        max_increase,
        max_drift,
        pass: max_increase <= DECADE_DRIFT_TOL,
    })
}

/// Interpolation weight `a` with `1/2 = a/p + (1 - a)/q`.
pub fn interpolation_weight(p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0 && p < 2.0 && q > 2.0) {
        return Err(Error::param(
            "exponents",
            format!("need 1 <= p < 2 < q <= inf, got p = {p}, q = {q}"),
        ));
    }
    Ok((0.5 - 1.0 / q) / (1.0 / p - 1.0 / q))
}

/// `||v||_inf / (||w||_p^a ||w||_q^(1 - a))` for the box velocity of `omega`.
pub fn interpolation_bound_check(omega: &SpectralField, p: f64, q: f64) -> Result<f64> {
    let a = interpolation_weight(p, q)?;
    let scale = omega.max_amplitude();
    if scale == 0.0 {
        return Err(Error::Degenerate("vorticity is identically zero"));
    }
    if omega.coeffs()[0].norm() > 1e-10 * scale {
        return Err(Error::param("omega", "must have zero mean"));
    }
    let grid = omega.grid();
    let (v1, v2) = biot_savart_spectral(omega).to_physical();
    let w = omega.to_physical();
    let num = lp_norm_vec(&v1, &v2, grid.cell_area(), f64::INFINITY);
    let den = lp_norm(&w, grid.cell_area(), p).powf(a) * lp_norm(&w, grid.cell_area(), q).powf(1.0 - a);
    Ok(num / den)
}

/// Largest `|curl(v) - (w - mean)|` relative to `w`, for checking inversions.
pub fn inversion_defect(omega: &SpectralField, v: &VelocityField) -> f64 {
    let curl = crate::spectral::curl2d(v);
    let scale = omega.max_amplitude().max(f64::MIN_POSITIVE);
    curl.sub(&omega.without_mean()).max_amplitude() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::curl2d;

    fn params(alpha: f64, t0: f64) -> RadialVortexParams {
        RadialVortexParams::new(alpha, t0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(RadialVortexParams::new(1.0, 0.0).is_err());
        assert!(RadialVortexParams::new(f64::NAN, 1.0).is_err());
        assert!(RadialVortexParams::new(0.0, 0.5).is_ok());
    }

    #[test]
    fn vorticity_at_origin_and_circulation() {
        let p = params(3.0, 0.5);
        assert!((radial_vorticity(&p, [0.0, 0.0], 0.0) - 3.0 / (2.0 * PI)).abs() < 1e-15);
        let g = GridSpec::new(128, 48.0).unwrap();
        for t in [0.0, 1.0, 4.0] {
            let w = SpectralField::from_fn(g, |x, y| radial_vorticity(&p, [x, y], t));
            assert!((w.integral() - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn vorticity_follows_heat_flow() {
        let p = params(1.0, 1.0);
        let g = GridSpec::new(128, 48.0).unwrap();
        let w0 = SpectralField::from_fn(g, |x, y| radial_vorticity(&p, [x, y], 0.0));
        let w = crate::heat::heat_evolve(&w0, 3.0).unwrap().to_physical();
        let err = (0..g.len())
            .map(|i| (w[i] - radial_vorticity(&p, g.point(i), 3.0)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn oseen_examples() {
        let p = params(2.0 * PI, 0.25);
        let v = oseen_velocity(&p, [1.0, 0.0], 0.0);
        assert_eq!(v[0], 0.0);
        assert!((v[1] - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(oseen_velocity(&p, [0.0, 0.0], 0.0), [0.0, 0.0]);

        // Far field equals the point-vortex field up to the Gaussian tail.
        let x = [7.0, -5.0];
        let r2: f64 = 74.0;
        let v = oseen_velocity(&p, x, 0.0);
        let point = [5.0 / r2, 7.0 / r2];
        let tail = (-r2).exp();
        assert!((v[0] - point[0]).abs() <= tail && (v[1] - point[1]).abs() <= tail);

        // Linear vanishing at the origin: v ~ (alpha / 8 pi c) x_perp.
        for e in [1e-2, 1e-4, 1e-6] {
            let v = oseen_velocity(&p, [e, 0.0], 0.0);
            assert!((v[1] / e - 1.0).abs() < e);
        }
    }

    #[test]
    fn oseen_is_azimuthal() {
        let p = params(1.7, 0.3);
        for &(x, y, t) in &[(0.3, -2.0, 0.0), (1e-4, 2e-4, 1.0), (12.0, 5.0, 4.0)] {
            let v = oseen_velocity(&p, [x, y], t);
            assert!((x * v[0] + y * v[1]).abs() <= 1e-15 * x.hypot(y) * v[0].hypot(v[1]));
        }
    }

    #[test]
    fn gradient_matches_differences_and_vorticity() {
        let p = params(1.3, 0.7);
        let h = 1e-5;
        for &x in &[[0.2, -0.4], [1.5, 0.9], [3e-3, 1e-3], [-4.0, 2.5]] {
            let g = oseen_gradient(&p, x, 0.5);
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let vp = oseen_velocity(&p, xp, 0.5);
                let vm = oseen_velocity(&p, xm, 0.5);
                for i in 0..2 {
                    let fd = (vp[i] - vm[i]) / (2.0 * h);
                    assert!((fd - g[i][j]).abs() < 1e-8, "{x:?} {i}{j}");
                }
            }
            // Divergence-free, and the curl is the Gaussian vorticity.
            assert!((g[0][0] + g[1][1]).abs() < 1e-15);
            assert!((g[1][0] - g[0][1] - radial_vorticity(&p, x, 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn profile_series_matches_closed_form() {
        for z in [1e-3, 2e-3] {
            let (f, df) = profile(z);
            let z4 = z.powi(4);
            let (fs, dfs) = (
                1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0 + z4 / 120.0,
                -0.5 + z / 3.0 - z * z / 8.0 + z * z * z / 30.0 - z4 / 144.0,
            );
            assert!((f - fs).abs() < 1e-13, "{z} {f} {fs}");
            assert!((df - dfs).abs() < 1e-11, "{z} {df} {dfs}");
        }
    }

    #[test]
    fn quadrature_matches_oseen() {
        let p = params(2.0, 1.5);
        let c = p.age(0.5);
        let gauss = |s: f64| 2.0 / (4.0 * PI * c) * (-s * s / (4.0 * c)).exp();
        for &x in &[[0.1, 0.0], [1.0, 2.0], [-6.0, 3.0], [20.0, 0.0]] {
            let v = radial_velocity_from_profile(gauss, x).unwrap();
            let o = oseen_velocity(&p, x, 0.5);
            let scale = o[0].hypot(o[1]);
            assert!((v[0] - o[0]).abs() <= 1e-8 * scale && (v[1] - o[1]).abs() <= 1e-8 * scale);
        }
        assert_eq!(radial_velocity_from_profile(|_| 0.0, [1.0, 1.0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn quadrature_top_hat_is_solid_body() {
        let c = 0.8;
        let hat = |s: f64| if s < 3.0 { c } else { 0.0 };
        let x = [1.2, -0.7];
        let v = radial_velocity_from_profile(hat, x).unwrap();
        assert!((v[0] - c * 0.7 / 2.0).abs() < 1e-12);
        assert!((v[1] - c * 1.2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_rejects_singular_profile() {
        let bad = |s: f64| 1.0 / (s * s * s);
        assert!(matches!(
            radial_velocity_from_profile(bad, [1.0, 0.0]),
            Err(Error::NotIntegrable { .. })
        ));
    }

    #[test]
    fn biot_savart_examples() {
        let g = GridSpec::new(16, 2.0 * PI).unwrap();
        let w = SpectralField::from_fn(g, |x, _| x.sin());
        let u = biot_savart_spectral(&w);
        let (u1, u2) = u.to_physical();
        for i in 0..g.len() {
            assert!(u1[i].abs() < 1e-15);
            assert!((u2[i] + g.point(i)[0].cos()).abs() < 1e-14);
        }
        assert_eq!(biot_savart_spectral(&SpectralField::zeros(g)).max_amplitude(), 0.0);

        let w = SpectralField::from_fn(g, |x, y| (x - 2.0 * y).cos() + 3.0);
        let u = biot_savart_spectral(&w);
        assert!(inversion_defect(&w, &u) < 1e-12);
        assert!(u.divergence_residual() < 1e-14);
        let back = biot_savart_spectral(&curl2d(&u));
        assert!(back.sub(&u).max_amplitude() < 1e-14);
    }

    fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        f(0.5 * (a + b))
    }

    #[test]
    fn vass_sup_norm_constant() {
        // On the age axis t^(1/2) ||v||_inf = alpha max_s (1 - e^-s^2)/s / (4 pi).
        let peak = golden_max(|s| -(-s * s).exp_m1() / s, 0.1, 5.0);
        let p = params(1.0, 1.0);
        let g = GridSpec::new(256, 64.0).unwrap();
        let snaps: Vec<_> = [1.0, 3.0, 10.0, 30.0, 100.0]
            .iter()
            .map(|&a| BackgroundSnapshot::oseen_at_age(&p, &g, a).unwrap())
            .collect();
        let rep = vass_check(&snaps, f64::INFINITY, 0).unwrap();
        assert!(rep.pass && rep.max_drift < 0.01);
        for &(_, q) in &rep.scaled {
            assert!((q / (peak / (4.0 * PI)) - 1.0).abs() < 0.01);
        }
        let rep = vass_check(&snaps, f64::INFINITY, 1).unwrap();
        assert!(rep.pass && rep.max_drift < 0.1);
    }

    #[test]
    fn vass_admissibility_and_zero() {
        let p = params(0.0, 1.0);
        let g = GridSpec::new(16, 8.0).unwrap();
        let snaps = vec![BackgroundSnapshot::oseen(&p, &g, 1.0), BackgroundSnapshot::oseen(&p, &g, 5.0)];
        assert!(vass_check(&snaps, 2.0, 0).is_err());
        assert!(vass_check(&snaps, 4.0, 1).is_err());
        assert!(vass_check(&snaps, f64::INFINITY, 2).is_err());
        let rep = vass_check(&snaps, 4.0, 0).unwrap();
        assert!(rep.pass && rep.sup == 0.0);
    }

    #[test]
    fn interpolation_ratio_scaling() {
        assert!((interpolation_weight(1.0, f64::INFINITY).unwrap() - 0.5).abs() < 1e-15);
        assert!(interpolation_weight(2.0, 4.0).is_err());
        assert!(interpolation_weight(1.0, 2.0).is_err());

        let g = GridSpec::new(128, 40.0).unwrap();
        let dipole = |mu: f64| {
            SpectralField::from_fn(g, move |x, y| {
                let (x, y) = (x / mu, y / mu);
                x * (-(x * x + y * y)).exp()
            })
            .without_mean()
        };
        let w = dipole(1.0);
        let r = interpolation_bound_check(&w, 1.0, f64::INFINITY).unwrap();
        assert!(r.is_finite() && r > 0.0);
        let r5 = interpolation_bound_check(&w.scale(5.0), 1.0, f64::INFINITY).unwrap();
        assert!((r5 / r - 1.0).abs() < 1e-12);
        let ratios: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&mu| interpolation_bound_check(&dipole(mu), 1.0, f64::INFINITY).unwrap())
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo < 1.2, "{ratios:?}");

        assert!(interpolation_bound_check(&SpectralField::from_fn(g, |_, _| 1.0), 1.0, 4.0).is_err());
    }
}
