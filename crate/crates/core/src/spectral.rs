//! Periodic-box discretization of the plane.
//!
//! A field on the box `[-L/2, L/2)^2` is stored by its Fourier coefficients
//! `f(x) = sum_k c(k) exp(i k.x)`, with `k = (2 pi / L) m` for integer
//! `m` in `[-n/2, n/2)`. Coefficients are laid out row-major with the row
//! index carrying `m2` and the column index carrying `m1`; physical samples
//! use the same layout with `x = -L/2 + h * index`. Under this normalization
//! a constant field `1` has `c(0) = 1` and `sum |c|^2 = (1/L^2) int |f|^2`.

use std::f64::consts::PI;

pub use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;

/// Relative tolerance for the divergence-free and zero-mean invariants.
pub const INVARIANT_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n: usize,
    length: f64,
    dealias_fraction: f64,
}

impl GridSpec {
    pub const DEFAULT_DEALIAS: f64 = 2.0 / 3.0;

    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n must be even and at least 8, got {n}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "length must be positive, got {length}"
            )));
        }
        Ok(GridSpec {
            n,
            length,
            dealias_fraction: Self::DEFAULT_DEALIAS,
        })
    }

    pub fn with_dealias_fraction(mut self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "dealias fraction must lie in (0, 1], got {fraction}"
            )));
        }
        self.dealias_fraction = fraction;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// Number of grid points (and of Fourier modes).
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    /// Smallest nonzero wavenumber `2 pi / L`.
    pub fn wavenumber_unit(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// End of the time range over which whole-plane algebraic heat decay
    /// is observable on this box: `(L / 2 pi)^2 / 4`.
    pub fn validity_time(&self) -> f64 {
        let s = self.length / (2.0 * PI);
        s * s / 4.0
    }

    /// Signed mode number of a row or column index.
    pub fn mode(&self, index: usize) -> i64 {
        let half = self.n / 2;
        if index < half {
            index as i64
        } else {
            index as i64 - self.n as i64
        }
    }

    /// Row or column index of a signed mode number.
    pub fn index_of_mode(&self, m: i64) -> usize {
        m.rem_euclid(self.n as i64) as usize
    }

    /// Physical coordinate of a row or column index.
    pub fn coordinate(&self, index: usize) -> f64 {
        -0.5 * self.length + self.spacing() * index as f64
    }

    /// Physical point `(x1, x2)` of a flat sample index.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        [self.coordinate(flat % self.n), self.coordinate(flat / self.n)]
    }

    /// Wavevector `(k1, k2)` of a flat coefficient index.
    pub fn wavevector(&self, flat: usize) -> [f64; 2] {
        let unit = self.wavenumber_unit();
        [
            unit * self.mode(flat % self.n) as f64,
            unit * self.mode(flat / self.n) as f64,
        ]
    }

    pub fn k_squared(&self, flat: usize) -> f64 {
        let [k1, k2] = self.wavevector(flat);
        k1 * k1 + k2 * k2
    }

    /// Whether a mode survives the dealiasing truncation.
    pub fn is_resolved(&self, flat: usize) -> bool {
        let cutoff = self.dealias_fraction * (self.n / 2) as f64;
        let m1 = self.mode(flat % self.n).abs() as f64;
        let m2 = self.mode(flat / self.n).abs() as f64;
        m1.max(m2) <= cutoff
    }

    /// Flat index of the mode `-k`.
    pub fn mirror(&self, flat: usize) -> usize {
        let n = self.n;
        let (row, col) = (flat / n, flat % n);
        ((n - row) % n) * n + (n - col) % n
    }

    /// Flat index of mode `(m1, m2)`.
    pub fn flat_index(&self, m1: i64, m2: i64) -> usize {
        self.index_of_mode(m2) * self.n + self.index_of_mode(m1)
    }
}

/// Fourier coefficients of a real scalar field on the box.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField {
            grid,
            coeffs: vec![ZERO; grid.len()],
        }
    }

    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                found: coeffs.len(),
            });
        }
        Ok(SpectralField { grid, coeffs })
    }

    /// Forward transform of physical samples.
    pub fn from_physical(samples: &[f64], grid: GridSpec) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                found: samples.len(),
            });
        }
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        forward_normalized(&grid, &mut buf);
        Ok(SpectralField { grid, coeffs: buf })
    }

    /// Samples `f(x1, x2)` at the grid points and transforms.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let samples: Vec<f64> = (0..grid.len())
            .map(|i| {
                let [x1, x2] = grid.point(i);
                f(x1, x2)
            })
            .collect();
        Self::from_physical(&samples, grid).expect("sample count matches grid")
    }

    /// Inverse transform to physical samples.
    pub fn to_physical(&self) -> Vec<f64> {
        let mut buf = self.coeffs.clone();
        inverse_normalized(&self.grid, &mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of mode `(m1, m2)`.
    pub fn coeff(&self, m1: i64, m2: i64) -> Complex64 {
        self.coeffs[self.grid.flat_index(m1, m2)]
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Box integral `L^2 c(0)`.
    pub fn integral(&self) -> f64 {
        self.grid.length * self.grid.length * self.coeffs[0].re
    }

    /// `int |f|^2 dx` over the box.
    pub fn norm_sq(&self) -> f64 {
        let l2 = self.grid.length * self.grid.length;
        l2 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// `int f g dx` over the box, computed from coefficients.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert_eq!(self.grid, other.grid, "inner product across grids");
        let l2 = self.grid.length * self.grid.length;
        l2 * self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest violation of `c(-k) = conj(c(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| (self.coeffs[self.grid.mirror(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Applies `f(k, c)` to every coefficient.
    pub fn map_modes(&self, f: impl Fn([f64; 2], Complex64) -> Complex64) -> SpectralField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| f(self.grid.wavevector(i), c))
            .collect();
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        self.map_modes(|_, c| c * s)
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, other.grid, "sum across grids");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        self.add(&other.scale(-1.0))
    }

    pub fn laplacian(&self) -> SpectralField {
        self.map_modes(|[k1, k2], c| -(k1 * k1 + k2 * k2) * c)
    }

    /// Same field with the mean mode removed.
    pub fn without_mean(&self) -> SpectralField {
        let mut out = self.clone();
        out.coeffs[0] = ZERO;
        out
    }
}

/// Forward transform with the coefficient normalization of this module.
pub(crate) fn forward_normalized(grid: &GridSpec, buf: &mut [Complex64]) {
    Fft2::get(grid.n).forward(buf);
    let n = grid.n;
    let scale = 1.0 / (n * n) as f64;
    // The box starts at -L/2, which shifts every mode by (-1)^(m1 + m2).
    for (i, c) in buf.iter_mut().enumerate() {
        let s = if (i / n + i % n) % 2 == 0 { scale } else { -scale };
        *c *= s;
    }
}

/// Inverse of [`forward_normalized`].
pub(crate) fn inverse_normalized(grid: &GridSpec, buf: &mut [Complex64]) {
    let n = grid.n;
    for (i, c) in buf.iter_mut().enumerate() {
        if (i / n + i % n) % 2 == 1 {
            *c = -*c;
        }
    }
    Fft2::get(n).inverse(buf);
}

/// Transforms two real fields with a single complex FFT.
pub(crate) fn to_physical_pair(a: &SpectralField, b: &SpectralField) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.grid, b.grid);
    let i = Complex64::new(0.0, 1.0);
    let mut buf: Vec<Complex64> = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| x + i * y)
        .collect();
    inverse_normalized(&a.grid, &mut buf);
    buf.into_iter().map(|c| (c.re, c.im)).unzip()
}

/// Forward transform of two real sample arrays with one complex FFT.
#[cfg(test)]
pub(crate) fn from_physical_pair(
    a: &[f64],
    b: &[f64],
    grid: GridSpec,
) -> (SpectralField, SpectralField) {
    let mut buf: Vec<Complex64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    forward_normalized(&grid, &mut buf);
    let (fa, fb) = split_packed(&grid, &buf);
    (
        SpectralField { grid, coeffs: fa },
        SpectralField { grid, coeffs: fb },
    )
}

/// Separates `F = A + iB` for real `a`, `b` using Hermitian symmetry.
pub(crate) fn split_packed(grid: &GridSpec, packed: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut a = vec![ZERO; grid.len()];
    let mut b = vec![ZERO; grid.len()];
    for idx in 0..grid.len() {
        let f = packed[idx];
        let g = packed[grid.mirror(idx)].conj();
        a[idx] = 0.5 * (f + g);
        let d = 0.5 * (f - g);
        b[idx] = Complex64::new(d.im, -d.re);
    }
    (a, b)
}

/// Divergence-free, zero-mean velocity on the box.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    u1: SpectralField,
    u2: SpectralField,
}

impl VelocityField {
    /// Checks the divergence-free and zero-mean invariants.
    pub fn new(u1: SpectralField, u2: SpectralField) -> Result<Self> {
        if u1.grid != u2.grid {
            return Err(Error::GridMismatch);
        }
        let v = VelocityField { u1, u2 };
        let scale = v.max_amplitude();
        if v.divergence_residual() > INVARIANT_TOL * scale.max(f64::MIN_POSITIVE) && scale > 0.0 {
            return Err(Error::param(
                "velocity",
                format!("not divergence-free (residual {:e})", v.divergence_residual()),
            ));
        }
        if v.u1.coeffs[0].norm().max(v.u2.coeffs[0].norm()) > INVARIANT_TOL * scale {
            return Err(Error::param("velocity", "mean mode is not zero"));
        }
        Ok(v)
    }

    pub fn zeros(grid: GridSpec) -> Self {
        VelocityField {
            u1: SpectralField::zeros(grid),
            u2: SpectralField::zeros(grid),
        }
    }

    pub(crate) fn from_parts_unchecked(u1: SpectralField, u2: SpectralField) -> Self {
        debug_assert_eq!(u1.grid, u2.grid);
        VelocityField { u1, u2 }
    }

    /// Projects physical samples onto a divergence-free field.
    pub fn from_physical(u1: &[f64], u2: &[f64], grid: GridSpec) -> Result<Self> {
        Ok(leray_project(
            &SpectralField::from_physical(u1, grid)?,
            &SpectralField::from_physical(u2, grid)?,
        ))
    }

    pub fn u1(&self) -> &SpectralField {
        &self.u1
    }

    pub fn u2(&self) -> &SpectralField {
        &self.u2
    }

    pub fn grid(&self) -> &GridSpec {
        &self.u1.grid
    }

    pub fn into_parts(self) -> (SpectralField, SpectralField) {
        (self.u1, self.u2)
    }

    pub fn to_physical(&self) -> (Vec<f64>, Vec<f64>) {
        to_physical_pair(&self.u1, &self.u2)
    }

    /// `max_k |k . u(k)|`.
    pub fn divergence_residual(&self) -> f64 {
        let grid = self.grid();
        (0..grid.len())
            .map(|i| {
                let [k1, k2] = grid.wavevector(i);
                (k1 * self.u1.coeffs[i] + k2 * self.u2.coeffs[i]).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_amplitude(&self) -> f64 {
        self.u1.max_amplitude().max(self.u2.max_amplitude())
    }

    /// `||u||_2^2` over the box.
    pub fn energy(&self) -> f64 {
        self.u1.norm_sq() + self.u2.norm_sq()
    }

    /// `||grad u||_2^2` over the box.
    pub fn dissipation(&self) -> f64 {
        let grid = *self.grid();
        let l2 = grid.length * grid.length;
        l2 * (0..grid.len())
            .map(|i| grid.k_squared(i) * (self.u1.coeffs[i].norm_sqr() + self.u2.coeffs[i].norm_sqr()))
            .sum::<f64>()
    }

    pub fn inner(&self, other: &VelocityField) -> f64 {
        self.u1.inner(&other.u1) + self.u2.inner(&other.u2)
    }

    pub fn scale(&self, s: f64) -> VelocityField {
        VelocityField {
            u1: self.u1.scale(s),
            u2: self.u2.scale(s),
        }
    }

    pub fn sub(&self, other: &VelocityField) -> VelocityField {
        VelocityField {
            u1: self.u1.sub(&other.u1),
            u2: self.u2.sub(&other.u2),
        }
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.u1.hermitian_defect().max(self.u2.hermitian_defect())
    }
}

/// Spectral gradient: component `j` has coefficients `i k_j f(k)`.
pub fn gradient(f: &SpectralField) -> (SpectralField, SpectralField) {
    let i = Complex64::new(0.0, 1.0);
    (
        f.map_modes(|[k1, _], c| i * k1 * c),
        f.map_modes(|[_, k2], c| i * k2 * c),
    )
}

/// Scalar curl `d1 u2 - d2 u1`.
pub fn curl2d(v: &VelocityField) -> SpectralField {
    let grid = *v.grid();
    let i = Complex64::new(0.0, 1.0);
    let coeffs = (0..grid.len())
        .map(|idx| {
            let [k1, k2] = grid.wavevector(idx);
            i * (k1 * v.u2.coeffs[idx] - k2 * v.u1.coeffs[idx])
        })
        .collect();
    SpectralField { grid, coeffs }
}

/// Spectral divergence `i (k1 f1 + k2 f2)`.
pub fn divergence(f1: &SpectralField, f2: &SpectralField) -> SpectralField {
    assert_eq!(f1.grid, f2.grid, "divergence across grids");
    let grid = f1.grid;
    let i = Complex64::new(0.0, 1.0);
    let coeffs = (0..grid.len())
        .map(|idx| {
            let [k1, k2] = grid.wavevector(idx);
            i * (k1 * f1.coeffs[idx] + k2 * f2.coeffs[idx])
        })
        .collect();
    SpectralField { grid, coeffs }
}

/// Leray projection `(I - k k^T / |k|^2) f(k)`, with the mean mode removed.
pub fn leray_project(f1: &SpectralField, f2: &SpectralField) -> VelocityField {
    assert_eq!(f1.grid, f2.grid, "projection across grids");
    let grid = f1.grid;
    let mut a = f1.coeffs.clone();
    let mut b = f2.coeffs.clone();
    project_in_place(&grid, &mut a, &mut b);
    VelocityField {
        u1: SpectralField { grid, coeffs: a },
        u2: SpectralField { grid, coeffs: b },
    }
}

pub(crate) fn project_in_place(grid: &GridSpec, a: &mut [Complex64], b: &mut [Complex64]) {
    a[0] = ZERO;
    b[0] = ZERO;
    for idx in 1..grid.len() {
        let [k1, k2] = grid.wavevector(idx);
        let k2sum = k1 * k1 + k2 * k2;
        let proj = (k1 * a[idx] + k2 * b[idx]) / k2sum;
        a[idx] -= k1 * proj;
        b[idx] -= k2 * proj;
    }
}

/// Zeroes every mode with `max(|m1|, |m2|) > dealias_fraction * n / 2`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    dealias_in_place(&f.grid, &mut out.coeffs);
    out
}

pub(crate) fn dealias_in_place(grid: &GridSpec, coeffs: &mut [Complex64]) {
    for (idx, c) in coeffs.iter_mut().enumerate() {
        if !grid.is_resolved(idx) {
            *c = ZERO;
        }
    }
}

pub fn dealias_velocity(v: &VelocityField) -> VelocityField {
    VelocityField {
        u1: dealias(&v.u1),
        u2: dealias(&v.u2),
    }
}
