//! Small numerical helpers shared by the analysis routines.

use crate::error::{Error, Result};

/// Ordinary least-squares line through `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residuals.
    pub stderr: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("abscissae are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let ssr: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        stderr,
    })
}

/// Grid `L^p` norm of a scalar field, `(h^2 sum |f|^p)^(1/p)`; grid maximum for `p = inf`.
pub fn lp_norm(samples: &[f64], cell_area: f64, p: f64) -> f64 {
    lp_norm_of(samples.iter().map(|x| x.abs()), cell_area, p)
}

/// Grid `L^p` norm of the pointwise Euclidean magnitude of a 2-vector field.
pub fn lp_norm_vec(a: &[f64], b: &[f64], cell_area: f64, p: f64) -> f64 {
    lp_norm_of(a.iter().zip(b).map(|(x, y)| x.hypot(*y)), cell_area, p)
}

fn lp_norm_of(mags: impl Iterator<Item = f64>, cell_area: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return mags.fold(0.0, f64::max);
    }
    let values: Vec<f64> = mags.collect();
    // Scale by the maximum so large p does not overflow.
    let m = values.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = values.iter().map(|v| (v / m).powf(p)).sum();
    m * (cell_area * s).powf(1.0 / p)
}

/// `n` points spaced evenly in `log(1 + t)` between `a` and `b`.
pub fn log1p_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln_1p(), b.ln_1p());
    (0..n)
        .map(|i| {
            let s = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            (la + s * (lb - la)).exp_m1()
        })
        .collect()
}
