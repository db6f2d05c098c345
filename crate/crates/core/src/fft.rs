//! Square 2D complex FFTs built from batched 1D transforms.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl Fft2 {
    /// Shared plan for an `n x n` transform.
    pub(crate) fn get(n: usize) -> Arc<Fft2> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
        let mut cache = CACHE
            .get_or_init(|| Mutex::new(HashMap::new()))
            .lock()
            .expect("fft plan cache poisoned");
        cache
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                let forward = planner.plan_fft_forward(n);
                let inverse = planner.plan_fft_inverse(n);
                let scratch_len = forward
                    .get_inplace_scratch_len()
                    .max(inverse.get_inplace_scratch_len());
                Arc::new(Fft2 {
                    n,
                    forward,
                    inverse,
                    scratch_len,
                })
            })
            .clone()
    }

    /// Unnormalized forward transform, `exp(-i k x)` kernel, in place.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(self.forward.as_ref(), data);
    }

    /// Unnormalized inverse transform, `exp(+i k x)` kernel, in place.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(self.inverse.as_ref(), data);
    }

    fn run(&self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n);
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, self.n);
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, self.n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}
