//! Shared fixtures for the criterion benchmarks.

use proseg_core::phantom::{generate, Phantom, PhantomSpec};
use proseg_core::Mask;

pub fn bench_phantom(seed: u64, lesions: usize) -> Phantom {
    generate(&PhantomSpec::example(seed, lesions).unwrap()).unwrap()
}

/// Two offset ellipsoid masks on an n-cubed grid.
pub fn ellipsoid_pair(n: usize) -> (Mask, Mask) {
    let mk = |cx: f64| {
        let mut m = Mask::zeros((n, n, n), (0.5, 0.5, 3.6));
        let c = n as f64 / 2.0;
        let r = n as f64 / 3.0;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let dx = (i as f64 - cx) / r;
                    let dy = (j as f64 - c) / r;
                    let dz = (k as f64 - c) / (r / 2.0);
                    if dx * dx + dy * dy + dz * dz <= 1.0 {
                        m.set(i, j, k, 1);
                    }
                }
            }
        }
        m
    };
    (mk(n as f64 / 2.0), mk(n as f64 / 2.0 + 3.0))
}
