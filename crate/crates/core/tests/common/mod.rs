#![allow(dead_code)]

use decoq_core::{QOperator, SpaceLayout, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| complex(rng))
}

pub fn state(rng: &mut ChaCha8Rng, d: usize) -> DVector<C64> {
    let v = DVector::from_fn(d, |_, _| complex(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

pub fn hermitian(rng: &mut ChaCha8Rng, layout: &SpaceLayout) -> QOperator {
    let d = layout.total();
    let a = matrix(rng, d, d);
    QOperator::new(layout.clone(), (&a + a.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

/// Full-rank mixed state `A A† / tr`.
pub fn density(rng: &mut ChaCha8Rng, layout: &SpaceLayout) -> QOperator {
    let d = layout.total();
    let a = matrix(rng, d, d);
    let m = &a * a.adjoint();
    let tr = m.trace();
    QOperator::new(layout.clone(), m / tr).unwrap()
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
