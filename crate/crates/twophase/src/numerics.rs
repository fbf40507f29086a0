//! Dense 64-bit vector kernels shared by all optimizers.
//!
//! Everything here is deliberately scalar and sequential: summations run
//! in a fixed left-to-right order so that repeated runs (and runs under
//! different thread counts) produce bit-identical results. Dimension
//! mismatches are programmer errors and panic.

use std::ops::{Deref, Index, IndexMut};

/// Dense vector of `f64` values: parameters, gradients, or search
/// directions depending on context. Length is fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Self {
        Vector(values)
    }

    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// True when every entry is finite (no NaN or Inf).
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// In-place `self += alpha * x`. Same contract as [`axpy`] without
    /// the allocation.
    pub fn scaled_add(&mut self, alpha: f64, x: &Vector) {
        assert_eq!(
            self.len(),
            x.len(),
            "scaled_add: dimension mismatch ({} vs {})",
            self.len(),
            x.len()
        );
        for (s, xi) in self.0.iter_mut().zip(x.0.iter()) {
            *s += alpha * xi;
        }
    }

    /// In-place `self *= alpha`.
    pub fn scale(&mut self, alpha: f64) {
        for s in self.0.iter_mut() {
            *s *= alpha;
        }
    }
}

impl From<Vec<f64>> for Vector {
    fn from(values: Vec<f64>) -> Self {
        Vector(values)
    }
}

impl From<&[f64]> for Vector {
    fn from(values: &[f64]) -> Self {
        Vector(values.to_vec())
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Inner product `Σ aᵢ·bᵢ`, accumulated left to right.
pub fn dot(a: &Vector, b: &Vector) -> f64 {
    assert_eq!(
        a.len(),
        b.len(),
        "dot: dimension mismatch ({} vs {})",
        a.len(),
        b.len()
    );
    let mut acc = 0.0;
    for (ai, bi) in a.0.iter().zip(b.0.iter()) {
        acc += ai * bi;
    }
    acc
}

/// Euclidean norm `sqrt(dot(a, a))`.
pub fn norm(a: &Vector) -> f64 {
    dot(a, a).sqrt()
}

/// Returns `y + alpha * x` elementwise.
pub fn axpy(alpha: f64, x: &Vector, y: &Vector) -> Vector {
    assert_eq!(
        x.len(),
        y.len(),
        "axpy: dimension mismatch ({} vs {})",
        x.len(),
        y.len()
    );
    let values = x
        .0
        .iter()
        .zip(y.0.iter())
        .map(|(xi, yi)| yi + alpha * xi)
        .collect();
    Vector(values)
}
