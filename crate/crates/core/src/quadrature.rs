//! Gauss-Legendre rules on intervals and tensor grids on rectangles.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub dim: usize,
    pub n: usize,
    pub bounds: Vec<(f64, f64)>,
    pub normalization: f64,
    /// Node coordinates, one entry per axis (`dim` values each).
    pub nodes: Vec<[f64; 2]>,
    /// Weights with the normalization already applied.
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn build(dim: usize, n: usize, bounds: &[(f64, f64)], normalization: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(dim));
        }
        if n < 2 {
            return Err(Error::Invalid(format!("need at least 2 nodes per axis, got {n}")));
        }
        if bounds.len() != dim {
            return Err(Error::Length { expected: dim, got: bounds.len() });
        }
        if bounds.iter().any(|&(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Invalid("empty or non-finite interval".into()));
        }
        if !(normalization > 0.0) {
            return Err(Error::Invalid("normalization must be positive".into()));
        }
        let (t, w) = gauss_legendre(n);
        let axis = |&(a, b): &(f64, f64)| -> (Vec<f64>, Vec<f64>) {
            let h = 0.5 * (b - a);
            let c = 0.5 * (a + b);
            (t.iter().map(|&s| c + h * s).collect(), w.iter().map(|&v| v * h).collect())
        };
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if dim == 1 {
            let (x, wx) = axis(&bounds[0]);
            for i in 0..n {
                nodes.push([x[i], 0.0]);
                weights.push(wx[i] * normalization);
            }
        } else {
            let (x, wx) = axis(&bounds[0]);
            let (y, wy) = axis(&bounds[1]);
            for i in 0..n {
                for j in 0..n {
                    nodes.push([x[i], y[j]]);
                    weights.push(wx[i] * wy[j] * normalization);
                }
            }
        }
        Ok(QuadratureGrid { dim, n, bounds: bounds.to_vec(), normalization, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Normalized measure of the domain, `Σ w`.
    pub fn measure(&self) -> f64 {
        self.bounds.iter().map(|(a, b)| b - a).product::<f64>() * self.normalization
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::Length { expected: self.len(), got: f.len() });
        }
        if g.len() != self.len() {
            return Err(Error::Length { expected: self.len(), got: g.len() });
        }
        Ok(self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum())
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|r| f(&r[..self.dim])).collect()
    }
}
