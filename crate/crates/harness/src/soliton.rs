//! Travelling-wave reference solution of `w_t + w²w_x + w_xxx = 0`.
//!
//! `u(x,t) = √(6c)·sech(√c (x − ct))`. Before it is trusted as an oracle the
//! closed form is substituted into the equation with high-order central
//! differences ([`Soliton::substitution_residual`]).

use anyhow::{ensure, Result};
use mkdv_core::{Mesh, MeshFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tenth-order central weights for the first derivative, offsets −5..=5.
const D1: [f64; 11] = [
    -1.0 / 1260.0,
    5.0 / 504.0,
    -5.0 / 84.0,
    5.0 / 21.0,
    -5.0 / 6.0,
    0.0,
    5.0 / 6.0,
    -5.0 / 21.0,
    5.0 / 84.0,
    -5.0 / 504.0,
    1.0 / 1260.0,
];
/// Eighth-order central weights for the third derivative, offsets −5..=5.
const D3: [f64; 11] = [
    41.0 / 6048.0,
    -1261.0 / 15120.0,
    541.0 / 1120.0,
    -4369.0 / 2520.0,
    1669.0 / 720.0,
    0.0,
    -1669.0 / 720.0,
    4369.0 / 2520.0,
    -541.0 / 1120.0,
    1261.0 / 15120.0,
    -41.0 / 6048.0,
];
/// Difference step of the substitution check.
const STEP: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Soliton {
    pub c: f64,
}

impl Soliton {
    pub fn new(c: f64) -> Result<Self> {
        ensure!(c > 0.0 && c.is_finite(), "soliton speed must be positive, got {c}");
        Ok(Self { c })
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        (6.0 * self.c).sqrt() / (self.c.sqrt() * (x - self.c * t)).cosh()
    }

    pub fn peak(&self) -> f64 {
        (6.0 * self.c).sqrt()
    }

    pub fn sample(&self, mesh: Mesh<f64>, t: f64) -> MeshFunction<f64> {
        MeshFunction::from_fn(mesh, |x| self.eval(x, t))
    }

    pub fn initial(&self, mesh: Mesh<f64>) -> MeshFunction<f64> {
        self.sample(mesh, 0.0)
    }

    /// `u_t + u²u_x + u_xxx` at `(x, t)` with every derivative taken by finite
    /// differences of the closed form.
    pub fn substitution_residual(&self, x: f64, t: f64) -> f64 {
        let d = STEP;
        let ut = stencil(&D1, 1, d, |s| self.eval(x, t + s));
        let ux = stencil(&D1, 1, d, |s| self.eval(x + s, t));
        let uxxx = stencil(&D3, 3, d, |s| self.eval(x + s, t));
        let u = self.eval(x, t);
        ut + u * u * ux + uxxx
    }

    /// Largest `|residual|` over `points` seeded draws of `x ∈ [−span, span]`, `t ∈ [0, t_max]`.
    pub fn verify(&self, points: usize, seed: u64, span: f64, t_max: f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..points)
            .map(|_| {
                let x = rng.gen_range(-span..=span);
                let t = rng.gen_range(0.0..=t_max);
                self.substitution_residual(x, t).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `Σ w_i f((i − 5)·d) / dᵐ`, the `m`-th derivative at 0.
fn stencil(w: &[f64; 11], m: i32, d: f64, f: impl Fn(f64) -> f64) -> f64 {
    let s: f64 = w.iter().enumerate().map(|(i, c)| c * f((i as f64 - 5.0) * d)).sum();
    s / d.powi(m)
}
