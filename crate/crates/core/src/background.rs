//! The background `f = χ(x)·S⁺(x,t) + χ(−x)·S⁻(−x,t)` built from truncated
//! coefficient series on both ends, and its PDE residual
//! `g = f_t + f²f_x + f_xxx`.
//!
//! Where `χ ≡ 1` the residual is evaluated as the sum of the non-resonant
//! products of the truncated series (the resonant ones cancel identically
//! through the coefficient equations). Computing `f_t + f²f_x + f_xxx`
//! directly there would subtract quantities of size `x^{1/2}` to get
//! something of size `x^{γ_{N+1}}`. In the cutoff zone the direct product-rule
//! formula is used.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{bracket, Mesh, MeshFunction};
use crate::series::{CoefficientTrajectories, Side};
use crate::smoothstep::Cutoff;
use crate::Real;

#[derive(Clone, Debug)]
struct TailCubic<T> {
    k: usize,
    l: usize,
    m: usize,
    c: T,
    e: T,
}

#[derive(Clone, Debug)]
struct TailLinear<T> {
    p: usize,
    c: T,
    e: T,
}

#[derive(Clone, Debug)]
struct SideSeries<T> {
    traj: CoefficientTrajectories<T>,
    gammas: Vec<T>,
    cubic: Vec<TailCubic<T>>,
    linear: Vec<TailLinear<T>>,
}

impl<T: Real> SideSeries<T> {
    fn new(traj: CoefficientTrajectories<T>, n_trunc: usize) -> Self {
        let lat = traj.lattice();
        let top = n_trunc.min(lat.len() - 1);
        let kept: BTreeSet<_> = lat.gammas()[..=top].iter().copied().collect();
        let one = crate::Rational::integer(1);
        let three = crate::Rational::integer(3);
        let g = |i: usize| T::lit(lat.gamma(i).to_f64());
        let mut cubic = Vec::new();
        for k in 0..=top {
            for l in 0..=top {
                for m in 0..=top {
                    let e = lat.gamma(k) + lat.gamma(l) + lat.gamma(m) - one;
                    if !kept.contains(&e) {
                        cubic.push(TailCubic {
                            k,
                            l,
                            m,
                            c: g(m),
                            e: T::lit(e.to_f64()),
                        });
                    }
                }
            }
        }
        let linear = (0..=top)
            .filter(|&p| !kept.contains(&(lat.gamma(p) - three)))
            .map(|p| {
                let gp = g(p);
                TailLinear {
                    p,
                    c: gp * (gp - T::one()) * (gp - T::lit(2.0)),
                    e: gp - T::lit(3.0),
                }
            })
            .collect();
        Self {
            gammas: (0..=top).map(g).collect(),
            traj,
            cubic,
            linear,
        }
    }
}

/// Background evaluator over a common time window.
#[derive(Clone, Debug)]
pub struct Background<T> {
    sides: Vec<(Side, SideSeries<T>)>,
    n_trunc: usize,
    cutoff: Cutoff<T>,
    t_end: T,
}

impl<T: Real> Background<T> {
    /// `f ≡ 0` on `[0, t_end]`.
    pub fn zero(t_end: T) -> Self {
        Self {
            sides: Vec::new(),
            n_trunc: 0,
            cutoff: Cutoff::new(T::one(), T::lit(2.0)),
            t_end,
        }
    }

    /// Truncates both series at lattice index `n_trunc` (inclusive).
    pub fn new(
        plus: CoefficientTrajectories<T>,
        minus: CoefficientTrajectories<T>,
        n_trunc: usize,
        cutoff: Cutoff<T>,
    ) -> Result<Self> {
        if plus.side() != Side::Plus || minus.side() != Side::Minus {
            return Err(Error::InvalidArgument(
                "background needs one plus-side and one minus-side trajectory".into(),
            ));
        }
        if !(cutoff.inner > T::zero() && cutoff.inner < cutoff.outer) {
            return Err(Error::InvalidArgument(format!(
                "cutoff needs 0 < x1 < x2, got [{}, {}]",
                cutoff.inner, cutoff.outer
            )));
        }
        let t_end = plus.t_end().min(minus.t_end());
        Ok(Self {
            sides: vec![
                (Side::Plus, SideSeries::new(plus, n_trunc)),
                (Side::Minus, SideSeries::new(minus, n_trunc)),
            ],
            n_trunc,
            cutoff,
            t_end,
        })
    }

    /// One side only; the other end carries `f ≡ 0`.
    pub fn one_sided(traj: CoefficientTrajectories<T>, n_trunc: usize, cutoff: Cutoff<T>) -> Self {
        let t_end = traj.t_end();
        Self {
            sides: vec![(traj.side(), SideSeries::new(traj, n_trunc))],
            n_trunc,
            cutoff,
            t_end,
        }
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn cutoff(&self) -> Cutoff<T> {
        self.cutoff
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    pub fn is_zero(&self) -> bool {
        self.sides.is_empty()
    }

    pub fn trajectories(&self, side: Side) -> Option<&CoefficientTrajectories<T>> {
        self.sides
            .iter()
            .find(|(s, _)| *s == side)
            .map(|(_, s)| &s.traj)
    }

    /// Coefficients and their rates frozen at time `t`.
    pub fn at_time(&self, t: T) -> Result<Snapshot<'_, T>> {
        let tol = self.t_end * T::lit(1e-12);
        if !(t >= -tol && t <= self.t_end + tol) {
            return Err(Error::OutsideWindow {
                t: t.to_f64_lossy(),
                lo: 0.0,
                hi: self.t_end.to_f64_lossy(),
            });
        }
        let t = t.max(T::zero()).min(self.t_end);
        let sides = self
            .sides
            .iter()
            .map(|(side, s)| {
                let top = s.gammas.len();
                let a = s.traj.at(t)?;
                let r = s.traj.rates_at(t)?;
                Ok(Frozen {
                    sign: match side {
                        Side::Plus => T::one(),
                        Side::Minus => -T::one(),
                    },
                    series: s,
                    a: a[..top].to_vec(),
                    rate: r[..top].to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Snapshot {
            sides,
            cutoff: self.cutoff,
        })
    }

    /// `∂ₓ^dx ∂ₜ^dt f(x, t)` for `(dx, dt)` in `{(0..=3, 0), (0, 1)}`.
    pub fn eval(&self, x: T, t: T, dx: usize, dt: usize) -> Result<T> {
        self.at_time(t)?.eval(x, dx, dt)
    }

    pub fn residual_g(&self, x: T, t: T) -> Result<T> {
        Ok(self.at_time(t)?.g(x))
    }

    /// Least-squares slope of `log|g(x, t)|` against `log x`; `−∞` when `g`
    /// cancels exactly (below `1e−300`) at any sample.
    pub fn residual_decay_rate(&self, xs: &[T], t: T) -> Result<T> {
        if xs.len() < 3 {
            return Err(Error::InvalidArgument("decay fit needs at least 3 points".into()));
        }
        if xs.iter().any(|&x| x < self.cutoff.outer) {
            return Err(Error::InvalidArgument(format!(
                "decay samples must lie beyond x2 = {}",
                self.cutoff.outer
            )));
        }
        let snap = self.at_time(t)?;
        let mut pts = Vec::with_capacity(xs.len());
        for &x in xs {
            let g = snap.g(x).abs();
            if !(g > T::lit(1e-300)) {
                return Ok(T::neg_infinity());
            }
            pts.push((x.ln(), g.ln()));
        }
        Ok(fit_slope(&pts).0)
    }

    /// `g(·, t)` sampled on the mesh.
    pub fn sample_g(&self, mesh: Mesh<T>, t: T) -> Result<MeshFunction<T>> {
        let snap = self.at_time(t)?;
        let vals: Vec<T> = (0..mesh.n_nodes()).map(|i| snap.g(mesh.x(i))).collect();
        MeshFunction::from_values(mesh, vals)
    }

    /// `∂ₓ^dx f(·, t)` sampled on the mesh.
    pub fn sample(&self, mesh: Mesh<T>, t: T, dx: usize) -> Result<MeshFunction<T>> {
        let snap = self.at_time(t)?;
        let vals = (0..mesh.n_nodes())
            .map(|i| snap.eval(mesh.x(i), dx, 0))
            .collect::<Result<Vec<T>>>()?;
        MeshFunction::from_values(mesh, vals)
    }

    /// `max_j ‖⟨x⟩ᴺ D₊ⁿ g(·, t_j)‖` over `t_j = j·k ≤ t_end`.
    pub fn seminorm_audit_g(&self, mesh: Mesh<T>, t_end: T, n_weight: usize, n_diff: usize) -> Result<T> {
        let steps = (t_end / mesh.k()).round().to_usize().unwrap_or(0);
        let vals = (0..=steps)
            .into_par_iter()
            .map(|j| {
                let t = (T::from_usize_lossy(j) * mesh.k()).min(t_end);
                self.sample_g(mesh, t)?.weighted_seminorm(n_weight, n_diff)
            })
            .collect::<Result<Vec<T>>>()?;
        Ok(vals.into_iter().fold(T::zero(), T::max))
    }

    /// `max_x |∂ₓⁿ f(x,t)| ⟨x⟩^{n−1/2}` over the mesh nodes.
    pub fn growth_audit(&self, mesh: Mesh<T>, t: T, n: usize) -> Result<T> {
        let snap = self.at_time(t)?;
        let p = T::from_usize_lossy(n) - T::lit(0.5);
        let mut m = T::zero();
        for x in mesh.nodes() {
            m = m.max(snap.eval(x, n, 0)?.abs() * bracket(x).powf(p));
        }
        Ok(m)
    }

    /// CSV with columns `x, f, f_x, f_xxx, f_t, g` at time `t`.
    pub fn write_csv<W: Write>(&self, w: W, xs: &[T], t: T) -> Result<()> {
        let snap = self.at_time(t)?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "f", "f_x", "f_xxx", "f_t", "g"])?;
        for &x in xs {
            wr.write_record([
                format!("{x:e}"),
                format!("{:e}", snap.eval(x, 0, 0)?),
                format!("{:e}", snap.eval(x, 1, 0)?),
                format!("{:e}", snap.eval(x, 3, 0)?),
                format!("{:e}", snap.eval(x, 0, 1)?),
                format!("{:e}", snap.g(x)),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Least-squares fit `y ≈ slope·x + intercept`; returns `(slope, intercept, R²)`.
pub fn fit_slope<T: Real>(pts: &[(T, T)]) -> (T, T, T) {
    let n = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: T = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy.is_zero() {
        T::one()
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, my - slope * mx, r2)
}

#[derive(Clone, Debug)]
struct Frozen<'a, T> {
    sign: T,
    series: &'a SideSeries<T>,
    a: Vec<T>,
    rate: Vec<T>,
}

/// The background at one fixed time.
#[derive(Clone, Debug)]
pub struct Snapshot<'a, T> {
    sides: Vec<Frozen<'a, T>>,
    cutoff: Cutoff<T>,
}

/// `d^n/dy^n y^γ = γ(γ−1)…(γ−n+1) y^{γ−n}`.
fn power_derivative<T: Real>(y: T, gamma: T, n: usize) -> T {
    let mut c = T::one();
    for i in 0..n {
        c *= gamma - T::from_usize_lossy(i);
    }
    c * y.powf(gamma - T::from_usize_lossy(n))
}

const BINOM: [[u32; 4]; 4] = [[1, 0, 0, 0], [1, 1, 0, 0], [1, 2, 1, 0], [1, 3, 3, 1]];

impl<T: Real> Snapshot<'_, T> {
    /// The side whose cutoff is active at `x`, with `y = ±x > x₁`.
    fn side_at(&self, x: T) -> Option<(&Frozen<'_, T>, T)> {
        self.sides.iter().find_map(|s| {
            let y = s.sign * x;
            (!self.cutoff.is_zero(y)).then_some((s, y))
        })
    }

    /// `d^n/dy^n Σ c_k y^{γ_k}`.
    fn series_derivative(gammas: &[T], c: &[T], y: T, n: usize) -> T {
        gammas
            .iter()
            .zip(c)
            .filter(|(_, c)| !c.is_zero())
            .map(|(&g, &c)| c * power_derivative(y, g, n))
            .sum()
    }

    /// `∂ₓ^dx ∂ₜ^dt f(x)` for `(dx, dt)` in `{(0..=3, 0), (0, 1)}`.
    pub fn eval(&self, x: T, dx: usize, dt: usize) -> Result<T> {
        if dx > 3 || dt > 1 || (dx > 0 && dt > 0) {
            return Err(Error::OrderTooLarge {
                order: dx + dt,
                max: 3,
            });
        }
        let Some((s, y)) = self.side_at(x) else {
            return Ok(T::zero());
        };
        let coeffs = if dt == 1 { &s.rate } else { &s.a };
        let mut v = T::zero();
        for i in 0..=dx {
            let chi = self.cutoff.eval(y, i);
            if chi.is_zero() {
                continue;
            }
            v += T::lit(BINOM[dx][i] as f64)
                * chi
                * Self::series_derivative(&s.series.gammas, coeffs, y, dx - i);
        }
        Ok(if dx % 2 == 1 { s.sign * v } else { v })
    }

    /// `f_t + f²f_x + f_xxx` by direct substitution.
    pub fn g_direct(&self, x: T) -> T {
        let f = self.eval(x, 0, 0).unwrap();
        let fx = self.eval(x, 1, 0).unwrap();
        let fxxx = self.eval(x, 3, 0).unwrap();
        let ft = self.eval(x, 0, 1).unwrap();
        ft + f * f * fx + fxxx
    }

    /// Non-resonant part of the truncated series' defect, valid where `χ ≡ 1`.
    pub fn g_tail(&self, x: T) -> T {
        let Some((s, y)) = self.side_at(x) else {
            return T::zero();
        };
        let a = &s.a;
        let mut v = T::zero();
        for t in &s.series.cubic {
            let p = a[t.k] * a[t.l] * a[t.m];
            if !p.is_zero() {
                v += t.c * p * y.powf(t.e);
            }
        }
        for t in &s.series.linear {
            if !a[t.p].is_zero() {
                v += t.c * a[t.p] * y.powf(t.e);
            }
        }
        s.sign * v
    }

    /// `g(x)`: tail form where `χ ≡ 1`, direct form elsewhere.
    pub fn g(&self, x: T) -> T {
        match self.side_at(x) {
            None => T::zero(),
            Some((_, y)) if self.cutoff.is_one(y) => self.g_tail(x),
            Some(_) => self.g_direct(x),
        }
    }

    /// Coefficients `a_0..a_N` on the given side.
    pub fn coefficients(&self, side: Side) -> Option<&[T]> {
        let sign = match side {
            Side::Plus => T::one(),
            Side::Minus => -T::one(),
        };
        self.sides.iter().find(|s| s.sign == sign).map(|s| &s.a[..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::series::solve_coefficients;
    use crate::Rational;

    fn half_bg(n_trunc: usize, t_end: f64) -> Background<f64> {
        let lat = build_lattice(&[Rational::half()], Rational::new(-29, 2).unwrap()).unwrap();
        let mut init = vec![0.0; lat.len()];
        init[0] = 1.0;
        let p = solve_coefficients(&lat, Side::Plus, &init, t_end, t_end / 4096.0).unwrap();
        let m = solve_coefficients(&lat, Side::Minus, &init, t_end, t_end / 4096.0).unwrap();
        Background::new(p, m, n_trunc, Cutoff::new(1.0, 2.0)).unwrap()
    }

    #[test]
    fn quarter_power_rule() {
        let lat = build_lattice(&[Rational::new(1, 4).unwrap()], Rational::integer(-3)).unwrap();
        let mut init = vec![0.0; lat.len()];
        init[0] = 1.0;
        let p = solve_coefficients(&lat, Side::Plus, &init, 1.0, 0.01).unwrap();
        let bg = Background::one_sided(p, 0, Cutoff::new(1.0, 2.0));
        assert!((bg.eval(16.0, 0.3, 0, 0).unwrap() - 2.0f64).abs() < 1e-15);
        let fx = 0.25 * 16f64.powf(-0.75);
        assert!((bg.eval(16.0, 0.3, 1, 0).unwrap() - fx).abs() < 1e-15);
        assert_eq!(bg.eval(-16.0, 0.3, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn derivatives_match_differences() {
        let bg = half_bg(2, 0.5);
        let d = 1e-4;
        for x in [10.0, 1.5, -1.7, -10.0] {
            for n in 1..=3 {
                let fd = (bg.eval(x + d, 0.2, n - 1, 0).unwrap() - bg.eval(x - d, 0.2, n - 1, 0).unwrap())
                    / (2.0 * d);
                let ex = bg.eval(x, 0.2, n, 0).unwrap();
                assert!((fd - ex).abs() < 1e-6 * (1.0 + ex.abs()), "x={x} n={n}: {fd} vs {ex}");
            }
        }
        let ft = (bg.eval(3.0, 0.2 + d, 0, 0).unwrap() - bg.eval(3.0, 0.2 - d, 0, 0).unwrap()) / (2.0 * d);
        assert!((ft - bg.eval(3.0, 0.2, 0, 1).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn vanishes_near_origin() {
        let bg = half_bg(2, 0.5);
        for x in [-1.0, -0.3, 0.0, 0.99, 1.0] {
            for n in 0..=3 {
                assert_eq!(bg.eval(x, 0.1, n, 0).unwrap(), 0.0);
            }
            assert_eq!(bg.residual_g(x, 0.1).unwrap(), 0.0);
        }
    }

    #[test]
    fn tail_agrees_with_direct_substitution() {
        let bg = half_bg(2, 0.5);
        let snap = bg.at_time(0.4).unwrap();
        for x in [2.5, 3.0, 5.0, -2.5, -4.0] {
            let (a, b) = (snap.g_tail(x), snap.g_direct(x));
            assert!((a - b).abs() < 1e-12, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn decay_slope_follows_next_exponent() {
        let xs = [32.0, 64.0, 128.0, 256.0];
        let s2 = half_bg(2, 0.5).residual_decay_rate(&xs, 0.5).unwrap();
        let s3 = half_bg(3, 0.5).residual_decay_rate(&xs, 0.5).unwrap();
        assert!((s2 + 8.5).abs() < 0.05, "{s2}");
        assert!((s3 + 11.5).abs() < 0.05, "{s3}");
        // only a₀ is nonzero at t = 0, and every far-field tail term carries a higher coefficient
        assert_eq!(half_bg(2, 0.5).residual_decay_rate(&xs, 0.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn zero_background() {
        let bg = Background::<f64>::zero(1.0);
        assert_eq!(bg.eval(5.0, 0.5, 3, 0).unwrap(), 0.0);
        assert_eq!(bg.residual_decay_rate(&[4.0, 8.0, 16.0], 0.0).unwrap(), f64::NEG_INFINITY);
        assert!(bg.eval(5.0, 2.0, 0, 0).is_err());
    }

    #[test]
    fn initial_expansion_is_exact() {
        let bg = half_bg(2, 0.5);
        for x in [2.0, 7.0, 100.0] {
            assert_eq!(bg.eval(x, 0.0, 0, 0).unwrap(), x.powf(0.5));
            assert_eq!(bg.eval(-x, 0.0, 0, 0).unwrap(), x.powf(0.5));
        }
    }
}
