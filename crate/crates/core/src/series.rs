//! Time-dependent coefficients `a_j(t)` of the formal series `Σ a_j(t) x^{γ_j}`.
//!
//! Substituting the series into the equation and matching powers gives
//!
//! ```text
//! ȧ_j = −Σ_{γ_k+γ_l+γ_m−1=γ_j} a_k a_l a_m γ_m − Σ_{γ_p−3=γ_j} a_p γ_p(γ_p−1)(γ_p−2)
//! ```
//!
//! on the `x → +∞` side. On the `x → −∞` side, written in `(−x)^{γ_j}`, every
//! odd x-derivative changes sign and the right-hand side flips sign.
//! The system is lower triangular in `j`: every index on the right is `≤ j`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ExponentLattice;
use crate::Real;

/// Which end of the real line a series describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    fn rhs_sign<T: Real>(self) -> T {
        match self {
            Side::Plus => -T::one(),
            Side::Minus => T::one(),
        }
    }
}

/// How a coefficient trajectory is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormTag {
    Zero,
    Constant,
    InverseSqrt,
    Ode,
}

/// Options for [`solve_coefficients_with`].
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Use `a₀(t) = a₀(0)/√(1 ± a₀(0)² t)` when `γ₀ = 1/2` instead of integrating it.
    pub closed_form_leading: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            closed_form_leading: true,
        }
    }
}

#[derive(Clone, Debug)]
struct Cubic<T> {
    k: usize,
    l: usize,
    m: usize,
    c: T,
}

#[derive(Clone, Debug)]
struct Linear<T> {
    p: usize,
    c: T,
}

/// Compiled right-hand side of the coefficient system.
#[derive(Clone, Debug)]
pub struct CoefficientSystem<T> {
    cubic: Vec<Vec<Cubic<T>>>,
    linear: Vec<Vec<Linear<T>>>,
    sign: T,
}

impl<T: Real> CoefficientSystem<T> {
    pub fn new(lattice: &ExponentLattice, side: Side) -> Self {
        let g = |i: usize| T::lit(lattice.gamma(i).to_f64());
        let cubic = (0..lattice.len())
            .map(|j| {
                lattice
                    .triples(j)
                    .iter()
                    .map(|&(k, l, m)| Cubic { k, l, m, c: g(m) })
                    .collect()
            })
            .collect();
        let linear = (0..lattice.len())
            .map(|j| {
                lattice
                    .linears(j)
                    .iter()
                    .map(|&p| {
                        let gp = g(p);
                        Linear {
                            p,
                            c: gp * (gp - T::one()) * (gp - T::lit(2.0)),
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            cubic,
            linear,
            sign: side.rhs_sign(),
        }
    }

    pub fn len(&self) -> usize {
        self.cubic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubic.is_empty()
    }

    /// `ȧ_j` for one index.
    pub fn rhs_j(&self, a: &[T], j: usize) -> T {
        let mut s = T::zero();
        for t in &self.cubic[j] {
            s += t.c * a[t.k] * a[t.l] * a[t.m];
        }
        for t in &self.linear[j] {
            s += t.c * a[t.p];
        }
        self.sign * s
    }

    pub fn rhs(&self, a: &[T], out: &mut [T]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.rhs_j(a, j);
        }
    }

    /// True when index `j` has no resonance terms at all.
    pub fn is_free(&self, j: usize) -> bool {
        self.cubic[j].is_empty() && self.linear[j].is_empty()
    }
}

/// Leading closed form `a₀(t) = a/√(1 − s a² t)` with `s = sign of the rhs`.
#[derive(Clone, Copy, Debug)]
struct Leading<T> {
    a: T,
    s: T,
}

impl<T: Real> Leading<T> {
    fn value(&self, t: T) -> T {
        self.a / (T::one() - self.s * self.a * self.a * t).sqrt()
    }

    /// First time at which the closed form is singular, if any.
    fn blow_up_time(&self) -> Option<T> {
        let r = self.s * self.a * self.a;
        (r > T::zero()).then(|| r.recip())
    }
}

/// Sampled coefficient trajectories on `[0, T]`.
#[derive(Clone, Debug)]
pub struct CoefficientTrajectories<T> {
    lattice: ExponentLattice,
    side: Side,
    system: CoefficientSystem<T>,
    dt: T,
    t_grid: Vec<T>,
    values: Vec<Vec<T>>,
    rates: Vec<Vec<T>>,
    tags: Vec<ClosedFormTag>,
    leading: Option<Leading<T>>,
}

/// Integrates the coefficient system with the leading closed form enabled.
pub fn solve_coefficients<T: Real>(
    lattice: &ExponentLattice,
    side: Side,
    initial: &[T],
    t_end: T,
    dt: T,
) -> Result<CoefficientTrajectories<T>> {
    solve_coefficients_with(lattice, side, initial, t_end, dt, SolveOptions::default())
}

/// Classical fourth-order Runge–Kutta at the largest step `≤ dt` that divides `t_end`.
pub fn solve_coefficients_with<T: Real>(
    lattice: &ExponentLattice,
    side: Side,
    initial: &[T],
    t_end: T,
    dt: T,
    opts: SolveOptions,
) -> Result<CoefficientTrajectories<T>> {
    let n = lattice.len();
    if initial.len() != n {
        return Err(Error::InvalidCoefficients(format!(
            "{} initial values for {} exponents",
            initial.len(),
            n
        )));
    }
    if let Some(j) = (0..n).find(|&j| !lattice.in_a0(j) && !initial[j].is_zero()) {
        return Err(Error::InvalidCoefficients(format!(
            "initial a_{j} must vanish: gamma_{j} = {} is not an initial exponent",
            lattice.gamma(j)
        )));
    }
    if let Some(j) = initial.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "initial coefficient".into(),
            index: j,
        });
    }
    if !(t_end > T::zero() && t_end.is_finite()) || !(dt > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "need T > 0 and dt > 0, got T = {t_end}, dt = {dt}"
        )));
    }
    let system = CoefficientSystem::new(lattice, side);
    let sign: T = side.rhs_sign();
    let half_exponent = lattice.gamma(0) == crate::Rational::half();
    // a₀ obeys ȧ₀ = sign·½a₀³, whose solution is a/√(1 − sign·a²t).
    let leading_form = half_exponent.then_some(Leading {
        a: initial[0],
        s: sign,
    });
    if let Some(l) = leading_form {
        if let Some(tb) = l.blow_up_time() {
            if tb <= t_end {
                return Err(Error::BlowUp {
                    t_max: tb.to_f64_lossy(),
                    t_end: t_end.to_f64_lossy(),
                });
            }
        }
    }
    let leading = if opts.closed_form_leading {
        leading_form
    } else {
        None
    };

    let steps = (t_end / dt).ceil().to_usize().unwrap_or(1).max(1);
    let h = t_end / T::from_usize_lossy(steps);
    let eval = |t: T, a: &mut Vec<T>, out: &mut Vec<T>| {
        if let Some(l) = leading {
            a[0] = l.value(t);
        }
        system.rhs(a, out);
    };

    let mut t_grid = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut rates = Vec::with_capacity(steps + 1);
    let mut a = initial.to_vec();
    let mut r = vec![T::zero(); n];
    eval(T::zero(), &mut a, &mut r);
    t_grid.push(T::zero());
    values.push(a.clone());
    rates.push(r.clone());

    let (mut k1, mut k2, mut k3, mut k4) = (r.clone(), r.clone(), r.clone(), r.clone());
    let mut stage = a.clone();
    let two = T::lit(2.0);
    let sixth = T::one() / T::lit(6.0);
    let half_h = h / two;
    for s in 0..steps {
        let t = T::from_usize_lossy(s) * h;
        eval(t, &mut a, &mut k1);
        for i in 0..n {
            stage[i] = a[i] + half_h * k1[i];
        }
        eval(t + half_h, &mut stage, &mut k2);
        for i in 0..n {
            stage[i] = a[i] + half_h * k2[i];
        }
        eval(t + half_h, &mut stage, &mut k3);
        for i in 0..n {
            stage[i] = a[i] + h * k3[i];
        }
        eval(t + h, &mut stage, &mut k4);
        for i in 0..n {
            a[i] += h * sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
        }
        let t_next = T::from_usize_lossy(s + 1) * h;
        eval(t_next, &mut a, &mut r);
        if let Some(i) = a.iter().chain(r.iter()).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("coefficient a_{} at t = {t_next}", i % n),
                index: i % n,
            });
        }
        t_grid.push(t_next);
        values.push(a.clone());
        rates.push(r.clone());
    }

    let tags = (0..n)
        .map(|j| {
            if j == 0 && leading.is_some() && !initial[0].is_zero() {
                ClosedFormTag::InverseSqrt
            } else if values.iter().all(|row| row[j].is_zero()) {
                ClosedFormTag::Zero
            } else if system.is_free(j) {
                ClosedFormTag::Constant
            } else {
                ClosedFormTag::Ode
            }
        })
        .collect();

    Ok(CoefficientTrajectories {
        lattice: lattice.clone(),
        side,
        system,
        dt: h,
        t_grid,
        values,
        rates,
        tags,
        leading,
    })
}

impl<T: Real> CoefficientTrajectories<T> {
    pub fn lattice(&self) -> &ExponentLattice {
        &self.lattice
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn system(&self) -> &CoefficientSystem<T> {
        &self.system
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn t_grid(&self) -> &[T] {
        &self.t_grid
    }

    pub fn t_end(&self) -> T {
        *self.t_grid.last().unwrap()
    }

    pub fn tags(&self) -> &[ClosedFormTag] {
        &self.tags
    }

    /// All coefficients at sample `i`.
    pub fn sample(&self, i: usize) -> &[T] {
        &self.values[i]
    }

    /// Samples of `a_j` over the grid.
    pub fn series(&self, j: usize) -> Vec<T> {
        self.values.iter().map(|row| row[j]).collect()
    }

    /// Coefficients at time `t`: cubic Hermite between samples (fourth order,
    /// matching the integrator), with the leading closed form where active.
    pub fn at(&self, t: T) -> Result<Vec<T>> {
        let t_end = self.t_end();
        let tol = self.dt * T::lit(1e-9);
        if !(t >= -tol && t <= t_end + tol) {
            return Err(Error::OutsideWindow {
                t: t.to_f64_lossy(),
                lo: 0.0,
                hi: t_end.to_f64_lossy(),
            });
        }
        let t = t.max(T::zero()).min(t_end);
        let last = self.t_grid.len() - 1;
        let i = (t / self.dt).floor().to_usize().unwrap_or(0).min(last.saturating_sub(1));
        let t0 = self.t_grid[i];
        let s = ((t - t0) / self.dt).max(T::zero()).min(T::one());
        let mut out = if s.is_zero() {
            self.values[i].clone()
        } else if s == T::one() {
            self.values[i + 1].clone()
        } else {
            let (s2, s3) = (s * s, s * s * s);
            let two = T::lit(2.0);
            let three = T::lit(3.0);
            let h00 = two * s3 - three * s2 + T::one();
            let h10 = s3 - two * s2 + s;
            let h01 = -two * s3 + three * s2;
            let h11 = s3 - s2;
            (0..self.lattice.len())
                .map(|j| {
                    h00 * self.values[i][j]
                        + h10 * self.dt * self.rates[i][j]
                        + h01 * self.values[i + 1][j]
                        + h11 * self.dt * self.rates[i + 1][j]
                })
                .collect()
        };
        if let Some(l) = self.leading {
            out[0] = l.value(t);
        }
        Ok(out)
    }

    /// `ȧ(t)` from the right-hand side evaluated at [`Self::at`].
    pub fn rates_at(&self, t: T) -> Result<Vec<T>> {
        let a = self.at(t)?;
        let mut r = vec![T::zero(); a.len()];
        self.system.rhs(&a, &mut r);
        Ok(r)
    }

    /// `|centered difference of a_j − rhs_j|` at the grid sample nearest `t`.
    /// Returns `None` unless the sample is interior.
    pub fn coefficient_residual(&self, j: usize, t: T) -> Option<T> {
        let i = (t / self.dt).round().to_usize()?;
        if i == 0 || i + 1 >= self.t_grid.len() || j >= self.lattice.len() {
            return None;
        }
        let fd = (self.values[i + 1][j] - self.values[i - 1][j]) / (T::lit(2.0) * self.dt);
        Some((fd - self.system.rhs_j(&self.values[i], j)).abs())
    }

    /// Largest residual over all indices and interior samples.
    pub fn max_residual(&self) -> T {
        let mut m = T::zero();
        for i in 1..self.t_grid.len().saturating_sub(1) {
            for j in 0..self.lattice.len() {
                m = m.max(self.coefficient_residual(j, self.t_grid[i]).unwrap());
            }
        }
        m
    }

    /// CSV with columns `t, a_0, a_1, ...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.lattice.len()).map(|j| format!("a_{j}")));
        wr.write_record(&header)?;
        for (t, row) in self.t_grid.iter().zip(&self.values) {
            let mut rec = vec![format!("{t:e}")];
            rec.extend(row.iter().map(|v| format!("{v:e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}
