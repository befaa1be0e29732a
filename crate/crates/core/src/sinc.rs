//! Cardinal-series smoothing of grid data,
//!
//! ```text
//! U(x) = Σ_l u_l · sin((π/h)(x − x_l)) / ((π/h)(x − x_l)),
//! ```
//!
//! truncated to the nodes within `W` steps of `x` (cost `O(W)` per point).
//! At `s = x/h = m + r` with `m` the nearest integer, every term shares
//! `sin(π(s − l)) = (−1)^{m−l} sin(πr)`, so one sine per point suffices and
//! grid nodes are reproduced exactly (`r = 0` kills all terms but `l = m`).

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extension::ExtendedHistory;
use crate::mesh::{bracket, MeshFunction};
use crate::Real;

/// Default truncation half-width in nodes.
pub const DEFAULT_WINDOW: usize = 200;
/// Quadrature points per grid step for continuum norms.
pub const QUAD_PER_STEP: usize = 64;

/// Which variable the series interpolates in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

/// `σ⁽ᵈ⁾(y)` for `σ(y) = sin y / y`, `d ≤ 3`, given `sin y` and `cos y`.
fn sigma_derivs<T: Real>(y: T, sy: T, cy: T) -> [T; 4] {
    if y.abs() < T::one() {
        // Taylor: σ = Σ (−1)ⁿ y²ⁿ/(2n+1)!
        let mut out = [T::zero(); 4];
        let y2 = y * y;
        let mut pow = T::one(); // y^{2n}
        let mut fact = T::one(); // (2n+1)!
        for n in 0..12usize {
            let sign = if n % 2 == 0 { T::one() } else { -T::one() };
            let c = sign / fact;
            let e = T::from_usize_lossy(2 * n);
            out[0] += c * pow;
            if n >= 1 {
                out[1] += c * e * pow / y;
                out[2] += c * e * (e - T::one()) * pow / y2;
            }
            if n >= 2 {
                out[3] += c * e * (e - T::one()) * (e - T::lit(2.0)) * pow / (y2 * y);
            }
            pow *= y2;
            let m = T::from_usize_lossy(2 * n + 2);
            fact *= m * (m + T::one());
        }
        if y.is_zero() {
            // the divided powers above are 0/0 only for the terms that vanish
            return [T::one(), T::zero(), -T::one() / T::lit(3.0), T::zero()];
        }
        out
    } else {
        let iy = y.recip();
        let iy2 = iy * iy;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        [
            sy * iy,
            cy * iy - sy * iy2,
            -sy * iy - two * cy * iy2 + two * sy * iy2 * iy,
            -cy * iy + three * sy * iy2 + six * cy * iy2 * iy - six * sy * iy2 * iy2,
        ]
    }
}

/// `Σ_l v(l) · d^d/ds^d sinc(s − l)` for `d = 0..=3`, over `|l − s| ≤ window`
/// and `lo ≤ l ≤ hi`. `s` is in units of the grid step.
pub fn cardinal_sum<T: Real>(s: T, lo: isize, hi: isize, window: usize, v: impl Fn(isize) -> T) -> [T; 4] {
    let pi = T::PI();
    let m = s.round();
    let r = s - m;
    let (sr, cr) = (pi * r).sin_cos();
    let mi = m.to_isize().unwrap();
    let w = T::from_usize_lossy(window);
    let first = (s - w).ceil().to_isize().unwrap().max(lo);
    let last = (s + w).floor().to_isize().unwrap().min(hi);
    let mut acc = [T::zero(); 4];
    for l in first..=last {
        let val = v(l);
        if val.is_zero() {
            continue;
        }
        let (sy, cy) = if (mi - l) % 2 == 0 { (sr, cr) } else { (-sr, -cr) };
        let y = pi * (s - T::from_isize(l).unwrap());
        let d = if l == mi && r.is_zero() {
            [T::one(), T::zero(), -pi * pi / T::lit(3.0), T::zero()]
        } else {
            let sd = sigma_derivs(y, sy, cy);
            [sd[0], pi * sd[1], pi * pi * sd[2], pi * pi * pi * sd[3]]
        };
        for o in 0..4 {
            acc[o] += val * d[o];
        }
    }
    acc
}

/// A cardinal series over equally spaced samples `values[i]` at `(first + i)·step`.
#[derive(Clone, Debug)]
pub struct SmoothedFunction<T> {
    step: T,
    first: isize,
    values: Vec<T>,
    window: usize,
    axis: Axis,
}

impl<T: Real> SmoothedFunction<T> {
    /// `I_h u` for a mesh function.
    pub fn from_mesh(u: &MeshFunction<T>, window: usize) -> Self {
        Self {
            step: u.mesh().h(),
            first: -(u.mesh().half() as isize),
            values: u.values().to_vec(),
            window,
            axis: Axis::Space,
        }
    }

    /// `I_k` over time levels `first, first+1, …` with step `k`.
    pub fn from_levels(values: Vec<T>, first: isize, k: T, window: usize) -> Self {
        Self {
            step: k,
            first,
            values,
            window,
            axis: Axis::Time,
        }
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn step(&self) -> T {
        self.step
    }

    fn bounds(&self) -> (isize, isize) {
        (self.first, self.first + self.values.len() as isize - 1)
    }

    /// `U, U', U'', U'''` at `x`.
    pub fn eval_all(&self, x: T) -> [T; 4] {
        let (lo, hi) = self.bounds();
        let raw = cardinal_sum(x / self.step, lo, hi, self.window, |l| {
            self.values[(l - self.first) as usize]
        });
        let ih = self.step.recip();
        [raw[0], raw[1] * ih, raw[2] * ih * ih, raw[3] * ih * ih * ih]
    }

    pub fn eval(&self, x: T) -> T {
        self.eval_all(x)[0]
    }

    /// `∂ʲU(x)` for `j ≤ 3`.
    pub fn derivative(&self, x: T, j: usize) -> Result<T> {
        if j > 3 {
            return Err(Error::OrderTooLarge { order: j, max: 3 });
        }
        Ok(self.eval_all(x)[j])
    }

    /// Interval outside which the truncated series vanishes, or `None` for zero data.
    pub fn support(&self) -> Option<(T, T)> {
        let a = self.values.iter().position(|v| !v.is_zero())? as isize;
        let b = self.values.iter().rposition(|v| !v.is_zero())? as isize;
        let w = self.window as isize;
        Some((
            T::from_isize(self.first + a - w).unwrap() * self.step,
            T::from_isize(self.first + b + w).unwrap() * self.step,
        ))
    }

    /// `∫ F(x, U(x), …, U'''(x))² dx` over the support by composite Simpson
    /// with `per_step` subintervals per grid step.
    fn integrate_sq(&self, per_step: usize, f: &(impl Fn(T, &[T; 4]) -> T + Sync)) -> T {
        match self.support() {
            Some((a, b)) => self.integrate_sq_on(a, b, per_step, f),
            None => T::zero(),
        }
    }

    fn integrate_sq_on(&self, a: T, b: T, per_step: usize, f: &(impl Fn(T, &[T; 4]) -> T + Sync)) -> T {
        let per_step = per_step + per_step % 2;
        let n = ((b - a) / self.step).round().to_usize().unwrap() * per_step;
        let dx = (b - a) / T::from_usize_lossy(n);
        // collect in order, then sum serially: the result must not depend on
        // how the work was split across threads
        let terms: Vec<T> = (0..=n)
            .into_par_iter()
            .map(|i| {
                let x = a + T::from_usize_lossy(i) * dx;
                let v = f(x, &self.eval_all(x));
                let w = if i == 0 || i == n {
                    T::one()
                } else if i % 2 == 1 {
                    T::lit(4.0)
                } else {
                    T::lit(2.0)
                };
                w * v * v
            })
            .collect();
        let total = terms.into_iter().fold(T::zero(), |a, b| a + b);
        total * dx / T::lit(3.0)
    }

    /// Simpson at `QUAD_PER_STEP` points per step, checked against half the
    /// resolution.
    fn checked_sq(&self, bounds: Option<(T, T)>, f: impl Fn(T, &[T; 4]) -> T + Sync) -> Result<T> {
        let run = |per: usize| match bounds {
            Some((a, b)) => self.integrate_sq_on(a, b, per, &f),
            None => self.integrate_sq(per, &f),
        };
        let fine = run(QUAD_PER_STEP);
        let coarse = run(QUAD_PER_STEP / 2);
        let tol = T::lit(1e-6) * fine.abs() + T::lit(1e-14);
        if !((fine - coarse).abs() <= tol) {
            return Err(Error::Quadrature(format!(
                "norm² changes from {coarse:e} to {fine:e} on refinement"
            )));
        }
        Ok(fine.max(T::zero()))
    }

    /// `‖F(x, U, …)‖_{L²}` over the support of the truncated series.
    pub fn l2_norm_of(&self, f: impl Fn(T, &[T; 4]) -> T + Sync) -> Result<T> {
        Ok(self.checked_sq(None, f)?.sqrt())
    }

    /// `‖∂ʲU‖_{L²}`.
    pub fn derivative_norm(&self, j: usize) -> Result<T> {
        if j > 3 {
            return Err(Error::OrderTooLarge { order: j, max: 3 });
        }
        self.l2_norm_of(|_, d| d[j])
    }

    /// Samples `(x, U(x))` on `[a, b]` with `n` intervals.
    pub fn write_csv<W: Write>(&self, w: W, a: T, b: T, n: usize) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "U"])?;
        for i in 0..=n {
            let x = a + (b - a) * T::from_usize_lossy(i) / T::from_usize_lossy(n.max(1));
            wr.write_record([format!("{x:e}"), format!("{:e}", self.eval(x))])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `U = I_h u` at `x`.
pub fn sinc_eval<T: Real>(sf: &SmoothedFunction<T>, x: T) -> T {
    sf.eval(x)
}

/// `(‖∂ʲU‖_{L²}, ‖D₊ʲu‖_{L²_h})` for `1 ≤ j ≤ 3`.
pub fn sinc_derivative_norms<T: Real>(u: &MeshFunction<T>, j: usize, window: usize) -> Result<(T, T)> {
    if !(1..=3).contains(&j) {
        return Err(Error::OrderTooLarge { order: j, max: 3 });
    }
    let sf = SmoothedFunction::from_mesh(u, window);
    Ok((sf.derivative_norm(j)?, u.d_plus_pow(j).l2h_norm()))
}

/// `‖I_h u‖_{L²} / ‖u‖_{L²_h}`.
pub fn isometry_ratio<T: Real>(u: &MeshFunction<T>, window: usize) -> Result<T> {
    let sf = SmoothedFunction::from_mesh(u, window);
    Ok(sf.derivative_norm(0)? / u.l2h_norm())
}

/// `‖I_h u‖_{L²}` of the untruncated series. On the support widened by
/// `window` nodes every support node enters the sum and the square is
/// integrated numerically; beyond it `U(x) = sin(πs)/π · Σ_l c_l/(s − l)` with
/// `s = x/h`, `c_l = (−1)^l u_l`, and the energy `(h/2π²)∫(Σ c_l/(s − l))² ds`
/// is summed in closed form.
pub fn full_series_norm<T: Real>(u: &MeshFunction<T>, window: usize) -> Result<T> {
    let Some((ia, ib)) = u.support() else {
        return Ok(T::zero());
    };
    let mesh = u.mesh();
    let h = mesh.h();
    let sf = SmoothedFunction::from_mesh(u, window + (ib - ia) + 1);
    let w = T::from_usize_lossy(window);
    let (a, b) = (mesh.x(ia) - w * h, mesh.x(ib) + w * h);
    let inner = sf.checked_sq(Some((a, b)), |_, d| d[0])?;

    let half = mesh.half() as isize;
    let terms: Vec<(T, T)> = (ia..=ib)
        .filter(|&i| !u.values()[i].is_zero())
        .map(|i| {
            let l = i as isize - half;
            let c = if l % 2 == 0 { u.values()[i] } else { -u.values()[i] };
            (T::from_isize(l).unwrap(), c)
        })
        .collect();
    // ∫_0^∞ dt / ((t + p)(t + q)) for p, q > 0
    let kernel = |p: T, q: T| if p == q { p.recip() } else { (p / q).ln() / (p - q) };
    let (s_left, s_right) = (a / h, b / h);
    let mut tails = T::zero();
    for &(l, cl) in &terms {
        for &(m, cm) in &terms {
            tails += cl * cm * (kernel(s_right - l, s_right - m) + kernel(l - s_left, m - s_left));
        }
    }
    let pi = T::PI();
    Ok((inner + h / (T::lit(2.0) * pi * pi) * tails).sqrt())
}

/// `‖I_h u‖_{L²} / ‖u‖_{L²_h}` for the untruncated series.
pub fn full_isometry_ratio<T: Real>(u: &MeshFunction<T>, window: usize) -> Result<T> {
    Ok(full_series_norm(u, window)? / u.l2h_norm())
}

/// Norms for the weighted sandwich with weight `xᴺ`, `N ≤ 2`, `j ≤ 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedSincNorms<T> {
    /// `‖∂ʲ(xᴺ U)‖_{L²}` with `U = I_h u`, or `None` when the quadrature does
    /// not settle. `U` decays only like `1/x`, so for `N ≥ 1` the untruncated
    /// norm is infinite and the truncated one is dominated by the window edge.
    pub weighted_continuum: Option<T>,
    /// `‖D₊ʲ(xᴺ u)‖_{L²_h}`.
    pub discrete: T,
    /// `‖∂ʲ I_h(xᴺ u)‖_{L²}`.
    pub smoothed_weighted: T,
}

pub fn weighted_sinc_norms<T: Real>(
    u: &MeshFunction<T>,
    n_weight: usize,
    j: usize,
    window: usize,
) -> Result<WeightedSincNorms<T>> {
    if n_weight > 2 || j > 3 {
        return Err(Error::OrderTooLarge {
            order: n_weight.max(j),
            max: 3,
        });
    }
    let sf = SmoothedFunction::from_mesh(u, window);
    // ∂ʲ(xᴺU) = Σ_i C(j,i) (xᴺ)^{(i)} U^{(j−i)}
    let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
    let weighted_continuum = sf.l2_norm_of(|x, d| {
        let mut s = T::zero();
        for i in 0..=j.min(n_weight) {
            let mut c = T::one();
            for q in 0..i {
                c *= T::from_usize_lossy(n_weight - q);
            }
            let xp = c * x.powi((n_weight - i) as i32);
            s += T::lit(binom[j][i]) * xp * d[j - i];
        }
        s
    });
    let weighted_continuum = match weighted_continuum {
        Ok(v) => Some(v),
        Err(Error::Quadrature(_)) => None,
        Err(e) => return Err(e),
    };
    let xu = u.poly_weighted(n_weight);
    let smoothed = SmoothedFunction::from_mesh(&xu, window);
    Ok(WeightedSincNorms {
        weighted_continuum,
        discrete: xu.d_plus_pow(j).l2h_norm(),
        smoothed_weighted: smoothed.derivative_norm(j)?,
    })
}

/// `I = I_h I_k` applied to a tapered time-extended history.
#[derive(Clone, Debug)]
pub struct SpaceTimeSmoothing<'a, T> {
    history: &'a ExtendedHistory<T>,
    window_x: usize,
    window_t: usize,
}

pub fn spacetime_smooth<T: Real>(
    history: &ExtendedHistory<T>,
    window_x: usize,
    window_t: usize,
) -> SpaceTimeSmoothing<'_, T> {
    SpaceTimeSmoothing {
        history,
        window_x,
        window_t,
    }
}

impl<T: Real> SpaceTimeSmoothing<'_, T> {
    /// `∂ₜᵐ I_k û(x_n, t)` at every node, `m ≤ 3`.
    pub fn time_slice(&self, t: T, m: usize) -> Result<MeshFunction<T>> {
        if m > 3 {
            return Err(Error::OrderTooLarge { order: m, max: 3 });
        }
        let k = self.history.k();
        let (lo, hi) = self.history.index_range();
        let s = t / k;
        let w = T::from_usize_lossy(self.window_t);
        let first = (s - w).ceil().to_isize().unwrap().max(lo);
        let last = (s + w).floor().to_isize().unwrap().min(hi);
        let levels: Vec<MeshFunction<T>> = (first..=last.max(first)).map(|j| self.history.at(j)).collect();
        let mesh = *levels[0].mesh();
        let scale = k.powi(m as i32).recip();
        let vals = (0..mesh.n_nodes())
            .map(|i| {
                let d = cardinal_sum(s, first, last, self.window_t, |j| {
                    levels[(j - first) as usize].values()[i]
                });
                d[m] * scale
            })
            .collect();
        MeshFunction::from_values(mesh, vals)
    }

    /// `∂ₓⁿ ∂ₜᵐ I û (x, t)`, with `∂ₜᵐ` applied to the time factor first.
    pub fn eval(&self, x: T, t: T, n: usize, m: usize) -> Result<T> {
        let slice = self.time_slice(t, m)?;
        SmoothedFunction::from_mesh(&slice, self.window_x).derivative(x, n)
    }

    /// `max |⟨x⟩ᴺ ∂ₓⁿ ∂ₜᵐ I û|` over the probe points `xs × ts`.
    pub fn weighted_sup(&self, xs: &[T], ts: &[T], n_weight: usize, n: usize, m: usize) -> Result<T> {
        let mut best = T::zero();
        for &t in ts {
            let slice = SmoothedFunction::from_mesh(&self.time_slice(t, m)?, self.window_x);
            for &x in xs {
                let v = slice.derivative(x, n)?.abs() * bracket(x).powi(n_weight as i32);
                best = best.max(v);
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Mesh;

    fn delta(h: f64, r: f64) -> MeshFunction<f64> {
        let mesh = Mesh::spatial(h, r).unwrap();
        MeshFunction::from_fn(mesh, |x| if x.abs() < h / 2.0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn delta_gives_sinc() {
        let u = delta(0.5, 10.0);
        let sf = SmoothedFunction::from_mesh(&u, DEFAULT_WINDOW);
        assert_eq!(sf.eval(0.0), 1.0);
        for m in 1..10 {
            assert_eq!(sf.eval(m as f64 * 0.5), 0.0);
        }
        let x = 0.3;
        let z = std::f64::consts::PI * x / 0.5;
        assert!((sf.eval(x) - z.sin() / z).abs() < 1e-15);
    }

    #[test]
    fn kernel_derivatives_match_differences() {
        let d = 1e-5;
        for s in [0.0, 0.1, 0.31, 0.9, 1.7, 3.2, -2.45] {
            let f = |s: f64| cardinal_sum(s, 0, 0, 50, |_| 1.0);
            let c = f(s);
            for o in 1..4 {
                let fd = (f(s + d)[o - 1] - f(s - d)[o - 1]) / (2.0 * d);
                assert!((fd - c[o]).abs() < 1e-5 * (1.0 + fd.abs()), "s={s} o={o}: {fd} vs {}", c[o]);
            }
        }
    }

    #[test]
    fn taylor_and_closed_form_agree_at_switch() {
        let y = 1.0f64 - 1e-12;
        let a = sigma_derivs(y, y.sin(), y.cos());
        let y2 = 1.0f64 + 1e-12;
        let b = sigma_derivs(y2, y2.sin(), y2.cos());
        for o in 0..4 {
            assert!((a[o] - b[o]).abs() < 1e-10, "{o}");
        }
    }

    #[test]
    fn zero_data() {
        let u = MeshFunction::zeros(Mesh::spatial(0.5, 5.0).unwrap());
        assert_eq!(sinc_derivative_norms(&u, 1, 50).unwrap(), (0.0, 0.0));
        assert_eq!(SmoothedFunction::from_mesh(&u, 50).eval(0.37), 0.0);
    }

    #[test]
    fn delta_sandwich_and_isometry() {
        let u = delta(1.0 / 2.0, 120.0);
        let (c, d) = sinc_derivative_norms(&u, 1, DEFAULT_WINDOW).unwrap();
        let k = 2.0 / std::f64::consts::PI;
        assert!(k * c <= d + 1e-3 && d <= c + 1e-3, "{c} {d}");
        let r = isometry_ratio(&u, DEFAULT_WINDOW).unwrap();
        assert!((r - 1.0).abs() < 1e-3, "{r}");
    }

    #[test]
    fn tail_energy_restores_the_isometry() {
        // alternating data puts the most energy into the dropped tail
        let mesh = Mesh::spatial(0.5, 120.0).unwrap();
        let u = MeshFunction::from_fn(mesh, |x: f64| {
            let i = (x / 0.5).round() as i64;
            if (0..20).contains(&i) {
                if i % 2 == 0 { 1.0 } else { -1.0 }
            } else {
                0.0
            }
        });
        let truncated = isometry_ratio(&u, DEFAULT_WINDOW).unwrap();
        let full = full_isometry_ratio(&u, DEFAULT_WINDOW).unwrap();
        // dropped energy ≈ C²/(π²W) relative, C = Σ(−1)^l u_l = 20
        let predicted = 1.0 - (400.0 / (std::f64::consts::PI.powi(2) * 200.0 * 20.0)).min(1.0);
        assert!((truncated * truncated - predicted).abs() < 0.2 * (1.0 - predicted), "{truncated}");
        assert!((full - 1.0).abs() < 1e-5, "{full}");
        let d = delta(0.5, 120.0);
        assert!((full_isometry_ratio(&d, DEFAULT_WINDOW).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn time_axis_reproduces_levels() {
        let sf = SmoothedFunction::from_levels(vec![1.0, -2.0, 0.5], -1, 0.1, 10);
        assert_eq!(sf.axis(), Axis::Time);
        assert_eq!(sf.eval(-0.1), 1.0);
        assert_eq!(sf.eval(0.0), -2.0);
        assert_eq!(sf.eval(0.1), 0.5);
    }
}
