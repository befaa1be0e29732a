//! Polynomial smoothstep of degree `2M+1`, flat to order `M` at both ends, and
//! the spatial cutoff / temporal taper built from it.
//!
//! `M = 9`: the defect `g` contains `χ'''`, and its `D₊ⁿ` seminorms up to
//! `n = 6` only settle under refinement when `χ` has nine continuous derivatives.

use crate::Real;

/// Flatness order `M` at the junctions.
pub const FLAT_ORDER: usize = 9;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn falling(m: usize, i: usize) -> f64 {
    if i > m {
        0.0
    } else {
        (0..i).map(|j| (m - j) as f64).product()
    }
}

/// `S⁽ⁿ⁾(s)` on `s ≤ 1/2`, where every form below is free of cancellation.
fn lower_half<T: Real>(s: T, n: usize) -> T {
    let m = FLAT_ORDER;
    let r = T::one() - s;
    if n == 0 {
        // S = s^{M+1} Σₖ C(M+k, k) (1−s)^k
        let mut acc = T::zero();
        for k in (0..=m).rev() {
            acc = acc * r + T::lit(binomial(m + k, k));
        }
        return s.powi(m as i32 + 1) * acc;
    }
    // S' = K sᴹ(1−s)ᴹ with K = (2M+1)!/(M!)², higher orders by Leibniz
    let kk = (2 * m + 1) as f64 * binomial(2 * m, m);
    let d = n - 1;
    let mut acc = T::zero();
    for i in 0..=d {
        let c = binomial(d, i) * falling(m, i) * falling(m, d - i);
        if c == 0.0 {
            continue;
        }
        let sign = if (d - i) % 2 == 0 { 1.0 } else { -1.0 };
        acc += T::lit(sign * c) * s.powi((m - i) as i32) * r.powi((m + i - d) as i32);
    }
    T::lit(kk) * acc
}

/// `S⁽ⁿ⁾(s)` for `n ≤ 3`, with `S = 0` for `s ≤ 0` and `S = 1` for `s ≥ 1`.
pub fn smoothstep<T: Real>(s: T, n: usize) -> T {
    assert!(n <= 3, "smoothstep derivative order {n} > 3");
    if s <= T::zero() || s >= T::one() {
        return if n == 0 && s >= T::one() {
            T::one()
        } else {
            T::zero()
        };
    }
    if s <= T::lit(0.5) {
        return lower_half(s, n);
    }
    // S(s) = 1 − S(1−s)
    let v = lower_half(T::one() - s, n);
    match n {
        0 => T::one() - v,
        1 | 3 => v,
        _ => -v,
    }
}

/// Cutoff `χ` with `χ = 0` on `(−∞, x₁]`, `χ = 1` on `[x₂, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff<T> {
    pub inner: T,
    pub outer: T,
}

impl<T: Real> Cutoff<T> {
    pub fn new(inner: T, outer: T) -> Self {
        assert!(inner < outer, "cutoff needs inner < outer");
        Self { inner, outer }
    }

    /// `χ⁽ⁿ⁾(x)` for `n ≤ 3`.
    pub fn eval(&self, x: T, n: usize) -> T {
        let w = self.outer - self.inner;
        smoothstep((x - self.inner) / w, n) / w.powi(n as i32)
    }

    pub fn is_one(&self, x: T) -> bool {
        x >= self.outer
    }

    pub fn is_zero(&self, x: T) -> bool {
        x <= self.inner
    }
}

/// Time taper `φ`: 1 on `[−1, T+1]`, 0 outside `(−2, T+2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taper<T> {
    pub t_end: T,
}

impl<T: Real> Taper<T> {
    pub fn eval(&self, t: T) -> T {
        let two = T::lit(2.0);
        if t <= self.t_end {
            smoothstep(t + two, 0)
        } else {
            smoothstep(self.t_end + two - t, 0)
        }
    }

    pub fn is_one(&self, t: T) -> bool {
        t >= -T::one() && t <= self.t_end + T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_symmetry() {
        assert_eq!(smoothstep(0.0f64, 0), 0.0);
        assert_eq!(smoothstep(1.0f64, 0), 1.0);
        assert!((smoothstep(0.5f64, 0) - 0.5).abs() < 1e-15);
        for n in 1..=3 {
            for s in [1e-9f64, 1.0 - 1e-9] {
                assert!(smoothstep(s, n).abs() < 1e-5, "n={n} s={s}");
            }
        }
        for s in [0.1, 0.3, 0.77] {
            assert!((smoothstep(s, 0) + smoothstep(1.0 - s, 0) - 1.0f64).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_to_high_order_at_the_ends() {
        // S(s) ~ C(2M+1, M) s^{M+1} near 0
        for s in [1e-2f64, 1e-3] {
            let v = smoothstep(s, 0);
            let lead = binomial(2 * FLAT_ORDER + 1, FLAT_ORDER) * s.powi(FLAT_ORDER as i32 + 1);
            assert!((v / lead - 1.0).abs() < 20.0 * s, "s={s}");
        }
    }

    #[test]
    fn monotone() {
        let mut prev = 0.0f64;
        for i in 1..=1000 {
            let v = smoothstep(i as f64 / 1000.0, 0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let d = 1e-5;
        for n in 1..=3 {
            for s in [0.2f64, 0.45, 0.5, 0.8] {
                let fd = (smoothstep(s + d, n - 1) - smoothstep(s - d, n - 1)) / (2.0 * d);
                assert!((fd - smoothstep(s, n)).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn cutoff_and_taper() {
        let c = Cutoff::new(1.0f64, 3.0);
        assert_eq!(c.eval(0.5, 0), 0.0);
        assert_eq!(c.eval(3.5, 0), 1.0);
        let peak = 19.0 * binomial(18, 9) / 4f64.powi(9);
        assert!((c.eval(2.0, 1) - peak / 2.0).abs() < 1e-14);
        let p = Taper { t_end: 0.5f64 };
        assert_eq!(p.eval(-3.0), 0.0);
        assert_eq!(p.eval(-1.0), 1.0);
        assert_eq!(p.eval(1.5), 1.0);
        assert_eq!(p.eval(2.5), 0.0);
        assert!((p.eval(-1.5) - 0.5).abs() < 1e-14);
        assert!((p.eval(2.0) - 0.5).abs() < 1e-14);
    }
}
