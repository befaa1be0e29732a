//! Summation-by-parts identities, product rules and norm inequalities for the
//! difference operators, evaluated on concrete mesh functions.
//!
//! Each check returns both sides and a scale (the sum of absolute values of
//! the summands involved), so exact identities can be judged at a relative
//! tolerance that is immune to cancellation. Inputs must vanish within 6 nodes
//! of the grid edge for the identities to be exact.

use crate::error::Result;
use crate::mesh::{bracket, kernels, Mesh, MeshFunction};
use crate::Real;

/// Minimum number of zero nodes at each edge for exact identities.
pub const EXACT_MARGIN: usize = 6;

/// Relation the two sides are expected to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Equal,
    /// `lhs ≥ rhs`.
    AtLeast,
    /// `lhs ≤ rhs`.
    AtMost,
}

/// Evaluated identity or inequality.
#[derive(Clone, Debug)]
pub struct IdentityCheck<T> {
    pub name: &'static str,
    pub anchor: &'static str,
    pub relation: Relation,
    pub lhs: T,
    pub rhs: T,
    pub scale: T,
}

impl<T: Real> IdentityCheck<T> {
    /// Signed violation relative to `scale` (≤ 0 means satisfied exactly).
    pub fn relative_violation(&self) -> T {
        let s = self.scale.max(T::min_positive_value());
        match self.relation {
            Relation::Equal => (self.lhs - self.rhs).abs() / s,
            Relation::AtLeast => (self.rhs - self.lhs) / s,
            Relation::AtMost => (self.lhs - self.rhs) / s,
        }
    }

    pub fn holds(&self, rel_tol: T) -> bool {
        let v = self.relative_violation();
        v.is_finite() && v <= rel_tol
    }
}

/// Outcome of a check with a sign precondition on its input.
#[derive(Clone, Debug)]
pub enum Guarded<T> {
    Checked(IdentityCheck<T>),
    PreconditionViolated { name: &'static str, reason: String },
}

fn abs_dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + (x * y).abs())
}

fn weighted_abs_dot<T: Real>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter()
        .zip(a.iter().zip(b))
        .fold(T::zero(), |s, (&c, (&x, &y))| s + (c * x * y).abs())
}

/// `(ρ, ρ)` style inner products reuse the mesh's `h`.
fn ip<T: Real>(a: &MeshFunction<T>, b: &MeshFunction<T>) -> Result<T> {
    a.l2h_inner(b)
}

/// `‖Eρ‖ = ‖ρ‖`.
pub fn shift_isometry<T: Real>(rho: &MeshFunction<T>) -> IdentityCheck<T> {
    let a = rho.shift(1).l2h_norm();
    let b = rho.l2h_norm();
    IdentityCheck {
        name: "shift_isometry",
        anchor: "||E rho|| = ||rho||",
        relation: Relation::Equal,
        lhs: a,
        rhs: b,
        scale: a + b,
    }
}

/// `(D₊ν, ρ) = −(ν, D₋ρ)`.
pub fn summation_by_parts<T: Real>(
    nu: &MeshFunction<T>,
    rho: &MeshFunction<T>,
) -> Result<IdentityCheck<T>> {
    let dn = nu.d_plus();
    let dr = rho.d_minus();
    let h = nu.mesh().h();
    let lhs = ip(&dn, rho)?;
    let rhs = -ip(nu, &dr)?;
    let scale = h * (abs_dot(dn.values(), rho.values()) + abs_dot(nu.values(), dr.values()));
    Ok(IdentityCheck {
        name: "summation_by_parts",
        anchor: "(D+ nu, rho) = -(nu, D- rho)",
        relation: Relation::Equal,
        lhs,
        rhs,
        scale,
    })
}

/// `D₀ = ½(D₊ + D₋)` measured in `L²_h`.
pub fn centered_is_average<T: Real>(rho: &MeshFunction<T>) -> IdentityCheck<T> {
    let a = rho.d_zero();
    let b = rho
        .d_plus()
        .add(&rho.d_minus())
        .expect("same mesh")
        .scale(T::lit(0.5));
    let diff = a.sub(&b).expect("same mesh").l2h_norm();
    IdentityCheck {
        name: "centered_is_average",
        anchor: "D0 rho = (D+ rho + D- rho)/2",
        relation: Relation::Equal,
        lhs: diff,
        rhs: T::zero(),
        scale: a.l2h_norm() + b.l2h_norm(),
    }
}

/// `(D₊²D₋ρ, ρ) ≥ 0`, together with the exact value `(h/2)‖D₊D₋ρ‖²`.
pub fn dispersive_nonnegative<T: Real>(rho: &MeshFunction<T>) -> Result<[IdentityCheck<T>; 2]> {
    let h = rho.mesh().h();
    let d3 = rho.d3();
    let lhs = ip(&d3, rho)?;
    let dd = rho.d_minus().d_plus();
    let exact = T::lit(0.5) * h * dd.l2h_norm().powi(2);
    let scale = h * abs_dot(d3.values(), rho.values());
    Ok([
        IdentityCheck {
            name: "dispersive_nonnegative",
            anchor: "(D+^2 D- rho, rho) >= 0",
            relation: Relation::AtLeast,
            lhs,
            rhs: T::zero(),
            scale,
        },
        IdentityCheck {
            name: "dispersive_energy",
            anchor: "(D+^2 D- rho, rho) = (h/2) ||D+ D- rho||^2",
            relation: Relation::Equal,
            lhs,
            rhs: exact,
            scale: scale + exact,
        },
    ])
}

/// `(ρν, D₀ν) = −½(ν, Eν·D₊ρ)`.
pub fn centered_product<T: Real>(
    rho: &MeshFunction<T>,
    nu: &MeshFunction<T>,
) -> Result<IdentityCheck<T>> {
    let h = nu.mesh().h();
    let rn = rho.mul(nu)?;
    let d0 = nu.d_zero();
    let right = nu.shift(1).mul(&rho.d_plus())?;
    let lhs = ip(&rn, &d0)?;
    let rhs = -T::lit(0.5) * ip(nu, &right)?;
    let scale = h * (abs_dot(rn.values(), d0.values())
        + T::lit(0.5) * abs_dot(nu.values(), right.values()));
    Ok(IdentityCheck {
        name: "centered_product",
        anchor: "(rho nu, D0 nu) = -1/2 (nu, E nu D+ rho)",
        relation: Relation::Equal,
        lhs,
        rhs,
        scale,
    })
}

/// Lower bound for `(ρν, D₊²D₋ν)` with `ρ ≥ 0`:
/// `≥ −½(ν, ν D₋²D₊ρ) + (D₀ρ D₊ν, D₊ν) + ½(D₋ρ D₊ν, D₊ν)`.
pub fn weighted_dispersive_bound<T: Real>(
    rho: &MeshFunction<T>,
    nu: &MeshFunction<T>,
) -> Result<Guarded<T>> {
    const NAME: &str = "weighted_dispersive_bound";
    if let Some(i) = rho.values().iter().position(|&v| v < T::zero()) {
        return Ok(Guarded::PreconditionViolated {
            name: NAME,
            reason: format!("rho(x_{i}) < 0; the bound requires rho >= 0"),
        });
    }
    let h = nu.mesh().h();
    let rn = rho.mul(nu)?;
    let d3 = nu.d3();
    let lhs = ip(&rn, &d3)?;
    let curv = rho.d_plus().d_minus().d_minus();
    let dpn = nu.d_plus();
    let d0r = rho.d_zero();
    let dmr = rho.d_minus();
    let t1 = ip(nu, &nu.mul(&curv)?)?;
    let t2 = ip(&d0r.mul(&dpn)?, &dpn)?;
    let t3 = ip(&dmr.mul(&dpn)?, &dpn)?;
    let half = T::lit(0.5);
    let rhs = -half * t1 + t2 + half * t3;
    let scale = h
        * (abs_dot(rn.values(), d3.values())
            + weighted_abs_dot(curv.values(), nu.values(), nu.values())
            + weighted_abs_dot(d0r.values(), dpn.values(), dpn.values())
            + weighted_abs_dot(dmr.values(), dpn.values(), dpn.values()));
    Ok(Guarded::Checked(IdentityCheck {
        name: NAME,
        anchor: "(rho nu, D+^2 D- nu) >= -1/2 (nu, nu D-^2 D+ rho) + (D0 rho D+ nu, D+ nu) + 1/2 (D- rho D+ nu, D+ nu)",
        relation: Relation::AtLeast,
        lhs,
        rhs,
        scale,
    }))
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Multinomial coefficients `n!/(i₁! i₂! i₃!)` of the three-factor product rule.
pub fn triple_rule_coefficients(n: usize) -> Vec<((usize, usize, usize), u64)> {
    let mut out = Vec::new();
    for i1 in 0..=n {
        for i2 in 0..=(n - i1) {
            let i3 = n - i1 - i2;
            let c = factorial(n) / (factorial(i1) * factorial(i2) * factorial(i3));
            out.push(((i1, i2, i3), c));
        }
    }
    out
}

/// `D₊ⁿ(ρνξ) = Σ c (E^{i₂+i₃}D₊^{i₁}ρ)(E^{i₃}D₊^{i₂}ν)(D₊^{i₃}ξ)`, compared in `L²_h`.
pub fn triple_product_rule<T: Real>(
    rho: &MeshFunction<T>,
    nu: &MeshFunction<T>,
    xi: &MeshFunction<T>,
    n: usize,
) -> Result<IdentityCheck<T>> {
    let direct = rho.mul(nu)?.mul(xi)?.d_plus_pow(n);
    let mut sum = MeshFunction::zeros(*rho.mesh());
    let mut scale = T::zero();
    for ((i1, i2, i3), c) in triple_rule_coefficients(n) {
        let a = rho.d_plus_pow(i1).shift((i2 + i3) as isize);
        let b = nu.d_plus_pow(i2).shift(i3 as isize);
        let z = xi.d_plus_pow(i3);
        let term = a.mul(&b)?.mul(&z)?.scale(T::from_u64(c).unwrap());
        scale += term.l2h_norm();
        sum = sum.add(&term)?;
    }
    let diff = direct.sub(&sum)?.l2h_norm();
    Ok(IdentityCheck {
        name: "triple_product_rule",
        anchor: "D+^n (rho nu xi) = sum c (E^{i2+i3} D+^{i1} rho)(E^{i3} D+^{i2} nu)(D+^{i3} xi)",
        relation: Relation::Equal,
        lhs: diff,
        rhs: T::zero(),
        scale: scale + direct.l2h_norm(),
    })
}

/// `D₊(νρ) = ν D₊ρ + (Eρ) D₊ν`.
pub fn product_rule<T: Real>(
    nu: &MeshFunction<T>,
    rho: &MeshFunction<T>,
) -> Result<IdentityCheck<T>> {
    let lhs = nu.mul(rho)?.d_plus();
    let a = nu.mul(&rho.d_plus())?;
    let b = rho.shift(1).mul(&nu.d_plus())?;
    let diff = lhs.sub(&a.add(&b)?)?.l2h_norm();
    Ok(IdentityCheck {
        name: "product_rule",
        anchor: "D+(nu rho) = nu D+ rho + (E rho) D+ nu",
        relation: Relation::Equal,
        lhs: diff,
        rhs: T::zero(),
        scale: lhs.l2h_norm() + a.l2h_norm() + b.l2h_norm(),
    })
}

/// `‖⟨x⟩ʲ D₀ρ‖ ≤ C_h ‖⟨x⟩ʲ D₊ρ‖` with `C_h = ½(1 + (1+h)ʲ)`, which follows from
/// `D₀ = ½(D₊ + E⁻¹D₊)` and `⟨x⟩ ≤ (1+h)⟨x−h⟩`; `C_h ≤ ½(1+2ʲ)` for all `h < 1`.
pub fn centered_weight_bound<T: Real>(rho: &MeshFunction<T>, j: usize) -> IdentityCheck<T> {
    let h = rho.mesh().h();
    let lhs = rho.d_zero().bracket_weighted(j).l2h_norm();
    let base = rho.d_plus().bracket_weighted(j).l2h_norm();
    let c = T::lit(0.5) * (T::one() + (T::one() + h).powi(j as i32));
    IdentityCheck {
        name: "centered_weight_bound",
        anchor: "||<x>^j D0 rho|| <= C ||<x>^j D+ rho||",
        relation: Relation::AtMost,
        lhs,
        rhs: c * base,
        scale: lhs + c * base,
    }
}

/// Sharp multiplier constant `sup_x |D₊ʲ⟨x⟩ᴺ| / ⟨x + l·h⟩^{N−j}` on `mesh`,
/// i.e. the operator norm of `ρ ↦ (D₊ʲ⟨x⟩ᴺ)·Eˡρ` from `⟨x⟩^{j−N}L²_h` to `L²_h`.
/// Only `n_weight ≥ j` is meaningful.
pub fn weight_derivative_constant<T: Real>(mesh: Mesh<T>, n_weight: usize, j: usize, l: usize) -> T {
    let w = MeshFunction::from_fn(mesh, |x| bracket(x).powi(n_weight as i32));
    let dw = w.d_plus_pow(j);
    let h = mesh.h();
    let n = mesh.n_nodes();
    let mut best = T::zero();
    // stay clear of the zero-extension edge, where D₊ʲ sees the cut
    for i in (j + 1)..n.saturating_sub(j + l + 1) {
        let xs = mesh.x(i) + T::from_usize(l).unwrap() * h;
        let r = dw.values()[i].abs() / bracket(xs).powi(n_weight as i32 - j as i32);
        best = best.max(r);
    }
    best
}

/// Ratios `‖D₊ᵏu‖ / (‖u‖ + ‖D₊ⁿu‖)` and `‖D₊ᵏu‖_∞ / (‖u‖ + ‖D₊ⁿu‖)`.
pub fn sobolev_ratios<T: Real>(u: &MeshFunction<T>, k: usize, n: usize) -> (T, T) {
    let den = u.l2h_norm() + u.d_plus_pow(n).l2h_norm();
    let dk = u.d_plus_pow(k);
    (dk.l2h_norm() / den, dk.sup_norm() / den)
}

/// Weighted ratios `‖⟨x⟩ᴺD₊ʲu‖ / (‖⟨x⟩ᴺu‖ + ‖⟨x⟩ᴺD₊^{j+k}u‖)` and the sup analogue.
pub fn weighted_sobolev_ratios<T: Real>(
    u: &MeshFunction<T>,
    n_weight: usize,
    j: usize,
    k: usize,
) -> (T, T) {
    let den = u.bracket_weighted(n_weight).l2h_norm()
        + u.d_plus_pow(j + k).bracket_weighted(n_weight).l2h_norm();
    let v = u.d_plus_pow(j).bracket_weighted(n_weight);
    (v.l2h_norm() / den, v.sup_norm() / den)
}

/// h-independent constant for `‖D₊ᵏu‖_∞ ≤ C (‖u‖ + ‖D₊ⁿu‖)`, `k < n`.
///
/// From the Fourier representation on `ℤh`, `|D₊ᵏu(x)| ≤ (2π)^{-1} ∫ |σ|ᵏ|û|`
/// with `|σ(ξ)| = |2 sin(ξh/2)/h| ∈ [(2/π)|ξ|, |ξ|]`. Cauchy–Schwarz against the
/// weight `1 + |σ|^{2n}` gives `C² = (2π)^{-1} ∫_ℝ min(ξ^{2k}, ((2/π)ξ)^{2k−2n}) dξ`.
pub fn sup_sobolev_constant(k: usize, n: usize) -> f64 {
    assert!(k < n, "sup bound needs k < n");
    let c = 2.0 / std::f64::consts::PI;
    let (a, b) = (2 * k as i32, 2 * k as i32 - 2 * n as i32);
    // crossing ξ* solves ξ^a = (cξ)^b  ⇒  ξ^{a−b} = c^b
    let xs = c.powi(b).powf(1.0 / (a - b) as f64);
    let low = xs.powi(a + 1) / (a + 1) as f64;
    let high = c.powi(b) * xs.powi(b + 1) / (-(b + 1)) as f64;
    (2.0 * (low + high) / (2.0 * std::f64::consts::PI)).sqrt()
}

/// Dot product with absolute values, used by callers building custom checks.
pub fn abs_inner<T: Real>(a: &MeshFunction<T>, b: &MeshFunction<T>) -> T {
    a.mesh().h() * abs_dot(a.values(), b.values())
}

/// Slice-level `(a, b)` without mesh checks.
pub fn raw_dot<T: Real>(a: &[T], b: &[T]) -> T {
    kernels::dot(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_compact, CompactSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(h: f64) -> (Mesh<f64>, ChaCha8Rng) {
        (Mesh::spatial(h, 4.0).unwrap(), ChaCha8Rng::seed_from_u64(17))
    }

    #[test]
    fn identities_hold_on_random_functions() {
        for h in [0.5, 0.1] {
            let (m, mut rng) = setup(h);
            for _ in 0..50 {
                let a = random_compact(m, CompactSpec::signed(60), &mut rng);
                let b = random_compact(m, CompactSpec::signed(60), &mut rng);
                let p = random_compact(m, CompactSpec::nonnegative(60), &mut rng);
                assert!(summation_by_parts(&a, &b).unwrap().holds(1e-12));
                for c in dispersive_nonnegative(&a).unwrap() {
                    assert!(c.holds(1e-12), "{c:?}");
                }
                assert!(centered_product(&b, &a).unwrap().holds(1e-12));
                assert!(centered_is_average(&a).holds(1e-12));
                assert!(shift_isometry(&a).holds(1e-12));
                match weighted_dispersive_bound(&p, &a).unwrap() {
                    Guarded::Checked(c) => assert!(c.holds(1e-12), "{c:?}"),
                    Guarded::PreconditionViolated { .. } => panic!("rho is nonnegative"),
                }
                for n in 0..=3 {
                    assert!(triple_product_rule(&a, &b, &p, n).unwrap().holds(1e-12));
                }
                assert!(product_rule(&a, &b).unwrap().holds(1e-12));
            }
        }
    }

    #[test]
    fn negative_weight_is_a_precondition_report() {
        let (m, _) = setup(0.5);
        let rho = MeshFunction::from_fn(m, |x| x);
        let nu = MeshFunction::from_fn(m, |x: f64| (-x * x).exp());
        assert!(matches!(
            weighted_dispersive_bound(&rho, &nu).unwrap(),
            Guarded::PreconditionViolated { .. }
        ));
    }

    #[test]
    fn flipped_curvature_sign_is_caught() {
        // With +½(ν, νD₋²D₊ρ) the bound fails for a rough ρ and a narrow ν.
        let m = Mesh::spatial(0.1, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_compact(m, CompactSpec { margin: 6, min_len: 180, max_len: 180, lo: 0.0, hi: 3.0 }, &mut rng);
        let mut worst = f64::INFINITY;
        for c in 20..180 {
            let nu = MeshFunction::from_fn(m, |x: f64| {
                let s = (x - m.x(c)) / 0.1;
                (-s * s).exp()
            });
            let Guarded::Checked(chk) = weighted_dispersive_bound(&rho, &nu).unwrap() else {
                unreachable!()
            };
            assert!(chk.holds(1e-12));
            let t1 = nu.l2h_inner(&nu.mul(&rho.d_plus().d_minus().d_minus()).unwrap()).unwrap();
            let flipped = chk.rhs + t1;
            worst = worst.min((chk.lhs - flipped) / chk.scale);
        }
        assert!(worst < -1e-3);
    }

    #[test]
    fn triple_coefficients_sum_to_three_power() {
        for n in 0..6 {
            let s: u64 = triple_rule_coefficients(n).iter().map(|(_, c)| c).sum();
            assert_eq!(s, 3u64.pow(n as u32));
        }
    }

    #[test]
    fn sup_constant_matches_quadrature() {
        // midpoint quadrature of the defining integral
        for (k, n) in [(0, 1), (1, 2), (0, 3), (2, 4)] {
            let c = 2.0 / std::f64::consts::PI;
            let (a, b) = (2 * k as i32, 2 * k as i32 - 2 * n as i32);
            let mut s = 0.0;
            let d = 1e-4;
            let mut x: f64 = d / 2.0;
            while x < 2000.0 {
                s += x.powi(a).min((c * x).powi(b)) * d;
                x += d;
            }
            let q = (2.0 * s / (2.0 * std::f64::consts::PI)).sqrt();
            assert!((q - sup_sobolev_constant(k, n)).abs() < 1e-3 * q, "{k} {n}");
        }
    }

    #[test]
    fn l2_sobolev_ratio_below_one() {
        // |σ|^k ≤ 1 + |σ|^n for k ≤ n, so C = 1 works for every h.
        for h in [0.5, 0.1, 0.02] {
            let (m, mut rng) = setup(h);
            for _ in 0..20 {
                let u = random_compact(m, CompactSpec::signed(100), &mut rng);
                for n in 1..=4 {
                    for k in 0..=n {
                        let (l2, sup) = sobolev_ratios(&u, k, n);
                        assert!(l2 <= 1.0 + 1e-12);
                        if k < n {
                            assert!(sup <= sup_sobolev_constant(k, n) + 1e-12);
                        }
                    }
                }
            }
        }
    }
}
