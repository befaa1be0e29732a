use mkdv_core::lattice::build_lattice;
use mkdv_core::series::{solve_coefficients, solve_coefficients_with, CoefficientSystem, SolveOptions};
use mkdv_core::{Rational, Side};
use num_rational::Rational64;
use proptest::prelude::*;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d).unwrap()
}

type Poly = Vec<f64>;

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn add_scaled(acc: &mut Poly, p: &Poly, c: f64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, v) in acc.iter_mut().zip(p) {
        *a += c * v;
    }
}

fn eval(p: &Poly, t: f64) -> f64 {
    p.iter().rev().fold(0.0, |s, c| s * t + c)
}

/// Exact polynomial coefficients for a lattice with leading exponent below 1/2:
/// each right-hand side only involves earlier indices, so integrating index by
/// index yields polynomials in `t`.
fn polynomial_oracle(gammas: &[Rational], initial: &[f64], sign: f64) -> Vec<Poly> {
    let g: Vec<Rational64> = gammas.iter().map(|r| Rational64::new(r.num(), r.den())).collect();
    let gf: Vec<f64> = gammas.iter().map(|r| r.to_f64()).collect();
    let one = Rational64::from_integer(1);
    let three = Rational64::from_integer(3);
    let n = g.len();
    let mut polys: Vec<Poly> = Vec::with_capacity(n);
    for j in 0..n {
        let mut rhs: Poly = vec![0.0];
        for k in 0..j {
            for l in 0..j {
                for m in 0..j {
                    if g[k] + g[l] + g[m] - one == g[j] {
                        let p = mul(&mul(&polys[k], &polys[l]), &polys[m]);
                        add_scaled(&mut rhs, &p, gf[m]);
                    }
                }
            }
        }
        for p in 0..j {
            if g[p] - three == g[j] {
                let c = gf[p] * (gf[p] - 1.0) * (gf[p] - 2.0);
                add_scaled(&mut rhs, &polys[p].clone(), c);
            }
        }
        let mut a = vec![initial[j]];
        for (d, c) in rhs.iter().enumerate() {
            a.push(sign * c / (d + 1) as f64);
        }
        polys.push(a);
    }
    polys
}

fn compare(a0: &[Rational], depth: i64, values: &[f64], side: Side) {
    let lat = build_lattice(a0, a0[0] - Rational::integer(depth)).unwrap();
    let mut initial = vec![0.0; lat.len()];
    for (b, v) in a0.iter().zip(values) {
        initial[lat.index_of(*b).unwrap()] = *v;
    }
    let sign = if side == Side::Plus { -1.0 } else { 1.0 };
    let oracle = polynomial_oracle(lat.gammas(), &initial, sign);
    let traj = solve_coefficients(&lat, side, &initial, 1.0, 1.0 / 512.0).unwrap();
    for (i, &t) in traj.t_grid().iter().enumerate() {
        for (j, p) in oracle.iter().enumerate() {
            let want = eval(p, t);
            let got = traj.sample(i)[j];
            assert!(
                (got - want).abs() <= 1e-8 * (1.0 + want.abs()),
                "j={j} t={t}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn quarter_lattice_matches_polynomials() {
    compare(&[q(1, 4)], 3, &[1.0], Side::Plus);
    compare(&[q(1, 4)], 3, &[0.7], Side::Minus);
}

#[test]
fn quarter_lattice_first_forced_term() {
    // γ = −1/4 is reached by the triple (0,0,0) only: ȧ = −γ₀a₀³ = −1/4
    let lat = build_lattice(&[q(1, 4)], q(-3, 1)).unwrap();
    let j = lat.index_of(q(-1, 4)).unwrap();
    let mut init = vec![0.0f64; lat.len()];
    init[0] = 1.0;
    let traj = solve_coefficients(&lat, Side::Plus, &init, 1.0, 1.0 / 256.0).unwrap();
    for (i, &t) in traj.t_grid().iter().enumerate() {
        assert!((traj.sample(i)[j] + t / 4.0).abs() < 1e-12);
    }
}

#[test]
fn multi_exponent_lattices_match_polynomials() {
    compare(&[q(1, 3), q(0, 1)], 3, &[1.0, 0.5], Side::Plus);
    compare(&[q(0, 1), q(-1, 2)], 3, &[-0.8, 0.3], Side::Minus);
    compare(&[q(1, 4), q(-1, 3)], 3, &[0.6, -1.2], Side::Plus);
}

#[test]
fn leading_closed_form_half_lattice() {
    let lat = build_lattice(&[Rational::half()], q(-23, 2)).unwrap();
    let mut init = vec![0.0f64; lat.len()];
    init[0] = 1.0;
    let opts = SolveOptions {
        closed_form_leading: false,
    };
    let traj = solve_coefficients_with(&lat, Side::Plus, &init, 1.0, 1.0 / 4096.0, opts).unwrap();
    let err = traj
        .t_grid()
        .iter()
        .enumerate()
        .map(|(i, &t)| (traj.sample(i)[0] - (1.0 + t).powf(-0.5)).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-8, "{err}");
    let end = traj.sample(traj.t_grid().len() - 1)[0];
    assert!((end - 0.5f64.sqrt()).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With index 0 frozen, `rhs_j` is affine in `a_j` with slope `−(γ_j+1)a₀²`
    /// on the plus side (sign flipped on the minus side), independent of the
    /// other coefficients.
    #[test]
    fn half_lattice_linear_part(
        a in prop::collection::vec(-2.0f64..2.0, 12),
        x in -3.0f64..3.0,
        y in -3.0f64..3.0,
        minus in any::<bool>(),
    ) {
        let lat = build_lattice(&[Rational::half(), q(-1, 2)], q(-6, 1)).unwrap();
        let side = if minus { Side::Minus } else { Side::Plus };
        let sys = CoefficientSystem::<f64>::new(&lat, side);
        let sign = if minus { 1.0 } else { -1.0 };
        let mut a = a;
        a.resize(lat.len(), 0.5);
        for j in 1..lat.len() {
            let mut ax = a.clone();
            ax[j] = x;
            let mut ay = a.clone();
            ay[j] = y;
            let mut a0 = a.clone();
            a0[j] = 0.0;
            let (fx, fy, f0) = (sys.rhs_j(&ax, j), sys.rhs_j(&ay, j), sys.rhs_j(&a0, j));
            let slope = sign * (lat.gamma(j).to_f64() + 1.0) * a[0] * a[0];
            let scale = 1.0 + fx.abs() + fy.abs() + f0.abs();
            prop_assert!((fx - f0 - slope * x).abs() < 1e-12 * scale);
            prop_assert!((fy - f0 - slope * y).abs() < 1e-12 * scale);
        }
    }

    /// The right-hand side of index `j` never reads indices above `j`.
    #[test]
    fn rhs_is_triangular(a in prop::collection::vec(-2.0f64..2.0, 40), bump in -5.0f64..5.0) {
        for a0 in [vec![Rational::half()], vec![q(1, 4), q(-1, 4)], vec![q(0, 1)]] {
            let lat = build_lattice(&a0, a0[0] - Rational::integer(4)).unwrap();
            let sys = CoefficientSystem::<f64>::new(&lat, Side::Plus);
            let mut base = a.clone();
            base.resize(lat.len(), 0.25);
            for j in 0..lat.len() {
                let mut changed = base.clone();
                for v in changed.iter_mut().skip(j + 1) {
                    *v += bump;
                }
                prop_assert_eq!(sys.rhs_j(&base, j), sys.rhs_j(&changed, j));
            }
        }
    }
}
