use mkdv_core::identities::{
    centered_is_average, centered_product, dispersive_nonnegative, product_rule, shift_isometry,
    summation_by_parts, triple_product_rule, weighted_dispersive_bound, Guarded,
};
use mkdv_core::{Mesh, MeshFunction};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

/// Values placed on a grid with at least 6 zero nodes on each side.
fn compact(h: f64, vals: &[f64], offset: usize) -> MeshFunction<f64> {
    let r = (vals.len() + 2 * 6 + offset + 4) as f64 * h;
    let mesh = Mesh::spatial(h, r).unwrap();
    let mut v = vec![0.0; mesh.n_nodes()];
    for (i, &x) in vals.iter().enumerate() {
        v[6 + offset + i] = x;
    }
    MeshFunction::from_values(mesh, v).unwrap()
}

fn pair(h: f64, a: &[f64], b: &[f64]) -> (MeshFunction<f64>, MeshFunction<f64>) {
    let n = a.len().max(b.len());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.resize(n, 0.0);
    b.resize(n, 0.0);
    (compact(h, &a, 0), compact(h, &b, 0))
}

fn steps() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(0.1), Just(0.02), 0.01f64..0.99]
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..60)
}

proptest! {
    #[test]
    fn shift_is_isometry(h in steps(), v in values()) {
        prop_assert!(shift_isometry(&compact(h, &v, 0)).holds(TOL));
    }

    #[test]
    fn sbp_holds(h in steps(), a in values(), b in values()) {
        let (nu, rho) = pair(h, &a, &b);
        prop_assert!(summation_by_parts(&nu, &rho).unwrap().holds(TOL));
    }

    #[test]
    fn centered_average(h in steps(), v in values()) {
        prop_assert!(centered_is_average(&compact(h, &v, 0)).holds(TOL));
    }

    #[test]
    fn dispersive_energy(h in steps(), v in values()) {
        for c in dispersive_nonnegative(&compact(h, &v, 0)).unwrap() {
            prop_assert!(c.holds(TOL), "{} {:?}", c.name, c);
        }
    }

    #[test]
    fn centered_product_identity(h in steps(), a in values(), b in values()) {
        let (rho, nu) = pair(h, &a, &b);
        prop_assert!(centered_product(&rho, &nu).unwrap().holds(TOL));
    }

    #[test]
    fn weighted_dispersive_for_nonnegative(
        h in steps(),
        a in prop::collection::vec(0.0f64..1.0, 1..40),
        b in values(),
    ) {
        let (rho, nu) = pair(h, &a, &b);
        match weighted_dispersive_bound(&rho, &nu).unwrap() {
            Guarded::Checked(c) => prop_assert!(c.holds(TOL), "{:?}", c),
            Guarded::PreconditionViolated { reason, .. } => prop_assert!(false, "{}", reason),
        }
    }

    #[test]
    fn negative_weight_is_precondition(h in steps(), b in values(), i in 0usize..10) {
        let mut a = vec![0.5; 10];
        a[i] = -0.25;
        let (rho, nu) = pair(h, &a, &b);
        let guarded = matches!(
            weighted_dispersive_bound(&rho, &nu).unwrap(),
            Guarded::PreconditionViolated { .. }
        );
        prop_assert!(guarded);
    }

    #[test]
    fn product_rules(h in steps(), a in values(), b in values(), c in values(), n in 0usize..=3) {
        let n_max = a.len().max(b.len()).max(c.len());
        let pad = |v: &[f64]| { let mut v = v.to_vec(); v.resize(n_max, 0.0); compact(h, &v, 0) };
        let (rho, nu, xi) = (pad(&a), pad(&b), pad(&c));
        prop_assert!(product_rule(&nu, &rho).unwrap().holds(TOL));
        prop_assert!(triple_product_rule(&rho, &nu, &xi, n).unwrap().holds(TOL));
    }

    #[test]
    fn d_zero_of_quadratic_is_exact(h in steps(), c in -3.0f64..3.0) {
        let mesh = Mesh::spatial(h, 2.0).unwrap();
        let u = MeshFunction::from_fn(mesh, |x| c * x * x);
        let d = u.d_zero();
        for i in 1..mesh.n_nodes() - 1 {
            let want = 2.0 * c * mesh.x(i);
            prop_assert!((d.values()[i] - want).abs() <= 1e-9 * (1.0 + want.abs()) / h);
        }
    }

    #[test]
    fn norms_are_homogeneous(h in steps(), v in values(), c in -4.0f64..4.0) {
        let u = compact(h, &v, 0);
        let cu = u.scale(c);
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (a.abs() + b.abs() + 1e-300);
        prop_assert!(rel(cu.sh_norm(), c.abs() * u.sh_norm()));
        prop_assert!(rel(cu.l2h_norm(), c.abs() * u.l2h_norm()));
        for (nw, nd) in [(0, 0), (2, 1), (3, 3)] {
            prop_assert!(rel(
                cu.weighted_seminorm(nw, nd).unwrap(),
                c.abs() * u.weighted_seminorm(nw, nd).unwrap()
            ));
        }
    }
}

#[test]
fn sh_norm_of_delta_by_hand() {
    // h = 1/2, δ at 0. D₊³δ takes (1, −3, 3, −1)/h³ at x = −3h, …, 0, so
    // Σ ⟨x⟩²(D₊³δ)² = (3.25·1 + 2·9 + 1.25·9 + 1·1)/h⁶ = 33.5·64. D₊⁵δ has the
    // binomial row (1, 5, 10, 10, 5, 1)/h⁵, squares summing to 252·1024.
    let mesh = Mesh::<f64>::spatial(0.5, 6.0).unwrap();
    let mut v = vec![0.0; mesh.n_nodes()];
    v[mesh.half()] = 1.0;
    let u = MeshFunction::from_values(mesh, v).unwrap();
    let want = 0.5 * (1.0 + 33.5 * 64.0 + 252.0 * 1024.0);
    let got = u.sh_norm().powi(2);
    assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
}
