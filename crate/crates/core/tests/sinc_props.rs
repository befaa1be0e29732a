use mkdv_core::extension::ExtendedHistory;
use mkdv_core::sampling::{random_compact, CompactSpec};
use mkdv_core::sinc::{
    isometry_ratio, sinc_derivative_norms, spacetime_smooth, weighted_sinc_norms, SmoothedFunction,
    DEFAULT_WINDOW,
};
use mkdv_core::{Mesh, MeshFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SLACK: f64 = 1e-3;

fn samples(count: usize, seed: u64) -> Vec<MeshFunction<f64>> {
    let mesh = Mesh::spatial(0.5, 160.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = CompactSpec {
        margin: mesh.half() - 10,
        ..CompactSpec::signed(20)
    };
    (0..count).map(|_| random_compact(mesh, spec, &mut rng)).collect()
}

#[test]
fn reproduces_nodes() {
    for u in samples(5, 1) {
        let sf = SmoothedFunction::from_mesh(&u, DEFAULT_WINDOW);
        for (i, &v) in u.values().iter().enumerate() {
            assert!((sf.eval(u.mesh().x(i)) - v).abs() <= 1e-12);
        }
    }
}

#[test]
fn derivative_sandwich_and_isometry() {
    let c = 2.0 / std::f64::consts::PI;
    for u in samples(4, 2) {
        let r = isometry_ratio(&u, DEFAULT_WINDOW).unwrap();
        assert!((r - 1.0).abs() <= SLACK, "isometry {r}");
        for j in 1..=3 {
            let (cont, disc) = sinc_derivative_norms(&u, j, DEFAULT_WINDOW).unwrap();
            assert!(c.powi(j as i32) * cont <= disc + SLACK, "j={j}: {cont} {disc}");
            assert!(disc <= cont + SLACK, "j={j}: {cont} {disc}");
        }
    }
}

#[test]
fn weighted_upper_side() {
    for u in samples(2, 3) {
        for n_weight in 0..=2 {
            for j in 0..=2 {
                let w = weighted_sinc_norms(&u, n_weight, j, DEFAULT_WINDOW).unwrap();
                let tol = SLACK * (1.0 + w.discrete);
                assert!(w.discrete <= w.smoothed_weighted + tol, "N={n_weight} j={j}: {w:?}");
                if n_weight == 0 {
                    let wc = w.weighted_continuum.expect("unweighted norm converges");
                    assert!((wc - w.smoothed_weighted).abs() <= 1e-9 * (1.0 + w.discrete));
                }
            }
        }
    }
}

#[test]
fn spacetime_reproduces_grid() {
    let k = 0.05;
    let mesh = Mesh::new(0.5, k, 8.0).unwrap();
    let states: Vec<_> = (0..8)
        .map(|j| {
            let t = j as f64 * k;
            MeshFunction::from_fn(mesh, |x| (-(x - t) * (x - t)).exp())
        })
        .collect();
    let hist = ExtendedHistory::new(states.clone(), k).unwrap();
    let st = spacetime_smooth(&hist, 40, 60);
    for (j, s) in states.iter().enumerate() {
        let slice = st.time_slice(j as f64 * k, 0).unwrap();
        for (a, b) in slice.values().iter().zip(s.values()) {
            assert!((a - b).abs() <= 1e-10);
        }
        for i in [3usize, 10, 16, 25] {
            let v = st.eval(mesh.x(i), j as f64 * k, 0, 0).unwrap();
            assert!((v - s.values()[i]).abs() <= 1e-10);
        }
    }
}
