//! Extension of a computed history `u_0, …, u_J` to all time levels, then
//! tapered to compact support in time.
//!
//! Past `T` the levels follow `u_j = 3u_{j−1} − 3u_{j−2} + u_{j−3}`, i.e. third
//! time differences vanish and the extension is the quadratic through the
//! last three levels. Before `0` the mirrored rule uses the first three. The
//! tapered history is `û_j = φ(t_j)·u_j` with `φ = 1` on `[−1, T+1]` and
//! `φ = 0` outside `(−2, T+2)`. Levels are produced on demand.

use crate::error::{Error, Result};
use crate::mesh::MeshFunction;
use crate::smoothstep::Taper;
use crate::Real;

#[derive(Clone, Debug)]
pub struct ExtendedHistory<T> {
    states: Vec<MeshFunction<T>>,
    k: T,
    taper: Taper<T>,
}

impl<T: Real> ExtendedHistory<T> {
    /// `states[j]` is `u` at `t_j = j·k`; `T` is the last level's time.
    pub fn new(states: Vec<MeshFunction<T>>, k: T) -> Result<Self> {
        if states.len() < 3 {
            return Err(Error::InsufficientHistory {
                have: states.len(),
                need: 3,
            });
        }
        let m0 = *states[0].mesh();
        if states.iter().any(|s| !s.mesh().same_grid(&m0)) {
            return Err(Error::MeshMismatch("history levels on different grids".into()));
        }
        let t_end = T::from_usize_lossy(states.len() - 1) * k;
        Ok(Self {
            states,
            k,
            taper: Taper { t_end },
        })
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn t_end(&self) -> T {
        self.taper.t_end
    }

    /// Index of the last recorded level.
    pub fn last(&self) -> isize {
        self.states.len() as isize - 1
    }

    pub fn t(&self, j: isize) -> T {
        T::from_isize(j).unwrap() * self.k
    }

    /// Levels outside this range are zero after tapering: `[−2−3k, T+2]`.
    pub fn index_range(&self) -> (isize, isize) {
        let two = T::lit(2.0);
        let lo = ((-two - T::lit(3.0) * self.k) / self.k).floor().to_isize().unwrap();
        let hi = ((self.t_end() + two) / self.k).ceil().to_isize().unwrap();
        (lo, hi)
    }

    pub fn phi(&self, j: isize) -> T {
        self.taper.eval(self.t(j))
    }

    /// Untapered extension at level `j`.
    pub fn raw(&self, j: isize) -> MeshFunction<T> {
        let last = self.last();
        if (0..=last).contains(&j) {
            return self.states[j as usize].clone();
        }
        // quadratic through three end levels, parametrized by distance s past the end
        let (s, a, b, c) = if j > last {
            let l = last as usize;
            (j - last, &self.states[l], &self.states[l - 1], &self.states[l - 2])
        } else {
            (-j, &self.states[0], &self.states[1], &self.states[2])
        };
        let s = T::from_isize(s).unwrap();
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let vals = a
            .values()
            .iter()
            .zip(b.values())
            .zip(c.values())
            .map(|((&a, &b), &c)| a + s * (a - b) + half * s * (s + T::one()) * (a - two * b + c))
            .collect();
        MeshFunction::from_values(*a.mesh(), vals).expect("finite extrapolation")
    }

    /// Tapered level `û_j`.
    pub fn at(&self, j: isize) -> MeshFunction<T> {
        let p = self.phi(j);
        if p.is_zero() {
            return MeshFunction::zeros(*self.states[0].mesh());
        }
        let r = self.raw(j);
        if p == T::one() {
            r
        } else {
            r.scale(p)
        }
    }

    /// `D_{t,+}^m` at level `j` of the tapered (or raw) history.
    pub fn dt_plus_pow(&self, j: isize, m: usize, tapered: bool) -> MeshFunction<T> {
        let level = |i: isize| if tapered { self.at(i) } else { self.raw(i) };
        let mesh = *self.states[0].mesh();
        let mut acc = vec![T::zero(); mesh.n_nodes()];
        let mut binom = 1i64;
        for i in 0..=m {
            // (−1)^{m−i} C(m, i) u_{j+i}
            let sign = if (m - i) % 2 == 0 { T::one() } else { -T::one() };
            let c = sign * T::lit(binom as f64);
            let v = level(j + i as isize);
            for (a, &x) in acc.iter_mut().zip(v.values()) {
                *a += c * x;
            }
            binom = binom * (m - i) as i64 / (i + 1) as i64;
        }
        let scale = self.k.powi(m as i32).recip();
        MeshFunction::from_values(mesh, acc.into_iter().map(|v| v * scale).collect())
            .expect("finite differences")
    }

    /// `max_j ‖D_{t,+}^m û_j‖_{L²_h}` over the whole extended range.
    pub fn max_time_difference_norm(&self, m: usize) -> T {
        let (lo, hi) = self.index_range();
        (lo..=hi - m as isize)
            .map(|j| self.dt_plus_pow(j, m, true).l2h_norm())
            .fold(T::zero(), T::max)
    }
}
