//! The implicit scheme for the correction `u` in `w = f + u`:
//!
//! ```text
//! (I + kQ_j) u_{j+1} = u_j − k g_j,
//! Q_j ρ = (u_j + f_j)² D₀ρ + D₊²D₋ρ + (2f_j + u_j)(f_x)_j ρ
//! ```
//!
//! with `f_j`, `(f_x)_j`, `g_j` sampled from the background at the old time
//! level. Each step is one banded LU solve (bandwidths 1 below, 2 above).
//!
//! Before each step a coercivity probe estimates
//! `min_v (v + kQ_j v, v)_{S_h} / ‖v‖²_{S_h}` over random wave packets; the
//! run refuses to step when it falls below the configured threshold.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::Background;
use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::mesh::{kernels, Mesh, MeshFunction};
use crate::Real;

/// Outer nodes checked for boundary contamination at each end.
pub const BOUNDARY_NODES: usize = 6;

/// Variable coefficients of `Q_j`: `a` multiplies `D₀`, `b` is the diagonal term.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorCoefficients<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Real> OperatorCoefficients<T> {
    /// `a = u² + 2fu + f²`, `b = 2f f_x + f_x u`.
    pub fn new(u: &MeshFunction<T>, f: &[T], fx: &[T]) -> Result<Self> {
        let n = u.len();
        if f.len() != n || fx.len() != n {
            return Err(Error::MeshMismatch(format!(
                "background samples of length {} / {} for {} nodes",
                f.len(),
                fx.len(),
                n
            )));
        }
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for i in 0..n {
            let (ui, fi, fxi) = (u.values()[i], f[i], fx[i]);
            let s = ui + fi;
            a.push(s * s);
            b.push(fxi * (fi + fi + ui));
        }
        if let Some(i) = a.iter().chain(&b).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "operator coefficient".into(),
                index: i % n,
            });
        }
        Ok(Self { a, b })
    }

    /// Coefficients with `f`, `f_x` sampled from `bg` at time `t`.
    pub fn from_background(u: &MeshFunction<T>, bg: &Background<T>, t: T) -> Result<Self> {
        let mesh = *u.mesh();
        if bg.is_zero() {
            let z = vec![T::zero(); mesh.n_nodes()];
            return Self::new(u, &z, &z);
        }
        let f = bg.sample(mesh, t, 0)?;
        let fx = bg.sample(mesh, t, 1)?;
        Self::new(u, f.values(), fx.values())
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// `I + kQ_j` on the truncated grid.
#[derive(Clone, Debug)]
pub struct BandedOperator<T> {
    mesh: Mesh<T>,
    k: T,
    matrix: BandedMatrix<T>,
}

/// Assembles `I + kQ_j` from the current state and the background at `t_j`.
pub fn assemble<T: Real>(
    u_j: &MeshFunction<T>,
    bg: &Background<T>,
    t_j: T,
    k: T,
) -> Result<BandedOperator<T>> {
    u_j.check_finite()?;
    let co = OperatorCoefficients::from_background(u_j, bg, t_j)?;
    assemble_with(*u_j.mesh(), &co, k)
}

/// Assembles `I + kQ` from precomputed coefficients. Row `i` touches
/// columns `i−1..=i+2`; entries past the grid ends are dropped (zero extension).
pub fn assemble_with<T: Real>(mesh: Mesh<T>, co: &OperatorCoefficients<T>, k: T) -> Result<BandedOperator<T>> {
    let n = mesh.n_nodes();
    if co.len() != n {
        return Err(Error::MeshMismatch(format!("{} coefficients for {} nodes", co.len(), n)));
    }
    let h = mesh.h();
    let inv_h3 = (h * h * h).recip();
    let half_inv_h = T::lit(0.5) / h;
    let three = T::lit(3.0);
    let mut m = BandedMatrix::zeros(n, 1, 2);
    for i in 0..n {
        let a = co.a[i] * half_inv_h;
        if i > 0 {
            m.set(i, i - 1, k * (-a - inv_h3));
        }
        m.set(i, i, T::one() + k * (three * inv_h3 + co.b[i]));
        if i + 1 < n {
            m.set(i, i + 1, k * (a - three * inv_h3));
        }
        if i + 2 < n {
            m.set(i, i + 2, k * inv_h3);
        }
    }
    Ok(BandedOperator { mesh, k, matrix: m })
}

impl<T: Real> BandedOperator<T> {
    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn matrix(&self) -> &BandedMatrix<T> {
        &self.matrix
    }

    /// `ρ + kQρ`.
    pub fn apply(&self, rho: &MeshFunction<T>) -> Result<MeshFunction<T>> {
        if !rho.mesh().same_grid(&self.mesh) {
            return Err(Error::MeshMismatch("operand not on the operator grid".into()));
        }
        Ok(MeshFunction::from_values_unchecked(
            self.mesh,
            self.matrix.matvec(rho.values()),
        ))
    }
}

/// Relative residual accepted by [`solve_step`]: `1e−10` in `f64`, scaled up
/// with the machine epsilon for coarser types.
pub fn residual_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
}

/// Solves `op · x = rhs` and checks `‖op·x − rhs‖ ≤ tol·(1 + ‖rhs‖)`.
/// `t` only labels errors.
pub fn solve_step<T: Real>(op: &BandedOperator<T>, rhs: &MeshFunction<T>, t: T) -> Result<MeshFunction<T>> {
    let tf = t.to_f64_lossy();
    let lu = op.matrix.factor().map_err(|e| match e {
        Error::Singular { column, .. } => Error::Singular { column, t: tf },
        other => other,
    })?;
    let x = lu.solve(rhs.values());
    let sol = MeshFunction::from_values(op.mesh, x)?;
    let r = op.apply(&sol)?.sub(rhs)?.l2h_norm();
    let bound = residual_tolerance::<T>() * (T::one() + rhs.l2h_norm());
    if !(r <= bound) {
        return Err(Error::ResidualTooLarge {
            residual: r.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
            t: tf,
        });
    }
    Ok(sol)
}

/// Inner product used by the coercivity probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeNorm {
    Sh,
    L2h,
}

/// Gaussian wave packet `exp(−((x−c)/w)²) cos(ωx + φ)`, cut at `|x−c| > 6w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packet {
    pub center: usize,
    pub width: f64,
    pub omega: f64,
    pub phase: f64,
}

/// Nodes kept on each side of a packet's support when evaluating locally.
const PACKET_MARGIN: usize = 8;

impl Packet {
    fn reach<T: Real>(width: f64, mesh: &Mesh<T>) -> usize {
        (6.0 * width / mesh.h().to_f64_lossy()).ceil() as usize
    }

    fn span<T: Real>(&self, mesh: &Mesh<T>) -> (usize, usize) {
        let n = mesh.n_nodes();
        let r = Self::reach(self.width, mesh);
        (self.center.saturating_sub(r), (self.center + r).min(n - 1))
    }

    /// Writes `v(x_i)` for `i ∈ [s, e]` into `out`. Gaussian and phase are
    /// advanced by multiplicative recurrences outward from the center node.
    fn fill<T: Real>(&self, mesh: &Mesh<T>, s: usize, e: usize, out: &mut [T]) {
        let h = mesh.h().to_f64_lossy();
        let dz2 = (h / self.width).powi(2);
        let theta = self.omega * mesh.x(self.center).to_f64_lossy() + self.phase;
        let (c0, s0) = (theta.cos(), theta.sin());
        let (cr, sr) = ((self.omega * h).cos(), (self.omega * h).sin());
        let (mut g, mut ratio, q) = (1.0f64, (-dz2).exp(), (-2.0 * dz2).exp());
        let (mut cp, mut sp, mut cm, mut sm) = (c0, s0, c0, s0);
        let c = self.center;
        for m in 0..=(e - c).max(c - s) {
            if c + m <= e {
                out[c + m - s] = T::lit(g * cp);
            }
            if m > 0 && m <= c && c - m >= s {
                out[c - m - s] = T::lit(g * cm);
            }
            g *= ratio;
            ratio *= q;
            (cp, sp) = (cp * cr - sp * sr, sp * cr + cp * sr);
            (cm, sm) = (cm * cr + sm * sr, sm * cr - cm * sr);
        }
    }

    /// Whether the support stays `PACKET_MARGIN` nodes clear of both grid ends.
    /// Packets cut by the grid end would measure the truncation rather than
    /// the operator on the whole lattice.
    pub fn fits<T: Real>(&self, mesh: &Mesh<T>) -> bool {
        let r = Self::reach(self.width, mesh);
        self.center >= r + PACKET_MARGIN && self.center + r + PACKET_MARGIN < mesh.n_nodes()
    }

    /// The packet as a mesh function.
    pub fn sample<T: Real>(&self, mesh: Mesh<T>) -> MeshFunction<T> {
        let (s, e) = self.span(&mesh);
        let xc = mesh.x(self.center).to_f64_lossy();
        let mut v = vec![T::zero(); mesh.n_nodes()];
        for (i, vi) in v.iter_mut().enumerate().take(e + 1).skip(s) {
            let x = mesh.x(i).to_f64_lossy();
            let z = (x - xc) / self.width;
            *vi = T::lit((-z * z).exp() * (self.omega * x + self.phase).cos());
        }
        MeshFunction::from_values_unchecked(mesh, v)
    }
}

/// `(Qv, v) / ‖v‖²` for one packet, evaluated on a window around its support.
pub fn packet_quotient<T: Real>(
    mesh: &Mesh<T>,
    co: &OperatorCoefficients<T>,
    p: &Packet,
    norm: ProbeNorm,
) -> T {
    let n = mesh.n_nodes();
    let (s, e) = p.span(mesh);
    let lo = s.saturating_sub(PACKET_MARGIN);
    let hi = (e + PACKET_MARGIN).min(n - 1);
    let len = hi - lo + 1;
    let h = mesh.h();
    let inv_h = h.recip();
    let mut v = vec![T::zero(); len];
    p.fill(mesh, s, e, &mut v[s - lo..=e - lo]);
    // zero past the window agrees with the global zero extension: v vanishes
    // at least PACKET_MARGIN nodes before either window edge unless the
    // window is clamped at a grid end, where the grid itself ends.
    let mut d0 = vec![T::zero(); len];
    let mut d3 = vec![T::zero(); len];
    kernels::d_zero(&v, inv_h, &mut d0);
    kernels::d3(&v, inv_h, &mut d3);
    let q: Vec<T> = (0..len)
        .map(|i| co.a[lo + i] * d0[i] + d3[i] + co.b[lo + i] * v[i])
        .collect();
    match norm {
        ProbeNorm::L2h => kernels::dot(&q, &v) / kernels::dot(&v, &v),
        ProbeNorm::Sh => {
            // unscaled S_h products on the window; the factor h cancels
            let (v3, v5) = d_plus_chain(&v, inv_h);
            let (q3, q5) = d_plus_chain(&q, inv_h);
            let (mut num, mut den) = (T::zero(), T::zero());
            for i in 0..len {
                let x = mesh.x(lo + i);
                let w = x * x + T::one();
                num += w * (q[i] * v[i] + q3[i] * v3[i]) + q5[i] * v5[i];
                den += w * (v[i] * v[i] + v3[i] * v3[i]) + v5[i] * v5[i];
            }
            num / den
        }
    }
}

/// `(D₊³u, D₊⁵u)` on a window.
fn d_plus_chain<T: Real>(src: &[T], inv_h: T) -> (Vec<T>, Vec<T>) {
    let mut a = vec![T::zero(); src.len()];
    let mut b = vec![T::zero(); src.len()];
    kernels::d_plus(src, inv_h, &mut a);
    kernels::d_plus(&a, inv_h, &mut b);
    kernels::d_plus(&b, inv_h, &mut a);
    let d3 = a.clone();
    kernels::d_plus(&a, inv_h, &mut b);
    kernels::d_plus(&b, inv_h, &mut a);
    (d3, a)
}

/// Settings for [`coercivity_probe`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub samples: usize,
    pub seed: u64,
    /// Packets polished by a pattern search after the random draw.
    pub refine: usize,
    pub norm: ProbeNorm,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            seed: 0,
            refine: 4,
            norm: ProbeNorm::Sh,
        }
    }
}

/// Result of a probe: the ratio `1 + k·q_min` and the minimizing packet.
#[derive(Clone, Copy, Debug)]
pub struct ProbeResult<T> {
    pub ratio: T,
    pub quotient: T,
    pub packet: Packet,
}

/// Draws packet parameters. Centers favour nodes where the coefficients vary.
pub fn draw_packets<T: Real, R: Rng + ?Sized>(
    mesh: &Mesh<T>,
    co: &OperatorCoefficients<T>,
    count: usize,
    rng: &mut R,
) -> Vec<Packet> {
    let n = mesh.n_nodes();
    let h = mesh.h().to_f64_lossy();
    let mut d0a = vec![T::zero(); n];
    kernels::d_zero(&co.a, mesh.h().recip(), &mut d0a);
    let act: Vec<f64> = (0..n)
        .map(|i| (d0a[i].abs() + co.b[i].abs()).to_f64_lossy())
        .map(|v| if v.is_finite() { v } else { 0.0 })
        .collect();
    let mean = act.iter().sum::<f64>() / n as f64;
    let weights: Vec<f64> = act.iter().map(|v| v + mean + 1e-12).collect();
    let centers = WeightedIndex::new(&weights).expect("positive weights");
    let w_lo = 2.0 * h;
    let w_hi = (4.0f64).min(mesh.radius().to_f64_lossy() / 4.0).max(w_lo * 1.5);
    let nyquist = std::f64::consts::PI / h;
    (0..count)
        .map(|_| {
            let mut width = w_lo * (w_hi / w_lo).powf(rng.gen::<f64>());
            // largest width that fits the grid
            let room = (n - 1) / 2;
            while Packet::reach(width, mesh) + PACKET_MARGIN > room && width > h {
                width *= 0.5;
            }
            let r = Packet::reach(width, mesh) + PACKET_MARGIN;
            let center = centers.sample(rng).clamp(r, n - 1 - r);
            let omega = if rng.gen_bool(0.5) {
                rng.gen_range(0.0..2.0)
            } else {
                rng.gen_range(0.0..nyquist)
            };
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            Packet {
                center,
                width,
                omega,
                phase,
            }
        })
        .collect()
}

/// Pattern search on the packet parameters, minimizing the quotient.
fn polish<T: Real>(mesh: &Mesh<T>, co: &OperatorCoefficients<T>, start: Packet, norm: ProbeNorm) -> (T, Packet) {
    let n = mesh.n_nodes();
    let h = mesh.h().to_f64_lossy();
    let mut best = start;
    let mut val = packet_quotient(mesh, co, &best, norm);
    let mut steps = [
        (start.width / h / 4.0).max(1.0),
        0.2,
        0.25,
        std::f64::consts::FRAC_PI_4,
    ];
    for _ in 0..12 {
        let mut improved = false;
        for dim in 0..4 {
            for dir in [-1.0, 1.0] {
                let mut c = best;
                let d = dir * steps[dim];
                match dim {
                    0 => {
                        let ci = c.center as f64 + d.round();
                        if ci < 0.0 || ci >= n as f64 {
                            continue;
                        }
                        c.center = ci as usize;
                    }
                    1 => c.width = (c.width * d.exp()).clamp(2.0 * h, mesh.radius().to_f64_lossy() / 4.0),
                    2 => c.omega = (c.omega + d).clamp(0.0, std::f64::consts::PI / h),
                    _ => c.phase += d,
                }
                if !c.fits(mesh) {
                    continue;
                }
                let q = packet_quotient(mesh, co, &c, norm);
                if q < val {
                    val = q;
                    best = c;
                    improved = true;
                }
            }
        }
        if !improved {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
            steps[0] = steps[0].max(1.0);
        }
    }
    (val, best)
}

/// Estimates `min_v (v + kQv, v)/‖v‖²` over random packets; deterministic for
/// a given configuration.
pub fn probe_with_coefficients<T: Real>(
    mesh: &Mesh<T>,
    co: &OperatorCoefficients<T>,
    k: T,
    cfg: &ProbeConfig,
) -> ProbeResult<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let packets = draw_packets(mesh, co, cfg.samples.max(1), &mut rng);
    let mut scored: Vec<(T, Packet)> = packets
        .par_iter()
        .map(|p| (packet_quotient(mesh, co, p, cfg.norm), *p))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let polished: Vec<(T, Packet)> = scored
        .par_iter()
        .take(cfg.refine)
        .map(|&(_, p)| polish(mesh, co, p, cfg.norm))
        .collect();
    let (quotient, packet) = scored
        .iter()
        .chain(&polished)
        .copied()
        .fold(scored[0], |m, c| if c.0 < m.0 { c } else { m });
    ProbeResult {
        ratio: T::one() + k * quotient,
        quotient,
        packet,
    }
}

/// Coercivity probe for the step leaving `t_j`.
pub fn coercivity_probe<T: Real>(
    u_j: &MeshFunction<T>,
    bg: &Background<T>,
    t_j: T,
    k: T,
    cfg: &ProbeConfig,
) -> Result<ProbeResult<T>> {
    let co = OperatorCoefficients::from_background(u_j, bg, t_j)?;
    Ok(probe_with_coefficients(u_j.mesh(), &co, k, cfg))
}

/// Run settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig<T> {
    pub t_end: T,
    /// `(N, n)` pairs for `‖⟨x⟩ᴺ D₊ⁿ u_j‖`.
    pub watch: Vec<(usize, usize)>,
    /// Any watched seminorm above this stops the run.
    pub blowup_threshold: T,
    pub probe: ProbeConfig,
    pub probe_threshold: T,
    /// Probe every this many steps (0 disables all but the start check).
    pub probe_every: usize,
    /// Keep every `u_j` (needed for time extension and smoothing).
    pub keep_history: bool,
}

impl<T: Real> RunConfig<T> {
    pub fn new(t_end: T) -> Self {
        Self {
            t_end,
            watch: (0..=3).flat_map(|a| (0..=3).map(move |b| (a, b))).collect(),
            blowup_threshold: T::lit(1e12),
            probe: ProbeConfig::default(),
            probe_threshold: T::lit(0.5),
            probe_every: 1,
            keep_history: false,
        }
    }
}

/// Norms recorded after each accepted level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord<T> {
    pub t: T,
    pub l2h: T,
    pub sh_norm: T,
    pub watched: Vec<T>,
    /// Probe ratio certified before leaving this level.
    pub probe: Option<T>,
}

/// State of a run after `j` steps.
#[derive(Clone, Debug)]
pub struct RunState<T> {
    mesh: Mesh<T>,
    j: usize,
    steps: usize,
    u: MeshFunction<T>,
    config: RunConfig<T>,
    history: Vec<StepRecord<T>>,
    states: Vec<MeshFunction<T>>,
    warnings: Vec<String>,
}

fn edge_max<T: Real>(v: &[T]) -> T {
    let n = v.len();
    let m = BOUNDARY_NODES.min(n);
    v[..m]
        .iter()
        .chain(&v[n - m..])
        .fold(T::zero(), |a, x| a.max(x.abs()))
}

impl<T: Real> RunState<T> {
    /// Validates the data and the truncation radius and certifies the first step.
    pub fn start(u0: MeshFunction<T>, bg: &Background<T>, config: RunConfig<T>) -> Result<Self> {
        u0.check_finite()?;
        let mesh = *u0.mesh();
        if !(config.t_end > T::zero()) || config.t_end > bg.t_end() * (T::one() + T::lit(1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "T = {} must be positive and within the background window {}",
                config.t_end,
                bg.t_end()
            )));
        }
        let tol = T::lit(1e-12);
        let e = edge_max(u0.values());
        if e >= tol {
            return Err(Error::BoundaryContaminated(format!(
                "|u0| = {e:e} within {BOUNDARY_NODES} nodes of the edge; enlarge R"
            )));
        }
        if !bg.is_zero() {
            let g = bg.sample_g(mesh, T::zero())?;
            let e = edge_max(g.values());
            if e >= tol {
                return Err(Error::BoundaryContaminated(format!(
                    "|g(., 0)| = {e:e} within {BOUNDARY_NODES} nodes of the edge; enlarge R"
                )));
            }
        }
        let steps = (config.t_end / mesh.k()).round().to_usize().unwrap_or(0).max(1);
        let mut st = Self {
            mesh,
            j: 0,
            steps,
            u: u0.clone(),
            history: Vec::with_capacity(steps + 1),
            states: Vec::new(),
            warnings: Vec::new(),
            config,
        };
        if st.config.keep_history {
            st.states.push(u0);
        }
        let probe = st.certify(bg)?;
        let rec = st.record(T::zero(), probe)?;
        st.history.push(rec);
        Ok(st)
    }

    fn certify(&self, bg: &Background<T>) -> Result<Option<T>> {
        let due = self.j == 0 || (self.config.probe_every > 0 && self.j % self.config.probe_every == 0);
        if !due {
            return Ok(None);
        }
        let t = self.t();
        let mut cfg = self.config.probe;
        cfg.seed = cfg.seed.wrapping_add(self.j as u64);
        let r = coercivity_probe(&self.u, bg, t, self.mesh.k(), &cfg)?;
        if !(r.ratio >= self.config.probe_threshold) {
            return Err(Error::CoercivityViolated {
                probe: r.ratio.to_f64_lossy(),
                threshold: self.config.probe_threshold.to_f64_lossy(),
                t: t.to_f64_lossy(),
            });
        }
        Ok(Some(r.ratio))
    }

    fn record(&self, t: T, probe: Option<T>) -> Result<StepRecord<T>> {
        let watched = self
            .config
            .watch
            .iter()
            .map(|&(a, b)| self.u.weighted_seminorm(a, b))
            .collect::<Result<Vec<T>>>()?;
        Ok(StepRecord {
            t,
            l2h: self.u.l2h_norm(),
            sh_norm: self.u.sh_norm(),
            watched,
            probe,
        })
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn step_index(&self) -> usize {
        self.j
    }

    pub fn total_steps(&self) -> usize {
        self.steps
    }

    pub fn t(&self) -> T {
        T::from_usize_lossy(self.j) * self.mesh.k()
    }

    pub fn is_done(&self) -> bool {
        self.j >= self.steps
    }

    pub fn u(&self) -> &MeshFunction<T> {
        &self.u
    }

    pub fn config(&self) -> &RunConfig<T> {
        &self.config
    }

    pub fn history(&self) -> &[StepRecord<T>] {
        &self.history
    }

    /// Every `u_j`, when `keep_history` is set.
    pub fn states(&self) -> &[MeshFunction<T>] {
        &self.states
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// One step `u_j → u_{j+1}`.
    pub fn advance(&mut self, bg: &Background<T>) -> Result<()> {
        if self.is_done() {
            return Err(Error::InvalidArgument(format!(
                "run already reached T = {}",
                self.config.t_end
            )));
        }
        let t = self.t();
        let k = self.mesh.k();
        if self.j > 0 {
            let p = self.certify(bg)?;
            if let Some(last) = self.history.last_mut() {
                last.probe = p;
            }
        }
        let co = OperatorCoefficients::from_background(&self.u, bg, t)?;
        let op = assemble_with(self.mesh, &co, k)?;
        let rhs = if bg.is_zero() {
            self.u.clone()
        } else {
            let g = bg.sample_g(self.mesh, t)?;
            self.u.sub(&g.scale(k))?
        };
        let next = solve_step(&op, &rhs, t)?;
        self.j += 1;
        self.u = next;
        let t_new = self.t();
        let e = edge_max(self.u.values());
        if e > T::lit(1e-8) {
            self.warnings.push(format!(
                "t = {t_new}: |u| = {e:e} near the edge; the zero extension is no longer accurate"
            ));
        }
        let rec = self.record(t_new, None)?;
        for (&(a, b), &v) in self.config.watch.iter().zip(&rec.watched) {
            if !(v <= self.config.blowup_threshold) {
                return Err(Error::SeminormBlowUp {
                    n_weight: a,
                    n_diff: b,
                    value: v.to_f64_lossy(),
                    threshold: self.config.blowup_threshold.to_f64_lossy(),
                    t: t_new.to_f64_lossy(),
                });
            }
        }
        self.history.push(rec);
        if self.config.keep_history {
            self.states.push(self.u.clone());
        }
        Ok(())
    }

    /// Advances to `T`.
    pub fn run(&mut self, bg: &Background<T>) -> Result<()> {
        while !self.is_done() {
            self.advance(bg)?;
        }
        Ok(())
    }

    /// Largest `value / initial value` of each watched seminorm.
    pub fn watch_growth(&self) -> Vec<T> {
        (0..self.config.watch.len())
            .map(|w| {
                let v0 = self.history[0].watched[w];
                let m = self.history.iter().fold(T::zero(), |m, r| m.max(r.watched[w]));
                if v0 > T::zero() {
                    m / v0
                } else if m.is_zero() {
                    T::one()
                } else {
                    T::infinity()
                }
            })
            .collect()
    }

    /// Smallest recorded probe ratio.
    pub fn min_probe(&self) -> Option<T> {
        self.history
            .iter()
            .filter_map(|r| r.probe)
            .fold(None, |m, p| Some(m.map_or(p, |m: T| m.min(p))))
    }

    /// CSV with columns `t, l2h, sh_norm, probe, w_N_n...`.
    pub fn write_norms_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["t".to_string(), "l2h".into(), "sh_norm".into(), "probe".into()];
        head.extend(self.config.watch.iter().map(|(a, b)| format!("w_{a}_{b}")));
        wr.write_record(&head)?;
        for r in &self.history {
            let mut rec = vec![
                format!("{:e}", r.t),
                format!("{:e}", r.l2h),
                format!("{:e}", r.sh_norm),
                r.probe.map(|p| format!("{p:e}")).unwrap_or_default(),
            ];
            rec.extend(r.watched.iter().map(|v| format!("{v:e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// CSV with columns `x, u`.
    pub fn write_final_csv<W: Write>(&self, w: W) -> Result<()> {
        write_profile_csv(w, &self.u, "u")
    }
}

/// Two-column CSV `x, <name>`.
pub fn write_profile_csv<T: Real, W: Write>(w: W, u: &MeshFunction<T>, name: &str) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x", name])?;
    for (i, v) in u.values().iter().enumerate() {
        wr.write_record([format!("{:e}", u.mesh().x(i)), format!("{v:e}")])?;
    }
    wr.flush()?;
    Ok(())
}

/// Bound sequence `η_{j+1} = (η_j + dt·Q(η_j)) / (1 − dt·P(η_j))`, the
/// equality case of `(η_{j+1} − η_j)/dt ≤ P(η_j)η_{j+1} + Q(η_j)`.
pub fn gronwall_envelope<T: Real>(
    eta0: T,
    p: impl Fn(T) -> T,
    q: impl Fn(T) -> T,
    dt: T,
    t_end: T,
) -> Result<Vec<T>> {
    let steps = (t_end / dt).round().to_usize().unwrap_or(0);
    let mut out = Vec::with_capacity(steps + 1);
    let mut eta = eta0;
    out.push(eta);
    for j in 0..steps {
        let den = T::one() - dt * p(eta);
        if !(den > T::zero()) {
            return Err(Error::EnvelopeBlowUp {
                t: (T::from_usize_lossy(j) * dt).to_f64_lossy(),
            });
        }
        eta = (eta + dt * q(eta)) / den;
        out.push(eta);
    }
    Ok(out)
}

/// Smallest constant `C ≥ 0` with `η_{j+1} − η_j ≤ dt·C·(η_{j+1} + 1)` along a record.
pub fn measured_growth_constant<T: Real>(eta: &[T], dt: T) -> T {
    eta.windows(2)
        .map(|w| (w[1] - w[0]) / (dt * (w[1] + T::one())))
        .fold(T::zero(), T::max)
}

/// Envelope with `P = Q = C` measured from `η_j = ‖u_j‖²_{S_h}`, and whether
/// the record stays below it.
pub fn envelope_check<T: Real>(history: &[StepRecord<T>], dt: T) -> Result<(T, Vec<T>, bool)> {
    let eta: Vec<T> = history.iter().map(|r| r.sh_norm * r.sh_norm).collect();
    let c = measured_growth_constant(&eta, dt);
    let t_end = T::from_usize_lossy(eta.len().saturating_sub(1)) * dt;
    let env = gronwall_envelope(eta[0], |_| c, |_| c, dt, t_end)?;
    let slack = T::one() + T::lit(1e-12);
    let ok = eta.iter().zip(&env).all(|(&e, &b)| e <= b * slack + T::lit(1e-300));
    Ok((c, env, ok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_compact, CompactSpec};

    fn soliton(mesh: Mesh<f64>) -> MeshFunction<f64> {
        MeshFunction::from_fn(mesh, |x| 6f64.sqrt() / x.cosh())
    }

    fn stencil_oracle(u: &MeshFunction<f64>, f: &[f64], fx: &[f64], k: f64, rho: &MeshFunction<f64>) -> Vec<f64> {
        let mesh = *u.mesh();
        let fm = MeshFunction::from_values(mesh, f.to_vec()).unwrap();
        let fxm = MeshFunction::from_values(mesh, fx.to_vec()).unwrap();
        let d0 = rho.d_zero();
        let d3 = rho.d3();
        (0..u.len())
            .map(|i| {
                let (uu, ff, fxx) = (u.values()[i], fm.values()[i], fxm.values()[i]);
                let q = uu * uu * d0.values()[i]
                    + d3.values()[i]
                    + 2.0 * ff * uu * d0.values()[i]
                    + 2.0 * ff * fxx * rho.values()[i]
                    + fxx * uu * rho.values()[i]
                    + ff * ff * d0.values()[i];
                rho.values()[i] + k * q
            })
            .collect()
    }

    #[test]
    fn assembly_matches_stencil() {
        use rand::SeedableRng;
        let mesh = Mesh::new(0.1, 0.01, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_compact::<f64, _>(mesh, CompactSpec::signed(60), &mut rng);
        let f: Vec<f64> = mesh.nodes().iter().map(|x| (0.3 * x).sin()).collect();
        let fx: Vec<f64> = mesh.nodes().iter().map(|x| 0.3 * (0.3 * x).cos()).collect();
        let co = OperatorCoefficients::new(&u, &f, &fx).unwrap();
        let op = assemble_with(mesh, &co, 0.01).unwrap();
        for _ in 0..5 {
            let rho = MeshFunction::from_values(mesh, (0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let a = op.apply(&rho).unwrap();
            let b = stencil_oracle(&u, &f, &fx, 0.01, &rho);
            for (x, y) in a.values().iter().zip(&b) {
                assert!((x - y).abs() < 1e-13 * (1.0 + y.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn zero_k_is_identity() {
        let mesh = Mesh::new(0.1, 0.01, 2.0).unwrap();
        let u = soliton(mesh);
        let op = assemble(&u, &Background::zero(1.0), 0.0, 0.0).unwrap();
        let x = solve_step(&op, &u, 0.0).unwrap();
        assert_eq!(x, u);
    }

    #[test]
    fn zero_fixed_point() {
        let mesh = Mesh::new(0.1, 0.01, 5.0).unwrap();
        let bg = Background::zero(1.0);
        let mut cfg = RunConfig::new(0.1);
        cfg.probe.samples = 8;
        cfg.probe.norm = ProbeNorm::L2h;
        let mut st = RunState::start(MeshFunction::zeros(mesh), &bg, cfg).unwrap();
        st.run(&bg).unwrap();
        assert_eq!(st.total_steps(), 10);
        assert!(st.u().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn local_quotient_matches_global() {
        let mesh = Mesh::new(0.05, 1e-3, 10.0).unwrap();
        let u = soliton(mesh);
        let z = vec![0.0; mesh.n_nodes()];
        let co = OperatorCoefficients::new(&u, &z, &z).unwrap();
        let k = 1e-3;
        let op = assemble_with(mesh, &co, k).unwrap();
        let p = Packet {
            center: mesh.nearest_index(0.7).unwrap(),
            width: 1.1,
            omega: 0.4,
            phase: 0.3,
        };
        let v = p.sample(mesh);
        let av = op.apply(&v).unwrap();
        let global = av.sh_inner(&v).unwrap() / v.sh_inner(&v).unwrap();
        let local = 1.0 + k * packet_quotient(&mesh, &co, &p, ProbeNorm::Sh);
        assert!((global - local).abs() < 1e-12, "{global} vs {local}");
    }

    #[test]
    fn probe_monotone_in_k_and_l2_lower_bound() {
        let mesh = Mesh::new(0.05, 1e-3, 10.0).unwrap();
        let bg = Background::zero(1.0);
        let u = MeshFunction::zeros(mesh);
        let cfg = ProbeConfig {
            norm: ProbeNorm::L2h,
            ..ProbeConfig::default()
        };
        // (D₊²D₋v, v) ≥ 0 makes the L²_h quotient nonnegative
        assert!(coercivity_probe(&u, &bg, 0.0, 1e-3, &cfg).unwrap().ratio >= 1.0);
        let u = soliton(mesh);
        let cfg = ProbeConfig::default();
        let ks = [1e-4, 1e-3, 1e-2, 1e-1];
        let r: Vec<f64> = ks
            .iter()
            .map(|&k| coercivity_probe(&u, &bg, 0.0, k, &cfg).unwrap().ratio)
            .collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    }

    #[test]
    fn huge_step_refuses_to_start() {
        let mesh = Mesh::new(0.08, 0.5, 30.0).unwrap();
        let bg = Background::zero(1.0);
        match RunState::start(soliton(mesh), &bg, RunConfig::new(0.5)) {
            Err(Error::CoercivityViolated { probe, .. }) => assert!(probe < 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boundary_validation() {
        let mesh = Mesh::new(0.1, 0.01, 3.0).unwrap();
        let bg = Background::zero(1.0);
        let u = MeshFunction::from_fn(mesh, |x: f64| (-x * x / 4.0).exp());
        assert!(matches!(
            RunState::start(u, &bg, RunConfig::new(0.1)),
            Err(Error::BoundaryContaminated(_))
        ));
    }

    #[test]
    fn gronwall_constant_growth() {
        let env = gronwall_envelope(1.0, |_| 0.0, |_| 0.0, 0.01, 1.0).unwrap();
        assert!(env.iter().all(|&e| e == 1.0));
        for dt in [1e-2, 1e-3] {
            let env = gronwall_envelope(2.0, |_| 1.5, |_| 0.0, dt, 1.0).unwrap();
            let steps = env.len() - 1;
            let exact = 2.0 * (1.0f64 - 1.5 * dt).powi(-(steps as i32));
            assert!((env[steps] - exact).abs() < 1e-12 * exact);
            assert!((env[steps] / (2.0 * 1.5f64.exp()) - 1.0).abs() < 2.0 * dt);
        }
        assert!(matches!(
            gronwall_envelope(1.0, |_| 200.0, |_| 0.0, 0.01, 1.0),
            Err(Error::EnvelopeBlowUp { .. })
        ));
    }

    #[test]
    fn measured_constant_bounds_record() {
        let eta = [1.0, 1.2, 1.1, 1.5, 1.6];
        let c = measured_growth_constant(&eta, 0.1);
        let env = gronwall_envelope(1.0, |_| c, |_| c, 0.1, 0.4).unwrap();
        assert!(eta.iter().zip(&env).all(|(e, b)| *e <= b * (1.0 + 1e-12)));
    }
}
