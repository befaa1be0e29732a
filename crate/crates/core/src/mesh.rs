//! Uniform grids, difference and shift operators, and the discrete inner
//! products and weighted seminorms used throughout the solver.
//!
//! A [`MeshFunction`] stores values at the nodes `x_n = n·h`, `|n| ≤ floor(R/h)`.
//! Every operator treats values past either end as zero, so difference
//! operators act on the zero extension of the stored data.

use crate::error::{Error, Result};
use crate::Real;

/// Largest weight power and difference order accepted by the seminorms.
pub const MAX_SEMINORM_ORDER: usize = 6;

/// `⟨x⟩ = √(x² + 1)`.
#[inline]
pub fn bracket<T: Real>(x: T) -> T {
    (x * x + T::one()).sqrt()
}

/// Spatial/temporal grid descriptor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mesh<T> {
    h: T,
    k: T,
    radius: T,
    half: usize,
}

impl<T: Real> Mesh<T> {
    /// Grid with step `h`, time step `k` and nodes covering `[-radius, radius]`.
    pub fn new(h: T, k: T, radius: T) -> Result<Self> {
        let ok = |v: T| v.is_finite() && v > T::zero() && v < T::one();
        if !ok(h) {
            return Err(Error::InvalidMesh(format!("h = {h} must lie in (0, 1)")));
        }
        if !ok(k) {
            return Err(Error::InvalidMesh(format!("k = {k} must lie in (0, 1)")));
        }
        if !(radius.is_finite() && radius > T::zero()) {
            return Err(Error::InvalidMesh(format!("radius = {radius} must be positive")));
        }
        // R/h is often an integer up to rounding (40/0.02); snap before flooring.
        let q = radius / h;
        let snapped = if (q - q.round()).abs() <= T::lit(1e-9) * q.max(T::one()) {
            q.round()
        } else {
            q.floor()
        };
        let half = snapped
            .to_usize()
            .ok_or_else(|| Error::InvalidMesh(format!("radius/h = {q} not representable")))?;
        if half == 0 {
            return Err(Error::InvalidMesh("radius smaller than one step".into()));
        }
        Ok(Self { h, k, radius, half })
    }

    /// Grid for purely spatial work; the time step is set to `h` and unused.
    pub fn spatial(h: T, radius: T) -> Result<Self> {
        Self::new(h, h, radius)
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    /// Number of nodes on each side of `x_0 = 0`.
    pub fn half(&self) -> usize {
        self.half
    }

    pub fn n_nodes(&self) -> usize {
        2 * self.half + 1
    }

    /// Coordinate of storage index `i` (index `half` is `x = 0`).
    #[inline]
    pub fn x(&self, i: usize) -> T {
        T::from_isize(i as isize - self.half as isize).unwrap() * self.h
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n_nodes()).map(|i| self.x(i)).collect()
    }

    /// Storage index of the node nearest to `x`, if it lies on the grid.
    pub fn nearest_index(&self, x: T) -> Option<usize> {
        let n = (x / self.h).round().to_isize()? + self.half as isize;
        (n >= 0 && (n as usize) < self.n_nodes()).then_some(n as usize)
    }

    /// Same spatial grid (time step ignored).
    pub fn same_grid(&self, other: &Self) -> bool {
        self.h == other.h && self.half == other.half
    }

    pub fn with_k(&self, k: T) -> Result<Self> {
        Self::new(self.h, k, self.radius)
    }
}

/// Real values on the nodes of a [`Mesh`].
#[derive(Clone, Debug, PartialEq)]
pub struct MeshFunction<T> {
    mesh: Mesh<T>,
    values: Vec<T>,
}

impl<T: Real> MeshFunction<T> {
    pub fn zeros(mesh: Mesh<T>) -> Self {
        Self {
            mesh,
            values: vec![T::zero(); mesh.n_nodes()],
        }
    }

    pub fn from_fn(mesh: Mesh<T>, f: impl Fn(T) -> T) -> Self {
        let values = (0..mesh.n_nodes()).map(|i| f(mesh.x(i))).collect();
        Self { mesh, values }
    }

    /// Wraps `values`; rejects a wrong length or non-finite entries.
    pub fn from_values(mesh: Mesh<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::MeshMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        let f = Self { mesh, values };
        f.check_finite()?;
        Ok(f)
    }

    pub(crate) fn from_values_unchecked(mesh: Mesh<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), mesh.n_nodes());
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at signed storage index `i`, zero outside the grid.
    #[inline]
    pub fn ghost(&self, i: isize) -> T {
        if i < 0 || i as usize >= self.values.len() {
            T::zero()
        } else {
            self.values[i as usize]
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite {
                what: "mesh function value".into(),
                index,
            }),
            None => Ok(()),
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.mesh.same_grid(&other.mesh) {
            Ok(())
        } else {
            Err(Error::MeshMismatch(format!(
                "h = {} / {}, nodes = {} / {}",
                self.mesh.h,
                other.mesh.h,
                self.len(),
                other.len()
            )))
        }
    }

    fn with_values(&self, values: Vec<T>) -> Self {
        Self {
            mesh: self.mesh,
            values,
        }
    }

    /// `D₊ρ(x) = (ρ(x+h) − ρ(x))/h`.
    pub fn d_plus(&self) -> Self {
        let mut out = vec![T::zero(); self.len()];
        kernels::d_plus(&self.values, self.mesh.h.recip(), &mut out);
        self.with_values(out)
    }

    /// `D₋ρ(x) = (ρ(x) − ρ(x−h))/h`.
    pub fn d_minus(&self) -> Self {
        let mut out = vec![T::zero(); self.len()];
        kernels::d_minus(&self.values, self.mesh.h.recip(), &mut out);
        self.with_values(out)
    }

    /// `D₀ρ(x) = (ρ(x+h) − ρ(x−h))/(2h)`.
    pub fn d_zero(&self) -> Self {
        let mut out = vec![T::zero(); self.len()];
        kernels::d_zero(&self.values, self.mesh.h.recip(), &mut out);
        self.with_values(out)
    }

    /// `D₊ⁿ`.
    pub fn d_plus_pow(&self, n: usize) -> Self {
        let mut cur = self.values.clone();
        let mut tmp = vec![T::zero(); self.len()];
        let inv_h = self.mesh.h.recip();
        for _ in 0..n {
            kernels::d_plus(&cur, inv_h, &mut tmp);
            std::mem::swap(&mut cur, &mut tmp);
        }
        self.with_values(cur)
    }

    /// `D₊²D₋`, the dispersive stencil `(ρ_{n+2} − 3ρ_{n+1} + 3ρ_n − ρ_{n−1})/h³`.
    pub fn d3(&self) -> Self {
        let mut out = vec![T::zero(); self.len()];
        kernels::d3(&self.values, self.mesh.h.recip(), &mut out);
        self.with_values(out)
    }

    /// `(Eˢρ)(x) = ρ(x + s·h)`, zero filled.
    pub fn shift(&self, offset: isize) -> Self {
        let values = (0..self.len())
            .map(|i| self.ghost(i as isize + offset))
            .collect();
        self.with_values(values)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise `f(x_n, ρ(x_n))`.
    pub fn map_with_x(&self, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..self.len())
            .map(|i| f(self.mesh.x(i), self.values[i]))
            .collect();
        self.with_values(values)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| c * v)
    }

    /// `⟨x⟩ᴺρ`.
    pub fn bracket_weighted(&self, n_weight: usize) -> Self {
        self.map_with_x(|x, v| bracket(x).powi(n_weight as i32) * v)
    }

    /// `xᴺρ`.
    pub fn poly_weighted(&self, n_weight: usize) -> Self {
        self.map_with_x(|x, v| x.powi(n_weight as i32) * v)
    }

    /// `(u, v)_{L²_h} = Σ u v h`.
    pub fn l2h_inner(&self, other: &Self) -> Result<T> {
        self.check_same(other)?;
        Ok(kernels::dot(&self.values, &other.values) * self.mesh.h)
    }

    pub fn l2h_norm(&self) -> T {
        (kernels::dot(&self.values, &self.values) * self.mesh.h).sqrt()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `(u,v)_{S_h} = (⟨x⟩u,⟨x⟩v) + (⟨x⟩D₊³u,⟨x⟩D₊³v) + (D₊⁵u,D₊⁵v)`.
    pub fn sh_inner(&self, other: &Self) -> Result<T> {
        self.check_same(other)?;
        let h = self.mesh.h;
        let w: Vec<T> = (0..self.len())
            .map(|i| {
                let x = self.mesh.x(i);
                x * x + T::one()
            })
            .collect();
        let a3 = self.d_plus_pow(3);
        let b3 = other.d_plus_pow(3);
        let a5 = a3.d_plus_pow(2);
        let b5 = b3.d_plus_pow(2);
        let mut s = T::zero();
        for i in 0..self.len() {
            s += w[i] * (self.values[i] * other.values[i] + a3.values[i] * b3.values[i])
                + a5.values[i] * b5.values[i];
        }
        Ok(s * h)
    }

    pub fn sh_norm(&self) -> T {
        self.sh_inner(self).expect("same mesh").max(T::zero()).sqrt()
    }

    /// `‖⟨x⟩ᴺ D₊ⁿ u‖_{L²_h}`.
    pub fn weighted_seminorm(&self, n_weight: usize, n_diff: usize) -> Result<T> {
        check_order(n_weight)?;
        check_order(n_diff)?;
        Ok(self
            .d_plus_pow(n_diff)
            .bracket_weighted(n_weight)
            .l2h_norm())
    }

    /// `‖D₊ⁿ (xᴺ u)‖_{L²_h}`.
    pub fn poly_weighted_seminorm(&self, n_weight: usize, n_diff: usize) -> Result<T> {
        check_order(n_weight)?;
        check_order(n_diff)?;
        Ok(self.poly_weighted(n_weight).d_plus_pow(n_diff).l2h_norm())
    }

    /// First and last storage index with a nonzero value.
    pub fn support(&self) -> Option<(usize, usize)> {
        let first = self.values.iter().position(|v| !v.is_zero())?;
        let last = self.values.iter().rposition(|v| !v.is_zero())?;
        Some((first, last))
    }

    /// Number of zero nodes between the support and the nearer grid edge.
    pub fn boundary_margin(&self) -> usize {
        match self.support() {
            Some((a, b)) => a.min(self.len() - 1 - b),
            None => self.len(),
        }
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_SEMINORM_ORDER {
        Err(Error::OrderTooLarge {
            order,
            max: MAX_SEMINORM_ORDER,
        })
    } else {
        Ok(())
    }
}

/// Slice-level stencils shared by [`MeshFunction`] and the solver hot loops.
/// All of them read zero past either end of `src`.
pub(crate) mod kernels {
    use crate::Real;

    pub fn d_plus<T: Real>(src: &[T], inv_h: T, dst: &mut [T]) {
        let n = src.len();
        for i in 0..n.saturating_sub(1) {
            dst[i] = (src[i + 1] - src[i]) * inv_h;
        }
        if n > 0 {
            dst[n - 1] = -src[n - 1] * inv_h;
        }
    }

    pub fn d_minus<T: Real>(src: &[T], inv_h: T, dst: &mut [T]) {
        let n = src.len();
        if n > 0 {
            dst[0] = src[0] * inv_h;
        }
        for i in 1..n {
            dst[i] = (src[i] - src[i - 1]) * inv_h;
        }
    }

    pub fn d_zero<T: Real>(src: &[T], inv_h: T, dst: &mut [T]) {
        let n = src.len();
        let half = T::lit(0.5) * inv_h;
        let g = |i: isize| -> T {
            if i < 0 || i as usize >= n {
                T::zero()
            } else {
                src[i as usize]
            }
        };
        for i in 0..n {
            let ii = i as isize;
            dst[i] = (g(ii + 1) - g(ii - 1)) * half;
        }
    }

    pub fn d3<T: Real>(src: &[T], inv_h: T, dst: &mut [T]) {
        let n = src.len();
        let c = inv_h * inv_h * inv_h;
        let three = T::lit(3.0);
        let g = |i: isize| -> T {
            if i < 0 || i as usize >= n {
                T::zero()
            } else {
                src[i as usize]
            }
        };
        for i in 0..n {
            let ii = i as isize;
            dst[i] = (g(ii + 2) - three * g(ii + 1) + three * g(ii) - g(ii - 1)) * c;
        }
    }

    pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
        a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
    }
}
