//! Numerical core for the focusing mKdV equation `w_t + w² w_x + w_xxx = 0`
//! with initial data that grows like a fractional power of `|x|`.
//!
//! The solution is split as `w = f + u`: `f` is an explicit background built
//! from a truncated asymptotic series ([`background`]), and the decaying
//! correction `u` is advanced by an implicit difference scheme on a uniform
//! grid ([`scheme`]). The remaining modules supply the discrete calculus the
//! scheme relies on ([`mesh`], [`identities`]), the exact exponent bookkeeping
//! of the series ([`lattice`], [`series`]) and the cardinal-series smoothing of
//! grid data ([`sinc`]).
//!
//! Numerical types are generic over [`Real`] (`f32` or `f64`); exponents are
//! exact rationals. The `*F64` aliases below fix the scalar to `f64`.

pub mod background;
pub mod banded;
pub mod error;
pub mod extension;
pub mod identities;
pub mod lattice;
pub mod mesh;
pub mod rational;
pub mod sampling;
pub mod scheme;
pub mod series;
pub mod sinc;
pub mod smoothstep;

mod real;

pub use error::{Error, Result};
pub use real::Real;

pub use background::Background;
pub use banded::BandedMatrix;
pub use lattice::ExponentLattice;
pub use mesh::{Mesh, MeshFunction};
pub use rational::Rational;
pub use scheme::{RunConfig, RunState};
pub use series::{CoefficientTrajectories, Side};

pub type MeshF64 = Mesh<f64>;
pub type MeshFunctionF64 = MeshFunction<f64>;
pub type BackgroundF64 = Background<f64>;
pub type TrajectoriesF64 = CoefficientTrajectories<f64>;
pub type RunStateF64 = RunState<f64>;

pub type MeshF32 = Mesh<f32>;
pub type MeshFunctionF32 = MeshFunction<f32>;
