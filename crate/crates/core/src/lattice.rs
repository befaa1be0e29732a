//! The exponent set Γ generated by an initial exponent list `A₀` and the
//! exact resonance tables that drive the coefficient equations.
//!
//! Γ consists of the values `β_{i_1} + … + β_{i_k} − 3l − (k−1)/2` with
//! `k ≥ 1`, `l ≥ 0`, `β_i ∈ A₀`. It is generated here by the two moves
//! `γ ↦ γ + β − 1/2` (append one more `β`) and `γ ↦ γ − 3`, starting from `A₀`
//! and discarding anything below `gamma_min`. The set is closed under
//! `γ_k + γ_l + γ_m − 1` and `γ − 3` within the truncation window.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{Rational, DEFAULT_MAX_DEN};

/// Upper limit on the number of generated exponents.
const MAX_SIZE: usize = 20_000;

/// Ordered index triple `(k, l, m)` with `γ_k + γ_l + γ_m − 1 = γ_j`.
pub type Triple = (usize, usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentLattice {
    gammas: Vec<Rational>,
    a0_mask: Vec<bool>,
    gamma_min: Rational,
    triples: Vec<Vec<Triple>>,
    linears: Vec<Vec<usize>>,
}

/// Default truncation `β₀ − 12`.
pub fn default_gamma_min(a0: &[Rational]) -> Option<Rational> {
    a0.first().map(|&b| b - Rational::integer(12))
}

/// Builds Γ ∩ [gamma_min, β₀] with denominators bounded by 64.
pub fn build_lattice(a0: &[Rational], gamma_min: Rational) -> Result<ExponentLattice> {
    build_lattice_with_den(a0, gamma_min, DEFAULT_MAX_DEN)
}

pub fn build_lattice_with_den(
    a0: &[Rational],
    gamma_min: Rational,
    max_den: i64,
) -> Result<ExponentLattice> {
    let half = Rational::half();
    let Some(&beta0) = a0.first() else {
        return Err(Error::InvalidExponents("empty exponent list".into()));
    };
    if beta0 > half {
        return Err(Error::InvalidExponents(format!(
            "leading exponent {beta0} exceeds 1/2; no formal solution exists"
        )));
    }
    if a0.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidExponents(
            "exponents must be strictly decreasing".into(),
        ));
    }
    if let Some(b) = a0.iter().find(|b| b.den() > max_den) {
        return Err(Error::InvalidExponents(format!(
            "denominator of {b} exceeds {max_den}"
        )));
    }
    let last = *a0.last().unwrap();
    if gamma_min >= last {
        return Err(Error::InvalidExponents(format!(
            "gamma_min {gamma_min} must lie below the smallest exponent {last}"
        )));
    }

    let steps: Vec<Rational> = a0
        .iter()
        .map(|&b| b - half)
        .filter(|s| !s.is_zero())
        .chain(std::iter::once(Rational::integer(-3)))
        .collect();
    let mut set: BTreeSet<Rational> = a0.iter().copied().collect();
    let mut frontier: Vec<Rational> = a0.to_vec();
    while let Some(g) = frontier.pop() {
        for &s in &steps {
            let next = g + s;
            if next >= gamma_min && set.insert(next) {
                if set.len() > MAX_SIZE {
                    return Err(Error::InvalidExponents(format!(
                        "lattice exceeds {MAX_SIZE} exponents; raise gamma_min"
                    )));
                }
                frontier.push(next);
            }
        }
    }
    let gammas: Vec<Rational> = set.into_iter().rev().collect();
    if let Some(g) = gammas.iter().find(|g| g.den() > max_den) {
        return Err(Error::InvalidExponents(format!(
            "generated exponent {g} has denominator above {max_den}"
        )));
    }
    let a0_set: BTreeSet<Rational> = a0.iter().copied().collect();
    let a0_mask = gammas.iter().map(|g| a0_set.contains(g)).collect();
    let (triples, linears) = resonance_tables(&gammas);
    Ok(ExponentLattice {
        gammas,
        a0_mask,
        gamma_min,
        triples,
        linears,
    })
}

fn resonance_tables(gammas: &[Rational]) -> (Vec<Vec<Triple>>, Vec<Vec<usize>>) {
    let index: HashMap<Rational, usize> =
        gammas.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let one = Rational::integer(1);
    let three = Rational::integer(3);
    let n = gammas.len();
    let mut triples = vec![Vec::new(); n];
    let mut linears = vec![Vec::new(); n];
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                let need = gammas[j] + one - gammas[k] - gammas[l];
                if let Some(&m) = index.get(&need) {
                    triples[j].push((k, l, m));
                }
            }
        }
        if let Some(&p) = index.get(&(gammas[j] + three)) {
            linears[j].push(p);
        }
    }
    (triples, linears)
}

impl ExponentLattice {
    pub fn gammas(&self) -> &[Rational] {
        &self.gammas
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn gamma(&self, j: usize) -> Rational {
        self.gammas[j]
    }

    pub fn beta0(&self) -> Rational {
        self.gammas[0]
    }

    pub fn gamma_min(&self) -> Rational {
        self.gamma_min
    }

    pub fn in_a0(&self, j: usize) -> bool {
        self.a0_mask[j]
    }

    pub fn a0_mask(&self) -> &[bool] {
        &self.a0_mask
    }

    pub fn index_of(&self, g: Rational) -> Option<usize> {
        self.gammas.binary_search_by(|x| g.cmp(x)).ok()
    }

    /// Triple and linear resonances of index `j`.
    pub fn resonances(&self, j: usize) -> Result<(&[Triple], &[usize])> {
        if j >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.len(),
            });
        }
        Ok((&self.triples[j], &self.linears[j]))
    }

    pub fn triples(&self, j: usize) -> &[Triple] {
        &self.triples[j]
    }

    pub fn linears(&self, j: usize) -> &[usize] {
        &self.linears[j]
    }

    pub fn dump(&self) -> LatticeDump {
        LatticeDump {
            gammas: self.gammas.clone(),
            triples: self
                .triples
                .iter()
                .enumerate()
                .map(|(j, t)| (j.to_string(), t.iter().map(|&(a, b, c)| [a, b, c]).collect()))
                .collect(),
            linears: self
                .linears
                .iter()
                .enumerate()
                .map(|(j, p)| (j.to_string(), p.clone()))
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.dump())?)
    }
}

/// JSON form: `{"gammas":[{"num":1,"den":2},...],"triples":{...},"linears":{...}}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LatticeDump {
    pub gammas: Vec<Rational>,
    pub triples: BTreeMap<String, Vec<[usize; 3]>>,
    pub linears: BTreeMap<String, Vec<usize>>,
}
