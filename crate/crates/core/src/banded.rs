//! Square band matrices and their LU factorization with partial pivoting.
//!
//! Storage is row-major over a fixed window of columns around the diagonal.
//! The window reserves `kl` extra superdiagonals for the fill-in that row
//! exchanges produce, so factorization happens in place.

use crate::error::{Error, Result};
use crate::Real;

/// `n × n` matrix with `kl` sub- and `ku` superdiagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        (j < self.n && off >= 0 && (off as usize) < self.width).then(|| i * self.width + off as usize)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.slot(i, j).unwrap()]
        } else {
            T::zero()
        }
    }

    /// Sets entry `(i, j)`; panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let s = self.slot(i, j).unwrap();
        self.data[s] = v;
    }

    /// `A·x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Gaussian elimination with row exchanges restricted to the band.
    pub fn factor(&self) -> Result<BandedLu<T>> {
        let (n, kl, w) = (self.n, self.kl, self.width);
        let mut a = self.data.clone();
        let mut piv = vec![0usize; n];
        let idx = |i: usize, j: usize| i * w + (j + kl - i);
        let scale = self
            .data
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
            .max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let last_col = (j + kl + self.ku).min(n - 1);
            let mut p = j;
            let mut best = a[idx(j, j)].abs();
            for i in j + 1..=last_row {
                let v = a[idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular {
                    column: j,
                    t: f64::NAN,
                });
            }
            piv[j] = p;
            if p != j {
                for c in j..=last_col {
                    a.swap(idx(j, c), idx(p, c));
                }
            }
            let d = a[idx(j, j)];
            for i in j + 1..=last_row {
                let l = a[idx(i, j)] / d;
                a[idx(i, j)] = l;
                if l.is_zero() {
                    continue;
                }
                for c in j + 1..=last_col {
                    let u = a[idx(j, c)];
                    a[idx(i, c)] -= l * u;
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku_eff: kl + self.ku,
            width: w,
            data: a,
            piv,
        })
    }

    /// Factor and solve in one call.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        Ok(self.factor()?.solve(b))
    }
}

/// Packed `L`, `U` and the pivot sequence of a [`BandedMatrix`].
#[derive(Clone, Debug)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku_eff: usize,
    width: usize,
    data: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Real> BandedLu<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.width + (j + self.kl - i)]
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.piv[j]);
            let xj = x[j];
            if xj.is_zero() {
                continue;
            }
            for i in j + 1..=(j + self.kl).min(n - 1) {
                x[i] -= self.at(i, j) * xj;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..=(i + self.ku_eff).min(n - 1) {
                s -= self.at(i, c) * x[c];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for j in 0..n {
            let p = (j..n).max_by(|&r, &s| a[r][j].abs().total_cmp(&a[s][j].abs())).unwrap();
            a.swap(j, p);
            b.swap(j, p);
            for i in j + 1..n {
                let l = a[i][j] / a[j][j];
                for c in j..n {
                    a[i][c] -= l * a[j][c];
                }
                b[i] -= l * b[j];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|c| a[i][c] * x[c]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn sample(n: usize) -> BandedMatrix<f64> {
        let mut m = BandedMatrix::zeros(n, 1, 2);
        for i in 0..n {
            for j in i.saturating_sub(1)..=(i + 2).min(n - 1) {
                // small diagonal forces pivoting in some columns
                let v = ((i * 7 + j * 13) % 11) as f64 - 5.0 + if i == j { 0.1 } else { 0.0 };
                m.set(i, j, v);
            }
        }
        m
    }

    #[test]
    fn matches_dense_solver() {
        let m = sample(200);
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = m.solve(&b).unwrap();
        let y = dense_solve(m.to_dense(), b.clone());
        let diff = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
        let r = m.matvec(&x);
        assert!(r.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn identity_and_zero_rhs() {
        let m = BandedMatrix::<f64>::identity(5, 1, 2);
        assert_eq!(m.solve(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(sample(30).solve(&[0.0; 30]).unwrap(), vec![0.0; 30]);
    }

    #[test]
    fn singular_is_reported() {
        let mut m = BandedMatrix::<f64>::identity(4, 1, 2);
        m.set(2, 2, 0.0);
        m.set(3, 2, 0.0);
        match m.factor() {
            Err(Error::Singular { column, .. }) => assert_eq!(column, 2),
            other => panic!("{other:?}"),
        }
    }
}
