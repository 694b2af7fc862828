//! Banded LU with partial pivoting (row interchanges within the band).

use crate::error::{Error, Result};

/// `n × n` matrix with `kl` sub- and `ku` super-diagonals, stored with
/// `kl` extra super-diagonals of room for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i},{j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl >= i && j <= i + self.ku + self.kl {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// # Panics
    /// If `(i, j)` lies outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += value;
    }

    /// Zeroes row `i` and puts `1` on its diagonal.
    pub fn set_identity_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku + self.kl + 1).min(self.n);
        for j in lo..hi {
            let s = self.slot(i, j);
            self.data[s] = 0.0;
        }
        self.set(i, i, 1.0);
    }

    pub fn lu(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl + 1).min(n);
            let last_col = (k + kl + ku + 1).min(n);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..last_row {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= f64::EPSILON * scale * n as f64 || best == 0.0 {
                return Err(Error::SingularJacobian("banded LU"));
            }
            piv[k] = p;
            if p != k {
                for j in k..last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..last_row {
                let sik = self.slot(i, k);
                let l = self.data[sik] / pivot;
                self.data[sik] = l;
                if l != 0.0 {
                    for j in k + 1..last_col {
                        let skj = self.slot(k, j);
                        let sij = self.slot(i, j);
                        self.data[sij] -= l * self.data[skj];
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..(k + m.kl + 1).min(n) {
                b[i] -= m.data[m.slot(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..(k + m.kl + m.ku + 1).min(n) {
                s -= m.data[m.slot(k, j)] * b[j];
            }
            b[k] = s / m.data[m.slot(k, k)];
        }
    }
}
