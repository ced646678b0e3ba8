//! Solves `(I - β D₂) w = r` for the implicit mixed-derivative term of the
//! Camassa-Holm regularisation.
//!
//! Periodic grids use the circulant structure and an FFT; grids with
//! constant-extrapolation ghosts use a banded LU with partial pivoting.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::stencil::{Boundary, Grid1D, Order, Stencil};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    n: usize,
    h_bits: u64,
    x_min_bits: u64,
    order: Order,
    beta_bits: u64,
    boundary: Boundary,
}

impl Eq for Key {}

impl std::hash::Hash for Key {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.n.hash(state);
        self.h_bits.hash(state);
        self.x_min_bits.hash(state);
        self.order.hash(state);
        self.beta_bits.hash(state);
        self.boundary.hash(state);
    }
}

enum Factor {
    Circulant {
        eig: Vec<f64>,
        fwd: Arc<dyn Fft<f64>>,
        inv: Arc<dyn Fft<f64>>,
    },
    Banded(BandLu),
}

/// Factorisation cache for `I - β D₂`, keyed by grid, order, `β` and boundary.
///
/// Entries are immutable once built, so concurrent readers never contend on
/// anything but the map lookup.
#[derive(Default)]
pub struct HelmholtzSolver {
    cache: RwLock<HashMap<Key, Arc<Factor>>>,
}

impl std::fmt::Debug for HelmholtzSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let n = self.cache.read().map(|c| c.len()).unwrap_or(0);
        f.debug_struct("HelmholtzSolver")
            .field("cached", &n)
            .finish()
    }
}

impl HelmholtzSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Half-width of the banded operator for order `q`.
    pub fn bandwidth(q: Order) -> usize {
        q.half_width()
    }

    pub fn cached(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    fn factor(
        &self,
        grid: &Grid1D,
        q: Order,
        beta: f64,
        boundary: Boundary,
    ) -> Result<Arc<Factor>> {
        let key = Key {
            n: grid.len(),
            h_bits: grid.h().to_bits(),
            x_min_bits: grid.x_min().to_bits(),
            order: q,
            beta_bits: beta.to_bits(),
            boundary,
        };
        if let Some(f) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(f.clone());
        }
        let built = Arc::new(build(grid, q, beta, boundary)?);
        self.cache
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert(built.clone());
        Ok(built)
    }

    /// Returns `w` with `(I - β D₂) w = rhs`.
    pub fn solve(
        &self,
        grid: &Grid1D,
        q: Order,
        beta: f64,
        boundary: Boundary,
        rhs: &[f64],
    ) -> Result<Vec<f64>> {
        if rhs.len() != grid.len() {
            return Err(Error::config("right-hand side length does not match grid"));
        }
        let factor = self.factor(grid, q, beta, boundary)?;
        let w = match &*factor {
            Factor::Circulant { eig, fwd, inv } => {
                let n = rhs.len();
                let mut buf: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fwd.process(&mut buf);
                for (z, l) in buf.iter_mut().zip(eig) {
                    *z /= *l;
                }
                inv.process(&mut buf);
                let scale = 1.0 / n as f64;
                buf.iter().map(|z| z.re * scale).collect()
            }
            Factor::Banded(lu) => lu.solve(rhs),
        };
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::LinearSolve(format!(
                "non-finite solution at node {i}"
            )));
        }
        Ok(w)
    }

    /// Applies `I - β D₂` (used to check residuals).
    pub fn apply(
        grid: &Grid1D,
        q: Order,
        beta: f64,
        boundary: Boundary,
        w: &[f64],
    ) -> Result<Vec<f64>> {
        let d2 = Stencil::new(q, 2)?.apply(w, grid, boundary)?;
        Ok(w.iter().zip(&d2).map(|(a, b)| a - beta * b).collect())
    }
}

fn build(grid: &Grid1D, q: Order, beta: f64, boundary: Boundary) -> Result<Factor> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::LinearSolve(format!(
            "invalid Helmholtz coefficient {beta}"
        )));
    }
    let s = Stencil::new(q, 2)?;
    let n = grid.len();
    let w = s.half_width();
    let k = beta / (grid.h() * grid.h());
    match boundary {
        Boundary::Periodic => {
            let mut eig = vec![0.0; n];
            for (j, e) in eig.iter_mut().enumerate() {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                // Symmetric stencil: symbol is c_0 + 2 Σ c_k cos(kθ), always ≤ 0.
                let mut sym = s.weights()[w];
                for m in 1..=w {
                    sym += 2.0 * s.weights()[w + m] * (m as f64 * theta).cos();
                }
                *e = 1.0 - k * sym;
            }
            if let Some(e) = eig.iter().find(|e| e.abs() < 1e-12) {
                return Err(Error::LinearSolve(format!(
                    "singular circulant operator (eigenvalue {e})"
                )));
            }
            let mut planner = FftPlanner::new();
            Ok(Factor::Circulant {
                eig,
                fwd: planner.plan_fft_forward(n),
                inv: planner.plan_fft_inverse(n),
            })
        }
        Boundary::ConstantExtrapolation => {
            let mut a = BandMatrix::zeros(n, w, w);
            for i in 0..n {
                a.add(i, i, 1.0);
                for (m, c) in s.weights().iter().enumerate() {
                    let j =
                        (i as isize + m as isize - w as isize).clamp(0, n as isize - 1) as usize;
                    a.add(i, j, -k * c);
                }
            }
            Ok(Factor::Banded(a.factor()?))
        }
    }
}

/// Band storage where row `i` holds columns `i - ml .. i - ml + width`.
struct BandMatrix {
    n: usize,
    ml: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, ml: usize, mu: usize) -> Self {
        // Room for pivoting fill-in: upper bandwidth grows to ml + mu.
        let width = 2 * ml + mu + 1;
        Self {
            n,
            ml,
            width,
            data: vec![0.0; n * width],
        }
    }

    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let start = i as isize - self.ml as isize;
        let off = j as isize - start;
        (off >= 0 && (off as usize) < self.width).then(|| i * self.width + off as usize)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.offset(i, j).map_or(0.0, |o| self.data[o])
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j).expect("entry inside band");
        self.data[o] = v;
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j).expect("entry inside band");
        self.data[o] += v;
    }

    fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let ml = self.ml;
        let hi = self.width - ml - 1;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + ml).min(n - 1);
            let (p, pv) = (k..=last)
                .map(|i| (i, self.get(i, k).abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pv < 1e-300 {
                return Err(Error::LinearSolve(format!("zero pivot in column {k}")));
            }
            piv[k] = p;
            let cmax = (k + hi).min(n - 1);
            if p != k {
                for j in k..=cmax {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    if self.offset(p, j).is_some() {
                        self.set(p, j, a);
                    } else {
                        debug_assert!(a == 0.0);
                    }
                }
            }
            let d = self.get(k, k);
            for i in k + 1..=last {
                let l = self.get(i, k) / d;
                if l == 0.0 {
                    continue;
                }
                self.set(i, k, l);
                for j in k + 1..=cmax {
                    let u = self.get(k, j);
                    if u != 0.0 {
                        self.add(i, j, -l * u);
                    }
                }
            }
        }
        Ok(BandLu { a: self, piv })
    }
}

struct BandLu {
    a: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.a.n;
        let ml = self.a.ml;
        let hi = self.a.width - ml - 1;
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + ml).min(n - 1) {
                x[i] -= self.a.get(i, k) * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + hi).min(n - 1) {
                s -= self.a.get(k, j) * x[j];
            }
            x[k] = s / self.a.get(k, k);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(grid: &Grid1D, q: Order, beta: f64, b: Boundary, rhs: &[f64]) -> f64 {
        let solver = HelmholtzSolver::new();
        let w = solver.solve(grid, q, beta, b, rhs).unwrap();
        let back = HelmholtzSolver::apply(grid, q, beta, b, &w).unwrap();
        let num: f64 = back
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let den: f64 = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        num / den
    }

    #[test]
    fn round_trip_both_boundaries() {
        let g = Grid1D::new(0.0, 10.0, 257).unwrap();
        let rhs: Vec<f64> = g
            .nodes()
            .iter()
            .map(|x| (x * 1.3).sin() + 0.2 * x)
            .collect();
        for q in Order::ALL {
            for b in [Boundary::Periodic, Boundary::ConstantExtrapolation] {
                for beta in [0.0, 1e-4, 5e-3, 0.05] {
                    let r = residual(&g, q, beta, b, &rhs);
                    assert!(r <= 1e-12, "q={q} b={b:?} beta={beta}: {r:e}");
                }
            }
        }
    }

    #[test]
    fn cache_is_reused() {
        let g = Grid1D::new(0.0, 1.0, 64).unwrap();
        let s = HelmholtzSolver::new();
        let rhs = vec![1.0; 64];
        s.solve(&g, Order::Q6, 0.01, Boundary::Periodic, &rhs)
            .unwrap();
        s.solve(&g, Order::Q6, 0.01, Boundary::Periodic, &rhs)
            .unwrap();
        assert_eq!(s.cached(), 1);
        s.solve(&g, Order::Q8, 0.01, Boundary::Periodic, &rhs)
            .unwrap();
        assert_eq!(s.cached(), 2);
    }

    #[test]
    fn negative_coefficient_rejected() {
        let g = Grid1D::new(0.0, 1.0, 64).unwrap();
        let s = HelmholtzSolver::new();
        let err = s
            .solve(&g, Order::Q4, -1.0, Boundary::Periodic, &[0.0; 64])
            .unwrap_err();
        assert!(matches!(err, Error::LinearSolve(_)));
    }
}
