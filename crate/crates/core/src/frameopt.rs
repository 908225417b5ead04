//! Minimisation of functions of orthonormal frames.
//!
//! Frames are the first `q` columns of an orthogonal `n x n` matrix. The
//! optimiser sweeps over Givens planes `(i, j)` with `i < q`, minimising along
//! each one-parameter rotation by a coarse grid followed by Brent (parabolic and golden-section)
//! refinement, and accepts a rotation only if it lowers the objective.
//! Restarts are Haar-distributed and run through [`Exec::map`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::par::Exec;
use crate::{Error, Result};

const GRID: usize = 12;
const LINE_ITERS: usize = 60;
const LINE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSettings {
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub exec: Exec,
}

impl Default for FrameSettings {
    fn default() -> Self {
        Self { restarts: 16, seed: 0, tol: 1e-12, max_sweeps: 100, exec: Exec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    /// The optimal `n x q` frame.
    pub frame: DMatrix<f64>,
    /// The full orthogonal matrix whose leading columns are `frame`.
    pub full: DMatrix<f64>,
    pub value: f64,
    pub converged: bool,
    pub sweeps: usize,
    pub restart: usize,
}

/// Deterministic generator for restart `stream` of a run seeded by `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `diag(R)` moved into `Q`.
pub fn haar_orthogonal(n: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Modified Gram–Schmidt on the columns (two passes).
pub fn gram_schmidt(mut q: DMatrix<f64>) -> DMatrix<f64> {
    for k in 0..q.ncols() {
        for _ in 0..2 {
            for j in 0..k {
                let d = q.column(j).dot(&q.column(k));
                let cj = q.column(j).into_owned();
                q.column_mut(k).axpy(-d, &cj, 1.0);
            }
        }
        let nk = q.column(k).norm();
        q.column_mut(k).unscale_mut(nk);
    }
    q
}

fn rotate(q: &mut DMatrix<f64>, i: usize, j: usize, theta: f64) {
    let (s, c) = theta.sin_cos();
    for r in 0..q.nrows() {
        let (a, b) = (q[(r, i)], q[(r, j)]);
        q[(r, i)] = c * a + s * b;
        q[(r, j)] = -s * a + c * b;
    }
}

/// Minimise along the rotation in plane `(i, j)`; returns the best angle and
/// value, with `theta = 0` kept unless something is strictly better.
fn line_search<F: Fn(&DMatrix<f64>) -> f64>(q: &DMatrix<f64>, k: usize, i: usize, j: usize, f0: f64, objective: &F) -> (f64, f64) {
    let scratch = std::cell::RefCell::new(q.clone());
    let eval = |theta: f64| {
        let mut t = scratch.borrow_mut();
        t.copy_from(q);
        rotate(&mut t, i, j, theta);
        if k == t.ncols() {
            objective(&t)
        } else {
            objective(&t.columns(0, k).into_owned())
        }
    };
    let step = 2.0 * std::f64::consts::PI / GRID as f64;
    let grid: Vec<(f64, f64)> = (0..GRID)
        .map(|g| {
            let th = -std::f64::consts::PI + step * g as f64;
            (th, if g == GRID / 2 { f0 } else { eval(th) })
        })
        .collect();
    let (mut best_t, mut best_v) = (0.0, f0);
    let gi = (0..GRID).min_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1)).expect("grid");
    if grid[gi].1 < best_v {
        best_t = grid[gi].0;
        best_v = grid[gi].1;
    }
    let centre = grid[gi].0;
    let (t, v) = brent(&eval, centre - step, centre, centre + step, grid[gi].1);
    if v < best_v {
        best_t = t;
        best_v = v;
    }
    (best_t, best_v)
}

/// Brent's parabolic/golden-section minimisation on `[a, b]` starting from
/// the interior point `x` with value `fx`.
fn brent<F: Fn(f64) -> f64>(f: &F, mut a: f64, x0: f64, mut b: f64, fx0: f64) -> (f64, f64) {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (fx0, fx0, fx0);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..LINE_ITERS {
        let xm = 0.5 * (a + b);
        let tol1 = LINE_TOL * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, w, x) = (w, x, u);
            (fv, fw, fx) = (fw, fx, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, w) = (w, u);
                (fv, fw) = (fw, fu);
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Givens descent from a given orthogonal start; the objective sees the
/// leading `k` columns.
pub fn descend_from<F: Fn(&DMatrix<f64>) -> f64>(start: DMatrix<f64>, k: usize, objective: &F, tol: f64, max_sweeps: usize) -> FrameResult {
    descend_planes(start, k, objective, tol, max_sweeps, |_, _| true)
}

fn descend_planes<F, P>(start: DMatrix<f64>, k: usize, objective: &F, tol: f64, max_sweeps: usize, plane: P) -> FrameResult
where
    F: Fn(&DMatrix<f64>) -> f64,
    P: Fn(usize, usize) -> bool,
{
    let n = start.nrows();
    let lead = |q: &DMatrix<f64>| if k == n { q.clone() } else { q.columns(0, k).into_owned() };
    let mut q = start;
    let mut value = objective(&lead(&q));
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let before = value;
        for i in 0..k.min(n) {
            for j in i + 1..n {
                if !plane(i, j) {
                    continue;
                }
                let (theta, v) = line_search(&q, k, i, j, value, objective);
                if v < value {
                    rotate(&mut q, i, j, theta);
                    value = v;
                }
            }
        }
        q = gram_schmidt(q);
        value = objective(&lead(&q));
        if before - value <= tol * (1.0 + value.abs()) {
            converged = true;
            break;
        }
    }
    FrameResult { frame: lead(&q), full: q, value, converged, sweeps, restart: 0 }
}

/// Minimise an objective of full bases that depends only on the split
/// `span{e_1..e_p} + span{e_(p+1)..e_n}`: rotations inside either block are
/// skipped.
pub fn minimize_over_partitions<F>(n: usize, p: usize, objective: &F, settings: &FrameSettings) -> Result<FrameResult>
where
    F: Fn(&DMatrix<f64>) -> f64 + Sync,
{
    if p == 0 || p >= n {
        return Err(Error::Dimension(format!("cannot split R^{n} at {p}")));
    }
    let results = settings.exec.map(settings.restarts.max(1), |r| {
        let start = haar_orthogonal(n, &mut rng(settings.seed, r as u64));
        let mut res = descend_planes(start, n, objective, settings.tol, settings.max_sweeps, |i, j| (i < p) != (j < p));
        res.restart = r;
        res
    });
    Ok(best_of(results))
}

fn best_of(results: Vec<FrameResult>) -> FrameResult {
    let mut best: Option<FrameResult> = None;
    for res in results {
        if best.as_ref().map_or(true, |b| res.value < b.value) {
            best = Some(res);
        }
    }
    best.expect("at least one restart")
}

/// Minimise `objective` over orthonormal `k`-frames in `R^n` from
/// `settings.restarts` Haar-random starts; ties go to the lowest restart.
pub fn minimize_over_frames<F>(n: usize, k: usize, objective: &F, settings: &FrameSettings) -> Result<FrameResult>
where
    F: Fn(&DMatrix<f64>) -> f64 + Sync,
{
    if k == 0 || k > n {
        return Err(Error::Dimension(format!("cannot fit a {k}-frame in R^{n}")));
    }
    let restarts = settings.restarts.max(1);
    let results = settings.exec.map(restarts, |r| {
        let mut g = rng(settings.seed, r as u64);
        let start = haar_orthogonal(n, &mut g);
        let mut res = descend_from(start, k, objective, settings.tol, settings.max_sweeps);
        res.restart = r;
        res
    });
    Ok(best_of(results))
}

/// Smallest eigenvalue and a unit eigenvector of a symmetric matrix.
pub fn min_eigenpair(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!("{} x {} is not a nonempty square matrix", m.nrows(), m.ncols())));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * m.amax().max(1.0) {
        return Err(Error::Asymmetric(asym));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let k = eig.eigenvalues.imin();
    let v = eig.eigenvectors.column(k).normalize();
    Ok((eig.eigenvalues[k], v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_is_orthogonal_and_seeded() {
        let a = haar_orthogonal(5, &mut rng(1, 0));
        let b = haar_orthogonal(5, &mut rng(1, 0));
        let c = haar_orthogonal(5, &mut rng(1, 1));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a.transpose() * &a - DMatrix::<f64>::identity(5, 5)).amax() < 1e-14);
    }

    #[test]
    fn constant_objective() {
        let s = FrameSettings { restarts: 2, ..Default::default() };
        let r = minimize_over_frames(4, 2, &|_: &DMatrix<f64>| 3.5, &s).unwrap();
        assert_eq!(r.value, 3.5);
        assert!(r.converged);
        assert_eq!(r.sweeps, 1);
    }

    #[test]
    fn rayleigh_quotient_finds_smallest_eigenvalue() {
        let a = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 + ((j * 7 + i * 3) % 5) as f64);
        let (lmin, _) = min_eigenpair(&a).unwrap();
        let obj = |f: &DMatrix<f64>| (f.transpose() * &a * f)[(0, 0)];
        for exec in [Exec::Sequential, Exec::Parallel] {
            let s = FrameSettings { restarts: 3, exec, ..Default::default() };
            let r = minimize_over_frames(5, 1, &obj, &s).unwrap();
            assert!((r.value - lmin).abs() < 1e-9, "{} {}", r.value, lmin);
        }
        // two-frame trace picks the two smallest eigenvalues
        let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let obj2 = |f: &DMatrix<f64>| (f.transpose() * &a * f).trace();
        let r = minimize_over_frames(5, 2, &obj2, &FrameSettings { restarts: 3, ..Default::default() }).unwrap();
        assert!((r.value - ev[0] - ev[1]).abs() < 1e-9);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let a = DMatrix::from_fn(4, 4, |i, j| (i as f64 - j as f64).cos());
        let obj = |f: &DMatrix<f64>| (f.transpose() * &a * f)[(0, 1)].powi(2) - (f.transpose() * &a * f)[(0, 0)];
        let s = FrameSettings { restarts: 4, seed: 9, ..Default::default() };
        let r1 = minimize_over_frames(4, 2, &obj, &FrameSettings { exec: Exec::Sequential, ..s }).unwrap();
        let r2 = minimize_over_frames(4, 2, &obj, &FrameSettings { exec: Exec::Parallel, ..s }).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn eigenpair_checks() {
        let (l, v) = min_eigenpair(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(l, 1.0);
        assert!((v.norm() - 1.0).abs() < 1e-15);
        let mut m = DMatrix::<f64>::identity(3, 3);
        m[(0, 1)] = 1e-3;
        assert!(matches!(min_eigenpair(&m), Err(Error::Asymmetric(_))));
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -2.0, 5.0]));
        let (l, v) = min_eigenpair(&d).unwrap();
        assert_eq!(l, -2.0);
        assert!((&d * &v - &v * l).amax() < 1e-12);
    }
}
