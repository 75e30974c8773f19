//! Sparse direct solvers, the saddle-point solver and smallest generalized
//! eigenvalues of the two pollution pencils.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Mat, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sparse::{dot, norm, CscMatrix};
use crate::C64;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("eigensolver did not converge after {iterations} operator applications (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("iterative solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolveNotConverged { iterations: usize, residual: f64 },
    #[error("pencil is numerically singular (smallest eigenvalue {0:.3e})")]
    RankDeficient(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

fn sequential() {
    faer::set_global_parallelism(Par::Seq);
}

fn column(b: &[C64]) -> Mat<C64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn unpack(m: &Mat<C64>) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

fn square(a: &CscMatrix, what: &str) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::Dimension(format!("{what} is {}x{}", a.nrows(), a.ncols())));
    }
    Ok(())
}

/// Sparse LU with partial pivoting of a general complex matrix.
pub struct SparseLu {
    lu: Lu<usize, C64>,
    n: usize,
}

impl SparseLu {
    pub fn new(a: &CscMatrix) -> Result<Self, LinalgError> {
        square(a, "matrix")?;
        sequential();
        let lu = a
            .to_faer()
            .sp_lu()
            .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        Ok(SparseLu { lu, n: a.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = column(b);
        self.lu.solve_in_place(x.as_mut());
        unpack(&x)
    }

    /// Solves `A^H x = b`.
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let mut x = column(b);
        self.lu.solve_adjoint_in_place(x.as_mut());
        unpack(&x)
    }
}

/// Sparse Cholesky of a Hermitian positive definite matrix; only the lower
/// triangle is read.
pub struct SparseCholesky {
    llt: Llt<usize, C64>,
    n: usize,
}

impl SparseCholesky {
    pub fn new(a: &CscMatrix) -> Result<Self, LinalgError> {
        Self::from_lower(a.lower())
    }

    /// Factors a Hermitian matrix given by its lower triangle.
    pub fn from_lower(a: CscMatrix) -> Result<Self, LinalgError> {
        square(&a, "matrix")?;
        sequential();
        let n = a.nrows();
        let llt = a
            .into_faer()
            .sp_cholesky(Side::Lower)
            .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        Ok(SparseCholesky { llt, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = column(b);
        self.llt.solve_in_place(x.as_mut());
        unpack(&x)
    }
}

/// How the saddle system `[[M_V, B], [B^H, 0]]` is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SaddleStrategy {
    /// Direct below [`SaddleStrategy::AUTO_LIMIT`] unknowns, Schur otherwise.
    #[default]
    Auto,
    /// One LU factorization of the full saddle matrix.
    Direct,
    /// Cholesky of `M_V` and conjugate gradients on the Schur complement,
    /// preconditioned by `M_U`.
    Schur,
}

impl SaddleStrategy {
    pub const AUTO_LIMIT: usize = 20_000;

    fn resolve(self, n: usize) -> SaddleStrategy {
        match self {
            SaddleStrategy::Auto if n <= Self::AUTO_LIMIT => SaddleStrategy::Direct,
            SaddleStrategy::Auto => SaddleStrategy::Schur,
            s => s,
        }
    }
}

impl std::str::FromStr for SaddleStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(SaddleStrategy::Auto),
            "direct" => Ok(SaddleStrategy::Direct),
            "schur" => Ok(SaddleStrategy::Schur),
            _ => Err(format!("unknown saddle strategy `{s}`")),
        }
    }
}

enum SaddleInner {
    Direct(SparseLu),
    Schur { m_v: SparseCholesky, m_u: SparseCholesky },
}

/// Factored saddle operator; solves `M_V v + B u = f`, `B^H v = g`.
pub struct SaddleSolver<'a> {
    b: &'a CscMatrix,
    inner: SaddleInner,
    /// Relative residual target of the Schur iteration.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

/// Solution of one saddle solve.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub v: Vec<C64>,
    pub u: Vec<C64>,
    /// Conjugate-gradient iterations, zero for the direct path.
    pub iterations: usize,
}

impl<'a> SaddleSolver<'a> {
    pub fn new(m_v: &CscMatrix, b: &'a CscMatrix, m_u: &CscMatrix, strategy: SaddleStrategy) -> Result<Self, LinalgError> {
        square(m_v, "M_V")?;
        square(m_u, "M_U")?;
        if b.nrows() != m_v.nrows() || b.ncols() != m_u.nrows() {
            return Err(LinalgError::Dimension(format!(
                "B is {}x{}, M_V {}, M_U {}",
                b.nrows(),
                b.ncols(),
                m_v.nrows(),
                m_u.nrows()
            )));
        }
        let inner = match strategy.resolve(m_v.nrows() + m_u.nrows()) {
            SaddleStrategy::Schur => SaddleInner::Schur {
                m_v: SparseCholesky::new(m_v)?,
                m_u: SparseCholesky::new(m_u)?,
            },
            _ => {
                let bh = b.adjoint();
                let full = CscMatrix::block(&[&[Some(m_v), Some(b)], &[Some(&bh), None]]);
                SaddleInner::Direct(SparseLu::new(&full)?)
            }
        };
        Ok(SaddleSolver {
            b,
            inner,
            cg_tol: 1e-13,
            cg_max_iter: 1000,
        })
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.inner, SaddleInner::Direct(_))
    }

    pub fn solve(&self, f: &[C64], g: &[C64]) -> Result<SaddleSolution, LinalgError> {
        let (nv, nu) = (self.b.nrows(), self.b.ncols());
        match &self.inner {
            SaddleInner::Direct(lu) => {
                let rhs: Vec<C64> = f.iter().chain(g).copied().collect();
                let mut x = lu.solve(&rhs);
                let u = x.split_off(nv);
                Ok(SaddleSolution { v: x, u, iterations: 0 })
            }
            SaddleInner::Schur { m_v, m_u } => {
                // S u = B^H M_V^{-1} f - g with S = B^H M_V^{-1} B.
                let rhs: Vec<C64> = self
                    .b
                    .adjoint_mul_vec(&m_v.solve(f))
                    .iter()
                    .zip(g)
                    .map(|(a, b)| a - b)
                    .collect();
                let apply = |x: &[C64]| self.b.adjoint_mul_vec(&m_v.solve(&self.b.mul_vec(x)));
                let (u, iterations) = pcg(apply, |r| m_u.solve(r), &rhs, nu, self.cg_tol, self.cg_max_iter)?;
                let bu = self.b.mul_vec(&u);
                let r: Vec<C64> = f.iter().zip(&bu).map(|(a, b)| a - b).collect();
                Ok(SaddleSolution {
                    v: m_v.solve(&r),
                    u,
                    iterations,
                })
            }
        }
    }

    /// `S^{-1} y` for the Schur complement `S = B^H M_V^{-1} B`.
    pub fn schur_inverse(&self, y: &[C64]) -> Result<Vec<C64>, LinalgError> {
        let zero = vec![C64::new(0.0, 0.0); self.b.nrows()];
        let minus: Vec<C64> = y.iter().map(|v| -v).collect();
        Ok(self.solve(&zero, &minus)?.u)
    }
}

/// Preconditioned conjugate gradients for a Hermitian positive definite
/// operator, stopping on the Euclidean residual.
pub fn pcg(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    precond: impl Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, usize), LinalgError> {
    let mut x = vec![C64::new(0.0, 0.0); n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm(&r) / bnorm;
        if res <= tol {
            return Ok((x, it));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::SolveNotConverged {
        iterations: max_iter,
        residual: norm(&r) / bnorm,
    })
}

/// Settings of the restarted Lanczos eigensolver.
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Relative residual target.
    pub tol: f64,
    pub max_applications: usize,
    /// Basis size before a thick restart.
    pub basis_size: usize,
    pub seed: u64,
    pub strategy: SaddleStrategy,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            max_applications: 500,
            basis_size: 48,
            seed: 20_240_917,
            strategy: SaddleStrategy::Auto,
        }
    }
}

/// Smallest eigenpair of a Hermitian pencil `(A, M)`.
#[derive(Debug, Clone)]
pub struct PencilResult {
    pub lambda_min: f64,
    /// M-normalized eigenvector.
    pub eigvec: Vec<C64>,
    /// Operator applications used.
    pub iterations: usize,
    /// Relative eigen-residual of the operator the iteration ran on.
    pub residual: f64,
}

/// Extreme eigenpair of an operator `T` self-adjoint in the inner product
/// of the Hermitian positive definite `gram`, by thick-restart Lanczos with
/// full reorthogonalization.
pub fn lanczos(
    n: usize,
    mut apply: impl FnMut(&[C64]) -> Result<Vec<C64>, LinalgError>,
    gram: impl Fn(&[C64]) -> Vec<C64>,
    largest: bool,
    opts: &EigenOptions,
) -> Result<(f64, Vec<C64>, usize, f64), LinalgError> {
    if n == 0 {
        return Err(LinalgError::Dimension("empty pencil".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let max_basis = opts.basis_size.clamp(2, n.max(2)).min(n);
    let keep = (max_basis / 3).max(1);

    let mut q: Vec<Vec<C64>> = Vec::new();
    let mut mq: Vec<Vec<C64>> = Vec::new();
    let mut tq: Vec<Vec<C64>> = Vec::new();
    // Projected matrix, row-major in a growing square.
    let mut h: Vec<Vec<C64>> = Vec::new();
    let mut next = start;
    let mut applications = 0;
    let mut last = (0.0, f64::INFINITY);

    loop {
        // M-orthonormalize the new direction against the basis, twice.
        let mut w = next;
        for _ in 0..2 {
            for (qi, mqi) in q.iter().zip(&mq) {
                let c = dot(mqi, &w);
                for (wk, qk) in w.iter_mut().zip(qi) {
                    *wk -= c * qk;
                }
            }
        }
        let mw = gram(&w);
        let wn = dot(&w, &mw).re.sqrt();
        if !(wn > 0.0) || q.len() == n {
            // Invariant subspace found; the current Ritz pair is exact.
            let (theta, _, _, resid) = last_ritz(&q, &tq, &h, largest, &gram)?;
            let (_, y) = ritz_vector(&q, &h, largest)?;
            return Ok((theta, y, applications, resid));
        }
        let inv = 1.0 / wn;
        w.iter_mut().for_each(|x| *x *= inv);
        let mw: Vec<C64> = mw.iter().map(|x| x * inv).collect();

        if applications >= opts.max_applications {
            return Err(LinalgError::NotConverged {
                iterations: applications,
                residual: last.1,
            });
        }
        let tw = apply(&w)?;
        applications += 1;
        let k = q.len();
        for row in h.iter_mut() {
            row.push(C64::new(0.0, 0.0));
        }
        h.push(vec![C64::new(0.0, 0.0); k + 1]);
        for i in 0..k {
            let c = dot(&mq[i], &tw);
            h[i][k] = c;
            h[k][i] = c.conj();
        }
        h[k][k] = C64::new(dot(&mw, &tw).re, 0.0);
        q.push(w);
        mq.push(mw);
        tq.push(tw);

        let (theta, y, ty, resid) = last_ritz(&q, &tq, &h, largest, &gram)?;
        last = (theta, resid);
        if resid <= opts.tol {
            return Ok((theta, y, applications, resid));
        }
        next = ty.iter().zip(&y).map(|(a, b)| a - b * theta).collect();

        if q.len() >= max_basis {
            let (vals, vecs) = projected_eigen(&h)?;
            let order: Vec<usize> = if largest {
                (0..vals.len()).rev().take(keep).collect()
            } else {
                (0..keep.min(vals.len())).collect()
            };
            let combine = |basis: &[Vec<C64>], j: usize| -> Vec<C64> {
                let mut out = vec![C64::new(0.0, 0.0); n];
                for (b, row) in basis.iter().zip(&vecs) {
                    let c = row[j];
                    for (o, x) in out.iter_mut().zip(b) {
                        *o += c * x;
                    }
                }
                out
            };
            let nq: Vec<Vec<C64>> = order.iter().map(|&j| combine(&q, j)).collect();
            let nmq: Vec<Vec<C64>> = order.iter().map(|&j| combine(&mq, j)).collect();
            let ntq: Vec<Vec<C64>> = order.iter().map(|&j| combine(&tq, j)).collect();
            q = nq;
            mq = nmq;
            tq = ntq;
            h = (0..order.len())
                .map(|i| {
                    (0..order.len())
                        .map(|j| if i == j { C64::new(vals[order[i]], 0.0) } else { C64::new(0.0, 0.0) })
                        .collect()
                })
                .collect();
        }
    }
}

/// Eigen-decomposition of the projected matrix; eigenvalues ascending and
/// eigenvectors as rows indexed `[basis][ritz]`.
fn projected_eigen(h: &[Vec<C64>]) -> Result<(Vec<f64>, Vec<Vec<C64>>), LinalgError> {
    let k = h.len();
    let m = Mat::from_fn(k, k, |i, j| h[i][j]);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
    let vals: Vec<f64> = (0..k).map(|i| eig.S().column_vector()[i].re).collect();
    let u = eig.U();
    let vecs = (0..k).map(|i| (0..k).map(|j| u[(i, j)]).collect()).collect();
    Ok((vals, vecs))
}

fn ritz_vector(q: &[Vec<C64>], h: &[Vec<C64>], largest: bool) -> Result<(f64, Vec<C64>), LinalgError> {
    let (vals, vecs) = projected_eigen(h)?;
    let j = if largest { vals.len() - 1 } else { 0 };
    let n = q[0].len();
    let mut y = vec![C64::new(0.0, 0.0); n];
    for (b, row) in q.iter().zip(&vecs) {
        for (o, x) in y.iter_mut().zip(b) {
            *o += row[j] * x;
        }
    }
    Ok((vals[j], y))
}

#[allow(clippy::type_complexity)]
fn last_ritz(
    q: &[Vec<C64>],
    tq: &[Vec<C64>],
    h: &[Vec<C64>],
    largest: bool,
    gram: &impl Fn(&[C64]) -> Vec<C64>,
) -> Result<(f64, Vec<C64>, Vec<C64>, f64), LinalgError> {
    let (vals, vecs) = projected_eigen(h)?;
    let j = if largest { vals.len() - 1 } else { 0 };
    let theta = vals[j];
    let n = q[0].len();
    let mut y = vec![C64::new(0.0, 0.0); n];
    let mut ty = vec![C64::new(0.0, 0.0); n];
    for ((b, tb), row) in q.iter().zip(tq).zip(&vecs) {
        let c = row[j];
        for i in 0..n {
            y[i] += c * b[i];
            ty[i] += c * tb[i];
        }
    }
    let r: Vec<C64> = ty.iter().zip(&y).map(|(a, b)| a - b * theta).collect();
    let rn = dot(&r, &gram(&r)).re.max(0.0).sqrt();
    let yn = dot(&y, &gram(&y)).re.sqrt();
    Ok((theta, y, ty, rn / (theta.abs() * yn)))
}

fn check_rank(lambda: f64) -> Result<(), LinalgError> {
    if !(lambda > 1e-13) {
        return Err(LinalgError::RankDeficient(lambda));
    }
    Ok(())
}

/// Smallest `λ` with `B^H M_V^{-1} B x = λ M_U x`.
///
/// The direct strategy iterates on `S^{-1} M_U` through the saddle LU, the
/// Schur strategy on `M_U^{-1} S` through Cholesky factors of `M_V` and `M_U`.
/// `M_V` is taken by value so the Schur path can factor it without a copy.
pub fn smallest_gen_eig_schur(
    m_v: CscMatrix,
    b: &CscMatrix,
    m_u: &CscMatrix,
    opts: &EigenOptions,
) -> Result<PencilResult, LinalgError> {
    let n = m_u.nrows();
    let gram = |x: &[C64]| m_u.mul_vec(x);
    let direct = opts.strategy.resolve(m_v.nrows() + n) == SaddleStrategy::Direct;
    let (lambda, y, iterations, residual) = if direct {
        let solver = SaddleSolver::new(&m_v, b, m_u, SaddleStrategy::Direct)?;
        drop(m_v);
        let (mu, y, it, res) = lanczos(n, |x| solver.schur_inverse(&m_u.mul_vec(x)), gram, true, opts)?;
        (1.0 / mu, y, it, res)
    } else {
        square(&m_v, "M_V")?;
        if b.nrows() != m_v.nrows() || b.ncols() != n {
            return Err(LinalgError::Dimension("B does not match M_V and M_U".into()));
        }
        let chol_v = SparseCholesky::from_lower(m_v.into_lower())?;
        let chol_u = SparseCholesky::new(m_u)?;
        lanczos(
            n,
            |x| Ok(chol_u.solve(&b.adjoint_mul_vec(&chol_v.solve(&b.mul_vec(x))))),
            gram,
            false,
            opts,
        )?
    };
    check_rank(lambda)?;
    Ok(PencilResult {
        lambda_min: lambda,
        eigvec: normalize(y, |x| m_u.mul_vec(x)),
        iterations,
        residual,
    })
}

/// Smallest `λ` with `L^H (L̃ M_Y^{-1} L̃^H)^{-1} L x = λ M_X x`, found as the
/// reciprocal of the largest eigenvalue of `L^{-1} L̃ M_Y^{-1} L̃^H L^{-H} M_X`.
pub fn smallest_gen_eig_galerkin(
    l: &CscMatrix,
    l_tilde: &CscMatrix,
    m_x: &CscMatrix,
    m_y: &CscMatrix,
    opts: &EigenOptions,
) -> Result<PencilResult, LinalgError> {
    square(l, "L")?;
    if l_tilde.nrows() != l.nrows() || l_tilde.ncols() != m_y.nrows() || m_x.nrows() != l.nrows() {
        return Err(LinalgError::Dimension("Galerkin pencil blocks disagree".into()));
    }
    let lu = SparseLu::new(l).map_err(|_| LinalgError::RankDeficient(0.0))?;
    let chol_y = SparseCholesky::new(m_y)?;
    let (mu, y, iterations, residual) = lanczos(
        l.nrows(),
        |x| {
            let a = lu.solve_adjoint(&m_x.mul_vec(x));
            let b = chol_y.solve(&l_tilde.adjoint_mul_vec(&a));
            Ok(lu.solve(&l_tilde.mul_vec(&b)))
        },
        |x| m_x.mul_vec(x),
        true,
        opts,
    )?;
    let lambda = 1.0 / mu;
    check_rank(lambda)?;
    Ok(PencilResult {
        lambda_min: lambda,
        eigvec: normalize(y, |x| m_x.mul_vec(x)),
        iterations,
        residual,
    })
}

fn normalize(mut y: Vec<C64>, gram: impl Fn(&[C64]) -> Vec<C64>) -> Vec<C64> {
    let n = dot(&y, &gram(&y)).re.sqrt();
    if n > 0.0 {
        y.iter_mut().for_each(|x| *x /= n);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_dense(rng: &mut ChaCha8Rng, r: usize, k: usize) -> Vec<C64> {
        (0..r * k).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn from_dense(a: &[C64], r: usize, k: usize) -> CscMatrix {
        let t: Vec<(usize, usize, C64)> = (0..r)
            .flat_map(|i| (0..k).map(move |j| (i, j, a[i * k + j])))
            .collect();
        CscMatrix::from_triplets(r, k, &t)
    }

    /// `X^H X + shift I`.
    fn random_hpd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> CscMatrix {
        let x = random_dense(rng, n, n);
        let mut a = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| x[k * n + i].conj() * x[k * n + j]).sum();
            }
            a[i * n + i] += shift;
        }
        from_dense(&a, n, n)
    }

    fn to_mat(a: &CscMatrix) -> Mat<C64> {
        let d = a.to_dense();
        Mat::from_fn(a.nrows(), a.ncols(), |i, j| d[i * a.ncols() + j])
    }

    /// Smallest eigenvalue of `(A, M)` via `M^{-1/2} A M^{-1/2}`.
    fn dense_pencil_min(a: &Mat<C64>, m: &Mat<C64>) -> f64 {
        let e = m.self_adjoint_eigen(Side::Lower).unwrap();
        let n = m.nrows();
        let d = Mat::from_fn(n, n, |i, j| {
            if i == j {
                c(1.0 / e.S().column_vector()[i].re.sqrt(), 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let w = e.U() * &d * e.U().adjoint();
        let cm = &w * a * &w;
        let herm = Mat::from_fn(n, n, |i, j| (cm[(i, j)] + cm[(j, i)].conj()) * 0.5);
        herm.self_adjoint_eigenvalues(Side::Lower).unwrap()[0]
    }

    #[test]
    fn lu_identity_and_two_by_two() {
        let id = CscMatrix::identity(3);
        let b = vec![c(1.0, 2.0), c(-1.0, 0.0), c(0.0, 3.0)];
        assert_eq!(SparseLu::new(&id).unwrap().solve(&b), b);
        let a = CscMatrix::from_triplets(
            2,
            2,
            &[(0, 0, c(2.0, 0.0)), (0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0)), (1, 1, c(2.0, 0.0))],
        );
        for x in [SparseLu::new(&a).unwrap().solve(&[c(1.0, 0.0), c(0.0, 0.0)]), SparseCholesky::new(&a).unwrap().solve(&[c(1.0, 0.0), c(0.0, 0.0)])] {
            assert!((x[0] - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
            assert!((x[1] - c(0.0, 1.0 / 3.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn random_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_hpd(&mut rng, 50, 10.0);
        let b: Vec<C64> = random_dense(&mut rng, 50, 1);
        let x = SparseLu::new(&a).unwrap().solve(&b);
        let dense = to_mat(&a).partial_piv_lu().solve(column(&b));
        for i in 0..50 {
            assert!((x[i] - dense[(i, 0)]).norm() < 1e-10 * norm(&x));
        }
        let y = SparseLu::new(&a).unwrap().solve_adjoint(&b);
        let r: Vec<C64> = a.adjoint_mul_vec(&y).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) < 1e-10 * norm(&b));
    }

    #[test]
    fn diagonal_pencil() {
        let mv = CscMatrix::identity(2);
        let b = CscMatrix::from_triplets(2, 2, &[(0, 0, c(1.0, 0.0)), (1, 1, c(2.0, 0.0))]);
        let mu = CscMatrix::identity(2);
        for strategy in [SaddleStrategy::Direct, SaddleStrategy::Schur] {
            let opts = EigenOptions { strategy, ..Default::default() };
            let r = smallest_gen_eig_schur(mv.clone(), &b, &mu, &opts).unwrap();
            assert!((r.lambda_min - 1.0).abs() < 1e-12);
        }
    }

    fn random_schur_instance(seed: u64, nv: usize, nu: usize) -> (CscMatrix, CscMatrix, CscMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mv = random_hpd(&mut rng, nv, 1.0);
        let b = from_dense(&random_dense(&mut rng, nv, nu), nv, nu);
        let mu = random_hpd(&mut rng, nu, 2.0);
        (mv, b, mu)
    }

    #[test]
    fn schur_pencil_matches_dense_oracle() {
        for seed in 0..4 {
            let (mv, b, mu) = random_schur_instance(seed, 20, 12);
            let s = to_mat(&b).adjoint() * to_mat(&mv).partial_piv_lu().solve(to_mat(&b));
            let oracle = dense_pencil_min(&s, &to_mat(&mu));
            for strategy in [SaddleStrategy::Direct, SaddleStrategy::Schur] {
                let opts = EigenOptions { strategy, basis_size: 8, ..Default::default() };
                let r = smallest_gen_eig_schur(mv.clone(), &b, &mu, &opts).unwrap();
                assert!((r.lambda_min - oracle).abs() <= 1e-8 * oracle, "{strategy:?} {} {}", r.lambda_min, oracle);
                assert!(r.residual <= 1e-8);
            }
        }
    }

    #[test]
    fn schur_pencil_scales_quadratically_and_ignores_seed() {
        let (mv, b, mu) = random_schur_instance(7, 15, 8);
        let base = smallest_gen_eig_schur(mv.clone(), &b, &mu, &EigenOptions::default()).unwrap();
        let scaled = smallest_gen_eig_schur(mv.clone(), &b.scaled(c(0.0, 3.0)), &mu, &EigenOptions::default()).unwrap();
        assert!((scaled.lambda_min - 9.0 * base.lambda_min).abs() < 1e-8 * scaled.lambda_min);
        let other = EigenOptions { seed: 99, ..Default::default() };
        let reseeded = smallest_gen_eig_schur(mv.clone(), &b, &mu, &other).unwrap();
        assert!((reseeded.lambda_min - base.lambda_min).abs() < 1e-8 * base.lambda_min);
    }

    #[test]
    fn saddle_solvers_agree() {
        let (mv, b, mu) = random_schur_instance(3, 25, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_dense(&mut rng, 25, 1);
        let g = random_dense(&mut rng, 10, 1);
        let direct = SaddleSolver::new(&mv, &b, &mu, SaddleStrategy::Direct).unwrap().solve(&f, &g).unwrap();
        let schur = SaddleSolver::new(&mv, &b, &mu, SaddleStrategy::Schur).unwrap().solve(&f, &g).unwrap();
        for (x, y) in direct.v.iter().zip(&schur.v).chain(direct.u.iter().zip(&schur.u)) {
            assert!((x - y).norm() < 1e-9);
        }
        let r1: Vec<C64> = mv
            .mul_vec(&direct.v)
            .iter()
            .zip(b.mul_vec(&direct.u))
            .zip(&f)
            .map(|((a, b), f)| a + b - f)
            .collect();
        assert!(norm(&r1) < 1e-10 * norm(&f));
    }

    #[test]
    fn galerkin_pencil_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (nx, ny) = (8, 14);
        let lt = from_dense(&random_dense(&mut rng, nx, ny), nx, ny);
        let l = from_dense(&random_dense(&mut rng, nx, nx), nx, nx);
        let mx = random_hpd(&mut rng, nx, 1.0);
        let my = random_hpd(&mut rng, ny, 1.0);
        let inner = to_mat(&lt) * to_mat(&my).partial_piv_lu().solve(to_mat(&lt).adjoint().to_owned());
        let g = to_mat(&l).adjoint() * inner.partial_piv_lu().solve(to_mat(&l));
        let oracle = dense_pencil_min(&g, &to_mat(&mx));
        let r = smallest_gen_eig_galerkin(&l, &lt, &mx, &my, &EigenOptions::default()).unwrap();
        assert!((r.lambda_min - oracle).abs() <= 1e-8 * oracle);
    }

    #[test]
    fn galerkin_degenerate_nesting() {
        // Y = X: the pencil is (L^H (L M^{-1} L^H)^{-1} L, M), whose
        // eigenvalues are all one.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let l = from_dense(&random_dense(&mut rng, 6, 6), 6, 6);
        let m = random_hpd(&mut rng, 6, 1.0);
        let r = smallest_gen_eig_galerkin(&l, &l, &m, &m, &EigenOptions::default()).unwrap();
        assert!((r.lambda_min - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rank_deficient_b_is_flagged() {
        let mv = CscMatrix::identity(2);
        let b = CscMatrix::from_triplets(2, 2, &[(0, 0, c(1.0, 0.0)), (0, 1, c(1.0, 0.0))]);
        let mu = CscMatrix::identity(2);
        let opts = EigenOptions { strategy: SaddleStrategy::Schur, ..Default::default() };
        assert!(smallest_gen_eig_schur(mv.clone(), &b, &mu, &opts).is_err());
        assert!(smallest_gen_eig_schur(mv.clone(), &b, &mu, &EigenOptions::default()).is_err());
    }
}
