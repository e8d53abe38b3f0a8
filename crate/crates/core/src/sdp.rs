//! Small dense semidefinite programs over Hermitian matrices.
//!
//! The standard form is
//!
//! ```text
//! minimize    Tr(C X)
//! subject to  Tr(A_k X) = b_k,  k = 1..K
//!             X Hermitian positive semidefinite
//! ```
//!
//! [`InteriorPoint`] solves it with a primal-dual path-following method (HKM
//! search direction, Mehrotra predictor-corrector) on the real symmetric
//! embedding `[[Re X, -Im X], [Im X, Re X]]`. [`solve_proximal`] handles the
//! trace-constrained proximal problem in closed form.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DVector, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numerics::{self, hermitian_part, CMatrix, CVector, RMatrix, C64};

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConstraint {
    pub a: CMatrix,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub dim: usize,
    pub cost: CMatrix,
    pub constraints: Vec<TraceConstraint>,
}

fn hermitian_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm() / (1.0 + a.norm())
}

impl SdpProblem {
    pub fn new(cost: CMatrix, constraints: Vec<TraceConstraint>) -> Result<Self> {
        let dim = cost.nrows();
        if dim == 0 || cost.ncols() != dim {
            return Err(Error::Dimension("cost must be square and nonempty".into()));
        }
        if dim > MAX_DIM {
            return Err(Error::SdpUnsupported("dimension above 64"));
        }
        if constraints.is_empty() {
            return Err(Error::SdpUnsupported("at least one trace constraint is required"));
        }
        if hermitian_defect(&cost) > 1e-12 {
            return Err(Error::Dimension("cost is not Hermitian".into()));
        }
        for (k, c) in constraints.iter().enumerate() {
            if c.a.shape() != (dim, dim) {
                return Err(Error::Dimension(format!("constraint {k} has wrong shape")));
            }
            if hermitian_defect(&c.a) > 1e-12 {
                return Err(Error::Dimension(format!("constraint {k} is not Hermitian")));
            }
        }
        Ok(SdpProblem {
            dim,
            cost,
            constraints,
        })
    }

    pub fn objective(&self, x: &CMatrix) -> f64 {
        numerics::trace_product(&self.cost, x).re
    }

    /// Largest absolute constraint violation at `x`.
    pub fn residual(&self, x: &CMatrix) -> f64 {
        self.constraints
            .iter()
            .map(|c| (numerics::trace_product(&c.a, x).re - c.b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: CMatrix,
    /// Dual multipliers, one per constraint.
    pub y: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// Largest absolute constraint violation.
    pub residual: f64,
    pub iterations: usize,
}

/// Boundary where an external solver could be substituted.
pub trait SdpSolver {
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorPoint {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        InteriorPoint {
            tol: 1e-9,
            max_iter: 100,
        }
    }
}

impl SdpSolver for InteriorPoint {
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution> {
        solve(problem, self.tol, self.max_iter)
    }
}

/// Real symmetric embedding `[[Re A, -Im A], [Im A, Re A]]`.
pub fn embed_real(a: &CMatrix) -> RMatrix {
    let n = a.nrows();
    let m = a.ncols();
    let mut out = RMatrix::zeros(2 * n, 2 * m);
    for i in 0..n {
        for j in 0..m {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + m)] = z.re;
            out[(i, j + m)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`embed_real`]; averages the two copies, which also projects an
/// arbitrary real matrix onto the embedded subspace.
pub fn unembed_real(r: &RMatrix) -> CMatrix {
    let n = r.nrows() / 2;
    let m = r.ncols() / 2;
    CMatrix::from_fn(n, m, |i, j| {
        C64::new(
            0.5 * (r[(i, j)] + r[(i + n, j + m)]),
            0.5 * (r[(i + n, j)] - r[(i, j + m)]),
        )
    })
}

fn sym(a: &RMatrix) -> RMatrix {
    (a + a.transpose()) * 0.5
}

fn inner(a: &RMatrix, b: &RMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Largest `alpha` with `x + alpha dx` positive semidefinite, capped at 1e10.
fn max_step(x: &RMatrix, dx: &RMatrix) -> Result<f64> {
    let chol = Cholesky::new(x.clone()).ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: f64::NAN,
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
        })?;
    let m = sym(&(&linv * dx * linv.transpose()));
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 1000).ok_or(Error::NoConvergence {
        routine: "step length eigenvalues",
        iterations: 1000,
    })?;
    let lam_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if lam_min < 0.0 { (-1.0 / lam_min).min(1e10) } else { 1e10 })
}

/// Shrinks `alpha` until `x + alpha dx` passes a Cholesky test, guarding
/// against rounding near the boundary of the cone.
fn keep_definite(x: &RMatrix, dx: &RMatrix, mut alpha: f64) -> Result<f64> {
    for _ in 0..60 {
        if Cholesky::new(sym(&(x + dx * alpha))).is_some() {
            return Ok(alpha);
        }
        alpha *= 0.7;
    }
    Err(Error::SdpInfeasible("no step keeps the iterate definite"))
}

fn solve_spd(m: &RMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Ok(ch.solve(rhs));
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::SdpInfeasible("singular Schur complement"))
}

struct Embedded {
    c: RMatrix,
    a: Vec<RMatrix>,
    b: DVector<f64>,
}

impl Embedded {
    fn op(&self, x: &RMatrix) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|a| inner(a, x)))
    }

    fn adj(&self, y: &DVector<f64>) -> RMatrix {
        let n = self.c.nrows();
        let mut out = RMatrix::zeros(n, n);
        for (a, &yi) in self.a.iter().zip(y.iter()) {
            out += a * yi;
        }
        out
    }
}

/// Solves `problem` to relative primal, dual and gap tolerance `tol`.
pub fn solve(problem: &SdpProblem, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    let emb = Embedded {
        c: embed_real(&problem.cost) * 0.5,
        a: problem
            .constraints
            .iter()
            .map(|c| embed_real(&c.a) * 0.5)
            .collect(),
        b: DVector::from_iterator(problem.constraints.len(), problem.constraints.iter().map(|c| c.b)),
    };
    let n = emb.c.nrows();
    let nf = n as f64;
    let k = emb.a.len();
    let norm_b = emb.b.norm();
    let norm_c = emb.c.norm();
    let max_a = emb.a.iter().map(|a| a.norm()).fold(0.0, f64::max);

    let xi = emb
        .a
        .iter()
        .zip(emb.b.iter())
        .map(|(a, &b)| nf * (1.0 + b.abs()) / (1.0 + a.norm()))
        .fold(10f64.max(nf.sqrt()), f64::max);
    let eta = 10f64.max(nf.sqrt()).max(norm_c).max(max_a);
    let mut x = RMatrix::identity(n, n) * xi;
    let mut z = RMatrix::identity(n, n) * eta;
    let mut y = DVector::<f64>::zeros(k);
    let id = RMatrix::identity(n, n);

    let finish = |x: &RMatrix, y: &DVector<f64>, iterations: usize| {
        let xc = hermitian_part(&unembed_real(x));
        SdpSolution {
            objective: problem.objective(&xc),
            dual_objective: emb.b.dot(y),
            residual: problem.residual(&xc),
            y: y.iter().copied().collect(),
            x: xc,
            iterations,
        }
    };

    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for it in 0..max_iter {
        let rp = &emb.b - emb.op(&x);
        let rd = &emb.c - &z - emb.adj(&y);
        let pobj = inner(&emb.c, &x);
        let dobj = emb.b.dot(&y);
        let relp = rp.norm() / (1.0 + norm_b);
        let reld = rd.norm() / (1.0 + norm_c);
        let gap = inner(&x, &z) / (1.0 + pobj.abs() + dobj.abs());
        last = (relp, reld, gap);
        if relp <= tol && reld <= tol && gap <= tol {
            return Ok(finish(&x, &y, it));
        }
        if x.norm() > 1e12 || y.norm() > 1e12 {
            return Err(Error::SdpInfeasible("iterates diverged"));
        }
        if !(pobj.is_finite() && dobj.is_finite()) {
            return Err(Error::SdpInfeasible("non-finite objective"));
        }

        let zinv = Cholesky::new(z.clone())
            .ok_or(Error::SdpInfeasible("dual slack lost definiteness"))?
            .inverse();
        let mu = inner(&x, &z) / nf;
        let xa: Vec<RMatrix> = emb.a.iter().map(|a| &x * a * &zinv).collect();
        let mut schur = RMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                schur[(i, j)] = inner(&emb.a[i], &xa[j]);
            }
        }
        let schur = sym(&schur);
        let x_rd = &x * &rd;

        let direction = |rc: &RMatrix| -> Result<(RMatrix, DVector<f64>, RMatrix)> {
            let rhs = &rp - emb.op(&((rc - &x_rd) * &zinv));
            let dy = solve_spd(&schur, &rhs)?;
            let dz = &rd - emb.adj(&dy);
            let dx = sym(&((rc - &x * &dz) * &zinv));
            Ok((dx, dy, dz))
        };

        // predictor
        let xz = &x * &z;
        let (dxa, _, dza) = direction(&(-&xz))?;
        let ap = (0.95 * max_step(&x, &dxa)?).min(1.0);
        let ad = (0.95 * max_step(&z, &dza)?).min(1.0);
        let mu_aff = inner(&(&x + &dxa * ap), &(&z + &dza * ad)) / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let rc = &id * (sigma * mu) - &xz - &dxa * &dza;
        let (dx, dy, dz) = direction(&rc)?;
        let ap = keep_definite(&x, &dx, (0.95 * max_step(&x, &dx)?).min(1.0))?;
        let ad = keep_definite(&z, &dz, (0.95 * max_step(&z, &dz)?).min(1.0))?;
        x = sym(&(&x + &dx * ap));
        y += &dy * ad;
        z = sym(&(&z + &dz * ad));
    }
    Err(Error::SdpMaxIterations {
        iterations: max_iter,
        primal_residual: last.0,
        dual_residual: last.1,
        gap: last.2,
        best: alloc::boxed::Box::new(finish(&x, &y, max_iter)),
    })
}

/// Euclidean projection of `v` onto `{w >= 0, sum w = total}`.
pub fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - total) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Trace-constrained proximal problem
/// `min Tr(C Q) + (rho/2) ||Q - R||_F^2  s.t.  Tr Q = trace, Q >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximalProblem {
    pub cost: CMatrix,
    pub reference: CMatrix,
    pub rho: f64,
    pub trace: f64,
}

impl ProximalProblem {
    pub fn objective(&self, q: &CMatrix) -> f64 {
        numerics::trace_product(&self.cost, q).re + 0.5 * self.rho * (q - &self.reference).norm_squared()
    }
}

/// Exact minimiser: the projection of `R - C/rho` onto the scaled spectraplex.
pub fn solve_proximal(p: &ProximalProblem) -> Result<CMatrix> {
    if !(p.rho > 0.0) || !(p.trace > 0.0) {
        return Err(Error::SdpUnsupported("proximal problem needs rho > 0 and trace > 0"));
    }
    let v = hermitian_part(&(&p.reference - &p.cost * C64::new(1.0 / p.rho, 0.0)));
    let eig = numerics::eigh(&v)?;
    let w = project_simplex(&eig.values, p.trace);
    let mut scaled = eig.vectors.clone();
    for (k, &wk) in w.iter().enumerate() {
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= wk);
    }
    Ok(hermitian_part(&(scaled * eig.vectors.adjoint())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    /// `sqrt(lambda_max) v_max`.
    pub vector: CVector,
    /// `lambda_2 / lambda_1`, zero for an exact rank-one input.
    pub defect: f64,
}

pub fn rank_one_extract(x: &CMatrix) -> Result<RankOne> {
    let eig = numerics::eigh(x)?;
    let l1 = eig.values[0].max(0.0);
    let l2 = eig.values.get(1).copied().unwrap_or(0.0).max(0.0);
    let vector = eig.vectors.column(0).into_owned() * C64::new(l1.sqrt(), 0.0);
    let defect = if l1 > 0.0 { l2 / l1 } else { 0.0 };
    Ok(RankOne { vector, defect })
}

/// Rotates `q` by a global phase so that `r^H q` is real and non-negative.
pub fn align_phase(q: &CVector, r: &CVector) -> CVector {
    let ip = r.dotc(q);
    let ph = numerics::phase(ip);
    q * C64::from_polar(1.0, -ph)
}
