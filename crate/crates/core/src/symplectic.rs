//! Lagrangian subspaces of the standard symplectic space `ℝ^{2n}`, their
//! conjugations, the Souriau map and chart transition functions.
//!
//! Coordinates are `(x_1..x_n, y_1..y_n)` with `J(x, y) = (−y, x)`, so that
//! `(x, y) ↦ x + i·y` identifies `ℝ^{2n}` with the complex space `H_J` on
//! which `J` acts as multiplication by `i`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, RMat, C64};
use crate::operator::BlockOperator;

/// Default threshold on `1 − cos(angle)` for counting a principal angle as
/// an intersection direction.
pub const DEFAULT_ANGLE_TOL: f64 = 1e-10;

const ORTHO_TOL: f64 = 1e-10;
const J_COMMUTATION_TOL: f64 = 1e-9;

/// The standard symplectic model of real dimension `2n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticModel {
    pub n: usize,
}

impl SymplecticModel {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    /// The complex structure `J`.
    pub fn j(&self) -> RMat {
        let n = self.n;
        let mut j = RMat::zeros(2 * n, 2 * n);
        for k in 0..n {
            j[(n + k, k)] = 1.0;
            j[(k, n + k)] = -1.0;
        }
        j
    }

    /// `ω(x, y) = <J x, y>`.
    pub fn omega(&self, x: &[f64], y: &[f64]) -> f64 {
        let jx = self.j() * nalgebra::DVector::from_column_slice(x);
        jx.dot(&nalgebra::DVector::from_column_slice(y))
    }

    /// Hermitian product `<x, y> − i<J x, y>`.
    pub fn hermitian(&self, x: &[f64], y: &[f64]) -> C64 {
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        C64::new(dot, -self.omega(x, y))
    }
}

/// Map a real vector of `ℝ^{2n}` to `H_J = ℂ^n`.
pub fn to_hj(v: &[f64]) -> CVec {
    let n = v.len() / 2;
    CVec::from_fn(n, |k, _| C64::new(v[k], v[n + k]))
}

/// Complex `n×n` matrix of a real `2n×2n` matrix commuting with `J`.
pub fn complexify(m: &RMat) -> Result<CMat> {
    let n = m.nrows() / 2;
    let j = SymplecticModel::new(n).j();
    let residual = (m * &j - &j * m).norm();
    if residual > J_COMMUTATION_TOL * m.norm().max(1.0) {
        return Err(Error::Internal(format!(
            "matrix does not commute with J (residual {residual:.3e})"
        )));
    }
    Ok(CMat::from_fn(n, n, |r, c| C64::new(m[(r, c)], m[(n + r, c)])))
}

/// Lagrangian subspace given by a real `2n×n` orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame {
    columns: RMat,
}

impl LagrangianFrame {
    /// Validate a spanning set of columns. Already-orthonormal columns are
    /// kept verbatim; anything else is orthonormalised first.
    pub fn new(columns: RMat) -> Result<Self> {
        let rows = columns.nrows();
        let n = columns.ncols();
        if n == 0 || rows != 2 * n {
            return Err(Error::validation(format!(
                "a Lagrangian frame in R^2n needs shape 2n x n, got {rows}x{n}"
            )));
        }
        if columns.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("frame has non-finite entries"));
        }
        let gram_err = (columns.transpose() * &columns - RMat::identity(n, n)).norm();
        let columns = if gram_err <= 1e-12 {
            columns
        } else {
            let qr = columns.clone().qr();
            let r = qr.r();
            let scale = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
            if scale == 0.0 || (0..n).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
                return Err(Error::validation("frame columns are linearly dependent"));
            }
            qr.q()
        };
        let j = SymplecticModel::new(n).j();
        let iso = (columns.transpose() * &j * &columns).norm();
        if iso > ORTHO_TOL {
            return Err(Error::validation(format!(
                "span is not isotropic (|F^T J F| = {iso:.3e})"
            )));
        }
        Ok(Self { columns })
    }

    /// The Lagrangian `U·ℝ^n` for a unitary `U` on `ℂ^n`.
    pub fn from_unitary(u: &CMat) -> Result<Self> {
        let n = u.nrows();
        let cols = RMat::from_fn(2 * n, n, |r, c| {
            if r < n {
                u[(r, c)].re
            } else {
                u[(r - n, c)].im
            }
        });
        Self::new(cols)
    }

    /// The line at angle `phi` from the x-axis in `ℝ²`.
    pub fn line(phi: f64) -> Self {
        Self {
            columns: RMat::from_column_slice(2, 1, &[phi.cos(), phi.sin()]),
        }
    }

    pub fn n(&self) -> usize {
        self.columns.ncols()
    }

    pub fn model(&self) -> SymplecticModel {
        SymplecticModel::new(self.n())
    }

    pub fn columns(&self) -> &RMat {
        &self.columns
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> RMat {
        &self.columns * self.columns.transpose()
    }

    /// The orthogonal complement, which for a Lagrangian is `J(λ)`.
    pub fn perp(&self) -> LagrangianFrame {
        Self {
            columns: self.model().j() * &self.columns,
        }
    }

    /// Distance between the spanned subspaces (operator norm of the
    /// projector difference, the sine of the largest principal angle).
    pub fn subspace_distance(&self, other: &LagrangianFrame) -> f64 {
        linalg::op_norm(&linalg::to_complex(&(self.projector() - other.projector())))
    }

    fn same_model(&self, other: &LagrangianFrame) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::validation(format!(
                "frames live in different models (n = {} and {})",
                self.n(),
                other.n()
            )));
        }
        Ok(())
    }
}

/// Projector onto `λ` and the conjugation `τ = 2P − Id`.
pub fn conjugation(lambda: &LagrangianFrame) -> (RMat, RMat) {
    let p = lambda.projector();
    let m = p.nrows();
    let tau = &p * 2.0 - RMat::identity(m, m);
    (p, tau)
}

/// The unitary `S_λ(μ) = −τ_μ∘τ_λ` as a complex `n×n` matrix.
pub fn souriau(lambda: &LagrangianFrame, mu: &LagrangianFrame) -> Result<CMat> {
    lambda.same_model(mu)?;
    let (_, tl) = conjugation(lambda);
    let (_, tm) = conjugation(mu);
    complexify(&(-(tm * tl)))
}

/// `q_λ(μ) = Id + S_λ(μ)` as a block operator.
pub fn q_map(lambda: &LagrangianFrame, mu: &LagrangianFrame) -> Result<BlockOperator> {
    let s = souriau(lambda, mu)?;
    let n = s.nrows();
    BlockOperator::new(s + CMat::identity(n, n))
}

/// `p_λ(μ) = P(μ^⊥) + P(λ^⊥)`.
pub fn p_map(lambda: &LagrangianFrame, mu: &LagrangianFrame) -> Result<RMat> {
    lambda.same_model(mu)?;
    Ok(mu.perp().projector() + lambda.perp().projector())
}

/// Intersection and co-intersection dimensions of a pair of Lagrangians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairData {
    pub dim_intersection: usize,
    pub dim_cointersection: usize,
}

fn count_below(values: &[f64], tol: f64, what: &str) -> Result<usize> {
    let band = (tol / 10f64.sqrt(), tol * 10f64.sqrt());
    let mut count = 0;
    for &v in values {
        if v >= band.0 && v < band.1 {
            return Err(Error::IllConditioned(format!(
                "{what} {v:.3e} is within a factor sqrt(10) of the threshold {tol:.1e}"
            )));
        }
        if v < tol {
            count += 1;
        }
    }
    Ok(count)
}

/// `1 − cos` of the principal angles between `λ` and `μ`, computed from the
/// sines for accuracy at small angles.
pub fn principal_angle_defects(lambda: &LagrangianFrame, mu: &LagrangianFrame) -> Vec<f64> {
    let m = lambda.columns().nrows();
    let residual = (RMat::identity(m, m) - lambda.projector()) * mu.columns();
    let sines = linalg::singular_values(&linalg::to_complex(&residual));
    sines
        .iter()
        .map(|&s| {
            let s = s.min(1.0);
            let c = (1.0 - s * s).max(0.0).sqrt();
            s * s / (1.0 + c)
        })
        .collect()
}

/// Largest principal angle between the two subspaces.
pub fn max_principal_angle(lambda: &LagrangianFrame, mu: &LagrangianFrame) -> f64 {
    let m = lambda.columns().nrows();
    let residual = (RMat::identity(m, m) - lambda.projector()) * mu.columns();
    let s = linalg::op_norm(&linalg::to_complex(&residual)).min(1.0);
    s.asin()
}

/// Smallest principal angle; zero exactly when the subspaces intersect.
pub fn min_principal_angle(lambda: &LagrangianFrame, mu: &LagrangianFrame) -> f64 {
    let d = principal_angle_defects(lambda, mu)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    // 1 − cos θ = 2 sin²(θ/2)
    2.0 * (d / 2.0).sqrt().min(1.0).asin()
}

pub fn pair_data(lambda: &LagrangianFrame, mu: &LagrangianFrame, tol: f64) -> Result<PairData> {
    lambda.same_model(mu)?;
    let n = lambda.n();
    let dim_intersection = count_below(&principal_angle_defects(lambda, mu), tol, "principal angle defect")?;
    // singular values of [F_λ | F_μ] are sqrt(1 ± cos θ_i)
    let stacked = RMat::from_fn(2 * n, 2 * n, |r, c| {
        if c < n {
            lambda.columns()[(r, c)]
        } else {
            mu.columns()[(r, c - n)]
        }
    });
    let sq: Vec<f64> = linalg::singular_values(&linalg::to_complex(&stacked))
        .iter()
        .map(|s| s * s)
        .collect();
    let deficiency = count_below(&sq, tol, "squared singular value of [F_λ|F_μ]")?;
    let rank = 2 * n - deficiency;
    Ok(PairData {
        dim_intersection,
        dim_cointersection: 2 * n - rank,
    })
}

/// The symmetric matrix `T_θ` (in the basis of `μ`'s frame) with
/// `θ = {x + J(T_θ x) : x ∈ μ}`.
pub fn graph_operator(theta: &LagrangianFrame, mu: &LagrangianFrame) -> Result<RMat> {
    theta.same_model(mu)?;
    let fm = mu.columns();
    let jfm = mu.model().j() * fm;
    let x = fm.transpose() * theta.columns();
    let y = jfm.transpose() * theta.columns();
    let s = linalg::singular_values(&linalg::to_complex(&x));
    if s.last().copied().unwrap_or(0.0) < 1e-8 {
        return Err(Error::domain(
            "θ meets J(μ) nontrivially, so it is not a graph over μ",
        ));
    }
    let x_inv = x.try_inverse().ok_or_else(|| Error::domain("graph coordinates are singular"))?;
    Ok(y * x_inv)
}

/// How to read the chart transition determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartMode {
    /// Determinant of the complex-linear composition on `H_J`.
    ComplexOnHj,
    /// Determinant of the same composition as a real `2n×2n` matrix.
    RealLinear,
}

fn ensure_transversal(theta: &LagrangianFrame, mu: &LagrangianFrame, label: &str) -> Result<RMat> {
    let (_, tt) = conjugation(theta);
    let (_, tm) = conjugation(mu);
    let diff = tt - tm;
    let smin = linalg::smallest_singular_value(&linalg::to_complex(&diff));
    if smin < 1e-10 {
        return Err(Error::domain(format!(
            "μ is not transversal to {label} (smallest singular value of τ_{label}−τ_μ is {smin:.3e})"
        )));
    }
    Ok(diff)
}

/// The composition `(τ_θ − τ_μ)(τ_θ2 − τ_μ)^{-1}` as a real matrix.
pub fn chart_composition(
    theta: &LagrangianFrame,
    theta2: &LagrangianFrame,
    mu: &LagrangianFrame,
) -> Result<RMat> {
    theta.same_model(mu)?;
    theta2.same_model(mu)?;
    let a = ensure_transversal(theta, mu, "θ")?;
    let b = ensure_transversal(theta2, mu, "θ2")?;
    let b_inv = b
        .try_inverse()
        .ok_or_else(|| Error::domain("τ_θ2 − τ_μ is singular"))?;
    Ok(a * b_inv)
}

/// Transition function between the charts centred at `θ` and `θ2`, evaluated at `μ`.
pub fn chart_transition(
    theta: &LagrangianFrame,
    theta2: &LagrangianFrame,
    mu: &LagrangianFrame,
    mode: ChartMode,
) -> Result<C64> {
    let m = chart_composition(theta, theta2, mu)?;
    match mode {
        ChartMode::RealLinear => Ok(C64::new(m.determinant(), 0.0)),
        ChartMode::ComplexOnHj => Ok(complexify(&m)?.determinant()),
    }
}

/// The four determinants compared in the chart-compatibility identity, plus
/// the determinant checks on the unipotent factor.
#[derive(Debug, Clone)]
pub struct Prop5Quadruple {
    /// `(Pθ−Pμ)(Pθ2−Pμ)^{-1}`, its `⊥` version, `(Pθ+Pμ)(Pθ2+Pμ)^{-1}`, its `⊥` version.
    pub terms: [f64; 4],
    /// `det` of `(Pθ−Pμ)(Pθ+Pμ)^{-1}·(Pθ2−Pμ)(Pθ2+Pμ)^{-1}`.
    pub unipotent_det: f64,
    /// Distance of that product from block-unitriangular form in the
    /// splitting `μ ⊕ J(μ)`.
    pub unipotent_residual: f64,
    /// `det [[I, 0], [T_θ − T_θ2, I]]` when both are graphs over `μ`.
    pub graph_block_det: Option<f64>,
}

impl Prop5Quadruple {
    /// Largest pairwise relative difference among the four terms.
    pub fn spread(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let a = self.terms[i];
                let b = self.terms[j];
                let scale = a.abs().max(b.abs());
                if scale > 0.0 {
                    worst = worst.max((a - b).abs() / scale);
                }
            }
        }
        worst
    }
}

fn ratio_det(num: &RMat, den: &RMat, what: &str) -> Result<f64> {
    let d = den.clone().lu().determinant();
    if d == 0.0 || !d.is_finite() {
        return Err(Error::domain(format!("{what} is singular")));
    }
    Ok(num.clone().lu().determinant() / d)
}

pub fn prop5_quadruple(
    theta: &LagrangianFrame,
    theta2: &LagrangianFrame,
    mu: &LagrangianFrame,
) -> Result<Prop5Quadruple> {
    theta.same_model(mu)?;
    theta2.same_model(mu)?;
    ensure_transversal(theta, mu, "θ")?;
    ensure_transversal(theta2, mu, "θ2")?;
    let pt = theta.projector();
    let pt2 = theta2.projector();
    let pm = mu.projector();
    let qt = theta.perp().projector();
    let qt2 = theta2.perp().projector();
    let qm = mu.perp().projector();

    let terms = [
        ratio_det(&(&pt - &pm), &(&pt2 - &pm), "Pθ2 − Pμ")?,
        ratio_det(&(&qt - &qm), &(&qt2 - &qm), "P(θ2⊥) − P(μ⊥)")?,
        ratio_det(&(&pt + &pm), &(&pt2 + &pm), "Pθ2 + Pμ")?,
        ratio_det(&(&qt + &qm), &(&qt2 + &qm), "P(θ2⊥) + P(μ⊥)")?,
    ];

    let cayley = |p: &RMat| -> Result<RMat> {
        let inv = (p + &pm)
            .try_inverse()
            .ok_or_else(|| Error::domain("Pθ + Pμ is singular"))?;
        Ok((p - &pm) * inv)
    };
    let product = cayley(&pt)? * cayley(&pt2)?;
    let n = mu.n();
    let basis = {
        let fm = mu.columns();
        let jfm = mu.model().j() * fm;
        let mut b = RMat::zeros(2 * n, 2 * n);
        b.view_mut((0, 0), (2 * n, n)).copy_from(fm);
        b.view_mut((0, n), (2 * n, n)).copy_from(&jfm);
        b
    };
    let split = basis.transpose() * &product * &basis;
    let eye = RMat::identity(n, n);
    let unipotent_residual = [
        (split.view((0, 0), (n, n)) - &eye).norm(),
        (split.view((n, n), (n, n)) - &eye).norm(),
        split.view((n, 0), (n, n)).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let graph_block_det = match (graph_operator(theta, mu), graph_operator(theta2, mu)) {
        (Ok(t1), Ok(t2)) => {
            let mut block = RMat::identity(2 * n, 2 * n);
            block.view_mut((n, 0), (n, n)).copy_from(&(t1 - t2));
            Some(block.determinant())
        }
        _ => None,
    };

    Ok(Prop5Quadruple {
        terms,
        unipotent_det: ratio_det(&(&pt - &pm), &(&pt + &pm), "Pθ + Pμ")?
            * ratio_det(&(&pt2 - &pm), &(&pt2 + &pm), "Pθ2 + Pμ")?,
        unipotent_residual,
        graph_block_det,
    })
}

/// A sampled path of Lagrangian subspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianPath {
    frames: Vec<LagrangianFrame>,
    closed: bool,
}

/// Consecutive samples must be closer than this largest principal angle.
pub const MAX_PATH_STEP: f64 = PI / 8.0;

impl LagrangianPath {
    pub fn new(frames: Vec<LagrangianFrame>, closed: bool) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::validation("a path needs at least one frame"));
        };
        if frames.iter().any(|f| f.n() != first.n()) {
            return Err(Error::validation("path frames live in different models"));
        }
        for (i, w) in frames.windows(2).enumerate() {
            let angle = max_principal_angle(&w[0], &w[1]);
            if angle >= MAX_PATH_STEP {
                return Err(Error::Undersampled(format!(
                    "frames {i} and {} are {angle:.3} rad apart (limit pi/8)",
                    i + 1
                )));
            }
        }
        if closed {
            let last = frames.last().expect("non-empty");
            let gap = first.subspace_distance(last);
            if gap > 1e-9 {
                return Err(Error::validation(format!(
                    "path is marked closed but its endpoints differ by {gap:.3e}"
                )));
            }
        }
        Ok(Self { frames, closed })
    }

    /// Sample `f` at `samples + 1` uniform points of `[0, 1]`.
    pub fn sample(f: impl Fn(f64) -> LagrangianFrame, samples: usize, closed: bool) -> Result<Self> {
        let frames = (0..=samples).map(|i| f(i as f64 / samples as f64)).collect();
        Self::new(frames, closed)
    }

    pub fn frames(&self) -> &[LagrangianFrame] {
        &self.frames
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Traverse `self` then `other`; the junction sample is kept once.
    pub fn concat(&self, other: &LagrangianPath) -> Result<Self> {
        let last = self.frames.last().expect("non-empty");
        let first = other.frames.first().expect("non-empty");
        if last.subspace_distance(first) > 1e-9 {
            return Err(Error::validation("paths do not meet at the junction"));
        }
        let mut frames = self.frames.clone();
        frames.extend(other.frames.iter().skip(1).cloned());
        Self::new(frames, self.closed && other.closed)
    }

    pub fn reversed(&self) -> Self {
        let mut frames = self.frames.clone();
        frames.reverse();
        Self {
            frames,
            closed: self.closed,
        }
    }
}

/// Winding number of `t ↦ det S_λ(μ(t))`, counter-clockwise positive.
pub fn maslov_index(lambda: &LagrangianFrame, path: &LagrangianPath) -> Result<i64> {
    if !path.is_closed() {
        return Err(Error::validation("the Maslov index is defined for closed paths"));
    }
    let phases = path
        .frames()
        .iter()
        .map(|mu| souriau(lambda, mu).map(|s| s.determinant().arg()))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for (i, w) in phases.windows(2).enumerate() {
        let step = linalg::wrap_phase(w[1] - w[0]);
        if step.abs() >= PI / 2.0 {
            return Err(Error::Undersampled(format!(
                "phase of det S jumps by {step:.3} rad between samples {i} and {}",
                i + 1
            )));
        }
        total += step;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Convert a complex unitary into the real `2n×2n` matrix acting on `ℝ^{2n}`.
pub fn realify(u: &CMat) -> RMat {
    let n = u.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = u[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}
