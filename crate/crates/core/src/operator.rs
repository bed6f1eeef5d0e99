//! Finite-block operators: a matrix on the leading coordinates of a sequence
//! space, extended by the identity on every higher coordinate.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE};

/// Default relative rank cutoff for kernel detection.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Default relative tolerance for comparing complex scalars.
pub const DEFAULT_DET_TOL: f64 = 1e-10;

/// `M ⊕ Id`: acts as `M` on coordinates `0..n` and as the identity beyond.
///
/// Every such operator is Fredholm of index zero, so there is no separate
/// index check beyond squareness.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    block: CMat,
}

/// A finite-rank perturbation supported on the leading block.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceClassPerturbation {
    block: CMat,
}

fn validate_square(m: &CMat, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::validation(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !linalg::is_finite(m) {
        return Err(Error::validation(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn matrix_from_rows(rows: &[Vec<C64>], what: &str) -> Result<CMat> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::validation(format!(
            "{what} is not square: {n} rows but a row of length {}",
            bad.len()
        )));
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j]))
}

impl BlockOperator {
    pub fn new(block: CMat) -> Result<Self> {
        validate_square(&block, "block operator")?;
        Ok(Self { block })
    }

    /// Build from row-major complex entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows, "block operator")?)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            block: CMat::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.block.nrows()
    }

    pub fn block(&self) -> &CMat {
        &self.block
    }

    /// Block of the same operator written on `n >= self.n()` coordinates.
    pub fn block_at(&self, n: usize) -> CMat {
        linalg::pad_identity(&self.block, n.max(self.n()))
    }

    /// Replace the block `M` by `M ⊕ I_k`; the operator itself is unchanged.
    pub fn pad(&self, k: usize) -> Self {
        Self {
            block: linalg::pad_identity(&self.block, self.n() + k),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &BlockOperator) -> Self {
        let n = self.n().max(other.n());
        Self {
            block: self.block_at(n) * other.block_at(n),
        }
    }

    /// `T + K` for a perturbation supported on the leading block.
    pub fn perturbed(&self, pert: &TraceClassPerturbation) -> Self {
        let n = self.n().max(pert.n());
        Self {
            block: self.block_at(n) + pert.block_at(n),
        }
    }

    /// `W T W*` for a unitary `W` acting on the leading `W.nrows()` coordinates.
    pub fn conjugated(&self, w: &CMat) -> Self {
        let n = self.n().max(w.nrows());
        let w = linalg::pad_identity(w, n);
        Self {
            block: &w * self.block_at(n) * w.adjoint(),
        }
    }

    /// Operator norm of the full operator, `max(‖M‖, 1)`.
    pub fn op_norm(&self) -> f64 {
        linalg::op_norm(&self.block).max(1.0)
    }

    pub fn smallest_singular_value(&self) -> f64 {
        linalg::smallest_singular_value(&self.block).min(1.0)
    }

    /// Invertibility with the same relative cutoff as kernel detection.
    pub fn is_invertible(&self, tol: f64) -> bool {
        self.smallest_singular_value() >= tol * self.op_norm()
    }

    pub fn inverse(&self) -> Option<Self> {
        linalg::inverse(&self.block).map(|block| Self { block })
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermitian_residual(&self.block) <= tol * self.op_norm()
    }

    /// Fredholm determinant of `Id + K` with `K = M - I`, as `∏(1 + λ_i)`
    /// over the eigenvalues of `K`.
    ///
    /// The eigenvalue product is cross-checked against an LU determinant of
    /// the block; if the two disagree beyond [`DEFAULT_DET_TOL`] the LU value
    /// is returned.
    pub fn fredholm_det(&self) -> C64 {
        let routes = self.det_routes();
        if routes.agree(DEFAULT_DET_TOL) {
            routes.eigen_product
        } else {
            routes.block_det
        }
    }

    pub fn det_routes(&self) -> DetRoutes {
        let n = self.n();
        let k = &self.block - CMat::identity(n, n);
        let eigen_product = match k.clone().schur().eigenvalues() {
            Some(ev) => ev.iter().fold(ONE, |acc, lam| acc * (ONE + lam)),
            None => C64::new(f64::NAN, f64::NAN),
        };
        let block_det = self.block.determinant();
        let scale = self
            .block
            .column_iter()
            .map(|c| c.norm().max(1.0))
            .product::<f64>();
        DetRoutes {
            eigen_product,
            block_det,
            scale,
        }
    }

    /// Kernel and cokernel of the operator from the singular value
    /// decomposition of its block, with the relative cutoff `tol`.
    pub fn kernel_cokernel(&self, tol: f64) -> Result<KernelCokernelData> {
        if !(tol > 0.0) {
            return Err(Error::validation("rank tolerance must be positive"));
        }
        let n = self.n();
        let svd = linalg::svd(&self.block);
        let reference = svd.sigma.first().copied().unwrap_or(0.0).max(1.0);
        let band = (tol / 10f64.sqrt(), tol * 10f64.sqrt());
        let mut small = Vec::new();
        for (i, s) in svd.sigma.iter().enumerate() {
            let rel = s / reference;
            if rel >= band.0 && rel < band.1 {
                return Err(Error::IllConditioned(format!(
                    "singular value {s:.3e} (relative {rel:.3e}) lies within a factor \
                     sqrt(10) of the rank cutoff {tol:.1e}"
                )));
            }
            if rel < tol {
                small.push(i);
            }
        }
        let d = small.len();
        let kernel_vecs = CMat::from_fn(n, d, |r, c| svd.v[(r, small[c])]);
        // the left factor of a complex SVD can be loose on the null space, so
        // the cokernel comes from the right factor of the adjoint
        let adj = linalg::svd(&self.block.adjoint());
        let coker_vecs = CMat::from_fn(n, d, |r, c| adj.v[(r, n - d + c)]);
        let kernel_basis = linalg::projector_basis(&linalg::projector(&kernel_vecs), d);
        let cokernel_basis = linalg::projector_basis(&linalg::projector(&coker_vecs), d);
        let limit = 10.0 * tol * reference;
        let kres = (&self.block * &kernel_basis).norm();
        let cres = (cokernel_basis.adjoint() * &self.block).norm();
        if kres > limit || cres > limit {
            return Err(Error::Internal(format!(
                "null-space residuals {kres:.3e} (kernel) and {cres:.3e} (cokernel) exceed {limit:.1e}"
            )));
        }
        Ok(KernelCokernelData {
            kernel_basis,
            cokernel_basis,
            tol_used: tol,
        })
    }
}

/// The two determinant evaluations behind [`BlockOperator::fredholm_det`].
#[derive(Debug, Clone, Copy)]
pub struct DetRoutes {
    pub eigen_product: C64,
    pub block_det: C64,
    /// Hadamard bound on `|det|`, used to scale the comparison for nearly
    /// singular blocks.
    pub scale: f64,
}

impl DetRoutes {
    pub fn relative_gap(&self) -> f64 {
        let denom = self
            .eigen_product
            .norm()
            .max(self.block_det.norm())
            .max(self.scale * f64::EPSILON);
        if denom == 0.0 {
            0.0
        } else {
            (self.eigen_product - self.block_det).norm() / denom
        }
    }

    pub fn agree(&self, tol: f64) -> bool {
        self.relative_gap() <= tol
    }
}

impl TraceClassPerturbation {
    pub fn new(block: CMat) -> Result<Self> {
        validate_square(&block, "trace-class perturbation")?;
        Ok(Self { block })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows, "trace-class perturbation")?)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            block: CMat::zeros(n.max(1), n.max(1)),
        }
    }

    /// Finite-rank operator `Σ images_i ⊗ covectors_i*`.
    pub fn outer(images: &CMat, covectors: &CMat) -> Self {
        let n = images.nrows().max(covectors.nrows()).max(1);
        let d = images.ncols();
        let mut block = CMat::zeros(n, n);
        for i in 0..d {
            let a = linalg::pad_vec(&images.column(i).into_owned(), n);
            let b = linalg::pad_vec(&covectors.column(i).into_owned(), n);
            block += a * b.adjoint();
        }
        Self { block }
    }

    pub fn n(&self) -> usize {
        self.block.nrows()
    }

    pub fn block(&self) -> &CMat {
        &self.block
    }

    pub fn block_at(&self, n: usize) -> CMat {
        linalg::pad_zero(&self.block, n.max(self.n()))
    }

    pub fn pad(&self, k: usize) -> Self {
        Self {
            block: linalg::pad_zero(&self.block, self.n() + k),
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            block: &self.block * c,
        }
    }

    pub fn conjugated(&self, w: &CMat) -> Self {
        let n = self.n().max(w.nrows());
        let w = linalg::pad_identity(w, n);
        Self {
            block: &w * self.block_at(n) * w.adjoint(),
        }
    }

    pub fn difference(&self, other: &TraceClassPerturbation) -> Self {
        let n = self.n().max(other.n());
        Self {
            block: self.block_at(n) - other.block_at(n),
        }
    }

    /// `Id + K` as a block operator.
    pub fn shifted_identity(&self) -> BlockOperator {
        BlockOperator {
            block: &self.block + CMat::identity(self.n(), self.n()),
        }
    }

    /// Sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        linalg::singular_values(&self.block).iter().sum()
    }
}

/// `‖K − K2‖₁ · exp(1 + ‖K‖₁ + ‖K2‖₁)`, an upper bound on
/// `|det_F(Id + K) − det_F(Id + K2)|`.
pub fn det_difference_bound(k: &TraceClassPerturbation, k2: &TraceClassPerturbation) -> f64 {
    let gap = k.difference(k2).trace_norm();
    if gap == 0.0 {
        return 0.0;
    }
    gap * (1.0 + k.trace_norm() + k2.trace_norm()).exp()
}

/// Kernel and cokernel representatives of a block operator.
///
/// Both bases are orthonormal and canonical: they depend only on the spanned
/// subspaces, so padding the operator leaves them unchanged up to trailing
/// zeros.
#[derive(Debug, Clone)]
pub struct KernelCokernelData {
    pub kernel_basis: CMat,
    pub cokernel_basis: CMat,
    pub tol_used: f64,
}

impl KernelCokernelData {
    pub fn dim(&self) -> usize {
        self.kernel_basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.kernel_basis.nrows()
    }

    /// Orthogonal projector onto the kernel.
    pub fn kernel_projector(&self) -> CMat {
        linalg::projector(&self.kernel_basis)
    }

    pub fn cokernel_projector(&self) -> CMat {
        linalg::projector(&self.cokernel_basis)
    }

    /// Coordinates of `v` in the cokernel basis (the quotient map onto
    /// `Coker T` realised on the orthogonal complement of the image).
    pub fn rho(&self, v: &CVec) -> CVec {
        let v = if v.len() < self.ambient_dim() {
            linalg::pad_vec(v, self.ambient_dim())
        } else {
            v.rows(0, self.ambient_dim()).into_owned()
        };
        self.cokernel_basis.adjoint() * v
    }

    /// Matrix of `rho` applied column-wise.
    pub fn rho_matrix(&self, vs: &CMat) -> CMat {
        let n = self.ambient_dim();
        let mut padded = CMat::zeros(n, vs.ncols());
        let rows = vs.nrows().min(n);
        padded
            .view_mut((0, 0), (rows, vs.ncols()))
            .copy_from(&vs.view((0, 0), (rows, vs.ncols())));
        self.cokernel_basis.adjoint() * padded
    }

    pub fn pad(&self, k: usize) -> Self {
        let n = self.ambient_dim() + k;
        let grow = |m: &CMat| {
            let mut out = CMat::zeros(n, m.ncols());
            out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
            out
        };
        Self {
            kernel_basis: grow(&self.kernel_basis),
            cokernel_basis: grow(&self.cokernel_basis),
            tol_used: self.tol_used,
        }
    }
}
