//! Sections and transition functions of the determinant line bundle, and
//! the map onto top exterior powers of kernel and cokernel.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, I};
use crate::operator::{BlockOperator, KernelCokernelData, TraceClassPerturbation};

/// A section of the determinant line over `T`, recorded by its value at one
/// anchor. The value at any other admissible perturbation follows from
/// [`extend_section`].
#[derive(Debug, Clone, PartialEq)]
pub struct SectionGerm {
    pub anchor: TraceClassPerturbation,
    pub value: C64,
}

impl SectionGerm {
    pub fn new(anchor: TraceClassPerturbation, value: C64) -> Self {
        Self { anchor, value }
    }
}

/// A linear map `L: Ker T → H`, given on a basis of the kernel, whose
/// composition with the cokernel quotient is invertible.
#[derive(Debug, Clone)]
pub struct Regularizer {
    pub domain_basis: CMat,
    pub images: CMat,
}

/// An element of `∧Ker(T)* ⊗ ∧Coker(T)`: the coefficient multiplies
/// `e_1* ∧ … ∧ e_d* ⊗ r_1 ∧ … ∧ r_d` where `e_i` are the kernel basis columns
/// and `r_i` the cokernel images (stored as orthogonal-complement
/// representatives).
#[derive(Debug, Clone)]
pub struct DetLineElement {
    pub kernel_basis: CMat,
    pub cokernel_images: CMat,
    pub coefficient: C64,
}

fn ensure_invertible(op: &BlockOperator, tol: f64, label: &str) -> Result<()> {
    if op.is_invertible(tol) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "T+{label} is not invertible (smallest singular value {:.3e}); regularizer {label} is not admissible",
            op.smallest_singular_value()
        )))
    }
}

fn transition_labeled(
    t: &BlockOperator,
    a: &TraceClassPerturbation,
    b: &TraceClassPerturbation,
    tol: f64,
    labels: (&str, &str),
) -> Result<C64> {
    let ta = t.perturbed(a);
    let tb = t.perturbed(b);
    ensure_invertible(&ta, tol, labels.0)?;
    ensure_invertible(&tb, tol, labels.1)?;
    if a == b {
        return Ok(C64::new(1.0, 0.0));
    }
    let n = ta.n().max(tb.n());
    let inv = linalg::inverse(&tb.block_at(n))
        .ok_or_else(|| Error::domain(format!("T+{} is singular", labels.1)))?;
    let ratio = BlockOperator::new(ta.block_at(n) * inv)?;
    Ok(ratio.fredholm_det())
}

/// `g_{A,B}(T) = det_F{(T+A)(T+B)^{-1}}`.
pub fn transition(
    t: &BlockOperator,
    a: &TraceClassPerturbation,
    b: &TraceClassPerturbation,
    tol: f64,
) -> Result<C64> {
    transition_labeled(t, a, b, tol, ("A", "B"))
}

/// `|g_{A,C} − g_{A,B} g_{B,C}|`.
pub fn cocycle_defect(
    t: &BlockOperator,
    a: &TraceClassPerturbation,
    b: &TraceClassPerturbation,
    c: &TraceClassPerturbation,
    tol: f64,
) -> Result<f64> {
    let ac = transition_labeled(t, a, c, tol, ("A", "C"))?;
    let ab = transition_labeled(t, a, b, tol, ("A", "B"))?;
    let bc = transition_labeled(t, b, c, tol, ("B", "C"))?;
    Ok((ac - ab * bc).norm())
}

/// Value at `B` of the section determined by `germ`.
pub fn extend_section(
    t: &BlockOperator,
    germ: &SectionGerm,
    b: &TraceClassPerturbation,
    tol: f64,
) -> Result<C64> {
    let g = transition_labeled(t, &germ.anchor, b, tol, ("anchor", "B"))?;
    Ok(g * germ.value)
}

impl Regularizer {
    /// Validate `L` against the kernel data of `T`.
    pub fn new(domain_basis: CMat, images: CMat, kc: &KernelCokernelData, tol: f64) -> Result<Self> {
        let d = kc.dim();
        if domain_basis.ncols() != d || images.ncols() != d {
            return Err(Error::validation(format!(
                "regularizer needs {d} kernel vectors and {d} images, got {} and {}",
                domain_basis.ncols(),
                images.ncols()
            )));
        }
        let n = kc.ambient_dim();
        if domain_basis.nrows() != n || images.nrows() != n {
            return Err(Error::validation(format!(
                "regularizer vectors must have length {n}"
            )));
        }
        let off_kernel = (&domain_basis - kc.kernel_projector() * &domain_basis).norm();
        if off_kernel > 1e-8 * domain_basis.norm().max(1.0) {
            return Err(Error::validation(format!(
                "domain basis leaves the kernel (residual {off_kernel:.3e})"
            )));
        }
        let reg = Self {
            domain_basis,
            images,
        };
        if d > 0 {
            let gram = reg.domain_basis.adjoint() * &reg.domain_basis;
            let s = linalg::singular_values(&gram);
            if s[d - 1] < tol * s[0] {
                return Err(Error::validation("domain basis is not a basis of the kernel"));
            }
            let rl = kc.rho_matrix(&reg.images);
            let s = linalg::singular_values(&rl);
            if s[0] == 0.0 || s[d - 1] < tol * s[0] {
                return Err(Error::validation(format!(
                    "rho∘L is not invertible (singular values {:.3e}..{:.3e})",
                    s[0],
                    s[d - 1]
                )));
            }
        }
        Ok(reg)
    }

    pub fn dim(&self) -> usize {
        self.domain_basis.ncols()
    }

    /// The finite-rank operator `L∘π_T`.
    pub fn composed_with_projection(&self) -> TraceClassPerturbation {
        let n = self.domain_basis.nrows().max(1);
        if self.dim() == 0 {
            return TraceClassPerturbation::zero(n);
        }
        let gram = self.domain_basis.adjoint() * &self.domain_basis;
        let gram_inv = linalg::inverse(&gram).expect("validated basis");
        let block = &self.images * gram_inv * self.domain_basis.adjoint();
        TraceClassPerturbation::new(block).expect("finite square block")
    }
}

/// `L` sending the i-th canonical kernel vector to the i-th canonical
/// cokernel vector, so that `ρ_T∘L` is the identity matrix.
pub fn canonical_regularizer(t: &BlockOperator, tol: f64) -> Result<Regularizer> {
    let kc = t.kernel_cokernel(tol)?;
    Ok(Regularizer {
        domain_basis: kc.kernel_basis.clone(),
        images: kc.cokernel_basis.clone(),
    })
}

/// Image of the section germ in `∧Ker(T)* ⊗ ∧Coker(T)` using the regularizer `L`.
pub fn quillen_fiber(
    t: &BlockOperator,
    germ: &SectionGerm,
    l: &Regularizer,
    tol: f64,
) -> Result<DetLineElement> {
    let kc = t.kernel_cokernel(tol)?;
    let l = Regularizer::new(l.domain_basis.clone(), l.images.clone(), &kc, tol)?;
    let lpi = l.composed_with_projection();
    let g = transition_labeled(t, &germ.anchor, &lpi, tol, ("anchor", "L∘π_T"))?;
    let cokernel_images = kc.cokernel_projector() * &l.images;
    Ok(DetLineElement {
        kernel_basis: l.domain_basis,
        cokernel_images,
        coefficient: germ.value * g,
    })
}

impl DetLineElement {
    pub fn dim(&self) -> usize {
        self.kernel_basis.ncols()
    }

    /// The same line element written in the bases `E·g` and `R·a`.
    pub fn change_basis(&self, g: &CMat, a: &CMat) -> Result<Self> {
        let d = self.dim();
        if g.shape() != (d, d) || a.shape() != (d, d) {
            return Err(Error::validation(format!(
                "basis changes must be {d}x{d} matrices"
            )));
        }
        let det_a = a.determinant();
        if det_a.norm() == 0.0 || g.determinant().norm() == 0.0 {
            return Err(Error::validation("basis change is singular"));
        }
        Ok(Self {
            kernel_basis: &self.kernel_basis * g,
            cokernel_images: &self.cokernel_images * a,
            coefficient: self.coefficient * g.determinant() / det_a,
        })
    }
}

/// Coefficient of `elem` against the canonical kernel and cokernel bases of `T`.
pub fn canonical_scalar(elem: &DetLineElement, t: &BlockOperator, tol: f64) -> Result<C64> {
    let kc = t.kernel_cokernel(tol)?;
    let d = kc.dim();
    if elem.kernel_basis.ncols() != d || elem.cokernel_images.ncols() != d {
        return Err(Error::validation(format!(
            "element has {} kernel and {} cokernel vectors but dim Ker T = {d}",
            elem.kernel_basis.ncols(),
            elem.cokernel_images.ncols()
        )));
    }
    if elem.kernel_basis.nrows() != kc.ambient_dim() || elem.cokernel_images.nrows() != kc.ambient_dim() {
        return Err(Error::validation("element vectors do not match the block size of T"));
    }
    if d == 0 {
        return Ok(elem.coefficient);
    }
    let g = kc.kernel_basis.adjoint() * &elem.kernel_basis;
    let a = kc.rho_matrix(&elem.cokernel_images);
    let det_g = g.determinant();
    if det_g.norm() < tol {
        return Err(Error::validation("kernel basis of the element does not span Ker T"));
    }
    Ok(elem.coefficient * a.determinant() / det_g)
}

/// Central-difference Cauchy–Riemann residual of `z ↦ g_{A,B}(T + zE)` at 0.
///
/// For a holomorphic function this is `h²|g'''(0)|/3 + O(h⁴)`.
pub fn holomorphy_residual(
    t: &BlockOperator,
    a: &TraceClassPerturbation,
    b: &TraceClassPerturbation,
    e: &TraceClassPerturbation,
    h: f64,
    tol: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::validation("step h must be positive"));
    }
    let n = t.n().max(e.n());
    let base = t.block_at(n);
    let eval = |z: C64| -> Result<C64> {
        let shifted = BlockOperator::new(&base + e.block_at(n) * z)?;
        transition(&shifted, a, b, tol).map_err(|err| match err {
            Error::Domain(msg) => Error::domain(format!("invertibility lost inside the stencil at z={z}: {msg}")),
            other => other,
        })
    };
    let hc = C64::new(h, 0.0);
    let dx = (eval(hc)? - eval(-hc)?) / (2.0 * h);
    let dy = (eval(I * h)? - eval(-I * h)?) / (2.0 * h);
    // the stencil above only probes radius h; the precondition asks for 2h
    eval(C64::new(2.0 * h, 0.0))?;
    eval(C64::new(0.0, 2.0 * h))?;
    Ok((dx + I * dy).norm() / 2.0)
}
