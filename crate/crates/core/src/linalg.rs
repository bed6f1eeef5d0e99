//! Dense helpers on top of nalgebra that the rest of the crate leans on.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Singular value decomposition with singular values sorted in descending
/// order. Columns of `u` are left singular vectors, columns of `v` right ones.
pub struct SortedSvd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

pub fn svd(m: &CMat) -> SortedSvd {
    let n = m.nrows().min(m.ncols());
    let raw = m.clone().svd(true, true);
    let u = raw.u.expect("u requested");
    let v_t = raw.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw.singular_values[b]
            .partial_cmp(&raw.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let sigma = order.iter().map(|&i| raw.singular_values[i]).collect();
    let u_sorted = CMat::from_fn(m.nrows(), n, |r, c| u[(r, order[c])]);
    let v_sorted = CMat::from_fn(m.ncols(), n, |r, c| v_t[(order[c], r)].conj());
    SortedSvd {
        u: u_sorted,
        sigma,
        v: v_sorted,
    }
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Spectral norm.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Embed `m` into the leading block of an `n`-dimensional identity.
pub fn pad_identity(m: &CMat, n: usize) -> CMat {
    let k = m.nrows();
    debug_assert!(n >= k);
    let mut out = CMat::identity(n, n);
    out.view_mut((0, 0), (k, k)).copy_from(m);
    out
}

/// Embed `m` into the leading block of an `n`-dimensional zero matrix.
pub fn pad_zero(m: &CMat, n: usize) -> CMat {
    let k = m.nrows();
    debug_assert!(n >= k);
    let mut out = CMat::zeros(n, n);
    out.view_mut((0, 0), (k, k)).copy_from(m);
    out
}

pub fn pad_vec(v: &CVec, n: usize) -> CVec {
    let mut out = CVec::zeros(n);
    out.rows_mut(0, v.len()).copy_from(v);
    out
}

/// Orthonormal basis of the column span of `cols`, using column pivoting so
/// the result depends only on the spanned subspace and the coordinate order.
///
/// Columns whose residual falls below `drop_tol` are treated as dependent.
pub fn pivoted_orthonormal_basis(cols: &CMat, drop_tol: f64) -> CMat {
    let n = cols.nrows();
    let mut residual: Vec<CVec> = (0..cols.ncols()).map(|j| cols.column(j).into_owned()).collect();
    let mut basis: Vec<CVec> = Vec::new();
    let mut used = vec![false; residual.len()];
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (j, r) in residual.iter().enumerate() {
            if used[j] {
                continue;
            }
            let nrm = r.norm();
            // strict comparison keeps the lowest index among near ties
            match best {
                Some((_, b)) if nrm <= b * (1.0 + 1e-12) => {}
                _ => best = Some((j, nrm)),
            }
        }
        let Some((j, nrm)) = best else { break };
        if nrm <= drop_tol {
            break;
        }
        used[j] = true;
        let mut q = residual[j].clone() / C64::from(nrm);
        // re-orthogonalise once for stability
        for b in &basis {
            let c = b.dotc(&q);
            q -= b * c;
        }
        let q_norm = q.norm();
        q /= C64::from(q_norm);
        normalize_phase(&mut q);
        for (k, r) in residual.iter_mut().enumerate() {
            if !used[k] {
                let c = q.dotc(r);
                *r -= &q * c;
            }
        }
        basis.push(q);
        if basis.len() == n {
            break;
        }
    }
    if basis.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&basis)
    }
}

/// Canonical orthonormal basis of the range of an orthogonal projector.
pub fn projector_basis(p: &CMat, rank: usize) -> CMat {
    if rank == 0 {
        return CMat::zeros(p.nrows(), 0);
    }
    let basis = pivoted_orthonormal_basis(p, 1e-6);
    debug_assert_eq!(basis.ncols(), rank);
    basis
}

/// Rotate `v` so that its first entry of (near-)maximal modulus is real positive.
pub fn normalize_phase(v: &mut CVec) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-9))
        .unwrap_or(0);
    let phase = v[pivot] / C64::from(v[pivot].norm());
    *v *= phase.conj();
}

pub fn projector(basis: &CMat) -> CMat {
    basis * basis.adjoint()
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_residual(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// Wrap an angle difference into (-pi, pi].
pub fn wrap_phase(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut x = a % two_pi;
    if x <= -std::f64::consts::PI {
        x += two_pi;
    } else if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(C64::from)
}

/// Relative distance between two complex scalars.
pub fn rel_diff(a: C64, b: C64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}
