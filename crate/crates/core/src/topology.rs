//! Operator families over a circle or a two-sphere, with the integer
//! invariants used to witness (non-)triviality of the determinant line:
//! spectral flow, holonomy of the patchwise trivialisation, and Chern
//! numbers from transition functions or transported kernel frames.
//!
//! Grids include both endpoints of every parameter interval. On a circle the
//! last sample sits at `s = 1`, identified with `s = 0` through the closure
//! unitary `W`. On a suspension the rows run over `t ∈ [0, 1]` (row 0 is the
//! `t = 0` pole, the last row the `t = 1` pole) and the columns over the
//! circle parameter.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use crate::detline;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, I, ONE};
use crate::operator::{BlockOperator, TraceClassPerturbation};

/// Neighbouring samples must differ by less than this in operator norm.
pub const MAX_ADJACENT_STEP: f64 = 0.2;
/// Singular values below this mark the directions a patch regularizer covers.
pub const SPECTRAL_THRESHOLD: f64 = 0.1;
/// Required smallest singular value of `T + A` on a patch.
pub const PATCH_MARGIN: f64 = 1e-6;
/// Per-sample phase increments at or above this are refused.
pub const MAX_PHASE_STEP: f64 = PI / 2.0;
const CLOSURE_TOL: f64 = 1e-9;
const EIGEN_ZERO_TOL: f64 = 1e-9;

/// `(cos πt, sin πt)`, exact at integer and half-integer `t`.
pub fn cos_sin_pi(t: f64) -> (f64, f64) {
    let r = t.rem_euclid(2.0);
    if r == 0.0 {
        (1.0, 0.0)
    } else if r == 0.5 {
        (0.0, 1.0)
    } else if r == 1.0 {
        (-1.0, 0.0)
    } else if r == 1.5 {
        (0.0, -1.0)
    } else {
        let x = PI * t;
        (x.cos(), x.sin())
    }
}

/// `α(A)(t) = cos(πt)·Id + sin(πt)·A` for a self-adjoint block `A`.
pub fn alpha_path(a: &BlockOperator, t: f64) -> Result<BlockOperator> {
    alpha_path_with(a, t, AlphaConvention::SelfAdjoint)
}

/// Which path from `Id` to `−Id` a self-adjoint operator is sent to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaConvention {
    /// `cos(πt) + sin(πt)·A`; every point of the path is self-adjoint.
    SelfAdjoint,
    /// `cos(πt) + i·sin(πt)·A`; invertible except where `A` has kernel at `t = 1/2`.
    Unitary,
}

pub fn alpha_path_with(a: &BlockOperator, t: f64, convention: AlphaConvention) -> Result<BlockOperator> {
    if !a.is_hermitian(1e-10) {
        return Err(Error::validation("α needs a self-adjoint block"));
    }
    let (c, s) = cos_sin_pi(t);
    let coeff = match convention {
        AlphaConvention::SelfAdjoint => C64::new(s, 0.0),
        AlphaConvention::Unitary => C64::new(0.0, s),
    };
    let n = a.n();
    BlockOperator::new(CMat::identity(n, n) * C64::new(c, 0.0) + a.block() * coeff)
}

/// Identification of the last circle sample with the first:
/// `samples[end] = W·samples[start]·W*` on the coordinates in `checked`.
#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    pub unitary: CMat,
    /// Coordinates on which the identification is exact. Truncated shift
    /// closures leave out the coordinate where the shift wraps around.
    pub checked: Vec<usize>,
}

impl Closure {
    pub fn identity(n: usize) -> Self {
        Self {
            unitary: CMat::identity(n, n),
            checked: (0..n).collect(),
        }
    }

    /// `W e_k = e_{k−1}` with `e_0 ↦ e_{n−1}`; the wrapped coordinate is
    /// excluded from the closure check.
    pub fn cyclic_shift(n: usize) -> Self {
        let mut w = CMat::zeros(n, n);
        for k in 0..n {
            w[((k + n - 1) % n, k)] = ONE;
        }
        Self {
            unitary: w,
            checked: (0..n.saturating_sub(1)).collect(),
        }
    }

    /// `‖P(end − W·start·W*)P‖` with `P` the projection onto `checked`.
    pub fn residual(&self, start: &BlockOperator, end: &BlockOperator) -> f64 {
        let n = start.n().max(end.n()).max(self.unitary.nrows());
        let w = linalg::pad_identity(&self.unitary, n);
        let diff = end.block_at(n) - &w * start.block_at(n) * w.adjoint();
        let mut checked: Vec<usize> = self.checked.clone();
        checked.extend(self.unitary.nrows()..n);
        let sub = CMat::from_fn(checked.len(), checked.len(), |r, c| diff[(checked[r], checked[c])]);
        linalg::op_norm(&sub)
    }

    pub fn is_identity(&self) -> bool {
        let n = self.unitary.nrows();
        (&self.unitary - CMat::identity(n, n)).norm() == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyBase {
    Circle { points: usize },
    Suspension { t_points: usize, s_points: usize },
}

/// Grid-sampled operators over a circle or a sphere. Suspension samples are
/// stored row-major: index `i * s_points + j` holds `(t_i, s_j)`.
#[derive(Debug, Clone)]
pub struct OperatorFamily {
    base: FamilyBase,
    samples: Vec<BlockOperator>,
    closure: Closure,
}

fn step_norm(a: &BlockOperator, b: &BlockOperator) -> f64 {
    let n = a.n().max(b.n());
    linalg::op_norm(&(a.block_at(n) - b.block_at(n)))
}

impl OperatorFamily {
    pub fn new(base: FamilyBase, samples: Vec<BlockOperator>, closure: Option<Closure>) -> Result<Self> {
        let expected = match base {
            FamilyBase::Circle { points } => {
                if points < 3 {
                    return Err(Error::validation("a circle family needs at least 3 points"));
                }
                points
            }
            FamilyBase::Suspension { t_points, s_points } => {
                if t_points < 3 || s_points < 3 {
                    return Err(Error::validation("a suspension grid needs at least 3x3 points"));
                }
                t_points * s_points
            }
        };
        if samples.len() != expected {
            return Err(Error::validation(format!(
                "family grid expects {expected} samples, got {}",
                samples.len()
            )));
        }
        let n = samples.iter().map(BlockOperator::n).max().unwrap_or(1);
        let closure = closure.unwrap_or_else(|| Closure::identity(n));
        let family = Self {
            base,
            samples,
            closure,
        };
        let step = family.max_adjacent_step();
        if step >= MAX_ADJACENT_STEP {
            return Err(Error::Undersampled(format!(
                "neighbouring samples differ by {step:.3} in operator norm (limit {MAX_ADJACENT_STEP})"
            )));
        }
        let res = family.closure_residual();
        if res > CLOSURE_TOL {
            return Err(Error::validation(format!(
                "closure identification fails by {res:.3e}"
            )));
        }
        if let FamilyBase::Suspension { .. } = base {
            for row in [0, family.rows() - 1] {
                let first = family.at(row, 0);
                for j in 1..family.cols() {
                    if step_norm(first, family.at(row, j)) > CLOSURE_TOL {
                        return Err(Error::validation(format!(
                            "pole row {row} is not constant"
                        )));
                    }
                }
            }
        }
        Ok(family)
    }

    /// A loop sampled at `points` uniform parameters in `[0, 1]`.
    pub fn circle(samples: Vec<BlockOperator>, closure: Option<Closure>) -> Result<Self> {
        let points = samples.len();
        Self::new(FamilyBase::Circle { points }, samples, closure)
    }

    pub fn base(&self) -> FamilyBase {
        self.base
    }

    pub fn samples(&self) -> &[BlockOperator] {
        &self.samples
    }

    pub fn closure(&self) -> &Closure {
        &self.closure
    }

    pub fn rows(&self) -> usize {
        match self.base {
            FamilyBase::Circle { .. } => 1,
            FamilyBase::Suspension { t_points, .. } => t_points,
        }
    }

    pub fn cols(&self) -> usize {
        match self.base {
            FamilyBase::Circle { points } => points,
            FamilyBase::Suspension { s_points, .. } => s_points,
        }
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols() + col
    }

    pub fn at(&self, row: usize, col: usize) -> &BlockOperator {
        &self.samples[self.index(row, col)]
    }

    pub fn is_hermitian(&self) -> bool {
        self.samples.iter().all(|s| s.is_hermitian(1e-10))
    }

    /// Neighbouring pairs of the sampling grid, by flat index.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let (rows, cols) = (self.rows(), self.cols());
        let mut out = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                if j + 1 < cols {
                    out.push((self.index(i, j), self.index(i, j + 1)));
                }
                if i + 1 < rows {
                    out.push((self.index(i, j), self.index(i + 1, j)));
                }
            }
        }
        out
    }

    pub fn max_adjacent_step(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&(p, q)| step_norm(&self.samples[p], &self.samples[q]))
            .fold(0.0, f64::max)
    }

    /// Largest closure residual over the rows of the grid.
    pub fn closure_residual(&self) -> f64 {
        (0..self.rows())
            .map(|i| self.closure.residual(self.at(i, 0), self.at(i, self.cols() - 1)))
            .fold(0.0, f64::max)
    }

    /// The circle family traversed backwards; the closure is inverted.
    pub fn reversed(&self) -> Result<Self> {
        let FamilyBase::Circle { .. } = self.base else {
            return Err(Error::validation("only circle families can be reversed"));
        };
        let mut samples = self.samples.clone();
        samples.reverse();
        let w = self.closure.unitary.adjoint();
        // W* moves the checked coordinates along with the samples
        let checked = self
            .closure
            .checked
            .iter()
            .map(|&k| {
                (0..w.nrows())
                    .find(|&r| self.closure.unitary[(k, r)].norm() > 0.5)
                    .unwrap_or(k)
            })
            .collect();
        Self::circle(samples, Some(Closure { unitary: w, checked }))
    }
}

/// Suspend a self-adjoint loop: row `i` holds `α(D(s_j))(t_i)`.
pub fn suspend_loop(
    lp: &OperatorFamily,
    t_points: usize,
    convention: AlphaConvention,
) -> Result<OperatorFamily> {
    let FamilyBase::Circle { points } = lp.base() else {
        return Err(Error::validation("suspend_loop needs a circle family"));
    };
    if !lp.is_hermitian() {
        return Err(Error::validation("suspend_loop needs a self-adjoint loop"));
    }
    if t_points < 3 {
        return Err(Error::validation("suspension needs at least 3 rows"));
    }
    let mut samples = Vec::with_capacity(t_points * points);
    for i in 0..t_points {
        let t = i as f64 / (t_points - 1) as f64;
        for d in lp.samples() {
            samples.push(alpha_path_with(d, t, convention)?);
        }
    }
    OperatorFamily::new(
        FamilyBase::Suspension {
            t_points,
            s_points: points,
        },
        samples,
        Some(lp.closure().clone()),
    )
}

/// Signed count of eigenvalues crossing zero upwards along a self-adjoint loop.
pub fn spectral_flow(lp: &OperatorFamily) -> Result<i64> {
    let FamilyBase::Circle { .. } = lp.base() else {
        return Err(Error::validation("spectral flow is computed on circle families"));
    };
    let mut negatives = Vec::with_capacity(lp.samples().len());
    for (j, op) in lp.samples().iter().enumerate() {
        if !op.is_hermitian(1e-10) {
            return Err(Error::validation(format!("sample {j} is not self-adjoint")));
        }
        let eig = op.block().clone().symmetric_eigen().eigenvalues;
        if let Some(lam) = eig.iter().find(|l| l.abs() < EIGEN_ZERO_TOL) {
            return Err(Error::Undersampled(format!(
                "eigenvalue {lam:.3e} at grid point {j}; refine the grid"
            )));
        }
        negatives.push(eig.iter().filter(|&&l| l < 0.0).count() as i64);
    }
    Ok(negatives.windows(2).map(|w| w[0] - w[1]).sum())
}

/// A set of grid points sharing one regularizer.
#[derive(Debug, Clone)]
pub struct Patch {
    pub points: BTreeSet<usize>,
    pub regularizer: TraceClassPerturbation,
}

/// Regularizers attached to regions of a family's grid.
#[derive(Debug, Clone)]
pub struct PatchCover {
    pub patches: Vec<Patch>,
}

impl PatchCover {
    pub fn single(points: usize, regularizer: TraceClassPerturbation) -> Self {
        Self {
            patches: vec![Patch {
                points: (0..points).collect(),
                regularizer,
            }],
        }
    }

    /// Every grid point covered and `T + A` uniformly invertible on each patch.
    pub fn validate(&self, family: &OperatorFamily) -> Result<()> {
        let total = family.samples().len();
        let mut covered = vec![false; total];
        for (k, patch) in self.patches.iter().enumerate() {
            for &p in &patch.points {
                if p >= total {
                    return Err(Error::domain(format!("patch {k} names point {p} outside the grid")));
                }
                covered[p] = true;
                let s = family.samples()[p].perturbed(&patch.regularizer).smallest_singular_value();
                if s <= PATCH_MARGIN {
                    return Err(Error::domain(format!(
                        "patch {k}: T+A has smallest singular value {s:.3e} at point {p}"
                    )));
                }
            }
        }
        if let Some(p) = covered.iter().position(|c| !c) {
            return Err(Error::domain(format!("grid point {p} is not covered")));
        }
        Ok(())
    }

    /// Pairs of patches sharing at least one grid point.
    pub fn overlaps(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.patches.len() {
            for b in (a + 1)..self.patches.len() {
                if !self.patches[a].points.is_disjoint(&self.patches[b].points) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// First patch containing every listed point.
    pub fn patch_for(&self, points: &[usize]) -> Option<usize> {
        self.patches
            .iter()
            .position(|p| points.iter().all(|q| p.points.contains(q)))
    }

    fn patch_for_edge(&self, p: usize, q: usize) -> Result<usize> {
        self.patch_for(&[p, q]).ok_or_else(|| {
            Error::domain(format!("no patch contains both neighbouring points {p} and {q}"))
        })
    }

    /// Cover built from spectral projections: each grid edge gets the
    /// projector onto the singular directions below `threshold` at its two
    /// endpoints, scaled by `c`; edges with equal projectors share a patch.
    pub fn spectral(family: &OperatorFamily, threshold: f64, c: f64) -> Result<Self> {
        let n = family.samples().iter().map(BlockOperator::n).max().unwrap_or(1);
        let small: Vec<CMat> = family
            .samples()
            .iter()
            .map(|op| {
                let svd = linalg::svd(&op.block_at(n));
                let idx: Vec<usize> = (0..n).filter(|&i| svd.sigma[i] < threshold).collect();
                CMat::from_fn(n, idx.len(), |r, k| svd.v[(r, idx[k])])
            })
            .collect();
        let mut projectors: Vec<CMat> = Vec::new();
        let mut patches: Vec<Patch> = Vec::new();
        let mut add = |proj: CMat, pts: [usize; 2], patches: &mut Vec<Patch>| {
            let found = projectors.iter().position(|q| (q - &proj).norm() < 1e-8);
            let k = match found {
                Some(k) => k,
                None => {
                    let reg = TraceClassPerturbation::new(&proj * C64::new(c, 0.0)).expect("square");
                    projectors.push(proj);
                    patches.push(Patch {
                        points: BTreeSet::new(),
                        regularizer: reg,
                    });
                    projectors.len() - 1
                }
            };
            patches[k].points.extend(pts);
        };
        for (p, q) in family.edges() {
            let mut cols = Vec::new();
            for m in [&small[p], &small[q]] {
                cols.extend(m.column_iter().map(|c| c.into_owned()));
            }
            let proj = if cols.is_empty() {
                CMat::zeros(n, n)
            } else {
                let basis = linalg::pivoted_orthonormal_basis(&CMat::from_columns(&cols), 1e-6);
                linalg::projector(&basis)
            };
            add(proj, [p, q], &mut patches);
        }
        let cover = Self { patches };
        cover.validate(family)?;
        Ok(cover)
    }

    /// Split every patch into two overlapping halves with the same regularizer.
    pub fn refined(&self) -> Self {
        let mut patches = Vec::new();
        for patch in &self.patches {
            let pts: Vec<usize> = patch.points.iter().copied().collect();
            if pts.len() < 4 {
                patches.push(patch.clone());
                continue;
            }
            let mid = pts.len() / 2;
            for range in [0..mid + 1, mid..pts.len()] {
                patches.push(Patch {
                    points: pts[range].iter().copied().collect(),
                    regularizer: patch.regularizer.clone(),
                });
            }
        }
        // halves may split an edge; keep the originals as fallbacks
        patches.extend(self.patches.iter().cloned());
        Self { patches }
    }
}

/// Phase of the section that is constant in each patch's trivialisation,
/// transported once around a circle family.
///
/// The walk stays in its current patch while it can, switches at the last
/// point before leaving it, and finally returns to the starting patch
/// through the closure `W`.
pub fn holonomy(family: &OperatorFamily, cover: &PatchCover, tol: f64) -> Result<C64> {
    holonomy_trace(family, cover, tol).map(|(h, _)| h)
}

/// [`holonomy`] together with the transitions evaluated along the way. The
/// closing transition is reported with `patch_j` equal to the starting patch.
pub fn holonomy_trace(family: &OperatorFamily, cover: &PatchCover, tol: f64) -> Result<(C64, Vec<OverlapSample>)> {
    let FamilyBase::Circle { points } = family.base() else {
        return Err(Error::validation("holonomy is computed on circle families"));
    };
    cover.validate(family)?;
    let samples = family.samples();
    let start = cover
        .patch_for(&[0])
        .ok_or_else(|| Error::domain("starting point is not covered"))?;
    let mut current = start;
    let mut value = ONE;
    let mut trace = Vec::new();
    for j in 1..points {
        if cover.patches[current].points.contains(&j) {
            continue;
        }
        let next = cover.patch_for_edge(j - 1, j)?;
        let g = detline::transition(
            &samples[j - 1],
            &cover.patches[current].regularizer,
            &cover.patches[next].regularizer,
            tol,
        )?;
        trace.push(OverlapSample {
            patch_i: current,
            patch_j: next,
            param_index: j - 1,
            phase: g.arg(),
        });
        value *= g;
        current = next;
    }
    let home = cover.patches[start].regularizer.conjugated(&family.closure().unitary);
    let last = &samples[points - 1];
    if last.perturbed(&home).smallest_singular_value() <= PATCH_MARGIN {
        return Err(Error::domain(
            "the starting regularizer, carried through the closure, is not admissible at the last point",
        ));
    }
    let g = detline::transition(last, &cover.patches[current].regularizer, &home, tol)?;
    trace.push(OverlapSample {
        patch_i: current,
        patch_j: start,
        param_index: points - 1,
        phase: g.arg(),
    });
    value *= g;
    Ok((value / C64::new(value.norm(), 0.0), trace))
}

/// Which line bundle a Chern number is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChernSelector {
    /// The determinant line, through the transition functions of a patch cover.
    Quillen,
    /// Top exterior power of the kernel bundle.
    KernelDet,
    /// Top exterior power of the cokernel bundle.
    CokernelDet,
}

/// One evaluated transition on an overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapSample {
    pub patch_i: usize,
    pub patch_j: usize,
    pub param_index: usize,
    pub phase: f64,
}

#[derive(Debug, Clone)]
pub struct ChernResult {
    pub c1: i64,
    /// Unrounded total winding, `c1` plus accumulated rounding and seam error.
    pub raw: f64,
    pub overlap_samples: Vec<OverlapSample>,
    /// Grid points at which `dim Ker = dim Coker` was confirmed.
    pub index_checked_points: usize,
}

fn check_index(family: &OperatorFamily, tol: f64) -> Result<Vec<usize>> {
    family
        .samples()
        .iter()
        .enumerate()
        .map(|(p, op)| {
            let kc = op.kernel_cokernel(tol)?;
            if kc.kernel_basis.ncols() != kc.cokernel_basis.ncols() {
                return Err(Error::Internal(format!("index is nonzero at grid point {p}")));
            }
            Ok(kc.dim())
        })
        .collect()
}

pub fn chern_number(
    family: &OperatorFamily,
    selector: ChernSelector,
    cover: &PatchCover,
    tol: f64,
) -> Result<ChernResult> {
    let FamilyBase::Suspension { .. } = family.base() else {
        return Err(Error::validation("Chern numbers are computed on suspension (sphere) families"));
    };
    let dims = check_index(family, tol)?;
    let mut result = match selector {
        ChernSelector::Quillen => quillen_chern(family, cover, tol)?,
        ChernSelector::KernelDet | ChernSelector::CokernelDet => {
            if dims.iter().any(|&d| d != dims[0]) {
                return Err(Error::domain(
                    "kernel dimension varies over the grid; the kernel bundle is not defined",
                ));
            }
            frame_chern(family, selector, tol)?
        }
    };
    result.index_checked_points = dims.len();
    Ok(result)
}

fn quillen_chern(family: &OperatorFamily, cover: &PatchCover, tol: f64) -> Result<ChernResult> {
    cover.validate(family)?;
    let (rows, cols) = (family.rows(), family.cols());
    let samples = family.samples();
    let mut total = 0.0;
    let mut overlap_samples = Vec::new();
    let mut seen = BTreeSet::new();
    for i in 0..rows - 1 {
        for j in 0..cols - 1 {
            let v = [
                family.index(i, j),
                family.index(i, j + 1),
                family.index(i + 1, j + 1),
                family.index(i + 1, j),
            ];
            let mut edge_patch = [0usize; 4];
            for k in 0..4 {
                edge_patch[k] = cover.patch_for_edge(v[k], v[(k + 1) % 4])?;
            }
            let mut flux = ONE;
            for k in 0..4 {
                let incoming = edge_patch[(k + 3) % 4];
                let outgoing = edge_patch[k];
                if incoming == outgoing {
                    continue;
                }
                let g = detline::transition(
                    &samples[v[k]],
                    &cover.patches[outgoing].regularizer,
                    &cover.patches[incoming].regularizer,
                    tol,
                )?;
                if seen.insert((outgoing, incoming, v[k])) {
                    overlap_samples.push(OverlapSample {
                        patch_i: outgoing,
                        patch_j: incoming,
                        param_index: v[k],
                        phase: g.arg(),
                    });
                }
                flux *= g;
            }
            let phase = flux.arg();
            if phase.abs() >= MAX_PHASE_STEP {
                return Err(Error::Undersampled(format!(
                    "transition phase changes by {phase:.3} rad across the cell at ({i}, {j}); refine the grid"
                )));
            }
            total += phase;
        }
    }
    finish(total, overlap_samples)
}

fn finish(total: f64, overlap_samples: Vec<OverlapSample>) -> Result<ChernResult> {
    let raw = total / (2.0 * PI);
    let c1 = raw.round();
    if (raw - c1).abs() > 1e-6 {
        return Err(Error::IllConditioned(format!(
            "total winding {raw:.9} is not an integer; the closure identification is inconsistent"
        )));
    }
    Ok(ChernResult {
        c1: c1 as i64,
        raw,
        overlap_samples,
        index_checked_points: 0,
    })
}

fn polar_transport(target: &CMat, frame: &CMat) -> Result<CMat> {
    if target.ncols() == 0 {
        return Ok(target.clone());
    }
    let overlap = target.adjoint() * frame;
    let svd = linalg::svd(&overlap);
    if svd.sigma.last().copied().unwrap_or(0.0) < 0.5 {
        return Err(Error::Undersampled(
            "consecutive kernel frames are nearly orthogonal; refine the grid".into(),
        ));
    }
    Ok(target * (&svd.u * svd.v.adjoint()))
}

/// Transport frames along each meridian from both poles to the middle row
/// and wind the determinant of their overlap around that circle.
fn frame_chern(family: &OperatorFamily, selector: ChernSelector, tol: f64) -> Result<ChernResult> {
    let (rows, cols) = (family.rows(), family.cols());
    let bases: Vec<CMat> = family
        .samples()
        .iter()
        .map(|op| {
            let kc = op.kernel_cokernel(tol)?;
            Ok(match selector {
                ChernSelector::CokernelDet => kc.cokernel_basis,
                _ => kc.kernel_basis,
            })
        })
        .collect::<Result<_>>()?;
    let mid = rows / 2;
    let mut overlaps = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut north = bases[family.index(0, j)].clone();
        for i in 1..=mid {
            north = polar_transport(&bases[family.index(i, j)], &north)?;
        }
        let mut south = bases[family.index(rows - 1, j)].clone();
        for i in (mid..rows - 1).rev() {
            south = polar_transport(&bases[family.index(i, j)], &south)?;
        }
        overlaps.push((north.adjoint() * south).determinant());
    }
    let mut overlap_samples = Vec::with_capacity(cols);
    let mut total = 0.0;
    for j in 0..cols {
        let tau = overlaps[j];
        if tau.norm() < 0.5 {
            return Err(Error::IllConditioned(format!(
                "north and south frames nearly orthogonal at column {j}"
            )));
        }
        overlap_samples.push(OverlapSample {
            patch_i: 0,
            patch_j: 1,
            param_index: family.index(mid, j),
            phase: tau.arg(),
        });
        let next = if j + 1 < cols { overlaps[j + 1] } else { overlaps[0] };
        let step = linalg::wrap_phase(next.arg() - tau.arg());
        if j + 1 == cols {
            // last sample is the same point as the first
            if step.abs() > 1e-6 {
                return Err(Error::IllConditioned(format!(
                    "frame overlap does not close up around the circle (gap {step:.3e})"
                )));
            }
        } else if step.abs() >= MAX_PHASE_STEP {
            return Err(Error::Undersampled(format!(
                "frame overlap phase jumps by {step:.3} rad at column {j}; refine the grid"
            )));
        }
        total += step;
    }
    finish(total, overlap_samples)
}

/// Names of the families shipped with the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinFamily {
    HopfSelfadjoint,
    SfSuspension,
}

impl std::str::FromStr for BuiltinFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hopf_selfadjoint" => Ok(Self::HopfSelfadjoint),
            "sf_suspension" => Ok(Self::SfSuspension),
            other => Err(Error::validation(format!("unknown family '{other}'"))),
        }
    }
}

impl BuiltinFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::HopfSelfadjoint => "hopf_selfadjoint",
            Self::SfSuspension => "sf_suspension",
        }
    }
}

fn pauli() -> [CMat; 3] {
    let z = linalg::ZERO;
    [
        CMat::from_row_slice(2, 2, &[z, ONE, ONE, z]),
        CMat::from_row_slice(2, 2, &[z, -I, I, z]),
        CMat::from_row_slice(2, 2, &[ONE, z, z, -ONE]),
    ]
}

/// `(I₂ + v·σ) ⊕ (−1)` for a unit vector `v`.
pub fn hopf_operator(v: [f64; 3]) -> BlockOperator {
    let s = pauli();
    let mut m = CMat::zeros(3, 3);
    let mut top = CMat::identity(2, 2);
    for k in 0..3 {
        top += &s[k] * C64::new(v[k], 0.0);
    }
    m.view_mut((0, 0), (2, 2)).copy_from(&top);
    m[(2, 2)] = -ONE;
    BlockOperator::new(m).expect("finite 3x3 block")
}

/// Sphere point for grid parameters `t` (polar, `t = 0` north) and `s` (azimuth).
pub fn sphere_point(t: f64, s: f64) -> [f64; 3] {
    let (ct, st) = cos_sin_pi(t);
    let (cs, ss) = cos_sin_pi(2.0 * s);
    [st * cs, st * ss, ct]
}

/// Self-adjoint family whose kernel line is the tautological line of `v·σ`.
pub fn hopf_selfadjoint(t_points: usize, s_points: usize) -> Result<OperatorFamily> {
    if t_points < 16 || s_points < 16 {
        return Err(Error::validation("hopf_selfadjoint needs a sphere grid of at least 16x16"));
    }
    let mut samples = Vec::with_capacity(t_points * s_points);
    for i in 0..t_points {
        let t = i as f64 / (t_points - 1) as f64;
        for j in 0..s_points {
            let s = j as f64 / (s_points - 1) as f64;
            samples.push(hopf_operator(sphere_point(t, s)));
        }
    }
    OperatorFamily::new(FamilyBase::Suspension { t_points, s_points }, samples, None)
}

/// `x / sqrt(1 + x²)`.
pub fn saturate(x: f64) -> f64 {
    x / (1.0 + x * x).sqrt()
}

/// The diagonal loop `D(s) = diag_k f(k + s − 1/2)`, `k = −m..m`, closed by
/// the index shift. Exactly one eigenvalue crosses zero per period.
pub fn sf_base_loop(s_points: usize, m: usize) -> Result<OperatorFamily> {
    if m < 8 {
        return Err(Error::validation("sf base loop needs truncation m >= 8"));
    }
    if s_points < 16 {
        return Err(Error::validation("sf base loop needs at least 16 samples"));
    }
    let dim = 2 * m + 1;
    let samples = (0..s_points)
        .map(|j| {
            let s = j as f64 / (s_points - 1) as f64;
            let diag: Vec<C64> = (0..dim)
                .map(|idx| {
                    let k = idx as f64 - m as f64;
                    C64::new(saturate(k + s - 0.5), 0.0)
                })
                .collect();
            BlockOperator::new(CMat::from_diagonal(&nalgebra::DVector::from_vec(diag)))
                .expect("finite diagonal")
        })
        .collect();
    OperatorFamily::circle(samples, Some(Closure::cyclic_shift(dim)))
}

/// Suspension of [`sf_base_loop`] through the unitary α-path.
pub fn sf_suspension(t_points: usize, s_points: usize, m: usize) -> Result<OperatorFamily> {
    if t_points < 16 {
        return Err(Error::validation("sf_suspension needs at least 16 rows"));
    }
    let base = sf_base_loop(s_points, m)?;
    suspend_loop(&base, t_points, AlphaConvention::Unitary)
}

pub fn builtin_family(name: BuiltinFamily, t_points: usize, s_points: usize, m: usize) -> Result<OperatorFamily> {
    match name {
        BuiltinFamily::HopfSelfadjoint => hopf_selfadjoint(t_points, s_points),
        BuiltinFamily::SfSuspension => sf_suspension(t_points, s_points, m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use crate::operator::DEFAULT_RANK_TOL;

    const TOL: f64 = DEFAULT_RANK_TOL;

    fn diag(values: &[f64]) -> BlockOperator {
        let d = CVec::from_iterator(values.len(), values.iter().map(|&x| C64::new(x, 0.0)));
        BlockOperator::new(CMat::from_diagonal(&d)).unwrap()
    }

    fn constant_loop(points: usize) -> OperatorFamily {
        OperatorFamily::circle(vec![diag(&[2.0, -1.0]); points], None).unwrap()
    }

    #[test]
    fn cos_sin_exact_at_half_integers() {
        assert_eq!(cos_sin_pi(0.0), (1.0, 0.0));
        assert_eq!(cos_sin_pi(0.5), (0.0, 1.0));
        assert_eq!(cos_sin_pi(1.0), (-1.0, 0.0));
        assert_eq!(cos_sin_pi(2.0), (1.0, 0.0));
        let (c, s) = cos_sin_pi(0.25);
        assert!((c - s).abs() < 1e-15);
    }

    #[test]
    fn alpha_endpoints() {
        let a = diag(&[0.3, -2.0, 1.0]);
        assert_eq!(alpha_path(&a, 0.0).unwrap(), BlockOperator::identity(3));
        assert_eq!(alpha_path(&a, 1.0).unwrap().block(), &(-CMat::identity(3, 3)));
        assert_eq!(alpha_path(&a, 0.5).unwrap(), a);
        let skew = BlockOperator::new(CMat::from_row_slice(2, 2, &[ONE, ONE, -ONE, ONE])).unwrap();
        assert!(matches!(alpha_path(&skew, 0.3), Err(Error::Validation(_))));
    }

    #[test]
    fn suspension_rows() {
        let base = sf_base_loop(24, 8).unwrap();
        let fam = suspend_loop(&base, 25, AlphaConvention::SelfAdjoint).unwrap();
        let n = base.samples()[0].n();
        for j in 0..fam.cols() {
            assert_eq!(fam.at(0, j).block(), &CMat::identity(n, n));
            assert_eq!(fam.at(24, j).block(), &(-CMat::identity(n, n)));
            assert_eq!(fam.at(12, j), &base.samples()[j]);
        }
        let unitary = suspend_loop(&base, 25, AlphaConvention::Unitary).unwrap();
        assert_eq!(unitary.at(12, 3).block(), &(base.samples()[3].block() * I));
    }

    #[test]
    fn spectral_flow_examples() {
        assert_eq!(spectral_flow(&constant_loop(5)).unwrap(), 0);
        let base = sf_base_loop(32, 12).unwrap();
        assert_eq!(spectral_flow(&base).unwrap(), 1);
        assert_eq!(spectral_flow(&base.reversed().unwrap()).unwrap(), -1);
        // s = 1/2 is a grid point for an odd number of samples
        assert!(matches!(spectral_flow(&sf_base_loop(33, 12).unwrap()), Err(Error::Undersampled(_))));
    }

    #[test]
    fn base_loop_has_one_crossing() {
        let base = sf_base_loop(40, 8).unwrap();
        let signs: Vec<Vec<bool>> = base
            .samples()
            .iter()
            .map(|d| (0..d.n()).map(|k| d.block()[(k, k)].re > 0.0).collect())
            .collect();
        let changes: usize = (0..signs[0].len())
            .map(|k| signs.windows(2).filter(|w| w[0][k] != w[1][k]).count())
            .sum();
        assert_eq!(changes, 1);
    }

    #[test]
    fn shift_closure_residual() {
        for m in [8, 12, 16] {
            let base = sf_base_loop(20, m).unwrap();
            assert!(base.closure_residual() <= 1.0 / m as f64);
            // the wrapped coordinate carries the crossed eigenvalue
            let start = &base.samples()[0];
            let end = &base.samples()[19];
            let w = &base.closure().unitary;
            let full = linalg::op_norm(&(end.block() - w * start.block() * w.adjoint()));
            assert!(full > 1.9);
        }
    }

    #[test]
    fn builtin_sizes_are_validated() {
        assert!(matches!(hopf_selfadjoint(15, 40), Err(Error::Validation(_))));
        assert!(matches!(sf_suspension(32, 48, 7), Err(Error::Validation(_))));
        assert!(matches!(sf_suspension(8, 48, 12), Err(Error::Validation(_))));
        assert!(matches!(hopf_selfadjoint(16, 16), Err(Error::Undersampled(_))));
        assert!("nope".parse::<BuiltinFamily>().is_err());
    }

    #[test]
    fn hopf_north_pole_kernel() {
        let kc = hopf_operator([0.0, 0.0, 1.0]).kernel_cokernel(TOL).unwrap();
        assert_eq!(kc.dim(), 1);
        assert!((kc.kernel_basis.column(0) - CVec::from_vec(vec![linalg::ZERO, ONE, linalg::ZERO])).norm() < 1e-15);
    }

    #[test]
    fn holonomy_trivial_cases() {
        let fam = constant_loop(6);
        let cover = PatchCover::single(6, TraceClassPerturbation::zero(2));
        assert_eq!(holonomy(&fam, &cover, TOL).unwrap(), ONE);
        let bad = PatchCover::single(5, TraceClassPerturbation::zero(2));
        assert!(matches!(holonomy(&fam, &bad, TOL), Err(Error::Domain(_))));
        let lp = OperatorFamily::circle(
            (0..25).map(|j| diag(&[1.0 + 0.5 * (std::f64::consts::TAU * j as f64 / 24.0).sin(), 0.0])).collect(),
            None,
        )
        .unwrap();
        let one_patch = PatchCover::single(25, TraceClassPerturbation::new(CMat::identity(2, 2)).unwrap());
        assert_eq!(holonomy(&lp, &one_patch, TOL).unwrap(), ONE);
    }

    #[test]
    fn holonomy_of_base_loop_is_cover_independent() {
        let base = sf_base_loop(32, 10).unwrap();
        let cover = PatchCover::spectral(&base, SPECTRAL_THRESHOLD, 1.0).unwrap();
        let h = holonomy(&base, &cover, TOL).unwrap();
        assert!((h - C64::new(-1.0, 0.0)).norm() < 1e-9);
        for other in [
            cover.refined(),
            cover.refined().refined(),
            PatchCover::spectral(&base, 0.3, 1.0).unwrap(),
            PatchCover::spectral(&base, SPECTRAL_THRESHOLD, 2.5).unwrap(),
        ] {
            assert!((holonomy(&base, &other, TOL).unwrap() - h).norm() < 1e-9);
        }
    }

    #[test]
    fn hopf_chern_numbers() {
        let fam = hopf_selfadjoint(17, 36).unwrap();
        let cover = PatchCover::spectral(&fam, SPECTRAL_THRESHOLD, 1.0).unwrap();
        let q = chern_number(&fam, ChernSelector::Quillen, &cover, TOL).unwrap();
        let k = chern_number(&fam, ChernSelector::KernelDet, &cover, TOL).unwrap();
        let c = chern_number(&fam, ChernSelector::CokernelDet, &cover, TOL).unwrap();
        assert_eq!(q.c1, 0);
        assert_eq!(k.c1.abs(), 1);
        assert_eq!(k.c1, c.c1);
        assert_eq!(q.c1, c.c1 - k.c1);
        assert_eq!(q.index_checked_points, 17 * 36);
    }

    #[test]
    fn chern_needs_a_sphere() {
        let fam = constant_loop(5);
        let cover = PatchCover::single(5, TraceClassPerturbation::zero(2));
        assert!(matches!(chern_number(&fam, ChernSelector::Quillen, &cover, TOL), Err(Error::Validation(_))));
    }

    #[test]
    fn coarse_family_is_refused() {
        let samples: Vec<BlockOperator> = (0..6).map(|j| diag(&[j as f64])).collect();
        assert!(matches!(OperatorFamily::circle(samples, None), Err(Error::Undersampled(_))));
    }
}
