use std::fmt::Write as _;
use std::path::Path;

use detbundle::detline::{self, SectionGerm};
use detbundle::io::{self, FamilySpec, Input};
use detbundle::linalg::{self, CMat, C64};
use detbundle::symplectic::{self, ChartMode, LagrangianFrame, LagrangianPath};
use detbundle::topology::{self, AlphaConvention, BuiltinFamily, ChernSelector, OverlapSample, PatchCover};
use detbundle::{BlockOperator, Error, Result, TraceClassPerturbation};

use crate::sweep;
use crate::{Command, Convention, FamilyArgs, Mode, RunConfig, Selector};

/// Grid used by `chern` and `holonomy` when neither a file nor `--grid` gives one.
const DEFAULT_GRID: [usize; 2] = [32, 48];

fn c(z: C64) -> String {
    // adding 0.0 turns -0 into 0
    format!("{},{}", z.re + 0.0, z.im + 0.0)
}

fn load(path: &Path) -> Result<Input> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
    io::parse_input(&text).map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn wrong_kind(path: &Path, want: &str, got: &Input) -> Error {
    Error::Validation(format!(
        "{}: line 1: expected kind '{want}', found '{}'",
        path.display(),
        got.kind()
    ))
}

fn load_operator(path: &Path) -> Result<BlockOperator> {
    match load(path)? {
        Input::Operator(op) => Ok(op),
        other => Err(wrong_kind(path, "block_operator", &other)),
    }
}

fn load_perturbation(path: &Path) -> Result<TraceClassPerturbation> {
    match load(path)? {
        Input::Perturbation(p) => Ok(p),
        other => Err(wrong_kind(path, "trace_class", &other)),
    }
}

fn load_germ(path: &Path) -> Result<SectionGerm> {
    match load(path)? {
        Input::Germ(g) => Ok(g),
        other => Err(wrong_kind(path, "section_germ", &other)),
    }
}

fn load_frame(path: &Path) -> Result<LagrangianFrame> {
    match load(path)? {
        Input::Frame(f) => Ok(f),
        other => Err(wrong_kind(path, "lagrangian_frame", &other)),
    }
}

fn load_path(path: &Path) -> Result<LagrangianPath> {
    match load(path)? {
        Input::Path(p) => Ok(p),
        other => Err(wrong_kind(path, "lagrangian_path", &other)),
    }
}

fn family_spec(args: &FamilyArgs) -> Result<FamilySpec> {
    let mut spec = match (&args.file, &args.family) {
        (Some(path), None) => match load(path)? {
            Input::Family(s) => s,
            other => return Err(wrong_kind(path, "family", &other)),
        },
        (None, Some(name)) => FamilySpec {
            name: name.parse()?,
            grid: DEFAULT_GRID,
            m: io::DEFAULT_TRUNCATION,
        },
        (Some(_), Some(_)) => {
            return Err(Error::Validation("give either a family file or --family, not both".into()))
        }
        (None, None) => return Err(Error::Validation("a family file or --family is required".into())),
    };
    if let Some(grid) = &args.grid {
        spec.grid = [grid[0], grid[1]];
    }
    if let Some(m) = args.m {
        spec.m = m;
    }
    Ok(spec)
}

fn write_csv(config: &RunConfig, rows: &[OverlapSample]) -> Result<()> {
    let Some(path) = &config.emit_csv else {
        return Ok(());
    };
    let mut out = String::from("patch_i,patch_j,param_index,phase\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.patch_i, r.patch_j, r.param_index, r.phase);
    }
    std::fs::write(path, out)
        .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))
}

pub fn dispatch(command: &Command, config: &RunConfig) -> Result<String> {
    let tol = config.tol_rank;
    match command {
        Command::Fdet { operator } => {
            let op = load_operator(operator)?;
            Ok(format!("det={}", c(op.fredholm_det())))
        }
        Command::Cocycle { files, trials } => match files.as_slice() {
            [] => {
                let out = sweep::random_cocycle_sweep(config.seed, *trials, tol)?;
                if out.max_relative_defect > config.tol_det {
                    return Err(Error::IllConditioned(format!(
                        "largest relative cocycle defect {:e} exceeds {:e}",
                        out.max_relative_defect, config.tol_det
                    )));
                }
                Ok(format!(
                    "trials={} max_rel_defect={:e}",
                    out.trials, out.max_relative_defect
                ))
            }
            [t, a, b, cc] => {
                let t = load_operator(t)?;
                let (a, b, cc) = (load_perturbation(a)?, load_perturbation(b)?, load_perturbation(cc)?);
                let defect = detline::cocycle_defect(&t, &a, &b, &cc, tol)?;
                let scale = detline::transition(&t, &a, &cc, tol)?.norm();
                if defect > config.tol_det * scale {
                    return Err(Error::IllConditioned(format!(
                        "cocycle defect {defect:e} exceeds {:e} relative",
                        config.tol_det
                    )));
                }
                Ok(format!("defect={defect:e}"))
            }
            _ => Err(Error::Validation(
                "cocycle takes four files (T A B C) or none for a random sweep".into(),
            )),
        },
        Command::Fiber { operator, germ } => {
            let t = load_operator(operator)?;
            let germ = load_germ(germ)?;
            let l = detline::canonical_regularizer(&t, tol)?;
            let elem = detline::quillen_fiber(&t, &germ, &l, tol)?;
            let scalar = detline::canonical_scalar(&elem, &t, tol)?;
            Ok(format!(
                "dim={} coefficient={} canonical={}",
                elem.dim(),
                c(elem.coefficient),
                c(scalar)
            ))
        }
        Command::Souriau { lambda, mu } => {
            let (l, m) = (load_frame(lambda)?, load_frame(mu)?);
            let s = symplectic::souriau(&l, &m)?;
            let n = s.nrows();
            let unitarity = (&s * s.adjoint() - CMat::identity(n, n)).norm();
            let q = symplectic::q_map(&l, &m)?.kernel_cokernel(tol)?;
            let p = BlockOperator::new(linalg::to_complex(&symplectic::p_map(&l, &m)?))?.kernel_cokernel(tol)?;
            let pd = symplectic::pair_data(&l, &m, symplectic::DEFAULT_ANGLE_TOL)?;
            Ok(format!(
                "det={} unitarity={:e} dim_ker_q={} dim_ker_p={} dim_intersection={} dim_cointersection={}",
                c(s.determinant()),
                unitarity,
                q.dim(),
                p.dim(),
                pd.dim_intersection,
                pd.dim_cointersection
            ))
        }
        Command::Maslov { lambda, path } => {
            let (l, p) = (load_frame(lambda)?, load_path(path)?);
            Ok(format!("index={}", symplectic::maslov_index(&l, &p)?))
        }
        Command::Prop5 { theta, theta2, mu, mode } => {
            let (a, b, m) = (load_frame(theta)?, load_frame(theta2)?, load_frame(mu)?);
            let q = symplectic::prop5_quadruple(&a, &b, &m)?;
            let chart_mode = match mode {
                Mode::Complex => ChartMode::ComplexOnHj,
                Mode::Real => ChartMode::RealLinear,
            };
            let g = symplectic::chart_transition(&a, &b, &m, chart_mode)?;
            let [t0, t1, t2, t3] = q.terms;
            Ok(format!(
                "terms={t0},{t1},{t2},{t3} spread={:e} unipotent_det={} transition={}",
                q.spread(),
                q.unipotent_det,
                c(g)
            ))
        }
        Command::Chern { family, selector } => {
            let spec = family_spec(family)?;
            let fam = spec.build()?;
            let cover = PatchCover::spectral(&fam, topology::SPECTRAL_THRESHOLD, 1.0)?;
            let (sel, name) = match selector {
                Selector::Quillen => (ChernSelector::Quillen, "quillen"),
                Selector::KernelDet => (ChernSelector::KernelDet, "kernel_det"),
                Selector::CokernelDet => (ChernSelector::CokernelDet, "cokernel_det"),
            };
            let r = topology::chern_number(&fam, sel, &cover, tol)?;
            write_csv(config, &r.overlap_samples)?;
            Ok(format!(
                "c1={} selector={name} family={} grid={}x{} index_checked={}",
                r.c1,
                spec.name.name(),
                spec.grid[0],
                spec.grid[1],
                r.index_checked_points
            ))
        }
        Command::Alpha { operator, t, convention } => {
            if !(0.0..=1.0).contains(t) {
                return Err(Error::Validation(format!("t = {t} is outside [0, 1]")));
            }
            let a = load_operator(operator)?;
            let conv = match convention {
                Convention::SelfAdjoint => AlphaConvention::SelfAdjoint,
                Convention::Unitary => AlphaConvention::Unitary,
            };
            let h = topology::alpha_path_with(&a, *t, conv)?;
            let n = h.n();
            let endpoint = if h.block() == &CMat::identity(n, n) {
                "identity"
            } else if h.block() == &(-CMat::identity(n, n)) {
                "minus_identity"
            } else {
                "interior"
            };
            Ok(format!("t={t} endpoint={endpoint} det={}", c(h.block().determinant())))
        }
        Command::Holonomy { family } => {
            let spec = family_spec(family)?;
            if spec.name != BuiltinFamily::SfSuspension {
                return Err(Error::Validation(format!(
                    "holonomy needs a loop; {} is a sphere family",
                    spec.name.name()
                )));
            }
            let lp = topology::sf_base_loop(spec.grid[1], spec.m)?;
            let cover = PatchCover::spectral(&lp, topology::SPECTRAL_THRESHOLD, 1.0)?;
            let (h, trace) = topology::holonomy_trace(&lp, &cover, tol)?;
            let sf = topology::spectral_flow(&lp)?;
            write_csv(config, &trace)?;
            Ok(format!("holonomy={} spectral_flow={sf} patches={}", c(h), cover.patches.len()))
        }
    }
}
