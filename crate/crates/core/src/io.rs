//! JSON file formats. Every object carries a `"kind"` tag; complex numbers
//! are `[re, im]` pairs and matrices are row-major lists of rows, except
//! Lagrangian frames which list their columns.
//!
//! Parse errors are reported as validation errors prefixed with the line of
//! the offending token or key.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::detline::SectionGerm;
use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat, C64};
use crate::operator::{BlockOperator, TraceClassPerturbation};
use crate::symplectic::{LagrangianFrame, LagrangianPath};
use crate::topology::{builtin_family, BuiltinFamily, OperatorFamily};

/// Truncation used when a family file omits `"m"`.
pub const DEFAULT_TRUNCATION: usize = 12;

/// A builtin family together with its sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilySpec {
    pub name: BuiltinFamily,
    pub grid: [usize; 2],
    pub m: usize,
}

impl FamilySpec {
    pub fn build(&self) -> Result<OperatorFamily> {
        builtin_family(self.name, self.grid[0], self.grid[1], self.m)
    }
}

/// Anything an input file can hold.
#[derive(Debug, Clone)]
pub enum Input {
    Operator(BlockOperator),
    Perturbation(TraceClassPerturbation),
    Germ(SectionGerm),
    Frame(LagrangianFrame),
    Path(LagrangianPath),
    Family(FamilySpec),
}

impl Input {
    pub fn kind(&self) -> &'static str {
        match self {
            Input::Operator(_) => "block_operator",
            Input::Perturbation(_) => "trace_class",
            Input::Germ(_) => "section_germ",
            Input::Frame(_) => "lagrangian_frame",
            Input::Path(_) => "lagrangian_path",
            Input::Family(_) => "family",
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    kind: String,
    n: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGerm {
    kind: String,
    anchor: RawMatrix,
    value: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    kind: String,
    n: usize,
    columns: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPath {
    kind: String,
    closed: bool,
    frames: Vec<RawFrame>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    kind: String,
    name: String,
    grid: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map_or(1, |i| i + 1)
}

fn at_line(text: &str, key: &str, err: Error) -> Error {
    let line = line_of(text, key);
    let msg = match err {
        Error::Validation(m)
        | Error::Domain(m)
        | Error::IllConditioned(m)
        | Error::Undersampled(m)
        | Error::Internal(m) => m,
    };
    Error::Validation(format!("line {line}: {msg}"))
}

fn typed<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Validation(format!("line {}: {e}", e.line().max(1))))
}

fn expect_kind(text: &str, found: &str, want: &str) -> Result<()> {
    if found == want {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "line {}: expected kind '{want}', found '{found}'",
            line_of(text, "kind")
        )))
    }
}

fn matrix_from_raw(raw: &RawMatrix, text: &str) -> Result<CMat> {
    let n = raw.n;
    if n == 0 {
        return Err(at_line(text, "n", Error::validation("n must be at least 1")));
    }
    if raw.entries.len() != n || raw.entries.iter().any(|r| r.len() != n) {
        let rows = raw.entries.len();
        let cols = raw.entries.iter().map(Vec::len).max().unwrap_or(0);
        return Err(at_line(
            text,
            "entries",
            Error::validation(format!("declared n = {n} but entries are {rows}x{cols}")),
        ));
    }
    Ok(CMat::from_fn(n, n, |r, c| {
        let [re, im] = raw.entries[r][c];
        C64::new(re, im)
    }))
}

fn raw_from_matrix(kind: &str, m: &CMat) -> RawMatrix {
    RawMatrix {
        kind: kind.to_string(),
        n: m.nrows(),
        entries: m
            .row_iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect(),
    }
}

fn frame_from_raw(raw: &RawFrame, text: &str) -> Result<LagrangianFrame> {
    expect_kind(text, &raw.kind, "lagrangian_frame")?;
    let n = raw.n;
    if raw.columns.len() != n || raw.columns.iter().any(|c| c.len() != 2 * n) {
        return Err(at_line(
            text,
            "columns",
            Error::validation(format!("declared n = {n} needs {n} columns of length {}", 2 * n)),
        ));
    }
    let cols = RMat::from_fn(2 * n, n, |r, c| raw.columns[c][r]);
    LagrangianFrame::new(cols).map_err(|e| at_line(text, "columns", e))
}

fn raw_from_frame(f: &LagrangianFrame) -> RawFrame {
    RawFrame {
        kind: "lagrangian_frame".into(),
        n: f.n(),
        columns: f
            .columns()
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
    }
}

/// Parse the contents of an input file.
pub fn parse_input(text: &str) -> Result<Input> {
    let value: Value = typed(text)?;
    let kind = value
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::validation("line 1: missing string field \"kind\""))?
        .to_string();
    match kind.as_str() {
        "block_operator" | "trace_class" => {
            let raw: RawMatrix = typed(text)?;
            let m = matrix_from_raw(&raw, text)?;
            if kind == "block_operator" {
                BlockOperator::new(m)
                    .map(Input::Operator)
                    .map_err(|e| at_line(text, "entries", e))
            } else {
                TraceClassPerturbation::new(m)
                    .map(Input::Perturbation)
                    .map_err(|e| at_line(text, "entries", e))
            }
        }
        "section_germ" => {
            let raw: RawGerm = typed(text)?;
            expect_kind(text, &raw.anchor.kind, "trace_class")?;
            let m = matrix_from_raw(&raw.anchor, text)?;
            let anchor = TraceClassPerturbation::new(m).map_err(|e| at_line(text, "anchor", e))?;
            let [re, im] = raw.value;
            Ok(Input::Germ(SectionGerm::new(anchor, C64::new(re, im))))
        }
        "lagrangian_frame" => {
            let raw: RawFrame = typed(text)?;
            frame_from_raw(&raw, text).map(Input::Frame)
        }
        "lagrangian_path" => {
            let raw: RawPath = typed(text)?;
            let frames = raw
                .frames
                .iter()
                .map(|f| frame_from_raw(f, text))
                .collect::<Result<Vec<_>>>()?;
            match LagrangianPath::new(frames, raw.closed) {
                Ok(p) => Ok(Input::Path(p)),
                // a coarse path is a sampling problem, not a malformed file
                Err(e @ Error::Undersampled(_)) => Err(e),
                Err(e) => Err(at_line(text, "frames", e)),
            }
        }
        "family" => {
            let raw: RawFamily = typed(text)?;
            let name: BuiltinFamily = raw.name.parse().map_err(|e| at_line(text, "name", e))?;
            let spec = FamilySpec {
                name,
                grid: raw.grid,
                m: raw.m.unwrap_or(DEFAULT_TRUNCATION),
            };
            Ok(Input::Family(spec))
        }
        other => Err(Error::Validation(format!(
            "line {}: unknown kind '{other}'",
            line_of(text, "kind")
        ))),
    }
}

/// Serialize to the same format [`parse_input`] reads.
pub fn to_json(input: &Input) -> String {
    let out = match input {
        Input::Operator(op) => serde_json::to_string_pretty(&raw_from_matrix("block_operator", op.block())),
        Input::Perturbation(p) => serde_json::to_string_pretty(&raw_from_matrix("trace_class", p.block())),
        Input::Germ(g) => serde_json::to_string_pretty(&RawGerm {
            kind: "section_germ".into(),
            anchor: raw_from_matrix("trace_class", g.anchor.block()),
            value: [g.value.re, g.value.im],
        }),
        Input::Frame(f) => serde_json::to_string_pretty(&raw_from_frame(f)),
        Input::Path(p) => serde_json::to_string_pretty(&RawPath {
            kind: "lagrangian_path".into(),
            closed: p.is_closed(),
            frames: p.frames().iter().map(raw_from_frame).collect(),
        }),
        Input::Family(s) => serde_json::to_string_pretty(&RawFamily {
            kind: "family".into(),
            name: s.name.name().into(),
            grid: s.grid,
            m: Some(s.m),
        }),
    };
    out.expect("plain data always serializes")
}
