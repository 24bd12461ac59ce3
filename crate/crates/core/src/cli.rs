//! The `crf` command line: verb dispatch, text/JSON reports, batching.
//!
//! Exit codes: 0 verdict computed (negative verdicts included), 2 parse or
//! format error, 3 precondition violation, 4 internal consistency failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::crfields::{
    case_diff, case_germ, case_series, engine_case_series, obstruction, parse_series_file,
    verify_witness, CaseId, CaseParams, CrFieldsError, TangentField,
};
use crate::flatten::{flatten_to_order, kernel_file_name, uniqueness_nullspace, FlattenError, ObstructionKind};
use crate::germ::{Germ, GermError};
use crate::numeric::GQ;
use crate::quadratic::{
    bishop_slice, coarse_b_class, cr_singular_linearization, elliptic_candidates, is_hermitianizable, recognize,
    QuadraticError, SliceReport,
};
use crate::series::{Series, SeriesError};

pub const TRUNC_ENV: &str = "CRF_TRUNC_DEFAULT";
pub const TRUNC_DEFAULT: u32 = 8;

#[derive(Debug, Parser)]
#[command(name = "crf", version, about = "Exact analysis of CR singular codimension-two germs in C^3")]
pub struct Cli {
    /// Emit a JSON document instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Run the verb once per line of FILE; each line supplies the verb's arguments.
    #[arg(long, global = true, value_name = "FILE")]
    pub batch: Option<PathBuf>,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Verb {
    /// Quadratic invariants: flattenability, coarse class, recognized normal form.
    Classify { germ: Option<String> },
    /// Residual X1 X2 - Y1 Y2 of the canonical field brackets.
    NonminimalCheck {
        germ: Option<String>,
        #[arg(long)]
        order: Option<u32>,
    },
    /// Check a tangent field and an optional real function against the germ.
    Witness {
        germ: Option<String>,
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        chi: Option<String>,
    },
    /// Bishop invariant of the slice z = c xi, or a search for elliptic slices.
    Bishop {
        germ: Option<String>,
        /// Comma-separated direction, e.g. "1,0" or "1,3/5+4/5 i".
        #[arg(long)]
        c: Option<String>,
        /// Also list candidate directions, with a grid search up to this bound.
        #[arg(long, num_args = 0..=1, default_missing_value = "6")]
        search: Option<i64>,
    },
    /// Linearization of the CR singular locus at the origin.
    Jacobian { germ: Option<String> },
    /// Formal flattening of a germ over the parabolic quadric.
    Flatten {
        germ: Option<String>,
        #[arg(long)]
        order: Option<u32>,
        /// Write kernel files and the final germ into this directory.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Dimension of the uniqueness nullspace at degree m.
    UniqueCheck {
        #[arg(long)]
        m: Option<u32>,
    },
    /// Compare engine bracket coefficients with the transcribed case displays.
    CaseOracle {
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        params: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Parse(String),
    Precondition(String),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m) | CliError::Precondition(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<GermError> for CliError {
    fn from(e: GermError) -> Self {
        match e {
            GermError::Format { .. } | GermError::Series(SeriesError::Format { .. }) | GermError::Numeric(_) => {
                CliError::Parse(e.to_string())
            }
            GermError::MalformedQuadratic | GermError::LowDegree(_) | GermError::OrderTooLow(_) => {
                CliError::Parse(e.to_string())
            }
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<CrFieldsError> for CliError {
    fn from(e: CrFieldsError) -> Self {
        match e {
            CrFieldsError::Germ(g) => g.into(),
            CrFieldsError::Format { .. } | CrFieldsError::UnknownCase(_) => CliError::Parse(e.to_string()),
            CrFieldsError::Series(SeriesError::Format { .. }) => CliError::Parse(e.to_string()),
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<QuadraticError> for CliError {
    fn from(e: QuadraticError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<FlattenError> for CliError {
    fn from(e: FlattenError) -> Self {
        match e {
            FlattenError::Singular { .. } => CliError::Internal(e.to_string()),
            FlattenError::Germ(g) => g.into(),
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

/// Ordered `KEY value` report; arrays print one `KEY item` line per item.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    items: Vec<(String, Value)>,
}

impl Report {
    fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.items.push((key.to_string(), v.into()));
    }

    fn lines(&mut self, key: &str, v: Vec<String>) {
        self.items.push((key.to_string(), Value::Array(v.into_iter().map(Value::String).collect())));
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let scalar = |v: &Value| match v {
            Value::String(s) => s.clone(),
            Value::Null => "none".to_string(),
            o => o.to_string(),
        };
        for (k, v) in &self.items {
            match v {
                Value::Array(xs) => {
                    for x in xs {
                        out.push_str(&format!("{k} {}\n", scalar(x)));
                    }
                }
                o => out.push_str(&format!("{k} {}\n", scalar(o))),
            }
        }
        out
    }

    pub fn json(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in &self.items {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }
}

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn trunc_default() -> u32 {
    std::env::var(TRUNC_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(TRUNC_DEFAULT)
}

fn read(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {path}: {e}")))
}

/// A germ file, or `builtin:p1` for the parabolic quadric at the default truncation.
fn load_germ(path: &Option<String>) -> Result<Germ, CliError> {
    let path = path.as_deref().ok_or_else(|| CliError::Parse("missing germ file".into()))?;
    if path == "builtin:p1" {
        return Ok(Germ::p1_quadric(trunc_default()));
    }
    Ok(Germ::parse(&read(path)?)?)
}

fn series_lines(s: &Series) -> Vec<String> {
    s.term_lines()
}

fn slice_items(r: &mut Report, s: &SliceReport) {
    r.put("ALPHA", s.alpha.to_string());
    r.put("GAMMA", s.gamma.to_string());
    r.put("LAMBDA_SQ", s.lambda_sq.to_string());
    r.put("ELLIPTIC", s.elliptic);
}

fn parse_direction(s: &str) -> Result<Vec<GQ>, CliError> {
    s.split(',')
        .map(|x| x.trim().parse::<GQ>().map_err(|e| CliError::Parse(format!("bad direction entry {x:?}: {e}"))))
        .collect()
}

fn fmt_dir(c: &[GQ]) -> String {
    c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Run one verb; the code is 0 or 4 when a report was produced.
pub fn execute(verb: &Verb) -> Result<(Report, i32), CliError> {
    let mut r = Report::default();
    let mut code = 0;
    match verb {
        Verb::Classify { germ } => {
            let g = load_germ(germ)?;
            let pair = g.quadratic();
            r.put("VARS", g.n());
            r.put("ORDER", g.trunc());
            r.put("A", pair.a.to_string());
            r.put("B", pair.b.to_string());
            let v = is_hermitianizable(&pair);
            r.put("HERMITIANIZABLE", v.flattenable);
            r.put("LAMBDA", v.lambda.map(|x| x.to_string()));
            r.put("MU", v.mu_witness.map(|x| x.to_string()));
            if g.n() == 2 {
                let c = coarse_b_class(&pair)?;
                r.put("B_CLASS", c.tag.name());
                r.put("B_FAMILIES", c.tag.families());
                r.put("COSQUARE_SPECTRUM", c.cosquare_spectrum);
                let shapes = recognize(&pair)
                    .into_iter()
                    .map(|s| {
                        let ps: Vec<String> = s.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                        if ps.is_empty() { s.label } else { format!("{} {}", s.label, ps.join(" ")) }
                    })
                    .collect();
                r.lines("SHAPE", shapes);
            }
        }
        Verb::NonminimalCheck { germ, order } => {
            let g = load_germ(germ)?;
            g.require_n2()?;
            let order = order.unwrap_or(g.trunc());
            let rep = obstruction(&g, order)?;
            r.put("ORDER", order);
            for (k, s) in [("X1", &rep.x1), ("X2", &rep.x2), ("Y1", &rep.y1), ("Y2", &rep.y2), ("RESIDUAL", &rep.residual)] {
                r.lines(k, series_lines(s));
            }
            match &rep.first_nonzero {
                Some((e, c)) => {
                    r.put("FIRST_OBSTRUCTION", format!("{e} {} {}", c.re, c.im));
                    r.put("VERDICT", "OBSTRUCTED");
                }
                None => {
                    r.put("RESIDUAL_ZERO_TO", order);
                    r.put("VERDICT", "NO_OBSTRUCTION");
                }
            }
        }
        Verb::Witness { germ, field, chi } => {
            let g = load_germ(germ)?;
            let field = field.as_deref().ok_or_else(|| CliError::Parse("missing --field".into()))?;
            let f = TangentField::parse(&read(field)?)?;
            let chi = chi.as_deref().map(|p| read(p).and_then(|t| parse_series_file(&t).map_err(CliError::from))).transpose()?;
            let w = verify_witness(&g, &f, chi.as_ref())?;
            r.put("WITNESS", w.to_string());
            r.put("VALID", w.all_true());
        }
        Verb::Bishop { germ, c, search } => {
            let g = load_germ(germ)?;
            let pair = g.quadratic();
            if c.is_none() && search.is_none() {
                return Err(CliError::Parse("bishop needs --c or --search".into()));
            }
            if let Some(c) = c {
                let dir = parse_direction(c)?;
                r.put("DIRECTION", fmt_dir(&dir));
                match bishop_slice(&pair, &dir) {
                    Ok(s) => slice_items(&mut r, &s),
                    Err(QuadraticError::DegenerateSlice) => r.put("SLICE", "DEGENERATE"),
                    Err(e) => return Err(e.into()),
                }
            }
            if let Some(bound) = search {
                let cands = elliptic_candidates(&pair, Some(*bound))?;
                let lines = cands
                    .iter()
                    .map(|c| {
                        let dir = c.c.as_deref().map(fmt_dir).unwrap_or_else(|| "none".into());
                        let sl = c.slice.as_ref().map(|s| format!("lambda_sq={} elliptic={}", s.lambda_sq, s.elliptic));
                        let mut l = format!("{} c={dir}", c.source);
                        if let Some(s) = sl {
                            l.push(' ');
                            l.push_str(&s);
                        }
                        if let Some(f) = &c.flag {
                            l.push(' ');
                            l.push_str(f);
                        }
                        l
                    })
                    .collect();
                r.lines("CANDIDATE", lines);
                r.put("ELLIPTIC_FOUND", cands.iter().any(|c| c.slice.as_ref().is_some_and(|s| s.elliptic)));
            }
        }
        Verb::Jacobian { germ } => {
            let g = load_germ(germ)?;
            let lin = cr_singular_linearization(&g)?;
            let rows = (0..lin.matrix.rows)
                .map(|i| lin.matrix.row(i).iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
                .collect();
            r.lines("ROW", rows);
            r.put("RANK", lin.rank);
            r.put("DIM_BOUND", lin.dim_bound);
            r.put("INVERTIBLE", lin.rank == 4);
        }
        Verb::Flatten { germ, order, emit } => {
            let g = load_germ(germ)?;
            let order = order.unwrap_or(g.trunc());
            let rep = flatten_to_order(&g, order)?;
            r.put("FLATTEN_ORDER", order);
            r.lines(
                "DEGREE",
                rep.steps
                    .iter()
                    .map(|s| format!("{}: KERNEL {}, H_NORMALIZED_ZERO {}", s.m, kernel_file_name(s.m), s.h_normalized_zero))
                    .collect(),
            );
            for s in &rep.steps {
                let lines = s.kernel.coeffs.iter().map(|((a1, a2, j), c)| format!("{a1} {a2} {j} {} {}", c.re, c.im)).collect();
                r.lines(&format!("KERNEL_{}", s.m), lines);
            }
            match &rep.obstruction {
                None => r.put("FLATTENED_TO", order),
                Some(ob) => {
                    let what = match &ob.kind {
                        ObstructionKind::Fundamental(_) => "FUNDAMENTAL_VIOLATED",
                        ObstructionKind::NormalizationInconsistent => "NORMALIZATION_INCONSISTENT",
                        ObstructionKind::NonzeroRemainder => "NONZERO_REMAINDER",
                    };
                    r.put("OBSTRUCTION", format!("{} {what}", ob.m));
                    if let ObstructionKind::Fundamental(v) = &ob.kind {
                        r.lines(
                            "FUNDAMENTAL",
                            v.iter().map(|(b, c)| format!("{} {} {} {} {} {}", b[0], b[1], b[2], b[3], c.re, c.im)).collect(),
                        );
                    }
                    r.lines("H'", ob.remainder.term_lines(""));
                }
            }
            if let Some(dir) = emit {
                write_emit(dir, &rep)?;
                r.put("EMITTED", dir.display().to_string());
            }
        }
        Verb::UniqueCheck { m } => {
            let m = m.ok_or_else(|| CliError::Parse("missing --m".into()))?;
            let u = uniqueness_nullspace(m)?;
            r.put("M", m);
            r.put("UNKNOWNS", u.unknowns);
            r.put("NULLSPACE_DIM", u.dimension);
            for (k, b) in u.basis.iter().enumerate() {
                r.lines(&format!("BASIS_{k}"), b.term_lines(""));
            }
            if u.dimension != 0 {
                code = 4;
            }
        }
        Verb::CaseOracle { case, params } => {
            let id: CaseId = case.as_deref().ok_or_else(|| CliError::Parse("missing --case".into()))?.parse()?;
            let p: CaseParams = params.as_deref().unwrap_or("").parse()?;
            let g = case_germ(id, &p, trunc_default())?;
            let engine = engine_case_series(&g)?;
            let display = case_series(id, &p)?;
            let diff = case_diff(&engine, &display);
            r.put("CASE", id.to_string());
            r.put("PARAMS", params.clone().unwrap_or_default());
            for (k, s) in [("X1", &engine.x1), ("X2", &engine.x2), ("Y1", &engine.y1), ("Y2", &engine.y2)] {
                r.lines(k, series_lines(s));
            }
            r.lines("DIFF", diff.iter().map(|(n, e, a, b)| format!("{n} {e} engine={a} display={b}")).collect());
            r.put("MATCH", diff.is_empty());
            if !diff.is_empty() {
                code = 4;
            }
        }
    }
    Ok((r, code))
}

fn write_emit(dir: &Path, rep: &crate::flatten::FlattenReport) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Precondition(format!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for s in &rep.steps {
        fs::write(dir.join(kernel_file_name(s.m)), s.kernel.to_text()).map_err(io)?;
    }
    fs::write(dir.join("final.germ"), rep.final_germ.to_text()).map_err(io)?;
    fs::write(dir.join("report.txt"), rep.to_text()).map_err(io)?;
    Ok(())
}

fn render(verb: &Verb, json_out: bool) -> Outcome {
    match execute(verb) {
        Ok((r, code)) => {
            let stdout = if json_out {
                let mut doc = r.json();
                if let Value::Object(m) = &mut doc {
                    m.insert("exit_code".into(), json!(code));
                }
                format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
            } else {
                r.text()
            };
            Outcome { code, stdout, stderr: String::new() }
        }
        Err(e) => {
            let stdout = if json_out {
                format!("{}\n", serde_json::to_string_pretty(&json!({"error": e.message(), "exit_code": e.code()})).expect("json"))
            } else {
                String::new()
            };
            Outcome { code: e.code(), stdout, stderr: format!("error: {}\n", e.message()) }
        }
    }
}

/// Parse `args` (including the program name) and run.
pub fn run<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let msg = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: msg, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: msg }
            };
        }
    };
    let Some(batch) = &cli.batch else {
        return render(&cli.verb, cli.json);
    };
    let list = match fs::read_to_string(batch) {
        Ok(t) => t,
        Err(e) => return Outcome { code: 2, stdout: String::new(), stderr: format!("error: cannot read {}: {e}\n", batch.display()) },
    };
    let base = strip_batch(&args);
    let entries: Vec<&str> = list.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    let outs: Vec<(String, Outcome)> = entries
        .par_iter()
        .map(|line| {
            let out = match shlex::split(line) {
                Some(tokens) => run(base.iter().cloned().chain(tokens)),
                None => Outcome { code: 2, stdout: String::new(), stderr: format!("error: unbalanced quotes in {line:?}\n") },
            };
            (line.to_string(), out)
        })
        .collect();
    let mut all = Outcome { code: 0, stdout: String::new(), stderr: String::new() };
    for (line, o) in outs {
        all.stdout.push_str(&format!("== {line}\n"));
        all.stdout.push_str(&o.stdout);
        all.stderr.push_str(&o.stderr);
        all.code = all.code.max(o.code);
    }
    all
}

/// The argument vector with `--batch FILE` removed.
fn strip_batch(args: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--batch" {
            it.next();
        } else if !a.starts_with("--batch=") {
            out.push(a.clone());
        }
    }
    out
}
