//! Bracket calculus for n = 2 germs: the canonical (1,0) field L, the
//! coefficient families of [L, L̄] and [L, [L, L̄]], the non-minimality
//! residual X₁X₂ − Y₁Y₂, and verification of explicit witness fields.
//!
//! Precision bookkeeping. A degree-k term of R first reaches the field
//! coefficients at degree k − 1, the λ and Γ families at degree k − 1, the
//! X/Y combinations at degree k, and the residual at degree k + 2. So with
//! R known through degree N the residual is exact through N + 2. The
//! computations below lift R to a polynomial, work at a truncation three
//! degrees above the requested one (each derivative costs a degree) and
//! cut the result back.

mod oracle;

use std::fmt;

use thiserror::Error;

use crate::germ::{parse_header, Germ, GermError};
use crate::numeric::{GaussianRational, GQ};
use crate::series::{Exponent, Series, SeriesError};

pub use oracle::{case_germ, case_series, CaseId, CaseParams, CaseSeries};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrFieldsError {
    #[error(transparent)]
    Germ(#[from] GermError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("order {order} exceeds the achievable residual order {max} for a germ truncated at {trunc}")]
    OrderTooHigh { order: u32, max: u32, trunc: u32 },
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("unknown case {0:?}")]
    UnknownCase(String),
    #[error("case {case}: {msg}")]
    CaseConstraint { case: String, msg: String },
}

/// `cf_z1 ∂/∂z₁ + cf_z2 ∂/∂z₂ + cf_w ∂/∂w` with coefficients in (z, z̄).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TangentField {
    pub cf_z1: Series,
    pub cf_z2: Series,
    pub cf_w: Series,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketData {
    /// λ₍₁₎..λ₍₆₎, index 0..6.
    pub lambda: [Series; 6],
    /// Γ₍₁₎..Γ₍₆₎.
    pub gamma: [Series; 6],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObstructionReport {
    pub order: u32,
    pub x1: Series,
    pub x2: Series,
    pub y1: Series,
    pub y2: Series,
    pub residual: Series,
    pub first_nonzero: Option<(Exponent, GaussianRational)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WitnessCheck {
    pub l_h: bool,
    pub l_hbar: bool,
    /// `None` when no χ was supplied.
    pub l_chi: Option<bool>,
}

impl WitnessCheck {
    pub fn all_true(&self) -> bool {
        self.l_h && self.l_hbar && self.l_chi.unwrap_or(true)
    }
}

impl fmt::Display for WitnessCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let z = |b: bool| if b { "=0" } else { "!=0" };
        write!(f, "L(h){} L(conj h){}", z(self.l_h), z(self.l_hbar))?;
        if let Some(c) = self.l_chi {
            write!(f, " L(chi){}", z(c))?;
        }
        Ok(())
    }
}

/// Highest degree through which the residual is determined by R mod degree trunc + 1.
pub fn achievable_order(trunc: u32) -> u32 {
    trunc + 2
}

struct Coefficients {
    a: Series,
    b: Series,
    c: Series,
}

fn coefficients(r: &Series) -> Coefficients {
    let rc = r.conj();
    let g = (r + &rc).scale(&GQ::q(1, 2, 0, 1));
    let e = (r - &rc).scale(&GQ::q(0, 1, -1, 2));
    let (g1, g2, e1, e2) = (g.dz(1), g.dz(2), e.dz(1), e.dz(2));
    let mi = GQ::q(0, 1, -1, 1);
    let a = &g2 + &e2.scale(&mi);
    let b = &g1 + &e1.scale(&mi);
    let c = (&(&g2 * &e1) - &(&g1 * &e2)).scale(&GQ::q(0, 1, 2, 1));
    Coefficients { a, b, c }
}

/// L(f) = A f₁ − B f₂ on functions of (z, z̄).
fn apply_l(a: &Series, b: &Series, f: &Series) -> Series {
    &(a * &f.dz(1)) - &(b * &f.dz(2))
}

struct Full {
    co: Coefficients,
    lambda: [Series; 6],
    gamma: [Series; 6],
}

fn compute(r: &Series) -> Full {
    let co = coefficients(r);
    let (a, b, c) = (&co.a, &co.b, &co.c);
    let (ab, bb, cb) = (a.conj(), b.conj(), c.conj());
    // T = [L, L̄] = λ₁∂̄₁ + λ₂∂̄₂ + λ₃∂̄_w + λ₄∂₁ + λ₅∂₂ + λ₆∂_w
    let l1 = apply_l(a, b, &ab);
    let l2 = -&apply_l(a, b, &bb);
    let l3 = apply_l(a, b, &cb);
    let lbar = |f: &Series| &(&ab * &f.dzb(1)) - &(&bb * &f.dzb(2));
    let l4 = -&lbar(a);
    let l5 = lbar(b);
    let l6 = -&lbar(c);
    let t_of = |f: &Series| {
        let s1 = &(&l1 * &f.dzb(1)) + &(&l2 * &f.dzb(2));
        let s2 = &(&l4 * &f.dz(1)) + &(&l5 * &f.dz(2));
        &s1 + &s2
    };
    let g1 = apply_l(a, b, &l1);
    let g2 = apply_l(a, b, &l2);
    let g3 = apply_l(a, b, &l3);
    let g4 = &apply_l(a, b, &l4) - &t_of(a);
    let g5 = &apply_l(a, b, &l5) + &t_of(b);
    let g6 = &apply_l(a, b, &l6) - &t_of(c);
    Full { co, lambda: [l1, l2, l3, l4, l5, l6], gamma: [g1, g2, g3, g4, g5, g6] }
}

fn lifted(g: &Germ, work: u32) -> Result<Series, CrFieldsError> {
    g.require_n2()?;
    Ok(g.r().lift(work))
}

pub fn build_canonical_field(g: &Germ) -> Result<TangentField, CrFieldsError> {
    let n = g.trunc();
    let co = coefficients(&lifted(g, n + 2)?);
    Ok(TangentField { cf_z1: co.a.truncate(n - 1), cf_z2: (-&co.b).truncate(n - 1), cf_w: co.c.truncate(n) })
}

/// λ and Γ families, each exact through degree trunc − 1.
pub fn bracket_data(g: &Germ) -> Result<BracketData, CrFieldsError> {
    let n = g.trunc();
    let full = compute(&lifted(g, n + 2)?);
    let cut = |s: &Series| s.truncate(n - 1);
    Ok(BracketData { lambda: full.lambda.each_ref().map(cut), gamma: full.gamma.each_ref().map(cut) })
}

pub fn obstruction(g: &Germ, order: u32) -> Result<ObstructionReport, CrFieldsError> {
    let max = achievable_order(g.trunc());
    if order > max {
        return Err(CrFieldsError::OrderTooHigh { order, max, trunc: g.trunc() });
    }
    let full = compute(&lifted(g, order + 3)?);
    let (a, b) = (&full.co.a, &full.co.b);
    let (ab, bb) = (a.conj(), b.conj());
    let [l1, l2, _, l4, l5, _] = &full.lambda;
    let [g1, g2, _, g4, g5, _] = &full.gamma;
    let x1 = &(&bb * g1) + &(&ab * g2);
    let x2 = &(l4 * b) + &(l5 * a);
    let y1 = &(b * g4) + &(a * g5);
    let y2 = &(l1 * &bb) + &(l2 * &ab);
    let residual = (&(&x1 * &x2) - &(&y1 * &y2)).truncate(order);
    let xo = order.min(g.trunc());
    let first_nonzero = residual.first_term().map(|(e, c)| (e.clone(), c.clone()));
    Ok(ObstructionReport {
        order,
        x1: x1.truncate(xo),
        x2: x2.truncate(xo),
        y1: y1.truncate(xo),
        y2: y2.truncate(xo),
        residual,
        first_nonzero,
    })
}

impl ObstructionReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("ORDER {}\n", self.order);
        for l in self.residual.term_lines() {
            out.push_str(&l);
            out.push('\n');
        }
        match &self.first_nonzero {
            Some((e, c)) => out.push_str(&format!("FIRST_OBSTRUCTION {} {} {}\n", e, c.re, c.im)),
            None => out.push_str(&format!("RESIDUAL_ZERO_TO {}\n", self.order)),
        }
        out
    }
}

impl fmt::Display for ObstructionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Apply `f` to h = −w + R, to h̄ and to χ, with the graph substitution
/// w = R, and test each for vanishing through degree `g.trunc()`. The field
/// and χ are read as exact polynomials.
pub fn verify_witness(g: &Germ, f: &TangentField, chi: Option<&Series>) -> Result<WitnessCheck, CrFieldsError> {
    let n = g.trunc();
    let work = n + 1;
    let r = lifted(g, work)?;
    let rc = r.conj();
    let (p, q, c) = (f.cf_z1.with_trunc(work), f.cf_z2.with_trunc(work), f.cf_w.with_trunc(work));
    let act = |s: &Series| &(&p * &s.dz(1)) + &(&q * &s.dz(2));
    let zero_through = |s: &Series| s.truncate(n).is_zero();
    let lh = &act(&r) - &c;
    let lhb = act(&rc);
    let lchi = chi.map(|x| zero_through(&act(&x.with_trunc(work))));
    Ok(WitnessCheck { l_h: zero_through(&lh), l_hbar: zero_through(&lhb), l_chi: lchi })
}

impl TangentField {
    /// `vars 2`, `order N`, then `coef z1`, `coef z2`, `coef w` blocks of term lines.
    pub fn parse(text: &str) -> Result<TangentField, CrFieldsError> {
        let (header, body) = parse_header(text, &["vars", "order"])?;
        if header["vars"] != 2 {
            return Err(GermError::NeedsTwoVariables(header["vars"] as usize).into());
        }
        let order = header["order"];
        let mut blocks: [Vec<(usize, &str)>; 3] = Default::default();
        let mut seen = [false; 3];
        let mut cur: Option<usize> = None;
        for (lineno, raw) in body {
            let line = raw.split('#').next().unwrap_or("").trim();
            if let Some(name) = line.strip_prefix("coef") {
                let k = match name.trim() {
                    "z1" => 0,
                    "z2" => 1,
                    "w" => 2,
                    o => return Err(CrFieldsError::Format { line: lineno, msg: format!("unknown block {o:?}") }),
                };
                if seen[k] {
                    return Err(CrFieldsError::Format { line: lineno, msg: "repeated block".into() });
                }
                seen[k] = true;
                cur = Some(k);
                continue;
            }
            if line.is_empty() {
                continue;
            }
            match cur {
                Some(k) => blocks[k].push((lineno, raw)),
                None => return Err(CrFieldsError::Format { line: lineno, msg: "term before `coef` block".into() }),
            }
        }
        let parse = |k: usize| Series::parse_terms(2, order, blocks[k].iter().copied()).map_err(series_format);
        Ok(TangentField { cf_z1: parse(0)?, cf_z2: parse(1)?, cf_w: parse(2)? })
    }

    pub fn to_text(&self) -> String {
        let order = self.cf_z1.trunc.max(self.cf_z2.trunc).max(self.cf_w.trunc);
        let mut out = format!("vars 2\norder {order}\n");
        for (name, s) in [("z1", &self.cf_z1), ("z2", &self.cf_z2), ("w", &self.cf_w)] {
            out.push_str(&format!("coef {name}\n{s}"));
        }
        out
    }
}

fn series_format(e: SeriesError) -> CrFieldsError {
    match e {
        SeriesError::Format { line, msg } => CrFieldsError::Format { line, msg },
        o => o.into(),
    }
}

/// A bare series file: `vars n`, `order N`, term lines.
pub fn parse_series_file(text: &str) -> Result<Series, CrFieldsError> {
    let (header, body) = parse_header(text, &["vars", "order"])?;
    Series::parse_terms(header["vars"] as usize, header["order"], body).map_err(series_format)
}

pub fn series_file_text(s: &Series) -> String {
    format!("vars {}\norder {}\n{}", s.nvars, s.trunc, s)
}

/// Homogeneous degree-2 parts of the engine's X₁, X₂, Y₁, Y₂.
pub fn engine_case_series(g: &Germ) -> Result<CaseSeries, CrFieldsError> {
    let rep = obstruction(&g.with_trunc(g.trunc().max(2))?, 2)?;
    Ok(CaseSeries {
        x1: rep.x1.homogeneous_part(2),
        x2: rep.x2.homogeneous_part(2),
        y1: rep.y1.homogeneous_part(2),
        y2: rep.y2.homogeneous_part(2),
    })
}

/// Termwise differences between two quadruples, as `(name, exponent, left, right)`.
pub fn case_diff(left: &CaseSeries, right: &CaseSeries) -> Vec<(&'static str, Exponent, GQ, GQ)> {
    let mut out = Vec::new();
    for (name, l, r) in [("X1", &left.x1, &right.x1), ("X2", &left.x2, &right.x2), ("Y1", &left.y1, &right.y1), ("Y2", &left.y2, &right.y2)] {
        let mut keys: Vec<&Exponent> = l.terms.keys().chain(r.terms.keys()).collect();
        keys.sort();
        keys.dedup();
        for e in keys {
            let (a, b) = (l.coeff(e), r.coeff(e));
            if a != b {
                out.push((name, e.clone(), a, b));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{int, rat, ExactMatrix};
    use crate::quadratic::QuadraticPair;
    use crate::series::Var;
    use num_traits::Zero;
    use proptest::prelude::*;

    fn germ(lines: &[&str], order: u32) -> Germ {
        let text = format!("vars 2\norder {order}\n{}", lines.join("\n"));
        Germ::parse(&text).unwrap()
    }

    fn ex31(order: u32) -> Germ {
        // z₁z̄₂ + z₁z₂ + z̄₁z̄₂
        germ(&["1 0 0 1 1 0", "1 1 0 0 1 0", "0 0 1 1 1 0"], order)
    }

    fn s(lines: &[&str], trunc: u32) -> Series {
        Series::parse_terms(2, trunc, lines.iter().enumerate().map(|(k, l)| (k + 1, *l))).unwrap()
    }

    fn case1a(a: i64, b: i64, d: i64, u: GQ, order: u32) -> Germ {
        let pair = QuadraticPair::new(
            ExactMatrix::from_rows(vec![vec![int(a).into(), int(b).into()], vec![int(b).into(), int(d).into()]]).unwrap(),
            ExactMatrix::diag(&[GQ::from_int(1), u]),
        );
        Germ::from_pair(&pair, order).unwrap()
    }

    #[test]
    fn example_field() {
        let f = build_canonical_field(&ex31(8)).unwrap();
        assert_eq!(f.cf_z1, s(&["1 0 0 0 1 0", "0 0 1 0 1 0"], 7));
        assert_eq!(f.cf_z2, s(&["0 1 0 0 -1 0"], 7));
        assert_eq!(f.cf_w, s(&["1 0 0 1 1 0", "0 1 1 0 1 0", "0 0 1 1 1 0"], 8));
    }

    #[test]
    fn flat_quadric_field_has_no_w_part() {
        let g = Germ::p1_quadric(6);
        let f = build_canonical_field(&g).unwrap();
        assert!(f.cf_w.is_zero());
        let sp = g.split();
        assert_eq!(f.cf_z1, sp.g.dz(2).truncate(5));
        assert_eq!(f.cf_z2, (-&sp.g.dz(1)).truncate(5));
    }

    #[test]
    fn case_1a_field_and_lambda() {
        let u = GQ::q(3, 5, 4, 5);
        let g = case1a(1, 1, 1, u.clone(), 6);
        let f = build_canonical_field(&g).unwrap();
        let lin = |x: &Series| x.homogeneous_part(1);
        let z1 = Series::var(2, 5, Var::Z(0));
        let z2 = Series::var(2, 5, Var::Z(1));
        let zb1 = Series::var(2, 5, Var::Zbar(0));
        let zb2 = Series::var(2, 5, Var::Zbar(1));
        let two = GQ::from_int(2);
        let want_a = &(&zb2.scale(&u.conj()) + &z1.scale(&two)) + &z2.scale(&two);
        let want_b = &(&z1.scale(&two) + &z2.scale(&two)) + &zb1;
        assert_eq!(f.cf_z1, want_a);
        assert_eq!(f.cf_z2, -&want_b);
        let bd = bracket_data(&g).unwrap();
        assert_eq!(lin(&bd.lambda[0]).terms, (-&want_b.scale(&u)).terms);
    }

    #[test]
    fn obstruction_example_and_quadric_vanish() {
        let r = obstruction(&ex31(6), 6).unwrap();
        assert!(r.residual.is_zero());
        assert!(r.to_text().ends_with("RESIDUAL_ZERO_TO 6\n"));
        assert!(obstruction(&Germ::p1_quadric(6), 6).unwrap().residual.is_zero());
    }

    #[test]
    fn obstruction_case_1a_certificate() {
        let u = GQ::q(3, 5, 4, 5);
        let r = obstruction(&case1a(1, 1, 1, u.clone(), 2), 4).unwrap();
        let c = r.residual.c4(0, 0, 4, 0);
        assert_eq!(c.norm_sq(), rat(64, 5) * rat(64, 5));
        // (4abu + 4b̄d)(2aū) − (−4abū − 4b̄d)(−2au) = 8ab̄d(ū − u)
        assert_eq!(c, GQ::q(0, 1, -64, 5));
        let first = r.first_nonzero.clone().unwrap();
        assert_eq!(first.0.degree(), 4);

        let r0 = obstruction(&case1a(1, 0, 1, u.clone(), 2), 4).unwrap();
        assert!(r0.residual.c4(0, 0, 4, 0).is_zero());
        assert!(!r0.residual.c4(0, 3, 1, 0).is_zero());
    }

    #[test]
    fn order_bound_enforced() {
        assert!(matches!(obstruction(&ex31(4), 7), Err(CrFieldsError::OrderTooHigh { max: 6, .. })));
        assert!(obstruction(&ex31(4), 6).is_ok());
    }

    #[test]
    fn residual_depends_on_germ_through_order_minus_two() {
        // Adding a degree-k term leaves the residual unchanged below degree k + 2.
        let base = ex31(6);
        let mut r = base.r().clone();
        r.add_term(Exponent::new4(2, 0, 1, 2), GQ::q(1, 1, 2, 1));
        let pert = Germ::new(r).unwrap();
        let a = obstruction(&base.with_trunc(4).unwrap(), 6).unwrap().residual;
        let b = obstruction(&pert, 6).unwrap().residual;
        assert_eq!(a.truncate(6), b.truncate(6));
        let c = obstruction(&pert, 7).unwrap().residual;
        assert_eq!(c.truncate(6), a);
    }

    #[test]
    fn witness_examples() {
        let g = ex31(8);
        let f = TangentField {
            cf_z1: s(&["1 0 0 0 1 0", "0 0 1 0 1 0"], 8),
            cf_z2: s(&["0 1 0 0 -1 0"], 8),
            cf_w: s(&["1 0 0 1 1 0", "0 1 1 0 1 0", "0 0 1 1 1 0"], 8),
        };
        let chi = s(&["1 1 0 1 1 0", "0 1 1 1 1 0"], 8);
        let w = verify_witness(&g, &f, Some(&chi)).unwrap();
        assert!(w.all_true());
        assert_eq!(w.to_string(), "L(h)=0 L(conj h)=0 L(chi)=0");
        let bad = s(&["1 0 0 1 1 0"], 8);
        assert_eq!(verify_witness(&g, &f, Some(&bad)).unwrap().l_chi, Some(false));
    }

    #[test]
    fn field_file_round_trip() {
        let f = build_canonical_field(&ex31(8)).unwrap();
        let text = f.to_text();
        let back = TangentField::parse(&text).unwrap();
        assert_eq!(back.cf_z1.terms, f.cf_z1.terms);
        assert_eq!(back.cf_w.terms, f.cf_w.terms);
        assert!(TangentField::parse("vars 2\norder 3\n1 0 0 0 1 0\n").is_err());
        assert!(TangentField::parse("vars 2\norder 3\ncoef z3\n").is_err());
    }

    /// Independent route: Lie brackets of vector fields written in the four
    /// real-variable directions z₁, z₂, z̄₁, z̄₂ plus the w, w̄ slots.
    #[derive(Clone)]
    struct Vf([Series; 6]);

    impl Vf {
        fn apply(&self, f: &Series) -> Series {
            let vars = [Var::Z(0), Var::Z(1), Var::Zbar(0), Var::Zbar(1)];
            let mut acc = Series::zero(2, f.trunc);
            for (k, v) in vars.iter().enumerate() {
                acc = &acc + &(&self.0[k] * &f.d(*v).unwrap());
            }
            acc
        }
        fn bracket(&self, o: &Vf) -> Vf {
            Vf(std::array::from_fn(|k| &self.apply(&o.0[k]) - &o.apply(&self.0[k])))
        }
    }

    fn dense_germ(seed: &[(u32, u32, u32, u32, i64, i64)], trunc: u32) -> Germ {
        let mut r = Series::zero(2, trunc);
        for &(s, t, h, rr, re, im) in seed {
            let e = Exponent::new4(s, t, h, rr);
            let c = GQ::new(int(re), int(im));
            if e.degree() == 2 && e.holo_degree() != 1 {
                // pure quadratic blocks come in conjugate pairs
                if e.holo_degree() == 2 {
                    r.add_term(e.conj(), c.conj());
                    r.add_term(e, c);
                }
                continue;
            }
            r.add_term(e, c);
        }
        Germ::new(r).unwrap()
    }

    fn arb_germ() -> impl Strategy<Value = Germ> {
        let term = (0u32..3, 0u32..3, 0u32..3, 0u32..3, -3i64..4, -3i64..4);
        proptest::collection::vec(term, 1..7).prop_map(|mut v| {
            for t in v.iter_mut() {
                if t.0 + t.1 + t.2 + t.3 < 2 {
                    t.2 += 2 - (t.0 + t.1 + t.2 + t.3);
                }
            }
            dense_germ(&v, 4)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn lambda_conjugation_symmetry(g in arb_germ()) {
            let bd = bracket_data(&g).unwrap();
            for k in 0..3 {
                prop_assert_eq!(&bd.lambda[k], &(-&bd.lambda[k + 3].conj()));
            }
        }

        #[test]
        fn canonical_field_is_tangent(g in arb_germ()) {
            let f = build_canonical_field(&g).unwrap();
            let w = verify_witness(&g, &f, None).unwrap();
            prop_assert!(w.l_h && w.l_hbar);
        }

        #[test]
        fn brackets_match_vector_field_expansion(g in arb_germ()) {
            let bd = bracket_data(&g).unwrap();
            let w = g.trunc() + 2;
            let f = build_canonical_field(&g.with_trunc(w).unwrap()).unwrap();
            let z = Series::zero(2, w);
            let l = Vf([f.cf_z1.clone(), f.cf_z2.clone(), z.clone(), z.clone(), f.cf_w.clone(), z.clone()]);
            let lb = Vf([z.clone(), z.clone(), f.cf_z1.conj(), f.cf_z2.conj(), z.clone(), f.cf_w.conj()]);
            let t = l.bracket(&lb);
            let u = l.bracket(&t);
            // slot order: ∂₁, ∂₂, ∂̄₁, ∂̄₂, ∂_w, ∂̄_w
            let perm = [2, 3, 5, 0, 1, 4];
            let n = g.trunc() - 1;
            for k in 0..6 {
                prop_assert_eq!(&bd.lambda[k], &t.0[perm[k]].truncate(n));
                prop_assert_eq!(&bd.gamma[k], &u.0[perm[k]].truncate(n));
            }
        }
    }

    #[test]
    fn flat_quadric_gamma_w_components_vanish_low() {
        let bd = bracket_data(&Germ::p1_quadric(6)).unwrap();
        assert!(bd.gamma[2].truncate(1).is_zero());
        assert!(bd.gamma[5].truncate(1).is_zero());
        assert!(bd.lambda[2].is_zero());
    }
}
