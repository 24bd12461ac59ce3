//! Germs `w = R(z, z̄)` with R = O(|z|²), their real/imaginary split and
//! the coordinate changes that preserve the graph form.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use thiserror::Error;

use crate::numeric::{parse_rational, ExactMatrix, GaussianRational, NumericError, GQ};
use crate::quadratic::QuadraticPair;
use crate::series::{subst_w, Exponent, Series, SeriesError, WTemplate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GermError {
    #[error("germ has a term of degree {0}; expected R = O(|z|^2)")]
    LowDegree(u32),
    #[error("truncation order {0} is below 2")]
    OrderTooLow(u32),
    #[error("quadratic part not of form (0011): the z̄² block is not the conjugate of the z² block")]
    MalformedQuadratic,
    #[error("singular coordinate matrix")]
    SingularChange,
    #[error("mu must be nonzero")]
    ZeroMu,
    #[error("operation needs n = 2, germ has n = {0}")]
    NeedsTwoVariables(usize),
    #[error("kernel coefficient at {0:?} has weight {1}, expected {2}")]
    KernelWeight((u32, u32, u32), u32, u32),
    #[error("kernel coefficient b(0, m/2) must vanish for even m")]
    KernelSideCondition,
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Germ {
    r: Series,
}

/// Real and imaginary parts of R: R = G + iE with G, E real.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GESplit {
    pub g: Series,
    pub e: Series,
}

impl Germ {
    pub fn new(r: Series) -> Result<Germ, GermError> {
        if r.trunc < 2 {
            return Err(GermError::OrderTooLow(r.trunc));
        }
        if let Some(d) = r.min_degree() {
            if d < 2 {
                return Err(GermError::LowDegree(d));
            }
        }
        let q2 = r.homogeneous_part(2);
        for (e, c) in &q2.terms {
            if e.anti_degree() == 2 && q2.coeff(&e.conj()) != c.conj() {
                return Err(GermError::MalformedQuadratic);
            }
            if e.holo_degree() == 2 && q2.coeff(&e.conj()) != c.conj() {
                return Err(GermError::MalformedQuadratic);
            }
        }
        Ok(Germ { r })
    }

    /// Germ with quadratic part 2Re(z𝒜zᵗ) + zℬz̄ᵗ and nothing else.
    pub fn from_pair(pair: &QuadraticPair, trunc: u32) -> Result<Germ, GermError> {
        let n = pair.n();
        let mut r = Series::zero(n, trunc);
        for j in 0..n {
            for k in 0..n {
                let mut e = Exponent::zero(n);
                e.0[j] += 1;
                e.0[n + k] += 1;
                r.add_term(e, pair.b.get(j, k).clone());
                let mut h = Exponent::zero(n);
                h.0[j] += 1;
                h.0[k] += 1;
                let a = pair.a.get(j, k).clone();
                r.add_term(h.conj(), a.conj());
                r.add_term(h, a);
            }
        }
        Germ::new(r)
    }

    /// The parabolic quadric |z₁|²+|z₂|²+½(z₁²+z₂²+z̄₁²+z̄₂²).
    pub fn p1_quadric(trunc: u32) -> Germ {
        let half = GQ::q(1, 2, 0, 1);
        let pair = QuadraticPair::new(
            ExactMatrix::diag(&[half.clone(), half]),
            ExactMatrix::identity(2),
        );
        Germ::from_pair(&pair, trunc).expect("quadric germ")
    }

    pub fn r(&self) -> &Series {
        &self.r
    }

    pub fn n(&self) -> usize {
        self.r.nvars
    }

    pub fn trunc(&self) -> u32 {
        self.r.trunc
    }

    pub fn require_n2(&self) -> Result<(), GermError> {
        if self.n() != 2 {
            return Err(GermError::NeedsTwoVariables(self.n()));
        }
        Ok(())
    }

    pub fn split(&self) -> GESplit {
        let rc = self.r.conj();
        let g = (&self.r + &rc).scale(&GQ::q(1, 2, 0, 1));
        // (R - R̄)/(2i) = -i/2 (R - R̄)
        let e = (&self.r - &rc).scale(&GQ::q(0, 1, -1, 2));
        GESplit { g, e }
    }

    pub fn quadratic(&self) -> QuadraticPair {
        let n = self.n();
        let mut a = ExactMatrix::zeros(n, n);
        let mut b = ExactMatrix::zeros(n, n);
        for (e, c) in &self.r.homogeneous_part(2).terms {
            let idx: Vec<usize> = e.0.iter().enumerate().flat_map(|(k, &m)| std::iter::repeat_n(k, m as usize)).collect();
            let (i, j) = (idx[0], idx[1]);
            if i < n && j >= n {
                b.set(i, j - n, c.clone());
            } else if j < n {
                if i == j {
                    a.set(i, i, c.clone());
                } else {
                    let h = c.scale(&crate::numeric::rat(1, 2));
                    a.set(i, j, h.clone());
                    a.set(j, i, h);
                }
            }
        }
        QuadraticPair::new(a, b)
    }

    /// Coordinates z = z̃P, w = μw̃, followed by the holomorphic quadratic
    /// shear that restores the conjugate symmetry of the pure blocks. The
    /// quadratic pair transforms as 𝒜̃ = P𝒜Pᵗ/μ̄, ℬ̃ = PℬP̄ᵗ/μ.
    pub fn linear_change(&self, p: &ExactMatrix, mu: &GaussianRational) -> Result<Germ, GermError> {
        if mu.is_zero() {
            return Err(GermError::ZeroMu);
        }
        if p.rows != self.n() || p.cols != self.n() || p.det()?.is_zero() {
            return Err(GermError::SingularChange);
        }
        let mut r = self.r.linear_subst(p)?.scale(&mu.inv()?);
        let q2 = r.homogeneous_part(2);
        for (e, c) in &q2.terms {
            if e.holo_degree() == 2 {
                let want = q2.coeff(&e.conj()).conj();
                r.add_term(e.clone(), &want - c);
            }
        }
        Germ::new(r)
    }

    /// R' = R + B(z, R), i.e. the germ in coordinates w' = w + B(z, w).
    pub fn shear(&self, k: &KernelPolynomial) -> Result<Germ, GermError> {
        self.require_n2()?;
        let b = subst_w(&k.template(), &self.r)?;
        Germ::new(&self.r + &b)
    }

    pub fn with_trunc(&self, n: u32) -> Result<Germ, GermError> {
        Germ::new(self.r.with_trunc(n))
    }

    pub fn parse(text: &str) -> Result<Germ, GermError> {
        let (header, body) = parse_header(text, &["vars", "order"])?;
        let n = header["vars"] as usize;
        let order = header["order"];
        let r = Series::parse_terms(n, order, body).map_err(|e| match e {
            SeriesError::Format { line, msg } => GermError::Format { line, msg },
            o => o.into(),
        })?;
        Germ::new(r)
    }

    pub fn to_text(&self) -> String {
        format!("vars {}\norder {}\n{}", self.n(), self.trunc(), self.r)
    }
}

impl fmt::Display for Germ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Read `key value` header lines in the given order and return the
/// remaining numbered lines.
pub(crate) fn parse_header<'a>(
    text: &'a str,
    keys: &[&str],
) -> Result<(BTreeMap<String, u32>, Vec<(usize, &'a str)>), GermError> {
    let mut out = BTreeMap::new();
    let mut rest = Vec::new();
    let mut want = keys.iter();
    let mut next = want.next();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match next {
            Some(key) => {
                let mut it = line.split_whitespace();
                let (Some(kw), Some(v), None) = (it.next(), it.next(), it.next()) else {
                    return Err(GermError::Format { line: k + 1, msg: format!("expected `{key} <count>`") });
                };
                if kw != *key {
                    return Err(GermError::Format { line: k + 1, msg: format!("expected `{key}`, found `{kw}`") });
                }
                let v: u32 =
                    v.parse().map_err(|_| GermError::Format { line: k + 1, msg: format!("bad value {v:?}") })?;
                out.insert(key.to_string(), v);
                next = want.next();
            }
            None => rest.push((k + 1, raw)),
        }
    }
    if let Some(key) = next {
        return Err(GermError::Format { line: 0, msg: format!("missing `{key}` header") });
    }
    Ok((out, rest))
}

/// B(z, w) = Σ b_{αj} z^α w^j over |α| + 2j = m, n = 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelPolynomial {
    pub m: u32,
    pub coeffs: BTreeMap<(u32, u32, u32), GaussianRational>,
}

impl KernelPolynomial {
    pub fn zero(m: u32) -> Self {
        KernelPolynomial { m, coeffs: BTreeMap::new() }
    }

    pub fn new<I>(m: u32, coeffs: I) -> Result<Self, GermError>
    where
        I: IntoIterator<Item = ((u32, u32, u32), GaussianRational)>,
    {
        let mut k = KernelPolynomial::zero(m);
        for (key, c) in coeffs {
            if c.is_zero() {
                continue;
            }
            let w = key.0 + key.1 + 2 * key.2;
            if w != m {
                return Err(GermError::KernelWeight(key, w, m));
            }
            if m.is_multiple_of(2) && key == (0, 0, m / 2) {
                return Err(GermError::KernelSideCondition);
            }
            *k.coeffs.entry(key).or_insert_with(GQ::zero) += &c;
        }
        k.coeffs.retain(|_, v| !v.is_zero());
        Ok(k)
    }

    /// Monomial keys allowed at weight m (excluding the even-m side index).
    pub fn index_set(m: u32) -> Vec<(u32, u32, u32)> {
        let mut v = Vec::new();
        for j in 0..=m / 2 {
            let d = m - 2 * j;
            for a1 in (0..=d).rev() {
                let key = (a1, d - a1, j);
                if m.is_multiple_of(2) && key == (0, 0, m / 2) {
                    continue;
                }
                v.push(key);
            }
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn neg(&self) -> Self {
        KernelPolynomial { m: self.m, coeffs: self.coeffs.iter().map(|(k, v)| (*k, -v)).collect() }
    }

    pub fn template(&self) -> WTemplate {
        let mut t = WTemplate::default();
        for (&(a1, a2, j), c) in &self.coeffs {
            t.add_term(Exponent::new4(a1, a2, 0, 0), j, c.clone());
        }
        t
    }

    pub fn parse(text: &str) -> Result<Self, GermError> {
        let (header, body) = parse_header(text, &["weight"])?;
        let m = header["weight"];
        let mut seen = std::collections::BTreeSet::new();
        let mut coeffs = Vec::new();
        for (line, raw) in body {
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let err = |msg: String| GermError::Format { line, msg };
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 5 {
                return Err(err(format!("expected 5 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<u32>().map_err(|_| err(format!("bad index {s:?}")));
            let key = (num(f[0])?, num(f[1])?, num(f[2])?);
            if !seen.insert(key) {
                return Err(err(format!("duplicate index {key:?}")));
            }
            let re = parse_rational(f[3]).map_err(|e| err(e.to_string()))?;
            let im = parse_rational(f[4]).map_err(|e| err(e.to_string()))?;
            coeffs.push((key, GaussianRational::new(re, im)));
        }
        KernelPolynomial::new(m, coeffs)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("weight {}\n", self.m);
        for (&(a1, a2, j), c) in &self.coeffs {
            s.push_str(&format!("{a1} {a2} {j} {} {}\n", c.re, c.im));
        }
        s
    }
}

impl Default for KernelPolynomial {
    fn default() -> Self {
        KernelPolynomial::zero(3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;
    use num_traits::One;
    use proptest::prelude::*;

    fn x4(s: u32, t: u32, h: u32, r: u32) -> Exponent {
        Exponent::new4(s, t, h, r)
    }

    fn one() -> GQ {
        GQ::one()
    }

    fn germ(trunc: u32, terms: &[((u32, u32, u32, u32), GQ)]) -> Germ {
        Germ::new(Series::from_terms(2, trunc, terms.iter().map(|((s, t, h, r), c)| (x4(*s, *t, *h, *r), c.clone()))))
            .unwrap()
    }

    fn ex31() -> Germ {
        germ(4, &[((1, 0, 0, 1), one()), ((1, 1, 0, 0), one()), ((0, 0, 1, 1), one())])
    }

    #[test]
    fn split_example_33() {
        let g = germ(3, &[((1, 0, 0, 1), one())]);
        let s = g.split();
        let half = GQ::q(1, 2, 0, 1);
        assert_eq!(s.g, Series::from_terms(2, 3, [(x4(1, 0, 0, 1), half.clone()), (x4(0, 1, 1, 0), half)]));
        // (z1 zb2 - zb1 z2)/(2i)
        assert_eq!(s.e, Series::from_terms(2, 3, [(x4(1, 0, 0, 1), GQ::q(0, 1, -1, 2)), (x4(0, 1, 1, 0), GQ::q(0, 1, 1, 2))]));
    }

    #[test]
    fn split_of_real_germ_and_cubic_perturbation() {
        let q = Germ::p1_quadric(4);
        assert!(q.split().e.is_zero());
        assert_eq!(q.split().g, *q.r());
        let r = q.r() + &Series::monomial(2, 4, x4(2, 1, 0, 0), GQ::i());
        let s = Germ::new(r).unwrap().split();
        let half = GQ::q(1, 2, 0, 1);
        assert_eq!(s.e, Series::from_terms(2, 4, [(x4(2, 1, 0, 0), half.clone()), (x4(0, 0, 2, 1), half)]));
    }

    #[test]
    fn quadratic_pair_examples() {
        let p = ex31().quadratic();
        assert_eq!(p.a, ExactMatrix::from_rows(vec![vec![GQ::zero(), rat(1, 2).into()], vec![rat(1, 2).into(), GQ::zero()]]).unwrap());
        assert_eq!(p.b, ExactMatrix::from_ints(&[&[0, 1], &[0, 0]]));
        let q = Germ::p1_quadric(3).quadratic();
        assert_eq!(q.a, ExactMatrix::identity(2).scale(&GQ::q(1, 2, 0, 1)));
        assert_eq!(q.b, ExactMatrix::identity(2));
        let z = germ(4, &[((3, 0, 0, 0), one())]).quadratic();
        assert!(z.a.is_zero() && z.b.is_zero());
    }

    #[test]
    fn validation() {
        let bad = Series::from_terms(2, 3, [(x4(1, 0, 0, 0), one())]);
        assert_eq!(Germ::new(bad), Err(GermError::LowDegree(1)));
        let bad = Series::from_terms(2, 3, [(x4(2, 0, 0, 0), one())]);
        assert_eq!(Germ::new(bad), Err(GermError::MalformedQuadratic));
        let bad = Series::from_terms(2, 3, [(x4(2, 0, 0, 0), GQ::i()), (x4(0, 0, 2, 0), GQ::i())]);
        assert_eq!(Germ::new(bad), Err(GermError::MalformedQuadratic));
        assert_eq!(Germ::new(Series::zero(2, 1)), Err(GermError::OrderTooLow(1)));
    }

    #[test]
    fn linear_change_examples() {
        let q = Germ::p1_quadric(3);
        assert_eq!(q.linear_change(&ExactMatrix::identity(2), &one()).unwrap(), q);
        let s = q.linear_change(&ExactMatrix::identity(2), &GQ::from_int(2)).unwrap();
        assert_eq!(s.quadratic().b, ExactMatrix::identity(2).scale(&GQ::q(1, 2, 0, 1)));
        let b = ExactMatrix::from_ints(&[&[0, 1], &[1, 0]]);
        let g = Germ::from_pair(&QuadraticPair::new(ExactMatrix::zeros(2, 2), b), 3).unwrap();
        let p = ExactMatrix::diag(&[one(), GQ::i()]);
        let t = g.linear_change(&p, &one()).unwrap();
        let want = ExactMatrix::from_rows(vec![vec![GQ::zero(), -GQ::i()], vec![GQ::i(), GQ::zero()]]).unwrap();
        assert_eq!(t.quadratic().b, want);
        assert!(t.quadratic().b.is_hermitian());
        assert!(q.linear_change(&ExactMatrix::zeros(2, 2), &one()).is_err());
        assert_eq!(q.linear_change(&ExactMatrix::identity(2), &GQ::zero()), Err(GermError::ZeroMu));
    }

    #[test]
    fn shear_examples() {
        let q = Germ::p1_quadric(3);
        assert_eq!(q.shear(&KernelPolynomial::zero(3)).unwrap(), q);
        let k = KernelPolynomial::new(3, [((2, 1, 0), GQ::i())]).unwrap();
        let s = q.shear(&k).unwrap();
        assert_eq!(*s.r(), q.r() + &Series::monomial(2, 3, x4(2, 1, 0, 0), GQ::i()));
        let q5 = Germ::p1_quadric(5);
        let s5 = q5.shear(&k).unwrap();
        assert_eq!(*s5.r(), q5.r() + &Series::monomial(2, 5, x4(2, 1, 0, 0), GQ::i()));
    }

    #[test]
    fn kernel_validation_and_text() {
        assert!(KernelPolynomial::new(4, [((0, 0, 2), one())]).is_err());
        assert!(KernelPolynomial::new(4, [((1, 0, 1), one())]).is_err());
        let k = KernelPolynomial::new(4, [((1, 1, 1), GQ::q(1, 2, -1, 3)), ((4, 0, 0), one())]).unwrap();
        let t = k.to_text();
        assert_eq!(KernelPolynomial::parse(&t).unwrap(), k);
        assert_eq!(KernelPolynomial::parse(&t).unwrap().to_text(), t);
        assert_eq!(KernelPolynomial::index_set(4).len(), 5 + 3);
    }

    #[test]
    fn germ_text_round_trip() {
        let g = ex31();
        let t = g.to_text();
        assert_eq!(Germ::parse(&t).unwrap(), g);
        assert_eq!(Germ::parse(&t).unwrap().to_text(), t);
        assert!(Germ::parse("order 3\nvars 2\n").is_err());
        assert!(matches!(Germ::parse("vars 2\norder 3\n1 0 0 1 1\n"), Err(GermError::Format { line: 3, .. })));
    }

    fn small() -> impl Strategy<Value = GQ> {
        (-3i64..4, -3i64..4).prop_map(|(a, b)| GQ::q(a, 2, b, 1))
    }

    fn arb_germ() -> impl Strategy<Value = Germ> {
        (
            proptest::collection::vec(small(), 3),
            proptest::collection::vec(small(), 4),
            proptest::collection::vec(((0u32..3, 0u32..3, 0u32..3, 0u32..3), small()), 0..6),
        )
            .prop_map(|(a, b, hi)| {
                let am = ExactMatrix::from_rows(vec![vec![a[0].clone(), a[1].clone()], vec![a[1].clone(), a[2].clone()]]).unwrap();
                let bm = ExactMatrix::from_rows(vec![vec![b[0].clone(), b[1].clone()], vec![b[2].clone(), b[3].clone()]]).unwrap();
                let g = Germ::from_pair(&QuadraticPair::new(am, bm), 6).unwrap();
                let extra = Series::from_terms(
                    2,
                    6,
                    hi.into_iter().filter(|(e, _)| e.0 + e.1 + e.2 + e.3 >= 3).map(|((s, t, h, r), c)| (x4(s, t, h, r), c)),
                );
                Germ::new(g.r() + &extra).unwrap()
            })
    }

    fn arb_invertible() -> impl Strategy<Value = ExactMatrix> {
        proptest::collection::vec(small(), 4)
            .prop_map(|v| ExactMatrix::from_rows(vec![vec![v[0].clone(), v[1].clone()], vec![v[2].clone(), v[3].clone()]]).unwrap())
            .prop_filter("invertible", |m| !m.det().unwrap().is_zero())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn split_recombines(g in arb_germ()) {
            let s = g.split();
            prop_assert!(s.g.is_real());
            prop_assert!(s.e.is_real());
            prop_assert_eq!(&s.g + &s.e.scale(&GQ::i()), g.r().clone());
        }

        #[test]
        fn quadratic_reconstructs(g in arb_germ()) {
            let rebuilt = Germ::from_pair(&g.quadratic(), g.trunc()).unwrap();
            prop_assert_eq!(rebuilt.r().clone(), g.r().homogeneous_part(2));
        }

        #[test]
        fn linear_change_matches_pair_transform(g in arb_germ(), p in arb_invertible(), mu in small().prop_filter("nonzero", |x| !x.is_zero())) {
            let t = g.linear_change(&p, &mu).unwrap();
            prop_assert_eq!(t.quadratic(), g.quadratic().transform(&p, &mu).unwrap());
        }

        #[test]
        fn linear_change_composes(g in arb_germ(), p1 in arb_invertible(), p2 in arb_invertible(),
                                  m1 in small().prop_filter("nonzero", |x| !x.is_zero()),
                                  m2 in small().prop_filter("nonzero", |x| !x.is_zero())) {
            let g = g.with_trunc(2).unwrap();
            let two = g.linear_change(&p1, &m1).unwrap().linear_change(&p2, &m2).unwrap();
            let one = g.linear_change(&p2.mul(&p1).unwrap(), &(&m2 * &m1)).unwrap();
            prop_assert_eq!(two.quadratic(), one.quadratic());
        }

        #[test]
        fn shear_round_trip(g in arb_germ(), c in proptest::collection::vec(small(), 3), m in 3u32..5) {
            let idx = KernelPolynomial::index_set(m);
            let k = KernelPolynomial::new(m, idx.into_iter().zip(c.into_iter().cycle())).unwrap();
            let there = g.shear(&k).unwrap();
            let back = there.shear(&k.neg()).unwrap();
            let agree = 2 * m - 3;
            prop_assert_eq!(back.r().truncate(agree), g.r().truncate(agree));
        }
    }
}
