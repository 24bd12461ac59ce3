//! Truncated polynomials in z₁..zₙ, z̄₁..z̄ₙ over the Gaussian rationals.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::numeric::{parse_rational, ExactMatrix, GaussianRational, NumericError, GQ};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("number of variables differs: {0} vs {1}")]
    NvarsMismatch(usize, usize),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("cannot differentiate a series truncated at degree 0")]
    TruncationExhausted,
    #[error("substituted value has a nonzero constant term")]
    ConstantTerm,
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Exponent vector `[z₁..zₙ, z̄₁..z̄ₙ]`. For n = 2 this is `[s, t, h, r]`,
/// the monomial z₁ˢ z₂ᵗ z̄₁ʰ z̄₂ʳ; the bracket index `[t s r h]` of the
/// flattening tables maps to it through [`Exponent::from_bracket`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Exponent(pub Vec<u32>);

impl Exponent {
    pub fn zero(nvars: usize) -> Self {
        Exponent(vec![0; 2 * nvars])
    }

    pub fn new4(s: u32, t: u32, h: u32, r: u32) -> Self {
        Exponent(vec![s, t, h, r])
    }

    /// Bracket order `[t s r h]` to monomial z₁ˢ z₂ᵗ z̄₁ʰ z̄₂ʳ.
    pub fn from_bracket(t: u32, s: u32, r: u32, h: u32) -> Self {
        Exponent(vec![s, t, h, r])
    }

    /// Bracket order, `[t s r h]`.
    pub fn bracket(&self) -> [u32; 4] {
        [self.0[1], self.0[0], self.0[3], self.0[2]]
    }

    pub fn nvars(&self) -> usize {
        self.0.len() / 2
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn holo_degree(&self) -> u32 {
        self.0[..self.nvars()].iter().sum()
    }

    pub fn anti_degree(&self) -> u32 {
        self.0[self.nvars()..].iter().sum()
    }

    pub fn conj(&self) -> Self {
        let n = self.nvars();
        let mut v = self.0[n..].to_vec();
        v.extend_from_slice(&self.0[..n]);
        Exponent(v)
    }

    pub fn add(&self, o: &Exponent) -> Exponent {
        Exponent(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn is_self_conjugate(&self) -> bool {
        *self == self.conj()
    }
}

impl Ord for Exponent {
    fn cmp(&self, o: &Self) -> Ordering {
        self.degree().cmp(&o.degree()).then_with(|| o.0.cmp(&self.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// A differentiation variable: `Z(k)` is z_{k+1}, `Zbar(k)` is z̄_{k+1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Z(usize),
    Zbar(usize),
}

impl Var {
    fn slot(self, nvars: usize) -> Result<usize, SeriesError> {
        match self {
            Var::Z(k) if k < nvars => Ok(k),
            Var::Zbar(k) if k < nvars => Ok(nvars + k),
            v => Err(SeriesError::UnknownVariable(format!("{v:?}"))),
        }
    }
}

/// Every stored exponent has degree at most `trunc`; no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Series {
    pub nvars: usize,
    pub trunc: u32,
    pub terms: BTreeMap<Exponent, GaussianRational>,
}

impl Series {
    pub fn zero(nvars: usize, trunc: u32) -> Self {
        Series { nvars, trunc, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, trunc: u32, c: GaussianRational) -> Self {
        Self::monomial(nvars, trunc, Exponent::zero(nvars), c)
    }

    pub fn monomial(nvars: usize, trunc: u32, e: Exponent, c: GaussianRational) -> Self {
        let mut s = Self::zero(nvars, trunc);
        s.add_term(e, c);
        s
    }

    pub fn var(nvars: usize, trunc: u32, v: Var) -> Self {
        let mut e = Exponent::zero(nvars);
        e.0[v.slot(nvars).expect("variable index")] = 1;
        Self::monomial(nvars, trunc, e, GQ::one())
    }

    pub fn from_terms<I>(nvars: usize, trunc: u32, terms: I) -> Self
    where
        I: IntoIterator<Item = (Exponent, GaussianRational)>,
    {
        let mut s = Self::zero(nvars, trunc);
        for (e, c) in terms {
            s.add_term(e, c);
        }
        s
    }

    /// Accumulate `c` at `e`, dropping it if beyond the truncation.
    pub fn add_term(&mut self, e: Exponent, c: GaussianRational) {
        assert_eq!(e.0.len(), 2 * self.nvars, "exponent length");
        if c.is_zero() || e.degree() > self.trunc {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(v) => {
                *v += &c;
                if v.is_zero() {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn check(&self, o: &Series) -> Result<(), SeriesError> {
        if self.nvars != o.nvars {
            return Err(SeriesError::NvarsMismatch(self.nvars, o.nvars));
        }
        Ok(())
    }

    pub fn try_add(&self, o: &Series) -> Result<Series, SeriesError> {
        self.check(o)?;
        let mut out = self.truncate(self.trunc.min(o.trunc));
        for (e, c) in &o.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, o: &Series) -> Result<Series, SeriesError> {
        self.try_add(&o.neg_ref())
    }

    pub fn try_mul(&self, o: &Series) -> Result<Series, SeriesError> {
        self.check(o)?;
        let trunc = self.trunc.min(o.trunc);
        let mut acc: BTreeMap<Exponent, GaussianRational> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            let da = ea.degree();
            if da > trunc {
                break;
            }
            for (eb, cb) in &o.terms {
                if da + eb.degree() > trunc {
                    break;
                }
                let p = ca * cb;
                acc.entry(ea.add(eb)).and_modify(|v| *v += &p).or_insert(p);
            }
        }
        acc.retain(|_, v| !v.is_zero());
        Ok(Series { nvars: self.nvars, trunc, terms: acc })
    }

    pub fn scale(&self, c: &GaussianRational) -> Series {
        if c.is_zero() {
            return Series::zero(self.nvars, self.trunc);
        }
        Series {
            nvars: self.nvars,
            trunc: self.trunc,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    fn neg_ref(&self) -> Series {
        Series {
            nvars: self.nvars,
            trunc: self.trunc,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), -v)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Series {
        let mut acc = Series::constant(self.nvars, self.trunc, GQ::one());
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Swap each zⱼ exponent with the z̄ⱼ exponent and conjugate coefficients.
    pub fn conj(&self) -> Series {
        Series {
            nvars: self.nvars,
            trunc: self.trunc,
            terms: self.terms.iter().map(|(e, v)| (e.conj(), v.conj())).collect(),
        }
    }

    pub fn is_real(&self) -> bool {
        self.conj() == *self
    }

    /// Formal partial derivative; the result is known one degree less.
    pub fn d(&self, v: Var) -> Result<Series, SeriesError> {
        let slot = v.slot(self.nvars)?;
        if self.trunc == 0 {
            return Err(SeriesError::TruncationExhausted);
        }
        let mut out = Series::zero(self.nvars, self.trunc - 1);
        for (e, c) in &self.terms {
            let k = e.0[slot];
            if k == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2.0[slot] -= 1;
            out.add_term(e2, c * &GQ::from_int(k as i64));
        }
        Ok(out)
    }

    /// Shorthand for n = 2 partials: `dz(1)`, `dzb(2)` etc. with 1-based index.
    pub fn dz(&self, k: usize) -> Series {
        self.d(Var::Z(k - 1)).expect("derivative")
    }

    pub fn dzb(&self, k: usize) -> Series {
        self.d(Var::Zbar(k - 1)).expect("derivative")
    }

    /// Coefficient lookup; indices that are negative or absent give 0.
    pub fn coeff_at(&self, idx: &[i64]) -> GaussianRational {
        if idx.len() != 2 * self.nvars || idx.iter().any(|&x| x < 0) {
            return GQ::zero();
        }
        let e = Exponent(idx.iter().map(|&x| x as u32).collect());
        self.coeff(&e)
    }

    pub fn coeff(&self, e: &Exponent) -> GaussianRational {
        self.terms.get(e).cloned().unwrap_or_else(GQ::zero)
    }

    /// n = 2 lookup by `(s, t, h, r)`.
    pub fn c4(&self, s: i64, t: i64, h: i64, r: i64) -> GaussianRational {
        self.coeff_at(&[s, t, h, r])
    }

    pub fn homogeneous_part(&self, d: u32) -> Series {
        Series {
            nvars: self.nvars,
            trunc: self.trunc,
            terms: self.terms.iter().filter(|(e, _)| e.degree() == d).map(|(e, v)| (e.clone(), v.clone())).collect(),
        }
    }

    /// Sum of homogeneous parts in the degree range `lo..=hi`.
    pub fn degree_range(&self, lo: u32, hi: u32) -> Series {
        Series {
            nvars: self.nvars,
            trunc: self.trunc,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| (lo..=hi).contains(&e.degree()))
                .map(|(e, v)| (e.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn truncate(&self, n: u32) -> Series {
        Series {
            nvars: self.nvars,
            trunc: n.min(self.trunc),
            terms: self.terms.iter().filter(|(e, _)| e.degree() <= n).map(|(e, v)| (e.clone(), v.clone())).collect(),
        }
    }

    /// Reinterpret the stored terms as exact to a higher truncation. Only
    /// valid when the series is known to be a polynomial of degree ≤ trunc.
    pub fn lift(&self, n: u32) -> Series {
        Series { nvars: self.nvars, trunc: n.max(self.trunc), terms: self.terms.clone() }
    }

    pub fn with_trunc(&self, n: u32) -> Series {
        if n <= self.trunc {
            self.truncate(n)
        } else {
            self.lift(n)
        }
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().next().map(|e| e.degree())
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.degree()).max()
    }

    /// First nonzero term in canonical order.
    pub fn first_term(&self) -> Option<(&Exponent, &GaussianRational)> {
        self.terms.iter().next()
    }

    /// Substitute z = z̃·P (row vector convention), z̄ = conj(z̃)·P̄.
    pub fn linear_subst(&self, p: &ExactMatrix) -> Result<Series, SeriesError> {
        let n = self.nvars;
        if p.rows != n || p.cols != n {
            return Err(NumericError::DimensionMismatch("substitution matrix".into()).into());
        }
        let mut images = Vec::with_capacity(2 * n);
        for k in 0..n {
            let mut s = Series::zero(n, self.trunc);
            for j in 0..n {
                let mut e = Exponent::zero(n);
                e.0[j] = 1;
                s.add_term(e, p.get(j, k).clone());
            }
            images.push(s);
        }
        for k in 0..n {
            let c = images[k].conj();
            images.push(c);
        }
        let mut powers: Vec<Vec<Series>> = images
            .iter()
            .map(|s| vec![Series::constant(n, self.trunc, GQ::one()), s.clone()])
            .collect();
        let mut out = Series::zero(n, self.trunc);
        for (e, c) in &self.terms {
            let mut term = Series::constant(n, self.trunc, c.clone());
            for (slot, &k) in e.0.iter().enumerate() {
                while powers[slot].len() <= k as usize {
                    let next = powers[slot].last().unwrap() * &images[slot];
                    powers[slot].push(next);
                }
                if k > 0 {
                    term = &term * &powers[slot][k as usize];
                }
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// Parse term lines `e₁ … e₂ₙ re im` (blank lines and `#` comments skipped).
    pub fn parse_terms<'a, I>(nvars: usize, trunc: u32, lines: I) -> Result<Series, SeriesError>
    where
        I: IntoIterator<Item = (usize, &'a str)>,
    {
        let mut s = Series::zero(nvars, trunc);
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in lines {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SeriesError::Format { line: lineno, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 * nvars + 2 {
                return Err(err(format!("expected {} fields, found {}", 2 * nvars + 2, fields.len())));
            }
            let mut e = Vec::with_capacity(2 * nvars);
            for f in &fields[..2 * nvars] {
                e.push(f.parse::<u32>().map_err(|_| err(format!("bad exponent {f:?}")))?);
            }
            let e = Exponent(e);
            let re = parse_rational(fields[2 * nvars]).map_err(|x| err(x.to_string()))?;
            let im = parse_rational(fields[2 * nvars + 1]).map_err(|x| err(x.to_string()))?;
            if !seen.insert(e.clone()) {
                return Err(err(format!("duplicate exponent {e}")));
            }
            if e.degree() > trunc {
                return Err(err(format!("degree {} exceeds order {}", e.degree(), trunc)));
            }
            s.add_term(e, GaussianRational::new(re, im));
        }
        Ok(s)
    }

    /// Canonical term lines, one per stored monomial.
    pub fn term_lines(&self) -> Vec<String> {
        self.terms.iter().map(|(e, c)| format!("{} {} {}", e, c.re, c.im)).collect()
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.term_lines() {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

impl Add<&Series> for &Series {
    type Output = Series;
    fn add(self, o: &Series) -> Series {
        self.try_add(o).expect("series sum")
    }
}

impl Sub<&Series> for &Series {
    type Output = Series;
    fn sub(self, o: &Series) -> Series {
        self.try_sub(o).expect("series difference")
    }
}

impl Mul<&Series> for &Series {
    type Output = Series;
    fn mul(self, o: &Series) -> Series {
        self.try_mul(o).expect("series product")
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.neg_ref()
    }
}

/// Polynomial in (z, z̄, w): keys are `(exponent, w-power)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WTemplate {
    pub terms: BTreeMap<(Exponent, u32), GaussianRational>,
}

impl WTemplate {
    pub fn add_term(&mut self, e: Exponent, wpow: u32, c: GaussianRational) {
        if c.is_zero() {
            return;
        }
        let key = (e, wpow);
        let v = self.terms.entry(key.clone()).or_insert_with(GQ::zero);
        *v += &c;
        if v.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn max_wpow(&self) -> u32 {
        self.terms.keys().map(|k| k.1).max().unwrap_or(0)
    }
}

/// Replace every power of w in `template` by the power of `value`.
pub fn subst_w(template: &WTemplate, value: &Series) -> Result<Series, SeriesError> {
    let n = value.nvars;
    if !value.coeff(&Exponent::zero(n)).is_zero() {
        return Err(SeriesError::ConstantTerm);
    }
    let mut powers = vec![Series::constant(n, value.trunc, GQ::one())];
    for _ in 0..template.max_wpow() {
        let next = powers.last().unwrap() * value;
        powers.push(next);
    }
    let mut out = Series::zero(n, value.trunc);
    for ((e, j), c) in &template.terms {
        if e.0.len() != 2 * n {
            return Err(SeriesError::NvarsMismatch(e.nvars(), n));
        }
        if e.degree() > value.trunc {
            continue;
        }
        let mono = Series::monomial(n, value.trunc, e.clone(), c.clone());
        out = &out + &(&mono * &powers[*j as usize]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;
    use proptest::prelude::*;

    fn x4(s: u32, t: u32, h: u32, r: u32) -> Exponent {
        Exponent::new4(s, t, h, r)
    }

    fn mono(trunc: u32, s: u32, t: u32, h: u32, r: u32, c: GQ) -> Series {
        Series::monomial(2, trunc, x4(s, t, h, r), c)
    }

    fn one() -> GQ {
        GQ::one()
    }

    #[test]
    fn ordering_is_graded_with_z1_first() {
        let mut v = vec![x4(0, 0, 0, 2), x4(1, 0, 0, 0), x4(2, 0, 0, 0), x4(0, 1, 1, 0), x4(1, 1, 0, 0)];
        v.sort();
        assert_eq!(v, vec![x4(1, 0, 0, 0), x4(2, 0, 0, 0), x4(1, 1, 0, 0), x4(0, 1, 1, 0), x4(0, 0, 0, 2)]);
    }

    #[test]
    fn products_and_truncation() {
        let z1 = mono(4, 1, 0, 0, 0, one());
        let zb1 = mono(4, 0, 0, 1, 0, one());
        assert_eq!(&z1 * &zb1, mono(4, 1, 0, 1, 0, one()));
        let s = &z1 + &zb1;
        let sq = &s * &s;
        let expect = Series::from_terms(2, 4, [(x4(2, 0, 0, 0), one()), (x4(1, 0, 1, 0), GQ::from_int(2)), (x4(0, 0, 2, 0), one())]);
        assert_eq!(sq, expect);
        let a = mono(2, 2, 0, 0, 0, one());
        let b = mono(2, 0, 1, 0, 0, one());
        assert!((&a * &b).is_zero());
        let c = mono(5, 0, 1, 0, 0, one());
        assert_eq!((&a * &c).trunc, 2);
    }

    #[test]
    fn conjugation_examples() {
        let s = mono(3, 1, 0, 0, 0, GQ::i());
        assert_eq!(s.conj(), mono(3, 0, 0, 1, 0, -GQ::i()));
        assert_eq!(mono(3, 1, 0, 0, 1, one()).conj(), mono(3, 0, 1, 1, 0, one()));
    }

    #[test]
    fn derivative_examples() {
        let s = mono(5, 2, 0, 0, 1, one());
        let d = s.d(Var::Z(0)).unwrap();
        assert_eq!(d, mono(4, 1, 0, 0, 1, GQ::from_int(2)));
        assert!(mono(5, 2, 0, 0, 0, one()).d(Var::Zbar(0)).unwrap().is_zero());
        assert!(s.d(Var::Z(2)).is_err());
        assert_eq!(Series::zero(2, 0).d(Var::Z(0)), Err(SeriesError::TruncationExhausted));
    }

    #[test]
    fn reality() {
        assert!(mono(3, 1, 0, 1, 0, one()).is_real());
        assert!((&mono(3, 2, 0, 0, 0, one()) + &mono(3, 0, 0, 2, 0, one())).is_real());
        assert!(!mono(3, 1, 0, 0, 1, one()).is_real());
    }

    #[test]
    fn coefficient_lookup() {
        let s = Series::from_terms(2, 4, [(x4(1, 2, 0, 0), GQ::q(1, 2, 0, 1)), (x4(0, 0, 1, 1), GQ::i())]);
        assert_eq!(s.c4(1, 2, 0, 0), GQ::q(1, 2, 0, 1));
        assert_eq!(s.c4(0, 0, 1, 1), GQ::i());
        assert_eq!(s.c4(3, 0, 0, 0), GQ::zero());
        assert_eq!(s.c4(-1, 0, 0, 0), GQ::zero());
    }

    fn quadric(trunc: u32) -> Series {
        let h = GQ::q(1, 2, 0, 1);
        Series::from_terms(
            2,
            trunc,
            [
                (x4(1, 0, 1, 0), one()),
                (x4(0, 1, 0, 1), one()),
                (x4(2, 0, 0, 0), h.clone()),
                (x4(0, 2, 0, 0), h.clone()),
                (x4(0, 0, 2, 0), h.clone()),
                (x4(0, 0, 0, 2), h),
            ],
        )
    }

    #[test]
    fn subst_examples() {
        let mut t = WTemplate::default();
        t.add_term(x4(1, 0, 0, 0), 1, one());
        let v = mono(4, 1, 0, 1, 0, one());
        assert_eq!(subst_w(&t, &v).unwrap(), mono(4, 2, 0, 1, 0, one()));
        assert!(subst_w(&t, &Series::zero(2, 4)).unwrap().is_zero());
        let mut bad = Series::zero(2, 4);
        bad.add_term(Exponent::zero(2), one());
        assert_eq!(subst_w(&t, &bad), Err(SeriesError::ConstantTerm));
    }

    #[test]
    fn w_squared_on_quadric_matches_brute_force() {
        // brute force: enumerate the 36 ordered pairs of quadric monomials
        let q = quadric(4);
        let mut t = WTemplate::default();
        t.add_term(Exponent::zero(2), 2, one());
        let got = subst_w(&t, &q).unwrap();
        let mut expect: BTreeMap<Vec<u32>, GQ> = BTreeMap::new();
        for (ea, ca) in &q.terms {
            for (eb, cb) in &q.terms {
                let k: Vec<u32> = ea.0.iter().zip(&eb.0).map(|(a, b)| a + b).collect();
                *expect.entry(k).or_insert_with(GQ::zero) += &(ca * cb);
            }
        }
        for (k, v) in &expect {
            assert_eq!(got.coeff(&Exponent(k.clone())), *v);
        }
        assert_eq!(got.len(), expect.values().filter(|v| !v.is_zero()).count());
        // z1^2 zb1^2 arises from |z1|^4 and from z1^2 * zb1^2 twice
        assert_eq!(got.c4(2, 0, 2, 0), GQ::q(3, 2, 0, 1));
    }

    #[test]
    fn term_line_round_trip() {
        let q = quadric(3);
        let text = q.to_string();
        let back = Series::parse_terms(2, 3, text.lines().enumerate()).unwrap();
        assert_eq!(back, q);
        let dup = "1 0 1 0 1 0\n1 0 1 0 2 0\n";
        assert!(Series::parse_terms(2, 3, dup.lines().enumerate()).is_err());
        assert!(Series::parse_terms(2, 3, ["1 0 1 0 1"].into_iter().enumerate()).is_err());
    }

    #[test]
    fn linear_subst_scales() {
        let q = quadric(3);
        let p = ExactMatrix::diag(&[GQ::from_int(2), GQ::one()]);
        let s = q.linear_subst(&p).unwrap();
        assert_eq!(s.c4(1, 0, 1, 0), GQ::from_int(4));
        assert_eq!(s.c4(2, 0, 0, 0), GQ::from_int(2));
        assert_eq!(s.c4(0, 1, 0, 1), GQ::one());
        assert_eq!(s.coeff(&x4(0, 0, 0, 2)), rat(1, 2).into());
    }

    fn arb_series(trunc: u32) -> impl Strategy<Value = Series> {
        proptest::collection::vec(((0u32..3, 0u32..3, 0u32..3, 0u32..3), (-4i64..5, -3i64..4)), 0..8).prop_map(
            move |v| {
                Series::from_terms(
                    2,
                    trunc,
                    v.into_iter().map(|((s, t, h, r), (a, b))| (x4(s, t, h, r), GQ::q(a, 1, b, 2))),
                )
            },
        )
    }

    proptest! {
        #[test]
        fn conj_is_ring_automorphism(a in arb_series(5), b in arb_series(5), c in (-3i64..4, -3i64..4)) {
            let lam = GQ::q(c.0, 1, c.1, 1);
            prop_assert_eq!((&a * &b).conj(), &a.conj() * &b.conj());
            prop_assert_eq!(a.scale(&lam).conj(), a.conj().scale(&lam.conj()));
            prop_assert_eq!(a.conj().conj(), a.clone());
        }

        #[test]
        fn leibniz(a in arb_series(5), b in arb_series(5), k in 0usize..4) {
            let v = if k < 2 { Var::Z(k) } else { Var::Zbar(k - 2) };
            let lhs = (&a * &b).d(v).unwrap();
            let rhs = &(&a.d(v).unwrap() * &b) + &(&a * &b.d(v).unwrap());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn mixed_partials_commute(a in arb_series(6)) {
            let x = a.d(Var::Z(0)).unwrap().d(Var::Zbar(1)).unwrap();
            let y = a.d(Var::Zbar(1)).unwrap().d(Var::Z(0)).unwrap();
            prop_assert_eq!(x, y);
        }

        #[test]
        fn substitution_is_multiplicative(j1 in 0u32..3, j2 in 0u32..3, e in (0u32..2, 0u32..2)) {
            let v = &quadric(6) + &mono(6, 1, 1, 1, 0, GQ::i());
            let mut t1 = WTemplate::default();
            t1.add_term(x4(e.0, 0, 0, 0), j1, GQ::from_int(2));
            let mut t2 = WTemplate::default();
            t2.add_term(x4(0, e.1, 0, 0), j2, GQ::i());
            let mut t12 = WTemplate::default();
            t12.add_term(x4(e.0, e.1, 0, 0), j1 + j2, GQ::q(0, 1, 2, 1));
            let lhs = subst_w(&t12, &v).unwrap();
            let rhs = &subst_w(&t1, &v).unwrap() * &subst_w(&t2, &v).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
