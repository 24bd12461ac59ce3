//! Formal flattening of germs whose quadratic part is the parabolic quadric
//! q = |z₁|² + |z₂|² + ½(z₁² + z₂² + z̄₁² + z̄₂²).
//!
//! Index convention: a table entry `[t s r h]` is the coefficient of
//! z₁ˢ z₂ᵗ z̄₁ʰ z̄₂ʳ, and entries with a negative index read as zero.
//! Φ and Ψ are computed by series arithmetic; the coefficient recursions
//! live only in the audit functions, so each route checks the other.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::germ::{Germ, GermError, KernelPolynomial};
use crate::numeric::{int, ExactMatrix, GaussianRational, Rational, SparseEchelon, SparseSolve, GQ};
use crate::quadratic::QuadraticPair;
use crate::series::{Exponent, Series, SeriesError, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlattenError {
    #[error("flattening driver requires parabolic quadric (P1)")]
    NotParabolic,
    #[error("germ is not flattened to order {0}: Im R has a nonzero term of degree {1}")]
    NotFlattened(u32, u32),
    #[error("degree {0} is below 3")]
    DegreeTooLow(u32),
    #[error("degree {0} exceeds the germ truncation {1}")]
    BeyondTruncation(u32, u32),
    #[error("normalization system singular at degree {m}: rank {rank} of {unknowns}\n{dump}")]
    Singular { m: u32, rank: usize, unknowns: usize, dump: String },
    #[error("normalization system inconsistent at degree {0}")]
    Inconsistent(u32),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Germ(#[from] GermError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Homogeneous table of degree `m`, keyed by `[t s r h]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HTable {
    pub m: u32,
    pub coeffs: BTreeMap<[u32; 4], GaussianRational>,
}

fn exp_of(b: [u32; 4]) -> Exponent {
    Exponent::from_bracket(b[0], b[1], b[2], b[3])
}

/// All brackets of total degree `m`, in a fixed order.
fn brackets(m: u32) -> Vec<[u32; 4]> {
    let mut v = Vec::new();
    for t in 0..=m {
        for s in 0..=m - t {
            for r in 0..=m - t - s {
                v.push([t, s, r, m - t - s - r]);
            }
        }
    }
    v
}

/// Bracket of the conjugate monomial: `[t s r h] ↦ [r h t s]`.
fn conj_bracket(b: [u32; 4]) -> [u32; 4] {
    [b[2], b[3], b[0], b[1]]
}

impl HTable {
    pub fn zero(m: u32) -> Self {
        HTable { m, coeffs: BTreeMap::new() }
    }

    /// Degree-`m` part of an n = 2 series.
    pub fn from_series(s: &Series, m: u32) -> Self {
        assert_eq!(s.nvars, 2, "tables are for n = 2");
        let mut t = HTable::zero(m);
        for (e, c) in &s.homogeneous_part(m).terms {
            t.coeffs.insert(e.bracket(), c.clone());
        }
        t
    }

    pub fn to_series(&self, trunc: u32) -> Series {
        Series::from_terms(2, trunc.max(self.m), self.coeffs.iter().map(|(b, c)| (exp_of(*b), c.clone())))
    }

    pub fn get(&self, t: i64, s: i64, r: i64, h: i64) -> GaussianRational {
        if t < 0 || s < 0 || r < 0 || h < 0 {
            return GQ::zero();
        }
        self.coeffs.get(&[t as u32, s as u32, r as u32, h as u32]).cloned().unwrap_or_else(GQ::zero)
    }

    pub fn set(&mut self, b: [u32; 4], c: GaussianRational) {
        assert_eq!(b.iter().sum::<u32>(), self.m, "bracket degree");
        if c.is_zero() {
            self.coeffs.remove(&b);
        } else {
            self.coeffs.insert(b, c);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `[t s r h] = conj [r h t s]` for every entry.
    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|(b, c)| self.coeffs.get(&conj_bracket(*b)).is_some_and(|d| *d == c.conj()))
    }

    /// The part with s + h odd.
    pub fn odd_part(&self) -> HTable {
        HTable { m: self.m, coeffs: self.coeffs.iter().filter(|(b, _)| (b[1] + b[3]) % 2 == 1).map(|(b, c)| (*b, c.clone())).collect() }
    }

    pub fn term_lines(&self, prefix: &str) -> Vec<String> {
        self.coeffs.iter().map(|(b, c)| format!("{prefix}{} {} {} {} {} {}", b[0], b[1], b[2], b[3], c.re, c.im)).collect()
    }
}

impl fmt::Display for HTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.term_lines("") {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiPsiTables {
    pub phi: HTable,
    pub psi: HTable,
}

fn x_sum(k: usize, trunc: u32) -> Series {
    &Series::var(2, trunc, Var::Z(k)) + &Series::var(2, trunc, Var::Zbar(k))
}

/// Φ = (z₂+z̄₂)H_1̄ − (z₁+z̄₁)H_2̄ and
/// Ψ = (z₂+z̄₂)²Φ₁ − (z₂+z̄₂)(z₁+z̄₁)Φ₂ + (z₁+z̄₁)Φ.
pub fn phi_psi(h: &HTable) -> PhiPsiTables {
    let m = h.m;
    let w = m + 3;
    let hs = h.to_series(w);
    let (x1, x2) = (x_sum(0, w), x_sum(1, w));
    let phi = &(&x2 * &hs.dzb(1)) - &(&x1 * &hs.dzb(2));
    let psi = &(&(&(&x2 * &x2) * &phi.dz(1)) - &(&(&x2 * &x1) * &phi.dz(2))) + &(&x1 * &phi);
    PhiPsiTables { phi: HTable::from_series(&phi, m), psi: HTable::from_series(&psi, m + 1) }
}

/// (z₂+z̄₂)Ψ₁ − (z₁+z̄₁)Ψ₂, homogeneous of degree m + 1.
pub fn fundamental_table(tables: &PhiPsiTables) -> HTable {
    let d = tables.psi.m;
    let w = d + 2;
    let ps = tables.psi.to_series(w);
    let (x1, x2) = (x_sum(0, w), x_sum(1, w));
    let f = &(&x2 * &ps.dz(1)) - &(&x1 * &ps.dz(2));
    HTable::from_series(&f, d)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FundamentalCheck {
    pub holds: bool,
    /// Nonzero coefficients of the fundamental expression, `[t s r h]`.
    pub violations: Vec<([u32; 4], GaussianRational)>,
}

pub fn check_fundamental(tables: &PhiPsiTables) -> FundamentalCheck {
    let f = fundamental_table(tables);
    let violations: Vec<_> = f.coeffs.into_iter().collect();
    FundamentalCheck { holds: violations.is_empty(), violations }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecursionAudit {
    pub checked_a1: usize,
    pub checked_a2: usize,
    pub checked_iden: usize,
    pub a1_failures: Vec<[u32; 4]>,
    pub a2_failures: Vec<[u32; 4]>,
    pub iden_failures: Vec<[u32; 4]>,
}

impl RecursionAudit {
    pub fn passed(&self) -> bool {
        self.a1_failures.is_empty() && self.a2_failures.is_empty() && self.iden_failures.is_empty()
    }
}

fn gi(n: i64) -> GQ {
    GQ::from_int(n)
}

fn a1_value(h: &HTable, t: i64, s: i64, r: i64, hh: i64) -> GQ {
    let mut v = &gi(hh + 1) * &h.get(t, s, r - 1, hh + 1);
    v += &(&gi(hh + 1) * &h.get(t - 1, s, r, hh + 1));
    v -= &(&gi(r + 1) * &h.get(t, s - 1, r + 1, hh));
    v -= &(&gi(r + 1) * &h.get(t, s, r + 1, hh - 1));
    v
}

fn a2_value(p: &HTable, t: i64, s: i64, r: i64, h: i64) -> GQ {
    let mut brace = p.get(t, s + 1, r - 2, h);
    brace += &(&gi(2) * &p.get(t - 1, s + 1, r - 1, h));
    brace += &p.get(t - 2, s + 1, r, h);
    let mut v = &gi(s + 1) * &brace;
    v -= &(&gi(t + 1) * &p.get(t + 1, s, r - 1, h - 1));
    v -= &(&gi(t) * &p.get(t, s, r, h - 1));
    v -= &(&gi(t + 1) * &p.get(t + 1, s - 1, r - 1, h));
    v -= &(&gi(t) * &p.get(t, s - 1, r, h));
    v += &p.get(t, s, r, h - 1);
    v += &p.get(t, s - 1, r, h);
    v
}

fn iden_value(q: &HTable, t: i64, s: i64, r: i64, h: i64) -> GQ {
    let mut v = &gi(s + 1) * &q.get(t - 1, s + 1, r, h);
    v += &(&gi(s + 1) * &q.get(t, s + 1, r - 1, h));
    v -= &(&gi(t + 1) * &q.get(t + 1, s - 1, r, h));
    v -= &(&gi(t + 1) * &q.get(t + 1, s, r, h - 1));
    v
}

/// Compare the Φ/Ψ recursions and the coefficient form of the fundamental
/// equation against the series computation, over every index tuple.
pub fn recursion_audit(h: &HTable, tables: &PhiPsiTables) -> RecursionAudit {
    let m = h.m;
    let mut out = RecursionAudit::default();
    for b in brackets(m) {
        let [t, s, r, hh] = b.map(i64::from);
        out.checked_a1 += 1;
        if a1_value(h, t, s, r, hh) != tables.phi.get(t, s, r, hh) {
            out.a1_failures.push(b);
        }
    }
    let fund = fundamental_table(tables);
    for b in brackets(m + 1) {
        let [t, s, r, hh] = b.map(i64::from);
        out.checked_a2 += 1;
        if a2_value(&tables.phi, t, s, r, hh) != tables.psi.get(t, s, r, hh) {
            out.a2_failures.push(b);
        }
        out.checked_iden += 1;
        if iden_value(&tables.psi, t, s, r, hh) != fund.get(t, s, r, hh) {
            out.iden_failures.push(b);
        }
    }
    out
}

/// `values[s h] = Σ_t (−1)^{deg−t−s−h} C(t, k) table[t s (deg−t−s−h) h]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KTransform {
    pub k: i64,
    pub values: BTreeMap<(u32, u32), GaussianRational>,
}

impl KTransform {
    pub fn get(&self, s: i64, h: i64) -> GaussianRational {
        if s < 0 || h < 0 {
            return GQ::zero();
        }
        self.values.get(&(s as u32, h as u32)).cloned().unwrap_or_else(GQ::zero)
    }
}

/// C(t, k), zero for k < 0 or t < k.
fn binom(t: i64, k: i64) -> Rational {
    if k < 0 || t < k {
        return Rational::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(t - i) / BigInt::from(i + 1);
    }
    Rational::from_integer(acc)
}

pub fn k_transforms(table: &HTable, k: i64) -> KTransform {
    let d = table.m as i64;
    let mut values = BTreeMap::new();
    for s in 0..=d {
        for h in 0..=d - s {
            let mut acc = GQ::zero();
            for t in k.max(0)..=d - s - h {
                let c = binom(t, k);
                if c.is_zero() {
                    continue;
                }
                let sign = if (d - t - s - h) % 2 == 0 { c } else { -c };
                acc += &table.get(t, s, d - t - s - h, h).scale(&sign);
            }
            if !acc.is_zero() {
                values.insert((s as u32, h as u32), acc);
            }
        }
    }
    KTransform { k, values }
}

/// Lazily computed k-transforms of one table.
struct KCache<'a> {
    table: &'a HTable,
    cache: BTreeMap<i64, KTransform>,
}

impl<'a> KCache<'a> {
    fn new(table: &'a HTable) -> Self {
        KCache { table, cache: BTreeMap::new() }
    }

    fn at(&mut self, k: i64, s: i64, h: i64) -> GQ {
        let table = self.table;
        self.cache.entry(k).or_insert_with(|| k_transforms(table, k)).get(s, h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdentityAudit {
    /// Fundamental equation held, so the audit ran.
    pub ran: bool,
    pub checked: usize,
    /// Failed identities as `(label, k or l, s)`.
    pub failures: Vec<(&'static str, i64, i64)>,
    /// Whether the even-degree chain and (lasteq) were part of the run.
    pub even_chain: bool,
}

impl IdentityAudit {
    pub fn passed(&self) -> bool {
        self.ran && self.failures.is_empty()
    }
}

/// The k-transform identities at h₀ = −1, plus for even m the chain
/// Ψ⁽²ᵏ⁺¹⁾[00] = 0, Φ⁽²ˡ⁻¹⁾[10] = 0 and
/// H⁽²ˡ⁻²⁾[11] + (m+1−2l)H⁽²ˡ⁻¹⁾[00] − 2l H⁽²ˡ⁾[00] = 0.
pub fn identity_audit(h: &HTable) -> IdentityAudit {
    let tables = phi_psi(h);
    if !check_fundamental(&tables).holds {
        return IdentityAudit::default();
    }
    let m = h.m as i64;
    let mut out = IdentityAudit { ran: true, even_chain: m % 2 == 0, ..Default::default() };
    let (mut hk, mut fk, mut pk) = (KCache::new(h), KCache::new(&tables.phi), KCache::new(&tables.psi));
    let kmax = m + 3;
    for k in 0..=kmax {
        for s in 0..=m + 2 {
            // h₀ = −1: h₀+1 = 0, h₀+2 = 1
            let lhs = fk.at(k, s, 0);
            let mut rhs = hk.at(k - 1, s, 1);
            rhs += &(&gi(m - s + 1 - k) * &hk.at(k, s - 1, 0));
            rhs -= &(&gi(k + 1) * &hk.at(k + 1, s - 1, 0));
            out.checked += 1;
            if lhs != rhs {
                out.failures.push(("B1", k, s));
            }
            let lhs = pk.at(k, s, 0);
            let rhs = &(&gi(s + 1) * &fk.at(k - 2, s + 1, 0)) - &(&gi(k - 1) * &fk.at(k, s - 1, 0));
            out.checked += 1;
            if lhs != rhs {
                out.failures.push(("B2", k, s));
            }
            let lhs = &gi(s + 1) * &pk.at(k - 1, s + 1, 0);
            let rhs = &gi(k + 1) * &pk.at(k + 1, s - 1, 0);
            out.checked += 1;
            if lhs != rhs {
                out.failures.push(("B3", k, s));
            }
        }
    }
    if out.even_chain {
        for l in 0..=kmax / 2 {
            for s in 0..=m + 2 {
                let lhs = &gi(s + 1) * &pk.at(2 * l - 1, s + 1, 0);
                let rhs = &gi(2 * l + 1) * &pk.at(2 * l + 1, s - 1, 0);
                out.checked += 1;
                if lhs != rhs {
                    out.failures.push(("C1", l, s));
                }
            }
            out.checked += 1;
            if !pk.at(2 * l + 1, 0, 0).is_zero() {
                out.failures.push(("C1-psi-chain", l, 0));
            }
            if l >= 1 {
                out.checked += 2;
                if !fk.at(2 * l - 1, 1, 0).is_zero() {
                    out.failures.push(("C1-phi-chain", l, 1));
                }
                let mut v = hk.at(2 * l - 2, 1, 1);
                v += &(&gi(m + 1 - 2 * l) * &hk.at(2 * l - 1, 0, 0));
                v -= &(&gi(2 * l) * &hk.at(2 * l, 0, 0));
                if !v.is_zero() {
                    out.failures.push(("lasteq", l, 0));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Part {
    Re,
    Im,
}

impl Part {
    fn of(self, c: &GQ) -> Rational {
        match self {
            Part::Re => c.re.clone(),
            Part::Im => c.im.clone(),
        }
    }
}

/// `part(E[bracket]) = 0`, tagged with the family it comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormConstraint {
    pub label: String,
    pub bracket: [u32; 4],
    pub part: Part,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizationSystem {
    pub m: u32,
    pub constraints: Vec<NormConstraint>,
    /// Kernel index `(0, 0, m/2)` fixed to zero for even m.
    pub side_condition: Option<(u32, u32, u32)>,
}

/// E at holomorphic multi-index `(a1, a2)` and antiholomorphic `(b1, b2)`.
fn e_at(a1: u32, a2: u32, b1: u32, b2: u32) -> [u32; 4] {
    [a2, a1, b2, b1]
}

pub fn normalization_system(m: u32) -> Result<NormalizationSystem, FlattenError> {
    if m < 3 {
        return Err(FlattenError::DegreeTooLow(m));
    }
    let mut cs = Vec::new();
    let mut both = |label: String, b: [u32; 4]| {
        for part in [Part::Re, Part::Im] {
            cs.push(NormConstraint { label: label.clone(), bracket: b, part });
        }
    };
    for s1 in (0..=m).rev() {
        both(format!("ng holomorphic s1={s1}"), e_at(s1, m - s1, 0, 0));
    }
    // second family read as holomorphic index (t1, t + t2), antiholomorphic (0, s)
    let mut seen = std::collections::BTreeSet::new();
    for s in 0..=m {
        for t in s..=m - s {
            for t1 in 0..=m - s - t {
                let t2 = m - s - t - t1;
                if t1 + t2 == 0 {
                    continue;
                }
                let b = e_at(t1, t + t2, 0, s);
                if seen.insert(b) {
                    both(format!("ng mixed t={t} t1={t1} t2={t2} s={s}"), b);
                }
            }
        }
    }
    let mi = m as i64;
    let (k, mh) = match m % 6 {
        3 => (-3, (mi + 3) / 6),
        4 => (-2, (mi + 2) / 6),
        5 => (-1, (mi + 1) / 6),
        0 => (0, mi / 6),
        1 => (1, (mi - 1) / 6),
        _ => (2, (mi - 2) / 6),
    };
    let (t_lo, u_lo, u_hi) = match k {
        -3 => (4 * mh - 1, 2 * mh - 2, 3 * mh - 3),
        -2 => (4 * mh - 1, 2 * mh - 1, 3 * mh - 3),
        -1 => (4 * mh, 2 * mh - 1, 3 * mh - 2),
        0 => (4 * mh + 1, 2 * mh - 1, 3 * mh - 2),
        1 => (4 * mh + 1, 2 * mh, 3 * mh - 1),
        _ => (4 * mh + 2, 2 * mh, 3 * mh - 1),
    };
    for t in t_lo.max(0)..=mi - 1 {
        both(format!("II{k} first t={t}"), e_at(0, t as u32, 0, (mi - t) as u32));
    }
    for t in u_lo.max(0)..=u_hi {
        let r = mi - 2 * t - 3;
        if r < 0 {
            continue;
        }
        both(format!("II{k} second t={t}"), e_at(1, (2 * t + 1) as u32, 1, r as u32));
    }
    let re = |b: [u32; 4]| NormConstraint { label: format!("II{k} real part"), bracket: b, part: Part::Re };
    match k {
        -2 => cs.push(re(e_at(1, (4 * mh - 3) as u32, 1, (2 * mh - 1) as u32))),
        0 => cs.push(re(e_at(0, (4 * mh) as u32, 0, (2 * mh) as u32))),
        2 => cs.push(re(e_at(0, (4 * mh + 1) as u32, 0, (2 * mh + 1) as u32))),
        _ => {}
    }
    for c in &cs {
        debug_assert_eq!(c.bracket.iter().sum::<u32>(), m);
    }
    Ok(NormalizationSystem { m, constraints: cs, side_condition: m.is_multiple_of(2).then_some((0, 0, m / 2)) })
}

impl NormalizationSystem {
    pub fn violations(&self, h: &HTable) -> Vec<&NormConstraint> {
        self.constraints.iter().filter(|c| !c.part.of(&h.get_b(c.bracket)).is_zero()).collect()
    }
}

impl HTable {
    fn get_b(&self, b: [u32; 4]) -> GQ {
        self.coeffs.get(&b).cloned().unwrap_or_else(GQ::zero)
    }
}

fn p1_pair() -> QuadraticPair {
    let half = GQ::q(1, 2, 0, 1);
    QuadraticPair::new(ExactMatrix::diag(&[half.clone(), half]), ExactMatrix::identity(2))
}

fn require_parabolic(g: &Germ) -> Result<(), FlattenError> {
    g.require_n2()?;
    if g.quadratic() != p1_pair() {
        return Err(FlattenError::NotParabolic);
    }
    Ok(())
}

/// Degree-m part of Im R.
pub fn h_from_germ(g: &Germ, m: u32) -> Result<HTable, FlattenError> {
    require_parabolic(g)?;
    if m > g.trunc() {
        return Err(FlattenError::BeyondTruncation(m, g.trunc()));
    }
    Ok(HTable::from_series(&g.split().e, m))
}

fn im_series(s: &Series) -> Series {
    (s - &s.conj()).scale(&GQ::q(0, 1, -1, 2))
}

/// Im B(z, q) for the given kernel.
pub fn kernel_image(k: &KernelPolynomial) -> Result<HTable, FlattenError> {
    let q = Germ::p1_quadric(k.m).r().clone();
    let b = crate::series::subst_w(&k.template(), &q)?;
    Ok(HTable::from_series(&im_series(&b), k.m))
}

/// Real unknowns (Re b, Im b) per kernel index and their images Im B(z, q).
fn kernel_columns(m: u32) -> Result<Vec<((u32, u32, u32), Part, HTable)>, FlattenError> {
    let mut cols = Vec::new();
    for key in KernelPolynomial::index_set(m) {
        for (part, c) in [(Part::Re, GQ::one()), (Part::Im, GQ::i())] {
            let k = KernelPolynomial::new(m, [(key, c)])?;
            cols.push((key, part, kernel_image(&k)?));
        }
    }
    Ok(cols)
}

fn flattened_below(g: &Germ, m: u32) -> Result<(), FlattenError> {
    if let Some(d) = g.split().e.truncate(m - 1).min_degree() {
        return Err(FlattenError::NotFlattened(m - 1, d));
    }
    Ok(())
}

/// The unique weight-m kernel B with H + Im B(z, q) normalized.
pub fn solve_kernel(g: &Germ, m: u32) -> Result<KernelPolynomial, FlattenError> {
    let h = h_from_germ(g, m)?;
    flattened_below(g, m)?;
    solve_kernel_for(&h)
}

pub fn solve_kernel_for(h: &HTable) -> Result<KernelPolynomial, FlattenError> {
    let m = h.m;
    let sys = normalization_system(m)?;
    let cols = kernel_columns(m)?;
    let mut ech = SparseEchelon::new(cols.len());
    for c in &sys.constraints {
        let row: Vec<(usize, Rational)> = cols
            .iter()
            .enumerate()
            .map(|(j, (_, _, img))| (j, c.part.of(&img.get_b(c.bracket))))
            .filter(|(_, v)| !v.is_zero())
            .collect();
        ech.insert(&row, &-c.part.of(&h.get_b(c.bracket)));
    }
    if ech.rank() < cols.len() {
        let dump = sys
            .constraints
            .iter()
            .map(|c| {
                let row: Vec<String> = cols.iter().map(|(_, _, img)| c.part.of(&img.get_b(c.bracket)).to_string()).collect();
                format!("{} {:?} {:?}: {}", c.label, c.bracket, c.part, row.join(" "))
            })
            .collect::<Vec<_>>()
            .join("\n");
        return Err(FlattenError::Singular { m, rank: ech.rank(), unknowns: cols.len(), dump });
    }
    let x = match ech.solve() {
        SparseSolve::Unique(x) => x,
        SparseSolve::Inconsistent => return Err(FlattenError::Inconsistent(m)),
        SparseSolve::Underdetermined { .. } => unreachable!("rank checked"),
    };
    let mut coeffs: BTreeMap<(u32, u32, u32), GQ> = BTreeMap::new();
    for ((key, part, _), v) in cols.iter().zip(x) {
        let e = coeffs.entry(*key).or_insert_with(GQ::zero);
        match part {
            Part::Re => e.re = v,
            Part::Im => e.im = v,
        }
    }
    Ok(KernelPolynomial::new(m, coeffs)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObstructionKind {
    /// H fails the fundamental equation; entries are its nonzero coefficients.
    Fundamental(Vec<([u32; 4], GaussianRational)>),
    /// No kernel meets the normalization conditions.
    NormalizationInconsistent,
    /// The kernel was applied but the normalized remainder is nonzero.
    NonzeroRemainder,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlattenObstruction {
    pub m: u32,
    pub kind: ObstructionKind,
    pub remainder: HTable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlattenStep {
    pub m: u32,
    pub kernel: KernelPolynomial,
    pub h_normalized_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlattenReport {
    pub order: u32,
    pub steps: Vec<FlattenStep>,
    pub final_germ: Germ,
    pub obstruction: Option<FlattenObstruction>,
}

pub fn kernel_file_name(m: u32) -> String {
    format!("kernel_{m}.ker")
}

impl FlattenReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("FLATTEN ORDER {}\n", self.order);
        for st in &self.steps {
            out.push_str(&format!("DEGREE {}: KERNEL {}, H_NORMALIZED_ZERO {}\n", st.m, kernel_file_name(st.m), st.h_normalized_zero));
        }
        match &self.obstruction {
            None => out.push_str(&format!("FLATTENED_TO {}\n", self.order)),
            Some(ob) => {
                let what = match &ob.kind {
                    ObstructionKind::Fundamental(_) => "fundamental equation violated",
                    ObstructionKind::NormalizationInconsistent => "normalization system inconsistent",
                    ObstructionKind::NonzeroRemainder => "normalized remainder nonzero",
                };
                out.push_str(&format!("OBSTRUCTION DEGREE {}: {}\n", ob.m, what));
                if let ObstructionKind::Fundamental(v) = &ob.kind {
                    for (b, c) in v {
                        out.push_str(&format!("FUNDAMENTAL {} {} {} {} {} {}\n", b[0], b[1], b[2], b[3], c.re, c.im));
                    }
                }
                for l in ob.remainder.term_lines("H' ") {
                    out.push_str(&l);
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Shear degree by degree, m = 3..=order, stopping at the first obstruction.
pub fn flatten_to_order(g: &Germ, order: u32) -> Result<FlattenReport, FlattenError> {
    require_parabolic(g)?;
    if order > g.trunc() {
        return Err(FlattenError::BeyondTruncation(order, g.trunc()));
    }
    let mut cur = g.clone();
    let mut steps = Vec::new();
    for m in 3..=order {
        flattened_below(&cur, m)?;
        let h = h_from_germ(&cur, m)?;
        let fc = check_fundamental(&phi_psi(&h));
        let halt = |kind, remainder, cur: Germ, steps| {
            Ok(FlattenReport { order, steps, final_germ: cur, obstruction: Some(FlattenObstruction { m, kind, remainder }) })
        };
        if !fc.holds {
            return halt(ObstructionKind::Fundamental(fc.violations), h, cur, steps);
        }
        let kernel = match solve_kernel_for(&h) {
            Ok(k) => k,
            Err(FlattenError::Inconsistent(_)) => return halt(ObstructionKind::NormalizationInconsistent, h, cur, steps),
            Err(e) => return Err(e),
        };
        cur = if kernel.is_zero() { cur } else { cur.shear(&kernel)? };
        let rem = h_from_germ(&cur, m)?;
        let zero = rem.is_zero();
        steps.push(FlattenStep { m, kernel, h_normalized_zero: zero });
        if !zero {
            return halt(ObstructionKind::NonzeroRemainder, rem, cur, steps);
        }
    }
    Ok(FlattenReport { order, steps, final_germ: cur, obstruction: None })
}

/// Real coordinates on real-valued degree-m tables: one unknown per
/// self-conjugate monomial, two (Re, Im of the representative) per pair.
struct RealBasis {
    m: u32,
    /// `(representative bracket, part)` per unknown.
    unknowns: Vec<([u32; 4], Part)>,
}

impl RealBasis {
    fn new(m: u32) -> Self {
        let mut unknowns = Vec::new();
        for b in brackets(m) {
            let c = conj_bracket(b);
            if b == c {
                unknowns.push((b, Part::Re));
            } else if b < c {
                unknowns.push((b, Part::Re));
                unknowns.push((b, Part::Im));
            }
        }
        RealBasis { m, unknowns }
    }

    fn len(&self) -> usize {
        self.unknowns.len()
    }

    fn table(&self, j: usize) -> HTable {
        let (b, part) = self.unknowns[j];
        let mut t = HTable::zero(self.m);
        let c = conj_bracket(b);
        match part {
            Part::Re if b == c => t.set(b, GQ::one()),
            Part::Re => {
                t.set(b, GQ::one());
                t.set(c, GQ::one());
            }
            Part::Im => {
                t.set(b, GQ::i());
                t.set(c, -GQ::i());
            }
        }
        t
    }

    fn combine(&self, x: &[Rational]) -> HTable {
        let mut t = HTable::zero(self.m);
        for (j, v) in x.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            for (b, c) in self.table(j).coeffs {
                let cur = t.get_b(b);
                t.set(b, &cur + &c.scale(v));
            }
        }
        t
    }

    /// Row expressing `part(H[b])` in the unknowns.
    fn functional(&self, b: [u32; 4], part: Part) -> Vec<(usize, Rational)> {
        (0..self.len())
            .filter_map(|j| {
                let v = part.of(&self.table(j).get_b(b));
                (!v.is_zero()).then_some((j, v))
            })
            .collect()
    }
}

fn fundamental_rows(basis: &RealBasis, ech: &mut SparseEchelon) {
    let images: Vec<HTable> = (0..basis.len()).map(|j| fundamental_table(&phi_psi(&basis.table(j)))).collect();
    for b in brackets(basis.m + 1) {
        for part in [Part::Re, Part::Im] {
            let row: Vec<(usize, Rational)> = images
                .iter()
                .enumerate()
                .map(|(j, img)| (j, part.of(&img.get_b(b))))
                .filter(|(_, v)| !v.is_zero())
                .collect();
            if !row.is_empty() {
                ech.insert(&row, &int(0));
            }
        }
    }
}

/// Basis of the real-valued degree-m solutions of the fundamental equation.
pub fn fundamental_nullspace(m: u32) -> Vec<HTable> {
    let basis = RealBasis::new(m);
    let mut ech = SparseEchelon::new(basis.len());
    fundamental_rows(&basis, &mut ech);
    ech.nullspace().iter().map(|x| basis.combine(x)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniquenessReport {
    pub m: u32,
    pub unknowns: usize,
    pub dimension: usize,
    pub basis: Vec<HTable>,
}

fn normalized_system(m: u32, vanishing_families: bool) -> Result<(RealBasis, SparseEchelon), FlattenError> {
    let sys = normalization_system(m)?;
    let basis = RealBasis::new(m);
    let mut ech = SparseEchelon::new(basis.len());
    let zero = int(0);
    for c in &sys.constraints {
        ech.insert(&basis.functional(c.bracket, c.part), &zero);
    }
    if vanishing_families {
        for t in 0..=m {
            let mut fam = vec![[t, 0, m - t, 0]];
            if t + 2 <= m {
                fam.push([t, 1, m - t - 2, 1]);
            }
            for b in fam {
                for part in [Part::Re, Part::Im] {
                    ech.insert(&basis.functional(b, part), &zero);
                }
            }
        }
    }
    fundamental_rows(&basis, &mut ech);
    Ok((basis, ech))
}

/// Basis of the real-valued normalized solutions of the fundamental equation.
pub fn normalized_solutions(m: u32) -> Result<Vec<HTable>, FlattenError> {
    let (basis, ech) = normalized_system(m, false)?;
    Ok(ech.nullspace().iter().map(|x| basis.combine(x)).collect())
}

/// Real-valued H of degree m satisfying the fundamental equation, the
/// normalization and H[t 1 (m−t−2) 1] = H[t 0 (m−t) 0] = 0.
pub fn uniqueness_nullspace(m: u32) -> Result<UniquenessReport, FlattenError> {
    let (basis, ech) = normalized_system(m, true)?;
    let null = ech.nullspace();
    Ok(UniquenessReport { m, unknowns: basis.len(), dimension: null.len(), basis: null.iter().map(|x| basis.combine(x)).collect() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityAudit {
    pub odd_part: HTable,
    /// The odd part satisfies the fundamental equation and the normalization.
    pub odd_part_in_system: bool,
    /// Nonzero coefficients of the odd part.
    pub violations: Vec<([u32; 4], GaussianRational)>,
}

impl ParityAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// For odd m: the part of H with s + h odd solves the same system as H and
/// meets the two vanishing families, so it must be zero.
pub fn parity_audit(h: &HTable) -> Result<ParityAudit, FlattenError> {
    if h.m.is_multiple_of(2) {
        return Err(FlattenError::Precondition(format!("degree {} is even", h.m)));
    }
    if !check_fundamental(&phi_psi(h)).holds {
        return Err(FlattenError::Precondition("H fails the fundamental equation".into()));
    }
    let sys = normalization_system(h.m)?;
    if let Some(c) = sys.violations(h).first() {
        return Err(FlattenError::Precondition(format!("H violates normalization ({})", c.label)));
    }
    let odd = h.odd_part();
    let in_sys = check_fundamental(&phi_psi(&odd)).holds && sys.violations(&odd).is_empty();
    let violations = odd.coeffs.iter().map(|(b, c)| (*b, c.clone())).collect();
    Ok(ParityAudit { odd_part: odd, odd_part_in_system: in_sys, violations })
}
