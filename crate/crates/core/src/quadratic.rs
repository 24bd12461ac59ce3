//! Decisions at the quadratic level: flattenability, the coarse ℬ class,
//! shape recognition, Bishop slices, elliptic directions and the
//! linearization of the CR singular locus.

use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::germ::Germ;
use crate::numeric::{int, rat, rational_sqrt, ExactMatrix, GaussianRational, NumericError, Rational, GQ};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuadraticError {
    #[error("operation needs n = 2, pair has n = {0}")]
    NeedsTwo(usize),
    #[error("bad slice indices ({0}, {1}) for n = {2}")]
    BadIndices(usize, usize, usize),
    #[error("degenerate slice: c B c̄ᵗ = 0, no Bishop invariant")]
    DegenerateSlice,
    #[error("direction must be nonzero and of length {0}")]
    BadDirection(usize),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// The matrices of 2Re(z𝒜zᵗ) + zℬz̄ᵗ; 𝒜 is kept symmetric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadraticPair {
    pub a: ExactMatrix,
    pub b: ExactMatrix,
}

impl QuadraticPair {
    pub fn new(a: ExactMatrix, b: ExactMatrix) -> Self {
        assert!(a.is_square() && b.is_square() && a.rows == b.rows, "pair shape");
        let sym = a.add(&a.transpose()).expect("square").scale(&GQ::q(1, 2, 0, 1));
        QuadraticPair { a: sym, b }
    }

    pub fn n(&self) -> usize {
        self.b.rows
    }

    /// 𝒜̃ = P𝒜Pᵗ/μ̄, ℬ̃ = PℬP̄ᵗ/μ.
    pub fn transform(&self, p: &ExactMatrix, mu: &GaussianRational) -> Result<QuadraticPair, QuadraticError> {
        let inv_mu = mu.inv()?;
        let a = p.mul(&self.a)?.mul(&p.transpose())?.scale(&inv_mu.conj());
        let b = p.mul(&self.b)?.mul(&p.adjoint())?.scale(&inv_mu);
        Ok(QuadraticPair { a, b })
    }

    fn require_two(&self) -> Result<(), QuadraticError> {
        if self.n() != 2 {
            return Err(QuadraticError::NeedsTwo(self.n()));
        }
        Ok(())
    }
}

impl fmt::Display for QuadraticPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "A = {}", self.a)?;
        write!(f, "B = {}", self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlattenabilityVerdict {
    pub flattenable: bool,
    pub lambda: Option<GaussianRational>,
    pub mu_witness: Option<GaussianRational>,
    pub hermitian_b: Option<ExactMatrix>,
}

impl FlattenabilityVerdict {
    fn no() -> Self {
        FlattenabilityVerdict { flattenable: false, lambda: None, mu_witness: None, hermitian_b: None }
    }
}

/// A μ with μ/μ̄ = λ for unimodular λ.
fn phase_root(lambda: &GaussianRational) -> GaussianRational {
    if lambda.is_one() {
        GQ::one()
    } else if *lambda == -GQ::one() {
        GQ::i()
    } else {
        lambda + &GQ::one()
    }
}

/// Decide whether ℬ = λℬ† for a unimodular λ. From Pℬ P̄ᵗ = μH with H
/// Hermitian one gets ℬ = (μ/μ̄)ℬ†, and conversely P = I with μ/μ̄ = λ
/// makes ℬ/μ Hermitian, so P plays no role in the decision.
pub fn is_hermitianizable(pair: &QuadraticPair) -> FlattenabilityVerdict {
    let b = &pair.b;
    let n = b.rows;
    let mut lambda = None;
    'find: for i in 0..n {
        for j in 0..n {
            let bij = b.get(i, j);
            let bji = b.get(j, i);
            if bij.is_zero() && bji.is_zero() {
                continue;
            }
            if bji.is_zero() {
                return FlattenabilityVerdict::no();
            }
            lambda = Some(bij / &bji.conj());
            break 'find;
        }
    }
    let lambda = lambda.unwrap_or_else(GQ::one);
    if !lambda.is_unimodular() || *b != b.adjoint().scale(&lambda) {
        return FlattenabilityVerdict::no();
    }
    let mu = phase_root(&lambda);
    let h = b.scale(&mu.inv().expect("nonzero"));
    debug_assert!(h.is_hermitian());
    FlattenabilityVerdict { flattenable: true, lambda: Some(lambda), mu_witness: Some(mu), hermitian_b: Some(h) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BClassTag {
    Zero,
    Rank1Herm,
    Rank1NonHerm,
    HermRank2,
    UnimodularPair,
    RealReciprocalPair,
    Jordan,
}

impl BClassTag {
    pub fn name(&self) -> &'static str {
        match self {
            BClassTag::Zero => "ZERO",
            BClassTag::Rank1Herm => "RANK1_HERM",
            BClassTag::Rank1NonHerm => "RANK1_NONHERM",
            BClassTag::HermRank2 => "HERM_RANK2",
            BClassTag::UnimodularPair => "UNIMODULAR_PAIR",
            BClassTag::RealReciprocalPair => "REAL_RECIPROCAL_PAIR",
            BClassTag::Jordan => "JORDAN",
        }
    }

    /// The families of the normal-form list this tag covers.
    pub fn families(&self) -> &'static str {
        match self {
            BClassTag::Zero => "9",
            BClassTag::Rank1Herm => "8",
            BClassTag::Rank1NonHerm => "4",
            BClassTag::HermRank2 => "5/6/7",
            BClassTag::UnimodularPair => "1",
            BClassTag::RealReciprocalPair => "2",
            BClassTag::Jordan => "3",
        }
    }
}

impl fmt::Display for BClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseBClass {
    pub tag: BClassTag,
    /// Exact eigenvalues of the cosquare (ℬ†)⁻¹ℬ when they are Gaussian rational.
    pub eigenvalues: Option<(GaussianRational, GaussianRational)>,
    pub trace: Option<GaussianRational>,
    pub det: Option<GaussianRational>,
    pub cosquare_spectrum: String,
}

/// Coarse class from rank(ℬ), flattenability and, in rank 2, the
/// cosquare S = (ℬ†)⁻¹ℬ. With T = tr S and D = det S the ratio κ = T²/D is
/// real: κ < 4 for two distinct unimodular eigenvalues, κ > 4 for a pair
/// {x, 1/x̄} off the circle, and κ = 4 for a repeated eigenvalue.
pub fn coarse_b_class(pair: &QuadraticPair) -> Result<CoarseBClass, QuadraticError> {
    pair.require_two()?;
    let b = &pair.b;
    let herm = is_hermitianizable(pair).flattenable;
    let simple = |tag: BClassTag, desc: &str| CoarseBClass {
        tag,
        eigenvalues: None,
        trace: None,
        det: None,
        cosquare_spectrum: desc.to_string(),
    };
    match b.rank() {
        0 => return Ok(simple(BClassTag::Zero, "none")),
        1 => {
            let tag = if herm { BClassTag::Rank1Herm } else { BClassTag::Rank1NonHerm };
            return Ok(simple(tag, "singular"));
        }
        _ => {}
    }
    let s = b.adjoint().inverse()?.mul(b)?;
    let t = s.trace();
    let d = s.det()?;
    let disc = &(&t * &t) - &d.scale(&int(4));
    let eig = disc.sqrt().map(|r| {
        let half = GQ::q(1, 2, 0, 1);
        (&(&t + &r) * &half, &(&t - &r) * &half)
    });
    let spectrum = match &eig {
        Some((x, y)) => format!("{{{x}, {y}}}"),
        None => format!("roots of x^2 - ({t}) x + ({d})"),
    };
    let tag = if herm {
        BClassTag::HermRank2
    } else {
        let kappa = &(&t * &t) / &d;
        debug_assert!(kappa.is_real());
        let four = int(4);
        if kappa.re < four {
            BClassTag::UnimodularPair
        } else if kappa.re > four {
            BClassTag::RealReciprocalPair
        } else {
            BClassTag::Jordan
        }
    };
    let spectrum = if tag == BClassTag::Jordan { format!("{spectrum} defective") } else { spectrum };
    Ok(CoarseBClass { tag, eigenvalues: eig, trace: Some(t), det: Some(d), cosquare_spectrum: spectrum })
}

/// An exact match against one of the listed normal forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeMatch {
    pub label: String,
    pub params: Vec<(String, GaussianRational)>,
}

fn real_pos(x: &GaussianRational) -> bool {
    x.is_real() && x.re.is_positive()
}

fn real_nonneg(x: &GaussianRational) -> bool {
    x.is_real() && !x.re.is_negative()
}

/// Entrywise match of (𝒜, ℬ) against the list (1a)–(9), with the
/// special quadrics P1, M1 and the exceptional shapes (i)–(iii) as extra tags.
pub fn recognize(pair: &QuadraticPair) -> Vec<ShapeMatch> {
    let mut out = Vec::new();
    if pair.n() != 2 {
        return out;
    }
    let (a, b) = (&pair.a, &pair.b);
    let (a11, a12, a22) = (a.get(0, 0).clone(), a.get(0, 1).clone(), a.get(1, 1).clone());
    let (b11, b12, b21, b22) = (b.get(0, 0).clone(), b.get(0, 1).clone(), b.get(1, 0).clone(), b.get(1, 1).clone());
    let one = GQ::one();
    let half = GQ::q(1, 2, 0, 1);
    let mut push = |label: &str, params: Vec<(&str, GaussianRational)>| {
        out.push(ShapeMatch {
            label: label.to_string(),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        })
    };
    let bd = b12.is_zero() && b21.is_zero();
    let a_diag = a12.is_zero();
    if bd && b11.is_one() && b22.is_unimodular() && b22.im.is_positive() {
        let u = b22.clone();
        if real_pos(&a11) && real_pos(&a22) {
            push("1a", vec![("u", u.clone()), ("a", a11.clone()), ("b", a12.clone()), ("d", a22.clone())]);
        }
        if a11.is_zero() && real_nonneg(&a12) && real_nonneg(&a22) {
            push("1b", vec![("u", u.clone()), ("b", a12.clone()), ("d", a22.clone())]);
        }
        if a22.is_zero() && real_pos(&a11) && real_nonneg(&a12) {
            push("1c", vec![("u", u), ("a", a11.clone()), ("b", a12.clone())]);
        }
    }
    if b11.is_zero() && b22.is_zero() && b12.is_one() && b21.is_real() && b21.re.is_positive() && b21.re < int(1) {
        let tau = b21.clone();
        if real_pos(&a12) && a11.norm_sq() == rat(1, 4) {
            push("2a", vec![("tau", tau.clone()), ("a", a11.clone()), ("b", a12.clone()), ("d", a22.clone())]);
        }
        if a11.is_zero() && real_pos(&a12) && a22.norm_sq() == rat(1, 4) {
            push("2b", vec![("tau", tau.clone()), ("b", a12.clone()), ("d", a22.clone())]);
        }
        if a11.is_zero() && a22.is_zero() && real_pos(&a12) {
            push("2c", vec![("tau", tau.clone()), ("b", a12.clone())]);
        }
        if a_diag && a11 == half {
            push("2d", vec![("tau", tau.clone()), ("d", a22.clone())]);
        }
        if a_diag && a11.is_zero() && a22 == half {
            push("2e", vec![("tau", tau.clone())]);
        }
        if a.is_zero() {
            push("2f", vec![("tau", tau)]);
        }
    }
    if b11.is_zero() && b12.is_one() && b21.is_one() && b22 == GQ::i() {
        if real_pos(&a11) && a12.is_real() {
            push("3a", vec![("a", a11.clone()), ("b", a12.clone()), ("d", a22.clone())]);
        }
        if a11.is_zero() && real_pos(&a12) && a22.is_real() {
            push("3b", vec![("b", a12.clone()), ("d", a22.clone())]);
        }
        if a11.is_zero() && a12.is_zero() && real_nonneg(&a22) {
            push("3c", vec![("d", a22.clone())]);
        }
    }
    if b11.is_zero() && b12.is_one() && b21.is_zero() && b22.is_zero() {
        if real_pos(&a12) && a22 == half {
            push("4a", vec![("a", a11.clone()), ("b", a12.clone())]);
        }
        if a11 == half && real_pos(&a12) && a22.is_zero() {
            push("4b", vec![("b", a12.clone())]);
        }
        if a11.is_zero() && a22.is_zero() && real_pos(&a12) {
            push("4c", vec![("b", a12.clone())]);
            if a12 == half {
                push("exceptional(ii)", vec![]);
            }
        }
        if a_diag && real_nonneg(&a11) && a22 == half {
            push("4d", vec![("a", a11.clone())]);
            if a11.is_zero() {
                push("exceptional(iii)", vec![]);
            }
        }
        if a_diag && a11 == half && a22.is_zero() {
            push("4e", vec![]);
        }
        if a.is_zero() {
            push("4f", vec![]);
            push("exceptional(i)", vec![]);
        }
    }
    let diag_ok = a_diag && real_nonneg(&a11) && real_nonneg(&a22) && a11.re <= a22.re;
    if *b == ExactMatrix::identity(2) && diag_ok {
        push("5", vec![("lambda1", a11.clone()), ("lambda2", a22.clone())]);
        if a11 == half && a22 == half {
            push("P1", vec![]);
        }
    }
    if bd && b11.is_one() && b22 == -one.clone() {
        if diag_ok {
            push("6a", vec![("lambda1", a11.clone()), ("lambda2", a22.clone())]);
            if a11 == a22 && a11.re >= rat(1, 2) {
                push("M1", vec![("lambda", a11.clone())]);
            }
        }
        if a11.is_zero() && a22.is_zero() && real_pos(&a12) {
            push("6b", vec![("lambda", a12.clone())]);
        }
        if a11 == half && a12 == half && a22 == half {
            push("6c", vec![]);
        }
    }
    if b11.is_zero() && b22.is_zero() && b12.is_one() && b21.is_one() {
        if a11.is_zero() && real_pos(&a12) && a22 == half {
            push("7a", vec![("b", a12.clone())]);
        }
        if a_diag && a11 == half && a22.im.is_positive() {
            push("7b", vec![("d", a22.clone())]);
        }
    }
    if bd && b11.is_one() && b22.is_zero() {
        push("8", vec![]);
    }
    if b.is_zero() {
        push("9", vec![]);
    }
    out
}

/// Principal 2×2 slice on coordinates i < j (0-based) of an n ≥ 3 pair.
pub fn subslice_pair(pair: &QuadraticPair, i: usize, j: usize) -> Result<QuadraticPair, QuadraticError> {
    let n = pair.n();
    if n < 3 || i >= j || j >= n {
        return Err(QuadraticError::BadIndices(i, j, n));
    }
    Ok(QuadraticPair { a: pair.a.submatrix(&[i, j]), b: pair.b.submatrix(&[i, j]) })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceReport {
    pub alpha: GaussianRational,
    pub gamma: GaussianRational,
    pub lambda_sq: Rational,
    pub elliptic: bool,
}

/// Slice z = cξ: w = αξ² + ᾱξ̄² + γ|ξ|² with α = c𝒜cᵗ, γ = cℬc̄ᵗ. Dividing
/// by γ, rotating ξ and a holomorphic shear in ξ² bring it to
/// |ξ|² + λ(ξ² + ξ̄²) with λ = |α|/|γ|; ellipticity is 4|α|² < |γ|².
pub fn bishop_slice(pair: &QuadraticPair, c: &[GaussianRational]) -> Result<SliceReport, QuadraticError> {
    let n = pair.n();
    if c.len() != n || c.iter().all(|x| x.is_zero()) {
        return Err(QuadraticError::BadDirection(n));
    }
    let row = ExactMatrix::from_rows(vec![c.to_vec()])?;
    let alpha = row.mul(&pair.a)?.mul(&row.transpose())?.get(0, 0).clone();
    let gamma = row.mul(&pair.b)?.mul(&row.adjoint())?.get(0, 0).clone();
    if gamma.is_zero() {
        return Err(QuadraticError::DegenerateSlice);
    }
    let a2 = alpha.norm_sq();
    let g2 = gamma.norm_sq();
    let elliptic = &a2 * &int(4) < g2;
    Ok(SliceReport { lambda_sq: &a2 / &g2, alpha, gamma, elliptic })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub source: String,
    /// None when the recipe calls for a direction outside Q(i).
    pub c: Option<Vec<GaussianRational>>,
    pub slice: Option<SliceReport>,
    pub flag: Option<String>,
}

fn check_candidate(pair: &QuadraticPair, source: &str, c: Vec<GaussianRational>) -> Candidate {
    match bishop_slice(pair, &c) {
        Ok(s) => {
            let flag = if s.elliptic { None } else { Some("RECIPE_CANDIDATE_NOT_ELLIPTIC".to_string()) };
            Candidate { source: source.to_string(), c: Some(c), slice: Some(s), flag }
        }
        Err(_) => Candidate {
            source: source.to_string(),
            c: Some(c),
            slice: None,
            flag: Some("DEGENERATE_SLICE".to_string()),
        },
    }
}

fn irrational(source: &str) -> Candidate {
    Candidate { source: source.to_string(), c: None, slice: None, flag: Some("IRRATIONAL_CANDIDATE".to_string()) }
}

/// Rational grid values p/q with |p| ≤ bound, 1 ≤ q ≤ bound, sorted.
fn grid_values(bound: i64) -> Vec<Rational> {
    let mut v: Vec<Rational> = (1..=bound).flat_map(|q| (-bound..=bound).map(move |p| rat(p, q))).collect();
    v.sort();
    v.dedup();
    v
}

/// All elliptic directions among (0,1) and (1, x+iy) on the rational grid.
pub fn grid_search(pair: &QuadraticPair, bound: i64) -> Vec<(Vec<GaussianRational>, SliceReport)> {
    let mut out = Vec::new();
    if pair.n() != 2 {
        return out;
    }
    let mut dirs = vec![vec![GQ::zero(), GQ::one()]];
    let vals = grid_values(bound);
    for x in &vals {
        for y in &vals {
            dirs.push(vec![GQ::one(), GQ::new(x.clone(), y.clone())]);
        }
    }
    for c in dirs {
        if let Ok(s) = bishop_slice(pair, &c) {
            if s.elliptic {
                out.push((c, s));
            }
        }
    }
    out
}

/// Per-shape candidates followed by the first elliptic direction of a
/// bounded grid search (when `search_bound` is given).
pub fn elliptic_candidates(pair: &QuadraticPair, search_bound: Option<i64>) -> Result<Vec<Candidate>, QuadraticError> {
    pair.require_two()?;
    let (a, b) = (&pair.a, &pair.b);
    let mut out = Vec::new();
    let one = GQ::one();
    let zero = GQ::zero();
    let half = GQ::q(1, 2, 0, 1);
    let a_diag = a.get(0, 1).is_zero();
    let (l1, l2) = (a.get(0, 0).clone(), a.get(1, 1).clone());
    let nonneg = |x: &GQ| x.is_real() && !x.re.is_negative();
    if *b == ExactMatrix::identity(2) && a_diag && nonneg(&l1) && nonneg(&l2) {
        if l1 == l2 {
            out.push(check_candidate(pair, "A:equal", vec![one.clone(), GQ::i()]));
        } else {
            out.push(check_candidate(pair, "A:recipe", vec![l2.clone(), &GQ::i() * &l1]));
        }
    }
    let b_split = *b == ExactMatrix::diag(&[one.clone(), -one.clone()]);
    if b_split && a_diag && nonneg(&l1) && nonneg(&l2) && l1.re <= l2.re {
        if l1.re < rat(1, 2) {
            out.push(check_candidate(pair, "B", vec![one.clone(), zero.clone()]));
        } else if l1.re < l2.re {
            match rational_sqrt(&(&l1.re / &l2.re)) {
                Some(r) => out.push(check_candidate(pair, "B", vec![one.clone(), GQ::new(Rational::zero(), r)])),
                None => out.push(irrational("B")),
            }
        }
    }
    if b_split && l1.is_zero() && l2.is_zero() && !a.get(0, 1).is_zero() {
        out.push(check_candidate(pair, "C", vec![one.clone(), zero.clone()]));
    }
    if b_split && a.data.iter().all(|x| *x == half) {
        let eps = GQ::q(1, 10, 0, 1);
        out.push(check_candidate(pair, "D", vec![one.clone(), &eps - &one]));
    }
    let b_anti = *b == ExactMatrix::from_ints(&[&[0, 1], &[1, 0]]);
    if b_anti && l1.is_zero() && l2 == half {
        let bb = a.get(0, 1).clone();
        out.push(check_candidate(pair, "E", vec![one.clone(), bb.scale(&int(-4))]));
    }
    if b_anti && a_diag && l1 == half && !l2.is_zero() {
        // 1/2 + d C^2 = 0
        let c2 = (-GQ::one()) / l2.scale(&int(2));
        match c2.sqrt() {
            Some(c) => out.push(check_candidate(pair, "F", vec![one.clone(), c])),
            None => out.push(irrational("F")),
        }
    }
    if let Some(bound) = search_bound {
        if let Some((c, s)) = grid_search(pair, bound).into_iter().next() {
            out.push(Candidate { source: format!("search:{bound}"), c: Some(c), slice: Some(s), flag: None });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Linearization {
    pub matrix: ExactMatrix,
    pub rank: usize,
    /// Upper bound 4 − rank on the local real dimension of the CR singular set.
    pub dim_bound: usize,
}

/// Linear parts of ∂R/∂z̄₁, ∂R/∂z̄₂, ∂R̄/∂z₁, ∂R̄/∂z₂ in the variables
/// (z₁, z̄₁, z₂, z̄₂).
pub fn cr_singular_linearization(g: &Germ) -> Result<Linearization, QuadraticError> {
    if g.n() != 2 {
        return Err(QuadraticError::NeedsTwo(g.n()));
    }
    let r = g.r();
    let rc = r.conj();
    let eqs = [r.dzb(1), r.dzb(2), rc.dz(1), rc.dz(2)];
    let cols = [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]];
    let rows = eqs
        .iter()
        .map(|e| cols.iter().map(|x| e.c4(x[0], x[1], x[2], x[3])).collect())
        .collect();
    let matrix = ExactMatrix::from_rows(rows)?;
    let rank = matrix.rank();
    Ok(Linearization { matrix, rank, dim_bound: 4 - rank })
}

/// Largest null subspace of diag(I_l, −I_{n−l}).
pub fn max_null_dim(l: usize, n: usize) -> usize {
    assert!(l <= n, "l must not exceed n");
    l.min(n - l)
}
