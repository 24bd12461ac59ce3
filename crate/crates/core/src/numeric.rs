//! Exact rational and Gaussian-rational arithmetic plus dense linear algebra.

use std::collections::BTreeMap;
use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cannot parse number: {0:?}")]
    Parse(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("matrix is singular")]
    Singular,
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn parse_rational(s: &str) -> Result<Rational, NumericError> {
    let s = s.trim();
    let bad = || NumericError::Parse(s.to_string());
    if s.is_empty() {
        return Err(bad());
    }
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(p))
        }
    }
}

/// Exact square root of a nonnegative rational, if it is a perfect square.
pub fn rational_sqrt(x: &Rational) -> Option<Rational> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer();
    let d = x.denom();
    let rn = n.sqrt();
    let rd = d.sqrt();
    if &(&rn * &rn) == n && &(&rd * &rd) == d {
        Some(Rational::new(rn, rd))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct GaussianRational {
    pub re: Rational,
    pub im: Rational,
}

pub type GQ = GaussianRational;

impl GaussianRational {
    pub fn new(re: Rational, im: Rational) -> Self {
        GaussianRational { re, im }
    }

    pub fn from_rational(re: Rational) -> Self {
        GaussianRational { re, im: Rational::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(int(n))
    }

    /// `(a/b) + (c/d) i` from machine integers.
    pub fn q(a: i64, b: i64, c: i64, d: i64) -> Self {
        GaussianRational { re: rat(a, b), im: rat(c, d) }
    }

    pub fn i() -> Self {
        GaussianRational { re: Rational::zero(), im: Rational::one() }
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GaussianRational { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn norm_sq(&self) -> Rational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn is_unimodular(&self) -> bool {
        self.norm_sq().is_one()
    }

    pub fn inv(&self) -> Result<Self, NumericError> {
        let n = self.norm_sq();
        if n.is_zero() {
            return Err(NumericError::DivisionByZero);
        }
        Ok(GaussianRational { re: &self.re / &n, im: -(&self.im / &n) })
    }

    pub fn scale(&self, r: &Rational) -> Self {
        GaussianRational { re: &self.re * r, im: &self.im * r }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Exact square root in Q(i) when one exists. The root returned has
    /// positive real part, or nonnegative imaginary part when purely imaginary.
    pub fn sqrt(&self) -> Option<Self> {
        if self.im.is_zero() {
            if self.re.is_negative() {
                let s = rational_sqrt(&-self.re.clone())?;
                return Some(GaussianRational { re: Rational::zero(), im: s });
            }
            let s = rational_sqrt(&self.re)?;
            return Some(Self::from_rational(s));
        }
        let n = rational_sqrt(&self.norm_sq())?;
        let x2 = (&n + &self.re) / int(2);
        let x = rational_sqrt(&x2)?;
        let y = &self.im / (int(2) * &x);
        Some(GaussianRational { re: x, im: y })
    }

    /// Principal value of a square root in floating point, used for reporting only.
    pub fn to_f64_pair(&self) -> (f64, f64) {
        (rational_to_f64(&self.re), rational_to_f64(&self.im))
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

impl Zero for GaussianRational {
    fn zero() -> Self {
        GaussianRational { re: Rational::zero(), im: Rational::zero() }
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl One for GaussianRational {
    fn one() -> Self {
        Self::from_rational(Rational::one())
    }
}

impl From<Rational> for GaussianRational {
    fn from(r: Rational) -> Self {
        Self::from_rational(r)
    }
}

impl From<i64> for GaussianRational {
    fn from(n: i64) -> Self {
        Self::from_int(n)
    }
}

impl Add<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn add(self, o: &GaussianRational) -> GaussianRational {
        GaussianRational { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl Sub<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn sub(self, o: &GaussianRational) -> GaussianRational {
        GaussianRational { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}

impl Mul<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn mul(self, o: &GaussianRational) -> GaussianRational {
        if self.im.is_zero() && o.im.is_zero() {
            return GaussianRational::from_rational(&self.re * &o.re);
        }
        GaussianRational {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}

impl Div<&GaussianRational> for &GaussianRational {
    type Output = GaussianRational;
    fn div(self, o: &GaussianRational) -> GaussianRational {
        self * &o.inv().expect("division by zero Gaussian rational")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<GaussianRational> for GaussianRational {
            type Output = GaussianRational;
            fn $m(self, o: GaussianRational) -> GaussianRational {
                (&self).$m(&o)
            }
        }
        impl<'a> $tr<&'a GaussianRational> for GaussianRational {
            type Output = GaussianRational;
            fn $m(self, o: &GaussianRational) -> GaussianRational {
                (&self).$m(o)
            }
        }
        impl<'a> $tr<GaussianRational> for &'a GaussianRational {
            type Output = GaussianRational;
            fn $m(self, o: GaussianRational) -> GaussianRational {
                self.$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational { re: -self.re, im: -self.im }
    }
}

impl Neg for &GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational { re: -self.re.clone(), im: -self.im.clone() }
    }
}

impl AddAssign<&GaussianRational> for GaussianRational {
    fn add_assign(&mut self, o: &GaussianRational) {
        self.re += &o.re;
        self.im += &o.im;
    }
}

impl SubAssign<&GaussianRational> for GaussianRational {
    fn sub_assign(&mut self, o: &GaussianRational) {
        self.re -= &o.re;
        self.im -= &o.im;
    }
}

impl MulAssign<&GaussianRational> for GaussianRational {
    fn mul_assign(&mut self, o: &GaussianRational) {
        *self = &*self * o;
    }
}

impl Sum for GaussianRational {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        let mut acc = Self::zero();
        for x in iter {
            acc += &x;
        }
        acc
    }
}

impl Product for GaussianRational {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        let mut acc = Self::one();
        for x in iter {
            acc *= &x;
        }
        acc
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let im_part = |im: &Rational| -> String {
            if im.is_one() {
                "i".to_string()
            } else if (-im).is_one() {
                "-i".to_string()
            } else {
                format!("{} i", im)
            }
        };
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "{}", im_part(&self.im))
        } else if self.im.is_negative() {
            write!(f, "{}-{}", self.re, im_part(&-self.im.clone()))
        } else {
            write!(f, "{}+{}", self.re, im_part(&self.im))
        }
    }
}

impl FromStr for GaussianRational {
    type Err = NumericError;

    fn from_str(s: &str) -> Result<Self, NumericError> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || NumericError::Parse(s.to_string());
        if t.is_empty() {
            return Err(bad());
        }
        if !t.ends_with('i') {
            return Ok(Self::from_rational(parse_rational(&t)?));
        }
        let body = &t[..t.len() - 1];
        // split at the last sign that is not the leading character
        let split = body
            .char_indices()
            .filter(|&(k, c)| k > 0 && (c == '+' || c == '-'))
            .map(|(k, _)| k)
            .next_back();
        let (re_s, im_s) = match split {
            Some(k) => (&body[..k], &body[k..]),
            None => ("", body),
        };
        let re = if re_s.is_empty() { Rational::zero() } else { parse_rational(re_s)? };
        let im = match im_s {
            "" | "+" => Rational::one(),
            "-" => -Rational::one(),
            other => {
                let o = other.strip_prefix('+').unwrap_or(other);
                if o.ends_with('*') {
                    parse_rational(&o[..o.len() - 1])?
                } else {
                    parse_rational(o)?
                }
            }
        };
        Ok(GaussianRational { re, im })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<GaussianRational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Unique(Vec<GaussianRational>),
    Inconsistent,
    Underdetermined { particular: Vec<GaussianRational>, nullity: usize },
}

impl ExactMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ExactMatrix { rows, cols, data: vec![GQ::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.set(k, k, GQ::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<GaussianRational>>) -> Result<Self, NumericError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(NumericError::DimensionMismatch("ragged rows".into()));
        }
        Ok(ExactMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    /// Convenience constructor from integer rows.
    pub fn from_ints(rows: &[&[i64]]) -> Self {
        Self::from_rows(
            rows.iter().map(|r| r.iter().map(|&x| GQ::from_int(x)).collect()).collect(),
        )
        .expect("ragged rows")
    }

    pub fn diag(entries: &[GaussianRational]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (k, e) in entries.iter().enumerate() {
            m.set(k, k, e.clone());
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> &GaussianRational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: GaussianRational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[GaussianRational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn mul(&self, o: &ExactMatrix) -> Result<ExactMatrix, NumericError> {
        if self.cols != o.rows {
            return Err(NumericError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, o.rows, o.cols
            )));
        }
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        out.data[i * o.cols + j] += &(a * b);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[GaussianRational]) -> Result<Vec<GaussianRational>, NumericError> {
        if v.len() != self.cols {
            return Err(NumericError::DimensionMismatch("vector length".into()));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn add(&self, o: &ExactMatrix) -> Result<ExactMatrix, NumericError> {
        if self.rows != o.rows || self.cols != o.cols {
            return Err(NumericError::DimensionMismatch("matrix sum".into()));
        }
        Ok(ExactMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, o: &ExactMatrix) -> Result<ExactMatrix, NumericError> {
        self.add(&o.scale(&-GQ::one()))
    }

    pub fn scale(&self, s: &GaussianRational) -> ExactMatrix {
        ExactMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn transpose(&self) -> ExactMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn conj(&self) -> ExactMatrix {
        ExactMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.conj()).collect() }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ExactMatrix {
        self.transpose().conj()
    }

    pub fn trace(&self) -> GaussianRational {
        (0..self.rows.min(self.cols)).map(|k| self.get(k, k).clone()).sum()
    }

    pub fn is_scalar(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let d = self.get(0, 0);
        (0..self.rows).all(|i| {
            (0..self.cols).all(|j| {
                let v = self.get(i, j);
                if i == j { v == d } else { v.is_zero() }
            })
        })
    }

    /// Reduced row echelon form and pivot columns. Pivots are chosen as the
    /// first nonzero entry scanning rows downward in each column.
    pub fn rref(&self) -> (ExactMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else {
                continue;
            };
            if p != r {
                for j in 0..m.cols {
                    m.data.swap(p * m.cols + j, r * m.cols + j);
                }
            }
            let inv = m.get(r, c).inv().expect("nonzero pivot");
            for j in c..m.cols {
                let v = m.get(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r {
                    continue;
                }
                let f = m.get(i, c).clone();
                if f.is_zero() {
                    continue;
                }
                for j in c..m.cols {
                    let v = m.get(i, j) - &(&f * m.get(r, j));
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Kernel basis read off the reduced echelon form: one vector per free
    /// column, with a 1 in that column.
    pub fn nullspace(&self) -> Vec<Vec<GaussianRational>> {
        let (m, pivots) = self.rref();
        let mut basis = Vec::new();
        for f in (0..self.cols).filter(|c| !pivots.contains(c)) {
            let mut v = vec![GQ::zero(); self.cols];
            v[f] = GQ::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -m.get(r, f);
            }
            basis.push(v);
        }
        basis
    }

    pub fn det(&self) -> Result<GaussianRational, NumericError> {
        if !self.is_square() {
            return Err(NumericError::DimensionMismatch("det of non-square".into()));
        }
        let n = self.rows;
        let mut m = self.clone();
        let mut det = GQ::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !m.get(i, c).is_zero()) else {
                return Ok(GQ::zero());
            };
            if p != c {
                for j in 0..n {
                    m.data.swap(p * n + j, c * n + j);
                }
                det = -det;
            }
            let piv = m.get(c, c).clone();
            det = &det * &piv;
            let inv = piv.inv()?;
            for i in c + 1..n {
                let f = m.get(i, c) * &inv;
                if f.is_zero() {
                    continue;
                }
                for j in c..n {
                    let v = m.get(i, j) - &(&f * m.get(c, j));
                    m.set(i, j, v);
                }
            }
        }
        Ok(det)
    }

    pub fn inverse(&self) -> Result<ExactMatrix, NumericError> {
        if !self.is_square() {
            return Err(NumericError::DimensionMismatch("inverse of non-square".into()));
        }
        let n = self.rows;
        let mut aug = Self::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j).clone());
            }
            aug.set(i, n + i, GQ::one());
        }
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(NumericError::Singular);
        }
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, r.get(i, n + j).clone());
            }
        }
        Ok(out)
    }

    pub fn is_hermitian(&self) -> bool {
        self.is_square() && *self == self.adjoint()
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    pub fn submatrix(&self, idx: &[usize]) -> ExactMatrix {
        let mut out = Self::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.set(a, b, self.get(i, j).clone());
            }
        }
        out
    }
}

impl fmt::Display for ExactMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Solve `A x = b` exactly.
pub fn exact_solve(a: &ExactMatrix, b: &[GaussianRational]) -> Result<SolveOutcome, NumericError> {
    if a.rows == 0 || a.cols == 0 {
        return Err(NumericError::DimensionMismatch("empty matrix".into()));
    }
    if b.len() != a.rows {
        return Err(NumericError::DimensionMismatch(format!(
            "matrix has {} rows, right-hand side has {}",
            a.rows,
            b.len()
        )));
    }
    let mut aug = ExactMatrix::zeros(a.rows, a.cols + 1);
    for i in 0..a.rows {
        for j in 0..a.cols {
            aug.set(i, j, a.get(i, j).clone());
        }
        aug.set(i, a.cols, b[i].clone());
    }
    let (r, pivots) = aug.rref();
    if pivots.last() == Some(&a.cols) {
        return Ok(SolveOutcome::Inconsistent);
    }
    let mut x = vec![GQ::zero(); a.cols];
    for (row, &p) in pivots.iter().enumerate() {
        x[p] = r.get(row, a.cols).clone();
    }
    let nullity = a.cols - pivots.len();
    if nullity == 0 {
        Ok(SolveOutcome::Unique(x))
    } else {
        Ok(SolveOutcome::Underdetermined { particular: x, nullity })
    }
}

pub fn exact_nullspace(a: &ExactMatrix) -> Vec<Vec<GaussianRational>> {
    a.nullspace()
}

/// A sparse row over the rationals: sorted `(column, value)` pairs, no zeros.
pub type SparseRow = Vec<(usize, Rational)>;

fn sparse_axpy(row: &SparseRow, f: &Rational, other: &SparseRow) -> SparseRow {
    // row - f * other
    let mut out = Vec::with_capacity(row.len() + other.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < other.len() {
        let take_row = j == other.len() || (i < row.len() && row[i].0 < other[j].0);
        let take_other = i == row.len() || (j < other.len() && other[j].0 < row[i].0);
        if take_row {
            out.push(row[i].clone());
            i += 1;
        } else if take_other {
            out.push((other[j].0, -(f * &other[j].1)));
            j += 1;
        } else {
            let v = &row[i].1 - f * &other[j].1;
            if !v.is_zero() {
                out.push((row[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Incremental echelon form over the rationals for large sparse systems.
/// Column `ncols` (one past the unknowns) holds the right-hand side.
#[derive(Debug, Clone)]
pub struct SparseEchelon {
    pub ncols: usize,
    rows: BTreeMap<usize, SparseRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SparseSolve {
    Unique(Vec<Rational>),
    Inconsistent,
    Underdetermined { particular: Vec<Rational>, nullity: usize },
}

impl SparseEchelon {
    pub fn new(ncols: usize) -> Self {
        SparseEchelon { ncols, rows: BTreeMap::new() }
    }

    /// Insert the equation `sum row[k] x_k = rhs`. Returns false if the row
    /// was dependent on those already present.
    pub fn insert(&mut self, row: &[(usize, Rational)], rhs: &Rational) -> bool {
        let mut r: SparseRow = {
            let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
            for (c, v) in row {
                assert!(*c < self.ncols, "column out of range");
                *acc.entry(*c).or_insert_with(Rational::zero) += v;
            }
            if !rhs.is_zero() {
                acc.insert(self.ncols, rhs.clone());
            }
            acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
        };
        loop {
            let Some((lead, lv)) = r.first().cloned() else {
                return false;
            };
            match self.rows.get(&lead) {
                Some(p) => r = sparse_axpy(&r, &lv, p),
                None => {
                    let inv = lv.recip();
                    for e in r.iter_mut() {
                        e.1 = &e.1 * &inv;
                    }
                    self.rows.insert(lead, r);
                    return true;
                }
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.keys().filter(|&&c| c < self.ncols).count()
    }

    pub fn is_inconsistent(&self) -> bool {
        self.rows.contains_key(&self.ncols)
    }

    pub fn pivots(&self) -> Vec<usize> {
        self.rows.keys().copied().filter(|&c| c < self.ncols).collect()
    }

    /// Fully reduced rows, keyed by pivot column.
    pub fn reduced(&self) -> BTreeMap<usize, SparseRow> {
        let mut done: BTreeMap<usize, SparseRow> = BTreeMap::new();
        for (&p, row) in self.rows.iter().rev() {
            let mut r = row.clone();
            loop {
                let hit = r
                    .iter()
                    .skip(1)
                    .find(|(c, _)| done.contains_key(c))
                    .map(|(c, v)| (*c, v.clone()));
                match hit {
                    Some((c, v)) => r = sparse_axpy(&r, &v, &done[&c]),
                    None => break,
                }
            }
            done.insert(p, r);
        }
        done
    }

    pub fn nullspace(&self) -> Vec<Vec<Rational>> {
        let red = self.reduced();
        let pivots: Vec<usize> = red.keys().copied().filter(|&c| c < self.ncols).collect();
        let mut basis = Vec::new();
        for f in (0..self.ncols).filter(|c| !red.contains_key(c)) {
            let mut v = vec![Rational::zero(); self.ncols];
            v[f] = Rational::one();
            for &p in &pivots {
                if let Some((_, val)) = red[&p].iter().find(|(c, _)| *c == f) {
                    v[p] = -val.clone();
                }
            }
            basis.push(v);
        }
        basis
    }

    pub fn solve(&self) -> SparseSolve {
        if self.is_inconsistent() {
            return SparseSolve::Inconsistent;
        }
        let red = self.reduced();
        let mut x = vec![Rational::zero(); self.ncols];
        for (&p, row) in &red {
            if let Some((_, v)) = row.iter().find(|(c, _)| *c == self.ncols) {
                x[p] = v.clone();
            }
        }
        let nullity = self.ncols - self.rank();
        if nullity == 0 {
            SparseSolve::Unique(x)
        } else {
            SparseSolve::Underdetermined { particular: x, nullity }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(s: &str) -> GQ {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(g("1/2"), GQ::q(1, 2, 0, 1));
        assert_eq!(g("3/5+4/5 i"), GQ::q(3, 5, 4, 5));
        assert_eq!(g("-2/3"), GQ::q(-2, 3, 0, 1));
        assert_eq!(g("-1/2 i"), GQ::q(0, 1, -1, 2));
        assert_eq!(g("i"), GQ::i());
        assert_eq!(g("-i"), -GQ::i());
        assert_eq!(g("2-i"), GQ::q(2, 1, -1, 1));
        assert_eq!(g("-3/5 - 4/5 i"), GQ::q(-3, 5, -4, 5));
        assert_eq!(GQ::q(7, 1, -4, 1).to_string(), "7-4 i");
        assert_eq!(GQ::q(0, 1, 1, 2).to_string(), "1/2 i");
        assert_eq!(GQ::q(1, 3, 0, 1).to_string(), "1/3");
        assert!("1/0".parse::<GQ>().is_err());
        assert!("abc".parse::<GQ>().is_err());
        assert!("".parse::<GQ>().is_err());
    }

    #[test]
    fn sqrt_in_gaussian_rationals() {
        assert_eq!(GQ::q(0, 1, 1, 2).sqrt(), Some(GQ::q(1, 2, 1, 2)));
        assert_eq!(GQ::from_int(-4).sqrt(), Some(GQ::q(0, 1, 2, 1)));
        assert_eq!(GQ::q(3, 1, 4, 1).sqrt(), Some(GQ::q(2, 1, 1, 1)));
        assert_eq!(GQ::from_int(2).sqrt(), None);
        assert_eq!(GQ::i().scale(&int(2)).sqrt(), Some(GQ::q(1, 1, 1, 1)));
        assert_eq!(GQ::q(0, 1, 1, 4).sqrt(), None);
    }

    #[test]
    fn solve_identity() {
        let a = ExactMatrix::identity(3);
        let b = vec![GQ::one(), GQ::i(), GQ::q(1, 2, 0, 1)];
        assert_eq!(exact_solve(&a, &b).unwrap(), SolveOutcome::Unique(b.clone()));
    }

    #[test]
    fn solve_two_by_two() {
        let a = ExactMatrix::from_ints(&[&[1, 1], &[1, -1]]);
        let b = vec![GQ::from_int(2), GQ::zero()];
        assert_eq!(exact_solve(&a, &b).unwrap(), SolveOutcome::Unique(vec![GQ::one(), GQ::one()]));
    }

    #[test]
    fn solve_inconsistent() {
        let a = ExactMatrix::from_ints(&[&[1, 1], &[2, 2]]);
        let b = vec![GQ::one(), GQ::from_int(3)];
        assert_eq!(exact_solve(&a, &b).unwrap(), SolveOutcome::Inconsistent);
    }

    #[test]
    fn solve_underdetermined_and_mismatch() {
        let a = ExactMatrix::from_ints(&[&[1, 1]]);
        match exact_solve(&a, &[GQ::one()]).unwrap() {
            SolveOutcome::Underdetermined { nullity, .. } => assert_eq!(nullity, 1),
            o => panic!("{o:?}"),
        }
        assert!(exact_solve(&a, &[GQ::one(), GQ::one()]).is_err());
    }

    #[test]
    fn nullspace_examples() {
        assert!(exact_nullspace(&ExactMatrix::identity(3)).is_empty());
        let a = ExactMatrix::from_ints(&[&[1, -1]]);
        assert_eq!(exact_nullspace(&a), vec![vec![GQ::one(), GQ::one()]]);
        assert_eq!(exact_nullspace(&ExactMatrix::zeros(2, 2)).len(), 2);
    }

    #[test]
    fn det_inverse() {
        let a = ExactMatrix::from_rows(vec![
            vec![GQ::one(), GQ::i()],
            vec![GQ::from_int(2), GQ::from_int(3)],
        ])
        .unwrap();
        assert_eq!(a.det().unwrap(), GQ::q(3, 1, -2, 1));
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv).unwrap(), ExactMatrix::identity(2));
        assert_eq!(ExactMatrix::from_ints(&[&[1, 2], &[2, 4]]).inverse(), Err(NumericError::Singular));
    }

    #[test]
    fn sparse_matches_dense() {
        let mut s = SparseEchelon::new(3);
        s.insert(&[(0, int(1)), (1, int(1))], &int(2));
        s.insert(&[(0, int(1)), (1, int(-1))], &int(0));
        s.insert(&[(0, int(2)), (1, int(2))], &int(4));
        assert_eq!(s.rank(), 2);
        match s.solve() {
            SparseSolve::Underdetermined { particular, nullity } => {
                assert_eq!(nullity, 1);
                assert_eq!(particular, vec![int(1), int(1), int(0)]);
            }
            o => panic!("{o:?}"),
        }
        assert_eq!(s.nullspace(), vec![vec![int(0), int(0), int(1)]]);
        s.insert(&[(2, int(1)), (0, int(1))], &int(1));
        assert_eq!(s.solve(), SparseSolve::Unique(vec![int(1), int(1), int(0)]));
        s.insert(&[(2, int(1))], &int(5));
        assert_eq!(s.solve(), SparseSolve::Inconsistent);
    }

    fn arb_rat() -> impl Strategy<Value = Rational> {
        (-20i64..20, 1i64..9).prop_map(|(n, d)| rat(n, d))
    }

    fn arb_gq() -> impl Strategy<Value = GQ> {
        (arb_rat(), arb_rat()).prop_map(|(a, b)| GQ::new(a, b))
    }

    fn arb_matrix(r: usize, c: usize) -> impl Strategy<Value = ExactMatrix> {
        proptest::collection::vec((-3i64..4, -2i64..3), r * c).prop_map(move |v| ExactMatrix {
            rows: r,
            cols: c,
            data: v.into_iter().map(|(a, b)| GQ::q(a, 1, b, 1)).collect(),
        })
    }

    proptest! {
        #[test]
        fn field_axioms(a in arb_gq(), b in arb_gq(), c in arb_gq()) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a * &b, &b * &a);
            if !a.is_zero() {
                prop_assert_eq!(&a * &a.inv().unwrap(), GQ::one());
            }
            prop_assert_eq!(a.conj().conj(), a.clone());
            prop_assert_eq!((&a * &b).conj(), &a.conj() * &b.conj());
        }

        #[test]
        fn display_round_trip(a in arb_gq()) {
            prop_assert_eq!(a.to_string().parse::<GQ>().unwrap(), a);
        }

        #[test]
        fn square_root_squares_back(a in arb_gq()) {
            let sq = &a * &a;
            let r = sq.sqrt().unwrap();
            prop_assert_eq!(&r * &r, sq);
        }

        #[test]
        fn rank_nullity(m in (1usize..5, 1usize..6).prop_flat_map(|(r, c)| arb_matrix(r, c))) {
            let ns = m.nullspace();
            prop_assert_eq!(m.rank() + ns.len(), m.cols);
            for v in &ns {
                prop_assert!(m.mul_vec(v).unwrap().iter().all(|x| x.is_zero()));
            }
        }

        #[test]
        fn solve_reproduces_rhs(m in arb_matrix(3, 4), x in proptest::collection::vec(arb_gq(), 4)) {
            let b = m.mul_vec(&x).unwrap();
            let sol = match exact_solve(&m, &b).unwrap() {
                SolveOutcome::Unique(s) => s,
                SolveOutcome::Underdetermined { particular, .. } => particular,
                SolveOutcome::Inconsistent => return Err(TestCaseError::fail("consistent system reported inconsistent")),
            };
            prop_assert_eq!(m.mul_vec(&sol).unwrap(), b);
        }

        #[test]
        fn sparse_rank_agrees_with_dense(rows in proptest::collection::vec(proptest::collection::vec(-2i64..3, 5), 1..7)) {
            let mut s = SparseEchelon::new(5);
            for r in &rows {
                let sr: Vec<(usize, Rational)> = r.iter().enumerate().filter(|(_, v)| **v != 0).map(|(k, v)| (k, int(*v))).collect();
                s.insert(&sr, &Rational::zero());
            }
            let dense = ExactMatrix::from_rows(rows.iter().map(|r| r.iter().map(|&v| GQ::from_int(v)).collect()).collect()).unwrap();
            prop_assert_eq!(s.rank(), dense.rank());
            let ns = s.nullspace();
            prop_assert_eq!(ns.len(), 5 - dense.rank());
            for v in &ns {
                let vg: Vec<GQ> = v.iter().map(|x| GQ::from_rational(x.clone())).collect();
                prop_assert!(dense.mul_vec(&vg).unwrap().iter().all(|x| x.is_zero()));
            }
        }
    }
}
