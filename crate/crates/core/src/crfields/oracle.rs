//! Transcribed degree-2 displays of X₁, X₂, Y₁, Y₂ for the quadric normal
//! forms, evaluated at rational parameter samples. This is a regression
//! oracle for the engine and shares no code with it beyond the series type.
//!
//! Transcription fixes: `2b^{-i\theta}` in the (1a) X₂ display reads
//! `2be^{-i\theta}`, and three unbalanced `)` in the (4) display are dropped.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};

use super::CrFieldsError;
use crate::germ::Germ;
use crate::numeric::{int, ExactMatrix, Rational, GQ};
use crate::quadratic::QuadraticPair;
use crate::series::{Series, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CaseId {
    C1a,
    C1b,
    C1c,
    C2a,
    C2b,
    C2c,
    C2def,
    C3,
    C4,
}

impl CaseId {
    pub const ALL: [CaseId; 9] =
        [CaseId::C1a, CaseId::C1b, CaseId::C1c, CaseId::C2a, CaseId::C2b, CaseId::C2c, CaseId::C2def, CaseId::C3, CaseId::C4];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::C1a => "1a",
            CaseId::C1b => "1b",
            CaseId::C1c => "1c",
            CaseId::C2a => "2a",
            CaseId::C2b => "2b",
            CaseId::C2c => "2c",
            CaseId::C2def => "2d-f",
            CaseId::C3 => "3",
            CaseId::C4 => "4",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = CrFieldsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseId::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| CrFieldsError::UnknownCase(s.into()))
    }
}

/// Parameters of the normal forms. `u` stands for e^{iθ}.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CaseParams {
    pub a: GQ,
    pub b: GQ,
    pub d: GQ,
    pub u: Option<GQ>,
    pub tau: Option<Rational>,
}

impl FromStr for CaseParams {
    type Err = CrFieldsError;
    /// `a=1, b=1/2, d=1, u=3/5+4/5 i, tau=1/2`; omitted a, b, d are 0.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: String| CrFieldsError::Format { line: 0, msg };
        let mut p = CaseParams::default();
        for item in s.split([',', ';']).map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| bad(format!("expected key=value, found {item:?}")))?;
            let v: GQ = v.trim().parse().map_err(|e| bad(format!("{k}: {e}")))?;
            match k.trim() {
                "a" => p.a = v,
                "b" => p.b = v,
                "d" => p.d = v,
                "u" => p.u = Some(v),
                "tau" => {
                    if !v.is_real() {
                        return Err(bad("tau must be real".into()));
                    }
                    p.tau = Some(v.re)
                }
                o => return Err(bad(format!("unknown parameter {o:?}"))),
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseSeries {
    pub x1: Series,
    pub x2: Series,
    pub y1: Series,
    pub y2: Series,
}

fn displays(case: CaseId) -> [&'static str; 4] {
    match case {
        CaseId::C1a => [
            r#"(2be^{i\theta}+2\-b(4ad-4b^2))z_1\-z_1+(-2a+2d(4ad-4b^2))z_1\-z_2 +(4abe^{i\theta}+4\-bd)\-z_1\-z_1 +(2a(4b^2-4ad)e^{i\theta}+2de^{i\theta})\-z_1z_2+(-4a^2+4d^2+4|b|^2e^{i\theta}-4|b|^2e^{-i\theta})\-z_1\-z_2 +(2\-b(4b^2-4ad)e^{i\theta}-2b)z_2\-z_2+(-4a\-b-4bde^{-i\theta})\-z_2\-z_2"#,
            r#"(2ae^{-i\theta})z_1z_1+(4|b|^2+4a^2e^{-i\theta}+e^{-i\theta})z_1\-z_1+(2be^{i\theta}+2be^{-i\theta})z_1z_2 +(2ae^{-i\theta})\-z_1\-z_1 +(4bd+4a\-be^{-i\theta})z_1\-z_2 +(4\-bd+4abe^{-i\theta})\-z_1z_2+(4\-be^{-i\theta})\-z_1\-z_2 +(2de^{i\theta})z_2z_2 +(4d^2+1+4|b|^2e^{-i\theta})z_2\-z_2+(2de^{-i\theta})\-z_2\-z_2"#,
            r#"(8abe^{-i\theta}-8abe^{i\theta})z_1z_1+(8b|b|^2-8a\-bd+2be^{-i\theta}-4be^{i\theta})z_1\-z_1+(-4abe^{-i\theta}-4\-bd)\-z_1\-z_1 +(4b^2e^{-i\theta}-4b^2e^{i\theta}+12ade^{-i\theta}-12ade^{i\theta})z_1z_2 +(6ae^{-2i\theta}-4a+8b^2d-8ad^2)z_1\-z_2 +(8a^2de^{-i\theta}+4de^{-i\theta}-6de^{i\theta}-8ab^2e^{-i\theta})\-z_1z_2 +(4a^2e^{-2i\theta}-4d^2+2e^{-2i\theta}-2)\-z_1\-z_2 +(8bde^{-i\theta}-8bde^{i\theta})z_2z_2 +(8a\-bde^{-i\theta}+4be^{-2i\theta}-8b|b|^2e^{-i\theta}-2b)z_2\-z_2 +(4a\-be^{-2i\theta}+4bde^{-i\theta})\-z_2\-z_2"#,
            r#"(-2ae^{i\theta})z_1z_1+(-4a^2e^{i\theta}-4|b|^2-e^{i\theta})z_1\-z_1+(-4be^{i\theta})z_1z_2+(-4a\-be^{i\theta}-4bd)z_1\-z_2 +(-2ae^{i\theta})\-z_1\-z_1+(-4abe^{i\theta}-4\-bd)\-z_1z_2+(-2\-be^{-i\theta}-2\-be^{i\theta})\-z_1\-z_2+(-2de^{i\theta})z_2z_2 +(-4d^2-1-4|b|^2e^{i\theta})z_2\-z_2+(-2de^{-i\theta})\-z_2\-z_2"#,
        ],
        CaseId::C1b => [
            r#"(2be^{i\theta}-8b^3)z_1\-z_1+(-8b^2d)z_1\-z_2+(4bd)\-z_1\-z_1+(2de^{i\theta})\-z_1z_2+(8b^3e^{i\theta}-2b)z_2\-z_2 +(4b^2e^{i\theta}-4b^2e^{-i\theta}+4d^2)\-z_1\-z_2+(-4bde^{-i\theta})\-z_2\-z_2"#,
            r#"(4b^2+e^{-i\theta})z_1\-z_1+(2be^{i\theta}+2be^{-i\theta})z_1z_2+(4bd)z_1\-z_2+(4bd)\-z_1z_2+(4be^{-i\theta})\-z_1\-z_2 +(2de^{i\theta})z_2z_2+(4d^2+1+4b^2e^{-i\theta})z_2\-z_2+(2de^{-i\theta})\-z_2\-z_2"#,
            r#"(8b^3+2be^{-i\theta}-4be^{i\theta})z_1\-z_1+(4b^2e^{-i\theta}-4b^2e^{i\theta})z_1z_2+(8b^2d)z_1\-z_2+(-4bd)\-z_1\-z_1 +(4de^{-i\theta}-6de^{i\theta})\-z_1z_2 +(2e^{-2i\theta}-4d^2-2)\-z_1\-z_2+(8bde^{-i\theta}-8bde^{i\theta})z_2z_2 +(4be^{-2i\theta}-2b-8b^3e^{-i\theta})z_2\-z_2+(4bde^{-i\theta})\-z_2\-z_2"#,
            r#"(-e^{-i\theta}-4b^2)z_1\-z_1+(-4be^{i\theta})z_1z_2+(-4bd)\-z_1z_2+(-2be^{i\theta}-2be^{-i\theta})\-z_1\-z_2 +(-4bd)z_1\-z_2+(-2de^{i\theta})z_2z_2+(-4b^2e^{i\theta}-1-4d^2)z_2\-z_2+(-2de^{-i\theta})\-z_2\-z_2"#,
        ],
        CaseId::C1c => [
            r#"(2be^{i\theta}-8b^3)z_1\-z_1+(-2a)z_1\-z_2+(4abe^{i\theta})\-z_1\-z_1+(-4a^2+4b^2e^{i\theta}-4b^2e^{-i\theta})\-z_1\-z_2 +(8ab^2e^{i\theta})\-z_1z_2+(8b^3e^{i\theta}-2b)z_2\-z_2+(-4ab)\-z_2\-z_2"#,
            r#"(2ae^{-i\theta})z_1z_1+(2be^{i\theta}+2be^{-i\theta})z_1z_2+(4b^2+4a^2e^{-i\theta}+e^{-i\theta})z_1\-z_1+(4abe^{-i\theta})z_1\-z_2 +(4abe^{-i\theta})z_2\-z_1+(2ae^{-i\theta})\-z_1\-z_1+(4be^{-i\theta})\-z_1\-z_2+(1+4b^2e^{-i\theta})z_2\-z_2"#,
            r#"(8abe^{-i\theta}-8abe^{i\theta})z_1z_1+(8b^3-4be^{i\theta}+2be^{-i\theta})z_1\-z_1+(4b^2e^{-i\theta}-4b^2e^{i\theta})z_1z_2 +(6ae^{-2i\theta}-4a)z_1\-z_2+(-4abe^{-i\theta})\-z_1\-z_1+(-8ab^2e^{-i\theta})\-z_1z_2+(4a^2e^{-2i\theta}-2+2e^{-2i\theta})\-z_1\-z_2 +(-2b+4be^{-2i\theta}-8b^3e^{-i\theta})z_2\-z_2+(4abe^{-2i\theta})\-z_2\-z_2"#,
            r#"(-2ae^{i\theta})z_1z_1+(-4abe^{i\theta})z_1\-z_2+(-4be^{i\theta})z_1z_2+(-4a^2e^{i\theta}-e^{i\theta}-4b^2)z_1\-z_1 +(-2ae^{i\theta})\-z_1\-z_1+(-4abe^{i\theta})\-z_1z_2+(-2be^{i\theta}-2be^{-i\theta})\-z_1\-z_2+(-4b^2e^{i\theta}-1)z_2\-z_2"#,
        ],
        CaseId::C2a => [
            r#"(2\-a(4b^2-4ad)+2a\tau)z_1\-z_1+(4\-ab+4ab\tau)\-z_1\-z_1+(2b(4b^2-4ad)-2b\tau^2)z_1\-z_2 +(2b\tau+2b(4ad\tau-4b^2\tau))\-z_1z_2 +(4\tau a\-d-4\tau\-ad+4b^2-4b^2\tau^2)\-z_1\-z_2 +(2\-d(4ad\tau-4b^2\tau)-2\tau^2d)z_2\-z_2+(-4\tau bd-4b\-d\tau^2)\-z_2\-z_2"#,
            r#"(-2a)z_1z_1+(-4\-ab\tau-4ab)z_1\-z_1+(-2b\tau^2-2b)z_1z_2+(-4b^2\tau-4a\-d-\tau)z_1\-z_2 +(-2\-a\tau)\-z_1\-z_1+(-4\-ad\tau-\tau^2-4b^2)\-z_1z_2+(-4b\tau)\-z_1\-z_2+(-2d\tau^2)z_2z_2 +(-4bd\tau-4b\-d)z_2\-z_2+(-2\-d\tau)\-z_2\-z_2"#,
            r#"(8ab\tau^2-8ab)z_1z_1+(4a\tau^2-6a+8|a|^2d\tau-8\-ab^2\tau)z_1\-z_1+(4b\-d\tau+4bd\tau^2)\-z_2\-z_2 +(4b\tau^3-8b^3\tau+8abd\tau-2b\tau)z_1\-z_2+(-4ab-4\-ab\tau)\-z_1\-z_1+(8bd\tau^2-8bd)z_2z_2 +(2b(4b^2+4\-ad\tau-2)+2b\tau^2-2d(4ab+4\-ab\tau))\-z_1z_2+(2\tau^3-2\tau+4\-ad\tau^2-4a\-d)\-z_1\-z_2 +(6d\tau^3-8a|d|^2+8b^2\ov d-4d\tau)z_2\-z_2+(12ad\tau^2-12ad+4b^2\tau^2-4b^2)z_1z_2"#,
            r#"(2a\tau)z_1z_1+(4\-ab+4ab\tau)z_1\-z_1+(4b\tau)z_1z_2+(4b^2+4a\-d\tau+\tau^2)z_1\-z_2+(2\-a)\-z_1\-z_1 +(4\-ad+\tau+ 4b^2\tau)\-z_1z_2+(2b+2b\tau^2)\-z_1\-z_2+(2d\tau)z_2z_2+(4bd+4b\-d\tau)z_2\-z_2 +(2\-d\tau^2)\-z_2\-z_2"#,
        ],
        CaseId::C2b => [
            r#"(8b^3-2b\tau^2)z_1\-z_2 +(2b\tau-8b^3\tau)\-z_1z_2 +(4b^2-4b^2\tau^2)\-z_1\-z_2+(-8\-db^2\tau-2\tau^2d)z_2\-z_2 +(-4\tau bd-4b\-d\tau^2)\-z_2\-z_2"#,
            r#"(-2b\tau^2-2b)z_1z_2+(-4b^2\tau-\tau)z_1\-z_2 +(-\tau^2-4b^2)\-z_1z_2+(-4b\tau)\-z_1\-z_2 +(-2d\tau^2)z_2z_2+(-4bd\tau-4b\-d)z_2\-z_2+(-2\-d\tau)\-z_2\-z_2"#,
            r#"(4b^2\tau^2-4b^2)z_1z_2 +(4b\tau^3-8b^3\tau-2b\tau)z_1\-z_2 +(2\tau^3-2\tau)\-z_1\-z_2 +(8b^3-4b+2b\tau^2)\-z_1z_2 +(8bd\tau^2-8bd)z_2z_2 +(6d\tau^3+8b^2\-d-4d\tau)z_2\-z_2+(4b\-d\tau+4bd\tau^2)\-z_2\-z_2"#,
            r#"(4b\tau)z_1z_2+(4b^2+\tau^2)z_1\-z_2 +(\tau+ 4b^2\tau)\-z_1z_2+(2b+2b\tau^2)\-z_1\-z_2+(2d\tau)z_2z_2+(4bd +4b\-d\tau)z_2\-z_2+(2\-d\tau^2)\-z_2\-z_2"#,
        ],
        CaseId::C2c => [
            r#"(8b^3-2b\tau^2)z_1\-z_2 +(2b\tau-8b^3\tau)\-z_1z_2 +(4b^2-4b^2\tau^2)\-z_1\-z_2"#,
            r#"(-2b\tau^2-2b)z_1z_2+(-4b^2\tau-\tau)z_1\-z_2 +(-\tau^2-4b^2)\-z_1z_2+(-4b\tau)\-z_1\-z_2"#,
            r#"(4b^2\tau^2-4b^2)z_1z_2 +(4b\tau^3-8b^3\tau-2b\tau)z_1\-z_2 +(2\tau^3-2\tau)\-z_1\-z_2 +(8b^3-4b+2b\tau^2)\-z_1z_2"#,
            r#"(4b\tau)z_1z_2+(4b^2+\tau^2)z_1\-z_2 +(\tau+ 4b^2\tau)\-z_1z_2+(2b+2b\tau^2)\-z_1\-z_2"#,
        ],
        CaseId::C2def => [
            r#"(2a\tau-8|a|^2d)z_1\-z_1 +(4\tau a\-d-4\tau\-ad)\-z_1\-z_2+(8a|d|^2\tau-2\tau^2d)z_2\-z_2"#,
            r#"(-2a)z_1z_1+(-4a\-d-\tau)z_1\-z_2+(-2\-a\tau)\-z_1\-z_1 +(-4\-ad\tau-\tau^2)\-z_1z_2+(-2d\tau^2)z_2z_2 +(-2\-d\tau)\-z_2\-z_2"#,
            r#"(4a\tau^2-6a+8|a|^2d\tau)z_1\-z_1+(12ad\tau^2-12ad)z_1z_2 +(2\tau^3-2\tau+4\-ad\tau^2-4a\-d)\-z_1\-z_2 +(6d\tau^3-8a|d|^2-4d\tau)z_2\-z_2"#,
            r#"(2a\tau)z_1z_1+(4a\-d\tau+\tau^2)z_1\-z_2+(2\-a)\-z_1\-z_1 +(4\-ad+\tau )\-z_1z_2+(2d\tau)z_2z_2+(2\-d\tau^2)\-z_2\-z_2"#,
        ],
        CaseId::C3 => [
            r#"(8\-ab^2-8|a|^2d+2a)z_1\-z_1+(8b^3-8abd-2ai-2b)z_1\-z_2+(4\-ab+4ab-4|a|^2i)\-z_1\-z_1 +(8\-ab^2i-8|a|^2di+2b+8abd-8b^3)\-z_1z_2+(4a\-d-4\-ad-4|a|^2-8bai)\-z_1\-z_2 +(8ib^3-8iabd+8a|d|^2-8\-db^2-2d-2bi)z_2\-z_2+(-4ba-4bd-4\-dai-4\-db)\-z_2\-z_2"#,
            r#"(-2a)z_1z_1+(-4\-ab-4ab-4i|a|^2)z_1\-z_1+(-4b-4ai)z_1z_2 +(-2\-a)\-z_1\-z_1 +(-4\-ad-1-4b^2-4\-abi)\-z_1z_2+(-4b)\-z_1\-z_2+(-2d-4bi)z_2z_2 +(-4b^2-4a\-d-4iab-1)z_1\-z_2+(-4bd-4b\-d-4b^2i-i)z_2\-z_2+(-2\-d)\-z_2\-z_2"#,
            r#"(16a^2i)z_1z_1+(-8\-ab^2-2a+8|a|^2d)z_1\-z_1+(4b\-d+4bd+4i+8b^2i+4a\-di-4ab)\-z_2\-z_2 +(2b-8b^3+8abd+18ai)z_1\-z_2 +(4\-ad-4a\-d-4|a|^2+8\-abi)\-z_1\-z_2+(32abi)z_1z_2 +(-4ab-4\-ab-4|a|^2i)\-z_1\-z_1+(8b^3-8abd-2b-8d|a|^2i+8\-ab^2i-4ai)\-z_1z_2 +(24b^2i-8adi)z_2z_2+(2d-8a|d|^2+8b^2\-d-4a+22bi-8abdi+8b^3i)z_2\-z_2"#,
            r#"(2a)z_1z_1+(4\-ab+4ab-4|a|^2i)z_1\-z_1+(4b)z_1z_2+(4b^2+4a\-d+1-4abi)z_1\-z_2 +(4\-ad+1+ 4b^2-4\-abi)\-z_1z_2+(4b-4\-ai)\-z_1\-z_2+(2d)z_2z_2 +(2\-a)\-z_1\-z_1 +(4bd+4b\-d-i-4b^2i)z_2\-z_2 +(2\-d-4bi)\-z_2\-z_2"#,
        ],
        CaseId::C4 => [
            r#"(8\-ab^2-8|a|^2d)z_1\-z_1+(4\-ab)\-z_1\-z_1+(8b^3-8abd)z_1\-z_2+(4b^2)\-z_1\-z_2"#,
            r#"(-2a)z_1z_1+(-4ab)z_1\-z_1+(-2b)z_1z_2+(-4ad)z_1\-z_2 +(-4b^2)\-z_1z_2+(-4bd)z_2\-z_2"#,
            r#"(-8ab)z_1z_1+(-6a)z_1\-z_1+(-12ad-4b^2)z_1z_2 +(-4ab)\-z_1\-z_1 +(-4ad)\-z_1\-z_2 +(8b^3-4b-8abd)\-z_1z_2+(-8bd)z_2z_2 +(-8ad^2+8b^2d)z_2\-z_2"#,
            r#"(4\-ab)z_1\-z_1+(4b^2)z_1\-z_2+(2\-a)\-z_1\-z_1 +(4\-ad)\-z_1z_2+(2b)\-z_1\-z_2+(4bd)z_2\-z_2"#,
        ],
    }
}

fn constraint(case: CaseId, msg: &str) -> CrFieldsError {
    CrFieldsError::CaseConstraint { case: case.name().into(), msg: msg.into() }
}

fn check(case: CaseId, p: &CaseParams) -> Result<(), CrFieldsError> {
    let real = |x: &GQ| x.is_real();
    let pos = |x: &GQ| x.is_real() && x.re.is_positive();
    let nonneg = |x: &GQ| x.is_real() && !x.re.is_negative();
    let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(constraint(case, msg)) };
    match case {
        CaseId::C1a | CaseId::C1b | CaseId::C1c => {
            let u = p.u.as_ref().ok_or_else(|| constraint(case, "u = e^{i theta} is required"))?;
            need(u.is_unimodular() && u.im.is_positive(), "u must be unimodular with 0 < theta < pi")?;
            need(p.tau.is_none(), "tau is not a parameter of this case")?;
            need(real(&p.a) && real(&p.d), "a and d must be real")?;
            match case {
                CaseId::C1a => need(pos(&p.a) && pos(&p.d), "a > 0 and d > 0"),
                CaseId::C1b => need(p.a.is_zero() && nonneg(&p.b) && nonneg(&p.d), "a = 0, b >= 0, d >= 0"),
                _ => need(p.d.is_zero() && nonneg(&p.b) && pos(&p.a), "d = 0, b >= 0, a > 0"),
            }
        }
        CaseId::C2a | CaseId::C2b | CaseId::C2c | CaseId::C2def => {
            let t = p.tau.as_ref().ok_or_else(|| constraint(case, "tau is required"))?;
            need(t.is_positive() && *t < Rational::one(), "tau must lie in (0, 1)")?;
            need(p.u.is_none(), "u is not a parameter of this case")?;
            need(real(&p.b), "b must be real")?;
            match case {
                CaseId::C2b => need(p.a.is_zero(), "a = 0"),
                CaseId::C2c => need(p.a.is_zero() && p.d.is_zero(), "a = d = 0"),
                CaseId::C2def => need(p.b.is_zero(), "b = 0"),
                _ => Ok(()),
            }
        }
        CaseId::C3 => {
            need(p.u.is_none() && p.tau.is_none(), "only a, b, d are parameters of this case")?;
            need(real(&p.b), "b must be real")
        }
        CaseId::C4 => {
            need(p.u.is_none() && p.tau.as_ref().is_none_or(|t| t.is_zero()), "only a, b, d are parameters of this case")?;
            need(real(&p.b) && real(&p.d), "b and d must be real")
        }
    }
}

/// The germ w = 2Re(z𝒜zᵗ) + zℬz̄ᵗ of the normal form, truncated at `trunc`.
pub fn case_germ(case: CaseId, p: &CaseParams, trunc: u32) -> Result<Germ, CrFieldsError> {
    check(case, p)?;
    let a = ExactMatrix::from_rows(vec![vec![p.a.clone(), p.b.clone()], vec![p.b.clone(), p.d.clone()]])
        .expect("2x2");
    let (z, o) = (GQ::zero(), GQ::one());
    let b = match case {
        CaseId::C1a | CaseId::C1b | CaseId::C1c => ExactMatrix::diag(&[o, p.u.clone().expect("checked")]),
        CaseId::C2a | CaseId::C2b | CaseId::C2c | CaseId::C2def => {
            let t = GQ::from_rational(p.tau.clone().expect("checked"));
            ExactMatrix::from_rows(vec![vec![z, o], vec![t, GQ::zero()]]).expect("2x2")
        }
        CaseId::C3 => ExactMatrix::from_rows(vec![vec![z.clone(), o.clone()], vec![o, GQ::i()]]).expect("2x2"),
        CaseId::C4 => ExactMatrix::from_rows(vec![vec![z.clone(), o], vec![z.clone(), z]]).expect("2x2"),
    };
    Ok(Germ::from_pair(&QuadraticPair::new(a, b), trunc)?)
}

/// Evaluate the transcribed displays of `case` at `p`.
pub fn case_series(case: CaseId, p: &CaseParams) -> Result<CaseSeries, CrFieldsError> {
    check(case, p)?;
    let mut env: BTreeMap<&str, GQ> = BTreeMap::new();
    env.insert("a", p.a.clone());
    env.insert("b", p.b.clone());
    env.insert("d", p.d.clone());
    env.insert("u", p.u.clone().unwrap_or_else(GQ::one));
    env.insert("tau", GQ::from_rational(p.tau.clone().unwrap_or_else(|| int(0))));
    let ev = |s: &str| {
        Expr::new(s, &env).parse().map_err(|msg| CrFieldsError::Format { line: 0, msg: format!("case {case}: {msg}") })
    };
    let [x1, x2, y1, y2] = displays(case);
    Ok(CaseSeries { x1: ev(x1)?, x2: ev(x2)?, y1: ev(y1)?, y2: ev(y2)? })
}

const TRUNC: u32 = 4;

/// Recursive-descent reader for the display dialect: juxtaposition is
/// multiplication, `\-x` and `\ov x` conjugate, `|x|` is the modulus
/// (used only squared), `e^{k i\theta}` is uᵏ, `z_j` are the variables.
struct Expr<'a> {
    s: Vec<char>,
    pos: usize,
    env: &'a BTreeMap<&'a str, GQ>,
}

impl<'a> Expr<'a> {
    fn new(src: &str, env: &'a BTreeMap<&'a str, GQ>) -> Self {
        Expr { s: src.chars().collect(), pos: 0, env }
    }

    fn parse(mut self) -> Result<Series, String> {
        let v = self.expr()?;
        self.ws();
        if self.pos != self.s.len() {
            return Err(format!("trailing input at {}: {:?}", self.pos, self.rest()));
        }
        Ok(v)
    }

    fn rest(&self) -> String {
        self.s[self.pos..].iter().take(20).collect()
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, lit: &str) -> bool {
        self.ws();
        let l: Vec<char> = lit.chars().collect();
        if self.s[self.pos..].starts_with(&l) {
            self.pos += l.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), String> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(format!("expected {lit:?} at {:?}", self.rest()))
        }
    }

    fn constant(&self, c: GQ) -> Series {
        Series::constant(2, TRUNC, c)
    }

    fn expr(&mut self) -> Result<Series, String> {
        let mut acc = Series::zero(2, TRUNC);
        let mut sign = if self.eat("-") {
            -1
        } else {
            self.eat("+");
            1
        };
        loop {
            let t = self.term()?;
            acc = if sign < 0 { &acc - &t } else { &acc + &t };
            if self.eat("+") {
                sign = 1;
            } else if self.eat("-") {
                sign = -1;
            } else {
                return Ok(acc);
            }
        }
    }

    fn starts_factor(&mut self) -> bool {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || "({|abdeiz".contains(c) => true,
            Some('\\') => {
                let r = self.rest();
                r.starts_with("\\-") || r.starts_with("\\ov") || r.starts_with("\\tau") || r.starts_with("\\frac")
            }
            _ => false,
        }
    }

    fn term(&mut self) -> Result<Series, String> {
        if !self.starts_factor() {
            return Err(format!("expected a factor at {:?}", self.rest()));
        }
        let mut acc = self.factor()?;
        while self.starts_factor() {
            let f = self.factor()?;
            acc = &acc * &f;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Series, String> {
        let base = if self.eat("\\-") || self.eat("\\overline") || self.eat("\\ov") {
            self.primary()?.conj()
        } else {
            self.primary()?
        };
        if self.eat("^") {
            let k = if self.eat("{") {
                let k = self.integer()?;
                self.expect("}")?;
                k
            } else {
                self.digit()?
            };
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn digit(&mut self) -> Result<u32, String> {
        match self.peek().and_then(|c| c.to_digit(10)) {
            Some(d) => {
                self.pos += 1;
                Ok(d)
            }
            None => Err(format!("expected a digit at {:?}", self.rest())),
        }
    }

    fn integer(&mut self) -> Result<u32, String> {
        let mut v = self.digit()?;
        while let Some(d) = self.s.get(self.pos).and_then(|c| c.to_digit(10)) {
            self.pos += 1;
            v = v * 10 + d;
        }
        Ok(v)
    }

    fn param(&self, k: &str) -> Series {
        self.constant(self.env[k].clone())
    }

    fn primary(&mut self) -> Result<Series, String> {
        let c = self.peek().ok_or("unexpected end of input")?;
        if c.is_ascii_digit() {
            let n = self.integer()?;
            return Ok(self.constant(GQ::from_int(n as i64)));
        }
        if self.eat("(") {
            let v = self.expr()?;
            self.expect(")")?;
            return Ok(v);
        }
        if self.eat("{") {
            let v = self.expr()?;
            self.expect("}")?;
            return Ok(v);
        }
        if self.eat("|") {
            let v = self.factor()?;
            self.expect("|")?;
            self.expect("^2")?;
            return Ok(&v * &v.conj());
        }
        if self.eat("\\frac") {
            self.expect("{")?;
            let num = self.expr()?;
            self.expect("}")?;
            self.expect("{")?;
            let den = self.expr()?;
            self.expect("}")?;
            let den = den.coeff_at(&[0, 0, 0, 0]);
            let inv = den.inv().map_err(|e| e.to_string())?;
            return Ok(num.scale(&inv));
        }
        if self.eat("\\tau") {
            return Ok(self.param("tau"));
        }
        if self.eat("z_") {
            let k = self.digit()? as usize;
            if !(1..=2).contains(&k) {
                return Err(format!("variable z_{k}"));
            }
            return Ok(Series::var(2, TRUNC, Var::Z(k - 1)));
        }
        if self.eat("e^{") {
            let neg = self.eat("-");
            let k = if self.peek().is_some_and(|c| c.is_ascii_digit()) { self.integer()? } else { 1 };
            self.expect("i")?;
            self.expect("\\theta")?;
            self.expect("}")?;
            let u = &self.env["u"];
            let base = if neg { u.conj() } else { u.clone() };
            return Ok(self.constant(base.pow(k)));
        }
        self.pos += 1;
        match c {
            'a' => Ok(self.param("a")),
            'b' => Ok(self.param("b")),
            'd' => Ok(self.param("d")),
            'i' => Ok(self.constant(GQ::i())),
            _ => Err(format!("unexpected {c:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    fn params(s: &str) -> CaseParams {
        s.parse().unwrap()
    }

    #[test]
    fn spec_samples() {
        let o = case_series(CaseId::C1a, &params("a=1,b=1,d=1,u=3/5+4/5 i")).unwrap();
        assert_eq!(o.x2.c4(1, 0, 1, 0), GQ::q(7, 1, -4, 1));
        let o = case_series(CaseId::C2a, &params("a=1/2,b=1,d=1,tau=1/2")).unwrap();
        assert_eq!(o.y1.c4(2, 0, 0, 0), GQ::from_int(-3));
        let o = case_series(CaseId::C3, &params("a=0,b=0,d=1")).unwrap();
        assert_eq!(o.y1.c4(0, 0, 0, 2), GQ::q(0, 1, 4, 1));
    }

    #[test]
    fn reader_basics() {
        let mut env = BTreeMap::new();
        env.insert("a", GQ::from_int(2));
        env.insert("b", GQ::q(1, 1, 1, 1));
        env.insert("d", GQ::zero());
        env.insert("u", GQ::i());
        env.insert("tau", GQ::from_rational(rat(1, 2)));
        let ev = |s: &str| Expr::new(s, &env).parse().unwrap();
        assert_eq!(ev("|b|^2").coeff_at(&[0, 0, 0, 0]), GQ::from_int(2));
        assert_eq!(ev("\\-b").coeff_at(&[0, 0, 0, 0]), GQ::q(1, 1, -1, 1));
        assert_eq!(ev("e^{-2i\\theta}").coeff_at(&[0, 0, 0, 0]), GQ::from_int(-1));
        assert_eq!(ev("-2\\tau^2az_1\\-z_2").c4(1, 0, 0, 1), GQ::from_int(-1));
        assert_eq!(ev("\\frac{1+\\tau}{2}").coeff_at(&[0, 0, 0, 0]), GQ::from_rational(rat(3, 4)));
        assert!(Expr::new("(a", &env).parse().is_err());
        assert!(Expr::new("q", &env).parse().is_err());
    }

    #[test]
    fn every_display_parses() {
        let samples: [(CaseId, &str); 9] = [
            (CaseId::C1a, "a=1,b=1,d=1,u=3/5+4/5 i"),
            (CaseId::C1b, "b=1,d=2,u=i"),
            (CaseId::C1c, "a=1,b=2,u=i"),
            (CaseId::C2a, "a=1+i,b=1,d=2,tau=1/3"),
            (CaseId::C2b, "b=1,d=2,tau=1/3"),
            (CaseId::C2c, "b=1,tau=1/3"),
            (CaseId::C2def, "a=1,d=1-i,tau=1/3"),
            (CaseId::C3, "a=1,b=2,d=i"),
            (CaseId::C4, "a=1,b=2,d=3"),
        ];
        for (c, p) in samples {
            let s = case_series(c, &params(p)).unwrap();
            for x in [&s.x1, &s.x2, &s.y1, &s.y2] {
                assert!(x.terms.keys().all(|e| e.degree() == 2), "{c}");
            }
        }
    }

    #[test]
    fn constraints() {
        assert!(case_series(CaseId::C2a, &params("a=1,b=1,d=1,tau=1")).is_err());
        assert!(case_series(CaseId::C1a, &params("a=1,b=1,d=1,u=1")).is_err());
        assert!(case_series(CaseId::C1a, &params("a=1,b=1,d=1")).is_err());
        assert!(case_series(CaseId::C2b, &params("a=1,b=1,d=1,tau=1/2")).is_err());
        assert!(case_series(CaseId::C3, &params("b=i")).is_err());
        assert!("5a".parse::<CaseId>().is_err());
        assert_eq!("2d-f".parse::<CaseId>().unwrap(), CaseId::C2def);
    }
}
