//! Small helpers around exact rational arithmetic and the extended value
//! lattice (rationals plus +/- infinity) used by the balance analysis.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn rat_from_i64(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// Parse `3`, `-1`, `1/2`, `0.5`, `2.5e-1` as an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).ok()?;
        let d = BigInt::from_str(den.trim()).ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    // decimal with optional exponent
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, i32::from_str(e).ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let negative = int_part.starts_with('-');
    let digits: String = format!(
        "{}{}",
        int_part.trim_start_matches(['+', '-']),
        frac_part
    );
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut value = BigRational::from_integer(BigInt::from_str(&digits).ok()?);
    if negative {
        value = -value;
    }
    let shift = exp - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    match shift.cmp(&0) {
        Ordering::Greater => {
            for _ in 0..shift {
                value *= &ten;
            }
        }
        Ordering::Less => {
            for _ in 0..(-shift) {
                value /= &ten;
            }
        }
        Ordering::Equal => {}
    }
    Some(value)
}

/// Canonical text form: integer when the denominator is 1, `p/q` otherwise.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Scale a nonnegative rational vector to coprime integers.
pub fn rat_vec_to_coprime_ints(v: &[BigRational]) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for r in v {
        lcm = lcm.lcm(r.denom());
    }
    let ints: Vec<BigInt> = v
        .iter()
        .map(|r| (r * BigRational::from_integer(lcm.clone())).to_integer())
        .collect();
    let mut gcd = BigInt::zero();
    for i in &ints {
        gcd = gcd.gcd(i);
    }
    if gcd.is_zero() {
        return ints;
    }
    ints.into_iter().map(|i| i / &gcd).collect()
}

/// A rational extended with symbolic +/- infinity. `NegInf` is the value of a
/// max over an empty index set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ext {
    NegInf,
    Finite(BigRational),
    PosInf,
}

impl Ext {
    pub fn finite(v: BigRational) -> Self {
        Ext::Finite(v)
    }

    pub fn as_finite(&self) -> Option<&BigRational> {
        match self {
            Ext::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Ext::Finite(_))
    }

    /// Max over an iterator of rationals; empty yields NegInf.
    pub fn max_of<'a>(vals: impl Iterator<Item = &'a BigRational>) -> Ext {
        let mut best: Option<BigRational> = None;
        for v in vals {
            match &best {
                Some(b) if b >= v => {}
                _ => best = Some(v.clone()),
            }
        }
        best.map_or(Ext::NegInf, Ext::Finite)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Ext::NegInf => f64::NEG_INFINITY,
            Ext::Finite(v) => rat_to_f64(v),
            Ext::PosInf => f64::INFINITY,
        }
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ext {
    fn cmp(&self, other: &Self) -> Ordering {
        use Ext::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::NegInf => write!(f, "-inf"),
            Ext::Finite(v) => write!(f, "{}", format_rational(v)),
            Ext::PosInf => write!(f, "+inf"),
        }
    }
}

/// Subtract extended values where the result is known finite-or-infinite:
/// finite - finite, finite - NegInf = +inf.
pub fn ext_sub(a: &BigRational, b: &Ext) -> Ext {
    match b {
        Ext::NegInf => Ext::PosInf,
        Ext::Finite(v) => Ext::Finite(a - v),
        Ext::PosInf => Ext::NegInf,
    }
}

pub fn rat_sign(r: &BigRational) -> i8 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}
