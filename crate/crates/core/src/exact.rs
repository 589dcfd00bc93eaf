//! Exact rational arithmetic helpers and a value type that stays exact
//! whenever a formula's roots happen to be rational.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
pub use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Relative tolerance used whenever a comparison involves an irrational value.
pub const IRRATIONAL_REL_TOL: f64 = 1e-12;

pub fn rat(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(value: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(value))
}

pub fn to_f64(q: &BigRational) -> f64 {
    // Ratio<BigInt>::to_f64 handles operands beyond the f64 range of each part.
    q.to_f64().unwrap_or(f64::NAN)
}

/// Exact `degree`-th root of a nonnegative rational, if it is itself rational.
///
/// A reduced fraction `p/q` has a rational root iff both `p` and `q` are
/// perfect powers.
pub fn rational_root(q: &BigRational, degree: u32) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    if q.is_zero() {
        return Some(BigRational::zero());
    }
    let num = exact_int_root(q.numer(), degree)?;
    let den = exact_int_root(q.denom(), degree)?;
    Some(BigRational::new(num, den))
}

fn exact_int_root(x: &BigInt, degree: u32) -> Option<BigInt> {
    let r = x.nth_root(degree);
    if num_traits::pow(r.clone(), degree as usize) == *x {
        Some(r)
    } else {
        None
    }
}

/// Renders a rational as a decimal string. Terminating expansions are exact;
/// others are rounded to 15 fractional digits.
pub fn decimal_string(q: &BigRational) -> String {
    let neg = q.is_negative();
    let q = q.abs();
    let mut den = q.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0u32, 0u32);
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    let digits = if den.is_one() { twos.max(fives) } else { 15 };
    let scale = num_traits::pow(BigInt::from(10), digits as usize);
    let scaled = q.numer() * &scale;
    let (mut whole, rem) = scaled.div_rem(q.denom());
    if !rem.is_zero() && rem * 2 >= *q.denom() {
        whole += 1;
    }
    let (int_part, frac_part) = whole.div_rem(&scale);
    let mut out = String::new();
    if neg && !(int_part.is_zero() && frac_part.is_zero()) {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if digits > 0 {
        let frac = format!("{:0>width$}", frac_part.to_string(), width = digits as usize);
        let frac = frac.trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    }
    out
}

/// Parses `"num/den"` or an integer into a rational.
pub fn parse_fraction(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(BigRational::new(n, d))
            }
        }
        None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
    }
}

pub fn fraction_string(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// A real number that is either known exactly or only as a float.
#[derive(Clone, Debug, PartialEq)]
pub enum Real {
    Exact(BigRational),
    Approx(f64),
}

impl Real {
    pub fn zero() -> Self {
        Real::Exact(BigRational::zero())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Real::Exact(q) => Some(q),
            Real::Approx(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(q) => to_f64(q),
            Real::Approx(x) => *x,
        }
    }

    /// `c * q^(1/degree)`, exact when the root is rational.
    pub fn scaled_root(c: u64, q: &BigRational, degree: u32) -> Self {
        match rational_root(q, degree) {
            Some(r) => Real::Exact(r * int(c)),
            None => Real::Approx(c as f64 * to_f64(q).powf(1.0 / degree as f64)),
        }
    }

    pub fn add(&self, other: &Real) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a + b),
            _ => Real::Approx(self.to_f64() + other.to_f64()),
        }
    }

    pub fn add_rational(&self, q: &BigRational) -> Real {
        self.add(&Real::Exact(q.clone()))
    }

    pub fn sub_rational(&self, q: &BigRational) -> Real {
        self.add(&Real::Exact(-q))
    }

    pub fn clamp_nonnegative(self) -> Real {
        match self {
            Real::Exact(q) if q.is_negative() => Real::zero(),
            Real::Approx(x) if x < 0.0 => Real::Approx(0.0),
            other => other,
        }
    }

    /// Ordering that is exact for two exact values and tolerant (relative
    /// [`IRRATIONAL_REL_TOL`]) otherwise; values within tolerance are equal.
    pub fn tolerant_cmp(&self, other: &Real) -> Ordering {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a.cmp(b),
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                if (a - b).abs() <= IRRATIONAL_REL_TOL * scale {
                    Ordering::Equal
                } else {
                    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
                }
            }
        }
    }

    pub fn tolerant_eq(&self, other: &Real) -> bool {
        self.tolerant_cmp(other) == Ordering::Equal
    }

    pub fn decimal(&self) -> String {
        match self {
            Real::Exact(q) => decimal_string(q),
            Real::Approx(x) => format!("{x}"),
        }
    }

    pub fn fraction(&self) -> Option<String> {
        self.as_exact().map(fraction_string)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(_) => f.write_str(&self.decimal()),
            Real::Approx(x) => write!(f, "~{x}"),
        }
    }
}

impl From<BigRational> for Real {
    fn from(q: BigRational) -> Self {
        Real::Exact(q)
    }
}
