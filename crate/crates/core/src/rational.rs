//! Exact scalars: parsing, formatting and an extended type with `+inf`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn from_u64(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"2.3"`, `"-4"`, `"23/10"` or `"1e3"`-free decimal forms exactly.
pub fn parse(text: &str) -> Result<Rational, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| format!("bad numerator in {text:?}"))?;
        let d: BigInt = d.trim().parse().map_err(|_| format!("bad denominator in {text:?}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {text:?}"));
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(format!("not a number: {text:?}"));
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("not a number: {text:?}"));
    }
    let digits = format!("{whole}{frac}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().unwrap() };
    let d = num_traits::pow(BigInt::from(10), frac.len());
    let r = Rational::new(n, d);
    Ok(if neg { -r } else { r })
}

/// Canonical `p/q` text, or just `p` for integers.
pub fn fmt(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal approximation with six places, rounded half away from zero.
pub fn decimal6(r: &Rational) -> String {
    let scale = BigInt::from(1_000_000);
    let scaled = r * Rational::from_integer(scale.clone());
    let abs = scaled.abs();
    let twice = &abs * int(2);
    let mut q = abs.to_integer();
    if twice - Rational::from_integer(&q * 2) >= Rational::one() {
        q += 1;
    }
    let (ip, fp) = q.div_rem(&scale);
    let sign = if r.is_negative() && !q.is_zero() { "-" } else { "" };
    format!("{sign}{ip}.{:06}", fp.to_u64().unwrap_or(0))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Builds `n / d` in lowest terms for `d > 0`.
///
/// One remainder step first brings the numerator below the denominator, so the
/// gcd runs on small operands even when `n` is large.
fn reduced(n: BigInt, d: BigInt) -> Rational {
    let g = d.gcd(&n.mod_floor(&d));
    if g.is_one() {
        Rational::new_raw(n, d)
    } else {
        Rational::new_raw(n / &g, d / g)
    }
}

/// `r * k` for a query count `k`.
pub fn times(r: &Rational, k: u64) -> Rational {
    if k == 0 {
        return Rational::zero();
    }
    let g = r.denom().gcd(&BigInt::from(k));
    Rational::new_raw(r.numer() * (BigInt::from(k) / &g), r.denom() / g)
}

pub fn add(a: &Rational, b: &Rational) -> Rational {
    if a.denom() == b.denom() {
        return reduced(a.numer() + b.numer(), a.denom().clone());
    }
    reduced(a.numer() * b.denom() + b.numer() * a.denom(), a.denom() * b.denom())
}

pub fn sub(a: &Rational, b: &Rational) -> Rational {
    if a.denom() == b.denom() {
        return reduced(a.numer() - b.numer(), a.denom().clone());
    }
    reduced(a.numer() * b.denom() - b.numer() * a.denom(), a.denom() * b.denom())
}

/// `floor(a / b)` for `b > 0`.
pub fn floor_div(a: &Rational, b: &Rational) -> BigInt {
    (a.numer() * b.denom()).div_floor(&(a.denom() * b.numer()))
}

/// `floor(a / b)` for `b > 0`, saturating at `u64::MAX`; negative quotients clamp to 0.
pub fn floor_div_u64(a: &Rational, b: &Rational) -> u64 {
    let q = floor_div(a, b);
    if q.sign() == Sign::Minus {
        0
    } else {
        q.to_u64().unwrap_or(u64::MAX)
    }
}

pub fn ceil_div_u64(a: &Rational, b: &Rational) -> u64 {
    let q = (a / b).ceil().to_integer();
    if q.sign() == Sign::Minus {
        0
    } else {
        q.to_u64().unwrap_or(u64::MAX)
    }
}

/// A rational or positive infinity. Used for bang-per-buck values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ext {
    Finite(Rational),
    Infinite,
}

impl Ext {
    /// `u / c`, or `+inf` when `c` is zero.
    pub fn quotient(u: &Rational, c: &Rational) -> Ext {
        if c.is_zero() {
            Ext::Infinite
        } else {
            Ext::Finite(u / c)
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Ext::Infinite)
    }

    pub fn text(&self) -> String {
        match self {
            Ext::Finite(r) => fmt(r),
            Ext::Infinite => "inf".into(),
        }
    }

    pub fn decimal(&self) -> String {
        match self {
            Ext::Finite(r) => decimal6(r),
            Ext::Infinite => "inf".into(),
        }
    }
}

impl Ord for Ext {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Ext::Infinite, Ext::Infinite) => Ordering::Equal,
            (Ext::Infinite, _) => Ordering::Greater,
            (_, Ext::Infinite) => Ordering::Less,
            (Ext::Finite(a), Ext::Finite(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

/// Least common multiple of the denominators of `values`.
pub fn lcm_of_denoms<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}
