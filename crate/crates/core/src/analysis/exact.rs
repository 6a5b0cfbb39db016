//! Exact rationals, binomial tables and their floating renderings.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

/// log2 of a positive big integer, accurate to double precision.
pub fn log2_biguint(v: &BigUint) -> f64 {
    assert!(!v.is_zero(), "log2 of zero");
    let bits = v.bits();
    if bits <= 64 {
        return (v.to_u64().unwrap() as f64).log2();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_u64().unwrap();
    shift as f64 + (top as f64).log2()
}

/// log2 of a positive rational; `-inf` for zero.
pub fn log2_rational(r: &BigRational) -> f64 {
    assert!(!r.is_negative(), "log2 of a negative value");
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    log2_biguint(r.numer().magnitude()) - log2_biguint(r.denom().magnitude())
}

/// Scientific rendering with `digits` significant digits, truncated (not
/// rounded) from the exact value.
pub fn scientific(r: &BigRational, digits: usize) -> String {
    assert!(digits >= 1);
    if r.is_zero() {
        return "0".to_string();
    }
    let sign = if r.is_negative() { "-" } else { "" };
    let num = r.numer().magnitude().clone();
    let den = r.denom().magnitude().clone();
    let mut exp10 = ((log2_biguint(&num) - log2_biguint(&den)) * std::f64::consts::LOG10_2).floor() as i64;
    let ten = BigUint::from(10u32);
    loop {
        let shift = digits as i64 - 1 - exp10;
        let scaled = if shift >= 0 {
            (&num * ten.pow(shift as u32)) / &den
        } else {
            &num / (&den * ten.pow((-shift) as u32))
        };
        let s = scaled.to_string();
        if s.len() > digits {
            exp10 += 1;
        } else if s.len() < digits {
            exp10 -= 1;
        } else {
            let (head, tail) = s.split_at(1);
            return if tail.is_empty() {
                format!("{sign}{head}e{exp10}")
            } else {
                format!("{sign}{head}.{tail}e{exp10}")
            };
        }
    }
}

/// Nearest rational with denominator <= 10^12 by continued fractions.
/// Decimal-looking floats such as 0.95 or 0.015 come back as 19/20, 3/200.
pub fn rational_from_f64(x: f64) -> BigRational {
    assert!(x.is_finite(), "non-finite parameter");
    let neg = x < 0.0;
    let target = x.abs();
    let max_den: i128 = 1_000_000_000_000;
    let (mut h0, mut h1, mut k0, mut k1): (i128, i128, i128, i128) = (0, 1, 1, 0);
    let mut v = target;
    for _ in 0..64 {
        let a = v.floor();
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - target).abs() <= 1e-15 * target.max(1e-300) || v - a < 1e-18 {
            break;
        }
        v = 1.0 / (v - a);
    }
    let r = BigRational::new(BigInt::from(h1), BigInt::from(k1));
    if neg {
        -r
    } else {
        r
    }
}

pub fn floor_to_i64(r: &BigRational) -> i64 {
    r.floor().to_integer().to_i64().expect("floor fits in i64")
}

pub fn ceil_to_i64(r: &BigRational) -> i64 {
    r.ceil().to_integer().to_i64().expect("ceil fits in i64")
}

pub fn pow2(e: u64) -> BigUint {
    BigUint::one() << e
}

/// C(n, k) by the multiplicative formula; zero outside 0 <= k <= n.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// The full row C(n, 0..=n).
pub fn binomial_row(n: u64) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for k in 0..n {
        c = c * (n - k) / (k + 1);
        row.push(c.clone());
    }
    row
}

/// `tail[k] = sum_{i >= k} row[i]`, with one trailing zero entry.
pub fn suffix_sums(row: &[BigUint]) -> Vec<BigUint> {
    let mut tail = vec![BigUint::zero(); row.len() + 1];
    for i in (0..row.len()).rev() {
        tail[i] = &tail[i + 1] + &row[i];
    }
    tail
}

/// A probability held as an exact rational.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactProb(BigRational);

impl ExactProb {
    pub fn new(value: BigRational) -> Self {
        assert!(
            !value.is_negative() && value <= BigRational::one(),
            "probability out of [0, 1]: {value}"
        );
        ExactProb(value)
    }

    pub fn from_ratio(num: BigUint, den: BigUint) -> Self {
        ExactProb::new(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Self {
        ExactProb(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactProb(BigRational::one())
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn into_value(self) -> BigRational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn log2(&self) -> f64 {
        log2_rational(&self.0)
    }

    /// Nearest double; underflows to 0 below ~1e-308, use `log2` there.
    pub fn to_f64(&self) -> f64 {
        let l = self.log2();
        if l < -1000.0 {
            return 0.0;
        }
        let (n, d) = (self.0.numer(), self.0.denom());
        let (q, r) = n.div_rem(d);
        if q.is_one() && r.is_zero() {
            return 1.0;
        }
        2f64.powf(l)
    }

    pub fn sci(&self) -> String {
        scientific(&self.0, 12)
    }

    pub fn add(&self, other: &ExactProb) -> BigRational {
        &self.0 + &other.0
    }
}

impl fmt::Debug for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExactProb({} = 2^{:.6})", self.sci(), self.log2())
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.sci())
    }
}

impl Serialize for ExactProb {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ExactProb", 3)?;
        st.serialize_field("decimal", &self.sci())?;
        st.serialize_field("log2", &self.log2())?;
        st.serialize_field("numerator_bits", &self.0.numer().bits())?;
        st.end()
    }
}
