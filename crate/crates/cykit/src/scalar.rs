//! Exact coefficient arithmetic: arbitrary-precision rationals for the
//! symbolic layer, and a runtime prime field for large linear-algebra runs.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::fmt;

/// Exact rational, the coefficient type of every symbolic expression.
/// Stored in lowest terms with positive denominator (num's invariant).
pub type Rat = BigRational;

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Prints a rational the way the `.dgq` grammar expects: `3`, `-2`, `3/4`.
pub fn rat_display(r: &Rat) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Coefficient field selector for linear-algebra runs.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Field {
    Q,
    Fp(u64),
}

impl Field {
    pub fn parse(s: &str) -> Option<Field> {
        if s == "q" || s == "Q" {
            Some(Field::Q)
        } else if let Some(p) = s.strip_prefix("fp:") {
            p.parse::<u64>().ok().map(Field::Fp)
        } else {
            None
        }
    }

    pub fn zero(&self) -> Scalar {
        match self {
            Field::Q => Scalar::Q(Rat::zero()),
            Field::Fp(p) => Scalar::Fp { v: 0, p: *p },
        }
    }

    pub fn one(&self) -> Scalar {
        match self {
            Field::Q => Scalar::Q(Rat::one()),
            Field::Fp(p) => Scalar::Fp { v: 1, p: *p },
        }
    }

    /// Reduce an exact rational into this field. Panics if the denominator
    /// vanishes mod p; acceptable because p is chosen large and prime.
    pub fn from_rat(&self, r: &Rat) -> Scalar {
        match self {
            Field::Q => Scalar::Q(r.clone()),
            Field::Fp(p) => {
                let n = mod_big(r.numer(), *p);
                let d = mod_big(r.denom(), *p);
                assert!(d != 0, "denominator vanishes mod {}", p);
                Scalar::Fp {
                    v: mul_mod(n, inv_mod(d, *p), *p),
                    p: *p,
                }
            }
        }
    }
}

fn mod_big(n: &BigInt, p: u64) -> u64 {
    let m = n % BigInt::from(p);
    let m = if m.is_negative() { m + BigInt::from(p) } else { m };
    let (_, digits) = m.to_u64_digits();
    *digits.first().unwrap_or(&0)
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    acc
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Exact scalar: either a rational or an element of F_p for a runtime prime.
/// Arithmetic across distinct fields is a programming error and panics.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Scalar {
    Q(Rat),
    Fp { v: u64, p: u64 },
}

impl Scalar {
    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Q(r) => r.is_zero(),
            Scalar::Fp { v, .. } => *v == 0,
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a + b),
            (Scalar::Fp { v: a, p }, Scalar::Fp { v: b, p: q }) => {
                assert_eq!(p, q, "mixed prime fields");
                Scalar::Fp { v: (a + b) % p, p: *p }
            }
            _ => panic!("mixed scalar fields"),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a * b),
            (Scalar::Fp { v: a, p }, Scalar::Fp { v: b, p: q }) => {
                assert_eq!(p, q, "mixed prime fields");
                Scalar::Fp { v: mul_mod(*a, *b, *p), p: *p }
            }
            _ => panic!("mixed scalar fields"),
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Q(a) => Scalar::Q(-a),
            Scalar::Fp { v, p } => Scalar::Fp { v: (p - v) % p, p: *p },
        }
    }

    pub fn inv(&self) -> Scalar {
        match self {
            Scalar::Q(a) => {
                assert!(!a.is_zero(), "division by zero");
                Scalar::Q(a.recip())
            }
            Scalar::Fp { v, p } => {
                assert!(*v != 0, "division by zero");
                Scalar::Fp { v: inv_mod(*v, *p), p: *p }
            }
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Q(r) => write!(f, "{}", rat_display(r)),
            Scalar::Fp { v, .. } => write!(f, "{}", v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fp_arithmetic_roundtrip() {
        let f = Field::Fp(32003);
        let a = f.from_rat(&rat_frac(2, 3));
        let three = f.from_rat(&rat_int(3));
        assert_eq!(a.mul(&three), f.from_rat(&rat_int(2)));
        assert!(a.sub(&a).is_zero());
        assert_eq!(a.mul(&a.inv()), f.one());
    }

    #[test]
    fn rat_display_forms() {
        assert_eq!(rat_display(&rat_int(-7)), "-7");
        assert_eq!(rat_display(&rat_frac(2, 4)), "1/2");
    }
}
