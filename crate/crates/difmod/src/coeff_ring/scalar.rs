use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Rationals,
    Prime(u64),
}

/// An exact coefficient field: Q or F_p with p prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    kind: FieldKind,
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.checked_mul(d).map_or(false, |sq| sq <= n) {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

impl Field {
    pub fn rationals() -> Field {
        Field {
            kind: FieldKind::Rationals,
        }
    }

    pub fn prime(p: u64) -> Result<Field> {
        if !is_prime_u64(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(Field {
            kind: FieldKind::Prime(p),
        })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// 0 for Q, p for F_p.
    pub fn characteristic(&self) -> u64 {
        match self.kind {
            FieldKind::Rationals => 0,
            FieldKind::Prime(p) => p,
        }
    }

    pub fn zero(&self) -> Scalar {
        self.from_i64(0)
    }

    pub fn one(&self) -> Scalar {
        self.from_i64(1)
    }

    pub fn from_i64(&self, n: i64) -> Scalar {
        match self.kind {
            FieldKind::Rationals => Scalar::Rat(BigRational::from_integer(BigInt::from(n))),
            FieldKind::Prime(p) => {
                let v = n.rem_euclid(p as i64) as u64;
                Scalar::Fp { p, v }
            }
        }
    }

    pub fn from_bigint(&self, n: &BigInt) -> Scalar {
        match self.kind {
            FieldKind::Rationals => Scalar::Rat(BigRational::from_integer(n.clone())),
            FieldKind::Prime(p) => {
                let m = BigInt::from(p);
                let r = ((n % &m) + &m) % &m;
                let (_, digits) = r.to_u64_digits();
                let v = digits.first().copied().unwrap_or(0);
                Scalar::Fp { p, v }
            }
        }
    }

    /// num/den as a field element; errors when den vanishes in the field.
    pub fn from_ratio(&self, num: &BigInt, den: &BigInt) -> Result<Scalar> {
        let n = self.from_bigint(num);
        let d = self.from_bigint(den);
        if d.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(n.div(&d))
    }

    /// A primitive k-th root of unity when one is available (k = 1, 2 only).
    pub fn root_of_unity(&self, k: u64) -> Result<Scalar> {
        match k {
            1 => Ok(self.one()),
            2 => {
                if self.characteristic() == 2 {
                    Err(Error::MissingRoot(2))
                } else {
                    Ok(self.from_i64(-1))
                }
            }
            _ => Err(Error::MissingRoot(k)),
        }
    }
}

/// An element of Q or of F_p; F_p values carry their modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scalar {
    Rat(BigRational),
    Fp { p: u64, v: u64 },
}

fn fp_add(p: u64, a: u64, b: u64) -> u64 {
    ((a as u128 + b as u128) % p as u128) as u64
}

fn fp_mul(p: u64, a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn fp_pow(p: u64, mut a: u64, mut e: u64) -> u64 {
    let mut acc = 1u64 % p;
    while e > 0 {
        if e & 1 == 1 {
            acc = fp_mul(p, acc, a);
        }
        a = fp_mul(p, a, a);
        e >>= 1;
    }
    acc
}

fn fp_inv(p: u64, a: u64) -> u64 {
    debug_assert!(a != 0);
    // p is prime, so a^(p-2) inverts a.
    fp_pow(p, a, p - 2)
}

impl Scalar {
    pub fn field(&self) -> Field {
        match self {
            Scalar::Rat(_) => Field::rationals(),
            Scalar::Fp { p, .. } => Field {
                kind: FieldKind::Prime(*p),
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Rat(r) => r.is_zero(),
            Scalar::Fp { v, .. } => *v == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Rat(r) => r.is_one(),
            Scalar::Fp { v, .. } => *v == 1,
        }
    }

    fn pair<'a>(&'a self, other: &'a Scalar) -> (&'a Scalar, &'a Scalar) {
        match (self, other) {
            (Scalar::Rat(_), Scalar::Rat(_)) => (self, other),
            (Scalar::Fp { p: p1, .. }, Scalar::Fp { p: p2, .. }) if p1 == p2 => (self, other),
            _ => panic!("scalar arithmetic across different fields"),
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        match self.pair(other) {
            (Scalar::Rat(a), Scalar::Rat(b)) => Scalar::Rat(a + b),
            (Scalar::Fp { p, v: a }, Scalar::Fp { v: b, .. }) => Scalar::Fp {
                p: *p,
                v: fp_add(*p, *a, *b),
            },
            _ => unreachable!(),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        match self.pair(other) {
            (Scalar::Rat(a), Scalar::Rat(b)) => Scalar::Rat(a * b),
            (Scalar::Fp { p, v: a }, Scalar::Fp { v: b, .. }) => Scalar::Fp {
                p: *p,
                v: fp_mul(*p, *a, *b),
            },
            _ => unreachable!(),
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Rat(a) => Scalar::Rat(-a),
            Scalar::Fp { p, v } => Scalar::Fp {
                p: *p,
                v: if *v == 0 { 0 } else { p - v },
            },
        }
    }

    /// Multiplicative inverse; panics on zero (internal divisors are always
    /// verified nonzero, user-facing division goes through `Field::from_ratio`).
    pub fn inv(&self) -> Scalar {
        match self {
            Scalar::Rat(a) => {
                assert!(!a.is_zero(), "inverse of zero");
                Scalar::Rat(a.recip())
            }
            Scalar::Fp { p, v } => {
                assert!(*v != 0, "inverse of zero");
                Scalar::Fp {
                    p: *p,
                    v: fp_inv(*p, *v),
                }
            }
        }
    }

    pub fn div(&self, other: &Scalar) -> Scalar {
        self.mul(&other.inv())
    }

    /// v^(p^e); the identity on prime fields by Fermat, kept explicit.
    pub fn frobenius(&self, _e: u32) -> Result<Scalar> {
        match self {
            Scalar::Rat(_) => Err(Error::CharacteristicZero),
            Scalar::Fp { .. } => Ok(self.clone()),
        }
    }

    /// True when the canonical printed form needs a leading minus sign.
    pub fn is_display_negative(&self) -> bool {
        match self {
            Scalar::Rat(a) => a.is_negative(),
            Scalar::Fp { .. } => false,
        }
    }

    /// The scalar whose printed form drops the sign reported by
    /// `is_display_negative`.
    pub fn display_abs(&self) -> Scalar {
        if self.is_display_negative() {
            self.neg()
        } else {
            self.clone()
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Rat(a) => write!(f, "{}", a),
            Scalar::Fp { v, .. } => write!(f, "{}", v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality() {
        assert!(Field::prime(2).is_ok());
        assert!(Field::prime(101).is_ok());
        assert!(matches!(Field::prime(1), Err(Error::NotPrime(1))));
        assert!(matches!(Field::prime(91), Err(Error::NotPrime(91))));
    }

    #[test]
    fn fp_arithmetic() {
        let f = Field::prime(101).unwrap();
        let a = f.from_i64(-1);
        assert_eq!(a, f.from_i64(100));
        let b = f.from_i64(2);
        assert_eq!(a.mul(&b), f.from_i64(99));
        assert_eq!(b.inv().mul(&b), f.one());
    }

    #[test]
    fn rational_arithmetic() {
        let f = Field::rationals();
        let half = f
            .from_ratio(&BigInt::from(1), &BigInt::from(2))
            .unwrap();
        assert_eq!(half.add(&half), f.one());
        assert!(half.sub(&half).is_zero());
    }

    #[test]
    fn roots_of_unity() {
        assert!(Field::rationals().root_of_unity(2).is_ok());
        assert!(Field::prime(2).unwrap().root_of_unity(2).is_err());
        assert!(Field::prime(101).unwrap().root_of_unity(2).is_ok());
    }
}
