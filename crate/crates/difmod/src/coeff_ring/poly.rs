use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use super::scalar::{Field, Scalar};
use crate::{Error, Result};

/// Exponent vector; length always equals the ring's variable count.
pub type Monomial = Vec<u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonomialOrder {
    Grevlex,
    Lex,
}

/// A polynomial ring k[x0..x{n-1}] with a fixed monomial order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyRing {
    pub field: Field,
    pub nvars: usize,
    pub order: MonomialOrder,
}

impl PolyRing {
    pub fn new(field: Field, nvars: usize, order: MonomialOrder) -> Arc<PolyRing> {
        Arc::new(PolyRing {
            field,
            nvars,
            order,
        })
    }

    pub fn var_name(&self, i: usize) -> String {
        format!("x{}", i)
    }

    /// Compares monomials; `Greater` means `a` is larger in the ring's order.
    pub fn cmp_mono(&self, a: &[u32], b: &[u32]) -> Ordering {
        debug_assert_eq!(a.len(), self.nvars);
        debug_assert_eq!(b.len(), self.nvars);
        match self.order {
            MonomialOrder::Grevlex => {
                let da: u64 = a.iter().map(|&e| e as u64).sum();
                let db: u64 = b.iter().map(|&e| e as u64).sum();
                match da.cmp(&db) {
                    Ordering::Equal => {
                        for i in (0..a.len()).rev() {
                            if a[i] != b[i] {
                                // Smaller rightmost differing exponent wins.
                                return if a[i] < b[i] {
                                    Ordering::Greater
                                } else {
                                    Ordering::Less
                                };
                            }
                        }
                        Ordering::Equal
                    }
                    other => other,
                }
            }
            MonomialOrder::Lex => {
                for i in 0..a.len() {
                    if a[i] != b[i] {
                        return a[i].cmp(&b[i]);
                    }
                }
                Ordering::Equal
            }
        }
    }
}

pub fn mono_total_degree(m: &[u32]) -> i64 {
    m.iter().map(|&e| e as i64).sum()
}

pub fn mono_mul(a: &[u32], b: &[u32]) -> Monomial {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x.checked_add(y).expect("exponent overflow"))
        .collect()
}

pub fn mono_divides(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| x <= y)
}

/// b / a when a divides b.
pub fn mono_quot(b: &[u32], a: &[u32]) -> Monomial {
    b.iter().zip(a).map(|(&x, &y)| x - y).collect()
}

pub fn mono_lcm(a: &[u32], b: &[u32]) -> Monomial {
    a.iter().zip(b).map(|(&x, &y)| x.max(y)).collect()
}

pub fn mono_coprime(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| x == 0 || y == 0)
}

/// Sparse polynomial in canonical form: terms sorted strictly descending in
/// the ring's monomial order, no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    ring: Arc<PolyRing>,
    terms: Vec<(Monomial, Scalar)>,
}

/// Degree/homogeneity report; `degree` is `None` for the zero polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeReport {
    pub degree: Option<i64>,
    pub homogeneous: bool,
}

impl Poly {
    pub fn zero(ring: &Arc<PolyRing>) -> Poly {
        Poly {
            ring: Arc::clone(ring),
            terms: Vec::new(),
        }
    }

    pub fn one(ring: &Arc<PolyRing>) -> Poly {
        Poly::constant(ring, ring.field.one())
    }

    pub fn constant(ring: &Arc<PolyRing>, c: Scalar) -> Poly {
        if c.is_zero() {
            return Poly::zero(ring);
        }
        Poly {
            ring: Arc::clone(ring),
            terms: vec![(vec![0; ring.nvars], c)],
        }
    }

    pub fn var(ring: &Arc<PolyRing>, i: usize) -> Poly {
        assert!(i < ring.nvars, "variable index out of range");
        let mut m = vec![0; ring.nvars];
        m[i] = 1;
        Poly {
            ring: Arc::clone(ring),
            terms: vec![(m, ring.field.one())],
        }
    }

    pub fn monomial(ring: &Arc<PolyRing>, m: Monomial, c: Scalar) -> Poly {
        assert_eq!(m.len(), ring.nvars);
        if c.is_zero() {
            return Poly::zero(ring);
        }
        Poly {
            ring: Arc::clone(ring),
            terms: vec![(m, c)],
        }
    }

    /// Builds a polynomial from arbitrary (monomial, coefficient) pairs,
    /// combining duplicates and restoring canonical order.
    pub fn from_terms(ring: &Arc<PolyRing>, mut raw: Vec<(Monomial, Scalar)>) -> Poly {
        raw.retain(|(_, c)| !c.is_zero());
        for (m, _) in &raw {
            assert_eq!(m.len(), ring.nvars, "monomial arity mismatch");
        }
        raw.sort_unstable_by(|(a, _), (b, _)| ring.cmp_mono(b, a));
        let mut terms: Vec<(Monomial, Scalar)> = Vec::with_capacity(raw.len());
        for (m, c) in raw {
            if let Some((last_m, last_c)) = terms.last_mut() {
                if *last_m == m {
                    *last_c = last_c.add(&c);
                    if last_c.is_zero() {
                        terms.pop();
                    }
                    continue;
                }
            }
            terms.push((m, c));
        }
        Poly {
            ring: Arc::clone(ring),
            terms,
        }
    }

    pub fn ring(&self) -> &Arc<PolyRing> {
        &self.ring
    }

    pub fn terms(&self) -> &[(Monomial, Scalar)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self.terms[0].1.is_one()
            && self.terms[0].0.iter().all(|&e| e == 0)
    }

    /// Nonzero constant polynomials are exactly the units of k[x].
    pub fn constant_value(&self) -> Option<&Scalar> {
        if self.terms.len() == 1 && self.terms[0].0.iter().all(|&e| e == 0) {
            Some(&self.terms[0].1)
        } else {
            None
        }
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &Scalar)> {
        self.terms.first().map(|(m, c)| (m, c))
    }

    pub fn check_same_ring(&self, other: &Poly) -> Result<()> {
        if self.ring == other.ring {
            Ok(())
        } else {
            Err(Error::RingMismatch)
        }
    }

    pub fn degree_report(&self) -> DegreeReport {
        match self.terms.first() {
            None => DegreeReport {
                degree: None,
                homogeneous: true,
            },
            Some(_) => {
                let degs: Vec<i64> = self
                    .terms
                    .iter()
                    .map(|(m, _)| mono_total_degree(m))
                    .collect();
                let max = *degs.iter().max().unwrap();
                DegreeReport {
                    degree: Some(max),
                    homogeneous: degs.iter().all(|&d| d == max),
                }
            }
        }
    }

    pub fn total_degree(&self) -> Option<i64> {
        self.degree_report().degree
    }

    /// Homogeneous of the given degree (the zero polynomial always is).
    pub fn is_homogeneous_of(&self, d: i64) -> bool {
        self.terms.iter().all(|(m, _)| mono_total_degree(m) == d)
    }

    pub fn scale(&self, c: &Scalar) -> Poly {
        if c.is_zero() {
            return Poly::zero(&self.ring);
        }
        Poly {
            ring: Arc::clone(&self.ring),
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.clone(), a.mul(c)))
                .collect(),
        }
    }

    /// Multiply by the term c * m.
    pub fn mul_term(&self, m: &[u32], c: &Scalar) -> Poly {
        if c.is_zero() {
            return Poly::zero(&self.ring);
        }
        Poly {
            ring: Arc::clone(&self.ring),
            terms: self
                .terms
                .iter()
                .map(|(mm, a)| (mono_mul(mm, m), a.mul(c)))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one(&self.ring);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Entry-wise Frobenius a -> a^(p^e) in characteristic p: exponents scale
    /// by p^e and prime-field coefficients are fixed.
    pub fn frobenius_power(&self, e: u32) -> Result<Poly> {
        let p = self.ring.field.characteristic();
        if p == 0 {
            return Err(Error::CharacteristicZero);
        }
        let mut q: u64 = 1;
        for _ in 0..e {
            q = q.checked_mul(p).ok_or(Error::ExponentOverflow)?;
        }
        let q32: u32 = q.try_into().map_err(|_| Error::ExponentOverflow)?;
        let mut terms = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            let m2: Monomial = m
                .iter()
                .map(|&x| x.checked_mul(q32).ok_or(Error::ExponentOverflow))
                .collect::<Result<_>>()?;
            terms.push((m2, c.frobenius(e)?));
        }
        // Scaling all exponents by a constant preserves both orders.
        Ok(Poly {
            ring: Arc::clone(&self.ring),
            terms,
        })
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        assert!(
            self.ring == rhs.ring,
            "polynomial arithmetic across different rings"
        );
        let mut terms = Vec::with_capacity(self.terms.len() + rhs.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < rhs.terms.len() {
            let (ma, ca) = &self.terms[i];
            let (mb, cb) = &rhs.terms[j];
            match self.ring.cmp_mono(ma, mb) {
                Ordering::Greater => {
                    terms.push((ma.clone(), ca.clone()));
                    i += 1;
                }
                Ordering::Less => {
                    terms.push((mb.clone(), cb.clone()));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = ca.add(cb);
                    if !c.is_zero() {
                        terms.push((ma.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        terms.extend(self.terms[i..].iter().cloned());
        terms.extend(rhs.terms[j..].iter().cloned());
        Poly {
            ring: Arc::clone(&self.ring),
            terms,
        }
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            ring: Arc::clone(&self.ring),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.neg()))
                .collect(),
        }
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        assert!(
            self.ring == rhs.ring,
            "polynomial arithmetic across different rings"
        );
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero(&self.ring);
        }
        let mut raw = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                raw.push((mono_mul(ma, mb), ca.mul(cb)));
            }
        }
        Poly::from_terms(&self.ring, raw)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_display_negative();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mag = c.display_abs();
            let trivial_mono = m.iter().all(|&e| e == 0);
            if trivial_mono {
                write!(f, "{}", mag)?;
            } else {
                let mut lead = true;
                if !mag.is_one() {
                    write!(f, "{}", mag)?;
                    lead = false;
                }
                for (i, &e) in m.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    if !lead {
                        write!(f, "*")?;
                    }
                    lead = false;
                    write!(f, "{}", self.ring.var_name(i))?;
                    if e > 1 {
                        write!(f, "^{}", e)?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring2() -> Arc<PolyRing> {
        PolyRing::new(Field::rationals(), 2, MonomialOrder::Grevlex)
    }

    #[test]
    fn cancellation() {
        let r = ring2();
        let x = Poly::var(&r, 0);
        let y = Poly::var(&r, 1);
        let a = &x + &y;
        let b = &x - &y;
        let two_x = &a + &b;
        assert_eq!(two_x, x.scale(&r.field.from_i64(2)));
    }

    #[test]
    fn grevlex_order() {
        let r = ring2();
        // x^2 > x*y > y^2 > x > y > 1 under grevlex.
        assert_eq!(r.cmp_mono(&[2, 0], &[1, 1]), Ordering::Greater);
        assert_eq!(r.cmp_mono(&[1, 1], &[0, 2]), Ordering::Greater);
        assert_eq!(r.cmp_mono(&[0, 2], &[1, 0]), Ordering::Greater);
        assert_eq!(r.cmp_mono(&[1, 0], &[0, 1]), Ordering::Greater);
    }

    #[test]
    fn char2_square() {
        let r = PolyRing::new(Field::prime(2).unwrap(), 1, MonomialOrder::Grevlex);
        let xp1 = &Poly::var(&r, 0) + &Poly::one(&r);
        let sq = &xp1 * &xp1;
        let expect = &Poly::var(&r, 0).pow(2) + &Poly::one(&r);
        assert_eq!(sq, expect);
    }

    #[test]
    fn degree_report() {
        let r = ring2();
        let zero = Poly::zero(&r);
        assert_eq!(
            zero.degree_report(),
            DegreeReport {
                degree: None,
                homogeneous: true
            }
        );
        let x = Poly::var(&r, 0);
        let x2y = x.pow(2).mul_term(&[0, 1], &r.field.one());
        assert_eq!(
            x2y.degree_report(),
            DegreeReport {
                degree: Some(3),
                homogeneous: true
            }
        );
        let mixed = &x.pow(2) + &Poly::var(&r, 1);
        assert_eq!(
            mixed.degree_report(),
            DegreeReport {
                degree: Some(2),
                homogeneous: false
            }
        );
    }

    #[test]
    fn frobenius_matches_powering() {
        let r = PolyRing::new(Field::prime(3).unwrap(), 2, MonomialOrder::Grevlex);
        let s = &Poly::var(&r, 0) + &Poly::var(&r, 1);
        let f = s.frobenius_power(1).unwrap();
        assert_eq!(f, s.pow(3));
        let f2 = s.frobenius_power(2).unwrap();
        assert_eq!(f2, s.pow(9));
        assert_eq!(s.frobenius_power(0).unwrap(), s);
    }

    #[test]
    fn frobenius_is_hom() {
        let r = PolyRing::new(Field::prime(5).unwrap(), 2, MonomialOrder::Grevlex);
        let a = &(&Poly::var(&r, 0) * &Poly::var(&r, 1)) + &Poly::constant(&r, r.field.from_i64(2));
        let b = &Poly::var(&r, 0).pow(2) - &Poly::constant(&r, r.field.from_i64(3));
        let lhs = (&a * &b).frobenius_power(1).unwrap();
        let rhs = &a.frobenius_power(1).unwrap() * &b.frobenius_power(1).unwrap();
        assert_eq!(lhs, rhs);
        let lhs = (&a + &b).frobenius_power(1).unwrap();
        let rhs = &a.frobenius_power(1).unwrap() + &b.frobenius_power(1).unwrap();
        assert_eq!(lhs, rhs);
    }
}
