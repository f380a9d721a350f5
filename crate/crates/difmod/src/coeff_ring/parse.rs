use num_bigint::BigInt;
use std::sync::Arc;

use super::poly::{Poly, PolyRing};
use crate::{Error, Result};

/// Parses the textual polynomial syntax, e.g. `3*x0^2*x1 - 1/2*x2`.
///
/// Grammar: a signed sum of terms; each term is a `*`-separated product of
/// integer/rational literals and powers `xN^E` of the variables x0..x{n-1}.
/// Printing a parsed polynomial and re-parsing it is the identity.
pub fn parse_poly(ring: &Arc<PolyRing>, input: &str) -> Result<Poly> {
    Parser {
        ring,
        src: input.as_bytes(),
        pos: 0,
    }
    .parse()
}

struct Parser<'a> {
    ring: &'a Arc<PolyRing>,
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn parse(mut self) -> Result<Poly> {
        self.skip_ws();
        if self.peek().is_none() {
            return self.fail("empty polynomial");
        }
        let mut acc = Poly::zero(self.ring);
        let mut sign = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                true
            }
            Some(b'+') => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        loop {
            let term = self.term()?;
            acc = if sign { &acc - &term } else { &acc + &term };
            self.skip_ws();
            match self.peek() {
                None => return Ok(acc),
                Some(b'+') => {
                    self.pos += 1;
                    sign = false;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = true;
                }
                Some(_) => return self.fail("expected '+' or '-'"),
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.factor()?;
        loop {
            self.skip_ws();
            if self.peek() == Some(b'*') {
                self.pos += 1;
                let f = self.factor()?;
                acc = &acc * &f;
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Poly> {
        self.skip_ws();
        match self.peek() {
            Some(b'x') => {
                self.pos += 1;
                let idx_pos = self.pos;
                let idx = self.integer_u64("variable index")?;
                let idx: usize = idx
                    .try_into()
                    .map_err(|_| self.err_at(idx_pos, "variable index too large"))?;
                if idx >= self.ring.nvars {
                    return Err(self.err_at(
                        idx_pos,
                        &format!("variable x{} out of range (ring has {} variables)", idx, self.ring.nvars),
                    ));
                }
                let exp = if self.peek() == Some(b'^') {
                    self.pos += 1;
                    let e_pos = self.pos;
                    let e = self.integer_u64("exponent")?;
                    u32::try_from(e).map_err(|_| self.err_at(e_pos, "exponent too large"))?
                } else {
                    1
                };
                Ok(Poly::var(self.ring, idx).pow(exp))
            }
            Some(c) if c.is_ascii_digit() => {
                let num = self.integer_big()?;
                if self.peek() == Some(b'/') {
                    self.pos += 1;
                    let den_pos = self.pos;
                    let den = self.integer_big()?;
                    let c = self
                        .ring
                        .field
                        .from_ratio(&num, &den)
                        .map_err(|_| self.err_at(den_pos, "zero denominator"))?;
                    Ok(Poly::constant(self.ring, c))
                } else {
                    Ok(Poly::constant(self.ring, self.ring.field.from_bigint(&num)))
                }
            }
            _ => self.fail("expected a coefficient or variable"),
        }
    }

    fn integer_big(&mut self) -> Result<BigInt> {
        let start = self.pos;
        while self.peek().map_or(false, |c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.fail("expected a number");
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        Ok(s.parse::<BigInt>().unwrap())
    }

    fn integer_u64(&mut self, what: &str) -> Result<u64> {
        let start = self.pos;
        while self.peek().map_or(false, |c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err_at(self.pos, &format!("expected {}", what)));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse::<u64>()
            .map_err(|_| self.err_at(start, &format!("{} too large", what)))
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek() == Some(b' ') {
            self.pos += 1;
        }
    }

    fn fail<T>(&self, msg: &str) -> Result<T> {
        Err(self.err_at(self.pos, msg))
    }

    fn err_at(&self, pos: usize, msg: &str) -> Error {
        Error::Parse {
            pos,
            msg: msg.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff_ring::{Field, MonomialOrder};

    fn ring3() -> Arc<PolyRing> {
        PolyRing::new(Field::rationals(), 3, MonomialOrder::Grevlex)
    }

    #[test]
    fn round_trip() {
        let r = ring3();
        for text in [
            "3*x0^2*x1 - 1/2*x2",
            "x0 + x1 + x2",
            "-x0^3 + 2*x1*x2 - 7",
            "0",
            "1",
            "-1/3",
            "x1^17",
        ] {
            let p = parse_poly(&r, text).unwrap();
            let printed = p.to_string();
            let back = parse_poly(&r, &printed).unwrap();
            assert_eq!(p, back, "round trip through `{}` -> `{}`", text, printed);
        }
    }

    #[test]
    fn canonical_print_is_fixed_point() {
        let r = ring3();
        let p = parse_poly(&r, "3*x0^2*x1 - 1/2*x2").unwrap();
        let s1 = p.to_string();
        let s2 = parse_poly(&r, &s1).unwrap().to_string();
        assert_eq!(s1, s2);
        assert_eq!(s1, "3*x0^2*x1 - 1/2*x2");
    }

    #[test]
    fn mod_p_fractions() {
        let r = PolyRing::new(Field::prime(7).unwrap(), 1, MonomialOrder::Grevlex);
        // 1/2 = 4 mod 7.
        let p = parse_poly(&r, "1/2").unwrap();
        assert_eq!(p, Poly::constant(&r, r.field.from_i64(4)));
    }

    #[test]
    fn errors_carry_positions() {
        let r = ring3();
        match parse_poly(&r, "x0 + @") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("expected parse error, got {:?}", other),
        }
        assert!(parse_poly(&r, "x5").is_err());
        assert!(parse_poly(&r, "").is_err());
        assert!(parse_poly(&r, "x0 +").is_err());
        assert!(parse_poly(&r, "1/0").is_err());
    }

    #[test]
    fn whitespace_and_signs() {
        let r = ring3();
        let a = parse_poly(&r, "  - x0  +  2 * x1 ").unwrap();
        let b = parse_poly(&r, "2*x1 - x0").unwrap();
        assert_eq!(a, b);
    }
}
