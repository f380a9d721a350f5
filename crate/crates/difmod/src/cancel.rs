//! Gaussian cancellation on a total differential matrix. Repeatedly removes
//! pairs of basis elements coupled by a constant unit entry, producing a
//! strong deformation retract onto the span of the survivors. Shared by
//! complex-level and differential-module-level minimization.

use crate::coeff_ring::Poly;
use crate::matrix::RingMatrix;

pub struct TotalReduction {
    /// Surviving original basis indices, ascending.
    pub keep: Vec<usize>,
    /// Reduced differential on the survivors, keep.len() square.
    pub reduced: RingMatrix,
    /// Projection old → new: keep.len() rows, original-rank columns.
    pub p: RingMatrix,
    /// Inclusion new → old.
    pub iota: RingMatrix,
    /// Homotopy on the old basis: ι∘p − id = D·h + h·D, h² = hι = ph = 0.
    pub h: RingMatrix,
}

/// Cancels off-diagonal constant unit entries of `d` until none remain.
/// Pivot choice is deterministic: lowest source degree, then lexicographic
/// (row, column). Valid for any square matrix squaring to zero; diagonal
/// entries are never chosen as pivots and the correction terms account for
/// them.
pub fn cancel_total(d: &RingMatrix, degrees: &[i64]) -> TotalReduction {
    let n = d.rows();
    assert_eq!(n, d.cols(), "total differential must be square");
    assert_eq!(n, degrees.len());
    let ring = d.ring();

    let mut cur = d.clone();
    let mut p = RingMatrix::identity(ring, n);
    let mut iota = RingMatrix::identity(ring, n);
    let mut h = RingMatrix::zero(ring, n, n);
    let mut live = vec![true; n];

    loop {
        // Pivot scan: constant unit entry at (f, e) minimizing
        // (degrees[e], f, e).
        let mut pivot: Option<(i64, usize, usize)> = None;
        for f in 0..n {
            if !live[f] {
                continue;
            }
            for e in 0..n {
                if !live[e] || e == f {
                    continue;
                }
                if cur.get(f, e).constant_value().is_some() {
                    let key = (degrees[e], f, e);
                    if pivot.map_or(true, |q| key < q) {
                        pivot = Some(key);
                    }
                }
            }
        }
        let Some((_, f, e)) = pivot else {
            break;
        };
        let u = cur.get(f, e).constant_value().expect("pivot is constant");
        let uinv_p = Poly::constant(ring, u.inv());

        // Stash the data the updates need before mutating anything.
        let col_e: Vec<Poly> = (0..n)
            .map(|v| {
                if live[v] && v != e && v != f {
                    cur.get(v, e).clone()
                } else {
                    Poly::zero(ring)
                }
            })
            .collect();
        let row_f: Vec<Poly> = (0..n)
            .map(|w| {
                if live[w] && w != e && w != f {
                    cur.get(f, w).clone()
                } else {
                    Poly::zero(ring)
                }
            })
            .collect();
        let iota_col_e: Vec<Poly> = (0..n).map(|r| iota.get(r, e).clone()).collect();
        let p_row_f: Vec<Poly> = (0..n).map(|c| p.get(f, c).clone()).collect();

        // h ← h + ι_cum ∘ h_step ∘ p_cum, where h_step = −u⁻¹·E_{e,f}.
        for r in 0..n {
            if iota_col_e[r].is_zero() {
                continue;
            }
            let scale = &(&iota_col_e[r] * &uinv_p);
            for c in 0..n {
                if p_row_f[c].is_zero() {
                    continue;
                }
                let delta = scale * &p_row_f[c];
                h.set(r, c, &h.get(r, c).clone() - &delta);
            }
        }

        // p ← p_step ∘ p: subtract u⁻¹·col_e[v]·(row f of p) from each row v,
        // then drop rows e and f.
        for v in 0..n {
            if col_e[v].is_zero() {
                continue;
            }
            let scale = &(&col_e[v] * &uinv_p);
            for c in 0..n {
                if p_row_f[c].is_zero() {
                    continue;
                }
                let delta = scale * &p_row_f[c];
                p.set(v, c, &p.get(v, c).clone() - &delta);
            }
        }
        for c in 0..n {
            p.set(e, c, Poly::zero(ring));
            p.set(f, c, Poly::zero(ring));
        }

        // ι ← ι ∘ ι_step: subtract u⁻¹·row_f[w]·(column e of ι) from each
        // column w, then drop columns e and f.
        for w in 0..n {
            if row_f[w].is_zero() {
                continue;
            }
            let scale = &(&row_f[w] * &uinv_p);
            for r in 0..n {
                if iota_col_e[r].is_zero() {
                    continue;
                }
                let delta = scale * &iota_col_e[r];
                iota.set(r, w, &iota.get(r, w).clone() - &delta);
            }
        }
        for r in 0..n {
            iota.set(r, e, Poly::zero(ring));
            iota.set(r, f, Poly::zero(ring));
        }

        // D ← D − u⁻¹·col_e·row_f on the survivors; zero out e and f.
        for v in 0..n {
            if col_e[v].is_zero() {
                continue;
            }
            let scale = &(&col_e[v] * &uinv_p);
            for w in 0..n {
                if row_f[w].is_zero() {
                    continue;
                }
                let delta = scale * &row_f[w];
                cur.set(v, w, &cur.get(v, w).clone() - &delta);
            }
        }
        for t in 0..n {
            cur.set(e, t, Poly::zero(ring));
            cur.set(t, e, Poly::zero(ring));
            cur.set(f, t, Poly::zero(ring));
            cur.set(t, f, Poly::zero(ring));
        }
        live[e] = false;
        live[f] = false;
    }

    let keep: Vec<usize> = (0..n).filter(|&i| live[i]).collect();
    TotalReduction {
        reduced: cur.select_rows(&keep).select_cols(&keep),
        p: p.select_rows(&keep),
        iota: iota.select_cols(&keep),
        h,
        keep,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff_ring::{Field, MonomialOrder, PolyRing};

    #[test]
    fn contractible_pair_cancels() {
        let ring = PolyRing::new(Field::rationals(), 2, MonomialOrder::Grevlex);
        // 0 → R →(1) R → 0 as a total matrix.
        let mut d = RingMatrix::zero(&ring, 2, 2);
        d.set(0, 1, Poly::one(&ring));
        let red = cancel_total(&d, &[0, 0]);
        assert!(red.keep.is_empty());
        assert!(red.reduced.is_zero());
        // ι∘p − id = Dh + hD reduces to −id = Dh + hD here.
        let dh = &(&d * &red.h) + &(&red.h * &d);
        let minus_id = -&RingMatrix::identity(&ring, 2);
        assert_eq!(dh, minus_id);
    }

    #[test]
    fn mixed_unit_and_variable_entries() {
        let ring = PolyRing::new(Field::rationals(), 1, MonomialOrder::Grevlex);
        let x = Poly::var(&ring, 0);
        // Basis (a, b, c, e) with D(b) = a, D(e) = x·a + c is already the
        // general shape: cancelling (a, b) must leave D(e) = c, then (c, e)
        // cancels too; everything is contractible.
        let mut d = RingMatrix::zero(&ring, 4, 4);
        d.set(0, 1, Poly::one(&ring));
        d.set(0, 3, x.clone());
        d.set(2, 3, Poly::one(&ring));
        let red = cancel_total(&d, &[0, 1, 0, 1]);
        assert!(red.keep.is_empty());
        // The homotopy certifies contractibility exactly.
        let dh = &(&d * &red.h) + &(&red.h * &d);
        assert_eq!(dh, -&RingMatrix::identity(&ring, 4));
        // Side conditions.
        assert!((&red.h * &red.h).is_zero());
    }

    #[test]
    fn koszul_stays_untouched() {
        let ring = PolyRing::new(Field::rationals(), 2, MonomialOrder::Grevlex);
        let x = Poly::var(&ring, 0);
        let y = Poly::var(&ring, 1);
        // Total matrix of the Koszul complex on x, y: no constant entries.
        let mut d = RingMatrix::zero(&ring, 4, 4);
        d.set(0, 1, x.clone());
        d.set(0, 2, y.clone());
        d.set(1, 3, -&y);
        d.set(2, 3, x.clone());
        let red = cancel_total(&d, &[0, 1, 1, 2]);
        assert_eq!(red.keep, vec![0, 1, 2, 3]);
        assert_eq!(red.reduced, d);
        assert!(red.h.is_zero());
    }

    #[test]
    fn partial_cancellation_keeps_sdr_identities() {
        let ring = PolyRing::new(Field::rationals(), 1, MonomialOrder::Grevlex);
        let x = Poly::var(&ring, 0);
        // R ⊕ R → R ⊕ R, d = [[1, 0], [x, x²]] spread on a 4-element basis:
        // targets 0,1 and sources 2,3.
        let mut d = RingMatrix::zero(&ring, 4, 4);
        d.set(0, 2, Poly::one(&ring));
        d.set(0, 3, Poly::zero(&ring));
        d.set(1, 2, x.clone());
        d.set(1, 3, &x * &x);
        let red = cancel_total(&d, &[0, 0, 0, 0]);
        assert_eq!(red.keep, vec![1, 3]);
        // Reduced differential: d(3) = x²·1 unchanged (the pivot row/col did
        // not interact with column 3 through the correction term).
        assert_eq!(red.reduced.get(0, 1), &(&x * &x));
        // SDR identities on the nose.
        let n = 4;
        let ip = &red.iota * &red.p;
        let id = RingMatrix::identity(&ring, n);
        let dh = &(&d * &red.h) + &(&red.h * &d);
        assert_eq!(&ip - &id, dh);
        let pi = &red.p * &red.iota;
        assert_eq!(pi, RingMatrix::identity(&ring, 2));
        assert!((&red.p * &red.h).is_zero());
        assert!((&red.h * &red.iota).is_zero());
        assert!((&red.h * &red.h).is_zero());
        // Chain map conditions: p·D = D'·p and D·ι = ι·D'.
        assert_eq!(&red.p * &d, &red.reduced * &red.p);
        assert_eq!(&d * &red.iota, &red.iota * &red.reduced);
    }
}
