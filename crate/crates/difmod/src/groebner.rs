//! Groebner bases for submodules of free modules, with transformation logs.
//! Position-over-term order (earlier component wins), Buchberger with the
//! normal selection strategy, Schreyer-style syzygies, standard-monomial
//! length counting, and leading-term Krull dimension.

use std::cmp::Ordering;
use std::sync::Arc;

use crate::coeff_ring::{
    mono_coprime, mono_divides, mono_lcm, mono_quot, mono_total_degree, Monomial, Poly, PolyRing,
    Scalar,
};
use crate::matrix::RingMatrix;
use crate::{Error, Result};

/// An element of the free module R^k as a dense coordinate vector.
pub type Vector = Vec<Poly>;

pub fn vector_is_zero(v: &[Poly]) -> bool {
    v.iter().all(|p| p.is_zero())
}

fn zero_vector(ring: &Arc<PolyRing>, k: usize) -> Vector {
    vec![Poly::zero(ring); k]
}

fn v_add(a: &[Poly], b: &[Poly]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn v_sub(a: &[Poly], b: &[Poly]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn v_scale(a: &[Poly], c: &Scalar) -> Vector {
    a.iter().map(|x| x.scale(c)).collect()
}

fn v_mul_term(a: &[Poly], m: &[u32], c: &Scalar) -> Vector {
    a.iter().map(|x| x.mul_term(m, c)).collect()
}

/// Leading position under position-over-term: smallest component index with a
/// nonzero entry, then that polynomial's leading term.
fn lead(v: &[Poly]) -> Option<(usize, &Monomial, &Scalar)> {
    for (c, p) in v.iter().enumerate() {
        if let Some((m, a)) = p.leading_term() {
            return Some((c, m, a));
        }
    }
    None
}

/// `Greater` means the module term (comp_a, mono_a) is larger.
fn cmp_term(ring: &PolyRing, ca: usize, ma: &[u32], cb: usize, mb: &[u32]) -> Ordering {
    match ca.cmp(&cb) {
        Ordering::Less => Ordering::Greater,
        Ordering::Greater => Ordering::Less,
        Ordering::Equal => ring.cmp_mono(ma, mb),
    }
}

/// Result of dividing a vector by a list of module elements.
struct Division {
    remainder: Vector,
    /// One quotient polynomial per divisor: input = Σ quotients·divisors + remainder.
    quotients: Vec<Poly>,
}

fn divide(ring: &Arc<PolyRing>, v: &[Poly], basis: &[Vector]) -> Division {
    let k = v.len();
    let mut work = v.to_vec();
    let mut remainder = zero_vector(ring, k);
    let mut quotients = vec![Poly::zero(ring); basis.len()];
    'outer: while let Some((c, m, a)) = lead(&work) {
        let (c, m, a) = (c, m.clone(), a.clone());
        for (idx, g) in basis.iter().enumerate() {
            if let Some((gc, gm, ga)) = lead(g) {
                if gc == c && mono_divides(gm, &m) {
                    let qm = mono_quot(&m, gm);
                    let qc = a.div(ga);
                    work = v_sub(&work, &v_mul_term(g, &qm, &qc));
                    quotients[idx] = &quotients[idx] + &Poly::monomial(ring, qm, qc);
                    continue 'outer;
                }
            }
        }
        // Move the irreducible leading term to the remainder.
        let t = Poly::monomial(ring, m, a);
        remainder[c] = &remainder[c] + &t;
        work[c] = &work[c] - &t;
    }
    Division {
        remainder,
        quotients,
    }
}

/// Reduced Groebner basis of a submodule of R^k, remembering how each basis
/// element is assembled from the original generators.
#[derive(Debug, Clone)]
pub struct ModuleGB {
    ring: Arc<PolyRing>,
    ambient_rank: usize,
    generators: Vec<Vector>,
    basis: Vec<Vector>,
    /// transform[b][g]: coefficient of generators[g] in basis[b].
    transform: Vec<Vec<Poly>>,
}

pub fn module_gb(gens: &[Vector], ambient_rank: usize, ring: &Arc<PolyRing>) -> Result<ModuleGB> {
    for v in gens {
        if v.len() != ambient_rank {
            return Err(Error::Shape(format!(
                "generator has length {}, ambient rank is {}",
                v.len(),
                ambient_rank
            )));
        }
        for p in v {
            if p.ring() != ring {
                return Err(Error::RingMismatch);
            }
        }
    }

    // Working elements carry their expression in the original generators.
    let mut basis: Vec<Vector> = Vec::new();
    let mut expr: Vec<Vec<Poly>> = Vec::new();
    let ngens = gens.len();
    let push = |basis: &mut Vec<Vector>, expr: &mut Vec<Vec<Poly>>, v: Vector, e: Vec<Poly>| {
        let (_, _, c) = lead(&v).expect("pushing a zero element");
        let inv = c.inv();
        basis.push(v_scale(&v, &inv));
        expr.push(v_scale(&e, &inv));
    };
    for (i, g) in gens.iter().enumerate() {
        if vector_is_zero(g) {
            continue;
        }
        let mut e = zero_vector(ring, ngens);
        e[i] = Poly::one(ring);
        push(&mut basis, &mut expr, g.clone(), e);
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let add_pairs = |pairs: &mut Vec<(usize, usize)>, basis: &[Vector], new: usize| {
        for i in 0..new {
            let (ci, _, _) = lead(&basis[i]).unwrap();
            let (cn, _, _) = lead(&basis[new]).unwrap();
            if ci == cn {
                pairs.push((i, new));
            }
        }
    };
    for n in 0..basis.len() {
        add_pairs(&mut pairs, &basis, n);
    }

    // Single-component elements with coprime leads form an ideal-style pair
    // whose S-vector always reduces to zero; the criterion is only valid for
    // modules in that restricted shape.
    let single_component = |v: &Vector| v.iter().filter(|p| !p.is_zero()).count() <= 1;

    while !pairs.is_empty() {
        // Normal strategy: smallest lcm in the module term order, ties by index.
        let mut best = 0;
        let mut best_key: Option<(usize, Monomial)> = None;
        for (t, &(i, j)) in pairs.iter().enumerate() {
            let (c, mi, _) = lead(&basis[i]).unwrap();
            let (_, mj, _) = lead(&basis[j]).unwrap();
            let l = mono_lcm(mi, mj);
            let better = match &best_key {
                None => true,
                Some((bc, bl)) => cmp_term(ring, c, &l, *bc, bl) == Ordering::Less,
            };
            if better {
                best = t;
                best_key = Some((c, l));
            }
        }
        let (i, j) = pairs.swap_remove(best);

        let mi = lead(&basis[i]).unwrap().1.clone();
        let mj = lead(&basis[j]).unwrap().1.clone();
        if mono_coprime(&mi, &mj) && single_component(&basis[i]) && single_component(&basis[j]) {
            continue;
        }
        let l = mono_lcm(&mi, &mj);
        let one = ring.field.one();
        let ui = mono_quot(&l, &mi);
        let uj = mono_quot(&l, &mj);
        let s = v_sub(
            &v_mul_term(&basis[i], &ui, &one),
            &v_mul_term(&basis[j], &uj, &one),
        );
        let div = divide(ring, &s, &basis);
        if vector_is_zero(&div.remainder) {
            continue;
        }
        let mut e = v_sub(
            &v_mul_term(&expr[i], &ui, &one),
            &v_mul_term(&expr[j], &uj, &one),
        );
        for (k, q) in div.quotients.iter().enumerate() {
            if !q.is_zero() {
                for (a, b) in e.iter_mut().zip(&expr[k]) {
                    *a = &*a - &(q * b);
                }
            }
        }
        push(&mut basis, &mut expr, div.remainder, e);
        let n = basis.len() - 1;
        add_pairs(&mut pairs, &basis, n);
    }

    // Minimalize: drop elements whose lead is divisible by another kept lead.
    // Scan in increasing lead order so ties drop the later element.
    let mut order: Vec<usize> = (0..basis.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, ma, _) = lead(&basis[a]).unwrap();
        let (cb, mb, _) = lead(&basis[b]).unwrap();
        cmp_term(ring, ca, ma, cb, mb).then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &idx in &order {
        let (c, m, _) = lead(&basis[idx]).unwrap();
        let dominated = kept.iter().any(|&k| {
            let (kc, km, _) = lead(&basis[k]).unwrap();
            kc == c && mono_divides(km, m)
        });
        if !dominated {
            kept.push(idx);
        }
    }
    // Present largest lead first.
    kept.reverse();

    // Tail interreduction: leads are pairwise indivisible, so one pass of full
    // division against the others yields the reduced basis.
    let mut red_basis: Vec<Vector> = kept.iter().map(|&k| basis[k].clone()).collect();
    let mut red_expr: Vec<Vec<Poly>> = kept.iter().map(|&k| expr[k].clone()).collect();
    for t in 0..red_basis.len() {
        let others: Vec<Vector> = red_basis
            .iter()
            .enumerate()
            .filter(|(u, _)| *u != t)
            .map(|(_, v)| v.clone())
            .collect();
        let div = divide(ring, &red_basis[t], &others);
        let mut e = red_expr[t].clone();
        for (idx, q) in div.quotients.iter().enumerate() {
            if !q.is_zero() {
                // others[idx] skips position t.
                let src = if idx < t { idx } else { idx + 1 };
                for (a, b) in e.iter_mut().zip(&red_expr[src]) {
                    *a = &*a - &(q * b);
                }
            }
        }
        red_basis[t] = div.remainder;
        red_expr[t] = e;
    }

    Ok(ModuleGB {
        ring: Arc::clone(ring),
        ambient_rank,
        generators: gens.to_vec(),
        basis: red_basis,
        transform: red_expr,
    })
}

/// Groebner basis of the column span of a matrix.
pub fn module_gb_cols(a: &RingMatrix) -> Result<ModuleGB> {
    let gens: Vec<Vector> = (0..a.cols()).map(|c| a.col(c)).collect();
    module_gb(&gens, a.rows(), a.ring())
}

impl ModuleGB {
    pub fn ring(&self) -> &Arc<PolyRing> {
        &self.ring
    }

    pub fn ambient_rank(&self) -> usize {
        self.ambient_rank
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    pub fn generators(&self) -> &[Vector] {
        &self.generators
    }

    /// transform()[b][g] is the coefficient of generator g in basis element b.
    pub fn transform(&self) -> &[Vec<Poly>] {
        &self.transform
    }

    /// Full division: v = Σ quotients·basis + remainder, remainder reduced.
    pub fn normal_form(&self, v: &[Poly]) -> (Vector, Vec<Poly>) {
        assert_eq!(v.len(), self.ambient_rank, "ambient rank mismatch");
        let d = divide(&self.ring, v, &self.basis);
        (d.remainder, d.quotients)
    }

    pub fn contains(&self, v: &[Poly]) -> bool {
        vector_is_zero(&self.normal_form(v).0)
    }

    /// Expresses v in the original generators, if v lies in the span.
    pub fn lift(&self, v: &[Poly]) -> Result<Vector> {
        let (rem, q) = self.normal_form(v);
        if !vector_is_zero(&rem) {
            return Err(Error::NotInImage);
        }
        let mut u = zero_vector(&self.ring, self.generators.len());
        for (b, qb) in q.iter().enumerate() {
            if qb.is_zero() {
                continue;
            }
            for (g, coeff) in self.transform[b].iter().enumerate() {
                if !coeff.is_zero() {
                    u[g] = &u[g] + &(qb * coeff);
                }
            }
        }
        Ok(u)
    }

    /// Post-hoc Buchberger check plus transformation-log audit; used by tests.
    pub fn verify(&self) -> bool {
        // Every basis element matches its expression in the generators.
        for (b, e) in self.basis.iter().zip(&self.transform) {
            let mut acc = zero_vector(&self.ring, self.ambient_rank);
            for (g, coeff) in e.iter().enumerate() {
                if !coeff.is_zero() {
                    acc = v_add(&acc, &self.generators[g].iter().map(|p| p * coeff).collect::<Vec<_>>());
                }
            }
            if acc != *b {
                return false;
            }
        }
        // Generators reduce to zero.
        for g in &self.generators {
            if !self.contains(g) {
                return false;
            }
        }
        // All S-vectors reduce to zero.
        for i in 0..self.basis.len() {
            for j in (i + 1)..self.basis.len() {
                let (ci, mi, _) = lead(&self.basis[i]).unwrap();
                let (cj, mj, _) = lead(&self.basis[j]).unwrap();
                if ci != cj {
                    continue;
                }
                let l = mono_lcm(mi, mj);
                let one = self.ring.field.one();
                let s = v_sub(
                    &v_mul_term(&self.basis[i], &mono_quot(&l, mi), &one),
                    &v_mul_term(&self.basis[j], &mono_quot(&l, mj), &one),
                );
                if !self.contains(&s) {
                    return false;
                }
            }
        }
        true
    }
}

/// Solves A·u = v exactly; NotInImage if v is outside the column span.
pub fn lift_through(v: &[Poly], a: &RingMatrix) -> Result<Vector> {
    let gb = module_gb_cols(a)?;
    gb.lift(v)
}

/// Solves A·X = B column by column.
pub fn lift_matrix(a: &RingMatrix, b: &RingMatrix) -> Result<RingMatrix> {
    assert_eq!(a.rows(), b.rows(), "codomain mismatch");
    if b.cols() == 0 {
        return Ok(RingMatrix::zero(a.ring(), a.cols(), 0));
    }
    let gb = module_gb_cols(a)?;
    let mut cols = Vec::with_capacity(b.cols());
    for c in 0..b.cols() {
        cols.push(gb.lift(&b.col(c))?);
    }
    Ok(RingMatrix::from_cols(a.ring(), cols))
}

/// Columns generate ker(A); Schreyer construction over the GB transformation
/// log. A·syzygies(A) = 0 always.
pub fn syzygies(a: &RingMatrix) -> Result<RingMatrix> {
    let ring = a.ring();
    let gb = module_gb_cols(a)?;
    let s = a.cols();
    let t = gb.basis.len();
    let one = ring.field.one();

    // Express each generator over the basis: F = G·B.
    let mut bmat: Vec<Vec<Poly>> = Vec::with_capacity(s); // columns, length t
    for g in &gb.generators {
        let (rem, q) = gb.normal_form(g);
        debug_assert!(vector_is_zero(&rem));
        bmat.push(q);
    }

    let mut cols: Vec<Vector> = Vec::new();

    // Schreyer syzygies of the basis, pushed down to generator coordinates
    // through the transformation log.
    for i in 0..t {
        for j in (i + 1)..t {
            let (ci, mi, _) = lead(&gb.basis[i]).unwrap();
            let (cj, mj, _) = lead(&gb.basis[j]).unwrap();
            if ci != cj {
                continue;
            }
            let l = mono_lcm(mi, mj);
            let ui = mono_quot(&l, mi);
            let uj = mono_quot(&l, mj);
            let sv = v_sub(
                &v_mul_term(&gb.basis[i], &ui, &one),
                &v_mul_term(&gb.basis[j], &uj, &one),
            );
            let div = divide(ring, &sv, &gb.basis);
            debug_assert!(vector_is_zero(&div.remainder), "not a Groebner basis");
            // Syzygy of the basis: u_i e_i − u_j e_j − Σ q_k e_k.
            let mut syz_b = vec![Poly::zero(ring); t];
            syz_b[i] = &syz_b[i] + &Poly::monomial(ring, ui, one.clone());
            syz_b[j] = &syz_b[j] - &Poly::monomial(ring, uj, one.clone());
            for (k, q) in div.quotients.iter().enumerate() {
                syz_b[k] = &syz_b[k] - q;
            }
            // Push to generator coordinates through the log.
            let mut col = zero_vector(ring, s);
            for (b, coeff) in syz_b.iter().enumerate() {
                if coeff.is_zero() {
                    continue;
                }
                for (g, tr) in gb.transform[b].iter().enumerate() {
                    if !tr.is_zero() {
                        col[g] = &col[g] + &(coeff * tr);
                    }
                }
            }
            if !vector_is_zero(&col) {
                cols.push(col);
            }
        }
    }

    // Redundancy syzygies I − A_t·B: how each generator differs from its own
    // re-expression through the basis.
    for g in 0..s {
        let mut col = zero_vector(ring, s);
        col[g] = Poly::one(ring);
        for (b, q) in bmat[g].iter().enumerate() {
            if q.is_zero() {
                continue;
            }
            for (gg, tr) in gb.transform[b].iter().enumerate() {
                if !tr.is_zero() {
                    col[gg] = &col[gg] - &(q * tr);
                }
            }
        }
        if !vector_is_zero(&col) {
            cols.push(col);
        }
    }

    let out = if cols.is_empty() {
        RingMatrix::zero(ring, s, 0)
    } else {
        RingMatrix::from_cols(ring, cols)
    };
    debug_assert!((a * &out).is_zero());
    Ok(out)
}

/// Vector-space dimension over the coefficient field of coker(presentation),
/// or None when the length is infinite. Counts standard monomials of the
/// leading-term module componentwise.
pub fn quotient_length(presentation: &RingMatrix) -> Result<Option<usize>> {
    let ring = presentation.ring();
    let n = ring.nvars;
    let gb = module_gb_cols(presentation)?;
    let mut total = 0usize;
    for comp in 0..presentation.rows() {
        let leads: Vec<&Monomial> = gb
            .basis
            .iter()
            .filter_map(|v| {
                let (c, m, _) = lead(v)?;
                (c == comp).then_some(m)
            })
            .collect();
        // Pure-power bound per variable; absence of one means infinite length.
        let mut bounds = vec![None; n];
        for m in &leads {
            let support: Vec<usize> = (0..n).filter(|&i| m[i] > 0).collect();
            if support.is_empty() {
                bounds.iter_mut().for_each(|b| *b = Some(0u32));
                break;
            }
            if support.len() == 1 {
                let i = support[0];
                let e = m[i];
                bounds[i] = Some(bounds[i].map_or(e, |old: u32| old.min(e)));
            }
        }
        if bounds.iter().any(|b| b.is_none()) {
            if leads.iter().any(|m| m.iter().all(|&e| e == 0)) {
                // Unit lead: nothing survives in this component.
                continue;
            }
            return Ok(None);
        }
        let bounds: Vec<u32> = bounds.into_iter().map(Option::unwrap).collect();
        // Enumerate the box and drop multiples of a leading monomial.
        let mut cur = vec![0u32; n];
        loop {
            if !leads.iter().any(|m| mono_divides(m, &cur)) {
                total += 1;
            }
            // Odometer increment within the box.
            let mut i = 0;
            while i < n {
                cur[i] += 1;
                if cur[i] < bounds[i] {
                    break;
                }
                cur[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }
    Ok(Some(total))
}

/// Krull dimension of R/I from the leading-term ideal: the size of the
/// largest variable subset S with no leading monomial supported inside S.
pub fn krull_dimension(ideal_gens: &[Poly], ring: &Arc<PolyRing>) -> Result<usize> {
    let n = ring.nvars;
    let gens: Vec<Vector> = ideal_gens
        .iter()
        .filter(|p| !p.is_zero())
        .map(|p| vec![p.clone()])
        .collect();
    let gb = module_gb(&gens, 1, ring)?;
    let leads: Vec<Monomial> = gb
        .basis
        .iter()
        .filter_map(|v| lead(v).map(|(_, m, _)| m.clone()))
        .collect();
    if leads.is_empty() {
        return Ok(n);
    }
    let mut best = 0usize;
    for mask in 0u32..(1 << n) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let independent = leads.iter().all(|m| {
            // Some variable outside S must appear in m.
            (0..n).any(|i| m[i] > 0 && mask & (1 << i) == 0)
        });
        if independent {
            best = size;
        }
    }
    Ok(best)
}

/// Total degree of the largest standard monomial, used to pick truncation
/// bounds in tests; None when the quotient is infinite.
pub fn max_standard_degree(presentation: &RingMatrix) -> Result<Option<i64>> {
    let ring = presentation.ring();
    let n = ring.nvars;
    let gb = module_gb_cols(presentation)?;
    let mut best: i64 = -1;
    for comp in 0..presentation.rows() {
        let leads: Vec<&Monomial> = gb
            .basis
            .iter()
            .filter_map(|v| {
                let (c, m, _) = lead(v)?;
                (c == comp).then_some(m)
            })
            .collect();
        let mut bounds = vec![None; n];
        for m in &leads {
            let support: Vec<usize> = (0..n).filter(|&i| m[i] > 0).collect();
            if support.is_empty() {
                bounds.iter_mut().for_each(|b| *b = Some(0u32));
                break;
            }
            if support.len() == 1 {
                let i = support[0];
                bounds[i] = Some(bounds[i].map_or(m[i], |old: u32| old.min(m[i])));
            }
        }
        if bounds.iter().any(|b| b.is_none()) {
            if leads.iter().any(|m| m.iter().all(|&e| e == 0)) {
                continue;
            }
            return Ok(None);
        }
        let bounds: Vec<u32> = bounds.into_iter().map(Option::unwrap).collect();
        let mut cur = vec![0u32; n];
        loop {
            if !leads.iter().any(|m| mono_divides(m, &cur)) {
                best = best.max(mono_total_degree(&cur));
            }
            let mut i = 0;
            while i < n {
                cur[i] += 1;
                if cur[i] < bounds[i] {
                    break;
                }
                cur[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }
    Ok((best >= 0).then_some(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff_ring::{parse_poly, Field, MonomialOrder};
    use crate::linalg;
    use std::collections::BTreeMap;

    fn qring() -> Arc<PolyRing> {
        PolyRing::new(Field::rationals(), 2, MonomialOrder::Grevlex)
    }

    fn f101() -> Arc<PolyRing> {
        PolyRing::new(Field::prime(101).unwrap(), 2, MonomialOrder::Grevlex)
    }

    fn pp(r: &Arc<PolyRing>, s: &str) -> Poly {
        parse_poly(r, s).unwrap()
    }

    #[test]
    fn empty_and_identity() {
        let r = qring();
        let gb = module_gb(&[], 2, &r).unwrap();
        assert!(gb.basis().is_empty());
        let id = RingMatrix::identity(&r, 2);
        let gb = module_gb_cols(&id).unwrap();
        assert_eq!(gb.basis().len(), 2);
        assert_eq!(gb.basis()[0], id.col(0));
        assert_eq!(gb.basis()[1], id.col(1));
        assert!(gb.verify());
    }

    #[test]
    fn ideal_basis_already_reduced() {
        let r = f101();
        let gens: Vec<Vector> = ["x0^2", "x0*x1", "x1^2"]
            .iter()
            .map(|s| vec![pp(&r, s)])
            .collect();
        let gb = module_gb(&gens, 1, &r).unwrap();
        let basis: Vec<Poly> = gb.basis().iter().map(|v| v[0].clone()).collect();
        assert_eq!(
            basis,
            vec![pp(&r, "x0^2"), pp(&r, "x0*x1"), pp(&r, "x1^2")]
        );
        assert!(gb.verify());
    }

    #[test]
    fn normal_form_division() {
        let r = qring();
        // x0^2*x1 against (x0^2, x1^2): remainder 0 with quotient x1 on x0^2.
        let gens: Vec<Vector> = vec![vec![pp(&r, "x0^2")], vec![pp(&r, "x1^2")]];
        let gb = module_gb(&gens, 1, &r).unwrap();
        let (rem, q) = gb.normal_form(&[pp(&r, "x0^2*x1")]);
        assert!(vector_is_zero(&rem));
        // Basis is sorted by descending lead: x0^2 then x1^2 here.
        assert_eq!(gb.basis()[0][0], pp(&r, "x0^2"));
        assert_eq!(q[0], pp(&r, "x1"));
        assert!(q[1].is_zero());

        // e_0 against x0·e_0 is already reduced.
        let gens2: Vec<Vector> = vec![vec![pp(&r, "x0"), Poly::zero(&r)]];
        let gb2 = module_gb(&gens2, 2, &r).unwrap();
        let e0 = vec![Poly::one(&r), Poly::zero(&r)];
        let (rem, q) = gb2.normal_form(&e0);
        assert_eq!(rem, e0);
        assert!(q[0].is_zero());
    }

    #[test]
    fn lifting() {
        let r = qring();
        let a = RingMatrix::from_rows(&r, vec![vec![pp(&r, "x0"), pp(&r, "x1")]]);
        let v = vec![pp(&r, "x0^2 + x1^2")];
        let u = lift_through(&v, &a).unwrap();
        assert_eq!(u, vec![pp(&r, "x0"), pp(&r, "x1")]);
        assert_eq!(a.apply(&u), v);

        let zero = vec![Poly::zero(&r)];
        assert!(vector_is_zero(&lift_through(&zero, &a).unwrap()));

        let id = RingMatrix::identity(&r, 2);
        let w = vec![pp(&r, "x0*x1"), pp(&r, "x1 - 1")];
        assert_eq!(lift_through(&w, &id).unwrap(), w);

        // 1 is not in (x0, x1).
        let one = vec![Poly::one(&r)];
        assert!(matches!(lift_through(&one, &a), Err(Error::NotInImage)));
    }

    #[test]
    fn koszul_syzygy() {
        let r = qring();
        let a = RingMatrix::from_rows(&r, vec![vec![pp(&r, "x0"), pp(&r, "x1")]]);
        let s = syzygies(&a).unwrap();
        assert!((&a * &s).is_zero());
        assert_eq!(s.cols(), 1);
        assert_eq!(s.col(0), vec![pp(&r, "x1"), -&pp(&r, "x0")]);
    }

    #[test]
    fn syzygy_trivial_cases() {
        let r = qring();
        let id = RingMatrix::identity(&r, 2);
        assert_eq!(syzygies(&id).unwrap().cols(), 0);
        let z = RingMatrix::zero(&r, 1, 1);
        let s = syzygies(&z).unwrap();
        assert_eq!(s.cols(), 1);
        assert!(s.get(0, 0).is_one());
    }

    #[test]
    fn syzygy_regular_sequence() {
        let r = qring();
        let a = RingMatrix::from_rows(&r, vec![vec![pp(&r, "x0^2 - x1"), pp(&r, "x0*x1")]]);
        let s = syzygies(&a).unwrap();
        assert!((&a * &s).is_zero());
        assert!(s.cols() >= 1);
        // Every column must be a multiple of the Koszul relation.
        let koszul = RingMatrix::from_rows(
            &r,
            vec![vec![pp(&r, "x0*x1")], vec![-&pp(&r, "x0^2 - x1")]],
        );
        for c in 0..s.cols() {
            let col = RingMatrix::from_cols(&r, vec![s.col(c)]);
            assert!(lift_matrix(&koszul, &col).is_ok());
        }
    }

    #[test]
    fn lengths() {
        let r = f101();
        let id = RingMatrix::identity(&r, 2);
        assert_eq!(quotient_length(&id).unwrap(), Some(0));

        let m = RingMatrix::from_rows(&r, vec![vec![pp(&r, "x0"), pp(&r, "x1")]]);
        assert_eq!(quotient_length(&m).unwrap(), Some(1));

        let sq = RingMatrix::from_rows(
            &r,
            vec![vec![pp(&r, "x0^2"), pp(&r, "x0*x1"), pp(&r, "x1^2")]],
        );
        assert_eq!(quotient_length(&sq).unwrap(), Some(3));
        assert_eq!(max_standard_degree(&sq).unwrap(), Some(1));

        let inf = RingMatrix::from_rows(&r, vec![vec![pp(&r, "x0")]]);
        assert_eq!(quotient_length(&inf).unwrap(), None);
    }

    #[test]
    fn krull_dims() {
        let r = qring();
        assert_eq!(krull_dimension(&[], &r).unwrap(), 2);
        assert_eq!(krull_dimension(&[pp(&r, "x0")], &r).unwrap(), 1);
        assert_eq!(
            krull_dimension(&[pp(&r, "x0^2"), pp(&r, "x0*x1"), pp(&r, "x1^2")], &r).unwrap(),
            0
        );
        // Unit ideal: the zero ring is reported as dimension 0.
        assert_eq!(krull_dimension(&[pp(&r, "1")], &r).unwrap(), 0);
    }

    #[test]
    fn verify_audits_inhomogeneous_basis() {
        let r = qring();
        let gens: Vec<Vector> = vec![vec![pp(&r, "x0^2 - x1")], vec![pp(&r, "x0*x1")]];
        let gb = module_gb(&gens, 1, &r).unwrap();
        assert!(gb.verify());
        // Membership with witnesses.
        let v = vec![pp(&r, "x0^3 - x0*x1")];
        let u = gb.lift(&v).unwrap();
        let mut acc = Poly::zero(&r);
        for (coeff, g) in u.iter().zip(&gens) {
            acc = &acc + &(coeff * &g[0]);
        }
        assert_eq!(acc, v[0]);
    }

    fn monos(n: usize, t: u32) -> Vec<Monomial> {
        if n == 0 {
            return if t == 0 { vec![vec![]] } else { vec![] };
        }
        let mut out = Vec::new();
        for e in 0..=t {
            for rest in monos(n - 1, t - e) {
                let mut m = vec![e];
                m.extend(rest);
                out.push(m);
            }
        }
        out
    }

    /// Independent length computation: sum of graded quotient dimensions up
    /// to degree dmax, by exact rank over the field. Valid for homogeneous
    /// presentations with generator degrees 0.
    fn truncated_length(a: &RingMatrix, dmax: i64) -> usize {
        let ring = a.ring();
        let n = ring.nvars;
        let k = a.rows();
        let mut total = 0;
        for t in 0..=dmax {
            let monos_t = monos(n, t as u32);
            let mut index = BTreeMap::new();
            for (i, m) in monos_t.iter().enumerate() {
                index.insert(m.clone(), i);
            }
            let dim_ambient = k * monos_t.len();
            let mut rows: Vec<Vec<Scalar>> = Vec::new();
            for c in 0..a.cols() {
                let col = a.col(c);
                let Some(cdeg) = col.iter().filter_map(|p| p.total_degree()).max() else {
                    continue;
                };
                if cdeg > t {
                    continue;
                }
                for m in monos(n, (t - cdeg) as u32) {
                    let mut row = vec![ring.field.zero(); dim_ambient];
                    for (comp, p) in col.iter().enumerate() {
                        for (mono, coeff) in p.mul_term(&m, &ring.field.one()).terms() {
                            row[comp * monos_t.len() + index[mono]] = coeff.clone();
                        }
                    }
                    rows.push(row);
                }
            }
            let rank = if rows.is_empty() { 0 } else { linalg::rank(&rows) };
            total += dim_ambient - rank;
        }
        total
    }

    #[test]
    fn length_matches_truncated_linear_algebra() {
        let r = f101();
        let sq = RingMatrix::from_rows(
            &r,
            vec![vec![pp(&r, "x0^2"), pp(&r, "x0*x1"), pp(&r, "x1^2")]],
        );
        let len = quotient_length(&sq).unwrap().unwrap();
        let d = max_standard_degree(&sq).unwrap().unwrap();
        assert_eq!(truncated_length(&sq, d), len);
        // Pieces beyond the last standard degree vanish.
        assert_eq!(truncated_length(&sq, d + 2), len);

        let rq = qring();
        let two = RingMatrix::from_rows(
            &rq,
            vec![
                vec![pp(&rq, "x0"), pp(&rq, "x1"), Poly::zero(&rq)],
                vec![Poly::zero(&rq), pp(&rq, "x0"), pp(&rq, "x1")],
            ],
        );
        let len2 = quotient_length(&two).unwrap().unwrap();
        let d2 = max_standard_degree(&two).unwrap().unwrap();
        assert_eq!(truncated_length(&two, d2 + 2), len2);
    }
}
