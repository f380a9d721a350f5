//! Homological perturbation for differential modules: deformation-retract
//! data, smallness certification, the two perturbation lemmas, SDR-ification
//! via the three side-condition replacements, and transfer of flag anchors
//! along columnwise equivalences.
//!
//! Conventions, fixed crate-wide: a retract (p, iota, h) from C onto D has
//! p iota = id_D exactly and iota p - id_C = dh + hd; it is strong when
//! h^2 = h iota = p h = 0. With these signs the perturbed data is
//!
//!   p_inf = p M,  iota_inf = M~ iota,  h_inf = h M = M~ h,
//!   delta_inf = p M delta iota,
//!
//! where M = sum_t (delta h)^t and M~ = sum_t (h delta)^t are the finite
//! geometric resolvents of a small perturbation. The series are not
//! alternating; the alternating form belongs to the opposite sign
//! convention for h.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dm_core::{dm_check, DiffModule, DmEquiv, DmMorphism, DmSdr};
use crate::flags::{anchor_column, dm_to_flag, flag_to_dm, FreeFlag};
use crate::homalg::{ComplexSdr, GradedFreeModule};
use crate::matrix::RingMatrix;
use crate::{Error, Result};

/// Which of the three strongness conditions h^2 = 0, h iota = 0, p h = 0
/// currently hold. Flags are computed, never asserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SideConditions {
    pub h_squared: bool,
    pub h_iota: bool,
    pub p_h: bool,
}

impl SideConditions {
    pub fn all(&self) -> bool {
        self.h_squared && self.h_iota && self.p_h
    }
}

fn homotopy_block(d: &DiffModule, h: &BTreeMap<i64, RingMatrix>, j: i64) -> RingMatrix {
    match h.get(&j) {
        Some(b) => b.clone(),
        None => RingMatrix::zero(d.ring(), d.rank(d.next(j)), d.rank(j)),
    }
}

/// Shape-checks degree +1 blocks against `d` and drops zero blocks.
fn normalize_homotopy(
    d: &DiffModule,
    h: BTreeMap<i64, RingMatrix>,
) -> Result<BTreeMap<i64, RingMatrix>> {
    let mut out = BTreeMap::new();
    for (j, b) in h {
        if !Arc::ptr_eq(b.ring(), d.ring()) {
            return Err(Error::RingMismatch);
        }
        let (rows, cols) = (d.rank(d.next(j)), d.rank(j));
        if b.rows() != rows || b.cols() != cols {
            return Err(Error::Shape(format!(
                "homotopy block at component {} is {}x{}, expected {}x{}",
                j,
                b.rows(),
                b.cols(),
                rows,
                cols
            )));
        }
        if !b.is_zero() {
            out.insert(j, b);
        }
    }
    Ok(out)
}

/// Deformation-retract or homotopy-equivalence datum between two
/// differential modules. Always satisfies iota p - id = dh + hd on the big
/// side; a retract (no h') additionally has p iota = id exactly, while an
/// equivalence carries a small-side witness p iota - id = dh' + h'd.
#[derive(Debug, Clone, PartialEq)]
pub struct SdrData {
    p: DmMorphism,
    iota: DmMorphism,
    h: BTreeMap<i64, RingMatrix>,
    h_small: Option<BTreeMap<i64, RingMatrix>>,
    side: SideConditions,
}

impl SdrData {
    fn build(
        p: DmMorphism,
        iota: DmMorphism,
        h: BTreeMap<i64, RingMatrix>,
        h_small: Option<BTreeMap<i64, RingMatrix>>,
    ) -> Result<SdrData> {
        if iota.source() != p.target() || iota.target() != p.source() {
            return Err(Error::Precondition(
                "sdr endpoints do not match: iota must run opposite to p".into(),
            ));
        }
        let big = p.source().clone();
        let small = p.target().clone();
        let h = normalize_homotopy(&big, h)?;
        let h_small = match h_small {
            Some(hs) => Some(normalize_homotopy(&small, hs)?),
            None => None,
        };
        for &j in big.components().keys() {
            let lhs = &(&iota.component(j) * &p.component(j))
                - &RingMatrix::identity(big.ring(), big.rank(j));
            let rhs = &(&big.block(big.next(j)) * &homotopy_block(&big, &h, j))
                + &(&homotopy_block(&big, &h, big.prev(j)) * &big.block(j));
            if lhs != rhs {
                return Err(Error::Precondition(format!(
                    "homotopy identity iota p - id = dh + hd fails at component {}",
                    j
                )));
            }
        }
        match &h_small {
            None => {
                if p.compose(&iota) != DmMorphism::identity(&small) {
                    return Err(Error::Precondition(
                        "retract requires p iota = id on the small module".into(),
                    ));
                }
            }
            Some(hs) => {
                for &j in small.components().keys() {
                    let lhs = &(&p.component(j) * &iota.component(j))
                        - &RingMatrix::identity(small.ring(), small.rank(j));
                    let rhs = &(&small.block(small.next(j)) * &homotopy_block(&small, hs, j))
                        + &(&homotopy_block(&small, hs, small.prev(j)) * &small.block(j));
                    if lhs != rhs {
                        return Err(Error::Precondition(format!(
                            "homotopy identity p iota - id = dh' + h'd fails at component {}",
                            j
                        )));
                    }
                }
            }
        }
        let mut side = SideConditions {
            h_squared: true,
            h_iota: true,
            p_h: true,
        };
        for &j in big.components().keys() {
            let hj = homotopy_block(&big, &h, j);
            if !(&homotopy_block(&big, &h, big.next(j)) * &hj).is_zero() {
                side.h_squared = false;
            }
            if !(&hj * &iota.component(j)).is_zero() {
                side.h_iota = false;
            }
            if !(&p.component(big.next(j)) * &hj).is_zero() {
                side.p_h = false;
            }
        }
        Ok(SdrData {
            p,
            iota,
            h,
            h_small,
            side,
        })
    }

    /// Deformation retract: p iota = id exactly. Verifies both defining
    /// identities and records which side conditions hold.
    pub fn retract(p: DmMorphism, iota: DmMorphism, h: BTreeMap<i64, RingMatrix>) -> Result<SdrData> {
        SdrData::build(p, iota, h, None)
    }

    /// General homotopy equivalence with a small-side homotopy witness.
    pub fn equivalence(
        p: DmMorphism,
        iota: DmMorphism,
        h: BTreeMap<i64, RingMatrix>,
        h_small: BTreeMap<i64, RingMatrix>,
    ) -> Result<SdrData> {
        SdrData::build(p, iota, h, Some(h_small))
    }

    pub fn from_dm_sdr(s: &DmSdr) -> SdrData {
        let h = s
            .big
            .components()
            .keys()
            .map(|&j| (j, s.h_component(j)))
            .collect();
        SdrData::retract(s.p.clone(), s.iota.clone(), h).expect("minimization data is a retract")
    }

    pub fn big(&self) -> &DiffModule {
        self.p.source()
    }

    pub fn small(&self) -> &DiffModule {
        self.p.target()
    }

    pub fn p(&self) -> &DmMorphism {
        &self.p
    }

    pub fn iota(&self) -> &DmMorphism {
        &self.iota
    }

    pub fn h_component(&self, j: i64) -> RingMatrix {
        homotopy_block(self.big(), &self.h, j)
    }

    pub fn h_small_component(&self, j: i64) -> RingMatrix {
        match &self.h_small {
            Some(hs) => homotopy_block(self.small(), hs, j),
            None => {
                let d = self.small();
                RingMatrix::zero(d.ring(), d.rank(d.next(j)), d.rank(j))
            }
        }
    }

    pub fn is_retract(&self) -> bool {
        self.h_small.is_none()
    }

    pub fn is_strong(&self) -> bool {
        self.is_retract() && self.side.all()
    }

    pub fn side_conditions(&self) -> SideConditions {
        self.side
    }

    /// The big-side equivalence datum, dropping the h' witness if present.
    pub fn equiv(&self) -> DmEquiv {
        DmEquiv::new(self.p.clone(), self.iota.clone(), self.h.clone())
            .expect("validated sdr data is an equivalence")
    }

    /// Re-checks every stored identity from scratch.
    pub fn verify(&self) -> bool {
        SdrData::build(
            self.p.clone(),
            self.iota.clone(),
            self.h.clone(),
            self.h_small.clone(),
        )
        .map_or(false, |rebuilt| rebuilt.side == self.side)
    }
}

/// A perturbation delta of the differential of `target`: same block shapes,
/// with (d + delta)^2 = 0 verified on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    target: DiffModule,
    delta: BTreeMap<i64, RingMatrix>,
}

impl Perturbation {
    pub fn new(target: DiffModule, delta: BTreeMap<i64, RingMatrix>) -> Result<Perturbation> {
        let mut blocks = BTreeMap::new();
        for (j, b) in delta {
            if !Arc::ptr_eq(b.ring(), target.ring()) {
                return Err(Error::RingMismatch);
            }
            let (rows, cols) = (target.rank(target.prev(j)), target.rank(j));
            if b.rows() != rows || b.cols() != cols {
                return Err(Error::Shape(format!(
                    "perturbation block at component {} is {}x{}, expected {}x{}",
                    j,
                    b.rows(),
                    b.cols(),
                    rows,
                    cols
                )));
            }
            if !b.is_zero() {
                blocks.insert(j, b);
            }
        }
        let out = Perturbation {
            target,
            delta: blocks,
        };
        let report = dm_check(&out.perturbed());
        if !report.square_failures.is_empty() {
            return Err(Error::Precondition(format!(
                "(d + delta)^2 is nonzero starting at components {:?}",
                report.square_failures
            )));
        }
        Ok(out)
    }

    pub fn zero(target: &DiffModule) -> Perturbation {
        Perturbation {
            target: target.clone(),
            delta: BTreeMap::new(),
        }
    }

    pub fn target(&self) -> &DiffModule {
        &self.target
    }

    pub fn blocks(&self) -> &BTreeMap<i64, RingMatrix> {
        &self.delta
    }

    pub fn block(&self, j: i64) -> RingMatrix {
        match self.delta.get(&j) {
            Some(b) => b.clone(),
            None => RingMatrix::zero(
                self.target.ring(),
                self.target.rank(self.target.prev(j)),
                self.target.rank(j),
            ),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.delta.is_empty()
    }

    /// The module with differential d + delta.
    pub fn perturbed(&self) -> DiffModule {
        let mut blocks = BTreeMap::new();
        for &j in self.target.components().keys() {
            let b = &self.target.block(j) + &self.block(j);
            if !b.is_zero() {
                blocks.insert(j, b);
            }
        }
        DiffModule::new(
            self.target.ring(),
            self.target.modulus(),
            self.target.components().clone(),
            blocks,
            self.target.shift(),
        )
        .expect("perturbation shapes were validated")
    }
}

/// Outcome of the smallness check: the least N with (delta h)^N = 0, or
/// evidence that no power within the structural bound vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smallness {
    Nilpotent(usize),
    NotSmall,
}

/// Least N with (delta h)^N = 0, probing powers up to the largest component
/// rank. Over an integral domain a nilpotent endomorphism of a rank r free
/// module satisfies U^r = 0 (its characteristic polynomial over the fraction
/// field is t^r), so exceeding the bound proves delta h is not nilpotent.
pub fn check_small(delta: &Perturbation, sdr: &SdrData) -> Smallness {
    assert!(
        delta.target() == sdr.big(),
        "perturbation and sdr live on different modules"
    );
    let big = sdr.big();
    let bound = big
        .components()
        .keys()
        .map(|&j| big.rank(j))
        .max()
        .unwrap_or(0);
    if bound == 0 {
        return Smallness::Nilpotent(1);
    }
    let u: BTreeMap<i64, RingMatrix> = big
        .components()
        .keys()
        .map(|&j| (j, &delta.block(big.next(j)) * &sdr.h_component(j)))
        .collect();
    let mut pow = u.clone();
    for n in 1..=bound {
        if pow.values().all(|m| m.is_zero()) {
            return Smallness::Nilpotent(n);
        }
        if n < bound {
            for (j, m) in pow.iter_mut() {
                *m = &*m * &u[j];
            }
        }
    }
    Smallness::NotSmall
}

/// Replaces the homotopy of a retract so that all three side conditions
/// hold, keeping p and iota. The replacements, in order: h <- -h(iota p - 1)
/// kills h iota, h <- -(iota p - 1)h then kills ph, and h <- -h d h kills
/// h^2; each preserves the homotopy identity and the conditions already won.
pub fn make_strong(sdr: &SdrData) -> Result<SdrData> {
    if !sdr.is_retract() {
        return Err(Error::Precondition(
            "make_strong expects a deformation retract".into(),
        ));
    }
    if sdr.side.all() {
        return Ok(sdr.clone());
    }
    let big = sdr.big().clone();
    let e: BTreeMap<i64, RingMatrix> = big
        .components()
        .keys()
        .map(|&j| {
            let m = &(&sdr.iota.component(j) * &sdr.p.component(j))
                - &RingMatrix::identity(big.ring(), big.rank(j));
            (j, m)
        })
        .collect();
    let e_at = |j: i64| -> RingMatrix {
        e.get(&j)
            .cloned()
            .unwrap_or_else(|| RingMatrix::zero(big.ring(), big.rank(j), big.rank(j)))
    };
    let mut h: BTreeMap<i64, RingMatrix> = big
        .components()
        .keys()
        .map(|&j| (j, sdr.h_component(j)))
        .collect();
    for (&j, m) in h.iter_mut() {
        *m = -&(&*m * &e_at(j));
    }
    for (&j, m) in h.iter_mut() {
        *m = -&(&e_at(big.next(j)) * &*m);
    }
    for (&j, m) in h.iter_mut() {
        *m = -&(&*m * &(&big.block(big.next(j)) * &*m));
    }
    let out = SdrData::retract(sdr.p.clone(), sdr.iota.clone(), h)?;
    assert!(out.side.all(), "side-condition replacements must succeed");
    Ok(out)
}

/// Finite geometric resolvent 1 + u + u^2 + ... + u^(n-1).
fn resolvent(u: &RingMatrix, n: usize) -> RingMatrix {
    let mut acc = RingMatrix::identity(u.ring(), u.rows());
    let mut pow = RingMatrix::identity(u.ring(), u.rows());
    for _ in 1..n {
        pow = &pow * u;
        acc = &acc + &pow;
    }
    acc
}

/// First perturbation lemma. Transfers a small perturbation of the big
/// module through a deformation retract; the input is strengthened first
/// when its side conditions fail, so the output is always strong. Returns
/// the perturbed retract together with delta_inf on the small module.
pub fn perturb_sdr(sdr: &SdrData, delta: &Perturbation) -> Result<(SdrData, Perturbation)> {
    if !sdr.is_retract() {
        return Err(Error::Precondition(
            "perturb_sdr expects a deformation retract; use perturb_hequiv".into(),
        ));
    }
    if delta.target() != sdr.big() {
        return Err(Error::Precondition(
            "perturbation does not live on the retract's big module".into(),
        ));
    }
    let strong = if sdr.side.all() {
        sdr.clone()
    } else {
        make_strong(sdr)?
    };
    let n = match check_small(delta, &strong) {
        Smallness::Nilpotent(n) => n,
        Smallness::NotSmall => return Err(Error::NotSmall),
    };
    let big = strong.big().clone();
    let small = strong.small().clone();

    // Per-class resolvents of delta h and h delta.
    let mut m = BTreeMap::new();
    let mut mt = BTreeMap::new();
    for &j in big.components().keys() {
        let u = &delta.block(big.next(j)) * &strong.h_component(j);
        let v = &strong.h_component(big.prev(j)) * &delta.block(j);
        m.insert(j, resolvent(&u, n));
        mt.insert(j, resolvent(&v, n));
    }
    let m_at = |j: i64| -> RingMatrix {
        m.get(&j)
            .cloned()
            .unwrap_or_else(|| RingMatrix::identity(big.ring(), big.rank(j)))
    };

    let mut delta_small = BTreeMap::new();
    for &j in small.components().keys() {
        let b = &(&(&strong.p.component(big.prev(j)) * &m_at(big.prev(j))) * &delta.block(j))
            * &strong.iota.component(j);
        if !b.is_zero() {
            delta_small.insert(j, b);
        }
    }
    let delta_inf = Perturbation::new(small, delta_small)?;

    let big_pert = delta.perturbed();
    let small_pert = delta_inf.perturbed();
    let mut p_blocks = BTreeMap::new();
    let mut i_blocks = BTreeMap::new();
    let mut h_blocks = BTreeMap::new();
    for &j in big.components().keys() {
        p_blocks.insert(j, &strong.p.component(j) * &m_at(j));
        i_blocks.insert(j, &mt[&j] * &strong.iota.component(j));
        h_blocks.insert(j, &strong.h_component(j) * &m_at(j));
    }
    let p_inf = DmMorphism::new(big_pert.clone(), small_pert.clone(), p_blocks)?;
    let iota_inf = DmMorphism::new(small_pert, big_pert, i_blocks)?;
    let out = SdrData::retract(p_inf, iota_inf, h_blocks)?;
    assert!(out.side.all(), "perturbing a strong retract stays strong");
    Ok((out, delta_inf))
}

fn paste(dst: &mut RingMatrix, r0: usize, c0: usize, src: &RingMatrix, negate: bool) {
    for r in 0..src.rows() {
        for c in 0..src.cols() {
            let e = src.get(r, c);
            if e.is_zero() {
                continue;
            }
            let add = if negate { -e } else { e.clone() };
            let cur = dst.get(r0 + r, c0 + c);
            let v = if cur.is_zero() { add } else { cur + &add };
            dst.set(r0 + r, c0 + c, v);
        }
    }
}

/// Mapping cylinder of p: C -> D with its two contractions. Classwise
/// Z_n = C_n + C_{prev n} + D_n with d(x, x', y) = (dx + x', -dx', dy - px').
/// R = [id, -h, iota]: Z -> C and J = [id, 0, 0]^T satisfy R J = id with the
/// closed-form homotopy K = [[0,0,0],[0,-h,iota],[h'p - ph, 0, h']], while
/// P0 = [p, 0, id], I0 = [0,0,id]^T, H0 = -id into the middle slot contract
/// Z onto D strongly.
struct Cylinder {
    z: DiffModule,
    r: DmMorphism,
    j: DmMorphism,
    p0: DmMorphism,
    i0: DmMorphism,
    h0: BTreeMap<i64, RingMatrix>,
    k: BTreeMap<i64, RingMatrix>,
}

fn build_cylinder(he: &SdrData) -> Result<Cylinder> {
    let big = he.big().clone();
    let small = he.small().clone();
    let ring = big.ring().clone();
    let shift = big.shift();

    let mut classes: std::collections::BTreeSet<i64> = std::collections::BTreeSet::new();
    for &n in big.components().keys() {
        classes.insert(n);
        classes.insert(big.next(n));
    }
    for &n in small.components().keys() {
        classes.insert(n);
    }

    // Slot offsets within Z_n: C_n, then C_{prev n} with degrees lowered by
    // the shift, then D_n.
    let slot = |n: i64| -> (usize, usize, usize) {
        (big.rank(n), big.rank(big.prev(n)), small.rank(n))
    };
    let mut comps = BTreeMap::new();
    for &n in &classes {
        let mut degs = big.degrees(n);
        degs.extend(big.degrees(big.prev(n)).iter().map(|d| d - shift));
        degs.extend(small.degrees(n));
        if !degs.is_empty() {
            comps.insert(n, GradedFreeModule::new(degs));
        }
    }
    let rank_z = |n: i64| -> usize {
        let (a, b, c) = slot(n);
        a + b + c
    };
    let mut blocks = BTreeMap::new();
    for &n in &classes {
        let pn = big.prev(n);
        let mut m = RingMatrix::zero(&ring, rank_z(pn), rank_z(n));
        let (a_out, b_out, _) = slot(pn);
        let (a_in, _, _) = slot(n);
        paste(&mut m, 0, 0, &big.block(n), false);
        paste(
            &mut m,
            0,
            a_in,
            &RingMatrix::identity(&ring, big.rank(pn)),
            false,
        );
        paste(&mut m, a_out, a_in, &big.block(pn), true);
        paste(&mut m, a_out + b_out, a_in, &he.p.component(pn), true);
        paste(&mut m, a_out + b_out, a_in + big.rank(pn), &small.block(n), false);
        if !m.is_zero() {
            blocks.insert(n, m);
        }
    }
    let z = DiffModule::new(&ring, big.modulus(), comps, blocks, shift)?;

    let mut r_blocks = BTreeMap::new();
    let mut j_blocks = BTreeMap::new();
    let mut p0_blocks = BTreeMap::new();
    let mut i0_blocks = BTreeMap::new();
    let mut h0 = BTreeMap::new();
    let mut k = BTreeMap::new();
    for &n in &classes {
        let (a, b, c) = slot(n);
        let mut rm = RingMatrix::zero(&ring, big.rank(n), a + b + c);
        paste(&mut rm, 0, 0, &RingMatrix::identity(&ring, a), false);
        paste(&mut rm, 0, a, &he.h_component(big.prev(n)), true);
        paste(&mut rm, 0, a + b, &he.iota.component(n), false);
        r_blocks.insert(n, rm);

        let mut jm = RingMatrix::zero(&ring, a + b + c, big.rank(n));
        paste(&mut jm, 0, 0, &RingMatrix::identity(&ring, a), false);
        j_blocks.insert(n, jm);

        let mut pm = RingMatrix::zero(&ring, small.rank(n), a + b + c);
        paste(&mut pm, 0, 0, &he.p.component(n), false);
        paste(&mut pm, 0, a + b, &RingMatrix::identity(&ring, c), false);
        p0_blocks.insert(n, pm);

        let mut im = RingMatrix::zero(&ring, a + b + c, small.rank(n));
        paste(&mut im, a + b, 0, &RingMatrix::identity(&ring, c), false);
        i0_blocks.insert(n, im);

        let nn = big.next(n);
        let (a_up, _, _) = slot(nn);
        let mut hm = RingMatrix::zero(&ring, rank_z(nn), a + b + c);
        paste(&mut hm, a_up, 0, &RingMatrix::identity(&ring, a), true);
        if !hm.is_zero() {
            h0.insert(n, hm);
        }

        let mut km = RingMatrix::zero(&ring, rank_z(nn), a + b + c);
        paste(&mut km, a_up, a, &he.h_component(big.prev(n)), true);
        paste(&mut km, a_up, a + b, &he.iota.component(n), false);
        let corner = &(&he.h_small_component(n) * &he.p.component(n))
            - &(&he.p.component(nn) * &he.h_component(n));
        paste(&mut km, a_up + a, 0, &corner, false);
        paste(&mut km, a_up + a, a + b, &he.h_small_component(n), false);
        if !km.is_zero() {
            k.insert(n, km);
        }
    }
    Ok(Cylinder {
        r: DmMorphism::new(z.clone(), big.clone(), r_blocks)?,
        j: DmMorphism::new(big, z.clone(), j_blocks)?,
        p0: DmMorphism::new(z.clone(), small.clone(), p0_blocks)?,
        i0: DmMorphism::new(small, z.clone(), i0_blocks)?,
        h0,
        k,
        z,
    })
}

/// Second perturbation lemma, via the mapping cylinder of p. The retraction
/// (R, J, K) of the cylinder onto the big module is strengthened, delta is
/// extended to the cylinder as J delta R (square-zero by R J = id), and the
/// canonical strong contraction of the cylinder onto the small module is
/// perturbed by the first lemma. Composing with the perturbed R and J
/// collapses the cylinder again, so the output connects the two perturbed
/// modules directly, with both homotopy witnesses. For delta = 0 the input
/// p, iota, h come back unchanged.
pub fn perturb_hequiv(he: &SdrData, delta: &Perturbation) -> Result<(SdrData, Perturbation)> {
    if delta.target() != he.big() {
        return Err(Error::Precondition(
            "perturbation does not live on the equivalence's big module".into(),
        ));
    }
    let cyl = build_cylinder(he)?;
    let rj = make_strong(&SdrData::retract(cyl.r, cyl.j, cyl.k)?)?;

    let mut dhat = BTreeMap::new();
    for &n in cyl.z.components().keys() {
        let b = &(&rj.iota.component(cyl.z.prev(n)) * &delta.block(n)) * &rj.p.component(n);
        if !b.is_zero() {
            dhat.insert(n, b);
        }
    }
    let delta_z = Perturbation::new(cyl.z.clone(), dhat)?;
    let contraction = SdrData::retract(cyl.p0, cyl.i0, cyl.h0)?;
    let (inf, delta_inf) = perturb_sdr(&contraction, &delta_z)?;

    // The strengthened retraction survives the perturbation verbatim: its
    // side conditions annihilate J delta R on both sides.
    let big_pert = delta.perturbed();
    let z_pert = delta_z.perturbed();
    let r_hat = DmMorphism::new(z_pert.clone(), big_pert.clone(), rj.p.block_map().clone())?;
    let j_hat = DmMorphism::new(big_pert.clone(), z_pert, rj.iota.block_map().clone())?;

    let p_new = inf.p.compose(&j_hat);
    let iota_new = r_hat.compose(&inf.iota);
    let big = he.big();
    let mut h_new = BTreeMap::new();
    for &n in big.components().keys() {
        let b = &(&r_hat.component(big.next(n)) * &inf.h_component(n)) * &j_hat.component(n);
        if !b.is_zero() {
            h_new.insert(n, b);
        }
    }
    let small = he.small();
    let mut hp_new = BTreeMap::new();
    for &n in small.components().keys() {
        let b = &(&inf.p.component(small.next(n)) * &rj.h_component(n)) * &inf.iota.component(n);
        if !b.is_zero() {
            hp_new.insert(n, b);
        }
    }
    let out = SdrData::equivalence(p_new, iota_new, h_new, hp_new)?;
    Ok((out, delta_inf))
}

/// Moves a flag onto a new anchor. `he` holds, for every column j of the
/// flag, a strong retract from the column's anchor complex onto the
/// replacement column. The columnwise data is assembled into a retract of
/// the stratum-zero module, the higher strata are transferred as a flagged
/// perturbation (small by the strict flag drop), and the perturbed small
/// module is re-read as a flag. Returns the new flag and the retract
/// connecting the original flag's module to the new flag's module.
pub fn transfer_anchor(
    f: &FreeFlag,
    he: &BTreeMap<i64, ComplexSdr>,
) -> Result<(FreeFlag, SdrData)> {
    let cols = f.columns();
    if he.keys().cloned().collect::<Vec<_>>() != cols {
        return Err(Error::Precondition(
            "column equivalences must cover exactly the anchor columns".into(),
        ));
    }
    for &j in &cols {
        if he[&j].big != anchor_column(f, j) {
            return Err(Error::Precondition(format!(
                "equivalence at column {} does not start from the anchor column",
                j
            )));
        }
    }
    let ring = f.ring().clone();
    let modulus = f.modulus();
    let wrap = |n: i64| -> i64 {
        if modulus == 0 {
            n
        } else {
            n.rem_euclid(modulus)
        }
    };

    let mut base_strata = BTreeMap::new();
    if let Some(s0) = f.strata().get(&0) {
        base_strata.insert(0, s0.clone());
    }
    let f0 = FreeFlag::new(&ring, modulus, f.components().clone(), base_strata, f.shift())?;
    let big0 = flag_to_dm(&f0);
    let full = flag_to_dm(f);
    let mut dblocks = BTreeMap::new();
    for &n in full.components().keys() {
        let b = &full.block(n) - &big0.block(n);
        if !b.is_zero() {
            dblocks.insert(n, b);
        }
    }
    let delta = Perturbation::new(big0.clone(), dblocks)?;

    // Piece layout inside each class, matching flag_to_dm's ordering.
    let offsets = |comps: &BTreeMap<(i64, i64), GradedFreeModule>| {
        let mut off: BTreeMap<(i64, i64), (i64, usize)> = BTreeMap::new();
        let mut acc: BTreeMap<i64, usize> = BTreeMap::new();
        for (&(i, j), m) in comps {
            let n = wrap(i + j);
            let entry = acc.entry(n).or_insert(0);
            off.insert((i, j), (n, *entry));
            *entry += m.rank();
        }
        off
    };
    let big_off = offsets(f.components());

    let mut scomps: BTreeMap<(i64, i64), GradedFreeModule> = BTreeMap::new();
    let mut s0: BTreeMap<(i64, i64), RingMatrix> = BTreeMap::new();
    for (&j, sdr) in he {
        let g = &sdr.small;
        if let Some((lo, hi)) = g.support() {
            for i in lo..=hi {
                if g.rank(i) == 0 {
                    continue;
                }
                scomps.insert((i, j), GradedFreeModule::new(g.degrees(i)));
                let d = g.diff(i);
                if !d.is_zero() {
                    s0.insert((i, j), d);
                }
            }
        }
    }
    let mut sstrata = BTreeMap::new();
    if !s0.is_empty() {
        sstrata.insert(0, s0);
    }
    let fg = FreeFlag::new(&ring, modulus, scomps, sstrata, f.shift())?;
    let small0 = flag_to_dm(&fg);
    let small_off = offsets(fg.components());

    let zero_per_class = |rows: &dyn Fn(i64) -> usize, cols_of: &dyn Fn(i64) -> usize| {
        let mut out: BTreeMap<i64, RingMatrix> = BTreeMap::new();
        for &n in big0.components().keys() {
            out.insert(n, RingMatrix::zero(&ring, rows(n), cols_of(n)));
        }
        out
    };
    let mut p_blocks = zero_per_class(&|n| small0.rank(n), &|n| big0.rank(n));
    let mut i_blocks = zero_per_class(&|n| big0.rank(n), &|n| small0.rank(n));
    let mut h_blocks = zero_per_class(&|n| big0.rank(big0.next(n)), &|n| big0.rank(n));
    for (&(i, j), &(n, boff)) in &big_off {
        let sdr = &he[&j];
        if let Some(&(_, soff)) = small_off.get(&(i, j)) {
            paste(
                p_blocks.get_mut(&n).unwrap(),
                soff,
                boff,
                &sdr.p.component(i),
                false,
            );
            paste(
                i_blocks.get_mut(&n).unwrap(),
                boff,
                soff,
                &sdr.iota.component(i),
                false,
            );
        }
        if let Some(&(_, roff)) = big_off.get(&(i + 1, j)) {
            paste(
                h_blocks.get_mut(&n).unwrap(),
                roff,
                boff,
                &sdr.h_component(i),
                false,
            );
        }
    }
    let p0 = DmMorphism::new(big0.clone(), small0.clone(), p_blocks)?;
    let i0 = DmMorphism::new(small0.clone(), big0, i_blocks)?;
    let sdr0 = SdrData::retract(p0, i0, h_blocks)?;
    let (inf, delta_inf) = perturb_sdr(&sdr0, &delta)?;

    let mut filt: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for (&(i, j), m) in fg.components() {
        filt.entry(wrap(i + j))
            .or_default()
            .extend(std::iter::repeat(i).take(m.rank()));
    }
    let out_flag = dm_to_flag(&delta_inf.perturbed(), &filt)?;
    debug_assert!(flag_to_dm(&out_flag) == *inf.small());
    Ok((out_flag, inf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff_ring::{parse_poly, Field, MonomialOrder, Poly, PolyRing};
    use crate::dm_core::{dm_homology, dm_minimize, HomotopySquare};
    use crate::flags::flag_homology_via_anchor;
    use crate::homalg::minimize_complex;

    fn qring(n: usize) -> Arc<PolyRing> {
        PolyRing::new(Field::rationals(), n, MonomialOrder::Grevlex)
    }

    fn p(ring: &Arc<PolyRing>, s: &str) -> Poly {
        parse_poly(ring, s).unwrap()
    }

    fn mat(ring: &Arc<PolyRing>, rows: usize, cols: usize, entries: &[&str]) -> RingMatrix {
        assert_eq!(entries.len(), rows * cols);
        RingMatrix::from_fn(ring, rows, cols, |r, c| p(ring, entries[r * cols + c]))
    }

    fn entries(ring: &Arc<PolyRing>, rows: usize, cols: usize, e: &[(usize, usize, &str)]) -> RingMatrix {
        let mut m = RingMatrix::zero(ring, rows, cols);
        for &(r, c, s) in e {
            m.set(r, c, p(ring, s));
        }
        m
    }

    /// Contractible pair (v, u) with d(u) = v plus a retained generator z;
    /// the minimal model is the free module on z.
    fn three_model(ring: &Arc<PolyRing>) -> (DiffModule, DiffModule) {
        let mut comps = BTreeMap::new();
        comps.insert(0, GradedFreeModule::new(vec![0, 0, 0]));
        let mut blocks = BTreeMap::new();
        blocks.insert(0, entries(ring, 3, 3, &[(0, 1, "1")]));
        let big = DiffModule::new(ring, 1, comps, blocks, 0).unwrap();
        let mut comps = BTreeMap::new();
        comps.insert(0, GradedFreeModule::new(vec![0]));
        let small = DiffModule::new(ring, 1, comps, BTreeMap::new(), 0).unwrap();
        (big, small)
    }

    fn three_model_retract(ring: &Arc<PolyRing>) -> SdrData {
        let (big, small) = three_model(ring);
        let pm = DmMorphism::new(big.clone(), small.clone(), {
            let mut b = BTreeMap::new();
            b.insert(0, entries(ring, 1, 3, &[(0, 2, "1")]));
            b
        })
        .unwrap();
        let im = DmMorphism::new(small, big, {
            let mut b = BTreeMap::new();
            b.insert(0, entries(ring, 3, 1, &[(2, 0, "1")]));
            b
        })
        .unwrap();
        let mut h = BTreeMap::new();
        h.insert(0, entries(ring, 3, 3, &[(1, 0, "-1")]));
        SdrData::retract(pm, im, h).unwrap()
    }

    /// Degeneration-shaped module over k[x0, x1], modulus 1: a Koszul
    /// complex B, its negated copy G one flag step up joined to B by units,
    /// and a second Koszul complex H. Basis order: b0 w0 | b1 b2 w1 w2 g0 |
    /// b w g1 g2 | g (indices 0..11).
    fn degeneration_big(ring: &Arc<PolyRing>) -> DiffModule {
        let mut comps = BTreeMap::new();
        comps.insert(
            0,
            GradedFreeModule::new(vec![0, 0, 1, 1, 1, 1, 0, 2, 2, 1, 1, 2]),
        );
        let d = entries(
            ring,
            12,
            12,
            &[
                (0, 2, "x0"),
                (0, 3, "x1"),
                (1, 4, "x0"),
                (1, 5, "x1"),
                (0, 6, "1"),
                (2, 7, "-x1"),
                (3, 7, "x0"),
                (4, 8, "-x1"),
                (5, 8, "x0"),
                (2, 9, "1"),
                (6, 9, "-x0"),
                (3, 10, "1"),
                (6, 10, "-x1"),
                (7, 11, "1"),
                (9, 11, "x1"),
                (10, 11, "-x0"),
            ],
        );
        let mut blocks = BTreeMap::new();
        blocks.insert(0, d);
        DiffModule::new(ring, 1, comps, blocks, 0).unwrap()
    }

    fn degeneration_small(ring: &Arc<PolyRing>) -> DiffModule {
        let mut comps = BTreeMap::new();
        comps.insert(0, GradedFreeModule::new(vec![0, 1, 1, 2]));
        let mut blocks = BTreeMap::new();
        blocks.insert(
            0,
            entries(ring, 4, 4, &[(0, 1, "x0"), (0, 2, "x1"), (1, 3, "-x1"), (2, 3, "x0")]),
        );
        DiffModule::new(ring, 1, comps, blocks, 0).unwrap()
    }

    fn degeneration_retract(ring: &Arc<PolyRing>) -> SdrData {
        let big = degeneration_big(ring);
        let small = degeneration_small(ring);
        let pm = DmMorphism::new(big.clone(), small.clone(), {
            let mut b = BTreeMap::new();
            b.insert(
                0,
                entries(ring, 4, 12, &[(0, 1, "1"), (1, 4, "1"), (2, 5, "1"), (3, 8, "1")]),
            );
            b
        })
        .unwrap();
        let im = DmMorphism::new(small, big, {
            let mut b = BTreeMap::new();
            b.insert(
                0,
                entries(ring, 12, 4, &[(1, 0, "1"), (4, 1, "1"), (5, 2, "1"), (8, 3, "1")]),
            );
            b
        })
        .unwrap();
        let mut h = BTreeMap::new();
        h.insert(
            0,
            entries(
                ring,
                12,
                12,
                &[(6, 0, "-1"), (9, 2, "-1"), (10, 3, "-1"), (11, 7, "-1")],
            ),
        );
        SdrData::retract(pm, im, h).unwrap()
    }

    /// The transferred strata: a chain map piece alpha (flag drop one) and
    /// the drop-two pieces beta, gamma, chosen so the total squares to zero.
    fn degeneration_delta(ring: &Arc<PolyRing>, big: &DiffModule) -> Perturbation {
        let d = entries(
            ring,
            12,
            12,
            &[
                (0, 4, "x1"),
                (3, 8, "x1"),
                (1, 10, "x0"),
                (0, 10, "x0"),
                (4, 11, "x0"),
                (2, 11, "x0"),
                (3, 11, "-x0"),
            ],
        );
        let mut blocks = BTreeMap::new();
        blocks.insert(0, d);
        Perturbation::new(big.clone(), blocks).unwrap()
    }

    #[test]
    fn retract_constructor_checks_identities() {
        let ring = qring(1);
        let sdr = three_model_retract(&ring);
        assert!(sdr.is_strong());
        assert!(sdr.verify());

        // Breaking the homotopy identity is rejected.
        let bad = SdrData::retract(sdr.p.clone(), sdr.iota.clone(), {
            let mut h = BTreeMap::new();
            h.insert(0, entries(&ring, 3, 3, &[(1, 0, "1")]));
            h
        });
        assert!(bad.is_err());
    }

    #[test]
    fn side_conditions_are_computed() {
        let ring = qring(1);
        let sdr = three_model_retract(&ring);
        // Drift h by a commuting lambda: u -> z. The homotopy identity
        // survives but ph and h^2 fail while h iota still holds.
        let mut h = BTreeMap::new();
        h.insert(0, entries(&ring, 3, 3, &[(1, 0, "-1"), (2, 1, "1")]));
        let spoiled = SdrData::retract(sdr.p.clone(), sdr.iota.clone(), h).unwrap();
        assert_eq!(
            spoiled.side_conditions(),
            SideConditions {
                h_squared: false,
                h_iota: true,
                p_h: false
            }
        );
        assert!(!spoiled.is_strong());
        assert!(spoiled.verify());
    }

    #[test]
    fn make_strong_recovers_clean_homotopy() {
        let ring = qring(1);
        let clean = three_model_retract(&ring);
        let mut h = BTreeMap::new();
        h.insert(0, entries(&ring, 3, 3, &[(1, 0, "-1"), (2, 1, "1")]));
        let spoiled = SdrData::retract(clean.p.clone(), clean.iota.clone(), h).unwrap();
        let fixed = make_strong(&spoiled).unwrap();
        assert_eq!(fixed, clean);
        // Already-strong data passes through unchanged.
        assert_eq!(make_strong(&clean).unwrap(), clean);
    }

    #[test]
    fn make_strong_rejects_equivalences() {
        let ring = qring(1);
        let sdr = three_model_retract(&ring);
        let mut hp = BTreeMap::new();
        hp.insert(0, entries(&ring, 1, 1, &[(0, 0, "1")]));
        let he = SdrData::equivalence(sdr.p.clone(), sdr.iota.clone(), sdr.h.clone(), hp).unwrap();
        assert!(!he.is_retract());
        assert!(make_strong(&he).is_err());
    }

    #[test]
    fn perturbation_requires_square_zero() {
        let ring = qring(1);
        let (big, _) = three_model(&ring);
        // z -> u extends d to a map whose square sends z to v.
        let mut blocks = BTreeMap::new();
        blocks.insert(0, entries(&ring, 3, 3, &[(1, 2, "1")]));
        assert!(Perturbation::new(big.clone(), blocks).is_err());
        assert!(Perturbation::zero(&big).is_zero());
    }

    #[test]
    fn check_small_zero_flagged_and_idempotent() {
        let ring = qring(2);
        let sdr = degeneration_retract(&ring);
        assert_eq!(
            check_small(&Perturbation::zero(sdr.big()), &sdr),
            Smallness::Nilpotent(1)
        );
        let delta = degeneration_delta(&ring, sdr.big());
        assert_eq!(check_small(&delta, &sdr), Smallness::Nilpotent(3));

        // A contractible pair with delta = d: delta h is idempotent up to
        // sign, so no power vanishes.
        let ring1 = qring(1);
        let mut comps = BTreeMap::new();
        comps.insert(0, GradedFreeModule::new(vec![0, 0]));
        let mut blocks = BTreeMap::new();
        blocks.insert(0, entries(&ring1, 2, 2, &[(0, 1, "1")]));
        let big = DiffModule::new(&ring1, 1, comps, blocks.clone(), 0).unwrap();
        let zero = DiffModule::zero(&ring1, 1);
        let pm = DmMorphism::zero(&big, &zero).unwrap();
        let im = DmMorphism::zero(&zero, &big).unwrap();
        let mut h = BTreeMap::new();
        h.insert(0, entries(&ring1, 2, 2, &[(1, 0, "-1")]));
        let contraction = SdrData::retract(pm, im, h).unwrap();
        let delta = Perturbation::new(big, blocks).unwrap();
        assert_eq!(check_small(&delta, &contraction), Smallness::NotSmall);
    }

    #[test]
    fn perturb_sdr_zero_delta_is_identity() {
        let ring = qring(2);
        let sdr = degeneration_retract(&ring);
        let (out, dinf) = perturb_sdr(&sdr, &Perturbation::zero(sdr.big())).unwrap();
        assert_eq!(out, sdr);
        assert!(dinf.is_zero());
    }

    #[test]
    fn perturb_sdr_degeneration_series() {
        let ring = qring(2);
        let sdr = degeneration_retract(&ring);
        let delta = degeneration_delta(&ring, sdr.big());
        let (out, dinf) = perturb_sdr(&sdr, &delta).unwrap();
        assert!(out.is_strong());
        assert!(out.verify());

        // The transferred differential is the finite series
        // p delta (h delta)^t iota; here it collapses to one entry.
        let expected_delta = entries(&ring, 4, 4, &[(0, 3, "-x0*x1")]);
        assert_eq!(dinf.block(0), expected_delta);

        let expected_p = entries(
            &ring,
            4,
            12,
            &[
                (0, 1, "1"),
                (1, 4, "1"),
                (2, 5, "1"),
                (3, 8, "1"),
                (0, 3, "-x0"),
                (1, 7, "-x0"),
                (0, 7, "-x0^2"),
            ],
        );
        assert_eq!(out.p().component(0), expected_p);

        let expected_iota = entries(
            &ring,
            12,
            4,
            &[
                (1, 0, "1"),
                (4, 1, "1"),
                (5, 2, "1"),
                (8, 3, "1"),
                (6, 1, "-x1"),
                (10, 3, "-x1"),
                (6, 3, "x0*x1"),
            ],
        );
        assert_eq!(out.iota().component(0), expected_iota);

        let expected_h = entries(
            &ring,
            12,
            12,
            &[
                (6, 0, "-1"),
                (9, 2, "-1"),
                (10, 3, "-1"),
                (11, 7, "-1"),
                (6, 3, "x0"),
                (9, 7, "x0"),
                (10, 7, "-x0"),
                (6, 7, "x0^2"),
            ],
        );
        assert_eq!(out.h_component(0), expected_h);

        // Both perturbed modules stay graded and homology is preserved.
        assert!(out.big().is_graded());
        assert!(out.small().is_graded());
        let hb = dm_homology(out.big()).unwrap();
        let hs = dm_homology(out.small()).unwrap();
        assert_eq!(hb.total, hs.total);
    }

    #[test]
    fn perturb_sdr_strengthens_weak_input() {
        let ring = qring(2);
        let sdr = degeneration_retract(&ring);
        // Drift h by d sigma - sigma d for sigma: b0 -> g0. That
        // anticommutes with d, so the homotopy identity survives, but the
        // new h picks up a unit breaking h^2 = 0.
        let mut h = BTreeMap::new();
        let mut m = sdr.h_component(0);
        m.set(0, 0, p(&ring, "1"));
        m.set(6, 2, p(&ring, "-x0"));
        m.set(6, 3, p(&ring, "-x1"));
        m.set(6, 6, p(&ring, "-1"));
        h.insert(0, m);
        let weak = SdrData::retract(sdr.p.clone(), sdr.iota.clone(), h).unwrap();
        assert!(!weak.side_conditions().h_squared);
        let delta = degeneration_delta(&ring, weak.big());
        let (out, _) = perturb_sdr(&weak, &delta).unwrap();
        assert!(out.is_strong());
    }

    #[test]
    fn perturb_hequiv_zero_delta_returns_input_maps() {
        let ring = qring(1);
        let sdr = three_model_retract(&ring);
        let mut hp = BTreeMap::new();
        hp.insert(0, entries(&ring, 1, 1, &[(0, 0, "1")]));
        let he = SdrData::equivalence(sdr.p.clone(), sdr.iota.clone(), sdr.h.clone(), hp).unwrap();
        let (out, dinf) = perturb_hequiv(&he, &Perturbation::zero(he.big())).unwrap();
        assert!(dinf.is_zero());
        assert_eq!(out.p(), he.p());
        assert_eq!(out.iota(), he.iota());
        assert_eq!(out.h_component(0), he.h_component(0));
        assert!(!out.is_retract());
        assert!(out.verify());
    }

    #[test]
    fn perturb_hequiv_agrees_with_first_lemma() {
        let ring = qring(2);
        let sdr = degeneration_retract(&ring);
        let delta = degeneration_delta(&ring, sdr.big());
        let (out_sdr, dinf_sdr) = perturb_sdr(&sdr, &delta).unwrap();
        let (out_he, dinf_he) = perturb_hequiv(&sdr, &delta).unwrap();
        // The cylinder route reproduces the first lemma's perturbation of
        // the small module exactly, and in particular the homology of the
        // two perturbed small modules agrees.
        assert_eq!(dinf_he, dinf_sdr);
        let ha = dm_homology(&dinf_sdr.perturbed()).unwrap();
        let hb = dm_homology(&dinf_he.perturbed()).unwrap();
        assert_eq!(ha.total, hb.total);
        assert_eq!(out_he.p().target(), out_sdr.p().target());
        assert!(out_he.verify());
    }

    #[test]
    fn naturality_survives_transport() {
        let ring = qring(2);
        let sdr = degeneration_retract(&ring);
        let delta = degeneration_delta(&ring, sdr.big());
        let (out, _) = perturb_sdr(&sdr, &delta).unwrap();
        // Multiplication by x0 commutes with everything on the nose.
        let big = out.big().clone();
        let scale = DmMorphism::new(big.clone(), big.clone(), {
            let mut b = BTreeMap::new();
            b.insert(
                0,
                RingMatrix::identity(&ring, big.rank(0)).scale_poly(&p(&ring, "x0")),
            );
            b
        })
        .unwrap();
        let sq = HomotopySquare::new(
            scale.clone(),
            scale.clone(),
            DmMorphism::identity(&big),
            DmMorphism::identity(&big),
            BTreeMap::new(),
        )
        .unwrap();
        let eq = out.equiv();
        let transported = crate::dm_core::transport_square(&sq, &eq, &eq).unwrap();
        assert_eq!(
            transported.phi().component(0),
            &scale.component(0) * &out.iota().component(0)
        );
    }

    /// Two-column modulus-two flag: Koszul on two variables in column 0,
    /// shifted copy in column 1, with a drop-two unit stratum.
    fn wrapped_flag(ring: &Arc<PolyRing>) -> FreeFlag {
        let mut comps = BTreeMap::new();
        comps.insert((0, 0), GradedFreeModule::new(vec![0]));
        comps.insert((1, 0), GradedFreeModule::new(vec![1, 1]));
        comps.insert((2, 0), GradedFreeModule::new(vec![2]));
        comps.insert((0, 1), GradedFreeModule::new(vec![2]));
        comps.insert((1, 1), GradedFreeModule::new(vec![3]));
        let mut s0 = BTreeMap::new();
        s0.insert((1, 0), mat(ring, 1, 2, &["x0", "x1"]));
        s0.insert((2, 0), mat(ring, 2, 1, &["-x1", "x0"]));
        s0.insert((1, 1), mat(ring, 1, 1, &["x0"]));
        let mut s1 = BTreeMap::new();
        s1.insert((2, 0), mat(ring, 1, 1, &["1"]));
        let mut strata = BTreeMap::new();
        strata.insert(0, s0);
        strata.insert(1, s1);
        FreeFlag::new(ring, 2, comps, strata, 0).unwrap()
    }

    #[test]
    fn transfer_anchor_identity_returns_flag() {
        let ring = qring(2);
        let f = wrapped_flag(&ring);
        let mut he = BTreeMap::new();
        for j in f.columns() {
            he.insert(j, ComplexSdr::identity(&anchor_column(&f, j)));
        }
        let (out, inf) = transfer_anchor(&f, &he).unwrap();
        assert_eq!(out, f);
        assert!(inf.is_strong());
        assert_eq!(inf.big(), &flag_to_dm(&f));
    }

    /// The degeneration module as a flag: flag degree grows along B, H and
    /// the raised copy G, with the drop-two pieces in stratum 1.
    fn degeneration_flag(ring: &Arc<PolyRing>) -> FreeFlag {
        let mut comps = BTreeMap::new();
        comps.insert((0, 0), GradedFreeModule::new(vec![0, 0]));
        comps.insert((1, 0), GradedFreeModule::new(vec![1, 1, 1, 1, 0]));
        comps.insert((2, 0), GradedFreeModule::new(vec![2, 2, 1, 1]));
        comps.insert((3, 0), GradedFreeModule::new(vec![2]));
        let mut s0 = BTreeMap::new();
        s0.insert(
            (1, 0),
            mat(
                ring,
                2,
                5,
                &["x0", "x1", "x1", "0", "1", "0", "0", "x0", "x1", "0"],
            ),
        );
        s0.insert(
            (2, 0),
            mat(
                ring,
                5,
                4,
                &[
                    "-x1", "0", "1", "0", "x0", "x1", "0", "1", "0", "-x1", "0", "0", "0", "x0",
                    "0", "0", "0", "0", "-x0", "-x1",
                ],
            ),
        );
        s0.insert((3, 0), mat(ring, 4, 1, &["1", "0", "x1", "-x0"]));
        let mut s1 = BTreeMap::new();
        s1.insert((2, 0), mat(ring, 2, 4, &["0", "0", "0", "x0", "0", "0", "0", "x0"]));
        s1.insert((3, 0), mat(ring, 5, 1, &["x0", "-x0", "x0", "0", "0"]));
        let mut strata = BTreeMap::new();
        strata.insert(0, s0);
        strata.insert(1, s1);
        FreeFlag::new(ring, 1, comps, strata, 0).unwrap()
    }

    #[test]
    fn transfer_anchor_through_minimization() {
        let ring = qring(2);
        let f = degeneration_flag(&ring);
        let before = flag_homology_via_anchor(&f).unwrap();
        let mut he = BTreeMap::new();
        for j in f.columns() {
            let (_, sdr) = minimize_complex(&anchor_column(&f, j));
            he.insert(j, sdr);
        }
        let (out, inf) = transfer_anchor(&f, &he).unwrap();
        // The anchor shrinks onto the unit-free column; the higher strata
        // stay flagged (every stratum drops the flag degree by at least
        // two) and homology is untouched.
        assert_eq!(out.total_rank(), 4);
        assert_eq!(out.rank(0, 0), 1);
        assert_eq!(out.rank(1, 0), 2);
        assert_eq!(out.rank(2, 0), 1);
        assert!(out.strata().keys().all(|&t| t >= 0));
        assert!(out.strata().len() > 1);
        let after = flag_homology_via_anchor(&out).unwrap();
        assert_eq!(before, after);
        assert!(inf.is_strong());
        assert_eq!(inf.big(), &flag_to_dm(&f));
    }

    #[test]
    fn from_dm_sdr_wraps_minimization() {
        let ring = qring(2);
        let sdr = degeneration_retract(&ring);
        let delta = degeneration_delta(&ring, sdr.big());
        let (min, dm_sdr) = dm_minimize(&delta.perturbed()).unwrap();
        let wrapped = SdrData::from_dm_sdr(&dm_sdr);
        assert!(wrapped.is_strong());
        assert_eq!(wrapped.small(), &min);
    }
}
