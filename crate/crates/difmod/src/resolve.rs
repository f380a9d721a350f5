//! Resolutions of differential modules.
//!
//! The central object is a Cartan-Eilenberg style free flag resolution: per
//! congruence class j the cycles, boundaries and homology of the input are
//! resolved, two horseshoe steps glue the pieces, and the result is a flag
//! whose piece (i, j) splits as F^{B_j}_i + F^{H_j}_i + G^{B_{j-1}}_{i-d},
//! the last summand a copy of the previous class's boundary resolution
//! carrying the negated differential. Degenerating the contractible part of
//! that flag by homological perturbation leaves an anchored resolution whose
//! anchor columns resolve the homology; with minimal anchors the result is
//! quasiminimal. Conversely any anchored resolution embeds into a
//! Cartan-Eilenberg scaffold built out of its own strata, and the
//! degeneration of that scaffold restores the flag on the nose; this is the
//! retract identity `eta . iota_inf = id` that drives the comparison
//! theorems: morphisms lift to flag-preserving morphisms of the resolutions,
//! degeneration is functorial up to an explicit homotopy, and any morphism
//! between anchored resolutions is flag-preserving up to a homotopy that the
//! code returns and checks.
//!
//! Everything here is exact: each constructor re-verifies square-zero,
//! stratified commutation, and augmentation identities, so a sign error in
//! the assembly surfaces as an error, not as silent corruption.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::coeff_ring::PolyRing;
use crate::dm_core::{dm_homology, DiffModule, DmMorphism, HomotopySquare};
use crate::flags::{
    dm_to_flag, flag_to_dm, is_anchored_resolution, paste, FlagMorphism, FreeFlag,
};
use crate::groebner::{lift_matrix, syzygies};
use crate::homalg::{
    comparison_lift, free_resolution, horseshoe, infer_col_degrees, ChainComplex, ChainMap,
    GradedFreeModule, Resolution, ShortExact,
};
use crate::matrix::RingMatrix;
use crate::perturb::{perturb_sdr, Perturbation, SdrData};
use crate::{Error, Result};

fn wrap(modulus: i64, j: i64) -> i64 {
    j.rem_euclid(modulus)
}

fn top_level(c: &ChainComplex) -> i64 {
    c.support().map(|(_, hi)| hi).unwrap_or(-1)
}

/// Offset of each piece inside the folded component of its class, in the
/// member order the fold uses (ascending piece key).
fn fold_offsets(
    modulus: i64,
    components: &BTreeMap<(i64, i64), GradedFreeModule>,
) -> BTreeMap<(i64, i64), usize> {
    let mut totals: BTreeMap<i64, usize> = BTreeMap::new();
    let mut offsets = BTreeMap::new();
    for (&(i, j), m) in components {
        if m.rank() == 0 {
            continue;
        }
        let class = wrap(modulus, i + j);
        let t = totals.entry(class).or_insert(0);
        offsets.insert((i, j), *t);
        *t += m.rank();
    }
    offsets
}

/// Per-class scaffolding of a Cartan-Eilenberg resolution: resolutions of
/// the boundaries, the homology and the cycles of one congruence class,
/// plus the connecting data of the two horseshoe steps in the commuting
/// sign convention.
#[derive(Debug, Clone)]
pub(crate) struct ClassData {
    /// Resolution of B_j, presented on the basis of the component mapping
    /// onto it; ambient degrees carry the differential shift.
    fb: Resolution,
    /// Resolution of H_j, presented on the cycle generators.
    fh: Resolution,
    /// Resolution of Z_j with differential [[b, alpha], [0, t]]; the
    /// augmentation lands in cycle coordinates.
    fz: Resolution,
    /// Cycle generators of class j as columns in the ambient component.
    cycles: RingMatrix,
    /// Column relations of `cycles`.
    pres_z: RingMatrix,
    /// Boundary generators in cycle coordinates: cycles * embed_b is the
    /// differential out of the next class.
    embed_b: RingMatrix,
    /// Connecting maps of the second horseshoe step, already converted to
    /// commute with the differentials: copy level l maps to level l-1 of
    /// `fz` by gamma (into the boundary part) and beta (homology part).
    gamma: BTreeMap<i64, RingMatrix>,
    beta: BTreeMap<i64, RingMatrix>,
    /// Ambient preimages of the copy's level-zero generators.
    psi2: RingMatrix,
}

impl ClassData {
    fn alpha(&self, l: i64) -> RingMatrix {
        let b1 = self.fb.complex.rank(l - 1);
        let b0 = self.fb.complex.rank(l);
        let h0 = self.fh.complex.rank(l);
        self.fz.complex.diff(l).submatrix(0, b1, b0, b0 + h0)
    }

    fn gamma_at(&self, l: i64, copy_rank: usize) -> RingMatrix {
        self.gamma
            .get(&l)
            .cloned()
            .unwrap_or_else(|| RingMatrix::zero(self.fb.complex.ring(), self.fb.complex.rank(l - 1), copy_rank))
    }

    fn beta_at(&self, l: i64, copy_rank: usize) -> RingMatrix {
        self.beta
            .get(&l)
            .cloned()
            .unwrap_or_else(|| RingMatrix::zero(self.fh.complex.ring(), self.fh.complex.rank(l - 1), copy_rank))
    }
}

/// A Cartan-Eilenberg resolution: the assembled flag, its augmentation
/// onto the resolved module, and the per-class scaffolding.
#[derive(Debug, Clone)]
pub struct CeResolution {
    resolved: DiffModule,
    flag: FreeFlag,
    augmentation: DmMorphism,
    classes: BTreeMap<i64, ClassData>,
}

impl CeResolution {
    pub fn resolved(&self) -> &DiffModule {
        &self.resolved
    }

    pub fn flag(&self) -> &FreeFlag {
        &self.flag
    }

    /// The augmentation, a quasi-isomorphism from the fold of the flag.
    pub fn augmentation(&self) -> &DmMorphism {
        &self.augmentation
    }

    fn class(&self, j: i64) -> &ClassData {
        &self.classes[&wrap(self.flag.modulus(), j)]
    }

    pub fn boundary_resolution(&self, j: i64) -> &Resolution {
        &self.class(j).fb
    }

    pub fn homology_resolution(&self, j: i64) -> &Resolution {
        &self.class(j).fh
    }

    pub fn cycle_resolution(&self, j: i64) -> &Resolution {
        &self.class(j).fz
    }

    /// Connecting map F^{H_j}_l -> F^{B_j}_{l-1} of the first horseshoe
    /// step.
    pub fn alpha(&self, j: i64, l: i64) -> RingMatrix {
        self.class(j).alpha(l)
    }

    /// Connecting maps of the second horseshoe step out of copy level l,
    /// in the commuting convention.
    pub fn gamma(&self, j: i64, l: i64) -> RingMatrix {
        let c = self.class(j);
        let prev = self.class(j - 1);
        c.gamma_at(l, prev.fb.complex.rank(l))
    }

    pub fn beta(&self, j: i64, l: i64) -> RingMatrix {
        let c = self.class(j);
        let prev = self.class(j - 1);
        c.beta_at(l, prev.fb.complex.rank(l))
    }
}

/// Rank of the three summands of piece (i, j): boundary part, homology
/// part, copy part.
fn ce_piece_ranks(
    modulus: i64,
    classes: &BTreeMap<i64, ClassData>,
) -> BTreeMap<(i64, i64), (usize, usize, usize)> {
    let mut out = BTreeMap::new();
    for (&j, c) in classes {
        let prev = &classes[&wrap(modulus, j - 1)];
        let top = top_level(&c.fb.complex)
            .max(top_level(&c.fh.complex))
            .max(top_level(&prev.fb.complex) + modulus);
        for i in 0..=top {
            let b = c.fb.complex.rank(i);
            let h = c.fh.complex.rank(i);
            let g = if i >= modulus {
                prev.fb.complex.rank(i - modulus)
            } else {
                0
            };
            if b + h + g > 0 {
                out.insert((i, j), (b, h, g));
            }
        }
    }
    out
}

/// Piece (i, j) holds the level-i terms of the boundary and homology
/// resolutions and, from level d on, the copy of the previous class's
/// boundary resolution. Flag components store the untwisted degrees: the
/// fold of the flag is a shift-s module, so level i of a resolution enters
/// with its column degrees minus i*s, and the copy at level l with its
/// degrees minus (l+1)*s.
fn ce_components(
    modulus: i64,
    shift: i64,
    classes: &BTreeMap<i64, ClassData>,
    ranks: &BTreeMap<(i64, i64), (usize, usize, usize)>,
) -> BTreeMap<(i64, i64), GradedFreeModule> {
    let mut comps = BTreeMap::new();
    for (&(i, j), &(b, h, g)) in ranks {
        let c = &classes[&j];
        let mut degs = Vec::with_capacity(b + h + g);
        for u in c.fb.complex.degrees(i) {
            degs.push(u - i * shift);
        }
        for u in c.fh.complex.degrees(i) {
            degs.push(u - i * shift);
        }
        if g > 0 {
            let prev = &classes[&wrap(modulus, j - 1)];
            let l = i - modulus;
            for u in prev.fb.complex.degrees(l) {
                degs.push(u - (l + 1) * shift);
            }
        }
        comps.insert((i, j), GradedFreeModule::new(degs));
    }
    comps
}

fn put_block(
    strata: &mut BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>>,
    ring: &Arc<PolyRing>,
    ranks: &BTreeMap<(i64, i64), (usize, usize, usize)>,
    t: i64,
    src: (i64, i64),
    tgt: (i64, i64),
    r0: usize,
    c0: usize,
    m: &RingMatrix,
    negate: bool,
) {
    if m.rows() == 0 || m.cols() == 0 || m.is_zero() {
        return;
    }
    let total = |p: &(i64, i64)| ranks.get(p).map_or(0, |&(b, h, g)| b + h + g);
    let rows = total(&tgt);
    let cols = total(&src);
    let e = strata
        .entry(t)
        .or_default()
        .entry(src)
        .or_insert_with(|| RingMatrix::zero(ring, rows, cols));
    paste(e, r0, c0, m, negate);
}

/// The stratified differential of the scaffold. With `with_alpha` and
/// `with_theta` both false this is only the contractible part: the three
/// resolution differentials (negated on the copy) and the identity from
/// the copy onto the boundary part of the previous column.
fn ce_strata(
    ring: &Arc<PolyRing>,
    modulus: i64,
    classes: &BTreeMap<i64, ClassData>,
    ranks: &BTreeMap<(i64, i64), (usize, usize, usize)>,
    with_alpha: bool,
    with_theta: bool,
) -> BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>> {
    let mut strata = BTreeMap::new();
    for (&j, c) in classes {
        let jp = wrap(modulus, j - 1);
        let prev = &classes[&jp];
        let top_f = top_level(&c.fb.complex).max(top_level(&c.fh.complex));
        for i in 1..=top_f {
            let src = (i, j);
            let tgt = (i - 1, j);
            let (bs, _, _) = *ranks.get(&src).unwrap_or(&(0, 0, 0));
            let (bt, _, _) = *ranks.get(&tgt).unwrap_or(&(0, 0, 0));
            put_block(&mut strata, ring, ranks, 0, src, tgt, 0, 0, &c.fb.complex.diff(i), false);
            if with_alpha {
                put_block(&mut strata, ring, ranks, 0, src, tgt, 0, bs, &c.alpha(i), false);
            }
            put_block(&mut strata, ring, ranks, 0, src, tgt, bt, bs, &c.fh.complex.diff(i), false);
        }
        for l in 0..=top_level(&prev.fb.complex) {
            let i = l + modulus;
            let src = (i, j);
            let gs = prev.fb.complex.rank(l);
            if gs == 0 {
                continue;
            }
            let (bs, hs, _) = *ranks.get(&src).unwrap_or(&(0, 0, 0));
            if l >= 1 {
                let tgt = (i - 1, j);
                let (bt, ht, _) = *ranks.get(&tgt).unwrap_or(&(0, 0, 0));
                put_block(
                    &mut strata, ring, ranks, 0, src, tgt, bt + ht, bs + hs,
                    &prev.fb.complex.diff(l), true,
                );
            }
            // the copy maps identically onto the generators it duplicates
            put_block(
                &mut strata, ring, ranks, modulus - 1, src, (l, jp), 0, bs + hs,
                &RingMatrix::identity(ring, gs), false,
            );
            if with_theta && l >= 1 {
                let tgt = (l - 1, j);
                let (bt, _, _) = *ranks.get(&tgt).unwrap_or(&(0, 0, 0));
                put_block(&mut strata, ring, ranks, modulus, src, tgt, 0, bs + hs, &c.gamma_at(l, gs), false);
                put_block(&mut strata, ring, ranks, modulus, src, tgt, bt, bs + hs, &c.beta_at(l, gs), false);
            }
        }
    }
    strata
}

/// Assembles the flag and its augmentation from per-class data and
/// re-verifies both: square-zero through the flag constructor, the chain
/// condition through the morphism constructor.
fn assemble_ce(d: &DiffModule, classes: &BTreeMap<i64, ClassData>) -> Result<(FreeFlag, DmMorphism)> {
    let ring = d.ring();
    let dd = d.modulus();
    let s = d.shift();
    let ranks = ce_piece_ranks(dd, classes);
    let comps = ce_components(dd, s, classes, &ranks);
    let strata = ce_strata(ring, dd, classes, &ranks, true, true);
    let flag = FreeFlag::new(ring, dd, comps, strata, s)?;
    let cedm = flag_to_dm(&flag);
    let offsets = fold_offsets(dd, flag.components());
    let mut blocks = BTreeMap::new();
    for j in 0..dd {
        let cols = cedm.rank(j);
        if cols == 0 {
            continue;
        }
        let mut m = RingMatrix::zero(ring, d.rank(j), cols);
        let c = &classes[&j];
        if let Some(&o) = offsets.get(&(0, j)) {
            let a = &c.cycles * &c.fz.augmentation;
            paste(&mut m, 0, o, &a, false);
        }
        if let Some(&o) = offsets.get(&(dd, j)) {
            let (b, h, g) = ranks[&(dd, j)];
            if g > 0 {
                paste(&mut m, 0, o + b + h, &c.psi2, false);
            }
        }
        if !m.is_zero() {
            blocks.insert(j, m);
        }
    }
    let augmentation = DmMorphism::new(cedm, d.clone(), blocks)?;
    Ok((flag, augmentation))
}

fn finish_ce(d: &DiffModule, classes: BTreeMap<i64, ClassData>) -> Result<CeResolution> {
    let (flag, augmentation) = assemble_ce(d, &classes)?;
    Ok(CeResolution {
        resolved: d.clone(),
        flag,
        augmentation,
        classes,
    })
}

fn default_cap(d: &DiffModule) -> usize {
    d.ring().nvars + 4
}

/// The same resolution with every degree label moved by a constant;
/// resolves the twisted module.
fn retwist(res: &Resolution, by: i64) -> Result<Resolution> {
    let ring = res.complex.ring();
    let mut modules = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    if let Some((lo, hi)) = res.complex.support() {
        for l in lo..=hi {
            let degs: Vec<i64> = res.complex.degrees(l).into_iter().map(|u| u + by).collect();
            modules.insert(l, GradedFreeModule::new(degs));
            if l > lo {
                let d = res.complex.diff(l);
                if !d.is_zero() {
                    diffs.insert(l, d);
                }
            }
        }
    }
    Ok(Resolution {
        complex: ChainComplex::new(ring, modules, diffs)?,
        augmentation: res.augmentation.clone(),
        ambient_degrees: res.ambient_degrees.iter().map(|u| u + by).collect(),
        presentation: res.presentation.clone(),
    })
}

fn cycles_of(hom: &crate::dm_core::DmHomology, d: &DiffModule, j: i64) -> RingMatrix {
    hom.pieces
        .get(&j)
        .map(|p| p.cycles.clone())
        .unwrap_or_else(|| RingMatrix::zero(d.ring(), d.rank(j), 0))
}

fn hpres_of(hom: &crate::dm_core::DmHomology, d: &DiffModule, j: i64) -> RingMatrix {
    hom.pieces
        .get(&j)
        .map(|p| p.presentation.clone())
        .unwrap_or_else(|| RingMatrix::zero(d.ring(), 0, 0))
}

/// Cartan-Eilenberg resolution with explicit minimization and length-cap
/// choices for the two rows of resolutions.
pub fn ce_resolution_with(d: &DiffModule, minimize: bool, cap: usize) -> Result<CeResolution> {
    if d.modulus() < 1 {
        return Err(Error::Precondition(
            "resolutions of differential modules need a positive modulus; fold first".into(),
        ));
    }
    let ring = d.ring();
    let s = d.shift();
    let dd = d.modulus();
    let hom = dm_homology(d)?;

    struct Pre {
        fb: Resolution,
        fh: Resolution,
        fz: Resolution,
        cycles: RingMatrix,
        pres_z: RingMatrix,
        embed_b: RingMatrix,
    }
    let mut pre: BTreeMap<i64, Pre> = BTreeMap::new();
    for j in 0..dd {
        let jn = d.next(j);
        let cyc = cycles_of(&hom, d, j);
        let zdeg = infer_col_degrees(&cyc, &d.degrees(j)).ok_or_else(|| {
            Error::Shape(format!(
                "cycle generators of class {} are inhomogeneous; this construction needs graded input",
                j
            ))
        })?;
        let pres_h = hpres_of(&hom, d, j);
        let pres_b = cycles_of(&hom, d, jn);
        let bdeg: Vec<i64> = d.degrees(jn).into_iter().map(|u| u + s).collect();
        let fb = free_resolution(&pres_b, &bdeg, minimize, cap)?;
        let fh = free_resolution(&pres_h, &zdeg, minimize, cap)?;
        let pres_z = syzygies(&cyc)?;
        let embed_b = lift_matrix(&cyc, &d.block(jn))?;
        let ses = ShortExact {
            pres_a: pres_b,
            pres_b: pres_z.clone(),
            pres_c: pres_h,
            alpha: embed_b.clone(),
            beta: RingMatrix::identity(ring, cyc.cols()),
        };
        let fz = horseshoe(&ses, &fb, &fh)?;
        pre.insert(
            j,
            Pre {
                fb,
                fh,
                fz,
                cycles: cyc,
                pres_z,
                embed_b,
            },
        );
    }

    // second horseshoe step: 0 -> Z_j -> D_j -> B_{j-1} -> 0 resolves the
    // component itself; its connecting data, reversed in sign on the odd
    // levels, commutes with the differentials and feeds the copy strata.
    let mut extra: BTreeMap<i64, (BTreeMap<i64, RingMatrix>, BTreeMap<i64, RingMatrix>, RingMatrix)> =
        BTreeMap::new();
    for j in 0..dd {
        let jp = d.prev(j);
        let pj = &pre[&j];
        let pp = &pre[&jp];
        let ses = ShortExact {
            pres_a: pj.pres_z.clone(),
            pres_b: RingMatrix::zero(ring, d.rank(j), 0),
            pres_c: pj.cycles.clone(),
            alpha: pj.cycles.clone(),
            beta: RingMatrix::identity(ring, d.rank(j)),
        };
        // the quotient map onto the boundaries lowers degree by the
        // shift, so the copy resolution enters the horseshoe retwisted
        let fd = horseshoe(&ses, &pj.fz, &retwist(&pp.fb, -s)?)?;
        let mut gamma = BTreeMap::new();
        let mut beta = BTreeMap::new();
        for l in 1..=top_level(&pp.fb.complex) {
            let gc = pp.fb.complex.rank(l);
            if gc == 0 {
                continue;
            }
            let dl = fd.complex.diff(l);
            let zr = pj.fz.complex.rank(l - 1);
            let zc = pj.fz.complex.rank(l);
            let theta = dl.submatrix(0, zr, zc, zc + gc);
            let theta = if l.rem_euclid(2) == 1 { -&theta } else { theta };
            let bt = pj.fb.complex.rank(l - 1);
            let g = theta.submatrix(0, bt, 0, gc);
            let b = theta.submatrix(bt, zr, 0, gc);
            if !g.is_zero() {
                gamma.insert(l, g);
            }
            if !b.is_zero() {
                beta.insert(l, b);
            }
        }
        let z0 = pj.fz.complex.rank(0);
        let g0 = pp.fb.complex.rank(0);
        let psi2 = fd.augmentation.submatrix(0, d.rank(j), z0, z0 + g0);
        extra.insert(j, (gamma, beta, psi2));
    }

    let mut classes = BTreeMap::new();
    for (j, p) in pre {
        let (gamma, beta, psi2) = extra.remove(&j).unwrap();
        classes.insert(
            j,
            ClassData {
                fb: p.fb,
                fh: p.fh,
                fz: p.fz,
                cycles: p.cycles,
                pres_z: p.pres_z,
                embed_b: p.embed_b,
                gamma,
                beta,
                psi2,
            },
        );
    }
    finish_ce(d, classes)
}

/// Cartan-Eilenberg resolution of a differential module.
pub fn ce_resolution(d: &DiffModule) -> Result<CeResolution> {
    ce_resolution_with(d, false, default_cap(d))
}

/// An anchored resolution produced by degeneration, with the
/// Cartan-Eilenberg resolution it came from, the infinitesimal retract of
/// the degeneration, and the induced augmentation.
#[derive(Debug, Clone)]
pub struct AnchoredResolution {
    flag: FreeFlag,
    ce: CeResolution,
    sdr_from_ce: SdrData,
    augmentation: DmMorphism,
}

impl AnchoredResolution {
    pub fn flag(&self) -> &FreeFlag {
        &self.flag
    }

    pub fn ce(&self) -> &CeResolution {
        &self.ce
    }

    /// Retract from the fold of the Cartan-Eilenberg flag onto the fold of
    /// the anchored flag.
    pub fn sdr_from_ce(&self) -> &SdrData {
        &self.sdr_from_ce
    }

    /// Augmentation of the anchored flag, the composite of the
    /// Cartan-Eilenberg augmentation with the inclusion of the retract.
    pub fn augmentation(&self) -> &DmMorphism {
        &self.augmentation
    }

    pub fn resolved(&self) -> &DiffModule {
        self.ce.resolved()
    }

    /// The resolution of H_j that became anchor column j.
    pub fn anchor_resolution(&self, j: i64) -> &Resolution {
        self.ce.homology_resolution(j)
    }
}

/// Cancels the contractible part of a Cartan-Eilenberg flag: the boundary
/// parts and their copies carry an evident strong retract onto the
/// homology parts, the remaining strata are a flagged perturbation, and
/// the perturbed small module is re-read as a flag.
fn degenerate_core(ce: &CeResolution) -> Result<(SdrData, FreeFlag)> {
    let flag = &ce.flag;
    let ring = flag.ring();
    let dd = flag.modulus();
    let s = flag.shift();
    let ranks = ce_piece_ranks(dd, &ce.classes);

    let contractible = ce_strata(ring, dd, &ce.classes, &ranks, false, false);
    let cflag = FreeFlag::new(ring, dd, flag.components().clone(), contractible, s)?;
    let big0 = flag_to_dm(&cflag);
    let big = ce.augmentation.source();

    let mut delta = BTreeMap::new();
    for j in 0..dd {
        let m = &big.block(j) - &big0.block(j);
        if !m.is_zero() {
            delta.insert(j, m);
        }
    }
    let pert = Perturbation::new(big0.clone(), delta)?;

    // small side: the homology parts with their own differential
    let mut comps_small = BTreeMap::new();
    let mut s0_small = BTreeMap::new();
    for (&j, c) in &ce.classes {
        for l in 0..=top_level(&c.fh.complex) {
            let r = c.fh.complex.rank(l);
            if r == 0 {
                continue;
            }
            let degs: Vec<i64> = c.fh.complex.degrees(l).into_iter().map(|u| u - l * s).collect();
            comps_small.insert((l, j), GradedFreeModule::new(degs));
            if l >= 1 {
                let b = c.fh.complex.diff(l);
                if !b.is_zero() {
                    s0_small.insert((l, j), b);
                }
            }
        }
    }
    let mut strata_small = BTreeMap::new();
    if !s0_small.is_empty() {
        strata_small.insert(0, s0_small);
    }
    let sflag = FreeFlag::new(ring, dd, comps_small, strata_small, s)?;
    let small0 = flag_to_dm(&sflag);

    let offs_big = fold_offsets(dd, flag.components());
    let offs_small = fold_offsets(dd, sflag.components());
    let mut p_blocks: BTreeMap<i64, RingMatrix> = BTreeMap::new();
    let mut i_blocks: BTreeMap<i64, RingMatrix> = BTreeMap::new();
    let mut h_blocks: BTreeMap<i64, RingMatrix> = BTreeMap::new();
    for (&(i, j), &(b, h, _)) in &ranks {
        let n = wrap(dd, i + j);
        if h > 0 {
            let po = offs_small[&(i, j)];
            let bo = offs_big[&(i, j)];
            let pm = p_blocks
                .entry(n)
                .or_insert_with(|| RingMatrix::zero(ring, small0.rank(n), big0.rank(n)));
            paste(pm, po, bo + b, &RingMatrix::identity(ring, h), false);
            let im = i_blocks
                .entry(n)
                .or_insert_with(|| RingMatrix::zero(ring, big0.rank(n), small0.rank(n)));
            paste(im, bo + b, po, &RingMatrix::identity(ring, h), false);
        }
        if b > 0 {
            // the homotopy sends each boundary generator to its copy
            let tgt = (i + dd, wrap(dd, j + 1));
            let to = offs_big[&tgt];
            let (tb, th, tg) = ranks[&tgt];
            debug_assert_eq!(tg, b);
            let _ = tg;
            let nn = wrap(dd, n + 1);
            let hm = h_blocks
                .entry(n)
                .or_insert_with(|| RingMatrix::zero(ring, big0.rank(nn), big0.rank(n)));
            paste(hm, to + tb + th, offs_big[&(i, j)], &RingMatrix::identity(ring, b), true);
        }
    }
    let p = DmMorphism::new(big0.clone(), small0.clone(), p_blocks)?;
    let iota = DmMorphism::new(small0, big0, i_blocks)?;
    let sdr0 = SdrData::retract(p, iota, h_blocks)?;
    debug_assert!(sdr0.is_strong());

    let (inf, _) = perturb_sdr(&sdr0, &pert)?;

    let mut filtration: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for (&(l, j), m) in sflag.components() {
        let n = wrap(dd, l + j);
        filtration
            .entry(n)
            .or_default()
            .extend(std::iter::repeat(l).take(m.rank()));
    }
    let f_inf = dm_to_flag(inf.small(), &filtration)?;
    debug_assert_eq!(&flag_to_dm(&f_inf), inf.small());
    Ok((inf, f_inf))
}

/// Degeneration onto homology with explicit choices: resolves, builds the
/// Cartan-Eilenberg flag, cancels its contractible part.
pub fn degenerate_to_homology_with(d: &DiffModule, minimize: bool, cap: usize) -> Result<AnchoredResolution> {
    let ce = ce_resolution_with(d, minimize, cap)?;
    let (sdr, flag) = degenerate_core(&ce)?;
    let augmentation = ce.augmentation.compose(sdr.iota());
    if !is_anchored_resolution(&flag) {
        return Err(Error::Precondition(
            "degeneration produced a flag whose anchor is not a resolution".into(),
        ));
    }
    Ok(AnchoredResolution {
        flag,
        ce,
        sdr_from_ce: sdr,
        augmentation,
    })
}

/// Anchored resolution of a differential module by degeneration of a
/// Cartan-Eilenberg resolution.
pub fn degenerate_to_homology(d: &DiffModule) -> Result<AnchoredResolution> {
    degenerate_to_homology_with(d, false, default_cap(d))
}

/// Anchored resolution with minimal anchor columns. Over a graded input
/// the anchor then has no constant entries, and any two runs differ by a
/// flag-preserving isomorphism.
pub fn quasiminimal(d: &DiffModule) -> Result<AnchoredResolution> {
    let out = degenerate_to_homology_with(d, true, default_cap(d))?;
    debug_assert!(!anchor_has_constant(out.flag()));
    Ok(out)
}

fn anchor_has_constant(f: &FreeFlag) -> bool {
    if let Some(fam) = f.strata().get(&0) {
        for m in fam.values() {
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    if m.get(r, c).terms().iter().any(|(mono, _)| mono.iter().all(|&e| e == 0)) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Reads a morphism between folds of two flags back into stratified form.
/// Errors when a block raises the flag level or lands in the wrong column,
/// i.e. when the morphism is not flag-preserving.
pub fn flag_morphism_from_dm(phi: &DmMorphism, f: &FreeFlag, fp: &FreeFlag) -> Result<FlagMorphism> {
    let dd = f.modulus();
    if fp.modulus() != dd {
        return Err(Error::ModulusMismatch(format!("{} vs {}", dd, fp.modulus())));
    }
    if phi.source() != &flag_to_dm(f) || phi.target() != &flag_to_dm(fp) {
        return Err(Error::Precondition(
            "morphism endpoints are not the folds of the given flags".into(),
        ));
    }
    let offs_a = fold_offsets(dd, f.components());
    let offs_b = fold_offsets(dd, fp.components());
    let mut strata: BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>> = BTreeMap::new();
    for (&(i, j), m) in f.components() {
        let n = wrap(dd, i + j);
        let block = phi.component(n);
        let co = offs_a[&(i, j)];
        for (&(ip, jp), mp) in fp.components() {
            if wrap(dd, ip + jp) != n {
                continue;
            }
            let ro = offs_b[&(ip, jp)];
            let sub = block.submatrix(ro, ro + mp.rank(), co, co + m.rank());
            if sub.is_zero() {
                continue;
            }
            let t = i - ip;
            if t < 0 || wrap(dd, j + t) != jp {
                return Err(Error::Precondition(format!(
                    "morphism is not flag-preserving: piece ({}, {}) meets ({}, {})",
                    i, j, ip, jp
                )));
            }
            strata.entry(t).or_default().insert((i, j), sub);
        }
    }
    FlagMorphism::new(f.clone(), fp.clone(), strata)
}

/// Lifts a morphism of differential modules to a flag-preserving morphism
/// of Cartan-Eilenberg resolutions commuting with the augmentations
/// exactly. The lift is block triangular: comparison lifts on the
/// boundary and homology resolutions, a correction between them solved
/// level by level, and a correction out of the copy solved the same way.
pub fn ce_lift(phi: &DmMorphism, g: &CeResolution, gp: &CeResolution) -> Result<FlagMorphism> {
    if phi.source() != g.resolved() || phi.target() != gp.resolved() {
        return Err(Error::Precondition(
            "morphism endpoints do not match the resolved modules".into(),
        ));
    }
    let out = ce_lift_inner(phi, g, gp);
    match out {
        Err(Error::NotInImage) => Err(Error::Precondition(
            "lift failure: corrupted resolution data".into(),
        )),
        other => other,
    }
}

struct ClassLift {
    nu: ChainMap,
    psi: ChainMap,
    s: BTreeMap<i64, RingMatrix>,
    sp: BTreeMap<i64, RingMatrix>,
    hb: BTreeMap<i64, RingMatrix>,
}

impl ClassLift {
    fn s_at(&self, ring: &Arc<PolyRing>, gp_c: &ClassData, g_c: &ClassData, l: i64) -> RingMatrix {
        self.s
            .get(&l)
            .cloned()
            .unwrap_or_else(|| RingMatrix::zero(ring, gp_c.fb.complex.rank(l), g_c.fh.complex.rank(l)))
    }
}

fn ce_lift_inner(phi: &DmMorphism, g: &CeResolution, gp: &CeResolution) -> Result<FlagMorphism> {
    let ring = g.flag.ring();
    let dd = g.flag.modulus();
    let mut lifts: BTreeMap<i64, ClassLift> = BTreeMap::new();

    for j in 0..dd {
        let c = &g.classes[&j];
        let cp = &gp.classes[&j];
        let jn = wrap(dd, j + 1);
        let nu = comparison_lift(&phi.component(jn), &c.fb, &cp.fb)?;

        // the morphism on cycle coordinates, split into a homology part
        let phc = &phi.component(j) * &c.cycles;
        let glued = RingMatrix::hstack(&[&cp.cycles, &gp.resolved.block(jn)]);
        let x = lift_matrix(&glued, &phc)?;
        let zp = cp.cycles.cols();
        let f_h = x.submatrix(0, zp, 0, x.cols());
        let psi = comparison_lift(&f_h, &c.fh, &cp.fh)?;
        let zphi = lift_matrix(&cp.cycles, &phc)?;

        // correction S: FH_l -> FB'_l, fixed at level zero against the
        // cycle augmentations, then propagated up the resolutions
        let b0 = c.fb.complex.rank(0);
        let h0 = c.fh.complex.rank(0);
        let w = c.fz.augmentation.submatrix(0, c.cycles.cols(), b0, b0 + h0);
        let bp0 = cp.fb.complex.rank(0);
        let hp0 = cp.fh.complex.rank(0);
        let wp = cp.fz.augmentation.submatrix(0, zp, bp0, bp0 + hp0);
        let ebp = &cp.embed_b * &cp.fb.augmentation;
        let rhs0 = &(&zphi * &w) - &(&wp * &psi.component(0));
        let sol = lift_matrix(&RingMatrix::hstack(&[&ebp, &cp.pres_z]), &rhs0)?;
        let s0 = sol.submatrix(0, bp0, 0, sol.cols());
        let mut s_map = BTreeMap::new();
        if !s0.is_zero() {
            s_map.insert(0, s0.clone());
        }
        let mut s_prev = s0;
        for l in 1..=top_level(&c.fh.complex) {
            let na = &nu.component(l - 1) * &c.alpha(l);
            let ap = &cp.alpha(l) * &psi.component(l);
            let rhs = &(&na - &ap) + &(&s_prev * &c.fh.complex.diff(l));
            let bpl = cp.fb.complex.rank(l);
            let s_l = if bpl == 0 {
                if !rhs.is_zero() {
                    return Err(Error::NotInImage);
                }
                RingMatrix::zero(ring, 0, c.fh.complex.rank(l))
            } else {
                lift_matrix(&cp.fb.complex.diff(l), &rhs)?
            };
            if !s_l.is_zero() {
                s_map.insert(l, s_l.clone());
            }
            s_prev = s_l;
        }

        lifts.insert(
            j,
            ClassLift {
                nu,
                psi,
                s: s_map,
                sp: BTreeMap::new(),
                hb: BTreeMap::new(),
            },
        );
    }

    // correction P out of the copy: fixed at copy level zero against the
    // ambient preimages, then propagated; its rows split over FZ' into a
    // boundary part and a homology part
    let mut copy_corrections: BTreeMap<i64, (BTreeMap<i64, RingMatrix>, BTreeMap<i64, RingMatrix>)> =
        BTreeMap::new();
    for j in 0..dd {
        let jp = wrap(dd, j - 1);
        let c = &g.classes[&j];
        let cp = &gp.classes[&j];
        let copy = &g.classes[&jp].fb;
        let copy_p = &gp.classes[&jp].fb;
        let nu_prev = &lifts[&jp].nu;
        let lift_j = &lifts[&j];

        let x0 = &(&phi.component(j) * &c.psi2) - &(&cp.psi2 * &nu_prev.component(0));
        let y = lift_matrix(&cp.cycles, &x0)?;
        let sol = lift_matrix(&RingMatrix::hstack(&[&cp.fz.augmentation, &cp.pres_z]), &y)?;
        let zp0 = cp.fz.complex.rank(0);
        let p0 = sol.submatrix(0, zp0, 0, sol.cols());
        let bp0 = cp.fb.complex.rank(0);

        let mut sp = BTreeMap::new();
        let mut hb = BTreeMap::new();
        let split = |m: &RingMatrix, l: i64, sp: &mut BTreeMap<i64, RingMatrix>, hb: &mut BTreeMap<i64, RingMatrix>, bpl: usize| {
            let top = m.submatrix(0, bpl, 0, m.cols());
            let bot = m.submatrix(bpl, m.rows(), 0, m.cols());
            if !top.is_zero() {
                sp.insert(l, top);
            }
            if !bot.is_zero() {
                hb.insert(l, bot);
            }
        };
        split(&p0, 0, &mut sp, &mut hb, bp0);
        let mut p_prev = p0;
        for l in 1..=top_level(&copy.complex) {
            let gc = copy.complex.rank(l);
            if gc == 0 {
                continue;
            }
            let gam = c.gamma_at(l, gc);
            let bet = c.beta_at(l, gc);
            let top = &(&lift_j.nu.component(l - 1) * &gam)
                + &(&lift_j.s_at(ring, cp, c, l - 1) * &bet);
            let bot = &lift_j.psi.component(l - 1) * &bet;
            let xi_th = RingMatrix::vstack(&[&top, &bot]);
            let gcp = copy_p.complex.rank(l);
            let thp = RingMatrix::vstack(&[&cp.gamma_at(l, gcp), &cp.beta_at(l, gcp)]);
            let th_nu = &thp * &nu_prev.component(l);
            let rhs = &(&xi_th - &th_nu) - &(&p_prev * &copy.complex.diff(l));
            let zpl = cp.fz.complex.rank(l);
            let p_l = if zpl == 0 {
                if !rhs.is_zero() {
                    return Err(Error::NotInImage);
                }
                RingMatrix::zero(ring, 0, gc)
            } else {
                lift_matrix(&cp.fz.complex.diff(l), &rhs)?
            };
            split(&p_l, l, &mut sp, &mut hb, cp.fb.complex.rank(l));
            p_prev = p_l;
        }
        copy_corrections.insert(j, (sp, hb));
    }
    for (j, (sp, hb)) in copy_corrections {
        let e = lifts.get_mut(&j).unwrap();
        e.sp = sp;
        e.hb = hb;
    }

    // assemble the strata
    let ranks_a = ce_piece_ranks(dd, &g.classes);
    let ranks_b = ce_piece_ranks(dd, &gp.classes);
    let mut strata: BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>> = BTreeMap::new();
    for (&(i, j), &(b, h, gg)) in &ranks_a {
        let jp = wrap(dd, j - 1);
        let lift = &lifts[&j];
        let (tb, _th, tg) = *ranks_b.get(&(i, j)).unwrap_or(&(0, 0, 0));
        let rows: usize = ranks_b.get(&(i, j)).map_or(0, |&(x, y, z)| x + y + z);
        let cols = b + h + gg;
        if rows > 0 {
            let mut m = RingMatrix::zero(ring, rows, cols);
            paste(&mut m, 0, 0, &lift.nu.component(i), false);
            if let Some(s_i) = lift.s.get(&i) {
                paste(&mut m, 0, b, s_i, false);
            }
            paste(&mut m, tb, b, &lift.psi.component(i), false);
            if gg > 0 && tg > 0 {
                let l = i - dd;
                paste(&mut m, rows - tg, b + h, &lifts[&jp].nu.component(l), false);
            }
            if !m.is_zero() {
                strata.entry(0).or_default().insert((i, j), m);
            }
        }
        if gg > 0 {
            let l = i - dd;
            let trows: usize = ranks_b.get(&(l, j)).map_or(0, |&(x, y, z)| x + y + z);
            if trows == 0 {
                continue;
            }
            let (ttb, _, _) = *ranks_b.get(&(l, j)).unwrap_or(&(0, 0, 0));
            let mut m = RingMatrix::zero(ring, trows, cols);
            if let Some(s) = lift.sp.get(&l) {
                paste(&mut m, 0, b + h, s, false);
            }
            if let Some(hbl) = lift.hb.get(&l) {
                paste(&mut m, ttb, b + h, hbl, false);
            }
            if !m.is_zero() {
                strata.entry(dd).or_default().insert((i, j), m);
            }
        }
    }
    let lifted = FlagMorphism::new(g.flag.clone(), gp.flag.clone(), strata)?;

    // exact compatibility with the augmentations
    let lifted_dm = lifted.as_dm_morphism();
    let left = gp.augmentation.compose(&lifted_dm);
    let right = phi.compose(&g.augmentation);
    for n in 0..dd {
        if left.component(n) != right.component(n) {
            return Err(Error::Precondition(
                "lift failure: the lift does not commute with the augmentations".into(),
            ));
        }
    }
    Ok(lifted)
}

/// Functorial degeneration: quasiminimal resolutions of both ends of a
/// morphism, a flag-preserving lift between them, and the homotopy making
/// the square with the augmentations commute.
pub fn functorial_degeneration(
    phi: &DmMorphism,
) -> Result<(AnchoredResolution, AnchoredResolution, FlagMorphism, HomotopySquare)> {
    let a = quasiminimal(phi.source())?;
    let b = quasiminimal(phi.target())?;
    let lifted = ce_lift(phi, &a.ce, &b.ce)?;
    let m1 = lifted.as_dm_morphism().compose(a.sdr_from_ce.iota());
    let tilde = b.sdr_from_ce.p().compose(&m1);
    let flagged = flag_morphism_from_dm(&tilde, &a.flag, &b.flag)?;
    let dd = a.flag.modulus();
    let mut tau = BTreeMap::new();
    for n in 0..dd {
        let nn = wrap(dd, n + 1);
        let t = &(&b.ce.augmentation.component(nn) * &b.sdr_from_ce.h_component(n))
            * &m1.component(n);
        if !t.is_zero() {
            tau.insert(n, t);
        }
    }
    let square = HomotopySquare::new(
        a.augmentation.clone(),
        b.augmentation.clone(),
        tilde,
        phi.clone(),
        tau,
    )?;
    Ok((a, b, flagged, square))
}

/// Rebuilds a Cartan-Eilenberg resolution around an anchored flag out of
/// the flag's own strata, and degenerates it back. The returned retract
/// restores the flag exactly, and the identity witness is the composite
/// augmentation after inclusion, verified to be the identity.
pub fn anchored_as_retract(f: &FreeFlag) -> Result<(CeResolution, SdrData, DmMorphism)> {
    if !is_anchored_resolution(f) {
        return Err(Error::Precondition(
            "input flag is not an anchored resolution".into(),
        ));
    }
    let d = flag_to_dm(f);
    let ring = f.ring();
    let dd = f.modulus();
    let s = f.shift();
    let graded = d.is_graded();
    let hom = dm_homology(&d)?;
    let offs = fold_offsets(dd, f.components());
    let mk = |modules: BTreeMap<i64, GradedFreeModule>, diffs: BTreeMap<i64, RingMatrix>| {
        if graded {
            ChainComplex::new(ring, modules, diffs)
        } else {
            ChainComplex::new_ungraded(ring, modules, diffs)
        }
    };

    // members of level l of the boundary scaffold of class j: the pieces
    // at flag level at least l + 1 in the matching class, each one a copy
    // of the generators whose boundaries it records
    let members = |j: i64, l: i64| -> Vec<((i64, i64), usize)> {
        f.components()
            .iter()
            .filter(|(&(jj, cc), m)| {
                jj >= l + 1 && wrap(dd, jj + cc) == wrap(dd, j + l + 1) && m.rank() > 0
            })
            .map(|(&k, m)| (k, m.rank()))
            .collect()
    };
    let member_offsets = |mem: &[((i64, i64), usize)]| -> BTreeMap<(i64, i64), usize> {
        let mut out = BTreeMap::new();
        let mut off = 0;
        for &(k, r) in mem {
            out.insert(k, off);
            off += r;
        }
        out
    };

    let mut classes = BTreeMap::new();
    for j in 0..dd {
        let jn = wrap(dd, j + 1);
        let cyc = cycles_of(&hom, &d, j);
        let zcount = cyc.cols();
        let pres_h = hpres_of(&hom, &d, j);
        let pres_z = syzygies(&cyc)?;
        let embed_b = lift_matrix(&cyc, &d.block(jn))?;

        // boundary scaffold
        let mut b_modules = BTreeMap::new();
        let mut b_diffs = BTreeMap::new();
        let top = f.components().keys().map(|&(i, _)| i).max().unwrap_or(-1);
        for l in 0..top.max(0) {
            let mem = members(j, l);
            if mem.is_empty() {
                continue;
            }
            let degs: Vec<i64> = mem
                .iter()
                .flat_map(|&((jj, cc), _)| {
                    f.degrees(jj, cc).into_iter().map(move |u| u + l * s + s)
                })
                .collect();
            b_modules.insert(l, GradedFreeModule::new(degs));
            if l >= 1 {
                let prev_mem = members(j, l - 1);
                let po = member_offsets(&prev_mem);
                let rows: usize = prev_mem.iter().map(|&(_, r)| r).sum();
                let cols: usize = mem.iter().map(|&(_, r)| r).sum();
                let so = member_offsets(&mem);
                let mut m = RingMatrix::zero(ring, rows, cols);
                for &((jj, cc), _) in &mem {
                    let copy_index = jj - l;
                    for t in 0..copy_index {
                        let tk = (jj - t - 1, wrap(dd, cc + t));
                        if let Some(&ro) = po.get(&tk) {
                            paste(&mut m, ro, so[&(jj, cc)], &f.block(t, jj, cc), false);
                        }
                    }
                }
                if !m.is_zero() {
                    b_diffs.insert(l, m);
                }
            }
        }
        let mem0 = members(j, 0);
        let cols0: usize = mem0.iter().map(|&(_, r)| r).sum();
        let mut b_aug = RingMatrix::zero(ring, d.rank(jn), cols0);
        {
            let so = member_offsets(&mem0);
            for &((jj, cc), r) in &mem0 {
                paste(&mut b_aug, offs[&(jj, cc)], so[&(jj, cc)], &RingMatrix::identity(ring, r), false);
            }
        }
        let fb = Resolution {
            complex: mk(b_modules, b_diffs)?,
            augmentation: b_aug,
            ambient_degrees: d.degrees(jn).into_iter().map(|u| u + s).collect(),
            presentation: cycles_of(&hom, &d, jn),
        };

        // homology scaffold: the column itself, regraded level by level
        let mut h_modules = BTreeMap::new();
        let mut h_diffs = BTreeMap::new();
        for (&(l, cc), m) in f.components() {
            if cc != j || m.rank() == 0 {
                continue;
            }
            let degs: Vec<i64> = f.degrees(l, j).into_iter().map(|u| u + l * s).collect();
            h_modules.insert(l, GradedFreeModule::new(degs));
            if l >= 1 {
                let b = f.block(0, l, j);
                if !b.is_zero() {
                    h_diffs.insert(l, b);
                }
            }
        }
        let r0 = f.rank(0, j);
        let mut incl = RingMatrix::zero(ring, d.rank(j), r0);
        if r0 > 0 {
            paste(&mut incl, offs[&(0, j)], 0, &RingMatrix::identity(ring, r0), false);
        }
        let h_aug = lift_matrix(&cyc, &incl)?;
        let zdeg = infer_col_degrees(&cyc, &d.degrees(j)).unwrap_or_else(|| vec![0; zcount]);
        let fh = Resolution {
            complex: mk(h_modules, h_diffs)?,
            augmentation: h_aug,
            ambient_degrees: zdeg.clone(),
            presentation: pres_h,
        };

        // cycle scaffold: boundary and homology parts glued by a signed
        // slot identity
        let mut z_modules = BTreeMap::new();
        let mut z_diffs = BTreeMap::new();
        let topz = top_level(&fb.complex).max(top_level(&fh.complex));
        for l in 0..=topz {
            let br = fb.complex.rank(l);
            let hr = fh.complex.rank(l);
            if br + hr == 0 {
                continue;
            }
            let mut degs = fb.complex.degrees(l);
            degs.extend(fh.complex.degrees(l));
            z_modules.insert(l, GradedFreeModule::new(degs));
            if l >= 1 {
                let rows = fb.complex.rank(l - 1) + fh.complex.rank(l - 1);
                let mut m = RingMatrix::zero(ring, rows, br + hr);
                paste(&mut m, 0, 0, &fb.complex.diff(l), false);
                paste(&mut m, fb.complex.rank(l - 1), br, &fh.complex.diff(l), false);
                // alpha: the level-l anchor piece sits inside level l-1 of
                // the boundary scaffold as copy one
                if hr > 0 {
                    let prev_mem = members(j, l - 1);
                    let po = member_offsets(&prev_mem);
                    if let Some(&ro) = po.get(&(l, j)) {
                        let id = RingMatrix::identity(ring, hr);
                        paste(&mut m, ro, br, &id, l.rem_euclid(2) == 1);
                    }
                }
                if !m.is_zero() {
                    z_diffs.insert(l, m);
                }
            }
        }
        let z_aug = RingMatrix::hstack(&[&(&embed_b * &fb.augmentation), &fh.augmentation]);
        let fz = Resolution {
            complex: mk(z_modules, z_diffs)?,
            augmentation: z_aug,
            ambient_degrees: zdeg,
            presentation: pres_z.clone(),
        };

        classes.insert(
            j,
            (fb, fh, fz, cyc, pres_z, embed_b),
        );
    }

    // connecting data: the copy of class j-1's boundary scaffold raises
    // the copy index identically into class j's scaffold, and maps onto
    // the anchor by the flag's own deep strata, with alternating sign
    let mut done = BTreeMap::new();
    for j in 0..dd {
        let jp = wrap(dd, j - 1);
        let (ref fb_p, _, _, _, _, _) = classes[&jp];
        let (ref fb_j, ref fh_j, _, _, _, _) = classes[&j];
        let mut gamma = BTreeMap::new();
        let mut beta = BTreeMap::new();
        for l in 1..=top_level(&fb_p.complex) {
            let copy_mem = members(jp, l);
            if copy_mem.is_empty() {
                continue;
            }
            let co = member_offsets(&copy_mem);
            let cols: usize = copy_mem.iter().map(|&(_, r)| r).sum();
            let tgt_mem = members(j, l - 1);
            let to = member_offsets(&tgt_mem);
            let rows_g: usize = tgt_mem.iter().map(|&(_, r)| r).sum();
            let mut gm = RingMatrix::zero(ring, rows_g, cols);
            let hr = fh_j.complex.rank(l - 1);
            let mut bm = RingMatrix::zero(ring, hr, cols);
            let negate = l.rem_euclid(2) == 1;
            for &((jj, cc), r) in &copy_mem {
                if let Some(&ro) = to.get(&(jj, cc)) {
                    paste(&mut gm, ro, co[&(jj, cc)], &RingMatrix::identity(ring, r), false);
                }
                let copy_index = jj - l;
                let blk = f.block(copy_index, jj, cc);
                if !blk.is_zero() {
                    paste(&mut bm, 0, co[&(jj, cc)], &blk, negate);
                }
            }
            debug_assert_eq!(rows_g, fb_j.complex.rank(l - 1));
            if !gm.is_zero() {
                gamma.insert(l, gm);
            }
            if !bm.is_zero() {
                beta.insert(l, bm);
            }
        }
        let copy_mem0 = members(jp, 0);
        let cols0: usize = copy_mem0.iter().map(|&(_, r)| r).sum();
        let mut psi2 = RingMatrix::zero(ring, d.rank(j), cols0);
        {
            let co = member_offsets(&copy_mem0);
            for &((jj, cc), r) in &copy_mem0 {
                paste(&mut psi2, offs[&(jj, cc)], co[&(jj, cc)], &RingMatrix::identity(ring, r), false);
            }
        }
        done.insert(j, (gamma, beta, psi2));
    }

    let mut class_data = BTreeMap::new();
    for (j, (fb, fh, fz, cycles, pres_z, embed_b)) in classes {
        let (gamma, beta, psi2) = done.remove(&j).unwrap();
        class_data.insert(
            j,
            ClassData {
                fb,
                fh,
                fz,
                cycles,
                pres_z,
                embed_b,
                gamma,
                beta,
                psi2,
            },
        );
    }
    let ce = finish_ce(&d, class_data)?;
    let (sdr, f_inf) = degenerate_core(&ce)?;
    if f_inf != *f {
        return Err(Error::Precondition(
            "degenerating the rebuilt resolution did not restore the flag".into(),
        ));
    }
    let witness = ce.augmentation.compose(sdr.iota());
    let id = DmMorphism::identity(&d);
    for n in 0..dd {
        if witness.component(n) != id.component(n) {
            return Err(Error::Precondition(
                "retract witness is not the identity".into(),
            ));
        }
    }
    Ok((ce, sdr, witness))
}

/// Replaces a morphism between folds of anchored resolutions by a
/// flag-preserving one, together with the homotopy connecting them:
/// phi - psi = d h + h d holds exactly on return.
pub fn flag_preserve_up_to_homotopy(
    phi: &DmMorphism,
    f: &FreeFlag,
    fp: &FreeFlag,
) -> Result<(FlagMorphism, BTreeMap<i64, RingMatrix>)> {
    let df = flag_to_dm(f);
    let dfp = flag_to_dm(fp);
    if phi.source() != &df || phi.target() != &dfp {
        return Err(Error::Precondition(
            "morphism endpoints are not the folds of the given flags".into(),
        ));
    }
    let (_, sdr_f, _) = anchored_as_retract(f)?;
    let (ce_fp, sdr_fp, _) = anchored_as_retract(fp)?;
    let lifted = ce_lift(phi, &anchored_as_retract(f)?.0, &ce_fp)?;
    let m1 = lifted.as_dm_morphism().compose(sdr_f.iota());
    let psi_dm = sdr_fp.p().compose(&m1);
    let psi = flag_morphism_from_dm(&psi_dm, f, fp)?;
    let dd = f.modulus();
    let mut h = BTreeMap::new();
    for n in 0..dd {
        let nn = wrap(dd, n + 1);
        let m = &(&ce_fp.augmentation.component(nn) * &sdr_fp.h_component(n)) * &m1.component(n);
        let m = -&m;
        if !m.is_zero() {
            h.insert(n, m);
        }
    }
    let h_at = |n: i64| {
        h.get(&wrap(dd, n))
            .cloned()
            .unwrap_or_else(|| RingMatrix::zero(f.ring(), dfp.rank(wrap(dd, n + 1)), df.rank(wrap(dd, n))))
    };
    for n in 0..dd {
        let nn = wrap(dd, n + 1);
        let lhs = &phi.component(n) - &psi_dm.component(n);
        let rhs = &(&dfp.block(nn) * &h_at(n)) + &(&h_at(n - 1) * &df.block(n));
        if lhs != rhs {
            return Err(Error::Precondition(
                "homotopy identity failed; corrupted resolution data".into(),
            ));
        }
    }
    Ok((psi, h))
}
