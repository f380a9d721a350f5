//! Flag structures on differential modules. A free flag is a split-filtered
//! differential module: pieces indexed by a flag degree i >= 0 and a cyclic
//! degree j, with the differential decomposed into strata delta_t dropping
//! the flag degree by t + 1 and shifting the cyclic degree by t. Stratum 0
//! is a complex in each column; its direct sum is the anchor.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::coeff_ring::PolyRing;
use crate::dm_core::DiffModule;
use crate::groebner::{lift_matrix, quotient_length};
use crate::homalg::{ChainComplex, GradedFreeModule};
use crate::matrix::RingMatrix;
use crate::{Error, Result};

/// A free flag with modulus d. Piece (i, j) sits in flag degree i >= 0 and
/// carries cyclic degree i + j; stratum t maps (i, j) to (i - t - 1, j + t),
/// the second index taken mod d. The stored strata satisfy the stratified
/// square-zero relations: for every s, the sum of delta_a delta_b over
/// a + b = s vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeFlag {
    ring: Arc<PolyRing>,
    modulus: i64,
    components: BTreeMap<(i64, i64), GradedFreeModule>,
    strata: BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>>,
    shift: i64,
}

impl FreeFlag {
    pub fn new(
        ring: &Arc<PolyRing>,
        modulus: i64,
        components: BTreeMap<(i64, i64), GradedFreeModule>,
        strata: BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>>,
        shift: i64,
    ) -> Result<FreeFlag> {
        if modulus < 0 {
            return Err(Error::ModulusMismatch(format!(
                "negative modulus {}",
                modulus
            )));
        }
        let mut comps = BTreeMap::new();
        for ((i, j), m) in components {
            if i < 0 {
                return Err(Error::Shape(format!("negative flag degree {}", i)));
            }
            if modulus > 0 && !(0..modulus).contains(&j) {
                return Err(Error::ModulusMismatch(format!(
                    "cyclic index {} outside 0..{}",
                    j, modulus
                )));
            }
            if m.rank() > 0 {
                comps.insert((i, j), m);
            }
        }
        let mut f = FreeFlag {
            ring: ring.clone(),
            modulus,
            components: comps,
            strata: BTreeMap::new(),
            shift,
        };
        for (t, blocks) in strata {
            if t < 0 {
                return Err(Error::Shape(format!("negative stratum index {}", t)));
            }
            let mut kept = BTreeMap::new();
            for ((i, j), b) in blocks {
                if b.is_zero() {
                    continue;
                }
                if b.ring() != ring {
                    return Err(Error::RingMismatch);
                }
                let tgt = f.target_of(t, i, j);
                if b.rows() != f.rank(tgt.0, tgt.1) || b.cols() != f.rank(i, j) {
                    return Err(Error::Shape(format!(
                        "stratum {} block from ({}, {}) is {}x{}, expected {}x{}",
                        t,
                        i,
                        j,
                        b.rows(),
                        b.cols(),
                        f.rank(tgt.0, tgt.1),
                        f.rank(i, j)
                    )));
                }
                kept.insert((i, j), b);
            }
            if !kept.is_empty() {
                f.strata.insert(t, kept);
            }
        }
        f.check_square()?;
        Ok(f)
    }

    /// Verifies the stratified relations sum over a + b = s of
    /// delta_a delta_b = 0 for every s and every source piece.
    fn check_square(&self) -> Result<()> {
        let Some(&smax) = self.strata.keys().next_back() else {
            return Ok(());
        };
        for s in 0..=2 * smax {
            for &(i, j) in self.components.keys() {
                let (ti, tj) = {
                    let mid = self.target_of(0, i, j);
                    self.target_of(s, mid.0, mid.1)
                };
                let rows = self.rank(ti, tj);
                let cols = self.rank(i, j);
                if rows == 0 || cols == 0 {
                    continue;
                }
                let mut acc = RingMatrix::zero(&self.ring, rows, cols);
                for b in 0..=s {
                    let a = s - b;
                    let inner = self.block(b, i, j);
                    let mid = self.target_of(b, i, j);
                    let outer = self.block(a, mid.0, mid.1);
                    acc = &acc + &(&outer * &inner);
                }
                if !acc.is_zero() {
                    return Err(Error::Precondition(format!(
                        "stratified square-zero fails at total drop {} from piece ({}, {})",
                        s + 2,
                        i,
                        j
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn zero(ring: &Arc<PolyRing>, modulus: i64) -> FreeFlag {
        FreeFlag::new(ring, modulus, BTreeMap::new(), BTreeMap::new(), 0)
            .expect("empty flag is valid")
    }

    pub fn ring(&self) -> &Arc<PolyRing> {
        &self.ring
    }

    pub fn modulus(&self) -> i64 {
        self.modulus
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    pub fn components(&self) -> &BTreeMap<(i64, i64), GradedFreeModule> {
        &self.components
    }

    pub fn strata(&self) -> &BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>> {
        &self.strata
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn rank(&self, i: i64, j: i64) -> usize {
        self.components.get(&(i, j)).map_or(0, |m| m.rank())
    }

    pub fn total_rank(&self) -> usize {
        self.components.values().map(|m| m.rank()).sum()
    }

    pub fn degrees(&self, i: i64, j: i64) -> Vec<i64> {
        self.components
            .get(&(i, j))
            .map_or(Vec::new(), |m| m.degrees.clone())
    }

    /// Largest stratum index carrying a nonzero block, or -1 when the
    /// differential vanishes.
    pub fn max_stratum(&self) -> i64 {
        self.strata.keys().next_back().copied().unwrap_or(-1)
    }

    fn wrap(&self, j: i64) -> i64 {
        if self.modulus == 0 {
            j
        } else {
            j.rem_euclid(self.modulus)
        }
    }

    /// Target piece of stratum t applied to piece (i, j).
    pub fn target_of(&self, t: i64, i: i64, j: i64) -> (i64, i64) {
        (i - t - 1, self.wrap(j + t))
    }

    /// The stratum-t block out of piece (i, j), zero-filled when absent.
    pub fn block(&self, t: i64, i: i64, j: i64) -> RingMatrix {
        if let Some(b) = self.strata.get(&t).and_then(|m| m.get(&(i, j))) {
            return b.clone();
        }
        let (ti, tj) = self.target_of(t, i, j);
        RingMatrix::zero(&self.ring, self.rank(ti, tj), self.rank(i, j))
    }

    /// Distinct anchor column indices, ascending.
    pub fn columns(&self) -> Vec<i64> {
        let mut cols: Vec<i64> = self.components.keys().map(|&(_, j)| j).collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }
}

/// View a flag as a differential module: cyclic component n collects the
/// pieces (i, j) with i + j = n mod d, ordered by ascending (i, j), and the
/// differential is the sum of all strata.
pub fn flag_to_dm(f: &FreeFlag) -> DiffModule {
    let wrap = |n: i64| -> i64 {
        if f.modulus() == 0 {
            n
        } else {
            n.rem_euclid(f.modulus())
        }
    };
    let mut members: BTreeMap<i64, Vec<(i64, i64)>> = BTreeMap::new();
    for &(i, j) in f.components().keys() {
        members.entry(wrap(i + j)).or_default().push((i, j));
    }
    let offset_of = |n: i64, key: (i64, i64)| -> usize {
        let mut off = 0;
        for &k in members.get(&n).into_iter().flatten() {
            if k == key {
                return off;
            }
            off += f.rank(k.0, k.1);
        }
        unreachable!("piece lookup")
    };
    let comp_rank = |n: i64| -> usize {
        members
            .get(&n)
            .map_or(0, |v| v.iter().map(|&(i, j)| f.rank(i, j)).sum())
    };

    let mut comps = BTreeMap::new();
    for (&n, mem) in &members {
        let mut degs = Vec::new();
        for &(i, j) in mem {
            degs.extend(f.degrees(i, j));
        }
        comps.insert(n, GradedFreeModule::new(degs));
    }
    let mut blocks = BTreeMap::new();
    for (&n, mem) in &members {
        let pn = wrap(n - 1);
        let mut m = RingMatrix::zero(f.ring(), comp_rank(pn), comp_rank(n));
        let mut any = false;
        for &(i, j) in mem {
            for (&t, fam) in f.strata() {
                if let Some(b) = fam.get(&(i, j)) {
                    let tgt = f.target_of(t, i, j);
                    paste(&mut m, offset_of(pn, tgt), offset_of(n, (i, j)), b, false);
                    any = true;
                }
            }
        }
        if any {
            blocks.insert(n, m);
        }
    }
    DiffModule::new(f.ring(), f.modulus(), comps, blocks, f.shift())
        .expect("flag data assembles to a differential module")
}

/// Reads a flag structure off a differential module from an assignment of
/// flag degrees to generators: `filtration[n][g]` is the flag degree of
/// generator g of cyclic component n. The cyclic column of that generator
/// is then n minus its flag degree. Every nonzero entry of the differential
/// must strictly drop the flag degree; offending entries are rejected.
pub fn dm_to_flag(d: &DiffModule, filtration: &BTreeMap<i64, Vec<i64>>) -> Result<FreeFlag> {
    let wrap = |n: i64| -> i64 {
        if d.modulus() == 0 {
            n
        } else {
            n.rem_euclid(d.modulus())
        }
    };
    // Piece and in-piece position of every generator, preserving order.
    let mut place: BTreeMap<(i64, usize), ((i64, i64), usize)> = BTreeMap::new();
    let mut comps: BTreeMap<(i64, i64), Vec<i64>> = BTreeMap::new();
    for &n in d.components().keys() {
        let degs = d.degrees(n);
        let assign = filtration.get(&n).ok_or_else(|| {
            Error::Shape(format!("missing flag assignment for component {}", n))
        })?;
        if assign.len() != degs.len() {
            return Err(Error::Shape(format!(
                "flag assignment for component {} has {} entries, expected {}",
                n,
                assign.len(),
                degs.len()
            )));
        }
        for (g, (&i, &deg)) in assign.iter().zip(degs.iter()).enumerate() {
            if i < 0 {
                return Err(Error::Shape(format!("negative flag degree {}", i)));
            }
            let key = (i, wrap(n - i));
            let slot = comps.entry(key).or_default();
            place.insert((n, g), (key, slot.len()));
            slot.push(deg);
        }
    }
    let mut strata: BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>> = BTreeMap::new();
    for (&n, b) in d.block_map() {
        let pn = d.prev(n);
        for c in 0..b.cols() {
            for r in 0..b.rows() {
                let e = b.get(r, c);
                if e.is_zero() {
                    continue;
                }
                let (src, sc) = place[&(n, c)];
                let (tgt, tr) = place[&(pn, r)];
                let t = src.0 - tgt.0 - 1;
                if t < 0 {
                    return Err(Error::Precondition(format!(
                        "assignment does not strictly drop flag degree: block from {}, entry ({}, {})",
                        n, r, c
                    )));
                }
                let m = strata
                    .entry(t)
                    .or_default()
                    .entry(src)
                    .or_insert_with(|| {
                        RingMatrix::zero(
                            d.ring(),
                            comps.get(&tgt).map_or(0, |v| v.len()),
                            comps[&src].len(),
                        )
                    });
                m.set(tr, sc, e.clone());
            }
        }
    }
    let components = comps
        .into_iter()
        .map(|(k, degs)| (k, GradedFreeModule::new(degs)))
        .collect();
    FreeFlag::new(d.ring(), d.modulus(), components, strata, d.shift())
}

/// A chain complex as a flag concentrated in column 0 with only stratum 0.
pub fn flag_from_complex(c: &ChainComplex, modulus: i64) -> Result<FreeFlag> {
    let mut comps = BTreeMap::new();
    let mut zero_blocks = BTreeMap::new();
    for (i, _) in c.betti() {
        if i < 0 {
            return Err(Error::Precondition(
                "complex has components in negative degrees".into(),
            ));
        }
        comps.insert((i, 0), GradedFreeModule::new(c.degrees(i)));
        let d = c.diff(i);
        if !d.is_zero() {
            zero_blocks.insert((i, 0), d);
        }
    }
    let mut strata = BTreeMap::new();
    if !zero_blocks.is_empty() {
        strata.insert(0, zero_blocks);
    }
    FreeFlag::new(c.ring(), modulus, comps, strata, 0)
}

/// The anchor: the direct sum over columns j of the stratum-0 complexes
/// (D_{., j}, delta_0), assembled degreewise with columns ascending.
pub fn anchor(f: &FreeFlag) -> ChainComplex {
    let mut levels: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for &(i, j) in f.components().keys() {
        levels.entry(i).or_default().push(j);
    }
    let offset_of = |i: i64, j: i64| -> usize {
        let mut off = 0;
        for &jj in levels.get(&i).into_iter().flatten() {
            if jj == j {
                return off;
            }
            off += f.rank(i, jj);
        }
        unreachable!("column lookup")
    };
    let level_rank = |i: i64| -> usize {
        levels
            .get(&i)
            .map_or(0, |v| v.iter().map(|&j| f.rank(i, j)).sum())
    };
    let mut modules = BTreeMap::new();
    for (&i, js) in &levels {
        let mut degs = Vec::new();
        for &j in js {
            degs.extend(f.degrees(i, j));
        }
        modules.insert(i, GradedFreeModule::new(degs));
    }
    let mut diffs = BTreeMap::new();
    for (&i, js) in &levels {
        let mut m = RingMatrix::zero(f.ring(), level_rank(i - 1), level_rank(i));
        let mut any = false;
        for &j in js {
            if let Some(b) = f.strata().get(&0).and_then(|fam| fam.get(&(i, j))) {
                let tj = f.target_of(0, i, j).1;
                paste(&mut m, offset_of(i - 1, tj), offset_of(i, j), b, false);
                any = true;
            }
        }
        if any {
            diffs.insert(i, m);
        }
    }
    ChainComplex::new(f.ring(), modules, diffs).expect("stratum 0 is a complex")
}

/// One column of the anchor as a complex in its own right.
pub fn anchor_column(f: &FreeFlag, j: i64) -> ChainComplex {
    let mut modules = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for (&(i, jj), m) in f.components() {
        if jj != j {
            continue;
        }
        modules.insert(i, m.clone());
        if let Some(b) = f.strata().get(&0).and_then(|fam| fam.get(&(i, jj))) {
            diffs.insert(i, b.clone());
        }
    }
    ChainComplex::new(f.ring(), modules, diffs).expect("stratum 0 is a complex")
}

/// True when every anchor column has homology concentrated in flag
/// degree 0.
pub fn is_anchored_resolution(f: &FreeFlag) -> bool {
    for j in f.columns() {
        let col = anchor_column(f, j);
        let top = f
            .components()
            .keys()
            .filter(|&&(_, jj)| jj == j)
            .map(|&(i, _)| i)
            .max()
            .unwrap_or(0);
        for i in 1..=top {
            if col.homology_length_at(i) != Some(0) {
                return false;
            }
        }
    }
    true
}

/// Homology lengths read off the anchor: for an anchored resolution,
/// the homology in cyclic degree j is H_0 of column j, presented by the
/// stratum-0 block out of piece (1, j).
pub fn flag_homology_via_anchor(f: &FreeFlag) -> Result<BTreeMap<i64, Option<usize>>> {
    if !is_anchored_resolution(f) {
        return Err(Error::Precondition("anchor is not a resolution".into()));
    }
    let mut out = BTreeMap::new();
    for j in f.columns() {
        if f.rank(0, j) == 0 {
            out.insert(j, Some(0));
            continue;
        }
        let pres = f.block(0, 1, j);
        out.insert(j, quotient_length(&pres)?);
    }
    Ok(out)
}

/// A flag-preserving morphism in stratified form: phi_t maps piece (i, j)
/// of the source to piece (i - t, j + t) of the target, and the stratified
/// commutation identities sum over a + b = s of delta'_a phi_b = phi_a
/// delta_b hold for every s.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagMorphism {
    source: FreeFlag,
    target: FreeFlag,
    strata: BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>>,
}

impl FlagMorphism {
    pub fn new(
        source: FreeFlag,
        target: FreeFlag,
        strata: BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>>,
    ) -> Result<FlagMorphism> {
        if source.ring != target.ring {
            return Err(Error::RingMismatch);
        }
        if source.modulus != target.modulus {
            return Err(Error::ModulusMismatch(format!(
                "{} vs {}",
                source.modulus, target.modulus
            )));
        }
        let mut f = FlagMorphism {
            source,
            target,
            strata: BTreeMap::new(),
        };
        for (t, blocks) in strata {
            if t < 0 {
                return Err(Error::Shape(format!("negative stratum index {}", t)));
            }
            let mut kept = BTreeMap::new();
            for ((i, j), b) in blocks {
                if b.is_zero() {
                    continue;
                }
                let tgt = f.target_piece(t, i, j);
                if b.rows() != f.target.rank(tgt.0, tgt.1) || b.cols() != f.source.rank(i, j) {
                    return Err(Error::Shape(format!(
                        "morphism stratum {} block from ({}, {}) is {}x{}, expected {}x{}",
                        t,
                        i,
                        j,
                        b.rows(),
                        b.cols(),
                        f.target.rank(tgt.0, tgt.1),
                        f.source.rank(i, j)
                    )));
                }
                kept.insert((i, j), b);
            }
            if !kept.is_empty() {
                f.strata.insert(t, kept);
            }
        }
        f.check_commutation()?;
        Ok(f)
    }

    /// Target piece of morphism stratum t applied to source piece (i, j).
    fn target_piece(&self, t: i64, i: i64, j: i64) -> (i64, i64) {
        (i - t, self.source.wrap(j + t))
    }

    fn check_commutation(&self) -> Result<()> {
        let smax = self.strata.keys().next_back().copied().unwrap_or(0)
            + self
                .source
                .strata
                .keys()
                .chain(self.target.strata.keys())
                .next_back()
                .copied()
                .unwrap_or(0);
        for s in 0..=smax {
            for &(i, j) in self.source.components.keys() {
                // Both sides map (i, j) to target piece (i - s - 1, j + s).
                let (ti, tj) = (i - s - 1, self.source.wrap(j + s));
                let rows = self.target.rank(ti, tj);
                let cols = self.source.rank(i, j);
                if rows == 0 || cols == 0 {
                    continue;
                }
                let mut acc = RingMatrix::zero(&self.source.ring, rows, cols);
                for b in 0..=s {
                    let a = s - b;
                    // delta'_a phi_b from (i, j).
                    let phi = self.component(b, i, j);
                    let mid = self.target_piece(b, i, j);
                    let dd = self.target.block(a, mid.0, mid.1);
                    acc = &acc + &(&dd * &phi);
                    // minus phi_a delta_b from (i, j).
                    let db = self.source.block(b, i, j);
                    let mid = self.source.target_of(b, i, j);
                    let ph = self.component(a, mid.0, mid.1);
                    acc = &acc - &(&ph * &db);
                }
                if !acc.is_zero() {
                    return Err(Error::Precondition(format!(
                        "stratified commutation fails at total drop {} from piece ({}, {})",
                        s + 1,
                        i,
                        j
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn identity(f: &FreeFlag) -> FlagMorphism {
        let blocks: BTreeMap<(i64, i64), RingMatrix> = f
            .components
            .iter()
            .map(|(&k, m)| (k, RingMatrix::identity(&f.ring, m.rank())))
            .collect();
        let mut strata = BTreeMap::new();
        strata.insert(0, blocks);
        FlagMorphism::new(f.clone(), f.clone(), strata).expect("identity is a flag morphism")
    }

    pub fn source(&self) -> &FreeFlag {
        &self.source
    }

    pub fn target(&self) -> &FreeFlag {
        &self.target
    }

    pub fn strata(&self) -> &BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>> {
        &self.strata
    }

    /// The stratum-t block out of source piece (i, j), zero-filled.
    pub fn component(&self, t: i64, i: i64, j: i64) -> RingMatrix {
        if let Some(b) = self.strata.get(&t).and_then(|m| m.get(&(i, j))) {
            return b.clone();
        }
        let tgt = self.target_piece(t, i, j);
        RingMatrix::zero(
            &self.source.ring,
            self.target.rank(tgt.0, tgt.1),
            self.source.rank(i, j),
        )
    }

    /// self after inner: (self . inner)_s = sum over a + b = s of
    /// self_a inner_b.
    pub fn compose(&self, inner: &FlagMorphism) -> FlagMorphism {
        assert_eq!(
            inner.target, self.source,
            "composition endpoints do not match"
        );
        let smax = self.strata.keys().next_back().copied().unwrap_or(0)
            + inner.strata.keys().next_back().copied().unwrap_or(0);
        let mut strata: BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>> = BTreeMap::new();
        for s in 0..=smax {
            for &(i, j) in inner.source.components.keys() {
                let (ti, tj) = (i - s, inner.source.wrap(j + s));
                let rows = self.target.rank(ti, tj);
                let cols = inner.source.rank(i, j);
                if rows == 0 || cols == 0 {
                    continue;
                }
                let mut acc = RingMatrix::zero(&inner.source.ring, rows, cols);
                for b in 0..=s {
                    let a = s - b;
                    let first = inner.component(b, i, j);
                    let mid = inner.target_piece(b, i, j);
                    let second = self.component(a, mid.0, mid.1);
                    acc = &acc + &(&second * &first);
                }
                if !acc.is_zero() {
                    strata.entry(s).or_default().insert((i, j), acc);
                }
            }
        }
        FlagMorphism::new(inner.source.clone(), self.target.clone(), strata)
            .expect("composite of flag morphisms is a flag morphism")
    }

    /// The underlying morphism of differential modules.
    pub fn as_dm_morphism(&self) -> crate::dm_core::DmMorphism {
        let src = flag_to_dm(&self.source);
        let tgt = flag_to_dm(&self.target);
        let wrap = |n: i64| -> i64 {
            if self.source.modulus == 0 {
                n
            } else {
                n.rem_euclid(self.source.modulus)
            }
        };
        let mut src_members: BTreeMap<i64, Vec<(i64, i64)>> = BTreeMap::new();
        for &(i, j) in self.source.components.keys() {
            src_members.entry(wrap(i + j)).or_default().push((i, j));
        }
        let mut tgt_members: BTreeMap<i64, Vec<(i64, i64)>> = BTreeMap::new();
        for &(i, j) in self.target.components.keys() {
            tgt_members.entry(wrap(i + j)).or_default().push((i, j));
        }
        let offset = |members: &BTreeMap<i64, Vec<(i64, i64)>>,
                      f: &FreeFlag,
                      n: i64,
                      key: (i64, i64)|
         -> usize {
            let mut off = 0;
            for &k in members.get(&n).into_iter().flatten() {
                if k == key {
                    return off;
                }
                off += f.rank(k.0, k.1);
            }
            unreachable!("piece lookup")
        };
        let mut blocks = BTreeMap::new();
        for &n in src.components().keys() {
            let mut m = RingMatrix::zero(self.source.ring(), tgt.rank(n), src.rank(n));
            for &(i, j) in src_members.get(&n).into_iter().flatten() {
                for (&t, fam) in &self.strata {
                    if let Some(b) = fam.get(&(i, j)) {
                        let tp = self.target_piece(t, i, j);
                        paste(
                            &mut m,
                            offset(&tgt_members, &self.target, n, tp),
                            offset(&src_members, &self.source, n, (i, j)),
                            b,
                            false,
                        );
                    }
                }
            }
            blocks.insert(n, m);
        }
        crate::dm_core::DmMorphism::new(src, tgt, blocks)
            .expect("flag morphism descends to differential modules")
    }
}

/// Inverts a flag morphism whose stratum-0 part is invertible on every
/// piece, by stratumwise back-substitution. The result is a two-sided
/// inverse, verified exactly.
pub fn triangular_invert(phi: &FlagMorphism) -> Result<FlagMorphism> {
    let src = &phi.source;
    let tgt = &phi.target;
    // Piecewise inverse of the stratum-0 part.
    let mut psi0 = BTreeMap::new();
    for (&(i, j), m) in tgt.components() {
        if src.rank(i, j) != m.rank() {
            return Err(Error::Precondition(
                "morphism is not invertible on the anchor".into(),
            ));
        }
        let f0 = phi.component(0, i, j);
        let id = RingMatrix::identity(src.ring(), m.rank());
        let inv = lift_matrix(&f0, &id).map_err(|_| {
            Error::Precondition("morphism is not invertible on the anchor".into())
        })?;
        if (&f0 * &inv) != id || (&inv * &f0) != id {
            return Err(Error::Precondition(
                "morphism is not invertible on the anchor".into(),
            ));
        }
        psi0.insert((i, j), inv);
    }
    for &(i, j) in src.components().keys() {
        if tgt.rank(i, j) != src.rank(i, j) {
            return Err(Error::Precondition(
                "morphism is not invertible on the anchor".into(),
            ));
        }
    }
    // A morphism stratum cannot drop further than the top flag degree.
    let smax = src.components.keys().map(|&(i, _)| i).max().unwrap_or(0);
    let mut psi: BTreeMap<i64, BTreeMap<(i64, i64), RingMatrix>> = BTreeMap::new();
    psi.insert(0, psi0);
    for s in 1..=smax {
        let mut level = BTreeMap::new();
        for (&(i, j), _) in tgt.components() {
            // psi_s phi_0 = - sum over b >= 1 of psi_{s-b} phi_b, read off
            // source piece (i, j) of the target, then composed with the
            // piecewise inverse of phi_0.
            let (ti, tj) = (i - s, src.wrap(j + s));
            let rows = src.rank(ti, tj);
            if rows == 0 {
                continue;
            }
            let inv0 = &psi[&0][&(i, j)];
            let mut acc = RingMatrix::zero(src.ring(), rows, src.rank(i, j));
            for b in 1..=s {
                let phib = phi.component(b, i, j);
                let mid = phi.target_piece(b, i, j);
                let Some(prev) = psi.get(&(s - b)).and_then(|m| m.get(&mid)) else {
                    continue;
                };
                acc = &acc - &(prev * &phib);
            }
            let block = &acc * inv0;
            if !block.is_zero() {
                level.insert((i, j), block);
            }
        }
        if !level.is_empty() {
            psi.insert(s, level);
        }
    }
    let inv = FlagMorphism::new(tgt.clone(), src.clone(), psi)?;
    let id_src = FlagMorphism::identity(src);
    let id_tgt = FlagMorphism::identity(tgt);
    if inv.compose(phi) != id_src || phi.compose(&inv) != id_tgt {
        return Err(Error::Precondition(
            "triangular inversion did not close".into(),
        ));
    }
    Ok(inv)
}

/// The twist functor: conjugation by the degree automorphism that acts by
/// (-1)^i on flag degree i. Stratum t picks up the sign (-1)^(t+1), so the
/// anchor differential is negated and odd strata are fixed. An exact
/// involution.
pub fn twist_phi(f: &FreeFlag) -> FreeFlag {
    let mut strata = BTreeMap::new();
    for (&t, fam) in f.strata() {
        let blocks: BTreeMap<(i64, i64), RingMatrix> = fam
            .iter()
            .map(|(&k, b)| {
                let tw = if t % 2 == 0 { -b } else { b.clone() };
                (k, tw)
            })
            .collect();
        strata.insert(t, blocks);
    }
    FreeFlag::new(
        f.ring(),
        f.modulus(),
        f.components().clone(),
        strata,
        f.shift(),
    )
    .expect("conjugated flag is valid")
}

/// Inverse of the twist functor; the conjugation is involutive, so this is
/// the same sign pattern.
pub fn twist_phi_inverse(f: &FreeFlag) -> FreeFlag {
    twist_phi(f)
}

/// The twist functor on morphisms: stratum t picks up the sign (-1)^t.
pub fn twist_phi_morphism(phi: &FlagMorphism) -> FlagMorphism {
    let mut strata = BTreeMap::new();
    for (&t, fam) in phi.strata() {
        let blocks: BTreeMap<(i64, i64), RingMatrix> = fam
            .iter()
            .map(|(&k, b)| {
                let tw = if t % 2 == 0 { b.clone() } else { -b };
                (k, tw)
            })
            .collect();
        strata.insert(t, blocks);
    }
    FlagMorphism::new(twist_phi(phi.source()), twist_phi(phi.target()), strata)
        .expect("twisted morphism is valid")
}

/// Adds `src`, optionally negated, into `dst` at the given corner.
pub(crate) fn paste(dst: &mut RingMatrix, r0: usize, c0: usize, src: &RingMatrix, negate: bool) {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff_ring::{parse_poly, Field, MonomialOrder, Poly};
    use crate::dm_core::{dm_check, dm_fold, dm_homology, fold_complex};
    use crate::homalg::koszul_complex;

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

    /// Rank-four flag over k[x0, x1] with Koszul anchor and a unit in the
    /// drop-two stratum.
    fn example_flag(ring: &Arc<PolyRing>) -> FreeFlag {
        let mut comps = BTreeMap::new();
        comps.insert((0, 0), GradedFreeModule::new(vec![0]));
        comps.insert((1, 0), GradedFreeModule::new(vec![1, 1]));
        comps.insert((2, 0), GradedFreeModule::new(vec![2]));
        let mut s0 = BTreeMap::new();
        s0.insert((1, 0), mat(ring, 1, 2, &["x0", "x1"]));
        s0.insert((2, 0), mat(ring, 2, 1, &["-x1", "x0"]));
        let mut s1 = BTreeMap::new();
        s1.insert((2, 0), mat(ring, 1, 1, &["1"]));
        let mut strata = BTreeMap::new();
        strata.insert(0, s0);
        strata.insert(1, s1);
        FreeFlag::new(ring, 1, comps, strata, 0).unwrap()
    }

    /// The rank-eight modulus-two flag: Koszul on three variables with a
    /// unit in the drop-three stratum.
    fn k_delta_flag(ring: &Arc<PolyRing>) -> FreeFlag {
        let vars: Vec<Poly> = (0..3).map(|i| Poly::var(ring, i)).collect();
        let k = koszul_complex(ring, &vars).unwrap();
        let mut comps = BTreeMap::new();
        let mut s0 = BTreeMap::new();
        for i in 0..=3 {
            comps.insert((i, 0), GradedFreeModule::new(k.degrees(i)));
            let d = k.diff(i);
            if !d.is_zero() {
                s0.insert((i, 0), d);
            }
        }
        let mut s2 = BTreeMap::new();
        s2.insert((3, 0), mat(ring, 1, 1, &["1"]));
        let mut strata = BTreeMap::new();
        strata.insert(0, s0);
        strata.insert(2, s2);
        FreeFlag::new(ring, 2, comps, strata, 0).unwrap()
    }

    #[test]
    fn folded_complex_is_a_stratum_zero_flag() {
        let ring = qring(2);
        let vars: Vec<Poly> = (0..2).map(|i| Poly::var(&ring, i)).collect();
        let k = koszul_complex(&ring, &vars).unwrap();
        for modulus in [0, 1, 2] {
            let f = flag_from_complex(&k, modulus).unwrap();
            assert_eq!(f.max_stratum(), 0);
            assert_eq!(flag_to_dm(&f), fold_complex(&k, modulus).unwrap());
            let a = anchor(&f);
            assert_eq!(a.betti(), k.betti());
            for i in 0..=2 {
                assert_eq!(a.diff(i), k.diff(i));
            }
            assert!(is_anchored_resolution(&f));
        }
    }

    #[test]
    fn example_flag_assembles_the_displayed_matrix() {
        let ring = qring(2);
        let f = example_flag(&ring);
        let d = flag_to_dm(&f);
        let expect = mat(
            &ring,
            4,
            4,
            &[
                "0", "x0", "x1", "1", //
                "0", "0", "0", "-x1", //
                "0", "0", "0", "x0", //
                "0", "0", "0", "0",
            ],
        );
        assert_eq!(d.block(0), expect);
        assert!(dm_check(&d).pass);

        let vars: Vec<Poly> = (0..2).map(|i| Poly::var(&ring, i)).collect();
        let k = koszul_complex(&ring, &vars).unwrap();
        let a = anchor(&f);
        for i in 0..=2 {
            assert_eq!(a.diff(i), k.diff(i));
        }
        assert!(is_anchored_resolution(&f));

        let lengths = flag_homology_via_anchor(&f).unwrap();
        assert_eq!(lengths[&0], Some(1));
        assert_eq!(dm_homology(&d).unwrap().total, Some(1));
    }

    #[test]
    fn k_delta_flag_matches_fold_plus_unit() {
        let ring = qring(3);
        let f = k_delta_flag(&ring);
        assert_eq!(f.total_rank(), 8);
        let d = flag_to_dm(&f);
        assert!(dm_check(&d).pass);

        let vars: Vec<Poly> = (0..3).map(|i| Poly::var(&ring, i)).collect();
        let k = koszul_complex(&ring, &vars).unwrap();
        let folded = fold_complex(&k, 2).unwrap();
        let mut b1 = folded.block(1);
        b1.set(0, 3, Poly::one(&ring));
        assert_eq!(d.block(1), b1);
        assert_eq!(d.block(0), folded.block(0));

        let a = anchor(&f);
        for i in 0..=3 {
            assert_eq!(a.diff(i), k.diff(i));
        }
        assert!(is_anchored_resolution(&f));
        let lengths = flag_homology_via_anchor(&f).unwrap();
        assert_eq!(lengths[&0], Some(1));
        assert_eq!(dm_homology(&d).unwrap().length(0), Some(1));
    }

    #[test]
    fn dm_to_flag_round_trips_and_rejects_bad_assignments() {
        let ring = qring(2);
        let f = example_flag(&ring);
        let d = flag_to_dm(&f);
        let mut filt = BTreeMap::new();
        filt.insert(0, vec![0, 1, 1, 2]);
        let g = dm_to_flag(&d, &filt).unwrap();
        assert_eq!(g, f);
        assert_eq!(flag_to_dm(&g).block(0), d.block(0));

        let mut bad = BTreeMap::new();
        bad.insert(0, vec![0, 1, 1, 0]);
        let err = dm_to_flag(&d, &bad).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(err.to_string().contains("block from 0"));

        let zero = DiffModule::zero(&ring, 2);
        let empty = dm_to_flag(&zero, &BTreeMap::new()).unwrap();
        assert!(empty.is_zero());
    }

    #[test]
    fn modulus_two_round_trip_through_fold_degrees() {
        let ring = qring(3);
        let f = k_delta_flag(&ring);
        let d = flag_to_dm(&f);
        // Component 0 holds K_0 then K_2; component 1 holds K_1 then K_3.
        let mut filt = BTreeMap::new();
        filt.insert(0, vec![0, 2, 2, 2]);
        filt.insert(1, vec![1, 1, 1, 3]);
        let g = dm_to_flag(&d, &filt).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn anchored_detection_rejects_high_homology() {
        let ring = qring(2);
        let mut comps = BTreeMap::new();
        comps.insert((0, 0), GradedFreeModule::new(vec![0]));
        comps.insert((1, 0), GradedFreeModule::new(vec![0]));
        let f = FreeFlag::new(&ring, 1, comps, BTreeMap::new(), 0).unwrap();
        assert!(!is_anchored_resolution(&f));
        assert!(matches!(
            flag_homology_via_anchor(&f),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn constructor_rejects_broken_strata() {
        let ring = qring(2);
        let mut comps = BTreeMap::new();
        comps.insert((0, 0), GradedFreeModule::new(vec![0]));
        comps.insert((1, 0), GradedFreeModule::new(vec![0]));
        comps.insert((2, 0), GradedFreeModule::new(vec![0]));
        let mut s0 = BTreeMap::new();
        s0.insert((1, 0), mat(&ring, 1, 1, &["x0"]));
        s0.insert((2, 0), mat(&ring, 1, 1, &["x1"]));
        let mut strata = BTreeMap::new();
        strata.insert(0, s0);
        let err = FreeFlag::new(&ring, 1, comps.clone(), strata, 0).unwrap_err();
        assert!(err.to_string().contains("square-zero"));

        let mut s1 = BTreeMap::new();
        s1.insert((1, 0), mat(&ring, 1, 1, &["1"]));
        let mut strata = BTreeMap::new();
        strata.insert(1, s1);
        assert!(matches!(
            FreeFlag::new(&ring, 1, comps, strata, 0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn triangular_inversion_closes_exactly() {
        let ring = qring(2);
        let f = example_flag(&ring);
        let id = FlagMorphism::identity(&f);
        let inv = triangular_invert(&id).unwrap();
        assert_eq!(inv, id);

        // Identity plus the nilpotent correction delta_0 e out of the top
        // piece, which lands two flag degrees down: morphism stratum 2.
        // Nothing maps into the top piece and nothing leaves the bottom
        // one, so the correction commutes with the differential on the
        // nose.
        let e = mat(&ring, 2, 1, &["x0", "0"]);
        let d0_from_1 = f.block(0, 1, 0);
        let n = &d0_from_1 * &e;
        let mut strata = BTreeMap::new();
        let mut s0 = BTreeMap::new();
        for (&k, m) in f.components() {
            s0.insert(k, RingMatrix::identity(&ring, m.rank()));
        }
        strata.insert(0, s0);
        let mut s2 = BTreeMap::new();
        s2.insert((2, 0), n.clone());
        strata.insert(2, s2);
        let phi = FlagMorphism::new(f.clone(), f.clone(), strata).unwrap();
        let inv = triangular_invert(&phi).unwrap();
        assert_eq!(inv.compose(&phi), FlagMorphism::identity(&f));
        assert_eq!(phi.compose(&inv), FlagMorphism::identity(&f));
        // The inverse of id + n is id - n when n squares to zero.
        assert_eq!(inv.component(2, 2, 0), -&n);
    }

    #[test]
    fn twist_is_an_exact_involution() {
        let ring = qring(3);
        let f = k_delta_flag(&ring);
        let tw = twist_phi(&f);
        assert_eq!(tw.block(0, 1, 0), -&f.block(0, 1, 0));
        assert_eq!(tw.block(2, 3, 0), -&f.block(2, 3, 0));
        assert!(dm_check(&flag_to_dm(&tw)).pass);
        assert_eq!(twist_phi_inverse(&tw), f);

        let ring2 = qring(2);
        let e = example_flag(&ring2);
        let te = twist_phi(&e);
        assert!(dm_check(&flag_to_dm(&te)).pass);
        assert_eq!(te.block(1, 2, 0), e.block(1, 2, 0));
        assert_eq!(twist_phi(&te), e);

        assert!(twist_phi(&FreeFlag::zero(&ring, 2)).is_zero());

        let id = FlagMorphism::identity(&e);
        let tid = twist_phi_morphism(&id);
        assert_eq!(tid, FlagMorphism::identity(&te));
        assert_eq!(twist_phi_morphism(&tid), id);
    }

    #[test]
    fn flag_morphism_descends_to_modules() {
        let ring = qring(2);
        let f = example_flag(&ring);
        let id = FlagMorphism::identity(&f);
        let dm = id.as_dm_morphism();
        assert_eq!(dm, crate::dm_core::DmMorphism::identity(&flag_to_dm(&f)));
    }

    #[test]
    fn fold_precondition_still_guards_flag_modules() {
        let ring = qring(3);
        let f = k_delta_flag(&ring);
        let d = flag_to_dm(&f);
        assert!(dm_fold(&d, 3).is_err());
    }
}
