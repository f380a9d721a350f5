//! Chain complexes of graded free modules: resolutions, comparison lifts,
//! the Horseshoe lemma, cones, tensor and Hom complexes, and minimization.
//! Homological indexing throughout: d_i maps C_i to C_{i-1}.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::coeff_ring::{Poly, PolyRing};
use crate::groebner::{lift_matrix, quotient_length, syzygies, vector_is_zero};
use crate::matrix::RingMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GradedFreeModule {
    /// One internal degree per generator; rank = degrees.len().
    pub degrees: Vec<i64>,
}

impl GradedFreeModule {
    pub fn new(degrees: Vec<i64>) -> GradedFreeModule {
        GradedFreeModule { degrees }
    }

    pub fn rank(&self) -> usize {
        self.degrees.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainComplex {
    ring: Arc<PolyRing>,
    modules: BTreeMap<i64, GradedFreeModule>,
    diffs: BTreeMap<i64, RingMatrix>,
}

impl ChainComplex {
    /// Builds and validates: shapes, homogeneity, d² = 0.
    pub fn new(
        ring: &Arc<PolyRing>,
        modules: BTreeMap<i64, GradedFreeModule>,
        diffs: BTreeMap<i64, RingMatrix>,
    ) -> Result<ChainComplex> {
        let mut c = ChainComplex {
            ring: Arc::clone(ring),
            modules,
            diffs,
        };
        c.normalize();
        c.validate(true)?;
        Ok(c)
    }

    /// Like `new`, but skips the homogeneity check. For complexes over
    /// targets that carry no consistent internal grading; shapes and
    /// d² = 0 are still enforced.
    pub(crate) fn new_ungraded(
        ring: &Arc<PolyRing>,
        modules: BTreeMap<i64, GradedFreeModule>,
        diffs: BTreeMap<i64, RingMatrix>,
    ) -> Result<ChainComplex> {
        let mut c = ChainComplex {
            ring: Arc::clone(ring),
            modules,
            diffs,
        };
        c.normalize();
        c.validate(false)?;
        Ok(c)
    }

    pub fn zero(ring: &Arc<PolyRing>) -> ChainComplex {
        ChainComplex {
            ring: Arc::clone(ring),
            modules: BTreeMap::new(),
            diffs: BTreeMap::new(),
        }
    }

    /// A single free module sitting in homological degree i.
    pub fn concentrated(ring: &Arc<PolyRing>, i: i64, module: GradedFreeModule) -> ChainComplex {
        let mut modules = BTreeMap::new();
        if module.rank() > 0 {
            modules.insert(i, module);
        }
        ChainComplex {
            ring: Arc::clone(ring),
            modules,
            diffs: BTreeMap::new(),
        }
    }

    /// Canonical form: no rank-zero modules, no stored zero differentials.
    /// Equality of complexes is equality of canonical forms.
    fn normalize(&mut self) {
        self.modules.retain(|_, m| m.rank() > 0);
        let ranks: BTreeMap<i64, usize> =
            self.modules.iter().map(|(&i, m)| (i, m.rank())).collect();
        self.diffs
            .retain(|i, d| !d.is_zero() && ranks.contains_key(i) && ranks.contains_key(&(i - 1)));
    }

    fn validate(&self, check_degrees: bool) -> Result<()> {
        for (&i, d) in &self.diffs {
            if d.ring() != &self.ring {
                return Err(Error::RingMismatch);
            }
            if d.rows() != self.rank(i - 1) || d.cols() != self.rank(i) {
                return Err(Error::Shape(format!(
                    "d_{} has shape {}x{}, expected {}x{}",
                    i,
                    d.rows(),
                    d.cols(),
                    self.rank(i - 1),
                    self.rank(i)
                )));
            }
            if check_degrees && !d.is_degree_homogeneous(&self.degrees(i - 1), &self.degrees(i), 0) {
                return Err(Error::Shape(format!("d_{} is not homogeneous", i)));
            }
        }
        for &i in self.diffs.keys() {
            if self.diffs.contains_key(&(i + 1)) {
                let sq = &self.diff(i) * &self.diff(i + 1);
                if !sq.is_zero() {
                    return Err(Error::Shape(format!("d_{}·d_{} is nonzero", i, i + 1)));
                }
            }
        }
        Ok(())
    }

    pub fn ring(&self) -> &Arc<PolyRing> {
        &self.ring
    }

    pub fn rank(&self, i: i64) -> usize {
        self.modules.get(&i).map_or(0, |m| m.rank())
    }

    pub fn degrees(&self, i: i64) -> Vec<i64> {
        self.modules
            .get(&i)
            .map_or(Vec::new(), |m| m.degrees.clone())
    }

    pub fn module(&self, i: i64) -> GradedFreeModule {
        self.modules.get(&i).cloned().unwrap_or_default()
    }

    /// The differential C_i -> C_{i-1}, materialized as zero when absent.
    pub fn diff(&self, i: i64) -> RingMatrix {
        self.diffs
            .get(&i)
            .cloned()
            .unwrap_or_else(|| RingMatrix::zero(&self.ring, self.rank(i - 1), self.rank(i)))
    }

    pub fn is_zero(&self) -> bool {
        self.modules.is_empty()
    }

    /// Smallest and largest degree carrying a nonzero module; None when zero.
    pub fn support(&self) -> Option<(i64, i64)> {
        let lo = *self.modules.keys().next()?;
        let hi = *self.modules.keys().next_back()?;
        Some((lo, hi))
    }

    pub fn degrees_with_modules(&self) -> Vec<i64> {
        self.modules.keys().copied().collect()
    }

    pub fn total_rank(&self) -> usize {
        self.modules.values().map(|m| m.rank()).sum()
    }

    pub fn betti(&self) -> Vec<(i64, usize)> {
        self.modules.iter().map(|(&i, m)| (i, m.rank())).collect()
    }

    /// C[k]: C[k]_j = C_{j+k}, differential scaled by (−1)^k.
    pub fn shift(&self, k: i64) -> ChainComplex {
        let negate = k.rem_euclid(2) == 1;
        let modules = self
            .modules
            .iter()
            .map(|(&i, m)| (i - k, m.clone()))
            .collect();
        let diffs = self
            .diffs
            .iter()
            .map(|(&i, d)| (i - k, if negate { -d } else { d.clone() }))
            .collect();
        ChainComplex {
            ring: Arc::clone(&self.ring),
            modules,
            diffs,
        }
    }

    pub fn direct_sum(&self, other: &ChainComplex) -> ChainComplex {
        let mut modules = BTreeMap::new();
        let mut diffs = BTreeMap::new();
        let keys: Vec<i64> = self
            .modules
            .keys()
            .chain(other.modules.keys())
            .copied()
            .collect();
        for i in keys {
            let mut degs = self.degrees(i);
            degs.extend(other.degrees(i));
            modules.insert(i, GradedFreeModule::new(degs));
        }
        let dkeys: Vec<i64> = self
            .diffs
            .keys()
            .chain(other.diffs.keys())
            .copied()
            .collect();
        for i in dkeys {
            diffs.insert(i, RingMatrix::direct_sum(&self.diff(i), &other.diff(i)));
        }
        let mut c = ChainComplex {
            ring: Arc::clone(&self.ring),
            modules,
            diffs,
        };
        c.normalize();
        c
    }

    /// Per-degree homology lengths over the support window; None marks
    /// infinite length; degrees with vanishing homology are omitted.
    pub fn homology_lengths(&self) -> BTreeMap<i64, Option<usize>> {
        let mut out = BTreeMap::new();
        let Some((lo, hi)) = self.support() else {
            return out;
        };
        for i in lo..=hi {
            let len = self.homology_length_at(i);
            if len != Some(0) {
                out.insert(i, len);
            }
        }
        out
    }

    /// Length of H_i = ker d_i / im d_{i+1}. The subquotient is presented on
    /// the cycle generators Z as R^z / {c : Z·c ∈ im d_{i+1}}.
    pub fn homology_length_at(&self, i: i64) -> Option<usize> {
        if self.rank(i) == 0 {
            return Some(0);
        }
        let cycles = syzygies(&self.diff(i)).expect("ring mismatch inside complex");
        let z = cycles.cols();
        if z == 0 {
            return Some(0);
        }
        let glued = RingMatrix::hstack(&[&cycles, &self.diff(i + 1)]);
        let rel = syzygies(&glued).expect("ring mismatch inside complex");
        let rows: Vec<usize> = (0..z).collect();
        let w = rel.select_rows(&rows);
        quotient_length(&w).expect("ring mismatch inside complex")
    }
}

/// Chain map of homological degree `degree`: components f_j: C_j -> D_{j+degree}
/// satisfying d∘f = (−1)^degree f∘d.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainMap {
    source: ChainComplex,
    target: ChainComplex,
    degree: i64,
    components: BTreeMap<i64, RingMatrix>,
}

impl ChainMap {
    pub fn new(
        source: ChainComplex,
        target: ChainComplex,
        degree: i64,
        components: BTreeMap<i64, RingMatrix>,
    ) -> Result<ChainMap> {
        let mut f = ChainMap {
            source,
            target,
            degree,
            components,
        };
        f.components.retain(|_, m| !m.is_zero());
        f.validate()?;
        Ok(f)
    }

    pub fn zero(source: ChainComplex, target: ChainComplex, degree: i64) -> ChainMap {
        ChainMap {
            source,
            target,
            degree,
            components: BTreeMap::new(),
        }
    }

    pub fn identity(c: &ChainComplex) -> ChainMap {
        let components = c
            .degrees_with_modules()
            .into_iter()
            .map(|i| (i, RingMatrix::identity(c.ring(), c.rank(i))))
            .collect();
        ChainMap {
            source: c.clone(),
            target: c.clone(),
            degree: 0,
            components,
        }
    }

    pub fn source(&self) -> &ChainComplex {
        &self.source
    }

    pub fn target(&self) -> &ChainComplex {
        &self.target
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn component(&self, j: i64) -> RingMatrix {
        self.components.get(&j).cloned().unwrap_or_else(|| {
            RingMatrix::zero(
                self.source.ring(),
                self.target.rank(j + self.degree),
                self.source.rank(j),
            )
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.degree;
        let negate = n.rem_euclid(2) == 1;
        for (&j, f) in &self.components {
            if f.rows() != self.target.rank(j + n) || f.cols() != self.source.rank(j) {
                return Err(Error::Shape(format!("component {} has wrong shape", j)));
            }
        }
        let Some((lo, hi)) = self.source.support() else {
            return Ok(());
        };
        for j in lo..=hi {
            let lhs = &self.target.diff(j + n) * &self.component(j);
            let rhs = &self.component(j - 1) * &self.source.diff(j);
            let rhs = if negate { -&rhs } else { rhs };
            if lhs != rhs {
                return Err(Error::Shape(format!(
                    "chain map fails to commute at degree {}",
                    j
                )));
            }
        }
        Ok(())
    }

    /// self ∘ inner; degrees add.
    pub fn compose(&self, inner: &ChainMap) -> ChainMap {
        assert!(inner.target == self.source, "composition mismatch");
        let mut components = BTreeMap::new();
        if let Some((lo, hi)) = inner.source.support() {
            for j in lo..=hi {
                let m = &self.component(j + inner.degree) * &inner.component(j);
                if !m.is_zero() {
                    components.insert(j, m);
                }
            }
        }
        ChainMap {
            source: inner.source.clone(),
            target: self.target.clone(),
            degree: self.degree + inner.degree,
            components,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components.values().all(|m| m.is_zero())
    }
}

/// The Koszul complex on the given elements, exterior-monomial basis ordered
/// by lexicographic index subsets.
pub fn koszul_complex(ring: &Arc<PolyRing>, elements: &[Poly]) -> Result<ChainComplex> {
    for f in elements {
        if f.ring() != ring {
            return Err(Error::RingMismatch);
        }
    }
    let n = elements.len();
    let el_degs: Vec<i64> = elements
        .iter()
        .map(|f| f.total_degree().unwrap_or(0))
        .collect();
    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, k, &mut Vec::new(), &mut out);
        out
    }
    let mut modules = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    modules.insert(0, GradedFreeModule::new(vec![0]));
    let mut prev: Vec<Vec<usize>> = subsets(n, 0);
    for k in 1..=n {
        let cur = subsets(n, k);
        let degs: Vec<i64> = cur
            .iter()
            .map(|s| s.iter().map(|&i| el_degs[i]).sum())
            .collect();
        modules.insert(k as i64, GradedFreeModule::new(degs));
        let mut d = RingMatrix::zero(ring, prev.len(), cur.len());
        for (c, s) in cur.iter().enumerate() {
            for (pos, &i) in s.iter().enumerate() {
                let mut t = s.clone();
                t.remove(pos);
                let r = prev.iter().position(|u| *u == t).unwrap();
                let entry = if pos % 2 == 0 {
                    elements[i].clone()
                } else {
                    -&elements[i]
                };
                d.set(r, c, entry);
            }
        }
        diffs.insert(k as i64, d);
        prev = cur;
    }
    ChainComplex::new(ring, modules, diffs)
}

/// A free resolution of coker(presentation): the complex together with the
/// augmentation F_0 → R^k and the presentation being resolved.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub complex: ChainComplex,
    pub augmentation: RingMatrix,
    pub ambient_degrees: Vec<i64>,
    pub presentation: RingMatrix,
}

/// Internal degree of each column when the matrix is homogeneous against the
/// given row degrees (as a degree-0 map); None on inhomogeneous input.
pub fn infer_col_degrees(m: &RingMatrix, row_degrees: &[i64]) -> Option<Vec<i64>> {
    assert_eq!(row_degrees.len(), m.rows());
    let mut out = Vec::with_capacity(m.cols());
    for c in 0..m.cols() {
        let mut deg: Option<i64> = None;
        for r in 0..m.rows() {
            let e = m.get(r, c);
            if e.is_zero() {
                continue;
            }
            let rep = e.degree_report();
            if !rep.homogeneous {
                return None;
            }
            let d = row_degrees[r] + rep.degree.unwrap();
            match deg {
                None => deg = Some(d),
                Some(d0) if d0 == d => {}
                _ => return None,
            }
        }
        out.push(deg.unwrap_or(0));
    }
    Some(out)
}

/// Resolves coker(presentation) by iterated syzygy computation. Generator
/// degrees of the ambient free module are `ambient_degrees`. With `minimize`
/// the result is minimal: no constant entries in any differential.
pub fn free_resolution(
    presentation: &RingMatrix,
    ambient_degrees: &[i64],
    minimize: bool,
    length_cap: usize,
) -> Result<Resolution> {
    let ring = presentation.ring();
    assert_eq!(ambient_degrees.len(), presentation.rows());
    let mut modules = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    modules.insert(0, GradedFreeModule::new(ambient_degrees.to_vec()));

    let mut row_degs = ambient_degrees.to_vec();
    let mut d = presentation.clone();
    let mut i: i64 = 1;
    while d.cols() > 0 && !d.is_zero() {
        if i as usize > length_cap {
            return Err(Error::CapExceeded(length_cap));
        }
        let col_degs = infer_col_degrees(&d, &row_degs).ok_or_else(|| {
            Error::Shape("inhomogeneous presentation: graded resolution unavailable".into())
        })?;
        modules.insert(i, GradedFreeModule::new(col_degs.clone()));
        diffs.insert(i, d.clone());
        d = syzygies(&d)?;
        row_degs = col_degs;
        i += 1;
    }
    let complex = ChainComplex::new(ring, modules, diffs)?;
    let augmentation = RingMatrix::identity(ring, presentation.rows());
    let res = Resolution {
        complex,
        augmentation,
        ambient_degrees: ambient_degrees.to_vec(),
        presentation: presentation.clone(),
    };
    if minimize {
        Ok(minimize_resolution(res))
    } else {
        Ok(res)
    }
}

fn minimize_resolution(res: Resolution) -> Resolution {
    let (small, sdr) = minimize_complex(&res.complex);
    // The inclusion at degree 0 transports the augmentation; it still
    // induces an isomorphism on H_0.
    let augmentation = &res.augmentation * &sdr.iota.component(0);
    Resolution {
        complex: small,
        augmentation,
        ambient_degrees: res.ambient_degrees,
        presentation: res.presentation,
    }
}

/// Strong deformation retract between complexes: p∘ι = id on the small side,
/// ι∘p − id = dh + hd on the big side, h of degree +1, h² = hι = ph = 0.
#[derive(Debug, Clone)]
pub struct ComplexSdr {
    pub big: ChainComplex,
    pub small: ChainComplex,
    pub p: ChainMap,
    pub iota: ChainMap,
    h: BTreeMap<i64, RingMatrix>,
}

impl ComplexSdr {
    pub fn identity(c: &ChainComplex) -> ComplexSdr {
        ComplexSdr {
            big: c.clone(),
            small: c.clone(),
            p: ChainMap::identity(c),
            iota: ChainMap::identity(c),
            h: BTreeMap::new(),
        }
    }

    /// The homotopy h_j: C_j → C_{j+1} on the big complex.
    pub fn h_component(&self, j: i64) -> RingMatrix {
        self.h.get(&j).cloned().unwrap_or_else(|| {
            RingMatrix::zero(self.big.ring(), self.big.rank(j + 1), self.big.rank(j))
        })
    }

    /// All SDR identities, exactly: p and ι are chain maps, p∘ι = id,
    /// ι∘p − id = dh + hd, and the side conditions h² = hι = ph = 0.
    pub fn verify(&self) -> bool {
        if self.p.validate().is_err() || self.iota.validate().is_err() {
            return false;
        }
        if self.p.compose(&self.iota) != ChainMap::identity(&self.small) {
            return false;
        }
        let Some((lo, hi)) = self.big.support() else {
            return true;
        };
        for j in lo..=hi {
            let ip = &self.iota.component(j) * &self.p.component(j);
            let id = RingMatrix::identity(self.big.ring(), self.big.rank(j));
            let dh = &self.big.diff(j + 1) * &self.h_component(j);
            let hd = &self.h_component(j - 1) * &self.big.diff(j);
            if &ip - &id != &dh + &hd {
                return false;
            }
            if !(&self.h_component(j + 1) * &self.h_component(j)).is_zero() {
                return false;
            }
            if !(&self.h_component(j) * &self.iota.component(j)).is_zero() {
                return false;
            }
            if !(&self.p.component(j + 1) * &self.h_component(j)).is_zero() {
                return false;
            }
        }
        true
    }
}

/// Gaussian cancellation of constant unit entries in the differentials:
/// returns a homotopy equivalent complex with none left, plus the strong
/// deformation retract realizing the equivalence.
pub fn minimize_complex(c: &ChainComplex) -> (ChainComplex, ComplexSdr) {
    let ring = c.ring();
    let Some((lo, hi)) = c.support() else {
        return (c.clone(), ComplexSdr::identity(c));
    };
    // Flatten to a total basis ordered by homological degree.
    let mut flat: Vec<(i64, usize)> = Vec::new();
    let mut flat_deg: Vec<i64> = Vec::new();
    let mut off = BTreeMap::new();
    for i in lo..=hi {
        off.insert(i, flat.len());
        for (g, &dg) in c.degrees(i).iter().enumerate() {
            flat.push((i, g));
            flat_deg.push(dg);
        }
    }
    let n = flat.len();
    let mut total = RingMatrix::zero(ring, n, n);
    for i in lo..=hi {
        let d = c.diff(i);
        if d.rows() == 0 || d.cols() == 0 {
            continue;
        }
        let ro = off[&(i - 1)];
        let co = off[&i];
        for r in 0..d.rows() {
            for cc in 0..d.cols() {
                if !d.get(r, cc).is_zero() {
                    total.set(ro + r, co + cc, d.get(r, cc).clone());
                }
            }
        }
    }

    let red = crate::cancel::cancel_total(&total, &flat_deg);

    let kept = &red.keep;
    let mut new_index_by_degree: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (new_idx, &old_idx) in kept.iter().enumerate() {
        new_index_by_degree
            .entry(flat[old_idx].0)
            .or_default()
            .push(new_idx);
    }
    let mut modules = BTreeMap::new();
    for (&i, idxs) in &new_index_by_degree {
        let degs: Vec<i64> = idxs.iter().map(|&k| flat_deg[kept[k]]).collect();
        modules.insert(i, GradedFreeModule::new(degs));
    }
    let mut diffs = BTreeMap::new();
    for (&i, idxs) in &new_index_by_degree {
        if let Some(prev) = new_index_by_degree.get(&(i - 1)) {
            diffs.insert(i, red.reduced.select_rows(prev).select_cols(idxs));
        }
    }
    let small = ChainComplex::new(ring, modules, diffs).expect("cancellation preserves d²=0");

    let old_indices = |i: i64| -> Vec<usize> {
        let o = off[&i];
        (o..o + c.rank(i)).collect()
    };
    let empty: Vec<usize> = Vec::new();
    let mut p_comp = BTreeMap::new();
    let mut iota_comp = BTreeMap::new();
    let mut h_comp = BTreeMap::new();
    for i in lo..=hi {
        let old_i = old_indices(i);
        let new_i = new_index_by_degree.get(&i).unwrap_or(&empty);
        let p_block = red.p.select_rows(new_i).select_cols(&old_i);
        if !p_block.is_zero() {
            p_comp.insert(i, p_block);
        }
        let iota_block = red.iota.select_rows(&old_i).select_cols(new_i);
        if !iota_block.is_zero() {
            iota_comp.insert(i, iota_block);
        }
        if c.rank(i + 1) > 0 {
            let h_block = red.h.select_rows(&old_indices(i + 1)).select_cols(&old_i);
            if !h_block.is_zero() {
                h_comp.insert(i, h_block);
            }
        }
    }
    let sdr = ComplexSdr {
        big: c.clone(),
        small: small.clone(),
        p: ChainMap {
            source: c.clone(),
            target: small.clone(),
            degree: 0,
            components: p_comp,
        },
        iota: ChainMap {
            source: small.clone(),
            target: c.clone(),
            degree: 0,
            components: iota_comp,
        },
        h: h_comp,
    };
    (small, sdr)
}

/// Lifts a map of cokernels through two resolutions. `f` acts on the ambient
/// free modules and must carry im(pres A) into im(pres B). The result is a
/// degree-0 chain map commuting with the augmentations into the cokernels.
pub fn comparison_lift(f: &RingMatrix, fa: &Resolution, fb: &Resolution) -> Result<ChainMap> {
    // φ_0 solves aug_B·φ_0 ≡ f·aug_A modulo im(pres B).
    let target0 = f * &fa.augmentation;
    let through = RingMatrix::hstack(&[&fb.augmentation, &fb.presentation]);
    let combined = lift_matrix(&through, &target0)?;
    let phi0 = combined.submatrix(0, fb.complex.rank(0), 0, combined.cols());
    let mut components = BTreeMap::new();
    if !phi0.is_zero() {
        components.insert(0, phi0.clone());
    }
    let mut prev = phi0;
    let hi = fa.complex.support().map_or(-1, |(_, h)| h);
    for i in 1..=hi {
        let rhs = &prev * &fa.complex.diff(i);
        let phi = lift_matrix(&fb.complex.diff(i), &rhs)?;
        if !phi.is_zero() {
            components.insert(i, phi.clone());
        }
        prev = phi;
    }
    ChainMap::new(fa.complex.clone(), fb.complex.clone(), 0, components)
}

/// Short exact sequence 0 → A → B → C → 0 of cokernels: presentations plus
/// the ambient-level matrices inducing the arrows.
pub struct ShortExact {
    pub pres_a: RingMatrix,
    pub pres_b: RingMatrix,
    pub pres_c: RingMatrix,
    pub alpha: RingMatrix,
    pub beta: RingMatrix,
}

impl ShortExact {
    /// Exactness of the induced sequence of cokernels, established by syzygy
    /// and membership computations.
    pub fn check(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Precondition(format!("not short exact: {}", msg)));
        if lift_matrix(&self.pres_b, &(&self.alpha * &self.pres_a)).is_err() {
            return fail("alpha does not respect presentations");
        }
        if lift_matrix(&self.pres_c, &(&self.beta * &self.pres_b)).is_err() {
            return fail("beta does not respect presentations");
        }
        if lift_matrix(&self.pres_c, &(&self.beta * &self.alpha)).is_err() {
            return fail("beta∘alpha is nonzero on cokernels");
        }
        let idc = RingMatrix::identity(self.pres_c.ring(), self.pres_c.rows());
        if lift_matrix(&RingMatrix::hstack(&[&self.beta, &self.pres_c]), &idc).is_err() {
            return fail("beta is not surjective");
        }
        // Injectivity of A → B: any u with α·u ∈ im(pres B) must lie in
        // im(pres A); such u are the first-block rows of syzygies of [α | pres B].
        let amb_a = self.alpha.cols();
        let pre = syzygies(&RingMatrix::hstack(&[&self.alpha, &self.pres_b]))?;
        for col in 0..pre.cols() {
            let u: Vec<Poly> = (0..amb_a).map(|r| pre.get(r, col).clone()).collect();
            if vector_is_zero(&u) {
                continue;
            }
            let ucol = RingMatrix::from_cols(self.alpha.ring(), vec![u]);
            if lift_matrix(&self.pres_a, &ucol).is_err() {
                return fail("alpha has a kernel");
            }
        }
        // Exactness in the middle: β·x ∈ im(pres C) forces x ∈ im α + im(pres B).
        let amb_b = self.beta.cols();
        let mid = syzygies(&RingMatrix::hstack(&[&self.beta, &self.pres_c]))?;
        let alpha_pb = RingMatrix::hstack(&[&self.alpha, &self.pres_b]);
        for col in 0..mid.cols() {
            let x: Vec<Poly> = (0..amb_b).map(|r| mid.get(r, col).clone()).collect();
            if vector_is_zero(&x) {
                continue;
            }
            let xcol = RingMatrix::from_cols(self.beta.ring(), vec![x]);
            if lift_matrix(&alpha_pb, &xcol).is_err() {
                return fail("middle homology nonzero");
            }
        }
        Ok(())
    }
}

/// Horseshoe lemma: a resolution of B filling in between given resolutions
/// of A and C, with block-upper-triangular differential [[d^FA, γ],[0, d^FC]].
pub fn horseshoe(ses: &ShortExact, fa: &Resolution, fc: &Resolution) -> Result<Resolution> {
    ses.check()?;
    let ring = ses.pres_b.ring();
    let hi_a = fa.complex.support().map_or(-1, |(_, h)| h);
    let hi_c = fc.complex.support().map_or(-1, |(_, h)| h);
    let hi = hi_a.max(hi_c);

    // ψ: FC_0 → ambient B with β·ψ ≡ aug_C modulo im(pres C).
    let psi = if fc.complex.rank(0) > 0 {
        let through = RingMatrix::hstack(&[&ses.beta, &ses.pres_c]);
        let sol = lift_matrix(&through, &fc.augmentation).map_err(|_| {
            Error::Precondition("cannot lift the C-augmentation through beta".into())
        })?;
        sol.submatrix(0, ses.beta.cols(), 0, sol.cols())
    } else {
        RingMatrix::zero(ring, ses.beta.cols(), 0)
    };
    let alpha_aug = &ses.alpha * &fa.augmentation;

    // Connecting blocks γ_i: FC_i → FA_{i−1}, chosen so the total
    // differential squares to zero and the augmentation stays exact.
    let mut gammas: BTreeMap<i64, RingMatrix> = BTreeMap::new();
    if fc.complex.rank(1) > 0 && fa.complex.rank(0) > 0 {
        // α·aug_A·γ_1 ≡ −ψ·d^FC_1 modulo im(pres B).
        let through = RingMatrix::hstack(&[&alpha_aug, &ses.pres_b]);
        let rhs = -&(&psi * &fc.complex.diff(1));
        let sol = lift_matrix(&through, &rhs)
            .map_err(|_| Error::Precondition("horseshoe connecting map failed".into()))?;
        gammas.insert(1, sol.submatrix(0, fa.complex.rank(0), 0, sol.cols()));
    }
    for i in 2..=hi {
        let g_prev = match gammas.get(&(i - 1)) {
            Some(g) => g.clone(),
            None => RingMatrix::zero(ring, fa.complex.rank(i - 2), fc.complex.rank(i - 1)),
        };
        let rhs = &g_prev * &fc.complex.diff(i);
        if rhs.is_zero() {
            continue;
        }
        gammas.insert(i, lift_matrix(&fa.complex.diff(i - 1), &(-&rhs))?);
    }

    let mut modules = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for i in 0..=hi {
        let mut degs = fa.complex.degrees(i);
        degs.extend(fc.complex.degrees(i));
        if !degs.is_empty() {
            modules.insert(i, GradedFreeModule::new(degs));
        }
    }
    for i in 1..=hi {
        let da = fa.complex.diff(i);
        let dc = fc.complex.diff(i);
        let g = match gammas.get(&i) {
            Some(g) => g.clone(),
            None => RingMatrix::zero(ring, fa.complex.rank(i - 1), fc.complex.rank(i)),
        };
        let z = RingMatrix::zero(ring, fc.complex.rank(i - 1), fa.complex.rank(i));
        diffs.insert(i, RingMatrix::from_blocks(&[vec![&da, &g], vec![&z, &dc]]));
    }
    let complex = ChainComplex::new(ring, modules, diffs)?;
    let augmentation = RingMatrix::hstack(&[&alpha_aug, &psi]);
    Ok(Resolution {
        complex,
        augmentation,
        ambient_degrees: vec![0; ses.pres_b.rows()],
        presentation: ses.pres_b.clone(),
    })
}

/// Mapping cone of a degree-0 chain map f: C → D:
/// Cone_j = D_j ⊕ C_{j−1}, differential [[d^D, −f],[0, −d^C]].
pub fn cone(f: &ChainMap) -> ChainComplex {
    assert_eq!(f.degree, 0, "cone expects a degree-0 chain map");
    let ring = f.source.ring();
    let c = &f.source;
    let d = &f.target;
    let lo = c
        .support()
        .map(|(l, _)| l)
        .into_iter()
        .chain(d.support().map(|(l, _)| l))
        .min()
        .unwrap_or(0);
    let hi = c
        .support()
        .map(|(_, h)| h + 1)
        .into_iter()
        .chain(d.support().map(|(_, h)| h))
        .max()
        .unwrap_or(-1);
    let mut modules = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for j in lo..=hi {
        let mut degs = d.degrees(j);
        degs.extend(c.degrees(j - 1));
        if !degs.is_empty() {
            modules.insert(j, GradedFreeModule::new(degs));
        }
    }
    for j in lo..=hi {
        let dd = d.diff(j);
        let dc = -&c.diff(j - 1);
        let fb = -&f.component(j - 1);
        let z = RingMatrix::zero(ring, c.rank(j - 2), d.rank(j));
        let m = RingMatrix::from_blocks(&[vec![&dd, &fb], vec![&z, &dc]]);
        if !m.is_zero() {
            diffs.insert(j, m);
        }
    }
    ChainComplex::new(ring, modules, diffs).expect("cone of a chain map squares to zero")
}

/// Tensor product with Koszul signs: d(x⊗y) = dx⊗y + (−1)^{|x|} x⊗dy.
/// Degree-j blocks ordered by first-factor degree descending, so iterated
/// tensors of Koszul complexes reproduce the Koszul complex on the nose.
pub fn tensor(c: &ChainComplex, d: &ChainComplex) -> ChainComplex {
    let ring = c.ring();
    let (Some((clo, chi)), Some((dlo, dhi))) = (c.support(), d.support()) else {
        return ChainComplex::zero(ring);
    };
    let blocks = |j: i64| -> Vec<(i64, i64)> {
        let mut v = Vec::new();
        let mut a = chi.min(j - dlo);
        let a_min = clo.max(j - dhi);
        while a >= a_min {
            v.push((a, j - a));
            a -= 1;
        }
        v
    };
    let mut modules = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for j in (clo + dlo)..=(chi + dhi) {
        let mut degs = Vec::new();
        for (a, b) in blocks(j) {
            for da in c.degrees(a) {
                for db in d.degrees(b) {
                    degs.push(da + db);
                }
            }
        }
        if !degs.is_empty() {
            modules.insert(j, GradedFreeModule::new(degs));
        }
    }
    for j in (clo + dlo + 1)..=(chi + dhi) {
        let src = blocks(j);
        let tgt = blocks(j - 1);
        let mut tgt_off = BTreeMap::new();
        {
            let mut acc = 0usize;
            for &(a, b) in &tgt {
                tgt_off.insert((a, b), acc);
                acc += c.rank(a) * d.rank(b);
            }
        }
        let rows: usize = tgt.iter().map(|&(a, b)| c.rank(a) * d.rank(b)).sum();
        let cols: usize = src.iter().map(|&(a, b)| c.rank(a) * d.rank(b)).sum();
        if rows == 0 || cols == 0 {
            continue;
        }
        let mut m = RingMatrix::zero(ring, rows, cols);
        let mut coff = 0usize;
        for &(a, b) in &src {
            let na = c.rank(a);
            let nb = d.rank(b);
            if na * nb > 0 {
                // dx ⊗ y lands in block (a−1, b).
                if let Some(&ro) = tgt_off.get(&(a - 1, b)) {
                    let k = RingMatrix::kronecker(&c.diff(a), &RingMatrix::identity(ring, nb));
                    for r in 0..k.rows() {
                        for cc in 0..k.cols() {
                            if !k.get(r, cc).is_zero() {
                                m.set(ro + r, coff + cc, k.get(r, cc).clone());
                            }
                        }
                    }
                }
                // (−1)^a x ⊗ dy lands in block (a, b−1).
                if let Some(&ro) = tgt_off.get(&(a, b - 1)) {
                    let k = RingMatrix::kronecker(&RingMatrix::identity(ring, na), &d.diff(b));
                    let negate = a.rem_euclid(2) == 1;
                    for r in 0..k.rows() {
                        for cc in 0..k.cols() {
                            let e = k.get(r, cc);
                            if !e.is_zero() {
                                m.set(ro + r, coff + cc, if negate { -e } else { e.clone() });
                            }
                        }
                    }
                }
            }
            coff += na * nb;
        }
        if !m.is_zero() {
            diffs.insert(j, m);
        }
    }
    ChainComplex::new(ring, modules, diffs).expect("tensor squares to zero")
}

/// hom_complex(C,D)_j = ⊕_a Hom(C_a, D_{a+j}), (df) = d∘f − (−1)^{|f|} f∘d.
/// Basis of Hom(C_a, D_{a+j}): matrix units E_{r,c} ordered source-column
/// major (c outer, r inner), blocks by a ascending.
pub fn hom_complex(c: &ChainComplex, d: &ChainComplex) -> ChainComplex {
    let ring = c.ring();
    let (Some((clo, chi)), Some((dlo, dhi))) = (c.support(), d.support()) else {
        return ChainComplex::zero(ring);
    };
    let jlo = dlo - chi;
    let jhi = dhi - clo;
    let blocks = |j: i64| -> Vec<i64> {
        (clo..=chi)
            .filter(|&a| c.rank(a) > 0 && d.rank(a + j) > 0)
            .collect()
    };
    let mut modules = BTreeMap::new();
    for j in jlo..=jhi {
        let mut degs = Vec::new();
        for a in blocks(j) {
            for src_deg in c.degrees(a) {
                for tgt_deg in d.degrees(a + j) {
                    degs.push(tgt_deg - src_deg);
                }
            }
        }
        if !degs.is_empty() {
            modules.insert(j, GradedFreeModule::new(degs));
        }
    }
    let mut diffs = BTreeMap::new();
    for j in (jlo + 1)..=jhi {
        let src = blocks(j);
        let tgt = blocks(j - 1);
        let mut tgt_off = BTreeMap::new();
        {
            let mut acc = 0usize;
            for &a in &tgt {
                tgt_off.insert(a, acc);
                acc += c.rank(a) * d.rank(a + j - 1);
            }
        }
        let rows: usize = tgt.iter().map(|&a| c.rank(a) * d.rank(a + j - 1)).sum();
        let cols: usize = src.iter().map(|&a| c.rank(a) * d.rank(a + j)).sum();
        if rows == 0 || cols == 0 {
            continue;
        }
        let flip = j.rem_euclid(2) == 1;
        let mut m = RingMatrix::zero(ring, rows, cols);
        let mut coff = 0usize;
        for &a in &src {
            let nc = c.rank(a);
            let nd = d.rank(a + j);
            // d∘E_{r,cc} contributes d^D[r',r] at E_{r',cc} in block a.
            if let Some(&ro) = tgt_off.get(&a) {
                let dd = d.diff(a + j);
                let nd_t = d.rank(a + j - 1);
                for cc in 0..nc {
                    for r in 0..nd {
                        for rp in 0..nd_t {
                            let e = dd.get(rp, r);
                            if !e.is_zero() {
                                m.set(ro + cc * nd_t + rp, coff + cc * nd + r, e.clone());
                            }
                        }
                    }
                }
            }
            // −(−1)^j E_{r,cc}∘d^C contributes at E_{r,c'} in block a+1.
            if let Some(&ro) = tgt_off.get(&(a + 1)) {
                let dc = c.diff(a + 1);
                let n_up = c.rank(a + 1);
                for cc in 0..nc {
                    for r in 0..nd {
                        for cp in 0..n_up {
                            let e = dc.get(cc, cp);
                            if !e.is_zero() {
                                let v = if flip { e.clone() } else { -e };
                                m.set(ro + cp * nd + r, coff + cc * nd + r, v);
                            }
                        }
                    }
                }
            }
            coff += nc * nd;
        }
        if !m.is_zero() {
            diffs.insert(j, m);
        }
    }
    ChainComplex::new(ring, modules, diffs).expect("hom complex squares to zero")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff_ring::{parse_poly, Field};
    use crate::coeff_ring::MonomialOrder;

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

    #[test]
    fn koszul_complex_shape_and_square() {
        let ring = qring(3);
        let els: Vec<Poly> = (0..3).map(|i| Poly::var(&ring, i)).collect();
        let k = koszul_complex(&ring, &els).unwrap();
        assert_eq!(k.betti(), vec![(0, 1), (1, 3), (2, 3), (3, 1)]);
        assert_eq!(k.degrees(2), vec![2, 2, 2]);
        // Validation inside the constructor already certified d² = 0.
    }

    #[test]
    fn residue_field_resolution_betti() {
        let ring = qring(2);
        let pres = mat(&ring, 1, 2, &["x0", "x1"]);
        let res = free_resolution(&pres, &[0], false, 10).unwrap();
        assert_eq!(res.complex.betti(), vec![(0, 1), (1, 2), (2, 1)]);
        // Exact away from degree 0, and H_0 has length 1.
        let h = res.complex.homology_lengths();
        assert_eq!(h.len(), 1);
        assert_eq!(h[&0], Some(1));
    }

    #[test]
    fn resolution_matches_quotient_length_oracle() {
        let ring = PolyRing::new(Field::prime(101).unwrap(), 2, MonomialOrder::Grevlex);
        let pres = mat(&ring, 1, 3, &["x0^2", "x0*x1", "x1^2"]);
        let res = free_resolution(&pres, &[0], true, 10).unwrap();
        let h0 = res.complex.homology_length_at(0);
        assert_eq!(h0, crate::groebner::quotient_length(&pres).unwrap());
        assert_eq!(h0, Some(3));
    }

    #[test]
    fn resolution_of_infinite_length_module() {
        let ring = qring(2);
        let pres = mat(&ring, 2, 2, &["-1*x0*x1", "-1*x1^2", "x0^2", "x0*x1"]);
        let res = free_resolution(&pres, &[0, 0], false, 10).unwrap();
        assert_eq!(res.complex.betti(), vec![(0, 2), (1, 2), (2, 1)]);
        let h = res.complex.homology_lengths();
        assert_eq!(h.len(), 1);
        assert_eq!(h[&0], None);
    }

    #[test]
    fn cap_is_enforced() {
        let ring = qring(2);
        let pres = mat(&ring, 1, 2, &["x0", "x1"]);
        match free_resolution(&pres, &[0], false, 1) {
            Err(crate::Error::CapExceeded(1)) => {}
            other => panic!("expected cap error, got {:?}", other.map(|r| r.complex.betti())),
        }
    }

    #[test]
    fn shift_negates_differential() {
        let ring = qring(2);
        let k = koszul_complex(&ring, &[Poly::var(&ring, 0), Poly::var(&ring, 1)]).unwrap();
        let s = k.shift(1);
        assert_eq!(s.rank(-1), 1);
        assert_eq!(s.rank(1), 1);
        assert_eq!(s.diff(0), -&k.diff(1));
        let s2 = k.shift(2);
        assert_eq!(s2.diff(-1), k.diff(1));
        assert_eq!(s.shift(1), s2);
    }

    #[test]
    fn chain_map_sign_is_checked() {
        let ring = qring(1);
        // 0 → R →x R → 0.
        let k = koszul_complex(&ring, &[Poly::var(&ring, 0)]).unwrap();
        let id = ChainMap::identity(&k);
        assert!(id.validate().is_ok());
        // A degree-1 "map" with component d itself must fail the sign rule:
        // d∘f = −f∘d forces 0 = −x·x at the top degree.
        let mut comps = BTreeMap::new();
        comps.insert(0, mat(&ring, 1, 1, &["1"]));
        assert!(ChainMap::new(k.clone(), k.clone(), 1, comps).is_err());
    }

    #[test]
    fn cone_of_identity_is_contractible() {
        let ring = qring(2);
        let k = koszul_complex(&ring, &[Poly::var(&ring, 0), Poly::var(&ring, 1)]).unwrap();
        let c = cone(&ChainMap::identity(&k));
        assert_eq!(c.total_rank(), 8);
        assert!(c.homology_lengths().is_empty());
        let (small, sdr) = minimize_complex(&c);
        assert!(small.is_zero());
        assert!(sdr.verify());
    }

    #[test]
    fn tensor_of_koszul_complexes_is_koszul() {
        let ring = qring(3);
        let x = Poly::var(&ring, 0);
        let y = Poly::var(&ring, 1);
        let z = Poly::var(&ring, 2);
        let kx = koszul_complex(&ring, &[x.clone()]).unwrap();
        let ky = koszul_complex(&ring, &[y.clone()]).unwrap();
        let kz = koszul_complex(&ring, &[z.clone()]).unwrap();
        let kxy = tensor(&kx, &ky);
        assert_eq!(kxy, koszul_complex(&ring, &[x.clone(), y.clone()]).unwrap());
        let kxyz = tensor(&kxy, &kz);
        assert_eq!(kxyz, koszul_complex(&ring, &[x, y, z]).unwrap());
    }

    #[test]
    fn hom_from_rank_one_free_is_identity() {
        let ring = qring(2);
        let k = koszul_complex(&ring, &[Poly::var(&ring, 0), Poly::var(&ring, 1)]).unwrap();
        let unit = ChainComplex::concentrated(&ring, 0, GradedFreeModule::new(vec![0]));
        assert_eq!(hom_complex(&unit, &k), k);
    }

    #[test]
    fn hom_into_rank_one_free_dualizes() {
        let ring = qring(2);
        let k = koszul_complex(&ring, &[Poly::var(&ring, 0), Poly::var(&ring, 1)]).unwrap();
        let unit = ChainComplex::concentrated(&ring, 0, GradedFreeModule::new(vec![0]));
        let dual = hom_complex(&k, &unit);
        assert_eq!(dual.betti(), vec![(-2, 1), (-1, 2), (0, 1)]);
        assert_eq!(dual.degrees(-2), vec![-2]);
        // The dual of the Koszul complex is exact except at the top.
        let h = dual.homology_lengths();
        assert_eq!(h.len(), 1);
        assert_eq!(h[&-2], Some(1));
    }

    #[test]
    fn minimize_strips_exactly_the_contractible_summand() {
        let ring = qring(2);
        let k = koszul_complex(&ring, &[Poly::var(&ring, 0), Poly::var(&ring, 1)]).unwrap();
        // Direct sum with a contractible two-term piece R = R in degrees 1, 0.
        let mut modules = BTreeMap::new();
        modules.insert(0, GradedFreeModule::new(vec![3]));
        modules.insert(1, GradedFreeModule::new(vec![3]));
        let mut diffs = BTreeMap::new();
        diffs.insert(1, mat(&ring, 1, 1, &["1"]));
        let triv = ChainComplex::new(&ring, modules, diffs).unwrap();
        let big = k.direct_sum(&triv);
        let (small, sdr) = minimize_complex(&big);
        assert_eq!(small, k);
        assert!(sdr.verify());
        // And minimizing an already minimal complex is the identity.
        let (again, sdr2) = minimize_complex(&k);
        assert_eq!(again, k);
        assert!(sdr2.verify());
    }

    #[test]
    fn minimized_resolution_of_redundant_presentation() {
        let ring = qring(2);
        // Redundant generators of (x0, x1): the third column is x0 + x1 times
        // the ambient generator, forcing non-minimal syzygies upstream.
        let pres = mat(&ring, 1, 3, &["x0", "x1", "x0 + x1"]);
        let res = free_resolution(&pres, &[0], true, 10).unwrap();
        assert_eq!(res.complex.betti(), vec![(0, 1), (1, 2), (2, 1)]);
        // No constant entries anywhere in the minimized differentials.
        for i in 1..=2 {
            let d = res.complex.diff(i);
            for r in 0..d.rows() {
                for c in 0..d.cols() {
                    assert!(d.get(r, c).constant_value().is_none());
                }
            }
        }
        let h = res.complex.homology_lengths();
        assert_eq!(h.len(), 1);
        assert_eq!(h[&0], Some(1));
    }

    #[test]
    fn comparison_lift_commutes_with_augmentations() {
        let ring = qring(2);
        let pres_a = mat(&ring, 1, 3, &["x0^2", "x0*x1", "x1^2"]);
        let pres_b = mat(&ring, 1, 2, &["x0", "x1"]);
        let fa = free_resolution(&pres_a, &[0], false, 10).unwrap();
        let fb = free_resolution(&pres_b, &[0], false, 10).unwrap();
        // The identity on ambients induces the projection R/(x0,x1)² → R/(x0,x1).
        let f = RingMatrix::identity(&ring, 1);
        let lift = comparison_lift(&f, &fa, &fb).unwrap();
        // Commutation with augmentations holds modulo im(pres_b).
        let lhs = &fb.augmentation * &lift.component(0);
        let rhs = &f * &fa.augmentation;
        let diff = &lhs - &rhs;
        assert!(lift_matrix(&pres_b, &diff).is_ok());
    }

    #[test]
    fn horseshoe_fills_the_middle() {
        let ring = qring(1);
        let x = "x0";
        // 0 → R/(x)(−1) →x R/(x²) → R/(x) → 0, with the twist recorded by
        // ambient degree 1 on A so every map is degree-preserving.
        let ses = ShortExact {
            pres_a: mat(&ring, 1, 1, &[x]),
            pres_b: mat(&ring, 1, 1, &["x0^2"]),
            pres_c: mat(&ring, 1, 1, &[x]),
            alpha: mat(&ring, 1, 1, &[x]),
            beta: mat(&ring, 1, 1, &["1"]),
        };
        let fa = free_resolution(&ses.pres_a, &[1], false, 10).unwrap();
        let fc = free_resolution(&ses.pres_c, &[0], false, 10).unwrap();
        let fb = horseshoe(&ses, &fa, &fc).unwrap();
        assert_eq!(fb.complex.betti(), vec![(0, 2), (1, 2)]);
        // The middle resolution resolves R/(x²): H_0 of length 2, exact above.
        let h = fb.complex.homology_lengths();
        assert_eq!(h.len(), 1);
        assert_eq!(h[&0], Some(2));
        // The augmentation carries im(d_1) into im(pres_b).
        let reach = &fb.augmentation * &fb.complex.diff(1);
        assert!(lift_matrix(&ses.pres_b, &reach).is_ok());
        // Minimizing recovers the minimal resolution R ←x² R.
        let (small, sdr) = minimize_complex(&fb.complex);
        assert!(sdr.verify());
        assert_eq!(small.betti(), vec![(0, 1), (1, 1)]);
        let top = small.diff(1);
        assert!(top.get(0, 0) == &p(&ring, "x0^2") || top.get(0, 0) == &p(&ring, "-1*x0^2"));
    }

    #[test]
    fn ses_checker_rejects_garbage() {
        let ring = qring(1);
        // β not surjective: "multiplication by x" into R/(x²) misses 1.
        let ses = ShortExact {
            pres_a: mat(&ring, 1, 1, &["x0"]),
            pres_b: mat(&ring, 1, 1, &["x0^2"]),
            pres_c: mat(&ring, 1, 1, &["x0^2"]),
            alpha: mat(&ring, 1, 1, &["x0"]),
            beta: mat(&ring, 1, 1, &["x0"]),
        };
        assert!(ses.check().is_err());
    }
}
