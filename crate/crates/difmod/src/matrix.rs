//! Dense matrices over a polynomial ring. Rows index the target, columns the
//! source, so morphisms compose as matrix products.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::coeff_ring::{Poly, PolyRing, Scalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingMatrix {
    ring: Arc<PolyRing>,
    rows: usize,
    cols: usize,
    // Row-major.
    entries: Vec<Poly>,
}

impl RingMatrix {
    pub fn zero(ring: &Arc<PolyRing>, rows: usize, cols: usize) -> RingMatrix {
        RingMatrix {
            ring: Arc::clone(ring),
            rows,
            cols,
            entries: vec![Poly::zero(ring); rows * cols],
        }
    }

    pub fn identity(ring: &Arc<PolyRing>, n: usize) -> RingMatrix {
        let mut m = RingMatrix::zero(ring, n, n);
        for i in 0..n {
            m.set(i, i, Poly::one(ring));
        }
        m
    }

    pub fn scalar_identity(ring: &Arc<PolyRing>, n: usize, c: &Scalar) -> RingMatrix {
        let mut m = RingMatrix::zero(ring, n, n);
        for i in 0..n {
            m.set(i, i, Poly::constant(ring, c.clone()));
        }
        m
    }

    pub fn from_fn(
        ring: &Arc<PolyRing>,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Poly,
    ) -> RingMatrix {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        RingMatrix {
            ring: Arc::clone(ring),
            rows,
            cols,
            entries,
        }
    }

    pub fn from_rows(ring: &Arc<PolyRing>, rows: Vec<Vec<Poly>>) -> RingMatrix {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        for r in &rows {
            assert_eq!(r.len(), ncols, "ragged rows");
        }
        RingMatrix {
            ring: Arc::clone(ring),
            rows: nrows,
            cols: ncols,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_cols(ring: &Arc<PolyRing>, cols: Vec<Vec<Poly>>) -> RingMatrix {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, |c| c.len());
        RingMatrix::from_fn(ring, nrows, ncols, |r, c| cols[c][r].clone())
    }

    pub fn ring(&self) -> &Arc<PolyRing> {
        &self.ring
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Poly {
        assert!(r < self.rows && c < self.cols, "index out of range");
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Poly) {
        assert!(r < self.rows && c < self.cols, "index out of range");
        self.entries[r * self.cols + c] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|p| p.is_zero())
    }

    pub fn col(&self, c: usize) -> Vec<Poly> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn row(&self, r: usize) -> Vec<Poly> {
        self.entries[r * self.cols..(r + 1) * self.cols].to_vec()
    }

    pub fn transpose(&self) -> RingMatrix {
        RingMatrix::from_fn(&self.ring, self.cols, self.rows, |r, c| self.get(c, r).clone())
    }

    pub fn map(&self, mut f: impl FnMut(&Poly) -> Poly) -> RingMatrix {
        RingMatrix {
            ring: Arc::clone(&self.ring),
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| f(p)).collect(),
        }
    }

    pub fn scale(&self, c: &Scalar) -> RingMatrix {
        self.map(|p| p.scale(c))
    }

    pub fn scale_poly(&self, q: &Poly) -> RingMatrix {
        self.map(|p| p * q)
    }

    /// Matrix-vector product (vector as column).
    pub fn apply(&self, v: &[Poly]) -> Vec<Poly> {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        (0..self.rows)
            .map(|r| {
                let mut acc = Poly::zero(&self.ring);
                for c in 0..self.cols {
                    let e = self.get(r, c);
                    if !e.is_zero() && !v[c].is_zero() {
                        acc = &acc + &(e * &v[c]);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> RingMatrix {
        RingMatrix::from_fn(&self.ring, idx.len(), self.cols, |r, c| {
            self.get(idx[r], c).clone()
        })
    }

    pub fn select_cols(&self, idx: &[usize]) -> RingMatrix {
        RingMatrix::from_fn(&self.ring, self.rows, idx.len(), |r, c| {
            self.get(r, idx[c]).clone()
        })
    }

    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> RingMatrix {
        RingMatrix::from_fn(&self.ring, r1 - r0, c1 - c0, |r, c| {
            self.get(r0 + r, c0 + c).clone()
        })
    }

    /// Stacks blocks; all blocks in a band must agree on row count, all blocks
    /// in a column of the grid on column count.
    pub fn from_blocks(grid: &[Vec<&RingMatrix>]) -> RingMatrix {
        assert!(!grid.is_empty() && !grid[0].is_empty(), "empty block grid");
        let ring = Arc::clone(&grid[0][0].ring);
        let ncols_grid = grid[0].len();
        for band in grid {
            assert_eq!(band.len(), ncols_grid, "ragged block grid");
        }
        let row_sizes: Vec<usize> = grid.iter().map(|band| band[0].rows).collect();
        let col_sizes: Vec<usize> = (0..ncols_grid).map(|c| grid[0][c].cols).collect();
        for (bi, band) in grid.iter().enumerate() {
            for (bj, blk) in band.iter().enumerate() {
                assert_eq!(blk.rows, row_sizes[bi], "block row size mismatch");
                assert_eq!(blk.cols, col_sizes[bj], "block col size mismatch");
            }
        }
        let rows: usize = row_sizes.iter().sum();
        let cols: usize = col_sizes.iter().sum();
        let mut out = RingMatrix::zero(&ring, rows, cols);
        let mut roff = 0;
        for (bi, band) in grid.iter().enumerate() {
            let mut coff = 0;
            for blk in band.iter() {
                for r in 0..blk.rows {
                    for c in 0..blk.cols {
                        out.set(roff + r, coff + c, blk.get(r, c).clone());
                    }
                }
                coff += blk.cols;
            }
            roff += row_sizes[bi];
        }
        out
    }

    pub fn hstack(blocks: &[&RingMatrix]) -> RingMatrix {
        RingMatrix::from_blocks(&[blocks.to_vec()])
    }

    pub fn vstack(blocks: &[&RingMatrix]) -> RingMatrix {
        let grid: Vec<Vec<&RingMatrix>> = blocks.iter().map(|b| vec![*b]).collect();
        RingMatrix::from_blocks(&grid)
    }

    pub fn direct_sum(a: &RingMatrix, b: &RingMatrix) -> RingMatrix {
        let z_ab = RingMatrix::zero(&a.ring, a.rows, b.cols);
        let z_ba = RingMatrix::zero(&a.ring, b.rows, a.cols);
        RingMatrix::from_blocks(&[vec![a, &z_ab], vec![&z_ba, b]])
    }

    /// Kronecker product; block (r,c) of the result is a[r][c] * b.
    pub fn kronecker(a: &RingMatrix, b: &RingMatrix) -> RingMatrix {
        RingMatrix::from_fn(&a.ring, a.rows * b.rows, a.cols * b.cols, |r, c| {
            let (ar, br) = (r / b.rows, r % b.rows);
            let (ac, bc) = (c / b.cols, c % b.cols);
            a.get(ar, ac) * b.get(br, bc)
        })
    }

    /// Checks each entry is zero or homogeneous of degree
    /// col_degree - row_degree + shift.
    pub fn is_degree_homogeneous(
        &self,
        row_degrees: &[i64],
        col_degrees: &[i64],
        shift: i64,
    ) -> bool {
        assert_eq!(row_degrees.len(), self.rows);
        assert_eq!(col_degrees.len(), self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let e = self.get(r, c);
                if !e.is_homogeneous_of(col_degrees[c] - row_degrees[r] + shift) {
                    return false;
                }
            }
        }
        true
    }
}

impl Add for &RingMatrix {
    type Output = RingMatrix;
    fn add(self, rhs: &RingMatrix) -> RingMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        RingMatrix {
            ring: Arc::clone(&self.ring),
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &RingMatrix {
    type Output = RingMatrix;
    fn sub(self, rhs: &RingMatrix) -> RingMatrix {
        self + &(-rhs)
    }
}

impl Neg for &RingMatrix {
    type Output = RingMatrix;
    fn neg(self) -> RingMatrix {
        self.map(|p| -p)
    }
}

impl Mul for &RingMatrix {
    type Output = RingMatrix;
    fn mul(self, rhs: &RingMatrix) -> RingMatrix {
        assert_eq!(self.cols, rhs.rows, "composition shape mismatch");
        RingMatrix::from_fn(&self.ring, self.rows, rhs.cols, |r, c| {
            let mut acc = Poly::zero(&self.ring);
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                let b = rhs.get(k, c);
                if b.is_zero() {
                    continue;
                }
                acc = &acc + &(a * b);
            }
            acc
        })
    }
}

impl fmt::Display for RingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}x{}]", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff_ring::{Field, MonomialOrder};

    fn ring() -> Arc<PolyRing> {
        PolyRing::new(Field::rationals(), 2, MonomialOrder::Grevlex)
    }

    #[test]
    fn mul_identity() {
        let r = ring();
        let x = Poly::var(&r, 0);
        let y = Poly::var(&r, 1);
        let m = RingMatrix::from_rows(&r, vec![vec![x.clone(), y.clone()], vec![y, x]]);
        let id = RingMatrix::identity(&r, 2);
        assert_eq!(&m * &id, m);
        assert_eq!(&id * &m, m);
    }

    #[test]
    fn koszul_square_zero() {
        let r = ring();
        let x = Poly::var(&r, 0);
        let y = Poly::var(&r, 1);
        // Koszul complex on (x, y): d1 = [x y], d2 = [-y; x].
        let d1 = RingMatrix::from_rows(&r, vec![vec![x.clone(), y.clone()]]);
        let d2 = RingMatrix::from_rows(&r, vec![vec![-&y], vec![x]]);
        assert!((&d1 * &d2).is_zero());
    }

    #[test]
    fn blocks_and_slices() {
        let r = ring();
        let a = RingMatrix::identity(&r, 2);
        let b = RingMatrix::zero(&r, 2, 1);
        let m = RingMatrix::hstack(&[&a, &b]);
        assert_eq!(m.cols(), 3);
        assert_eq!(m.submatrix(0, 2, 0, 2), a);
        let s = RingMatrix::direct_sum(&a, &a);
        assert_eq!(s.rows(), 4);
        assert!(s.get(0, 0).is_one() && s.get(3, 3).is_one());
    }

    #[test]
    fn homogeneity() {
        let r = ring();
        let x = Poly::var(&r, 0);
        // deg source gen = 1, deg target gen = 0, map = multiplication by x.
        let m = RingMatrix::from_rows(&r, vec![vec![x]]);
        assert!(m.is_degree_homogeneous(&[0], &[1], 0));
        assert!(!m.is_degree_homogeneous(&[0], &[0], 0));
        assert!(m.is_degree_homogeneous(&[0], &[0], 1));
    }

    #[test]
    fn kronecker_shapes() {
        let r = ring();
        let x = Poly::var(&r, 0);
        let a = RingMatrix::from_rows(&r, vec![vec![x.clone()]]);
        let b = RingMatrix::identity(&r, 2);
        let k = RingMatrix::kronecker(&a, &b);
        assert_eq!((k.rows(), k.cols()), (2, 2));
        assert_eq!(*k.get(0, 0), x);
        assert!(k.get(0, 1).is_zero());
    }
}
