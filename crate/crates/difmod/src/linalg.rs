//! Exact Gaussian elimination over the coefficient field, for constant
//! matrices: rank, kernels, and linear solves.

use crate::coeff_ring::{Field, Scalar};

/// Row-reduces `rows` in place to reduced row echelon form; returns the pivot
/// column of each nonzero row, in order.
pub fn rref(rows: &mut Vec<Vec<Scalar>>) -> Vec<usize> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].inv();
        for x in rows[r].iter_mut() {
            *x = x.mul(&inv);
        }
        for i in 0..nrows {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..ncols {
                    let s = rows[r][j].mul(&f);
                    rows[i][j] = rows[i][j].sub(&s);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(rows: &[Vec<Scalar>]) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m).len()
}

/// Basis of the right kernel {v : M v = 0}, as vectors of length ncols.
pub fn kernel_basis(field: &Field, rows: &[Vec<Scalar>], ncols: usize) -> Vec<Vec<Scalar>> {
    let mut m = rows.to_vec();
    for row in &m {
        assert_eq!(row.len(), ncols);
    }
    let pivots = rref(&mut m);
    let is_pivot: Vec<bool> = {
        let mut v = vec![false; ncols];
        for &p in &pivots {
            v[p] = true;
        }
        v
    };
    let mut basis = Vec::new();
    for free in 0..ncols {
        if is_pivot[free] {
            continue;
        }
        let mut v = vec![field.zero(); ncols];
        v[free] = field.one();
        for (ri, &p) in pivots.iter().enumerate() {
            v[p] = m[ri][free].neg();
        }
        basis.push(v);
    }
    basis
}

/// One exact solution of M x = b, if any.
pub fn solve(field: &Field, rows: &[Vec<Scalar>], b: &[Scalar]) -> Option<Vec<Scalar>> {
    let nrows = rows.len();
    assert_eq!(b.len(), nrows);
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut aug: Vec<Vec<Scalar>> = rows
        .iter()
        .zip(b)
        .map(|(r, x)| {
            let mut row = r.clone();
            row.push(x.clone());
            row
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.last().is_some_and(|&p| p == ncols) {
        return None; // pivot in the constant column: inconsistent
    }
    let mut x = vec![field.zero(); ncols];
    for (ri, &p) in pivots.iter().enumerate() {
        x[p] = aug[ri][ncols].clone();
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Scalar {
        Field::rationals().from_i64(n)
    }

    #[test]
    fn rank_and_kernel() {
        let f = Field::rationals();
        let m = vec![vec![q(1), q(2)], vec![q(2), q(4)]];
        assert_eq!(rank(&m), 1);
        let ker = kernel_basis(&f, &m, 2);
        assert_eq!(ker.len(), 1);
        // (1, 2)·v = 0.
        let v = &ker[0];
        assert!(v[0].add(&v[1].mul(&q(2))).is_zero());
    }

    #[test]
    fn solving() {
        let f = Field::rationals();
        let m = vec![vec![q(1), q(1)], vec![q(0), q(1)]];
        let x = solve(&f, &m, &[q(3), q(1)]).unwrap();
        assert_eq!(x, vec![q(2), q(1)]);
        let none = solve(&f, &vec![vec![q(0), q(0)]], &[q(1)]);
        assert!(none.is_none());
    }
}
