//! Compressed sparse rows, reverse Cuthill–McKee ordering and an envelope
//! Cholesky factorization for the interior stiffness block.

use std::collections::VecDeque;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix, summing duplicates in insertion order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().expect("entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Principal submatrix on `idx` (in that order).
    pub fn submatrix(&self, idx: &[usize]) -> CsrMatrix {
        let mut local = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            local[i] = k;
        }
        let mut trip = Vec::new();
        for (k, &i) in idx.iter().enumerate() {
            for (j, v) in self.row(i) {
                if local[j] != usize::MAX {
                    trip.push((k, local[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(idx.len(), trip)
    }
}

/// `perm[new] = old`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    pub perm: Vec<usize>,
    pub inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
            inverse: (0..n).collect(),
        }
    }

    fn from_order(perm: Vec<usize>) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        Self { perm, inverse }
    }
}

fn bfs_levels(a: &CsrMatrix, start: usize, seen: &mut [bool]) -> Vec<Vec<usize>> {
    let mut levels = vec![vec![start]];
    seen[start] = true;
    loop {
        let mut next = Vec::new();
        for &v in levels.last().expect("level") {
            for (u, _) in a.row(v) {
                if !seen[u] {
                    seen[u] = true;
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

/// Reverse Cuthill–McKee on the pattern of a structurally symmetric matrix,
/// each component started from a pseudo-peripheral node.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Permutation {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row_ptr[i + 1] - a.row_ptr[i]).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let seed = (0..n).filter(|&i| !placed[i]).min_by_key(|&i| (degree[i], i)).expect("unplaced node");
        // pseudo-peripheral search
        let mut start = seed;
        let mut depth = 0;
        for _ in 0..8 {
            let mut seen = placed.clone();
            let levels = bfs_levels(a, start, &mut seen);
            let far = levels.last().expect("level").iter().copied().min_by_key(|&i| (degree[i], i)).expect("node");
            if levels.len() <= depth {
                break;
            }
            depth = levels.len();
            start = far;
        }
        let mut queue = VecDeque::from([start]);
        placed[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = a.row(v).map(|(u, _)| u).filter(|&u| !placed[u]).collect();
            nb.sort_by_key(|&u| (degree[u], u));
            for u in nb {
                placed[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    Permutation::from_order(order)
}

/// Row-envelope Cholesky factor `L` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let first: Vec<usize> = (0..n).map(|i| a.row(i).map(|(j, _)| j).min().unwrap_or(i).min(i)).collect();
        let mut offset = vec![0; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[offset[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let ri = offset[i];
                let rj = offset[j];
                let mut s = data[ri + j - fi];
                for k in lo..j {
                    s -= data[ri + k - fi] * data[rj + k - fj];
                }
                if j < i {
                    data[ri + j - fi] = s / data[rj + j - fj];
                } else {
                    if !(s > 0.0) {
                        return Err(Error::Factorization(format!("pivot {i} is {s:e}; matrix not positive definite")));
                    }
                    data[ri + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self { n, first, offset, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.offset[i]..self.offset[i + 1]]
    }

    /// Solves `L y = b` in place; entries of `b` before `start` must be zero.
    /// Returns the index of the first entry of `y` that may be nonzero.
    pub fn forward_in_place(&self, b: &mut [f64], start: usize) -> usize {
        for i in start..self.n {
            let fi = self.first[i];
            let row = self.row(i);
            let lo = fi.max(start);
            let mut s = b[i];
            for k in lo..i {
                s -= row[k - fi] * b[k];
            }
            b[i] = s / row[i - fi];
        }
        start
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            y[i] /= row[i - fi];
            let xi = y[i];
            for k in fi..i {
                y[k] -= row[k - fi] * xi;
            }
        }
    }
}

/// Envelope Cholesky of `P A Pᵀ` with an RCM permutation `P`.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    pub perm: Permutation,
    pub factor: EnvelopeCholesky,
}

impl SparseCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        let pa = a.submatrix(&perm.perm);
        let factor = EnvelopeCholesky::factor(&pa)?;
        Ok(Self { perm, factor })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.perm.iter().map(|&old| b[old]).collect();
        self.factor.forward_in_place(&mut y, 0);
        self.factor.backward_in_place(&mut y);
        let mut x = vec![0.0; b.len()];
        for (new, &old) in self.perm.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_grid(m: usize) -> CsrMatrix {
        let idx = |i: usize, j: usize| i * m + j;
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..m {
                t.push((idx(i, j), idx(i, j), 4.0));
                if i + 1 < m {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                    t.push((idx(i + 1, j), idx(i, j), -1.0));
                }
                if j + 1 < m {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                    t.push((idx(i, j + 1), idx(i, j), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m * m, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 0.5), (0, 1, 2.0)]);
        assert_eq!(a.get(0, 0), 1.5);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.5, 2.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn rcm_is_a_permutation_and_shrinks_the_envelope() {
        let a = laplacian_grid(12);
        // scramble the numbering first
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut order: Vec<usize> = (0..a.n).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let scrambled = a.submatrix(&order);
        let p = reverse_cuthill_mckee(&scrambled);
        let mut sorted = p.perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..a.n).collect::<Vec<_>>());
        let before = EnvelopeCholesky::factor(&scrambled).unwrap().envelope_size();
        let after = EnvelopeCholesky::factor(&scrambled.submatrix(&p.perm)).unwrap().envelope_size();
        assert!(after * 3 < before, "{after} vs {before}");
    }

    #[test]
    fn solve_matches_residual() {
        let a = laplacian_grid(15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b: Vec<f64> = (0..a.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = SparseCholesky::new(&a).unwrap().solve(&b);
        let r = a.mul_vec(&x);
        let res = r.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(res < 1e-12);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::Factorization(_))));
    }

    #[test]
    fn forward_with_leading_zeros() {
        let a = laplacian_grid(6);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        let mut b = vec![0.0; a.n];
        b[20] = 1.0;
        let mut c = b.clone();
        f.forward_in_place(&mut b, 20);
        f.forward_in_place(&mut c, 0);
        assert_eq!(b, c);
    }
}
