//! Minimal CSR matrix, just enough for assembly, matvec, and residual checks.

/// Compressed sparse row matrix. Square, with explicitly stored zeros allowed
/// so that matrices sharing a stencil also share a sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from (row, col, value) triplets. Duplicate entries are summed.
    /// Sorting happens here, so callers may emit triplets in any order and
    /// still get a deterministic matrix.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        for &(r, c, _) in &triplets {
            assert!(r < dim && c < dim, "triplet index out of bounds");
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if prev == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] = col_idx.len();
                prev = Some((r, c));
            }
            row_ptr[r + 1] = col_idx.len();
        }
        // rows with no entries inherit the running offset
        for r in 1..=dim {
            row_ptr[r] = row_ptr[r].max(row_ptr[r - 1]);
        }
        Csr { dim, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec(x, &mut y);
        y
    }

    /// self + scale * other, merging sparsity patterns.
    pub fn add_scaled(&self, other: &Csr, scale: f64) -> Csr {
        assert_eq!(self.dim, other.dim);
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        for r in 0..self.dim {
            let mut a = self.row(r).peekable();
            let mut b = other.row(r).peekable();
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (Some((ca, va)), Some((cb, vb))) => {
                        if ca < cb {
                            col_idx.push(ca);
                            values.push(va);
                            a.next();
                        } else if cb < ca {
                            col_idx.push(cb);
                            values.push(scale * vb);
                            b.next();
                        } else {
                            col_idx.push(ca);
                            values.push(va + scale * vb);
                            a.next();
                            b.next();
                        }
                    }
                    (Some((ca, va)), None) => {
                        col_idx.push(ca);
                        values.push(va);
                        a.next();
                    }
                    (None, Some((cb, vb))) => {
                        col_idx.push(cb);
                        values.push(scale * vb);
                        b.next();
                    }
                    (None, None) => break,
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        Csr { dim: self.dim, row_ptr, col_idx, values }
    }

    /// Exact structural and numerical symmetry. Assembly order is
    /// deterministic, so symmetric inputs must produce bitwise-equal
    /// transposed entries.
    pub fn is_symmetric(&self) -> bool {
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                if self.get(c, r) != v {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                out[r][c] += v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_assembly_sums_duplicates() {
        let m = Csr::from_triplets(3, vec![(0, 1, 2.0), (0, 1, 3.0), (2, 0, 1.0), (1, 1, 4.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.get(1, 1), 4.0);
        assert_eq!(m.get(2, 0), 1.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let m = Csr::from_triplets(
            3,
            vec![(0, 0, 2.0), (0, 2, -1.0), (1, 1, 3.0), (2, 0, 0.5), (2, 2, 1.5)],
        );
        let x = [1.0, 2.0, 3.0];
        let y = m.matvec_alloc(&x);
        assert_eq!(y, vec![2.0 - 3.0, 6.0, 0.5 + 4.5]);
    }

    #[test]
    fn add_scaled_merges_patterns() {
        let a = Csr::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 2.0)]);
        let b = Csr::from_triplets(2, vec![(0, 1, 4.0), (1, 1, 1.0)]);
        let s = a.add_scaled(&b, 0.5);
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.get(1, 1), 2.5);
        assert_eq!(s.nnz(), 3);
    }

    #[test]
    fn empty_rows_are_handled() {
        let m = Csr::from_triplets(4, vec![(3, 3, 1.0)]);
        let y = m.matvec_alloc(&[1.0, 1.0, 1.0, 2.0]);
        assert_eq!(y, vec![0.0, 0.0, 0.0, 2.0]);
    }
}
