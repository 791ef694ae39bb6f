//! Bit-packed vectors and matrices over GF(2).

use std::fmt::Write as _;

use crate::error::{Error, Result};

const WORD: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// Fixed-length GF(2) vector. Bits past `len` in the last word stay zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(i, true);
        v
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn from_support(len: usize, ones: &[usize]) -> Self {
        let mut v = Self::zeros(len);
        for &i in ones {
            v.set(i, true);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, b: bool) {
        assert!(i < self.len, "bit {i} out of {}", self.len);
        let mask = 1u64 << (i % WORD);
        if b {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of {}", self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &BitVector) -> bool {
        assert_eq!(self.len, other.len);
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones % 2 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn ones(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i)).collect()
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }
}

/// Dense GF(2) matrix stored row-major, `stride` words per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// All rows must share one length; an empty list gives a 0×0 matrix.
    pub fn from_rows(rows: &[BitVector]) -> Result<Self> {
        let cols = rows.first().map_or(0, BitVector::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "row of length {} in a matrix with {cols} columns",
                bad.len()
            )));
        }
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            m.row_words_mut(r).copy_from_slice(&row.words);
        }
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<bool>]) -> Result<Self> {
        let vs: Vec<BitVector> = rows.iter().map(|r| BitVector::from_bits(r)).collect();
        Self::from_rows(&vs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    fn row_words_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(
            r < self.rows && c < self.cols,
            "({r}, {c}) outside {}×{}",
            self.rows,
            self.cols
        );
        (self.data[r * self.stride + c / WORD] >> (c % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, b: bool) {
        assert!(
            r < self.rows && c < self.cols,
            "({r}, {c}) outside {}×{}",
            self.rows,
            self.cols
        );
        let w = &mut self.data[r * self.stride + c / WORD];
        let mask = 1u64 << (c % WORD);
        if b {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn row(&self, r: usize) -> BitVector {
        BitVector {
            len: self.cols,
            words: self.row_words(r).to_vec(),
        }
    }

    pub fn column(&self, c: usize) -> BitVector {
        let mut v = BitVector::zeros(self.rows);
        for r in 0..self.rows {
            v.set(r, self.get(r, c));
        }
        v
    }

    /// Column indices of the ones in row `r`.
    pub fn row_support(&self, r: usize) -> Vec<usize> {
        self.row(r).ones()
    }

    /// Submatrix keeping the listed columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> BitMatrix {
        let mut m = BitMatrix::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (i, &c) in cols.iter().enumerate() {
                if self.get(r, c) {
                    m.set(r, i, true);
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &BitVector) -> Result<BitVector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        let mut out = BitVector::zeros(self.rows);
        for r in 0..self.rows {
            let ones: u32 = self
                .row_words(r)
                .iter()
                .zip(&x.words)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            out.set(r, ones % 2 == 1);
        }
        Ok(out)
    }

    /// Row `dst` ← row `dst` + row `src`.
    fn add_row(&mut self, src: usize, dst: usize) {
        debug_assert_ne!(src, dst);
        let s = self.stride;
        let (a, b) = if src < dst {
            let (lo, hi) = self.data.split_at_mut(dst * s);
            (&lo[src * s..(src + 1) * s], &mut hi[..s])
        } else {
            let (lo, hi) = self.data.split_at_mut(src * s);
            (&hi[..s] as &[u64], &mut lo[dst * s..(dst + 1) * s])
        };
        for (d, x) in b.iter_mut().zip(a) {
            *d ^= x;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.stride {
            self.data.swap(a * self.stride + w, b * self.stride + w);
        }
    }

    /// Reduced row echelon form in place; returns the pivot column of each
    /// nonzero row, in row order.
    fn reduce(&mut self, col_limit: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..col_limit {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self.get(i, c)) else {
                continue;
            };
            self.swap_rows(r, p);
            for i in 0..self.rows {
                if i != r && self.get(i, c) {
                    self.add_row(r, i);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    /// One line per row listing the column indices of its ones, after a
    /// header line with the dimensions.
    pub fn to_index_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            let idx: Vec<String> = self.row_support(r).iter().map(usize::to_string).collect();
            let _ = writeln!(s, "{}", idx.join(" "));
        }
        s
    }

    pub fn from_index_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty matrix text"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("bad header {header:?}: {e}")))?;
        let [rows, cols] = dims[..] else {
            return Err(Error::invalid(format!("bad header {header:?}")));
        };
        let mut m = BitMatrix::zeros(rows, cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::invalid(format!("missing row {r}")))?;
            for tok in line.split_whitespace() {
                let c: usize = tok
                    .parse()
                    .map_err(|e| Error::invalid(format!("row {r}: {tok:?}: {e}")))?;
                if c >= cols {
                    return Err(Error::invalid(format!("row {r}: column {c} ≥ {cols}")));
                }
                m.set(r, c, true);
            }
        }
        Ok(m)
    }
}

pub fn f2_rank(m: &BitMatrix) -> usize {
    let mut work = m.clone();
    work.reduce(m.cols()).len()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    /// A particular solution, free variables set to zero.
    Solved(BitVector),
    Inconsistent,
}

impl SolveOutcome {
    pub fn is_solved(&self) -> bool {
        matches!(self, SolveOutcome::Solved(_))
    }
}

/// Solves `m x = rhs` over GF(2) by eliminating the augmented matrix.
pub fn f2_solve(m: &BitMatrix, rhs: &BitVector) -> Result<SolveOutcome> {
    if rhs.len() != m.rows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} against {} rows",
            rhs.len(),
            m.rows()
        )));
    }
    let n = m.cols();
    let mut aug = BitMatrix::zeros(m.rows(), n + 1);
    for r in 0..m.rows() {
        for c in m.row_support(r) {
            aug.set(r, c, true);
        }
        aug.set(r, n, rhs.get(r));
    }
    let pivots = aug.reduce(n);
    // Rows past the pivots have a zero coefficient part.
    if (pivots.len()..aug.rows()).any(|r| aug.get(r, n)) {
        return Ok(SolveOutcome::Inconsistent);
    }
    let mut x = BitVector::zeros(n);
    for (r, &c) in pivots.iter().enumerate() {
        x.set(c, aug.get(r, n));
    }
    assert_eq!(m.mul_vec(&x)?, *rhs, "elimination produced a non-solution");
    Ok(SolveOutcome::Solved(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    use crate::rng::SeedPath;

    fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> BitMatrix {
        let mut m = BitMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, rng.random());
            }
        }
        m
    }

    /// Size of the row space by closing the set of row combinations.
    fn brute_rank(m: &BitMatrix) -> usize {
        let rows: Vec<u64> = (0..m.rows())
            .map(|r| m.row_support(r).iter().fold(0u64, |w, &c| w | 1 << c))
            .collect();
        let mut span = std::collections::HashSet::from([0u64]);
        for row in rows {
            let extra: Vec<u64> = span.iter().map(|v| v ^ row).collect();
            span.extend(extra);
        }
        span.len().trailing_zeros() as usize
    }

    #[test]
    fn identity_has_full_rank() {
        for n in [1, 5, 64, 65, 130] {
            assert_eq!(f2_rank(&BitMatrix::identity(n)), n);
        }
    }

    #[test]
    fn zero_system() {
        let m = BitMatrix::zeros(4, 7);
        assert_eq!(f2_rank(&m), 0);
        assert_eq!(
            f2_solve(&m, &BitVector::zeros(4)).unwrap(),
            SolveOutcome::Solved(BitVector::zeros(7))
        );
        assert_eq!(
            f2_solve(&m, &BitVector::unit(4, 2)).unwrap(),
            SolveOutcome::Inconsistent
        );
    }

    #[test]
    fn rank_matches_row_space_enumeration() {
        let mut rng = SeedPath::new(11).rng();
        for _ in 0..10 {
            let rows = rng.random_range(1..=20);
            let cols = rng.random_range(1..=12);
            let m = random_matrix(rows, cols, &mut rng);
            assert_eq!(f2_rank(&m), brute_rank(&m));
        }
        // The 20×30 shape from the contract, checked against the transpose's rank.
        for _ in 0..10 {
            let m = random_matrix(20, 30, &mut rng);
            let mut t = BitMatrix::zeros(30, 20);
            for r in 0..20 {
                for c in m.row_support(r) {
                    t.set(c, r, true);
                }
            }
            assert_eq!(f2_rank(&m), f2_rank(&t));
        }
    }

    #[test]
    fn index_text_round_trips() {
        let mut rng = SeedPath::new(3).rng();
        let m = random_matrix(5, 70, &mut rng);
        let text = m.to_index_text();
        assert!(text.starts_with("5 70\n"));
        assert_eq!(BitMatrix::from_index_text(&text).unwrap(), m);
        assert!(BitMatrix::from_index_text("1 3\n0 3\n").is_err());
    }

    #[test]
    fn select_columns_reorders() {
        let m = BitMatrix::from_dense(&[vec![true, false, true], vec![false, true, true]]).unwrap();
        let s = m.select_columns(&[2, 0]);
        assert_eq!(s.column(0), m.column(2));
        assert_eq!(s.column(1), m.column(0));
        assert!(BitMatrix::from_dense(&[vec![true], vec![true, false]]).is_err());
    }

    proptest! {
        #[test]
        fn solve_agrees_with_rank_test(seed in any::<u64>(), rows in 1usize..12, cols in 1usize..80) {
            let mut rng = SeedPath::new(seed).rng();
            let m = random_matrix(rows, cols, &mut rng);
            let rhs = BitVector::from_bits(&(0..rows).map(|_| rng.random()).collect::<Vec<bool>>());
            // Consistent iff appending rhs as a column leaves the rank unchanged.
            let mut aug = BitMatrix::zeros(rows, cols + 1);
            for r in 0..rows {
                for c in m.row_support(r) {
                    aug.set(r, c, true);
                }
                aug.set(r, cols, rhs.get(r));
            }
            let consistent = f2_rank(&aug) == f2_rank(&m);
            prop_assert_eq!(f2_solve(&m, &rhs).unwrap().is_solved(), consistent);
        }

        #[test]
        fn row_operations_preserve_rank(seed in any::<u64>(), rows in 2usize..10, cols in 1usize..70) {
            let mut rng = SeedPath::new(seed).rng();
            let mut m = random_matrix(rows, cols, &mut rng);
            let before = f2_rank(&m);
            let (a, b) = (rng.random_range(0..rows), rng.random_range(0..rows));
            if a != b {
                m.add_row(a, b);
            }
            m.swap_rows(0, rows - 1);
            prop_assert_eq!(f2_rank(&m), before);
        }

        #[test]
        fn mul_vec_is_linear(seed in any::<u64>(), rows in 1usize..10, cols in 1usize..130) {
            let mut rng = SeedPath::new(seed).rng();
            let m = random_matrix(rows, cols, &mut rng);
            let x = BitVector::from_bits(&(0..cols).map(|_| rng.random()).collect::<Vec<bool>>());
            let y = BitVector::from_bits(&(0..cols).map(|_| rng.random()).collect::<Vec<bool>>());
            let mut s = x.clone();
            s.xor_assign(&y);
            let mut want = m.mul_vec(&x).unwrap();
            want.xor_assign(&m.mul_vec(&y).unwrap());
            prop_assert_eq!(m.mul_vec(&s).unwrap(), want);
        }
    }
}
