//! Packed bit vectors and Gaussian elimination over Z/2.

use serde::{Serialize, Serializer};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for BitVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.ones().collect::<Vec<_>>())
    }
}

impl Serialize for BitVec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.ones())
    }
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_ones(len: usize, ones: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(len);
        for k in ones {
            v.flip(k);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, k: usize) -> bool {
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, k: usize, b: bool) {
        if self.get(k) != b {
            self.flip(k);
        }
    }

    pub fn flip(&mut self, k: usize) {
        self.words[k / 64] ^= 1 << (k % 64);
    }

    pub fn xor(&mut self, o: &BitVec) {
        debug_assert_eq!(self.len, o.len);
        for (a, b) in self.words.iter_mut().zip(&o.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words.iter().enumerate().find(|(_, &w)| w != 0).map(|(i, w)| 64 * i + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(64 * i + b)
            })
        })
    }
}

/// Dense matrix over Z/2 stored by columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Gf2Matrix {
    pub rows: usize,
    pub cols: Vec<BitVec>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Gf2Matrix { rows, cols: vec![BitVec::zeros(rows); cols] }
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.cols[c].get(r)
    }

    pub fn rank(&self) -> usize {
        rank(self.cols.iter().cloned())
    }

    /// Rows as 0/1 lists, for reporting.
    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|r| self.cols.iter().map(|c| c.get(r) as u8).collect()).collect()
    }

    pub fn mul(&self, o: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.ncols(), o.rows);
        let cols = o
            .cols
            .iter()
            .map(|c| {
                let mut v = BitVec::zeros(self.rows);
                for k in c.ones() {
                    v.xor(&self.cols[k]);
                }
                v
            })
            .collect();
        Gf2Matrix { rows: self.rows, cols }
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(|c| c.is_zero())
    }
}

/// Rank of a family of vectors.
pub fn rank(vs: impl IntoIterator<Item = BitVec>) -> usize {
    let mut e = Echelon::default();
    vs.into_iter().filter(|v| e.insert(v.clone(), None)).count()
}

/// Incremental echelon form with pivot-ordered reduction. Rows may carry a
/// combination vector recording which inserted generators they came from.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    rows: Vec<(usize, BitVec, Option<BitVec>)>,
}

impl Echelon {
    /// Reduce `v` (and its tag) by all rows.
    pub fn reduce(&self, v: &mut BitVec, mut tag: Option<&mut BitVec>) {
        for (p, row, t) in &self.rows {
            if v.get(*p) {
                v.xor(row);
                if let (Some(tag), Some(t)) = (tag.as_deref_mut(), t) {
                    tag.xor(t);
                }
            }
        }
    }

    /// Insert a vector; returns whether it was independent.
    pub fn insert(&mut self, mut v: BitVec, mut tag: Option<BitVec>) -> bool {
        self.reduce(&mut v, tag.as_mut());
        match v.first_one() {
            Some(p) => {
                self.rows.push((p, v, tag));
                true
            }
            None => false,
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }
}

/// Coordinates in `span(basis)` modulo `span(relations)`.
#[derive(Clone, Debug)]
pub struct QuotientSolver {
    len: usize,
    dim: usize,
    relations: Echelon,
    basis: Echelon,
}

impl QuotientSolver {
    /// `basis` must be independent modulo `relations`.
    pub fn new(len: usize, relations: &[BitVec], basis: &[BitVec]) -> Option<Self> {
        let mut rel = Echelon::default();
        for r in relations {
            rel.insert(r.clone(), None);
        }
        let mut b = Echelon::default();
        for (k, v) in basis.iter().enumerate() {
            let mut v = v.clone();
            rel.reduce(&mut v, None);
            if !b.insert(v, Some(BitVec::from_ones(basis.len(), [k]))) {
                return None;
            }
        }
        Some(QuotientSolver { len, dim: basis.len(), relations: rel, basis: b })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coefficients of `v`, or `None` if `v` is outside the span.
    pub fn coords(&self, v: &BitVec) -> Option<BitVec> {
        assert_eq!(v.len(), self.len);
        let mut v = v.clone();
        self.relations.reduce(&mut v, None);
        let mut tag = BitVec::zeros(self.dim);
        self.basis.reduce(&mut v, Some(&mut tag));
        v.is_zero().then_some(tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_ops() {
        let mut v = BitVec::zeros(130);
        v.flip(3);
        v.flip(129);
        assert_eq!(v.ones().collect::<Vec<_>>(), vec![3, 129]);
        assert_eq!(v.first_one(), Some(3));
        assert_eq!(v.count_ones(), 2);
        let w = BitVec::from_ones(130, [3, 64]);
        v.xor(&w);
        assert_eq!(v.ones().collect::<Vec<_>>(), vec![64, 129]);
    }

    #[test]
    fn rank_and_quotient() {
        let a = BitVec::from_ones(4, [0, 1]);
        let b = BitVec::from_ones(4, [1, 2]);
        let c = BitVec::from_ones(4, [0, 2]);
        assert_eq!(rank([a.clone(), b.clone(), c.clone()]), 2);
        let q = QuotientSolver::new(4, std::slice::from_ref(&a), &[b.clone(), BitVec::from_ones(4, [3])]).unwrap();
        assert_eq!(q.coords(&c).unwrap(), BitVec::from_ones(2, [0]));
        assert_eq!(q.coords(&BitVec::from_ones(4, [0, 1, 3])).unwrap(), BitVec::from_ones(2, [1]));
        assert!(QuotientSolver::new(4, &[a], &[b, c]).is_none());
    }
}
