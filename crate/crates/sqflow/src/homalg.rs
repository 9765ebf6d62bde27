//! Exact cochain algebra: sparse Gauss elimination on unit entries with the
//! chain maps it induces, Smith normal form, integral and mod-2 cohomology
//! with explicit cocycle bases, and the Bockstein `Sq^1`.

use crate::flowcat::Bucket;
use crate::gf2::{BitVec, Gf2Matrix, QuotientSolver};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustc_hash::FxHashMap;
use serde::Serialize;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HomalgError {
    #[error("d^2 != 0 at degree {0}")]
    NotAComplex(usize),
    #[error("integer overflow during elimination")]
    Overflow,
    #[error("universal coefficients violated at degree {0}")]
    UniversalCoefficients(usize),
    #[error("vector at degree {0} is not a mod-2 cocycle")]
    NotACocycle(usize),
}

/// Cochain complex in one quantum degree. Degree `k` is internal degree
/// `t0 + k`; `d[k]` maps degree `k` to `k + 1` as `(row, col, value)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cochains {
    pub t0: i32,
    pub dims: Vec<usize>,
    pub d: Vec<Vec<(u32, u32, i64)>>,
}

impl Cochains {
    /// Cochains of a bucket, with the object ids of every degree.
    pub fn from_bucket(b: &Bucket) -> (Self, Vec<Vec<u32>>) {
        if b.is_empty() {
            return (Cochains { t0: 0, dims: vec![], d: vec![] }, vec![]);
        }
        let t0 = (0..b.len() as u32).map(|x| b.t(x)).min().unwrap();
        let t1 = (0..b.len() as u32).map(|x| b.t(x)).max().unwrap();
        let len = (t1 - t0 + 1) as usize;
        let mut gens = vec![vec![]; len];
        let mut local = vec![0u32; b.len()];
        for x in 0..b.len() as u32 {
            let k = (b.t(x) - t0) as usize;
            local[x as usize] = gens[k].len() as u32;
            gens[k].push(x);
        }
        let mut d = vec![vec![]; len.saturating_sub(1)];
        for (y, x, c) in b.differential() {
            let k = (b.t(x) - t0) as usize;
            d[k].push((local[y as usize], local[x as usize], c));
        }
        for m in &mut d {
            m.sort_unstable();
        }
        let dims = gens.iter().map(|g| g.len()).collect();
        (Cochains { t0, dims, d }, gens)
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Verify `d[k+1] * d[k] = 0`.
    pub fn check_d_squared(&self) -> Result<(), HomalgError> {
        for k in 0..self.d.len().saturating_sub(1) {
            let mut by_row: FxHashMap<u32, Vec<(u32, i64)>> = FxHashMap::default();
            for &(y, x, c) in &self.d[k] {
                by_row.entry(x).or_default().push((y, c));
            }
            let mut next: FxHashMap<u32, Vec<(u32, i64)>> = FxHashMap::default();
            for &(z, y, c) in &self.d[k + 1] {
                next.entry(y).or_default().push((z, c));
            }
            for ys in by_row.values() {
                let mut acc: FxHashMap<u32, i64> = FxHashMap::default();
                for &(y, c) in ys {
                    for &(z, c2) in next.get(&y).map(|v| v.as_slice()).unwrap_or(&[]) {
                        *acc.entry(z).or_insert(0) += c * c2;
                    }
                }
                if acc.values().any(|&v| v != 0) {
                    return Err(HomalgError::NotAComplex(k));
                }
            }
        }
        Ok(())
    }

    /// Euler characteristic `sum (-1)^(t0+k) dim`.
    pub fn euler(&self) -> i64 {
        self.dims.iter().enumerate().map(|(k, &n)| if (self.t0 as i64 + k as i64) % 2 == 0 { n as i64 } else { -(n as i64) }).sum()
    }
}

/// One elimination of a unit entry `d(a)[b]` with `a` in degree `k`.
#[derive(Clone, Debug)]
struct Elimination {
    k: usize,
    a: u32,
    b: u32,
    /// Column of `a` without `b`.
    gamma: Vec<(u32, i64)>,
    /// Row of `b` without `a`.
    rho: Vec<(u32, i64)>,
}

/// A complex chain-equivalent to the input, with the maps `f: full -> reduced`
/// and `g: reduced -> full` recorded elimination by elimination.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub full_dims: Vec<usize>,
    pub reduced: DenseComplex,
    steps: Vec<Elimination>,
    /// Surviving full-complex generators of every degree.
    survivors: Vec<Vec<u32>>,
}

/// Small cochain complex with dense integer differentials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseComplex {
    pub t0: i32,
    pub dims: Vec<usize>,
    /// `d[k][row][col]`.
    pub d: Vec<Vec<Vec<i64>>>,
}

fn checked(v: Option<i64>) -> Result<i64, HomalgError> {
    v.ok_or(HomalgError::Overflow)
}

/// Sparse matrix with row and column access.
#[derive(Clone, Debug, Default)]
struct Sparse {
    rows: Vec<FxHashMap<u32, i64>>,
    cols: Vec<FxHashMap<u32, i64>>,
}

impl Sparse {
    fn new(nrows: usize, ncols: usize, entries: &[(u32, u32, i64)]) -> Self {
        let mut s = Sparse { rows: vec![FxHashMap::default(); nrows], cols: vec![FxHashMap::default(); ncols] };
        for &(r, c, v) in entries {
            if v != 0 {
                s.rows[r as usize].insert(c, v);
                s.cols[c as usize].insert(r, v);
            }
        }
        s
    }

    fn get(&self, r: u32, c: u32) -> i64 {
        self.rows[r as usize].get(&c).copied().unwrap_or(0)
    }

    fn set(&mut self, r: u32, c: u32, v: i64) {
        if v == 0 {
            self.rows[r as usize].remove(&c);
            self.cols[c as usize].remove(&r);
        } else {
            self.rows[r as usize].insert(c, v);
            self.cols[c as usize].insert(r, v);
        }
    }

    fn clear_row(&mut self, r: u32) {
        for (c, _) in std::mem::take(&mut self.rows[r as usize]) {
            self.cols[c as usize].remove(&r);
        }
    }

    fn clear_col(&mut self, c: u32) {
        for (r, _) in std::mem::take(&mut self.cols[c as usize]) {
            self.rows[r as usize].remove(&c);
        }
    }

    fn cost(&self, r: u32, c: u32) -> usize {
        (self.rows[r as usize].len() - 1) * (self.cols[c as usize].len() - 1)
    }
}

impl Reduction {
    /// No elimination: the reduced complex is the input itself.
    pub fn identity(c: &Cochains) -> Self {
        let survivors = c.dims.iter().map(|&n| (0..n as u32).collect()).collect();
        let d = (0..c.d.len())
            .map(|k| {
                let mut m = vec![vec![0i64; c.dims[k]]; c.dims[k + 1]];
                for &(y, x, v) in &c.d[k] {
                    m[y as usize][x as usize] = v;
                }
                m
            })
            .collect();
        Reduction {
            full_dims: c.dims.clone(),
            reduced: DenseComplex { t0: c.t0, dims: c.dims.clone(), d },
            steps: vec![],
            survivors,
        }
    }

    /// Eliminate unit entries greedily by Markowitz cost.
    pub fn eliminate(c: &Cochains) -> Result<Self, HomalgError> {
        let len = c.len();
        let mut mats: Vec<Sparse> = (0..c.d.len()).map(|k| Sparse::new(c.dims[k + 1], c.dims[k], &c.d[k])).collect();
        let mut alive: Vec<Vec<bool>> = c.dims.iter().map(|&n| vec![true; n]).collect();
        let mut heap = BinaryHeap::new();
        for (k, m) in mats.iter().enumerate() {
            for (b, row) in m.rows.iter().enumerate() {
                for (&a, &v) in row {
                    if v.abs() == 1 {
                        heap.push(Reverse((m.cost(b as u32, a), k, a, b as u32)));
                    }
                }
            }
        }
        let mut steps = vec![];
        while let Some(Reverse((cost, k, a, b))) = heap.pop() {
            if !alive[k][a as usize] || !alive[k + 1][b as usize] {
                continue;
            }
            let m = &mats[k];
            let phi = m.get(b, a);
            if phi.abs() != 1 {
                continue;
            }
            let now = m.cost(b, a);
            if now != cost {
                heap.push(Reverse((now, k, a, b)));
                continue;
            }
            let mut gamma: Vec<(u32, i64)> =
                m.cols[a as usize].iter().filter(|(&y, _)| y != b).map(|(&y, &v)| (y, v)).collect();
            let mut rho: Vec<(u32, i64)> =
                m.rows[b as usize].iter().filter(|(&x, _)| x != a).map(|(&x, &v)| (x, v)).collect();
            gamma.sort_unstable();
            rho.sort_unstable();
            let m = &mut mats[k];
            for &(y, gy) in &gamma {
                for &(x, rx) in &rho {
                    let delta = checked(gy.checked_mul(rx).and_then(|v| v.checked_mul(phi)))?;
                    let v = checked(m.get(y, x).checked_sub(delta))?;
                    m.set(y, x, v);
                    if v.abs() == 1 {
                        heap.push(Reverse((m.cost(y, x), k, x, y)));
                    }
                }
            }
            m.clear_row(b);
            m.clear_col(a);
            if k > 0 {
                mats[k - 1].clear_row(a);
            }
            if k + 1 < mats.len() {
                mats[k + 1].clear_col(b);
            }
            alive[k][a as usize] = false;
            alive[k + 1][b as usize] = false;
            steps.push(Elimination { k, a, b, gamma, rho });
        }
        let survivors: Vec<Vec<u32>> = alive
            .iter()
            .map(|v| v.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i as u32).collect())
            .collect();
        let mut pos: Vec<FxHashMap<u32, usize>> = vec![FxHashMap::default(); len];
        for (k, s) in survivors.iter().enumerate() {
            for (i, &g) in s.iter().enumerate() {
                pos[k].insert(g, i);
            }
        }
        let d = (0..mats.len())
            .map(|k| {
                let mut dense = vec![vec![0i64; survivors[k].len()]; survivors[k + 1].len()];
                for (i, &y) in survivors[k + 1].iter().enumerate() {
                    for (&x, &v) in &mats[k].rows[y as usize] {
                        dense[i][pos[k][&x]] = v;
                    }
                }
                dense
            })
            .collect();
        let dims = survivors.iter().map(|s| s.len()).collect();
        Ok(Reduction { full_dims: c.dims.clone(), reduced: DenseComplex { t0: c.t0, dims, d }, steps, survivors })
    }

    /// Elimination with automatic fallback to the unreduced complex.
    pub fn build(c: &Cochains, eliminate: bool) -> Self {
        if eliminate {
            if let Ok(r) = Self::eliminate(c) {
                return r;
            }
        }
        Self::identity(c)
    }

    pub fn eliminated_pairs(&self) -> usize {
        self.steps.len()
    }

    /// Push a mod-2 cochain of degree `k` of the full complex to the reduced one.
    pub fn project_mod2(&self, k: usize, v: &BitVec) -> BitVec {
        let mut v = v.clone();
        for e in &self.steps {
            if e.k == k {
                v.set(e.a as usize, false);
            } else if e.k + 1 == k && v.get(e.b as usize) {
                v.set(e.b as usize, false);
                for &(y, gy) in &e.gamma {
                    if gy % 2 != 0 {
                        v.flip(y as usize);
                    }
                }
            }
        }
        BitVec::from_ones(self.survivors[k].len(), self.survivors[k].iter().enumerate().filter(|(_, &g)| v.get(g as usize)).map(|(i, _)| i))
    }

    /// Pull a mod-2 cochain of degree `k` of the reduced complex back to the full one.
    pub fn lift_mod2(&self, k: usize, v: &BitVec) -> BitVec {
        let mut out = BitVec::zeros(self.full_dims[k]);
        for i in v.ones() {
            out.flip(self.survivors[k][i] as usize);
        }
        for e in self.steps.iter().rev() {
            if e.k == k {
                let s = e.rho.iter().filter(|&&(x, rx)| rx % 2 != 0 && out.get(x as usize)).count();
                out.set(e.a as usize, s % 2 == 1);
            }
        }
        out
    }
}

/// Arithmetic used by the Smith normal form: checked machine integers or
/// arbitrary precision.
pub trait Ring: Clone + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Option<Self>;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn neg(&self) -> Option<Self>;
    /// Truncated quotient.
    fn quot(&self, o: &Self) -> Option<Self>;
    fn abs_lt(&self, o: &Self) -> bool;
    fn is_negative(&self) -> bool;
    fn to_big(&self) -> BigInt;
    fn rem_u8(&self, m: u8) -> u8;
}

impl Ring for i64 {
    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    fn from_i64(v: i64) -> Self {
        v
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn add(&self, o: &Self) -> Option<Self> {
        self.checked_add(*o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        self.checked_mul(*o)
    }
    fn neg(&self) -> Option<Self> {
        self.checked_neg()
    }
    fn quot(&self, o: &Self) -> Option<Self> {
        self.checked_div(*o)
    }
    fn abs_lt(&self, o: &Self) -> bool {
        self.unsigned_abs() < o.unsigned_abs()
    }
    fn is_negative(&self) -> bool {
        *self < 0
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
    fn rem_u8(&self, m: u8) -> u8 {
        self.rem_euclid(m as i64) as u8
    }
}

impl Ring for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn neg(&self) -> Option<Self> {
        Some(-self)
    }
    fn quot(&self, o: &Self) -> Option<Self> {
        Some(self / o)
    }
    fn abs_lt(&self, o: &Self) -> bool {
        self.abs() < o.abs()
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
    fn rem_u8(&self, m: u8) -> u8 {
        let r = self % BigInt::from(m);
        let r = if Signed::is_negative(&r) { r + BigInt::from(m) } else { r };
        r.to_u8().expect("remainder below modulus")
    }
}

/// `P A Q = diag(d_1, ..., d_r, 0, ...)` with `d_i | d_{i+1}` and `d_i > 0`;
/// stores `P^{-1}` and `Q`.
#[derive(Clone, Debug)]
pub struct Snf<R> {
    pub diag: Vec<R>,
    pub p_inv: Vec<Vec<R>>,
    pub q: Vec<Vec<R>>,
}

fn identity<R: Ring>(n: usize) -> Vec<Vec<R>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { R::one() } else { R::zero() }).collect()).collect()
}

/// Entry size that triggers pairwise reduction of the remaining block.
const PAIR_REDUCE_ABOVE: i64 = 16;

/// Quotient rounded to the nearest integer.
fn nearest<R: Ring>(a: &R, b: &R) -> Option<R> {
    let q = a.quot(b)?;
    let r = a.add(&q.mul(b)?.neg()?)?;
    if b.abs_lt(&r.add(&r)?) {
        let step = if r.is_negative() == b.is_negative() { R::one() } else { R::one().neg()? };
        q.add(&step)
    } else {
        Some(q)
    }
}

fn dot<'a, R: Ring + 'a>(pairs: impl Iterator<Item = (&'a R, &'a R)>) -> Option<R> {
    let mut acc = R::zero();
    for (x, y) in pairs {
        if !x.is_zero() && !y.is_zero() {
            acc = acc.add(&x.mul(y)?)?;
        }
    }
    Some(acc)
}

/// Whether subtracting `c` times a vector of squared norm `nj` and inner
/// product `dij` shortens the other vector: `c^2 nj < 2 c dij`.
fn shortens<R: Ring>(c: &R, nj: &R, dij: &R) -> Option<bool> {
    let lhs = c.mul(c)?.mul(nj)?;
    let rhs = c.mul(dij)?;
    let rhs = rhs.add(&rhs)?;
    Some(!rhs.is_negative() && lhs.abs_lt(&rhs))
}

/// Subtract multiples of rows (then columns) of the block from `k` on from
/// each other while that shortens them. Plain pivoting on residual complexes
/// with nearly parallel rows otherwise blows entries up exponentially.
fn pair_reduce<R: Ring>(a: &mut [Vec<R>], p_inv: &mut [Vec<R>], q: &mut [Vec<R>], k: usize) -> Option<()> {
    let (rows, cols) = (a.len(), q.len());
    let mut changed = true;
    while changed {
        changed = false;
        for i in k..rows {
            for j in k..rows {
                if i == j {
                    continue;
                }
                let nj = dot(a[j].iter().zip(&a[j]))?;
                if nj.is_zero() {
                    continue;
                }
                let dij = dot(a[i].iter().zip(&a[j]))?;
                let c = nearest(&dij, &nj)?;
                if !c.is_zero() && shortens(&c, &nj, &dij)? {
                    smith_row_add(a, p_inv, i, j, &c.neg()?)?;
                    changed = true;
                }
            }
        }
        for i in k..cols {
            for j in k..cols {
                if i == j {
                    continue;
                }
                let nj = dot(a[k..].iter().map(|r| (&r[j], &r[j])))?;
                if nj.is_zero() {
                    continue;
                }
                let dij = dot(a[k..].iter().map(|r| (&r[i], &r[j])))?;
                let c = nearest(&dij, &nj)?;
                if !c.is_zero() && shortens(&c, &nj, &dij)? {
                    smith_col_add(a, q, i, j, &c.neg()?)?;
                    changed = true;
                }
            }
        }
    }
    Some(())
}

/// `row_i += c * row_j`, keeping `P^{-1}` in step.
fn smith_row_add<R: Ring>(a: &mut [Vec<R>], p_inv: &mut [Vec<R>], i: usize, j: usize, c: &R) -> Option<()> {
    for col in 0..a[i].len() {
        let v = a[i][col].add(&c.mul(&a[j][col])?)?;
        a[i][col] = v;
    }
    let nc = c.neg()?;
    for row in p_inv.iter_mut() {
        let v = row[j].add(&nc.mul(&row[i])?)?;
        row[j] = v;
    }
    Some(())
}

/// `col_i += c * col_j`, keeping `Q` in step.
fn smith_col_add<R: Ring>(a: &mut [Vec<R>], q: &mut [Vec<R>], i: usize, j: usize, c: &R) -> Option<()> {
    for row in a.iter_mut().chain(q.iter_mut()) {
        let v = row[i].add(&c.mul(&row[j])?)?;
        row[i] = v;
    }
    Some(())
}

/// Smith normal form; `None` on overflow.
pub fn smith<R: Ring>(a: &[Vec<R>], rows: usize, cols: usize) -> Option<Snf<R>> {
    let mut a: Vec<Vec<R>> = a.to_vec();
    let mut p_inv = identity::<R>(rows);
    let mut q = identity::<R>(cols);
    let row_add = smith_row_add::<R>;
    let col_add = smith_col_add::<R>;
    fn row_swap<R: Ring>(a: &mut [Vec<R>], p_inv: &mut [Vec<R>], i: usize, j: usize) {
        a.swap(i, j);
        for row in p_inv.iter_mut() {
            row.swap(i, j);
        }
    }
    fn col_swap<R: Ring>(a: &mut [Vec<R>], q: &mut [Vec<R>], i: usize, j: usize) {
        for row in a.iter_mut().chain(q.iter_mut()) {
            row.swap(i, j);
        }
    }
    let mut diag = vec![];
    let mut k = 0;
    while k < rows.min(cols) {
        let big = R::from_i64(PAIR_REDUCE_ABOVE);
        if a[k..].iter().any(|r| r[k..].iter().any(|v| big.abs_lt(v))) {
            pair_reduce(&mut a, &mut p_inv, &mut q, k)?;
        }
        // Smallest nonzero entry of the remaining block.
        let mut best: Option<(usize, usize)> = None;
        for i in k..rows {
            for j in k..cols {
                if !a[i][j].is_zero() && best.is_none_or(|(bi, bj)| a[i][j].abs_lt(&a[bi][bj])) {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        row_swap(&mut a, &mut p_inv, k, bi);
        col_swap(&mut a, &mut q, k, bj);
        loop {
            let mut clean = true;
            for i in k + 1..rows {
                if !a[i][k].is_zero() {
                    let c = a[i][k].quot(&a[k][k])?.neg()?;
                    row_add(&mut a, &mut p_inv, i, k, &c)?;
                    if !a[i][k].is_zero() {
                        row_swap(&mut a, &mut p_inv, i, k);
                        clean = false;
                    }
                }
            }
            for j in k + 1..cols {
                if !a[k][j].is_zero() {
                    let c = a[k][j].quot(&a[k][k])?.neg()?;
                    col_add(&mut a, &mut q, j, k, &c)?;
                    if !a[k][j].is_zero() {
                        col_swap(&mut a, &mut q, j, k);
                        clean = false;
                    }
                }
            }
            if !clean {
                continue;
            }
            // Divisibility of the rest of the block by the pivot.
            let bad = (k + 1..rows).find(|&i| {
                (k + 1..cols).any(|j| {
                    let r = a[i][j].quot(&a[k][k]).and_then(|qq| qq.mul(&a[k][k]));
                    r.is_none_or(|r| r != a[i][j])
                })
            });
            match bad {
                Some(i) => row_add(&mut a, &mut p_inv, k, i, &R::one())?,
                None => break,
            }
        }
        if a[k][k].is_negative() {
            for col in 0..cols {
                a[k][col] = a[k][col].neg()?;
            }
            for row in p_inv.iter_mut() {
                row[k] = row[k].neg()?;
            }
        }
        diag.push(a[k][k].clone());
        k += 1;
    }
    Some(Snf { diag, p_inv, q })
}

fn to_ring<R: Ring>(m: &[Vec<i64>]) -> Vec<Vec<R>> {
    m.iter().map(|r| r.iter().map(|&v| R::from_i64(v)).collect()).collect()
}

/// Kind of a mod-2 basis class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClassKind {
    /// Reduction of a free integral class.
    Free,
    /// Reduction of an integral class of order `2^k`.
    Lower(u64),
    /// Class whose integral lift has coboundary `order * (lower class)`.
    Upper(u64),
}

/// A mod-2 basis class with an integral lift mod 4 on the reduced complex.
#[derive(Clone, Debug)]
pub struct Mod2Class {
    pub kind: ClassKind,
    /// For torsion classes, index of the invariant factor (per differential).
    pub factor: Option<usize>,
    pub lift4: Vec<u8>,
    pub bits: BitVec,
}

/// Integral and mod-2 cohomology of one degree.
#[derive(Clone, Debug)]
pub struct DegreeCohomology {
    pub free: usize,
    /// Invariant factors `> 1`.
    pub invariants: Vec<BigInt>,
    pub classes: Vec<Mod2Class>,
    solver: QuotientSolver,
}

impl DegreeCohomology {
    pub fn mod2_dim(&self) -> usize {
        self.classes.len()
    }

    /// Torsion as prime powers, sorted.
    pub fn torsion(&self) -> Vec<u64> {
        let mut out = vec![];
        for d in &self.invariants {
            let mut d = d.to_u64().expect("torsion order fits in u64");
            let mut p = 2;
            while d > 1 {
                if p * p > d {
                    out.push(d);
                    break;
                }
                let mut pk = 1;
                while d % p == 0 {
                    d /= p;
                    pk *= p;
                }
                if pk > 1 {
                    out.push(pk);
                }
                p += 1;
            }
        }
        out.sort_unstable();
        out
    }

    /// Coordinates of a mod-2 cocycle (reduced complex) in the class basis.
    pub fn coords(&self, v: &BitVec) -> Option<BitVec> {
        self.solver.coords(v)
    }
}

/// Cohomology of a reduced complex, degree by degree.
#[derive(Clone, Debug)]
pub struct Cohomology {
    pub t0: i32,
    pub degrees: Vec<DegreeCohomology>,
    d_mod4: Vec<Vec<Vec<u8>>>,
}

fn mod2_cols(m: &[Vec<i64>], ncols: usize) -> Vec<BitVec> {
    (0..ncols).map(|c| BitVec::from_ones(m.len(), (0..m.len()).filter(|&r| m[r][c] % 2 != 0))).collect()
}

fn col_of<R: Ring>(m: &[Vec<R>], c: usize) -> Vec<R> {
    m.iter().map(|r| r[c].clone()).collect()
}

struct Snfs<R> {
    snf: Vec<Snf<R>>,
    kernels: Vec<Vec<Vec<R>>>,
}

fn all_snf<R: Ring>(cx: &DenseComplex) -> Option<Snfs<R>> {
    let len = cx.dims.len();
    let mut snf = vec![];
    for k in 0..cx.d.len() {
        snf.push(smith::<R>(&to_ring::<R>(&cx.d[k]), cx.dims[k + 1], cx.dims[k])?);
    }
    // Free part at degree k: kernel of d_k restricted to the complement of
    // the saturated image of d_{k-1}.
    let mut kernels = vec![];
    for k in 0..len {
        let n = cx.dims[k];
        let (r, basis): (usize, Vec<Vec<R>>) = match k.checked_sub(1).map(|j| &snf[j]) {
            Some(s) => (s.diag.len(), (0..n).map(|c| col_of(&s.p_inv, c)).collect()),
            None => (0, identity::<R>(n)),
        };
        let comp: Vec<&Vec<R>> = basis[r..].iter().collect();
        let ker: Vec<Vec<R>> = if k < cx.d.len() {
            let rows = cx.dims[k + 1];
            let d = to_ring::<R>(&cx.d[k]);
            let mut m = vec![vec![R::zero(); comp.len()]; rows];
            for (c, v) in comp.iter().enumerate() {
                for (row, mrow) in m.iter_mut().enumerate() {
                    let mut acc = R::zero();
                    for (x, vx) in v.iter().enumerate() {
                        if !d[row][x].is_zero() && !vx.is_zero() {
                            acc = acc.add(&d[row][x].mul(vx)?)?;
                        }
                    }
                    mrow[c] = acc;
                }
            }
            let s = smith::<R>(&m, rows, comp.len())?;
            let mut out = vec![];
            for c in s.diag.len()..comp.len() {
                let coeffs = col_of(&s.q, c);
                let mut v = vec![R::zero(); n];
                for (kk, cf) in coeffs.iter().enumerate() {
                    if cf.is_zero() {
                        continue;
                    }
                    for (x, vx) in v.iter_mut().enumerate() {
                        *vx = vx.add(&cf.mul(&comp[kk][x])?)?;
                    }
                }
                out.push(v);
            }
            out
        } else {
            comp.into_iter().cloned().collect()
        };
        kernels.push(ker);
    }
    Some(Snfs { snf, kernels })
}

fn two_power(d: &BigInt) -> Option<u64> {
    let two = BigInt::from(2);
    if Zero::is_zero(&(d % &two)) {
        let mut k = 1u64;
        let mut x = d.clone();
        while Zero::is_zero(&(&x % &two)) {
            x /= &two;
            k *= 2;
        }
        Some(k)
    } else {
        None
    }
}

fn assemble<R: Ring>(cx: &DenseComplex, s: Snfs<R>) -> Result<Cohomology, HomalgError> {
    let len = cx.dims.len();
    let d_mod4: Vec<Vec<Vec<u8>>> =
        cx.d.iter().map(|m| m.iter().map(|r| r.iter().map(|v| v.rem_euclid(4) as u8).collect()).collect()).collect();
    let mut degrees = vec![];
    for k in 0..len {
        let n = cx.dims[k];
        let mut classes = vec![];
        let lift = |v: &[R]| -> Mod2Class {
            let lift4: Vec<u8> = v.iter().map(|x| x.rem_u8(4)).collect();
            let bits = BitVec::from_ones(n, (0..n).filter(|&i| lift4[i] % 2 == 1));
            Mod2Class { kind: ClassKind::Free, factor: None, lift4, bits }
        };
        let mut invariants = vec![];
        if k > 0 {
            let sn = &s.snf[k - 1];
            for (i, d) in sn.diag.iter().enumerate() {
                let d = d.to_big();
                if d > <BigInt as One>::one() {
                    invariants.push(d.clone());
                }
                if let Some(order) = two_power(&d) {
                    let mut c = lift(&col_of(&sn.p_inv, i));
                    c.kind = ClassKind::Lower(order);
                    c.factor = Some(i);
                    classes.push(c);
                }
            }
        }
        let free = s.kernels[k].len();
        for v in &s.kernels[k] {
            classes.push(lift(v));
        }
        if k < cx.d.len() {
            let sn = &s.snf[k];
            for (i, d) in sn.diag.iter().enumerate() {
                if let Some(order) = two_power(&d.to_big()) {
                    let mut c = lift(&col_of(&sn.q, i));
                    c.kind = ClassKind::Upper(order);
                    c.factor = Some(i);
                    classes.push(c);
                }
            }
        }
        let relations = if k > 0 { mod2_cols(&cx.d[k - 1], cx.dims[k - 1]) } else { vec![] };
        let basis: Vec<BitVec> = classes.iter().map(|c| c.bits.clone()).collect();
        let solver = QuotientSolver::new(n, &relations, &basis).ok_or(HomalgError::UniversalCoefficients(k))?;
        // Direct mod-2 dimension for the universal coefficient check.
        let rank_in = crate::gf2::rank(relations.iter().cloned());
        let rank_out = if k < cx.d.len() { crate::gf2::rank(mod2_cols(&cx.d[k], n)) } else { 0 };
        if n - rank_in - rank_out != classes.len() {
            return Err(HomalgError::UniversalCoefficients(k));
        }
        degrees.push(DegreeCohomology { free, invariants, classes, solver });
    }
    let coh = Cohomology { t0: cx.t0, degrees, d_mod4 };
    for k in 0..len {
        for c in &coh.degrees[k].classes {
            if !coh.is_cocycle(k, &c.bits) {
                return Err(HomalgError::NotACocycle(k));
            }
        }
    }
    Ok(coh)
}

impl DenseComplex {
    pub fn check_d_squared(&self) -> Result<(), HomalgError> {
        for k in 0..self.d.len().saturating_sub(1) {
            for z in 0..self.dims[k + 2] {
                for x in 0..self.dims[k] {
                    let s: i128 =
                        (0..self.dims[k + 1]).map(|y| self.d[k + 1][z][y] as i128 * self.d[k][y][x] as i128).sum();
                    if s != 0 {
                        return Err(HomalgError::NotAComplex(k));
                    }
                }
            }
        }
        Ok(())
    }

    /// Cohomology with machine integers, escalating to arbitrary precision.
    pub fn cohomology(&self) -> Result<Cohomology, HomalgError> {
        self.check_d_squared()?;
        match all_snf::<i64>(self) {
            Some(s) => assemble(self, s),
            None => assemble(self, all_snf::<BigInt>(self).expect("arbitrary precision")),
        }
    }
}

impl Cohomology {
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn is_cocycle(&self, k: usize, v: &BitVec) -> bool {
        match self.d_mod4.get(k) {
            None => true,
            Some(m) => m.iter().all(|row| v.ones().filter(|&x| row[x] % 2 == 1).count() % 2 == 0),
        }
    }

    /// Bockstein `Sq^1`: degree `k` classes to degree `k + 1` classes.
    pub fn sq1(&self, k: usize) -> Gf2Matrix {
        let src = &self.degrees[k];
        let Some(next) = self.degrees.get(k + 1) else {
            return Gf2Matrix::zeros(0, src.classes.len());
        };
        let m = &self.d_mod4[k];
        let cols = src
            .classes
            .iter()
            .map(|c| {
                let half: Vec<usize> = (0..m.len())
                    .filter(|&y| {
                        let s: u32 = m[y].iter().zip(&c.lift4).map(|(&a, &b)| a as u32 * b as u32).sum();
                        assert!(s.is_multiple_of(2), "integral lift is not a cocycle mod 2");
                        (s / 2) % 2 == 1
                    })
                    .collect();
                let v = BitVec::from_ones(m.len(), half);
                next.coords(&v).expect("Bockstein lands in cohomology")
            })
            .collect();
        Gf2Matrix { rows: next.classes.len(), cols }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(t0: i32, dims: Vec<usize>, d: Vec<Vec<Vec<i64>>>) -> DenseComplex {
        DenseComplex { t0, dims, d }
    }

    #[test]
    fn smith_examples() {
        let s = smith::<i64>(&[vec![2]], 1, 1).unwrap();
        assert_eq!(s.diag, vec![2]);
        let s = smith::<i64>(&[vec![0]], 1, 1).unwrap();
        assert!(s.diag.is_empty());
        let a = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        let s = smith::<i64>(&a, 3, 3).unwrap();
        assert_eq!(s.diag, vec![2, 6, 12]);
        let b = smith::<BigInt>(&to_ring(&a), 3, 3).unwrap();
        assert_eq!(b.diag, vec![BigInt::from(2), BigInt::from(6), BigInt::from(12)]);
    }

    /// `A Q = P^{-1} D` column by column.
    fn assert_reconstructs(a: &[Vec<i64>], s: &Snf<i64>) {
        let (rows, cols) = (a.len(), s.q.len());
        for c in 0..cols {
            for r in 0..rows {
                let aq: i64 = (0..cols).map(|x| a[r][x] * s.q[x][c]).sum();
                let pd = if c < s.diag.len() { s.p_inv[r][c] * s.diag[c] } else { 0 };
                assert_eq!(aq, pd);
            }
        }
    }

    #[test]
    fn smith_transforms_reconstruct() {
        let a = vec![vec![3, 1, 4], vec![1, 5, 9], vec![2, 6, 5], vec![3, 5, 8]];
        assert_reconstructs(&a, &smith::<i64>(&a, 4, 3).unwrap());
    }

    #[test]
    fn nearly_parallel_rows_stay_small() {
        // Residual of a T(4,5) bucket after unit elimination; plain pivoting
        // overflows i64 after four pivots.
        let a: Vec<Vec<i64>> = vec![
            vec![-139, 124, 15, 15, 64, 94, 89, -102, 0, 0, 60],
            vec![40, -38, -5, -4, -19, -26, -27, 31, 0, 0, -18],
            vec![159, -143, -17, -17, -73, -107, -102, 116, 0, 0, -69],
            vec![-92, 83, 10, 10, 42, 62, 59, -66, 0, 0, 40],
            vec![166, -149, -18, -18, -76, -112, -106, 122, 0, 0, -72],
            vec![74, -66, -8, -8, -34, -50, -47, 54, 0, 0, -32],
            vec![159, -143, -17, -17, -73, -107, -102, 115, 0, 0, -69],
            vec![121, -109, -13, -13, -55, -81, -77, 87, 0, 0, -52],
            vec![160, -143, -17, -17, -73, -108, -102, 117, 0, 0, -69],
            vec![-93, 84, 10, 10, 42, 62, 59, -66, 0, 0, 40],
        ];
        let s = smith::<i64>(&a, 10, 11).expect("no overflow");
        assert_eq!(s.diag, vec![1; 9]);
        assert_reconstructs(&a, &s);
    }

    #[test]
    fn smith_escalates_on_overflow() {
        let m = i64::MAX - 1;
        let a = vec![vec![1, m], vec![m, 1]];
        assert!(smith::<i64>(&a, 2, 2).is_none());
        let b = smith::<BigInt>(&to_ring(&a), 2, 2).unwrap();
        assert_eq!(b.diag, vec![BigInt::from(1), BigInt::from(m) * BigInt::from(m) - 1]);
        let cx = dense(0, vec![2, 2], vec![a]);
        let h = cx.cohomology().unwrap();
        assert_eq!(h.degrees[1].invariants, vec![BigInt::from(m) * BigInt::from(m) - 1]);
    }

    #[test]
    fn z2_torsion_and_bockstein() {
        // Z --2--> Z: H^0 = 0, H^1 = Z/2; mod 2 both degrees have one class.
        let cx = dense(0, vec![1, 1], vec![vec![vec![2]]]);
        let h = cx.cohomology().unwrap();
        assert_eq!(h.degrees[1].torsion(), vec![2]);
        assert_eq!(h.degrees[0].mod2_dim(), 1);
        assert_eq!(h.degrees[1].mod2_dim(), 1);
        assert_eq!(h.sq1(0).rank(), 1);
    }

    #[test]
    fn z4_bockstein_vanishes() {
        let cx = dense(0, vec![1, 1], vec![vec![vec![4]]]);
        let h = cx.cohomology().unwrap();
        assert_eq!(h.degrees[1].torsion(), vec![4]);
        assert_eq!(h.sq1(0).rank(), 0);
        assert_eq!(h.degrees[0].classes[0].kind, ClassKind::Upper(4));
        assert_eq!(h.degrees[1].classes[0].kind, ClassKind::Lower(4));
    }

    #[test]
    fn odd_torsion_invisible_mod_two() {
        let cx = dense(0, vec![1, 1], vec![vec![vec![3]]]);
        let h = cx.cohomology().unwrap();
        assert_eq!(h.degrees[1].torsion(), vec![3]);
        assert_eq!(h.degrees[0].mod2_dim() + h.degrees[1].mod2_dim(), 0);
        let cx = dense(0, vec![1, 1], vec![vec![vec![12]]]);
        assert_eq!(cx.cohomology().unwrap().degrees[1].torsion(), vec![3, 4]);
    }

    #[test]
    fn free_plus_torsion_split() {
        // Degrees 0,1,2 with H^1 = Z (+) Z/2 pattern: d0 = [2;0], d1 = 0.
        let cx = dense(0, vec![1, 2, 1], vec![vec![vec![2], vec![0]], vec![vec![0, 0]]]);
        let h = cx.cohomology().unwrap();
        assert_eq!(h.degrees[1].free, 1);
        assert_eq!(h.degrees[1].torsion(), vec![2]);
        assert_eq!(h.degrees[1].mod2_dim(), 2);
        assert_eq!(h.degrees[2].free, 1);
        let sq = h.sq1(1);
        assert_eq!(sq.rank(), 0);
    }

    fn random_complex(seed: u64) -> Cochains {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // Build d = composition-safe complex: C0 -> C1 -> C2 as d1 = B, d0 = A
        // with B A = 0 by choosing A's columns in the kernel of B.
        let (n0, n1, n2) = (rng.gen_range(1..5), rng.gen_range(2..7), rng.gen_range(1..5));
        let b: Vec<Vec<i64>> = (0..n2).map(|_| (0..n1).map(|_| rng.gen_range(-2..=2)).collect()).collect();
        // Kernel vectors of b via an integer basis of a few random combinations.
        let s = smith::<i64>(&b, n2, n1).unwrap();
        let ker: Vec<Vec<i64>> = (s.diag.len()..n1).map(|c| col_of(&s.q, c)).collect();
        let mut a = vec![vec![0i64; n0]; n1];
        for x in 0..n0 {
            for v in &ker {
                let c: i64 = rng.gen_range(-2..=2);
                for y in 0..n1 {
                    a[y][x] += c * v[y];
                }
            }
        }
        let trip = |m: &Vec<Vec<i64>>| {
            let mut t = vec![];
            for (r, row) in m.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    if v != 0 {
                        t.push((r as u32, c as u32, v));
                    }
                }
            }
            t
        };
        Cochains { t0: 0, dims: vec![n0, n1, n2], d: vec![trip(&a), trip(&b)] }
    }

    fn summary(h: &Cohomology) -> Vec<(usize, Vec<u64>, usize)> {
        h.degrees.iter().map(|d| (d.free, d.torsion(), d.mod2_dim())).collect()
    }

    #[test]
    fn elimination_preserves_cohomology() {
        for seed in 0..200 {
            let c = random_complex(seed);
            c.check_d_squared().unwrap();
            let direct = Reduction::identity(&c).reduced.cohomology().unwrap();
            let red = Reduction::eliminate(&c).unwrap();
            let reduced = red.reduced.cohomology().unwrap();
            assert_eq!(summary(&direct), summary(&reduced), "seed {}", seed);
            // Lifting a reduced class and projecting back gives the same class.
            for k in 0..c.len() {
                for cl in &reduced.degrees[k].classes {
                    let full = red.lift_mod2(k, &cl.bits);
                    assert!(direct.is_cocycle(k, &full));
                    let back = red.project_mod2(k, &full);
                    assert_eq!(reduced.degrees[k].coords(&back), reduced.degrees[k].coords(&cl.bits));
                }
            }
        }
    }

    #[test]
    fn zero_differential_unchanged() {
        let c = Cochains { t0: -1, dims: vec![2, 3], d: vec![vec![]] };
        let red = Reduction::eliminate(&c).unwrap();
        assert_eq!(red.eliminated_pairs(), 0);
        assert_eq!(red.reduced.dims, vec![2, 3]);
    }

    #[test]
    fn sq1_squares_to_zero() {
        for seed in 0..100 {
            let c = random_complex(seed + 1000);
            let h = Reduction::identity(&c).reduced.cohomology().unwrap();
            let two = h.sq1(1).mul(&h.sq1(0));
            assert!(two.is_zero(), "seed {}", seed);
        }
    }
}
