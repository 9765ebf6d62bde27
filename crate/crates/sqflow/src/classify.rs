//! Wedge decompositions of one quantum degree into spheres, Moore spaces and
//! elementary Chang complexes, read off from integral cohomology and the
//! action of `Sq^1` and `Sq^2`.
//!
//! All degrees are cohomological. A summand is named by its bottom cell, so
//! `X(η,n)` has classes in degrees `n` and `n+2`, and `M(Z/p,n)` has integral
//! cohomology `Z/p` in degree `n+1`.

use crate::gf2::Gf2Matrix;
use crate::homalg::{ClassKind, Cohomology};
use serde::{Serialize, Serializer};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("inconsistent input at degree {degree}: {what}")]
    Inconsistent { degree: i64, what: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Summand {
    Sphere { n: i64 },
    Moore { order: u64, n: i64 },
    Eta { n: i64 },
    PEta { p: u64, n: i64 },
    EtaQ { q: u64, n: i64 },
    PEtaQ { p: u64, q: u64, n: i64 },
}

impl Summand {
    pub fn bottom(&self) -> i64 {
        match *self {
            Summand::Sphere { n }
            | Summand::Moore { n, .. }
            | Summand::Eta { n }
            | Summand::PEta { n, .. }
            | Summand::EtaQ { n, .. }
            | Summand::PEtaQ { n, .. } => n,
        }
    }

    /// Integral cohomology as `(degree, order)`, order 0 meaning `Z`.
    pub fn cohomology(&self) -> Vec<(i64, u64)> {
        match *self {
            Summand::Sphere { n } => vec![(n, 0)],
            Summand::Moore { order, n } => vec![(n + 1, order)],
            Summand::Eta { n } => vec![(n, 0), (n + 2, 0)],
            Summand::PEta { p, n } => vec![(n + 1, p), (n + 2, 0)],
            Summand::EtaQ { q, n } => vec![(n, 0), (n + 2, q)],
            Summand::PEtaQ { p, q, n } => vec![(n + 1, p), (n + 2, q)],
        }
    }

    /// Pattern of the nontrivial `Sq^2`, if any.
    fn pattern(&self) -> Option<Pattern> {
        match *self {
            Summand::Eta { .. } => Some(Pattern::FreeFree),
            Summand::PEta { .. } => Some(Pattern::UpperFree),
            Summand::EtaQ { .. } => Some(Pattern::FreeLower),
            Summand::PEtaQ { .. } => Some(Pattern::UpperLower),
            _ => None,
        }
    }
}

impl fmt::Display for Summand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Summand::Sphere { n } => write!(f, "S^{}", n),
            Summand::Moore { order, n } => write!(f, "M(Z/{},{})", order, n),
            Summand::Eta { n } => write!(f, "X(η,{})", n),
            Summand::PEta { p, n } => write!(f, "X(_{}η,{})", p, n),
            Summand::EtaQ { q, n } => write!(f, "X(η{},{})", q, n),
            Summand::PEtaQ { p, q, n } => write!(f, "X(_{}η{},{})", p, q, n),
        }
    }
}

impl Serialize for Summand {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason")]
pub enum Status {
    #[serde(rename = "DETERMINED")]
    Determined,
    #[serde(rename = "INDETERMINATE")]
    Indeterminate(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WedgeDecomposition {
    pub summands: Vec<Summand>,
    #[serde(flatten)]
    pub status: Status,
}

impl WedgeDecomposition {
    pub fn is_determined(&self) -> bool {
        self.status == Status::Determined
    }

    fn indeterminate(reason: impl Into<String>) -> Self {
        WedgeDecomposition { summands: vec![], status: Status::Indeterminate(reason.into()) }
    }
}

impl fmt::Display for WedgeDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.status {
            Status::Indeterminate(r) => write!(f, "INDETERMINATE ({})", r),
            Status::Determined if self.summands.is_empty() => write!(f, "*"),
            Status::Determined => {
                let parts: Vec<String> = self.summands.iter().map(|s| s.to_string()).collect();
                write!(f, "{}", parts.join(" ∨ "))
            }
        }
    }
}

/// Ranks of `Sq^2` out of degree `i`, split by the adapted basis: sources are
/// free reductions (F) or torsion-upper classes (U), targets free reductions
/// or torsion-lower classes (L). Each entry is the rank increase from adding
/// that block, so the entries are invariant under admissible basis changes
/// and sum to the rank of `Sq^2` on `F + U` followed by projection away from
/// upper targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FourRankSummary {
    pub i: i64,
    pub free_free: usize,
    pub upper_free: usize,
    pub free_lower: usize,
    pub upper_lower: usize,
}

impl FourRankSummary {
    pub fn total(&self) -> usize {
        self.free_free + self.upper_free + self.free_lower + self.upper_lower
    }
}

/// One degree of input: integral groups and the mod-2 class basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeInput {
    pub free: usize,
    /// 2-primary and odd torsion as prime powers.
    pub torsion: Vec<u64>,
    pub classes: Vec<ClassKind>,
    /// Torsion classes: index of the invariant factor of the differential
    /// they come from. An upper class at `k` and a lower class at `k + 1`
    /// with the same factor belong to the same cyclic summand.
    pub factors: Vec<Option<usize>>,
}

/// Everything the classifier needs for one quantum degree. `sq1[k]` maps
/// degree `k` to `k + 1` and `sq2[k]` maps `k` to `k + 2`, over the class bases.
#[derive(Clone, Debug)]
pub struct QuantumInput {
    pub i0: i64,
    pub degrees: Vec<DegreeInput>,
    pub sq1: Vec<Gf2Matrix>,
    pub sq2: Vec<Gf2Matrix>,
}

impl QuantumInput {
    pub fn from_cohomology(coh: &Cohomology, i0: i64, sq2: Vec<Gf2Matrix>) -> Self {
        let degrees = coh
            .degrees
            .iter()
            .map(|d| DegreeInput {
                free: d.free,
                torsion: d.torsion(),
                classes: d.classes.iter().map(|c| c.kind).collect(),
                factors: d.classes.iter().map(|c| c.factor).collect(),
            })
            .collect();
        let sq1 = (0..coh.len()).map(|k| coh.sq1(k)).collect();
        QuantumInput { i0, degrees, sq1, sq2 }
    }

    fn len(&self) -> usize {
        self.degrees.len()
    }

    fn sq2_at(&self, k: usize) -> Gf2Matrix {
        match self.sq2.get(k) {
            Some(m) => m.clone(),
            None => {
                let rows = self.degrees.get(k + 2).map_or(0, |d| d.classes.len());
                Gf2Matrix::zeros(rows, self.degrees[k].classes.len())
            }
        }
    }

    pub fn sq2_rank(&self, k: usize) -> usize {
        self.sq2.get(k).map_or(0, |m| m.rank())
    }

    /// Largest minus smallest degree with nonzero integral cohomology, plus one.
    pub fn width(&self) -> usize {
        let nz: Vec<usize> =
            (0..self.len()).filter(|&k| self.degrees[k].free > 0 || !self.degrees[k].torsion.is_empty()).collect();
        match (nz.first(), nz.last()) {
            (Some(a), Some(b)) => b - a + 1,
            _ => 0,
        }
    }

    pub fn four_ranks(&self) -> Vec<FourRankSummary> {
        (0..self.len())
            .map(|k| {
                let m = self.sq2_at(k);
                let src = &self.degrees[k].classes;
                let tgt = self.degrees.get(k + 2).map_or(&[][..], |d| &d.classes[..]);
                let is_f = |c: &ClassKind| matches!(c, ClassKind::Free);
                let is_u = |c: &ClassKind| matches!(c, ClassKind::Upper(_));
                let is_l = |c: &ClassKind| matches!(c, ClassKind::Lower(_));
                let block = |cols: &dyn Fn(&ClassKind) -> bool, rows: &dyn Fn(&ClassKind) -> bool| -> usize {
                    let r: Vec<usize> = (0..tgt.len()).filter(|&r| rows(&tgt[r])).collect();
                    let v = (0..src.len())
                        .filter(|&c| cols(&src[c]))
                        .map(|c| crate::gf2::BitVec::from_ones(r.len(), (0..r.len()).filter(|&x| m.get(r[x], c))));
                    crate::gf2::rank(v)
                };
                let ff = block(&is_f, &is_f);
                let fu_f = block(&|c| is_f(c) || is_u(c), &is_f);
                let f_fl = block(&is_f, &|c| is_f(c) || is_l(c));
                let all = block(&|c| is_f(c) || is_u(c), &|c| is_f(c) || is_l(c));
                FourRankSummary {
                    i: self.i0 + k as i64,
                    free_free: ff,
                    upper_free: fu_f - ff,
                    free_lower: f_fl - ff,
                    upper_lower: all + ff - fu_f - f_fl,
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pattern {
    FreeFree,
    UpperFree,
    FreeLower,
    UpperLower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Free,
    Lower { unit: usize, order: u64 },
    Upper { unit: usize, order: u64 },
}

/// A 2-primary cyclic summand: upper class at `k`, lower class at `k + 1`.
#[derive(Clone, Copy, Debug)]
struct Unit {
    k: usize,
    order: u64,
    upper: usize,
    lower: usize,
}

/// Dense `Sq^2` matrices with admissible row and column operations. Every
/// operation is also applied to the neighbouring matrices that see the same
/// basis change, so the collection always describes the same cohomology.
struct Work {
    kinds: Vec<Vec<Kind>>,
    units: Vec<Unit>,
    /// `m[k][row][col]`: rows are classes at `k + 2`, columns classes at `k`.
    m: Vec<Vec<Vec<bool>>>,
}

enum Fail {
    Indeterminate(String),
    Inconsistent(usize, String),
}

impl Work {
    fn new(input: &QuantumInput) -> Result<Self, Fail> {
        let len = input.len();
        let mut units = vec![];
        let mut kinds: Vec<Vec<Kind>> =
            input.degrees.iter().map(|d| d.classes.iter().map(|_| Kind::Free).collect()).collect();
        for k in 0..len {
            let d = &input.degrees[k];
            if d.classes.len() != d.factors.len() {
                return Err(Fail::Inconsistent(k, "class and factor lists differ in length".into()));
            }
            for (c, kind) in d.classes.iter().enumerate() {
                if let ClassKind::Upper(order) = *kind {
                    let f = d.factors[c];
                    let lower = input.degrees.get(k + 1).and_then(|n| {
                        (0..n.classes.len()).find(|&x| n.classes[x] == ClassKind::Lower(order) && n.factors[x] == f)
                    });
                    let Some(lower) = lower else {
                        return Err(Fail::Inconsistent(k, "upper class without a lower partner".into()));
                    };
                    let unit = units.len();
                    units.push(Unit { k, order, upper: c, lower });
                    kinds[k][c] = Kind::Upper { unit, order };
                    kinds[k + 1][lower] = Kind::Lower { unit, order };
                }
            }
        }
        for (k, ks) in kinds.iter().enumerate() {
            for (c, kind) in ks.iter().enumerate() {
                if input.degrees[k].classes[c] != ClassKind::Free && *kind == Kind::Free {
                    return Err(Fail::Inconsistent(k, "lower class without an upper partner".into()));
                }
            }
        }
        let m = (0..len)
            .map(|k| {
                let sq = input.sq2_at(k);
                (0..sq.rows).map(|r| (0..sq.ncols()).map(|c| sq.get(r, c)).collect()).collect()
            })
            .collect();
        Ok(Work { kinds, units, m })
    }

    fn rows(&self, k: usize) -> usize {
        self.kinds.get(k + 2).map_or(0, |v| v.len())
    }

    fn cols(&self, k: usize) -> usize {
        self.kinds[k].len()
    }

    fn col_is_zero(&self, k: usize, c: usize) -> bool {
        (0..self.rows(k)).all(|r| !self.m[k][r][c])
    }

    fn row_is_zero(&self, k: usize, r: usize) -> bool {
        !self.m[k][r].iter().any(|&b| b)
    }

    /// Replace basis class `dst` at degree `k` by `dst + src`.
    fn col_add(&mut self, k: usize, dst: usize, src: usize) {
        self.basis_change(k, dst, src);
    }

    /// Add row `src` to row `dst` of `m[k]`, i.e. replace the basis class
    /// `src` at degree `k + 2` by `src + dst`.
    fn row_add(&mut self, k: usize, dst: usize, src: usize) {
        self.basis_change(k + 2, src, dst);
    }

    /// Basis class `dst` at degree `d` becomes `dst + src`. A change between
    /// torsion classes of equal order also changes their partners one degree
    /// away. Upper += free, free += lower, and changes from a torsion class of
    /// larger order into a smaller one leave every other reduction fixed.
    fn basis_change(&mut self, d: usize, dst: usize, src: usize) {
        self.raw_change(d, dst, src);
        match (self.kinds[d][dst], self.kinds[d][src]) {
            (Kind::Upper { unit: a, order: p }, Kind::Upper { unit: b, order: q }) if p == q => {
                let (la, lb) = (self.units[a].lower, self.units[b].lower);
                self.raw_change(d + 1, la, lb);
            }
            (Kind::Lower { unit: a, order: p }, Kind::Lower { unit: b, order: q }) if p == q => {
                let (ua, ub) = (self.units[a].upper, self.units[b].upper);
                self.raw_change(d - 1, ua, ub);
            }
            _ => {}
        }
    }

    /// Effect of a basis change at degree `d` on the matrices out of and into `d`.
    fn raw_change(&mut self, d: usize, dst: usize, src: usize) {
        if d < self.m.len() {
            for r in 0..self.rows(d) {
                let b = self.m[d][r][src];
                self.m[d][r][dst] ^= b;
            }
        }
        if d >= 2 {
            let k = d - 2;
            for c in 0..self.cols(k) {
                let b = self.m[k][dst][c];
                self.m[k][src][c] ^= b;
            }
        }
    }

    fn is_free(&self, d: usize, c: usize) -> bool {
        self.kinds[d][c] == Kind::Free
    }

    fn order(&self, d: usize, c: usize) -> u64 {
        match self.kinds[d][c] {
            Kind::Free => 0,
            Kind::Lower { order, .. } | Kind::Upper { order, .. } => order,
        }
    }

    fn is_upper(&self, d: usize, c: usize) -> bool {
        matches!(self.kinds[d][c], Kind::Upper { .. })
    }

    fn is_lower(&self, d: usize, c: usize) -> bool {
        matches!(self.kinds[d][c], Kind::Lower { .. })
    }
}

#[derive(Clone, Copy, Debug)]
struct Pivot {
    k: usize,
    row: usize,
    col: usize,
    pattern: Pattern,
}

/// Classify one quantum degree.
pub fn classify(input: &QuantumInput) -> Result<WedgeDecomposition, ClassifyError> {
    let deg = |k: usize| input.i0 + k as i64;
    match classify_inner(input) {
        Ok(w) => Ok(w),
        Err(Fail::Indeterminate(r)) => Ok(WedgeDecomposition::indeterminate(r)),
        Err(Fail::Inconsistent(k, what)) => Err(ClassifyError::Inconsistent { degree: deg(k), what }),
    }
}

fn check_sq1(input: &QuantumInput, w: &Work) -> Result<(), Fail> {
    for k in 0..input.len() {
        let Some(next) = input.degrees.get(k + 1) else { continue };
        let s = &input.sq1[k];
        if s.rows != next.classes.len() || s.ncols() != input.degrees[k].classes.len() {
            return Err(Fail::Inconsistent(k, "Sq^1 has the wrong shape".into()));
        }
        for c in 0..s.ncols() {
            let want: Vec<usize> = match w.kinds[k][c] {
                Kind::Upper { unit, order: 2 } => vec![w.units[unit].lower],
                _ => vec![],
            };
            if s.cols[c].ones().collect::<Vec<_>>() != want {
                return Err(Fail::Inconsistent(k, "Sq^1 disagrees with the integral torsion".into()));
            }
        }
    }
    Ok(())
}

fn classify_inner(input: &QuantumInput) -> Result<WedgeDecomposition, Fail> {
    let len = input.len();
    for (k, d) in input.degrees.iter().enumerate() {
        let free = d.classes.iter().filter(|c| **c == ClassKind::Free).count();
        if free != d.free {
            return Err(Fail::Inconsistent(k, "free rank and free classes differ".into()));
        }
    }
    let mut w = Work::new(input)?;
    check_sq1(input, &w)?;
    for k in 0..len {
        for c in 0..w.cols(k) {
            if w.is_lower(k, c) && !w.col_is_zero(k, c) {
                return Err(Fail::Indeterminate("Sq^2 nonzero on a torsion reduction".into()));
            }
        }
        for r in 0..w.rows(k) {
            if w.is_upper(k + 2, r) && !w.row_is_zero(k, r) {
                return Err(Fail::Indeterminate("Sq^2 leaves the reduction of integral cohomology".into()));
            }
        }
    }
    let mut pivots: Vec<Pivot> = vec![];
    // target_rows[d][c]: class c at degree d is hit by an earlier pattern.
    let mut hit: Vec<Vec<bool>> = w.kinds.iter().map(|v| vec![false; v.len()]).collect();
    for k in 0..len {
        reduce_degree(&mut w, k, &hit, &mut pivots)?;
        for p in pivots.iter().filter(|p| p.k == k) {
            hit[k + 2][p.row] = true;
        }
    }
    verify_normal_form(&w, &pivots)?;

    let mut summands = vec![];
    let mut used: Vec<Vec<bool>> = w.kinds.iter().map(|v| vec![false; v.len()]).collect();
    let mut unit_used = vec![false; w.units.len()];
    for p in &pivots {
        let n = deg(input, p.k);
        let src = w.kinds[p.k][p.col];
        let tgt = w.kinds[p.k + 2][p.row];
        used[p.k][p.col] = true;
        used[p.k + 2][p.row] = true;
        let s = match (p.pattern, src, tgt) {
            (Pattern::FreeFree, _, _) => Summand::Eta { n },
            (Pattern::UpperFree, Kind::Upper { unit, order }, _) => {
                unit_used[unit] = true;
                Summand::PEta { p: order, n }
            }
            (Pattern::FreeLower, _, Kind::Lower { unit, order }) => {
                unit_used[unit] = true;
                Summand::EtaQ { q: order, n }
            }
            (Pattern::UpperLower, Kind::Upper { unit: a, order: pa }, Kind::Lower { unit: b, order: qb }) => {
                unit_used[a] = true;
                unit_used[b] = true;
                Summand::PEtaQ { p: pa, q: qb, n }
            }
            _ => unreachable!("pivot kinds follow the pattern"),
        };
        // A pattern on an upper class of order >= 4 next to free classes of
        // the same degree needs a higher Bockstein to tell the two apart.
        if let Kind::Upper { order, .. } = src {
            if order >= 4 && (0..w.cols(p.k)).any(|c| w.is_free(p.k, c)) {
                return Err(Fail::Indeterminate(format!("Bockstein on Z/{}", order)));
            }
        }
        summands.push(s);
    }
    for k in 0..len {
        for c in 0..w.cols(k) {
            if w.is_free(k, c) && !used[k][c] {
                summands.push(Summand::Sphere { n: deg(input, k) });
            }
        }
    }
    for (u, unit) in w.units.iter().enumerate() {
        if !unit_used[u] {
            summands.push(Summand::Moore { order: unit.order, n: deg(input, unit.k) });
        }
    }
    for k in 0..len {
        for &t in &input.degrees[k].torsion {
            if t % 2 == 1 {
                summands.push(Summand::Moore { order: t, n: deg(input, k) - 1 });
            }
        }
    }
    summands.sort();
    let out = WedgeDecomposition { summands, status: Status::Determined };
    reassembles(input, &out)?;
    if let Some(reason) = invisible_attaching_maps(&out.summands) {
        return Err(Fail::Indeterminate(reason));
    }
    Ok(out)
}

/// Attaching maps that cohomology operations up to `Sq^2` cannot see. The
/// stable stems `η^2` (three degrees) and beyond are undetected; `η^2` on the
/// bottom cell of a complex with an `η` attached there is absorbed by a shear.
fn invisible_attaching_maps(summands: &[Summand]) -> Option<String> {
    let cells = |s: &Summand| -> (i64, i64) {
        let n = s.bottom();
        match s {
            Summand::Sphere { .. } => (n, n),
            Summand::Moore { .. } => (n, n + 1),
            _ => (n, n + 2),
        }
    };
    let lo = summands.iter().map(|s| cells(s).0).min()?;
    let hi = summands.iter().map(|s| cells(s).1).max()?;
    if hi - lo > 3 {
        return Some(format!("cells span degrees {}..{}, beyond the reach of Sq^2", lo, hi));
    }
    let bare = |s: &Summand, n: i64| match *s {
        Summand::Sphere { n: m } => m == n,
        Summand::Moore { order, n: m } => m == n && order % 2 == 0,
        _ => false,
    };
    for a in summands.iter().map(|s| s.bottom()) {
        if summands.iter().any(|s| bare(s, a)) && summands.iter().any(|s| bare(s, a + 3)) {
            return Some(format!("possible η^2 from degree {} to {}", a, a + 3));
        }
    }
    None
}

fn deg(input: &QuantumInput, k: usize) -> i64 {
    input.i0 + k as i64
}

/// Bring `m[k]` to a partial permutation with admissible operations, never
/// disturbing patterns already found in lower degrees.
fn reduce_degree(w: &mut Work, k: usize, hit: &[Vec<bool>], pivots: &mut Vec<Pivot>) -> Result<(), Fail> {
    let (rows, cols) = (w.rows(k), w.cols(k));
    if rows == 0 {
        return Ok(());
    }
    // Free classes hit from k - 2 must not be sources.
    for c in 0..cols {
        if w.is_free(k, c) && hit[k][c] && !w.col_is_zero(k, c) {
            return Err(Fail::Indeterminate("Sq^2 chain over more than two degrees".into()));
        }
    }
    // Units whose lower class is hit from k - 1: clear their upper column
    // with free columns and upper columns of larger order.
    let fixed_units: Vec<usize> = (0..cols)
        .filter(|&c| match w.kinds[k][c] {
            Kind::Upper { unit, .. } => hit[k + 1][w.units[unit].lower],
            _ => false,
        })
        .collect();
    for &c in &fixed_units {
        if w.col_is_zero(k, c) {
            continue;
        }
        let order = w.order(k, c);
        let helpers: Vec<usize> = (0..cols)
            .filter(|&x| w.is_free(k, x) || (w.is_upper(k, x) && w.order(k, x) > order))
            .collect();
        let Some(combo) = solve_columns(w, k, &helpers, c) else {
            return Err(Fail::Indeterminate("torsion class in two patterns".into()));
        };
        for x in combo {
            w.col_add(k, c, x);
        }
    }
    let row_done = vec![false; rows];
    let mut col_done = vec![false; cols];
    for &c in &fixed_units {
        col_done[c] = true;
    }
    for c in 0..cols {
        if w.is_free(k, c) && hit[k][c] {
            col_done[c] = true;
        }
    }
    let free_rows: Vec<usize> = (0..rows).filter(|&r| w.is_free(k + 2, r)).collect();
    let mut lower_rows: Vec<usize> = (0..rows).filter(|&r| w.is_lower(k + 2, r)).collect();
    lower_rows.sort_by_key(|&r| std::cmp::Reverse(w.order(k + 2, r)));
    let free_cols: Vec<usize> = (0..cols).filter(|&c| w.is_free(k, c) && !col_done[c]).collect();
    let mut upper_cols: Vec<usize> = (0..cols).filter(|&c| w.is_upper(k, c) && !col_done[c]).collect();
    upper_cols.sort_by_key(|&c| std::cmp::Reverse(w.order(k, c)));

    let mut st = PivotState { k, row_done, col_done };
    // Free to free.
    for &c in &free_cols {
        if let Some(&r) = free_rows.iter().find(|&&r| !st.row_done[r] && w.m[k][r][c]) {
            st.pivot(w, r, c, Pattern::FreeFree, pivots);
        }
    }
    // Upper to free, larger orders first.
    for &c in &upper_cols {
        if let Some(&r) = free_rows.iter().find(|&&r| !st.row_done[r] && w.m[k][r][c]) {
            st.pivot(w, r, c, Pattern::UpperFree, pivots);
        }
    }
    // Free to lower, larger orders first.
    for &r in &lower_rows {
        if let Some(&c) = free_cols.iter().find(|&&c| !st.col_done[c] && w.m[k][r][c]) {
            st.pivot(w, r, c, Pattern::FreeLower, pivots);
        }
    }
    // Upper to lower: largest row order, then largest column order.
    loop {
        let open = |r: usize, c: usize| !st.row_done[r] && !st.col_done[c] && w.m[k][r][c];
        let Some(&r) = lower_rows.iter().find(|&&r| upper_cols.iter().any(|&c| open(r, c))) else {
            break;
        };
        let &c = upper_cols.iter().find(|&&c| open(r, c)).expect("row has an entry");
        st.pivot(w, r, c, Pattern::UpperLower, pivots);
    }
    Ok(())
}

struct PivotState {
    k: usize,
    row_done: Vec<bool>,
    col_done: Vec<bool>,
}

impl PivotState {
    /// Record a pivot and clear its row and column where admissible.
    fn pivot(&mut self, w: &mut Work, r: usize, c: usize, pattern: Pattern, pivots: &mut Vec<Pivot>) {
        let k = self.k;
        for c2 in 0..w.cols(k) {
            if c2 != c && w.m[k][r][c2] && can_add_col(w, k, c2, c) {
                w.col_add(k, c2, c);
            }
        }
        for r2 in 0..w.rows(k) {
            if r2 != r && w.m[k][r2][c] && can_add_row(w, k, r2, r) {
                w.row_add(k, r2, r);
            }
        }
        self.row_done[r] = true;
        self.col_done[c] = true;
        pivots.push(Pivot { k, row: r, col: c, pattern });
    }
}

/// Column `src` may be added to column `dst` of `m[k]`.
fn can_add_col(w: &Work, k: usize, dst: usize, src: usize) -> bool {
    match (w.kinds[k][dst], w.kinds[k][src]) {
        (Kind::Free, Kind::Free) | (Kind::Upper { .. }, Kind::Free) => true,
        (Kind::Upper { order: a, .. }, Kind::Upper { order: b, .. }) => a <= b,
        _ => false,
    }
}

/// Row `src` may be added to row `dst` of `m[k]`.
fn can_add_row(w: &Work, k: usize, dst: usize, src: usize) -> bool {
    match (w.kinds[k + 2][dst], w.kinds[k + 2][src]) {
        (Kind::Free, Kind::Free) | (Kind::Lower { .. }, Kind::Free) => true,
        (Kind::Lower { order: a, .. }, Kind::Lower { order: b, .. }) => a <= b,
        _ => false,
    }
}

/// Columns among `helpers` summing to column `target`, if any.
fn solve_columns(w: &Work, k: usize, helpers: &[usize], target: usize) -> Option<Vec<usize>> {
    use crate::gf2::{BitVec, Echelon};
    let rows = w.rows(k);
    let col = |c: usize| BitVec::from_ones(rows, (0..rows).filter(|&r| w.m[k][r][c]));
    let mut e = Echelon::default();
    for (i, &h) in helpers.iter().enumerate() {
        e.insert(col(h), Some(BitVec::from_ones(helpers.len(), [i])));
    }
    let mut v = col(target);
    let mut tag = BitVec::zeros(helpers.len());
    e.reduce(&mut v, Some(&mut tag));
    v.is_zero().then(|| tag.ones().map(|i| helpers[i]).collect())
}

fn verify_normal_form(w: &Work, pivots: &[Pivot]) -> Result<(), Fail> {
    let len = w.m.len();
    let mut ones = 0usize;
    for k in 0..len {
        for r in 0..w.rows(k) {
            ones += w.m[k][r].iter().filter(|&&b| b).count();
        }
    }
    for p in pivots {
        if !w.m[p.k][p.row][p.col] {
            return Err(Fail::Indeterminate("overlapping Sq^2 patterns".into()));
        }
    }
    if ones != pivots.len() {
        return Err(Fail::Indeterminate("overlapping Sq^2 patterns".into()));
    }
    // No class or cyclic summand may sit in two patterns.
    let mut seen: Vec<Vec<bool>> = w.kinds.iter().map(|v| vec![false; v.len()]).collect();
    let mut unit_seen = vec![false; w.units.len()];
    for p in pivots {
        for (d, c) in [(p.k, p.col), (p.k + 2, p.row)] {
            if std::mem::replace(&mut seen[d][c], true) {
                return Err(Fail::Indeterminate("class in two Sq^2 patterns".into()));
            }
            if let Kind::Upper { unit, .. } | Kind::Lower { unit, .. } = w.kinds[d][c] {
                if std::mem::replace(&mut unit_seen[unit], true) {
                    return Err(Fail::Indeterminate("torsion class in two patterns".into()));
                }
            }
        }
    }
    Ok(())
}

/// The decomposition must reproduce the integral groups and the invariant
/// `Sq^2` ranks of the input.
fn reassembles(input: &QuantumInput, out: &WedgeDecomposition) -> Result<(), Fail> {
    let len = input.len();
    let mut free = vec![0usize; len];
    let mut torsion: Vec<Vec<u64>> = vec![vec![]; len];
    let mut ranks = vec![FourRankSummary::default(); len];
    for s in &out.summands {
        for (d, order) in s.cohomology() {
            let k = (d - input.i0) as usize;
            if k >= len {
                return Err(Fail::Inconsistent(0, format!("summand {} outside the degree range", s)));
            }
            if order == 0 {
                free[k] += 1;
            } else {
                torsion[k].push(order);
            }
        }
        let k = (s.bottom() - input.i0) as usize;
        match s.pattern() {
            Some(Pattern::FreeFree) => ranks[k].free_free += 1,
            Some(Pattern::UpperFree) => ranks[k].upper_free += 1,
            Some(Pattern::FreeLower) => ranks[k].free_lower += 1,
            Some(Pattern::UpperLower) => ranks[k].upper_lower += 1,
            None => {}
        }
    }
    for k in 0..len {
        torsion[k].sort_unstable();
        let d = &input.degrees[k];
        if free[k] != d.free || torsion[k] != d.torsion {
            return Err(Fail::Inconsistent(k, "decomposition does not reassemble the groups".into()));
        }
    }
    for (k, r) in input.four_ranks().into_iter().enumerate() {
        let mut model = ranks[k];
        model.i = r.i;
        if model != r || r.total() != input.sq2_rank(k) {
            return Err(Fail::Inconsistent(k, "decomposition does not reassemble the Sq^2 ranks".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::BitVec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Input realised by a wedge of the given summands, in a standard basis.
    fn model(i0: i64, len: usize, summands: &[Summand]) -> QuantumInput {
        let mut degrees: Vec<DegreeInput> =
            (0..len).map(|_| DegreeInput { free: 0, torsion: vec![], classes: vec![], factors: vec![] }).collect();
        let mut next_factor = 0usize;
        let mut arrows: Vec<(usize, usize, usize, usize)> = vec![];
        let mut bocksteins: Vec<(usize, usize, usize)> = vec![];
        let free = |degrees: &mut Vec<DegreeInput>, k: usize| {
            degrees[k].free += 1;
            degrees[k].classes.push(ClassKind::Free);
            degrees[k].factors.push(None);
            degrees[k].classes.len() - 1
        };
        let unit = |degrees: &mut Vec<DegreeInput>, k: usize, order: u64, nf: &mut usize| {
            let f = Some(*nf);
            *nf += 1;
            degrees[k + 1].torsion.push(order);
            if order % 2 == 1 {
                return (usize::MAX, usize::MAX);
            }
            degrees[k].classes.push(ClassKind::Upper(order));
            degrees[k].factors.push(f);
            degrees[k + 1].classes.push(ClassKind::Lower(order));
            degrees[k + 1].factors.push(f);
            (degrees[k].classes.len() - 1, degrees[k + 1].classes.len() - 1)
        };
        for s in summands {
            let k = (s.bottom() - i0) as usize;
            match *s {
                Summand::Sphere { .. } => {
                    free(&mut degrees, k);
                }
                Summand::Moore { order, .. } => {
                    let (u, l) = unit(&mut degrees, k, order, &mut next_factor);
                    if order == 2 {
                        bocksteins.push((k, u, l));
                    }
                }
                Summand::Eta { .. } => {
                    let a = free(&mut degrees, k);
                    let b = free(&mut degrees, k + 2);
                    arrows.push((k, a, k + 2, b));
                }
                Summand::PEta { p, .. } => {
                    let (u, l) = unit(&mut degrees, k, p, &mut next_factor);
                    if p == 2 {
                        bocksteins.push((k, u, l));
                    }
                    let b = free(&mut degrees, k + 2);
                    arrows.push((k, u, k + 2, b));
                }
                Summand::EtaQ { q, .. } => {
                    let a = free(&mut degrees, k);
                    let (u, l) = unit(&mut degrees, k + 1, q, &mut next_factor);
                    if q == 2 {
                        bocksteins.push((k + 1, u, l));
                    }
                    arrows.push((k, a, k + 2, l));
                }
                Summand::PEtaQ { p, q, .. } => {
                    let (u1, l1) = unit(&mut degrees, k, p, &mut next_factor);
                    let (u2, l2) = unit(&mut degrees, k + 1, q, &mut next_factor);
                    for (d, u, l, o) in [(k, u1, l1, p), (k + 1, u2, l2, q)] {
                        if o == 2 {
                            bocksteins.push((d, u, l));
                        }
                    }
                    arrows.push((k, u1, k + 2, l2));
                }
            }
        }
        for d in &mut degrees {
            d.torsion.sort_unstable();
        }
        let dim = |k: usize| degrees.get(k).map_or(0, |d: &DegreeInput| d.classes.len());
        let mut sq1: Vec<Gf2Matrix> = (0..len).map(|k| Gf2Matrix::zeros(dim(k + 1), dim(k))).collect();
        for (k, u, l) in bocksteins {
            sq1[k].cols[u].flip(l);
        }
        let mut sq2: Vec<Gf2Matrix> = (0..len).map(|k| Gf2Matrix::zeros(dim(k + 2), dim(k))).collect();
        for (k, a, _, b) in arrows {
            sq2[k].cols[a].flip(b);
        }
        QuantumInput { i0, degrees, sq1, sq2 }
    }

    fn permute(input: &QuantumInput, rng: &mut ChaCha8Rng) -> QuantumInput {
        use rand::seq::SliceRandom;
        let len = input.len();
        let perms: Vec<Vec<usize>> = input
            .degrees
            .iter()
            .map(|d| {
                let mut p: Vec<usize> = (0..d.classes.len()).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        // perms[k][new] = old.
        let mut out = input.clone();
        for k in 0..len {
            let d = &input.degrees[k];
            out.degrees[k].classes = perms[k].iter().map(|&o| d.classes[o]).collect();
            out.degrees[k].factors = perms[k].iter().map(|&o| d.factors[o]).collect();
        }
        let remap = |m: &Gf2Matrix, src: &[usize], tgt: &[usize]| -> Gf2Matrix {
            let mut inv = vec![0; tgt.len()];
            for (new, &old) in tgt.iter().enumerate() {
                inv[old] = new;
            }
            let cols = src.iter().map(|&old| BitVec::from_ones(m.rows, m.cols[old].ones().map(|r| inv[r]))).collect();
            Gf2Matrix { rows: m.rows, cols }
        };
        let empty = vec![];
        for k in 0..len {
            out.sq1[k] = remap(&input.sq1[k], &perms[k], perms.get(k + 1).unwrap_or(&empty));
            out.sq2[k] = remap(&input.sq2[k], &perms[k], perms.get(k + 2).unwrap_or(&empty));
        }
        out
    }

    /// Replace free class `dst` at degree `k` by `dst + src` (both free).
    fn mix_free(input: &mut QuantumInput, k: usize, dst: usize, src: usize) {
        let s = input.sq2[k].cols[src].clone();
        input.sq2[k].cols[dst].xor(&s);
        if k >= 2 {
            // Coordinates: the src coordinate absorbs the dst coordinate.
            for c in &mut input.sq2[k - 2].cols {
                if c.get(dst) {
                    c.flip(src);
                }
            }
        }
    }

    fn wedge(input: &QuantumInput) -> String {
        classify(input).unwrap().to_string()
    }

    #[test]
    fn elementary_models_classify_to_themselves() {
        let cases: Vec<(usize, Vec<Summand>)> = vec![
            (3, vec![Summand::Eta { n: 0 }, Summand::Sphere { n: 2 }, Summand::Sphere { n: 2 }]),
            (4, vec![Summand::PEta { p: 2, n: 0 }]),
            (4, vec![Summand::EtaQ { q: 4, n: 0 }]),
            (4, vec![Summand::EtaQ { q: 2, n: 0 }, Summand::Sphere { n: 1 }]),
            (5, vec![Summand::PEtaQ { p: 2, q: 4, n: 0 }, Summand::Sphere { n: 0 }]),
            (4, vec![Summand::Moore { order: 3, n: 1 }, Summand::Moore { order: 2, n: 0 }]),
            (
                4,
                vec![
                    Summand::Eta { n: 0 },
                    Summand::PEta { p: 2, n: 0 },
                    Summand::Moore { order: 4, n: 1 },
                    Summand::Sphere { n: 3 },
                ],
            ),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (len, mut summands) in cases {
            summands.sort();
            let input = model(0, len, &summands);
            let want = WedgeDecomposition { summands: summands.clone(), status: Status::Determined };
            assert_eq!(classify(&input).unwrap(), want, "{:?}", summands);
            for _ in 0..8 {
                let mut p = permute(&input, &mut rng);
                // Random free basis changes in every degree.
                for k in 0..len {
                    let free: Vec<usize> =
                        (0..p.degrees[k].classes.len()).filter(|&c| p.degrees[k].classes[c] == ClassKind::Free).collect();
                    if free.len() >= 2 {
                        for _ in 0..4 {
                            let a = free[rng.gen_range(0..free.len())];
                            let b = free[rng.gen_range(0..free.len())];
                            if a != b {
                                mix_free(&mut p, k, a, b);
                            }
                        }
                    }
                }
                assert_eq!(classify(&p).unwrap(), want, "{:?}", summands);
            }
        }
    }

    #[test]
    fn upper_plus_free_is_a_basis_change() {
        // H^0 = Z, H^1 = Z/2, H^2 = Z with Sq^2 hitting from both the free
        // class and the upper class: adding the free class to the upper one
        // leaves X(η,0) and a Moore space.
        let mut input = model(0, 3, &[Summand::Eta { n: 0 }, Summand::Moore { order: 2, n: 0 }]);
        let upper = input.degrees[0].classes.iter().position(|c| matches!(c, ClassKind::Upper(_))).unwrap();
        let free = input.degrees[0].classes.iter().position(|c| *c == ClassKind::Free).unwrap();
        let f = input.sq2[0].cols[free].clone();
        input.sq2[0].cols[upper].xor(&f);
        assert_eq!(wedge(&input), "M(Z/2,0) ∨ X(η,0)");
    }

    #[test]
    fn chains_and_bad_targets_are_indeterminate() {
        // A free class that is both hit and a source.
        let mut input = model(0, 5, &[Summand::Eta { n: 0 }, Summand::Sphere { n: 4 }]);
        input.sq2[2] = Gf2Matrix { rows: 1, cols: vec![BitVec::from_ones(1, [0])] };
        assert!(!classify(&input).unwrap().is_determined());
        // Sq^2 landing on an upper class.
        let mut input = model(0, 4, &[Summand::Sphere { n: 0 }, Summand::Moore { order: 2, n: 2 }]);
        input.sq2[0].cols[0].flip(0);
        let w = classify(&input).unwrap();
        assert!(matches!(w.status, Status::Indeterminate(_)));
    }

    #[test]
    fn bockstein_on_z4_is_indeterminate() {
        let input = model(0, 4, &[Summand::PEta { p: 4, n: 0 }, Summand::Sphere { n: 0 }]);
        assert_eq!(classify(&input).unwrap().status, Status::Indeterminate("Bockstein on Z/4".into()));
    }

    #[test]
    fn four_ranks_are_invariant() {
        let input = model(
            0,
            5,
            &[Summand::Eta { n: 0 }, Summand::PEta { p: 2, n: 0 }, Summand::EtaQ { q: 2, n: 0 }, Summand::Sphere { n: 2 }],
        );
        let r = input.four_ranks()[0];
        assert_eq!((r.free_free, r.upper_free, r.free_lower, r.upper_lower), (1, 1, 1, 0));
        assert_eq!(r.total(), input.sq2_rank(0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..8 {
            assert_eq!(permute(&input, &mut rng).four_ranks()[0], r);
        }
    }

    #[test]
    fn inconsistent_sq1_is_an_error() {
        let mut input = model(0, 3, &[Summand::Moore { order: 2, n: 0 }]);
        input.sq1[0] = Gf2Matrix::zeros(1, 1);
        assert!(classify(&input).is_err());
    }

    #[test]
    fn eta_squared_gap_is_indeterminate() {
        let input = model(0, 4, &[Summand::Sphere { n: 0 }, Summand::Sphere { n: 1 }, Summand::Sphere { n: 3 }]);
        assert!(!classify(&input).unwrap().is_determined());
        // Absorbed on the bottom cell of X(η2).
        let input = model(0, 4, &[Summand::EtaQ { q: 2, n: 0 }, Summand::Sphere { n: 2 }, Summand::Sphere { n: 3 }]);
        assert_eq!(wedge(&input), "S^2 ∨ S^3 ∨ X(η2,0)");
    }

    #[test]
    fn long_cell_span_is_indeterminate() {
        let input = model(0, 6, &[Summand::Eta { n: 0 }, Summand::Eta { n: 2 }, Summand::Moore { order: 4, n: 3 }]);
        assert!(!classify(&input).unwrap().is_determined());
    }

    #[test]
    fn width_counts_torsion() {
        let input = model(0, 4, &[Summand::Sphere { n: 0 }, Summand::Moore { order: 3, n: 2 }]);
        assert_eq!(input.width(), 4);
    }
}
