//! Resolutions, labelled objects and quantum gradings.
//!
//! A multidegree `s` has `0 <= s_j <= r_j` (or `r_j <= s_j <= 0`). Tangle `j`
//! is smoothed horizontally (`L1-R1`, `L2-R2`) when `s_j = 0` and vertically
//! (`L1-L2`, `R1-R2`) otherwise. An object is a resolution together with an
//! exponent in `0..n` on every circle.

use crate::diagram::{port_id, port_of, GluedDiagram, Port};
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::OnceLock;
use thiserror::Error;

/// Grading convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    /// Khovanov normalization, `n = 2`, any glued diagram.
    Kh,
    /// `sl_n` normalization, matched diagrams.
    Sln,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SetupError {
    #[error("n must be at least 2")]
    SmallN,
    #[error("n > 2 needs a matched diagram")]
    NotMatched,
    #[error("Kh mode needs n = 2")]
    KhNeedsTwo,
    #[error("too many circles for label packing ({0})")]
    TooManyCircles(usize),
    #[error("surgery does not change the circle count at tangle t{0}: non-planar diagram")]
    NonPlanar(usize),
}

/// Circle partition of one resolution; circles numbered by smallest port.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circles {
    pub circle_of: Vec<u8>,
    pub count: usize,
}

/// Labels packed four bits per circle, circle 0 in the highest used nibble
/// so that integer order is lexicographic order.
pub type Labels = u128;

pub const MAX_CIRCLES: usize = 32;

/// A labelled resolution.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowObject {
    pub s: Vec<i32>,
    pub labels: Vec<u8>,
}

impl FlowObject {
    pub fn t(&self) -> i32 {
        self.s.iter().sum()
    }
}

/// Pack exponents into a sortable key.
pub fn pack(labels: &[u8]) -> Labels {
    labels.iter().fold(0u128, |acc, &e| (acc << 4) | e as u128)
}

pub fn unpack(code: Labels, count: usize) -> Vec<u8> {
    (0..count).map(|k| ((code >> (4 * (count - 1 - k))) & 15) as u8).collect()
}

/// Everything fixed by (diagram, n, mode): multidegree ranges and the
/// grading rule.
#[derive(Debug)]
pub struct Setup {
    pub diagram: GluedDiagram,
    pub r: Vec<i32>,
    pub n: u8,
    pub mode: Mode,
    radix: Vec<u64>,
    circles: Vec<OnceLock<Circles>>,
    /// `g[j][|s_j|]`: grading contribution of coordinate `j`.
    g: Vec<Vec<i64>>,
    alpha: i64,
    lambda: i64,
    k0: i64,
}

/// Kind of a single coordinate step `s -> s + e_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Surgery,
    /// Points `P, M` (cases 1a/1c).
    PairStep,
    /// Points `P_k` (cases 1b/1d).
    CyclicStep,
}

impl Setup {
    pub fn new(diagram: GluedDiagram, n: u8, mode: Mode) -> Result<Self, SetupError> {
        if n < 2 {
            return Err(SetupError::SmallN);
        }
        match mode {
            Mode::Kh if n != 2 => return Err(SetupError::KhNeedsTwo),
            Mode::Sln if !diagram.is_matched() && n > 2 => return Err(SetupError::NotMatched),
            _ => {}
        }
        let r = diagram.indices();
        let mut radix = vec![];
        let mut acc = 1u64;
        for &rj in &r {
            radix.push(acc);
            acc = acc.saturating_mul(rj.unsigned_abs() as u64 + 1);
        }
        let total = acc;
        let ni = n as i64;
        let (alpha, lambda) = match mode {
            Mode::Kh => (1, -2),
            Mode::Sln => (1 - ni, 2),
        };
        // q is preserved by every point: a step raising the exponent sum by
        // `e` and the circle count by `dc` must shift g by `-lambda*e - alpha*dc`.
        let surgery = alpha;
        let pair = -lambda;
        let cyclic = -lambda * (ni - 1);
        let mut g = vec![];
        for &rj in &r {
            let len = rj.unsigned_abs() as usize;
            let mut v = vec![0i64; len + 1];
            if rj > 0 {
                for s in 1..=len {
                    let inc = match s - 1 {
                        0 => surgery,
                        p if p % 2 == 1 => pair,
                        _ => cyclic,
                    };
                    v[s] = v[s - 1] + inc;
                }
            } else {
                // v[d] is g(-d); the step -d -> -d+1 has its source at -d.
                for d in 1..=len {
                    let inc = match d {
                        1 => surgery,
                        d if d % 2 == 0 => pair,
                        _ => cyclic,
                    };
                    v[d] = v[d - 1] - inc;
                }
            }
            g.push(v);
        }
        let k0 = match mode {
            Mode::Kh => {
                let braid_r: i64 =
                    diagram.tangles.iter().filter(|t| t.braid).map(|t| t.r as i64).sum();
                -diagram.big_r() + diagram.writhe() + braid_r
            }
            Mode::Sln => ni * diagram.big_r(),
        };
        let circles = (0..if total <= 1 << 24 { total as usize } else { 0 }).map(|_| OnceLock::new()).collect();
        Ok(Setup { diagram, r, n, mode, radix, circles, g, alpha, lambda, k0 })
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }

    pub fn resolution_count(&self) -> u64 {
        self.r.iter().map(|r| r.unsigned_abs() as u64 + 1).product()
    }

    pub fn code(&self, s: &[i32]) -> u64 {
        s.iter().zip(&self.radix).map(|(&x, &w)| x.unsigned_abs() as u64 * w).sum()
    }

    pub fn decode(&self, code: u64) -> Vec<i32> {
        self.r
            .iter()
            .zip(&self.radix)
            .map(|(&rj, &w)| {
                let d = ((code / w) % (rj.unsigned_abs() as u64 + 1)) as i32;
                d * rj.signum()
            })
            .collect()
    }

    /// Circles of the resolution `s`, cached when the cube is small.
    pub fn circles(&self, s: &[i32]) -> Circles {
        let code = self.code(s);
        match self.circles.get(code as usize) {
            Some(cell) => cell.get_or_init(|| trace_circles(&self.diagram, s)).clone(),
            None => trace_circles(&self.diagram, s),
        }
    }

    /// Circle count without cloning the partition.
    pub fn circle_count(&self, s: &[i32]) -> usize {
        let code = self.code(s);
        match self.circles.get(code as usize) {
            Some(cell) => cell.get_or_init(|| trace_circles(&self.diagram, s)).count,
            None => trace_circles(&self.diagram, s).count,
        }
    }

    /// Quantum grading of a labelled resolution.
    pub fn q(&self, s: &[i32], circles: usize, exp_sum: i64) -> i64 {
        let g: i64 = s.iter().enumerate().map(|(j, &x)| self.g[j][x.unsigned_abs() as usize]).sum();
        self.alpha * circles as i64 + g + self.lambda * exp_sum + self.k0
    }

    pub fn q_of(&self, o: &FlowObject) -> i64 {
        let e: i64 = o.labels.iter().map(|&x| x as i64).sum();
        self.q(&o.s, o.labels.len(), e)
    }

    /// Reported homological degree for internal degree `t`.
    pub fn reported_i(&self, t: i32) -> i64 {
        let d = &self.diagram;
        match self.mode {
            Mode::Kh => {
                let shift = d.writhe() - d.big_r();
                assert!(shift % 2 == 0, "w - R is even for every oriented diagram");
                t as i64 + shift / 2
            }
            Mode::Sln => t as i64 - d.big_r(),
        }
    }

    /// Internal degree for reported degree `i`.
    pub fn internal_t(&self, i: i64) -> i64 {
        i - (self.reported_i(0))
    }

    pub fn step_kind(&self, j: usize, sj: i32) -> StepKind {
        let rj = self.r[j];
        if (rj > 0 && sj == 0) || (rj < 0 && sj == -1) {
            StepKind::Surgery
        } else if (rj > 0 && sj % 2 == 1) || (rj < 0 && sj % 2 == 0) {
            StepKind::PairStep
        } else {
            StepKind::CyclicStep
        }
    }

    /// Whether `s_j + 1` is still inside the range of coordinate `j`.
    pub fn can_step(&self, j: usize, sj: i32) -> bool {
        let rj = self.r[j];
        if rj > 0 {
            sj < rj
        } else {
            sj < 0
        }
    }

    /// All multidegrees in lexicographic order.
    pub fn multidegrees(&self) -> Vec<Vec<i32>> {
        let mut out = vec![vec![]];
        for &rj in &self.r {
            let range: Vec<i32> = if rj > 0 { (0..=rj).collect() } else { (rj..=0).collect() };
            out = out
                .into_iter()
                .flat_map(|p| {
                    range.iter().map(move |&x| {
                        let mut v = p.clone();
                        v.push(x);
                        v
                    })
                })
                .collect();
        }
        out
    }

    /// Objects of quantum degree `q`, sorted by id.
    pub fn objects_at_q(&self, q: i64) -> Result<Vec<FlowObject>, SetupError> {
        let mut out = vec![];
        for s in self.multidegrees() {
            let c = self.circle_count(&s);
            if c > MAX_CIRCLES {
                return Err(SetupError::TooManyCircles(c));
            }
            let base = self.q(&s, c, 0);
            let diff = q - base;
            if diff % self.lambda != 0 {
                continue;
            }
            let sum = diff / self.lambda;
            for labels in compositions(c, sum, self.n - 1) {
                out.push(FlowObject { s: s.clone(), labels });
            }
        }
        Ok(out)
    }

    /// Every quantum degree with at least one object, with object counts.
    pub fn q_histogram(&self) -> BTreeMap<i64, u64> {
        let mut h = BTreeMap::new();
        for s in self.multidegrees() {
            let c = self.circle_count(&s);
            // Number of labelings with exponent sum e, by a small convolution.
            let mut ways = vec![1u64];
            for _ in 0..c {
                let mut next = vec![0u64; ways.len() + self.n as usize - 1];
                for (e, &w) in ways.iter().enumerate() {
                    for k in 0..self.n as usize {
                        next[e + k] += w;
                    }
                }
                ways = next;
            }
            for (e, &w) in ways.iter().enumerate() {
                *h.entry(self.q(&s, c, e as i64)).or_insert(0) += w;
            }
        }
        h
    }

    /// All objects, sorted by id.
    pub fn enumerate_objects(&self) -> Vec<FlowObject> {
        let mut out = vec![];
        for s in self.multidegrees() {
            let c = self.circle_count(&s);
            let max = c as i64 * (self.n as i64 - 1);
            for e in 0..=max {
                for labels in compositions(c, e, self.n - 1) {
                    out.push(FlowObject { s: s.clone(), labels });
                }
            }
        }
        out.sort();
        out
    }
}

/// All sequences of `len` values in `0..=max` summing to `sum`, in
/// lexicographic order.
pub fn compositions(len: usize, sum: i64, max: u8) -> Vec<Vec<u8>> {
    let mut out = vec![];
    if sum < 0 || sum > len as i64 * max as i64 {
        return out;
    }
    let mut cur = vec![0u8; len];
    fn rec(k: usize, left: i64, max: u8, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        let len = cur.len();
        if k == len {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let rest = (len - k - 1) as i64 * max as i64;
        let lo = (left - rest).max(0);
        let hi = left.min(max as i64);
        for v in lo..=hi {
            cur[k] = v as u8;
            rec(k + 1, left - v, max, cur, out);
        }
    }
    rec(0, sum, max, &mut cur, &mut out);
    out
}

/// Port reached inside tangle `j` under the given smoothing.
pub fn smoothing_partner(id: usize, vertical: bool) -> usize {
    let (t, p) = port_of(id);
    let q = match (p, vertical) {
        (Port::L1, false) => Port::R1,
        (Port::R1, false) => Port::L1,
        (Port::L2, false) => Port::R2,
        (Port::R2, false) => Port::L2,
        (Port::L1, true) => Port::L2,
        (Port::L2, true) => Port::L1,
        (Port::R1, true) => Port::R2,
        (Port::R2, true) => Port::R1,
    };
    port_id(t, q)
}

/// Trace the circles of resolution `s`.
pub fn trace_circles(d: &GluedDiagram, s: &[i32]) -> Circles {
    let np = d.num_ports();
    let mut circle_of = vec![u8::MAX; np];
    let mut count = 0usize;
    for start in 0..np {
        if circle_of[start] != u8::MAX {
            continue;
        }
        let c = count as u8;
        count += 1;
        let mut p = start;
        loop {
            circle_of[p] = c;
            let (t, _) = port_of(p);
            let q = smoothing_partner(p, s[t] != 0);
            circle_of[q] = c;
            p = d.partner(q);
            if p == start {
                break;
            }
        }
    }
    Circles { circle_of, count }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{capped_tangle, gen_pretzel, gen_torus_braid};

    #[test]
    fn table_objects_of_8_19() {
        let setup = Setup::new(gen_pretzel(&[-2, 3, 3]).unwrap(), 2, Mode::Kh).unwrap();
        let objs = setup.objects_at_q(11).unwrap();
        assert_eq!(objs.len(), 31);
        let mut hist = BTreeMap::new();
        for o in &objs {
            *hist.entry(setup.reported_i(o.t())).or_insert(0) += 1;
        }
        assert_eq!(hist, BTreeMap::from([(1, 1), (2, 8), (3, 14), (4, 8)]));
        // Two of the table's objects.
        assert!(objs.contains(&FlowObject { s: vec![-1, 0, 0], labels: vec![0, 0] }));
        assert!(objs.contains(&FlowObject { s: vec![-2, 2, 0], labels: vec![0] }));
    }

    #[test]
    fn object_count_identity() {
        let setup = Setup::new(capped_tangle(2).unwrap(), 3, Mode::Sln).unwrap();
        let total: u64 = setup
            .multidegrees()
            .iter()
            .map(|s| 3u64.pow(setup.circle_count(s) as u32))
            .sum();
        assert_eq!(setup.enumerate_objects().len() as u64, total);
        assert_eq!(setup.q_histogram().values().sum::<u64>(), total);
        assert_eq!(setup.multidegrees().len(), 3);
        assert_eq!(setup.circle_count(&[0]), 1);
        assert_eq!(setup.circle_count(&[1]), 2);
    }

    #[test]
    fn grading_preserved_by_steps() {
        // Each step kind shifts g by the amount that keeps q fixed.
        for (d, n, mode) in [
            (gen_pretzel(&[-2, 3, 3]).unwrap(), 2u8, Mode::Kh),
            (gen_pretzel(&[-2, 2, 2]).unwrap(), 3, Mode::Sln),
            (gen_pretzel(&[-4, 2, 6]).unwrap(), 4, Mode::Sln),
        ] {
            let setup = Setup::new(d, n, mode).unwrap();
            let ni = n as i64;
            for j in 0..setup.m() {
                let rj = setup.r[j];
                let range: Vec<i32> = if rj > 0 { (0..rj).collect() } else { (rj..0).collect() };
                for sj in range {
                    let mut s = vec![0; setup.m()];
                    s[j] = sj;
                    let mut t = s.clone();
                    t[j] += 1;
                    let dg = setup.q(&t, 0, 0) - setup.q(&s, 0, 0);
                    let want = match setup.step_kind(j, sj) {
                        StepKind::Surgery => setup.alpha,
                        StepKind::PairStep => -setup.lambda,
                        StepKind::CyclicStep => -setup.lambda * (ni - 1),
                    };
                    assert_eq!(dg, want);
                }
            }
        }
    }

    #[test]
    fn kh_anchor_formula() {
        let d = gen_pretzel(&[-2, 3, 3]).unwrap();
        let setup = Setup::new(d.clone(), 2, Mode::Kh).unwrap();
        let s: Vec<i32> = d.indices();
        let c = setup.circle_count(&s) as i64;
        let sgn: i64 = s.iter().map(|r| r.signum() as i64).sum();
        let braid_r: i64 = d.tangles.iter().filter(|t| t.braid).map(|t| t.r as i64).sum();
        assert_eq!(setup.q(&s, c as usize, 0), d.big_r() - sgn + d.writhe() + braid_r + c);
    }

    #[test]
    fn sln_anchor_formula() {
        let d = gen_pretzel(&[-2, 2, 2]).unwrap();
        let setup = Setup::new(d.clone(), 3, Mode::Sln).unwrap();
        let s = vec![0; 3];
        let c = setup.circle_count(&s);
        assert_eq!(setup.q(&s, c, 0), 3 * d.big_r() + (1 - 3) * c as i64);
    }

    #[test]
    fn mode_checks() {
        let d = gen_pretzel(&[-2, 3, 3]).unwrap();
        assert_eq!(Setup::new(d.clone(), 3, Mode::Sln).unwrap_err(), SetupError::NotMatched);
        assert_eq!(Setup::new(d, 3, Mode::Kh).unwrap_err(), SetupError::KhNeedsTwo);
    }

    #[test]
    fn mirror_negates_gradings() {
        let d = gen_torus_braid(2, 3).unwrap();
        let a = Setup::new(d.clone(), 2, Mode::Kh).unwrap().q_histogram();
        let b = Setup::new(d.mirror(), 2, Mode::Kh).unwrap().q_histogram();
        let neg: BTreeMap<i64, u64> = a.iter().map(|(&q, &c)| (-q, c)).collect();
        assert_eq!(neg, b);
    }

    #[test]
    fn packing_orders_lexicographically() {
        let a = pack(&[0, 1, 1]);
        let b = pack(&[1, 0, 0]);
        assert!(a < b);
        assert_eq!(unpack(b, 3), vec![1, 0, 0]);
        assert_eq!(compositions(3, 2, 1), vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
    }
}
