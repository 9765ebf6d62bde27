//! The flow category of a glued diagram in one quantum degree: objects,
//! 0-dimensional moduli (signed points with sock images) and 1-dimensional
//! moduli (framed intervals pairing broken flows).

use crate::diagram::{port_id, Port};
use crate::resolution::{pack, Circles, FlowObject, Labels, Setup, SetupError, StepKind};
use crate::sockcell::{self, Cell2, Phi, SockInterval};
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

/// Which pair of arc-adjacent segments drives the ladybug matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Ladybug {
    Right,
    Left,
}

/// Label transition type of a single step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Case {
    /// Same circle, exponent `+1`, points `P, M`.
    C1a,
    /// Same circle, `1 -> x^{n-1}`, points `P_1..P_n`.
    C1b,
    /// Two circles, one exponent `+1`: right circle `P`, left circle `M`.
    C1c,
    /// Two circles, exponents `+k` (left) and `+(n-1-k)` (right), point `P_{k+1}`.
    C1d,
    /// Surgery splitting one circle.
    C2a,
    /// Surgery merging two circles.
    C2b,
}

/// A point of a 0-dimensional moduli space, stored at its source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Point {
    pub target: u32,
    pub coord: u16,
    pub case: Case,
    pub phi: Phi,
    pub sign: bool,
}

/// Point with explicit endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ModuliPoint {
    pub source: u32,
    pub target: u32,
    pub coord: u16,
    pub case: Case,
    pub phi: Phi,
    pub sign: bool,
}

/// Broken flow `x -> w -> z`: point `kp` of `x`, then point `kq` of `w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BrokenFlow {
    pub x: u32,
    pub kp: u32,
    pub kq: u32,
}

/// An interval of a 1-dimensional moduli space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ModuliInterval {
    pub ends: [BrokenFlow; 2],
    pub cell: Cell2,
    pub frame: bool,
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error("unpaired broken flow {0}")]
    Unpaired(String),
    #[error("ladybug matching failed: {0}")]
    Ladybug(String),
    #[error("sock pattern violated: {0}")]
    SockPattern(String),
}

/// Objects and points of one quantum degree.
pub struct Bucket<'a> {
    pub setup: &'a Setup,
    pub q: i64,
    pub ladybug: Ladybug,
    pub objects: Vec<FlowObject>,
    pub out: Vec<Vec<Point>>,
    /// Per target: `(source, index into out[source])`.
    pub inc: Vec<Vec<(u32, u32)>>,
    index: FxHashMap<(u64, Labels), u32>,
}

/// Circle bookkeeping for one step `x -> x + e_j`.
struct StepGeometry {
    kind: StepKind,
    /// For every target circle, the source circle it continues, if untouched.
    carried: Vec<Option<usize>>,
    /// Source circles meeting tangle `j`, and target circles meeting it.
    src_inv: Vec<usize>,
    dst_inv: Vec<usize>,
}

fn involved(c: &Circles, j: usize) -> Vec<usize> {
    let mut v: Vec<usize> = Port::ALL.iter().map(|&p| c.circle_of[port_id(j, p)] as usize).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn geometry(setup: &Setup, s: &[i32], src: &Circles, j: usize) -> Result<StepGeometry, SetupError> {
    let kind = setup.step_kind(j, s[j]);
    let mut t = s.to_vec();
    t[j] += 1;
    let target = if kind == StepKind::Surgery { setup.circles(&t) } else { src.clone() };
    let src_inv = involved(src, j);
    let dst_inv = involved(&target, j);
    let mut carried = vec![None; target.count];
    if kind == StepKind::Surgery {
        if src_inv.len() + dst_inv.len() != 3 {
            return Err(SetupError::NonPlanar(j));
        }
        for (p, &c) in target.circle_of.iter().enumerate() {
            let c = c as usize;
            if carried[c].is_none() && !dst_inv.contains(&c) {
                carried[c] = Some(src.circle_of[p] as usize);
            }
        }
    } else {
        for (c, slot) in carried.iter_mut().enumerate() {
            *slot = Some(c);
        }
    }
    Ok(StepGeometry { kind, carried, src_inv, dst_inv })
}

/// Target labelings of a step with their case and sock image.
fn step_targets(setup: &Setup, g: &StepGeometry, src: &Circles, j: usize, z: &[u8]) -> Vec<(Vec<u8>, Case, Phi)> {
    let n = setup.n;
    let top = n - 1;
    let mut out = vec![];
    let base: Vec<u8> = g.carried.iter().map(|c| c.map(|c| z[c]).unwrap_or(0)).collect();
    match g.kind {
        StepKind::Surgery => {
            if g.src_inv.len() == 1 {
                let zc = z[g.src_inv[0]];
                let (c1, c2) = (g.dst_inv[0], g.dst_inv[1]);
                for u in 0..n {
                    let v = zc as i32 + top as i32 - u as i32;
                    if (0..n as i32).contains(&v) {
                        let mut y = base.clone();
                        y[c1] = u;
                        y[c2] = v as u8;
                        out.push((y, Case::C2a, Phi::P));
                    }
                }
            } else {
                let sum = z[g.src_inv[0]] + z[g.src_inv[1]];
                if sum <= top {
                    let mut y = base;
                    y[g.dst_inv[0]] = sum;
                    out.push((y, Case::C2b, Phi::P));
                }
            }
        }
        kind => {
            let cl = src.circle_of[port_id(j, Port::L1)] as usize;
            let cr = src.circle_of[port_id(j, Port::R1)] as usize;
            match (cl == cr, kind) {
                (true, StepKind::PairStep) => {
                    if z[cl] < top {
                        let mut y = base;
                        y[cl] += 1;
                        out.push((y.clone(), Case::C1a, Phi::P));
                        out.push((y, Case::C1a, Phi::M));
                    }
                }
                (true, _) => {
                    if z[cl] == 0 {
                        let mut y = base;
                        y[cl] = top;
                        for k in 1..=n {
                            out.push((y.clone(), Case::C1b, Phi::Pk(k)));
                        }
                    }
                }
                (false, StepKind::PairStep) => {
                    if z[cr] < top {
                        let mut y = base.clone();
                        y[cr] += 1;
                        out.push((y, Case::C1c, Phi::P));
                    }
                    if z[cl] < top {
                        let mut y = base;
                        y[cl] += 1;
                        out.push((y, Case::C1c, Phi::M));
                    }
                }
                (false, _) => {
                    for k in 0..n {
                        let yl = z[cl] + k;
                        let yr = z[cr] as i32 + top as i32 - k as i32;
                        if yl <= top && (0..n as i32).contains(&yr) {
                            let mut y = base.clone();
                            y[cl] = yl;
                            y[cr] = yr as u8;
                            out.push((y, Case::C1d, Phi::Pk(k + 1)));
                        }
                    }
                }
            }
        }
    }
    out
}

impl<'a> Bucket<'a> {
    /// Build all objects and points of quantum degree `q`.
    pub fn build(setup: &'a Setup, q: i64, ladybug: Ladybug) -> Result<Self, FlowError> {
        let mut objects = setup.objects_at_q(q)?;
        objects.sort();
        let mut index = FxHashMap::default();
        for (k, o) in objects.iter().enumerate() {
            index.insert((setup.code(&o.s), pack(&o.labels)), k as u32);
        }
        let mut b = Bucket { setup, q, ladybug, objects, out: vec![], inc: vec![], index };
        let out: Result<Vec<Vec<Point>>, FlowError> =
            (0..b.objects.len()).into_par_iter().map(|x| b.points_from(x as u32)).collect();
        b.out = out?;
        let mut inc = vec![vec![]; b.objects.len()];
        for (x, pts) in b.out.iter().enumerate() {
            for (k, p) in pts.iter().enumerate() {
                inc[p.target as usize].push((x as u32, k as u32));
            }
        }
        b.inc = inc;
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn t(&self, x: u32) -> i32 {
        self.objects[x as usize].t()
    }

    /// Object id of a labelled resolution, if it lies in this bucket.
    pub fn find(&self, o: &FlowObject) -> Option<u32> {
        self.index.get(&(self.setup.code(&o.s), pack(&o.labels))).copied()
    }

    fn points_from(&self, x: u32) -> Result<Vec<Point>, FlowError> {
        let setup = self.setup;
        let o = &self.objects[x as usize];
        let src = setup.circles(&o.s);
        let mut pts = vec![];
        for j in 0..setup.m() {
            if !setup.can_step(j, o.s[j]) {
                continue;
            }
            let g = geometry(setup, &o.s, &src, j)?;
            let mut t = o.s.clone();
            t[j] += 1;
            for (y, case, phi) in step_targets(setup, &g, &src, j, &o.labels) {
                let target = FlowObject { s: t.clone(), labels: y };
                let Some(id) = self.find(&target) else {
                    panic!("quantum grading not preserved: {:?} -> {:?}", o, target);
                };
                pts.push(Point { target: id, coord: j as u16, case, phi, sign: sockcell::sign(&o.s, j, phi) });
            }
        }
        Ok(pts)
    }

    /// Points from `x` to `y`.
    pub fn zero_dim_moduli(&self, x: u32, y: u32) -> Vec<ModuliPoint> {
        self.out[x as usize]
            .iter()
            .filter(|p| p.target == y)
            .map(|p| ModuliPoint { source: x, target: y, coord: p.coord, case: p.case, phi: p.phi, sign: p.sign })
            .collect()
    }

    /// Sparse cochain differential: `(target, source, coefficient)`, nonzero
    /// entries only, sorted.
    pub fn differential(&self) -> Vec<(u32, u32, i64)> {
        let mut entries = vec![];
        for (x, pts) in self.out.iter().enumerate() {
            let mut acc: FxHashMap<u32, i64> = FxHashMap::default();
            for p in pts {
                *acc.entry(p.target).or_insert(0) += if p.sign { -1 } else { 1 };
            }
            for (y, c) in acc {
                if c != 0 {
                    entries.push((y, x as u32, c));
                }
            }
        }
        entries.sort_unstable();
        entries
    }

    pub fn point(&self, x: u32, k: u32) -> &Point {
        &self.out[x as usize][k as usize]
    }

    /// Endpoint objects `(w, z)` of a broken flow.
    pub fn flow_ends(&self, f: &BrokenFlow) -> (u32, u32) {
        let w = self.point(f.x, f.kp).target;
        (w, self.point(w, f.kq).target)
    }

    /// All broken flows from `x` to `z`.
    pub fn broken_flows(&self, x: u32, z: u32) -> Vec<BrokenFlow> {
        let mut v = vec![];
        for (kp, p) in self.out[x as usize].iter().enumerate() {
            for (kq, q) in self.out[p.target as usize].iter().enumerate() {
                if q.target == z {
                    v.push(BrokenFlow { x, kp: kp as u32, kq: kq as u32 });
                }
            }
        }
        v
    }

    /// The interval containing the broken flow `f`: its other end, covered
    /// cell and frame.
    pub fn partner(&self, f: &BrokenFlow) -> Result<ModuliInterval, FlowError> {
        let p = *self.point(f.x, f.kp);
        let w = p.target;
        let q = *self.point(w, f.kq);
        let z = q.target;
        let (j, i) = (p.coord as usize, q.coord as usize);
        let a = &self.objects[f.x as usize].s;
        let r = &self.setup.r;
        if j == i {
            let flows: Vec<BrokenFlow> = self
                .broken_flows(f.x, z)
                .into_iter()
                .filter(|g| self.point(g.x, g.kp).coord as usize == j)
                .collect();
            if flows.len() != 2 {
                return Err(FlowError::Unpaired(format!("{} among {} same-coordinate flows", self.describe(f), flows.len())));
            }
            let other = if flows[0] == *f { flows[1] } else { flows[0] };
            let cell = sockcell::interval_cell(r, a, j).expect("two steps exist");
            self.check_sock_pattern(f, &other, j)?;
            return Ok(ModuliInterval { ends: [*f, other], cell, frame: sockcell::frame(r, a, &cell) });
        }
        let mut cands = vec![];
        for (kp2, p2) in self.out[f.x as usize].iter().enumerate() {
            if p2.coord as usize != i || p2.phi != q.phi {
                continue;
            }
            for (kq2, q2) in self.out[p2.target as usize].iter().enumerate() {
                if q2.coord as usize == j && q2.phi == p.phi && q2.target == z {
                    cands.push(BrokenFlow { x: f.x, kp: kp2 as u32, kq: kq2 as u32 });
                }
            }
        }
        let other = match cands.len() {
            0 => return Err(FlowError::Unpaired(self.describe(f))),
            1 => cands[0],
            _ => self.ladybug_partner(f, &cands)?,
        };
        let cell = if j < i {
            Cell2::Prod { j, ej: p.phi.pm(), i, ei: q.phi.pm() }
        } else {
            Cell2::Prod { j: i, ej: q.phi.pm(), i: j, ei: p.phi.pm() }
        };
        Ok(ModuliInterval { ends: [*f, other], cell, frame: sockcell::frame(r, a, &cell) })
    }

    /// Assert that a same-coordinate pair lifts a kept sock interval.
    fn check_sock_pattern(&self, f: &BrokenFlow, g: &BrokenFlow, j: usize) -> Result<(), FlowError> {
        let a = &self.objects[f.x as usize].s;
        let first = sockcell::step(self.setup.r[j], a[j]).expect("step exists");
        let legs = |b: &BrokenFlow| {
            let p = self.point(b.x, b.kp).phi;
            let q = self.point(self.point(b.x, b.kp).target, b.kq).phi;
            match first {
                sockcell::Step::Pair => (p, q),
                _ => (q, p),
            }
        };
        let (pm_f, k_f) = legs(f);
        let (pm_g, k_g) = legs(g);
        if pm_f.is_m() == pm_g.is_m() {
            return Err(FlowError::SockPattern(format!("{} pairs two {} ends", self.describe(f), pm_f)));
        }
        let ((_, kp), (_, km)) = if pm_f.is_m() { ((pm_g, k_g), (pm_f, k_f)) } else { ((pm_f, k_f), (pm_g, k_g)) };
        if let (Phi::Pk(kp), Phi::Pk(km)) = (kp, km) {
            // With the exponent-based indexing of 1d points the sock intervals
            // read (P, P_{k+1}) -- (M, P_k); k -> n+1-k gives the cyclic rule.
            let n = self.setup.n;
            let iv = SockInterval { n, k_p: n + 1 - kp, k_m: n + 1 - km };
            if !iv.is_interval() || iv.is_discarded() {
                return Err(FlowError::SockPattern(format!("{} lifts {:?}", self.describe(f), iv)));
            }
        }
        Ok(())
    }

    /// Ports on the chosen side of the surgery arc of coordinate `j` at a
    /// resolution with `s_j` at the bottom of its surgery step.
    fn side_ports(&self, j: usize) -> [usize; 2] {
        let positive = self.setup.r[j] > 0;
        let ports = match (positive, self.ladybug) {
            (true, Ladybug::Right) => [Port::L1, Port::R2],
            (true, Ladybug::Left) => [Port::R1, Port::L2],
            (false, Ladybug::Right) => [Port::L2, Port::R1],
            (false, Ladybug::Left) => [Port::L1, Port::R2],
        };
        [port_id(j, ports[0]), port_id(j, ports[1])]
    }

    /// Resolve a ladybug configuration: transport the intermediate labels of
    /// `f` along the circle identification and pick the matching candidate.
    fn ladybug_partner(&self, f: &BrokenFlow, cands: &[BrokenFlow]) -> Result<BrokenFlow, FlowError> {
        let setup = self.setup;
        let p = *self.point(f.x, f.kp);
        let w = p.target;
        let q = *self.point(w, f.kq);
        let (j, i) = (p.coord as usize, q.coord as usize);
        if p.case != Case::C2a {
            return Err(FlowError::Ladybug(format!("{} is not a double surgery on one circle", self.describe(f))));
        }
        let w2 = self.point(f.x, cands[0].kp).target;
        let cw = setup.circles(&self.objects[w as usize].s);
        let cw2 = setup.circles(&self.objects[w2 as usize].s);
        // Identification of the two new circles of w with those of w2.
        let ident = |ports: [usize; 2]| -> Vec<(usize, usize)> {
            let mut v: Vec<(usize, usize)> =
                ports.iter().map(|&pt| (cw.circle_of[pt] as usize, cw2.circle_of[pt] as usize)).collect();
            v.sort_unstable();
            v
        };
        let by_j = ident(self.side_ports(j));
        let by_i = ident(self.side_ports(i));
        if by_j != by_i || by_j[0].0 == by_j[1].0 || by_j[0].1 == by_j[1].1 {
            return Err(FlowError::Ladybug(format!(
                "{}: arc sides disagree ({:?} vs {:?}); diagram not planar?",
                self.describe(f),
                by_j,
                by_i
            )));
        }
        let yw = &self.objects[w as usize].labels;
        let hits: Vec<BrokenFlow> = cands
            .iter()
            .copied()
            .filter(|c| {
                let y2 = &self.objects[self.point(c.x, c.kp).target as usize].labels;
                by_j.iter().all(|&(a, b)| y2[b] == yw[a])
            })
            .collect();
        match hits.as_slice() {
            [h] => Ok(*h),
            _ => Err(FlowError::Ladybug(format!("{}: {} transported candidates", self.describe(f), hits.len()))),
        }
    }

    /// All intervals of the 1-dimensional moduli space from `x` to `z`.
    pub fn one_dim_moduli(&self, x: u32, z: u32) -> Result<Vec<ModuliInterval>, FlowError> {
        let flows = self.broken_flows(x, z);
        let mut seen = std::collections::BTreeSet::new();
        let mut out = vec![];
        for f in &flows {
            if seen.contains(f) {
                continue;
            }
            let iv = self.partner(f)?;
            let back = self.partner(&iv.ends[1])?;
            if back.ends[1] != *f {
                return Err(FlowError::Unpaired(format!("{} is not an involution", self.describe(f))));
            }
            seen.insert(iv.ends[0]);
            seen.insert(iv.ends[1]);
            out.push(iv);
        }
        Ok(out)
    }

    fn describe(&self, f: &BrokenFlow) -> String {
        let (w, z) = self.flow_ends(f);
        let o = |k: u32| {
            let ob = &self.objects[k as usize];
            format!("{:?}{:?}", ob.s, ob.labels)
        };
        let p = self.point(f.x, f.kp);
        let q = self.point(w, f.kq);
        format!("{} -{}{}-> {} -{}{}-> {}", o(f.x), p.coord, p.phi, o(w), q.coord, q.phi, o(z))
    }

    /// Sum of signs around an interval; always 1 for a consistent lift.
    pub fn interval_sign_sum(&self, iv: &ModuliInterval) -> bool {
        iv.ends.iter().fold(false, |acc, b| {
            let p = self.point(b.x, b.kp);
            let q = self.point(p.target, b.kq);
            acc ^ p.sign ^ q.sign
        })
    }

    /// TSV dump of objects, points and intervals.
    pub fn dump(&self) -> Result<String, FlowError> {
        let mut s = String::new();
        let _ = writeln!(s, "# objects q={}\nid\tmultidegree\tlabels\tt\tq", self.q);
        for (k, o) in self.objects.iter().enumerate() {
            let _ = writeln!(s, "{}\t{:?}\t{:?}\t{}\t{}", k, o.s, o.labels, o.t(), self.setup.q_of(o));
        }
        let _ = writeln!(s, "# points\nsource\ttarget\tcoord\tcase\tphi\tsign");
        for (x, pts) in self.out.iter().enumerate() {
            for p in pts {
                let _ = writeln!(s, "{}\t{}\t{}\t{:?}\t{}\t{}", x, p.target, p.coord, p.case, p.phi, p.sign as u8);
            }
        }
        let _ = writeln!(s, "# intervals\nsource\ttarget\tend0\tend1\tcell\tframe");
        for x in 0..self.len() as u32 {
            let mut zs: Vec<u32> = self.out[x as usize]
                .iter()
                .flat_map(|p| self.out[p.target as usize].iter().map(|q| q.target))
                .collect();
            zs.sort_unstable();
            zs.dedup();
            for z in zs {
                for iv in self.one_dim_moduli(x, z)? {
                    let e = |b: &BrokenFlow| format!("{}.{}.{}", b.x, b.kp, b.kq);
                    let _ = writeln!(
                        s,
                        "{}\t{}\t{}\t{}\t{:?}\t{}",
                        x,
                        z,
                        e(&iv.ends[0]),
                        e(&iv.ends[1]),
                        iv.cell,
                        iv.frame as u8
                    );
                }
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{gen_pretzel, gen_torus_braid};
    use crate::resolution::Mode;

    fn all_buckets<'a>(setup: &'a Setup, lb: Ladybug) -> Vec<Bucket<'a>> {
        setup.q_histogram().keys().map(|&q| Bucket::build(setup, q, lb).unwrap()).collect()
    }

    fn d_squared_zero(b: &Bucket) {
        let d = b.differential();
        let mut by_src: FxHashMap<u32, Vec<(u32, i64)>> = FxHashMap::default();
        for &(y, x, c) in &d {
            by_src.entry(x).or_default().push((y, c));
        }
        for x in 0..b.len() as u32 {
            let mut acc: FxHashMap<u32, i64> = FxHashMap::default();
            for &(y, c) in by_src.get(&x).map(|v| v.as_slice()).unwrap_or(&[]) {
                for &(z, c2) in by_src.get(&y).map(|v| v.as_slice()).unwrap_or(&[]) {
                    *acc.entry(z).or_insert(0) += c * c2;
                }
            }
            assert!(acc.values().all(|&v| v == 0), "d^2 != 0 at {:?}", b.objects[x as usize]);
        }
    }

    fn intervals_consistent(b: &Bucket) -> usize {
        let mut count = 0;
        for x in 0..b.len() as u32 {
            let mut zs: Vec<u32> =
                b.out[x as usize].iter().flat_map(|p| b.out[p.target as usize].iter().map(|q| q.target)).collect();
            zs.sort_unstable();
            zs.dedup();
            for z in zs {
                let ivs = b.one_dim_moduli(x, z).unwrap();
                assert_eq!(2 * ivs.len(), b.broken_flows(x, z).len());
                for iv in &ivs {
                    assert!(b.interval_sign_sum(iv), "sign sum at {:?}", iv);
                }
                count += ivs.len();
            }
        }
        count
    }

    #[test]
    fn case_point_counts() {
        // 1a gives two points of opposite sign, 1b gives n points of equal sign.
        for (d, n, mode) in [
            (gen_pretzel(&[-2, 3, 3]).unwrap(), 2u8, Mode::Kh),
            (gen_pretzel(&[-4, 4, 2]).unwrap(), 3, Mode::Sln),
        ] {
            let setup = Setup::new(d, n, mode).unwrap();
            let mut seen_1b = false;
            for b in all_buckets(&setup, Ladybug::Right) {
                for (x, pts) in b.out.iter().enumerate() {
                    for y in pts.iter().map(|p| p.target) {
                        let ps = b.zero_dim_moduli(x as u32, y);
                        match ps[0].case {
                            Case::C1a => {
                                assert_eq!(ps.len(), 2);
                                assert_ne!(ps[0].sign, ps[1].sign);
                            }
                            Case::C1b => {
                                seen_1b = true;
                                assert_eq!(ps.len(), n as usize);
                                assert!(ps.iter().all(|p| p.sign == ps[0].sign));
                            }
                            _ => assert_eq!(ps.len(), 1),
                        }
                    }
                }
            }
            assert!(seen_1b);
        }
    }

    #[test]
    fn merge_of_top_labels_is_empty() {
        let setup = Setup::new(gen_torus_braid(2, 2).unwrap(), 2, Mode::Kh).unwrap();
        // s = (0,0): two circles (the Hopf link's oriented resolution).
        let x = FlowObject { s: vec![0, 0], labels: vec![1, 1] };
        let c = setup.circles(&x.s);
        assert_eq!(c.count, 2);
        let g = geometry(&setup, &x.s, &c, 0).unwrap();
        assert!(step_targets(&setup, &g, &c, 0, &x.labels).is_empty());
    }

    #[test]
    fn d_squared_and_intervals_kh() {
        for d in [gen_pretzel(&[-2, 3, 3]).unwrap(), gen_torus_braid(3, 2).unwrap(), gen_pretzel(&[2, -3, 1]).unwrap()]
        {
            let setup = Setup::new(d, 2, Mode::Kh).unwrap();
            for lb in [Ladybug::Right, Ladybug::Left] {
                let mut total = 0;
                for b in all_buckets(&setup, lb) {
                    d_squared_zero(&b);
                    total += intervals_consistent(&b);
                }
                assert!(total > 0);
            }
        }
    }

    #[test]
    fn d_squared_and_intervals_sln() {
        for (r, n) in [(vec![-2, 2, 2], 3u8), (vec![-2, 2, 2], 4), (vec![4, -2], 3), (vec![-4, 2, 2], 3)] {
            let setup = Setup::new(gen_pretzel(&r).unwrap(), n, Mode::Sln).unwrap();
            for b in all_buckets(&setup, Ladybug::Right) {
                d_squared_zero(&b);
                intervals_consistent(&b);
            }
        }
    }

    /// Ladybug intervals: split then merge between the same two circles,
    /// found in both orders.
    fn ladybug_pairs(b: &Bucket) -> Vec<(BrokenFlow, BrokenFlow)> {
        let mut v = vec![];
        for x in 0..b.len() as u32 {
            for (kp, p) in b.out[x as usize].iter().enumerate() {
                for (kq, q) in b.out[p.target as usize].iter().enumerate() {
                    let f = BrokenFlow { x, kp: kp as u32, kq: kq as u32 };
                    if p.case == Case::C2a && q.case == Case::C2b && p.coord != q.coord {
                        let iv = b.partner(&f).unwrap();
                        let g = iv.ends[1];
                        if b.point(x, g.kp).coord == q.coord && b.broken_flows(x, q.target).len() > 2 {
                            v.push((f, g));
                        }
                    }
                }
            }
        }
        v
    }

    #[test]
    fn ladybug_conventions_differ() {
        for (n, mode) in [(2u8, Mode::Kh), (3, Mode::Sln)] {
            let d = gen_pretzel(&[-2, 2, 2]).unwrap();
            let setup = Setup::new(d, n, mode).unwrap();
            let mut found = 0;
            let mut differ = 0;
            for &q in setup.q_histogram().keys() {
                let right = Bucket::build(&setup, q, Ladybug::Right).unwrap();
                let left = Bucket::build(&setup, q, Ladybug::Left).unwrap();
                let lr = ladybug_pairs(&right);
                let ll = ladybug_pairs(&left);
                assert_eq!(lr.len(), ll.len());
                found += lr.len();
                differ += lr.iter().zip(&ll).filter(|(a, b)| a.1 != b.1).count();
                for (f, g) in lr {
                    assert_eq!(right.partner(&g).unwrap().ends[1], f);
                }
            }
            assert!(found > 0, "no ladybug for n = {}", n);
            assert!(differ > 0);
        }
    }
}
