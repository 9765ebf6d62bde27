//! The second Steenrod square from a framed flow category: boundary
//! matchings of a cocycle, framed circles over each object two degrees up,
//! and their values in the first framed bordism group.

use crate::flowcat::{BrokenFlow, Bucket, FlowError};
use crate::gf2::{BitVec, Gf2Matrix};
use crate::homalg::{Cohomology, Reduction};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SteenrodError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("odd number of boundary points over object {0}: not a cocycle")]
    OddBoundary(u32),
    #[error("vertex of degree != 2 while assembling circles over object {0}")]
    BrokenCircle(u32),
    #[error("sq^2 cochain is not a cocycle")]
    NotACocycle,
    #[error("sq^2 cochain does not reduce to a cohomology class")]
    NotInCohomology,
}

/// The data of a framed flow category that the square needs: signed points
/// and the pairing of broken flows by framed intervals.
pub trait FramedFlowCategory: Sync {
    fn num_objects(&self) -> usize;
    fn degree(&self, x: u32) -> i32;
    /// Points out of `x` as `(target, sign)`.
    fn out_points(&self, x: u32) -> Vec<(u32, bool)>;
    /// Points into `y` as `(source, index among the source's points)`.
    fn in_points(&self, y: u32) -> Vec<(u32, u32)>;
    /// Sign of the `k`-th point out of `x`.
    fn point_sign(&self, x: u32, k: u32) -> bool {
        self.out_points(x)[k as usize].1
    }
    /// Other end of the interval through a broken flow, and its frame.
    fn pt_partner(&self, f: &BrokenFlow) -> Result<(BrokenFlow, bool), FlowError>;
    /// Closed components of 1-dimensional moduli spaces out of `x`, as
    /// `(target, frame)`.
    fn pt_circles(&self, _x: u32) -> Vec<(u32, bool)> {
        vec![]
    }
}

impl FramedFlowCategory for Bucket<'_> {
    fn num_objects(&self) -> usize {
        self.len()
    }
    fn degree(&self, x: u32) -> i32 {
        self.t(x)
    }
    fn out_points(&self, x: u32) -> Vec<(u32, bool)> {
        self.out[x as usize].iter().map(|p| (p.target, p.sign)).collect()
    }
    fn in_points(&self, y: u32) -> Vec<(u32, u32)> {
        self.inc[y as usize].clone()
    }
    fn point_sign(&self, x: u32, k: u32) -> bool {
        self.out[x as usize][k as usize].sign
    }
    fn pt_partner(&self, f: &BrokenFlow) -> Result<(BrokenFlow, bool), FlowError> {
        let iv = self.partner(f)?;
        Ok((iv.ends[1], iv.frame))
    }
}

/// A small framed flow category given by explicit lists.
#[derive(Clone, Debug, Default)]
pub struct ExplicitCategory {
    pub degrees: Vec<i32>,
    /// Per source: `(target, sign)`.
    pub points: Vec<Vec<(u32, bool)>>,
    /// Intervals as pairs of broken flows with a frame.
    pub intervals: Vec<(BrokenFlow, BrokenFlow, bool)>,
    /// Closed components `(x, z, frame)`.
    pub circles: Vec<(u32, u32, bool)>,
}

impl FramedFlowCategory for ExplicitCategory {
    fn num_objects(&self) -> usize {
        self.degrees.len()
    }
    fn degree(&self, x: u32) -> i32 {
        self.degrees[x as usize]
    }
    fn out_points(&self, x: u32) -> Vec<(u32, bool)> {
        self.points[x as usize].clone()
    }
    fn in_points(&self, y: u32) -> Vec<(u32, u32)> {
        let mut v = vec![];
        for (x, pts) in self.points.iter().enumerate() {
            for (k, &(t, _)) in pts.iter().enumerate() {
                if t == y {
                    v.push((x as u32, k as u32));
                }
            }
        }
        v
    }
    fn pt_partner(&self, f: &BrokenFlow) -> Result<(BrokenFlow, bool), FlowError> {
        for &(a, b, fr) in &self.intervals {
            if a == *f {
                return Ok((b, fr));
            }
            if b == *f {
                return Ok((a, fr));
            }
        }
        Err(FlowError::Unpaired(format!("{:?}", f)))
    }
    fn pt_circles(&self, x: u32) -> Vec<(u32, bool)> {
        self.circles.iter().filter(|c| c.0 == x).map(|c| (c.1, c.2)).collect()
    }
}

/// How boundary matchings are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MatchingChoice {
    /// Opposite signs paired first in id order; incoherent arcs low to high.
    Canonical,
    /// Uniformly shuffled pairing with random arc orientations.
    Random(u64),
    /// The canonical rule applied to randomly permuted object ids.
    Relabel(u64),
}

/// Point of a 0-dimensional moduli space, identified by its source.
pub type PointId = (u32, u32);

/// One arc of a boundary matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MatchedPair {
    pub ends: [PointId; 2],
    pub coherent: bool,
}

/// Boundary matching over one object `y`: incoherent pairs are oriented from
/// `ends[0]` to `ends[1]`.
pub fn build_matching(
    cat: &dyn FramedFlowCategory,
    supp: &[bool],
    y: u32,
    choice: MatchingChoice,
    rank: &[u32],
) -> Result<Vec<MatchedPair>, SteenrodError> {
    let mut pts: Vec<(PointId, bool)> = cat
        .in_points(y)
        .into_iter()
        .filter(|&(x, _)| supp[x as usize])
        .map(|(x, k)| ((x, k), cat.point_sign(x, k)))
        .collect();
    if pts.len() % 2 == 1 {
        return Err(SteenrodError::OddBoundary(y));
    }
    let pair = |a: (PointId, bool), b: (PointId, bool)| MatchedPair { ends: [a.0, b.0], coherent: a.1 != b.1 };
    let mut out = vec![];
    match choice {
        MatchingChoice::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (y as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            pts.shuffle(&mut rng);
            for c in pts.chunks(2) {
                let (a, b) = if rng.gen() { (c[0], c[1]) } else { (c[1], c[0]) };
                out.push(pair(a, b));
            }
        }
        _ => {
            pts.sort_by_key(|&((x, k), _)| (rank[x as usize], k));
            let (pos, neg): (Vec<&(PointId, bool)>, Vec<_>) = pts.iter().partition(|p| !p.1);
            let m = pos.len().min(neg.len());
            for i in 0..m {
                out.push(pair(*pos[i], *neg[i]));
            }
            let rest = if pos.len() > m { &pos[m..] } else { &neg[m..] };
            for c in rest.chunks(2) {
                out.push(pair(*c[0], *c[1]));
            }
        }
    }
    Ok(out)
}

/// A framed circle over `z`: its vertices in traversal order and its value.
#[derive(Clone, Debug, Serialize)]
pub struct FramedCircle {
    pub vertices: Vec<BrokenFlow>,
    pub nonstandard_arcs: usize,
    pub agreeing_arrows: usize,
    pub incoherent_arcs: usize,
    pub value: bool,
}

/// Circles over `z` through the boundary matchings of a cocycle. Closed
/// moduli components are not included.
pub fn assemble_circles(
    cat: &dyn FramedFlowCategory,
    matchings: &FxHashMap<u32, Vec<MatchedPair>>,
    z: u32,
) -> Result<Vec<FramedCircle>, SteenrodError> {
    // eta: point -> (partner, arrow from this point, coherent)
    let mut eta: FxHashMap<PointId, (PointId, bool, bool)> = FxHashMap::default();
    let mut verts = vec![];
    let zin = cat.in_points(z);
    for &(y, kq) in &zin {
        let Some(m) = matchings.get(&y) else { continue };
        for pr in m {
            eta.insert(pr.ends[0], (pr.ends[1], true, pr.coherent));
            eta.insert(pr.ends[1], (pr.ends[0], false, pr.coherent));
            for e in pr.ends {
                verts.push(BrokenFlow { x: e.0, kp: e.1, kq });
            }
        }
    }
    verts.sort_unstable();
    let index: FxHashMap<BrokenFlow, usize> = verts.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut seen = vec![false; verts.len()];
    let mut circles = vec![];
    for start in 0..verts.len() {
        if seen[start] {
            continue;
        }
        let mut cur = start;
        let mut c = FramedCircle { vertices: vec![], nonstandard_arcs: 0, agreeing_arrows: 0, incoherent_arcs: 0, value: true };
        loop {
            if seen[cur] {
                return Err(SteenrodError::BrokenCircle(z));
            }
            seen[cur] = true;
            let v = verts[cur];
            c.vertices.push(v);
            // Matching edge.
            let (other, forward, coherent) = eta[&(v.x, v.kp)];
            if !coherent {
                c.incoherent_arcs += 1;
                c.agreeing_arrows += forward as usize;
            }
            let w = BrokenFlow { x: other.0, kp: other.1, kq: v.kq };
            let wi = *index.get(&w).ok_or(SteenrodError::BrokenCircle(z))?;
            if seen[wi] {
                return Err(SteenrodError::BrokenCircle(z));
            }
            seen[wi] = true;
            c.vertices.push(w);
            // Pontryagin-Thom edge.
            let (u, frame) = cat.pt_partner(&w)?;
            c.nonstandard_arcs += frame as usize;
            let ui = *index.get(&u).ok_or(SteenrodError::BrokenCircle(z))?;
            if ui == start {
                break;
            }
            cur = ui;
        }
        assert!(c.incoherent_arcs.is_multiple_of(2), "odd number of incoherent arcs on a framed circle");
        c.value = (1 + c.nonstandard_arcs + c.agreeing_arrows) % 2 == 1;
        circles.push(c);
    }
    Ok(circles)
}

fn relabel_ranks(n: usize, choice: MatchingChoice) -> Vec<u32> {
    let mut rank: Vec<u32> = (0..n as u32).collect();
    if let MatchingChoice::Relabel(seed) = choice {
        rank.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    rank
}

/// Objects of degree `deg + 2` on which the square of the cocycle `supp`
/// (degree `deg`) takes the value 1.
pub fn sq2_cochain(
    cat: &dyn FramedFlowCategory,
    supp: &[bool],
    deg: i32,
    choice: MatchingChoice,
) -> Result<Vec<u32>, SteenrodError> {
    let n = cat.num_objects();
    let rank = relabel_ranks(n, choice);
    let ys: Vec<u32> = (0..n as u32).filter(|&y| cat.degree(y) == deg + 1).collect();
    let mut matchings = FxHashMap::default();
    for y in ys {
        let m = build_matching(cat, supp, y, choice, &rank)?;
        if !m.is_empty() {
            matchings.insert(y, m);
        }
    }
    // Only objects reached from a matched object carry circles through
    // matchings; closed components are counted separately.
    let mut zs: Vec<u32> = matchings
        .keys()
        .flat_map(|&y| cat.out_points(y))
        .map(|(z, _)| z)
        .filter(|&z| cat.degree(z) == deg + 2)
        .collect();
    zs.sort_unstable();
    zs.dedup();
    let values: Result<Vec<bool>, SteenrodError> = zs
        .par_iter()
        .map(|&z| Ok(assemble_circles(cat, &matchings, z)?.iter().filter(|c| c.value).count() % 2 == 1))
        .collect();
    let mut value: FxHashMap<u32, bool> = zs.into_iter().zip(values?).collect();
    for x in (0..n as u32).filter(|&x| supp[x as usize]) {
        for (z, frame) in cat.pt_circles(x) {
            *value.entry(z).or_insert(false) ^= !frame;
        }
    }
    let mut out: Vec<u32> = value.into_iter().filter(|(_, v)| *v).map(|(z, _)| z).collect();
    out.sort_unstable();
    Ok(out)
}

/// Whether an object set is a mod-2 cocycle of the category.
pub fn is_cocycle(cat: &dyn FramedFlowCategory, supp: &[bool]) -> bool {
    let mut acc: FxHashMap<u32, bool> = FxHashMap::default();
    for x in 0..cat.num_objects() as u32 {
        if supp[x as usize] {
            for (y, _) in cat.out_points(x) {
                *acc.entry(y).or_insert(false) ^= true;
            }
        }
    }
    acc.values().all(|v| !v)
}

/// Options for one evaluation of the square on a bucket.
#[derive(Clone, Copy, Debug)]
pub struct Sq2Options {
    pub choice: MatchingChoice,
    /// Add a random coboundary to every representative.
    pub perturb: Option<u64>,
}

impl Default for Sq2Options {
    fn default() -> Self {
        Sq2Options { choice: MatchingChoice::Canonical, perturb: None }
    }
}

/// `Sq^2` from degree `k` to `k + 2` of a bucket, in the class bases of the
/// reduced cohomology; the square itself is evaluated on the full category.
pub fn sq2_matrix(
    b: &Bucket,
    gens: &[Vec<u32>],
    red: &Reduction,
    coh: &Cohomology,
    k: usize,
    opts: Sq2Options,
) -> Result<Gf2Matrix, SteenrodError> {
    let src = &coh.degrees[k];
    let Some(dst) = coh.degrees.get(k + 2) else {
        return Ok(Gf2Matrix::zeros(0, src.classes.len()));
    };
    let mut local = vec![0usize; b.len()];
    for g in gens {
        for (i, &x) in g.iter().enumerate() {
            local[x as usize] = i;
        }
    }
    let deg = coh.t0 + k as i32;
    let mut cols = vec![];
    for (j, class) in src.classes.iter().enumerate() {
        let mut full = red.lift_mod2(k, &class.bits);
        if let (Some(seed), Some(prev)) = (opts.perturb, k.checked_sub(1)) {
            // Add the coboundary of a random cochain one degree down.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (j as u64) << 32);
            for &w in &gens[prev] {
                if rng.gen() {
                    for p in &b.out[w as usize] {
                        full.flip(local[p.target as usize]);
                    }
                }
            }
        }
        let mut supp = vec![false; b.len()];
        for i in full.ones() {
            supp[gens[k][i] as usize] = true;
        }
        if !is_cocycle(b, &supp) {
            return Err(SteenrodError::NotACocycle);
        }
        let zs = sq2_cochain(b, &supp, deg, opts.choice)?;
        let mut out_supp = vec![false; b.len()];
        for &z in &zs {
            out_supp[z as usize] = true;
        }
        if !is_cocycle(b, &out_supp) {
            return Err(SteenrodError::NotACocycle);
        }
        let full_out = BitVec::from_ones(gens[k + 2].len(), zs.iter().map(|&z| local[z as usize]));
        let reduced = red.project_mod2(k + 2, &full_out);
        cols.push(dst.coords(&reduced).ok_or(SteenrodError::NotInCohomology)?);
    }
    Ok(Gf2Matrix { rows: dst.classes.len(), cols })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Degrees `i, i+1, i+2` of the lens-space flow category of `RP^n`:
    /// two points per step, coherent iff the lower degree is even; frames
    /// agree on the two intervals iff `floor(i/2)` is odd.
    fn rp_window(i: i32) -> ExplicitCategory {
        let sign_l = false;
        let sign_r = |d: i32| d % 2 == 0;
        // objects 0: p_i, 1: p_{i+1}, 2: p_{i+2}; points L = 0, R = 1.
        let points = vec![vec![(1, sign_l), (1, sign_r(i))], vec![(2, sign_l), (2, sign_r(i + 1))], vec![]];
        let f = |kp, kq| BrokenFlow { x: 0, kp, kq };
        let j = i / 2;
        let f2 = j % 2 == 0;
        ExplicitCategory {
            degrees: vec![i, i + 1, i + 2],
            points,
            intervals: vec![(f(0, 1), f(1, 0), false), (f(0, 0), f(1, 1), f2)],
            circles: vec![],
        }
    }

    #[test]
    fn real_projective_space() {
        for i in 0..12 {
            let cat = rp_window(i);
            let supp = [true, false, false];
            assert!(is_cocycle(&cat, &supp));
            let want = matches!(i % 4, 2 | 3);
            for choice in [MatchingChoice::Canonical, MatchingChoice::Random(i as u64), MatchingChoice::Relabel(7)] {
                let z = sq2_cochain(&cat, &supp, i, choice).unwrap();
                assert_eq!(!z.is_empty(), want, "i = {}", i);
            }
        }
    }

    #[test]
    fn complex_projective_space() {
        // Degrees 2i and 2i+2 joined by a circle of moduli whose frame is the
        // parity of i+1.
        for i in 0..6 {
            let cat = ExplicitCategory {
                degrees: vec![2 * i, 2 * i + 2],
                points: vec![vec![], vec![]],
                intervals: vec![],
                circles: vec![(0, 1, i % 2 == 0)],
            };
            let z = sq2_cochain(&cat, &[true, false], 2 * i, MatchingChoice::Canonical).unwrap();
            assert_eq!(!z.is_empty(), i % 2 == 1);
        }
    }

    #[test]
    fn circle_formula_examples() {
        // Two coherent matching edges and two standard arcs: value 1.
        let f = |x, kp, kq| BrokenFlow { x, kp, kq };
        let cat = ExplicitCategory {
            degrees: vec![0, 1, 2],
            points: vec![vec![(1, false), (1, true)], vec![(2, false), (2, false)], vec![]],
            intervals: vec![(f(0, 0, 0), f(0, 1, 1), false), (f(0, 0, 1), f(0, 1, 0), false)],
            circles: vec![],
        };
        let mut m = FxHashMap::default();
        m.insert(1, build_matching(&cat, &[true, false, false], 1, MatchingChoice::Canonical, &[0, 1, 2]).unwrap());
        let cs = assemble_circles(&cat, &m, 2).unwrap();
        assert_eq!(cs.len(), 1);
        assert!(cs[0].value);
        assert_eq!(cs[0].vertices.len(), 4);
    }

    #[test]
    fn odd_boundary_rejected() {
        let cat = ExplicitCategory {
            degrees: vec![0, 1],
            points: vec![vec![(1, false)], vec![]],
            intervals: vec![],
            circles: vec![],
        };
        assert!(matches!(
            build_matching(&cat, &[true, false], 1, MatchingChoice::Canonical, &[0, 1]),
            Err(SteenrodError::OddBoundary(1))
        ));
    }

    fn bucket_sq2_ranks(r: &[i32], n: u8, q: i64, lb: crate::flowcat::Ladybug, opts: Sq2Options) -> Vec<(i64, usize)> {
        use crate::diagram::gen_pretzel;
        use crate::homalg::Cochains;
        use crate::resolution::{Mode, Setup};
        let mode = if n == 2 && r.iter().any(|x| x % 2 != 0) { Mode::Kh } else { Mode::Sln };
        let setup = Setup::new(gen_pretzel(r).unwrap(), n, mode).unwrap();
        let b = Bucket::build(&setup, q, lb).unwrap();
        let (c, gens) = Cochains::from_bucket(&b);
        let red = Reduction::eliminate(&c).unwrap();
        let coh = red.reduced.cohomology().unwrap();
        (0..coh.len())
            .map(|k| {
                let m = sq2_matrix(&b, &gens, &red, &coh, k, opts).unwrap();
                (setup.reported_i(coh.t0 + k as i32), m.rank())
            })
            .filter(|x| x.1 > 0)
            .collect()
    }

    #[test]
    fn sq2_of_8_19() {
        use crate::flowcat::Ladybug;
        let base = bucket_sq2_ranks(&[-2, 3, 3], 2, 11, Ladybug::Right, Sq2Options::default());
        assert_eq!(base, vec![(2, 1)]);
        for seed in 0..4 {
            for opts in [
                Sq2Options { choice: MatchingChoice::Random(seed), perturb: None },
                Sq2Options { choice: MatchingChoice::Relabel(seed), perturb: Some(seed) },
            ] {
                assert_eq!(bucket_sq2_ranks(&[-2, 3, 3], 2, 11, Ladybug::Right, opts), base);
            }
        }
        assert_eq!(bucket_sq2_ranks(&[-2, 3, 3], 2, 11, Ladybug::Left, Sq2Options::default()), base);
    }
}
