//! Glued link diagrams: elementary twist tangles glued along their ports.
//!
//! A tangle of index `r` is `|r|` horizontal half-twists of two strands with
//! ports `L1` (top left), `L2` (bottom left), `R1` (top right), `R2` (bottom
//! right). Port ids are `4 * tangle + {L1: 0, L2: 1, R1: 2, R2: 3}`.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// One of the four ports of an elementary tangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    L1,
    L2,
    R1,
    R2,
}

impl Port {
    pub const ALL: [Port; 4] = [Port::L1, Port::L2, Port::R1, Port::R2];

    pub fn offset(self) -> usize {
        match self {
            Port::L1 => 0,
            Port::L2 => 1,
            Port::R1 => 2,
            Port::R2 => 3,
        }
    }

    pub fn from_offset(k: usize) -> Port {
        Port::ALL[k]
    }

    pub fn name(self) -> &'static str {
        match self {
            Port::L1 => "L1",
            Port::L2 => "L2",
            Port::R1 => "R1",
            Port::R2 => "R2",
        }
    }

    fn parse(s: &str) -> Option<Port> {
        Port::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Global port id.
pub fn port_id(tangle: usize, port: Port) -> usize {
    4 * tangle + port.offset()
}

/// Split a global port id into tangle and port.
pub fn port_of(id: usize) -> (usize, Port) {
    (id / 4, Port::from_offset(id % 4))
}

/// A 2-strand twist tangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementaryTangle {
    pub r: i32,
    /// True iff both strands run through the tangle in the same horizontal direction.
    pub braid: bool,
}

impl ElementaryTangle {
    /// Sign of every crossing inside the tangle.
    pub fn crossing_sign(&self) -> i32 {
        let s = self.r.signum();
        if self.braid {
            s
        } else {
            -s
        }
    }
}

/// Summary numbers of a diagram.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiagramStats {
    pub writhe: i64,
    pub big_r: i64,
    pub matched: bool,
    pub component_count: usize,
    pub crossings: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagramError {
    #[error("malformed diagram file: {0}")]
    Syntax(String),
    #[error("tangle t{0} has index 0")]
    ZeroIndex(usize),
    #[error("connection {index}: unknown port {port}")]
    UnknownPort { index: usize, port: String },
    #[error("connection {index}: dangling/duplicated port {port}")]
    DuplicatedPort { index: usize, port: String },
    #[error("dangling/duplicated port: {0} is not connected")]
    DanglingPort(String),
    #[error("orientation conflict at tangle t{0}")]
    OrientationConflict(usize),
    #[error("empty diagram")]
    Empty,
    #[error("need at least 2 strands")]
    TooFewStrands,
}

/// A glued diagram with a consistent orientation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GluedDiagram {
    pub name: String,
    pub tangles: Vec<ElementaryTangle>,
    partner: Vec<usize>,
    /// Per port: true iff the strand enters the tangle at this port.
    incoming: Vec<bool>,
}

fn pname(id: usize) -> String {
    let (t, p) = port_of(id);
    format!("t{}.{}", t, p.name())
}

impl fmt::Display for GluedDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r: Vec<String> = self.tangles.iter().map(|t| t.r.to_string()).collect();
        write!(f, "{} ({})", self.name, r.join(","))
    }
}

#[derive(Serialize, Deserialize)]
struct DiagramFile {
    #[serde(default)]
    name: Option<String>,
    tangles: Vec<ElementaryTangle>,
    connections: Vec<[(String, String); 2]>,
}

/// Port reached by following the tangle's internal strand from `id`.
fn through(r: i32, id: usize) -> usize {
    let (t, p) = port_of(id);
    let q = match (p, r.unsigned_abs().is_multiple_of(2)) {
        (Port::L1, true) => Port::R1,
        (Port::L2, true) => Port::R2,
        (Port::R1, true) => Port::L1,
        (Port::R2, true) => Port::L2,
        (Port::L1, false) => Port::R2,
        (Port::L2, false) => Port::R1,
        (Port::R1, false) => Port::L2,
        (Port::R2, false) => Port::L1,
    };
    port_id(t, q)
}

impl GluedDiagram {
    /// Build from tangles and a port pairing, orienting every component.
    ///
    /// Given braid flags are treated as constraints; a conflict is an error.
    fn build(
        name: String,
        tangles: Vec<ElementaryTangle>,
        partner: Vec<usize>,
        constrain_braid: bool,
    ) -> Result<Self, DiagramError> {
        if tangles.is_empty() {
            return Err(DiagramError::Empty);
        }
        if let Some(i) = tangles.iter().position(|t| t.r == 0) {
            return Err(DiagramError::ZeroIndex(i));
        }
        let mut d = GluedDiagram { name, tangles, partner, incoming: vec![false; 0] };
        let comps = d.components();
        // Default orientation: each component enters the tangle at its first port.
        let np = d.partner.len();
        let mut comp_of = vec![0usize; np];
        let mut base_in = vec![false; np];
        for (c, ports) in comps.iter().enumerate() {
            for (k, &p) in ports.iter().enumerate() {
                comp_of[p] = c;
                base_in[p] = k % 2 == 0;
            }
        }
        // flip[c] reverses component c; solve braid constraints by parity union-find.
        let nc = comps.len();
        let mut parent: Vec<usize> = (0..nc).collect();
        let mut parity = vec![false; nc];
        fn find(parent: &mut [usize], parity: &mut [bool], x: usize) -> (usize, bool) {
            let mut path = vec![];
            let mut y = x;
            while parent[y] != y {
                path.push(y);
                y = parent[y];
            }
            let root = y;
            // Recompute parities from the root downwards.
            let mut acc = false;
            for &v in path.iter().rev() {
                acc ^= parity[v];
                parity[v] = acc;
                parent[v] = root;
            }
            (root, if path.is_empty() { false } else { parity[x] })
        }
        if constrain_braid {
            for (i, t) in d.tangles.iter().enumerate() {
                let a = port_id(i, Port::L1);
                let b = port_id(i, Port::L2);
                // braid iff L1, L2 are both incoming or both outgoing.
                let (ca, cb) = (comp_of[a], comp_of[b]);
                let want_diff = (base_in[a] != base_in[b]) == t.braid;
                let (ra, pa) = find(&mut parent, &mut parity, ca);
                let (rb, pb) = find(&mut parent, &mut parity, cb);
                if ra == rb {
                    if (pa ^ pb) != want_diff {
                        return Err(DiagramError::OrientationConflict(i));
                    }
                } else {
                    parent[ra] = rb;
                    parity[ra] = pa ^ pb ^ want_diff;
                }
            }
        }
        let mut flip = vec![false; nc];
        for (c, f) in flip.iter_mut().enumerate() {
            *f = find(&mut parent, &mut parity, c).1;
        }
        d.incoming = (0..np).map(|p| base_in[p] ^ flip[comp_of[p]]).collect();
        for i in 0..d.tangles.len() {
            let a = d.incoming[port_id(i, Port::L1)];
            let b = d.incoming[port_id(i, Port::L2)];
            d.tangles[i].braid = a == b;
        }
        Ok(d)
    }

    /// Build from tangles and a pairing, choosing default orientations and
    /// deriving braid flags.
    pub fn from_pairing(
        name: &str,
        r: &[i32],
        pairs: &[(usize, usize)],
    ) -> Result<Self, DiagramError> {
        let tangles: Vec<_> = r.iter().map(|&r| ElementaryTangle { r, braid: false }).collect();
        let partner = pairing(tangles.len(), pairs)?;
        Self::build(name.to_string(), tangles, partner, false)
    }

    /// Parse the JSON diagram format.
    pub fn parse(text: &str) -> Result<Self, DiagramError> {
        let file: DiagramFile =
            serde_json::from_str(text).map_err(|e| DiagramError::Syntax(e.to_string()))?;
        let m = file.tangles.len();
        let parse_end = |index: usize, (t, p): &(String, String)| -> Result<usize, DiagramError> {
            let bad = || DiagramError::UnknownPort { index, port: format!("{}.{}", t, p) };
            let ti: usize = t.strip_prefix('t').and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let port = Port::parse(p).ok_or_else(bad)?;
            if ti >= m {
                return Err(bad());
            }
            Ok(port_id(ti, port))
        };
        let mut pairs = Vec::with_capacity(file.connections.len());
        for (index, [a, b]) in file.connections.iter().enumerate() {
            pairs.push((parse_end(index, a)?, parse_end(index, b)?));
        }
        let partner = pairing(m, &pairs)?;
        Self::build(file.name.unwrap_or_else(|| "diagram".into()), file.tangles, partner, true)
    }

    /// Serialize to the JSON diagram format.
    pub fn to_json(&self) -> String {
        let mut connections = vec![];
        for p in 0..self.partner.len() {
            let q = self.partner[p];
            if p < q {
                let e = |id: usize| {
                    let (t, port) = port_of(id);
                    (format!("t{}", t), port.name().to_string())
                };
                connections.push([e(p), e(q)]);
            }
        }
        let f = DiagramFile { name: Some(self.name.clone()), tangles: self.tangles.clone(), connections };
        serde_json::to_string_pretty(&f).expect("diagram serializes")
    }

    pub fn num_tangles(&self) -> usize {
        self.tangles.len()
    }

    pub fn num_ports(&self) -> usize {
        self.partner.len()
    }

    /// Port glued to `id`.
    pub fn partner(&self, id: usize) -> usize {
        self.partner[id]
    }

    pub fn is_incoming(&self, id: usize) -> bool {
        self.incoming[id]
    }

    pub fn indices(&self) -> Vec<i32> {
        self.tangles.iter().map(|t| t.r).collect()
    }

    /// Components as port cycles, each starting at its smallest port and
    /// continuing through that port's tangle.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let np = self.partner.len();
        let mut seen = vec![false; np];
        let mut out = vec![];
        for start in 0..np {
            if seen[start] {
                continue;
            }
            let mut cyc = vec![];
            let mut p = start;
            loop {
                let (t, _) = port_of(p);
                let q = through(self.tangles[t].r, p);
                seen[p] = true;
                seen[q] = true;
                cyc.push(p);
                cyc.push(q);
                p = self.partner[q];
                if p == start {
                    break;
                }
            }
            out.push(cyc);
        }
        out
    }

    pub fn writhe(&self) -> i64 {
        self.tangles.iter().map(|t| (t.r.abs() * t.crossing_sign()) as i64).sum()
    }

    pub fn big_r(&self) -> i64 {
        self.tangles.iter().map(|t| t.r as i64).sum()
    }

    /// All indices even and every tangle anti-braid oriented.
    pub fn is_matched(&self) -> bool {
        self.tangles.iter().all(|t| t.r % 2 == 0 && !t.braid)
    }

    pub fn stats(&self) -> DiagramStats {
        DiagramStats {
            writhe: self.writhe(),
            big_r: self.big_r(),
            matched: self.is_matched(),
            component_count: self.components().len(),
            crossings: self.tangles.iter().map(|t| t.r.unsigned_abs() as usize).sum(),
        }
    }

    /// Mirror image: every crossing switched, orientation kept.
    pub fn mirror(&self) -> Self {
        let mut d = self.clone();
        for t in &mut d.tangles {
            t.r = -t.r;
        }
        d.name = format!("mirror({})", self.name);
        d
    }

    /// Split every tangle into `|r|` tangles of index `±1`.
    pub fn refine_to_units(&self) -> Self {
        let mut first = vec![];
        let mut tangles = vec![];
        for t in &self.tangles {
            first.push(tangles.len());
            for _ in 0..t.r.abs() {
                tangles.push(ElementaryTangle { r: t.r.signum(), braid: t.braid });
            }
        }
        let new_port = |old: usize| {
            let (t, p) = port_of(old);
            match p {
                Port::L1 | Port::L2 => port_id(first[t], p),
                Port::R1 | Port::R2 => port_id(first[t] + self.tangles[t].r.unsigned_abs() as usize - 1, p),
            }
        };
        let mut pairs = vec![];
        for p in 0..self.partner.len() {
            if p < self.partner[p] {
                pairs.push((new_port(p), new_port(self.partner[p])));
            }
        }
        for (i, t) in self.tangles.iter().enumerate() {
            for k in 1..t.r.unsigned_abs() as usize {
                let (a, b) = (first[i] + k - 1, first[i] + k);
                pairs.push((port_id(a, Port::R1), port_id(b, Port::L1)));
                pairs.push((port_id(a, Port::R2), port_id(b, Port::L2)));
            }
        }
        let partner = pairing(tangles.len(), &pairs).expect("refinement keeps a perfect pairing");
        let mut d = GluedDiagram { name: self.name.clone(), tangles, partner, incoming: vec![] };
        // Orientation of each unit tangle's ports follows the original strands.
        d.incoming = vec![false; d.partner.len()];
        for (i, t) in self.tangles.iter().enumerate() {
            let len = t.r.unsigned_abs() as usize;
            let l1 = self.incoming[port_id(i, Port::L1)];
            let l2 = self.incoming[port_id(i, Port::L2)];
            for k in 0..len {
                // After k half-twists the strand that entered at L1 sits on
                // row k mod 2.
                let (top, bottom) = if k % 2 == 0 { (l1, l2) } else { (l2, l1) };
                let u = first[i] + k;
                d.incoming[port_id(u, Port::L1)] = top;
                d.incoming[port_id(u, Port::L2)] = bottom;
                d.incoming[port_id(u, Port::R1)] = !bottom;
                d.incoming[port_id(u, Port::R2)] = !top;
            }
        }
        d
    }

    /// Split tangle `i` into a chain of tangles of index `a` and `r_i - a`,
    /// glued `R1-L1`, `R2-L2`. With `a` and `r_i` of opposite signs this is a
    /// sequence of Reidemeister II moves.
    pub fn split(&self, i: usize, a: i32) -> Option<Self> {
        let r = self.tangles.get(i)?.r;
        if a == 0 || a == r {
            return None;
        }
        let renum = |id: usize| -> usize {
            let (t, p) = port_of(id);
            match (t.cmp(&i), p) {
                (std::cmp::Ordering::Less, _) => id,
                (std::cmp::Ordering::Equal, Port::L1 | Port::L2) => id,
                _ => port_id(t + 1, p),
            }
        };
        let mut partner = vec![0; self.partner.len() + 4];
        for p in 0..self.partner.len() {
            partner[renum(p)] = renum(self.partner[p]);
        }
        for (x, y) in [(Port::R1, Port::L1), (Port::R2, Port::L2)] {
            partner[port_id(i, x)] = port_id(i + 1, y);
            partner[port_id(i + 1, y)] = port_id(i, x);
        }
        let mut incoming = vec![false; partner.len()];
        for p in 0..self.partner.len() {
            incoming[renum(p)] = self.incoming[p];
        }
        let l1 = self.incoming[port_id(i, Port::L1)];
        let l2 = self.incoming[port_id(i, Port::L2)];
        // The strand entering at L1 leaves the first piece on row `a mod 2`.
        let (top, bottom) = if a % 2 == 0 { (l1, l2) } else { (l2, l1) };
        incoming[port_id(i, Port::R1)] = !top;
        incoming[port_id(i, Port::R2)] = !bottom;
        incoming[port_id(i + 1, Port::L1)] = top;
        incoming[port_id(i + 1, Port::L2)] = bottom;
        let mut tangles = self.tangles.clone();
        tangles[i].r = a;
        tangles.insert(i + 1, ElementaryTangle { r: r - a, braid: false });
        for (j, t) in tangles.iter_mut().enumerate() {
            t.braid = incoming[port_id(j, Port::L1)] == incoming[port_id(j, Port::L2)];
        }
        Some(GluedDiagram { name: self.name.clone(), tangles, partner, incoming })
    }

    /// Merge the chain of tangles `i, i+1` (glued `R1-L1`, `R2-L2`, same
    /// twist direction) into a single tangle.
    pub fn regroup(&self, i: usize) -> Option<Self> {
        let (a, b) = (self.tangles.get(i)?, self.tangles.get(i + 1)?);
        if a.r.signum() != b.r.signum()
            || self.partner[port_id(i, Port::R1)] != port_id(i + 1, Port::L1)
            || self.partner[port_id(i, Port::R2)] != port_id(i + 1, Port::L2)
        {
            return None;
        }
        let mut tangles = self.tangles.clone();
        tangles[i] = ElementaryTangle { r: a.r + b.r, braid: a.braid };
        tangles.remove(i + 1);
        let renum = |id: usize| -> usize {
            let (t, p) = port_of(id);
            if t == i + 1 {
                port_id(i, p)
            } else if t > i + 1 {
                port_id(t - 1, p)
            } else {
                id
            }
        };
        let mut pairs = vec![];
        for p in 0..self.partner.len() {
            let q = self.partner[p];
            let (tp, _) = port_of(p);
            let (tq, _) = port_of(q);
            let internal = (tp == i && tq == i + 1) || (tp == i + 1 && tq == i);
            if p < q && !internal {
                pairs.push((renum(p), renum(q)));
            }
        }
        let partner = pairing(tangles.len(), &pairs).ok()?;
        let d = Self::build(self.name.clone(), tangles, partner, true).ok()?;
        Some(d)
    }
}

fn pairing(m: usize, pairs: &[(usize, usize)]) -> Result<Vec<usize>, DiagramError> {
    let np = 4 * m;
    let mut partner = vec![usize::MAX; np];
    for (index, &(a, b)) in pairs.iter().enumerate() {
        for x in [a, b] {
            if x >= np {
                return Err(DiagramError::UnknownPort { index, port: format!("#{}", x) });
            }
        }
        if a == b || partner[a] != usize::MAX || partner[b] != usize::MAX {
            let dup = if partner[a] != usize::MAX || a == b { a } else { b };
            return Err(DiagramError::DuplicatedPort { index, port: pname(dup) });
        }
        partner[a] = b;
        partner[b] = a;
    }
    if let Some(p) = partner.iter().position(|&q| q == usize::MAX) {
        return Err(DiagramError::DanglingPort(pname(p)));
    }
    Ok(partner)
}

/// Standard pretzel diagram: twist columns side by side, tops and bottoms
/// chained. Column `i` is tangle `i` turned a quarter so that its `L` ports
/// are on top (`L2` top left, `L1` top right) and `R` ports below (`R2`
/// bottom left, `R1` bottom right).
pub fn gen_pretzel(indices: &[i32]) -> Result<GluedDiagram, DiagramError> {
    if indices.is_empty() {
        return Err(DiagramError::Empty);
    }
    if let Some(i) = indices.iter().position(|&r| r == 0) {
        return Err(DiagramError::ZeroIndex(i));
    }
    let k = indices.len();
    let mut pairs = vec![];
    for i in 0..k {
        let j = (i + 1) % k;
        pairs.push((port_id(i, Port::L1), port_id(j, Port::L2)));
        pairs.push((port_id(i, Port::R1), port_id(j, Port::R2)));
    }
    let name = format!(
        "P({})",
        indices.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
    );
    let tangles: Vec<_> = indices.iter().map(|&r| ElementaryTangle { r, braid: false }).collect();
    let partner = pairing(k, &pairs)?;
    if indices.iter().all(|r| r % 2 == 0) {
        // Prefer the anti-braid orientation, which makes the diagram matched.
        if let Ok(d) = GluedDiagram::build(name.clone(), tangles.clone(), partner.clone(), true) {
            return Ok(d);
        }
    }
    GluedDiagram::build(name, tangles, partner, false)
}

/// Closure of the braid `(s_1 s_2 ... s_{strands-1})^power`, one unit tangle
/// per crossing, strands running left to right.
pub fn gen_torus_braid(strands: usize, power: usize) -> Result<GluedDiagram, DiagramError> {
    if strands < 2 {
        return Err(DiagramError::TooFewStrands);
    }
    if power == 0 {
        return Err(DiagramError::Empty);
    }
    let m = (strands - 1) * power;
    // open[pos] = (first incoming port at this position, current outgoing port).
    let mut first_in: Vec<Option<usize>> = vec![None; strands];
    let mut last_out: Vec<Option<usize>> = vec![None; strands];
    let mut pairs = vec![];
    let mut t = 0;
    for _ in 0..power {
        for i in 0..strands - 1 {
            for (pos, inport, outport) in [(i, Port::L1, Port::R1), (i + 1, Port::L2, Port::R2)] {
                let pin = port_id(t, inport);
                match last_out[pos] {
                    Some(o) => pairs.push((o, pin)),
                    None => first_in[pos] = Some(pin),
                }
                last_out[pos] = Some(port_id(t, outport));
            }
            t += 1;
        }
    }
    for pos in 0..strands {
        pairs.push((last_out[pos].expect("every strand crosses"), first_in[pos].expect("every strand crosses")));
    }
    let r = vec![1; m];
    let tangles: Vec<_> = r.iter().map(|&r| ElementaryTangle { r, braid: true }).collect();
    let partner = pairing(m, &pairs)?;
    GluedDiagram::build(format!("T({},{})", strands, power), tangles, partner, true)
}

/// Single tangle of index `r` with both sides capped.
pub fn capped_tangle(r: i32) -> Result<GluedDiagram, DiagramError> {
    let pairs = [(port_id(0, Port::L1), port_id(0, Port::L2)), (port_id(0, Port::R1), port_id(0, Port::R2))];
    GluedDiagram::from_pairing(&format!("capped({})", r), &[r], &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pretzel_8_19() {
        let d = gen_pretzel(&[-2, 3, 3]).unwrap();
        let s = d.stats();
        assert_eq!(s.component_count, 1);
        assert_eq!(s.writhe, 8);
        assert_eq!(s.big_r, 4);
        assert!(!s.matched);
        assert_eq!(d.tangles.iter().map(|t| t.braid).collect::<Vec<_>>(), vec![false, true, true]);
    }

    #[test]
    fn pretzel_matched_link() {
        let d = gen_pretzel(&[-2, 2, 2]).unwrap();
        let s = d.stats();
        assert_eq!(s.component_count, 3);
        assert!(s.matched);
        assert_eq!(s.writhe, -2);
    }

    #[test]
    fn one_crossing_unknot() {
        let d = gen_pretzel(&[1]).unwrap();
        assert_eq!(d.stats().component_count, 1);
        assert_eq!(d.stats().crossings, 1);
        let c = capped_tangle(2).unwrap();
        assert_eq!(c.stats().component_count, 1);
    }

    #[test]
    fn torus_braids() {
        let d = gen_torus_braid(2, 3).unwrap();
        assert_eq!(d.indices(), vec![1, 1, 1]);
        assert_eq!(d.writhe(), 3);
        assert_eq!(d.stats().component_count, 1);
        let d = gen_torus_braid(4, 5).unwrap();
        assert_eq!(d.num_tangles(), 15);
        assert_eq!(d.stats().component_count, 1);
        let d = gen_torus_braid(4, 7).unwrap();
        assert_eq!(d.num_tangles(), 21);
        let d = gen_torus_braid(2, 2).unwrap();
        assert_eq!(d.stats().component_count, 2);
    }

    #[test]
    fn refine_and_regroup() {
        let d = gen_pretzel(&[-2, 3, 3]).unwrap();
        let u = d.refine_to_units();
        assert_eq!(u.indices(), vec![-1, -1, 1, 1, 1, 1, 1, 1]);
        assert_eq!(u.writhe(), d.writhe());
        assert_eq!(u.stats().component_count, 1);
        let g = u.regroup(0).unwrap();
        assert_eq!(g.indices(), vec![-2, 1, 1, 1, 1, 1, 1]);
        assert_eq!(g.writhe(), d.writhe());
        assert!(u.regroup(1).is_none());
        assert_eq!(gen_pretzel(&[1]).unwrap().refine_to_units().indices(), vec![1]);
    }

    #[test]
    fn mirror_negates_writhe() {
        let d = gen_pretzel(&[-2, 3, 3]).unwrap();
        assert_eq!(d.mirror().writhe(), -d.writhe());
        assert_eq!(d.mirror().indices(), vec![2, -3, -3]);
    }

    #[test]
    fn json_roundtrip_and_errors() {
        let d = gen_pretzel(&[-2, 3, 3]).unwrap();
        let e = GluedDiagram::parse(&d.to_json()).unwrap();
        assert_eq!(e, d);
        let bad = r#"{"tangles":[{"r":1,"braid":true}],
            "connections":[[["t0","L1"],["t0","L2"]],[["t0","L1"],["t0","R2"]]]}"#;
        assert!(matches!(GluedDiagram::parse(bad), Err(DiagramError::DuplicatedPort { .. })));
        let dangling = r#"{"tangles":[{"r":1,"braid":true}],"connections":[[["t0","L1"],["t0","L2"]]]}"#;
        assert!(matches!(GluedDiagram::parse(dangling), Err(DiagramError::DanglingPort(_))));
        let unknown = r#"{"tangles":[{"r":1,"braid":true}],"connections":[[["t0","L3"],["t0","L2"]]]}"#;
        assert!(matches!(GluedDiagram::parse(unknown), Err(DiagramError::UnknownPort { .. })));
        assert!(matches!(GluedDiagram::parse("{"), Err(DiagramError::Syntax(_))));
    }

    #[test]
    fn orientation_conflict_detected() {
        let mut d = gen_pretzel(&[-2, 3, 3]).unwrap();
        d.tangles[0].braid = true;
        assert_eq!(GluedDiagram::parse(&d.to_json()), Err(DiagramError::OrientationConflict(0)));
    }
}
