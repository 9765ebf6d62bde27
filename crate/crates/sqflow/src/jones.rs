//! Unnormalized Jones polynomial from the Kauffman bracket state sum, used as
//! an oracle for graded Euler characteristics. Every tangle is expanded into
//! unit crossings and smoothed independently of the resolution machinery.

use crate::diagram::{port_id, GluedDiagram, Port};
use std::collections::BTreeMap;

/// Laurent polynomial, exponent to coefficient, zero terms removed.
pub type Laurent = BTreeMap<i64, i64>;

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra] = rb;
    }
}

/// Writhe from the orientation of the outer ports: the strands of a tangle
/// run the same way across it (braid-like) or opposite ways.
pub fn writhe(d: &GluedDiagram) -> i64 {
    (0..d.num_tangles())
        .map(|j| {
            let r = d.tangles[j].r as i64;
            let same = d.is_incoming(port_id(j, Port::L1)) == d.is_incoming(port_id(j, Port::L2));
            if same {
                r
            } else {
                -r
            }
        })
        .sum()
}

/// `(-A^2 - A^{-2})^loops * A^(a - b)` summed over all states.
pub fn kauffman_bracket(d: &GluedDiagram) -> Laurent {
    // Unit crossings: tangle j holds units base[j]..base[j]+|r_j|, chained
    // R1 -> L1 and R2 -> L2.
    let m = d.num_tangles();
    let mut base = vec![0usize; m + 1];
    for j in 0..m {
        base[j + 1] = base[j] + d.tangles[j].r.unsigned_abs() as usize;
    }
    let units = base[m];
    let np = 4 * units;
    let outer = |id: usize| -> usize {
        let (j, p) = (id / 4, id % 4);
        let len = base[j + 1] - base[j];
        let u = if p < 2 { base[j] } else { base[j] + len - 1 };
        4 * u + p
    };
    let mut fixed = vec![];
    for j in 0..m {
        for u in base[j]..base[j + 1] - 1 {
            fixed.push((4 * u + 2, 4 * (u + 1)));
            fixed.push((4 * u + 3, 4 * (u + 1) + 1));
        }
    }
    for id in 0..d.num_ports() {
        let p = d.partner(id);
        if id < p {
            fixed.push((outer(id), outer(p)));
        }
    }
    let positive: Vec<bool> =
        (0..m).flat_map(|j| std::iter::repeat_n(d.tangles[j].r > 0, base[j + 1] - base[j])).collect();
    // Loop-count histogram indexed by (#A smoothings, loops).
    let mut hist: BTreeMap<(i64, i64), i64> = BTreeMap::new();
    let mut parent = vec![0usize; np];
    for state in 0u64..(1u64 << units) {
        for (k, p) in parent.iter_mut().enumerate() {
            *p = k;
        }
        for &(a, b) in &fixed {
            union(&mut parent, a, b);
        }
        let mut a_count = 0i64;
        for u in 0..units {
            let a_smoothing = state >> u & 1 == 0;
            a_count += a_smoothing as i64;
            // A is horizontal at positive crossings and vertical at negative ones.
            let horizontal = a_smoothing == positive[u];
            let o = 4 * u;
            if horizontal {
                union(&mut parent, o, o + 2);
                union(&mut parent, o + 1, o + 3);
            } else {
                union(&mut parent, o, o + 1);
                union(&mut parent, o + 2, o + 3);
            }
        }
        let loops = (0..np).filter(|&k| find(&mut parent, k) == k).count() as i64;
        *hist.entry((a_count, loops)).or_insert(0) += 1;
    }
    let mut out = Laurent::new();
    for (&(a, loops), &count) in &hist {
        // (-A^2 - A^-2)^loops, expanded binomially.
        let mut poly: Laurent = BTreeMap::from([(0, 1)]);
        for _ in 0..loops {
            let mut next = Laurent::new();
            for (&e, &c) in &poly {
                *next.entry(e + 2).or_insert(0) -= c;
                *next.entry(e - 2).or_insert(0) -= c;
            }
            poly = next;
        }
        let shift = a - (units as i64 - a);
        for (e, c) in poly {
            *out.entry(e + shift).or_insert(0) += c * count;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

/// Jones polynomial in `q`, normalized so the unknot gives `q + q^{-1}`.
pub fn jones(d: &GluedDiagram) -> Laurent {
    let w = writhe(d);
    let bracket = kauffman_bracket(d);
    let sign = if w % 2 == 0 { 1 } else { -1 };
    let mut out = Laurent::new();
    for (e, c) in bracket {
        // (-A^3)^{-w} A^e, then A^{2k} = (-q)^{-k}.
        let ea = e - 3 * w;
        assert!(ea % 2 == 0, "odd A-exponent in a normalized bracket");
        let k = ea / 2;
        let sgn = if k % 2 == 0 { 1 } else { -1 };
        *out.entry(-k).or_insert(0) += sign * sgn * c;
    }
    out.retain(|_, c| *c != 0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{capped_tangle, gen_pretzel, gen_torus_braid};

    #[test]
    fn unknot_diagrams() {
        let want = Laurent::from([(-1, 1), (1, 1)]);
        assert_eq!(jones(&gen_pretzel(&[1]).unwrap()), want);
        assert_eq!(jones(&capped_tangle(3).unwrap()), want);
        assert_eq!(jones(&capped_tangle(-2).unwrap()), want);
    }

    #[test]
    fn right_handed_trefoil() {
        let want = Laurent::from([(1, 1), (3, 1), (5, 1), (9, -1)]);
        assert_eq!(jones(&gen_torus_braid(2, 3).unwrap()), want);
        let mirrored: Laurent = want.iter().map(|(&e, &c)| (-e, c)).collect();
        assert_eq!(jones(&gen_torus_braid(2, 3).unwrap().mirror()), mirrored);
    }

    #[test]
    fn diagram_independence() {
        // P(1,1,1) is the trefoil drawn as a pretzel.
        let a = jones(&gen_pretzel(&[1, 1, 1]).unwrap());
        let b = jones(&gen_torus_braid(2, 3).unwrap());
        let bm: Laurent = b.iter().map(|(&e, &c)| (-e, c)).collect();
        assert!(a == b || a == bm);
        // 8_19 = T(3,4) = P(-2,3,3) up to mirror.
        let p = jones(&gen_pretzel(&[-2, 3, 3]).unwrap());
        let t = jones(&gen_torus_braid(3, 4).unwrap());
        let tm: Laurent = t.iter().map(|(&e, &c)| (-e, c)).collect();
        assert!(p == t || p == tm);
    }

    #[test]
    fn object_euler_characteristic_matches() {
        use crate::resolution::{Mode, Setup};
        for d in [
            gen_pretzel(&[-2, 3, 3]).unwrap(),
            gen_pretzel(&[-2, 2, 2]).unwrap(),
            gen_torus_braid(3, 2).unwrap(),
            capped_tangle(-3).unwrap(),
        ] {
            let want = jones(&d);
            let setup = Setup::new(d, 2, Mode::Kh).unwrap();
            let mut got = Laurent::new();
            for o in setup.enumerate_objects() {
                let sign = if setup.reported_i(o.t()) % 2 == 0 { 1 } else { -1 };
                *got.entry(setup.q_of(&o)).or_insert(0) += sign;
            }
            got.retain(|_, c| *c != 0);
            assert_eq!(got, want);
        }
    }
}
