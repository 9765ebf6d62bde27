//! Cells of the partial sock category: sign and frame assignments, the
//! discard rule, and exhaustive coboundary checks.
//!
//! Coordinate `j` with `r_j > 0` has objects `0..=r_j`: the step `0 -> 1` is
//! a single point `P`, a step from odd `s` has points `P, M`, a step from
//! even `s >= 2` has points `P_1..P_n`. For `r_j < 0` the step `-1 -> 0` is
//! `P`, steps from negative even `s` have `P, M`, and steps from negative odd
//! `s <= -3` have `P_1..P_n`. Cells are based at their lowest object.

use serde::Serialize;

/// Image of a moduli point in the sock category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Phi {
    P,
    M,
    Pk(u8),
}

impl Phi {
    /// `P` or `M`; every `P_k` counts as `P` for signs and frames.
    pub fn pm(self) -> Phi {
        match self {
            Phi::M => Phi::M,
            _ => Phi::P,
        }
    }

    pub fn is_m(self) -> bool {
        self == Phi::M
    }
}

impl std::fmt::Display for Phi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phi::P => write!(f, "P"),
            Phi::M => write!(f, "M"),
            Phi::Pk(k) => write!(f, "P{}", k),
        }
    }
}

/// Points of a single step, by kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Surgery,
    Pair,
    Cyclic,
}

/// Kind of the step `a_j -> a_j + 1` in a coordinate of index `r`, or
/// `None` if it leaves the range.
pub fn step(r: i32, a: i32) -> Option<Step> {
    if r > 0 {
        match a {
            a if a < 0 || a >= r => None,
            0 => Some(Step::Surgery),
            a if a % 2 == 1 => Some(Step::Pair),
            _ => Some(Step::Cyclic),
        }
    } else {
        match a {
            a if a < r || a >= 0 => None,
            -1 => Some(Step::Surgery),
            a if a % 2 == 0 => Some(Step::Pair),
            _ => Some(Step::Cyclic),
        }
    }
}

/// `delta_j`: 1 iff `r_j < 0`.
pub fn delta(r: i32) -> bool {
    r < 0
}

fn prefix(a: &[i32], j: usize) -> bool {
    a[..j].iter().fold(false, |acc, &x| acc ^ (x.rem_euclid(2) == 1))
}

fn range_sum(a: &[i32], from: usize, to: usize) -> bool {
    a[from..to].iter().fold(false, |acc, &x| acc ^ (x.rem_euclid(2) == 1))
}

/// Standard sign of the 1-cell `phi` in coordinate `j` based at `a`.
pub fn sign(a: &[i32], j: usize, phi: Phi) -> bool {
    prefix(a, j) ^ phi.is_m()
}

/// A 2-cell, based at some multidegree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Cell2 {
    /// Product of 1-cells in coordinates `j < i`.
    Prod { j: usize, ej: Phi, i: usize, ei: Phi },
    /// Interval over two steps of coordinate `j` starting with a `P, M` step.
    N { j: usize },
    /// Interval over two steps of coordinate `j` starting with any other step.
    NTilde { j: usize },
}

/// Standard frame of a 2-cell based at `a`.
pub fn frame(r: &[i32], a: &[i32], cell: &Cell2) -> bool {
    match *cell {
        Cell2::Prod { j, ej, i, ei } => {
            assert!(j < i, "product cells list the smaller coordinate first");
            let pre = prefix(a, j);
            match (ej.pm(), ei.pm()) {
                (Phi::P, Phi::P) => pre & range_sum(a, j, i),
                (Phi::P, _) => pre & !range_sum(a, j, i),
                (_, Phi::P) => !pre & (delta(r[j]) ^ range_sum(a, j + 1, i)),
                _ => !pre & !(delta(r[j]) ^ range_sum(a, j + 1, i)),
            }
        }
        Cell2::N { j } => prefix(a, j),
        Cell2::NTilde { .. } => false,
    }
}

/// Single-coordinate 2-cell over `a_j -> a_j + 2`, if both steps exist.
pub fn interval_cell(r: &[i32], a: &[i32], j: usize) -> Option<Cell2> {
    let first = step(r[j], a[j])?;
    step(r[j], a[j] + 1)?;
    Some(match first {
        Step::Pair => Cell2::N { j },
        _ => Cell2::NTilde { j },
    })
}

/// A one-dimensional sock moduli component over two steps of one
/// coordinate, described by the `P_k` indices at its two ends: the end whose
/// `P/M` leg is `P` carries `P_{k_p}`, the other `P_{k_m}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SockInterval {
    pub n: u8,
    pub k_p: u8,
    pub k_m: u8,
}

impl SockInterval {
    /// Intervals pair `P_k` with `P_{k+1}`; the wrap-around pair `P_n`, `P_1`
    /// is discarded.
    pub fn is_discarded(&self) -> bool {
        self.k_p == self.n && self.k_m == 1
    }

    /// Whether this is an interval of the sock category at all.
    pub fn is_interval(&self) -> bool {
        self.k_m == self.k_p % self.n + 1
    }
}

/// Result of an exhaustive coboundary check.
#[derive(Clone, Debug, Default, Serialize)]
pub struct OracleReport {
    pub two_cells: usize,
    pub three_cells: usize,
    pub failures: Vec<String>,
}

impl OracleReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn all_bases(r: &[i32]) -> Vec<Vec<i32>> {
    let mut out = vec![vec![]];
    for &rj in r {
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

fn plus(a: &[i32], j: usize) -> Vec<i32> {
    let mut b = a.to_vec();
    b[j] += 1;
    b
}

/// 1-cell kinds available at a step.
fn pm_cells(s: Step) -> &'static [Phi] {
    match s {
        Step::Pair => &[Phi::P, Phi::M],
        _ => &[Phi::P],
    }
}

/// Boundary 1-cells of a single-coordinate interval at `a`, as
/// `(base, phi)` with multiplicity.
fn interval_edges(a: &[i32], cell: &Cell2) -> Vec<(Vec<i32>, Phi)> {
    match *cell {
        Cell2::N { j } => {
            vec![(a.to_vec(), Phi::P), (a.to_vec(), Phi::M), (plus(a, j), Phi::P), (plus(a, j), Phi::P)]
        }
        Cell2::NTilde { j } => {
            vec![(a.to_vec(), Phi::P), (a.to_vec(), Phi::P), (plus(a, j), Phi::P), (plus(a, j), Phi::M)]
        }
        Cell2::Prod { .. } => unreachable!(),
    }
}

/// Check `delta s = 1` on every 2-cell and the coboundary values of `f` on
/// every 3-cell, for all bases of the sock category of `r` with `n` labels.
pub fn oracle_check(r: &[i32], n: u8, f: &dyn Fn(&[i32], &Cell2) -> bool) -> OracleReport {
    let mut rep = OracleReport::default();
    let m = r.len();
    let s = |a: &[i32], j: usize, phi: Phi| sign(a, j, phi) as u8;
    for a in all_bases(r) {
        // 2-cells.
        for j in 0..m {
            let Some(sj) = step(r[j], a[j]) else { continue };
            for i in j + 1..m {
                let Some(si) = step(r[i], a[i]) else { continue };
                for &ej in pm_cells(sj) {
                    for &ei in pm_cells(si) {
                        rep.two_cells += 1;
                        let sum = s(&a, j, ej) + s(&a, i, ei) + s(&plus(&a, i), j, ej) + s(&plus(&a, j), i, ei);
                        if sum % 2 != 1 {
                            rep.failures.push(format!("delta s at {:?} ({},{})x({},{})", a, j, ej, i, ei));
                        }
                    }
                }
            }
            if let Some(cell) = interval_cell(r, &a, j) {
                rep.two_cells += 1;
                let sum: u8 = interval_edges(&a, &cell).iter().map(|(b, phi)| s(b, j, *phi)).sum();
                if sum % 2 != 1 {
                    rep.failures.push(format!("delta s at {:?} {:?}", a, cell));
                }
            }
        }
        // Triple products.
        for k in 0..m {
            let Some(sk) = step(r[k], a[k]) else { continue };
            for j in k + 1..m {
                let Some(sj) = step(r[j], a[j]) else { continue };
                for i in j + 1..m {
                    let Some(si) = step(r[i], a[i]) else { continue };
                    for &ek in pm_cells(sk) {
                        for &ej in pm_cells(sj) {
                            for &ei in pm_cells(si) {
                                rep.three_cells += 1;
                                let faces = [
                                    (a.clone(), Cell2::Prod { j, ej, i, ei }),
                                    (plus(&a, k), Cell2::Prod { j, ej, i, ei }),
                                    (a.clone(), Cell2::Prod { j: k, ej: ek, i, ei }),
                                    (plus(&a, j), Cell2::Prod { j: k, ej: ek, i, ei }),
                                    (a.clone(), Cell2::Prod { j: k, ej: ek, i: j, ei: ej }),
                                    (plus(&a, i), Cell2::Prod { j: k, ej: ek, i: j, ei: ej }),
                                ];
                                let df = faces.iter().fold(false, |acc, (b, c)| acc ^ f(b, c));
                                let want = (s(&a, k, ek) + s(&a, j, ej) + s(&a, i, ei)) % 2 == 1;
                                if df != want {
                                    rep.failures.push(format!(
                                        "delta f at {:?} ({},{})x({},{})x({},{})",
                                        a, k, ek, j, ej, i, ei
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
        // 1-cell times interval, in both orders.
        for j in 0..m {
            for i in 0..m {
                if i == j {
                    continue;
                }
                let Some(se) = step(r[j], a[j]) else { continue };
                let Some(cell) = interval_cell(r, &a, i) else { continue };
                for &e in pm_cells(se) {
                    rep.three_cells += 1;
                    let prod = |base: Vec<i32>, phi: Phi| {
                        let c = if j < i {
                            Cell2::Prod { j, ej: e, i, ei: phi }
                        } else {
                            Cell2::Prod { j: i, ej: phi, i: j, ei: e }
                        };
                        (base, c)
                    };
                    let mut faces = vec![(a.clone(), cell), (plus(&a, j), cell)];
                    for (b, phi) in interval_edges(&a, &cell) {
                        faces.push(prod(b, phi));
                    }
                    let df = faces.iter().fold(false, |acc, (b, c)| acc ^ f(b, c));
                    let want = match cell {
                        Cell2::N { .. } => (s(&a, j, e) + s(&a, i, Phi::P) + s(&a, i, Phi::M)) % 2 == 1,
                        _ => s(&a, j, e) == 1,
                    };
                    if df != want {
                        rep.failures.push(format!("delta f at {:?} ({},{}) x {:?}", a, j, e, cell));
                    }
                }
            }
        }
        // Q cells: N at a twice, N-tilde at a + e_j twice.
        if n >= 3 {
            for j in 0..m {
                if step(r[j], a[j]) == Some(Step::Pair) && step(r[j], a[j] + 2).is_some() {
                    rep.three_cells += 1;
                    let b = plus(&a, j);
                    let df = f(&a, &Cell2::N { j }) ^ f(&a, &Cell2::N { j }) ^ f(&b, &Cell2::NTilde { j })
                        ^ f(&b, &Cell2::NTilde { j });
                    if df {
                        rep.failures.push(format!("delta f at {:?} Q{}", a, j));
                    }
                }
            }
        }
    }
    rep
}

/// Check the standard assignments.
pub fn oracle_standard(r: &[i32], n: u8) -> OracleReport {
    let rv = r.to_vec();
    oracle_check(r, n, &move |a, c| frame(&rv, a, c))
}
