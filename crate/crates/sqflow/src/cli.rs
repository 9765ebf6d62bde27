//! Command-line front end: run configuration, result caching and files, and
//! the self-check suite. The computing modules never touch the filesystem;
//! everything here that does is confined to `load_diagram` and `run`.

use crate::classify::{classify, FourRankSummary, QuantumInput, WedgeDecomposition};
use crate::diagram::{gen_pretzel, gen_torus_braid, GluedDiagram};
use crate::flowcat::{Bucket, Ladybug};
use crate::gf2::Gf2Matrix;
use crate::homalg::{Cochains, Cohomology, Reduction};
use crate::jones::jones;
use crate::resolution::{Mode, Setup};
use crate::sockcell::{frame, oracle_check, oracle_standard, Cell2};
use crate::steenrod::{sq2_matrix, MatchingChoice, Sq2Options};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::cell::RefCell;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::SelfCheck(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "sqflow", version, about = "Flow categories, sl_n Khovanov cohomology and Sq^2 for glued diagrams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integral cohomology of every quantum degree.
    Compute(RunArgs),
    /// Cohomology with Sq^1, Sq^2, four-rank summaries and wedge decompositions.
    Steenrod(RunArgs),
    /// One wedge decomposition per quantum degree, as text.
    Classify(RunArgs),
    /// Oracle and invariance suite; exit code 3 on any failure.
    Selfcheck(SelfcheckArgs),
    /// Tab-separated objects, points and intervals of one quantum degree.
    DumpCategory(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Kh,
    Sln,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LadybugArg {
    Right,
    Left,
}

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    /// Number of labels (sl_n).
    #[arg(long, default_value_t = 2)]
    pub n: u8,
    /// Pretzel indices, e.g. "-2,3,3".
    #[arg(long, allow_hyphen_values = true)]
    pub pretzel: Option<String>,
    /// Torus link T(A,B): closure of `(s_1 ... s_{A-1})^B`, one unit tangle per crossing.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub torus: Option<Vec<usize>>,
    /// Glued diagram file in the JSON diagram format.
    #[arg(long)]
    pub diagram: Option<PathBuf>,
    /// Quantum degrees to compute; all by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Vec<i64>,
    /// Grading convention; `kh` for n = 2, `sln` otherwise, by default.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Ladybug matching: pair arcs by ports (L1, R2) on positive tangles (`right`) or the other pair (`left`).
    #[arg(long, value_enum, default_value = "right")]
    pub ladybug: LadybugArg,
    /// Keep the full cochain complex instead of Gaussian elimination.
    #[arg(long)]
    pub no_eliminate: bool,
    /// Randomized-choice trials for every Sq^2 matrix.
    #[arg(long, default_value_t = 8)]
    pub trials: u32,
    /// Seed of the randomized trials.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores by default.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Directory of cached JSON results.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refuse any quantum degree with more objects than this.
    #[arg(long, default_value_t = 4_000_000)]
    pub max_objects: u64,
}

#[derive(Args, Clone, Debug)]
pub struct SelfcheckArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Flip one frame bit fed to the sock oracle; the suite must then fail.
    #[arg(long)]
    pub mutate_frame: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum DiagramSource {
    Pretzel(Vec<i32>),
    Torus(usize, usize),
    File(PathBuf),
    /// A diagram handed over in memory.
    Given,
}

impl DiagramSource {
    /// The flags that select this diagram.
    pub fn flags(&self) -> String {
        match self {
            DiagramSource::Pretzel(v) => {
                let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                format!("--pretzel \"{}\"", s.join(","))
            }
            DiagramSource::Torus(a, b) => format!("--torus {} {}", a, b),
            DiagramSource::File(p) => format!("--diagram {}", p.display()),
            DiagramSource::Given => "--diagram <given>".into(),
        }
    }
}

/// A validated run configuration.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub source: DiagramSource,
    pub n: u8,
    pub mode: Mode,
    pub q: Vec<i64>,
    pub ladybug: Ladybug,
    pub eliminate: bool,
    pub trials: u32,
    pub seed: u64,
    #[serde(skip)]
    pub max_objects: u64,
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self, CliError> {
        let given = [a.pretzel.is_some(), a.torus.is_some(), a.diagram.is_some()].iter().filter(|&&b| b).count();
        let source = match (&a.pretzel, &a.torus, &a.diagram) {
            _ if given > 1 => return Err(CliError::Usage("give only one of --pretzel, --torus, --diagram".into())),
            (Some(p), _, _) => {
                let v: Result<Vec<i32>, _> = p.split(',').map(|x| x.trim().parse::<i32>()).collect();
                DiagramSource::Pretzel(v.map_err(|e| CliError::Usage(format!("bad --pretzel {:?}: {}", p, e)))?)
            }
            (_, Some(t), _) => DiagramSource::Torus(t[0], t[1]),
            (_, _, Some(f)) => DiagramSource::File(f.clone()),
            _ => return Err(CliError::Usage("one of --pretzel, --torus, --diagram is required".into())),
        };
        let mode = match a.mode {
            Some(ModeArg::Kh) => Mode::Kh,
            Some(ModeArg::Sln) => Mode::Sln,
            None if a.n == 2 => Mode::Kh,
            None => Mode::Sln,
        };
        let mut q = a.q.clone();
        q.sort_unstable();
        q.dedup();
        Ok(RunConfig {
            source,
            n: a.n,
            mode,
            q,
            ladybug: match a.ladybug {
                LadybugArg::Right => Ladybug::Right,
                LadybugArg::Left => Ladybug::Left,
            },
            eliminate: !a.no_eliminate,
            trials: a.trials,
            seed: a.seed,
            max_objects: a.max_objects,
        })
    }

    /// Flags reproducing this configuration.
    pub fn flags(&self) -> String {
        let mut s = format!("{} --n {} --mode {}", self.source.flags(), self.n, if self.mode == Mode::Kh { "kh" } else { "sln" });
        if !self.q.is_empty() {
            let q: Vec<String> = self.q.iter().map(|x| x.to_string()).collect();
            s += &format!(" --q {}", q.join(","));
        }
        if self.ladybug == Ladybug::Left {
            s += " --ladybug left";
        }
        if !self.eliminate {
            s += " --no-eliminate";
        }
        s + &format!(" --trials {} --seed {}", self.trials, self.seed)
    }
}

/// Read or generate the diagram of a configuration.
pub fn load_diagram(source: &DiagramSource) -> Result<GluedDiagram, CliError> {
    let d = match source {
        DiagramSource::Pretzel(v) => gen_pretzel(v),
        DiagramSource::Torus(a, b) => gen_torus_braid(*a, *b),
        DiagramSource::File(p) => GluedDiagram::parse(&std::fs::read_to_string(p)?),
        DiagramSource::Given => return Err(CliError::Usage("an in-memory diagram has no source to load".into())),
    };
    d.map_err(|e| CliError::Validation(e.to_string()))
}

/// Check mode against diagram and apply the memory guard; returns the
/// quantum degrees to compute with their object counts.
pub fn prepare(cfg: &RunConfig, d: GluedDiagram) -> Result<(Setup, Vec<(i64, u64)>), CliError> {
    let setup = Setup::new(d, cfg.n, cfg.mode).map_err(|e| CliError::Validation(e.to_string()))?;
    let hist = setup.q_histogram();
    let qs: Vec<(i64, u64)> = if cfg.q.is_empty() {
        hist.into_iter().collect()
    } else {
        cfg.q.iter().map(|q| (*q, hist.get(q).copied().unwrap_or(0))).collect()
    };
    if let Some((q, c)) = qs.iter().find(|(_, c)| *c > cfg.max_objects) {
        return Err(CliError::Validation(format!(
            "quantum degree {} has {} objects, above --max-objects {}",
            q, c, cfg.max_objects
        )));
    }
    Ok((setup, qs))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiagramInfo {
    pub tangles: usize,
    pub indices: Vec<i32>,
    pub components: usize,
    pub writhe: i64,
    pub matched: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Group {
    pub i: i64,
    pub free: usize,
    /// Prime-power torsion orders.
    pub torsion: Vec<u64>,
}

/// A mod-2 operation out of degree `i`, in the class bases of source and
/// target (columns are sources).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Operation {
    pub i: i64,
    pub rank: usize,
    pub matrix: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SteenrodReport {
    pub sq1: Vec<Operation>,
    pub sq2: Vec<Operation>,
    pub four_ranks: Vec<FourRankSummary>,
    /// Trials with random matchings, relabeled ids and perturbed cocycles
    /// that reproduced every Sq^2 matrix.
    pub trials_agreeing: u32,
    pub decomposition: WedgeDecomposition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BucketReport {
    pub q: i64,
    pub objects: usize,
    pub eliminated_pairs: usize,
    pub groups: Vec<Group>,
    /// Degrees spanned by nonzero integral cohomology.
    pub width: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steenrod: Option<SteenrodReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub config: RunConfig,
    pub diagram: DiagramInfo,
    pub buckets: Vec<BucketReport>,
}

/// Everything computed for one quantum degree.
pub struct BucketData<'a> {
    pub bucket: Bucket<'a>,
    pub gens: Vec<Vec<u32>>,
    pub cochains: Cochains,
    pub reduction: Reduction,
    pub cohomology: Cohomology,
}

pub fn bucket_data<'a>(setup: &'a Setup, q: i64, ladybug: Ladybug, eliminate: bool) -> Result<BucketData<'a>, CliError> {
    let bucket = Bucket::build(setup, q, ladybug).map_err(|e| CliError::Validation(e.to_string()))?;
    let (cochains, gens) = Cochains::from_bucket(&bucket);
    let reduction = Reduction::build(&cochains, eliminate);
    let cohomology = reduction.reduced.cohomology().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(BucketData { bucket, gens, cochains, reduction, cohomology })
}

impl BucketData<'_> {
    pub fn reported(&self, k: usize) -> i64 {
        self.bucket.setup.reported_i(self.cohomology.t0 + k as i32)
    }

    pub fn groups(&self) -> Vec<Group> {
        self.cohomology
            .degrees
            .iter()
            .enumerate()
            .filter(|(_, d)| d.free > 0 || !d.invariants.is_empty())
            .map(|(k, d)| Group { i: self.reported(k), free: d.free, torsion: d.torsion() })
            .collect()
    }

    pub fn sq2(&self, k: usize, opts: Sq2Options) -> Result<Gf2Matrix, CliError> {
        sq2_matrix(&self.bucket, &self.gens, &self.reduction, &self.cohomology, k, opts)
            .map_err(|e| CliError::Validation(format!("q={} degree {}: {}", self.bucket.q, self.reported(k), e)))
    }

    pub fn sq2_all(&self, opts: Sq2Options) -> Result<Vec<Gf2Matrix>, CliError> {
        (0..self.cohomology.len()).map(|k| self.sq2(k, opts)).collect()
    }

    pub fn quantum_input(&self, sq2: Vec<Gf2Matrix>) -> QuantumInput {
        QuantumInput::from_cohomology(&self.cohomology, self.reported(0), sq2)
    }
}

/// The option sets of the randomized trials.
pub fn trial_options(seed: u64, trials: u32) -> Vec<Sq2Options> {
    (0..trials as u64)
        .map(|t| {
            let s = seed.wrapping_mul(0x1000_0000_01b3).wrapping_add(t);
            let choice = if t % 2 == 0 { MatchingChoice::Random(s) } else { MatchingChoice::Relabel(s) };
            Sq2Options { choice, perturb: Some(s) }
        })
        .collect()
}

fn operations(data: &BucketData, ms: &[Gf2Matrix]) -> Vec<Operation> {
    ms.iter()
        .enumerate()
        .filter(|(_, m)| m.rank() > 0)
        .map(|(k, m)| Operation { i: data.reported(k), rank: m.rank(), matrix: m.to_rows() })
        .collect()
}

fn steenrod_report(data: &BucketData, cfg: &RunConfig) -> Result<SteenrodReport, CliError> {
    let sq2 = data.sq2_all(Sq2Options::default())?;
    let mut agreeing = 0;
    for opts in trial_options(cfg.seed, cfg.trials) {
        if data.sq2_all(opts)? != sq2 {
            return Err(CliError::SelfCheck(format!(
                "Sq^2 depends on choices at q={} ({:?}); reproduce with: sqflow steenrod {}",
                data.bucket.q,
                opts,
                cfg.flags()
            )));
        }
        agreeing += 1;
    }
    let sq1: Vec<Gf2Matrix> = (0..data.cohomology.len()).map(|k| data.cohomology.sq1(k)).collect();
    let input = data.quantum_input(sq2.clone());
    let decomposition = classify(&input).map_err(|e| CliError::Validation(format!("q={}: {}", data.bucket.q, e)))?;
    Ok(SteenrodReport {
        sq1: operations(data, &sq1),
        sq2: operations(data, &sq2),
        four_ranks: input.four_ranks().into_iter().filter(|f| f.total() > 0).collect(),
        trials_agreeing: agreeing,
        decomposition,
    })
}

/// Compute every selected quantum degree; buckets run on the worker pool.
pub fn analyze(cfg: &RunConfig, setup: &Setup, qs: &[(i64, u64)], steenrod: bool) -> Result<Report, CliError> {
    let buckets: Result<Vec<BucketReport>, CliError> = qs
        .par_iter()
        .filter(|(_, count)| *count > 0)
        .map(|&(q, _)| {
            let data = bucket_data(setup, q, cfg.ladybug, cfg.eliminate)?;
            let groups = data.groups();
            let width = data.quantum_input(vec![]).width();
            let steenrod = if steenrod { Some(steenrod_report(&data, cfg)?) } else { None };
            Ok(BucketReport {
                q,
                objects: data.bucket.len(),
                eliminated_pairs: data.reduction.eliminated_pairs(),
                groups,
                width,
                steenrod,
            })
        })
        .collect();
    let d = &setup.diagram;
    Ok(Report {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        diagram: DiagramInfo {
            tangles: d.num_tangles(),
            indices: d.indices(),
            components: d.components().len(),
            writhe: d.writhe(),
            matched: d.is_matched(),
        },
        buckets: buckets?,
    })
}

/// Text rendering of the decompositions in a report.
pub fn classify_text(r: &Report) -> String {
    let mut s = String::new();
    for b in &r.buckets {
        if let Some(st) = &b.steenrod {
            s += &format!("q={}\t{}\n", b.q, st.decomposition);
        }
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelfcheckReport {
    pub config: RunConfig,
    pub checks: Vec<Check>,
}

impl SelfcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: impl Into<String>, failures: Vec<String>, ok_detail: String) -> Check {
    Check {
        name: name.into(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() { ok_detail } else { failures.into_iter().take(5).collect::<Vec<_>>().join("; ") },
    }
}

/// Sock oracle on the diagram's index vector, optionally with the first
/// queried frame bit flipped.
pub fn sock_check(r: &[i32], n: u8, mutate: bool) -> Check {
    let rep = if mutate {
        let first: RefCell<Option<(Vec<i32>, Cell2)>> = RefCell::new(None);
        let rv = r.to_vec();
        oracle_check(r, n, &move |a, c| {
            let mut f = first.borrow_mut();
            let hit = match &*f {
                None => {
                    *f = Some((a.to_vec(), *c));
                    true
                }
                Some((a0, c0)) => a0 == a && c0 == c,
            };
            frame(&rv, a, c) ^ hit
        })
    } else {
        oracle_standard(r, n)
    };
    check(
        format!("sock oracle r={:?} n={}", r, n),
        rep.failures.clone(),
        format!("{} 2-cells, {} 3-cells", rep.two_cells, rep.three_cells),
    )
}

/// The self-check suite on one configuration.
pub fn selfcheck(cfg: &RunConfig, setup: &Setup, qs: &[(i64, u64)], mutate_frame: bool) -> SelfcheckReport {
    let repro = |what: &str, q: i64| format!("{} at q={}; reproduce with: sqflow selfcheck {}", what, q, cfg.flags());
    let mut checks = vec![sock_check(&setup.diagram.indices(), cfg.n, mutate_frame)];
    let mut d2 = vec![];
    let mut grading = vec![];
    let mut choice = vec![];
    let mut ladybug = vec![];
    let mut reassembly = vec![];
    let mut euler = crate::jones::Laurent::new();
    let mut done = 0;
    for &(q, count) in qs {
        if count == 0 {
            continue;
        }
        done += 1;
        let data = match bucket_data(setup, q, cfg.ladybug, cfg.eliminate) {
            Ok(d) => d,
            Err(e) => {
                d2.push(repro(&e.to_string(), q));
                continue;
            }
        };
        if data.cochains.check_d_squared().is_err() || data.reduction.reduced.check_d_squared().is_err() {
            d2.push(repro("d^2 != 0", q));
        }
        let b = &data.bucket;
        for (x, pts) in b.out.iter().enumerate() {
            for p in pts {
                let (src, dst) = (&b.objects[x], &b.objects[p.target as usize]);
                if setup.q_of(src) != q || setup.q_of(dst) != q || dst.t() != src.t() + 1 {
                    grading.push(repro(&format!("point {} -> {} leaves its grading", x, p.target), q));
                }
            }
        }
        let sq2 = match data.sq2_all(Sq2Options::default()) {
            Ok(m) => m,
            Err(e) => {
                choice.push(repro(&e.to_string(), q));
                continue;
            }
        };
        for opts in trial_options(cfg.seed, cfg.trials) {
            if data.sq2_all(opts).ok().as_ref() != Some(&sq2) {
                choice.push(repro(&format!("Sq^2 changed under {:?}", opts), q));
            }
        }
        let other = if cfg.ladybug == Ladybug::Right { Ladybug::Left } else { Ladybug::Right };
        match bucket_data(setup, q, other, cfg.eliminate).and_then(|o| o.sq2_all(Sq2Options::default())) {
            Ok(m) if m == sq2 => {}
            _ => ladybug.push(repro("Sq^2 changed with the ladybug convention", q)),
        }
        let input = data.quantum_input(sq2);
        match classify(&input) {
            Ok(w) if w.is_determined() => {
                let mut got: Vec<(i64, u64)> = w.summands.iter().flat_map(|s| s.cohomology()).collect();
                got.sort_unstable();
                let mut want = vec![];
                for g in data.groups() {
                    want.extend(std::iter::repeat_n((g.i, 0), g.free));
                    want.extend(g.torsion.iter().map(|&t| (g.i, t)));
                }
                want.sort_unstable();
                let eta = w.summands.iter().filter(|s| s.cohomology().len() == 2).count();
                let rank: usize = (0..input.degrees.len()).map(|k| input.sq2_rank(k)).sum();
                if got != want || eta != rank {
                    reassembly.push(repro(&format!("{} does not reassemble the cohomology", w), q));
                }
            }
            Ok(_) => {}
            Err(e) => reassembly.push(repro(&e.to_string(), q)),
        }
        if cfg.mode == Mode::Kh {
            let chi: i64 = data
                .cohomology
                .degrees
                .iter()
                .enumerate()
                .map(|(k, d)| if data.reported(k) % 2 == 0 { d.free as i64 } else { -(d.free as i64) })
                .sum();
            if chi != 0 {
                euler.insert(q, chi);
            }
        }
    }
    let info = format!("{} quantum degrees", done);
    checks.push(check("d^2 = 0", d2, info.clone()));
    checks.push(check("quantum grading preserved", grading, info.clone()));
    checks.push(check(
        format!("Sq^2 invariant under {} randomized trials", cfg.trials),
        choice,
        info.clone(),
    ));
    checks.push(check("Sq^2 invariant under the ladybug convention", ladybug, info.clone()));
    checks.push(check("decompositions reassemble", reassembly, info.clone()));
    if cfg.mode == Mode::Kh {
        let mut want = jones(&setup.diagram);
        if !cfg.q.is_empty() {
            want.retain(|q, _| cfg.q.contains(q));
        }
        let fail = if want == euler { vec![] } else { vec![format!("Euler characteristic {:?} != Jones {:?}", euler, want)] };
        checks.push(check("Euler characteristic = Jones polynomial", fail, format!("{} terms", want.len())));
    }
    SelfcheckReport { config: cfg.clone(), checks }
}

/// Deterministic JSON for a serializable result.
pub fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("results serialize") + "\n"
}

/// Hex SHA-256 cache key over the diagram text and every convention flag.
pub fn cache_key(command: &str, cfg: &RunConfig, d: &GluedDiagram) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(d.to_json().as_bytes());
    h.update(to_json(cfg).as_bytes());
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.finalize().iter().map(|b| format!("{:02x}", b)).collect()
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{}", text),
    }
    Ok(())
}

fn init_threads(threads: Option<usize>) {
    if let Some(t) = threads {
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

/// Run one command; the result is written to `--out` or stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::Compute(a) => ("compute", a),
        Command::Steenrod(a) => ("steenrod", a),
        Command::Classify(a) => ("classify", a),
        Command::Selfcheck(s) => ("selfcheck", &s.run),
        Command::DumpCategory(a) => ("dump-category", a),
    };
    init_threads(args.threads);
    let cfg = RunConfig::from_args(args)?;
    let d = load_diagram(&cfg.source)?;
    if let Command::DumpCategory(_) = cli.command {
        if cfg.q.len() != 1 {
            return Err(CliError::Usage("dump-category needs exactly one --q".into()));
        }
    }
    let cached = args.cache.as_ref().map(|dir| dir.join(format!("{}.out", cache_key(name, &cfg, &d))));
    if let Some(p) = &cached {
        if p.is_file() {
            return emit(&args.out, &std::fs::read_to_string(p)?);
        }
    }
    let (setup, qs) = prepare(&cfg, d)?;
    let text = match &cli.command {
        Command::Compute(_) => to_json(&analyze(&cfg, &setup, &qs, false)?),
        Command::Steenrod(_) => to_json(&analyze(&cfg, &setup, &qs, true)?),
        Command::Classify(_) => classify_text(&analyze(&cfg, &setup, &qs, true)?),
        Command::DumpCategory(_) => {
            let b = Bucket::build(&setup, cfg.q[0], cfg.ladybug).map_err(|e| CliError::Validation(e.to_string()))?;
            b.dump().map_err(|e| CliError::Validation(e.to_string()))?
        }
        Command::Selfcheck(s) => {
            let rep = selfcheck(&cfg, &setup, &qs, s.mutate_frame);
            let text = to_json(&rep);
            if !rep.passed() {
                emit(&args.out, &text)?;
                let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(CliError::SelfCheck(failed.join(", ")));
            }
            text
        }
    };
    if let Some(p) = &cached {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, &text)?;
    }
    emit(&args.out, &text)
}

/// Parse arguments, run, and map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            e.exit_code()
        }
    }
}
