//! `enumsm`: batch front end for enumeration, reports and harness runs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 insufficient stage,
//! 4 snapshot corruption.

mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use enumsm::enumerator::{DiscreteBound, DEFAULT_MAX_STAGE, DEFAULT_TREE_DEPTH};
use enumsm::information::{self, InfoContext, Transform, DEFAULT_CAP};
use enumsm::machine::{MachineConfig, DEFAULT_LENGTH_CAP, INSTRUCTION_SET_VERSION};
use enumsm::randomness::lambda_deficiency_row;
use enumsm::snapshot::CacheSnapshot;
use enumsm::{Error, ExtInt, Prefix};

use output::{render, Cell, Format, Header, Table};

const SNAPSHOT_DIR_ENV: &str = "ENUMSM_SNAPSHOT_DIR";

#[derive(Parser)]
#[command(name = "enumsm", version, about = "Stage-indexed universal distributions on a toy bit machine")]
struct Cli {
    /// Worker threads; 0 uses one per core. Never changes output bytes.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Advance the snapshot to a stage and print a summary.
    Enumerate(EnumerateArgs),
    /// K_t and KM_t for all strings up to a length.
    ReportComplexity(ComplexityArgs),
    /// Formula and gap forms of d(x|λ) for λ-samples.
    ReportDeficiency(DeficiencyArgs),
    /// I_t, the i-bound and the sup-bound over a corpus of pairs.
    ReportInfo(InfoArgs),
    /// Conservation records for string transforms over a corpus.
    RunConservation(ConservationArgs),
    /// I_t(x : K_t(x)) beside K_t(K_t(x)).
    DemoOccam(OccamArgs),
    /// Information in prefixes of the step-bounded halting sequence.
    DemoChi(ChiArgs),
}

#[derive(Args, Serialize, Clone)]
struct Common {
    /// Snapshot file [default: snapshot-d<depth>.esms in $ENUMSM_SNAPSHOT_DIR or .]
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long, env = SNAPSHOT_DIR_ENV)]
    #[serde(skip)]
    snapshot_dir: Option<PathBuf>,
    /// Depth of the continuous tree.
    #[arg(long, default_value_t = DEFAULT_TREE_DEPTH)]
    depth: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file [default: stdout].
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

impl Common {
    fn snapshot_path(&self) -> PathBuf {
        self.snapshot.clone().unwrap_or_else(|| {
            let dir = self.snapshot_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            dir.join(format!("snapshot-d{}.esms", self.depth))
        })
    }
}

#[derive(Args, Serialize)]
struct EnumerateArgs {
    #[command(flatten)]
    common: Common,
    /// Target stage.
    #[arg(long, default_value_t = DEFAULT_MAX_STAGE)]
    stage: usize,
}

#[derive(Args, Serialize)]
struct Required {
    /// Smallest snapshot stage accepted.
    #[arg(long = "stage", default_value_t = DEFAULT_MAX_STAGE)]
    min_stage: usize,
}

#[derive(Args, Serialize)]
struct ComplexityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    required: Required,
    #[arg(long, default_value_t = 8)]
    max_len: usize,
}

#[derive(Args, Serialize)]
struct DeficiencyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    required: Required,
    /// Length of each λ-sample.
    #[arg(long, default_value_t = 12)]
    length: usize,
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct CorpusArgs {
    /// CSV of `a,b` bit-string pairs (`-` is the empty string, `#` starts a
    /// comment). Without it, a corpus is sampled at two stages below the
    /// snapshot.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    corpus_size: usize,
    #[arg(long, default_value_t = 12)]
    corpus_max_len: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct InfoArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    required: Required,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Largest |x|, |y| in the i-sum.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
}

#[derive(Args, Serialize)]
struct ConservationArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    required: Required,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Transforms to run [default: all].
    #[arg(long = "transform", value_parser = parse_transform)]
    transforms: Vec<Transform>,
    /// Draws of w for the adjunction inequality.
    #[arg(long, default_value_t = 100)]
    draws: usize,
    #[arg(long, default_value_t = 2)]
    w_len: usize,
}

#[derive(Args, Serialize)]
struct OccamArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    required: Required,
    #[arg(long, default_value_t = 6)]
    max_len: usize,
}

#[derive(Args, Serialize)]
struct ChiArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    required: Required,
    #[arg(long, value_delimiter = ',', default_values_t = vec![4, 8, 16, 32])]
    lengths: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_transform(s: &str) -> Result<Transform, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Stage { have: usize, need: usize },
    Corrupt(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Stage { .. } => 3,
            Failure::Corrupt(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Stage { have, need } => write!(
                f,
                "insufficient stage: snapshot is at stage {have}, need {need} (short by {})",
                need - have
            ),
            Failure::Corrupt(m) => write!(f, "snapshot rejected: {m}"),
        }
    }
}

type Out<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("enumsm: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[derive(Serialize)]
struct RunConfig<'a> {
    #[serde(flatten)]
    command: &'a Command,
}

fn run(cmd: &Command) -> Out<()> {
    let config = RunConfig { command: cmd };
    match cmd {
        Command::Enumerate(a) => enumerate(a, &config),
        Command::ReportComplexity(a) => {
            let snap = load_required(&a.common, &a.required)?;
            emit(&a.common, &config, &snap, &[complexity_table(&snap, a.max_len)])
        }
        Command::ReportDeficiency(a) => {
            let snap = load_required(&a.common, &a.required)?;
            emit(&a.common, &config, &snap, &[deficiency_table(&snap, a)])
        }
        Command::ReportInfo(a) => {
            let snap = load_required(&a.common, &a.required)?;
            let corpus = corpus(&a.corpus, &snap)?;
            emit(&a.common, &config, &snap, &[info_table(&snap, &corpus, a.cap)])
        }
        Command::RunConservation(a) => {
            let snap = load_required(&a.common, &a.required)?;
            let corpus = corpus(&a.corpus, &snap)?;
            emit(&a.common, &config, &snap, &conservation_tables(&snap, &corpus, a))
        }
        Command::DemoOccam(a) => {
            let snap = load_required(&a.common, &a.required)?;
            emit(&a.common, &config, &snap, &[occam_table(&snap, a.max_len)])
        }
        Command::DemoChi(a) => {
            let snap = load_required(&a.common, &a.required)?;
            emit(&a.common, &config, &snap, &[chi_table(&snap, a)])
        }
    }
}

/// The snapshot at `path`, or a fresh stage-0 state if there is none.
fn load(common: &Common) -> Out<(CacheSnapshot, Vec<u8>)> {
    let path = common.snapshot_path();
    if !path.exists() {
        let s = CacheSnapshot::new(MachineConfig::discrete(), common.depth);
        let bytes = s.to_bytes();
        return Ok((s, bytes));
    }
    let bytes = std::fs::read(&path).map_err(|e| Failure::Config(format!("reading {}: {e}", path.display())))?;
    let snap = CacheSnapshot::from_bytes(&bytes).map_err(|e| Failure::Corrupt(format!("{}: {e}", path.display())))?;
    if snap.discrete.config() != &MachineConfig::discrete() {
        return Err(Failure::Corrupt(format!("{}: not an unconditional snapshot", path.display())));
    }
    if snap.continuous.depth() != common.depth {
        return Err(Failure::Config(format!(
            "{} has tree depth {}, requested {}",
            path.display(),
            snap.continuous.depth(),
            common.depth
        )));
    }
    Ok((snap, bytes))
}

struct Loaded {
    snap: CacheSnapshot,
    sha256: String,
}

fn load_required(common: &Common, req: &Required) -> Out<Loaded> {
    let (snap, bytes) = load(common)?;
    let have = snap.stage().0;
    if have < req.min_stage {
        return Err(Failure::Stage {
            have,
            need: req.min_stage,
        });
    }
    Ok(Loaded {
        snap,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn enumerate(a: &EnumerateArgs, config: &RunConfig) -> Out<()> {
    if a.stage > DEFAULT_LENGTH_CAP {
        return Err(Failure::Config(format!(
            "stage {} exceeds the program length cap {DEFAULT_LENGTH_CAP}",
            a.stage
        )));
    }
    let (mut snap, _) = load(&a.common)?;
    snap.advance_to(a.stage);
    let bytes = snap.to_bytes();
    let path = a.common.snapshot_path();
    write_atomic(&path, &bytes)?;
    let loaded = Loaded {
        snap,
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    let snap = &loaded.snap;
    let mut summary = Table::new("summary", &["key", "value"]);
    summary.push(vec!["kraft_sum".into(), Cell::Text(snap.discrete.kraft_sum().to_string())]);
    summary.push(vec!["discrete_entries".into(), snap.discrete.raw_masses().len().into()]);
    summary.push(vec!["discrete_frontier".into(), snap.discrete.frontier().len().into()]);
    summary.push(vec!["continuous_frontier".into(), snap.continuous.frontier().len().into()]);
    summary.push(vec!["tree_depth".into(), snap.continuous.depth().into()]);
    let mut hist: BTreeMap<ExtInt, usize> = BTreeMap::new();
    for x in snap.discrete.raw_masses().keys() {
        *hist.entry(snap.discrete.complexity(x)).or_insert(0) += 1;
    }
    let mut h = Table::new("k_histogram", &["k", "count"]);
    for (k, n) in hist {
        h.push(vec![k.into(), n.into()]);
    }
    emit(&a.common, config, &loaded, &[summary, h])
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Out<()> {
    let tmp = path.with_extension("esms.tmp");
    std::fs::write(&tmp, bytes)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| Failure::Config(format!("writing {}: {e}", path.display())))
}

fn emit(common: &Common, config: &RunConfig, loaded: &Loaded, tables: &[Table]) -> Out<()> {
    let header = Header {
        tool: concat!("enumsm ", env!("CARGO_PKG_VERSION")),
        instruction_set: INSTRUCTION_SET_VERSION,
        snapshot_sha256: loaded.sha256.clone(),
        stage: loaded.snap.stage().0,
        config,
    };
    let bytes = render(&header, tables, common.format);
    match &common.out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::Config(format!("writing {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| Failure::Config(format!("writing stdout: {e}")))
        }
    }
}

fn complexity_table(l: &Loaded, max_len: usize) -> Table {
    let mut t = Table::new("complexity", &["x", "k", "km"]);
    for x in Prefix::all_up_to(max_len) {
        let km = if x.len() <= l.snap.continuous.depth() {
            l.snap.continuous.complexity(&x).into()
        } else {
            Cell::Null
        };
        t.push(vec![(&x).into(), l.snap.discrete.complexity(&x).into(), km]);
    }
    t
}

fn deficiency_table(l: &Loaded, a: &DeficiencyArgs) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut t = Table::new("lambda_deficiency", &["sample", "x", "formula", "gap"]);
    for i in 0..a.samples {
        let x = Prefix::from_bits((0..a.length).map(|_| rng.gen::<bool>()).collect());
        let r = lambda_deficiency_row(&x, &l.snap.discrete);
        t.push(vec![i.into(), (&x).into(), r.formula.into(), r.gap.into()]);
    }
    t
}

fn corpus(a: &CorpusArgs, l: &Loaded) -> Out<Vec<(Prefix, Prefix)>> {
    match &a.corpus {
        Some(path) => read_corpus(path),
        None => {
            let t = l.snap.stage().0.saturating_sub(2);
            let m = DiscreteBound::at_stage(t).map_err(|e| Failure::Config(e.to_string()))?;
            Ok(information::corpus(&m, a.corpus_max_len, a.corpus_size, a.seed))
        }
    }
}

fn read_corpus(path: &Path) -> Out<Vec<(Prefix, Prefix)>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Config(format!("reading {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let bad = |m: String| Failure::Config(format!("{} record {}: {m}", path.display(), i + 1));
        if rec.len() != 2 {
            return Err(bad(format!("expected 2 fields, got {}", rec.len())));
        }
        let a: Prefix = rec[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let b: Prefix = rec[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        out.push((a, b));
    }
    Ok(out)
}

fn info_table(l: &Loaded, corpus: &[(Prefix, Prefix)], cap: usize) -> Table {
    let ctx = InfoContext::new(l.snap.discrete.clone());
    let mut t = Table::new(
        "info",
        &["pair", "a", "b", "k_a", "k_b", "k_ab", "i_finite", "i_bound", "i_terms", "i_unbounded", "sup_bound", "sup_witness"],
    );
    for (n, r) in information::info_reports(corpus, &ctx, cap).iter().enumerate() {
        t.push(vec![
            n.into(),
            (&r.a).into(),
            (&r.b).into(),
            r.finite.k_a.into(),
            r.finite.k_b.into(),
            r.finite.k_ab.into(),
            r.finite.i.into(),
            r.lower.value.into(),
            r.lower.terms.into(),
            r.lower.unbounded.into(),
            r.sup.value.into(),
            r.sup.witness.as_ref().into(),
        ]);
    }
    t
}

fn conservation_tables(l: &Loaded, corpus: &[(Prefix, Prefix)], a: &ConservationArgs) -> Vec<Table> {
    let transforms = if a.transforms.is_empty() {
        Transform::ALL.to_vec()
    } else {
        a.transforms.clone()
    };
    let m = &l.snap.discrete;
    let mut records = Table::new(
        "records",
        &["transform", "pair", "a", "b", "before", "after", "slack", "skipped"],
    );
    let mut summary = Table::new("summary", &["transform", "evaluated", "skipped", "constant"]);
    for t in transforms {
        let (recs, s) = information::conservation_harness(t, corpus, m);
        for (n, r) in recs.iter().enumerate() {
            records.push(vec![
                t.name().into(),
                n.into(),
                (&r.a).into(),
                (&r.b).into(),
                r.before.into(),
                r.after.into(),
                r.slack.into(),
                r.skipped.clone().into(),
            ]);
        }
        summary.push(vec![t.name().into(), s.evaluated.into(), s.skipped.into(), s.constant.into()]);
    }
    let mut adj = Table::new("adjunction", &["draw", "a", "b", "w", "excess"]);
    for (n, s) in information::adjunction_samples(corpus, m, a.draws, a.w_len, a.corpus.seed)
        .iter()
        .enumerate()
    {
        adj.push(vec![n.into(), (&s.a).into(), (&s.b).into(), (&s.w).into(), s.excess.into()]);
    }
    vec![records, summary, adj]
}

fn occam_table(l: &Loaded, max_len: usize) -> Table {
    let xs: Vec<Prefix> = Prefix::all_up_to(max_len).collect();
    let mut t = Table::new("occam", &["x", "k", "k_of_k", "i_x_k"]);
    for r in information::occam_demo(&xs, &l.snap.discrete) {
        t.push(vec![(&r.x).into(), r.k.into(), r.k_of_k.into(), r.info.into()]);
    }
    t
}

fn chi_table(l: &Loaded, a: &ChiArgs) -> Table {
    let ctx = InfoContext::new(l.snap.discrete.clone());
    let mut t = Table::new("chi_step_bounded", &["n", "chi", "k", "i_random", "i_self"]);
    for r in information::chi_demo(&a.lengths, &ctx, a.cap, a.seed) {
        t.push(vec![r.n.into(), (&r.chi).into(), r.k.into(), r.lower_random.into(), r.lower_self.into()]);
    }
    t
}
