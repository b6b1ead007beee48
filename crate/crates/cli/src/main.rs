use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rcur::bench::{exp1, exp4, PairMethod, PairSweep, TripletRun};
use rcur::io::{read_matrix, write_matrix};
use rcur::sketch::{default_khat, SketchConfig, DEFAULT_OVERSAMPLING};
use rcur::synth::relative_error;
use rcur::{
    cur, gcur_deterministic, gsvd, r_deim_gcur, r_ldeim_gcur, r_ldeim_rsvd_cur, randomized_gsvd,
    randomized_rsvd, rsvd_cur, rsvd_deterministic, DenseMatrix, Error, IndexList, Selector, Sides,
};

#[derive(Parser)]
#[command(name = "rcur", version, about = "CUR, GCUR and RSVD-CUR decompositions with randomized variants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generalized SVD of a pair (A, B).
    Gsvd(FactorArgs),
    /// Restricted SVD of a triplet (A, B, G).
    Rsvd(TripletFactorArgs),
    /// CUR of a single matrix.
    Cur(CurArgs),
    /// Generalized CUR of a pair (A, B).
    Gcur(GcurArgs),
    /// RSVD-CUR of a triplet (A, B, G).
    RsvdCur(RsvdCurArgs),
    /// Write synthetic test matrices.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Run a seeded benchmark sweep.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct SketchArgs {
    /// Use the randomized algorithm.
    #[arg(long)]
    randomized: bool,
    /// Target rank of the sketch.
    #[arg(short = 'k', long)]
    k: Option<usize>,
    /// Oversampling.
    #[arg(short = 'p', long, default_value_t = DEFAULT_OVERSAMPLING)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FactorArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out_prefix: String,
    #[command(flatten)]
    sketch: SketchArgs,
}

#[derive(Args)]
struct TripletFactorArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    g: PathBuf,
    #[arg(long)]
    out_prefix: String,
    #[command(flatten)]
    sketch: SketchArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Deim,
    Ldeim,
}

impl From<Method> for Selector {
    fn from(m: Method) -> Self {
        match m {
            Method::Deim => Selector::Deim,
            Method::Ldeim => Selector::Ldeim,
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    #[arg(short = 'k', long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Method::Deim)]
    method: Method,
    /// L-DEIM budget; defaults to ⌈k/2⌉.
    #[arg(long)]
    khat: Option<usize>,
    #[arg(long)]
    report: PathBuf,
}

impl SelectArgs {
    fn khat(&self) -> usize {
        match self.method {
            Method::Deim => self.k,
            Method::Ldeim => self.khat.unwrap_or_else(|| default_khat(self.k)),
        }
    }
}

#[derive(Args)]
struct CurArgs {
    #[arg(long)]
    a: PathBuf,
    #[command(flatten)]
    select: SelectArgs,
}

#[derive(Args)]
struct GcurArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    select: SelectArgs,
    #[arg(short = 'p', long, default_value_t = DEFAULT_OVERSAMPLING)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    randomized: bool,
}

#[derive(Args)]
struct RsvdCurArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    g: PathBuf,
    #[command(flatten)]
    select: SelectArgs,
    #[arg(short = 'p', long, default_value_t = DEFAULT_OVERSAMPLING)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Randomized restricted SVD with L-DEIM selection.
    #[arg(long)]
    randomized: bool,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Sparse low-rank A (m × n), A + E with Toeplitz-correlated noise, and the
    /// noise Cholesky factor B: writes PREFIX_A, PREFIX_AE, PREFIX_B.
    Pair {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_prefix: String,
    },
    /// Rank-100 sparse A (m × n) perturbed through B F G: writes PREFIX_A,
    /// PREFIX_AE, PREFIX_B, PREFIX_G.
    Triplet {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_prefix: String,
    },
    /// Four-subgroup target (4m × 3d) and background (m × 3d): writes
    /// PREFIX_A, PREFIX_B.
    Subgroup {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_prefix: String,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Error against rank on the noisy pair problem.
    Exp1 {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        kmin: usize,
        #[arg(long)]
        kmax: usize,
        #[arg(long, default_value_t = 1)]
        kstep: usize,
        /// Number of seeds, run as 0..seeds.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(short = 'p', long, default_value_t = DEFAULT_OVERSAMPLING)]
        p: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// DEIM, L-DEIM and randomized RSVD-CUR on the triplet problem.
    Exp4 {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        /// Defaults to m.
        #[arg(long)]
        n: Option<usize>,
        #[arg(short = 'k', long)]
        k: usize,
        #[arg(long)]
        eps: f64,
        #[arg(short = 'p', long)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::InvalidParameter(_)) { 2 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var("RCUR_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| usage(format!("RCUR_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure { code: 1, message: e.to_string() })
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Gsvd(args) => run_gsvd(args),
        Command::Rsvd(args) => run_rsvd(args),
        Command::Cur(args) => run_cur(args),
        Command::Gcur(args) => run_gcur(args),
        Command::RsvdCur(args) => run_rsvd_cur(args),
        Command::Synth(cmd) => run_synth(cmd),
        Command::Bench(cmd) => run_bench(cmd),
    }
}

fn load(path: &Path) -> CliResult<DenseMatrix> {
    read_matrix(path).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })
}

fn save(a: &DenseMatrix, prefix: &str, name: &str) -> CliResult {
    write_matrix(a, Path::new(&format!("{prefix}_{name}.mtx")))?;
    Ok(())
}

fn sketch_config(s: &SketchArgs, n: usize) -> CliResult<SketchConfig> {
    let k = s.k.ok_or_else(|| usage("--randomized needs -k"))?;
    if k + s.p > n {
        return Err(usage(format!("k + p = {} exceeds n = {n}", k + s.p)));
    }
    Ok(SketchConfig::new(k, s.p, k, s.seed)?)
}

fn run_gsvd(args: FactorArgs) -> CliResult {
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let start = Instant::now();
    let f = if args.sketch.randomized {
        randomized_gsvd(&a, &b, &sketch_config(&args.sketch, a.cols())?)?.0
    } else {
        gsvd(&a, &b)?
    };
    log::info!("gsvd took {:.3} ms", start.elapsed().as_secs_f64() * 1e3);
    let prefix = &args.out_prefix;
    save(&f.u, prefix, "U")?;
    save(&f.v, prefix, "V")?;
    save(&f.y, prefix, "Y")?;
    let mut w = csv::Writer::from_path(format!("{prefix}_vals.csv")).map_err(Error::from)?;
    w.write_record(["gamma", "beta", "ratio"]).map_err(Error::from)?;
    for ((g, b), r) in f.gamma.iter().zip(&f.beta).zip(f.ratios()) {
        w.write_record([format!("{g:e}"), format!("{b:e}"), format!("{r:e}")])
            .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn run_rsvd(args: TripletFactorArgs) -> CliResult {
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let g = load(&args.g)?;
    let start = Instant::now();
    let f = if args.sketch.randomized {
        let k = args.sketch.k.ok_or_else(|| usage("--randomized needs -k"))?;
        randomized_rsvd(&a, &b, &g, &SketchConfig::new(k, args.sketch.p, k, args.sketch.seed)?)?
    } else {
        rsvd_deterministic(&a, &b, &g)?
    };
    log::info!("rsvd took {:.3} ms", start.elapsed().as_secs_f64() * 1e3);
    let prefix = &args.out_prefix;
    save(&f.z, prefix, "Z")?;
    save(&f.w, prefix, "W")?;
    save(&f.u, prefix, "U")?;
    save(&f.v, prefix, "V")?;
    let mut w = csv::Writer::from_path(format!("{prefix}_vals.csv")).map_err(Error::from)?;
    w.write_record(["alpha", "beta", "gamma"]).map_err(Error::from)?;
    for ((al, be), ga) in f.alpha.iter().zip(&f.beta).zip(&f.gamma) {
        w.write_record([format!("{al:e}"), format!("{be:e}"), format!("{ga:e}")])
            .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn join(idx: &IndexList) -> String {
    idx.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct PairReport {
    method: String,
    k: usize,
    khat: usize,
    p: usize,
    seed: u64,
    err_a: f64,
    err_b: Option<f64>,
    wall_ms: f64,
    p_indices: String,
    s_indices: String,
    s_b_indices: String,
}

#[derive(Serialize)]
struct TripletReport {
    method: String,
    k: usize,
    khat: usize,
    p: usize,
    seed: u64,
    err_a: f64,
    err_b: f64,
    err_g: f64,
    wall_ms: f64,
    p_indices: String,
    p_b_indices: String,
    s_indices: String,
    s_g_indices: String,
}

fn write_report<T: Serialize>(path: &Path, row: &T) -> CliResult {
    let mut w = csv::Writer::from_writer(File::create(path).map_err(Error::from)?);
    w.serialize(row).map_err(Error::from)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn method_name(selector: Selector, randomized: bool, base: &str) -> String {
    let sel = match selector {
        Selector::Deim => "DEIM",
        Selector::Ldeim => "LDEIM",
    };
    if randomized {
        format!("R-{sel}-{base}")
    } else {
        format!("{sel}-{base}")
    }
}

fn run_cur(args: CurArgs) -> CliResult {
    let a = load(&args.a)?;
    let sel = &args.select;
    let start = Instant::now();
    let f = cur(&a, sel.k, sel.method.into(), sel.khat())?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let row = PairReport {
        method: method_name(sel.method.into(), false, "CUR"),
        k: sel.k,
        khat: sel.khat(),
        p: 0,
        seed: 0,
        err_a: relative_error(&a, &f.approx(&a)?)?,
        err_b: None,
        wall_ms,
        p_indices: join(&f.p),
        s_indices: join(&f.s),
        s_b_indices: String::new(),
    };
    write_report(&sel.report, &row)
}

fn run_gcur(args: GcurArgs) -> CliResult {
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let sel = &args.select;
    let (k, khat) = (sel.k, sel.khat());
    let selector: Selector = sel.method.into();
    let start = Instant::now();
    let f = if args.randomized {
        let width = if selector == Selector::Deim { k } else { khat };
        if width + args.p > a.cols() {
            return Err(usage(format!("sketch width {} exceeds n = {}", width + args.p, a.cols())));
        }
        let cfg = SketchConfig::new(k, args.p, khat, args.seed)?;
        match selector {
            Selector::Deim => r_deim_gcur(&a, &b, &cfg, Sides::Both)?,
            Selector::Ldeim => r_ldeim_gcur(&a, &b, &cfg, Sides::Both)?,
        }
    } else {
        gcur_deterministic(&a, &b, k, selector, khat, Sides::Both)?
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let err_b = match f.approx_b(&b)? {
        Some(bh) => Some(relative_error(&b, &bh)?),
        None => None,
    };
    let row = PairReport {
        method: method_name(selector, args.randomized, "GCUR"),
        k,
        khat,
        p: if args.randomized { args.p } else { 0 },
        seed: args.seed,
        err_a: relative_error(&a, &f.approx_a(&a)?)?,
        err_b,
        wall_ms,
        p_indices: join(&f.p),
        s_indices: join(&f.s_a),
        s_b_indices: f.s_b.as_ref().map(join).unwrap_or_default(),
    };
    write_report(&sel.report, &row)
}

fn run_rsvd_cur(args: RsvdCurArgs) -> CliResult {
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let g = load(&args.g)?;
    let sel = &args.select;
    let (k, khat) = (sel.k, sel.khat());
    let selector: Selector = sel.method.into();
    if args.randomized && selector == Selector::Deim {
        return Err(usage("the randomized RSVD-CUR uses --method ldeim"));
    }
    let start = Instant::now();
    let f = if args.randomized {
        r_ldeim_rsvd_cur(&a, &b, &g, &SketchConfig::new(k, args.p, khat, args.seed)?)?
    } else {
        rsvd_cur(&a, &b, &g, k, selector, khat)?
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let row = TripletReport {
        method: method_name(selector, args.randomized, "RSVD-CUR"),
        k,
        khat,
        p: if args.randomized { args.p } else { 0 },
        seed: args.seed,
        err_a: relative_error(&a, &f.approx_a(&a)?)?,
        err_b: relative_error(&b, &f.approx_b(&b)?)?,
        err_g: relative_error(&g, &f.approx_g(&g)?)?,
        wall_ms,
        p_indices: join(&f.p),
        p_b_indices: join(&f.p_b),
        s_indices: join(&f.s),
        s_g_indices: join(&f.s_g),
    };
    write_report(&sel.report, &row)
}

fn run_synth(cmd: SynthCommand) -> CliResult {
    match cmd {
        SynthCommand::Pair { m, n, eps, seed, out_prefix } => {
            if eps < 0.0 {
                return Err(usage("--eps must be nonnegative"));
            }
            let prob = rcur::bench::pair_problem(m, n, eps, seed)?;
            save(&prob.a, &out_prefix, "A")?;
            save(&prob.a_e, &out_prefix, "AE")?;
            save(&prob.b, &out_prefix, "B")
        }
        SynthCommand::Triplet { l, d, m, n, eps, seed, out_prefix } => {
            if !(l >= d && d >= m && m >= n && n >= 1) {
                return Err(usage(format!("need l >= d >= m >= n >= 1, got {l}, {d}, {m}, {n}")));
            }
            let prob = rcur::bench::triplet_problem(l, d, m, n, eps, seed)?;
            save(&prob.a, &out_prefix, "A")?;
            save(&prob.a_e, &out_prefix, "AE")?;
            save(&prob.b, &out_prefix, "B")?;
            save(&prob.g, &out_prefix, "G")
        }
        SynthCommand::Subgroup { m, d, seed, out_prefix } => {
            let (a, b) = rcur::synth::subgroup_data(m, d, seed)?;
            save(&a, &out_prefix, "A")?;
            save(&b, &out_prefix, "B")
        }
    }
}

fn run_bench(cmd: BenchCommand) -> CliResult {
    let (rows, out) = match cmd {
        BenchCommand::Exp1 { m, n, eps, kmin, kmax, kstep, seeds, p, ref out } => {
            if kmin == 0 || kstep == 0 || kmin > kmax || kmax + p > n {
                return Err(usage(format!(
                    "need 1 <= kmin <= kmax, kstep >= 1 and kmax + p <= n, got kmin={kmin}, kmax={kmax}, kstep={kstep}, p={p}, n={n}"
                )));
            }
            let cfg = PairSweep {
                m,
                n,
                eps,
                ks: (kmin..=kmax).step_by(kstep).collect(),
                seeds: (0..seeds).collect(),
                p,
                methods: PairMethod::ALL.to_vec(),
            };
            (exp1(&cfg)?, out.clone())
        }
        BenchCommand::Exp4 { l, d, m, n, k, eps, p, seeds, ref out } => {
            let cfg = TripletRun { l, d, m, n: n.unwrap_or(m), k, eps, p, seeds: (0..seeds).collect() };
            (exp4(&cfg)?, out.clone())
        }
    };
    let mut w = csv::Writer::from_writer(File::create(&out).map_err(Error::from)?);
    for row in &rows {
        w.serialize(row).map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}
