use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlhd::io::{self as dio, DataFormat, Loaded};
use mlhd::model_file::{load_model, save_model, Model, TrainingInfo};
use mlhd::pca::pca_reduce;
use mlhd::toy::{gen_toy, ToySpec, DEFAULT_BIAS};
use mlhd::Error;
use mlhd_core::eval::{
    accuracy, classify_targets, param_sweep, run_experiment, ArcMethod, BoundsChoice, CcaMethod, KernelChoice, Method,
    MlhdMethod, Pools, RefSet, TestCount, TrialProtocol, DEFAULT_GRID_L1, DEFAULT_GRID_L2,
};
use mlhd_core::kernel::{fit_kernelized, KernelModel};
use mlhd_core::linalg::{eig_sym, Matrix};
use mlhd_core::metric::{build_constraints, embed_common_space, estimate_bounds, ConstraintOrientation};
use mlhd_core::solver::fit;
use mlhd_core::{DomainData, Label, SolverConfig};

/// Metric learning across heterogeneous domains.
#[derive(Parser)]
#[command(name = "mlhd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic two-domain problem as CSV files.
    Toy(ToyArgs),
    /// Learn a cross-domain metric.
    Fit(FitArgs),
    /// Classify target samples with a saved model.
    Eval(EvalArgs),
    /// Repeated random-split comparison of methods.
    Experiment(ExperimentArgs),
    /// Accuracy over a lambda1 × lambda2 grid.
    Sweep(SweepArgs),
    /// Common-space coordinates of source and target samples.
    Embed(EmbedArgs),
    /// Reduce a data file with PCA.
    Pca(PcaArgs),
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Labeled-target bias in target standard deviations along the first axis.
    #[arg(long, default_value_t = DEFAULT_BIAS)]
    bias: f64,
    /// Print the generator constants.
    #[arg(long)]
    show_spec: bool,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Name of the CSV label column.
    #[arg(long, default_value = dio::DEFAULT_LABEL_COLUMN)]
    label_column: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Sparse,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Args, Clone)]
struct MlhdArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda2: f64,
    #[arg(long, default_value_t = 1e-3)]
    t0: f64,
    /// Upper bound for same-class distances (default: 5th percentile).
    #[arg(long, requires = "l")]
    u: Option<f64>,
    /// Lower bound for different-class distances (default: 95th percentile).
    #[arg(long, requires = "u")]
    l: Option<f64>,
    #[arg(long, default_value_t = 50)]
    max_cycles: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Visit constraints in a seeded random order each cycle.
    #[arg(long)]
    shuffle: bool,
    /// Same-class pairs get lower bounds and different-class pairs upper bounds.
    #[arg(long)]
    literal_constraints: bool,
    /// Learn the kernelized form.
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// RBF width; per-domain median heuristic when omitted.
    #[arg(long)]
    gamma: Option<f64>,
    /// Ridge added to each Gram block (default: 1e-8 · trace / order).
    #[arg(long)]
    ridge: Option<f64>,
}

impl MlhdArgs {
    fn solver(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            t0: self.t0,
            max_cycles: self.max_cycles,
            tol: self.tol,
            seed,
            shuffle: self.shuffle,
        }
    }

    fn orientation(&self) -> ConstraintOrientation {
        if self.literal_constraints {
            ConstraintOrientation::Literal
        } else {
            ConstraintOrientation::Standard
        }
    }

    fn bounds(&self) -> BoundsChoice {
        match (self.u, self.l) {
            (Some(u), Some(l)) => BoundsChoice::Fixed { u, l },
            _ => BoundsChoice::default(),
        }
    }

    fn kernel_choice(&self) -> Option<KernelChoice> {
        self.kernel.map(|k| match (k, self.gamma) {
            (KernelArg::Linear, _) => KernelChoice::Linear,
            (KernelArg::Rbf, Some(gamma)) => KernelChoice::Rbf { gamma },
            (KernelArg::Rbf, None) => KernelChoice::RbfMedian,
        })
    }

    fn method(&self, seed: u64) -> MlhdMethod {
        MlhdMethod {
            solver: self.solver(seed),
            bounds: self.bounds(),
            orientation: self.orientation(),
            kernel: self.kernel_choice(),
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    mlhd: MlhdArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum RefsArg {
    Source,
    Both,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled source references.
    #[arg(long)]
    source: PathBuf,
    /// Labeled target test samples.
    #[arg(long)]
    target_test: PathBuf,
    /// Target training file whose labeled samples join the references.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Reference set; `both` when --target is given, else `source`.
    #[arg(long, value_enum)]
    refs: Option<RefsArg>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Clone)]
struct ProtocolArgs {
    #[arg(long, default_value_t = 20)]
    n_source_labeled: usize,
    #[arg(long, default_value_t = 1)]
    n_target_labeled: usize,
    #[arg(long, default_value_t = 20)]
    n_target_unlabeled: usize,
    /// Test samples per trial, or `all`.
    #[arg(long, default_value = "300")]
    n_test: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum, default_value = "both")]
    refs: RefsArg,
    /// Report sample instead of population standard deviation.
    #[arg(long)]
    sample_std: bool,
    /// Reduce the source pool to this many principal components first.
    #[arg(long)]
    pca_source: Option<usize>,
    /// Reduce the target pool to this many principal components first.
    #[arg(long)]
    pca_target: Option<usize>,
}

impl ProtocolArgs {
    fn protocol(&self) -> Result<TrialProtocol, Failure> {
        let n_test = if self.n_test.eq_ignore_ascii_case("all") {
            TestCount::All
        } else {
            TestCount::Count(
                self.n_test
                    .parse()
                    .map_err(|_| Failure::Usage(format!("--n-test must be a count or 'all', got '{}'", self.n_test)))?,
            )
        };
        Ok(TrialProtocol {
            n_source_labeled_per_class: self.n_source_labeled,
            n_target_labeled_per_class: self.n_target_labeled,
            n_target_unlabeled_per_class: self.n_target_unlabeled,
            n_test,
            n_trials: self.trials,
            seed: self.seed,
            k: self.k,
            refs: refs(self.refs),
            sample_std: self.sample_std,
        })
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Mlhd,
    Arc,
    CcaNn,
    CcaItml,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Fully labeled source pool.
    #[arg(long)]
    source: PathBuf,
    /// Fully labeled target pool.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mlhd")]
    method: Vec<MethodArg>,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[command(flatten)]
    mlhd: MlhdArgs,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Space- or comma-separated lambda1 values.
    #[arg(long)]
    grid_l1: Option<String>,
    /// Space- or comma-separated lambda2 values.
    #[arg(long)]
    grid_l2: Option<String>,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[command(flatten)]
    mlhd: MlhdArgs,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    model: PathBuf,
    /// Common-space dimension.
    #[arg(long)]
    dc: usize,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct PcaArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    dim: usize,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn refs(r: RefsArg) -> RefSet {
    match r {
        RefsArg::Source => RefSet::Source,
        RefsArg::Both => RefSet::Both,
    }
}

fn load(path: &Path, data: &DataArgs) -> Result<Loaded, Failure> {
    let format = data.format.map(|f| match f {
        FormatArg::Csv => DataFormat::Csv,
        FormatArg::Sparse => DataFormat::Sparse,
    });
    if format.is_none() && DataFormat::from_path(path).is_none() {
        return Err(Failure::Usage(format!(
            "cannot infer the format of {}; pass --format",
            path.display()
        )));
    }
    Ok(dio::load(path, format, &data.label_column)?)
}

fn out<W: Write>(mut w: W, text: &str) -> CliResult {
    w.write_all(text.as_bytes()).map_err(|e| {
        Failure::Run(Error::Io {
            path: "<stdout>".into(),
            source: e,
        })
    })
}

fn toy(a: &ToyArgs) -> CliResult {
    let spec = ToySpec::with_bias(a.seed, a.bias);
    if a.show_spec {
        out(io::stdout(), &format!("{spec}\n"))?;
    }
    let Some(dir) = &a.out_dir else {
        if a.show_spec {
            return Ok(());
        }
        return Err(Failure::Usage(
            "--out-dir is required unless --show-spec is given".into(),
        ));
    };
    let t = gen_toy(&spec)?;
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    dio::save_dense_csv(&dir.join("source.csv"), &t.source, &dio::stored_labels(&t.source))?;
    dio::save_dense_csv(&dir.join("target.csv"), &t.target, &dio::stored_labels(&t.target))?;
    let test = t.target_test();
    dio::save_dense_csv(&dir.join("target_test.csv"), &test, &dio::stored_labels(&test))?;
    let full = t.target_full();
    dio::save_dense_csv(&dir.join("target_full.csv"), &full, &dio::stored_labels(&full))?;
    Ok(())
}

fn fit_cmd(a: &FitArgs) -> CliResult {
    let x = load(&a.source, &a.data)?.data;
    let y = load(&a.target, &a.data)?.data;
    let (u, l) = match (a.mlhd.u, a.mlhd.l) {
        (Some(u), Some(l)) => (u, l),
        _ => estimate_bounds(&x, &y, 5.0, 95.0)?,
    };
    let cs = build_constraints(&x, &y, u, l, a.mlhd.orientation())?;
    let cfg = a.mlhd.solver(a.seed);
    let (model, report) = match a.mlhd.kernel_choice() {
        None => {
            let (m, r) = fit(&x, &y, &cs, &cfg)?;
            (Model::Linear(m), r)
        }
        Some(choice) => {
            let (sx, sy) = choice.resolve(&x, &y)?;
            let (m, r) = fit_kernelized(&x, &y, &cs, &cfg, sx, sy, a.mlhd.ridge)?;
            (Model::Kernelized(m), r)
        }
    };
    let info = TrainingInfo {
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        t0: cfg.t0,
        u,
        l,
        max_cycles: cfg.max_cycles,
        tol: cfg.tol,
        seed: cfg.seed,
        shuffle: cfg.shuffle,
        literal_constraints: a.mlhd.literal_constraints,
        cycles_run: report.cycles_run,
        converged: report.converged,
    };
    save_model(&a.model_out, &model, Some(&info))?;
    out(
        io::stdout(),
        &format!(
            "cycles_run={}\nfinal_objective={}\nmax_violation={}\nmmd_initial={}\nmmd_final={}\nconverged={}\nconstraints={}\nu={}\nl={}\n",
            report.cycles_run,
            report.final_objective,
            report.max_violation,
            report.mmd_initial,
            report.mmd_final,
            report.converged,
            cs.len(),
            u,
            l
        ),
    )
}

fn check_dims(model: &Model, x: &DomainData, y: &DomainData) -> CliResult {
    let (dx, dy) = model.dims();
    if x.dim() != dx || y.dim() != dy {
        return Err(Failure::Run(Error::Core(mlhd_core::Error::InvalidInput(format!(
            "model expects source/target dimensions {dx}/{dy}, data has {}/{}",
            x.dim(),
            y.dim()
        )))));
    }
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> CliResult {
    let (model, _) = load_model(&a.model)?;
    let source = load(&a.source, &a.data)?.data;
    let test = load(&a.target_test, &a.data)?.data;
    let refs = match (a.refs, &a.target) {
        (Some(RefsArg::Both), None) => return Err(Failure::Usage("--refs both needs --target".into())),
        (Some(r), _) => refs(r),
        (None, Some(_)) => RefSet::Both,
        (None, None) => RefSet::Source,
    };
    let target = match &a.target {
        Some(p) => load(p, &a.data)?.data,
        None => test.clone(),
    };
    check_dims(&model, &source, &test)?;
    if test.n_labeled() != test.len() {
        return Err(Failure::Run(Error::Core(mlhd_core::Error::InvalidInput(
            "every test sample needs a label".into(),
        ))));
    }
    let predicted = classify_targets(model.scorer(), &source, &target, &test, a.k, refs)?;
    let acc = accuracy(&predicted, test.labels())?;
    out(io::stdout(), &format!("accuracy={acc}\nn_test={}\n", test.len()))
}

fn pools(source: &Path, target: &Path, data: &DataArgs, p: &ProtocolArgs) -> Result<Pools, Failure> {
    let mut x = load(source, data)?.data;
    let mut y = load(target, data)?.data;
    if let Some(d) = p.pca_source {
        x = pca_reduce(&x, d)?.0;
    }
    if let Some(d) = p.pca_target {
        y = pca_reduce(&y, d)?.0;
    }
    Ok(Pools::new(x, y)?)
}

fn experiment_cmd(a: &ExperimentArgs) -> CliResult {
    let pools = pools(&a.source, &a.target, &a.data, &a.protocol)?;
    let protocol = a.protocol.protocol()?;
    let mlhd = a.mlhd.method(0);
    let arc = ArcMethod::default();
    let cca = CcaMethod::default();
    let itml = CcaMethod {
        itml: Some(SolverConfig {
            lambda2: a.mlhd.lambda2,
            max_cycles: a.mlhd.max_cycles,
            tol: a.mlhd.tol,
            ..SolverConfig::default()
        }),
        ..CcaMethod::default()
    };
    let methods: Vec<&dyn Method> = a
        .method
        .iter()
        .map(|m| -> &dyn Method {
            match m {
                MethodArg::Mlhd => &mlhd,
                MethodArg::Arc => &arc,
                MethodArg::CcaNn => &cca,
                MethodArg::CcaItml => &itml,
            }
        })
        .collect();
    let results = run_experiment(&pools, &protocol, &methods)?;
    let mut w = csv::Writer::from_writer(io::stdout());
    let row = |w: &mut csv::Writer<_>, r: &[String]| {
        w.write_record(r)
            .map_err(|e| Failure::Run(Error::Format(e.to_string())))
    };
    row(&mut w, &["method", "mean", "std", "trials", "config"].map(String::from))?;
    for r in &results {
        row(
            &mut w,
            &[
                r.method_name.clone(),
                format!("{:.6}", r.mean),
                format!("{:.6}", r.std),
                r.per_trial_accuracy.len().to_string(),
                r.config_snapshot.clone(),
            ],
        )?;
    }
    w.flush().map_err(|e| Failure::Run(Error::Format(e.to_string())))
}

fn parse_grid(text: Option<&str>, default: &[f64]) -> Result<Vec<f64>, Failure> {
    let Some(text) = text else {
        return Ok(default.to_vec());
    };
    let grid: Vec<f64> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad grid value '{s}'")))
        })
        .collect::<Result<_, _>>()?;
    if grid.is_empty() {
        return Err(Failure::Usage("grid is empty".into()));
    }
    Ok(grid)
}

fn sweep_cmd(a: &SweepArgs) -> CliResult {
    let g1 = parse_grid(a.grid_l1.as_deref(), &DEFAULT_GRID_L1)?;
    let g2 = parse_grid(a.grid_l2.as_deref(), &DEFAULT_GRID_L2)?;
    let pools = pools(&a.source, &a.target, &a.data, &a.protocol)?;
    let protocol = a.protocol.protocol()?;
    let base = a.mlhd.method(0);
    let cells = param_sweep(&pools, &protocol, &g1, &g2, |l1, l2| MlhdMethod {
        solver: SolverConfig {
            lambda1: l1,
            lambda2: l2,
            ..base.solver.clone()
        },
        ..base.clone()
    })?;
    let mut text = String::from("lambda1,lambda2,mean,std\n");
    for c in &cells {
        text.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            c.lambda1, c.lambda2, c.result.mean, c.result.std
        ));
    }
    out(io::stdout(), &text)
}

fn kernel_embedding(k: &KernelModel, dc: usize) -> Result<Matrix, Failure> {
    let eig = eig_sym(&k.l)?;
    let floor = 1e-12 * eig.max_value();
    let positive = eig.values.iter().filter(|&&s| s > floor).count();
    if dc == 0 || dc > positive {
        return Err(Failure::Usage(format!("--dc must be in 1..={positive}")));
    }
    let n = k.l.order();
    Ok(Matrix::from_fn(n, dc, |i, c| {
        eig.vectors.get(i, c) * eig.values[c].sqrt()
    }))
}

fn embed_cmd(a: &EmbedArgs) -> CliResult {
    let (model, _) = load_model(&a.model)?;
    let x = load(&a.source, &a.data)?;
    let y = load(&a.target, &a.data)?;
    check_dims(&model, &x.data, &y.data)?;
    let mut rows: Vec<(&str, Option<Label>, Vec<f64>)> = Vec::new();
    match &model {
        Model::Linear(m) => {
            if a.dc == 0 || a.dc > m.dim_x() + m.dim_y() {
                return Err(Failure::Usage(format!("--dc must be in 1..={}", m.dim_x() + m.dim_y())));
            }
            let (wx, wy) = embed_common_space(m, a.dc)?;
            for (k, s) in x.data.samples().enumerate() {
                rows.push(("source", x.data.label(k), wx.tr_mul_vec(s)?));
            }
            for (k, s) in y.data.samples().enumerate() {
                rows.push(("target", y.data.label(k), wy.tr_mul_vec(s)?));
            }
        }
        Model::Kernelized(km) => {
            let w = kernel_embedding(km, a.dc)?;
            for (k, s) in x.data.samples().enumerate() {
                rows.push(("source", x.data.label(k), w.tr_mul_vec(&km.source_feature(s)?)?));
            }
            for (k, s) in y.data.samples().enumerate() {
                rows.push(("target", y.data.label(k), w.tr_mul_vec(&km.target_feature(s)?)?));
            }
        }
    }
    let mut text = String::from("domain,label");
    for c in 0..a.dc {
        text.push_str(&format!(",c{c}"));
    }
    text.push('\n');
    for (domain, label, coords) in rows {
        text.push_str(domain);
        text.push(',');
        if let Some(l) = label {
            text.push_str(&l.to_string());
        }
        for v in coords {
            text.push_str(&format!(",{v:?}"));
        }
        text.push('\n');
    }
    fs::write(&a.out, text).map_err(|e| {
        Failure::Run(Error::Io {
            path: a.out.clone(),
            source: e,
        })
    })
}

fn pca_cmd(a: &PcaArgs) -> CliResult {
    let loaded = load(&a.input, &a.data)?;
    let (reduced, pca) = pca_reduce(&loaded.data, a.dim)?;
    dio::save_dense_csv(&a.out, &reduced, &dio::stored_labels(&reduced))?;
    let var: Vec<String> = pca.explained_variance.iter().map(|v| v.to_string()).collect();
    out(io::stdout(), &format!("explained_variance={}\n", var.join(",")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Toy(a) => toy(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Embed(a) => embed_cmd(a),
        Command::Pca(a) => pca_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
