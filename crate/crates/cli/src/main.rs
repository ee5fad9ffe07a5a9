//! `ltmix`: synthesize long-tailed data, train and evaluate models, sweep
//! hyperparameters, export decision boundaries and rerun the half-moons study.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ltmix::datasets::{assign_groups, load_dataset, save_dataset, write_csv, DataFormat, Dataset, SyntheticKind};
use ltmix::eval::{evaluate, export_boundary};
use ltmix::model::{load_checkpoint, save_checkpoint, Branch};
use ltmix::sampling::Gamma;
use ltmix::studies::{mean_minority_recall, write_moons_summary, GaussianStudy, MoonsStudy, MOONS_METHODS};
use ltmix::train::{sweep, train_run, write_sweep_csv, SweepGrid, TrainConfig};

#[derive(Parser)]
#[command(name = "ltmix", version, about = "Long-tailed classification with dual-branch bilateral mixup")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic long-tailed training set and its balanced test set.
    Synth(SynthArgs),
    /// Train one model and write its checkpoint and run record.
    Train(TrainArgs),
    /// Evaluate a checkpoint overall, per class and per group.
    Eval(EvalArgs),
    /// Train one model per cell of a hyperparameter grid.
    Sweep(SweepArgs),
    /// Write fused predictions over a grid covering a 2-D dataset.
    ExportBoundary(BoundaryArgs),
    /// Train ERM, classic mixup and bilateral mixup on imbalanced half-moons.
    ReproduceFig1(Fig1Args),
}

#[derive(Args)]
struct SynthArgs {
    /// `moons` or `gaussian`.
    #[arg(long, default_value = "gaussian")]
    dataset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest class size (majority moon size for `moons`).
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    imbalance_ratio: Option<f64>,
    /// Number of classes (`gaussian` only).
    #[arg(long)]
    classes: Option<usize>,
    /// Feature dimension (`gaussian` only).
    #[arg(long)]
    dim: Option<usize>,
    /// Gaussian noise on the moons.
    #[arg(long)]
    noise: Option<f64>,
    /// Per-class size of the balanced test set.
    #[arg(long)]
    test_per_class: Option<usize>,
    /// `csv` or `bin` for both outputs; otherwise each follows its extension.
    #[arg(long)]
    format: Option<String>,
    /// Training set path.
    #[arg(long)]
    out: PathBuf,
    /// Balanced test set path.
    #[arg(long)]
    test_out: Option<PathBuf>,
}

/// Training options. Unset flags fall back to `--config`, then to defaults.
#[derive(Args, Clone)]
struct TrainFlags {
    /// Training data: a CSV / packed file, or `moons` / `gaussian`.
    #[arg(long, default_value = "gaussian")]
    dataset: String,
    /// Balanced test data file (required when `--dataset` is a file).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// erm, mixup, sbn-mix, dbn or dbn-mix.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    momentum: Option<String>,
    #[arg(long)]
    weight_decay: Option<String>,
    /// Comma-separated epochs at which the learning rate decays.
    #[arg(long)]
    decay_epochs: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Sampler exponent; `inf` for class-balanced sampling.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    bilateral_mixup: Option<String>,
    #[arg(long)]
    temperature_scaling: Option<String>,
    /// Comma-separated backbone widths.
    #[arg(long)]
    hidden: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    flags: TrainFlags,
    /// Output directory.
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Test data: a file, or `moons` / `gaussian` with `--seed`.
    #[arg(long)]
    dataset: String,
    /// Training data defining the class groups; defaults to the counts stored in the checkpoint.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// fused, conventional or rebalancing.
    #[arg(long, default_value = "fused")]
    mode: String,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: TrainFlags,
    /// Comma-separated values per axis; empty axes keep the base value.
    #[arg(long)]
    eta_grid: Option<String>,
    #[arg(long)]
    epsilon_grid: Option<String>,
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long)]
    gamma_grid: Option<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// 2-D data whose bounding box the grid covers: a file, or `moons` with `--seed`.
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    #[arg(long, default_value = "boundary.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct Fig1Args {
    #[arg(long, default_value = "fig1")]
    out: PathBuf,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0,1,2,3,4,5,6,7,8,9")]
    seeds: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    resolution: Option<usize>,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<T>().map_err(|e| anyhow::anyhow!("{what}: `{p}`: {e}")))
        .collect()
}

fn load_file(path: &Path, num_classes: Option<usize>) -> Result<Dataset> {
    load_dataset(path, DataFormat::from_path(path), num_classes).with_context(|| format!("loading {}", path.display()))
}

/// Training and test sets from a built-in generator name or from files.
fn resolve_data(dataset: &str, test: Option<&Path>, seed: u64) -> Result<(Dataset, Dataset)> {
    if let Ok(kind) = dataset.parse::<SyntheticKind>() {
        if test.is_some() {
            bail!("--test applies only to file datasets");
        }
        return Ok(match kind {
            SyntheticKind::Moons => MoonsStudy::default().data(seed)?,
            SyntheticKind::Gaussian => GaussianStudy::default().data(seed)?,
        });
    }
    let Some(test) = test else {
        bail!("--test is required when --dataset is a file");
    };
    let train = load_file(Path::new(dataset), None)?;
    let test = load_file(test, Some(train.num_classes()))?;
    Ok((train, test))
}

fn build_config(flags: &TrainFlags) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(path) = &flags.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    let overrides = [
        ("method", &flags.method),
        ("epochs", &flags.epochs),
        ("batch_size", &flags.batch_size),
        ("lr", &flags.lr),
        ("momentum", &flags.momentum),
        ("weight_decay", &flags.weight_decay),
        ("decay_epochs", &flags.decay_epochs),
        ("alpha", &flags.alpha),
        ("gamma", &flags.gamma),
        ("eta", &flags.eta),
        ("epsilon", &flags.epsilon),
        ("seed", &flags.seed),
        ("bilateral_mixup", &flags.bilateral_mixup),
        ("temperature_scaling", &flags.temperature_scaling),
        ("hidden", &flags.hidden),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
        }
    }
    config.validate()?;
    Ok(config)
}

fn synth(args: SynthArgs) -> Result<()> {
    let kind: SyntheticKind = args.dataset.parse()?;
    let forced: Option<DataFormat> = args.format.as_deref().map(str::parse).transpose()?;
    let format_of = |path: &Path| forced.unwrap_or_else(|| DataFormat::from_path(path));
    let (train, test) = match kind {
        SyntheticKind::Moons => {
            let mut s = MoonsStudy::default();
            s.n_majority = args.n_max.unwrap_or(s.n_majority);
            s.imbalance_ratio = args.imbalance_ratio.unwrap_or(s.imbalance_ratio);
            s.noise_sd = args.noise.unwrap_or(s.noise_sd);
            s.test_per_class = args.test_per_class.unwrap_or(s.test_per_class);
            s.data(args.seed)?
        }
        SyntheticKind::Gaussian => {
            let mut s = GaussianStudy::default();
            s.n_max = args.n_max.unwrap_or(s.n_max);
            s.imbalance_ratio = args.imbalance_ratio.unwrap_or(s.imbalance_ratio);
            s.num_classes = args.classes.unwrap_or(s.num_classes);
            s.dim = args.dim.unwrap_or(s.dim);
            s.test_per_class = args.test_per_class.unwrap_or(s.test_per_class);
            s.data(args.seed)?
        }
    };
    save_dataset(&train, &args.out, format_of(&args.out))?;
    if let Some(path) = &args.test_out {
        save_dataset(&test, path, format_of(path))?;
    }
    println!(
        "wrote {} samples, class counts {:?}",
        train.len(),
        train.class_counts()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let config = build_config(&args.flags)?;
    let (train, test) = resolve_data(&args.flags.dataset, args.flags.test.as_deref(), config.seed)?;
    let out = train_run(&config, &train, &test)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    save_checkpoint(&args.out.join("checkpoint.dbnm"), &out.model, &out.record.config_echo)?;
    write_with(&args.out.join("record.csv"), |w| out.record.write_csv(w))?;
    write_with(&args.out.join("record.json"), |w| writeln!(w, "{}", out.record.to_json()))?;
    write_with(&args.out.join("accuracy.csv"), |w| out.record.final_accuracy.write_csv(w))?;
    let acc = &out.record.final_accuracy;
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
    println!(
        "{} seed {}: balanced accuracy {:.4} (many {}, medium {}, few {}) in {:.1}s",
        config.method,
        config.seed,
        out.record.balanced_accuracy(),
        fmt(acc.many),
        fmt(acc.medium),
        fmt(acc.few),
        out.record.wall_clock_secs
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let model = checkpoint.model;
    let k = model.config().num_classes;
    let mode: Branch = args.mode.parse()?;
    let (train_counts, test) = match args.dataset.parse::<SyntheticKind>() {
        Ok(_) => {
            let (train, test) = resolve_data(&args.dataset, None, args.seed)?;
            (Some(train.class_counts().to_vec()), test)
        }
        Err(_) => (None, load_file(Path::new(&args.dataset), Some(k))?),
    };
    let counts = match (&args.train, train_counts) {
        (Some(path), _) => load_file(path, Some(k))?.class_counts().to_vec(),
        (None, Some(c)) => c,
        (None, None) => match model.schedule().filter(|s| !s.class_counts.is_empty()) {
            Some(s) => s.class_counts.clone(),
            None => bail!("checkpoint stores no class counts; pass --train"),
        },
    };
    let acc = evaluate(&model, &test, &assign_groups(&counts), mode)?;
    match &args.out {
        Some(path) => write_with(path, |w| acc.write_csv(w))?,
        None => acc.write_csv(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let base = build_config(&args.flags)?;
    let grid = SweepGrid {
        eta: args.eta_grid.as_deref().map(|s| parse_list("--eta-grid", s)).transpose()?.unwrap_or_default(),
        epsilon: args
            .epsilon_grid
            .as_deref()
            .map(|s| parse_list("--epsilon-grid", s))
            .transpose()?
            .unwrap_or_default(),
        alpha: args.alpha_grid.as_deref().map(|s| parse_list("--alpha-grid", s)).transpose()?.unwrap_or_default(),
        gamma: args
            .gamma_grid
            .as_deref()
            .map(|s| parse_list::<Gamma>("--gamma-grid", s))
            .transpose()?
            .unwrap_or_default(),
    };
    let (train, test) = resolve_data(&args.flags.dataset, args.flags.test.as_deref(), base.seed)?;
    let rows = sweep(&grid, &base, &train, &test, args.jobs)?;
    write_with(&args.out, |w| write_sweep_csv(&rows, w))?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    println!("{} cells, {failed} failed; wrote {}", rows.len(), args.out.display());
    Ok(())
}

fn boundary(args: BoundaryArgs) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)?.model;
    let data = match args.dataset.parse::<SyntheticKind>() {
        Ok(_) => resolve_data(&args.dataset, None, args.seed)?.0,
        Err(_) => load_file(Path::new(&args.dataset), Some(model.config().num_classes))?,
    };
    let grid = export_boundary(&model, &data, args.resolution, args.margin)?;
    write_with(&args.out, |w| grid.write_csv(w))
}

fn fig1(args: Fig1Args) -> Result<()> {
    let seeds: Vec<u64> = parse_list("--seeds", &args.seeds)?;
    if seeds.is_empty() {
        bail!("--seeds lists no seeds");
    }
    let mut study = MoonsStudy::default();
    study.epochs = args.epochs.unwrap_or(study.epochs);
    study.resolution = args.resolution.unwrap_or(study.resolution);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut all = Vec::new();
    for &seed in &seeds {
        let (train, outcomes) = study.run_seed(seed)?;
        write_with(&args.out.join(format!("points_seed{seed}.csv")), |w| write_csv(&train, w))?;
        for o in &outcomes {
            let path = args.out.join(format!("boundary_{}_seed{seed}.csv", o.method));
            write_with(&path, |w| o.grid.write_csv(w))?;
        }
        all.extend(outcomes);
    }
    write_with(&args.out.join("summary.csv"), |w| write_moons_summary(&all, w))?;
    for (name, _) in MOONS_METHODS {
        println!("{name}: mean minority recall {:.3}", mean_minority_recall(&all, name));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => run_sweep(a),
        Command::ExportBoundary(a) => boundary(a),
        Command::ReproduceFig1(a) => fig1(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
