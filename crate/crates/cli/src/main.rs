use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use geomae::data::{missing_summary, write_dataset, StationMissing};
use geomae::harness::{
    ablate, evaluate_grid, load_data, ordering_checks, prepare, render, summarize, Checkpoint, DataSource,
    TrainConfig, Trainer, Variant, SYNTH_DATA_SEED,
};
use geomae::masking::{generate, missing_fraction, write_masks, BlockLengths, Pattern};
use geomae::metrics::{read_rows, write_rows, ResultRow};
use geomae::rng::rng_from;
use log::info;

/// stdout that tolerates a closed pipe (`geomae stats | head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Missing-robust spatio-temporal forecasting: data, training, evaluation and ablations.
#[derive(Parser)]
#[command(name = "geomae", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// key=value run configuration; desk defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// extra config setting, repeatable: --set train.epochs=3
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic dataset as CSV plus schema
    Synth,
    /// Generate a batch of missing masks and export them in the binary mask format
    Masks {
        #[arg(long, default_value = "point")]
        pattern: String,
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
        #[arg(long, default_value_t = 16)]
        count: usize,
        /// mask shape as nodes,steps,features
        #[arg(long, default_value = "8,12,3")]
        shape: String,
    },
    /// Train a model, writing checkpoints and history into the output directory
    Train {
        /// continue from latest.ckpt in the output directory
        #[arg(long)]
        resume: bool,
    },
    /// Score a checkpoint on the test split over the configured grid
    Eval {
        /// defaults to best.ckpt in the output directory
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate ablation variants over several seeds
    Ablate {
        /// comma-separated subset of full,fm,nm,01
        #[arg(long, default_value = "full,fm,nm,01")]
        variants: String,
        #[arg(long, default_value = "0,1,2,3,4")]
        seeds: String,
    },
    /// Aggregate result rows into markdown tables and SVG charts
    Report {
        /// result files; defaults to results.csv and ablation.csv in the output directory
        inputs: Vec<PathBuf>,
    },
    /// Per-station missing-rate summary of the configured dataset
    Stats,
}

fn load_config(g: &Global) -> Result<TrainConfig> {
    let mut cfg = match &g.config {
        Some(p) => TrainConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => TrainConfig::desk(),
    };
    for kv in &g.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {:?}", kv))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| anyhow::anyhow!("bad {} {:?}", what, x)))
        .collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    say!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    let out = &g.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    match cli.command {
        Command::Synth => {
            if !matches!(cfg.data, DataSource::Synthetic { .. }) {
                bail!("synth needs data.source=synthetic");
            }
            let ds = load_data(&cfg)?;
            write_dataset(&out.join("data.csv"), &ds)?;
            ds.schema.save(&out.join("schema.txt"))?;
            say!(
                "wrote {} stations x {} steps (data seed {}) to {}",
                ds.n_nodes(),
                ds.n_steps(),
                SYNTH_DATA_SEED,
                out.display()
            );
        }
        Command::Masks { pattern, rate, count, shape } => {
            let p = Pattern::parse(&pattern).with_context(|| format!("unknown pattern {:?}", pattern))?;
            let shape: Vec<usize> = parse_list(&shape, "shape entry")?;
            let masks = (0..count as u64)
                .map(|i| generate(p, &shape, rate, BlockLengths::default(), &mut rng_from(&[cfg.seed, i])))
                .collect::<geomae::Result<Vec<_>>>()?;
            let path = out.join(format!("masks_{}_{}.gmsk", p.as_str(), rate));
            write_masks(&path, &masks)?;
            let mean = masks.iter().map(missing_fraction).sum::<f64>() / count.max(1) as f64;
            say!("wrote {} masks to {}; mean missing fraction {:.4}", count, path.display(), mean);
        }
        Command::Train { resume } => {
            let (cfg, ckpt) = if resume {
                let path = out.join("latest.ckpt");
                let ckpt = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
                let explicit = g.config.is_some() || g.seed.is_some() || !g.set.is_empty();
                if explicit && ckpt.config.hash() != cfg.hash() {
                    bail!("{} was written with a different config", path.display());
                }
                (ckpt.config.clone(), Some(ckpt))
            } else {
                (cfg, None)
            };
            let ds = load_data(&cfg)?;
            let splits = prepare(&cfg, &ds)?;
            let mut trainer = match &ckpt {
                Some(c) => Trainer::from_checkpoint(c, &splits)?,
                None => Trainer::new(&cfg, &splits)?,
            };
            write(&out.join("config.cfg"), &cfg.to_text())?;
            info!("training from epoch {}", trainer.epoch());
            trainer.run(Some(out))?;
            let h = trainer.history();
            match (h.best_epoch, h.epochs.iter().find(|e| Some(e.epoch) == h.best_epoch)) {
                (Some(b), Some(rec)) => say!("best epoch {} with validation MAE {:.4}", b, rec.val.mae),
                _ => say!("no epoch improved on the initial validation score"),
            }
        }
        Command::Eval { checkpoint } => {
            let path = checkpoint.unwrap_or_else(|| out.join("best.ckpt"));
            let ckpt = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
            let mut ecfg = ckpt.config.clone();
            ecfg.eval = cfg.eval.clone();
            ecfg.seed = g.seed.unwrap_or(ecfg.seed);
            let ds = load_data(&ecfg)?;
            let splits = prepare(&ecfg, &ds)?;
            if splits.stats != ckpt.stats {
                bail!("dataset statistics differ from the checkpoint's");
            }
            let model = ckpt.best_model()?;
            let rows = evaluate_grid(&model, &splits.stats, &splits.test, &ecfg, "full")?;
            write(&out.join("results.csv"), &write_rows(&rows))?;
            for s in summarize(&rows).iter().filter(|s| s.metric == "mae") {
                say!("{} {:>4}%: mae {:.4} ± {:.4}", s.pattern, s.rate * 100.0, s.mean, s.std);
            }
        }
        Command::Ablate { variants, seeds } => {
            let vs = variants
                .split(',')
                .map(|v| Variant::parse(v.trim()).with_context(|| format!("unknown variant {:?}", v)))
                .collect::<Result<Vec<_>>>()?;
            let seeds: Vec<u64> = parse_list(&seeds, "seed")?;
            let ds = load_data(&cfg)?;
            let splits = prepare(&cfg, &ds)?;
            let rows = ablate(&cfg, &splits, &vs, &seeds, Some(&out.join("runs")))?;
            write(&out.join("ablation.csv"), &write_rows(&rows))?;
            let mut text = String::new();
            for c in ordering_checks(&rows) {
                text.push_str(&format!("{} {}\n", if c.holds { "PASS" } else { "FAIL" }, c.description));
            }
            let _ = write!(std::io::stdout(), "{}", text);
            write(&out.join("ordering.txt"), &text)?;
        }
        Command::Report { inputs } => {
            let inputs = if inputs.is_empty() {
                ["results.csv", "ablation.csv"].iter().map(|f| out.join(f)).filter(|p| p.exists()).collect()
            } else {
                inputs
            };
            if inputs.is_empty() {
                bail!("no result files given and none found in {}", out.display());
            }
            let mut rows: Vec<ResultRow> = Vec::new();
            for p in &inputs {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                rows.extend(read_rows(&text)?);
            }
            let (md, charts) = render(&rows);
            write(&out.join("report.md"), &md)?;
            for (stem, svg) in charts {
                write(&out.join(format!("{}.svg", stem)), &svg)?;
            }
        }
        Command::Stats => {
            let ds = load_data(&cfg)?;
            let rows = missing_summary(&ds);
            let table = StationMissing::table(&rows, &ds.schema.features);
            let _ = write!(std::io::stdout(), "{}", table);
            write(&out.join("stats.csv"), &table)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
    }
}
