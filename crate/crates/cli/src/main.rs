use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use ctprog::config::RunConfig;
use ctprog::featselect::SelectionReport;
use ctprog::io::{
    read_labels, read_manifest, read_mask, read_predictions, read_probmap, write_confusion_csv,
    write_mask, write_metrics_csv, write_predictions, write_seg_csv,
};
use ctprog::segfuse::{fuse_probabilities, majority_vote, threshold};
use ctprog::staging::HierarchicalModel;
use ctprog::synth::{write_cohort, SynthParams};
use ctprog::table::FeatureTable;
use ctprog::volume::MaskRole;
use ctprog::{pipeline, Error};

#[derive(Parser)]
#[command(name = "ctprog", version, about = "CT lung-disease quantification and outcome staging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FuseMode {
    Vote,
    Prob,
}

#[derive(Subcommand)]
enum Command {
    /// Radiomics features for every manifest row.
    ExtractFeatures {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Consensus lasso selection over stratified splits.
    SelectFeatures {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Screen classifiers and train the staging ensemble.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-method train/validation summary.
        #[arg(long)]
        screen_report: Option<PathBuf>,
    },
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics per task against labeled ground truth.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// Any CSV with patient_id and outcome columns.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Fuse binary masks by vote or probability maps by averaging.
    FuseMasks {
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        mode: FuseMode,
        #[arg(long)]
        out: PathBuf,
        /// Probability cut for `prob` mode.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Dice, Hausdorff and extent for prediction vs two readers.
    EvaluateSeg {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        ref_a: PathBuf,
        #[arg(long)]
        ref_b: PathBuf,
        /// Lung mask (or both lungs) used as extent denominator.
        #[arg(long)]
        lungs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    SynthCohort {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> ctprog::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn read_table(path: &Path) -> anyhow::Result<FeatureTable> {
    let f = File::open(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
    Ok(FeatureTable::read_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))?;
    let v = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(v)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::ExtractFeatures { manifest, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let m = read_manifest(&manifest)?;
            let (table, failures) = pipeline::extract_features(&m.rows, &cfg)?;
            if !failures.is_empty() {
                for f in &failures {
                    eprintln!("row {}: {}", f.patient_id, f.error);
                }
                let msg = format!("{} of {} rows failed; nothing written", failures.len(), m.rows.len());
                // Exit 2 only when every failure is an input problem.
                match failures.into_iter().find(|f| !f.error.is_input_contract()) {
                    Some(internal) => return Err(anyhow::Error::new(internal.error).context(msg)),
                    None => return Err(Error::Schema(msg).into()),
                }
            }
            let mut w = create(&out)?;
            table.write_csv(&mut w)?;
            w.flush()?;
            log::info!("{} rows, {} features", table.len(), table.names.len());
        }
        Command::SelectFeatures { features, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let table = read_table(&features)?;
            let report = pipeline::select_features(&table, &cfg)?;
            log::info!("selected {} features", report.selected.len());
            write_json(&out, &report)?;
        }
        Command::Train {
            features,
            selection,
            out,
            config,
            screen_report,
        } => {
            let cfg = load_config(config.as_deref())?;
            let table = read_table(&features)?;
            let sel: SelectionReport = read_json(&selection)?;
            let trained = pipeline::train(&table, &sel, &cfg)?;
            if let Some(path) = screen_report {
                let mut w = create(&path)?;
                ctprog::classifiers::write_screen_csv(&trained.screen, &mut w)?;
                w.flush()?;
            }
            let mut w = create(&out)?;
            w.write_all(trained.model.to_json()?.as_bytes())?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Command::Predict { model, features, out } => {
            let text = std::fs::read_to_string(&model)
                .map_err(Error::from)
                .with_context(|| format!("reading {}", model.display()))?;
            let model = HierarchicalModel::from_json(&text)?;
            let table = read_table(&features)?;
            let rows = pipeline::predict(&model, &table)?;
            let mut w = create(&out)?;
            write_predictions(&rows, &mut w)?;
            w.flush()?;
        }
        Command::Evaluate {
            predictions,
            truth,
            out,
            confusion,
        } => {
            let open = |p: &Path| {
                File::open(p)
                    .map(BufReader::new)
                    .map_err(Error::from)
                    .with_context(|| format!("reading {}", p.display()))
            };
            let preds = read_predictions(open(&predictions)?)?;
            let labels = read_labels(open(&truth)?)?;
            let reports = pipeline::evaluate(&preds, &labels)?;
            let mut w = create(&out)?;
            write_metrics_csv(&reports, &mut w)?;
            w.flush()?;
            if let Some(path) = confusion {
                let cms: Vec<_> = reports.iter().map(|(t, m)| (t.clone(), m.confusion.clone())).collect();
                let mut w = create(&path)?;
                write_confusion_csv(&cms, &mut w)?;
                w.flush()?;
            }
        }
        Command::FuseMasks {
            inputs,
            mode,
            out,
            threshold: t,
        } => {
            let fused = match mode {
                FuseMode::Vote => {
                    let masks = inputs
                        .iter()
                        .map(|p| read_mask(p, MaskRole::Disease))
                        .collect::<ctprog::Result<Vec<_>>>()?;
                    majority_vote(&masks)?
                }
                FuseMode::Prob => {
                    let maps = inputs.iter().map(|p| read_probmap(p)).collect::<ctprog::Result<Vec<_>>>()?;
                    let weights = vec![1.0; maps.len()];
                    threshold(&fuse_probabilities(&maps, &weights)?, t)?
                }
            };
            write_mask(&out, &fused)?;
        }
        Command::EvaluateSeg {
            pred,
            ref_a,
            ref_b,
            lungs,
            out,
        } => {
            let rows = pipeline::evaluate_segmentation(
                &read_mask(&pred, MaskRole::Disease)?,
                &read_mask(&ref_a, MaskRole::Disease)?,
                &read_mask(&ref_b, MaskRole::Disease)?,
                &read_mask(&lungs, MaskRole::Other)?,
            )?;
            let mut w = create(&out)?;
            write_seg_csv(&rows, &mut w)?;
            w.flush()?;
        }
        Command::SynthCohort { n, seed, out_dir } => {
            let cohort = write_cohort(&out_dir, n, seed, &SynthParams::default())?;
            log::info!("wrote {} patients to {}", cohort.patients.len(), out_dir.display());
        }
    }
    Ok(())
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("CTPROG_THREADS") else {
        return Ok(());
    };
    let n: usize = match v.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => bail!("CTPROG_THREADS must be a positive integer, got '{v}'"),
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let contract = err.chain().any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_input_contract));
    if contract {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
