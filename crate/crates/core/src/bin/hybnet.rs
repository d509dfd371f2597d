//! Command-line front end: dataset generation, training, BER sweeps, timing
//! and the HybNet envelope check.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 failed
//! envelope check.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybnet::bench::{self, DetectorKind, ModelSet, SweepConfig};
use hybnet::dataset::{self, CorpusPaths, Dataset, DatasetSpec};
use hybnet::models::{Architecture, TrainedModel};
use hybnet::phy::LoraParams;
use hybnet::{Error, Result};

#[derive(Parser)]
#[command(name = "hybnet", version, about = "LoRa detector laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training and validation corpora from a key=value manifest.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        /// Training split path; the validation split goes to `<out>.val`
        /// and a copy of the manifest to `<out>.manifest`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one network on a generated corpus.
    Train {
        #[arg(long)]
        net: Architecture,
        /// Training split; `<data>.val` is used for validation when present.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte-Carlo BER sweep over INR at fixed SINR; writes CSV.
    Evaluate {
        /// Comma-separated: coherent, noncoherent, iq_cnn, stft_cnn, fft_cnn, hybnet.
        #[arg(long, value_delimiter = ',', required = true)]
        detectors: Vec<DetectorKind>,
        #[arg(long, default_value_t = -15.0, allow_negative_numbers = true)]
        sinr_db: f64,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        inr_from: f64,
        #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
        inr_to: f64,
        #[arg(long, default_value_t = 2.5)]
        inr_step: f64,
        #[arg(long, default_value_t = 7)]
        interferer_sf: u8,
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        iq_model: Option<PathBuf>,
        #[arg(long)]
        stft_model: Option<PathBuf>,
        #[arg(long)]
        fft_model: Option<PathBuf>,
        #[arg(long)]
        intdet_model: Option<PathBuf>,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detection-time benchmark; writes CSV and prints a linear fit per network.
    Bench {
        /// Comma-separated: iq, stft, fft, intdet.
        #[arg(long, value_delimiter = ',', default_value = "iq,stft,fft")]
        models: Vec<Architecture>,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
        symbols: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory holding `<net>.ckpt` files; random weights otherwise.
        #[arg(long)]
        model_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that HybNet tracks the better of its two branches.
    EnvelopeCheck {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        margin: f64,
        /// Fraction of grid points that must pass.
        #[arg(long, default_value_t = 1.0)]
        min_pass: f64,
    },
}

enum Failure {
    Data(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_model(path: &Option<PathBuf>, arch: Architecture, set: &mut ModelSet) -> Result<()> {
    if let Some(p) = path {
        let m = TrainedModel::load(p)?;
        if m.modality != arch.modality() {
            return Err(Error::Domain(format!("{} holds a {} model, expected {arch}", p.display(), m.modality)));
        }
        set.insert(arch, m);
    }
    Ok(())
}

fn run(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Generate { spec, out } => {
            let spec = DatasetSpec::from_manifest(&fs::read_to_string(&spec)?)?;
            let paths = dataset::generate_to(&spec, &out)?;
            eprintln!(
                "wrote {} ({} records), {} ({} records), {}",
                paths.train.display(),
                spec.num_train,
                paths.val.display(),
                spec.num_val,
                paths.manifest.display()
            );
        }
        Command::Train {
            net,
            data,
            out,
            epochs,
            lr,
            batch,
            seed,
        } => {
            let train = Dataset::load(&data)?;
            if train.modality != net.modality() {
                return Err(Error::Domain(format!("{net} needs {} features, corpus has {}", net.modality(), train.modality)).into());
            }
            let val_path = CorpusPaths::new(&data).val;
            let val = if val_path.exists() { Some(Dataset::load(&val_path)?.to_labeled_set()?) } else { None };
            let mut cfg = net.training_config();
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.lr_initial = lr.unwrap_or(cfg.lr_initial);
            cfg.minibatch = batch.unwrap_or(cfg.minibatch);
            cfg.rng_seed = seed.unwrap_or(cfg.rng_seed);
            let (model, outcome) = net.train(&train.to_labeled_set()?, val.as_ref(), &cfg)?;
            model.save(&out)?;
            if let Some(last) = outcome.history.last() {
                eprintln!(
                    "{net}: {} epochs, final loss {:.4}, train accuracy {:.4}{}",
                    last.epoch,
                    last.mean_loss,
                    last.train_accuracy,
                    last.val_accuracy.map(|a| format!(", validation accuracy {a:.4}")).unwrap_or_default()
                );
            }
        }
        Command::Evaluate {
            detectors,
            sinr_db,
            inr_from,
            inr_to,
            inr_step,
            interferer_sf,
            trials,
            seed,
            iq_model,
            stft_model,
            fft_model,
            intdet_model,
            out,
        } => {
            let mut models = ModelSet::default();
            load_model(&iq_model, Architecture::IqCnn, &mut models)?;
            load_model(&stft_model, Architecture::StftCnn, &mut models)?;
            load_model(&fft_model, Architecture::FftCnn, &mut models)?;
            load_model(&intdet_model, Architecture::InterferenceDetector, &mut models)?;
            let cfg = SweepConfig {
                inr_grid_db: bench::inr_grid(inr_from, inr_to, inr_step)?,
                sinr_db,
                interferer_sf,
                trials_per_point: trials,
                seed,
            };
            let points = bench::ber_sweep(&detectors, &models, &cfg, &LoraParams::sf7())?;
            let mut w = output(out.as_deref())?;
            bench::write_ber_csv(&mut w, &points)?;
            w.flush()?;
        }
        Command::Bench {
            models,
            symbols,
            repeats,
            seed,
            model_dir,
            out,
        } => {
            let mut loaded = Vec::new();
            for arch in models {
                let model = match &model_dir {
                    Some(dir) => TrainedModel::load(dir.join(format!("{arch}.ckpt")))?,
                    None => bench::timing_model(arch, seed)?,
                };
                loaded.push((arch, model));
            }
            let points = bench::timing_bench(&loaded, &symbols, repeats, seed)?;
            for (arch, _) in &loaded {
                let xy: Vec<(f64, f64)> = points
                    .iter()
                    .filter(|p| p.network == *arch)
                    .map(|p| (p.num_symbols as f64, p.wall_time_s))
                    .collect();
                if let Ok(fit) = bench::linear_fit(&xy) {
                    eprintln!(
                        "{arch}: {:.3e} s/symbol, intercept {:.3e} s, R² {:.5}",
                        fit.slope, fit.intercept, fit.r_squared
                    );
                }
            }
            let mut w = output(out.as_deref())?;
            bench::write_timing_csv(&mut w, &points)?;
            w.flush()?;
        }
        Command::EnvelopeCheck { input, margin, min_pass } => {
            let points = bench::read_ber_csv(File::open(&input)?)?;
            let report = bench::hybnet_envelope_check(&points, margin)?;
            let mut out = io::stdout().lock();
            writeln!(out, "inr_db,sinr_db,interferer_sf,coherent,fft_cnn,hybnet,bound,pass")?;
            for r in &report.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.inr_db,
                    r.sinr_db,
                    r.interferer_sf,
                    r.coherent,
                    r.fft_cnn,
                    r.hybnet,
                    r.bound,
                    if r.pass { "pass" } else { "FAIL" }
                )?;
            }
            writeln!(out, "# {}/{} points within margin {margin}", report.passed(), report.rows.len())?;
            if report.pass_fraction() < min_pass {
                return Err(Failure::Check(format!(
                    "envelope check passed on {:.1}% of points, {:.1}% required",
                    100.0 * report.pass_fraction(),
                    100.0 * min_pass
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(3)
        }
    }
}
