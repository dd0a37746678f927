use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hif_core::config::RunConfig;
use hif_core::current_inverse::{build_geometry_matrix, reconstruct, rms_error_report};
use hif_core::fault_detector::{
    detect_record, evaluate, generate_dataset, train, ClassifierModel, Detection, StreamDetector,
};
use hif_core::fault_models::render_fault_current;
use hif_core::feeder_sim::simulate;
use hif_core::io::{
    read_corpus, read_stream, read_waveform, write_atomic, write_corpus, write_detections, write_error_report,
    write_features, write_waveform, StreamEvent, WaveformFormat,
};
use hif_core::line_network::{build_feeder, LineParameters};
use hif_core::mag_sensing::{field_record, sensor_to_field, transduce};
use hif_core::{ChannelRole, WaveformRecord};

/// Feeder fault simulation, magnetic current reconstruction and HIF detection.
#[derive(Parser)]
#[command(name = "hifsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (stdout for text outputs when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Feeder length in metres
    #[arg(long)]
    length_m: Option<f64>,
    /// Sample rate in Hz [default: 27700]
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Waveform output format: binary or csv [default: from the extension]
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Series impedance and shunt capacitance of the configured line
    Lineparams(Common),
    /// Time-domain feeder simulation to a waveform file
    Simulate(Common),
    /// Fault-branch current alone, driven by the ideal source voltage
    RenderFault(Common),
    /// Magnetic field (or sensor output with --sensor) from conductor currents
    Field {
        #[command(flatten)]
        common: Common,
        /// Conductor-current waveform file
        #[arg(long)]
        input: PathBuf,
        /// Apply the sensor model, noise included
        #[arg(long)]
        sensor: bool,
    },
    /// Conductor currents from sensor or field channels
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Sensor or field waveform file
        #[arg(long)]
        input: PathBuf,
        /// Reference currents; writes a per-channel error report
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Error report CSV path (stdout when omitted)
        #[arg(long, requires = "truth")]
        report: Option<PathBuf>,
    },
    /// Per-window feature table
    Features {
        #[command(flatten)]
        common: Common,
        /// Waveform file to window
        #[arg(long)]
        input: PathBuf,
    },
    /// Labelled feature corpus over the scenario grid
    Dataset(Common),
    /// Trains a classifier on a corpus
    Train {
        #[command(flatten)]
        common: Common,
        /// Labelled feature corpus CSV
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Classifies windows of a waveform file or a GMRW stream on stdin
    Detect {
        #[command(flatten)]
        common: Common,
        /// Trained model file
        #[arg(long)]
        model: PathBuf,
        /// Waveform file (GMRW stream on stdin when omitted)
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Confusion matrix and metrics of a model on a corpus
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Trained model file
        #[arg(long)]
        model: PathBuf,
        /// Labelled feature corpus CSV
        #[arg(long)]
        corpus: PathBuf,
    },
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = self.length_m {
            cfg.simulation.length_m = l;
        }
        if let Some(r) = self.sample_rate {
            cfg.simulation.sample_rate = r;
            cfg.grid.sample_rate = r;
        }
        Ok(cfg)
    }

    fn require_out(&self) -> Result<&Path> {
        self.out.as_deref().context("--out is required for this subcommand")
    }

    fn waveform_format(&self, path: &Path) -> Result<WaveformFormat> {
        match &self.format {
            Some(f) => Ok(f.parse()?),
            None => Ok(WaveformFormat::from_path(path)),
        }
    }

    fn write_record(&self, record: &WaveformRecord) -> Result<()> {
        let out = self.require_out()?;
        write_waveform(record, out, self.waveform_format(out)?).with_context(|| format!("writing {}", out.display()))
    }

    /// Text output to --out (atomically) or stdout.
    fn emit(&self, body: impl FnOnce(&mut dyn Write) -> hif_core::Result<()>) -> Result<()> {
        match &self.out {
            Some(p) => write_atomic(p, body)?,
            None => {
                let mut lock = io::stdout().lock();
                body(&mut lock)?;
                lock.flush()?;
            }
        }
        Ok(())
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Lineparams(c) => {
            let cfg = c.config()?;
            let p = &cfg.pipeline;
            let params = LineParameters::from_geometry(&p.geometry, p.source.frequency, p.earth_resistivity)?;
            let feeder = build_feeder(&params, cfg.simulation.length_m, cfg.simulation.step_m)?;
            let z: Vec<Vec<[f64; 2]>> = (0..4)
                .map(|i| (0..4).map(|j| [params.impedance[(i, j)].re, params.impedance[(i, j)].im]).collect())
                .collect();
            let cap: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| params.capacitance[(i, j)]).collect()).collect();
            let doc = serde_json::json!({
                "frequency_hz": params.frequency,
                "earth_resistivity_ohm_m": params.earth_resistivity,
                "conductors": ["A", "B", "C", "N"],
                "impedance_ohm_per_km": z,
                "capacitance_nf_per_km": cap,
                "feeder_length_m": feeder.total_length,
                "sections": feeder.sections.len(),
            });
            c.emit(|w| Ok(writeln!(w, "{}", serde_json::to_string_pretty(&doc).expect("json"))?))
        }
        Command::Simulate(c) => {
            let cfg = c.config()?;
            let sim = cfg.simulation.to_sim_config(&cfg.pipeline)?;
            let record = simulate(&sim, cfg.seed)?;
            c.write_record(&record)
        }
        Command::RenderFault(c) => {
            let cfg = c.config()?;
            let spec = cfg.simulation.fault.as_ref().context("config has no simulation.fault to render")?;
            let s = &cfg.simulation;
            let record = render_fault_current(spec, &cfg.pipeline.source, s.duration_s, s.sample_rate, cfg.seed)?;
            c.write_record(&record)
        }
        Command::Field { common, input, sensor } => {
            let cfg = common.config()?;
            let currents = read_waveform(&input)?;
            let fields = field_record(&currents, &cfg.pipeline.geometry, &cfg.pipeline.heads)?;
            let record = if sensor { transduce(&fields, &cfg.pipeline.sensor, cfg.seed)? } else { fields };
            common.write_record(&record)
        }
        Command::Reconstruct {
            common,
            input,
            truth,
            report,
        } => {
            let cfg = common.config()?;
            let p = &cfg.pipeline;
            let rec = read_waveform(&input)?;
            let fields = if rec.channels_with_role(ChannelRole::SensorOutput).is_empty() {
                rec
            } else {
                sensor_to_field(&rec, &p.sensor)?
            };
            let m = build_geometry_matrix(&p.geometry, &p.heads)?;
            let result = reconstruct(&fields, &m, p.condition_threshold)?;
            eprintln!("geometry matrix condition number: {:.3}", result.condition);
            common.write_record(&result.currents)?;
            if let Some(t) = truth {
                let rows = rms_error_report(&read_waveform(&t)?, &result.currents)?;
                match report {
                    Some(path) => write_atomic(&path, |w| write_error_report(w, &rows))?,
                    None => write_error_report(io::stdout().lock(), &rows)?,
                }
            }
            Ok(())
        }
        Command::Features { common, input } => {
            let cfg = common.config()?;
            let p = &cfg.pipeline;
            let det = p.detection_record(&read_waveform(&input)?)?;
            let rows = p.window_features(&det)?;
            common.emit(|w| write_features(w, &p.feature_names(), &rows))
        }
        Command::Dataset(c) => {
            let cfg = c.config()?;
            let out = c.require_out()?;
            let corpus = generate_dataset(&cfg.grid, cfg.runs_per_class, cfg.seed, &cfg.pipeline)?;
            let counts = corpus.class_counts();
            eprintln!(
                "{} windows: normal {}, lif {}, non_arcing_hif {}, arcing_hif {}",
                corpus.len(),
                counts[0],
                counts[1],
                counts[2],
                counts[3]
            );
            write_corpus(out, &corpus)?;
            Ok(())
        }
        Command::Train { common, corpus } => {
            let cfg = common.config()?;
            let out = common.require_out()?;
            let corpus = read_corpus(&corpus)?;
            let mut tc = cfg.training.clone();
            if let Some(s) = common.seed {
                tc.seed = s;
            }
            let model = train(&corpus, &cfg.pipeline, &tc)?;
            let md = &model.metadata;
            if !md.rejected_rows.is_empty() {
                eprintln!("rejected {} rows with non-finite features: {:?}", md.rejected_rows.len(), md.rejected_rows);
            }
            eprintln!(
                "trained on {} rows, validation accuracy {:.2}% over {} rows",
                md.train_rows,
                100.0 * md.validation_accuracy,
                md.validation_rows
            );
            let bytes = model.to_bytes();
            write_atomic(out, |w| Ok(w.write_all(&bytes)?))?;
            Ok(())
        }
        Command::Detect { common, model, input } => {
            let bytes = std::fs::read(&model).with_context(|| format!("reading {}", model.display()))?;
            let model = ClassifierModel::from_bytes(&bytes).with_context(|| format!("loading {}", model.display()))?;
            let detections = match &input {
                Some(p) if WaveformFormat::from_path(p) == WaveformFormat::Csv => {
                    detect_record(&model, &read_waveform(p)?)?
                }
                Some(p) => {
                    let f = std::fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
                    detect_stream(&model, BufReader::new(f))?
                }
                None => detect_stream(&model, io::stdin().lock())?,
            };
            common.emit(|w| write_detections(w, &detections))
        }
        Command::Evaluate { common, model, corpus } => {
            let bytes = std::fs::read(&model).with_context(|| format!("reading {}", model.display()))?;
            let model = ClassifierModel::from_bytes(&bytes)?;
            let report = evaluate(&model, &read_corpus(&corpus)?)?;
            print!("{}", report.table());
            if let Some(p) = &common.out {
                let json = report.to_json();
                write_atomic(p, |w| Ok(writeln!(w, "{json}")?))?;
            }
            Ok(())
        }
    }
}

/// Gaps restart window alignment after the hole; they are reported, not filled.
fn detect_stream<R: Read>(model: &ClassifierModel, reader: R) -> Result<Vec<Detection>> {
    let stream = read_stream(reader).context("reading waveform stream")?;
    let mut det = StreamDetector::new(model);
    let mut out = Vec::new();
    for ev in stream {
        match ev.context("reading waveform stream")? {
            StreamEvent::Chunk(c) => out.extend(det.push(&c)?),
            StreamEvent::Gap { expected, found } => {
                eprintln!("warning: gap of {} samples at index {expected}; window alignment restarts", found - expected);
                det.reset();
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(bad) = e.downcast_ref::<hif_core::Error>() {
                if matches!(bad, hif_core::Error::Config { .. }) {
                    return ExitCode::from(1);
                }
            }
            ExitCode::from(2)
        }
    }
}
