use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use counsel_core::aggregate::{self, assemble, SessionFeatures};
use counsel_core::agreement;
use counsel_core::config::RunConfig;
use counsel_core::feedback::{self, Subset};
use counsel_core::ingest::{self, load_session_with, session_dirs, SessionStatus, TierKind};
use counsel_core::rating_model::{self, Classifier, Dataset, FeatureSet};
use counsel_core::synth::{self, SynthParams};

const CONFIG_KEYS: &str = "\
Config file keys (JSON object, all optional, unknown keys are rejected):
  fps                 frame rate for sessions that do not declare one [25]
  sample_rate         audio sample rate for sessions that do not declare one [16000]
  smile_threshold     smile probability at which a frame counts as smiling [0.5]
  gaze                {\"linkage\": ward|single|complete|average, \"k\": 2, \"max_points\": null}
  clip_min, clip_max  radar deviation clipping bounds [-2, 2]
  axis_order          feature keys for plot axes [all 17 in canonical order]
  cv_folds            cross-validation folds [5]
  seed                fold shuffling seed [0]
  split_segments      split multi-sentence segments before feature extraction [false]
  keep_subcategories  keep annotation subcategories in coincidence matrices [false]
  agreement_step_s    annotation rasterization step in seconds [0.04]
  output_dir          default output directory (after -o and COUNSEL_OUT_DIR)";

/// Batch analytics and feedback for recorded counselling conversations.
#[derive(Parser)]
#[command(name = "counsel", version, after_help = CONFIG_KEYS)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArg {
    /// Output directory.
    #[arg(short, long, env = "COUNSEL_OUT_DIR")]
    out: Option<PathBuf>,
}

impl OutArg {
    fn resolve(&self, cfg: &RunConfig) -> Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Table,
    Parallel,
    ParallelGrouped,
    Radar,
}

#[derive(Subcommand)]
enum Command {
    /// Check every session of a corpus against the input schema.
    Validate {
        corpus: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Extract session features into features.csv.
    Features {
        corpus: PathBuf,
        #[command(flatten)]
        out: OutArg,
        /// Fail when any session cannot be processed.
        #[arg(long)]
        strict: bool,
        /// Worker threads (0: all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Render feedback artifacts from features.csv.
    Report {
        /// features.csv produced by `features`.
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        /// Session to chart; required for radar.
        #[arg(long)]
        session: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Cross-validate rating classifiers on features.csv.
    Classify {
        #[arg(long)]
        features: PathBuf,
        /// Overrides cv_folds.
        #[arg(long)]
        folds: Option<usize>,
        /// Overrides seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Inter-annotator agreement over the annotation tiers of a corpus.
    Agree {
        corpus: PathBuf,
        /// Overrides agreement_step_s.
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 29)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Strength of the planted feature-rating signal.
        #[arg(long, default_value_t = 1.0)]
        signal: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_features(path: &Path) -> Result<Vec<SessionFeatures>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    aggregate::read_features_csv(file).with_context(|| format!("reading {}", path.display()))
}

fn validate(cfg: &RunConfig, corpus: &Path, json: bool) -> Result<ExitCode> {
    let report = ingest::validate_corpus_with(corpus, cfg.load_defaults())?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for s in &report.sessions {
            match &s.status {
                SessionStatus::Pass { session_id, warnings } if warnings.is_empty() => {
                    println!("PASS {} ({session_id})", s.dir.display())
                }
                SessionStatus::Pass { session_id, warnings } => {
                    println!("PASS {} ({session_id}): {}", s.dir.display(), warnings.join("; "))
                }
                SessionStatus::Fail { reason } => println!("FAIL {}: {reason}", s.dir.display()),
            }
        }
        println!("{} passed, {} failed", report.passed(), report.failed());
    }
    Ok(if report.failed() == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn features(cfg: &RunConfig, corpus: &Path, out: &Path, strict: bool, jobs: usize) -> Result<ExitCode> {
    let dirs = session_dirs(corpus)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let results: Vec<(PathBuf, Result<SessionFeatures, String>)> = pool.install(|| {
        dirs.par_iter()
            .map(|dir| {
                let res = match load_session_with(dir, cfg.load_defaults()) {
                    Ok(bundle) => assemble(&bundle, cfg).map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                };
                (dir.clone(), res)
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failed = 0;
    for (dir, res) in results {
        match res {
            Ok(f) => rows.push(f),
            Err(e) => {
                failed += 1;
                eprintln!("warning: skipping {}: {e}", dir.display());
            }
        }
    }
    if strict && failed > 0 {
        eprintln!("error: {failed} session(s) failed");
        return Ok(ExitCode::FAILURE);
    }
    rows.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    let mut buf = Vec::new();
    aggregate::write_features_csv(&mut buf, &rows)?;
    let path = out.join("features.csv");
    write_file(&path, &buf)?;
    eprintln!("wrote {} ({} sessions)", path.display(), rows.len());
    Ok(ExitCode::SUCCESS)
}

fn report(cfg: &RunConfig, features: &Path, kind: ReportKind, session: Option<&str>, out: &Path) -> Result<()> {
    let sessions = read_features(features)?;
    let written: Vec<PathBuf> = match kind {
        ReportKind::Table => aggregate::feedback_table(&sessions)?
            .par_iter()
            .map(|fb| {
                let mut buf = Vec::new();
                aggregate::write_feedback_csv(&mut buf, fb)?;
                let path = out.join(format!("feedback_{}.csv", fb.session_id));
                write_file(&path, &buf)?;
                Ok(path)
            })
            .collect::<Result<_>>()?,
        ReportKind::Parallel | ReportKind::ParallelGrouped => {
            let grouped = matches!(kind, ReportKind::ParallelGrouped);
            [Subset::Paraverbal, Subset::Nonverbal]
                .par_iter()
                .map(|&subset| {
                    let svg = feedback::parallel_plot(&sessions, subset, grouped, &cfg.axis_order)?;
                    let suffix = if grouped { "_grouped" } else { "" };
                    let path = out.join(format!("parallel_{}{suffix}.svg", subset.as_str()));
                    write_file(&path, svg.as_bytes())?;
                    Ok(path)
                })
                .collect::<Result<_>>()?
        }
        ReportKind::Radar => {
            let Some(id) = session else {
                bail!("--kind radar requires --session");
            };
            let Some(target) = sessions.iter().find(|s| s.session_id == id) else {
                bail!("unknown session {id:?}");
            };
            let (svg, profile) =
                feedback::radar_chart(target, &sessions, &cfg.axis_order, (cfg.clip_min, cfg.clip_max))?;
            let svg_path = out.join(format!("radar_{id}.svg"));
            let json_path = out.join(format!("radar_{id}.json"));
            write_file(&svg_path, svg.as_bytes())?;
            write_json(&json_path, &profile)?;
            vec![svg_path, json_path]
        }
    };
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn classify(features: &Path, folds: usize, seed: u64, out: &Path) -> Result<()> {
    let data = Dataset::from_sessions(&read_features(features)?)?;
    let sets = FeatureSet::standard();
    let cells: Vec<(usize, usize)> = (0..sets.len())
        .flat_map(|s| (0..Classifier::ALL.len()).map(move |c| (s, c)))
        .collect();
    // every (set, classifier) cell is independent; results keep cell order
    let reports = cells
        .par_iter()
        .map(|&(s, c)| rating_model::cross_validate(&data, &sets[s..=s], &[Classifier::ALL[c]], folds, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = reports[0].clone();
    report.cells = reports.into_iter().flat_map(|r| r.cells).collect();
    write_json(&out.join("classification_report.json"), &report)?;
    print!("{}", rating_model::render_table(&report));
    Ok(())
}

fn agree(cfg: &RunConfig, corpus: &Path, step: f64, out: &Path) -> Result<()> {
    let bundles = session_dirs(corpus)?
        .par_iter()
        .map(|dir| load_session_with(dir, cfg.load_defaults()).with_context(|| format!("loading {}", dir.display())))
        .collect::<Result<Vec<_>>>()?;
    let mut stdout = std::io::stdout().lock();
    for kind in TierKind::ALL {
        let (matrix, report) = agreement::pooled(&bundles, kind, step, cfg.keep_subcategories)?;
        let mut buf = Vec::new();
        matrix.write_csv(&mut buf)?;
        write_file(&out.join(format!("coincidence_{kind}.csv")), &buf)?;
        write_json(&out.join(format!("agreement_{kind}.json")), &report)?;
        let pct = report
            .percent_agreement
            .map_or("n/a".to_string(), |p| format!("{:.1}%", 100.0 * p));
        let alpha = report.krippendorff_alpha.map_or("n/a".to_string(), |a| format!("{a:.3}"));
        writeln!(stdout, "{kind}: agreement {pct}, alpha {alpha}, {} pair(s)", report.pairs)?;
    }
    Ok(())
}

fn synth_corpus(n: usize, seed: u64, signal: f64, out: &Path) -> Result<()> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    if !signal.is_finite() {
        bail!("--signal must be finite");
    }
    let params = SynthParams {
        n,
        seed,
        signal,
        ..SynthParams::default()
    };
    (0..n).into_par_iter().try_for_each(|i| -> Result<()> {
        let bundle = synth::generate_session(&params, i);
        let dir = out.join(&bundle.meta.session_id);
        ingest::write_session(&dir, &bundle).with_context(|| format!("writing {}", dir.display()))
    })?;
    eprintln!("wrote {n} sessions to {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Validate { corpus, json } => validate(&cfg, &corpus, json),
        Command::Features {
            corpus,
            out,
            strict,
            jobs,
        } => features(&cfg, &corpus, &out.resolve(&cfg)?, strict, jobs),
        Command::Report {
            features,
            kind,
            session,
            out,
        } => {
            report(&cfg, &features, kind, session.as_deref(), &out.resolve(&cfg)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify {
            features,
            folds,
            seed,
            out,
        } => {
            cfg.cv_folds = folds.unwrap_or(cfg.cv_folds);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.validate()?;
            classify(&features, cfg.cv_folds, cfg.seed, &out.resolve(&cfg)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Agree { corpus, step, out } => {
            cfg.agreement_step_s = step.unwrap_or(cfg.agreement_step_s);
            cfg.validate()?;
            agree(&cfg, &corpus, cfg.agreement_step_s, &out.resolve(&cfg)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { n, seed, signal, out } => {
            synth_corpus(n, seed, signal, &out.resolve(&cfg)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
