use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use pprune_core::gates::{Decision, GateId, ReviewAction, ReviewSubmission};
use pprune_core::ltr::{self, TrainParams};
use pprune_core::service::{self, AdvanceOptions, Phase, Run, RunStore};

#[derive(Debug, Parser)]
#[command(name = "pp", about = "Patent portfolio pruning pipeline")]
pub struct Cli {
    /// Directory holding run directories.
    #[arg(long, global = true, default_value = "runs")]
    pub runs_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArg {
    /// Run id as printed by `pp ingest` or `pp run`.
    #[arg(long = "run")]
    pub run_id: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a run from run.toml and ingest the portfolio.
    Ingest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute feature vectors and categories.
    Categorize {
        #[command(flatten)]
        run: RunArg,
        /// Show category scores under another profile.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Train a ranking model from labels over the configured portfolio.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Extra labels that override base labels per patent.
        #[arg(long)]
        feedback: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        trees: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
    },
    /// Select categories and rank their patents; opens the PostRanking gate.
    Rank {
        #[command(flatten)]
        run: RunArg,
        #[arg(long)]
        profile: Option<String>,
        /// Comma-separated category key patterns, e.g. `G11C:*:High`.
        #[arg(long, value_delimiter = ',')]
        select_categories: Vec<String>,
    },
    /// Build seeds and the need graph and match them; opens the PostMatch gate.
    Match {
        #[command(flatten)]
        run: RunArg,
    },
    /// Generate reports; opens the FinalOntology gate.
    Report {
        #[command(flatten)]
        run: RunArg,
    },
    /// Resolve or reopen a gate.
    Review {
        #[command(flatten)]
        run: RunArg,
        /// PostRanking, PostMatch or FinalOntology.
        gate: String,
        #[arg(long, group = "action")]
        approve: bool,
        #[arg(long, group = "action")]
        reject: bool,
        /// JSON file with a list of decisions or a full submission.
        #[arg(long, group = "action")]
        amend: Option<PathBuf>,
        /// Start a new version of an already resolved gate.
        #[arg(long, group = "action")]
        reopen: bool,
        #[arg(long, default_value = "")]
        reviewer: String,
    },
    /// Write PostRanking decisions as training labels.
    ExportLabels {
        #[command(flatten)]
        run: RunArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Create a run and advance it as far as possible.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        auto_approve: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory with a static console bundle to serve at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn status(out: &mut dyn Write, run: &Run) -> anyhow::Result<()> {
    writeln!(out, "{} {:?}", run.run_id, run.phase)?;
    if let Some(f) = &run.failure {
        writeln!(out, "failed in {:?}: {}", f.phase, f.message)?;
    }
    if let Some(g) = run.phase.gate() {
        writeln!(out, "awaiting review: pp review --run {} {g} --approve|--reject|--amend <file>", run.run_id)?;
    }
    Ok(())
}

fn advance_to(store: &RunStore, id: &str, stop: Phase) -> anyhow::Result<Run> {
    Ok(store.advance(id, AdvanceOptions { auto_approve: false, stop_after: Some(stop) })?)
}

fn read_submission(path: &PathBuf, gate: GateId, reviewer: &str) -> anyhow::Result<ReviewSubmission> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.is_array() {
        let verdicts: Vec<Decision> = serde_json::from_value(value)?;
        return Ok(ReviewSubmission {
            gate_id: gate,
            reviewer: reviewer.to_string(),
            action: Some(ReviewAction::Amend),
            verdicts,
            expected_version: None,
        });
    }
    let sub: ReviewSubmission = serde_json::from_value(value)?;
    if sub.gate_id != gate {
        bail!("amendment file is for {}, not {gate}", sub.gate_id);
    }
    Ok(sub)
}

/// Runs one command. `serve` blocks until the server stops.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let store = RunStore::new(&cli.runs_dir);
    match cli.command {
        Command::Ingest { config } => {
            let run = store.create_run(&config)?;
            status(out, &run)?;
        }
        Command::Categorize { run, profile } => {
            let r = advance_to(&store, &run.run_id, Phase::Categorized)?;
            let doc = store.categories(&r.run_id, profile.as_deref())?;
            writeln!(out, "profile {}", doc.profile)?;
            for c in &doc.categories {
                writeln!(
                    out,
                    "{:>3}  {:<28} {:>8.4}  {} patents",
                    c.rank,
                    c.category.key.to_string(),
                    c.s_cat,
                    c.category.members.len()
                )?;
            }
            status(out, &r)?;
        }
        Command::Train { config, labels, feedback, out: path, trees, seed, learning_rate } => {
            let inputs = service::load_training_inputs(&config)?;
            let mut labels = ltr::load_labels(&labels)?;
            if let Some(f) = feedback {
                labels = service::merge_labels(&labels, &ltr::load_labels(&f)?);
            }
            let hyper = TrainParams { n_trees: trees, seed, learning_rate, ..TrainParams::default() };
            let model = service::train_model(&inputs, &labels, &hyper)?;
            ltr::save_model(&model, &path)?;
            let trace = &model.training_meta.ndcg_trace;
            writeln!(
                out,
                "trained {} trees; NDCG@{} {:.4} -> {:.4}; wrote {}",
                model.trees.len(),
                hyper.ndcg_k,
                trace.first().copied().unwrap_or_default(),
                trace.last().copied().unwrap_or_default(),
                path.display()
            )?;
        }
        Command::Rank { run, profile, select_categories } => {
            let mut r = advance_to(&store, &run.run_id, Phase::Categorized)?;
            if r.phase == Phase::Categorized {
                let pats = if select_categories.is_empty() { vec!["*".to_string()] } else { select_categories };
                r = store.select(&r.run_id, &pats, profile.as_deref())?.1;
            } else if profile.is_some() || !select_categories.is_empty() {
                bail!("run {} is past ranking; profile and selection are fixed", r.run_id);
            }
            let doc = store.ranking(&r.run_id, None)?;
            writeln!(out, "profile {}", doc.profile)?;
            for e in doc.entries.iter().take(50) {
                writeln!(out, "{:>3}  {:<20} {:>10.5}  {}", e.rank, e.patent_id, e.score, e.category)?;
            }
            status(out, &r)?;
        }
        Command::Match { run } => {
            let r = advance_to(&store, &run.run_id, Phase::GatePostMatch)?;
            for m in store.matches(&r.run_id)? {
                writeln!(out, "{:<20} {:<6} fit {:>3}", m.patent_id, m.need_id, m.fit_score)?;
            }
            status(out, &r)?;
        }
        Command::Report { run } => {
            let r = advance_to(&store, &run.run_id, Phase::GateFinal)?;
            for rep in store.reports(&r.run_id)? {
                writeln!(out, "{}", pprune_core::nexus::render_text(&rep))?;
            }
            status(out, &r)?;
        }
        Command::Review { run, gate, approve, reject, amend, reopen, reviewer } => {
            let g: GateId = gate.parse()?;
            if reopen {
                let (gate, r) = store.reopen(&run.run_id, g)?;
                writeln!(out, "{} version {} {:?}", gate.gate_id, gate.version, gate.state)?;
                status(out, &r)?;
                return Ok(());
            }
            let sub = match (approve, reject, amend) {
                (true, _, _) => ReviewSubmission::approve(g, &reviewer),
                (_, true, _) => {
                    ReviewSubmission { action: Some(ReviewAction::Reject), ..ReviewSubmission::approve(g, &reviewer) }
                }
                (_, _, Some(path)) => read_submission(&path, g, &reviewer)?,
                _ => bail!("one of --approve, --reject, --amend or --reopen is required"),
            };
            let (gate, r) = store.review(&run.run_id, &sub)?;
            writeln!(
                out,
                "{} version {} {:?} ({} decisions)",
                gate.gate_id,
                gate.version,
                gate.state,
                gate.decisions.len()
            )?;
            status(out, &r)?;
        }
        Command::ExportLabels { run, out: path } => {
            let labels = store.export_labels(&run.run_id)?;
            let path = path.unwrap_or_else(|| store.run_dir(&run.run_id).join("feedback_labels.jsonl"));
            service::write_atomic(&path, ltr::write_labels(&labels).as_bytes())?;
            writeln!(out, "{} labels -> {}", labels.len(), path.display())?;
        }
        Command::Run { config, auto_approve } => {
            let created = store.create_run(&config)?;
            let r = store.advance(&created.run_id, AdvanceOptions { auto_approve, stop_after: None })?;
            if r.phase == Phase::Complete {
                let pruned = store.pruned(&r.run_id)?;
                writeln!(out, "pruned {} patents: {}", pruned.patent_ids.len(), pruned.patent_ids.join(", "))?;
            }
            status(out, &r)?;
        }
        Command::Serve { port, static_dir } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::api::serve(Arc::new(store), port, static_dir))?;
        }
    }
    Ok(())
}
