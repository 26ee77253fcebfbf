//! Subcommand implementations. Each one is a thin shell over the library.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tablerl_core::eval::{
    evaluate, ingest_dataset, ingest_predictions, pass_at_k, read_jsonl, EvalReport, InstanceRow,
    JudgeClient, LocalJudge, PredictionRecord,
};
use tablerl_core::prompt::{render_judge_prompt, render_prompt};
use tablerl_core::reward::batch_rewards;
use tablerl_core::{RewardBreakdown, RewardConfig, TableFormat, TaskInstance};
use tablerl_toy::{train, write_curve};

use crate::config::RunConfig;
use crate::judge::RemoteJudge;

#[derive(Debug, Parser)]
#[command(name = "tablerl", version, about = "Verifiable rewards and evaluation for table reasoning")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat TOML run config; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files; stdout only when absent.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every response of every rollout record against its instance.
    Score {
        /// Dataset JSONL.
        #[arg(long)]
        dataset: PathBuf,
        /// Rollouts JSONL in the predictions format.
        #[arg(long)]
        rollouts: PathBuf,
    },
    /// Evaluate predictions and write report.json and instances.csv.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Judge for TQA exact-match failures.
        #[arg(long, value_enum, default_value_t = JudgeKind::None)]
        judge: JudgeKind,
        /// pass@k values, overriding the config's `ks`.
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
        /// Skip bad lines instead of aborting on the first one.
        #[arg(long)]
        lenient: bool,
    },
    /// Unbiased pass@k from explicit counts, a counts file or predictions.
    Passk(PasskArgs),
    /// Train the toy policy with GRPO and write its learning curve.
    TrainToy {
        /// Overrides the config's `total_steps`.
        #[arg(long)]
        steps: Option<usize>,
        /// Print a progress line every this many steps; 0 is silent.
        #[arg(long, default_value_t = 0)]
        log_every: usize,
    },
    /// Render the task prompt of one instance, or the judge prompt.
    Render(RenderArgs),
    /// Serve the reward-scoring HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JudgeKind {
    None,
    /// Deterministic rule-based judge.
    Local,
    /// Chat-completion endpoint from JUDGE_BASE_URL, JUDGE_MODEL, JUDGE_API_KEY.
    Remote,
}

#[derive(Debug, Clone, Args)]
pub struct PasskArgs {
    /// Samples per instance, with `--c`.
    #[arg(long, requires = "c")]
    pub n: Option<usize>,
    /// Correct samples, with `--n`.
    #[arg(long, requires = "n")]
    pub c: Option<usize>,
    /// JSONL of `{"n": .., "c": ..}` records; the estimate is their mean.
    #[arg(long, conflicts_with_all = ["n", "dataset"])]
    pub counts: Option<PathBuf>,
    #[arg(long, requires = "predictions", conflicts_with = "n")]
    pub dataset: Option<PathBuf>,
    #[arg(long, requires = "dataset")]
    pub predictions: Option<PathBuf>,
    /// k values; defaults to 1..=n for explicit counts.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    /// Dataset JSONL holding the instance.
    #[arg(long, required_unless_present = "judge_response")]
    pub dataset: Option<PathBuf>,
    /// Instance id; the first instance when absent.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
    pub format: FormatArg,
    /// Print the system prompt instead of the user message.
    #[arg(long)]
    pub system: bool,
    /// Render the judge prompt for this response instead.
    #[arg(long, conflicts_with = "dataset")]
    pub judge_response: Option<String>,
    /// Ground truth for the judge prompt, as a JSON list of strings.
    #[arg(long, requires = "judge_response")]
    pub ground_truth: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Markdown,
    Html,
}

impl From<FormatArg> for TableFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Markdown => TableFormat::Markdown,
            FormatArg::Html => TableFormat::Html,
        }
    }
}

/// Reward of one response in a rollouts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub model: String,
    pub response_index: usize,
    #[serde(flatten)]
    pub breakdown: RewardBreakdown,
}

pub fn load_config(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn load_instances(path: &Path, strict: bool) -> anyhow::Result<Vec<TaskInstance>> {
    let ingested = ingest_dataset(path, strict)
        .with_context(|| format!("dataset {}", path.display()))?;
    for e in &ingested.errors {
        eprintln!("{}: skipped {e}", path.display());
    }
    Ok(ingested.records)
}

fn load_predictions(path: &Path, strict: bool) -> anyhow::Result<Vec<PredictionRecord>> {
    let ingested = ingest_predictions(path, strict)
        .with_context(|| format!("predictions {}", path.display()))?;
    for e in &ingested.errors {
        eprintln!("{}: skipped {e}", path.display());
    }
    Ok(ingested.records)
}

/// Scores every response of every record, in file order.
pub fn score_records(
    instances: &[TaskInstance],
    rollouts: &[PredictionRecord],
    cfg: &RewardConfig,
) -> anyhow::Result<Vec<ScoreRecord>> {
    let by_id: BTreeMap<&str, &TaskInstance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut out = Vec::new();
    for (line, rec) in rollouts.iter().enumerate() {
        let Some(inst) = by_id.get(rec.instance_id.as_str()) else {
            bail!("rollout record {}: unknown instance `{}`", line + 1, rec.instance_id);
        };
        let breakdowns = batch_rewards(&rec.responses, inst, cfg)?;
        out.extend(breakdowns.into_iter().enumerate().map(|(i, b)| ScoreRecord {
            id: rec.instance_id.clone(),
            model: rec.model_tag.clone(),
            response_index: i,
            breakdown: b,
        }));
    }
    Ok(out)
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(item).expect("records serialize"));
        s.push('\n');
    }
    s
}

/// Writes `name` under the output directory, or prints it when there is none.
fn emit(out_dir: Option<&Path>, name: &str, content: &str) -> anyhow::Result<()> {
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, content).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Per-instance rows as CSV.
pub fn rows_csv(rows: &[InstanceRow]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "task", "format_stage", "accuracy", "judge", "bleu", "rouge_l"])?;
    for r in rows {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let judge = r
            .judge
            .map(|j| serde_json::to_value(j).expect("judgement serializes"))
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        w.write_record([
            r.id.clone(),
            r.task.as_str().to_string(),
            r.format_stage.to_string(),
            r.accuracy.to_string(),
            judge,
            opt(r.bleu),
            opt(r.rouge_l),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn run_eval(
    instances: &[TaskInstance],
    predictions: &[PredictionRecord],
    cfg: &RunConfig,
    judge: JudgeKind,
) -> anyhow::Result<(EvalReport, Vec<InstanceRow>)> {
    let client: Option<Box<dyn JudgeClient>> = match judge {
        JudgeKind::None => None,
        JudgeKind::Local => Some(Box::new(LocalJudge::default())),
        JudgeKind::Remote => Some(Box::new(RemoteJudge::from_env()?)),
    };
    let out = evaluate(instances, predictions, &cfg.eval_config(), client.as_deref())?;
    Ok((out.report, out.rows))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountRecord {
    n: usize,
    c: usize,
}

/// pass@k for each requested k, keyed by k.
pub fn run_passk(args: &PasskArgs, cfg: &RunConfig) -> anyhow::Result<BTreeMap<usize, f64>> {
    if let (Some(n), Some(c)) = (args.n, args.c) {
        let ks: Vec<usize> = if args.k.is_empty() { (1..=n).collect() } else { args.k.clone() };
        return ks.iter().map(|&k| Ok((k, pass_at_k(n, c, k)?))).collect();
    }
    if let Some(path) = &args.counts {
        let counts = read_jsonl(path, true, |v| {
            serde_json::from_value::<CountRecord>(v).map_err(|e| ("<record>".into(), e.to_string()))
        })
        .with_context(|| format!("counts {}", path.display()))?
        .records;
        if counts.is_empty() {
            bail!("{} has no records", path.display());
        }
        let n_min = counts.iter().map(|r| r.n).min().expect("non-empty");
        let ks: Vec<usize> = if args.k.is_empty() { (1..=n_min).collect() } else { args.k.clone() };
        let mut out = BTreeMap::new();
        for &k in &ks {
            let mut sum = 0.0;
            for r in &counts {
                sum += pass_at_k(r.n, r.c, k)?;
            }
            out.insert(k, sum / counts.len() as f64);
        }
        return Ok(out);
    }
    if let (Some(ds), Some(preds)) = (&args.dataset, &args.predictions) {
        if args.k.is_empty() {
            bail!("--k is required with --dataset");
        }
        let instances = load_instances(ds, true)?;
        let predictions = load_predictions(preds, true)?;
        return Ok(tablerl_core::eval::pass_at_k_report(
            &instances,
            &predictions,
            &args.k,
            &cfg.reward,
        )?);
    }
    bail!("give --n and --c, --counts, or --dataset with --predictions")
}

/// The text `render` prints, with no trailing newline.
pub fn run_render(args: &RenderArgs) -> anyhow::Result<String> {
    if let Some(response) = &args.judge_response {
        let gt: Vec<String> = match &args.ground_truth {
            Some(text) => serde_json::from_str(text).context("--ground-truth must be a JSON list of strings")?,
            None => bail!("--ground-truth is required with --judge-response"),
        };
        return Ok(render_judge_prompt(response, &gt));
    }
    let path = args.dataset.as_ref().expect("clap requires a dataset");
    let instances = load_instances(path, true)?;
    let inst = match &args.id {
        Some(id) => instances
            .iter()
            .find(|i| &i.id == id)
            .with_context(|| format!("no instance `{id}` in {}", path.display()))?,
        None => instances.first().context("dataset is empty")?,
    };
    let prompt = render_prompt(inst, args.format.into(), true)?;
    Ok(if args.system {
        prompt.system.expect("system prompt requested")
    } else {
        prompt.user
    })
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli.common)?;
    let out_dir = cli.common.out_dir.as_deref();
    match cli.command {
        Command::Score { dataset, rollouts } => {
            let instances = load_instances(&dataset, true)?;
            let records = load_predictions(&rollouts, true)?;
            let scored = score_records(&instances, &records, &cfg.reward)?;
            emit(out_dir, "rewards.jsonl", &to_jsonl(&scored))
        }
        Command::Eval {
            dataset,
            predictions,
            judge,
            ks,
            lenient,
        } => {
            let mut cfg = cfg;
            if !ks.is_empty() {
                cfg.ks = ks;
            }
            let instances = load_instances(&dataset, !lenient)?;
            let preds = load_predictions(&predictions, !lenient)?;
            let (report, rows) = run_eval(&instances, &preds, &cfg, judge)?;
            let json = serde_json::to_string_pretty(&report)? + "\n";
            if let Some(dir) = out_dir {
                emit(Some(dir), "report.json", &json)?;
                emit(Some(dir), "instances.csv", &rows_csv(&rows)?)?;
            }
            emit(None, "", &json)
        }
        Command::Passk(args) => {
            let table = run_passk(&args, &cfg)?;
            let json = serde_json::to_string_pretty(&table)? + "\n";
            emit(out_dir, "passk.json", &json)
        }
        Command::TrainToy { steps, log_every } => {
            let mut train_cfg = cfg.train.clone();
            if let Some(s) = steps {
                train_cfg.total_steps = s;
            }
            let outcome = train(&train_cfg, &cfg.reward, &cfg.clip, |s| {
                if log_every > 0 && s.step % log_every == 0 {
                    eprintln!(
                        "step {} reward {:.4} accuracy {:.4} format {:.4} len {:.1}",
                        s.step, s.mean_reward, s.mean_accuracy, s.mean_format, s.mean_response_len
                    );
                }
            })?;
            let summary = serde_json::json!({
                "seed": train_cfg.seed,
                "steps": outcome.curve.len(),
                "initial_eval": outcome.initial_eval,
                "final_eval": outcome.final_eval,
            });
            match out_dir {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    write_curve(&dir.join("curve.jsonl"), &outcome.curve)?;
                    let mut resolved = cfg.clone();
                    resolved.train = train_cfg;
                    emit(Some(dir), "config.toml", &tablerl_core::config::to_flat_string(&resolved)?)?;
                    emit(Some(dir), "summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
                    emit(Some(dir), "policy.json", &serde_json::to_string(&outcome.policy)?)
                }
                None => emit(None, "", &to_jsonl(&outcome.curve)),
            }
        }
        Command::Render(args) => {
            let text = run_render(&args)?;
            emit(out_dir, "prompt.txt", &text)
        }
        Command::Serve { bind } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind)
                    .await
                    .with_context(|| format!("binding {bind}"))?;
                eprintln!("listening on {}", listener.local_addr()?);
                crate::service::serve(listener, cfg.reward).await?;
                Ok(())
            })
        }
    }
}
