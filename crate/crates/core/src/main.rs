use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use llmdrift::config::CliConfig;
use llmdrift::corpus::{load_corpus, merge_external_annotations, save_corpus, Corpus};
use llmdrift::detect::{
    compare_corpora, pairwise_tests, render_pairwise, render_report, split_sanity_check, AggregateMode, DecisionReport,
    ReportFormat, Verdict,
};
use llmdrift::features::{annotate_corpus, Feature, Lexicons};
use llmdrift::mixture::run_sensitivity_sweep;
use llmdrift::sampler::{self, CollectHooks, CollectOutcome, Injection, Mode, PromptPlan};
use llmdrift::synthetic::{calibrated_pair, SyntheticSource};

const EXIT_SAME: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_INSUFFICIENT: u8 = 2;
const EXIT_CHANGED: u8 = 3;

#[derive(Parser)]
#[command(name = "llmdrift", version, about = "Detect changes in text-generation services from samples of their output")]
struct Cli {
    /// TOML file with detector, sampler, lexicon and mixture settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Significance level; overrides the config file.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report format; overrides the config file.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Print the effective configuration and plan, then exit without work.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => ReportFormat::Text,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Review,
    News,
    Tweet,
    ChatReview,
}

#[derive(Subcommand)]
enum Command {
    /// Collect a corpus from an OpenAI-compatible endpoint.
    Sample(SampleArgs),
    /// Compute text features for every item of a corpus.
    Annotate(AnnotateArgs),
    /// Compare two corpora, or split one corpus in half as a sanity check.
    Compare(CompareArgs),
    /// Sweep mixture rates and report detection accuracy.
    Mixture(MixtureArgs),
    /// Run the prompt-injection experiment and its sentiment analysis.
    Inject(InjectArgs),
    /// Sample a fresh corpus and compare it with a stored reference.
    Monitor(MonitorArgs),
}

#[derive(Args, Default)]
struct SamplerArgs {
    /// Base URL of the API, e.g. http://localhost:8000/v1.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent with every request.
    #[arg(long)]
    model: Option<String>,
    /// Request protocol: completion or chat.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Name of the environment variable holding the API key.
    #[arg(long)]
    api_key_env: Option<String>,
    /// Sampling temperature.
    #[arg(long)]
    temperature: Option<f64>,
    /// Nucleus sampling mass.
    #[arg(long)]
    top_p: Option<f64>,
    /// Token limit per completion (completion mode only).
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Maximum concurrent requests.
    #[arg(long)]
    concurrency: Option<usize>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: llmdrift::Error| e.to_string())
}

impl SamplerArgs {
    fn apply(&self, cfg: &mut CliConfig) {
        let s = &mut cfg.sampler;
        if let Some(v) = &self.endpoint {
            s.endpoint = v.clone();
        }
        if let Some(v) = &self.model {
            s.model = v.clone();
        }
        if let Some(v) = self.mode {
            s.mode = v;
        }
        if let Some(v) = &self.api_key_env {
            s.api_key_env = v.clone();
        }
        if let Some(v) = self.temperature {
            s.temperature = v;
        }
        if let Some(v) = self.top_p {
            s.top_p = Some(v);
        }
        if let Some(v) = self.max_tokens {
            s.max_tokens = v;
        }
        if let Some(v) = self.concurrency {
            s.concurrency = v;
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, value_enum, default_value = "review")]
    kind: KindArg,
    /// Items per topic (total items for chat-review).
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Comma-separated topics replacing the built-in list.
    #[arg(long, value_delimiter = ',')]
    topics: Option<Vec<String>>,
    /// System prompt (required for chat-review).
    #[arg(long)]
    system_prompt: Option<String>,
}

impl PlanArgs {
    fn plan(&self) -> Result<PromptPlan> {
        let mut plan = match self.kind {
            KindArg::Review => PromptPlan::review(self.count),
            KindArg::News => PromptPlan::news(self.count),
            KindArg::Tweet => PromptPlan::tweet(self.count),
            KindArg::ChatReview => {
                let Some(s) = &self.system_prompt else {
                    bail!("chat-review needs --system-prompt");
                };
                PromptPlan::chat_review(s.clone(), self.count)
            }
        };
        if let Some(t) = &self.topics {
            if matches!(self.kind, KindArg::ChatReview) {
                bail!("--topics does not apply to chat-review");
            }
            plan.topics = t.clone();
        }
        if self.system_prompt.is_some() && !matches!(self.kind, KindArg::ChatReview) {
            plan.system_prompt = self.system_prompt.clone();
        }
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Output JSONL; an existing file is resumed.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Corpus JSONL to annotate.
    corpus: PathBuf,
    /// Comma-separated features; defaults to every built-in feature.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// CSV of precomputed per-item values to attach.
    #[arg(long)]
    merge: Option<PathBuf>,
    /// Key column of the merged CSV.
    #[arg(long, default_value = "id")]
    key: String,
    /// Write here instead of rewriting the input.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecisionArg {
    PerFeature,
    Bonferroni,
    Fisher,
}

impl From<DecisionArg> for AggregateMode {
    fn from(d: DecisionArg) -> Self {
        match d {
            DecisionArg::PerFeature => AggregateMode::PerFeature,
            DecisionArg::Bonferroni => AggregateMode::Bonferroni,
            DecisionArg::Fisher => AggregateMode::Fisher,
        }
    }
}

#[derive(Args, Default)]
struct DetectArgs {
    /// Comma-separated features to test.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// Mode that decides the verdict.
    #[arg(long, value_enum)]
    decision: Option<DecisionArg>,
    /// Also report the Fisher combination over the Fisher features.
    #[arg(long)]
    fisher: bool,
    /// Write the report here as well as to standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl DetectArgs {
    fn apply(&self, cfg: &mut CliConfig) {
        let d = &mut cfg.detector;
        if let Some(f) = &self.features {
            d.features = f.clone();
        }
        if let Some(m) = self.decision {
            d.decision = m.into();
        }
        if self.fisher && !d.aggregate_modes.contains(&AggregateMode::Fisher) {
            d.aggregate_modes.push(AggregateMode::Fisher);
        }
    }
}

#[derive(Args)]
struct CompareArgs {
    /// Reference corpus.
    a: PathBuf,
    /// Corpus to compare; when omitted, A is split into two random halves.
    b: Option<PathBuf>,
    #[command(flatten)]
    detect: DetectArgs,
}

#[derive(Args)]
struct MixtureArgs {
    /// Source A corpus; with --b, replaces the synthetic sources.
    #[arg(long, requires = "b")]
    a: Option<PathBuf>,
    /// Source B corpus.
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    /// TOML file with `[a]` and `[b]` synthetic source tables.
    #[arg(long, conflicts_with = "a")]
    synthetic: Option<PathBuf>,
    /// Comma-separated mixture rates in (0, 1].
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Comma-separated features to sweep.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Trials per sample size and mixture rate.
    #[arg(long)]
    trials: Option<usize>,
    /// Write the CSV table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InjectArgs {
    /// Analyse PI0/PIminus/PIplus corpora already in this directory instead
    /// of sampling.
    #[arg(long)]
    offline: Option<PathBuf>,
    /// Base system prompt the injections are appended to.
    #[arg(long)]
    system_prompt: Option<String>,
    /// Items per variant.
    #[arg(long, default_value_t = 3000)]
    count: usize,
    /// Where sampled corpora are written.
    #[arg(long, default_value = "injection")]
    out_dir: PathBuf,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Args)]
struct MonitorArgs {
    /// Stored reference corpus.
    #[arg(long)]
    reference: PathBuf,
    /// Where the fresh sample is written (resumed if present).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    detect: DetectArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let insufficient = e
                .chain()
                .filter_map(|c| c.downcast_ref::<llmdrift::Error>())
                .any(llmdrift::Error::is_insufficient_data);
            ExitCode::from(if insufficient { EXIT_INSUFFICIENT } else { EXIT_ERROR })
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let mut cfg = CliConfig::load(cli.config.as_deref())?;
    cfg.apply_overrides(cli.alpha, cli.seed, cli.format.map(Into::into));
    match cli.command {
        Command::Sample(a) => {
            a.sampler.apply(&mut cfg);
            cfg.validate()?;
            let plan = a.plan.plan()?;
            if cli.dry_run {
                print_dry_run(&cfg, &[("plan", toml::to_string_pretty(&plan)?), ("out", a.out.display().to_string())])?;
                return Ok(EXIT_SAME);
            }
            let outcome = collect(&cfg, &plan, &a.out)?;
            report_collection(&a.out, &outcome);
            Ok(if outcome.failures.is_empty() { EXIT_SAME } else { EXIT_ERROR })
        }
        Command::Annotate(a) => {
            cfg.validate()?;
            let features = a
                .features
                .clone()
                .unwrap_or_else(|| Feature::names().into_iter().map(String::from).collect());
            let out = a.out.clone().unwrap_or_else(|| a.corpus.clone());
            if cli.dry_run {
                print_dry_run(
                    &cfg,
                    &[
                        ("annotate", a.corpus.display().to_string()),
                        ("features", features.join(",")),
                        ("out", out.display().to_string()),
                    ],
                )?;
                return Ok(EXIT_SAME);
            }
            let lex = cfg.lexicons.load()?;
            let mut corpus = load_corpus(&a.corpus, false)?;
            if let Some(table) = &a.merge {
                let (merged, r) = merge_external_annotations(&corpus, table, &a.key)?;
                eprintln!(
                    "merged columns {} ({} rows matched, {} unmatched, {} items without a row)",
                    r.columns.join(","),
                    r.matched_rows,
                    r.unmatched_rows,
                    r.missing_items
                );
                corpus = merged;
            }
            let annotated = annotate_corpus(&corpus, &features, &lex)?;
            save_corpus(&annotated, &out)?;
            for f in &features {
                let (values, missing) = annotated.feature_values(f);
                println!("{f}: {} values, {missing} undefined", values.len());
            }
            Ok(EXIT_SAME)
        }
        Command::Compare(a) => {
            a.detect.apply(&mut cfg);
            cfg.validate()?;
            if cli.dry_run {
                let target = match &a.b {
                    Some(b) => format!("{} vs {}", a.a.display(), b.display()),
                    None => format!("split halves of {}", a.a.display()),
                };
                print_dry_run(&cfg, &[("compare", target)])?;
                return Ok(EXIT_SAME);
            }
            let lex = cfg.lexicons.load()?;
            let ca = load_for_compare(&a.a, &cfg, &lex)?;
            let report = match &a.b {
                Some(b) => compare_corpora(&ca, &load_for_compare(b, &cfg, &lex)?, &cfg.detector)?,
                None => split_sanity_check(&ca, &cfg.detector, cfg.seed)?,
            };
            emit_report(&report, &cfg, a.detect.report.as_deref())
        }
        Command::Mixture(a) => {
            let m = &mut cfg.mixture;
            if let Some(d) = &a.deltas {
                m.deltas = d.clone();
            }
            if let Some(s) = &a.sizes {
                m.sizes = s.clone();
            }
            if let Some(t) = a.trials {
                m.trials = t;
            }
            if let Some(f) = &a.features {
                m.features = f.clone();
            }
            if let Some(bad) = m.deltas.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
                bail!("mixture rate {bad} is outside (0, 1]");
            }
            cfg.validate()?;
            let sources = match (&a.a, &a.b) {
                (Some(pa), Some(pb)) => {
                    let lex = cfg.lexicons.load()?;
                    let ca = load_for_compare(pa, &cfg, &lex)?;
                    let cb = load_for_compare(pb, &cfg, &lex)?;
                    Sources::Corpora(ca, cb)
                }
                _ => {
                    let (sa, sb) = match &a.synthetic {
                        Some(p) => {
                            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                            let pair: SyntheticPair =
                                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                            (pair.a, pair.b)
                        }
                        None => calibrated_pair(),
                    };
                    if cfg.mixture.features.is_empty() {
                        cfg.mixture.features = sa.feature_names();
                    }
                    Sources::Synthetic(sa, sb)
                }
            };
            if cli.dry_run {
                let src = match &sources {
                    Sources::Corpora(..) => "corpora".to_string(),
                    Sources::Synthetic(sa, sb) => format!("synthetic {} vs {}", sa.name, sb.name),
                };
                print_dry_run(&cfg, &[("sources", src)])?;
                return Ok(EXIT_SAME);
            }
            let (ca, cb) = match sources {
                Sources::Corpora(ca, cb) => (ca, cb),
                Sources::Synthetic(sa, sb) => {
                    let n = cfg.mixture.sizes.iter().copied().max().unwrap_or(0);
                    (sa.generate(n, cfg.seed)?, sb.generate(n, cfg.seed.wrapping_add(1))?)
                }
            };
            if cfg.mixture.features.is_empty() {
                cfg.mixture.features = ca.annotation_keys().into_iter().collect();
            }
            let table = run_sensitivity_sweep(&ca, &cb, &cfg.mixture)?;
            let csv = table.to_csv();
            match &a.out {
                Some(p) => {
                    std::fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?;
                    eprintln!("wrote {} rows to {}", table.rows.len(), p.display());
                }
                None => print!("{csv}"),
            }
            Ok(EXIT_SAME)
        }
        Command::Inject(a) => {
            a.sampler.apply(&mut cfg);
            if a.offline.is_none() {
                cfg.sampler.mode = Mode::Chat;
            }
            cfg.validate()?;
            if a.offline.is_none() && a.system_prompt.as_deref().is_none_or(|s| s.trim().is_empty()) {
                bail!("the injection experiment needs --system-prompt (or --offline DIR)");
            }
            if cli.dry_run {
                let what = match &a.offline {
                    Some(d) => format!("analyse corpora in {}", d.display()),
                    None => format!("sample {} items per variant into {}", a.count, a.out_dir.display()),
                };
                print_dry_run(&cfg, &[("inject", what)])?;
                return Ok(EXIT_SAME);
            }
            let dir = match &a.offline {
                Some(d) => d.clone(),
                None => {
                    let rt = runtime()?;
                    let outcomes = rt.block_on(sampler::run_injection_experiment(
                        &cfg.sampler,
                        a.system_prompt.as_deref().unwrap_or_default(),
                        a.count,
                        &a.out_dir,
                        &CollectHooks::default(),
                    ))?;
                    for (v, o) in &outcomes {
                        report_collection(&a.out_dir.join(format!("{v}.jsonl")), o);
                    }
                    a.out_dir.clone()
                }
            };
            let lex = cfg.lexicons.load()?;
            let load = |v: Injection| -> Result<Corpus> {
                let path = dir.join(format!("{v}.jsonl"));
                let c = load_corpus(&path, false).with_context(|| format!("loading {}", path.display()))?;
                Ok(annotate_corpus(&c, &[Feature::Compound.name().to_owned()], &lex)?)
            };
            let (c0, cm, cp) = (load(Injection::PI0)?, load(Injection::PIminus)?, load(Injection::PIplus)?);
            let (pi0, minus, plus) = (("PI0", &c0), ("PIminus", &cm), ("PIplus", &cp));
            let rows = pairwise_tests(&[(minus, pi0), (minus, plus), (plus, pi0)], "compound", cfg.detector.alpha)?;
            print!("{}", render_pairwise(&rows, cfg.format));
            Ok(EXIT_SAME)
        }
        Command::Monitor(a) => {
            a.sampler.apply(&mut cfg);
            a.detect.apply(&mut cfg);
            cfg.validate()?;
            let plan = a.plan.plan()?;
            if cli.dry_run {
                print_dry_run(
                    &cfg,
                    &[
                        ("plan", toml::to_string_pretty(&plan)?),
                        ("reference", a.reference.display().to_string()),
                        ("out", a.out.display().to_string()),
                    ],
                )?;
                return Ok(EXIT_SAME);
            }
            let lex = cfg.lexicons.load()?;
            let reference = load_for_compare(&a.reference, &cfg, &lex)?;
            let outcome = collect(&cfg, &plan, &a.out)?;
            report_collection(&a.out, &outcome);
            let fresh = annotate_missing(outcome.corpus, &cfg, &lex)?;
            save_corpus(&fresh, &a.out)?;
            let report = compare_corpora(&reference, &fresh, &cfg.detector)?;
            emit_report(&report, &cfg, a.detect.report.as_deref())
        }
    }
}

enum Sources {
    Corpora(Corpus, Corpus),
    Synthetic(SyntheticSource, SyntheticSource),
}

#[derive(Deserialize)]
struct SyntheticPair {
    a: SyntheticSource,
    b: SyntheticSource,
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")
}

fn collect(cfg: &CliConfig, plan: &PromptPlan, out: &Path) -> Result<CollectOutcome> {
    let rt = runtime()?;
    Ok(rt.block_on(sampler::collect(&cfg.sampler, plan, out, &CollectHooks::default()))?)
}

fn report_collection(out: &Path, o: &CollectOutcome) {
    let mut per_topic: BTreeMap<&str, usize> = BTreeMap::new();
    for it in &o.corpus.items {
        *per_topic.entry(it.topic.as_str()).or_default() += 1;
    }
    println!(
        "{}: {} of {} planned items ({} new, {} already present)",
        out.display(),
        o.corpus.len(),
        o.planned,
        o.written,
        o.already_present
    );
    for (topic, n) in per_topic {
        println!("  {topic}: {n}");
    }
    if !o.failures.is_empty() {
        eprintln!(
            "{} items failed after retries; see {} and rerun to retry them",
            o.failures.len(),
            sampler::failures_path(out).display()
        );
    }
}

/// Loads a corpus, names it after its file, and computes any configured
/// built-in feature not yet present.
fn load_for_compare(path: &Path, cfg: &CliConfig, lex: &Lexicons) -> Result<Corpus> {
    let mut c = load_corpus(path, true).with_context(|| format!("loading {}", path.display()))?;
    if !c.meta.contains_key("name") {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        c = c.with_name(stem);
    }
    annotate_missing(c, cfg, lex)
}

fn annotate_missing(c: Corpus, cfg: &CliConfig, lex: &Lexicons) -> Result<Corpus> {
    let present = c.annotation_keys();
    let wanted = cfg.detector.features.iter().chain(&cfg.mixture.features);
    let mut missing: Vec<String> = wanted
        .filter(|f| !present.contains(*f) && f.parse::<Feature>().is_ok())
        .cloned()
        .collect();
    missing.sort();
    missing.dedup();
    if missing.is_empty() {
        return Ok(c);
    }
    Ok(annotate_corpus(&c, &missing, lex)?)
}

fn emit_report(report: &DecisionReport, cfg: &CliConfig, to: Option<&Path>) -> Result<u8> {
    let text = render_report(report, cfg.format);
    print!("{text}");
    if let Some(p) = to {
        std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(match report.verdict {
        Verdict::Same => EXIT_SAME,
        Verdict::Changed => EXIT_CHANGED,
    })
}

fn print_dry_run(cfg: &CliConfig, extra: &[(&str, String)]) -> Result<()> {
    println!("# effective configuration");
    print!("{}", cfg.to_toml()?);
    for (k, v) in extra {
        println!("\n# {k}");
        println!("{}", v.trim_end());
    }
    Ok(())
}
