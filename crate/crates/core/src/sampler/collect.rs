use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{mpsc, Semaphore};
use tokio::task::JoinSet;

use super::client::{Client, Failure};
use super::{render_prompt, Injection, Mode, PromptPlan, SamplerConfig};
use crate::corpus::{meta_sidecar_path, Corpus, TextItem};
use crate::error::{Error, Result};

/// One item that could not be generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub topic: String,
    pub item_id: String,
    /// Attempts made before giving up.
    pub attempt: u32,
    pub error: String,
    pub timestamp: DateTime<Utc>,
}

/// Optional observation and interruption points, mainly for tests.
#[derive(Clone, Default)]
pub struct CollectHooks {
    /// Called with the number of requests in flight each time one starts.
    pub on_request_start: Option<Arc<dyn Fn(usize) + Send + Sync>>,
    /// Stop after this many new items have been written, as if the process
    /// had been killed.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectOutcome {
    /// Everything in the output file, sorted by id.
    pub corpus: Corpus,
    pub planned: usize,
    pub already_present: usize,
    pub written: usize,
    pub failures: Vec<FailureRecord>,
    pub max_in_flight: usize,
    pub interrupted: bool,
}

/// `<out>.failures.jsonl`
pub fn failures_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".failures.jsonl");
    PathBuf::from(s)
}

/// Reads the items already collected. A trailing partial line (from a crash
/// mid-write) is cut off so appends start on a clean line.
fn read_existing(path: &Path) -> Result<Vec<TextItem>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut reader = BufReader::new(file);
    let mut items = Vec::new();
    let mut good_len = 0u64;
    let mut line = String::new();
    let mut lineno = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if read == 0 {
            break;
        }
        lineno += 1;
        let complete = line.ends_with('\n');
        if line.trim().is_empty() {
            good_len += read as u64;
            continue;
        }
        match serde_json::from_str::<TextItem>(line.trim()) {
            Ok(item) if complete => {
                items.push(item);
                good_len += read as u64;
            }
            // unterminated final line: the write was cut short
            Ok(_) | Err(_) if !complete => break,
            Err(e) => {
                return Err(Error::MalformedLine {
                    path: path.to_owned(),
                    line: lineno,
                    message: e.to_string(),
                })
            }
            Ok(_) => unreachable!(),
        }
    }
    let on_disk = fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    if on_disk != good_len {
        let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
        f.set_len(good_len).map_err(|e| Error::io(path, e))?;
    }
    Ok(items)
}

enum Record {
    Item(Box<TextItem>),
    Failure(FailureRecord),
}

struct Job {
    topic: String,
    id: String,
    prompt: String,
}

fn write_meta(out: &Path, meta: &serde_json::Map<String, Value>) -> Result<()> {
    let path = meta_sidecar_path(out);
    let text = serde_json::to_string_pretty(meta)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn open_append(path: &Path) -> Result<File> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))
}

/// Generates every planned item missing from `out`, appending each to the
/// JSONL file as soon as it arrives. Re-running after an interruption fills
/// in only the missing ids. Items that fail after all retries are logged to
/// [`failures_path`] and skipped; an authentication failure aborts.
pub async fn collect(cfg: &SamplerConfig, plan: &PromptPlan, out: &Path, hooks: &CollectHooks) -> Result<CollectOutcome> {
    cfg.validate()?;
    plan.validate()?;
    if plan.kind == crate::corpus::PromptKind::Chat && cfg.mode != Mode::Chat {
        return Err(Error::Config("chat plans need the sampler in chat mode".into()));
    }
    let params = cfg.request_params();
    let params_id = params.id();

    let existing = read_existing(out)?;
    if let Some(bad) = existing
        .iter()
        .find(|it| it.extra.get("params_id").and_then(Value::as_str) != Some(params_id.as_str()))
    {
        return Err(Error::Config(format!(
            "{} already holds item {} generated with different request parameters",
            out.display(),
            bad.id
        )));
    }
    let have: HashSet<&str> = existing.iter().map(|it| it.id.as_str()).collect();

    let source_label = match plan.injection {
        Some(v) => v.to_string(),
        None => cfg.model.clone(),
    };
    let system = plan.effective_system_prompt();
    let mut jobs = Vec::new();
    for topic in &plan.topics {
        let prompt = render_prompt(plan, topic)?;
        for k in 0..plan.count_per_topic {
            let id = plan.item_id(topic, k);
            if !have.contains(id.as_str()) {
                jobs.push(Job {
                    topic: topic.clone(),
                    id,
                    prompt: prompt.clone(),
                });
            }
        }
    }

    let mut meta = serde_json::Map::new();
    let name = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    meta.insert("name".into(), json!(name));
    meta.insert("endpoint".into(), json!(cfg.endpoint));
    meta.insert("request_params".into(), serde_json::to_value(&params)?);
    meta.insert("params_id".into(), json!(params_id));
    meta.insert("plan".into(), serde_json::to_value(plan)?);
    meta.insert("effective_system_prompt".into(), json!(system));
    meta.insert("source_label".into(), json!(source_label));
    write_meta(out, &meta)?;

    let planned = plan.total();
    let already_present = existing.len();
    drop(have);

    // single writer for both the corpus and the failure log
    let (tx, mut rx) = mpsc::channel::<Record>(256);
    let out_path = out.to_owned();
    let fail_path = failures_path(out);
    let stop_after = hooks.stop_after;
    let abort = Arc::new(AtomicBool::new(false));
    let writer_abort = abort.clone();
    let writer = tokio::task::spawn_blocking(move || -> Result<(usize, Vec<FailureRecord>)> {
        let mut file = open_append(&out_path)?;
        let mut failures = Vec::new();
        let mut written = 0usize;
        while let Some(rec) = rx.blocking_recv() {
            match rec {
                Record::Item(item) => {
                    if stop_after.is_some_and(|s| written >= s) {
                        continue;
                    }
                    let line = serde_json::to_string(&item)?;
                    writeln!(file, "{line}").map_err(|e| Error::io(&out_path, e))?;
                    file.flush().map_err(|e| Error::io(&out_path, e))?;
                    written += 1;
                    if stop_after.is_some_and(|s| written >= s) {
                        writer_abort.store(true, Ordering::SeqCst);
                    }
                }
                Record::Failure(f) => {
                    let mut ff = open_append(&fail_path)?;
                    writeln!(ff, "{}", serde_json::to_string(&f)?).map_err(|e| Error::io(&fail_path, e))?;
                    failures.push(f);
                }
            }
        }
        Ok((written, failures))
    });

    let client = Arc::new(Client::new(cfg)?);
    let semaphore = Arc::new(Semaphore::new(cfg.concurrency));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let max_in_flight = Arc::new(AtomicUsize::new(0));
    let fatal: Arc<Mutex<Option<Error>>> = Arc::new(Mutex::new(None));
    let system: Arc<Option<String>> = Arc::new(system);
    let params_id = Arc::new(params_id);
    let source_label = Arc::new(source_label);

    // with no success at all, this many failed items means the endpoint is unusable
    let breaker = cfg.concurrency.max(3);
    let successes = Arc::new(AtomicUsize::new(0));
    let failed = Arc::new(AtomicUsize::new(0));
    let endpoint = Arc::new(cfg.endpoint.clone());

    let mut set = JoinSet::new();
    for job in jobs {
        let (successes, failed, endpoint) = (successes.clone(), failed.clone(), endpoint.clone());
        let (client, semaphore, in_flight, max_in_flight) =
            (client.clone(), semaphore.clone(), in_flight.clone(), max_in_flight.clone());
        let (fatal, abort, tx, system) = (fatal.clone(), abort.clone(), tx.clone(), system.clone());
        let (params_id, source_label, hook) = (params_id.clone(), source_label.clone(), hooks.on_request_start.clone());
        let retry = cfg.retry.clone();
        let kind = plan.kind;
        set.spawn(async move {
            let mut attempt = 0u32;
            loop {
                if abort.load(Ordering::SeqCst) {
                    return;
                }
                attempt += 1;
                let result = {
                    let _permit = semaphore.acquire().await.expect("semaphore open");
                    if abort.load(Ordering::SeqCst) {
                        return;
                    }
                    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    max_in_flight.fetch_max(now, Ordering::SeqCst);
                    if let Some(h) = &hook {
                        h(now);
                    }
                    let r = client.generate(system.as_deref(), &job.prompt).await;
                    in_flight.fetch_sub(1, Ordering::SeqCst);
                    r
                };
                let give_up = |message: String| {
                    let n = failed.fetch_add(1, Ordering::SeqCst) + 1;
                    if n >= breaker && successes.load(Ordering::SeqCst) == 0 {
                        abort.store(true, Ordering::SeqCst);
                        fatal.lock().expect("fatal lock").get_or_insert(Error::Http {
                            endpoint: endpoint.as_ref().clone(),
                            message: format!("no request succeeded; {n} items failed, last error: {message}"),
                        });
                    }
                    FailureRecord {
                        topic: job.topic.clone(),
                        item_id: job.id.clone(),
                        attempt,
                        error: message,
                        timestamp: Utc::now(),
                    }
                };
                match result {
                    Ok(text) => {
                        successes.fetch_add(1, Ordering::SeqCst);
                        let mut item = TextItem::new(job.id.clone(), text);
                        item.prompt_kind = Some(kind);
                        item.topic = job.topic.clone();
                        item.source_label = source_label.as_ref().clone();
                        item.created_at = Some(Utc::now());
                        item.extra.insert("prompt".into(), json!(job.prompt));
                        item.extra.insert("params_id".into(), json!(params_id.as_str()));
                        let _ = tx.send(Record::Item(Box::new(item))).await;
                        return;
                    }
                    Err(Failure::Fatal(e)) => {
                        abort.store(true, Ordering::SeqCst);
                        fatal.lock().expect("fatal lock").get_or_insert(e);
                        return;
                    }
                    Err(Failure::Permanent(m)) => {
                        let _ = tx.send(Record::Failure(give_up(m))).await;
                        return;
                    }
                    Err(Failure::Transient { message, retry_after }) => {
                        if attempt >= retry.max_attempts {
                            let _ = tx.send(Record::Failure(give_up(message))).await;
                            return;
                        }
                        let wait = retry_after
                            .map(|d| d.min(Duration::from_millis(retry.max_backoff_ms)))
                            .unwrap_or_else(|| Duration::from_millis(retry.delay_ms(attempt)));
                        tokio::time::sleep(wait).await;
                    }
                }
            }
        });
    }
    drop(tx);
    while let Some(res) = set.join_next().await {
        if let Err(e) = res {
            if e.is_panic() {
                std::panic::resume_unwind(e.into_panic());
            }
        }
    }
    let (written, failures) = writer.await.expect("writer task")?;
    if let Some(e) = fatal.lock().expect("fatal lock").take() {
        return Err(e);
    }

    let mut items = read_existing(out)?;
    items.sort_by(|a, b| a.id.cmp(&b.id));
    let mut corpus = Corpus::new(items);
    corpus.meta = meta.into_iter().collect();
    Ok(CollectOutcome {
        corpus,
        planned,
        already_present,
        written,
        failures,
        max_in_flight: max_in_flight.load(Ordering::SeqCst),
        interrupted: stop_after.is_some_and(|s| written >= s) && already_present + written < planned,
    })
}

/// Collects one chat corpus per injection variant under identical sampling
/// parameters, writing `<out_dir>/<variant>.jsonl`.
pub async fn run_injection_experiment(
    cfg: &SamplerConfig,
    base_system_prompt: &str,
    n_per_variant: usize,
    out_dir: &Path,
    hooks: &CollectHooks,
) -> Result<Vec<(Injection, CollectOutcome)>> {
    if cfg.mode != Mode::Chat {
        return Err(Error::Config("the injection experiment needs the sampler in chat mode".into()));
    }
    if base_system_prompt.trim().is_empty() {
        return Err(Error::Config("the injection experiment needs a system prompt".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut out = Vec::new();
    for v in Injection::ALL {
        let plan = PromptPlan::chat_review(base_system_prompt, n_per_variant).with_injection(v);
        let path = out_dir.join(format!("{v}.jsonl"));
        out.push((v, collect(cfg, &plan, &path, hooks).await?));
    }
    Ok(out)
}
