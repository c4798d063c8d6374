use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

use super::{
    build_clip_prompt, build_video_prompt, parse_clip_response, parse_video_response, CfKind, ChatClient,
    LlmClientConfig, ParsedClipStates, TextGenError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenOptions {
    pub max_parallel: usize,
    /// Extra attempts after the first failed parse.
    pub retries: usize,
    pub clip_cfs: usize,
    pub video_cfs: usize,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            max_parallel: 4,
            retries: 2,
            clip_cfs: 3,
            video_cfs: 10,
        }
    }
}

impl From<&LlmClientConfig> for GenOptions {
    fn from(cfg: &LlmClientConfig) -> Self {
        Self {
            max_parallel: cfg.max_parallel,
            retries: cfg.retries,
            ..Self::default()
        }
    }
}

/// One item left unannotated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub id: String,
    /// `clip`, `k_cf` or `m_cf`.
    pub stage: String,
    pub cause: String,
}

#[derive(Debug, Clone)]
pub struct GenOutput {
    pub corpus: Corpus,
    pub failures: Vec<FailureRecord>,
    pub requests: usize,
}

enum Job {
    Clip(String),
    Video(String, CfKind),
}

enum Done {
    Clip(ParsedClipStates),
    Video(Vec<String>),
}

fn stage(job: &Job) -> (&str, &'static str) {
    match job {
        Job::Clip(id) => (id, "clip"),
        Job::Video(id, CfKind::MissingStep) => (id, "k_cf"),
        Job::Video(id, CfKind::Misordered) => (id, "m_cf"),
    }
}

fn run_job(
    c: &Corpus,
    job: &Job,
    client: &dyn ChatClient,
    opts: &GenOptions,
    requests: &AtomicUsize,
) -> Result<Result<Done, String>, TextGenError> {
    let prompt = match job {
        Job::Clip(id) => build_clip_prompt(&c.clips[id].narration),
        Job::Video(id, kind) => {
            let v = &c.videos[id];
            let narrations: Vec<&str> = c.video_clips(v).map(|cl| cl.narration.as_str()).collect();
            build_video_prompt(&narrations, &v.summary, *kind)
        }
    };
    let prompt = match prompt {
        Ok(p) => p,
        Err(e) => return Ok(Err(e.to_string())),
    };
    let mut last = String::new();
    for attempt in 0..=opts.retries {
        requests.fetch_add(1, Ordering::Relaxed);
        let text = match client.complete(&prompt, attempt) {
            Ok(t) => t,
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        let parsed = match job {
            Job::Clip(_) => parse_clip_response(&text, opts.clip_cfs).map(Done::Clip),
            Job::Video(_, kind) => parse_video_response(&text, *kind, opts.video_cfs).map(|p| Done::Video(p.cfs)),
        };
        match parsed {
            Ok(d) => return Ok(Ok(d)),
            Err(e) => {
                let (id, st) = stage(job);
                log::debug!("{st} {id}: attempt {attempt} failed: {e}");
                last = e.to_string();
            }
        }
    }
    Ok(Err(last))
}

/// Annotates every clip with before/after/state-change counterfactuals and
/// every video with missing-step and misordered counterfactual summaries.
///
/// Items whose responses never parse keep their previous annotations and are
/// reported in `failures`. Results are committed in corpus order, so the
/// output does not depend on `max_parallel` or completion order. Endpoint and
/// credential errors abort the run.
pub fn generate_annotations(c: &Corpus, client: &dyn ChatClient, opts: &GenOptions) -> Result<GenOutput, TextGenError> {
    if opts.max_parallel == 0 || opts.max_parallel > super::MAX_PARALLEL_LIMIT {
        return Err(TextGenError::InvalidConfig(format!("max_parallel {}", opts.max_parallel)));
    }
    let mut jobs: Vec<Job> = c.clips.keys().map(|id| Job::Clip(id.clone())).collect();
    for id in c.videos.keys() {
        jobs.push(Job::Video(id.clone(), CfKind::MissingStep));
        jobs.push(Job::Video(id.clone(), CfKind::Misordered));
    }

    let next = AtomicUsize::new(0);
    let requests = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<Result<Result<Done, String>, TextGenError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let workers = opts.max_parallel.min(jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = run_job(c, job, client, opts, &requests);
                if r.is_err() {
                    abort.store(true, Ordering::Relaxed);
                }
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });

    let mut out = c.clone();
    let mut failures = Vec::new();
    for (job, slot) in jobs.iter().zip(slots) {
        let Some(result) = slot.into_inner().expect("slot lock") else {
            continue;
        };
        let (id, st) = stage(job);
        match result? {
            Ok(Done::Clip(p)) => {
                let clip = out.clips.get_mut(id).expect("job from corpus");
                clip.before = Some(p.before);
                clip.after = Some(p.after);
                clip.sc_cf = p.sc_cf;
            }
            Ok(Done::Video(cfs)) => {
                let v = out.videos.get_mut(id).expect("job from corpus");
                match job {
                    Job::Video(_, CfKind::MissingStep) => v.k_cf = cfs,
                    _ => v.m_cf = cfs,
                }
            }
            Err(cause) => {
                log::warn!("{st} {id} left unannotated: {cause}");
                failures.push(FailureRecord {
                    id: id.to_owned(),
                    stage: st.to_owned(),
                    cause,
                });
            }
        }
    }
    Ok(GenOutput {
        corpus: out,
        failures,
        requests: requests.into_inner(),
    })
}

/// Failure report as JSONL `{"id","stage","cause"}`.
pub fn write_failures(path: &Path, failures: &[FailureRecord]) -> Result<(), TextGenError> {
    let io = |e: std::io::Error| TextGenError::Io(format!("{}: {e}", path.display()));
    let mut f = fs::File::create(path).map_err(io)?;
    for r in failures {
        writeln!(f, "{}", serde_json::to_string(r).expect("record serializes")).map_err(io)?;
    }
    Ok(())
}
