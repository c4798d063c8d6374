#![allow(dead_code)]

pub mod worked_examples;

use std::fs;
use std::path::{Path, PathBuf};

use procaware::corpus::{save_corpus_dir, synthesize_corpus, Corpus, SynthSpec, CLIPS_FILE, VIDEOS_FILE};
use procaware::textgen::{generate_annotations, GenOptions, MockChatClient};
use procaware::trainer::TrainConfig;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn seed7_spec() -> SynthSpec {
    serde_json::from_str(&fs::read_to_string(fixture("synth_seed7.json")).unwrap()).unwrap()
}

pub fn acceptance_config() -> TrainConfig {
    serde_json::from_str(&fs::read_to_string(fixture("acceptance_config.json")).unwrap()).unwrap()
}

/// 2 videos × 5 clips.
pub fn ten_clip_corpus() -> Corpus {
    synthesize_corpus(&SynthSpec::new(2, 5, 8, 0.05, 21)).unwrap().corpus
}

/// Runs mock generation and returns the saved corpus files.
pub fn gen_mock_files(c: &Corpus, max_parallel: usize) -> (Vec<u8>, Vec<u8>, usize) {
    let client = MockChatClient::from_jsonl(&fixture("mock_gen.jsonl")).unwrap();
    let opts = GenOptions {
        max_parallel,
        ..GenOptions::default()
    };
    let out = generate_annotations(c, &client, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_corpus_dir(&out.corpus, dir.path()).unwrap();
    (
        fs::read(dir.path().join(CLIPS_FILE)).unwrap(),
        fs::read(dir.path().join(VIDEOS_FILE)).unwrap(),
        out.failures.len(),
    )
}
