use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{validate_corpus, ClipRecord, Corpus, CorpusError, VideoRecord};

pub const CLIPS_FILE: &str = "clips.jsonl";
pub const VIDEOS_FILE: &str = "videos.jsonl";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses one JSON object per non-blank line, keeping 1-based line numbers.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
            file: name.clone(),
            line: idx + 1,
            cause: e.to_string(),
        })?;
        out.push((idx + 1, record));
    }
    Ok(out)
}

fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, record).map_err(|e| CorpusError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Loads and validates a corpus from its two JSONL files.
///
/// The feature dimension is taken from the first clip; every clip must carry
/// exactly `frames_per_clip` vectors of that dimension.
pub fn load_corpus(
    clips_path: &Path,
    videos_path: &Path,
    frames_per_clip: usize,
) -> Result<Corpus, CorpusError> {
    let clip_lines: Vec<(usize, ClipRecord)> = read_jsonl(clips_path)?;
    let video_lines: Vec<(usize, VideoRecord)> = read_jsonl(videos_path)?;

    let d_in = clip_lines
        .first()
        .and_then(|(_, c)| c.frame_features.first())
        .map_or(0, Vec::len);

    let mut clips = BTreeMap::new();
    for (_, clip) in clip_lines {
        if clip.frame_features.len() != frames_per_clip
            || clip.frame_features.iter().any(|f| f.len() != d_in)
        {
            return Err(CorpusError::DimensionMismatch(clip.clip_id));
        }
        if clips.contains_key(&clip.clip_id) {
            return Err(CorpusError::DuplicateId(clip.clip_id));
        }
        clips.insert(clip.clip_id.clone(), clip);
    }

    let mut videos = BTreeMap::new();
    for (_, video) in video_lines {
        if let Some(missing) = video.clip_ids.iter().find(|id| !clips.contains_key(*id)) {
            return Err(CorpusError::DanglingReference(missing.clone()));
        }
        if videos.contains_key(&video.video_id) {
            return Err(CorpusError::DuplicateId(video.video_id));
        }
        videos.insert(video.video_id.clone(), video);
    }
    if let Some(clip) = clips.values().find(|c| !videos.contains_key(&c.video_id)) {
        return Err(CorpusError::DanglingReference(clip.video_id.clone()));
    }

    let corpus = Corpus {
        clips,
        videos,
        d_in,
        frames_per_clip,
    };
    match validate_corpus(&corpus).violations.into_iter().next() {
        Some(v) => Err(CorpusError::Invalid(v)),
        None => Ok(corpus),
    }
}

/// Loads `clips.jsonl` and `videos.jsonl` from a corpus directory.
pub fn load_corpus_dir(dir: &Path, frames_per_clip: usize) -> Result<Corpus, CorpusError> {
    load_corpus(&dir.join(CLIPS_FILE), &dir.join(VIDEOS_FILE), frames_per_clip)
}

/// Writes records in id order; the output is a pure function of the corpus.
pub fn save_corpus(c: &Corpus, clips_path: &Path, videos_path: &Path) -> Result<(), CorpusError> {
    write_jsonl(clips_path, c.clips.values())?;
    write_jsonl(videos_path, c.videos.values())
}

pub fn save_corpus_dir(c: &Corpus, dir: &Path) -> Result<(), CorpusError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    save_corpus(c, &dir.join(CLIPS_FILE), &dir.join(VIDEOS_FILE))
}
