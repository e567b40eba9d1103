//! Dataset records and JSON Lines persistence.
//!
//! Files are written through a temporary file in the target directory and
//! renamed into place, so a partially written file is never visible at the
//! target path. Serialization is canonical (fixed key order, fixed number
//! formatting), so reading and re-writing a file reproduces its bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Answer;
use crate::program::{hop_count, signature_of, Program};
use crate::scene::Scene;
use crate::signature::{CompositionSignature, Family};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionRecord {
    pub id: String,
    pub scene_id: String,
    pub text: String,
    pub program: Program,
    pub answer: Answer,
    pub family: Family,
    pub hop: usize,
    pub signature: CompositionSignature,
    pub source_set: String,
}

impl QuestionRecord {
    /// Fills the derived fields from the program.
    pub fn new(
        id: String,
        scene_id: String,
        text: String,
        program: Program,
        answer: Answer,
        source_set: String,
    ) -> Self {
        let signature = signature_of(&program);
        QuestionRecord {
            id,
            scene_id,
            text,
            family: signature.family,
            hop: hop_count(&program),
            signature,
            program,
            answer,
            source_set,
        }
    }

    /// Family, hop and signature agree with the program, and the answer
    /// type matches the family.
    pub fn check_derived(&self) -> std::result::Result<(), String> {
        let sig = signature_of(&self.program);
        if sig != self.signature {
            return Err("signature does not match program".into());
        }
        if self.family != sig.family {
            return Err("family does not match program".into());
        }
        if self.hop != hop_count(&self.program) {
            return Err("hop does not match program".into());
        }
        match (self.family, self.answer) {
            (Family::Count, Answer::Count(_)) => Ok(()),
            (f, Answer::Bool(_)) if f.is_boolean() => Ok(()),
            _ => Err(format!("answer {} has the wrong type for {}", self.answer, self.family)),
        }
    }
}

pub type Dataset = Vec<QuestionRecord>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub question_id: String,
    pub answer: String,
}

/// Streams a JSONL file one record at a time.
pub struct JsonlReader<T> {
    path: std::path::PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    line: usize,
    _marker: std::marker::PhantomData<T>,
}

impl<T: DeserializeOwned> JsonlReader<T> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(JsonlReader {
            path: path.to_owned(),
            lines: BufReader::new(file).lines(),
            line: 0,
            _marker: std::marker::PhantomData,
        })
    }

    fn schema(&self, message: String) -> Error {
        Error::Schema {
            path: self.path.clone(),
            line: self.line,
            message,
        }
    }
}

impl<T: DeserializeOwned> Iterator for JsonlReader<T> {
    type Item = Result<T>;

    fn next(&mut self) -> Option<Self::Item> {
        let text = match self.lines.next()? {
            Ok(t) => t,
            Err(e) => return Some(Err(Error::io(&self.path, e))),
        };
        self.line += 1;
        if text.trim().is_empty() {
            return Some(Err(self.schema("blank line".into())));
        }
        Some(serde_json::from_str(&text).map_err(|e| {
            let full = e.to_string();
            let what = full.rsplit_once(" at line ").map_or(full.as_str(), |(w, _)| w);
            self.schema(format!("{what} (column {})", e.column()))
        }))
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    JsonlReader::open(path)?.collect()
}

/// Reads a question file, rejecting records whose derived fields disagree
/// with their program.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = JsonlReader::<QuestionRecord>::open(path)?;
    let mut out = Vec::new();
    while let Some(rec) = reader.next() {
        let rec = rec?;
        if let Err(m) = rec.check_derived() {
            return Err(reader.schema(format!("record {}: {m}", rec.id)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_scenes(path: &Path) -> Result<Vec<Scene>> {
    read_jsonl(path)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    read_jsonl(path)
}

/// Runs `body` against a temp file next to `path`, then renames it over
/// `path`. Nothing appears at `path` unless `body` succeeds.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_jsonl<'a, T: Serialize + 'a>(items: impl IntoIterator<Item = &'a T>, path: &Path) -> Result<()> {
    write_atomic(path, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn write_dataset(ds: &[QuestionRecord], path: &Path) -> Result<()> {
    write_jsonl(ds, path)
}

pub fn write_scenes(scenes: &[Scene], path: &Path) -> Result<()> {
    write_jsonl(scenes, path)
}

/// One JSONL line, without the trailing newline.
pub fn to_line<T: Serialize>(item: &T) -> String {
    serde_json::to_string(item).expect("records always serialize")
}
