//! Feedback sessions persisted as plain files, one directory per session.
//!
//! ```text
//! <data_dir>/sessions/<id>/
//!   session.json    summary manifest
//!   corpus.bin      corpus file
//!   spec.json       generator spec (synthetic sessions only)
//!   gallery.json    2-D display coordinates
//!   marks.txt       current marks
//!   model.json      current filter model, once fitted
//!   inverter.json   inverter of the current model, inverted lpf only
//!   history.jsonl   one line per fit, append-only
//! ```

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use fast_core::lpf::LinearInverter;
use fast_core::manifest::{
    filter_model_from_manifest, filter_model_to_manifest, generator_spec_to_manifest, inverter_from_manifest,
    inverter_to_manifest, ManifestReader, ManifestWriter,
};
use fast_core::synthgen::GeneratorSpec;
use fast_core::FilterModel;
use serde_json::{Map, Value};
use tokio::sync::RwLock;

use crate::corpus::Corpus;
use crate::error::{AppError, AppResult};
use crate::gallery::pca_coordinates;
use crate::marks::{Mark, Marks};
use crate::repro::sha256_hex;
use crate::workflow::{fit_model, FitOptions, FitOutcome};

pub const KIND_SESSION: &str = "session";
pub const KIND_GALLERY: &str = "gallery_coordinates";

const SESSION_FILE: &str = "session.json";
const CORPUS_FILE: &str = "corpus.bin";
const SPEC_FILE: &str = "spec.json";
const GALLERY_FILE: &str = "gallery.json";
const MARKS_FILE: &str = "marks.txt";
const MODEL_FILE: &str = "model.json";
const INVERTER_FILE: &str = "inverter.json";
const HISTORY_FILE: &str = "history.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Synthetic,
    Upload,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Synthetic => "synthetic",
            Source::Upload => "upload",
        }
    }

    fn parse(s: &str) -> AppResult<Self> {
        match s {
            "synthetic" => Ok(Source::Synthetic),
            "upload" => Ok(Source::Upload),
            other => Err(AppError::Data(format!("unknown session source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitEvent {
    pub fit_index: u64,
    pub urf: String,
    pub lpf: String,
    pub augment: bool,
    pub seed: u64,
    pub alpha: f64,
    pub n_negative: usize,
    pub n_positive: usize,
    pub threshold: f64,
    pub model_sha256: String,
}

impl FitEvent {
    pub fn to_json(&self) -> String {
        let mut m = Map::new();
        m.insert("fit_index".into(), self.fit_index.into());
        m.insert("urf".into(), self.urf.clone().into());
        m.insert("lpf".into(), self.lpf.clone().into());
        m.insert("augment".into(), self.augment.into());
        m.insert("seed".into(), self.seed.into());
        m.insert("alpha".into(), self.alpha.into());
        m.insert("n_negative".into(), (self.n_negative as u64).into());
        m.insert("n_positive".into(), (self.n_positive as u64).into());
        m.insert("threshold".into(), self.threshold.into());
        m.insert("model_sha256".into(), self.model_sha256.clone().into());
        Value::Object(m).to_string()
    }

    fn from_line(line: &str) -> AppResult<Self> {
        let v: Value = serde_json::from_str(line).map_err(|e| AppError::Data(format!("history line: {e}")))?;
        let bad = |k: &str| AppError::Data(format!("history line lacks `{k}`"));
        let u = |k: &str| v.get(k).and_then(Value::as_u64).ok_or_else(|| bad(k));
        let f = |k: &str| v.get(k).and_then(Value::as_f64).ok_or_else(|| bad(k));
        let s = |k: &str| v.get(k).and_then(Value::as_str).map(str::to_owned).ok_or_else(|| bad(k));
        Ok(Self {
            fit_index: u("fit_index")?,
            urf: s("urf")?,
            lpf: s("lpf")?,
            augment: v.get("augment").and_then(Value::as_bool).ok_or_else(|| bad("augment"))?,
            seed: u("seed")?,
            alpha: f("alpha")?,
            n_negative: u("n_negative")? as usize,
            n_positive: u("n_positive")? as usize,
            threshold: f("threshold")?,
            model_sha256: s("model_sha256")?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: FilterModel,
    pub inverter: Option<LinearInverter>,
    /// Similarity of every corpus row under the model, in row order.
    pub similarities: Vec<f64>,
}

#[derive(Debug)]
pub struct Session {
    id: String,
    dir: PathBuf,
    source: Source,
    corpus: Corpus,
    gallery: Vec<[f64; 2]>,
    marks: Marks,
    fitted: Option<Fitted>,
    history: Vec<FitEvent>,
    preview_version: AtomicU64,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| AppError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}

fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

fn gallery_manifest(coords: &[[f64; 2]]) -> String {
    let xs: Vec<f64> = coords.iter().map(|c| c[0]).collect();
    let ys: Vec<f64> = coords.iter().map(|c| c[1]).collect();
    ManifestWriter::new(KIND_GALLERY)
        .uint("count", coords.len() as u64)
        .floats("x", &xs)
        .floats("y", &ys)
        .finish()
}

fn gallery_from_manifest(text: &str, count: usize) -> AppResult<Vec<[f64; 2]>> {
    let r = ManifestReader::parse_kind(text, KIND_GALLERY)?;
    let xs = r.floats("x")?;
    let ys = r.floats("y")?;
    if xs.len() != count || ys.len() != count {
        return Err(AppError::Data("gallery coordinates do not match the corpus".into()));
    }
    Ok(xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect())
}

impl Session {
    fn create(id: String, dir: PathBuf, source: Source, corpus: Corpus, spec: Option<&GeneratorSpec>) -> AppResult<Self> {
        fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
        corpus.save(&dir.join(CORPUS_FILE))?;
        if let Some(spec) = spec {
            write_atomic(&dir.join(SPEC_FILE), generator_spec_to_manifest(spec).as_bytes())?;
        }
        let gallery = pca_coordinates(&corpus);
        write_atomic(&dir.join(GALLERY_FILE), gallery_manifest(&gallery).as_bytes())?;
        write_atomic(&dir.join(MARKS_FILE), b"")?;
        write_atomic(&dir.join(HISTORY_FILE), b"")?;
        let session = Self {
            id,
            dir,
            source,
            corpus,
            gallery,
            marks: Marks::new(),
            fitted: None,
            history: Vec::new(),
            preview_version: AtomicU64::new(0),
        };
        write_atomic(&session.dir.join(SESSION_FILE), session.summary_manifest().as_bytes())?;
        Ok(session)
    }

    fn load(id: String, dir: PathBuf) -> AppResult<Self> {
        let summary = ManifestReader::parse_kind(&read_text(&dir.join(SESSION_FILE))?, KIND_SESSION)?;
        let source = Source::parse(summary.string("source")?)?;
        let corpus = Corpus::load(&dir.join(CORPUS_FILE))?;
        let gallery = gallery_from_manifest(&read_text(&dir.join(GALLERY_FILE))?, corpus.len())?;
        let marks = Marks::parse(&read_text(&dir.join(MARKS_FILE))?, &corpus)?;
        let model_path = dir.join(MODEL_FILE);
        let fitted = if model_path.exists() {
            let model = filter_model_from_manifest(&read_text(&model_path)?)?;
            let inv_path = dir.join(INVERTER_FILE);
            let inverter = if inv_path.exists() {
                Some(inverter_from_manifest(&read_text(&inv_path)?)?)
            } else {
                None
            };
            let similarities = crate::workflow::similarities(&corpus, &model, inverter.as_ref())?;
            Some(Fitted {
                model,
                inverter,
                similarities,
            })
        } else {
            None
        };
        let history = read_text(&dir.join(HISTORY_FILE))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(FitEvent::from_line)
            .collect::<AppResult<Vec<_>>>()?;
        Ok(Self {
            id,
            dir,
            source,
            corpus,
            gallery,
            marks,
            fitted,
            history,
            preview_version: AtomicU64::new(0),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn gallery(&self) -> &[[f64; 2]] {
        &self.gallery
    }

    pub fn marks(&self) -> &Marks {
        &self.marks
    }

    pub fn fitted(&self) -> Option<&Fitted> {
        self.fitted.as_ref()
    }

    pub fn history(&self) -> &[FitEvent] {
        &self.history
    }

    /// Strictly increasing per process, so clients can drop stale previews.
    pub fn next_preview_version(&self) -> u64 {
        self.preview_version.fetch_add(1, Ordering::SeqCst) + 1
    }

    pub fn summary_manifest(&self) -> String {
        ManifestWriter::new(KIND_SESSION)
            .string("session_id", &self.id)
            .string("source", self.source.as_str())
            .uint("count", self.corpus.len() as u64)
            .uint("dim", self.corpus.dim() as u64)
            .uint("data_dim", self.corpus.data_dim() as u64)
            .boolean("labels", self.corpus.labels().is_some())
            .uint("negatives", self.marks.negatives() as u64)
            .uint("positives", self.marks.positives() as u64)
            .uint("fits", self.history.len() as u64)
            .finish()
    }

    /// Setting the same mark twice leaves the session unchanged.
    pub fn mark(&mut self, sample_id: &str, mark: Mark) -> AppResult<()> {
        let row = self.corpus.index_of(sample_id)?;
        if self.marks.get(row) == mark {
            return Ok(());
        }
        let mut next = self.marks.clone();
        next.set(row, mark);
        write_atomic(&self.dir.join(MARKS_FILE), next.to_text().as_bytes())?;
        self.marks = next;
        write_atomic(&self.dir.join(SESSION_FILE), self.summary_manifest().as_bytes())
    }

    /// Replaces the current model and appends a history event.
    pub fn fit(&mut self, opts: &FitOptions) -> AppResult<FitOutcome> {
        let outcome = fit_model(&self.corpus, &self.marks, opts)?;
        let similarities = crate::workflow::similarities(&self.corpus, &outcome.model, outcome.inverter.as_ref())?;
        let manifest = filter_model_to_manifest(&outcome.model);
        write_atomic(&self.dir.join(MODEL_FILE), manifest.as_bytes())?;
        let inv_path = self.dir.join(INVERTER_FILE);
        match &outcome.inverter {
            Some(inv) => write_atomic(&inv_path, inverter_to_manifest(inv).as_bytes())?,
            None if inv_path.exists() => fs::remove_file(&inv_path).map_err(|e| AppError::io(&inv_path, e))?,
            None => {}
        }
        let event = FitEvent {
            fit_index: self.history.len() as u64 + 1,
            urf: opts.urf.as_str().into(),
            lpf: opts.lpf.as_str().into(),
            augment: opts.augment,
            seed: opts.seed,
            alpha: opts.alpha,
            n_negative: outcome.n_negative,
            n_positive: outcome.n_positive,
            threshold: outcome.model.threshold(),
            model_sha256: sha256_hex(manifest.as_bytes()),
        };
        let history_path = self.dir.join(HISTORY_FILE);
        let mut file = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&history_path)
            .map_err(|e| AppError::io(&history_path, e))?;
        writeln!(file, "{}", event.to_json()).map_err(|e| AppError::io(&history_path, e))?;
        self.history.push(event);
        self.fitted = Some(Fitted {
            model: outcome.model.clone(),
            inverter: outcome.inverter.clone(),
            similarities,
        });
        write_atomic(&self.dir.join(SESSION_FILE), self.summary_manifest().as_bytes())?;
        Ok(outcome)
    }
}

pub type SharedSession = Arc<RwLock<Session>>;

/// All sessions under one data directory. Each session sits behind its own
/// reader-writer lock; sessions not yet touched in this process are loaded
/// from disk on first access.
#[derive(Debug)]
pub struct SessionStore {
    root: PathBuf,
    open: Mutex<HashMap<String, SharedSession>>,
    counter: AtomicU64,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

impl SessionStore {
    pub fn new(data_dir: impl Into<PathBuf>) -> AppResult<Self> {
        let root = data_dir.into().join("sessions");
        fs::create_dir_all(&root).map_err(|e| AppError::io(&root, e))?;
        Ok(Self {
            root,
            open: Mutex::new(HashMap::new()),
            counter: AtomicU64::new(0),
        })
    }

    fn fresh_id(&self, corpus: &Corpus) -> String {
        let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let mut seed = format!("{nanos}:{n}:").into_bytes();
        seed.extend_from_slice(&(corpus.len() as u64).to_le_bytes());
        sha256_hex(&seed)[..16].to_owned()
    }

    pub fn create(&self, source: Source, corpus: Corpus, spec: Option<&GeneratorSpec>) -> AppResult<SharedSession> {
        let mut id = self.fresh_id(&corpus);
        while self.root.join(&id).exists() {
            id = self.fresh_id(&corpus);
        }
        let session = Session::create(id.clone(), self.root.join(&id), source, corpus, spec)?;
        let shared = Arc::new(RwLock::new(session));
        self.open.lock().expect("session table poisoned").insert(id, shared.clone());
        Ok(shared)
    }

    pub fn get(&self, id: &str) -> AppResult<SharedSession> {
        let not_found = || AppError::NotFound(format!("session `{id}`"));
        if !valid_id(id) {
            return Err(not_found());
        }
        let mut open = self.open.lock().expect("session table poisoned");
        if let Some(s) = open.get(id) {
            return Ok(s.clone());
        }
        let dir = self.root.join(id);
        if !dir.join(SESSION_FILE).exists() {
            return Err(not_found());
        }
        let shared = Arc::new(RwLock::new(Session::load(id.to_owned(), dir)?));
        open.insert(id.to_owned(), shared.clone());
        Ok(shared)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fast_core::synthgen::{generate, Nonlinearity};

    fn corpus() -> (GeneratorSpec, Corpus) {
        let spec = GeneratorSpec::random(4, 5, Nonlinearity::Tanh, 0.3, 3).unwrap();
        let corpus = Corpus::from_batch(&generate(&spec, 120, 4).unwrap()).unwrap();
        (spec, corpus)
    }

    #[test]
    fn reload_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let (spec, corpus) = corpus();
        let labels = corpus.labels().unwrap().to_vec();
        let store = SessionStore::new(dir.path()).unwrap();
        let shared = store.create(Source::Synthetic, corpus, Some(&spec)).unwrap();
        let id = {
            let mut s = shared.blocking_write();
            let marks = Marks::sample_from_labels(&labels, 5, 5, 1).unwrap();
            for r in marks.rows_with(Mark::Negative) {
                s.mark(&r.to_string(), Mark::Negative).unwrap();
            }
            for r in marks.rows_with(Mark::Positive) {
                s.mark(&r.to_string(), Mark::Positive).unwrap();
            }
            s.fit(&FitOptions::default()).unwrap();
            s.fit(&FitOptions::default()).unwrap();
            s.id().to_owned()
        };
        let before = shared.blocking_read();
        let fresh = SessionStore::new(dir.path()).unwrap();
        let loaded = fresh.get(&id).unwrap();
        let after = loaded.blocking_read();
        assert_eq!(after.marks(), before.marks());
        assert_eq!(after.history(), before.history());
        assert_eq!(after.history().len(), 2);
        assert_eq!(after.fitted().unwrap().model, before.fitted().unwrap().model);
        assert_eq!(after.gallery(), before.gallery());
        assert_eq!(after.corpus(), before.corpus());
        assert!(matches!(fresh.get("0123456789abcdef"), Err(AppError::NotFound(_))));
        assert!(matches!(fresh.get("../etc"), Err(AppError::NotFound(_))));
    }

    #[test]
    fn unknown_sample_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let (_, corpus) = corpus();
        let store = SessionStore::new(dir.path()).unwrap();
        let shared = store.create(Source::Upload, corpus, None).unwrap();
        let mut s = shared.blocking_write();
        assert!(matches!(s.mark("120", Mark::Negative), Err(AppError::NotFound(_))));
        assert!(matches!(s.fit(&FitOptions::default()), Err(AppError::Conflict(_))));
        assert!(s.history().is_empty());
    }
}
