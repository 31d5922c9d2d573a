//! User marks on corpus rows.
//!
//! The text form is one `sample_id,verdict` pair per line, rows ascending.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use fast_core::{FeedbackSet, SampleId};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    /// Clean sample, kept by the user.
    Positive,
    /// Sample carrying the undesired feature.
    Negative,
    Unmarked,
}

impl Mark {
    pub fn as_str(self) -> &'static str {
        match self {
            Mark::Positive => "positive",
            Mark::Negative => "negative",
            Mark::Unmarked => "unmarked",
        }
    }

    pub fn parse(s: &str) -> AppResult<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "keep" => Ok(Mark::Positive),
            "negative" | "neg" | "block" => Ok(Mark::Negative),
            "unmarked" | "none" => Ok(Mark::Unmarked),
            other => Err(AppError::Data(format!("unknown mark `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Marks {
    rows: BTreeMap<usize, Mark>,
}

impl Marks {
    pub fn new() -> Self {
        Self::default()
    }

    /// Overwrites any earlier mark on the row; `Unmarked` clears it.
    pub fn set(&mut self, row: usize, mark: Mark) {
        match mark {
            Mark::Unmarked => {
                self.rows.remove(&row);
            }
            m => {
                self.rows.insert(row, m);
            }
        }
    }

    pub fn get(&self, row: usize) -> Mark {
        self.rows.get(&row).copied().unwrap_or(Mark::Unmarked)
    }

    pub fn rows_with(&self, mark: Mark) -> Vec<usize> {
        self.rows.iter().filter(|(_, m)| **m == mark).map(|(r, _)| *r).collect()
    }

    pub fn negatives(&self) -> usize {
        self.rows.values().filter(|m| **m == Mark::Negative).count()
    }

    pub fn positives(&self) -> usize {
        self.rows.values().filter(|m| **m == Mark::Positive).count()
    }

    pub fn parse(text: &str, corpus: &Corpus) -> AppResult<Self> {
        let mut marks = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, verdict) = line
                .split_once(',')
                .ok_or_else(|| AppError::Data(format!("marks line {}: expected `sample_id,verdict`", n + 1)))?;
            let row = corpus.index_of(id.trim())?;
            marks.set(row, Mark::parse(verdict)?);
        }
        Ok(marks)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (row, mark) in &self.rows {
            let _ = writeln!(out, "{row},{}", mark.as_str());
        }
        out
    }

    /// Feedback in ascending row order, so that the same marks always give
    /// the same fit regardless of the order they were made in.
    pub fn feedback(&self, corpus: &Corpus) -> AppResult<FeedbackSet> {
        if self.negatives() == 0 {
            return Err(AppError::Conflict("fitting needs at least one negative mark".into()));
        }
        let collect = |mark: Mark| -> AppResult<Vec<(SampleId, fast_core::LatentVector)>> {
            self.rows_with(mark)
                .into_iter()
                .map(|r| {
                    if r >= corpus.len() {
                        return Err(AppError::NotFound(format!("sample `{r}`")));
                    }
                    Ok((Corpus::sample_id(r), corpus.latent(r)))
                })
                .collect()
        };
        Ok(FeedbackSet::new(collect(Mark::Positive)?, collect(Mark::Negative)?)?)
    }

    /// Simulated user: marks `s_neg` labeled-undesired and `s_pos` clean rows,
    /// drawn uniformly without replacement.
    pub fn sample_from_labels(labels: &[bool], s_pos: usize, s_neg: usize, seed: u64) -> AppResult<Self> {
        let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
        let pos: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
        if neg.len() < s_neg || pos.len() < s_pos {
            return Err(AppError::Data(format!(
                "corpus has {} undesired and {} clean rows; {s_neg} and {s_pos} requested",
                neg.len(),
                pos.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut marks = Self::new();
        for j in sample_indices(&mut rng, neg.len(), s_neg) {
            marks.set(neg[j], Mark::Negative);
        }
        for j in sample_indices(&mut rng, pos.len(), s_pos) {
            marks.set(pos[j], Mark::Positive);
        }
        Ok(marks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(n: usize) -> Corpus {
        let latents: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        Corpus::new(1, 1, latents.clone(), latents, Some((0..n).map(|i| i % 3 == 0).collect())).unwrap()
    }

    #[test]
    fn last_write_wins() {
        let mut m = Marks::new();
        m.set(3, Mark::Negative);
        m.set(3, Mark::Positive);
        assert_eq!(m.get(3), Mark::Positive);
        m.set(3, Mark::Unmarked);
        assert_eq!(m.get(3), Mark::Unmarked);
        assert_eq!(m.positives() + m.negatives(), 0);
    }

    #[test]
    fn text_round_trip() {
        let c = corpus(10);
        let m = Marks::parse("# header\n4,negative\n1, positive\n9,neg\n", &c).unwrap();
        assert_eq!(m.to_text(), "1,positive\n4,negative\n9,negative\n");
        assert_eq!(Marks::parse(&m.to_text(), &c).unwrap(), m);
        assert!(Marks::parse("10,negative\n", &c).is_err());
        assert!(Marks::parse("1;negative\n", &c).is_err());
    }

    #[test]
    fn feedback_needs_a_negative() {
        let c = corpus(5);
        let mut m = Marks::new();
        m.set(1, Mark::Positive);
        assert!(matches!(m.feedback(&c), Err(AppError::Conflict(_))));
        m.set(2, Mark::Negative);
        let fb = m.feedback(&c).unwrap();
        assert_eq!(fb.negatives()[0].0.as_str(), "2");
    }

    #[test]
    fn sampling_respects_labels() {
        let c = corpus(60);
        let labels = c.labels().unwrap();
        let m = Marks::sample_from_labels(labels, 5, 4, 1).unwrap();
        assert_eq!((m.positives(), m.negatives()), (5, 4));
        for r in m.rows_with(Mark::Negative) {
            assert!(labels[r]);
        }
        assert_eq!(m, Marks::sample_from_labels(labels, 5, 4, 1).unwrap());
        assert!(Marks::sample_from_labels(labels, 0, 21, 1).is_err());
    }
}
