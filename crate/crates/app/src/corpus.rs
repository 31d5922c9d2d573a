//! Binary corpus files.
//!
//! ```text
//! FAST-CORPUS
//! format_version=1
//! dim=<d>
//! data_dim=<p>
//! count=<n>
//! dtype=float64
//! byte_order=little-endian
//! labels=present|absent
//! end_header
//! <n*d latents, then n*p samples, row-major little-endian f64>
//! <n label bytes (0 or 1), only when labels=present>
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fast_core::lpf::{SampleCorpus, SamplePair};
use fast_core::metrics::LabeledSet;
use fast_core::synthgen::LabeledBatch;
use fast_core::{LatentVector, SampleId};

use crate::error::{AppError, AppResult};

pub const MAGIC: &str = "FAST-CORPUS";
pub const CORPUS_VERSION: u64 = 1;
const END_HEADER: &str = "end_header";

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    dim: usize,
    data_dim: usize,
    /// Row-major `count x dim`.
    latents: Vec<f64>,
    /// Row-major `count x data_dim`.
    samples: Vec<f64>,
    labels: Option<Vec<bool>>,
}

impl Corpus {
    pub fn new(
        dim: usize,
        data_dim: usize,
        latents: Vec<f64>,
        samples: Vec<f64>,
        labels: Option<Vec<bool>>,
    ) -> AppResult<Self> {
        if dim == 0 || data_dim == 0 {
            return Err(AppError::Data("corpus dimensions must be positive".into()));
        }
        if latents.len() % dim != 0 {
            return Err(AppError::Data("latent block is not a whole number of rows".into()));
        }
        let count = latents.len() / dim;
        if samples.len() != count * data_dim {
            return Err(AppError::Data(format!(
                "sample block holds {} values, expected {}",
                samples.len(),
                count * data_dim
            )));
        }
        if let Some(l) = &labels {
            if l.len() != count {
                return Err(AppError::Data(format!("{} labels for {count} rows", l.len())));
            }
        }
        if latents.iter().chain(&samples).any(|v| !v.is_finite()) {
            return Err(AppError::Data("corpus contains non-finite values".into()));
        }
        Ok(Self {
            dim,
            data_dim,
            latents,
            samples,
            labels,
        })
    }

    pub fn from_batch(batch: &LabeledBatch) -> AppResult<Self> {
        let dim = batch.latents.first().map_or(0, LatentVector::dim);
        let data_dim = batch.samples.first().map_or(0, Vec::len);
        Self::new(
            dim,
            data_dim,
            batch.latents.iter().flat_map(|z| z.as_slice().iter().copied()).collect(),
            batch.samples.iter().flatten().copied().collect(),
            Some(batch.labels.clone()),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }

    pub fn len(&self) -> usize {
        self.latents.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn latent_row(&self, i: usize) -> &[f64] {
        &self.latents[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sample_row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.data_dim..(i + 1) * self.data_dim]
    }

    pub fn latent(&self, i: usize) -> LatentVector {
        LatentVector::new(self.latent_row(i).to_vec()).expect("validated at construction")
    }

    pub fn latents(&self) -> Vec<LatentVector> {
        (0..self.len()).map(|i| self.latent(i)).collect()
    }

    pub fn samples(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.sample_row(i).to_vec()).collect()
    }

    /// Sample ids are row indices.
    pub fn sample_id(i: usize) -> SampleId {
        SampleId(i.to_string())
    }

    pub fn index_of(&self, id: &str) -> AppResult<usize> {
        match id.parse::<usize>() {
            Ok(i) if i < self.len() && i.to_string() == id => Ok(i),
            _ => Err(AppError::NotFound(format!("sample `{id}`"))),
        }
    }

    pub fn pairs(&self) -> Vec<SamplePair> {
        (0..self.len())
            .map(|i| SamplePair {
                latent: self.latent(i),
                sample: self.sample_row(i).to_vec(),
                sample_id: Self::sample_id(i),
            })
            .collect()
    }

    pub fn sample_corpus(&self) -> AppResult<SampleCorpus> {
        Ok(SampleCorpus::new(self.pairs())?)
    }

    /// Rows whose label is `false`; the human-level reference set.
    pub fn clean_samples(&self) -> AppResult<Vec<Vec<f64>>> {
        let labels = self.require_labels()?;
        Ok((0..self.len()).filter(|&i| !labels[i]).map(|i| self.sample_row(i).to_vec()).collect())
    }

    pub fn require_labels(&self) -> AppResult<&[bool]> {
        self.labels
            .as_deref()
            .ok_or_else(|| AppError::Data("corpus carries no labels".into()))
    }

    /// Labeled evaluation set with latents already mapped through `project`.
    pub fn labeled_set(&self, projected: Vec<LatentVector>) -> AppResult<LabeledSet> {
        Ok(LabeledSet {
            latents: projected,
            samples: self.samples(),
            labels: self.require_labels()?.to_vec(),
        })
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, rows: &[usize]) -> AppResult<Self> {
        Self::new(
            self.dim,
            self.data_dim,
            rows.iter().flat_map(|&i| self.latent_row(i).iter().copied()).collect(),
            rows.iter().flat_map(|&i| self.sample_row(i).iter().copied()).collect(),
            self.labels.as_ref().map(|l| rows.iter().map(|&i| l[i]).collect()),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!(
            "{MAGIC}\nformat_version={CORPUS_VERSION}\ndim={}\ndata_dim={}\ncount={}\ndtype=float64\nbyte_order=little-endian\nlabels={}\n{END_HEADER}\n",
            self.dim,
            self.data_dim,
            self.len(),
            if self.labels.is_some() { "present" } else { "absent" }
        )
        .into_bytes();
        out.reserve((self.latents.len() + self.samples.len()) * 8 + self.len());
        for v in self.latents.iter().chain(&self.samples) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(labels) = &self.labels {
            out.extend(labels.iter().map(|l| u8::from(*l)));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> AppResult<Self> {
        let (header, payload) = split_header(bytes)?;
        let dim = header_usize(&header, "dim")?;
        let data_dim = header_usize(&header, "data_dim")?;
        let count = header_usize(&header, "count")?;
        let version = header_usize(&header, "format_version")?;
        if version as u64 != CORPUS_VERSION {
            return Err(AppError::Data(format!("unsupported corpus format_version {version}")));
        }
        expect_header(&header, "dtype", "float64")?;
        expect_header(&header, "byte_order", "little-endian")?;
        let has_labels = match header_str(&header, "labels")? {
            "present" => true,
            "absent" => false,
            other => return Err(AppError::Data(format!("bad labels field `{other}`"))),
        };
        let floats = count
            .checked_mul(dim + data_dim)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| AppError::Data("corpus header sizes overflow".into()))?;
        let expected = floats + if has_labels { count } else { 0 };
        if payload.len() != expected {
            return Err(AppError::Data(format!(
                "payload holds {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let values: Vec<f64> = payload[..floats]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let (latents, samples) = values.split_at(count * dim);
        let labels = if has_labels {
            let raw = &payload[floats..];
            if raw.iter().any(|b| *b > 1) {
                return Err(AppError::Data("label bytes must be 0 or 1".into()));
            }
            Some(raw.iter().map(|b| *b == 1).collect())
        } else {
            None
        };
        Self::new(dim, data_dim, latents.to_vec(), samples.to_vec(), labels)
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        fs::write(path, self.to_bytes()).map_err(|e| AppError::io(path, e))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn split_header(bytes: &[u8]) -> AppResult<(BTreeMap<String, String>, &[u8])> {
    let mut header = BTreeMap::new();
    let mut pos = 0;
    let mut first = true;
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| AppError::Data("corpus header is truncated".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| AppError::Data("corpus header is not UTF-8".into()))?;
        pos += end + 1;
        if first {
            if line != MAGIC {
                return Err(AppError::Data("not a corpus file (bad magic line)".into()));
            }
            first = false;
            continue;
        }
        if line == END_HEADER {
            return Ok((header, &bytes[pos..]));
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| AppError::Data(format!("bad header line `{line}`")))?;
        if header.insert(k.to_owned(), v.to_owned()).is_some() {
            return Err(AppError::Data(format!("duplicate header key `{k}`")));
        }
    }
}

fn header_str<'a>(h: &'a BTreeMap<String, String>, key: &str) -> AppResult<&'a str> {
    h.get(key)
        .map(String::as_str)
        .ok_or_else(|| AppError::Data(format!("corpus header lacks `{key}`")))
}

fn header_usize(h: &BTreeMap<String, String>, key: &str) -> AppResult<usize> {
    header_str(h, key)?
        .parse()
        .map_err(|_| AppError::Data(format!("corpus header `{key}` is not an integer")))
}

fn expect_header(h: &BTreeMap<String, String>, key: &str, want: &str) -> AppResult<()> {
    let got = header_str(h, key)?;
    if got != want {
        return Err(AppError::Data(format!("unsupported {key} `{got}`")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(labels: Option<Vec<bool>>) -> Corpus {
        Corpus::new(2, 1, vec![0.1, -0.0, f64::MAX, 5e-324], vec![1.0 / 3.0, -7.5], labels).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for c in [tiny(None), tiny(Some(vec![true, false]))] {
            let back = Corpus::from_bytes(&c.to_bytes()).unwrap();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back.latents), bits(&c.latents));
            assert_eq!(bits(&back.samples), bits(&c.samples));
            assert_eq!(back.labels, c.labels);
        }
    }

    #[test]
    fn header_layout() {
        let bytes = tiny(Some(vec![true, false])).to_bytes();
        let text = String::from_utf8_lossy(&bytes[..120]);
        assert!(text.starts_with("FAST-CORPUS\nformat_version=1\ndim=2\ndata_dim=1\ncount=2\n"));
        let header_len = bytes.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        assert_eq!(bytes.len() - header_len, 2 * (2 + 1) * 8 + 2);
    }

    #[test]
    fn rejects_damaged_files() {
        let good = tiny(Some(vec![true, false])).to_bytes();
        assert!(Corpus::from_bytes(&good[..good.len() - 1]).is_err());
        let mut extra = good.clone();
        extra.push(0);
        assert!(Corpus::from_bytes(&extra).is_err());
        let swapped = String::from_utf8_lossy(&good).replace("little-endian", "big-endian");
        assert!(Corpus::from_bytes(swapped.as_bytes()).is_err());
        assert!(Corpus::from_bytes(b"NOT-A-CORPUS\n").is_err());
        let mut bad_label = good;
        *bad_label.last_mut().unwrap() = 7;
        assert!(Corpus::from_bytes(&bad_label).is_err());
    }

    #[test]
    fn ids_are_row_indices() {
        let c = tiny(None);
        assert_eq!(c.index_of("1").unwrap(), 1);
        assert!(c.index_of("2").is_err());
        assert!(c.index_of("01").is_err());
        assert!(c.index_of("x").is_err());
    }
}
