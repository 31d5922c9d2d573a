//! Versioned text manifests.
//!
//! Manifests are JSON objects written with a fixed key order, one key per
//! line, and floats in `{:.16e}` (17 significant digits) so that identical
//! values always produce identical bytes and parse back bit-exactly.

use serde_json::{Map, Value};

use crate::error::{FastError, Result};
use crate::latent::{FilterModel, LatentVector, UndesiredDirection, UrfMethod};
use crate::lpf::LinearInverter;
use crate::metrics::EvalReport;
use crate::synthgen::{GeneratorSpec, Nonlinearity};
use crate::theory::BoundReport;

pub const FORMAT_VERSION: u64 = 1;

pub const KIND_FILTER_MODEL: &str = "filter_model";
pub const KIND_INVERTER: &str = "linear_inverter";
pub const KIND_EVAL_REPORT: &str = "eval_report";
pub const KIND_BOUND_REPORT: &str = "bound_report";
pub const KIND_GENERATOR_SPEC: &str = "generator_spec";

/// Exact decimal form of a finite float, also accepted by JSON parsers.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "\"nan\"".to_owned()
    } else if v > 0.0 {
        "\"inf\"".to_owned()
    } else {
        "\"-inf\"".to_owned()
    }
}

/// Builder for one manifest document. Keys appear in insertion order.
#[derive(Debug)]
pub struct ManifestWriter {
    fields: Vec<(String, String)>,
}

impl ManifestWriter {
    pub fn new(kind: &str) -> Self {
        let mut w = Self { fields: Vec::new() };
        w.uint("format_version", FORMAT_VERSION);
        w.string("kind", kind);
        w
    }

    fn raw(&mut self, key: &str, value: String) -> &mut Self {
        self.fields.push((key.to_owned(), value));
        self
    }

    pub fn uint(&mut self, key: &str, v: u64) -> &mut Self {
        self.raw(key, v.to_string())
    }

    pub fn boolean(&mut self, key: &str, v: bool) -> &mut Self {
        self.raw(key, v.to_string())
    }

    pub fn string(&mut self, key: &str, v: &str) -> &mut Self {
        self.raw(key, Value::String(v.to_owned()).to_string())
    }

    pub fn float(&mut self, key: &str, v: f64) -> &mut Self {
        self.raw(key, format_f64(v))
    }

    pub fn opt_float(&mut self, key: &str, v: Option<f64>) -> &mut Self {
        self.raw(key, v.map_or_else(|| "null".to_owned(), format_f64))
    }

    pub fn floats(&mut self, key: &str, v: &[f64]) -> &mut Self {
        let items: Vec<String> = v.iter().map(|x| format_f64(*x)).collect();
        self.raw(key, format!("[{}]", items.join(", ")))
    }

    pub fn strings(&mut self, key: &str, v: &[String]) -> &mut Self {
        let items: Vec<String> = v.iter().map(|s| Value::String(s.clone()).to_string()).collect();
        self.raw(key, format!("[{}]", items.join(", ")))
    }

    /// Pre-rendered JSON value, e.g. a nested manifest.
    pub fn json(&mut self, key: &str, rendered: &str) -> &mut Self {
        self.raw(key, rendered.to_owned())
    }

    pub fn finish(&self) -> String {
        let mut out = String::from("{\n");
        for (i, (k, v)) in self.fields.iter().enumerate() {
            let sep = if i + 1 == self.fields.len() { "" } else { "," };
            out.push_str(&format!("  {}: {}{}\n", Value::String(k.clone()), v, sep));
        }
        out.push_str("}\n");
        out
    }
}

/// Parsed manifest with typed accessors.
#[derive(Debug, Clone)]
pub struct ManifestReader {
    map: Map<String, Value>,
}

impl ManifestReader {
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| FastError::Manifest(e.to_string()))?;
        match value {
            Value::Object(map) => Ok(Self { map }),
            _ => Err(FastError::Manifest("manifest must be a JSON object".into())),
        }
    }

    /// Parses and checks `format_version` and `kind`.
    pub fn parse_kind(text: &str, kind: &str) -> Result<Self> {
        let r = Self::parse(text)?;
        let version = r.uint("format_version")?;
        if version != FORMAT_VERSION {
            return Err(FastError::Manifest(format!("unsupported format_version {version}")));
        }
        let found = r.string("kind")?;
        if found != kind {
            return Err(FastError::Manifest(format!("expected kind `{kind}`, found `{found}`")));
        }
        Ok(r)
    }

    pub fn map(&self) -> &Map<String, Value> {
        &self.map
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn get(&self, key: &str) -> Result<&Value> {
        self.map
            .get(key)
            .ok_or_else(|| FastError::Manifest(format!("missing key `{key}`")))
    }

    fn bad(key: &str, what: &str) -> FastError {
        FastError::Manifest(format!("key `{key}` must be {what}"))
    }

    pub fn uint(&self, key: &str) -> Result<u64> {
        self.get(key)?.as_u64().ok_or_else(|| Self::bad(key, "a nonnegative integer"))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        usize::try_from(self.uint(key)?).map_err(|_| Self::bad(key, "a representable size"))
    }

    pub fn boolean(&self, key: &str) -> Result<bool> {
        self.get(key)?.as_bool().ok_or_else(|| Self::bad(key, "a boolean"))
    }

    pub fn string(&self, key: &str) -> Result<&str> {
        self.get(key)?.as_str().ok_or_else(|| Self::bad(key, "a string"))
    }

    pub fn float(&self, key: &str) -> Result<f64> {
        value_f64(self.get(key)?).ok_or_else(|| Self::bad(key, "a number"))
    }

    pub fn opt_float(&self, key: &str) -> Result<Option<f64>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => value_f64(v).map(Some).ok_or_else(|| Self::bad(key, "a number or null")),
        }
    }

    pub fn floats(&self, key: &str) -> Result<Vec<f64>> {
        let arr = self.get(key)?.as_array().ok_or_else(|| Self::bad(key, "an array"))?;
        arr.iter()
            .map(|v| value_f64(v).ok_or_else(|| Self::bad(key, "an array of numbers")))
            .collect()
    }

    pub fn strings(&self, key: &str) -> Result<Vec<String>> {
        let arr = self.get(key)?.as_array().ok_or_else(|| Self::bad(key, "an array"))?;
        arr.iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| Self::bad(key, "an array of strings"))
            })
            .collect()
    }
}

/// Numbers, plus the quoted spellings used for non-finite values.
pub fn value_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => parse_special_f64(s),
        _ => None,
    }
}

pub fn parse_special_f64(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        other => other.parse().ok(),
    }
}

pub fn filter_model_to_manifest(model: &FilterModel) -> String {
    let u = model.direction();
    ManifestWriter::new(KIND_FILTER_MODEL)
        .uint("dim", model.dim() as u64)
        .string("method", u.method().as_str())
        .boolean("augmented", u.augmented())
        .string("lpf_id", model.lpf_id())
        .float("threshold", model.threshold())
        .floats("direction", u.direction().as_slice())
        .finish()
}

pub fn filter_model_from_manifest(text: &str) -> Result<FilterModel> {
    let r = ManifestReader::parse_kind(text, KIND_FILTER_MODEL)?;
    let dim = r.usize("dim")?;
    let direction = LatentVector::new(r.floats("direction")?)?;
    direction.check_dim(dim)?;
    let method = UrfMethod::parse(r.string("method")?)?;
    let u = UndesiredDirection::new(direction, method, r.boolean("augmented")?)?;
    FilterModel::new(u, r.float("threshold")?, r.string("lpf_id")?)
}

pub fn inverter_to_manifest(inv: &LinearInverter) -> String {
    ManifestWriter::new(KIND_INVERTER)
        .uint("latent_dim", inv.latent_dim() as u64)
        .uint("data_dim", inv.data_dim() as u64)
        .float("ridge", inv.ridge())
        .float("fit_residual", inv.fit_residual())
        .floats("intercept", inv.intercept().as_slice())
        .floats("weights", inv.weights())
        .finish()
}

pub fn inverter_from_manifest(text: &str) -> Result<LinearInverter> {
    let r = ManifestReader::parse_kind(text, KIND_INVERTER)?;
    LinearInverter::from_parts(
        r.floats("weights")?,
        r.usize("latent_dim")?,
        r.usize("data_dim")?,
        LatentVector::new(r.floats("intercept")?)?,
        r.float("ridge")?,
        r.float("fit_residual")?,
    )
}

pub fn eval_report_to_manifest(report: &EvalReport) -> String {
    ManifestWriter::new(KIND_EVAL_REPORT)
        .float("recall", report.recall)
        .float("auc", report.auc)
        .opt_float("fid", report.fid)
        .opt_float("density", report.density)
        .opt_float("coverage", report.coverage)
        .uint("n_eval", report.n_eval as u64)
        .uint("n_kept", report.n_kept as u64)
        .uint("n_blocked", report.n_blocked as u64)
        .finish()
}

pub fn eval_report_from_manifest(text: &str) -> Result<EvalReport> {
    let r = ManifestReader::parse_kind(text, KIND_EVAL_REPORT)?;
    Ok(EvalReport {
        recall: r.float("recall")?,
        auc: r.float("auc")?,
        fid: r.opt_float("fid")?,
        density: r.opt_float("density")?,
        coverage: r.opt_float("coverage")?,
        n_eval: r.usize("n_eval")?,
        n_kept: r.usize("n_kept")?,
        n_blocked: r.usize("n_blocked")?,
    })
}

/// Header and one row of a delimited table, for sweep scripts.
pub fn eval_report_table(report: &EvalReport) -> (String, String) {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.16e}"));
    (
        "recall,auc,fid,density,coverage,n_eval,n_kept,n_blocked".to_owned(),
        format!(
            "{:.16e},{:.16e},{},{},{},{},{},{}",
            report.recall,
            report.auc,
            opt(report.fid),
            opt(report.density),
            opt(report.coverage),
            report.n_eval,
            report.n_kept,
            report.n_blocked
        ),
    )
}

pub fn bound_report_to_manifest(report: &BoundReport) -> String {
    ManifestWriter::new(KIND_BOUND_REPORT)
        .boolean("holds", report.holds)
        .strings("worst_event", &report.worst_event)
        .float("lhs", report.lhs)
        .float("rhs", report.rhs)
        .float("slack", report.slack)
        .float("eps", report.eps)
        .float("eps1", report.eps1)
        .float("eps2", report.eps2)
        .uint("events_checked", report.events_checked)
        .uint("violations", report.violations)
        .finish()
}

pub fn bound_report_from_manifest(text: &str) -> Result<BoundReport> {
    let r = ManifestReader::parse_kind(text, KIND_BOUND_REPORT)?;
    Ok(BoundReport {
        holds: r.boolean("holds")?,
        worst_event: r.strings("worst_event")?,
        lhs: r.float("lhs")?,
        rhs: r.float("rhs")?,
        slack: r.float("slack")?,
        eps: r.float("eps")?,
        eps1: r.float("eps1")?,
        eps2: r.float("eps2")?,
        events_checked: r.uint("events_checked")?,
        violations: r.uint("violations")?,
    })
}

pub fn generator_spec_to_manifest(spec: &GeneratorSpec) -> String {
    ManifestWriter::new(KIND_GENERATOR_SPEC)
        .uint("latent_dim", spec.latent_dim() as u64)
        .uint("data_dim", spec.data_dim() as u64)
        .string("nonlinearity", spec.nonlinearity().as_str())
        .uint("seed", spec.seed())
        .float("feature_offset", spec.feature_offset())
        .floats("feature_direction", spec.feature_direction().as_slice())
        .floats("offset", spec.offset())
        .floats("mixing_matrix", spec.mixing_matrix())
        .finish()
}

pub fn generator_spec_from_manifest(text: &str) -> Result<GeneratorSpec> {
    let r = ManifestReader::parse_kind(text, KIND_GENERATOR_SPEC)?;
    GeneratorSpec::new(
        r.usize("latent_dim")?,
        r.usize("data_dim")?,
        r.floats("mixing_matrix")?,
        r.floats("offset")?,
        Nonlinearity::parse(r.string("nonlinearity")?)?,
        LatentVector::new(r.floats("feature_direction")?)?,
        r.float("feature_offset")?,
        r.uint("seed")?,
    )
}
