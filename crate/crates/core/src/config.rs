//! Experiment configuration files and run manifests.
//!
//! A config is one JSON document:
//!
//! ```json
//! {
//!   "model": {
//!     "covariance": { "kind": "ar1", "p": 64, "rho": 0.5 },
//!     "family": "gaussian"
//!   },
//!   "mask": { "kind": "banded", "bandwidth": 5 },
//!   "n": 256,
//!   "trials": 100,
//!   "seed": 7,
//!   "centered": false,
//!   "epsilon": 0.5,
//!   "scaling": { "axis": "n", "values": [128, 256, 512] }
//! }
//! ```
//!
//! Covariance kinds: `identity`, `ar1` (`rho`), `decaying` (`alpha`),
//! `rank_one_plus` (`lambda`, `delta`), `custom` (`path`). Families:
//! `"gaussian"`, `"sphere_bounded"`, `"student_t"` or an object
//! `{"kind": "student_t", "df": 9}`. Mask kinds: `banded` and `tapered`
//! (`bandwidth`), `all_ones`, `custom` (`path`). Relative paths resolve
//! against the config file's directory. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{Axis, ExperimentConfig};
use crate::io::{read_dense_matrix, write_atomic};
use crate::masks::{load_mask, Mask};
use crate::models::{CovarianceSpec, DistributionSpec, Family, DEFAULT_DF};

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SEED: u64 = 0;
/// Environment variable that overrides the config seed.
pub const SEED_ENV: &str = "MASKCOV_SEED";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub experiment: ExperimentConfig,
    pub scaling: Option<ScalingSpec>,
    /// Hash of the canonical (sorted-key) document.
    pub hash: u64,
}

/// Collects violations under a dotted key path.
struct Checker {
    errors: Vec<String>,
    base_dir: PathBuf,
}

impl Checker {
    fn err(&mut self, path: &str, msg: impl AsRef<str>) {
        self.errors.push(format!("{path}: {}", msg.as_ref()));
    }

    fn object<'a>(
        &mut self,
        v: &'a Value,
        path: &str,
        allowed: &[&str],
    ) -> Option<&'a Map<String, Value>> {
        let Some(obj) = v.as_object() else {
            self.err(path, "expected an object");
            return None;
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                let shown = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                self.errors.push(format!("unknown key \"{shown}\""));
            }
        }
        Some(obj)
    }

    fn child_path(path: &str, key: &str) -> String {
        if path.is_empty() {
            key.to_string()
        } else {
            format!("{path}.{key}")
        }
    }

    fn required<'a>(
        &mut self,
        obj: &'a Map<String, Value>,
        path: &str,
        key: &str,
    ) -> Option<&'a Value> {
        let v = obj.get(key);
        if v.is_none() {
            self.err(&Self::child_path(path, key), "missing required key");
        }
        v
    }

    fn number(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let v = self.required(obj, path, key)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.err(&Self::child_path(path, key), "expected a number");
                None
            }
        }
    }

    fn uint(&mut self, v: &Value, path: &str) -> Option<u64> {
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                self.err(path, "expected a nonnegative integer");
                None
            }
        }
    }

    fn string<'a>(
        &mut self,
        obj: &'a Map<String, Value>,
        path: &str,
        key: &str,
    ) -> Option<&'a str> {
        let v = self.required(obj, path, key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.err(&Self::child_path(path, key), "expected a string");
                None
            }
        }
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn lift<T>(&mut self, path: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.err(path, e.to_string());
                None
            }
        }
    }

    fn covariance(&mut self, v: &Value) -> Option<CovarianceSpec> {
        let path = "model.covariance";
        let obj = self.object(
            v,
            path,
            &["kind", "p", "rho", "alpha", "lambda", "delta", "path"],
        )?;
        let kind = self.string(obj, path, "kind")?;
        let allowed: &[&str] = match kind {
            "identity" => &["kind", "p"],
            "ar1" => &["kind", "p", "rho"],
            "decaying" => &["kind", "p", "alpha"],
            "rank_one_plus" => &["kind", "p", "lambda", "delta"],
            "custom" => &["kind", "path"],
            other => {
                self.err(
                    &format!("{path}.kind"),
                    format!("unknown covariance kind \"{other}\" (identity, ar1, decaying, rank_one_plus, custom)"),
                );
                return None;
            }
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str())
                && ["kind", "p", "rho", "alpha", "lambda", "delta", "path"].contains(&key.as_str())
            {
                self.err(
                    &format!("{path}.{key}"),
                    format!("not used by covariance kind \"{kind}\""),
                );
            }
        }
        if kind == "custom" {
            let file = self.string(obj, path, "path")?;
            let resolved = self.resolve(file);
            let m = self.lift(&format!("{path}.path"), read_dense_matrix(&resolved))?;
            return self.lift(path, CovarianceSpec::custom(m));
        }
        let p = match self.required(obj, path, "p") {
            Some(v) => self.uint(v, &format!("{path}.p")).map(|p| p as usize),
            None => None,
        };
        let spec = match kind {
            "identity" => p.map(CovarianceSpec::identity),
            "ar1" => {
                let rho = self.number(obj, path, "rho");
                match (p, rho) {
                    (Some(p), Some(rho)) => Some(CovarianceSpec::ar1(p, rho)),
                    _ => None,
                }
            }
            "decaying" => {
                let alpha = self.number(obj, path, "alpha");
                match (p, alpha) {
                    (Some(p), Some(a)) => Some(CovarianceSpec::decaying(p, a)),
                    _ => None,
                }
            }
            _ => {
                let lambda = self.number(obj, path, "lambda");
                let delta = self.number(obj, path, "delta");
                match (p, lambda, delta) {
                    (Some(p), Some(l), Some(d)) => Some(CovarianceSpec::rank_one_plus(p, l, d)),
                    _ => None,
                }
            }
        }?;
        self.lift(path, spec)
    }

    fn family(&mut self, v: Option<&Value>) -> Option<Family> {
        let path = "model.family";
        let Some(v) = v else {
            return Some(Family::Gaussian);
        };
        let (kind, df) = match v {
            Value::String(s) => (s.as_str(), None),
            Value::Object(_) => {
                let obj = self.object(v, path, &["kind", "df"])?;
                let kind = self.string(obj, path, "kind")?;
                let df = if obj.contains_key("df") {
                    Some(self.number(obj, path, "df")?)
                } else {
                    None
                };
                (kind, df)
            }
            _ => {
                self.err(path, "expected a string or an object");
                return None;
            }
        };
        match (kind, df) {
            ("gaussian", None) => Some(Family::Gaussian),
            ("sphere_bounded", None) => Some(Family::SphereBounded),
            ("student_t", df) => Some(Family::StudentT {
                df: df.unwrap_or(DEFAULT_DF),
            }),
            ("gaussian" | "sphere_bounded", Some(_)) => {
                self.err(
                    &format!("{path}.df"),
                    format!("not used by family \"{kind}\""),
                );
                None
            }
            (other, _) => {
                self.err(
                    path,
                    format!("unknown family \"{other}\" (gaussian, student_t, sphere_bounded)"),
                );
                None
            }
        }
    }

    fn model(&mut self, v: &Value) -> Option<DistributionSpec> {
        let obj = self.object(v, "model", &["covariance", "family"])?;
        let cov = self
            .required(obj, "model", "covariance")
            .and_then(|c| self.covariance(c));
        let family = self.family(obj.get("family"));
        let (cov, family) = (cov?, family?);
        self.lift("model", DistributionSpec::new(cov, family))
    }

    fn mask(&mut self, v: &Value, p: Option<usize>) -> Option<Mask> {
        let path = "mask";
        let obj = self.object(v, path, &["kind", "bandwidth", "path"])?;
        let kind = self.string(obj, path, "kind")?;
        match kind {
            "banded" | "tapered" => {
                if obj.contains_key("path") {
                    self.err("mask.path", format!("not used by mask kind \"{kind}\""));
                }
                let raw = self.required(obj, path, "bandwidth")?;
                let b = self.uint(raw, "mask.bandwidth")? as usize;
                let p = p?;
                let m = if kind == "banded" {
                    Mask::banded(p, b)
                } else {
                    Mask::tapered(p, b)
                };
                self.lift(path, m)
            }
            "all_ones" => {
                for key in ["bandwidth", "path"] {
                    if obj.contains_key(key) {
                        self.err(&format!("mask.{key}"), "not used by mask kind \"all_ones\"");
                    }
                }
                self.lift(path, Mask::all_ones(p?))
            }
            "custom" => {
                if obj.contains_key("bandwidth") {
                    self.err("mask.bandwidth", "not used by mask kind \"custom\"");
                }
                let file = self.string(obj, path, "path")?;
                let resolved = self.resolve(file);
                let loaded = self.lift("mask.path", load_mask(&resolved))?;
                Some(loaded.mask)
            }
            other => {
                self.err(
                    "mask.kind",
                    format!("unknown mask kind \"{other}\" (banded, tapered, all_ones, custom)"),
                );
                None
            }
        }
    }

    fn scaling(&mut self, v: &Value) -> Option<ScalingSpec> {
        let obj = self.object(v, "scaling", &["axis", "values"])?;
        let axis = match self.string(obj, "scaling", "axis") {
            Some("n") => Some(Axis::N),
            Some("bandwidth" | "B") => Some(Axis::Bandwidth),
            Some("p") => Some(Axis::P),
            Some(other) => {
                self.err(
                    "scaling.axis",
                    format!("unknown axis \"{other}\" (n, bandwidth, p)"),
                );
                None
            }
            None => None,
        };
        let values = match self.required(obj, "scaling", "values") {
            Some(Value::Array(items)) if !items.is_empty() => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item.as_u64() {
                        Some(x) if x >= 1 => out.push(x as f64),
                        _ => self.err(
                            &format!("scaling.values[{i}]"),
                            "expected a positive integer",
                        ),
                    }
                }
                Some(out)
            }
            Some(_) => {
                self.err("scaling.values", "expected a non-empty array");
                None
            }
            None => None,
        };
        Some(ScalingSpec {
            axis: axis?,
            values: values?,
        })
    }
}

/// Validates a config document. `base_dir` resolves relative paths.
pub fn parse_config_value(doc: &Value, base_dir: &Path) -> Result<ParsedConfig> {
    let mut c = Checker {
        errors: Vec::new(),
        base_dir: base_dir.to_path_buf(),
    };
    let keys = [
        "model", "mask", "n", "trials", "seed", "centered", "epsilon", "scaling",
    ];
    let Some(root) = c.object(doc, "", &keys) else {
        return Err(Error::Config(c.errors));
    };

    let model = c.required(root, "", "model").and_then(|m| c.model(m));
    let mask_p = model.as_ref().map(DistributionSpec::dim);
    let mask = c.required(root, "", "mask").and_then(|m| c.mask(m, mask_p));
    let n = match c.required(root, "", "n") {
        Some(v) => match c.uint(v, "n") {
            Some(0) => {
                c.err("n", "must be at least 1");
                None
            }
            other => other.map(|n| n as usize),
        },
        None => None,
    };
    let trials = match root.get("trials") {
        Some(v) => match c.uint(v, "trials") {
            Some(t) if t < 2 => {
                c.err("trials", "must be at least 2");
                None
            }
            other => other.map(|t| t as usize),
        },
        None => Some(DEFAULT_TRIALS),
    };
    let seed = match root.get("seed") {
        Some(v) => c.uint(v, "seed"),
        None => Some(DEFAULT_SEED),
    };
    let centered = match root.get("centered") {
        Some(Value::Bool(b)) => Some(*b),
        Some(_) => {
            c.err("centered", "expected a boolean");
            None
        }
        None => Some(false),
    };
    let epsilon = match root.get("epsilon") {
        None | Some(Value::Null) => Some(None),
        Some(v) => match v.as_f64() {
            Some(e) if e > 0.0 && e < 1.0 => Some(Some(e)),
            Some(e) => {
                c.err("epsilon", format!("epsilon must lie in (0,1), got {e}"));
                None
            }
            None => {
                c.err("epsilon", "expected a number");
                None
            }
        },
    };
    let scaling = match root.get("scaling") {
        Some(v) => c.scaling(v).map(Some),
        None => Some(None),
    };
    if let (Some(model), Some(mask)) = (&model, &mask) {
        if model.dim() != mask.dim() {
            c.err(
                "mask",
                format!(
                    "dimension {} does not match model dimension {}",
                    mask.dim(),
                    model.dim()
                ),
            );
        }
    }

    match (model, mask, n, trials, seed, centered, epsilon, scaling) {
        (
            Some(model),
            Some(mask),
            Some(n),
            Some(trials),
            Some(seed),
            Some(centered),
            Some(epsilon),
            Some(scaling),
        ) if c.errors.is_empty() => Ok(ParsedConfig {
            experiment: ExperimentConfig {
                model,
                mask,
                n,
                trials,
                seed,
                centered,
                epsilon,
            },
            scaling,
            hash: config_hash(doc),
        }),
        _ => Err(Error::Config(c.errors)),
    }
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ParsedConfig> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(vec![format!("not valid JSON: {e}")]))?;
    parse_config_value(&doc, base_dir)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ParsedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

/// First 64 bits of SHA-256 over the sorted-key serialization, so key order
/// and whitespace do not matter.
pub fn config_hash(doc: &Value) -> u64 {
    // serde_json's default map is ordered by key
    let canonical = serde_json::to_string(doc).expect("a JSON value always serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Seed precedence: flag, then environment, then config.
pub fn resolve_seed(config_seed: u64, env: Option<&str>, flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse::<u64>().map_err(|_| {
            Error::invalid(format!(
                "{SEED_ENV} must be a nonnegative integer, got {v:?}"
            ))
        }),
        None => Ok(config_seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// 16 hex digits.
    pub config_hash: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn hash_hex(hash: u64) -> String {
        format!("{hash:016x}")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::MaskKind;
    use serde_json::json;

    fn here() -> &'static Path {
        Path::new(".")
    }

    fn minimal() -> Value {
        json!({
            "model": {"covariance": {"kind": "ar1", "p": 16, "rho": 0.5}},
            "mask": {"kind": "banded", "bandwidth": 3},
            "n": 64
        })
    }

    fn violations(doc: Value) -> Vec<String> {
        match parse_config_value(&doc, here()) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_value(&minimal(), here()).unwrap();
        let e = &c.experiment;
        assert_eq!(
            (e.trials, e.seed, e.centered, e.epsilon),
            (100, 0, false, None)
        );
        assert!(e.model.is_gaussian());
        assert_eq!(e.mask.kind(), MaskKind::Banded);
        assert!(c.scaling.is_none());
    }

    #[test]
    fn epsilon_out_of_range() {
        let mut doc = minimal();
        doc["epsilon"] = json!(1.5);
        let v = violations(doc);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("epsilon must lie in (0,1)"), "{v:?}");
    }

    #[test]
    fn unknown_key_is_named() {
        let mut doc = minimal();
        doc["mask"]["bandwith"] = json!(3);
        let v = violations(doc);
        assert!(v.iter().any(|m| m.contains("\"mask.bandwith\"")), "{v:?}");
    }

    #[test]
    fn all_violations_reported_together() {
        let doc = json!({
            "model": {"covariance": {"kind": "ar1", "p": 16, "rho": 2.0}, "family": "cauchy"},
            "mask": {"kind": "banded", "bandwidth": 4},
            "n": 0,
            "trials": 1,
            "epsilon": 0.0,
            "typo": true
        });
        let v = violations(doc);
        assert!(v.len() >= 5, "{v:?}");
    }

    #[test]
    fn student_t_and_scaling() {
        let mut doc = minimal();
        doc["model"]["family"] = json!({"kind": "student_t", "df": 6});
        doc["scaling"] = json!({"axis": "n", "values": [32, 64]});
        doc["seed"] = json!(5);
        let c = parse_config_value(&doc, here()).unwrap();
        assert_eq!(c.experiment.model.family, Family::StudentT { df: 6.0 });
        assert_eq!(c.scaling.unwrap().values, vec![32.0, 64.0]);
        let mut bad = minimal();
        bad["model"]["family"] = json!({"kind": "student_t", "df": 3});
        assert_eq!(violations(bad).len(), 1);
    }

    #[test]
    fn custom_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.txt"), "2\n1 0.5\n0.5 1\n").unwrap();
        let doc = json!({
            "model": {"covariance": {"kind": "custom", "path": "m.txt"}},
            "mask": {"kind": "custom", "path": "m.txt"},
            "n": 8
        });
        let c = parse_config_value(&doc, dir.path()).unwrap();
        assert_eq!(c.experiment.model.dim(), 2);
        assert_eq!(c.experiment.mask.kind(), MaskKind::Custom);
        assert!(!violations(doc).is_empty());
    }

    #[test]
    fn hash_ignores_key_order_and_whitespace() {
        let a = r#"{"n": 64, "mask": {"kind": "banded", "bandwidth": 3},
                    "model": {"covariance": {"kind": "ar1", "p": 16, "rho": 0.5}}}"#;
        let b = r#"{"model":{"covariance":{"rho":0.5,"p":16,"kind":"ar1"}},"mask":{"bandwidth":3,"kind":"banded"},"n":64}"#;
        let ha = parse_config_str(a, here()).unwrap().hash;
        let hb = parse_config_str(b, here()).unwrap().hash;
        assert_eq!(ha, hb);
        let c = r#"{"model":{"covariance":{"rho":0.5,"p":16,"kind":"ar1"}},"mask":{"bandwidth":3,"kind":"banded"},"n":65}"#;
        assert_ne!(ha, parse_config_str(c, here()).unwrap().hash);
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(1, None, None).unwrap(), 1);
        assert_eq!(resolve_seed(1, Some("9"), None).unwrap(), 9);
        assert_eq!(resolve_seed(1, Some("9"), Some(4)).unwrap(), 4);
        assert!(resolve_seed(1, Some("x"), None).is_err());
    }

    #[test]
    fn invalid_json_is_a_config_error() {
        assert!(matches!(
            parse_config_str("{", here()),
            Err(Error::Config(_))
        ));
    }
}
