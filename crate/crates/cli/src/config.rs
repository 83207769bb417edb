//! Flat `key=value` experiment configuration.
//!
//! Every key has a default. A config file holds one `key = value` pair per
//! line (`#` starts a comment); command-line overrides use the same syntax
//! and are applied after the file. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mtlu_core::activations::{ActivationSpec, GradNorm};
use mtlu_core::data::{load_dir, synthetic_corpus, Degradation, NamedImage, SyntheticSpec};
use mtlu_core::networks::{DenoiseTarget, NetworkSpec, Task};
use mtlu_core::training::TrainConfig;

use crate::error::{CliError, CliResult};

/// `(key, default, description)`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("net.task", "sr", "sr | denoise"),
    ("net.factor", "2", "SR upscaling factor (2, 3 or 4)"),
    ("net.depth", "7", "convolution layers"),
    ("net.width", "64", "trunk feature maps"),
    (
        "net.bicubic_skip",
        "false",
        "SR: add a bicubic upscaling of the input",
    ),
    (
        "net.denoise_target",
        "residual",
        "denoise: residual | direct",
    ),
    (
        "af.kind",
        "mtlu",
        "mtlu | relu | prelu | maxout | apl | plf",
    ),
    ("af.bins", "40", "MTLU bin count"),
    ("af.bin_width", "0.05", "MTLU bin width"),
    (
        "af.grad_norm",
        "bins_per_signal",
        "MTLU: bins_per_signal | signal_count | exact",
    ),
    ("af.shared", "false", "MTLU: one function for all channels"),
    ("af.kernels", "5", "APL hinge count"),
    ("af.segments", "40", "PLF segment count"),
    ("af.interval", "0.05", "PLF anchor spacing"),
    ("train.batch_size", "32", "patches per iteration"),
    ("train.lr_init", "0.001", "initial learning rate"),
    (
        "train.lr_halve_every",
        "auto",
        "iterations per halving; auto = max_iters / 7",
    ),
    (
        "train.lr_stop_below",
        "0.00001",
        "stop once the learning rate drops below this",
    ),
    (
        "train.weight_decay",
        "0.0001",
        "L2 factor on convolution parameters",
    ),
    ("train.max_iters", "1000", "iteration budget"),
    ("train.seed", "0", "initialization and sampling seed"),
    (
        "train.patch",
        "auto",
        "network input patch side; auto = 96/r (72 for r=3) or 72",
    ),
    ("train.log_every", "100", "iterations per log record"),
    (
        "train.val_every",
        "0",
        "iterations per validation pass; 0 = end only",
    ),
    (
        "data.dir",
        "",
        "training PNG directory; empty = synthetic corpus",
    ),
    ("data.synthetic_count", "200", "synthetic training images"),
    ("data.synthetic_size", "96", "synthetic image side"),
    (
        "data.synthetic_seed",
        "100",
        "synthetic training corpus seed",
    ),
    (
        "data.sigma",
        "25",
        "denoise: noise sigma on the 0-255 scale",
    ),
    (
        "eval.dir",
        "",
        "evaluation PNG directory; empty = synthetic corpus",
    ),
    ("eval.synthetic_count", "20", "synthetic evaluation images"),
    (
        "eval.synthetic_seed",
        "200",
        "synthetic evaluation corpus seed",
    ),
    ("eval.noise_seed", "0", "evaluation noise seed"),
    ("out.dir", "runs/latest", "output directory"),
];

/// Raw configuration values, keyed by dotted name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig {
            values: KEYS
                .iter()
                .map(|(k, v, _)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    Some((k.trim(), v.trim()))
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::usage(format!("unknown config key `{key}`"))),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        &self.values[key]
    }

    /// Applies the pairs of a config text. `origin` names it in errors.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> CliResult<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_pair(line).ok_or_else(|| {
                CliError::usage(format!("{origin}:{}: expected key=value", i + 1))
            })?;
            self.set(k, v)
                .map_err(|e| CliError::usage(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> CliResult<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = split_pair(o)
                .ok_or_else(|| CliError::usage(format!("override `{o}` is not key=value")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Every key in table order, one `key=value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# effective configuration\n");
        for (k, _, _) in KEYS {
            let _ = writeln!(s, "{k}={}", self.values[*k]);
        }
        s
    }

    fn parse<T: FromStr>(&self, key: &str) -> CliResult<T> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| CliError::usage(format!("invalid value `{v}` for `{key}`")))
    }

    fn auto<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        if self.get(key) == "auto" {
            Ok(None)
        } else {
            self.parse(key).map(Some)
        }
    }

    fn source(&self, prefix: &str) -> CliResult<ImageSource> {
        let dir = self.get(&format!("{prefix}.dir"));
        if !dir.is_empty() {
            return Ok(ImageSource::Dir(PathBuf::from(dir)));
        }
        // Both corpora share one image size.
        Ok(ImageSource::Synthetic(SyntheticSpec::new(
            self.parse(&format!("{prefix}.synthetic_count"))?,
            self.parse("data.synthetic_size")?,
            self.parse(&format!("{prefix}.synthetic_seed"))?,
        )))
    }
}

pub fn parse_activation(raw: &RawConfig) -> CliResult<ActivationSpec> {
    let spec = match raw.get("af.kind") {
        "mtlu" => ActivationSpec::Mtlu {
            bins: raw.parse("af.bins")?,
            bin_width: raw.parse("af.bin_width")?,
            grad_norm: GradNorm::parse(raw.get("af.grad_norm")).ok_or_else(|| {
                CliError::usage(format!(
                    "invalid value `{}` for `af.grad_norm`",
                    raw.get("af.grad_norm")
                ))
            })?,
            shared: raw.parse("af.shared")?,
        },
        "relu" => ActivationSpec::Relu,
        "prelu" => ActivationSpec::Prelu,
        "maxout" => ActivationSpec::Maxout,
        "apl" => ActivationSpec::Apl {
            kernels: raw.parse("af.kernels")?,
        },
        "plf" => ActivationSpec::Plf {
            segments: raw.parse("af.segments")?,
            interval: raw.parse("af.interval")?,
        },
        other => {
            return Err(CliError::usage(format!(
                "unknown activation `{other}` for `af.kind`"
            )))
        }
    };
    spec.validate()
        .map_err(|e| CliError::usage(format!("activation: {e}")))?;
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ImageSource {
    Dir(PathBuf),
    Synthetic(SyntheticSpec),
}

impl ImageSource {
    pub fn load(&self) -> CliResult<Vec<NamedImage>> {
        let images = match self {
            ImageSource::Dir(d) => crate::error::with_path(load_dir(d), d)?,
            ImageSource::Synthetic(s) => synthetic_corpus(s)?,
        };
        if images.is_empty() {
            return Err(CliError::usage(format!("no images in {self:?}")));
        }
        Ok(images)
    }
}

/// Typed view of a [`RawConfig`].
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub net: NetworkSpec,
    pub degradation: Degradation,
    pub train: TrainConfig,
    pub data: ImageSource,
    pub eval: ImageSource,
    pub eval_noise_seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> CliResult<Self> {
        let activation = parse_activation(raw)?;
        let depth = raw.parse("net.depth")?;
        let width = raw.parse("net.width")?;
        let (mut net, degradation) = match raw.get("net.task") {
            "sr" => {
                let factor = raw.parse("net.factor")?;
                (
                    NetworkSpec::fsrnet(factor, depth, width, activation),
                    Degradation::Bicubic { factor },
                )
            }
            "denoise" => (
                NetworkSpec::fdnet(depth, width, activation),
                Degradation::Awgn {
                    sigma: raw.parse("data.sigma")?,
                },
            ),
            other => {
                return Err(CliError::usage(format!(
                    "unknown task `{other}` for `net.task`"
                )))
            }
        };
        net.bicubic_skip = raw.parse("net.bicubic_skip")?;
        net.denoise_target = match raw.get("net.denoise_target") {
            "residual" => DenoiseTarget::NoiseResidual,
            "direct" => DenoiseTarget::Direct,
            other => {
                return Err(CliError::usage(format!(
                    "invalid value `{other}` for `net.denoise_target`"
                )))
            }
        };
        net.validate()
            .map_err(|e| CliError::usage(format!("network: {e}")))?;
        if let Degradation::Awgn { sigma } = degradation {
            if !(sigma >= 0.0) {
                return Err(CliError::usage("`data.sigma` must be non-negative"));
            }
        }

        let patch = match raw.auto("train.patch")? {
            Some(p) => p,
            None => match net.task {
                Task::SuperResolution { factor: 3 } => 24,
                Task::SuperResolution { factor } => 96 / factor,
                Task::Denoise => 72,
            },
        };
        let train = TrainConfig {
            batch_size: raw.parse("train.batch_size")?,
            lr_init: raw.parse("train.lr_init")?,
            lr_halve_every: raw.auto("train.lr_halve_every")?,
            lr_stop_below: raw.parse("train.lr_stop_below")?,
            weight_decay: raw.parse("train.weight_decay")?,
            max_iters: raw.parse("train.max_iters")?,
            seed: raw.parse("train.seed")?,
            patch,
            log_every: raw.parse("train.log_every")?,
            val_every: raw.parse("train.val_every")?,
        };
        train
            .validate()
            .map_err(|e| CliError::usage(format!("training: {e}")))?;

        Ok(ExperimentConfig {
            net,
            degradation,
            train,
            data: raw.source("data")?,
            eval: raw.source("eval")?,
            eval_noise_seed: raw.parse("eval.noise_seed")?,
            out_dir: PathBuf::from(raw.get("out.dir")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let cfg = ExperimentConfig::from_raw(&RawConfig::default()).unwrap();
        assert_eq!(cfg.net.depth, 7);
        assert_eq!(cfg.train.patch, 48);
        assert_eq!(cfg.train.lr_halve_every, None);
        assert!(matches!(cfg.data, ImageSource::Synthetic(_)));
    }

    #[test]
    fn unknown_key_rejected() {
        let mut raw = RawConfig::default();
        let err = raw.apply_overrides(&["net.dpth=3"]).unwrap_err();
        assert!(err.to_string().contains("net.dpth"));
        let err = raw
            .apply_text("# c\n\naf.bogus = 1\n", "f.cfg")
            .unwrap_err();
        assert!(err.to_string().contains("f.cfg:3"));
    }

    #[test]
    fn effective_text_reparses() {
        let mut raw = RawConfig::default();
        raw.apply_overrides(&["net.task=denoise", "af.kind=apl", "data.dir=/tmp/x y"])
            .unwrap();
        let mut again = RawConfig::default();
        again.apply_text(&raw.to_text(), "echo").unwrap();
        assert_eq!(again, raw);
    }

    #[test]
    fn bad_values_name_the_key() {
        for o in [
            "net.depth=two",
            "af.kind=tanh",
            "train.lr_halve_every=-1",
            "net.factor=5",
        ] {
            let mut raw = RawConfig::default();
            raw.apply_overrides(&[o]).unwrap();
            assert!(ExperimentConfig::from_raw(&raw).is_err(), "{o}");
        }
    }

    #[test]
    fn every_key_documented_once() {
        let mut seen = std::collections::HashSet::new();
        for (k, _, doc) in KEYS {
            assert!(seen.insert(k), "{k}");
            assert!(!doc.is_empty());
        }
    }
}
