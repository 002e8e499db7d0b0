use std::fs;
use std::path::Path;

use crate::datamodel::{NormalizationAxis, RPolicy};
use crate::error::{Error, Result};
use crate::xqda::{Ridge, XqdaOptions};

/// Experiment settings, read from a flat `key=value` file (`#` comments).
///
/// Recognized keys: `k`, `seed`, `ridge`, `r_policy`,
/// `negatives_per_positive`, `normalization_axis`, `invert_quotient`,
/// `probe_view`, `gallery_view`, `max_rank`, `single_gallery_shot`,
/// `column_bias`. A `max_rank` of 0 means the whole gallery.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub seed: u64,
    pub ridge: Ridge,
    pub r_policy: RPolicy,
    pub negatives_per_positive: usize,
    pub normalization_axis: NormalizationAxis,
    pub invert_quotient: bool,
    /// Defaults to the manifest's first view.
    pub probe_view: Option<String>,
    /// Defaults to the manifest's second view.
    pub gallery_view: Option<String>,
    pub max_rank: usize,
    /// Keep only the first gallery image of every identity.
    pub single_gallery_shot: bool,
    /// Magnitude of a synthetic per-gallery-item score offset injected into
    /// every fold's raw scores (0 disables).
    pub column_bias: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 10,
            seed: 0,
            ridge: Ridge::default(),
            r_policy: RPolicy::default(),
            negatives_per_positive: 1,
            normalization_axis: NormalizationAxis::default(),
            invert_quotient: true,
            probe_view: None,
            gallery_view: None,
            max_rank: 20,
            single_gallery_shot: false,
            column_bias: 0.0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl ExperimentConfig {
    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "k" => self.k = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "ridge" => self.ridge = value.parse()?,
            "r_policy" => self.r_policy = value.parse()?,
            "negatives_per_positive" => {
                self.negatives_per_positive = parse(key, value)?;
                if self.negatives_per_positive == 0 {
                    return Err(Error::Config("negatives_per_positive must be >= 1".into()));
                }
            }
            "normalization_axis" => self.normalization_axis = value.parse()?,
            "invert_quotient" => self.invert_quotient = parse_bool(key, value)?,
            "probe_view" => self.probe_view = Some(value.trim().to_owned()),
            "gallery_view" => self.gallery_view = Some(value.trim().to_owned()),
            "max_rank" => self.max_rank = parse(key, value)?,
            "single_gallery_shot" => self.single_gallery_shot = parse_bool(key, value)?,
            "column_bias" => {
                let v: f64 = parse(key, value)?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("column_bias must be >= 0, got {v}")));
                }
                self.column_bias = v;
            }
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileMissing(path.to_path_buf()));
        }
        Self::from_text(&fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "k={}\nseed={}\nridge={}\nr_policy={}\nnegatives_per_positive={}\n\
             normalization_axis={}\ninvert_quotient={}\nmax_rank={}\n\
             single_gallery_shot={}\ncolumn_bias={}\n",
            self.k,
            self.seed,
            self.ridge,
            self.r_policy,
            self.negatives_per_positive,
            self.normalization_axis,
            self.invert_quotient,
            self.max_rank,
            self.single_gallery_shot,
            self.column_bias,
        );
        if let Some(v) = &self.probe_view {
            s.push_str(&format!("probe_view={v}\n"));
        }
        if let Some(v) = &self.gallery_view {
            s.push_str(&format!("gallery_view={v}\n"));
        }
        s
    }

    pub fn xqda_options(&self) -> XqdaOptions {
        XqdaOptions {
            ridge: self.ridge,
            r_policy: self.r_policy,
            invert_quotient: self.invert_quotient,
            ..Default::default()
        }
    }
}
