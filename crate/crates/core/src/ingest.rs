//! Feature files and dataset manifests.
//!
//! Two feature formats are supported and detected by content:
//!
//! * CSV: a header line `dim=<d>,count=<m>` followed by `m` rows
//!   `label,v1,...,vd`. Values are written with 17 significant digits.
//! * Binary (little-endian): `"XRID" | u32 version=1 | u32 dim | u32 count`
//!   followed by `count` records of `u16 label_len | label bytes | dim × f64`.
//!
//! A manifest is a flat `key=value` text file with `#` comments:
//!
//! ```text
//! name=viper
//! expected_dim=4096
//! view.a=cam_a.bin
//! view.b=cam_b.bin
//! distractor=extra_gallery.bin
//! notes=free text
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::datamodel::{FeatureSet, Label};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"XRID";
pub const FEATURE_VERSION: u32 = 1;
/// Size of the fixed binary header in bytes.
pub const FEATURE_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    Binary,
}

impl std::str::FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(FeatureFormat::Csv),
            "binary" | "bin" => Ok(FeatureFormat::Binary),
            other => Err(Error::Config(format!("unknown feature format `{other}`"))),
        }
    }
}

/// Dimension and record count declared by a feature file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHeader {
    pub format: FeatureFormat,
    pub dim: usize,
    pub count: usize,
}

fn format_err(path: &Path, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        location: location.into(),
        message: message.into(),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::FileMissing(path.to_path_buf()));
    }
    Ok(fs::read(path)?)
}

fn view_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn parse_csv_header(path: &Path, line: &str) -> Result<(usize, usize)> {
    let bad = || format_err(path, "line 1", format!("expected `dim=<d>,count=<m>`, got `{line}`"));
    let (d, c) = line.trim().split_once(',').ok_or_else(bad)?;
    let dim = d
        .trim()
        .strip_prefix("dim=")
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(bad)?;
    let count = c
        .trim()
        .strip_prefix("count=")
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(bad)?;
    Ok((dim, count))
}

/// Read only the header of a feature file.
pub fn read_header(path: &Path) -> Result<FeatureHeader> {
    if !path.exists() {
        return Err(Error::FileMissing(path.to_path_buf()));
    }
    let mut f = fs::File::open(path)?;
    let mut head = [0u8; FEATURE_HEADER_LEN];
    let mut n = 0;
    while n < head.len() {
        let k = std::io::Read::read(&mut f, &mut head[n..])?;
        if k == 0 {
            break;
        }
        n += k;
    }
    if n >= 4 && &head[..4] == FEATURE_MAGIC {
        if n < FEATURE_HEADER_LEN {
            return Err(format_err(path, "offset 0", "truncated binary header"));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != FEATURE_VERSION {
            return Err(format_err(path, "offset 4", format!("unsupported version {version}")));
        }
        return Ok(FeatureHeader {
            format: FeatureFormat::Binary,
            dim: u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize,
            count: u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize,
        });
    }
    let mut first = String::new();
    let mut reader = std::io::BufReader::new(fs::File::open(path)?);
    std::io::BufRead::read_line(&mut reader, &mut first)?;
    let (dim, count) = parse_csv_header(path, &first)?;
    Ok(FeatureHeader {
        format: FeatureFormat::Csv,
        dim,
        count,
    })
}

fn parse_csv(path: &Path, text: &str) -> Result<FeatureSet> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(path, "line 1", "empty file"))?;
    let (dim, count) = parse_csv_header(path, header)?;
    if dim == 0 {
        return Err(format_err(path, "line 1", "dim must be at least 1"));
    }
    if count == 0 {
        return Err(format_err(path, "line 1", "empty feature sets are not allowed"));
    }
    let mut data = Vec::with_capacity(dim * count);
    let mut labels = Vec::with_capacity(count);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("line {}", i + 1);
        let record = labels.len();
        if record == count {
            return Err(format_err(path, loc, format!("more records than declared count {count}")));
        }
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or("").trim();
        if label.is_empty() {
            return Err(format_err(path, loc, "empty label"));
        }
        let mut k = 0;
        for field in fields {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format_err(path, loc.clone(), format!("bad number `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row: record, col: k });
            }
            data.push(v);
            k += 1;
        }
        if k != dim {
            return Err(Error::DimMismatch {
                found: k,
                expected: dim,
            });
        }
        labels.push(Label::new(label));
    }
    if labels.len() != count {
        return Err(format_err(
            path,
            "end of file",
            format!("declared count {count} but found {} records", labels.len()),
        ));
    }
    FeatureSet::new(view_id_of(path), DMatrix::from_vec(dim, count, data), labels)
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<FeatureSet> {
    if bytes.len() < FEATURE_HEADER_LEN {
        return Err(format_err(path, "offset 0", "truncated binary header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FEATURE_VERSION {
        return Err(format_err(path, "offset 4", format!("unsupported version {version}")));
    }
    let dim = u32_at(8) as usize;
    let count = u32_at(12) as usize;
    if dim == 0 {
        return Err(format_err(path, "offset 8", "dim must be at least 1"));
    }
    if count == 0 {
        return Err(format_err(path, "offset 12", "empty feature sets are not allowed"));
    }
    let truncated = |o: usize| format_err(path, format!("offset {o}"), "unexpected end of file");
    let mut pos = FEATURE_HEADER_LEN;
    let mut data = Vec::with_capacity(dim.saturating_mul(count));
    let mut labels = Vec::with_capacity(count);
    for record in 0..count {
        let len_bytes = bytes.get(pos..pos + 2).ok_or_else(|| truncated(pos))?;
        let len = u16::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
        pos += 2;
        let raw = bytes.get(pos..pos + len).ok_or_else(|| truncated(pos))?;
        let label = std::str::from_utf8(raw)
            .map_err(|_| format_err(path, format!("offset {pos}"), "label is not UTF-8"))?;
        if label.is_empty() {
            return Err(format_err(path, format!("offset {pos}"), "empty label"));
        }
        labels.push(Label::new(label));
        pos += len;
        let body = bytes.get(pos..pos + 8 * dim).ok_or_else(|| truncated(pos))?;
        for (k, chunk) in body.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row: record, col: k });
            }
            data.push(v);
        }
        pos += 8 * dim;
    }
    if pos != bytes.len() {
        return Err(format_err(
            path,
            format!("offset {pos}"),
            format!("{} trailing bytes after declared count {count}", bytes.len() - pos),
        ));
    }
    FeatureSet::new(view_id_of(path), DMatrix::from_vec(dim, count, data), labels)
}

/// Read a feature file of either format without checking its dimension.
/// The view id defaults to the file stem.
pub fn read_feature_set(path: &Path) -> Result<FeatureSet> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(FEATURE_MAGIC) {
        parse_binary(path, &bytes)
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| format_err(path, "offset 0", "neither XRID binary nor UTF-8 CSV"))?;
        parse_csv(path, text)
    }
}

pub fn load_feature_set(path: &Path, expected_dim: usize) -> Result<FeatureSet> {
    let fs = read_feature_set(path)?;
    if fs.dim() != expected_dim {
        return Err(Error::DimMismatch {
            found: fs.dim(),
            expected: expected_dim,
        });
    }
    Ok(fs)
}

pub fn save_feature_set(fs: &FeatureSet, path: &Path, format: FeatureFormat) -> Result<()> {
    if fs.is_empty() {
        return Err(format_err(path, "record 0", "refusing to write an empty feature set"));
    }
    match format {
        FeatureFormat::Csv => write_csv(fs, path),
        FeatureFormat::Binary => write_binary(fs, path),
    }
}

fn write_csv(fs: &FeatureSet, path: &Path) -> Result<()> {
    for (i, l) in fs.labels().iter().enumerate() {
        if l.as_str().contains([',', '\n', '\r']) {
            return Err(format_err(
                path,
                format!("record {i}"),
                "label contains a comma or newline",
            ));
        }
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "dim={},count={}", fs.dim(), fs.len())?;
    for (i, col) in fs.vectors().column_iter().enumerate() {
        write!(out, "{}", fs.labels()[i])?;
        for v in col.iter() {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn write_binary(fs: &FeatureSet, path: &Path) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| format_err(path, "header", format!("{what} exceeds u32")))
    };
    let dim = to_u32(fs.dim(), "dim")?;
    let count = to_u32(fs.len(), "count")?;
    for (i, l) in fs.labels().iter().enumerate() {
        if l.as_str().len() > u16::MAX as usize {
            return Err(format_err(path, format!("record {i}"), "label longer than 65535 bytes"));
        }
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(FEATURE_MAGIC)?;
    out.write_all(&FEATURE_VERSION.to_le_bytes())?;
    out.write_all(&dim.to_le_bytes())?;
    out.write_all(&count.to_le_bytes())?;
    for (i, col) in fs.vectors().column_iter().enumerate() {
        let label = fs.labels()[i].as_str().as_bytes();
        out.write_all(&(label.len() as u16).to_le_bytes())?;
        out.write_all(label)?;
        for v in col.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// A dataset: two or more camera views plus optional gallery-only distractors.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub views: Vec<(String, PathBuf)>,
    pub expected_dim: usize,
    pub distractor_file: Option<PathBuf>,
    pub notes: String,
}

impl DatasetManifest {
    pub fn view_path(&self, view_id: &str) -> Result<&Path> {
        self.views
            .iter()
            .find(|(id, _)| id == view_id)
            .map(|(_, p)| p.as_path())
            .ok_or_else(|| Error::Config(format!("manifest `{}` has no view `{view_id}`", self.name)))
    }

    /// Load one camera view; labels in the distractor namespace are rejected.
    pub fn load_view(&self, view_id: &str) -> Result<FeatureSet> {
        let fs = load_feature_set(self.view_path(view_id)?, self.expected_dim)?;
        if let Some(l) = fs.labels().iter().find(|l| l.is_distractor()) {
            return Err(Error::Validation(format!(
                "view `{view_id}` uses reserved distractor label `{l}`"
            )));
        }
        Ok(fs.with_view_id(view_id))
    }

    /// Distractor vectors relabeled `__distractor_<k>` so they can never match a probe.
    pub fn load_distractors(&self) -> Result<Option<FeatureSet>> {
        let Some(path) = &self.distractor_file else {
            return Ok(None);
        };
        let fs = load_feature_set(path, self.expected_dim)?;
        let labels = (0..fs.len()).map(Label::distractor).collect();
        Ok(Some(FeatureSet::new("distractor", fs.vectors().clone(), labels)?))
    }

    /// Render in manifest syntax; paths are written as stored.
    pub fn render(&self) -> String {
        let mut s = format!("name={}\nexpected_dim={}\n", self.name, self.expected_dim);
        for (id, p) in &self.views {
            s.push_str(&format!("view.{id}={}\n", p.display()));
        }
        if let Some(p) = &self.distractor_file {
            s.push_str(&format!("distractor={}\n", p.display()));
        }
        for line in self.notes.lines() {
            s.push_str(&format!("notes={line}\n"));
        }
        s
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    if !path.exists() {
        return Err(Error::FileMissing(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &str| {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };

    let mut name = None;
    let mut expected_dim = None;
    let mut views: Vec<(String, PathBuf)> = Vec::new();
    let mut distractor_file = None;
    let mut notes: Vec<&str> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Schema(format!("line {}: expected key=value", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "name" => name = Some(value.to_owned()),
            "expected_dim" => {
                let d: usize = value.parse().map_err(|_| {
                    Error::Schema(format!("line {}: expected_dim `{value}` is not an integer", i + 1))
                })?;
                expected_dim = Some(d);
            }
            "distractor" => distractor_file = Some(resolve(value)),
            "notes" => notes.push(value),
            k if k.starts_with("view.") => {
                let id = &k["view.".len()..];
                if id.is_empty() {
                    return Err(Error::Schema(format!("line {}: empty view id", i + 1)));
                }
                if views.iter().any(|(v, _)| v == id) {
                    return Err(Error::Schema(format!("line {}: duplicate view `{id}`", i + 1)));
                }
                views.push((id.to_owned(), resolve(value)));
            }
            other => {
                return Err(Error::Schema(format!("line {}: unknown key `{other}`", i + 1)));
            }
        }
    }
    let name = name.ok_or_else(|| Error::Schema("missing `name`".into()))?;
    let expected_dim = expected_dim.ok_or_else(|| Error::Schema("missing `expected_dim`".into()))?;
    if views.len() < 2 {
        return Err(Error::Schema(format!(
            "cross-view matching needs at least two views, found {}",
            views.len()
        )));
    }
    for p in views.iter().map(|(_, p)| p).chain(distractor_file.iter()) {
        let h = read_header(p)?;
        if h.dim != expected_dim {
            return Err(Error::CrossFileDimMismatch {
                path: p.display().to_string(),
                found: h.dim,
                expected: expected_dim,
            });
        }
    }
    Ok(DatasetManifest {
        name,
        views,
        expected_dim,
        distractor_file,
        notes: notes.join("\n"),
    })
}
