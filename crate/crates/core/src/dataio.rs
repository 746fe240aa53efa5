//! Reading sample files and images, sorted-value down-sampling, and per-patch
//! parameter maps.
//!
//! Input formats:
//! - CSV: numbers separated by commas and/or newlines.
//! - PGM: binary `P5`, 8-bit (maxval < 256) or 16-bit big-endian.
//! - raw-f32: little-endian `f32` pixels, row-major, with a sidecar text file
//!   `<path>.hdr` holding `width height`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Domain, GgRicianParams};
use crate::error::{domain, usage, Error, Result};
use crate::estimation::{mh_fit, MhConfig};
use crate::quadrature::QuadratureRule;
use crate::sampling::{sample_ggrician, RngStream, SampleSet};

/// On-disk input format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Pgm,
    RawF32,
}

impl Format {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" | "txt" => Some(Format::Csv),
            "pgm" => Some(Format::Pgm),
            "raw" | "f32" | "bin" => Some(Format::RawF32),
            _ => None,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Pgm => "pgm",
            Format::RawF32 => "raw-f32",
        })
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "pgm" => Ok(Format::Pgm),
            "raw-f32" | "raw" | "f32" => Ok(Format::RawF32),
            other => Err(usage(format!("unknown format '{other}'; expected csv, pgm or raw-f32"))),
        }
    }
}

/// A row-major image of nonnegative values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub domain: Domain,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>, domain_tag: Domain) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(usage(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(usage(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(domain(format!(
                "pixel (row {}, col {}) must be finite and >= 0, got {}",
                i / width,
                i % width,
                pixels[i]
            )));
        }
        Ok(Self { width, height, pixels, domain: domain_tag })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Pixels of the rectangle `[x0, x1) × [y0, y1)`, row-major.
    pub fn region(&self, x0: usize, x1: usize, y0: usize, y1: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for row in y0..y1 {
            out.extend_from_slice(&self.pixels[row * self.width + x0..row * self.width + x1]);
        }
        out
    }

    pub fn to_samples(&self, provenance: impl Into<String>) -> Result<SampleSet> {
        SampleSet::new(self.pixels.clone(), self.domain, provenance)
    }
}

/// Result of [`load_samples`]: CSV gives samples, images give rasters.
#[derive(Debug, Clone, PartialEq)]
pub enum Loaded {
    Samples(SampleSet),
    Raster(RasterImage),
}

impl Loaded {
    /// Flattens a raster into its pixel values.
    pub fn into_samples(self, provenance: impl Into<String>) -> Result<SampleSet> {
        match self {
            Loaded::Samples(s) => Ok(s),
            Loaded::Raster(img) => img.to_samples(provenance),
        }
    }
}

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { location: location.into(), message: message.into() }
}

// Resolves the domain from an optional file tag and an optional request.
fn resolve_domain(tag: Option<Domain>, requested: Option<Domain>, what: &str) -> Result<Domain> {
    match (tag, requested) {
        (Some(t), Some(r)) if t != r => {
            Err(usage(format!("{what} is tagged {t} but {r} was requested")))
        }
        (t, r) => Ok(t.or(r).unwrap_or(Domain::Amplitude)),
    }
}

/// Parses comma- and/or newline-separated values.
///
/// Lines starting with `#` are comments. A comment of the form
/// `# domain: intensity` tags the file; requesting the other domain is a usage
/// error. Untagged input takes the requested domain, or amplitude.
pub fn parse_csv(text: &str, requested: Option<Domain>, provenance: impl Into<String>) -> Result<SampleSet> {
    let provenance = provenance.into();
    let mut values = Vec::new();
    let mut tag = None;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once([':', '=']) {
                if key.trim().eq_ignore_ascii_case("domain") {
                    tag = Some(value.parse::<Domain>().map_err(|_| {
                        parse_err(format!("line {}", ln + 1), format!("unknown domain tag '{}'", value.trim()))
                    })?);
                }
            }
            continue;
        }
        for (fi, field) in line.split(',').enumerate() {
            let field = field.trim();
            let loc = || format!("line {}, field {}", ln + 1, fi + 1);
            let v: f64 = field.parse().map_err(|_| parse_err(loc(), format!("'{field}' is not a number")))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(domain(format!("{}: value must be finite and >= 0, got {field}", loc())));
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(usage("CSV input contains no values"));
    }
    let d = resolve_domain(tag, requested, &provenance)?;
    SampleSet::new(values, d, provenance)
}

/// Parses a binary `P5` PGM. Pixel values are taken as stored.
pub fn parse_pgm(bytes: &[u8], domain_tag: Domain) -> Result<RasterImage> {
    let mut pos = 0usize;
    let mut token = |what: &str| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(format!("byte {start}"), format!("missing {what}")));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token("magic number")?;
    if magic != "P5" {
        return Err(parse_err("byte 0", format!("expected binary PGM magic 'P5', found '{magic}'")));
    }
    let mut number = |what: &str| -> Result<usize> {
        let t = token(what)?;
        t.parse().map_err(|_| parse_err("header", format!("{what} '{t}' is not a positive integer")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err("header", format!("dimensions must be positive, got {width}x{height}")));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(parse_err("header", format!("maxval must lie in 1..=65535, got {maxval}")));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(parse_err(format!("byte {pos}"), "expected one whitespace byte before the raster"));
    }
    let data = &bytes[pos + 1..];
    let bpp = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bpp;
    if data.len() != need {
        return Err(parse_err(
            format!("byte {}", pos + 1),
            format!("raster needs {need} bytes for {width}x{height} at {bpp} byte(s)/pixel, found {}", data.len()),
        ));
    }
    let pixels = if bpp == 1 {
        data.iter().map(|&b| b as f64).collect()
    } else {
        data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64).collect()
    };
    RasterImage::new(width, height, pixels, domain_tag)
}

/// Parses little-endian `f32` pixels with a `width height` header.
pub fn parse_raw_f32(bytes: &[u8], header: &str, domain_tag: Domain) -> Result<RasterImage> {
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |i: usize, what: &str| -> Result<usize> {
        dims.get(i)
            .ok_or_else(|| parse_err("header", format!("missing {what}")))?
            .parse()
            .map_err(|_| parse_err("header", format!("{what} '{}' is not a positive integer", dims[i])))
    };
    if dims.len() != 2 {
        return Err(parse_err("header", format!("expected 'width height', found '{}'", header.trim())));
    }
    let width = parse_dim(0, "width")?;
    let height = parse_dim(1, "height")?;
    if bytes.len() != 4 * width * height {
        return Err(parse_err(
            "data",
            format!("{width}x{height} f32 image needs {} bytes, found {}", 4 * width * height, bytes.len()),
        ));
    }
    let pixels = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    RasterImage::new(width, height, pixels, domain_tag)
}

/// Path of the dimensions header belonging to a raw-f32 file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

/// Reads a file in the given format. Images carry no domain tag and take
/// `requested`, defaulting to amplitude.
pub fn load_samples(path: &Path, format: Format, requested: Option<Domain>) -> Result<Loaded> {
    let provenance = path.display().to_string();
    let image_domain = requested.unwrap_or(Domain::Amplitude);
    match format {
        Format::Csv => {
            let text = fs::read_to_string(path)?;
            Ok(Loaded::Samples(parse_csv(&text, requested, provenance)?))
        }
        Format::Pgm => Ok(Loaded::Raster(parse_pgm(&fs::read(path)?, image_domain)?)),
        Format::RawF32 => {
            let header = fs::read_to_string(sidecar_path(path))?;
            Ok(Loaded::Raster(parse_raw_f32(&fs::read(path)?, &header, image_domain)?))
        }
    }
}

/// Writes one value per line, preceded by a `# domain:` tag when given.
pub fn write_samples_csv<W: Write>(values: &[f64], tag: Option<Domain>, mut w: W) -> std::io::Result<()> {
    if let Some(d) = tag {
        writeln!(w, "# domain: {d}")?;
    }
    for v in values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// Writes `img` as raw-f32 plus its `.hdr` sidecar.
pub fn write_raw_f32(img: &RasterImage, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(4 * img.pixels.len());
    for &v in &img.pixels {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), format!("{} {}\n", img.width, img.height))?;
    Ok(())
}

// round(num/den) with ties to even, in exact integer arithmetic
fn div_round_half_even(num: u128, den: u128) -> u128 {
    let (q, r) = (num / den, num % den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// Sorts the values and keeps `target_n` of them at evenly spaced ranks
/// `round(k (N-1)/(target_n-1))`, so the minimum and maximum are retained.
pub fn sorted_downsample(
    values: &[f64],
    target_n: usize,
    domain_tag: Domain,
    provenance: impl Into<String>,
) -> Result<SampleSet> {
    let n = values.len();
    if target_n < 2 {
        return Err(usage(format!("down-sampling target must be >= 2, got {target_n}")));
    }
    if target_n > n {
        return Err(usage(format!("down-sampling target {target_n} exceeds the {n} available values")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (span, steps) = ((n - 1) as u128, (target_n - 1) as u128);
    let picked = (0..target_n as u128).map(|k| sorted[div_round_half_even(k * span, steps) as usize]).collect();
    SampleSet::new(picked, domain_tag, provenance)
}

/// Settings for [`fit_patches`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub patch_size: usize,
    /// Patches with more pixels than this are down-sampled.
    pub downsample_threshold: usize,
    pub downsample_n: usize,
    /// Edge strips narrower than this are merged into their neighbour.
    pub min_edge: usize,
    pub mh: MhConfig,
    /// Start each patch's chain from its own moment match.
    pub init_from_data: bool,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { patch_size: 250, downsample_threshold: 10_000, downsample_n: 7500, min_edge: 50, mh: MhConfig::default(), init_from_data: false }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 2 {
            return Err(usage(format!("patch size must be >= 2, got {}", self.patch_size)));
        }
        if self.downsample_n < 2 {
            return Err(usage(format!("down-sampling target must be >= 2, got {}", self.downsample_n)));
        }
        self.mh.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchStatus {
    Ok,
    Degenerate,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchEstimate {
    pub alpha_mean: f64,
    pub alpha_std: f64,
    pub delta_mean: f64,
    pub delta_std: f64,
    pub gamma_mean: f64,
    pub gamma_std: f64,
    pub loglik: f64,
}

/// One grid cell of a [`ParameterMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub row: usize,
    pub col: usize,
    /// Pixel rectangle that was fitted, `[x0, x0 + width) × [y0, y0 + height)`.
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    pub n_pixels: usize,
    pub n_used: usize,
    pub stream_id: u64,
    pub status: PatchStatus,
    #[serde(flatten)]
    pub estimate: Option<PatchEstimate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
    /// For cells folded into a neighbour: that neighbour's `[row, col]`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub merged_into: Option<[usize; 2]>,
}

/// Per-patch posterior summaries over a tiled image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterMap {
    pub image_width: usize,
    pub image_height: usize,
    pub patch_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub domain: Domain,
    pub seed: u64,
    pub downsample_n: usize,
    /// Row-major, `rows * cols` entries.
    pub records: Vec<PatchRecord>,
}

impl ParameterMap {
    pub fn record(&self, row: usize, col: usize) -> &PatchRecord {
        &self.records[row * self.cols + col]
    }

    /// Grid of one posterior-mean field; failed cells are NaN.
    pub fn grid(&self, field: fn(&PatchEstimate) -> f64) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.record(r, c).estimate.as_ref().map_or(f64::NAN, field)).collect())
            .collect()
    }

    pub fn failed_count(&self) -> usize {
        self.records.iter().filter(|r| r.status == PatchStatus::Failed).count()
    }

    /// Writes `alpha.csv`, `delta.csv` and `gamma.csv` (posterior means, one
    /// line per patch row) into `dir`.
    pub fn write_grids(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        type Field = fn(&PatchEstimate) -> f64;
        let fields: [(&str, Field); 3] =
            [("alpha", |e| e.alpha_mean), ("delta", |e| e.delta_mean), ("gamma", |e| e.gamma_mean)];
        let mut written = Vec::new();
        for (name, field) in fields {
            let path = dir.join(format!("{name}.csv"));
            let mut text = String::new();
            for row in self.grid(field) {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

// Tile spans along one axis: grid cell index → fitted span and, for a merged
// edge cell, the cell it was folded into.
fn axis_spans(len: usize, patch: usize, min_edge: usize) -> Vec<((usize, usize), Option<usize>)> {
    let cells = len.div_ceil(patch);
    let remainder = len - (cells - 1) * patch;
    let merge = cells >= 2 && remainder < min_edge;
    (0..cells)
        .map(|i| {
            if merge && i == cells - 1 {
                (((i - 1) * patch, len), Some(i - 1))
            } else if merge && i == cells - 2 {
                ((i * patch, len), None)
            } else {
                ((i * patch, ((i + 1) * patch).min(len)), None)
            }
        })
        .collect()
}

/// Fits every patch of `img` with the GG-Rician sampler.
///
/// Patches run in parallel, each with `stream_id` equal to its row-major grid
/// index. A patch that fails is recorded with its status and does not stop the
/// map. Only an invalid configuration is an error.
pub fn fit_patches(img: &RasterImage, cfg: &MapConfig, rule: &QuadratureRule) -> Result<ParameterMap> {
    cfg.validate()?;
    let xs = axis_spans(img.width, cfg.patch_size, cfg.min_edge);
    let ys = axis_spans(img.height, cfg.patch_size, cfg.min_edge);
    let (rows, cols) = (ys.len(), xs.len());

    let tasks: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .filter(|&(r, c)| ys[r].1.is_none() && xs[c].1.is_none())
        .collect();
    let fitted: Vec<PatchRecord> = tasks
        .par_iter()
        .map(|&(row, col)| {
            let ((x0, x1), _) = xs[col];
            let ((y0, y1), _) = ys[row];
            let stream_id = (row * cols + col) as u64;
            let pixels = img.region(x0, x1, y0, y1);
            let n_pixels = pixels.len();
            let provenance = format!("patch ({row}, {col})");
            let samples = if n_pixels > cfg.downsample_threshold && cfg.downsample_n < n_pixels {
                sorted_downsample(&pixels, cfg.downsample_n, img.domain, provenance)
            } else {
                SampleSet::new(pixels, img.domain, provenance)
            };
            let mh = MhConfig { stream_id, ..cfg.mh };
            let outcome = samples.and_then(|s| {
                let mh = if cfg.init_from_data { mh.start_from_moments(&s) } else { mh };
                mh_fit(&s, &mh, rule).map(|f| (s.len(), f))
            });
            let (status, estimate, n_used, message) = match outcome {
                Ok((n, f)) => (
                    PatchStatus::Ok,
                    Some(PatchEstimate {
                        alpha_mean: f.posterior_mean.alpha,
                        alpha_std: f.posterior_std.alpha,
                        delta_mean: f.posterior_mean.delta,
                        delta_std: f.posterior_std.delta,
                        gamma_mean: f.posterior_mean.gamma,
                        gamma_std: f.posterior_std.gamma,
                        loglik: f.final_loglik,
                    }),
                    n,
                    None,
                ),
                Err(e @ Error::Degenerate(_)) => (PatchStatus::Degenerate, None, 0, Some(e.to_string())),
                Err(e) => (PatchStatus::Failed, None, 0, Some(e.to_string())),
            };
            PatchRecord {
                row,
                col,
                x0,
                y0,
                width: x1 - x0,
                height: y1 - y0,
                n_pixels,
                n_used,
                stream_id,
                status,
                estimate,
                message,
                merged_into: None,
            }
        })
        .collect();

    let mut records = Vec::with_capacity(rows * cols);
    for (row, (_, y_src)) in ys.iter().enumerate() {
        for (col, (_, x_src)) in xs.iter().enumerate() {
            let src_row = y_src.unwrap_or(row);
            let src_col = x_src.unwrap_or(col);
            let src = fitted.iter().find(|p| p.row == src_row && p.col == src_col).expect("every source cell is fitted");
            let mut rec = src.clone();
            if (src_row, src_col) != (row, col) {
                rec.row = row;
                rec.col = col;
                rec.merged_into = Some([src_row, src_col]);
            }
            records.push(rec);
        }
    }
    Ok(ParameterMap {
        image_width: img.width,
        image_height: img.height,
        patch_size: cfg.patch_size,
        rows,
        cols,
        domain: img.domain,
        seed: cfg.mh.seed,
        downsample_n: cfg.downsample_n,
        records,
    })
}

/// Synthetic amplitude image whose left half (columns `< width/2`) follows
/// `left` and right half follows `right`.
pub fn two_region_image(
    width: usize,
    height: usize,
    left: &GgRicianParams,
    right: &GgRicianParams,
    seed: u64,
) -> Result<RasterImage> {
    if width < 2 || height == 0 {
        return Err(usage(format!("composite image needs width >= 2 and height >= 1, got {width}x{height}")));
    }
    let split = width / 2;
    let l = sample_ggrician(split * height, left, &mut RngStream::new(seed, 0))?.into_values();
    let r = sample_ggrician((width - split) * height, right, &mut RngStream::new(seed, 1))?.into_values();
    let mut pixels = Vec::with_capacity(width * height);
    for row in 0..height {
        pixels.extend_from_slice(&l[row * split..(row + 1) * split]);
        pixels.extend_from_slice(&r[row * (width - split)..(row + 1) * (width - split)]);
    }
    RasterImage::new(width, height, pixels, Domain::Amplitude)
}
