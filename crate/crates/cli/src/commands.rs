use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ggrician::dataio::{write_samples_csv, MapConfig};
use ggrician::estimation::FitSummary;
use ggrician::gof::{aicc_dif, write_scores_csv, REPORT_CSV_HEADER};
use ggrician::{
    build_histogram, cdf, evaluate, fit_patches, fit_reference, load_samples, mh_fit, sample_ggrician, score_models,
    sorted_downsample, Density, Domain, Family, GgRicianParams, GofReport, Histogram, Loaded, ModelSpec,
    QuadratureRule, ReferenceConfig, RngStream, SampleSet,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Cli, Command, CompareArgs, FitArgs, InputArgs, MapArgs, SynthArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

/// Inputs above this many samples are down-sampled.
pub const DOWNSAMPLE_THRESHOLD: usize = 10_000;

struct Outcome {
    inputs: Vec<String>,
    outputs: Vec<String>,
    result: Option<serde_json::Value>,
}

// Collects output files so the manifest can list them.
struct OutDir<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> OutDir<'a> {
    fn create(dir: &'a Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n")
    }
}

/// Runs a parsed command and writes its manifest. `args` is echoed into the
/// manifest verbatim.
pub fn run(cli: &Cli, args: Vec<String>) -> CliResult<RunManifest> {
    let start = Instant::now();
    let (common, config, outcome) = match &cli.command {
        Command::Synth(a) => (&a.common, serde_json::to_value(a)?, synth(a)?),
        Command::Fit(a) => (&a.common, serde_json::to_value(a)?, fit(a)?),
        Command::Compare(a) => (&a.common, serde_json::to_value(a)?, compare(a)?),
        Command::Map(a) => (&a.common, serde_json::to_value(a)?, map(a)?),
    };
    let manifest = RunManifest {
        tool: "ggrician".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        args,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        seed: common.seed,
        config,
        duration_seconds: start.elapsed().as_secs_f64(),
        result: outcome.result,
    };
    manifest.write(&common.out)?;
    Ok(manifest)
}

fn synth(a: &SynthArgs) -> CliResult<Outcome> {
    let params = GgRicianParams::new(a.alpha, a.gamma, a.delta)?;
    let samples = sample_ggrician(a.n, &params, &mut RngStream::new(a.common.seed, 0))?.converted(a.domain);
    let mut out = OutDir::create(&a.common.out)?;
    let mut buf = Vec::new();
    write_samples_csv(samples.values(), Some(a.domain), &mut buf)?;
    out.write("samples.csv", buf)?;
    println!("wrote {} {} samples of GG-Rician{params}", a.n, a.domain);
    Ok(Outcome { inputs: vec![], outputs: out.written, result: None })
}

#[derive(Debug, Serialize)]
struct InputInfo {
    input: String,
    domain: Domain,
    n_input: usize,
    n_used: usize,
    downsampled: bool,
}

fn load_sample_input(a: &InputArgs) -> CliResult<(SampleSet, InputInfo)> {
    let provenance = a.input.display().to_string();
    let full = load_samples(&a.input, a.format(), a.domain)?.into_samples(provenance.clone())?;
    let n_input = full.len();
    let samples = if n_input > DOWNSAMPLE_THRESHOLD && a.downsample_n < n_input {
        sorted_downsample(full.values(), a.downsample_n, full.domain(), provenance.clone())?
    } else {
        full
    };
    let info = InputInfo {
        input: provenance,
        domain: samples.domain(),
        n_input,
        n_used: samples.len(),
        downsampled: samples.len() < n_input,
    };
    Ok((samples, info))
}

#[derive(Serialize)]
struct FitReport<'a> {
    #[serde(flatten)]
    input: &'a InputInfo,
    #[serde(flatten)]
    summary: FitSummary,
}

fn fit(a: &FitArgs) -> CliResult<Outcome> {
    a.mh.config(a.common.seed)?;
    let rule = a.common.rule()?;
    let (samples, info) = load_sample_input(&a.input)?;
    let cfg = a.mh.config_for(a.common.seed, &samples)?;
    let result = mh_fit(&samples, &cfg, &rule)?;
    let mut out = OutDir::create(&a.common.out)?;
    out.write_json("fit.json", &FitReport { input: &info, summary: result.summary() })?;
    let mut trace = Vec::new();
    result.traces.write_csv(&mut trace)?;
    out.write("trace.csv", trace)?;
    let p = result.posterior_mean;
    println!("posterior mean: alpha={:.4} delta={:.4} gamma={:.4}", p.alpha, p.delta, p.gamma);
    Ok(Outcome { inputs: vec![info.input], outputs: out.written, result: None })
}

/// Names and families to compare, validated against the data domain.
pub fn resolve_models(names: &[String], domain: Domain) -> CliResult<Vec<Family>> {
    let mut families = Vec::new();
    let mut seen = BTreeSet::new();
    for name in names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()) {
        let mut f: Family = name.parse()?;
        if f.is_ggrician() {
            f = Family::ggrician(domain);
        } else if let Some(d) = f.domain().filter(|d| *d != domain) {
            return Err(CliError::Usage(format!("model {f} is defined on {d} data but the input is {domain}")));
        }
        if !seen.insert(f.name()) {
            return Err(CliError::Usage(format!("model {f} is listed twice")));
        }
        families.push(f);
    }
    if families.is_empty() {
        return Err(CliError::Usage(format!("no models given; supported: {}", Family::supported_names())));
    }
    Ok(families)
}

#[derive(Debug, Serialize)]
struct NamedValue {
    model: String,
    value: f64,
}

#[derive(Debug, Serialize)]
struct Score {
    model: String,
    percentage: f64,
}

#[derive(Serialize)]
struct CompareReport<'a> {
    #[serde(flatten)]
    input: &'a InputInfo,
    reports: &'a [GofReport],
    aicc_dif: Vec<NamedValue>,
    scores: Vec<Score>,
}

fn fit_one(
    family: Family,
    index: usize,
    samples: &SampleSet,
    a: &CompareArgs,
    rule: &QuadratureRule,
) -> CliResult<ModelSpec> {
    if family.is_ggrician() {
        let cfg = ggrician::MhConfig { stream_id: index as u64, ..a.mh.config_for(a.common.seed, samples)? };
        return Ok(mh_fit(samples, &cfg, rule)?.model());
    }
    let cfg = ReferenceConfig {
        n_iter: a.ref_iter,
        looks: (a.looks > 0.0).then_some(a.looks),
        seed: a.common.seed,
        stream_id: index as u64,
        ..ReferenceConfig::default()
    };
    Ok(fit_reference(family, samples, &cfg, rule)?.model)
}

fn histogram_density(h: &Histogram, x: f64) -> f64 {
    let (lo, hi) = (h.edges[0], h.edges[h.n_bins()]);
    if !(lo..=hi).contains(&x) {
        return 0.0;
    }
    let bin = h.edges.partition_point(|&e| e <= x).saturating_sub(1).min(h.n_bins() - 1);
    h.densities[bin]
}

/// Curve of `model` on a grid covering the data and its upper tail.
///
/// `points` are spread uniformly over `[0, max(data)]`; up to 64 more follow
/// geometrically until the model's CDF reaches `1 − 1e-7`.
pub fn curve_rows(
    model: &ModelSpec,
    h: &Histogram,
    points: usize,
    rule: &QuadratureRule,
) -> CliResult<Vec<(f64, f64, f64)>> {
    let density = Density::new(model, rule)?;
    let top = h.edges[h.n_bins()];
    let mut xs: Vec<f64> = (0..points).map(|i| top * i as f64 / (points - 1) as f64).collect();
    let mut x = top;
    for _ in 0..64 {
        if cdf(model, x, rule)? >= 1.0 - 1e-7 {
            break;
        }
        x *= 1.15;
        xs.push(x);
    }
    Ok(xs
        .into_iter()
        .map(|x| {
            let f = density.pdf(x);
            (x, if f.is_finite() { f } else { 0.0 }, histogram_density(h, x))
        })
        .collect())
}

fn compare(a: &CompareArgs) -> CliResult<Outcome> {
    if a.curve_points < 2 {
        return Err(CliError::Usage("--curve-points must be at least 2".into()));
    }
    let rule = a.common.rule()?;
    a.mh.config(a.common.seed)?;
    let (samples, info) = load_sample_input(&a.input)?;
    let families = resolve_models(&a.models, samples.domain())?;
    let hist = build_histogram(samples.values())?;

    let reports: Vec<GofReport> = families
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let model = fit_one(f, i, &samples, a, &rule)?;
            Ok(evaluate(&model, &samples, &rule)?)
        })
        .collect::<CliResult<_>>()?;

    let difs = aicc_dif(&reports.iter().map(|r| r.aicc).collect::<Vec<_>>());
    let scores = score_models(std::slice::from_ref(&reports))?;
    let mut out = OutDir::create(&a.common.out)?;
    out.write_json(
        "report.json",
        &CompareReport {
            input: &info,
            reports: &reports,
            aicc_dif: reports
                .iter()
                .zip(&difs)
                .map(|(r, &value)| NamedValue { model: r.model.family().to_string(), value })
                .collect(),
            scores: scores.iter().map(|(m, p)| Score { model: m.clone(), percentage: *p }).collect(),
        },
    )?;

    let mut csv = format!("{REPORT_CSV_HEADER}\n");
    for r in &reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    out.write("report.csv", csv)?;
    let mut buf = Vec::new();
    write_scores_csv(&scores, &mut buf)?;
    out.write("scores.csv", buf)?;

    for r in &reports {
        let mut buf = Vec::new();
        writeln!(buf, "x,model_pdf,histogram_density")?;
        for (x, f, h) in curve_rows(&r.model, &hist, a.curve_points, &rule)? {
            writeln!(buf, "{x},{f},{h}")?;
        }
        out.write(&format!("curve_{}.csv", r.model.family()), buf)?;
    }
    for (m, p) in &scores {
        println!("{m}: {p:.2}%");
    }
    Ok(Outcome { inputs: vec![info.input], outputs: out.written, result: None })
}

fn map(a: &MapArgs) -> CliResult<Outcome> {
    let cfg = MapConfig {
        patch_size: a.patch_size,
        downsample_threshold: DOWNSAMPLE_THRESHOLD,
        downsample_n: a.input.downsample_n,
        min_edge: a.min_edge,
        mh: a.mh.config(a.common.seed)?,
        init_from_data: a.mh.init_from_data,
    };
    cfg.validate()?;
    let rule = a.common.rule()?;
    let img = match load_samples(&a.input.input, a.input.format(), a.input.domain)? {
        Loaded::Raster(img) => img,
        Loaded::Samples(_) => {
            return Err(CliError::Usage("map needs an image input (pgm or raw-f32), not CSV".into()))
        }
    };
    let map = fit_patches(&img, &cfg, &rule)?;
    let mut out = OutDir::create(&a.common.out)?;
    for path in map.write_grids(&a.common.out)? {
        out.written.push(path.file_name().expect("grid file name").to_string_lossy().into_owned());
    }
    println!("{}x{} patches, {} failed", map.rows, map.cols, map.failed_count());
    Ok(Outcome {
        inputs: vec![a.input.input.display().to_string()],
        outputs: out.written,
        result: Some(serde_json::to_value(&map)?),
    })
}
