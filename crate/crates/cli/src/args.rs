use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ggrician::{Domain, Format, MhConfig, QuadratureRule, SampleSet};
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ggrician", version, about = "GG-Rician modelling of SAR amplitude and intensity data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw GG-Rician samples into a CSV file.
    Synth(SynthArgs),
    /// Estimate GG-Rician parameters with the MH sampler.
    Fit(FitArgs),
    /// Fit several models to one data set and score their goodness of fit.
    Compare(CompareArgs),
    /// Fit every patch of an image and write parameter maps.
    Map(MapArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Fit(_) => "fit",
            Command::Compare(_) => "compare",
            Command::Map(_) => "map",
        }
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for every random draw of the run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Quadrature nodes for integral-form densities (multiple of 8).
    #[arg(long, default_value_t = QuadratureRule::DEFAULT_NODES)]
    pub quad_nodes: usize,
}

impl CommonArgs {
    /// The quadrature rule, after its doubling check.
    pub fn rule(&self) -> CliResult<QuadratureRule> {
        let rule = QuadratureRule::new(self.quad_nodes)?;
        ggrician::distributions::check_node_count(&rule)?;
        Ok(rule)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Input file.
    #[arg(long)]
    pub input: PathBuf,
    /// csv, pgm or raw-f32; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<Format>,
    /// amplitude or intensity; defaults to the file's tag, else amplitude.
    #[arg(long)]
    pub domain: Option<Domain>,
    /// Target size when inputs above 10000 samples are down-sampled.
    #[arg(long, default_value_t = 7500)]
    pub downsample_n: usize,
}

impl InputArgs {
    pub fn format(&self) -> Format {
        self.format.or_else(|| Format::from_path(&self.input)).unwrap_or(Format::Csv)
    }
}

/// MH sampler settings.
#[derive(Debug, Clone, Args, Serialize)]
pub struct MhArgs {
    #[arg(long, default_value_t = 1000)]
    pub n_iter: usize,
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    /// Half-width of the δ step.
    #[arg(long, default_value_t = 2.5)]
    pub epsilon: f64,
    /// Standard deviation of the γ step.
    #[arg(long, default_value_t = 3.0)]
    pub xi: f64,
    /// Half-width of the α step.
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub init_alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pub init_delta: f64,
    #[arg(long, default_value_t = 10.0)]
    pub init_gamma: f64,
    /// Probabilities of the δ, γ and α moves.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])]
    pub move_probs: Vec<f64>,
    /// Start the chain from a Rician moment match of the data instead of the
    /// --init-* values.
    #[arg(long)]
    pub init_from_data: bool,
}

impl MhArgs {
    pub fn config(&self, seed: u64) -> CliResult<MhConfig> {
        let probs: [f64; 3] = self
            .move_probs
            .clone()
            .try_into()
            .map_err(|_| CliError::Usage("--move-probs takes exactly three values".into()))?;
        let cfg = MhConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            epsilon: self.epsilon,
            xi: self.xi,
            eta: self.eta,
            init_alpha: self.init_alpha,
            init_delta: self.init_delta,
            init_gamma: self.init_gamma,
            move_probs: probs,
            seed,
            stream_id: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `config` with the data-driven start applied when requested.
    pub fn config_for(&self, seed: u64, data: &SampleSet) -> CliResult<MhConfig> {
        let cfg = self.config(seed)?;
        Ok(if self.init_from_data { cfg.start_from_moments(data) } else { cfg })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub delta: f64,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    /// Write intensities (squared amplitudes) instead of amplitudes.
    #[arg(long, default_value_t = Domain::Amplitude)]
    pub domain: Domain,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub mh: MhArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated model names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub models: Vec<String>,
    /// Iterations of the reference-model fits.
    #[arg(long, default_value_t = 2000)]
    pub ref_iter: usize,
    /// Fixed look count of the G0 model; 0 fits it.
    #[arg(long, default_value_t = 1.0)]
    pub looks: f64,
    /// Points in each exported curve.
    #[arg(long, default_value_t = 1001)]
    pub curve_points: usize,
    #[command(flatten)]
    pub mh: MhArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MapArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Patch edge length in pixels (at least 2).
    #[arg(long, default_value_t = 250)]
    pub patch_size: usize,
    /// Edge strips narrower than this are merged into their neighbour.
    #[arg(long, default_value_t = 50)]
    pub min_edge: usize,
    #[command(flatten)]
    pub mh: MhArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn mh_defaults() {
        let cli = Cli::try_parse_from(["ggrician", "fit", "--input", "x.csv", "--out", "o"]).unwrap();
        let Command::Fit(a) = cli.command else { panic!() };
        let cfg = a.mh.config(a.common.seed).unwrap();
        assert_eq!(cfg, MhConfig::default());
        assert_eq!(a.common.quad_nodes, 256);
        assert_eq!(a.input.downsample_n, 7500);
    }

    #[test]
    fn burn_in_must_be_below_n_iter() {
        let cli = Cli::try_parse_from([
            "ggrician", "fit", "--input", "x.csv", "--out", "o", "--burn-in", "1000", "--n-iter", "1000",
        ])
        .unwrap();
        let Command::Fit(a) = cli.command else { panic!() };
        assert_eq!(a.mh.config(0).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn init_from_data_moves_the_start() {
        let data = SampleSet::new(vec![4.8, 5.1, 5.3, 4.9, 5.0, 5.2], Domain::Amplitude, "t").unwrap();
        let parse = |extra: &[&str]| {
            let base = ["ggrician", "fit", "--input", "x.csv", "--out", "o"];
            let cli = Cli::try_parse_from(base.iter().chain(extra)).unwrap();
            let Command::Fit(a) = cli.command else { panic!() };
            a.mh.config_for(0, &data).unwrap()
        };
        assert_eq!(parse(&[]), MhConfig::default());
        let moved = parse(&["--init-from-data"]);
        assert!((moved.init_delta - 5.0 / 2f64.sqrt()).abs() < 0.1, "{moved:?}");
        assert_eq!(moved.n_iter, 1000);
    }

    #[test]
    fn format_guess() {
        let cli = Cli::try_parse_from(["ggrician", "map", "--input", "scene.pgm", "--out", "o"]).unwrap();
        let Command::Map(a) = cli.command else { panic!() };
        assert_eq!(a.input.format(), Format::Pgm);
        assert!(Cli::try_parse_from(["ggrician", "map", "--input", "a", "--out", "o", "--format", "tiff"]).is_err());
    }
}
