use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gaze_ident::{
    Anchor, DerivativeLevel, ExperimentConfig, Fragment, IvtConfig, RbfnConfig, SgConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "gaze-ident",
    version,
    about = "Identify users from eye-movement recordings",
    long_about = "Identify users from eye-movement recordings.\n\n\
        Pipeline: Savitzky-Golay smoothing, velocity-threshold (IVT) segmentation into \
        fixations and saccades, kinematic features up to the 5th derivative, one RBFN per \
        segment kind trained on session S1, fused scores on session S2."
)]
pub struct Cli {
    /// Worker threads for seeds and grid cells [default: available parallelism]
    #[arg(long, global = true, env = "GAZE_IDENT_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic paired-session dataset with ground truth
    Synth(SynthArgs),
    /// Load a dataset and check layout, sampling and pairing
    Validate(DatasetArgs),
    /// Write IVT segments (kind,start_idx,end_idx,duration_s) per recording
    Segment(SegmentArgs),
    /// Write per-segment features (user,session,kind,f1..fN)
    Features(FeaturesArgs),
    /// Run the identification experiment over all seeds
    Identify(IdentifyArgs),
    /// Accuracy for every derivative level 0..=5
    SweepDerivatives(SweepArgs),
    /// Accuracy over fragment durations x anchors x derivative levels
    SweepFragments(FragmentSweepArgs),
    /// Mean fixation count per user for a range of velocity thresholds
    SweepVt(VtSweepArgs),
    /// Rank features by one-way ANOVA F over users
    RankFeatures(RankArgs),
    /// Downsample every recording to a lower rate
    Resample(ResampleArgs),
    /// Mean fixation and saccade durations per user
    DurationSummary(DurationArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of users
    #[arg(long, default_value_t = 10)]
    pub users: usize,
    /// Seconds per session
    #[arg(long, default_value_t = 200.0)]
    pub duration: f64,
    /// Sampling rate in Hz
    #[arg(long, default_value_t = 200.0)]
    pub rate: f64,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Std of white measurement noise added to every sample (deg)
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    /// Dataset id (directory name under the output root)
    #[arg(long, default_value = "SYN")]
    pub dataset_id: String,
    /// Output root directory
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite a non-empty output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset root (contains manifest.json)
    pub dataset: PathBuf,
    /// Restrict to one dataset id when the root holds several
    #[arg(long)]
    pub dataset_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Velocity threshold (deg/s)
    #[arg(long, default_value_t = 90.0)]
    pub vt: f64,
    /// Minimum fixation duration (s)
    #[arg(long, default_value_t = 0.096)]
    pub mfd: f64,
    /// Savitzky-Golay polynomial order
    #[arg(long, default_value_t = 6)]
    pub sg_order: usize,
    /// Savitzky-Golay frame length (odd)
    #[arg(long, default_value_t = 15)]
    pub sg_frame: usize,
    /// Skip smoothing
    #[arg(long)]
    pub no_smooth: bool,
}

impl PipelineArgs {
    pub fn ivt(&self) -> gaze_ident::Result<IvtConfig> {
        IvtConfig::new(self.vt, self.mfd)
    }

    pub fn sg(&self) -> gaze_ident::Result<Option<SgConfig>> {
        if self.no_smooth {
            Ok(None)
        } else {
            SgConfig::new(self.sg_order, self.sg_frame).map(Some)
        }
    }
}

#[derive(Debug, Args)]
pub struct FragmentArgs {
    /// Use only this many seconds of each recording (cut after smoothing)
    #[arg(long)]
    pub fragment: Option<f64>,
    /// Which end of the recording the fragment is taken from
    #[arg(long, default_value = "start", value_parser = parse_anchor)]
    pub anchor: Anchor,
}

impl FragmentArgs {
    pub fn fragment(&self) -> Option<Fragment> {
        self.fragment.map(|duration_s| Fragment {
            duration_s,
            anchor: self.anchor,
        })
    }
}

#[derive(Debug, Args)]
pub struct ClassifierArgs {
    /// Classifier seeds: inclusive range A..B (also A-B or A..=B) or a list A,B,C
    #[arg(long, default_value = "0..49", value_parser = parse_seeds, conflicts_with = "seed")]
    pub seeds: SeedList,
    /// Run a single classifier seed (shorthand for --seeds N)
    #[arg(long)]
    pub seed: Option<u64>,
    /// RBF centres per classifier
    #[arg(long, default_value_t = 32)]
    pub k: usize,
    /// Ridge penalty of the output layer
    #[arg(long, default_value_t = 1e-6)]
    pub ridge: f64,
    /// Maximum k-means iterations
    #[arg(long, default_value_t = 100)]
    pub kmeans_iters: usize,
}

impl ClassifierArgs {
    pub fn seeds(&self) -> Vec<u64> {
        match self.seed {
            Some(s) => vec![s],
            None => self.seeds.0.clone(),
        }
    }

    pub fn rbfn(&self) -> RbfnConfig {
        RbfnConfig {
            k: self.k,
            seed: 0,
            ridge_lambda: self.ridge,
            kmeans_max_iters: self.kmeans_iters,
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub fragment: FragmentArgs,
    /// Output directory; one <dataset>/<user>/<session>.csv per recording
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite a non-empty output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub fragment: FragmentArgs,
    /// Highest derivative order (0 = position only ... 5 = crackle)
    #[arg(long, default_value = "5", value_parser = parse_level)]
    pub level: DerivativeLevel,
    /// Output CSV file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub fragment: FragmentArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    /// Highest derivative order (0 = position only ... 5 = crackle)
    #[arg(long, default_value = "5", value_parser = parse_level)]
    pub level: DerivativeLevel,
    /// Output JSON file with per-seed accuracies
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl IdentifyArgs {
    pub fn config(&self) -> gaze_ident::Result<ExperimentConfig> {
        experiment_config(
            self.level,
            &self.pipeline,
            self.fragment.fragment(),
            &self.classifier,
        )
    }
}

pub fn experiment_config(
    level: DerivativeLevel,
    pipeline: &PipelineArgs,
    fragment: Option<Fragment>,
    classifier: &ClassifierArgs,
) -> gaze_ident::Result<ExperimentConfig> {
    let cfg = ExperimentConfig {
        level,
        fragment,
        seeds: classifier.seeds(),
        ivt: pipeline.ivt()?,
        sg: pipeline.sg()?,
        rbfn: classifier.rbfn(),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub fragment: FragmentArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    /// Output CSV (level,n_features,mean,sd)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output JSON bundle with per-seed accuracies
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FragmentSweepArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    /// Fragment durations in seconds
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "60,80,100,120,130,140,150"
    )]
    pub durations: Vec<f64>,
    /// Output CSV with the best level per cell (duration,anchor,best_level,mean,sd)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output JSON bundle with the full grid
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VtSweepArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Smallest threshold (deg/s)
    #[arg(long, default_value_t = 1.0)]
    pub vt_min: f64,
    /// Largest threshold (deg/s)
    #[arg(long, default_value_t = 150.0)]
    pub vt_max: f64,
    /// Threshold step (deg/s)
    #[arg(long, default_value_t = 1.0)]
    pub vt_step: f64,
    /// Minimum fixation duration (s)
    #[arg(long, default_value_t = 0.096)]
    pub mfd: f64,
    /// Savitzky-Golay polynomial order
    #[arg(long, default_value_t = 6)]
    pub sg_order: usize,
    /// Savitzky-Golay frame length (odd)
    #[arg(long, default_value_t = 15)]
    pub sg_frame: usize,
    /// Skip smoothing
    #[arg(long)]
    pub no_smooth: bool,
    /// Output CSV (vt,mean_fixations)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Highest derivative order (0 = position only ... 5 = crackle)
    #[arg(long, default_value = "5", value_parser = parse_level)]
    pub level: DerivativeLevel,
    /// Rows per kind shown on stdout
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// Output CSV (rank,kind,feature,score)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ResampleArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Target rate in Hz (must not exceed the source rate)
    #[arg(long, default_value_t = 200.0)]
    pub rate: f64,
    /// Output root directory
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite a non-empty output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct DurationArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Output CSV (user,mean_fix_s,mean_sac_s)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_anchor(s: &str) -> Result<Anchor, String> {
    s.parse().map_err(|e: gaze_ident::Error| e.to_string())
}

fn parse_level(s: &str) -> Result<DerivativeLevel, String> {
    let n: u8 = s
        .parse()
        .map_err(|_| format!("expected an integer 0..=5, got {s:?}"))?;
    DerivativeLevel::new(n).map_err(|e| e.to_string())
}

/// A parsed `--seeds` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

/// Parses `A..B`, `A..=B`, `A-B` (all inclusive) or `A,B,C`.
pub fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|_| format!("invalid seed {t:?} in {s:?}"))
    };
    let range = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .or_else(|| s.split_once('-'));
    let seeds = match range {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b)?);
            if a > b {
                return Err(format!("empty seed range {s:?}"));
            }
            (a..=b).collect()
        }
        None => s.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
    };
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(format!("duplicate seeds in {s:?}"));
    }
    Ok(SeedList(seeds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("0..49").unwrap().0.len(), 50);
        assert_eq!(parse_seeds("3..=5").unwrap().0, vec![3, 4, 5]);
        assert_eq!(parse_seeds("3-5").unwrap().0, vec![3, 4, 5]);
        assert_eq!(parse_seeds("7").unwrap().0, vec![7]);
        assert_eq!(parse_seeds("1, 4,9").unwrap().0, vec![1, 4, 9]);
        assert!(parse_seeds("5..3").is_err());
        assert!(parse_seeds("1,1").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
