use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fixlab::pool::Strategy;
use fixlab::stats::ImageSubset;
use fixlab::Condition;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "fixlab",
    version,
    about = "Eye-movement analytics and gaze-assisted image classification",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a fixation log and annotations, write canonical copies and a preprocessing summary
    Ingest(IngestArgs),
    /// First-k fixation statistics per condition, with Welch t-tests between conditions
    Stats(StatsArgs),
    /// Gaussian fixation density maps per image and condition
    Density(DensityArgs),
    /// MultiMatch similarity between scan paths
    Multimatch(MultiMatchArgs),
    /// Recurrence quantification per scan path
    Rqa(RqaArgs),
    /// Dense gradient-histogram descriptors for a directory of PGM/PPM images
    Descriptors(DescriptorArgs),
    /// Learn a sparse-coding dictionary from a descriptor file
    DictLearn(DictLearnArgs),
    /// Sparse-code every descriptor against a dictionary
    Encode(EncodeArgs),
    /// Train a one-vs-rest linear SVM on pooled sparse codes of every labelled image
    Train(TrainArgs),
    /// Repeated train/test classification accuracy per pooling strategy
    Eval(EvalArgs),
    /// Summarize the reports found in the output directory as Markdown
    Report(ReportArgs),
    /// Write a planted synthetic benchmark (fixations, annotations, descriptors)
    Synth(SynthArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct Common {
    /// Output directory
    #[arg(long, env = "FIXLAB_OUT", default_value = "fixlab-out")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Seed for every stochastic step
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads [default: number of processors]
    #[arg(long)]
    #[serde(skip)]
    pub jobs: Option<usize>,
    /// Flat `key = value` file of flag values; flags on the command line win
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionArg {
    Fv,
    Vs,
    Both,
}

impl ConditionArg {
    pub fn conditions(self) -> Vec<Condition> {
        match self {
            ConditionArg::Fv => vec![Condition::FreeViewing],
            ConditionArg::Vs => vec![Condition::VisualSearch],
            ConditionArg::Both => Condition::ALL.to_vec(),
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GazeInput {
    /// Fixation log CSV
    #[arg(long)]
    pub fixations: PathBuf,
    /// Annotation JSON (array or JSON lines)
    #[arg(long)]
    pub annotations: PathBuf,
    /// Comma-separated target classes [default: bird,cat,cow,dog,horse,sheep]
    #[arg(long)]
    pub targets: Option<String>,
    /// Conditions to analyse
    #[arg(long, value_enum, default_value_t = ConditionArg::Both)]
    pub condition: ConditionArg,
}

#[derive(Args, Debug, Serialize)]
pub struct GeometryArgs {
    /// Eye-to-screen distance in cm
    #[arg(long, default_value_t = 60.0)]
    pub viewing_distance_cm: f64,
    /// Visible screen width in cm (17" 4:3 panel)
    #[arg(long, default_value_t = 34.544)]
    pub screen_width_cm: f64,
    /// Visible screen height in cm (17" 4:3 panel)
    #[arg(long, default_value_t = 25.908)]
    pub screen_height_cm: f64,
    /// Horizontal screen resolution in pixels
    #[arg(long, default_value_t = 1280)]
    pub resolution_x: u32,
    /// Vertical screen resolution in pixels
    #[arg(long, default_value_t = 1024)]
    pub resolution_y: u32,
}

#[derive(Args, Debug, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    pub gaze: GazeInput,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetArg {
    All,
    MultiInstance,
}

impl From<SubsetArg> for ImageSubset {
    fn from(s: SubsetArg) -> Self {
        match s {
            SubsetArg::All => ImageSubset::All,
            SubsetArg::MultiInstance => ImageSubset::MultiInstance,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub gaze: GazeInput,
    /// Leading fixations counted by the in-box and targets-fixated metrics
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Images included: all, or only those with two or more target instances
    #[arg(long, value_enum, default_value_t = SubsetArg::All)]
    pub subset: SubsetArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct DensityArgs {
    #[command(flatten)]
    pub gaze: GazeInput,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Gaussian sigma in degrees of visual angle
    #[arg(long, default_value_t = 2.0)]
    pub bandwidth_deg: f64,
    /// Weight each fixation by its duration instead of counting it once
    #[arg(long)]
    pub duration_weighted: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingArg {
    /// Subject pairs viewing the same image under the same condition
    Within,
    /// The same subject on the same image, free viewing against visual search
    Across,
    Both,
}

#[derive(Args, Debug, Serialize)]
pub struct MultiMatchArgs {
    #[command(flatten)]
    pub gaze: GazeInput,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long, value_enum, default_value_t = PairingArg::Both)]
    pub pairing: PairingArg,
    /// Simplification amplitude threshold as a fraction of the screen diagonal
    #[arg(long, default_value_t = 0.1)]
    pub amplitude_frac: f64,
    /// Simplification direction threshold in degrees
    #[arg(long, default_value_t = 45.0)]
    pub direction_threshold: f64,
    /// Compare raw saccade vectors without simplification
    #[arg(long)]
    pub no_simplify: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct RqaArgs {
    #[command(flatten)]
    pub gaze: GazeInput,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Recurrence radius in pixels [default: 2 degrees through the viewing geometry]
    #[arg(long)]
    pub radius_px: Option<f64>,
    /// Minimum line length for determinism and laminarity
    #[arg(long, default_value_t = 2)]
    pub min_line: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct DescriptorArgs {
    /// Directory of 8-bit PGM/PPM images; the file stem is the image id
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 8)]
    pub stride: usize,
    /// Spatial cells per patch side
    #[arg(long, default_value_t = 4)]
    pub cells: usize,
    /// Orientation bins per cell
    #[arg(long, default_value_t = 8)]
    pub orientations: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct CodingArgs {
    /// L1 penalty of the sparse-coding objective
    #[arg(long, default_value_t = 0.15)]
    pub lambda1: f64,
    /// Coordinate-descent stopping threshold on the largest coefficient change
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct DictLearnArgs {
    /// Descriptor file (GDSC)
    #[arg(long)]
    pub descriptors: PathBuf,
    /// Number of codewords
    #[arg(long, default_value_t = 256)]
    pub dict_size: usize,
    /// Coding/update alternations
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    /// Cap on descriptors drawn (seeded) for training
    #[arg(long, default_value_t = 50_000)]
    pub samples: usize,
    #[command(flatten)]
    pub coding: CodingArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct EncodeArgs {
    /// Descriptor file (GDSC)
    #[arg(long)]
    pub descriptors: PathBuf,
    /// Dictionary file (GDIC)
    #[arg(long)]
    pub dictionary: PathBuf,
    #[command(flatten)]
    pub coding: CodingArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    PyramidMax,
    PyramidAvg,
    FixMax,
    FixAvg,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::PyramidMax => Strategy::PyramidMax,
            StrategyArg::PyramidAvg => Strategy::PyramidAvg,
            StrategyArg::FixMax => Strategy::FixationMax,
            StrategyArg::FixAvg => Strategy::FixationAvg,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyInput {
    /// Descriptor file (GDSC)
    #[arg(long)]
    pub descriptors: PathBuf,
    /// Annotation JSON; images whose objects share one class are labelled with it
    #[arg(long)]
    pub annotations: PathBuf,
    /// Fixation log CSV, required by the fixation strategies
    #[arg(long)]
    pub fixations: Option<PathBuf>,
    /// Fixed dictionary (GDIC) instead of learning one from training descriptors
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// Fixations pooled by the fixation strategies; both takes the union
    #[arg(long, value_enum, default_value_t = ConditionArg::Both)]
    pub condition: ConditionArg,
    /// Codewords when learning a dictionary
    #[arg(long, default_value_t = 256)]
    pub dict_size: usize,
    /// Cap on training descriptors drawn for dictionary learning
    #[arg(long, default_value_t = 50_000)]
    pub dict_samples: usize,
    /// Coding/update alternations when learning a dictionary
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    #[command(flatten)]
    pub coding: CodingArgs,
    /// Side of the square pooling window around each fixation, in image pixels
    #[arg(long, default_value_t = 30.0)]
    pub window_px: f64,
    /// Multiplier applied to --window-px (e.g. display-to-image pixel ratio)
    #[arg(long, default_value_t = 1.0)]
    pub window_scale: f64,
    /// Pool the whole image for images without fixations instead of failing
    #[arg(long)]
    pub fallback_pyramid: bool,
    /// SVM regularization constant
    #[arg(long, default_value_t = 1.0)]
    pub c_reg: f64,
    /// SVM passes over the training set
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: ClassifyInput,
    #[arg(long, value_enum, default_value_t = StrategyArg::PyramidMax)]
    pub strategy: StrategyArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: ClassifyInput,
    /// Pooling strategy [default: all four]
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Train/test repetitions
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Fraction of each class used for training
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    #[arg(long, default_value_t = 60)]
    pub images_per_class: usize,
    /// Descriptor dimension
    #[arg(long, default_value_t = 16)]
    pub dimension: usize,
    /// Fraction of far background positions copying a random class prototype
    #[arg(long, default_value_t = 0.2)]
    pub clutter_rate: f64,
    #[command(flatten)]
    pub common: Common,
}
