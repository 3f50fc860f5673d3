//! Training and inference end to end.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::rgb_to_lab;
use crate::error::{Error, Result};
use crate::features::{assemble_features, FeatureScales, FeatureVector};
use crate::forest::{train_forest, DecisionForest, ForestConfig, TrainingSet};
use crate::io::to_u8;
use crate::propagate::{
    compose_output, compute_weights, place_scribbles, propagate_chroma, ScribbleSet, SolverOptions,
};
use crate::quantize::{count_distinct, quantize_chroma, ChromaPalette};
use crate::raster::{to_grayscale, Raster};
use crate::segment::{
    apply_merge_map, meanshift_segment, vote_refine, MeanShiftParams, Segmentation,
};
use crate::superpixel::{extract_superpixels, SuperpixelMap};

/// Mean chroma is rounded to this grid before clustering so that regions of
/// one flat color count as a single distinct value.
const CHROMA_GRID: f64 = 1e-6;

/// Every tunable of training and inference. Field names double as the keys
/// of the CLI config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub target_superpixel_size: usize,
    pub clusters: usize,
    pub trees: usize,
    pub dims_per_node: usize,
    pub thresholds_per_dim: usize,
    pub min_gain: f64,
    pub max_depth: usize,
    pub min_node: usize,
    pub bootstrap: bool,
    pub spatial_bandwidth: f64,
    pub range_bandwidth: f64,
    pub min_region: usize,
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let f = ForestConfig::default();
        PipelineConfig {
            target_superpixel_size: 40,
            clusters: 32,
            trees: f.trees,
            dims_per_node: f.dims_per_node,
            thresholds_per_dim: f.thresholds_per_dim,
            min_gain: f.min_gain,
            max_depth: f.max_depth,
            min_node: f.min_node,
            bootstrap: f.bootstrap,
            spatial_bandwidth: 2.0,
            range_bandwidth: 3.0,
            min_region: 20,
            cg_tolerance: 1e-8,
            cg_max_iterations: 10_000,
            seed: 42,
        }
    }
}

impl PipelineConfig {
    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            trees: self.trees,
            dims_per_node: self.dims_per_node,
            thresholds_per_dim: self.thresholds_per_dim,
            min_gain: self.min_gain,
            max_depth: self.max_depth,
            min_node: self.min_node,
            bootstrap: self.bootstrap,
            seed: self.seed,
        }
    }

    pub fn mean_shift(&self) -> MeanShiftParams {
        MeanShiftParams {
            spatial_bandwidth: self.spatial_bandwidth,
            range_bandwidth: self.range_bandwidth,
            min_region: self.min_region,
        }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.cg_tolerance,
            max_iterations: self.cg_max_iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::InvalidInput(format!(
                "config: {what} must be positive"
            )))
        };
        if self.target_superpixel_size == 0 {
            return bad("target_superpixel_size");
        }
        if self.clusters == 0 {
            return bad("clusters");
        }
        if self.spatial_bandwidth.is_nan() || self.spatial_bandwidth <= 0.0 {
            return bad("spatial_bandwidth");
        }
        if self.range_bandwidth.is_nan() || self.range_bandwidth <= 0.0 {
            return bad("range_bandwidth");
        }
        if self.min_region == 0 {
            return bad("min_region");
        }
        if self.cg_tolerance.is_nan() || self.cg_tolerance <= 0.0 {
            return bad("cg_tolerance");
        }
        if self.cg_max_iterations == 0 {
            return bad("cg_max_iterations");
        }
        self.forest_config().validate()
    }
}

/// A trained colorization model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: PipelineConfig,
    pub palette: ChromaPalette,
    pub feature_scales: FeatureScales,
    pub forest: DecisionForest,
}

impl Model {
    pub fn new(
        config: PipelineConfig,
        palette: ChromaPalette,
        feature_scales: FeatureScales,
        forest: DecisionForest,
    ) -> Result<Self> {
        if forest.n_labels() != palette.k() {
            return Err(Error::InvalidInput(format!(
                "forest predicts {} labels but the palette has {}",
                forest.n_labels(),
                palette.k()
            )));
        }
        Ok(Model {
            config,
            palette,
            feature_scales,
            forest,
        })
    }

    /// Scaled feature vectors of a gray image's superpixels.
    pub fn features(&self, gray: &Raster, sp: &SuperpixelMap) -> Result<Vec<FeatureVector>> {
        let mut f = assemble_features(gray, sp)?;
        self.feature_scales.apply(&mut f);
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    /// Superpixel count of each reference, in input order.
    pub superpixels: Vec<usize>,
    /// Number of palette entries actually used.
    pub palette_size: usize,
}

/// Mean (a, b) of every superpixel of a color image.
fn superpixel_chroma(img: &Raster, sp: &SuperpixelMap) -> Vec<[f64; 2]> {
    let lab: Vec<_> = (0..img.len()).map(|p| rgb_to_lab(img.rgb_at(p))).collect();
    let snap = |v: f64| (v / CHROMA_GRID).round() * CHROMA_GRID;
    (0..sp.len())
        .map(|i| {
            let m = sp.members(i);
            let (a, b) = m
                .iter()
                .fold((0.0, 0.0), |acc, &p| (acc.0 + lab[p].a, acc.1 + lab[p].b));
            [snap(a / m.len() as f64), snap(b / m.len() as f64)]
        })
        .collect()
}

pub fn train_model(refs: &[Raster], cfg: &PipelineConfig) -> Result<Model> {
    train_model_with_summary(refs, cfg).map(|(m, _)| m)
}

/// Trains a model and reports per-reference statistics.
pub fn train_model_with_summary(
    refs: &[Raster],
    cfg: &PipelineConfig,
) -> Result<(Model, TrainingSummary)> {
    cfg.validate()?;
    if refs.is_empty() {
        return Err(Error::InvalidInput(
            "at least one reference image is required".into(),
        ));
    }
    let per_ref = refs
        .par_iter()
        .map(|img| {
            let rgb = img.to_rgb();
            let gray = to_grayscale(&rgb);
            let sp = extract_superpixels(&gray, cfg.target_superpixel_size)?;
            let features = assemble_features(&gray, &sp)?;
            let chroma = superpixel_chroma(&rgb, &sp);
            Ok((features, chroma))
        })
        .collect::<Result<Vec<_>>>()?;

    let superpixels: Vec<usize> = per_ref.iter().map(|r| r.0.len()).collect();
    let available: usize = superpixels.iter().sum();
    if available < cfg.clusters {
        return Err(Error::TooFewSuperpixels {
            available,
            k: cfg.clusters,
        });
    }
    let (mut features, chroma): (Vec<_>, Vec<_>) =
        per_ref
            .into_iter()
            .fold((vec![], vec![]), |mut acc, (f, c)| {
                acc.0.extend(f);
                acc.1.extend(c);
                acc
            });

    let k = cfg.clusters.min(count_distinct(&chroma));
    if k < cfg.clusters {
        log::info!(
            "only {k} distinct reference colors; using {k} clusters instead of {}",
            cfg.clusters
        );
    }
    let (palette, labels) = quantize_chroma(&chroma, k, cfg.seed)?;
    let scales = FeatureScales::fit(&features);
    scales.apply(&mut features);
    let set = TrainingSet::new(features, labels, k)?;
    let forest = train_forest(&set, &cfg.forest_config())?;
    let model = Model::new(*cfg, palette, scales, forest)?;
    Ok((
        model,
        TrainingSummary {
            superpixels,
            palette_size: k,
        },
    ))
}

/// Every intermediate product of one colorization.
#[derive(Debug, Clone)]
pub struct Colorization {
    pub superpixels: SuperpixelMap,
    /// Forest argmax label per superpixel.
    pub predicted: Vec<usize>,
    /// Segmentation before any user merges.
    pub segments: Segmentation,
    /// Segmentation the vote actually used.
    pub merged_segments: Segmentation,
    /// Labels after segment voting.
    pub labels: Vec<usize>,
    pub scribbles: ScribbleSet,
    pub output: Raster,
}

/// Colorizes one gray image. Color inputs are reduced to their luminance.
pub fn colorize(
    gray: &Raster,
    model: &Model,
    cfg: &PipelineConfig,
    merges: Option<&[(usize, usize)]>,
) -> Result<Raster> {
    colorize_detailed(gray, model, cfg, merges).map(|c| c.output)
}

pub fn colorize_detailed(
    gray: &Raster,
    model: &Model,
    cfg: &PipelineConfig,
    merges: Option<&[(usize, usize)]>,
) -> Result<Colorization> {
    cfg.validate()?;
    let gray = to_grayscale(gray);
    let sp = extract_superpixels(&gray, cfg.target_superpixel_size)?;
    let features = model.features(&gray, &sp)?;
    let predicted: Vec<usize> = features
        .iter()
        .map(|f| model.forest.predict_label(&f[..]))
        .collect();

    let segments = meanshift_segment(&gray, &cfg.mean_shift())?;
    let merged_segments = match merges {
        Some(m) => apply_merge_map(&segments, m)?,
        None => segments.clone(),
    };
    let labels = vote_refine(&predicted, &sp, &merged_segments)?;

    let scribbles = place_scribbles(&sp, &labels, &model.palette, &gray)?;
    let stencil = compute_weights(&gray)?;
    let (u, v) = propagate_chroma(&stencil, &scribbles, &cfg.solver())?;
    let output = compose_output(&gray, &u, &v)?;
    Ok(Colorization {
        superpixels: sp,
        predicted,
        segments,
        merged_segments,
        labels,
        scribbles,
        output,
    })
}

/// Colorizes frames independently; errors carry the frame index.
pub fn colorize_sequence(
    frames: &[Raster],
    model: &Model,
    cfg: &PipelineConfig,
) -> Result<Vec<Raster>> {
    frames
        .par_iter()
        .enumerate()
        .map(|(index, f)| {
            colorize(f, model, cfg, None).map_err(|e| Error::Frame {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mean_ab_error: f64,
    pub psnr: f64,
}

pub const PSNR_CAP: f64 = 99.0;

/// Mean CIELab (a, b) distance and 8-bit RGB PSNR. Gray inputs are treated
/// as neutral RGB.
pub fn evaluate(result: &Raster, truth: &Raster) -> Result<Metrics> {
    if !result.same_shape(truth) {
        return Err(Error::ShapeMismatch {
            expected: (truth.width(), truth.height()),
            actual: (result.width(), result.height()),
        });
    }
    let (x, y) = (result.to_rgb(), truth.to_rgb());
    let n = x.len();
    let mut ab = 0.0;
    for p in 0..n {
        let (a, b) = (rgb_to_lab(x.rgb_at(p)), rgb_to_lab(y.rgb_at(p)));
        ab += (a.a - b.a).hypot(a.b - b.b);
    }
    let mut se = 0.0;
    for c in 0..3 {
        for (&u, &v) in x.channel(c).iter().zip(y.channel(c)) {
            let d = f64::from(to_u8(u)) - f64::from(to_u8(v));
            se += d * d;
        }
    }
    let mse = se / (3 * n) as f64;
    let psnr = if mse == 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (255.0 * 255.0 / mse).log10()).min(PSNR_CAP)
    };
    Ok(Metrics {
        mean_ab_error: ab / n as f64,
        psnr,
    })
}
