//! Automatic colorization of grayscale images from color references.
//!
//! Training splits each reference into superpixels, describes every
//! superpixel with a 172-D texture/intensity feature, quantizes the
//! superpixels' mean chroma into a palette and fits a randomized decision
//! forest from features to palette labels. Inference predicts a label per
//! superpixel, cleans the labels up by voting inside mean-shift segments,
//! drops one chroma scribble per superpixel and propagates the scribbles
//! over the image with a luminance-weighted least-squares solve.

pub mod color;
pub mod error;
pub mod features;
pub mod forest;
pub mod io;
pub mod model_file;
pub mod pipeline;
pub mod propagate;
pub mod quantize;
pub mod raster;
pub mod segment;
pub mod superpixel;

pub use color::{Lab, Rgb, Yuv};
pub use error::{Error, Result};
pub use features::{FeatureScales, FeatureVector, FEATURE_DIM};
pub use forest::{DecisionForest, DecisionTree, ForestConfig};
pub use model_file::{load_model, save_model};
pub use pipeline::{
    colorize, colorize_detailed, colorize_sequence, evaluate, train_model,
    train_model_with_summary, Colorization, Metrics, Model, PipelineConfig, TrainingSummary,
};
pub use quantize::ChromaPalette;
pub use raster::{to_grayscale, Raster};
pub use segment::Segmentation;
pub use superpixel::SuperpixelMap;
