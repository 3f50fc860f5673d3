use std::path::PathBuf;

/// Errors produced anywhere in the colorization library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid superpixel map: {0}")]
    InvalidSuperpixels(String),

    #[error("superpixel id {id} out of range (map has {count} superpixels)")]
    SuperpixelOutOfRange { id: usize, count: usize },

    #[error("color label {label} out of range (palette has {k} entries)")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("cannot form {k} clusters from {distinct} distinct chroma values; use a smaller cluster count")]
    TooManyClusters { k: usize, distinct: usize },

    #[error(
        "references yield only {available} superpixels, fewer than the {k} requested clusters; \
         use a smaller cluster count or larger references"
    )]
    TooFewSuperpixels { available: usize, k: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("entropy of an empty histogram is undefined")]
    EmptyHistogram,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error(
        "merge pair ({a}, {b}) references an unknown segment (segmentation has {count} segments)"
    )]
    InvalidMerge { a: usize, b: usize, count: usize },

    #[error("merge map line {line}: {message}")]
    MergeMapSyntax { line: usize, message: String },

    #[error("propagation needs at least one scribble")]
    NoScribbles,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("unsupported model version {0}")]
    UnsupportedVersion(u64),

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    /// True for errors that come from reading or writing files.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::Image { .. }
            | Error::ModelFormat(_)
            | Error::UnsupportedVersion(_)
            | Error::MergeMapSyntax { .. } => true,
            Error::Frame { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
