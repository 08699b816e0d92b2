use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Each variant maps to a short, stable kind string (see [`Error::kind`])
/// that the CLI prints and tests match against.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape: {0}")]
    Shape(String),
    #[error("empty: {0}")]
    Empty(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("degenerate: {0}")]
    Degenerate(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("psf-not-normalized: sum is {0}")]
    PsfNotNormalized(f64),
    #[error("empty-psf: no positive mass")]
    EmptyPsf,
    #[error("degenerate-psf: all-zero transfer function")]
    DegeneratePsf,
    #[error("too-small: {height}x{width} is below {min}x{min}")]
    TooSmall { height: usize, width: usize, min: usize },
    #[error("camera: {0}")]
    Camera(String),
    #[error("no-points: point set is empty")]
    NoPoints,
    #[error("format: {0}")]
    Format(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Empty(_) => "empty",
            Error::NonFinite(_) => "non-finite",
            Error::Degenerate(_) => "degenerate",
            Error::Range(_) => "range",
            Error::PsfNotNormalized(_) => "psf-not-normalized",
            Error::EmptyPsf => "empty-psf",
            Error::DegeneratePsf => "degenerate-psf",
            Error::TooSmall { .. } => "too-small",
            Error::Camera(_) => "camera",
            Error::NoPoints => "no-points",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Image(_) => "image",
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
