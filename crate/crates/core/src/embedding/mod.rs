//! Encoders mapping image patches and text into a shared unit-norm space.
//!
//! Two backends implement [`Encoder`]: [`ToyEncoder`], a deterministic
//! fixture whose outputs can be predicted by hand, and [`RemoteEncoder`],
//! a client for an out-of-process embedding server speaking the framed JSON
//! protocol in [`wire`].

mod remote;
mod toy;
pub mod wire;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ImageFrame, Region};

pub use remote::{RemoteEncoder, RemoteOptions};
pub use toy::{ToyEncoder, ToyWorld};

/// A k-dimensional vector with L2 norm 1 (within [`EmbeddingVector::NORM_TOLERANCE`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub const NORM_TOLERANCE: f64 = 1e-6;

    /// Scales `values` to unit length.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParams(format!(
                "embeddings need dim >= 2, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("embedding has non-finite component".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidParams("cannot normalize a zero vector".into()));
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    /// Accepts `values` only if they are already unit-norm.
    pub fn from_unit(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.len() < 2 || (norm - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::InvalidParams(format!(
                "expected a unit vector of dim >= 2, got dim {} with norm {norm}",
                values.len()
            )));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::normalized(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// One item of a batched embedding call.
#[derive(Debug, Clone, Copy)]
pub enum EmbedRequest<'a> {
    Text(&'a str),
    /// The whole frame, whatever its aspect ratio.
    Image(&'a ImageFrame),
    Patch {
        image: &'a ImageFrame,
        region: Region,
    },
}

pub trait Encoder: Send + Sync {
    /// Embedding width shared by image and text outputs.
    fn dim(&self) -> usize;

    fn embed_image(&self, image: &ImageFrame) -> Result<EmbeddingVector>;

    fn embed_image_patch(&self, image: &ImageFrame, region: Region) -> Result<EmbeddingVector>;

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector>;

    /// Order-preserving batch call. Backends may override this to amortize
    /// round-trips; results must equal the element-wise calls.
    fn embed_batch(&self, items: &[EmbedRequest<'_>]) -> Result<Vec<EmbeddingVector>> {
        items
            .iter()
            .enumerate()
            .map(|(index, item)| {
                self.embed_one(item).map_err(|e| Error::Batch {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    fn embed_one(&self, item: &EmbedRequest<'_>) -> Result<EmbeddingVector> {
        match *item {
            EmbedRequest::Text(text) => self.embed_text(text),
            EmbedRequest::Image(image) => self.embed_image(image),
            EmbedRequest::Patch { image, region } => self.embed_image_patch(image, region),
        }
    }
}

pub fn batch_embed<E: Encoder + ?Sized>(
    encoder: &E,
    items: &[EmbedRequest<'_>],
) -> Result<Vec<EmbeddingVector>> {
    encoder.embed_batch(items)
}

/// Parsed `--encoder` argument: `toy:PATH` or `remote:HOST:PORT`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncoderSpec {
    Toy(PathBuf),
    Remote { host: String, port: u16 },
}

impl FromStr for EncoderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("toy:") {
            if path.is_empty() {
                return Err(Error::Config(
                    "toy encoder needs a world file, e.g. toy:world.json".into(),
                ));
            }
            return Ok(Self::Toy(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("remote:") {
            let (host, port) = rest
                .rsplit_once(':')
                .ok_or_else(|| Error::Config(format!("remote encoder needs HOST:PORT, got '{rest}'")))?;
            let port = port
                .parse()
                .map_err(|_| Error::Config(format!("bad port '{port}'")))?;
            if host.is_empty() {
                return Err(Error::Config("remote encoder host is empty".into()));
            }
            return Ok(Self::Remote {
                host: host.to_string(),
                port,
            });
        }
        Err(Error::Config(format!(
            "unknown encoder '{s}', expected toy:PATH or remote:HOST:PORT"
        )))
    }
}

impl fmt::Display for EncoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Toy(path) => write!(f, "toy:{}", path.display()),
            Self::Remote { host, port } => write!(f, "remote:{host}:{port}"),
        }
    }
}

/// Either backend behind one concrete type.
#[derive(Debug)]
pub enum EncoderHandle {
    Toy(ToyEncoder),
    Remote(RemoteEncoder),
}

impl EncoderHandle {
    pub fn open(spec: &EncoderSpec, options: RemoteOptions) -> Result<Self> {
        match spec {
            EncoderSpec::Toy(path) => Ok(Self::Toy(ToyEncoder::new(ToyWorld::load(path)?))),
            EncoderSpec::Remote { host, port } => Ok(Self::Remote(RemoteEncoder::connect(
                &format!("{host}:{port}"),
                options,
            )?)),
        }
    }

    fn inner(&self) -> &dyn Encoder {
        match self {
            Self::Toy(e) => e,
            Self::Remote(e) => e,
        }
    }
}

impl Encoder for EncoderHandle {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn embed_image(&self, image: &ImageFrame) -> Result<EmbeddingVector> {
        self.inner().embed_image(image)
    }

    fn embed_image_patch(&self, image: &ImageFrame, region: Region) -> Result<EmbeddingVector> {
        self.inner().embed_image_patch(image, region)
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        self.inner().embed_text(text)
    }

    fn embed_batch(&self, items: &[EmbedRequest<'_>]) -> Result<Vec<EmbeddingVector>> {
        self.inner().embed_batch(items)
    }
}
