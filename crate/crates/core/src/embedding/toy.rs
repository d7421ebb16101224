use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::embedding::{EmbeddingVector, Encoder};
use crate::error::{Error, Result};
use crate::geometry::{ImageFrame, Region};
use crate::rng::{fnv1a64, Stream};

/// Label layout for one image. Cells are stretched over the image so that
/// pixel `(x, y)` belongs to cell `(y * rows / height, x * cols / width)`.
#[derive(Debug, Clone)]
struct FeatureGrid {
    rows: usize,
    cols: usize,
    /// Sorted, deduplicated labels; `cells` index into this.
    labels: Vec<String>,
    cells: Vec<usize>,
}

impl FeatureGrid {
    fn from_rows(image_id: &str, rows: Vec<Vec<String>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParams(format!(
                "feature grid for '{image_id}' must be a non-empty rectangle"
            )));
        }
        let mut labels: Vec<String> = rows.iter().flatten().cloned().collect();
        labels.sort();
        labels.dedup();
        let cells = rows
            .iter()
            .flatten()
            .map(|l| labels.binary_search(l).expect("label collected above"))
            .collect();
        Ok(Self {
            rows: rows.len(),
            cols,
            labels,
            cells,
        })
    }

    /// Pixel counts of `[lo, hi)` falling in each of `cells` bands over `extent` pixels.
    fn band_counts(lo: u32, hi: u32, cells: usize, extent: u32) -> Vec<u64> {
        let (extent, cells_u) = (u64::from(extent), cells as u64);
        let start = |c: u64| (c * extent).div_ceil(cells_u);
        (0..cells_u)
            .map(|c| {
                let a = start(c).max(u64::from(lo));
                let b = start(c + 1).min(u64::from(hi));
                b.saturating_sub(a)
            })
            .collect()
    }

    /// Covered area per label index for the rectangle `[x0, x1) x [y0, y1)`.
    fn coverage(&self, width: u32, height: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> Vec<u64> {
        let cols = Self::band_counts(x0, x1, self.cols, width);
        let rows = Self::band_counts(y0, y1, self.rows, height);
        let mut area = vec![0u64; self.labels.len()];
        for (r, &rc) in rows.iter().enumerate() {
            if rc == 0 {
                continue;
            }
            for (c, &cc) in cols.iter().enumerate() {
                area[self.cells[r * self.cols + c]] += rc * cc;
            }
        }
        area
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LexiconEntry {
    Vector(Vec<f64>),
    Seeded { seed: u64 },
}

#[derive(Deserialize)]
struct WorldFile {
    dim: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    grid: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default)]
    lexicon: BTreeMap<String, LexiconEntry>,
}

/// Deterministic fixture world: per-image feature-label grids plus a
/// lexicon of prototype vectors. Anything missing from the lexicon gets a
/// pseudo-prototype derived from `seed ^ fnv1a64(token)`.
#[derive(Debug, Clone)]
pub struct ToyWorld {
    dim: usize,
    seed: u64,
    grids: BTreeMap<String, FeatureGrid>,
    lexicon: BTreeMap<String, EmbeddingVector>,
}

impl ToyWorld {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParams(format!("toy world dim must be >= 2, got {dim}")));
        }
        Ok(Self {
            dim,
            seed,
            grids: BTreeMap::new(),
            lexicon: BTreeMap::new(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WorldFile = serde_json::from_str(text)?;
        Self::from_value(file)
    }

    /// Parses the `"world"` object out of an already-decoded JSON document.
    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        Self::from_value(serde_json::from_value(value)?)
    }

    fn from_value(file: WorldFile) -> Result<Self> {
        let mut world = Self::new(file.dim, file.seed)?;
        for (token, entry) in file.lexicon {
            let proto = match entry {
                LexiconEntry::Vector(v) => {
                    if v.len() != world.dim {
                        return Err(Error::DimMismatch {
                            expected: world.dim,
                            got: v.len(),
                        });
                    }
                    EmbeddingVector::normalized(v)?
                }
                LexiconEntry::Seeded { seed } => world.seeded(seed),
            };
            world.insert_prototype(token, proto)?;
        }
        for (id, rows) in file.grid {
            world.insert_grid(id, rows)?;
        }
        Ok(world)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read toy world {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert_grid(&mut self, image_id: impl Into<String>, rows: Vec<Vec<String>>) -> Result<()> {
        let id = image_id.into();
        let grid = FeatureGrid::from_rows(&id, rows)?;
        self.grids.insert(id, grid);
        Ok(())
    }

    /// Adds a lexicon entry. Prototypes must be pairwise distinct.
    pub fn insert_prototype(&mut self, token: impl Into<String>, proto: EmbeddingVector) -> Result<()> {
        let token = token.into();
        if proto.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: proto.dim(),
            });
        }
        if let Some((other, _)) = self.lexicon.iter().find(|(t, p)| **t != token && **p == proto) {
            return Err(Error::InvalidParams(format!(
                "prototypes for '{token}' and '{other}' coincide"
            )));
        }
        self.lexicon.insert(token, proto);
        Ok(())
    }

    fn seeded(&self, seed: u64) -> EmbeddingVector {
        let mut rng = Stream::new(seed);
        let values = (0..self.dim).map(|_| 2.0 * rng.unit() - 1.0).collect();
        // a 2+ dim draw from [-1, 1)^k is zero with probability 0
        EmbeddingVector::normalized(values).expect("nonzero pseudo-random vector")
    }

    /// Lexicon vector for `token`, or its hashed pseudo-prototype.
    pub fn prototype(&self, token: &str) -> EmbeddingVector {
        match self.lexicon.get(token) {
            Some(p) => p.clone(),
            None => self.seeded(self.seed ^ fnv1a64(token)),
        }
    }

    fn grid(&self, image: &ImageFrame) -> Result<&FeatureGrid> {
        self.grids.get(image.id()).ok_or_else(|| {
            Error::InvalidParams(format!("toy world has no feature grid for image '{}'", image.id()))
        })
    }

    fn mix(&self, weighted: impl Iterator<Item = (u64, EmbeddingVector)>) -> Result<EmbeddingVector> {
        let mut items: Vec<(u64, EmbeddingVector)> = weighted.filter(|(w, _)| *w > 0).collect();
        match items.len() {
            0 => Err(Error::EmptyInput("nothing to embed")),
            1 => Ok(items.pop().expect("one item").1),
            _ => {
                let mut acc = vec![0.0; self.dim];
                for (w, proto) in &items {
                    let w = *w as f64;
                    for (a, p) in acc.iter_mut().zip(proto.as_slice()) {
                        *a += w * p;
                    }
                }
                EmbeddingVector::normalized(acc)
            }
        }
    }

    fn embed_rect(&self, image: &ImageFrame, x0: u32, y0: u32, x1: u32, y1: u32) -> Result<EmbeddingVector> {
        let grid = self.grid(image)?;
        let area = grid.coverage(image.width(), image.height(), x0, y0, x1, y1);
        self.mix(
            area.into_iter()
                .zip(&grid.labels)
                .map(|(a, label)| (a, self.prototype(label))),
        )
    }

    pub fn tokenize(text: &str) -> Vec<String> {
        text.split_whitespace()
            .map(|raw| {
                raw.chars()
                    .filter(|c| c.is_alphanumeric() || *c == '-' || *c == '_')
                    .flat_map(char::to_lowercase)
                    .collect::<String>()
            })
            .filter(|t| !t.is_empty())
            .collect()
    }
}

/// [`Encoder`] over a [`ToyWorld`].
///
/// Image patches embed to the area-weighted mixture of the prototypes of the
/// labels they cover; text embeds to the sum of its token prototypes. A
/// region or text that touches a single label returns that prototype
/// unchanged.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    world: ToyWorld,
}

impl ToyEncoder {
    pub fn new(world: ToyWorld) -> Self {
        Self { world }
    }

    pub fn world(&self) -> &ToyWorld {
        &self.world
    }
}

impl Encoder for ToyEncoder {
    fn dim(&self) -> usize {
        self.world.dim
    }

    fn embed_image(&self, image: &ImageFrame) -> Result<EmbeddingVector> {
        self.world.embed_rect(image, 0, 0, image.width(), image.height())
    }

    fn embed_image_patch(&self, image: &ImageFrame, region: Region) -> Result<EmbeddingVector> {
        region.check(image)?;
        self.world
            .embed_rect(image, region.x0, region.y0, region.x1(), region.y1())
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        let tokens = ToyWorld::tokenize(text);
        if tokens.is_empty() {
            return Err(Error::EmptyInput("text has no tokens"));
        }
        if tokens.iter().all(|t| *t == tokens[0]) {
            return Ok(self.world.prototype(&tokens[0]));
        }
        self.world
            .mix(tokens.iter().map(|t| (1, self.world.prototype(t))))
    }
}
