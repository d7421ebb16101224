//! The expansion step, its top-K schedule, the LGCA similarity and the
//! non-expanding baseline.
//!
//! One evaluation of an (image, label) pair runs as follows:
//!
//! 1. sample `N` square crops, embed them, and weight each by softmax of its
//!    cosine to the whole image;
//! 2. embed the label's descriptions and weight them against the label;
//! 3. for `j = 1..=T`, build the alignment matrix of the current crop set,
//!    record its score as `score_j`, keep the rows holding the
//!    `topk_per_step[j]` largest entries, grow those crops by `tau`, re-embed
//!    and re-weight them;
//! 4. `Sim = sum_j alpha_j * score_j`.
//!
//! The baseline stops after the first matrix, so its score is exactly
//! `score_1`.

use serde::{Deserialize, Serialize};

use crate::alignment::{build_matrix, select_topk, WeightedCropSet, WeightedDescriptionSet};
use crate::bench::OpCounters;
use crate::embedding::{EmbedRequest, EmbeddingVector, Encoder};
use crate::error::{Error, Result};
use crate::geometry::{expand_region, sample_crops, CropParams, ImageFrame, Region};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// `topK_j = floor(N / 2^j)` for `j = 1..=T`, with `T = floor(log2 N)`.
    #[default]
    Halving,
    /// Start from a fixed `K` and halve down to 1.
    FixedInitial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub n_crops: usize,
    pub mode: ScheduleMode,
    pub topk_per_step: Vec<usize>,
}

impl Schedule {
    pub fn steps(&self) -> usize {
        self.topk_per_step.len()
    }
}

fn halving_from(start: usize) -> Vec<usize> {
    std::iter::successors(Some(start), |&k| Some(k / 2))
        .take_while(|&k| k >= 1)
        .collect()
}

pub fn make_schedule(n_crops: usize, mode: ScheduleMode, fixed_topk: Option<usize>) -> Result<Schedule> {
    let topk_per_step = match mode {
        ScheduleMode::Halving => {
            if n_crops < 2 {
                return Err(Error::DegenerateN(n_crops));
            }
            halving_from(n_crops / 2)
        }
        ScheduleMode::FixedInitial => match fixed_topk {
            Some(k) if k >= 1 => halving_from(k),
            other => {
                return Err(Error::InvalidParams(format!(
                    "fixed_initial schedule needs fixed_topk >= 1, got {other:?}"
                )))
            }
        },
    };
    Ok(Schedule {
        n_crops,
        mode,
        topk_per_step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgcaConfig {
    pub crop: CropParams,
    pub tau: f64,
    /// `alpha_j` per step; `None` means uniform `1/T`.
    pub step_weights: Option<Vec<f64>>,
    pub temperature: f64,
    pub schedule: ScheduleMode,
    /// Initial top-K for [`ScheduleMode::FixedInitial`].
    pub fixed_topk: usize,
}

impl Default for LgcaConfig {
    fn default() -> Self {
        Self {
            crop: CropParams::default(),
            tau: 1.25,
            step_weights: None,
            temperature: 1.0,
            schedule: ScheduleMode::Halving,
            fixed_topk: 10,
        }
    }
}

impl LgcaConfig {
    pub fn schedule(&self) -> Result<Schedule> {
        make_schedule(self.crop.n_crops, self.schedule, Some(self.fixed_topk))
    }

    /// Validates everything and returns the schedule with resolved step weights.
    pub fn resolve(&self) -> Result<(Schedule, Vec<f64>)> {
        self.crop.validate()?;
        if !(self.tau.is_finite() && self.tau > 1.0) {
            return Err(Error::InvalidParams(format!("tau must be > 1, got {}", self.tau)));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidParams(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        let schedule = self.schedule()?;
        let steps = schedule.steps();
        let weights = match &self.step_weights {
            None => vec![1.0 / steps as f64; steps],
            Some(w) => {
                if w.len() != steps {
                    return Err(Error::InvalidParams(format!(
                        "{} step weights given for a {steps}-step schedule",
                        w.len()
                    )));
                }
                if w.iter().any(|a| !(a.is_finite() && *a >= 0.0)) || w.iter().all(|a| *a == 0.0) {
                    return Err(Error::InvalidParams(
                        "step weights must be >= 0 and not all zero".into(),
                    ));
                }
                w.clone()
            }
        };
        Ok((schedule, weights))
    }
}

/// What one expansion step did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTrace {
    pub step: usize,
    pub topk: usize,
    pub crops_in: usize,
    pub crops_out: usize,
    pub score: f64,
    pub selected: Vec<(usize, usize)>,
    pub entries_computed: u64,
    pub comparisons: u64,
    /// Regions handed to the next step.
    pub expanded: Vec<Region>,
}

/// An image with its whole-frame embedding and initial weighted crops.
#[derive(Debug, Clone)]
pub struct PreparedImage<'a> {
    pub image: &'a ImageFrame,
    pub embedding: EmbeddingVector,
    pub crops: WeightedCropSet,
}

fn embed_counted<E: Encoder + ?Sized>(
    encoder: &E,
    items: &[EmbedRequest<'_>],
    counters: &mut OpCounters,
) -> Result<Vec<EmbeddingVector>> {
    counters.encoder_calls += items.len() as u64;
    encoder.embed_batch(items)
}

fn embed_regions<E: Encoder + ?Sized>(
    encoder: &E,
    image: &ImageFrame,
    regions: &[Region],
    counters: &mut OpCounters,
) -> Result<Vec<EmbeddingVector>> {
    let items: Vec<_> = regions
        .iter()
        .map(|&region| EmbedRequest::Patch { image, region })
        .collect();
    embed_counted(encoder, &items, counters)
}

/// Runs one expansion step on `crops` and returns the expanded, re-weighted
/// crop set with its trace. `trace.step` is left at 0 for the caller to set.
#[allow(clippy::too_many_arguments)]
pub fn expansion_step<E: Encoder + ?Sized>(
    prepared: &PreparedImage<'_>,
    crops: &WeightedCropSet,
    descs: &WeightedDescriptionSet,
    topk: usize,
    tau: f64,
    temperature: f64,
    encoder: &E,
    counters: &mut OpCounters,
) -> Result<(WeightedCropSet, StepTrace)> {
    if topk == 0 {
        return Err(Error::InvalidParams("topK must be >= 1".into()));
    }
    let matrix = build_matrix(crops, descs)?;
    counters.matrix_entries += matrix.len() as u64;

    let selection = select_topk(&matrix, topk);
    counters.sort_comparisons += selection.comparisons;

    let expanded = selection
        .rows
        .iter()
        .map(|&row| expand_region(crops.regions()[row], tau, prepared.image))
        .collect::<Result<Vec<_>>>()?;
    counters.expansions += expanded.len() as u64;

    let embeddings = embed_regions(encoder, prepared.image, &expanded, counters)?;
    let next = WeightedCropSet::weighted_against(
        expanded.clone(),
        embeddings,
        &prepared.embedding,
        temperature,
    )?;

    let trace = StepTrace {
        step: 0,
        topk,
        crops_in: crops.len(),
        crops_out: next.len(),
        score: matrix.score(),
        selected: selection.indices,
        entries_computed: matrix.len() as u64,
        comparisons: selection.comparisons,
        expanded,
    };
    Ok((next, trace))
}

/// Similarity of one (image, label) pair with its per-step provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelScore {
    pub label: String,
    pub sim: f64,
    pub steps: Vec<StepTrace>,
}

impl LabelScore {
    /// `score_1`, which is the baseline score for the same crops.
    pub fn first_score(&self) -> f64 {
        self.steps.first().map_or(f64::NAN, |s| s.score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub image_id: String,
    pub scores: Vec<LabelScore>,
    pub predicted: String,
}

/// Highest `sim`; ties go to the lexicographically smallest label.
pub fn argmax_label(scores: &[LabelScore]) -> Option<&LabelScore> {
    scores.iter().reduce(|best, s| {
        if s.sim > best.sim || (s.sim == best.sim && s.label < best.label) {
            s
        } else {
            best
        }
    })
}

/// A configured evaluator bound to an encoder.
#[derive(Debug)]
pub struct Lgca<'e, E: Encoder + ?Sized> {
    config: LgcaConfig,
    schedule: Schedule,
    step_weights: Vec<f64>,
    encoder: &'e E,
}

impl<'e, E: Encoder + ?Sized> Lgca<'e, E> {
    pub fn new(config: LgcaConfig, encoder: &'e E) -> Result<Self> {
        let (schedule, step_weights) = config.resolve()?;
        Ok(Self {
            config,
            schedule,
            step_weights,
            encoder,
        })
    }

    pub fn config(&self) -> &LgcaConfig {
        &self.config
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn step_weights(&self) -> &[f64] {
        &self.step_weights
    }

    /// Samples, embeds and weights the initial crops of `image`.
    pub fn prepare<'a>(&self, image: &'a ImageFrame, counters: &mut OpCounters) -> Result<PreparedImage<'a>> {
        let regions = sample_crops(image, &self.config.crop)?;
        let mut items = Vec::with_capacity(regions.len() + 1);
        items.push(EmbedRequest::Image(image));
        items.extend(regions.iter().map(|&region| EmbedRequest::Patch { image, region }));
        let mut embeddings = embed_counted(self.encoder, &items, counters)?;
        let embedding = embeddings.remove(0);
        let crops = WeightedCropSet::weighted_against(regions, embeddings, &embedding, self.config.temperature)?;
        Ok(PreparedImage {
            image,
            embedding,
            crops,
        })
    }

    /// Embeds a label's descriptions and weights them against the label text.
    pub fn describe(&self, label: &str, texts: &[String], counters: &mut OpCounters) -> Result<WeightedDescriptionSet> {
        if texts.is_empty() {
            return Err(Error::EmptyInput("label has no descriptions"));
        }
        let mut items = Vec::with_capacity(texts.len() + 1);
        items.push(EmbedRequest::Text(label));
        items.extend(texts.iter().map(|t| EmbedRequest::Text(t)));
        let mut embeddings = embed_counted(self.encoder, &items, counters)?;
        let reference = embeddings.remove(0);
        WeightedDescriptionSet::weighted_against(texts.to_vec(), embeddings, &reference, self.config.temperature)
    }

    pub fn similarity(
        &self,
        prepared: &PreparedImage<'_>,
        label: &str,
        descs: &WeightedDescriptionSet,
        counters: &mut OpCounters,
    ) -> Result<LabelScore> {
        let mut crops = prepared.crops.clone();
        let mut steps = Vec::with_capacity(self.schedule.steps());
        for (j, &topk) in self.schedule.topk_per_step.iter().enumerate() {
            let (next, mut trace) = expansion_step(
                prepared,
                &crops,
                descs,
                topk,
                self.config.tau,
                self.config.temperature,
                self.encoder,
                counters,
            )?;
            trace.step = j + 1;
            steps.push(trace);
            crops = next;
        }
        let sim = self
            .step_weights
            .iter()
            .zip(&steps)
            .fold(0.0, |acc, (alpha, s)| acc + alpha * s.score);
        Ok(LabelScore {
            label: label.to_string(),
            sim,
            steps,
        })
    }

    /// Score of the single alignment matrix over the initial crops.
    pub fn baseline_q(
        &self,
        prepared: &PreparedImage<'_>,
        descs: &WeightedDescriptionSet,
        counters: &mut OpCounters,
    ) -> Result<f64> {
        let matrix = build_matrix(&prepared.crops, descs)?;
        counters.matrix_entries += matrix.len() as u64;
        Ok(matrix.score())
    }

    /// Scores every candidate on one shared crop set and picks the argmax.
    pub fn classify(
        &self,
        image: &ImageFrame,
        candidates: &[(String, WeightedDescriptionSet)],
        counters: &mut OpCounters,
    ) -> Result<SimilarityReport> {
        if candidates.is_empty() {
            return Err(Error::EmptyInput("no candidate labels"));
        }
        let prepared = self.prepare(image, counters)?;
        let scores = candidates
            .iter()
            .map(|(label, descs)| self.similarity(&prepared, label, descs, counters))
            .collect::<Result<Vec<_>>>()?;
        let predicted = argmax_label(&scores).expect("non-empty").label.clone();
        Ok(SimilarityReport {
            image_id: image.id().to_string(),
            scores,
            predicted,
        })
    }
}

/// One-shot LGCA similarity for a single pair.
pub fn lgca_similarity<E: Encoder + ?Sized>(
    image: &ImageFrame,
    label: &str,
    descs: &WeightedDescriptionSet,
    config: &LgcaConfig,
    encoder: &E,
) -> Result<LabelScore> {
    let lgca = Lgca::new(config.clone(), encoder)?;
    let mut counters = OpCounters::default();
    let prepared = lgca.prepare(image, &mut counters)?;
    lgca.similarity(&prepared, label, descs, &mut counters)
}

/// One-shot baseline score for a single pair.
pub fn baseline_q_similarity<E: Encoder + ?Sized>(
    image: &ImageFrame,
    descs: &WeightedDescriptionSet,
    config: &LgcaConfig,
    encoder: &E,
) -> Result<f64> {
    let lgca = Lgca::new(config.clone(), encoder)?;
    let mut counters = OpCounters::default();
    let prepared = lgca.prepare(image, &mut counters)?;
    lgca.baseline_q(&prepared, descs, &mut counters)
}

pub fn classify<E: Encoder + ?Sized>(
    image: &ImageFrame,
    candidates: &[(String, WeightedDescriptionSet)],
    config: &LgcaConfig,
    encoder: &E,
) -> Result<SimilarityReport> {
    Lgca::new(config.clone(), encoder)?.classify(image, candidates, &mut OpCounters::default())
}
