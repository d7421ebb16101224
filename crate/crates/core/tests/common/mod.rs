#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lgca::{ImageFrame, LgcaConfig, RunConfig, ToyEncoder, ToyWorld};
use serde::Deserialize;
use serde_json::Value;

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(Debug, Deserialize)]
pub struct ImageSpec {
    pub id: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Deserialize)]
pub struct Probe {
    pub region: [u32; 3],
    pub description: String,
}

#[derive(Debug, Deserialize)]
pub struct LabelExpected {
    pub q: f64,
    pub lgca: f64,
    pub scores: Vec<f64>,
    pub crops_in: Vec<usize>,
}

#[derive(Debug, Deserialize)]
pub struct ProbeExpected {
    pub expanded: [u32; 3],
    pub cos_before: f64,
    pub cos_after: f64,
}

#[derive(Debug, Deserialize)]
pub struct Expected {
    pub labels: BTreeMap<String, LabelExpected>,
    pub probe: ProbeExpected,
}

/// A toy-world scenario with values frozen by the Python oracle.
pub struct Fixture {
    pub encoder: ToyEncoder,
    pub image: ImageFrame,
    pub descriptions: BTreeMap<String, Vec<String>>,
    pub config: LgcaConfig,
    pub probe: Probe,
    pub expected: Expected,
}

pub fn load_fixture(name: &str) -> Fixture {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    let doc: Value = serde_json::from_str(&text).expect("fixture is JSON");
    let world = ToyWorld::from_json_value(doc["world"].clone()).expect("world parses");
    let image: ImageSpec = serde_json::from_value(doc["image"].clone()).unwrap();
    let run: RunConfig = serde_json::from_value(doc["config"].clone()).unwrap();
    Fixture {
        encoder: ToyEncoder::new(world),
        image: ImageFrame::filled(image.id, image.width, image.height, [0, 0, 0]).unwrap(),
        descriptions: serde_json::from_value(doc["descriptions"].clone()).unwrap(),
        config: run.lgca(),
        probe: serde_json::from_value(doc["probe"].clone()).unwrap(),
        expected: serde_json::from_value(doc["expected"].clone()).unwrap(),
    }
}

const VOCAB: [&str; 10] = [
    "beak", "wing", "tail", "crest", "breast", "sky", "water", "reed", "rock", "leaf",
];

/// A random toy scene: image, encoder, one label with its descriptions, and
/// a config with random crop count, scale and temperature.
pub struct RandomScene {
    pub encoder: ToyEncoder,
    pub image: ImageFrame,
    pub label: String,
    pub descriptions: Vec<String>,
    pub config: LgcaConfig,
}

pub fn random_scene(seed: u64) -> RandomScene {
    use lgca::rng::Stream;
    let mut rng = Stream::new(seed);
    let mut between = |lo: u32, hi: u32| lo + rng.below(hi - lo + 1);
    let (width, height) = (between(24, 160), between(24, 160));
    let (gw, gh) = (between(1, 12) as usize, between(1, 12) as usize);
    let n_crops = between(2, 64) as usize;
    let m = between(1, 6) as usize;
    let cells: Vec<usize> = (0..gw * gh).map(|_| between(0, 9) as usize).collect();
    let words: Vec<usize> = (0..m * 3).map(|_| between(0, 9) as usize).collect();
    let tau = 1.05 + f64::from(between(0, 100)) / 100.0;
    let temperature = 0.05 + f64::from(between(0, 100)) / 50.0;
    let crop_seed = u64::from(between(0, u32::MAX - 1));

    let rows = cells
        .chunks(gw)
        .map(|r| r.iter().map(|&c| VOCAB[c].to_string()).collect())
        .collect();
    let id = format!("scene{seed}");
    let mut world = ToyWorld::new(8, seed).unwrap();
    world.insert_grid(&id, rows).unwrap();
    let descriptions = words
        .chunks(3)
        .map(|w| format!("{} {} {}", VOCAB[w[0]], VOCAB[w[1]], VOCAB[w[2]]))
        .collect();
    let mut config = LgcaConfig {
        tau,
        temperature,
        ..LgcaConfig::default()
    };
    config.crop.n_crops = n_crops;
    config.crop.seed = crop_seed;
    RandomScene {
        encoder: ToyEncoder::new(world),
        image: ImageFrame::filled(id, width, height, [0, 0, 0]).unwrap(),
        label: "bird".into(),
        descriptions,
        config,
    }
}
