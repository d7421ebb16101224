// A crop around the beak looks like a swan, so the baseline picks swan.
// Expanding the best crops brings in the cap and tail, and LGCA picks tern.
//
//     cargo run --example tern_vs_swan

use std::path::Path;

use lgca::bench::OpCounters;
use lgca::cli::load_descriptions;
use lgca::{Encoder, ImageFrame, Lgca, Region, RunConfig, ToyEncoder, ToyWorld};

fn main() -> lgca::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let encoder = ToyEncoder::new(ToyWorld::load(data.join("world.json"))?);
    let config = RunConfig::load(data.join("lgca.toml"))?.lgca();
    let image = ImageFrame::load(data.join("tern.png"))?;
    let descriptions = load_descriptions(data.join("descriptions.json"))?;

    let beak = encoder.embed_image_patch(&image, Region::new(10, 10, 10))?;
    let swan_text = encoder.embed_text(&descriptions["swan"][0])?;
    println!("beak crop vs '{}': {:.2}", descriptions["swan"][0], beak.dot(&swan_text)?);

    let lgca = Lgca::new(config, &encoder)?;
    let mut counters = OpCounters::default();
    let prepared = lgca.prepare(&image, &mut counters)?;
    println!("\n{:<6}{:>12}{:>12}", "label", "baseline", "LGCA");
    for (label, texts) in &descriptions {
        let descs = lgca.describe(label, texts, &mut counters)?;
        let q = lgca.baseline_q(&prepared, &descs, &mut counters)?;
        let sim = lgca.similarity(&prepared, label, &descs, &mut counters)?.sim;
        println!("{label:<6}{q:>12.6}{sim:>12.6}");
    }
    Ok(())
}
