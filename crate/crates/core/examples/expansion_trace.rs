// Follow one image-label pair through every expansion step.
//
//     cargo run --example expansion_trace

use std::path::Path;

use lgca::bench::OpCounters;
use lgca::cli::load_descriptions;
use lgca::{ImageFrame, Lgca, RunConfig, ToyEncoder, ToyWorld};

fn main() -> lgca::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let encoder = ToyEncoder::new(ToyWorld::load(data.join("world.json"))?);
    let config = RunConfig::load(data.join("lgca.toml"))?.lgca();
    let image = ImageFrame::load(data.join("tern.png"))?;
    let descriptions = load_descriptions(data.join("descriptions.json"))?;

    let lgca = Lgca::new(config, &encoder)?;
    println!("schedule {:?}, step weights {:?}", lgca.schedule().topk_per_step, lgca.step_weights());

    let mut counters = OpCounters::default();
    let prepared = lgca.prepare(&image, &mut counters)?;
    let descs = lgca.describe("tern", &descriptions["tern"], &mut counters)?;
    let score = lgca.similarity(&prepared, "tern", &descs, &mut counters)?;

    for step in &score.steps {
        let best = step.expanded.first().expect("at least one region survives");
        println!(
            "step {}: topK {:>2}, crops {:>3} -> {:>2}, score {:.6}, best region ({},{},{})",
            step.step, step.topk, step.crops_in, step.crops_out, step.score, best.x0, best.y0, best.side
        );
    }
    println!("Sim = {:.6}", score.sim);
    println!("{counters:?}");
    Ok(())
}
