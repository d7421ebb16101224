// The deterministic toy encoder: regions embed to the mix of the labels
// they cover, text to the sum of its token prototypes.
//
//     cargo run --example toy_encoder

use std::path::Path;

use lgca::{Encoder, ImageFrame, Region, ToyEncoder, ToyWorld};

fn main() -> lgca::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let encoder = ToyEncoder::new(ToyWorld::load(data.join("world.json"))?);
    let image = ImageFrame::load(data.join("tern.png"))?;

    let texts = ["black-cap forked-tail", "orange-beak white-plumage", "sky"];
    let regions = [
        ("beak", Region::new(10, 10, 10)),
        ("head", Region::new(10, 0, 40)),
        ("wing", Region::new(50, 0, 50)),
        ("lower half", Region::new(0, 50, 50)),
    ];
    println!("{:<12}{:>24}{:>28}{:>8}", "region", texts[0], texts[1], texts[2]);
    let text_embs = texts.iter().map(|t| encoder.embed_text(t)).collect::<lgca::Result<Vec<_>>>()?;
    for (name, region) in regions {
        let e = encoder.embed_image_patch(&image, region)?;
        let cos = text_embs.iter().map(|t| e.dot(t)).collect::<lgca::Result<Vec<_>>>()?;
        println!("{name:<12}{:>24.4}{:>28.4}{:>8.4}", cos[0], cos[1], cos[2]);
    }

    // tokens missing from the lexicon still get a stable vector
    let a = encoder.embed_text("heron")?;
    let b = encoder.embed_text("Heron!")?;
    println!("\nunknown token 'heron' is stable across spellings: {}", a == b);
    Ok(())
}
