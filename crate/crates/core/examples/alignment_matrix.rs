// Weight crops and descriptions, build their alignment matrix and pick the
// top-K cells.
//
//     cargo run --example alignment_matrix

use std::path::Path;

use lgca::alignment::{build_matrix, select_topk, WeightedCropSet, WeightedDescriptionSet};
use lgca::{sample_crops, CropParams, Encoder, ImageFrame, ToyEncoder, ToyWorld};

fn main() -> lgca::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let encoder = ToyEncoder::new(ToyWorld::load(data.join("world.json"))?);
    let image = ImageFrame::load(data.join("tern.png"))?;
    let whole = encoder.embed_image(&image)?;

    let regions = sample_crops(&image, &CropParams { n_crops: 6, seed: 3, ..CropParams::default() })?;
    let crop_embs = regions
        .iter()
        .map(|&r| encoder.embed_image_patch(&image, r))
        .collect::<lgca::Result<Vec<_>>>()?;
    let crops = WeightedCropSet::weighted_against(regions, crop_embs, &whole, 1.0)?;

    let texts: Vec<String> = ["black-cap forked-tail", "grey-wing forked-tail"].map(String::from).into();
    let label = encoder.embed_text("tern")?;
    let desc_embs = texts.iter().map(|t| encoder.embed_text(t)).collect::<lgca::Result<Vec<_>>>()?;
    let descs = WeightedDescriptionSet::weighted_against(texts, desc_embs, &label, 1.0)?;

    let matrix = build_matrix(&crops, &descs)?;
    println!("crop  weight   region              A[s][0]    A[s][1]");
    for s in 0..matrix.rows() {
        let r = crops.regions()[s];
        println!(
            "{s:>4}  {:.4}   ({:>2},{:>2},{:>2})          {:>9.5}  {:>9.5}",
            crops.weights()[s],
            r.x0,
            r.y0,
            r.side,
            matrix.get(s, 0),
            matrix.get(s, 1)
        );
    }
    println!("score = {:.6}", matrix.score());

    let top = select_topk(&matrix, 4);
    println!("top 4 cells {:?} -> rows {:?} ({} comparisons)", top.indices, top.rows, top.comparisons);
    Ok(())
}
