// Sample square crops from an image and grow one of them step by step.
//
//     cargo run --example crop_and_expand

use std::path::Path;

use lgca::{expand_region, extract_patch, sample_crops, CropParams, ImageFrame};

fn main() -> lgca::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let image = ImageFrame::load(data.join("tern_wide.png"))?;
    println!("{} is {}x{}", image.id(), image.width(), image.height());

    let params = CropParams {
        n_crops: 8,
        seed: 42,
        ..CropParams::default()
    };
    let crops = sample_crops(&image, &params)?;
    for (i, c) in crops.iter().enumerate() {
        println!("crop {i}: x0={:<3} y0={:<3} side={}", c.x0, c.y0, c.side);
    }

    let mut region = crops[0];
    println!("\ngrowing crop 0 by tau = 1.25 until it hits the short side:");
    loop {
        let next = expand_region(region, 1.25, &image)?;
        println!("  {region:?} -> {next:?}");
        if next == region {
            break;
        }
        region = next;
    }

    let patch = extract_patch(&image, crops[0], 32)?;
    println!("\ncrop 0 resampled to {}x{} as '{}'", patch.width(), patch.height(), patch.id());
    Ok(())
}
