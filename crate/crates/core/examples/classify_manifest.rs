// Classify every image in a manifest and write predictions.csv,
// traces.jsonl and summary.json, as `lgca classify` does.
//
//     cargo run --example classify_manifest

use std::path::Path;

use lgca::cli::{cmd_classify, ClassifyArgs};

fn main() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let scratch = tempfile::tempdir().expect("temp dir");
    let out = scratch.path().to_path_buf();

    let args = ClassifyArgs {
        manifest: data.join("manifest.json"),
        config: Some(data.join("lgca.toml")),
        encoder: Some(format!("toy:{}", data.join("world.json").display())),
        seed: None,
        out: out.clone(),
    };
    match cmd_classify(&args) {
        Ok(summary) => {
            print!("{}", std::fs::read_to_string(out.join("predictions.csv")).expect("predictions written"));
            println!("accuracy {:?} over {} images", summary.accuracy, summary.images);
        }
        Err(e) => {
            eprintln!("classify failed (exit {}): {e}", e.code);
            std::process::exit(e.code);
        }
    }
}
