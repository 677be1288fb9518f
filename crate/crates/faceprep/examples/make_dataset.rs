//! Generate a synthetic face-like dataset tree for trying out the CLI:
//!
//! ```text
//! cargo run --release -p faceprep --example make_dataset -- data/synth 7
//! ```

use std::path::PathBuf;

use faceprep::synth::{generate_dataset, SynthConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let root: PathBuf = args.next().unwrap_or_else(|| "data/synth".into()).into();
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = SynthConfig { seed, ..SynthConfig::default() };
    match generate_dataset(&root, &cfg) {
        Ok(manifest) => println!(
            "wrote {} classes x {} images to {}",
            manifest.classes.len(),
            cfg.images_per_class,
            root.display()
        ),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
