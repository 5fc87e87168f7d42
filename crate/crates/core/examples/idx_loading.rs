//! Reading IDX image and label files and splitting them into label-restricted,
//! noisy sub-unit shards.
//!
//! cargo run --release --example idx_loading -- [images] [labels]

use std::path::PathBuf;

use sola::models::{load_idx, make_shards, IdxData};
use sola::rng::seeded;

fn main() -> sola::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    let mut args = std::env::args().skip(1);
    let images = args.next().map(PathBuf::from).unwrap_or_else(|| data.join("train-images-idx3-ubyte"));
    let labels = args.next().map(PathBuf::from).unwrap_or_else(|| data.join("train-labels-idx1-ubyte"));

    let IdxData::Images(images) = load_idx(&images)? else {
        return Err(sola::SolaError::InvalidArgument("first file does not hold images".into()));
    };
    let IdxData::Labels(labels) = load_idx(&labels)? else {
        return Err(sola::SolaError::InvalidArgument("second file does not hold labels".into()));
    };
    println!("{} images of {}x{}, {} labels", images.count, images.rows, images.cols, labels.len());
    let mut counts = [0usize; 10];
    for &l in &labels {
        counts[l as usize] += 1;
    }
    println!("label counts {counts:?}");

    for (units, per) in [(5, 2), (10, 1)] {
        let shards = make_shards(&images, &labels, units, per, Some(128), 0.5, &mut seeded(0))?;
        let sets: Vec<String> = shards.iter().map(|s| format!("{:?}:{}", s.label_set, s.images.len())).collect();
        println!("{units} sub-units: {}", sets.join(" "));
    }
    Ok(())
}
