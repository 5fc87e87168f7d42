use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::idx::MnistImages;
use crate::domain::{Sample, Target};
use crate::error::{Result, SolaError};

/// One sub-unit's private slice of MNIST: a fixed label set, at most `cap`
/// images, optionally corrupted by pixel noise.
#[derive(Clone, Debug, PartialEq)]
pub struct MnistShard {
    pub label_set: Vec<u8>,
    pub cap: Option<usize>,
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl MnistShard {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.images
            .iter()
            .zip(&self.labels)
            .map(|(img, &y)| Sample::new(img.clone(), Target::Class(y)))
            .collect()
    }
}

/// Splits the ten digit classes over `n_subunits` shards of
/// `labels_per_shard` consecutive labels each.
///
/// Shard `j` holds labels `j·L .. (j+1)·L − 1`. When more images are available
/// than `cap`, a uniform sample (kept in file order) is taken. Every pixel then
/// receives independent `N(0, noise_variance)` noise and is clamped to `[0, 1]`.
pub fn make_shards(
    images: &MnistImages,
    labels: &[u8],
    n_subunits: usize,
    labels_per_shard: usize,
    cap: Option<usize>,
    noise_variance: f64,
    rng: &mut impl Rng,
) -> Result<Vec<MnistShard>> {
    if n_subunits * labels_per_shard != 10 {
        return Err(SolaError::invalid(format!(
            "{n_subunits} sub-units × {labels_per_shard} labels does not cover the 10 classes"
        )));
    }
    if labels.len() != images.count {
        return Err(SolaError::invalid("image and label counts differ"));
    }
    if noise_variance < 0.0 {
        return Err(SolaError::invalid("noise variance must be nonnegative"));
    }
    let noise = Normal::new(0.0, noise_variance.sqrt()).expect("finite variance");
    let mut shards = Vec::with_capacity(n_subunits);
    for j in 0..n_subunits {
        let lo = (j * labels_per_shard) as u8;
        let hi = lo + labels_per_shard as u8;
        let label_set: Vec<u8> = (lo..hi).collect();
        let candidates: Vec<usize> = (0..labels.len())
            .filter(|&i| (lo..hi).contains(&labels[i]))
            .collect();
        let chosen: Vec<usize> = match cap {
            Some(c) if candidates.len() > c => {
                let mut picks: Vec<usize> = index::sample(rng, candidates.len(), c)
                    .into_iter()
                    .map(|i| candidates[i])
                    .collect();
                picks.sort_unstable();
                picks
            }
            _ => candidates,
        };
        let mut shard_images = Vec::with_capacity(chosen.len());
        for &i in &chosen {
            let mut img = images.image(i).to_vec();
            if noise_variance > 0.0 {
                for p in &mut img {
                    *p = (*p + noise.sample(rng)).clamp(0.0, 1.0);
                }
            }
            shard_images.push(img);
        }
        shards.push(MnistShard {
            label_set,
            cap,
            labels: chosen.iter().map(|&i| labels[i]).collect(),
            images: shard_images,
        });
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn fake(count: usize) -> (MnistImages, Vec<u8>) {
        let labels: Vec<u8> = (0..count).map(|i| (i % 10) as u8).collect();
        let pixels = (0..count * 4).map(|i| (i % 7) as f64 / 7.0).collect();
        (
            MnistImages {
                count,
                rows: 2,
                cols: 2,
                pixels,
            },
            labels,
        )
    }

    #[test]
    fn two_labels_per_shard() {
        let (img, lbl) = fake(500);
        let shards = make_shards(&img, &lbl, 5, 2, Some(20), 0.5, &mut seeded(0)).unwrap();
        assert_eq!(shards.len(), 5);
        assert_eq!(shards[0].label_set, vec![0, 1]);
        for s in &shards {
            assert!(s.labels.iter().all(|l| s.label_set.contains(l)));
            assert_eq!(s.len(), 20);
            assert!(s.images.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn one_label_per_shard() {
        let (img, lbl) = fake(300);
        let shards = make_shards(&img, &lbl, 10, 1, Some(128), 0.0, &mut seeded(0)).unwrap();
        assert!(shards[3].labels.iter().all(|&l| l == 3));
        // only 30 images of each label exist, fewer than the cap
        assert_eq!(shards[3].len(), 30);
    }

    #[test]
    fn exact_partition_without_noise_or_cap() {
        let (img, lbl) = fake(100);
        let shards = make_shards(&img, &lbl, 5, 2, None, 0.0, &mut seeded(0)).unwrap();
        let total: usize = shards.iter().map(MnistShard::len).sum();
        assert_eq!(total, 100);
        for s in &shards {
            for (pixels, &y) in s.images.iter().zip(&s.labels) {
                let i = (0..100)
                    .find(|&i| lbl[i] == y && img.image(i) == pixels.as_slice())
                    .expect("image is an unmodified original");
                assert_eq!(lbl[i], y);
            }
        }
    }

    #[test]
    fn label_arithmetic_mismatch() {
        let (img, lbl) = fake(10);
        assert!(make_shards(&img, &lbl, 3, 2, None, 0.0, &mut seeded(0)).is_err());
    }
}
