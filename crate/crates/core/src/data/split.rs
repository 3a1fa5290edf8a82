use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, LabeledImage, PnLabel};

/// Per-class seeded shuffle, then a cut at `round(fraction * class size)`.
///
/// Items are sorted by id before shuffling so the result depends only on
/// the item set and the seed.
pub fn stratified_split(
    items: &[LabeledImage],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledImage>, Vec<LabeledImage>), DataError> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(DataError::BadFraction(train_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for label in PnLabel::ALL {
        let mut class: Vec<&LabeledImage> = items.iter().filter(|i| i.label == label).collect();
        if class.len() < 2 {
            return Err(DataError::ClassTooSmall { label, size: class.len(), part: "input" });
        }
        class.sort_by(|a, b| a.id.cmp(&b.id));
        class.shuffle(&mut rng);
        let cut = (train_fraction * class.len() as f64).round() as usize;
        if cut == 0 {
            return Err(DataError::ClassTooSmall { label, size: 0, part: "train" });
        }
        if cut == class.len() {
            return Err(DataError::ClassTooSmall { label, size: 0, part: "validation" });
        }
        train.extend(class[..cut].iter().map(|&i| i.clone()));
        val.extend(class[cut..].iter().map(|&i| i.clone()));
    }
    Ok((train, val))
}
