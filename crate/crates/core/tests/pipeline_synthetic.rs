use pnkit_core::data::{synth_background, synth_network_image, SynthParams};
use pnkit_core::imagecore::{BinaryImage, RgbImage};
use pnkit_core::pnextract::{extract_batch, extract_pigment_network, PipelineConfig, Smoother, StageImage};

/// Recall against the ground truth and the fraction of mask pixels off it.
fn recall_and_false_fraction(mask: &BinaryImage, truth: &BinaryImage) -> (f64, f64) {
    let pairs = mask.data().iter().zip(truth.data());
    let hit = pairs.clone().filter(|(m, t)| **m && **t).count() as f64;
    let truth_px = truth.count_ones() as f64;
    let mask_px = mask.count_ones() as f64;
    (hit / truth_px, if mask_px > 0.0 { (mask_px - hit) / mask_px } else { 0.0 })
}

#[test]
fn grid_images_are_recovered() {
    let cfg = PipelineConfig::default();
    for seed in 0..5 {
        let (img, truth) = synth_network_image(&SynthParams { seed, ..Default::default() });
        let res = extract_pigment_network(&img, &cfg).unwrap();
        assert!(res.detected);
        let (recall, false_fraction) = recall_and_false_fraction(&res.mask, &truth);
        assert!(recall >= 0.7, "seed {seed}: recall {recall}");
        assert!(false_fraction <= 0.3, "seed {seed}: false fraction {false_fraction}");
    }
}

#[test]
fn gaussian_smoother_also_recovers_the_grid() {
    let cfg = PipelineConfig { smoother: Smoother::Gaussian, ..Default::default() };
    let (img, truth) = synth_network_image(&SynthParams { seed: 3, ..Default::default() });
    let res = extract_pigment_network(&img, &cfg).unwrap();
    let (recall, _) = recall_and_false_fraction(&res.mask, &truth);
    assert!(res.detected && recall >= 0.7, "recall {recall}");
}

#[test]
fn flat_images_have_no_network() {
    let cfg = PipelineConfig::default();
    for rgb in [[205, 160, 125], [0, 0, 0], [255, 255, 255]] {
        let res = extract_pigment_network(&RgbImage::filled(300, 200, rgb), &cfg).unwrap();
        assert!(!res.detected && res.mask.is_empty());
        assert!(res.colorized.pixels().all(|p| p == cfg.background));
    }
    let noisy = synth_background(&SynthParams { noise: 0.0, ..Default::default() });
    assert!(!extract_pigment_network(&noisy, &cfg).unwrap().detected);
}

#[test]
fn every_stage_has_the_resized_dims() {
    let cfg = PipelineConfig { resize: (200, 150), ..Default::default() };
    let (img, _) = synth_network_image(&SynthParams { width: 333, height: 251, seed: 2, ..Default::default() });
    let res = extract_pigment_network(&img, &cfg).unwrap();
    assert_eq!(res.stages.len(), 8);
    for (stage, image) in &res.stages {
        assert_eq!(image.dims(), (200, 150), "{stage:?}");
    }
    assert_eq!((res.mask.width(), res.mask.height()), (200, 150));
    assert_eq!((res.colorized.width(), res.colorized.height()), (200, 150));
    assert!(res.offset_used <= res.threshold_level);
    if let Some(StageImage::Binary(clean)) = res.stage(pnkit_core::pnextract::Stage::BinaryClean) {
        assert_eq!(clean, &res.mask);
    } else {
        panic!("clean mask stage missing");
    }
}

#[test]
fn batch_results_do_not_depend_on_thread_count() {
    let cfg = PipelineConfig { resize: (256, 256), ..Default::default() };
    let images: Vec<RgbImage> =
        (0..6).map(|seed| synth_network_image(&SynthParams { seed, ..Default::default() }).0).collect();
    let one = extract_batch(&images, &cfg, 1);
    let four = extract_batch(&images, &cfg, 4);
    for (a, b) in one.iter().zip(&four) {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.colorized, b.colorized);
        assert_eq!(a.threshold_level.to_bits(), b.threshold_level.to_bits());
    }
}
