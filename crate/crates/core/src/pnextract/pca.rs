use nalgebra::{Matrix3, SymmetricEigen};

use super::PipelineError;
use crate::imagecore::{GrayImage, ImageError, PlanarImage};

/// Principal components of the three channels of an image.
#[derive(Debug, Clone)]
pub struct PcaResult {
    /// Column `k` is the `k`-th principal direction. Each column's
    /// largest-magnitude entry is positive.
    pub coefficients: [[f64; 3]; 3],
    /// Channel-planar projections onto the components, same order as the columns.
    pub scores: Vec<[f64; 3]>,
    /// Descending, clamped at zero.
    pub eigenvalues: [f64; 3],
    /// Per-channel means subtracted before projection.
    pub means: [f64; 3],
    /// Set when every first-component score is identical.
    pub degenerate: bool,
}

impl PcaResult {
    pub fn coefficient_column(&self, k: usize) -> [f64; 3] {
        [self.coefficients[0][k], self.coefficients[1][k], self.coefficients[2][k]]
    }
}

/// Projects a 3-channel image onto its first principal component and
/// min-max normalises the scores to a grayscale image.
///
/// A constant first-component score yields an all-zero image with
/// `degenerate` set.
pub fn pca_grayscale(img: &PlanarImage) -> Result<(GrayImage, PcaResult), PipelineError> {
    if img.channels() != 3 {
        return Err(ImageError::ChannelCount(img.channels()).into());
    }
    let n = img.pixel_count();
    if n < 2 {
        return Err(PipelineError::DegenerateInput("PCA needs at least two pixels"));
    }
    let planes = [img.plane(0), img.plane(1), img.plane(2)];
    let means = planes.map(|p| p.iter().sum::<f64>() / n as f64);

    let mut cov = Matrix3::<f64>::zeros();
    for i in 0..n {
        let d = [planes[0][i] - means[0], planes[1][i] - means[1], planes[2][i] - means[2]];
        for r in 0..3 {
            for c in r..3 {
                cov[(r, c)] += d[r] * d[c];
            }
        }
    }
    for r in 0..3 {
        for c in r..3 {
            cov[(r, c)] /= (n - 1) as f64;
            cov[(c, r)] = cov[(r, c)];
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut coefficients = [[0.0; 3]; 3];
    let mut eigenvalues = [0.0; 3];
    for (k, &src) in order.iter().enumerate() {
        let mut col = [eig.eigenvectors[(0, src)], eig.eigenvectors[(1, src)], eig.eigenvectors[(2, src)]];
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        col.iter_mut().for_each(|v| *v /= norm);
        // sign convention: the largest-magnitude component is positive
        let mut pivot = 0;
        for j in 1..3 {
            if col[j].abs() > col[pivot].abs() {
                pivot = j;
            }
        }
        if col[pivot] < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for r in 0..3 {
            coefficients[r][k] = col[r];
        }
        eigenvalues[k] = eig.eigenvalues[src].max(0.0);
    }

    let mut scores = Vec::with_capacity(n);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let d = [planes[0][i] - means[0], planes[1][i] - means[1], planes[2][i] - means[2]];
        let mut s = [0.0; 3];
        for (k, sk) in s.iter_mut().enumerate() {
            *sk = d[0] * coefficients[0][k] + d[1] * coefficients[1][k] + d[2] * coefficients[2][k];
        }
        lo = lo.min(s[0]);
        hi = hi.max(s[0]);
        scores.push(s);
    }

    let degenerate = !(hi > lo);
    let gray = if degenerate {
        vec![0.0; n]
    } else {
        let span = hi - lo;
        scores.iter().map(|s| ((s[0] - lo) / span).clamp(0.0, 1.0)).collect()
    };
    let gray = GrayImage::from_raw(img.width(), img.height(), gray);
    Ok((gray, PcaResult { coefficients, scores, eigenvalues, means, degenerate }))
}
