use crate::imagecore::BinaryImage;

/// Pixel adjacency used for component labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            4 => Some(Self::Four),
            8 => Some(Self::Eight),
            _ => None,
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Self::Four => 4,
            Self::Eight => 8,
        }
    }

    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        const EIGHT: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        match self {
            Self::Four => &FOUR,
            Self::Eight => &EIGHT,
        }
    }
}

/// Labels foreground components. Returns per-pixel labels (0 = background,
/// components numbered from 1 in raster order of their first pixel) and
/// the size of each component, indexed by `label - 1`.
pub fn label_components(img: &BinaryImage, conn: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let data = img.data();
    let mut labels = vec![0u32; data.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..data.len() {
        if !data[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let mut size = 0;
        while let Some(p) = stack.pop() {
            size += 1;
            let (x, y) = ((p as isize) % w, (p as isize) / w);
            for &(dx, dy) in conn.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let q = (ny * w + nx) as usize;
                if data[q] && labels[q] == 0 {
                    labels[q] = label;
                    stack.push(q);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Clears every foreground component with fewer than `min_px` pixels.
pub fn remove_small_components(img: &BinaryImage, min_px: usize, conn: Connectivity) -> BinaryImage {
    let (labels, sizes) = label_components(img, conn);
    let mut out = img.clone();
    for (v, &l) in out.data_mut().iter_mut().zip(&labels) {
        if l != 0 && sizes[l as usize - 1] < min_px {
            *v = false;
        }
    }
    out
}
