use super::NnError;

/// Dense `(batch, height, width, channels)` tensor, channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self, NnError> {
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(NnError::ShapeMismatch(format!("tensor {dims:?} needs {len} values, got {}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite);
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Self { dims, data: vec![0.0; dims.iter().product()] }
    }

    pub(crate) fn from_raw(dims: [usize; 4], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn height(&self) -> usize {
        self.dims[1]
    }

    pub fn width(&self) -> usize {
        self.dims[2]
    }

    pub fn channels(&self) -> usize {
        self.dims[3]
    }

    /// Elements per sample.
    pub fn sample_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn sample(&self, n: usize) -> &[f64] {
        let len = self.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn at(&self, n: usize, y: usize, x: usize, c: usize) -> f64 {
        let [_, h, w, ch] = self.dims;
        self.data[((n * h + y) * w + x) * ch + c]
    }

    /// Stacks equally shaped single samples into one batch.
    pub fn stack(samples: &[Tensor4]) -> Result<Self, NnError> {
        let first = samples.first().ok_or(NnError::EmptyDataset)?;
        let [_, h, w, c] = first.dims;
        let mut data = Vec::with_capacity(samples.iter().map(|s| s.data.len()).sum());
        let mut n = 0;
        for s in samples {
            if s.dims[1..] != [h, w, c] {
                return Err(NnError::ShapeMismatch("stacked samples differ in shape".into()));
            }
            n += s.dims[0];
            data.extend_from_slice(&s.data);
        }
        Ok(Self { dims: [n, h, w, c], data })
    }
}
