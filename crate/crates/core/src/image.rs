//! Planar image carriers.

use crate::error::{NebiError, Result};
use crate::tensor_file::NdArray;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    LinearRaw,
    Srgb,
}

impl ColorSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            ColorSpace::LinearRaw => "linear_raw",
            ColorSpace::Srgb => "srgb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear_raw" => Some(ColorSpace::LinearRaw),
            "srgb" => Some(ColorSpace::Srgb),
            _ => None,
        }
    }
}

/// `channels x height x width` image stored row-major per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    channels: usize,
    height: usize,
    width: usize,
    space: ColorSpace,
    data: Vec<f32>,
}

impl PlanarImage {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        space: ColorSpace,
        data: Vec<f32>,
    ) -> Result<Self> {
        if channels == 0 || height < 2 || width < 2 {
            return Err(NebiError::InvalidDims(vec![channels, height, width]));
        }
        if data.len() != channels * height * width {
            return Err(NebiError::ShapeMismatch(format!(
                "{} values for {channels}x{height}x{width}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(NebiError::Validation(format!("non-finite pixel {v}")));
        }
        Ok(PlanarImage {
            channels,
            height,
            width,
            space,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, space: ColorSpace, v: f32) -> Self {
        Self::new(channels, height, width, space, vec![v; channels * height * width])
            .expect("filled image dims")
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        space: ColorSpace,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, space, data).expect("from_fn image")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn space(&self) -> ColorSpace {
        self.space
    }
    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn with_space(mut self, space: ColorSpace) -> Self {
        self.space = space;
        self
    }

    /// Applies `f` to every value. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        let data: Vec<f32> = self.data.iter().map(|&v| f(v)).collect();
        assert!(data.iter().all(|v| v.is_finite()), "map produced non-finite value");
        PlanarImage {
            data,
            ..self.clone()
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn to_array(&self) -> NdArray {
        NdArray::new(vec![self.channels, self.height, self.width], self.data.clone())
            .expect("image dims are valid")
    }

    pub fn from_array(array: &NdArray, space: ColorSpace) -> Result<Self> {
        match array.dims() {
            &[c, h, w] => Self::new(c, h, w, space, array.data().to_vec()),
            d => Err(NebiError::ShapeMismatch(format!("expected 3 dims, got {d:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BayerPattern {
    Rggb,
}

/// Bayer RAW packed into four half-resolution planes `R, G1, G2, B`.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedRaw {
    height: usize,
    width: usize,
    pattern: BayerPattern,
    data: Vec<f32>,
}

impl PackedRaw {
    /// `height`/`width` are the packed (half-resolution) dimensions.
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(NebiError::InvalidDims(vec![4, height, width]));
        }
        if data.len() != 4 * height * width {
            return Err(NebiError::ShapeMismatch(format!(
                "{} values for packed 4x{height}x{width}",
                data.len()
            )));
        }
        if let Some(&v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(NebiError::NegativePixel(v));
        }
        Ok(PackedRaw {
            height,
            width,
            pattern: BayerPattern::Rggb,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn pattern(&self) -> BayerPattern {
        self.pattern
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}
