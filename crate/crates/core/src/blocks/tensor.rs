use crate::error::{Error, Result};
use crate::image::Image;

/// Dense `(C, H, W)` feature map, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::shape(
                format!("({channels}, {height}, {width})"),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    /// Single-channel tensor holding an image.
    pub fn from_image(img: &Image) -> Self {
        Self {
            channels: 1,
            height: img.n(),
            width: img.n(),
            data: img.values().to_vec(),
        }
    }

    /// Channel 0 as an image; the tensor must be square.
    pub fn to_image(&self) -> Result<Image> {
        if self.height != self.width {
            return Err(Error::shape("square tensor", format!("{}x{}", self.height, self.width)));
        }
        Image::from_vec(self.height, self.channel(0).to_vec())
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
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

    pub fn plane_len(&self) -> usize {
        self.height * self.width
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

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane_len();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.plane_len();
        &mut self.data[c * p..(c + 1) * p]
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.height + i) * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: usize, j: usize, v: f64) {
        self.data[(c * self.height + i) * self.width + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn same_shape(&self, other: &FeatureTensor) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!("{:?}", self.shape()), format!("{:?}", other.shape())));
        }
        Ok(())
    }

    pub fn add(&self, other: &FeatureTensor) -> Result<FeatureTensor> {
        self.same_shape(other)?;
        Ok(Self {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
            ..*self
        })
    }

    pub fn scale(&self, f: f64) -> FeatureTensor {
        Self {
            data: self.data.iter().map(|v| v * f).collect(),
            ..*self
        }
    }

    pub fn relu(mut self) -> FeatureTensor {
        self.data.iter_mut().for_each(|v| *v = v.max(0.0));
        self
    }

    /// Channel concatenation `[self; other]`.
    pub fn concat(&self, other: &FeatureTensor) -> Result<FeatureTensor> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::shape(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            channels: self.channels + other.channels,
            height: self.height,
            width: self.width,
            data,
        })
    }

    /// Nearest-neighbour 2× upsampling.
    pub fn upsample2(&self) -> FeatureTensor {
        let (h, w) = (self.height * 2, self.width * 2);
        let mut out = FeatureTensor::zeros(self.channels, h, w);
        for c in 0..self.channels {
            for i in 0..h {
                for j in 0..w {
                    out.set(c, i, j, self.get(c, i / 2, j / 2));
                }
            }
        }
        out
    }
}
