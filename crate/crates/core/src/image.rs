use crate::error::{Error, Result};

/// Square image covering the world square [-1, 1]².
///
/// Storage is row-major. Row `i` sits at `y = -1 + (i + 0.5)·2/n` and column
/// `j` at `x = -1 + (j + 0.5)·2/n`, so the row index grows with `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    n: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn zeros(n: usize) -> Result<Self> {
        check_side(n)?;
        Ok(Self {
            n,
            values: vec![0.0; n * n],
        })
    }

    pub fn filled(n: usize, value: f64) -> Result<Self> {
        check_side(n)?;
        Ok(Self {
            n,
            values: vec![value; n * n],
        })
    }

    pub fn from_vec(n: usize, values: Vec<f64>) -> Result<Self> {
        check_side(n)?;
        if values.len() != n * n {
            return Err(Error::shape(format!("{} values", n * n), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image values must be finite"));
        }
        Ok(Self { n, values })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel center.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Result<Self> {
        check_side(n)?;
        let values = crate::par::map_indices(n * n, |k| {
            let (i, j) = (k / n, k % n);
            f(pixel_center(n, j), pixel_center(n, i))
        });
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.n + col] = v;
    }

    /// Pixel width in world units.
    pub fn pixel_size(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// World coordinates `(x, y)` of a pixel center.
    pub fn world(&self, row: usize, col: usize) -> (f64, f64) {
        (pixel_center(self.n, col), pixel_center(self.n, row))
    }

    /// Nearest pixel `(row, col)` to a world point, if inside the image.
    pub fn nearest_pixel(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let col = ((x + 1.0) * self.n as f64 / 2.0).floor();
        let row = ((y + 1.0) * self.n as f64 / 2.0).floor();
        if col < 0.0 || row < 0.0 || col >= self.n as f64 || row >= self.n as f64 {
            None
        } else {
            Some((row as usize, col as usize))
        }
    }

    /// Bilinear interpolation at a world point; pixels outside the grid read
    /// as zero.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let half = self.n as f64 / 2.0;
        let fx = (x + 1.0) * half - 0.5;
        let fy = (y + 1.0) * half - 0.5;
        let j0 = fx.floor();
        let i0 = fy.floor();
        let tx = fx - j0;
        let ty = fy - i0;
        let (j0, i0) = (j0 as isize, i0 as isize);
        let n = self.n as isize;
        let at = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= n || j >= n {
                0.0
            } else {
                self.values[(i * n + j) as usize]
            }
        };
        let top = at(i0, j0) * (1.0 - tx) + at(i0, j0 + 1) * tx;
        let bottom = at(i0 + 1, j0) * (1.0 - tx) + at(i0 + 1, j0 + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// Rotates the image content by +90° about the origin (counter-clockwise
    /// in world coordinates). Exact on the grid.
    pub fn rotate90(&self) -> Image {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.values[(n - 1 - j) * n + i];
            }
        }
        Image { n, values: out }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Image) -> Result<Image> {
        self.check_same(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Image { n: self.n, values })
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Image) -> Result<Image> {
        self.check_same(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Image { n: self.n, values })
    }

    pub fn scale(&self, factor: f64) -> Image {
        Image {
            n: self.n,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub(crate) fn check_same(&self, other: &Image) -> Result<()> {
        if self.n != other.n {
            return Err(Error::shape(
                format!("{0}x{0}", self.n),
                format!("{0}x{0}", other.n),
            ));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn pixel_center(n: usize, index: usize) -> f64 {
    -1.0 + (index as f64 + 0.5) * 2.0 / n as f64
}

fn check_side(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("image side must be >= 2, got {n}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_centers_are_symmetric() {
        let img = Image::zeros(4).unwrap();
        assert_eq!(img.world(0, 0), (-0.75, -0.75));
        assert_eq!(img.world(3, 3), (0.75, 0.75));
    }

    #[test]
    fn rejects_tiny_images() {
        assert!(Image::zeros(1).is_err());
        assert!(Image::from_vec(2, vec![0.0; 3]).is_err());
        assert!(Image::from_vec(2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn bilinear_hits_pixel_centers() {
        let img = Image::from_vec(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(img.sample_bilinear(-0.5, -0.5), 1.0);
        assert_eq!(img.sample_bilinear(0.5, 0.5), 4.0);
        assert_eq!(img.sample_bilinear(0.0, -0.5), 1.5);
        assert_eq!(img.sample_bilinear(5.0, 5.0), 0.0);
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let img = Image::from_fn(5, |x, y| x + 3.0 * y * y).unwrap();
        let back = img.rotate90().rotate90().rotate90().rotate90();
        assert_eq!(img, back);
    }

    #[test]
    fn rotate90_moves_positive_x_to_positive_y() {
        // value 1 at the pixel nearest (0.75, 0) region: column 3, rows 1..2
        let mut img = Image::zeros(4).unwrap();
        img.set(2, 3, 1.0); // (x, y) = (0.75, 0.25)
        let r = img.rotate90();
        // (0.75, 0.25) rotated by +90° lands at (-0.25, 0.75)
        let (row, col) = r.nearest_pixel(-0.25, 0.75).unwrap();
        assert_eq!(r.get(row, col), 1.0);
    }
}
