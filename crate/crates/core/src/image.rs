use crate::error::{arg_err, Result};
use crate::tensor::RTensor;

/// Dense `H x W x C` image with floating point samples (nominally in
/// `[0, 255]`), stored with the row index fastest, then column, then channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::from_vec(height, width, channels, vec![0.0; height * width * channels])
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return arg_err(format!("image dimensions must be positive, got {height}x{width}x{channels}"));
        }
        if data.len() != height * width * channels {
            return arg_err(format!(
                "image data length {} does not match {height}x{width}x{channels}",
                data.len()
            ));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut img = Self::new(height, width, channels)?;
        for ch in 0..channels {
            for col in 0..width {
                for row in 0..height {
                    let v = f(row, col, ch);
                    img.set(row, col, ch, v);
                }
            }
        }
        Ok(img)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        row + self.height * (col + self.width * ch)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.index(row, col, ch)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, v: f64) {
        let i = self.index(row, col, ch);
        self.data[i] = v;
    }

    /// All samples of one channel, column-major.
    pub fn plane(&self, ch: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[ch * n..(ch + 1) * n]
    }

    pub fn plane_mut(&mut self, ch: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[ch * n..(ch + 1) * n]
    }

    pub fn to_tensor(&self) -> RTensor {
        RTensor::from_vec(&[self.height, self.width, self.channels], self.data.clone())
            .expect("image dimensions are positive")
    }

    pub fn from_tensor(t: &RTensor) -> Result<Self> {
        match *t.shape() {
            [h, w, c] => Self::from_vec(h, w, c, t.as_slice().to_vec()),
            [h, w] => Self::from_vec(h, w, 1, t.as_slice().to_vec()),
            _ => arg_err(format!("an image tensor must have order 2 or 3, got {:?}", t.shape())),
        }
    }

    /// Reshapes `H x W x B` into `B x H x W` (bands become rows).
    pub fn twist(&self) -> Image {
        let (h, w, b) = self.dims();
        Image::from_fn(b, h, w, |band, row, col| self.get(row, col, band)).expect("positive dims")
    }

    /// Inverse of [`Image::twist`].
    pub fn untwist(&self) -> Image {
        let (b, h, w) = self.dims();
        Image::from_fn(h, w, b, |row, col, band| self.get(band, row, col)).expect("positive dims")
    }

    /// Copy with every sample clamped to `[lo, hi]`.
    pub fn clamped(&self, lo: f64, hi: f64) -> Image {
        Image {
            data: self.data.iter().map(|v| v.clamp(lo, hi)).collect(),
            ..self.clone()
        }
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_twist() {
        let img = Image::from_fn(3, 4, 5, |r, c, b| (r + 10 * c + 100 * b) as f64).unwrap();
        assert_eq!(img.get(2, 3, 4), 432.0);
        assert_eq!(img.as_slice()[1], 1.0);
        assert_eq!(img.as_slice()[3], 10.0);
        let t = img.twist();
        assert_eq!(t.dims(), (5, 3, 4));
        assert_eq!(t.get(4, 2, 3), 432.0);
        assert_eq!(t.untwist(), img);
        assert_eq!(Image::from_tensor(&img.to_tensor()).unwrap(), img);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(Image::new(0, 3, 3).is_err());
        assert!(Image::from_vec(2, 2, 1, vec![0.0; 3]).is_err());
    }
}
