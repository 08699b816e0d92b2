use crate::error::{Error, Result};

/// Dense single-channel raster stored row-major.
///
/// Pixel `(x, y)` is column `x`, row `y`; pixel centers sit on integer
/// coordinates. All values are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Empty(format!("grid {height}x{width}")));
        }
        if values.len() != height * width {
            return Err(Error::shape(format!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid".into()));
        }
        Ok(Self { height, width, values })
    }

    /// Panics on zero dimensions.
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        assert!(value.is_finite());
        Self {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    /// Builds a grid from `f(row, col)`. Non-finite outputs are an error.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(value.is_finite());
        self.values[row * self.width + col] = value;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies `f` elementwise. The caller keeps the result finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            height: self.height,
            width: self.width,
            values,
        }
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &Grid, b: f64) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(Error::shape("linear combination of mismatched grids"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(self.height, self.width, values)
    }

    pub fn max_abs_diff(&self, other: &Grid) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Copies the `height x width` window whose top-left corner is `(row0, col0)`.
    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if row0 + height > self.height || col0 + width > self.width {
            return Err(Error::shape(format!(
                "crop {height}x{width}+{row0}+{col0} exceeds {}x{}",
                self.height, self.width
            )));
        }
        Self::from_fn(height, width, |r, c| self.get(row0 + r, col0 + c))
    }
}

/// Ordered set of equally sized channels.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiChannelImage {
    channels: Vec<Grid>,
}

impl MultiChannelImage {
    pub fn new(channels: Vec<Grid>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Empty("image has no channels".into()))?;
        let dims = first.dims();
        if channels.iter().any(|g| g.dims() != dims) {
            return Err(Error::shape("channels differ in size"));
        }
        Ok(Self { channels })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        assert!(channels > 0);
        Self {
            channels: vec![Grid::zeros(height, width); channels],
        }
    }

    /// Interprets `values` as channel-major `(C, H, W)`.
    pub fn from_chw(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != channels * height * width {
            return Err(Error::shape(format!(
                "({channels},{height},{width}) needs {} values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        let plane = height * width;
        let grids = (0..channels)
            .map(|c| Grid::new(height, width, values[c * plane..(c + 1) * plane].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grids)
    }

    pub fn to_chw(&self) -> Vec<f64> {
        self.channels.iter().flat_map(|g| g.values().iter().copied()).collect()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    pub fn channels(&self) -> &[Grid] {
        &self.channels
    }

    pub fn channel(&self, index: usize) -> &Grid {
        &self.channels[index]
    }

    pub fn into_channels(self) -> Vec<Grid> {
        self.channels
    }

    pub fn map_channels(&self, f: impl Fn(&Grid) -> Result<Grid>) -> Result<Self> {
        Self::new(self.channels.iter().map(f).collect::<Result<Vec<_>>>()?)
    }

    pub fn max_abs_diff(&self, other: &MultiChannelImage) -> f64 {
        assert_eq!(self.channel_count(), other.channel_count());
        self.channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn max_value(&self) -> f64 {
        self.channels
            .iter()
            .map(Grid::max_value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
