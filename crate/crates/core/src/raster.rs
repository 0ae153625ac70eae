//! Raster carriers and the preprocessing chain: Gaussian denoising followed
//! by Otsu global binarization.
//!
//! Pixel `(0, 0)` is the top-left corner, `x` grows rightward and `y` grows
//! downward. Both image types store pixels row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Loads a PGM or PNG file, converting any colour input to 8-bit luma.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
            .to_luma8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw()).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Binary PGM (`P5`) encoding with maxval 255.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_pgm_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Two-tone image; `1` marks ink (foreground), `0` background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

/// Inclusive-exclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidImage(format!(
                "binary pixel values must be 0 or 1, found {v}"
            )));
        }
        Ok(BinaryImage { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn set(&mut self, x: usize, y: usize, ink: bool) {
        self.data[y * self.width + x] = u8::from(ink);
    }

    /// Foreground test with out-of-frame coordinates treated as background.
    pub fn ink_at(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.data[y as usize * self.width + x as usize] == 1
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Tight bounding box of the foreground, `None` for a blank image.
    pub fn bounding_box(&self) -> Option<Rect> {
        let (mut x0, mut y0) = (usize::MAX, usize::MAX);
        let (mut x1, mut y1) = (0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != usize::MAX).then(|| Rect {
            x: x0,
            y: y0,
            width: x1 - x0 + 1,
            height: y1 - y0 + 1,
        })
    }

    pub fn crop(&self, r: Rect) -> Result<BinaryImage> {
        if r.x + r.width > self.width || r.y + r.height > self.height {
            return Err(Error::InvalidParameter(format!(
                "crop {r:?} exceeds {}x{} image",
                self.width, self.height
            )));
        }
        BinaryImage::from_fn(r.width, r.height, |x, y| self.get(r.x + x, r.y + y))
    }

    /// Renders ink as black (0) on white (255).
    pub fn to_gray(&self) -> GrayImage {
        let data = self.data.iter().map(|&v| if v == 1 { 0 } else { 255 }).collect();
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Which side of the Otsu threshold holds the ink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InkPolarity {
    /// Dark ink on light paper: intensities `<= t*` are foreground.
    #[default]
    DarkInk,
    /// Light ink on dark background: intensities `> t*` are foreground.
    LightInk,
}

/// Sampled Gaussian weights `exp(-x^2 / 2 sigma^2)` for `x` in
/// `-(size/2)..=size/2`, normalized to sum 1.
pub fn gaussian_kernel(sigma: f64, kernel_size: usize) -> Result<Vec<f64>> {
    if kernel_size == 0 || kernel_size.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "kernel size must be a positive odd integer, got {kernel_size}"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    let half = (kernel_size / 2) as isize;
    let mut weights: Vec<f64> = (-half..=half)
        .map(|i| {
            let x = i as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(weights)
}

/// Separable Gaussian blur with edge-replicated borders.
///
/// Both passes run in `f64`; the result is rounded to the nearest intensity
/// once at the end.
pub fn gaussian_smooth(img: &GrayImage, sigma: f64, kernel_size: usize) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma, kernel_size)?;
    let half = (kernel_size / 2) as isize;
    let (w, h) = (img.width, img.height);
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;

    let mut horizontal = vec![0.0f64; w * h];
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                let sx = clamp(x as isize + k as isize - half, w);
                acc += weight * f64::from(row[sx]);
            }
            horizontal[y * w + x] = acc;
        }
    }

    let mut data = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                let sy = clamp(y as isize + k as isize - half, h);
                acc += weight * horizontal[sy * w + x];
            }
            data[y * w + x] = acc.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(GrayImage {
        width: w,
        height: h,
        data,
    })
}

pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in &img.data {
        hist[v as usize] += 1;
    }
    hist
}

/// Otsu threshold `t*`: the class split `{<= t} | {> t}` with the largest
/// between-class variance, smallest `t` on ties.
///
/// Returns `None` when no split separates two non-empty classes, i.e. the
/// image holds a single intensity.
pub fn otsu_threshold(img: &GrayImage) -> Option<u8> {
    let hist = histogram(img);
    let total = img.data.len() as i128;
    let total_sum: i128 = hist.iter().enumerate().map(|(i, &c)| i as i128 * c as i128).sum();

    let mut below = 0i128;
    let mut below_sum = 0i128;
    let mut best: Option<(u8, f64)> = None;
    for (t, &count) in hist.iter().enumerate() {
        below += count as i128;
        below_sum += t as i128 * count as i128;
        let above = total - below;
        if below == 0 || above == 0 {
            continue;
        }
        // N^2 times the between-class variance; integer sums keep empty-bin
        // plateaus exactly flat so the smallest-t tie-break is reliable.
        let diff = (total * below_sum - below * total_sum) as f64;
        let score = diff * diff / (below as f64 * above as f64);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((t as u8, score));
        }
    }
    best.filter(|&(_, s)| s > 0.0).map(|(t, _)| t)
}

/// Otsu global binarization. A single-intensity image has no threshold and
/// yields an all-background result.
pub fn otsu_binarize(img: &GrayImage, polarity: InkPolarity) -> BinaryImage {
    let data = match otsu_threshold(img) {
        Some(t) => img
            .data
            .iter()
            .map(|&v| match polarity {
                InkPolarity::DarkInk => u8::from(v <= t),
                InkPolarity::LightInk => u8::from(v > t),
            })
            .collect(),
        None => {
            log::warn!(
                "uniform {}x{} image has no Otsu threshold; treating it as blank",
                img.width,
                img.height
            );
            vec![0; img.data.len()]
        }
    };
    BinaryImage {
        width: img.width,
        height: img.height,
        data,
    }
}
