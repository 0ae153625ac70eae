//! Grid-partitioned DFT magnitude features (F23-F54).
//!
//! The line image is cropped to its ink bounding box and cut into an `n x n`
//! grid. Each cell is transformed with a forward DFT scaled by `1/(MN)`; the
//! magnitudes are L2-normalized and summarized by their mean and population
//! standard deviation.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::raster::{BinaryImage, GrayImage, Rect};

pub const DEFAULT_GRID: usize = 4;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "{rows}x{cols} matrix cannot hold {} values",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }
}

/// Reusable 2-D transform; caches FFT plans across blocks of equal size.
pub struct Dft2 {
    planner: FftPlanner<f64>,
}

impl Default for Dft2 {
    fn default() -> Self {
        Self::new()
    }
}

impl Dft2 {
    pub fn new() -> Self {
        Dft2 {
            planner: FftPlanner::new(),
        }
    }

    /// `G(u,v) = 1/(MN) sum_m sum_n g(m,n) exp(-j 2 pi (mu/M + nv/N))`.
    pub fn forward(&mut self, block: &Matrix<f64>) -> Matrix<Complex64> {
        let (m, n) = (block.rows, block.cols);
        let mut data: Vec<Complex64> = block.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();

        let row_fft: Arc<dyn Fft<f64>> = self.planner.plan_fft_forward(n);
        row_fft.process(&mut data);

        let col_fft = self.planner.plan_fft_forward(m);
        let mut column = vec![Complex64::default(); m];
        for c in 0..n {
            for r in 0..m {
                column[r] = data[r * n + c];
            }
            col_fft.process(&mut column);
            for r in 0..m {
                data[r * n + c] = column[r];
            }
        }

        let scale = 1.0 / (m * n) as f64;
        data.iter_mut().for_each(|z| *z *= scale);
        Matrix { rows: m, cols: n, data }
    }
}

pub fn dft2(block: &Matrix<f64>) -> Matrix<Complex64> {
    Dft2::new().forward(block)
}

/// `|G| / sqrt(sum |G|^2)`; an all-zero spectrum maps to all zeros.
pub fn normalize_magnitude(spectrum: &Matrix<Complex64>) -> Matrix<f64> {
    let mags: Vec<f64> = spectrum.data.iter().map(|z| z.norm()).collect();
    let norm = mags.iter().map(|m| m * m).sum::<f64>().sqrt();
    let data = if norm > 0.0 {
        mags.iter().map(|m| m / norm).collect()
    } else {
        mags
    };
    Matrix {
        rows: spectrum.rows,
        cols: spectrum.cols,
        data,
    }
}

/// Row-major `n x n` partition of a `width x height` area; floor-sized
/// cells, the last row and column absorbing the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub blocks: Vec<Rect>,
}

impl Grid {
    pub fn new(width: usize, height: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("grid size must be positive".into()));
        }
        if width < n || height < n {
            return Err(Error::ImageTooSmall { width, height, n });
        }
        let spans = |len: usize| -> Vec<(usize, usize)> {
            let step = len / n;
            (0..n)
                .map(|i| {
                    let start = i * step;
                    let size = if i + 1 == n { len - start } else { step };
                    (start, size)
                })
                .collect()
        };
        let (cols, rows) = (spans(width), spans(height));
        let blocks = rows
            .iter()
            .flat_map(|&(y, h)| {
                cols.iter().map(move |&(x, w)| Rect {
                    x,
                    y,
                    width: w,
                    height: h,
                })
            })
            .collect();
        Ok(Grid { n, blocks })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpectralBlockStats {
    pub mean_mag: f64,
    pub std_mag: f64,
}

impl SpectralBlockStats {
    /// Mean and population deviation of a normalized magnitude matrix.
    pub fn of(magnitudes: &Matrix<f64>) -> Self {
        let k = magnitudes.data.len() as f64;
        let mean = magnitudes.data.iter().sum::<f64>() / k;
        let var = magnitudes.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
        SpectralBlockStats {
            mean_mag: mean,
            std_mag: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFeatures {
    pub stats: Vec<SpectralBlockStats>,
}

impl SpectralFeatures {
    /// `(mean_1, std_1, mean_2, std_2, ...)` in row-major block order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.stats.iter().flat_map(|s| [s.mean_mag, s.std_mag]).collect()
    }
}

fn block_matrix(img: &BinaryImage, r: Rect) -> Matrix<f64> {
    Matrix::from_fn(
        r.height,
        r.width,
        |row, col| {
            if img.get(r.x + col, r.y + row) {
                1.0
            } else {
                0.0
            }
        },
    )
    .expect("grid cells are non-empty")
}

/// Per-cell DFT magnitude statistics over the ink bounding box.
///
/// A blank image yields `2 n^2` zeros; an ink crop narrower or shorter than
/// `n` pixels is [`Error::ImageTooSmall`].
pub fn spectral_features(img: &BinaryImage, n: usize) -> Result<SpectralFeatures> {
    if n == 0 {
        return Err(Error::InvalidParameter("grid size must be positive".into()));
    }
    let Some(bbox) = img.bounding_box() else {
        return Ok(SpectralFeatures {
            stats: vec![SpectralBlockStats::default(); n * n],
        });
    };
    let grid = Grid::new(bbox.width, bbox.height, n)?;
    let mut dft = Dft2::new();
    let stats = grid
        .blocks
        .iter()
        .map(|cell| {
            let r = Rect {
                x: bbox.x + cell.x,
                y: bbox.y + cell.y,
                ..*cell
            };
            let block = block_matrix(img, r);
            if block.data.iter().all(|&v| v == 0.0) {
                SpectralBlockStats::default()
            } else {
                SpectralBlockStats::of(&normalize_magnitude(&dft.forward(&block)))
            }
        })
        .collect();
    Ok(SpectralFeatures { stats })
}

/// Log-scaled magnitude and phase images of the whole-image DFT with the
/// zero frequency shifted to the centre.
pub fn spectrum_images(img: &BinaryImage) -> (GrayImage, GrayImage) {
    let (w, h) = (img.width(), img.height());
    let block = block_matrix(
        img,
        Rect {
            x: 0,
            y: 0,
            width: w,
            height: h,
        },
    );
    let spectrum = dft2(&block);
    let shifted = |x: usize, y: usize| spectrum.get((y + h - h / 2) % h, (x + w - w / 2) % w);

    let log_mags: Vec<f64> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| shifted(x, y).norm().ln_1p())
        .collect();
    let max = log_mags.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let magnitude = GrayImage::new(w, h, log_mags.iter().map(|v| (v * scale).round() as u8).collect())
        .expect("dimensions of a valid image");

    let phase = GrayImage::from_fn(w, h, |x, y| {
        let arg = shifted(x, y).arg();
        ((arg + std::f64::consts::PI) / std::f64::consts::TAU * 255.0).round() as u8
    })
    .expect("dimensions of a valid image");
    (magnitude, phase)
}
