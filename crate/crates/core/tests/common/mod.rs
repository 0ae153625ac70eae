#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scriptline::BinaryImage;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Union of random filled ellipses and rectangles, kept off the frame edge.
pub fn random_blobs(rng: &mut ChaCha8Rng, width: usize, height: usize, count: usize) -> BinaryImage {
    let mut img = BinaryImage::empty(width, height).unwrap();
    for _ in 0..count {
        let cx = rng.random_range(3.0..width as f64 - 3.0);
        let cy = rng.random_range(3.0..height as f64 - 3.0);
        let rx = rng.random_range(0.5..(width as f64 / 4.0).max(1.0));
        let ry = rng.random_range(0.5..(height as f64 / 4.0).max(1.0));
        let ellipse = rng.random_bool(0.5);
        for y in 1..height - 1 {
            for x in 1..width - 1 {
                let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                let inside = if ellipse {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    img.set(x, y, true);
                }
            }
        }
    }
    img
}

/// Sets every background pixel not 4-connected to the frame.
pub fn fill_holes(img: &BinaryImage) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if (x == 0 || y == 0 || x == w - 1 || y == h - 1) && !img.get(x, y) {
                outside[y * w + x] = true;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let around = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
        for (nx, ny) in around {
            if nx < w && ny < h && !img.get(nx, ny) && !outside[ny * w + nx] {
                outside[ny * w + nx] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    BinaryImage::from_fn(w, h, |x, y| !outside[y * w + x]).unwrap()
}

/// Foreground pixels with a 4-neighbour outside the foreground, sorted by `(y, x)`.
pub fn four_neighbour_border(img: &BinaryImage) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (xi, yi) = (x as isize, y as isize);
            if img.get(x, y)
                && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(dx, dy)| !img.ink_at(xi + dx, yi + dy))
            {
                out.push((x, y));
            }
        }
    }
    out
}

/// Direct-sum DFT scaled by `1/(MN)`, as `(re, im)` in row-major order.
pub fn naive_dft(rows: usize, cols: usize, g: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(rows * cols);
    let scale = 1.0 / (rows * cols) as f64;
    for u in 0..rows {
        for v in 0..cols {
            let (mut re, mut im) = (0.0, 0.0);
            for x in 0..rows {
                for y in 0..cols {
                    let phase =
                        -2.0 * std::f64::consts::PI * ((u * x) as f64 / rows as f64 + (v * y) as f64 / cols as f64);
                    re += g[x * cols + y] * phase.cos();
                    im += g[x * cols + y] * phase.sin();
                }
            }
            out.push((re * scale, im * scale));
        }
    }
    out
}

/// Threshold maximizing `w0 w1 (mu0 - mu1)^2` by exhaustive search; the
/// smallest of (numerically) tied thresholds wins. `None` when no split of
/// the histogram separates anything.
pub fn otsu_sweep(pixels: &[u8]) -> Option<u8> {
    let n = pixels.len() as f64;
    let mut best: Option<(u8, f64)> = None;
    for t in 0..=255u8 {
        let (lo, hi): (Vec<f64>, Vec<f64>) = {
            let lo: Vec<f64> = pixels.iter().filter(|&&p| p <= t).map(|&p| p as f64).collect();
            let hi: Vec<f64> = pixels.iter().filter(|&&p| p > t).map(|&p| p as f64).collect();
            (lo, hi)
        };
        if lo.is_empty() || hi.is_empty() {
            continue;
        }
        let (w0, w1) = (lo.len() as f64 / n, hi.len() as f64 / n);
        let mu0 = lo.iter().sum::<f64>() / lo.len() as f64;
        let mu1 = hi.iter().sum::<f64>() / hi.len() as f64;
        let var = w0 * w1 * (mu0 - mu1).powi(2);
        match best {
            Some((_, b)) if var <= b * (1.0 + 1e-12) => {}
            _ => best = Some((t, var)),
        }
    }
    best.filter(|&(_, v)| v > 0.0).map(|(t, _)| t)
}

pub fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_scriptline")
}

/// Runs the binary, panicking with its stderr on failure; returns stdout.
pub fn run_ok(args: &[&str]) -> String {
    let out = Command::new(binary()).args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "scriptline {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

pub struct PipelineRun {
    pub features_csv: Vec<u8>,
    pub svm_report: String,
    pub svm_json: String,
    pub knn_report: String,
    pub svm_accuracy: f64,
    pub knn_accuracy: f64,
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn accuracy_of(json: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(json).expect("report json");
    v["accuracy"].as_f64().expect("accuracy field")
}

/// synth -> extract -> split -> train (svm, knn) -> evaluate, all through the CLI.
pub fn desk_pipeline(dir: &Path, classes: usize, per_class: usize, seed: u64) -> PipelineRun {
    let corpus: PathBuf = dir.join("corpus");
    let f = |name: &str| dir.join(name);
    let (classes, per_class, seed) = (classes.to_string(), per_class.to_string(), seed.to_string());
    run_ok(&[
        "synth",
        "--classes",
        &classes,
        "--per-class",
        &per_class,
        "--seed",
        &seed,
        "-o",
        p(&corpus),
    ]);
    run_ok(&["extract", p(&corpus), "-o", p(&f("features.csv"))]);
    run_ok(&[
        "split",
        p(&f("features.csv")),
        "--fraction",
        "0.65",
        "--seed",
        &seed,
        "--train",
        p(&f("train.csv")),
        "--test",
        p(&f("test.csv")),
    ]);
    run_ok(&["train", p(&f("train.csv")), "--model", "svm", "-o", p(&f("svm.model"))]);
    run_ok(&[
        "train",
        p(&f("train.csv")),
        "--model",
        "knn",
        "-k",
        "3",
        "-o",
        p(&f("knn.model")),
    ]);
    let svm_report = run_ok(&[
        "evaluate",
        p(&f("svm.model")),
        p(&f("test.csv")),
        "--json",
        p(&f("svm.json")),
    ]);
    let knn_report = run_ok(&[
        "evaluate",
        p(&f("knn.model")),
        p(&f("test.csv")),
        "--json",
        p(&f("knn.json")),
    ]);
    let svm_json = std::fs::read_to_string(f("svm.json")).unwrap();
    let knn_json = std::fs::read_to_string(f("knn.json")).unwrap();
    PipelineRun {
        features_csv: std::fs::read(f("features.csv")).unwrap(),
        svm_accuracy: accuracy_of(&svm_json),
        knn_accuracy: accuracy_of(&knn_json),
        svm_report,
        svm_json,
        knn_report,
    }
}
