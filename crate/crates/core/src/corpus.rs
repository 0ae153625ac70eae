//! Corpus ingestion (`root/<Label>/<name>.pgm|png`), stratified splitting,
//! and a seeded generator of synthetic text lines whose stroke texture
//! differs per class.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::featureset::{extract_features, ExtractConfig, FeatureVector, LabelSet, ScriptLabel};
use crate::raster::GrayImage;

const IMAGE_EXTENSIONS: [&str; 2] = ["pgm", "png"];

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub path: PathBuf,
    /// `Label/file.ext`, relative to the corpus root.
    pub name: String,
    pub label: ScriptLabel,
}

/// Index lists into a corpus (or any labelled sequence), each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub labels: LabelSet,
    pub entries: Vec<CorpusEntry>,
    pub split: Option<Split>,
}

impl Corpus {
    pub fn classes(&self) -> Vec<usize> {
        self.entries
            .iter()
            .map(|e| {
                self.labels
                    .index_of(e.label.as_str())
                    .expect("entry labels come from the set")
            })
            .collect()
    }
}

fn sorted_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

/// Enumerates `root/<Label>/*.{pgm,png}` in lexicographic order, checking
/// that every image decodes.
///
/// Subdirectories outside `labels` are an error unless `allow_new_labels`,
/// in which case they are appended to the corpus label set.
pub fn load_corpus(root: impl AsRef<Path>, labels: &LabelSet, allow_new_labels: bool) -> Result<Corpus> {
    let root = root.as_ref();
    let mut labels = labels.clone();
    let mut entries = Vec::new();
    for dir in sorted_dir(root)? {
        if !dir.is_dir() {
            continue;
        }
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::InvalidParameter(format!("non UTF-8 directory {}", dir.display())))?
            .to_string();
        if labels.index_of(&name).is_none() {
            if !allow_new_labels {
                return Err(Error::UnknownLabel(name));
            }
            labels.push(name.clone())?;
        }
        let label = labels.label(&name)?;
        let before = entries.len();
        for file in sorted_dir(&dir)? {
            let is_image = file
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
            if !file.is_file() || !is_image {
                continue;
            }
            GrayImage::load(&file)?;
            let file_name = file.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            entries.push(CorpusEntry {
                name: format!("{name}/{file_name}"),
                path: file,
                label: label.clone(),
            });
        }
        if entries.len() == before {
            log::warn!("label directory {} holds no images", dir.display());
        }
    }
    Ok(Corpus {
        labels,
        entries,
        split: None,
    })
}

/// Per-class seeded shuffle; `round(fraction * size)` items of each class go
/// to training, clamped so both sides keep at least one.
pub fn stratified_split(classes: &[usize], names: &[String], train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, name) in names.iter().enumerate() {
        let mut members: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                label: name.clone(),
                count: members.len(),
                required: 2,
            });
        }
        members.shuffle(&mut rng);
        let n_train = ((train_fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

pub fn split_corpus(mut corpus: Corpus, train_fraction: f64, seed: u64) -> Result<Corpus> {
    let split = stratified_split(&corpus.classes(), corpus.labels.names(), train_fraction, seed)?;
    corpus.split = Some(split);
    Ok(corpus)
}

/// Extracts every entry in parallel; output order follows the corpus.
pub fn extract_corpus(corpus: &Corpus, config: &ExtractConfig) -> Result<Vec<FeatureVector>> {
    corpus
        .entries
        .par_iter()
        .map(|entry| {
            let img = GrayImage::load(&entry.path)?;
            let fv = extract_features(&img, config).map_err(|e| Error::Image {
                path: entry.path.clone(),
                message: e.to_string(),
            })?;
            Ok(fv.with_label(entry.label.clone()).with_source(entry.name.clone()))
        })
        .collect()
}

/// Stroke texture of one synthetic pseudo-script.
#[derive(Debug, Clone, PartialEq)]
pub struct StrokeStyle {
    /// Dominant stroke orientation in degrees, `[0, 180)`.
    pub orientation: f64,
    /// Secondary orientation mixed in with probability `secondary_weight`.
    pub secondary: f64,
    pub secondary_weight: f64,
    /// Probability of an unconstrained random orientation.
    pub random_weight: f64,
    /// Heading change per pixel (radians), sign chosen per stroke.
    pub curvature: f64,
    pub stroke_length: f64,
    pub strokes_per_glyph: (usize, usize),
    /// Probability a stroke is drawn as a closed loop.
    pub loop_rate: f64,
    /// Dots per glyph.
    pub dot_rate: f64,
    /// Horizontal bar over each word.
    pub headline: bool,
    pub glyph_width: f64,
    pub pen_radius: f64,
}

impl StrokeStyle {
    /// Built-in styles; indices beyond the presets vary orientation and
    /// curvature systematically.
    pub fn preset(index: usize) -> StrokeStyle {
        let base = StrokeStyle {
            orientation: 0.0,
            secondary: 90.0,
            secondary_weight: 0.25,
            random_weight: 0.1,
            curvature: 0.02,
            stroke_length: 13.0,
            strokes_per_glyph: (2, 3),
            loop_rate: 0.05,
            dot_rate: 0.05,
            headline: false,
            glyph_width: 12.0,
            pen_radius: 1.3,
        };
        match index {
            0 => StrokeStyle {
                orientation: 0.0,
                secondary: 90.0,
                headline: true,
                ..base
            },
            1 => StrokeStyle {
                orientation: 30.0,
                secondary: 120.0,
                loop_rate: 0.15,
                ..base
            },
            2 => StrokeStyle {
                orientation: 60.0,
                secondary: 150.0,
                curvature: 0.06,
                ..base
            },
            3 => StrokeStyle {
                orientation: 90.0,
                secondary: 0.0,
                stroke_length: 16.0,
                dot_rate: 0.12,
                ..base
            },
            4 => StrokeStyle {
                orientation: 120.0,
                secondary: 30.0,
                glyph_width: 10.0,
                ..base
            },
            5 => StrokeStyle {
                orientation: 150.0,
                secondary: 60.0,
                curvature: 0.05,
                dot_rate: 0.2,
                ..base
            },
            6 => StrokeStyle {
                orientation: 0.0,
                curvature: 0.15,
                loop_rate: 0.6,
                stroke_length: 10.0,
                pen_radius: 1.6,
                ..base
            },
            7 => StrokeStyle {
                orientation: 30.0,
                secondary: 150.0,
                curvature: 0.1,
                loop_rate: 0.25,
                dot_rate: 0.45,
                glyph_width: 14.0,
                ..base
            },
            k => StrokeStyle {
                orientation: (k as f64 * 30.0 + 15.0) % 180.0,
                secondary: (k as f64 * 30.0 + 105.0) % 180.0,
                curvature: 0.02 + 0.04 * (k % 4) as f64,
                loop_rate: 0.1 * (k % 3) as f64,
                ..base
            },
        }
    }
}

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub labels: LabelSet,
    pub styles: Vec<StrokeStyle>,
    pub per_class: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// `classes` pseudo-scripts named after the first entries of `labels`.
    pub fn new(classes: usize, per_class: usize, seed: u64, labels: &LabelSet) -> Result<Self> {
        if classes < 1 || classes > labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{classes} classes requested but the label set names {}",
                labels.len()
            )));
        }
        Ok(SynthSpec {
            labels: LabelSet::new(labels.names()[..classes].iter().cloned())?,
            styles: (0..classes).map(StrokeStyle::preset).collect(),
            per_class,
            width: 384,
            height: 64,
            seed,
        })
    }
}

/// SplitMix64 finalizer, used to derive independent per-image seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn image_seed(seed: u64, class: usize, index: usize) -> u64 {
    mix(mix(mix(seed) ^ class as u64) ^ index as u64)
}

struct Canvas {
    width: usize,
    height: usize,
    ink: Vec<bool>,
}

impl Canvas {
    fn stamp(&mut self, x: f64, y: f64, r: f64) {
        let (x0, x1) = ((x - r).floor().max(0.0) as usize, (x + r).ceil() as usize);
        let (y0, y1) = ((y - r).floor().max(0.0) as usize, (y + r).ceil() as usize);
        for py in y0..=y1.min(self.height - 1) {
            for px in x0..=x1.min(self.width - 1) {
                if (px as f64 - x).powi(2) + (py as f64 - y).powi(2) <= r * r {
                    self.ink[py * self.width + px] = true;
                }
            }
        }
    }

    fn line(&mut self, from: (f64, f64), to: (f64, f64), r: f64) {
        let steps = ((to.0 - from.0).hypot(to.1 - from.1) * 2.0).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            self.stamp(from.0 + t * (to.0 - from.0), from.1 + t * (to.1 - from.1), r);
        }
    }
}

/// Renders one grey text line in the given style.
pub fn render_line(style: &StrokeStyle, width: usize, height: usize, rng: &mut ChaCha8Rng) -> GrayImage {
    let mut canvas = Canvas {
        width,
        height,
        ink: vec![false; width * height],
    };
    let h = height as f64;
    let x_height = h * rng.random_range(0.30..0.38);
    let baseline = h * 0.5 + x_height / 2.0 + rng.random_range(-2.0..2.0);
    let top = baseline - x_height;
    let radius = style.pen_radius * rng.random_range(0.85..1.15);
    let jitter = Normal::new(0.0, 8.0f64.to_radians()).expect("valid deviation");

    let mut x = rng.random_range(4.0..12.0);
    let right = width as f64 - rng.random_range(4.0..12.0);
    while x < right - style.glyph_width {
        let glyphs = rng.random_range(2..=6);
        let word_start = x;
        for _ in 0..glyphs {
            if x > right - style.glyph_width {
                break;
            }
            let gw = style.glyph_width * rng.random_range(0.8..1.2);
            let strokes = rng.random_range(style.strokes_per_glyph.0..=style.strokes_per_glyph.1);
            for _ in 0..strokes {
                let start = (rng.random_range(x..x + gw), rng.random_range(top..baseline));
                if rng.random_bool(style.loop_rate) {
                    let (rx, ry) = (rng.random_range(2.5..gw / 2.0), rng.random_range(2.5..x_height / 2.0));
                    let mut prev = (start.0 + rx, start.1);
                    for s in 1..=24 {
                        let a = s as f64 / 24.0 * 2.0 * PI;
                        let p = (start.0 + rx * a.cos(), start.1 + ry * a.sin());
                        canvas.line(prev, p, radius);
                        prev = p;
                    }
                    continue;
                }
                let roll: f64 = rng.random();
                let base_angle = if roll < style.random_weight {
                    rng.random_range(0.0..180.0)
                } else if roll < style.random_weight + style.secondary_weight {
                    style.secondary
                } else {
                    style.orientation
                };
                let mut heading = base_angle.to_radians() + jitter.sample(rng);
                if rng.random_bool(0.5) {
                    heading += PI;
                }
                let bend = if rng.random_bool(0.5) {
                    style.curvature
                } else {
                    -style.curvature
                };
                let len = style.stroke_length * rng.random_range(0.7..1.3);
                let mut p = start;
                let mut walked = 0.0;
                while walked < len {
                    // y grows downward, so a positive angle points up-screen
                    let next = (p.0 + heading.cos(), p.1 - heading.sin());
                    let next = (next.0.clamp(1.0, width as f64 - 2.0), next.1.clamp(1.0, h - 2.0));
                    canvas.line(p, next, radius);
                    p = next;
                    heading += bend;
                    walked += 1.0;
                }
            }
            if rng.random_bool(style.dot_rate.min(1.0)) {
                let above = rng.random_bool(0.5);
                let dy = if above {
                    top - rng.random_range(4.0..8.0)
                } else {
                    baseline + rng.random_range(4.0..8.0)
                };
                canvas.stamp(rng.random_range(x..x + gw), dy.clamp(2.0, h - 3.0), radius + 0.7);
            }
            x += gw + rng.random_range(0.0..3.0);
        }
        if style.headline {
            canvas.line((word_start, top), (x, top), radius);
        }
        x += rng.random_range(8.0..16.0);
    }

    let paper: f64 = rng.random_range(205.0..235.0);
    let ink: f64 = rng.random_range(25.0..60.0);
    let noise = Normal::new(0.0, 6.0).expect("valid deviation");
    let data = canvas
        .ink
        .iter()
        .map(|&is_ink| {
            let flip = rng.random_bool(0.002);
            let level = if is_ink != flip { ink } else { paper };
            (level + noise.sample(rng)).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(width, height, data).expect("canvas dimensions are positive")
}

/// Writes `dest/<Label>/<Label>_<i>.pgm` for every class plus
/// `dest/manifest.csv` (`path,label,seed`), and returns the corpus.
pub fn synth_corpus(spec: &SynthSpec, dest: impl AsRef<Path>) -> Result<Corpus> {
    let dest = dest.as_ref();
    fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let mut jobs = Vec::new();
    for (class, name) in spec.labels.names().iter().enumerate() {
        let dir = dest.join(name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in 0..spec.per_class {
            jobs.push((class, i, format!("{name}/{name}_{i:03}.pgm")));
        }
    }

    jobs.par_iter()
        .map(|(class, i, rel)| {
            let mut rng = ChaCha8Rng::seed_from_u64(image_seed(spec.seed, *class, *i));
            let img = render_line(&spec.styles[*class], spec.width, spec.height, &mut rng);
            img.write_pgm(dest.join(rel))
        })
        .collect::<Result<()>>()?;

    let mut manifest = String::from("path,label,seed\n");
    let mut entries = Vec::with_capacity(jobs.len());
    for (class, i, rel) in &jobs {
        let label = spec.labels.by_index(*class);
        manifest.push_str(&format!("{rel},{label},{}\n", image_seed(spec.seed, *class, *i)));
        entries.push(CorpusEntry {
            path: dest.join(rel),
            name: rel.clone(),
            label,
        });
    }
    let manifest_path = dest.join("manifest.csv");
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(Corpus {
        labels: spec.labels.clone(),
        entries,
        split: None,
    })
}
