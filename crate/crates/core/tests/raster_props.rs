mod common;

use proptest::prelude::*;
use scriptline::raster::{gaussian_smooth, histogram, otsu_binarize, otsu_threshold};
use scriptline::{GrayImage, InkPolarity};

fn gray(w: usize, h: usize, data: Vec<u8>) -> GrayImage {
    GrayImage::new(w, h, data).unwrap()
}

proptest! {
    #[test]
    fn otsu_matches_exhaustive_sweep(data in prop::collection::vec(any::<u8>(), 64)) {
        let img = gray(8, 8, data);
        prop_assert_eq!(otsu_threshold(&img), common::otsu_sweep(img.data()));
    }

    #[test]
    fn otsu_on_two_levels_separates_them(lo in 0u8..128, hi in 128u8..=255, dark in 1usize..63) {
        let data: Vec<u8> = (0..64).map(|i| if i < dark { lo } else { hi }).collect();
        let img = gray(8, 8, data);
        let t = otsu_threshold(&img).unwrap();
        prop_assert!(lo <= t && t < hi);
        let bin = otsu_binarize(&img, InkPolarity::DarkInk);
        prop_assert_eq!(bin.foreground_count(), dark);
    }

    #[test]
    fn polarities_are_complementary(data in prop::collection::vec(1u8..=254, 36)) {
        let img = gray(6, 6, data);
        prop_assume!(otsu_threshold(&img).is_some());
        let dark = otsu_binarize(&img, InkPolarity::DarkInk);
        let light = otsu_binarize(&img, InkPolarity::LightInk);
        prop_assert!(dark.data().iter().zip(light.data()).all(|(a, b)| a + b == 1));
    }

    #[test]
    fn smoothing_stays_within_input_range(data in prop::collection::vec(any::<u8>(), 100), sigma in 0.3f64..3.0) {
        let img = gray(10, 10, data);
        let (lo, hi) = (*img.data().iter().min().unwrap(), *img.data().iter().max().unwrap());
        let out = gaussian_smooth(&img, sigma, 5).unwrap();
        prop_assert!(out.data().iter().all(|&v| lo <= v && v <= hi));
    }

    #[test]
    fn histogram_counts_every_pixel(data in prop::collection::vec(any::<u8>(), 1..200)) {
        let n = data.len();
        let img = gray(n, 1, data);
        prop_assert_eq!(histogram(&img).iter().sum::<u64>(), n as u64);
    }
}

#[test]
fn constant_image_is_all_background() {
    let img = GrayImage::filled(12, 7, 90).unwrap();
    assert_eq!(otsu_threshold(&img), None);
    assert_eq!(otsu_binarize(&img, InkPolarity::DarkInk).foreground_count(), 0);
    assert_eq!(otsu_binarize(&img, InkPolarity::LightInk).foreground_count(), 0);
}

#[test]
fn smoothing_rejects_bad_parameters() {
    let img = GrayImage::filled(4, 4, 0).unwrap();
    assert!(gaussian_smooth(&img, 0.0, 5).is_err());
    assert!(gaussian_smooth(&img, 1.0, 4).is_err());
    assert!(gaussian_smooth(&img, f64::NAN, 5).is_err());
}
