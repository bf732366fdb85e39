mod common;

use std::sync::Arc;

use awsrn::data::{
    bicubic_resize, bicubic_resize_tensor, cubic, decode_png, load_pairs, load_png, make_pair, rgb_to_y, sample_batch,
    save_png, Augment, BatchLoader, DataError, Factor, Image,
};
use awsrn::{Shape, Tensor};
use common::*;

fn textured(w: usize, h: usize) -> Image {
    Image::from_fn_rgb(w, h, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        [
            (128.0 + 90.0 * (fx * 0.21).sin() * (fy * 0.17).cos()) as u8,
            (128.0 + 80.0 * ((fx + 2.0 * fy) * 0.09).sin()) as u8,
            ((fx * 3.0 + fy * 5.0) % 256.0) as u8 / 2 + 60,
        ]
    })
}

fn smooth(w: usize, h: usize) -> Image {
    Image::from_fn_rgb(w, h, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        [
            (128.0 + 100.0 * (fx * 0.08).sin()) as u8,
            (128.0 + 100.0 * (fy * 0.06).cos()) as u8,
            (128.0 + 60.0 * ((fx + fy) * 0.05).sin()) as u8,
        ]
    })
}

#[test]
fn png_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let img = textured(13, 7);
    let path = dir.path().join("t.png");
    save_png(&img, &path).unwrap();
    assert_eq!(load_png(&path).unwrap(), img);

    let white = Image::from_fn_rgb(1, 1, |_, _| [255, 255, 255]);
    save_png(&white, &path).unwrap();
    assert_eq!(load_png(&path).unwrap().pixel(0, 0), &[255, 255, 255]);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[1] = b'Q';
    assert!(matches!(decode_png(&bytes), Err(DataError::Decode(_))));
    assert!(matches!(load_png(dir.path().join("nope.png")), Err(DataError::Io(_))));

    let gray = Image::new(2, 2, 1, vec![0, 50, 100, 255]).unwrap();
    save_png(&gray, &path).unwrap();
    let back = load_png(&path).unwrap();
    assert_eq!(back.channels(), 3);
    assert_eq!(back.pixel(1, 0), &[50, 50, 50]);
}

#[test]
fn luma_oracle() {
    let img = textured(9, 4);
    let y = rgb_to_y(&img);
    for (i, px) in img.samples().chunks(3).enumerate() {
        let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
        let want = 16.0 + 65.481 * r / 255.0 + 128.553 * g / 255.0 + 24.966 * b / 255.0;
        assert!((y.data[i] - want).abs() < 1e-9);
    }
}

/// Direct 2-D evaluation of the stretched cubic kernel at one target site.
fn bicubic_site(src: &[f64], w: usize, h: usize, ox: usize, oy: usize, scale: f64) -> f64 {
    let stretch = scale.min(1.0);
    let (cx, cy) = ((ox as f64 + 0.5) / scale - 0.5, (oy as f64 + 0.5) / scale - 0.5);
    let (mut acc, mut wsum_x, mut wsum_y) = (0.0, 0.0, 0.0);
    let reach = (2.0 / stretch) as isize + 2;
    for jx in (cx as isize - reach)..=(cx as isize + reach) {
        wsum_x += cubic(stretch * (cx - jx as f64));
    }
    for jy in (cy as isize - reach)..=(cy as isize + reach) {
        wsum_y += cubic(stretch * (cy - jy as f64));
    }
    for jy in (cy as isize - reach)..=(cy as isize + reach) {
        for jx in (cx as isize - reach)..=(cx as isize + reach) {
            let wgt = cubic(stretch * (cx - jx as f64)) * cubic(stretch * (cy - jy as f64)) / (wsum_x * wsum_y);
            let sx = jx.clamp(0, w as isize - 1) as usize;
            let sy = jy.clamp(0, h as isize - 1) as usize;
            acc += wgt * src[sy * w + sx];
        }
    }
    acc
}

#[test]
fn bicubic_matches_direct_kernel() {
    let ramp: Vec<f64> = (0..64).map(|i| ((i % 8) * 9 + (i / 8) * 5) as f64 / 100.0).collect();
    let t = Tensor::new(Shape::new(1, 1, 8, 8), ramp.clone()).unwrap();
    for (factor, scale) in [(Factor::down(2), 0.5), (Factor::up(3), 3.0), (Factor::new(3, 4), 0.75)] {
        let out = bicubic_resize_tensor(&t, factor).unwrap();
        let (ow, oh) = (out.shape().w(), out.shape().h());
        assert_eq!((ow, oh), (factor.apply(8), factor.apply(8)));
        for oy in 0..oh {
            for ox in 0..ow {
                let want = bicubic_site(&ramp, 8, 8, ox, oy, scale);
                assert!((out.at(0, 0, oy, ox) - want).abs() < 1e-4, "{factor:?} ({ox},{oy})");
            }
        }
    }
}

#[test]
fn bicubic_trivial_cases() {
    let c = Tensor::<f64>::full(Shape::new(1, 2, 7, 5), 0.3);
    for f in [Factor::down(2), Factor::up(3), Factor::new(2, 3)] {
        assert!(bicubic_resize_tensor(&c, f).unwrap().data().iter().all(|v| (v - 0.3).abs() < 1e-12));
    }
    let x = random::<f64>(&mut rng(1), Shape::new(1, 1, 6, 6));
    let same = bicubic_resize_tensor(&x, Factor::up(1)).unwrap();
    assert!(max_rel_err(same.data(), x.data()) < 1e-6);
    assert!(matches!(bicubic_resize_tensor(&x, Factor::new(0, 1)), Err(DataError::ZeroSize(_))));
    for taps in awsrn::data::axis_taps(10, 5, 0.5).iter().chain(&awsrn::data::axis_taps(5, 15, 3.0)) {
        assert!((taps.weights.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn make_pair_sizes() {
    let p = make_pair(&textured(101, 67), 4).unwrap();
    assert_eq!((p.hr.width(), p.hr.height(), p.lr.width(), p.lr.height()), (100, 64, 25, 16));
    let p = make_pair(&textured(20, 10), 2).unwrap();
    assert_eq!((p.hr.width(), p.hr.height()), (20, 10));
    assert_eq!(bicubic_resize(&p.lr, Factor::up(2)).unwrap().width(), 20);
    assert!(matches!(make_pair(&textured(3, 9), 4), Err(DataError::TooSmall(_))));
}

#[test]
fn augmentations_keep_alignment() {
    let pair = make_pair(&smooth(64, 64), 2).unwrap();
    for aug in Augment::all() {
        let lr = aug.apply(&pair.lr.crop(4, 6, 16, 16).unwrap());
        let hr = aug.apply(&pair.hr.crop(8, 12, 32, 32).unwrap());
        let down = bicubic_resize(&hr, Factor::down(2)).unwrap();
        let mae: f64 = down.samples().iter().zip(lr.samples()).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum::<f64>()
            / lr.samples().len() as f64;
        assert!(mae / 255.0 < 2.0 / 255.0, "augment {}: mae {mae}", aug.code());
    }
    // 180 degrees swaps opposite corners of both crops consistently
    let lr = pair.lr.crop(0, 0, 8, 8).unwrap();
    let hr = pair.hr.crop(0, 0, 16, 16).unwrap();
    let (lr2, hr2) = (Augment::ROT180.apply(&lr), Augment::ROT180.apply(&hr));
    assert_eq!(lr2.pixel(7, 7), lr.pixel(0, 0));
    assert_eq!(hr2.pixel(15, 15), hr.pixel(0, 0));
    assert_eq!(hr2.pixel(14, 14), hr.pixel(1, 1));
    assert_eq!(Augment::ROT180.map(0, 0, 8), (7, 7));
}

#[test]
fn dihedral_group_is_complete() {
    let img = textured(5, 5);
    let mut seen: Vec<Vec<u8>> = Augment::all().map(|a| a.apply(&img).samples().to_vec()).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 8);
}

fn pairs() -> Vec<awsrn::data::TrainingPair> {
    vec![
        make_pair(&textured(40, 36), 2).unwrap(),
        make_pair(&smooth(30, 30), 2).unwrap(),
        make_pair(&textured(24, 50), 2).unwrap(),
    ]
}

#[test]
fn sampler_is_seeded_and_aligned() {
    let ps = pairs();
    let a = sample_batch::<f32, _>(&ps, &mut rng(9), 6, 8).unwrap();
    let b = sample_batch::<f32, _>(&ps, &mut rng(9), 6, 8).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lr.shape(), Shape::new(8, 3, 6, 6));
    assert_eq!(a.hr.shape(), Shape::new(8, 3, 12, 12));
    for (i, o) in a.origins.iter().enumerate() {
        let p = &ps[o.image];
        let hr = o.augment.apply(&p.hr.crop(2 * o.x, 2 * o.y, 12, 12).unwrap()).to_tensor::<f32>();
        assert_eq!(&a.hr.data()[i * hr.len()..(i + 1) * hr.len()], hr.data());
        assert!(a.lr.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(matches!(sample_batch::<f32, _>(&ps, &mut rng(0), 13, 1), Err(DataError::TooSmall(_))));
}

#[test]
fn sampler_is_uniform() {
    let ps = pairs();
    let b = sample_batch::<f32, _>(&ps, &mut rng(77), 1, 10_000).unwrap();
    let n: f64 = 10_000.0;
    let sigma = (n * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for img in 0..3 {
        let count = b.origins.iter().filter(|o| o.image == img).count() as f64;
        assert!((count - n / 3.0).abs() < 3.0 * sigma, "image {img}: {count}");
    }
    let sigma8 = (n * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
    for code in 0..8 {
        let count = b.origins.iter().filter(|o| o.augment.code() == code).count() as f64;
        assert!((count - n / 8.0).abs() < 3.0 * sigma8, "augment {code}: {count}");
    }
}

#[test]
fn loader_is_deterministic_per_worker_count() {
    let ps = Arc::new(pairs());
    let take = |workers| {
        let mut l = BatchLoader::<f32>::new(Arc::clone(&ps), 3, 4, 2, workers).unwrap();
        (0..6).map(|_| l.next_batch().unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(take(0), take(1));
    assert_eq!(take(3), take(3));
}

#[test]
fn dataset_directory_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_pairs(dir.path(), 2), Err(DataError::Empty(_))));
    save_png(&textured(10, 10), dir.path().join("b.png")).unwrap();
    save_png(&smooth(12, 8), dir.path().join("a.png")).unwrap();
    let all = load_pairs(dir.path(), 2).unwrap();
    assert_eq!(all[0].hr.width(), 12);
    std::fs::write(dir.path().join("manifest.txt"), "# only one\nb.png\n").unwrap();
    assert_eq!(load_pairs(dir.path(), 2).unwrap().len(), 1);
}
