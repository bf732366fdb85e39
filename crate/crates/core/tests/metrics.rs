mod common;

use awsrn::autodiff::{Eager, Graph};
use awsrn::data::{save_png, Image, Plane};
use awsrn::metrics::{
    count_params, evaluate_dir, gaussian_taps, inspect_weights, prune_branches, psnr_planes, psnr_y, ssim_planes, ssim_y,
    MetricsError, PruneError, Psnr,
};
use awsrn::model::{names, write_checkpoint, AwsrnModel, ConvSpec, ModelConfig, Preset};
use awsrn::Shape;
use common::*;
use rand::Rng;

fn noise_image(seed: u64, w: usize, h: usize) -> Image {
    let mut r = rng(seed);
    let samples = (0..w * h * 3).map(|_| r.gen::<u8>()).collect();
    Image::new(w, h, 3, samples).unwrap()
}

fn perturb(img: &Image, seed: u64, amp: i32) -> Image {
    let mut r = rng(seed);
    let samples = img.samples().iter().map(|&v| (v as i32 + r.gen_range(-amp..=amp)).clamp(0, 255) as u8).collect();
    Image::new(img.width(), img.height(), 3, samples).unwrap()
}

fn luma(img: &Image) -> Vec<f64> {
    img.samples()
        .chunks(3)
        .map(|p| 16.0 + (65.481 * p[0] as f64 + 128.553 * p[1] as f64 + 24.966 * p[2] as f64) / 255.0)
        .collect()
}

#[test]
fn psnr_direct_oracle() {
    let a = noise_image(1, 20, 17);
    let b = perturb(&a, 2, 12);
    let (ya, yb) = (luma(&a), luma(&b));
    for shave in [0, 2, 5] {
        let mut se = 0.0;
        let mut n = 0.0;
        for y in shave..17 - shave {
            for x in shave..20 - shave {
                se += (ya[y * 20 + x] - yb[y * 20 + x]).powi(2);
                n += 1.0;
            }
        }
        let want = 10.0 * (255.0f64 * 255.0 / (se / n)).log10();
        let got = psnr_y(&a, &b, shave).unwrap().db();
        assert!((got - want).abs() < 1e-6, "shave {shave}: {got} vs {want}");
        assert_eq!(psnr_y(&b, &a, shave).unwrap(), psnr_y(&a, &b, shave).unwrap());
    }
    assert_eq!(psnr_y(&a, &a, 0).unwrap(), Psnr::Identical);
    assert_eq!(psnr_y(&a, &a, 0).unwrap().db(), f64::INFINITY);
    assert!(matches!(psnr_y(&a, &noise_image(3, 20, 16), 0), Err(MetricsError::DimensionMismatch(_))));
    assert!(matches!(psnr_y(&a, &b, 9), Err(MetricsError::ShaveTooLarge { .. })));
}

#[test]
fn psnr_at_unit_mse() {
    let a = Plane { width: 6, height: 5, data: (0..30).map(|i| i as f64 * 3.0).collect() };
    let b = Plane { width: 6, height: 5, data: a.data.iter().map(|v| v + 1.0).collect() };
    let p = psnr_planes(&a, &b, 0).unwrap().db();
    assert!((p - 48.1308).abs() < 5e-5);
}

/// Windowed statistics with an explicit 2-D Gaussian built from the exponential directly.
fn ssim_oracle(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let mut win = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut acc = 0.0;
    let mut count = 0.0;
    for y in 0..=h - 11 {
        for x in 0..=w - 11 {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wt = win[i][j] / total;
                    let (p, q) = (a[(y + i) * w + x + j], b[(y + i) * w + x + j]);
                    ma += wt * p;
                    mb += wt * q;
                    saa += wt * p * p;
                    sbb += wt * q * q;
                    sab += wt * p * q;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1.0;
        }
    }
    acc / count
}

#[test]
fn ssim_direct_oracle() {
    let a = noise_image(4, 32, 32);
    let b = perturb(&a, 5, 40);
    let want = ssim_oracle(&luma(&a), &luma(&b), 32, 32);
    let got = ssim_y(&a, &b).unwrap();
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    assert_eq!(ssim_y(&b, &a).unwrap(), got);
    assert_eq!(ssim_y(&a, &a).unwrap(), 1.0);
    assert!(got > -1.0 && got < 1.0);
    assert!(matches!(ssim_y(&noise_image(1, 10, 40), &noise_image(2, 10, 40)), Err(MetricsError::TooSmall(_))));

    let c = Plane { width: 12, height: 12, data: vec![40.0; 144] };
    let d = Plane { width: 12, height: 12, data: vec![200.0; 144] };
    let s = ssim_planes(&c, &d).unwrap();
    assert!(s < 1.0);
    let c1 = (0.01f64 * 255.0).powi(2);
    assert!((s - (2.0 * 40.0 * 200.0 + c1) / (40.0f64.powi(2) + 200.0f64.powi(2) + c1)).abs() < 1e-12);
    assert_eq!(gaussian_taps(11, 1.5).len(), 11);
}

fn with_alphas(alphas: [f64; 4]) -> AwsrnModel<f32> {
    let cfg = ModelConfig { c_feat: 8, c_wide: 16, ..ModelConfig::preset(Preset::AwsrnS, 2) };
    let mut m = AwsrnModel::build(cfg, 3).unwrap();
    for (k, a) in [3, 5, 7, 9].into_iter().zip(alphas) {
        m.set_scalar(&names::alpha(k), a as f32).unwrap();
    }
    m
}

#[test]
fn table4_weight_vectors_select_one_branch() {
    let (_, removed) = prune_branches(&with_alphas([0.1282, 0.0211, -0.0003, 0.0173]), 0.01).unwrap();
    assert_eq!(removed, vec![7]);
    let (pruned, removed) = prune_branches(&with_alphas([0.1029, 0.0190, 0.0111, 0.0088]), 0.01).unwrap();
    assert_eq!(removed, vec![9]);
    assert_eq!(pruned.config().awms_kernels, vec![3, 5, 7]);
}

#[test]
fn zero_alpha_pruning_is_exact() {
    let model = with_alphas([0.2, 0.0, 0.3, -0.1]);
    let (pruned, removed) = prune_branches(&model, 1e-12).unwrap();
    assert_eq!(removed, vec![5]);
    let lr = random_unit::<f32>(&mut rng(6), Shape::new(1, 3, 7, 9));
    assert_eq!(model.predict(&lr).unwrap(), pruned.predict(&lr).unwrap());
    let spec = ConvSpec::new("awms.k5", 8, 12, 5);
    let branch_scalars = (spec.param_count() + 1) as u64;
    assert_eq!(count_params(&pruned), count_params(&model) - branch_scalars);
    assert_eq!(branch_scalars, 5 * 5 * 8 * 12 + 12 + 12 + 1);
}

#[test]
fn pruning_change_is_bounded_by_alpha() {
    let model = with_alphas([0.2, 0.004, 0.3, -0.007]);
    let (pruned, removed) = prune_branches(&model, 0.01).unwrap();
    assert_eq!(removed, vec![5, 9]);
    let mut r = rng(7);
    for _ in 0..5 {
        let lr = random_unit::<f32>(&mut r, Shape::new(1, 3, 6, 6));
        let full = model.predict(&lr).unwrap().cast::<f64>();
        let cut = pruned.predict(&lr).unwrap().cast::<f64>();
        let mut g = Eager;
        let x = g.input(lr.clone());
        let xn = model.body_forward(&mut g, &x).unwrap();
        let mut bound = 0.0;
        for k in removed.iter().copied() {
            let b = model.branch_forward(&mut g, k, &xn).unwrap();
            let alpha = model.scalar(&names::alpha(k)).unwrap().abs() as f64;
            bound += alpha * g.value(&b).max_abs() as f64;
        }
        for (a, b) in full.data().iter().zip(cut.data()) {
            assert!((a - b).abs() <= bound * (1.0 + 1e-5) + 1e-6);
        }
    }
}

#[test]
fn pruning_refusals() {
    let model = with_alphas([0.2, 0.1, 0.3, 0.1]);
    assert!(matches!(prune_branches(&model, 1.0), Err(PruneError::WouldRemoveAll(_))));
    assert!(matches!(prune_branches(&model, -1.0), Err(PruneError::InvalidThreshold(_))));
    let (same, removed) = prune_branches(&model, 0.0).unwrap();
    assert!(removed.is_empty());
    assert_eq!(write_checkpoint(&same), write_checkpoint(&model));
    let plain = ModelConfig { use_awms: false, c_feat: 4, c_wide: 8, ..ModelConfig::preset(Preset::AwsrnS, 2) };
    let plain = AwsrnModel::<f32>::build(plain, 0).unwrap();
    assert!(matches!(prune_branches(&plain, 0.1), Err(PruneError::NotAwms)));
}

#[test]
fn weight_report_rows() {
    let model = AwsrnModel::<f32>::build(ModelConfig::preset(Preset::Awsrn, 2), 0).unwrap();
    let report = inspect_weights(&model).unwrap();
    assert_eq!((report.units.len(), report.blocks.len(), report.branches.len()), (16, 4, 4));
    assert!(report.units.iter().all(|u| u.lambda_res == 1.0 && u.lambda_x == 1.0));
    assert!(report.blocks.iter().all(|b| b.lambda_res == 1.0 && b.lambda_x == 1.0));
    assert!(report.branches.iter().all(|b| b.alpha == 0.25));
    assert_eq!(report.units.iter().map(|u| u.depth).collect::<Vec<_>>(), (0..16).collect::<Vec<_>>());
    assert_eq!(report.to_csv().lines().count(), 1 + 24);
}

#[test]
fn eval_directory() {
    let dir = tempfile::tempdir().unwrap();
    save_png(&noise_image(1, 24, 24), dir.path().join("a.png")).unwrap();
    save_png(&noise_image(2, 4, 4), dir.path().join("b.png")).unwrap();
    let model = AwsrnModel::<f32>::build(tiny_config(4, 8), 0).unwrap();
    let report = evaluate_dir(&model, dir.path(), 2).unwrap();
    assert_eq!(report.images.len(), 2);
    assert!(report.images[0].result.is_ok());
    assert!(report.images[1].result.is_err());
    assert_eq!(report.failures(), 1);
    assert!(report.mean_model().is_some());
    let empty = tempfile::tempdir().unwrap();
    assert!(evaluate_dir(&model, empty.path(), 2).is_err());
}
