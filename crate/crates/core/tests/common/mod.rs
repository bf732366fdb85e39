#![allow(dead_code)]

use awsrn::model::{ModelConfig, RuKind};
use awsrn::{Element, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random<T: Element>(rng: &mut impl Rng, shape: Shape) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::from_f64(rng.gen_range(-1.0..1.0)))
}

pub fn random_unit<T: Element>(rng: &mut impl Rng, shape: Shape) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::from_f64(rng.gen_range(0.0..1.0)))
}

/// Direct nested-loop cross-correlation with zero padding, accumulated in f64.
pub fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let (xs, ws) = (x.shape(), w.shape());
    let (n, cin, h, wd) = (xs.n(), xs.c(), xs.h(), xs.w());
    let (cout, k) = (ws.n(), ws.h());
    let pad = (k / 2) as isize;
    let mut out = Tensor::zeros(Shape::new(n, cout, h, wd));
    for img in 0..n {
        for co in 0..cout {
            for oy in 0..h {
                for ox in 0..wd {
                    let mut acc = b.data()[co];
                    for ci in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = oy as isize + ky as isize - pad;
                                let ix = ox as isize + kx as isize - pad;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                acc += w.at(co, ci, ky, kx) * x.at(img, ci, iy as usize, ix as usize);
                            }
                        }
                    }
                    let i = out.shape().index(img, co, oy, ox);
                    out.data_mut()[i] = acc;
                }
            }
        }
    }
    out
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / scale).fold(0.0, f64::max)
}

/// Relative error used by the finite-difference checks. The floor sits above
/// the roundoff resolution of a central difference at step 1e-5.
pub fn fd_rel(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub const FD_FLOOR: f64 = 1e-6;

/// Relative error of `analytic` against central differences of `f` around `x`.
///
/// ReLU and L1 are piecewise linear. If `[x - h, x + h]` straddles a kink the
/// two one-sided slopes disagree; the step then shrinks (down to 1e-7) until
/// they agree, and the central difference at that step is compared.
pub fn fd_check(analytic: f64, x: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut centre = None;
    let mut last = (f64::INFINITY, f64::NAN);
    for h in [1e-5, 1e-6, 1e-7] {
        let (up, down) = (f(x + h), f(x - h));
        let numeric = (up - down) / (2.0 * h);
        last = (fd_rel(analytic, numeric), numeric);
        if last.0 < 1e-4 {
            break;
        }
        let c = *centre.get_or_insert_with(|| f(x));
        if fd_rel((up - c) / h, (c - down) / h) < 1e-3 {
            break;
        }
    }
    last
}

pub fn tiny_config(c_feat: usize, c_wide: usize) -> ModelConfig {
    ModelConfig {
        scale: 2,
        n_lfb: 1,
        n_awru: 1,
        c_feat,
        c_wide,
        awms_kernels: vec![3, 5, 7, 9],
        ru_kind: RuKind::Adaptive,
        use_lrfu: true,
        use_awms: true,
        init_unit_weight: 1.0,
        init_branch_weight: 0.25,
    }
}

/// Synthetic 96x96 training crop, invariant under the 8 square symmetries, so
/// augmenting the whole-image patch never changes the sample.
pub fn overfit_crop() -> awsrn::data::Image {
    awsrn::data::Image::from_fn_rgb(96, 96, |x, y| {
        let (dx, dy) = ((x as f64 - 47.5).abs(), (y as f64 - 47.5).abs());
        let (lo, hi) = (dx.min(dy), dx.max(dy));
        let ring = ((dx * dx + dy * dy).sqrt() / 2.3).sin() > 0.0;
        let square = (hi / 4.0).floor() as i64 % 2 == 0;
        let check = ((lo / 5.0).floor() as i64 + (hi / 5.0).floor() as i64) % 2 == 0;
        let diag = ((dx + dy) / 3.0).floor() as i64 % 2 == 0;
        let pick = |b: bool| if b { 1.0 } else { 0.0 };
        let r = 30.0 + 190.0 * if hi < 24.0 { pick(ring) } else { pick(square) };
        let g = 40.0 + 170.0 * if lo < 12.0 { pick(check) } else { pick(diag) };
        let b = 60.0 + 75.0 * pick(ring) + 75.0 * pick(check);
        [r as u8, g as u8, b as u8]
    })
}

/// Overfit recipe: whole-image LR patch, one sample per step, halving every 1000 steps.
pub fn overfit_train_config(seed: u64) -> awsrn::train::TrainConfig {
    awsrn::train::TrainConfig {
        lr0: 1e-3,
        halve_every: 1000,
        batch: 1,
        patch: 48,
        max_iters: 2000,
        seed,
        ..awsrn::train::TrainConfig::default()
    }
}
