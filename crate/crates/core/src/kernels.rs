//! Forward kernels and their vector-Jacobian products.
//!
//! Every kernel is a pure function of its inputs. Parallel loops split work
//! over output planes only, so each element is reduced in a fixed order and
//! results do not depend on the thread count.

use rayon::prelude::*;

use crate::tensor::{Element, Shape, Tensor, TensorError};

fn same_shape(op: &'static str, a: Shape, b: Shape) -> Result<(), TensorError> {
    if a != b {
        return Err(TensorError::shape(op, format!("{a} vs {b}")));
    }
    Ok(())
}

/// Validates `(input, weight, bias)` for a same-padded stride-1 convolution and returns `k`.
fn check_conv<T: Element>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<usize, TensorError> {
    let (xs, ws) = (x.shape(), w.shape());
    let k = ws.h();
    if ws.w() != k {
        return Err(TensorError::shape("conv2d", format!("kernel {ws} is not square")));
    }
    if k % 2 == 0 {
        return Err(TensorError::shape("conv2d", format!("kernel {ws} has even size {k}")));
    }
    if ws.c() != xs.c() {
        return Err(TensorError::shape(
            "conv2d",
            format!("input {xs} has {} channels but weight {ws} expects {}", xs.c(), ws.c()),
        ));
    }
    if b.shape() != Shape::vector(ws.n()) {
        return Err(TensorError::shape(
            "conv2d",
            format!("bias {} does not match weight {ws}", b.shape()),
        ));
    }
    Ok(k)
}

/// Zero-padded copy of every `(n, c)` plane, `pad` pixels on each side.
fn pad_planes<T: Element>(data: &[T], planes: usize, h: usize, w: usize, pad: usize) -> Vec<T> {
    let (hp, wp) = (h + 2 * pad, w + 2 * pad);
    let mut out = vec![T::zero(); planes * hp * wp];
    if h * w == 0 {
        return out;
    }
    out.par_chunks_mut(hp * wp).zip(data.par_chunks(h * w)).for_each(|(dst, src)| {
        for (y, row) in src.chunks(w).enumerate() {
            dst[(y + pad) * wp + pad..][..w].copy_from_slice(row);
        }
    });
    out
}

/// Planes of `h x w` laid out on rows of stride `wp`, extra columns zero.
fn widen<T: Element>(data: &[T], planes: usize, h: usize, w: usize, wp: usize) -> Vec<T> {
    let mut out = vec![T::zero(); planes * h * wp];
    if h * w == 0 {
        return out;
    }
    out.par_chunks_mut(h * wp).zip(data.par_chunks(h * w)).for_each(|(dst, src)| {
        for (y, row) in src.chunks(w).enumerate() {
            dst[y * wp..][..w].copy_from_slice(row);
        }
    });
    out
}

#[inline]
fn axpy<T: Element>(dst: &mut [T], a: T, src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// Dot product with eight fixed partial sums, so the reduction order never changes.
#[inline]
fn dot<T: Element>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            lanes[i] += x[i] * y[i];
        }
    }
    let mut acc = lanes.iter().copied().sum::<T>();
    for (&x, &y) in ra.iter().zip(rb) {
        acc += x * y;
    }
    acc
}

/// Cross-correlation with zero padding `(k-1)/2`, stride 1, plus a per-channel bias.
///
/// Inputs are padded once; on the padded row stride every tap is a single
/// contiguous multiply-add over the whole plane.
pub fn conv2d<T: Element>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let k = check_conv(x, w, b)?;
    let xs = x.shape();
    let (n, cin, h, wd) = (xs.n(), xs.c(), xs.h(), xs.w());
    let cout = w.shape().n();
    let pad = k / 2;
    let (hp, wp) = (h + 2 * pad, wd + 2 * pad);
    let plane = h * wd;
    let mut out = Tensor::zeros(Shape::new(n, cout, h, wd));
    if plane == 0 {
        return Ok(out);
    }
    let xp = pad_planes(x.data(), n * cin, h, wd, pad);
    let span = h * wp - 2 * pad;
    let (wdta, bd) = (w.data(), b.data());
    out.data_mut().par_chunks_mut(plane).enumerate().for_each(|(idx, dst)| {
        let (img, co) = (idx / cout, idx % cout);
        let mut acc = vec![T::zero(); h * wp];
        for ci in 0..cin {
            let src = &xp[(img * cin + ci) * hp * wp..][..hp * wp];
            let taps = &wdta[(co * cin + ci) * k * k..][..k * k];
            for (t, &wv) in taps.iter().enumerate() {
                let off = (t / k) * wp + t % k;
                axpy(&mut acc[..span], wv, &src[off..off + span]);
            }
        }
        for (y, row) in dst.chunks_mut(wd).enumerate() {
            for (d, &a) in row.iter_mut().zip(&acc[y * wp..]) {
                *d = a + bd[co];
            }
        }
    });
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input (if requested), weight and bias.
pub fn conv2d_backward<T: Element>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &[T],
    need_input: bool,
) -> (Option<Vec<T>>, Vec<T>, Vec<T>) {
    let xs = x.shape();
    let (n, cin, h, wd) = (xs.n(), xs.c(), xs.h(), xs.w());
    let cout = w.shape().n();
    let k = w.shape().h();
    let pad = k / 2;
    let (hp, wp) = (h + 2 * pad, wd + 2 * pad);
    let plane = h * wd;
    let wdta = w.data();

    let grad_bias: Vec<T> = (0..cout)
        .into_par_iter()
        .map(|co| {
            let mut acc = T::zero();
            for img in 0..n {
                acc += grad_out[(img * cout + co) * plane..][..plane].iter().copied().sum::<T>();
            }
            acc
        })
        .collect();

    let mut grad_w = vec![T::zero(); cout * cin * k * k];
    if plane == 0 {
        return (need_input.then(|| vec![T::zero(); x.len()]), grad_w, grad_bias);
    }
    let span = h * wp - 2 * pad;
    let xp = pad_planes(x.data(), n * cin, h, wd, pad);
    let gw_wide = widen(grad_out, n * cout, h, wd, wp);

    grad_w.par_chunks_mut(cin * k * k).enumerate().for_each(|(co, gw)| {
        for img in 0..n {
            let go = &gw_wide[(img * cout + co) * h * wp..][..span];
            for ci in 0..cin {
                let src = &xp[(img * cin + ci) * hp * wp..][..hp * wp];
                for t in 0..k * k {
                    let off = (t / k) * wp + t % k;
                    gw[ci * k * k + t] += dot(go, &src[off..off + span]);
                }
            }
        }
    });

    let grad_x = need_input.then(|| {
        let mut gx = vec![T::zero(); x.len()];
        gx.par_chunks_mut(plane).enumerate().for_each(|(idx, dst)| {
            let (img, ci) = (idx / cin, idx % cin);
            let mut acc = vec![T::zero(); hp * wp];
            for co in 0..cout {
                let go = &gw_wide[(img * cout + co) * h * wp..][..span];
                let taps = &wdta[(co * cin + ci) * k * k..][..k * k];
                for (t, &wv) in taps.iter().enumerate() {
                    let off = (t / k) * wp + t % k;
                    axpy(&mut acc[off..off + span], wv, go);
                }
            }
            for (y, row) in dst.chunks_mut(wd).enumerate() {
                row.copy_from_slice(&acc[(y + pad) * wp + pad..][..wd]);
            }
        });
        gx
    });

    (grad_x, grad_w, grad_bias)
}

pub fn relu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Element>(x: &Tensor<T>, grad_out: &[T]) -> Vec<T> {
    x.data()
        .iter()
        .zip(grad_out)
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect()
}

/// Rearranges `(N, C*s*s, H, W)` into `(N, C, H*s, W*s)`:
/// `out[n][c][h*s+i][w*s+j] = in[n][c*s*s + i*s + j][h][w]`.
pub fn pixel_shuffle<T: Element>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>, TensorError> {
    let xs = x.shape();
    if s == 0 || !xs.c().is_multiple_of(s * s) {
        return Err(TensorError::shape(
            "pixel_shuffle",
            format!("{} channels of {xs} not divisible by {s}^2", xs.c()),
        ));
    }
    let os = Shape::new(xs.n(), xs.c() / (s * s), xs.h() * s, xs.w() * s);
    let mut out = Tensor::zeros(os);
    let src = x.data();
    let dst = out.data_mut();
    for n in 0..os.n() {
        for c in 0..os.c() {
            for i in 0..s {
                for j in 0..s {
                    let ic = c * s * s + i * s + j;
                    for h in 0..xs.h() {
                        for w in 0..xs.w() {
                            dst[os.index(n, c, h * s + i, w * s + j)] = src[xs.index(n, ic, h, w)];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse index map of [`pixel_shuffle`]; also its exact adjoint.
pub fn pixel_unshuffle<T: Element>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>, TensorError> {
    let xs = x.shape();
    if s == 0 || !xs.h().is_multiple_of(s) || !xs.w().is_multiple_of(s) {
        return Err(TensorError::shape(
            "pixel_unshuffle",
            format!("spatial size of {xs} not divisible by {s}"),
        ));
    }
    let os = Shape::new(xs.n(), xs.c() * s * s, xs.h() / s, xs.w() / s);
    let mut out = Tensor::zeros(os);
    let src = x.data();
    let dst = out.data_mut();
    for n in 0..xs.n() {
        for c in 0..xs.c() {
            for i in 0..s {
                for j in 0..s {
                    let oc = c * s * s + i * s + j;
                    for h in 0..os.h() {
                        for w in 0..os.w() {
                            dst[os.index(n, oc, h, w)] = src[xs.index(n, c, h * s + i, w * s + j)];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Concatenates along the channel axis, preserving input order.
pub fn concat_channels<T: Element>(inputs: &[&Tensor<T>]) -> Result<Tensor<T>, TensorError> {
    let first = inputs
        .first()
        .ok_or_else(|| TensorError::shape("concat_channels", "no inputs"))?
        .shape();
    for t in inputs {
        let s = t.shape();
        if s.n() != first.n() || s.h() != first.h() || s.w() != first.w() {
            return Err(TensorError::shape("concat_channels", format!("{first} vs {s}")));
        }
    }
    let total_c: usize = inputs.iter().map(|t| t.shape().c()).sum();
    let os = Shape::new(first.n(), total_c, first.h(), first.w());
    let mut data = Vec::with_capacity(os.numel());
    for n in 0..first.n() {
        for t in inputs {
            let block = t.shape().c() * t.shape().plane();
            data.extend_from_slice(&t.data()[n * block..(n + 1) * block]);
        }
    }
    Tensor::new(os, data)
}

/// Splits a concatenated gradient back into per-input gradients.
pub fn split_channels<T: Element>(grad: &[T], shapes: &[Shape]) -> Vec<Vec<T>> {
    let n = shapes.first().map_or(0, |s| s.n());
    let row: usize = shapes.iter().map(|s| s.c() * s.plane()).sum();
    let mut out: Vec<Vec<T>> = shapes.iter().map(|s| Vec::with_capacity(s.numel())).collect();
    for img in 0..n {
        let mut off = img * row;
        for (dst, s) in out.iter_mut().zip(shapes) {
            let block = s.c() * s.plane();
            dst.extend_from_slice(&grad[off..off + block]);
            off += block;
        }
    }
    out
}

/// `la * a + lb * b` with scalar weights.
pub fn weighted_add<T: Element>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    la: &Tensor<T>,
    lb: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    same_shape("weighted_add", a.shape(), b.shape())?;
    for l in [la, lb] {
        if !l.shape().is_scalar() {
            return Err(TensorError::shape("weighted_add", format!("weight {} is not scalar", l.shape())));
        }
    }
    let (wa, wb) = (la.item(), lb.item());
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| wa * x + wb * y).collect();
    Tensor::new(a.shape(), data)
}

/// Returns `(d_a, d_b, d_la, d_lb)`.
pub fn weighted_add_backward<T: Element>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    la: T,
    lb: T,
    grad_out: &[T],
) -> (Vec<T>, Vec<T>, T, T) {
    let ga = grad_out.iter().map(|&g| la * g).collect();
    let gb = grad_out.iter().map(|&g| lb * g).collect();
    let gla = grad_out.iter().zip(a.data()).map(|(&g, &x)| g * x).sum();
    let glb = grad_out.iter().zip(b.data()).map(|(&g, &y)| g * y).sum();
    (ga, gb, gla, glb)
}

/// `lambda * x` for a scalar `lambda`.
pub fn scale<T: Element>(x: &Tensor<T>, lambda: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    if !lambda.shape().is_scalar() {
        return Err(TensorError::shape("scale", format!("weight {} is not scalar", lambda.shape())));
    }
    let l = lambda.item();
    Ok(x.map(|v| l * v))
}

/// Per-output-channel L2 norms of a `(C_out, ...)` kernel.
pub fn filter_norms<T: Element>(v: &Tensor<T>) -> Vec<T> {
    let cout = v.shape().n();
    let fan = v.len().checked_div(cout).unwrap_or(0);
    v.data().chunks(fan.max(1)).take(cout).map(|f| f.iter().map(|&x| x * x).sum::<T>().sqrt()).collect()
}

/// Effective kernel `w[o] = g[o] * v[o] / ||v[o]||`.
pub fn weight_norm<T: Element>(v: &Tensor<T>, g: &Tensor<T>, name: &str) -> Result<Tensor<T>, TensorError> {
    let cout = v.shape().n();
    if g.shape() != Shape::vector(cout) {
        return Err(TensorError::shape(
            "weight_norm",
            format!("gain {} does not match kernel {}", g.shape(), v.shape()),
        ));
    }
    let norms = filter_norms(v);
    if let Some(channel) = norms.iter().position(|&n| n == T::zero()) {
        return Err(TensorError::ZeroNormFilter { name: name.to_string(), channel });
    }
    let fan = v.len() / cout.max(1);
    let mut out = Tensor::zeros(v.shape());
    for (o, (dst, src)) in out.data_mut().chunks_mut(fan).zip(v.data().chunks(fan)).enumerate() {
        let f = g.data()[o] / norms[o];
        dst.iter_mut().zip(src).for_each(|(d, &s)| *d = f * s);
    }
    Ok(out)
}

/// Returns `(d_v, d_g)` for [`weight_norm`].
pub fn weight_norm_backward<T: Element>(v: &Tensor<T>, g: &Tensor<T>, grad_w: &[T]) -> (Vec<T>, Vec<T>) {
    let cout = v.shape().n();
    let fan = v.len() / cout.max(1);
    let norms = filter_norms(v);
    let mut gv = vec![T::zero(); v.len()];
    let mut gg = vec![T::zero(); cout];
    for o in 0..cout {
        let vo = &v.data()[o * fan..][..fan];
        let go = &grad_w[o * fan..][..fan];
        let norm = norms[o];
        let dot: T = vo.iter().zip(go).map(|(&a, &b)| a * b).sum();
        gg[o] = dot / norm;
        let f = g.data()[o] / norm;
        let proj = dot / (norm * norm);
        for ((d, &gw), &vv) in gv[o * fan..][..fan].iter_mut().zip(go).zip(vo) {
            *d = f * (gw - proj * vv);
        }
    }
    (gv, gg)
}

/// Sum of all elements as a scalar tensor.
pub fn sum<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    Tensor::scalar(x.data().iter().copied().sum())
}

/// Mean absolute difference as a scalar tensor.
pub fn l1_loss<T: Element>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    same_shape("l1_loss", pred.shape(), target.shape())?;
    let count = T::from_f64(pred.len() as f64);
    let total: T = pred.data().iter().zip(target.data()).map(|(&p, &t)| (p - t).abs()).sum();
    Ok(Tensor::scalar(total / count))
}

/// Subgradient `sign(pred - target) / count`, with `sign(0) = 0`.
pub fn l1_loss_backward<T: Element>(pred: &Tensor<T>, target: &Tensor<T>, grad_out: T) -> Vec<T> {
    let scale = grad_out / T::from_f64(pred.len() as f64);
    pred.data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            if d > T::zero() {
                scale
            } else if d < T::zero() {
                -scale
            } else {
                T::zero()
            }
        })
        .collect()
}
