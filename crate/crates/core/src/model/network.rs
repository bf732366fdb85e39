use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Eager, Graph};
use crate::kernels;
use crate::model::config::{names, ConvSpec, ModelConfig, ParamRole, RuKind, IMAGE_CHANNELS};
use crate::model::ModelError;
use crate::params::{ParamRegistry, Parameter};
use crate::tensor::{Element, Tensor, TensorError};

/// A configured network and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AwsrnModel<T> {
    config: ModelConfig,
    params: ParamRegistry<T>,
}

impl<T: Element> AwsrnModel<T> {
    /// Initialises every parameter from `seed`.
    ///
    /// Conv directions are drawn uniformly from `±1/sqrt(fan_in)`, gains are set to
    /// the filter norms so the effective kernel equals the draw, biases are zero,
    /// unit and block weights take `init_unit_weight`, branch weights `init_branch_weight`.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamRegistry::new();
        let mut last_norms: Vec<T> = Vec::new();
        for spec in config.parameter_specs() {
            let value = match &spec.role {
                ParamRole::Direction(conv) => {
                    let bound = 1.0 / ((conv.c_in * conv.kernel * conv.kernel) as f64).sqrt();
                    let v = Tensor::from_fn(spec.shape, |_| T::from_f64(rng.gen_range(-bound..bound)));
                    last_norms = kernels::filter_norms(&v);
                    if let Some(channel) = last_norms.iter().position(|&n| n == T::zero()) {
                        return Err(TensorError::ZeroNormFilter { name: spec.name, channel }.into());
                    }
                    v
                }
                ParamRole::Gain => Tensor::new(spec.shape, std::mem::take(&mut last_norms))?,
                ParamRole::Bias => Tensor::zeros(spec.shape),
                ParamRole::Weight(init) => Tensor::scalar(T::from_f64(*init)),
            };
            params.insert(Parameter::new(spec.name, value))?;
        }
        Ok(AwsrnModel { config, params })
    }

    /// Pairs a config with an existing registry, checking names and shapes.
    pub fn from_parts(config: ModelConfig, params: ParamRegistry<T>) -> Result<Self, ModelError> {
        config.validate()?;
        let expected = config.expected_signature();
        let actual = params.signature();
        if expected != actual {
            return Err(ModelError::RegistryMismatch(describe_mismatch(&expected, &actual)));
        }
        Ok(AwsrnModel { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamRegistry<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamRegistry<T> {
        &mut self.params
    }

    pub fn into_parts(self) -> (ModelConfig, ParamRegistry<T>) {
        (self.config, self.params)
    }

    /// Overwrites a scalar weight (`lambda` or `alpha`).
    pub fn set_scalar(&mut self, name: &str, value: T) -> Result<(), TensorError> {
        let p = self.params.get_mut(name)?;
        if !p.value.shape().is_scalar() {
            return Err(TensorError::shape("set_scalar", format!("`{name}` is {}", p.value.shape())));
        }
        p.value.data_mut()[0] = value;
        Ok(())
    }

    pub fn scalar(&self, name: &str) -> Result<T, TensorError> {
        Ok(self.params.get(name)?.value.item())
    }

    pub fn cast<U: Element>(&self) -> AwsrnModel<U> {
        AwsrnModel { config: self.config.clone(), params: self.params.cast() }
    }

    fn p<G: Graph<T>>(&self, g: &mut G, name: &str) -> Result<G::Node, TensorError> {
        Ok(g.param(self.params.get(name)?))
    }

    /// Weight-normalised convolution of `x` by layer `prefix`.
    pub fn conv<G: Graph<T>>(&self, g: &mut G, prefix: &str, x: &G::Node) -> Result<G::Node, TensorError> {
        let spec = ConvSpec::new(prefix, 0, 0, 0);
        let v = self.p(g, &spec.direction())?;
        let gain = self.p(g, &spec.gain())?;
        let b = self.p(g, &spec.bias())?;
        let w = g.weight_norm(&v, &gain, &spec.direction())?;
        g.conv2d(x, &w, &b)
    }

    /// `x_0`: the 3x3 feature extraction.
    pub fn extract<G: Graph<T>>(&self, g: &mut G, lr: &G::Node) -> Result<G::Node, TensorError> {
        let s = g.value(lr).shape();
        if s.c() != IMAGE_CHANNELS {
            return Err(TensorError::shape("forward", format!("expected a 3-channel input, got {s}")));
        }
        self.conv(g, names::EXTRACT, lr)
    }

    /// Residual unit `k` of block `m`: `lambda_res * shrink(relu(expand(x))) + lambda_x * x`.
    pub fn awru_forward<G: Graph<T>>(&self, g: &mut G, m: usize, k: usize, x: &G::Node) -> Result<G::Node, TensorError> {
        let c = g.value(x).shape().c();
        if c != self.config.c_feat {
            return Err(TensorError::shape(
                "awru",
                format!("input has {c} channels, unit expects {}", self.config.c_feat),
            ));
        }
        let h = self.conv(g, &names::expand(m, k), x)?;
        let h = g.relu(&h)?;
        let res = self.conv(g, &names::shrink(m, k), &h)?;
        let (lr, lx) = match self.config.ru_kind {
            RuKind::Adaptive => (self.p(g, &names::unit_res(m, k))?, self.p(g, &names::unit_skip(m, k))?),
            RuKind::Basic => (g.constant(T::one()), g.constant(T::one())),
        };
        g.weighted_add(&res, x, &lr, &lx)
    }

    /// Fusion block `m`: the residual units, then the fused bottleneck with a weighted skip.
    pub fn lfb_forward<G: Graph<T>>(&self, g: &mut G, m: usize, x_prev: &G::Node) -> Result<G::Node, TensorError> {
        let mut outputs = Vec::with_capacity(self.config.n_awru);
        let mut x = x_prev.clone();
        for k in 0..self.config.n_awru {
            x = self.awru_forward(g, m, k, &x)?;
            outputs.push(x.clone());
        }
        if !self.config.use_lrfu {
            return Ok(x);
        }
        let cat = g.concat_channels(&outputs)?;
        let fused = self.conv(g, &names::fuse(m), &cat)?;
        let lr = self.p(g, &names::block_res(m))?;
        let lx = self.p(g, &names::block_skip(m))?;
        g.weighted_add(&fused, x_prev, &lr, &lx)
    }

    /// `x_n`: feature extraction followed by every fusion block.
    pub fn body_forward<G: Graph<T>>(&self, g: &mut G, lr: &G::Node) -> Result<G::Node, TensorError> {
        let mut x = self.extract(g, lr)?;
        for m in 0..self.config.n_lfb {
            x = self.lfb_forward(g, m, &x)?;
        }
        Ok(x)
    }

    /// One reconstruction branch before weighting: conv then pixel shuffle.
    pub fn branch_forward<G: Graph<T>>(&self, g: &mut G, kernel: usize, x_n: &G::Node) -> Result<G::Node, TensorError> {
        let y = self.conv(g, &names::branch(kernel), x_n)?;
        g.pixel_shuffle(&y, self.config.scale)
    }

    /// Global path `f_up`: 3x3 conv on the LR image then pixel shuffle.
    pub fn upsample_skip<G: Graph<T>>(&self, g: &mut G, lr: &G::Node) -> Result<G::Node, TensorError> {
        let y = self.conv(g, names::UPSAMPLE, lr)?;
        g.pixel_shuffle(&y, self.config.scale)
    }

    /// Reconstruction head: `f_up(lr) + sum_i alpha_i * branch_i(x_n)`, accumulated in kernel order.
    pub fn awms_forward<G: Graph<T>>(&self, g: &mut G, x_n: &G::Node, lr: &G::Node) -> Result<G::Node, TensorError> {
        let (xs, ls) = (g.value(x_n).shape(), g.value(lr).shape());
        if xs.n() != ls.n() || xs.h() != ls.h() || xs.w() != ls.w() {
            return Err(TensorError::shape("awms", format!("features {xs} vs image {ls}")));
        }
        let mut acc = self.upsample_skip(g, lr)?;
        let one = g.constant(T::one());
        if self.config.use_awms {
            for &k in &self.config.awms_kernels {
                let branch = self.branch_forward(g, k, x_n)?;
                let alpha = self.p(g, &names::alpha(k))?;
                acc = g.weighted_add(&acc, &branch, &one, &alpha)?;
            }
        } else {
            let y = self.conv(g, names::HEAD, x_n)?;
            let head = g.pixel_shuffle(&y, self.config.scale)?;
            acc = g.weighted_add(&acc, &head, &one, &one)?;
        }
        Ok(acc)
    }

    /// Full network, unclamped.
    pub fn forward<G: Graph<T>>(&self, g: &mut G, lr: &G::Node) -> Result<G::Node, TensorError> {
        let x_n = self.body_forward(g, lr)?;
        self.awms_forward(g, &x_n, lr)
    }

    /// Evaluates the network without recording gradients. Output is unclamped.
    pub fn predict(&self, lr: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        let mut g = Eager;
        let x = g.input(lr.clone());
        let y = self.forward(&mut g, &x)?;
        Ok(std::sync::Arc::try_unwrap(y).unwrap_or_else(|a| (*a).clone()))
    }

    /// Inference entry point: output clamped to `[0, 1]`.
    pub fn super_resolve(&self, lr: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        Ok(self.predict(lr)?.map(|v| v.max(T::zero()).min(T::one())))
    }
}

fn describe_mismatch(expected: &[(String, crate::tensor::Shape)], actual: &[(String, crate::tensor::Shape)]) -> String {
    for (i, (e, a)) in expected.iter().zip(actual).enumerate() {
        if e != a {
            return format!("entry {i}: expected `{}` {}, found `{}` {}", e.0, e.1, a.0, a.1);
        }
    }
    format!("expected {} parameters, found {}", expected.len(), actual.len())
}
