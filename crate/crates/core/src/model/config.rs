use std::fmt;
use std::str::FromStr;

use crate::model::ModelError;
use crate::tensor::Shape;

/// Residual unit flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuKind {
    /// Plain wide-activation unit `f(x) + x`; both branch weights are fixed at 1.
    Basic,
    /// Learns `lambda_res * f(x) + lambda_x * x`.
    Adaptive,
}

impl RuKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RuKind::Basic => "basic",
            RuKind::Adaptive => "adaptive",
        }
    }
}

impl FromStr for RuKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" => Ok(RuKind::Basic),
            "adaptive" => Ok(RuKind::Adaptive),
            other => Err(ModelError::InvalidConfig(format!("unknown ru_kind `{other}` (basic|adaptive)"))),
        }
    }
}

/// Full architectural description of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub scale: usize,
    pub n_lfb: usize,
    /// Residual units per fusion block.
    pub n_awru: usize,
    pub c_feat: usize,
    /// Internal (activated) width of each residual unit.
    pub c_wide: usize,
    pub awms_kernels: Vec<usize>,
    pub ru_kind: RuKind,
    pub use_lrfu: bool,
    /// `false` replaces the weighted multi-scale head with one unweighted 3x3 branch.
    pub use_awms: bool,
    pub init_unit_weight: f64,
    pub init_branch_weight: f64,
}

pub const SUPPORTED_SCALES: [usize; 4] = [2, 3, 4, 8];
pub const IMAGE_CHANNELS: usize = 3;

impl ModelConfig {
    pub fn preset(preset: Preset, scale: usize) -> Self {
        let (n_lfb, n_awru, c_feat) = match preset {
            Preset::AwsrnS => (1, 4, 32),
            Preset::AwsrnSd => (1, 8, 16),
            Preset::AwsrnM => (3, 4, 32),
            Preset::Awsrn => (4, 4, 32),
        };
        ModelConfig {
            scale,
            n_lfb,
            n_awru,
            c_feat,
            c_wide: 128,
            awms_kernels: vec![3, 5, 7, 9],
            ru_kind: RuKind::Adaptive,
            use_lrfu: true,
            use_awms: true,
            init_unit_weight: 1.0,
            init_branch_weight: 0.25,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if !SUPPORTED_SCALES.contains(&self.scale) {
            return bad(format!("scale {} not in {SUPPORTED_SCALES:?}", self.scale));
        }
        for (field, v) in [("n_lfb", self.n_lfb), ("n_awru", self.n_awru), ("c_feat", self.c_feat), ("c_wide", self.c_wide)] {
            if v == 0 {
                return bad(format!("{field} must be at least 1"));
            }
        }
        if self.use_awms && self.awms_kernels.is_empty() {
            return bad("awms_kernels is empty".into());
        }
        for (i, &k) in self.awms_kernels.iter().enumerate() {
            if k % 2 == 0 {
                return bad(format!("awms kernel {k} is not odd"));
            }
            if self.awms_kernels[..i].contains(&k) {
                return bad(format!("awms kernel {k} listed twice"));
            }
        }
        if !self.init_unit_weight.is_finite() || !self.init_branch_weight.is_finite() {
            return bad("initial weights must be finite".into());
        }
        Ok(())
    }

    /// Channels produced by each reconstruction branch before the shuffle.
    pub fn recon_channels(&self) -> usize {
        IMAGE_CHANNELS * self.scale * self.scale
    }

    /// Every convolution in forward order.
    pub fn convs(&self) -> Vec<ConvSpec> {
        let mut out = vec![ConvSpec::new(names::EXTRACT, IMAGE_CHANNELS, self.c_feat, 3)];
        for m in 0..self.n_lfb {
            for k in 0..self.n_awru {
                out.push(ConvSpec::new(names::expand(m, k), self.c_feat, self.c_wide, 3));
                out.push(ConvSpec::new(names::shrink(m, k), self.c_wide, self.c_feat, 3));
            }
            if self.use_lrfu {
                out.push(ConvSpec::new(names::fuse(m), self.n_awru * self.c_feat, self.c_feat, 3));
            }
        }
        if self.use_awms {
            for &k in &self.awms_kernels {
                out.push(ConvSpec::new(names::branch(k), self.c_feat, self.recon_channels(), k));
            }
        } else {
            out.push(ConvSpec::new(names::HEAD, self.c_feat, self.recon_channels(), 3));
        }
        out.push(ConvSpec::new(names::UPSAMPLE, IMAGE_CHANNELS, self.recon_channels(), 3));
        out
    }

    /// The full parameter registry layout, in forward order. A pure function of the config.
    pub fn parameter_specs(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        let conv = |out: &mut Vec<ParamSpec>, c: ConvSpec| {
            out.push(ParamSpec { name: c.direction(), shape: c.weight_shape(), role: ParamRole::Direction(c.clone()) });
            out.push(ParamSpec { name: c.gain(), shape: Shape::vector(c.c_out), role: ParamRole::Gain });
            out.push(ParamSpec { name: c.bias(), shape: Shape::vector(c.c_out), role: ParamRole::Bias });
        };
        let scalar = |out: &mut Vec<ParamSpec>, name: String, init: f64| {
            out.push(ParamSpec { name, shape: Shape::SCALAR, role: ParamRole::Weight(init) });
        };
        conv(&mut out, ConvSpec::new(names::EXTRACT, IMAGE_CHANNELS, self.c_feat, 3));
        for m in 0..self.n_lfb {
            for k in 0..self.n_awru {
                conv(&mut out, ConvSpec::new(names::expand(m, k), self.c_feat, self.c_wide, 3));
                conv(&mut out, ConvSpec::new(names::shrink(m, k), self.c_wide, self.c_feat, 3));
                if self.ru_kind == RuKind::Adaptive {
                    scalar(&mut out, names::unit_res(m, k), self.init_unit_weight);
                    scalar(&mut out, names::unit_skip(m, k), self.init_unit_weight);
                }
            }
            if self.use_lrfu {
                conv(&mut out, ConvSpec::new(names::fuse(m), self.n_awru * self.c_feat, self.c_feat, 3));
                scalar(&mut out, names::block_res(m), self.init_unit_weight);
                scalar(&mut out, names::block_skip(m), self.init_unit_weight);
            }
        }
        if self.use_awms {
            for &k in &self.awms_kernels {
                conv(&mut out, ConvSpec::new(names::branch(k), self.c_feat, self.recon_channels(), k));
                scalar(&mut out, names::alpha(k), self.init_branch_weight);
            }
        } else {
            conv(&mut out, ConvSpec::new(names::HEAD, self.c_feat, self.recon_channels(), 3));
        }
        conv(&mut out, ConvSpec::new(names::UPSAMPLE, IMAGE_CHANNELS, self.recon_channels(), 3));
        out
    }

    /// `(name, shape)` pairs a registry for this config must hold, in order.
    pub fn expected_signature(&self) -> Vec<(String, Shape)> {
        self.parameter_specs().into_iter().map(|p| (p.name, p.shape)).collect()
    }
}

/// Named model sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    AwsrnS,
    AwsrnSd,
    AwsrnM,
    Awsrn,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::AwsrnS, Preset::AwsrnSd, Preset::AwsrnM, Preset::Awsrn];

    pub fn name(self) -> &'static str {
        match self {
            Preset::AwsrnS => "awsrn-s",
            Preset::AwsrnSd => "awsrn-sd",
            Preset::AwsrnM => "awsrn-m",
            Preset::Awsrn => "awsrn",
        }
    }

    pub fn names() -> String {
        Preset::ALL.map(Preset::name).join(", ")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == lower)
            .ok_or_else(|| ModelError::UnknownPreset(s.to_string()))
    }
}

/// One weight-normalised convolution: direction `v`, gain `g`, bias `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
}

impl ConvSpec {
    pub fn new(name: impl Into<String>, c_in: usize, c_out: usize, kernel: usize) -> Self {
        ConvSpec { name: name.into(), c_in, c_out, kernel }
    }

    pub fn weight_shape(&self) -> Shape {
        Shape::new(self.c_out, self.c_in, self.kernel, self.kernel)
    }

    pub fn direction(&self) -> String {
        format!("{}.v", self.name)
    }
    pub fn gain(&self) -> String {
        format!("{}.g", self.name)
    }
    pub fn bias(&self) -> String {
        format!("{}.b", self.name)
    }

    /// Stored scalars: `v`, `g` and bias.
    pub fn param_count(&self) -> usize {
        self.c_out * self.c_in * self.kernel * self.kernel + 2 * self.c_out
    }

    /// Multiplications per output position.
    pub fn mults_per_position(&self) -> usize {
        self.kernel * self.kernel * self.c_in * self.c_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamRole {
    Direction(ConvSpec),
    Gain,
    Bias,
    /// Adaptive scalar weight with its initial value.
    Weight(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Shape,
    pub role: ParamRole,
}

/// Parameter naming scheme.
pub mod names {
    pub const EXTRACT: &str = "ext";
    pub const HEAD: &str = "head";
    pub const UPSAMPLE: &str = "up";

    pub fn unit(m: usize, k: usize) -> String {
        format!("lfb{m}.awru{k}")
    }
    pub fn expand(m: usize, k: usize) -> String {
        format!("{}.expand", unit(m, k))
    }
    pub fn shrink(m: usize, k: usize) -> String {
        format!("{}.shrink", unit(m, k))
    }
    pub fn unit_res(m: usize, k: usize) -> String {
        format!("{}.lambda_res", unit(m, k))
    }
    pub fn unit_skip(m: usize, k: usize) -> String {
        format!("{}.lambda_x", unit(m, k))
    }
    pub fn fuse(m: usize) -> String {
        format!("lfb{m}.fuse")
    }
    pub fn block_res(m: usize) -> String {
        format!("lfb{m}.lambda_res")
    }
    pub fn block_skip(m: usize) -> String {
        format!("lfb{m}.lambda_x")
    }
    pub fn branch(kernel: usize) -> String {
        format!("awms.k{kernel}")
    }
    pub fn alpha(kernel: usize) -> String {
        format!("awms.k{kernel}.alpha")
    }
}
