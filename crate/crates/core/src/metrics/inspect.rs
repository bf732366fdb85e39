//! Adaptive weight inspection.

use std::fmt;

use crate::model::{names, AwsrnModel, RuKind};
use crate::tensor::{Element, TensorError};

#[derive(Debug, Clone, PartialEq)]
pub struct UnitWeights {
    /// Global position of the unit counted from the input.
    pub depth: usize,
    pub block: usize,
    pub unit: usize,
    pub lambda_res: f64,
    pub lambda_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    pub block: usize,
    pub lambda_res: f64,
    pub lambda_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchWeight {
    pub kernel: usize,
    pub alpha: f64,
}

/// Current adaptive weights in depth order. Basic units report their fixed
/// unit weights; blocks without fusion and heads without branches have no rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightReport {
    pub units: Vec<UnitWeights>,
    pub blocks: Vec<BlockWeights>,
    pub branches: Vec<BranchWeight>,
}

pub fn inspect_weights<T: Element>(model: &AwsrnModel<T>) -> Result<WeightReport, TensorError> {
    let cfg = model.config();
    let get = |name: String| model.scalar(&name).map(|v| v.to_f64());
    let mut units = Vec::new();
    let mut blocks = Vec::new();
    for m in 0..cfg.n_lfb {
        for k in 0..cfg.n_awru {
            let (lambda_res, lambda_x) = match cfg.ru_kind {
                RuKind::Adaptive => (get(names::unit_res(m, k))?, get(names::unit_skip(m, k))?),
                RuKind::Basic => (1.0, 1.0),
            };
            units.push(UnitWeights { depth: m * cfg.n_awru + k, block: m, unit: k, lambda_res, lambda_x });
        }
        if cfg.use_lrfu {
            blocks.push(BlockWeights {
                block: m,
                lambda_res: get(names::block_res(m))?,
                lambda_x: get(names::block_skip(m))?,
            });
        }
    }
    let branches = if cfg.use_awms {
        cfg.awms_kernels
            .iter()
            .map(|&k| Ok(BranchWeight { kernel: k, alpha: get(names::alpha(k))? }))
            .collect::<Result<_, TensorError>>()?
    } else {
        Vec::new()
    };
    Ok(WeightReport { units, blocks, branches })
}

impl WeightReport {
    /// One row per weight group: `kind,depth,block,unit,kernel,lambda_res,lambda_x,alpha`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,depth,block,unit,kernel,lambda_res,lambda_x,alpha\n");
        for u in &self.units {
            out.push_str(&format!("awru,{},{},{},,{},{},\n", u.depth, u.block, u.unit, u.lambda_res, u.lambda_x));
        }
        for b in &self.blocks {
            out.push_str(&format!("lfb,,{},,,{},{},\n", b.block, b.lambda_res, b.lambda_x));
        }
        for br in &self.branches {
            out.push_str(&format!("awms,,,,{},,,{}\n", br.kernel, br.alpha));
        }
        out
    }
}

impl fmt::Display for WeightReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "residual units")?;
        writeln!(f, "{:>5} {:>5} {:>4} {:>12} {:>12}", "depth", "block", "unit", "lambda_res", "lambda_x")?;
        for u in &self.units {
            writeln!(f, "{:>5} {:>5} {:>4} {:>12.6} {:>12.6}", u.depth, u.block, u.unit, u.lambda_res, u.lambda_x)?;
        }
        if !self.blocks.is_empty() {
            writeln!(f, "fusion blocks")?;
            writeln!(f, "{:>5} {:>12} {:>12}", "block", "lambda_res", "lambda_x")?;
            for b in &self.blocks {
                writeln!(f, "{:>5} {:>12.6} {:>12.6}", b.block, b.lambda_res, b.lambda_x)?;
            }
        }
        if !self.branches.is_empty() {
            writeln!(f, "reconstruction branches")?;
            writeln!(f, "{:>6} {:>12}", "kernel", "alpha")?;
            for b in &self.branches {
                writeln!(f, "{:>6} {:>12.6}", b.kernel, b.alpha)?;
            }
        }
        Ok(())
    }
}
