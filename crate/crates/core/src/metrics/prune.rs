use thiserror::Error;

use crate::model::{names, AwsrnModel, ConvSpec, ModelError};
use crate::tensor::Element;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PruneError {
    #[error("model has no weighted multi-scale head to prune")]
    NotAwms,
    #[error("threshold {0} is not a finite non-negative number")]
    InvalidThreshold(f64),
    #[error("threshold {0} would remove every reconstruction branch")]
    WouldRemoveAll(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Removes every reconstruction branch with `|alpha| < threshold`.
///
/// Returns the pruned model and the kernel sizes removed, in head order.
pub fn prune_branches<T: Element>(
    model: &AwsrnModel<T>,
    threshold: f64,
) -> Result<(AwsrnModel<T>, Vec<usize>), PruneError> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(PruneError::InvalidThreshold(threshold));
    }
    let cfg = model.config();
    if !cfg.use_awms {
        return Err(PruneError::NotAwms);
    }
    let mut removed = Vec::new();
    for &k in &cfg.awms_kernels {
        let alpha = model.scalar(&names::alpha(k)).map_err(ModelError::from)?.to_f64();
        if alpha.abs() < threshold {
            removed.push(k);
        }
    }
    if removed.len() == cfg.awms_kernels.len() {
        return Err(PruneError::WouldRemoveAll(threshold));
    }
    let (mut config, mut params) = model.clone().into_parts();
    for &k in &removed {
        let conv = ConvSpec::new(names::branch(k), 0, 0, k);
        for name in [conv.direction(), conv.gain(), conv.bias(), names::alpha(k)] {
            params.remove(&name);
        }
    }
    config.awms_kernels.retain(|k| !removed.contains(k));
    Ok((AwsrnModel::from_parts(config, params)?, removed))
}
