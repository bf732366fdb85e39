//! Parameter and Multi-Adds accounting.
//!
//! Multi-Adds count one multiplication per kernel tap per output position.
//! Every convolution runs on the LR grid, so positions are `out_w * out_h / s^2`;
//! biases, gains, scalar weights and pixel shuffles count zero.

use std::fmt;

use crate::model::AwsrnModel;
use crate::tensor::Element;

/// Default output size for Multi-Adds.
pub const DEFAULT_OUT_SIZE: (usize, usize) = (1280, 720);

#[derive(Debug, Clone, PartialEq)]
pub struct LayerComplexity {
    pub name: String,
    pub params: u64,
    pub mults: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub total_params: u64,
    pub multi_adds: f64,
    pub out_w: usize,
    pub out_h: usize,
    pub layers: Vec<LayerComplexity>,
}

/// Layer name for a parameter: conv tensors `x.v`, `x.g`, `x.b` group under `x`.
fn layer_of(name: &str) -> &str {
    for suffix in [".v", ".g", ".b"] {
        if let Some(stem) = name.strip_suffix(suffix) {
            return stem;
        }
    }
    name
}

pub fn analyze<T: Element>(model: &AwsrnModel<T>, out_w: usize, out_h: usize) -> ComplexityReport {
    let cfg = model.config();
    let positions = (out_w * out_h) as f64 / (cfg.scale * cfg.scale) as f64;
    let convs = cfg.convs();
    let mut layers: Vec<LayerComplexity> = Vec::new();
    for p in model.params().iter() {
        let layer = layer_of(&p.name);
        match layers.last_mut() {
            Some(last) if last.name == layer => last.params += p.value.len() as u64,
            _ => {
                let mults = convs
                    .iter()
                    .find(|c| c.name == layer)
                    .map_or(0.0, |c| c.mults_per_position() as f64 * positions);
                layers.push(LayerComplexity { name: layer.to_string(), params: p.value.len() as u64, mults });
            }
        }
    }
    ComplexityReport {
        total_params: layers.iter().map(|l| l.params).sum(),
        multi_adds: layers.iter().map(|l| l.mults).sum(),
        out_w,
        out_h,
        layers,
    }
}

/// Every stored scalar: conv directions, gains, biases and adaptive weights.
pub fn count_params<T: Element>(model: &AwsrnModel<T>) -> u64 {
    model.params().scalar_count() as u64
}

pub fn count_multi_adds<T: Element>(model: &AwsrnModel<T>, out_w: usize, out_h: usize) -> f64 {
    analyze(model, out_w, out_h).multi_adds
}

/// `397482 -> "397K"`, rounded to the nearest thousand.
pub fn format_kilo(params: u64) -> String {
    let k = (params + 500) / 1000;
    let s = k.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    format!("{out}K")
}

/// `91224576000 -> "91.2G"`.
pub fn format_giga(mults: f64) -> String {
    format!("{:.1}G", mults / 1e9)
}

impl ComplexityReport {
    pub fn summary_line(&self) -> String {
        format!(
            "params={} ({}) multi_adds={:.0} ({}) out={}x{}",
            self.total_params,
            format_kilo(self.total_params),
            self.multi_adds,
            format_giga(self.multi_adds),
            self.out_w,
            self.out_h
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,params,multi_adds\n");
        for l in &self.layers {
            out.push_str(&format!("{},{},{:.0}\n", l.name, l.params, l.mults));
        }
        out.push_str(&format!("total,{},{:.0}\n", self.total_params, self.multi_adds));
        out
    }
}

impl fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24} {:>10} {:>18}", "layer", "params", "multi-adds")?;
        for l in &self.layers {
            writeln!(f, "{:<24} {:>10} {:>18.0}", l.name, l.params, l.mults)?;
        }
        writeln!(f, "{:<24} {:>10} {:>18.0}", "total", self.total_params, self.multi_adds)?;
        write!(f, "{}", self.summary_line())
    }
}
