//! `key = value` run configuration files.

use std::path::Path;
use std::str::FromStr;

use awsrn::model::{ModelConfig, Preset, RuKind};
use awsrn::train::TrainConfig;

use crate::CliError;

/// Keys accepted in a config file, in the order they are documented.
pub const KEYS: [&str; 23] = [
    "preset",
    "scale",
    "n_lfb",
    "n_awru",
    "c_feat",
    "c_wide",
    "awms_kernels",
    "ru_kind",
    "use_lrfu",
    "use_awms",
    "init_unit_weight",
    "init_branch_weight",
    "lr0",
    "halve_every",
    "batch",
    "patch",
    "iters",
    "seed",
    "workers",
    "checkpoint_every",
    "beta1",
    "beta2",
    "eps",
];

/// Parsed config file: `(line, key, value)` in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(usize, String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {line_no}: expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(CliError::Config(format!("line {line_no}: unknown key `{key}`")));
            }
            if let Some((first, ..)) = entries.iter().find(|e| e.1 == key) {
                return Err(CliError::Config(format!("line {line_no}: `{key}` already set on line {first}")));
            }
            entries.push((line_no, key.to_string(), value.to_string()));
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.1 == key).map(|e| e.2.as_str())
    }

    fn parsed<V: FromStr>(&self, key: &str) -> Result<Option<V>, CliError> {
        self.get(key).map(|v| parse_value(key, v)).transpose()
    }
}

pub fn parse_value<V: FromStr>(key: &str, v: &str) -> Result<V, CliError> {
    v.parse().map_err(|_| CliError::Config(format!("bad value `{v}` for `{key}`")))
}

pub fn parse_preset(name: &str) -> Result<Preset, CliError> {
    name.parse()
        .map_err(|_| CliError::Config(format!("unknown preset `{name}` (valid presets: {})", Preset::names())))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Config(format!("bad value `{v}` for `{key}` (expected true or false)"))),
    }
}

/// Command-line overrides; `None` leaves the file or default value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub scale: Option<usize>,
    pub seed: Option<u64>,
    pub iters: Option<u64>,
    pub lr0: Option<f64>,
    pub halve_every: Option<u64>,
    pub batch: Option<usize>,
    pub patch: Option<usize>,
    pub workers: Option<usize>,
    pub checkpoint_every: Option<u64>,
}

/// Model, training settings and seed after merging defaults, file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl RunConfig {
    /// Preset defaults, then file values, then flags.
    pub fn resolve(file: &ConfigFile, flags: &Overrides) -> Result<Self, CliError> {
        let preset_name = flags.preset.clone().or_else(|| file.get("preset").map(str::to_string));
        let preset = preset_name.as_deref().map(parse_preset).transpose()?.unwrap_or(Preset::AwsrnS);
        let scale = match flags.scale {
            Some(s) => s,
            None => file.parsed("scale")?.unwrap_or(2),
        };
        let mut model = ModelConfig::preset(preset, scale);
        macro_rules! take {
            ($target:expr, $key:literal) => {
                if let Some(v) = file.parsed($key)? {
                    $target = v;
                }
            };
        }
        take!(model.n_lfb, "n_lfb");
        take!(model.n_awru, "n_awru");
        take!(model.c_feat, "c_feat");
        take!(model.c_wide, "c_wide");
        take!(model.init_unit_weight, "init_unit_weight");
        take!(model.init_branch_weight, "init_branch_weight");
        if let Some(v) = file.get("awms_kernels") {
            model.awms_kernels = v
                .split(',')
                .map(|k| parse_value("awms_kernels", k.trim()))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = file.get("ru_kind") {
            model.ru_kind = v.parse::<RuKind>().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(v) = file.get("use_lrfu") {
            model.use_lrfu = parse_bool("use_lrfu", v)?;
        }
        if let Some(v) = file.get("use_awms") {
            model.use_awms = parse_bool("use_awms", v)?;
        }
        model.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let mut train = TrainConfig::default();
        take!(train.lr0, "lr0");
        take!(train.halve_every, "halve_every");
        take!(train.batch, "batch");
        take!(train.patch, "patch");
        take!(train.max_iters, "iters");
        take!(train.workers, "workers");
        take!(train.checkpoint_every, "checkpoint_every");
        take!(train.adam.beta1, "beta1");
        take!(train.adam.beta2, "beta2");
        take!(train.adam.eps, "eps");
        let mut seed = 0;
        take!(seed, "seed");

        let or = |flag: Option<u64>, v: &mut u64| *v = flag.unwrap_or(*v);
        or(flags.seed, &mut seed);
        or(flags.iters, &mut train.max_iters);
        or(flags.halve_every, &mut train.halve_every);
        or(flags.checkpoint_every, &mut train.checkpoint_every);
        train.lr0 = flags.lr0.unwrap_or(train.lr0);
        train.batch = flags.batch.unwrap_or(train.batch);
        train.patch = flags.patch.unwrap_or(train.patch);
        train.workers = flags.workers.unwrap_or(train.workers);
        train.seed = seed;
        Ok(RunConfig { model, train, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_spacing() {
        let f = ConfigFile::parse("# tiny\n\nc_feat=8   # narrow\n  ru_kind = basic\n").unwrap();
        assert_eq!(f.get("c_feat"), Some("8"));
        assert_eq!(f.get("ru_kind"), Some("basic"));
        assert_eq!(f.entries[0].0, 3);
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let err = ConfigFile::parse("c_feat = 8\nwidth = 3\n").unwrap_err();
        assert_eq!(err.to_string(), "line 2: unknown key `width`");
        assert!(ConfigFile::parse("seed = 1\nseed = 2\n").is_err());
        assert!(ConfigFile::parse("seed 1\n").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let f = ConfigFile::parse("preset = awsrn-m\nscale = 3\nseed = 7\niters = 10\nc_feat = 8\n").unwrap();
        let r = RunConfig::resolve(&f, &Overrides::default()).unwrap();
        assert_eq!((r.model.n_lfb, r.model.scale, r.model.c_feat, r.seed, r.train.max_iters), (3, 3, 8, 7, 10));
        let flags = Overrides { preset: Some("awsrn-s".into()), scale: Some(4), seed: Some(1), iters: Some(0), ..Overrides::default() };
        let r = RunConfig::resolve(&f, &flags).unwrap();
        assert_eq!((r.model.n_lfb, r.model.scale, r.model.c_feat, r.seed, r.train.max_iters), (1, 4, 8, 1, 0));
        assert_eq!(r.train.seed, 1);
    }

    #[test]
    fn bad_values() {
        let f = ConfigFile::parse("use_awms = maybe\n").unwrap();
        assert!(RunConfig::resolve(&f, &Overrides::default()).is_err());
        let f = ConfigFile::parse("scale = 5\n").unwrap();
        assert!(RunConfig::resolve(&f, &Overrides::default()).is_err());
        let err = RunConfig::resolve(&ConfigFile::default(), &Overrides { preset: Some("edsr".into()), ..Overrides::default() })
            .unwrap_err();
        assert!(err.to_string().contains("awsrn-s, awsrn-sd, awsrn-m, awsrn"));
    }

    #[test]
    fn kernel_list() {
        let f = ConfigFile::parse("awms_kernels = 3, 5\nuse_lrfu = false\n").unwrap();
        let r = RunConfig::resolve(&f, &Overrides::default()).unwrap();
        assert_eq!(r.model.awms_kernels, vec![3, 5]);
        assert!(!r.model.use_lrfu);
    }
}
