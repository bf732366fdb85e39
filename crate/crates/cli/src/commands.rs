use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use awsrn::data::{bicubic_resize, load_pairs, load_png, save_png, Factor, TrainingPair};
use awsrn::metrics::{
    analyze as analyze_model, count_params, evaluate_dir, inspect_weights, prune_branches, psnr_y, super_resolve_image,
};
use awsrn::model::{load_checkpoint, load_checkpoint_as, save_checkpoint, AwsrnModel};
use awsrn::train::{train_with_progress, write_loss_trace};

use crate::config::{ConfigFile, Overrides, RunConfig};
use crate::{AnalyzeArgs, BuildArgs, CliError, EvalArgs, InspectArgs, ModelArgs, PruneArgs, SrArgs, TrainArgs};

type Model = AwsrnModel<f32>;

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn resolve(model: &ModelArgs, flags: Overrides) -> Result<RunConfig, CliError> {
    let file = match &model.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let flags = Overrides { preset: model.preset.clone(), scale: model.scale, ..flags };
    RunConfig::resolve(&file, &flags)
}

fn load(path: &Path) -> Result<Model, CliError> {
    Ok(load_checkpoint::<f32>(path)?)
}

fn check_scale(model: &Model, expected: Option<usize>) -> Result<(), CliError> {
    match expected {
        Some(s) if s != model.config().scale => {
            Err(CliError::Scale(format!("checkpoint is x{} but x{s} was requested", model.config().scale)))
        }
        _ => Ok(()),
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("bad --out-size `{s}`, expected WxH"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h): (usize, usize) = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

pub fn analyze(args: &AnalyzeArgs) -> Result<String, CliError> {
    if args.model.preset.is_none() && args.model.config.is_none() {
        return Err(CliError::Usage("analyze needs --model PRESET or --config FILE".into()));
    }
    let run = resolve(&args.model, Overrides::default())?;
    let (w, h) = parse_size(&args.out_size)?;
    let model = Model::build(run.model, 0)?;
    let report = analyze_model(&model, w, h);
    if let Some(p) = &args.csv {
        write_file(p, &report.to_csv())?;
    }
    Ok(format!("{report}\n"))
}

pub fn build(args: &BuildArgs) -> Result<String, CliError> {
    let run = resolve(&args.model, Overrides { seed: args.seed, ..Overrides::default() })?;
    let model = Model::build(run.model, run.seed)?;
    save_checkpoint(&model, &args.out)?;
    Ok(format!("wrote {} ({} params, seed {})\n", args.out.display(), count_params(&model), run.seed))
}

/// Mean Y-PSNR of the model and of bicubic upsampling over `pairs`.
fn training_psnr(model: &Model, pairs: &[TrainingPair], shave: usize) -> Result<(f64, f64), CliError> {
    let (mut sr_sum, mut bic_sum) = (0.0, 0.0);
    for pair in pairs {
        let sr = super_resolve_image(model, &pair.lr)?;
        let bic = bicubic_resize(&pair.lr, Factor::up(pair.scale()))?;
        sr_sum += psnr_y(&sr, &pair.hr, shave)?.db();
        bic_sum += psnr_y(&bic, &pair.hr, shave)?.db();
    }
    let n = pairs.len() as f64;
    Ok((sr_sum / n, bic_sum / n))
}

pub fn train(args: &TrainArgs) -> Result<String, CliError> {
    let flags = Overrides {
        seed: args.seed,
        iters: args.iters,
        lr0: args.lr,
        halve_every: args.halve_every,
        batch: args.batch,
        patch: args.patch,
        workers: args.workers,
        checkpoint_every: args.checkpoint_every,
        ..Overrides::default()
    };
    let mut run = resolve(&args.model, flags)?;
    let mut model = match &args.resume {
        // the checkpoint fixes the architecture; an explicit preset must match it exactly
        Some(p) => {
            let m = load(p)?;
            check_scale(&m, args.model.scale)?;
            if args.model.preset.is_some() {
                load_checkpoint_as::<f32>(p, &run.model)?
            } else {
                m
            }
        }
        None => Model::build(run.model.clone(), run.seed)?,
    };
    let scale = model.config().scale;
    let pairs = Arc::new(load_pairs(&args.data, scale)?);
    run.train.checkpoint_path = Some(args.out.clone());

    let log_every = args.log_every;
    let total = run.train.max_iters;
    let report = train_with_progress(&mut model, Arc::clone(&pairs), &run.train, |t, loss, _| {
        if log_every > 0 && ((t + 1) % log_every == 0 || t + 1 == total) {
            eprintln!("iter {:>8} loss {loss:.6} lr {:.3e}", t + 1, run.train.learning_rate(t));
        }
    })?;
    save_checkpoint(&model, &args.out)?;
    let trace = args.trace.clone().unwrap_or_else(|| {
        let mut s = args.out.clone().into_os_string();
        s.push(".trace");
        PathBuf::from(s)
    });
    write_loss_trace(&trace, &report.losses)?;

    let (sr, bic) = training_psnr(&model, &pairs, scale)?;
    let mut out = String::new();
    let _ = writeln!(out, "iterations {} seed {} images {}", report.losses.len(), run.seed, pairs.len());
    if let (Some(first), Some(last)) = (report.losses.first(), report.losses.last()) {
        let _ = writeln!(out, "loss {first:.6} -> {last:.6}");
    }
    let _ = writeln!(out, "train psnr {sr:.4} dB bicubic {bic:.4} dB gain {:+.4} dB (shave {scale})", sr - bic);
    let _ = writeln!(out, "checkpoint {}", args.out.display());
    let _ = writeln!(out, "trace {}", trace.display());
    Ok(out)
}

pub fn sr(args: &SrArgs) -> Result<String, CliError> {
    let model = load(&args.ckpt)?;
    check_scale(&model, args.scale)?;
    let lr = load_png(&args.input)?;
    let out = super_resolve_image(&model, &lr)?;
    save_png(&out, &args.out)?;
    Ok(format!(
        "{}x{} -> {}x{} {}\n",
        lr.width(),
        lr.height(),
        out.width(),
        out.height(),
        args.out.display()
    ))
}

pub fn eval(args: &EvalArgs) -> Result<String, CliError> {
    let model = load(&args.ckpt)?;
    check_scale(&model, args.scale)?;
    let shave = args.shave.unwrap_or(model.config().scale);
    let report = evaluate_dir(&model, &args.hr_dir, shave)?;
    if let Some(p) = &args.csv {
        write_file(p, &report.to_csv())?;
    }
    Ok(report.to_string())
}

pub fn prune(args: &PruneArgs) -> Result<String, CliError> {
    let model = load(&args.ckpt)?;
    let (pruned, removed) = prune_branches(&model, args.threshold)?;
    save_checkpoint(&pruned, &args.out)?;
    let list: Vec<String> = removed.iter().map(|k| format!("{k}x{k}")).collect();
    Ok(format!(
        "removed [{}]\nkernels {:?}\nparams {} -> {}\nwrote {}\n",
        list.join(", "),
        pruned.config().awms_kernels,
        count_params(&model),
        count_params(&pruned),
        args.out.display()
    ))
}

pub fn inspect(args: &InspectArgs) -> Result<String, CliError> {
    let model = load(&args.ckpt)?;
    let report = inspect_weights(&model).map_err(awsrn::model::ModelError::from)?;
    if let Some(p) = &args.csv {
        write_file(p, &report.to_csv())?;
    }
    Ok(report.to_string())
}

