use std::path::{Path, PathBuf};

use clap::Args;
use hipgest::hierarchy::{
    generate_paired, pseudo_params, train_generator_with_progress, ConditioningSet, HierConfig, HierError,
    PairedDataset, BODY_DIM, HAND_DIM,
};
use hipgest::motion_io::ChannelGroup;
use hipgest::pae::{
    export_phase_manifold, generate_synthetic, train_with_progress, write_manifold_csv, PaeConfig, PaeError, PaeModel,
};
use hipgest::Matrix;

use crate::config::{defaults, RunConfig};
use crate::data;
use crate::error::{CliError, Result};
use crate::manifest::Run;
use crate::Common;

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true))]
pub struct TrainPaeArgs {
    /// A BVH file or a directory of BVH files.
    #[arg(long, group = "input")]
    pub data: Option<PathBuf>,
    /// Train on the synthetic sinusoid-plus-burst dataset.
    #[arg(long, group = "input")]
    pub synthetic: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true))]
pub struct TrainHierArgs {
    /// Trained periodic autoencoder checkpoint; supplies the phase targets.
    #[arg(long)]
    pub pae: PathBuf,
    /// Directory of clips: `<name>.bvh`, `<name>.wav` and `<name>.face.csv`,
    /// with optional `<name>.text.csv`, `.emotion.csv` and `.identity.csv`.
    #[arg(long, group = "input")]
    pub data: Option<PathBuf>,
    /// Train on synthetic paired data.
    #[arg(long, group = "input")]
    pub synthetic: bool,
    #[command(flatten)]
    pub common: Common,
}

pub fn pae_error(e: PaeError) -> CliError {
    match e {
        PaeError::Config(_) => CliError::Usage(e.to_string()),
        other => CliError::runtime(other),
    }
}

pub fn hier_error(e: HierError) -> CliError {
    match e {
        HierError::Config(_) => CliError::Usage(e.to_string()),
        other => CliError::runtime(other),
    }
}

fn check_path(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{}: no such file or directory", path.display())))
    }
}

fn finite_or_fail(last: Option<f64>) -> Result<()> {
    match last {
        Some(v) if v.is_finite() => Ok(()),
        Some(v) => Err(CliError::runtime(format!("final loss {v} is not finite"))),
        None => Err(CliError::runtime("training ran no epochs")),
    }
}

pub fn pae_run_config(common: &Common) -> Result<RunConfig> {
    let mut base = PaeConfig::default().to_pairs();
    base.extend(defaults(&[
        ("synthetic_windows", "64"),
        ("stride", "17"),
        ("groups", data::BUILTIN),
    ]));
    RunConfig::load(base, common.config.as_deref(), &common.sets, common.seed)
}

pub fn run_pae(args: &TrainPaeArgs) -> Result<()> {
    let cfg = pae_run_config(&args.common)?;
    let pae_cfg = PaeConfig::from_pairs(&cfg.subset(&PaeConfig::KEYS)).map_err(pae_error)?;
    if let Some(p) = &args.data {
        check_path(p)?;
    }
    let mut run = Run::start("train-pae", &args.common.out, args.synthetic)?;
    let windows = match &args.data {
        Some(path) => {
            let groups = data::groups(&mut run, &cfg)?;
            data::motion_windows(&mut run, path, &groups, pae_cfg.fps, pae_cfg.window, cfg.get("stride")?)?
        }
        None => {
            generate_synthetic(cfg.get("synthetic_windows")?, pae_cfg.window, pae_cfg.input_channels, pae_cfg.seed)
                .windows
        }
    };
    if windows[0].cols() != pae_cfg.input_channels {
        return Err(CliError::usage(format!(
            "data has {} channels but input_channels = {}",
            windows[0].cols(),
            pae_cfg.input_channels
        )));
    }
    log::info!("training on {} windows", windows.len());
    let (model, log) = train_with_progress(&windows, &pae_cfg, |s| {
        log::info!("epoch {:>4}  loss {:.6}  l1 {:.6}", s.epoch, s.loss, s.l1);
    })
    .map_err(pae_error)?;
    finite_or_fail(log.epochs.last().map(|e| e.loss))?;

    run.output("pae.ckpt", &model.save())?;
    let mut buf = Vec::new();
    log.write_csv(&mut buf).map_err(CliError::runtime)?;
    run.output("loss.csv", &buf)?;
    let manifold = export_phase_manifold(&model, &windows).map_err(pae_error)?;
    let mut buf = Vec::new();
    write_manifold_csv(&mut buf, &manifold).map_err(CliError::runtime)?;
    run.output("manifold.csv", &buf)?;
    run.finish(&cfg)
}

pub fn hier_run_config(common: &Common) -> Result<RunConfig> {
    let mut base = HierConfig::default().to_pairs();
    base.extend(defaults(&[
        ("synthetic_windows", "16"),
        ("stride", "17"),
        ("groups", data::BUILTIN),
    ]));
    RunConfig::load(base, common.config.as_deref(), &common.sets, common.seed)
}

pub fn load_pae(run: &mut Run, path: &Path, hier: &HierConfig) -> Result<PaeModel> {
    check_path(path)?;
    let pae = PaeModel::load(&run.input(path)?).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let pc = pae.config();
    if pc.input_channels != BODY_DIM + HAND_DIM || pc.window != hier.window {
        return Err(CliError::usage(format!(
            "autoencoder expects {}-frame windows of {} channels; the generator uses {}-frame windows of {}",
            pc.window,
            pc.input_channels,
            hier.window,
            BODY_DIM + HAND_DIM
        )));
    }
    Ok(pae)
}

fn cut(m: &Matrix, start: usize, len: usize) -> Matrix {
    m.row_block(start, len)
}

/// Paired windows from a directory of recorded clips.
fn load_paired_dir(run: &mut Run, dir: &Path, cfg: &RunConfig, hier: &HierConfig) -> Result<PairedDataset> {
    let groups = data::groups(run, cfg)?;
    let stride: usize = cfg.get("stride")?;
    let mut out = PairedDataset {
        conditioning: Vec::new(),
        face: Vec::new(),
        body: Vec::new(),
        hand: Vec::new(),
        motion: None,
    };
    for bvh in data::bvh_files(dir)? {
        let stem = bvh.with_extension("");
        let wav = bvh.with_extension("wav");
        let (sk, clip) = data::load_bvh(run, &bvh)?;
        let clip = data::at_rate(clip, hier.fps)?;
        let both = groups.select(&sk, &clip, ChannelGroup::Both).map_err(CliError::runtime)?;
        let audio = data::load_wav(run, &wav)?;
        let frames = both.frame_count().min(data::audio_frames(&audio, hier.fps));
        let cond = data::conditioning_from_files(run, &audio, &stem, frames, hier)?;
        let face = cond
            .face
            .clone()
            .ok_or_else(|| CliError::runtime(format!("{}: missing {}.face.csv", bvh.display(), stem.display())))?;
        if frames < hier.window {
            log::warn!("{}: {frames} frames, shorter than one window", bvh.display());
            continue;
        }
        let motion = both.frames();
        let mut start = 0;
        while start + hier.window <= frames {
            let w = hier.window;
            let bh = cut(motion, start, w);
            out.body.push(bh.select_columns(&(0..BODY_DIM).collect::<Vec<_>>()));
            out.hand.push(bh.select_columns(&(BODY_DIM..BODY_DIM + HAND_DIM).collect::<Vec<_>>()));
            out.face.push(cut(&face, start, w));
            out.conditioning.push(ConditioningSet {
                audio: cut(&cond.audio, start, w),
                face: Some(cut(&face, start, w)),
                text: cond.text.as_ref().map(|m| cut(m, start, w)),
                emotion: cut(&cond.emotion, start, w),
                identity: cut(&cond.identity, start, w),
            });
            start += stride;
        }
    }
    if out.is_empty() {
        return Err(CliError::runtime(format!("{}: no complete windows", dir.display())));
    }
    Ok(out)
}

pub fn run_hier(args: &TrainHierArgs) -> Result<()> {
    let cfg = hier_run_config(&args.common)?;
    let hier = HierConfig::from_pairs(&cfg.subset(HierConfig::KEYS)).map_err(hier_error)?;
    if let Some(p) = &args.data {
        check_path(p)?;
    }
    let mut run = Run::start("train-hier", &args.common.out, args.synthetic)?;
    let pae = load_pae(&mut run, &args.pae, &hier)?;
    let data = match &args.data {
        Some(dir) => load_paired_dir(&mut run, dir, &cfg, &hier)?,
        None => generate_paired(cfg.get("synthetic_windows")?, &hier, hier.seed).map_err(hier_error)?,
    };
    let pseudo = (0..data.len())
        .map(|i| pseudo_params(&pae, &data.body_hand(i)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(hier_error)?;
    log::info!("training on {} windows", data.len());
    let (model, log) = train_generator_with_progress(&data, &pseudo, &hier, |s| {
        log::info!("epoch {:>4}  loss {:.6}  total {:.6}", s.epoch, s.loss, s.total);
    })
    .map_err(hier_error)?;
    finite_or_fail(log.epochs.last().map(|e| e.loss))?;

    run.output("generator.ckpt", &model.save())?;
    let mut buf = Vec::new();
    log.write_csv(&mut buf).map_err(CliError::runtime)?;
    run.output("loss.csv", &buf)?;
    run.finish(&cfg)
}
