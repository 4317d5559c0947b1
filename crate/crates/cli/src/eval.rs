use std::path::{Path, PathBuf};

use clap::Args;
use hipgest::audio_io::{read_beats_csv, read_feature_csv, BeatList};
use hipgest::metrics::{
    beat_align, diversity, fgd, gesture_beats, lad_fad, pae_features, srgr, FeatureSet, FeatureSource,
    MetricParameters, MetricReport, PAE_FEATURE_EXTRACTOR,
};
use hipgest::motion_io::{forward_kinematics, window, ChannelGroup, JointPositions};
use hipgest::pae::PaeModel;
use hipgest::Matrix;

use crate::beats::{audio_beats, audio_defaults};
use crate::config::{defaults, RunConfig};
use crate::data;
use crate::error::{CliError, Result};
use crate::manifest::Run;
use crate::Common;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Generated motion: a BVH file or a directory of them.
    #[arg(long)]
    pub gen: PathBuf,
    /// Ground-truth motion, paired with `--gen` clips in name order.
    #[arg(long)]
    pub gt: PathBuf,
    /// Generated blendshape CSV (one row per frame, 52 columns).
    #[arg(long, requires = "gt_face")]
    pub gen_face: Option<PathBuf>,
    #[arg(long, requires = "gen_face")]
    pub gt_face: Option<PathBuf>,
    /// Precomputed generated feature vectors (CSV, one row per sample).
    #[arg(long, requires = "gt_features", conflicts_with = "pae")]
    pub gen_features: Option<PathBuf>,
    #[arg(long, requires = "gen_features")]
    pub gt_features: Option<PathBuf>,
    /// Autoencoder checkpoint used as the feature extractor.
    #[arg(long)]
    pub pae: Option<PathBuf>,
    /// Speech audio providing the reference beats (single clip only).
    #[arg(long, conflicts_with = "audio_beats")]
    pub audio: Option<PathBuf>,
    /// Reference beats as CSV with a `time_s` column (single clip only).
    #[arg(long)]
    pub audio_beats: Option<PathBuf>,
    /// Per-clip weights, one number per line, in clip order.
    #[arg(long)]
    pub clip_weights: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

fn config(common: &Common) -> Result<RunConfig> {
    let mut base = defaults(&[
        ("sigma", "3.0"),
        ("tau", "0.1"),
        ("diversity_pairs", "1000"),
        ("seed", "0"),
        ("lip_indices", "17-40"),
        ("stride", "17"),
        ("groups", data::BUILTIN),
    ]);
    base.extend(defaults(&audio_defaults()));
    RunConfig::load(base, common.config.as_deref(), &common.sets, common.seed)
}

fn must_exist(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{}: no such file or directory", path.display())))
    }
}

struct Clip {
    skeleton: hipgest::motion_io::Skeleton,
    clip: hipgest::motion_io::MotionClip,
    positions: JointPositions,
}

fn load_clips(run: &mut Run, path: &Path) -> Result<Vec<Clip>> {
    data::bvh_files(path)?
        .iter()
        .map(|f| {
            let (skeleton, clip) = data::load_bvh(run, f)?;
            let positions = forward_kinematics(&skeleton, &clip).map_err(CliError::runtime)?;
            Ok(Clip {
                skeleton,
                clip,
                positions,
            })
        })
        .collect()
}

fn read_matrix(run: &mut Run, path: &Path) -> Result<Matrix> {
    let bytes = run.input(path)?;
    read_feature_csv(bytes.as_slice()).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn read_weights(run: &mut Run, path: &Path) -> Result<Vec<f64>> {
    let text = run.input_text(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse()
                .map_err(|_| CliError::runtime(format!("{}: bad weight `{l}`", path.display())))
        })
        .collect()
}

fn windowed_features(
    run: &mut Run,
    cfg: &RunConfig,
    pae: &PaeModel,
    clips: &[Clip],
    source: FeatureSource,
) -> Result<FeatureSet> {
    let groups = data::groups(run, cfg)?;
    let stride: usize = cfg.get("stride")?;
    let length = pae.config().window;
    let mut windows = Vec::new();
    for c in clips {
        let clip = data::at_rate(c.clip.clone(), pae.config().fps)?;
        let both = groups.select(&c.skeleton, &clip, ChannelGroup::Both).map_err(CliError::runtime)?;
        if both.frame_count() < length {
            continue;
        }
        windows.extend(window(&both, length, stride).map_err(CliError::runtime)?.into_iter().map(|w| w.into_frames()));
    }
    pae_features(pae, &windows, source).map_err(CliError::runtime)
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let cfg = config(&args.common)?;
    for p in [Some(&args.gen), Some(&args.gt), args.pae.as_ref(), args.audio.as_ref(), args.audio_beats.as_ref()]
        .into_iter()
        .flatten()
    {
        must_exist(p)?;
    }
    let sigma: f64 = cfg.get("sigma")?;
    let tau: f64 = cfg.get("tau")?;
    let pairs: usize = cfg.get("diversity_pairs")?;
    let seed: u64 = cfg.get("seed")?;
    let lips = data::parse_indices(cfg.str("lip_indices"))?;
    let mut run = Run::start("eval", &args.common.out, false)?;

    let gen = load_clips(&mut run, &args.gen)?;
    let gt = load_clips(&mut run, &args.gt)?;
    if gen.len() != gt.len() {
        return Err(CliError::runtime(format!("{} generated clips but {} ground-truth clips", gen.len(), gt.len())));
    }
    for (i, (a, b)) in gen.iter().zip(&gt).enumerate() {
        let (pa, pb) = (&a.positions, &b.positions);
        if pa.frame_count() != pb.frame_count() || pa.joint_count() != pb.joint_count() {
            return Err(CliError::runtime(format!(
                "clip {i}: generated {}×{} joints vs ground truth {}×{}",
                pa.frame_count(),
                pa.joint_count(),
                pb.frame_count(),
                pb.joint_count()
            )));
        }
    }

    let weights = args.clip_weights.as_deref().map(|p| read_weights(&mut run, p)).transpose()?;
    let gen_pos: Vec<JointPositions> = gen.iter().map(|c| c.positions.clone()).collect();
    let gt_pos: Vec<JointPositions> = gt.iter().map(|c| c.positions.clone()).collect();
    let srgr_value = srgr(&gt_pos, &gen_pos, sigma, weights.as_deref()).map_err(CliError::runtime)?;

    // Reference beats: the speech when given, else the ground-truth motion.
    let external: Option<BeatList> = match (&args.audio, &args.audio_beats) {
        (Some(wav), _) => {
            let buffer = data::load_wav(&mut run, wav)?;
            Some(audio_beats(&buffer, &cfg)?)
        }
        (None, Some(csv)) => {
            let bytes = run.input(csv)?;
            Some(read_beats_csv(bytes.as_slice()).map_err(|e| CliError::runtime(format!("{}: {e}", csv.display())))?)
        }
        (None, None) => None,
    };
    if external.is_some() && gen.len() != 1 {
        return Err(CliError::usage("reference audio or beats need exactly one clip pair"));
    }
    let beat_reference = if external.is_some() { "audio" } else { "ground-truth-motion" };
    let mut scores = Vec::new();
    for (g, t) in gen.iter().zip(&gt) {
        let reference = match &external {
            Some(b) => b.clone(),
            None => gesture_beats(&t.positions).map_err(CliError::runtime)?,
        };
        if reference.is_empty() {
            log::warn!("clip without reference beats skipped for beat alignment");
            continue;
        }
        let produced = gesture_beats(&g.positions).map_err(CliError::runtime)?;
        scores.push(beat_align(&reference, &produced, tau).map_err(CliError::runtime)?);
    }
    let beat_value = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);

    let (features, extractor) = match (&args.gen_features, &args.gt_features, &args.pae) {
        (Some(a), Some(b), _) => {
            let fa = FeatureSet::new(read_matrix(&mut run, a)?, FeatureSource::Generated).map_err(CliError::runtime)?;
            let fb = FeatureSet::new(read_matrix(&mut run, b)?, FeatureSource::GroundTruth).map_err(CliError::runtime)?;
            (Some((fa, fb)), format!("file:{}", a.display()))
        }
        (_, _, Some(ckpt)) => {
            let pae = PaeModel::load(&run.input(ckpt)?)
                .map_err(|e| CliError::runtime(format!("{}: {e}", ckpt.display())))?;
            let fa = windowed_features(&mut run, &cfg, &pae, &gen, FeatureSource::Generated)?;
            let fb = windowed_features(&mut run, &cfg, &pae, &gt, FeatureSource::GroundTruth)?;
            (Some((fa, fb)), PAE_FEATURE_EXTRACTOR.to_string())
        }
        _ => (None, "none".to_string()),
    };
    let (fgd_value, diversity_value) = match &features {
        Some((fa, fb)) if fa.len() >= 2 && fb.len() >= 2 => (
            Some(fgd(fa, fb).map_err(CliError::runtime)?),
            Some(diversity(fa, pairs, seed).map_err(CliError::runtime)?),
        ),
        Some(_) => {
            log::warn!("fewer than two feature vectors; FGD and diversity left empty");
            (None, None)
        }
        None => (None, None),
    };

    let (lad, fad) = match (&args.gen_face, &args.gt_face) {
        (Some(a), Some(b)) => {
            let pred = read_matrix(&mut run, a)?;
            let truth = read_matrix(&mut run, b)?;
            let (l, f) = lad_fad(&truth, &pred, &lips).map_err(CliError::runtime)?;
            (Some(l), Some(f))
        }
        _ => (None, None),
    };

    let report = MetricReport {
        fgd: fgd_value,
        srgr: Some(srgr_value),
        beat_align: beat_value,
        diversity: diversity_value,
        lad,
        fad,
        parameters: MetricParameters {
            sigma_cm: sigma,
            tau_s: tau,
            clip_weights: args
                .clip_weights
                .as_ref()
                .map_or("uniform".to_string(), |p| p.display().to_string()),
            feature_extractor: extractor,
            beat_reference: beat_reference.to_string(),
            diversity_pairs: pairs,
            seed,
        },
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(CliError::runtime)?;
    json.push('\n');
    run.output("report.json", json.as_bytes())?;
    println!("{json}");
    run.finish(&cfg)
}
