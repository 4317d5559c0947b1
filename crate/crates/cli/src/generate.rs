use std::path::PathBuf;

use clap::Args;
use hipgest::audio_io::write_feature_csv;
use hipgest::hierarchy::{generate_paired, ConditioningSet, GeneratorModel};
use hipgest::motion_io::write_bvh;
use hipgest::Matrix;

use crate::config::{defaults, RunConfig};
use crate::data;
use crate::error::{CliError, Result};
use crate::manifest::Run;
use crate::train::hier_error;
use crate::Common;

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true))]
pub struct GenerateArgs {
    /// Trained generator checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Speech audio. Optional `<name>.text.csv`, `.emotion.csv` and
    /// `.identity.csv` tracks next to it are picked up.
    #[arg(long, group = "input")]
    pub audio: Option<PathBuf>,
    /// Condition on synthetic paired data and also write its targets.
    #[arg(long, group = "input")]
    pub synthetic: bool,
    #[command(flatten)]
    pub common: Common,
}

fn stack<'a>(tracks: impl Iterator<Item = &'a Matrix>) -> Matrix {
    let parts: Vec<&Matrix> = tracks.collect();
    Matrix::vconcat(&parts)
}

fn csv_bytes(m: &Matrix) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, m).map_err(CliError::runtime)?;
    Ok(buf)
}

pub fn run(args: &GenerateArgs) -> Result<()> {
    let base = defaults(&[
        ("seed", "0"),
        ("windows", "4"),
        ("skeleton", data::BUILTIN),
        ("groups", data::BUILTIN),
    ]);
    let c = &args.common;
    let cfg = RunConfig::load(base, c.config.as_deref(), &c.sets, c.seed)?;
    if !args.checkpoint.exists() {
        return Err(CliError::usage(format!("{}: no such file", args.checkpoint.display())));
    }
    let mut run = Run::start("generate", &c.out, args.synthetic)?;
    let model = GeneratorModel::load(&run.input(&args.checkpoint)?)
        .map_err(|e| CliError::runtime(format!("{}: {e}", args.checkpoint.display())))?;
    let hier = model.config().clone();
    let (skeleton, template) = data::skeleton(&mut run, &cfg)?;
    let groups = data::groups(&mut run, &cfg)?;

    let mut targets = None;
    let cond = match &args.audio {
        Some(wav) => {
            let buffer = data::load_wav(&mut run, wav)?;
            let frames = data::audio_frames(&buffer, hier.fps);
            if frames < 2 {
                return Err(CliError::runtime(format!("{}: too short for two motion frames", wav.display())));
            }
            data::conditioning_from_files(&mut run, &buffer, &wav.with_extension(""), frames, &hier)?
        }
        None => {
            let paired = generate_paired(cfg.get("windows")?, &hier, cfg.get("seed")?).map_err(hier_error)?;
            let cond = ConditioningSet {
                audio: stack(paired.conditioning.iter().map(|c| &c.audio)),
                face: None,
                text: paired
                    .conditioning
                    .iter()
                    .map(|c| c.text.as_ref())
                    .collect::<Option<Vec<_>>>()
                    .map(|t| stack(t.into_iter())),
                emotion: stack(paired.conditioning.iter().map(|c| &c.emotion)),
                identity: stack(paired.conditioning.iter().map(|c| &c.identity)),
            };
            let body_hand: Vec<Matrix> = (0..paired.len()).map(|i| paired.body_hand(i)).collect();
            targets = Some((stack(body_hand.iter()), stack(paired.face.iter())));
            cond
        }
    };

    let out = model.generate(&cond).map_err(hier_error)?;
    let channels = Matrix::hconcat(&[&out.body, &out.hand]);
    let clip = data::clip_from_channels(&skeleton, &template, &groups, &channels, hier.fps)?;
    let bvh = write_bvh(&skeleton, &clip).map_err(CliError::runtime)?;
    run.output("gesture.bvh", bvh.as_bytes())?;
    run.output("face.csv", &csv_bytes(&out.face)?)?;
    if let Some((body_hand, face)) = targets {
        let clip = data::clip_from_channels(&skeleton, &template, &groups, &body_hand, hier.fps)?;
        run.output("target.bvh", write_bvh(&skeleton, &clip).map_err(CliError::runtime)?.as_bytes())?;
        run.output("target_face.csv", &csv_bytes(&face)?)?;
    }
    log::info!("generated {} frames", out.body.rows());
    run.finish(&cfg)
}
