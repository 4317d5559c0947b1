use std::path::PathBuf;

use clap::Args;
use hipgest::audio_io::{onset_envelope, pick_beats, stft, write_beats_csv};
use hipgest::metrics::gesture_beats;
use hipgest::motion_io::forward_kinematics;

use crate::config::{defaults, RunConfig};
use crate::data;
use crate::error::{CliError, Result};
use crate::manifest::Run;
use crate::Common;

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true))]
pub struct BeatsArgs {
    /// Audio file; beats are spectral-flux onset peaks.
    #[arg(long, group = "input")]
    pub audio: Option<PathBuf>,
    /// Motion file; beats are minima of the smoothed joint speed.
    #[arg(long, group = "input")]
    pub bvh: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

pub fn audio_defaults() -> [(&'static str, &'static str); 3] {
    [("frame_len", "1024"), ("hop", "512"), ("threshold", "0.3")]
}

/// Onset beats of an audio buffer with the `frame_len`, `hop` and
/// `threshold` keys of `cfg`.
pub fn audio_beats(
    buffer: &hipgest::audio_io::AudioBuffer,
    cfg: &RunConfig,
) -> Result<hipgest::audio_io::BeatList> {
    let hop: usize = cfg.get("hop")?;
    let spectra = stft(buffer, cfg.get("frame_len")?, hop).map_err(CliError::runtime)?;
    let env = onset_envelope(&spectra).map_err(CliError::runtime)?;
    pick_beats(&env, hop as f64 / buffer.sample_rate(), cfg.get("threshold")?).map_err(CliError::runtime)
}

pub fn run(args: &BeatsArgs) -> Result<()> {
    let mut base = defaults(&[("seed", "0")]);
    base.extend(defaults(&audio_defaults()));
    let c = &args.common;
    let cfg = RunConfig::load(base, c.config.as_deref(), &c.sets, c.seed)?;
    let mut run = Run::start("beats", &c.out, false)?;
    let beats = match (&args.audio, &args.bvh) {
        (Some(wav), _) => {
            let buffer = data::load_wav(&mut run, wav)?;
            audio_beats(&buffer, &cfg)?
        }
        (None, Some(bvh)) => {
            if !bvh.exists() {
                return Err(CliError::usage(format!("{}: no such file", bvh.display())));
            }
            let (sk, clip) = data::load_bvh(&mut run, bvh)?;
            let pos = forward_kinematics(&sk, &clip).map_err(CliError::runtime)?;
            gesture_beats(&pos).map_err(CliError::runtime)?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    log::info!("{} beats", beats.len());
    let mut buf = Vec::new();
    write_beats_csv(&mut buf, &beats).map_err(CliError::runtime)?;
    run.output("beats.csv", &buf)?;
    run.finish(&cfg)
}
