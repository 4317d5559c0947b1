//! Loading motion, audio and conditioning inputs from disk, and building
//! the synthetic stand-ins.

use std::path::{Path, PathBuf};

use hipgest::audio_io::{log_mel, parse_wav, read_feature_csv, stft, AudioBuffer};
use hipgest::hierarchy::{ConditioningSet, HierConfig, FACE_DIM};
use hipgest::motion_io::{
    parse_bvh, resample, window, ChannelGroup, ChannelGroups, MotionClip, Skeleton, DESK_GROUPS, DESK_SKELETON_BVH,
};
use hipgest::Matrix;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::Run;

/// Value of the `skeleton` / `groups` keys that selects the bundled assets.
pub const BUILTIN: &str = "builtin";

pub fn skeleton(run: &mut Run, cfg: &RunConfig) -> Result<(Skeleton, MotionClip)> {
    let text = match cfg.str("skeleton") {
        BUILTIN => DESK_SKELETON_BVH.to_string(),
        path => run.input_text(Path::new(path))?,
    };
    parse_bvh(&text).map_err(CliError::runtime)
}

pub fn groups(run: &mut Run, cfg: &RunConfig) -> Result<ChannelGroups> {
    let text = match cfg.str("groups") {
        BUILTIN => DESK_GROUPS.to_string(),
        path => run.input_text(Path::new(path))?,
    };
    ChannelGroups::parse(&text).map_err(CliError::runtime)
}

/// A single BVH file, or every `.bvh` file of a directory in name order.
pub fn bvh_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.exists() {
        return Err(CliError::usage(format!("{}: no such file or directory", path.display())));
    }
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("bvh")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::usage(format!("{}: no .bvh files", path.display())));
    }
    Ok(files)
}

pub fn load_bvh(run: &mut Run, path: &Path) -> Result<(Skeleton, MotionClip)> {
    let text = run.input_text(path)?;
    parse_bvh(&text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// Resamples down to `fps` when the clip is faster.
pub fn at_rate(clip: MotionClip, fps: f64) -> Result<MotionClip> {
    if (clip.fps() - fps).abs() < 1e-9 {
        return Ok(clip);
    }
    resample(&clip, fps).map_err(CliError::runtime)
}

/// Body-and-hand channel windows of every clip under `path`.
pub fn motion_windows(
    run: &mut Run,
    path: &Path,
    groups: &ChannelGroups,
    fps: f64,
    length: usize,
    stride: usize,
) -> Result<Vec<Matrix>> {
    let mut out = Vec::new();
    for file in bvh_files(path)? {
        let (sk, clip) = load_bvh(run, &file)?;
        let clip = at_rate(clip, fps)?;
        let both = groups.select(&sk, &clip, ChannelGroup::Both).map_err(CliError::runtime)?;
        if both.frame_count() < length {
            log::warn!("{}: {} frames, shorter than one window", file.display(), both.frame_count());
            continue;
        }
        for w in window(&both, length, stride).map_err(CliError::runtime)? {
            out.push(w.into_frames());
        }
    }
    if out.is_empty() {
        return Err(CliError::runtime(format!("{}: no complete windows", path.display())));
    }
    Ok(out)
}

/// Clip on `skeleton` whose body-and-hand rotation channels hold `channels`
/// and whose remaining channels are zero.
pub fn clip_from_channels(
    skeleton: &Skeleton,
    template: &MotionClip,
    groups: &ChannelGroups,
    channels: &Matrix,
    fps: f64,
) -> Result<MotionClip> {
    let zeros = MotionClip::new(
        fps,
        Matrix::zeros(channels.rows(), skeleton.channel_count()),
        template.channel_map().to_vec(),
    )
    .map_err(CliError::runtime)?;
    let cols = groups.columns(skeleton, &zeros, ChannelGroup::Both).map_err(CliError::runtime)?;
    if cols.len() != channels.cols() {
        return Err(CliError::usage(format!(
            "channel groups select {} columns, model produces {}",
            cols.len(),
            channels.cols()
        )));
    }
    zeros.with_columns(&cols, channels).map_err(CliError::runtime)
}

pub fn load_wav(run: &mut Run, path: &Path) -> Result<AudioBuffer> {
    if !path.exists() {
        return Err(CliError::usage(format!("{}: no such file", path.display())));
    }
    let bytes = run.input(path)?;
    parse_wav(&bytes).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// Log-mel track with one row per motion frame: the hop is the number of
/// audio samples per motion frame, the frame length the next power of two
/// of twice that. The signal is zero-padded so every frame is complete.
pub fn audio_track(buffer: &AudioBuffer, fps: f64, frames: usize, dim: usize) -> Result<Matrix> {
    let sr = buffer.sample_rate();
    let hop = ((sr / fps).round() as usize).max(1);
    let frame_len = (2 * hop).next_power_of_two();
    let needed = (frames.saturating_sub(1)) * hop + frame_len;
    let mut samples = buffer.samples().to_vec();
    if samples.len() < needed {
        samples.resize(needed, 0.0);
    }
    let padded = AudioBuffer::new(samples, sr).map_err(CliError::runtime)?;
    let spectra = stft(&padded, frame_len, hop).map_err(CliError::runtime)?;
    let mel = log_mel(&spectra[..frames], dim, sr).map_err(CliError::runtime)?;
    Ok(mel)
}

fn read_track(run: &mut Run, path: &Path, width: usize, frames: usize) -> Result<Matrix> {
    let bytes = run.input(path)?;
    let m = read_feature_csv(bytes.as_slice()).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    if m.cols() != width {
        return Err(CliError::runtime(format!("{}: {} columns, expected {width}", path.display(), m.cols())));
    }
    if m.rows() < frames {
        return Err(CliError::runtime(format!("{}: {} rows, need {frames}", path.display(), m.rows())));
    }
    Ok(m.row_block(0, frames))
}

/// Optional side tracks of a clip: `<stem>.<kind>.csv` next to it.
fn side_track(run: &mut Run, stem: &Path, kind: &str, width: usize, frames: usize) -> Result<Option<Matrix>> {
    let path = PathBuf::from(format!("{}.{kind}.csv", stem.display()));
    if !path.exists() {
        return Ok(None);
    }
    read_track(run, &path, width, frames).map(Some)
}

/// Conditioning for `frames` frames from speech audio and optional text,
/// emotion and identity CSV tracks stored as `<stem>.text.csv` and so on.
/// Missing emotion and identity tracks are zero.
pub fn conditioning_from_files(
    run: &mut Run,
    audio: &AudioBuffer,
    stem: &Path,
    frames: usize,
    cfg: &HierConfig,
) -> Result<ConditioningSet> {
    let audio = audio_track(audio, cfg.fps, frames, cfg.audio_dim)?;
    let text = side_track(run, stem, "text", cfg.text_dim, frames)?;
    let emotion = side_track(run, stem, "emotion", cfg.emotion_dim, frames)?
        .unwrap_or_else(|| Matrix::zeros(frames, cfg.emotion_dim));
    let identity = side_track(run, stem, "identity", cfg.identity_dim, frames)?
        .unwrap_or_else(|| Matrix::zeros(frames, cfg.identity_dim));
    let face = side_track(run, stem, "face", FACE_DIM, frames)?;
    Ok(ConditioningSet {
        audio,
        face,
        text,
        emotion,
        identity,
    })
}

/// Frame count of an audio file at the motion frame rate.
pub fn audio_frames(buffer: &AudioBuffer, fps: f64) -> usize {
    (buffer.duration() * fps).floor() as usize
}

pub fn parse_indices(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
        let bad = || CliError::usage(format!("index list `{text}`: bad entry `{part}`"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_ranges() {
        assert_eq!(parse_indices("17-20, 40").unwrap(), vec![17, 18, 19, 20, 40]);
        assert!(parse_indices("5-3").is_err());
        assert!(parse_indices("x").is_err());
    }

    #[test]
    fn audio_track_has_one_row_per_frame() {
        let buffer = AudioBuffer::new((0..16000).map(|i| (i as f64 * 0.05).sin() * 0.3).collect(), 16000.0).unwrap();
        let frames = audio_frames(&buffer, 15.0);
        assert_eq!(frames, 15);
        let m = audio_track(&buffer, 15.0, frames, 24).unwrap();
        assert_eq!((m.rows(), m.cols()), (15, 24));
        assert!(m.is_finite());
    }
}
