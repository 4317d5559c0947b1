use super::MetricsError;
use crate::audio_io::BeatList;
use crate::motion_io::{world_velocity, JointPositions};

/// Per-frame sum over joints of the speed (cm/s).
pub fn joint_speed(positions: &JointPositions) -> Result<Vec<f64>, MetricsError> {
    let v = world_velocity(positions).map_err(|e| MetricsError::Shape(e.to_string()))?;
    Ok((0..v.rows())
        .map(|r| v.row(r).chunks(3).map(|c| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()).sum())
        .collect())
}

/// Centered 3-frame moving average; the end frames average their two
/// available samples.
pub fn smooth3(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n.saturating_sub(1));
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Times (frame / fps) of interior local minima. A flat-bottomed valley
/// counts once, at the middle of its flat run (rounded down).
pub fn speed_minima(speed: &[f64], fps: f64) -> Result<BeatList, MetricsError> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(MetricsError::InvalidParameter(format!("fps {fps} must be positive")));
    }
    let mut times = Vec::new();
    let n = speed.len();
    let mut i = 1;
    while i + 1 < n {
        if speed[i] < speed[i - 1] {
            let mut j = i;
            while j + 1 < n && speed[j + 1] == speed[i] {
                j += 1;
            }
            if j + 1 < n && speed[j + 1] > speed[i] {
                times.push(((i + j) / 2) as f64 / fps);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    BeatList::new(times).map_err(|e| MetricsError::InvalidParameter(e.to_string()))
}

/// Gesture beats: local minima of the smoothed summed joint speed.
pub fn gesture_beats(positions: &JointPositions) -> Result<BeatList, MetricsError> {
    let t = positions.frame_count();
    if t < 3 {
        return Err(MetricsError::TooFewSamples { needed: 3, got: t });
    }
    speed_minima(&smooth3(&joint_speed(positions)?), positions.fps())
}

/// Mean over audio beats of `exp(-d² / 2τ²)`, where `d` is the distance to
/// the nearest gesture beat. Zero when there are no gesture beats.
pub fn beat_align(audio: &BeatList, gesture: &BeatList, tau: f64) -> Result<f64, MetricsError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(MetricsError::InvalidParameter(format!("tau {tau} must be positive")));
    }
    if audio.is_empty() {
        return Err(MetricsError::EmptyBeats);
    }
    if gesture.is_empty() {
        return Ok(0.0);
    }
    let g = gesture.times();
    let sum: f64 = audio
        .times()
        .iter()
        .map(|&v| {
            // Gesture times are sorted; the nearest one neighbours the insertion point.
            let k = g.partition_point(|&x| x < v);
            let mut best = f64::INFINITY;
            for idx in [k.wrapping_sub(1), k] {
                if let Some(&x) = g.get(idx) {
                    best = best.min((x - v).abs());
                }
            }
            (-best * best / (2.0 * tau * tau)).exp()
        })
        .sum();
    Ok(sum / audio.len() as f64)
}
