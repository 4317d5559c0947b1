use super::{MotionClip, MotionError};
use crate::Matrix;

const GRID_EPS: f64 = 1e-9;

/// Downsamples a clip to `target_fps`.
///
/// Output frame `i` samples the source at position `i * fps / target_fps`;
/// positions between frames are linearly interpolated. The first frame is
/// always kept.
pub fn resample(clip: &MotionClip, target_fps: f64) -> Result<MotionClip, MotionError> {
    if !(target_fps.is_finite() && target_fps > 0.0) {
        return Err(MotionError::InvalidFps(target_fps));
    }
    let fps = clip.fps();
    if target_fps > fps * (1.0 + 1e-12) {
        return Err(MotionError::Upsample {
            from: fps,
            to: target_fps,
        });
    }
    if (target_fps - fps).abs() <= fps * 1e-12 {
        return Ok(clip.clone());
    }
    let ratio = fps / target_fps;
    let src = clip.frames();
    let t = src.rows();
    let n_out = (((t - 1) as f64) / ratio + GRID_EPS).floor() as usize + 1;
    let mut out = Matrix::zeros(n_out, src.cols());
    for i in 0..n_out {
        let pos = i as f64 * ratio;
        let i0 = ((pos + GRID_EPS).floor() as usize).min(t - 1);
        let frac = pos - i0 as f64;
        if frac.abs() < GRID_EPS || i0 + 1 >= t {
            out.row_mut(i).copy_from_slice(src.row(i0));
        } else {
            for c in 0..src.cols() {
                let (a, b) = (src.get(i0, c), src.get(i0 + 1, c));
                out.set(i, c, a + (b - a) * frac);
            }
        }
    }
    MotionClip::new(target_fps, out, clip.channel_map().to_vec())
}

/// Windows of exactly `length` frames starting at `0, stride, 2 * stride, ...`;
/// a trailing partial window is dropped.
pub fn window(
    clip: &MotionClip,
    length: usize,
    stride: usize,
) -> Result<Vec<MotionClip>, MotionError> {
    if stride == 0 {
        return Err(MotionError::InvalidStride);
    }
    let t = clip.frame_count();
    if length == 0 || length > t {
        return Err(MotionError::WindowTooLong { length, frames: t });
    }
    (0..=(t - length) / stride)
        .map(|w| {
            MotionClip::new(
                clip.fps(),
                clip.frames().row_block(w * stride, length),
                clip.channel_map().to_vec(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion_io::{Axis, ChannelKind, ChannelRef};

    fn ramp(t: usize, fps: f64) -> MotionClip {
        let map = vec![ChannelRef {
            joint: 0,
            kind: ChannelKind::Rotation(Axis::X),
        }];
        MotionClip::new(fps, Matrix::from_fn(t, 1, |r, _| r as f64), map).unwrap()
    }

    #[test]
    fn integer_decimation() {
        let r = resample(&ramp(10, 30.0), 15.0).unwrap();
        assert_eq!(r.frame_count(), 5);
        assert_eq!(r.frames().column(0), vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(r.fps(), 15.0);
    }

    #[test]
    fn identity_rate() {
        let c = ramp(7, 30.0);
        assert_eq!(resample(&c, 30.0).unwrap(), c);
    }

    #[test]
    fn fractional_ratio_keeps_ramp_exact() {
        let r = resample(&ramp(10, 30.0), 20.0).unwrap();
        assert_eq!(r.frame_count(), 7);
        for (i, v) in r.frames().column(0).iter().enumerate() {
            assert!((v - 1.5 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn upsampling_rejected() {
        assert!(matches!(
            resample(&ramp(4, 15.0), 30.0),
            Err(MotionError::Upsample { .. })
        ));
    }

    #[test]
    fn window_counts() {
        assert_eq!(window(&ramp(34, 15.0), 34, 1).unwrap().len(), 1);
        let w = window(&ramp(100, 15.0), 34, 33).unwrap();
        assert_eq!(w.len(), 3);
        let starts: Vec<f64> = w.iter().map(|c| c.frames().get(0, 0)).collect();
        assert_eq!(starts, vec![0.0, 33.0, 66.0]);
        assert!(w.iter().all(|c| c.frame_count() == 34));
        assert_eq!(
            window(&ramp(10, 15.0), 34, 1),
            Err(MotionError::WindowTooLong { length: 34, frames: 10 })
        );
        assert_eq!(window(&ramp(10, 15.0), 4, 0), Err(MotionError::InvalidStride));
    }
}
