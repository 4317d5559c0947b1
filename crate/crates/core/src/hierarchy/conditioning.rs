use super::{HierConfig, HierError, FACE_DIM};
use crate::Matrix;

/// Frame-aligned conditioning tracks of one window, each `T × width`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditioningSet {
    pub audio: Matrix,
    /// Blendshape track; absent at generation time, where the face decoder
    /// produces it.
    pub face: Option<Matrix>,
    pub text: Option<Matrix>,
    pub emotion: Matrix,
    pub identity: Matrix,
}

/// `T × dim` track with a one in column `index` of every row.
pub fn one_hot_track(frames: usize, dim: usize, index: usize) -> Result<Matrix, HierError> {
    if index >= dim {
        return Err(HierError::Shape(format!("one-hot index {index} out of {dim}")));
    }
    Ok(Matrix::from_fn(frames, dim, |_, c| if c == index { 1.0 } else { 0.0 }))
}

impl ConditioningSet {
    pub fn frames(&self) -> usize {
        self.audio.rows()
    }

    /// Checks track lengths, widths and finiteness against `config`.
    pub fn validate(&self, config: &HierConfig) -> Result<(), HierError> {
        let t = self.frames();
        let mut tracks: Vec<(&str, &Matrix, usize)> = vec![
            ("audio", &self.audio, config.audio_dim),
            ("emotion", &self.emotion, config.emotion_dim),
            ("identity", &self.identity, config.identity_dim),
        ];
        if let Some(face) = &self.face {
            tracks.push(("face", face, FACE_DIM));
        }
        match &self.text {
            Some(text) => tracks.push(("text", text, config.text_dim)),
            None if config.text_dim > 0 && !config.text_zero_fill => {
                return Err(HierError::MissingTrack("text"));
            }
            None => {}
        }
        for (name, m, width) in tracks {
            if m.rows() != t {
                return Err(HierError::Shape(format!("{name} track has {} frames, audio has {t}", m.rows())));
            }
            if m.cols() != width {
                return Err(HierError::Shape(format!("{name} track is {} wide, expected {width}", m.cols())));
            }
            if !m.is_finite() {
                return Err(HierError::Shape(format!("{name} track has non-finite values")));
            }
        }
        if t < 2 {
            return Err(HierError::Shape(format!("{t} frames; at least 2 are needed")));
        }
        Ok(())
    }

    /// The text track, or zeros when it is absent.
    pub fn text_or_zeros(&self, width: usize) -> Matrix {
        self.text.clone().unwrap_or_else(|| Matrix::zeros(self.frames(), width))
    }

    /// Copy without the face track, as seen at generation time.
    pub fn without_face(&self) -> Self {
        Self {
            face: None,
            ..self.clone()
        }
    }
}
