//! Motion capture ingestion: BVH parsing and writing, forward kinematics,
//! world-space velocities, resampling, windowing and channel groups.
//!
//! Rotations stay in degrees (the BVH convention) everywhere except inside
//! [`forward_kinematics`], so files round-trip without conversion error.

mod bvh;
mod groups;
mod kinematics;
mod ops;

pub use bvh::{parse_bvh, write_bvh};
pub use groups::{ChannelGroup, ChannelGroups};
pub use kinematics::{forward_kinematics, rotation_matrix, world_velocity, JointPositions};
pub use ops::{resample, window};

use crate::Matrix;

/// Bundled 49-joint upper-body skeleton with a single zero frame at 15 fps.
pub const DESK_SKELETON_BVH: &str = include_str!("../../assets/desk_skeleton.bvh");
/// Body (9 joints) and hand (38 joints) groups for [`DESK_SKELETON_BVH`].
pub const DESK_GROUPS: &str = include_str!("../../assets/desk_groups.conf");

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MotionError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid skeleton: {0}")]
    Skeleton(String),
    #[error("joint `{joint}` has rotation channels {order:?}, expected a permutation of XYZ")]
    InvalidRotationOrder { joint: String, order: String },
    #[error("clip does not match skeleton: {0}")]
    ChannelMismatch(String),
    #[error("cannot resample from {from} fps to {to} fps (only downsampling is supported)")]
    Upsample { from: f64, to: f64 },
    #[error("invalid target fps {0}")]
    InvalidFps(f64),
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("window length {length} exceeds clip length {frames}")]
    WindowTooLong { length: usize, frames: usize },
    #[error("window stride must be at least 1")]
    InvalidStride,
    #[error("channel group config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("channel group `{0}` is not defined")]
    UnknownGroup(String),
    #[error("channel group `{0}` is empty")]
    EmptyGroup(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Position(Axis),
    Rotation(Axis),
}

impl ChannelKind {
    pub fn parse(name: &str) -> Option<Self> {
        let axis = match name.as_bytes().first()? {
            b'X' | b'x' => Axis::X,
            b'Y' | b'y' => Axis::Y,
            b'Z' | b'z' => Axis::Z,
            _ => return None,
        };
        match name[1..].to_ascii_lowercase().as_str() {
            "position" => Some(ChannelKind::Position(axis)),
            "rotation" => Some(ChannelKind::Rotation(axis)),
            _ => None,
        }
    }

    pub fn bvh_name(self) -> String {
        match self {
            ChannelKind::Position(a) => format!("{}position", a.letter()),
            ChannelKind::Rotation(a) => format!("{}rotation", a.letter()),
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, ChannelKind::Rotation(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Offset from the parent joint, in centimeters.
    pub offset: [f64; 3],
    pub channels: Vec<ChannelKind>,
    pub end_site: Option<[f64; 3]>,
}

impl Joint {
    /// Rotation axes in channel order, e.g. `[Z, X, Y]`.
    pub fn rotation_order(&self) -> Vec<Axis> {
        self.channels
            .iter()
            .filter_map(|c| match c {
                ChannelKind::Rotation(a) => Some(*a),
                ChannelKind::Position(_) => None,
            })
            .collect()
    }
}

/// Joint hierarchy in topological order (parents precede children).
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self, MotionError> {
        if joints.is_empty() {
            return Err(MotionError::Skeleton("no joints".into()));
        }
        let mut roots = 0;
        for (i, j) in joints.iter().enumerate() {
            match j.parent {
                None => roots += 1,
                Some(p) if p >= i => {
                    return Err(MotionError::Skeleton(format!(
                        "joint `{}` has parent index {p} not preceding it",
                        j.name
                    )))
                }
                Some(_) => {}
            }
            let finite = j.offset.iter().chain(j.end_site.iter().flatten());
            if !finite.into_iter().all(|v| v.is_finite()) {
                return Err(MotionError::Skeleton(format!(
                    "joint `{}` has a non-finite offset",
                    j.name
                )));
            }
        }
        if roots != 1 {
            return Err(MotionError::Skeleton(format!(
                "expected exactly one root, found {roots}"
            )));
        }
        Ok(Self { joints })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn channel_count(&self) -> usize {
        self.joints.iter().map(|j| j.channels.len()).sum()
    }

    /// Column layout implied by the joints' CHANNELS declarations.
    pub fn channel_map(&self) -> Vec<ChannelRef> {
        self.joints
            .iter()
            .enumerate()
            .flat_map(|(ji, j)| {
                j.channels.iter().map(move |&kind| ChannelRef { joint: ji, kind })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelRef {
    pub joint: usize,
    pub kind: ChannelKind,
}

/// Frames × channels of joint rotations (degrees) and translations (cm).
#[derive(Clone, Debug, PartialEq)]
pub struct MotionClip {
    fps: f64,
    frames: Matrix,
    channel_map: Vec<ChannelRef>,
}

impl MotionClip {
    pub fn new(fps: f64, frames: Matrix, channel_map: Vec<ChannelRef>) -> Result<Self, MotionError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(MotionError::InvalidFps(fps));
        }
        if frames.rows() == 0 {
            return Err(MotionError::TooFewFrames { needed: 1, got: 0 });
        }
        if frames.cols() != channel_map.len() {
            return Err(MotionError::ChannelMismatch(format!(
                "{} columns but {} mapped channels",
                frames.cols(),
                channel_map.len()
            )));
        }
        if !frames.is_finite() {
            return Err(MotionError::ChannelMismatch("non-finite frame values".into()));
        }
        Ok(Self {
            fps,
            frames,
            channel_map,
        })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.rows()
    }

    pub fn channel_count(&self) -> usize {
        self.frames.cols()
    }

    pub fn channel_map(&self) -> &[ChannelRef] {
        &self.channel_map
    }

    pub fn into_frames(self) -> Matrix {
        self.frames
    }

    /// Copy of this clip with the given columns overwritten by `values`.
    pub fn with_columns(&self, columns: &[usize], values: &Matrix) -> Result<Self, MotionError> {
        if values.cols() != columns.len() {
            return Err(MotionError::ChannelMismatch(format!(
                "{} value columns for {} target columns",
                values.cols(),
                columns.len()
            )));
        }
        let mut frames = Matrix::zeros(values.rows(), self.channel_count());
        for r in 0..values.rows() {
            let src = self.frames.row(r.min(self.frame_count() - 1));
            frames.row_mut(r).copy_from_slice(src);
            for (k, &c) in columns.iter().enumerate() {
                frames.set(r, c, values.get(r, k));
            }
        }
        MotionClip::new(self.fps, frames, self.channel_map.clone())
    }
}
