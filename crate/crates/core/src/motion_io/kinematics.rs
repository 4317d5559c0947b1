use nalgebra::{Matrix3, Vector3};

use super::{Axis, ChannelKind, MotionClip, MotionError, Skeleton};
use crate::Matrix;

/// World-space joint positions in centimeters, one `[x, y, z]` per joint per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPositions {
    positions: Vec<[f64; 3]>,
    joints: usize,
    fps: f64,
}

impl JointPositions {
    pub fn new(positions: Vec<[f64; 3]>, joints: usize, fps: f64) -> Result<Self, MotionError> {
        if joints == 0 || !positions.len().is_multiple_of(joints) || positions.is_empty() {
            return Err(MotionError::ChannelMismatch(format!(
                "{} positions do not divide into {joints} joints",
                positions.len()
            )));
        }
        if !positions.iter().flatten().all(|v| v.is_finite()) {
            return Err(MotionError::ChannelMismatch("non-finite position".into()));
        }
        Ok(Self {
            positions,
            joints,
            fps,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.positions.len() / self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn get(&self, frame: usize, joint: usize) -> [f64; 3] {
        self.positions[frame * self.joints + joint]
    }

    pub fn frame(&self, frame: usize) -> &[[f64; 3]] {
        &self.positions[frame * self.joints..(frame + 1) * self.joints]
    }

    /// Flattened `T × 3J` matrix (x, y, z per joint).
    pub fn to_matrix(&self) -> Matrix {
        let t = self.frame_count();
        Matrix::from_fn(t, 3 * self.joints, |r, c| self.get(r, c / 3)[c % 3])
    }
}

/// Elementary rotation about one axis, angle in degrees.
pub fn rotation_matrix(axis: Axis, degrees: f64) -> Matrix3<f64> {
    let (s, c) = degrees.to_radians().sin_cos();
    match axis {
        Axis::X => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        Axis::Y => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        Axis::Z => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    }
}

fn check_rotation_order(skeleton: &Skeleton) -> Result<(), MotionError> {
    for j in skeleton.joints() {
        let order = j.rotation_order();
        let is_perm = order.len() == 3
            && order.contains(&Axis::X)
            && order.contains(&Axis::Y)
            && order.contains(&Axis::Z);
        if !order.is_empty() && !is_perm {
            return Err(MotionError::InvalidRotationOrder {
                joint: j.name.clone(),
                order: order.iter().map(|a| a.letter()).collect(),
            });
        }
    }
    Ok(())
}

/// World positions of every joint for every frame.
///
/// A joint's local rotation multiplies its rotation channels in declaration
/// order (`Zrotation Xrotation Yrotation` gives `Rz * Rx * Ry`). A joint sits
/// at its parent's position plus the parent's global rotation applied to its
/// offset (plus any translation channels); the root adds its translation to
/// its offset.
pub fn forward_kinematics(
    skeleton: &Skeleton,
    clip: &MotionClip,
) -> Result<JointPositions, MotionError> {
    let map = clip.channel_map();
    if map.len() != skeleton.channel_count()
        || map.iter().any(|c| c.joint >= skeleton.len())
    {
        return Err(MotionError::ChannelMismatch(format!(
            "clip maps {} channels, skeleton declares {}",
            map.len(),
            skeleton.channel_count()
        )));
    }
    check_rotation_order(skeleton)?;

    let n = skeleton.len();
    let frames = clip.frame_count();
    let mut out = Vec::with_capacity(frames * n);
    let mut local_rot = vec![Matrix3::identity(); n];
    let mut local_trans = vec![Vector3::zeros(); n];
    let mut global_rot = vec![Matrix3::identity(); n];
    let mut global_pos = vec![Vector3::zeros(); n];
    for f in 0..frames {
        local_rot.fill(Matrix3::identity());
        local_trans.fill(Vector3::zeros());
        for (c, ch) in map.iter().enumerate() {
            let v = clip.frames().get(f, c);
            match ch.kind {
                ChannelKind::Rotation(a) => {
                    local_rot[ch.joint] *= rotation_matrix(a, v);
                }
                ChannelKind::Position(a) => local_trans[ch.joint][a.index()] += v,
            }
        }
        for (i, j) in skeleton.joints().iter().enumerate() {
            let offset = Vector3::from(j.offset) + local_trans[i];
            match j.parent {
                None => {
                    global_pos[i] = offset;
                    global_rot[i] = local_rot[i];
                }
                Some(p) => {
                    global_pos[i] = global_pos[p] + global_rot[p] * offset;
                    global_rot[i] = global_rot[p] * local_rot[i];
                }
            }
            out.push([global_pos[i].x, global_pos[i].y, global_pos[i].z]);
        }
    }
    JointPositions::new(out, n, clip.fps())
}

/// Forward-difference velocity in cm/s, `T × 3J`; the last row repeats the
/// previous one so the length is preserved.
pub fn world_velocity(positions: &JointPositions) -> Result<Matrix, MotionError> {
    let t = positions.frame_count();
    if t < 2 {
        return Err(MotionError::TooFewFrames { needed: 2, got: t });
    }
    let j = positions.joint_count();
    let fps = positions.fps();
    let mut v = Matrix::zeros(t, 3 * j);
    for f in 0..t - 1 {
        for k in 0..j {
            let (a, b) = (positions.get(f, k), positions.get(f + 1, k));
            for d in 0..3 {
                v.set(f, 3 * k + d, (b[d] - a[d]) * fps);
            }
        }
    }
    let last: Vec<f64> = v.row(t - 2).to_vec();
    v.row_mut(t - 1).copy_from_slice(&last);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion_io::{ChannelRef, Joint};

    fn chain(offsets: &[[f64; 3]], root_channels: Vec<ChannelKind>) -> Skeleton {
        let rot = vec![
            ChannelKind::Rotation(Axis::Z),
            ChannelKind::Rotation(Axis::X),
            ChannelKind::Rotation(Axis::Y),
        ];
        let joints = offsets
            .iter()
            .enumerate()
            .map(|(i, &o)| Joint {
                name: format!("j{i}"),
                parent: i.checked_sub(1),
                offset: o,
                channels: if i == 0 { root_channels.clone() } else { rot.clone() },
                end_site: None,
            })
            .collect();
        Skeleton::new(joints).unwrap()
    }

    fn clip(sk: &Skeleton, rows: Vec<Vec<f64>>, fps: f64) -> MotionClip {
        MotionClip::new(fps, Matrix::from_rows(&rows), sk.channel_map()).unwrap()
    }

    fn root6() -> Vec<ChannelKind> {
        vec![
            ChannelKind::Position(Axis::X),
            ChannelKind::Position(Axis::Y),
            ChannelKind::Position(Axis::Z),
            ChannelKind::Rotation(Axis::Z),
            ChannelKind::Rotation(Axis::X),
            ChannelKind::Rotation(Axis::Y),
        ]
    }

    #[test]
    fn zero_rotations_accumulate_offsets() {
        let sk = chain(&[[1.0, 2.0, 3.0], [0.0, 10.0, 0.0], [0.0, 5.0, 1.0]], root6());
        let c = clip(&sk, vec![vec![0.0; 12]], 30.0);
        let p = forward_kinematics(&sk, &c).unwrap();
        assert_eq!(p.get(0, 0), [1.0, 2.0, 3.0]);
        assert_eq!(p.get(0, 1), [1.0, 12.0, 3.0]);
        assert_eq!(p.get(0, 2), [1.0, 17.0, 4.0]);
    }

    #[test]
    fn root_z_rotation_moves_child() {
        let sk = chain(&[[0.0; 3], [0.0, 10.0, 0.0]], root6());
        let mut row = vec![0.0; 9];
        row[3] = 90.0;
        let p = forward_kinematics(&sk, &clip(&sk, vec![row], 30.0)).unwrap();
        let child = p.get(0, 1);
        for (a, b) in child.iter().zip([-10.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-9, "{child:?}");
        }
    }

    #[test]
    fn root_translation_shifts_everything() {
        let sk = chain(&[[0.0; 3], [0.0, 10.0, 0.0], [3.0, 0.0, 0.0]], root6());
        let mut row: Vec<f64> = (0..12).map(|i| (i * 17 % 11) as f64 * 7.0).collect();
        let base = forward_kinematics(&sk, &clip(&sk, vec![row.clone()], 30.0)).unwrap();
        row[0] += 5.0;
        let moved = forward_kinematics(&sk, &clip(&sk, vec![row], 30.0)).unwrap();
        for j in 0..3 {
            let (a, b) = (base.get(0, j), moved.get(0, j));
            assert!((b[0] - a[0] - 5.0).abs() < 1e-9);
            assert!((b[1] - a[1]).abs() < 1e-9 && (b[2] - a[2]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_partial_rotation_order() {
        let joints = vec![Joint {
            name: "r".into(),
            parent: None,
            offset: [0.0; 3],
            channels: vec![ChannelKind::Rotation(Axis::Z), ChannelKind::Rotation(Axis::Z)],
            end_site: None,
        }];
        let sk = Skeleton::new(joints).unwrap();
        let c = clip(&sk, vec![vec![0.0, 0.0]], 30.0);
        assert!(matches!(
            forward_kinematics(&sk, &c),
            Err(MotionError::InvalidRotationOrder { .. })
        ));
    }

    #[test]
    fn mismatched_clip() {
        let sk = chain(&[[0.0; 3], [0.0, 1.0, 0.0]], root6());
        let bad = MotionClip::new(
            30.0,
            Matrix::zeros(1, 2),
            vec![
                ChannelRef { joint: 0, kind: ChannelKind::Rotation(Axis::X) },
                ChannelRef { joint: 0, kind: ChannelKind::Rotation(Axis::Y) },
            ],
        )
        .unwrap();
        assert!(matches!(
            forward_kinematics(&sk, &bad),
            Err(MotionError::ChannelMismatch(_))
        ));
    }

    #[test]
    fn velocity_cases() {
        let still = JointPositions::new(vec![[1.0, 2.0, 3.0]; 4], 1, 15.0).unwrap();
        let v = world_velocity(&still).unwrap();
        assert!(v.as_slice().iter().all(|&x| x == 0.0));

        let ramp: Vec<[f64; 3]> = (0..5).map(|t| [t as f64, 0.0, 0.0]).collect();
        let v = world_velocity(&JointPositions::new(ramp, 1, 15.0).unwrap()).unwrap();
        assert_eq!(v.rows(), 5);
        for r in 0..5 {
            assert_eq!(v.row(r), &[15.0, 0.0, 0.0]);
        }

        let single = JointPositions::new(vec![[0.0; 3]], 1, 15.0).unwrap();
        assert_eq!(
            world_velocity(&single),
            Err(MotionError::TooFewFrames { needed: 2, got: 1 })
        );
    }
}
