use std::collections::BTreeMap;

use super::{MotionClip, MotionError, Skeleton};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelGroup {
    Body,
    Hand,
    /// Body columns followed by hand columns.
    Both,
}

impl std::str::FromStr for ChannelGroup {
    type Err = MotionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "body" => Ok(ChannelGroup::Body),
            "hand" => Ok(ChannelGroup::Hand),
            "both" => Ok(ChannelGroup::Both),
            other => Err(MotionError::UnknownGroup(other.to_string())),
        }
    }
}

/// Named joint lists loaded from a `name = Joint1 Joint2 ...` config file.
///
/// A group selects the rotation channels of its joints, in the joint order
/// given and the channel order of the clip.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChannelGroups {
    groups: BTreeMap<String, Vec<String>>,
}

impl ChannelGroups {
    pub fn parse(text: &str) -> Result<Self, MotionError> {
        let mut groups = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(MotionError::Config {
                line: i + 1,
                message: "expected `group = joint names`".into(),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(MotionError::Config {
                    line: i + 1,
                    message: "empty group name".into(),
                });
            }
            let joints = value.split_whitespace().map(str::to_string).collect();
            if groups.insert(key.to_string(), joints).is_some() {
                return Err(MotionError::Config {
                    line: i + 1,
                    message: format!("group `{key}` defined twice"),
                });
            }
        }
        Ok(Self { groups })
    }

    pub fn insert(&mut self, name: &str, joints: Vec<String>) {
        self.groups.insert(name.to_string(), joints);
    }

    pub fn joints(&self, name: &str) -> Result<&[String], MotionError> {
        self.groups
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| MotionError::UnknownGroup(name.to_string()))
    }

    fn named_columns(
        &self,
        name: &str,
        skeleton: &Skeleton,
        clip: &MotionClip,
    ) -> Result<Vec<usize>, MotionError> {
        let joints = self.joints(name)?;
        if joints.is_empty() {
            return Err(MotionError::EmptyGroup(name.to_string()));
        }
        let mut cols = Vec::new();
        for j in joints {
            let ji = skeleton
                .joint_index(j)
                .ok_or_else(|| MotionError::UnknownJoint(j.clone()))?;
            cols.extend(
                clip.channel_map()
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.joint == ji && c.kind.is_rotation())
                    .map(|(i, _)| i),
            );
        }
        Ok(cols)
    }

    /// Clip column indices making up `group`.
    pub fn columns(
        &self,
        skeleton: &Skeleton,
        clip: &MotionClip,
        group: ChannelGroup,
    ) -> Result<Vec<usize>, MotionError> {
        match group {
            ChannelGroup::Body => self.named_columns("body", skeleton, clip),
            ChannelGroup::Hand => self.named_columns("hand", skeleton, clip),
            ChannelGroup::Both => {
                let mut cols = self.named_columns("body", skeleton, clip)?;
                cols.extend(self.named_columns("hand", skeleton, clip)?);
                Ok(cols)
            }
        }
    }

    pub fn select(
        &self,
        skeleton: &Skeleton,
        clip: &MotionClip,
        group: ChannelGroup,
    ) -> Result<MotionClip, MotionError> {
        let cols = self.columns(skeleton, clip, group)?;
        let map = cols.iter().map(|&c| clip.channel_map()[c]).collect();
        MotionClip::new(clip.fps(), clip.frames().select_columns(&cols), map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion_io::parse_bvh;

    const DOC: &str = "HIERARCHY
ROOT Hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Spine
  {
    OFFSET 0 10 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    JOINT Hand
    {
      OFFSET 0 5 0
      CHANNELS 3 Zrotation Xrotation Yrotation
    }
  }
}
MOTION
Frames: 1
Frame Time: 0.1
1 2 3 4 5 6 7 8 9 10 11 12
";

    #[test]
    fn selects_rotation_columns() {
        let (sk, clip) = parse_bvh(DOC).unwrap();
        let groups = ChannelGroups::parse("# test\nbody = Spine\nhand = Hand\n").unwrap();
        let body = groups.select(&sk, &clip, ChannelGroup::Body).unwrap();
        assert_eq!(body.frames().row(0), &[7.0, 8.0, 9.0]);
        let both = groups.select(&sk, &clip, ChannelGroup::Both).unwrap();
        assert_eq!(both.frames().row(0), &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
    }

    #[test]
    fn desk_skeleton_group_widths() {
        let (sk, clip) = parse_bvh(crate::motion_io::DESK_SKELETON_BVH).unwrap();
        let groups = ChannelGroups::parse(crate::motion_io::DESK_GROUPS).unwrap();
        let width = |g| groups.columns(&sk, &clip, g).unwrap().len();
        assert_eq!(width(ChannelGroup::Body), 27);
        assert_eq!(width(ChannelGroup::Hand), 114);
        assert_eq!(width(ChannelGroup::Both), 141);
    }

    #[test]
    fn errors() {
        let (sk, clip) = parse_bvh(DOC).unwrap();
        let empty = ChannelGroups::parse("body =\nhand = Hand").unwrap();
        assert_eq!(
            empty.columns(&sk, &clip, ChannelGroup::Body),
            Err(MotionError::EmptyGroup("body".into()))
        );
        let unknown = ChannelGroups::parse("body = Tail\nhand = Hand").unwrap();
        assert_eq!(
            unknown.columns(&sk, &clip, ChannelGroup::Both),
            Err(MotionError::UnknownJoint("Tail".into()))
        );
        assert!(matches!(
            ChannelGroups::parse("body Spine"),
            Err(MotionError::Config { line: 1, .. })
        ));
        let missing = ChannelGroups::parse("body = Spine").unwrap();
        assert_eq!(
            missing.columns(&sk, &clip, ChannelGroup::Hand),
            Err(MotionError::UnknownGroup("hand".into()))
        );
    }
}
