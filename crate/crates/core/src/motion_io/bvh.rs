use std::fmt::Write as _;

use super::{ChannelKind, Joint, MotionClip, MotionError, Skeleton};
use crate::Matrix;

struct Tokens<'a> {
    items: Vec<(&'a str, usize)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<(&'a str, usize), MotionError> {
        let tok = self.items.get(self.pos).copied().ok_or(MotionError::Parse {
            line: self.last_line,
            message: "unexpected end of HIERARCHY section".into(),
        })?;
        self.pos += 1;
        Ok(tok)
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.0)
    }

    fn expect(&mut self, word: &str) -> Result<usize, MotionError> {
        let (tok, line) = self.next()?;
        if tok != word {
            return Err(err(line, format!("expected `{word}`, found `{tok}`")));
        }
        Ok(line)
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, MotionError> {
        let (tok, line) = self.next()?;
        tok.parse()
            .map_err(|_| err(line, format!("expected {what}, found `{tok}`")))
    }
}

fn err(line: usize, message: impl Into<String>) -> MotionError {
    MotionError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses an ASCII BVH document into its skeleton and motion clip.
///
/// The frame rate is `1 / Frame Time`, snapped to the nearest integer when it
/// is within 1e-4 relative of one (files usually store `0.0333333`).
pub fn parse_bvh(text: &str) -> Result<(Skeleton, MotionClip), MotionError> {
    let lines: Vec<&str> = text.lines().collect();
    let motion_line = lines
        .iter()
        .position(|l| l.trim() == "MOTION")
        .ok_or_else(|| err(lines.len(), "missing MOTION section"))?;

    let items = lines[..motion_line]
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (t, i + 1)))
        .collect();
    let mut tokens = Tokens {
        items,
        pos: 0,
        last_line: motion_line,
    };
    tokens.expect("HIERARCHY")?;
    tokens.expect("ROOT")?;
    let mut joints = Vec::new();
    parse_joint(&mut tokens, None, &mut joints)?;
    if let Some(extra) = tokens.peek() {
        let line = tokens.items[tokens.pos].1;
        return Err(err(line, format!("unexpected `{extra}` after root joint")));
    }
    let skeleton = Skeleton::new(joints)?;

    let mut rest = lines
        .iter()
        .enumerate()
        .skip(motion_line + 1)
        .filter(|(_, l)| !l.trim().is_empty());
    let (frames_line, frames_text) = rest
        .next()
        .ok_or_else(|| err(motion_line + 1, "missing `Frames:` line"))?;
    let frame_count: usize = header_value(frames_text, "Frames:")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(frames_line + 1, "expected `Frames: <count>`"))?;
    let (time_line, time_text) = rest
        .next()
        .ok_or_else(|| err(frames_line + 2, "missing `Frame Time:` line"))?;
    let frame_time: f64 = header_value(time_text, "Frame Time:")
        .and_then(|v| v.parse().ok())
        .filter(|v: &f64| v.is_finite() && *v > 0.0)
        .ok_or_else(|| err(time_line + 1, "expected `Frame Time: <seconds>`"))?;

    let channels = skeleton.channel_count();
    let mut data = Vec::with_capacity(frame_count * channels);
    let mut rows = 0;
    for (i, line) in rest {
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(i + 1, format!("non-numeric frame value `{tok}`")))?;
            if !v.is_finite() {
                return Err(err(i + 1, format!("non-finite frame value `{tok}`")));
            }
            data.push(v);
        }
        let got = data.len() - before;
        if got != channels {
            return Err(err(
                i + 1,
                format!("frame has {got} values, expected {channels} channels"),
            ));
        }
        rows += 1;
    }
    if rows != frame_count {
        return Err(err(
            frames_line + 1,
            format!("frame-count mismatch: header declares {frame_count} frames, found {rows}"),
        ));
    }
    if rows == 0 {
        return Err(err(frames_line + 1, "clip has no frames"));
    }

    let fps = snap_fps(1.0 / frame_time);
    let frames = Matrix::from_vec(rows, channels, data).expect("row lengths checked");
    let map = skeleton.channel_map();
    let clip = MotionClip::new(fps, frames, map)?;
    Ok((skeleton, clip))
}

fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.trim().strip_prefix(key).map(str::trim)
}

fn snap_fps(fps: f64) -> f64 {
    let r = fps.round();
    if r > 0.0 && ((fps - r) / r).abs() < 1e-4 {
        r
    } else {
        fps
    }
}

fn parse_joint(
    tokens: &mut Tokens<'_>,
    parent: Option<usize>,
    joints: &mut Vec<Joint>,
) -> Result<(), MotionError> {
    let (name, _) = tokens.next()?;
    tokens.expect("{")?;
    tokens.expect("OFFSET")?;
    let offset = [
        tokens.number("offset")?,
        tokens.number("offset")?,
        tokens.number("offset")?,
    ];
    let mut channels = Vec::new();
    if tokens.peek() == Some("CHANNELS") {
        tokens.next()?;
        let n: usize = tokens.number("channel count")?;
        for _ in 0..n {
            let (tok, line) = tokens.next()?;
            let kind = ChannelKind::parse(tok)
                .ok_or_else(|| err(line, format!("unknown channel kind `{tok}`")))?;
            channels.push(kind);
        }
    }
    let index = joints.len();
    joints.push(Joint {
        name: name.to_string(),
        parent,
        offset,
        channels,
        end_site: None,
    });
    loop {
        let (tok, line) = tokens.next()?;
        match tok {
            "}" => return Ok(()),
            "JOINT" => parse_joint(tokens, Some(index), joints)?,
            "End" => {
                tokens.expect("Site")?;
                tokens.expect("{")?;
                tokens.expect("OFFSET")?;
                let site = [
                    tokens.number("offset")?,
                    tokens.number("offset")?,
                    tokens.number("offset")?,
                ];
                tokens.expect("}")?;
                joints[index].end_site = Some(site);
            }
            other => return Err(err(line, format!("unexpected `{other}` in joint `{name}`"))),
        }
    }
}

/// Serializes a skeleton and clip as BVH. Values use the shortest exact
/// decimal representation so parsing the output reproduces the input.
pub fn write_bvh(skeleton: &Skeleton, clip: &MotionClip) -> Result<String, MotionError> {
    if clip.channel_map() != skeleton.channel_map().as_slice() {
        return Err(MotionError::ChannelMismatch(
            "clip channel map differs from skeleton CHANNELS".into(),
        ));
    }
    let mut out = String::from("HIERARCHY\n");
    let mut order = Vec::with_capacity(skeleton.len());
    write_joint(skeleton, 0, 0, &mut out, &mut order);
    // Frame columns follow the depth-first joint order of the hierarchy text.
    let mut first = Vec::with_capacity(skeleton.len());
    let mut next = 0;
    for j in skeleton.joints() {
        first.push(next);
        next += j.channels.len();
    }
    let columns: Vec<usize> = order
        .iter()
        .flat_map(|&j| first[j]..first[j] + skeleton.joints()[j].channels.len())
        .collect();
    out.push_str("MOTION\n");
    let _ = writeln!(out, "Frames: {}", clip.frame_count());
    let _ = writeln!(out, "Frame Time: {}", 1.0 / clip.fps());
    for r in 0..clip.frame_count() {
        let frame = clip.frames().row(r);
        let row: Vec<String> = columns.iter().map(|&c| format!("{}", frame[c])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

fn write_joint(skeleton: &Skeleton, index: usize, depth: usize, out: &mut String, order: &mut Vec<usize>) {
    order.push(index);
    let j = &skeleton.joints()[index];
    let pad = "\t".repeat(depth);
    let keyword = if j.parent.is_none() { "ROOT" } else { "JOINT" };
    let _ = writeln!(out, "{pad}{keyword} {}", j.name);
    let _ = writeln!(out, "{pad}{{");
    let [x, y, z] = j.offset;
    let _ = writeln!(out, "{pad}\tOFFSET {x} {y} {z}");
    if !j.channels.is_empty() {
        let names: Vec<String> = j.channels.iter().map(|c| c.bvh_name()).collect();
        let _ = writeln!(out, "{pad}\tCHANNELS {} {}", names.len(), names.join(" "));
    }
    for (child, c) in skeleton.joints().iter().enumerate() {
        if c.parent == Some(index) {
            write_joint(skeleton, child, depth + 1, out, order);
        }
    }
    if let Some([x, y, z]) = j.end_site {
        let _ = writeln!(out, "{pad}\tEnd Site");
        let _ = writeln!(out, "{pad}\t{{");
        let _ = writeln!(out, "{pad}\t\tOFFSET {x} {y} {z}");
        let _ = writeln!(out, "{pad}\t}}");
    }
    let _ = writeln!(out, "{pad}}}");
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROOT_ONLY: &str = "HIERARCHY
ROOT Hips
{
\tOFFSET 0 0 0
\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
}
MOTION
Frames: 2
Frame Time: 0.0333333
0 0 0 0 0 0
0 0 0 0 0 0
";

    const CHAIN: &str = "HIERARCHY
ROOT A
{
  OFFSET 0 0 0
  CHANNELS 3 Zrotation Xrotation Yrotation
  JOINT B
  {
    OFFSET 0 10 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    JOINT C
    {
      OFFSET 0 5 0
      CHANNELS 3 Zrotation Xrotation Yrotation
      End Site
      {
        OFFSET 0 2 0
      }
    }
  }
}
MOTION
Frames: 1
Frame Time: 0.0666667
0 0 0 0 0 0 0 0 0
";

    #[test]
    fn root_only_zero_document() {
        let (sk, clip) = parse_bvh(ROOT_ONLY).unwrap();
        assert_eq!(sk.len(), 1);
        assert_eq!(clip.frame_count(), 2);
        assert_eq!(clip.channel_count(), 6);
        assert_eq!(clip.fps(), 30.0);
        assert!(clip.frames().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chain_offsets_verbatim() {
        let (sk, clip) = parse_bvh(CHAIN).unwrap();
        assert_eq!(sk.len(), 3);
        assert_eq!(sk.joints()[1].offset, [0.0, 10.0, 0.0]);
        assert_eq!(sk.joints()[2].offset, [0.0, 5.0, 0.0]);
        assert_eq!(sk.joints()[2].parent, Some(1));
        assert_eq!(sk.joints()[2].end_site, Some([0.0, 2.0, 0.0]));
        assert_eq!(clip.fps(), 15.0);
    }

    #[test]
    fn frame_count_mismatch() {
        let doc = ROOT_ONLY.replace("Frames: 2", "Frames: 3");
        let e = parse_bvh(&doc).unwrap_err();
        match e {
            MotionError::Parse { line, message } => {
                assert_eq!(line, 8);
                assert!(message.contains("frame-count mismatch"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_value_reports_line() {
        let doc = ROOT_ONLY.replacen("0 0 0 0 0 0\n0", "0 0 0 0 0 0\nq", 1);
        match parse_bvh(&doc).unwrap_err() {
            MotionError::Parse { line, message } => {
                assert_eq!(line, 11);
                assert!(message.contains("non-numeric"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn channel_count_mismatch() {
        let doc = ROOT_ONLY.replacen("0 0 0 0 0 0\n", "0 0 0 0 0\n", 1);
        assert!(matches!(parse_bvh(&doc), Err(MotionError::Parse { line: 10, .. })));
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(
            parse_bvh("HIERARCHY\nROOT A\n{\nOFFSET 0 0\n}\nMOTION\nFrames: 1\nFrame Time: 0.1\n"),
            Err(MotionError::Parse { .. })
        ));
        assert!(matches!(parse_bvh("nothing here"), Err(MotionError::Parse { .. })));
        let bad_channel = ROOT_ONLY.replace("Yrotation", "Wrotation");
        assert!(matches!(parse_bvh(&bad_channel), Err(MotionError::Parse { line: 5, .. })));
    }

    #[test]
    fn write_then_parse_is_identity() {
        let (sk, clip) = parse_bvh(CHAIN).unwrap();
        let text = write_bvh(&sk, &clip).unwrap();
        let (sk2, clip2) = parse_bvh(&text).unwrap();
        assert_eq!(sk, sk2);
        assert_eq!(clip, clip2);
    }
}
