//! NTU RGB+D `.skeleton` text files.
//!
//! Layout: frame count; per frame a body count; per body a header line (body id
//! first), a joint count, then one line per joint whose first three values are
//! camera-space x, y, z. Only coordinates are read.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::skeleton::{SkeletonFrame, SkeletonLayout, SkeletonSequence};

const FPS: f64 = 30.0;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank line with its 1-based number.
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        loop {
            match self.inner.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => return Ok((i + 1, l.trim())),
                None => {
                    return Err(Error::TruncatedFile {
                        line: 0,
                        message: format!("end of file while reading {what}"),
                    })
                }
            }
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let (line, l) = self.next(what)?;
        l.parse().map_err(|_| Error::MalformedHeader {
            line,
            message: format!("expected {what}, got {l:?}"),
        })
    }
}

/// Parses an NTU skeleton file, keeping the body present in the most frames.
pub fn parse_ntu_skeleton(text: &str, source_id: &str) -> Result<SkeletonSequence> {
    let layout = SkeletonLayout::ntu25();
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let n_frames = match lines.count("frame count") {
        Err(Error::TruncatedFile { .. }) => 0,
        r => r?,
    };
    // body id -> frames, in order of first appearance
    let mut bodies: Vec<(String, Vec<SkeletonFrame>)> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for f in 0..n_frames {
        let n_bodies = lines.count("body count")?;
        for _ in 0..n_bodies {
            let (line, header) = lines.next("body header")?;
            let id = header
                .split_whitespace()
                .next()
                .ok_or_else(|| Error::MalformedHeader {
                    line,
                    message: "empty body header".into(),
                })?
                .to_string();
            let n_joints = lines.count("joint count")?;
            if n_joints != layout.joint_count() {
                return Err(Error::MalformedHeader {
                    line: line + 1,
                    message: format!("expected {} joints, got {n_joints}", layout.joint_count()),
                });
            }
            let mut coords = Vec::with_capacity(3 * n_joints);
            for _ in 0..n_joints {
                let (line, l) = lines.next("joint line")?;
                let xyz: Vec<f64> = l
                    .split_whitespace()
                    .take(3)
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::TruncatedFile {
                        line,
                        message: format!("unreadable joint coordinates {l:?}"),
                    })?;
                if xyz.len() < 3 {
                    return Err(Error::TruncatedFile {
                        line,
                        message: format!("joint line has {} values, need 3", xyz.len()),
                    });
                }
                coords.extend(xyz);
            }
            let frame = SkeletonFrame::fully_valid(f as u64, f as f64 / FPS, 3, coords)?;
            let k = *slot.entry(id.clone()).or_insert_with(|| {
                bodies.push((id, Vec::new()));
                bodies.len() - 1
            });
            bodies[k].1.push(frame);
        }
    }
    let mut best: Option<Vec<SkeletonFrame>> = None;
    for (_, frames) in bodies {
        if best.as_ref().is_none_or(|b| frames.len() > b.len()) {
            best = Some(frames);
        }
    }
    SkeletonSequence::new(&layout, best.unwrap_or_default(), None, source_id)
}

/// Writes a single-body NTU skeleton file. Only x, y, z are meaningful; the
/// other per-joint fields are zero.
pub fn write_ntu_skeleton(seq: &SkeletonSequence) -> String {
    let mut s = format!("{}\n", seq.frames.len());
    for f in &seq.frames {
        s.push_str("1\n72057594037931101 0 1 1 1 1 0 0 0 2\n");
        let _ = writeln!(s, "{}", f.joint_count());
        for j in 0..f.joint_count() {
            let p = f.joint(j);
            let _ = writeln!(s, "{} {} {} 0 0 0 0 0 0 0 0 2", p[0], p[1], p[2]);
        }
    }
    s
}
