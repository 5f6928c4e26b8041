//! Line-delimited skeleton streams, ground-truth segment lists and detection
//! records.
//!
//! A stream record is `{"t": seconds, "persons": [{"joints": [[x, y], ...],
//! "conf": [...], "id": optional}]}`, one frame per line. Joints with zero
//! confidence are treated as missing.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::detector::DetectionEvent;
use crate::error::{Error, Result};
use crate::skeleton::{Segment, SkeletonFrame, SkeletonLayout, SkeletonSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PersonRecord {
    joints: Vec<Vec<f64>>,
    conf: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FrameRecord {
    t: f64,
    persons: Vec<PersonRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    pub id: Option<u64>,
    pub skeleton: SkeletonFrame,
}

/// One parsed line. `frame_index` counts records from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFrame {
    pub frame_index: u64,
    pub t: f64,
    pub persons: Vec<Person>,
}

fn to_frame(rec: FrameRecord, index: u64, layout: &SkeletonLayout, line: usize) -> Result<StreamFrame> {
    let persons = rec
        .persons
        .into_iter()
        .enumerate()
        .map(|(pi, p)| {
            let mismatch = |message: String| Error::LayoutMismatch { line, message };
            if p.joints.len() != layout.joint_count() {
                return Err(mismatch(format!(
                    "person {pi} has {} joints, layout {} has {}",
                    p.joints.len(),
                    layout.name,
                    layout.joint_count()
                )));
            }
            if p.conf.len() != p.joints.len() {
                return Err(mismatch(format!(
                    "person {pi} has {} confidences for {} joints",
                    p.conf.len(),
                    p.joints.len()
                )));
            }
            if let Some(j) = p.joints.iter().position(|c| c.len() != layout.dims) {
                return Err(mismatch(format!(
                    "person {pi} joint {j} has {} coordinates, expected {}",
                    p.joints[j].len(),
                    layout.dims
                )));
            }
            let valid = p.conf.iter().map(|&c| c > 0.0).collect();
            let joints = p.joints.into_iter().flatten().collect();
            let skeleton =
                SkeletonFrame::new(index, rec.t, layout.dims, joints, p.conf, valid).map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?;
            Ok(Person { id: p.id, skeleton })
        })
        .collect::<Result<_>>()?;
    Ok(StreamFrame {
        frame_index: index,
        t: rec.t,
        persons,
    })
}

/// Frame-at-a-time reader; nothing beyond the current line is buffered.
pub struct StreamReader<R> {
    input: R,
    layout: SkeletonLayout,
    line: usize,
    next_index: u64,
    buf: String,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(input: R, layout: SkeletonLayout) -> Self {
        Self {
            input,
            layout,
            line: 0,
            next_index: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<StreamFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            if self.buf.trim().is_empty() {
                continue;
            }
            let line = self.line;
            let rec: FrameRecord = match serde_json::from_str(&self.buf) {
                Ok(r) => r,
                Err(e) => {
                    return Some(Err(Error::Parse {
                        line,
                        message: e.to_string(),
                    }))
                }
            };
            let index = self.next_index;
            self.next_index += 1;
            return Some(to_frame(rec, index, &self.layout, line));
        }
    }
}

pub fn parse_stream(text: &str, layout: &SkeletonLayout) -> Result<Vec<StreamFrame>> {
    StreamReader::new(text.as_bytes(), layout.clone()).collect()
}

/// Writes frames in the stream format. Missing joints are written with zero confidence.
pub fn write_stream<W: Write>(mut out: W, frames: &[StreamFrame]) -> Result<()> {
    for f in frames {
        let rec = FrameRecord {
            t: f.t,
            persons: f
                .persons
                .iter()
                .map(|p| {
                    let s = &p.skeleton;
                    PersonRecord {
                        joints: s.joints.chunks(s.dims).map(<[f64]>::to_vec).collect(),
                        conf: s
                            .confidence
                            .iter()
                            .zip(&s.valid)
                            .map(|(&c, &v)| if v { c } else { 0.0 })
                            .collect(),
                        id: p.id,
                    }
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Ground truth is a JSON array of `{class, start_frame, end_frame}` records;
/// one record per line is accepted as well.
pub fn parse_ground_truth(text: &str) -> Result<Vec<Segment>> {
    let parse_err = |e: serde_json::Error| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    };
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(parse_err);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_ground_truth<W: Write>(out: W, segments: &[Segment]) -> Result<()> {
    serde_json::to_writer_pretty(out, segments).map_err(std::io::Error::from)?;
    Ok(())
}

/// Cuts labeled sequences out of a stream: one sequence per segment, taken
/// from the first person of each frame in the segment.
pub fn cut_sequences(
    frames: &[StreamFrame],
    segments: &[Segment],
    layout: &SkeletonLayout,
    source: &str,
) -> Result<Vec<SkeletonSequence>> {
    segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let picked: Vec<SkeletonFrame> = frames
                .iter()
                .filter(|f| (s.start_frame..=s.end_frame).contains(&f.frame_index))
                .filter_map(|f| f.persons.first().map(|p| p.skeleton.clone()))
                .collect();
            SkeletonSequence::new(layout, picked, Some(s.class_id.clone()), format!("{source}#{i}"))
        })
        .collect()
}

/// One detection per output line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub class: String,
    pub person: u64,
    pub start_frame: u64,
    pub end_frame: u64,
    pub score: f64,
    pub probability: f64,
}

impl From<&DetectionEvent> for EventRecord {
    fn from(e: &DetectionEvent) -> Self {
        Self {
            class: e.class.clone(),
            person: e.person_id,
            start_frame: e.start_frame,
            end_frame: e.end_frame,
            score: e.score,
            probability: e.probability,
        }
    }
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event records always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, conf: f64) -> String {
        let joints: Vec<[f64; 2]> = (0..n).map(|i| [i as f64, 0.5]).collect();
        serde_json::json!({"t": 0.5, "persons": [{"joints": joints, "conf": vec![conf; n], "id": 3}]}).to_string()
    }

    #[test]
    fn empty_input() {
        assert!(parse_stream("", &SkeletonLayout::openpose18()).unwrap().is_empty());
    }

    #[test]
    fn one_person() {
        let frames = parse_stream(&line(18, 0.9), &SkeletonLayout::openpose18()).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].persons.len(), 1);
        assert_eq!(frames[0].persons[0].id, Some(3));
        assert_eq!(frames[0].persons[0].skeleton.joint(4), &[4.0, 0.5]);
    }

    #[test]
    fn zero_confidence_is_missing() {
        let frames = parse_stream(&line(18, 0.0), &SkeletonLayout::openpose18()).unwrap();
        assert!(frames[0].persons[0].skeleton.valid.iter().all(|v| !v));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let layout = SkeletonLayout::openpose18();
        let text = format!("{}\n\n{{not json\n", line(18, 1.0));
        assert!(matches!(
            parse_stream(&text, &layout),
            Err(Error::Parse { line: 3, .. })
        ));
        let text = format!("{}\n{}\n", line(18, 1.0), line(17, 1.0));
        assert!(matches!(
            parse_stream(&text, &layout),
            Err(Error::LayoutMismatch { line: 2, .. })
        ));
        let bad_conf = line(18, 1.5);
        assert!(matches!(
            parse_stream(&bad_conf, &layout),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn ground_truth_both_forms() {
        let arr = r#"[{"class":"waving","start_frame":1,"end_frame":4}]"#;
        let lines = "{\"class\":\"waving\",\"start_frame\":1,\"end_frame\":4}\n";
        assert_eq!(parse_ground_truth(arr).unwrap(), parse_ground_truth(lines).unwrap());
        let mut buf = Vec::new();
        let segs = parse_ground_truth(arr).unwrap();
        write_ground_truth(&mut buf, &segs).unwrap();
        assert_eq!(parse_ground_truth(std::str::from_utf8(&buf).unwrap()).unwrap(), segs);
    }

    #[test]
    fn event_record_fields() {
        let r = EventRecord {
            class: "waving".into(),
            person: 2,
            start_frame: 3,
            end_frame: 9,
            score: 1.5,
            probability: 0.75,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_line()).unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["class", "end_frame", "person", "probability", "score", "start_frame"]
        );
    }
}
