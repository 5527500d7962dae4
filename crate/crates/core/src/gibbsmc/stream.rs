//! Line-delimited sample files.
//!
//! ```text
//! # markedgibbs-samples v1 dimension=1 mark=label
//! 2 0.125 1 0.5 -1
//! 0
//! ```
//!
//! After the header, each line holds one configuration: the point count,
//! then for every point its coordinates followed by its mark. Marks are
//! written as integers for `label` and as floats for `angle` and `real`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{canonicalize, FiniteConfiguration, Mark, MarkSpace, MarkedPoint};

pub const STREAM_HEADER: &str = "# markedgibbs-samples v1";

fn mark_kind(marks: &MarkSpace) -> &'static str {
    match marks {
        MarkSpace::Discrete { .. } => "label",
        MarkSpace::Circle { .. } => "angle",
        MarkSpace::Interval { .. } => "real",
    }
}

pub struct SampleWriter<W: Write> {
    inner: W,
    dimension: usize,
}

impl<W: Write> SampleWriter<W> {
    pub fn new(mut inner: W, dimension: usize, marks: &MarkSpace) -> std::io::Result<Self> {
        writeln!(inner, "{STREAM_HEADER} dimension={dimension} mark={}", mark_kind(marks))?;
        Ok(Self { inner, dimension })
    }

    pub fn write(&mut self, config: &FiniteConfiguration) -> std::io::Result<()> {
        let mut line = config.len().to_string();
        for p in config {
            debug_assert_eq!(p.position.len(), self.dimension);
            for x in &p.position {
                line.push(' ');
                line.push_str(&format!("{x:?}"));
            }
            line.push(' ');
            match p.mark {
                Mark::Label(l) => line.push_str(&l.to_string()),
                Mark::Angle(v) | Mark::Real(v) => line.push_str(&format!("{v:?}")),
            }
        }
        writeln!(self.inner, "{line}")
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidModel(format!("sample stream: {}", msg.into()))
}

pub fn read_sample_stream<R: BufRead>(reader: R) -> Result<Vec<FiniteConfiguration>> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?.map_err(|e| bad(e.to_string()))?;
    let rest = header.strip_prefix(STREAM_HEADER).ok_or_else(|| bad("missing header"))?;
    let mut dimension = None;
    let mut kind = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("dimension", v)) => dimension = v.parse::<usize>().ok(),
            Some(("mark", v)) => kind = Some(v.to_string()),
            _ => return Err(bad(format!("unknown header field `{field}`"))),
        }
    }
    let dimension = dimension.ok_or_else(|| bad("header lacks dimension"))?;
    let kind = kind.ok_or_else(|| bad("header lacks mark kind"))?;
    let mut out = Vec::new();
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        let mut tok = line.split_whitespace();
        let n: usize = tok
            .next()
            .ok_or_else(|| bad("blank line"))?
            .parse()
            .map_err(|_| bad("bad count"))?;
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            let mut pos = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                pos.push(tok.next().ok_or_else(|| bad("short line"))?.parse::<f64>().map_err(|_| bad("bad coordinate"))?);
            }
            let m = tok.next().ok_or_else(|| bad("short line"))?;
            let mark = match kind.as_str() {
                "label" => Mark::Label(m.parse().map_err(|_| bad("bad label"))?),
                "angle" => Mark::Angle(m.parse().map_err(|_| bad("bad angle"))?),
                "real" => Mark::Real(m.parse().map_err(|_| bad("bad mark"))?),
                other => return Err(bad(format!("unknown mark kind `{other}`"))),
            };
            pts.push(MarkedPoint::new(pos, mark));
        }
        if tok.next().is_some() {
            return Err(bad("trailing tokens"));
        }
        out.push(canonicalize(pts)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let c = canonicalize(vec![
            MarkedPoint::new(vec![0.5], Mark::Label(-1)),
            MarkedPoint::new(vec![0.125], Mark::Label(1)),
        ])
        .unwrap();
        let mut w = SampleWriter::new(Vec::new(), 1, &MarkSpace::spins()).unwrap();
        w.write(&c).unwrap();
        w.write(&FiniteConfiguration::empty()).unwrap();
        let bytes = w.into_inner();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text, "# markedgibbs-samples v1 dimension=1 mark=label\n2 0.125 1 0.5 -1\n0\n");
        let back = read_sample_stream(&bytes[..]).unwrap();
        assert_eq!(back, vec![c, FiniteConfiguration::empty()]);
    }
}
