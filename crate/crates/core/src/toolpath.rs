//! Machine-facing raster geometry.
//!
//! Text format, one polyline per line, coordinates in millimetres:
//!
//! ```text
//! layer=3 passes=5 : 0.000000,0.000000 0.200000,0.000000
//! ```

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolpathError {
    #[error("invalid polyline: {0}")]
    Invalid(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl ToolpathError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Invalid(_) => "Invalid",
            Self::Parse { .. } => "Parse",
            Self::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for ToolpathError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Points in mm, tagged with the layer it machines and its pass count.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub layer: usize,
    pub passes: u32,
    pub points: Vec<[f64; 2]>,
}

impl Polyline {
    pub fn new(layer: usize, passes: u32, points: Vec<[f64; 2]>) -> Result<Self, ToolpathError> {
        if points.len() < 2 {
            return Err(ToolpathError::Invalid("a polyline needs at least two points".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ToolpathError::Invalid("non-finite coordinate".into()));
        }
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(ToolpathError::Invalid("consecutive duplicate points".into()));
        }
        Ok(Self { layer, passes, points })
    }

    /// Path length in mm.
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Toolpath {
    pub polylines: Vec<Polyline>,
}

impl Toolpath {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, p: Polyline) {
        self.polylines.push(p);
    }

    pub fn len(&self) -> usize {
        self.polylines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    /// Total cutting length in mm, not counting pass repetition.
    pub fn total_length(&self) -> f64 {
        self.polylines.iter().map(Polyline::length).sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.polylines {
            let _ = write!(s, "layer={} passes={} :", p.layer, p.passes);
            for [x, y] in &p.points {
                let _ = write!(s, " {x:.6},{y:.6}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<(), ToolpathError> {
        out.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, ToolpathError> {
        let mut tp = Toolpath::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let err = |m: &str| ToolpathError::Parse {
                line: lineno,
                message: m.to_string(),
            };
            let (head, body) = trimmed.split_once(':').ok_or_else(|| err("missing `:` separator"))?;
            let mut layer = None;
            let mut passes = None;
            for tok in head.split_whitespace() {
                match tok.split_once('=') {
                    Some(("layer", v)) => layer = v.parse().ok(),
                    Some(("passes", v)) => passes = v.parse().ok(),
                    _ => return Err(err(&format!("unexpected token `{tok}`"))),
                }
            }
            let points = body
                .split_whitespace()
                .map(|pt| {
                    let (x, y) = pt.split_once(',').ok_or_else(|| err(&format!("bad point `{pt}`")))?;
                    Ok([
                        x.parse().map_err(|_| err(&format!("bad x `{x}`")))?,
                        y.parse().map_err(|_| err(&format!("bad y `{y}`")))?,
                    ])
                })
                .collect::<Result<Vec<[f64; 2]>, ToolpathError>>()?;
            let p = Polyline::new(
                layer.ok_or_else(|| err("missing layer="))?,
                passes.ok_or_else(|| err("missing passes="))?,
                points,
            )
            .map_err(|e| err(&e.to_string()))?;
            tp.push(p);
        }
        Ok(tp)
    }

    /// Minimal DXF with one LWPOLYLINE per polyline, layer named `L<k>_P<passes>`.
    pub fn to_dxf(&self) -> String {
        let mut s = String::new();
        s.push_str("0\nSECTION\n2\nHEADER\n9\n$ACADVER\n1\nAC1015\n9\n$INSUNITS\n70\n4\n0\nENDSEC\n");
        s.push_str("0\nSECTION\n2\nENTITIES\n");
        for p in &self.polylines {
            let _ = write!(s, "0\nLWPOLYLINE\n8\nL{}_P{}\n90\n{}\n70\n0\n", p.layer, p.passes, p.points.len());
            for [x, y] in &p.points {
                let _ = write!(s, "10\n{x:.6}\n20\n{y:.6}\n");
            }
        }
        s.push_str("0\nENDSEC\n0\nEOF\n");
        s
    }
}
