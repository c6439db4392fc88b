//! Labelled and unlabelled sample sets with a plain CSV format.
//!
//! The header is `x0,...,x{d-1}` optionally followed by `y0,...,y{m-1}`.
//! Values are written in Rust's shortest round-trip decimal form, so reading
//! a written file gives back the same bits.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Vector;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vector,
    pub y: Option<Vector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    x_dim: usize,
    y_dim: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    /// All inputs must share a width; labels, if given, must match in count
    /// and share a width.
    pub fn new(name: impl Into<String>, inputs: Vec<Vector>, labels: Option<Vec<Vector>>) -> Result<Self> {
        let x_dim = inputs.first().map_or(0, |x| x.len());
        if let Some(i) = inputs.iter().position(|x| x.len() != x_dim) {
            return Err(Error::Dataset(format!("input {i} has width {}, expected {x_dim}", inputs[i].len())));
        }
        let (y_dim, labels) = match labels {
            None => (0, vec![None; inputs.len()]),
            Some(ls) => {
                if ls.len() != inputs.len() {
                    return Err(Error::Dataset(format!("{} inputs but {} labels", inputs.len(), ls.len())));
                }
                let m = ls.first().map_or(0, |y| y.len());
                if let Some(i) = ls.iter().position(|y| y.len() != m) {
                    return Err(Error::Dataset(format!("label {i} has width {}, expected {m}", ls[i].len())));
                }
                (m, ls.into_iter().map(Some).collect())
            }
        };
        let samples = inputs.into_iter().zip(labels).map(|(x, y)| Sample { x, y }).collect();
        Ok(Dataset {
            name: name.into(),
            x_dim,
            y_dim,
            samples,
        })
    }

    /// The four XOR points, `(0,0)→0, (0,1)→1, (1,0)→1, (1,1)→0`.
    pub fn xor() -> Self {
        let pts = [([0.0, 0.0], 0.0), ([0.0, 1.0], 1.0), ([1.0, 0.0], 1.0), ([1.0, 1.0], 0.0)];
        Dataset::new(
            "xor",
            pts.iter().map(|(x, _)| Vector::from(&x[..])).collect(),
            Some(pts.iter().map(|&(_, y)| Vector::from(vec![y])).collect()),
        )
        .expect("fixed data")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn is_labelled(&self) -> bool {
        self.y_dim > 0
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let header: Vec<String> = (0..self.x_dim)
            .map(|i| format!("x{i}"))
            .chain((0..self.y_dim).map(|i| format!("y{i}")))
            .collect();
        out.write_record(&header)?;
        for s in &self.samples {
            let row: Vec<String> = s
                .x
                .iter()
                .chain(s.y.iter().flat_map(|y| y.iter()))
                .map(|v| v.to_string())
                .collect();
            out.write_record(&row)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(name: impl Into<String>, r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let mut x_cols = 0;
        let mut y_cols = 0;
        for (i, h) in header.iter().enumerate() {
            let h = h.trim();
            if h == format!("x{x_cols}") && y_cols == 0 {
                x_cols += 1;
            } else if h == format!("y{y_cols}") {
                y_cols += 1;
            } else {
                return Err(Error::Dataset(format!("unexpected header `{h}` in column {i}")));
            }
        }
        if x_cols == 0 {
            return Err(Error::Dataset("no x columns".into()));
        }
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::Dataset(format!("row {}: column {c}: cannot parse `{s}`", line + 1))
                    })
                })
                .collect::<Result<_>>()?;
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("row {}: non-finite value", line + 1)));
            }
            inputs.push(Vector::from(&vals[..x_cols]));
            labels.push(Vector::from(&vals[x_cols..]));
        }
        Dataset::new(name, inputs, (y_cols > 0).then_some(labels))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
        Dataset::read_csv(name, std::io::BufReader::new(f))
    }
}
