use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

/// A decoded point: dimension name to value.
pub type Assignment = Map<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dimension {
    Continuous { lo: f64, hi: f64 },
    /// Every integer in `lo..=hi`, treated as an evenly spaced grid.
    Integer { lo: i64, hi: i64 },
    Discrete { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDimension {
    pub name: String,
    #[serde(flatten)]
    pub dim: Dimension,
}

/// Ordered hyper-parameter dimensions, each encoded onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub dims: Vec<NamedDimension>,
}

impl Dimension {
    fn grid_size(&self) -> Option<usize> {
        match self {
            Dimension::Continuous { .. } => None,
            Dimension::Integer { lo, hi } => Some((hi - lo) as usize + 1),
            Dimension::Discrete { values } => Some(values.len()),
        }
    }

    /// Nearest grid index for an encoded coordinate.
    fn grid_index(&self, u: f64) -> usize {
        let k = self.grid_size().expect("grid dimension");
        if k == 1 {
            0
        } else {
            (u.clamp(0.0, 1.0) * (k - 1) as f64).round() as usize
        }
    }

    fn grid_point(k: usize, i: usize) -> f64 {
        if k == 1 {
            0.5
        } else {
            i as f64 / (k - 1) as f64
        }
    }

    /// Snaps an encoded coordinate onto the representable set.
    pub fn snap(&self, u: f64) -> f64 {
        match self.grid_size() {
            None => u.clamp(0.0, 1.0),
            Some(k) => Self::grid_point(k, self.grid_index(u)),
        }
    }

    pub fn decode(&self, u: f64) -> Value {
        match self {
            Dimension::Continuous { lo, hi } => number(lo + u.clamp(0.0, 1.0) * (hi - lo)),
            Dimension::Integer { lo, .. } => Value::from(lo + self.grid_index(u) as i64),
            Dimension::Discrete { values } => number(values[self.grid_index(u)]),
        }
    }

    pub fn encode(&self, v: f64) -> Result<f64> {
        match self {
            Dimension::Continuous { lo, hi } => {
                if v < *lo || v > *hi {
                    return Err(Error::InvalidArgument(format!("{v} outside [{lo}, {hi}]")));
                }
                Ok((v - lo) / (hi - lo))
            }
            Dimension::Integer { lo, hi } => {
                if v.fract() != 0.0 || v < *lo as f64 || v > *hi as f64 {
                    return Err(Error::InvalidArgument(format!("{v} is not an integer in {lo}..={hi}")));
                }
                Ok(Self::grid_point(self.grid_size().unwrap(), (v as i64 - lo) as usize))
            }
            Dimension::Discrete { values } => {
                let i = values
                    .iter()
                    .position(|x| *x == v)
                    .ok_or_else(|| Error::InvalidArgument(format!("{v} is not one of {values:?}")))?;
                Ok(Self::grid_point(values.len(), i))
            }
        }
    }

    /// Uniform draw: continuous dims uniformly, grid dims uniformly over their points.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.grid_size() {
            None => rng.gen::<f64>(),
            Some(k) => Self::grid_point(k, rng.gen_range(0..k)),
        }
    }

    /// Spacing between neighbouring grid points, if any.
    pub fn grid_step(&self) -> Option<f64> {
        self.grid_size().map(|k| if k > 1 { 1.0 / (k - 1) as f64 } else { 0.0 })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Dimension::Continuous { lo, hi } if !(lo < hi) => {
                Err(Error::Config(format!("continuous bounds need lo < hi, got [{lo}, {hi}]")))
            }
            Dimension::Integer { lo, hi } if lo > hi => {
                Err(Error::Config(format!("integer bounds need lo <= hi, got {lo}..={hi}")))
            }
            Dimension::Discrete { values } if values.is_empty() => {
                Err(Error::Config("discrete dimension has no values".into()))
            }
            Dimension::Discrete { values } if values.iter().any(|v| !v.is_finite()) => {
                Err(Error::Config("discrete values must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
    }
}

impl SearchSpace {
    pub fn new(dims: Vec<NamedDimension>) -> Result<Self> {
        let space = SearchSpace { dims };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Config("search space has no dimensions".into()));
        }
        for (i, d) in self.dims.iter().enumerate() {
            d.dim.validate()?;
            if self.dims[..i].iter().any(|e| e.name == d.name) {
                return Err(Error::Config(format!("dimension {} appears twice", d.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Hidden size 64..512, hops 1..4, heads {2, 4, 10}, dropout 0.1..0.6,
    /// warmup 500..4000.
    pub fn default_utrs() -> Self {
        let dim = |name: &str, dim| NamedDimension {
            name: name.into(),
            dim,
        };
        SearchSpace {
            dims: vec![
                dim("hidden_size", Dimension::Integer { lo: 64, hi: 512 }),
                dim("hops", Dimension::Integer { lo: 1, hi: 4 }),
                dim(
                    "n_heads",
                    Dimension::Discrete {
                        values: vec![2.0, 4.0, 10.0],
                    },
                ),
                dim("dropout", Dimension::Continuous { lo: 0.1, hi: 0.6 }),
                dim("warmup", Dimension::Integer { lo: 500, hi: 4000 }),
            ],
        }
    }

    pub fn snap(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.dims).map(|(u, d)| d.dim.snap(*u)).collect()
    }

    pub fn decode(&self, x: &[f64]) -> Result<Assignment> {
        if x.len() != self.len() {
            return Err(Error::Shape(format!("point has {} coordinates, space has {}", x.len(), self.len())));
        }
        Ok(self
            .dims
            .iter()
            .zip(x)
            .map(|(d, u)| (d.name.clone(), d.dim.decode(*u)))
            .collect())
    }

    pub fn encode(&self, assignment: &Assignment) -> Result<Vec<f64>> {
        self.dims
            .iter()
            .map(|d| {
                let v = assignment
                    .get(&d.name)
                    .and_then(Value::as_f64)
                    .ok_or_else(|| Error::InvalidArgument(format!("missing numeric value for {}", d.name)))?;
                d.dim.encode(v)
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.dims.iter().map(|d| d.dim.sample(rng)).collect()
    }
}
