//! Vectors in R^r indexed by the blocks of a cone (ν, μ, α, β, γ, b, τ).

use crate::error::{Error, Result};
use crate::rational::{format_rat, parse_rat_list, to_f64, Rat};
use num_traits::{Signed, Zero};

#[derive(Clone, Debug, PartialEq)]
pub enum WeightVector {
    Exact(Vec<Rat>),
    Float(Vec<f64>),
}

impl WeightVector {
    pub fn exact(entries: Vec<Rat>) -> WeightVector {
        WeightVector::Exact(entries)
    }

    pub fn float(entries: Vec<f64>) -> WeightVector {
        WeightVector::Float(entries)
    }

    /// A scalar β is identified with (β,…,β).
    pub fn broadcast(value: Rat, r: usize) -> WeightVector {
        WeightVector::Exact(vec![value; r])
    }

    pub fn zeros(r: usize) -> WeightVector {
        WeightVector::Exact(vec![Rat::zero(); r])
    }

    /// Comma list of rationals; a single entry broadcasts to length r.
    pub fn parse(text: &str, r: usize) -> Result<WeightVector> {
        let vals = parse_rat_list(text)?;
        WeightVector::Exact(vals).fit(r)
    }

    /// Broadcasts length-1 vectors and checks the length.
    pub fn fit(self, r: usize) -> Result<WeightVector> {
        if self.len() == r {
            return Ok(self);
        }
        if self.len() == 1 {
            return Ok(match self {
                WeightVector::Exact(v) => WeightVector::Exact(vec![v[0].clone(); r]),
                WeightVector::Float(v) => WeightVector::Float(vec![v[0]; r]),
            });
        }
        Err(Error::LengthMismatch { expected: r, got: self.len() })
    }

    pub fn len(&self) -> usize {
        match self {
            WeightVector::Exact(v) => v.len(),
            WeightVector::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, WeightVector::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&[Rat]> {
        match self {
            WeightVector::Exact(v) => Some(v),
            WeightVector::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            WeightVector::Exact(v) => v.iter().map(to_f64).collect(),
            WeightVector::Float(v) => v.clone(),
        }
    }

    pub fn get(&self, j: usize) -> f64 {
        match self {
            WeightVector::Exact(v) => to_f64(&v[j]),
            WeightVector::Float(v) => v[j],
        }
    }

    fn zip_with(
        &self,
        other: &WeightVector,
        exact: impl Fn(&Rat, &Rat) -> Rat,
        float: impl Fn(f64, f64) -> f64,
    ) -> WeightVector {
        assert_eq!(self.len(), other.len(), "weight vectors of different rank");
        match (self, other) {
            (WeightVector::Exact(a), WeightVector::Exact(b)) => {
                WeightVector::Exact(a.iter().zip(b).map(|(x, y)| exact(x, y)).collect())
            }
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                WeightVector::Float(a.iter().zip(&b).map(|(x, y)| float(*x, *y)).collect())
            }
        }
    }

    pub fn add(&self, other: &WeightVector) -> WeightVector {
        self.zip_with(other, |a, b| a + b, |a, b| a + b)
    }

    pub fn sub(&self, other: &WeightVector) -> WeightVector {
        self.zip_with(other, |a, b| a - b, |a, b| a - b)
    }

    pub fn neg(&self) -> WeightVector {
        match self {
            WeightVector::Exact(v) => WeightVector::Exact(v.iter().map(|x| -x).collect()),
            WeightVector::Float(v) => WeightVector::Float(v.iter().map(|x| -x).collect()),
        }
    }

    pub fn scale(&self, c: &Rat) -> WeightVector {
        match self {
            WeightVector::Exact(v) => WeightVector::Exact(v.iter().map(|x| x * c).collect()),
            WeightVector::Float(v) => {
                let c = to_f64(c);
                WeightVector::Float(v.iter().map(|x| x * c).collect())
            }
        }
    }

    pub fn scale_f64(&self, c: f64) -> WeightVector {
        WeightVector::Float(self.to_f64().iter().map(|x| x * c).collect())
    }

    /// |ν| = Σ ν_j, exact when possible.
    pub fn total(&self) -> f64 {
        self.to_f64().iter().sum()
    }

    pub fn total_exact(&self) -> Option<Rat> {
        self.as_exact().map(|v| v.iter().fold(Rat::zero(), |acc, x| acc + x))
    }

    pub fn all_positive(&self) -> bool {
        match self {
            WeightVector::Exact(v) => v.iter().all(|x| x.is_positive()),
            WeightVector::Float(v) => v.iter().all(|x| *x > 0.0),
        }
    }

    pub fn to_strings(&self) -> Vec<String> {
        match self {
            WeightVector::Exact(v) => v.iter().map(format_rat).collect(),
            WeightVector::Float(v) => v.iter().map(|x| format!("{x}")).collect(),
        }
    }
}

impl serde::Serialize for WeightVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            WeightVector::Exact(_) => self.to_strings().serialize(s),
            WeightVector::Float(v) => v.serialize(s),
        }
    }
}
