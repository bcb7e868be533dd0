//! Objective functions h_s whose smoothed expectations are estimated.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named objective applied to the first state coordinate.
///
/// `Custom` names are resolved from a fixed registry: `abs`, `exp`, `cube`,
/// `positive` (indicator of x > 0), `sum` (all coordinates) and `norm_sq`
/// (squared Euclidean norm).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Objective {
    Identity,
    Square,
    Custom(String),
}

const CUSTOM_NAMES: &[&str] = &["abs", "exp", "cube", "positive", "sum", "norm_sq"];

impl Objective {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "identity" | "id" => Ok(Objective::Identity),
            "square" => Ok(Objective::Square),
            other if CUSTOM_NAMES.contains(&other) => Ok(Objective::Custom(other.to_string())),
            other => Err(Error::Config(format!(
                "unknown objective '{other}' (expected identity, square or one of {CUSTOM_NAMES:?})"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Objective::Identity => "identity",
            Objective::Square => "square",
            Objective::Custom(n) => n,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Identity => x[0],
            Objective::Square => x[0] * x[0],
            Objective::Custom(n) => match n.as_str() {
                "abs" => x[0].abs(),
                "exp" => x[0].exp(),
                "cube" => x[0] * x[0] * x[0],
                "positive" => f64::from(u8::from(x[0] > 0.0)),
                "sum" => x.iter().sum(),
                "norm_sq" => x.iter().map(|v| v * v).sum(),
                _ => unreachable!("custom objective names are validated on construction"),
            },
        }
    }

    /// (α, β) with h(x) = αᵀx + β, when the objective is affine.
    pub fn affine(&self, state_dim: usize) -> Option<(DVector<f64>, f64)> {
        match self {
            Objective::Identity => {
                let mut alpha = DVector::zeros(state_dim);
                alpha[0] = 1.0;
                Some((alpha, 0.0))
            }
            Objective::Custom(n) if n == "sum" => Some((DVector::from_element(state_dim, 1.0), 0.0)),
            _ => None,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for Objective {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Objective::parse(&value)
    }
}

impl From<Objective> for String {
    fn from(o: Objective) -> String {
        o.name().to_string()
    }
}

/// The family {h_s} handed to a smoother. Marginals for which
/// [`applies`](Self::applies) is false are never activated.
pub trait Objectives: Sync {
    fn applies(&self, s: usize) -> bool;
    fn eval(&self, s: usize, x: &[f64]) -> f64;
}

impl Objectives for Objective {
    fn applies(&self, _s: usize) -> bool {
        true
    }

    fn eval(&self, _s: usize, x: &[f64]) -> f64 {
        Objective::eval(self, x)
    }
}

/// A single marginal of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub index: usize,
    pub objective: Objective,
}

impl Objectives for Probe {
    fn applies(&self, s: usize) -> bool {
        s == self.index
    }

    fn eval(&self, _s: usize, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }
}

impl<F> Objectives for F
where
    F: Fn(usize, &[f64]) -> f64 + Sync,
{
    fn applies(&self, _s: usize) -> bool {
        true
    }

    fn eval(&self, s: usize, x: &[f64]) -> f64 {
        self(s, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_eval() {
        assert_eq!(Objective::parse("identity").unwrap().eval(&[3.0]), 3.0);
        assert_eq!(Objective::parse("square").unwrap().eval(&[3.0]), 9.0);
        assert_eq!(Objective::parse("norm_sq").unwrap().eval(&[3.0, 4.0]), 25.0);
        assert!(Objective::parse("nope").is_err());
    }

    #[test]
    fn serde_uses_names() {
        let o: Objective = serde_json::from_str("\"square\"").unwrap();
        assert_eq!(o, Objective::Square);
        assert_eq!(serde_json::to_string(&Objective::Identity).unwrap(), "\"identity\"");
        assert!(serde_json::from_str::<Objective>("\"bogus\"").is_err());
    }

    #[test]
    fn affine_forms() {
        let (a, b) = Objective::Identity.affine(2).unwrap();
        assert_eq!(a.as_slice(), &[1.0, 0.0]);
        assert_eq!(b, 0.0);
        assert!(Objective::Square.affine(1).is_none());
    }
}
