//! A reliability problem: independent input marginals plus a scalar
//! performance function whose non-positive set is the failure domain.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::math::MarginalDistribution;

type PerformanceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    marginals: Vec<MarginalDistribution>,
    g: PerformanceFn,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dims", &self.marginals.len())
            .finish()
    }
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        marginals: Vec<MarginalDistribution>,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::Domain("a problem needs at least one input".into()));
        }
        Ok(Self { name: name.into(), marginals, g: Arc::new(g) })
    }

    pub fn dims(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[MarginalDistribution] {
        &self.marginals
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dims() {
            return Err(Error::Shape { expected: self.dims(), got: x.len() });
        }
        let v = (self.g)(x);
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "performance function returned {v} on {}",
                self.name
            )));
        }
        Ok(v)
    }

    /// Same inputs, performance shifted down by `t`: failure becomes G(x) ≤ t.
    pub fn threshold_shift(&self, t: f64) -> Self {
        let inner = self.g.clone();
        Self {
            name: format!("{}-shift{t}", self.name),
            marginals: self.marginals.clone(),
            g: Arc::new(move |x| inner(x) - t),
        }
    }
}
