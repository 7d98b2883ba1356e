use crate::error::{Error, Result};

/// Time grid `(t_n)` visited by the solver.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    /// `t_n = n / steps` for `n = 0..steps`; with `include_endpoint` one
    /// extra step at `t = 1` is appended.
    Uniform { steps: usize, include_endpoint: bool },
    /// `t_n = 1 - q^n` for `n = 0..n_max`. The gaps `1 - t_n` are summable.
    Geometric { q: f64, n_max: usize },
}

impl Schedule {
    pub fn uniform(steps: usize) -> Self {
        Schedule::Uniform { steps, include_endpoint: false }
    }

    pub fn geometric(q: f64, n_max: usize) -> Self {
        Schedule::Geometric { q, n_max }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Uniform { steps: 0, .. } => {
                Err(Error::Invalid("uniform schedule needs at least one step".into()))
            }
            Schedule::Geometric { q, .. } if !(q > 0.0 && q < 1.0) => {
                Err(Error::Domain { name: "q", value: q, domain: "(0, 1)" })
            }
            Schedule::Geometric { n_max: 0, .. } => {
                Err(Error::Invalid("geometric schedule needs at least one step".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        match *self {
            Schedule::Uniform { steps, include_endpoint } => {
                let n = steps + usize::from(include_endpoint);
                (0..n).map(|k| k as f64 / steps as f64).collect()
            }
            Schedule::Geometric { q, n_max } => (0..n_max).map(|k| 1.0 - q.powi(k as i32)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Schedule::Uniform { steps, include_endpoint } => steps + usize::from(include_endpoint),
            Schedule::Geometric { n_max, .. } => n_max,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Learning-rate rule `gamma_n` as a function of `t_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    /// `gamma = (1 - t)^alpha`, `alpha` in `(0, 1]`.
    Power {
        alpha: f64,
    },
    Constant(f64),
}

impl StepSize {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSize::Power { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(Error::Domain { name: "alpha", value: alpha, domain: "(0, 1]" })
            }
            StepSize::Constant(g) if !(g >= 0.0 && g.is_finite()) => {
                Err(Error::Domain { name: "gamma", value: g, domain: "[0, inf)" })
            }
            _ => Ok(()),
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match *self {
            StepSize::Power { alpha } => lr_schedule(t, alpha),
            StepSize::Constant(g) => g,
        }
    }
}

/// `(1 - t)^alpha`.
pub fn lr_schedule(t: f64, alpha: f64) -> f64 {
    (1.0 - t).powf(alpha)
}
