//! Latent (`P0`) and target (`P1`) distributions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::RngState;

/// Latent distribution. Samples have the stored shape.
#[derive(Clone, Debug, PartialEq)]
pub enum LatentSpec {
    /// Standard normal per coordinate.
    IsotropicGaussian { shape: Vec<usize> },
    /// Dirichlet(1, ..., 1) over all coordinates, i.e. uniform on the simplex.
    DirichletUniform { shape: Vec<usize> },
}

impl LatentSpec {
    pub fn gaussian(dim: usize) -> Self {
        LatentSpec::IsotropicGaussian { shape: vec![dim] }
    }

    pub fn dirichlet(dim: usize) -> Self {
        LatentSpec::DirichletUniform { shape: vec![dim] }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            LatentSpec::IsotropicGaussian { shape } | LatentSpec::DirichletUniform { shape } => shape,
        }
    }

    /// Same kind of latent, resized to `shape`.
    pub fn with_shape(&self, shape: &[usize]) -> Self {
        match self {
            LatentSpec::IsotropicGaussian { .. } => LatentSpec::IsotropicGaussian { shape: shape.to_vec() },
            LatentSpec::DirichletUniform { .. } => LatentSpec::DirichletUniform { shape: shape.to_vec() },
        }
    }

    fn validate(&self) -> Result<()> {
        let shape = self.shape();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Invalid(format!("latent shape {shape:?} is empty")));
        }
        Ok(())
    }

    pub fn sample_one(&self, rng: &mut RngState) -> Grid {
        let shape = self.shape().to_vec();
        let len: usize = shape.iter().product();
        let data = match self {
            LatentSpec::IsotropicGaussian { .. } => (0..len).map(|_| rng.normal()).collect(),
            LatentSpec::DirichletUniform { .. } => {
                let e: Vec<f64> = (0..len).map(|_| rng.exp1()).collect();
                let total: f64 = e.iter().sum();
                e.into_iter().map(|v| v / total).collect()
            }
        };
        Grid::from_parts(data, shape)
    }
}

pub fn sample_latent(spec: &LatentSpec, n: usize, rng: &mut RngState) -> Result<Vec<Grid>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    Ok((0..n).map(|_| spec.sample_one(rng)).collect())
}

/// One isotropic Gaussian component `N(mean, scale^2 I)` with mixture weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TargetSpec {
    IsotropicGaussian { mean: Vec<f64>, scale: f64 },
    GaussianMixture(Vec<Component>),
    Empirical(Arc<Vec<Grid>>),
}

impl TargetSpec {
    pub fn gaussian(mean: Vec<f64>, scale: f64) -> Result<Self> {
        let spec = TargetSpec::IsotropicGaussian { mean, scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mixture(components: Vec<Component>) -> Result<Self> {
        let spec = TargetSpec::GaussianMixture(components);
        spec.validate()?;
        Ok(spec)
    }

    pub fn empirical(items: Vec<Grid>) -> Result<Self> {
        let spec = TargetSpec::Empirical(Arc::new(items));
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSpec::IsotropicGaussian { mean, scale } => {
                validate_component(mean, *scale)?;
            }
            TargetSpec::GaussianMixture(components) => validate_mixture(components)?,
            TargetSpec::Empirical(items) => {
                let first = items.first().ok_or_else(|| Error::Invalid("empirical dataset is empty".into()))?;
                if let Some(bad) = items.iter().find(|g| g.shape() != first.shape()) {
                    return Err(Error::shape(first.shape(), bad.shape()));
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Vec<usize> {
        match self {
            TargetSpec::IsotropicGaussian { mean, .. } => vec![mean.len()],
            TargetSpec::GaussianMixture(c) => vec![c.first().map_or(0, |c| c.mean.len())],
            TargetSpec::Empirical(items) => items.first().map_or(vec![0], |g| g.shape().to_vec()),
        }
    }

    pub fn sample_one(&self, rng: &mut RngState) -> Grid {
        match self {
            TargetSpec::IsotropicGaussian { mean, scale } => gaussian_draw(mean, *scale, rng),
            TargetSpec::GaussianMixture(components) => {
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut chosen = components.last().expect("validated non-empty");
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                gaussian_draw(&chosen.mean, chosen.scale, rng)
            }
            TargetSpec::Empirical(items) => items[rng.index(items.len())].clone(),
        }
    }
}

fn gaussian_draw(mean: &[f64], scale: f64, rng: &mut RngState) -> Grid {
    let data = mean.iter().map(|&m| m + scale * rng.normal()).collect();
    Grid::from_parts(data, vec![mean.len()])
}

pub(crate) fn validate_component(mean: &[f64], scale: f64) -> Result<()> {
    if mean.is_empty() {
        return Err(Error::Invalid("mean vector is empty".into()));
    }
    if mean.iter().any(|m| !m.is_finite()) {
        return Err(Error::Invalid("mean must be finite".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain { name: "scale", value: scale, domain: "(0, inf)" });
    }
    Ok(())
}

pub(crate) fn validate_mixture(components: &[Component]) -> Result<()> {
    let first = components.first().ok_or_else(|| Error::Invalid("mixture has no components".into()))?;
    let mut total = 0.0;
    for c in components {
        validate_component(&c.mean, c.scale)?;
        if c.mean.len() != first.mean.len() {
            return Err(Error::shape(&[first.mean.len()], &[c.mean.len()]));
        }
        if !(c.weight > 0.0) {
            return Err(Error::Domain { name: "weight", value: c.weight, domain: "(0, 1]" });
        }
        total += c.weight;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(format!("mixture weights sum to {total}, expected 1")));
    }
    Ok(())
}

pub fn sample_target(spec: &TargetSpec, n: usize, rng: &mut RngState) -> Result<Vec<Grid>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    Ok((0..n).map(|_| spec.sample_one(rng)).collect())
}
