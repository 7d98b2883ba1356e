//! Closed-form velocity fields for Gaussian and Gaussian-mixture targets
//! with a standard normal latent.

use super::{check_dim, VelocityField};
use crate::dist::{validate_component, validate_mixture, Component};
use crate::error::{check_unit_interval, Result};
use crate::grid::Grid;

/// Optimal field `E[X1 - X0 | X_t = x]` for `X0 ~ N(0, I)` independent of
/// `X1 ~ N(m, s^2 I)`.
#[derive(Clone, Debug)]
pub struct GaussIndepField {
    mean: Vec<f64>,
    scale: f64,
}

impl GaussIndepField {
    pub fn new(mean: Vec<f64>, scale: f64) -> Result<Self> {
        validate_component(&mean, scale)?;
        Ok(GaussIndepField { mean, scale })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// `(m + c (x - t m), c)` with `c = (t s^2 - (1 - t)) / a_t^2`.
#[inline]
fn gauss_indep_coefficient(t: f64, s: f64) -> f64 {
    let s2 = s * s;
    let a2 = (1.0 - t) * (1.0 - t) + t * t * s2;
    (t * s2 - (1.0 - t)) / a2
}

impl VelocityField for GaussIndepField {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid> {
        check_unit_interval("t", t)?;
        check_dim(self.dim(), x)?;
        let c = gauss_indep_coefficient(t, self.scale);
        let data = x.data().iter().zip(&self.mean).map(|(&xi, &m)| m + c * (xi - t * m)).collect();
        Ok(Grid::from_parts(data, x.shape().to_vec()))
    }
}

/// Optimal independent-coupling field for an isotropic Gaussian-mixture target.
#[derive(Clone, Debug)]
pub struct GmmIndepField {
    components: Vec<Component>,
}

impl GmmIndepField {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        validate_mixture(&components)?;
        Ok(GmmIndepField { components })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Posterior component weights given `X_t = x`.
    pub fn responsibilities(&self, t: f64, x: &Grid) -> Result<Vec<f64>> {
        check_unit_interval("t", t)?;
        check_dim(self.dim(), x)?;
        let d = x.len() as f64;
        let log_w: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let a2 = (1.0 - t) * (1.0 - t) + t * t * c.scale * c.scale;
                let dist2: f64 = x.data().iter().zip(&c.mean).map(|(&xi, &m)| (xi - t * m).powi(2)).sum();
                c.weight.ln() - 0.5 * dist2 / a2 - 0.5 * d * a2.ln()
            })
            .collect();
        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|v| v / total).collect())
    }
}

impl VelocityField for GmmIndepField {
    fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid> {
        let resp = self.responsibilities(t, x)?;
        let mut out = vec![0.0; x.len()];
        for (c, &r) in self.components.iter().zip(&resp) {
            let coef = gauss_indep_coefficient(t, c.scale);
            for ((o, &xi), &m) in out.iter_mut().zip(x.data()).zip(&c.mean) {
                *o += r * (m + coef * (xi - t * m));
            }
        }
        Ok(Grid::from_parts(out, x.shape().to_vec()))
    }
}

/// Field of the optimal-transport coupling between `N(0, I)` and
/// `N(m, s^2 I)`, whose Monge map is `T(x) = m + s x`. Its trajectories are
/// straight lines.
#[derive(Clone, Debug)]
pub struct GaussOtField {
    mean: Vec<f64>,
    scale: f64,
}

impl GaussOtField {
    pub fn new(mean: Vec<f64>, scale: f64) -> Result<Self> {
        validate_component(&mean, scale)?;
        Ok(GaussOtField { mean, scale })
    }

    /// The Monge map `T(x) = m + s x`.
    pub fn transport(&self, x0: &Grid) -> Result<Grid> {
        check_dim(self.dim(), x0)?;
        let data = x0.data().iter().zip(&self.mean).map(|(&x, &m)| m + self.scale * x).collect();
        Ok(Grid::from_parts(data, x0.shape().to_vec()))
    }
}

impl VelocityField for GaussOtField {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid> {
        check_unit_interval("t", t)?;
        check_dim(self.dim(), x)?;
        let sm1 = self.scale - 1.0;
        let denom = 1.0 + t * sm1;
        let data = x.data().iter().zip(&self.mean).map(|(&xi, &m)| m + sm1 * (xi - t * m) / denom).collect();
        Ok(Grid::from_parts(data, x.shape().to_vec()))
    }
}

/// `v = 0` everywhere. Turns every denoiser into the identity.
#[derive(Clone, Debug)]
pub struct ZeroField {
    dim: usize,
}

impl ZeroField {
    pub fn new(dim: usize) -> Self {
        ZeroField { dim }
    }
}

impl VelocityField for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid> {
        check_unit_interval("t", t)?;
        check_dim(self.dim, x)?;
        Ok(Grid::zeros(x.shape()))
    }
}

#[derive(Clone, Debug)]
pub struct ConstantField {
    value: Vec<f64>,
}

impl ConstantField {
    pub fn new(value: Vec<f64>) -> Self {
        ConstantField { value }
    }
}

impl VelocityField for ConstantField {
    fn dim(&self) -> usize {
        self.value.len()
    }

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid> {
        check_unit_interval("t", t)?;
        check_dim(self.dim(), x)?;
        Ok(Grid::from_parts(self.value.clone(), x.shape().to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::denoise;

    fn v1(field: &dyn VelocityField, t: f64, x: f64) -> f64 {
        field.eval(t, &Grid::vector(vec![x]).unwrap()).unwrap().data()[0]
    }

    #[test]
    fn gauss_indep_endpoints() {
        let f = GaussIndepField::new(vec![7.0], 0.5).unwrap();
        for x in [-3.0, 0.0, 2.5] {
            assert!((v1(&f, 0.0, x) - (7.0 - x)).abs() < 1e-14);
            assert!((v1(&f, 1.0, x) - x).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_indep_midpoint_value() {
        let f = GaussIndepField::new(vec![7.0], 0.5).unwrap();
        assert!((gauss_indep_coefficient(0.5, 0.5) + 1.2).abs() < 1e-15);
        assert!((v1(&f, 0.5, 3.5) - 7.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_indep_denoiser_at_zero_is_prior_mean() {
        let f = GaussIndepField::new(vec![7.0, -2.0], 0.5).unwrap();
        let d = denoise(&f, 0.0, &Grid::vector(vec![100.0, 3.0]).unwrap()).unwrap();
        assert_eq!(d.data(), &[7.0, -2.0]);
    }

    #[test]
    fn single_component_mixture_matches_gaussian() {
        let g = GaussIndepField::new(vec![1.5, -0.5], 0.7).unwrap();
        let m = GmmIndepField::new(vec![Component { weight: 1.0, mean: vec![1.5, -0.5], scale: 0.7 }]).unwrap();
        let x = Grid::vector(vec![0.2, 0.9]).unwrap();
        for t in [0.0, 0.3, 0.8, 1.0] {
            let a = g.eval(t, &x).unwrap();
            let b = m.eval(t, &x).unwrap();
            for (p, q) in a.data().iter().zip(b.data()) {
                assert!((p - q).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mixture_at_zero_uses_weighted_mean() {
        let m = GmmIndepField::new(vec![
            Component { weight: 0.25, mean: vec![-2.0], scale: 0.3 },
            Component { weight: 0.75, mean: vec![2.0], scale: 0.9 },
        ])
        .unwrap();
        assert!((v1(&m, 0.0, 0.4) - (1.0 - 0.4)).abs() < 1e-14);
    }

    #[test]
    fn mixture_survives_distant_components() {
        let m = GmmIndepField::new(vec![
            Component { weight: 0.5, mean: vec![-400.0], scale: 0.01 },
            Component { weight: 0.5, mean: vec![400.0], scale: 0.01 },
        ])
        .unwrap();
        let v = v1(&m, 0.999, 399.0);
        assert!(v.is_finite());
        let r = m.responsibilities(0.999, &Grid::vector(vec![399.0]).unwrap()).unwrap();
        assert!((r[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ot_field_values() {
        let f = GaussOtField::new(vec![7.0], 0.5).unwrap();
        for x in [-1.0, 0.0, 3.0] {
            assert!((v1(&f, 0.0, x) - (7.0 - 0.5 * x)).abs() < 1e-14);
        }
        for t in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert!((v1(&f, t, 7.0 * t) - 7.0).abs() < 1e-13);
            let d = denoise(&f, t, &Grid::vector(vec![7.0 * t]).unwrap()).unwrap();
            assert!((d.data()[0] - 7.0).abs() < 1e-13);
        }
        let shift = GaussOtField::new(vec![2.0, 3.0], 1.0).unwrap();
        let v = shift.eval(0.4, &Grid::vector(vec![-5.0, 8.0]).unwrap()).unwrap();
        assert_eq!(v.data(), &[2.0, 3.0]);
    }

    #[test]
    fn fields_check_dimension() {
        let f = GaussIndepField::new(vec![0.0, 0.0], 1.0).unwrap();
        assert!(f.eval(0.5, &Grid::zeros(&[3])).is_err());
        assert!(GaussOtField::new(vec![0.0], -1.0).is_err());
    }
}
