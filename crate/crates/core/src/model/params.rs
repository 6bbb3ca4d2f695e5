use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::design::CovariateDesign;
use super::layout::VariableLayout;
use super::sigma_eps::{check_structure, STRUCTURE_TOL};
use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::transform::TransformSpec;

pub const PARAMS_SCHEMA: &str = "hei-usual/model-params/1";

/// Fixed effects, covariances and transforms of the latent-variable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsDoc", into = "ParamsDoc")]
pub struct ModelParams {
    pub layout: VariableLayout,
    pub design: CovariateDesign,
    /// `p x q`; row `j` holds the coefficients of variable `j`.
    pub beta: DMatrix<f64>,
    pub sigma_u: DMatrix<f64>,
    pub sigma_eps: DMatrix<f64>,
    /// One per transformed variable, in [`VariableLayout::transformed_variable`] order.
    pub transforms: Vec<TransformSpec>,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let p = self.layout.p();
        let q = self.design.q();
        if self.beta.nrows() != p || self.beta.ncols() != q {
            return Err(Error::validation(format!(
                "beta must be {p}x{q}, got {}x{}",
                self.beta.nrows(),
                self.beta.ncols()
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::validation("beta must be finite"));
        }
        if self.sigma_u.nrows() != p || self.sigma_u.ncols() != p {
            return Err(Error::validation(format!("sigma_u must be {p}x{p}")));
        }
        if (&self.sigma_u - self.sigma_u.transpose()).amax() > STRUCTURE_TOL {
            return Err(Error::validation("sigma_u must be symmetric"));
        }
        let scale = self.sigma_u.amax().max(1.0);
        if min_eigenvalue(&self.sigma_u) < -1e-10 * scale {
            return Err(Error::validation("sigma_u must be positive semidefinite"));
        }
        check_structure(&self.sigma_eps, &self.layout, STRUCTURE_TOL)?;
        if min_eigenvalue(&self.sigma_eps) <= 0.0 {
            return Err(Error::validation("sigma_eps must be positive definite"));
        }
        if self.transforms.len() != self.layout.n_transformed() {
            return Err(Error::validation(format!(
                "expected {} transforms, got {}",
                self.layout.n_transformed(),
                self.transforms.len()
            )));
        }
        for t in &self.transforms {
            t.validate()?;
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.layout.p()
    }

    /// `x^T beta_j`.
    pub fn linear_predictor(&self, j: usize, x: &[f64]) -> f64 {
        self.beta.row(j).iter().zip(x).map(|(b, xi)| b * xi).sum()
    }

    pub fn transform_for(&self, j: usize) -> Option<&TransformSpec> {
        self.layout.transform_index(j).map(|t| &self.transforms[t])
    }

    /// Elementwise mean of several parameter sets sharing layout and transforms.
    pub fn mean_of(draws: &[ModelParams]) -> Result<ModelParams> {
        let first = draws
            .first()
            .ok_or_else(|| Error::validation("cannot average an empty set of draws"))?;
        let n = draws.len() as f64;
        let mut out = first.clone();
        out.beta.fill(0.0);
        out.sigma_u.fill(0.0);
        out.sigma_eps.fill(0.0);
        for d in draws {
            if d.layout != first.layout || d.design != first.design {
                return Err(Error::validation("draws disagree on layout or covariates"));
            }
            out.beta += &d.beta;
            out.sigma_u += &d.sigma_u;
            out.sigma_eps += &d.sigma_eps;
        }
        out.beta /= n;
        out.sigma_u /= n;
        out.sigma_eps /= n;
        // Averages of exactly structured matrices stay structured; undo rounding.
        for l in 0..out.layout.n_episodic() {
            let (ind, amt) = (out.layout.indicator(l), out.layout.amount(l));
            out.sigma_eps[(ind, ind)] = 1.0;
            out.sigma_eps[(ind, amt)] = 0.0;
            out.sigma_eps[(amt, ind)] = 0.0;
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformDoc {
    variable: String,
    lambda: f64,
    mu: f64,
    sigma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    schema: String,
    layout: VariableLayout,
    covariates: CovariateDesign,
    beta: Vec<Vec<f64>>,
    sigma_u: Vec<Vec<f64>>,
    sigma_eps: Vec<Vec<f64>>,
    transforms: Vec<TransformDoc>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::validation(format!("{what}: ragged matrix rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl TryFrom<ParamsDoc> for ModelParams {
    type Error = Error;

    fn try_from(doc: ParamsDoc) -> Result<Self> {
        if doc.schema != PARAMS_SCHEMA {
            return Err(Error::validation(format!(
                "unsupported params schema `{}`, expected `{PARAMS_SCHEMA}`",
                doc.schema
            )));
        }
        let names = doc.layout.column_names();
        let mut transforms = Vec::with_capacity(doc.transforms.len());
        for (t, td) in doc.transforms.iter().enumerate() {
            if t < doc.layout.n_transformed() {
                let expected = &names[doc.layout.transformed_variable(t)];
                if &td.variable != expected {
                    return Err(Error::validation(format!(
                        "transform {t} is for `{}`, expected `{expected}`",
                        td.variable
                    )));
                }
            }
            transforms.push(TransformSpec::new(td.lambda, td.mu, td.sigma)?);
        }
        let params = ModelParams {
            beta: from_rows(&doc.beta, "beta")?,
            sigma_u: from_rows(&doc.sigma_u, "sigma_u")?,
            sigma_eps: from_rows(&doc.sigma_eps, "sigma_eps")?,
            layout: doc.layout,
            design: doc.covariates,
            transforms,
        };
        params.validate()?;
        Ok(params)
    }
}

impl From<ModelParams> for ParamsDoc {
    fn from(p: ModelParams) -> Self {
        let names = p.layout.column_names();
        let transforms = p
            .transforms
            .iter()
            .enumerate()
            .map(|(t, spec)| TransformDoc {
                variable: names[p.layout.transformed_variable(t)].clone(),
                lambda: spec.lambda,
                mu: spec.mu,
                sigma: spec.sigma,
            })
            .collect();
        ParamsDoc {
            schema: PARAMS_SCHEMA.to_string(),
            beta: to_rows(&p.beta),
            sigma_u: to_rows(&p.sigma_u),
            sigma_eps: to_rows(&p.sigma_eps),
            layout: p.layout,
            covariates: p.design,
            transforms,
        }
    }
}
