use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::SamplerConfig;
use super::truncnorm::sample_sign_truncated;
use crate::data::RecallDataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, log_det_from_cholesky, sample_from_precision, sample_inverse_wishart, spd_inverse};
use crate::model::{build_sigma_eps, EpsCholParam, LatentState, ModelParams};

/// Full conditionals of a multivariate normal, one coordinate at a time.
///
/// For `W ~ N(m, Sigma)` and precision `Q = Sigma^{-1}`,
/// `W_j | W_-j ~ N(m_j - sum_k Q_jk (W_k - m_k) / Q_jj, 1 / Q_jj)`.
#[derive(Debug, Clone)]
pub struct GaussianConditionals {
    coef: DMatrix<f64>,
    sd: Vec<f64>,
}

impl GaussianConditionals {
    pub fn from_covariance(sigma: &DMatrix<f64>) -> Result<Self> {
        let q = spd_inverse(sigma, "within-person covariance")?;
        let p = q.nrows();
        let coef = DMatrix::from_fn(p, p, |j, k| if j == k { 0.0 } else { -q[(j, k)] / q[(j, j)] });
        let sd = (0..p).map(|j| (1.0 / q[(j, j)]).sqrt()).collect();
        Ok(Self { coef, sd })
    }

    pub fn mean(&self, j: usize, w: &[f64], m: &[f64]) -> f64 {
        let row = self.coef.row(j);
        m[j] + row
            .iter()
            .zip(w.iter().zip(m))
            .map(|(c, (wk, mk))| c * (wk - mk))
            .sum::<f64>()
    }

    pub fn sd(&self, j: usize) -> f64 {
        self.sd[j]
    }
}

/// Sampler state plus the per-recall quantities that never change.
pub struct Chain<'a> {
    data: &'a RecallDataset,
    config: SamplerConfig,
    /// Covariate rows per person and recall.
    x: Vec<Vec<Vec<f64>>>,
    weights: Vec<f64>,
    pub params: ModelParams,
    pub theta: EpsCholParam,
    pub latent: LatentState,
    conditionals: GaussianConditionals,
    precision_eps: DMatrix<f64>,
    pub(super) proposal_scales: Vec<f64>,
    pub(super) accepted: Vec<u64>,
    pub(super) proposed: Vec<u64>,
    rng: ChaCha8Rng,
}

impl<'a> Chain<'a> {
    /// Chain started from `initial` (its transforms stay fixed).
    pub fn new(data: &'a RecallDataset, initial: ModelParams, config: SamplerConfig) -> Result<Self> {
        data.validate()?;
        initial.validate()?;
        if initial.layout != data.layout || initial.design != data.design {
            return Err(Error::validation(
                "starting parameters and data disagree on variables or covariates",
            ));
        }
        config.validate(initial.p())?;
        let theta = EpsCholParam::from_sigma(&initial.sigma_eps, &initial.layout)?;
        let latent = LatentState::initialize(&initial, data)?;
        let x = data
            .persons
            .iter()
            .map(|person| person.recalls.iter().map(|r| data.design_row(person, r)).collect())
            .collect();
        let weights = if config.use_weights {
            data.normalized_weights()
        } else {
            vec![1.0; data.n_persons()]
        };
        let conditionals = GaussianConditionals::from_covariance(&initial.sigma_eps)?;
        let precision_eps = spd_inverse(&initial.sigma_eps, "within-person covariance")?;
        let n_blocks = EpsCholParam::row_blocks(&initial.layout).len();
        Ok(Self {
            data,
            x,
            weights,
            theta,
            latent,
            conditionals,
            precision_eps,
            proposal_scales: vec![config.proposal.initial_scale; n_blocks],
            accepted: vec![0; n_blocks],
            proposed: vec![0; n_blocks],
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            params: initial,
            config,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Power applied to person `i`'s conditionals. Zero-weight persons do
    /// not enter any parameter update, so their latents keep the untempered
    /// conditional instead of an improper flat one.
    fn temper(&self, i: usize) -> f64 {
        let w = self.weights[i];
        if w > 0.0 {
            w
        } else {
            1.0
        }
    }

    fn mean_vector(&self, i: usize, k: usize) -> Vec<f64> {
        let x = &self.x[i][k];
        let u = &self.latent.u[i];
        (0..self.params.p())
            .map(|j| self.params.linear_predictor(j, x) + u[j])
            .collect()
    }

    /// Redraw every indicator latent from its truncated conditional.
    pub fn impute_indicator_latents(&mut self) -> Result<()> {
        let layout = self.params.layout.clone();
        for i in 0..self.data.n_persons() {
            let scale = self.temper(i).sqrt().recip();
            for k in 0..self.data.persons[i].recalls.len() {
                let m = self.mean_vector(i, k);
                for l in 0..layout.n_episodic() {
                    let j = layout.indicator(l);
                    let consumed = self.data.persons[i].recalls[k].values[j] == 1.0;
                    let cm = self.conditionals.mean(j, &self.latent.w[i][k], &m);
                    let sd = self.conditionals.sd(j) * scale;
                    self.latent.w[i][k][j] = sample_sign_truncated(&mut self.rng, cm, sd, consumed);
                }
            }
        }
        Ok(())
    }

    /// Redraw the amount latents of foods not consumed on a recall day.
    pub fn impute_missing_amounts(&mut self) -> Result<()> {
        let layout = self.params.layout.clone();
        for i in 0..self.data.n_persons() {
            let scale = self.temper(i).sqrt().recip();
            for k in 0..self.data.persons[i].recalls.len() {
                let values = &self.data.persons[i].recalls[k].values;
                if (0..layout.n_episodic()).all(|l| values[layout.indicator(l)] == 1.0) {
                    continue;
                }
                let m = self.mean_vector(i, k);
                for l in 0..layout.n_episodic() {
                    if self.data.persons[i].recalls[k].values[layout.indicator(l)] == 1.0 {
                        continue;
                    }
                    let j = layout.amount(l);
                    let cm = self.conditionals.mean(j, &self.latent.w[i][k], &m);
                    let z: f64 = self.rng.sample(StandardNormal);
                    self.latent.w[i][k][j] = cm + self.conditionals.sd(j) * scale * z;
                }
            }
        }
        Ok(())
    }

    /// Precision `w_i (Sigma_u^{-1} + m_i Sigma_eps^{-1})` and linear term
    /// `w_i Sigma_eps^{-1} sum_k (W_ik - X_ik beta)` of person `i`'s random
    /// effects, `w_i` being the person's tempering power.
    pub fn random_effect_posterior(&self, i: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let prec_u = spd_inverse(&self.params.sigma_u, "sigma_u")?;
        let m = self.x[i].len();
        let t = self.temper(i);
        Ok((
            (&prec_u + &self.precision_eps * m as f64) * t,
            self.random_effect_rhs(i) * t,
        ))
    }

    fn random_effect_rhs(&self, i: usize) -> DVector<f64> {
        let p = self.params.p();
        let mut sum = DVector::<f64>::zeros(p);
        for (k, x) in self.x[i].iter().enumerate() {
            for j in 0..p {
                sum[j] += self.latent.w[i][k][j] - self.params.linear_predictor(j, x);
            }
        }
        &self.precision_eps * sum
    }

    /// `U_i ~ N(A Sigma_eps^{-1} sum_k (W_ik - X_ik beta), A / w_i)` with
    /// `A = (Sigma_u^{-1} + m_i Sigma_eps^{-1})^{-1}`.
    pub fn update_random_effects(&mut self) -> Result<()> {
        let prec_u = spd_inverse(&self.params.sigma_u, "sigma_u")?;
        let mut cache: Vec<Option<DMatrix<f64>>> = Vec::new();
        for i in 0..self.data.n_persons() {
            let m = self.x[i].len();
            if cache.len() <= m {
                cache.resize(m + 1, None);
            }
            let base = cache[m].get_or_insert_with(|| &prec_u + &self.precision_eps * m as f64);
            let t = self.temper(i);
            let b = self.random_effect_rhs(i) * t;
            let (draw, _) = if t == 1.0 {
                sample_from_precision(&mut self.rng, base, &b, "random-effect posterior")?
            } else {
                sample_from_precision(&mut self.rng, &(&*base * t), &b, "random-effect posterior")?
            };
            self.latent.u[i].copy_from_slice(draw.as_slice());
        }
        Ok(())
    }

    /// Precision and linear term of the joint fixed-effect posterior, with
    /// `beta` stacked variable by variable. Seemingly-unrelated regression
    /// likelihood plus independent `N(0, beta_variance)` priors.
    pub fn fixed_effects_posterior(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let p = self.params.p();
        let q = self.params.design.q();
        let mut gram = DMatrix::<f64>::zeros(q, q);
        let mut cross = DMatrix::<f64>::zeros(q, p);
        for i in 0..self.data.n_persons() {
            let wt = self.weights[i];
            for (k, x) in self.x[i].iter().enumerate() {
                for a in 0..q {
                    for b in 0..q {
                        gram[(a, b)] += wt * x[a] * x[b];
                    }
                    for j in 0..p {
                        cross[(a, j)] += wt * x[a] * (self.latent.w[i][k][j] - self.latent.u[i][j]);
                    }
                }
            }
        }
        check_full_rank(&gram, &self.params.design.names())?;
        let qe = &self.precision_eps;
        let n = p * q;
        let prior_prec = 1.0 / self.config.priors.beta_variance;
        let mut precision = DMatrix::<f64>::zeros(n, n);
        for j in 0..p {
            for l in 0..p {
                for a in 0..q {
                    for b in 0..q {
                        precision[(j * q + a, l * q + b)] = qe[(j, l)] * gram[(a, b)];
                    }
                }
            }
        }
        for d in 0..n {
            precision[(d, d)] += prior_prec;
        }
        let hq = &cross * qe;
        let rhs = DVector::from_fn(n, |idx, _| hq[(idx % q, idx / q)]);
        Ok((precision, rhs))
    }

    pub fn update_fixed_effects(&mut self) -> Result<()> {
        let (precision, rhs) = self.fixed_effects_posterior()?;
        let (draw, _) = sample_from_precision(&mut self.rng, &precision, &rhs, "fixed-effect posterior")?;
        let q = self.params.design.q();
        for j in 0..self.params.p() {
            for a in 0..q {
                self.params.beta[(j, a)] = draw[j * q + a];
            }
        }
        Ok(())
    }

    /// `Sigma_u ~ IW(df + sum w_i, S + sum w_i U_i U_i^T)`.
    pub fn update_sigma_u(&mut self) -> Result<()> {
        let p = self.params.p();
        let mut scale = DMatrix::<f64>::identity(p, p) * self.config.priors.sigma_u_scale;
        for (u, &wt) in self.latent.u.iter().zip(&self.weights) {
            for a in 0..p {
                for b in 0..p {
                    scale[(a, b)] += wt * u[a] * u[b];
                }
            }
        }
        let df = self.config.sigma_u_df(p) + self.weights.iter().sum::<f64>();
        self.params.sigma_u = sample_inverse_wishart(&mut self.rng, df, &scale)?;
        Ok(())
    }

    /// Weighted residual cross-product and total weight of all recalls.
    fn residual_stats(&self) -> (DMatrix<f64>, f64) {
        let p = self.params.p();
        let mut s = DMatrix::<f64>::zeros(p, p);
        let mut total = 0.0;
        for i in 0..self.data.n_persons() {
            let wt = self.weights[i];
            for k in 0..self.x[i].len() {
                let m = self.mean_vector(i, k);
                let r: Vec<f64> = self.latent.w[i][k].iter().zip(&m).map(|(w, m)| w - m).collect();
                for a in 0..p {
                    for b in 0..=a {
                        s[(a, b)] += wt * r[a] * r[b];
                    }
                }
                total += wt;
            }
        }
        for a in 0..p {
            for b in 0..a {
                s[(b, a)] = s[(a, b)];
            }
        }
        (s, total)
    }

    fn theta_log_target(&self, theta: &EpsCholParam, stats: &DMatrix<f64>, total: f64) -> Option<f64> {
        let sigma = build_sigma_eps(theta, &self.params.layout).ok()?;
        let chol = cholesky(&sigma, "").ok()?;
        let trace = chol.solve(stats).trace();
        let prior: f64 = theta.values().iter().map(|t| t * t).sum::<f64>() / self.config.priors.theta_variance;
        let v = -0.5 * total * log_det_from_cholesky(&chol) - 0.5 * trace - 0.5 * prior;
        v.is_finite().then_some(v)
    }

    /// Random-walk Metropolis on each row block of the `Sigma_eps`
    /// parameter. With `adapt_step = Some(t)` the step sizes move towards the
    /// target acceptance rate with gain `(t + 1)^-0.6`.
    pub fn update_sigma_eps(&mut self, adapt_step: Option<usize>) -> Result<()> {
        let (stats, total) = self.residual_stats();
        let blocks = EpsCholParam::row_blocks(&self.params.layout);
        let mut current = self
            .theta_log_target(&self.theta, &stats, total)
            .ok_or_else(|| Error::numerical("current within-person covariance is not positive definite"))?;
        for (b, block) in blocks.iter().enumerate() {
            let mut proposal = self.theta.clone();
            let step = self.proposal_scales[b];
            for v in &mut proposal.values_mut()[block.clone()] {
                let z: f64 = self.rng.sample(StandardNormal);
                *v += step * z;
            }
            let u: f64 = self.rng.random();
            let accepted = match self.theta_log_target(&proposal, &stats, total) {
                Some(lp) if u.ln() < lp - current => {
                    self.theta = proposal;
                    current = lp;
                    true
                }
                _ => false,
            };
            self.proposed[b] += 1;
            self.accepted[b] += u64::from(accepted);
            if let Some(t) = adapt_step {
                if self.config.proposal.adapt {
                    let gain = (t as f64 + 1.0).powf(-0.6);
                    let rate = if accepted { 1.0 } else { 0.0 };
                    let scaled =
                        self.proposal_scales[b] * (gain * (rate - self.config.proposal.target_acceptance)).exp();
                    self.proposal_scales[b] = scaled.clamp(1e-5, 10.0);
                }
            }
        }
        self.set_sigma_eps_from_theta()
    }

    fn set_sigma_eps_from_theta(&mut self) -> Result<()> {
        self.params.sigma_eps = build_sigma_eps(&self.theta, &self.params.layout)?;
        self.conditionals = GaussianConditionals::from_covariance(&self.params.sigma_eps)?;
        self.precision_eps = spd_inverse(&self.params.sigma_eps, "within-person covariance")?;
        Ok(())
    }

    /// Replace the within-person covariance (must carry the structure).
    pub fn set_sigma_eps(&mut self, sigma: &DMatrix<f64>) -> Result<()> {
        self.theta = EpsCholParam::from_sigma(sigma, &self.params.layout)?;
        self.set_sigma_eps_from_theta()
    }

    pub fn reset_acceptance(&mut self) {
        self.accepted.iter_mut().for_each(|a| *a = 0);
        self.proposed.iter_mut().for_each(|a| *a = 0);
    }

    /// Acceptance rate per `Sigma_eps` row block since the last reset.
    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.accepted
            .iter()
            .zip(&self.proposed)
            .map(|(&a, &n)| if n == 0 { 0.0 } else { a as f64 / n as f64 })
            .collect()
    }

    /// One full sweep; errors name the iteration and the failing block.
    pub fn sweep(&mut self, iteration: usize) -> Result<()> {
        let adapt = (iteration < self.config.burn_in).then_some(iteration);
        let tag =
            |block: &'static str| move |e: Error| Error::numerical(format!("iteration {iteration}, {block}: {e}"));
        self.impute_indicator_latents().map_err(tag("indicator latents"))?;
        self.impute_missing_amounts().map_err(tag("missing amounts"))?;
        self.update_random_effects().map_err(tag("random effects"))?;
        self.update_fixed_effects().map_err(tag("fixed effects"))?;
        self.update_sigma_u().map_err(tag("sigma_u"))?;
        self.update_sigma_eps(adapt).map_err(tag("sigma_eps"))?;
        Ok(())
    }
}

/// Fail when the weighted Gram matrix of the covariates is singular, naming
/// the first column that is a combination of earlier ones.
fn check_full_rank(gram: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let q = gram.nrows();
    let mut l = DMatrix::<f64>::zeros(q, q);
    for a in 0..q {
        let scale = gram[(a, a)];
        if !(scale > 0.0) {
            return Err(Error::numerical(format!(
                "covariate `{}` is zero for every recall; the design is rank deficient",
                names[a]
            )));
        }
        let mut d = gram[(a, a)];
        for k in 0..a {
            d -= l[(a, k)] * l[(a, k)];
        }
        if d <= 1e-10 * scale {
            return Err(Error::numerical(format!(
                "covariate `{}` is collinear with earlier columns; the design is rank deficient",
                names[a]
            )));
        }
        l[(a, a)] = d.sqrt();
        for r in a + 1..q {
            let mut v = gram[(r, a)];
            for k in 0..a {
                v -= l[(r, k)] * l[(a, k)];
            }
            l[(r, a)] = v / l[(a, a)];
        }
    }
    Ok(())
}
