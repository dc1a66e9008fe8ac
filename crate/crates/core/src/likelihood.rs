//! MNL and simulated mixed-logit choice probabilities, the simulated
//! log-likelihood, and its analytic gradient.
//!
//! The simulated probability of an observation is the average over that
//! individual's draws of the closed-form logit probability, with each
//! random-normal coefficient evaluated at `mean + |sd| * draw`. With no
//! random terms the draw loop disappears and everything reduces to the
//! closed-form logit exactly.
//!
//! All whole-sample quantities are sums over fixed-size row chunks evaluated
//! in parallel and then combined in chunk order, so results are
//! bit-identical regardless of worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ChoiceObservation;
use crate::error::{Error, Result};
use crate::halton::DrawMatrix;
use crate::spec::{ModelSpecification, ParameterLayout};

/// Probability floor applied before taking logs, so pathological parameter
/// points during line search stay finite.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

const CHUNK: usize = 256;

/// How draw blocks map onto observations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawAssignment {
    /// One block per person, shared by all of that person's trips.
    #[default]
    PerPerson,
    /// One block per trip.
    PerTrip,
}

#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub(crate) values: Vec<f64>,
    pub(crate) chosen: usize,
    pub(crate) avail: [bool; 4],
    pub(crate) weight: f64,
    pub(crate) individual: usize,
}

#[derive(Clone, Copy, Debug)]
struct RandomTermMeta {
    term: usize,
    alt: usize,
    dim: usize,
    sd_slot: usize,
}

/// A specification compiled against a dataset: per-row term values, draw
/// block assignments, and the flat parameter layout.
///
/// Rows missing any referenced covariate are dropped at compile time and
/// counted in `dropped_incomplete`.
pub struct Model {
    spec: ModelSpecification,
    layout: ParameterLayout,
    term_alt: Vec<usize>,
    random_terms: Vec<RandomTermMeta>,
    rows: Vec<Row>,
    n_individuals: usize,
    dropped_incomplete: usize,
}

impl Model {
    pub fn compile(
        spec: &ModelSpecification,
        data: &[ChoiceObservation],
        assignment: DrawAssignment,
    ) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        let term_alt: Vec<usize> = spec.terms.iter().map(|t| t.alternative.index()).collect();

        let mut rows = Vec::with_capacity(data.len());
        let mut individuals: std::collections::HashMap<&str, usize> = Default::default();
        let mut dropped = 0usize;
        for obs in data {
            let mut values = Vec::with_capacity(spec.terms.len());
            let mut complete = true;
            for term in &spec.terms {
                if term.is_constant() {
                    values.push(1.0);
                } else {
                    match obs.covariate(&term.covariate) {
                        Some(v) => values.push(v),
                        None => {
                            complete = false;
                            break;
                        }
                    }
                }
            }
            if !complete {
                dropped += 1;
                continue;
            }
            let individual = match assignment {
                DrawAssignment::PerPerson => {
                    let next = individuals.len();
                    *individuals.entry(obs.person_id.as_str()).or_insert(next)
                }
                DrawAssignment::PerTrip => rows.len(),
            };
            rows.push(Row {
                values,
                chosen: obs.chosen.index(),
                avail: obs.available,
                weight: obs.weight,
                individual,
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyData);
        }
        let n_individuals = match assignment {
            DrawAssignment::PerPerson => individuals.len(),
            DrawAssignment::PerTrip => rows.len(),
        };
        let random_terms = spec
            .terms
            .iter()
            .enumerate()
            .filter_map(|(t, term)| {
                layout.random_dim(t).map(|dim| RandomTermMeta {
                    term: t,
                    alt: term.alternative.index(),
                    dim,
                    sd_slot: layout.sd_slot(t).unwrap(),
                })
            })
            .collect();
        Ok(Model {
            spec: spec.clone(),
            layout,
            term_alt,
            random_terms,
            rows,
            n_individuals,
            dropped_incomplete: dropped,
        })
    }

    pub fn spec(&self) -> &ModelSpecification {
        &self.spec
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params()
    }

    pub fn n_random(&self) -> usize {
        self.spec.n_random()
    }

    pub fn n_observations(&self) -> usize {
        self.rows.len()
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn dropped_incomplete(&self) -> usize {
        self.dropped_incomplete
    }

    pub(crate) fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub(crate) fn term_alt(&self) -> &[usize] {
        &self.term_alt
    }

    /// Builds the Halton draw matrix this model needs; a zero-dimension
    /// placeholder when there are no random terms.
    pub fn build_draws(&self, n_draws: usize, skip: usize) -> Result<DrawMatrix> {
        if self.n_random() == 0 {
            Ok(DrawMatrix::empty(self.n_individuals))
        } else {
            DrawMatrix::build(self.n_individuals, n_draws, self.n_random(), skip)
        }
    }

    fn check_args(&self, params: &[f64], draws: &DrawMatrix) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        if self.n_random() > 0 {
            if draws.n_dims() != self.n_random() {
                return Err(Error::invalid(format!(
                    "draw matrix has {} dimensions but the specification has {} random terms",
                    draws.n_dims(),
                    self.n_random()
                )));
            }
            if draws.n_individuals() < self.n_individuals {
                return Err(Error::invalid(format!(
                    "draw matrix covers {} individuals but the data has {}",
                    draws.n_individuals(),
                    self.n_individuals
                )));
            }
        }
        Ok(())
    }

    /// Coefficient of every term at one draw.
    #[inline]
    pub(crate) fn fill_coefs(&self, params: &[f64], draw: &[f64], out: &mut [f64]) {
        for (t, c) in out.iter_mut().enumerate() {
            let primary = params[self.layout.primary_slot(t)];
            *c = match self.layout.random_dim(t) {
                None => primary,
                Some(d) => primary + params[self.layout.sd_slot(t).unwrap()].abs() * draw[d],
            };
        }
    }

    #[inline]
    pub(crate) fn row_utilities(&self, row: &Row, coefs: &[f64], util: &mut [f64; 4]) {
        for (a, u) in util.iter_mut().enumerate() {
            *u = if row.avail[a] { 0.0 } else { f64::NEG_INFINITY };
        }
        for (t, &c) in coefs.iter().enumerate() {
            let a = self.term_alt[t];
            if row.avail[a] {
                util[a] += c * row.values[t];
            }
        }
    }

    fn effective_draws(&self, draws: &DrawMatrix) -> usize {
        if self.n_random() == 0 {
            1
        } else {
            draws.n_draws()
        }
    }

    #[inline]
    fn draw_slice<'a>(&self, draws: &'a DrawMatrix, individual: usize, r: usize) -> &'a [f64] {
        if self.n_random() == 0 {
            &[]
        } else {
            draws.at(individual, r)
        }
    }

    /// Utilities at the fixed coefficients and random means; per-draw
    /// evaluation only adds the `|sd| * draw * x` pieces on top.
    #[inline]
    fn row_base_utilities(&self, row: &Row, params: &[f64], base: &mut [f64; 4]) {
        for (a, u) in base.iter_mut().enumerate() {
            *u = if row.avail[a] { 0.0 } else { f64::NEG_INFINITY };
        }
        for (t, &a) in self.term_alt.iter().enumerate() {
            base[a] += params[self.layout.primary_slot(t)] * row.values[t];
        }
    }

    fn row_chosen_pbar(&self, row: &Row, params: &[f64], draws: &DrawMatrix) -> f64 {
        let n_r = self.effective_draws(draws);
        let mut base = [0.0f64; 4];
        self.row_base_utilities(row, params, &mut base);
        let mut util = [0.0f64; 4];
        let mut probs = [0.0f64; 4];
        let mut sum = 0.0;
        for r in 0..n_r {
            util = base;
            if !self.random_terms.is_empty() {
                let draw = draws.at(row.individual, r);
                for rt in &self.random_terms {
                    util[rt.alt] += params[rt.sd_slot].abs() * draw[rt.dim] * row.values[rt.term];
                }
            }
            softmax_masked(&util, &row.avail, &mut probs);
            sum += probs[row.chosen];
        }
        sum / n_r as f64
    }

    /// Adds this row's weighted log-likelihood gradient into `grad` and
    /// returns its weighted log-likelihood.
    ///
    /// The per-draw loop only tracks the chosen probability `p_r`, the
    /// cross-products `sum_r p_r * p_{r,a}` per alternative, and one
    /// draw-weighted accumulator per random term; per-term gradient pieces
    /// `x_t * (1{alt=chosen} * S - D_alt)` are assembled once per row.
    fn row_loglik_grad(
        &self,
        row: &Row,
        params: &[f64],
        draws: &DrawMatrix,
        grad: &mut [f64],
        sd_acc: &mut [f64],
    ) -> f64 {
        let n_r = self.effective_draws(draws);
        let mut base = [0.0f64; 4];
        self.row_base_utilities(row, params, &mut base);

        let mut util = [0.0f64; 4];
        let mut probs = [0.0f64; 4];
        let mut chosen_sum = 0.0f64; // S = sum_r p_r
        let mut cross = [0.0f64; 4]; // D_a = sum_r p_r * p_{r,a}
        sd_acc.fill(0.0); // E_k = sum_r p_r (1{alt=chosen} - p_{r,alt}) d_{r,k}
        for r in 0..n_r {
            util = base;
            let draw = if self.random_terms.is_empty() {
                &[][..]
            } else {
                draws.at(row.individual, r)
            };
            for rt in &self.random_terms {
                util[rt.alt] += params[rt.sd_slot].abs() * draw[rt.dim] * row.values[rt.term];
            }
            softmax_masked(&util, &row.avail, &mut probs);
            let p = probs[row.chosen];
            chosen_sum += p;
            for (c, pa) in cross.iter_mut().zip(probs) {
                *c += p * pa;
            }
            for (k, rt) in self.random_terms.iter().enumerate() {
                let indicator = if rt.alt == row.chosen { 1.0 } else { 0.0 };
                sd_acc[k] += p * (indicator - probs[rt.alt]) * draw[rt.dim];
            }
        }

        let pbar = chosen_sum / n_r as f64;
        if pbar > PROBABILITY_FLOOR {
            let scale = row.weight / (n_r as f64 * pbar);
            for (t, &a) in self.term_alt.iter().enumerate() {
                let x = row.values[t];
                if x == 0.0 {
                    continue;
                }
                let indicator = if a == row.chosen { 1.0 } else { 0.0 };
                grad[self.layout.primary_slot(t)] +=
                    scale * x * (indicator * chosen_sum - cross[a]);
            }
            for (k, rt) in self.random_terms.iter().enumerate() {
                let sign = if params[rt.sd_slot] < 0.0 { -1.0 } else { 1.0 };
                grad[rt.sd_slot] += scale * sign * row.values[rt.term] * sd_acc[k];
            }
        }
        row.weight * pbar.max(PROBABILITY_FLOOR).ln()
    }

    /// Simulated log-likelihood at `params`.
    pub fn loglik(&self, params: &[f64], draws: &DrawMatrix) -> Result<f64> {
        self.check_args(params, draws)?;
        let partials = self.map_chunks(|range| {
            let mut sum = 0.0;
            for row in &self.rows[range] {
                let pbar = self.row_chosen_pbar(row, params, draws);
                sum += row.weight * pbar.max(PROBABILITY_FLOOR).ln();
            }
            sum
        });
        Ok(partials.into_iter().sum())
    }

    /// Simulated log-likelihood and its analytic gradient.
    pub fn loglik_grad(&self, params: &[f64], draws: &DrawMatrix) -> Result<(f64, Vec<f64>)> {
        self.check_args(params, draws)?;
        let n_params = self.n_params();
        let partials = self.map_chunks(|range| {
            let mut sd_acc = vec![0.0; self.random_terms.len()];
            let mut grad = vec![0.0; n_params];
            let mut sum = 0.0;
            for row in &self.rows[range] {
                sum += self.row_loglik_grad(row, params, draws, &mut grad, &mut sd_acc);
            }
            (sum, grad)
        });
        let mut ll = 0.0;
        let mut grad = vec![0.0; n_params];
        for (part_ll, part_grad) in partials {
            ll += part_ll;
            for (g, pg) in grad.iter_mut().zip(&part_grad) {
                *g += pg;
            }
        }
        Ok((ll, grad))
    }

    /// Per-observation score vectors (gradient of each row's weighted
    /// log-likelihood), used by the outer-product covariance estimator.
    pub fn observation_scores(&self, params: &[f64], draws: &DrawMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_args(params, draws)?;
        let n_params = self.n_params();
        let chunks = self.map_chunks(|range| {
            let mut sd_acc = vec![0.0; self.random_terms.len()];
            let mut out = Vec::with_capacity(range.len());
            for row in &self.rows[range] {
                let mut grad = vec![0.0; n_params];
                self.row_loglik_grad(row, params, draws, &mut grad, &mut sd_acc);
                out.push(grad);
            }
            out
        });
        Ok(chunks.into_iter().flatten().collect())
    }

    /// Simulated probability of each alternative for one observation.
    pub fn simulated_probabilities(
        &self,
        obs_index: usize,
        params: &[f64],
        draws: &DrawMatrix,
    ) -> Result<[f64; 4]> {
        self.check_args(params, draws)?;
        let row = self
            .rows
            .get(obs_index)
            .ok_or_else(|| Error::invalid(format!("observation index {obs_index} out of range")))?;
        let n_r = self.effective_draws(draws);
        let mut coefs = vec![0.0; self.term_alt.len()];
        let mut util = [0.0f64; 4];
        let mut probs = [0.0f64; 4];
        let mut acc = [0.0f64; 4];
        for r in 0..n_r {
            self.fill_coefs(params, self.draw_slice(draws, row.individual, r), &mut coefs);
            self.row_utilities(row, &coefs, &mut util);
            softmax_masked(&util, &row.avail, &mut probs);
            for (a, p) in acc.iter_mut().zip(probs) {
                *a += p;
            }
        }
        for a in &mut acc {
            *a /= n_r as f64;
        }
        Ok(acc)
    }

    /// Simulated probability of the chosen alternative for one observation.
    pub fn simulated_chosen_probability(
        &self,
        obs_index: usize,
        params: &[f64],
        draws: &DrawMatrix,
    ) -> Result<f64> {
        let row = self
            .rows
            .get(obs_index)
            .ok_or_else(|| Error::invalid(format!("observation index {obs_index} out of range")))?;
        Ok(self.simulated_probabilities(obs_index, params, draws)?[row.chosen])
    }

    /// Equal-shares log-likelihood over the compiled rows:
    /// `sum_j w_j * ln(1 / J_j)` with `J_j` the count of available
    /// alternatives.
    pub fn null_loglik(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                let j = row.avail.iter().filter(|&&a| a).count() as f64;
                row.weight * (1.0 / j).ln()
            })
            .sum()
    }

    /// Splits rows into fixed-size chunks, evaluates them in parallel, and
    /// returns the per-chunk results in chunk order.
    fn map_chunks<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> T + Sync,
    {
        let n = self.rows.len();
        let n_chunks = n.div_ceil(CHUNK);
        (0..n_chunks)
            .into_par_iter()
            .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(n)))
            .collect()
    }
}

/// Max-stabilized softmax over the available alternatives; unavailable ones
/// get probability zero.
#[inline]
pub(crate) fn softmax_masked(util: &[f64; 4], avail: &[bool; 4], probs: &mut [f64; 4]) {
    let mut max = f64::NEG_INFINITY;
    for a in 0..4 {
        if avail[a] && util[a] > max {
            max = util[a];
        }
    }
    let mut denom = 0.0;
    for a in 0..4 {
        if avail[a] {
            let e = (util[a] - max).exp();
            probs[a] = e;
            denom += e;
        } else {
            probs[a] = 0.0;
        }
    }
    for p in probs.iter_mut() {
        *p /= denom;
    }
}

/// Closed-form logit probabilities for one utility vector.
pub fn mnl_probabilities(utilities: &[f64; 4], available: &[bool; 4]) -> Result<[f64; 4]> {
    if !available.iter().any(|&a| a) {
        return Err(Error::invalid("no available alternatives"));
    }
    let mut probs = [0.0f64; 4];
    softmax_masked(utilities, available, &mut probs);
    Ok(probs)
}

/// Systematic utilities of one observation at one draw, by covariate lookup.
///
/// Rejects observations missing a referenced covariate, identifying the term
/// and observation. Unavailable alternatives get negative infinity.
pub fn utilities(
    spec: &ModelSpecification,
    params: &[f64],
    obs: &ChoiceObservation,
    draw: &[f64],
) -> Result<[f64; 4]> {
    let layout = spec.layout();
    if params.len() != layout.n_params() {
        return Err(Error::invalid(format!(
            "expected {} parameters, got {}",
            layout.n_params(),
            params.len()
        )));
    }
    let mut util = [0.0f64; 4];
    for (a, u) in util.iter_mut().enumerate() {
        if !obs.available[a] {
            *u = f64::NEG_INFINITY;
        }
    }
    for (t, term) in spec.terms.iter().enumerate() {
        let value = if term.is_constant() {
            1.0
        } else {
            obs.covariate(&term.covariate)
                .ok_or_else(|| Error::MissingCovariate {
                    term: term.name.clone(),
                    covariate: term.covariate.clone(),
                    obs: obs.obs_id.clone(),
                })?
        };
        let coef = match layout.random_dim(t) {
            None => params[layout.primary_slot(t)],
            Some(d) => {
                let draw_d = draw.get(d).copied().ok_or_else(|| {
                    Error::invalid(format!(
                        "draw vector has {} dims, term `{}` needs dim {d}",
                        draw.len(),
                        term.name
                    ))
                })?;
                params[layout.primary_slot(t)]
                    + params[layout.sd_slot(t).unwrap()].abs() * draw_d
            }
        };
        let a = term.alternative.index();
        if obs.available[a] {
            util[a] += coef * value;
        }
    }
    Ok(util)
}

/// Equal-shares log-likelihood straight from observations (before
/// compilation): `sum_j w_j * ln(1 / J_j)`.
pub fn null_loglik(data: &[ChoiceObservation]) -> f64 {
    data.iter()
        .map(|obs| {
            let j = obs.available.iter().filter(|&&a| a).count() as f64;
            obs.weight * (1.0 / j).ln()
        })
        .sum()
}
