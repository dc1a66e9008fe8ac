//! Average marginal effects and random-coefficient sign-share diagnostics.
//!
//! Each non-constant term gets one row: the average change in all four
//! choice probabilities from perturbing that term's covariate where it
//! enters that term's alternative. Binary covariates (all observed values in
//! {0, 1}) use discrete 0-to-1 differencing; continuous covariates use the
//! analytic derivative. Probabilities are simulated with the same draw
//! configuration the estimation used, so the effects are consistent with the
//! fitted objective.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Alternative, ChoiceObservation};
use crate::error::{Error, Result};
use crate::estimate::EstimationResult;
use crate::likelihood::{softmax_masked, Model};
use crate::spec::TermKind;
use crate::stats::normal_cdf;

pub const EFFECTS_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectMethod {
    /// 0-to-1 discrete differencing, exact for indicators.
    Discrete,
    /// Analytic probability derivative.
    Derivative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalEffectsRow {
    pub term: String,
    pub covariate: String,
    pub alternative: Alternative,
    pub kind: TermKind,
    pub method: EffectMethod,
    /// Effect on each alternative's choice probability, in probability units.
    pub effects: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalEffectsTable {
    pub schema_version: u32,
    pub rows: Vec<MarginalEffectsRow>,
}

/// Fraction of a normal mixing distribution lying below zero,
/// `Phi(-mean / sd)`: the share of the population for whom the coefficient
/// reduces the alternative's utility.
pub fn share_below_zero(mean: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(Error::invalid(format!(
            "share_below_zero requires sd > 0, got {sd}"
        )));
    }
    Ok(normal_cdf(-mean / sd))
}

/// Average marginal effects of every non-constant term in the fitted model.
pub fn marginal_effects(
    result: &EstimationResult,
    data: &[ChoiceObservation],
) -> Result<MarginalEffectsTable> {
    let names: Vec<String> = result
        .spec
        .terms
        .iter()
        .filter(|t| !t.is_constant())
        .map(|t| t.name.clone())
        .collect();
    marginal_effects_for_terms(result, data, &names)
}

/// Average marginal effects of the named terms; rejects names missing from
/// the fitted specification.
pub fn marginal_effects_for_terms(
    result: &EstimationResult,
    data: &[ChoiceObservation],
    term_names: &[String],
) -> Result<MarginalEffectsTable> {
    let spec = &result.spec;
    let model = Model::compile(spec, data, result.options.draw_assignment)?;
    let draws = model.build_draws(result.options.n_draws, result.options.skip)?;
    let params = &result.parameters;
    if params.len() != model.n_params() {
        return Err(Error::invalid(format!(
            "result carries {} parameters, specification needs {}",
            params.len(),
            model.n_params()
        )));
    }

    let mut term_indices = Vec::with_capacity(term_names.len());
    for name in term_names {
        let t = spec
            .terms
            .iter()
            .position(|term| &term.name == name)
            .ok_or_else(|| Error::invalid(format!("term `{name}` not in the specification")))?;
        if spec.terms[t].is_constant() {
            return Err(Error::invalid(format!(
                "term `{name}` is a constant; marginal effects are undefined for it"
            )));
        }
        term_indices.push(t);
    }

    // A covariate counts as binary when every compiled value is 0 or 1.
    let rows = model.rows();
    let methods: Vec<EffectMethod> = term_indices
        .iter()
        .map(|&t| {
            let binary = rows
                .iter()
                .all(|row| row.values[t] == 0.0 || row.values[t] == 1.0);
            if binary {
                EffectMethod::Discrete
            } else {
                EffectMethod::Derivative
            }
        })
        .collect();

    let term_alt = model.term_alt();
    let n_r = if model.n_random() == 0 { 1 } else { draws.n_draws() };
    let n_terms_total = spec.terms.len();

    // Fixed-size chunks combined in chunk order keep the averages
    // deterministic under any worker count.
    const CHUNK: usize = 256;
    let n_chunks = rows.len().div_ceil(CHUNK);
    let partials: Vec<Vec<[f64; 4]>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let range = c * CHUNK..((c + 1) * CHUNK).min(rows.len());
            let mut acc = vec![[0.0f64; 4]; term_indices.len()];
            let mut coefs = vec![0.0; n_terms_total];
            let mut util = [0.0f64; 4];
            let mut probs = [0.0f64; 4];
            let mut shifted;
            let mut p_hi = [0.0f64; 4];
            let mut p_lo = [0.0f64; 4];
            for row in &rows[range] {
                for r in 0..n_r {
                    let draw = if model.n_random() == 0 {
                        &[][..]
                    } else {
                        draws.at(row.individual, r)
                    };
                    model.fill_coefs(params, draw, &mut coefs);
                    model.row_utilities(row, &coefs, &mut util);
                    softmax_masked(&util, &row.avail, &mut probs);

                    for (k, (&t, method)) in term_indices.iter().zip(&methods).enumerate() {
                        let a = term_alt[t];
                        if !row.avail[a] {
                            continue;
                        }
                        match method {
                            EffectMethod::Derivative => {
                                // dP_i/dx through term t: c_t * P_i * (1{i=a} - P_a)
                                let c = coefs[t];
                                for i in 0..4 {
                                    let indicator = if i == a { 1.0 } else { 0.0 };
                                    acc[k][i] += c * probs[i] * (indicator - probs[a]) / n_r as f64;
                                }
                            }
                            EffectMethod::Discrete => {
                                let c = coefs[t];
                                let x = row.values[t];
                                shifted = util;
                                shifted[a] += c * (1.0 - x);
                                softmax_masked(&shifted, &row.avail, &mut p_hi);
                                shifted[a] += c * (0.0 - 1.0);
                                softmax_masked(&shifted, &row.avail, &mut p_lo);
                                for i in 0..4 {
                                    acc[k][i] += (p_hi[i] - p_lo[i]) / n_r as f64;
                                }
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let n_obs = rows.len() as f64;
    let mut totals = vec![[0.0f64; 4]; term_indices.len()];
    for part in partials {
        for (total, p) in totals.iter_mut().zip(part) {
            for i in 0..4 {
                total[i] += p[i];
            }
        }
    }

    let rows_out = term_indices
        .iter()
        .zip(&methods)
        .zip(&totals)
        .map(|((&t, &method), total)| {
            let term = &spec.terms[t];
            let mut effects = *total;
            for e in &mut effects {
                *e /= n_obs;
            }
            MarginalEffectsRow {
                term: term.name.clone(),
                covariate: term.covariate.clone(),
                alternative: term.alternative,
                kind: term.kind,
                method,
                effects,
            }
        })
        .collect();

    Ok(MarginalEffectsTable {
        schema_version: EFFECTS_SCHEMA_VERSION,
        rows: rows_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{maximize, EstimationOptions};
    use crate::spec::{ModelSpecification, Term};
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn obs(id: &str, chosen: Alternative, covariates: &[(&str, f64)]) -> ChoiceObservation {
        let map: BTreeMap<String, f64> = covariates
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        ChoiceObservation::new(id, id, chosen, [true; 4], map, 1.0).unwrap()
    }

    #[test]
    fn share_below_zero_reference_points() {
        // Frozen against an independent normal CDF.
        let a = share_below_zero(-2.54, 2.84).unwrap();
        assert_abs_diff_eq!(a, 0.8144370038877633, epsilon = 1e-12);
        let b = share_below_zero(-1.04, 1.95).unwrap();
        assert_abs_diff_eq!(b, 0.7030985713961488, epsilon = 1e-12);
        assert_eq!(share_below_zero(0.0, 1.7).unwrap(), 0.5);
        assert!(share_below_zero(1.0, 0.0).is_err());
        assert!(share_below_zero(1.0, -2.0).is_err());
    }

    #[test]
    fn share_below_zero_complement_identity() {
        for (m, s) in [(0.3, 1.2), (-2.5, 0.7), (4.0, 3.3)] {
            let a = share_below_zero(m, s).unwrap();
            let b = share_below_zero(-m, s).unwrap();
            assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    fn fitted_binary_model() -> (EstimationResult, Vec<ChoiceObservation>) {
        let mut data = Vec::new();
        for i in 0..200 {
            let z = (i % 2) as f64;
            let chosen = match i % 10 {
                0 | 1 | 2 | 3 => Alternative::PersonalVehicle,
                4 | 5 | 6 => Alternative::Walk,
                7 | 8 => Alternative::PublicTransport,
                _ => Alternative::OtherMode,
            };
            data.push(obs(&format!("o{i}"), chosen, &[("z", z), ("c", i as f64 / 200.0)]));
        }
        let spec = ModelSpecification::new(vec![
            Term::constant("const_pv", Alternative::PersonalVehicle),
            Term::fixed("z_walk", "z", Alternative::Walk),
            Term::fixed("c_pt", "c", Alternative::PublicTransport),
        ]);
        let result = maximize(&spec, &data, &EstimationOptions::default()).unwrap();
        (result, data)
    }

    #[test]
    fn rows_sum_to_zero() {
        let (result, data) = fitted_binary_model();
        let table = marginal_effects(&result, &data).unwrap();
        assert_eq!(table.rows.len(), 2);
        for row in &table.rows {
            let sum: f64 = row.effects.iter().sum();
            assert!(sum.abs() < 1e-10, "row {} sums to {sum}", row.term);
        }
        assert_eq!(table.rows[0].method, EffectMethod::Discrete);
        assert_eq!(table.rows[1].method, EffectMethod::Derivative);
    }

    #[test]
    fn binary_effect_sign_matches_coefficient() {
        let (result, data) = fitted_binary_model();
        let table = marginal_effects(&result, &data).unwrap();
        let z_row = &table.rows[0];
        let z_coef = result.terms[1].coefficient.estimate;
        let walk = Alternative::Walk.index();
        assert_eq!(z_row.effects[walk].signum(), z_coef.signum());
    }

    #[test]
    fn zero_coefficient_gives_zero_effects() {
        let (mut result, data) = fitted_binary_model();
        // Force the z coefficient to zero and recompute.
        let slot = result.spec.layout().primary_slot(1);
        result.parameters[slot] = 0.0;
        let table = marginal_effects(&result, &data).unwrap();
        for e in table.rows[0].effects {
            assert_eq!(e, 0.0);
        }
    }

    #[test]
    fn unknown_term_is_rejected() {
        let (result, data) = fitted_binary_model();
        let err = marginal_effects_for_terms(&result, &data, &["nope".to_string()]);
        assert!(err.is_err());
        let err2 = marginal_effects_for_terms(&result, &data, &["const_pv".to_string()]);
        assert!(err2.is_err());
    }

    #[test]
    fn derivative_matches_finite_difference_in_two_alt_logit() {
        // Two available alternatives, one continuous covariate with a known
        // coefficient: the analytic derivative must match brute-force
        // probability differencing.
        let mut data = Vec::new();
        for i in 0..50 {
            let x = -1.0 + (i as f64) / 25.0;
            let chosen = if i % 2 == 0 {
                Alternative::Walk
            } else {
                Alternative::PersonalVehicle
            };
            let map: BTreeMap<String, f64> = [("x".to_string(), x)].into();
            data.push(
                ChoiceObservation::new(
                    format!("o{i}"),
                    format!("o{i}"),
                    chosen,
                    [true, false, true, false],
                    map,
                    1.0,
                )
                .unwrap(),
            );
        }
        let spec = ModelSpecification::new(vec![Term::fixed("x_walk", "x", Alternative::Walk)]);
        let beta = 0.8;
        let result_template = maximize(&spec, &data, &EstimationOptions::default()).unwrap();
        let mut result = result_template;
        result.parameters = vec![beta];

        let table = marginal_effects(&result, &data).unwrap();
        let walk = Alternative::Walk.index();

        // Oracle: average beta * p * (1 - p), and finite differencing with
        // h = 1e-6.
        let mut analytic = 0.0;
        let mut fd = 0.0;
        for o in &data {
            let x = o.covariate("x").unwrap();
            let p = 1.0 / (1.0 + (-beta * x).exp());
            analytic += beta * p * (1.0 - p);
            let h = 1e-6;
            let p_hi = 1.0 / (1.0 + (-beta * (x + h)).exp());
            let p_lo = 1.0 / (1.0 + (-beta * (x - h)).exp());
            fd += (p_hi - p_lo) / (2.0 * h);
        }
        analytic /= data.len() as f64;
        fd /= data.len() as f64;

        assert_abs_diff_eq!(table.rows[0].effects[walk], analytic, epsilon = 1e-12);
        assert_abs_diff_eq!(table.rows[0].effects[walk], fd, epsilon = 1e-7);
    }
}
