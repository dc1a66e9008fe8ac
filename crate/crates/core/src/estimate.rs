//! Maximum simulated likelihood estimation: BFGS ascent, standard errors,
//! fit statistics, and the 95%-level stepwise retention rule.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{Alternative, ChoiceObservation};
use crate::error::{Error, Result};
use crate::halton::{DrawMatrix, DEFAULT_SKIP};
use crate::likelihood::{DrawAssignment, Model};
use crate::spec::{ModelSpecification, Term, TermKind};
use crate::stats::two_sided_p_value;

pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// |t| threshold for the 95% two-tailed retention rule.
pub const RETENTION_T_THRESHOLD: f64 = 1.96;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMethod {
    /// Central-difference Hessian of the analytic gradient.
    #[default]
    Numerical,
    /// Outer product of per-observation scores (BHHH).
    OuterProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    /// Zeros for coefficients and means, 0.1 for random sds.
    Zeros,
    /// Caller-provided flat parameter vector.
    Warm(Vec<f64>),
}

impl Default for StartPoint {
    fn default() -> Self {
        StartPoint::Zeros
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationOptions {
    /// Halton draws per individual (R).
    pub n_draws: usize,
    /// Discarded initial Halton points.
    pub skip: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the gradient infinity norm.
    pub gradient_tolerance: f64,
    pub hessian_method: HessianMethod,
    pub start: StartPoint,
    pub draw_assignment: DrawAssignment,
    /// Fit a fixed-coefficient model first and seed the random means from it.
    pub two_stage_start: bool,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        EstimationOptions {
            n_draws: 200,
            skip: DEFAULT_SKIP,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            hessian_method: HessianMethod::default(),
            start: StartPoint::default(),
            draw_assignment: DrawAssignment::default(),
            two_stage_start: false,
        }
    }
}

impl EstimationOptions {
    fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::invalid("n_draws must be at least 1"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::invalid("gradient_tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Point estimate with its sampling statistics; the statistics are absent
/// when the Hessian could not be inverted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
}

impl CoefficientEstimate {
    fn new(estimate: f64, std_error: Option<f64>) -> Self {
        let t_stat = std_error.map(|se| estimate / se);
        CoefficientEstimate {
            estimate,
            std_error,
            t_stat,
            p_value: t_stat.map(two_sided_p_value),
        }
    }
}

/// One term's reported estimates; random terms carry the (mean, sd) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub name: String,
    pub covariate: String,
    pub alternative: Alternative,
    pub kind: TermKind,
    /// Fixed coefficient, or the mean of a random coefficient.
    pub coefficient: CoefficientEstimate,
    /// Standard deviation of a random coefficient (reported as |sd|).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<CoefficientEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub schema_version: u32,
    pub spec: ModelSpecification,
    pub options: EstimationOptions,
    pub n_observations: usize,
    pub n_dropped: usize,
    pub n_individuals: usize,
    pub ll_zero: f64,
    pub ll_beta: f64,
    pub pseudo_r2: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// False when the covariance matrix could not be formed; all standard
    /// errors are then missing.
    pub hessian_ok: bool,
    pub terms: Vec<TermEstimate>,
    /// Raw flat parameter vector in layout order (sd slots unconstrained).
    pub parameters: Vec<f64>,
}

impl EstimationResult {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// Equal-shares null log-likelihood over the supplied observations.
pub fn null_loglik(data: &[ChoiceObservation]) -> f64 {
    crate::likelihood::null_loglik(data)
}

/// Likelihood-ratio index `1 - ll_beta / ll_zero`.
pub fn pseudo_r2(ll_zero: f64, ll_beta: f64) -> Result<f64> {
    if ll_zero == 0.0 {
        return Err(Error::invalid("pseudo_r2 undefined at ll_zero = 0"));
    }
    if ll_zero > 0.0 {
        return Err(Error::invalid(format!(
            "pseudo_r2 expects a negative null log-likelihood, got {ll_zero}"
        )));
    }
    Ok(1.0 - ll_beta / ll_zero)
}

/// Two-sided standard-normal p-value for a t-statistic.
pub fn p_value(t: f64) -> f64 {
    two_sided_p_value(t)
}

struct BfgsOutcome {
    x: Vec<f64>,
    ll: f64,
    grad: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// BFGS ascent with a backtracking (Armijo) line search, implemented as
/// minimization of the negated objective.
fn bfgs_maximize<F, G>(
    eval_both: F,
    eval_value: G,
    x0: Vec<f64>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<BfgsOutcome>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    G: Fn(&[f64]) -> Result<f64>,
{
    const ARMIJO_C1: f64 = 1e-4;
    const MIN_STEP: f64 = 1e-18;
    const CURVATURE_EPS: f64 = 1e-12;

    let n = x0.len();
    let mut x = Array1::from_vec(x0);
    let (ll0, grad0) = eval_both(x.as_slice().unwrap())?;
    if !ll0.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    // Work in minimization form: f = -ll, g = -grad.
    let mut f = -ll0;
    let mut g = Array1::from_vec(grad0.iter().map(|v| -v).collect());
    let mut h = Array2::<f64>::eye(n);
    let mut first_update_pending = true;
    let mut iterations = 0;
    let mut converged = inf_norm(&g) < tolerance;

    while !converged && iterations < max_iterations {
        iterations += 1;
        let mut direction = -h.dot(&g);
        if direction.dot(&g) >= 0.0 {
            // Not a descent direction; fall back to steepest descent.
            h = Array2::eye(n);
            first_update_pending = true;
            direction = -g.clone();
        }

        let slope = g.dot(&direction);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= MIN_STEP {
            let candidate = &x + &(alpha * &direction);
            let f_new = -eval_value(candidate.as_slice().unwrap())?;
            if f_new.is_finite() && f_new <= f + ARMIJO_C1 * alpha * slope {
                accepted = Some((candidate, f_new));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // Line search stalled; one restart from the identity metric,
            // otherwise report non-convergence at the current point.
            if !first_update_pending {
                h = Array2::eye(n);
                first_update_pending = true;
                continue;
            }
            break;
        };

        let (_, grad_new) = eval_both(x_new.as_slice().unwrap())?;
        let g_new = Array1::from_vec(grad_new.iter().map(|v| -v).collect());
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > CURVATURE_EPS * s.dot(&s).sqrt() * y.dot(&y).sqrt() {
            if first_update_pending {
                // Scale the initial metric before the first update.
                let scale = sy / y.dot(&y);
                h = Array2::eye(n) * scale;
                first_update_pending = false;
            }
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            let rho = 1.0 / sy;
            let hy = h.dot(&y);
            let yhy = y.dot(&hy);
            let s_col = s.view().insert_axis(ndarray::Axis(1));
            let hy_col = hy.view().insert_axis(ndarray::Axis(1));
            let outer_s_s = s_col.dot(&s_col.t());
            let outer_hy_s = hy_col.dot(&s_col.t());
            h = &h - &(rho * (&outer_hy_s + &outer_hy_s.t()))
                + &(rho * rho * yhy * &outer_s_s)
                + &(rho * &outer_s_s);
        }

        x = x_new;
        f = f_new;
        g = g_new;
        converged = inf_norm(&g) < tolerance;
        if std::env::var("MODECHOICE_TRACE").is_ok() {
            eprintln!(
                "iter {iterations}: ll={:.6} |g|={:.3e} alpha={:.3e} x={:?}",
                -f,
                inf_norm(&g),
                alpha,
                x.as_slice().unwrap()
            );
        }
    }

    Ok(BfgsOutcome {
        ll: -f,
        grad: g.iter().map(|v| -v).collect(),
        x: x.to_vec(),
        iterations,
        converged,
    })
}

fn inf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Symmetric-matrix inverse by Gauss-Jordan with partial pivoting; `None`
/// when a pivot collapses.
fn invert_symmetric(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut work = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = work[(col, col)].abs();
        for r in (col + 1)..n {
            if work[(r, col)].abs() > pivot_val {
                pivot_val = work[(r, col)].abs();
                pivot_row = r;
            }
        }
        if !pivot_val.is_finite() || pivot_val <= scale * 1e-13 {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                work.swap((col, c), (pivot_row, c));
                inv.swap((col, c), (pivot_row, c));
            }
        }
        let p = work[(col, col)];
        for c in 0..n {
            work[(col, c)] /= p;
            inv[(col, c)] /= p;
        }
        for r in 0..n {
            if r != col {
                let factor = work[(r, col)];
                if factor != 0.0 {
                    for c in 0..n {
                        work[(r, c)] -= factor * work[(col, c)];
                        inv[(r, c)] -= factor * inv[(col, c)];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Central-difference Hessian of the log-likelihood, from the analytic
/// gradient, with per-coordinate steps `1e-4 * (1 + |x_k|)`.
fn numerical_hessian(model: &Model, draws: &DrawMatrix, x: &[f64]) -> Result<Array2<f64>> {
    let n = x.len();
    let mut h = Array2::<f64>::zeros((n, n));
    let mut point = x.to_vec();
    for k in 0..n {
        let step = 1e-4 * (1.0 + x[k].abs());
        point[k] = x[k] + step;
        let (_, g_plus) = model.loglik_grad(&point, draws)?;
        point[k] = x[k] - step;
        let (_, g_minus) = model.loglik_grad(&point, draws)?;
        point[k] = x[k];
        for j in 0..n {
            h[(j, k)] = (g_plus[j] - g_minus[j]) / (2.0 * step);
        }
    }
    // Symmetrize.
    for k in 0..n {
        for j in (k + 1)..n {
            let avg = 0.5 * (h[(j, k)] + h[(k, j)]);
            h[(j, k)] = avg;
            h[(k, j)] = avg;
        }
    }
    Ok(h)
}

fn covariance_matrix(
    model: &Model,
    draws: &DrawMatrix,
    x: &[f64],
    method: HessianMethod,
) -> Result<Option<Array2<f64>>> {
    let cov = match method {
        HessianMethod::Numerical => {
            let hessian = numerical_hessian(model, draws, x)?;
            invert_symmetric(&(-&hessian))
        }
        HessianMethod::OuterProduct => {
            let scores = model.observation_scores(x, draws)?;
            let n = x.len();
            let mut b = Array2::<f64>::zeros((n, n));
            for s in &scores {
                for i in 0..n {
                    for j in 0..n {
                        b[(i, j)] += s[i] * s[j];
                    }
                }
            }
            invert_symmetric(&b)
        }
    };
    Ok(cov)
}

fn start_vector(model: &Model, options: &EstimationOptions) -> Result<Vec<f64>> {
    match &options.start {
        StartPoint::Zeros => Ok(model.layout().start_point()),
        StartPoint::Warm(v) => {
            if v.len() != model.n_params() {
                return Err(Error::invalid(format!(
                    "warm start has {} parameters, specification needs {}",
                    v.len(),
                    model.n_params()
                )));
            }
            Ok(v.clone())
        }
    }
}

/// Maximizes the simulated log-likelihood of `spec` on `data`.
pub fn maximize(
    spec: &ModelSpecification,
    data: &[ChoiceObservation],
    options: &EstimationOptions,
) -> Result<EstimationResult> {
    options.validate()?;
    let model = Model::compile(spec, data, options.draw_assignment)?;
    let draws = model.build_draws(options.n_draws, options.skip)?;

    let mut x0 = start_vector(&model, options)?;
    if options.two_stage_start && model.n_random() > 0 && options.start == StartPoint::Zeros {
        x0 = two_stage_seed(spec, data, options)?;
    }

    let outcome = bfgs_maximize(
        |x| model.loglik_grad(x, &draws),
        |x| model.loglik(x, &draws),
        x0,
        options.gradient_tolerance,
        options.max_iterations,
    )?;

    let cov = covariance_matrix(&model, &draws, &outcome.x, options.hessian_method)?;
    let hessian_ok = cov.is_some();
    let layout = model.layout();
    let se_for_slot = |slot: usize| -> Option<f64> {
        cov.as_ref().and_then(|c| {
            let v = c[(slot, slot)];
            if v > 0.0 && v.is_finite() {
                Some(v.sqrt())
            } else {
                None
            }
        })
    };

    let mut terms = Vec::with_capacity(spec.terms.len());
    for (t, term) in spec.terms.iter().enumerate() {
        let primary = layout.primary_slot(t);
        let coefficient = CoefficientEstimate::new(outcome.x[primary], se_for_slot(primary));
        let sd = layout.sd_slot(t).map(|slot| {
            // Reported sd is |raw|; its se is invariant to the sign flip.
            CoefficientEstimate::new(outcome.x[slot].abs(), se_for_slot(slot))
        });
        terms.push(TermEstimate {
            name: term.name.clone(),
            covariate: term.covariate.clone(),
            alternative: term.alternative,
            kind: term.kind,
            coefficient,
            sd,
        });
    }

    let ll_zero = model.null_loglik();
    let ll_beta = outcome.ll;
    Ok(EstimationResult {
        schema_version: RESULT_SCHEMA_VERSION,
        spec: spec.clone(),
        options: options.clone(),
        n_observations: model.n_observations(),
        n_dropped: model.dropped_incomplete(),
        n_individuals: model.n_individuals(),
        ll_zero,
        ll_beta,
        pseudo_r2: pseudo_r2(ll_zero, ll_beta)?,
        converged: outcome.converged,
        iterations: outcome.iterations,
        gradient_norm: outcome.grad.iter().fold(0.0f64, |m, g| m.max(g.abs())),
        hessian_ok,
        terms,
        parameters: outcome.x,
    })
}

/// Fits the all-fixed version of the specification and seeds random means
/// from it (sds start at 0.1).
fn two_stage_seed(
    spec: &ModelSpecification,
    data: &[ChoiceObservation],
    options: &EstimationOptions,
) -> Result<Vec<f64>> {
    let mut fixed_spec = spec.clone();
    for term in &mut fixed_spec.terms {
        term.kind = TermKind::Fixed;
    }
    let mut stage1_options = options.clone();
    stage1_options.two_stage_start = false;
    stage1_options.start = StartPoint::Zeros;
    let stage1 = maximize(&fixed_spec, data, &stage1_options)?;

    let layout = spec.layout();
    let mut x0 = layout.start_point();
    for (t, _) in spec.terms.iter().enumerate() {
        x0[layout.primary_slot(t)] = stage1.terms[t].coefficient.estimate;
    }
    Ok(x0)
}

/// Action taken by one stepwise round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action", content = "term")]
pub enum RetentionStep {
    Dropped(String),
    DemotedToFixed(String),
}

/// Iteratively re-estimates, each round removing the least significant
/// non-constant term (|t| < 1.96) or demoting a random term whose sd is
/// insignificant, until everything retained qualifies.
///
/// Random terms are judged on the sd's t-statistic: an insignificant sd
/// demotes the term to fixed, and only then can an insignificant fixed
/// coefficient drop it entirely. Constants are always retained.
pub fn stepwise_retain(
    spec: &ModelSpecification,
    data: &[ChoiceObservation],
    options: &EstimationOptions,
) -> Result<(ModelSpecification, EstimationResult, Vec<RetentionStep>)> {
    let mut current = spec.clone();
    let mut steps = Vec::new();
    loop {
        let result = maximize(&current, data, options)?;
        let mut weakest: Option<(f64, usize, bool)> = None; // (|t|, term index, is_demotion)
        for (t, term) in current.terms.iter().enumerate() {
            if term.is_constant() {
                continue;
            }
            let (stat, demote) = match term.kind {
                TermKind::Fixed => (result.terms[t].coefficient.t_stat, false),
                TermKind::RandomNormal => {
                    (result.terms[t].sd.as_ref().and_then(|s| s.t_stat), true)
                }
            };
            // A missing standard error counts as no evidence at all.
            let abs_t = stat.map(f64::abs).unwrap_or(0.0);
            if abs_t < RETENTION_T_THRESHOLD
                && weakest.map(|(w, _, _)| abs_t < w).unwrap_or(true)
            {
                weakest = Some((abs_t, t, demote));
            }
        }
        match weakest {
            None => return Ok((current, result, steps)),
            Some((_, t, true)) => {
                current.terms[t].kind = TermKind::Fixed;
                steps.push(RetentionStep::DemotedToFixed(current.terms[t].name.clone()));
            }
            Some((_, t, false)) => {
                steps.push(RetentionStep::Dropped(current.terms[t].name.clone()));
                current.terms.remove(t);
                if current.terms.is_empty() {
                    return Err(Error::InvalidSpec(
                        "stepwise retention removed every term".into(),
                    ));
                }
            }
        }
    }
}

/// Convenience builder for intercept-only specifications (constants on every
/// non-reference alternative).
pub fn constants_only_spec() -> ModelSpecification {
    ModelSpecification::new(vec![
        Term::constant("const_personal_vehicle", Alternative::PersonalVehicle),
        Term::constant("const_public_transport", Alternative::PublicTransport),
        Term::constant("const_walk", Alternative::Walk),
    ])
}
