//! Deterministic text and CSV rendering of estimation results and marginal
//! effects. Identical inputs always produce byte-identical output.

use std::fmt::Write;

use crate::data::Alternative;
use crate::effects::MarginalEffectsTable;
use crate::estimate::{CoefficientEstimate, EstimationResult, TermEstimate};
use crate::spec::TermKind;

const MISSING: &str = "—";

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(v) => format!("{v:.decimals$}"),
        None => MISSING.to_string(),
    }
}

/// "estimate" for fixed terms, "mean (sd)" for random terms.
fn cell(term: &TermEstimate, pick: impl Fn(&CoefficientEstimate) -> Option<f64>, decimals: usize) -> String {
    let main = fmt_opt(pick(&term.coefficient), decimals);
    match &term.sd {
        Some(sd) => format!("{main} ({})", fmt_opt(pick(sd), decimals)),
        None => main,
    }
}

fn push_kv(out: &mut String, key: &str, value: impl AsRef<str>) {
    let _ = writeln!(out, "{key:<28}{}", value.as_ref());
}

/// Renders the summary table: fit statistics, then per-term estimates
/// grouped by the alternative they are defined for, random terms printed as
/// "mean (sd)" with parenthesized statistics.
pub fn render_estimation_text(result: &EstimationResult) -> String {
    let mut out = String::new();
    let title = if result.spec.n_random() > 0 {
        "Random parameters logit model"
    } else {
        "Multinomial logit model"
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", "=".repeat(title.len()));
    push_kv(&mut out, "Observations", result.n_observations.to_string());
    push_kv(
        &mut out,
        "Dropped (incomplete)",
        result.n_dropped.to_string(),
    );
    push_kv(&mut out, "Individuals", result.n_individuals.to_string());
    push_kv(
        &mut out,
        "Draws (R)",
        format!("{} (skip {})", result.options.n_draws, result.options.skip),
    );
    push_kv(
        &mut out,
        "Log-likelihood at zero",
        format!("{:.2}", result.ll_zero),
    );
    push_kv(
        &mut out,
        "Log-likelihood at conv.",
        format!("{:.2}", result.ll_beta),
    );
    push_kv(&mut out, "Pseudo R-squared", format!("{:.4}", result.pseudo_r2));
    push_kv(
        &mut out,
        "Converged",
        if result.converged {
            format!("yes ({} iterations)", result.iterations)
        } else {
            format!("NO ({} iterations)", result.iterations)
        },
    );
    push_kv(
        &mut out,
        "Gradient max |g|",
        format!("{:.2e}", result.gradient_norm),
    );
    if !result.hessian_ok {
        push_kv(&mut out, "Standard errors", "unavailable (singular Hessian)");
    }
    out.push('\n');

    let name_w = result
        .terms
        .iter()
        .map(|t| t.name.len() + 2)
        .chain(std::iter::once(24))
        .max()
        .unwrap();
    let _ = writeln!(
        out,
        "{:<name_w$} {:>20} {:>20} {:>16}",
        "Variable", "Coefficient", "t-statistic", "p-value"
    );
    let rule_len = name_w + 20 + 20 + 16 + 3;
    let _ = writeln!(out, "{}", "-".repeat(rule_len));
    for alternative in Alternative::ALL {
        let rows: Vec<&TermEstimate> = result
            .terms
            .iter()
            .filter(|t| t.alternative == alternative)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out, "Defined for {}", alternative.display_name());
        for term in rows {
            let _ = writeln!(
                out,
                "{:<name_w$} {:>20} {:>20} {:>16}",
                format!("  {}", term.name),
                cell(term, |c| Some(c.estimate), 4),
                cell(term, |c| c.t_stat, 2),
                cell(term, |c| c.p_value, 3),
            );
        }
    }
    out
}

/// Full-precision per-term CSV of the estimates.
pub fn render_estimation_csv(result: &EstimationResult) -> String {
    let mut out = String::new();
    out.push_str(
        "name,covariate,alternative,kind,estimate,std_error,t_stat,p_value,sd_estimate,sd_std_error,sd_t_stat,sd_p_value\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for term in &result.terms {
        let kind = match term.kind {
            TermKind::Fixed => "fixed",
            TermKind::RandomNormal => "random_normal",
        };
        let sd = term.sd.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            term.name,
            term.covariate,
            term.alternative.key(),
            kind,
            term.coefficient.estimate,
            opt(term.coefficient.std_error),
            opt(term.coefficient.t_stat),
            opt(term.coefficient.p_value),
            opt(sd.map(|s| s.estimate)),
            opt(sd.and_then(|s| s.std_error)),
            opt(sd.and_then(|s| s.t_stat)),
            opt(sd.and_then(|s| s.p_value)),
        );
    }
    out
}

/// Renders marginal effects grouped by the alternative each term is defined
/// for, one column per alternative.
pub fn render_effects_text(table: &MarginalEffectsTable) -> String {
    let mut out = String::new();
    let title = "Average marginal effects";
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", "=".repeat(title.len()));
    let name_w = table
        .rows
        .iter()
        .map(|r| r.term.len() + 2)
        .chain(std::iter::once(24))
        .max()
        .unwrap();
    let _ = write!(out, "{:<name_w$}", "Variable");
    for alternative in Alternative::ALL {
        let _ = write!(out, " {:>18}", alternative.display_name());
    }
    out.push('\n');
    let _ = writeln!(out, "{}", "-".repeat(name_w + 4 * 19));
    for alternative in Alternative::ALL {
        let rows: Vec<_> = table
            .rows
            .iter()
            .filter(|r| r.alternative == alternative)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out, "Defined for {}", alternative.display_name());
        for row in rows {
            let _ = write!(out, "{:<name_w$}", format!("  {}", row.term));
            for e in row.effects {
                let _ = write!(out, " {e:>18.4}");
            }
            out.push('\n');
        }
    }
    out
}

/// Full-precision CSV of marginal effects.
pub fn render_effects_csv(table: &MarginalEffectsTable) -> String {
    let mut out = String::new();
    out.push_str(
        "term,covariate,alternative,method,personal_vehicle,public_transport,walk,other_mode\n",
    );
    for row in &table.rows {
        let method = match row.method {
            crate::effects::EffectMethod::Discrete => "discrete",
            crate::effects::EffectMethod::Derivative => "derivative",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.term,
            row.covariate,
            row.alternative.key(),
            method,
            row.effects[0],
            row.effects[1],
            row.effects[2],
            row.effects[3],
        );
    }
    out
}
