//! Model specifications: named terms binding covariates to alternatives.
//!
//! A term is either fixed (one coefficient) or random-normal (a mean and a
//! standard deviation estimated jointly). The flat parameter vector walks the
//! terms in order, fixed terms taking one slot and random terms two adjacent
//! slots (mean then sd). The sd slot is stored unconstrained and enters the
//! likelihood through its absolute value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Alternative;
use crate::error::{Error, Result};

/// Covariate name marking an alternative-specific constant.
pub const CONSTANT: &str = "CONSTANT";

pub const SPEC_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Fixed,
    RandomNormal,
}

/// One utility term: `coefficient * covariate` entering one alternative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub covariate: String,
    pub alternative: Alternative,
    pub kind: TermKind,
}

impl Term {
    pub fn fixed(name: &str, covariate: &str, alternative: Alternative) -> Self {
        Term {
            name: name.to_string(),
            covariate: covariate.to_string(),
            alternative,
            kind: TermKind::Fixed,
        }
    }

    pub fn random_normal(name: &str, covariate: &str, alternative: Alternative) -> Self {
        Term {
            name: name.to_string(),
            covariate: covariate.to_string(),
            alternative,
            kind: TermKind::RandomNormal,
        }
    }

    pub fn constant(name: &str, alternative: Alternative) -> Self {
        Term::fixed(name, CONSTANT, alternative)
    }

    pub fn is_constant(&self) -> bool {
        self.covariate == CONSTANT
    }
}

fn default_reference() -> Alternative {
    Alternative::OtherMode
}

fn default_schema_version() -> u32 {
    SPEC_SCHEMA_VERSION
}

/// An ordered list of terms plus the reference alternative (which carries no
/// constant, fixing the location of the utility scale).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpecification {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default = "default_reference")]
    pub reference_alternative: Alternative,
    pub terms: Vec<Term>,
}

impl ModelSpecification {
    pub fn new(terms: Vec<Term>) -> Self {
        ModelSpecification {
            schema_version: SPEC_SCHEMA_VERSION,
            reference_alternative: default_reference(),
            terms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::InvalidSpec("specification has no terms".into()));
        }
        let mut names = std::collections::HashSet::new();
        let mut bindings = std::collections::HashSet::new();
        for term in &self.terms {
            if term.name.trim().is_empty() {
                return Err(Error::InvalidSpec("term with empty name".into()));
            }
            if term.covariate.trim().is_empty() {
                return Err(Error::InvalidSpec(format!(
                    "term `{}` has an empty covariate",
                    term.name
                )));
            }
            if !names.insert(term.name.as_str()) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate term name `{}`",
                    term.name
                )));
            }
            if !bindings.insert((term.covariate.as_str(), term.alternative)) {
                return Err(Error::InvalidSpec(format!(
                    "covariate `{}` bound to alternative `{}` more than once",
                    term.covariate, term.alternative
                )));
            }
            if term.is_constant() && term.alternative == self.reference_alternative {
                return Err(Error::InvalidSpec(format!(
                    "constant term `{}` sits on the reference alternative `{}`",
                    term.name, self.reference_alternative
                )));
            }
        }
        Ok(())
    }

    pub fn n_random(&self) -> usize {
        self.terms
            .iter()
            .filter(|t| t.kind == TermKind::RandomNormal)
            .count()
    }

    pub fn layout(&self) -> ParameterLayout {
        ParameterLayout::new(self)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: ModelSpecification = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let spec: ModelSpecification = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// Role of one flat-vector slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotRole {
    Fixed,
    RandomMean,
    RandomSd,
}

#[derive(Clone, Debug)]
pub struct Slot {
    pub term_index: usize,
    pub role: SlotRole,
    pub name: String,
}

/// Stable mapping between terms and the flat parameter vector.
#[derive(Clone, Debug)]
pub struct ParameterLayout {
    slots: Vec<Slot>,
    /// Per term: (primary slot, sd slot for random terms).
    term_slots: Vec<(usize, Option<usize>)>,
    /// Per random term (in term order): its draw dimension.
    random_dims: Vec<Option<usize>>,
}

impl ParameterLayout {
    fn new(spec: &ModelSpecification) -> Self {
        let mut slots = Vec::new();
        let mut term_slots = Vec::new();
        let mut random_dims = Vec::new();
        let mut next_dim = 0;
        for (i, term) in spec.terms.iter().enumerate() {
            match term.kind {
                TermKind::Fixed => {
                    term_slots.push((slots.len(), None));
                    random_dims.push(None);
                    slots.push(Slot {
                        term_index: i,
                        role: SlotRole::Fixed,
                        name: term.name.clone(),
                    });
                }
                TermKind::RandomNormal => {
                    term_slots.push((slots.len(), Some(slots.len() + 1)));
                    random_dims.push(Some(next_dim));
                    next_dim += 1;
                    slots.push(Slot {
                        term_index: i,
                        role: SlotRole::RandomMean,
                        name: term.name.clone(),
                    });
                    slots.push(Slot {
                        term_index: i,
                        role: SlotRole::RandomSd,
                        name: format!("{}.sd", term.name),
                    });
                }
            }
        }
        ParameterLayout {
            slots,
            term_slots,
            random_dims,
        }
    }

    pub fn n_params(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn names(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.name.clone()).collect()
    }

    #[inline]
    pub fn primary_slot(&self, term: usize) -> usize {
        self.term_slots[term].0
    }

    #[inline]
    pub fn sd_slot(&self, term: usize) -> Option<usize> {
        self.term_slots[term].1
    }

    #[inline]
    pub fn random_dim(&self, term: usize) -> Option<usize> {
        self.random_dims[term]
    }

    /// Zeros for fixed coefficients and random means; 0.1 for random sds
    /// (a zero sd is a stationary point of the sd gradient).
    pub fn start_point(&self) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| if s.role == SlotRole::RandomSd { 0.1 } else { 0.0 })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_term_spec() -> ModelSpecification {
        ModelSpecification::new(vec![
            Term::constant("const_pv", Alternative::PersonalVehicle),
            Term::random_normal("non_work_om", "purpose_non_work", Alternative::OtherMode),
            Term::fixed("log_len_walk", "log_trip_length", Alternative::Walk),
        ])
    }

    #[test]
    fn layout_orders_slots_by_term() {
        let layout = two_term_spec().layout();
        assert_eq!(layout.n_params(), 4);
        assert_eq!(
            layout.names(),
            vec!["const_pv", "non_work_om", "non_work_om.sd", "log_len_walk"]
        );
        assert_eq!(layout.primary_slot(1), 1);
        assert_eq!(layout.sd_slot(1), Some(2));
        assert_eq!(layout.random_dim(1), Some(0));
        assert_eq!(layout.random_dim(2), None);
        assert_eq!(layout.start_point(), vec![0.0, 0.0, 0.1, 0.0]);
    }

    #[test]
    fn validation_rejects_constant_on_reference() {
        let spec = ModelSpecification::new(vec![Term::constant("c", Alternative::OtherMode)]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn validation_rejects_duplicates() {
        let mut spec = two_term_spec();
        spec.terms.push(Term::fixed(
            "dup_binding",
            "log_trip_length",
            Alternative::Walk,
        ));
        assert!(spec.validate().is_err());

        let mut spec2 = two_term_spec();
        spec2.terms.push(Term::fixed(
            "const_pv",
            "weekday",
            Alternative::Walk,
        ));
        assert!(spec2.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = two_term_spec();
        let json = serde_json::to_string_pretty(&spec).unwrap();
        let back = ModelSpecification::from_json_str(&json).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn json_defaults_apply() {
        let json = r#"{"terms": [{"name": "c", "covariate": "CONSTANT", "alternative": "walk", "kind": "fixed"}]}"#;
        let spec = ModelSpecification::from_json_str(json).unwrap();
        assert_eq!(spec.reference_alternative, Alternative::OtherMode);
        assert_eq!(spec.schema_version, SPEC_SCHEMA_VERSION);
    }
}
