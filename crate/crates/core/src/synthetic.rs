//! Seeded synthetic choice-data generators.
//!
//! These drive the parameter-recovery and retention tests: covariates come
//! from simple seeded distributions, and the chosen alternative is sampled
//! from the model's own closed-form probabilities at known coefficients, so
//! a correct estimator must recover those coefficients up to sampling noise.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{Alternative, ChoiceObservation};
use crate::likelihood::mnl_probabilities;
use crate::spec::{ModelSpecification, Term};

/// A generated dataset plus the specification and the generating parameter
/// values keyed by flat-slot name.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub observations: Vec<ChoiceObservation>,
    pub spec: ModelSpecification,
    pub truth: BTreeMap<String, f64>,
}

fn sample_choice<R: Rng>(rng: &mut R, utilities: &[f64; 4]) -> Alternative {
    let probs = mnl_probabilities(utilities, &[true; 4]).expect("all available");
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (a, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return Alternative::from_index(a).unwrap();
        }
    }
    Alternative::OtherMode
}

fn observation(
    i: usize,
    chosen: Alternative,
    covariates: BTreeMap<String, f64>,
) -> ChoiceObservation {
    ChoiceObservation::new(
        format!("t{i:05}"),
        format!("p{i:05}"),
        chosen,
        [true; 4],
        covariates,
        1.0,
    )
    .expect("synthetic observation is valid")
}

/// Fixed-coefficient logit data: three constants and three covariate terms
/// with known coefficients, one trip per person.
pub fn mnl_fixture(seed: u64, n: usize) -> Fixture {
    let spec = ModelSpecification::new(vec![
        Term::constant("const_pv", Alternative::PersonalVehicle),
        Term::constant("const_pt", Alternative::PublicTransport),
        Term::constant("const_walk", Alternative::Walk),
        Term::fixed("vehicle_access_pv", "vehicle_access", Alternative::PersonalVehicle),
        Term::fixed("low_income_pt", "low_income", Alternative::PublicTransport),
        Term::fixed("log_distance_walk", "log_distance", Alternative::Walk),
    ]);
    let truth: BTreeMap<String, f64> = [
        ("const_pv", 0.6),
        ("const_pt", -0.4),
        ("const_walk", 0.2),
        ("vehicle_access_pv", 0.8),
        ("low_income_pt", 0.9),
        ("log_distance_walk", -1.1),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observations = Vec::with_capacity(n);
    for i in 0..n {
        let vehicle_access = f64::from(rng.random_bool(0.6));
        let low_income = f64::from(rng.random_bool(0.35));
        let log_distance: f64 = StandardNormal.sample(&mut rng);
        let utilities = [
            truth["const_pv"] + truth["vehicle_access_pv"] * vehicle_access,
            truth["const_pt"] + truth["low_income_pt"] * low_income,
            truth["const_walk"] + truth["log_distance_walk"] * log_distance,
            0.0,
        ];
        let chosen = sample_choice(&mut rng, &utilities);
        let covariates: BTreeMap<String, f64> = [
            ("vehicle_access".to_string(), vehicle_access),
            ("low_income".to_string(), low_income),
            ("log_distance".to_string(), log_distance),
        ]
        .into();
        observations.push(observation(i, chosen, covariates));
    }
    Fixture {
        observations,
        spec,
        truth,
    }
}

/// Mixed-logit data: three fixed constants plus one random-normal
/// coefficient on a continuous exposure covariate entering the fourth
/// alternative. Each person draws one coefficient from N(mean, sd).
///
/// The covariate must vary continuously: the mixing mean and sd of a
/// coefficient on a two-valued covariate are not separately identified in a
/// cross-section (every (mean, sd) pair producing the same mixture
/// probability at the single covariate value fits equally well).
pub fn rpl_fixture(seed: u64, n: usize, mean: f64, sd: f64) -> Fixture {
    let spec = ModelSpecification::new(vec![
        Term::constant("const_pv", Alternative::PersonalVehicle),
        Term::constant("const_pt", Alternative::PublicTransport),
        Term::constant("const_walk", Alternative::Walk),
        Term::random_normal("exposure_om", "exposure", Alternative::OtherMode),
    ]);
    let truth: BTreeMap<String, f64> = [
        ("const_pv".to_string(), 0.5),
        ("const_pt".to_string(), -0.3),
        ("const_walk".to_string(), 0.2),
        ("exposure_om".to_string(), mean),
        ("exposure_om.sd".to_string(), sd),
    ]
    .into();

    let coef_dist = Normal::new(mean, sd.abs()).expect("finite parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observations = Vec::with_capacity(n);
    for i in 0..n {
        let exposure = 0.25 + 2.0 * rng.random::<f64>();
        let person_coef = if sd == 0.0 {
            mean
        } else {
            coef_dist.sample(&mut rng)
        };
        let utilities = [
            truth["const_pv"],
            truth["const_pt"],
            truth["const_walk"],
            person_coef * exposure,
        ];
        let chosen = sample_choice(&mut rng, &utilities);
        let covariates: BTreeMap<String, f64> = [("exposure".to_string(), exposure)].into();
        observations.push(observation(i, chosen, covariates));
    }
    Fixture {
        observations,
        spec,
        truth,
    }
}

/// The MNL fixture with one extra spec term whose generating coefficient is
/// zero: stepwise retention must drop exactly that term.
pub fn retention_fixture(seed: u64, n: usize) -> Fixture {
    let mut fixture = mnl_fixture(seed, n);
    fixture
        .spec
        .terms
        .push(Term::fixed("noise_pt", "noise_flag", Alternative::PublicTransport));
    fixture.truth.insert("noise_pt".to_string(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    for obs in &mut fixture.observations {
        obs.covariates
            .insert("noise_flag".to_string(), f64::from(rng.random_bool(0.5)));
    }
    fixture
}

/// A declared-random term whose true sd is zero: stepwise retention must
/// demote it to fixed.
pub fn sd_demotion_fixture(seed: u64, n: usize) -> Fixture {
    let mut fixture = rpl_fixture(seed, n, -1.0, 0.0);
    fixture.truth.insert("exposure_om.sd".to_string(), 0.0);
    fixture
}

/// A survey-scale problem: 25 fixed terms plus two random-normal terms
/// (29 parameters), mixed binary and continuous covariates, one trip per
/// person. Used to exercise full estimation at realistic size.
pub fn scale_fixture(seed: u64, n: usize) -> Fixture {
    let non_reference = [
        Alternative::PersonalVehicle,
        Alternative::PublicTransport,
        Alternative::Walk,
    ];
    let mut terms = vec![
        Term::constant("const_pv", Alternative::PersonalVehicle),
        Term::constant("const_pt", Alternative::PublicTransport),
        Term::constant("const_walk", Alternative::Walk),
    ];
    let mut truth: BTreeMap<String, f64> = [
        ("const_pv".to_string(), 0.8),
        ("const_pt".to_string(), -0.4),
        ("const_walk".to_string(), 0.3),
    ]
    .into();

    // 12 binary and 10 continuous covariates, coefficients cycling through a
    // small set of magnitudes and signs.
    let magnitudes = [0.15, 0.3, 0.45, 0.6, 0.75];
    for k in 0..22 {
        let covariate = if k < 12 {
            format!("b{k:02}")
        } else {
            format!("c{k:02}")
        };
        let alternative = non_reference[k % 3];
        let name = format!("{covariate}_{}", alternative.key());
        let coef = magnitudes[k % magnitudes.len()] * if k % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(Term::fixed(&name, &covariate, alternative));
        truth.insert(name, coef);
    }

    terms.push(Term::random_normal("r_bin_om", "r_bin", Alternative::OtherMode));
    truth.insert("r_bin_om".to_string(), -1.2);
    truth.insert("r_bin_om.sd".to_string(), 1.5);
    terms.push(Term::random_normal("r_cont_walk", "r_cont", Alternative::Walk));
    truth.insert("r_cont_walk".to_string(), 0.6);
    truth.insert("r_cont_walk.sd".to_string(), 0.5);

    let spec = ModelSpecification::new(terms);
    let dist_bin_om = Normal::new(truth["r_bin_om"], truth["r_bin_om.sd"]).unwrap();
    let dist_cont_walk = Normal::new(truth["r_cont_walk"], truth["r_cont_walk.sd"]).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observations = Vec::with_capacity(n);
    for i in 0..n {
        let mut covariates: BTreeMap<String, f64> = BTreeMap::new();
        for k in 0..22usize {
            let name = if k < 12 {
                format!("b{k:02}")
            } else {
                format!("c{k:02}")
            };
            let value = if k < 12 {
                f64::from(rng.random_bool(0.3 + 0.04 * k as f64))
            } else {
                StandardNormal.sample(&mut rng)
            };
            covariates.insert(name, value);
        }
        covariates.insert("r_bin".to_string(), f64::from(rng.random_bool(0.5)));
        covariates.insert("r_cont".to_string(), StandardNormal.sample(&mut rng));

        let coef_bin = dist_bin_om.sample(&mut rng);
        let coef_cont = dist_cont_walk.sample(&mut rng);
        let mut utilities = [0.0f64; 4];
        for term in &spec.terms {
            let value = if term.is_constant() {
                1.0
            } else {
                covariates[&term.covariate]
            };
            let coef = match term.name.as_str() {
                "r_bin_om" => coef_bin,
                "r_cont_walk" => coef_cont,
                _ => truth[&term.name],
            };
            utilities[term.alternative.index()] += coef * value;
        }
        let chosen = sample_choice(&mut rng, &utilities);
        observations.push(observation(i, chosen, covariates));
    }
    Fixture {
        observations,
        spec,
        truth,
    }
}
