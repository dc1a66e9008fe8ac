//! Trip ingestion, filtering, and recoding into model-ready choice
//! observations.
//!
//! The recode step turns one raw trip row into a named covariate map: one-hot
//! indicators for each categorical family (age, income, season, time of day),
//! plain 0/1 flags for binary attributes, and natural-log transforms of trip
//! length and duration. Missing source values propagate as absent covariates,
//! never as zeros; estimation later drops rows that are incomplete for the
//! covariates a model actually references.

pub mod io;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four collapsed travel modes, in fixed ordinal order 0..3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    PersonalVehicle,
    PublicTransport,
    Walk,
    OtherMode,
}

impl Alternative {
    pub const ALL: [Alternative; 4] = [
        Alternative::PersonalVehicle,
        Alternative::PublicTransport,
        Alternative::Walk,
        Alternative::OtherMode,
    ];
    pub const COUNT: usize = 4;

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Alternative::PersonalVehicle => 0,
            Alternative::PublicTransport => 1,
            Alternative::Walk => 2,
            Alternative::OtherMode => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Machine-readable key used in CSV and JSON.
    pub fn key(self) -> &'static str {
        match self {
            Alternative::PersonalVehicle => "personal_vehicle",
            Alternative::PublicTransport => "public_transport",
            Alternative::Walk => "walk",
            Alternative::OtherMode => "other_mode",
        }
    }

    /// Human-readable name used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Alternative::PersonalVehicle => "Personal Vehicle",
            Alternative::PublicTransport => "Public Transport",
            Alternative::Walk => "Walk",
            Alternative::OtherMode => "Other Mode",
        }
    }
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "personal_vehicle" => Ok(Alternative::PersonalVehicle),
            "public_transport" => Ok(Alternative::PublicTransport),
            "walk" => Ok(Alternative::Walk),
            "other_mode" => Ok(Alternative::OtherMode),
            other => Err(Error::invalid(format!("unknown alternative `{other}`"))),
        }
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gender {
    Male,
    Female,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Education {
    LessThanBachelor,
    BachelorOrHigher,
}

/// Household income bands matching the survey's five categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IncomeBand {
    Under50k,
    From50kTo75k,
    From75kTo100k,
    From100kTo200k,
    Over200k,
}

impl IncomeBand {
    pub const ALL: [IncomeBand; 5] = [
        IncomeBand::Under50k,
        IncomeBand::From50kTo75k,
        IncomeBand::From75kTo100k,
        IncomeBand::From100kTo200k,
        IncomeBand::Over200k,
    ];

    pub fn covariate(self) -> &'static str {
        match self {
            IncomeBand::Under50k => "income_under_50k",
            IncomeBand::From50kTo75k => "income_50k_75k",
            IncomeBand::From75kTo100k => "income_75k_100k",
            IncomeBand::From100kTo200k => "income_100k_200k",
            IncomeBand::Over200k => "income_200k_plus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TripPurpose {
    Work,
    NonWork,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Fall,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Winter, Season::Spring, Season::Summer, Season::Fall];

    pub fn covariate(self) -> &'static str {
        match self {
            Season::Winter => "season_winter",
            Season::Spring => "season_spring",
            Season::Summer => "season_summer",
            Season::Fall => "season_fall",
        }
    }
}

/// Meteorological seasons: Dec-Feb winter, Mar-May spring, Jun-Aug summer,
/// Sep-Nov fall.
pub fn season_of_month(month: u8) -> Option<Season> {
    match month {
        12 | 1 | 2 => Some(Season::Winter),
        3..=5 => Some(Season::Spring),
        6..=8 => Some(Season::Summer),
        9..=11 => Some(Season::Fall),
        _ => None,
    }
}

/// Medical devices recognized by the recoder.
pub const DEVICE_TOKENS: [&str; 5] = [
    "cane",
    "walker",
    "manual_wheelchair",
    "crutch",
    "dog_assistance",
];

/// Time-of-day bins; exactly one fires for any clock time.
const TOD_BINS: [&str; 4] = ["tod_7_10", "tod_10_16", "tod_16_19", "tod_19_7"];

fn time_of_day_bin(hour: u32) -> &'static str {
    match hour {
        7..=9 => "tod_7_10",
        10..=15 => "tod_10_16",
        16..=18 => "tod_16_19",
        _ => "tod_19_7",
    }
}

/// Age bins; exactly one fires for any adult age.
const AGE_BINS: [&str; 4] = ["age_18_24", "age_25_44", "age_45_64", "age_over_65"];

fn age_bin(age: u32) -> &'static str {
    match age {
        0..=24 => "age_18_24",
        25..=44 => "age_25_44",
        45..=64 => "age_45_64",
        _ => "age_over_65",
    }
}

/// Coordinates closer than this (in degrees, per axis) count as the same
/// point when detecting loop trips.
pub const LOOP_TRIP_TOLERANCE_DEGREES: f64 = 1e-6;

/// One raw trip row as ingested from the trip table.
///
/// Fields that surveys commonly leave blank are optional; their covariates
/// simply stay absent after recoding.
#[derive(Clone, Debug)]
pub struct RawTripRecord {
    pub person_id: String,
    pub household_id: String,
    pub trip_id: String,
    pub age: u32,
    pub disability_flag: bool,
    pub gender: Option<Gender>,
    pub worker: Option<bool>,
    pub driver: Option<bool>,
    pub race: Option<String>,
    pub hispanic: Option<bool>,
    pub education: Option<Education>,
    pub income_band: Option<IncomeBand>,
    pub medical_devices: Vec<String>,
    pub health_poor: Option<bool>,
    pub born_in_us: Option<bool>,
    pub works_from_home: Option<bool>,
    pub raw_mode: u16,
    pub trip_length_miles: f64,
    pub trip_duration_minutes: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub dest_lat: f64,
    pub dest_lon: f64,
    pub start_time: NaiveDateTime,
    pub end_time: NaiveDateTime,
    pub origin_urban: bool,
    pub dest_urban: bool,
    pub origin_nyc: bool,
    pub dest_nyc: bool,
    pub trip_purpose: TripPurpose,
    pub home_based: bool,
    pub travel_month: u8,
    pub weekday: bool,
    pub weight: f64,
    pub availability: [bool; 4],
}

/// Origin/destination coordinates and times carried alongside an observation
/// so weather can be attached downstream.
#[derive(Clone, Debug, PartialEq)]
pub struct TripEndpoints {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub dest_lat: f64,
    pub dest_lon: f64,
    pub start_time: NaiveDateTime,
    pub end_time: NaiveDateTime,
}

/// One model-ready observation: the chosen mode, the availability mask, and
/// the named covariate row.
#[derive(Clone, Debug)]
pub struct ChoiceObservation {
    pub obs_id: String,
    pub person_id: String,
    pub chosen: Alternative,
    pub available: [bool; 4],
    pub covariates: BTreeMap<String, f64>,
    pub weight: f64,
    pub endpoints: Option<TripEndpoints>,
}

impl ChoiceObservation {
    pub fn new(
        obs_id: impl Into<String>,
        person_id: impl Into<String>,
        chosen: Alternative,
        available: [bool; 4],
        covariates: BTreeMap<String, f64>,
        weight: f64,
    ) -> Result<Self> {
        let obs = ChoiceObservation {
            obs_id: obs_id.into(),
            person_id: person_id.into(),
            chosen,
            available,
            covariates,
            weight,
            endpoints: None,
        };
        obs.validate()?;
        Ok(obs)
    }

    fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::BadObservation {
            obs: self.obs_id.clone(),
            message,
        };
        if !self.available[self.chosen.index()] {
            return Err(bad(format!(
                "chosen alternative `{}` is not marked available",
                self.chosen
            )));
        }
        if self.available.iter().filter(|&&a| a).count() < 2 {
            return Err(bad("fewer than two alternatives available".into()));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(bad(format!("weight must be a positive real, got {}", self.weight)));
        }
        Ok(())
    }

    pub fn covariate(&self, name: &str) -> Option<f64> {
        self.covariates.get(name).copied()
    }
}

/// Keeps only adults reporting a travel-limiting disability.
pub fn filter_tld_adults(records: Vec<RawTripRecord>) -> Vec<RawTripRecord> {
    records
        .into_iter()
        .filter(|r| r.disability_flag && r.age >= 18)
        .collect()
}

/// Collapses a raw survey mode code onto the four modeled alternatives.
///
/// Codes follow the 2017 survey coding: 01 walk, 02 bicycle, 03 car, 04 SUV,
/// 05 van, 06 pickup, 07 golf cart/Segway, 08 motorcycle, 09 RV, 10 school
/// bus, 11 public/commuter bus, 12 paratransit, 13 private/charter bus,
/// 14 city-to-city bus, 15 Amtrak/commuter rail, 16 subway/light rail,
/// 17 taxi, 18 rental car, 19 airplane, 20 boat, 97 something else.
pub fn collapse_mode(raw_mode: u16) -> Result<Alternative> {
    Ok(match raw_mode {
        3 | 4 | 5 | 6 | 8 => Alternative::PersonalVehicle,
        1 => Alternative::Walk,
        11 | 14 | 15 | 16 => Alternative::PublicTransport,
        2 | 7 | 9 | 10 | 12 | 13 | 17 | 18 | 19 | 20 | 97 => Alternative::OtherMode,
        other => return Err(Error::UnknownModeCode(other)),
    })
}

fn flag(value: bool) -> f64 {
    if value {
        1.0
    } else {
        0.0
    }
}

fn insert_family(map: &mut BTreeMap<String, f64>, members: &[&str], active: &str) {
    for m in members {
        map.insert((*m).to_string(), flag(*m == active));
    }
}

/// Recodes one filtered trip row into a `ChoiceObservation`.
///
/// Nonpositive trip length or duration does not fail the row; the affected
/// log covariates are simply left absent, which flags the row incomplete for
/// any model that references them.
pub fn recode(record: &RawTripRecord) -> Result<ChoiceObservation> {
    let chosen = collapse_mode(record.raw_mode)?;
    let mut cov = BTreeMap::new();

    insert_family(&mut cov, &AGE_BINS, age_bin(record.age));

    if let Some(g) = record.gender {
        cov.insert("female".into(), flag(g == Gender::Female));
    }
    if let Some(w) = record.worker {
        cov.insert("worker".into(), flag(w));
    }
    if let Some(d) = record.driver {
        cov.insert("driver".into(), flag(d));
    }
    if let Some(race) = &record.race {
        cov.insert("race_white".into(), flag(race.eq_ignore_ascii_case("white")));
    }
    if let Some(h) = record.hispanic {
        cov.insert("hispanic".into(), flag(h));
    }
    if let Some(e) = record.education {
        cov.insert(
            "edu_bachelor_or_higher".into(),
            flag(e == Education::BachelorOrHigher),
        );
    }
    if let Some(band) = record.income_band {
        for b in IncomeBand::ALL {
            cov.insert(b.covariate().to_string(), flag(b == band));
        }
    }
    if let Some(b) = record.born_in_us {
        cov.insert("born_in_us".into(), flag(b));
    }
    if let Some(w) = record.works_from_home {
        cov.insert("works_from_home".into(), flag(w));
    }
    if let Some(h) = record.health_poor {
        cov.insert("health_poor".into(), flag(h));
    }

    for token in DEVICE_TOKENS {
        cov.insert(
            format!("device_{token}"),
            flag(record.medical_devices.iter().any(|d| d == token)),
        );
    }

    cov.insert("weekday".into(), flag(record.weekday));
    cov.insert(
        "purpose_work".into(),
        flag(record.trip_purpose == TripPurpose::Work),
    );
    cov.insert(
        "purpose_non_work".into(),
        flag(record.trip_purpose == TripPurpose::NonWork),
    );
    cov.insert("home_based".into(), flag(record.home_based));
    cov.insert("non_home_based".into(), flag(!record.home_based));

    let loop_trip = (record.origin_lat - record.dest_lat).abs() <= LOOP_TRIP_TOLERANCE_DEGREES
        && (record.origin_lon - record.dest_lon).abs() <= LOOP_TRIP_TOLERANCE_DEGREES;
    cov.insert("loop_trip".into(), flag(loop_trip));

    cov.insert("origin_urban".into(), flag(record.origin_urban));
    cov.insert("origin_rural".into(), flag(!record.origin_urban));
    cov.insert("dest_urban".into(), flag(record.dest_urban));
    cov.insert("dest_rural".into(), flag(!record.dest_urban));
    cov.insert("origin_nyc".into(), flag(record.origin_nyc));
    cov.insert("dest_nyc".into(), flag(record.dest_nyc));

    insert_family(
        &mut cov,
        &TOD_BINS,
        time_of_day_bin(record.start_time.time().hour()),
    );

    let season = season_of_month(record.travel_month).ok_or_else(|| {
        Error::invalid(format!(
            "trip `{}`: travel_month {} outside 1..=12",
            record.trip_id, record.travel_month
        ))
    })?;
    for s in Season::ALL {
        cov.insert(s.covariate().to_string(), flag(s == season));
    }

    if record.trip_length_miles > 0.0 {
        cov.insert("log_trip_length".into(), record.trip_length_miles.ln());
    }
    if record.trip_duration_minutes > 0.0 {
        cov.insert("log_trip_duration".into(), record.trip_duration_minutes.ln());
    }

    let mut obs = ChoiceObservation::new(
        record.trip_id.clone(),
        record.person_id.clone(),
        chosen,
        record.availability,
        cov,
        record.weight,
    )?;
    obs.endpoints = Some(TripEndpoints {
        origin_lat: record.origin_lat,
        origin_lon: record.origin_lon,
        dest_lat: record.dest_lat,
        dest_lon: record.dest_lon,
        start_time: record.start_time,
        end_time: record.end_time,
    });
    Ok(obs)
}

/// Covariates produced by `recode` for every complete row (log transforms are
/// absent when length/duration are nonpositive, optional person attributes
/// when their source column is blank).
pub fn recode_incomplete(obs: &ChoiceObservation) -> bool {
    !(obs.covariates.contains_key("log_trip_length")
        && obs.covariates.contains_key("log_trip_duration"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn ts(y: i32, mo: u32, d: u32, h: u32, mi: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, mo, d)
            .unwrap()
            .and_hms_opt(h, mi, 0)
            .unwrap()
    }

    pub(crate) fn sample_record() -> RawTripRecord {
        RawTripRecord {
            person_id: "p1".into(),
            household_id: "h1".into(),
            trip_id: "t1".into(),
            age: 70,
            disability_flag: true,
            gender: Some(Gender::Female),
            worker: Some(false),
            driver: Some(true),
            race: Some("white".into()),
            hispanic: Some(false),
            education: Some(Education::LessThanBachelor),
            income_band: Some(IncomeBand::Under50k),
            medical_devices: vec!["cane".into()],
            health_poor: Some(false),
            born_in_us: Some(true),
            works_from_home: Some(false),
            raw_mode: 3,
            trip_length_miles: 0.275,
            trip_duration_minutes: 1.0,
            origin_lat: 42.65,
            origin_lon: -73.75,
            dest_lat: 42.66,
            dest_lon: -73.76,
            start_time: ts(2017, 1, 9, 8, 30),
            end_time: ts(2017, 1, 9, 8, 45),
            origin_urban: true,
            dest_urban: true,
            origin_nyc: false,
            dest_nyc: false,
            trip_purpose: TripPurpose::NonWork,
            home_based: true,
            travel_month: 1,
            weekday: true,
            weight: 1.0,
            availability: [true; 4],
        }
    }

    #[test]
    fn tld_filter_boundaries() {
        let mut keep = sample_record();
        keep.age = 18;
        let mut drop_age = sample_record();
        drop_age.age = 17;
        let mut drop_flag = sample_record();
        drop_flag.disability_flag = false;
        let out = filter_tld_adults(vec![keep, drop_age, drop_flag]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].age, 18);
    }

    #[test]
    fn tld_filter_counts_fixture() {
        // 10 rows, 6 satisfying both conditions (hand count).
        let mut rows = Vec::new();
        for (age, flag) in [
            (18, true),
            (25, true),
            (44, true),
            (64, true),
            (65, true),
            (90, true),
            (17, true),
            (5, true),
            (40, false),
            (70, false),
        ] {
            let mut r = sample_record();
            r.age = age;
            r.disability_flag = flag;
            rows.push(r);
        }
        assert_eq!(filter_tld_adults(rows).len(), 6);
    }

    #[test]
    fn mode_collapse_per_documented_table() {
        assert_eq!(collapse_mode(16).unwrap(), Alternative::PublicTransport); // subway
        assert_eq!(collapse_mode(12).unwrap(), Alternative::OtherMode); // paratransit
        assert_eq!(collapse_mode(3).unwrap(), Alternative::PersonalVehicle);
        assert_eq!(collapse_mode(1).unwrap(), Alternative::Walk);
        assert_eq!(collapse_mode(97).unwrap(), Alternative::OtherMode);
        assert!(matches!(
            collapse_mode(99),
            Err(Error::UnknownModeCode(99))
        ));
        assert!(collapse_mode(0).is_err());
    }

    #[test]
    fn recode_log_transforms() {
        let obs = recode(&sample_record()).unwrap();
        // 0.275 miles: Walk-scale short trip, log is about -1.29.
        let log_len = obs.covariate("log_trip_length").unwrap();
        assert!((log_len - (-1.2909841813155274)).abs() < 1e-12);
        assert!((log_len - (-1.29)).abs() < 0.01);
        assert_eq!(obs.covariate("log_trip_duration").unwrap(), 0.0);
    }

    #[test]
    fn recode_nonpositive_length_flags_incomplete() {
        let mut r = sample_record();
        r.trip_length_miles = 0.0;
        let obs = recode(&r).unwrap();
        assert!(obs.covariate("log_trip_length").is_none());
        assert!(recode_incomplete(&obs));
        assert!(!recode_incomplete(&recode(&sample_record()).unwrap()));
    }

    #[test]
    fn recode_january_is_winter() {
        let obs = recode(&sample_record()).unwrap();
        assert_eq!(obs.covariate("season_winter"), Some(1.0));
        assert_eq!(obs.covariate("season_spring"), Some(0.0));
        assert_eq!(obs.covariate("season_summer"), Some(0.0));
        assert_eq!(obs.covariate("season_fall"), Some(0.0));
    }

    #[test]
    fn season_mapping_table() {
        let expect = [
            (1, Season::Winter),
            (2, Season::Winter),
            (3, Season::Spring),
            (5, Season::Spring),
            (6, Season::Summer),
            (8, Season::Summer),
            (9, Season::Fall),
            (11, Season::Fall),
            (12, Season::Winter),
        ];
        for (m, s) in expect {
            assert_eq!(season_of_month(m), Some(s), "month {m}");
        }
        assert_eq!(season_of_month(0), None);
        assert_eq!(season_of_month(13), None);
    }

    #[test]
    fn recode_missing_person_attributes_stay_absent() {
        let mut r = sample_record();
        r.income_band = None;
        r.gender = None;
        let obs = recode(&r).unwrap();
        assert!(obs.covariate("income_under_50k").is_none());
        assert!(obs.covariate("female").is_none());
        // Required trip attributes still present.
        assert_eq!(obs.covariate("weekday"), Some(1.0));
    }

    #[test]
    fn loop_trip_within_tolerance() {
        let mut r = sample_record();
        r.dest_lat = r.origin_lat + 5e-7;
        r.dest_lon = r.origin_lon;
        assert_eq!(recode(&r).unwrap().covariate("loop_trip"), Some(1.0));
        r.dest_lat = r.origin_lat + 5e-6;
        assert_eq!(recode(&r).unwrap().covariate("loop_trip"), Some(0.0));
    }

    #[test]
    fn observation_invariants_enforced() {
        let cov = BTreeMap::new();
        // Chosen alternative must be available.
        assert!(ChoiceObservation::new(
            "o1",
            "p1",
            Alternative::Walk,
            [true, true, false, true],
            cov.clone(),
            1.0
        )
        .is_err());
        // At least two alternatives must be available.
        assert!(ChoiceObservation::new(
            "o1",
            "p1",
            Alternative::Walk,
            [false, false, true, false],
            cov.clone(),
            1.0
        )
        .is_err());
        assert!(ChoiceObservation::new(
            "o1",
            "p1",
            Alternative::Walk,
            [true, true, true, true],
            cov,
            0.0
        )
        .is_err());
    }

    #[test]
    fn recoded_fixture_reproduces_hand_counts() {
        // 5-row fixture; hand-tallied shares per category.
        let mut rows = Vec::new();
        for (age, month, mode) in [(18, 1, 3), (30, 4, 1), (50, 7, 16), (70, 10, 12), (80, 12, 3)] {
            let mut r = sample_record();
            r.age = age;
            r.travel_month = month;
            r.raw_mode = mode;
            rows.push(recode(&r).unwrap());
        }
        let count = |name: &str| {
            rows.iter()
                .filter(|o| o.covariate(name) == Some(1.0))
                .count()
        };
        assert_eq!(count("age_18_24"), 1);
        assert_eq!(count("age_25_44"), 1);
        assert_eq!(count("age_45_64"), 1);
        assert_eq!(count("age_over_65"), 2);
        assert_eq!(count("season_winter"), 2);
        assert_eq!(count("season_spring"), 1);
        assert_eq!(count("season_summer"), 1);
        assert_eq!(count("season_fall"), 1);
        let chosen = |alt: Alternative| rows.iter().filter(|o| o.chosen == alt).count();
        assert_eq!(chosen(Alternative::PersonalVehicle), 2);
        assert_eq!(chosen(Alternative::Walk), 1);
        assert_eq!(chosen(Alternative::PublicTransport), 1);
        assert_eq!(chosen(Alternative::OtherMode), 1);
    }

    proptest! {
        #[test]
        fn categorical_families_are_one_hot(
            age in 18u32..100,
            month in 1u8..=12,
            hour in 0u32..24,
            income_idx in 0usize..5,
        ) {
            let mut r = sample_record();
            r.age = age;
            r.travel_month = month;
            r.start_time = ts(2017, 3, 6, hour, 15);
            r.income_band = Some(IncomeBand::ALL[income_idx]);
            let obs = recode(&r).unwrap();
            let families: [&[&str]; 4] = [
                &AGE_BINS,
                &TOD_BINS,
                &["season_winter", "season_spring", "season_summer", "season_fall"],
                &[
                    "income_under_50k",
                    "income_50k_75k",
                    "income_75k_100k",
                    "income_100k_200k",
                    "income_200k_plus",
                ],
            ];
            for family in families {
                let total: f64 = family
                    .iter()
                    .map(|name| obs.covariate(name).unwrap())
                    .sum();
                prop_assert_eq!(total, 1.0);
            }
        }

        #[test]
        fn recode_is_deterministic(age in 18u32..100, month in 1u8..=12) {
            let mut r = sample_record();
            r.age = age;
            r.travel_month = month;
            let a = recode(&r).unwrap();
            let b = recode(&r).unwrap();
            prop_assert_eq!(a.covariates, b.covariates);
            prop_assert_eq!(a.chosen, b.chosen);
        }
    }
}
