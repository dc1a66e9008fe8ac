//! CSV ingestion and serialization for trip tables and recoded observations.
//!
//! Column contracts are documented in the project README. Unknown columns in
//! trip tables are ignored; in observation tables every non-reserved column
//! is treated as a numeric covariate with blank cells meaning "missing".

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDateTime;
use csv::StringRecord;

use super::{
    Alternative, ChoiceObservation, Education, Gender, IncomeBand, RawTripRecord, TripEndpoints,
    TripPurpose, DEVICE_TOKENS,
};
use crate::error::{Error, Result};

/// Columns every trip table must carry.
pub const TRIP_REQUIRED_COLUMNS: [&str; 22] = [
    "person_id",
    "household_id",
    "trip_id",
    "age",
    "disability_flag",
    "raw_mode",
    "trip_length",
    "trip_duration",
    "origin_lat",
    "origin_lon",
    "dest_lat",
    "dest_lon",
    "start_time",
    "end_time",
    "origin_urban",
    "dest_urban",
    "origin_nyc",
    "dest_nyc",
    "trip_purpose",
    "home_based",
    "travel_month",
    "weekday",
];

/// Reserved (non-covariate) columns of an observation table.
pub const OBSERVATION_RESERVED_COLUMNS: [&str; 14] = [
    "obs_id",
    "person_id",
    "chosen",
    "weight",
    "avail_personal_vehicle",
    "avail_public_transport",
    "avail_walk",
    "avail_other_mode",
    "origin_lat",
    "origin_lon",
    "dest_lat",
    "dest_lon",
    "start_time",
    "end_time",
];

struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn from_headers(headers: &StringRecord) -> Self {
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        Columns { index }
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

struct Row<'a> {
    record: &'a StringRecord,
    line: u64,
}

impl<'a> Row<'a> {
    fn raw(&self, idx: usize) -> &str {
        self.record.get(idx).unwrap_or("").trim()
    }

    fn bad(&self, column: &str, message: impl Into<String>) -> Error {
        Error::BadField {
            line: self.line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn string(&self, idx: usize, column: &str) -> Result<String> {
        let s = self.raw(idx);
        if s.is_empty() {
            return Err(self.bad(column, "value required"));
        }
        Ok(s.to_string())
    }

    fn parse<T: FromStr>(&self, idx: usize, column: &str, kind: &str) -> Result<T> {
        let s = self.raw(idx);
        s.parse().map_err(|_| {
            self.bad(column, format!("expected {kind}, got `{s}`"))
        })
    }

    fn f64(&self, idx: usize, column: &str) -> Result<f64> {
        let v: f64 = self.parse(idx, column, "a number")?;
        if !v.is_finite() {
            return Err(self.bad(column, "value must be finite"));
        }
        Ok(v)
    }

    fn bool(&self, idx: usize, column: &str) -> Result<bool> {
        parse_bool(self.raw(idx))
            .ok_or_else(|| self.bad(column, format!("expected a boolean, got `{}`", self.raw(idx))))
    }

    fn opt_bool(&self, idx: Option<usize>, column: &str) -> Result<Option<bool>> {
        match idx {
            Some(i) if !self.raw(i).is_empty() => Ok(Some(self.bool(i, column)?)),
            _ => Ok(None),
        }
    }

    fn timestamp(&self, idx: usize, column: &str) -> Result<NaiveDateTime> {
        let s = self.raw(idx);
        parse_timestamp(s).ok_or_else(|| {
            self.bad(
                column,
                format!("expected an ISO-8601 local timestamp (e.g. 2017-01-09T08:30:00), got `{s}`"),
            )
        })
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .ok()
}

fn check_coordinate(line: u64, column: &str, lat_or_lon: char, v: f64) -> Result<()> {
    let limit = if lat_or_lon == 'a' { 90.0 } else { 180.0 };
    if v.abs() > limit {
        return Err(Error::BadField {
            line,
            column: column.to_string(),
            message: format!("coordinate {v} outside [-{limit}, {limit}]"),
        });
    }
    Ok(())
}

/// Reads a trip table. Unknown columns are ignored.
pub fn read_trips_csv<R: Read>(reader: R) -> Result<Vec<RawTripRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let cols = Columns::from_headers(rdr.headers()?);
    for name in TRIP_REQUIRED_COLUMNS {
        cols.require(name)?;
    }

    let avail_cols = [
        cols.optional("avail_personal_vehicle"),
        cols.optional("avail_public_transport"),
        cols.optional("avail_walk"),
        cols.optional("avail_other_mode"),
    ];

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = Row {
            record: &record,
            line,
        };

        let origin_lat = row.f64(cols.require("origin_lat")?, "origin_lat")?;
        let origin_lon = row.f64(cols.require("origin_lon")?, "origin_lon")?;
        let dest_lat = row.f64(cols.require("dest_lat")?, "dest_lat")?;
        let dest_lon = row.f64(cols.require("dest_lon")?, "dest_lon")?;
        check_coordinate(line, "origin_lat", 'a', origin_lat)?;
        check_coordinate(line, "origin_lon", 'o', origin_lon)?;
        check_coordinate(line, "dest_lat", 'a', dest_lat)?;
        check_coordinate(line, "dest_lon", 'o', dest_lon)?;

        let start_time = row.timestamp(cols.require("start_time")?, "start_time")?;
        let end_time = row.timestamp(cols.require("end_time")?, "end_time")?;
        if start_time > end_time {
            return Err(row.bad("start_time", "start_time is after end_time"));
        }

        let gender = match cols.optional("gender") {
            Some(i) if !row.raw(i).is_empty() => Some(match row.raw(i).to_ascii_lowercase().as_str() {
                "male" => Gender::Male,
                "female" => Gender::Female,
                other => return Err(row.bad("gender", format!("expected male|female, got `{other}`"))),
            }),
            _ => None,
        };
        let education = match cols.optional("education") {
            Some(i) if !row.raw(i).is_empty() => {
                Some(match row.raw(i).to_ascii_lowercase().as_str() {
                    "less_than_bachelor" => Education::LessThanBachelor,
                    "bachelor_or_higher" => Education::BachelorOrHigher,
                    other => {
                        return Err(row.bad(
                            "education",
                            format!("expected less_than_bachelor|bachelor_or_higher, got `{other}`"),
                        ))
                    }
                })
            }
            _ => None,
        };
        let income_band = match cols.optional("income_band") {
            Some(i) if !row.raw(i).is_empty() => {
                Some(match row.raw(i).to_ascii_lowercase().as_str() {
                    "under_50k" => IncomeBand::Under50k,
                    "50k_75k" => IncomeBand::From50kTo75k,
                    "75k_100k" => IncomeBand::From75kTo100k,
                    "100k_200k" => IncomeBand::From100kTo200k,
                    "200k_plus" => IncomeBand::Over200k,
                    other => {
                        return Err(row.bad(
                            "income_band",
                            format!(
                                "expected under_50k|50k_75k|75k_100k|100k_200k|200k_plus, got `{other}`"
                            ),
                        ))
                    }
                })
            }
            _ => None,
        };
        let medical_devices = match cols.optional("medical_devices") {
            Some(i) if !row.raw(i).is_empty() => {
                let mut tokens = Vec::new();
                for token in row.raw(i).split(['|', ';']) {
                    let token = token.trim().to_ascii_lowercase();
                    if token.is_empty() {
                        continue;
                    }
                    if !DEVICE_TOKENS.contains(&token.as_str()) {
                        return Err(row.bad(
                            "medical_devices",
                            format!(
                                "unknown device `{token}` (known: {})",
                                DEVICE_TOKENS.join(", ")
                            ),
                        ));
                    }
                    tokens.push(token);
                }
                tokens
            }
            _ => Vec::new(),
        };
        let trip_purpose = match row
            .string(cols.require("trip_purpose")?, "trip_purpose")?
            .to_ascii_lowercase()
            .as_str()
        {
            "work" => TripPurpose::Work,
            "non_work" => TripPurpose::NonWork,
            other => {
                return Err(row.bad(
                    "trip_purpose",
                    format!("expected work|non_work, got `{other}`"),
                ))
            }
        };

        let weight = match cols.optional("weight") {
            Some(i) if !row.raw(i).is_empty() => {
                let w = row.f64(i, "weight")?;
                if w <= 0.0 {
                    return Err(row.bad("weight", format!("weight must be positive, got {w}")));
                }
                w
            }
            _ => 1.0,
        };

        let mut availability = [true; 4];
        for (slot, idx) in availability.iter_mut().zip(avail_cols) {
            if let Some(i) = idx {
                if !row.raw(i).is_empty() {
                    *slot = row.bool(i, "availability")?;
                }
            }
        }

        let travel_month: u8 = row.parse(cols.require("travel_month")?, "travel_month", "a month 1-12")?;
        if !(1..=12).contains(&travel_month) {
            return Err(row.bad("travel_month", format!("month {travel_month} outside 1..=12")));
        }

        out.push(RawTripRecord {
            person_id: row.string(cols.require("person_id")?, "person_id")?,
            household_id: row.string(cols.require("household_id")?, "household_id")?,
            trip_id: row.string(cols.require("trip_id")?, "trip_id")?,
            age: row.parse(cols.require("age")?, "age", "an integer age")?,
            disability_flag: row.bool(cols.require("disability_flag")?, "disability_flag")?,
            gender,
            worker: row.opt_bool(cols.optional("worker"), "worker")?,
            driver: row.opt_bool(cols.optional("driver"), "driver")?,
            race: match cols.optional("race") {
                Some(i) if !row.raw(i).is_empty() => Some(row.raw(i).to_string()),
                _ => None,
            },
            hispanic: row.opt_bool(cols.optional("hispanic"), "hispanic")?,
            education,
            income_band,
            medical_devices,
            health_poor: row.opt_bool(cols.optional("health_poor"), "health_poor")?,
            born_in_us: row.opt_bool(cols.optional("born_in_us"), "born_in_us")?,
            works_from_home: row.opt_bool(cols.optional("works_from_home"), "works_from_home")?,
            raw_mode: row.parse(cols.require("raw_mode")?, "raw_mode", "a numeric mode code")?,
            trip_length_miles: row.f64(cols.require("trip_length")?, "trip_length")?,
            trip_duration_minutes: row.f64(cols.require("trip_duration")?, "trip_duration")?,
            origin_lat,
            origin_lon,
            dest_lat,
            dest_lon,
            start_time,
            end_time,
            origin_urban: row.bool(cols.require("origin_urban")?, "origin_urban")?,
            dest_urban: row.bool(cols.require("dest_urban")?, "dest_urban")?,
            origin_nyc: row.bool(cols.require("origin_nyc")?, "origin_nyc")?,
            dest_nyc: row.bool(cols.require("dest_nyc")?, "dest_nyc")?,
            trip_purpose,
            home_based: row.bool(cols.require("home_based")?, "home_based")?,
            travel_month,
            weekday: row.bool(cols.require("weekday")?, "weekday")?,
            weight,
            availability,
        });
    }
    Ok(out)
}

pub fn read_trips_path(path: &Path) -> Result<Vec<RawTripRecord>> {
    read_trips_csv(File::open(path)?)
}

fn format_timestamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Writes observations with a deterministic header: the reserved columns
/// followed by the sorted union of covariate names.
pub fn write_observations_csv<W: Write>(writer: W, observations: &[ChoiceObservation]) -> Result<()> {
    let mut covariate_names: Vec<&str> = Vec::new();
    for obs in observations {
        for name in obs.covariates.keys() {
            covariate_names.push(name);
        }
    }
    covariate_names.sort_unstable();
    covariate_names.dedup();

    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = OBSERVATION_RESERVED_COLUMNS.to_vec();
    header.extend(covariate_names.iter().copied());
    wtr.write_record(&header)?;

    for obs in observations {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        row.push(obs.obs_id.clone());
        row.push(obs.person_id.clone());
        row.push(obs.chosen.key().to_string());
        row.push(obs.weight.to_string());
        for a in obs.available {
            row.push(if a { "true" } else { "false" }.to_string());
        }
        match &obs.endpoints {
            Some(e) => {
                row.push(e.origin_lat.to_string());
                row.push(e.origin_lon.to_string());
                row.push(e.dest_lat.to_string());
                row.push(e.dest_lon.to_string());
                row.push(format_timestamp(e.start_time));
                row.push(format_timestamp(e.end_time));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        for name in &covariate_names {
            row.push(
                obs.covariates
                    .get(*name)
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_observations_path(path: &Path, observations: &[ChoiceObservation]) -> Result<()> {
    write_observations_csv(File::create(path)?, observations)
}

/// Reads an observation table. Non-reserved columns become covariates; blank
/// cells stay missing.
pub fn read_observations_csv<R: Read>(reader: R) -> Result<Vec<ChoiceObservation>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = Columns::from_headers(&headers);
    for name in ["obs_id", "person_id", "chosen"] {
        cols.require(name)?;
    }
    let covariate_columns: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !OBSERVATION_RESERVED_COLUMNS.contains(&h.trim()))
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();
    let avail_cols = [
        cols.optional("avail_personal_vehicle"),
        cols.optional("avail_public_transport"),
        cols.optional("avail_walk"),
        cols.optional("avail_other_mode"),
    ];
    let endpoint_cols = [
        cols.optional("origin_lat"),
        cols.optional("origin_lon"),
        cols.optional("dest_lat"),
        cols.optional("dest_lon"),
        cols.optional("start_time"),
        cols.optional("end_time"),
    ];

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = Row {
            record: &record,
            line,
        };

        let chosen: Alternative = row
            .string(cols.require("chosen")?, "chosen")?
            .parse()
            .map_err(|e: Error| row.bad("chosen", e.to_string()))?;

        let weight = match cols.optional("weight") {
            Some(i) if !row.raw(i).is_empty() => row.f64(i, "weight")?,
            _ => 1.0,
        };

        let mut available = [true; 4];
        for (slot, idx) in available.iter_mut().zip(avail_cols) {
            if let Some(i) = idx {
                if !row.raw(i).is_empty() {
                    *slot = row.bool(i, "availability")?;
                }
            }
        }

        let mut covariates = std::collections::BTreeMap::new();
        for (i, name) in &covariate_columns {
            if !row.raw(*i).is_empty() {
                covariates.insert(name.clone(), row.f64(*i, name)?);
            }
        }

        let endpoint_values: Vec<&str> = endpoint_cols
            .iter()
            .map(|idx| idx.map(|i| row.raw(i)).unwrap_or(""))
            .collect();
        let endpoints = if endpoint_values.iter().all(|v| v.is_empty()) {
            None
        } else if endpoint_values.iter().any(|v| v.is_empty()) {
            return Err(row.bad(
                "origin_lat",
                "endpoint columns must be all present or all blank on a row",
            ));
        } else {
            Some(TripEndpoints {
                origin_lat: row.f64(endpoint_cols[0].unwrap(), "origin_lat")?,
                origin_lon: row.f64(endpoint_cols[1].unwrap(), "origin_lon")?,
                dest_lat: row.f64(endpoint_cols[2].unwrap(), "dest_lat")?,
                dest_lon: row.f64(endpoint_cols[3].unwrap(), "dest_lon")?,
                start_time: row.timestamp(endpoint_cols[4].unwrap(), "start_time")?,
                end_time: row.timestamp(endpoint_cols[5].unwrap(), "end_time")?,
            })
        };

        let mut obs = ChoiceObservation::new(
            row.string(cols.require("obs_id")?, "obs_id")?,
            row.string(cols.require("person_id")?, "person_id")?,
            chosen,
            available,
            covariates,
            weight,
        )
        .map_err(|e| row.bad("obs_id", e.to_string()))?;
        obs.endpoints = endpoints;
        out.push(obs);
    }
    Ok(out)
}

pub fn read_observations_path(path: &Path) -> Result<Vec<ChoiceObservation>> {
    read_observations_csv(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIPS_HEADER: &str = "person_id,household_id,trip_id,age,disability_flag,gender,worker,driver,race,hispanic,education,income_band,medical_devices,health_poor,born_in_us,works_from_home,raw_mode,trip_length,trip_duration,origin_lat,origin_lon,dest_lat,dest_lon,start_time,end_time,origin_urban,dest_urban,origin_nyc,dest_nyc,trip_purpose,home_based,travel_month,weekday";

    fn sample_row(trip_id: &str, age: u32, disability: bool, mode: u16) -> String {
        format!(
            "p1,h1,{trip_id},{age},{disability},female,false,true,white,false,less_than_bachelor,under_50k,cane,false,true,false,{mode},2.5,15,42.65,-73.75,42.66,-73.76,2017-01-09T08:30:00,2017-01-09T08:45:00,true,true,false,false,non_work,true,1,true"
        )
    }

    #[test]
    fn reads_well_formed_trips() {
        let csv = format!("{TRIPS_HEADER}\n{}\n", sample_row("t1", 70, true, 3));
        let rows = read_trips_csv(csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].trip_id, "t1");
        assert_eq!(rows[0].income_band, Some(IncomeBand::Under50k));
        assert_eq!(rows[0].medical_devices, vec!["cane".to_string()]);
        assert_eq!(rows[0].weight, 1.0);
        assert_eq!(rows[0].availability, [true; 4]);
    }

    #[test]
    fn missing_required_column_is_named() {
        let csv = "person_id,age\np1,70\n";
        match read_trips_csv(csv.as_bytes()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "household_id"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn bad_field_reports_line_and_column() {
        let csv = format!(
            "{TRIPS_HEADER}\n{}\n{}\n",
            sample_row("t1", 70, true, 3),
            sample_row("t2", 70, true, 3).replace("2017-01-09T08:30:00", "not-a-time"),
        );
        match read_trips_csv(csv.as_bytes()) {
            Err(Error::BadField { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "start_time");
            }
            other => panic!("expected BadField, got {other:?}"),
        }
    }

    #[test]
    fn rejects_start_after_end() {
        let csv = format!(
            "{TRIPS_HEADER}\n{}\n",
            sample_row("t1", 70, true, 3).replace("2017-01-09T08:45:00", "2017-01-09T08:00:00"),
        );
        assert!(read_trips_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn rejects_out_of_range_coordinates() {
        let csv = format!(
            "{TRIPS_HEADER}\n{}\n",
            sample_row("t1", 70, true, 3).replace("42.65,-73.75", "142.65,-73.75"),
        );
        assert!(read_trips_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let rows = read_trips_csv(format!("{TRIPS_HEADER}\n").as_bytes()).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn observation_roundtrip_preserves_everything() {
        let trips = format!(
            "{TRIPS_HEADER}\n{}\n{}\n",
            sample_row("t1", 70, true, 3),
            sample_row("t2", 30, true, 16),
        );
        let records = read_trips_csv(trips.as_bytes()).unwrap();
        let observations: Vec<ChoiceObservation> =
            records.iter().map(|r| super::super::recode(r).unwrap()).collect();

        let mut buf = Vec::new();
        write_observations_csv(&mut buf, &observations).unwrap();
        let back = read_observations_csv(buf.as_slice()).unwrap();

        assert_eq!(back.len(), observations.len());
        for (a, b) in observations.iter().zip(&back) {
            assert_eq!(a.obs_id, b.obs_id);
            assert_eq!(a.person_id, b.person_id);
            assert_eq!(a.chosen, b.chosen);
            assert_eq!(a.available, b.available);
            assert_eq!(a.covariates, b.covariates);
            assert_eq!(a.endpoints, b.endpoints);
        }
    }

    #[test]
    fn blank_covariate_cells_stay_missing() {
        let csv = "obs_id,person_id,chosen,x1,x2\no1,p1,walk,1.5,\n";
        let obs = read_observations_csv(csv.as_bytes()).unwrap();
        assert_eq!(obs[0].covariate("x1"), Some(1.5));
        assert_eq!(obs[0].covariate("x2"), None);
        assert!(obs[0].endpoints.is_none());
    }

    #[test]
    fn write_is_deterministic() {
        let csv = "obs_id,person_id,chosen,x1\no1,p1,walk,1.5\no2,p2,other_mode,0.25\n";
        let obs = read_observations_csv(csv.as_bytes()).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_observations_csv(&mut a, &obs).unwrap();
        write_observations_csv(&mut b, &obs).unwrap();
        assert_eq!(a, b);
    }
}
