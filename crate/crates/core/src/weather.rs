//! Station-hourly weather attached to trip endpoints.
//!
//! Matching is two-step and deterministic: pick the nearest station by
//! great-circle distance (ties to the lexicographically smaller station id),
//! then within that station the record nearest in time (ties to the earlier
//! record). A station whose best record is further than the configured gap
//! leaves the endpoint weather-missing; there is no fallback to the
//! second-nearest station.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDateTime;

use crate::data::{ChoiceObservation, TripEndpoints};
use crate::error::{Error, Result};

/// Mean Earth radius in miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.8;

/// Default maximum |station time - endpoint time| accepted, in minutes.
pub const DEFAULT_MAX_GAP_MINUTES: f64 = 180.0;

/// The five station variables, in canonical order.
pub const WEATHER_VARIABLES: [&str; 5] = [
    "temperature",
    "precipitation",
    "humidity",
    "visibility",
    "wind_speed",
];

fn check_coordinates(lat: f64, lon: f64) -> Result<()> {
    if !(lat.is_finite() && lon.is_finite()) || lat.abs() > 90.0 || lon.abs() > 180.0 {
        return Err(Error::BadCoordinate { lat, lon });
    }
    Ok(())
}

/// Great-circle distance in miles between two (lat, lon) points in degrees.
pub fn haversine_miles(a_lat: f64, a_lon: f64, b_lat: f64, b_lon: f64) -> Result<f64> {
    check_coordinates(a_lat, a_lon)?;
    check_coordinates(b_lat, b_lon)?;
    let phi1 = a_lat.to_radians();
    let phi2 = b_lat.to_radians();
    let dphi = (b_lat - a_lat).to_radians();
    let dlambda = (b_lon - a_lon).to_radians();
    let s = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_MILES * s.sqrt().min(1.0).asin())
}

/// One station's values at one timestamp; any variable may be missing.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeatherValues {
    pub temperature: Option<f64>,
    pub precipitation: Option<f64>,
    pub humidity: Option<f64>,
    pub visibility: Option<f64>,
    pub wind_speed: Option<f64>,
}

impl WeatherValues {
    pub fn get(&self, variable: usize) -> Option<f64> {
        match variable {
            0 => self.temperature,
            1 => self.precipitation,
            2 => self.humidity,
            3 => self.visibility,
            4 => self.wind_speed,
            _ => None,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if let Some(h) = self.humidity {
            if !(0.0..=100.0).contains(&h) {
                return Err(format!("humidity {h} outside [0, 100]"));
            }
        }
        for (name, v) in [
            ("precipitation", self.precipitation),
            ("visibility", self.visibility),
            ("wind_speed", self.wind_speed),
        ] {
            if let Some(v) = v {
                if v < 0.0 {
                    return Err(format!("{name} {v} must be nonnegative"));
                }
            }
        }
        Ok(())
    }
}

/// One raw station-hour row.
#[derive(Clone, Debug)]
pub struct WeatherRecord {
    pub station_id: String,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: NaiveDateTime,
    pub values: WeatherValues,
}

struct Station {
    id: String,
    lat: f64,
    lon: f64,
    records: Vec<(NaiveDateTime, WeatherValues)>,
}

/// Immutable station index; matching is read-only after construction.
pub struct WeatherIndex {
    stations: Vec<Station>,
    n_records: usize,
}

impl WeatherIndex {
    pub fn from_records(records: Vec<WeatherRecord>) -> Result<Self> {
        let n_records = records.len();
        let mut grouped: BTreeMap<String, Station> = BTreeMap::new();
        for r in records {
            check_coordinates(r.lat, r.lon)?;
            r.values.validate().map_err(|message| Error::BadObservation {
                obs: format!("station {} @ {}", r.station_id, r.timestamp),
                message,
            })?;
            let station = grouped.entry(r.station_id.clone()).or_insert_with(|| Station {
                id: r.station_id.clone(),
                lat: r.lat,
                lon: r.lon,
                records: Vec::new(),
            });
            if (station.lat - r.lat).abs() > 1e-9 || (station.lon - r.lon).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "station `{}` appears with inconsistent coordinates",
                    r.station_id
                )));
            }
            station.records.push((r.timestamp, r.values));
        }
        let mut stations: Vec<Station> = grouped.into_values().collect();
        for s in &mut stations {
            s.records.sort_by_key(|(t, _)| *t);
        }
        Ok(WeatherIndex { stations, n_records })
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn n_records(&self) -> usize {
        self.n_records
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }
}

/// Which end of the trip a match describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Origin,
    Destination,
}

impl Endpoint {
    pub fn prefix(self) -> &'static str {
        match self {
            Endpoint::Origin => "origin",
            Endpoint::Destination => "dest",
        }
    }
}

/// The record matched to one trip endpoint.
#[derive(Clone, Debug)]
pub struct WeatherAtEndpoint {
    pub endpoint: Endpoint,
    pub matched_station: String,
    pub station_distance_miles: f64,
    pub time_gap_minutes: f64,
    pub values: WeatherValues,
}

/// Finds the nearest station, then its record nearest in time.
///
/// Returns `Ok(None)` when the nearest station has no record within
/// `max_gap_minutes` (the endpoint is weather-missing). An empty index is an
/// error.
pub fn match_weather(
    index: &WeatherIndex,
    endpoint: Endpoint,
    endpoint_time: NaiveDateTime,
    lat: f64,
    lon: f64,
    max_gap_minutes: f64,
) -> Result<Option<WeatherAtEndpoint>> {
    if index.is_empty() {
        return Err(Error::EmptyWeatherIndex);
    }
    check_coordinates(lat, lon)?;

    // Stations are sorted by id, so strict `<` keeps the smaller id on ties.
    let mut best: Option<(f64, &Station)> = None;
    for station in &index.stations {
        let d = haversine_miles(lat, lon, station.lat, station.lon)?;
        if best.map(|(bd, _)| d < bd).unwrap_or(true) {
            best = Some((d, station));
        }
    }
    let (distance, station) = best.expect("non-empty index");

    // Records are sorted by timestamp; the nearest in time is adjacent to the
    // partition point, and `<=` going left-to-right keeps the earlier record
    // on gap ties.
    let records = &station.records;
    let pos = records.partition_point(|(t, _)| *t < endpoint_time);
    let mut chosen: Option<(f64, usize)> = None;
    for idx in [pos.checked_sub(1), Some(pos)].into_iter().flatten() {
        if let Some((t, _)) = records.get(idx) {
            let gap = (endpoint_time - *t).num_seconds().abs() as f64 / 60.0;
            if chosen.map(|(g, _)| gap < g).unwrap_or(true) {
                chosen = Some((gap, idx));
            }
        }
    }
    let (gap, idx) = chosen.expect("station has at least one record");
    if gap > max_gap_minutes {
        return Ok(None);
    }
    Ok(Some(WeatherAtEndpoint {
        endpoint,
        matched_station: station.id.clone(),
        station_distance_miles: distance,
        time_gap_minutes: gap,
        values: records[idx].1,
    }))
}

/// Per-endpoint match counts reported by `fuse`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FuseSummary {
    pub origin_matched: usize,
    pub origin_missing: usize,
    pub dest_matched: usize,
    pub dest_missing: usize,
}

/// Attaches up to ten weather covariates (five per endpoint) to every
/// observation. Row count, ordering, and existing covariates are never
/// touched; missing station values propagate as missing covariates.
pub fn fuse(
    mut observations: Vec<ChoiceObservation>,
    index: &WeatherIndex,
    max_gap_minutes: f64,
) -> Result<(Vec<ChoiceObservation>, FuseSummary)> {
    if index.is_empty() {
        return Err(Error::EmptyWeatherIndex);
    }
    let mut summary = FuseSummary::default();
    for obs in &mut observations {
        let endpoints = obs.endpoints.clone().ok_or_else(|| Error::MissingEndpoints {
            obs: obs.obs_id.clone(),
        })?;
        let TripEndpoints {
            origin_lat,
            origin_lon,
            dest_lat,
            dest_lon,
            start_time,
            end_time,
        } = endpoints;
        for (endpoint, time, lat, lon) in [
            (Endpoint::Origin, start_time, origin_lat, origin_lon),
            (Endpoint::Destination, end_time, dest_lat, dest_lon),
        ] {
            let matched = match_weather(index, endpoint, time, lat, lon, max_gap_minutes)?;
            let (hit, miss) = match endpoint {
                Endpoint::Origin => (&mut summary.origin_matched, &mut summary.origin_missing),
                Endpoint::Destination => (&mut summary.dest_matched, &mut summary.dest_missing),
            };
            match matched {
                Some(m) => {
                    *hit += 1;
                    for (i, name) in WEATHER_VARIABLES.iter().enumerate() {
                        if let Some(v) = m.values.get(i) {
                            obs.covariates
                                .insert(format!("{}_{name}", endpoint.prefix()), v);
                        }
                    }
                }
                None => *miss += 1,
            }
        }
    }
    Ok((observations, summary))
}

/// Reads station records: `station_id,lat,lon,timestamp` then the five
/// variables, blank cells meaning missing.
pub fn read_weather_csv<R: Read>(reader: R) -> Result<Vec<WeatherRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let station_col = col("station_id")?;
    let lat_col = col("lat")?;
    let lon_col = col("lon")?;
    let time_col = col("timestamp")?;
    let var_cols: Vec<usize> = WEATHER_VARIABLES
        .iter()
        .map(|v| col(v))
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let bad = |column: &str, message: String| Error::BadField {
            line,
            column: column.to_string(),
            message,
        };
        let parse_f64 = |i: usize, name: &str| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| bad(name, format!("expected a number, got `{}`", field(i))))
        };
        let opt_f64 = |i: usize, name: &str| -> Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                parse_f64(i, name).map(Some)
            }
        };

        let timestamp = NaiveDateTime::parse_from_str(field(time_col), "%Y-%m-%dT%H:%M:%S")
            .or_else(|_| NaiveDateTime::parse_from_str(field(time_col), "%Y-%m-%d %H:%M:%S"))
            .map_err(|_| {
                bad(
                    "timestamp",
                    format!("expected an ISO-8601 local timestamp, got `{}`", field(time_col)),
                )
            })?;

        out.push(WeatherRecord {
            station_id: {
                let id = field(station_col);
                if id.is_empty() {
                    return Err(bad("station_id", "value required".into()));
                }
                id.to_string()
            },
            lat: parse_f64(lat_col, "lat")?,
            lon: parse_f64(lon_col, "lon")?,
            timestamp,
            values: WeatherValues {
                temperature: opt_f64(var_cols[0], "temperature")?,
                precipitation: opt_f64(var_cols[1], "precipitation")?,
                humidity: opt_f64(var_cols[2], "humidity")?,
                visibility: opt_f64(var_cols[3], "visibility")?,
                wind_speed: opt_f64(var_cols[4], "wind_speed")?,
            },
        });
    }
    Ok(out)
}

pub fn read_weather_path(path: &Path) -> Result<Vec<WeatherRecord>> {
    read_weather_csv(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn ts(h: u32, mi: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2017, 1, 9)
            .unwrap()
            .and_hms_opt(h, mi, 0)
            .unwrap()
    }

    fn record(station: &str, lat: f64, lon: f64, time: NaiveDateTime, temp: f64) -> WeatherRecord {
        WeatherRecord {
            station_id: station.to_string(),
            lat,
            lon,
            timestamp: time,
            values: WeatherValues {
                temperature: Some(temp),
                precipitation: Some(0.0),
                humidity: Some(60.0),
                visibility: Some(9.0),
                wind_speed: Some(8.0),
            },
        }
    }

    #[test]
    fn haversine_known_distances() {
        assert_eq!(haversine_miles(40.0, -73.0, 40.0, -73.0).unwrap(), 0.0);
        // JFK to LGA; frozen from an independent great-circle calculator
        // using the same 3958.8-mile radius.
        let d = haversine_miles(40.6413, -73.7781, 40.7769, -73.8740).unwrap();
        assert!((d - 10.6306).abs() < 1e-3, "got {d}");
        // Antipodal points: half the circumference.
        let anti = haversine_miles(0.0, 0.0, 0.0, 180.0).unwrap();
        assert!((anti - std::f64::consts::PI * EARTH_RADIUS_MILES).abs() < 1e-6);
    }

    #[test]
    fn haversine_rejects_bad_coordinates() {
        assert!(haversine_miles(91.0, 0.0, 0.0, 0.0).is_err());
        assert!(haversine_miles(0.0, 181.0, 0.0, 0.0).is_err());
        assert!(haversine_miles(0.0, 0.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn nearer_of_two_records_wins() {
        let index = WeatherIndex::from_records(vec![
            record("s1", 42.0, -73.0, ts(9, 0), 30.0),
            record("s1", 42.0, -73.0, ts(10, 0), 35.0),
        ])
        .unwrap();
        let m = match_weather(&index, Endpoint::Origin, ts(9, 20), 42.0, -73.0, 180.0)
            .unwrap()
            .unwrap();
        assert_eq!(m.values.temperature, Some(30.0));
        assert_eq!(m.time_gap_minutes, 20.0);
    }

    #[test]
    fn station_first_even_when_time_gap_larger() {
        // Near station (~1.4 mi) has a stale record; far station (~7 mi) has a
        // fresh one. The near station must still win.
        let index = WeatherIndex::from_records(vec![
            record("near", 42.02, -73.0, ts(6, 0), 10.0),
            record("far", 42.10, -73.0, ts(9, 0), 20.0),
        ])
        .unwrap();
        let m = match_weather(&index, Endpoint::Origin, ts(9, 0), 42.0, -73.0, 600.0)
            .unwrap()
            .unwrap();
        assert_eq!(m.matched_station, "near");
        assert_eq!(m.time_gap_minutes, 180.0);
    }

    #[test]
    fn gap_tie_picks_earlier_record() {
        let index = WeatherIndex::from_records(vec![
            record("s1", 42.0, -73.0, ts(9, 0), 30.0),
            record("s1", 42.0, -73.0, ts(10, 0), 35.0),
        ])
        .unwrap();
        let m = match_weather(&index, Endpoint::Origin, ts(9, 30), 42.0, -73.0, 180.0)
            .unwrap()
            .unwrap();
        assert_eq!(m.values.temperature, Some(30.0));
    }

    #[test]
    fn distance_tie_picks_smaller_station_id() {
        let index = WeatherIndex::from_records(vec![
            record("b", 42.0, -73.1, ts(9, 0), 30.0),
            record("a", 42.0, -72.9, ts(9, 0), 20.0),
        ])
        .unwrap();
        let m = match_weather(&index, Endpoint::Origin, ts(9, 0), 42.0, -73.0, 180.0)
            .unwrap()
            .unwrap();
        assert_eq!(m.matched_station, "a");
    }

    #[test]
    fn beyond_max_gap_is_weather_missing() {
        let index =
            WeatherIndex::from_records(vec![record("s1", 42.0, -73.0, ts(3, 0), 30.0)]).unwrap();
        let m = match_weather(&index, Endpoint::Origin, ts(9, 0), 42.0, -73.0, 180.0).unwrap();
        assert!(m.is_none());
    }

    #[test]
    fn empty_index_is_rejected() {
        let index = WeatherIndex::from_records(vec![]).unwrap();
        assert!(matches!(
            match_weather(&index, Endpoint::Origin, ts(9, 0), 42.0, -73.0, 180.0),
            Err(Error::EmptyWeatherIndex)
        ));
    }

    fn observation_at(obs_id: &str, lat: f64, lon: f64, start: NaiveDateTime) -> ChoiceObservation {
        let mut obs = ChoiceObservation::new(
            obs_id,
            "p1",
            crate::data::Alternative::Walk,
            [true; 4],
            BTreeMap::new(),
            1.0,
        )
        .unwrap();
        obs.endpoints = Some(TripEndpoints {
            origin_lat: lat,
            origin_lon: lon,
            dest_lat: lat + 0.01,
            dest_lon: lon,
            start_time: start,
            end_time: start + chrono::Duration::minutes(30),
        });
        obs
    }

    #[test]
    fn fuse_adds_covariates_without_touching_rows() {
        let index = WeatherIndex::from_records(vec![
            record("s1", 42.0, -73.0, ts(9, 0), 30.0),
            record("s2", 42.5, -73.0, ts(9, 0), 50.0),
        ])
        .unwrap();
        let observations = vec![
            observation_at("o1", 42.0, -73.0, ts(9, 0)),
            observation_at("o2", 42.5, -73.0, ts(10, 0)),
        ];
        let (fused, summary) = fuse(observations, &index, 180.0).unwrap();
        assert_eq!(fused.len(), 2);
        assert_eq!(summary.origin_matched, 2);
        assert_eq!(fused[0].covariate("origin_temperature"), Some(30.0));
        assert_eq!(fused[1].covariate("origin_temperature"), Some(50.0));
        assert_eq!(fused[0].covariate("dest_temperature"), Some(30.0));
    }

    #[test]
    fn fuse_requires_endpoints() {
        let index =
            WeatherIndex::from_records(vec![record("s1", 42.0, -73.0, ts(9, 0), 30.0)]).unwrap();
        let obs = ChoiceObservation::new(
            "o1",
            "p1",
            crate::data::Alternative::Walk,
            [true; 4],
            BTreeMap::new(),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            fuse(vec![obs], &index, 180.0),
            Err(Error::MissingEndpoints { .. })
        ));
    }

    #[test]
    fn missing_station_value_leaves_covariate_absent() {
        let mut r = record("s1", 42.0, -73.0, ts(9, 0), 30.0);
        r.values.precipitation = None;
        let index = WeatherIndex::from_records(vec![r]).unwrap();
        let (fused, _) = fuse(vec![observation_at("o1", 42.0, -73.0, ts(9, 0))], &index, 180.0)
            .unwrap();
        assert_eq!(fused[0].covariate("origin_temperature"), Some(30.0));
        assert!(fused[0].covariate("origin_precipitation").is_none());
    }

    #[test]
    fn reads_weather_csv_with_blanks() {
        let csv = "station_id,lat,lon,timestamp,temperature,precipitation,humidity,visibility,wind_speed\n\
                   s1,42.0,-73.0,2017-01-09T09:00:00,30.5,,60,9.0,8\n";
        let records = read_weather_csv(csv.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].values.temperature, Some(30.5));
        assert_eq!(records[0].values.precipitation, None);
    }

    #[test]
    fn rejects_out_of_range_station_values() {
        let csv = "station_id,lat,lon,timestamp,temperature,precipitation,humidity,visibility,wind_speed\n\
                   s1,42.0,-73.0,2017-01-09T09:00:00,30.5,0,130,9.0,8\n";
        let records = read_weather_csv(csv.as_bytes()).unwrap();
        assert!(WeatherIndex::from_records(records).is_err());
    }

    proptest! {
        #[test]
        fn matching_is_independent_of_station_order(shuffle in proptest::sample::select(vec![0usize, 1, 2, 3, 4, 5])) {
            let mut records = vec![
                record("s1", 42.00, -73.00, ts(8, 0), 1.0),
                record("s2", 42.03, -73.00, ts(9, 0), 2.0),
                record("s3", 41.97, -73.05, ts(10, 0), 3.0),
            ];
            records.rotate_left(shuffle % 3);
            if shuffle >= 3 {
                records.reverse();
            }
            let index = WeatherIndex::from_records(records).unwrap();
            let m = match_weather(&index, Endpoint::Origin, ts(9, 10), 42.0, -73.0, 600.0)
                .unwrap()
                .unwrap();
            prop_assert_eq!(m.matched_station, "s1");
        }
    }
}
