//! Loading account profiles, Botometer score records and the labelled ground
//! truth, and joining them into a [`Dataset`].
//!
//! File formats:
//!
//! * ground truth: CSV with header `account_id,credulous,bot_followee_pct`
//! * profiles: JSON lines, one [`AccountProfile`] object per line
//! * Botometer scores: CSV with the twelve score columns plus `account_id`,
//!   matched by header name so column order is free

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw profile snapshot of one account.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountProfile {
    pub account_id: String,
    pub screen_name: String,
    pub name: String,
    pub biography: String,
    pub location: String,
    pub url: String,
    pub followers_count: u64,
    pub friends_count: u64,
    pub statuses_count: u64,
    pub listed_count: u64,
    pub created_at: DateTime<Utc>,
    pub default_profile_image: bool,
    pub has_profile_image: bool,
}

/// Precomputed Botometer output for one account.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotometerRecord {
    pub account_id: String,
    pub sentiment: f64,
    pub friend: f64,
    pub user: f64,
    pub content: f64,
    pub temporal: f64,
    pub net: f64,
    pub cap_eng: f64,
    pub cap_uni: f64,
    pub score_eng: f64,
    pub score_uni: f64,
    pub tweets4ws: u64,
    pub mentions4ws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub account_id: String,
    pub credulous: bool,
    /// Percentage points in `[0, 100]`.
    pub bot_followee_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum View {
    #[serde(rename = "all_hums")]
    AllHumans,
    #[serde(rename = "credulous-only")]
    CredulousOnly,
}

impl View {
    pub fn label(self) -> &'static str {
        match self {
            View::AllHumans => "all_hums",
            View::CredulousOnly => "credulous-only",
        }
    }
}

impl std::str::FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "all_hums" | "allhumans" => Ok(View::AllHumans),
            "credulous" | "credulous-only" | "credulousonly" => Ok(View::CredulousOnly),
            other => Err(Error::Config(format!("unknown view {other:?}"))),
        }
    }
}

/// One ground-truth row with whatever sources have been joined onto it.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub truth: GroundTruthRecord,
    pub profile: Option<AccountProfile>,
    pub scores: Option<BotometerRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    snapshot_time: DateTime<Utc>,
    view: View,
}

impl Dataset {
    /// Builds an all-humans dataset from ground-truth rows, rejecting
    /// duplicate ids.
    pub fn from_truth(
        truth: Vec<GroundTruthRecord>,
        snapshot_time: DateTime<Utc>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &truth {
            if !seen.insert(t.account_id.as_str()) {
                return Err(Error::DuplicateId {
                    file: "<ground truth>".into(),
                    id: t.account_id.clone(),
                });
            }
        }
        Ok(Dataset {
            records: truth
                .into_iter()
                .map(|truth| Record {
                    truth,
                    profile: None,
                    scores: None,
                })
                .collect(),
            snapshot_time,
            view: View::AllHumans,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn snapshot_time(&self) -> DateTime<Utc> {
        self.snapshot_time
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn credulous_count(&self) -> usize {
        self.records.iter().filter(|r| r.truth.credulous).count()
    }

    /// Selects the requested view.
    pub fn with_view(&self, view: View) -> Result<Dataset> {
        match view {
            View::AllHumans if self.view == View::AllHumans => Ok(self.clone()),
            View::AllHumans => Err(Error::Config(
                "cannot widen a credulous-only dataset to all humans".into(),
            )),
            View::CredulousOnly => filter_credulous(self),
        }
    }
}

fn file_label(path: &Path) -> String {
    path.display().to_string()
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct RawProfile {
    account_id: String,
    screen_name: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    biography: Option<String>,
    #[serde(default)]
    location: Option<String>,
    #[serde(default)]
    url: Option<String>,
    followers_count: i64,
    friends_count: i64,
    statuses_count: i64,
    listed_count: i64,
    created_at: DateTime<Utc>,
    default_profile_image: bool,
    has_profile_image: bool,
}

fn non_negative(file: &str, line: usize, field: &str, v: i64) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::Range {
        file: file.into(),
        line,
        field: field.into(),
        message: format!("{v} is negative"),
    })
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<Vec<AccountProfile>> {
    let path = path.as_ref();
    parse_profiles(open(path)?, &file_label(path))
}

/// Parses JSON-lines profiles. Blank lines are skipped; line numbers in
/// errors are 1-based physical lines.
pub fn parse_profiles<R: Read>(reader: R, file: &str) -> Result<Vec<AccountProfile>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            file: file.into(),
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawProfile = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: file.into(),
            line: line_no,
            message: e.to_string(),
        })?;
        let profile = AccountProfile {
            followers_count: non_negative(file, line_no, "followers_count", raw.followers_count)?,
            friends_count: non_negative(file, line_no, "friends_count", raw.friends_count)?,
            statuses_count: non_negative(file, line_no, "statuses_count", raw.statuses_count)?,
            listed_count: non_negative(file, line_no, "listed_count", raw.listed_count)?,
            account_id: raw.account_id,
            screen_name: raw.screen_name,
            name: raw.name.unwrap_or_default(),
            biography: raw.biography.unwrap_or_default(),
            location: raw.location.unwrap_or_default(),
            url: raw.url.unwrap_or_default(),
            created_at: raw.created_at,
            default_profile_image: raw.default_profile_image,
            has_profile_image: raw.has_profile_image,
        };
        if !seen.insert(profile.account_id.clone()) {
            return Err(Error::DuplicateId {
                file: file.into(),
                id: profile.account_id,
            });
        }
        out.push(profile);
    }
    Ok(out)
}

pub fn write_profiles<W: Write>(profiles: &[AccountProfile], mut w: W) -> Result<()> {
    for p in profiles {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io("<profiles>", e))?;
    }
    Ok(())
}

fn csv_line(rec: &csv::StringRecord) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn csv_error(file: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        file: file.into(),
        line,
        message: e.to_string(),
    }
}

fn column_index(headers: &csv::StringRecord, file: &str, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Parse {
            file: file.into(),
            line: 1,
            message: format!("missing column {name:?}"),
        })
}

fn parse_f64(file: &str, line: usize, field: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        file: file.into(),
        line,
        message: format!("{field}: {raw:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Range {
            file: file.into(),
            line,
            field: field.into(),
            message: format!("{raw} is not finite"),
        });
    }
    Ok(v)
}

fn parse_count(file: &str, line: usize, field: &str, raw: &str) -> Result<u64> {
    let v: i64 = raw.trim().parse().map_err(|_| Error::Parse {
        file: file.into(),
        line,
        message: format!("{field}: {raw:?} is not an integer"),
    })?;
    non_negative(file, line, field, v)
}

pub fn load_ground_truth(
    path: impl AsRef<Path>,
    snapshot_time: DateTime<Utc>,
) -> Result<Dataset> {
    let path = path.as_ref();
    parse_ground_truth(open(path)?, &file_label(path), snapshot_time)
}

pub fn parse_ground_truth<R: Read>(
    reader: R,
    file: &str,
    snapshot_time: DateTime<Utc>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let id_col = column_index(&headers, file, "account_id")?;
    let cred_col = column_index(&headers, file, "credulous")?;
    let pct_col = column_index(&headers, file, "bot_followee_pct")?;

    let mut truth = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(file, e))?;
        let line = csv_line(&rec);
        let id = rec[id_col].trim().to_string();
        let credulous = match rec[cred_col].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Value {
                    file: file.into(),
                    line,
                    field: "credulous".into(),
                    message: format!("{other:?} is not 0 or 1"),
                })
            }
        };
        let pct = parse_f64(file, line, "bot_followee_pct", &rec[pct_col])?;
        if !(0.0..=100.0).contains(&pct) {
            return Err(Error::Range {
                file: file.into(),
                line,
                field: "bot_followee_pct".into(),
                message: format!("{pct} not in [0, 100]"),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId {
                file: file.into(),
                id,
            });
        }
        truth.push(GroundTruthRecord {
            account_id: id,
            credulous,
            bot_followee_pct: pct,
        });
    }
    Dataset::from_truth(truth, snapshot_time)
}

pub fn write_ground_truth<W: Write>(records: &[GroundTruthRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Parse {
        file: "<ground truth>".into(),
        line: 0,
        message: e.to_string(),
    };
    wtr.write_record(["account_id", "credulous", "bot_followee_pct"])
        .map_err(err)?;
    for r in records {
        wtr.write_record([
            r.account_id.as_str(),
            if r.credulous { "1" } else { "0" },
            &format!("{:?}", r.bot_followee_pct),
        ])
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<ground truth>", e))?;
    Ok(())
}

pub const BOTOMETER_COLUMNS: [&str; 13] = [
    "account_id",
    "sentiment",
    "friend",
    "user",
    "content",
    "temporal",
    "net",
    "cap_eng",
    "cap_uni",
    "score_eng",
    "score_uni",
    "tweets4ws",
    "mentions4ws",
];

pub fn load_botometer(path: impl AsRef<Path>) -> Result<Vec<BotometerRecord>> {
    let path = path.as_ref();
    parse_botometer(open(path)?, &file_label(path))
}

pub fn parse_botometer<R: Read>(reader: R, file: &str) -> Result<Vec<BotometerRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let mut cols = [0usize; 13];
    for (slot, name) in cols.iter_mut().zip(BOTOMETER_COLUMNS) {
        *slot = column_index(&headers, file, name)?;
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(file, e))?;
        let line = csv_line(&rec);
        let f = |k: usize| parse_f64(file, line, BOTOMETER_COLUMNS[k], &rec[cols[k]]);
        let unit = |k: usize| -> Result<f64> {
            let v = f(k)?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Range {
                    file: file.into(),
                    line,
                    field: BOTOMETER_COLUMNS[k].into(),
                    message: format!("{v} not in [0, 1]"),
                });
            }
            Ok(v)
        };
        let r = BotometerRecord {
            account_id: rec[cols[0]].trim().to_string(),
            sentiment: f(1)?,
            friend: f(2)?,
            user: f(3)?,
            content: f(4)?,
            temporal: f(5)?,
            net: f(6)?,
            cap_eng: unit(7)?,
            cap_uni: unit(8)?,
            score_eng: f(9)?,
            score_uni: f(10)?,
            tweets4ws: parse_count(file, line, "tweets4ws", &rec[cols[11]])?,
            mentions4ws: parse_count(file, line, "mentions4ws", &rec[cols[12]])?,
        };
        if !seen.insert(r.account_id.clone()) {
            return Err(Error::DuplicateId {
                file: file.into(),
                id: r.account_id,
            });
        }
        out.push(r);
    }
    Ok(out)
}

pub fn write_botometer<W: Write>(records: &[BotometerRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Parse {
        file: "<botometer>".into(),
        line: 0,
        message: e.to_string(),
    };
    wtr.write_record(BOTOMETER_COLUMNS).map_err(err)?;
    for r in records {
        let fields = [
            r.account_id.clone(),
            format!("{:?}", r.sentiment),
            format!("{:?}", r.friend),
            format!("{:?}", r.user),
            format!("{:?}", r.content),
            format!("{:?}", r.temporal),
            format!("{:?}", r.net),
            format!("{:?}", r.cap_eng),
            format!("{:?}", r.cap_uni),
            format!("{:?}", r.score_eng),
            format!("{:?}", r.score_uni),
            r.tweets4ws.to_string(),
            r.mentions4ws.to_string(),
        ];
        wtr.write_record(&fields).map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<botometer>", e))?;
    Ok(())
}

/// Keeps only the credulous records, in their original order.
pub fn filter_credulous(d: &Dataset) -> Result<Dataset> {
    if d.view != View::AllHumans {
        return Err(Error::Config(
            "filter_credulous expects an all-humans dataset".into(),
        ));
    }
    let records: Vec<Record> = d
        .records
        .iter()
        .filter(|r| r.truth.credulous)
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(Error::EmptyView);
    }
    Ok(Dataset {
        records,
        snapshot_time: d.snapshot_time,
        view: View::CredulousOnly,
    })
}

/// Attaches profiles and (where available) Botometer scores to every ground
/// truth record. Every id must have a profile; missing scores are left empty
/// and only become an error once a score-based feature set is requested.
pub fn join_sources(
    gt: Dataset,
    profiles: &[AccountProfile],
    scores: &[BotometerRecord],
) -> Result<Dataset> {
    let by_id: HashMap<&str, &AccountProfile> =
        profiles.iter().map(|p| (p.account_id.as_str(), p)).collect();
    let scores_by_id: HashMap<&str, &BotometerRecord> =
        scores.iter().map(|s| (s.account_id.as_str(), s)).collect();

    let missing: Vec<String> = gt
        .records
        .iter()
        .filter(|r| !by_id.contains_key(r.truth.account_id.as_str()))
        .map(|r| r.truth.account_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingProfiles(missing));
    }

    let Dataset {
        records,
        snapshot_time,
        view,
    } = gt;
    let records = records
        .into_iter()
        .map(|mut r| {
            let id = r.truth.account_id.as_str();
            r.profile = Some(by_id[id].clone());
            r.scores = scores_by_id.get(id).map(|s| (*s).clone());
            r
        })
        .collect();
    Ok(Dataset {
        records,
        snapshot_time,
        view,
    })
}

/// Loads and joins the three input files. `botometer` may be omitted when
/// only profile features are needed.
pub fn load_joined(
    ground_truth: &Path,
    profiles: &Path,
    botometer: Option<&Path>,
    snapshot_time: DateTime<Utc>,
) -> Result<Dataset> {
    let gt = load_ground_truth(ground_truth, snapshot_time)?;
    let profiles = load_profiles(profiles)?;
    let scores = match botometer {
        Some(p) => load_botometer(p)?,
        None => Vec::new(),
    };
    join_sources(gt, &profiles, &scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn snap() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
    }

    fn profile_line(id: &str, followers: i64) -> String {
        format!(
            r#"{{"account_id":"{id}","screen_name":"u{id}","name":"N","biography":"","location":"","url":"","followers_count":{followers},"friends_count":10,"statuses_count":3,"listed_count":0,"created_at":"2015-01-01T00:00:00Z","default_profile_image":false,"has_profile_image":true}}"#
        )
    }

    #[test]
    fn profiles_keep_file_order() {
        let text = ["3", "1", "2"]
            .iter()
            .map(|id| profile_line(id, 5))
            .collect::<Vec<_>>()
            .join("\n");
        let ps = parse_profiles(text.as_bytes(), "p.jsonl").unwrap();
        let ids: Vec<_> = ps.iter().map(|p| p.account_id.as_str()).collect();
        assert_eq!(ids, ["3", "1", "2"]);
    }

    #[test]
    fn negative_count_is_range_error_on_line_one() {
        let text = profile_line("1", -1);
        match parse_profiles(text.as_bytes(), "p.jsonl") {
            Err(Error::Range { line, field, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(field, "followers_count");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_profiles_file_is_valid() {
        assert!(parse_profiles(&b""[..], "p.jsonl").unwrap().is_empty());
    }

    #[test]
    fn malformed_and_duplicate_profiles() {
        let text = format!("{}\n{{not json", profile_line("1", 1));
        assert!(matches!(
            parse_profiles(text.as_bytes(), "p"),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = format!("{}\n{}", profile_line("1", 1), profile_line("1", 2));
        match parse_profiles(text.as_bytes(), "p") {
            Err(Error::DuplicateId { id, .. }) => assert_eq!(id, "1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn absent_text_fields_read_as_empty() {
        let line = r#"{"account_id":"9","screen_name":"x","followers_count":1,"friends_count":1,"statuses_count":1,"listed_count":1,"created_at":"2019-01-01T00:00:00Z","default_profile_image":true,"has_profile_image":false}"#;
        let p = &parse_profiles(line.as_bytes(), "p").unwrap()[0];
        assert_eq!(p.name, "");
        assert_eq!(p.url, "");
    }

    #[test]
    fn ground_truth_boundaries_and_errors() {
        let ok = "account_id,credulous,bot_followee_pct\na,0,0\nb,1,12.5\nc,0,100\n";
        let d = parse_ground_truth(ok.as_bytes(), "gt", snap()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.view(), View::AllHumans);

        let bad = "account_id,credulous,bot_followee_pct\na,0,5\nb,1,101.0\n";
        match parse_ground_truth(bad.as_bytes(), "gt", snap()) {
            Err(Error::Range { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad = "account_id,credulous,bot_followee_pct\na,2,5\n";
        assert!(matches!(
            parse_ground_truth(bad.as_bytes(), "gt", snap()),
            Err(Error::Value { .. })
        ));
        let bad = "account_id,credulous,bot_followee_pct\na,0,5\na,1,6\n";
        assert!(matches!(
            parse_ground_truth(bad.as_bytes(), "gt", snap()),
            Err(Error::DuplicateId { .. })
        ));
    }

    #[test]
    fn filter_credulous_semantics() {
        let text = "account_id,credulous,bot_followee_pct\na,1,1\nb,0,2\nc,1,3\n";
        let d = parse_ground_truth(text.as_bytes(), "gt", snap()).unwrap();
        let c = filter_credulous(&d).unwrap();
        let ids: Vec<_> = c.records().iter().map(|r| r.truth.account_id.as_str()).collect();
        assert_eq!(ids, ["a", "c"]);
        assert_eq!(c.view(), View::CredulousOnly);
        assert_eq!(c.snapshot_time(), d.snapshot_time());

        let none = "account_id,credulous,bot_followee_pct\na,0,1\nb,0,2\n";
        let d = parse_ground_truth(none.as_bytes(), "gt", snap()).unwrap();
        assert!(matches!(filter_credulous(&d), Err(Error::EmptyView)));
    }

    fn botometer(id: &str) -> BotometerRecord {
        BotometerRecord {
            account_id: id.into(),
            sentiment: 0.1,
            friend: 0.2,
            user: 0.3,
            content: 0.4,
            temporal: 0.5,
            net: 0.6,
            cap_eng: 0.7,
            cap_uni: 0.8,
            score_eng: 1.5,
            score_uni: 2.5,
            tweets4ws: 200,
            mentions4ws: 40,
        }
    }

    #[test]
    fn join_reports_missing_profiles_but_tolerates_missing_scores() {
        let text = "account_id,credulous,bot_followee_pct\n1,1,1\n2,0,2\n";
        let gt = parse_ground_truth(text.as_bytes(), "gt", snap()).unwrap();
        let both = format!("{}\n{}", profile_line("1", 1), profile_line("2", 1));
        let profiles = parse_profiles(both.as_bytes(), "p").unwrap();

        let full = join_sources(gt.clone(), &profiles, &[botometer("2"), botometer("1")]).unwrap();
        assert!(full.records().iter().all(|r| r.profile.is_some() && r.scores.is_some()));
        let ids: Vec<_> = full.records().iter().map(|r| r.truth.account_id.as_str()).collect();
        assert_eq!(ids, ["1", "2"]);

        match join_sources(gt.clone(), &profiles[..1], &[]) {
            Err(Error::MissingProfiles(ids)) => assert_eq!(ids, vec!["2".to_string()]),
            other => panic!("unexpected {other:?}"),
        }

        let no_scores = join_sources(gt, &profiles, &[]).unwrap();
        assert!(no_scores.records().iter().all(|r| r.scores.is_none()));
    }

    #[test]
    fn botometer_columns_are_matched_by_name() {
        let mut buf = Vec::new();
        write_botometer(&[botometer("7")], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        // reverse the column order
        let permuted = format!(
            "{}\n{}\n",
            header.iter().rev().cloned().collect::<Vec<_>>().join(","),
            row.iter().rev().cloned().collect::<Vec<_>>().join(",")
        );
        let parsed = parse_botometer(permuted.as_bytes(), "b").unwrap();
        assert_eq!(parsed, vec![botometer("7")]);
    }

    #[test]
    fn botometer_rejects_cap_out_of_unit_interval() {
        let mut r = botometer("1");
        r.cap_eng = 1.2;
        let mut buf = Vec::new();
        write_botometer(&[r], &mut buf).unwrap();
        assert!(matches!(
            parse_botometer(&buf[..], "b"),
            Err(Error::Range { .. })
        ));
    }

    fn arb_profile() -> impl Strategy<Value = AccountProfile> {
        (
            "[a-z0-9]{1,8}",
            "[ -~]{0,12}",
            "\\PC{0,12}",
            any::<u32>(),
            any::<u32>(),
            0i64..1_600_000_000,
            any::<bool>(),
        )
            .prop_map(|(id, name, bio, followers, friends, secs, flag)| AccountProfile {
                account_id: id.clone(),
                screen_name: format!("s_{id}"),
                name,
                biography: bio,
                location: String::new(),
                url: "https://example.org".into(),
                followers_count: u64::from(followers),
                friends_count: u64::from(friends),
                statuses_count: 7,
                listed_count: u64::from(flag),
                created_at: Utc.timestamp_opt(secs, 0).unwrap(),
                default_profile_image: flag,
                has_profile_image: !flag,
            })
    }

    proptest! {
        #[test]
        fn ground_truth_round_trips(pcts in proptest::collection::vec((0.0f64..=100.0, any::<bool>()), 0..40)) {
            let truth: Vec<GroundTruthRecord> = pcts
                .iter()
                .enumerate()
                .map(|(i, (p, c))| GroundTruthRecord {
                    account_id: format!("id{i}"),
                    credulous: *c,
                    bot_followee_pct: *p,
                })
                .collect();
            let d = Dataset::from_truth(truth.clone(), snap()).unwrap();
            let mut buf = Vec::new();
            write_ground_truth(&truth, &mut buf).unwrap();
            let back = parse_ground_truth(&buf[..], "gt", snap()).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn profiles_round_trip(ps in proptest::collection::vec(arb_profile(), 0..10)) {
            let mut seen = HashSet::new();
            let ps: Vec<_> = ps.into_iter().filter(|p| seen.insert(p.account_id.clone())).collect();
            let mut buf = Vec::new();
            write_profiles(&ps, &mut buf).unwrap();
            let back = parse_profiles(&buf[..], "p").unwrap();
            prop_assert_eq!(back, ps);
        }

        #[test]
        fn filter_count_matches_label_count(labels in proptest::collection::vec(any::<bool>(), 1..60)) {
            let truth: Vec<_> = labels
                .iter()
                .enumerate()
                .map(|(i, c)| GroundTruthRecord {
                    account_id: i.to_string(),
                    credulous: *c,
                    bot_followee_pct: 1.0,
                })
                .collect();
            let d = Dataset::from_truth(truth, snap()).unwrap();
            let expected = labels.iter().filter(|c| **c).count();
            match filter_credulous(&d) {
                Ok(c) => prop_assert_eq!(c.len(), expected),
                Err(Error::EmptyView) => prop_assert_eq!(expected, 0),
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }
}
