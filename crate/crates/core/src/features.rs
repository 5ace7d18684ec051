//! The three account representations and design-matrix assembly.
//!
//! Column order is part of the public contract: [`FeatureSet::names`] never
//! changes, and dumped CSVs use these names verbatim as headers.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AccountProfile, BotometerRecord, Dataset};

pub const CLASS_A_MINUS_NAMES: [&str; 18] = [
    "friends_over_followers_sq",
    "age_days",
    "tweets",
    "has_name",
    "has_url",
    "following_rate",
    "default_image_after_2_months",
    "belongs_to_list",
    "has_profile_image",
    "friends_followers_ge_50",
    "bot_in_biography",
    "friends",
    "followers_x2_ge_friends",
    "followers",
    "friends_followers_approx_100",
    "no_bio_no_location_friends_ge_100",
    "has_address",
    "has_biography",
];

pub const BOTOMETER_PLUS_NAMES: [&str; 12] = [
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    BotometerPlus,
    ClassAMinus,
    AllFeatures,
}

impl FeatureSet {
    /// Table column order.
    pub const ALL: [FeatureSet; 3] = [
        FeatureSet::BotometerPlus,
        FeatureSet::ClassAMinus,
        FeatureSet::AllFeatures,
    ];

    pub fn dimension(self) -> usize {
        match self {
            FeatureSet::ClassAMinus => 18,
            FeatureSet::BotometerPlus => 12,
            FeatureSet::AllFeatures => 30,
        }
    }

    pub fn names(self) -> Vec<&'static str> {
        match self {
            FeatureSet::ClassAMinus => CLASS_A_MINUS_NAMES.to_vec(),
            FeatureSet::BotometerPlus => BOTOMETER_PLUS_NAMES.to_vec(),
            FeatureSet::AllFeatures => CLASS_A_MINUS_NAMES
                .iter()
                .chain(BOTOMETER_PLUS_NAMES.iter())
                .copied()
                .collect(),
        }
    }

    pub fn needs_profile(self) -> bool {
        self != FeatureSet::BotometerPlus
    }

    pub fn needs_scores(self) -> bool {
        self != FeatureSet::ClassAMinus
    }

    /// Name used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            FeatureSet::ClassAMinus => "ClassA-",
            FeatureSet::BotometerPlus => "Botometer+",
            FeatureSet::AllFeatures => "All_features",
        }
    }

    /// Short name used on the command line.
    pub fn key(self) -> &'static str {
        match self {
            FeatureSet::ClassAMinus => "classa",
            FeatureSet::BotometerPlus => "botometer",
            FeatureSet::AllFeatures => "all",
        }
    }
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classa" | "classa-" | "class_a_minus" => Ok(FeatureSet::ClassAMinus),
            "botometer" | "botometer+" | "botometer_plus" => Ok(FeatureSet::BotometerPlus),
            "all" | "all_features" => Ok(FeatureSet::AllFeatures),
            other => Err(Error::Config(format!("unknown feature set {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    set: FeatureSet,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(set: FeatureSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != set.dimension() {
            return Err(Error::DimensionMismatch {
                expected: set.dimension(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "{} vector has non-finite entries",
                set.label()
            )));
        }
        Ok(FeatureVector { set, values })
    }

    pub fn set(&self) -> FeatureSet {
        self.set
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// The eighteen profile-only features.
pub fn class_a_minus(p: &AccountProfile, snapshot_time: DateTime<Utc>) -> Result<FeatureVector> {
    if snapshot_time < p.created_at {
        return Err(Error::Temporal {
            account_id: p.account_id.clone(),
        });
    }
    let age_days = (snapshot_time - p.created_at).num_seconds().div_euclid(86_400) as f64;
    let friends = p.friends_count as f64;
    let followers = p.followers_count as f64;
    let guarded = followers.max(1.0);
    let ratio = friends / guarded;
    let has_bio = !p.biography.is_empty();
    let has_location = !p.location.is_empty();

    let values = vec![
        friends / (guarded * guarded),
        age_days,
        p.statuses_count as f64,
        flag(!p.name.is_empty()),
        flag(!p.url.is_empty()),
        friends / age_days.max(1.0),
        flag(p.default_profile_image && age_days >= 60.0),
        flag(p.listed_count > 0),
        flag(p.has_profile_image),
        flag(ratio >= 50.0),
        flag(p.biography.to_lowercase().contains("bot")),
        friends,
        flag(2.0 * followers >= friends),
        followers,
        flag((90.0..=110.0).contains(&ratio)),
        flag(!has_bio && !has_location && p.friends_count >= 100),
        flag(has_location),
        flag(has_bio),
    ];
    FeatureVector::new(FeatureSet::ClassAMinus, values)
}

pub fn botometer_plus(r: &BotometerRecord) -> FeatureVector {
    let values = vec![
        r.sentiment,
        r.friend,
        r.user,
        r.content,
        r.temporal,
        r.net,
        r.cap_eng,
        r.cap_uni,
        r.score_eng,
        r.score_uni,
        r.tweets4ws as f64,
        r.mentions4ws as f64,
    ];
    FeatureVector {
        set: FeatureSet::BotometerPlus,
        values,
    }
}

pub fn all_features(a: &FeatureVector, b: &FeatureVector) -> Result<FeatureVector> {
    if a.set != FeatureSet::ClassAMinus {
        return Err(Error::FeatureSetMismatch {
            expected: FeatureSet::ClassAMinus.label().into(),
            found: a.set.label().into(),
        });
    }
    if b.set != FeatureSet::BotometerPlus {
        return Err(Error::FeatureSetMismatch {
            expected: FeatureSet::BotometerPlus.label().into(),
            found: b.set.label().into(),
        });
    }
    let mut values = a.values.clone();
    values.extend_from_slice(&b.values);
    Ok(FeatureVector {
        set: FeatureSet::AllFeatures,
        values,
    })
}

/// Features of one account under `set`, from whichever sources that set
/// reads.
pub fn account_vector(
    set: FeatureSet,
    profile: Option<&AccountProfile>,
    scores: Option<&BotometerRecord>,
    account_id: &str,
    snapshot_time: DateTime<Utc>,
) -> Result<FeatureVector> {
    let profile_part = || match profile {
        Some(p) => class_a_minus(p, snapshot_time),
        None => Err(Error::MissingProfiles(vec![account_id.to_string()])),
    };
    let score_part = || match scores {
        Some(s) => Ok(botometer_plus(s)),
        None => Err(Error::MissingScores(vec![account_id.to_string()])),
    };
    match set {
        FeatureSet::ClassAMinus => profile_part(),
        FeatureSet::BotometerPlus => score_part(),
        FeatureSet::AllFeatures => all_features(&profile_part()?, &score_part()?),
    }
}

/// Design matrix: one row per account, with parallel targets and ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    set: FeatureSet,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        set: FeatureSet,
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        ids: Vec<String>,
    ) -> Result<Self> {
        if rows.len() != targets.len() || rows.len() != ids.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: targets.len().min(ids.len()),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != set.dimension()) {
            return Err(Error::DimensionMismatch {
                expected: set.dimension(),
                found: bad.len(),
            });
        }
        Ok(FeatureMatrix {
            set,
            rows,
            targets,
            ids,
        })
    }

    /// Matrix with generated ids, handy for in-memory data.
    pub fn from_rows(set: FeatureSet, rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(set, rows, targets, ids)
    }

    pub fn set(&self) -> FeatureSet {
        self.set
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            set: self.set,
            values: self.rows[i].clone(),
        }
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            set: self.set,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }

    /// CSV with `account_id`, the frozen feature names, then
    /// `bot_followee_pct`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Parse {
            file: "<features>".into(),
            line: 0,
            message: e.to_string(),
        };
        let mut header = vec!["account_id"];
        header.extend(self.set.names());
        header.push("bot_followee_pct");
        wtr.write_record(&header).map_err(err)?;
        for ((id, row), t) in self.ids.iter().zip(&self.rows).zip(&self.targets) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            rec.push(format!("{t:?}"));
            wtr.write_record(&rec).map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::io("<features>", e))?;
        Ok(())
    }
}

pub fn assemble_matrix(d: &Dataset, set: FeatureSet) -> Result<FeatureMatrix> {
    if set.needs_scores() {
        let missing: Vec<String> = d
            .records()
            .iter()
            .filter(|r| r.scores.is_none())
            .map(|r| r.truth.account_id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingScores(missing));
        }
    }
    if set.needs_profile() {
        let missing: Vec<String> = d
            .records()
            .iter()
            .filter(|r| r.profile.is_none())
            .map(|r| r.truth.account_id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingProfiles(missing));
        }
    }
    let mut rows = Vec::with_capacity(d.len());
    let mut targets = Vec::with_capacity(d.len());
    let mut ids = Vec::with_capacity(d.len());
    for r in d.records() {
        let v = account_vector(
            set,
            r.profile.as_ref(),
            r.scores.as_ref(),
            &r.truth.account_id,
            d.snapshot_time(),
        )?;
        rows.push(v.values);
        targets.push(r.truth.bot_followee_pct);
        ids.push(r.truth.account_id.clone());
    }
    FeatureMatrix::new(set, rows, targets, ids)
}

/// Per-column affine map onto `[0, 1]` learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ColumnScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::EmptyInput("cannot fit a scaler on zero rows".into()))?;
        let mut min = first.clone();
        let mut max = first.clone();
        for r in &rows[1..] {
            for (j, v) in r.iter().enumerate() {
                min[j] = min[j].min(*v);
                max[j] = max[j].max(*v);
            }
        }
        Ok(ColumnScaler { min, max })
    }

    pub fn dimension(&self) -> usize {
        self.min.len()
    }

    /// No clamping: held-out values outside the training range map outside
    /// `[0, 1]`. Constant training columns map to 0.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(v, (lo, hi))| {
                let span = hi - lo;
                if span > 0.0 {
                    (v - lo) / span
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn transform_rows(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

pub fn normalize_columns(m: &FeatureMatrix) -> Result<(FeatureMatrix, ColumnScaler)> {
    if m.is_empty() {
        return Err(Error::EmptyInput("cannot normalize an empty matrix".into()));
    }
    let scaler = ColumnScaler::fit(&m.rows)?;
    let scaled = FeatureMatrix {
        set: m.set,
        rows: scaler.transform_rows(&m.rows),
        targets: m.targets.clone(),
        ids: m.ids.clone(),
    };
    Ok((scaled, scaler))
}
