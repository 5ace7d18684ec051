//! Seeded synthetic datasets with a planted linear dependency of the target
//! on the thirty combined features.
//!
//! Profiles draw counts from log-normal marginals, ages uniformly up to ten
//! years and flags from Bernoulli draws; scores are uniform within their
//! ranges. The target is `clip(intercept + w·x + N(0, noise_std), 0, 100)`
//! and the highest `round(n · credulous_fraction)` targets are labelled
//! credulous.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::features::{all_features, botometer_plus, class_a_minus, FeatureSet};
use crate::ingest::{
    write_botometer, write_ground_truth, write_profiles, AccountProfile, BotometerRecord,
    GroundTruthRecord,
};
use crate::kv;
use crate::numeric::RandomSource;

pub const MIN_ACCOUNTS: usize = 20;
pub const PROFILES_FILE: &str = "profiles.jsonl";
pub const BOTOMETER_FILE: &str = "botometer.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Weights over the combined layout used when none are configured: a few
/// profile flags plus several score columns.
pub const DEFAULT_WEIGHTS: [f64; 30] = [
    0.0, 0.001, 0.0, 0.0, -1.5, 0.0, 2.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.5, 0.0, -1.0,
    0.0, 4.0, 6.0, 0.0, 3.0, 0.0, 8.0, 0.0, 1.0, 0.0, 0.0, 0.0,
];
pub const DEFAULT_INTERCEPT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_accounts: usize,
    pub credulous_fraction: f64,
    pub noise_std: f64,
    /// Weights over the combined feature layout; `None` uses
    /// [`DEFAULT_WEIGHTS`].
    pub planted_weights: Option<Vec<f64>>,
    pub intercept: f64,
    pub seed: u64,
    pub snapshot_time: DateTime<Utc>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_accounts: 2838,
            credulous_fraction: 316.0 / 2838.0,
            noise_std: 4.0,
            planted_weights: None,
            intercept: DEFAULT_INTERCEPT,
            seed: 1,
            snapshot_time: default_snapshot(),
        }
    }
}

pub fn default_snapshot() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2020, 6, 1, 0, 0, 0).unwrap()
}

impl SynthConfig {
    pub const KEYS: [&'static str; 7] = [
        "n_accounts",
        "credulous_fraction",
        "noise_std",
        "planted_weights",
        "intercept",
        "seed",
        "snapshot_time",
    ];

    /// Reads a flat `key = value` file; unknown keys are rejected and
    /// missing keys keep their defaults.
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let entries = kv::parse(text, file)?;
        let mut cfg = SynthConfig::default();
        for (key, (raw, line)) in &entries {
            cfg.set(key, raw, file, *line)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, raw: &str, file: &str, line: usize) -> Result<()> {
        match key {
            "n_accounts" => self.n_accounts = kv::value(file, key, raw, line)?,
            "credulous_fraction" => self.credulous_fraction = kv::value(file, key, raw, line)?,
            "noise_std" => self.noise_std = kv::value(file, key, raw, line)?,
            "intercept" => self.intercept = kv::value(file, key, raw, line)?,
            "seed" => self.seed = kv::value(file, key, raw, line)?,
            "snapshot_time" => self.snapshot_time = kv::value(file, key, raw, line)?,
            "planted_weights" => {
                self.planted_weights = Some(
                    raw.split(',')
                        .map(|v| kv::value(file, key, v.trim(), line))
                        .collect::<Result<_>>()?,
                )
            }
            other => {
                return Err(Error::Config(format!(
                    "{file}:{line}: unknown key {other:?} (expected one of {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        self.planted_weights.as_deref().unwrap_or(&DEFAULT_WEIGHTS)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_accounts < MIN_ACCOUNTS {
            return bad(format!("n_accounts must be at least {MIN_ACCOUNTS}, got {}", self.n_accounts));
        }
        if !(self.credulous_fraction > 0.0 && self.credulous_fraction < 1.0) {
            return bad(format!("credulous_fraction must lie in (0, 1), got {}", self.credulous_fraction));
        }
        let credulous = self.credulous_count();
        if credulous == 0 || credulous == self.n_accounts {
            return bad(format!(
                "credulous_fraction {} labels {credulous} of {} accounts",
                self.credulous_fraction, self.n_accounts
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be finite and >= 0, got {}", self.noise_std));
        }
        if !self.intercept.is_finite() {
            return bad("intercept must be finite".into());
        }
        let w = self.weights();
        if w.len() != FeatureSet::AllFeatures.dimension() {
            return bad(format!(
                "planted_weights needs {} values, got {}",
                FeatureSet::AllFeatures.dimension(),
                w.len()
            ));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return bad("planted_weights must be finite".into());
        }
        if w.iter().all(|v| *v == 0.0) {
            return bad("planted_weights are all zero: the target would be pure noise".into());
        }
        Ok(())
    }

    pub fn credulous_count(&self) -> usize {
        (self.n_accounts as f64 * self.credulous_fraction).round() as usize
    }
}

/// The three generated sources, in account order.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub profiles: Vec<AccountProfile>,
    pub scores: Vec<BotometerRecord>,
    pub truth: Vec<GroundTruthRecord>,
    pub snapshot_time: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPaths {
    pub profiles: PathBuf,
    pub botometer: PathBuf,
    pub ground_truth: PathBuf,
}

impl SynthPaths {
    pub fn in_dir(dir: &Path) -> Self {
        SynthPaths {
            profiles: dir.join(PROFILES_FILE),
            botometer: dir.join(BOTOMETER_FILE),
            ground_truth: dir.join(GROUND_TRUTH_FILE),
        }
    }
}

fn bernoulli(rng: &mut RandomSource, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn log_normal(rng: &mut RandomSource, mu: f64, sigma: f64) -> u64 {
    LogNormal::new(mu, sigma).expect("valid log-normal").sample(rng).floor() as u64
}

fn profile(i: usize, rng: &mut RandomSource, snapshot: DateTime<Utc>) -> AccountProfile {
    let id = format!("{:08}", 10_000_000 + i);
    let age_seconds = rng.random_range(86_400..=3650 * 86_400i64);
    let biography = if bernoulli(rng, 0.7) {
        if bernoulli(rng, 0.03) {
            "Part-time bot enthusiast".to_string()
        } else {
            "Coffee, books and football".to_string()
        }
    } else {
        String::new()
    };
    let listed = if bernoulli(rng, 0.4) { 1 + log_normal(rng, 1.0, 1.0) } else { 0 };
    let default_image = bernoulli(rng, 0.1);
    AccountProfile {
        account_id: id.clone(),
        screen_name: format!("user{id}"),
        name: if bernoulli(rng, 0.95) { format!("User {i}") } else { String::new() },
        biography,
        location: if bernoulli(rng, 0.6) { "Pisa".into() } else { String::new() },
        url: if bernoulli(rng, 0.35) { format!("https://example.org/{id}") } else { String::new() },
        followers_count: log_normal(rng, 5.0, 1.5),
        friends_count: log_normal(rng, 5.5, 1.2),
        statuses_count: log_normal(rng, 7.0, 1.5),
        listed_count: listed,
        created_at: snapshot - Duration::seconds(age_seconds),
        default_profile_image: default_image,
        has_profile_image: !default_image && bernoulli(rng, 0.97),
    }
}

fn scores(id: &str, rng: &mut RandomSource) -> BotometerRecord {
    BotometerRecord {
        account_id: id.to_string(),
        sentiment: rng.random(),
        friend: rng.random(),
        user: rng.random(),
        content: rng.random(),
        temporal: rng.random(),
        net: rng.random(),
        cap_eng: rng.random(),
        cap_uni: rng.random(),
        score_eng: rng.random_range(0.0..5.0),
        score_uni: rng.random_range(0.0..5.0),
        tweets4ws: rng.random_range(0..=200),
        mentions4ws: rng.random_range(0..=100),
    }
}

/// Generates the dataset described by `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let root = RandomSource::new(cfg.seed);
    let mut prof_rng = root.child_named("profiles");
    let mut score_rng = root.child_named("scores");
    let mut noise_rng = root.child_named("noise");
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let w = cfg.weights();

    let mut profiles = Vec::with_capacity(cfg.n_accounts);
    let mut records = Vec::with_capacity(cfg.n_accounts);
    let mut targets = Vec::with_capacity(cfg.n_accounts);
    for i in 0..cfg.n_accounts {
        let p = profile(i, &mut prof_rng, cfg.snapshot_time);
        let s = scores(&p.account_id, &mut score_rng);
        let x = all_features(&class_a_minus(&p, cfg.snapshot_time)?, &botometer_plus(&s))?;
        let signal = cfg.intercept + x.values().iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        targets.push((signal + noise.sample(&mut noise_rng)).clamp(0.0, 100.0));
        profiles.push(p);
        records.push(s);
    }

    // top targets are credulous; equal targets go to the earlier account
    let mut order: Vec<usize> = (0..cfg.n_accounts).collect();
    order.sort_by(|&a, &b| targets[b].total_cmp(&targets[a]).then(a.cmp(&b)));
    let mut credulous = vec![false; cfg.n_accounts];
    for &i in &order[..cfg.credulous_count()] {
        credulous[i] = true;
    }
    let truth = profiles
        .iter()
        .zip(&targets)
        .zip(&credulous)
        .map(|((p, &t), &c)| GroundTruthRecord {
            account_id: p.account_id.clone(),
            credulous: c,
            bot_followee_pct: t,
        })
        .collect();
    Ok(SynthData {
        profiles,
        scores: records,
        truth,
        snapshot_time: cfg.snapshot_time,
    })
}

impl SynthData {
    pub fn profiles_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_profiles(&self.profiles, &mut buf)?;
        Ok(buf)
    }

    pub fn botometer_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_botometer(&self.scores, &mut buf)?;
        Ok(buf)
    }

    pub fn ground_truth_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_ground_truth(&self.truth, &mut buf)?;
        Ok(buf)
    }

    /// Writes the three files, each atomically; all are serialized before
    /// the first one is written.
    pub fn write(&self, paths: &SynthPaths) -> Result<()> {
        let p = self.profiles_bytes()?;
        let b = self.botometer_bytes()?;
        let g = self.ground_truth_bytes()?;
        crate::write_atomic(&paths.profiles, &p)?;
        crate::write_atomic(&paths.botometer, &b)?;
        crate::write_atomic(&paths.ground_truth, &g)
    }
}
