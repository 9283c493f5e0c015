//! Portfolio categorization, category shortlisting and weighting profiles.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Portfolio;
use crate::params::{FeatureVector, Param};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrataError {
    #[error("portfolio is empty")]
    EmptyPortfolio,
    #[error("no feature vector for {0}")]
    MissingVector(String),
    #[error("category {0} has no scaled V_TAM aggregate")]
    UnscaledInput(String),
    #[error("unknown profile {0}")]
    UnknownProfile(String),
    #[error("invalid profile {name}: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("bad category key `{0}`")]
    BadKey(String),
    #[error("profiles file: {0}")]
    Config(String),
}

pub type Result<T, E = StrataError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MaturityBand {
    GT15,
    Y10to15,
    Y5to10,
    LT5,
}

impl MaturityBand {
    pub fn of(l_rem: f64) -> Self {
        if l_rem > 15.0 {
            MaturityBand::GT15
        } else if l_rem >= 10.0 {
            MaturityBand::Y10to15
        } else if l_rem >= 5.0 {
            MaturityBand::Y5to10
        } else {
            MaturityBand::LT5
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            MaturityBand::GT15 => "GT15",
            MaturityBand::Y10to15 => "Y10to15",
            MaturityBand::Y5to10 => "Y5to10",
            MaturityBand::LT5 => "LT5",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GrowthBand {
    High,
    Medium,
    Low,
}

impl GrowthBand {
    fn as_str(self) -> &'static str {
        match self {
            GrowthBand::High => "High",
            GrowthBand::Medium => "Medium",
            GrowthBand::Low => "Low",
        }
    }
}

/// Tertile cut points of a sample: `(q1, q2)` with `q1 = x[ceil(n/3) - 1]`
/// and `q2 = x[ceil(2n/3) - 1]` over the sorted sample.
pub fn tertiles(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some((sorted[n.div_ceil(3) - 1], sorted[(2 * n).div_ceil(3) - 1]))
}

pub fn growth_band(s_trend: f64, cuts: (f64, f64)) -> GrowthBand {
    if s_trend <= cuts.0 {
        GrowthBand::Low
    } else if s_trend <= cuts.1 {
        GrowthBand::Medium
    } else {
        GrowthBand::High
    }
}

/// `CPC:maturity:growth`, e.g. `G11C:Y10to15:High`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryKey {
    pub cpc_prefix: String,
    pub maturity_band: MaturityBand,
    pub growth_band: GrowthBand,
}

impl fmt::Display for CategoryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.cpc_prefix, self.maturity_band.as_str(), self.growth_band.as_str())
    }
}

impl FromStr for CategoryKey {
    type Err = StrataError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || StrataError::BadKey(s.to_string());
        let mut parts = s.split(':');
        let (Some(cpc), Some(m), Some(g), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let maturity_band = [MaturityBand::GT15, MaturityBand::Y10to15, MaturityBand::Y5to10, MaturityBand::LT5]
            .into_iter()
            .find(|b| b.as_str() == m)
            .ok_or_else(bad)?;
        let growth_band = [GrowthBand::High, GrowthBand::Medium, GrowthBand::Low]
            .into_iter()
            .find(|b| b.as_str() == g)
            .ok_or_else(bad)?;
        if cpc.is_empty() {
            return Err(bad());
        }
        Ok(CategoryKey { cpc_prefix: cpc.to_string(), maturity_band, growth_band })
    }
}

impl Serialize for CategoryKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CategoryKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Selection pattern over category keys. Each of the three components is
/// either `*` or an exact value; omitted trailing components match anything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPattern {
    parts: [Option<String>; 3],
}

impl FromStr for KeyPattern {
    type Err = StrataError;

    fn from_str(s: &str) -> Result<Self> {
        let split: Vec<&str> = s.split(':').collect();
        if s.is_empty() || split.len() > 3 {
            return Err(StrataError::BadKey(s.to_string()));
        }
        let mut parts: [Option<String>; 3] = Default::default();
        for (slot, p) in parts.iter_mut().zip(&split) {
            *slot = (*p != "*").then(|| p.to_string());
        }
        Ok(KeyPattern { parts })
    }
}

impl KeyPattern {
    pub fn matches(&self, key: &CategoryKey) -> bool {
        let actual = [key.cpc_prefix.as_str(), key.maturity_band.as_str(), key.growth_band.as_str()];
        self.parts.iter().zip(actual).all(|(p, a)| p.as_deref().is_none_or(|p| p == a))
    }
}

/// Mean feature values over a category's members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean_l_rem: f64,
    pub mean_s_trend: f64,
    pub mean_v_tam: f64,
    pub mean_cagr_tech: f64,
    /// `mean_v_tam` min-max scaled across all categories of the run.
    pub v_tam_scaled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub key: CategoryKey,
    pub members: Vec<String>,
    pub aggregates: Aggregates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandsConfig {
    pub cpc_depth: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        BandsConfig { cpc_depth: 4 }
    }
}

pub fn cpc_prefix(code: &str, depth: usize) -> String {
    code.chars().filter(|c| !c.is_whitespace()).take(depth).collect()
}

fn aggregate(members: &[String], vectors: &BTreeMap<String, FeatureVector<f64>>) -> Aggregates {
    let n = members.len() as f64;
    let mean = |p: Param| members.iter().map(|id| vectors[id].get(p)).sum::<f64>() / n;
    Aggregates {
        mean_l_rem: mean(Param::LRem),
        mean_s_trend: mean(Param::STrend),
        mean_v_tam: mean(Param::VTam),
        mean_cagr_tech: mean(Param::CagrTech),
        v_tam_scaled: None,
    }
}

/// Min-max scales `mean_v_tam` across `categories`; a zero range maps to 0.
pub fn scale_tam(categories: &mut [Category]) {
    let (lo, hi) = categories
        .iter()
        .map(|c| c.aggregates.mean_v_tam)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    for c in categories.iter_mut() {
        let range = hi - lo;
        c.aggregates.v_tam_scaled = Some(if range > 0.0 { (c.aggregates.mean_v_tam - lo) / range } else { 0.0 });
    }
}

/// Partitions the portfolio by CPC prefix, maturity band and growth band.
/// Categories come back sorted by key with members sorted by id.
pub fn categorize(
    p: &Portfolio,
    vectors: &BTreeMap<String, FeatureVector<f64>>,
    cfg: &BandsConfig,
) -> Result<Vec<Category>> {
    if p.is_empty() {
        return Err(StrataError::EmptyPortfolio);
    }
    for r in &p.records {
        if !vectors.contains_key(&r.patent_id) {
            return Err(StrataError::MissingVector(r.patent_id.clone()));
        }
    }
    let trends: Vec<f64> = p.records.iter().map(|r| vectors[&r.patent_id].get(Param::STrend)).collect();
    let cuts = tertiles(&trends).ok_or(StrataError::EmptyPortfolio)?;

    let mut groups: BTreeMap<CategoryKey, Vec<String>> = BTreeMap::new();
    for r in &p.records {
        let v = &vectors[&r.patent_id];
        let key = CategoryKey {
            cpc_prefix: cpc_prefix(r.primary_cpc(), cfg.cpc_depth),
            maturity_band: MaturityBand::of(v.get(Param::LRem)),
            growth_band: growth_band(v.get(Param::STrend), cuts),
        };
        groups.entry(key).or_default().push(r.patent_id.clone());
    }
    let mut categories: Vec<Category> = groups
        .into_iter()
        .map(|(key, mut members)| {
            members.sort();
            let aggregates = aggregate(&members, vectors);
            Category { key, members, aggregates }
        })
        .collect();
    scale_tam(&mut categories);
    Ok(categories)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProfileKind {
    AggressiveGrowth,
    DefensiveMoat,
    QuickMonetization,
    Custom,
}

/// Strategic intent: category-score weights plus per-feature multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightingProfile {
    pub name: String,
    pub kind: ProfileKind,
    /// Weights on mean L_rem, S_trend, scaled V_TAM and CAGR_tech.
    pub category_weights: [f64; 4],
    /// Parameter name to multiplier; absent parameters use 1.0.
    #[serde(default)]
    pub feature_multipliers: BTreeMap<String, f64>,
}

pub const BOOST: f64 = 2.0;

impl WeightingProfile {
    pub fn new(
        name: &str,
        kind: ProfileKind,
        category_weights: [f64; 4],
        feature_multipliers: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let p = WeightingProfile { name: name.to_string(), kind, category_weights, feature_multipliers };
        p.validate()?;
        Ok(p)
    }

    fn builtin(kind: ProfileKind, weights: [f64; 4], boosted: &[Param]) -> Self {
        let name = format!("{kind:?}");
        let mult = boosted.iter().map(|p| (p.name().to_string(), BOOST)).collect();
        WeightingProfile { name, kind, category_weights: weights, feature_multipliers: mult }
    }

    pub fn aggressive_growth() -> Self {
        Self::builtin(
            ProfileKind::AggressiveGrowth,
            [0.1, 0.4, 0.1, 0.4],
            &[Param::VCite, Param::CagrTech, Param::STrend],
        )
    }

    pub fn defensive_moat() -> Self {
        Self::builtin(
            ProfileKind::DefensiveMoat,
            [0.7, 0.1, 0.1, 0.1],
            &[Param::SClaim, Param::NBcite, Param::SLitigation],
        )
    }

    pub fn quick_monetization() -> Self {
        Self::builtin(
            ProfileKind::QuickMonetization,
            [0.2, 0.1, 0.5, 0.2],
            &[Param::Trl, Param::Mrl, Param::SSc, Param::SDemand],
        )
    }

    /// Neutral profile: equal category weights, every multiplier 1.
    pub fn neutral() -> Self {
        WeightingProfile {
            name: "Custom".into(),
            kind: ProfileKind::Custom,
            category_weights: [0.25; 4],
            feature_multipliers: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| StrataError::InvalidProfile { name: self.name.clone(), reason };
        if self.category_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("category weights must be nonnegative".into()));
        }
        let sum: f64 = self.category_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("category weights sum to {sum}")));
        }
        for (k, m) in &self.feature_multipliers {
            if Param::from_name(k).is_none() {
                return Err(invalid(format!("unknown parameter {k}")));
            }
            if !(m.is_finite() && *m >= 0.0) {
                return Err(invalid(format!("multiplier for {k} is {m}")));
            }
        }
        Ok(())
    }

    pub fn multiplier(&self, p: Param) -> f64 {
        self.feature_multipliers.get(p.name()).copied().unwrap_or(1.0)
    }

    /// Multipliers in slot order.
    pub fn multiplier_vector(&self) -> Vec<f64> {
        Param::ALL.iter().map(|p| self.multiplier(*p)).collect()
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
struct ProfileEntry {
    category_weights: Option<[f64; 4]>,
    #[serde(default)]
    feature_multipliers: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct ProfilesFile {
    #[serde(default)]
    profiles: BTreeMap<String, ProfileEntry>,
}

/// The built-in profiles plus any defined in `profiles.toml`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    profiles: BTreeMap<String, WeightingProfile>,
}

impl Default for ProfileSet {
    fn default() -> Self {
        let profiles = [
            WeightingProfile::aggressive_growth(),
            WeightingProfile::defensive_moat(),
            WeightingProfile::quick_monetization(),
            WeightingProfile::neutral(),
        ]
        .into_iter()
        .map(|p| (p.name.clone(), p))
        .collect();
        ProfileSet { profiles }
    }
}

impl ProfileSet {
    /// Entries named after a built-in replace it; other names add custom
    /// profiles. Missing `category_weights` fall back to equal weights.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: ProfilesFile = toml::from_str(s).map_err(|e| StrataError::Config(e.to_string()))?;
        let mut set = ProfileSet::default();
        for (name, entry) in file.profiles {
            let kind = set.profiles.get(&name).map_or(ProfileKind::Custom, |p| p.kind);
            let weights = entry.category_weights.unwrap_or([0.25; 4]);
            let profile = WeightingProfile::new(&name, kind, weights, entry.feature_multipliers)?;
            set.profiles.insert(name, profile);
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| StrataError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    pub fn resolve(&self, name: &str) -> Result<WeightingProfile> {
        self.profiles.get(name).cloned().ok_or_else(|| StrataError::UnknownProfile(name.to_string()))
    }
}

/// Looks `name` up among the built-in profiles.
pub fn resolve_profile(name: &str) -> Result<WeightingProfile> {
    ProfileSet::default().resolve(name)
}

/// Componentwise multiply by the profile multipliers; masks are kept.
pub fn apply_profile<T: Scalar>(v: &FeatureVector<T>, profile: &WeightingProfile) -> FeatureVector<T> {
    let mut out = v.clone();
    for (x, m) in out.values.iter_mut().zip(profile.multiplier_vector()) {
        *x = *x * T::of(m);
    }
    out
}

/// Weighted sum of a category's aggregates.
pub fn category_score(c: &Category, profile: &WeightingProfile) -> Result<f64> {
    let a = &c.aggregates;
    let tam = a.v_tam_scaled.ok_or_else(|| StrataError::UnscaledInput(c.key.to_string()))?;
    let [w1, w2, w3, w4] = profile.category_weights;
    Ok(w1 * a.mean_l_rem + w2 * a.mean_s_trend + w3 * tam + w4 * a.mean_cagr_tech)
}

/// Category keys with their scores, best first, ties by key.
pub fn rank_categories(categories: &[Category], profile: &WeightingProfile) -> Result<Vec<(CategoryKey, f64)>> {
    let mut scored =
        categories.iter().map(|c| Ok((c.key.clone(), category_score(c, profile)?))).collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored)
}

/// Keys of categories matched by any pattern, in key order.
pub fn select_categories(categories: &[Category], patterns: &[KeyPattern]) -> Vec<CategoryKey> {
    categories.iter().filter(|c| patterns.iter().any(|p| p.matches(&c.key))).map(|c| c.key.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests_support::record;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn portfolio(specs: &[(&str, &str, f64, f64, f64)]) -> (Portfolio, BTreeMap<String, FeatureVector<f64>>) {
        let mut records = vec![];
        let mut vectors = BTreeMap::new();
        for &(id, cpc, l_rem, trend, tam) in specs {
            let mut r = record(id);
            r.cpc_codes = vec![cpc.to_string()];
            records.push(r);
            let mut v = FeatureVector::<f64>::default();
            v.set(Param::LRem, l_rem);
            v.set(Param::STrend, trend);
            v.set(Param::VTam, tam);
            v.set(Param::CagrTech, trend / 2.0);
            vectors.insert(id.to_string(), v);
        }
        let date = NaiveDate::from_ymd_opt(2025, 1, 1).unwrap();
        (Portfolio { records, evaluation_date: date, provenance: String::new() }, vectors)
    }

    #[test]
    fn single_patent_single_category() {
        let (p, v) = portfolio(&[("A", "G11C16/04", 12.0, 0.1, 5.0)]);
        let cats = categorize(&p, &v, &BandsConfig::default()).unwrap();
        assert_eq!(cats.len(), 1);
        assert_eq!(cats[0].members, vec!["A"]);
        assert_eq!(cats[0].key.to_string(), "G11C:Y10to15:Low");
    }

    #[test]
    fn band_boundaries() {
        let (p, v) = portfolio(&[("A", "G11C16/04", 16.0, 0.1, 1.0), ("B", "G11C16/04", 3.0, 0.1, 1.0)]);
        let cats = categorize(&p, &v, &BandsConfig::default()).unwrap();
        let bands: Vec<_> = cats.iter().map(|c| c.key.maturity_band).collect();
        assert_eq!(bands, vec![MaturityBand::GT15, MaturityBand::LT5]);
        assert_eq!(MaturityBand::of(15.0), MaturityBand::Y10to15);
        assert_eq!(MaturityBand::of(10.0), MaturityBand::Y10to15);
        assert_eq!(MaturityBand::of(9.999), MaturityBand::Y5to10);
        assert_eq!(MaturityBand::of(5.0), MaturityBand::Y5to10);
    }

    #[test]
    fn tertile_cuts() {
        assert_eq!(tertiles(&[3.0, 1.0, 2.0]), Some((1.0, 2.0)));
        assert_eq!(tertiles(&[1.0, 2.0, 3.0, 4.0]), Some((2.0, 3.0)));
        assert_eq!(tertiles(&[]), None);
        assert_eq!(growth_band(2.5, (1.0, 2.0)), GrowthBand::High);
    }

    #[test]
    fn empty_portfolio_rejected() {
        let (p, v) = portfolio(&[]);
        assert_eq!(categorize(&p, &v, &BandsConfig::default()), Err(StrataError::EmptyPortfolio));
    }

    #[test]
    fn key_round_trip_and_patterns() {
        let k: CategoryKey = "G11C:Y10to15:High".parse().unwrap();
        assert_eq!(k.to_string(), "G11C:Y10to15:High");
        assert!("G11C:Y10to15".parse::<CategoryKey>().is_err());
        assert!("G11C:*:High".parse::<KeyPattern>().unwrap().matches(&k));
        assert!("G11C".parse::<KeyPattern>().unwrap().matches(&k));
        assert!(!"H01M:*:*".parse::<KeyPattern>().unwrap().matches(&k));
        assert!(!"*:*:Low".parse::<KeyPattern>().unwrap().matches(&k));
        assert_eq!(serde_json::to_string(&k).unwrap(), "\"G11C:Y10to15:High\"");
    }

    #[test]
    fn score_weights() {
        let (p, v) = portfolio(&[("A", "G11C16/04", 12.0, 0.2, 5.0), ("B", "G11C16/04", 13.0, 0.2, 5.0)]);
        let cats = categorize(&p, &v, &BandsConfig::default()).unwrap();
        let mut prof = WeightingProfile::neutral();
        prof.category_weights = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(category_score(&cats[0], &prof).unwrap(), 12.5);
        prof.category_weights = [0.25; 4];
        let a = &cats[0].aggregates;
        let expect = 0.25 * (a.mean_l_rem + a.mean_s_trend + 0.0 + a.mean_cagr_tech);
        assert_eq!(category_score(&cats[0], &prof).unwrap(), expect);
        let mut unscaled = cats[0].clone();
        unscaled.aggregates.v_tam_scaled = None;
        assert!(matches!(category_score(&unscaled, &prof), Err(StrataError::UnscaledInput(_))));
    }

    #[test]
    fn builtin_profiles() {
        let ag = resolve_profile("AggressiveGrowth").unwrap();
        let boosted: BTreeSet<_> =
            ag.feature_multipliers.iter().filter(|(_, m)| **m != 1.0).map(|(k, _)| k.as_str()).collect();
        assert_eq!(boosted, BTreeSet::from(["V_cite", "CAGR_tech", "S_trend"]));
        let qm = resolve_profile("QuickMonetization").unwrap();
        assert_eq!(qm.multiplier(Param::SSc), 2.0);
        assert_eq!(qm.multiplier(Param::VCite), 1.0);
        assert!(matches!(resolve_profile("Nope"), Err(StrataError::UnknownProfile(_))));
        let custom = WeightingProfile::new("mine", ProfileKind::Custom, [0.25; 4], BTreeMap::new()).unwrap();
        assert!(custom.multiplier_vector().iter().all(|m| *m == 1.0));
        for name in ["AggressiveGrowth", "DefensiveMoat", "QuickMonetization", "Custom"] {
            resolve_profile(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn profiles_toml() {
        let set = ProfileSet::from_toml_str(
            "[profiles.Licensing]\ncategory_weights = [0.5, 0.0, 0.5, 0.0]\n[profiles.Licensing.feature_multipliers]\nS_MA = 3.0\n",
        )
        .unwrap();
        let p = set.resolve("Licensing").unwrap();
        assert_eq!(p.kind, ProfileKind::Custom);
        assert_eq!(p.multiplier(Param::SMa), 3.0);
        assert!(set.resolve("DefensiveMoat").is_ok());
        assert!(ProfileSet::from_toml_str("[profiles.X.feature_multipliers]\nBogus = 1.0\n").is_err());
        assert!(ProfileSet::from_toml_str("[profiles.X]\ncategory_weights = [1.0, 1.0, 0.0, 0.0]\n").is_err());
    }

    #[test]
    fn apply_profile_examples() {
        let mut v = FeatureVector::<f64>::default();
        for (i, p) in Param::ALL.iter().enumerate() {
            v.set(*p, i as f64 + 1.0);
        }
        v.set_missing(Param::SNeedSeed);
        assert_eq!(apply_profile(&v, &WeightingProfile::neutral()), v);
        let mut prof = WeightingProfile::neutral();
        prof.feature_multipliers.insert("V_cite".into(), 2.0);
        let out = apply_profile(&v, &prof);
        for p in Param::ALL {
            let factor = if p == Param::VCite { 2.0 } else { 1.0 };
            assert_eq!(out.get(p), v.get(p) * factor);
        }
        assert_eq!(out.missing_mask, v.missing_mask);
    }

    fn arb_portfolio() -> impl Strategy<Value = Vec<(String, String, f64, f64, f64)>> {
        prop::collection::vec(
            (
                prop::sample::select(vec!["G11C16/04", "G06N3/063", "H01M10/05"]),
                0.0f64..25.0,
                -0.5f64..0.5,
                0.0f64..1e9,
            ),
            1..40,
        )
        .prop_map(|rows| {
            rows.into_iter().enumerate().map(|(i, (c, l, t, m))| (format!("P{i:03}"), c.to_string(), l, t, m)).collect()
        })
    }

    proptest! {
        #[test]
        fn categorize_is_a_partition(rows in arb_portfolio()) {
            let specs: Vec<(&str, &str, f64, f64, f64)> =
                rows.iter().map(|(a, b, c, d, e)| (a.as_str(), b.as_str(), *c, *d, *e)).collect();
            let (p, v) = portfolio(&specs);
            let cats = categorize(&p, &v, &BandsConfig::default()).unwrap();
            let mut seen = BTreeSet::new();
            for c in &cats {
                for m in &c.members {
                    prop_assert!(seen.insert(m.clone()));
                }
                let again = aggregate(&c.members, &v);
                prop_assert_eq!(again.mean_l_rem, c.aggregates.mean_l_rem);
                let s = c.aggregates.v_tam_scaled.unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
            }
            prop_assert_eq!(seen.len(), p.len());
            prop_assert_eq!(categorize(&p, &v, &BandsConfig::default()).unwrap(), cats);
        }

        #[test]
        fn score_linear_in_weights(rows in arb_portfolio(), a in prop::array::uniform4(0.0f64..1.0), b in prop::array::uniform4(0.0f64..1.0), t in 0.0f64..1.0) {
            let specs: Vec<(&str, &str, f64, f64, f64)> =
                rows.iter().map(|(a, b, c, d, e)| (a.as_str(), b.as_str(), *c, *d, *e)).collect();
            let (p, v) = portfolio(&specs);
            let cats = categorize(&p, &v, &BandsConfig::default()).unwrap();
            let mut pa = WeightingProfile::neutral();
            pa.category_weights = a;
            let mut pb = pa.clone();
            pb.category_weights = b;
            let mut pm = pa.clone();
            for i in 0..4 {
                pm.category_weights[i] = t * a[i] + (1.0 - t) * b[i];
            }
            for c in &cats {
                let mixed = category_score(c, &pm).unwrap();
                let lin = t * category_score(c, &pa).unwrap() + (1.0 - t) * category_score(c, &pb).unwrap();
                prop_assert!((mixed - lin).abs() <= 1e-9 * (1.0 + lin.abs()));
            }
        }
    }
}
