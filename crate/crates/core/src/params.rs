//! The 32 valuation parameters and the 33-slot feature vector.
//!
//! Formula kernels are generic over [`Scalar`]; configuration weights are
//! stored as `f64` and converted at the call site.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{self, ClaimKind};
use crate::corpus::{ClaimText, Jurisdiction, JurisdictionStatus, LitigationEvent, LitigationOutcome, PatentRecord};
use crate::Scalar;

pub const DAYS_PER_YEAR: f64 = 365.25;
pub const DAYS_PER_MONTH: f64 = DAYS_PER_YEAR / 12.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("patent expired {0:.4} years before the evaluation date")]
    ExpiredAtEvaluation(f64),
    #[error("missing expiry date")]
    MissingExpiryDate,
    #[error("missing grant date")]
    MissingGrantDate,
    #[error("no independent claims")]
    NoClaims,
    #[error("negative case value {0}")]
    NegativeCaseValue(f64),
    #[error("CAGR start value must be positive, got {0}")]
    NonPositiveStart(f64),
    #[error("CAGR end value must be nonnegative, got {0}")]
    NegativeEnd(f64),
    #[error("CAGR horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("collaboration count {0} below 1")]
    CollabBelowOne(f64),
    #[error("country {0} not in GNI table")]
    UnknownCountry(String),
    #[error("weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("noise power must be positive")]
    ZeroNoiseFloor,
    #[error("unknown partnership type {0}")]
    UnknownPartnershipType(String),
    #[error("{param} = {value} outside [{min}, {max}]")]
    RangeViolation { param: String, value: f64, min: f64, max: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{param} for {patent_id}: {source}")]
    Component { param: &'static str, patent_id: String, source: Box<ParamError> },
}

pub type Result<T, E = ParamError> = std::result::Result<T, E>;

fn check_range(param: &str, value: f64, min: f64, max: f64) -> Result<()> {
    if value.is_finite() && value >= min && value <= max {
        Ok(())
    } else {
        Err(ParamError::RangeViolation { param: param.to_string(), value, min, max })
    }
}

macro_rules! params {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Feature-vector slots in ranking-model order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Param { $($variant),* }

        impl Param {
            pub const ALL: [Param; N_PARAMS] = [$(Param::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(Param::$variant => $name),* }
            }
        }
    };
}

pub const N_PARAMS: usize = 33;

params! {
    LRem => "L_rem",
    SClaim => "S_claim",
    NFam => "N_fam",
    VCite => "V_cite",
    NReassign => "N_reassign",
    SLitigation => "S_litigation",
    STrend => "S_trend",
    TPend => "T_pend",
    NBcite => "N_bcite",
    NEcite => "N_ecite",
    SInv => "S_inv",
    SRej => "S_rej",
    SCip => "S_CIP",
    Trl => "TRL",
    Mrl => "MRL",
    VTam => "V_TAM",
    VRev => "V_rev",
    CagrTech => "CAGR_tech",
    SJuris => "S_juris",
    SSc => "S_sc",
    PCost => "P_cost",
    TMarket => "T_market",
    NApp => "N_app",
    NComp => "N_comp",
    SMfg => "S_mfg",
    SDemand => "S_demand",
    SPartner => "S_partner",
    SInvest => "S_invest",
    NLaunch => "N_launch",
    SMa => "S_MA",
    SOwner => "S_owner",
    SForecast => "S_forecast",
    SNeedSeed => "S_NeedSeed",
}

impl Param {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.iter().copied().find(|p| p.name() == name)
    }
}

pub fn param_names() -> Vec<String> {
    Param::ALL.iter().map(|p| p.name().to_string()).collect()
}

/// Names of the ranking-model inputs: the 33 values followed by one
/// missing-indicator per value.
pub fn model_feature_names() -> Vec<String> {
    Param::ALL
        .iter()
        .map(|p| p.name().to_string())
        .chain(Param::ALL.iter().map(|p| format!("missing:{}", p.name())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub missing_mask: Vec<bool>,
}

impl<T: Scalar> Default for FeatureVector<T> {
    fn default() -> Self {
        FeatureVector { values: vec![T::zero(); N_PARAMS], missing_mask: vec![false; N_PARAMS] }
    }
}

impl<T: Scalar> FeatureVector<T> {
    pub fn get(&self, p: Param) -> T {
        self.values[p.index()]
    }

    pub fn is_missing(&self, p: Param) -> bool {
        self.missing_mask[p.index()]
    }

    pub fn set(&mut self, p: Param, v: T) {
        self.values[p.index()] = v;
        self.missing_mask[p.index()] = false;
    }

    pub fn set_missing(&mut self, p: Param) {
        self.values[p.index()] = T::zero();
        self.missing_mask[p.index()] = true;
    }

    pub fn set_opt(&mut self, p: Param, v: Option<T>) {
        match v {
            Some(v) => self.set(p, v),
            None => self.set_missing(p),
        }
    }

    /// Model input row: values then 0/1 missing indicators.
    pub fn model_row(&self) -> Vec<T> {
        self.values
            .iter()
            .copied()
            .chain(self.missing_mask.iter().map(|&m| if m { T::one() } else { T::zero() }))
            .collect()
    }

    pub fn missing_names(&self) -> Vec<&'static str> {
        Param::ALL.iter().filter(|p| self.is_missing(**p)).map(|p| p.name()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RejectionWeights {
    pub w102: f64,
    pub w103: f64,
    pub w112: f64,
}

impl Default for RejectionWeights {
    fn default() -> Self {
        RejectionWeights { w102: 1.0, w103: 0.6, w112: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClaimTypeScores {
    pub product: f64,
    pub process: f64,
    pub composition: f64,
    pub unknown: f64,
}

impl Default for ClaimTypeScores {
    fn default() -> Self {
        ClaimTypeScores { product: 1.0, process: 0.7, composition: 0.5, unknown: 0.0 }
    }
}

impl ClaimTypeScores {
    pub fn score(&self, kind: ClaimKind) -> f64 {
        match kind {
            ClaimKind::Product => self.product,
            ClaimKind::Process => self.process,
            ClaimKind::Composition => self.composition,
            ClaimKind::Unknown => self.unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LitigationWeights {
    pub plaintiff_win: f64,
    pub settlement: f64,
    pub defendant_win: f64,
}

impl Default for LitigationWeights {
    fn default() -> Self {
        LitigationWeights { plaintiff_win: 1.0, settlement: 0.5, defendant_win: 0.0 }
    }
}

impl LitigationWeights {
    pub fn weight(&self, o: LitigationOutcome) -> f64 {
        match o {
            LitigationOutcome::PlaintiffWin => self.plaintiff_win,
            LitigationOutcome::Settlement => self.settlement,
            LitigationOutcome::DefendantWin => self.defendant_win,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InventorCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for InventorCoefficients {
    fn default() -> Self {
        InventorCoefficients { alpha: 0.5, beta: 0.3, gamma: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupplyChainWeights {
    pub materials: f64,
    pub manufacturing: f64,
    pub workforce: f64,
}

impl Default for SupplyChainWeights {
    fn default() -> Self {
        SupplyChainWeights { materials: 0.4, manufacturing: 0.4, workforce: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaCoefficients {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for MaCoefficients {
    fn default() -> Self {
        MaCoefficients { alpha: 1.0, beta: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatusFactors {
    pub granted: f64,
    pub pending: f64,
}

impl Default for StatusFactors {
    fn default() -> Self {
        StatusFactors { granted: 1.0, pending: 0.7 }
    }
}

impl StatusFactors {
    pub fn factor(&self, s: JurisdictionStatus) -> f64 {
        match s {
            JurisdictionStatus::Granted => self.granted,
            JurisdictionStatus::Pending => self.pending,
        }
    }
}

fn default_partnership_weights() -> BTreeMap<String, f64> {
    [("JointVenture", 1.0), ("Licensing", 0.7), ("MoU", 0.3)].into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// All weights and constants used by the parameter formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamConfig {
    pub rejection_weights: RejectionWeights,
    pub claim_type_scores: ClaimTypeScores,
    pub litigation_weights: LitigationWeights,
    pub inventor: InventorCoefficients,
    pub supply_chain: SupplyChainWeights,
    pub ma: MaCoefficients,
    pub partnership_weights: BTreeMap<String, f64>,
    pub jurisdiction_status: StatusFactors,
    /// Forward-citation window t_w, in years, ending at the evaluation date.
    pub citation_window_years: f64,
    /// Lower bound on years since publication for citation velocity.
    pub velocity_floor_years: f64,
    /// Demand SNR reported for zero signal, in dB.
    pub demand_floor_db: f64,
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig {
            rejection_weights: RejectionWeights::default(),
            claim_type_scores: ClaimTypeScores::default(),
            litigation_weights: LitigationWeights::default(),
            inventor: InventorCoefficients::default(),
            supply_chain: SupplyChainWeights::default(),
            ma: MaCoefficients::default(),
            partnership_weights: default_partnership_weights(),
            jurisdiction_status: StatusFactors::default(),
            citation_window_years: 3.0,
            velocity_floor_years: 0.25,
            demand_floor_db: -60.0,
        }
    }
}

impl ParamConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ParamConfig = toml::from_str(s).map_err(|e| ParamError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| ParamError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    /// The S_inv and S_MA coefficients, keyed `<param>.<name>`.
    pub fn unhoused_coefficients(&self) -> BTreeMap<String, f64> {
        let i = &self.inventor;
        [
            ("S_inv.alpha", i.alpha),
            ("S_inv.beta", i.beta),
            ("S_inv.gamma", i.gamma),
            ("S_MA.alpha", self.ma.alpha),
            ("S_MA.beta", self.ma.beta),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rejection_weights;
        let c = &self.claim_type_scores;
        let l = &self.litigation_weights;
        let i = &self.inventor;
        let s = &self.supply_chain;
        let all = [
            r.w102,
            r.w103,
            r.w112,
            c.product,
            c.process,
            c.composition,
            c.unknown,
            l.plaintiff_win,
            l.settlement,
            l.defendant_win,
            i.alpha,
            i.beta,
            i.gamma,
            s.materials,
            s.manufacturing,
            s.workforce,
            self.ma.alpha,
            self.ma.beta,
            self.citation_window_years,
            self.velocity_floor_years,
            self.demand_floor_db,
        ];
        if let Some(bad) = all.iter().chain(self.partnership_weights.values()).find(|v| !v.is_finite()) {
            return Err(ParamError::Config(format!("non-finite weight {bad}")));
        }
        let sum = s.materials + s.manufacturing + s.workforce;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ParamError::WeightsNotNormalized(sum));
        }
        for f in [self.jurisdiction_status.granted, self.jurisdiction_status.pending] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(ParamError::Config(format!("status factor {f} outside (0,1]")));
            }
        }
        if self.citation_window_years <= 0.0 || self.velocity_floor_years <= 0.0 {
            return Err(ParamError::Config("citation window and velocity floor must be positive".into()));
        }
        Ok(())
    }
}

fn days_between(from: NaiveDate, to: NaiveDate) -> i64 {
    (to - from).num_days()
}

/// Years of protection left at `eval_date`.
pub fn remaining_life<T: Scalar>(p: &PatentRecord, eval_date: NaiveDate) -> Result<T> {
    let expiry = p.expiry_date.ok_or(ParamError::MissingExpiryDate)?;
    let years = T::of(days_between(eval_date, expiry) as f64) / T::of(DAYS_PER_YEAR);
    if years < T::zero() {
        return Err(ParamError::ExpiredAtEvaluation(years.to_f64_lossy()));
    }
    Ok(years)
}

/// Best claim-type score over independent claims.
pub fn claim_type_score<T: Scalar>(claims: &[ClaimText], cfg: &ParamConfig) -> Result<T> {
    claims::parse_claims(claims)
        .iter()
        .filter(|c| c.is_independent)
        .map(|c| cfg.claim_type_scores.score(c.claim_kind))
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
        .map(T::of)
        .ok_or(ParamError::NoClaims)
}

/// Forward citations inside the trailing window, per year since publication.
pub fn citation_velocity<T: Scalar>(p: &PatentRecord, eval_date: NaiveDate, cfg: &ParamConfig) -> T {
    let window_days = cfg.citation_window_years * DAYS_PER_YEAR;
    let in_window = p
        .forward_citations
        .iter()
        .filter(|c| {
            let age = days_between(c.date, eval_date) as f64;
            age >= 0.0 && age < window_days
        })
        .count();
    if in_window == 0 {
        return T::zero();
    }
    let published = p.grant_date.unwrap_or(p.filing_date);
    let years = T::of(days_between(published, eval_date) as f64) / T::of(DAYS_PER_YEAR);
    velocity(in_window, years, T::of(cfg.velocity_floor_years))
}

/// `count / max(years, floor)`.
pub fn velocity<T: Scalar>(count: usize, years_since_pub: T, floor: T) -> T {
    T::of_usize(count) / years_since_pub.max(floor)
}

pub fn litigation_score<T: Scalar>(events: &[LitigationEvent], cfg: &ParamConfig) -> Result<T> {
    events.iter().try_fold(T::zero(), |acc, e| {
        if !(e.case_value >= 0.0) {
            return Err(ParamError::NegativeCaseValue(e.case_value));
        }
        Ok(acc + T::of(cfg.litigation_weights.weight(e.outcome)) * T::of(e.case_value))
    })
}

/// Compound annual growth rate `(end/start)^(1/years) - 1`.
pub fn cagr<T: Scalar>(start: T, end: T, n_years: T) -> Result<T> {
    if !(start > T::zero()) {
        return Err(ParamError::NonPositiveStart(start.to_f64_lossy()));
    }
    if !(end >= T::zero()) {
        return Err(ParamError::NegativeEnd(end.to_f64_lossy()));
    }
    if !(n_years > T::zero()) {
        return Err(ParamError::NonPositiveHorizon(n_years.to_f64_lossy()));
    }
    Ok((end / start).powf(T::one() / n_years) - T::one())
}

pub fn pendency_months<T: Scalar>(p: &PatentRecord) -> Result<T> {
    let grant = p.grant_date.ok_or(ParamError::MissingGrantDate)?;
    Ok(T::of(days_between(p.filing_date, grant) as f64) / T::of(DAYS_PER_MONTH))
}

/// `alpha * h + beta * ln(collab) + gamma * lit_success`.
pub fn inventor_score<T: Scalar>(h_index: T, collab: T, lit_success: T, cfg: &ParamConfig) -> Result<T> {
    if !(collab >= T::one()) {
        return Err(ParamError::CollabBelowOne(collab.to_f64_lossy()));
    }
    check_range("lit_success", lit_success.to_f64_lossy(), 0.0, 1.0)?;
    let c = &cfg.inventor;
    Ok(T::of(c.alpha) * h_index + T::of(c.beta) * collab.ln() + T::of(c.gamma) * lit_success)
}

pub fn rejection_score<T: Scalar>(n102: u32, n103: u32, n112: u32, cfg: &ParamConfig) -> T {
    let w = &cfg.rejection_weights;
    T::of(w.w102) * T::of(n102 as f64) + T::of(w.w103) * T::of(n103 as f64) + T::of(w.w112) * T::of(n112 as f64)
}

/// Gross national income per country, in USD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GniTable {
    gni: BTreeMap<String, f64>,
}

impl GniTable {
    pub fn new(gni: BTreeMap<String, f64>) -> Result<Self> {
        match gni.get("USA") {
            Some(v) if *v > 0.0 => {}
            _ => return Err(ParamError::Config("GNI table must contain USA with a positive value".into())),
        }
        if let Some((k, v)) = gni.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(ParamError::Config(format!("GNI for {k} invalid: {v}")));
        }
        Ok(GniTable { gni })
    }

    /// Reads `iso3,gni_usd` rows (header required).
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| ParamError::Config(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "iso3" || &headers[1] != "gni_usd" {
            return Err(ParamError::Config("gni header must be `iso3,gni_usd`".into()));
        }
        let mut gni = BTreeMap::new();
        for row in rdr.records() {
            let row = row.map_err(|e| ParamError::Config(e.to_string()))?;
            let v: f64 =
                row[1].trim().parse().map_err(|_| ParamError::Config(format!("bad GNI value `{}`", &row[1])))?;
            gni.insert(row[0].trim().to_uppercase(), v);
        }
        Self::new(gni)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| ParamError::Config(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(f)
    }

    pub fn ratio_to_usa(&self, iso3: &str) -> Option<f64> {
        let usa = self.gni["USA"];
        self.gni.get(iso3).map(|v| v / usa)
    }
}

/// Sum over jurisdictions of GNI ratio to the USA times the status factor.
pub fn jurisdiction_score<T: Scalar>(jurisdictions: &[Jurisdiction], gni: &GniTable, cfg: &ParamConfig) -> Result<T> {
    jurisdictions.iter().try_fold(T::zero(), |acc, j| {
        let ratio = gni.ratio_to_usa(&j.country).ok_or_else(|| ParamError::UnknownCountry(j.country.clone()))?;
        Ok(acc + T::of(ratio) * T::of(cfg.jurisdiction_status.factor(j.status)))
    })
}

pub fn supply_chain_score<T: Scalar>(r_mat: T, r_mfg: T, r_work: T, cfg: &ParamConfig) -> Result<T> {
    let w = &cfg.supply_chain;
    let sum = w.materials + w.manufacturing + w.workforce;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ParamError::WeightsNotNormalized(sum));
    }
    for (name, r) in [("R_mat", r_mat), ("R_mfg", r_mfg), ("R_work", r_work)] {
        check_range(name, r.to_f64_lossy(), 0.0, 1.0)?;
    }
    Ok(T::of(w.materials) * r_mat + T::of(w.manufacturing) * r_mfg + T::of(w.workforce) * r_work)
}

/// Demand signal-to-noise ratio in dB, floored at `floor_db`.
pub fn demand_snr<T: Scalar>(p_signal: T, p_noise: T, floor_db: T) -> Result<T> {
    if !(p_noise > T::zero()) {
        return Err(ParamError::ZeroNoiseFloor);
    }
    if !(p_signal >= T::zero()) {
        return Err(ParamError::RangeViolation {
            param: "P_signal".into(),
            value: p_signal.to_f64_lossy(),
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if p_signal == T::zero() {
        return Ok(floor_db);
    }
    Ok((T::of(10.0) * (p_signal / p_noise).log10()).max(floor_db))
}

pub fn partnership_score<T: Scalar>(counts: &BTreeMap<String, u32>, cfg: &ParamConfig) -> Result<T> {
    counts.iter().try_fold(T::zero(), |acc, (kind, n)| {
        let w = cfg.partnership_weights.get(kind).ok_or_else(|| ParamError::UnknownPartnershipType(kind.clone()))?;
        Ok(acc + T::of(*w) * T::of(*n as f64))
    })
}

/// `alpha * ln(1 + V) + beta * N`; `ln(1 + V)` keeps quiet sectors finite.
pub fn ma_score<T: Scalar>(total_value: T, n_deals: u32, cfg: &ParamConfig) -> Result<T> {
    if !(total_value >= T::zero()) {
        return Err(ParamError::RangeViolation {
            param: "V_MA".into(),
            value: total_value.to_f64_lossy(),
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    Ok(T::of(cfg.ma.alpha) * total_value.ln_1p() + T::of(cfg.ma.beta) * T::of(n_deals as f64))
}

/// Market context for one CPC prefix (`market.json` entry).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarketEntry {
    pub tam_usd: Option<f64>,
    pub revenue_usd: Option<f64>,
    pub market_start: Option<f64>,
    pub market_end: Option<f64>,
    pub horizon_years: Option<f64>,
    pub filings_start: Option<f64>,
    pub filings_end: Option<f64>,
    pub signal_power: Option<f64>,
    pub noise_power: Option<f64>,
    pub deals_value_usd: Option<f64>,
    pub deals_count: Option<u32>,
    #[serde(default)]
    pub partnership_counts: BTreeMap<String, u32>,
}

/// `market.json`: map from CPC prefix to market context.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarketData {
    pub entries: BTreeMap<String, MarketEntry>,
}

impl MarketData {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| ParamError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&s).map_err(|e| ParamError::Config(format!("market.json: {e}")))
    }

    /// Entry with the longest key that prefixes `cpc`.
    pub fn lookup(&self, cpc: &str) -> Option<(&str, &MarketEntry)> {
        let code: String = cpc.chars().filter(|c| !c.is_whitespace()).collect();
        self.entries
            .iter()
            .filter(|(k, _)| code.starts_with(k.as_str()))
            .max_by_key(|(k, _)| k.len())
            .map(|(k, v)| (k.as_str(), v))
    }
}

/// Inputs shared by every record in a run.
#[derive(Debug, Clone)]
pub struct ParamContext<'a> {
    pub cfg: &'a ParamConfig,
    pub market: &'a MarketData,
    pub gni: &'a GniTable,
    pub eval_date: NaiveDate,
}

fn metric(p: &PatentRecord, name: &str) -> Option<f64> {
    p.direct_metrics.get(name).copied()
}

fn absent(p: &PatentRecord, field: &str) -> bool {
    p.missing_data.iter().any(|f| f == field)
}

const DIRECT_METRICS: &[(Param, &str, f64, f64)] = &[
    (Param::Trl, "TRL", 1.0, 9.0),
    (Param::Mrl, "MRL", 1.0, 10.0),
    (Param::PCost, "P_cost", f64::NEG_INFINITY, f64::INFINITY),
    (Param::TMarket, "T_market", 0.0, f64::INFINITY),
    (Param::NApp, "N_app", 0.0, f64::INFINITY),
    (Param::NComp, "N_comp", 0.0, f64::INFINITY),
    (Param::SMfg, "S_mfg", f64::NEG_INFINITY, f64::INFINITY),
    (Param::SInvest, "S_invest", f64::NEG_INFINITY, f64::INFINITY),
    (Param::NLaunch, "N_launch", 0.0, f64::INFINITY),
    (Param::SOwner, "S_owner", f64::NEG_INFINITY, f64::INFINITY),
    (Param::SForecast, "S_forecast", f64::NEG_INFINITY, f64::INFINITY),
    (Param::VTam, "V_TAM", 0.0, f64::INFINITY),
    (Param::VRev, "V_rev", 0.0, f64::INFINITY),
];

/// Counts and analyst-supplied readings copied straight into their slots.
/// Absent values are imputed 0 with the mask bit set.
pub fn extract_direct_parameters<T: Scalar>(p: &PatentRecord) -> Result<FeatureVector<T>> {
    let mut v = FeatureVector::<T>::default();
    let counts: [(Param, usize, &str); 4] = [
        (Param::NFam, p.family_members.len(), "family_members"),
        (Param::NReassign, p.reassignments.len(), "reassignments"),
        (Param::NBcite, p.backward_citations.len(), "backward_citations"),
        (Param::NEcite, p.examiner_citations.len(), "examiner_citations"),
    ];
    for (param, n, field) in counts {
        if absent(p, field) {
            v.set_missing(param);
        } else {
            v.set(param, T::of_usize(n));
        }
    }
    v.set(Param::SCip, if p.cip_flag { T::one() } else { T::zero() });
    for &(param, name, min, max) in DIRECT_METRICS {
        match metric(p, name) {
            Some(x) => {
                check_range(name, x, min, max)?;
                v.set(param, T::of(x));
            }
            None => v.set_missing(param),
        }
    }
    Ok(v)
}

fn component<T>(param: Param, patent_id: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| ParamError::Component { param: param.name(), patent_id: patent_id.to_string(), source: Box::new(e) })
}

/// Full feature vector for one filtered, normalized record. The
/// `S_NeedSeed` slot is left at 0 and masked until matching fills it.
pub fn build_feature_vector<T: Scalar>(p: &PatentRecord, ctx: &ParamContext<'_>) -> Result<FeatureVector<T>> {
    let id = p.patent_id.as_str();
    let cfg = ctx.cfg;
    let mut v: FeatureVector<T> = extract_direct_parameters(p).map_err(|e| match e {
        ParamError::RangeViolation { ref param, .. } => ParamError::Component {
            param: Param::from_name(param).map(Param::name).unwrap_or("direct_metrics"),
            patent_id: id.to_string(),
            source: Box::new(e.clone()),
        },
        other => other,
    })?;
    let market = ctx.market.lookup(p.primary_cpc()).map(|(_, m)| m);

    match p.expiry_date {
        Some(_) => v.set(Param::LRem, component(Param::LRem, id, remaining_life(p, ctx.eval_date))?),
        None => v.set_missing(Param::LRem),
    }
    v.set(Param::SClaim, component(Param::SClaim, id, claim_type_score(&p.claims, cfg))?);

    if absent(p, "forward_citations") {
        v.set_missing(Param::VCite);
    } else {
        v.set(Param::VCite, citation_velocity(p, ctx.eval_date, cfg));
    }
    if absent(p, "litigation_events") {
        v.set_missing(Param::SLitigation);
    } else {
        v.set(Param::SLitigation, component(Param::SLitigation, id, litigation_score(&p.litigation_events, cfg))?);
    }

    let trend = market.and_then(|m| Some((m.filings_start?, m.filings_end?, m.horizon_years?)));
    match trend {
        Some((s, e, n)) => v.set(Param::STrend, component(Param::STrend, id, cagr(T::of(s), T::of(e), T::of(n)))?),
        None => v.set_missing(Param::STrend),
    }

    match p.grant_date {
        Some(_) => v.set(Param::TPend, component(Param::TPend, id, pendency_months(p))?),
        None => v.set_missing(Param::TPend),
    }

    if p.inventors.is_empty() {
        v.set_missing(Param::SInv);
    } else {
        let mut total = T::zero();
        for inv in &p.inventors {
            total = total
                + component(
                    Param::SInv,
                    id,
                    inventor_score(T::of(inv.h_index), T::of(inv.collaborations), T::of(inv.litigation_success), cfg),
                )?;
        }
        v.set(Param::SInv, total / T::of_usize(p.inventors.len()));
    }

    if absent(p, "rejection_events") {
        v.set_missing(Param::SRej);
    } else {
        let r = p.rejection_events;
        v.set(Param::SRej, rejection_score(r.n102, r.n103, r.n112, cfg));
    }

    if v.is_missing(Param::VTam) {
        v.set_opt(Param::VTam, market.and_then(|m| m.tam_usd).map(T::of));
    }
    if v.is_missing(Param::VRev) {
        v.set_opt(Param::VRev, market.and_then(|m| m.revenue_usd).map(T::of));
    }

    let own_cagr = Some((metric(p, "market_start"), metric(p, "market_end"), metric(p, "market_years")))
        .and_then(|(a, b, c)| Some((a?, b?, c?)));
    let market_cagr = market.and_then(|m| Some((m.market_start?, m.market_end?, m.horizon_years?)));
    match own_cagr.or(market_cagr) {
        Some((s, e, n)) => v.set(Param::CagrTech, component(Param::CagrTech, id, cagr(T::of(s), T::of(e), T::of(n)))?),
        None => v.set_missing(Param::CagrTech),
    }

    if absent(p, "jurisdictions") {
        v.set_missing(Param::SJuris);
    } else {
        v.set(Param::SJuris, component(Param::SJuris, id, jurisdiction_score(&p.jurisdictions, ctx.gni, cfg))?);
    }

    match (metric(p, "R_mat"), metric(p, "R_mfg"), metric(p, "R_work")) {
        (Some(a), Some(b), Some(c)) => {
            v.set(Param::SSc, component(Param::SSc, id, supply_chain_score(T::of(a), T::of(b), T::of(c), cfg))?)
        }
        _ => v.set_missing(Param::SSc),
    }

    match market.and_then(|m| Some((m.signal_power?, m.noise_power?))) {
        Some((s, n)) => v.set(
            Param::SDemand,
            component(Param::SDemand, id, demand_snr(T::of(s), T::of(n), T::of(cfg.demand_floor_db)))?,
        ),
        None => v.set_missing(Param::SDemand),
    }

    match market {
        Some(m) => {
            v.set(Param::SPartner, component(Param::SPartner, id, partnership_score(&m.partnership_counts, cfg))?)
        }
        None => v.set_missing(Param::SPartner),
    }

    match market.and_then(|m| Some((m.deals_value_usd?, m.deals_count?))) {
        Some((val, n)) => v.set(Param::SMa, component(Param::SMa, id, ma_score(T::of(val), n, cfg))?),
        None => v.set_missing(Param::SMa),
    }

    v.set_missing(Param::SNeedSeed);
    Ok(v)
}
