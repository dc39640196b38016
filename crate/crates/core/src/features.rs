//! Deterministic financial ratios computed from a coded applicant record.
//!
//! The coded dataset stores several magnitudes as buckets (savings, employment
//! duration, checking balance). [`BucketTable`] maps each bucket to a
//! representative value; every number used downstream carries the attribute
//! and bucket it came from. Anything that cannot be derived is reported as
//! [`Quantity::Unavailable`] with the missing input named, never defaulted.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{ApplicantRecord, AttributeSchema};

const BUNDLED_BUCKETS: &str = include_str!("../data/bucket_table.toml");
const NO_BUCKET: &str = "no monetary bucket";

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("cannot read bucket table {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("invalid bucket table: {0}")]
    Parse(String),
}

/// A numeric input with provenance, or the reason it is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Quantity {
    Available {
        value: f64,
        source: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bucket: Option<String>,
    },
    Unavailable {
        reason: String,
    },
}

impl Quantity {
    pub fn direct(value: f64, source: impl Into<String>) -> Self {
        Quantity::Available {
            value,
            source: source.into(),
            bucket: None,
        }
    }

    pub fn unavailable(reason: impl Into<String>) -> Self {
        Quantity::Unavailable { reason: reason.into() }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Quantity::Available { value, .. } => Some(*value),
            Quantity::Unavailable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BucketValue {
    Midpoint(f64),
    Marker(Unavailable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unavailable {
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketGroup {
    pub attribute: String,
    pub codes: BTreeMap<String, BucketValue>,
}

impl BucketGroup {
    fn resolve(&self, record: &ApplicantRecord) -> Quantity {
        let Some(code) = record.code(&self.attribute) else {
            return Quantity::unavailable(format!("attribute {} missing", self.attribute));
        };
        match self.codes.get(code) {
            Some(BucketValue::Midpoint(value)) => Quantity::Available {
                value: *value,
                source: self.attribute.clone(),
                bucket: Some(code.to_string()),
            },
            Some(BucketValue::Marker(_)) => Quantity::unavailable(NO_BUCKET),
            None => Quantity::unavailable(format!("code {code} not in bucket table")),
        }
    }
}

/// Which schema attribute feeds each numeric input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericLayout {
    pub duration_months: String,
    pub credit_amount: String,
    pub installment_rate_pct: String,
    pub age_years: String,
    pub existing_credits_count: String,
    pub dependents_count: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketTable {
    pub checking: BucketGroup,
    pub savings: BucketGroup,
    pub employment: BucketGroup,
    pub property: BucketGroup,
    pub numeric: NumericLayout,
}

impl Default for BucketTable {
    fn default() -> Self {
        Self::from_toml(BUNDLED_BUCKETS).expect("bundled bucket table is valid")
    }
}

impl BucketTable {
    pub fn from_toml(text: &str) -> Result<Self, FeatureError> {
        let table: BucketTable = toml::from_str(text).map_err(|e| FeatureError::Parse(e.to_string()))?;
        for group in [&table.checking, &table.savings, &table.employment, &table.property] {
            for (code, value) in &group.codes {
                if let BucketValue::Midpoint(v) = value {
                    if !(v.is_finite() && *v >= 0.0) {
                        return Err(FeatureError::Parse(format!(
                            "bucket {code} must be finite and non-negative, got {v}"
                        )));
                    }
                }
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Codes the table covers that the schema does not know.
    pub fn unknown_codes(&self, schema: &AttributeSchema) -> Vec<String> {
        let mut unknown = Vec::new();
        for group in [&self.checking, &self.savings, &self.employment, &self.property] {
            match schema.get(&group.attribute) {
                Some(attr) => unknown.extend(
                    group
                        .codes
                        .keys()
                        .filter(|c| attr.describe(c).is_none())
                        .map(|c| format!("{}:{c}", group.attribute)),
                ),
                None => unknown.push(group.attribute.clone()),
            }
        }
        unknown
    }
}

/// Hook for supplying a disposable-income figure the dataset does not record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum IncomeEstimator {
    /// Monthly installment (amount / duration) divided by the installment share of income.
    InstallmentShare,
    Fixed {
        value: f64,
    },
}

impl IncomeEstimator {
    fn estimate(&self, n: &NumericizedAttributes) -> Quantity {
        match self {
            IncomeEstimator::Fixed { value } if value.is_finite() && *value >= 0.0 => {
                Quantity::direct(*value, "estimator:fixed")
            }
            IncomeEstimator::Fixed { value } => {
                Quantity::unavailable(format!("fixed income estimate {value} is invalid"))
            }
            IncomeEstimator::InstallmentShare => {
                match (
                    n.credit_amount.value(),
                    n.duration_months.value(),
                    n.installment_rate_pct.value(),
                ) {
                    (Some(amount), Some(months), Some(rate)) if months > 0.0 && rate > 0.0 => {
                        Quantity::direct(amount / months * 100.0 / rate, "estimator:installment_share")
                    }
                    _ => Quantity::unavailable("installment share inputs"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericizedAttributes {
    pub disposable_income_proxy: Quantity,
    pub installment_rate_pct: Quantity,
    pub credit_amount: Quantity,
    pub duration_months: Quantity,
    pub savings_value: Quantity,
    pub employment_years: Quantity,
    pub age_years: Quantity,
    pub dependents_count: Quantity,
    pub existing_credits_count: Quantity,
    pub checking_value: Quantity,
    pub total_assets: Quantity,
    pub credit_limit: Quantity,
    pub income_stability_metric: Quantity,
    pub existing_credit_payments: Quantity,
}

impl NumericizedAttributes {
    /// Every input unavailable with the same reason.
    pub fn unavailable(reason: &str) -> Self {
        let q = || Quantity::unavailable(reason);
        Self {
            disposable_income_proxy: q(),
            installment_rate_pct: q(),
            credit_amount: q(),
            duration_months: q(),
            savings_value: q(),
            employment_years: q(),
            age_years: q(),
            dependents_count: q(),
            existing_credits_count: q(),
            checking_value: q(),
            total_assets: q(),
            credit_limit: q(),
            income_stability_metric: q(),
            existing_credit_payments: q(),
        }
    }

    pub fn entries(&self) -> [(&'static str, &Quantity); 14] {
        [
            ("disposable_income_proxy", &self.disposable_income_proxy),
            ("installment_rate_pct", &self.installment_rate_pct),
            ("credit_amount", &self.credit_amount),
            ("duration_months", &self.duration_months),
            ("savings_value", &self.savings_value),
            ("employment_years", &self.employment_years),
            ("age_years", &self.age_years),
            ("dependents_count", &self.dependents_count),
            ("existing_credits_count", &self.existing_credits_count),
            ("checking_value", &self.checking_value),
            ("total_assets", &self.total_assets),
            ("credit_limit", &self.credit_limit),
            ("income_stability_metric", &self.income_stability_metric),
            ("existing_credit_payments", &self.existing_credit_payments),
        ]
    }
}

pub fn numericize(
    record: &ApplicantRecord,
    table: &BucketTable,
    income: Option<&IncomeEstimator>,
) -> NumericizedAttributes {
    let number = |attribute: &str| match record.number(attribute) {
        Some(v) if v.is_finite() && v >= 0.0 => Quantity::direct(v, attribute),
        Some(v) => Quantity::unavailable(format!("attribute {attribute} has invalid value {v}")),
        None => Quantity::unavailable(format!("attribute {attribute} missing")),
    };
    let layout = &table.numeric;
    let savings_value = table.savings.resolve(record);
    let property_value = table.property.resolve(record);
    let total_assets = match (property_value.value(), savings_value.value()) {
        (Some(p), Some(s)) => Quantity::Available {
            value: p + s,
            source: format!("{}+{}", table.property.attribute, table.savings.attribute),
            bucket: None,
        },
        _ => Quantity::unavailable("assets"),
    };
    let mut n = NumericizedAttributes {
        disposable_income_proxy: Quantity::unavailable("disposable income not recorded"),
        installment_rate_pct: number(&layout.installment_rate_pct),
        credit_amount: number(&layout.credit_amount),
        duration_months: number(&layout.duration_months),
        savings_value,
        employment_years: table.employment.resolve(record),
        age_years: number(&layout.age_years),
        dependents_count: number(&layout.dependents_count),
        existing_credits_count: number(&layout.existing_credits_count),
        checking_value: table.checking.resolve(record),
        total_assets,
        credit_limit: Quantity::unavailable("credit limit not recorded"),
        income_stability_metric: Quantity::unavailable("income stability metric has no formula"),
        existing_credit_payments: Quantity::unavailable("existing credit payments not recorded"),
    };
    if let Some(estimator) = income {
        n.disposable_income_proxy = estimator.estimate(&n);
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Ratio {
    Value { value: f64 },
    Unavailable { reason: String },
}

impl Ratio {
    pub fn value(&self) -> Option<f64> {
        match self {
            Ratio::Value { value } => Some(*value),
            Ratio::Unavailable { .. } => None,
        }
    }

    fn unavailable(reason: impl Into<String>) -> Self {
        Ratio::Unavailable { reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinancialRatios {
    pub dti_pct: Ratio,
    pub dar: Ratio,
    pub dscr: Ratio,
    pub credit_utilization_pct: Ratio,
    pub savings_to_income_pct: Ratio,
    pub employment_stability_index: Ratio,
    pub dependents_burden_ratio: Ratio,
}

impl FinancialRatios {
    pub fn entries(&self) -> [(&'static str, &Ratio); 7] {
        [
            ("dti_pct", &self.dti_pct),
            ("dar", &self.dar),
            ("dscr", &self.dscr),
            ("credit_utilization_pct", &self.credit_utilization_pct),
            ("savings_to_income_pct", &self.savings_to_income_pct),
            ("employment_stability_index", &self.employment_stability_index),
            ("dependents_burden_ratio", &self.dependents_burden_ratio),
        ]
    }
}

/// `numerator / denominator × scale`, or the names of whichever inputs are missing.
fn quotient(numerator: (&Quantity, &str), denominator: (&Quantity, &str), scale: f64) -> Ratio {
    let missing: Vec<&str> = [numerator, denominator]
        .iter()
        .filter(|(q, _)| q.value().is_none())
        .map(|(_, name)| *name)
        .collect();
    if !missing.is_empty() {
        return Ratio::unavailable(missing.join(", "));
    }
    let (num, den) = (numerator.0.value().unwrap(), denominator.0.value().unwrap());
    if den == 0.0 {
        return Ratio::unavailable(format!("{} is zero", denominator.1));
    }
    let value = num / den * scale;
    if value.is_finite() {
        Ratio::Value { value }
    } else {
        Ratio::unavailable("result not finite")
    }
}

pub fn compute_ratios(n: &NumericizedAttributes) -> FinancialRatios {
    // The installment-rate attribute already expresses debt payments as a share
    // of disposable income, so it is the DTI percentage itself.
    let dti_pct = match n.installment_rate_pct.value() {
        Some(rate) if rate.is_finite() => Ratio::Value { value: rate },
        _ => Ratio::unavailable("installment rate"),
    };
    let debt_service = match (n.installment_rate_pct.value(), n.existing_credit_payments.value()) {
        (Some(rate), Some(existing)) => Quantity::direct(rate + existing, "debt service"),
        (None, Some(_)) => Quantity::unavailable("installment rate"),
        (Some(_), None) => Quantity::unavailable("existing credit payments"),
        (None, None) => Quantity::unavailable("installment rate, existing credit payments"),
    };
    let dscr = match &debt_service {
        Quantity::Unavailable { reason } if n.income_stability_metric.value().is_some() => {
            Ratio::unavailable(reason.clone())
        }
        Quantity::Unavailable { reason } => Ratio::unavailable(format!("income stability metric, {reason}")),
        Quantity::Available { .. } => quotient(
            (&n.income_stability_metric, "income stability metric"),
            (&debt_service, "debt service"),
            1.0,
        ),
    };
    FinancialRatios {
        dti_pct,
        dar: quotient((&n.credit_amount, "credit amount"), (&n.total_assets, "assets"), 1.0),
        dscr,
        credit_utilization_pct: quotient(
            (&n.credit_amount, "credit amount"),
            (&n.credit_limit, "credit limit"),
            100.0,
        ),
        savings_to_income_pct: quotient(
            (&n.savings_value, "savings"),
            (&n.disposable_income_proxy, "disposable income"),
            100.0,
        ),
        employment_stability_index: quotient((&n.employment_years, "employment duration"), (&n.age_years, "age"), 1.0),
        dependents_burden_ratio: quotient(
            (&n.dependents_count, "dependents"),
            (&n.income_stability_metric, "income stability metric"),
            1.0,
        ),
    }
}

const REPORT_LABELS: [(&str, &str); 7] = [
    ("Debt-to-Income Ratio", " %"),
    ("Debt-to-Asset Ratio", ""),
    ("Debt Service Coverage Ratio", ""),
    ("Credit Utilization Ratio", " %"),
    ("Savings-to-Income Ratio", " %"),
    ("Employment Stability Index", ""),
    ("Dependents Burden Ratio", ""),
];

/// One line per ratio in a fixed order, four decimals.
pub fn ratios_report(r: &FinancialRatios) -> String {
    let mut out = String::new();
    for ((label, unit), (_, ratio)) in REPORT_LABELS.iter().zip(r.entries()) {
        match ratio {
            Ratio::Value { value } => writeln!(out, "{label}: {value:.4}{unit}"),
            Ratio::Unavailable { reason } => writeln!(out, "{label}: not computable: {reason}"),
        }
        .expect("writing to a String");
    }
    out
}

/// Lists the numeric inputs with their source attribute and bucket.
pub fn inputs_report(n: &NumericizedAttributes) -> String {
    let mut out = String::new();
    for (name, q) in n.entries() {
        match q {
            Quantity::Available {
                value,
                source,
                bucket: Some(bucket),
            } => writeln!(out, "{name}: {value} (from {source}, bucket {bucket} midpoint)"),
            Quantity::Available { value, source, .. } => {
                writeln!(out, "{name}: {value} (from {source})")
            }
            Quantity::Unavailable { reason } => writeln!(out, "{name}: unavailable ({reason})"),
        }
        .expect("writing to a String");
    }
    out
}
