//! Questionnaire definition loaded from JSON.

use std::collections::BTreeSet;
use std::path::Path;

use cvm_core::data::{BidDesign, ZeroReason};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurveyError};

/// Definition shipped with the crate.
pub const BUNDLED_DEFINITION: &str = include_str!("../definitions/ufp_survey.json");

/// Columns owned by the respondent CSV layout; item ids may not reuse them.
const RESERVED_COLUMNS: [&str; 6] = ["id", "arm", "lower_bid", "upper_bid", "outcome", "zero_reason"];

pub const LIKERT_LABELS: [&str; 5] = ["Very unlikely", "Unlikely", "Average", "Likely", "Very likely"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntroBlock {
    pub id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonOption {
    pub code: ZeroReason,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryOption {
    pub label: String,
    pub code: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItemKind {
    /// Five-point agreement scale coded 1–5.
    Likert,
    Categorical {
        options: Vec<CategoryOption>,
    },
    Numeric {
        min: f64,
        max: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateItem {
    pub id: String,
    pub prompt: String,
    #[serde(flatten)]
    pub kind: ItemKind,
}

impl CovariateItem {
    /// Checks a submitted value against the item and returns its coded form.
    pub fn accept(&self, value: f64) -> Result<f64> {
        let ok = value.is_finite()
            && match &self.kind {
                ItemKind::Likert => value.fract() == 0.0 && (1.0..=5.0).contains(&value),
                ItemKind::Categorical { options } => options.iter().any(|o| o.code == value),
                ItemKind::Numeric { min, max } => (*min..=*max).contains(&value),
            };
        if ok {
            Ok(value)
        } else {
            Err(SurveyError::Validation(format!(
                "{value} is not a valid answer for `{}`",
                self.id
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyDefinition {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub wording_note: Option<String>,
    pub intro: Vec<IntroBlock>,
    pub design: BidDesign,
    /// Template with a `{bid}` placeholder.
    pub bid_question: String,
    pub spike_question: String,
    pub zero_reason_prompt: String,
    pub zero_reason_options: Vec<ReasonOption>,
    pub covariate_items: Vec<CovariateItem>,
}

impl SurveyDefinition {
    pub fn from_json(text: &str) -> Result<Self> {
        let def: SurveyDefinition = serde_json::from_str(text).map_err(|e| SurveyError::Definition(e.to_string()))?;
        def.validate()?;
        Ok(def)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_DEFINITION).expect("bundled definition is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SurveyError::Definition(m));
        if self.id.trim().is_empty() {
            return bad("empty survey id".into());
        }
        if !self.bid_question.contains("{bid}") {
            return bad("bid_question lacks a {bid} placeholder".into());
        }
        let reasons: BTreeSet<ZeroReason> = self.zero_reason_options.iter().map(|o| o.code).collect();
        if reasons.len() != self.zero_reason_options.len() {
            return bad("duplicate zero-reason option".into());
        }
        if !reasons.iter().any(|r| r.is_protest()) {
            return bad("zero-reason options must include the protest option".into());
        }
        let mut ids = BTreeSet::new();
        for item in &self.covariate_items {
            let id = item.id.as_str();
            let valid_name = !id.is_empty()
                && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                && !RESERVED_COLUMNS.contains(&id);
            if !valid_name {
                return bad(format!("`{id}` is not a usable covariate column name"));
            }
            if !ids.insert(id) {
                return bad(format!("duplicate covariate item `{id}`"));
            }
            match &item.kind {
                ItemKind::Likert => {}
                ItemKind::Categorical { options } => {
                    if options.is_empty() || options.iter().any(|o| !o.code.is_finite()) {
                        return bad(format!("item `{id}` needs finite option codes"));
                    }
                    let distinct: BTreeSet<u64> = options.iter().map(|o| o.code.to_bits()).collect();
                    if distinct.len() != options.len() {
                        return bad(format!("item `{id}` repeats an option code"));
                    }
                }
                ItemKind::Numeric { min, max } => {
                    if !(min.is_finite() && max.is_finite() && min <= max) {
                        return bad(format!("item `{id}` has an invalid range"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Covariate column names in item order.
    pub fn covariate_names(&self) -> Vec<String> {
        self.covariate_items.iter().map(|i| i.id.clone()).collect()
    }

    pub fn bid_prompt(&self, bid: u32) -> String {
        self.bid_question.replace("{bid}", &format_krw(bid))
    }
}

/// `12345` → `"12,345"`.
pub fn format_krw(amount: u32) -> String {
    let digits = amount.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_definition_is_valid() {
        let d = SurveyDefinition::bundled();
        assert_eq!(d.design, BidDesign::published());
        assert_eq!(d.intro.len(), 3);
        assert_eq!(d.zero_reason_options.len(), 6);
        assert_eq!(
            d.covariate_names(),
            [
                "sex",
                "age",
                "income",
                "anti_dust",
                "seriousness",
                "health_effect",
                "reliability",
                "ufp_perception"
            ]
        );
    }

    #[test]
    fn formats_thousands() {
        assert_eq!(format_krw(1), "1");
        assert_eq!(format_krw(1000), "1,000");
        assert_eq!(format_krw(17000), "17,000");
        assert_eq!(format_krw(1234567), "1,234,567");
    }

    #[test]
    fn bid_prompt_substitutes_amount() {
        let d = SurveyDefinition::bundled();
        assert!(d.bid_prompt(14000).contains("KRW 14,000"));
    }

    fn edit(f: impl FnOnce(&mut serde_json::Value)) -> Result<SurveyDefinition> {
        let mut v: serde_json::Value = serde_json::from_str(BUNDLED_DEFINITION).unwrap();
        f(&mut v);
        SurveyDefinition::from_json(&v.to_string())
    }

    #[test]
    fn rejects_missing_protest_option() {
        let r = edit(|v| {
            let opts = v["zero_reason_options"].as_array_mut().unwrap();
            opts.retain(|o| o["code"] != "not_enough_info");
        });
        assert!(matches!(r, Err(SurveyError::Definition(_))));
    }

    #[test]
    fn rejects_bad_design_and_items() {
        assert!(edit(|v| v["design"] = serde_json::json!([[2000, 3000], [1000, 2000]])).is_err());
        assert!(edit(|v| v["design"] = serde_json::json!([[2000, 1000]])).is_err());
        assert!(edit(|v| v["covariate_items"][1]["id"] = "sex".into()).is_err());
        assert!(edit(|v| v["covariate_items"][0]["id"] = "outcome".into()).is_err());
        assert!(edit(|v| v["covariate_items"][0]["id"] = "has space".into()).is_err());
        assert!(edit(|v| v["bid_question"] = "pay?".into()).is_err());
    }

    #[test]
    fn item_acceptance() {
        let d = SurveyDefinition::bundled();
        let by_id = |id: &str| d.covariate_items.iter().find(|i| i.id == id).unwrap();
        assert_eq!(by_id("sex").accept(1.0).unwrap(), 1.0);
        assert!(by_id("sex").accept(2.0).is_err());
        assert!(by_id("age").accept(45.0).is_ok());
        assert!(by_id("age").accept(19.0).is_err());
        assert!(by_id("seriousness").accept(5.0).is_ok());
        assert!(by_id("seriousness").accept(2.5).is_err());
        assert!(by_id("seriousness").accept(f64::NAN).is_err());
    }
}
