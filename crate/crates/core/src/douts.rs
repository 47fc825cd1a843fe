//! Degree of outsourcingness: a rational score in [0, 1] computed from
//! declared transaction facts by rules of thumb, with a trace of the rules
//! that fired.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

/// Serde adapter writing a rational as `"n/d"` (or `"n"` when whole) and
/// reading either that string form or a JSON number.
pub mod rational_serde {
    use super::Rational;
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&super::format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        struct RationalVisitor;

        impl<'de> Visitor<'de> for RationalVisitor {
            type Value = Rational;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational as a number or an \"n/d\" string")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
                Ok(Rational::from_integer(v.into()))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
                Ok(Rational::from_integer(v.into()))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
                super::parse_rational(&v.to_string()).map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
                super::parse_rational(v).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(RationalVisitor)
    }
}

pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Parse `n`, `n/d`, or a finite decimal such as `0.25` exactly.
pub fn parse_rational(text: &str) -> std::result::Result<Rational, String> {
    let text = text.trim();
    let bad = || format!("`{text}` is not a rational number");
    if let Some((n, d)) = text.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(format!("`{text}` has a zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits_ok = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if (whole.is_empty() && frac.is_empty()) || !digits_ok(whole) || !digits_ok(frac) || frac.len() > 30 {
        return Err(bad());
    }
    let scale = 10i128.checked_pow(frac.len() as u32).ok_or_else(bad)?;
    let whole: i128 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
    let frac_value: i128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let numer = whole.checked_mul(scale).and_then(|w| w.checked_add(frac_value)).ok_or_else(bad)?;
    let value = Rational::new(numer, scale);
    Ok(if negative { -value } else { value })
}

/// The five conditions that lift the score from 0.7 toward 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LiftConditions {
    #[serde(default)]
    pub process_stable: bool,
    #[serde(default)]
    pub more_economic_than_split: bool,
    #[serde(default)]
    pub incorporation_plausible: bool,
    #[serde(default)]
    pub risk_enabled_by_contract: bool,
    #[serde(default)]
    pub positive_asset_value_shared: bool,
}

impl LiftConditions {
    pub const NAMES: [&'static str; 5] = [
        "process_stable",
        "more_economic_than_split",
        "incorporation_plausible",
        "risk_enabled_by_contract",
        "positive_asset_value_shared",
    ];

    pub fn as_array(&self) -> [bool; 5] {
        [
            self.process_stable,
            self.more_economic_than_split,
            self.incorporation_plausible,
            self.risk_enabled_by_contract,
            self.positive_asset_value_shared,
        ]
    }

    pub fn from_array(flags: [bool; 5]) -> Self {
        Self {
            process_stable: flags[0],
            more_economic_than_split: flags[1],
            incorporation_plausible: flags[2],
            risk_enabled_by_contract: flags[3],
            positive_asset_value_shared: flags[4],
        }
    }

    pub fn set(&mut self, name: &str, value: bool) -> bool {
        let Some(i) = Self::NAMES.iter().position(|n| *n == name) else { return false };
        let mut flags = self.as_array();
        flags[i] = value;
        *self = Self::from_array(flags);
        true
    }

    pub fn count(&self) -> i128 {
        self.as_array().iter().filter(|b| **b).count() as i128
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoutsInput {
    pub service_contracted: bool,
    pub sources_transferred: bool,
    #[serde(default)]
    pub independent_markets_as_economic: bool,
    #[serde(default)]
    pub initial_production_by_transferred_sources: bool,
    #[serde(default)]
    pub lift_conditions: LiftConditions,
    #[serde(with = "rational_serde")]
    pub service_volume: Rational,
    #[serde(with = "rational_serde")]
    pub transferred_production_volume: Rational,
    #[serde(default)]
    pub multi_party: bool,
}

impl DoutsInput {
    pub fn validate(&self) -> Result<()> {
        let zero = Rational::from_integer(0);
        if self.service_volume < zero || self.transferred_production_volume < zero {
            return Err(Error::InvalidInput("volumes must be non-negative".into()));
        }
        if !self.sources_transferred && self.transferred_production_volume != zero {
            return Err(Error::InvalidInput(
                "transferred_production_volume must be 0 when no sources are transferred".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTag {
    Rule1,
    Rule2,
    Rule3,
    Rule4,
    Rule5,
    Rule6,
    Rule7,
    Rule8,
}

impl fmt::Display for RuleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = *self as u8 + 1;
        write!(f, "rule{n}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub rule: RuleTag,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoutsScore {
    #[serde(with = "rational_serde")]
    pub value: Rational,
    pub rule_trace: Vec<TraceEntry>,
}

impl DoutsScore {
    pub fn rules(&self) -> Vec<RuleTag> {
        self.rule_trace.iter().map(|t| t.rule).collect()
    }
}

pub fn score(input: &DoutsInput) -> Result<DoutsScore> {
    input.validate()?;
    let mut trace = Vec::new();
    let mut note = |rule: RuleTag, detail: String| trace.push(TraceEntry { rule, detail });
    let zero = Rational::from_integer(0);

    if input.multi_party {
        note(RuleTag::Rule8, "insourcing units are scored as one union unit".into());
    }
    if !input.service_contracted || !input.sources_transferred {
        let missing = match (input.service_contracted, input.sources_transferred) {
            (false, false) => "no service bought and no source transferred",
            (false, true) => "no service bought",
            _ => "no source transferred",
        };
        note(RuleTag::Rule1, format!("{missing}: 0"));
        return Ok(DoutsScore { value: zero, rule_trace: trace });
    }
    if input.independent_markets_as_economic {
        note(RuleTag::Rule2, "independent service purchase and externalization are at least as economic: 0".into());
        note(RuleTag::Rule3, "equivalent to a purchase followed by an externalization".into());
        return Ok(DoutsScore { value: zero, rule_trace: trace });
    }

    let base = if input.initial_production_by_transferred_sources {
        note(RuleTag::Rule4, "the transferred sources provide the service initially: at least 7/10".into());
        let k = input.lift_conditions.count();
        let base = Rational::new(7, 10) + Rational::new(3, 10) * Rational::new(k, 5);
        note(
            RuleTag::Rule5,
            format!(
                "{k} of 5 lift conditions hold: 7/10 + 3/10 * {k}/5 = {} (linear interpolation)",
                format_rational(&base)
            ),
        );
        base
    } else {
        let base = Rational::new(35, 100);
        note(
            RuleTag::Rule4,
            format!(
                "not met: the transferred sources do not provide the service initially; engine-defined base {}",
                format_rational(&base)
            ),
        );
        base
    };

    let (vs, vp) = (input.service_volume, input.transferred_production_volume);
    let factor = if vs == vp {
        Rational::from_integer(1)
    } else {
        let (lo, hi) = if vs < vp { (vs, vp) } else { (vp, vs) };
        let factor = lo / hi;
        let rule = if vs > vp { RuleTag::Rule6 } else { RuleTag::Rule7 };
        let what = if vs > vp {
            "service volume exceeds the production of the transferred sources"
        } else {
            "production of the transferred sources exceeds the service volume"
        };
        note(rule, format!("{what}: volume factor {}", format_rational(&factor)));
        factor
    };
    Ok(DoutsScore { value: base * factor, rule_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input() -> DoutsInput {
        DoutsInput {
            service_contracted: true,
            sources_transferred: true,
            independent_markets_as_economic: false,
            initial_production_by_transferred_sources: true,
            lift_conditions: LiftConditions::default(),
            service_volume: Rational::from_integer(1),
            transferred_production_volume: Rational::from_integer(1),
            multi_party: false,
        }
    }

    #[test]
    fn rational_text_forms() {
        assert_eq!(parse_rational("3/4").unwrap(), Rational::new(3, 4));
        assert_eq!(parse_rational("0.25").unwrap(), Rational::new(1, 4));
        assert_eq!(parse_rational("7").unwrap(), Rational::from_integer(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert_eq!(format_rational(&Rational::new(22, 25)), "22/25");
    }

    #[test]
    fn json_accepts_numbers_and_strings() {
        let json = r#"{"service_contracted":true,"sources_transferred":true,
            "service_volume":2,"transferred_production_volume":"1/2"}"#;
        let parsed: DoutsInput = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.service_volume, Rational::from_integer(2));
        assert_eq!(parsed.transferred_production_volume, Rational::new(1, 2));
    }

    #[test]
    fn engine_defined_region_is_flagged() {
        let mut i = input();
        i.initial_production_by_transferred_sources = false;
        let s = score(&i).unwrap();
        assert_eq!(s.value, Rational::new(7, 20));
        assert!(s.rule_trace[0].detail.contains("engine-defined"));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let mut i = input();
        i.sources_transferred = false;
        assert_eq!(score(&i).unwrap_err().code(), "INVALID_INPUT");
        let mut i = input();
        i.service_volume = Rational::from_integer(-1);
        assert_eq!(score(&i).unwrap_err().code(), "INVALID_INPUT");
    }

    #[test]
    fn multi_party_is_traced_but_neutral() {
        let mut i = input();
        let single = score(&i).unwrap();
        i.multi_party = true;
        let multi = score(&i).unwrap();
        assert_eq!(single.value, multi.value);
        assert!(multi.rules().contains(&RuleTag::Rule8));
    }
}
