//! Question rendering for the six presentation formats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stimuli::Gamble;
use crate::error::{Error, Result};

/// System instruction shared by both prompt scaffolds.
pub const INSTRUCTION: &str = "You have the choice of two gambles. Pick which one you would prefer.";
/// Answer prefix the model completes with a single token.
pub const ANSWER_PREFIX: &str = "I choose Gamble ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbStyle {
    Fraction,
    Percentage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoneyStyle {
    Plain,
    #[serde(rename = "dollars")]
    DollarsWord,
    DollarSign,
}

impl ProbStyle {
    pub const ALL: [ProbStyle; 2] = [ProbStyle::Fraction, ProbStyle::Percentage];

    pub fn key(&self) -> &'static str {
        match self {
            ProbStyle::Fraction => "fraction",
            ProbStyle::Percentage => "percentage",
        }
    }
}

impl MoneyStyle {
    pub const ALL: [MoneyStyle; 3] = [MoneyStyle::Plain, MoneyStyle::DollarsWord, MoneyStyle::DollarSign];

    pub fn key(&self) -> &'static str {
        match self {
            MoneyStyle::Plain => "plain",
            MoneyStyle::DollarsWord => "dollars",
            MoneyStyle::DollarSign => "dollar-sign",
        }
    }
}

impl FromStr for ProbStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProbStyle::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| Error::format("probability style", format!("unknown style {s:?}")))
    }
}

impl FromStr for MoneyStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MoneyStyle::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| Error::format("money style", format!("unknown style {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PromptFormat {
    pub prob_style: ProbStyle,
    pub money_style: MoneyStyle,
}

impl PromptFormat {
    pub fn new(prob_style: ProbStyle, money_style: MoneyStyle) -> Self {
        Self { prob_style, money_style }
    }

    /// The six formats, fraction formats first, money styles in table order.
    pub fn all() -> Vec<PromptFormat> {
        ProbStyle::ALL
            .into_iter()
            .flat_map(|p| MoneyStyle::ALL.into_iter().map(move |m| PromptFormat::new(p, m)))
            .collect()
    }

    /// `"fraction-plain"`, `"percentage-dollar-sign"`, ...
    pub fn key(&self) -> String {
        format!("{}-{}", self.prob_style.key(), self.money_style.key())
    }
}

impl fmt::Display for PromptFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for PromptFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PromptFormat::all()
            .into_iter()
            .find(|f| f.key() == s)
            .ok_or_else(|| Error::format("prompt format", format!("unknown format {s:?}")))
    }
}

impl Serialize for PromptFormat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for PromptFormat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Scaffold around the question: raw completion text or chat template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStyle {
    Base,
    Instruct,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Fraction in lowest terms: `8/24` -> `1/3`.
pub fn fraction_text(num: u32, den: u32) -> String {
    let g = gcd(num, den).max(1);
    format!("{}/{}", num / g, den / g)
}

/// Percentage with two decimals, rounding half up: `7/24` -> `29.17%`.
pub fn percentage_text(num: u32, den: u32) -> String {
    let (num, den) = (u64::from(num), u64::from(den));
    let hundredths = (2 * num * 10_000 + den) / (2 * den);
    format!("{}.{:02}%", hundredths / 100, hundredths % 100)
}

fn prob_text(g: &Gamble, style: ProbStyle) -> String {
    match style {
        ProbStyle::Fraction => fraction_text(g.win_prob_num(), g.win_prob_den()),
        ProbStyle::Percentage => percentage_text(g.win_prob_num(), g.win_prob_den()),
    }
}

/// Money rendering. The dollar-sign style keeps the trailing word "dollars"
/// when paired with fractions, matching the prompts actually issued.
fn money_text(g: &Gamble, fmt: PromptFormat) -> String {
    let v = g.value_text();
    match (fmt.money_style, fmt.prob_style) {
        (MoneyStyle::Plain, _) => v,
        (MoneyStyle::DollarsWord, _) => format!("{v} dollars"),
        (MoneyStyle::DollarSign, ProbStyle::Fraction) => format!("${v} dollars"),
        (MoneyStyle::DollarSign, ProbStyle::Percentage) => format!("${v}"),
    }
}

fn gamble_sentences(first: &Gamble, second: &Gamble, fmt: PromptFormat) -> String {
    format!(
        "Gamble 1 can give {} with a chance of {}. Gamble 2 can give {} with a chance of {}.",
        money_text(first, fmt),
        prob_text(first, fmt.prob_style),
        money_text(second, fmt),
        prob_text(second, fmt.prob_style),
    )
}

/// The bare question, on one line.
pub fn render_question(first: &Gamble, second: &Gamble, fmt: PromptFormat) -> String {
    format!("{} Which do you choose?", gamble_sentences(first, second, fmt))
}

/// Full prompt text for a model of the given style.
pub fn render_prompt(first: &Gamble, second: &Gamble, fmt: PromptFormat, style: PromptStyle) -> String {
    match style {
        PromptStyle::Base => format!(
            "{INSTRUCTION}\n{}\nWhich do you choose?\n{ANSWER_PREFIX}",
            gamble_sentences(first, second, fmt)
        ),
        PromptStyle::Instruct => format!(
            "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n{INSTRUCTION}\n\
             <|eot_id|><|start_header_id|>user<|end_header_id|>\n{}\
             <|eot_id|><|start_header_id|>assistant<|end_header_id|> {ANSWER_PREFIX}",
            render_question(first, second, fmt)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_reduce() {
        assert_eq!(fraction_text(8, 24), "1/3");
        assert_eq!(fraction_text(7, 24), "7/24");
        assert_eq!(fraction_text(12, 24), "1/2");
        assert_eq!(fraction_text(10, 24), "5/12");
    }

    #[test]
    fn percentages_round_half_up() {
        assert_eq!(percentage_text(7, 24), "29.17%");
        assert_eq!(percentage_text(8, 24), "33.33%");
        assert_eq!(percentage_text(12, 24), "50.00%");
        assert_eq!(percentage_text(11, 24), "45.83%");
        // 1/8 = 12.5% exactly; 1/16 = 6.25%; 1/32 = 3.125% -> 3.13%
        assert_eq!(percentage_text(1, 8), "12.50%");
        assert_eq!(percentage_text(1, 32), "3.13%");
    }

    #[test]
    fn format_keys_round_trip() {
        let all = PromptFormat::all();
        assert_eq!(all.len(), 6);
        for f in all {
            assert_eq!(f.key().parse::<PromptFormat>().unwrap(), f);
        }
        assert!("fraction-euro".parse::<PromptFormat>().is_err());
    }

    #[test]
    fn dollar_sign_rendering() {
        let g = Gamble::parse("7/24", "25.43").unwrap();
        let pct = PromptFormat::new(ProbStyle::Percentage, MoneyStyle::DollarSign);
        assert!(render_question(&g, &g, pct).starts_with("Gamble 1 can give $25.43 with"));
    }

    #[test]
    fn base_and_instruct_scaffolds() {
        let a = Gamble::parse("7/24", "5.00").unwrap();
        let b = Gamble::parse("8/24", "4.75").unwrap();
        let fmt = PromptFormat::new(ProbStyle::Fraction, MoneyStyle::Plain);
        let base = render_prompt(&a, &b, fmt, PromptStyle::Base);
        assert_eq!(
            base,
            "You have the choice of two gambles. Pick which one you would prefer.\n\
             Gamble 1 can give 5.00 with a chance of 7/24. Gamble 2 can give 4.75 with a chance of 1/3.\n\
             Which do you choose?\n\
             I choose Gamble "
        );
        let inst = render_prompt(&a, &b, fmt, PromptStyle::Instruct);
        assert!(inst.starts_with("<|begin_of_text|><|start_header_id|>system<|end_header_id|>\nYou have"));
        assert!(inst.contains("<|start_header_id|>user<|end_header_id|>\nGamble 1 can give 5.00"));
        assert!(inst.ends_with("Which do you choose?<|eot_id|><|start_header_id|>assistant<|end_header_id|> I choose Gamble "));
    }
}
