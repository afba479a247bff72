//! Two-outcome gambles and the built-in stimulus sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::choice::ChoiceSystem;
use crate::error::{Error, Result};

/// Win `value` with probability `win_prob_num / win_prob_den`, else nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gamble {
    win_prob_num: u32,
    win_prob_den: u32,
    value_cents: u64,
}

impl Gamble {
    pub fn new(win_prob_num: u32, win_prob_den: u32, value_cents: u64) -> Result<Self> {
        if win_prob_num == 0 || win_prob_num >= win_prob_den {
            return Err(Error::InvalidGamble(format!(
                "win probability {win_prob_num}/{win_prob_den} must lie strictly between 0 and 1"
            )));
        }
        if value_cents == 0 {
            return Err(Error::InvalidGamble("value must be positive".into()));
        }
        Ok(Self { win_prob_num, win_prob_den, value_cents })
    }

    /// Parse `"7/24"` and `"25.43"`.
    pub fn parse(prob: &str, value: &str) -> Result<Self> {
        let (num, den) = prob
            .trim()
            .split_once('/')
            .ok_or_else(|| Error::InvalidGamble(format!("probability {prob:?} is not a fraction")))?;
        let num: u32 = num
            .trim()
            .parse()
            .map_err(|_| Error::InvalidGamble(format!("bad numerator in {prob:?}")))?;
        let den: u32 = den
            .trim()
            .parse()
            .map_err(|_| Error::InvalidGamble(format!("bad denominator in {prob:?}")))?;
        Self::new(num, den, parse_cents(value)?)
    }

    pub fn win_prob_num(&self) -> u32 {
        self.win_prob_num
    }

    pub fn win_prob_den(&self) -> u32 {
        self.win_prob_den
    }

    pub fn win_prob(&self) -> f64 {
        f64::from(self.win_prob_num) / f64::from(self.win_prob_den)
    }

    pub fn value_cents(&self) -> u64 {
        self.value_cents
    }

    pub fn value(&self) -> f64 {
        self.value_cents as f64 / 100.0
    }

    pub fn expected_value(&self) -> f64 {
        self.win_prob() * self.value()
    }

    /// Value with exactly two decimals, e.g. `5.00`.
    pub fn value_text(&self) -> String {
        format!("{}.{:02}", self.value_cents / 100, self.value_cents % 100)
    }

    pub fn prob_text(&self) -> String {
        format!("{}/{}", self.win_prob_num, self.win_prob_den)
    }
}

fn parse_cents(value: &str) -> Result<u64> {
    let bad = || Error::InvalidGamble(format!("value {value:?} is not a dollar amount with at most 2 decimals"));
    let v = value.trim();
    let (whole, frac) = v.split_once('.').unwrap_or((v, ""));
    if whole.is_empty() || frac.len() > 2 || !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let whole: u64 = whole.parse().map_err(|_| bad())?;
    let frac: u64 = if frac.is_empty() {
        0
    } else {
        let f: u64 = frac.parse().map_err(|_| bad())?;
        if frac.len() == 1 {
            f * 10
        } else {
            f
        }
    };
    whole.checked_mul(100).and_then(|c| c.checked_add(frac)).ok_or_else(bad)
}

impl fmt::Display for Gamble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {}", self.value_text(), self.prob_text())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GambleRepr {
    prob: String,
    value: String,
}

impl Serialize for Gamble {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GambleRepr { prob: self.prob_text(), value: self.value_text() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Gamble {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = GambleRepr::deserialize(d)?;
        Gamble::parse(&r.prob, &r.value).map_err(serde::de::Error::custom)
    }
}

/// A named list of gambles, labelled `A`, `B`, ... in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GambleSetRepr", into = "GambleSetRepr")]
pub struct GambleSet {
    name: String,
    gambles: Vec<Gamble>,
    system: ChoiceSystem,
}

#[derive(Serialize, Deserialize)]
struct GambleSetRepr {
    name: String,
    gambles: Vec<Gamble>,
}

impl TryFrom<GambleSetRepr> for GambleSet {
    type Error = Error;
    fn try_from(r: GambleSetRepr) -> Result<Self> {
        GambleSet::new(r.name, r.gambles)
    }
}

impl From<GambleSet> for GambleSetRepr {
    fn from(s: GambleSet) -> Self {
        GambleSetRepr { name: s.name, gambles: s.gambles }
    }
}

impl GambleSet {
    pub fn new(name: impl Into<String>, gambles: Vec<Gamble>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains('/') {
            return Err(Error::InvalidGamble(format!("invalid gamble set name {name:?}")));
        }
        let system = ChoiceSystem::lettered(gambles.len())?;
        Ok(Self { name, gambles, system })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn gambles(&self) -> &[Gamble] {
        &self.gambles
    }

    pub fn system(&self) -> &ChoiceSystem {
        &self.system
    }

    pub fn len(&self) -> usize {
        self.gambles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gambles.is_empty()
    }

    pub fn gamble(&self, label: &str) -> Result<(usize, &Gamble)> {
        let idx = self.system.index_of(label).ok_or_else(|| {
            Error::InvalidGamble(format!("set {:?} has no gamble {label:?}", self.name))
        })?;
        Ok((idx, &self.gambles[idx]))
    }
}

fn set(name: &str, rows: [(u32, u64); 5]) -> GambleSet {
    let gambles = rows.iter().map(|&(num, cents)| Gamble::new(num, 24, cents).expect("valid")).collect();
    GambleSet::new(name, gambles).expect("valid")
}

/// The five stimulus sets, values exactly as tabulated (including the
/// irregular second Tversky row).
pub fn builtin_gamble_sets() -> Vec<GambleSet> {
    vec![
        set("tversky-1", [(7, 500), (8, 475), (9, 450), (10, 425), (11, 400)]),
        set("tversky-2", [(8, 500), (10, 475), (12, 450), (10, 424), (11, 400)]),
        set("tversky-3", [(7, 370), (8, 360), (9, 350), (10, 340), (11, 330)]),
        set("davis-stober-1", [(7, 2543), (8, 2416), (9, 2289), (10, 2162), (11, 2035)]),
        set("davis-stober-2", [(7, 3199), (8, 2703), (9, 2289), (10, 1932), (11, 1619)]),
    ]
}

pub fn builtin_gamble_set(name: &str) -> Option<GambleSet> {
    builtin_gamble_sets().into_iter().find(|s| s.name == name)
}

/// Seeds as printed for the original runs; `675809175` appears twice.
pub const PUBLISHED_SEEDS: [u64; 10] = [
    835088831, 420986496, 698711259, 208932753, 622879400, 647348309, 675809175, 819772621,
    675809175, 429892269,
];

impl FromStr for Gamble {
    type Err = Error;

    /// `"25.43@7/24"`
    fn from_str(s: &str) -> Result<Self> {
        let (value, prob) = s
            .split_once('@')
            .ok_or_else(|| Error::InvalidGamble(format!("expected VALUE@NUM/DEN, got {s:?}")))?;
        Gamble::parse(prob, value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let sets = builtin_gamble_sets();
        assert_eq!(sets.len(), 5);
        assert!(sets.iter().all(|s| s.len() == 5));
        let t1 = builtin_gamble_set("tversky-1").unwrap();
        let (_, a) = t1.gamble("A").unwrap();
        assert_eq!((a.prob_text(), a.value_text()), ("7/24".into(), "5.00".into()));
        let ds1 = builtin_gamble_set("davis-stober-1").unwrap();
        let (_, e) = ds1.gamble("E").unwrap();
        assert_eq!((e.prob_text(), e.value_text()), ("11/24".into(), "20.35".into()));
        let t2 = builtin_gamble_set("tversky-2").unwrap();
        let (_, d) = t2.gamble("D").unwrap();
        assert_eq!((d.prob_text(), d.value_text()), ("10/24".into(), "4.24".into()));
        let ds2 = builtin_gamble_set("davis-stober-2").unwrap();
        assert_eq!(ds2.gambles()[0].value_text(), "31.99");
        assert_eq!(ds2.gambles()[4].value_text(), "16.19");
    }

    #[test]
    fn published_seed_duplicate() {
        let mut s = PUBLISHED_SEEDS.to_vec();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 9);
    }

    #[test]
    fn gamble_guards() {
        assert!(Gamble::new(0, 24, 100).is_err());
        assert!(Gamble::new(24, 24, 100).is_err());
        assert!(Gamble::new(7, 24, 0).is_err());
        assert!(Gamble::parse("7/24", "5.005").is_err());
        assert!(Gamble::parse("seven", "5").is_err());
        assert_eq!(Gamble::parse("7/24", "5.5").unwrap().value_text(), "5.50");
        assert_eq!("25.43@7/24".parse::<Gamble>().unwrap().value_cents(), 2543);
    }

    #[test]
    fn set_serde() {
        let s = builtin_gamble_set("tversky-3").unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"prob\":\"7/24\",\"value\":\"3.70\""), "{json}");
        let back: GambleSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
