//! Trial scheduling, response parsing and AB/BA aggregation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prompt::{render_question, PromptFormat};
use super::stimuli::GambleSet;
use crate::choice::{pairs_for, ChoiceDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "raw", rename_all = "snake_case")]
pub enum Outcome {
    ChoseFirst,
    ChoseSecond,
    /// The response was not one of the two admissible single tokens.
    ParseFailure(String),
    /// The responder could not be reached; the trial carries no choice.
    TransportFailure(String),
}

impl Outcome {
    pub fn key(&self) -> &'static str {
        match self {
            Outcome::ChoseFirst => "first",
            Outcome::ChoseSecond => "second",
            Outcome::ParseFailure(_) => "parse_failure",
            Outcome::TransportFailure(_) => "transport_failure",
        }
    }

    pub fn raw_text(&self) -> &str {
        match self {
            Outcome::ChoseFirst => "1",
            Outcome::ChoseSecond => "2",
            Outcome::ParseFailure(raw) | Outcome::TransportFailure(raw) => raw,
        }
    }

    pub fn from_parts(key: &str, raw: &str) -> Result<Option<Self>> {
        Ok(match key {
            "" => None,
            "first" => Some(Outcome::ChoseFirst),
            "second" => Some(Outcome::ChoseSecond),
            "parse_failure" => Some(Outcome::ParseFailure(raw.to_string())),
            "transport_failure" => Some(Outcome::TransportFailure(raw.to_string())),
            other => return Err(Error::format("trial outcome", format!("unknown outcome {other:?}"))),
        })
    }
}

/// Classify a raw model response. Only a lone `1` or `2` (after trimming
/// whitespace) counts as a choice.
pub fn parse_response(raw: &str) -> Outcome {
    match raw.trim() {
        "1" => Outcome::ChoseFirst,
        "2" => Outcome::ChoseSecond,
        _ => Outcome::ParseFailure(raw.to_string()),
    }
}

/// One presentation of an ordered gamble pair to a responder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub responder_id: String,
    pub set: String,
    pub format: PromptFormat,
    pub first: String,
    pub second: String,
    pub seed: u64,
    pub prompt_text: String,
    pub outcome: Option<Outcome>,
}

impl TrialRecord {
    pub fn cell(&self) -> CellKey {
        CellKey { responder: self.responder_id.clone(), set: self.set.clone(), format: self.format }
    }

    /// Stream seed for simulated responders: a digest of the trial identity
    /// and the run's master seed, so that execution order never matters.
    pub fn stream_seed(&self, master_seed: u64) -> u64 {
        let mut h = Sha256::new();
        for part in [
            self.responder_id.as_bytes(),
            self.set.as_bytes(),
            self.format.key().as_bytes(),
            self.first.as_bytes(),
            self.second.as_bytes(),
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        h.update(self.seed.to_le_bytes());
        h.update(master_seed.to_le_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }
}

/// Emit every ordered pair of every set, for each responder, format and seed.
///
/// Order: responder, set, format, seed, then ordered pairs lexicographically.
pub fn schedule_trials(
    sets: &[GambleSet],
    formats: &[PromptFormat],
    responder_ids: &[String],
    seeds: &[u64],
) -> Result<Vec<TrialRecord>> {
    if sets.is_empty() || formats.is_empty() || responder_ids.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidSchedule("sets, formats, responders and seeds must all be nonempty".into()));
    }
    check_unique("seed", seeds.iter())?;
    check_unique("responder id", responder_ids.iter())?;
    check_unique("gamble set", sets.iter().map(GambleSet::name))?;
    check_unique("format", formats.iter())?;

    let per_cell: usize = sets.iter().map(|s| s.len() * (s.len() - 1)).sum();
    let mut out = Vec::with_capacity(responder_ids.len() * formats.len() * seeds.len() * per_cell);
    for rid in responder_ids {
        for set in sets {
            let labels = set.system().labels();
            for &format in formats {
                for &seed in seeds {
                    for i in 0..set.len() {
                        for j in 0..set.len() {
                            if i == j {
                                continue;
                            }
                            out.push(TrialRecord {
                                responder_id: rid.clone(),
                                set: set.name().to_string(),
                                format,
                                first: labels[i].clone(),
                                second: labels[j].clone(),
                                seed,
                                prompt_text: render_question(&set.gambles()[i], &set.gambles()[j], format),
                                outcome: None,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_unique<T: Eq + std::hash::Hash + fmt::Debug>(
    what: &str,
    items: impl Iterator<Item = T>,
) -> Result<()> {
    let mut seen = HashSet::new();
    for it in items {
        if !seen.insert(format!("{it:?}")) {
            return Err(Error::InvalidSchedule(format!("duplicate {what} {it:?}")));
        }
    }
    Ok(())
}

/// Identifies one aggregated dataset: responder, gamble set, format.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub responder: String,
    pub set: String,
    pub format: PromptFormat,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.responder, self.set, self.format.key())
    }
}

impl std::str::FromStr for CellKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.splitn(3, '/');
        match (it.next(), it.next(), it.next()) {
            (Some(r), Some(set), Some(fmt)) => {
                Ok(CellKey { responder: r.into(), set: set.into(), format: fmt.parse()? })
            }
            _ => Err(Error::format("cell key", format!("expected responder/set/format, got {s:?}"))),
        }
    }
}

/// Aggregated counts for one cell plus the trials that carried no choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellData {
    pub dataset: ChoiceDataset,
    pub parse_failures: u64,
    pub transport_failures: u64,
    /// Trials without an outcome yet.
    pub pending: u64,
}

impl CellData {
    /// Canonical pair names with no valid observation.
    pub fn empty_pair_names(&self) -> Vec<String> {
        let sys = self.dataset.system();
        self.dataset.empty_pairs().into_iter().map(|p| sys.pair_name(p)).collect()
    }

    pub fn is_flagged(&self) -> bool {
        !self.dataset.empty_pairs().is_empty()
    }
}

/// Merge both presentation orders of each pair into canonical win counts.
///
/// `ChoseFirst` on `(A,B)` and `ChoseSecond` on `(B,A)` both count as a win
/// for `A` over `B`. Failed and pending trials are tallied, not counted.
pub fn aggregate(trials: &[TrialRecord], sets: &[GambleSet]) -> Result<BTreeMap<CellKey, CellData>> {
    let mut cells: BTreeMap<CellKey, CellData> = BTreeMap::new();
    for t in trials {
        let set = sets
            .iter()
            .find(|s| s.name() == t.set)
            .ok_or_else(|| Error::InvalidSchedule(format!("trial references unknown gamble set {:?}", t.set)))?;
        let (fi, _) = set.gamble(&t.first)?;
        let (si, _) = set.gamble(&t.second)?;
        if fi == si {
            return Err(Error::InvalidSchedule(format!("trial pairs {:?} with itself", t.first)));
        }
        let cell = cells.entry(t.cell()).or_insert_with(|| CellData {
            dataset: ChoiceDataset::empty(set.system().clone()),
            parse_failures: 0,
            transport_failures: 0,
            pending: 0,
        });
        match &t.outcome {
            Some(Outcome::ChoseFirst) => cell.dataset.record(fi, si)?,
            Some(Outcome::ChoseSecond) => cell.dataset.record(si, fi)?,
            Some(Outcome::ParseFailure(_)) => cell.parse_failures += 1,
            Some(Outcome::TransportFailure(_)) => cell.transport_failures += 1,
            None => cell.pending += 1,
        }
    }
    Ok(cells)
}

/// JSON shape of one aggregated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDataJson {
    pub labels: Vec<String>,
    /// Canonical pair name (e.g. `"AB"`) to counts.
    pub pairs: BTreeMap<String, PairCountsJson>,
    pub parse_failures: u64,
    pub transport_failures: u64,
    pub pending: u64,
    pub empty_pairs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCountsJson {
    pub wins_ab: u64,
    pub wins_ba: u64,
}

impl From<&CellData> for CellDataJson {
    fn from(c: &CellData) -> Self {
        let sys = c.dataset.system();
        let pairs = pairs_for(sys.n())
            .into_iter()
            .zip(c.dataset.counts())
            .map(|(p, k)| (sys.pair_name(p), PairCountsJson { wins_ab: k.wins_ab, wins_ba: k.wins_ba }))
            .collect();
        CellDataJson {
            labels: sys.labels().to_vec(),
            pairs,
            parse_failures: c.parse_failures,
            transport_failures: c.transport_failures,
            pending: c.pending,
            empty_pairs: c.empty_pair_names(),
        }
    }
}

/// Datasets keyed by `"responder/set/format"`.
pub fn datasets_json(cells: &BTreeMap<CellKey, CellData>) -> BTreeMap<String, CellDataJson> {
    cells.iter().map(|(k, v)| (k.to_string(), CellDataJson::from(v))).collect()
}
