//! Trial manifest / results CSV and atomic file output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::prompt::{render_question, MoneyStyle, ProbStyle, PromptFormat};
use super::stimuli::GambleSet;
use super::trials::{Outcome, TrialRecord};
use crate::error::{Error, Result};

pub const TRIAL_CSV_HEADER: [&str; 9] = [
    "responder_id",
    "set",
    "format_prob",
    "format_money",
    "first",
    "second",
    "seed",
    "outcome",
    "raw_text",
];

#[derive(Debug, Serialize, Deserialize)]
struct TrialRow {
    responder_id: String,
    set: String,
    format_prob: String,
    format_money: String,
    first: String,
    second: String,
    seed: u64,
    outcome: String,
    raw_text: String,
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn trials_to_csv(trials: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(TRIAL_CSV_HEADER).map_err(|e| Error::format("trial CSV", e))?;
    for t in trials {
        let (outcome, raw) = match &t.outcome {
            None => ("", ""),
            Some(o) => (o.key(), o.raw_text()),
        };
        w.serialize(TrialRow {
            responder_id: t.responder_id.clone(),
            set: t.set.clone(),
            format_prob: t.format.prob_style.key().into(),
            format_money: t.format.money_style.key().into(),
            first: t.first.clone(),
            second: t.second.clone(),
            seed: t.seed,
            outcome: outcome.into(),
            raw_text: raw.into(),
        })
        .map_err(|e| Error::format("trial CSV", e))?;
    }
    w.into_inner().map_err(|e| Error::format("trial CSV", e))
}

pub fn write_trials(path: &Path, trials: &[TrialRecord]) -> Result<()> {
    write_atomic(path, &trials_to_csv(trials)?)
}

/// Parse a trial CSV; prompt text is re-rendered from `sets`.
pub fn trials_from_csv(data: &[u8], sets: &[GambleSet], source: &str) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(data);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::format(source, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != TRIAL_CSV_HEADER {
        return Err(Error::format(source, format!("unexpected header {header:?}")));
    }
    let headers = r.headers().map_err(|e| Error::format(source, e))?.clone();
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| Error::format(source, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row: TrialRow = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::format(source, format!("line {line}: {e}")))?;
        let at = |e: Error| Error::format(source, format!("line {line}: {e}"));
        let format = PromptFormat::new(
            row.format_prob.parse::<ProbStyle>().map_err(at)?,
            row.format_money.parse::<MoneyStyle>().map_err(at)?,
        );
        let set = sets
            .iter()
            .find(|s| s.name() == row.set)
            .ok_or_else(|| at(Error::InvalidSchedule(format!("unknown gamble set {:?}", row.set))))?;
        let (_, g1) = set.gamble(&row.first).map_err(at)?;
        let (_, g2) = set.gamble(&row.second).map_err(at)?;
        out.push(TrialRecord {
            prompt_text: render_question(g1, g2, format),
            outcome: Outcome::from_parts(&row.outcome, &row.raw_text).map_err(at)?,
            responder_id: row.responder_id,
            set: row.set,
            format,
            first: row.first,
            second: row.second,
            seed: row.seed,
        });
    }
    Ok(out)
}

pub fn read_trials(path: &Path, sets: &[GambleSet]) -> Result<Vec<TrialRecord>> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    trials_from_csv(&data, sets, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::stimuli::builtin_gamble_sets;
    use crate::experiment::trials::schedule_trials;

    #[test]
    fn csv_round_trip_with_awkward_text() {
        let sets = builtin_gamble_sets();
        let mut trials =
            schedule_trials(&sets[..1], &PromptFormat::all()[..2], &["m".to_string()], &[7]).unwrap();
        trials[0].outcome = Some(Outcome::ChoseFirst);
        trials[1].outcome = Some(Outcome::ParseFailure("1.\nI choose Gamble 2, \"really\"".into()));
        trials[2].outcome = Some(Outcome::TransportFailure("timeout".into()));
        let bytes = trials_to_csv(&trials).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("responder_id,set,format_prob,format_money,first,second,seed,outcome,raw_text\n"));
        let back = trials_from_csv(&bytes, &sets, "mem").unwrap();
        assert_eq!(back, trials);
    }

    #[test]
    fn bad_rows_report_line() {
        let sets = builtin_gamble_sets();
        let csv = "responder_id,set,format_prob,format_money,first,second,seed,outcome,raw_text\n\
                   m,tversky-1,fraction,plain,A,B,1,,\n\
                   m,tversky-1,fraction,euros,A,B,1,,\n";
        let err = trials_from_csv(csv.as_bytes(), &sets, "x.csv").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
