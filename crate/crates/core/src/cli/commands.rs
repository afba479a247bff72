use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::report::{AnalysisReport, CellReport};
use crate::bayes::{best_model, estimate_bf, Model};
use crate::error::{Error, Result};
use crate::experiment::io::{read_trials, write_atomic, write_trials};
use crate::experiment::trials::datasets_json;
use crate::experiment::{aggregate, schedule_trials, CellKey, GambleSet, Outcome, TrialRecord};
use crate::responders::{build_responder, Responder};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateSummary {
    pub path: PathBuf,
    pub trials: usize,
}

/// Write the full trial manifest for `cfg` to `path`.
pub fn generate(cfg: &RunConfig, path: &Path) -> Result<GenerateSummary> {
    cfg.validate()?;
    let trials = schedule_trials(&cfg.sets, &cfg.formats, &cfg.responder_ids(), &cfg.seeds)?;
    write_trials(path, &trials)?;
    Ok(GenerateSummary { path: path.to_path_buf(), trials: trials.len() })
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub manifest: PathBuf,
    pub results: PathBuf,
    /// Stop after this many trials (the file stays resumable).
    pub limit: Option<usize>,
    /// Trials between checkpoints of the results file.
    pub checkpoint_every: usize,
}

impl RunOptions {
    pub fn for_config(cfg: &RunConfig) -> Self {
        Self { manifest: cfg.manifest_path(), results: cfg.results_path(), limit: None, checkpoint_every: 2000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub total: usize,
    pub already_done: usize,
    pub executed: usize,
    pub remaining: usize,
    pub parse_failures: usize,
    pub transport_failures: usize,
}

fn identity(t: &TrialRecord) -> (&str, &str, String, &str, &str, u64) {
    (&t.responder_id, &t.set, t.format.key(), &t.first, &t.second, t.seed)
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

/// Fill in outcomes for every pending trial, resuming from an existing
/// results file when present.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    if opts.checkpoint_every == 0 {
        return Err(Error::InvalidConfig("checkpoint_every must be at least 1".into()));
    }
    let manifest = read_trials(&opts.manifest, &cfg.sets)?;
    let mut trials = if opts.results.exists() {
        let done = read_trials(&opts.results, &cfg.sets)?;
        let same = done.len() == manifest.len()
            && done.iter().zip(&manifest).all(|(a, b)| identity(a) == identity(b));
        if !same {
            return Err(Error::InvalidSchedule(format!(
                "{} does not match manifest {}",
                opts.results.display(),
                opts.manifest.display()
            )));
        }
        done
    } else {
        manifest
    };

    let sets: HashMap<&str, &GambleSet> = cfg.sets.iter().map(|s| (s.name(), s)).collect();
    let mut responders: Vec<(Box<dyn Responder>, usize)> = Vec::new();
    let mut by_id: HashMap<&str, usize> = HashMap::new();
    for spec in &cfg.responders {
        let threads = spec.max_in_flight().map_or(cfg.workers, |m| m.min(cfg.workers));
        by_id.insert(&spec.id, responders.len());
        responders.push((build_responder(spec, &cfg.sets)?, threads));
    }

    let mut pending: Vec<Vec<usize>> = vec![Vec::new(); responders.len()];
    let mut summary = RunSummary { total: trials.len(), ..Default::default() };
    let mut budget = opts.limit.unwrap_or(usize::MAX);
    for (i, t) in trials.iter().enumerate() {
        if t.outcome.is_some() {
            summary.already_done += 1;
            continue;
        }
        let r = *by_id.get(t.responder_id.as_str()).ok_or_else(|| {
            Error::InvalidSchedule(format!("trial names responder {:?} absent from config", t.responder_id))
        })?;
        if !sets.contains_key(t.set.as_str()) {
            return Err(Error::InvalidSchedule(format!("trial names unknown gamble set {:?}", t.set)));
        }
        if budget > 0 {
            pending[r].push(i);
            budget -= 1;
        } else {
            summary.remaining += 1;
        }
    }

    let mut pools: HashMap<usize, rayon::ThreadPool> = HashMap::new();
    for (r, idxs) in pending.iter().enumerate() {
        let (responder, threads) = &responders[r];
        if idxs.is_empty() {
            continue;
        }
        if !pools.contains_key(threads) {
            pools.insert(*threads, thread_pool(*threads)?);
        }
        let pool = &pools[threads];
        for chunk in idxs.chunks(opts.checkpoint_every) {
            let answers: Vec<(usize, Outcome)> = pool.install(|| {
                chunk
                    .par_iter()
                    .map(|&i| {
                        let t = &trials[i];
                        (i, responder.respond(t, sets[t.set.as_str()], t.stream_seed(cfg.master_seed)))
                    })
                    .collect()
            });
            for (i, o) in answers {
                match &o {
                    Outcome::ParseFailure(_) => summary.parse_failures += 1,
                    Outcome::TransportFailure(_) => summary.transport_failures += 1,
                    _ => {}
                }
                trials[i].outcome = Some(o);
                summary.executed += 1;
            }
            write_trials(&opts.results, &trials)?;
        }
    }
    write_trials(&opts.results, &trials)?;
    Ok(summary)
}

/// Seed for one cell's Bayes factor estimates.
pub fn cell_seed(master_seed: u64, cell: &CellKey) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(cell.to_string().as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeSummary {
    pub report: AnalysisReport,
    pub written: Vec<PathBuf>,
}

/// Estimate both Bayes factors for every cell and write the report files
/// into `out_dir`.
pub fn analyze(cfg: &RunConfig, results: &Path, out_dir: &Path) -> Result<AnalyzeSummary> {
    cfg.validate()?;
    let trials = read_trials(results, &cfg.sets)?;
    let cells = aggregate(&trials, &cfg.sets)?;

    let mut keys = Vec::new();
    for r in &cfg.responders {
        for s in &cfg.sets {
            for &f in &cfg.formats {
                let key = CellKey { responder: r.id.clone(), set: s.name().to_string(), format: f };
                if !cells.contains_key(&key) {
                    return Err(Error::InvalidDataset(format!("no trials for cell {key}")));
                }
                keys.push(key);
            }
        }
    }
    if let Some(extra) = cells.keys().find(|k| !keys.contains(k)) {
        return Err(Error::InvalidDataset(format!("results contain cell {extra} absent from config")));
    }

    let pool = thread_pool(cfg.workers)?;
    let reports: Vec<CellReport> = pool.install(|| {
        keys.par_iter()
            .map(|key| {
                let cell = &cells[key];
                let bf_cfg = cfg.bayes.with_seed(cell_seed(cfg.bayes.master_seed, key));
                let wst = estimate_bf(&cell.dataset, Model::Wst, &bf_cfg)?;
                let mmtp = estimate_bf(&cell.dataset, Model::Mmtp, &bf_cfg)?;
                let best = best_model(&wst, &mmtp);
                Ok(CellReport::new(key, cell, wst, mmtp, best))
            })
            .collect::<Result<_>>()
    })?;
    let report = AnalysisReport::build(cfg, trials.len(), reports);

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let p = out_dir.join(name);
        write_atomic(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    emit("datasets.json", to_json(&datasets_json(&cells))?)?;
    emit("report.json", to_json(&report)?)?;
    emit("cells.csv", report.cells_csv()?)?;
    emit("violations_by_responder.csv", report.violations_by_responder_csv()?)?;
    emit("violations_by_format_set.csv", report.violations_by_format_set_csv()?)?;
    emit("best_model_by_responder.csv", report.best_model_by_responder_csv()?)?;
    Ok(AnalyzeSummary { report, written })
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| Error::format("JSON output", e))?;
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::BfConfig;
    use crate::experiment::{builtin_gamble_set, PromptFormat};
    use crate::responders::{ResponderSpec, Simulator};

    fn config(dir: &Path, workers: usize) -> RunConfig {
        RunConfig {
            sets: vec![builtin_gamble_set("tversky-1").unwrap()],
            formats: PromptFormat::all()[..2].to_vec(),
            responders: vec![ResponderSpec::simulated("soft", Simulator::EvSoftmax { temperature: 0.5 })],
            seeds: vec![1, 2, 3],
            bayes: BfConfig { max_samples: 20_000, batch_size: 2_000, ..BfConfig::default() },
            output_dir: dir.to_path_buf(),
            master_seed: 11,
            workers,
        }
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 2);
        let manifest = dir.path().join("manifest.csv");
        assert_eq!(generate(&cfg, &manifest).unwrap().trials, 2 * 3 * 20);

        let whole = RunOptions { results: dir.path().join("whole.csv"), ..RunOptions::for_config(&cfg) };
        let s = run(&cfg, &whole).unwrap();
        assert_eq!((s.executed, s.transport_failures), (120, 0));

        let parts = RunOptions {
            results: dir.path().join("parts.csv"),
            limit: Some(37),
            checkpoint_every: 10,
            ..RunOptions::for_config(&cfg)
        };
        let s = run(&cfg, &parts).unwrap();
        assert_eq!((s.executed, s.remaining), (37, 83));
        let s = run(&cfg, &RunOptions { limit: None, ..parts.clone() }).unwrap();
        assert_eq!((s.already_done, s.executed), (37, 83));
        assert_eq!(std::fs::read(&whole.results).unwrap(), std::fs::read(&parts.results).unwrap());
    }

    #[test]
    fn mismatched_results_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 1);
        generate(&cfg, &cfg.manifest_path()).unwrap();
        std::fs::write(cfg.results_path(), "responder_id,set,format_prob,format_money,first,second,seed,outcome,raw_text\n").unwrap();
        let err = run(&cfg, &RunOptions::for_config(&cfg)).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }

    #[test]
    fn analyze_covers_every_cell() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 2);
        generate(&cfg, &cfg.manifest_path()).unwrap();
        run(&cfg, &RunOptions::for_config(&cfg)).unwrap();
        let out = analyze(&cfg, &cfg.results_path(), dir.path()).unwrap();
        assert_eq!(out.report.cells.len(), 2);
        assert_eq!(out.report.bayes_factors, 4);
        assert_eq!(out.written.len(), 6);

        let partial = dir.path().join("partial.csv");
        let mut trials = read_trials(&cfg.results_path(), &cfg.sets).unwrap();
        trials.truncate(60);
        write_trials(&partial, &trials).unwrap();
        assert!(analyze(&cfg, &partial, dir.path()).is_err());
    }

    #[test]
    fn cell_seeds_differ() {
        let a: CellKey = "r/tversky-1/fraction-plain".parse().unwrap();
        let b: CellKey = "r/tversky-1/fraction-dollars".parse().unwrap();
        assert_ne!(cell_seed(0, &a), cell_seed(0, &b));
        assert_ne!(cell_seed(0, &a), cell_seed(1, &a));
    }
}
