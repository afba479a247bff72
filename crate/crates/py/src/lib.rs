//! Python bindings: membership oracles, Bayes factor estimation, gamble sets,
//! prompt rendering and simulated responders.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use transitivity::bayes::{self, BayesFactorResult, BfBound, BfConfig, MmtpOracle, Model};
use transitivity::choice::{num_pairs, BinaryProbVector, ChoiceDataset, ChoiceSystem, PairCounts, MAX_ALTERNATIVES};
use transitivity::cli::{run_validation as validate, ValidationOptions};
use transitivity::error::Error;
use transitivity::experiment::{
    aggregate, builtin_gamble_set, builtin_gamble_sets, render_prompt, render_question, schedule_trials, Gamble,
    PromptFormat, PromptStyle,
};
use transitivity::polytope::{self, MembershipVerdict};
use transitivity::responders::{build_responder, ResponderSpec};

fn py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn system(len: usize, labels: Option<Vec<String>>) -> PyResult<ChoiceSystem> {
    match labels {
        Some(l) => ChoiceSystem::new(l).map_err(py_err),
        None => {
            let n = (2..=MAX_ALTERNATIVES).find(|&n| num_pairs(n) == len).ok_or_else(|| {
                PyValueError::new_err(format!("{len} values is not n(n-1)/2 for any n in 2..={MAX_ALTERNATIVES}"))
            })?;
            ChoiceSystem::lettered(n).map_err(py_err)
        }
    }
}

fn point(p: Vec<f64>, labels: Option<Vec<String>>) -> PyResult<BinaryProbVector> {
    BinaryProbVector::new(system(p.len(), labels)?, p).map_err(py_err)
}

fn verdict(v: MembershipVerdict, sys: &ChoiceSystem) -> (bool, Option<String>) {
    (v.inside, v.witness.map(|w| w.describe(sys)))
}

/// Weak stochastic transitivity. `p` lists P(a over b) for a < b in
/// row-major order. Returns `(inside, witness)`.
#[pyfunction]
#[pyo3(signature = (p, labels=None))]
fn wst_satisfied(p: Vec<f64>, labels: Option<Vec<String>>) -> PyResult<(bool, Option<String>)> {
    let p = point(p, labels)?;
    Ok(verdict(polytope::wst_satisfied(&p), p.system()))
}

/// Triangle-inequality test of the mixture model (up to 5 alternatives).
#[pyfunction]
#[pyo3(signature = (p, labels=None))]
fn mmtp_satisfied(p: Vec<f64>, labels: Option<Vec<String>>) -> PyResult<(bool, Option<String>)> {
    let p = point(p, labels)?;
    Ok(verdict(polytope::mmtp_satisfied(&p).map_err(py_err)?, p.system()))
}

/// Linear-programming membership in the linear order polytope (up to 7).
#[pyfunction]
#[pyo3(signature = (p, labels=None))]
fn lop_membership(p: Vec<f64>, labels: Option<Vec<String>>) -> PyResult<(bool, Option<String>)> {
    let p = point(p, labels)?;
    Ok(verdict(polytope::lop_membership_lp(&p).map_err(py_err)?, p.system()))
}

/// Smallest slack over all triangle inequalities; negative means outside.
#[pyfunction]
#[pyo3(signature = (p, labels=None))]
fn facet_slack(p: Vec<f64>, labels: Option<Vec<String>>) -> PyResult<f64> {
    Ok(polytope::facet_slack(&point(p, labels)?))
}

#[pyclass(frozen, get_all, module = "transitivity")]
struct BayesFactor {
    model: String,
    bf: f64,
    rel_se: f64,
    verdict: String,
    prior_hits: u64,
    prior_samples: u64,
    post_hits: u64,
    post_samples: u64,
    /// `("upper" | "lower", value)` when a hit count is zero.
    bound: Option<(String, f64)>,
    substantially_against: bool,
}

#[pymethods]
impl BayesFactor {
    fn __repr__(&self) -> String {
        format!("BayesFactor(model={:?}, bf={}, rel_se={}, verdict={:?})", self.model, self.bf, self.rel_se, self.verdict)
    }
}

impl From<BayesFactorResult> for BayesFactor {
    fn from(r: BayesFactorResult) -> Self {
        let verdict = serde_json::to_value(r.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        Self {
            model: r.model.name().to_string(),
            bf: r.bf,
            rel_se: r.rel_se,
            verdict,
            prior_hits: r.prior_hits,
            prior_samples: r.prior_samples,
            post_hits: r.post_hits,
            post_samples: r.post_samples,
            bound: r.bound.map(|b| match b {
                BfBound::Upper(u) => ("upper".to_string(), u),
                BfBound::Lower(l) => ("lower".to_string(), l),
            }),
            substantially_against: r.substantially_against(),
        }
    }
}

fn parse_model(name: &str) -> PyResult<Model> {
    match name.to_ascii_lowercase().as_str() {
        "wst" => Ok(Model::Wst),
        "mmtp" => Ok(Model::Mmtp),
        "unconstrained" => Ok(Model::Unconstrained),
        other => Err(PyValueError::new_err(format!("unknown model {other:?}; expected wst, mmtp or unconstrained"))),
    }
}

/// Encompassing-prior Bayes factor of `model` against the unconstrained
/// model. `counts` holds `(wins_ab, wins_ba)` for each pair a < b.
#[pyfunction]
#[pyo3(signature = (counts, model, labels=None, max_samples=1_000_000, batch_size=10_000,
                    target_rel_se=0.02, seed=0, prior_alpha=1.0, lp_oracle=false))]
#[allow(clippy::too_many_arguments)]
fn estimate_bf(
    py: Python<'_>,
    counts: Vec<(u64, u64)>,
    model: &str,
    labels: Option<Vec<String>>,
    max_samples: u64,
    batch_size: u64,
    target_rel_se: f64,
    seed: u64,
    prior_alpha: f64,
    lp_oracle: bool,
) -> PyResult<BayesFactor> {
    let sys = system(counts.len(), labels)?;
    let counts = counts.into_iter().map(|(wins_ab, wins_ba)| PairCounts { wins_ab, wins_ba }).collect();
    let data = ChoiceDataset::new(sys, counts).map_err(py_err)?;
    let cfg = BfConfig {
        prior_alpha,
        max_samples,
        target_rel_se,
        batch_size,
        master_seed: seed,
        mmtp_oracle: if lp_oracle { MmtpOracle::Lp } else { MmtpOracle::Facets },
    };
    let model = parse_model(model)?;
    let r = py.detach(|| bayes::estimate_bf(&data, model, &cfg)).map_err(py_err)?;
    Ok(r.into())
}

/// Names of the built-in gamble sets.
#[pyfunction]
fn builtin_sets() -> Vec<String> {
    builtin_gamble_sets().iter().map(|s| s.name().to_string()).collect()
}

/// Labels and `(probability, value)` texts of a built-in gamble set.
#[pyfunction]
fn gamble_set(name: &str) -> PyResult<Vec<(String, String, String)>> {
    let set = builtin_gamble_set(name).ok_or_else(|| PyValueError::new_err(format!("unknown gamble set {name:?}")))?;
    Ok(set
        .system()
        .labels()
        .iter()
        .zip(set.gambles())
        .map(|(l, g)| (l.clone(), g.prob_text(), g.value_text()))
        .collect())
}

/// Prompt format keys such as `fraction-plain`.
#[pyfunction]
fn prompt_formats() -> Vec<String> {
    PromptFormat::all().iter().map(PromptFormat::key).collect()
}

fn gamble(g: (String, String)) -> PyResult<Gamble> {
    Gamble::parse(&g.0, &g.1).map_err(py_err)
}

fn format(key: &str) -> PyResult<PromptFormat> {
    key.parse().map_err(py_err)
}

/// One-line question for two gambles given as `(probability, value)`,
/// e.g. `("7/24", "5.00")`.
#[pyfunction]
fn question(first: (String, String), second: (String, String), format_key: &str) -> PyResult<String> {
    Ok(render_question(&gamble(first)?, &gamble(second)?, format(format_key)?))
}

/// Full prompt text; `style` is `base` or `instruct`.
#[pyfunction]
#[pyo3(signature = (first, second, format_key, style="base"))]
fn prompt(first: (String, String), second: (String, String), format_key: &str, style: &str) -> PyResult<String> {
    let style = match style {
        "base" => PromptStyle::Base,
        "instruct" => PromptStyle::Instruct,
        other => return Err(PyValueError::new_err(format!("unknown prompt style {other:?}"))),
    };
    Ok(render_prompt(&gamble(first)?, &gamble(second)?, format(format_key)?, style))
}

fn spec(json: &str) -> PyResult<ResponderSpec> {
    let s: ResponderSpec = serde_json::from_str(json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    s.validate().map_err(py_err)?;
    Ok(s)
}

fn set(name: &str) -> PyResult<transitivity::experiment::GambleSet> {
    builtin_gamble_set(name).ok_or_else(|| PyValueError::new_err(format!("unknown gamble set {name:?}")))
}

/// Closed-form choice probabilities of a simulated responder (JSON spec)
/// on a built-in set, in canonical pair order.
#[pyfunction]
fn induced_probabilities(spec_json: &str, set_name: &str) -> PyResult<Vec<f64>> {
    let p = transitivity::responders::induced_probabilities(&spec(spec_json)?, &set(set_name)?).map_err(py_err)?;
    Ok(p.values().to_vec())
}

/// Run a simulated responder over every ordered pair of a set, once per seed
/// and both presentation orders, and return canonical `(wins_ab, wins_ba)`.
#[pyfunction]
#[pyo3(signature = (spec_json, set_name, seeds, format_key="fraction-plain", master_seed=0))]
fn simulate_counts(
    py: Python<'_>,
    spec_json: &str,
    set_name: &str,
    seeds: Vec<u64>,
    format_key: &str,
    master_seed: u64,
) -> PyResult<Vec<(u64, u64)>> {
    let spec = spec(spec_json)?;
    if spec.is_remote() {
        return Err(PyValueError::new_err("simulate_counts only runs simulated responders"));
    }
    let sets = [set(set_name)?];
    let fmt = format(format_key)?;
    py.detach(|| {
        let r = build_responder(&spec, &sets)?;
        let mut trials = schedule_trials(&sets, &[fmt], std::slice::from_ref(&spec.id), &seeds)?;
        for t in &mut trials {
            t.outcome = Some(r.respond(t, &sets[0], t.stream_seed(master_seed)));
        }
        let cells = aggregate(&trials, &sets)?;
        let cell = cells.into_values().next().expect("one cell was scheduled");
        Ok(cell.dataset.counts().iter().map(|c| (c.wins_ab, c.wins_ba)).collect())
    })
    .map_err(py_err)
}

/// Number of trials a full schedule would contain.
#[pyfunction]
fn count_trials(sets: Vec<String>, formats: Vec<String>, responders: Vec<String>, seeds: Vec<u64>) -> PyResult<usize> {
    let sets = sets.iter().map(|s| set(s)).collect::<PyResult<Vec<_>>>()?;
    let formats = formats.iter().map(|f| format(f)).collect::<PyResult<Vec<_>>>()?;
    Ok(schedule_trials(&sets, &formats, &responders, &seeds).map_err(py_err)?.len())
}

/// Built-in oracle checks; returns `(name, passed, detail)` per check.
#[pyfunction]
#[pyo3(signature = (samples=2_000_000, lp_points=1000, seed=1))]
fn run_validation(py: Python<'_>, samples: u64, lp_points: usize, seed: u64) -> PyResult<Vec<(String, bool, String)>> {
    let opts = ValidationOptions { samples, lp_points, seed };
    let report = py.detach(|| validate(&opts)).map_err(py_err)?;
    Ok(report.checks.into_iter().map(|c| (c.name.to_string(), c.passed, c.detail)).collect())
}

#[pymodule]
#[pyo3(name = "transitivity")]
fn transitivity_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<BayesFactor>()?;
    m.add("SUBSTANTIAL_FOR", bayes::SUBSTANTIAL_FOR)?;
    m.add("SUBSTANTIAL_AGAINST", bayes::SUBSTANTIAL_AGAINST)?;
    m.add_function(wrap_pyfunction!(wst_satisfied, m)?)?;
    m.add_function(wrap_pyfunction!(mmtp_satisfied, m)?)?;
    m.add_function(wrap_pyfunction!(lop_membership, m)?)?;
    m.add_function(wrap_pyfunction!(facet_slack, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_bf, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_sets, m)?)?;
    m.add_function(wrap_pyfunction!(gamble_set, m)?)?;
    m.add_function(wrap_pyfunction!(prompt_formats, m)?)?;
    m.add_function(wrap_pyfunction!(question, m)?)?;
    m.add_function(wrap_pyfunction!(prompt, m)?)?;
    m.add_function(wrap_pyfunction!(induced_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(count_trials, m)?)?;
    m.add_function(wrap_pyfunction!(run_validation, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternatives_are_inferred_from_pair_count() {
        assert_eq!(system(10, None).unwrap().n(), 5);
        assert_eq!(system(21, None).unwrap().n(), 7);
        assert_eq!(system(3, Some(vec!["x".into(), "y".into(), "z".into()])).unwrap().label(2), "z");
    }

    #[test]
    fn model_names_are_case_insensitive() {
        assert_eq!(parse_model("WST").unwrap(), Model::Wst);
        assert_eq!(parse_model("mmtp").unwrap(), Model::Mmtp);
    }
}
