//! Built-in oracle checks run by `transitivity validate`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayes::{estimate_bf, BfConfig, Model};
use crate::choice::{ChoiceDataset, ChoiceSystem, BinaryProbVector};
use crate::error::Result;
use crate::experiment::{builtin_gamble_set, builtin_gamble_sets, render_question, schedule_trials, PromptFormat};
use crate::polytope::{facet_slack, lop_membership_lp, mmtp_satisfied, vertex_matrix, wst_satisfied, LP_TOLERANCE};

/// Question strings for gamble A of `davis-stober-1` against gamble B, in
/// format order.
pub const REFERENCE_QUESTIONS: [(&str, &str); 6] = [
    (
        "fraction-plain",
        "Gamble 1 can give 25.43 with a chance of 7/24. Gamble 2 can give 24.16 with a chance of 1/3. Which do you choose?",
    ),
    (
        "percentage-plain",
        "Gamble 1 can give 25.43 with a chance of 29.17%. Gamble 2 can give 24.16 with a chance of 33.33%. Which do you choose?",
    ),
    (
        "fraction-dollar-sign",
        "Gamble 1 can give $25.43 dollars with a chance of 7/24. Gamble 2 can give $24.16 dollars with a chance of 1/3. Which do you choose?",
    ),
    (
        "percentage-dollar-sign",
        "Gamble 1 can give $25.43 with a chance of 29.17%. Gamble 2 can give $24.16 with a chance of 33.33%. Which do you choose?",
    ),
    (
        "fraction-dollars",
        "Gamble 1 can give 25.43 dollars with a chance of 7/24. Gamble 2 can give 24.16 dollars with a chance of 1/3. Which do you choose?",
    ),
    (
        "percentage-dollars",
        "Gamble 1 can give 25.43 dollars with a chance of 29.17%. Gamble 2 can give 24.16 dollars with a chance of 33.33%. Which do you choose?",
    ),
];

/// Exact share of transitive tournaments on five alternatives: 5!/2^10.
pub const WST_PRIOR_VOLUME_N5: f64 = 120.0 / 1024.0;
pub const MMTP_PRIOR_VOLUME_N5: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    /// Prior draws for the volume checks.
    pub samples: u64,
    /// Random points for the facet/LP comparison.
    pub lp_points: usize,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { samples: 2_000_000, lp_points: 1000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

/// Indicator point of the tournament encoded by `mask` (bit k set: first
/// alternative of canonical pair k wins).
pub fn tournament_point(system: &ChoiceSystem, mask: u64) -> Result<BinaryProbVector> {
    let p = (0..system.num_pairs()).map(|k| ((mask >> k) & 1) as f64).collect();
    BinaryProbVector::new(system.clone(), p)
}

/// Number of tournaments on `n` alternatives passing WST, and of those
/// passing the triangle facets.
pub fn count_transitive_tournaments(n: usize) -> Result<(u64, u64, u64)> {
    let sys = ChoiceSystem::lettered(n)?;
    let total = 1u64 << sys.num_pairs();
    let (mut wst, mut facets) = (0, 0);
    for mask in 0..total {
        let p = tournament_point(&sys, mask)?;
        wst += wst_satisfied(&p).inside as u64;
        facets += mmtp_satisfied(&p)?.inside as u64;
    }
    Ok((total, wst, facets))
}

pub fn check_vertices() -> Result<Check> {
    let sys = ChoiceSystem::lettered(5)?;
    let vm = vertex_matrix(&sys)?;
    let mut ok = 0;
    for i in 0..vm.orders().len() {
        let v = vm.vertex(i)?;
        if wst_satisfied(&v).inside && mmtp_satisfied(&v)?.inside && lop_membership_lp(&v)?.inside {
            ok += 1;
        }
    }
    Ok(Check {
        name: "vertex self-membership",
        passed: ok == 120 && vm.orders().len() == 120,
        detail: format!("{ok}/{} vertices inside WST, facets and LP", vm.orders().len()),
    })
}

pub fn check_tournaments() -> Result<Check> {
    let (t3, w3, f3) = count_transitive_tournaments(3)?;
    let (t5, w5, f5) = count_transitive_tournaments(5)?;
    Ok(Check {
        name: "tournament enumeration",
        passed: (t3, w3, f3) == (8, 6, 6) && (t5, w5, f5) == (1024, 120, 120),
        detail: format!("n=3: {w3}/{t3} transitive (facets {f3}); n=5: {w5}/{t5} transitive (facets {f5})"),
    })
}

/// Facet and LP membership on uniform random points at n=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgreementStats {
    pub points: usize,
    pub outside_band: usize,
    pub agree_outside_band: usize,
    pub disagree_in_band: usize,
}

pub fn facet_lp_agreement(points: usize, seed: u64) -> Result<AgreementStats> {
    let sys = ChoiceSystem::lettered(5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = AgreementStats { points, outside_band: 0, agree_outside_band: 0, disagree_in_band: 0 };
    for _ in 0..points {
        let p: Vec<f64> = (0..sys.num_pairs()).map(|_| rng.random::<f64>()).collect();
        let p = BinaryProbVector::new(sys.clone(), p)?;
        let agree = mmtp_satisfied(&p)?.inside == lop_membership_lp(&p)?.inside;
        if facet_slack(&p).abs() > 10.0 * LP_TOLERANCE {
            s.outside_band += 1;
            s.agree_outside_band += agree as usize;
        } else if !agree {
            s.disagree_in_band += 1;
        }
    }
    Ok(s)
}

pub fn check_agreement(points: usize, seed: u64) -> Result<Check> {
    let s = facet_lp_agreement(points, seed)?;
    Ok(Check {
        name: "facet/LP agreement",
        passed: s.agree_outside_band == s.outside_band,
        detail: format!(
            "{}/{} points outside the 10*tau band agree ({} boundary disagreements)",
            s.agree_outside_band, s.outside_band, s.disagree_in_band
        ),
    })
}

/// Prior satisfaction proportions at n=5 under the uniform prior.
pub fn prior_volumes(samples: u64, seed: u64) -> Result<(f64, f64)> {
    let data = ChoiceDataset::empty(ChoiceSystem::lettered(5)?);
    let cfg = BfConfig {
        max_samples: samples,
        batch_size: 10_000.min(samples),
        target_rel_se: 1e-9,
        master_seed: seed,
        ..BfConfig::default()
    };
    let wst = estimate_bf(&data, Model::Wst, &cfg)?;
    let mmtp = estimate_bf(&data, Model::Mmtp, &cfg)?;
    Ok((wst.prior_proportion(), mmtp.prior_proportion()))
}

pub fn check_prior_volumes(samples: u64, seed: u64) -> Result<Check> {
    let start = Instant::now();
    let (w, m) = prior_volumes(samples, seed)?;
    Ok(Check {
        name: "prior volumes",
        passed: (w - WST_PRIOR_VOLUME_N5).abs() <= 0.003 && (m - MMTP_PRIOR_VOLUME_N5).abs() <= 0.005,
        detail: format!(
            "WST {w:.4} (exact {WST_PRIOR_VOLUME_N5:.4}), MMTP {m:.4} (expected ~0.05), {samples} draws in {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    })
}

pub fn check_prompts() -> Result<Check> {
    let set = builtin_gamble_set("davis-stober-1").expect("built-in set");
    let (_, a) = set.gamble("A")?;
    let (_, b) = set.gamble("B")?;
    let mut matched = 0;
    let mut first_bad = None;
    for (key, want) in REFERENCE_QUESTIONS {
        let got = render_question(a, b, key.parse::<PromptFormat>()?);
        if got == want {
            matched += 1;
        } else if first_bad.is_none() {
            first_bad = Some(format!("{key}: got {got:?}"));
        }
    }
    Ok(Check {
        name: "prompt fidelity",
        passed: matched == 6,
        detail: first_bad.unwrap_or_else(|| format!("{matched}/6 reference questions reproduced")),
    })
}

pub fn check_schedule_arithmetic() -> Result<Check> {
    let sets = builtin_gamble_sets();
    let ids: Vec<String> = (1..=10).map(|i| format!("responder-{i}")).collect();
    let seeds: Vec<u64> = (1..=10).collect();
    let trials = schedule_trials(&sets, &PromptFormat::all(), &ids, &seeds)?;
    let mut per_unit: HashMap<(String, u64), usize> = HashMap::new();
    for t in &trials {
        *per_unit.entry((t.cell().to_string(), t.seed)).or_default() += 1;
    }
    let cells = per_unit.keys().map(|(c, _)| c).collect::<std::collections::HashSet<_>>().len();
    let all_twenty = per_unit.values().all(|&n| n == 20);
    let opportunities = sets.len() * PromptFormat::all().len();
    Ok(Check {
        name: "schedule arithmetic",
        passed: trials.len() == 60_000 && all_twenty && 2 * cells == 600 && opportunities == 30,
        detail: format!(
            "{} trials, 20 per unit: {all_twenty}, {} Bayes factors, {opportunities} opportunities per model",
            trials.len(),
            2 * cells
        ),
    })
}

pub fn run_validation(opts: &ValidationOptions) -> Result<ValidationReport> {
    Ok(ValidationReport {
        checks: vec![
            check_vertices()?,
            check_tournaments()?,
            check_agreement(opts.lp_points, opts.seed)?,
            check_prior_volumes(opts.samples, opts.seed)?,
            check_prompts()?,
            check_schedule_arithmetic()?,
        ],
    })
}
