//! Encompassing-prior Monte Carlo Bayes factors.
//!
//! The unconstrained model puts an independent `Beta(alpha, alpha)` prior on
//! every pair probability. With binomial pair data the posterior is again a
//! product of Betas. For a constrained region `R` nested in the unconstrained
//! model,
//!
//! ```text
//! BF(R vs unconstrained) = P(p in R | data) / P(p in R)
//! ```
//!
//! and both probabilities are estimated by the hit rate of independent
//! draws. Draws are produced in fixed-size batches, each batch seeded from
//! `(master_seed, batch index)`, so the estimate does not depend on how many
//! threads evaluate the batches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{BinaryProbVector, ChoiceDataset, ChoiceSystem};
use crate::error::{Error, Result};
use crate::polytope::{LpOracle, TripleChecker, MAX_FACET_ALTERNATIVES, MAX_LP_ALTERNATIVES};

/// Jeffreys' threshold for substantial evidence in favour of the constrained model.
pub const SUBSTANTIAL_FOR: f64 = 3.16;
/// Jeffreys' threshold for substantial evidence against it.
pub const SUBSTANTIAL_AGAINST: f64 = 0.316;

/// Confidence used for one-sided bounds when a hit count is zero.
const DEGENERATE_BOUND_LEVEL: f64 = 0.95;

/// Batches evaluated per parallel round before the stopping rule is checked.
const ROUND_BATCHES: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Model {
    Wst,
    Mmtp,
    /// The encompassing model itself; its Bayes factor is identically 1.
    Unconstrained,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Wst => "WST",
            Model::Mmtp => "MMTP",
            Model::Unconstrained => "UNCONSTRAINED",
        }
    }
}

/// How MMTP membership is decided inside the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MmtpOracle {
    /// Triangle facets; exact for up to five alternatives.
    #[default]
    Facets,
    /// Explicit mixture LP over all linear orders; up to seven alternatives.
    Lp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BfConfig {
    pub prior_alpha: f64,
    pub max_samples: u64,
    pub target_rel_se: f64,
    pub batch_size: u64,
    pub master_seed: u64,
    pub mmtp_oracle: MmtpOracle,
}

impl Default for BfConfig {
    fn default() -> Self {
        Self {
            prior_alpha: 1.0,
            max_samples: 10_000_000,
            target_rel_se: 0.01,
            batch_size: 10_000,
            master_seed: 0,
            mmtp_oracle: MmtpOracle::Facets,
        }
    }
}

impl BfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_alpha > 0.0 && self.prior_alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "prior_alpha must be positive, got {}",
                self.prior_alpha
            )));
        }
        if !(self.target_rel_se > 0.0 && self.target_rel_se < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target_rel_se must lie in (0,1), got {}",
                self.target_rel_se
            )));
        }
        if self.max_samples == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("max_samples and batch_size must be positive".into()));
        }
        if self.batch_size > self.max_samples {
            return Err(Error::InvalidConfig(format!(
                "batch_size {} exceeds max_samples {}",
                self.batch_size, self.max_samples
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, master_seed: u64) -> Self {
        Self { master_seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SubstantialFor,
    Inconclusive,
    SubstantialAgainst,
    Degenerate,
}

/// Jeffreys classification; both thresholds belong to the inconclusive band.
pub fn classify(bf: f64) -> Verdict {
    if bf > SUBSTANTIAL_FOR {
        Verdict::SubstantialFor
    } else if bf < SUBSTANTIAL_AGAINST {
        Verdict::SubstantialAgainst
    } else {
        Verdict::Inconclusive
    }
}

/// One-sided bound reported when a hit count is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "side", content = "value", rename_all = "snake_case")]
pub enum BfBound {
    /// BF is below this value at 95% confidence.
    Upper(f64),
    /// BF is above this value at 95% confidence.
    Lower(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesFactorResult {
    pub model: Model,
    /// Ratio of hit proportions; `+inf` / `0` / `NaN` only for degenerate runs.
    #[serde(with = "nonfinite")]
    pub bf: f64,
    pub prior_hits: u64,
    pub prior_samples: u64,
    pub post_hits: u64,
    pub post_samples: u64,
    /// Relative standard error of `bf`, both proportions combined in quadrature.
    #[serde(with = "nonfinite")]
    pub rel_se: f64,
    pub verdict: Verdict,
    pub bound: Option<BfBound>,
}

impl BayesFactorResult {
    pub fn prior_proportion(&self) -> f64 {
        self.prior_hits as f64 / self.prior_samples as f64
    }

    pub fn post_proportion(&self) -> f64 {
        self.post_hits as f64 / self.post_samples as f64
    }

    /// Monte Carlo standard error of `bf`.
    pub fn standard_error(&self) -> f64 {
        self.bf * self.rel_se
    }

    pub fn is_degenerate(&self) -> bool {
        self.verdict == Verdict::Degenerate
    }

    /// True when the evidence places BF below the "against" threshold, either
    /// by point estimate or by a degenerate run's upper bound.
    pub fn substantially_against(&self) -> bool {
        match (self.verdict, self.bound) {
            (Verdict::SubstantialAgainst, _) => true,
            (Verdict::Degenerate, Some(BfBound::Upper(u))) => u < SUBSTANTIAL_AGAINST,
            _ => false,
        }
    }
}

fn rel_se(hits: u64, n: u64) -> f64 {
    if hits == 0 || n == 0 {
        return f64::INFINITY;
    }
    let p = hits as f64 / n as f64;
    ((1.0 - p) / (p * n as f64)).sqrt()
}

/// One-sided upper confidence bound on a proportion after zero hits in `n` draws.
fn zero_hit_upper(n: u64) -> f64 {
    1.0 - (1.0 - DEGENERATE_BOUND_LEVEL).powf(1.0 / n as f64)
}

/// Region membership used inside the sampler.
enum Region {
    Wst(TripleChecker),
    MmtpFacets(TripleChecker),
    MmtpLp(Box<LpOracle>),
    Everything,
}

impl Region {
    fn new(system: &ChoiceSystem, model: Model, oracle: MmtpOracle) -> Result<Self> {
        let n = system.n();
        Ok(match (model, oracle) {
            (Model::Wst, _) => Region::Wst(TripleChecker::new(n)),
            (Model::Mmtp, MmtpOracle::Facets) => {
                if n > MAX_FACET_ALTERNATIVES {
                    return Err(Error::TooManyAlternatives {
                        what: "facet-based MMTP Bayes factor (set mmtp_oracle = \"lp\")",
                        n,
                        limit: MAX_FACET_ALTERNATIVES,
                    });
                }
                Region::MmtpFacets(TripleChecker::new(n))
            }
            (Model::Mmtp, MmtpOracle::Lp) => {
                if n > MAX_LP_ALTERNATIVES {
                    return Err(Error::TooManyAlternatives {
                        what: "LP-based MMTP Bayes factor",
                        n,
                        limit: MAX_LP_ALTERNATIVES,
                    });
                }
                Region::MmtpLp(Box::new(LpOracle::new(system)?))
            }
            (Model::Unconstrained, _) => Region::Everything,
        })
    }

    fn contains(&self, p: &[f64]) -> Result<bool> {
        Ok(match self {
            Region::Wst(c) => c.wst_violation(p).is_none(),
            Region::MmtpFacets(c) => c.facet_violation(p).is_none(),
            Region::MmtpLp(o) => o.contains(p)?,
            Region::Everything => true,
        })
    }
}

/// Product-of-Betas sampler over canonical pairs.
#[derive(Debug, Clone)]
struct PairBetas {
    dists: Vec<Beta<f64>>,
}

impl PairBetas {
    fn prior(system: &ChoiceSystem, alpha: f64) -> Result<Self> {
        let d = Beta::new(alpha, alpha).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(Self { dists: vec![d; system.num_pairs()] })
    }

    fn posterior(data: &ChoiceDataset, alpha: f64) -> Result<Self> {
        let dists = data
            .counts()
            .iter()
            .map(|c| {
                Beta::new(alpha + c.wins_ab as f64, alpha + c.wins_ba as f64)
                    .map_err(|e| Error::InvalidConfig(e.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(Self { dists })
    }

    fn fill<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (slot, d) in out.iter_mut().zip(&self.dists) {
            *slot = d.sample(rng);
        }
    }
}

/// Draw one point from the encompassing prior.
pub fn prior_sample<R: rand::Rng + ?Sized>(
    system: &ChoiceSystem,
    cfg: &BfConfig,
    rng: &mut R,
) -> Result<BinaryProbVector> {
    let betas = PairBetas::prior(system, cfg.prior_alpha)?;
    let mut p = vec![0.0; system.num_pairs()];
    betas.fill(rng, &mut p);
    BinaryProbVector::new(system.clone(), p)
}

/// Draw one point from the conjugate posterior given pair counts.
pub fn posterior_sample<R: rand::Rng + ?Sized>(
    data: &ChoiceDataset,
    cfg: &BfConfig,
    rng: &mut R,
) -> Result<BinaryProbVector> {
    let betas = PairBetas::posterior(data, cfg.prior_alpha)?;
    let mut p = vec![0.0; data.system().num_pairs()];
    betas.fill(rng, &mut p);
    BinaryProbVector::new(data.system().clone(), p)
}

/// RNG for one batch of one sampling stream (0 = prior, 1 = posterior).
fn batch_rng(master_seed: u64, batch: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(batch * 2 + stream);
    rng
}

fn count_hits(
    betas: &PairBetas,
    region: &Region,
    mut rng: ChaCha8Rng,
    draws: u64,
    buf: &mut [f64],
) -> Result<u64> {
    let mut hits = 0;
    for _ in 0..draws {
        betas.fill(&mut rng, buf);
        if region.contains(buf)? {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Estimate the Bayes factor of `model` against the unconstrained model.
pub fn estimate_bf(data: &ChoiceDataset, model: Model, cfg: &BfConfig) -> Result<BayesFactorResult> {
    cfg.validate()?;
    let system = data.system();
    let region = Region::new(system, model, cfg.mmtp_oracle)?;
    let npairs = system.num_pairs();

    if model == Model::Unconstrained {
        return Ok(BayesFactorResult {
            model,
            bf: 1.0,
            prior_hits: 0,
            prior_samples: 0,
            post_hits: 0,
            post_samples: 0,
            rel_se: 0.0,
            verdict: classify(1.0),
            bound: None,
        });
    }

    let prior = PairBetas::prior(system, cfg.prior_alpha)?;
    let post = PairBetas::posterior(data, cfg.prior_alpha)?;
    let total_batches = cfg.max_samples.div_ceil(cfg.batch_size);

    let (mut prior_hits, mut post_hits, mut samples) = (0u64, 0u64, 0u64);
    let mut next_batch = 0u64;
    'rounds: while next_batch < total_batches {
        let end = (next_batch + ROUND_BATCHES).min(total_batches);
        let results: Vec<(u64, u64, u64)> = (next_batch..end)
            .into_par_iter()
            .map_init(
                || vec![0.0; npairs],
                |buf, b| {
                    let draws = cfg.batch_size.min(cfg.max_samples - b * cfg.batch_size);
                    let ph = count_hits(&prior, &region, batch_rng(cfg.master_seed, b, 0), draws, buf)?;
                    let qh = count_hits(&post, &region, batch_rng(cfg.master_seed, b, 1), draws, buf)?;
                    Ok((draws, ph, qh))
                },
            )
            .collect::<Result<_>>()?;
        for (draws, ph, qh) in results {
            samples += draws;
            prior_hits += ph;
            post_hits += qh;
            next_batch += 1;
            if rel_se(prior_hits, samples) <= cfg.target_rel_se
                && rel_se(post_hits, samples) <= cfg.target_rel_se
            {
                break 'rounds;
            }
        }
    }

    Ok(finish(model, prior_hits, post_hits, samples))
}

fn finish(model: Model, prior_hits: u64, post_hits: u64, samples: u64) -> BayesFactorResult {
    let prior_p = prior_hits as f64 / samples as f64;
    let post_p = post_hits as f64 / samples as f64;
    let bf = if prior_hits == 0 && post_hits == 0 {
        f64::NAN
    } else if prior_hits == 0 {
        f64::INFINITY
    } else {
        post_p / prior_p
    };
    let combined = rel_se(prior_hits, samples).hypot(rel_se(post_hits, samples));
    let (verdict, bound) = if prior_hits == 0 || post_hits == 0 {
        let bound = match (prior_hits, post_hits) {
            (0, 0) => None,
            (_, 0) => Some(BfBound::Upper(zero_hit_upper(samples) / prior_p)),
            (0, _) => Some(BfBound::Lower(post_p / zero_hit_upper(samples))),
            _ => unreachable!(),
        };
        (Verdict::Degenerate, bound)
    } else {
        (classify(bf), None)
    };
    BayesFactorResult {
        model,
        bf,
        prior_hits,
        prior_samples: samples,
        post_hits,
        post_samples: samples,
        rel_se: combined,
        verdict,
        bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BestModel {
    None,
    Wst,
    Mmtp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestModelOutcome {
    pub best: BestModel,
    /// Set when a degenerate input forced `NONE`.
    pub note: Option<String>,
}

/// Pick the transitivity model with the larger Bayes factor, provided it
/// shows substantial support. Ties go to MMTP.
pub fn best_model(wst: &BayesFactorResult, mmtp: &BayesFactorResult) -> BestModelOutcome {
    let degenerate: Vec<&str> = [wst, mmtp]
        .iter()
        .filter(|r| r.is_degenerate())
        .map(|r| r.model.name())
        .collect();
    if !degenerate.is_empty() {
        return BestModelOutcome {
            best: BestModel::None,
            note: Some(format!("degenerate Bayes factor for {}", degenerate.join(" and "))),
        };
    }
    let best = if mmtp.bf >= wst.bf && mmtp.bf > SUBSTANTIAL_FOR {
        BestModel::Mmtp
    } else if wst.bf > mmtp.bf && wst.bf > SUBSTANTIAL_FOR {
        BestModel::Wst
    } else {
        BestModel::None
    };
    BestModelOutcome { best, note: None }
}

/// Serialises non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`.
pub(crate) mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("invalid float {other:?}"))),
            },
        }
    }
}
