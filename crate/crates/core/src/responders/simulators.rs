//! Analytically characterised choosers.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::choice::{pairs_for, BinaryProbVector, LinearOrder};
use crate::error::{Error, Result};
use crate::experiment::{parse_response, GambleSet, Outcome, TrialRecord};

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedOrder {
    /// Gamble labels, most preferred first.
    pub ranking: Vec<String>,
    pub weight: f64,
}

/// Parameters of a simulated chooser. Every simulator decides by gamble
/// identity, never by presentation slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Simulator {
    /// Samples a linear order from `orders` on every trial.
    MixtureOrders { orders: Vec<WeightedOrder> },
    /// `P(x over y) = logistic((u(x) - u(y)) / scale)`.
    FechnerUtility { utilities: BTreeMap<String, f64>, scale: f64 },
    /// Prefers the cycle-forward gamble on adjacent cycle members and the
    /// earlier gamble of `order` (label order by default) elsewhere, each
    /// with probability `gamma`.
    Cyclic {
        gamma: f64,
        cycle: Vec<String>,
        #[serde(default)]
        order: Option<Vec<String>>,
    },
    /// `P(x over y) = logistic((EV(x) - EV(y)) / temperature)`.
    EvSoftmax { temperature: f64 },
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Simulator {
    pub fn validate(&self, id: &str) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidResponder { id: id.to_string(), reason });
        match self {
            Simulator::MixtureOrders { orders } => {
                if orders.is_empty() {
                    return bad("mixture needs at least one order".into());
                }
                if let Some(o) = orders.iter().find(|o| !(o.weight >= 0.0 && o.weight.is_finite())) {
                    return bad(format!("negative or non-finite weight {}", o.weight));
                }
                let total: f64 = orders.iter().map(|o| o.weight).sum();
                if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                    return bad(format!("mixture weights sum to {total}, expected 1"));
                }
            }
            Simulator::FechnerUtility { utilities, scale } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return bad(format!("scale must be positive, got {scale}"));
                }
                if utilities.values().any(|u| !u.is_finite()) {
                    return bad("utilities must be finite".into());
                }
            }
            Simulator::Cyclic { gamma, cycle, .. } => {
                if !(0.0..=1.0).contains(gamma) {
                    return bad(format!("gamma {gamma} outside [0,1]"));
                }
                if cycle.len() < 3 {
                    return bad("cycle needs at least three gambles".into());
                }
            }
            Simulator::EvSoftmax { temperature } => {
                if !(*temperature > 0.0 && temperature.is_finite()) {
                    return bad(format!("temperature must be positive, got {temperature}"));
                }
            }
        }
        Ok(())
    }

    /// Choice probability matrix `m[x][y] = P(x over y)` for a set.
    fn pair_matrix(&self, id: &str, set: &GambleSet) -> Result<Vec<Vec<f64>>> {
        self.validate(id)?;
        let n = set.len();
        let sys = set.system();
        let resolve = |label: &str| {
            sys.index_of(label).ok_or_else(|| Error::InvalidResponder {
                id: id.to_string(),
                reason: format!("label {label:?} not in gamble set {:?}", set.name()),
            })
        };
        let mut m = vec![vec![0.0; n]; n];
        // Each pair is evaluated once and mirrored, so P(x,y) + P(y,x) = 1.
        let mut fill = |f: &dyn Fn(usize, usize) -> f64| {
            for x in 0..n {
                for y in x + 1..n {
                    let v = f(x, y).clamp(0.0, 1.0);
                    m[x][y] = v;
                    m[y][x] = 1.0 - v;
                }
            }
        };
        match self {
            Simulator::MixtureOrders { orders } => {
                let parsed = orders
                    .iter()
                    .map(|o| {
                        LinearOrder::from_labels(sys, &o.ranking)
                            .map(|lo| (lo.positions(), o.weight))
                            .map_err(|e| Error::InvalidResponder { id: id.to_string(), reason: e.to_string() })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let total: f64 = parsed.iter().map(|(_, w)| w).sum();
                fill(&|x, y| {
                    let mass: f64 = parsed.iter().filter(|(pos, _)| pos[x] < pos[y]).map(|(_, w)| w).sum();
                    mass / total
                });
            }
            Simulator::FechnerUtility { utilities, scale } => {
                let u = sys
                    .labels()
                    .iter()
                    .map(|l| {
                        utilities.get(l).copied().ok_or_else(|| Error::InvalidResponder {
                            id: id.to_string(),
                            reason: format!("no utility for gamble {l:?}"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                fill(&|x, y| logistic((u[x] - u[y]) / scale));
            }
            Simulator::Cyclic { gamma, cycle, order } => {
                let cyc = cycle.iter().map(|l| resolve(l)).collect::<Result<Vec<_>>>()?;
                let order_pos = match order {
                    Some(o) => LinearOrder::from_labels(sys, o)
                        .map_err(|e| Error::InvalidResponder { id: id.to_string(), reason: e.to_string() })?
                        .positions(),
                    None => (0..n).collect(),
                };
                let k = cyc.len();
                let forward = |x: usize, y: usize| (0..k).any(|i| cyc[i] == x && cyc[(i + 1) % k] == y);
                fill(&|x, y| {
                    if forward(x, y) {
                        *gamma
                    } else if forward(y, x) {
                        1.0 - gamma
                    } else if order_pos[x] < order_pos[y] {
                        *gamma
                    } else {
                        1.0 - gamma
                    }
                });
            }
            Simulator::EvSoftmax { temperature } => {
                let ev: Vec<f64> = set.gambles().iter().map(|g| g.expected_value()).collect();
                fill(&|x, y| logistic((ev[x] - ev[y]) / temperature));
            }
        }
        Ok(m)
    }

    pub fn induced_probabilities(&self, id: &str, set: &GambleSet) -> Result<BinaryProbVector> {
        let m = self.pair_matrix(id, set)?;
        let p = pairs_for(set.len()).into_iter().map(|pr| m[pr.a][pr.b]).collect();
        BinaryProbVector::new(set.system().clone(), p)
    }
}

/// A simulator bound to one gamble set, ready to answer trials.
#[derive(Debug, Clone)]
pub(crate) struct BoundSimulator {
    matrix: Vec<Vec<f64>>,
    /// For mixtures: cumulative weights and rank positions of each order.
    mixture: Option<Vec<(f64, Vec<usize>)>>,
}

impl BoundSimulator {
    pub(crate) fn new(sim: &Simulator, id: &str, set: &GambleSet) -> Result<Self> {
        let matrix = sim.pair_matrix(id, set)?;
        let mixture = match sim {
            Simulator::MixtureOrders { orders } => {
                let mut acc = 0.0;
                let mut cum = Vec::with_capacity(orders.len());
                for o in orders {
                    acc += o.weight;
                    let pos = LinearOrder::from_labels(set.system(), &o.ranking)?.positions();
                    cum.push((acc, pos));
                }
                Some(cum)
            }
            _ => None,
        };
        Ok(Self { matrix, mixture })
    }

    pub(crate) fn respond(&self, set: &GambleSet, trial: &TrialRecord, stream_seed: u64) -> Result<Outcome> {
        let (x, _) = set.gamble(&trial.first)?;
        let (y, _) = set.gamble(&trial.second)?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
        let first_wins = match &self.mixture {
            Some(cum) => {
                let u: f64 = rng.random::<f64>() * cum.last().map_or(1.0, |c| c.0);
                let (_, pos) = cum.iter().find(|(c, _)| u < *c).unwrap_or_else(|| cum.last().expect("nonempty"));
                pos[x] < pos[y]
            }
            None => {
                // Draw against the canonical orientation so the same stream
                // picks the same gamble whichever slot it occupies.
                let (lo, hi) = (x.min(y), x.max(y));
                let lo_wins = rng.random::<f64>() < self.matrix[lo][hi];
                lo_wins == (x == lo)
            }
        };
        // Simulated single-token answer, parsed like a real one.
        Ok(parse_response(if first_wins { "1" } else { "2" }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::builtin_gamble_set;

    fn set() -> GambleSet {
        builtin_gamble_set("tversky-1").unwrap()
    }

    fn wo(r: &str, w: f64) -> WeightedOrder {
        WeightedOrder { ranking: r.chars().map(|c| c.to_string()).collect(), weight: w }
    }

    #[test]
    fn mixture_symmetric_pair() {
        let sim = Simulator::MixtureOrders { orders: vec![wo("ABCDE", 0.5), wo("EDCBA", 0.5)] };
        let p = sim.induced_probabilities("m", &set()).unwrap();
        assert!(p.values().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn mixture_uniform_over_three() {
        let s3 = GambleSet::new("three", set().gambles()[..3].to_vec()).unwrap();
        let orders = ["ABC", "ACB", "BAC", "BCA", "CAB", "CBA"].iter().map(|o| wo(o, 1.0 / 6.0)).collect();
        let p = Simulator::MixtureOrders { orders }.induced_probabilities("m", &s3).unwrap();
        assert!(p.values().iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn fechner_values() {
        let s3 = GambleSet::new("three", set().gambles()[..3].to_vec()).unwrap();
        let utilities = [("A", 2.0), ("B", 1.0), ("C", 0.0)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let p = Simulator::FechnerUtility { utilities, scale: 1.0 }.induced_probabilities("f", &s3).unwrap();
        // (AB, AC, BC)
        assert!((p.values()[1] - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert!((p.values()[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        let flat = [("A", 1.0), ("B", 1.0), ("C", 0.0)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let p = Simulator::FechnerUtility { utilities: flat, scale: 1.0 }.induced_probabilities("f", &s3).unwrap();
        assert_eq!(p.values()[0], 0.5);
    }

    #[test]
    fn cyclic_triple() {
        let sim = Simulator::Cyclic { gamma: 0.9, cycle: vec!["A".into(), "B".into(), "C".into()], order: None };
        let p = sim.induced_probabilities("c", &set()).unwrap();
        let ab = p.prob(0, 1).unwrap();
        let bc = p.prob(1, 2).unwrap();
        let ca = p.prob(2, 0).unwrap();
        assert_eq!((ab, bc, ca), (0.9, 0.9, 0.9));
        let lhs = ab + bc - p.prob(0, 2).unwrap();
        assert!((lhs - 1.7).abs() < 1e-12);
        // off-cycle pairs follow label order
        assert_eq!(p.prob(0, 4).unwrap(), 0.9);
        assert!((p.prob(4, 3).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ev_softmax_prefers_higher_ev() {
        let ds = builtin_gamble_set("davis-stober-1").unwrap();
        let p = Simulator::EvSoftmax { temperature: 0.5 }.induced_probabilities("e", &ds).unwrap();
        // EV(A) = 7/24*25.43 ≈ 7.417 < EV(E) = 11/24*20.35 ≈ 9.327
        assert!(p.prob(4, 0).unwrap() > 0.95);
    }

    #[test]
    fn invalid_parameters() {
        assert!(Simulator::MixtureOrders { orders: vec![wo("ABCDE", 0.7)] }.validate("x").is_err());
        assert!(Simulator::MixtureOrders { orders: vec![wo("ABCDE", 1.5), wo("EDCBA", -0.5)] }
            .validate("x")
            .is_err());
        assert!(Simulator::EvSoftmax { temperature: 0.0 }.validate("x").is_err());
        assert!(Simulator::Cyclic { gamma: 1.2, cycle: vec!["A".into(), "B".into(), "C".into()], order: None }
            .validate("x")
            .is_err());
        let bad_label = Simulator::MixtureOrders { orders: vec![wo("ABCDZ", 1.0)] };
        assert!(bad_label.induced_probabilities("x", &set()).is_err());
        let missing = Simulator::FechnerUtility { utilities: BTreeMap::new(), scale: 1.0 };
        assert!(missing.induced_probabilities("x", &set()).is_err());
    }
}
