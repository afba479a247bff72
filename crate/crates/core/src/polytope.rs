//! Membership tests for the two transitivity regions.
//!
//! * Weak stochastic transitivity: `P(a,b) >= 1/2` and `P(b,c) >= 1/2` imply
//!   `P(a,c) >= 1/2` for every ordered triple. On tie-free vectors this is
//!   acyclicity of the majority tournament.
//! * Mixture of transitive preferences: membership in the linear ordering
//!   polytope, the convex hull of the 0/1 indicator vectors of all linear
//!   orders. For up to five alternatives the triangle inequalities
//!   `P(a,b) + P(b,c) - P(a,c) <= 1` describe it completely; for up to seven
//!   an explicit LP over the vertices decides membership.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::choice::{pairs_for, BinaryProbVector, ChoiceSystem, LinearOrder, PairTable};
use crate::error::{Error, Result};
use crate::lp;

/// Largest system for which the triangle facets are a complete description.
pub const MAX_FACET_ALTERNATIVES: usize = 5;
/// Largest system the LP oracle accepts (7! = 5040 vertices).
pub const MAX_LP_ALTERNATIVES: usize = 7;
/// Absolute residual below which the LP oracle reports feasibility.
pub const LP_TOLERANCE: f64 = 1e-9;
/// Floating-point slack on the triangle inequalities.
pub const FACET_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `a -> b -> c -> a` in the (weak) majority relation.
    Cycle { a: usize, b: usize, c: usize },
    /// `P(a,b) + P(b,c) - P(a,c) = lhs > 1`.
    Facet { a: usize, b: usize, c: usize, lhs: f64 },
    /// No mixture of linear orders reproduces the point.
    LpInfeasible { residual: f64 },
}

impl Witness {
    pub fn describe(&self, system: &ChoiceSystem) -> String {
        let l = |i: usize| system.label(i);
        match *self {
            Witness::Cycle { a, b, c } => {
                format!("cycle {}->{}->{}->{}", l(a), l(b), l(c), l(a))
            }
            Witness::Facet { a, b, c, lhs } => format!(
                "P{}{} + P{}{} - P{}{} = {lhs:.6} > 1",
                l(a),
                l(b),
                l(b),
                l(c),
                l(a),
                l(c)
            ),
            Witness::LpInfeasible { residual } => {
                format!("no mixture of linear orders (residual {residual:.3e})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub inside: bool,
    pub witness: Option<Witness>,
}

impl MembershipVerdict {
    fn inside() -> Self {
        Self { inside: true, witness: None }
    }

    fn outside(w: Witness) -> Self {
        Self { inside: false, witness: Some(w) }
    }
}

/// All `n!` rankings in lexicographic order of their index sequences.
pub fn linear_orders(n: usize) -> Result<Vec<LinearOrder>> {
    if n > crate::choice::MAX_ALTERNATIVES {
        return Err(Error::TooManyAlternatives {
            what: "linear order enumeration",
            n,
            limit: crate::choice::MAX_ALTERNATIVES,
        });
    }
    (0..n).permutations(n).map(LinearOrder::new).collect()
}

pub fn enumerate_linear_orders(system: &ChoiceSystem) -> Result<Vec<LinearOrder>> {
    linear_orders(system.n())
}

/// Ordered triples of distinct alternatives, lexicographic.
pub(crate) fn ordered_triples(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..n).flat_map(move |a| {
        (0..n).flat_map(move |b| (0..n).map(move |c| (a, b, c)))
    })
    .filter(|&(a, b, c)| a != b && b != c && a != c)
}

/// Precomputed predicate evaluator for a fixed system size.
#[derive(Debug, Clone)]
pub struct TripleChecker {
    table: PairTable,
    triples: Vec<(usize, usize, usize)>,
}

impl TripleChecker {
    pub fn new(n: usize) -> Self {
        Self { table: PairTable::new(n), triples: ordered_triples(n).collect() }
    }

    /// First ordered triple violating the weak-inequality form of WST.
    pub fn wst_violation(&self, p: &[f64]) -> Option<(usize, usize, usize)> {
        self.triples.iter().copied().find(|&(a, b, c)| {
            self.table.prob(p, a, b) >= 0.5
                && self.table.prob(p, b, c) >= 0.5
                && self.table.prob(p, a, c) < 0.5
        })
    }

    /// First ordered triple violating a triangle facet, with its left-hand side.
    pub fn facet_violation(&self, p: &[f64]) -> Option<(usize, usize, usize, f64)> {
        self.triples.iter().find_map(|&(a, b, c)| {
            let lhs = self.table.prob(p, a, b) + self.table.prob(p, b, c) - self.table.prob(p, a, c);
            (lhs > 1.0 + FACET_EPS).then_some((a, b, c, lhs))
        })
    }

    /// Smallest slack over every triangle facet and every bound `0 <= p <= 1`.
    pub fn facet_slack(&self, p: &[f64]) -> f64 {
        let tri = self
            .triples
            .iter()
            .map(|&(a, b, c)| {
                1.0 - (self.table.prob(p, a, b) + self.table.prob(p, b, c) - self.table.prob(p, a, c))
            })
            .fold(f64::INFINITY, f64::min);
        let bounds = p.iter().map(|&v| v.min(1.0 - v)).fold(f64::INFINITY, f64::min);
        tri.min(bounds)
    }
}

pub fn wst_satisfied(p: &BinaryProbVector) -> MembershipVerdict {
    let checker = TripleChecker::new(p.system().n());
    match checker.wst_violation(p.values()) {
        None => MembershipVerdict::inside(),
        Some((a, b, c)) => MembershipVerdict::outside(Witness::Cycle { a, b, c }),
    }
}

pub fn mmtp_satisfied(p: &BinaryProbVector) -> Result<MembershipVerdict> {
    let n = p.system().n();
    if n > MAX_FACET_ALTERNATIVES {
        return Err(Error::TooManyAlternatives {
            what: "triangle-facet membership (use lop_membership_lp)",
            n,
            limit: MAX_FACET_ALTERNATIVES,
        });
    }
    let checker = TripleChecker::new(n);
    Ok(match checker.facet_violation(p.values()) {
        None => MembershipVerdict::inside(),
        Some((a, b, c, lhs)) => MembershipVerdict::outside(Witness::Facet { a, b, c, lhs }),
    })
}

/// Smallest slack of `p` over the triangle facets and probability bounds.
pub fn facet_slack(p: &BinaryProbVector) -> f64 {
    TripleChecker::new(p.system().n()).facet_slack(p.values())
}

/// Indicator vectors of all linear orders over a system.
#[derive(Debug, Clone)]
pub struct VertexMatrix {
    system: ChoiceSystem,
    orders: Vec<LinearOrder>,
    rows: Vec<Vec<u8>>,
}

impl VertexMatrix {
    pub fn system(&self) -> &ChoiceSystem {
        &self.system
    }

    pub fn orders(&self) -> &[LinearOrder] {
        &self.orders
    }

    /// One row per linear order; entry `(a,b)` is 1 iff `a` precedes `b`.
    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn vertex(&self, i: usize) -> Result<BinaryProbVector> {
        BinaryProbVector::new(
            self.system.clone(),
            self.rows[i].iter().map(|&v| f64::from(v)).collect(),
        )
    }
}

pub fn vertex_matrix(system: &ChoiceSystem) -> Result<VertexMatrix> {
    let n = system.n();
    if n > MAX_LP_ALTERNATIVES {
        return Err(Error::TooManyAlternatives {
            what: "vertex matrix",
            n,
            limit: MAX_LP_ALTERNATIVES,
        });
    }
    let orders = linear_orders(n)?;
    let pairs = pairs_for(n);
    let rows = orders
        .iter()
        .map(|o| {
            let pos = o.positions();
            pairs.iter().map(|pr| u8::from(pos[pr.a] < pos[pr.b])).collect()
        })
        .collect();
    Ok(VertexMatrix { system: system.clone(), orders, rows })
}

/// Outcome of the mixture feasibility problem.
#[derive(Debug, Clone)]
pub struct MixtureSolution {
    /// Weight on each linear order, indexed like [`VertexMatrix::orders`].
    pub theta: Vec<f64>,
    pub residual: f64,
}

impl MixtureSolution {
    pub fn feasible(&self) -> bool {
        self.residual <= LP_TOLERANCE
    }
}

/// Reusable LP membership oracle for one system size.
#[derive(Debug, Clone)]
pub struct LpOracle {
    vertices: VertexMatrix,
    /// Constraint rows: one per pair, then the normalisation row.
    constraint_rows: Vec<Vec<f64>>,
}

impl LpOracle {
    pub fn new(system: &ChoiceSystem) -> Result<Self> {
        let vertices = vertex_matrix(system)?;
        let npairs = system.num_pairs();
        let mut constraint_rows: Vec<Vec<f64>> = (0..npairs)
            .map(|k| vertices.rows.iter().map(|r| f64::from(r[k])).collect())
            .collect();
        constraint_rows.push(vec![1.0; vertices.rows.len()]);
        Ok(Self { vertices, constraint_rows })
    }

    pub fn vertices(&self) -> &VertexMatrix {
        &self.vertices
    }

    /// Find `theta >= 0`, `sum theta = 1`, `V^T theta = p`.
    pub fn solve(&self, p: &[f64]) -> Result<MixtureSolution> {
        if p.len() + 1 != self.constraint_rows.len() {
            return Err(Error::InvalidProbability(format!(
                "expected {} pair probabilities, got {}",
                self.constraint_rows.len() - 1,
                p.len()
            )));
        }
        let mut rhs = p.to_vec();
        rhs.push(1.0);
        let sol = lp::phase_one(&self.constraint_rows, &rhs)?;
        Ok(MixtureSolution { theta: sol.x, residual: sol.residual.max(sol.artificial_sum) })
    }

    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        Ok(self.solve(p)?.feasible())
    }

    pub fn verdict(&self, p: &[f64]) -> Result<MembershipVerdict> {
        let sol = self.solve(p)?;
        Ok(if sol.feasible() {
            MembershipVerdict::inside()
        } else {
            MembershipVerdict::outside(Witness::LpInfeasible { residual: sol.residual })
        })
    }
}

/// Decide MMTP membership by searching for an explicit mixture of linear orders.
pub fn lop_membership_lp(p: &BinaryProbVector) -> Result<MembershipVerdict> {
    LpOracle::new(p.system())?.verdict(p.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sys(n: usize) -> ChoiceSystem {
        ChoiceSystem::lettered(n).unwrap()
    }

    fn pv(n: usize, p: Vec<f64>) -> BinaryProbVector {
        BinaryProbVector::new(sys(n), p).unwrap()
    }

    #[test]
    fn order_counts() {
        assert_eq!(enumerate_linear_orders(&sys(3)).unwrap().len(), 6);
        assert_eq!(enumerate_linear_orders(&sys(5)).unwrap().len(), 120);
        assert!(linear_orders(9).is_err());
    }

    #[test]
    fn wst_examples() {
        assert!(wst_satisfied(&pv(3, vec![1.0, 1.0, 1.0])).inside);
        // (AB, AC, BC) = (0.9, 0.1, 0.9)
        let v = wst_satisfied(&pv(3, vec![0.9, 0.1, 0.9]));
        assert!(!v.inside);
        assert_eq!(v.witness, Some(Witness::Cycle { a: 0, b: 1, c: 2 }));
        assert_eq!(v.witness.unwrap().describe(&sys(3)), "cycle A->B->C->A");
    }

    #[test]
    fn wst_ties_use_weak_inequalities() {
        assert!(wst_satisfied(&pv(3, vec![0.5, 0.5, 0.5])).inside);
        // A ~ B, B > C, but C > A: the tie lets A >= B >= C chain to a violation.
        assert!(!wst_satisfied(&pv(3, vec![0.5, 0.4, 0.6])).inside);
        // A ~ B, A > C, B > C is fine.
        assert!(wst_satisfied(&pv(3, vec![0.5, 0.7, 0.7])).inside);
    }

    #[test]
    fn mmtp_examples() {
        let v = mmtp_satisfied(&pv(3, vec![0.9, 0.1, 0.9])).unwrap();
        assert!(!v.inside);
        match v.witness {
            Some(Witness::Facet { a: 0, b: 1, c: 2, lhs }) => assert!((lhs - 1.7).abs() < 1e-12),
            other => panic!("unexpected witness {other:?}"),
        }
        assert!(mmtp_satisfied(&pv(3, vec![0.5; 3])).unwrap().inside);
        assert!(mmtp_satisfied(&pv(6, vec![0.5; 15])).is_err());
    }

    #[test]
    fn vertex_rows_for_three() {
        let vm = vertex_matrix(&sys(3)).unwrap();
        let abc = vm.orders().iter().position(|o| o.ranking() == [0, 1, 2]).unwrap();
        let cba = vm.orders().iter().position(|o| o.ranking() == [2, 1, 0]).unwrap();
        assert_eq!(vm.rows()[abc], vec![1, 1, 1]);
        assert_eq!(vm.rows()[cba], vec![0, 0, 0]);
        assert!(vertex_matrix(&sys(8)).is_err());
    }

    #[test]
    fn vertex_rows_distinct_for_five() {
        let vm = vertex_matrix(&sys(5)).unwrap();
        assert_eq!(vm.rows().len(), 120);
        assert!(vm.rows().iter().all(|r| r.len() == 10));
        let distinct: std::collections::HashSet<_> = vm.rows().iter().collect();
        assert_eq!(distinct.len(), 120);
    }

    #[test]
    fn vertices_are_inside_every_region() {
        let vm = vertex_matrix(&sys(5)).unwrap();
        let oracle = LpOracle::new(&sys(5)).unwrap();
        for i in 0..vm.rows().len() {
            let v = vm.vertex(i).unwrap();
            assert!(wst_satisfied(&v).inside);
            assert!(mmtp_satisfied(&v).unwrap().inside);
            let sol = oracle.solve(v.values()).unwrap();
            assert!(sol.feasible());
            // a vertex is only reachable as its own unit mass
            assert!((sol.theta[i] - 1.0).abs() < 1e-9, "vertex {i}: {:?}", sol.theta);
        }
    }

    #[test]
    fn lp_rejects_three_cycle() {
        let v = lop_membership_lp(&pv(3, vec![0.9, 0.1, 0.9])).unwrap();
        assert!(!v.inside);
        assert!(matches!(v.witness, Some(Witness::LpInfeasible { residual }) if residual > 1e-3));
    }

    #[test]
    fn lp_guard() {
        assert!(lop_membership_lp(&pv(8, vec![0.5; 28])).is_err());
    }

    #[test]
    fn midpoints_of_vertices_are_inside() {
        let vm = vertex_matrix(&sys(5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let i = rng.random_range(0..120);
            let j = rng.random_range(0..120);
            let p: Vec<f64> = vm.rows()[i]
                .iter()
                .zip(&vm.rows()[j])
                .map(|(&x, &y)| 0.5 * f64::from(x) + 0.5 * f64::from(y))
                .collect();
            assert!(mmtp_satisfied(&pv(5, p)).unwrap().inside);
        }
    }

    #[test]
    fn lp_recovers_mixture_weights() {
        let oracle = LpOracle::new(&sys(4)).unwrap();
        let rows = oracle.vertices().rows();
        let weights = [(0usize, 0.3), (7, 0.5), (23, 0.2)];
        let p: Vec<f64> = (0..6)
            .map(|k| weights.iter().map(|&(i, w)| w * f64::from(rows[i][k])).sum())
            .collect();
        let sol = oracle.solve(&p).unwrap();
        assert!(sol.feasible());
        assert!((sol.theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(sol.theta.iter().all(|&t| t >= 0.0));
    }

    #[test]
    fn lp_handles_seven_alternatives() {
        let s = sys(7);
        let oracle = LpOracle::new(&s).unwrap();
        assert!(oracle.contains(&vec![0.5; 21]).unwrap());
        let mut p = vec![0.5; 21];
        // make A>B>C>A strongly
        p[0] = 0.95; // AB
        p[1] = 0.05; // AC
        p[6] = 0.95; // BC
        assert!(!oracle.contains(&p).unwrap());
    }
}
