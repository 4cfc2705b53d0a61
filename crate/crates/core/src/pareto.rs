//! Constrained multi-objective maximization of response models (NSGA-II).

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{fmt_sig, FactorSpec, MaterialAttributes, ProcessParams, N_PARAMS, PARAM_LABELS};
use crate::rsm::RegressionModel;

pub type Bounds = [(f64, f64); N_PARAMS];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("invalid optimization spec: {0}")]
    InvalidSpec(String),
    #[error("invalid NSGA-II config: {0}")]
    InvalidConfig(String),
    /// Carries the least-violating front.
    #[error("NoFeasibleSolution: no point satisfies every constraint")]
    NoFeasibleSolution(Box<ParetoFront>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub model: RegressionModel,
    pub lower_bound: f64,
}

/// All objectives are maximized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSpec {
    pub objectives: Vec<RegressionModel>,
    pub constraints: Vec<Constraint>,
    pub bounds: Bounds,
    pub attrs: MaterialAttributes,
}

pub fn bounds_from_factors(factors: &[FactorSpec]) -> Option<Bounds> {
    (factors.len() == N_PARAMS).then(|| std::array::from_fn(|i| (factors[i].low, factors[i].high)))
}

impl OptimizationSpec {
    pub fn validate(&self) -> Result<(), ParetoError> {
        let bad = |m: String| Err(ParetoError::InvalidSpec(m));
        if self.objectives.is_empty() {
            return bad("at least one objective required".into());
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("bounds for {} need low < high", PARAM_LABELS[i]));
            }
        }
        if self.constraints.iter().any(|c| !c.lower_bound.is_finite()) {
            return bad("constraint bounds must be finite".into());
        }
        Ok(())
    }

    /// Response columns reported for each solution: every distinct model name, sorted.
    pub fn response_models(&self) -> Vec<&RegressionModel> {
        let mut models: Vec<&RegressionModel> = self
            .objectives
            .iter()
            .chain(self.constraints.iter().map(|c| &c.model))
            .collect();
        models.sort_by(|a, b| a.response_name.cmp(&b.response_name));
        models.dedup_by(|a, b| a.response_name == b.response_name);
        models
    }

    pub fn evaluate(&self, x: [f64; N_PARAMS]) -> Evaluated {
        let z = self.attrs.covariates();
        let objectives = self.objectives.iter().map(|m| m.predict_raw(&x, &z)).collect();
        let violation = self
            .constraints
            .iter()
            .map(|c| {
                let g = c.model.predict_raw(&x, &z);
                (c.lower_bound - g).max(0.0) / scale(c.lower_bound)
            })
            .sum();
        Evaluated {
            x,
            objectives,
            violation,
        }
    }
}

fn scale(bound: f64) -> f64 {
    if bound == 0.0 {
        1.0
    } else {
        bound.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsgaConfig {
    pub population: usize,
    pub generations: usize,
    pub seed: u64,
    pub sbx_eta: f64,
    pub mutation_eta: f64,
    /// Per-variable probability.
    pub mutation_prob: f64,
    pub crossover_prob: f64,
}

impl Default for NsgaConfig {
    fn default() -> Self {
        Self {
            population: 2000,
            generations: 100,
            seed: 2024,
            sbx_eta: 15.0,
            mutation_eta: 20.0,
            mutation_prob: 1.0 / N_PARAMS as f64,
            crossover_prob: 0.9,
        }
    }
}

impl NsgaConfig {
    pub fn validate(&self) -> Result<(), ParetoError> {
        let bad = |m: &str| Err(ParetoError::InvalidConfig(m.into()));
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return bad("population must be even and at least 4");
        }
        if !(self.sbx_eta > 0.0 && self.mutation_eta > 0.0) {
            return bad("distribution indices must be positive");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) || !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        Ok(())
    }
}

/// A decision vector with objective values and total normalized violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub x: [f64; N_PARAMS],
    pub objectives: Vec<f64>,
    pub violation: f64,
}

impl Evaluated {
    pub fn feasible(&self) -> bool {
        self.violation == 0.0
    }
}

fn pareto_dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        strict |= x > y;
    }
    strict
}

/// Deb's rule: feasible beats infeasible, less violation beats more,
/// otherwise Pareto dominance under maximization.
pub fn constrained_dominates(a: &Evaluated, b: &Evaluated) -> bool {
    match (a.feasible(), b.feasible()) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => pareto_dominates(&a.objectives, &b.objectives),
    }
}

/// A total order in which every dominator precedes what it dominates.
fn presort_order(a: &Evaluated, b: &Evaluated) -> Ordering {
    b.feasible()
        .cmp(&a.feasible())
        .then(a.violation.total_cmp(&b.violation))
        .then_with(|| {
            a.objectives
                .iter()
                .zip(&b.objectives)
                .map(|(x, y)| y.total_cmp(x))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Rank (0 = non-dominated) of each solution.
///
/// Uses the sequential-search variant of efficient non-dominated sorting:
/// solutions are visited in an order where dominators come first and each
/// joins the first front holding no dominator.
pub fn fast_nondominated_sort(pop: &[Evaluated]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&i, &j| presort_order(&pop[i], &pop[j]).then(i.cmp(&j)));
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut rank = vec![0; pop.len()];
    for i in order {
        let k = fronts
            .iter()
            .position(|f| !f.iter().rev().any(|&j| constrained_dominates(&pop[j], &pop[i])))
            .unwrap_or(fronts.len());
        if k == fronts.len() {
            fronts.push(Vec::new());
        }
        fronts[k].push(i);
        rank[i] = k;
    }
    rank
}

/// Crowding distance of each member of one front.
pub fn crowding_distance(front: &[&[f64]]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].len();
    let mut dist = vec![0.0; n];
    let mut idx: Vec<usize> = (0..n).collect();
    for k in 0..m {
        idx.sort_by(|&a, &b| front[a][k].total_cmp(&front[b][k]).then(a.cmp(&b)));
        let (lo, hi) = (front[idx[0]][k], front[idx[n - 1]][k]);
        dist[idx[0]] = f64::INFINITY;
        dist[idx[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            dist[idx[w]] += (front[idx[w + 1]][k] - front[idx[w - 1]][k]) / range;
        }
    }
    dist
}

fn sbx_beta(u: f64, eta: f64) -> f64 {
    if u <= 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
    }
}

/// Simulated binary crossover; each variable crosses with probability 0.5 and
/// children are clipped to `bounds`.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &[f64; N_PARAMS],
    p2: &[f64; N_PARAMS],
    bounds: &Bounds,
    eta: f64,
    rng: &mut R,
) -> ([f64; N_PARAMS], [f64; N_PARAMS]) {
    let (mut c1, mut c2) = (*p1, *p2);
    for i in 0..N_PARAMS {
        if !rng.random_bool(0.5) {
            continue;
        }
        let beta = sbx_beta(rng.random::<f64>(), eta);
        let (a, b) = (p1[i], p2[i]);
        let (lo, hi) = bounds[i];
        c1[i] = (0.5 * ((1.0 + beta) * a + (1.0 - beta) * b)).clamp(lo, hi);
        c2[i] = (0.5 * ((1.0 - beta) * a + (1.0 + beta) * b)).clamp(lo, hi);
    }
    (c1, c2)
}

/// Bounded polynomial mutation.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    p: &[f64; N_PARAMS],
    bounds: &Bounds,
    eta: f64,
    prob: f64,
    rng: &mut R,
) -> [f64; N_PARAMS] {
    let mut out = *p;
    for i in 0..N_PARAMS {
        if prob <= 0.0 || !rng.random_bool(prob.min(1.0)) {
            continue;
        }
        let (lo, hi) = bounds[i];
        let range = hi - lo;
        let y = out[i];
        let (d1, d2) = ((y - lo) / range, (hi - y) / range);
        let u: f64 = rng.random();
        let pow = 1.0 / (eta + 1.0);
        let dq = if u < 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            v.powf(pow) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(pow)
        };
        out[i] = (y + dq * range).clamp(lo, hi);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSolution {
    pub params: ProcessParams,
    /// Objective values in spec order.
    pub objectives: Vec<f64>,
    /// Predictions aligned with `ParetoFront::response_names`.
    pub responses: Vec<f64>,
    pub feasible: bool,
    /// `(g − bound)/|bound|` per constraint.
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub response_names: Vec<String>,
    pub solutions: Vec<ParetoSolution>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// `X1..X6,<responses>,feasible`.
    pub fn to_csv(&self) -> String {
        let mut out = PARAM_LABELS.join(",");
        for name in &self.response_names {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",feasible\n");
        for s in &self.solutions {
            let cells: Vec<String> = s
                .params
                .to_array()
                .iter()
                .chain(&s.responses)
                .map(|v| fmt_sig(*v, 6))
                .collect();
            out.push_str(&cells.join(","));
            out.push_str(if s.feasible { ",1\n" } else { ",0\n" });
        }
        out
    }

    /// Keeps `n` solutions by repeatedly dropping the most crowded one
    /// (smallest crowding distance, later index on ties).
    pub fn down_select(&self, n: usize) -> ParetoFront {
        let mut keep: Vec<usize> = (0..self.solutions.len()).collect();
        while keep.len() > n {
            let objs: Vec<&[f64]> = keep.iter().map(|&i| self.solutions[i].objectives.as_slice()).collect();
            let d = crowding_distance(&objs);
            let victim = (0..keep.len())
                .rev()
                .min_by(|&a, &b| d[a].total_cmp(&d[b]))
                .expect("non-empty");
            keep.remove(victim);
        }
        ParetoFront {
            response_names: self.response_names.clone(),
            solutions: keep.into_iter().map(|i| self.solutions[i].clone()).collect(),
        }
    }
}

struct Ranked {
    rank: Vec<usize>,
    crowding: Vec<f64>,
}

fn rank_and_crowd(pop: &[Evaluated]) -> Ranked {
    let rank = fast_nondominated_sort(pop);
    let mut crowding = vec![0.0; pop.len()];
    let n_fronts = rank.iter().max().map_or(0, |r| r + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_fronts];
    for (i, &r) in rank.iter().enumerate() {
        members[r].push(i);
    }
    for front in members {
        let objs: Vec<&[f64]> = front.iter().map(|&i| pop[i].objectives.as_slice()).collect();
        for (k, d) in crowding_distance(&objs).into_iter().enumerate() {
            crowding[front[k]] = d;
        }
    }
    Ranked { rank, crowding }
}

fn tournament<R: Rng>(pop: &[Evaluated], ranked: &Ranked, rng: &mut R) -> usize {
    let a = rng.random_range(0..pop.len());
    let b = rng.random_range(0..pop.len());
    if constrained_dominates(&pop[a], &pop[b]) {
        a
    } else if constrained_dominates(&pop[b], &pop[a]) {
        b
    } else if ranked.crowding[b] > ranked.crowding[a] {
        b
    } else {
        a
    }
}

fn survivors(pop: &[Evaluated], n: usize) -> Vec<usize> {
    let ranked = rank_and_crowd(pop);
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| {
        ranked.rank[a]
            .cmp(&ranked.rank[b])
            .then(ranked.crowding[b].total_cmp(&ranked.crowding[a]))
            .then(a.cmp(&b))
    });
    idx.truncate(n);
    idx
}

fn near_duplicate(a: &[f64; N_PARAMS], b: &[f64; N_PARAMS], bounds: &Bounds) -> bool {
    (0..N_PARAMS).all(|i| (a[i] - b[i]).abs() <= 1e-6 * (bounds[i].1 - bounds[i].0))
}

fn to_front(spec: &OptimizationSpec, members: &[&Evaluated]) -> ParetoFront {
    let models = spec.response_models();
    let z = spec.attrs.covariates();
    let mut kept: Vec<&Evaluated> = Vec::new();
    for e in members {
        if !kept.iter().any(|k| near_duplicate(&k.x, &e.x, &spec.bounds)) {
            kept.push(e);
        }
    }
    let solutions = kept
        .into_iter()
        .map(|e| ParetoSolution {
            params: ProcessParams::from_array(e.x),
            objectives: e.objectives.clone(),
            responses: models.iter().map(|m| m.predict_raw(&e.x, &z)).collect(),
            feasible: e.feasible(),
            margins: spec
                .constraints
                .iter()
                .map(|c| (c.model.predict_raw(&e.x, &z) - c.lower_bound) / scale(c.lower_bound))
                .collect(),
        })
        .collect();
    ParetoFront {
        response_names: models.iter().map(|m| m.response_name.clone()).collect(),
        solutions,
    }
}

/// Runs NSGA-II and returns the deduplicated rank-1 set of the final population.
pub fn optimize(spec: &OptimizationSpec, config: &NsgaConfig) -> Result<ParetoFront, ParetoError> {
    spec.validate()?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.population;
    let bounds = &spec.bounds;

    let mut pop: Vec<Evaluated> = (0..n)
        .map(|_| {
            let x = std::array::from_fn(|i| rng.random_range(bounds[i].0..=bounds[i].1));
            spec.evaluate(x)
        })
        .collect();

    for _ in 0..config.generations {
        let ranked = rank_and_crowd(&pop);
        let mut children: Vec<[f64; N_PARAMS]> = Vec::with_capacity(n);
        while children.len() < n {
            let a = &pop[tournament(&pop, &ranked, &mut rng)].x;
            let b = &pop[tournament(&pop, &ranked, &mut rng)].x;
            let (c1, c2) = if rng.random_bool(config.crossover_prob) {
                sbx_crossover(a, b, bounds, config.sbx_eta, &mut rng)
            } else {
                (*a, *b)
            };
            for c in [c1, c2] {
                children.push(polynomial_mutation(&c, bounds, config.mutation_eta, config.mutation_prob, &mut rng));
            }
        }
        pop.extend(children.into_iter().map(|x| spec.evaluate(x)));
        let keep = survivors(&pop, n);
        pop = keep.into_iter().map(|i| pop[i].clone()).collect();
    }

    let rank = fast_nondominated_sort(&pop);
    let first: Vec<&Evaluated> = pop.iter().zip(&rank).filter(|(_, r)| **r == 0).map(|(e, _)| e).collect();
    let front = to_front(spec, &first);
    if front.solutions.iter().any(|s| s.feasible) {
        Ok(front)
    } else {
        Err(ParetoError::NoFeasibleSolution(Box::new(front)))
    }
}

/// `‖a − b‖₂ / ‖b‖₂` over objective vectors.
pub fn relative_distance(a: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(reference).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = reference.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
