//! Macrorealist model search.
//!
//! A macrorealist strategy moves one ball between three boxes with
//! row-stochastic maps. Its extreme points are the deterministic strategies,
//! which [`scan_deterministic`] enumerates exhaustively; [`best_noncontextual_fit`]
//! searches the full stochastic space for the closest match to target game
//! statistics and reports the disturbance a macrorealist observer could detect.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::BoxLabel;
use crate::protocol::{Context, MrStrategy, StochasticMatrix};

/// One macrorealist history of `Q_t = ±1` (ball in box 3 or not) with `Q1 = +1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryAssignment {
    pub q: [i8; 3],
    pub k_value: f64,
}

impl HistoryAssignment {
    pub fn new(q: [i8; 3]) -> Self {
        let k = q[0] * q[1] + q[1] * q[2] + q[0] * q[2];
        Self { q, k_value: f64::from(k) }
    }
}

pub fn enumerate_histories() -> Vec<HistoryAssignment> {
    let mut out = Vec::with_capacity(4);
    for q2 in [1, -1] {
        for q3 in [1, -1] {
            out.push(HistoryAssignment::new([1, q2, q3]));
        }
    }
    out
}

/// `(min K, max K)` over macrorealist histories; mixtures stay inside.
pub fn k_bounds() -> (f64, f64) {
    enumerate_histories()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| (lo.min(h.k_value), hi.max(h.k_value)))
}

/// `K` of a mixture of histories; `weights` need not be normalised.
pub fn mixture_k(histories: &[HistoryAssignment], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    histories.iter().zip(weights).map(|(h, w)| h.k_value * w).sum::<f64>() / total
}

/// The deterministic map `{1,2,3} → {1,2,3}` with index `n ∈ 0..27`.
pub fn deterministic_map(n: usize) -> [BoxLabel; 3] {
    [BoxLabel::ALL[n % 3], BoxLabel::ALL[(n / 3) % 3], BoxLabel::ALL[(n / 9) % 3]]
}

/// Every deterministic strategy: 3 placements × 27 maps for each of
/// `shuffle_I`, `shuffle_F` and the measurement disturbance.
pub fn deterministic_strategies() -> impl Iterator<Item = MrStrategy<f64>> {
    (0..3 * 27 * 27 * 27).map(|n| {
        let mut placement = [0.0; 3];
        placement[n % 3] = 1.0;
        let rest = n / 3;
        MrStrategy {
            placement,
            shuffle_i: StochasticMatrix::deterministic(deterministic_map(rest % 27)),
            shuffle_f: StochasticMatrix::deterministic(deterministic_map((rest / 27) % 27)),
            measurement_disturbance: StochasticMatrix::deterministic(deterministic_map(rest / 729)),
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub strategies: u64,
    /// Strategies with `P(A | M_j) > 0` in both measured contexts.
    pub informative: u64,
    pub max_conditional_sum: f64,
    pub max_conditional_sum_non_disturbing: f64,
    /// `K` from equal conditionals at the maximum sum.
    pub k_min: f64,
    pub argmax: Option<MrStrategy<f64>>,
}

/// Exhaustive scan of [`deterministic_strategies`] for the largest
/// `P_M1(B|A) + P_M2(B|A)`.
pub fn scan_deterministic() -> ScanSummary {
    let mut summary = ScanSummary {
        strategies: 0,
        informative: 0,
        max_conditional_sum: f64::NEG_INFINITY,
        max_conditional_sum_non_disturbing: f64::NEG_INFINITY,
        k_min: f64::NAN,
        argmax: None,
    };
    for s in deterministic_strategies() {
        summary.strategies += 1;
        let (Some(p1), Some(p2)) = (s.conditional(Context::M1), s.conditional(Context::M2)) else {
            continue;
        };
        summary.informative += 1;
        let sum = p1 + p2;
        if sum > summary.max_conditional_sum {
            summary.max_conditional_sum = sum;
            summary.argmax = Some(s);
        }
        if s.is_non_disturbing() {
            summary.max_conditional_sum_non_disturbing = summary.max_conditional_sum_non_disturbing.max(sum);
        }
    }
    summary.k_min =
        crate::lg_stats::k_from_conditionals(summary.max_conditional_sum / 2.0, summary.max_conditional_sum / 2.0);
    summary
}

/// A probability vector drawn uniformly from the simplex.
fn random_distribution<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let e: [f64; 3] = std::array::from_fn(|_| -(1.0 - rng.gen::<f64>()).ln());
    let total: f64 = e.iter().sum();
    e.map(|x| x / total)
}

fn random_stochastic<R: Rng + ?Sized>(rng: &mut R) -> StochasticMatrix<f64> {
    StochasticMatrix(std::array::from_fn(|_| random_distribution(rng)))
}

/// A strategy with every row drawn uniformly from the simplex; the
/// disturbance is identity unless `disturbing`.
pub fn random_strategy<R: Rng + ?Sized>(rng: &mut R, disturbing: bool) -> MrStrategy<f64> {
    MrStrategy {
        placement: random_distribution(rng),
        shuffle_i: random_stochastic(rng),
        shuffle_f: random_stochastic(rng),
        measurement_disturbance: if disturbing { random_stochastic(rng) } else { StochasticMatrix::identity() },
    }
}

/// Game statistics to be matched by a macrorealist strategy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitTargets {
    pub p_alice_m1: f64,
    pub p_alice_m2: f64,
    pub p_alice_none: f64,
    pub p_bob_given_alice_m1: f64,
    pub p_bob_given_alice_m2: f64,
}

impl FitTargets {
    /// Ideal quantum statistics: `P(A) = 1/9` in every context, `P(B|A) = 1`.
    pub fn ideal_quantum() -> Self {
        Self::from_array([1.0 / 9.0, 1.0 / 9.0, 1.0 / 9.0, 1.0, 1.0])
    }

    pub fn from_strategy(s: &MrStrategy<f64>) -> Self {
        Self::from_array(observables(s))
    }

    fn from_array(a: [f64; 5]) -> Self {
        Self {
            p_alice_m1: a[0],
            p_alice_m2: a[1],
            p_alice_none: a[2],
            p_bob_given_alice_m1: a[3],
            p_bob_given_alice_m2: a[4],
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.p_alice_m1, self.p_alice_m2, self.p_alice_none, self.p_bob_given_alice_m1, self.p_bob_given_alice_m2]
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig(format!("fit targets must be probabilities: {self:?}")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }
}

/// `[P(A|M1), P(A|M2), P(A|none), P(B|A, M1), P(B|A, M2)]`; a conditional
/// with `P(A) = 0` counts as 0.
pub fn observables(s: &MrStrategy<f64>) -> [f64; 5] {
    let (a1, ab1) = s.joint_probabilities(Context::M1);
    let (a2, ab2) = s.joint_probabilities(Context::M2);
    let (a0, _) = s.joint_probabilities(Context::NoneChosen);
    let cond = |a: f64, ab: f64| if a > 1e-12 { (ab / a).min(1.0) } else { 0.0 };
    [a1, a2, a0, cond(a1, ab1), cond(a2, ab2)]
}

/// `max_j |P(A | M_j) − P(A | none)|`.
pub fn disturbance(s: &MrStrategy<f64>) -> f64 {
    let o = observables(s);
    (o[0] - o[2]).abs().max((o[1] - o[2]).abs())
}

/// One point of the (disturbance, fit error) trade-off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub disturbance: f64,
    pub fit_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub strategy: MrStrategy<f64>,
    /// Max absolute deviation over the five target observables.
    pub fit_error: f64,
    pub disturbance: f64,
    pub achieved: FitTargets,
    pub targets: FitTargets,
    pub evaluations: u64,
    pub restarts: u64,
    pub lock_disturbance: bool,
    /// Non-dominated archive points, sorted by increasing disturbance.
    pub frontier: Vec<FrontierPoint>,
}

impl FitResult {
    pub fn frontier_csv(&self) -> String {
        let mut out = String::from("disturbance,fit_error\n");
        for p in &self.frontier {
            out.push_str(&format!("{},{}\n", p.disturbance, p.fit_error));
        }
        out
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: [f64; 3]) -> [f64; 3] {
    let mut u = v;
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

const ROWS: usize = 10;

fn row_mut(s: &mut MrStrategy<f64>, r: usize) -> &mut [f64; 3] {
    match r {
        0 => &mut s.placement,
        1..=3 => &mut s.shuffle_i.0[r - 1],
        4..=6 => &mut s.shuffle_f.0[r - 4],
        _ => &mut s.measurement_disturbance.0[r - 7],
    }
}

struct Evaluation {
    fit_error: f64,
    disturbance: f64,
    score: f64,
}

struct Search<'a> {
    targets: [f64; 5],
    penalty: f64,
    archive: &'a mut Vec<FrontierPoint>,
    evaluations: u64,
}

impl Search<'_> {
    fn evaluate(&mut self, s: &MrStrategy<f64>) -> Evaluation {
        self.evaluations += 1;
        let o = observables(s);
        let mut fit_error = 0.0f64;
        let mut sse = 0.0;
        for (x, t) in o.iter().zip(&self.targets) {
            fit_error = fit_error.max((x - t).abs());
            sse += (x - t) * (x - t);
        }
        let disturbance = (o[0] - o[2]).abs().max((o[1] - o[2]).abs());
        push_pareto(self.archive, FrontierPoint { disturbance, fit_error });
        Evaluation { fit_error, disturbance, score: fit_error + 0.1 * sse + self.penalty * disturbance }
    }
}

fn push_pareto(archive: &mut Vec<FrontierPoint>, p: FrontierPoint) {
    if archive.iter().any(|q| q.disturbance <= p.disturbance && q.fit_error <= p.fit_error) {
        return;
    }
    archive.retain(|q| !(p.disturbance <= q.disturbance && p.fit_error <= q.fit_error));
    archive.push(p);
}

struct RestartOutcome {
    strategy: MrStrategy<f64>,
    fit_error: f64,
    disturbance: f64,
    evaluations: u64,
    archive: Vec<FrontierPoint>,
}

/// Disturbance penalties cycled over restarts so the archive spans the frontier.
const PENALTIES: [f64; 4] = [0.0, 0.05, 0.25, 1.0];

fn run_restart(targets: [f64; 5], budget: u64, seed: u64, index: u64, lock: bool) -> RestartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut archive = Vec::new();
    let mut search =
        Search { targets, penalty: PENALTIES[index as usize % PENALTIES.len()], archive: &mut archive, evaluations: 0 };
    let rows = if lock { 7 } else { ROWS };

    let mut best: Option<(MrStrategy<f64>, Evaluation)> = None;
    while search.evaluations < budget {
        let mut current = random_strategy(&mut rng, !lock);
        let mut cur = search.evaluate(&current);
        let mut step = 0.25;
        while step > 1e-7 && search.evaluations < budget {
            let mut improved = false;
            for r in 0..rows {
                for k in 0..3 {
                    for sign in [1.0, -1.0] {
                        if search.evaluations >= budget {
                            break;
                        }
                        let mut trial = current;
                        let row = row_mut(&mut trial, r);
                        row[k] += sign * step;
                        *row = project_simplex(*row);
                        let e = search.evaluate(&trial);
                        if e.score < cur.score - 1e-15 {
                            current = trial;
                            cur = e;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        let better = match &best {
            None => true,
            Some((_, b)) => (cur.fit_error, cur.disturbance) < (b.fit_error, b.disturbance),
        };
        if better {
            best = Some((current, cur));
        }
    }
    let evaluations = search.evaluations;
    let (strategy, e) = best.expect("budget admits at least one evaluation");
    RestartOutcome { strategy, fit_error: e.fit_error, disturbance: e.disturbance, evaluations, archive }
}

/// Random-restart projected coordinate descent over macrorealist strategies.
///
/// `budget` is the total number of strategy evaluations (at least 1000),
/// split evenly over independent restarts. With `lock_disturbance` the
/// measurement is fixed to be non-disturbing. Deterministic given `seed`.
pub fn best_noncontextual_fit(
    targets: &FitTargets,
    budget: u64,
    seed: u64,
    lock_disturbance: bool,
) -> Result<FitResult> {
    if budget < 1000 {
        return Err(Error::InvalidConfig(format!("search budget must be at least 1000, got {budget}")));
    }
    targets.validate()?;
    let restarts = (budget / 2500).clamp(4, 64);
    let per = budget / restarts;
    let target_arr = targets.to_array();
    let outcomes: Vec<_> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let extra = if i == 0 { budget - per * restarts } else { 0 };
            run_restart(target_arr, per + extra, seed, i, lock_disturbance)
        })
        .collect();

    let mut frontier = Vec::new();
    for p in outcomes.iter().flat_map(|o| &o.archive) {
        push_pareto(&mut frontier, *p);
    }
    frontier.sort_by(|a, b| a.disturbance.total_cmp(&b.disturbance).then(b.fit_error.total_cmp(&a.fit_error)));

    let best = outcomes
        .iter()
        .min_by(|a, b| a.fit_error.total_cmp(&b.fit_error).then(a.disturbance.total_cmp(&b.disturbance)))
        .expect("at least one restart");
    Ok(FitResult {
        strategy: best.strategy,
        fit_error: best.fit_error,
        disturbance: best.disturbance,
        achieved: FitTargets::from_strategy(&best.strategy),
        targets: *targets,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        restarts,
        lock_disturbance,
        frontier,
    })
}
