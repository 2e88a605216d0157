//! Leggett-Garg estimation from game records.
//!
//! `K = ⟨Q1 Q2⟩ + ⟨Q2 Q3⟩ + ⟨Q1 Q3⟩` is estimated for game records through
//! Bob's conditional success rates `P_Mj(B | A)`:
//!
//! ```text
//! K = 4/9 · (1 − P_M1(B|A) − P_M2(B|A)) − 1
//! ```
//!
//! Macrorealist models satisfy `P_M1(B|A) + P_M2(B|A) ≤ 1`, i.e. `K ≥ −1`;
//! quantum mechanics reaches `K = −13/9`. For macrorealist records the ball's
//! ground-truth positions give `K` directly ([`k_direct`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::BoxLabel;
use crate::protocol::{BobOutcome, Context, RoundRecord, VerificationTables};
use crate::scalar::Scalar;

/// How rounds with an undetermined Bob record enter `P(B | A)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingPolicy {
    /// Undetermined rounds are dropped.
    FairSampling,
    /// Undetermined rounds count as Bob-false, i.e. as Alice cheating.
    Adverse,
}

impl SamplingPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingPolicy::FairSampling => "fair",
            SamplingPolicy::Adverse => "adverse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fair" | "fair_sampling" => Some(SamplingPolicy::FairSampling),
            "adverse" => Some(SamplingPolicy::Adverse),
            _ => None,
        }
    }
}

/// `P_Mj(B | A)` with its binomial (Wald) standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    pub context: Context,
    pub n_alice_true: u64,
    pub n_joint_true: u64,
    pub p_hat: f64,
    pub std_err: f64,
}

impl ConditionalEstimate {
    pub fn from_counts(context: Context, n_alice_true: u64, n_joint_true: u64) -> Result<Self> {
        if n_alice_true == 0 {
            return Err(Error::InsufficientData(format!("no Alice-true rounds in context {context}")));
        }
        let p_hat = n_joint_true as f64 / n_alice_true as f64;
        Ok(Self { context, n_alice_true, n_joint_true, p_hat, std_err: wald_std_err(p_hat, n_alice_true) })
    }
}

pub fn wald_std_err(p_hat: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p_hat * (1.0 - p_hat) / n as f64).max(0.0).sqrt()
}

/// Counts `(n_alice_true, n_joint_true)` for one context under a policy.
fn conditional_counts<'a>(
    records: impl IntoIterator<Item = &'a RoundRecord>,
    context: Context,
    policy: SamplingPolicy,
) -> (u64, u64) {
    let mut n_a = 0;
    let mut n_ab = 0;
    for r in records.into_iter().filter(|r| r.context == context && r.alice_m3) {
        match (r.bob_outcome, policy) {
            (Some(BobOutcome::Undetermined), SamplingPolicy::FairSampling) => {}
            (Some(BobOutcome::True), _) => {
                n_a += 1;
                n_ab += 1;
            }
            (Some(_), _) => n_a += 1,
            (None, _) => {}
        }
    }
    (n_a, n_ab)
}

/// `P_M1(B | A)` and `P_M2(B | A)` from game records.
pub fn estimate_conditionals(records: &[RoundRecord], policy: SamplingPolicy) -> Result<[ConditionalEstimate; 2]> {
    let est = |ctx| {
        let (n_a, n_ab) = conditional_counts(records, ctx, policy);
        ConditionalEstimate::from_counts(ctx, n_a, n_ab)
    };
    Ok([est(Context::M1)?, est(Context::M2)?])
}

/// `K = 4/9 (1 − p1 − p2) − 1`.
pub fn k_from_conditionals<T: Scalar>(p1: T, p2: T) -> T {
    T::lit(4.0) / T::lit(9.0) * (T::one() - p1 - p2) - T::one()
}

/// Propagated standard error `4/9 · sqrt(se1² + se2²)`.
pub fn k_std_err_from<T: Scalar>(se1: T, se2: T) -> T {
    T::lit(4.0) / T::lit(9.0) * (se1 * se1 + se2 * se2).sqrt()
}

pub fn k_std_err(pair: &[ConditionalEstimate; 2]) -> f64 {
    k_std_err_from(pair[0].std_err, pair[1].std_err)
}

/// Standard errors by which `k_hat` lies below the macrorealist bound −1
/// (zero when it does not).
pub fn sigma_violation<T: Scalar>(k_hat: T, k_std_err: T) -> T {
    let gap = -T::one() - k_hat;
    if gap <= T::zero() {
        return T::zero();
    }
    if k_std_err == T::zero() {
        return T::infinity();
    }
    gap / k_std_err
}

/// Direct estimate from ground truth: `Q_t = +1` iff the ball is in box 3 at
/// time `t`, averaged over rounds.
pub fn k_direct(records: &[RoundRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records".into()));
    }
    let mut total = 0i64;
    for r in records {
        let gt = r.ground_truth_boxes.ok_or(Error::MissingGroundTruth(r.round_id))?;
        let q = gt.map(|b| if b == BoxLabel::B3 { 1i64 } else { -1 });
        total += q[0] * q[1] + q[1] * q[2] + q[0] * q[2];
    }
    Ok(total as f64 / records.len() as f64)
}

/// `K` and its significance under one sampling policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEstimate {
    pub policy: SamplingPolicy,
    pub conditionals: [ConditionalEstimate; 2],
    pub k_hat: f64,
    pub k_std_err: f64,
    pub sigma: f64,
}

impl PolicyEstimate {
    pub fn from_conditionals(policy: SamplingPolicy, conditionals: [ConditionalEstimate; 2]) -> Self {
        let k_hat = k_from_conditionals(conditionals[0].p_hat, conditionals[1].p_hat);
        let k_std_err = k_std_err(&conditionals);
        Self { policy, conditionals, k_hat, k_std_err, sigma: sigma_violation(k_hat, k_std_err) }
    }

    pub fn from_records(records: &[RoundRecord], policy: SamplingPolicy) -> Result<Self> {
        Ok(Self::from_conditionals(policy, estimate_conditionals(records, policy)?))
    }
}

/// Betting statistics for one context.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSummary {
    pub context: Context,
    pub rounds: u64,
    pub bets: u64,
    pub bet_rate: f64,
    pub bet_rate_std_err: f64,
    pub wins: u64,
    /// Wins over bets; `None` for the control arm or when Alice never bet.
    pub win_rate: Option<f64>,
    pub undetermined: u64,
}

pub fn context_summaries(records: &[RoundRecord]) -> Vec<ContextSummary> {
    Context::ALL
        .iter()
        .filter_map(|&ctx| {
            let rounds: Vec<_> = records.iter().filter(|r| r.context == ctx).collect();
            if rounds.is_empty() {
                return None;
            }
            let n = rounds.len() as u64;
            let bets = rounds.iter().filter(|r| r.alice_bets).count() as u64;
            let wins = rounds.iter().filter(|r| r.alice_wins == Some(true)).count() as u64;
            let bet_rate = bets as f64 / n as f64;
            Some(ContextSummary {
                context: ctx,
                rounds: n,
                bets,
                bet_rate,
                bet_rate_std_err: wald_std_err(bet_rate, n),
                wins,
                win_rate: (ctx != Context::NoneChosen && bets > 0).then(|| wins as f64 / bets as f64),
                undetermined: rounds.iter().filter(|r| r.bob_outcome == Some(BobOutcome::Undetermined)).count() as u64,
            })
        })
        .collect()
}

/// Full Leggett-Garg analysis of a record set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LgReport {
    /// Policy behind the headline `k_hat` / `k_std_err`.
    pub policy: SamplingPolicy,
    pub k_hat: f64,
    pub k_std_err: f64,
    pub sigma_fair: f64,
    pub sigma_adverse: f64,
    /// `Q1` is fixed by the heralded preparation.
    pub q1: i8,
    pub fair: PolicyEstimate,
    pub adverse: PolicyEstimate,
    pub contexts: Vec<ContextSummary>,
    /// Ground-truth `K` for macrorealist records.
    pub k_direct: Option<f64>,
    pub notes: Vec<String>,
}

impl LgReport {
    pub fn from_records(records: &[RoundRecord], policy: SamplingPolicy) -> Result<Self> {
        let fair = PolicyEstimate::from_records(records, SamplingPolicy::FairSampling)?;
        let adverse = PolicyEstimate::from_records(records, SamplingPolicy::Adverse)?;
        let headline = match policy {
            SamplingPolicy::FairSampling => fair,
            SamplingPolicy::Adverse => adverse,
        };
        let k_direct = k_direct(records).ok();
        let notes = vec![
            "fair: undetermined Bob records are excluded from P(B|A)".to_string(),
            "adverse: undetermined Bob records count as Bob-false on Alice-true rounds".to_string(),
            "intervals are ±2σ binomial (Wald)".to_string(),
        ];
        Ok(Self {
            policy,
            k_hat: headline.k_hat,
            k_std_err: headline.k_std_err,
            sigma_fair: fair.sigma,
            sigma_adverse: adverse.sigma,
            q1: 1,
            fair,
            adverse,
            contexts: context_summaries(records),
            k_direct,
            notes,
        })
    }

    pub fn headline(&self) -> &PolicyEstimate {
        match self.policy {
            SamplingPolicy::FairSampling => &self.fair,
            SamplingPolicy::Adverse => &self.adverse,
        }
    }
}

/// Formats with six significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..=9).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn interval(p: f64, se: f64) -> String {
    format!("[{}, {}]", sig6((p - 2.0 * se).max(0.0)), sig6((p + 2.0 * se).min(1.0)))
}

impl fmt::Display for LgReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Leggett-Garg analysis (headline policy: {})", self.policy.as_str())?;
        writeln!(
            f,
            "  K = {} ± {}  (macrorealist bound -1, quantum limit {})",
            sig6(self.k_hat),
            sig6(self.k_std_err),
            sig6(-13.0 / 9.0)
        )?;
        for est in [&self.fair, &self.adverse] {
            writeln!(
                f,
                "  [{}] K = {} ± {}, violation {} σ",
                est.policy.as_str(),
                sig6(est.k_hat),
                sig6(est.k_std_err),
                sig6(est.sigma)
            )?;
            for c in &est.conditionals {
                writeln!(
                    f,
                    "      P_{}(B|A) = {} / {} = {}  95% {}",
                    c.context,
                    c.n_joint_true,
                    c.n_alice_true,
                    sig6(c.p_hat),
                    interval(c.p_hat, c.std_err)
                )?;
            }
        }
        writeln!(f, "  context  rounds  bets  bet rate   win rate   undetermined")?;
        for c in &self.contexts {
            writeln!(
                f,
                "  {:<7}  {:>6}  {:>4}  {:<9}  {:<9}  {}",
                c.context.as_str(),
                c.rounds,
                c.bets,
                sig6(c.bet_rate),
                c.win_rate.map(sig6).unwrap_or_else(|| "-".into()),
                c.undetermined
            )?;
        }
        if let Some(k) = self.k_direct {
            writeln!(f, "  ground-truth K = {}", sig6(k))?;
        }
        Ok(())
    }
}

/// A binomial proportion with a ±2σ interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub std_err: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        let p_hat = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        let std_err = wald_std_err(p_hat, trials);
        Self {
            successes,
            trials,
            p_hat,
            std_err,
            lo: (p_hat - 2.0 * std_err).max(0.0),
            hi: (p_hat + 2.0 * std_err).min(1.0),
        }
    }
}

impl fmt::Display for Proportion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}, {}] (n={})", sig6(self.p_hat), sig6(self.lo), sig6(self.hi), self.trials)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub box_label: BoxLabel,
    pub p_true: Proportion,
    pub p_undetermined: Proportion,
}

/// Second-readout statistics for first `M_j`, second `M_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityRow {
    pub first: BoxLabel,
    pub second: BoxLabel,
    /// `P(second true | first true)`
    pub true_given_true: Proportion,
    /// `P(second false | first false)`
    pub false_given_false: Proportion,
    /// `P(second undetermined | first true)`
    pub undetermined_given_true: Proportion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepopulationRow {
    pub box_label: BoxLabel,
    pub preserved: Proportion,
    pub undetermined: Proportion,
    pub flipped: Proportion,
}

/// Bob's verification tables summarised with ±2σ intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub pairs_per_combination: u64,
    pub marginals: Vec<MarginalRow>,
    pub repeatability: Vec<RepeatabilityRow>,
    pub repopulation: Vec<RepopulationRow>,
}

pub fn verification_report(tables: &VerificationTables) -> VerificationReport {
    let marginals = BoxLabel::ALL
        .iter()
        .map(|&j| {
            let c = tables.first_marginal(j);
            MarginalRow {
                box_label: j,
                p_true: Proportion::new(c.true_, c.total()),
                p_undetermined: Proportion::new(c.undetermined, c.total()),
            }
        })
        .collect();
    let repeatability = tables
        .pairs
        .iter()
        .map(|p| {
            let after_true = p.given(BobOutcome::True);
            let after_false = p.given(BobOutcome::False);
            RepeatabilityRow {
                first: p.first,
                second: p.second,
                true_given_true: Proportion::new(after_true.true_, after_true.total()),
                false_given_false: Proportion::new(after_false.false_, after_false.total()),
                undetermined_given_true: Proportion::new(after_true.undetermined, after_true.total()),
            }
        })
        .collect();
    let repopulation = BoxLabel::ALL
        .iter()
        .map(|&j| {
            let t = tables.repopulation(j);
            RepopulationRow {
                box_label: j,
                preserved: Proportion::new(t.preserved, t.total()),
                undetermined: Proportion::new(t.undetermined, t.total()),
                flipped: Proportion::new(t.flipped, t.total()),
            }
        })
        .collect();
    VerificationReport { pairs_per_combination: tables.pairs_per_combination, marginals, repeatability, repopulation }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Measurement verification ({} pairs per combination, ±2σ intervals)", self.pairs_per_combination)?;
        writeln!(f, "First readout on a fresh system:")?;
        for m in &self.marginals {
            writeln!(f, "  P(M{} true) = {}   undetermined {}", m.box_label, m.p_true, sig6(m.p_undetermined.p_hat))?;
        }
        writeln!(f, "Second readout conditioned on the first:")?;
        for r in &self.repeatability {
            writeln!(
                f,
                "  M{} then M{}:  P(T|T) = {}   P(F|F) = {}   P(U|T) = {}",
                r.first,
                r.second,
                r.true_given_true,
                r.false_given_false,
                sig6(r.undetermined_given_true.p_hat)
            )?;
        }
        writeln!(f, "Box label after a true readout:")?;
        for r in &self.repopulation {
            writeln!(
                f,
                "  M{}: preserved {}   undetermined {}   flipped {}",
                r.box_label,
                r.preserved,
                sig6(r.undetermined.p_hat),
                sig6(r.flipped.p_hat)
            )?;
        }
        Ok(())
    }
}
