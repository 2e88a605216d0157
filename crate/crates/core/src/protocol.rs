//! The three-box game as a round state machine.
//!
//! A round is: Alice prepares, Bob measures `M1`, `M2` or nothing, Alice
//! post-selects with `M3` and bets iff her result is true, the bet is settled.
//! Two interchangeable engines play Alice's system: the quantum account
//! ([`QuantumModel`]) and a hidden-ball macrorealist ([`MrStrategy`]).

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::hilbert::{
    apply_unitary_dm, measure_in_basis, unitary_from_pair, BoxLabel, DensityMatrix, Projector, StateVector, Unitary,
};
use crate::noise::{self, NoiseParams, RepopulationTag};
use crate::scalar::Scalar;

/// Bob's measurement context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Context {
    M1,
    M2,
    #[serde(rename = "none")]
    NoneChosen,
}

impl Context {
    pub const ALL: [Context; 3] = [Context::M1, Context::M2, Context::NoneChosen];
    pub const MEASURED: [Context; 2] = [Context::M1, Context::M2];

    /// The box Bob asks about, if any.
    pub fn box_label(self) -> Option<BoxLabel> {
        match self {
            Context::M1 => Some(BoxLabel::B1),
            Context::M2 => Some(BoxLabel::B2),
            Context::NoneChosen => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Context::M1 => "M1",
            Context::M2 => "M2",
            Context::NoneChosen => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "M1" => Some(Context::M1),
            "M2" => Some(Context::M2),
            "none" => Some(Context::NoneChosen),
            _ => None,
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BobOutcome {
    True,
    False,
    Undetermined,
}

impl BobOutcome {
    pub const ALL: [BobOutcome; 3] = [BobOutcome::True, BobOutcome::False, BobOutcome::Undetermined];

    pub fn as_str(self) -> &'static str {
        match self {
            BobOutcome::True => "true",
            BobOutcome::False => "false",
            BobOutcome::Undetermined => "undetermined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "true" => Some(BobOutcome::True),
            "false" => Some(BobOutcome::False),
            "undetermined" => Some(BobOutcome::Undetermined),
            _ => None,
        }
    }

    fn from_bool(b: bool) -> Self {
        if b {
            BobOutcome::True
        } else {
            BobOutcome::False
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Quantum,
    Macroreal,
}

impl EngineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineKind::Quantum => "quantum",
            EngineKind::Macroreal => "macroreal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "quantum" => Some(EngineKind::Quantum),
            "macroreal" => Some(EngineKind::Macroreal),
            _ => None,
        }
    }
}

/// Row-stochastic `3 × 3` matrix: row `i` is the distribution of the ball's new
/// box given it was in box `i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StochasticMatrix<T>(pub [[T; 3]; 3]);

impl<T: Scalar> StochasticMatrix<T> {
    pub fn identity() -> Self {
        Self::deterministic([BoxLabel::B1, BoxLabel::B2, BoxLabel::B3])
    }

    /// The map sending box `i` to `map[i]` with certainty.
    pub fn deterministic(map: [BoxLabel; 3]) -> Self {
        let mut rows = [[T::zero(); 3]; 3];
        for (i, dst) in map.iter().enumerate() {
            rows[i][dst.index()] = T::one();
        }
        Self(rows)
    }

    /// Every row uniform.
    pub fn uniform() -> Self {
        let third = T::one() / T::lit(3.0);
        Self([[third; 3]; 3])
    }

    pub fn row(&self, from: BoxLabel) -> &[T; 3] {
        &self.0[from.index()]
    }

    pub fn entry(&self, from: BoxLabel, to: BoxLabel) -> T {
        self.0[from.index()][to.index()]
    }

    /// Pushes a distribution forward: `p · S`.
    pub fn push(&self, dist: &[T; 3]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (i, &p) in dist.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o = *o + p * self.0[i][j];
            }
        }
        out
    }

    /// `self` then `next`.
    pub fn then(&self, next: &Self) -> Self {
        Self(self.0.map(|row| next.push(&row)))
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        for (i, row) in self.0.iter().enumerate() {
            check_distribution(row, &format!("{what} row {}", i + 1))?;
        }
        Ok(())
    }
}

fn check_distribution<T: Scalar>(p: &[T; 3], what: &str) -> Result<()> {
    let sum: T = p.iter().copied().sum();
    if p.iter().any(|&x| !x.is_finite() || x < T::zero()) || (sum - T::one()).abs() > T::algebra_tol() {
        return Err(Error::InvalidConfig(format!("{what} is not a probability vector: {p:?}")));
    }
    Ok(())
}

/// A macrorealist account of the game: one ball, always in a definite box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MrStrategy<T> {
    /// Where the ball starts, before Alice's first manipulation.
    pub placement: [T; 3],
    /// Alice's first manipulation.
    #[serde(rename = "shuffle_I")]
    pub shuffle_i: StochasticMatrix<T>,
    /// Alice's second manipulation, just before her `M3`.
    #[serde(rename = "shuffle_F")]
    pub shuffle_f: StochasticMatrix<T>,
    /// Applied to the ball whenever Bob measures; identity means non-disturbing.
    pub measurement_disturbance: StochasticMatrix<T>,
}

impl<T: Scalar> MrStrategy<T> {
    /// Heralded ball in box 3, uniformly shuffled, no second shuffle, no disturbance.
    pub fn fair_shuffle() -> Self {
        Self {
            placement: [T::zero(), T::zero(), T::one()],
            shuffle_i: StochasticMatrix::uniform(),
            shuffle_f: StochasticMatrix::identity(),
            measurement_disturbance: StochasticMatrix::identity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_distribution(&self.placement, "placement")?;
        self.shuffle_i.validate("shuffle_I")?;
        self.shuffle_f.validate("shuffle_F")?;
        self.measurement_disturbance.validate("measurement_disturbance")
    }

    pub fn is_non_disturbing(&self) -> bool {
        self.measurement_disturbance.is_identity()
    }

    /// Distribution of the ball when Bob takes his turn.
    pub fn ball_at_bob(&self) -> [T; 3] {
        self.shuffle_i.push(&self.placement)
    }

    /// Exact `(P(A | context), P(A ∧ B | context))` where `A` is Alice's `M3`
    /// true and `B` is Bob's `M_j` true (zero for the control arm).
    pub fn joint_probabilities(&self, context: Context) -> (T, T) {
        let at_bob = self.ball_at_bob();
        let b3 = BoxLabel::B3;
        match context.box_label() {
            None => {
                let p_a = self.shuffle_f.push(&at_bob)[b3.index()];
                (p_a, T::zero())
            }
            Some(j) => {
                let after = self.measurement_disturbance.push(&at_bob);
                let p_a = self.shuffle_f.push(&after)[b3.index()];
                let mut from_j = [T::zero(); 3];
                from_j[j.index()] = at_bob[j.index()];
                let p_ab = self.shuffle_f.push(&self.measurement_disturbance.push(&from_j))[b3.index()];
                (p_a, p_ab)
            }
        }
    }

    /// `P(B | A)` for a measured context, `None` if Alice never finds box 3.
    pub fn conditional(&self, context: Context) -> Option<T> {
        let (p_a, p_ab) = self.joint_probabilities(context);
        (p_a > T::zero_prob()).then(|| p_ab / p_a)
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64; 3], rng: &mut R) -> BoxLabel {
    let u: f64 = rng.gen::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if p > 0.0 && u < acc {
            return BoxLabel::ALL[i];
        }
    }
    BoxLabel::ALL[probs.iter().rposition(|&p| p > 0.0).unwrap_or(2)]
}

/// The quantum account with its noise model and Alice's two control unitaries.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumModel {
    pub noise: NoiseParams,
    /// `|3⟩ → |I⟩`, including control error.
    pub prepare: Unitary<f64>,
    /// `|F⟩ → |3⟩`, including control error.
    pub unprepare: Unitary<f64>,
}

impl QuantumModel {
    pub fn new(noise: NoiseParams) -> Self {
        let three = StateVector::basis(BoxLabel::B3);
        let prepare = unitary_from_pair(&three, &StateVector::pre_selection());
        let unprepare = unitary_from_pair(&StateVector::post_selection(), &three);
        Self {
            noise,
            prepare: noise::perturbed_unitary_in_plane(&prepare, &noise, (BoxLabel::B1, BoxLabel::B3)),
            unprepare: noise::perturbed_unitary_in_plane(&unprepare, &noise, (BoxLabel::B2, BoxLabel::B3)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GameEngine {
    Quantum(QuantumModel),
    Macroreal(MrStrategy<f64>),
}

/// Where the ball was after heralding, after Bob's turn and after Alice's
/// final shuffle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BallTrack {
    pub ball: BoxLabel,
    pub history: [Option<BoxLabel>; 3],
}

/// The shared system between turns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EngineState {
    Quantum(DensityMatrix<f64>),
    Macroreal(BallTrack),
}

/// The result of one box readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Reading {
    /// What was written to the record.
    pub recorded: BobOutcome,
    /// Which projector was actually applied.
    pub actual: bool,
    /// Repopulation fate after a true outcome (quantum engine only).
    pub repopulation: Option<RepopulationTag>,
}

impl GameEngine {
    pub fn from_config(config: &SessionConfig) -> Result<Self> {
        config.validate()?;
        Ok(match config.engine {
            EngineKind::Quantum => GameEngine::Quantum(QuantumModel::new(config.noise)),
            EngineKind::Macroreal => GameEngine::Macroreal(config.mr_strategy.expect("validated")),
        })
    }

    pub fn ideal_quantum() -> Self {
        GameEngine::Quantum(QuantumModel::new(NoiseParams::ideal()))
    }

    pub fn kind(&self) -> EngineKind {
        match self {
            GameEngine::Quantum(_) => EngineKind::Quantum,
            GameEngine::Macroreal(_) => EngineKind::Macroreal,
        }
    }

    /// Alice's first turn.
    pub fn alice_prepare<R: Rng + ?Sized>(&self, rng: &mut R) -> EngineState {
        match self {
            GameEngine::Quantum(q) => {
                let heralded: DensityMatrix<f64> = noise::noisy_initial_state(&q.noise, rng);
                let prepared = apply_unitary_dm(&q.prepare, &heralded);
                EngineState::Quantum(noise::dephase(&prepared, &q.noise))
            }
            GameEngine::Macroreal(s) => {
                let start = sample_index(&s.placement, rng);
                let ball = sample_index(s.shuffle_i.row(start), rng);
                EngineState::Macroreal(BallTrack { ball, history: [Some(start), None, None] })
            }
        }
    }

    /// Reads "is the ball in box `label`?" once. Unlike [`Self::bob_measure`]
    /// any box may be asked about; verification runs use this directly.
    pub fn measure_box<R: Rng + ?Sized>(
        &self,
        state: &mut EngineState,
        label: BoxLabel,
        rng: &mut R,
    ) -> Result<Reading> {
        match (self, state) {
            (GameEngine::Quantum(q), EngineState::Quantum(rho)) => {
                let (idx, post) = measure_in_basis(rho, &Projector::binary(label), rng)?;
                let actual = idx == 0;
                let (post, tag) = if actual {
                    let (post, tag) = noise::repopulation_channel(&post, &q.noise, rng);
                    (post, Some(tag))
                } else {
                    (post, None)
                };
                let recorded = if tag == Some(RepopulationTag::Undetermined) {
                    BobOutcome::Undetermined
                } else {
                    BobOutcome::from_bool(noise::flip_readout(actual, &q.noise, rng))
                };
                *rho = noise::dephase(&post, &q.noise);
                Ok(Reading { recorded, actual, repopulation: tag })
            }
            (GameEngine::Macroreal(s), EngineState::Macroreal(track)) => {
                let actual = track.ball == label;
                track.ball = sample_index(s.measurement_disturbance.row(track.ball), rng);
                Ok(Reading { recorded: BobOutcome::from_bool(actual), actual, repopulation: None })
            }
            _ => unreachable!("engine state does not belong to this engine"),
        }
    }

    /// Bob's secret measurement in context `M1` or `M2`.
    pub fn bob_measure<R: Rng + ?Sized>(
        &self,
        state: &mut EngineState,
        context: Context,
        rng: &mut R,
    ) -> Result<Reading> {
        let label = context.box_label().ok_or(Error::InvalidContext(context))?;
        let reading = self.measure_box(state, label, rng)?;
        if let EngineState::Macroreal(track) = state {
            track.history[1] = Some(track.ball);
        }
        Ok(reading)
    }

    /// Bob's turn: measure if a context was chosen, otherwise leave the system alone.
    pub fn bob_turn<R: Rng + ?Sized>(
        &self,
        state: &mut EngineState,
        context: Context,
        rng: &mut R,
    ) -> Result<Option<Reading>> {
        if context == Context::NoneChosen {
            match (self, state) {
                (GameEngine::Quantum(q), EngineState::Quantum(rho)) => *rho = noise::dephase(rho, &q.noise),
                (_, EngineState::Macroreal(track)) => track.history[1] = Some(track.ball),
                _ => unreachable!("engine state does not belong to this engine"),
            }
            return Ok(None);
        }
        self.bob_measure(state, context, rng).map(Some)
    }

    /// Alice's second turn: map `|F⟩` to `|3⟩` and read `M3`. Returns the recorded result.
    pub fn alice_measure<R: Rng + ?Sized>(&self, state: &mut EngineState, rng: &mut R) -> Result<bool> {
        match (self, state) {
            (GameEngine::Quantum(q), EngineState::Quantum(rho)) => {
                let mapped = apply_unitary_dm(&q.unprepare, rho);
                let (idx, post) = measure_in_basis(&mapped, &Projector::binary(BoxLabel::B3), rng)?;
                *rho = post;
                Ok(noise::flip_readout(idx == 0, &q.noise, rng))
            }
            (GameEngine::Macroreal(s), EngineState::Macroreal(track)) => {
                track.ball = sample_index(s.shuffle_f.row(track.ball), rng);
                track.history[2] = Some(track.ball);
                Ok(track.ball == BoxLabel::B3)
            }
            _ => unreachable!("engine state does not belong to this engine"),
        }
    }
}

/// One complete game round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_id: u64,
    pub engine: EngineKind,
    pub context: Context,
    /// Absent when Bob did not measure.
    pub bob_outcome: Option<BobOutcome>,
    pub alice_m3: bool,
    pub alice_bets: bool,
    /// Defined iff Alice bet and Bob measured.
    pub alice_wins: Option<bool>,
    /// Ball position at the three times (macrorealist engine only).
    pub ground_truth_boxes: Option<[BoxLabel; 3]>,
    pub seed_path: String,
}

/// Alice's payoff for a round: `0` on a pass, `+1` on a won bet, `−(odds − 1)`
/// on a lost one. A bet on a round where Bob did not measure is void.
pub fn settle(record: &RoundRecord, odds: f64) -> Result<f64> {
    if !record.alice_bets || record.context == Context::NoneChosen {
        return Ok(0.0);
    }
    match record.alice_wins {
        Some(true) => Ok(1.0),
        Some(false) => Ok(-(odds - 1.0)),
        None => Err(Error::SettleBeforeComplete(record.round_id)),
    }
}

const CONTEXT_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// The physics RNG for a round: ChaCha8 keyed by the session seed, one stream per round.
pub fn round_rng(seed: u64, round_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round_id);
    rng
}

pub fn seed_path(seed: u64, round_id: u64) -> String {
    format!("{seed}/{round_id}")
}

/// Plays one round in the given context. Deterministic in `(seed, round_id, context)`.
pub fn play_round_in_context(engine: &GameEngine, seed: u64, round_id: u64, context: Context) -> Result<RoundRecord> {
    let mut rng = round_rng(seed, round_id);
    let mut state = engine.alice_prepare(&mut rng);
    let reading = engine.bob_turn(&mut state, context, &mut rng)?;
    let alice_m3 = engine.alice_measure(&mut state, &mut rng)?;
    let bob_outcome = reading.map(|r| r.recorded);
    let alice_bets = alice_m3;
    let alice_wins = match bob_outcome {
        // An unverifiable claim does not count as a win for Alice.
        Some(outcome) if alice_bets => Some(outcome == BobOutcome::True),
        _ => None,
    };
    let ground_truth_boxes = match state {
        EngineState::Macroreal(track) => {
            let [a, b, c] = track.history;
            Some([a.expect("t1"), b.expect("t2"), c.expect("t3")])
        }
        EngineState::Quantum(_) => None,
    };
    Ok(RoundRecord {
        round_id,
        engine: engine.kind(),
        context,
        bob_outcome,
        alice_m3,
        alice_bets,
        alice_wins,
        ground_truth_boxes,
        seed_path: seed_path(seed, round_id),
    })
}

/// Plays round `round_id` (1-based) with the context taken from the config's schedule.
pub fn play_round(engine: &GameEngine, config: &SessionConfig, round_id: u64) -> Result<RoundRecord> {
    let context = config
        .scheduled_context(round_id, || {
            let mut coin = round_rng(config.seed ^ CONTEXT_STREAM_SALT, round_id);
            coin.gen::<bool>()
        })
        .ok_or_else(|| Error::InvalidConfig("an external context schedule needs contexts supplied per round".into()))?;
    play_round_in_context(engine, config.seed, round_id, context)
}

/// Plays rounds `1..=config.rounds`, fanned out over `threads` workers (all
/// available cores when `None`). Records come back in round order.
pub fn simulate(config: &SessionConfig, threads: Option<usize>) -> Result<Vec<RoundRecord>> {
    let engine = GameEngine::from_config(config)?;
    let run = || (1..=config.rounds).into_par_iter().map(|id| play_round(&engine, config, id)).collect();
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Counts of recorded outcomes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    #[serde(rename = "true")]
    pub true_: u64,
    #[serde(rename = "false")]
    pub false_: u64,
    pub undetermined: u64,
}

impl OutcomeCounts {
    pub fn add(&mut self, o: BobOutcome) {
        *self.get_mut(o) += 1;
    }

    pub fn get(&self, o: BobOutcome) -> u64 {
        match o {
            BobOutcome::True => self.true_,
            BobOutcome::False => self.false_,
            BobOutcome::Undetermined => self.undetermined,
        }
    }

    fn get_mut(&mut self, o: BobOutcome) -> &mut u64 {
        match o {
            BobOutcome::True => &mut self.true_,
            BobOutcome::False => &mut self.false_,
            BobOutcome::Undetermined => &mut self.undetermined,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_ + self.false_ + self.undetermined
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCounts {
    pub preserved: u64,
    pub undetermined: u64,
    pub flipped: u64,
}

impl TagCounts {
    pub fn total(&self) -> u64 {
        self.preserved + self.undetermined + self.flipped
    }

    fn add(&mut self, tag: RepopulationTag) {
        match tag {
            RepopulationTag::Preserved => self.preserved += 1,
            RepopulationTag::Undetermined => self.undetermined += 1,
            RepopulationTag::Flipped => self.flipped += 1,
        }
    }

    fn merge(&mut self, other: &Self) {
        self.preserved += other.preserved;
        self.undetermined += other.undetermined;
        self.flipped += other.flipped;
    }
}

/// Statistics for first measurement `M_first` followed by `M_second`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTable {
    pub first: BoxLabel,
    pub second: BoxLabel,
    /// Second-readout counts conditioned on the first readout, keyed by first
    /// outcome in the order true, false, undetermined.
    pub given_first: [OutcomeCounts; 3],
    /// Repopulation fate after the first readout, when it was truly positive.
    pub first_repopulation: TagCounts,
}

impl PairTable {
    pub fn given(&self, first: BobOutcome) -> &OutcomeCounts {
        &self.given_first[first as usize]
    }
}

/// Bob's pre-game verification data: all nine ordered pairs `(M_j, M_k)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationTables {
    pub engine: EngineKind,
    pub pairs_per_combination: u64,
    pub pairs: Vec<PairTable>,
}

impl VerificationTables {
    pub fn pair(&self, first: BoxLabel, second: BoxLabel) -> &PairTable {
        self.pairs.iter().find(|p| p.first == first && p.second == second).expect("all nine pairs present")
    }

    /// First-readout counts for `M_j`, pooled over the second choice.
    pub fn first_marginal(&self, label: BoxLabel) -> OutcomeCounts {
        let mut out = OutcomeCounts::default();
        for p in self.pairs.iter().filter(|p| p.first == label) {
            for o in BobOutcome::ALL {
                let n = p.given(o).total();
                *out.get_mut(o) += n;
            }
        }
        out
    }

    /// Repopulation fates after a true first `M_j`, pooled over the second choice.
    pub fn repopulation(&self, label: BoxLabel) -> TagCounts {
        let mut out = TagCounts::default();
        for p in self.pairs.iter().filter(|p| p.first == label) {
            out.merge(&p.first_repopulation);
        }
        out
    }
}

const VERIFY_STREAM_SALT: u64 = 0x7f4a_7c15_9e37_79b9;

/// Runs `n_pairs` sequential measurement pairs for each of the nine ordered
/// combinations of boxes on freshly prepared systems.
pub fn run_verification(engine: &GameEngine, n_pairs: u64, seed: u64) -> Result<VerificationTables> {
    let combos: Vec<(usize, BoxLabel, BoxLabel)> = BoxLabel::ALL
        .iter()
        .flat_map(|&a| BoxLabel::ALL.iter().map(move |&b| (a, b)))
        .enumerate()
        .map(|(i, (a, b))| (i, a, b))
        .collect();
    let pairs = combos
        .into_par_iter()
        .map(|(combo, first, second)| {
            let mut table = PairTable {
                first,
                second,
                given_first: [OutcomeCounts::default(); 3],
                first_repopulation: TagCounts::default(),
            };
            for i in 0..n_pairs {
                let mut rng = round_rng(seed ^ VERIFY_STREAM_SALT, combo as u64 * n_pairs + i);
                let mut state = engine.alice_prepare(&mut rng);
                let r1 = engine.measure_box(&mut state, first, &mut rng)?;
                let r2 = engine.measure_box(&mut state, second, &mut rng)?;
                table.given_first[r1.recorded as usize].add(r2.recorded);
                if let Some(tag) = r1.repopulation {
                    table.first_repopulation.add(tag);
                }
            }
            Ok(table)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationTables { engine: engine.kind(), pairs_per_combination: n_pairs, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ContextSchedule;

    fn ideal() -> GameEngine {
        GameEngine::ideal_quantum()
    }

    #[test]
    fn ideal_preparation_is_pure_pre_selected_state() {
        let mut rng = round_rng(1, 1);
        let EngineState::Quantum(rho) = ideal().alice_prepare(&mut rng) else { panic!() };
        assert!(rho.approx_eq(&StateVector::pre_selection().to_density(), 1e-12));
    }

    #[test]
    fn macroreal_uniform_shuffle_from_box_three() {
        let mut s = MrStrategy::<f64>::fair_shuffle();
        s.shuffle_i = StochasticMatrix::deterministic([BoxLabel::B1, BoxLabel::B2, BoxLabel::B3]);
        s.shuffle_i.0[2] = [1.0 / 3.0; 3];
        let engine = GameEngine::Macroreal(s);
        let n = 30_000;
        let mut counts = [0usize; 3];
        for i in 0..n {
            let mut rng = round_rng(3, i);
            let EngineState::Macroreal(t) = engine.alice_prepare(&mut rng) else { panic!() };
            assert_eq!(t.history[0], Some(BoxLabel::B3));
            counts[t.ball.index()] += 1;
        }
        let sigma = (2.0 / 9.0 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn ideal_bob_measurement_post_states() {
        let engine = ideal();
        let mut seen = [false; 2];
        for i in 0..200 {
            let mut rng = round_rng(5, i);
            let mut state = engine.alice_prepare(&mut rng);
            let r = engine.bob_measure(&mut state, Context::M1, &mut rng).unwrap();
            let EngineState::Quantum(rho) = state else { panic!() };
            let expected = if r.actual {
                StateVector::basis(BoxLabel::B1)
            } else {
                StateVector::from_real([0.0, 1.0, 1.0]).unwrap()
            };
            assert!(rho.approx_eq(&expected.to_density(), 1e-12));
            assert_eq!(r.recorded, BobOutcome::from_bool(r.actual));
            seen[r.actual as usize] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn bob_cannot_measure_nothing() {
        let engine = ideal();
        let mut rng = round_rng(0, 0);
        let mut state = engine.alice_prepare(&mut rng);
        assert!(matches!(
            engine.bob_measure(&mut state, Context::NoneChosen, &mut rng),
            Err(Error::InvalidContext(Context::NoneChosen))
        ));
    }

    #[test]
    fn non_disturbing_macroreal_reads_faithfully() {
        let engine = GameEngine::Macroreal(MrStrategy::fair_shuffle());
        let mut state =
            EngineState::Macroreal(BallTrack { ball: BoxLabel::B2, history: [Some(BoxLabel::B3), None, None] });
        let mut rng = round_rng(0, 0);
        let r = engine.bob_measure(&mut state, Context::M1, &mut rng).unwrap();
        assert_eq!(r.recorded, BobOutcome::False);
        let EngineState::Macroreal(t) = state else { panic!() };
        assert_eq!(t.ball, BoxLabel::B2);
        assert_eq!(t.history[1], Some(BoxLabel::B2));
    }

    #[test]
    fn ideal_repeated_measurement_agrees() {
        let engine = ideal();
        for i in 0..500 {
            let mut rng = round_rng(9, i);
            let mut state = engine.alice_prepare(&mut rng);
            let a = engine.bob_measure(&mut state, Context::M2, &mut rng).unwrap();
            let b = engine.bob_measure(&mut state, Context::M2, &mut rng).unwrap();
            assert_eq!(a.recorded, b.recorded);
        }
    }

    #[test]
    fn ideal_alice_never_true_after_bob_false() {
        let engine = ideal();
        for i in 0..2000 {
            let rec =
                play_round_in_context(&engine, 17, i, if i % 2 == 0 { Context::M1 } else { Context::M2 }).unwrap();
            if rec.alice_m3 {
                assert_eq!(rec.bob_outcome, Some(BobOutcome::True));
                assert_eq!(rec.alice_wins, Some(true));
            }
        }
    }

    #[test]
    fn record_invariants() {
        let cfg = SessionConfig::macroreal(MrStrategy::fair_shuffle(), 300, 4).with_schedule(ContextSchedule::Cycle);
        for rec in simulate(&cfg, Some(2)).unwrap() {
            assert_eq!(rec.alice_bets, rec.alice_m3);
            assert_eq!(rec.alice_wins.is_some(), rec.alice_bets && rec.context != Context::NoneChosen);
            assert!(rec.ground_truth_boxes.is_some());
            assert_eq!(rec.bob_outcome.is_some(), rec.context != Context::NoneChosen);
        }
        let q = SessionConfig::quantum(NoiseParams::default(), 300, 4);
        assert!(simulate(&q, None).unwrap().iter().all(|r| r.ground_truth_boxes.is_none()));
    }

    #[test]
    fn settlement() {
        let mut rec = play_round_in_context(&ideal(), 1, 1, Context::M1).unwrap();
        rec.alice_bets = false;
        rec.alice_m3 = false;
        rec.alice_wins = None;
        assert_eq!(settle(&rec, 3.0).unwrap(), 0.0);
        rec.alice_bets = true;
        assert!(matches!(settle(&rec, 3.0), Err(Error::SettleBeforeComplete(1))));
        rec.alice_wins = Some(true);
        assert_eq!(settle(&rec, 3.0).unwrap(), 1.0);
        rec.alice_wins = Some(false);
        assert_eq!(settle(&rec, 3.0).unwrap(), -2.0);
    }

    #[test]
    fn ideal_payoff_over_nine_thousand_rounds() {
        let cfg = SessionConfig::quantum(NoiseParams::ideal(), 9000, 2024);
        let total: f64 = simulate(&cfg, None).unwrap().iter().map(|r| settle(r, 2.0).unwrap()).sum();
        // Bets ~ Binomial(9000, 1/9), each won: mean 1000, sd ~ 29.8.
        assert!((total - 1000.0).abs() < 4.0 * (9000.0f64 * (1.0 / 9.0) * (8.0 / 9.0)).sqrt(), "{total}");
    }

    #[test]
    fn replay_is_deterministic() {
        let engine = GameEngine::Quantum(QuantumModel::new(NoiseParams::default()));
        for id in 1..50 {
            assert_eq!(
                play_round_in_context(&engine, 77, id, Context::M2).unwrap(),
                play_round_in_context(&engine, 77, id, Context::M2).unwrap()
            );
        }
    }

    #[test]
    fn external_schedule_needs_contexts() {
        let cfg = SessionConfig::quantum(NoiseParams::ideal(), 10, 0).with_schedule(ContextSchedule::External);
        let engine = GameEngine::from_config(&cfg).unwrap();
        assert!(play_round(&engine, &cfg, 1).is_err());
    }

    #[test]
    fn schedules() {
        let cfg = SessionConfig::quantum(NoiseParams::ideal(), 10, 0).with_schedule(ContextSchedule::Blocks(2));
        let ctx: Vec<_> = (1..=6).map(|i| cfg.scheduled_context(i, || unreachable!()).unwrap()).collect();
        assert_eq!(ctx, [Context::M1, Context::M1, Context::M2, Context::M2, Context::M1, Context::M1]);
    }

    #[test]
    fn ideal_verification_is_repeatable() {
        let tables = run_verification(&ideal(), 300, 1).unwrap();
        for j in BoxLabel::ALL {
            for k in BoxLabel::ALL {
                let p = tables.pair(j, k);
                let after_true = p.given(BobOutcome::True);
                assert_eq!(after_true.true_, if j == k { after_true.total() } else { 0 });
                if j == k {
                    assert_eq!(p.given(BobOutcome::False).true_, 0);
                }
                assert_eq!(after_true.undetermined, 0);
            }
        }
    }

    #[test]
    fn stochastic_composition() {
        let swap = StochasticMatrix::<f64>::deterministic([BoxLabel::B2, BoxLabel::B1, BoxLabel::B3]);
        let to3 = StochasticMatrix::<f64>::deterministic([BoxLabel::B3, BoxLabel::B3, BoxLabel::B3]);
        let both = swap.then(&to3);
        assert_eq!(both, to3);
        let back = swap.then(&swap);
        assert!(back.is_identity());
    }
}
