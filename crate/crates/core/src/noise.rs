//! Error model for the experimental imperfections: imperfect heralding of the
//! initial box state, binary readout errors, loss of the box label during the
//! repopulation step after a positive readout, over-rotated control pulses and
//! optional dephasing.
//!
//! Every stochastic function consumes a fixed number of uniform variates from
//! the supplied RNG whatever the parameter values, so an ideal parameter set
//! and a noisy one walk the same random stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{apply_channel, BoxLabel, Channel, DensityMatrix, Unitary};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseParams {
    /// Probability that a heralded preparation really is `|3⟩`.
    pub f_herald: f64,
    /// Fraction of preparation attempts that herald at all. Bookkeeping only.
    pub herald_success_rate: f64,
    /// Probability that a binary readout reports the true outcome.
    pub f_readout: f64,
    /// Probability that the box label survives repopulation after a true `M_j`.
    pub p_preserve: f64,
    /// Share of the lost cases that surface as an undetermined record rather
    /// than a silent relabelling.
    pub p_undetermined_given_loss: f64,
    /// Systematic over-rotation of Alice's control unitaries, in radians.
    pub rf_epsilon: f64,
    /// Per-step dephasing strength in the box basis.
    pub dephasing_rate: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            f_herald: 0.95,
            herald_success_rate: 0.01,
            f_readout: 0.96,
            p_preserve: 0.70,
            p_undetermined_given_loss: 0.5,
            rf_epsilon: 0.0,
            dephasing_rate: 0.0,
        }
    }
}

impl NoiseParams {
    /// A perfect apparatus.
    pub fn ideal() -> Self {
        Self {
            f_herald: 1.0,
            herald_success_rate: 1.0,
            f_readout: 1.0,
            p_preserve: 1.0,
            p_undetermined_given_loss: 0.0,
            rf_epsilon: 0.0,
            dephasing_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("f_herald", self.f_herald),
            ("herald_success_rate", self.herald_success_rate),
            ("f_readout", self.f_readout),
            ("p_preserve", self.p_preserve),
            ("p_undetermined_given_loss", self.p_undetermined_given_loss),
            ("dephasing_rate", self.dephasing_rate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("noise.{name} = {p} is outside [0, 1]")));
            }
        }
        if !self.rf_epsilon.is_finite() {
            return Err(Error::InvalidConfig("noise.rf_epsilon must be finite".into()));
        }
        if self.herald_success_rate == 0.0 {
            return Err(Error::InvalidConfig("noise.herald_success_rate must be positive".into()));
        }
        Ok(())
    }

    /// Expected number of preparation attempts behind `heralded` accepted trials.
    pub fn expected_attempts(&self, heralded: u64) -> f64 {
        heralded as f64 / self.herald_success_rate
    }

    /// Probability of an undetermined record given a true `M_j` outcome.
    pub fn p_undetermined(&self) -> f64 {
        (1.0 - self.p_preserve) * self.p_undetermined_given_loss
    }

    /// Probability of a silent box relabelling given a true `M_j` outcome.
    pub fn p_flip(&self) -> f64 {
        (1.0 - self.p_preserve) * (1.0 - self.p_undetermined_given_loss)
    }
}

/// What happened to the box label during repopulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepopulationTag {
    Preserved,
    Undetermined,
    Flipped,
}

/// Heralded preparation: `|3⟩⟨3|` with probability `f_herald`, otherwise one of
/// the other two box states with equal probability. Draws two variates.
pub fn noisy_initial_state<T: Scalar, R: Rng + ?Sized>(params: &NoiseParams, rng: &mut R) -> DensityMatrix<T> {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    if u < params.f_herald {
        DensityMatrix::basis(BoxLabel::B3)
    } else {
        let [a, b] = BoxLabel::B3.others();
        DensityMatrix::basis(if v < 0.5 { a } else { b })
    }
}

/// Passes a binary record through the readout. Only the record is affected.
/// Draws one variate.
pub fn flip_readout<R: Rng + ?Sized>(true_outcome: bool, params: &NoiseParams, rng: &mut R) -> bool {
    let u: f64 = rng.gen();
    if u < params.f_readout {
        true_outcome
    } else {
        !true_outcome
    }
}

/// Repopulation after a true `M_j` outcome. Draws two variates.
///
/// `rho` is expected to be (close to) a box eigenstate; its dominant box is the
/// label that may be lost. On a flip the label is redrawn uniformly from the
/// other two boxes.
pub fn repopulation_channel<T: Scalar, R: Rng + ?Sized>(
    rho: &DensityMatrix<T>,
    params: &NoiseParams,
    rng: &mut R,
) -> (DensityMatrix<T>, RepopulationTag) {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    if u < params.p_preserve {
        (*rho, RepopulationTag::Preserved)
    } else if u < params.p_preserve + params.p_undetermined() {
        (*rho, RepopulationTag::Undetermined)
    } else {
        let [a, b] = rho.dominant_box().others();
        (DensityMatrix::basis(if v < 0.5 { a } else { b }), RepopulationTag::Flipped)
    }
}

/// Default coupled plane for over-rotation: the `{|1⟩, |3⟩}` transition.
pub const DEFAULT_PULSE_PLANE: (BoxLabel, BoxLabel) = (BoxLabel::B1, BoxLabel::B3);

/// `ideal` followed by a spurious rotation of `rf_epsilon` in the default pulse plane.
pub fn perturbed_unitary<T: Scalar>(ideal: &Unitary<T>, params: &NoiseParams) -> Unitary<T> {
    perturbed_unitary_in_plane(ideal, params, DEFAULT_PULSE_PLANE)
}

pub fn perturbed_unitary_in_plane<T: Scalar>(
    ideal: &Unitary<T>,
    params: &NoiseParams,
    plane: (BoxLabel, BoxLabel),
) -> Unitary<T> {
    if params.rf_epsilon == 0.0 {
        return *ideal;
    }
    ideal.then(&Unitary::plane_rotation(plane.0, plane.1, T::lit(params.rf_epsilon)))
}

/// One step of box-basis dephasing.
pub fn dephase<T: Scalar>(rho: &DensityMatrix<T>, params: &NoiseParams) -> DensityMatrix<T> {
    if params.dephasing_rate == 0.0 {
        return *rho;
    }
    apply_channel(&Channel::dephasing(T::lit(params.dephasing_rate)), rho)
}
