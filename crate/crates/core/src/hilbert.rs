//! Exact complex linear algebra on the three-dimensional box space.
//!
//! Basis vectors `|1⟩, |2⟩, |3⟩` are the "ball in box j" states. Everything here
//! is fixed-size (`3 × 3`) and allocation free apart from Kraus operator lists.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DIM: usize = 3;

/// One of the three boxes, i.e. a computational basis label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum BoxLabel {
    B1,
    B2,
    B3,
}

impl BoxLabel {
    pub const ALL: [BoxLabel; 3] = [BoxLabel::B1, BoxLabel::B2, BoxLabel::B3];

    /// Zero-based index into amplitude arrays.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// One-based box number as used in tables and files.
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    /// The two boxes other than `self`, in index order.
    pub fn others(self) -> [BoxLabel; 2] {
        match self {
            BoxLabel::B1 => [BoxLabel::B2, BoxLabel::B3],
            BoxLabel::B2 => [BoxLabel::B1, BoxLabel::B3],
            BoxLabel::B3 => [BoxLabel::B1, BoxLabel::B2],
        }
    }
}

impl From<BoxLabel> for u8 {
    fn from(b: BoxLabel) -> u8 {
        b.number()
    }
}

impl TryFrom<u8> for BoxLabel {
    type Error = String;
    fn try_from(n: u8) -> std::result::Result<Self, String> {
        match n {
            1..=3 => Ok(Self::ALL[n as usize - 1]),
            _ => Err(format!("box number must be 1, 2 or 3, got {n}")),
        }
    }
}

impl fmt::Display for BoxLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Dense `3 × 3` complex matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix3<T> {
    pub m: [[Complex<T>; DIM]; DIM],
}

impl<T: Scalar> Matrix3<T> {
    pub fn zero() -> Self {
        Self { m: [[Complex::new(T::zero(), T::zero()); DIM]; DIM] }
    }

    pub fn identity() -> Self {
        let mut out = Self::zero();
        for i in 0..DIM {
            out.m[i][i] = Complex::new(T::one(), T::zero());
        }
        out
    }

    pub fn from_real(rows: [[T; DIM]; DIM]) -> Self {
        let mut out = Self::zero();
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                out.m[i][j] = Complex::new(x, T::zero());
            }
        }
        out
    }

    /// Builds a matrix whose columns are the given amplitude vectors.
    pub fn from_columns(cols: [[Complex<T>; DIM]; DIM]) -> Self {
        let mut out = Self::zero();
        for (j, col) in cols.iter().enumerate() {
            for (i, &z) in col.iter().enumerate() {
                out.m[i][j] = z;
            }
        }
        out
    }

    /// `|a⟩⟨b|`
    pub fn outer(a: &StateVector<T>, b: &StateVector<T>) -> Self {
        let mut out = Self::zero();
        for i in 0..DIM {
            for j in 0..DIM {
                out.m[i][j] = a.amps[i] * b.amps[j].conj();
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for i in 0..DIM {
            for j in 0..DIM {
                out.m[i][j] = self.m[j][i].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for z in row.iter_mut() {
                *z = *z * s;
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        (0..DIM).map(|i| self.m[i][i]).fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }

    pub fn apply(&self, v: &[Complex<T>; DIM]) -> [Complex<T>; DIM] {
        let mut out = [Complex::new(T::zero(), T::zero()); DIM];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, &x) in v.iter().enumerate() {
                *o = *o + self.m[i][j] * x;
            }
        }
        out
    }

    /// Largest entry-wise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..DIM {
            for j in 0..DIM {
                worst = worst.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn determinant(&self) -> Complex<T> {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Eigenvalues of a Hermitian matrix in ascending order.
    ///
    /// Cyclic Jacobi on the real symmetric embedding `[[Re, −Im], [Im, Re]]`,
    /// whose spectrum is that of `self` with every eigenvalue doubled. The
    /// anti-Hermitian part of the input is ignored.
    pub fn hermitian_eigenvalues(&self) -> [T; DIM] {
        const N: usize = 2 * DIM;
        let h = (*self + self.adjoint()).scale(T::lit(0.5));
        let mut a = [[T::zero(); N]; N];
        for i in 0..DIM {
            for j in 0..DIM {
                let z = h.m[i][j];
                a[i][j] = z.re;
                a[i + DIM][j + DIM] = z.re;
                a[i + DIM][j] = z.im;
                a[i][j + DIM] = -z.im;
            }
        }
        let scale: T = a.iter().flatten().map(|x| *x * *x).sum::<T>();
        for _sweep in 0..64 {
            let off: T = (0..N)
                .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off <= scale * T::epsilon() * T::epsilon() || off == T::zero() {
                break;
            }
            for p in 0..N {
                for q in p + 1..N {
                    if a[p][q] == T::zero() {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for row in a.iter_mut() {
                        let (akp, akq) = (row[p], row[q]);
                        row[p] = c * akp - s * akq;
                        row[q] = s * akp + c * akq;
                    }
                    let (rp, rq) = (a[p], a[q]);
                    for k in 0..N {
                        a[p][k] = c * rp[k] - s * rq[k];
                        a[q][k] = s * rp[k] + c * rq[k];
                    }
                }
            }
        }
        let mut diag: [T; N] = std::array::from_fn(|i| a[i][i]);
        diag.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        std::array::from_fn(|i| (diag[2 * i] + diag[2 * i + 1]) / T::lit(2.0))
    }

    /// Spectral (operator 2-) norm.
    pub fn operator_norm(&self) -> T {
        let gram = self.adjoint() * *self;
        gram.hermitian_eigenvalues()[DIM - 1].max(T::zero()).sqrt()
    }
}

impl<T: Scalar> Mul for Matrix3<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for i in 0..DIM {
            for j in 0..DIM {
                for k in 0..DIM {
                    out.m[i][j] = out.m[i][j] + self.m[i][k] * rhs.m[k][j];
                }
            }
        }
        out
    }
}

impl<T: Scalar> Add for Matrix3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..DIM {
            for j in 0..DIM {
                out.m[i][j] = out.m[i][j] + rhs.m[i][j];
            }
        }
        out
    }
}

impl<T: Scalar> Sub for Matrix3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..DIM {
            for j in 0..DIM {
                out.m[i][j] = out.m[i][j] - rhs.m[i][j];
            }
        }
        out
    }
}

/// A normalised pure state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateVector<T> {
    amps: [Complex<T>; DIM],
}

impl<T: Scalar> StateVector<T> {
    /// Normalises `amps`; fails if the vector is (numerically) zero.
    pub fn new(amps: [Complex<T>; DIM]) -> Result<Self> {
        let n2: T = amps.iter().map(|z| z.norm_sqr()).sum();
        if n2 <= T::zero_prob() {
            return Err(Error::ZeroNorm);
        }
        let inv = T::one() / n2.sqrt();
        Ok(Self { amps: amps.map(|z| z * inv) })
    }

    pub fn from_real(amps: [T; DIM]) -> Result<Self> {
        Self::new(amps.map(|x| Complex::new(x, T::zero())))
    }

    pub fn basis(label: BoxLabel) -> Self {
        let mut amps = [Complex::new(T::zero(), T::zero()); DIM];
        amps[label.index()] = Complex::new(T::one(), T::zero());
        Self { amps }
    }

    /// Alice's pre-selected state `(|1⟩ + |2⟩ + |3⟩)/√3`.
    pub fn pre_selection() -> Self {
        Self::from_real([T::one(), T::one(), T::one()]).expect("nonzero")
    }

    /// Alice's post-selected state `(|1⟩ + |2⟩ − |3⟩)/√3`.
    pub fn post_selection() -> Self {
        Self::from_real([T::one(), T::one(), -T::one()]).expect("nonzero")
    }

    pub fn amplitudes(&self) -> &[Complex<T>; DIM] {
        &self.amps
    }

    pub fn amplitude(&self, label: BoxLabel) -> Complex<T> {
        self.amps[label.index()]
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * *b)
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨self| M |other⟩`
    pub fn matrix_element(&self, m: &Matrix3<T>, other: &Self) -> Complex<T> {
        let v = m.apply(&other.amps);
        self.amps.iter().zip(v.iter()).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * *b)
    }

    pub fn to_density(&self) -> DensityMatrix<T> {
        DensityMatrix(Matrix3::outer(self, self))
    }

    /// Equality up to a global phase.
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: T) -> bool {
        (T::one() - self.inner(other).norm()).abs() <= tol
    }
}

/// A `3 × 3` unitary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary<T>(Matrix3<T>);

impl<T: Scalar> Unitary<T> {
    pub fn new(m: Matrix3<T>) -> Result<Self> {
        let dev = (m.adjoint() * m).max_abs_diff(&Matrix3::identity());
        if dev > T::matrix_tol() {
            return Err(Error::NotUnitary(dev.as_f64()));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Real rotation by `angle` in the plane spanned by `|a⟩, |b⟩`
    /// (`|a⟩ → cos θ |a⟩ + sin θ |b⟩`).
    pub fn plane_rotation(a: BoxLabel, b: BoxLabel, angle: T) -> Self {
        let mut m = Matrix3::identity();
        let (s, c) = angle.sin_cos();
        let (i, j) = (a.index(), b.index());
        m.m[i][i] = Complex::new(c, T::zero());
        m.m[j][j] = Complex::new(c, T::zero());
        m.m[j][i] = Complex::new(s, T::zero());
        m.m[i][j] = Complex::new(-s, T::zero());
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `next ∘ self`: apply `self` first, then `next`.
    pub fn then(&self, next: &Self) -> Self {
        Self(next.0 * self.0)
    }

    pub fn unitarity_defect(&self) -> T {
        (self.0.adjoint() * self.0).max_abs_diff(&Matrix3::identity())
    }
}

/// An orthogonal projector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projector<T>(Matrix3<T>);

impl<T: Scalar> Projector<T> {
    pub fn new(m: Matrix3<T>) -> Result<Self> {
        let tol = T::matrix_tol();
        if !m.is_hermitian(tol) || (m * m).max_abs_diff(&m) > tol {
            return Err(Error::NotProjector);
        }
        Ok(Self(m))
    }

    /// `|j⟩⟨j|`: "the ball is in box j".
    pub fn onto(label: BoxLabel) -> Self {
        let v = StateVector::basis(label);
        Self(Matrix3::outer(&v, &v))
    }

    /// `𝟙 − |j⟩⟨j|`: "the ball is not in box j".
    pub fn not_in(label: BoxLabel) -> Self {
        Self::onto(label).complement()
    }

    pub fn onto_state(s: &StateVector<T>) -> Self {
        Self(Matrix3::outer(s, s))
    }

    pub fn complement(&self) -> Self {
        Self(Matrix3::identity() - self.0)
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }

    /// `{P_j, 𝟙 − P_j}` for a box label, true branch first.
    pub fn binary(label: BoxLabel) -> [Self; 2] {
        [Self::onto(label), Self::not_in(label)]
    }

    /// `{P_1, P_2, P_3}`.
    pub fn box_basis() -> [Self; 3] {
        BoxLabel::ALL.map(Self::onto)
    }
}

/// A mixed state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix<T>(Matrix3<T>);

impl<T: Scalar> DensityMatrix<T> {
    pub fn new(m: Matrix3<T>) -> Result<Self> {
        let rho = Self(m);
        rho.check()?;
        Ok(rho)
    }

    pub fn pure(s: &StateVector<T>) -> Self {
        s.to_density()
    }

    pub fn basis(label: BoxLabel) -> Self {
        StateVector::basis(label).to_density()
    }

    /// Incoherent mixture of box states with the given populations.
    pub fn diagonal(pops: [T; DIM]) -> Result<Self> {
        let mut m = Matrix3::zero();
        for (i, &p) in pops.iter().enumerate() {
            m.m[i][i] = Complex::new(p, T::zero());
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }

    pub fn trace(&self) -> T {
        self.0.trace().re
    }

    /// Box-basis populations `⟨j|ρ|j⟩`.
    pub fn populations(&self) -> [T; DIM] {
        [self.0.m[0][0].re, self.0.m[1][1].re, self.0.m[2][2].re]
    }

    pub fn population(&self, label: BoxLabel) -> T {
        self.0.m[label.index()][label.index()].re
    }

    /// The box holding the largest population (lowest index on ties).
    pub fn dominant_box(&self) -> BoxLabel {
        let pops = self.populations();
        let mut best = 0;
        for i in 1..DIM {
            if pops[i] > pops[best] {
                best = i;
            }
        }
        BoxLabel::ALL[best]
    }

    pub fn eigenvalues(&self) -> [T; DIM] {
        self.0.hermitian_eigenvalues()
    }

    /// `tr(ρ²)`
    pub fn purity(&self) -> T {
        (self.0 * self.0).trace().re
    }

    /// `⟨s|ρ|s⟩`
    pub fn fidelity_with(&self, s: &StateVector<T>) -> T {
        s.matrix_element(&self.0, s).re
    }

    pub fn check(&self) -> Result<()> {
        if !self.0.is_hermitian(T::algebra_tol()) {
            return Err(Error::NotDensityMatrix("not Hermitian"));
        }
        if (self.trace() - T::one()).abs() > T::algebra_tol() {
            return Err(Error::NotDensityMatrix("trace differs from 1"));
        }
        if self.eigenvalues()[0] < -T::matrix_tol() {
            return Err(Error::NotDensityMatrix("negative eigenvalue"));
        }
        Ok(())
    }

    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.0.max_abs_diff(&other.0) <= tol
    }
}

/// A trace-preserving completely positive map in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel<T> {
    kraus: Vec<Matrix3<T>>,
}

impl<T: Scalar> Channel<T> {
    pub fn new(kraus: Vec<Matrix3<T>>) -> Result<Self> {
        let sum = kraus.iter().fold(Matrix3::zero(), |acc, k| acc + k.adjoint() * *k);
        let dev = sum.max_abs_diff(&Matrix3::identity());
        if kraus.is_empty() || dev > T::matrix_tol() {
            return Err(Error::NotTracePreserving(dev.as_f64()));
        }
        Ok(Self { kraus })
    }

    pub fn identity() -> Self {
        Self { kraus: vec![Matrix3::identity()] }
    }

    /// `ρ → (1 − γ) ρ + γ Σ_j P_j ρ P_j`: partial loss of box-basis coherence.
    pub fn dephasing(rate: T) -> Self {
        let rate = rate.max(T::zero()).min(T::one());
        let mut kraus = vec![Matrix3::identity().scale((T::one() - rate).sqrt())];
        if rate > T::zero() {
            kraus.extend(BoxLabel::ALL.iter().map(|&b| Projector::onto(b).0.scale(rate.sqrt())));
        }
        Self { kraus }
    }

    /// Relabels boxes: the population of box `b` moves to `perm[b]`.
    pub fn permutation(perm: [BoxLabel; DIM]) -> Result<Self> {
        let mut m = Matrix3::zero();
        for (src, dst) in perm.iter().enumerate() {
            m.m[dst.index()][src] = Complex::new(T::one(), T::zero());
        }
        Self::new(vec![m])
    }

    /// Channel implementing a unitary.
    pub fn unitary(u: &Unitary<T>) -> Self {
        Self { kraus: vec![u.0] }
    }

    pub fn kraus_ops(&self) -> &[Matrix3<T>] {
        &self.kraus
    }

    /// `next ∘ self`
    pub fn then(&self, next: &Self) -> Self {
        let kraus = next.kraus.iter().flat_map(|b| self.kraus.iter().map(move |a| *b * *a)).collect();
        Self { kraus }
    }
}

fn gram_schmidt_step<T: Scalar>(basis: &[StateVector<T>], mut v: [Complex<T>; DIM]) -> [Complex<T>; DIM] {
    // Two passes keep the completion orthonormal to working precision.
    for _ in 0..2 {
        for b in basis {
            let overlap =
                b.amps.iter().zip(v.iter()).fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * *y);
            for (vi, bi) in v.iter_mut().zip(b.amps.iter()) {
                *vi = *vi - *bi * overlap;
            }
        }
    }
    v
}

/// Unitary whose first column is `first`, completed by Gram–Schmidt over the
/// standard basis in index order.
fn completion<T: Scalar>(first: &StateVector<T>) -> Matrix3<T> {
    let mut cols = vec![*first];
    for label in BoxLabel::ALL {
        if cols.len() == DIM {
            break;
        }
        let resid = gram_schmidt_step(&cols, StateVector::<T>::basis(label).amps);
        let n2: T = resid.iter().map(|z| z.norm_sqr()).sum();
        if n2 > T::lit(1e-6) {
            cols.push(StateVector::new(resid).expect("residual above threshold"));
        }
    }
    Matrix3::from_columns([cols[0].amps, cols[1].amps, cols[2].amps])
}

/// A unitary mapping `source` onto `target` with `⟨target|U|source⟩ = 1`.
///
/// The orthogonal complement of `source` is sent to the orthogonal complement
/// of `target`, each completed deterministically by Gram–Schmidt over
/// `|1⟩, |2⟩, |3⟩` in that order, so `unitary_from_pair(s, s)` is the identity.
pub fn unitary_from_pair<T: Scalar>(source: &StateVector<T>, target: &StateVector<T>) -> Unitary<T> {
    let ws = completion(source);
    let wt = completion(target);
    Unitary(wt * ws.adjoint())
}

/// `⟨s|P|s⟩`
pub fn born_probability<T: Scalar>(p: &Projector<T>, s: &StateVector<T>) -> T {
    s.matrix_element(&p.0, s).re.max(T::zero()).min(T::one())
}

/// Lüders projection of a pure state; returns the normalised post-state and its probability.
pub fn project<T: Scalar>(p: &Projector<T>, s: &StateVector<T>) -> Result<(StateVector<T>, T)> {
    let prob = born_probability(p, s);
    if prob < T::zero_prob() {
        return Err(Error::ZeroProbabilityProjection { probability: prob.as_f64() });
    }
    let post = StateVector::new(p.0.apply(&s.amps))?;
    Ok((post, prob))
}

pub fn apply_unitary<T: Scalar>(u: &Unitary<T>, s: &StateVector<T>) -> StateVector<T> {
    StateVector { amps: u.0.apply(&s.amps) }
}

/// `U ρ U†`
pub fn apply_unitary_dm<T: Scalar>(u: &Unitary<T>, rho: &DensityMatrix<T>) -> DensityMatrix<T> {
    DensityMatrix(u.0 * rho.0 * u.0.adjoint())
}

/// `Σ_k K_k ρ K_k†`
pub fn apply_channel<T: Scalar>(c: &Channel<T>, rho: &DensityMatrix<T>) -> DensityMatrix<T> {
    DensityMatrix(c.kraus.iter().fold(Matrix3::zero(), |acc, k| acc + *k * rho.0 * k.adjoint()))
}

/// `tr(P ρ)`
pub fn outcome_probability<T: Scalar>(p: &Projector<T>, rho: &DensityMatrix<T>) -> T {
    (p.0 * rho.0).trace().re.max(T::zero()).min(T::one())
}

/// Samples a projective measurement on `rho`.
///
/// Draws exactly one uniform variate from `rng`. Returns the outcome index into
/// `projectors` and the Lüders post-state `PρP / tr(Pρ)`.
pub fn measure_in_basis<T: Scalar, R: Rng + ?Sized>(
    rho: &DensityMatrix<T>,
    projectors: &[Projector<T>],
    rng: &mut R,
) -> Result<(usize, DensityMatrix<T>)> {
    let total = projectors.iter().fold(Matrix3::zero(), |acc, p| acc + p.0);
    if projectors.is_empty() || total.max_abs_diff(&Matrix3::identity()) > T::matrix_tol() {
        return Err(Error::IncompleteMeasurement);
    }
    let probs: Vec<T> = projectors.iter().map(|p| outcome_probability(p, rho)).collect();
    let norm: T = probs.iter().copied().sum();
    let u = T::lit(rng.gen::<f64>()) * norm;
    let mut acc = T::zero();
    let mut chosen = None;
    for (i, &p) in probs.iter().enumerate() {
        acc = acc + p;
        if p > T::zero() && u < acc {
            chosen = Some(i);
            break;
        }
    }
    // Round-off at the top of the cumulative sum: take the last non-empty branch.
    let idx = chosen.unwrap_or_else(|| probs.iter().rposition(|&p| p > T::zero()).expect("some branch has weight"));
    let p = &projectors[idx];
    let post = DensityMatrix((p.0 * rho.0 * p.0).scale(T::one() / probs[idx]));
    Ok((idx, post))
}
