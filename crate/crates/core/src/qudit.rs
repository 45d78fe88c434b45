//! Modulo-d arithmetic and a small statevector engine for qudits.
//!
//! States are dense amplitude vectors over a mixed-radix outcome space,
//! indexed row-major over the subsystem dimensions (the last subsystem
//! varies fastest). Two measurement bases are supported: the computational
//! basis (T1) and its discrete Fourier image (T2).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::operator::Operator;

/// Absolute tolerance for normalization and amplitude comparisons.
pub const AMPLITUDE_TOL: f64 = 1e-9;

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

fn check_digit(value: usize, dim: usize) -> Result<()> {
    if value >= dim {
        Err(Error::InvalidDigit { value, dim })
    } else {
        Ok(())
    }
}

/// `(a + b) mod d`.
pub fn mod_add(a: usize, b: usize, d: usize) -> Result<usize> {
    check_dim(d)?;
    check_digit(a, d)?;
    check_digit(b, d)?;
    Ok((a + b) % d)
}

/// `(a − b) mod d`, always in `[0, d)`.
pub fn mod_sub(a: usize, b: usize, d: usize) -> Result<usize> {
    check_dim(d)?;
    check_digit(a, d)?;
    check_digit(b, d)?;
    Ok((a + d - b) % d)
}

/// Qudit dimension `d` together with the private-input bound `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionParams {
    d: usize,
    h: usize,
}

impl DimensionParams {
    pub fn new(d: usize) -> Result<Self> {
        check_dim(d)?;
        let h = if d.is_multiple_of(2) { d / 2 } else { (d - 1) / 2 };
        Ok(Self { d, h })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Largest admissible private input; also the smallest value of `q`.
    pub fn h(&self) -> usize {
        self.h
    }

    pub fn check_digit(&self, value: usize) -> Result<()> {
        check_digit(value, self.d)
    }
}

/// Measurement / preparation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// T1: `{|0⟩, …, |d−1⟩}`.
    #[serde(rename = "T1")]
    Computational,
    /// T2: `{F|0⟩, …, F|d−1⟩}`.
    #[serde(rename = "T2")]
    Fourier,
}

impl Basis {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            Basis::Computational
        } else {
            Basis::Fourier
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Basis::Computational => "T1",
            Basis::Fourier => "T2",
        }
    }
}

/// A normalized pure state over one or more qudit subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeState {
    dims: Vec<usize>,
    amplitudes: Vec<Complex64>,
}

impl Serialize for AmplitudeState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.amplitudes.iter().map(|a| [a.re, a.im]).collect();
        let mut s = serializer.serialize_struct("AmplitudeState", 2)?;
        s.serialize_field("dims", &self.dims)?;
        s.serialize_field("amplitudes", &pairs)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for AmplitudeState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dims: Vec<usize>,
            amplitudes: Vec<[f64; 2]>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let amps = raw.amplitudes.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        AmplitudeState::new(raw.dims, amps).map_err(serde::de::Error::custom)
    }
}

/// Result of a projective measurement on one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub outcome: usize,
    /// Conditional state of the remaining subsystems; `None` when nothing is left.
    pub post_state: Option<AmplitudeState>,
}

impl AmplitudeState {
    pub fn new(dims: Vec<usize>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::DimensionMismatch("state needs at least one subsystem".into()));
        }
        for &d in &dims {
            check_dim(d)?;
        }
        let expected: usize = dims.iter().product();
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for outcome space of size {expected}",
                amplitudes.len()
            )));
        }
        let state = Self { dims, amplitudes };
        state.check_normalized()?;
        Ok(state)
    }

    /// Computational basis state `|t⟩`.
    pub fn basis_state(t: usize, d: usize) -> Result<Self> {
        check_dim(d)?;
        check_digit(t, d)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); d];
        amplitudes[t] = Complex64::new(1.0, 0.0);
        Ok(Self { dims: vec![d], amplitudes })
    }

    /// Fourier basis state `F|t⟩`.
    pub fn fourier_state(t: usize, d: usize) -> Result<Self> {
        check_dim(d)?;
        check_digit(t, d)?;
        let scale = 1.0 / (d as f64).sqrt();
        let amplitudes =
            (0..d).map(|alpha| Complex64::from_polar(scale, 2.0 * PI * ((alpha * t) % d) as f64 / d as f64)).collect();
        Ok(Self { dims: vec![d], amplitudes })
    }

    /// The `value`-th element of `basis`.
    pub fn prepare(basis: Basis, value: usize, d: usize) -> Result<Self> {
        match basis {
            Basis::Computational => Self::basis_state(value, d),
            Basis::Fourier => Self::fourier_state(value, d),
        }
    }

    /// `|Φ(u,v)⟩ = d^{-1/2} Σ_j e^{2πiju/d} |j⟩|j ⊕ v⟩`.
    pub fn bell_state(u: usize, v: usize, d: usize) -> Result<Self> {
        check_dim(d)?;
        check_digit(u, d)?;
        check_digit(v, d)?;
        let scale = 1.0 / (d as f64).sqrt();
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); d * d];
        for j in 0..d {
            amplitudes[j * d + (j + v) % d] = Complex64::from_polar(scale, 2.0 * PI * ((j * u) % d) as f64 / d as f64);
        }
        Ok(Self { dims: vec![d, d], amplitudes })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn subsystem_count(&self) -> usize {
        self.dims.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > AMPLITUDE_TOL {
            Err(Error::NotNormalized(n))
        } else {
            Ok(())
        }
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.dims.len() {
            Err(Error::InvalidSubsystem { index: site, count: self.dims.len() })
        } else {
            Ok(())
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &AmplitudeState) -> Result<Complex64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch("inner product of differently shaped states".into()));
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|²`; insensitive to global phase.
    pub fn fidelity(&self, other: &AmplitudeState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Entry-wise comparison within `tol`.
    pub fn approx_eq(&self, other: &AmplitudeState, tol: f64) -> bool {
        self.dims == other.dims && self.amplitudes.iter().zip(&other.amplitudes).all(|(a, b)| (a - b).norm() <= tol)
    }

    /// `self ⊗ other`; `other`'s subsystems are appended after ours.
    pub fn tensor(&self, other: &AmplitudeState) -> AmplitudeState {
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        AmplitudeState { dims, amplitudes }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Applies `op` to the listed subsystems (in the listed order, row-major).
    pub fn apply(&self, op: &Operator, sites: &[usize]) -> Result<AmplitudeState> {
        for (i, &s) in sites.iter().enumerate() {
            self.check_site(s)?;
            if sites[..i].contains(&s) {
                return Err(Error::DimensionMismatch(format!("subsystem {s} listed twice")));
            }
        }
        let local_dims: Vec<usize> = sites.iter().map(|&s| self.dims[s]).collect();
        let local_size: usize = local_dims.iter().product();
        if op.dim() != local_size {
            return Err(Error::DimensionMismatch(format!(
                "operator of dimension {} applied to subsystems of total dimension {local_size}",
                op.dim()
            )));
        }
        let strides = self.strides();
        let offsets: Vec<usize> = (0..local_size)
            .map(|mut l| {
                let mut off = 0;
                for k in (0..sites.len()).rev() {
                    off += (l % local_dims[k]) * strides[sites[k]];
                    l /= local_dims[k];
                }
                off
            })
            .collect();

        let mut out = self.amplitudes.clone();
        let mut block = vec![Complex64::new(0.0, 0.0); local_size];
        for base in 0..self.amplitudes.len() {
            if sites.iter().any(|&s| !(base / strides[s]).is_multiple_of(self.dims[s])) {
                continue;
            }
            for (slot, off) in block.iter_mut().zip(&offsets) {
                *slot = self.amplitudes[base + off];
            }
            for (value, off) in op.apply(&block).into_iter().zip(&offsets) {
                out[base + off] = value;
            }
        }
        Ok(AmplitudeState { dims: self.dims.clone(), amplitudes: out })
    }

    fn rotate_into(&self, site: usize, basis: Basis) -> Result<AmplitudeState> {
        match basis {
            Basis::Computational => Ok(self.clone()),
            Basis::Fourier => self.apply(&Operator::inverse_fourier(self.dims[site]), &[site]),
        }
    }

    fn rotate_out_of(&self, site: usize, basis: Basis) -> Result<AmplitudeState> {
        match basis {
            Basis::Computational => Ok(self.clone()),
            Basis::Fourier => self.apply(&Operator::fourier(self.dims[site]), &[site]),
        }
    }

    fn computational_marginal(&self, site: usize) -> Vec<f64> {
        let stride = self.strides()[site];
        let d = self.dims[site];
        let mut probs = vec![0.0; d];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            probs[(idx / stride) % d] += a.norm_sqr();
        }
        probs
    }

    /// Born-rule outcome distribution for measuring `site` in `basis`.
    pub fn probabilities(&self, site: usize, basis: Basis) -> Result<Vec<f64>> {
        self.check_site(site)?;
        Ok(self.rotate_into(site, basis)?.computational_marginal(site))
    }

    /// Projects `site` onto outcome `outcome` of `basis` and renormalizes,
    /// keeping the measured subsystem (now in the corresponding basis state).
    pub fn project(&self, site: usize, basis: Basis, outcome: usize) -> Result<AmplitudeState> {
        self.check_site(site)?;
        check_digit(outcome, self.dims[site])?;
        let rotated = self.rotate_into(site, basis)?;
        let projected = rotated.project_computational(site, outcome)?;
        projected.rotate_out_of(site, basis)
    }

    fn project_computational(&self, site: usize, outcome: usize) -> Result<AmplitudeState> {
        let stride = self.strides()[site];
        let d = self.dims[site];
        let mut amplitudes = self.amplitudes.clone();
        let mut weight = 0.0;
        for (idx, a) in amplitudes.iter_mut().enumerate() {
            if (idx / stride) % d == outcome {
                weight += a.norm_sqr();
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        if weight <= f64::EPSILON {
            return Err(Error::ImpossibleOutcome { outcome });
        }
        let scale = 1.0 / weight.sqrt();
        for a in amplitudes.iter_mut() {
            *a *= scale;
        }
        Ok(AmplitudeState { dims: self.dims.clone(), amplitudes })
    }

    /// Samples a measurement of `site` in `basis` and returns the outcome
    /// with the collapsed state. The measured subsystem stays in the state.
    pub fn collapse<R: Rng + ?Sized>(&self, site: usize, basis: Basis, rng: &mut R) -> Result<(usize, AmplitudeState)> {
        self.check_site(site)?;
        self.check_normalized()?;
        let rotated = self.rotate_into(site, basis)?;
        let outcome = sample_index(&rotated.computational_marginal(site), rng);
        let collapsed = rotated.project_computational(site, outcome)?.rotate_out_of(site, basis)?;
        Ok((outcome, collapsed))
    }

    /// Conditional state of every subsystem except `site`, given that `site`
    /// is in computational state `outcome`. `None` if nothing remains.
    fn remaining_given(&self, site: usize, outcome: usize) -> Result<Option<AmplitudeState>> {
        if self.dims.len() == 1 {
            return Ok(None);
        }
        let stride = self.strides()[site];
        let d = self.dims[site];
        let amplitudes: Vec<Complex64> = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(idx, _)| (idx / stride) % d == outcome)
            .map(|(_, a)| *a)
            .collect();
        let weight: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if weight <= f64::EPSILON {
            return Err(Error::ImpossibleOutcome { outcome });
        }
        let scale = 1.0 / weight.sqrt();
        let mut dims = self.dims.clone();
        dims.remove(site);
        Ok(Some(AmplitudeState { dims, amplitudes: amplitudes.into_iter().map(|a| a * scale).collect() }))
    }
}

/// Inverse-CDF sampling from a (nearly) normalized probability vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = i;
        }
        acc += p;
        if target < acc {
            return i;
        }
    }
    last_nonzero
}

/// Measures one subsystem of `state` in `basis`; the measured subsystem is
/// consumed and the post-measurement state covers the rest.
pub fn measure<R: Rng + ?Sized>(
    state: &AmplitudeState,
    subsystem: usize,
    basis: Basis,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    state.check_site(subsystem)?;
    state.check_normalized()?;
    let rotated = state.rotate_into(subsystem, basis)?;
    let outcome = sample_index(&rotated.computational_marginal(subsystem), rng);
    let post_state = rotated.remaining_given(subsystem, outcome)?;
    Ok(MeasurementRecord { outcome, post_state })
}

/// T1 measurement of both halves of `|Φ(u,v)⟩` without building the state:
/// `m1` is uniform and `m2 = m1 ⊕ v`.
pub fn measure_pair_computational<R: Rng + ?Sized>(
    u: usize,
    v: usize,
    d: usize,
    rng: &mut R,
) -> Result<(usize, usize)> {
    check_dim(d)?;
    check_digit(u, d)?;
    check_digit(v, d)?;
    let m1 = rng.random_range(0..d);
    Ok((m1, (m1 + v) % d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_amps(state: &AmplitudeState, want: &[Complex64]) {
        assert_eq!(state.amplitudes().len(), want.len());
        for (a, b) in state.amplitudes().iter().zip(want) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn modular_arithmetic_examples() {
        assert_eq!(mod_add(mod_add(9, 4, 11).unwrap(), 7, 11).unwrap(), 9);
        assert_eq!(mod_add(5, 0, 11).unwrap(), 5);
        assert_eq!(mod_add(6, 6, 11).unwrap(), 1);
        assert_eq!(mod_sub(8, 9, 11).unwrap(), 10);
        assert_eq!(mod_sub(7, 7, 11).unwrap(), 0);
        assert_eq!(mod_sub(0, 5, 11).unwrap(), 6);
    }

    #[test]
    fn modular_arithmetic_errors() {
        assert!(matches!(mod_add(0, 0, 1), Err(Error::InvalidDimension(1))));
        assert!(matches!(mod_sub(0, 0, 0), Err(Error::InvalidDimension(0))));
        assert!(matches!(mod_add(11, 0, 11), Err(Error::InvalidDigit { value: 11, dim: 11 })));
    }

    #[test]
    fn input_bound() {
        assert_eq!(DimensionParams::new(11).unwrap().h(), 5);
        assert_eq!(DimensionParams::new(8).unwrap().h(), 4);
        assert_eq!(DimensionParams::new(2).unwrap().h(), 1);
        assert!(DimensionParams::new(1).is_err());
    }

    #[test]
    fn fourier_state_examples() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_amps(&AmplitudeState::fourier_state(0, 2).unwrap(), &[c(r, 0.0), c(r, 0.0)]);
        assert_amps(&AmplitudeState::fourier_state(1, 2).unwrap(), &[c(r, 0.0), c(-r, 0.0)]);
        let s = 1.0 / 3f64.sqrt();
        let w = Complex64::from_polar(s, 2.0 * PI / 3.0);
        let w2 = Complex64::from_polar(s, 4.0 * PI / 3.0);
        assert_amps(&AmplitudeState::fourier_state(1, 3).unwrap(), &[c(s, 0.0), w, w2]);
        assert!(matches!(AmplitudeState::fourier_state(3, 3), Err(Error::InvalidDigit { .. })));
    }

    #[test]
    fn bell_state_examples() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let z = c(0.0, 0.0);
        assert_amps(&AmplitudeState::bell_state(0, 0, 2).unwrap(), &[c(r, 0.0), z, z, c(r, 0.0)]);
        assert_amps(&AmplitudeState::bell_state(1, 0, 2).unwrap(), &[c(r, 0.0), z, z, c(-r, 0.0)]);
        let s = c(1.0 / 3f64.sqrt(), 0.0);
        // |01⟩ + |12⟩ + |20⟩
        assert_amps(&AmplitudeState::bell_state(0, 1, 3).unwrap(), &[z, s, z, z, z, s, s, z, z]);
        assert!(AmplitudeState::bell_state(0, 2, 2).is_err());
    }

    #[test]
    fn eigenstate_measurement_is_certain() {
        let mut rng = SeedStream::new(1).rng();
        for _ in 0..50 {
            let rec = measure(&AmplitudeState::fourier_state(3, 7).unwrap(), 0, Basis::Fourier, &mut rng).unwrap();
            assert_eq!(rec.outcome, 3);
            assert!(rec.post_state.is_none());
        }
    }

    #[test]
    fn sequential_bell_measurement_is_correlated() {
        let mut rng = SeedStream::new(2).rng();
        let bell = AmplitudeState::bell_state(0, 3, 11).unwrap();
        let mut seen = [false; 11];
        for _ in 0..500 {
            let first = measure(&bell, 0, Basis::Computational, &mut rng).unwrap();
            let rest = first.post_state.unwrap();
            let second = measure(&rest, 0, Basis::Computational, &mut rng).unwrap();
            assert_eq!(second.outcome, (first.outcome + 3) % 11);
            seen[first.outcome] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn born_rule_on_uniform_superposition() {
        // oracle: |1/√2|² = 0.5
        let oracle = AmplitudeState::fourier_state(0, 2).unwrap().amplitudes()[0].norm_sqr();
        let mut rng = SeedStream::new(3).rng();
        let state = AmplitudeState::fourier_state(0, 2).unwrap();
        let zeros =
            (0..10_000).filter(|_| measure(&state, 0, Basis::Computational, &mut rng).unwrap().outcome == 0).count();
        assert!((zeros as f64 / 1e4 - oracle).abs() < 0.02);
    }

    #[test]
    fn measure_rejects_unnormalized() {
        let s = AmplitudeState { dims: vec![2], amplitudes: vec![c(1.0, 0.0), c(1.0, 0.0)] };
        let mut rng = SeedStream::new(0).rng();
        assert!(matches!(measure(&s, 0, Basis::Computational, &mut rng), Err(Error::NotNormalized(_))));
        assert!(AmplitudeState::new(vec![2], vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn measure_rejects_bad_subsystem() {
        let mut rng = SeedStream::new(0).rng();
        let s = AmplitudeState::bell_state(0, 0, 2).unwrap();
        assert!(matches!(measure(&s, 2, Basis::Computational, &mut rng), Err(Error::InvalidSubsystem { .. })));
    }

    #[test]
    fn pair_shortcut_satisfies_correlation() {
        let mut rng = SeedStream::new(4).rng();
        for d in 2..=16 {
            for v in 0..d {
                let (m1, m2) = measure_pair_computational(0, v, d, &mut rng).unwrap();
                assert_eq!(mod_add(mod_sub(m1, m2, d).unwrap(), v, d).unwrap(), 0);
            }
        }
    }

    #[test]
    fn conjugate_bases_are_mutually_unbiased() {
        for d in 2..=16 {
            for t in 0..d {
                let probs =
                    AmplitudeState::fourier_state(t, d).unwrap().probabilities(0, Basis::Computational).unwrap();
                assert!(probs.iter().all(|p| (p - 1.0 / d as f64).abs() < 1e-9));
                let probs = AmplitudeState::basis_state(t, d).unwrap().probabilities(0, Basis::Fourier).unwrap();
                assert!(probs.iter().all(|p| (p - 1.0 / d as f64).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn bell_outcome_distribution_is_independent_of_phase_index() {
        for d in 2..=8 {
            for v in 0..d {
                let reference = joint_probs(&AmplitudeState::bell_state(0, v, d).unwrap());
                for u in 1..d {
                    let probs = joint_probs(&AmplitudeState::bell_state(u, v, d).unwrap());
                    assert!(probs.iter().zip(&reference).all(|(a, b)| (a - b).abs() < 1e-12));
                }
            }
        }
    }

    fn joint_probs(state: &AmplitudeState) -> Vec<f64> {
        state.amplitudes().iter().map(|a| a.norm_sqr()).collect()
    }

    #[test]
    fn apply_on_second_site_matches_kron() {
        let bell = AmplitudeState::bell_state(1, 2, 3).unwrap();
        let f = Operator::fourier(3);
        let direct = bell.apply(&f, &[1]).unwrap();
        let via_kron = bell.apply(&Operator::identity(3).kron(&f), &[0, 1]).unwrap();
        assert!(direct.approx_eq(&via_kron, 1e-12));
        // reversed site order swaps the tensor factors
        let swapped = bell.apply(&f.kron(&Operator::identity(3)), &[1, 0]).unwrap();
        assert!(direct.approx_eq(&swapped, 1e-12));
    }

    #[test]
    fn collapse_keeps_subsystem_in_basis_state() {
        let mut rng = SeedStream::new(5).rng();
        let s = AmplitudeState::basis_state(2, 5).unwrap();
        let (t, collapsed) = s.collapse(0, Basis::Fourier, &mut rng).unwrap();
        let f = collapsed.fidelity(&AmplitudeState::fourier_state(t, 5).unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn project_impossible_outcome() {
        let s = AmplitudeState::basis_state(2, 5).unwrap();
        assert!(matches!(s.project(0, Basis::Computational, 1), Err(Error::ImpossibleOutcome { outcome: 1 })));
    }

    #[test]
    fn json_vector_layout() {
        let s = AmplitudeState::bell_state(0, 1, 2).unwrap();
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["dims"], serde_json::json!([2, 2]));
        let pairs: Vec<[f64; 2]> = serde_json::from_value(json["amplitudes"].clone()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in pairs.iter().zip([[0.0, 0.0], [r, 0.0], [r, 0.0], [0.0, 0.0]]) {
            assert!((got[0] - want[0]).abs() < 1e-15 && (got[1] - want[1]).abs() < 1e-15);
        }
        let back: AmplitudeState = serde_json::from_value(json).unwrap();
        assert!(back.approx_eq(&s, 0.0));
    }

    proptest! {
        #[test]
        fn constructed_states_are_normalized(d in 2usize..=16, a in 0usize..16, b in 0usize..16) {
            let (a, b) = (a % d, b % d);
            prop_assert!((AmplitudeState::fourier_state(a, d).unwrap().norm_sqr() - 1.0).abs() < 1e-9);
            prop_assert!((AmplitudeState::bell_state(a, b, d).unwrap().norm_sqr() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn fourier_round_trip(d in 2usize..=16, seed in any::<u64>()) {
            let mut rng = SeedStream::new(seed).rng();
            let amps: Vec<Complex64> = (0..d).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let state = AmplitudeState::new(vec![d], amps.into_iter().map(|a| a / norm).collect()).unwrap();
            let back = state.apply(&Operator::fourier(d), &[0]).unwrap().apply(&Operator::inverse_fourier(d), &[0]).unwrap();
            prop_assert!(back.approx_eq(&state, 1e-9));
        }

        #[test]
        fn add_sub_inverse(d in 2usize..=64, a in 0usize..64, b in 0usize..64) {
            let (a, b) = (a % d, b % d);
            prop_assert_eq!(mod_sub(mod_add(a, b, d).unwrap(), b, d).unwrap(), a);
        }
    }
}
