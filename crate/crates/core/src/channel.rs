//! Decoy-photon dressing, eavesdropper channels and the decoy security check.
//!
//! Qudits live in a [`QuantumMemory`]: an arena of registers, each a joint
//! pure state over every subsystem that has become entangled (Bell partners,
//! attacker probes, intercepted originals). A [`QuditRef`] names one
//! subsystem of one register. Sequences in flight are lists of refs, so an
//! attack on one half of a Bell pair is visible when the other half is
//! measured later.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::Operator;
use crate::qudit::{AmplitudeState, Basis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuditRef {
    register: usize,
    site: usize,
}

impl QuditRef {
    pub fn register(&self) -> usize {
        self.register
    }

    pub fn site(&self) -> usize {
        self.site
    }
}

#[derive(Debug, Clone, Default)]
pub struct QuantumMemory {
    registers: Vec<AmplitudeState>,
}

impl QuantumMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `state` as a new register and returns refs to its subsystems.
    pub fn alloc(&mut self, state: AmplitudeState) -> Vec<QuditRef> {
        let register = self.registers.len();
        let sites = state.subsystem_count();
        self.registers.push(state);
        (0..sites).map(|site| QuditRef { register, site }).collect()
    }

    pub fn alloc_qudit(&mut self, state: AmplitudeState) -> Result<QuditRef> {
        if state.subsystem_count() != 1 {
            return Err(Error::DimensionMismatch("expected a single-qudit state".into()));
        }
        Ok(self.alloc(state)[0])
    }

    pub fn register(&self, q: QuditRef) -> Result<&AmplitudeState> {
        self.registers
            .get(q.register)
            .filter(|s| q.site < s.subsystem_count())
            .ok_or_else(|| Error::ProtocolDesync(format!("dangling qudit reference {q:?}")))
    }

    pub fn dim(&self, q: QuditRef) -> Result<usize> {
        Ok(self.register(q)?.dims()[q.site])
    }

    pub fn register_count(&self) -> usize {
        self.registers.len()
    }

    pub fn probabilities(&self, q: QuditRef, basis: Basis) -> Result<Vec<f64>> {
        self.register(q)?.probabilities(q.site, basis)
    }

    /// Measures `q` in `basis`; the register collapses in place.
    pub fn measure<R: Rng + ?Sized>(&mut self, q: QuditRef, basis: Basis, rng: &mut R) -> Result<usize> {
        let (outcome, collapsed) = self.register(q)?.collapse(q.site, basis, rng)?;
        self.registers[q.register] = collapsed;
        Ok(outcome)
    }

    /// Measurement with a prescribed outcome (post-selection).
    pub fn project(&mut self, q: QuditRef, basis: Basis, outcome: usize) -> Result<()> {
        let projected = self.register(q)?.project(q.site, basis, outcome)?;
        self.registers[q.register] = projected;
        Ok(())
    }

    /// Appends `probe` to `q`'s register and applies `unitary` to `(q, probe)`.
    fn entangle(&mut self, q: QuditRef, probe: &AmplitudeState, unitary: &Operator) -> Result<QuditRef> {
        let extended = self.register(q)?.tensor(probe);
        let probe_site = extended.subsystem_count() - 1;
        self.registers[q.register] = extended.apply(unitary, &[q.site, probe_site])?;
        Ok(QuditRef { register: q.register, site: probe_site })
    }
}

/// Private record of one decoy: how it was prepared and where it sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoySpec {
    pub basis: Basis,
    pub value: usize,
    pub position: usize,
}

/// Carriers interleaved with decoys, plus the sender's decoy ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedSequence {
    pub slots: Vec<QuditRef>,
    pub ledger: Vec<DecoySpec>,
}

impl DressedSequence {
    pub fn carrier_count(&self) -> usize {
        self.slots.len() - self.ledger.len()
    }
}

/// Entangle-measure attack: probe starts in `|0⟩` and `unitary` acts on
/// system ⊗ probe.
#[derive(Debug, Clone, PartialEq)]
pub struct EntangleAttack {
    unitary: Operator,
    system_dim: usize,
    probe_dim: usize,
}

impl EntangleAttack {
    pub fn new(unitary: Operator, system_dim: usize, probe_dim: usize) -> Result<Self> {
        if system_dim < 2 || probe_dim < 2 {
            return Err(Error::InvalidAttack(format!("bad dimensions d={system_dim}, probe={probe_dim}")));
        }
        if unitary.dim() != system_dim * probe_dim {
            return Err(Error::InvalidAttack(format!(
                "operator dimension {} != d·probe_dim = {}",
                unitary.dim(),
                system_dim * probe_dim
            )));
        }
        let defect = unitary.unitarity_defect();
        if defect > 1e-9 {
            return Err(Error::InvalidAttack(format!("operator is not unitary (defect {defect:e})")));
        }
        Ok(Self { unitary, system_dim, probe_dim })
    }

    pub fn unitary(&self) -> &Operator {
        &self.unitary
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_dim
    }

    /// `|ζ⟩ = |0⟩` on the probe space.
    pub fn probe_ground_state(&self) -> AmplitudeState {
        AmplitudeState::basis_state(0, self.probe_dim).expect("probe_dim checked at construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EavesdropperModel {
    Honest,
    InterceptResend,
    MeasureResend,
    EntangleMeasure(EntangleAttack),
}

impl EavesdropperModel {
    pub fn name(&self) -> &'static str {
        match self {
            EavesdropperModel::Honest => "honest",
            EavesdropperModel::InterceptResend => "intercept_resend",
            EavesdropperModel::MeasureResend => "measure_resend",
            EavesdropperModel::EntangleMeasure(_) => "entangle_measure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityCheckReport {
    pub checked: usize,
    pub mismatches: usize,
    pub passed: bool,
}

/// Places `count` random decoys at uniformly random distinct positions
/// among `carriers`.
pub fn insert_decoys<R: Rng + ?Sized>(
    memory: &mut QuantumMemory,
    carriers: &[QuditRef],
    count: usize,
    d: usize,
    rng: &mut R,
) -> Result<DressedSequence> {
    let total = carriers.len() + count;
    let mut positions = sample(rng, total, count).into_vec();
    positions.sort_unstable();

    let mut ledger = Vec::with_capacity(count);
    let mut slots = Vec::with_capacity(total);
    let mut carrier_iter = carriers.iter();
    let mut next_decoy = positions.iter().peekable();
    for position in 0..total {
        if next_decoy.peek() == Some(&&position) {
            next_decoy.next();
            let basis = Basis::random(rng);
            let value = rng.random_range(0..d);
            slots.push(memory.alloc_qudit(AmplitudeState::prepare(basis, value, d)?)?);
            ledger.push(DecoySpec { basis, value, position });
        } else {
            slots.push(*carrier_iter.next().expect("carrier count matches"));
        }
    }
    Ok(DressedSequence { slots, ledger })
}

/// Sends `seq` through a channel where every slot is attacked by `model`.
pub fn transmit<R: Rng + ?Sized>(
    memory: &mut QuantumMemory,
    seq: &DressedSequence,
    model: &EavesdropperModel,
    rng: &mut R,
) -> Result<DressedSequence> {
    transmit_partial(memory, seq, model, 1.0, rng)
}

/// As [`transmit`], but each slot is attacked independently with
/// probability `fraction`.
pub fn transmit_partial<R: Rng + ?Sized>(
    memory: &mut QuantumMemory,
    seq: &DressedSequence,
    model: &EavesdropperModel,
    fraction: f64,
    rng: &mut R,
) -> Result<DressedSequence> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidAttack(format!("attack fraction {fraction} outside [0, 1]")));
    }
    if let EavesdropperModel::EntangleMeasure(attack) = model {
        if attack.unitary.unitarity_defect() > 1e-9 {
            return Err(Error::InvalidAttack("operator is not unitary".into()));
        }
    }
    let mut slots = Vec::with_capacity(seq.slots.len());
    for &q in &seq.slots {
        let attacked = matches!(model, EavesdropperModel::Honest) || fraction >= 1.0 || rng.random::<f64>() < fraction;
        if !attacked {
            slots.push(q);
            continue;
        }
        let forwarded = match model {
            EavesdropperModel::Honest => q,
            EavesdropperModel::InterceptResend => {
                // the original stays in its register, held by the attacker
                let d = memory.dim(q)?;
                let basis = Basis::random(rng);
                let value = rng.random_range(0..d);
                memory.alloc_qudit(AmplitudeState::prepare(basis, value, d)?)?
            }
            EavesdropperModel::MeasureResend => {
                let basis = Basis::random(rng);
                memory.measure(q, basis, rng)?;
                q
            }
            EavesdropperModel::EntangleMeasure(attack) => {
                let d = memory.dim(q)?;
                if d != attack.system_dim {
                    return Err(Error::InvalidAttack(format!(
                        "attack built for d={}, channel carries d={d}",
                        attack.system_dim
                    )));
                }
                memory.entangle(q, &attack.probe_ground_state(), &attack.unitary)?;
                q
            }
        };
        slots.push(forwarded);
    }
    Ok(DressedSequence { slots, ledger: seq.ledger.clone() })
}

/// Receiver measures every ledgered decoy in its preparation basis; any
/// outcome that differs from the recorded value is a mismatch.
pub fn security_check<R: Rng + ?Sized>(
    memory: &mut QuantumMemory,
    ledger: &[DecoySpec],
    received: &DressedSequence,
    rng: &mut R,
) -> Result<SecurityCheckReport> {
    let mut mismatches = 0;
    for spec in ledger {
        let q = *received.slots.get(spec.position).ok_or_else(|| {
            Error::ProtocolDesync(format!(
                "decoy position {} beyond sequence of length {}",
                spec.position,
                received.slots.len()
            ))
        })?;
        if memory.measure(q, spec.basis, rng)? != spec.value {
            mismatches += 1;
        }
    }
    Ok(SecurityCheckReport { checked: ledger.len(), mismatches, passed: mismatches == 0 })
}

/// Carriers of `seq` in their original order.
pub fn strip_decoys(seq: &DressedSequence, ledger: &[DecoySpec]) -> Vec<QuditRef> {
    seq.slots
        .iter()
        .enumerate()
        .filter(|(i, _)| !ledger.iter().any(|spec| spec.position == *i))
        .map(|(_, q)| *q)
        .collect()
}

/// Closed-form probability that at least one of `decoys` decoys flags the attack.
pub fn detection_probability(model: &EavesdropperModel, d: usize, decoys: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let d_f = d as f64;
    let pass_one = match model {
        EavesdropperModel::InterceptResend => 1.0 / d_f,
        EavesdropperModel::MeasureResend => (d_f + 1.0) / (2.0 * d_f),
        EavesdropperModel::Honest => return Err(Error::NoClosedForm("honest")),
        EavesdropperModel::EntangleMeasure(_) => return Err(Error::NoClosedForm("entangle_measure")),
    };
    Ok(1.0 - pass_one.powi(decoys as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn carriers(memory: &mut QuantumMemory, d: usize, n: usize) -> Vec<QuditRef> {
        (0..n).map(|i| memory.alloc_qudit(AmplitudeState::basis_state(i % d, d).unwrap()).unwrap()).collect()
    }

    #[test]
    fn no_decoys_is_identity() {
        let mut mem = QuantumMemory::new();
        let mut rng = SeedStream::new(1).rng();
        let cs = carriers(&mut mem, 3, 4);
        let seq = insert_decoys(&mut mem, &cs, 0, 3, &mut rng).unwrap();
        assert_eq!(seq.slots, cs);
        assert!(seq.ledger.is_empty());
        assert_eq!(strip_decoys(&seq, &seq.ledger), cs);
    }

    #[test]
    fn one_carrier_three_decoys() {
        let mut mem = QuantumMemory::new();
        let mut rng = SeedStream::new(2).rng();
        for _ in 0..20 {
            let cs = carriers(&mut mem, 5, 1);
            let seq = insert_decoys(&mut mem, &cs, 3, 5, &mut rng).unwrap();
            assert_eq!(seq.slots.len(), 4);
            assert_eq!(seq.ledger.len(), 3);
            let carrier_pos: Vec<usize> = (0..4).filter(|i| seq.ledger.iter().all(|s| s.position != *i)).collect();
            assert_eq!(carrier_pos.len(), 1);
            assert_eq!(seq.slots[carrier_pos[0]], cs[0]);
            assert_eq!(strip_decoys(&seq, &seq.ledger), cs);
        }
    }

    #[test]
    fn decoy_preparation_is_uniform() {
        // oracle: basis is a fair coin, value uniform on [0, 4)
        let mut mem = QuantumMemory::new();
        let mut rng = SeedStream::new(3).rng();
        let mut t1 = 0;
        let mut values = [0usize; 4];
        let runs = 10_000;
        for _ in 0..runs {
            let seq = insert_decoys(&mut mem, &[], 1, 4, &mut rng).unwrap();
            if seq.ledger[0].basis == Basis::Computational {
                t1 += 1;
            }
            values[seq.ledger[0].value] += 1;
        }
        assert!((t1 as f64 / runs as f64 - 0.5).abs() < 0.02);
        let (_, p) = crate::stats::chi_square_uniform(&values);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn honest_transmission_is_identity() {
        let mut mem = QuantumMemory::new();
        let mut rng = SeedStream::new(4).rng();
        let cs = carriers(&mut mem, 7, 3);
        let seq = insert_decoys(&mut mem, &cs, 5, 7, &mut rng).unwrap();
        let before: Vec<AmplitudeState> = seq.slots.iter().map(|q| mem.register(*q).unwrap().clone()).collect();
        let out = transmit(&mut mem, &seq, &EavesdropperModel::Honest, &mut rng).unwrap();
        assert_eq!(out, seq);
        for (q, b) in out.slots.iter().zip(&before) {
            assert_eq!(mem.register(*q).unwrap(), b);
        }
        let report = security_check(&mut mem, &seq.ledger, &out, &mut rng).unwrap();
        assert_eq!(report, SecurityCheckReport { checked: 5, mismatches: 0, passed: true });
    }

    #[test]
    fn measure_resend_in_matching_basis_forwards_prepared_state() {
        let mut rng = SeedStream::new(5).rng();
        for basis in [Basis::Computational, Basis::Fourier] {
            let prepared = AmplitudeState::prepare(basis, 4, 7).unwrap();
            let mut mem = QuantumMemory::new();
            let q = mem.alloc_qudit(prepared.clone()).unwrap();
            mem.measure(q, basis, &mut rng).unwrap();
            assert!(mem.register(q).unwrap().approx_eq(&prepared, 1e-12));
        }
    }

    #[test]
    fn intercept_resend_keeps_original_in_memory() {
        let mut mem = QuantumMemory::new();
        let mut rng = SeedStream::new(6).rng();
        let cs = carriers(&mut mem, 3, 2);
        let seq = DressedSequence { slots: cs.clone(), ledger: vec![] };
        let out = transmit(&mut mem, &seq, &EavesdropperModel::InterceptResend, &mut rng).unwrap();
        assert_eq!(mem.register_count(), 4);
        assert!(out.slots.iter().all(|q| !cs.contains(q)));
    }

    #[test]
    fn check_reports_desync() {
        let mut mem = QuantumMemory::new();
        let mut rng = SeedStream::new(7).rng();
        let seq = insert_decoys(&mut mem, &[], 2, 3, &mut rng).unwrap();
        let bogus = [DecoySpec { basis: Basis::Computational, value: 0, position: 9 }];
        assert!(matches!(security_check(&mut mem, &bogus, &seq, &mut rng), Err(Error::ProtocolDesync(_))));
    }

    #[test]
    fn closed_forms() {
        let ir = EavesdropperModel::InterceptResend;
        let mr = EavesdropperModel::MeasureResend;
        assert!((detection_probability(&ir, 11, 1).unwrap() - 10.0 / 11.0).abs() < 1e-15);
        assert!((detection_probability(&mr, 2, 1).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(detection_probability(&ir, 5, 0).unwrap(), 0.0);
        assert!(matches!(detection_probability(&EavesdropperModel::Honest, 5, 1), Err(Error::NoClosedForm(_))));
        let attack = EntangleAttack::new(Operator::identity(4), 2, 2).unwrap();
        assert!(detection_probability(&EavesdropperModel::EntangleMeasure(attack), 2, 1).is_err());
    }

    #[test]
    fn rejects_non_unitary_attack() {
        let bad = Operator::from_fn(4, |r, c| num_complex::Complex64::new((r + c) as f64, 0.0));
        assert!(matches!(EntangleAttack::new(bad, 2, 2), Err(Error::InvalidAttack(_))));
        assert!(matches!(EntangleAttack::new(Operator::identity(6), 2, 2), Err(Error::InvalidAttack(_))));
    }

    #[test]
    fn identity_entangle_attack_is_undetected() {
        let attack = EntangleAttack::new(Operator::identity(9), 3, 3).unwrap();
        let model = EavesdropperModel::EntangleMeasure(attack);
        let mut mem = QuantumMemory::new();
        let mut rng = SeedStream::new(8).rng();
        for _ in 0..200 {
            let seq = insert_decoys(&mut mem, &[], 4, 3, &mut rng).unwrap();
            let out = transmit(&mut mem, &seq, &model, &mut rng).unwrap();
            assert!(security_check(&mut mem, &seq.ledger, &out, &mut rng).unwrap().passed);
        }
    }

    #[test]
    fn controlled_shift_attack_is_caught_on_fourier_decoys() {
        let attack = EntangleAttack::new(Operator::controlled_shift(2, 2), 2, 2).unwrap();
        let model = EavesdropperModel::EntangleMeasure(attack);
        let mut mem = QuantumMemory::new();
        let mut rng = SeedStream::new(9).rng();
        let (mut t1_fail, mut t2_fail, mut t2_total) = (0, 0, 0);
        for _ in 0..4000 {
            let seq = insert_decoys(&mut mem, &[], 1, 2, &mut rng).unwrap();
            let out = transmit(&mut mem, &seq, &model, &mut rng).unwrap();
            let failed = !security_check(&mut mem, &seq.ledger, &out, &mut rng).unwrap().passed;
            match seq.ledger[0].basis {
                Basis::Computational => t1_fail += failed as usize,
                Basis::Fourier => {
                    t2_total += 1;
                    t2_fail += failed as usize
                }
            }
        }
        assert_eq!(t1_fail, 0);
        assert!((t2_fail as f64 / t2_total as f64 - 0.5).abs() < 0.05);
    }
}
