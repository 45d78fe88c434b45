//! Executable security checks: Monte Carlo attack experiments against the
//! closed-form detection rates, an exact auditor for entangle-measure
//! attacks, one-time-pad uniformity tests, and brute-force enumeration of
//! what a coalition of parties can infer about another user's input.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{
    detection_probability, insert_decoys, security_check, transmit, EavesdropperModel, EntangleAttack, QuantumMemory,
};
use crate::error::{Error, Result};
use crate::operator::Operator;
use crate::protocol::{Announcement, RunRecord};
use crate::qudit::{mod_add, mod_sub, AmplitudeState, Basis, DimensionParams};
use crate::rng::SeedStream;
use crate::stats::{binomial_std_error, chi_square_uniform};

/// Largest tolerated error probability for an attack to count as stealthy.
pub const STEALTH_TOL: f64 = 1e-9;
/// Conditioned probe states of a stealthy attack must have pairwise
/// fidelity at least `1 − FIDELITY_TOL`.
pub const FIDELITY_TOL: f64 = 1e-6;

pub const CSV_HEADER: &str = "model,d,L,trials,detections,empirical,theoretical,std_error";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackExperimentResult {
    pub model: String,
    pub d: usize,
    pub decoys: usize,
    pub trials: u64,
    pub detections: u64,
    pub empirical_rate: f64,
    pub theoretical_rate: Option<f64>,
    /// Binomial standard error at the theoretical rate when there is one,
    /// otherwise at the empirical rate.
    pub std_error: f64,
}

impl AttackExperimentResult {
    /// Deviation from the closed form in units of standard error.
    pub fn z_score(&self) -> Option<f64> {
        let theory = self.theoretical_rate?;
        let diff = self.empirical_rate - theory;
        if self.std_error == 0.0 {
            return Some(if diff == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Some(diff / self.std_error)
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.model,
            self.d,
            self.decoys,
            self.trials,
            self.detections,
            format_sig9(self.empirical_rate),
            self.theoretical_rate.map(format_sig9).unwrap_or_default(),
            format_sig9(self.std_error),
        )
    }
}

/// Fixed nine-significant-digit rendering used by every report.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Runs `trials` independent dress → transmit → check cycles, each on one
/// carrier plus `decoys` decoys, and counts failed checks.
pub fn attack_experiment(
    model: &EavesdropperModel,
    d: usize,
    decoys: usize,
    trials: u64,
    stream: &SeedStream,
) -> Result<AttackExperimentResult> {
    DimensionParams::new(d)?;
    if trials == 0 {
        return Err(Error::InvalidConfig("attack experiment needs at least one trial".into()));
    }
    let detections = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let mut rng = stream.index(t).rng();
            let mut memory = QuantumMemory::new();
            let carrier = memory.alloc_qudit(AmplitudeState::basis_state(0, d)?)?;
            let dressed = insert_decoys(&mut memory, &[carrier], decoys, d, &mut rng)?;
            let received = transmit(&mut memory, &dressed, model, &mut rng)?;
            let report = security_check(&mut memory, &dressed.ledger, &received, &mut rng)?;
            Ok(u64::from(!report.passed))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    let theoretical_rate = detection_probability(model, d, decoys).ok().or(match model {
        EavesdropperModel::Honest => Some(0.0),
        _ => None,
    });
    let empirical_rate = detections as f64 / trials as f64;
    let std_error = binomial_std_error(theoretical_rate.unwrap_or(empirical_rate), trials);
    Ok(AttackExperimentResult {
        model: model.name().to_string(),
        d,
        decoys,
        trials,
        detections,
        empirical_rate,
        theoretical_rate,
        std_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntangleMeasureVerdict {
    pub max_error_t1: f64,
    pub max_error_t2: f64,
    pub stealthy: bool,
    /// Minimum pairwise fidelity among the 2d conditioned probe states;
    /// present only when the attack is stealthy.
    pub probe_independence: Option<f64>,
}

/// Probe state conditioned on the system being found in `prepared`,
/// unnormalized: `(⟨prepared| ⊗ I) U (|prepared⟩ ⊗ |0⟩)`.
fn conditioned_probe(attack: &EntangleAttack, prepared: &AmplitudeState) -> Result<Vec<Complex64>> {
    let joint = prepared.tensor(&attack.probe_ground_state()).apply(attack.unitary(), &[0, 1])?;
    let probe_dim = attack.probe_dim();
    let system = prepared.amplitudes();
    Ok((0..probe_dim)
        .map(|e| system.iter().enumerate().map(|(s, amp)| amp.conj() * joint.amplitudes()[s * probe_dim + e]).sum())
        .collect())
}

/// Exact audit of an entangle-measure attack `U_E` on system ⊗ probe.
///
/// For every basis state of both bases, computes the probability that the
/// receiver's check in the preparation basis disagrees. If both maxima are
/// within `tol`, also reports how far the conditioned probe states are from
/// being one common state.
pub fn entangle_measure_audit(
    unitary: &Operator,
    d: usize,
    probe_dim: usize,
    tol: f64,
) -> Result<EntangleMeasureVerdict> {
    let attack = EntangleAttack::new(unitary.clone(), d, probe_dim)?;
    let mut max_error = [0.0f64; 2];
    let mut probes = Vec::with_capacity(2 * d);
    for (b, basis) in [Basis::Computational, Basis::Fourier].into_iter().enumerate() {
        for t in 0..d {
            let probe = conditioned_probe(&attack, &AmplitudeState::prepare(basis, t, d)?)?;
            let pass: f64 = probe.iter().map(|a| a.norm_sqr()).sum();
            max_error[b] = max_error[b].max((1.0 - pass).max(0.0));
            probes.push(probe);
        }
    }
    let stealthy = max_error.iter().all(|&e| e <= tol);
    let probe_independence = stealthy.then(|| {
        let normalized: Vec<Vec<Complex64>> = probes
            .iter()
            .map(|p| {
                let norm = p.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                p.iter().map(|a| a / norm).collect()
            })
            .collect();
        let mut worst = 1.0f64;
        for i in 0..normalized.len() {
            for j in i + 1..normalized.len() {
                let overlap: Complex64 = normalized[i].iter().zip(&normalized[j]).map(|(a, b)| a.conj() * b).sum();
                worst = worst.min(overlap.norm_sqr());
            }
        }
        worst
    });
    Ok(EntangleMeasureVerdict { max_error_t1: max_error[0], max_error_t2: max_error[1], stealthy, probe_independence })
}

/// Which attack unitaries a scan draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitaryFamily {
    /// Haar-random on the whole system ⊗ probe space.
    Haar,
    /// `I ⊗ V` with `V` Haar-random on the probe alone.
    ProbeOnly,
}

impl UnitaryFamily {
    pub fn sample<R: Rng + ?Sized>(&self, d: usize, probe_dim: usize, rng: &mut R) -> Operator {
        match self {
            UnitaryFamily::Haar => Operator::haar_random(d * probe_dim, rng),
            UnitaryFamily::ProbeOnly => Operator::identity(d).kron(&Operator::haar_random(probe_dim, rng)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub family: UnitaryFamily,
    pub d: usize,
    pub probe_dim: usize,
    pub samples: usize,
    pub stealthy: usize,
    /// Stealthy attacks whose probe still depends on the transmitted state.
    pub violating: usize,
    pub min_error: f64,
}

/// Audits `samples` random attack unitaries and counts stealthy ones whose
/// conditioned probes are not all the same state.
pub fn theorem_scan(
    d: usize,
    probe_dim: usize,
    samples: usize,
    tol: f64,
    family: UnitaryFamily,
    stream: &SeedStream,
) -> Result<ScanSummary> {
    if samples == 0 {
        return Err(Error::InvalidConfig("theorem scan needs at least one sample".into()));
    }
    let verdicts = (0..samples)
        .into_par_iter()
        .map(|i| {
            let unitary = family.sample(d, probe_dim, &mut stream.index(i as u64).rng());
            entangle_measure_audit(&unitary, d, probe_dim, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let stealthy = verdicts.iter().filter(|v| v.stealthy).count();
    let violating =
        verdicts.iter().filter(|v| v.stealthy && v.probe_independence.is_some_and(|f| f < 1.0 - FIDELITY_TOL)).count();
    let min_error = verdicts.iter().map(|v| v.max_error_t1.max(v.max_error_t2)).fold(f64::INFINITY, f64::min);
    Ok(ScanSummary { family, d, probe_dim, samples, stealthy, violating, min_error })
}

/// `Σ_α e^{2πiα(t−γ)/d}`; zero unless `t = γ`.
pub fn fourier_phase_sum(d: usize, t: usize, gamma: usize) -> Complex64 {
    let shift = (t + d - gamma % d) % d;
    (0..d)
        .map(|alpha| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ((alpha * shift) % d) as f64 / d as f64))
        .sum()
}

/// Chi-square p-value of `r2 = m2 ⊕ p ⊕ k` over uniform keys, with `m2`
/// and `p` fixed (drawn once from the stream).
pub fn otp_uniformity_test(d: usize, samples: usize, stream: &SeedStream) -> Result<f64> {
    let dims = DimensionParams::new(d)?;
    if samples < 100 * d {
        return Err(Error::InvalidConfig(format!("need at least {} samples, got {samples}", 100 * d)));
    }
    let mut rng = stream.rng();
    let m2 = rng.random_range(0..d);
    let p = rng.random_range(0..=dims.h());
    let mut counts = vec![0usize; d];
    for _ in 0..samples {
        let k = rng.random_range(0..d);
        counts[mod_add(mod_add(m2, p, d)?, k, d)?] += 1;
    }
    Ok(chi_square_uniform(&counts).1)
}

/// Whether `k ↦ m2 ⊕ p ⊕ k` is a bijection on `[0, d)` for every `(m2, p)`.
pub fn otp_bijection_check(d: usize) -> Result<bool> {
    let dims = DimensionParams::new(d)?;
    for m2 in 0..d {
        for p in 0..=dims.h() {
            let mut hit = vec![false; d];
            for k in 0..d {
                let r2 = mod_add(mod_add(m2, p, d)?, k, d)?;
                if std::mem::replace(&mut hit[r2], true) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Exact distribution of `r` as TP1 receives it, for input `p` and Bell
/// shift `v`, over uniform `q ∈ [h, d−1]`, uniform keys and uniform `m1`.
pub fn heard_r_distribution(d: usize, p: usize, v: usize) -> Result<BTreeMap<usize, Ratio<u64>>> {
    let dims = DimensionParams::new(d)?;
    if p > dims.h() {
        return Err(Error::OutOfDomain(format!("p = {p} exceeds h = {}", dims.h())));
    }
    dims.check_digit(v)?;
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    let mut total = 0u64;
    for q in dims.h()..d {
        for k in 0..d {
            for m1 in 0..d {
                let m2 = mod_add(m1, v, d)?;
                let r2 = mod_add(mod_add(m2, p, d)?, k, d)?;
                let r1 = mod_add(mod_add(m1, q, d)?, k, d)?;
                *counts.entry(mod_sub(r1, r2, d)?).or_default() += 1;
                total += 1;
            }
        }
    }
    Ok(counts.into_iter().map(|(r, c)| (r, Ratio::new(c, total))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Role {
    Tp1,
    Tp2,
    /// 1-based user index.
    User(usize),
}

/// How much of a run the coalition has seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViewScope {
    /// Everything up to and including TP2's message to TP1.
    ThroughStep6,
    /// Including the announced ordering.
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct UserFacts {
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub v: Option<usize>,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub r2: Option<usize>,
    pub r1: Option<usize>,
    pub r: Option<usize>,
    pub m_value: Option<usize>,
}

/// Everything a coalition (possibly empty: a passive outside observer)
/// knows about one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoalitionView {
    pub coalition: BTreeSet<Role>,
    pub d: usize,
    pub users: Vec<UserFacts>,
    pub q: Option<usize>,
    #[serde(skip)]
    pub announcement: Option<Announcement>,
}

impl CoalitionView {
    /// What `coalition` learns from `record`. Classical traffic is readable
    /// by everyone; secrets and measurement outcomes only by their holders.
    pub fn observe(record: &RunRecord, coalition: &[Role], scope: ViewScope) -> Result<Self> {
        let set: BTreeSet<Role> = coalition.iter().copied().collect();
        if set.contains(&Role::Tp1) && set.contains(&Role::Tp2) {
            return Err(Error::InvalidCoalition("the two third parties never collude".into()));
        }
        let trace = &record.trace;
        let n = trace.p.len();
        if trace.r.len() != n {
            return Err(Error::IncompleteRun);
        }
        for role in &set {
            if let Role::User(i) = role {
                if *i == 0 || *i > n {
                    return Err(Error::InvalidCoalition(format!("no user P{i} in a run with {n} users")));
                }
            }
        }
        let mut users = vec![UserFacts::default(); n];
        for (i, facts) in users.iter_mut().enumerate() {
            facts.r2 = Some(trace.r2[i]);
            facts.r = Some(trace.r[i]);
            if set.contains(&Role::User(i + 1)) {
                facts.p = Some(trace.p[i]);
                facts.k = Some(trace.k[i]);
                facts.m2 = Some(trace.m2[i]);
            }
            if set.contains(&Role::Tp1) {
                facts.v = Some(trace.v[i]);
                facts.m_value = trace.m_values.get(i).copied();
            }
            if set.contains(&Role::Tp2) {
                facts.k = Some(trace.k[i]);
                facts.m1 = Some(trace.m1[i]);
                facts.r1 = Some(trace.r1[i]);
            }
        }
        let announcement = match scope {
            ViewScope::Full => record.outcome.announcement().cloned(),
            ViewScope::ThroughStep6 => None,
        };
        Ok(Self {
            coalition: set.clone(),
            d: trace.d,
            users,
            q: if set.contains(&Role::Tp2) { trace.q } else { None },
            announcement,
        })
    }
}

pub const DEFAULT_ENUMERATION_BUDGET: u128 = 1 << 34;

fn matches(known: Option<usize>, value: usize) -> bool {
    known.is_none_or(|k| k == value)
}

/// All values of `p_target` (1-based user) consistent with everything in
/// `view`, by exhaustive search over inputs, keys, Bell shifts, measurement
/// outcomes and `q`.
pub fn coalition_consistent_set(view: &CoalitionView, target: usize, budget: u128) -> Result<BTreeSet<usize>> {
    let n = view.users.len();
    if target == 0 || target > n {
        return Err(Error::InvalidCoalition(format!("target P{target} not in a run with {n} users")));
    }
    if view.coalition.contains(&Role::User(target)) {
        return Err(Error::InvalidCoalition(format!("target P{target} is inside the coalition")));
    }
    let d = view.d;
    if d > 64 {
        return Err(Error::InvalidConfig(format!("enumeration supports d ≤ 64, got {d}")));
    }
    let dims = DimensionParams::new(d)?;
    let h = dims.h();
    let inputs = h + 1;
    let offsets = d - h;

    let per_user = (n * inputs * offsets) as u128 * (d as u128).pow(3);
    let joint = (inputs as u128).checked_pow(n as u32).unwrap_or(u128::MAX).saturating_mul(offsets as u128);
    let needed = per_user.saturating_add(joint);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }

    // Users only interact through q and the ordering, so feasibility of
    // each user's (p, q) can be tabulated separately.
    let mut feasible = vec![vec![false; inputs * offsets]; n];
    for (facts, table) in view.users.iter().zip(feasible.iter_mut()) {
        for p in 0..inputs {
            if !matches(facts.p, p) {
                continue;
            }
            for (qi, q) in (h..d).enumerate() {
                if !matches(view.q, q) {
                    continue;
                }
                'search: for k in 0..d {
                    if !matches(facts.k, k) {
                        continue;
                    }
                    for m1 in 0..d {
                        if !matches(facts.m1, m1) {
                            continue;
                        }
                        for v in 0..d {
                            if !matches(facts.v, v) {
                                continue;
                            }
                            let m2 = (m1 + v) % d;
                            let r2 = (m2 + p + k) % d;
                            let r1 = (m1 + q + k) % d;
                            let r = (r1 + d - r2) % d;
                            let m_value = d - 1 - (r + v) % d;
                            if matches(facts.m2, m2)
                                && matches(facts.r2, r2)
                                && matches(facts.r1, r1)
                                && matches(facts.r, r)
                                && matches(facts.m_value, m_value)
                            {
                                table[p * offsets + qi] = true;
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut candidates = BTreeSet::new();
    let mut p_vec = vec![0usize; n];
    for qi in 0..offsets {
        loop {
            if p_vec.iter().enumerate().all(|(i, &p)| feasible[i][p * offsets + qi])
                && view.announcement.as_ref().is_none_or(|a| a.is_consistent_with(&p_vec))
            {
                candidates.insert(p_vec[target - 1]);
            }
            if !advance(&mut p_vec, inputs) {
                break;
            }
        }
    }
    Ok(candidates)
}

/// Odometer increment over `[0, radix)^len`; false once it wraps.
fn advance(digits: &mut [usize], radix: usize) -> bool {
    for digit in digits.iter_mut().rev() {
        *digit += 1;
        if *digit < radix {
            return true;
        }
        *digit = 0;
    }
    false
}

/// Values of `p_target` allowed by the ordering alone, for inputs in `[0, h]`.
pub fn announcement_permitted_set(announcement: &Announcement, target: usize, h: usize) -> BTreeSet<usize> {
    let n = announcement.user_count();
    let mut out = BTreeSet::new();
    let mut p_vec = vec![0usize; n];
    loop {
        if announcement.is_consistent_with(&p_vec) {
            out.insert(p_vec[target - 1]);
        }
        if !advance(&mut p_vec, h + 1) {
            break;
        }
    }
    out
}
