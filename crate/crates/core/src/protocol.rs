//! The seven-step comparison protocol between two third parties (TP1, TP2)
//! and `n` users.
//!
//! TP1 prepares `n` Bell pairs `|Φ(u_i, v_i)⟩`, keeps `v_i` and ships the
//! first halves to TP2 and the second halves to the users, each behind a
//! decoy check. User `i` masks its input as `r2 = m2 ⊕ p ⊕ k`, TP2 folds in
//! its own measurement, a random offset `q` and the shared key to get
//! `r = m1 ⊕ q ⊕ k ⊖ r2`, and TP1 decodes `M = (d−1) − (r ⊕ v)`, which equals
//! `p + d − 1 − q` and therefore orders the users exactly as their inputs.
//! Only the tie-aware ordering is announced.

use std::fmt;

use rand::Rng;
use serde::{Serialize, Serializer};

use crate::channel::{
    insert_decoys, security_check, strip_decoys, transmit, EavesdropperModel, QuantumMemory, QuditRef,
    SecurityCheckReport,
};
use crate::error::{Error, Result};
use crate::qudit::{measure_pair_computational, mod_add, mod_sub, AmplitudeState, Basis, DimensionParams};
use crate::rng::SeedStream;

/// How carrier pairs are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CarrierBackend {
    /// Full joint statevector of each pair, including anything an attacker
    /// entangled with it.
    #[default]
    Statevector,
    /// Sample `(m1, m1 ⊕ v)` directly. Only valid on honest channels.
    Shortcut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolParams {
    pub dims: DimensionParams,
    pub n: usize,
    /// Decoys per quantum transmission (`L`).
    pub decoys: usize,
    pub seed: u64,
    pub backend: CarrierBackend,
}

impl ProtocolParams {
    pub fn new(d: usize, n: usize, decoys: usize, seed: u64) -> Result<Self> {
        if decoys == 0 {
            return Err(Error::InvalidConfig("protocol runs need at least one decoy per transmission".into()));
        }
        Self::test_mode(d, n, decoys, seed)
    }

    /// Like [`ProtocolParams::new`] but allows running without decoys.
    pub fn test_mode(d: usize, n: usize, decoys: usize, seed: u64) -> Result<Self> {
        let dims = DimensionParams::new(d)?;
        if n < 2 {
            return Err(Error::InvalidConfig(format!("need at least two users, got {n}")));
        }
        Ok(Self { dims, n, decoys, seed, backend: CarrierBackend::default() })
    }

    pub fn with_backend(mut self, backend: CarrierBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn d(&self) -> usize {
        self.dims.d()
    }
}

/// A user's private input `p` and the key `k` it shares with TP2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserSecret {
    pub p: usize,
    pub k: usize,
}

impl UserSecret {
    pub fn new(p: usize, k: usize, dims: &DimensionParams) -> Result<Self> {
        let secret = Self { p, k };
        secret.validate(dims)?;
        Ok(secret)
    }

    fn validate(&self, dims: &DimensionParams) -> Result<()> {
        if self.p > dims.h() {
            return Err(Error::OutOfDomain(format!("private input {} exceeds bound h = {}", self.p, dims.h())));
        }
        dims.check_digit(self.k)
    }
}

/// Stand-in for key distribution between each user and TP2: `n`
/// independent uniform digits.
pub fn simulated_qkd<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Vec<usize>> {
    DimensionParams::new(d)?;
    if n == 0 {
        return Err(Error::InvalidConfig("key distribution for zero users".into()));
    }
    Ok((0..n).map(|_| rng.random_range(0..d)).collect())
}

/// Pairs each input with a key drawn from the run's `qkd` stream.
pub fn share_keys(params: &ProtocolParams, inputs: &[usize]) -> Result<Vec<UserSecret>> {
    if inputs.len() != params.n {
        return Err(Error::InvalidConfig(format!("{} inputs for {} users", inputs.len(), params.n)));
    }
    let keys = simulated_qkd(params.n, params.d(), &mut SeedStream::new(params.seed).derive("qkd").rng())?;
    inputs.iter().zip(keys).map(|(&p, k)| UserSecret::new(p, k, &params.dims)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    Tp1,
    Tp2,
    /// 1-based user index.
    User(usize),
    All,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Tp1 => f.write_str("TP1"),
            Party::Tp2 => f.write_str("TP2"),
            Party::User(i) => write!(f, "P{i}"),
            Party::All => f.write_str("all"),
        }
    }
}

impl Serialize for Party {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Quantum,
    Classical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptEvent {
    pub step: u8,
    pub channel: ChannelKind,
    pub from: Party,
    pub to: Party,
    pub summary: String,
    /// Carrier qudits (quantum) or payload dits (classical) moved by this event.
    #[serde(skip)]
    pub units: usize,
    /// Eavesdropping-check traffic, excluded from resource accounting.
    #[serde(skip)]
    pub check_traffic: bool,
}

/// Append-only log of everything sent during one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    events: Vec<TranscriptEvent>,
    completed: bool,
}

impl Transcript {
    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn is_completed(&self) -> bool {
        self.completed
    }

    fn payload_units(&self, channel: ChannelKind) -> usize {
        self.events.iter().filter(|e| e.channel == channel && !e.check_traffic).map(|e| e.units).sum()
    }

    /// Carrier qudits consumed; decoys are not counted.
    pub fn qudit_count(&self) -> usize {
        self.payload_units(ChannelKind::Quantum)
    }

    /// Classical payload dits; check traffic is not counted.
    pub fn classical_dit_count(&self) -> usize {
        self.payload_units(ChannelKind::Classical)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        step: u8,
        channel: ChannelKind,
        from: Party,
        to: Party,
        units: usize,
        check: bool,
        summary: String,
    ) {
        self.events.push(TranscriptEvent { step, channel, from, to, summary, units, check_traffic: check });
    }

    /// One JSON object per event, then a summary record with the counters.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        let summary = serde_json::json!({
            "record": "summary",
            "completed": self.completed,
            "qudit_count": self.qudit_count(),
            "classical_dit_count": self.classical_dit_count(),
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

/// Users grouped into equality classes, highest value first. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Announcement {
    classes: Vec<Vec<usize>>,
}

impl Announcement {
    /// Ordering of `values` (user `i + 1` holds `values[i]`).
    pub fn from_values(values: &[usize]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].cmp(&values[a]).then(a.cmp(&b)));
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut last = None;
        for i in order {
            if last == Some(values[i]) {
                classes.last_mut().expect("non-empty").push(i + 1);
            } else {
                classes.push(vec![i + 1]);
            }
            last = Some(values[i]);
        }
        Self { classes }
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn user_count(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    /// Whether `values` would produce this announcement.
    pub fn is_consistent_with(&self, values: &[usize]) -> bool {
        values.len() == self.user_count() && Announcement::from_values(values) == *self
    }
}

impl fmt::Display for Announcement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rendered: Vec<String> = self
            .classes
            .iter()
            .map(|class| class.iter().map(|i| format!("P{i}")).collect::<Vec<_>>().join("="))
            .collect();
        f.write_str(&rendered.join(">"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tp1State {
    pub u_list: Vec<usize>,
    pub v_list: Vec<usize>,
    pub pairs: Vec<(QuditRef, QuditRef)>,
    pub r_received: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tp2State {
    pub q: usize,
    pub k_list: Vec<usize>,
    pub m1_list: Vec<usize>,
    pub r2_received: Vec<usize>,
    pub r1_list: Vec<usize>,
    pub r_list: Vec<usize>,
}

/// Result of one checked quantum transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Delivery {
    Delivered(Vec<QuditRef>),
    Aborted { channel: String, report: SecurityCheckReport },
}

/// Attack applied on each quantum channel of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    /// TP1 → TP2 (Step 2).
    pub s1: EavesdropperModel,
    /// TP1 → P_i (Step 3), one per user.
    pub groups: Vec<EavesdropperModel>,
}

impl ChannelPlan {
    pub fn uniform(model: &EavesdropperModel, n: usize) -> Self {
        Self { s1: model.clone(), groups: vec![model.clone(); n] }
    }

    pub fn honest(n: usize) -> Self {
        Self::uniform(&EavesdropperModel::Honest, n)
    }

    fn is_honest(&self) -> bool {
        matches!(self.s1, EavesdropperModel::Honest)
            && self.groups.iter().all(|m| matches!(m, EavesdropperModel::Honest))
    }
}

/// Step 1: `n` Bell pairs with uniform `(u_i, v_i)`; returns TP1's state and
/// the sequences of first and second halves.
pub fn step1_prepare<R: Rng + ?Sized>(
    memory: &mut QuantumMemory,
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<(Tp1State, Vec<QuditRef>, Vec<QuditRef>)> {
    let d = params.d();
    let u_list: Vec<usize> = (0..params.n).map(|_| rng.random_range(0..d)).collect();
    let v_list: Vec<usize> = (0..params.n).map(|_| rng.random_range(0..d)).collect();
    step1_prepare_with(memory, &params.dims, u_list, v_list)
}

/// Step 1 with caller-chosen Bell indices.
pub fn step1_prepare_with(
    memory: &mut QuantumMemory,
    dims: &DimensionParams,
    u_list: Vec<usize>,
    v_list: Vec<usize>,
) -> Result<(Tp1State, Vec<QuditRef>, Vec<QuditRef>)> {
    if u_list.len() != v_list.len() {
        return Err(Error::ProtocolDesync("u and v lists differ in length".into()));
    }
    let mut pairs = Vec::with_capacity(v_list.len());
    for (&u, &v) in u_list.iter().zip(&v_list) {
        let refs = memory.alloc(AmplitudeState::bell_state(u, v, dims.d())?);
        pairs.push((refs[0], refs[1]));
    }
    let s1 = pairs.iter().map(|p| p.0).collect();
    let s2 = pairs.iter().map(|p| p.1).collect();
    Ok((Tp1State { u_list, v_list, pairs, r_received: None }, s1, s2))
}

#[allow(clippy::too_many_arguments)]
fn checked_transmission(
    memory: &mut QuantumMemory,
    carriers: &[QuditRef],
    params: &ProtocolParams,
    model: &EavesdropperModel,
    stream: &SeedStream,
    transcript: &mut Transcript,
    (send_step, check_step): (u8, u8),
    receiver: Party,
) -> Result<Delivery> {
    let d = params.d();
    let dressed = insert_decoys(memory, carriers, params.decoys, d, &mut stream.derive("decoys").rng())?;
    transcript.push(
        send_step,
        ChannelKind::Quantum,
        Party::Tp1,
        receiver,
        carriers.len(),
        false,
        format!("{} carrier(s) + {} decoy(s)", carriers.len(), params.decoys),
    );
    let received = transmit(memory, &dressed, model, &mut stream.derive("eve").rng())?;

    transcript.push(
        check_step,
        ChannelKind::Classical,
        Party::Tp1,
        receiver,
        0,
        true,
        format!("decoy positions and bases ({})", dressed.ledger.len()),
    );
    let report = security_check(memory, &dressed.ledger, &received, &mut stream.derive("check").rng())?;
    transcript.push(
        check_step,
        ChannelKind::Classical,
        receiver,
        Party::Tp1,
        0,
        true,
        format!("decoy outcomes ({})", report.checked),
    );
    let verdict = if report.passed { "channel secure" } else { "eavesdropping detected, abort" };
    transcript.push(
        check_step,
        ChannelKind::Classical,
        Party::Tp1,
        receiver,
        0,
        true,
        format!("{verdict} ({} mismatch(es))", report.mismatches),
    );

    Ok(if report.passed {
        Delivery::Delivered(strip_decoys(&received, &dressed.ledger))
    } else {
        Delivery::Aborted { channel: format!("TP1->{receiver}"), report }
    })
}

/// Step 2: dress `s1` with decoys, send to TP2 and run the decoy check.
pub fn step2_send_s1(
    memory: &mut QuantumMemory,
    s1: &[QuditRef],
    params: &ProtocolParams,
    model: &EavesdropperModel,
    stream: &SeedStream,
    transcript: &mut Transcript,
) -> Result<Delivery> {
    checked_transmission(memory, s1, params, model, stream, transcript, (2, 2), Party::Tp2)
}

/// Steps 3–4: one decoy group `G_i` per user, each checked independently.
/// Any failed check aborts.
pub fn step3_4_distribute(
    memory: &mut QuantumMemory,
    s2: &[QuditRef],
    params: &ProtocolParams,
    models: &[EavesdropperModel],
    stream: &SeedStream,
    transcript: &mut Transcript,
) -> Result<Delivery> {
    if models.len() != s2.len() {
        return Err(Error::ProtocolDesync(format!("{} channel models for {} users", models.len(), s2.len())));
    }
    let mut delivered = Vec::with_capacity(s2.len());
    for (i, (&carrier, model)) in s2.iter().zip(models).enumerate() {
        let delivery = checked_transmission(
            memory,
            &[carrier],
            params,
            model,
            &stream.index(i as u64),
            transcript,
            (3, 4),
            Party::User(i + 1),
        )?;
        match delivery {
            Delivery::Delivered(mut c) => delivered.append(&mut c),
            aborted => return Ok(aborted),
        }
    }
    Ok(Delivery::Delivered(delivered))
}

/// Step 5 arithmetic: `r2 = m2 ⊕ p ⊕ k`.
pub fn step5_user_compute(m2: usize, secret: &UserSecret, dims: &DimensionParams) -> Result<usize> {
    secret.validate(dims)?;
    let d = dims.d();
    mod_add(mod_add(m2, secret.p, d)?, secret.k, d)
}

/// TP2's private offset, uniform on `[h, d−1]`.
pub fn sample_q<R: Rng + ?Sized>(dims: &DimensionParams, rng: &mut R) -> usize {
    rng.random_range(dims.h()..dims.d())
}

/// Step 6 arithmetic: `r1 = m1 ⊕ q ⊕ k` and `r = r1 ⊖ r2`, per user.
/// Returns `(r1_list, r_list)`.
pub fn step6_tp2_compute(
    m1_list: &[usize],
    q: usize,
    k_list: &[usize],
    r2_list: &[usize],
    dims: &DimensionParams,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if m1_list.len() != k_list.len() || k_list.len() != r2_list.len() {
        return Err(Error::ProtocolDesync(format!(
            "TP2 holds {} measurements, {} keys and {} masked inputs",
            m1_list.len(),
            k_list.len(),
            r2_list.len()
        )));
    }
    if q < dims.h() || q >= dims.d() {
        return Err(Error::OutOfDomain(format!("q = {q} outside [{}, {}]", dims.h(), dims.d() - 1)));
    }
    let d = dims.d();
    let mut r1_list = Vec::with_capacity(m1_list.len());
    let mut r_list = Vec::with_capacity(m1_list.len());
    for ((&m1, &k), &r2) in m1_list.iter().zip(k_list).zip(r2_list) {
        let r1 = mod_add(mod_add(m1, q, d)?, k, d)?;
        r1_list.push(r1);
        r_list.push(mod_sub(r1, r2, d)?);
    }
    Ok((r1_list, r_list))
}

/// Step 7: `M_i = (d−1) − (r_i ⊕ v_i)` and the ordering TP1 announces.
pub fn step7_tp1_compute(
    r_list: &[usize],
    v_list: &[usize],
    dims: &DimensionParams,
) -> Result<(Vec<usize>, Announcement)> {
    if r_list.len() != v_list.len() {
        return Err(Error::ProtocolDesync(format!("{} r values for {} Bell pairs", r_list.len(), v_list.len())));
    }
    let d = dims.d();
    let m_values =
        r_list.iter().zip(v_list).map(|(&r, &v)| Ok((d - 1) - mod_add(r, v, d)?)).collect::<Result<Vec<usize>>>()?;
    let announcement = Announcement::from_values(&m_values);
    Ok((m_values, announcement))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    Completed(Announcement),
    Aborted { step: u8, channel: String, report: SecurityCheckReport },
}

impl RunOutcome {
    pub fn announcement(&self) -> Option<&Announcement> {
        match self {
            RunOutcome::Completed(a) => Some(a),
            RunOutcome::Aborted { .. } => None,
        }
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self, RunOutcome::Aborted { .. })
    }
}

/// Every value computed during a run, for verification. Lists stay empty
/// for steps that were never reached.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunTrace {
    pub d: usize,
    pub p: Vec<usize>,
    pub k: Vec<usize>,
    pub u: Vec<usize>,
    pub v: Vec<usize>,
    pub m1: Vec<usize>,
    pub m2: Vec<usize>,
    pub q: Option<usize>,
    pub r2: Vec<usize>,
    pub r1: Vec<usize>,
    pub r: Vec<usize>,
    pub m_values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub outcome: RunOutcome,
    pub transcript: Transcript,
    pub trace: RunTrace,
}

/// Pinned values for a fully deterministic run (no sampling of Bell
/// indices, keys, `q` or measurement outcomes).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fixture {
    pub d: usize,
    pub p: Vec<usize>,
    pub v: Vec<usize>,
    pub k: Vec<usize>,
    pub m1: Vec<usize>,
    pub m2: Vec<usize>,
    pub q: usize,
}

impl Fixture {
    /// Four users, `d = 11`, inputs `(4, 3, 1, 5)`.
    pub fn reference() -> Self {
        Self {
            d: 11,
            p: vec![4, 3, 1, 5],
            v: vec![3, 4, 5, 6],
            k: vec![7, 8, 6, 2],
            m1: vec![6, 9, 8, 3],
            m2: vec![9, 2, 2, 9],
            q: 6,
        }
    }
}

/// Runs the whole protocol with every channel attacked by `model`.
pub fn run_protocol(params: &ProtocolParams, secrets: &[UserSecret], model: &EavesdropperModel) -> Result<RunRecord> {
    run_with_plan(params, secrets, &ChannelPlan::uniform(model, params.n))
}

pub fn run_with_plan(params: &ProtocolParams, secrets: &[UserSecret], plan: &ChannelPlan) -> Result<RunRecord> {
    execute(params, secrets, plan, None)
}

/// Runs a [`Fixture`] over honest channels with `decoys` decoys per transmission.
pub fn run_fixture(fixture: &Fixture, decoys: usize, seed: u64) -> Result<RunRecord> {
    let n = fixture.p.len();
    for (name, list) in [("v", &fixture.v), ("k", &fixture.k), ("m1", &fixture.m1), ("m2", &fixture.m2)] {
        if list.len() != n {
            return Err(Error::InvalidConfig(format!("fixture list {name} has {} entries for {n} users", list.len())));
        }
    }
    let params = ProtocolParams::test_mode(fixture.d, n, decoys, seed)?;
    let secrets = fixture
        .p
        .iter()
        .zip(&fixture.k)
        .map(|(&p, &k)| UserSecret::new(p, k, &params.dims))
        .collect::<Result<Vec<_>>>()?;
    execute(&params, &secrets, &ChannelPlan::honest(n), Some(fixture))
}

fn execute(
    params: &ProtocolParams,
    secrets: &[UserSecret],
    plan: &ChannelPlan,
    fixture: Option<&Fixture>,
) -> Result<RunRecord> {
    let n = params.n;
    let dims = params.dims;
    if secrets.len() != n {
        return Err(Error::InvalidConfig(format!("{} secrets for {n} users", secrets.len())));
    }
    for s in secrets {
        s.validate(&dims)?;
    }
    if plan.groups.len() != n {
        return Err(Error::InvalidConfig(format!("channel plan covers {} users, run has {n}", plan.groups.len())));
    }
    if params.backend == CarrierBackend::Shortcut && !plan.is_honest() {
        return Err(Error::InvalidConfig("the shortcut carrier backend requires honest channels".into()));
    }

    let root = SeedStream::new(params.seed);
    let mut memory = QuantumMemory::new();
    let mut transcript = Transcript::default();
    let mut trace = RunTrace {
        d: dims.d(),
        p: secrets.iter().map(|s| s.p).collect(),
        k: secrets.iter().map(|s| s.k).collect(),
        ..RunTrace::default()
    };

    // Step 1
    let (mut tp1, s1, s2) = match fixture {
        Some(f) => step1_prepare_with(&mut memory, &dims, vec![0; n], f.v.clone())?,
        None => step1_prepare(&mut memory, params, &mut root.derive("tp1").rng())?,
    };
    trace.u = tp1.u_list.clone();
    trace.v = tp1.v_list.clone();

    let aborted = |step, delivery: Delivery, transcript: Transcript, trace: RunTrace| match delivery {
        Delivery::Aborted { channel, report } => {
            Ok(RunRecord { outcome: RunOutcome::Aborted { step, channel, report }, transcript, trace })
        }
        Delivery::Delivered(_) => unreachable!(),
    };

    // Step 2
    let s1_delivered =
        match step2_send_s1(&mut memory, &s1, params, &plan.s1, &root.derive("channel/s1"), &mut transcript)? {
            Delivery::Delivered(c) => c,
            other => return aborted(2, other, transcript, trace),
        };

    // Steps 3–4
    let s2_delivered = match step3_4_distribute(
        &mut memory,
        &s2,
        params,
        &plan.groups,
        &root.derive("channel/groups"),
        &mut transcript,
    )? {
        Delivery::Delivered(c) => c,
        other => return aborted(4, other, transcript, trace),
    };

    // Steps 5–6 measurements. Users measure first; TP2's outcomes follow.
    let (m1_list, m2_list) = match (params.backend, fixture) {
        (_, Some(f)) => {
            let mut m1_list = Vec::with_capacity(n);
            let mut tp2_rng = root.derive("tp2/measure").rng();
            for i in 0..n {
                memory.project(s2_delivered[i], Basis::Computational, f.m2[i])?;
                let m1 = memory.measure(s1_delivered[i], Basis::Computational, &mut tp2_rng)?;
                if m1 != f.m1[i] {
                    return Err(Error::InvalidConfig(format!(
                        "fixture m1[{i}] = {} contradicts m2 = {} and v = {}",
                        f.m1[i], f.m2[i], f.v[i]
                    )));
                }
                m1_list.push(m1);
            }
            (m1_list, f.m2.clone())
        }
        (CarrierBackend::Shortcut, None) => {
            let mut rng = root.derive("pairs").rng();
            let mut m1_list = Vec::with_capacity(n);
            let mut m2_list = Vec::with_capacity(n);
            for i in 0..n {
                let (m1, m2) = measure_pair_computational(tp1.u_list[i], tp1.v_list[i], dims.d(), &mut rng)?;
                m1_list.push(m1);
                m2_list.push(m2);
            }
            (m1_list, m2_list)
        }
        (CarrierBackend::Statevector, None) => {
            let mut m2_list = Vec::with_capacity(n);
            for (i, &q) in s2_delivered.iter().enumerate() {
                m2_list.push(memory.measure(
                    q,
                    Basis::Computational,
                    &mut root.derive("user").index(i as u64).rng(),
                )?);
            }
            let mut tp2_rng = root.derive("tp2/measure").rng();
            let m1_list = s1_delivered
                .iter()
                .map(|&q| memory.measure(q, Basis::Computational, &mut tp2_rng))
                .collect::<Result<Vec<_>>>()?;
            (m1_list, m2_list)
        }
    };
    trace.m1 = m1_list.clone();
    trace.m2 = m2_list.clone();

    // Step 5
    let mut r2_list = Vec::with_capacity(n);
    for (i, (&m2, secret)) in m2_list.iter().zip(secrets).enumerate() {
        let r2 = step5_user_compute(m2, secret, &dims)?;
        transcript.push(5, ChannelKind::Classical, Party::User(i + 1), Party::Tp2, 1, false, format!("r2={r2}"));
        r2_list.push(r2);
    }
    trace.r2 = r2_list.clone();

    // Step 6
    let q = match fixture {
        Some(f) => f.q,
        None => sample_q(&dims, &mut root.derive("tp2/q").rng()),
    };
    let k_list: Vec<usize> = secrets.iter().map(|s| s.k).collect();
    let (r1_list, r_list) = step6_tp2_compute(&m1_list, q, &k_list, &r2_list, &dims)?;
    let tp2 = Tp2State { q, k_list, m1_list, r2_received: r2_list, r1_list, r_list };
    transcript.push(6, ChannelKind::Classical, Party::Tp2, Party::Tp1, n, false, format!("R={:?}", tp2.r_list));
    trace.q = Some(tp2.q);
    trace.r1 = tp2.r1_list.clone();
    trace.r = tp2.r_list.clone();

    // Step 7
    tp1.r_received = Some(tp2.r_list.clone());
    let (m_values, announcement) = step7_tp1_compute(&tp2.r_list, &tp1.v_list, &dims)?;
    debug_assert!(m_values.iter().all(|&m| m < dims.d()));
    transcript.push(7, ChannelKind::Classical, Party::Tp1, Party::All, 0, false, format!("ordering {announcement}"));
    trace.m_values = m_values;
    transcript.completed = true;

    Ok(RunRecord { outcome: RunOutcome::Completed(announcement), transcript, trace })
}
