//! Qudit efficiency: compared bits over qudits plus classical dits spent.

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::protocol::Transcript;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EfficiencyReport {
    /// Carrier qudits, decoys excluded.
    pub x: u64,
    /// Classical payload dits, check traffic excluded.
    pub y: u64,
    /// Comparison outcomes produced per run.
    pub z: u64,
    #[serde(serialize_with = "ratio_string")]
    pub eta: Ratio<u64>,
}

fn ratio_string<S: Serializer>(r: &Ratio<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

impl EfficiencyReport {
    fn new(x: u64, y: u64) -> Self {
        Self { x, y, z: 1, eta: Ratio::new(1, x + y) }
    }

    pub fn eta_f64(&self) -> f64 {
        *self.eta.numer() as f64 / *self.eta.denom() as f64
    }
}

/// `η = 1 / (4n)` for `n` users: `2n` carriers and `2n` announced dits.
pub fn efficiency_closed_form(n: usize) -> Result<EfficiencyReport> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("comparison needs at least 2 users, got {n}")));
    }
    let n = n as u64;
    Ok(EfficiencyReport::new(2 * n, 2 * n))
}

/// Efficiency counted from what was actually sent in a completed run.
pub fn efficiency_from_transcript(transcript: &Transcript) -> Result<EfficiencyReport> {
    if !transcript.is_completed() {
        return Err(Error::IncompleteRun);
    }
    Ok(EfficiencyReport::new(transcript.qudit_count() as u64, transcript.classical_dit_count() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::EavesdropperModel;
    use crate::protocol::{run_fixture, run_protocol, share_keys, Fixture, ProtocolParams};

    #[test]
    fn closed_form_values() {
        assert_eq!(efficiency_closed_form(4).unwrap().eta, Ratio::new(1, 16));
        assert_eq!(efficiency_closed_form(2).unwrap().eta, Ratio::new(1, 8));
        assert!(efficiency_closed_form(1).is_err());
    }

    #[test]
    fn json_layout() {
        let json = serde_json::to_string(&efficiency_closed_form(4).unwrap()).unwrap();
        assert_eq!(json, r#"{"x":8,"y":8,"z":1,"eta":"1/16"}"#);
    }

    #[test]
    fn counted_matches_closed_form() {
        let record = run_fixture(&Fixture::reference(), 3, 9).unwrap();
        assert_eq!(efficiency_from_transcript(&record.transcript).unwrap(), efficiency_closed_form(4).unwrap());
    }

    #[test]
    fn aborted_run_has_no_efficiency() {
        let params = ProtocolParams::new(5, 3, 8, 1).unwrap();
        let secrets = share_keys(&params, &[0, 1, 2]).unwrap();
        let record = run_protocol(&params, &secrets, &EavesdropperModel::InterceptResend).unwrap();
        assert!(record.outcome.is_aborted());
        assert!(matches!(efficiency_from_transcript(&record.transcript), Err(Error::IncompleteRun)));
    }
}
