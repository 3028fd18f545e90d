//! JSON form of a certificate.

use privfair_core::{Certificate, FairnessValue};
use serde::Serialize;

use super::real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    #[serde(with = "real")]
    pub lipschitz_la: f64,
    #[serde(with = "real")]
    pub diameter: f64,
    #[serde(with = "real")]
    pub gamma: f64,
    #[serde(with = "real")]
    pub tau: f64,
    #[serde(with = "real")]
    pub tau_inner: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub x: Option<String>,
    pub a: String,
    pub a_prime: String,
    pub u: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    #[serde(with = "real")]
    pub l: f64,
    #[serde(with = "real")]
    pub l_bar: f64,
    #[serde(with = "real")]
    pub bound: f64,
    #[serde(with = "real")]
    pub epsilon: f64,
    #[serde(with = "real")]
    pub delta: f64,
    pub constants: ConstantsReport,
    pub theorem: &'static str,
    pub holds: bool,
    pub violation: Option<String>,
    pub l_witness: Option<WitnessReport>,
    pub l_bar_witness: Option<WitnessReport>,
}

fn witness(v: &FairnessValue) -> Option<WitnessReport> {
    v.witness.as_ref().map(|w| WitnessReport { x: w.x.clone(), a: w.a.clone(), a_prime: w.a_prime.clone(), u: w.u.clone() })
}

impl From<&Certificate> for CertificateReport {
    fn from(c: &Certificate) -> Self {
        Self {
            l: c.l.value,
            l_bar: c.l_bar.value,
            bound: c.bound,
            epsilon: c.budget.epsilon,
            delta: c.budget.delta,
            constants: ConstantsReport {
                lipschitz_la: c.constants.lipschitz_la,
                diameter: c.constants.diameter,
                gamma: c.constants.gamma,
                tau: c.constants.tau,
                tau_inner: c.tau_inner,
            },
            theorem: c.form.as_str(),
            holds: c.holds,
            violation: c.violation.as_ref().map(ToString::to_string),
            l_witness: witness(&c.l),
            l_bar_witness: witness(&c.l_bar),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use privfair_core::{certify, counterexample_world, AttributeMetric, MechanismMatrix};

    #[test]
    fn report_fields() {
        let ce = counterexample_world();
        let id = MechanismMatrix::identity(ce.world.a().clone());
        let cert = certify(&ce.world, &ce.utility, &AttributeMetric::Discrete, &id, None, 0.0).unwrap();
        let v = serde_json::to_value(CertificateReport::from(&cert)).unwrap();
        for key in ["l", "l_bar", "bound", "epsilon", "delta", "constants", "theorem", "holds"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["epsilon"], "inf");
        assert_eq!(v["constants"]["diameter"], 1.0);
    }
}
