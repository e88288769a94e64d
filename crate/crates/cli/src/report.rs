use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use pidreg_core::certificates::CertificateError;
use pidreg_core::demos::DemoError;
use pidreg_core::gain_design::DesignError;
use pidreg_core::integrator::IntegratorError;
use pidreg_core::plants::PlantError;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => EXIT_INCONCLUSIVE,
        }
    }
}

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NON_FINITE: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;
pub const EXIT_RUNTIME: i32 = 5;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Value,
    pub results: Value,
    pub trajectories: Vec<String>,
    pub verdict: Verdict,
    pub seed: u64,
}

/// A command that could not produce a verdict.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }

    pub fn runtime(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.to_string(),
        }
    }
}

impl From<IntegratorError> for Failure {
    fn from(e: IntegratorError) -> Self {
        let code = match e {
            IntegratorError::NonFiniteDerivative { .. } => EXIT_NON_FINITE,
            IntegratorError::InvalidConfig(_) | IntegratorError::NonFiniteInitial | IntegratorError::ReferenceDimension { .. } => {
                EXIT_USAGE
            }
            IntegratorError::StepBudgetExhausted(_) => EXIT_RUNTIME,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<DesignError> for Failure {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::SearchExhausted(_) => Failure::runtime(e),
            _ => Failure::usage(e),
        }
    }
}

impl From<PlantError> for Failure {
    fn from(e: PlantError) -> Self {
        Failure::usage(e)
    }
}

impl From<CertificateError> for Failure {
    fn from(e: CertificateError) -> Self {
        match e {
            CertificateError::Integrator(inner) => inner.into(),
            CertificateError::Design(inner) => inner.into(),
            CertificateError::NonPositiveEpsilon(_)
            | CertificateError::InvalidConeParameter(_)
            | CertificateError::InvalidLipschitz(_)
            | CertificateError::DimensionMismatch { .. }
            | CertificateError::DegenerateTriple(_) => Failure::usage(e),
            _ => Failure::runtime(e),
        }
    }
}

impl From<DemoError> for Failure {
    fn from(e: DemoError) -> Self {
        match e {
            DemoError::Design(inner) => inner.into(),
            DemoError::Certificate(inner) => inner.into(),
            DemoError::Integrator(inner) => inner.into(),
            DemoError::Loop(inner) => Failure::usage(inner),
            DemoError::Invalid(msg) => Failure::usage(msg),
        }
    }
}

/// Column-oriented numeric table rendered with 17 significant digits.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::runtime(format!("cannot write to stdout: {e}"))),
    }
}

pub fn to_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_derivative_has_its_own_exit_code() {
        let e = IntegratorError::NonFiniteDerivative { t: 1.0, state: vec![0.0] };
        assert_eq!(Failure::from(e.clone()).code, EXIT_NON_FINITE);
        assert_eq!(Failure::from(DemoError::Integrator(e)).code, EXIT_NON_FINITE);
        assert_eq!(Failure::from(IntegratorError::InvalidConfig("x".into())).code, EXIT_USAGE);
    }

    #[test]
    fn verdict_exit_codes() {
        assert_eq!(Verdict::Pass.exit_code(), 0);
        assert_eq!(Verdict::Fail.exit_code(), 1);
        assert!(Verdict::Inconclusive.exit_code() >= 2);
    }

    #[test]
    fn table_keeps_seventeen_digits() {
        let t = Table {
            header: vec!["t".into(), "x".into()],
            rows: vec![vec![0.1, -1.0 / 3.0]],
        };
        let text = t.render();
        let row = text.lines().nth(1).unwrap();
        let back: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(back, vec![0.1, -1.0 / 3.0]);
    }
}
