//! Problem specifications as read from JSON, `{"d": 3, "kind": "fidelity", "params": {...}}`.
//!
//! Reference states come either as a full operator under `sigma` or as a diagonal under
//! `sigma_diag`. Custom problems need a classifier in code and are only reachable through the
//! library.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::problems::{exact_id_problem, fidelity_problem, hs_ball_problem, purity_problem, rank_problem, trace_ball_problem};
use super::{
    almost_purity_analysis, exact_id_analysis, fidelity_analysis, hs_ball_analysis, purity_analysis,
    rank_threshold_analysis, trace_ball_qubit_analysis, AlmostPurityFunctional, BoundKind, CatalogVerdict,
    Evidence, OutcomeBound,
};
use crate::error::{Error, Result};
use crate::meas::Povm;
use crate::membership::{crossing_search, hemisphere_problem, levelset_problem, requires_ic_falsifier, MembershipProblem};
use crate::opspace::{HermitianOperator, Tolerances};
use crate::states::{DensityOperator, Functional, PerturbationOperator};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub d: usize,
    pub kind: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A parsed, validated catalog entry.
#[derive(Clone, Debug)]
pub enum CatalogProblem {
    ExactId { sigma: DensityOperator },
    HsBall { sigma: DensityOperator, eps: f64 },
    TraceBallQubit { sigma: DensityOperator, eps: f64 },
    Fidelity { sigma: DensityOperator, eps: f64 },
    Purity { d: usize },
    AlmostPurity { d: usize, functional: AlmostPurityFunctional, eps: f64 },
    RankThreshold { d: usize, r: usize },
    /// Qubit half-ball `{r·n ≤ 0}`, solved by a single two-outcome measurement along `n`.
    Hemisphere { axis: [f64; 3] },
}

fn param<'a>(spec: &'a ProblemSpec, key: &str) -> Result<&'a Value> {
    spec.params
        .get(key)
        .ok_or_else(|| Error::Malformed(format!("{}: missing parameter \"{key}\"", spec.kind)))
}

fn typed<T: serde::de::DeserializeOwned>(spec: &ProblemSpec, key: &str) -> Result<T> {
    serde_json::from_value(param(spec, key)?.clone())
        .map_err(|e| Error::Malformed(format!("{}: parameter \"{key}\": {e}", spec.kind)))
}

fn sigma(spec: &ProblemSpec, tol: &Tolerances) -> Result<DensityOperator> {
    let sigma = if spec.params.contains_key("sigma") {
        typed::<DensityOperator>(spec, "sigma")?
    } else if spec.params.contains_key("sigma_diag") {
        DensityOperator::from_diagonal(&typed::<Vec<f64>>(spec, "sigma_diag")?, tol)?
    } else {
        return Err(Error::Malformed(format!(
            "{}: reference state needs \"sigma\" or \"sigma_diag\"",
            spec.kind
        )));
    };
    if sigma.dim() != spec.d {
        return Err(Error::DimensionMismatch(spec.d, sigma.dim()));
    }
    Ok(sigma)
}

impl CatalogProblem {
    pub fn from_spec(spec: &ProblemSpec, tol: &Tolerances) -> Result<Self> {
        let d = spec.d;
        if d < 2 {
            return Err(Error::DimensionTooSmall { got: d, min: 2 });
        }
        Ok(match spec.kind.as_str() {
            "exact_id" => Self::ExactId { sigma: sigma(spec, tol)? },
            "hs_ball" => Self::HsBall {
                sigma: sigma(spec, tol)?,
                eps: typed(spec, "eps")?,
            },
            "trace_ball_qubit" => {
                if d != 2 {
                    return Err(Error::DimensionMismatch(d, 2));
                }
                Self::TraceBallQubit {
                    sigma: sigma(spec, tol)?,
                    eps: typed(spec, "eps")?,
                }
            }
            "fidelity" => Self::Fidelity {
                sigma: sigma(spec, tol)?,
                eps: typed(spec, "eps")?,
            },
            "purity" => Self::Purity { d },
            "almost_purity" => Self::AlmostPurity {
                d,
                functional: if spec.params.contains_key("functional") {
                    typed(spec, "functional")?
                } else {
                    AlmostPurityFunctional::Purity
                },
                eps: typed(spec, "eps")?,
            },
            "rank_threshold" => Self::RankThreshold { d, r: typed(spec, "r")? },
            "hemisphere" => {
                if d != 2 {
                    return Err(Error::DimensionMismatch(d, 2));
                }
                let axis = if spec.params.contains_key("axis") {
                    typed(spec, "axis")?
                } else {
                    [0.0, 0.0, 1.0]
                };
                Self::Hemisphere { axis }
            }
            "custom" => {
                return Err(Error::InvalidParameter(
                    "custom problems need a classifier in code; use the library API".into(),
                ))
            }
            other => return Err(Error::Malformed(format!("unknown problem kind \"{other}\""))),
        })
    }

    pub fn membership_problem(&self, tol: &Tolerances) -> Result<MembershipProblem> {
        match self {
            Self::ExactId { sigma } => exact_id_problem(sigma, tol),
            Self::HsBall { sigma, eps } => hs_ball_problem(sigma, *eps, tol),
            Self::TraceBallQubit { sigma, eps } => trace_ball_problem(sigma, *eps, tol),
            Self::Fidelity { sigma, eps } => fidelity_problem(sigma, *eps, tol),
            Self::Purity { d } => purity_problem(*d, tol),
            Self::AlmostPurity { d, functional, eps } => match functional {
                AlmostPurityFunctional::Purity => levelset_problem(&Functional::Purity, *eps, *d, tol),
                AlmostPurityFunctional::Entropy => levelset_problem(&Functional::Entropy.negated(), -eps, *d, tol),
            },
            Self::RankThreshold { d, r } => rank_problem(*d, *r, tol),
            Self::Hemisphere { axis } => hemisphere_problem(*axis, tol),
        }
    }

    /// `budget` bounds the sampled searches that back empirical evidence.
    pub fn analyze(&self, seed: u64, budget: usize, tol: &Tolerances) -> Result<CatalogVerdict> {
        match self {
            Self::ExactId { sigma } => exact_id_analysis(sigma, seed, tol),
            Self::HsBall { sigma, eps } => hs_ball_analysis(sigma, *eps, seed, tol),
            Self::TraceBallQubit { sigma, eps } => trace_ball_qubit_analysis(sigma, *eps, seed, tol),
            Self::Fidelity { sigma, eps } => fidelity_analysis(sigma, *eps, seed, tol),
            Self::Purity { d } => purity_analysis(*d, seed, tol),
            Self::AlmostPurity { d, functional, eps } => almost_purity_analysis(*d, *functional, *eps, seed, tol),
            Self::RankThreshold { d, r } => rank_threshold_analysis(*d, *r, seed, tol),
            Self::Hemisphere { axis } => hemisphere_analysis(*axis, seed, budget, tol),
        }
    }
}

fn bloch_operator(v: [f64; 3]) -> HermitianOperator {
    &(&HermitianOperator::pauli_x().scaled(v[0]) + &HermitianOperator::pauli_y().scaled(v[1]))
        + &HermitianOperator::pauli_z().scaled(v[2])
}

fn hemisphere_analysis(axis: [f64; 3], seed: u64, budget: usize, tol: &Tolerances) -> Result<CatalogVerdict> {
    let problem = hemisphere_problem(axis, tol)?;
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n = axis.map(|x| x / norm);
    // a unit vector orthogonal to the axis, built from the coordinate axis it is least aligned with
    let k = (0..3).min_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).expect("three axes");
    let mut m = [0.0; 3];
    m[k] = 1.0;
    let dot = n[k];
    let m = [m[0] - dot * n[0], m[1] - dot * n[1], m[2] - dot * n[2]];
    let mn = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let witness = PerturbationOperator::new(bloch_operator(m.map(|x| x / mn)), tol)?;

    if crossing_search(&problem, &witness, budget, seed, tol)?.is_some() {
        return Err(Error::Verification("hemisphere witness produced a crossing".into()));
    }
    let half = |s: f64| (&HermitianOperator::identity(2) + &bloch_operator(n.map(|x| s * x))).scaled(0.5);
    let povm = Povm::new(vec![half(1.0), half(-1.0)], tol)?;
    let falsifier = requires_ic_falsifier(&problem, 3, budget, seed, tol)?;

    let mut params = Map::new();
    params.insert("d".into(), json!(2));
    params.insert("axis".into(), json!(n));
    let mut v = CatalogVerdict::new("hemisphere", params, seed);
    v.witness = Some(witness);
    v.min_outcomes = Some(OutcomeBound {
        value: 2,
        kind: BoundKind::Exact,
    });
    v.evidence = vec![
        Evidence::Falsification {
            probes: budget,
            crossings: 0,
        },
        Evidence::Povm { outcomes: 2, povm },
        Evidence::Falsifier { verdict: falsifier },
    ];
    v.check()?;
    Ok(v)
}

/// The membership problem a spec describes.
pub fn build_problem(spec: &ProblemSpec, tol: &Tolerances) -> Result<MembershipProblem> {
    CatalogProblem::from_spec(spec, tol)?.membership_problem(tol)
}

pub fn analyze(spec: &ProblemSpec, seed: u64, budget: usize, tol: &Tolerances) -> Result<CatalogVerdict> {
    CatalogProblem::from_spec(spec, tol)?.analyze(seed, budget, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::membership::VerdictStatus;

    fn t() -> Tolerances {
        Tolerances::default()
    }

    fn spec(text: &str) -> ProblemSpec {
        ProblemSpec::from_json(text).unwrap()
    }

    #[test]
    fn parses_each_kind() {
        let tol = t();
        let cases = [
            r#"{"d": 3, "kind": "exact_id", "params": {"sigma_diag": [0.5, 0.5, 0]}}"#,
            r#"{"d": 2, "kind": "hs_ball", "params": {"sigma_diag": [0.5, 0.5], "eps": 0.3}}"#,
            r#"{"d": 2, "kind": "trace_ball_qubit", "params": {"sigma_diag": [0.5, 0.5], "eps": 0.3}}"#,
            r#"{"d": 3, "kind": "fidelity", "params": {"sigma_diag": [1, 0, 0], "eps": 0.5}}"#,
            r#"{"d": 4, "kind": "purity"}"#,
            r#"{"d": 3, "kind": "almost_purity", "params": {"eps": 0.6}}"#,
            r#"{"d": 2, "kind": "almost_purity", "params": {"eps": 0.5, "functional": "entropy"}}"#,
            r#"{"d": 4, "kind": "rank_threshold", "params": {"r": 1}}"#,
            r#"{"d": 2, "kind": "hemisphere"}"#,
        ];
        for c in cases {
            let s = spec(c);
            let p = CatalogProblem::from_spec(&s, &tol).unwrap();
            p.membership_problem(&tol).unwrap();
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let tol = t();
        assert!(ProblemSpec::from_json("{\"d\": 2").is_err());
        let bad = [
            r#"{"d": 2, "kind": "custom"}"#,
            r#"{"d": 2, "kind": "nonsense"}"#,
            r#"{"d": 3, "kind": "exact_id", "params": {"sigma_diag": [0.5, 0.5]}}"#,
            r#"{"d": 2, "kind": "hs_ball", "params": {"sigma_diag": [0.5, 0.5]}}"#,
            r#"{"d": 3, "kind": "hemisphere"}"#,
            r#"{"d": 1, "kind": "purity"}"#,
            r#"{"d": 4, "kind": "rank_threshold", "params": {"r": "two"}}"#,
        ];
        for c in bad {
            let err = analyze(&spec(c), 1, 10, &tol).unwrap_err();
            assert!(!err.is_internal(), "{c}: {err}");
        }
    }

    #[test]
    fn full_operator_sigma() {
        let tol = t();
        let text = r#"{"d": 2, "kind": "exact_id", "params": {"sigma": {"d": 2, "re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]}}}"#;
        let v = analyze(&spec(text), 1, 10, &tol).unwrap();
        assert!(!v.ic_required);
    }

    #[test]
    fn hemisphere_verdict() {
        let tol = t();
        let v = analyze(&spec(r#"{"d": 2, "kind": "hemisphere"}"#), 1, 50, &tol).unwrap();
        assert!(!v.ic_required);
        assert_eq!(v.min_outcomes, Some(OutcomeBound { value: 2, kind: BoundKind::Exact }));
        match &v.evidence[2] {
            Evidence::Falsifier { verdict } => assert_eq!(verdict.status, VerdictStatus::CandidateDirectionFound),
            e => panic!("unexpected evidence {e:?}"),
        }
        let tilted = spec(r#"{"d": 2, "kind": "hemisphere", "params": {"axis": [1, 1, 0]}}"#);
        assert!(!analyze(&tilted, 2, 50, &tol).unwrap().ic_required);
    }

    #[test]
    fn deterministic_serialization() {
        let tol = t();
        let s = spec(r#"{"d": 3, "kind": "almost_purity", "params": {"eps": 0.6}}"#);
        let a = serde_json::to_string(&analyze(&s, 9, 10, &tol).unwrap()).unwrap();
        let b = serde_json::to_string(&analyze(&s, 9, 10, &tol).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
