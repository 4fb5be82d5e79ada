//! Named property suites, shared by `qmember verify` and the acceptance tests.
//!
//! Every suite is deterministic given its seed: trials are split into independent seeded
//! units and reassembled in index order, so the thread count never changes a report.

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{
    analyze, blind_invariance_deviation, exact_id_lowerbound_space, exact_id_povm, exact_id_witness,
    falsification_probes, fidelity_blind_subspace, purity_witness, qubit_pure_mixed_decomposition,
    qutrit_pure_mixed_decomposition, rank_crossing_witness, rank_outcome_bound, rank_threshold_analysis,
    rank_witness_direction, BoundKind, ProblemSpec, PureMixedDecomposition, PROBES_PER_STATE,
};
use crate::error::{Error, Result};
use crate::meas::{operator_system_from_povm, OperatorSystem};
use crate::membership::CrossingWitness;
use crate::opspace::{HermitianOperator, Tolerances};
use crate::states::sampling::derive_seed;
use crate::states::{
    bloch_to_state, feasible_interval, push_to_boundary, DensityOperator, Functional, PerturbationOperator,
    Sampler,
};

/// Suite ids, in acceptance order.
pub const SUITES: [&str; 10] = [
    "rank-dichotomy",
    "fidelity-invariance",
    "exact-id",
    "negative-minor",
    "midpoint-convexity",
    "bloch-isometry",
    "purity",
    "boundary-criterion",
    "outcome-bounds",
    "determinism",
];

/// Problem specs shipped with the crate, by file name.
pub const EXAMPLE_SPECS: [(&str, &str); 11] = [
    ("exact_id_qutrit.json", include_str!("../specs/exact_id_qutrit.json")),
    ("hs_ball_qubit.json", include_str!("../specs/hs_ball_qubit.json")),
    ("trace_ball_qubit.json", include_str!("../specs/trace_ball_qubit.json")),
    ("fidelity_qutrit.json", include_str!("../specs/fidelity_qutrit.json")),
    ("purity_qubit.json", include_str!("../specs/purity_qubit.json")),
    ("purity_d4.json", include_str!("../specs/purity_d4.json")),
    ("almost_purity_d3.json", include_str!("../specs/almost_purity_d3.json")),
    ("entropy_qubit.json", include_str!("../specs/entropy_qubit.json")),
    ("rank_d4_r1.json", include_str!("../specs/rank_d4_r1.json")),
    ("rank_d4_r2.json", include_str!("../specs/rank_d4_r2.json")),
    ("hemisphere.json", include_str!("../specs/hemisphere.json")),
];

/// Failures kept verbatim in a report; the rest are only counted.
const KEPT_FAILURES: usize = 10;

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Caps every per-unit trial count, for quick runs. `None` runs the full sizes.
    pub cap: Option<usize>,
    /// Search budget for the analyses the determinism suite runs.
    pub budget: usize,
    pub tol: Tolerances,
}

impl SuiteOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            cap: None,
            budget: 50,
            tol: Tolerances::default(),
        }
    }

    fn n(&self, full: usize) -> usize {
        self.cap.map_or(full, |c| c.clamp(1, full))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub trials: usize,
    pub failures: usize,
    pub failure_samples: Vec<String>,
    pub seed: u64,
}

impl SuiteReport {
    /// One-line summary, `PASS rank-dichotomy: 412000 trials, 0 failures`.
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} trials, {} failures",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.trials,
            self.failures
        )
    }
}

#[derive(Default)]
struct Tally {
    trials: usize,
    failures: usize,
    samples: Vec<String>,
}

impl Tally {
    fn record(&mut self, outcome: std::result::Result<(), String>) {
        self.trials += 1;
        if let Err(msg) = outcome {
            self.fail(msg);
        }
    }

    fn fail(&mut self, msg: String) {
        self.failures += 1;
        if self.samples.len() < KEPT_FAILURES {
            self.samples.push(msg);
        }
    }

    fn absorb(&mut self, outcomes: Vec<std::result::Result<(), String>>) {
        for o in outcomes {
            self.record(o);
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.record(if ok { Ok(()) } else { Err(msg()) });
    }

    fn report(self, suite: &str, seed: u64) -> SuiteReport {
        SuiteReport {
            suite: suite.to_string(),
            passed: self.failures == 0 && self.trials > 0,
            trials: self.trials,
            failures: self.failures,
            failure_samples: self.samples,
            seed,
        }
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Runs `n` seeded trials of `f` in parallel; results come back in trial order.
fn trials<F>(n: usize, seed: u64, f: F) -> Vec<std::result::Result<(), String>>
where
    F: Fn(&mut Sampler) -> std::result::Result<(), String> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|k| f(&mut Sampler::new(derive_seed(seed, k as u64))))
        .collect()
}

fn err(e: Error) -> String {
    e.to_string()
}

pub fn run_suite(id: &str, opts: &SuiteOptions) -> Result<SuiteReport> {
    let tally = match id {
        "rank-dichotomy" => rank_dichotomy(opts)?,
        "fidelity-invariance" => fidelity_invariance(opts)?,
        "exact-id" => exact_id(opts)?,
        "negative-minor" => negative_minor(opts)?,
        "midpoint-convexity" => midpoint_convexity(opts)?,
        "bloch-isometry" => bloch_isometry(opts)?,
        "purity" => purity(opts)?,
        "boundary-criterion" => boundary_criterion(opts)?,
        "outcome-bounds" => outcome_bounds(opts)?,
        "determinism" => determinism(opts)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown suite \"{other}\"; known suites: {}",
                SUITES.join(", ")
            )))
        }
    };
    Ok(tally.report(id, opts.seed))
}

/// Crossings for every random direction when `r ≥ ⌊d/2⌋`; none for the balanced witness below.
fn rank_dichotomy(o: &SuiteOptions) -> Result<Tally> {
    let tol = o.tol;
    let mut t = Tally::default();
    for d in 2..=6 {
        for r in 1..d {
            let seed = derive_seed(o.seed, (d * 10 + r) as u64);
            if r >= d / 2 {
                let problem = crate::catalog::problems::rank_problem(d, r, &tol)?;
                t.absorb(trials(o.n(1000), seed, |s| {
                    let delta = s.perturbation(d, &tol);
                    let (state, lambda) = rank_crossing_witness(&delta, r, &tol).map_err(err)?;
                    CrossingWitness {
                        delta,
                        state,
                        lambda,
                        from_block: "high_rank".into(),
                        to_block: "low_rank".into(),
                    }
                    .verify(&problem, &tol)
                    .map_err(|e| format!("d={d} r={r}: {e}"))
                }));
            } else {
                let delta = rank_witness_direction(d, r, &tol)?;
                let states = o.n(100_000).div_ceil(PROBES_PER_STATE);
                let (probes, crossings) = falsification_probes(&delta, r, states, seed, &tol)?;
                t.trials += probes;
                for _ in 0..crossings {
                    t.fail(format!("d={d} r={r}: witness probe landed inside the state space"));
                }
            }
        }
    }
    Ok(t)
}

fn fidelity_invariance(o: &SuiteOptions) -> Result<Tally> {
    let tol = o.tol;
    let mut t = Tally::default();
    for d in 2..=6 {
        for r in 1..d {
            let mut s = Sampler::new(derive_seed(o.seed, (d * 10 + r) as u64));
            let sigma = s.state(d, r, &tol)?;
            let blind = fidelity_blind_subspace(&sigma, &tol)?;
            let expected = d * d - r * r - 1;
            let system = OperatorSystem::from_generators(
                d,
                &blind.iter().map(|b| b.op().clone()).collect::<Vec<_>>(),
                &tol,
            )?;
            t.check(blind.len() == expected && system.size() == expected + 1, || {
                format!("d={d} r={r}: blind subspace has {} elements, want {expected}", blind.len())
            });
            if d <= 4 {
                let n = o.n(10_000);
                // split into seeded chunks so the samples run in parallel
                let chunks = 16.min(n);
                let worst: Vec<f64> = (0..chunks)
                    .into_par_iter()
                    .map(|c| {
                        let mut s = Sampler::new(derive_seed(o.seed, ((d * 10 + r) * 100 + c) as u64));
                        let m = n / chunks + usize::from(c < n % chunks);
                        blind_invariance_deviation(&sigma, &blind, m, &mut s, &tol)
                    })
                    .collect::<Result<_>>()?;
                for (c, w) in worst.into_iter().enumerate() {
                    let m = n / chunks + usize::from(c < n % chunks);
                    t.trials += m.saturating_sub(1);
                    t.check(w <= 1e-9, || format!("d={d} r={r}: fidelity moved by {w:e}"));
                }
            }
        }
    }
    Ok(t)
}

fn exact_id(o: &SuiteOptions) -> Result<Tally> {
    let tol = o.tol;
    let mut t = Tally::default();
    for d in 2..=5 {
        for r in 1..d {
            let seed = derive_seed(o.seed, (d * 10 + r) as u64);
            t.absorb(trials(o.n(100), seed, |s| {
                let sigma = s.state(d, r, &tol).map_err(err)?;
                let ctx = |m: String| format!("d={d} r={r}: {m}");
                let delta = exact_id_witness(&sigma, &tol).map_err(err)?;
                let iv = feasible_interval(&sigma, &delta, &tol).map_err(err)?;
                ensure(iv.lo.abs() <= 1e-8 && iv.hi.abs() <= 1e-8, || {
                    ctx(format!("witness interval [{:e}, {:e}]", iv.lo, iv.hi))
                })?;
                let povm = exact_id_povm(&sigma, &tol).map_err(err)?;
                let want = r * r + 1;
                ensure(povm.len() == want, || ctx(format!("{} POVM elements", povm.len())))?;
                let mut sum = HermitianOperator::zeros(d);
                for e in povm.elements() {
                    let m = e.min_eigenvalue().map_err(err)?;
                    ensure(m >= -tol.pos, || ctx(format!("POVM element eigenvalue {m:e}")))?;
                    sum = &sum + e;
                }
                let residual = (&sum - &HermitianOperator::identity(d)).hs_norm();
                ensure(residual <= 1e-9, || ctx(format!("POVM sum residual {residual:e}")))?;
                let span = operator_system_from_povm(&povm, &tol).size();
                ensure(span == want, || ctx(format!("POVM span {span}")))?;
                let lower = exact_id_lowerbound_space(&sigma, None, &tol).map_err(err)?;
                ensure(lower.basis.len() == r * r, || {
                    ctx(format!("lower-bound space of size {}", lower.basis.len()))
                })
            }));
        }
    }
    Ok(t)
}

/// `σ + λΔ` restricted to the pair (last support vector, first kernel vector) is
/// `[[μ, λ], [λ, 0]]`, with determinant `−λ²`.
fn negative_minor(o: &SuiteOptions) -> Result<Tally> {
    let tol = o.tol;
    let mut t = Tally::default();
    for d in 2..=5 {
        for r in 1..d {
            let seed = derive_seed(o.seed, (d * 10 + r) as u64);
            t.absorb(trials(o.n(20), seed, |s| {
                let sigma = s.state(d, r, &tol).map_err(err)?;
                let delta = exact_id_witness(&sigma, &tol).map_err(err)?;
                let pair = sigma.op().spectral().map_err(err)?.columns(r - 1..r + 1);
                for lambda in [1e-3, -1e-3, 1e-1, -1e-1, 1.0, -1.0] {
                    let moved = sigma.op() + &delta.op().scaled(lambda);
                    let m = moved.compress(&pair);
                    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
                    ensure((det + lambda * lambda).abs() <= 1e-12, || {
                        format!("d={d} r={r} λ={lambda}: minor determinant {det:e}")
                    })?;
                    let min = moved.min_eigenvalue().map_err(err)?;
                    ensure(min < -tol.pos, || format!("d={d} r={r} λ={lambda}: min eigenvalue {min:e}"))?;
                }
                Ok(())
            }));
        }
    }
    Ok(t)
}

fn midpoint_convexity(o: &SuiteOptions) -> Result<Tally> {
    let tol = o.tol;
    let mut t = Tally::default();
    for d in 2..=4 {
        let sigma = Sampler::new(derive_seed(o.seed, d as u64)).state(d, d, &tol)?;
        let mut fs = vec![
            Functional::Purity,
            Functional::HsDistanceSquared(sigma.clone()),
            Functional::Entropy.negated(),
        ];
        if d == 2 {
            fs.push(Functional::TraceDistanceSquared(sigma.clone()));
        }
        for (j, f) in fs.iter().enumerate() {
            let seed = derive_seed(o.seed, (100 * d + j) as u64);
            t.absorb(trials(o.n(100_000), seed, |s| {
                let (k1, k2) = (1 + s.index(d), 1 + s.index(d));
                let a = s.state(d, k1, &tol).map_err(err)?;
                let b = s.state(d, k2, &tol).map_err(err)?;
                ensure((a.op() - b.op()).hs_norm() > 1e-6, || "coincident pair".into())?;
                let mid = a.mix(&b, 0.5);
                let ends = 0.5 * (f.eval(&a, &tol).map_err(err)? + f.eval(&b, &tol).map_err(err)?);
                let margin = ends - f.eval(&mid, &tol).map_err(err)?;
                ensure(margin > 0.0, || format!("{} d={d}: mid-point margin {margin:e}", f.name()))
            }));
        }
    }
    Ok(t)
}

fn bloch_isometry(o: &SuiteOptions) -> Result<Tally> {
    let mut t = Tally::default();
    t.absorb(trials(o.n(10_000), derive_seed(o.seed, 1), |s| {
        let a = s.bloch_in_ball();
        let b = s.bloch_in_ball();
        let norm = (bloch_to_state(&a).op() - bloch_to_state(&b).op()).trace_norm().map_err(err)?;
        let dev = (norm - a.distance(&b)).abs();
        ensure(dev <= 1e-12, || format!("trace norm deviates from Bloch distance by {dev:e}"))
    }));
    Ok(t)
}

fn purity(o: &SuiteOptions) -> Result<Tally> {
    let tol = o.tol;
    let mut t = Tally::default();
    for d in [2, 3] {
        t.absorb(trials(o.n(10_000), derive_seed(o.seed, d as u64), |s| {
            let delta = s.perturbation(d, &tol);
            let dec: PureMixedDecomposition = if d == 2 {
                qubit_pure_mixed_decomposition(&delta, &tol)
            } else {
                qutrit_pure_mixed_decomposition(&delta, &tol)
            }
            .map_err(err)?;
            let rel = dec.residual / delta.op().hs_norm();
            ensure(rel <= 1e-9, || format!("d={d}: relative residual {rel:e}"))?;
            let (pr, mr) = (dec.pure.rank(&tol).map_err(err)?, dec.mixed.rank(&tol).map_err(err)?);
            ensure(pr == 1 && mr >= 2, || format!("d={d}: ranks {pr} (pure), {mr} (mixed)"))
        }));
    }
    let delta = purity_witness(4, &tol)?;
    let states = o.n(100_000).div_ceil(PROBES_PER_STATE);
    let (probes, crossings) = falsification_probes(&delta, 1, states, derive_seed(o.seed, 4), &tol)?;
    t.trials += probes;
    for _ in 0..crossings {
        t.fail("d=4: purity witness probe landed inside the state space".into());
    }
    let first = DensityOperator::from_diagonal(&[0.5, 0.5, 0.0, 0.0], &tol)?;
    let second = DensityOperator::from_diagonal(&[0.0, 0.0, 0.5, 0.5], &tol)?;
    let system = OperatorSystem::annihilating(4, &[delta.op().clone()], &tol)?;
    let residual = system.project(&(first.op() - second.op()))?.hs_norm();
    t.check(residual <= 1e-10, || format!("mixed pair projection residual {residual:e}"));
    Ok(t)
}

fn boundary_criterion(o: &SuiteOptions) -> Result<Tally> {
    let tol = o.tol;
    let mut t = Tally::default();
    t.absorb(trials(o.n(1000), derive_seed(o.seed, 1), |s| {
        let d = 2 + s.index(4);
        let rho = s.state(d, d, &tol).map_err(err)?;
        let delta: PerturbationOperator = s.perturbation(d, &tol);
        let (pushed, lambda_min) = push_to_boundary(&rho, &delta, &tol).map_err(err)?;
        let min = pushed.op().min_eigenvalue().map_err(err)?;
        ensure(min >= -tol.pos && min <= tol.rank, || format!("d={d}: boundary eigenvalue {min:e}"))?;
        let rebuilt = (rho.op() - pushed.op()).scaled(lambda_min);
        let dev = (&rebuilt - delta.op()).hs_norm();
        ensure(dev <= 1e-9 * delta.op().hs_norm(), || format!("d={d}: reconstruction error {dev:e}"))
    }));
    Ok(t)
}

fn outcome_bounds(o: &SuiteOptions) -> Result<Tally> {
    let tol = o.tol;
    let mut t = Tally::default();
    for d in 2..=8 {
        for r in 1..d {
            let b = rank_outcome_bound(d, r)?;
            let formula = 4 * r * (d - r) + d - 2 * r;
            let trivial = r >= d / 2;
            t.check(b.value == formula && (b.kind == BoundKind::Trivial) == trivial, || {
                format!("d={d} r={r}: bound {b:?}, formula {formula}")
            });
            if 2 * r == d {
                t.check(b.value == d * d, || format!("d={d} r={r}: bound {} at r = d/2", b.value));
            }
            let reported = rank_threshold_analysis(d, r, derive_seed(o.seed, (d * 10 + r) as u64), &tol)?;
            t.check(reported.min_outcomes == Some(b) && reported.ic_required == trivial, || {
                format!("d={d} r={r}: analysis reported {:?}", reported.min_outcomes)
            });
        }
    }
    Ok(t)
}

/// Each shipped spec analysed twice must serialize to the same bytes.
fn determinism(o: &SuiteOptions) -> Result<Tally> {
    let mut t = Tally::default();
    for (name, text) in EXAMPLE_SPECS {
        let spec = ProblemSpec::from_json(text)?;
        let run = || -> Result<String> {
            Ok(serde_json::to_string_pretty(&analyze(&spec, o.seed, o.budget, &o.tol)?)?)
        };
        let (a, b) = (run()?, run()?);
        t.check(a == b, || format!("{name}: reruns differ"));
    }
    Ok(t)
}
