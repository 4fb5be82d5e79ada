//! Property tests over seeded random inputs, one block per module.

use proptest::prelude::*;

use qmember::catalog::{
    exact_id_povm, exact_id_witness, fidelity_blind_subspace, qubit_pure_mixed_decomposition,
    qutrit_pure_mixed_decomposition, rank_crossing_witness, rank_indistinguishability_lift, CatalogVerdict,
    ProblemSpec,
};
use qmember::meas::{
    distinguishes, operator_system_from_povm, orthocomplement, povm_from_operator_system, OperatorSystem,
};
use qmember::membership::{boundary_criterion_witness, levelset_ic_check, purity_ball_problem};
use qmember::opspace::{HermitianOperator, Tolerances};
use qmember::states::{
    canonical_state_pair, feasible_interval, fidelity, push_to_boundary, DensityOperator, Functional,
    PerturbationOperator, Sampler,
};

fn tol() -> Tolerances {
    Tolerances::default()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn norms_match_spectrum(seed: u64, d in 2usize..=6) {
        let a = Sampler::new(seed).hermitian(d);
        let eig = a.spectral().unwrap();
        let hs2: f64 = eig.eigenvalues().iter().map(|x| x * x).sum();
        let tr: f64 = eig.eigenvalues().iter().map(|x| x.abs()).sum();
        prop_assert!((a.hs_norm().powi(2) - hs2).abs() <= 1e-9 * hs2.max(1.0));
        prop_assert!((a.trace_norm().unwrap() - tr).abs() <= 1e-9 * tr.max(1.0));
    }

    #[test]
    fn positive_and_negative_parts_rebuild(seed: u64, d in 2usize..=6) {
        let delta = Sampler::new(seed).perturbation(d, &tol());
        let (p, m) = delta.op().pos_neg_parts().unwrap();
        prop_assert!((&(&p - &m) - delta.op()).hs_norm() <= 1e-9 * delta.op().hs_norm());
    }

    #[test]
    fn square_root_squares_back(seed: u64, d in 2usize..=6) {
        let t = tol();
        let p = Sampler::new(seed).state(d, d, &t).unwrap();
        let root = p.op().matrix_sqrt(&t).unwrap();
        let back = root.matrix() * root.matrix();
        prop_assert!((back - p.op().matrix()).norm() <= 1e-9);
    }

    #[test]
    fn exact_rank_is_recovered(seed: u64, d in 2usize..=6, k in 1usize..=6) {
        let k = k.min(d);
        let u = Sampler::new(seed).ginibre(d, d).qr().q();
        let mut sum = HermitianOperator::zeros(d);
        for j in 0..k {
            sum = &sum + &HermitianOperator::projector(&u.column(j).into_owned());
        }
        prop_assert_eq!(sum.rank_eps(&tol()).unwrap(), k);
    }

    #[test]
    fn feasible_interval_endpoints_touch_the_boundary(seed: u64, d in 2usize..=5, full: bool) {
        let t = tol();
        let mut s = Sampler::new(seed);
        let rank = if full { d } else { 1 + s.index(d) };
        let rho = s.state(d, rank, &t).unwrap();
        let delta = s.perturbation(d, &t);
        let iv = feasible_interval(&rho, &delta, &t).unwrap();
        let min_at = |l: f64| (rho.op() + &delta.op().scaled(l)).min_eigenvalue().unwrap();
        if full {
            for l in [iv.lo, iv.hi] {
                let m = min_at(l);
                prop_assert!(m >= -t.pos && m <= t.rank, "λ = {l}: {m:e}");
            }
        }
        // Off a singular state the eigenvalue leaves zero only at the rate of Δ's kernel block,
        // so step further out and ask for any negativity.
        let (step, floor) = if full { (10.0 * t.num, -t.pos) } else { (1e-5, 0.0) };
        prop_assert!(min_at(iv.lo - step) < floor);
        prop_assert!(min_at(iv.hi + step) < floor);
    }

    #[test]
    fn pushed_states_are_singular(seed: u64, d in 2usize..=5) {
        let t = tol();
        let mut s = Sampler::new(seed);
        let rho = s.state(d, d, &t).unwrap();
        prop_assert!(rho.is_full_rank(&t).unwrap());
        let delta = s.perturbation(d, &t);
        let (pushed, _) = push_to_boundary(&rho, &delta, &t).unwrap();
        prop_assert!(pushed.rank(&t).unwrap() < d);
    }

    #[test]
    fn fidelity_is_concave(seed: u64, d in 2usize..=4) {
        let t = tol();
        let mut s = Sampler::new(seed);
        let (k0, k1, k2) = (1 + s.index(d), 1 + s.index(d), 1 + s.index(d));
        let sigma = s.state(d, k0, &t).unwrap();
        let a = s.state(d, k1, &t).unwrap();
        let b = s.state(d, k2, &t).unwrap();
        let mid = fidelity(&a.mix(&b, 0.5), &sigma, &t).unwrap();
        let ends = 0.5 * (fidelity(&a, &sigma, &t).unwrap() + fidelity(&b, &sigma, &t).unwrap());
        prop_assert!(mid >= ends - t.num);
    }

    #[test]
    fn canonical_pair_is_rank_minimal(seed: u64, d in 2usize..=6) {
        let t = tol();
        let delta = Sampler::new(seed).perturbation(d, &t);
        let (lambda, plus, minus) = canonical_state_pair(&delta, &t).unwrap();
        let (p, m) = delta.op().pos_neg_parts().unwrap();
        prop_assert_eq!(plus.rank(&t).unwrap(), p.rank_eps(&t).unwrap());
        prop_assert_eq!(minus.rank(&t).unwrap(), m.rank_eps(&t).unwrap());
        prop_assert!(plus.op().hs_inner(minus.op()).unwrap().abs() <= 1e-12);
        let rebuilt = (plus.op() - minus.op()).scaled(lambda);
        prop_assert!((&rebuilt - delta.op()).hs_norm() <= 1e-9);
    }
}

fn random_system(s: &mut Sampler, d: usize, t: &Tolerances) -> OperatorSystem {
    let n = s.index(d * d);
    let gens: Vec<HermitianOperator> = (0..n).map(|_| s.hermitian(d)).collect();
    OperatorSystem::from_generators(d, &gens, t).unwrap()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn system_and_complement_fill_the_space(seed: u64, d in 2usize..=6) {
        let t = tol();
        let r = random_system(&mut Sampler::new(seed), d, &t);
        let comp = orthocomplement(&r, &t);
        prop_assert_eq!(r.size() + comp.len(), d * d);
        for c in &comp {
            prop_assert!(c.op().trace().abs() <= t.num);
        }
    }

    #[test]
    fn povm_round_trip_keeps_the_span(seed: u64, d in 2usize..=5) {
        let t = tol();
        let r = random_system(&mut Sampler::new(seed), d, &t);
        let povm = povm_from_operator_system(&r, &t).unwrap();
        prop_assert!(operator_system_from_povm(&povm, &t).same_span(&r, &t).unwrap());
    }

    #[test]
    fn distinguishing_is_symmetric_and_monotone(seed: u64, d in 2usize..=4) {
        let t = tol();
        let mut s = Sampler::new(seed);
        let small = random_system(&mut s, d, &t);
        let mut gens: Vec<HermitianOperator> = small.basis().to_vec();
        gens.push(s.hermitian(d));
        let big = OperatorSystem::from_generators(d, &gens, &t).unwrap();
        let (k1, k2) = (1 + s.index(d), 1 + s.index(d));
        let a = s.state(d, k1, &t).unwrap();
        let b = s.state(d, k2, &t).unwrap();
        let ab = distinguishes(&small, &a, &b, &t).unwrap();
        prop_assert_eq!(ab, distinguishes(&small, &b, &a, &t).unwrap());
        if ab {
            prop_assert!(distinguishes(&big, &a, &b, &t).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn boundary_witnesses_rebuild_the_direction(seed: u64, d in 2usize..=5) {
        let t = tol();
        // strictly between 1/d and 1/(d−1): every singular state is outside the inner block
        let threshold = 0.5 * (1.0 / d as f64 + 1.0 / (d as f64 - 1.0));
        let problem = purity_ball_problem(d, threshold, &t).unwrap();
        let delta = Sampler::new(seed).perturbation(d, &t);
        let w = boundary_criterion_witness(&problem, "inner", &delta, &t).unwrap();
        w.verify(&problem, &t).unwrap();
        let rebuilt = (w.state.op() - w.target(&t).unwrap().op()).scaled(-1.0 / w.lambda);
        prop_assert!((&rebuilt - delta.op()).hs_norm() <= 1e-9 * delta.op().hs_norm());
    }

    #[test]
    fn level_sets_of_strictly_convex_functionals_always_cross(seed: u64, d in 2usize..=4, which in 0usize..4, u in 0.05f64..0.95) {
        let t = tol();
        let mut s = Sampler::new(seed);
        let sigma = s.state(d, d, &t).unwrap();
        let f = match which {
            0 => Functional::Purity,
            1 => Functional::Entropy.negated(),
            2 => Functional::HsDistanceSquared(sigma),
            _ if d == 2 => Functional::TraceDistanceSquared(sigma),
            _ => Functional::Purity,
        };
        let ext = f.extremes(d, &t).unwrap();
        let level = ext.min + u * (ext.max - ext.min);
        let delta = s.perturbation(d, &t);
        let w = levelset_ic_check(&f, level, &delta, &t);
        prop_assert!(w.is_ok(), "{}: {:?}", f.name(), w.err());
    }

    #[test]
    fn exact_id_systems_solve_the_problem(seed: u64, d in 2usize..=5) {
        let t = tol();
        let mut s = Sampler::new(seed);
        let r = 1 + s.index(d - 1);
        let sigma = s.state(d, r, &t).unwrap();
        let povm = exact_id_povm(&sigma, &t).unwrap();
        let system = operator_system_from_povm(&povm, &t);
        prop_assert_eq!(system.size(), r * r + 1);
        for c in orthocomplement(&system, &t) {
            let iv = feasible_interval(&sigma, &c, &t).unwrap();
            prop_assert!(iv.lo.abs() <= 1e-8 && iv.hi.abs() <= 1e-8);
        }
        let w = exact_id_witness(&sigma, &t).unwrap();
        prop_assert!(system.project(w.op()).unwrap().hs_norm() <= 1e-9);
    }

    #[test]
    fn blind_directions_leave_fidelity_alone(seed: u64, d in 2usize..=5) {
        let t = tol();
        let mut s = Sampler::new(seed);
        let r = 1 + s.index(d - 1);
        let sigma = s.state(d, r, &t).unwrap();
        let blind = fidelity_blind_subspace(&sigma, &t).unwrap();
        prop_assert_eq!(blind.len(), d * d - r * r - 1);
        let rho = s.state(d, d, &t).unwrap();
        let mut comb = HermitianOperator::zeros(d);
        for b in &blind {
            comb = &comb + &b.op().scaled(s.gaussian());
        }
        let delta = PerturbationOperator::new(comb, &t).unwrap();
        let iv = feasible_interval(&rho, &delta, &t).unwrap();
        let lambda = s.uniform(iv.lo, iv.hi);
        let moved = rho.perturbed(lambda, &delta, &t).unwrap();
        let change = (fidelity(&moved, &sigma, &t).unwrap() - fidelity(&rho, &sigma, &t).unwrap()).abs();
        prop_assert!(change <= 1e-9, "{change:e}");
    }

    #[test]
    fn high_thresholds_always_cross(seed: u64, d in 3usize..=6) {
        let t = tol();
        let mut s = Sampler::new(seed);
        let r = d / 2 + s.index(d - d / 2);
        let delta = s.perturbation(d, &t);
        let (rho, lambda) = rank_crossing_witness(&delta, r, &t).unwrap();
        prop_assert!(rho.rank(&t).unwrap() > r);
        prop_assert!(rho.perturbed(lambda, &delta, &t).unwrap().rank(&t).unwrap() <= r);
    }

    #[test]
    fn lifts_separate_ranks(seed: u64, d in 2usize..=6) {
        let t = tol();
        let mut s = Sampler::new(seed);
        let r = 1 + s.index(d - 1);
        let (k1, k2) = (1 + s.index(r), 1 + s.index(r));
        let a = s.state(d, k1, &t).unwrap();
        let b = s.state(d, k2, &t).unwrap();
        let (rho, sigma, lambda) = rank_indistinguishability_lift(&a, &b, r, &t).unwrap();
        let rebuilt = (rho.op() - sigma.op()).scaled(lambda);
        prop_assert!((&rebuilt - &(a.op() - b.op())).hs_norm() <= t.num);
        prop_assert!(rho.rank(&t).unwrap() <= r && sigma.rank(&t).unwrap() > r);
    }

    #[test]
    fn small_dimensional_decompositions(seed: u64, qutrit: bool) {
        let t = tol();
        let d = if qutrit { 3 } else { 2 };
        let delta = Sampler::new(seed).perturbation(d, &t);
        let dec = if qutrit {
            qutrit_pure_mixed_decomposition(&delta, &t)
        } else {
            qubit_pure_mixed_decomposition(&delta, &t)
        }
        .unwrap();
        prop_assert!(dec.residual <= t.num * delta.op().hs_norm());
        prop_assert_eq!(dec.pure.rank(&t).unwrap(), 1);
        prop_assert!(dec.mixed.rank(&t).unwrap() >= 2);
    }
}

/// Operators in a serialized verdict read back as valid operators of the same kind.
#[test]
fn emitted_operators_read_back() {
    let t = tol();
    for (name, text) in qmember::suites::EXAMPLE_SPECS {
        let spec = ProblemSpec::from_json(text).unwrap();
        let verdict: CatalogVerdict = qmember::catalog::analyze(&spec, 3, 30, &t).unwrap();
        let value = serde_json::to_value(&verdict).unwrap();
        if let Some(w) = value.get("witness") {
            let back: PerturbationOperator = serde_json::from_value(w.clone()).unwrap();
            assert_eq!(&back, verdict.witness.as_ref().unwrap(), "{name}");
        }
        for (e, json) in verdict.crossings().zip(
            value["evidence"]
                .as_array()
                .unwrap()
                .iter()
                .filter(|e| e["type"] == "crossing"),
        ) {
            let state: DensityOperator = serde_json::from_value(json["witness"]["state"].clone()).unwrap();
            assert_eq!(state, e.state, "{name}");
        }
    }
}
