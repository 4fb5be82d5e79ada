//! Membership problems and the machinery for deciding whether they need an informationally
//! complete measurement.
//!
//! A problem partitions the state space into labelled blocks. It can be solved by a measurement
//! with operator system `ℛ` only if no direction `Δ ∈ ℛ^⊥` carries some state across a block
//! boundary. Finding such a crossing for every `Δ` therefore certifies that `ℛ^⊥ = {0}` is
//! necessary. Sampling can only support that, so empirical and analytic verdicts are kept apart.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::opspace::{gell_mann_basis, Tolerances};
use crate::states::sampling::derive_seed;
use crate::states::{
    bloch_to_state, feasible_interval, push_to_boundary, state_to_bloch, BlochVector,
    DensityOperator, Functional, PerturbationOperator, Sampler,
};

pub type Classifier = Arc<dyn Fn(&DensityOperator) -> usize + Send + Sync>;

/// Points per side of the dyadic λ grid.
pub const GRID_POINTS_PER_SIDE: usize = 32;

/// Partition of the `d`-level state space into labelled blocks.
#[derive(Clone)]
pub struct MembershipProblem {
    name: String,
    dim: usize,
    labels: Vec<String>,
    exemplars: Vec<DensityOperator>,
    classify: Classifier,
}

impl fmt::Debug for MembershipProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MembershipProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("labels", &self.labels)
            .finish_non_exhaustive()
    }
}

impl MembershipProblem {
    /// `exemplars[j]` must classify into block `j`; this is what witnesses that every block is
    /// nonempty.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        labels: Vec<String>,
        exemplars: Vec<DensityOperator>,
        classify: Classifier,
    ) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a membership problem needs at least 2 blocks, got {}",
                labels.len()
            )));
        }
        if exemplars.len() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} exemplars for {} blocks",
                exemplars.len(),
                labels.len()
            )));
        }
        for (j, e) in exemplars.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch(dim, e.dim()));
            }
            let got = classify(e);
            if got != j {
                return Err(Error::InvalidParameter(format!(
                    "exemplar for block {:?} classifies as block {}",
                    labels[j], got
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            dim,
            labels,
            exemplars,
            classify,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn exemplars(&self) -> &[DensityOperator] {
        &self.exemplars
    }

    pub fn classify(&self, rho: &DensityOperator) -> usize {
        (self.classify)(rho)
    }

    pub fn block_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown block {label:?}")))
    }
}

/// `ϱ` in one block and `ϱ + λΔ` a state in another.
#[derive(Clone, Debug, Serialize)]
pub struct CrossingWitness {
    pub delta: PerturbationOperator,
    pub state: DensityOperator,
    pub lambda: f64,
    pub from_block: String,
    pub to_block: String,
}

impl CrossingWitness {
    /// `ϱ + λΔ`, validated as a state.
    pub fn target(&self, tol: &Tolerances) -> Result<DensityOperator> {
        self.state.perturbed(self.lambda, &self.delta, tol)
    }

    /// Re-runs the classification and the state predicate.
    pub fn verify(&self, problem: &MembershipProblem, tol: &Tolerances) -> Result<()> {
        let from = &problem.labels[problem.classify(&self.state)];
        if *from != self.from_block {
            return Err(Error::Verification(format!(
                "witness state classifies as {from:?}, expected {:?}",
                self.from_block
            )));
        }
        let target = self
            .target(tol)
            .map_err(|e| Error::Verification(format!("perturbed operator is not a state: {e}")))?;
        let to = &problem.labels[problem.classify(&target)];
        if *to != self.to_block || self.to_block == self.from_block {
            return Err(Error::Verification(format!(
                "perturbed state classifies as {to:?}, expected {:?} != {:?}",
                self.to_block, self.from_block
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictStatus {
    IcRequiredAnalytic,
    SolvableAnalytic,
    IcRequiredEmpirical,
    CandidateDirectionFound,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolvabilityVerdict {
    pub status: VerdictStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<PerturbationOperator>,
    pub witnesses: Vec<CrossingWitness>,
    pub directions_tried: usize,
    pub budget: usize,
    pub seed: u64,
}

impl SolvabilityVerdict {
    pub fn ic_required_analytic(witnesses: Vec<CrossingWitness>) -> Self {
        Self {
            status: VerdictStatus::IcRequiredAnalytic,
            direction: None,
            directions_tried: witnesses.len(),
            witnesses,
            budget: 0,
            seed: 0,
        }
    }

    pub fn solvable_analytic(direction: PerturbationOperator) -> Self {
        Self {
            status: VerdictStatus::SolvableAnalytic,
            direction: Some(direction),
            witnesses: Vec::new(),
            directions_tried: 0,
            budget: 0,
            seed: 0,
        }
    }

    pub fn requires_ic(&self) -> bool {
        matches!(
            self.status,
            VerdictStatus::IcRequiredAnalytic | VerdictStatus::IcRequiredEmpirical
        )
    }
}

/// Dyadic grid `±s·2^{-k}`, `k < 32`, where `s` is the smallest power of two covering the
/// interval, clipped to `[lo, hi]`, plus both endpoints; ordered by `|λ|`, positive first.
fn lambda_grid(lo: f64, hi: f64) -> Vec<f64> {
    let extent = hi.max(-lo);
    let mut out = Vec::with_capacity(2 * GRID_POINTS_PER_SIDE + 2);
    if extent <= 0.0 {
        return out;
    }
    let top = 2f64.powi(extent.log2().ceil() as i32);
    for k in (0..GRID_POINTS_PER_SIDE).rev() {
        let x = top * 2f64.powi(-(k as i32));
        if x < hi {
            out.push(x);
        }
        if -x > lo {
            out.push(-x);
        }
    }
    out.push(hi);
    out.push(lo);
    out.retain(|x| *x != 0.0);
    out.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(b.total_cmp(a)));
    out.dedup();
    out
}

fn base_state(problem: &MembershipProblem, trial: usize, seed: u64, tol: &Tolerances) -> Result<DensityOperator> {
    let n_ex = problem.exemplars.len();
    if trial < n_ex {
        return Ok(problem.exemplars[trial].clone());
    }
    let d = problem.dim;
    let mut s = Sampler::new(derive_seed(seed, trial as u64));
    Ok(match trial % 4 {
        0 => s.state(d, d, tol)?,
        1 => {
            let r = 1 + s.index(d);
            s.state(d, r, tol)?
        }
        2 => s.pure(d),
        _ => {
            let a = &problem.exemplars[s.index(n_ex)];
            let b = &problem.exemplars[s.index(n_ex)];
            a.mix(b, s.uniform(0.0, 1.0))
        }
    })
}

/// Looks for a state that `Δ` carries across a block boundary.
///
/// Tries `budget` base states (the exemplars first, then seeded random states and exemplar
/// mixtures) and, for each, the λ grid over its feasible interval. `None` is not a proof that
/// no crossing exists.
pub fn crossing_search(
    problem: &MembershipProblem,
    delta: &PerturbationOperator,
    budget: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Option<CrossingWitness>> {
    if delta.dim() != problem.dim {
        return Err(Error::DimensionMismatch(problem.dim, delta.dim()));
    }
    for trial in 0..budget {
        let rho = base_state(problem, trial, seed, tol)?;
        let from = problem.classify(&rho);
        let iv = feasible_interval(&rho, delta, tol)?;
        for lambda in lambda_grid(iv.lo, iv.hi) {
            let Ok(target) = rho.perturbed(lambda, delta, tol) else {
                continue;
            };
            let to = problem.classify(&target);
            if to != from {
                let w = CrossingWitness {
                    delta: delta.clone(),
                    state: rho,
                    lambda,
                    from_block: problem.labels[from].clone(),
                    to_block: problem.labels[to].clone(),
                };
                w.verify(problem, tol)?;
                return Ok(Some(w));
            }
        }
    }
    Ok(None)
}

/// Sampled test of the coverage condition: every tried direction must produce a crossing.
///
/// Directions are the generalized Gell-Mann basis first, then seeded random perturbations,
/// `n_directions` in total. The first direction (in that order) without a crossing is reported
/// as a candidate for a non-IC solution.
pub fn requires_ic_falsifier(
    problem: &MembershipProblem,
    n_directions: usize,
    budget: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<SolvabilityVerdict> {
    let d = problem.dim;
    let structured = gell_mann_basis(d);
    let directions: Vec<PerturbationOperator> = (0..n_directions)
        .map(|k| match structured.get(k) {
            Some(g) => PerturbationOperator::new(g.clone(), tol)
                .expect("Gell-Mann elements are traceless and nonzero"),
            None => Sampler::new(derive_seed(seed, (1u64 << 32) + k as u64)).perturbation(d, tol),
        })
        .collect();
    let results: Vec<Result<Option<CrossingWitness>>> = directions
        .par_iter()
        .enumerate()
        .map(|(k, delta)| crossing_search(problem, delta, budget, derive_seed(seed, k as u64), tol))
        .collect();

    let mut verdict = SolvabilityVerdict {
        status: VerdictStatus::Inconclusive,
        direction: None,
        witnesses: Vec::new(),
        directions_tried: n_directions,
        budget,
        seed,
    };
    if n_directions == 0 {
        return Ok(verdict);
    }
    for (delta, r) in directions.into_iter().zip(results) {
        match r? {
            Some(w) => verdict.witnesses.push(w),
            None => {
                verdict.status = VerdictStatus::CandidateDirectionFound;
                verdict.direction = Some(delta);
                verdict.witnesses.clear();
                return Ok(verdict);
            }
        }
    }
    verdict.status = VerdictStatus::IcRequiredEmpirical;
    Ok(verdict)
}

/// Crossing out of a block of full-rank states: push its exemplar along `Δ` to the boundary of
/// the state space, which must lie in another block.
pub fn boundary_criterion_witness(
    problem: &MembershipProblem,
    interior_block: &str,
    delta: &PerturbationOperator,
    tol: &Tolerances,
) -> Result<CrossingWitness> {
    let j = problem.block_index(interior_block)?;
    let rho = &problem.exemplars[j];
    let (pushed, lambda_min) = push_to_boundary(rho, delta, tol)?;
    let to = problem.classify(&pushed);
    if to == j {
        return Err(Error::Verification(format!(
            "boundary state stays in block {interior_block:?}; the block is not interior-only"
        )));
    }
    let w = CrossingWitness {
        delta: delta.clone(),
        state: rho.clone(),
        lambda: -1.0 / lambda_min,
        from_block: interior_block.to_string(),
        to_block: problem.labels[to].clone(),
    };
    w.verify(problem, tol)?;
    Ok(w)
}

const BISECTION_STEPS: usize = 200;

/// Point of the segment between `a` and `b` where `f` crosses `ε`, within `f_tol`.
///
/// One endpoint must be full rank; the bisection parameter starts there, so every returned
/// state other than the far endpoint is full rank. Of the final bracket the side with
/// `f ≤ ε` is returned.
pub fn find_full_rank_level_state(
    f: &Functional,
    level: f64,
    endpoints: (&DensityOperator, &DensityOperator),
    f_tol: f64,
    tol: &Tolerances,
) -> Result<DensityOperator> {
    let (a, b) = endpoints;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let (base, far) = if a.is_full_rank(tol)? {
        (a, b)
    } else if b.is_full_rank(tol)? {
        (b, a)
    } else {
        return Err(Error::NotFullRank {
            rank: a.rank(tol)?.max(b.rank(tol)?),
            dim: a.dim(),
        });
    };
    let at = |t: f64| far.mix(base, t);
    let g = |t: f64| -> Result<f64> { Ok(f.eval(&at(t), tol)? - level) };

    let g0 = g(0.0)?;
    if g0.abs() <= f_tol {
        return Ok(base.clone());
    }
    let g1 = g(1.0)?;
    if g0.signum() == g1.signum() && g0 != 0.0 && g1 != 0.0 {
        return Err(Error::Bisection(format!(
            "level {level} is not bracketed: f - level is {g0:e} and {g1:e} at the endpoints"
        )));
    }
    // `low_t` always has f ≤ level, `high_t` has f > level.
    let (mut low_t, mut high_t) = if g0 <= 0.0 { (0.0, 1.0) } else { (1.0, 0.0) };
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (low_t + high_t);
        if mid == low_t || mid == high_t {
            break;
        }
        if g(mid)? <= 0.0 {
            low_t = mid;
        } else {
            high_t = mid;
        }
    }
    let (t, gt) = [low_t, high_t]
        .into_iter()
        .map(|t| (t, g(t)))
        .find(|(_, v)| matches!(v, Ok(v) if *v <= 0.0 && v.abs() <= f_tol))
        .unwrap_or((low_t, g(low_t)));
    let gt = gt?;
    if gt.abs() > f_tol {
        return Err(Error::Bisection(format!(
            "level {level} not reached within {f_tol:e} (residual {gt:e})"
        )));
    }
    let rho = at(t);
    if !rho.is_full_rank(tol)? {
        return Err(Error::NotFullRank {
            rank: rho.rank(tol)?,
            dim: rho.dim(),
        });
    }
    Ok(rho)
}

/// Two-block problem `{f ≤ ε}` / `{f > ε}`; the sublevel block owns the level set, with slack
/// `η_num`.
pub fn levelset_problem(
    f: &Functional,
    level: f64,
    d: usize,
    tol: &Tolerances,
) -> Result<MembershipProblem> {
    let ext = f.extremes(d, tol)?;
    if !(ext.min + tol.num < level && level < ext.max - tol.num) {
        return Err(Error::InvalidParameter(format!(
            "level {level} must lie strictly between min {} and max {} of {}",
            ext.min,
            ext.max,
            f.name()
        )));
    }
    let func = f.clone();
    let (slack, tol_c) = (tol.num, *tol);
    let classify: Classifier = Arc::new(move |rho: &DensityOperator| {
        match func.eval(rho, &tol_c) {
            Ok(v) if v <= level + slack => 0,
            _ => 1,
        }
    });
    MembershipProblem::new(
        format!("levelset:{}", f.name()),
        d,
        vec!["sublevel".into(), "superlevel".into()],
        vec![ext.argmin, ext.argmax],
        classify,
    )
}

/// Crossing for `Δ` in the level-set problem of a strictly mid-point convex `f`.
///
/// Finds a full-rank `ϱ̄` on the level set, then one of `ϱ̄ ± λΔ` has to land strictly above
/// it. If neither does, `f` is not strictly convex along `Δ` and a
/// [`Error::StrictConvexityViolation`] is returned.
pub fn levelset_ic_check(
    f: &Functional,
    level: f64,
    delta: &PerturbationOperator,
    tol: &Tolerances,
) -> Result<CrossingWitness> {
    let d = delta.dim();
    let problem = levelset_problem(f, level, d, tol)?;
    let ext = f.extremes(d, tol)?;
    let mixed = DensityOperator::maximally_mixed(d);
    let toward = if f.eval(&mixed, tol)? <= level {
        &ext.argmax
    } else {
        &ext.argmin
    };
    let bar = find_full_rank_level_state(f, level, (&mixed, toward), tol.num, tol)?;
    let iv = feasible_interval(&bar, delta, tol)?;
    let lambda = 0.5 * iv.hi.min(-iv.lo);
    let center = f.eval(&bar, tol)?;
    let plus_state = bar.perturbed(lambda, delta, tol)?;
    let minus_state = bar.perturbed(-lambda, delta, tol)?;
    let plus = f.eval(&plus_state, tol)?;
    let minus = f.eval(&minus_state, tol)?;
    let sign = match (problem.classify(&plus_state), problem.classify(&minus_state)) {
        (1, 1) if plus >= minus => 1.0,
        (1, 1) => -1.0,
        (1, _) => 1.0,
        (_, 1) => -1.0,
        _ => {
            return Err(Error::StrictConvexityViolation {
                level,
                center,
                plus,
                minus,
            })
        }
    };
    let w = CrossingWitness {
        delta: delta.clone(),
        state: bar,
        lambda: sign * lambda,
        from_block: problem.labels[0].clone(),
        to_block: problem.labels[1].clone(),
    };
    w.verify(&problem, tol)?;
    Ok(w)
}

/// Qubit problem `{r·n ≤ 0}` / `{r·n > 0}` for a unit axis `n`.
pub fn hemisphere_problem(axis: [f64; 3], tol: &Tolerances) -> Result<MembershipProblem> {
    let n = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n.is_finite() && n > tol.num) {
        return Err(Error::InvalidParameter("hemisphere axis must be nonzero".into()));
    }
    let axis = axis.map(|x| x / n);
    let (slack, tol_c) = (tol.num, *tol);
    let classify: Classifier = Arc::new(move |rho: &DensityOperator| {
        let r = state_to_bloch(rho, &tol_c).map(|b| b.r).unwrap_or([0.0; 3]);
        let proj: f64 = (0..3).map(|i| r[i] * axis[i]).sum();
        usize::from(proj > slack)
    });
    let half = |s: f64| bloch_to_state(&BlochVector::new(axis.map(|x| s * 0.5 * x), &tol_c).expect("inside ball"));
    MembershipProblem::new(
        "hemisphere",
        2,
        vec!["lower".into(), "upper".into()],
        vec![half(-1.0), half(1.0)],
        classify,
    )
}

/// Block `{tr ϱ² < threshold}` against the rest. For `threshold ≤ 1/(d−1)` the first block
/// consists of full-rank states only.
pub fn purity_ball_problem(d: usize, threshold: f64, tol: &Tolerances) -> Result<MembershipProblem> {
    if !(1.0 / (d as f64) < threshold && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "purity threshold {threshold} outside (1/{d}, 1]"
        )));
    }
    let classify: Classifier = Arc::new(move |rho: &DensityOperator| {
        usize::from(crate::states::purity(rho) >= threshold)
    });
    let _ = tol;
    MembershipProblem::new(
        "purity_ball",
        d,
        vec!["inner".into(), "outer".into()],
        vec![DensityOperator::maximally_mixed(d), DensityOperator::basis_state(d, 0)],
        classify,
    )
}

/// Necessary condition for a qubit problem to be solvable by measuring the complement of `a`:
/// every sampled member of `block` stays in it along the whole chord through it parallel to `a`.
pub fn qubit_parallel_line_check(
    problem: &MembershipProblem,
    block: usize,
    a: [f64; 3],
    n_samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<bool> {
    if problem.dim != 2 {
        return Err(Error::DimensionMismatch(problem.dim, 2));
    }
    if block >= problem.labels.len() {
        return Err(Error::InvalidParameter(format!("no block with index {block}")));
    }
    let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n.is_finite() && n > tol.num) {
        return Err(Error::InvalidParameter("direction must be nonzero".into()));
    }
    let u = a.map(|x| x / n);
    let mut s = Sampler::new(seed);
    let mut found = 0;
    let max_draws = 1000 * n_samples.max(1);
    for _ in 0..max_draws {
        if found == n_samples {
            break;
        }
        let r = s.bloch_in_ball();
        if problem.classify(&bloch_to_state(&r)) != block {
            continue;
        }
        found += 1;
        // chord {r + s·u : |r + s·u| ≤ 1}
        let b: f64 = (0..3).map(|i| r.r[i] * u[i]).sum();
        let c = r.norm().powi(2) - 1.0;
        let disc = (b * b - c).max(0.0).sqrt();
        let (s_lo, s_hi) = (-b - disc, -b + disc);
        for k in 0..=32 {
            let t = s_lo + (s_hi - s_lo) * k as f64 / 32.0;
            let p = BlochVector::new([r.r[0] + t * u[0], r.r[1] + t * u[1], r.r[2] + t * u[2]], tol)?;
            if problem.classify(&bloch_to_state(&p)) != block {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

impl Serialize for MembershipProblem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            name: &'a str,
            d: usize,
            blocks: &'a [String],
        }
        Out {
            name: &self.name,
            d: self.dim,
            blocks: &self.labels,
        }
        .serialize(s)
    }
}
