//! Conjugate-bound variational posteriors.
//!
//! Each positive finding outside the exact set has its likelihood
//! `1 - e^{-x}` replaced by the envelope `exp(ξx - f*(ξ))`, which factorises
//! over disorders. Positive findings in the exact set are expanded by
//! inclusion–exclusion, `∏(1 - e^{-x_i}) = Σ_S (-1)^{|S|} e^{-Σ_S x_i}`, so the
//! bound is a signed sum of `2^|E|` fully factorised terms.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::conjugate::f_star_unchecked;
use super::signed::{log_add_exp, SignedSum};
use super::{Evidence, InferenceError, NoisyOrNetwork};
use crate::ConceptId;

/// Largest exact set the inclusion–exclusion expansion accepts.
pub const MAX_EXACT_SET: usize = 12;
const DEFAULT_EXACT_COUNT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalConfig {
    /// Size of the exact set; `None` means `min(|F+|, 8)`.
    pub exact_count: Option<usize>,
    /// Stop once a sweep improves the bound by less than this fraction.
    pub rel_tolerance: f64,
    pub max_sweeps: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    /// Largest negative inclusion–exclusion sum tolerated, relative to its
    /// largest term.
    pub mass_tolerance: f64,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        VariationalConfig {
            exact_count: None,
            rel_tolerance: 1e-8,
            max_sweeps: 200,
            xi_min: 1e-4,
            xi_max: 50.0,
            mass_tolerance: 1e-9,
        }
    }
}

impl VariationalConfig {
    pub fn with_exact_count(mut self, k: usize) -> Self {
        self.exact_count = Some(k);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalState {
    /// ξ per transformed positive finding.
    pub xi: BTreeMap<ConceptId, f64>,
    /// Positive findings treated exactly, in selection order.
    pub exact_set: Vec<ConceptId>,
    /// Natural-log upper bound on the evidence probability.
    pub bound: f64,
    /// Coordinate-descent sweeps performed.
    pub iterations: usize,
    /// Bound before the first sweep and after each accepted sweep.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

struct Row {
    id: ConceptId,
    leak_theta: f64,
    /// (local disorder, θ)
    parents: Vec<(usize, f64)>,
}

/// Evidence and exact set flattened onto the disorders the evidence touches.
struct Problem {
    local: Vec<usize>,
    log_p1: Vec<f64>,
    log_p0: Vec<f64>,
    neg_shift: Vec<f64>,
    neg_const: f64,
    transformed: Vec<Row>,
    exact: Vec<Row>,
    /// Local disorders that parent an exact finding.
    exact_parents: Vec<usize>,
    slot: Vec<Option<usize>>,
    subset_leak: Vec<f64>,
    /// Row-major `[subset][slot]` parent-θ sums.
    subset_delta: Vec<f64>,
    tolerance: f64,
}

impl Problem {
    fn new(
        net: &NoisyOrNetwork,
        ev: &Evidence,
        exact_ids: &[ConceptId],
        tolerance: f64,
    ) -> Result<Self, InferenceError> {
        ev.check_against(net)?;
        let exact_set: BTreeSet<ConceptId> = exact_ids.iter().copied().collect();
        if exact_set.len() != exact_ids.len() {
            return Err(InferenceError::StateMismatch("exact set repeats a finding".into()));
        }
        if let Some(stray) = exact_set.iter().find(|id| !ev.positive().contains(id)) {
            return Err(InferenceError::StateMismatch(format!(
                "exact-set finding {stray} is not a positive finding"
            )));
        }
        if exact_set.len() > MAX_EXACT_SET {
            return Err(InferenceError::TooManyExact {
                count: exact_set.len(),
                max: MAX_EXACT_SET,
            });
        }

        let observed = ev.positive().iter().chain(ev.negative());
        let local: Vec<usize> = observed
            .flat_map(|id| net.parents(net.finding_index(*id).expect("checked")).iter().map(|(d, _)| *d))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut to_local = vec![usize::MAX; net.num_disorders()];
        for (k, d) in local.iter().enumerate() {
            to_local[*d] = k;
        }
        let row = |id: ConceptId| {
            let f = net.finding_index(id).expect("checked");
            Row {
                id,
                leak_theta: net.leak_theta(f),
                parents: net.parents(f).iter().map(|(d, t)| (to_local[*d], *t)).collect(),
            }
        };

        let mut neg_shift = vec![0.0; local.len()];
        let mut neg_const = 0.0;
        for id in ev.negative() {
            let r = row(*id);
            neg_const -= r.leak_theta;
            for (j, t) in r.parents {
                neg_shift[j] -= t;
            }
        }

        let transformed: Vec<Row> = ev
            .positive()
            .iter()
            .filter(|id| !exact_set.contains(id))
            .map(|id| row(*id))
            .collect();
        let exact: Vec<Row> = exact_ids.iter().map(|id| row(*id)).collect();

        let exact_parents: Vec<usize> = exact
            .iter()
            .flat_map(|r| r.parents.iter().map(|(j, _)| *j))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut slot = vec![None; local.len()];
        for (k, j) in exact_parents.iter().enumerate() {
            slot[*j] = Some(k);
        }

        let m = exact.len();
        let width = exact_parents.len();
        let subsets = 1usize << m;
        let mut subset_leak = vec![0.0; subsets];
        let mut subset_delta = vec![0.0; subsets * width];
        for s in 1..subsets {
            let low = s.trailing_zeros() as usize;
            let rest = s & (s - 1);
            subset_leak[s] = subset_leak[rest] + exact[low].leak_theta;
            let (done, todo) = subset_delta.split_at_mut(s * width);
            let target = &mut todo[..width];
            target.copy_from_slice(&done[rest * width..rest * width + width]);
            for (j, t) in &exact[low].parents {
                target[slot[*j].expect("exact parent")] += t;
            }
        }

        let priors = net.priors();
        Ok(Problem {
            log_p1: local.iter().map(|d| priors[*d].ln()).collect(),
            log_p0: local.iter().map(|d| (-priors[*d]).ln_1p()).collect(),
            local,
            neg_shift,
            neg_const,
            transformed,
            exact,
            exact_parents,
            slot,
            subset_leak,
            subset_delta,
            tolerance,
        })
    }

    /// `ln(1 - p_j + p_j e^a)`.
    #[inline]
    fn g(&self, j: usize, a: f64) -> f64 {
        log_add_exp(self.log_p0[j], self.log_p1[j] + a)
    }

    fn subsets(&self) -> usize {
        1 << self.exact.len()
    }

    #[inline]
    fn delta(&self, s: usize, k: usize) -> f64 {
        self.subset_delta[s * self.exact_parents.len() + k]
    }

    #[inline]
    fn positive(s: usize) -> bool {
        s.count_ones().is_multiple_of(2)
    }

    /// Per-disorder exponent shifts and the disorder-free constant for a given ξ.
    fn shifts(&self, xi: &[f64]) -> (Vec<f64>, f64) {
        let mut a = self.neg_shift.clone();
        let mut c = self.neg_const;
        for (r, x) in self.transformed.iter().zip(xi) {
            c += x * r.leak_theta - f_star_unchecked(*x);
            for (j, t) in &r.parents {
                a[*j] += x * t;
            }
        }
        (a, c)
    }

    /// `ln |term(S)|` for every subset of the exact set.
    fn log_terms(&self, a: &[f64], c: f64) -> Vec<f64> {
        let outside: f64 = (0..self.local.len())
            .filter(|j| self.slot[*j].is_none())
            .map(|j| self.g(j, a[j]))
            .sum();
        (0..self.subsets())
            .map(|s| {
                let inside: f64 = self
                    .exact_parents
                    .iter()
                    .enumerate()
                    .map(|(k, j)| self.g(*j, a[*j] - self.delta(s, k)))
                    .sum();
                c - self.subset_leak[s] + outside + inside
            })
            .collect()
    }

    fn log_bound(&self, xi: &[f64]) -> Result<f64, InferenceError> {
        let (a, c) = self.shifts(xi);
        let terms = self.log_terms(&a, c);
        SignedSum::new(terms.iter().enumerate().map(|(s, l)| (Self::positive(s), *l)))
            .log_positive(self.tolerance)
    }

    /// Marginals of the local disorders under the surrogate joint.
    #[allow(clippy::needless_range_loop)]
    fn local_marginals(&self, xi: &[f64]) -> Result<Vec<f64>, InferenceError> {
        let (a, c) = self.shifts(xi);
        let terms = self.log_terms(&a, c);
        let den = SignedSum::new(terms.iter().enumerate().map(|(s, l)| (Self::positive(s), *l)))
            .log_positive(self.tolerance)?;
        let mut out = Vec::with_capacity(self.local.len());
        for j in 0..self.local.len() {
            let r = match self.slot[j] {
                None => (self.log_p1[j] + a[j] - self.g(j, a[j])).exp(),
                Some(k) => {
                    let num = SignedSum::new(terms.iter().enumerate().map(|(s, l)| {
                        let shifted = a[j] - self.delta(s, k);
                        (Self::positive(s), l - self.g(j, shifted) + self.log_p1[j] + shifted)
                    }))
                    .log_clamped(self.tolerance)?;
                    (num - den).exp()
                }
            };
            out.push(r.clamp(0.0, 1.0));
        }
        Ok(out)
    }

    /// The bound as a function of one transformed finding's ξ, others fixed.
    fn coordinate(&self, xi: &[f64], t: usize) -> Coordinate<'_> {
        let (a, c) = self.shifts(xi);
        let row = &self.transformed[t];
        let x = xi[t];
        let c_rest = c - (x * row.leak_theta - f_star_unchecked(x));
        let mut is_parent = vec![false; self.local.len()];
        for (j, _) in &row.parents {
            is_parent[*j] = true;
        }
        let outside: f64 = (0..self.local.len())
            .filter(|j| !is_parent[*j] && self.slot[*j].is_none())
            .map(|j| self.g(j, a[j]))
            .sum();
        let subsets = self.subsets();
        let width = row.parents.len();
        let mut fixed = Vec::with_capacity(subsets);
        let mut args = Vec::with_capacity(subsets * width);
        for s in 0..subsets {
            let mut f = c_rest - self.subset_leak[s] + outside;
            for (k, j) in self.exact_parents.iter().enumerate() {
                if !is_parent[*j] {
                    f += self.g(*j, a[*j] - self.delta(s, k));
                }
            }
            fixed.push(f);
            for (j, th) in &row.parents {
                let d = self.slot[*j].map_or(0.0, |k| self.delta(s, k));
                args.push(a[*j] - x * th - d);
            }
        }
        Coordinate {
            problem: self,
            leak_theta: row.leak_theta,
            parents: row.parents.clone(),
            fixed,
            args,
        }
    }
}

struct Coordinate<'p> {
    problem: &'p Problem,
    leak_theta: f64,
    parents: Vec<(usize, f64)>,
    fixed: Vec<f64>,
    args: Vec<f64>,
}

impl Coordinate<'_> {
    fn eval(&self, xi: f64) -> f64 {
        let width = self.parents.len();
        let p = self.problem;
        let sum = SignedSum::new((0..self.fixed.len()).map(|s| {
            let mut l = self.fixed[s];
            for (k, (j, th)) in self.parents.iter().enumerate() {
                l += p.g(*j, self.args[s * width + k] + xi * th);
            }
            (Problem::positive(s), l)
        }));
        match sum.log_positive(p.tolerance) {
            Ok(v) => xi * self.leak_theta - f_star_unchecked(xi) + v,
            Err(_) => f64::NAN,
        }
    }
}

/// Golden-section search of `f(e^u)` over `u ∈ [ln lo, ln hi]`; non-finite
/// values count as +∞.
fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let h = |u: f64| {
        let v = f(u.exp());
        if v.is_finite() { v } else { f64::INFINITY }
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (h(c), h(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = h(d);
        }
    }
    if fc < fd {
        (c.exp(), fc)
    } else {
        (d.exp(), fd)
    }
}

fn run_descent(
    problem: &Problem,
    mut xi: Vec<f64>,
    config: &VariationalConfig,
) -> Result<(Vec<f64>, f64, usize, Vec<f64>), InferenceError> {
    let blame = |t: usize| InferenceError::NonFiniteBound(problem.transformed[t].id);
    let first_id = || problem.transformed.first().map(|r| r.id).unwrap_or(ConceptId(0));
    let mut bound = problem
        .log_bound(&xi)
        .map_err(|e| match e {
            InferenceError::NegativeMass { .. } if !problem.transformed.is_empty() => {
                InferenceError::NonFiniteBound(first_id())
            }
            other => other,
        })?;
    if !bound.is_finite() {
        return Err(InferenceError::NonFiniteBound(first_id()));
    }
    let mut trace = vec![bound];
    let mut iterations = 0;
    if problem.transformed.is_empty() {
        return Ok((xi, bound, iterations, trace));
    }

    for sweep in 1..=config.max_sweeps {
        let before = xi.clone();
        for t in 0..xi.len() {
            let coord = problem.coordinate(&xi, t);
            let current = coord.eval(xi[t]);
            if !current.is_finite() {
                return Err(blame(t));
            }
            let (cand, value) = golden_min(|x| coord.eval(x), config.xi_min, config.xi_max);
            if value < current {
                xi[t] = cand;
            }
        }
        iterations = sweep;
        let next = problem.log_bound(&xi).map_err(|_| blame(0))?;
        if !next.is_finite() {
            return Err(blame(0));
        }
        if next > bound {
            // coordinate moves were below rounding noise of the full evaluation
            xi = before;
            break;
        }
        let change = (bound - next) / bound.abs().max(f64::MIN_POSITIVE);
        bound = next;
        trace.push(bound);
        if change < config.rel_tolerance {
            break;
        }
    }
    Ok((xi, bound, iterations, trace))
}

fn optimize(
    net: &NoisyOrNetwork,
    ev: &Evidence,
    exact_set: &[ConceptId],
    config: &VariationalConfig,
    init: Option<&BTreeMap<ConceptId, f64>>,
) -> Result<VariationalState, InferenceError> {
    let problem = Problem::new(net, ev, exact_set, config.mass_tolerance)?;
    let xi0: Vec<f64> = problem
        .transformed
        .iter()
        .map(|r| {
            init.and_then(|m| m.get(&r.id).copied())
                .unwrap_or(1.0)
                .clamp(config.xi_min, config.xi_max)
        })
        .collect();
    let (xi, bound, iterations, trace) = run_descent(&problem, xi0, config)?;
    Ok(VariationalState {
        xi: problem.transformed.iter().map(|r| r.id).zip(xi).collect(),
        exact_set: exact_set.to_vec(),
        bound,
        iterations,
        trace,
    })
}

/// Minimises the bound over ξ by coordinate descent, starting from ξ = 1.
pub fn optimize_xi(
    net: &NoisyOrNetwork,
    ev: &Evidence,
    exact_set: &[ConceptId],
) -> Result<VariationalState, InferenceError> {
    optimize(net, ev, exact_set, &VariationalConfig::default(), None)
}

/// As [`optimize_xi`], with explicit settings and optional starting values
/// (findings absent from `init` start at ξ = 1).
pub fn optimize_xi_with(
    net: &NoisyOrNetwork,
    ev: &Evidence,
    exact_set: &[ConceptId],
    config: &VariationalConfig,
    init: Option<&BTreeMap<ConceptId, f64>>,
) -> Result<VariationalState, InferenceError> {
    optimize(net, ev, exact_set, config, init)
}

/// Log bound for a given state. The state's ξ must cover exactly the positive
/// findings outside its exact set.
pub fn transformed_bound(
    net: &NoisyOrNetwork,
    ev: &Evidence,
    state: &VariationalState,
) -> Result<f64, InferenceError> {
    let problem = Problem::new(net, ev, &state.exact_set, VariationalConfig::default().mass_tolerance)?;
    if state.xi.len() != problem.transformed.len() {
        return Err(InferenceError::StateMismatch(format!(
            "{} ξ values for {} transformed findings",
            state.xi.len(),
            problem.transformed.len()
        )));
    }
    let mut xi = Vec::with_capacity(problem.transformed.len());
    for r in &problem.transformed {
        let x = *state
            .xi
            .get(&r.id)
            .ok_or_else(|| InferenceError::StateMismatch(format!("no ξ for finding {}", r.id)))?;
        if x.is_nan() || x <= 0.0 {
            return Err(InferenceError::Domain(x));
        }
        xi.push(x);
    }
    problem.log_bound(&xi)
}

/// Greedy exact-set growth: each round promotes the positive finding whose
/// promotion gives the lowest optimised bound. Candidates warm-start from the
/// current ξ, so the bound never rises from one round to the next.
fn greedy(
    net: &NoisyOrNetwork,
    ev: &Evidence,
    k: usize,
    config: &VariationalConfig,
) -> Result<VariationalState, InferenceError> {
    if k > MAX_EXACT_SET {
        return Err(InferenceError::TooManyExact {
            count: k,
            max: MAX_EXACT_SET,
        });
    }
    let positives: Vec<ConceptId> = ev.positive().iter().copied().collect();
    if k >= positives.len() {
        return optimize(net, ev, &positives, config, None);
    }
    let mut state = optimize(net, ev, &[], config, None)?;
    for _ in 0..k {
        let mut best: Option<VariationalState> = None;
        for c in positives.iter().filter(|c| !state.exact_set.contains(c)) {
            let mut set = state.exact_set.clone();
            set.push(*c);
            let cand = optimize(net, ev, &set, config, Some(&state.xi))?;
            if best.as_ref().is_none_or(|b| cand.bound < b.bound) {
                best = Some(cand);
            }
        }
        state = best.expect("a candidate remains while k < |F+|");
    }
    Ok(state)
}

/// Exact set of size `min(k, |F+|)` chosen greedily.
pub fn select_exact_set(
    net: &NoisyOrNetwork,
    ev: &Evidence,
    k: usize,
) -> Result<Vec<ConceptId>, InferenceError> {
    Ok(greedy(net, ev, k, &VariationalConfig::default())?.exact_set)
}

/// Disorder marginals (aligned with [`NoisyOrNetwork::disorder_ids`]) under
/// the optimised surrogate, with the state that produced them.
pub fn variational_posteriors(
    net: &NoisyOrNetwork,
    ev: &Evidence,
    config: &VariationalConfig,
) -> Result<(Vec<f64>, VariationalState), InferenceError> {
    ev.check_against(net)?;
    let k = config
        .exact_count
        .unwrap_or_else(|| ev.positive().len().min(DEFAULT_EXACT_COUNT));
    let state = greedy(net, ev, k, config)?;
    let problem = Problem::new(net, ev, &state.exact_set, config.mass_tolerance)?;
    let xi: Vec<f64> = problem.transformed.iter().map(|r| state.xi[&r.id]).collect();
    let local = problem.local_marginals(&xi)?;
    let mut marginals = net.priors().to_vec();
    for (j, d) in problem.local.iter().enumerate() {
        marginals[*d] = local[j];
    }
    Ok((marginals, state))
}
