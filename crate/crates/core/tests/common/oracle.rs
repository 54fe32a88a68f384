//! Brute-force reference computations over explicit model parameters.
//! Everything here works in plain probability space over all 2^N disorder
//! states and shares no code with the engine.

#![allow(dead_code)]

use dxengine_core::inference::{Evidence, NoisyOrNetwork};
use dxengine_core::ConceptId;
use std::ops::RangeInclusive;

use rand::Rng;

#[derive(Debug, Clone)]
pub struct Model {
    pub priors: Vec<f64>,
    pub leaks: Vec<f64>,
    /// `weights[finding][disorder]`; zero means no link.
    pub weights: Vec<Vec<f64>>,
}

pub fn disorder_id(j: usize) -> ConceptId {
    ConceptId(j as u64 + 1)
}

pub fn finding_id(i: usize) -> ConceptId {
    ConceptId(i as u64 + 1001)
}

impl Model {
    /// Sizes drawn uniformly from the given ranges.
    pub fn random(
        rng: &mut impl Rng,
        disorders: RangeInclusive<usize>,
        findings: RangeInclusive<usize>,
        link_p: f64,
    ) -> Model {
        let disorders = rng.gen_range(disorders);
        let findings = rng.gen_range(findings);
        let priors = (0..disorders).map(|_| rng.gen_range(0.02..0.3)).collect();
        let leaks = (0..findings).map(|_| rng.gen_range(0.001..0.05)).collect();
        let weights = (0..findings)
            .map(|_| {
                let mut row: Vec<f64> = (0..disorders)
                    .map(|_| if rng.gen_bool(link_p) { rng.gen_range(0.05..0.95) } else { 0.0 })
                    .collect();
                if row.iter().all(|w| *w == 0.0) {
                    row[rng.gen_range(0..disorders)] = rng.gen_range(0.05..0.95);
                }
                row
            })
            .collect();
        Model { priors, leaks, weights }
    }

    pub fn network(&self) -> NoisyOrNetwork {
        NoisyOrNetwork::from_parts(
            self.priors.iter().enumerate().map(|(j, p)| (disorder_id(j), *p)),
            self.leaks.iter().enumerate().map(|(i, l)| (finding_id(i), *l)),
            self.weights.iter().enumerate().flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, w)| **w > 0.0)
                    .map(move |(j, w)| (disorder_id(j), finding_id(i), *w))
            }),
        )
        .unwrap()
    }

    /// P(finding i absent | state).
    pub fn p_off(&self, i: usize, state: u64) -> f64 {
        let mut p = 1.0 - self.leaks[i];
        for (j, w) in self.weights[i].iter().enumerate() {
            if state >> j & 1 == 1 {
                p *= 1.0 - w;
            }
        }
        p
    }

    fn prior_of(&self, state: u64) -> f64 {
        self.priors
            .iter()
            .enumerate()
            .map(|(j, p)| if state >> j & 1 == 1 { *p } else { 1.0 - p })
            .product()
    }

    /// `(ln Σ_state w(state), marginals)` for an unnormalised state weight.
    pub fn enumerate(&self, weight: impl Fn(u64) -> f64) -> (f64, Vec<f64>) {
        let n = self.priors.len();
        let mut z = 0.0;
        let mut m = vec![0.0; n];
        for state in 0..1u64 << n {
            let w = self.prior_of(state) * weight(state);
            z += w;
            for (j, mj) in m.iter_mut().enumerate() {
                if state >> j & 1 == 1 {
                    *mj += w;
                }
            }
        }
        (z.ln(), m.into_iter().map(|x| x / z).collect())
    }

    pub fn exact(&self, pos: &[usize], neg: &[usize]) -> (f64, Vec<f64>) {
        self.enumerate(|s| {
            pos.iter().map(|i| 1.0 - self.p_off(*i, s)).product::<f64>()
                * neg.iter().map(|i| self.p_off(*i, s)).product::<f64>()
        })
    }

    /// The conjugate-envelope surrogate: transformed positives contribute
    /// `exp(ξ x - f*(ξ))` with `x = -ln P(absent | state)`.
    pub fn surrogate(&self, exact_pos: &[usize], transformed: &[(usize, f64)], neg: &[usize]) -> (f64, Vec<f64>) {
        let fstar = |xi: f64| (xi + 1.0) * (xi + 1.0).ln() - xi * xi.ln();
        self.enumerate(|s| {
            let mut w: f64 = exact_pos.iter().map(|i| 1.0 - self.p_off(*i, s)).product::<f64>()
                * neg.iter().map(|i| self.p_off(*i, s)).product::<f64>();
            for (i, xi) in transformed {
                let x = -self.p_off(*i, s).ln();
                w *= (xi * x - fstar(*xi)).exp();
            }
            w
        })
    }

    /// Forward sample; each finding observed with probability `observe`;
    /// at most `max_pos` positives kept. Returns finding indices.
    pub fn sample(&self, rng: &mut impl Rng, observe: f64, max_pos: usize) -> (Vec<usize>, Vec<usize>) {
        let mut state = 0u64;
        for (j, p) in self.priors.iter().enumerate() {
            if rng.gen_bool(*p) {
                state |= 1 << j;
            }
        }
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for i in 0..self.leaks.len() {
            let on = rng.gen_bool(1.0 - self.p_off(i, state));
            if rng.gen_bool(observe) {
                if on { pos.push(i) } else { neg.push(i) }
            }
        }
        pos.truncate(max_pos);
        (pos, neg)
    }
}

pub fn evidence(pos: &[usize], neg: &[usize]) -> Evidence {
    Evidence::new(pos.iter().map(|i| finding_id(*i)), neg.iter().map(|i| finding_id(*i))).unwrap()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut r = vec![0.0; v.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut e = k;
        while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[k]] {
            e += 1;
        }
        let avg = (k + e) as f64 / 2.0 + 1.0;
        for t in k..=e {
            r[idx[t]] = avg;
        }
        k = e + 1;
    }
    r
}

/// Spearman correlation with average ranks for ties. Constant inputs score 1
/// when both rankings coincide and 0 otherwise.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let mean = |r: &[f64]| r.iter().sum::<f64>() / r.len() as f64;
    let (ma, mb) = (mean(&ra), mean(&rb));
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return if ra == rb { 1.0 } else { 0.0 };
    }
    cov / (va * vb).sqrt()
}
