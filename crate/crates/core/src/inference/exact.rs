use std::collections::BTreeSet;

use super::signed::log_sum_exp;
use super::{Evidence, InferenceError, NoisyOrNetwork, Posterior};

/// Largest number of evidence-connected disorders [`exact_posterior`] enumerates.
pub const MAX_EXACT_DISORDERS: usize = 20;

/// Observed polarity, leak θ and `(local bit, θ)` per parent.
type Row = (bool, f64, Vec<(usize, f64)>);

/// Exact marginals by enumerating every joint state of the disorders that
/// parent an observed finding. Other disorders are independent of the
/// evidence and keep their prior.
pub fn exact_posterior(net: &NoisyOrNetwork, ev: &Evidence) -> Result<Posterior, InferenceError> {
    ev.check_against(net)?;
    let observed: Vec<(usize, bool)> = ev
        .positive()
        .iter()
        .map(|id| (net.finding_index(*id).expect("checked"), true))
        .chain(ev.negative().iter().map(|id| (net.finding_index(*id).expect("checked"), false)))
        .collect();

    let relevant: Vec<usize> = observed
        .iter()
        .flat_map(|(f, _)| net.parents(*f).iter().map(|(d, _)| *d))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = relevant.len();
    if n > MAX_EXACT_DISORDERS {
        return Err(InferenceError::TooManyDisorders {
            count: n,
            max: MAX_EXACT_DISORDERS,
        });
    }
    let mut slot = vec![usize::MAX; net.num_disorders()];
    for (k, d) in relevant.iter().enumerate() {
        slot[*d] = k;
    }
    // per observed finding: leak θ and (bit, θ) per parent
    let rows: Vec<Row> = observed
        .iter()
        .map(|(f, pos)| {
            let parents = net.parents(*f).iter().map(|(d, t)| (slot[*d], *t)).collect();
            (*pos, net.leak_theta(*f), parents)
        })
        .collect();
    let priors = net.priors();
    let log_on: Vec<f64> = relevant.iter().map(|d| priors[*d].ln()).collect();
    let log_off: Vec<f64> = relevant.iter().map(|d| (-priors[*d]).ln_1p()).collect();

    let states = 1usize << n;
    let mut log_weight = Vec::with_capacity(states);
    for state in 0..states {
        let mut lw = 0.0;
        for k in 0..n {
            lw += if state >> k & 1 == 1 { log_on[k] } else { log_off[k] };
        }
        for (positive, leak, parents) in &rows {
            let x = leak
                + parents
                    .iter()
                    .filter(|(bit, _)| state >> bit & 1 == 1)
                    .map(|(_, t)| t)
                    .sum::<f64>();
            lw += if *positive {
                // ln(1 - e^{-x}); -inf when x = 0
                (-(-x).exp()).ln_1p()
            } else {
                -x
            };
        }
        log_weight.push(lw);
    }

    let log_z = log_sum_exp(&log_weight);
    if log_z == f64::NEG_INFINITY {
        return Err(InferenceError::ImpossibleEvidence);
    }
    let mut marginals = priors.to_vec();
    for (k, d) in relevant.iter().enumerate() {
        let mass: f64 = log_weight
            .iter()
            .enumerate()
            .filter(|(s, _)| s >> k & 1 == 1)
            .map(|(_, lw)| (lw - log_z).exp())
            .sum();
        marginals[*d] = mass.clamp(0.0, 1.0);
    }
    Ok(Posterior {
        marginals,
        log_evidence: log_z,
    })
}
