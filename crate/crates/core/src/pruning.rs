//! Magnitude-based pruning with a smoothly increasing sparsity rate.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsglError};
use crate::params::ParamVector;
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSchedule {
    /// Final sparsity the rate approaches.
    pub target: f64,
    /// Per-period decay of the remaining gap to the target.
    pub decay: f64,
    /// Iterations per pruning event.
    pub every: u64,
    /// Rank weights within each sparse layer instead of across all of them.
    #[serde(default)]
    pub per_layer: bool,
}

impl PruneSchedule {
    pub fn new(target: f64, decay: f64, every: u64) -> Result<Self> {
        let s = Self { target, decay, every, per_layer: false };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.target) {
            return Err(SsglError::Config(format!("prune target must lie in [0, 1), got {}", self.target)));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(SsglError::Config(format!("prune decay must lie in (0, 1), got {}", self.decay)));
        }
        if self.every == 0 {
            return Err(SsglError::Config("prune period must be positive".into()));
        }
        Ok(())
    }

    /// `target * (1 - decay^(k / every))`
    pub fn sparse_rate(&self, k: u64) -> f64 {
        self.target * (1.0 - self.decay.powf(k as f64 / self.every as f64))
    }

    /// Whether iteration `k` triggers a pruning event.
    pub fn is_event(&self, k: u64) -> bool {
        k > 0 && k % self.every == 0
    }
}

/// Number of weights pruned from `count` candidates at rate `s`.
pub fn pruned_count(rate: f64, count: usize) -> usize {
    (rate * count as f64).floor() as usize
}

/// Masks and zeroes the `floor(rate * |X|)` smallest-magnitude sparse weights.
///
/// The mask is recomputed from the current magnitudes, so previously pruned
/// weights may become active again. Ties are broken by lower index first.
/// Non-sparse weights are never pruned.
pub fn prune_bottom<T: Real>(beta: &mut ParamVector<T>, rate: f64, per_layer: bool) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(SsglError::Domain(format!("prune rate must lie in [0, 1), got {rate}")));
    }
    let layout = beta.layout().clone();
    let mut mask = vec![true; beta.len()];
    let groups: Vec<Vec<usize>> = if per_layer {
        layout.sparse_layers().map(|l| l.range().collect()).collect()
    } else {
        vec![layout.partition().0]
    };
    for group in groups {
        let m = pruned_count(rate, group.len());
        if m == 0 {
            continue;
        }
        let values = beta.values();
        let mut ranked = group;
        let key = |&i: &usize| (values[i].abs(), i);
        ranked.select_nth_unstable_by(m - 1, |a, b| {
            let (ma, ia) = key(a);
            let (mb, ib) = key(b);
            ma.partial_cmp(&mb).unwrap_or(std::cmp::Ordering::Equal).then(ia.cmp(&ib))
        });
        for &i in &ranked[..m] {
            mask[i] = false;
        }
    }
    beta.set_mask(mask)
}

/// Fraction of sparse weights currently masked.
pub fn sparsity<T: Real>(beta: &ParamVector<T>) -> f64 {
    let (sparse, _) = beta.layout().partition();
    if sparse.is_empty() {
        return 0.0;
    }
    let masked = sparse.iter().filter(|&&i| !beta.mask()[i]).count();
    masked as f64 / sparse.len() as f64
}
