//! Discrete measures on the real line and their closed-form optimal transport.
//!
//! A [`DiscreteMeasure`] is a weighted sum of Diracs at ascending positions.
//! In one dimension the optimal coupling for a convex ground cost
//! `|x - y|^p` pairs mass in sorted order, so the transport cost reduces to
//! an integral of `|Qa(r) - Qb(r)|^p` over quantile levels `r`. Both
//! quantile functions are piecewise constant between the cumulative weights
//! of their measures, which makes the integral an exact finite sum over the
//! merged set of cumulative-weight breakpoints.
//!
//! The sum is evaluated up to the total mass of the first (source) measure.
//! When the second measure carries more mass, its quantile levels above that
//! total are ignored (the truncation used for the spectral cutoff); when it
//! carries less, its quantile is held at its last atom. The balanced case is
//! the ordinary Wasserstein cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total-mass agreement for balanced transport.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Relative width below which two cumulative-weight breakpoints are merged.
const TIE_TOLERANCE: f64 = 1e-12;

/// Weighted atoms at strictly ascending positions.
///
/// Zero-weight atoms are dropped on construction; [`source_indices`] maps
/// every retained atom back to its index in the input slices.
///
/// [`source_indices`]: DiscreteMeasure::source_indices
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    positions: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    source: Vec<usize>,
}

impl DiscreteMeasure {
    pub fn new(positions: &[f64], weights: &[f64]) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} positions but {} weights",
                positions.len(),
                weights.len()
            )));
        }
        for w in positions.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidMeasure(format!(
                    "positions not strictly ascending at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let mut kept_pos = Vec::with_capacity(positions.len());
        let mut kept_w = Vec::with_capacity(weights.len());
        let mut source = Vec::with_capacity(weights.len());
        for (idx, (&x, &w)) in positions.iter().zip(weights).enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidMeasure(format!("non-finite position {x}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidMeasure(format!("invalid weight {w} at {idx}")));
            }
            if w > 0.0 {
                kept_pos.push(x);
                kept_w.push(w);
                source.push(idx);
            }
        }
        let cumulative = kept_w
            .iter()
            .scan(0.0, |acc, &w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            positions: kept_pos,
            weights: kept_w,
            cumulative,
            source,
        })
    }

    pub fn dirac(position: f64, mass: f64) -> Result<Self> {
        Self::new(&[position], &[mass])
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Running sums of the weights; the last entry is the total mass.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Mass at or below `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.positions.partition_point(|&p| p <= x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Generalized quantile `inf { x : cdf(x) >= level }`.
    ///
    /// A level of zero returns the smallest position.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        let total = self.total_mass();
        if self.is_empty() || level.is_nan() || level < 0.0 || level > total + 1e-12 {
            return Err(Error::QuantileDomain { level, total });
        }
        let idx = self.cumulative.partition_point(|&c| c < level);
        Ok(self.positions[idx.min(self.len() - 1)])
    }

    fn transformed_positions(&self, transform: PositionTransform) -> Result<Vec<f64>> {
        match transform {
            PositionTransform::Identity => Ok(self.positions.clone()),
            PositionTransform::Logarithmic => self
                .positions
                .iter()
                .map(|&x| {
                    if x > 0.0 {
                        Ok(x.ln())
                    } else {
                        Err(Error::NonPositivePosition(x))
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PositionTransform {
    #[default]
    Identity,
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OtConfig {
    /// Exponent of the ground cost `|x - y|^p`; 1 or 2.
    pub p: u32,
    #[serde(default)]
    pub position_transform: PositionTransform,
    /// Allow the target to carry more mass than the source and ignore the
    /// excess.
    #[serde(default)]
    pub cutoff: bool,
}

impl Default for OtConfig {
    fn default() -> Self {
        Self {
            p: 2,
            position_transform: PositionTransform::Identity,
            cutoff: false,
        }
    }
}

impl OtConfig {
    pub fn with_p(p: u32) -> Self {
        Self {
            p,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.p {
            1 | 2 => Ok(()),
            p => Err(Error::InvalidConfig(format!(
                "ground cost exponent must be 1 or 2, got {p}"
            ))),
        }
    }

    #[inline]
    fn ground_cost(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        if self.p == 1 {
            d
        } else {
            d * d
        }
    }
}

/// Sparse coupling between two measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `(source atom, target atom, mass)` with strictly positive mass.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn row_sums(&self, n: usize) -> Vec<f64> {
        let mut sums = vec![0.0; n];
        for &(i, _, m) in &self.entries {
            sums[i] += m;
        }
        sums
    }

    pub fn column_sums(&self, m: usize) -> Vec<f64> {
        let mut sums = vec![0.0; m];
        for &(_, j, mass) in &self.entries {
            sums[j] += mass;
        }
        sums
    }
}

/// Gradients of the transport cost with respect to the unnormalized weights
/// of both measures, indexed like [`DiscreteMeasure::weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGradients {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    width: f64,
    cost: f64,
}

/// Merged-breakpoint decomposition of the quantile integral.
struct Sweep {
    segments: Vec<Segment>,
    /// For each source atom, the index of the segment ending at its
    /// cumulative weight.
    source_breaks: Vec<Option<usize>>,
    /// Same for target atoms; `None` for breakpoints at or past the limit.
    target_breaks: Vec<Option<usize>>,
}

impl Sweep {
    fn run(xs: &[f64], a_cum: &[f64], ys: &[f64], b_cum: &[f64], cfg: &OtConfig) -> Self {
        let (n, m) = (xs.len(), ys.len());
        let limit = a_cum[n - 1];
        let tol = TIE_TOLERANCE * limit.max(b_cum[m - 1]);
        let mut segments = Vec::with_capacity(n + m);
        let mut source_breaks = vec![None; n];
        let mut target_breaks = vec![None; m];
        let (mut i, mut j) = (0usize, 0usize);
        let mut lo = 0.0;
        loop {
            let next_a = if i < n { a_cum[i] } else { f64::INFINITY };
            let next_b = if j < m { b_cum[j] } else { f64::INFINITY };
            let hi = next_a.min(next_b).min(limit);
            if hi > lo {
                let cost = cfg.ground_cost(xs[i.min(n - 1)], ys[j.min(m - 1)]);
                segments.push(Segment {
                    width: hi - lo,
                    cost,
                });
            }
            let here = segments.len().checked_sub(1);
            let at_limit = hi >= limit - tol;
            if i < n && next_a <= hi + tol {
                source_breaks[i] = here;
                i += 1;
            }
            if j < m && next_b <= hi + tol && !at_limit {
                target_breaks[j] = here;
                j += 1;
            }
            if at_limit {
                break;
            }
            lo = hi;
        }
        Self {
            segments,
            source_breaks,
            target_breaks,
        }
    }

    fn cost(&self) -> f64 {
        self.segments.iter().map(|s| s.width * s.cost).sum()
    }

    /// Suffix sums of `cost(segment before) - cost(segment after)` over the
    /// breakpoints of one measure.
    fn breakpoint_gradient(&self, breaks: &[Option<usize>]) -> Vec<f64> {
        let mut grad = vec![0.0; breaks.len()];
        let mut acc = 0.0;
        for (l, brk) in breaks.iter().enumerate().rev() {
            if let Some(k) = *brk {
                let before = self.segments[k].cost;
                let after = self.segments.get(k + 1).map_or(0.0, |s| s.cost);
                acc += before - after;
            }
            grad[l] = acc;
        }
        grad
    }
}

fn check_nonempty(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidMeasure("measure has no mass".into()));
    }
    Ok(())
}

fn check_masses(a: &DiscreteMeasure, b: &DiscreteMeasure, cutoff: bool) -> Result<()> {
    let (ma, mb) = (a.total_mass(), b.total_mass());
    let excess = mb - ma;
    let ok = if cutoff {
        excess >= -MASS_TOLERANCE
    } else {
        excess.abs() <= MASS_TOLERANCE
    };
    if ok {
        Ok(())
    } else {
        Err(Error::MassMismatch {
            source_mass: ma,
            target_mass: mb,
        })
    }
}

fn sweep(a: &DiscreteMeasure, b: &DiscreteMeasure, cfg: &OtConfig) -> Result<Sweep> {
    cfg.validate()?;
    check_nonempty(a, b)?;
    let xs = a.transformed_positions(cfg.position_transform)?;
    let ys = b.transformed_positions(cfg.position_transform)?;
    Ok(Sweep::run(&xs, a.cumulative(), &ys, b.cumulative(), cfg))
}

/// `W_p^p` between `a` and `b`.
///
/// Without cutoff the masses must agree to [`MASS_TOLERANCE`]. With cutoff
/// `b` may be heavier and quantile levels above `a`'s total are ignored.
pub fn wasserstein_pp(a: &DiscreteMeasure, b: &DiscreteMeasure, cfg: &OtConfig) -> Result<f64> {
    check_nonempty(a, b)?;
    check_masses(a, b, cfg.cutoff)?;
    Ok(sweep(a, b, cfg)?.cost())
}

/// The quantile-integral cost over levels `(0, total_mass(a)]` with no mass
/// precondition.
///
/// This is the function whose partial derivatives
/// [`wasserstein_grad_weights`] returns; it agrees with [`wasserstein_pp`]
/// wherever the latter is defined.
pub fn transport_cost_relaxed(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cfg: &OtConfig,
) -> Result<f64> {
    Ok(sweep(a, b, cfg)?.cost())
}

/// Cost together with the gradients for both measures' weights.
pub fn wasserstein_with_gradients(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cfg: &OtConfig,
) -> Result<(f64, WeightGradients)> {
    check_nonempty(a, b)?;
    check_masses(a, b, cfg.cutoff)?;
    let sw = sweep(a, b, cfg)?;
    let grads = WeightGradients {
        source: sw.breakpoint_gradient(&sw.source_breaks),
        target: sw.breakpoint_gradient(&sw.target_breaks),
    };
    Ok((sw.cost(), grads))
}

/// `dW_p^p / da_i` for the unnormalized weights of `a`.
///
/// Quantile values are treated as locally constant; at exact breakpoint ties
/// the costs of the neighbouring segments are used.
pub fn wasserstein_grad_weights(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cfg: &OtConfig,
) -> Result<Vec<f64>> {
    Ok(wasserstein_with_gradients(a, b, cfg)?.1.source)
}

/// North-west-corner coupling of two balanced measures.
pub fn monotone_plan(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cfg: &OtConfig,
) -> Result<TransportPlan> {
    cfg.validate()?;
    check_nonempty(a, b)?;
    check_masses(a, b, false)?;
    let xs = a.transformed_positions(cfg.position_transform)?;
    let ys = b.transformed_positions(cfg.position_transform)?;
    let tol = TIE_TOLERANCE * a.total_mass().max(b.total_mass());

    let mut entries = Vec::with_capacity(a.len() + b.len());
    let mut cost = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    let mut left_a = a.weights()[0];
    let mut left_b = b.weights()[0];
    while i < a.len() && j < b.len() {
        let moved = left_a.min(left_b);
        if moved > 0.0 {
            entries.push((i, j, moved));
            cost += moved * cfg.ground_cost(xs[i], ys[j]);
        }
        left_a -= moved;
        left_b -= moved;
        // Rounding leaves crumbs on the last atoms; the final pair absorbs them.
        if left_a <= tol && i + 1 < a.len() {
            i += 1;
            left_a = a.weights()[i];
        } else if left_a <= tol {
            i += 1;
        }
        if left_b <= tol && j + 1 < b.len() {
            j += 1;
            left_b = b.weights()[j];
        } else if left_b <= tol {
            j += 1;
        }
    }
    Ok(TransportPlan { entries, cost })
}

/// Independent `W_p^p` estimate from `q` equal-mass atoms per measure paired
/// rank to rank.
///
/// Exact when every weight is a multiple of `total_mass / q`. Positions are
/// used untransformed.
pub fn quantized_atom_oracle(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    p: u32,
    q: usize,
) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidConfig("atom count must be positive".into()));
    }
    let cfg = OtConfig::with_p(p);
    cfg.validate()?;
    check_nonempty(a, b)?;
    check_masses(a, b, false)?;
    let atoms_a = equal_mass_atoms(a, q);
    let atoms_b = equal_mass_atoms(b, q);
    let sum: f64 = atoms_a
        .iter()
        .zip(&atoms_b)
        .map(|(&x, &y)| cfg.ground_cost(x, y))
        .sum();
    Ok(a.total_mass() * sum / q as f64)
}

/// Positions of `q` equal-mass atoms, found by a linear scan at the centre
/// level of each atom.
fn equal_mass_atoms(m: &DiscreteMeasure, q: usize) -> Vec<f64> {
    let total = m.total_mass();
    let mut out = Vec::with_capacity(q);
    let mut idx = 0;
    let mut below = 0.0;
    for k in 0..q {
        let level = (k as f64 + 0.5) * total / q as f64;
        while idx + 1 < m.len() && below + m.weights()[idx] < level {
            below += m.weights()[idx];
            idx += 1;
        }
        out.push(m.positions()[idx]);
    }
    out
}
