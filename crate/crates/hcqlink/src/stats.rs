//! Coincidence-histogram analysis: g2(0), HOM visibility and their
//! Poissonian uncertainties, extracted by the peak-area method.
//!
//! The central peak area is divided by the mean of the uncorrelated side
//! peak areas, with every area integrated over a fixed window around its
//! nominal delay and no background subtraction. Uncertainties are 1-sigma
//! first-order propagation with `Var(area) = area`.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::rng::EventRng;
use crate::source::ModeTag;

/// Binned counts of cross-channel click-pair delays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: i64,
    /// Symmetric half-span; delays outside [-span, span] are not counted.
    pub span_ps: i64,
    /// Centered bins; `counts[i]` covers delays around `(i - n/2) * bin_width`.
    pub counts: Vec<u64>,
    pub rep_period_ps: i64,
}

impl CoincidenceHistogram {
    pub fn zeroed(bin_width_ps: i64, span_ps: i64, rep_period_ps: i64) -> Result<Self> {
        if bin_width_ps <= 0 || span_ps <= 0 || rep_period_ps <= 0 {
            return Err(Error::InvalidParameter(
                "histogram geometry must be positive".into(),
            ));
        }
        if span_ps % bin_width_ps != 0 {
            return Err(Error::InvalidParameter(format!(
                "bin width {bin_width_ps} must divide span {span_ps}"
            )));
        }
        let n = (2 * span_ps / bin_width_ps + 1) as usize;
        Ok(CoincidenceHistogram {
            bin_width_ps,
            span_ps,
            counts: vec![0; n],
            rep_period_ps,
        })
    }

    /// Delay at the center of bin `i`.
    pub fn bin_center_ps(&self, i: usize) -> i64 {
        (i as i64 - (self.counts.len() / 2) as i64) * self.bin_width_ps
    }

    fn bin_for(&self, delay_ps: i64) -> Option<usize> {
        if delay_ps.abs() > self.span_ps {
            return None;
        }
        let half = self.bin_width_ps / 2;
        let idx = (delay_ps + half).div_euclid(self.bin_width_ps) + (self.counts.len() / 2) as i64;
        if idx < 0 || idx >= self.counts.len() as i64 {
            None
        } else {
            Some(idx as usize)
        }
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Elementwise addition; partial histograms over disjoint tag ranges
    /// combine into exactly the serial result.
    pub fn merge(&mut self, other: &CoincidenceHistogram) -> Result<()> {
        if self.bin_width_ps != other.bin_width_ps
            || self.span_ps != other.span_ps
            || self.rep_period_ps != other.rep_period_ps
        {
            return Err(Error::InvalidParameter(
                "cannot merge histograms with different geometry".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// Cross-correlate two sorted timestamp lists: one count per (a, b) pair
/// with `|t_b - t_a| <= span`, binned by delay `t_b - t_a`.
pub fn histogram(
    a_tags: &[i64],
    b_tags: &[i64],
    bin_width_ps: i64,
    span_ps: i64,
    rep_period_ps: i64,
) -> Result<CoincidenceHistogram> {
    for tags in [a_tags, b_tags] {
        for (i, w) in tags.windows(2).enumerate() {
            if w[1] < w[0] {
                return Err(Error::UnsortedInput(i + 1));
            }
        }
    }
    let mut h = CoincidenceHistogram::zeroed(bin_width_ps, span_ps, rep_period_ps)?;
    let mut lo = 0usize;
    for &ta in a_tags {
        while lo < b_tags.len() && b_tags[lo] < ta - span_ps {
            lo += 1;
        }
        for &tb in &b_tags[lo..] {
            if tb > ta + span_ps {
                break;
            }
            if let Some(i) = h.bin_for(tb - ta) {
                h.counts[i] += 1;
            }
        }
    }
    Ok(h)
}

/// Integrated peak areas: the central peak and the side peaks at multiples
/// of the repetition period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeakAreas {
    pub central: u64,
    /// Peak order (signed, nonzero) to integrated counts.
    pub sides: BTreeMap<i32, u64>,
    pub window_ps: i64,
}

/// Integrate peak areas over `window_ps` around each nominal delay. Every
/// bin is assigned to its nearest peak order, so with `window == period`
/// the peaks exactly partition the histogram. Side orders are reported only
/// up to the largest order whose window the span fully covers.
pub fn peak_areas(h: &CoincidenceHistogram, window_ps: i64) -> Result<PeakAreas> {
    if window_ps <= 0 || window_ps > h.rep_period_ps {
        return Err(Error::InvalidParameter(format!(
            "window {window_ps} ps must lie in (0, rep_period = {} ps]",
            h.rep_period_ps
        )));
    }
    let max_order = (h.span_ps - (window_ps - h.bin_width_ps) / 2) / h.rep_period_ps;
    if max_order < 1 {
        return Err(Error::SpanTooSmall {
            span_ps: h.span_ps,
            order: 1,
            window_ps,
        });
    }
    let mut central = 0u64;
    let mut sides: BTreeMap<i32, u64> =
        (-max_order..=max_order)
            .filter(|&k| k != 0)
            .map(|k| (k as i32, 0))
            .collect();
    for (i, &c) in h.counts.iter().enumerate() {
        let center = h.bin_center_ps(i);
        let k = ((center as f64) / (h.rep_period_ps as f64)).round() as i64;
        let offset = (center - k * h.rep_period_ps).abs();
        if 2 * offset > window_ps {
            continue;
        }
        if k == 0 {
            central += c;
        } else if let Some(area) = sides.get_mut(&(k as i32)) {
            *area += c;
        }
    }
    Ok(PeakAreas {
        central,
        sides,
        window_ps,
    })
}

/// First-order Poisson error propagation through `central / mean(sides)`:
/// `sigma = ratio * sqrt(1/central + 1/sum(sides))`, with zero areas
/// contributing zero variance.
pub fn poisson_ratio_uncertainty(central: u64, side_sum: u64) -> f64 {
    if central == 0 || side_sum == 0 {
        return 0.0;
    }
    // the number of side peaks cancels in the relative error
    let c = central as f64;
    let s = side_sum as f64;
    (c / s) * (1.0 / c + 1.0 / s).sqrt()
}

fn side_mean(areas: &PeakAreas, exclude_orders: &BTreeSet<i32>) -> Result<(f64, u64, usize)> {
    let included: Vec<u64> = areas
        .sides
        .iter()
        .filter(|(k, _)| !exclude_orders.contains(*k) && !exclude_orders.contains(&-(**k)))
        .map(|(_, &v)| v)
        .collect();
    if included.is_empty() {
        return Err(Error::EmptySides);
    }
    let sum: u64 = included.iter().sum();
    Ok((sum as f64 / included.len() as f64, sum, included.len()))
}

/// g2(0) by the peak-area method: central area over the mean of the
/// included side areas, with Poissonian uncertainty.
pub fn g2_zero(areas: &PeakAreas, exclude_orders: &BTreeSet<i32>) -> Result<(f64, f64)> {
    let (mean, sum, _count) = side_mean(areas, exclude_orders)?;
    if areas.central == 0 {
        return Ok((0.0, 0.0));
    }
    if mean == 0.0 {
        return Err(Error::ZeroSideArea);
    }
    let value = areas.central as f64 / mean;
    let sigma = value * (1.0 / areas.central as f64 + 1.0 / sum as f64).sqrt();
    Ok((value, sigma))
}

/// Raw HOM visibility `V = 1 - central / mean(sides)` with the same
/// uncertainty as the underlying ratio.
pub fn hom_visibility(areas: &PeakAreas, exclude_orders: &BTreeSet<i32>) -> Result<(f64, f64)> {
    let (ratio, sigma) = g2_zero(areas, exclude_orders)?;
    Ok((1.0 - ratio, sigma))
}

/// Outcome of one pulse pair at the interference beam splitter: click
/// counts at the two output ports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairOutcome {
    pub out_a: u32,
    pub out_b: u32,
}

impl PairOutcome {
    pub fn coincidence(&self) -> bool {
        self.out_a > 0 && self.out_b > 0
    }
}

/// Route the photons of one pulse pair through the interference beam
/// splitter. With exactly one photon per input and matching mode tags the
/// pair bunches (never a coincidence); in every other case each photon is
/// routed independently, which reproduces the 1/2 coincidence probability
/// of distinguishable or same-port photon pairs.
pub fn hom_pair_interference(
    input_a: &[ModeTag],
    input_b: &[ModeTag],
    rng: &mut EventRng,
) -> PairOutcome {
    if input_a.len() == 1 && input_b.len() == 1 && input_a[0].matches(input_b[0]) {
        return if rng.bernoulli(0.5) {
            PairOutcome { out_a: 2, out_b: 0 }
        } else {
            PairOutcome { out_a: 0, out_b: 2 }
        };
    }
    let mut out = PairOutcome::default();
    for _ in 0..input_a.len() + input_b.len() {
        if rng.bernoulli(0.5) {
            out.out_a += 1;
        } else {
            out.out_b += 1;
        }
    }
    out
}

/// Analytic expectation of the raw HOM visibility produced by the
/// paired-pulse pipeline, by enumeration over the pulse-pair state space.
/// This is the calibration oracle: independent of the Monte-Carlo path.
///
/// `included_orders` are the side-peak orders entering the mean. Pairs
/// arrive every second repetition period, so odd orders hold no pair
/// correlations; a balanced even/odd choice (the default, excluding the
/// nearest peaks) makes the distinguishable-photon central area equal the
/// side mean.
pub fn expected_hom_visibility(
    p0: f64,
    p1: f64,
    p2: f64,
    overlap_m: f64,
    transmittance: f64,
    included_orders: &[i32],
) -> Result<f64> {
    if included_orders.is_empty() {
        return Err(Error::EmptySides);
    }
    debug_assert!((p0 + p1 + p2 - 1.0).abs() < 1e-9);
    // surviving photon-number distribution per pulse after channel thinning
    let t = transmittance;
    let q2 = p2 * t * t;
    let q1 = p1 * t + p2 * 2.0 * t * (1.0 - t);
    let mu = q1 + 2.0 * q2;

    // E[n_a * n_b] over the joint pair state, detector efficiency cancels
    // in the ratio. Cases, by surviving counts (na, nb):
    //   (1,1) matching tags -> 0; (1,1) distinct -> 1/2
    //   (2,0), (0,2)        -> 1/2
    //   (2,1), (1,2)        -> 3/2
    //   (2,2)               -> 3
    let central = q1 * q1 * (1.0 - overlap_m) * 0.5
        + 2.0 * q2 * (1.0 - q1 - q2) * 0.5
        + 2.0 * q2 * q1 * 1.5
        + q2 * q2 * 3.0;

    // side peak at even order: product of independent pair marginals
    let even_area = mu * mu;
    let n_even = included_orders.iter().filter(|k| *k % 2 == 0).count() as f64;
    let side_mean = even_area * n_even / included_orders.len() as f64;
    if side_mean <= 0.0 {
        return Err(Error::ZeroSideArea);
    }
    Ok(1.0 - central / side_mean)
}

/// Solve for the wave-packet overlap that makes the paired-pulse pipeline's
/// expected raw visibility hit `target_v`. The expectation is linear in the
/// overlap, so two oracle evaluations determine it.
pub fn calibrate_overlap_for_visibility(
    target_v: f64,
    p0: f64,
    p1: f64,
    p2: f64,
    transmittance: f64,
    included_orders: &[i32],
) -> Result<f64> {
    let v0 = expected_hom_visibility(p0, p1, p2, 0.0, transmittance, included_orders)?;
    let v1 = expected_hom_visibility(p0, p1, p2, 1.0, transmittance, included_orders)?;
    if (v1 - v0).abs() < 1e-15 {
        return Err(Error::NoSolution(
            "visibility does not depend on the overlap for this source".into(),
        ));
    }
    let m = (target_v - v0) / (v1 - v0);
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::NoSolution(format!(
            "target visibility {target_v} requires overlap {m} outside [0, 1] \
             (reachable range [{v0}, {v1}])"
        )));
    }
    Ok(m)
}
