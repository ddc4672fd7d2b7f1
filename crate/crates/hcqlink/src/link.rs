//! Discrete-event propagation of emission events to detector time tags.
//!
//! The channel thins photons binomially by the link transmittance, the
//! detector model applies efficiency, Gaussian timing jitter, Poissonian
//! dark counts and a non-paralyzable dead time, and co-propagating
//! classical light contributes a (by default zero) crosstalk background.
//! Timestamps are integer picoseconds throughout so merges and sorts are
//! exact and platform-independent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{EventRng, Stream, StreamRng};
use crate::source::EmissionEvent;

/// Single-photon detector parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub efficiency: f64,
    #[serde(default = "default_dark_rate")]
    pub dark_count_rate_hz: f64,
    #[serde(default = "default_dead_time")]
    pub dead_time_ns: f64,
    #[serde(default = "default_jitter")]
    pub jitter_sigma_ps: f64,
}

fn default_dark_rate() -> f64 {
    100.0
}
fn default_dead_time() -> f64 {
    40.0
}
fn default_jitter() -> f64 {
    30.0
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidParameter(format!(
                "detector efficiency must lie in [0, 1], got {}",
                self.efficiency
            )));
        }
        if self.dark_count_rate_hz < 0.0 || self.dead_time_ns < 0.0 || self.jitter_sigma_ps < 0.0 {
            return Err(Error::InvalidParameter(
                "detector rates and times must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Classical co-propagation description for the crosstalk null test.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoPropagationSpec {
    pub classical_power_mw: f64,
    /// Added background rate at the quantum detectors per mW of classical
    /// power. Zero for the hollow-core fiber; free parameter for solid-core
    /// comparisons.
    #[serde(default)]
    pub crosstalk_rate_hz_per_mw: f64,
}

impl CoPropagationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classical_power_mw < 0.0 || self.crosstalk_rate_hz_per_mw < 0.0 {
            return Err(Error::InvalidParameter(
                "co-propagation power and crosstalk rate must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn background_rate_hz(&self) -> f64 {
        self.classical_power_mw * self.crosstalk_rate_hz_per_mw
    }
}

/// Ordered detector click records.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TimeTagStream {
    /// `(channel id, timestamp in ps)`, sorted by timestamp.
    pub records: Vec<(u8, i64)>,
    pub duration_ps: i64,
}

impl TimeTagStream {
    pub fn empty(duration_ps: i64) -> Self {
        TimeTagStream {
            records: Vec::new(),
            duration_ps,
        }
    }

    pub fn assert_sorted(&self) -> Result<()> {
        for (i, pair) in self.records.windows(2).enumerate() {
            if pair[1].1 < pair[0].1 {
                return Err(Error::UnsortedInput(i + 1));
            }
        }
        Ok(())
    }

    /// Timestamps of one channel, in order.
    pub fn channel(&self, id: u8) -> Vec<i64> {
        self.records
            .iter()
            .filter(|(c, _)| *c == id)
            .map(|&(_, t)| t)
            .collect()
    }
}

/// Binomial loss thinning: every photon independently survives with
/// probability `transmittance`.
pub fn propagate(
    events: &[EmissionEvent],
    transmittance: f64,
    seed: u64,
) -> Result<Vec<EmissionEvent>> {
    if !(transmittance > 0.0 && transmittance <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "transmittance must lie in (0, 1], got {transmittance}"
        )));
    }
    if transmittance == 1.0 {
        return Ok(events.to_vec());
    }
    let rng = StreamRng::new(seed, Stream::Channel);
    Ok(events
        .iter()
        .map(|e| {
            let mut r = rng.at(e.pulse_index);
            let tags = e
                .tags
                .iter()
                .copied()
                .filter(|_| r.bernoulli(transmittance))
                .collect();
            EmissionEvent {
                pulse_index: e.pulse_index,
                tags,
            }
        })
        .collect())
}

/// Arrival photon: channel assignment plus nominal arrival time.
#[derive(Clone, Copy, Debug)]
pub struct Arrival {
    pub channel: u8,
    pub time_ps: i64,
}

/// Detect a list of nominal arrivals on `num_channels` detectors sharing one
/// spec: efficiency thinning, Gaussian jitter, merged Poisson dark counts,
/// then a per-channel dead-time filter.
///
/// Arrivals must be time-sorted.
pub fn detect(
    arrivals: &[Arrival],
    spec: &DetectorSpec,
    num_channels: u8,
    duration_ps: i64,
    seed: u64,
) -> Result<TimeTagStream> {
    spec.validate()?;
    let det_rng = StreamRng::new(seed, Stream::Detection);
    let mut records: Vec<(u8, i64)> = Vec::with_capacity(arrivals.len());
    for (i, a) in arrivals.iter().enumerate() {
        let mut r = det_rng.at(i as u64);
        if !r.bernoulli(spec.efficiency) {
            continue;
        }
        let t = if spec.jitter_sigma_ps > 0.0 {
            a.time_ps + (r.gaussian() * spec.jitter_sigma_ps).round() as i64
        } else {
            a.time_ps
        };
        let t = t.clamp(0, duration_ps);
        records.push((a.channel, t));
    }

    // dark counts, one Poisson process per channel
    let dark_rng = StreamRng::new(seed, Stream::DarkCounts);
    for ch in 0..num_channels {
        let mut r = dark_rng.at(ch as u64);
        append_poisson_clicks(
            &mut records,
            ch,
            spec.dark_count_rate_hz,
            duration_ps,
            &mut r,
        );
    }

    records.sort_unstable_by_key(|&(c, t)| (t, c));
    let records = apply_dead_time(records, (spec.dead_time_ns * 1000.0).round() as i64);
    Ok(TimeTagStream {
        records,
        duration_ps,
    })
}

fn append_poisson_clicks(
    records: &mut Vec<(u8, i64)>,
    channel: u8,
    rate_hz: f64,
    duration_ps: i64,
    rng: &mut EventRng,
) {
    if rate_hz <= 0.0 || duration_ps <= 0 {
        return;
    }
    let mean = rate_hz * duration_ps as f64 * 1e-12;
    let n = rng.poisson(mean);
    let mut times: Vec<i64> = (0..n)
        .map(|_| (rng.uniform() * duration_ps as f64) as i64)
        .collect();
    times.sort_unstable();
    records.extend(times.into_iter().map(|t| (channel, t)));
}

/// Drop clicks within `dead_time_ps` of an accepted click on the same
/// channel (non-paralyzable). Input must be time-sorted.
fn apply_dead_time(records: Vec<(u8, i64)>, dead_time_ps: i64) -> Vec<(u8, i64)> {
    if dead_time_ps <= 0 {
        return records;
    }
    let mut last: [Option<i64>; 256] = [None; 256];
    records
        .into_iter()
        .filter(|&(c, t)| match last[c as usize] {
            Some(prev) if t - prev < dead_time_ps => false,
            _ => {
                last[c as usize] = Some(t);
                true
            }
        })
        .collect()
}

/// Poisson crosstalk background from the co-propagating classical channel,
/// spread uniformly over `num_channels` quantum detectors.
pub fn copropagation_background(
    spec: &CoPropagationSpec,
    num_channels: u8,
    duration_ps: i64,
    seed: u64,
) -> Result<TimeTagStream> {
    spec.validate()?;
    let rate = spec.background_rate_hz();
    let mut records = Vec::new();
    if rate > 0.0 {
        let rng = StreamRng::new(seed, Stream::Background);
        let per_channel = rate / num_channels as f64;
        for ch in 0..num_channels {
            let mut r = rng.at(ch as u64);
            append_poisson_clicks(&mut records, ch, per_channel, duration_ps, &mut r);
        }
        records.sort_unstable_by_key(|&(c, t)| (t, c));
    }
    Ok(TimeTagStream {
        records,
        duration_ps,
    })
}

/// Timestamp-sorted union of two streams of equal duration.
pub fn merge_streams(a: &TimeTagStream, b: &TimeTagStream) -> Result<TimeTagStream> {
    if a.duration_ps != b.duration_ps {
        return Err(Error::DurationMismatch(a.duration_ps, b.duration_ps));
    }
    let mut records = Vec::with_capacity(a.records.len() + b.records.len());
    records.extend_from_slice(&a.records);
    records.extend_from_slice(&b.records);
    records.sort_unstable_by_key(|&(c, t)| (t, c));
    Ok(TimeTagStream {
        records,
        duration_ps: a.duration_ps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{emit_stream, SourceSpec};

    fn single_photon_source() -> SourceSpec {
        SourceSpec {
            rep_rate_hz: 80e6,
            p1: 1.0,
            p2: 0.0,
            wavepacket_overlap: 1.0,
            pulse_area_rad: std::f64::consts::PI,
            wavelength_um: 0.9339,
        }
    }

    fn ideal_detector() -> DetectorSpec {
        DetectorSpec {
            efficiency: 1.0,
            dark_count_rate_hz: 0.0,
            dead_time_ns: 0.0,
            jitter_sigma_ps: 0.0,
        }
    }

    fn arrivals_from(events: &[EmissionEvent], period_ps: i64) -> Vec<Arrival> {
        events
            .iter()
            .flat_map(|e| {
                e.tags.iter().map(move |_| Arrival {
                    channel: 0,
                    time_ps: e.pulse_index as i64 * period_ps,
                })
            })
            .collect()
    }

    #[test]
    fn unit_transmittance_is_identity() {
        let events = emit_stream(&single_photon_source(), 0, 1000, 1);
        let out = propagate(&events, 1.0, 2).unwrap();
        assert_eq!(out.len(), events.len());
        assert!(out.iter().all(|e| e.photon_count() == 1));
    }

    #[test]
    fn binomial_thinning_at_paper_budget() {
        let n = 1_000_000u64;
        let t = 0.287011963646; // 5.421 dB
        let events = emit_stream(&single_photon_source(), 0, n, 3);
        let out = propagate(&events, t, 4).unwrap();
        let survived: usize = out.iter().map(|e| e.photon_count()).sum();
        let expected = t * n as f64;
        let sigma = (n as f64 * t * (1.0 - t)).sqrt();
        assert!(
            (survived as f64 - expected).abs() < 5.0 * sigma,
            "survived {survived}, expected {expected}"
        );
    }

    #[test]
    fn two_photon_joint_survival() {
        let spec = SourceSpec {
            p1: 0.0,
            p2: 1.0,
            ..single_photon_source()
        };
        let n = 200_000u64;
        let t = 0.6;
        let events = emit_stream(&spec, 0, n, 5);
        let out = propagate(&events, t, 6).unwrap();
        let both = out.iter().filter(|e| e.photon_count() == 2).count() as f64;
        let expected = t * t * n as f64;
        let sigma = (n as f64 * t * t * (1.0 - t * t)).sqrt();
        assert!((both - expected).abs() < 5.0 * sigma, "both {both}");
    }

    #[test]
    fn ideal_detection_keeps_exact_times() {
        let events = emit_stream(&single_photon_source(), 0, 100, 1);
        let arrivals = arrivals_from(&events, 12_500);
        let tags = detect(&arrivals, &ideal_detector(), 2, 100 * 12_500, 9).unwrap();
        assert_eq!(tags.records.len(), 100);
        for (i, &(ch, t)) in tags.records.iter().enumerate() {
            assert_eq!(ch, 0);
            assert_eq!(t, i as i64 * 12_500);
        }
    }

    #[test]
    fn zero_efficiency_leaves_only_darks() {
        let spec = DetectorSpec {
            efficiency: 0.0,
            dark_count_rate_hz: 10_000.0,
            dead_time_ns: 0.0,
            jitter_sigma_ps: 0.0,
        };
        let duration_ps = 1_000_000_000_000; // 1 s
        let tags = detect(&[], &spec, 1, duration_ps, 11).unwrap();
        let expected = 10_000.0_f64;
        let sigma = expected.sqrt();
        assert!(
            (tags.records.len() as f64 - expected).abs() < 5.0 * sigma,
            "darks {}",
            tags.records.len()
        );
    }

    #[test]
    fn dead_time_drops_second_click() {
        let spec = DetectorSpec {
            efficiency: 1.0,
            dark_count_rate_hz: 0.0,
            dead_time_ns: 100.0,
            jitter_sigma_ps: 0.0,
        };
        let arrivals = vec![
            Arrival {
                channel: 0,
                time_ps: 0,
            },
            Arrival {
                channel: 0,
                time_ps: 12_500,
            },
        ];
        let tags = detect(&arrivals, &spec, 1, 1_000_000, 1).unwrap();
        assert_eq!(tags.records.len(), 1);
        assert_eq!(tags.records[0], (0, 0));
    }

    #[test]
    fn background_null_with_zero_crosstalk() {
        let spec = CoPropagationSpec {
            classical_power_mw: 53.0,
            crosstalk_rate_hz_per_mw: 0.0,
        };
        let tags = copropagation_background(&spec, 4, 1_000_000_000_000, 7).unwrap();
        assert!(tags.records.is_empty());
        let off = CoPropagationSpec {
            classical_power_mw: 0.0,
            crosstalk_rate_hz_per_mw: 0.0,
        };
        let tags_off = copropagation_background(&off, 4, 1_000_000_000_000, 7).unwrap();
        assert_eq!(tags, tags_off);
    }

    #[test]
    fn background_poisson_rate() {
        let spec = CoPropagationSpec {
            classical_power_mw: 53.0,
            crosstalk_rate_hz_per_mw: 100.0,
        };
        let tags = copropagation_background(&spec, 4, 1_000_000_000_000, 13).unwrap();
        let expected = 5300.0_f64;
        let sigma = expected.sqrt();
        assert!(
            (tags.records.len() as f64 - expected).abs() < 5.0 * sigma,
            "background {}",
            tags.records.len()
        );
    }

    #[test]
    fn merge_is_commutative_and_counts_add() {
        let a = TimeTagStream {
            records: vec![(0, 10), (1, 30)],
            duration_ps: 100,
        };
        let b = TimeTagStream {
            records: vec![(1, 20)],
            duration_ps: 100,
        };
        let ab = merge_streams(&a, &b).unwrap();
        let ba = merge_streams(&b, &a).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab.records.len(), 3);
        assert_eq!(merge_streams(&a, &TimeTagStream::empty(100)).unwrap(), a);
    }

    #[test]
    fn merge_duration_mismatch() {
        let a = TimeTagStream::empty(10);
        let b = TimeTagStream::empty(20);
        assert!(matches!(
            merge_streams(&a, &b),
            Err(Error::DurationMismatch(10, 20))
        ));
    }

    #[test]
    fn loss_composition() {
        // propagate(s, t1*t2) and propagate(propagate(s, t1), t2) agree in mean
        let events = emit_stream(&single_photon_source(), 0, 100_000, 21);
        let mut once = 0usize;
        let mut twice = 0usize;
        for trial in 0..100u64 {
            let a = propagate(&events, 0.6 * 0.5, 1000 + trial).unwrap();
            once += a.iter().map(|e| e.photon_count()).sum::<usize>();
            let b = propagate(&events, 0.6, 2000 + trial).unwrap();
            let b = propagate(&b, 0.5, 3000 + trial).unwrap();
            twice += b.iter().map(|e| e.photon_count()).sum::<usize>();
        }
        let n = 100.0_f64 * 100_000.0;
        let p = 0.3_f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert!(
            ((once as f64) - (twice as f64)).abs() < 3.0 * sigma * 1.5,
            "once {once}, twice {twice}"
        );
    }

    #[test]
    fn detected_rate_matches_source_calibration() {
        // 80 MHz * 0.253 * 0.85 = 17.2 MHz
        let spec = SourceSpec {
            p1: 0.253,
            p2: 0.0,
            ..single_photon_source()
        };
        let n = 2_000_000u64;
        let events = emit_stream(&spec, 0, n, 31);
        let arrivals = arrivals_from(&events, 12_500);
        let det = DetectorSpec {
            efficiency: 0.85,
            dark_count_rate_hz: 0.0,
            dead_time_ns: 0.0,
            jitter_sigma_ps: 0.0,
        };
        let duration_ps = n as i64 * 12_500;
        let tags = detect(&arrivals, &det, 1, duration_ps, 32).unwrap();
        let rate_hz = tags.records.len() as f64 / (duration_ps as f64 * 1e-12);
        assert!(
            (rate_hz - 17.2e6).abs() / 17.2e6 < 0.01,
            "rate {rate_hz} Hz"
        );
    }
}
