//! Scenario pipelines: wire the source, channel, receiver and analysis
//! modules into the end-to-end runs selected by a [`RunConfig`], and render
//! their results as CSV artifacts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bb84::{
    detector_channel, measure, prepare, Basis, Encoding, QubitState, ReceiverSpec,
};
use crate::config::{AnalysisConfig, RunConfig, ScenarioKind};
use crate::error::{Error, Result};
use crate::fiber::{band_for, channel_loss, db_to_transmittance, resonance_wavelengths, window_index, LossBudget};
use crate::keyrate::{
    distance_vs_prop_loss, gllp_rate, max_distance, rate_vs_loss, ChannelScalingModel,
    KeyRateParams,
};
use crate::link::{
    copropagation_background, detect, merge_streams, propagate, Arrival, TimeTagStream,
};
use crate::rng::{Stream, StreamRng};
use crate::source::{effective_mu, emit_stream, SourceSpec};
use crate::stats::{
    expected_hom_visibility, g2_zero, histogram, hom_pair_interference, hom_visibility,
    peak_areas, calibrate_overlap_for_visibility, CoincidenceHistogram,
};

/// One scalar result with its one-standard-deviation uncertainty
/// (zero for exact quantities).
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

impl Metric {
    pub fn exact(name: &str, value: f64) -> Metric {
        Metric {
            name: name.into(),
            value,
            sigma: 0.0,
        }
    }

    pub fn with_sigma(name: &str, value: f64, sigma: f64) -> Metric {
        Metric {
            name: name.into(),
            value,
            sigma,
        }
    }
}

/// Everything a scenario run produces: scalar metrics plus named CSV
/// artifacts, rendered in memory so callers decide where they land.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub scenario: ScenarioKind,
    pub name: String,
    pub seed: u64,
    pub metrics: Vec<Metric>,
    /// `(file name, CSV contents)` pairs.
    pub artifacts: Vec<(String, String)>,
}

impl RunOutput {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// The `summary.csv` rendering of the metrics.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("metric,value,sigma\n");
        for m in &self.metrics {
            let _ = writeln!(out, "{},{},{}", m.name, m.value, m.sigma);
        }
        out
    }
}

/// Run the scenario selected by the configuration. `seed_override` takes
/// precedence over the configured seed.
pub fn run_scenario(config: &RunConfig, seed_override: Option<u64>) -> Result<RunOutput> {
    config.validate()?;
    let seed = seed_override.unwrap_or(config.seed);
    let mut out = match config.scenario {
        ScenarioKind::Hbt => run_hbt(config, seed)?,
        ScenarioKind::Hom => run_hom(config, seed)?,
        ScenarioKind::Bb84Pol => run_bb84(config, seed, Encoding::Polarization)?,
        ScenarioKind::Bb84Timebin => run_bb84(config, seed, Encoding::TimeBin)?,
        ScenarioKind::Keyrate => run_keyrate(config, seed)?,
        ScenarioKind::FiberReport => run_fiber_report(config, seed)?,
        ScenarioKind::CopropNull => run_coprop_null(config, seed)?,
    };
    out.metrics.insert(0, Metric::exact("seed", seed as f64));
    Ok(out)
}

/// Write `summary.csv` plus every artifact into `dir`, creating it if
/// needed. Returns the paths written.
pub fn write_outputs(output: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let summary = dir.join("summary.csv");
    std::fs::write(&summary, output.summary_csv())?;
    paths.push(summary);
    for (name, contents) in &output.artifacts {
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        paths.push(path);
    }
    Ok(paths)
}

fn channel_budget(config: &RunConfig, source: &SourceSpec) -> Result<(LossBudget, f64)> {
    let budget = channel_loss(&config.fiber, source.wavelength_um)?;
    Ok((budget, db_to_transmittance(budget.total_db)))
}

/// Side-peak orders entering the uncorrelated mean, given the exclusion
/// list (`None` means the scenario default) and the histogram geometry.
fn included_orders(
    analysis: &AnalysisConfig,
    rep_period_ps: i64,
    default_exclude: &[i32],
) -> Result<(BTreeSet<i32>, Vec<i32>)> {
    let max_order =
        (analysis.span_ps - (analysis.window_ps - analysis.bin_width_ps) / 2) / rep_period_ps;
    if max_order < 1 {
        return Err(Error::SpanTooSmall {
            span_ps: analysis.span_ps,
            order: 1,
            window_ps: analysis.window_ps,
        });
    }
    let exclude: BTreeSet<i32> = analysis
        .exclude_orders
        .clone()
        .unwrap_or_else(|| default_exclude.to_vec())
        .into_iter()
        .collect();
    let included: Vec<i32> = (-(max_order as i32)..=max_order as i32)
        .filter(|&k| k != 0 && !exclude.contains(&k))
        .collect();
    if included.is_empty() {
        return Err(Error::EmptySides);
    }
    Ok((exclude, included))
}

fn histogram_csv(h: &CoincidenceHistogram) -> String {
    let mut out = String::from("delay_ps,counts\n");
    for (i, &c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{},{}", h.bin_center_ps(i), c);
    }
    out
}

fn time_tags_csv(stream: &TimeTagStream) -> String {
    let mut out = String::from("channel,timestamp_ps\n");
    for &(ch, t) in &stream.records {
        let _ = writeln!(out, "{ch},{t}");
    }
    out
}

/// Emit, propagate and route pulses through a 50:50 correlator splitter,
/// then detect on two channels. The shared front end of the HBT and
/// co-propagation scenarios.
fn correlator_stream(
    config: &RunConfig,
    source: &SourceSpec,
    transmittance: f64,
    seed: u64,
) -> Result<(TimeTagStream, i64)> {
    let pulses = config.protocol.rounds;
    let period = source.period_ps();
    let duration = pulses as i64 * period;
    let events = emit_stream(source, 0, pulses, seed);
    let events = propagate(&events, transmittance, seed)?;
    let route = StreamRng::new(seed, Stream::Interferometer);
    let mut arrivals = Vec::new();
    for e in &events {
        if e.tags.is_empty() {
            continue;
        }
        let mut r = route.at(e.pulse_index);
        let time_ps = e.pulse_index as i64 * period + period / 2;
        for _ in 0..e.tags.len() {
            let channel = if r.bernoulli(0.5) { 0 } else { 1 };
            arrivals.push(Arrival { channel, time_ps });
        }
    }
    let stream = detect(&arrivals, config.receiver.detector(0), 2, duration, seed)?;
    Ok((stream, period))
}

fn run_hbt(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    let source = config.source.resolve()?;
    let (budget, transmittance) = channel_budget(config, &source)?;
    let (stream, period) = correlator_stream(config, &source, transmittance, seed)?;
    let stream = if config.coprop.background_rate_hz() > 0.0 {
        let bg = copropagation_background(&config.coprop, 2, stream.duration_ps, seed)?;
        merge_streams(&stream, &bg)?
    } else {
        stream
    };
    let h = histogram(
        &stream.channel(0),
        &stream.channel(1),
        config.analysis.bin_width_ps,
        config.analysis.span_ps,
        period,
    )?;
    let areas = peak_areas(&h, config.analysis.window_ps)?;
    let (exclude, _included) = included_orders(&config.analysis, period, &[])?;
    let (g2, g2_sigma) = g2_zero(&areas, &exclude)?;
    let side_sum: u64 = areas
        .sides
        .iter()
        .filter(|(k, _)| !exclude.contains(k))
        .map(|(_, &v)| v)
        .sum();
    let duration_s = stream.duration_ps as f64 * 1e-12;
    let mut metrics = vec![
        Metric::with_sigma("g2_zero", g2, g2_sigma),
        Metric::exact("central_area", areas.central as f64),
        Metric::exact("side_area_sum", side_sum as f64),
        Metric::exact("effective_mu", effective_mu(&source)),
        Metric::exact("total_loss_db", budget.total_db),
        Metric::exact("transmittance", transmittance),
        Metric::exact(
            "click_rate_hz",
            stream.records.len() as f64 / duration_s,
        ),
    ];
    if config.coprop.background_rate_hz() > 0.0 {
        metrics.push(Metric::exact(
            "background_rate_hz",
            config.coprop.background_rate_hz(),
        ));
    }
    let mut artifacts = vec![("histogram.csv".to_string(), histogram_csv(&h))];
    if config.dump_time_tags {
        artifacts.push(("time_tags.csv".to_string(), time_tags_csv(&stream)));
    }
    Ok(RunOutput {
        scenario: config.scenario,
        name: config.name(),
        seed,
        metrics,
        artifacts,
    })
}

fn run_coprop_null(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    let source = config.source.resolve()?;
    let (budget, transmittance) = channel_budget(config, &source)?;
    let (baseline, _period) = correlator_stream(config, &source, transmittance, seed)?;
    let bg = copropagation_background(&config.coprop, 2, baseline.duration_ps, seed)?;
    let merged = merge_streams(&baseline, &bg)?;
    let identical = merged.records == baseline.records;
    let metrics = vec![
        Metric::exact("records_baseline", baseline.records.len() as f64),
        Metric::exact("records_with_classical", merged.records.len() as f64),
        Metric::exact("background_clicks", bg.records.len() as f64),
        Metric::exact("classical_power_mw", config.coprop.classical_power_mw),
        Metric::exact("crosstalk_rate_hz_per_mw", config.coprop.crosstalk_rate_hz_per_mw),
        Metric::exact("total_loss_db", budget.total_db),
        Metric::exact("identical", if identical { 1.0 } else { 0.0 }),
    ];
    let mut artifacts = Vec::new();
    if config.dump_time_tags {
        artifacts.push(("time_tags.csv".to_string(), time_tags_csv(&merged)));
    }
    Ok(RunOutput {
        scenario: config.scenario,
        name: config.name(),
        seed,
        metrics,
        artifacts,
    })
}

fn run_hom(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    let mut source = config.source.resolve()?;
    let (budget, transmittance) = channel_budget(config, &source)?;
    let period = source.period_ps();
    let (exclude, included) = included_orders(&config.analysis, period, &[-1, 1])?;
    if let Some(target) = config.source.hom_target_visibility {
        source.wavepacket_overlap = calibrate_overlap_for_visibility(
            target,
            source.p0(),
            source.p1,
            source.p2,
            transmittance,
            &included,
        )?;
    }
    let expected = expected_hom_visibility(
        source.p0(),
        source.p1,
        source.p2,
        source.wavepacket_overlap,
        transmittance,
        &included,
    )?;

    let pairs = config.protocol.rounds / 2;
    let pulses = pairs * 2;
    let duration = pulses as i64 * period;
    let events = emit_stream(&source, 0, pulses, seed);
    let events = propagate(&events, transmittance, seed)?;
    let interf = StreamRng::new(seed, Stream::Interferometer);
    let mut arrivals = Vec::new();
    for pair in 0..pairs {
        let a = &events[2 * pair as usize].tags;
        let b = &events[2 * pair as usize + 1].tags;
        if a.is_empty() && b.is_empty() {
            continue;
        }
        let mut r = interf.at(pair);
        let outcome = hom_pair_interference(a, b, &mut r);
        // the short arm delays pulse 2i onto pulse 2i+1, so every pair
        // overlaps at the odd pulse slot
        let time_ps = (2 * pair as i64 + 1) * period;
        for _ in 0..outcome.out_a {
            arrivals.push(Arrival {
                channel: 0,
                time_ps,
            });
        }
        for _ in 0..outcome.out_b {
            arrivals.push(Arrival {
                channel: 1,
                time_ps,
            });
        }
    }
    let stream = detect(&arrivals, config.receiver.detector(0), 2, duration, seed)?;
    let h = histogram(
        &stream.channel(0),
        &stream.channel(1),
        config.analysis.bin_width_ps,
        config.analysis.span_ps,
        period,
    )?;
    let areas = peak_areas(&h, config.analysis.window_ps)?;
    let (visibility, sigma) = hom_visibility(&areas, &exclude)?;
    let metrics = vec![
        Metric::with_sigma("hom_visibility", visibility, sigma),
        Metric::exact("expected_visibility", expected),
        Metric::exact("wavepacket_overlap", source.wavepacket_overlap),
        Metric::exact("central_area", areas.central as f64),
        Metric::exact("total_loss_db", budget.total_db),
        Metric::exact("transmittance", transmittance),
    ];
    let mut artifacts = vec![("histogram.csv".to_string(), histogram_csv(&h))];
    if config.dump_time_tags {
        artifacts.push(("time_tags.csv".to_string(), time_tags_csv(&stream)));
    }
    Ok(RunOutput {
        scenario: config.scenario,
        name: config.name(),
        seed,
        metrics,
        artifacts,
    })
}

/// Per-prepared-state tally for the QKD scenarios.
#[derive(Clone, Copy, Default)]
struct StateTally {
    sent: u64,
    sifted: u64,
    errors: u64,
}

fn run_bb84(config: &RunConfig, seed: u64, encoding: Encoding) -> Result<RunOutput> {
    let source = config.source.resolve()?;
    let (budget, transmittance) = channel_budget(config, &source)?;
    let rx = &config.receiver;
    let rounds = config.protocol.rounds;
    let gate_s = rx.gate_width_ns * 1e-9;

    // loss-independent in-gate click probabilities per detector channel:
    // dark counts plus co-propagation crosstalk background
    let bg_per_channel_hz = config.coprop.background_rate_hz() / 4.0;
    let p_extra: Vec<f64> = (0..4)
        .map(|ch| (rx.detector(ch).dark_count_rate_hz + bg_per_channel_hz) * gate_s)
        .collect();
    let p_extra_any: f64 = p_extra.iter().sum();

    let proto = StreamRng::new(seed, Stream::Protocol);
    let emit = StreamRng::new(seed, Stream::Emission);
    let chan = StreamRng::new(seed, Stream::Channel);
    let meas = StreamRng::new(seed, Stream::Interferometer);
    let det = StreamRng::new(seed, Stream::Detection);
    let dark = StreamRng::new(seed, Stream::DarkCounts);

    let mut tallies = [StateTally::default(); 4];
    let mut single_click_rounds = 0u64;
    let mut sifted = 0u64;
    let mut errors = 0u64;

    for round in 0..rounds {
        let mut rp = proto.at(round);
        let bit = u8::from(rp.bernoulli(0.5));
        let basis = if rp.bernoulli(0.5) { Basis::Z } else { Basis::X };
        let state = prepare(bit, basis, encoding);
        let state_idx = detector_channel(basis, bit) as usize;
        tallies[state_idx].sent += 1;

        let mut re = emit.at(round);
        let u = re.uniform();
        let photons = if u < source.p2 {
            2
        } else if u < source.p2 + source.p1 {
            1
        } else {
            0
        };

        let mut clicks = [false; 4];
        if photons > 0 {
            let mut rc = chan.at(round);
            let mut rm = meas.at(round);
            let mut rd = det.at(round);
            for _ in 0..photons {
                if !rc.bernoulli(transmittance) {
                    continue;
                }
                let Some(ch) = receive_photon(&state, rx, encoding, &mut rm) else {
                    continue;
                };
                if rd.bernoulli(rx.detector(ch as usize).efficiency) {
                    clicks[ch as usize] = true;
                }
            }
        }
        if p_extra_any > 0.0 {
            let mut rk = dark.at(round);
            if rk.bernoulli(p_extra_any) {
                let mut u = rk.uniform() * p_extra_any;
                for (ch, &p) in p_extra.iter().enumerate() {
                    if u < p {
                        clicks[ch] = true;
                        break;
                    }
                    u -= p;
                }
            }
        }

        let n_clicks = clicks.iter().filter(|&&c| c).count();
        if n_clicks != 1 {
            continue;
        }
        single_click_rounds += 1;
        let ch = clicks.iter().position(|&c| c).unwrap() as u8;
        let (bob_basis, bob_bit) = match ch {
            0 => (Basis::Z, 0),
            1 => (Basis::Z, 1),
            2 => (Basis::X, 0),
            _ => (Basis::X, 1),
        };
        if bob_basis != basis {
            continue;
        }
        sifted += 1;
        tallies[state_idx].sifted += 1;
        if bob_bit != bit {
            errors += 1;
            tallies[state_idx].errors += 1;
        }
    }

    if sifted == 0 {
        return Err(Error::EmptyInput("no sifted records".into()));
    }
    let qber = errors as f64 / sifted as f64;
    let qber_sigma = (qber * (1.0 - qber) / sifted as f64).sqrt();
    let sifted_fraction = sifted as f64 / single_click_rounds as f64;
    let frac_sigma =
        (sifted_fraction * (1.0 - sifted_fraction) / single_click_rounds as f64).sqrt();
    let elapsed_s = rounds as f64 / source.rep_rate_hz;

    let mut qkd = String::from("state,sent,sifted,errors,qber,qber_sigma\n");
    for (idx, tally) in tallies.iter().enumerate() {
        let state = state_for_index(idx as u8, encoding);
        let (e, s) = if tally.sifted > 0 {
            let e = tally.errors as f64 / tally.sifted as f64;
            (e, (e * (1.0 - e) / tally.sifted as f64).sqrt())
        } else {
            (0.0, 0.0)
        };
        let _ = writeln!(
            qkd,
            "{},{},{},{},{},{}",
            state.label(),
            tally.sent,
            tally.sifted,
            tally.errors,
            e,
            s
        );
    }

    let metrics = vec![
        Metric::with_sigma("qber", qber, qber_sigma),
        Metric::with_sigma("sifted_fraction", sifted_fraction, frac_sigma),
        Metric::exact("sifted_rate_hz", sifted as f64 / elapsed_s),
        Metric::exact("sifted_count", sifted as f64),
        Metric::exact("single_click_rounds", single_click_rounds as f64),
        Metric::exact("error_count", errors as f64),
        Metric::exact("total_loss_db", budget.total_db),
        Metric::exact("transmittance", transmittance),
        Metric::exact(
            "matched_error_probability",
            rx.matched_error_probability(encoding),
        ),
    ];
    Ok(RunOutput {
        scenario: config.scenario,
        name: config.name(),
        seed,
        metrics,
        artifacts: vec![("qkd.csv".to_string(), qkd)],
    })
}

/// Route one surviving photon through the receiver optics; `None` means the
/// photon is lost before any detector (the non-interfering time-bin slot).
fn receive_photon(
    state: &QubitState,
    rx: &ReceiverSpec,
    encoding: Encoding,
    rng: &mut crate::rng::EventRng,
) -> Option<u8> {
    match encoding {
        Encoding::Polarization => Some(measure(state, rx, rng)),
        Encoding::TimeBin => {
            let measured_basis = if rng.bernoulli(rx.basis_split) {
                Basis::Z
            } else {
                Basis::X
            };
            // X analysis interferes only in the middle time slot; the two
            // outer slots are gated away
            if measured_basis == Basis::X && !rng.bernoulli(0.5) {
                return None;
            }
            let bit = if measured_basis == state.basis {
                let err = rx.matched_error_probability(Encoding::TimeBin);
                if rng.bernoulli(err) {
                    1 - state.bit
                } else {
                    state.bit
                }
            } else if rng.bernoulli(0.5) {
                1
            } else {
                0
            };
            Some(detector_channel(measured_basis, bit))
        }
    }
}

fn state_for_index(idx: u8, encoding: Encoding) -> QubitState {
    let (basis, bit) = match idx {
        0 => (Basis::Z, 0),
        1 => (Basis::Z, 1),
        2 => (Basis::X, 0),
        _ => (Basis::X, 1),
    };
    prepare(bit, basis, encoding)
}

fn run_keyrate(config: &RunConfig, _seed: u64) -> Result<RunOutput> {
    let source = config.source.resolve()?;
    let (budget, _t) = channel_budget(config, &source)?;
    let kr = &config.keyrate;
    let rx = &config.receiver;
    let mu = effective_mu(&source);
    let eta = rx.detector(0).efficiency;
    let gate_s = rx.gate_width_ns * 1e-9;
    let dark_rate: f64 = (0..4).map(|ch| rx.detector(ch).dark_count_rate_hz).sum();

    // sifted gain per pulse at zero channel loss, and the loss-independent
    // dark floor whose bits are random
    let model = ChannelScalingModel {
        signal_gain: mu * eta * kr.sift_factor_q,
        signal_qber: rx.matched_error_probability(Encoding::Polarization),
        dark_gain: kr.sift_factor_q * dark_rate * gate_s,
    };
    let base = KeyRateParams {
        gain_q: model.at_loss(budget.total_db).0,
        qber_e: model.at_loss(budget.total_db).1,
        p_multi: 2.0 * source.p2,
        f_ec: kr.f_ec,
        sift_factor_q: kr.sift_factor_q,
        rep_rate_hz: source.rep_rate_hz,
    };
    let operating_rate = match gllp_rate(&base) {
        Ok(r) => r,
        Err(Error::Infeasible(_)) => 0.0,
        Err(e) => return Err(e),
    };

    let curve = rate_vs_loss(&base, &model, kr.max_extra_loss_db, kr.loss_steps)?;
    let mut rate_csv = String::from("loss_db,rate_bits_per_pulse,rate_bits_per_s\n");
    for &(loss, rate) in &curve {
        let _ = writeln!(rate_csv, "{},{},{}", loss, rate, rate * source.rep_rate_hz);
    }

    let fixed_db = budget.interface_db;
    let measured_prop = budget.propagation_db / config.fiber.length_km.max(f64::MIN_POSITIVE);
    let distances = distance_vs_prop_loss(&base, &model, &kr.prop_loss_grid_db_per_km, fixed_db)?;
    let mut dist_csv = String::from("prop_loss_db_per_km,max_distance_km\n");
    for &(alpha, d) in &distances {
        let _ = writeln!(dist_csv, "{},{}", alpha, d);
    }

    let d_measured = max_distance(&base, &model, measured_prop, fixed_db)?;
    let improved = config.fiber.improvement_scenario(
        kr.improved_prop_loss_db_per_km,
        kr.improved_interface_loss_db,
        window_index(
            source.wavelength_um,
            config.fiber.membrane_thickness_um,
            config.fiber.refractive_index,
        )?,
    )?;
    let improved_budget = channel_loss(&improved, source.wavelength_um)?;
    let d_improved = max_distance(
        &base,
        &model,
        kr.improved_prop_loss_db_per_km,
        improved_budget.interface_db,
    )?;

    let metrics = vec![
        Metric::exact("operating_rate_bits_per_pulse", operating_rate),
        Metric::exact(
            "operating_rate_bits_per_s",
            operating_rate * source.rep_rate_hz,
        ),
        Metric::exact("operating_gain", base.gain_q),
        Metric::exact("operating_qber", base.qber_e),
        Metric::exact("p_multi", base.p_multi),
        Metric::exact("total_loss_db", budget.total_db),
        Metric::exact("max_distance_measured_km", d_measured),
        Metric::exact("max_distance_improved_km", d_improved),
    ];
    Ok(RunOutput {
        scenario: config.scenario,
        name: config.name(),
        seed: config.seed,
        metrics,
        artifacts: vec![
            ("keyrate.csv".to_string(), rate_csv),
            ("distance.csv".to_string(), dist_csv),
        ],
    })
}

fn run_fiber_report(config: &RunConfig, _seed: u64) -> Result<RunOutput> {
    let fiber = &config.fiber;
    let source = config.source.resolve()?;
    let resonances = resonance_wavelengths(
        fiber.membrane_thickness_um,
        fiber.refractive_index,
        5,
    )?;
    let mut res_csv = String::from("order,wavelength_um\n");
    for (i, lam) in resonances.iter().enumerate() {
        let _ = writeln!(res_csv, "{},{}", i + 1, lam);
    }

    // the quantum channel wavelength plus the classical C-band reference
    let wavelengths = [source.wavelength_um, 1.55];
    let mut budget_csv = String::from(
        "wavelength_um,band,window,propagation_db,interface_db,total_db,transmittance\n",
    );
    let mut metrics = Vec::new();
    for &lam in &wavelengths {
        let window = window_index(lam, fiber.membrane_thickness_um, fiber.refractive_index)?;
        let budget = channel_loss(fiber, lam)?;
        let band = band_for(lam);
        let _ = writeln!(
            budget_csv,
            "{},{},{},{},{},{},{}",
            lam,
            band,
            window,
            budget.propagation_db,
            budget.interface_db,
            budget.total_db,
            db_to_transmittance(budget.total_db)
        );
        metrics.push(Metric::exact(
            &format!("total_loss_db_{band}"),
            budget.total_db,
        ));
        metrics.push(Metric::exact(&format!("window_{band}"), window as f64));
    }
    Ok(RunOutput {
        scenario: config.scenario,
        name: config.name(),
        seed: config.seed,
        metrics,
        artifacts: vec![
            ("resonances.csv".to_string(), res_csv),
            ("budget.csv".to_string(), budget_csv),
        ],
    })
}

/// Parse a `channel,timestamp_ps` CSV back into a time-tag stream. The
/// duration is taken as the last timestamp (the stream carries no clock
/// metadata).
pub fn read_time_tags(path: &Path) -> Result<TimeTagStream> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with("channel") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Config {
            key: format!("{}:{}", path.display(), i + 1),
            message,
        };
        let (ch_text, t_text) = line
            .split_once(',')
            .ok_or_else(|| bad("expected `channel,timestamp_ps`".into()))?;
        let ch: u8 = ch_text
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad channel: {e}")))?;
        let t: i64 = t_text
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad timestamp: {e}")))?;
        records.push((ch, t));
    }
    let duration_ps = records.iter().map(|&(_, t)| t).max().unwrap_or(0);
    let stream = TimeTagStream {
        records,
        duration_ps,
    };
    stream.assert_sorted()?;
    Ok(stream)
}

/// Correlate channels 0 and 1 of a recorded stream and extract g2(0):
/// the offline analysis path for externally recorded tags.
pub fn analyze_stream(
    stream: &TimeTagStream,
    analysis: &AnalysisConfig,
    rep_period_ps: i64,
) -> Result<RunOutput> {
    let h = histogram(
        &stream.channel(0),
        &stream.channel(1),
        analysis.bin_width_ps,
        analysis.span_ps,
        rep_period_ps,
    )?;
    let areas = peak_areas(&h, analysis.window_ps)?;
    let (exclude, _) = included_orders(analysis, rep_period_ps, &[])?;
    let (g2, sigma) = g2_zero(&areas, &exclude)?;
    let (vis, vis_sigma) = hom_visibility(&areas, &exclude)?;
    Ok(RunOutput {
        scenario: ScenarioKind::Hbt,
        name: "analyze".into(),
        seed: 0,
        metrics: vec![
            Metric::with_sigma("g2_zero", g2, sigma),
            Metric::with_sigma("hom_visibility", vis, vis_sigma),
            Metric::exact("central_area", areas.central as f64),
            Metric::exact("total_counts", h.total_counts() as f64),
        ],
        artifacts: vec![("histogram.csv".to_string(), histogram_csv(&h))],
    })
}

/// Parse a `summary.csv` back into metrics.
pub fn read_summary(path: &Path) -> Result<Vec<Metric>> {
    let text = std::fs::read_to_string(path)?;
    let mut metrics = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Config {
                key: format!("{}:{}", path.display(), i + 1),
                message: "expected `metric,value,sigma`".into(),
            });
        }
        let value: f64 = parts[1].trim().parse().map_err(|e| Error::Config {
            key: format!("{}:{}", path.display(), i + 1),
            message: format!("bad value: {e}"),
        })?;
        let sigma: f64 = parts[2].trim().parse().map_err(|e| Error::Config {
            key: format!("{}:{}", path.display(), i + 1),
            message: format!("bad sigma: {e}"),
        })?;
        metrics.push(Metric {
            name: parts[0].trim().to_string(),
            value,
            sigma,
        });
    }
    Ok(metrics)
}

/// Compare two summaries metric by metric: the difference in combined
/// standard deviations between runs. Returns the comparison CSV and the
/// largest z-score over statistical metrics (exact metrics that differ
/// yield infinity).
pub fn compare_summaries(a: &[Metric], b: &[Metric]) -> (String, f64) {
    let mut out = String::from("metric,value_a,value_b,diff,z_score\n");
    let mut worst = 0.0f64;
    for ma in a {
        let Some(mb) = b.iter().find(|m| m.name == ma.name) else {
            continue;
        };
        let diff = mb.value - ma.value;
        let combined = (ma.sigma * ma.sigma + mb.sigma * mb.sigma).sqrt();
        let z = if combined > 0.0 {
            diff.abs() / combined
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ma.name != "seed" {
            worst = worst.max(z);
        }
        let _ = writeln!(out, "{},{},{},{},{}", ma.name, ma.value, mb.value, diff, z);
    }
    (out, worst)
}
