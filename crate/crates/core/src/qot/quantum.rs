//! The pulse-level phase: emission, channel, detection, and the split into
//! what each party is allowed to see.

use rand::Rng;

use crate::bits::Bits;
use crate::optics::{ClickStats, IntensityClass, OpticalConfig, OpticalLink};
use crate::rng::{streams, SeedTree};

use super::{ProtocolParams, QotError};

/// Alice's record of every emitted pulse.
#[derive(Clone, Debug)]
pub struct SourceRecord {
    pub classes: Vec<IntensityClass>,
    pub x: Bits,
    pub theta: Bits,
}

/// Bob's record of every pulse slot. `x_tilde` is zero where no click.
#[derive(Clone, Debug)]
pub struct DetectorRecord {
    pub clicks: Bits,
    pub theta_tilde: Bits,
    pub x_tilde: Bits,
}

/// Simulation-only ground truth that neither party can observe.
#[derive(Clone, Debug)]
pub struct ChannelTruth {
    pub photons_emitted: Vec<u32>,
    pub photons_arrived: Vec<u32>,
    pub flipped: Bits,
}

#[derive(Clone, Debug)]
pub struct PulseRun {
    pub source: SourceRecord,
    pub detector: DetectorRecord,
    pub truth: ChannelTruth,
}

/// Emit `pulses` pulses and detect them. Alice's choices, photon numbers,
/// channel noise and Bob's bases come from separate streams under `tree`.
pub fn simulate_pulses(link: &OpticalLink, pulses: usize, tree: &SeedTree) -> PulseRun {
    let mut alice = tree.child(streams::ALICE).stream("source");
    let mut photons = tree.stream(streams::OPTICS_SOURCE);
    let mut channel = tree.stream(streams::OPTICS_CHANNEL);
    let mut bob = tree.child(streams::BOB).stream("basis");

    let mut classes = Vec::with_capacity(pulses);
    let mut x = Bits::zeros(pulses);
    let mut theta = Bits::zeros(pulses);
    let mut clicks = Bits::zeros(pulses);
    let mut theta_tilde = Bits::zeros(pulses);
    let mut x_tilde = Bits::zeros(pulses);
    let mut flipped = Bits::zeros(pulses);
    let mut emitted = Vec::with_capacity(pulses);
    let mut arrived = Vec::with_capacity(pulses);

    for i in 0..pulses {
        let class = link.sample_class(&mut alice);
        let (xi, ti): (bool, bool) = (alice.random(), alice.random());
        let pulse = link.emit_in_class(i as u64, class, xi, ti, &mut photons);
        let tt: bool = bob.random();
        let a = link.attenuate(pulse.photon_count, &mut channel);
        let ev = link.detect(&pulse, a, tt, &mut channel);

        classes.push(class);
        x.set(i, xi);
        theta.set(i, ti);
        theta_tilde.set(i, tt);
        clicks.set(i, ev.clicked);
        x_tilde.set(i, ev.x_tilde.unwrap_or(false));
        flipped.set(i, ev.flipped);
        emitted.push(pulse.photon_count);
        arrived.push(a);
    }
    PulseRun {
        source: SourceRecord { classes, x, theta },
        detector: DetectorRecord { clicks, theta_tilde, x_tilde },
        truth: ChannelTruth { photons_emitted: emitted, photons_arrived: arrived, flipped },
    }
}

/// Per-class click counts given Alice's labels and Bob's click bitmap.
pub fn click_stats(classes: &[IntensityClass], clicks: &Bits) -> ClickStats {
    assert_eq!(classes.len(), clicks.len());
    let mut s = ClickStats::default();
    for (i, c) in classes.iter().enumerate() {
        s.record(*c, clicks.get(i));
    }
    s
}

/// The first `n` clicked signal pulses, in order.
pub fn select_signal_rounds(classes: &[IntensityClass], clicks: &Bits, n: usize) -> Result<Vec<usize>, QotError> {
    let rounds: Vec<usize> = clicks
        .iter_ones()
        .filter(|&i| classes[i] == IntensityClass::Signal)
        .take(n)
        .collect();
    if rounds.len() < n {
        return Err(QotError::InsufficientClicks { needed: n, got: rounds.len() });
    }
    Ok(rounds)
}

/// Aligned per-round views after sifting.
#[derive(Clone, Debug)]
pub struct QuantumPhase {
    /// Pulse index of each retained round.
    pub rounds: Vec<usize>,
    pub x: Bits,
    pub theta: Bits,
    pub x_tilde: Bits,
    pub theta_tilde: Bits,
    pub stats: ClickStats,
}

/// Simulate, keep the first `n` clicked signal rounds and project both
/// parties' records onto them.
pub fn run_quantum_phase(params: &ProtocolParams, optical: &OpticalConfig, tree: &SeedTree) -> Result<QuantumPhase, QotError> {
    let link = OpticalLink::new(optical.clone())?;
    let run = simulate_pulses(&link, params.total_pulses, tree);
    let stats = click_stats(&run.source.classes, &run.detector.clicks);
    let rounds = select_signal_rounds(&run.source.classes, &run.detector.clicks, params.n)?;
    Ok(QuantumPhase {
        x: run.source.x.select(&rounds),
        theta: run.source.theta.select(&rounds),
        x_tilde: run.detector.x_tilde.select(&rounds),
        theta_tilde: run.detector.theta_tilde.select(&rounds),
        rounds,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_noiseless_retains_every_clicked_signal() {
        let params = ProtocolParams { n: 100, total_pulses: 1000, ..ProtocolParams::default() };
        let cfg = OpticalConfig { attenuation_db: 0.0, ..OpticalConfig::noiseless() };
        let link = OpticalLink::new(cfg.clone()).unwrap();
        let tree = SeedTree::new(3);
        let run = simulate_pulses(&link, 1000, &tree);
        let clicked_signal = run
            .detector
            .clicks
            .iter_ones()
            .filter(|&i| run.source.classes[i] == IntensityClass::Signal)
            .count();
        let all = select_signal_rounds(&run.source.classes, &run.detector.clicks, clicked_signal).unwrap();
        assert_eq!(all.len(), clicked_signal);
        for &i in &all {
            assert!(run.truth.photons_emitted[i] > 0);
        }
        let q = run_quantum_phase(&params, &cfg, &tree).unwrap();
        for j in 0..params.n {
            if q.theta.get(j) == q.theta_tilde.get(j) {
                assert_eq!(q.x.get(j), q.x_tilde.get(j));
            }
        }
    }

    #[test]
    fn retained_fraction_at_ten_db() {
        let cfg = OpticalConfig { p_dark: 0.0, ..OpticalConfig::default() };
        let link = OpticalLink::new(cfg.clone()).unwrap();
        let run = simulate_pulses(&link, 100_000, &SeedTree::new(4));
        let s = click_stats(&run.source.classes, &run.detector.clicks).get(IntensityClass::Signal);
        let p = 1.0 - (-0.1f64 * 0.5).exp();
        let f = s.clicks as f64 / s.rounds as f64;
        assert!((f - p).abs() < 3.0 * (p * (1.0 - p) / s.rounds as f64).sqrt(), "{f} vs {p}");
    }

    #[test]
    fn too_few_pulses_is_an_error() {
        let params = ProtocolParams { n: 2044, total_pulses: 5000, ..ProtocolParams::default() };
        let err = run_quantum_phase(&params, &OpticalConfig::default(), &SeedTree::new(5)).unwrap_err();
        assert!(matches!(err, QotError::InsufficientClicks { needed: 2044, .. }));
    }
}
