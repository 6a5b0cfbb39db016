//! Decoy-state BB84 physical layer simulation.
//!
//! Alice's source emits weak coherent pulses in one of three intensity
//! classes. Photons are thinned by the channel one at a time, Bob's threshold
//! detector clicks on any surviving photon or a dark count, and the outcome
//! follows the BB84 measurement rule with an extra bit-flip channel.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OpticsError {
    #[error("invalid optical configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityClass {
    Signal,
    Decoy,
    Vacuum,
}

impl IntensityClass {
    pub const ALL: [IntensityClass; 3] = [Self::Signal, Self::Decoy, Self::Vacuum];

    pub fn index(self) -> usize {
        match self {
            Self::Signal => 0,
            Self::Decoy => 1,
            Self::Vacuum => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Self::ALL.get(i as usize).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalConfig {
    /// Mean photon number of signal pulses.
    pub mu: f64,
    /// Mean photon number of decoy pulses.
    pub nu: f64,
    pub p1: f64,
    pub p2: f64,
    pub attenuation_db: f64,
    pub p_dark: f64,
    pub p_e: f64,
    /// Only used to convert sessions into a bit rate.
    pub pulse_rate_hz: f64,
    /// Overrides the physical expectation used by the click-ratio check,
    /// indexed signal, decoy, vacuum.
    pub expected_click_ratio: Option<[f64; 3]>,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        OpticalConfig {
            mu: 0.5,
            nu: 0.1,
            p1: 0.7,
            p2: 0.2,
            attenuation_db: 10.0,
            p_dark: 1e-5,
            p_e: 0.01,
            pulse_rate_hz: 2.5e8,
            expected_click_ratio: None,
        }
    }
}

impl OpticalConfig {
    pub fn noiseless() -> Self {
        OpticalConfig {
            attenuation_db: 0.0,
            p_dark: 0.0,
            p_e: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        let bad = |m: &str| Err(OpticsError::InvalidConfig(m.to_string()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.p1) || !unit(self.p2) || self.p1 + self.p2 > 1.0 + 1e-12 {
            return bad("need 0 <= p1, p2 and p1 + p2 <= 1");
        }
        if !(self.nu >= 0.0 && self.mu > self.nu) {
            return bad("need mu > nu >= 0");
        }
        if !unit(self.p_dark) || !unit(self.p_e) {
            return bad("p_dark and p_e must lie in [0, 1]");
        }
        if !(self.attenuation_db >= 0.0) {
            return bad("attenuation_db must be >= 0");
        }
        if !(self.pulse_rate_hz > 0.0) {
            return bad("pulse_rate_hz must be positive");
        }
        Ok(())
    }

    /// Per-photon survival probability 10^(-A/10).
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.attenuation_db / 10.0)
    }

    pub fn mean_photons(&self, class: IntensityClass) -> f64 {
        match class {
            IntensityClass::Signal => self.mu,
            IntensityClass::Decoy => self.nu,
            IntensityClass::Vacuum => 0.0,
        }
    }

    pub fn class_probability(&self, class: IntensityClass) -> f64 {
        match class {
            IntensityClass::Signal => self.p1,
            IntensityClass::Decoy => self.p2,
            IntensityClass::Vacuum => (1.0 - self.p1 - self.p2).max(0.0),
        }
    }

    /// Click probability under the multiplicative loss model:
    /// 1 - (1 - p_dark) exp(-mean * eta).
    pub fn physical_click_ratio(&self, class: IntensityClass) -> f64 {
        let eta = self.transmittance();
        1.0 - (1.0 - self.p_dark) * (-self.mean_photons(class) * eta).exp()
    }

    /// Click ratio Alice expects per class: the override when configured,
    /// the physical model otherwise.
    pub fn expected_click_ratio(&self, class: IntensityClass) -> f64 {
        match self.expected_click_ratio {
            Some(r) => r[class.index()],
            None => self.physical_click_ratio(class),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PulseRecord {
    pub round_index: u64,
    pub intensity_class: IntensityClass,
    pub x: bool,
    pub theta: bool,
    pub photon_count: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetectionEvent {
    pub round_index: u64,
    pub clicked: bool,
    pub theta_tilde: bool,
    /// `None` exactly when the detector did not click.
    pub x_tilde: Option<bool>,
    /// Photons that reached the detector. Simulation metadata; a threshold
    /// detector cannot resolve it, but adversary models can.
    pub photons_arrived: u32,
    /// Whether the noise channel flipped the outcome. Simulation metadata.
    pub flipped: bool,
}

/// Optical source and channel with the Poisson samplers prebuilt.
#[derive(Clone, Debug)]
pub struct OpticalLink {
    config: OpticalConfig,
    eta: f64,
    signal: Option<Poisson<f64>>,
    decoy: Option<Poisson<f64>>,
}

impl OpticalLink {
    pub fn new(config: OpticalConfig) -> Result<Self, OpticsError> {
        config.validate()?;
        let sampler = |mean: f64| {
            if mean > 0.0 {
                Some(Poisson::new(mean).expect("positive finite mean"))
            } else {
                None
            }
        };
        Ok(OpticalLink {
            eta: config.transmittance(),
            signal: sampler(config.mu),
            decoy: sampler(config.nu),
            config,
        })
    }

    pub fn config(&self) -> &OpticalConfig {
        &self.config
    }

    pub fn sample_class<R: Rng + ?Sized>(&self, rng: &mut R) -> IntensityClass {
        let u: f64 = rng.random();
        if u < self.config.p1 {
            IntensityClass::Signal
        } else if u < self.config.p1 + self.config.p2 {
            IntensityClass::Decoy
        } else {
            IntensityClass::Vacuum
        }
    }

    pub fn sample_photons<R: Rng + ?Sized>(&self, class: IntensityClass, rng: &mut R) -> u32 {
        let dist = match class {
            IntensityClass::Signal => &self.signal,
            IntensityClass::Decoy => &self.decoy,
            IntensityClass::Vacuum => &None,
        };
        dist.as_ref().map_or(0, |d| d.sample(rng) as u32)
    }

    pub fn emit_in_class<R: Rng + ?Sized>(
        &self,
        round_index: u64,
        class: IntensityClass,
        x: bool,
        theta: bool,
        rng: &mut R,
    ) -> PulseRecord {
        PulseRecord {
            round_index,
            intensity_class: class,
            x,
            theta,
            photon_count: self.sample_photons(class, rng),
        }
    }

    pub fn emit_pulse<R: Rng + ?Sized>(
        &self,
        round_index: u64,
        x: bool,
        theta: bool,
        rng: &mut R,
    ) -> PulseRecord {
        let class = self.sample_class(rng);
        self.emit_in_class(round_index, class, x, theta, rng)
    }

    /// Photons surviving the channel, each kept independently with
    /// probability eta.
    pub fn attenuate<R: Rng + ?Sized>(&self, photons: u32, rng: &mut R) -> u32 {
        if self.eta >= 1.0 {
            return photons;
        }
        (0..photons).filter(|_| rng.random::<f64>() < self.eta).count() as u32
    }

    /// Threshold detection of `arrived` photons measured in basis
    /// `theta_tilde`.
    pub fn detect<R: Rng + ?Sized>(
        &self,
        pulse: &PulseRecord,
        arrived: u32,
        theta_tilde: bool,
        rng: &mut R,
    ) -> DetectionEvent {
        let dark = self.config.p_dark > 0.0 && rng.random::<f64>() < self.config.p_dark;
        let clicked = arrived > 0 || dark;
        let mut flipped = false;
        let x_tilde = if !clicked {
            None
        } else {
            let ideal = if arrived == 0 || pulse.theta != theta_tilde {
                rng.random::<bool>()
            } else {
                pulse.x
            };
            flipped = self.config.p_e > 0.0 && rng.random::<f64>() < self.config.p_e;
            Some(ideal ^ flipped)
        };
        DetectionEvent {
            round_index: pulse.round_index,
            clicked,
            theta_tilde,
            x_tilde,
            photons_arrived: arrived,
            flipped,
        }
    }

    pub fn transmit_and_detect<R: Rng + ?Sized>(
        &self,
        pulse: &PulseRecord,
        theta_tilde: bool,
        rng: &mut R,
    ) -> DetectionEvent {
        let arrived = self.attenuate(pulse.photon_count, rng);
        self.detect(pulse, arrived, theta_tilde, rng)
    }
}

pub fn emit_pulse<R: Rng + ?Sized>(
    config: &OpticalConfig,
    x: bool,
    theta: bool,
    rng: &mut R,
) -> Result<PulseRecord, OpticsError> {
    Ok(OpticalLink::new(config.clone())?.emit_pulse(0, x, theta, rng))
}

pub fn transmit_and_detect<R: Rng + ?Sized>(
    pulse: &PulseRecord,
    theta_tilde: bool,
    config: &OpticalConfig,
    rng: &mut R,
) -> Result<DetectionEvent, OpticsError> {
    Ok(OpticalLink::new(config.clone())?.transmit_and_detect(pulse, theta_tilde, rng))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    pub rounds: u64,
    pub clicks: u64,
}

impl ClassCount {
    pub fn ratio(&self) -> Option<f64> {
        (self.rounds > 0).then(|| self.clicks as f64 / self.rounds as f64)
    }
}

/// Click counts per intensity class, indexed by `IntensityClass::index`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickStats {
    pub classes: [ClassCount; 3],
}

impl ClickStats {
    pub fn record(&mut self, class: IntensityClass, clicked: bool) {
        let c = &mut self.classes[class.index()];
        c.rounds += 1;
        c.clicks += clicked as u64;
    }

    pub fn get(&self, class: IntensityClass) -> ClassCount {
        self.classes[class.index()]
    }

    pub fn ratio(&self, class: IntensityClass) -> Option<f64> {
        self.get(class).ratio()
    }
}

/// Per-class click ratio over aligned events and class labels.
pub fn click_ratio_stats(events: &[DetectionEvent], classes: &[IntensityClass]) -> ClickStats {
    assert_eq!(events.len(), classes.len(), "events and labels must be aligned");
    let mut stats = ClickStats::default();
    for (e, c) in events.iter().zip(classes) {
        stats.record(*c, e.clicked);
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn three_sigma(p: f64, n: f64) -> f64 {
        3.0 * (p * (1.0 - p) / n).sqrt()
    }

    #[test]
    fn vacuum_pulses_carry_no_photons() {
        let link = OpticalLink::new(OpticalConfig::default()).unwrap();
        let mut rng = SeedTree::new(1).rng();
        for i in 0..10_000 {
            let p = link.emit_in_class(i, IntensityClass::Vacuum, true, false, &mut rng);
            assert_eq!(p.photon_count, 0);
        }
    }

    #[test]
    fn signal_mean_photon_number() {
        let link = OpticalLink::new(OpticalConfig::default()).unwrap();
        let mut rng = SeedTree::new(2).rng();
        let n = 1_000_000;
        let total: u64 = (0..n)
            .map(|i| link.emit_in_class(i, IntensityClass::Signal, false, false, &mut rng).photon_count as u64)
            .sum();
        let mean = total as f64 / n as f64;
        // Poisson variance equals the mean.
        assert!((mean - 0.5).abs() < 3.0 * (0.5f64 / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn p1_one_means_all_signal() {
        let cfg = OpticalConfig { p1: 1.0, p2: 0.0, ..Default::default() };
        let link = OpticalLink::new(cfg).unwrap();
        let mut rng = SeedTree::new(3).rng();
        assert!((0..10_000).all(|i| link.emit_pulse(i, false, false, &mut rng).intensity_class == IntensityClass::Signal));
    }

    #[test]
    fn noiseless_matched_single_photon() {
        let link = OpticalLink::new(OpticalConfig::noiseless()).unwrap();
        let mut rng = SeedTree::new(4).rng();
        for i in 0..1000 {
            let x = i % 2 == 0;
            let theta = i % 3 == 0;
            let p = PulseRecord { round_index: i, intensity_class: IntensityClass::Signal, x, theta, photon_count: 1 };
            let e = link.transmit_and_detect(&p, theta, &mut rng);
            assert!(e.clicked);
            assert_eq!(e.x_tilde, Some(x));
        }
    }

    #[test]
    fn empty_pulse_without_dark_counts_never_clicks() {
        let link = OpticalLink::new(OpticalConfig::noiseless()).unwrap();
        let mut rng = SeedTree::new(5).rng();
        let p = PulseRecord { round_index: 0, intensity_class: IntensityClass::Signal, x: true, theta: true, photon_count: 0 };
        for _ in 0..1000 {
            let e = link.transmit_and_detect(&p, true, &mut rng);
            assert!(!e.clicked);
            assert_eq!(e.x_tilde, None);
        }
    }

    #[test]
    fn ten_db_single_photon_click_fraction() {
        let cfg = OpticalConfig { attenuation_db: 10.0, p_dark: 0.0, ..Default::default() };
        let link = OpticalLink::new(cfg).unwrap();
        let mut rng = SeedTree::new(6).rng();
        let n = 1_000_000u64;
        let p = PulseRecord { round_index: 0, intensity_class: IntensityClass::Signal, x: false, theta: false, photon_count: 1 };
        let clicks = (0..n).filter(|_| link.transmit_and_detect(&p, false, &mut rng).clicked).count();
        let frac = clicks as f64 / n as f64;
        assert!((frac - 0.1).abs() < three_sigma(0.1, n as f64), "fraction {frac}");
    }

    #[test]
    fn basis_statistics() {
        let cfg = OpticalConfig { attenuation_db: 0.0, p_dark: 0.0, p_e: 0.05, ..Default::default() };
        let link = OpticalLink::new(cfg).unwrap();
        let mut rng = SeedTree::new(7).rng();
        let (mut mism, mut mism_eq, mut mat, mut mat_err) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..400_000u64 {
            let (x, theta, tt): (bool, bool, bool) = (rng.random(), rng.random(), rng.random());
            let p = PulseRecord { round_index: i, intensity_class: IntensityClass::Signal, x, theta, photon_count: 1 };
            let e = link.transmit_and_detect(&p, tt, &mut rng);
            let xt = e.x_tilde.unwrap();
            if theta == tt {
                mat += 1;
                mat_err += (xt != x) as u64;
            } else {
                mism += 1;
                mism_eq += (xt == x) as u64;
            }
        }
        let f = mism_eq as f64 / mism as f64;
        assert!((f - 0.5).abs() < three_sigma(0.5, mism as f64), "mismatch agreement {f}");
        let g = mat_err as f64 / mat as f64;
        assert!((g - 0.05).abs() < three_sigma(0.05, mat as f64), "matched error {g}");
    }

    #[test]
    fn click_ratio_counting() {
        let ev = |clicked| DetectionEvent { round_index: 0, clicked, theta_tilde: false, x_tilde: clicked.then_some(false), photons_arrived: 0, flipped: false };
        let events: Vec<_> = (0..10).map(|i| ev(i < 3)).collect();
        let classes = vec![IntensityClass::Decoy; 10];
        let s = click_ratio_stats(&events, &classes);
        assert_eq!(s.ratio(IntensityClass::Decoy), Some(0.3));
        assert_eq!(s.ratio(IntensityClass::Signal), None);

        let all = click_ratio_stats(&vec![ev(true); 4], &[IntensityClass::Signal, IntensityClass::Decoy, IntensityClass::Vacuum, IntensityClass::Signal]);
        assert!(IntensityClass::ALL.iter().all(|c| all.ratio(*c) == Some(1.0)));
        let none = click_ratio_stats(&vec![ev(false); 3], &IntensityClass::ALL);
        assert!(IntensityClass::ALL.iter().all(|c| none.ratio(*c) == Some(0.0)));
    }

    #[test]
    fn deterministic_streams() {
        let link = OpticalLink::new(OpticalConfig::default()).unwrap();
        let run = || {
            let mut rng = SeedTree::new(99).rng();
            (0..500u64)
                .map(|i| {
                    let p = link.emit_pulse(i, i % 2 == 0, i % 5 == 0, &mut rng);
                    (p, link.transmit_and_detect(&p, i % 3 == 0, &mut rng))
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(OpticalConfig { p1: 0.8, p2: 0.3, ..Default::default() }.validate().is_err());
        assert!(OpticalConfig { nu: 0.6, ..Default::default() }.validate().is_err());
        assert!(OpticalConfig { attenuation_db: -1.0, ..Default::default() }.validate().is_err());
    }
}
