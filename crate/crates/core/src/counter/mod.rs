//! Single-microwave-photon detector: per-cycle click sampling with dark
//! counts, count statistics and the signal-to-noise ratios of fluorescence
//! and echo detection.
//!
//! Sequence `k` draws from a ChaCha8 generator seeded with the master seed
//! and switched to stream `k`, so every sequence is reproducible on its own
//! and independent of how sequences are scheduled.

mod io;

pub use io::{read_clicks, write_clicks, write_histogram_csv, write_stream_csv, ClickFile};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check, invalid, Result};
use crate::fluorescence::FluorescenceCurve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterConfig {
    pub cycle_duration: f64,
    /// Background clicks per second.
    pub dark_rate: f64,
    pub dead_time: f64,
    pub t_rep: f64,
}

impl CounterConfig {
    pub fn new(dark_rate: f64, t_rep: f64) -> Self {
        CounterConfig { cycle_duration: 12e-6, dark_rate, dead_time: 50e-6, t_rep }
    }

    pub fn validate(&self) -> Result<()> {
        check("cycle_duration", self.cycle_duration, self.cycle_duration > 0.0, "must be > 0")?;
        check("dark_rate", self.dark_rate, self.dark_rate >= 0.0, "must be >= 0")?;
        check("dead_time", self.dead_time, self.dead_time >= 0.0, "must be >= 0")?;
        check("t_rep", self.t_rep, self.t_rep > self.dead_time, "must exceed the dead time")
    }

    /// Detection cycles between the dead time and the next pulse.
    pub fn n_cycles(&self) -> usize {
        ((self.t_rep - self.dead_time) / self.cycle_duration + 1e-9).floor() as usize
    }

    pub fn cycle_start(&self, i: usize) -> f64 {
        self.dead_time + i as f64 * self.cycle_duration
    }
}

/// Binary detector outcomes of one sequence, one bit per cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickStream {
    pub sequence: u64,
    pub n_cycles: usize,
    words: Vec<u64>,
}

impl ClickStream {
    pub fn zeros(sequence: u64, n_cycles: usize) -> Self {
        ClickStream { sequence, n_cycles, words: vec![0; n_cycles.div_ceil(64)] }
    }

    pub fn from_words(sequence: u64, n_cycles: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != n_cycles.div_ceil(64) {
            return Err(invalid("words", "length does not match the cycle count"));
        }
        Ok(ClickStream { sequence, n_cycles, words })
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    /// Clicks in cycles `[a, b)`.
    pub fn count(&self, a: usize, b: usize) -> u64 {
        let b = b.min(self.n_cycles);
        (a..b).filter(|&i| self.get(i)).count() as u64
    }
}

/// Whether any cycle came close to saturating the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub max_probability: f64,
    /// Some cycle had a click probability above 1/2.
    pub saturated: bool,
}

fn stream_rng(seed: u64, sequence: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sequence);
    rng
}

/// Per-cycle click probabilities `1 − exp(−∫(rate + α) dt)` for `curve`.
pub fn click_probabilities(curve: &FluorescenceCurve, config: &CounterConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let (t0, t1) = curve.extent();
    if t0 > config.dead_time || t1 < config.t_rep * (1.0 - 1e-12) {
        return Err(invalid("curve", format!("must cover [{}, {}] s, covers [{t0}, {t1}]", config.dead_time, config.t_rep)));
    }
    Ok((0..config.n_cycles())
        .map(|i| {
            let a = config.cycle_start(i);
            let mean = curve.integral(a, a + config.cycle_duration) + config.dark_rate * config.cycle_duration;
            -(-mean).exp_m1()
        })
        .collect())
}

/// Independent Bernoulli clicks with the given per-cycle probabilities.
pub fn sample_bernoulli(p: &[f64], n_sequences: usize, seed: u64) -> Vec<ClickStream> {
    // compare raw 64-bit draws against p·2⁶⁴
    let thresholds: Vec<u64> = p.iter().map(|&x| if x >= 1.0 { u64::MAX } else { (x * 2f64.powi(64)) as u64 }).collect();
    (0..n_sequences as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k);
            let mut s = ClickStream::zeros(k, p.len());
            for (i, &th) in thresholds.iter().enumerate() {
                if rng.next_u64() < th {
                    s.set(i);
                }
            }
            s
        })
        .collect()
}

/// Click streams for `n_sequences` repetitions of the expected count rate
/// `curve`. Deterministic for a given `seed`.
pub fn sample_clicks(
    curve: &FluorescenceCurve,
    config: &CounterConfig,
    n_sequences: usize,
    seed: u64,
) -> Result<(Vec<ClickStream>, SamplingReport)> {
    let p = click_probabilities(curve, config)?;
    let max_probability = p.iter().copied().fold(0.0, f64::max);
    Ok((sample_bernoulli(&p, n_sequences, seed), SamplingReport { max_probability, saturated: max_probability > 0.5 }))
}

/// `n_spins` identical spins, each excited with probability `excitation`,
/// relaxing at `gamma1` and emitting a photon with probability
/// `gamma_r/gamma1`, detected with efficiency `eta`. Unlike the expected
/// rate curve this keeps the binomial partition noise of a finite ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyEnsemble {
    pub n_spins: u64,
    pub excitation: f64,
    pub gamma_r: f64,
    pub gamma1: f64,
    pub eta: f64,
}

impl ToyEnsemble {
    /// Probability that a given spin produces a click after the dead time
    /// and before `t`.
    pub fn click_probability(&self, t_d: f64, t: f64) -> f64 {
        self.excitation * self.eta * self.gamma_r / self.gamma1 * ((-self.gamma1 * t_d).exp() - (-self.gamma1 * t).exp())
    }
}

/// Photon-by-photon sampling of a [`ToyEnsemble`] plus dark clicks drawn
/// as a Poisson process, so a cycle clicks when at least one event falls
/// inside it.
pub fn sample_toy_ensemble(ens: &ToyEnsemble, config: &CounterConfig, n_sequences: usize, seed: u64) -> Result<Vec<ClickStream>> {
    config.validate()?;
    check("excitation", ens.excitation, (0.0..=1.0).contains(&ens.excitation), "must be in [0, 1]")?;
    check("eta", ens.eta, (0.0..=1.0).contains(&ens.eta), "must be in [0, 1]")?;
    check("gamma1", ens.gamma1, ens.gamma1 > 0.0 && ens.gamma_r <= ens.gamma1, "must be > 0 and >= gamma_r")?;
    let n = config.n_cycles();
    let window = n as f64 * config.cycle_duration;
    let p_photon = ens.excitation * ens.eta * ens.gamma_r / ens.gamma1;
    let emitters = Binomial::new(ens.n_spins, p_photon).map_err(|e| invalid("n_spins", e.to_string()))?;
    let decay = Exp::new(ens.gamma1).map_err(|e| invalid("gamma1", e.to_string()))?;
    let dark = (config.dark_rate > 0.0).then(|| Exp::new(config.dark_rate).expect("positive rate"));
    Ok((0..n_sequences as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k);
            let mut s = ClickStream::zeros(k, n);
            let mut mark = |t: f64| {
                if t >= 0.0 && t < window {
                    s.set(((t / config.cycle_duration) as usize).min(n - 1));
                }
            };
            for _ in 0..emitters.sample(&mut rng) {
                let t: f64 = decay.sample(&mut rng);
                mark(t - config.dead_time);
            }
            if let Some(d) = dark {
                let mut t = d.sample(&mut rng);
                while t < window {
                    mark(t);
                    t += d.sample(&mut rng);
                }
            }
            s
        })
        .collect())
}

/// Count rate averaged over windows of `t_b` starting at the dead time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTrace {
    /// Window start times, s.
    pub times: Vec<f64>,
    /// counts/s
    pub rate: Vec<f64>,
    pub window: f64,
    /// `t_b` was not a whole number of cycles and was shortened.
    pub snapped: bool,
}

pub fn coarse_grain(streams: &[ClickStream], config: &CounterConfig, t_b: f64) -> Result<RateTrace> {
    config.validate()?;
    check("t_b", t_b, t_b >= config.cycle_duration * (1.0 - 1e-9), "must be at least one cycle")?;
    if streams.is_empty() {
        return Err(invalid("streams", "need at least one stream"));
    }
    let exact = t_b / config.cycle_duration;
    let m = (exact + 1e-9).floor() as usize;
    let snapped = (exact - m as f64).abs() > 1e-6;
    let window = m as f64 * config.cycle_duration;
    let n = streams.iter().map(|s| s.n_cycles).min().unwrap_or(0);
    let n_bins = n / m;
    let rate = (0..n_bins)
        .map(|j| {
            let clicks: u64 = streams.iter().map(|s| s.count(j * m, (j + 1) * m)).sum();
            clicks as f64 / streams.len() as f64 / window
        })
        .collect();
    let times = (0..n_bins).map(|j| config.cycle_start(j * m)).collect();
    Ok(RateTrace { times, rate, window, snapped })
}

/// Per-sequence counts over an integration window and their spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountHistogram {
    pub counts: Vec<u64>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
}

impl CountHistogram {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<u64>() as f64 / n.max(1.0);
        let var = if counts.len() > 1 {
            counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        CountHistogram { counts, mean, std: var.sqrt() }
    }

    /// `(C, probability)` for every count value from 0 to the maximum.
    pub fn probabilities(&self) -> Vec<(u64, f64)> {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let mut h = vec![0usize; max as usize + 1];
        for &c in &self.counts {
            h[c as usize] += 1;
        }
        let n = self.counts.len().max(1) as f64;
        h.into_iter().enumerate().map(|(c, k)| (c as u64, k as f64 / n)).collect()
    }
}

/// Counts in the whole cycles that fit in the first `t_int` after the
/// dead time, for every stream.
pub fn count_statistics(streams: &[ClickStream], config: &CounterConfig, t_int: f64) -> Result<CountHistogram> {
    let cycles = (t_int / config.cycle_duration + 1e-9).floor() as usize;
    if let Some(s) = streams.iter().find(|s| s.n_cycles < cycles) {
        return Err(invalid("t_int", format!("exceeds stream {} ({} cycles)", s.sequence, s.n_cycles)));
    }
    Ok(CountHistogram::from_counts(streams.iter().map(|s| s.count(0, cycles)).collect()))
}

/// One-shot fluorescence SNR `ηN / √(α/Γ_R + η(1−η)N)`.
pub fn fd_snr(n_spins: f64, gamma_r: f64, dark_rate: f64, eta: f64) -> Result<f64> {
    check("n_spins", n_spins, n_spins >= 0.0, "must be >= 0")?;
    check("gamma_r", gamma_r, gamma_r > 0.0, "must be > 0")?;
    check("dark_rate", dark_rate, dark_rate >= 0.0, "must be >= 0")?;
    check("eta", eta, (0.0..=1.0).contains(&eta), "must be in [0, 1]")?;
    if n_spins == 0.0 {
        return Ok(0.0);
    }
    let var = dark_rate / gamma_r + eta * (1.0 - eta) * n_spins;
    if var == 0.0 {
        // noiseless detection: every spin is counted
        return Ok(eta * n_spins);
    }
    Ok(eta * n_spins / var.sqrt())
}

/// Quantum-limited echo SNR `N √(2ηΓ_R/κ)`, valid for inhomogeneous
/// linewidths well above κ.
pub fn id_snr(n_spins: f64, gamma_r: f64, kappa: f64, eta: f64) -> Result<f64> {
    check("kappa", kappa, kappa > 0.0, "must be > 0")?;
    check("gamma_r", gamma_r, gamma_r >= 0.0, "must be >= 0")?;
    check("eta", eta, (0.0..=1.0).contains(&eta), "must be in [0, 1]")?;
    Ok(n_spins * (2.0 * eta * gamma_r / kappa).sqrt())
}

/// Expected advantage of fluorescence over echo detection, `√(ηκ/2α)`.
pub fn snr_ratio(eta: f64, kappa: f64, dark_rate: f64) -> Result<f64> {
    check("dark_rate", dark_rate, dark_rate > 0.0, "must be > 0")?;
    check("eta", eta, eta >= 0.0, "must be >= 0")?;
    Ok((eta * kappa / (2.0 * dark_rate)).sqrt())
}

/// Uniform draw used by callers that need extra randomness tied to a
/// sequence, e.g. noise on synthetic data.
pub fn sequence_rng(seed: u64, sequence: u64) -> impl Rng {
    stream_rng(seed, sequence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::Pulse;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat(rate: f64, t_rep: f64) -> FluorescenceCurve {
        FluorescenceCurve { times: vec![0.0, t_rep], rate: vec![rate, rate], pulse: Pulse::new(1.0, 1e-6).unwrap(), eta: 1.0, t_rep }
    }

    #[test]
    fn silent_detector_never_clicks() {
        let cfg = CounterConfig::new(0.0, 0.05);
        let (s, rep) = sample_clicks(&flat(0.0, 0.05), &cfg, 20, 1).unwrap();
        assert!(s.iter().all(|x| x.count(0, x.n_cycles) == 0));
        assert!(!rep.saturated);
    }

    #[test]
    fn dark_counts_are_poissonian() {
        let cfg = CounterConfig::new(500.0, 1.0 + 50e-6);
        let (s, _) = sample_clicks(&flat(0.0, cfg.t_rep), &cfg, 10_000, 7).unwrap();
        let h = count_statistics(&s, &cfg, 1.0).unwrap();
        // 10⁴ sequences: the mean is known to ±3·√(500/10⁴)
        assert!((h.mean - 500.0).abs() < 3.0 * (500.0f64 / 1e4).sqrt() + 500.0 * 0.004);
        assert_relative_eq!(h.std.powi(2), h.mean, max_relative = 0.1);
    }

    #[test]
    fn constant_rate_mean_and_coarse_graining() {
        let cfg = CounterConfig::new(200.0, 0.2);
        let (s, _) = sample_clicks(&flat(300.0, cfg.t_rep), &cfg, 10_000, 3).unwrap();
        let t_int = 0.1;
        let h = count_statistics(&s, &cfg, t_int).unwrap();
        let expect = 500.0 * t_int;
        assert!((h.mean - expect).abs() < 3.0 * (expect / 1e4).sqrt() + expect * 0.004);
        let tr = coarse_grain(&s, &cfg, 0.012).unwrap();
        assert!(!tr.snapped);
        let sigma = (500.0 / (1e4 * tr.window)).sqrt();
        assert!(tr.rate.iter().all(|r| (r - 500.0).abs() < 4.0 * sigma + 500.0 * 0.004), "{:?}", tr.rate);
    }

    #[test]
    fn all_ones_stream() {
        let cfg = CounterConfig::new(0.0, 50e-6 + 120e-6);
        let mut s = ClickStream::zeros(0, cfg.n_cycles());
        (0..s.n_cycles).for_each(|i| s.set(i));
        let tr = coarse_grain(&[s.clone()], &cfg, 2.5 * cfg.cycle_duration).unwrap();
        assert!(tr.snapped);
        assert!(tr.rate.iter().all(|&r| (r - 1.0 / cfg.cycle_duration).abs() < 1e-6));
        let h = count_statistics(&[s.clone(), s], &cfg, 10.0 * cfg.cycle_duration).unwrap();
        assert_eq!((h.mean, h.std), (10.0, 0.0));
    }

    #[test]
    fn decaying_curve_is_recovered() {
        let cfg = CounterConfig::new(0.0, 0.1);
        let times: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.1 / 2000.0).collect();
        let rate: Vec<f64> = times.iter().map(|t| 2000.0 * (-t / 0.02f64).exp()).collect();
        let curve = FluorescenceCurve { times, rate, pulse: Pulse::new(1.0, 1e-6).unwrap(), eta: 1.0, t_rep: 0.1 };
        let (s, _) = sample_clicks(&curve, &cfg, 10_000, 11).unwrap();
        let tr = coarse_grain(&s, &cfg, 0.005).unwrap();
        for (t, r) in tr.times.iter().zip(&tr.rate) {
            let expect = curve.integral(*t, t + tr.window) / tr.window;
            let sigma = (expect / (1e4 * tr.window)).sqrt();
            assert!((r - expect).abs() < 4.0 * sigma + 0.01 * expect, "t {t}: {r} vs {expect}");
        }
    }

    #[test]
    fn toy_ensemble_partition_noise() {
        // slow decay keeps two photons from sharing a cycle
        let cfg = CounterConfig { dead_time: 0.0, ..CounterConfig::new(0.0, 1.0) };
        let ens = ToyEnsemble { n_spins: 1000, excitation: 1.0, gamma_r: 4.0, gamma1: 4.0, eta: 0.5 };
        let s = sample_toy_ensemble(&ens, &cfg, 4000, 5).unwrap();
        let h = count_statistics(&s, &cfg, 1.0).unwrap();
        let q = ens.click_probability(0.0, cfg.n_cycles() as f64 * cfg.cycle_duration);
        assert!((h.mean - 1000.0 * q).abs() < 4.0 * (1000.0 * q * (1.0 - q) / 4000.0).sqrt() + 0.01 * 1000.0 * q);
        // binomial: variance N q (1−q), far below the Poisson value
        assert_relative_eq!(h.std, (1000.0 * q * (1.0 - q)).sqrt(), max_relative = 0.1);
    }

    #[test]
    fn toy_dark_clicks_match_bernoulli_rate() {
        let cfg = CounterConfig::new(2e3, 0.1);
        let ens = ToyEnsemble { n_spins: 0, excitation: 0.0, gamma_r: 1.0, gamma1: 1.0, eta: 0.0 };
        let s = sample_toy_ensemble(&ens, &cfg, 4000, 8).unwrap();
        let h = count_statistics(&s, &cfg, 0.09).unwrap();
        let expect = (0.09 / cfg.cycle_duration).floor() * -(-2e3 * cfg.cycle_duration).exp_m1();
        assert!((h.mean - expect).abs() < 4.0 * (expect / 4000.0).sqrt());
    }

    #[test]
    fn snr_formulas() {
        assert_relative_eq!(fd_snr(1000.0, 100.0, 0.0, 1.0).unwrap(), 1000.0);
        assert_relative_eq!(fd_snr(1000.0, 100.0, 2e3, 0.15).unwrap(), 12.35, epsilon = 0.005);
        assert_eq!(fd_snr(0.0, 100.0, 2e3, 0.15).unwrap(), 0.0);
        assert_relative_eq!(id_snr(1000.0, 100.0, 1.45e6, 0.15).unwrap(), 4.55, epsilon = 0.01);
        assert_eq!(id_snr(1000.0, 100.0, 1.45e6, 0.0).unwrap(), 0.0);
        assert_relative_eq!(id_snr(10.0, 400.0, 1.0, 0.5).unwrap(), 2.0 * id_snr(10.0, 100.0, 1.0, 0.5).unwrap());
        assert_relative_eq!(snr_ratio(0.15, 1.45e6, 2e3).unwrap(), 7.37, epsilon = 0.01);
        assert_eq!(snr_ratio(0.0, 1.45e6, 2e3).unwrap(), 0.0);
    }

    #[test]
    fn same_seed_same_streams() {
        let cfg = CounterConfig::new(3e3, 0.01);
        let a = sample_clicks(&flat(1e3, 0.01), &cfg, 50, 99).unwrap().0;
        let b = sample_clicks(&flat(1e3, 0.01), &cfg, 50, 99).unwrap().0;
        let c = sample_clicks(&flat(1e3, 0.01), &cfg, 50, 100).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn fd_snr_is_monotone(n in 1.0..1e4f64, g in 1.0..1e3f64, a in 1.0..1e4f64, eta in 0.01..0.99f64, f in 1.01..2.0f64) {
            let base = fd_snr(n, g, a, eta).unwrap();
            prop_assert!(fd_snr(n * f, g, a, eta).unwrap() > base);
            prop_assert!(fd_snr(n, g * f, a, eta).unwrap() > base);
            prop_assert!(fd_snr(n, g, a, (eta * f).min(1.0)).unwrap() > base);
            let r = snr_ratio(eta, g, a).unwrap();
            prop_assert!(snr_ratio(eta * f, g, a).unwrap() > r);
            prop_assert!(snr_ratio(eta, g * f, a).unwrap() > r);
            prop_assert!(snr_ratio(eta, g, a * f).unwrap() < r);
        }
    }
}
