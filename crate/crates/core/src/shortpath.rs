//! Simulation of the measurement-based short-path algorithm with an ideal
//! phase-estimation model, amplitude-amplification accounting, the hybrid
//! approximate/exact driver, and the gapped/localized dichotomy report.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bw::{self, BoundChecks};
use crate::config::Caps;
use crate::eigensolve::{self, SolverConfig};
use crate::entropy::{self, EntropyCertificate};
use crate::error::{Error, Result};
use crate::hilbert::{k_from_c, BasisMode, HsParams, MeasurementSampler, StateVector};
use crate::instance::{Instance, SpinConfig};
use crate::localize::{self, LocalizedState, Regime};
use crate::sampling::{self, RunningStats};
use crate::scalar::Scalar;

/// Strength of the driver term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strength {
    /// `B = -b E_0` with `b` in `[0, 1)`.
    Relative(f64),
    Absolute(f64),
}

/// Exponent of the driver term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degree {
    Fixed(u32),
    /// `K` = smallest odd integer `>= C log2 N`.
    Log(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub strength: Strength,
    pub degree: Degree,
    pub trials: u64,
    pub seed: u64,
    pub p_succ_target: f64,
    /// Probability that a phase estimate is wrong; such trials are rejected.
    pub epsilon_model: f64,
    pub eta: f64,
    /// Phase-one sample count of the hybrid driver; `None` uses `2^{N/C}`.
    pub n_samp: Option<u64>,
    /// Eigenpairs of `H_1` resolved explicitly; the rest of the spectral
    /// measure is lumped into one rejecting outcome.
    pub spectral_m: usize,
    pub caps: Caps,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strength: Strength::Relative(0.2),
            degree: Degree::Fixed(3),
            trials: 10_000,
            seed: 0,
            p_succ_target: 0.5,
            epsilon_model: 0.0,
            eta: 0.01,
            n_samp: None,
            spectral_m: 16,
            caps: Caps::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match self.strength {
            Strength::Relative(b) if !(0.0..1.0).contains(&b) => {
                return Err(Error::input(format!("b = {b} must lie in [0, 1)")))
            }
            Strength::Absolute(big_b) if !(big_b >= 0.0 && big_b.is_finite()) => {
                return Err(Error::input("B must be finite and non-negative"))
            }
            _ => {}
        }
        match self.degree {
            Degree::Fixed(k) if k < 3 || k % 2 == 0 => {
                return Err(Error::input(format!("K = {k} must be odd and at least 3")))
            }
            Degree::Log(c) if !(c > 0.0 && c.is_finite()) => return Err(Error::input("C must be positive")),
            _ => {}
        }
        if !(self.p_succ_target > 0.0 && self.p_succ_target <= 1.0) {
            return Err(Error::input("p_succ_target must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.epsilon_model) {
            return Err(Error::input("epsilon_model must lie in [0, 1)"));
        }
        if !(self.eta > 0.0) {
            return Err(Error::input("eta must be positive"));
        }
        if self.spectral_m == 0 {
            return Err(Error::input("spectral_m must be positive"));
        }
        Ok(())
    }

    pub fn k(&self, n: usize) -> u32 {
        match self.degree {
            Degree::Fixed(k) => k,
            Degree::Log(c) => k_from_c(c, n).max(3),
        }
    }

    pub fn regime(&self) -> Regime {
        match self.degree {
            Degree::Fixed(_) => Regime::FixedK,
            Degree::Log(_) => Regime::LogK,
        }
    }

    pub fn big_b(&self, e0: i64) -> f64 {
        match self.strength {
            Strength::Relative(b) => -b * e0 as f64,
            Strength::Absolute(big_b) => big_b,
        }
    }

    /// `b = B / |E_0|`.
    pub fn b(&self, e0: i64) -> f64 {
        match self.strength {
            Strength::Relative(b) => b,
            Strength::Absolute(big_b) if e0 != 0 => big_b / (e0 as f64).abs(),
            Strength::Absolute(_) => 0.0,
        }
    }

    /// `H_1` parameters for `inst`.
    pub fn params<T: Scalar>(&self, inst: &Instance, mode: BasisMode) -> Result<HsParams<T>> {
        let skip = eigensolve::ground_index(inst, mode)?;
        let e0 = inst.energy_bits(mode.config_of(skip));
        HsParams::new(T::one(), T::lit(self.big_b(e0)), self.k(inst.n()))
    }
}

/// `ceil(pi / (4 asin sqrt(p_ov p_succ)))`; infinite when the product is 0.
pub fn amplified_time_estimate(p_ov: f64, p_succ: f64) -> f64 {
    let p = (p_ov * p_succ).min(1.0);
    if !(p > 0.0) {
        return f64::INFINITY;
    }
    (std::f64::consts::PI / (4.0 * p.sqrt().asin())).ceil()
}

/// Ideal model of one run: project `psi_+` onto an eigenvector of `H_1`,
/// accept when its energy is at most `E_{0,1} + gap/2`, then measure.
struct IdealModel {
    /// Cumulative spectral weights of the resolved eigenvectors.
    cumulative: Vec<f64>,
    /// Measurement of each accepted eigenvector; `None` for rejected ones.
    samplers: Vec<Option<MeasurementSampler>>,
    epsilon: f64,
    e0: i64,
    e01: f64,
    gap: f64,
    threshold: f64,
    p_ov: f64,
    ground_mass: f64,
    remainder: f64,
}

impl IdealModel {
    fn build<T: Scalar>(inst: &Instance, p: &HsParams<T>, mode: BasisMode, cfg: &RunConfig) -> Result<Self> {
        let skip = eigensolve::ground_index(inst, mode)?;
        let e0 = inst.energy_bits(mode.config_of(skip));
        let scfg = SolverConfig::<T>::with_caps(cfg.caps);
        let dim = mode.dim(inst.n());
        let pairs = eigensolve::lowest_eigenpairs(inst, p, mode, cfg.spectral_m.max(2).min(dim), &scfg)?;
        if pairs.len() < 2 {
            return Err(Error::precondition("H_1 has a single eigenvalue"));
        }
        let gap = (pairs[1].value - pairs[0].value).as_f64();
        if gap < scfg.degenerate_tol.as_f64() {
            return Err(Error::precondition(format!(
                "ground state of H_1 is degenerate (gap {gap:.3e}); the ideal measurement model does not apply"
            )));
        }
        let e01 = pairs[0].value.as_f64();
        let threshold = e01 + 0.5 * gap;
        let plus = StateVector::<T>::plus(inst.n(), mode);
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(pairs.len());
        let mut samplers = Vec::with_capacity(pairs.len());
        for pair in &pairs {
            let v = StateVector::new(inst.n(), mode, pair.vector.clone())?;
            let o = plus.dot(&v).as_f64();
            acc += o * o;
            cumulative.push(acc);
            samplers.push(if pair.value.as_f64() <= threshold {
                Some(MeasurementSampler::new(&v)?)
            } else {
                None
            });
        }
        let first = cumulative[0];
        let ground_mass = pairs[0]
            .vector
            .iter()
            .enumerate()
            .filter(|&(j, _)| inst.energy_bits(mode.config_of(j)) == e0)
            .map(|(_, a)| a.as_f64() * a.as_f64())
            .sum();
        Ok(Self {
            remainder: (1.0 - acc).max(0.0),
            cumulative,
            samplers,
            epsilon: cfg.epsilon_model,
            e0,
            e01,
            gap,
            threshold,
            p_ov: first.min(1.0),
            ground_mass,
        })
    }

    /// `None` on rejection, else the measured configuration.
    fn trial(&self, rng: &mut impl Rng) -> Option<SpinConfig> {
        if self.epsilon > 0.0 && rng.random_bool(self.epsilon) {
            return None;
        }
        let r: f64 = rng.random();
        let j = self.cumulative.partition_point(|&c| c <= r);
        self.samplers.get(j)?.as_ref().map(|s| s.sample(rng))
    }

    fn predicted_success(&self) -> f64 {
        (1.0 - self.epsilon) * self.p_ov * self.ground_mass
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    pub k: u32,
    pub big_b: f64,
    pub e0: i64,
    pub e01: f64,
    pub gap: f64,
    pub accept_threshold: f64,
    pub trials: u64,
    pub p_ov: f64,
    pub accept_rate: f64,
    pub accept_stderr: f64,
    /// `(1 - epsilon) P_ov`.
    pub predicted_accept_rate: f64,
    pub exact_success_rate: f64,
    pub success_stderr: f64,
    /// `(1 - epsilon) P_ov` times the computational ground mass of `psi_{0,1}`.
    pub predicted_success_rate: f64,
    /// Spectral weight of `psi_+` outside the resolved eigenvectors.
    pub lumped_remainder: f64,
    pub p_succ_target: f64,
    pub epsilon_model: f64,
    /// Always 0: the adiabatic step is not simulated.
    pub p_diab: f64,
    pub expected_unamplified_tries: f64,
    pub expected_amplified_tries: f64,
    /// `log2(2^{N/2} / amplified tries)` with `N` the mode's qubit count.
    pub speedup_exponent: f64,
}

/// Repeats the single-measurement algorithm `cfg.trials` times.
pub fn simulate_unamplified<T: Scalar>(inst: &Instance, cfg: &RunConfig, mode: BasisMode) -> Result<RunReport> {
    cfg.validate()?;
    let p = cfg.params::<T>(inst, mode)?;
    let model = IdealModel::build(inst, &p, mode, cfg)?;
    let parts = sampling::split_streams(cfg.trials, cfg.seed, |rng, count| {
        let mut accept = RunningStats::default();
        let mut success = RunningStats::default();
        for _ in 0..count {
            let outcome = model.trial(rng);
            accept.push(f64::from(u8::from(outcome.is_some())));
            let hit = outcome.is_some_and(|u| inst.energy_bits(u.bits) == model.e0);
            success.push(f64::from(u8::from(hit)));
        }
        (accept, success)
    });
    let mut accept = RunningStats::default();
    let mut success = RunningStats::default();
    for (a, s) in &parts {
        accept.merge(a);
        success.merge(s);
    }
    let amplified = amplified_time_estimate(model.p_ov, cfg.p_succ_target);
    let half_bits = mode.bits(inst.n()) as f64 / 2.0;
    Ok(RunReport {
        n: inst.n(),
        k: p.k,
        big_b: p.big_b.as_f64(),
        e0: model.e0,
        e01: model.e01,
        gap: model.gap,
        accept_threshold: model.threshold,
        trials: cfg.trials,
        p_ov: model.p_ov,
        accept_rate: accept.mean(),
        accept_stderr: accept.stderr(),
        predicted_accept_rate: (1.0 - model.epsilon) * model.p_ov,
        exact_success_rate: success.mean(),
        success_stderr: success.stderr(),
        predicted_success_rate: model.predicted_success(),
        lumped_remainder: model.remainder,
        p_succ_target: cfg.p_succ_target,
        epsilon_model: cfg.epsilon_model,
        p_diab: 0.0,
        expected_unamplified_tries: 1.0 / (model.p_ov * cfg.p_succ_target),
        expected_amplified_tries: amplified,
        speedup_exponent: half_bits - amplified.log2(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Approximate,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Finder {
    Sampling,
    ShortPath,
    BruteForce,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HybridReport {
    pub verdict: Verdict,
    pub state: SpinConfig,
    pub energy: i64,
    pub e0: i64,
    pub e_approx: f64,
    pub n_samp: u64,
    /// `W(E <= E_approx) / 2^N`.
    pub hit_probability: f64,
    /// `1 - (1 - hit_probability)^n_samp`.
    pub predicted_approximate_probability: f64,
    pub found_by: Finder,
    pub phase1_samples: u64,
    pub phase2_rounds: u64,
    pub algorithm_trials: u64,
    pub brute_force_checked: u64,
    /// False when the short-path model could not be built (degenerate
    /// `H_1`); phase two then runs brute force alone.
    pub algorithm_available: bool,
    /// `energy` equals the histogram ground energy.
    pub verified_ground: bool,
}

/// `2^{N/C}` with `C = K / log2 N`, capped at `2^N`.
fn default_n_samp(n: usize, k: u32) -> u64 {
    let nf = n as f64;
    let log2n = nf.log2().max(1.0);
    let exponent = (nf * log2n / k as f64).min(nf).min(62.0);
    2f64.powf(exponent).ceil() as u64
}

/// Uniform sampling against `E_approx`, then the short-path algorithm run in
/// lockstep with a brute-force scan.
pub fn hybrid_run<T: Scalar>(inst: &Instance, cfg: &RunConfig, mode: BasisMode) -> Result<HybridReport> {
    cfg.validate()?;
    let n = inst.n();
    let hist = inst.histogram(&cfg.caps)?;
    let e0 = hist.e0;
    let k = cfg.k(n);
    let e_approx = entropy::e_approx(inst, e0, cfg.big_b(e0), k, cfg.eta);
    let n_samp = cfg.n_samp.unwrap_or_else(|| default_n_samp(n, k));
    let below: u64 = hist.counts.range(..=e_approx.floor() as i64).map(|(_, &w)| w).sum();
    let hit_probability = below as f64 / 2f64.powi(n as i32);
    let predicted = 1.0 - (1.0 - hit_probability).powf(n_samp as f64);
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };

    let report = |verdict, state: SpinConfig, found_by, phase1, rounds, trials, checked, available| {
        let energy = inst.energy_bits(state.bits);
        HybridReport {
            verdict,
            state,
            energy,
            e0,
            e_approx,
            n_samp,
            hit_probability,
            predicted_approximate_probability: predicted,
            found_by,
            phase1_samples: phase1,
            phase2_rounds: rounds,
            algorithm_trials: trials,
            brute_force_checked: checked,
            algorithm_available: available,
            verified_ground: energy == e0,
        }
    };

    let mut rng = sampling::stream_rng(cfg.seed, 0);
    for i in 0..n_samp {
        let u = rng.random::<u64>() & mask;
        if inst.energy_bits(u) as f64 <= e_approx {
            let state = SpinConfig::new(n, u);
            return Ok(report(Verdict::Approximate, state, Finder::Sampling, i + 1, 0, 0, 0, true));
        }
    }

    let model = match cfg
        .params::<T>(inst, mode)
        .and_then(|p| IdealModel::build(inst, &p, mode, cfg))
    {
        Ok(m) => Some(m),
        Err(Error::Precondition(_)) => None,
        Err(e) => return Err(e),
    };
    let available = model.is_some();
    let mut rng = sampling::stream_rng(cfg.seed, 1);
    let mut trials = 0;
    for u in 0..=mask {
        if let Some(model) = &model {
            trials += 1;
            if let Some(state) = model.trial(&mut rng).filter(|s| inst.energy_bits(s.bits) == e0) {
                return Ok(report(Verdict::Exact, state, Finder::ShortPath, n_samp, u + 1, trials, u, available));
            }
        }
        if inst.energy_bits(u) == e0 {
            let state = SpinConfig::new(n, u);
            return Ok(report(Verdict::Exact, state, Finder::BruteForce, n_samp, u + 1, trials, u + 1, available));
        }
    }
    Err(Error::numerical("brute-force scan found no configuration at E_0", 0.0))
}

/// Branch taken by the dichotomy: a gapped path (`E^Q_{0,1} >= E_0 + 1/2`)
/// or a low-energy state localized at large `X`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "kebab-case")]
pub enum DichotomyBranch {
    Gapped {
        p_ov: f64,
        gap: f64,
        bounds: BoundChecks,
        expected_amplified_tries: f64,
        log2_amplified_tries: f64,
        /// `N/2 - (b / (2 D K)) N log2 e`, polynomial factors set to 1.
        target_exponent: f64,
        /// `log2_amplified_tries <= target_exponent`; unit-constant diagnostic.
        meets_target: bool,
        zero_field: bool,
    },
    Localized {
        psi_energy: f64,
        bx_expect: f64,
        state: Box<LocalizedState<f64>>,
        certificate: Box<EntropyCertificate>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub n: usize,
    pub d: usize,
    pub k: u32,
    pub b: f64,
    pub big_b: f64,
    pub e0: i64,
    pub eq_ground: f64,
    pub threshold: f64,
    /// `B^2 <0|(X/N)^{2K}|0> <= 1/2`.
    pub moment_flag: bool,
    #[serde(flatten)]
    pub branch: DichotomyBranch,
}

fn annotate(e: Error, ctx: &str) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("{ctx}: {m}")),
        Error::Precondition(m) => Error::Precondition(format!("{ctx}: {m}")),
        Error::NotApplicable(m) => Error::NotApplicable(format!("{ctx}: {m}")),
        Error::Numerical { message, residual } => Error::Numerical {
            message: format!("{ctx}: {message}"),
            residual,
        },
        other => other,
    }
}

/// Decides which alternative holds for `inst` and produces its evidence.
pub fn dichotomy_report(inst: &Instance, cfg: &RunConfig, mode: BasisMode) -> Result<DichotomyReport> {
    cfg.validate()?;
    let p = cfg.params::<f64>(inst, mode)?;
    let scfg = SolverConfig::<f64>::with_caps(cfg.caps);
    let n = inst.n();
    let skip = eigensolve::ground_index(inst, mode)?;
    let e0 = inst.energy_bits(mode.config_of(skip));
    let eq = eigensolve::eq_ground(inst, &p, mode, &scfg)?;
    let threshold = e0 as f64 + 0.5;
    let b = cfg.b(e0);
    let branch = if eq >= threshold {
        let ctx = "gapped branch";
        let p_ov = bw::p_ov_exact(inst, &p, mode, &scfg).map_err(|e| annotate(e, ctx))?;
        let gap = eigensolve::gap(inst, &p, mode, &scfg).map_err(|e| annotate(e, ctx))?;
        let bounds = bw::bound_checks(inst, &p, mode, &scfg).map_err(|e| annotate(e, ctx))?;
        let amplified = amplified_time_estimate(p_ov, cfg.p_succ_target);
        let nf = n as f64;
        let target = nf / 2.0 - b / (2.0 * inst.d() as f64 * p.k as f64) * nf * std::f64::consts::LOG2_E;
        DichotomyBranch::Gapped {
            p_ov,
            gap,
            bounds,
            expected_amplified_tries: amplified,
            log2_amplified_tries: amplified.log2(),
            target_exponent: target,
            meets_target: amplified.log2() <= target,
            zero_field: p.big_b == 0.0,
        }
    } else {
        let found = localize::find_psi(inst, &p, mode, &scfg).map_err(|e| annotate(e, "localized branch (find_psi)"))?;
        let state = localize::large_x_state(inst, &p, &found.psi, cfg.regime(), None)
            .map_err(|e| annotate(e, "localized branch (large_x_state)"))?;
        let certificate = entropy::qbad_certificate(inst, &p, &state.xi, cfg.eta, "large-x", &cfg.caps)
            .map_err(|e| annotate(e, "localized branch (certificate)"))?;
        DichotomyBranch::Localized {
            psi_energy: found.energy,
            bx_expect: found.bx_expect,
            state: Box::new(state),
            certificate: Box::new(certificate),
        }
    };
    Ok(DichotomyReport {
        n,
        d: inst.d(),
        k: p.k,
        b,
        big_b: p.big_b,
        e0,
        eq_ground: eq,
        threshold,
        moment_flag: eigensolve::moment_flag(n, &p, mode),
        branch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::random_instance;
    use proptest::prelude::*;

    fn i2_cfg() -> RunConfig {
        RunConfig {
            strength: Strength::Absolute(1.0),
            trials: 10_000,
            seed: 11,
            ..RunConfig::default()
        }
    }

    #[test]
    fn amplified_examples() {
        assert_eq!(amplified_time_estimate(1.0, 1.0), 1.0);
        assert_eq!(amplified_time_estimate(0.25, 1.0), 2.0);
        let exact = amplified_time_estimate(2f64.powi(-10), 1.0);
        assert!((exact - 26.0).abs() <= 1.0);
        assert!(amplified_time_estimate(0.0, 1.0).is_infinite());
    }

    #[test]
    fn i2_acceptance_matches_p_ov() {
        let r = simulate_unamplified::<f64>(&Instance::i2(), &i2_cfg(), BasisMode::Even).unwrap();
        let p_ov = (2.0 + 2f64.sqrt()) / 4.0;
        assert!((r.p_ov - p_ov).abs() < 1e-9);
        assert!((r.accept_rate - p_ov).abs() <= 3.0 * r.accept_stderr.max(1e-3));
        assert!((r.exact_success_rate - r.predicted_success_rate).abs() <= 3.0 * r.success_stderr);
        assert!((r.predicted_success_rate - p_ov * p_ov).abs() < 1e-9);
        assert_eq!(r.p_diab, 0.0);
    }

    #[test]
    fn weak_field_accepts_uniform_overlap() {
        let inst = random_instance(6, 2, 8, &[-1, 1], 4).unwrap();
        let cfg = RunConfig {
            strength: Strength::Absolute(1e-6),
            trials: 20_000,
            ..RunConfig::default()
        };
        let r = simulate_unamplified::<f64>(&inst, &cfg, BasisMode::Even);
        if let Ok(r) = r {
            assert!((r.p_ov - 1.0 / 32.0).abs() < 1e-4);
            assert!((r.accept_rate - r.p_ov).abs() <= 4.0 * r.accept_stderr);
        }
    }

    #[test]
    fn epsilon_model_scales_acceptance() {
        let cfg = RunConfig {
            epsilon_model: 0.5,
            ..i2_cfg()
        };
        let r = simulate_unamplified::<f64>(&Instance::i2(), &cfg, BasisMode::Even).unwrap();
        assert!((r.accept_rate - r.predicted_accept_rate).abs() <= 4.0 * r.accept_stderr);
    }

    #[test]
    fn hybrid_without_sampling_is_exact() {
        for seed in 0..5 {
            let inst = random_instance(8, 3, 12, &[-1, 1], seed).unwrap();
            let cfg = RunConfig {
                n_samp: Some(0),
                seed,
                ..RunConfig::default()
            };
            let r = hybrid_run::<f64>(&inst, &cfg, BasisMode::Full).unwrap();
            assert_eq!(r.verdict, Verdict::Exact);
            assert!(r.verified_ground);
        }
    }

    #[test]
    fn hybrid_hits_dense_low_energy() {
        let inst = Instance::new(6, 2, vec![crate::instance::CostTerm::new(vec![0, 1], -3)]).unwrap();
        let cfg = RunConfig {
            n_samp: Some(64),
            ..RunConfig::default()
        };
        let r = hybrid_run::<f64>(&inst, &cfg, BasisMode::Even).unwrap();
        assert_eq!(r.verdict, Verdict::Approximate);
        assert!(r.hit_probability >= 0.5);
    }

    #[test]
    fn i2_dichotomy_is_gapped() {
        let cfg = RunConfig {
            strength: Strength::Relative(0.5),
            ..RunConfig::default()
        };
        let r = dichotomy_report(&Instance::i2(), &cfg, BasisMode::Even).unwrap();
        assert!(matches!(r.branch, DichotomyBranch::Gapped { .. }));
        let zero = RunConfig {
            strength: Strength::Absolute(0.0),
            ..RunConfig::default()
        };
        let inst = random_instance(7, 3, 9, &[-1, 1], 2).unwrap();
        if let Ok(r) = dichotomy_report(&inst, &zero, BasisMode::Full) {
            match r.branch {
                DichotomyBranch::Gapped { p_ov, zero_field, .. } => {
                    assert!(zero_field);
                    assert!((p_ov - 1.0 / 128.0).abs() < 1e-12);
                }
                _ => panic!("zero field must be gapped"),
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = RunConfig {
            strength: Strength::Relative(1.0),
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            degree: Degree::Fixed(4),
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let log = RunConfig {
            degree: Degree::Log(1.0),
            ..RunConfig::default()
        };
        assert_eq!(log.k(10), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn amplified_not_above_unamplified(p in 1e-9f64..1.0) {
            prop_assert!(amplified_time_estimate(p, 1.0) <= 1.0 / p + 1e-9);
        }

        #[test]
        fn hybrid_exact_is_ground(seed in 0u64..200) {
            let inst = random_instance(7, 2, 9, &[-1, 1], seed).unwrap();
            let cfg = RunConfig { n_samp: Some(4), seed, ..RunConfig::default() };
            let r = hybrid_run::<f64>(&inst, &cfg, BasisMode::Even).unwrap();
            if r.verdict == Verdict::Exact {
                prop_assert!(r.verified_ground);
            } else {
                prop_assert!(r.energy as f64 <= r.e_approx);
            }
        }
    }
}
