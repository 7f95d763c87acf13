//! Exact `X` moments, hypercube random walks and the walk form of the overlap
//! series.
//!
//! `(X/N)|u>` is the average of the `N` single-flip neighbours of `u`, so
//! `(X/N)^K |u>` is the distribution of a walk after `K` uniformly random
//! flips (with replacement). Matrix elements of powers of `X` therefore
//! become return statistics of that walk.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Caps;
use crate::error::{Error, Result};
use crate::hilbert::{BasisMode, HsParams};
use crate::instance::{binomial, Instance};
use crate::sampling::{split_streams, RunningStats};
use crate::scalar::Scalar;

/// Exact `<u|(X/N)^L|u>` for a computational basis state `u`:
/// `2^{-n} sum_k C(n,k) ((n - 2k)/n)^L`.
pub fn x_moment_exact(n: usize, l: u32) -> BigRational {
    moment_sum(n, l, false)
}

/// Exact `<0|(X/N)^L|0>` for the working-basis vector `|0>` of `mode`. In even
/// mode `|0> = (|u> + |u-bar>)/sqrt 2` and the cross term `<u|(X/N)^L|u-bar>`
/// contributes the `(-1)^k` part.
pub fn x_moment_exact_mode(n: usize, l: u32, mode: BasisMode) -> BigRational {
    moment_sum(n, l, mode == BasisMode::Even)
}

fn moment_sum(n: usize, l: u32, even: bool) -> BigRational {
    let mut num = BigInt::zero();
    for k in 0..=n {
        let weight = if even {
            if k % 2 == 0 {
                2
            } else {
                0
            }
        } else {
            1
        };
        if weight == 0 {
            continue;
        }
        let base = BigInt::from(n as i64 - 2 * k as i64);
        num += BigInt::from(binomial(n, k)) * BigInt::from(weight) * num_traits::pow(base, l as usize);
    }
    let den = (BigInt::one() << n) * num_traits::pow(BigInt::from(n), l as usize);
    BigRational::new(num, den)
}

pub fn x_moment(n: usize, l: u32) -> f64 {
    x_moment_exact(n, l).to_f64().unwrap_or(0.0)
}

pub fn x_moment_mode(n: usize, l: u32, mode: BasisMode) -> f64 {
    x_moment_exact_mode(n, l, mode).to_f64().unwrap_or(0.0)
}

/// `<0|(X/N)^L|0>` for `L = 0..=l_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentTable {
    pub n: usize,
    pub mode: BasisMode,
    /// Exact values as `"numerator/denominator"` strings.
    pub exact: Vec<String>,
    pub values: Vec<f64>,
}

impl MomentTable {
    pub fn new(n: usize, l_max: u32, mode: BasisMode) -> Self {
        let exact: Vec<BigRational> = (0..=l_max).map(|l| x_moment_exact_mode(n, l, mode)).collect();
        Self {
            n,
            mode,
            values: exact.iter().map(|r| r.to_f64().unwrap_or(0.0)).collect(),
            exact: exact.iter().map(|r| r.to_string()).collect(),
        }
    }
}

/// One step of a `K`-flip walk, tracked through its Hamming distance from the
/// start. Mass reaching an absorbing distance is removed when `absorb` is set.
fn ehrenfest_step(dist: &mut Vec<f64>, n: usize, k: u32) {
    for _ in 0..k {
        let mut next = vec![0.0; n + 1];
        for (d, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let down = d as f64 / n as f64;
            if d > 0 {
                next[d - 1] += p * down;
            }
            if d < n {
                next[d + 1] += p * (1.0 - down);
            }
        }
        *dist = next;
    }
}

fn returned_mass(dist: &[f64], mode: BasisMode) -> f64 {
    let n = dist.len() - 1;
    match mode {
        BasisMode::Full => dist[0],
        BasisMode::Even => dist[0] + dist[n],
    }
}

fn absorb(dist: &mut [f64], mode: BasisMode) {
    let n = dist.len() - 1;
    dist[0] = 0.0;
    if mode == BasisMode::Even {
        dist[n] = 0.0;
    }
}

/// Exact walk statistics at step `t` and their Monte-Carlo counterparts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnRow {
    pub t: u32,
    /// Probability of being back at the start (or its complement in even
    /// mode) after `t` steps; equals `<0|(X/N)^{Kt}|0>`.
    pub exact_return_prob: f64,
    /// Probability of not having returned at any step `1..=t`.
    pub p_nr: f64,
    pub mc_return_freq: f64,
    pub mc_return_stderr: f64,
    pub mc_nonreturn_freq: f64,
}

/// Return statistics of the `K`-flips-per-step walk on `n` spins.
pub fn return_probabilities(
    n: usize,
    k: u32,
    t_max: u32,
    mode: BasisMode,
    walks: u64,
    seed: u64,
) -> Result<Vec<ReturnRow>> {
    if k.is_multiple_of(2) {
        return Err(Error::input("K must be odd"));
    }
    if n == 0 || n > 63 {
        return Err(Error::input("spin count must be in 1..=63"));
    }
    let mut free = vec![0.0; n + 1];
    free[0] = 1.0;
    let mut surviving = free.clone();
    let mut exact = Vec::with_capacity(t_max as usize);
    for _ in 0..t_max {
        ehrenfest_step(&mut free, n, k);
        ehrenfest_step(&mut surviving, n, k);
        absorb(&mut surviving, mode);
        exact.push((returned_mass(&free, mode), surviving.iter().sum::<f64>()));
    }

    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let tm = t_max as usize;
    let per_stream = split_streams(walks, seed, |rng, count| {
        let mut at_start = vec![0u64; tm];
        let mut alive = vec![0u64; tm];
        for _ in 0..count {
            let mut u = 0u64;
            let mut never = true;
            for t in 0..tm {
                for _ in 0..k {
                    u ^= 1 << rng.random_range(0..n);
                }
                let back = u == 0 || (mode == BasisMode::Even && u == mask);
                if back {
                    at_start[t] += 1;
                    never = false;
                }
                if never {
                    alive[t] += 1;
                }
            }
        }
        (at_start, alive)
    });
    let mut at_start = vec![0u64; tm];
    let mut alive = vec![0u64; tm];
    for (a, b) in per_stream {
        for t in 0..tm {
            at_start[t] += a[t];
            alive[t] += b[t];
        }
    }
    let w = walks.max(1) as f64;
    Ok((0..tm)
        .map(|t| {
            let f = at_start[t] as f64 / w;
            ReturnRow {
                t: t as u32 + 1,
                exact_return_prob: exact[t].0,
                p_nr: exact[t].1,
                mc_return_freq: f,
                mc_return_stderr: (f * (1.0 - f) / w).sqrt(),
                mc_nonreturn_freq: alive[t] as f64 / w,
            }
        })
        .collect())
}

/// Sampled mean energy after `m` walk steps against `(1 - 2D/N)^{mK} E(start)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRow {
    pub m: u32,
    pub mean: f64,
    pub stderr: f64,
    pub predicted: f64,
    pub within_3sigma: bool,
}

/// Mean energy along `K`-flip walks started from configuration `start`.
pub fn mean_energy_decay(
    inst: &Instance,
    k: u32,
    t_max: u32,
    samples: u64,
    seed: u64,
    start: u64,
) -> Result<Vec<DecayRow>> {
    let n = inst.n();
    if start >> n != 0 {
        return Err(Error::input("start configuration out of range"));
    }
    let tm = t_max as usize;
    let per_stream = split_streams(samples, seed, |rng, count| {
        let mut stats = vec![RunningStats::default(); tm + 1];
        for _ in 0..count {
            let mut u = start;
            stats[0].push(inst.energy_bits(u) as f64);
            for s in stats.iter_mut().skip(1) {
                for _ in 0..k {
                    u ^= 1 << rng.random_range(0..n);
                }
                s.push(inst.energy_bits(u) as f64);
            }
        }
        stats
    });
    let mut stats = vec![RunningStats::default(); tm + 1];
    for chunk in &per_stream {
        for (acc, s) in stats.iter_mut().zip(chunk) {
            acc.merge(s);
        }
    }
    let e_start = inst.energy_bits(start) as f64;
    let rate = 1.0 - 2.0 * inst.d() as f64 / n as f64;
    Ok(stats
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let predicted = rate.powi((m as u32 * k) as i32) * e_start;
            let (mean, stderr) = (s.mean(), s.stderr());
            DecayRow {
                m: m as u32,
                mean,
                stderr,
                predicted,
                within_3sigma: (mean - predicted).abs() <= 3.0 * stderr + 1e-9 * (1.0 + predicted.abs()),
            }
        })
        .collect())
}

/// Per-order statistics of the walk form of the overlap series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderStat {
    pub t: u32,
    /// Estimate of `(sB)^t E[1{no return by t} prod_m 1/(E_{u_m} - e01)]`.
    pub mean: f64,
    pub stderr: f64,
    pub partial_sum: f64,
    pub partial_stderr: f64,
    /// Exact non-return probability `P_nr,t`.
    pub p_nr: f64,
    pub mc_p_nr: f64,
    /// Mean of the product over non-returning walks only.
    pub conditional_mean: f64,
    /// `E[prod 1/(E_m - e01)] >= prod 1/(E[E_m] - e01)` within three standard errors.
    pub jensen_ok: bool,
}

/// Monte-Carlo estimate of the truncated series
/// `2^{bits/2} <psi_+|phi> = sum_t (sB)^t E[1{nr} prod_m 1/(E_{u_m} - e01)]`,
/// where `bits` is the number of working-basis bits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkEstimate {
    pub t_max: u32,
    pub samples: u64,
    pub mode: BasisMode,
    pub e01: f64,
    pub orders: Vec<OrderStat>,
    pub series_sum: f64,
    pub series_stderr: f64,
    /// `bits / 2`: the estimate divided by `2^{prefactor_log2}` approximates `<psi_+|phi>`.
    pub prefactor_log2: f64,
}

pub fn overlap_lower_bound<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    e01: f64,
    t_max: u32,
    samples: u64,
    seed: u64,
    caps: &Caps,
) -> Result<WalkEstimate> {
    mode.check(inst)?;
    p.validate()?;
    let n = inst.n();
    let (e0, ground) = inst.ground_set(caps)?;
    let expected = match mode {
        BasisMode::Full => 1,
        BasisMode::Even => 2,
    };
    if ground.len() != expected {
        return Err(Error::precondition(format!(
            "H_Z ground state is not unique in {mode:?} mode ({} ground configurations)",
            ground.len()
        )));
    }
    if !(e01 < e0 as f64) {
        return Err(Error::precondition(format!(
            "e01 = {e01} must lie strictly below E_0 = {e0} for positive denominators"
        )));
    }
    let start = ground[0];
    let mask = (1u64 << n) - 1;
    let coupling = p.coupling().as_f64();
    let k = p.k;
    let tm = t_max as usize;

    struct Acc {
        terms: Vec<RunningStats>,
        partial: Vec<RunningStats>,
        conditional: Vec<RunningStats>,
        unconditional: Vec<RunningStats>,
        energies: Vec<RunningStats>,
        alive: Vec<u64>,
    }
    let per_stream = split_streams(samples, seed, |rng, count| {
        let mut acc = Acc {
            terms: vec![RunningStats::default(); tm],
            partial: vec![RunningStats::default(); tm],
            conditional: vec![RunningStats::default(); tm],
            unconditional: vec![RunningStats::default(); tm],
            energies: vec![RunningStats::default(); tm],
            alive: vec![0; tm],
        };
        for _ in 0..count {
            let mut u = start;
            let mut alive = true;
            let mut prod = 1.0f64;
            let mut prod_all = 1.0f64;
            let mut weight = 1.0f64;
            let mut partial = 1.0f64;
            for t in 0..tm {
                for _ in 0..k {
                    u ^= 1 << rng.random_range(0..n);
                }
                let back = u == start || (mode == BasisMode::Even && u == (!start & mask));
                let e = inst.energy_bits(u) as f64;
                acc.energies[t].push(e);
                let inv = 1.0 / (e - e01);
                prod_all *= inv;
                acc.unconditional[t].push(prod_all);
                weight *= coupling;
                if back {
                    alive = false;
                }
                let term = if alive {
                    prod *= inv;
                    acc.alive[t] += 1;
                    acc.conditional[t].push(prod);
                    weight * prod
                } else {
                    0.0
                };
                partial += term;
                acc.terms[t].push(term);
                acc.partial[t].push(partial);
            }
        }
        acc
    });

    let mut terms = vec![RunningStats::default(); tm];
    let mut partial = vec![RunningStats::default(); tm];
    let mut conditional = vec![RunningStats::default(); tm];
    let mut unconditional = vec![RunningStats::default(); tm];
    let mut energies = vec![RunningStats::default(); tm];
    let mut alive = vec![0u64; tm];
    for acc in &per_stream {
        for t in 0..tm {
            terms[t].merge(&acc.terms[t]);
            partial[t].merge(&acc.partial[t]);
            conditional[t].merge(&acc.conditional[t]);
            unconditional[t].merge(&acc.unconditional[t]);
            energies[t].merge(&acc.energies[t]);
            alive[t] += acc.alive[t];
        }
    }
    let exact = return_probabilities(n, k, t_max, mode, 0, seed)?;
    let mut jensen_rhs = 1.0;
    let orders: Vec<OrderStat> = (0..tm)
        .map(|t| {
            jensen_rhs /= energies[t].mean() - e01;
            OrderStat {
                t: t as u32 + 1,
                mean: terms[t].mean(),
                stderr: terms[t].stderr(),
                partial_sum: partial[t].mean(),
                partial_stderr: partial[t].stderr(),
                p_nr: exact[t].p_nr,
                mc_p_nr: alive[t] as f64 / samples.max(1) as f64,
                conditional_mean: conditional[t].mean(),
                jensen_ok: unconditional[t].mean() + 3.0 * unconditional[t].stderr() >= jensen_rhs * (1.0 - 1e-12),
            }
        })
        .collect();
    let (series_sum, series_stderr) = orders
        .last()
        .map(|o| (o.partial_sum, o.partial_stderr))
        .unwrap_or((1.0, 0.0));
    Ok(WalkEstimate {
        t_max,
        samples,
        mode,
        e01,
        orders,
        series_sum,
        series_stderr,
        prefactor_log2: mode.bits(n) as f64 / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::random_instance;
    use proptest::prelude::*;

    #[test]
    fn moment_examples() {
        for n in 1..10 {
            for l in (1..32).step_by(2) {
                assert!(x_moment_exact(n, l).is_zero());
            }
        }
        assert_eq!(x_moment_exact(2, 2), BigRational::new(1.into(), 2.into()));
        assert_eq!(x_moment_exact(4, 4), BigRational::new(40.into(), 256.into()));
        assert!(x_moment(4, 4) <= 1.0);
    }

    #[test]
    fn even_mode_moments() {
        // |0> = (|00> + |11>)/sqrt 2 and (X/2)^2 maps it to itself.
        assert_eq!(x_moment_mode(2, 6, BasisMode::Even), 1.0);
        assert_eq!(x_moment_mode(2, 3, BasisMode::Even), 0.0);
        // n = 3: <u|X^3|u-bar> = 3! paths.
        assert!((x_moment_mode(3, 3, BasisMode::Even) - 6.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn moment_table_matches_direct_values() {
        let table = MomentTable::new(6, 12, BasisMode::Full);
        for (l, v) in table.values.iter().enumerate() {
            assert_eq!(*v, x_moment(6, l as u32));
        }
        assert_eq!(table.exact[0], "1");
    }

    #[test]
    fn return_probability_is_moment() {
        let rows = return_probabilities(6, 3, 4, BasisMode::Full, 0, 0).unwrap();
        assert_eq!(rows[0].exact_return_prob, 0.0);
        assert_eq!(rows[2].exact_return_prob, 0.0);
        assert!((rows[1].exact_return_prob - x_moment(6, 6)).abs() < 1e-15);
        assert!((rows[3].exact_return_prob - x_moment(6, 12)).abs() < 1e-15);
        for w in rows.windows(2) {
            assert!(w[1].p_nr <= w[0].p_nr + 1e-14);
        }
    }

    #[test]
    fn return_frequencies_within_three_sigma() {
        let rows = return_probabilities(4, 3, 4, BasisMode::Full, 100_000, 5).unwrap();
        for r in rows {
            let sigma = (r.exact_return_prob * (1.0 - r.exact_return_prob) / 1e5).sqrt();
            assert!((r.mc_return_freq - r.exact_return_prob).abs() <= 3.0 * sigma + 1e-12, "{r:?}");
        }
    }

    #[test]
    fn i2_energy_decay() {
        let rows = mean_energy_decay(&Instance::i2(), 3, 3, 1000, 1, 0).unwrap();
        assert_eq!(rows[0].mean, -1.0);
        assert_eq!(rows[1].predicted, 1.0);
        assert_eq!(rows[1].mean, 1.0);
        assert!(rows.iter().all(|r| r.within_3sigma));
    }

    #[test]
    fn random_instance_energy_decay() {
        let inst = random_instance(8, 2, 12, &[-1, 1], 2).unwrap();
        let (_, ground) = inst.ground_set(&Caps::default()).unwrap();
        let rows = mean_energy_decay(&inst, 3, 5, 100_000, 7, ground[0]).unwrap();
        assert!(rows.iter().all(|r| r.within_3sigma), "{rows:?}");
    }

    #[test]
    fn i2_overlap_series() {
        let p = HsParams::new(1.0, 1.0, 3).unwrap();
        let e01 = -std::f64::consts::SQRT_2;
        let est = overlap_lower_bound(&Instance::i2(), &p, BasisMode::Even, e01, 12, 4000, 3, &Caps::default()).unwrap();
        // With K = 3 every step switches pair, so all walks return at t = 2
        // and the series stops after the first order: 1 + (sqrt 2 - 1).
        let exact = std::f64::consts::SQRT_2;
        for o in &est.orders {
            assert!(o.partial_sum <= exact + 3.0 * o.partial_stderr + 1e-12);
        }
        for w in est.orders.windows(2) {
            assert!(w[1].partial_sum >= w[0].partial_sum - 1e-15);
        }
        assert!((est.series_sum - exact).abs() < 1e-3);
    }

    #[test]
    fn zero_order_estimate_is_one() {
        let p = HsParams::new(1.0, 1.0, 3).unwrap();
        let est = overlap_lower_bound(&Instance::i2(), &p, BasisMode::Even, -1.5, 0, 10, 0, &Caps::default()).unwrap();
        assert_eq!(est.series_sum, 1.0);
    }

    #[test]
    fn overlap_rejects_e01_above_ground() {
        let p = HsParams::new(1.0, 1.0, 3).unwrap();
        let err = overlap_lower_bound(&Instance::i2(), &p, BasisMode::Even, -0.5, 3, 10, 0, &Caps::default());
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    proptest! {
        #[test]
        fn moment_monotone_and_bounded(n in 2usize..20) {
            let mut prev = 1.0;
            for l in (2..n as u32).step_by(2) {
                let m = x_moment(n, l);
                prop_assert!(m < prev);
                prop_assert!(m <= (l as f64 / n as f64).powf(l as f64 / 2.0) * (1.0 + 1e-12));
                prev = m;
            }
            for l in (0..=3 * n as u32).filter(|l| l % 2 == 0 && *l as usize * 2 > n) {
                prop_assert!(x_moment(n, l) <= 2f64.powf(-(n as f64) / 4.0));
            }
        }
    }
}
