//! Reduction from a degenerate ground space to a unique ground state by
//! adding single-spin fields, plus the degree lift that restores uniform
//! degree.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::config::Caps;
use crate::error::{Error, Result};
use crate::instance::{Instance, SpinConfig};

/// All configurations attaining `E_0`, in increasing bit order.
pub fn enumerate_ground_set(inst: &Instance, caps: &Caps) -> Result<Vec<SpinConfig>> {
    let (_, set) = inst.ground_set(caps)?;
    Ok(set.into_iter().map(|u| SpinConfig::new(inst.n(), u)).collect())
}

/// Picks the smallest spin `i` on which `set` is not constant, and the sign
/// `sigma` whose slice `{v : v_i = sigma}` holds at most half of `set`.
///
/// `set` holds configurations as bit strings (bit 0 is `v = +1`).
pub fn half_split(n: usize, set: &[u64]) -> Result<(usize, i8)> {
    if set.len() <= 1 {
        return Err(Error::precondition(format!(
            "half split needs more than one configuration, got {}",
            set.len()
        )));
    }
    for i in 0..n {
        let plus = set.iter().filter(|&&u| u >> i & 1 == 0).count();
        if plus > 0 && plus < set.len() {
            let sigma = if 2 * plus <= set.len() { 1 } else { -1 };
            return Ok((i, sigma));
        }
    }
    Err(Error::input("configurations are not distinct"))
}

/// Number of configurations in `set` with `v_i = sigma`.
pub fn slice_count(set: &[u64], i: usize, sigma: i8) -> usize {
    let bit = u64::from(sigma < 0);
    set.iter().filter(|&&u| u >> i & 1 == bit).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionStep {
    pub spin: usize,
    pub sigma: i8,
    pub ground_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub n: usize,
    pub e0: i64,
    pub n_gs_initial: usize,
    pub steps: Vec<ReductionStep>,
    pub final_fields: Vec<i8>,
    pub m: usize,
    pub final_ground: SpinConfig,
    /// Whether `final_ground` is a ground state of the unmodified instance.
    pub final_in_original: bool,
}

impl ReductionTrace {
    /// `ceil(log2 n_gs)`.
    pub fn log_bound(&self) -> usize {
        ceil_log2(self.n_gs_initial)
    }

    pub fn halving_ok(&self) -> bool {
        let mut prev = self.n_gs_initial;
        self.steps.iter().all(|s| {
            let ok = s.ground_count >= 1 && 2 * s.ground_count <= prev;
            prev = s.ground_count;
            ok
        })
    }
}

/// `ceil(log2 x)` for `x >= 1`.
pub fn ceil_log2(x: usize) -> usize {
    x.max(1).next_power_of_two().trailing_zeros() as usize
}

/// Builds `H^(0), ..., H^(m)` by repeated half splits until the ground state is
/// unique, checking after every step that each set field `h_i` is respected by
/// every ground state (`v_i = -h_i`).
pub fn degeneracy_sequence(inst: &Instance, caps: &Caps) -> Result<ReductionTrace> {
    let n = inst.n();
    let (e0, original) = inst.ground_set(caps)?;
    let mut fields = vec![0i64; n];
    let mut set = original.clone();
    let mut steps = Vec::new();
    while set.len() > 1 {
        let (i, sigma) = half_split(n, &set)?;
        if fields[i] != 0 {
            return Err(internal(format!("spin {i} already carries a field"), &steps));
        }
        fields[i] = -i64::from(sigma);
        let (_, next) = inst.with_fields(&fields).ground_set(caps)?;
        let expected = slice_count(&set, i, sigma);
        if next.len() != expected || 2 * next.len() > set.len() {
            return Err(internal(
                format!("step on spin {i} left {} ground states, expected {expected}", next.len()),
                &steps,
            ));
        }
        for (j, &h) in fields.iter().enumerate() {
            if h == 0 {
                continue;
            }
            let bit = u64::from(h > 0);
            if let Some(&bad) = next.iter().find(|&&u| u >> j & 1 != bit) {
                return Err(internal(
                    format!(
                        "ground state {} ignores field {h} on spin {j}",
                        SpinConfig::new(n, bad)
                    ),
                    &steps,
                ));
            }
        }
        steps.push(ReductionStep {
            spin: i,
            sigma,
            ground_count: next.len(),
        });
        set = next;
    }
    let last = set[0];
    Ok(ReductionTrace {
        n,
        e0,
        n_gs_initial: original.len(),
        m: steps.len(),
        steps,
        final_fields: fields.iter().map(|&h| h as i8).collect(),
        final_ground: SpinConfig::new(n, last),
        final_in_original: original.binary_search(&last).is_ok(),
    })
}

fn internal(msg: String, steps: &[ReductionStep]) -> Error {
    Error::numerical(format!("reduction invariant breached: {msg}; trace {steps:?}"), 0.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChoiceCount {
    pub n: usize,
    pub n_gs: usize,
    pub log_n_gs: usize,
    #[serde(serialize_with = "decimal")]
    pub choices: BigUint,
    #[serde(serialize_with = "decimal")]
    pub bound: BigUint,
    pub holds: bool,
}

fn decimal<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(x)
}

/// `sum_{k=1..ceil(log2 n_gs)} 2^k C(n, k)` against `(2n)^ceil(log2 n_gs)`.
pub fn choice_count_bound(n: usize, n_gs: usize) -> Result<ChoiceCount> {
    if n_gs == 0 {
        return Err(Error::input("n_gs must be at least 1"));
    }
    let l = ceil_log2(n_gs);
    let mut choices = BigUint::zero();
    let mut binom = BigUint::one();
    for k in 1..=l.min(n) {
        binom = binom * BigUint::from(n - k + 1) / BigUint::from(k);
        choices += (BigUint::one() << k) * &binom;
    }
    let bound = num_traits::pow(BigUint::from(2 * n), l);
    Ok(ChoiceCount {
        n,
        n_gs,
        log_n_gs: l,
        holds: choices <= bound,
        choices,
        bound,
    })
}

/// Log-2 costs of the two routes for a degenerate instance: enumerating field
/// choices (times an unamplified cost exponent per choice) versus plain
/// amplitude amplification over `2^n / n_gs` marked fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossoverAccounting {
    pub n: usize,
    pub n_gs: usize,
    pub log2_choices: f64,
    pub log2_grover: f64,
    pub prefer_enumeration: bool,
}

pub fn crossover_accounting(n: usize, n_gs: usize) -> Result<CrossoverAccounting> {
    let cc = choice_count_bound(n, n_gs)?;
    let log2_choices = if cc.choices.is_zero() { 0.0 } else { log2_big(&cc.choices) };
    let log2_grover = 0.5 * (n as f64 - (n_gs as f64).log2());
    Ok(CrossoverAccounting {
        n,
        n_gs,
        log2_choices,
        log2_grover,
        prefer_enumeration: log2_choices < log2_grover,
    })
}

fn log2_big(x: &BigUint) -> f64 {
    let shift = x.bits().saturating_sub(53);
    let top = (x >> shift).to_u64_digits().first().copied().unwrap_or(0) as f64;
    top.log2() + shift as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftCheck {
    pub lifted_n: usize,
    pub ground_count: usize,
    /// One ground state for odd `d`, a global flip pair for even `d`.
    pub assumption_ok: bool,
    /// Every lifted ground state restricts to a ground state of the original.
    pub restriction_ok: bool,
    /// The restriction of the all-`+1`-ancilla ground state is `final_ground`.
    pub matches_reduction: bool,
}

impl LiftCheck {
    pub fn ok(&self) -> bool {
        self.assumption_ok && self.restriction_ok && self.matches_reduction
    }
}

/// Lifts the fields of `trace` to a uniform-degree instance and verifies it
/// by brute force.
pub fn verify_lift(inst: &Instance, trace: &ReductionTrace, caps: &Caps) -> Result<LiftCheck> {
    let lifted = inst.lift_to_uniform_degree(&trace.final_fields)?;
    let (_, lifted_set) = lifted.ground_set(caps)?;
    let (_, original) = inst.ground_set(caps)?;
    let n = inst.n();
    let lifted_n = lifted.n();
    let mask = (1u64 << n) - 1;
    let all = (1u64 << lifted_n) - 1;
    let assumption_ok = if inst.d() % 2 == 1 {
        lifted_set.len() == 1
    } else {
        lifted_set.len() == 2 && lifted_set[0] ^ lifted_set[1] == all
    };
    let restriction_ok = lifted_set
        .iter()
        .all(|&u| original.binary_search(&(u & mask)).is_ok());
    let matches_reduction = lifted_set
        .iter()
        .any(|&u| u >> n == 0 && u & mask == trace.final_ground.bits);
    Ok(LiftCheck {
        lifted_n,
        ground_count: lifted_set.len(),
        assumption_ok,
        restriction_ok,
        matches_reduction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{random_instance, CostTerm};
    use proptest::prelude::*;

    fn pair_of_i2() -> Instance {
        Instance::new(
            4,
            2,
            vec![CostTerm::new(vec![0, 1], -1), CostTerm::new(vec![2, 3], -1)],
        )
        .unwrap()
    }

    #[test]
    fn ground_set_of_i2() {
        let caps = Caps::default();
        let set = enumerate_ground_set(&Instance::i2(), &caps).unwrap();
        let bits: Vec<u64> = set.iter().map(|c| c.bits).collect();
        assert_eq!(bits, vec![0b00, 0b11]);
        let (_, fielded) = Instance::i2().with_fields(&[-1, 0]).ground_set(&caps).unwrap();
        assert_eq!(fielded, vec![0b00]);
    }

    #[test]
    fn ground_set_matches_histogram() {
        let inst = random_instance(10, 3, 20, &[-1, 1], 7).unwrap();
        let caps = Caps::default();
        let set = enumerate_ground_set(&inst, &caps).unwrap();
        let hist = inst.histogram(&caps).unwrap();
        assert_eq!(set.len() as u64, hist.n_gs);
    }

    #[test]
    fn half_split_examples() {
        assert_eq!(half_split(2, &[0b00, 0b11]).unwrap(), (0, 1));
        assert_eq!(half_split(2, &[0, 1, 2, 3]).unwrap(), (0, 1));
        assert_eq!(half_split(2, &[0b01, 0b11, 0b10]).unwrap(), (0, 1));
        assert!(matches!(half_split(2, &[1]), Err(Error::Precondition(_))));
    }

    #[test]
    fn sequence_on_i2() {
        let trace = degeneracy_sequence(&Instance::i2(), &Caps::default()).unwrap();
        assert_eq!(trace.m, 1);
        assert_eq!(trace.final_fields, vec![-1, 0]);
        assert_eq!(trace.final_ground.bits, 0);
        assert!(trace.final_in_original);
    }

    #[test]
    fn sequence_on_unique_instance_is_empty() {
        let inst = Instance::new(2, 1, vec![CostTerm::new(vec![0], -1), CostTerm::new(vec![1], 1)]).unwrap();
        let trace = degeneracy_sequence(&inst, &Caps::default()).unwrap();
        assert_eq!(trace.m, 0);
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn sequence_on_pair_of_i2() {
        let inst = pair_of_i2();
        let trace = degeneracy_sequence(&inst, &Caps::default()).unwrap();
        assert_eq!(trace.n_gs_initial, 4);
        assert!(trace.m <= 2);
        assert!(trace.halving_ok());
        let lift = verify_lift(&inst, &trace, &Caps::default()).unwrap();
        assert!(lift.ok(), "{lift:?}");
    }

    #[test]
    fn choice_counts() {
        let c = choice_count_bound(5, 1).unwrap();
        assert!(c.choices.is_zero() && c.holds);
        let c = choice_count_bound(4, 2).unwrap();
        assert_eq!(c.choices, BigUint::from(8u32));
        assert_eq!(c.bound, BigUint::from(8u32));
        let c = choice_count_bound(10, 4).unwrap();
        assert_eq!(c.choices, BigUint::from(200u32));
        assert_eq!(c.bound, BigUint::from(400u32));
    }

    #[test]
    fn crossover_is_finite() {
        let a = crossover_accounting(10, 4).unwrap();
        assert!((a.log2_choices - 200f64.log2()).abs() < 1e-12);
        assert!((a.log2_grover - 4.0).abs() < 1e-12);
        assert!(!a.prefer_enumeration);
    }

    #[test]
    fn ceil_log2_values() {
        let v: Vec<usize> = [1, 2, 3, 4, 5, 8, 9].iter().map(|&x| ceil_log2(x)).collect();
        assert_eq!(v, vec![0, 1, 2, 2, 3, 3, 4]);
    }

    proptest! {
        #[test]
        fn half_split_halves(raw in proptest::collection::btree_set(0u64..64, 2..40)) {
            let set: Vec<u64> = raw.into_iter().collect();
            let (i, sigma) = half_split(6, &set).unwrap();
            let t = slice_count(&set, i, sigma);
            prop_assert!(t >= 1 && t <= set.len() / 2);
        }

        #[test]
        fn sequence_invariants(seed in 0u64..500, d in 2usize..4) {
            let n = 7;
            let inst = random_instance(n, d, 6, &[-1, 1], seed).unwrap();
            let caps = Caps::default();
            let trace = degeneracy_sequence(&inst, &caps).unwrap();
            prop_assert!(trace.m <= trace.log_bound());
            prop_assert!(trace.halving_ok());
            prop_assert!(trace.final_in_original);
            prop_assert_eq!(trace.final_fields.iter().filter(|&&h| h != 0).count(), trace.m);
            let lift = verify_lift(&inst, &trace, &caps).unwrap();
            prop_assert!(lift.ok(), "{:?}", lift);
        }

        #[test]
        fn choice_bound_holds(n in 1usize..40, n_gs in 1usize..5000) {
            prop_assert!(choice_count_bound(n, n_gs).unwrap().holds);
        }
    }
}
