//! Degree-`D` Ising cost Hamiltonians `H_Z` with integer weights.
//!
//! Spin `i` of a configuration is bit `i` of a `u64`; bit value 0 means
//! `Z_i = +1` and bit value 1 means `Z_i = -1`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Caps;
use crate::error::{Error, Result};

/// One monomial `weight * Z_{q_1} ... Z_{q_D}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CostTerm {
    pub qubits: Vec<usize>,
    pub weight: i64,
}

impl CostTerm {
    pub fn new(mut qubits: Vec<usize>, weight: i64) -> Self {
        qubits.sort_unstable();
        Self { qubits, weight }
    }

    fn mask(&self) -> u64 {
        self.qubits.iter().fold(0u64, |m, &q| m | (1u64 << q))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawInstance {
    n: usize,
    d: usize,
    terms: Vec<CostTerm>,
}

/// A validated cost Hamiltonian. Terms are kept sorted by qubit set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    n: usize,
    d: usize,
    terms: Vec<CostTerm>,
    j_tot: i64,
    masks: Vec<(u64, i64)>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d && self.terms == other.terms
    }
}

impl Eq for Instance {}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(raw.n, raw.d, raw.terms)
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance {
            n: inst.n,
            d: inst.d,
            terms: inst.terms,
        }
    }
}

/// Checks every structural invariant and reports each violation.
pub fn validate(n: usize, d: usize, terms: &[CostTerm]) -> Vec<String> {
    let mut out = Vec::new();
    if d == 0 {
        out.push("degree must be at least 1".to_string());
    }
    if n < d {
        out.push(format!("spin count {n} is smaller than degree {d}"));
    }
    if n > 63 {
        out.push(format!("spin count {n} exceeds 63"));
    }
    if terms.is_empty() {
        out.push("instance has no terms".to_string());
    }
    let mut seen = HashSet::new();
    for (t, term) in terms.iter().enumerate() {
        if term.qubits.len() != d {
            out.push(format!("term {t}: has {} indices, expected {d}", term.qubits.len()));
        }
        if term.qubits.windows(2).any(|w| w[0] == w[1]) || {
            let set: BTreeSet<_> = term.qubits.iter().collect();
            set.len() != term.qubits.len()
        } {
            out.push(format!("term {t}: indices not distinct"));
        } else if term.qubits.windows(2).any(|w| w[0] > w[1]) {
            out.push(format!("term {t}: indices not sorted"));
        }
        if let Some(&q) = term.qubits.iter().find(|&&q| q >= n) {
            out.push(format!("term {t}: index {q} out of range"));
        }
        if term.weight == 0 {
            out.push(format!("term {t}: zero weight"));
        }
        let mut key = term.qubits.clone();
        key.sort_unstable();
        if !seen.insert(key) {
            out.push(format!("term {t}: duplicate term"));
        }
    }
    out
}

impl Instance {
    /// Builds an instance, rejecting it if any invariant fails.
    pub fn new(n: usize, d: usize, mut terms: Vec<CostTerm>) -> Result<Self> {
        let violations = validate(n, d, &terms);
        if !violations.is_empty() {
            return Err(Error::input(violations.join("; ")));
        }
        terms.sort();
        let j_tot = terms.iter().map(|t| t.weight.abs()).sum();
        let masks = terms.iter().map(|t| (t.mask(), t.weight)).collect();
        Ok(Self {
            n,
            d,
            terms,
            j_tot,
            masks,
        })
    }

    /// The two-spin instance `-Z_0 Z_1`.
    pub fn i2() -> Self {
        Self::new(2, 2, vec![CostTerm::new(vec![0, 1], -1)]).expect("valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &[CostTerm] {
        &self.terms
    }

    pub fn j_tot(&self) -> i64 {
        self.j_tot
    }

    /// `log(j_tot) / log(n)`; diagnostic only.
    pub fn beta(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        (self.j_tot as f64).ln() / (self.n as f64).ln()
    }

    /// Whether `H_Z` commutes with the global spin flip.
    pub fn is_even(&self) -> bool {
        self.d.is_multiple_of(2)
    }

    /// Energy of the configuration whose spin `i` is bit `i` of `bits`.
    #[inline]
    pub fn energy_bits(&self, bits: u64) -> i64 {
        let mut e = 0i64;
        for &(mask, w) in &self.masks {
            if (bits & mask).count_ones() & 1 == 0 {
                e += w;
            } else {
                e -= w;
            }
        }
        e
    }

    pub fn energy_of(&self, u: &SpinConfig) -> Result<i64> {
        if u.n != self.n {
            return Err(Error::input(format!(
                "configuration has {} spins, instance has {}",
                u.n, self.n
            )));
        }
        Ok(self.energy_bits(u.bits))
    }

    /// Exhaustive density of states `W(E)`.
    pub fn histogram(&self, caps: &Caps) -> Result<EnergyHistogram> {
        caps.check_exhaustive(self.n)?;
        let total = 1u64 << self.n;
        let chunks = chunk_ranges(total);
        let partial: Vec<BTreeMap<i64, u64>> = chunks
            .par_iter()
            .map(|&(lo, hi)| {
                let mut map = BTreeMap::new();
                for u in lo..hi {
                    *map.entry(self.energy_bits(u)).or_insert(0) += 1;
                }
                map
            })
            .collect();
        let mut counts = BTreeMap::new();
        for map in partial {
            for (e, c) in map {
                *counts.entry(e).or_insert(0u64) += c;
            }
        }
        EnergyHistogram::from_counts(counts)
    }

    /// Every configuration attaining the minimum energy, in increasing order.
    pub fn ground_set(&self, caps: &Caps) -> Result<(i64, Vec<u64>)> {
        caps.check_exhaustive(self.n)?;
        let chunks = chunk_ranges(1u64 << self.n);
        let partial: Vec<(i64, Vec<u64>)> = chunks
            .par_iter()
            .map(|&(lo, hi)| {
                let mut best = i64::MAX;
                let mut set = Vec::new();
                for u in lo..hi {
                    let e = self.energy_bits(u);
                    if e < best {
                        best = e;
                        set.clear();
                    }
                    if e == best {
                        set.push(u);
                    }
                }
                (best, set)
            })
            .collect();
        let e0 = partial.iter().map(|p| p.0).min().unwrap_or(0);
        let set = partial
            .into_iter()
            .filter(|p| p.0 == e0)
            .flat_map(|p| p.1)
            .collect();
        Ok((e0, set))
    }

    /// Returns `H_Z + sum_i field_i Z_i` as a mixed-degree term list; used by
    /// the reduction, which only needs energies.
    pub fn with_fields(&self, fields: &[i64]) -> FieldedInstance<'_> {
        FieldedInstance {
            base: self,
            fields: fields.to_vec(),
        }
    }

    /// Adds `D + 1` ancilla spins so that the single-spin fields `h_i Z_i`
    /// become degree-`D` terms `h_i Z_i Z_n ... Z_{n+D-2}`, and adds
    /// `J = -sum` of every degree-`D` monomial on the ancillas.
    pub fn lift_to_uniform_degree(&self, fields: &[i8]) -> Result<Instance> {
        if fields.len() != self.n {
            return Err(Error::input(format!(
                "field vector has length {}, expected {}",
                fields.len(),
                self.n
            )));
        }
        if fields.iter().any(|h| !(-1..=1).contains(h)) {
            return Err(Error::input("fields must lie in {-1, 0, +1}"));
        }
        let (n, d) = (self.n, self.d);
        let mut acc: BTreeMap<Vec<usize>, i64> = BTreeMap::new();
        for t in &self.terms {
            *acc.entry(t.qubits.clone()).or_insert(0) += t.weight;
        }
        for subset in combinations(d + 1, d) {
            let qubits: Vec<usize> = subset.into_iter().map(|a| n + a).collect();
            *acc.entry(qubits).or_insert(0) -= 1;
        }
        for (i, &h) in fields.iter().enumerate() {
            if h == 0 {
                continue;
            }
            let mut qubits = vec![i];
            qubits.extend(n..n + d - 1);
            *acc.entry(qubits).or_insert(0) += h as i64;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, w)| *w != 0)
            .map(|(q, w)| CostTerm::new(q, w))
            .collect();
        Instance::new(n + d + 1, d, terms)
    }

    /// Converts `sum J_ij Z_i Z_j + sum h_i Z_i` on `n` spins into a uniform
    /// degree-2 instance on `n + 1` spins: the new spin 0 multiplies every field
    /// term, and old spin `i` becomes spin `i + 1`.
    pub fn from_max2lin2(n: usize, pairs: &[(usize, usize, i64)], fields: &[(usize, i64)]) -> Result<Instance> {
        let mut terms = Vec::with_capacity(pairs.len() + fields.len());
        for &(i, j, w) in pairs {
            terms.push(CostTerm::new(vec![i + 1, j + 1], w));
        }
        for &(i, h) in fields {
            terms.push(CostTerm::new(vec![0, i + 1], h));
        }
        Instance::new(n + 1, 2, terms)
    }
}

/// An instance with additional single-spin fields.
#[derive(Debug, Clone)]
pub struct FieldedInstance<'a> {
    base: &'a Instance,
    fields: Vec<i64>,
}

impl FieldedInstance<'_> {
    #[inline]
    pub fn energy_bits(&self, bits: u64) -> i64 {
        let mut e = self.base.energy_bits(bits);
        for (i, &h) in self.fields.iter().enumerate() {
            if h != 0 {
                e += if bits >> i & 1 == 0 { h } else { -h };
            }
        }
        e
    }

    pub fn ground_set(&self, caps: &Caps) -> Result<(i64, Vec<u64>)> {
        caps.check_exhaustive(self.base.n)?;
        let mut best = i64::MAX;
        let mut set = Vec::new();
        for u in 0..1u64 << self.base.n {
            let e = self.energy_bits(u);
            if e < best {
                best = e;
                set.clear();
            }
            if e == best {
                set.push(u);
            }
        }
        Ok((best, set))
    }
}

/// Splits `[0, total)` into a fixed number of contiguous ranges so that
/// parallel reductions do not depend on the worker count.
pub(crate) fn chunk_ranges(total: u64) -> Vec<(u64, u64)> {
    let pieces = total.clamp(1, 256);
    let step = total.div_ceil(pieces).max(1);
    (0..total.div_ceil(step))
        .map(|c| (c * step, ((c + 1) * step).min(total)))
        .collect()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Draws `m` distinct degree-`d` terms uniformly without replacement, with
/// weights uniform over `weight_set`.
pub fn random_instance(n: usize, d: usize, m: usize, weight_set: &[i64], seed: u64) -> Result<Instance> {
    if weight_set.is_empty() || weight_set.contains(&0) {
        return Err(Error::input("weight set must be nonempty and exclude zero"));
    }
    if d == 0 || d > n || n > 63 {
        return Err(Error::input(format!("invalid (n, d) = ({n}, {d})")));
    }
    let total = binomial(n, d);
    if m as u64 > total {
        return Err(Error::input(format!("{m} terms requested but only C({n},{d}) = {total} exist")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qubit_sets: Vec<Vec<usize>> = if total <= 1 << 20 {
        let all = combinations(n, d);
        index::sample(&mut rng, all.len(), m)
            .into_iter()
            .map(|i| all[i].clone())
            .collect()
    } else {
        let mut chosen = BTreeSet::new();
        let mut order = Vec::with_capacity(m);
        while order.len() < m {
            let mut q: Vec<usize> = index::sample(&mut rng, n, d).into_vec();
            q.sort_unstable();
            if chosen.insert(q.clone()) {
                order.push(q);
            }
        }
        order
    };
    let terms = qubit_sets
        .into_iter()
        .map(|q| {
            let w = weight_set[rng.random_range(0..weight_set.len())];
            CostTerm::new(q, w)
        })
        .collect();
    Instance::new(n, d, terms)
}

/// A computational basis configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfig {
    pub n: usize,
    pub bits: u64,
}

impl SpinConfig {
    pub fn new(n: usize, bits: u64) -> Self {
        debug_assert!(n == 64 || bits >> n == 0);
        Self { n, bits }
    }

    /// Parses a string of `0`/`1` characters, spin 0 first.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = 0u64;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << i,
                _ => return Err(Error::input(format!("invalid spin character {c:?}"))),
            }
        }
        Ok(Self { n: s.len(), bits })
    }

    /// `z_i` in `{+1, -1}`.
    pub fn z(&self, i: usize) -> i8 {
        if self.bits >> i & 1 == 0 {
            1
        } else {
            -1
        }
    }

    /// Global spin flip `u -> u-bar`.
    pub fn complement(&self) -> Self {
        let mask = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        Self {
            n: self.n,
            bits: !self.bits & mask,
        }
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.bits >> i & 1 == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl Serialize for SpinConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SpinConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SpinConfig::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Density of states `W(E)` with the ground energy and its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyHistogram {
    pub counts: BTreeMap<i64, u64>,
    pub e0: i64,
    pub n_gs: u64,
}

impl EnergyHistogram {
    pub fn from_counts(counts: BTreeMap<i64, u64>) -> Result<Self> {
        let counts: BTreeMap<i64, u64> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        let (&e0, &n_gs) = counts
            .iter()
            .next()
            .ok_or_else(|| Error::input("empty histogram"))?;
        Ok(Self { counts, e0, n_gs })
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, e: i64) -> u64 {
        self.counts.get(&e).copied().unwrap_or(0)
    }

    /// Smallest energy strictly above the ground energy, if any.
    pub fn first_excited(&self) -> Option<i64> {
        self.counts.keys().nth(1).copied()
    }
}
