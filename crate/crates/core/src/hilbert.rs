//! State vectors and the operators `H_Z`, `X`, `(X/N)^K` and `H_s`.
//!
//! In [`BasisMode::Full`] index `u` is the configuration whose spin `i` is bit
//! `i` of `u`. In [`BasisMode::Even`] index `j` stands for the normalized pair
//! `(|u> + |u-bar>)/sqrt 2` with representative `u = j << 1`, the member of the
//! pair whose spin 0 is `+1` (the lexicographically smaller bit string when
//! written spin 0 first).

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, SpinConfig};
use crate::linalg;
use crate::scalar::Scalar;

const PAR_THRESHOLD: usize = 1 << 14;
const PAR_CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisMode {
    Full,
    Even,
}

impl BasisMode {
    /// Even mode for even degree, full mode otherwise.
    pub fn auto(inst: &Instance) -> Self {
        if inst.is_even() {
            BasisMode::Even
        } else {
            BasisMode::Full
        }
    }

    pub fn dim(self, n: usize) -> usize {
        match self {
            BasisMode::Full => 1 << n,
            BasisMode::Even => 1 << (n - 1),
        }
    }

    /// Number of bits indexing the working basis.
    pub fn bits(self, n: usize) -> usize {
        match self {
            BasisMode::Full => n,
            BasisMode::Even => n - 1,
        }
    }

    pub fn check(self, inst: &Instance) -> Result<()> {
        if self == BasisMode::Even && !inst.is_even() {
            return Err(Error::input("even mode requires an even degree"));
        }
        Ok(())
    }

    /// Working-basis index of configuration `u`.
    pub fn index_of(self, n: usize, u: u64) -> usize {
        match self {
            BasisMode::Full => u as usize,
            BasisMode::Even => {
                let rep = if u & 1 == 0 { u } else { !u & ((1u64 << n) - 1) };
                (rep >> 1) as usize
            }
        }
    }

    /// Representative configuration of working-basis index `j`.
    pub fn config_of(self, j: usize) -> u64 {
        match self {
            BasisMode::Full => j as u64,
            BasisMode::Even => (j as u64) << 1,
        }
    }
}

/// Real amplitudes over the working basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StateVector<T> {
    pub n: usize,
    pub mode: BasisMode,
    pub amps: Vec<T>,
}

impl<T: Scalar> StateVector<T> {
    pub fn new(n: usize, mode: BasisMode, amps: Vec<T>) -> Result<Self> {
        if n == 0 || n > 40 || (mode == BasisMode::Even && n < 2) {
            return Err(Error::input(format!("unsupported spin count {n} for {mode:?} mode")));
        }
        if amps.len() != mode.dim(n) {
            return Err(Error::input(format!(
                "amplitude vector has length {}, expected {}",
                amps.len(),
                mode.dim(n)
            )));
        }
        if amps.iter().any(|a| !a.is_finite()) {
            return Err(Error::input("non-finite amplitude"));
        }
        Ok(Self { n, mode, amps })
    }

    pub fn zeros(n: usize, mode: BasisMode) -> Self {
        Self {
            n,
            mode,
            amps: vec![T::zero(); mode.dim(n)],
        }
    }

    /// `|+>^{(x) N}`.
    pub fn plus(n: usize, mode: BasisMode) -> Self {
        let dim = mode.dim(n);
        let a = T::one() / T::from_usize_lossy(dim).sqrt();
        Self {
            n,
            mode,
            amps: vec![a; dim],
        }
    }

    /// Working-basis vector containing configuration `u`.
    pub fn basis(n: usize, mode: BasisMode, u: u64) -> Self {
        let mut v = Self::zeros(n, mode);
        v.amps[mode.index_of(n, u)] = T::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sq(&self) -> T {
        linalg::dot(&self.amps, &self.amps)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        linalg::dot(&self.amps, &other.amps)
    }

    pub fn normalized(mut self) -> Result<Self> {
        if linalg::normalize(&mut self.amps) == T::zero() {
            return Err(Error::input("cannot normalize the zero vector"));
        }
        Ok(self)
    }

    pub fn check_unit(&self) -> Result<()> {
        let dev = (self.norm_sq() - T::one()).abs();
        if dev > T::unit_tol() {
            return Err(Error::input(format!(
                "state is not normalized (| |v|^2 - 1 | = {:.3e})",
                dev.as_f64()
            )));
        }
        Ok(())
    }

    pub fn same_space(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.mode != other.mode {
            return Err(Error::input("state vectors live in different spaces"));
        }
        Ok(())
    }

    /// Embedding into the full `2^n` space.
    pub fn to_full(&self) -> Self {
        match self.mode {
            BasisMode::Full => self.clone(),
            BasisMode::Even => {
                let mask = (1u64 << self.n) - 1;
                let r = T::lit(std::f64::consts::FRAC_1_SQRT_2);
                let mut amps = vec![T::zero(); 1 << self.n];
                for (j, &a) in self.amps.iter().enumerate() {
                    let u = (j as u64) << 1;
                    amps[u as usize] = a * r;
                    amps[(!u & mask) as usize] = a * r;
                }
                Self {
                    n: self.n,
                    mode: BasisMode::Full,
                    amps,
                }
            }
        }
    }

    /// Orthogonal projection of a full-mode vector onto the even subspace,
    /// expressed in even-mode coordinates.
    pub fn project_even(&self) -> Result<Self> {
        if self.mode != BasisMode::Full {
            return Err(Error::input("projection expects a full-mode vector"));
        }
        let mask = (1u64 << self.n) - 1;
        let r = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        let amps = (0..1usize << (self.n - 1))
            .map(|j| {
                let u = (j as u64) << 1;
                (self.amps[u as usize] + self.amps[(!u & mask) as usize]) * r
            })
            .collect();
        Ok(Self {
            n: self.n,
            mode: BasisMode::Even,
            amps,
        })
    }

    /// Calls `f(u, p)` for every computational outcome `u` with its
    /// measurement probability `p = |<u|v>|^2` (unnormalized if `v` is).
    pub fn for_each_outcome(&self, mut f: impl FnMut(u64, T)) {
        match self.mode {
            BasisMode::Full => {
                for (u, &a) in self.amps.iter().enumerate() {
                    f(u as u64, a * a);
                }
            }
            BasisMode::Even => {
                let mask = (1u64 << self.n) - 1;
                let half = T::lit(0.5);
                for (j, &a) in self.amps.iter().enumerate() {
                    let u = (j as u64) << 1;
                    f(u, a * a * half);
                    f(!u & mask, a * a * half);
                }
            }
        }
    }
}

/// Parameters of `H_s = H_Z - s B (X/N)^K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HsParams<T> {
    pub s: T,
    pub big_b: T,
    pub k: u32,
    /// Allows `s` outside `[0, 1]`.
    #[serde(default)]
    pub extended: bool,
}

impl<T: Scalar> HsParams<T> {
    pub fn new(s: T, big_b: T, k: u32) -> Result<Self> {
        let p = Self {
            s,
            big_b,
            k,
            extended: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn extended(s: T, big_b: T, k: u32) -> Result<Self> {
        let p = Self {
            s,
            big_b,
            k,
            extended: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.is_multiple_of(2) {
            return Err(Error::input(format!("K = {} must be odd", self.k)));
        }
        if !(self.big_b >= T::zero()) || !self.big_b.is_finite() {
            return Err(Error::input("B must be finite and non-negative"));
        }
        if !self.s.is_finite() || (!self.extended && (self.s < T::zero() || self.s > T::one())) {
            return Err(Error::input("s must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn at(&self, s: T) -> Self {
        Self { s, ..*self }
    }

    /// `s * B`.
    pub fn coupling(&self) -> T {
        self.s * self.big_b
    }

    /// `B = -b E_0`.
    pub fn from_b(b: T, e0: i64, k: u32, s: T) -> Result<Self> {
        Self::new(s, -b * T::from_i64_lossy(e0), k)
    }
}

/// Smallest odd integer `>= c * log2(n)` (at least 1).
pub fn k_from_c(c: f64, n: usize) -> u32 {
    let target = (c * (n as f64).log2()).ceil().max(1.0) as u32;
    if target.is_multiple_of(2) {
        target + 1
    } else {
        target
    }
}

/// `y = X x` in the given mode.
pub fn apply_x_raw<T: Scalar>(n: usize, mode: BasisMode, x: &[T], y: &mut [T]) {
    let bits = mode.bits(n);
    let spin0 = match mode {
        BasisMode::Full => None,
        BasisMode::Even => Some((1usize << (n - 1)) - 1),
    };
    let row = |j: usize| -> T {
        let mut acc = T::zero();
        for i in 0..bits {
            acc += x[j ^ (1 << i)];
        }
        if let Some(m) = spin0 {
            acc += x[j ^ m];
        }
        acc
    };
    if y.len() >= PAR_THRESHOLD {
        y.par_chunks_mut(PAR_CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * PAR_CHUNK;
            for (o, out) in chunk.iter_mut().enumerate() {
                *out = row(base + o);
            }
        });
    } else {
        for (j, out) in y.iter_mut().enumerate() {
            *out = row(j);
        }
    }
}

/// `x <- (X/N)^k x`, using `scratch` of the same length.
pub fn apply_x_power_in_place<T: Scalar>(n: usize, mode: BasisMode, k: u32, x: &mut Vec<T>, scratch: &mut Vec<T>) {
    let inv_n = T::one() / T::from_usize_lossy(n);
    for _ in 0..k {
        apply_x_raw(n, mode, x, scratch);
        for v in scratch.iter_mut() {
            *v *= inv_n;
        }
        std::mem::swap(x, scratch);
    }
}

/// Matrix-free `H_s` with the diagonal precomputed.
#[derive(Debug, Clone)]
pub struct HsOperator<T> {
    pub n: usize,
    pub mode: BasisMode,
    pub diag: Vec<T>,
    pub coupling: T,
    pub k: u32,
}

impl<T: Scalar> HsOperator<T> {
    pub fn new(inst: &Instance, p: &HsParams<T>, mode: BasisMode) -> Result<Self> {
        mode.check(inst)?;
        p.validate()?;
        Ok(Self {
            n: inst.n(),
            mode,
            diag: diagonal(inst, mode),
            coupling: p.coupling(),
            k: p.k,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Same operator at a different path parameter.
    pub fn with_coupling(&self, coupling: T) -> Self {
        Self {
            coupling,
            ..self.clone()
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.coupling == T::zero()
    }

    /// `y = H_s x`.
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        if self.is_diagonal() {
            for ((o, &d), &v) in y.iter_mut().zip(&self.diag).zip(x) {
                *o = d * v;
            }
            return;
        }
        let mut t = x.to_vec();
        let mut scratch = vec![T::zero(); x.len()];
        apply_x_power_in_place(self.n, self.mode, self.k, &mut t, &mut scratch);
        let c = self.coupling;
        for (((o, &d), &v), &w) in y.iter_mut().zip(&self.diag).zip(x).zip(&t) {
            *o = d * v - c * w;
        }
    }

    /// `y = V x` with `V = -B (X/N)^K`, where `B` is the coupling at `s = 1`.
    pub fn apply_v(&self, big_b: T, x: &[T], y: &mut [T]) {
        let mut t = x.to_vec();
        let mut scratch = vec![T::zero(); x.len()];
        apply_x_power_in_place(self.n, self.mode, self.k, &mut t, &mut scratch);
        for (o, &w) in y.iter_mut().zip(&t) {
            *o = -big_b * w;
        }
    }

    /// Dense row-major matrix, by applying the operator to unit vectors.
    pub fn dense(&self) -> Vec<T> {
        let dim = self.dim();
        let mut m = vec![T::zero(); dim * dim];
        let mut e = vec![T::zero(); dim];
        let mut col = vec![T::zero(); dim];
        for j in 0..dim {
            e[j] = T::one();
            self.apply(&e, &mut col);
            e[j] = T::zero();
            for i in 0..dim {
                m[i * dim + j] = col[i];
            }
        }
        m
    }
}

/// `H_Z` energies over the working basis.
pub fn diagonal<T: Scalar>(inst: &Instance, mode: BasisMode) -> Vec<T> {
    let dim = mode.dim(inst.n());
    let eval = |j: usize| T::from_i64_lossy(inst.energy_bits(mode.config_of(j)));
    if dim >= PAR_THRESHOLD {
        (0..dim).into_par_iter().map(eval).collect()
    } else {
        (0..dim).map(eval).collect()
    }
}

pub fn apply_hz<T: Scalar>(inst: &Instance, v: &StateVector<T>) -> Result<StateVector<T>> {
    check_instance(inst, v)?;
    let diag = diagonal::<T>(inst, v.mode);
    let amps = v.amps.iter().zip(&diag).map(|(&a, &d)| a * d).collect();
    Ok(StateVector {
        n: v.n,
        mode: v.mode,
        amps,
    })
}

pub fn apply_x<T: Scalar>(v: &StateVector<T>) -> StateVector<T> {
    let mut out = StateVector::zeros(v.n, v.mode);
    apply_x_raw(v.n, v.mode, &v.amps, &mut out.amps);
    out
}

/// `(X/N)^k v` by repeated sparse application.
pub fn apply_x_power<T: Scalar>(v: &StateVector<T>, k: u32) -> StateVector<T> {
    let mut amps = v.amps.clone();
    let mut scratch = vec![T::zero(); amps.len()];
    apply_x_power_in_place(v.n, v.mode, k, &mut amps, &mut scratch);
    StateVector {
        n: v.n,
        mode: v.mode,
        amps,
    }
}

pub fn apply_hs<T: Scalar>(inst: &Instance, p: &HsParams<T>, v: &StateVector<T>) -> Result<StateVector<T>> {
    check_instance(inst, v)?;
    let op = HsOperator::new(inst, p, v.mode)?;
    let mut out = StateVector::zeros(v.n, v.mode);
    op.apply(&v.amps, &mut out.amps);
    Ok(out)
}

fn check_instance<T: Scalar>(inst: &Instance, v: &StateVector<T>) -> Result<()> {
    if inst.n() != v.n {
        return Err(Error::input(format!("state has {} spins, instance has {}", v.n, inst.n())));
    }
    v.mode.check(inst)
}

/// `<v|X|v>`.
pub fn expect_x<T: Scalar>(v: &StateVector<T>) -> T {
    v.dot(&apply_x(v))
}

/// Unnormalized in-place Walsh-Hadamard transform; applying it twice
/// multiplies by the length.
pub fn walsh_hadamard<T: Scalar>(a: &mut [T]) {
    let len = a.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (p, q) = (*x, *y);
                *x = p + q;
                *y = p - q;
            }
        }
        h *= 2;
    }
}

/// `X`-eigenvalue `N - 2 popcount(k)` of Walsh index `k`.
#[inline]
pub fn x_eigenvalue(n: usize, k: usize) -> i64 {
    n as i64 - 2 * k.count_ones() as i64
}

/// Coefficients of `v` in the `X` eigenbasis (normalized transform),
/// indexed over the full space.
fn x_basis_coefficients<T: Scalar>(v: &StateVector<T>) -> Vec<T> {
    let mut c = v.to_full().amps;
    walsh_hadamard(&mut c);
    let r = T::one() / T::from_usize_lossy(c.len()).sqrt();
    for x in c.iter_mut() {
        *x *= r;
    }
    c
}

fn from_x_basis<T: Scalar>(mut c: Vec<T>, n: usize, mode: BasisMode) -> StateVector<T> {
    walsh_hadamard(&mut c);
    let r = T::one() / T::from_usize_lossy(c.len()).sqrt();
    for x in c.iter_mut() {
        *x *= r;
    }
    let full = StateVector {
        n,
        mode: BasisMode::Full,
        amps: c,
    };
    match mode {
        BasisMode::Full => full,
        BasisMode::Even => full.project_even().expect("full-mode input"),
    }
}

/// Band label of `X`-eigenvalue `x_val` for width `w`: `floor(x_val / w)`.
#[inline]
pub fn band_of(x_val: i64, w: i64) -> i64 {
    x_val.div_euclid(w)
}

/// Projection onto `X`-eigenvalues in `[x w, x w + w)`.
pub fn band_project<T: Scalar>(v: &StateVector<T>, w: usize, x: i64) -> Result<StateVector<T>> {
    if w == 0 {
        return Err(Error::input("band width must be at least 1"));
    }
    let mut c = x_basis_coefficients(v);
    for (k, a) in c.iter_mut().enumerate() {
        if band_of(x_eigenvalue(v.n, k), w as i64) != x {
            *a = T::zero();
        }
    }
    Ok(from_x_basis(c, v.n, v.mode))
}

/// All nonzero band projections, keyed by band label.
pub fn band_decompose<T: Scalar>(v: &StateVector<T>, w: usize) -> Result<BTreeMap<i64, StateVector<T>>> {
    if w == 0 {
        return Err(Error::input("band width must be at least 1"));
    }
    let c = x_basis_coefficients(v);
    let mut per_band: BTreeMap<i64, Vec<T>> = BTreeMap::new();
    for (k, &a) in c.iter().enumerate() {
        if a != T::zero() {
            let band = band_of(x_eigenvalue(v.n, k), w as i64);
            per_band.entry(band).or_insert_with(|| vec![T::zero(); c.len()])[k] = a;
        }
    }
    Ok(per_band
        .into_iter()
        .map(|(b, coeffs)| (b, from_x_basis(coeffs, v.n, v.mode)))
        .collect())
}

/// Weight of `v` on each `X`-eigenvalue `N - 2k`, indexed by `k`.
pub fn x_spectrum_weights<T: Scalar>(v: &StateVector<T>) -> Vec<T> {
    let c = x_basis_coefficients(v);
    let mut w = vec![T::zero(); v.n + 1];
    for (k, &a) in c.iter().enumerate() {
        w[k.count_ones() as usize] += a * a;
    }
    w
}

/// `(X/N)^k v` evaluated in the `X` eigenbasis; cross-check for
/// [`apply_x_power`].
pub fn x_power_spectral<T: Scalar>(v: &StateVector<T>, k: u32) -> StateVector<T> {
    let mut c = x_basis_coefficients(v);
    let n = T::from_usize_lossy(v.n);
    for (idx, a) in c.iter_mut().enumerate() {
        let lam = T::from_i64_lossy(x_eigenvalue(v.n, idx)) / n;
        *a *= lam.powi(k as i32);
    }
    from_x_basis(c, v.n, v.mode)
}

/// Shannon entropy in bits of the computational-basis measurement.
pub fn s_comp<T: Scalar>(v: &StateVector<T>) -> Result<T> {
    v.check_unit()?;
    let mut acc = T::zero();
    v.for_each_outcome(|_, p| {
        if p > T::zero() {
            acc -= p * p.log2();
        }
    });
    Ok(acc)
}

/// Repeated computational-basis measurement of one state.
#[derive(Debug, Clone)]
pub struct MeasurementSampler {
    n: usize,
    mode: BasisMode,
    cumulative: Vec<f64>,
}

impl MeasurementSampler {
    pub fn new<T: Scalar>(v: &StateVector<T>) -> Result<Self> {
        v.check_unit()?;
        let mut acc = 0.0;
        let cumulative = v
            .amps
            .iter()
            .map(|a| {
                acc += a.as_f64() * a.as_f64();
                acc
            })
            .collect();
        Ok(Self {
            n: v.n,
            mode: v.mode,
            cumulative,
        })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> SpinConfig {
        let total = *self.cumulative.last().expect("nonempty");
        let r = rng.random::<f64>() * total;
        let j = self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1);
        let mut u = self.mode.config_of(j);
        if self.mode == BasisMode::Even && rng.random_bool(0.5) {
            u = !u & ((1u64 << self.n) - 1);
        }
        SpinConfig::new(self.n, u)
    }
}

pub fn sample_measurement<T: Scalar>(v: &StateVector<T>, rng: &mut impl Rng) -> Result<SpinConfig> {
    Ok(MeasurementSampler::new(v)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::random_instance;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    fn random_state(n: usize, mode: BasisMode, seed: u64) -> StateVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..mode.dim(n)).map(|_| rng.random_range(-1.0..1.0)).collect();
        StateVector::new(n, mode, amps).unwrap()
    }

    #[test]
    fn plus_states() {
        let v = StateVector::<f64>::plus(2, BasisMode::Even);
        assert!(v.amps.iter().all(|&a| (a - 0.5f64.sqrt()).abs() < TOL));
        let v = StateVector::<f64>::plus(3, BasisMode::Full);
        assert!(v.amps.iter().all(|&a| (a - 2f64.powf(-1.5)).abs() < TOL));
        for n in 1..7 {
            let v = StateVector::<f64>::plus(n, BasisMode::Full);
            assert!((expect_x(&v) - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn i2_even_operators() {
        let i2 = Instance::i2();
        let e0 = StateVector::new(2, BasisMode::Even, vec![1.0, 0.0]).unwrap();
        let e1 = StateVector::new(2, BasisMode::Even, vec![0.0, 1.0]).unwrap();
        assert_eq!(apply_hz(&i2, &e0).unwrap().amps, vec![-1.0, 0.0]);
        assert_eq!(apply_hz(&i2, &e1).unwrap().amps, vec![0.0, 1.0]);
        assert_eq!(apply_x(&e0).amps, vec![0.0, 2.0]);
        let p = HsParams::new(1.0, 1.0, 3).unwrap();
        let op = HsOperator::new(&i2, &p, BasisMode::Even).unwrap();
        assert_eq!(op.dense(), vec![-1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn full_mode_single_flip() {
        let v = StateVector::new(1, BasisMode::Full, vec![1.0, 0.0]).unwrap();
        assert_eq!(apply_x(&v).amps, vec![0.0, 1.0]);
    }

    #[test]
    fn even_mode_rejected_for_odd_degree() {
        let inst = random_instance(4, 3, 2, &[1], 0).unwrap();
        let v = StateVector::<f64>::plus(4, BasisMode::Even);
        assert!(apply_hz(&inst, &v).is_err());
    }

    #[test]
    fn hz_matches_energy_of() {
        let inst = random_instance(6, 3, 8, &[-2, -1, 1, 2], 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let u = rng.random_range(0..64u64);
            let v = StateVector::<f64>::basis(6, BasisMode::Full, u);
            let hv = apply_hz(&inst, &v).unwrap();
            assert_eq!(v.dot(&hv), inst.energy_bits(u) as f64);
        }
    }

    #[test]
    fn hs_endpoints_reduce_to_hz() {
        let inst = random_instance(5, 2, 6, &[-1, 1], 1).unwrap();
        let v = random_state(5, BasisMode::Even, 2);
        let hz = apply_hz(&inst, &v).unwrap();
        let s0 = apply_hs(&inst, &HsParams::new(0.0, 2.0, 3).unwrap(), &v).unwrap();
        let b0 = apply_hs(&inst, &HsParams::new(0.7, 0.0, 3).unwrap(), &v).unwrap();
        assert_eq!(hz, s0);
        assert_eq!(hz, b0);
    }

    #[test]
    fn even_mode_matches_embedded_full_action() {
        let inst = random_instance(6, 2, 9, &[-1, 1], 3).unwrap();
        let p = HsParams::new(0.6, 1.7, 5).unwrap();
        let v = random_state(6, BasisMode::Even, 4);
        let even = apply_hs(&inst, &p, &v).unwrap().to_full();
        let full = apply_hs(&inst, &p, &v.to_full()).unwrap();
        for (a, b) in even.amps.iter().zip(&full.amps) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn band_projection_properties() {
        let plus = StateVector::<f64>::plus(4, BasisMode::Full);
        let top = band_project(&plus, 2, 2).unwrap();
        for (a, b) in top.amps.iter().zip(&plus.amps) {
            assert!((a - b).abs() < TOL);
        }
        for mode in [BasisMode::Full, BasisMode::Even] {
            let v = random_state(4, mode, 9);
            let mut sum = vec![0.0; v.dim()];
            let mut norms = 0.0;
            for x in -3..=3 {
                let b = band_project(&v, 2, x).unwrap();
                norms += b.norm_sq();
                linalg::axpy(1.0, &b.amps, &mut sum);
            }
            for (a, b) in sum.iter().zip(&v.amps) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((norms - v.norm_sq()).abs() < 1e-12);
            let bands = band_decompose(&v, 3).unwrap();
            let total: f64 = bands.values().map(|b| b.norm_sq()).sum();
            assert!((total - v.norm_sq()).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_power_matches_repeated_application() {
        for n in [3usize, 6, 9, 12] {
            let v = random_state(n, BasisMode::Full, n as u64);
            let a = apply_x_power(&v, 5);
            let b = x_power_spectral(&v, 5);
            for (x, y) in a.amps.iter().zip(&b.amps) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        let v = random_state(8, BasisMode::Even, 1);
        let a = apply_x_power(&v, 3);
        let b = x_power_spectral(&v, 3);
        for (x, y) in a.amps.iter().zip(&b.amps) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_examples() {
        let plus = StateVector::<f64>::plus(5, BasisMode::Full);
        assert!((s_comp(&plus).unwrap() - 5.0).abs() < 1e-12);
        let e = StateVector::<f64>::basis(5, BasisMode::Full, 3);
        assert_eq!(s_comp(&e).unwrap(), 0.0);
        let pair = StateVector::<f64>::basis(2, BasisMode::Even, 0);
        assert!((s_comp(&pair).unwrap() - 1.0).abs() < 1e-12);
        let bad = StateVector::new(2, BasisMode::Full, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(s_comp(&bad).is_err());
    }

    #[test]
    fn sampling_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = StateVector::<f64>::basis(3, BasisMode::Full, 5);
        for _ in 0..100 {
            assert_eq!(sample_measurement(&basis, &mut rng).unwrap().bits, 5);
        }
        let plus = StateVector::<f64>::plus(2, BasisMode::Full);
        let sampler = MeasurementSampler::new(&plus).unwrap();
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[sampler.sample(&mut rng).bits as usize] += 1;
        }
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 / 4.0).abs() < 3.0 * sigma);
        }
        let e0 = StateVector::<f64>::basis(2, BasisMode::Even, 0);
        let sampler = MeasurementSampler::new(&e0).unwrap();
        let mut zeros = 0usize;
        for _ in 0..draws {
            let u = sampler.sample(&mut rng).bits;
            assert!(u == 0 || u == 3);
            zeros += (u == 0) as usize;
        }
        let sigma = (draws as f64 * 0.25).sqrt();
        assert!((zeros as f64 - draws as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn offdiagonal_entries_nonpositive() {
        for (seed, d) in [(1u64, 2usize), (2, 3)] {
            let inst = random_instance(6, d, 7, &[-1, 1], seed).unwrap();
            let mode = BasisMode::auto(&inst);
            let op = HsOperator::new(&inst, &HsParams::new(0.8, 2.5, 3).unwrap(), mode).unwrap();
            let m = op.dense();
            let dim = op.dim();
            for i in 0..dim {
                for j in 0..dim {
                    if i != j {
                        assert!(m[i * dim + j] <= 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn k_from_c_is_smallest_odd() {
        assert_eq!(k_from_c(1.0, 8), 3);
        assert_eq!(k_from_c(1.0, 16), 5);
        assert_eq!(k_from_c(0.5, 16), 3);
        assert_eq!(k_from_c(0.1, 2), 1);
    }

    #[test]
    fn params_validation() {
        assert!(HsParams::new(0.5, 1.0, 2).is_err());
        assert!(HsParams::new(1.5, 1.0, 3).is_err());
        assert!(HsParams::extended(1.5, 1.0, 3).is_ok());
        assert!(HsParams::new(0.5, -1.0, 3).is_err());
    }

    #[test]
    fn f32_plus_state() {
        let v = StateVector::<f32>::plus(4, BasisMode::Full);
        assert!((expect_x(&v) - 4.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn hs_is_symmetric(seed in 0u64..1000, n in 2usize..8, k in prop::sample::select(vec![1u32, 3, 5])) {
            let m = (crate::instance::binomial(n, 2) as usize).min(4);
            let inst = random_instance(n, 2, m, &[-2, -1, 1, 2], seed).unwrap();
            for mode in [BasisMode::Full, BasisMode::Even] {
                let p = HsParams::new(0.9, 1.3, k).unwrap();
                let v = random_state(n, mode, seed + 1);
                let w = random_state(n, mode, seed + 2);
                let lhs = w.dot(&apply_hs(&inst, &p, &v).unwrap());
                let rhs = apply_hs(&inst, &p, &w).unwrap().dot(&v);
                prop_assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }
}
