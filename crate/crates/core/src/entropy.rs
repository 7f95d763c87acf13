//! Binary entropy and the `tau` function, log-Sobolev checks, the two-point
//! (Maxwell) decomposition of an energy distribution, and entropy
//! certificates for states with a localized `X` spectrum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Caps;
use crate::error::{Error, Result};
use crate::hilbert::{expect_x, s_comp, x_spectrum_weights, HsParams, StateVector};
use crate::instance::{EnergyHistogram, Instance};
use crate::scalar::{CompensatedSum, Scalar};

/// `-x log2 x - (1-x) log2 (1-x)` with `0 log 0 = 0`.
pub fn binary_entropy<T: Scalar>(x: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::input("binary entropy argument must lie in [0, 1]"));
    }
    let term = |p: T| if p > T::zero() { -p * p.log2() } else { T::zero() };
    Ok(term(x) + term(T::one() - x))
}

/// Branch of the inverse binary entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Values in `[0, 1/2]`.
    Lower,
    /// Values in `[1/2, 1]`.
    Upper,
}

/// Bisection for an increasing function on `[lo, hi]`.
fn bisect_increasing<T: Scalar>(f: impl Fn(T) -> T, target: T, mut lo: T, mut hi: T) -> T {
    let tol = T::unit_tol();
    let half = T::lit(0.5);
    for _ in 0..200 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi || hi - lo <= tol * T::lit(1e-3) {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * half
}

pub fn inv_binary_entropy<T: Scalar>(sigma: T, branch: Branch) -> Result<T> {
    if !(sigma >= T::zero() && sigma <= T::one()) {
        return Err(Error::input("entropy value must lie in [0, 1]"));
    }
    let h = |x: T| binary_entropy(x).expect("in range");
    let half = T::lit(0.5);
    let x = if sigma == T::one() {
        half
    } else if sigma == T::zero() {
        T::zero()
    } else {
        bisect_increasing(h, sigma, T::zero(), half)
    };
    Ok(match branch {
        Branch::Lower => x,
        Branch::Upper => T::one() - x,
    })
}

/// `tau(sigma) = 2 sqrt(S^{-1}(sigma) (1 - S^{-1}(sigma)))` on the lower branch.
pub fn tau<T: Scalar>(sigma: T) -> Result<T> {
    let x = inv_binary_entropy(sigma, Branch::Lower)?;
    Ok(T::lit(2.0) * (x * (T::one() - x)).sqrt())
}

/// Inverse of the strictly increasing `tau` on `[0, 1]`.
pub fn tau_inv<T: Scalar>(m: T) -> Result<T> {
    if !(m >= T::zero() && m <= T::one()) {
        return Err(Error::input("tau_inv argument must lie in [0, 1]"));
    }
    if m == T::zero() || m == T::one() {
        return Ok(m);
    }
    // tau(sigma) = m  <=>  S^{-1}(sigma) = (1 - sqrt(1 - m^2)) / 2.
    let x = (T::one() - (T::one() - m * m).sqrt()) * T::lit(0.5);
    let closed = binary_entropy(x)?;
    // One bisection pass in sigma removes the round-off of the closed form.
    let lo = (closed - T::unit_tol()).max(T::zero());
    let hi = (closed + T::unit_tol()).min(T::one());
    let t = |s: T| tau(s).expect("in range");
    if t(lo) <= m && t(hi) >= m {
        Ok(bisect_increasing(t, m, lo, hi))
    } else {
        Ok(closed)
    }
}

/// Log-Sobolev checks for one real unit vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsiCheck {
    pub s_comp: f64,
    pub x_expect: f64,
    /// `S - (1 - 1/ln 2) N - <X>/ln 2`.
    pub lsi1_slack: f64,
    /// `tau(S/N) - <X>/N`.
    pub lsi2_slack: f64,
    pub lsi1_ok: bool,
    pub lsi2_ok: bool,
}

pub const LSI_TOL: f64 = 1e-9;

pub fn check_lsi<T: Scalar>(v: &StateVector<T>) -> Result<LsiCheck> {
    let s = s_comp(v)?.as_f64();
    let x = expect_x(v).as_f64();
    let n = v.n as f64;
    let ln2 = std::f64::consts::LN_2;
    let lsi1_slack = s - (1.0 - 1.0 / ln2) * n - x / ln2;
    let lsi2_slack = tau((s / n).clamp(0.0, 1.0))? - x / n;
    Ok(LsiCheck {
        s_comp: s,
        x_expect: x,
        lsi1_slack,
        lsi2_slack,
        lsi1_ok: lsi1_slack >= -LSI_TOL,
        lsi2_ok: lsi2_slack >= -LSI_TOL,
    })
}

/// Measurement distribution of a state grouped by `H_Z` energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDistribution {
    /// `P(E)`.
    pub probs: BTreeMap<i64, f64>,
    /// Entropy in bits of the outcome distribution conditioned on `E`.
    pub cond_entropy: BTreeMap<i64, f64>,
    /// Entropy in bits of the full outcome distribution.
    pub s_comp: f64,
}

impl EnergyDistribution {
    pub fn of_state<T: Scalar>(inst: &Instance, v: &StateVector<T>) -> Result<Self> {
        v.check_unit()?;
        if v.n != inst.n() {
            return Err(Error::input("state and instance have different spin counts"));
        }
        let mut probs: BTreeMap<i64, CompensatedSum> = BTreeMap::new();
        let mut plogp: BTreeMap<i64, CompensatedSum> = BTreeMap::new();
        let mut total = CompensatedSum::new();
        v.for_each_outcome(|u, p| {
            let p = p.as_f64();
            if p > 0.0 {
                let e = inst.energy_bits(u);
                probs.entry(e).or_default().add(p);
                plogp.entry(e).or_default().add(p * p.log2());
                total.add(-p * p.log2());
            }
        });
        let probs: BTreeMap<i64, f64> = probs.into_iter().map(|(e, p)| (e, p.value())).collect();
        // S(E) = -sum (p/P) log2(p/P) = log2 P - (1/P) sum p log2 p.
        let cond_entropy = probs
            .iter()
            .map(|(&e, &pe)| (e, (pe.log2() - plogp[&e].value() / pe).max(0.0)))
            .collect();
        Ok(Self {
            probs,
            cond_entropy,
            s_comp: total.value(),
        })
    }

    /// `-sum P(E) log2 P(E)`.
    pub fn energy_entropy(&self) -> f64 {
        self.probs.values().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
    }

    /// `sum P(E) S(E)`.
    pub fn mean_cond_entropy(&self) -> f64 {
        self.probs.iter().map(|(e, &p)| p * self.cond_entropy[e]).sum()
    }

    pub fn mean_energy(&self) -> f64 {
        self.probs.iter().map(|(&e, &p)| p * e as f64).sum()
    }

    /// `S - (H(P) + sum P(E) S(E))`, zero up to round-off.
    pub fn chain_residual(&self) -> f64 {
        self.s_comp - self.energy_entropy() - self.mean_cond_entropy()
    }
}

/// Best two-point mixture of energy levels with a prescribed mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointDecomposition {
    pub e1: i64,
    pub e2: i64,
    /// Weight on `e1`.
    pub p: f64,
    /// `p log2 W(e1) + (1-p) log2 W(e2)`.
    pub achieved_entropy_bound: f64,
    pub mean_energy: f64,
    /// `sum p(E) log2 W(E)` for the input distribution.
    pub input_log_w: f64,
    /// `sum p(E) S(E)` for the input distribution.
    pub input_cond_entropy: f64,
    /// `achieved_entropy_bound >= input_cond_entropy`.
    pub bound_holds: bool,
}

/// Maximizes `sum P(E) log2 W(E)` over distributions on the levels of `hist`
/// with the mean of `p_of_e`, by exhaustive search over single levels and
/// pairs of levels bracketing the mean.
pub fn maxwell_decompose(
    hist: &EnergyHistogram,
    p_of_e: &BTreeMap<i64, f64>,
    s_of_e: &BTreeMap<i64, f64>,
) -> Result<TwoPointDecomposition> {
    let total: f64 = p_of_e.values().sum();
    if (total - 1.0).abs() > 1e-9 || p_of_e.values().any(|&p| !(p >= 0.0)) {
        return Err(Error::input("energy distribution must be non-negative and sum to 1"));
    }
    let log_w = |e: i64| (hist.count(e) as f64).log2();
    let mut mean = CompensatedSum::new();
    let mut input_log_w = 0.0;
    let mut input_cond = 0.0;
    for (&e, &p) in p_of_e {
        if p == 0.0 {
            continue;
        }
        if hist.count(e) == 0 {
            return Err(Error::input(format!("energy {e} carries probability but has no configurations")));
        }
        let s = s_of_e.get(&e).copied().unwrap_or(0.0);
        if s < -1e-12 || s > log_w(e) + 1e-9 {
            return Err(Error::input(format!("conditional entropy at energy {e} is outside [0, log2 W(E)]")));
        }
        mean.add(p * e as f64);
        input_log_w += p * log_w(e);
        input_cond += p * s;
    }
    let mean = mean.value();
    let levels: Vec<i64> = hist.counts.keys().copied().collect();
    let (lo, hi) = (levels[0] as f64, levels[levels.len() - 1] as f64);
    let tol = 1e-9 * mean.abs().max(1.0);
    if mean < lo - tol || mean > hi + tol {
        return Err(Error::input("mean energy lies outside the spectrum"));
    }
    let mut best: Option<(i64, i64, f64, f64)> = None;
    let mut consider = |e1: i64, e2: i64, p: f64| {
        let v = if e1 == e2 {
            log_w(e1)
        } else {
            p * log_w(e1) + (1.0 - p) * log_w(e2)
        };
        if best.is_none_or(|b| v > b.3) {
            best = Some((e1, e2, p, v));
        }
    };
    for &e in &levels {
        if (e as f64 - mean).abs() <= tol {
            consider(e, e, 1.0);
        }
    }
    for &e1 in levels.iter().filter(|&&e| (e as f64) < mean) {
        for &e2 in levels.iter().filter(|&&e| (e as f64) > mean) {
            consider(e1, e2, (e2 as f64 - mean) / (e2 - e1) as f64);
        }
    }
    let (e1, e2, p, value) = best.ok_or_else(|| Error::input("no feasible two-point decomposition"))?;
    Ok(TwoPointDecomposition {
        e1,
        e2,
        p,
        achieved_entropy_bound: value,
        mean_energy: mean,
        input_log_w,
        input_cond_entropy: input_cond,
        bound_holds: value >= input_cond - 1e-12 * value.abs().max(1.0),
    })
}

/// Whether an inequality is implied exactly or only evaluated with every
/// unspecified constant set to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Asserted,
    UnitConstantDiagnostic,
}

/// One inequality `lhs >= rhs` with its evaluated sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBound {
    pub name: String,
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl LabeledBound {
    fn geq(name: &str, kind: BoundKind, lhs: f64, rhs: f64) -> Self {
        let tol = 1e-9 * lhs.abs().max(rhs.abs()).max(1.0);
        Self {
            name: name.to_owned(),
            kind,
            lhs,
            rhs,
            holds: lhs >= rhs - tol,
        }
    }
}

/// Entropy/energy certificate for a state `Xi` whose `X` spectrum is
/// concentrated in a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCertificate {
    pub source: String,
    pub n: usize,
    pub e0: i64,
    pub s_comp: f64,
    pub mean_energy: f64,
    pub x_expect: f64,
    /// Lowest and highest `X` eigenvalue carrying weight.
    pub x_support: (i64, i64),
    /// Center of the `X` support window.
    pub x0: f64,
    pub x_min: f64,
    /// `F(S)` with unit constants.
    pub f_of_s: f64,
    /// `E_0 + (1 + eta)(b |E_0| + J_tot C^2 D^2 log2(N)^2 / N^2)` with a unit constant.
    pub e_approx: f64,
    pub eta: f64,
    /// `log2` of the number of configurations with energy at most `e_approx`.
    pub log_w_below_e_approx: f64,
    pub decomposition: TwoPointDecomposition,
    /// True when the entropy bound from the window is non-positive.
    pub vacuous: bool,
    pub bounds: Vec<LabeledBound>,
}

impl EntropyCertificate {
    /// True when every asserted bound holds.
    pub fn asserted_ok(&self) -> bool {
        self.bounds.iter().filter(|b| b.kind == BoundKind::Asserted).all(|b| b.holds)
    }
}

/// `X_min = N (4B)^{-1/K}`.
pub fn x_min(n: usize, big_b: f64, k: u32) -> f64 {
    n as f64 * (4.0 * big_b).powf(-1.0 / k as f64)
}

/// `E_0 + (1 + eta)(B + J_tot C^2 D^2 log2(N)^2 / N^2)` with `C = K / log2 N`
/// and a unit constant; `B = b |E_0|`.
pub fn e_approx(inst: &Instance, e0: i64, big_b: f64, k: u32, eta: f64) -> f64 {
    let nf = inst.n() as f64;
    let log2n = nf.log2();
    let kf = k as f64;
    let c = if log2n > 0.0 { kf / log2n } else { kf };
    let d = inst.d() as f64;
    let j_tot = inst.j_tot() as f64;
    e0 as f64 + (1.0 + eta) * (big_b + j_tot * c * c * d * d * log2n * log2n / (nf * nf))
}

const SUPPORT_CUTOFF: f64 = 1e-12;

pub fn qbad_certificate<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    xi: &StateVector<T>,
    eta: f64,
    source: &str,
    caps: &Caps,
) -> Result<EntropyCertificate> {
    if !(eta > 0.0) {
        return Err(Error::input("eta must be positive"));
    }
    let big_b = p.big_b.as_f64();
    if !(big_b > 0.0) {
        return Err(Error::input("B must be positive for an entropy certificate"));
    }
    let hist = inst.histogram(caps)?;
    let dist = EnergyDistribution::of_state(inst, xi)?;
    let n = inst.n();
    let nf = n as f64;
    let k = p.k;
    let kf = k as f64;
    let d = inst.d() as f64;
    let j_tot = inst.j_tot() as f64;
    let e0 = hist.e0;
    let e0f = e0 as f64;

    let weights = x_spectrum_weights(xi);
    let support: Vec<i64> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| w.as_f64() > SUPPORT_CUTOFF)
        .map(|(k, _)| n as i64 - 2 * k as i64)
        .collect();
    let (x_lo, x_hi) = (*support.iter().min().unwrap_or(&0), *support.iter().max().unwrap_or(&0));
    let x0 = 0.5 * (x_lo + x_hi) as f64;
    let half_width = 0.5 * (x_hi - x_lo) as f64;
    let xm = x_min(n, big_b, k);

    let s = dist.s_comp;
    let x_expect = expect_x(xi).as_f64();
    let tau_s = tau((s / nf).clamp(0.0, 1.0))?;
    let f_of_s = e0f + j_tot * kf * kf * d * d / (xm * xm) + big_b * tau_s.powi(k as i32);
    let log2n = nf.log2();
    let c = if log2n > 0.0 { kf / log2n } else { kf };
    let e_approx = e_approx(inst, e0, big_b, k, eta);
    let below: u64 = hist.counts.range(..=e_approx.floor() as i64).map(|(_, &w)| w).sum();
    let decomposition = maxwell_decompose(&hist, &dist.probs, &dist.cond_entropy)?;

    use BoundKind::*;
    let window_arg = (x_lo as f64 / nf).clamp(0.0, 1.0);
    let mut bounds = vec![
        LabeledBound::geq("lsi2: tau(S/N) >= <X>/N", Asserted, tau_s, x_expect / nf),
        LabeledBound::geq("S >= N tau^-1(x_lo / N)", Asserted, s, nf * tau_inv(window_arg)?),
        LabeledBound::geq(
            "chain: -|S - H(P) - sum P S(E)| >= -1e-9",
            Asserted,
            -dist.chain_residual().abs(),
            -1e-9,
        ),
        LabeledBound::geq(
            "two-point: P log W(E1) + (1-P) log W(E2) >= sum P(E) S(E)",
            Asserted,
            decomposition.achieved_entropy_bound,
            decomposition.input_cond_entropy,
        ),
        LabeledBound::geq(
            "log2 #levels >= H(P)",
            Asserted,
            (dist.probs.values().filter(|&&q| q > 0.0).count() as f64).log2(),
            dist.energy_entropy(),
        ),
        LabeledBound::geq(
            "log2(2 J_tot + 1) >= log2 #levels",
            Asserted,
            (2.0 * j_tot + 1.0).log2(),
            (dist.probs.values().filter(|&&q| q > 0.0).count() as f64).log2(),
        ),
    ];
    let theorem_arg = ((x0 - xm / kf) / nf).clamp(0.0, 1.0);
    let theorem_kind = if half_width <= xm / kf && x0 >= xm { Asserted } else { UnitConstantDiagnostic };
    bounds.push(LabeledBound::geq(
        "S >= N tau^-1((X_0 - X_min/K) / N)",
        theorem_kind,
        s,
        nf * tau_inv(theorem_arg)?,
    ));
    bounds.push(LabeledBound::geq(
        "E_0 + 1/2 + J_tot K^2 D^2 / X_min^2 + B ((X_0 + X_min/K)/N)^K >= mean energy",
        UnitConstantDiagnostic,
        e0f + 0.5 + j_tot * kf * kf * d * d / (xm * xm) + big_b * ((x0 + xm / kf) / nf).powi(k as i32),
        dist.mean_energy(),
    ));
    bounds.push(LabeledBound::geq("F(S) >= mean energy", UnitConstantDiagnostic, f_of_s, dist.mean_energy()));
    let eta_ratio = (1.0 + eta) / eta;
    bounds.push(LabeledBound::geq(
        "log2 W(E <= E_approx) >= N (1 - (1+eta)/(eta C)) - (1+eta)/eta log2 N",
        UnitConstantDiagnostic,
        (below.max(1) as f64).log2(),
        nf * (1.0 - eta_ratio / c) - eta_ratio * log2n,
    ));

    Ok(EntropyCertificate {
        source: source.to_owned(),
        n,
        e0,
        s_comp: s,
        mean_energy: dist.mean_energy(),
        x_expect,
        x_support: (x_lo, x_hi),
        x0,
        x_min: xm,
        f_of_s,
        e_approx,
        eta,
        log_w_below_e_approx: (below.max(1) as f64).log2(),
        decomposition,
        vacuous: theorem_arg <= 0.0,
        bounds,
    })
}
