//! Reduction of an eigenvector to a chain over `X` bands, and the
//! wavefunction surgery that localizes it at large `X`.
//!
//! A [`Chain`] is a real symmetric matrix indexed by integer positions with a
//! unit eigenvector `psi`. For any diagonal reweighting `f`,
//! `<f psi|h|f psi> - E |f psi|^2 = -sum_{x<x'} (f(x) - f(x'))^2 h_{x x'} psi(x) psi(x')`,
//! which is what the cut and tilt constructions below control.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{self, SolverConfig};
use crate::error::{Error, Result};
use crate::hilbert::{band_decompose, expect_x, x_spectrum_weights, BasisMode, HsOperator, HsParams, StateVector};
use crate::instance::Instance;
use crate::linalg;
use crate::scalar::Scalar;

/// Symmetric matrix over sorted integer positions with a unit eigenvector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Chain<T> {
    pub positions: Vec<i64>,
    /// Row-major `positions.len()` square matrix.
    pub h: Vec<T>,
    pub psi: Vec<T>,
    /// `<psi|h|psi>`.
    pub energy: T,
    /// `||h psi - E psi||`.
    pub residual: T,
    /// Spectral norm of the off-diagonal part of `h`.
    pub od_norm: T,
}

impl<T: Scalar> Chain<T> {
    pub fn new(positions: Vec<i64>, h: Vec<T>, psi: Vec<T>) -> Result<Self> {
        let m = positions.len();
        if m == 0 || h.len() != m * m || psi.len() != m {
            return Err(Error::input("chain dimensions do not match"));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("chain positions must be strictly increasing"));
        }
        let scale = h.iter().fold(T::one(), |a, &b| a.max(b.abs()));
        for i in 0..m {
            for j in 0..i {
                if (h[i * m + j] - h[j * m + i]).abs() > T::unit_tol() * scale {
                    return Err(Error::input("chain matrix is not symmetric"));
                }
            }
        }
        let psi = {
            let mut v = psi;
            if linalg::normalize(&mut v) == T::zero() {
                return Err(Error::input("chain vector is zero"));
            }
            v
        };
        let hpsi = matvec(&h, &psi);
        let energy = linalg::dot(&psi, &hpsi);
        let mut r = hpsi;
        linalg::axpy(-energy, &psi, &mut r);
        let mut od = h.clone();
        for i in 0..m {
            od[i * m + i] = T::zero();
        }
        let od_norm = linalg::symmetric_eigenvalues(&od, m)?
            .into_iter()
            .fold(T::zero(), |a, l| a.max(l.abs()));
        Ok(Self {
            residual: linalg::norm(&r),
            positions,
            h,
            psi,
            energy,
            od_norm,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Largest `|x - y|` over nonzero off-diagonal entries.
    pub fn half_bandwidth(&self) -> i64 {
        let m = self.len();
        let scale = self.h.iter().fold(T::one(), |a, &b| a.max(b.abs()));
        let mut best = 0;
        for i in 0..m {
            for j in 0..i {
                if self.h[i * m + j].abs() > T::unit_tol() * scale {
                    best = best.max(self.positions[i] - self.positions[j]);
                }
            }
        }
        best
    }

    /// `<v|h|v> / <v|v>`.
    pub fn rayleigh(&self, v: &[T]) -> T {
        linalg::dot(v, &matvec(&self.h, v)) / linalg::dot(v, v)
    }

    /// Allowance for `psi` not being an exact eigenvector when `f psi` is
    /// compared against `E`: `2 max f^2 ||r|| / |f psi|^2`, plus round-off.
    fn tolerance(&self, f: &[T]) -> T {
        let fmax = f.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        let fpsi: Vec<T> = f.iter().zip(&self.psi).map(|(&a, &b)| a * b).collect();
        let n2 = linalg::dot(&fpsi, &fpsi);
        let scale = self.h.iter().fold(T::one(), |a, &b| a.max(b.abs()));
        T::lit(2.0) * fmax * fmax * self.residual / n2 + T::eigen_tol() * scale
    }

    fn mass(&self, weights: &[T], lo: i64, hi: i64) -> T {
        self.positions
            .iter()
            .zip(weights)
            .filter(|(&x, _)| x >= lo && x <= hi)
            .fold(T::zero(), |a, (_, &w)| a + w)
    }
}

fn matvec<T: Scalar>(h: &[T], v: &[T]) -> Vec<T> {
    let m = v.len();
    (0..m).map(|i| linalg::dot(&h[i * m..(i + 1) * m], v)).collect()
}

/// Random symmetric tridiagonal chain on positions `0..size` with entries
/// uniform in `[-1, 1]` and `psi` a randomly chosen eigenvector.
pub fn random_chain(size: usize, seed: u64) -> Result<Chain<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = vec![0.0; size * size];
    for i in 0..size {
        h[i * size + i] = rng.random_range(-1.0..1.0);
        if i + 1 < size {
            let t = rng.random_range(-1.0..1.0);
            h[i * size + i + 1] = t;
            h[(i + 1) * size + i] = t;
        }
    }
    let (_, vecs) = linalg::symmetric_eigen(&h, size)?;
    let k = rng.random_range(0..size);
    let psi = (0..size).map(|r| vecs[r * size + k]).collect();
    Chain::new((0..size as i64).collect(), h, psi)
}

/// Which construction produced a localized vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    /// Plateau on positions `<= y`, linear ramp down to zero at `y + l`.
    CutLeft,
    /// Plateau on positions `>= y`, linear ramp up from zero at `y - l`.
    CutRight,
    /// `exp(eps x)` reweighting.
    Tilt,
    /// `exp(eps x)` times a trapezoid on `(y - l, y + 2l)`.
    TiltedWindow,
    /// Lowest eigenvector of `h` restricted to the window `(y - 2l, y + 2l)`.
    WindowGround,
}

/// A reweighted chain vector `xi = f psi / |f psi|` with its energy and bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChainState<T> {
    pub construction: Construction,
    pub xi: Vec<T>,
    pub energy: T,
    /// Eigenvalue `E` of the chain.
    pub reference: T,
    /// Bound on `energy - E` that is asserted.
    pub bound: T,
    pub bound_ok: bool,
    /// `(1/l^2 + (e^eps - 1)^2) ||h_od||`; only a diagnostic for the
    /// tilted window, where it equals the asserted bound elsewhere.
    pub literal_bound: T,
    pub literal_ok: bool,
    /// Smallest and largest position where `xi` is nonzero.
    pub support: (i64, i64),
    /// Anchor `y` of the construction.
    pub anchor: i64,
}

fn chain_state<T: Scalar>(
    chain: &Chain<T>,
    f: &[T],
    construction: Construction,
    bound: T,
    literal_bound: T,
    anchor: i64,
) -> Result<ChainState<T>> {
    let xi: Vec<T> = f.iter().zip(&chain.psi).map(|(&a, &b)| a * b).collect();
    let tol = chain.tolerance(f);
    localized(chain, xi, construction, bound, literal_bound, anchor, tol)
}

fn localized<T: Scalar>(
    chain: &Chain<T>,
    mut xi: Vec<T>,
    construction: Construction,
    bound: T,
    literal_bound: T,
    anchor: i64,
    tol: T,
) -> Result<ChainState<T>> {
    if linalg::normalize(&mut xi) == T::zero() {
        return Err(Error::precondition("reweighted vector vanishes"));
    }
    let energy = chain.rayleigh(&xi);
    let nz: Vec<i64> = chain
        .positions
        .iter()
        .zip(&xi)
        .filter(|(_, &a)| a != T::zero())
        .map(|(&x, _)| x)
        .collect();
    Ok(ChainState {
        construction,
        energy,
        reference: chain.energy,
        bound,
        bound_ok: energy <= chain.energy + bound + tol,
        literal_bound,
        literal_ok: energy <= chain.energy + literal_bound + tol,
        support: (nz[0], nz[nz.len() - 1]),
        anchor,
        xi,
    })
}

/// Cut at `y` with a linear ramp of length `l`, keeping the heavier side
/// of `y`; `energy <= E + ||h_od|| / l^2`.
pub fn cut_item1<T: Scalar>(chain: &Chain<T>, y: i64, l: usize) -> Result<ChainState<T>> {
    if l == 0 {
        return Err(Error::input("l must be at least 1"));
    }
    let li = l as i64;
    let w2: Vec<T> = chain.psi.iter().map(|&a| a * a).collect();
    let rho_lt = chain.mass(&w2, y - li, y);
    let rho_gt = chain.mass(&w2, y, y + li);
    let left = |x: i64| T::from_i64_lossy((li - (x - y).max(0)).max(0));
    let right = |x: i64| T::from_i64_lossy((li - (y - x).max(0)).max(0));
    let f_left: Vec<T> = chain.positions.iter().map(|&x| left(x)).collect();
    let f_right: Vec<T> = chain.positions.iter().map(|&x| right(x)).collect();
    let nonzero = |f: &[T]| f.iter().zip(&chain.psi).any(|(&a, &b)| a * b != T::zero());
    let use_left = if rho_lt > rho_gt { nonzero(&f_left) } else { !nonzero(&f_right) };
    let (f, c) = if use_left {
        (f_left, Construction::CutLeft)
    } else {
        (f_right, Construction::CutRight)
    };
    let bound = chain.od_norm / T::from_usize_lossy(l * l);
    chain_state(chain, &f, c, bound, bound, y)
}

/// `exp(eps x)` weights, shifted so the largest is 1.
fn tilt_weights<T: Scalar>(chain: &Chain<T>, eps: T) -> Vec<T> {
    let top = chain.positions[chain.len() - 1];
    chain
        .positions
        .iter()
        .map(|&x| (eps * T::from_i64_lossy(x - top)).exp())
        .collect()
}

/// `psi_eps = exp(eps x) psi`; `energy <= E + (e^eps - 1)^2 ||h_od||`.
pub fn tilt_item2<T: Scalar>(chain: &Chain<T>, eps: T) -> Result<ChainState<T>> {
    if !(eps > T::zero()) {
        return Err(Error::input("eps must be positive"));
    }
    let f = tilt_weights(chain, eps);
    let g = eps.exp_m1();
    let bound = g * g * chain.od_norm;
    let anchor = chain.positions[chain.len() - 1];
    chain_state(chain, &f, Construction::Tilt, bound, bound, anchor)
}

/// Constant in the tilted-window bound `3.5 e^{-eps} (1/l^2 + (e^eps - 1)^2) ||h_od||`.
///
/// With window masses `rho_{y-l}, rho_y, rho_{y+l}` of `psi_eps` over
/// consecutive length-`l` blocks and `rho_{y +- l} <= 2 rho_y`, the ramp
/// differences obey `(f(x+1) - f(x))^2 <= 2 e^{2 eps x} ((e^eps - 1)^2 l^2 + 1)`
/// and the three blocks hold at most `3.5 rho_y` against `|f psi|^2 >= l^2 rho_y`.
pub fn window_constant<T: Scalar>(eps: T) -> T {
    T::lit(3.5) * (-eps).exp()
}

/// Result of the tilted-window construction. `proof` is the ramp at the
/// largest admissible anchor; `best` is the lowest-energy state supported in
/// some window `(y - 2l, y + 2l)` with `y >= z`, which is never above `proof`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WindowCut<T> {
    pub proof: ChainState<T>,
    pub best: ChainState<T>,
    pub candidates: usize,
}

/// Localizes `psi_eps` to a window `(y - l, y + 2l)` with `y >= z`.
///
/// Requires `sum_{x >= z} psi_eps(x)^2 >= 1/2 sum_x psi_eps(x)^2`.
pub fn cut_item3<T: Scalar>(chain: &Chain<T>, z: i64, l: usize, eps: T) -> Result<WindowCut<T>> {
    if l == 0 {
        return Err(Error::input("l must be at least 1"));
    }
    if !(eps >= T::zero()) {
        return Err(Error::input("eps must be non-negative"));
    }
    let tilt = tilt_weights(chain, eps);
    let u2: Vec<T> = tilt.iter().zip(&chain.psi).map(|(&t, &p)| t * t * p * p).collect();
    let total = u2.iter().fold(T::zero(), |a, &b| a + b);
    let top = chain.positions[chain.len() - 1];
    let upper = chain.mass(&u2, z, top);
    if upper < T::lit(0.5) * total {
        return Err(Error::NotApplicable(format!(
            "tilted mass at positions >= {z} is below half of the total"
        )));
    }
    let li = l as i64;
    let block = |y: i64| chain.mass(&u2, y, y + li - 1);
    let admissible: Vec<i64> = (z..=top)
        .filter(|&y| {
            let r = block(y);
            r > T::zero() && r >= T::lit(0.5) * block(y - li) && r >= T::lit(0.5) * block(y + li)
        })
        .collect();
    let lt = T::from_usize_lossy(l);
    let g = eps.exp_m1();
    let literal = (T::one() / (lt * lt) + g * g) * chain.od_norm;
    let bound = window_constant(eps) * literal;
    let build = |y: i64| {
        let f: Vec<T> = chain
            .positions
            .iter()
            .zip(&tilt)
            .map(|(&x, &t)| {
                let d = if x < y { (x - (y - li)).max(0) } else if x < y + li { li } else { (y + 2 * li - 1 - x).max(0) };
                t * T::from_i64_lossy(d)
            })
            .collect();
        chain_state(chain, &f, Construction::TiltedWindow, bound, literal, y)
    };
    let proof_anchor = *admissible
        .last()
        .ok_or_else(|| Error::numerical("no admissible window despite the mass condition", 0.0))?;
    let proof = build(proof_anchor)?;
    let mut best = proof.clone();
    let m = chain.len();
    let mut last: Option<(usize, usize)> = None;
    for y in z..=top {
        let lo = chain.positions.partition_point(|&x| x <= y - 2 * li);
        let hi = chain.positions.partition_point(|&x| x < y + 2 * li);
        if lo >= hi || last == Some((lo, hi)) {
            continue;
        }
        last = Some((lo, hi));
        let k = hi - lo;
        let sub: Vec<T> = (lo..hi)
            .flat_map(|i| (lo..hi).map(move |j| (i, j)))
            .map(|(i, j)| chain.h[i * m + j])
            .collect();
        let (_, vecs) = linalg::symmetric_eigen(&sub, k)?;
        let mut xi = vec![T::zero(); m];
        for (r, slot) in xi[lo..hi].iter_mut().enumerate() {
            *slot = vecs[r * k];
        }
        let scale = chain.h.iter().fold(T::one(), |a, &b| a.max(b.abs()));
        let s = localized(chain, xi, Construction::WindowGround, bound, literal, y, T::eigen_tol() * scale)?;
        if s.energy < best.energy {
            best = s;
        }
    }
    Ok(WindowCut {
        proof,
        best,
        candidates: admissible.len(),
    })
}

/// `H_1` projected onto the normalized band components of an eigenvector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BandChain<T> {
    pub width: usize,
    pub chain: Chain<T>,
    /// Normalized band components `P_x Psi / |P_x Psi|`, in chain order.
    #[serde(skip)]
    pub components: Vec<StateVector<T>>,
    /// `ceil(2D / w)`.
    pub bandwidth_limit: i64,
    /// `j_tot`, an upper bound on `||h_od||`.
    pub od_norm_bound: T,
}

/// Band weight below which a band is treated as empty.
const EMPTY_BAND: f64 = 1e-12;

pub fn band_chain<T: Scalar>(inst: &Instance, p: &HsParams<T>, psi: &StateVector<T>, w: usize) -> Result<BandChain<T>> {
    psi.check_unit()?;
    if psi.n != inst.n() {
        return Err(Error::input("state and instance have different spin counts"));
    }
    let op = HsOperator::new(inst, p, psi.mode)?;
    let bands = band_decompose(psi, w)?;
    let mut positions = Vec::new();
    let mut weights = Vec::new();
    let mut components = Vec::new();
    for (x, v) in bands {
        let nrm = v.norm();
        if nrm.as_f64() > EMPTY_BAND {
            positions.push(x);
            weights.push(nrm);
            components.push(StateVector::new(v.n, v.mode, v.amps.iter().map(|&a| a / nrm).collect())?);
        }
    }
    let m = positions.len();
    let mut h = vec![T::zero(); m * m];
    let mut hy = vec![T::zero(); op.dim()];
    for (j, cj) in components.iter().enumerate() {
        op.apply(&cj.amps, &mut hy);
        for (i, ci) in components.iter().enumerate().take(j + 1) {
            let v = linalg::dot(&ci.amps, &hy);
            h[i * m + j] = v;
            h[j * m + i] = v;
        }
    }
    let chain = Chain::new(positions, h, weights)?;
    let d = inst.d() as i64;
    let wi = w as i64;
    Ok(BandChain {
        width: w,
        chain,
        components,
        bandwidth_limit: (2 * d + wi - 1) / wi,
        od_norm_bound: T::from_i64_lossy(inst.j_tot()),
    })
}

impl<T: Scalar> BandChain<T> {
    /// `sum_x xi(x) P_x Psi / |P_x Psi|`.
    pub fn lift(&self, xi: &[T]) -> Result<StateVector<T>> {
        let first = &self.components[0];
        let mut amps = vec![T::zero(); first.dim()];
        for (c, &a) in self.components.iter().zip(xi) {
            if a != T::zero() {
                linalg::axpy(a, &c.amps, &mut amps);
            }
        }
        StateVector::new(first.n, first.mode, amps)
    }
}

/// An eigenvector of `H_1` with eigenvalue at most `E_0 + 1/2` and
/// `<Psi|B (X/N)^K|Psi> >= 1/4`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FoundPsi<T> {
    pub psi: StateVector<T>,
    pub energy: T,
    pub bx_expect: T,
    /// `(eigenvalue, <B (X/N)^K>)` of every examined eigenvector.
    pub candidates: Vec<(T, T)>,
}

/// Searches the low spectrum of `H_1` for the eigenvector whose existence
/// follows from `E^Q_{0,1} < E_0 + 1/2`.
pub fn find_psi<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    cfg: &SolverConfig<T>,
) -> Result<FoundPsi<T>> {
    let p1 = p.at(T::one());
    let skip = eigensolve::ground_index(inst, mode)?;
    let op = HsOperator::new(inst, &p1, mode)?;
    let e0 = op.diag[skip];
    let limit = e0 + T::lit(0.5);
    let eq = eigensolve::lowest_deflated(&op, skip, 1, cfg)?[0].value;
    if eq >= limit {
        return Err(Error::NotApplicable(format!(
            "E^Q_{{0,1}} = {:.6} is not below E_0 + 1/2",
            eq.as_f64()
        )));
    }
    let dim = op.dim();
    let mut m = 2;
    loop {
        let pairs = eigensolve::lowest_of_operator(&op, m.min(dim), cfg)?;
        let mut candidates = Vec::new();
        let mut vx = vec![T::zero(); dim];
        for pair in &pairs {
            if pair.value > limit {
                break;
            }
            op.apply_v(p1.big_b, &pair.vector, &mut vx);
            let bx = -linalg::dot(&pair.vector, &vx);
            candidates.push((pair.value, bx));
            if bx >= T::lit(0.25) {
                return Ok(FoundPsi {
                    psi: StateVector::new(inst.n(), mode, pair.vector.clone())?,
                    energy: pair.value,
                    bx_expect: bx,
                    candidates,
                });
            }
        }
        let exhausted = pairs.last().is_none_or(|q| q.value > limit) || m >= 16 || m >= dim;
        if exhausted {
            let list: Vec<String> = candidates
                .iter()
                .map(|(e, b)| format!("({:.6}, {:.6})", e.as_f64(), b.as_f64()))
                .collect();
            return Err(Error::numerical(
                format!(
                    "no eigenvector below E_0 + 1/2 has <B(X/N)^K> >= 1/4; examined (energy, <B(X/N)^K>): {}",
                    list.join(", ")
                ),
                0.0,
            ));
        }
        m *= 2;
    }
}

/// How `K` scales with `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    LogK,
    FixedK,
}

/// A unit state localized in `X`, built from an eigenvector of `H_1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LocalizedState<T> {
    pub regime: Regime,
    pub xi: StateVector<T>,
    /// `X`-eigenvalue interval covered by the bands in the support.
    pub window: (i64, i64),
    /// Lowest and highest `X` eigenvalue with amplitude above `1e-12`.
    pub support: (i64, i64),
    pub support_ok: bool,
    pub band_width: usize,
    pub x_min: f64,
    pub eps: f64,
    pub l: usize,
    pub z: i64,
    /// `ln <Psi|exp(K X / X_min)|Psi> - K`, non-negative when the mass inequality holds.
    pub bye_log_slack: f64,
    pub psi_energy: T,
    /// `<Xi|H_1|Xi>`.
    pub energy: T,
    pub hz_energy: T,
    pub x_over_n: T,
    pub cut: WindowCut<T>,
    /// `energy <= psi_energy + 3.5 e^{-eps}(1/l^2 + (e^eps - 1)^2) j_tot`.
    pub energy_bound_ok: bool,
    /// Same with the unit constant; diagnostic.
    pub energy_literal_ok: bool,
    /// `energy <= E_0 + 1/2 + J_tot K^2 D^2 / X_min^2`; unit-constant diagnostic.
    pub e2_diagnostic_ok: bool,
    /// `hz_energy <= E_0 + 1/2 + J_tot K^2 D^2 / X_min^2 + B ((X_0 + X_min/K)/N)^K`; diagnostic.
    pub e3_diagnostic_ok: bool,
    /// Window width at most `2 X_min / K` and centered at or above `X_min`; diagnostic.
    pub window_within_theorem: bool,
}

/// `<Psi|exp(a X)|Psi>` in log space.
fn log_exp_x_moment<T: Scalar>(psi: &StateVector<T>, a: f64) -> f64 {
    let n = psi.n as i64;
    let terms: Vec<f64> = x_spectrum_weights(psi)
        .iter()
        .enumerate()
        .filter(|(_, w)| w.as_f64() > 0.0)
        .map(|(k, w)| w.as_f64().ln() + a * (n - 2 * k as i64) as f64)
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Runs the localization pipeline on `psi` (an eigenvector of `H_1` with
/// `<Psi|B(X/N)^K|Psi> >= 1/4`), with band width `w` (default `2D`).
pub fn large_x_state<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    psi: &StateVector<T>,
    regime: Regime,
    w: Option<usize>,
) -> Result<LocalizedState<T>> {
    let p1 = p.at(T::one());
    let n = inst.n();
    let nf = n as f64;
    let k = p1.k;
    let kf = k as f64;
    let big_b = p1.big_b.as_f64();
    if !(big_b > 0.0) {
        return Err(Error::input("B must be positive"));
    }
    let w = w.unwrap_or(2 * inst.d()).max(1);
    let x_min = nf * (4.0 * big_b).powf(-1.0 / kf);

    let bye_log_slack = log_exp_x_moment(psi, kf / x_min) - kf;
    if bye_log_slack < -1e-9 {
        return Err(Error::precondition(format!(
            "large-X step 1: <Psi|exp(K X/X_min)|Psi> < exp(K) (log slack {bye_log_slack:.3e})"
        )));
    }
    let bc = band_chain(inst, &p1, psi, w)
        .map_err(|e| Error::precondition(format!("large-X step 2 (band chain): {e}")))?;
    let eps = kf * w as f64 / (2.0 * x_min);
    let z = ((x_min - std::f64::consts::LN_2 * x_min / kf) / w as f64).floor() as i64;
    let c = (1.0 - std::f64::consts::LN_2) / 2.0;
    let l = ((c / eps).floor() as usize).max(1);
    let cut = cut_item3(&bc.chain, z, l, T::lit(eps)).map_err(|e| match e {
        Error::NotApplicable(m) => Error::precondition(format!("large-X step 3 (tilted mass condition): {m}")),
        other => other,
    })?;
    let st = &cut.best;
    let xi = bc.lift(&st.xi)?.normalized()?;

    let op = HsOperator::new(inst, &p1, psi.mode)?;
    let mut hx = vec![T::zero(); op.dim()];
    op.apply(&xi.amps, &mut hx);
    let energy = linalg::dot(&xi.amps, &hx);
    let mut vx = vec![T::zero(); op.dim()];
    op.apply_v(p1.big_b, &xi.amps, &mut vx);
    let hz_energy = energy - linalg::dot(&xi.amps, &vx);
    let x_over_n = expect_x(&xi) / T::from_usize_lossy(n);

    let weights = x_spectrum_weights(&xi);
    let supp: Vec<i64> = weights
        .iter()
        .enumerate()
        .filter(|(_, a)| a.as_f64() > 1e-24)
        .map(|(kk, _)| n as i64 - 2 * kk as i64)
        .collect();
    let support = (supp[0].min(supp[supp.len() - 1]), supp[0].max(supp[supp.len() - 1]));
    let wi = w as i64;
    let window = ((st.support.0 * wi).max(-(n as i64)), (st.support.1 * wi + wi - 1).min(n as i64));
    let support_ok = support.0 >= window.0 && support.1 <= window.1;

    let e0 = inst.energy_bits(psi.mode.config_of(eigensolve::ground_index(inst, psi.mode)?)) as f64;
    let j_tot = inst.j_tot() as f64;
    let d = inst.d() as f64;
    let g = eps.exp_m1();
    let literal = (1.0 / (l * l) as f64 + g * g) * j_tot;
    let tol = 1e-8 * j_tot.max(1.0) + bc.chain.residual.as_f64() * 1e3;
    let e_psi = bc.chain.energy.as_f64();
    let energy_f = energy.as_f64();
    let unit_term = e0 + 0.5 + j_tot * kf * kf * d * d / (x_min * x_min);
    let x0 = 0.5 * (support.0 + support.1) as f64;
    Ok(LocalizedState {
        regime,
        window,
        support,
        support_ok,
        band_width: w,
        x_min,
        eps,
        l,
        z,
        bye_log_slack,
        psi_energy: bc.chain.energy,
        energy,
        hz_energy,
        x_over_n,
        energy_bound_ok: energy_f <= e_psi + window_constant(eps) * literal + tol,
        energy_literal_ok: energy_f <= e_psi + literal + tol,
        e2_diagnostic_ok: energy_f <= unit_term,
        e3_diagnostic_ok: hz_energy.as_f64() <= unit_term + big_b * ((x0 + x_min / kf) / nf).powi(k as i32),
        window_within_theorem: (support.1 - support.0) as f64 <= 2.0 * x_min / kf && x0 >= x_min,
        cut,
        xi,
    })
}

/// Band profile `psi(x)` keyed by band label, for reporting.
pub fn band_profile<T: Scalar>(bc: &BandChain<T>) -> BTreeMap<i64, T> {
    bc.chain.positions.iter().copied().zip(bc.chain.psi.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::random_instance;
    use proptest::prelude::*;

    fn two_site() -> Chain<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Chain::new(vec![0, 1], vec![0.0, -1.0, -1.0, 0.0], vec![s, s]).unwrap()
    }

    #[test]
    fn chain_basics() {
        let c = two_site();
        assert!((c.energy + 1.0).abs() < 1e-15);
        assert!((c.od_norm - 1.0).abs() < 1e-12);
        assert_eq!(c.half_bandwidth(), 1);
        assert!(Chain::new(vec![0, 1], vec![0.0, 1.0, 2.0, 0.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn item1_two_site() {
        let st = cut_item1(&two_site(), 0, 1).unwrap();
        assert!(st.bound_ok);
        assert!(st.energy <= -1.0 + 1.0 + 1e-12);
    }

    #[test]
    fn single_site_is_unchanged() {
        let c = Chain::new(vec![3], vec![2.5], vec![1.0]).unwrap();
        let st = cut_item1(&c, 0, 2).unwrap();
        assert_eq!(st.xi, vec![1.0]);
        assert_eq!(st.energy, 2.5);
        let t = tilt_item2(&c, 0.7).unwrap();
        assert_eq!(t.energy, 2.5);
        let w = cut_item3(&c, 1, 2, 0.1).unwrap();
        assert_eq!(w.best.xi, vec![1.0]);
    }

    #[test]
    fn tilt_continuity() {
        let c = random_chain(12, 3).unwrap();
        let t = tilt_item2(&c, 1e-6).unwrap();
        assert!((t.energy - c.energy).abs() < 1e-9);
    }

    #[test]
    fn item3_two_site() {
        let w = cut_item3(&two_site(), 0, 1, 0.1).unwrap();
        assert!(w.proof.bound_ok && w.best.bound_ok);
        assert!(w.best.support.0 >= -1);
    }

    #[test]
    fn item3_not_applicable_when_mass_is_low() {
        let c = random_chain(8, 1).unwrap();
        assert!(matches!(cut_item3(&c, 100, 2, 0.1), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn band_chain_of_plus_is_one_site() {
        let inst = random_instance(6, 2, 6, &[-1, 1], 2).unwrap();
        let p = HsParams::new(1.0, 1.0, 3).unwrap();
        let plus = StateVector::<f64>::plus(6, BasisMode::Even);
        let bc = band_chain(&inst, &p, &plus, 4).unwrap();
        assert_eq!(bc.chain.positions, vec![1]);
    }

    #[test]
    fn band_chain_i2() {
        let i2 = Instance::i2();
        let p = HsParams::new(1.0, 1.0, 3).unwrap();
        let (e, v) = eigensolve::ground(&i2, &p, BasisMode::Even, &SolverConfig::default()).unwrap();
        let bc: BandChain<f64> = band_chain(&i2, &p, &v, 4).unwrap();
        assert_eq!(bc.chain.positions, vec![-1, 0]);
        // X/2 acts as sigma_x on the even block, so the bands are (e0 -+ e1)/sqrt2
        // and the chain is the even-mode matrix rotated into the X basis.
        let h = &bc.chain.h;
        assert!((h[0] - 1.0).abs() < 1e-12 && (h[3] + 1.0).abs() < 1e-12);
        assert!((h[1].abs() - 1.0).abs() < 1e-12);
        assert!((bc.chain.energy - e).abs() < 1e-12);
        assert!(bc.chain.residual < 1e-10);
    }

    #[test]
    fn band_chain_random_state_residual_and_bandwidth() {
        let inst = random_instance(8, 3, 14, &[-1, 1], 6).unwrap();
        let mode = BasisMode::Full;
        let p = HsParams::new(1.0, 2.0, 3).unwrap();
        let pairs = eigensolve::lowest_eigenpairs(&inst, &p, mode, 1, &SolverConfig::default()).unwrap();
        let psi = StateVector::new(8, mode, pairs[0].vector.clone()).unwrap();
        for w in [3, 6] {
            let bc: BandChain<f64> = band_chain(&inst, &p, &psi, w).unwrap();
            assert!(bc.chain.residual < 1e-8);
            assert!(bc.chain.half_bandwidth() <= bc.bandwidth_limit);
            assert!(bc.chain.od_norm <= bc.od_norm_bound + 1e-12);
            let back = bc.lift(&bc.chain.psi).unwrap();
            let err: f64 = back.amps.iter().zip(&psi.amps).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10);
        }
    }

    #[test]
    fn large_b_localizes_at_top() {
        let inst = random_instance(6, 3, 6, &[-1, 1], 9).unwrap();
        let mode = BasisMode::Full;
        if eigensolve::ground_index(&inst, mode).is_err() {
            return;
        }
        let p = HsParams::new(1.0, 200.0, 3).unwrap();
        let (_, psi) = eigensolve::ground(&inst, &p, mode, &SolverConfig::default()).unwrap();
        let st = large_x_state(&inst, &p, &psi, Regime::FixedK, None).unwrap();
        assert!(st.support_ok);
        assert!(st.x_over_n > 0.9);
        assert!(st.energy_bound_ok);
        assert_eq!(st.support.1, 6);
    }

    #[test]
    fn exact_x_eigenvector_is_kept() {
        let inst = random_instance(6, 3, 6, &[-1, 1], 9).unwrap();
        let p = HsParams::new(1.0, 200.0, 3).unwrap();
        let plus = StateVector::<f64>::plus(6, BasisMode::Full);
        let st = large_x_state(&inst, &p, &plus, Regime::FixedK, None).unwrap();
        assert_eq!(st.support, (6, 6));
        assert!((st.xi.dot(&plus) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn find_psi_gate() {
        let i2 = Instance::i2();
        let p = HsParams::new(1.0, 1.0, 3).unwrap();
        let r = find_psi(&i2, &p, BasisMode::Even, &SolverConfig::default());
        assert!(matches!(r, Err(Error::NotApplicable(_))));
    }

    #[test]
    fn find_psi_on_near_degenerate_instance() {
        let cfg = SolverConfig::default();
        let mut found = 0;
        for seed in 0..40 {
            let inst = random_instance(7, 3, 9, &[-1, 1], seed).unwrap();
            let mode = BasisMode::Full;
            let Ok(_) = eigensolve::ground_index(&inst, mode) else { continue };
            let e0 = inst.ground_set(&Default::default()).unwrap().0;
            let p = HsParams::from_b(0.9, e0, 3, 1.0).unwrap();
            match find_psi(&inst, &p, mode, &cfg) {
                Ok(fp) => {
                    found += 1;
                    assert!(fp.energy <= e0 as f64 + 0.5 && fp.bx_expect >= 0.25);
                    let op = HsOperator::new(&inst, &p, mode).unwrap();
                    let mut r = vec![0.0; op.dim()];
                    op.apply(&fp.psi.amps, &mut r);
                    linalg::axpy(-fp.energy, &fp.psi.amps, &mut r);
                    assert!(linalg::norm(&r) < 1e-8);
                }
                Err(Error::NotApplicable(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(found > 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn cut_bounds_on_random_chains(seed in 0u64..1_000_000, size in 1usize..40, l in 1usize..9, eps in 0.01f64..0.6) {
            let c = random_chain(size, seed).unwrap();
            let y = (seed % size as u64) as i64;
            prop_assert!(cut_item1(&c, y, l).unwrap().bound_ok);
            prop_assert!(tilt_item2(&c, eps).unwrap().bound_ok);
            let tilt = tilt_weights(&c, eps);
            let u2: Vec<f64> = tilt.iter().zip(&c.psi).map(|(t, p)| t * t * p * p).collect();
            let total: f64 = u2.iter().sum();
            let mut acc = 0.0;
            let mut z = size as i64 - 1;
            while z > 0 && acc + u2[z as usize] < 0.5 * total {
                acc += u2[z as usize];
                z -= 1;
            }
            let w = cut_item3(&c, z, l, eps).unwrap();
            prop_assert!(w.proof.bound_ok, "{:?}", w.proof);
            prop_assert!(w.best.energy <= w.proof.energy);
            prop_assert!(w.best.support.1 - w.best.support.0 <= 4 * l as i64 - 2);
            prop_assert!(w.best.anchor >= z);
            prop_assert!(w.proof.support.0 > w.proof.anchor - l as i64);
            prop_assert!(w.proof.support.1 < w.proof.anchor + 2 * l as i64);
            prop_assert!(w.proof.anchor >= z);
        }
    }
}
