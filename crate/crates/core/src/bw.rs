//! Brillouin–Wigner perturbation theory around the `H_Z` ground vector `|0>`.
//!
//! All resolvent systems live on the range of `Q = 1 - |0><0|`. Because `|0>`
//! is a working-basis vector, that range is spanned by the other basis
//! vectors and vectors on it are stored with the `|0>` entry removed.

use serde::{Deserialize, Serialize};

use crate::eigensolve::{self, SolverConfig};
use crate::error::{Error, Result};
use crate::hilbert::{BasisMode, HsOperator, HsParams, StateVector};
use crate::instance::Instance;
use crate::linalg;
use crate::scalar::Scalar;
use crate::walk;

fn delete<T: Copy>(v: &[T], skip: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len() - 1);
    out.extend_from_slice(&v[..skip]);
    out.extend_from_slice(&v[skip + 1..]);
    out
}

fn embed<T: Scalar>(v: &[T], skip: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len() + 1);
    out.extend_from_slice(&v[..skip]);
    out.push(T::zero());
    out.extend_from_slice(&v[skip..]);
    out
}

/// The shifted systems `(Q H_s Q - E) z = Q V |0>` for one parameter point.
struct QSystem<T> {
    op: HsOperator<T>,
    skip: usize,
    e0: T,
    s: T,
    /// `<0|V|0>`.
    v00: T,
    /// `Q V |0>` in reduced coordinates.
    y: Vec<T>,
}

impl<T: Scalar> QSystem<T> {
    fn new(inst: &Instance, p: &HsParams<T>, mode: BasisMode) -> Result<Self> {
        let skip = eigensolve::ground_index(inst, mode)?;
        let op = HsOperator::new(inst, p, mode)?;
        let mut e = vec![T::zero(); op.dim()];
        e[skip] = T::one();
        let mut v0 = vec![T::zero(); op.dim()];
        op.apply_v(p.big_b, &e, &mut v0);
        Ok(Self {
            e0: op.diag[skip],
            v00: v0[skip],
            y: delete(&v0, skip),
            skip,
            s: p.s,
            op,
        })
    }

    fn apply_shifted(&self, e: T, x: &[T], out: &mut [T]) {
        let full = embed(x, self.skip);
        let mut hx = vec![T::zero(); full.len()];
        self.op.apply(&full, &mut hx);
        for ((o, &h), &xi) in out.iter_mut().zip(delete(&hx, self.skip).iter()).zip(x) {
            *o = h - e * xi;
        }
    }

    /// Solves `(Q H_s Q - E) z = y`; fails when `E` is not below the Q-spectrum.
    fn solve(&self, e: T) -> Result<Vec<T>> {
        let scale = linalg::norm(&self.y).max(T::one());
        let max_iter = (10 * self.y.len()).clamp(100, 20_000);
        linalg::conjugate_gradient(|x, o| self.apply_shifted(e, x, o), &self.y, T::solve_tol() * scale, max_iter)
    }

    /// `f(E) = E_0 + s<0|V|0> + s^2 <0|V G_s(E) V|0> - E` and its derivative.
    fn residual(&self, e: T) -> Result<(T, T, Vec<T>)> {
        let z = self.solve(e)?;
        let s2 = self.s * self.s;
        let f = self.e0 + self.s * self.v00 - s2 * linalg::dot(&self.y, &z) - e;
        let df = -T::one() - s2 * linalg::dot(&z, &z);
        Ok((f, df, z))
    }
}

/// Self-consistent energy together with the resolvent solution at that energy.
#[derive(Debug, Clone)]
pub struct BwSolution<T> {
    pub e01: T,
    pub eq_ground: T,
    /// `G_s(E) V |0>`, embedded in the working basis (zero on `|0>`).
    pub resolvent_v0: Vec<T>,
    pub skip: usize,
    pub iterations: usize,
}

/// Solves `E = E_0 + s<0|V|0> + s^2 <0|V G_s(E) V|0>` by safeguarded Newton
/// steps inside the bracket `[E_0 - sB, min(E_0, E^Q_{0,s})]`.
pub fn solve_self_consistent<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    cfg: &SolverConfig<T>,
) -> Result<BwSolution<T>> {
    let sys = QSystem::new(inst, p, mode)?;
    let dim = sys.op.dim();
    if p.coupling() == T::zero() {
        let eq = sys.op.diag.iter().enumerate().filter(|&(j, _)| j != sys.skip).map(|(_, &d)| d).fold(T::infinity(), T::min);
        return Ok(BwSolution {
            e01: sys.e0,
            eq_ground: eq,
            resolvent_v0: vec![T::zero(); dim],
            skip: sys.skip,
            iterations: 0,
        });
    }
    let eq = eigensolve::lowest_deflated(&sys.op, sys.skip, 1, cfg)?[0].value;
    let margin = T::lit(1e-9) * eq.abs().max(T::one());
    let mut lo = sys.e0 - p.coupling();
    let mut hi = sys.e0.min(eq - margin);
    if !(lo < hi) {
        return Err(Error::precondition(
            "E^Q_{0,s} lies below the bracket: the series breaks down",
        ));
    }
    let (f_lo, _, _) = sys.residual(lo)?;
    if f_lo < T::zero() {
        return Err(Error::precondition("no self-consistent root in the bracket"));
    }
    let (mut f, mut df, mut z) = sys.residual(hi)?;
    if f > T::zero() {
        return Err(Error::precondition(
            "no self-consistent root below E^Q_{0,s}: the series breaks down",
        ));
    }
    let tol = T::solve_tol();
    let mut e = hi;
    for it in 1..=200 {
        if f == T::zero() {
            return Ok(solution(&sys, e, eq, z, it));
        }
        if f > T::zero() {
            lo = e;
        } else {
            hi = e;
        }
        let newton = e - f / df;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * T::lit(0.5)
        };
        let step = (next - e).abs();
        e = next;
        (f, df, z) = sys.residual(e)?;
        if step <= tol || hi - lo <= tol {
            return Ok(solution(&sys, e, eq, z, it));
        }
    }
    Err(Error::numerical("self-consistent iteration did not converge", f.abs().as_f64()))
}

fn solution<T: Scalar>(sys: &QSystem<T>, e: T, eq: T, z: Vec<T>, iterations: usize) -> BwSolution<T> {
    // G_s(E) = Q (E - Q H_s Q)^{-1} Q, so G_s(E) V|0> = -z.
    let mut x = embed(&z, sys.skip);
    linalg::scale(-T::one(), &mut x);
    BwSolution {
        e01: e,
        eq_ground: eq,
        resolvent_v0: x,
        skip: sys.skip,
        iterations,
    }
}

/// Self-consistent `E_{0,s}`.
pub fn self_consistent_e01<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    cfg: &SolverConfig<T>,
) -> Result<T> {
    Ok(solve_self_consistent(inst, p, mode, cfg)?.e01)
}

fn phi_of<T: Scalar>(n: usize, mode: BasisMode, s: T, sol: &BwSolution<T>) -> Result<StateVector<T>> {
    let mut amps: Vec<T> = sol.resolvent_v0.iter().map(|&x| s * x).collect();
    amps[sol.skip] = T::one();
    StateVector::new(n, mode, amps)
}

/// Unnormalized `phi_{0,s} = |0> + s G_s(E_{0,s}) V |0>` with `<phi|0> = 1`.
pub fn bw_state<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    cfg: &SolverConfig<T>,
) -> Result<StateVector<T>> {
    let sol = solve_self_consistent(inst, p, mode, cfg)?;
    phi_of(inst.n(), mode, p.s, &sol)
}

/// `|<psi_+|psi_{0,1}>|^2` from the exact ground state of `H_1`.
pub fn p_ov_exact<T: Scalar>(inst: &Instance, p: &HsParams<T>, mode: BasisMode, cfg: &SolverConfig<T>) -> Result<T> {
    let (_, v) = eigensolve::ground(inst, &p.at(T::one()), mode, cfg)?;
    let o = StateVector::plus(inst.n(), mode).dot(&v);
    Ok((o * o).min(T::one()))
}

/// Energy-shift and norm bounds at `s = 1`. Every entry is `None` when the
/// bounds do not apply (`E^Q_{0,1} < E_0 + 1/2`); the simplified forms are
/// also `None` when `B^2 <0|(X/N)^{2K}|0> > 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundChecks {
    pub eshift_bound_ok: Option<bool>,
    pub norm_bound_ok: Option<bool>,
    pub egood_ok: Option<bool>,
    pub normgood_ok: Option<bool>,
}

impl BoundChecks {
    pub const NOT_APPLICABLE: Self = Self {
        eshift_bound_ok: None,
        norm_bound_ok: None,
        egood_ok: None,
        normgood_ok: None,
    };

    /// True when no applicable check failed.
    pub fn all_ok(&self) -> bool {
        [self.eshift_bound_ok, self.norm_bound_ok, self.egood_ok, self.normgood_ok]
            .iter()
            .all(|c| c.unwrap_or(true))
    }
}

fn bound_checks_from<T: Scalar>(n: usize, p: &HsParams<T>, mode: BasisMode, e0: T, eq: T, e01: T, phi_sq: T) -> BoundChecks {
    if eq < e0 + T::lit(0.5) {
        return BoundChecks::NOT_APPLICABLE;
    }
    let b = p.big_b.as_f64();
    let m_k = walk::x_moment_mode(n, p.k, mode);
    let m_2k = walk::x_moment_mode(n, 2 * p.k, mode);
    let (e0, e01, phi_sq) = (e0.as_f64(), e01.as_f64(), phi_sq.as_f64());
    let slack = 1e-9 * e0.abs().max(1.0);
    let good = b * b * m_2k <= 0.5;
    BoundChecks {
        eshift_bound_ok: Some(e01 >= e0 - b * m_k - 2.0 * b * b * m_2k - slack),
        norm_bound_ok: Some(phi_sq <= 1.0 + 4.0 * b * b * m_2k + 1e-9),
        egood_ok: good.then_some(e01 >= e0 - b * m_k - 1.0 - slack),
        normgood_ok: good.then_some(phi_sq.sqrt() <= 2.0 + 1e-9),
    }
}

pub fn bound_checks<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    cfg: &SolverConfig<T>,
) -> Result<BoundChecks> {
    let p1 = p.at(T::one());
    let sol = solve_self_consistent(inst, &p1, mode, cfg)?;
    let phi = phi_of(inst.n(), mode, p1.s, &sol)?;
    let e0 = T::from_i64_lossy(inst.energy_bits(mode.config_of(sol.skip)));
    Ok(bound_checks_from(inst.n(), &p1, mode, e0, sol.eq_ground, sol.e01, phi.norm_sq()))
}

/// Radius of convergence in `s` of the resolvent series at energy `omega`
/// (default: the self-consistent `E_{0,s}`).
///
/// On the range of `Q` write `|g| = (E_u - omega)^{-1/2}` and `v = Q V Q`;
/// the resolvent is singular exactly where `1 + s |g| v |g|` is, so the
/// radius is `1 / max |lambda(|g| v |g|)|` (infinite when `v` vanishes there).
pub fn convergence_radius<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    omega: Option<T>,
    cfg: &SolverConfig<T>,
) -> Result<T> {
    cfg.caps.check_assembly(inst.n())?;
    let omega = match omega {
        Some(w) => w,
        None => self_consistent_e01(inst, p, mode, cfg)?,
    };
    let skip = eigensolve::ground_index(inst, mode)?;
    let op = HsOperator::new(inst, p, mode)?;
    let dim = op.dim();
    if dim < 2 {
        return Ok(T::infinity());
    }
    let g: Vec<T> = delete(&op.diag, skip)
        .into_iter()
        .map(|e| {
            if e > omega {
                Ok(T::one() / (e - omega).sqrt())
            } else {
                Err(Error::input("omega must lie below every H_Z energy on the range of Q"))
            }
        })
        .collect::<Result<_>>()?;
    let apply = |x: &[T], out: &mut [T]| {
        let scaled: Vec<T> = x.iter().zip(&g).map(|(&a, &b)| a * b).collect();
        let full = embed(&scaled, skip);
        let mut vx = vec![T::zero(); dim];
        op.apply_v(p.big_b, &full, &mut vx);
        for ((o, &v), &gi) in out.iter_mut().zip(delete(&vx, skip).iter()).zip(&g) {
            *o = v * gi;
        }
    };
    let red = dim - 1;
    let max_abs = if red <= cfg.caps.dense_dim {
        let mut mat = vec![T::zero(); red * red];
        let mut e = vec![T::zero(); red];
        let mut col = vec![T::zero(); red];
        for j in 0..red {
            e[j] = T::one();
            apply(&e, &mut col);
            e[j] = T::zero();
            for i in 0..red {
                mat[i * red + j] = col[i];
            }
        }
        for i in 0..red {
            for j in 0..i {
                let avg = (mat[i * red + j] + mat[j * red + i]) * T::lit(0.5);
                mat[i * red + j] = avg;
                mat[j * red + i] = avg;
            }
        }
        linalg::symmetric_eigenvalues(&mat, red)?
            .into_iter()
            .fold(T::zero(), |m, l| m.max(l.abs()))
    } else {
        let start = eigensolve::start_vector::<T>(red);
        let low = linalg::lanczos_lowest(apply, &start, 1, &cfg.lanczos)?[0].value;
        let neg = |x: &[T], out: &mut [T]| {
            apply(x, out);
            linalg::scale(-T::one(), out);
        };
        let high = -linalg::lanczos_lowest(neg, &start, 1, &cfg.lanczos)?[0].value;
        low.abs().max(high.abs())
    };
    if max_abs <= T::eigen_tol() * T::lit(1e-3) {
        Ok(T::infinity())
    } else {
        Ok(T::one() / max_abs)
    }
}

/// Series terms `<psi_+|(s G_0(E) V)^t|0>` for `t = 0..=t_max`, with
/// `G_0(E) = Q (E - H_Z)^{-1}` and `E` below every `H_Z` energy on the range
/// of `Q`. Each term is non-negative.
pub fn series_terms<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    energy: T,
    t_max: u32,
) -> Result<Vec<T>> {
    let skip = eigensolve::ground_index(inst, mode)?;
    let op = HsOperator::new(inst, p, mode)?;
    let dim = op.dim();
    let denom: Vec<T> = op.diag.iter().map(|&e| energy - e).collect();
    if denom.iter().enumerate().any(|(j, &d)| j != skip && d >= T::zero()) {
        return Err(Error::input("energy must lie below every H_Z energy on the range of Q"));
    }
    let plus = T::one() / T::from_usize_lossy(dim).sqrt();
    let mut w = vec![T::zero(); dim];
    w[skip] = T::one();
    let mut next = vec![T::zero(); dim];
    let mut terms = vec![plus];
    for _ in 0..t_max {
        op.apply_v(p.big_b, &w, &mut next);
        next[skip] = T::zero();
        for (x, &d) in next.iter_mut().zip(&denom) {
            *x = p.s * *x / d;
        }
        std::mem::swap(&mut w, &mut next);
        terms.push(plus * w.iter().fold(T::zero(), |a, &b| a + b));
    }
    Ok(terms)
}

/// Brillouin–Wigner summary at `s = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BwReport<T> {
    pub params: HsParams<T>,
    pub e0: i64,
    pub e01: T,
    pub eq_ground: T,
    pub phi_norm_sq: T,
    /// `P_ov` from the exact ground state.
    pub p_ov: T,
    /// `|<psi_+|phi>|^2 / |phi|^2`.
    pub p_ov_from_phi: T,
    /// `None` above the dense-assembly cap.
    pub radius: Option<T>,
    #[serde(flatten)]
    pub bounds: BoundChecks,
}

pub fn bw_report<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    cfg: &SolverConfig<T>,
) -> Result<BwReport<T>> {
    let p1 = p.at(T::one());
    let sol = solve_self_consistent(inst, &p1, mode, cfg)?;
    let phi = phi_of(inst.n(), mode, p1.s, &sol)?;
    let e0 = inst.energy_bits(mode.config_of(sol.skip));
    let phi_sq = phi.norm_sq();
    let o = StateVector::plus(inst.n(), mode).dot(&phi);
    let radius = if inst.n() <= cfg.caps.assembly_n {
        Some(convergence_radius(inst, &p1, mode, Some(sol.e01), cfg)?)
    } else {
        None
    };
    Ok(BwReport {
        params: p1,
        e0,
        e01: sol.e01,
        eq_ground: sol.eq_ground,
        phi_norm_sq: phi_sq,
        p_ov: p_ov_exact(inst, &p1, mode, cfg)?,
        p_ov_from_phi: o * o / phi_sq,
        radius,
        bounds: bound_checks_from(inst.n(), &p1, mode, T::from_i64_lossy(e0), sol.eq_ground, sol.e01, phi_sq),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::random_instance;
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn i2_params() -> HsParams<f64> {
        HsParams::new(1.0, 1.0, 3).unwrap()
    }

    fn cfg() -> SolverConfig<f64> {
        SolverConfig::default()
    }

    #[test]
    fn i2_energy_and_state() {
        let i2 = Instance::i2();
        let e = self_consistent_e01(&i2, &i2_params(), BasisMode::Even, &cfg()).unwrap();
        assert!((e + SQRT2).abs() < 1e-10);
        let phi = bw_state(&i2, &i2_params(), BasisMode::Even, &cfg()).unwrap();
        assert_eq!(phi.amps[0], 1.0);
        assert!((phi.amps[1] - (SQRT2 - 1.0)).abs() < 1e-10);
        let pov = p_ov_exact(&i2, &i2_params(), BasisMode::Even, &cfg()).unwrap();
        assert!((pov - (2.0 + SQRT2) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn i2_report() {
        let r = bw_report(&Instance::i2(), &i2_params(), BasisMode::Even, &cfg()).unwrap();
        assert!((r.p_ov - r.p_ov_from_phi).abs() < 1e-10);
        assert!(r.phi_norm_sq >= 1.0);
        // Q V Q vanishes on the one-dimensional range of Q.
        assert_eq!(r.radius, Some(f64::INFINITY));
        assert_eq!(r.bounds.eshift_bound_ok, Some(true));
        assert_eq!(r.bounds.egood_ok, None);
    }

    #[test]
    fn zero_coupling_is_exact() {
        let i2 = Instance::i2();
        let p = HsParams::new(1.0, 0.0, 3).unwrap();
        assert_eq!(self_consistent_e01(&i2, &p, BasisMode::Even, &cfg()).unwrap(), -1.0);
        let phi = bw_state(&i2, &p.at(0.0), BasisMode::Even, &cfg()).unwrap();
        assert_eq!(phi.amps, vec![1.0, 0.0]);
        let pov = p_ov_exact(&i2, &p, BasisMode::Even, &cfg()).unwrap();
        assert!((pov - 0.5).abs() < 1e-15);
        let r = convergence_radius(&i2, &p, BasisMode::Even, None, &cfg()).unwrap();
        assert!(r.is_infinite());
    }

    #[test]
    fn large_field_overlap_approaches_one() {
        let inst = random_instance(6, 3, 8, &[-1, 1], 2).unwrap();
        let p = HsParams::new(1.0, 1e3 * inst.j_tot() as f64, 1).unwrap();
        assert!(p_ov_exact(&inst, &p, BasisMode::Full, &cfg()).unwrap() >= 0.99);
    }

    #[test]
    fn series_sums_to_bw_overlap() {
        let inst = random_instance(8, 3, 14, &[-1, 1], 21).unwrap();
        let mode = BasisMode::Full;
        if eigensolve::ground_index(&inst, mode).is_err() {
            return;
        }
        let p = HsParams::new(1.0, 0.3, 3).unwrap();
        let sol = solve_self_consistent(&inst, &p, mode, &cfg()).unwrap();
        let phi = phi_of(8, mode, 1.0, &sol).unwrap();
        let target = StateVector::plus(8, mode).dot(&phi);
        let terms = series_terms(&inst, &p, mode, sol.e01, 60).unwrap();
        assert!(terms.iter().all(|&t| t >= 0.0));
        let sum: f64 = terms.iter().sum();
        assert!((sum - target).abs() < 1e-9, "{sum} vs {target}");
    }

    #[test]
    fn lanczos_radius_matches_dense() {
        let inst = random_instance(9, 3, 16, &[-1, 1], 5).unwrap();
        let mode = BasisMode::Full;
        if eigensolve::ground_index(&inst, mode).is_err() {
            return;
        }
        let p = HsParams::new(1.0, 2.0, 3).unwrap();
        let dense_cfg = SolverConfig {
            caps: crate::config::Caps {
                dense_dim: 1024,
                ..Default::default()
            },
            ..cfg()
        };
        let a = convergence_radius(&inst, &p, mode, Some(-20.0), &dense_cfg).unwrap();
        let b = convergence_radius(&inst, &p, mode, Some(-20.0), &cfg()).unwrap();
        assert!((a - b).abs() < 1e-7 * a, "{a} vs {b}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn matches_exact_diagonalization(seed in 0u64..10_000, d in 2usize..4, b in 0.05f64..0.4) {
            let inst = random_instance(8, d, 12, &[-1, 1], seed).unwrap();
            let mode = BasisMode::auto(&inst);
            prop_assume!(eigensolve::ground_index(&inst, mode).is_ok());
            let e0 = inst.ground_set(&Default::default()).unwrap().0;
            let p = HsParams::from_b(b, e0, 3, 1.0).unwrap();
            let c = cfg();
            let sol = solve_self_consistent(&inst, &p, mode, &c).unwrap();
            prop_assume!(sol.eq_ground >= e0 as f64 + 0.5);
            let (e, v) = eigensolve::ground(&inst, &p, mode, &c).unwrap();
            prop_assert!((sol.e01 - e).abs() < 1e-8);
            let phi = phi_of(8, mode, 1.0, &sol).unwrap();
            let unit = phi.clone().normalized().unwrap();
            prop_assert!((unit.dot(&v).abs() - 1.0).abs() < 1e-8);
            prop_assert!(phi.norm_sq() >= 1.0);
            let r = convergence_radius(&inst, &p, mode, Some(sol.e01), &c).unwrap();
            prop_assert!(r > 1.0);
            let bc = bound_checks(&inst, &p, mode, &c).unwrap();
            prop_assert!(bc.all_ok());
        }
    }
}
