//! Ground states, gaps and the projected ground energy `E^Q_{0,s}` of `H_s`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Caps;
use crate::error::{Error, Result};
use crate::hilbert::{BasisMode, HsOperator, HsParams, StateVector};
use crate::instance::{Instance, SpinConfig};
use crate::linalg::{self, EigenPair, LanczosConfig};
use crate::scalar::Scalar;
use crate::walk;

/// Solver settings shared by every spectral routine.
#[derive(Debug, Clone)]
pub struct SolverConfig<T> {
    pub caps: Caps,
    pub lanczos: LanczosConfig<T>,
    /// Eigenvalues closer than this are reported as degenerate.
    pub degenerate_tol: T,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            caps: Caps::default(),
            lanczos: LanczosConfig::default(),
            degenerate_tol: T::lit(1e-10),
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn with_caps(caps: Caps) -> Self {
        Self {
            caps,
            ..Self::default()
        }
    }
}

/// Working-basis index of the unique `H_Z` ground vector `|0>`.
///
/// Fails when the ground state is degenerate in `mode`, naming the
/// degenerate configurations.
pub fn ground_index(inst: &Instance, mode: BasisMode) -> Result<usize> {
    mode.check(inst)?;
    let dim = mode.dim(inst.n());
    let mut best = i64::MAX;
    let mut hits: Vec<usize> = Vec::new();
    for j in 0..dim {
        let e = inst.energy_bits(mode.config_of(j));
        if e < best {
            best = e;
            hits.clear();
        }
        if e == best {
            hits.push(j);
        }
    }
    if hits.len() > 1 {
        let names: Vec<String> = hits
            .iter()
            .take(8)
            .map(|&j| SpinConfig::new(inst.n(), mode.config_of(j)).to_string())
            .collect();
        let more = if hits.len() > 8 { ", ..." } else { "" };
        return Err(Error::precondition(format!(
            "degeneracy assumption violated in {mode:?} mode: {} ground vectors at E_0 = {best} ({}{more})",
            hits.len(),
            names.join(", ")
        )));
    }
    Ok(hits[0])
}

/// `psi_+` with a deterministic relative perturbation of `1e-3`.
pub fn start_vector<T: Scalar>(dim: usize) -> Vec<T> {
    const GOLDEN: f64 = 0.618_033_988_749_894_8;
    let a = 1.0 / (dim as f64).sqrt();
    (0..dim)
        .map(|j| T::lit(a * (1.0 + 1e-3 * (((j + 1) as f64 * GOLDEN).fract() - 0.5))))
        .collect()
}

fn sign_fix<T: Scalar>(v: &mut [T]) {
    let mut best = T::zero();
    for &x in v.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < T::zero() {
        linalg::scale(-T::one(), v);
    }
}

/// Lowest `m` eigenpairs of a symmetric operator given as a closure, dense
/// below the cap and Lanczos above it.
fn lowest_of<T, F>(apply: F, dim: usize, m: usize, cfg: &SolverConfig<T>) -> Result<Vec<EigenPair<T>>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]),
{
    cfg.caps.check_iterative(dim)?;
    let m = m.min(dim);
    let mut pairs = if dim <= cfg.caps.dense_dim {
        let mut mat = vec![T::zero(); dim * dim];
        let mut e = vec![T::zero(); dim];
        let mut col = vec![T::zero(); dim];
        for j in 0..dim {
            e[j] = T::one();
            apply(&e, &mut col);
            e[j] = T::zero();
            for i in 0..dim {
                mat[i * dim + j] = col[i];
            }
        }
        // Symmetrize away rounding differences in the (X/N)^K products.
        for i in 0..dim {
            for j in 0..i {
                let avg = (mat[i * dim + j] + mat[j * dim + i]) * T::lit(0.5);
                mat[i * dim + j] = avg;
                mat[j * dim + i] = avg;
            }
        }
        let (vals, vecs) = linalg::symmetric_eigen(&mat, dim)?;
        (0..m)
            .map(|k| EigenPair {
                value: vals[k],
                vector: (0..dim).map(|r| vecs[r * dim + k]).collect(),
            })
            .collect::<Vec<_>>()
    } else {
        linalg::lanczos_lowest(&apply, &start_vector::<T>(dim), m, &cfg.lanczos)?
    };
    for p in pairs.iter_mut() {
        sign_fix(&mut p.vector);
    }
    Ok(pairs)
}

/// Lowest `m` eigenpairs of `H_s` in `mode`.
pub fn lowest_eigenpairs<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    m: usize,
    cfg: &SolverConfig<T>,
) -> Result<Vec<EigenPair<T>>> {
    let op = HsOperator::new(inst, p, mode)?;
    lowest_of_operator(&op, m, cfg)
}

pub fn lowest_of_operator<T: Scalar>(op: &HsOperator<T>, m: usize, cfg: &SolverConfig<T>) -> Result<Vec<EigenPair<T>>> {
    if op.is_diagonal() {
        let mut order: Vec<usize> = (0..op.dim()).collect();
        order.sort_by(|&a, &b| op.diag[a].partial_cmp(&op.diag[b]).expect("finite").then(a.cmp(&b)));
        return Ok(order
            .into_iter()
            .take(m)
            .map(|j| {
                let mut vector = vec![T::zero(); op.dim()];
                vector[j] = T::one();
                EigenPair {
                    value: op.diag[j],
                    vector,
                }
            })
            .collect());
    }
    lowest_of(|x, y| op.apply(x, y), op.dim(), m, cfg)
}

/// Lowest `m` eigenpairs of `Q H_s Q` on the range of `Q = 1 - |0><0|`.
/// `|0>` is the basis vector `skip`, so the range of `Q` is spanned by the
/// remaining basis vectors; returned vectors are embedded back with a zero
/// at `skip`.
pub fn lowest_deflated<T: Scalar>(
    op: &HsOperator<T>,
    skip: usize,
    m: usize,
    cfg: &SolverConfig<T>,
) -> Result<Vec<EigenPair<T>>> {
    let dim = op.dim();
    if dim < 2 {
        return Err(Error::input("deflated space is empty"));
    }
    if op.is_diagonal() {
        let mut order: Vec<usize> = (0..dim).filter(|&j| j != skip).collect();
        order.sort_by(|&a, &b| op.diag[a].partial_cmp(&op.diag[b]).expect("finite").then(a.cmp(&b)));
        return Ok(order
            .into_iter()
            .take(m)
            .map(|j| {
                let mut vector = vec![T::zero(); dim];
                vector[j] = T::one();
                EigenPair {
                    value: op.diag[j],
                    vector,
                }
            })
            .collect());
    }
    let apply = |x: &[T], y: &mut [T]| {
        let mut full = Vec::with_capacity(dim);
        full.extend_from_slice(&x[..skip]);
        full.push(T::zero());
        full.extend_from_slice(&x[skip..]);
        let mut out = vec![T::zero(); dim];
        op.apply(&full, &mut out);
        y[..skip].copy_from_slice(&out[..skip]);
        y[skip..].copy_from_slice(&out[skip + 1..]);
    };
    let pairs = lowest_of(apply, dim - 1, m, cfg)?;
    Ok(pairs
        .into_iter()
        .map(|p| {
            let mut v = p.vector;
            v.insert(skip, T::zero());
            EigenPair {
                value: p.value,
                vector: v,
            }
        })
        .collect())
}

/// Ground energy and sign-fixed ground vector of `H_s`.
pub fn ground<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    cfg: &SolverConfig<T>,
) -> Result<(T, StateVector<T>)> {
    let pair = lowest_eigenpairs(inst, p, mode, 1, cfg)?.remove(0);
    Ok((pair.value, StateVector::new(inst.n(), mode, pair.vector)?))
}

fn gap_of<T: Scalar>(pairs: &[EigenPair<T>], cfg: &SolverConfig<T>) -> T {
    if pairs.len() < 2 {
        return T::zero();
    }
    let g = pairs[1].value - pairs[0].value;
    if g < cfg.degenerate_tol {
        T::zero()
    } else {
        g
    }
}

/// First excited minus ground energy of `H_s` (0 when degenerate).
pub fn gap<T: Scalar>(inst: &Instance, p: &HsParams<T>, mode: BasisMode, cfg: &SolverConfig<T>) -> Result<T> {
    let pairs = lowest_eigenpairs(inst, p, mode, 2, cfg)?;
    Ok(gap_of(&pairs, cfg))
}

/// `E^Q_{0,s}`: lowest eigenvalue of `Q H_s Q` on the range of `Q`.
pub fn eq_ground<T: Scalar>(inst: &Instance, p: &HsParams<T>, mode: BasisMode, cfg: &SolverConfig<T>) -> Result<T> {
    let skip = ground_index(inst, mode)?;
    let op = HsOperator::new(inst, p, mode)?;
    Ok(lowest_deflated(&op, skip, 1, cfg)?[0].value)
}

/// Spectral data of `H_s` at one parameter point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SpectralReport<T> {
    pub params: HsParams<T>,
    pub e0: i64,
    pub e_ground: T,
    pub gap: T,
    pub eq_ground: T,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ground_vec: Option<StateVector<T>>,
    /// `E^Q_{0,1} >= E_0 + 1/2`.
    pub qgood_flag: bool,
    /// `B^2 <0|(X/N)^{2K}|0> <= 1/2`.
    pub moment_flag: bool,
}

/// `B^2 <0|(X/N)^{2K}|0> <= 1/2` for the working-basis `|0>`.
pub fn moment_flag<T: Scalar>(n: usize, p: &HsParams<T>, mode: BasisMode) -> bool {
    let b = p.big_b.as_f64();
    b * b * walk::x_moment_mode(n, 2 * p.k, mode) <= 0.5
}

fn point_report<T: Scalar>(
    op: &HsOperator<T>,
    p: &HsParams<T>,
    skip: usize,
    e0: i64,
    eq1: T,
    keep_vec: bool,
    cfg: &SolverConfig<T>,
) -> Result<SpectralReport<T>> {
    let pairs = lowest_of_operator(op, 2, cfg)?;
    let eq = lowest_deflated(op, skip, 1, cfg)?[0].value;
    let gap = gap_of(&pairs, cfg);
    let ground_vec = if keep_vec {
        Some(StateVector::new(op.n, op.mode, pairs[0].vector.clone())?)
    } else {
        None
    };
    Ok(SpectralReport {
        params: *p,
        e0,
        e_ground: pairs[0].value,
        gap,
        eq_ground: eq,
        ground_vec,
        qgood_flag: eq1 >= T::from_i64_lossy(e0) + T::lit(0.5),
        moment_flag: moment_flag(op.n, p, op.mode),
    })
}

/// Full spectral report at `p`, including the ground vector.
pub fn spectral_report<T: Scalar>(
    inst: &Instance,
    p: &HsParams<T>,
    mode: BasisMode,
    cfg: &SolverConfig<T>,
) -> Result<SpectralReport<T>> {
    let skip = ground_index(inst, mode)?;
    let op = HsOperator::new(inst, p, mode)?;
    let e0 = inst.energy_bits(mode.config_of(skip));
    let eq1 = if p.s == T::one() {
        lowest_deflated(&op, skip, 1, cfg)?[0].value
    } else {
        let op1 = op.with_coupling(p.big_b);
        lowest_deflated(&op1, skip, 1, cfg)?[0].value
    };
    point_report(&op, p, skip, e0, eq1, true, cfg)
}

/// Reports along an `s` grid with monotonicity and gap-bound diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PathScan<T> {
    pub grid: Vec<T>,
    pub reports: Vec<SpectralReport<T>>,
    /// Grid indices `i` where `E^Q` at `i + 1` exceeds `E^Q` at `i` by more than `1e-8`.
    pub monotonicity_violations: Vec<usize>,
    /// Grid indices where `gap < E^Q_{0,s} - E_0` although the right side is positive.
    pub gap_violations: Vec<usize>,
}

pub const MONOTONICITY_TOL: f64 = 1e-8;

/// `points` equally spaced values covering `[0, 1]`.
pub fn uniform_grid<T: Scalar>(points: usize) -> Vec<T> {
    match points {
        0 => Vec::new(),
        1 => vec![T::one()],
        _ => (0..points)
            .map(|i| T::from_usize_lossy(i) / T::from_usize_lossy(points - 1))
            .collect(),
    }
}

pub fn path_scan<T: Scalar>(
    inst: &Instance,
    big_b: T,
    k: u32,
    grid: &[T],
    mode: BasisMode,
    cfg: &SolverConfig<T>,
) -> Result<PathScan<T>> {
    if grid.windows(2).any(|w| w[0] > w[1]) || grid.iter().any(|&s| s < T::zero() || s > T::one()) {
        return Err(Error::input("grid must be sorted and lie in [0, 1]"));
    }
    let skip = ground_index(inst, mode)?;
    let base = HsParams::new(T::one(), big_b, k)?;
    let op1 = HsOperator::new(inst, &base, mode)?;
    let e0 = inst.energy_bits(mode.config_of(skip));
    let eq1 = lowest_deflated(&op1, skip, 1, cfg)?[0].value;
    let reports = grid
        .par_iter()
        .map(|&s| {
            let p = base.at(s);
            let op = op1.with_coupling(p.coupling());
            point_report(&op, &p, skip, e0, eq1, false, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let tol = T::lit(MONOTONICITY_TOL);
    let monotonicity_violations = reports
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].eq_ground > w[0].eq_ground + tol)
        .map(|(i, _)| i)
        .collect();
    let e0t = T::from_i64_lossy(e0);
    let gap_violations = reports
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            let rhs = r.eq_ground - e0t;
            rhs > T::zero() && r.gap < rhs - tol
        })
        .map(|(i, _)| i)
        .collect();
    Ok(PathScan {
        grid: grid.to_vec(),
        reports,
        monotonicity_violations,
        gap_violations,
    })
}

/// Every eigenvalue of `H_s`, by dense diagonalization; intended for
/// cross-checks at small sizes (working dimension at most 4096).
pub fn full_spectrum<T: Scalar>(inst: &Instance, p: &HsParams<T>, mode: BasisMode) -> Result<Vec<T>> {
    let op = HsOperator::new(inst, p, mode)?;
    if op.dim() > 4096 {
        return Err(Error::Resource {
            what: "dense dimension",
            requested: op.dim(),
            cap: 4096,
        });
    }
    linalg::symmetric_eigenvalues(&op.dense(), op.dim())
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

    #[test]
    fn i2_closed_forms() {
        let cfg = SolverConfig::default();
        let i2 = Instance::i2();
        let (e, v) = ground(&i2, &i2_params(), BasisMode::Even, &cfg).unwrap();
        assert!((e + SQRT2).abs() < 1e-12);
        assert!(v.amps.iter().all(|&a| a > 0.0));
        let g = gap(&i2, &i2_params(), BasisMode::Even, &cfg).unwrap();
        assert!((g - 2.0 * SQRT2).abs() < 1e-12);
        let eq = eq_ground(&i2, &i2_params(), BasisMode::Even, &cfg).unwrap();
        assert!((eq - 1.0).abs() < 1e-12);
        let g0 = gap(&i2, &i2_params().at(0.0), BasisMode::Even, &cfg).unwrap();
        assert!((g0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_endpoints() {
        let cfg = SolverConfig::default();
        let inst = random_instance(7, 3, 10, &[-2, -1, 1, 2], 3).unwrap();
        let mode = BasisMode::Full;
        let Ok(skip) = ground_index(&inst, mode) else {
            return;
        };
        let e0 = inst.energy_bits(skip as u64) as f64;
        for p in [HsParams::new(0.0, 2.0, 3).unwrap(), HsParams::new(0.6, 0.0, 3).unwrap()] {
            let (e, v) = ground(&inst, &p, mode, &cfg).unwrap();
            assert_eq!(e, e0);
            assert_eq!(v.amps[skip], 1.0);
        }
        let eq = eq_ground(&inst, &HsParams::new(0.0, 2.0, 3).unwrap(), mode, &cfg).unwrap();
        let h = inst.histogram(&Caps::default()).unwrap();
        assert_eq!(eq, h.first_excited().unwrap() as f64);
    }

    #[test]
    fn degenerate_ground_is_reported() {
        let i2 = Instance::i2();
        let err = ground_index(&i2, BasisMode::Full).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("00") && msg.contains("11"), "{msg}");
    }

    #[test]
    fn lanczos_path_agrees_with_dense() {
        let inst = random_instance(10, 3, 25, &[-1, 1], 8).unwrap();
        let p = HsParams::new(0.8, 3.0, 3).unwrap();
        let cfg = SolverConfig::default();
        let pairs: Vec<EigenPair<f64>> = lowest_eigenpairs(&inst, &p, BasisMode::Full, 2, &cfg).unwrap();
        let dense = full_spectrum(&inst, &p, BasisMode::Full).unwrap();
        assert!((pairs[0].value - dense[0]).abs() < 1e-9);
        assert!((pairs[1].value - dense[1]).abs() < 1e-9);
        let op = HsOperator::new(&inst, &p, BasisMode::Full).unwrap();
        let mut r = vec![0.0; op.dim()];
        op.apply(&pairs[0].vector, &mut r);
        linalg::axpy(-pairs[0].value, &pairs[0].vector, &mut r);
        assert!(linalg::norm(&r) <= 1e-9);
    }

    #[test]
    fn deflated_lanczos_agrees_with_dense() {
        let inst = random_instance(9, 2, 20, &[-1, 1], 4).unwrap();
        let mode = BasisMode::Even;
        let Ok(skip) = ground_index(&inst, mode) else {
            return;
        };
        let p = HsParams::new(1.0, 2.0, 3).unwrap();
        let op = HsOperator::new(&inst, &p, mode).unwrap();
        let dim = op.dim();
        let dense = op.dense();
        let reduced: Vec<f64> = (0..dim)
            .filter(|&i| i != skip)
            .flat_map(|i| (0..dim).filter(|&j| j != skip).map(move |j| (i, j)))
            .map(|(i, j)| dense[i * dim + j])
            .collect();
        let vals = linalg::symmetric_eigenvalues(&reduced, dim - 1).unwrap();
        let small = SolverConfig {
            caps: Caps {
                dense_dim: 16,
                ..Caps::default()
            },
            ..SolverConfig::default()
        };
        let got = lowest_deflated(&op, skip, 1, &small).unwrap()[0].value;
        assert!((got - vals[0]).abs() < 1e-9);
    }

    #[test]
    fn path_scan_i2() {
        let scan: PathScan<f64> = path_scan(&Instance::i2(), 1.0, 3, &[0.0, 0.5, 1.0], BasisMode::Even, &SolverConfig::default()).unwrap();
        for r in &scan.reports {
            assert!((r.eq_ground - 1.0).abs() < 1e-12);
        }
        assert!(scan.monotonicity_violations.is_empty());
        assert!(scan.gap_violations.is_empty());
    }

    #[test]
    fn report_flags() {
        let r = spectral_report(&Instance::i2(), &i2_params(), BasisMode::Even, &SolverConfig::default()).unwrap();
        assert!(r.qgood_flag);
        // B^2 <0|(X/2)^6|0> = 1 in even mode.
        assert!(!r.moment_flag);
        assert!(r.e_ground <= r.e0 as f64);
        assert!(r.eq_ground >= r.e_ground);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn perron_frobenius_gap_and_monotonicity(seed in 0u64..10_000, d in 2usize..4) {
            let n = 7;
            let inst = random_instance(n, d, 10, &[-1, 1], seed).unwrap();
            let mode = BasisMode::auto(&inst);
            prop_assume!(ground_index(&inst, mode).is_ok());
            let cfg = SolverConfig::default();
            let scan = path_scan(&inst, 1.5, 3, &uniform_grid(6), mode, &cfg).unwrap();
            prop_assert!(scan.monotonicity_violations.is_empty());
            prop_assert!(scan.gap_violations.is_empty());
            let (e, v) = ground(&inst, &HsParams::new(1.0, 1.5, 3).unwrap(), mode, &cfg).unwrap();
            prop_assert!(v.amps.iter().all(|&a| a >= 1e-14));
            prop_assert!(e <= scan.reports[0].e0 as f64 + 1e-12);
        }
    }
}
