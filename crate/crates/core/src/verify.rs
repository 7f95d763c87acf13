//! Seeded instance battery and a fast invariant suite over it.

use serde::{Deserialize, Serialize};

use crate::bw;
use crate::config::Caps;
use crate::eigensolve::{self, SolverConfig};
use crate::entropy::{self, EnergyDistribution};
use crate::error::{Error, Result};
use crate::hilbert::{BasisMode, HsParams};
use crate::instance::{random_instance, Instance};
use crate::reduce;
use crate::shortpath::{self, DichotomyBranch, RunConfig, Strength, Verdict};

/// One battery member: the instance satisfies the degeneracy assumption in
/// `mode`.
#[derive(Debug, Clone)]
pub struct BatteryEntry {
    pub index: usize,
    pub seed: u64,
    pub inst: Instance,
    pub mode: BasisMode,
}

pub const BATTERY_B: f64 = 0.2;
pub const BATTERY_K: u32 = 3;

/// `count` instances with `n` cycling through `6..=n_max`, `d` alternating
/// between 2 and 3, `2n` terms with weights `+-1`; draws that violate the
/// degeneracy assumption are replaced by the next sub-seed.
pub fn battery(count: usize, seed: u64, n_max: usize) -> Result<Vec<BatteryEntry>> {
    if !(6..=20).contains(&n_max) {
        return Err(Error::input("battery n_max must lie in 6..=20"));
    }
    let span = n_max - 5;
    let mut out = Vec::with_capacity(count);
    let mut sub = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for index in 0..count {
        let n = 6 + index % span;
        let d = 2 + index % 2;
        loop {
            sub = sub.wrapping_add(1);
            let inst = random_instance(n, d, 2 * n, &[-1, 1], sub)?;
            let mode = BasisMode::auto(&inst);
            if eigensolve::ground_index(&inst, mode).is_ok() {
                out.push(BatteryEntry {
                    index,
                    seed: sub,
                    inst,
                    mode,
                });
                break;
            }
        }
    }
    Ok(out)
}

impl BatteryEntry {
    pub fn e0(&self) -> i64 {
        let skip = eigensolve::ground_index(&self.inst, self.mode).expect("battery entries are nondegenerate");
        self.inst.energy_bits(self.mode.config_of(skip))
    }

    pub fn params(&self) -> HsParams<f64> {
        HsParams::from_b(BATTERY_B, self.e0(), BATTERY_K, 1.0).expect("battery parameters are valid")
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub checked: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(detail());
        }
    }

    fn error(&mut self, label: &str, e: &Error) {
        self.checked += 1;
        self.failures.push(format!("{label}: {e}"));
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub instances: usize,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

/// Runs the invariant suite on every battery entry.
pub fn run_suite(entries: &[BatteryEntry], grid_points: usize, caps: &Caps) -> VerifyReport {
    let cfg = SolverConfig::<f64>::with_caps(*caps);
    let grid = eigensolve::uniform_grid::<f64>(grid_points);
    let mut oracle = CheckResult::new("self-consistent E_{0,1} equals the ground energy (1e-8)");
    let mut gap_lemma = CheckResult::new("gap(H_s) >= E^Q_{0,s} - E_0 and E^Q_{0,s} nonincreasing");
    let mut gapped = CheckResult::new("gap(H_1) >= 1/2 under the gapped-branch conditions");
    let mut lsi = CheckResult::new("log-Sobolev inequalities on ground states");
    let mut chain = CheckResult::new("entropy chain identity and two-point bound");
    let mut reduction = CheckResult::new("reduction halving, membership and degree lift");
    let mut dichotomy = CheckResult::new("dichotomy completes with valid evidence");
    let mut hybrid = CheckResult::new("hybrid exact verdicts are ground configurations");

    for e in entries {
        let label = format!("#{} (n={}, d={}, seed={})", e.index, e.inst.n(), e.inst.d(), e.seed);
        let p = e.params();
        let e0 = e.e0() as f64;

        match eigensolve::eq_ground(&e.inst, &p, e.mode, &cfg) {
            Ok(eq) if eq >= e0 + 0.5 => {
                match (
                    bw::self_consistent_e01(&e.inst, &p, e.mode, &cfg),
                    eigensolve::ground(&e.inst, &p, e.mode, &cfg),
                ) {
                    (Ok(bw_e), Ok((g, _))) => {
                        oracle.record((bw_e - g).abs() <= 1e-8, || format!("{label}: {bw_e} vs {g}"))
                    }
                    (Err(err), _) | (_, Err(err)) => oracle.error(&label, &err),
                }
                if eigensolve::moment_flag(e.inst.n(), &p, e.mode) {
                    match eigensolve::gap(&e.inst, &p, e.mode, &cfg) {
                        Ok(g) => gapped.record(g >= 0.5, || format!("{label}: gap {g}")),
                        Err(err) => gapped.error(&label, &err),
                    }
                } else {
                    gapped.skipped += 1;
                }
            }
            Ok(_) => {
                oracle.skipped += 1;
                gapped.skipped += 1;
            }
            Err(err) => oracle.error(&label, &err),
        }

        match eigensolve::path_scan(&e.inst, p.big_b, p.k, &grid, e.mode, &cfg) {
            Ok(scan) => {
                gap_lemma.record(
                    scan.gap_violations.is_empty() && scan.monotonicity_violations.is_empty(),
                    || {
                        format!(
                            "{label}: gap violations {:?}, monotonicity violations {:?}",
                            scan.gap_violations, scan.monotonicity_violations
                        )
                    },
                );
            }
            Err(err) => gap_lemma.error(&label, &err),
        }

        match eigensolve::ground(&e.inst, &p, e.mode, &cfg) {
            Ok((_, v)) => {
                let full = v.to_full();
                match entropy::check_lsi(&full) {
                    Ok(c) => lsi.record(c.lsi1_ok && c.lsi2_ok, || format!("{label}: {c:?}")),
                    Err(err) => lsi.error(&label, &err),
                }
                let checked = EnergyDistribution::of_state(&e.inst, &full).and_then(|dist| {
                    let hist = e.inst.histogram(caps)?;
                    let dec = entropy::maxwell_decompose(&hist, &dist.probs, &dist.cond_entropy)?;
                    Ok((dist.chain_residual(), dec.bound_holds))
                });
                match checked {
                    Ok((res, holds)) => {
                        chain.record(res.abs() <= 1e-9 && holds, || format!("{label}: residual {res:e}, two-point {holds}"))
                    }
                    Err(err) => chain.error(&label, &err),
                }
            }
            Err(err) => lsi.error(&label, &err),
        }

        if e.inst.n() + e.inst.d() < 16 {
            let checked = reduce::degeneracy_sequence(&e.inst, caps).and_then(|t| {
                let lift = reduce::verify_lift(&e.inst, &t, caps)?;
                Ok((t, lift))
            });
            match checked {
                Ok((t, lift)) => reduction.record(
                    t.m <= t.log_bound() && t.halving_ok() && t.final_in_original && lift.ok(),
                    || format!("{label}: {t:?} {lift:?}"),
                ),
                Err(err) => reduction.error(&label, &err),
            }
        } else {
            reduction.skipped += 1;
        }

        let run = RunConfig {
            strength: Strength::Relative(BATTERY_B),
            seed: e.seed,
            caps: *caps,
            ..RunConfig::default()
        };
        match shortpath::dichotomy_report(&e.inst, &run, e.mode) {
            Ok(r) => {
                let ok = match &r.branch {
                    DichotomyBranch::Gapped { p_ov, .. } => r.eq_ground >= r.threshold && *p_ov > 0.0,
                    DichotomyBranch::Localized { certificate, .. } => {
                        r.eq_ground < r.threshold && certificate.asserted_ok()
                    }
                };
                dichotomy.record(ok, || format!("{label}: {r:?}"));
            }
            Err(err) => dichotomy.error(&label, &err),
        }

        let run = RunConfig { n_samp: Some(0), ..run };
        match shortpath::hybrid_run::<f64>(&e.inst, &run, e.mode) {
            Ok(r) => hybrid.record(r.verdict == Verdict::Exact && r.verified_ground, || format!("{label}: {r:?}")),
            Err(err) => hybrid.error(&label, &err),
        }
    }

    VerifyReport {
        instances: entries.len(),
        checks: vec![oracle, gap_lemma, gapped, lsi, chain, reduction, dichotomy, hybrid],
    }
}
