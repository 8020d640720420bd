//! Search over product probes for a violation of the inequality, and
//! white-noise threshold scans built on top of it.
//!
//! The search is a stochastic hill climb on the product of unit spheres:
//! every factor of both probe copies is perturbed by complex Gaussian noise
//! of the current step size and renormalized, and the candidate replaces the
//! incumbent only if it strictly increases the left-hand side. Each restart
//! draws from its own generator seeded with `seed ^ restart`, so a parallel
//! schedule reproduces the serial one exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::{CriterionReport, Evaluator, ProductProbe, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::ComplexVec;
use crate::states::{digits, random_product_factors, total_dim, white_noise, DensityMatrix};

/// Hill-climbing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub step_decay: f64,
    pub seed: u64,
    /// A restart stops once its step size falls below this.
    pub convergence_eps: f64,
    /// Verdict threshold applied to the best report.
    pub tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 500,
            step_init: 0.3,
            step_decay: 0.97,
            seed: 0,
            convergence_eps: 1e-10,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::Parameter("restarts and max_iters must be positive".into()));
        }
        if !positive(self.step_init) || !positive(self.convergence_eps) || !positive(self.tolerance)
        {
            return Err(Error::Parameter(
                "step_init, convergence_eps and tolerance must be positive".into(),
            ));
        }
        if !(self.step_decay > 0.0 && self.step_decay < 1.0) {
            return Err(Error::Parameter(format!(
                "step_decay {} outside (0, 1)",
                self.step_decay
            )));
        }
        Ok(())
    }
}

/// Deterministic and random probe shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeStyle {
    /// Copy 1 all `|0⟩`, copy 2 all `|d_m − 1⟩`.
    GhzPair,
    /// Independent random unit factors drawn from a seeded generator.
    Random { seed: u64 },
    /// Computational basis states given by flat indices into `0..D`.
    BasisPair(usize, usize),
}

fn basis_factors(dims: &[usize], index: usize) -> Result<Vec<ComplexVec>> {
    let d = total_dim(dims);
    if index >= d {
        return Err(Error::Parameter(format!("basis index {index} out of range 0..{d}")));
    }
    dims.iter()
        .zip(digits(dims, index))
        .map(|(&dm, a)| ComplexVec::basis(dm, a))
        .collect()
}

pub fn canonical_probe(style: ProbeStyle, dims: &[usize]) -> Result<ProductProbe> {
    if dims.is_empty() || dims.iter().any(|&d| d < 2) {
        return Err(Error::Parameter(format!("invalid site dimensions {dims:?}")));
    }
    match style {
        ProbeStyle::GhzPair => ProductProbe::new(
            basis_factors(dims, 0)?,
            basis_factors(dims, total_dim(dims) - 1)?,
        ),
        ProbeStyle::BasisPair(a, b) => ProductProbe::new(basis_factors(dims, a)?, basis_factors(dims, b)?),
        ProbeStyle::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_probe(dims, &mut rng)
        }
    }
}

fn random_probe<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<ProductProbe> {
    ProductProbe::new(random_product_factors(dims, rng), random_product_factors(dims, rng))
}

fn perturb_factor<R: Rng + ?Sized>(f: &ComplexVec, step: f64, rng: &mut R) -> ComplexVec {
    let moved: Vec<_> = f
        .iter()
        .map(|z| {
            let dre: f64 = rng.sample(StandardNormal);
            let dim: f64 = rng.sample(StandardNormal);
            z + num_complex::Complex64::new(dre * step, dim * step)
        })
        .collect();
    ComplexVec::new(moved)
        .and_then(|v| v.normalized())
        .unwrap_or_else(|_| f.clone())
}

fn perturb<R: Rng + ?Sized>(probe: &ProductProbe, step: f64, rng: &mut R) -> ProductProbe {
    let u = probe.u().iter().map(|f| perturb_factor(f, step, rng)).collect();
    let v = probe.v().iter().map(|f| perturb_factor(f, step, rng)).collect();
    ProductProbe::from_parts_unchecked(u, v)
}

/// Result of one hill-climbing restart.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub index: usize,
    pub probe: ProductProbe,
    pub lhs: f64,
    /// Best-so-far value after the start point and after each iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Runs restart `index` of the schedule in `cfg`. `observe` sees every probe
/// evaluated along the way.
pub fn run_restart(
    evaluator: &Evaluator<'_>,
    cfg: &SearchConfig,
    index: usize,
    observe: &mut dyn FnMut(&ProductProbe, f64),
) -> Result<RestartOutcome> {
    let dims = evaluator.state().dims();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ index as u64);
    let start = match index {
        0 => canonical_probe(ProbeStyle::GhzPair, dims)?,
        1 => canonical_probe(ProbeStyle::BasisPair(0, 0), dims)?,
        _ => random_probe(dims, &mut rng)?,
    };
    let mut best_val = evaluator.lhs(&start)?;
    observe(&start, best_val);
    let mut best = start;
    let mut history = Vec::with_capacity(cfg.max_iters + 1);
    history.push(best_val);
    let mut evaluations = 1;
    let mut step = cfg.step_init;
    for _ in 0..cfg.max_iters {
        if step < cfg.convergence_eps {
            break;
        }
        let candidate = perturb(&best, step, &mut rng);
        let val = evaluator.lhs(&candidate)?;
        evaluations += 1;
        observe(&candidate, val);
        if val > best_val {
            best_val = val;
            best = candidate;
        }
        history.push(best_val);
        step *= cfg.step_decay;
    }
    Ok(RestartOutcome {
        index,
        probe: best,
        lhs: best_val,
        history,
        evaluations,
    })
}

/// Best report together with every restart's outcome.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub report: CriterionReport,
    pub restarts: Vec<RestartOutcome>,
}

impl SearchOutcome {
    pub fn evaluations(&self) -> usize {
        self.restarts.iter().map(|r| r.evaluations).sum()
    }
}

/// Runs all restarts on the current rayon pool and keeps the largest value,
/// ties going to the lowest restart index.
pub fn optimize_probe_detailed(
    rho: &DensityMatrix,
    k: usize,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let evaluator = Evaluator::new(rho, k)?;
    let restarts: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| run_restart(&evaluator, cfg, i, &mut |_, _| {}))
        .collect::<Result<_>>()?;
    let mut best = &restarts[0];
    for r in &restarts[1..] {
        if r.lhs > best.lhs {
            best = r;
        }
    }
    let report = evaluator.report(&best.probe, cfg.tolerance)?;
    Ok(SearchOutcome { report, restarts })
}

/// Report for the best probe found. The value is a lower bound on the
/// supremum over all product probes.
pub fn optimize_probe(rho: &DensityMatrix, k: usize, cfg: &SearchConfig) -> Result<CriterionReport> {
    Ok(optimize_probe_detailed(rho, k, cfg)?.report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPhase {
    Grid,
    Bisection,
    Dense,
}

/// One optimized evaluation during a noise scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub phase: ScanPhase,
    pub p: f64,
    pub lhs: f64,
    pub detected: bool,
}

/// Detection threshold of `p·ρ + (1−p)·I/D`.
///
/// `p_star = 1` with bracket `(1, 1)` means the target is not detected even
/// without noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseScanResult {
    pub p_star: f64,
    pub bracket: (f64, f64),
    pub grid_fallback: bool,
    pub evaluations: usize,
    pub probe_at_threshold: ProductProbe,
    pub trace: Vec<ScanPoint>,
}

/// Points of the coarse grid used to seed bisection.
pub const COARSE_GRID_POINTS: usize = 17;

struct Scanner<'a> {
    target: &'a DensityMatrix,
    k: usize,
    cfg: &'a SearchConfig,
    trace: Vec<ScanPoint>,
}

impl Scanner<'_> {
    fn probe_at(&mut self, p: f64, phase: ScanPhase) -> Result<CriterionReport> {
        let rho = white_noise(self.target, p)?;
        let report = optimize_probe(&rho, self.k, self.cfg)?;
        self.trace.push(ScanPoint {
            phase,
            p,
            lhs: report.lhs,
            detected: report.is_detected(),
        });
        Ok(report)
    }

    fn finish(self, p_star: f64, bracket: (f64, f64), fallback: bool, probe: ProductProbe) -> NoiseScanResult {
        NoiseScanResult {
            p_star,
            bracket,
            grid_fallback: fallback,
            evaluations: self.trace.len(),
            probe_at_threshold: probe,
            trace: self.trace,
        }
    }

    /// Smallest detected point on a uniform grid of spacing at most `resolution`.
    fn dense(&mut self, resolution: f64) -> Result<(f64, (f64, f64), ProductProbe)> {
        // one extra interval keeps the spacing strictly below `resolution`
        let intervals = (1.0 / resolution).ceil() as usize + 1;
        let mut prev = 0.0;
        let mut last = None;
        for i in 0..=intervals {
            let p = i as f64 / intervals as f64;
            let report = self.probe_at(p, ScanPhase::Dense)?;
            if report.is_detected() {
                let lo = if i == 0 { 0.0 } else { prev };
                return Ok((p, (lo, p), report.probe));
            }
            prev = p;
            last = Some(report);
        }
        let probe = last.expect("grid has at least two points").probe;
        Ok((1.0, (1.0, 1.0), probe))
    }
}

fn check_resolution(resolution: f64) -> Result<()> {
    if !(resolution.is_finite() && resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::Parameter(format!("resolution {resolution} outside (0, 1]")));
    }
    Ok(())
}

/// Threshold by bisection from a 17-point coarse grid, falling back to a
/// dense grid if the coarse grid shows non-monotone detection.
pub fn scan_noise(
    target: &DensityMatrix,
    k: usize,
    resolution: f64,
    cfg: &SearchConfig,
) -> Result<NoiseScanResult> {
    check_resolution(resolution)?;
    cfg.validate()?;
    let mut s = Scanner {
        target,
        k,
        cfg,
        trace: Vec::new(),
    };
    let last = (COARSE_GRID_POINTS - 1) as f64;
    let mut grid = Vec::with_capacity(COARSE_GRID_POINTS);
    for i in 0..COARSE_GRID_POINTS {
        let p = i as f64 / last;
        grid.push((p, s.probe_at(p, ScanPhase::Grid)?));
    }
    let detected: Vec<bool> = grid.iter().map(|(_, r)| r.is_detected()).collect();
    if !detected[COARSE_GRID_POINTS - 1] {
        let probe = grid.pop().expect("non-empty grid").1.probe;
        if detected.iter().any(|&d| d) {
            // detected somewhere below p = 1 but not at 1: non-monotone
            let (p, b, probe) = s.dense(resolution)?;
            return Ok(s.finish(p, b, true, probe));
        }
        return Ok(s.finish(1.0, (1.0, 1.0), false, probe));
    }
    let first_hit = detected.iter().position(|&d| d).expect("p = 1 detected");
    if detected[first_hit..].iter().any(|&d| !d) {
        let (p, b, probe) = s.dense(resolution)?;
        return Ok(s.finish(p, b, true, probe));
    }
    if first_hit == 0 {
        let probe = grid.swap_remove(0).1.probe;
        return Ok(s.finish(0.0, (0.0, 0.0), false, probe));
    }
    let mut lo = grid[first_hit - 1].0;
    let mut hi = grid[first_hit].0;
    let mut hi_probe = grid.swap_remove(first_hit).1.probe;
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        let r = s.probe_at(mid, ScanPhase::Bisection)?;
        if r.is_detected() {
            hi = mid;
            hi_probe = r.probe;
        } else {
            lo = mid;
        }
    }
    Ok(s.finish(hi, (lo, hi), false, hi_probe))
}

/// Threshold from the dense grid alone, without bisection.
pub fn scan_noise_dense(
    target: &DensityMatrix,
    k: usize,
    resolution: f64,
    cfg: &SearchConfig,
) -> Result<NoiseScanResult> {
    check_resolution(resolution)?;
    cfg.validate()?;
    let mut s = Scanner {
        target,
        k,
        cfg,
        trace: Vec::new(),
    };
    let (p, b, probe) = s.dense(resolution)?;
    Ok(s.finish(p, b, true, probe))
}
