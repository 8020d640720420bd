//! Evaluation of the k-separability inequality on product probes.
//!
//! For a probe `|Φ⟩ = |φ₁⟩⊗|φ₂⟩` with `|φ₁⟩ = ⊗u_m` and `|φ₂⟩ = ⊗v_m`, every
//! swapped two-copy expectation `⟨Φ|P_s† ρ⊗ρ P_s|Φ⟩` factorizes into
//! `⟨x₁|ρ|x₁⟩·⟨x₂|ρ|x₂⟩`, where `x₁, x₂` are the probe copies with the sites in
//! `s` exchanged. The evaluator therefore never leaves the single-copy space:
//! each factor costs two `D×D` bilinear forms.
//!
//! The value reported as `lhs` is
//!
//! ```text
//! |⟨φ₁|ρ|φ₂⟩| − Σ_α ( Π_{i,j} ⟨Φ|P_{α_ij}† ρ⊗ρ P_{α_ij}|Φ⟩ )^{1/(2k²)}
//! ```
//!
//! and a strictly positive value (beyond the tolerance) certifies that `ρ` is
//! not k-separable.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{kron_all, ComplexVec, GramFactor};
use crate::partitions::{kpartitions, swap_sets, KPartition, SiteSet, SwapSet, SwapTerm};
use crate::states::DensityMatrix;

/// Default one-sided verdict threshold.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Pivot threshold of the factor `ρ ≈ L L†` behind every matrix element
/// below. Diagonal elements are computed as `‖L† x‖²`, which keeps them
/// non-negative and accurate near zero, where the `1/(2k²)` root would
/// otherwise amplify rounding error.
pub const FACTOR_TOL: f64 = 1e-15;

/// A fully separable two-copy probe `(⊗u_m) ⊗ (⊗v_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProbe")]
pub struct ProductProbe {
    u: Vec<ComplexVec>,
    v: Vec<ComplexVec>,
}

#[derive(Deserialize)]
struct RawProbe {
    u: Vec<ComplexVec>,
    v: Vec<ComplexVec>,
}

impl TryFrom<RawProbe> for ProductProbe {
    type Error = Error;

    fn try_from(raw: RawProbe) -> Result<Self> {
        ProductProbe::new(raw.u, raw.v)
    }
}

impl ProductProbe {
    pub fn new(u: Vec<ComplexVec>, v: Vec<ComplexVec>) -> Result<Self> {
        if u.is_empty() || u.len() != v.len() {
            return Err(Error::Dimension(format!(
                "probe copies have {} and {} sites",
                u.len(),
                v.len()
            )));
        }
        for (m, (a, b)) in u.iter().zip(&v).enumerate() {
            if a.dim() != b.dim() {
                return Err(Error::Dimension(format!(
                    "site {m}: copy dimensions {} and {}",
                    a.dim(),
                    b.dim()
                )));
            }
            for x in [a, b] {
                if !x.is_normalized() {
                    return Err(Error::Normalization(format!(
                        "site {m} factor has norm {}",
                        x.norm()
                    )));
                }
            }
        }
        Ok(Self { u, v })
    }

    pub fn u(&self) -> &[ComplexVec] {
        &self.u
    }

    pub fn v(&self) -> &[ComplexVec] {
        &self.v
    }

    pub fn n_sites(&self) -> usize {
        self.u.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.u.iter().map(ComplexVec::dim).collect()
    }

    /// The probe with the two copies exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            u: self.v.clone(),
            v: self.u.clone(),
        }
    }

    /// `|φ₁⟩ = ⊗u_m`.
    pub fn phi1(&self) -> ComplexVec {
        kron_all(&self.u)
    }

    /// `|φ₂⟩ = ⊗v_m`.
    pub fn phi2(&self) -> ComplexVec {
        kron_all(&self.v)
    }

    pub(crate) fn from_parts_unchecked(u: Vec<ComplexVec>, v: Vec<ComplexVec>) -> Self {
        Self { u, v }
    }

    fn check_against(&self, rho: &DensityMatrix) -> Result<()> {
        if self.dims() != rho.dims() {
            return Err(Error::Dimension(format!(
                "probe dims {:?} do not match state dims {:?}",
                self.dims(),
                rho.dims()
            )));
        }
        Ok(())
    }

    fn swapped_copies(&self, s: SwapSet) -> (Vec<&ComplexVec>, Vec<&ComplexVec>) {
        self.u
            .iter()
            .zip(&self.v)
            .enumerate()
            .map(|(m, (a, b))| if s.contains(m) { (b, a) } else { (a, b) })
            .unzip()
    }
}

/// Exchanges the factors at the sites in `s` between the two probe copies.
pub fn apply_swap(probe: &ProductProbe, s: SwapSet) -> (Vec<ComplexVec>, Vec<ComplexVec>) {
    let (x1, x2) = probe.swapped_copies(s);
    (
        x1.into_iter().cloned().collect(),
        x2.into_iter().cloned().collect(),
    )
}

fn factor(rho: &DensityMatrix) -> GramFactor {
    GramFactor::new(rho.matrix(), FACTOR_TOL).expect("density matrices are square")
}

/// `⟨x|ρ|x⟩` for a product vector.
fn diagonal(g: &GramFactor, factors: &[&ComplexVec]) -> f64 {
    g.quadratic(&kron_all(factors.iter().copied()))
}

/// The pair `(⟨x₁|ρ|x₁⟩, ⟨x₂|ρ|x₂⟩)` for the probe swapped on `s`.
pub fn swapped_diagonals(rho: &DensityMatrix, probe: &ProductProbe, s: SwapSet) -> Result<(f64, f64)> {
    probe.check_against(rho)?;
    if !s.within(probe.n_sites()) {
        return Err(Error::Parameter(format!("swap set {s} exceeds {} sites", probe.n_sites())));
    }
    let g = factor(rho);
    let (x1, x2) = probe.swapped_copies(s);
    Ok((diagonal(&g, &x1), diagonal(&g, &x2)))
}

/// `|⟨φ₁|ρ|φ₂⟩|`, the square root of `⟨Φ|ρ⊗ρ P_tot|Φ⟩`.
pub fn first_term(rho: &DensityMatrix, probe: &ProductProbe) -> Result<f64> {
    probe.check_against(rho)?;
    Ok(first_term_unchecked(&factor(rho), probe))
}

fn first_term_unchecked(g: &GramFactor, probe: &ProductProbe) -> f64 {
    g.bilinear(&probe.phi1(), &probe.phi2()).norm()
}

/// Combines merged swap factors into `(Π_s (a_s b_s)^{m_s})^{1/(2k²)}`.
///
/// A zero factor short-circuits to 0. Each factor is rooted separately so
/// the running product cannot underflow for large `k`.
fn combine(k: usize, factors: impl IntoIterator<Item = (f64, f64, u32)>) -> f64 {
    let root = 1.0 / (2 * k * k) as f64;
    let mut acc = 1.0;
    for (a, b, m) in factors {
        if a == 0.0 || b == 0.0 {
            return 0.0;
        }
        let e = m as f64 * root;
        acc *= a.powf(e) * b.powf(e);
    }
    acc
}

/// The summand for partition `alpha`.
pub fn partition_term(rho: &DensityMatrix, probe: &ProductProbe, alpha: &KPartition) -> Result<f64> {
    probe.check_against(rho)?;
    if alpha.n() != probe.n_sites() {
        return Err(Error::Dimension(format!(
            "partition of {} sites for a {}-site probe",
            alpha.n(),
            probe.n_sites()
        )));
    }
    let g = factor(rho);
    let mut factors = Vec::new();
    for t in swap_sets(alpha) {
        let (x1, x2) = probe.swapped_copies(t.set);
        let a = diagonal(&g, &x1);
        if a == 0.0 {
            return Ok(0.0);
        }
        let b = diagonal(&g, &x2);
        if b == 0.0 {
            return Ok(0.0);
        }
        factors.push((a, b, t.multiplicity));
    }
    Ok(combine(alpha.k(), factors))
}

/// Outcome of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotKSeparable,
    Inconclusive,
}

/// Value of the inequality for one `(ρ, probe, k)` and its decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub k: usize,
    pub lhs: f64,
    pub first_term: f64,
    pub partition_terms: Vec<(KPartition, f64)>,
    pub probe: ProductProbe,
    pub verdict: Verdict,
    pub tolerance: f64,
}

impl CriterionReport {
    pub fn is_detected(&self) -> bool {
        self.verdict == Verdict::NotKSeparable
    }
}

#[derive(Serialize)]
struct TermJson {
    partition: String,
    value: f64,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    k: usize,
    lhs: f64,
    first_term: f64,
    terms: Vec<TermJson>,
    verdict: Verdict,
    tolerance: f64,
    probe: &'a ProductProbe,
}

impl Serialize for CriterionReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ReportJson {
            k: self.k,
            lhs: self.lhs,
            first_term: self.first_term,
            terms: self
                .partition_terms
                .iter()
                .map(|(p, v)| TermJson {
                    partition: p.to_string(),
                    value: *v,
                })
                .collect(),
            verdict: self.verdict,
            tolerance: self.tolerance,
            probe: &self.probe,
        }
        .serialize(serializer)
    }
}

/// Partitions of `n` sites into `k` blocks together with their deduplicated
/// swap sets, so that each distinct set is evaluated once per probe.
#[derive(Debug, Clone)]
pub struct CriterionPlan {
    n: usize,
    k: usize,
    partitions: Vec<KPartition>,
    sets: Vec<SwapSet>,
    // per partition: (index into `sets`, multiplicity)
    factors: Vec<Vec<(usize, u32)>>,
    // `x₁` of set `s` is `x₂` of its complement, so each diagonal is keyed
    // by the sites carrying `v`
    masks: Vec<SwapSet>,
    // per set: indices into `masks` of (s, complement of s)
    pairs: Vec<(usize, usize)>,
}

impl CriterionPlan {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        let mut sets = Vec::new();
        let mut index: HashMap<SwapSet, usize> = HashMap::new();
        let mut partitions = Vec::new();
        let mut factors = Vec::new();
        for alpha in kpartitions(n, k)? {
            let row = swap_sets(&alpha)
                .into_iter()
                .map(|SwapTerm { set, multiplicity, .. }| {
                    let idx = *index.entry(set).or_insert_with(|| {
                        sets.push(set);
                        sets.len() - 1
                    });
                    (idx, multiplicity)
                })
                .collect();
            partitions.push(alpha);
            factors.push(row);
        }
        let full = SiteSet::full(n).bits();
        let mut masks = Vec::new();
        let mut mask_index: HashMap<SwapSet, usize> = HashMap::new();
        let mut slot = |m: SwapSet| {
            *mask_index.entry(m).or_insert_with(|| {
                masks.push(m);
                masks.len() - 1
            })
        };
        let pairs = sets
            .iter()
            .map(|s| (slot(*s), slot(SiteSet::from_bits(full ^ s.bits()))))
            .collect();
        Ok(Self {
            n,
            k,
            partitions,
            sets,
            factors,
            masks,
            pairs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn partitions(&self) -> &[KPartition] {
        &self.partitions
    }

    /// Number of distinct swap sets across all partitions.
    pub fn distinct_sets(&self) -> usize {
        self.sets.len()
    }
}

/// Reusable evaluator for a fixed state and `k`.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    rho: &'a DensityMatrix,
    factor: GramFactor,
    plan: CriterionPlan,
}

impl<'a> Evaluator<'a> {
    pub fn new(rho: &'a DensityMatrix, k: usize) -> Result<Self> {
        let n = rho.n_sites();
        if k == 0 || k > n {
            return Err(Error::Parameter(format!("k = {k} outside 1..={n}")));
        }
        Ok(Self {
            rho,
            factor: factor(rho),
            plan: CriterionPlan::new(n, k)?,
        })
    }

    pub fn state(&self) -> &DensityMatrix {
        self.rho
    }

    pub fn plan(&self) -> &CriterionPlan {
        &self.plan
    }

    fn mask_diagonal(&self, probe: &ProductProbe, m: SwapSet) -> f64 {
        diagonal(&self.factor, &probe.swapped_copies(m).0)
    }

    fn term(&self, diags: &[(f64, f64)], row: &[(usize, u32)]) -> f64 {
        combine(
            self.plan.k,
            row.iter().map(|&(idx, m)| (diags[idx].0, diags[idx].1, m)),
        )
    }

    fn terms(&self, probe: &ProductProbe, parallel: bool) -> Result<(f64, Vec<f64>)> {
        probe.check_against(self.rho)?;
        let first = first_term_unchecked(&self.factor, probe);
        let values: Vec<f64> = if parallel {
            self.plan
                .masks
                .par_iter()
                .map(|&m| self.mask_diagonal(probe, m))
                .collect()
        } else {
            self.plan
                .masks
                .iter()
                .map(|&m| self.mask_diagonal(probe, m))
                .collect()
        };
        let diags: Vec<(f64, f64)> = self
            .plan
            .pairs
            .iter()
            .map(|&(a, b)| (values[a], values[b]))
            .collect();
        let terms: Vec<f64> = if parallel {
            self.plan
                .factors
                .par_iter()
                .map(|row| self.term(&diags, row))
                .collect()
        } else {
            self.plan
                .factors
                .iter()
                .map(|row| self.term(&diags, row))
                .collect()
        };
        Ok((first, terms))
    }

    /// Left-hand side only; same arithmetic and summation order as
    /// [`Evaluator::report`].
    pub fn lhs(&self, probe: &ProductProbe) -> Result<f64> {
        let (first, terms) = self.terms(probe, false)?;
        Ok(reduce(first, &terms))
    }

    pub fn report(&self, probe: &ProductProbe, tolerance: f64) -> Result<CriterionReport> {
        self.build_report(probe, tolerance, false)
    }

    pub fn report_parallel(&self, probe: &ProductProbe, tolerance: f64) -> Result<CriterionReport> {
        self.build_report(probe, tolerance, true)
    }

    fn build_report(
        &self,
        probe: &ProductProbe,
        tolerance: f64,
        parallel: bool,
    ) -> Result<CriterionReport> {
        let (first, terms) = self.terms(probe, parallel)?;
        let lhs = reduce(first, &terms);
        Ok(CriterionReport {
            k: self.plan.k,
            lhs,
            first_term: first,
            partition_terms: self.plan.partitions.iter().cloned().zip(terms).collect(),
            probe: probe.clone(),
            verdict: verdict(lhs, tolerance),
            tolerance,
        })
    }
}

// sequential sum in enumeration order keeps serial and parallel paths identical
fn reduce(first: f64, terms: &[f64]) -> f64 {
    let mut sum = 0.0;
    for t in terms {
        sum += t;
    }
    first - sum
}

pub fn verdict(lhs: f64, tolerance: f64) -> Verdict {
    if lhs > tolerance {
        Verdict::NotKSeparable
    } else {
        Verdict::Inconclusive
    }
}

/// Evaluates the inequality for `(rho, probe, k)`.
pub fn evaluate(
    rho: &DensityMatrix,
    probe: &ProductProbe,
    k: usize,
    tolerance: f64,
) -> Result<CriterionReport> {
    Evaluator::new(rho, k)?.report(probe, tolerance)
}

/// As [`evaluate`], with swap factors and partition terms computed on the
/// rayon pool. The result is bit-identical to the serial path.
pub fn evaluate_parallel(
    rho: &DensityMatrix,
    probe: &ProductProbe,
    k: usize,
    tolerance: f64,
) -> Result<CriterionReport> {
    Evaluator::new(rho, k)?.report_parallel(probe, tolerance)
}

/// Unit complex number `e^{iθ}`.
pub fn phase(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}
