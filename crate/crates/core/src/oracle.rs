//! Brute-force two-copy reference for the criterion.
//!
//! Works on the literal `D²`-dimensional two-copy space: the probe is
//! materialized as a vector, swap operators are explicit index permutations
//! and `⟨ψ|ρ⊗ρ|χ⟩` is contracted over the full two-copy vectors. Nothing here
//! relies on the product structure the fast path exploits, which is what
//! makes it a useful cross-check. Only small systems are accepted.

use num_complex::Complex64;

use crate::criterion::{verdict, CriterionReport, ProductProbe};
use crate::error::{Error, Result};
use crate::linalg::ComplexMat;
use crate::partitions::{enumerate_kpartitions, KPartition, SiteSet, SwapSet};
use crate::states::{digits, flat_index, total_dim, DensityMatrix};

/// Largest two-copy dimension `D²` the oracle accepts.
pub const ORACLE_GUARD: usize = 4096;

const IMAG_TOL: f64 = 1e-12;

/// A permutation of two-copy basis labels `a·D + b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoCopyOperator {
    map: Vec<usize>,
}

impl TwoCopyOperator {
    pub fn dim(&self) -> usize {
        self.map.len()
    }

    pub fn image(&self, label: usize) -> usize {
        self.map[label]
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.map.len()];
        for &t in &self.map {
            if t >= seen.len() || std::mem::replace(&mut seen[t], true) {
                return false;
            }
        }
        true
    }

    pub fn is_involution(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &t)| self.map[t] == i)
    }

    /// `P|ψ⟩`, i.e. `(Pψ)[π(l)] = ψ[l]`.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for (l, &t) in self.map.iter().enumerate() {
            out[t] = psi[l];
        }
        out
    }
}

fn guard(dims: &[usize]) -> Result<usize> {
    let d = total_dim(dims);
    match d.checked_mul(d) {
        Some(d2) if d2 <= ORACLE_GUARD => Ok(d),
        _ => Err(Error::Guard(format!(
            "two-copy dimension {d}² exceeds the oracle limit {ORACLE_GUARD}"
        ))),
    }
}

/// Index map exchanging copy-1 and copy-2 digits at every site in `s`.
pub fn build_swap_operator(dims: &[usize], s: SwapSet) -> Result<TwoCopyOperator> {
    let d = guard(dims)?;
    if !s.within(dims.len()) {
        return Err(Error::Parameter(format!("swap set {s} exceeds {} sites", dims.len())));
    }
    let mut map = Vec::with_capacity(d * d);
    for label in 0..d * d {
        let mut a = digits(dims, label / d);
        let mut b = digits(dims, label % d);
        for m in s.iter() {
            std::mem::swap(&mut a[m], &mut b[m]);
        }
        map.push(flat_index(dims, &a) * d + flat_index(dims, &b));
    }
    Ok(TwoCopyOperator { map })
}

/// `(⊗u) ⊗ (⊗v)` as a flat `D²` vector, built entry by entry from digits.
fn two_copy_probe(probe: &ProductProbe) -> Vec<Complex64> {
    let dims = probe.dims();
    let d = total_dim(&dims);
    let amp = |factors: &[crate::linalg::ComplexVec], idx: usize| -> Complex64 {
        digits(&dims, idx)
            .iter()
            .zip(factors)
            .map(|(&a, f)| f[a])
            .product()
    };
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        let ua = amp(probe.u(), a);
        for b in 0..d {
            out.push(ua * amp(probe.v(), b));
        }
    }
    out
}

/// `⟨ψ| ρ⊗ρ |χ⟩` with both vectors reshaped to `D×D` (row = copy 1):
/// `Σ conj(ψ_ab) ρ_ac ρ_bd χ_cd = tr(Ψ† ρ X ρᵀ)`.
fn two_copy_expectation(rho: &ComplexMat, psi: &[Complex64], chi: &[Complex64]) -> Complex64 {
    let d = rho.rows();
    // t = ρ · X, X[c][d] = chi[c·D + d]
    let mut t = vec![Complex64::new(0.0, 0.0); d * d];
    for a in 0..d {
        for c in 0..d {
            let r = rho.get(a, c);
            for e in 0..d {
                t[a * d + e] += r * chi[c * d + e];
            }
        }
    }
    // Σ_ab conj(ψ_ab) Σ_e t[a][e] ρ_be
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            let mut s = Complex64::new(0.0, 0.0);
            for e in 0..d {
                s += t[a * d + e] * rho.get(b, e);
            }
            acc += psi[a * d + b].conj() * s;
        }
    }
    acc
}

fn check_inputs(rho: &DensityMatrix, probe: &ProductProbe) -> Result<()> {
    guard(rho.dims())?;
    if probe.dims() != rho.dims() {
        return Err(Error::Dimension(format!(
            "probe dims {:?} do not match state dims {:?}",
            probe.dims(),
            rho.dims()
        )));
    }
    Ok(())
}

fn real_part(z: Complex64, what: &str) -> Result<f64> {
    if z.im.abs() >= IMAG_TOL {
        return Err(Error::Numerical(format!(
            "{what} has imaginary part {:.3e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// `⟨P_sΦ| ρ⊗ρ |P_sΦ⟩` on the explicit two-copy vector.
pub fn oracle_term(rho: &DensityMatrix, probe: &ProductProbe, s: SwapSet) -> Result<f64> {
    check_inputs(rho, probe)?;
    let op = build_swap_operator(rho.dims(), s)?;
    let swapped = op.apply(&two_copy_probe(probe));
    real_part(
        two_copy_expectation(rho.matrix(), &swapped, &swapped),
        "swapped two-copy expectation",
    )
}

/// `⟨Φ| ρ⊗ρ P_tot |Φ⟩`, which should equal `|⟨φ₁|ρ|φ₂⟩|²`.
pub fn oracle_total_swap(rho: &DensityMatrix, probe: &ProductProbe) -> Result<f64> {
    check_inputs(rho, probe)?;
    let op = build_swap_operator(rho.dims(), SiteSet::full(rho.n_sites()))?;
    let phi = two_copy_probe(probe);
    real_part(
        two_copy_expectation(rho.matrix(), &phi, &op.apply(&phi)),
        "total-swap expectation",
    )
}

/// Partition summand computed as the plain double product over all `k²`
/// ordered block pairs, without merging repeated swap sets.
pub fn oracle_partition_term(
    rho: &DensityMatrix,
    probe: &ProductProbe,
    alpha: &KPartition,
) -> Result<f64> {
    let blocks = alpha.blocks();
    let k = blocks.len();
    let mut product = 1.0;
    for bi in &blocks {
        for bj in &blocks {
            product *= oracle_term(rho, probe, bi.union(*bj))?.max(0.0);
        }
    }
    Ok(product.powf(1.0 / (2 * k * k) as f64))
}

/// Full report computed through explicit operators.
pub fn oracle_evaluate(
    rho: &DensityMatrix,
    probe: &ProductProbe,
    k: usize,
    tolerance: f64,
) -> Result<CriterionReport> {
    check_inputs(rho, probe)?;
    let first = oracle_total_swap(rho, probe)?.max(0.0).sqrt();
    let mut terms = Vec::new();
    let mut sum = 0.0;
    for alpha in enumerate_kpartitions(rho.n_sites(), k)? {
        let t = oracle_partition_term(rho, probe, &alpha)?;
        sum += t;
        terms.push((alpha, t));
    }
    let lhs = first - sum;
    Ok(CriterionReport {
        k,
        lhs,
        first_term: first,
        partition_terms: terms,
        probe: probe.clone(),
        verdict: verdict(lhs, tolerance),
        tolerance,
    })
}
