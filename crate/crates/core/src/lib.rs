//! Numerical engine for the k-separability criterion on multipartite
//! density matrices.
//!
//! For every k-separable state `ρ` and every fully separable two-copy probe
//! `|Φ⟩ = |φ₁⟩⊗|φ₂⟩`,
//!
//! ```text
//! √⟨Φ|ρ⊗ρ P_tot|Φ⟩ − Σ_α ( Π_{i,j=1..k} ⟨Φ|P_{α_ij}† ρ⊗ρ P_{α_ij}|Φ⟩ )^{1/(2k²)} ≤ 0,
//! ```
//!
//! where `α` runs over all partitions of the sites into `k` blocks and
//! `P_{α_ij}` exchanges the two copies on `block_i ∪ block_j`. A probe that
//! makes the left-hand side positive certifies that `ρ` is not k-separable;
//! for `k = 2` that is genuine multipartite entanglement.
//!
//! * [`criterion`] evaluates the inequality in the single-copy space.
//! * [`oracle`] recomputes it with explicit two-copy operators.
//! * [`search`] looks for violating probes and scans white-noise thresholds.

pub mod criterion;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod partitions;
pub mod search;
pub mod states;

pub use criterion::{
    apply_swap, evaluate, evaluate_parallel, first_term, partition_term, CriterionReport,
    Evaluator, ProductProbe, Verdict, DEFAULT_TOLERANCE,
};
pub use error::{Error, Result};
pub use linalg::{bilinear, check_density, kron, ComplexMat, ComplexVec, DensityDiagnostics};
pub use oracle::{build_swap_operator, oracle_evaluate, oracle_term, TwoCopyOperator};
pub use partitions::{enumerate_kpartitions, kpartitions, swap_sets, stirling2, KPartition, SiteSet, SwapSet};
pub use search::{
    canonical_probe, optimize_probe, scan_noise, scan_noise_dense, NoiseScanResult, ProbeStyle,
    SearchConfig,
};
pub use states::{
    ghz, load_state, mix, product_pure, save_state, w_state, white_noise, DensityMatrix, PureState,
};
