//! Multipartite states with explicit site structure.
//!
//! Flat indices are big-endian in the sites: site 0 is the most significant
//! digit, so `|a₀ a₁ … a_{n−1}⟩` sits at `Σ a_m · Π_{m' > m} d_{m'}`.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_density, kron_all, ComplexMat, ComplexVec, DENSITY_TOL};

/// Tolerance on `Σ weights − 1` in [`mix`].
pub const WEIGHT_TOL: f64 = 1e-12;

fn validate_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::Parameter("at least one site required".into()));
    }
    if let Some(d) = dims.iter().find(|&&d| d < 2) {
        return Err(Error::Parameter(format!("site dimension {d} < 2")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Parameter("total dimension overflows".into()))
}

/// Product of the per-site dimensions.
pub fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Per-site digits of a flat index, site 0 first.
pub fn digits(dims: &[usize], mut index: usize) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

/// Flat index of per-site digits, site 0 most significant.
pub fn flat_index(dims: &[usize], digits: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&a, &d)| acc * d + a)
}

/// A normalized state vector on `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    vec: ComplexVec,
}

impl PureState {
    pub fn new(dims: Vec<usize>, vec: ComplexVec) -> Result<Self> {
        let d = validate_dims(&dims)?;
        if vec.dim() != d {
            return Err(Error::Dimension(format!(
                "vector of length {} for dims {dims:?}",
                vec.dim()
            )));
        }
        if !vec.is_normalized() {
            return Err(Error::Normalization(format!(
                "state norm {} differs from 1",
                vec.norm()
            )));
        }
        Ok(Self { dims, vec })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn vector(&self) -> &ComplexVec {
        &self.vec
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.vec[index]
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            dims: self.dims.clone(),
            mat: ComplexMat::outer(&self.vec),
        }
    }
}

/// A validated density operator on `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    mat: ComplexMat,
}

impl DensityMatrix {
    /// Validates with the default tolerance.
    pub fn new(dims: Vec<usize>, mat: ComplexMat) -> Result<Self> {
        Self::with_tolerance(dims, mat, DENSITY_TOL)
    }

    pub fn with_tolerance(dims: Vec<usize>, mat: ComplexMat, tol: f64) -> Result<Self> {
        let d = validate_dims(&dims)?;
        if mat.rows() != d || mat.cols() != d {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for dims {dims:?} (expected {d}x{d})",
                mat.rows(),
                mat.cols()
            )));
        }
        let diag = check_density(&mat, tol);
        if !diag.accepted {
            return Err(Error::StateValidation(diag));
        }
        Ok(Self { dims, mat })
    }

    /// `I / D`.
    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let d = validate_dims(&dims)?;
        Ok(Self {
            dims,
            mat: ComplexMat::identity(d).scale(1.0 / d as f64),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMat {
        &self.mat
    }
}

impl From<&PureState> for DensityMatrix {
    fn from(psi: &PureState) -> Self {
        psi.density()
    }
}

fn unit(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// `(1/√d) Σ_j |j…j⟩` on `n` sites of dimension `d`.
pub fn ghz(n: usize, d: usize) -> Result<PureState> {
    if n < 2 || d < 2 {
        return Err(Error::Parameter(format!("ghz needs n ≥ 2 and d ≥ 2, got n={n}, d={d}")));
    }
    let dims = vec![d; n];
    let total = validate_dims(&dims)?;
    let mut amps = vec![unit(0.0); total];
    let a = unit(1.0 / (d as f64).sqrt());
    for j in 0..d {
        amps[flat_index(&dims, &vec![j; n])] = a;
    }
    PureState::new(dims, ComplexVec::new(amps)?)
}

/// `(1/√n) Σ_m |0…1_m…0⟩` on `n` qubits.
pub fn w_state(n: usize) -> Result<PureState> {
    if n < 2 {
        return Err(Error::Parameter(format!("w state needs n ≥ 2, got {n}")));
    }
    let dims = vec![2; n];
    let total = validate_dims(&dims)?;
    let mut amps = vec![unit(0.0); total];
    let a = unit(1.0 / (n as f64).sqrt());
    for m in 0..n {
        amps[1 << (n - 1 - m)] = a;
    }
    PureState::new(dims, ComplexVec::new(amps)?)
}

/// Kronecker product of unit-norm site vectors.
pub fn product_pure(site_vecs: &[ComplexVec]) -> Result<PureState> {
    for (m, v) in site_vecs.iter().enumerate() {
        if !v.is_normalized() {
            return Err(Error::Normalization(format!("site {m} has norm {}", v.norm())));
        }
    }
    let dims: Vec<usize> = site_vecs.iter().map(ComplexVec::dim).collect();
    validate_dims(&dims)?;
    PureState::new(dims, kron_all(site_vecs))
}

/// Convex combination `Σ w_i ρ_i`.
pub fn mix(states: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
    let (_, first) = states
        .first()
        .ok_or_else(|| Error::Weight("empty mixture".into()))?;
    let mut total = 0.0;
    for (w, rho) in states {
        if !(w.is_finite() && *w >= 0.0) {
            return Err(Error::Weight(format!("weight {w} is negative or non-finite")));
        }
        if rho.dims != first.dims {
            return Err(Error::Dimension(format!(
                "mixing dims {:?} with {:?}",
                rho.dims, first.dims
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::Weight(format!("weights sum to {total}")));
    }
    let d = first.dim();
    let mut mat = ComplexMat::zeros(d, d);
    for (w, rho) in states {
        mat.add_scaled(&rho.mat, *w)?;
    }
    Ok(DensityMatrix {
        dims: first.dims.clone(),
        mat,
    })
}

/// `p·target + (1−p)·I/D`.
pub fn white_noise(target: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("noise parameter {p} outside [0, 1]")));
    }
    let d = target.dim();
    let mut mat = target.mat.scale(p);
    mat.add_scaled(&ComplexMat::identity(d), (1.0 - p) / d as f64)?;
    Ok(DensityMatrix {
        dims: target.dims.clone(),
        mat,
    })
}

/// Unit vector of i.i.d. standard complex Gaussians.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexVec {
    loop {
        let raw: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(v) = ComplexVec::new(raw).and_then(|v| v.normalized()) {
            return v;
        }
    }
}

pub fn random_pure<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<PureState> {
    let d = validate_dims(dims)?;
    PureState::new(dims.to_vec(), random_unit_vector(d, rng))
}

/// Random unit vectors, one per site.
pub fn random_product_factors<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Vec<ComplexVec> {
    dims.iter().map(|&d| random_unit_vector(d, rng)).collect()
}

pub fn random_product_pure<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<PureState> {
    product_pure(&random_product_factors(dims, rng))
}

/// Random mixture of `rank` Haar-like pure states with random weights.
pub fn random_density<R: Rng + ?Sized>(
    dims: &[usize],
    rank: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let pures = (0..rank.max(1))
        .map(|_| random_pure(dims, rng).map(|p| p.density()))
        .collect::<Result<Vec<_>>>()?;
    random_mixture(&pures, rng)
}

/// Random mixture of `terms` fully separable pure states.
pub fn random_separable<R: Rng + ?Sized>(
    dims: &[usize],
    terms: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let pures = (0..terms.max(1))
        .map(|_| random_product_pure(dims, rng).map(|p| p.density()))
        .collect::<Result<Vec<_>>>()?;
    random_mixture(&pures, rng)
}

fn random_mixture<R: Rng + ?Sized>(states: &[DensityMatrix], rng: &mut R) -> Result<DensityMatrix> {
    let raw: Vec<f64> = states.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // absorb the rounding residue so the weights sum to 1 within WEIGHT_TOL
    let residue = 1.0 - weights.iter().sum::<f64>();
    weights[0] += residue;
    let pairs: Vec<(f64, &DensityMatrix)> = weights.into_iter().zip(states).collect();
    mix(&pairs)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<ComplexVec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vector: Option<ComplexVec>,
}

fn format_err(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Format {
        context: context.into(),
        message: message.into(),
    }
}

/// Parses the JSON state format (matrix or pure-vector variant).
pub fn parse_state(text: &str) -> Result<DensityMatrix> {
    let file: StateFile = serde_json::from_str(text).map_err(|e| {
        format_err(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    let d = validate_dims(&file.dims)
        .map_err(|e| format_err("field `dims`", e.to_string()))?;
    match (file.matrix, file.vector) {
        (Some(rows), None) => {
            if rows.len() != d {
                return Err(format_err(
                    "field `matrix`",
                    format!("{} rows for dims {:?} (expected {d})", rows.len(), file.dims),
                ));
            }
            let mut data = Vec::with_capacity(d * d);
            for (r, row) in rows.into_iter().enumerate() {
                if row.dim() != d {
                    return Err(format_err(
                        format!("field `matrix` row {r}"),
                        format!("{} entries (expected {d})", row.dim()),
                    ));
                }
                data.extend(row.into_inner());
            }
            DensityMatrix::new(file.dims, ComplexMat::new(d, d, data)?)
        }
        (None, Some(vec)) => {
            if vec.dim() != d {
                return Err(format_err(
                    "field `vector`",
                    format!("{} entries for dims {:?} (expected {d})", vec.dim(), file.dims),
                ));
            }
            Ok(PureState::new(file.dims, vec)?.density())
        }
        _ => Err(format_err(
            "top level",
            "exactly one of `matrix` or `vector` must be present",
        )),
    }
}

pub fn load_state(path: impl AsRef<Path>) -> Result<DensityMatrix> {
    parse_state(&fs::read_to_string(path)?)
}

/// JSON text of `rho` in the matrix variant.
pub fn state_to_json(rho: &DensityMatrix) -> String {
    let d = rho.dim();
    let matrix = (0..d)
        .map(|i| ComplexVec::new(rho.mat.row(i).to_vec()).expect("rows of a valid matrix"))
        .collect();
    let file = StateFile {
        dims: rho.dims.clone(),
        matrix: Some(matrix),
        vector: None,
    };
    serde_json::to_string(&file).expect("state serialization")
}

pub fn pure_state_to_json(psi: &PureState) -> String {
    let file = StateFile {
        dims: psi.dims.clone(),
        matrix: None,
        vector: Some(psi.vec.clone()),
    };
    serde_json::to_string(&file).expect("state serialization")
}

pub fn save_state(rho: &DensityMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, state_to_json(rho))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nonzero(psi: &PureState) -> Vec<(usize, f64)> {
        psi.vector()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 0.0)
            .map(|(i, a)| {
                assert_eq!(a.im, 0.0);
                (i, a.re)
            })
            .collect()
    }

    #[test]
    fn ghz_amplitudes() {
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(nonzero(&ghz(3, 2).unwrap()), vec![(0, h), (7, h)]);
        assert_eq!(nonzero(&ghz(2, 2).unwrap()), vec![(0, h), (3, h)]);
        let t = 1.0 / 3f64.sqrt();
        assert_eq!(nonzero(&ghz(2, 3).unwrap()), vec![(0, t), (4, t), (8, t)]);
    }

    #[test]
    fn ghz_parameter_errors() {
        assert!(matches!(ghz(1, 2), Err(Error::Parameter(_))));
        assert!(matches!(ghz(3, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn w_amplitudes() {
        let h = 1.0 / 2f64.sqrt();
        let t = 1.0 / 3f64.sqrt();
        assert_eq!(nonzero(&w_state(2).unwrap()), vec![(1, h), (2, h)]);
        assert_eq!(nonzero(&w_state(3).unwrap()), vec![(1, t), (2, t), (4, t)]);
        assert_eq!(
            nonzero(&w_state(4).unwrap()),
            vec![(1, 0.5), (2, 0.5), (4, 0.5), (8, 0.5)]
        );
        assert!(matches!(w_state(1), Err(Error::Parameter(_))));
    }

    #[test]
    fn big_endian_site_order() {
        let e0 = ComplexVec::basis(2, 0).unwrap();
        let e1 = ComplexVec::basis(2, 1).unwrap();
        let psi = product_pure(&[e0.clone(), e1, e0]).unwrap();
        assert_eq!(nonzero(&psi), vec![(2, 1.0)]);
        assert_eq!(digits(&[2, 3, 2], 7), vec![1, 0, 1]);
        assert_eq!(flat_index(&[2, 3, 2], &[1, 0, 1]), 7);
    }

    #[test]
    fn product_pure_examples() {
        let e0 = ComplexVec::basis(2, 0).unwrap();
        assert_eq!(nonzero(&product_pure(&[e0.clone(), e0]).unwrap()), vec![(0, 1.0)]);
        let plus = ComplexVec::from_real(&[1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()]).unwrap();
        let psi = product_pure(&[plus.clone(), plus]).unwrap();
        for a in psi.vector().iter() {
            assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn product_pure_rejects_unnormalized() {
        let bad = ComplexVec::from_real(&[1.0, 1.0]).unwrap();
        assert!(matches!(product_pure(&[bad]), Err(Error::Normalization(_))));
    }

    #[test]
    fn mix_examples() {
        let e0 = product_pure(&[ComplexVec::basis(2, 0).unwrap()]).unwrap().density();
        let e1 = product_pure(&[ComplexVec::basis(2, 1).unwrap()]).unwrap().density();
        assert_eq!(mix(&[(1.0, &e0)]).unwrap(), e0);
        let m = mix(&[(0.5, &e0), (0.5, &e1)]).unwrap();
        assert_eq!(m, DensityMatrix::maximally_mixed(vec![2]).unwrap());
    }

    #[test]
    fn mix_errors() {
        let a = DensityMatrix::maximally_mixed(vec![2]).unwrap();
        let b = DensityMatrix::maximally_mixed(vec![3]).unwrap();
        assert!(matches!(mix(&[(0.5, &a), (0.4, &a)]), Err(Error::Weight(_))));
        assert!(matches!(mix(&[(1.5, &a), (-0.5, &a)]), Err(Error::Weight(_))));
        assert!(matches!(mix(&[(0.5, &a), (0.5, &b)]), Err(Error::Dimension(_))));
    }

    #[test]
    fn mixture_of_random_products_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pures: Vec<DensityMatrix> = (0..100)
            .map(|_| random_product_pure(&[2, 2, 2], &mut rng).unwrap().density())
            .collect();
        let pairs: Vec<(f64, &DensityMatrix)> = pures.iter().map(|p| (0.01, p)).collect();
        let m = mix(&pairs).unwrap();
        assert!(check_density(m.matrix(), DENSITY_TOL).accepted);
    }

    #[test]
    fn generators_pass_density_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let states = [
            ghz(3, 2).unwrap().density(),
            ghz(2, 3).unwrap().density(),
            w_state(4).unwrap().density(),
            random_pure(&[3, 2], &mut rng).unwrap().density(),
            random_density(&[2, 2, 2], 3, &mut rng).unwrap(),
            random_separable(&[2, 3], 5, &mut rng).unwrap(),
            white_noise(&ghz(3, 2).unwrap().density(), 0.3).unwrap(),
        ];
        for rho in &states {
            let diag = check_density(rho.matrix(), DENSITY_TOL);
            assert!(diag.accepted, "{diag}");
        }
    }

    #[test]
    fn white_noise_endpoints_and_ghz_diagonal() {
        let g = ghz(3, 2).unwrap().density();
        assert_eq!(white_noise(&g, 1.0).unwrap(), g);
        let mm = white_noise(&g, 0.0).unwrap();
        assert_eq!(mm, DensityMatrix::maximally_mixed(vec![2, 2, 2]).unwrap());
        let half = white_noise(&g, 0.5).unwrap();
        assert_abs_diff_eq!(half.matrix().get(0, 0).re, 0.3125, epsilon = 1e-15);
        assert_abs_diff_eq!(half.matrix().get(7, 7).re, 0.3125, epsilon = 1e-15);
        assert!(matches!(white_noise(&g, 1.5), Err(Error::Parameter(_))));
        assert!(matches!(white_noise(&g, -0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn white_noise_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(&[2, 3], 2, &mut rng).unwrap();
        for (a, b) in [(0.1, 0.9), (0.0, 1.0), (0.37, 0.41)] {
            let mid = white_noise(&rho, (a + b) / 2.0).unwrap();
            let avg = mix(&[
                (0.5, &white_noise(&rho, a).unwrap()),
                (0.5, &white_noise(&rho, b).unwrap()),
            ])
            .unwrap();
            for (x, y) in mid.matrix().as_slice().iter().zip(avg.matrix().as_slice()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for rho in [
            DensityMatrix::maximally_mixed(vec![2]).unwrap(),
            random_density(&[2, 3], 3, &mut rng).unwrap(),
        ] {
            let back = parse_state(&state_to_json(&rho)).unwrap();
            assert_eq!(back, rho);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.json");
        let rho = DensityMatrix::maximally_mixed(vec![2]).unwrap();
        save_state(&rho, &path).unwrap();
        assert_eq!(load_state(&path).unwrap(), rho);
    }

    #[test]
    fn pure_variant_loads() {
        let g = ghz(3, 2).unwrap();
        let rho = parse_state(&pure_state_to_json(&g)).unwrap();
        assert_eq!(rho, g.density());
    }

    #[test]
    fn dims_matrix_mismatch_is_format_error() {
        let text = r#"{"dims":[2,2],"matrix":[[[1,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]]]}"#;
        assert!(matches!(parse_state(text), Err(Error::Format { .. })));
    }

    #[test]
    fn malformed_json_reports_position() {
        match parse_state("{\"dims\": [2], \"matrix\": [[[1,0],") {
            Err(Error::Format { context, .. }) => assert!(context.starts_with("line 1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trace_defect_rejected() {
        let text = r#"{"dims":[2],"matrix":[[[0.45,0],[0,0]],[[0,0],[0.45,0]]]}"#;
        match parse_state(text) {
            Err(Error::StateValidation(d)) => assert_abs_diff_eq!(d.trace_defect, 0.1, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }
}
