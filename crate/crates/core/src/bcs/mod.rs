//! Bayesian compressive sensing on the real-lifted measurement system.
//!
//! The complex system `A'·w ≈ d` is rewritten as the real system
//!
//! ```text
//! [ Re A'  -Im A' ] [ Re w ]   [ Re d ]
//! [ Im A'   Re A' ] [ Im w ] ≈ [ Im d ]
//! ```
//!
//! whose hierarchical Gaussian prior has one precision `τ_b` per lifted
//! unknown. The precisions and the noise variance `η` are learned by
//! sequential marginal-likelihood maximization (see [`rvm_optimize`]); the
//! weights are the posterior mean under those hyperparameters, folded back to
//! complex coefficients `w_b = ω_b + j·ω_{b+B}`.

mod rvm;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{CMatrix, RestrictedBasis};
use crate::error::{Error, Result};

pub use rvm::{rvm_optimize, RvmOutcome, SolverStatus};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Real-lifted system `Â ω ≈ δ` (`2M × 2B`).
#[derive(Debug, Clone, PartialEq)]
pub struct RealSystem {
    matrix: DMatrix<f64>,
    data: DVector<f64>,
    m: usize,
    b: usize,
}

impl RealSystem {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    /// Complex measurement count `M`.
    pub fn n_measurements(&self) -> usize {
        self.m
    }

    /// Complex column count `B`.
    pub fn n_columns(&self) -> usize {
        self.b
    }
}

/// Builds the real block system from a complex dictionary and data vector.
pub fn realify(a: &CMatrix, d: &[Complex64]) -> Result<RealSystem> {
    let (m, b) = a.shape();
    if d.len() != m {
        return Err(Error::invalid(format!(
            "{} data samples for a {m}-row dictionary",
            d.len()
        )));
    }
    let matrix = DMatrix::from_fn(2 * m, 2 * b, |i, j| {
        let z = a[(i % m, j % b)];
        match (i < m, j < b) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let data = DVector::from_iterator(2 * m, d.iter().map(|z| z.re).chain(d.iter().map(|z| z.im)));
    Ok(RealSystem { matrix, data, m, b })
}

/// `[Re w, Im w]`.
pub fn lift(w: &[Complex64]) -> Vec<f64> {
    w.iter()
        .map(|z| z.re)
        .chain(w.iter().map(|z| z.im))
        .collect()
}

/// Inverse of [`lift`]: `w_b = ω_b + j·ω_{b+B}`.
pub fn recombine(omega: &[f64]) -> Vec<Complex64> {
    let b = omega.len() / 2;
    (0..b)
        .map(|i| Complex64::new(omega[i], omega[i + b]))
        .collect()
}

/// Noise variance `η` and per-unknown prior precisions `τ`.
///
/// `τ_b = +∞` marks a pruned basis function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub eta: f64,
    #[serde(with = "infinite_as_null")]
    pub tau: Vec<f64>,
}

impl Hyperparameters {
    /// All basis functions pruned.
    pub fn empty(eta: f64, n_unknowns: usize) -> Self {
        Self {
            eta,
            tau: vec![f64::INFINITY; n_unknowns],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be positive, got {}",
                self.eta
            )));
        }
        if let Some(t) = self.tau.iter().find(|t| !(**t > 0.0)) {
            return Err(Error::invalid(format!(
                "prior precisions must be positive, got {t}"
            )));
        }
        Ok(())
    }

    /// Lifted indices with finite precision, ascending.
    pub fn active_set(&self) -> Vec<usize> {
        self.tau
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_finite())
            .map(|(i, _)| i)
            .collect()
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.is_finite().then_some(*x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Initial noise variance `η₀`.
    pub eta0: f64,
    /// Re-estimate `η` while iterating; otherwise it stays at `eta0`.
    pub estimate_noise: bool,
    /// Stop once the best available likelihood gain drops below this.
    pub tol_phi: f64,
    pub max_iter: usize,
    /// Coefficients below `zero_threshold · max|w|` count as zero.
    pub zero_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eta0: 1e-2,
            estimate_noise: false,
            tol_phi: 1e-8,
            max_iter: 1000,
            zero_threshold: 1e-6,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::invalid(format!(
                "eta0 must be positive, got {}",
                self.eta0
            )));
        }
        if !(self.tol_phi >= 0.0) {
            return Err(Error::invalid("tol_phi must be non-negative"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.zero_threshold) {
            return Err(Error::invalid("zero_threshold must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Cholesky factor of the active-set posterior precision `diag(τ_a) + Â_aᵀÂ_a / η`.
pub(crate) struct ActiveFactor {
    pub chol: Cholesky<f64, Dyn>,
    /// `ln |diag(τ_a) + Â_aᵀÂ_a / η|`
    pub ln_det: f64,
}

pub(crate) fn factor_active(
    gram_aa: &DMatrix<f64>,
    tau_a: &[f64],
    eta: f64,
) -> Result<ActiveFactor> {
    let k = tau_a.len();
    let mut p = gram_aa / eta;
    for i in 0..k {
        p[(i, i)] += tau_a[i];
    }
    let chol = Cholesky::new(p).ok_or_else(|| {
        Error::IllConditioned("posterior precision is not positive definite".into())
    })?;
    let ln_det = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|x| x.ln())
            .sum::<f64>();
    if !ln_det.is_finite() {
        return Err(Error::IllConditioned(
            "posterior precision is numerically singular".into(),
        ));
    }
    Ok(ActiveFactor { chol, ln_det })
}

/// `Φ` from the active-set quantities via the determinant lemma and Woodbury identity.
pub(crate) fn likelihood_from_factor(
    n_rows: usize,
    eta: f64,
    tau_a: &[f64],
    factor: &ActiveFactor,
    data_sq: f64,
    proj_a: &DVector<f64>,
) -> f64 {
    let n = n_rows as f64;
    let ln_det_omega = n * eta.ln() - tau_a.iter().map(|t| t.ln()).sum::<f64>() + factor.ln_det;
    let quad = if tau_a.is_empty() {
        data_sq / eta
    } else {
        let mu = factor.chol.solve(proj_a) / eta;
        data_sq / eta - proj_a.dot(&mu) / eta
    };
    -0.5 * (n * LN_2PI + ln_det_omega + quad)
}

fn active_parts(sys: &RealSystem, hyper: &Hyperparameters) -> Result<(Vec<usize>, DMatrix<f64>)> {
    hyper.validate()?;
    if hyper.tau.len() != sys.matrix.ncols() {
        return Err(Error::invalid(format!(
            "{} precisions for {} lifted unknowns",
            hyper.tau.len(),
            sys.matrix.ncols()
        )));
    }
    let active = hyper.active_set();
    let cols = sys.matrix.select_columns(&active);
    Ok((active, cols))
}

/// Log marginal likelihood `Φ(η, τ)` of the lifted data.
pub fn marginal_likelihood(sys: &RealSystem, hyper: &Hyperparameters) -> Result<f64> {
    let (active, cols) = active_parts(sys, hyper)?;
    let tau_a: Vec<f64> = active.iter().map(|&i| hyper.tau[i]).collect();
    let gram = cols.transpose() * &cols;
    let proj = cols.transpose() * &sys.data;
    let factor = factor_active(&gram, &tau_a, hyper.eta)?;
    Ok(likelihood_from_factor(
        sys.matrix.nrows(),
        hyper.eta,
        &tau_a,
        &factor,
        sys.data.norm_squared(),
        &proj,
    ))
}

/// Posterior mean `ω̃` (zero outside the active set).
///
/// Solves `[Â_aᵀÂ_a/η + diag(τ_a)] ω_a = Â_aᵀδ/η` by Cholesky with two steps of
/// iterative refinement.
pub fn posterior_mean(sys: &RealSystem, hyper: &Hyperparameters) -> Result<DVector<f64>> {
    let (active, cols) = active_parts(sys, hyper)?;
    let mut omega = DVector::zeros(sys.matrix.ncols());
    if active.is_empty() {
        return Ok(omega);
    }
    let tau_a: Vec<f64> = active.iter().map(|&i| hyper.tau[i]).collect();
    let gram = cols.transpose() * &cols;
    let rhs = cols.transpose() * &sys.data / hyper.eta;
    let mut normal = &gram / hyper.eta;
    for (i, t) in tau_a.iter().enumerate() {
        normal[(i, i)] += t;
    }
    let chol = Cholesky::new(normal.clone())
        .ok_or_else(|| Error::IllConditioned("normal matrix is not positive definite".into()))?;
    let mut x = chol.solve(&rhs);
    for _ in 0..2 {
        let r = &rhs - &normal * &x;
        x += chol.solve(&r);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned("posterior mean is not finite".into()));
    }
    for (k, &i) in active.iter().enumerate() {
        omega[i] = x[k];
    }
    Ok(omega)
}

/// Result of a BCS reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcsSolution {
    /// Lifted posterior mean (`2B`).
    pub omega: Vec<f64>,
    /// Complex coefficients (`B`).
    #[serde(with = "crate::pipeline::complex_pairs")]
    pub w: Vec<Complex64>,
    pub hyper: Hyperparameters,
    pub likelihood_trace: Vec<f64>,
    pub active_set: Vec<usize>,
    pub status: SolverStatus,
}

/// Full BCS pipeline: lift, learn hyperparameters, posterior mean, recombine.
pub fn solve_bcs(
    basis: &RestrictedBasis,
    d: &[Complex64],
    opts: &SolverOptions,
) -> Result<BcsSolution> {
    opts.validate()?;
    let sys = realify(basis.matrix(), d)?;
    let outcome = rvm_optimize(&sys, opts.eta0, opts)?;
    let omega = posterior_mean(&sys, &outcome.hyper)?;
    let omega: Vec<f64> = omega.iter().copied().collect();
    Ok(BcsSolution {
        w: recombine(&omega),
        active_set: outcome.hyper.active_set(),
        omega,
        hyper: outcome.hyper,
        likelihood_trace: outcome.trace,
        status: outcome.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_cmatrix(rng: &mut ChaCha8Rng, m: usize, b: usize) -> CMatrix {
        CMatrix::from_fn(m, b, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    /// Direct evaluation: explicit Ω, dense LU for both the determinant and the solve.
    fn dense_likelihood(sys: &RealSystem, hyper: &Hyperparameters) -> f64 {
        let a = sys.matrix();
        let n = a.nrows();
        let mut omega = DMatrix::identity(n, n) * hyper.eta;
        for (j, t) in hyper.tau.iter().enumerate() {
            if t.is_finite() {
                let col = a.column(j);
                omega += (col * col.transpose()) / *t;
            }
        }
        let lu = omega.clone().lu();
        let det = lu.determinant();
        let x = lu.solve(sys.data()).unwrap();
        -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + sys.data().dot(&x))
    }

    fn dense_posterior(sys: &RealSystem, hyper: &Hyperparameters) -> DVector<f64> {
        let active = hyper.active_set();
        let a = sys.matrix().select_columns(&active);
        let mut normal = a.transpose() * &a / hyper.eta;
        for (k, &i) in active.iter().enumerate() {
            normal[(k, k)] += hyper.tau[i];
        }
        let x = normal
            .lu()
            .solve(&(a.transpose() * sys.data() / hyper.eta))
            .unwrap();
        let mut out = DVector::zeros(sys.matrix().ncols());
        for (k, &i) in active.iter().enumerate() {
            out[i] = x[k];
        }
        out
    }

    #[test]
    fn realify_small_cases() {
        let s = realify(&CMatrix::from_element(1, 1, c(1.0, 0.0)), &[c(1.0, 0.0)]).unwrap();
        assert_eq!(
            s.matrix(),
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])
        );
        assert_eq!(s.data().as_slice(), &[1.0, 0.0]);
        let s = realify(&CMatrix::from_element(1, 1, c(0.0, 1.0)), &[c(0.0, 0.0)]).unwrap();
        assert_eq!(
            s.matrix(),
            &DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
        );
        assert!(realify(&CMatrix::zeros(3, 2), &[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn realify_block_structure_and_isomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_cmatrix(&mut rng, 3, 2);
        let s = realify(&a, &random_cvec(&mut rng, 3)).unwrap();
        let mat = s.matrix();
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(mat[(i, j)], mat[(i + 3, j + 2)]);
                assert_eq!(mat[(i, j + 2)], -mat[(i + 3, j)]);
            }
        }
        for _ in 0..100 {
            let w = random_cvec(&mut rng, 2);
            let lhs = mat * DVector::from_vec(lift(&w));
            let aw: Vec<Complex64> = (&a * nalgebra::DVector::from_vec(w))
                .iter()
                .copied()
                .collect();
            let rhs = DVector::from_vec(lift(&aw));
            assert!((lhs - &rhs).norm() <= 1e-14 * rhs.norm().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn recombine_inverts_lift(parts in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 0..20)) {
            let w: Vec<Complex64> = parts.into_iter().map(|(a, b)| c(a, b)).collect();
            prop_assert_eq!(recombine(&lift(&w)), w);
        }
    }

    #[test]
    fn likelihood_trivial_cases() {
        let m = 4;
        let a = CMatrix::from_element(m, 2, c(0.3, -0.2));
        let zero = realify(&a, &vec![c(0.0, 0.0); m]).unwrap();
        let h = Hyperparameters::empty(1.0, 4);
        let phi = marginal_likelihood(&zero, &h).unwrap();
        assert!((phi + m as f64 * LN_2PI).abs() < 1e-12);

        let d = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 0.0), c(3.0, 1.0)];
        let s: f64 = d.iter().map(|z| z.norm_sqr()).sum();
        let sys = realify(&a, &d).unwrap();
        let phi = marginal_likelihood(&sys, &h).unwrap();
        assert!((phi - (-(m as f64) * LN_2PI - s / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn likelihood_matches_dense_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_cmatrix(&mut rng, 6, 4);
            let sys = realify(&a, &random_cvec(&mut rng, 6)).unwrap();
            let tau = (0..8)
                .map(|_| {
                    if rng.random_bool(0.4) {
                        f64::INFINITY
                    } else {
                        rng.random_range(0.1..10.0)
                    }
                })
                .collect();
            let h = Hyperparameters {
                eta: rng.random_range(0.05..2.0),
                tau,
            };
            let fast = marginal_likelihood(&sys, &h).unwrap();
            let dense = dense_likelihood(&sys, &h);
            assert!((fast - dense).abs() <= 1e-10 * dense.abs());
        }
    }

    #[test]
    fn posterior_mean_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_cmatrix(&mut rng, 3, 2);
        let sys = realify(&a, &random_cvec(&mut rng, 3)).unwrap();
        let omega = posterior_mean(&sys, &Hyperparameters::empty(0.1, 4)).unwrap();
        assert!(omega.iter().all(|&x| x == 0.0));

        // single unit-norm column, vanishing prior precision and noise: least squares
        let a = CMatrix::from_fn(1, 1, |_, _| c(0.6, 0.8));
        let sys = realify(&a, &[c(2.0, -1.0)]).unwrap();
        let h = Hyperparameters {
            eta: 1e-12,
            tau: vec![1e-12, f64::INFINITY],
        };
        let omega = posterior_mean(&sys, &h).unwrap();
        let ls = sys.matrix().column(0).dot(sys.data());
        assert!((omega[0] - ls).abs() < 1e-9);

        // random 6x4 complex -> 12x8 lifted, all active
        let a = random_cmatrix(&mut rng, 6, 4);
        let sys = realify(&a, &random_cvec(&mut rng, 6)).unwrap();
        let h = Hyperparameters {
            eta: 0.1,
            tau: vec![1.0; 8],
        };
        let fast = posterior_mean(&sys, &h).unwrap();
        let dense = dense_posterior(&sys, &h);
        assert!((&fast - &dense).norm() <= 1e-12 * dense.norm());
    }

    #[test]
    fn posterior_mean_is_the_map_point_on_a_grid() {
        // two active unknowns: compare with brute-force maximization of the log posterior
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_cmatrix(&mut rng, 4, 1);
        let sys = realify(&a, &random_cvec(&mut rng, 4)).unwrap();
        let h = Hyperparameters {
            eta: 0.5,
            tau: vec![0.7, 1.3],
        };
        let omega = posterior_mean(&sys, &h).unwrap();
        let g = sys.matrix().transpose() * sys.matrix();
        let p = sys.matrix().transpose() * sys.data();
        let objective = |x: f64, y: f64| {
            let fit = g[(0, 0)] * x * x + 2.0 * g[(0, 1)] * x * y + g[(1, 1)] * y * y
                - 2.0 * (p[0] * x + p[1] * y);
            -fit / (2.0 * h.eta) - 0.5 * (h.tau[0] * x * x + h.tau[1] * y * y)
        };
        let step = 2e-3;
        assert!(omega[0].abs() < 3.0 && omega[1].abs() < 3.0);
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in -1500..=1500 {
            for j in -1500..=1500 {
                let (x, y) = (i as f64 * step, j as f64 * step);
                let f = objective(x, y);
                if f > best.0 {
                    best = (f, x, y);
                }
            }
        }
        assert!((omega[0] - best.1).abs() <= step);
        assert!((omega[1] - best.2).abs() <= step);
    }

    #[test]
    fn hyperparameter_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sys = realify(&random_cmatrix(&mut rng, 2, 2), &random_cvec(&mut rng, 2)).unwrap();
        assert!(marginal_likelihood(&sys, &Hyperparameters::empty(0.0, 4)).is_err());
        assert!(marginal_likelihood(&sys, &Hyperparameters::empty(1.0, 3)).is_err());
        let h = Hyperparameters {
            eta: 1.0,
            tau: vec![-1.0, f64::INFINITY, 1.0, 1.0],
        };
        assert!(posterior_mean(&sys, &h).is_err());
    }

    #[test]
    fn hyperparameters_json_roundtrip() {
        let h = Hyperparameters {
            eta: 0.25,
            tau: vec![1.5, f64::INFINITY],
        };
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, r#"{"eta":0.25,"tau":[1.5,null]}"#);
        assert_eq!(serde_json::from_str::<Hyperparameters>(&s).unwrap(), h);
    }
}
