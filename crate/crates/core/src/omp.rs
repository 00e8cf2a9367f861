//! Orthogonal matching pursuit on the complex dictionary.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::RestrictedBasis;
use crate::error::{Error, Result};

/// Columns whose component outside the current span is below this fraction of
/// their norm are treated as linearly dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmpOptions {
    /// Upper bound on selected columns; `None` means half the dictionary.
    pub max_sparsity: Option<usize>,
    /// Stop once `‖r‖ / ‖d‖` falls to this value.
    pub residual_tol: f64,
}

impl Default for OmpOptions {
    fn default() -> Self {
        Self {
            max_sparsity: None,
            residual_tol: 1e-3,
        }
    }
}

impl OmpOptions {
    pub fn sparsity_budget(&self, n_columns: usize) -> usize {
        self.max_sparsity.unwrap_or((n_columns / 2).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_sparsity == Some(0) {
            return Err(Error::invalid("max_sparsity must be at least 1"));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(Error::invalid("residual_tol must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmpStop {
    ResidualTolerance,
    SparsityBudget,
    /// The next pick was linearly dependent on the active set and was dropped.
    RankDeficient,
    /// The residual is orthogonal to every remaining column.
    NoCorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmpSolution {
    #[serde(with = "crate::pipeline::complex_pairs")]
    pub w: Vec<Complex64>,
    /// Column indices in pick order.
    pub selected: Vec<usize>,
    /// `‖r‖` before the first pick and after every re-fit.
    pub residual_trace: Vec<f64>,
    pub stop: OmpStop,
}

fn dot(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    a.dotc(b)
}

pub fn solve_omp(
    basis: &RestrictedBasis,
    d: &[Complex64],
    opts: &OmpOptions,
) -> Result<OmpSolution> {
    opts.validate()?;
    let a = basis.matrix();
    let (m, b) = a.shape();
    if d.len() != m {
        return Err(Error::invalid(format!(
            "{} data samples for a {m}-row dictionary",
            d.len()
        )));
    }
    let data = DVector::from_column_slice(d);
    let d_norm = data.norm();
    let budget = opts.sparsity_budget(b).min(b);
    let col_norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();

    let mut w = vec![Complex64::new(0.0, 0.0); b];
    let mut selected: Vec<usize> = Vec::new();
    // orthonormal basis of the selected span and the triangular factor A_S = Q R
    let mut q_cols: Vec<DVector<Complex64>> = Vec::new();
    let mut r_cols: Vec<Vec<Complex64>> = Vec::new();
    let mut residual = data.clone();
    let mut trace = vec![d_norm];
    let mut coeffs: Vec<Complex64> = Vec::new();

    let stop = loop {
        let r_norm = *trace.last().unwrap();
        if r_norm <= opts.residual_tol * d_norm {
            break OmpStop::ResidualTolerance;
        }
        if selected.len() >= budget {
            break OmpStop::SparsityBudget;
        }
        let mut pick: Option<(usize, f64)> = None;
        for (j, col) in a.column_iter().enumerate() {
            if col_norms[j] == 0.0 || selected.contains(&j) {
                continue;
            }
            let corr = col.dotc(&residual).norm() / col_norms[j];
            if corr > pick.map_or(0.0, |p| p.1) {
                pick = Some((j, corr));
            }
        }
        let Some((j, _)) = pick else {
            break OmpStop::NoCorrelation;
        };

        let col: DVector<Complex64> = a.column(j).into_owned();
        let mut v = col.clone();
        let mut r_col = vec![Complex64::new(0.0, 0.0); q_cols.len() + 1];
        // classical Gram-Schmidt, applied twice
        for _ in 0..2 {
            for (k, qk) in q_cols.iter().enumerate() {
                let h = dot(qk, &v);
                v -= qk * h;
                r_col[k] += h;
            }
        }
        let v_norm = v.norm();
        if v_norm <= RANK_TOL * col_norms[j] {
            break OmpStop::RankDeficient;
        }
        r_col[q_cols.len()] = Complex64::new(v_norm, 0.0);
        q_cols.push(v / Complex64::new(v_norm, 0.0));
        r_cols.push(r_col);
        selected.push(j);

        // least squares on the active set: R x = Qᴴ d
        let k = selected.len();
        let z: Vec<Complex64> = q_cols.iter().map(|qk| dot(qk, &data)).collect();
        let mut x = vec![Complex64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = z[i];
            for jj in i + 1..k {
                acc -= r_cols[jj][i] * x[jj];
            }
            x[i] = acc / r_cols[i][i];
        }
        residual = data.clone();
        for (&c, &xi) in selected.iter().zip(&x) {
            residual -= a.column(c) * xi;
        }
        coeffs = x;
        trace.push(residual.norm());
    };

    for (&c, &x) in selected.iter().zip(&coeffs) {
        w[c] = x;
    }
    Ok(OmpSolution {
        w,
        selected,
        residual_trace: trace,
        stop,
    })
}
