//! Reconstruction quality figures: integral error, error maps, FF deviation,
//! sparsity and defect identification.

use std::collections::BTreeSet;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::ColumnProvenance;
use crate::error::{Error, Result};
use crate::forward::FieldMap;
use crate::nf_ff::{PowerPattern, DB_FLOOR};

/// Relative threshold below which a coefficient counts as zero.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-6;

fn same_grid(a: &FieldMap, b: &FieldMap) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::invalid("field maps live on different grids"));
    }
    Ok(())
}

/// Clamped `10·log₁₀` for power-like quantities.
pub fn power_db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Clamped `20·log₁₀` for amplitude-like quantities.
pub fn amplitude_db(x: f64) -> f64 {
    if x > 0.0 {
        (20.0 * x.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// `Ξ = Σ|E − Ẽ|² / Σ|E|²`.
pub fn integral_error(actual: &FieldMap, estimated: &FieldMap) -> Result<f64> {
    same_grid(actual, estimated)?;
    let energy: f64 = actual.values().iter().map(|z| z.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::DegenerateInput(
            "reference field has zero energy".into(),
        ));
    }
    let err: f64 = actual
        .values()
        .iter()
        .zip(estimated.values())
        .map(|(a, e)| (a - e).norm_sqr())
        .sum();
    Ok(err / energy)
}

/// `|Ẽ − E| / max|E|` per grid point, in dB.
pub fn nf_error_map(actual: &FieldMap, estimated: &FieldMap) -> Result<Vec<f64>> {
    same_grid(actual, estimated)?;
    let peak = actual.max_abs();
    if peak == 0.0 {
        return Err(Error::DegenerateInput(
            "reference field is identically zero".into(),
        ));
    }
    Ok(actual
        .values()
        .iter()
        .zip(estimated.values())
        .map(|(a, e)| amplitude_db((e - a).norm() / peak))
        .collect())
}

/// `|P − P̃|` over the visible region.
#[derive(Debug, Clone, PartialEq)]
pub struct FfDeviation {
    /// Same layout as the pattern; `NaN` outside the visible disc.
    pub map_db: Vec<f64>,
    pub max_db: f64,
}

pub fn ff_deviation(actual: &PowerPattern, estimated: &PowerPattern) -> Result<FfDeviation> {
    if actual.u != estimated.u || actual.v != estimated.v || actual.visible != estimated.visible {
        return Err(Error::invalid(
            "far-field patterns are sampled on different lattices",
        ));
    }
    let mut max_lin = 0.0f64;
    let map_db = (0..actual.linear.len())
        .map(|k| {
            if !actual.visible[k] {
                return f64::NAN;
            }
            let d = (actual.linear[k] - estimated.linear[k]).abs();
            max_lin = max_lin.max(d);
            power_db(d)
        })
        .collect();
    Ok(FfDeviation {
        map_db,
        max_db: power_db(max_lin),
    })
}

/// Number of coefficients above `threshold · max|w|`.
pub fn count_nonzero(w: &[Complex64], threshold: f64) -> usize {
    nonzero_columns(w, threshold).len()
}

pub fn nonzero_columns(w: &[Complex64], threshold: f64) -> Vec<usize> {
    let peak = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Vec::new();
    }
    w.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > threshold * peak)
        .map(|(b, _)| b)
        .collect()
}

/// Descriptor labels owning at least one non-null coefficient, ascending.
pub fn identify_defects(
    w: &[Complex64],
    provenance: &[ColumnProvenance],
    threshold: f64,
) -> Result<Vec<usize>> {
    if w.len() != provenance.len() {
        return Err(Error::invalid(format!(
            "{} coefficients but provenance for {} columns",
            w.len(),
            provenance.len()
        )));
    }
    let factors: BTreeSet<usize> = nonzero_columns(w, threshold)
        .into_iter()
        .map(|b| provenance[b].factor)
        .collect();
    Ok(factors.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub xi: f64,
    pub xi_db: f64,
    #[serde(skip)]
    pub nf_error_map: Vec<f64>,
    pub max_nf_error_db: f64,
    pub ff_max_dev_db: f64,
    pub sparsity_l0: usize,
    pub identified_factors: Vec<usize>,
}

impl ErrorReport {
    pub fn evaluate(
        actual: &FieldMap,
        estimated: &FieldMap,
        actual_pattern: &PowerPattern,
        estimated_pattern: &PowerPattern,
        w: &[Complex64],
        provenance: &[ColumnProvenance],
        zero_threshold: f64,
    ) -> Result<(Self, FfDeviation)> {
        let xi = integral_error(actual, estimated)?;
        let nf_error_map = nf_error_map(actual, estimated)?;
        let ff = ff_deviation(actual_pattern, estimated_pattern)?;
        let report = Self {
            xi,
            xi_db: power_db(xi),
            max_nf_error_db: nf_error_map.iter().copied().fold(DB_FLOOR, f64::max),
            nf_error_map,
            ff_max_dev_db: ff.max_db,
            sparsity_l0: count_nonzero(w, zero_threshold),
            identified_factors: identify_defects(w, provenance, zero_threshold)?,
        };
        Ok((report, ff))
    }
}

/// Writes `x,y,db` rows for a per-point map.
pub fn write_grid_csv<W: Write>(field: &FieldMap, map_db: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x,y,db")?;
    for (t, db) in map_db.iter().enumerate() {
        let [x, y, _] = field.grid().point(t);
        writeln!(w, "{x},{y},{db}")?;
    }
    Ok(())
}

/// Writes `u,v,db` rows for the visible part of a pattern-shaped map.
pub fn write_pattern_csv<W: Write>(
    pattern: &PowerPattern,
    map_db: &[f64],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "u,v,db")?;
    let n = pattern.size();
    for (k, db) in map_db.iter().enumerate() {
        if pattern.visible[k] {
            writeln!(w, "{},{},{db}", pattern.u[k % n], pattern.v[k / n])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::build_grid;
    use crate::nf_ff::nf_to_ff;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn field(values: Vec<Complex64>) -> FieldMap {
        let grid = build_grid(1.0, 1.0, 0.5).unwrap();
        FieldMap::new(grid, values).unwrap()
    }

    fn sample() -> FieldMap {
        field(vec![
            c(1.0, 0.5),
            c(-0.3, 0.2),
            c(0.0, 2.0),
            c(0.7, -0.1),
            c(0.1, 0.1),
            c(-1.0, 0.0),
            c(0.4, 0.4),
            c(0.2, -0.9),
            c(0.0, 0.3),
        ])
    }

    fn provenance(factors: &[usize]) -> Vec<ColumnProvenance> {
        factors
            .iter()
            .map(|&factor| ColumnProvenance {
                factor,
                singular_index: 1,
                singular_value: 1.0,
            })
            .collect()
    }

    #[test]
    fn integral_error_cases() {
        let e = sample();
        assert_eq!(integral_error(&e, &e).unwrap(), 0.0);
        assert_eq!(
            integral_error(&e, &FieldMap::zeros(*e.grid())).unwrap(),
            1.0
        );
        let scaled = field(e.values().iter().map(|z| z * 1.1).collect());
        let xi = integral_error(&e, &scaled).unwrap();
        assert!((xi - 0.01).abs() < 1e-14);
        assert!((power_db(xi) + 20.0).abs() < 1e-10);
        assert!(integral_error(&FieldMap::zeros(*e.grid()), &e).is_err());
        let other = FieldMap::zeros(build_grid(2.0, 1.0, 0.5).unwrap());
        assert!(integral_error(&e, &other).is_err());
    }

    #[test]
    fn nf_error_map_cases() {
        let e = sample();
        assert!(nf_error_map(&e, &e).unwrap().iter().all(|&d| d == DB_FLOOR));
        let peak = e.max_abs();
        let mut v = e.values().to_vec();
        v[4] += c(0.0, peak);
        let map = nf_error_map(&e, &field(v)).unwrap();
        assert!(map[4].abs() < 1e-12);
        assert!(map
            .iter()
            .enumerate()
            .all(|(t, &d)| t == 4 || d == DB_FLOOR));
        assert!(nf_error_map(&FieldMap::zeros(*e.grid()), &e).is_err());
    }

    #[test]
    fn ff_deviation_cases() {
        let grid = build_grid(4.0, 3.0, 0.5).unwrap();
        let f = FieldMap::new(
            grid,
            (0..grid.len())
                .map(|t| c(1.0 + 0.01 * t as f64, 0.0))
                .collect(),
        )
        .unwrap();
        let p = nf_to_ff(&f, 2).unwrap();
        assert_eq!(ff_deviation(&p, &p).unwrap().max_db, DB_FLOOR);

        let k = (0..p.linear.len())
            .find(|&k| p.visible[k] && p.linear[k] < 0.5)
            .unwrap();
        let mut q = p.clone();
        q.linear[k] += 0.25;
        let dev = ff_deviation(&p, &q).unwrap();
        assert!((dev.max_db - power_db(0.25)).abs() < 1e-9);

        let coarse = nf_to_ff(&f, 1).unwrap();
        assert!(ff_deviation(&p, &coarse).is_err());
    }

    #[test]
    fn identify_defects_cases() {
        let prov = provenance(&[1, 1, 2, 2, 3, 3, 13, 13]);
        let zero = vec![c(0.0, 0.0); 8];
        assert!(identify_defects(&zero, &prov, DEFAULT_ZERO_THRESHOLD)
            .unwrap()
            .is_empty());
        let mut w = zero.clone();
        w[4] = c(0.3, 0.1);
        w[6] = c(-0.2, 0.0);
        w[7] = c(0.0, 1e-9);
        assert_eq!(
            identify_defects(&w, &prov, DEFAULT_ZERO_THRESHOLD).unwrap(),
            vec![3, 13]
        );
        assert_eq!(count_nonzero(&w, DEFAULT_ZERO_THRESHOLD), 2);
        assert!(identify_defects(&w, &prov[..3], DEFAULT_ZERO_THRESHOLD).is_err());
    }

    fn arb_field() -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b)| c(a, b)), 9)
    }

    proptest! {
        #[test]
        fn xi_is_scale_invariant(e in arb_field(), est in arb_field(), k in 0u32..6, phase in -3.0f64..3.0) {
            prop_assume!(e.iter().any(|z| z.norm() > 1e-3));
            // power-of-two magnitudes keep the scaling exact in floating point
            let alpha = Complex64::from_polar(2f64.powi(k as i32 - 3), 0.0) * if phase > 0.0 { c(-1.0, 0.0) } else { c(1.0, 0.0) };
            let base = integral_error(&field(e.clone()), &field(est.clone())).unwrap();
            let scaled = integral_error(
                &field(e.iter().map(|z| z * alpha).collect()),
                &field(est.iter().map(|z| z * alpha).collect()),
            ).unwrap();
            prop_assert_eq!(base, scaled);
        }

        #[test]
        fn xi_triangle_bound(e in arb_field(), mid in arb_field(), est in arb_field()) {
            prop_assume!(e.iter().any(|z| z.norm() > 1e-3));
            let energy: f64 = e.iter().map(|z| z.norm_sqr()).sum();
            let gap: f64 = mid.iter().zip(&est).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / energy;
            let lhs = integral_error(&field(e.clone()), &field(est)).unwrap();
            let rhs = 2.0 * (integral_error(&field(e), &field(mid)).unwrap() + gap);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn identification_ignores_global_phase(w in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8), phase in -3.2f64..3.2) {
            let w: Vec<Complex64> = w.into_iter().map(|(a, b)| c(a, b)).collect();
            let prov = provenance(&[1, 1, 2, 2, 3, 3, 4, 4]);
            let rot: Vec<Complex64> = w.iter().map(|z| z * Complex64::from_polar(1.0, phase)).collect();
            prop_assert_eq!(
                identify_defects(&w, &prov, 0.3).unwrap(),
                identify_defects(&rot, &prov, 0.3).unwrap()
            );
        }
    }
}
