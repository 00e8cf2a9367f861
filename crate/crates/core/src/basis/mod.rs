//! Over-complete basis generation from uncertainty sweeps.
//!
//! Each uncertainty factor is swept uniformly over its admissible range, the
//! resulting near-field snapshots are compressed with a truncated SVD, and the
//! dominant left singular vectors of every factor are appended to the basis in
//! factor order.

mod io;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{apply_uncertainty, ArrayGeometry, ClusterFields, ExcitationVector, ScanGrid};

pub use io::{load_basis, read_basis, save_basis, write_basis};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Magnitude,
    Phase,
}

/// One a-priori uncertainty factor: which cluster it perturbs, whether it acts
/// on magnitude or phase, and the admissible range it is swept over.
///
/// `index` (c) and `target_cluster` (s) are 1-based labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DescriptorSpec", into = "DescriptorSpec")]
pub struct UncertaintyDescriptor {
    index: usize,
    kind: DescriptorKind,
    target_cluster: usize,
    range: (f64, f64),
    samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct DescriptorSpec {
    index: usize,
    kind: DescriptorKind,
    cluster: usize,
    range: [f64; 2],
    samples: usize,
}

impl TryFrom<DescriptorSpec> for UncertaintyDescriptor {
    type Error = Error;

    fn try_from(s: DescriptorSpec) -> Result<Self> {
        UncertaintyDescriptor::new(
            s.index,
            s.kind,
            s.cluster,
            (s.range[0], s.range[1]),
            s.samples,
        )
    }
}

impl From<UncertaintyDescriptor> for DescriptorSpec {
    fn from(d: UncertaintyDescriptor) -> Self {
        DescriptorSpec {
            index: d.index,
            kind: d.kind,
            cluster: d.target_cluster,
            range: [d.range.0, d.range.1],
            samples: d.samples,
        }
    }
}

impl UncertaintyDescriptor {
    pub fn new(
        index: usize,
        kind: DescriptorKind,
        target_cluster: usize,
        range: (f64, f64),
        samples: usize,
    ) -> Result<Self> {
        if index == 0 {
            return Err(Error::invalid("descriptor indices are 1-based"));
        }
        if target_cluster == 0 {
            return Err(Error::invalid("cluster indices are 1-based"));
        }
        let (lo, hi) = range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!(
                "descriptor {index}: empty range [{lo}, {hi}]"
            )));
        }
        if kind == DescriptorKind::Magnitude && lo < 0.0 {
            return Err(Error::invalid(format!(
                "descriptor {index}: magnitude range must be non-negative"
            )));
        }
        if samples < 2 {
            return Err(Error::invalid(format!(
                "descriptor {index}: needs at least 2 sweep samples, got {samples}"
            )));
        }
        Ok(Self {
            index,
            kind,
            target_cluster,
            range,
            samples,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn target_cluster(&self) -> usize {
        self.target_cluster
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn samples(&self) -> usize {
        self.samples
    }
}

/// The standard factor set for `S` clusters: magnitudes `c = 1..S` followed by
/// phases `c = S+1..2S`.
pub fn magnitude_and_phase_descriptors(
    n_clusters: usize,
    magnitude_range: (f64, f64),
    phase_range: (f64, f64),
    samples: usize,
) -> Result<Vec<UncertaintyDescriptor>> {
    let mags = (1..=n_clusters).map(|s| {
        UncertaintyDescriptor::new(s, DescriptorKind::Magnitude, s, magnitude_range, samples)
    });
    let phases = (1..=n_clusters).map(|s| {
        UncertaintyDescriptor::new(
            n_clusters + s,
            DescriptorKind::Phase,
            s,
            phase_range,
            samples,
        )
    });
    mags.chain(phases).collect()
}

/// Uniform sweep of a descriptor's range, both endpoints included.
pub fn sample_descriptor(desc: &UncertaintyDescriptor) -> Result<Vec<f64>> {
    let k = desc.samples;
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {k}")));
    }
    let (lo, hi) = desc.range;
    let delta = (hi - lo) / (k - 1) as f64;
    Ok((0..k)
        .map(|i| (lo + i as f64 * delta).clamp(lo, hi))
        .collect())
}

/// How many singular vectors each factor contributes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Truncation {
    /// Keep every `σ_q` with `σ_q / σ_1 >= epsilon`.
    Relative { epsilon: f64 },
    /// Keep exactly `q` vectors.
    Fixed { q: usize },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Fixed { q: 2 }
    }
}

impl Truncation {
    pub const DEFAULT_EPSILON: f64 = 1e-3;

    pub fn validate(&self) -> Result<()> {
        match *self {
            Truncation::Relative { epsilon } if !(epsilon > 0.0 && epsilon < 1.0) => {
                Err(Error::invalid(format!(
                    "relative threshold must lie in (0, 1), got {epsilon}"
                )))
            }
            Truncation::Fixed { q: 0 } => {
                Err(Error::invalid("at least one singular vector per factor"))
            }
            _ => Ok(()),
        }
    }
}

/// Snapshot matrix of one factor (`T × K_c`), built from precomputed cluster fields.
pub fn snapshots_from_fields(
    fields: &ClusterFields,
    nominal: &ExcitationVector,
    desc: &UncertaintyDescriptor,
) -> Result<CMatrix> {
    let chi = sample_descriptor(desc)?;
    let mut columns = Vec::with_capacity(chi.len());
    for &x in &chi {
        let exc = apply_uncertainty(nominal, desc, x)?;
        columns.push(fields.combine(&exc)?.into_values());
    }
    let t = columns[0].len();
    Ok(CMatrix::from_fn(t, columns.len(), |i, k| columns[k][i]))
}

/// Snapshot matrix: column `k` is the field with the descriptor set to its `k`-th sweep value.
pub fn snapshot_matrix(
    geom: &ArrayGeometry,
    nominal: &ExcitationVector,
    desc: &UncertaintyDescriptor,
    grid: &ScanGrid,
) -> Result<CMatrix> {
    if nominal.len() != geom.n_clusters() {
        return Err(Error::invalid(
            "nominal excitation does not match the cluster count",
        ));
    }
    snapshots_from_fields(&ClusterFields::compute(geom, grid), nominal, desc)
}

/// Dominant left singular vectors of one factor's snapshots.
#[derive(Debug, Clone)]
pub struct FactorSvd {
    /// `T × Q_c`, orthonormal columns.
    pub vectors: CMatrix,
    pub singular_values: Vec<f64>,
}

impl FactorSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// Truncated SVD of a snapshot matrix.
///
/// Each kept vector is phase-rotated so that its largest-magnitude entry is
/// real and positive, which makes the basis independent of the SVD backend's
/// phase choice.
pub fn tsvd_extract(snapshots: &CMatrix, truncation: Truncation) -> Result<FactorSvd> {
    if snapshots.is_empty() {
        return Err(Error::DegenerateInput("empty snapshot matrix".into()));
    }
    if snapshots.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::DegenerateInput("all-zero snapshot matrix".into()));
    }
    let max_rank = snapshots.nrows().min(snapshots.ncols());
    let svd = snapshots.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let sigma_1 = svd.singular_values[order[0]];
    let q = match truncation {
        Truncation::Relative { epsilon } => {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(Error::invalid(format!(
                    "relative threshold must be in (0, 1), got {epsilon}"
                )));
            }
            order
                .iter()
                .take_while(|&&i| svd.singular_values[i] >= epsilon * sigma_1)
                .count()
        }
        Truncation::Fixed { q } => {
            if q == 0 || q > max_rank {
                return Err(Error::invalid(format!(
                    "fixed truncation q = {q} outside 1..={max_rank}"
                )));
            }
            q
        }
    };

    let mut vectors = CMatrix::zeros(snapshots.nrows(), q);
    let mut singular_values = Vec::with_capacity(q);
    for (j, &i) in order.iter().take(q).enumerate() {
        let col = u.column(i);
        let pivot = col
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (r, z)| {
                if z.norm() > best.1 {
                    (r, z.norm())
                } else {
                    best
                }
            })
            .0;
        let p = col[pivot];
        let rot = if p.norm() > 0.0 {
            p.conj() / p.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        vectors.set_column(j, &(col * rot));
        singular_values.push(svd.singular_values[i]);
    }
    Ok(FactorSvd {
        vectors,
        singular_values,
    })
}

/// Where a basis column came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnProvenance {
    /// Descriptor label `c`.
    pub factor: usize,
    /// 1-based singular index `q` within the factor.
    pub singular_index: usize,
    pub singular_value: f64,
}

/// Full-grid over-complete basis (`T × B`).
#[derive(Debug, Clone, PartialEq)]
pub struct OvercompleteBasis {
    grid: ScanGrid,
    matrix: CMatrix,
    provenance: Vec<ColumnProvenance>,
}

impl OvercompleteBasis {
    pub fn new(grid: ScanGrid, matrix: CMatrix, provenance: Vec<ColumnProvenance>) -> Result<Self> {
        if matrix.nrows() != grid.len() {
            return Err(Error::invalid(format!(
                "basis has {} rows but the grid has {} samples",
                matrix.nrows(),
                grid.len()
            )));
        }
        if matrix.ncols() != provenance.len() {
            return Err(Error::invalid("provenance must cover every basis column"));
        }
        Ok(Self {
            grid,
            matrix,
            provenance,
        })
    }

    pub fn grid(&self) -> &ScanGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn provenance(&self) -> &[ColumnProvenance] {
        &self.provenance
    }

    /// Number of columns `B`.
    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    /// Field `A·w` on the full grid.
    pub fn synthesize(&self, w: &[Complex64]) -> Result<crate::forward::FieldMap> {
        if w.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} coefficients for {} basis columns",
                w.len(),
                self.len()
            )));
        }
        let values = (&self.matrix * nalgebra::DVector::from_column_slice(w))
            .iter()
            .copied()
            .collect();
        crate::forward::FieldMap::new(self.grid, values)
    }
}

/// Sweeps every descriptor, compresses each factor and appends the results in
/// descriptor order.
pub fn build_basis(
    geom: &ArrayGeometry,
    nominal: &ExcitationVector,
    descriptors: &[UncertaintyDescriptor],
    grid: &ScanGrid,
    truncation: Truncation,
) -> Result<OvercompleteBasis> {
    if descriptors.is_empty() {
        return Err(Error::invalid(
            "at least one uncertainty descriptor is required",
        ));
    }
    if nominal.len() != geom.n_clusters() {
        return Err(Error::invalid(
            "nominal excitation does not match the cluster count",
        ));
    }
    let fields = ClusterFields::compute(geom, grid);
    let factors = descriptors
        .par_iter()
        .map(|d| tsvd_extract(&snapshots_from_fields(&fields, nominal, d)?, truncation))
        .collect::<Result<Vec<_>>>()?;

    let b: usize = factors.iter().map(FactorSvd::rank).sum();
    let mut matrix = CMatrix::zeros(grid.len(), b);
    let mut provenance = Vec::with_capacity(b);
    let mut col = 0;
    for (desc, factor) in descriptors.iter().zip(&factors) {
        for q in 0..factor.rank() {
            matrix.set_column(col, &factor.vectors.column(q));
            provenance.push(ColumnProvenance {
                factor: desc.index(),
                singular_index: q + 1,
                singular_value: factor.singular_values[q],
            });
            col += 1;
        }
    }
    OvercompleteBasis::new(*grid, matrix, provenance)
}

/// Basis rows at the probing locations (`M × B`).
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedBasis {
    matrix: CMatrix,
    measurement_indices: Vec<usize>,
}

impl RestrictedBasis {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn measurement_indices(&self) -> &[usize] {
        &self.measurement_indices
    }

    pub fn n_measurements(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.matrix.ncols()
    }
}

impl From<CMatrix> for RestrictedBasis {
    /// Wraps an arbitrary dictionary; rows are labelled `0..M`.
    fn from(matrix: CMatrix) -> Self {
        let measurement_indices = (0..matrix.nrows()).collect();
        Self {
            matrix,
            measurement_indices,
        }
    }
}

/// Extracts the basis rows of the given grid samples.
pub fn restrict(
    basis: &OvercompleteBasis,
    measurement_indices: &[usize],
) -> Result<RestrictedBasis> {
    let t = basis.grid.len();
    let mut seen = vec![false; t];
    for &i in measurement_indices {
        if i >= t {
            return Err(Error::invalid(format!(
                "measurement index {i} outside grid of {t} samples"
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid(format!("duplicate measurement index {i}")));
        }
    }
    let matrix = basis.matrix.select_rows(measurement_indices);
    Ok(RestrictedBasis {
        matrix,
        measurement_indices: measurement_indices.to_vec(),
    })
}
