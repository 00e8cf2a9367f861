//! Analytic near-field model of a clustered planar array.
//!
//! Every length is expressed in wavelengths (λ = 1). The array lies in the
//! `z = 0` plane with its centroid on the scan-plane axis, and the scan plane
//! sits at `z = height`. Only the x-polarized tangential component is modeled.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{DescriptorKind, UncertaintyDescriptor};
use crate::error::{Error, Result};

/// Analytic radiation factor of a single array element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementModel {
    Isotropic,
    /// `cos θ` in the upper half-space, zero below the array plane.
    #[default]
    Cosine,
    /// x-directed short dipole, x-component of the radiated field: `1 - (Δx/R)²`.
    ShortDipole,
}

impl ElementModel {
    /// Element factor toward the offset `(dx, dy, dz)` at distance `r`.
    #[inline]
    fn factor(self, dx: f64, dz: f64, r: f64) -> f64 {
        match self {
            ElementModel::Isotropic => 1.0,
            ElementModel::Cosine => {
                if dz > 0.0 {
                    dz / r
                } else {
                    0.0
                }
            }
            ElementModel::ShortDipole => {
                let c = dx / r;
                1.0 - c * c
            }
        }
    }
}

/// Planar array of `n_x × n_y` elements on a square lattice, partitioned into
/// clusters that share one excitation.
///
/// Elements are numbered with x fastest: element `iy * n_x + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    n_x: usize,
    n_y: usize,
    spacing: f64,
    cluster_map: Vec<usize>,
    n_clusters: usize,
    element: ElementModel,
}

impl ArrayGeometry {
    /// Builds a geometry from an explicit element-to-cluster map (0-based cluster ids).
    pub fn new(
        n_x: usize,
        n_y: usize,
        spacing: f64,
        cluster_map: Vec<usize>,
        element: ElementModel,
    ) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(Error::invalid("array needs at least one element per axis"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!(
                "element spacing must be positive, got {spacing}"
            )));
        }
        if cluster_map.len() != n_x * n_y {
            return Err(Error::invalid(format!(
                "cluster map has {} entries for {} elements",
                cluster_map.len(),
                n_x * n_y
            )));
        }
        let n_clusters = cluster_map.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; n_clusters];
        for &c in &cluster_map {
            used[c] = true;
        }
        if let Some(empty) = used.iter().position(|u| !u) {
            return Err(Error::invalid(format!(
                "cluster {} has no elements",
                empty + 1
            )));
        }
        Ok(Self {
            n_x,
            n_y,
            spacing,
            cluster_map,
            n_clusters,
            element,
        })
    }

    /// One cluster per row along y, so `S = n_y`.
    pub fn row_clustered(
        n_x: usize,
        n_y: usize,
        spacing: f64,
        element: ElementModel,
    ) -> Result<Self> {
        let map = (0..n_x * n_y).map(|n| n / n_x.max(1)).collect();
        Self::new(n_x, n_y, spacing, map, element)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn element(&self) -> ElementModel {
        self.element
    }

    pub fn n_elements(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// 0-based cluster of element `n`.
    pub fn cluster_of(&self, n: usize) -> usize {
        self.cluster_map[n]
    }

    /// Position of element `n` in the `z = 0` plane, centroid at the origin.
    pub fn element_position(&self, n: usize) -> [f64; 3] {
        let ix = n % self.n_x;
        let iy = n / self.n_x;
        let cx = (self.n_x as f64 - 1.0) / 2.0;
        let cy = (self.n_y as f64 - 1.0) / 2.0;
        [
            (ix as f64 - cx) * self.spacing,
            (iy as f64 - cy) * self.spacing,
            0.0,
        ]
    }
}

/// Complex excitation of each cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationVector(Vec<Complex64>);

impl ExcitationVector {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self(values)
    }

    pub fn uniform(n_clusters: usize, value: Complex64) -> Self {
        Self(vec![value; n_clusters])
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Square, regularly sampled scan plane parallel to the array.
///
/// Sample `t` sits at lattice coordinates `(t % n, t / n)` (x fastest); lattice
/// node `(0, 0)` is the corner `(-side/2, -side/2, height)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    side: f64,
    height: f64,
    step: f64,
    #[serde(skip)]
    n: usize,
}

/// Builds a centered square lattice of `(side/step + 1)²` points.
pub fn build_grid(side: f64, height: f64, step: f64) -> Result<ScanGrid> {
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::invalid(format!(
            "grid side must be positive, got {side}"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!(
            "grid step must be positive, got {step}"
        )));
    }
    if !height.is_finite() {
        return Err(Error::invalid("grid height must be finite"));
    }
    let cells = side / step;
    let rounded = cells.round();
    if rounded < 1.0 || (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
        return Err(Error::invalid(format!(
            "grid side {side} is not an integer multiple of step {step}"
        )));
    }
    Ok(ScanGrid {
        side,
        height,
        step,
        n: rounded as usize + 1,
    })
}

impl ScanGrid {
    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Samples per axis (`T_x = T_y`).
    pub fn per_axis(&self) -> usize {
        self.n
    }

    /// Total number of samples `T`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    pub fn lattice(&self, t: usize) -> (usize, usize) {
        (t % self.n, t / self.n)
    }

    /// Coordinate of lattice line `i` along either axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.side / 2.0 + i as f64 * self.step
    }

    pub fn point(&self, t: usize) -> [f64; 3] {
        let (ix, iy) = self.lattice(t);
        [self.coordinate(ix), self.coordinate(iy), self.height]
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|t| self.point(t)).collect()
    }

    /// Lattice line nearest to coordinate `x`, if `x` lies on one.
    pub fn line_of(&self, x: f64) -> Option<usize> {
        let pos = (x + self.side / 2.0) / self.step;
        let r = pos.round();
        if r < 0.0 || r >= self.n as f64 || (pos - r).abs() > 1e-9 * self.n as f64 {
            None
        } else {
            Some(r as usize)
        }
    }

    /// Re-derives the cached per-axis count after deserialization.
    pub(crate) fn rebuilt(self) -> Result<Self> {
        build_grid(self.side, self.height, self.step)
    }
}

/// Tangential field samples over a scan grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    grid: ScanGrid,
    values: Vec<Complex64>,
}

impl FieldMap {
    pub fn new(grid: ScanGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} samples but the grid has {}",
                values.len(),
                grid.len()
            )));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::invalid("field contains non-finite samples"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: ScanGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &ScanGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Copy with every sample outside the centered square of side `side` set to zero.
    pub fn windowed(&self, side: f64) -> FieldMap {
        let half = side / 2.0 + 1e-9 * self.grid.step;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(t, &v)| {
                let [x, y, _] = self.grid.point(t);
                if x.abs() <= half && y.abs() <= half {
                    v
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        FieldMap {
            grid: self.grid,
            values,
        }
    }
}

/// Free-space scalar Green's function times the element factor.
#[inline]
fn element_contribution(element: ElementModel, src: [f64; 3], obs: [f64; 3]) -> Complex64 {
    let dx = obs[0] - src[0];
    let dy = obs[1] - src[1];
    let dz = obs[2] - src[2];
    let r = (dx * dx + dy * dy + dz * dz).sqrt();
    let ef = element.factor(dx, dz, r);
    Complex64::from_polar(ef / r, -2.0 * PI * r)
}

/// Field radiated by each cluster under unit excitation.
///
/// Any excitation's field is the linear combination of these maps, so snapshot
/// sweeps only evaluate the Green's function once per cluster.
#[derive(Debug, Clone)]
pub struct ClusterFields {
    grid: ScanGrid,
    fields: Vec<Vec<Complex64>>,
}

impl ClusterFields {
    pub fn compute(geom: &ArrayGeometry, grid: &ScanGrid) -> Self {
        let positions: Vec<_> = (0..geom.n_elements())
            .map(|n| geom.element_position(n))
            .collect();
        let s = geom.n_clusters();
        let per_point: Vec<Vec<Complex64>> = (0..grid.len())
            .into_par_iter()
            .map(|t| {
                let obs = grid.point(t);
                let mut acc = vec![Complex64::new(0.0, 0.0); s];
                for (n, &p) in positions.iter().enumerate() {
                    acc[geom.cluster_of(n)] += element_contribution(geom.element(), p, obs);
                }
                acc
            })
            .collect();
        let fields = (0..s)
            .map(|c| per_point.iter().map(|acc| acc[c]).collect())
            .collect();
        Self {
            grid: *grid,
            fields,
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.fields.len()
    }

    /// Unit-excitation field of 0-based cluster `s`.
    pub fn cluster(&self, s: usize) -> &[Complex64] {
        &self.fields[s]
    }

    pub fn combine(&self, exc: &ExcitationVector) -> Result<FieldMap> {
        if exc.len() != self.fields.len() {
            return Err(Error::invalid(format!(
                "excitation has {} entries for {} clusters",
                exc.len(),
                self.fields.len()
            )));
        }
        let mut values = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (field, &z) in self.fields.iter().zip(exc.values()) {
            for (v, &f) in values.iter_mut().zip(field) {
                *v += z * f;
            }
        }
        FieldMap::new(self.grid, values)
    }
}

/// Near field of the array on every grid sample for the given cluster excitations.
pub fn radiate(geom: &ArrayGeometry, exc: &ExcitationVector, grid: &ScanGrid) -> Result<FieldMap> {
    if exc.len() != geom.n_clusters() {
        return Err(Error::invalid(format!(
            "excitation has {} entries for {} clusters",
            exc.len(),
            geom.n_clusters()
        )));
    }
    ClusterFields::compute(geom, grid).combine(exc)
}

/// Overwrites the magnitude or phase of the descriptor's target cluster.
pub fn apply_uncertainty(
    nominal: &ExcitationVector,
    descriptor: &UncertaintyDescriptor,
    value: f64,
) -> Result<ExcitationVector> {
    let (lo, hi) = descriptor.range();
    if !(value >= lo && value <= hi) {
        return Err(Error::invalid(format!(
            "value {value} outside the range [{lo}, {hi}] of descriptor {}",
            descriptor.index()
        )));
    }
    let s = descriptor.target_cluster();
    if s == 0 || s > nominal.len() {
        return Err(Error::invalid(format!(
            "descriptor {} targets cluster {s}, but there are {} clusters",
            descriptor.index(),
            nominal.len()
        )));
    }
    let mut values = nominal.values().to_vec();
    let z = values[s - 1];
    values[s - 1] = match descriptor.kind() {
        DescriptorKind::Magnitude => Complex64::from_polar(value, z.arg()),
        DescriptorKind::Phase => Complex64::from_polar(z.norm(), value),
    };
    Ok(ExcitationVector(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn grid_counts() {
        assert_eq!(build_grid(20.0, 7.0, 0.5).unwrap().len(), 1681);
        assert_eq!(build_grid(0.5, 7.0, 0.5).unwrap().len(), 4);
        let g = build_grid(12.0, 7.0, 0.5).unwrap();
        // enumerate the lattice independently of the count formula
        let mut xs = Vec::new();
        let mut x = -6.0;
        while x <= 6.0 + 1e-12 {
            xs.push(x);
            x += 0.5;
        }
        assert_eq!(g.len(), xs.len() * xs.len());
        assert_eq!(g.len(), 625);
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        assert!(build_grid(0.0, 7.0, 0.5).is_err());
        assert!(build_grid(10.0, 7.0, -0.5).is_err());
        assert!(build_grid(10.2, 7.0, 0.5).is_err());
    }

    #[test]
    fn grid_corner_and_ordering() {
        let g = build_grid(20.0, 7.0, 0.5).unwrap();
        assert_eq!(g.point(0), [-10.0, -10.0, 7.0]);
        assert_eq!(g.point(1), [-9.5, -10.0, 7.0]);
        assert_eq!(g.point(41), [-10.0, -9.5, 7.0]);
        for t in 0..g.len() {
            let (ix, iy) = g.lattice(t);
            assert_eq!(g.index(ix, iy), t);
        }
        assert_eq!(g.line_of(0.0), Some(20));
        assert_eq!(g.line_of(0.25), None);
    }

    #[test]
    fn single_isotropic_element_on_axis() {
        let geom = ArrayGeometry::row_clustered(1, 1, 0.5, ElementModel::Isotropic).unwrap();
        let grid = build_grid(2.0, 7.0, 1.0).unwrap();
        let field = radiate(&geom, &ExcitationVector::uniform(1, one()), &grid).unwrap();
        let center = field.values()[grid.index(1, 1)];
        assert!((center.norm() - 1.0 / 7.0).abs() < 1e-15);
        // -2π·7 ≡ 0 (mod 2π)
        let phase = center.arg().rem_euclid(2.0 * PI);
        assert!(phase.min(2.0 * PI - phase) < 1e-9);
    }

    #[test]
    fn symmetric_array_gives_symmetric_map() {
        let geom = ArrayGeometry::row_clustered(6, 10, 0.5, ElementModel::Cosine).unwrap();
        let grid = build_grid(10.0, 7.0, 0.5).unwrap();
        let field = radiate(&geom, &ExcitationVector::uniform(10, one()), &grid).unwrap();
        let n = grid.per_axis();
        let peak = field.max_abs();
        for iy in 0..n {
            for ix in 0..n {
                let v = field.values()[grid.index(ix, iy)];
                let mx = field.values()[grid.index(n - 1 - ix, iy)];
                let my = field.values()[grid.index(ix, n - 1 - iy)];
                assert!((v - mx).norm() < 1e-12 * peak);
                assert!((v - my).norm() < 1e-12 * peak);
            }
        }
    }

    #[test]
    fn broadside_pair_adds_constructively() {
        let pair = ArrayGeometry::row_clustered(2, 1, 0.5, ElementModel::Isotropic).unwrap();
        let single = ArrayGeometry::row_clustered(1, 1, 0.5, ElementModel::Isotropic).unwrap();
        let grid = build_grid(2.0, 1000.0, 1.0).unwrap();
        let t = grid.index(1, 1);
        let e2 = radiate(&pair, &ExcitationVector::uniform(1, one()), &grid)
            .unwrap()
            .values()[t];
        let e1 = radiate(&single, &ExcitationVector::uniform(1, one()), &grid)
            .unwrap()
            .values()[t];
        // independent two-term evaluation
        let r = (0.25f64 * 0.25 + 1000.0 * 1000.0).sqrt();
        let expect = 2.0 * Complex64::from_polar(1.0 / r, -2.0 * PI * r);
        assert!((e2 - expect).norm() < 1e-12 * expect.norm());
        assert!((e2.norm() / e1.norm() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn field_decays_with_height() {
        let geom = ArrayGeometry::row_clustered(6, 10, 0.5, ElementModel::Cosine).unwrap();
        let exc = ExcitationVector::uniform(10, one());
        let near = radiate(&geom, &exc, &build_grid(20.0, 7.0, 0.5).unwrap()).unwrap();
        let far = radiate(&geom, &exc, &build_grid(20.0, 14.0, 0.5).unwrap()).unwrap();
        assert!(far.max_abs() < near.max_abs());
    }

    #[test]
    fn cosine_element_is_dark_below_the_plane() {
        let geom = ArrayGeometry::row_clustered(1, 1, 0.5, ElementModel::Cosine).unwrap();
        let grid = build_grid(2.0, -3.0, 1.0).unwrap();
        let field = radiate(&geom, &ExcitationVector::uniform(1, one()), &grid).unwrap();
        assert!(field.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::row_clustered(0, 3, 0.5, ElementModel::Cosine).is_err());
        assert!(ArrayGeometry::row_clustered(2, 3, 0.0, ElementModel::Cosine).is_err());
        assert!(ArrayGeometry::new(2, 1, 0.5, vec![0, 2], ElementModel::Cosine).is_err());
        let g = ArrayGeometry::row_clustered(6, 10, 0.5, ElementModel::Cosine).unwrap();
        assert_eq!(g.n_clusters(), 10);
        assert_eq!(g.cluster_of(59), 9);
    }

    #[test]
    fn excitation_length_checked() {
        let geom = ArrayGeometry::row_clustered(2, 2, 0.5, ElementModel::Cosine).unwrap();
        let grid = build_grid(1.0, 3.0, 0.5).unwrap();
        assert!(radiate(&geom, &ExcitationVector::uniform(3, one()), &grid).is_err());
    }

    #[test]
    fn uncertainty_overwrites_one_cluster() {
        let nominal = ExcitationVector::uniform(10, one());
        let mag =
            UncertaintyDescriptor::new(3, DescriptorKind::Magnitude, 3, (0.0, 1.0), 7).unwrap();
        let out = apply_uncertainty(&nominal, &mag, 0.45).unwrap();
        for (s, z) in out.values().iter().enumerate() {
            let expect = if s == 2 { 0.45 } else { 1.0 };
            assert_eq!(*z, Complex64::new(expect, 0.0));
        }
        let ph = UncertaintyDescriptor::new(13, DescriptorKind::Phase, 3, (-PI, PI), 7).unwrap();
        let out = apply_uncertainty(&nominal, &ph, FRAC_PI_3).unwrap();
        assert!((out.values()[2] - Complex64::from_polar(1.0, FRAC_PI_3)).norm() < 1e-15);
        assert_eq!(apply_uncertainty(&nominal, &mag, 1.0).unwrap(), nominal);
        assert!(apply_uncertainty(&nominal, &mag, 1.5).is_err());
        let bad = UncertaintyDescriptor::new(1, DescriptorKind::Phase, 11, (-PI, PI), 7).unwrap();
        assert!(apply_uncertainty(&nominal, &bad, 0.0).is_err());
    }
}
