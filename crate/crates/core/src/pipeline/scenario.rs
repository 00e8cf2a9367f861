use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::basis::{magnitude_and_phase_descriptors, Truncation, UncertaintyDescriptor};
use crate::bcs::SolverOptions;
use crate::error::{Error, Result};
use crate::forward::{
    apply_uncertainty, build_grid, ArrayGeometry, ElementModel, ExcitationVector, ScanGrid,
};
use crate::nf_ff::FarFieldOptions;
use crate::omp::OmpOptions;

const BENCHMARK_JSON: &str = include_str!("../../scenarios/benchmark.json");

/// How elements are grouped into clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterLayout {
    /// One cluster per row along y.
    Rows,
    /// Explicit 1-based cluster label per element, x fastest.
    Map(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub n_x: usize,
    pub n_y: usize,
    #[serde(default = "half_wavelength")]
    pub spacing: f64,
    #[serde(default)]
    pub element: ElementModel,
    #[serde(default = "rows")]
    pub clusters: ClusterLayout,
}

fn half_wavelength() -> f64 {
    0.5
}

fn rows() -> ClusterLayout {
    ClusterLayout::Rows
}

impl GeometrySpec {
    pub fn build(&self) -> Result<ArrayGeometry> {
        match &self.clusters {
            ClusterLayout::Rows => {
                ArrayGeometry::row_clustered(self.n_x, self.n_y, self.spacing, self.element)
            }
            ClusterLayout::Map(labels) => {
                if labels.contains(&0) {
                    return Err(Error::invalid("cluster labels are 1-based"));
                }
                let map = labels.iter().map(|l| l - 1).collect();
                ArrayGeometry::new(self.n_x, self.n_y, self.spacing, map, self.element)
            }
        }
    }
}

/// Either the standard magnitude/phase factor per cluster or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorSet {
    Standard {
        #[serde(default = "unit_range")]
        magnitude_range: [f64; 2],
        #[serde(default = "full_turn")]
        phase_range: [f64; 2],
        #[serde(default = "seven")]
        samples: usize,
    },
    List(Vec<UncertaintyDescriptor>),
}

fn unit_range() -> [f64; 2] {
    [0.0, 1.0]
}

fn full_turn() -> [f64; 2] {
    [-PI, PI]
}

fn seven() -> usize {
    7
}

impl Default for DescriptorSet {
    fn default() -> Self {
        DescriptorSet::Standard {
            magnitude_range: unit_range(),
            phase_range: full_turn(),
            samples: seven(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    /// Descriptor label `c`.
    pub descriptor: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub side: f64,
    pub height: f64,
    #[serde(default = "half_wavelength")]
    pub step: f64,
}

/// Square probe lattice of `count_x × count_y` points spanning `side`,
/// centered on the prediction grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub side: f64,
    pub count_x: usize,
    pub count_y: usize,
}

/// Signal-to-noise ratio in dB; `"inf"` selects noiseless data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr(pub f64);

impl Snr {
    pub fn db(self) -> f64 {
        self.0
    }

    pub fn is_noiseless(self) -> bool {
        self.0 == f64::INFINITY
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_noiseless() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(Snr(x)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "noiseless") => {
                Ok(Snr(f64::INFINITY))
            }
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got \"{t}\""
            ))),
        }
    }
}

impl std::str::FromStr for Snr {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "inf" | "+inf" | "noiseless" => Ok(Snr(f64::INFINITY)),
            _ => s
                .parse::<f64>()
                .map(Snr)
                .map_err(|e| format!("bad SNR `{s}`: {e}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    pub fn first(&self) -> Option<T> {
        self.values().into_iter().next()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub geometry: GeometrySpec,
    /// Cluster excitations as `[re, im]`; all ones when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub descriptors: DescriptorSet,
    #[serde(default)]
    pub truth_perturbations: Vec<Perturbation>,
    pub prediction_grid: GridSpec,
    pub measurement: MeasurementSpec,
    #[serde(default = "default_snr")]
    pub snr_db: OneOrMany<Snr>,
    #[serde(default = "default_eta0")]
    pub eta0: OneOrMany<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub omp: OmpOptions,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub far_field: FarFieldOptions,
}

fn default_snr() -> OneOrMany<Snr> {
    OneOrMany::One(Snr(f64::INFINITY))
}

fn default_eta0() -> OneOrMany<f64> {
    OneOrMany::One(SolverOptions::default().eta0)
}

fn one() -> usize {
    1
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, &path.display().to_string())
}

/// Parses and validates scenario JSON; `origin` labels parse errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: origin.to_string(),
        message: format!("at `{}`: {}", e.path(), e.inner()),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    /// The bundled 6×10 row-clustered benchmark with a single defective cluster.
    pub fn benchmark() -> Scenario {
        parse_scenario(BENCHMARK_JSON, "benchmark.json")
            .expect("bundled benchmark scenario is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let geom = self
            .geometry
            .build()
            .map_err(|e| Error::validation("geometry", e.to_string()))?;
        let nominal = self.nominal_excitation(&geom)?;
        let descriptors = self.descriptor_list()?;
        let mut labels: Vec<usize> = descriptors.iter().map(|d| d.index()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation(
                "descriptors",
                "descriptor labels must be unique",
            ));
        }
        for d in &descriptors {
            if d.target_cluster() > geom.n_clusters() {
                return Err(Error::validation(
                    "descriptors",
                    format!(
                        "descriptor {} targets cluster {}, but the array has {}",
                        d.index(),
                        d.target_cluster(),
                        geom.n_clusters()
                    ),
                ));
            }
        }
        self.truth_excitation_with(&nominal, &descriptors)?;
        let grid = self.prediction_grid()?;
        self.measurement_indices(&grid)?;

        let snrs = self.snr_db.values();
        if snrs.is_empty() {
            return Err(Error::validation(
                "snr_db",
                "at least one value is required",
            ));
        }
        if snrs
            .iter()
            .any(|s| s.0.is_nan() || s.0 == f64::NEG_INFINITY)
        {
            return Err(Error::validation(
                "snr_db",
                "values must be finite or \"inf\"",
            ));
        }
        let etas = self.eta0.values();
        if etas.is_empty() || etas.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::validation(
                "eta0",
                "values must be positive and finite",
            ));
        }
        if self.trials == 0 {
            return Err(Error::validation("trials", "must be at least 1"));
        }
        self.solver
            .validate()
            .map_err(|e| Error::validation("solver", e.to_string()))?;
        self.omp
            .validate()
            .map_err(|e| Error::validation("omp", e.to_string()))?;
        self.truncation
            .validate()
            .map_err(|e| Error::validation("truncation", e.to_string()))?;
        if self.far_field.pad_factor == 0 {
            return Err(Error::validation(
                "far_field.pad_factor",
                "must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        self.geometry.build()
    }

    pub fn nominal_excitation(&self, geom: &ArrayGeometry) -> Result<ExcitationVector> {
        match &self.nominal {
            None => Ok(ExcitationVector::uniform(
                geom.n_clusters(),
                Complex64::new(1.0, 0.0),
            )),
            Some(v) if v.len() == geom.n_clusters() => Ok(ExcitationVector::new(
                v.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
            )),
            Some(v) => Err(Error::validation(
                "nominal",
                format!("{} excitations for {} clusters", v.len(), geom.n_clusters()),
            )),
        }
    }

    pub fn descriptor_list(&self) -> Result<Vec<UncertaintyDescriptor>> {
        match &self.descriptors {
            DescriptorSet::Standard {
                magnitude_range,
                phase_range,
                samples,
            } => {
                let geom = self.geometry()?;
                magnitude_and_phase_descriptors(
                    geom.n_clusters(),
                    (magnitude_range[0], magnitude_range[1]),
                    (phase_range[0], phase_range[1]),
                    *samples,
                )
                .map_err(|e| Error::validation("descriptors", e.to_string()))
            }
            DescriptorSet::List(list) if list.is_empty() => Err(Error::validation(
                "descriptors",
                "at least one descriptor is required",
            )),
            DescriptorSet::List(list) => Ok(list.clone()),
        }
    }

    /// Nominal excitations with every truth perturbation applied in order.
    pub fn truth_excitation(&self) -> Result<ExcitationVector> {
        let geom = self.geometry()?;
        self.truth_excitation_with(&self.nominal_excitation(&geom)?, &self.descriptor_list()?)
    }

    fn truth_excitation_with(
        &self,
        nominal: &ExcitationVector,
        descriptors: &[UncertaintyDescriptor],
    ) -> Result<ExcitationVector> {
        let mut exc = nominal.clone();
        for (k, p) in self.truth_perturbations.iter().enumerate() {
            let field = format!("truth_perturbations[{k}]");
            let desc = descriptors
                .iter()
                .find(|d| d.index() == p.descriptor)
                .ok_or_else(|| {
                    Error::validation(&field, format!("unknown descriptor {}", p.descriptor))
                })?;
            exc = apply_uncertainty(&exc, desc, p.value)
                .map_err(|e| Error::validation(&field, e.to_string()))?;
        }
        Ok(exc)
    }

    pub fn prediction_grid(&self) -> Result<ScanGrid> {
        let g = &self.prediction_grid;
        build_grid(g.side, g.height, g.step)
            .map_err(|e| Error::validation("prediction_grid", e.to_string()))
    }

    /// Grid indices of the probe lattice, row by row (x fastest).
    pub fn measurement_indices(&self, grid: &ScanGrid) -> Result<Vec<usize>> {
        let m = &self.measurement;
        let field = "measurement";
        if m.count_x == 0 || m.count_y == 0 {
            return Err(Error::validation(field, "probe counts must be at least 1"));
        }
        if !(m.side > 0.0 && m.side.is_finite()) {
            return Err(Error::validation(
                field,
                format!("side must be positive, got {}", m.side),
            ));
        }
        if m.side > grid.side() * (1.0 + 1e-12) {
            return Err(Error::validation(
                field,
                format!(
                    "measurement side {} exceeds the prediction side {}",
                    m.side,
                    grid.side()
                ),
            ));
        }
        if m.side < grid.step() * (1.0 - 1e-12) {
            return Err(Error::validation(
                field,
                format!(
                    "measurement side {} is below the grid step {}",
                    m.side,
                    grid.step()
                ),
            ));
        }
        let lines = |count: usize| -> Result<Vec<usize>> {
            let coords: Vec<f64> = if count == 1 {
                vec![0.0]
            } else {
                let pitch = m.side / (count - 1) as f64;
                (0..count)
                    .map(|i| -m.side / 2.0 + i as f64 * pitch)
                    .collect()
            };
            let mut out = Vec::with_capacity(count);
            for x in coords {
                let line = grid.line_of(x).ok_or_else(|| {
                    Error::validation(
                        field,
                        format!("probe coordinate {x} is not a prediction-grid node"),
                    )
                })?;
                if out.last() == Some(&line) {
                    return Err(Error::validation(
                        field,
                        "probe pitch is finer than the grid step",
                    ));
                }
                out.push(line);
            }
            Ok(out)
        };
        let xs = lines(m.count_x)?;
        let ys = lines(m.count_y)?;
        Ok(ys
            .iter()
            .flat_map(|&iy| xs.iter().map(move |&ix| grid.index(ix, iy)))
            .collect())
    }

    /// Copy with the probe lattice shrunk to `side`, keeping the probe counts.
    pub fn with_measurement_side(&self, side: f64) -> Scenario {
        let mut s = self.clone();
        s.measurement.side = side;
        s
    }
}
