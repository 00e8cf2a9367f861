//! End-to-end experiments: scenario files, noisy data, paired BCS/OMP runs,
//! parameter sweeps and result export.

mod experiment;
mod export;
mod noise;
mod scenario;
mod sweep;

pub use experiment::{
    prepare, run_experiment, run_trial, BcsRun, ExperimentResult, OmpRun, Prepared, TrialResult,
};
pub use export::{export_results, write_table};
pub use noise::{add_noise, NoisyMeasurement};
pub use scenario::{
    load_scenario, parse_scenario, ClusterLayout, DescriptorSet, GeometrySpec, GridSpec,
    MeasurementSpec, OneOrMany, Perturbation, Scenario, Snr,
};
pub use sweep::{sweep_eta0, sweep_snr, sweep_truncation, Eta0Row, SnrRow, TruncationRow};

/// Serializes complex vectors as `[[re, im], ...]`.
pub mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect())
    }
}
