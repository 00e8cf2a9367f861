//! Planar near-field to far-field transformation through the plane-wave spectrum.
//!
//! The tangential field sampled on a `T_x × T_y` lattice of pitch `Δ` is
//! zero-padded to `N = pad · T_x` points per axis and transformed with
//!
//! ```text
//! S(m, n) = Σ_x Σ_y E(x, y) · exp(+j 2π (m·x + n·y) / N)
//! ```
//!
//! Spectral bin `m` (centered, `-⌊N/2⌋ ≤ m < N - ⌊N/2⌋`) maps to the direction
//! cosine `u = m·λ / (N·Δ)`. Sampling at `Δ ≤ λ/2` makes the lattice cover the
//! whole visible disc `u² + v² ≤ 1`.

use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::FieldMap;

/// Values below this are reported at the floor.
pub const DB_FLOOR: f64 = -120.0;

/// Half-wavelength sampling, with room for rounding in user-supplied steps.
const MAX_STEP: f64 = 0.5 * (1.0 + 1e-12);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarFieldOptions {
    pub pad_factor: usize,
    /// Weight the spectrum by `cos θ` inside the visible region.
    pub obliquity: bool,
}

impl Default for FarFieldOptions {
    fn default() -> Self {
        Self {
            pad_factor: 4,
            obliquity: false,
        }
    }
}

/// Centered plane-wave spectrum on an `n × n` lattice (`v` index outer, `u` inner).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    n: usize,
    step: f64,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Signed frequency index of lattice position `j`.
    pub fn bin(&self, j: usize) -> i64 {
        j as i64 - (self.n / 2) as i64
    }

    pub fn direction_cosine(&self, j: usize) -> f64 {
        self.bin(j) as f64 / (self.n as f64 * self.step)
    }

    pub fn at(&self, iu: usize, iv: usize) -> Complex64 {
        self.values[iv * self.n + iu]
    }
}

/// Zero-padded 2-D DFT of the field samples.
pub fn plane_wave_spectrum(field: &FieldMap, pad_factor: usize) -> Result<Spectrum> {
    if pad_factor == 0 {
        return Err(Error::invalid("pad factor must be at least 1"));
    }
    let grid = field.grid();
    if grid.step() > MAX_STEP {
        return Err(Error::Aliasing { step: grid.step() });
    }
    let t = grid.per_axis();
    let n = t * pad_factor;
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for iy in 0..t {
        for ix in 0..t {
            buf[iy * n + ix] = field.values()[grid.index(ix, iy)];
        }
    }

    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for ix in 0..n {
        for iy in 0..n {
            col[iy] = buf[iy * n + ix];
        }
        fft.process(&mut col);
        for iy in 0..n {
            buf[iy * n + ix] = col[iy];
        }
    }

    let half = n / 2;
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for jv in 0..n {
        let kv = (jv + n - half) % n;
        for ju in 0..n {
            let ku = (ju + n - half) % n;
            values[jv * n + ju] = buf[kv * n + ku];
        }
    }
    Ok(Spectrum {
        n,
        step: grid.step(),
        values,
    })
}

/// Peak-normalized far-field power over the `(u, v)` lattice.
///
/// `linear` and `db` are stored with the `v` index outer. Nodes outside the
/// visible disc hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPattern {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub linear: Vec<f64>,
    pub db: Vec<f64>,
    pub visible: Vec<bool>,
}

impl PowerPattern {
    pub fn size(&self) -> usize {
        self.u.len()
    }

    pub fn index(&self, iu: usize, iv: usize) -> usize {
        iv * self.u.len() + iu
    }

    /// Visible `(u, v, dB)` triples.
    pub fn visible_points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.u.len();
        (0..n * n)
            .filter(|&k| self.visible[k])
            .map(move |k| (self.u[k % n], self.v[k / n], self.db[k]))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "u,v,db")?;
        for (u, v, db) in self.visible_points() {
            writeln!(w, "{u},{v},{db}")?;
        }
        Ok(())
    }
}

pub fn to_db(linear: f64) -> f64 {
    if linear > 0.0 {
        (10.0 * linear.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

pub fn nf_to_ff(field: &FieldMap, pad_factor: usize) -> Result<PowerPattern> {
    nf_to_ff_with(
        field,
        &FarFieldOptions {
            pad_factor,
            ..FarFieldOptions::default()
        },
    )
}

pub fn nf_to_ff_with(field: &FieldMap, opts: &FarFieldOptions) -> Result<PowerPattern> {
    let spectrum = plane_wave_spectrum(field, opts.pad_factor)?;
    let n = spectrum.size();
    let axis: Vec<f64> = (0..n).map(|j| spectrum.direction_cosine(j)).collect();

    let mut visible = vec![false; n * n];
    let mut power = vec![f64::NAN; n * n];
    let mut peak = 0.0f64;
    for iv in 0..n {
        for iu in 0..n {
            let k = iv * n + iu;
            let rho2 = axis[iu] * axis[iu] + axis[iv] * axis[iv];
            if rho2 <= 1.0 {
                visible[k] = true;
                let mut p = spectrum.at(iu, iv).norm_sqr();
                if opts.obliquity {
                    p *= 1.0 - rho2;
                }
                power[k] = p;
                peak = peak.max(p);
            }
        }
    }
    if !(peak > 0.0) {
        return Err(Error::DegenerateInput(
            "far-field pattern is identically zero".into(),
        ));
    }
    let linear: Vec<f64> = power.iter().map(|p| p / peak).collect();
    let db = linear
        .iter()
        .map(|&p| if p.is_nan() { f64::NAN } else { to_db(p) })
        .collect();
    Ok(PowerPattern {
        u: axis.clone(),
        v: axis,
        linear,
        db,
        visible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutSample {
    pub v: f64,
    pub db: f64,
}

/// Visible samples along the lattice line nearest to `u = u0`.
pub fn pattern_cut(pattern: &PowerPattern, u0: f64) -> Result<Vec<CutSample>> {
    let (lo, hi) = (pattern.u[0], *pattern.u.last().unwrap());
    if !(u0 >= lo && u0 <= hi) {
        return Err(Error::invalid(format!(
            "u = {u0} outside the pattern span [{lo}, {hi}]"
        )));
    }
    let iu = (0..pattern.u.len())
        .min_by(|&a, &b| {
            (pattern.u[a] - u0)
                .abs()
                .total_cmp(&(pattern.u[b] - u0).abs())
        })
        .unwrap();
    Ok((0..pattern.v.len())
        .filter(|&iv| pattern.visible[pattern.index(iu, iv)])
        .map(|iv| CutSample {
            v: pattern.v[iv],
            db: pattern.db[pattern.index(iu, iv)],
        })
        .collect())
}
