//! Scan configuration: one JSON document per run.

use std::path::Path;

use nanosqueeze_core::emitter::{DetuningReference, DressOptions};
use nanosqueeze_core::green::{EffectiveOptions, PlaneWave, SeriesOptions};
use nanosqueeze_core::materials::DrudeLorentzModel;
use nanosqueeze_core::specfun::MAX_ORDER;
use nanosqueeze_core::squeeze::{AmplitudeMode, Component};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ScanError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    AmplitudeMap,
    FarfieldPattern,
    VarianceMap,
    DistanceScan,
    SpatialMap,
}

/// Sampled axis: a single value, an inclusive linear range or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Value(f64),
    Linear {
        start: f64,
        stop: f64,
        points: usize,
    },
    List {
        values: Vec<f64>,
    },
}

impl AxisSpec {
    pub fn samples(&self) -> Vec<f64> {
        match self {
            Self::Value(v) => vec![*v],
            Self::List { values } => values.clone(),
            Self::Linear {
                start,
                stop,
                points,
            } => match points {
                0 => vec![],
                1 => vec![*start],
                n => {
                    let step = (stop - start) / (*n - 1) as f64;
                    (0..*n)
                        .map(|i| {
                            if i == n - 1 {
                                *stop
                            } else {
                                start + step * i as f64
                            }
                        })
                        .collect()
                }
            },
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Value(_) => 1,
            Self::List { values } => values.len(),
            Self::Linear { points, .. } => *points,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Replaces the number of samples of a linear range; other forms are left unchanged.
    pub fn with_points(&self, n: usize) -> Self {
        match self {
            Self::Linear { start, stop, .. } => Self::Linear {
                start: *start,
                stop: *stop,
                points: n,
            },
            other => other.clone(),
        }
    }

    fn check(&self, name: &str) -> Result<(), ScanError> {
        let samples = self.samples();
        if samples.is_empty() {
            return Err(ScanError::Config(format!("{name}: range is empty")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(ScanError::Config(format!("{name}: non-finite sample")));
        }
        Ok(())
    }

    fn check_positive(&self, name: &str) -> Result<(), ScanError> {
        self.check(name)?;
        if self.samples().iter().any(|v| *v <= 0.0) {
            return Err(ScanError::Config(format!(
                "{name}: samples must be positive"
            )));
        }
        Ok(())
    }

    fn check_non_negative(&self, name: &str) -> Result<(), ScanError> {
        self.check(name)?;
        if self.samples().iter().any(|v| *v < 0.0) {
            return Err(ScanError::Config(format!(
                "{name}: samples must be non-negative"
            )));
        }
        Ok(())
    }
}

/// Detection point. `D₁` lies `10⁵ λ_E` from the centre on the x axis, `D₂`
/// lies on the far side of the sphere, opposite the emitter, `offset_nm` from the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detector {
    #[default]
    D1,
    D2 {
        #[serde(default = "default_d2_offset")]
        offset_nm: f64,
    },
    Custom {
        r_nm: f64,
        theta_deg: f64,
        #[serde(default)]
        phi_deg: f64,
    },
}

fn default_d2_offset() -> f64 {
    10.0
}

/// Wavelength multiple placing `D₁` in the far zone.
pub const D1_DISTANCE_IN_WAVELENGTHS: f64 = 1e5;

impl Detector {
    /// Cartesian position [nm].
    pub fn position(&self, radius_nm: f64, lambda_nm: f64) -> [f64; 3] {
        match self {
            Self::D1 => [D1_DISTANCE_IN_WAVELENGTHS * lambda_nm, 0.0, 0.0],
            Self::D2 { offset_nm } => [0.0, 0.0, -(radius_nm + offset_nm)],
            Self::Custom {
                r_nm,
                theta_deg,
                phi_deg,
            } => {
                let (t, p) = (theta_deg.to_radians(), phi_deg.to_radians());
                [
                    r_nm * t.sin() * p.cos(),
                    r_nm * t.sin() * p.sin(),
                    r_nm * t.cos(),
                ]
            }
        }
    }

    pub fn default_component(&self) -> Component {
        match self {
            Self::D1 => Component::Theta,
            _ => Component::R,
        }
    }

    pub fn default_mode(&self) -> AmplitudeMode {
        match self {
            Self::D1 => AmplitudeMode::FarField,
            _ => AmplitudeMode::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Sphere radius [nm]; zero means no sphere.
    pub radius_nm: AxisSpec,
    #[serde(default)]
    pub detector: Detector,
    /// Polar angle of the detection circle for angular patterns [deg].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<AxisSpec>,
    /// xz-plane window for spatial maps [nm].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<PlaneConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneConfig {
    pub x_nm: AxisSpec,
    pub z_nm: AxisSpec,
    /// Points closer than this to the sphere surface are masked [nm].
    #[serde(default)]
    pub surface_gap_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Radial,
    Vector {
        direction: [f64; 3],
    },
}

fn default_dipole_debye() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterConfig {
    pub lambda_nm: AxisSpec,
    /// Emitter distance from the sphere surface [nm].
    pub s_nm: AxisSpec,
    #[serde(default)]
    pub dipole_orientation: Orientation,
    #[serde(default = "default_dipole_debye")]
    pub dipole_debye: f64,
    #[serde(default)]
    pub gamma_star_over_gamma0: f64,
}

/// How the drive strength is specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    /// Free-space normalised `(δ₀, z₀)` mapped through the dressed rates.
    #[default]
    Incident,
    /// Local Rabi frequencies `Ω/γ₀` held fixed; `δ₀` mapped as in `Incident`.
    Local,
    /// Resonant drive at the most squeezing saturation for the dephasing in force.
    Optimal,
}

fn default_z0() -> AxisSpec {
    AxisSpec::Value(1.0 / 3f64.sqrt())
}

fn default_delta0() -> AxisSpec {
    AxisSpec::Value(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(default)]
    pub mode: DriveMode,
    #[serde(default = "default_delta0")]
    pub delta0: AxisSpec,
    #[serde(default = "default_z0")]
    pub z0: AxisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_over_gamma0: Option<AxisSpec>,
    #[serde(default)]
    pub detuning_reference: DetuningReference,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incidence: Option<PlaneWave>,
    /// Extra quadrature phase; zero selects the most squeezed quadrature.
    #[serde(default)]
    pub quadrature_phase_rad: f64,
    /// Free-space reference curve for distance scans, `Ω/γ₀`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_omega_over_gamma0: Option<f64>,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            mode: DriveMode::default(),
            delta0: default_delta0(),
            z0: default_z0(),
            omega_over_gamma0: None,
            detuning_reference: DetuningReference::default(),
            incidence: None,
            quadrature_phase_rad: 0.0,
            reference_omega_over_gamma0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaterialConfig {
    #[default]
    Gold,
    DrudeLorentz {
        model: DrudeLorentzModel,
    },
}

impl MaterialConfig {
    pub fn model(&self) -> DrudeLorentzModel {
        match self {
            Self::Gold => DrudeLorentzModel::gold(),
            Self::DrudeLorentz { model } => model.clone(),
        }
    }
}

fn default_series_tol() -> f64 {
    1e-10
}
fn default_max_order() -> usize {
    MAX_ORDER
}
fn default_quadrature_rel_tol() -> f64 {
    1e-9
}
fn default_quadrature_max_intervals() -> usize {
    400
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    /// Amplitude evaluation; defaults to far-field at `D₁` and full elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<AmplitudeMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<Component>,
    #[serde(default = "default_series_tol")]
    pub series_tol: f64,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default = "default_quadrature_rel_tol")]
    pub quadrature_rel_tol: f64,
    #[serde(default = "default_quadrature_max_intervals")]
    pub quadrature_max_intervals: usize,
    /// Include the sphere-induced line shift in the dressed rates.
    #[serde(default = "default_true")]
    pub include_shift: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            mode: None,
            component: None,
            series_tol: default_series_tol(),
            max_order: default_max_order(),
            quadrature_rel_tol: default_quadrature_rel_tol(),
            quadrature_max_intervals: default_quadrature_max_intervals(),
            include_shift: true,
        }
    }
}

impl NumericsConfig {
    pub fn effective(&self) -> EffectiveOptions {
        EffectiveOptions {
            series: SeriesOptions {
                tol: self.series_tol,
                max_order: self.max_order,
                abs_tol: 0.0,
            },
            rel_tol: self.quadrature_rel_tol,
            max_intervals: self.quadrature_max_intervals,
        }
    }

    pub fn dress(&self) -> DressOptions {
        DressOptions {
            effective: self.effective(),
            include_shift: self.include_shift,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Svg => "svg",
        }
    }
}

fn default_out_dir() -> String {
    "out".into()
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    /// File stem; defaults to the config name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            stem: None,
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub pipeline: Pipeline,
    pub geometry: GeometryConfig,
    pub emitter: EmitterConfig,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScanConfig {
    pub fn from_json(text: &str) -> Result<Self, ScanError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ScanError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScanError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScanError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, output block excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn mode(&self) -> AmplitudeMode {
        self.numerics.mode.unwrap_or_else(|| match self.pipeline {
            Pipeline::SpatialMap => AmplitudeMode::Full,
            _ => self.geometry.detector.default_mode(),
        })
    }

    pub fn component(&self) -> Component {
        self.numerics
            .component
            .unwrap_or_else(|| match self.pipeline {
                Pipeline::SpatialMap => Component::R,
                Pipeline::FarfieldPattern => Component::Theta,
                _ => self.geometry.detector.default_component(),
            })
    }

    pub fn drive_wave(&self) -> PlaneWave {
        self.drive
            .incidence
            .unwrap_or_else(nanosqueeze_core::emitter::default_drive)
    }

    pub fn stem(&self) -> String {
        self.output
            .stem
            .clone()
            .unwrap_or_else(|| self.name.clone())
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(ScanError::Config(
                "name must be non-empty and free of path separators".into(),
            ));
        }
        let g = &self.geometry;
        g.radius_nm.check_non_negative("geometry.radius_nm")?;
        let e = &self.emitter;
        e.lambda_nm.check_positive("emitter.lambda_nm")?;
        e.s_nm.check_positive("emitter.s_nm")?;
        if !(e.dipole_debye > 0.0 && e.dipole_debye.is_finite()) {
            return Err(ScanError::Config(
                "emitter.dipole_debye must be positive".into(),
            ));
        }
        if !(e.gamma_star_over_gamma0 >= 0.0 && e.gamma_star_over_gamma0.is_finite()) {
            return Err(ScanError::Config(
                "emitter.gamma_star_over_gamma0 must be non-negative".into(),
            ));
        }
        if let Orientation::Vector { direction } = e.dipole_orientation {
            let n = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !(n.is_finite() && n > 0.0) {
                return Err(ScanError::Config(
                    "emitter.dipole_orientation must be a non-zero vector".into(),
                ));
            }
        }
        match &g.detector {
            Detector::D1 => {}
            Detector::D2 { offset_nm } => {
                if !(*offset_nm > 0.0 && offset_nm.is_finite()) {
                    return Err(ScanError::Config(
                        "geometry.detector.offset_nm must be positive".into(),
                    ));
                }
            }
            Detector::Custom {
                r_nm,
                theta_deg,
                phi_deg,
            } => {
                if ![r_nm, theta_deg, phi_deg].iter().all(|v| v.is_finite()) {
                    return Err(ScanError::Config(
                        "geometry.detector: non-finite coordinate".into(),
                    ));
                }
                let r_max = g.radius_nm.samples().into_iter().fold(0.0, f64::max);
                if *r_nm <= r_max {
                    return Err(ScanError::Config(format!(
                        "geometry.detector.r_nm = {r_nm} lies inside the largest sphere ({r_max} nm)"
                    )));
                }
            }
        }
        let d = &self.drive;
        d.delta0.check("drive.delta0")?;
        d.z0.check_non_negative("drive.z0")?;
        if let Some(o) = &d.omega_over_gamma0 {
            o.check_non_negative("drive.omega_over_gamma0")?;
        }
        if d.mode == DriveMode::Local && d.omega_over_gamma0.is_none() {
            return Err(ScanError::Config(
                "drive.mode = local needs drive.omega_over_gamma0".into(),
            ));
        }
        if let Some(r) = d.reference_omega_over_gamma0 {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(ScanError::Config(
                    "drive.reference_omega_over_gamma0 must be non-negative".into(),
                ));
            }
        }
        if !d.quadrature_phase_rad.is_finite() {
            return Err(ScanError::Config(
                "drive.quadrature_phase_rad must be finite".into(),
            ));
        }
        if let Some(w) = &d.incidence {
            let k = w.direction;
            let p = w.polarization;
            let dot = k[0] * p[0] + k[1] * p[1] + k[2] * p[2];
            let nk = k.iter().map(|c| c * c).sum::<f64>().sqrt();
            let np = p.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (nk - 1.0).abs() > 1e-9 || (np - 1.0).abs() > 1e-9 || dot.abs() > 1e-9 {
                return Err(ScanError::Config(
                    "drive.incidence needs orthogonal unit direction and polarization".into(),
                ));
            }
        }
        self.material
            .model()
            .validate()
            .map_err(|e| ScanError::Config(format!("material: {e}")))?;
        let n = &self.numerics;
        if !(n.series_tol > 0.0 && n.series_tol < 1.0) {
            return Err(ScanError::Config(
                "numerics.series_tol must lie in (0, 1)".into(),
            ));
        }
        if n.max_order == 0 || n.max_order > MAX_ORDER {
            return Err(ScanError::Config(format!(
                "numerics.max_order must lie in [1, {MAX_ORDER}]"
            )));
        }
        if !(n.quadrature_rel_tol > 0.0 && n.quadrature_rel_tol < 1.0) {
            return Err(ScanError::Config(
                "numerics.quadrature_rel_tol must lie in (0, 1)".into(),
            ));
        }
        if n.quadrature_max_intervals == 0 {
            return Err(ScanError::Config(
                "numerics.quadrature_max_intervals must be positive".into(),
            ));
        }
        if self.output.formats.is_empty() {
            return Err(ScanError::Config("output.formats is empty".into()));
        }
        match self.pipeline {
            Pipeline::FarfieldPattern => {
                let Some(t) = &g.theta_deg else {
                    return Err(ScanError::Config(
                        "farfield_pattern needs geometry.theta_deg".into(),
                    ));
                };
                t.check("geometry.theta_deg")?;
            }
            Pipeline::SpatialMap => {
                let Some(p) = &g.plane else {
                    return Err(ScanError::Config("spatial_map needs geometry.plane".into()));
                };
                p.x_nm.check("geometry.plane.x_nm")?;
                p.z_nm.check("geometry.plane.z_nm")?;
                if !(p.surface_gap_nm >= 0.0 && p.surface_gap_nm.is_finite()) {
                    return Err(ScanError::Config(
                        "geometry.plane.surface_gap_nm must be finite and non-negative".into(),
                    ));
                }
            }
            Pipeline::DistanceScan => {
                if d.omega_over_gamma0.is_none() {
                    return Err(ScanError::Config(
                        "distance_scan needs drive.omega_over_gamma0".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
