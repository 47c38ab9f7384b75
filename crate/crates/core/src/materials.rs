//! Analytic Drude-Lorentz permittivity of the sphere material.
//!
//! ```text
//! ε(ω) = ε∞ − ωp² / (ω² + iγp ω) + Σ_j A_j Ω_j² / (Ω_j² − ω² − iΓ_j ω)
//! ```
//!
//! The same expression is evaluated on the real axis and, with `ω → iξ`, on the
//! positive imaginary axis where it is real and monotonically decreasing.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constants::omega_from_wavelength_nm;
use crate::{Error, Result, C64};

/// One Lorentz oscillator: dimensionless strength, resonance and width in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzPole {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrudeLorentzModel {
    pub eps_inf: f64,
    /// Plasma angular frequency [rad/s].
    pub omega_p: f64,
    /// Drude damping [rad/s].
    pub gamma_p: f64,
    #[serde(default)]
    pub lorentz_poles: Vec<LorentzPole>,
}

impl DrudeLorentzModel {
    pub fn new(
        eps_inf: f64,
        omega_p: f64,
        gamma_p: f64,
        lorentz_poles: Vec<LorentzPole>,
    ) -> Result<Self> {
        let model = Self {
            eps_inf,
            omega_p,
            gamma_p,
            lorentz_poles,
        };
        model.validate()?;
        Ok(model)
    }

    /// Lossless free-electron metal with `ε∞ = 1`.
    pub fn drude(omega_p: f64, gamma_p: f64) -> Self {
        Self {
            eps_inf: 1.0,
            omega_p,
            gamma_p,
            lorentz_poles: Vec::new(),
        }
    }

    /// Default gold parameters: Drude term plus two interband poles, fitted to the
    /// bundled Johnson & Christy table over 400–900 nm.
    pub fn gold() -> Self {
        Self {
            eps_inf: GOLD_DEFAULT[0],
            omega_p: GOLD_DEFAULT[1],
            gamma_p: GOLD_DEFAULT[2],
            lorentz_poles: vec![
                LorentzPole {
                    amplitude: GOLD_DEFAULT[3],
                    center: GOLD_DEFAULT[4],
                    width: GOLD_DEFAULT[5],
                },
                LorentzPole {
                    amplitude: GOLD_DEFAULT[6],
                    center: GOLD_DEFAULT[7],
                    width: GOLD_DEFAULT[8],
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut values = vec![self.eps_inf, self.omega_p, self.gamma_p];
        for p in &self.lorentz_poles {
            values.extend([p.amplitude, p.center, p.width]);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        if self.omega_p < 0.0 || self.gamma_p < 0.0 {
            return Err(Error::InvalidModel(
                "plasma frequency and damping must be non-negative".into(),
            ));
        }
        if self
            .lorentz_poles
            .iter()
            .any(|p| p.amplitude < 0.0 || p.center <= 0.0 || p.width < 0.0)
        {
            return Err(Error::InvalidModel(
                "Lorentz poles need positive centre and non-negative strength and width".into(),
            ));
        }
        Ok(())
    }

    /// Evaluates the analytic continuation at a complex frequency in the upper half plane.
    pub fn eval(&self, w: C64) -> C64 {
        let i = C64::new(0.0, 1.0);
        let mut eps = C64::new(self.eps_inf, 0.0)
            - self.omega_p * self.omega_p / (w * w + i * self.gamma_p * w);
        for p in &self.lorentz_poles {
            let c2 = p.center * p.center;
            eps += p.amplitude * c2 / (c2 - w * w - i * p.width * w);
        }
        eps
    }

    /// Complex relative permittivity at real angular frequency `omega` [rad/s].
    pub fn permittivity(&self, omega: f64) -> Result<C64> {
        self.validate()?;
        if !(omega > 0.0) {
            return Err(Error::Domain(format!(
                "frequency must be positive, got {omega}"
            )));
        }
        let eps = self.eval(C64::new(omega, 0.0));
        if !eps.is_finite() {
            return Err(Error::InvalidModel(format!(
                "permittivity diverges at ω = {omega}"
            )));
        }
        Ok(eps)
    }

    /// Permittivity at a vacuum wavelength in nm.
    pub fn permittivity_at_wavelength(&self, lambda_nm: f64) -> Result<C64> {
        self.permittivity(omega_from_wavelength_nm(lambda_nm))
    }

    /// Real permittivity `ε(iξ)` on the positive imaginary frequency axis.
    pub fn permittivity_imag_axis(&self, xi: f64) -> Result<f64> {
        if !(xi > 0.0) {
            return Err(Error::Domain(format!(
                "imaginary frequency must be positive, got {xi}"
            )));
        }
        let mut eps = self.eps_inf + self.omega_p * self.omega_p / (xi * xi + self.gamma_p * xi);
        for p in &self.lorentz_poles {
            let c2 = p.center * p.center;
            eps += p.amplitude * c2 / (c2 + xi * xi + p.width * xi);
        }
        Ok(eps)
    }

    fn to_params(&self) -> Vec<f64> {
        let mut p = vec![
            (self.eps_inf - 1.0).max(1e-6).ln(),
            self.omega_p.ln(),
            self.gamma_p.max(1.0).ln(),
        ];
        for pole in &self.lorentz_poles {
            p.extend([
                pole.amplitude.max(1e-9).ln(),
                pole.center.ln(),
                pole.width.max(1.0).ln(),
            ]);
        }
        p
    }

    fn from_params(p: &[f64]) -> Self {
        let poles = p[3..]
            .chunks(3)
            .map(|c| LorentzPole {
                amplitude: c[0].exp(),
                center: c[1].exp(),
                width: c[2].exp(),
            })
            .collect();
        Self {
            eps_inf: 1.0 + p[0].exp(),
            omega_p: p[1].exp(),
            gamma_p: p[2].exp(),
            lorentz_poles: poles,
        }
    }
}

impl Default for DrudeLorentzModel {
    fn default() -> Self {
        Self::gold()
    }
}

/// Result of `fit_drude_lorentz` on `crates/core/data/gold_johnson_christy.csv`, 400–900 nm,
/// order: ε∞, ωp, γp, (A, Ω, Γ) × 2.
const GOLD_DEFAULT: [f64; 9] = [
    6.176_179_429_321_912,
    1.363_195_864_552_391_4e16,
    6.118_319_013_548_449e13,
    3.744_751_749_718_060_5e-1,
    4.073_054_944_568_052e15,
    7.044_532_353_705_039e14,
    1.712_684_140_029_223_2,
    4.856_264_515_874_311e15,
    1.517_727_643_142_752_5e15,
];

/// One row of tabulated optical constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub wavelength_nm: f64,
    pub eps_re: f64,
    pub eps_im: f64,
}

/// Tabulated permittivity, rows sorted by strictly increasing wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermittivityTable {
    rows: Vec<TableRow>,
}

impl PermittivityTable {
    /// Builds a table, sorting by wavelength and checking the invariants.
    pub fn new(mut rows: Vec<TableRow>) -> Result<Self> {
        rows.sort_by(|a, b| a.wavelength_nm.total_cmp(&b.wavelength_nm));
        for w in rows.windows(2) {
            if w[1].wavelength_nm <= w[0].wavelength_nm {
                return Err(Error::InvalidTable(format!(
                    "duplicate wavelength {} nm",
                    w[0].wavelength_nm
                )));
            }
        }
        for r in &rows {
            if !(r.wavelength_nm > 0.0 && r.eps_re.is_finite() && r.eps_im.is_finite()) {
                return Err(Error::InvalidTable(format!(
                    "bad row at {} nm",
                    r.wavelength_nm
                )));
            }
            if r.eps_im < 0.0 {
                return Err(Error::InvalidTable(format!(
                    "negative Im ε at {} nm",
                    r.wavelength_nm
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Parses the `wavelength_nm,eps_re,eps_im` CSV format.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidTable("empty file".into()))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        if columns != ["wavelength_nm", "eps_re", "eps_im"] {
            return Err(Error::InvalidTable(format!("unexpected header `{header}`")));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidTable(format!("row {}: {e}", lineno + 2)))?;
            if fields.len() != 3 {
                return Err(Error::InvalidTable(format!(
                    "row {}: expected 3 fields",
                    lineno + 2
                )));
            }
            rows.push(TableRow {
                wavelength_nm: fields[0],
                eps_re: fields[1],
                eps_im: fields[2],
            });
        }
        Self::new(rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidTable(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    /// The bundled Johnson & Christy gold data.
    pub fn gold_johnson_christy() -> Self {
        Self::from_csv_str(include_str!("../data/gold_johnson_christy.csv"))
            .expect("bundled table is valid")
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn rows_in_band(&self, band: (f64, f64)) -> impl Iterator<Item = &TableRow> {
        self.rows
            .iter()
            .filter(move |r| r.wavelength_nm >= band.0 && r.wavelength_nm <= band.1)
    }

    /// Linear interpolation of the complex permittivity; `None` outside the table.
    pub fn interpolate(&self, lambda_nm: f64) -> Option<C64> {
        let idx = self.rows.partition_point(|r| r.wavelength_nm < lambda_nm);
        if idx < self.rows.len() && self.rows[idx].wavelength_nm == lambda_nm {
            let r = self.rows[idx];
            return Some(C64::new(r.eps_re, r.eps_im));
        }
        if idx == 0 || idx == self.rows.len() {
            return None;
        }
        let (a, b) = (self.rows[idx - 1], self.rows[idx]);
        let t = (lambda_nm - a.wavelength_nm) / (b.wavelength_nm - a.wavelength_nm);
        Some(C64::new(
            a.eps_re + t * (b.eps_re - a.eps_re),
            a.eps_im + t * (b.eps_im - a.eps_im),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Largest accepted per-point relative deviation `|ε_model − ε_table| / |ε_table|`.
    pub max_relative_residual: f64,
    pub max_iterations: usize,
    /// Minimum number of table rows inside the band.
    pub min_rows: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_relative_residual: 0.15,
            max_iterations: 400,
            min_rows: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: DrudeLorentzModel,
    pub rms_relative: f64,
    pub max_relative: f64,
    pub iterations: usize,
}

fn fit_residuals(params: &[f64], data: &[(f64, C64)]) -> DVector<f64> {
    let model = DrudeLorentzModel::from_params(params);
    let mut r = DVector::zeros(2 * data.len());
    for (k, (omega, target)) in data.iter().enumerate() {
        let diff = (model.eval(C64::new(*omega, 0.0)) - target) / target.norm();
        r[2 * k] = diff.re;
        r[2 * k + 1] = diff.im;
    }
    r
}

/// Damped least-squares (Levenberg-Marquardt) fit of a Drude-Lorentz model to the
/// table rows inside `band` (nm).
///
/// Parameters are fitted in logarithmic form, so every iterate is passive and has
/// `ε∞ > 1`. Residuals are weighted by `1/|ε_table|`. The number of Lorentz poles is
/// taken from `seed`.
pub fn fit_drude_lorentz(
    table: &PermittivityTable,
    seed: &DrudeLorentzModel,
    band: (f64, f64),
    options: &FitOptions,
) -> Result<FitReport> {
    seed.validate()?;
    if !(band.0 < band.1) {
        return Err(Error::Domain(format!("empty wavelength band {band:?}")));
    }
    let data: Vec<(f64, C64)> = table
        .rows_in_band(band)
        .map(|r| {
            (
                omega_from_wavelength_nm(r.wavelength_nm),
                C64::new(r.eps_re, r.eps_im),
            )
        })
        .collect();
    if data.len() < options.min_rows {
        return Err(Error::Domain(format!(
            "band {band:?} holds {} table rows, need at least {}",
            data.len(),
            options.min_rows
        )));
    }

    let mut params = seed.to_params();
    let n = params.len();
    let mut residual = fit_residuals(&params, &data);
    let mut cost = residual.norm_squared();
    let mut damping = 1e-3;
    let mut iterations = 0;
    for it in 0..options.max_iterations {
        iterations = it + 1;
        let mut jac = DMatrix::zeros(residual.len(), n);
        for j in 0..n {
            let h = 1e-6 * params[j].abs().max(1.0);
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus[j] += h;
            minus[j] -= h;
            let col = (fit_residuals(&plus, &data) - fit_residuals(&minus, &data)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &residual;
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for d in 0..n {
                a[(d, d)] += damping * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&grad)) else {
                damping *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let trial_residual = fit_residuals(&trial, &data);
            let trial_cost = trial_residual.norm_squared();
            if trial_cost.is_finite() && trial_cost < cost {
                params = trial;
                residual = trial_residual;
                cost = trial_cost;
                damping = (damping * 0.3).max(1e-12);
                improved = true;
                break;
            }
            damping *= 10.0;
        }
        if !improved || cost < 1e-28 || grad.norm() < 1e-14 {
            break;
        }
    }

    let model = DrudeLorentzModel::from_params(&params);
    let per_point: Vec<f64> = data
        .iter()
        .map(|(omega, target)| (model.eval(C64::new(*omega, 0.0)) - target).norm() / target.norm())
        .collect();
    let max_relative = per_point.iter().cloned().fold(0.0, f64::max);
    let rms_relative =
        (per_point.iter().map(|v| v * v).sum::<f64>() / per_point.len() as f64).sqrt();
    if max_relative > options.max_relative_residual {
        return Err(Error::FitFailure {
            residual: max_relative,
            threshold: options.max_relative_residual,
        });
    }
    Ok(FitReport {
        model,
        rms_relative,
        max_relative,
        iterations,
    })
}
