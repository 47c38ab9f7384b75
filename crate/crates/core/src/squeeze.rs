//! Squeezing amplitude at a detection point, the normally ordered field
//! variance `(Δ𝓔_i)² = |g_i|² × atomic variance`, and balanced homodyne
//! photocounts.
//!
//! `g = (ω_E²/ε₀c²) G_eff(r, r_E)·d`, with `γ_i = 2 Im g_i / ħ` and
//! `δω_i = −Re g_i / ħ`, so that `|g_i| = ħ √((γ_i/2)² + δω_i²)` and
//! `φ_i = arg g_i`.

use serde::{Deserialize, Serialize};

use crate::constants::{EPSILON_0, HBAR, SPEED_OF_LIGHT};
use crate::emitter::{atomic_variance, BlochState, Emitter};
use crate::green::{
    effective_green, to_spherical_components, total_green, CVec3, EffectiveOptions, Environment,
    GreenPart, Vec3,
};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMode {
    /// Off-resonant frequencies included through the contour-rotated integral.
    Full,
    /// Green tensor at the emitter frequency only.
    FarField,
}

/// Spherical component at the detection point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    R,
    Theta,
    Phi,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Self::R => 0,
            Self::Theta => 1,
            Self::Phi => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldAmplitude {
    pub position_nm: Vec3,
    pub mode: AmplitudeMode,
    /// `(r, θ, φ)` components [V/m].
    pub g: [C64; 3],
    pub gamma: [f64; 3],
    pub delta_omega: [f64; 3],
}

impl FieldAmplitude {
    fn from_g(position_nm: Vec3, mode: AmplitudeMode, g: [C64; 3]) -> Self {
        Self {
            position_nm,
            mode,
            g,
            gamma: g.map(|c| 2.0 * c.im / HBAR),
            delta_omega: g.map(|c| -c.re / HBAR),
        }
    }

    pub fn magnitude(&self, c: Component) -> f64 {
        let i = c.index();
        HBAR * (0.25 * self.gamma[i] * self.gamma[i] + self.delta_omega[i] * self.delta_omega[i])
            .sqrt()
    }

    pub fn phase(&self, c: Component) -> f64 {
        let i = c.index();
        (0.5 * self.gamma[i]).atan2(-self.delta_omega[i])
    }
}

/// `(ω_E²/ε₀c²) G·d` resolved into spherical components at `r`.
fn amplitude_vector(emitter: &Emitter, g: &crate::green::CMat3, r: &Vec3) -> [C64; 3] {
    let w = emitter.omega;
    let scale = w * w / (EPSILON_0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT) * emitter.dipole;
    let d = emitter.orientation.map(|c| C64::new(c, 0.0));
    let v: CVec3 = g * d * C64::new(scale, 0.0);
    to_spherical_components(&v, r)
}

fn check_distinct(emitter: &Emitter, r: &Vec3) -> Result<()> {
    if (r - emitter.position_nm).norm() == 0.0 {
        return Err(Error::Singularity(
            "detection point coincides with the emitter".into(),
        ));
    }
    Ok(())
}

pub fn field_amplitude(
    emitter: &Emitter,
    env: &Environment,
    r: &Vec3,
    mode: AmplitudeMode,
    opts: &EffectiveOptions,
) -> Result<FieldAmplitude> {
    check_distinct(emitter, r)?;
    env.check_exterior(r)?;
    env.check_exterior(&emitter.position_nm)?;
    let g = match mode {
        AmplitudeMode::FarField => {
            total_green(env, r, &emitter.position_nm, emitter.omega, &opts.series)?.matrix
        }
        AmplitudeMode::Full => {
            effective_green(
                env,
                r,
                &emitter.position_nm,
                emitter.omega,
                GreenPart::Total,
                opts,
            )?
            .matrix
        }
    };
    Ok(FieldAmplitude::from_g(
        *r,
        mode,
        amplitude_vector(emitter, &g, r),
    ))
}

/// Decay-rate vector `(2ω_E²/ħε₀c²) Im G(r, r_E)·d` in spherical components at `r`.
pub fn gamma_vector(
    emitter: &Emitter,
    env: &Environment,
    r: &Vec3,
    opts: &EffectiveOptions,
) -> Result<[f64; 3]> {
    Ok(field_amplitude(emitter, env, r, AmplitudeMode::FarField, opts)?.gamma)
}

pub fn delta_omega_vector(
    emitter: &Emitter,
    env: &Environment,
    r: &Vec3,
    mode: AmplitudeMode,
    opts: &EffectiveOptions,
) -> Result<[f64; 3]> {
    Ok(field_amplitude(emitter, env, r, mode, opts)?.delta_omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceResult {
    /// `(Δ𝓔_i)²` [V²/m²].
    pub value: f64,
    /// Value divided by the free-space `|g_{i,0}|²`, when a reference is given.
    pub normalized: Option<f64>,
    /// `|g_i|² ⟨σ†σ⟩` [V²/m²], the intensity radiated into the component.
    pub source_intensity: f64,
    pub squeezed: bool,
}

/// `|g_i|²` times the atomic variance at quadrature phase `phase` (0 is optimal).
pub fn field_variance(
    amplitude: &FieldAmplitude,
    component: Component,
    reference_magnitude: Option<f64>,
    state: &BlochState,
    phase: f64,
) -> VarianceResult {
    let g2 = amplitude.magnitude(component).powi(2);
    let value = g2 * atomic_variance(state, phase);
    VarianceResult {
        value,
        normalized: reference_magnitude.map(|m| value / (m * m)),
        source_intensity: g2 * 0.5 * (1.0 + state.sigma_z),
        squeezed: value < 0.0,
    }
}

/// Source counts above this fraction of the oscillator counts invalidate the strong-oscillator limit.
pub const HOMODYNE_VALIDITY_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneConfig {
    /// Detector quantum efficiency ξ in (0, 1].
    pub efficiency: f64,
    /// Counting window Δt [s].
    pub window_s: f64,
    /// Local oscillator amplitude |α|, with |α|² in photons per second.
    pub lo_amplitude: f64,
    pub lo_phase: f64,
    pub quadrature_angle: f64,
    /// Photon flux per unit `(V/m)²` of the detected mode.
    pub flux_per_field_squared: f64,
}

impl HomodyneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency >= 0.0 && self.efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "efficiency {} outside [0, 1]",
                self.efficiency
            )));
        }
        if !(self.window_s >= 0.0 && self.lo_amplitude >= 0.0 && self.flux_per_field_squared >= 0.0)
        {
            return Err(Error::InvalidParameter(
                "window, oscillator amplitude and flux scale must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Mean photocount `ξ Δt |α|²`.
pub fn photocount_mean(cfg: &HomodyneConfig) -> f64 {
    cfg.efficiency * cfg.window_s * cfg.lo_amplitude * cfg.lo_amplitude
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneSignal {
    /// `(⟨Δn²⟩ − n̄)/n̄`; negative values are sub-shot-noise.
    pub value: f64,
    pub mean_counts: f64,
    pub source_counts: f64,
    /// False when the source counts exceed `HOMODYNE_VALIDITY_FRACTION` of `n̄`.
    pub valid: bool,
}

/// Shot-noise-normalised photocount excess `ξ Δt ⟨:ΔÊ²:⟩`.
pub fn homodyne_signal(variance: &VarianceResult, cfg: &HomodyneConfig) -> HomodyneSignal {
    let counts_per_field2 = cfg.efficiency * cfg.window_s * cfg.flux_per_field_squared;
    let mean_counts = photocount_mean(cfg);
    let source_counts = counts_per_field2 * variance.source_intensity;
    HomodyneSignal {
        value: counts_per_field2 * variance.value,
        mean_counts,
        source_counts,
        valid: source_counts <= HOMODYNE_VALIDITY_FRACTION * mean_counts,
    }
}
