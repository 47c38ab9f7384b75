//! Two-level emitter near the sphere: dressed decay rate, frequency shift and
//! drive enhancement, optical Bloch steady state with pure dephasing, and the
//! normally ordered atomic quadrature variance.
//!
//! Normalised variables: `Γ = γ + 2γ*`, `x = 2γ*/γ`, `δ = 2δ_L/Γ`,
//! `z = √2 |Ω| / √(γΓ)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{
    free_space_decay_rate, omega_from_wavelength_nm, EPSILON_0, HBAR, SPEED_OF_LIGHT,
};
use crate::green::{
    effective_green, plane_wave_local_field, scattered_green_adaptive, CMat3, EffectiveOptions,
    Environment, GreenPart, PlaneWave, SeriesOptions, Vec3,
};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    /// Position [nm].
    pub position_nm: Vec3,
    /// Dipole moment magnitude [C m].
    pub dipole: f64,
    pub orientation: Vec3,
    /// Bare transition frequency [rad/s].
    pub omega: f64,
    /// Pure dephasing rate [1/s].
    pub gamma_star: f64,
}

impl Emitter {
    pub fn new(
        position_nm: Vec3,
        dipole: f64,
        orientation: Vec3,
        omega: f64,
        gamma_star: f64,
    ) -> Result<Self> {
        if !(dipole > 0.0 && dipole.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dipole moment must be positive, got {dipole}"
            )));
        }
        if (orientation.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "dipole orientation must be a unit vector".into(),
            ));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "transition frequency must be positive, got {omega}"
            )));
        }
        if !(gamma_star >= 0.0 && gamma_star.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pure dephasing must be non-negative, got {gamma_star}"
            )));
        }
        Ok(Self {
            position_nm,
            dipole,
            orientation,
            omega,
            gamma_star,
        })
    }

    /// Emitter on the +z axis at distance `s_nm` from a sphere of radius `radius_nm`, dipole radial.
    pub fn radial(
        radius_nm: f64,
        s_nm: f64,
        lambda_nm: f64,
        dipole: f64,
        gamma_star: f64,
    ) -> Result<Self> {
        Self::new(
            Vec3::new(0.0, 0.0, radius_nm + s_nm),
            dipole,
            Vec3::z(),
            omega_from_wavelength_nm(lambda_nm),
            gamma_star,
        )
    }

    pub fn gamma_0(&self) -> f64 {
        free_space_decay_rate(self.omega, self.dipole)
    }

    /// `d̂ · M · d̂`
    pub fn project(&self, m: &CMat3) -> C64 {
        let d = self.orientation;
        let mut v = C64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                v += d[i] * m[(i, j)] * d[j];
            }
        }
        v
    }
}

/// Total decay rate `γ = γ₀ [1 + (6πc/ω) d̂·Im G_s(r_E, r_E)·d̂]`.
pub fn decay_rate(emitter: &Emitter, env: &Environment, opts: &SeriesOptions) -> Result<f64> {
    env.check_exterior(&emitter.position_nm)?;
    let gamma_0 = emitter.gamma_0();
    let Some(sphere) = env.sphere() else {
        return Ok(gamma_0);
    };
    let r = emitter.position_nm;
    let gs = scattered_green_adaptive(sphere, &r, &r, emitter.omega, opts)?.matrix;
    let enhancement = 1.0 + 6.0 * PI * SPEED_OF_LIGHT / emitter.omega * emitter.project(&gs).im;
    if !(enhancement > 0.0) {
        return Err(Error::Convergence(format!(
            "non-positive decay rate enhancement {enhancement}"
        )));
    }
    Ok(gamma_0 * enhancement)
}

/// Dressed transition frequency `ω̃_E`; only the sphere-scattered field shifts the line.
pub fn lamb_shift(emitter: &Emitter, env: &Environment, opts: &EffectiveOptions) -> Result<f64> {
    env.check_exterior(&emitter.position_nm)?;
    if env.sphere().is_none() {
        return Ok(emitter.omega);
    }
    let r = emitter.position_nm;
    let g = effective_green(env, &r, &r, emitter.omega, GreenPart::Scattered, opts)?;
    let w = emitter.omega;
    let coupling = w * w * emitter.dipole * emitter.dipole
        / (EPSILON_0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT * HBAR);
    Ok(w - coupling * emitter.project(&g.matrix).re)
}

/// Default drive: plane wave arriving from +x (the far detector side), polarised along z.
pub fn default_drive() -> PlaneWave {
    PlaneWave {
        direction: [-1.0, 0.0, 0.0],
        polarization: [0.0, 0.0, 1.0],
    }
}

/// Local Rabi frequency relative to the bare one, `d̂·E_local / d̂·E_incident` at `r_E`.
pub fn rabi_enhancement(
    emitter: &Emitter,
    env: &Environment,
    drive: &PlaneWave,
    opts: &SeriesOptions,
) -> Result<C64> {
    let r = emitter.position_nm;
    let local = plane_wave_local_field(env, drive, &r, emitter.omega, opts)?;
    let bare = plane_wave_local_field(&Environment::FreeSpace, drive, &r, emitter.omega, opts)?;
    let d = emitter.orientation;
    let project = |v: &crate::green::CVec3| v.x * d.x + v.y * d.y + v.z * d.z;
    let denominator = project(&bare);
    if denominator.norm() < 1e-12 {
        return Err(Error::InvalidParameter(
            "drive polarization is orthogonal to the dipole".into(),
        ));
    }
    Ok(project(&local) / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedRates {
    pub gamma: f64,
    pub gamma_0: f64,
    pub gamma_star: f64,
    pub omega: f64,
    pub omega_tilde: f64,
    pub rabi_enhancement: C64,
    /// `2γ*/γ`
    pub x: f64,
    /// Phase of the local drive, `arg(Ω/Ω₀)`.
    pub laser_phase: f64,
}

impl DressedRates {
    pub fn free_space(emitter: &Emitter) -> Self {
        let gamma = emitter.gamma_0();
        Self {
            gamma,
            gamma_0: gamma,
            gamma_star: emitter.gamma_star,
            omega: emitter.omega,
            omega_tilde: emitter.omega,
            rabi_enhancement: C64::new(1.0, 0.0),
            x: 2.0 * emitter.gamma_star / gamma,
            laser_phase: 0.0,
        }
    }

    pub fn purcell(&self) -> f64 {
        self.gamma / self.gamma_0
    }

    /// `(ω_E − ω̃_E)/γ₀`
    pub fn shift_over_gamma_0(&self) -> f64 {
        (self.omega - self.omega_tilde) / self.gamma_0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressOptions {
    pub effective: EffectiveOptions,
    /// Skip the frequency-shift integral and keep `ω̃_E = ω_E`.
    pub include_shift: bool,
}

impl Default for DressOptions {
    fn default() -> Self {
        Self {
            effective: EffectiveOptions::default(),
            include_shift: true,
        }
    }
}

pub fn dressed_rates(
    emitter: &Emitter,
    env: &Environment,
    drive: &PlaneWave,
    opts: &DressOptions,
) -> Result<DressedRates> {
    let series = &opts.effective.series;
    let gamma = decay_rate(emitter, env, series)?;
    let omega_tilde = if opts.include_shift {
        lamb_shift(emitter, env, &opts.effective)?
    } else {
        emitter.omega
    };
    let rabi = rabi_enhancement(emitter, env, drive, series)?;
    Ok(DressedRates {
        gamma,
        gamma_0: emitter.gamma_0(),
        gamma_star: emitter.gamma_star,
        omega: emitter.omega,
        omega_tilde,
        rabi_enhancement: rabi,
        x: 2.0 * emitter.gamma_star / gamma,
        laser_phase: rabi.arg(),
    })
}

/// Origin of the free-space detuning `δ₀ = 2δ_L0/γ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningReference {
    /// Laser detuning counted from the bare line `ω_E`.
    #[default]
    Bare,
    /// Laser detuning counted from the dressed line `ω̃_E`.
    Dressed,
}

/// Maps free-space normalised `(δ₀, z₀)` to the dressed `(δ, z)`.
pub fn normalized_params(
    delta_0: f64,
    z_0: f64,
    dressed: &DressedRates,
    reference: DetuningReference,
) -> (f64, f64) {
    let purcell = dressed.purcell();
    let shift = match reference {
        DetuningReference::Bare => 2.0 * dressed.shift_over_gamma_0(),
        DetuningReference::Dressed => 0.0,
    };
    let delta = (delta_0 - shift) / (purcell * (1.0 + dressed.x));
    let z = z_0 * dressed.rabi_enhancement.norm() / (purcell * (1.0 + dressed.x).sqrt());
    (delta, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    /// Slowly varying coherence `⟨σ̃⟩`.
    pub sigma: C64,
    pub sigma_z: f64,
    pub phi_dep: f64,
}

fn check_bloch_inputs(delta: f64, z: f64, x: f64) -> Result<()> {
    if !(delta.is_finite() && z >= 0.0 && z.is_finite() && x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need finite δ, z ≥ 0, x ≥ 0; got δ={delta}, z={z}, x={x}"
        )));
    }
    Ok(())
}

/// Stationary solution of the Bloch equations with pure dephasing.
pub fn bloch_steady_state(delta: f64, z: f64, x: f64, phi_l: f64) -> Result<BlochState> {
    check_bloch_inputs(delta, z, x)?;
    let d2 = 1.0 + delta * delta;
    let denom = d2 + z * z;
    let phi_dep = 1f64.atan2(-delta);
    let magnitude = (0.5 / (1.0 + x)).sqrt() * z * d2.sqrt() / denom;
    Ok(BlochState {
        sigma: C64::from_polar(magnitude, phi_l + phi_dep),
        sigma_z: -d2 / denom,
        phi_dep,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Time in units of `1/γ`.
    pub times: Vec<f64>,
    pub sigma: Vec<C64>,
    pub sigma_z: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> (C64, f64) {
        (*self.sigma.last().unwrap(), *self.sigma_z.last().unwrap())
    }
}

/// Integrates the modified Bloch equations with fixed-step RK4.
///
/// Time is measured in lifetimes `1/γ`; `dt` must satisfy
/// `dt · max(1 + x, |Ω|/γ, |δ_L|/γ) < 0.1`.
pub fn bloch_transient(
    delta: f64,
    z: f64,
    x: f64,
    phi_l: f64,
    initial: (C64, f64),
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    check_bloch_inputs(delta, z, x)?;
    // rates in units of γ
    let big_gamma = 1.0 + x;
    let omega = C64::from_polar(z * (big_gamma / 2.0).sqrt(), phi_l);
    let delta_l = 0.5 * delta * big_gamma;
    let fastest = big_gamma.max(omega.norm()).max(delta_l.abs());
    if !(dt > 0.0) || dt * fastest >= 0.1 {
        return Err(Error::InvalidParameter(format!(
            "step {dt} does not resolve the fastest rate {fastest:.3} (need dt·rate < 0.1)"
        )));
    }
    let i = C64::new(0.0, 1.0);
    let rhs = |s: C64, sz: f64| -> (C64, f64) {
        let ds = (i * delta_l - 0.5 * big_gamma) * s - 0.5 * i * omega * sz;
        let dsz = -(1.0 + sz) - (i * (omega.conj() * s - omega * s.conj())).re;
        (ds, dsz)
    };
    let steps = (t_end / dt).ceil() as usize;
    let mut out = Trajectory {
        times: Vec::with_capacity(steps + 1),
        sigma: Vec::with_capacity(steps + 1),
        sigma_z: Vec::with_capacity(steps + 1),
    };
    let (mut s, mut sz) = initial;
    out.times.push(0.0);
    out.sigma.push(s);
    out.sigma_z.push(sz);
    for step in 1..=steps {
        let (k1s, k1z) = rhs(s, sz);
        let (k2s, k2z) = rhs(s + 0.5 * dt * k1s, sz + 0.5 * dt * k1z);
        let (k3s, k3z) = rhs(s + 0.5 * dt * k2s, sz + 0.5 * dt * k2z);
        let (k4s, k4z) = rhs(s + dt * k3s, sz + dt * k3z);
        s += dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        sz += dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        out.times.push(step as f64 * dt);
        out.sigma.push(s);
        out.sigma_z.push(sz);
    }
    Ok(out)
}

/// Normally ordered variance of the emitter quadrature,
/// `(1 + ⟨σ_z⟩) − 2|⟨σ̃⟩|² (1 + cos φ)`, where `φ` collects every phase of the
/// measured quadrature; `φ = 0` is the most squeezed one.
pub fn atomic_variance(state: &BlochState, phase: f64) -> f64 {
    (1.0 + state.sigma_z) - 2.0 * state.sigma.norm_sqr() * (1.0 + phase.cos())
}

/// Closed form of `atomic_variance` for the stationary state.
pub fn atomic_variance_closed_form(delta: f64, z: f64, x: f64, phase: f64) -> f64 {
    let d2 = 1.0 + delta * delta;
    let denom = d2 + z * z;
    z * z / denom * (1.0 - d2 * (1.0 + phase.cos()) / ((1.0 + x) * denom))
}

/// `atomic_variance_closed_form` at the optimal quadrature.
pub fn optimal_atomic_variance(delta: f64, z: f64, x: f64) -> f64 {
    atomic_variance_closed_form(delta, z, x, 0.0)
}

/// Largest `z²` that still gives squeezing: `(1+δ²)(1−x)/(1+x)`, zero for `x ≥ 1`.
pub fn squeezing_threshold(delta: f64, x: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else {
        (1.0 + delta * delta) * (1.0 - x) / (1.0 + x)
    }
}

/// Whether the optimal quadrature is squeezed at `(δ, z, x)`.
pub fn is_squeezed(delta: f64, z: f64, x: f64) -> bool {
    z > 0.0 && z * z < squeezing_threshold(delta, x)
}
