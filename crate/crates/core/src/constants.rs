//! Physical constants (CODATA 2018) and unit helpers.

use std::f64::consts::PI;

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant [J s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity [F/m].
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Metres per nanometre.
pub const NM: f64 = 1e-9;
/// One debye [C m].
pub const DEBYE: f64 = 3.335_640_952e-30;

/// Angular frequency [rad/s] of a vacuum wavelength given in nm.
pub fn omega_from_wavelength_nm(lambda_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (lambda_nm * NM)
}

/// Vacuum wavelength [nm] of an angular frequency [rad/s].
pub fn wavelength_nm_from_omega(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega / NM
}

/// Free-space spontaneous emission rate of a two-level emitter [1/s].
pub fn free_space_decay_rate(omega: f64, dipole: f64) -> f64 {
    omega.powi(3) * dipole * dipole / (3.0 * PI * EPSILON_0 * HBAR * SPEED_OF_LIGHT.powi(3))
}
