//! Dyadic Green tensor of vacuum and of a single sphere centred at the origin.
//!
//! Convention: `∇×∇×G − k²G = δ(r₁ − r₂) I`, so that `Im G_ii(r, r) = ω / (6πc)`
//! in vacuum. Positions cross the API in nm; tensors are in 1/m.
//!
//! The scattered part is the vector spherical wave series
//!
//! ```text
//! G_s = (ik/4π) Σ_{n,m,e/o} c_nm [B_M M⁽³⁾(r₁) ⊗ M⁽³⁾(r₂) + B_N N⁽³⁾(r₁) ⊗ N⁽³⁾(r₂)]
//! ```
//!
//! evaluated in a frame rotated so that `r₂` lies on the +z axis, where only
//! `m = 0, 1` survive. Every wave function is formed from ratio sequences,
//! so the series also works at imaginary frequency where `h_n` and `j_n`
//! individually overflow.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::{NM, SPEED_OF_LIGHT};
use crate::materials::DrudeLorentzModel;
use crate::quadrature::{integrate_semi_infinite, QuadratureOptions};
use crate::specfun::{
    bessel_j_ratios, hankel_ratios, legendre_seq, log_derivatives, mie_angular_seq, sin_scaled,
    MAX_ORDER,
};
use crate::{Error, Result, C64};

pub type Vec3 = Vector3<f64>;
pub type CVec3 = Vector3<C64>;
pub type CMat3 = Matrix3<C64>;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Imaginary-frequency tensors decay as `exp(−κ(r₁ + r₂ − 2R))`; beyond this
/// exponent they are dropped.
const IMAGINARY_DECAY_CUTOFF: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSystem {
    pub radius_nm: f64,
    pub material: DrudeLorentzModel,
}

impl SphereSystem {
    pub fn new(radius_nm: f64, material: DrudeLorentzModel) -> Result<Self> {
        if !(radius_nm > 0.0 && radius_nm.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sphere radius must be positive, got {radius_nm}"
            )));
        }
        material.validate()?;
        Ok(Self {
            radius_nm,
            material,
        })
    }

    fn check_exterior(&self, r: &Vec3) -> Result<()> {
        if r.norm() <= self.radius_nm {
            return Err(Error::Domain(format!(
                "point ({:.3}, {:.3}, {:.3}) nm is not outside the sphere of radius {} nm",
                r.x, r.y, r.z, self.radius_nm
            )));
        }
        Ok(())
    }
}

/// Vacuum, or vacuum plus one sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Environment {
    FreeSpace,
    Sphere(SphereSystem),
}

impl Environment {
    /// A radius of zero gives free space.
    pub fn with_radius(radius_nm: f64, material: DrudeLorentzModel) -> Result<Self> {
        if radius_nm == 0.0 {
            Ok(Self::FreeSpace)
        } else {
            Ok(Self::Sphere(SphereSystem::new(radius_nm, material)?))
        }
    }

    pub fn sphere(&self) -> Option<&SphereSystem> {
        match self {
            Self::FreeSpace => None,
            Self::Sphere(s) => Some(s),
        }
    }

    pub fn radius_nm(&self) -> f64 {
        self.sphere().map_or(0.0, |s| s.radius_nm)
    }

    pub fn check_exterior(&self, r: &Vec3) -> Result<()> {
        match self {
            Self::FreeSpace => Ok(()),
            Self::Sphere(s) => s.check_exterior(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicGreen {
    /// Cartesian components [1/m].
    pub matrix: CMat3,
    /// Field point [nm].
    pub r1: Vec3,
    /// Source point [nm].
    pub r2: Vec3,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MieCoefficients {
    pub order: usize,
    pub b_m: C64,
    pub b_n: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Relative size of the neglected terms.
    pub tol: f64,
    pub max_order: usize,
    /// Terms below this magnitude [1/m] also count as converged.
    #[serde(default)]
    pub abs_tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_order: MAX_ORDER,
            abs_tol: 0.0,
        }
    }
}

/// Unit vectors `(e_r, e_θ, e_φ)` at `r`; on the z axis `φ = 0` is used.
pub fn spherical_unit_vectors(r: &Vec3) -> [Vec3; 3] {
    let rho = r.x.hypot(r.y);
    let theta = rho.atan2(r.z);
    let phi = if rho == 0.0 { 0.0 } else { r.y.atan2(r.x) };
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [
        Vec3::new(st * cp, st * sp, ct),
        Vec3::new(ct * cp, ct * sp, -st),
        Vec3::new(-sp, cp, 0.0),
    ]
}

/// Components `(v_r, v_θ, v_φ)` of a Cartesian vector at position `r`.
pub fn to_spherical_components(v: &CVec3, r: &Vec3) -> [C64; 3] {
    let basis = spherical_unit_vectors(r);
    basis.map(|e| v.x * e.x + v.y * e.y + v.z * e.z)
}

fn real_to_complex(v: &Vec3) -> CVec3 {
    v.map(|c| C64::new(c, 0.0))
}

/// Vacuum tensor for separation `d` [m] at complex wavenumber `k` [1/m].
pub fn free_space_matrix(d: &Vec3, k: C64) -> Result<CMat3> {
    let dist = d.norm();
    if dist == 0.0 {
        return Err(Error::Singularity(
            "free-space Green tensor at coincident points".into(),
        ));
    }
    let u = d / dist;
    let kd = k * dist;
    let inv = C64::new(1.0, 0.0) / kd;
    let envelope = (I * kd).exp() / (4.0 * PI * dist);
    let a = envelope * (1.0 + I * inv - inv * inv);
    let b = envelope * (-1.0 - 3.0 * I * inv + 3.0 * inv * inv);
    let uu = u * u.transpose();
    Ok(CMat3::identity() * a + uu.map(|c| b * c))
}

pub fn free_space_green(r1: &Vec3, r2: &Vec3, omega: f64) -> Result<DyadicGreen> {
    check_frequency(omega)?;
    let matrix = free_space_matrix(&((r1 - r2) * NM), C64::new(omega / SPEED_OF_LIGHT, 0.0))?;
    Ok(DyadicGreen {
        matrix,
        r1: *r1,
        r2: *r2,
        omega,
    })
}

/// `Im G_ii(r, r, ω)` of vacuum, the finite part of the coincidence limit.
pub fn free_space_green_imag_coincident(omega: f64) -> f64 {
    omega / (6.0 * PI * SPEED_OF_LIGHT)
}

fn check_frequency(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {omega}"
        )));
    }
    Ok(())
}

/// Wavenumber and sphere permittivity at a point of the complex frequency plane.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Wave {
    pub k: C64,
    pub eps: C64,
}

impl Wave {
    pub(crate) fn real(material: &DrudeLorentzModel, omega: f64) -> Result<Self> {
        Ok(Self {
            k: C64::new(omega / SPEED_OF_LIGHT, 0.0),
            eps: material.permittivity(omega)?,
        })
    }

    pub(crate) fn imaginary(material: &DrudeLorentzModel, xi: f64) -> Result<Self> {
        Ok(Self {
            k: C64::new(0.0, xi / SPEED_OF_LIGHT),
            eps: C64::new(material.permittivity_imag_axis(xi)?, 0.0),
        })
    }
}

/// Per-order ingredients shared by the Green series and the plane-wave field.
struct MieTerms {
    x: C64,
    /// `j_n(x) / j_{n-1}(x)`
    rj: Vec<C64>,
    /// `h_n(x) / h_{n-1}(x)`
    rh: Vec<C64>,
    t_a: Vec<C64>,
    t_b: Vec<C64>,
}

impl MieTerms {
    fn new(wave: Wave, radius_m: f64, n_max: usize) -> Self {
        let x = wave.k * radius_m;
        let m = wave.eps.sqrt();
        let rj = bessel_j_ratios(n_max, x);
        let rh = hankel_ratios(n_max, x);
        let dn = log_derivatives(n_max, m * x);
        let mut t_a = vec![C64::new(0.0, 0.0); n_max + 1];
        let mut t_b = vec![C64::new(0.0, 0.0); n_max + 1];
        for n in 1..=n_max {
            let nx = n as f64 / x;
            let inv_rj = C64::new(1.0, 0.0) / rj[n];
            let inv_rh = C64::new(1.0, 0.0) / rh[n];
            let a = dn[n] / m + nx;
            let b = m * dn[n] + nx;
            t_a[n] = (a - inv_rj) / (a - inv_rh);
            t_b[n] = (b - inv_rj) / (b - inv_rh);
        }
        Self {
            x,
            rj,
            rh,
            t_a,
            t_b,
        }
    }
}

/// Exterior reflection coefficients `B_M = −b_n`, `B_N = −a_n`.
pub fn mie_reflection_coefficients(
    system: &SphereSystem,
    n: usize,
    omega: f64,
) -> Result<MieCoefficients> {
    check_frequency(omega)?;
    if n == 0 {
        return Err(Error::Domain("Mie coefficients start at order 1".into()));
    }
    if n > MAX_ORDER {
        return Err(Error::OrderTooLarge {
            order: n,
            max: MAX_ORDER,
        });
    }
    let wave = Wave::real(&system.material, omega)?;
    let terms = MieTerms::new(wave, system.radius_nm * NM, n);
    let x = terms.x;
    // j_n / h_n = (j_0 / h_0) Π r_k / ρ_k, with j_0 / h_0 = i sin(x) e^{-ix}
    let mut ratio = I * sin_scaled(x) * (x.im.abs() - I * x).exp();
    for k in 1..=n {
        ratio *= terms.rj[k] / terms.rh[k];
    }
    Ok(MieCoefficients {
        order: n,
        b_m: -ratio * terms.t_b[n],
        b_n: -ratio * terms.t_a[n],
    })
}

/// Rotation taking the direction of `r` onto +z.
fn rotation_to_z(r: &Vec3) -> Rotation3<f64> {
    let z = Vec3::z();
    let u = r.normalize();
    if (u - z).norm() < 1e-15 {
        return Rotation3::identity();
    }
    if (u + z).norm() < 1e-12 {
        return Rotation3::from_axis_angle(&Vec3::x_axis(), PI);
    }
    Rotation3::rotation_between(&u, &z).unwrap_or_else(|| {
        Rotation3::from_axis_angle(
            &Unit::new_normalize(u.cross(&z)),
            u.dot(&z).clamp(-1.0, 1.0).acos(),
        )
    })
}

/// Outcome of one series evaluation.
struct SeriesSum {
    matrix: CMat3,
    /// Order after which the remaining terms fell below tolerance.
    order: usize,
}

/// Number of orders to prepare before the adaptive sum starts.
fn order_estimate(x: C64, radius: f64, r1: f64, r2: f64, tol: f64) -> usize {
    let xm = x.norm();
    let wiscombe = xm + 4.0 * xm.cbrt() + 10.0;
    let ratio = radius * radius / (r1 * r2);
    let geometric = if ratio < 1.0 {
        tol.max(1e-300).ln() / ratio.ln()
    } else {
        MAX_ORDER as f64
    };
    (wiscombe + geometric + 10.0).ceil() as usize
}

/// Scattered series for a source on the +z axis at height `d2` [m] and field point `r1` [m].
/// `fixed` sums exactly that many orders instead of stopping adaptively.
fn axis_series(
    wave: Wave,
    radius: f64,
    r1: &Vec3,
    d2: f64,
    opts: &SeriesOptions,
    fixed: Option<usize>,
) -> Result<SeriesSum> {
    let cap = opts.max_order.min(MAX_ORDER);
    let k = wave.k;
    let x = k * radius;
    let rho1 = r1.norm();
    let y1 = k * rho1;
    let y2 = k * d2;
    let decay = x.im.abs() - (I * x).re + (I * y1).re + (I * y2).re;
    let envelope = (x.im.abs() - I * x + I * y1 + I * y2).exp();
    if envelope == C64::new(0.0, 0.0) || (k.re == 0.0 && decay < -IMAGINARY_DECAY_CUTOFF) {
        return Ok(SeriesSum {
            matrix: CMat3::zeros(),
            order: 0,
        });
    }
    let prefactor = I * k / (4.0 * PI) * envelope;

    let mut n_alloc = match fixed {
        Some(n) => n,
        None => order_estimate(x, radius, rho1, d2, opts.tol)
            .min(cap)
            .max(4),
    };
    if n_alloc > MAX_ORDER {
        return Err(Error::OrderTooLarge {
            order: n_alloc,
            max: MAX_ORDER,
        });
    }
    let min_order = (x.re.abs().ceil() as usize).max(1);
    let tail = tail_factor(radius * radius / (rho1 * d2));

    let basis = spherical_unit_vectors(r1);
    let ct = if rho1 > 0.0 {
        (r1.z / rho1).clamp(-1.0, 1.0)
    } else {
        1.0
    };
    let st = r1.x.hypot(r1.y) / rho1;
    let (sp, cp) = if r1.x == 0.0 && r1.y == 0.0 {
        (0.0, 1.0)
    } else {
        r1.y.atan2(r1.x).sin_cos()
    };

    loop {
        let terms = MieTerms::new(wave, radius, n_alloc);
        let rh1 = hankel_ratios(n_alloc, y1);
        let rh2 = hankel_ratios(n_alloc, y2);
        let legendre = legendre_seq(n_alloc, ct);
        let angular = mie_angular_seq(n_alloc, ct);

        let mut p = sin_scaled(x) / x * (-I / x);
        let mut q1 = x / y1;
        let mut q2 = x / y2;
        let mut sum = Matrix3::<C64>::zeros();
        let mut small_run = 0;
        let mut prev_norm = f64::INFINITY;
        let mut last_norm = 0.0;
        for n in 1..=n_alloc {
            p *= terms.rj[n] * terms.rh[n];
            q1 *= rh1[n] / terms.rh[n];
            q2 *= rh2[n] / terms.rh[n];
            let nf = n as f64;
            let nn1 = nf * (nf + 1.0);
            let base = -p * q1 * q2;
            let s_n = base * terms.t_a[n];
            let s_m = base * terms.t_b[n];
            let f1 = C64::new(1.0, 0.0) / rh1[n] - nf / y1;
            let f2 = C64::new(1.0, 0.0) / rh2[n] - nf / y2;
            let (pi_n, tau_n) = angular[n];
            let w = (2.0 * nf + 1.0) / nn1;

            // rows: (r, θ, φ) at r1; columns: Cartesian source orientation
            let mut t = CMat3::zeros();
            let sz = s_n * (2.0 * nf + 1.0) / y2;
            t[(0, 2)] = sz * nn1 * legendre[n] / y1;
            t[(1, 2)] = -sz * st * pi_n * f1;

            let sn2 = s_n * f2;
            let radial = sn2 * nn1 * st * pi_n / y1;
            t[(0, 0)] = w * cp * radial;
            t[(1, 0)] = w * cp * (s_m * pi_n + sn2 * tau_n * f1);
            t[(2, 0)] = -w * sp * (s_m * tau_n + sn2 * pi_n * f1);
            t[(0, 1)] = w * sp * radial;
            t[(1, 1)] = w * sp * (s_m * pi_n + sn2 * tau_n * f1);
            t[(2, 1)] = w * cp * (s_m * tau_n + sn2 * pi_n * f1);

            if t.iter().any(|c| !c.is_finite()) {
                return Err(Error::Overflow(format!("series term {n} is not finite")));
            }
            sum += t;
            let tn = t.norm();
            let sn = sum.norm();
            if fixed.is_some() {
                prev_norm = last_norm;
                last_norm = tn;
                continue;
            }
            let tn = tn * tail;
            if n > min_order && (tn <= opts.tol * sn || tn * prefactor.norm() <= opts.abs_tol) {
                small_run += 1;
            } else {
                small_run = 0;
            }
            if small_run >= 2 || sn == 0.0 && n >= min_order {
                return Ok(SeriesSum {
                    matrix: finish(&sum, &basis, prefactor),
                    order: n.saturating_sub(2).max(1),
                });
            }
        }
        if let Some(n) = fixed {
            if n >= 2 && last_norm > prev_norm && last_norm > opts.tol * sum.norm() {
                return Err(Error::Convergence(format!(
                    "terms still growing at order {n}"
                )));
            }
            return Ok(SeriesSum {
                matrix: finish(&sum, &basis, prefactor),
                order: n,
            });
        }
        if n_alloc >= cap {
            return Err(Error::Convergence(format!(
                "scattered series not converged to {:.1e} within {cap} orders; move the points further from the surface or loosen the tolerance",
                opts.tol
            )));
        }
        n_alloc = (2 * n_alloc).min(cap);
    }
}

/// Bound on the remaining sum relative to the last term for geometric decay at rate `q`.
fn tail_factor(q: f64) -> f64 {
    let q = q.min(0.99);
    (q / (1.0 - q)).max(1.0)
}

fn finish(sum: &CMat3, basis: &[Vec3; 3], prefactor: C64) -> CMat3 {
    let b = CMat3::from_columns(&[
        real_to_complex(&basis[0]),
        real_to_complex(&basis[1]),
        real_to_complex(&basis[2]),
    ]);
    b * sum * prefactor
}

/// Scattered tensor for arbitrary exterior points [nm] at a prepared wave.
fn scattered_matrix(
    system: &SphereSystem,
    wave: Wave,
    r1: &Vec3,
    r2: &Vec3,
    opts: &SeriesOptions,
    fixed: Option<usize>,
) -> Result<SeriesSum> {
    system.check_exterior(r1)?;
    system.check_exterior(r2)?;
    let rot = rotation_to_z(r2);
    let q = rot.matrix().map(|c| C64::new(c, 0.0));
    let r1_rot = rot * (r1 * NM);
    let mut out = axis_series(
        wave,
        system.radius_nm * NM,
        &r1_rot,
        r2.norm() * NM,
        opts,
        fixed,
    )?;
    out.matrix = q.transpose() * out.matrix * q;
    Ok(out)
}

/// Scattered tensor summed over exactly `n_max` orders.
pub fn scattered_green(
    system: &SphereSystem,
    r1: &Vec3,
    r2: &Vec3,
    omega: f64,
    n_max: usize,
) -> Result<DyadicGreen> {
    check_frequency(omega)?;
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let wave = Wave::real(&system.material, omega)?;
    let s = scattered_matrix(system, wave, r1, r2, &SeriesOptions::default(), Some(n_max))?;
    Ok(DyadicGreen {
        matrix: s.matrix,
        r1: *r1,
        r2: *r2,
        omega,
    })
}

/// Scattered tensor with adaptive truncation.
pub fn scattered_green_adaptive(
    system: &SphereSystem,
    r1: &Vec3,
    r2: &Vec3,
    omega: f64,
    opts: &SeriesOptions,
) -> Result<DyadicGreen> {
    check_frequency(omega)?;
    let wave = Wave::real(&system.material, omega)?;
    let s = scattered_matrix(system, wave, r1, r2, opts, None)?;
    Ok(DyadicGreen {
        matrix: s.matrix,
        r1: *r1,
        r2: *r2,
        omega,
    })
}

/// Smallest order after which the following terms stay below `tol` relative to the partial sum.
pub fn truncation_order(
    system: &SphereSystem,
    r1: &Vec3,
    r2: &Vec3,
    omega: f64,
    tol: f64,
) -> Result<usize> {
    check_frequency(omega)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let wave = Wave::real(&system.material, omega)?;
    let opts = SeriesOptions {
        tol,
        max_order: MAX_ORDER,
        abs_tol: 0.0,
    };
    Ok(scattered_matrix(system, wave, r1, r2, &opts, None)?.order)
}

/// Full tensor `G₀ + G_s` at real frequency; `r1 ≠ r2`.
pub fn total_green(
    env: &Environment,
    r1: &Vec3,
    r2: &Vec3,
    omega: f64,
    opts: &SeriesOptions,
) -> Result<DyadicGreen> {
    let mut g = free_space_green(r1, r2, omega)?;
    if let Environment::Sphere(s) = env {
        g.matrix += scattered_green_adaptive(s, r1, r2, omega, opts)?.matrix;
    }
    Ok(g)
}

/// Which part of the tensor enters a frequency integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenPart {
    Total,
    Scattered,
}

/// Tensor at imaginary frequency `iξ`; real-valued for real positions.
pub fn green_imag_axis(
    env: &Environment,
    r1: &Vec3,
    r2: &Vec3,
    xi: f64,
    part: GreenPart,
    opts: &SeriesOptions,
) -> Result<CMat3> {
    let mut g = CMat3::zeros();
    if part == GreenPart::Total {
        g += free_space_matrix(&((r1 - r2) * NM), C64::new(0.0, xi / SPEED_OF_LIGHT))?;
    }
    if let Environment::Sphere(s) = env {
        let wave = Wave::imaginary(&s.material, xi)?;
        g += scattered_matrix(s, wave, r1, r2, opts, None)?.matrix;
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveOptions {
    pub series: SeriesOptions,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for EffectiveOptions {
    fn default() -> Self {
        Self {
            series: SeriesOptions::default(),
            rel_tol: 1e-9,
            max_intervals: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGreen {
    /// `G(ω_E)` plus the off-resonant imaginary-axis correction [1/m].
    pub matrix: CMat3,
    /// `G(ω_E)` alone.
    pub resonant: CMat3,
    pub quadrature_error: f64,
}

/// Frequency-integrated tensor entering the field operator:
///
/// ```text
/// G_eff = G(ω) + (1/π) ∫₀^∞ t²/(t²+1) G(iωt) dt
/// ```
///
/// so that `ω² G_eff` reproduces `π⁻¹ P∫ ω'² Im G(ω') / (ω' − ω) dω'` in its
/// real part and `ω² Im G(ω)` in its imaginary part.
pub fn effective_green(
    env: &Environment,
    r1: &Vec3,
    r2: &Vec3,
    omega: f64,
    part: GreenPart,
    opts: &EffectiveOptions,
) -> Result<EffectiveGreen> {
    check_frequency(omega)?;
    env.check_exterior(r1)?;
    env.check_exterior(r2)?;
    let mut resonant = CMat3::zeros();
    if part == GreenPart::Total {
        resonant += free_space_green(r1, r2, omega)?.matrix;
    }
    let Some(sphere) = env.sphere() else {
        if part == GreenPart::Scattered {
            return Ok(EffectiveGreen {
                matrix: CMat3::zeros(),
                resonant,
                quadrature_error: 0.0,
            });
        }
        return effective_vacuum(r1, r2, omega, opts, resonant);
    };
    let scattered = scattered_green_adaptive(sphere, r1, r2, omega, &opts.series)?.matrix;
    resonant += scattered;
    let scale = resonant.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let series = SeriesOptions {
        abs_tol: opts.series.abs_tol.max(opts.rel_tol * scale),
        ..opts.series
    };

    let k = omega / SPEED_OF_LIGHT;
    let mut length = (r1.norm() + r2.norm() - 2.0 * sphere.radius_nm) * NM;
    if part == GreenPart::Total {
        length = length.min((r1 - r2).norm() * NM);
    }
    let scale = (1.0 / (k * length)).clamp(1e-9, 1e3);
    let integrand = |t: f64| -> Result<Vec<C64>> {
        let w = t * t / (t * t + 1.0);
        let g = green_imag_axis(env, r1, r2, omega * t, part, &series)?;
        Ok(g.iter().map(|c| c * w).collect())
    };
    let q = QuadratureOptions {
        rel_tol: opts.rel_tol,
        abs_tol: 0.0,
        max_intervals: opts.max_intervals,
    };
    let result = integrate_semi_infinite(integrand, scale, 9, &q)?;
    let correction = CMat3::from_column_slice(&result.value) * C64::new(1.0 / PI, 0.0);
    Ok(EffectiveGreen {
        matrix: resonant + correction,
        resonant,
        quadrature_error: result.error / PI,
    })
}

fn effective_vacuum(
    r1: &Vec3,
    r2: &Vec3,
    omega: f64,
    opts: &EffectiveOptions,
    resonant: CMat3,
) -> Result<EffectiveGreen> {
    let k = omega / SPEED_OF_LIGHT;
    let d = (r1 - r2) * NM;
    let scale = (1.0 / (k * d.norm())).clamp(1e-9, 1e3);
    let integrand = |t: f64| -> Result<Vec<C64>> {
        let w = t * t / (t * t + 1.0);
        let g = free_space_matrix(&d, C64::new(0.0, k * t))?;
        Ok(g.iter().map(|c| c * w).collect())
    };
    let q = QuadratureOptions {
        rel_tol: opts.rel_tol,
        abs_tol: 0.0,
        max_intervals: opts.max_intervals,
    };
    let result = integrate_semi_infinite(integrand, scale, 9, &q)?;
    let correction = CMat3::from_column_slice(&result.value) * C64::new(1.0 / PI, 0.0);
    Ok(EffectiveGreen {
        matrix: resonant + correction,
        resonant,
        quadrature_error: result.error / PI,
    })
}

/// Incident plane wave of unit amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    pub direction: [f64; 3],
    pub polarization: [f64; 3],
}

impl PlaneWave {
    fn frame(&self) -> Result<(Vec3, Vec3, Vec3)> {
        let k = Vec3::from(self.direction);
        let p = Vec3::from(self.polarization);
        if k.norm() == 0.0 || p.norm() == 0.0 {
            return Err(Error::InvalidParameter(
                "direction and polarization must be non-zero".into(),
            ));
        }
        let k = k.normalize();
        let p = p.normalize();
        if k.dot(&p).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "polarization must be transverse to the direction".into(),
            ));
        }
        Ok((p, k.cross(&p), k))
    }
}

/// Total field (incident plus Mie-scattered) at `r` [nm] for a unit-amplitude plane wave.
pub fn plane_wave_local_field(
    env: &Environment,
    wave_in: &PlaneWave,
    r: &Vec3,
    omega: f64,
    opts: &SeriesOptions,
) -> Result<CVec3> {
    check_frequency(omega)?;
    env.check_exterior(r)?;
    let (ex, ey, ez) = wave_in.frame()?;
    let k = omega / SPEED_OF_LIGHT;
    let rm = r * NM;
    let incident = real_to_complex(&ex) * (I * k * rm.dot(&ez)).exp();
    let Some(sphere) = env.sphere() else {
        return Ok(incident);
    };
    let local = Vec3::new(rm.dot(&ex), rm.dot(&ey), rm.dot(&ez));
    let wave = Wave::real(&sphere.material, omega)?;
    let radius = sphere.radius_nm * NM;
    let x = wave.k * radius;
    let rho_abs = local.norm();
    let y = wave.k * rho_abs;
    let cap = opts.max_order.min(MAX_ORDER);
    let mut n_alloc = order_estimate(x, radius, rho_abs, radius, opts.tol)
        .min(cap)
        .max(4);
    let min_order = (x.re.abs().ceil() as usize).max(1);
    let tail = tail_factor(radius / rho_abs);
    let ct = (local.z / rho_abs).clamp(-1.0, 1.0);
    let st = local.x.hypot(local.y) / rho_abs;
    let (sp, cp) = if local.x == 0.0 && local.y == 0.0 {
        (0.0, 1.0)
    } else {
        local.y.atan2(local.x).sin_cos()
    };
    let envelope = (x.im.abs() + I * (y - x)).exp();

    let scattered = loop {
        let terms = MieTerms::new(wave, radius, n_alloc);
        let rhy = hankel_ratios(n_alloc, y);
        let angular = mie_angular_seq(n_alloc, ct);
        let mut jx = sin_scaled(x) / x;
        let mut q = x / y;
        let mut e_n_phase = C64::new(1.0, 0.0);
        let mut sum = [C64::new(0.0, 0.0); 3];
        let mut small_run = 0;
        let mut done = false;
        for n in 1..=n_alloc {
            jx *= terms.rj[n];
            q *= rhy[n] / terms.rh[n];
            e_n_phase *= I;
            let nf = n as f64;
            let e_n = e_n_phase * (2.0 * nf + 1.0) / (nf * (nf + 1.0));
            let u = jx * q;
            let f = C64::new(1.0, 0.0) / rhy[n] - nf / y;
            let (pi_n, tau_n) = angular[n];
            let ia = I * terms.t_a[n] * u;
            let b = terms.t_b[n] * u;
            let t = [
                e_n * ia * cp * nf * (nf + 1.0) * st * pi_n / y,
                e_n * (ia * f * cp * tau_n - b * cp * pi_n),
                e_n * (-ia * f * sp * pi_n + b * sp * tau_n),
            ];
            for (s, v) in sum.iter_mut().zip(t) {
                *s += v;
            }
            let tn = t.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() * tail;
            let sn = sum.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if !tn.is_finite() {
                return Err(Error::Overflow(format!(
                    "plane-wave term {n} is not finite"
                )));
            }
            small_run = if n > min_order && tn <= opts.tol * sn {
                small_run + 1
            } else {
                0
            };
            if small_run >= 2 {
                done = true;
                break;
            }
        }
        if done {
            break sum.map(|c| c * envelope);
        }
        if n_alloc >= cap {
            return Err(Error::Convergence(format!(
                "plane-wave series not converged within {cap} orders"
            )));
        }
        n_alloc = (2 * n_alloc).min(cap);
    };

    let basis_local = spherical_unit_vectors(&local);
    let mut field_local = CVec3::zeros();
    for (component, e) in scattered.iter().zip(basis_local.iter()) {
        field_local += real_to_complex(e) * *component;
    }
    let global = real_to_complex(&ex) * field_local.x
        + real_to_complex(&ey) * field_local.y
        + real_to_complex(&ez) * field_local.z;
    Ok(incident + global)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::omega_from_wavelength_nm;

    fn gold_sphere(r: f64) -> SphereSystem {
        SphereSystem::new(r, DrudeLorentzModel::gold()).unwrap()
    }

    fn max_abs(m: &CMat3) -> f64 {
        m.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn vacuum_coincidence_identity() {
        let omega = omega_from_wavelength_nm(550.0);
        let k = omega / SPEED_OF_LIGHT;
        let expected = free_space_green_imag_coincident(omega);
        assert!((expected - k / (6.0 * PI)).abs() <= 1e-12 * expected);
        // Im G(r, r + δ) approaches the limit with O((kδ)²) corrections
        let delta = 1.0;
        let g = free_space_green(&Vec3::zeros(), &Vec3::new(delta, 0.0, 0.0), omega).unwrap();
        let kd2 = (k * delta * NM).powi(2);
        for i in 0..3 {
            assert!(
                (g.matrix[(i, i)].im - expected).abs() < kd2 * expected,
                "{i}: {}",
                g.matrix[(i, i)]
            );
        }
    }

    #[test]
    fn vacuum_far_field_transverse() {
        let omega = omega_from_wavelength_nm(500.0);
        let k = omega / SPEED_OF_LIGHT;
        let dist = 1e4 / k;
        let g = free_space_green(&Vec3::new(dist / NM, 0.0, 0.0), &Vec3::zeros(), omega).unwrap();
        let target = 1.0 / (4.0 * PI * dist);
        assert!((g.matrix[(2, 2)].norm() - target).abs() < 1e-4 * target);
        assert!(g.matrix[(0, 0)].norm() < 1e-3 * target);
    }

    #[test]
    fn coincident_points_are_singular() {
        let r = Vec3::new(1.0, 2.0, 3.0);
        assert!(matches!(
            free_space_green(&r, &r, 1e15),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn small_sphere_dipole_coefficient() {
        let lambda = 600.0;
        let omega = omega_from_wavelength_nm(lambda);
        let k = omega / SPEED_OF_LIGHT;
        let radius = 0.05 / k / NM;
        let s = gold_sphere(radius);
        let eps = s.material.permittivity(omega).unwrap();
        let x = 0.05;
        let expected = I * (2.0 / 3.0) * x * x * x * (eps - 1.0) / (eps + 2.0);
        let b = mie_reflection_coefficients(&s, 1, omega).unwrap();
        assert!(
            (b.b_n - expected).norm() < 0.02 * expected.norm(),
            "{} vs {}",
            b.b_n,
            expected
        );
        assert!(b.b_m.norm() < 1e-2 * b.b_n.norm());
        let b2 = mie_reflection_coefficients(&s, 2, omega).unwrap();
        assert!(b2.b_n.norm() < 1e-2 * b.b_n.norm());
    }

    #[test]
    fn lossless_sphere_is_unitary() {
        let s = SphereSystem::new(
            80.0,
            DrudeLorentzModel {
                eps_inf: 4.0,
                omega_p: 0.0,
                gamma_p: 0.0,
                lorentz_poles: vec![],
            },
        )
        .unwrap();
        let omega = omega_from_wavelength_nm(500.0);
        for n in 1..12 {
            let b = mie_reflection_coefficients(&s, n, omega).unwrap();
            // 1 + 2B is the phase of the outgoing partial wave
            assert!(((1.0 + 2.0 * b.b_n).norm() - 1.0).abs() < 1e-10, "n={n}");
            assert!(((1.0 + 2.0 * b.b_m).norm() - 1.0).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn mie_coefficients_order_zero_is_rejected() {
        assert!(mie_reflection_coefficients(&gold_sphere(50.0), 0, 1e15).is_err());
    }

    #[test]
    fn interior_points_are_rejected() {
        let s = gold_sphere(50.0);
        let r = Vec3::new(0.0, 0.0, 40.0);
        let e = scattered_green(&s, &r, &Vec3::new(0.0, 0.0, 60.0), 3e15, 10);
        assert!(matches!(e, Err(Error::Domain(_))));
    }

    #[test]
    fn quasistatic_limit_of_scattered_tensor() {
        let omega = omega_from_wavelength_nm(600.0);
        let k = omega / SPEED_OF_LIGHT;
        let radius = 1.0;
        let s = gold_sphere(radius);
        let eps = s.material.permittivity(omega).unwrap();
        let alpha = 4.0 * PI * (radius * NM).powi(3) * (eps - 1.0) / (eps + 2.0);
        let r1 = Vec3::new(12.0, 3.0, 15.0);
        let r2 = Vec3::new(-3.0, 9.0, 18.0);
        let g = scattered_green_adaptive(&s, &r1, &r2, omega, &SeriesOptions::default())
            .unwrap()
            .matrix;
        let a = free_space_green(&r1, &Vec3::zeros(), omega).unwrap().matrix;
        let b = free_space_green(&Vec3::zeros(), &r2, omega).unwrap().matrix;
        let dipole = a * b * (alpha * k * k);
        // quadrupole corrections scale like (R/r)²
        assert!(
            max_abs(&(g - dipole)) < 0.02 * max_abs(&dipole),
            "{g}\n{dipole}"
        );
    }

    #[test]
    fn scattered_tensor_is_reciprocal() {
        let s = gold_sphere(60.0);
        let omega = omega_from_wavelength_nm(550.0);
        let opts = SeriesOptions {
            tol: 1e-13,
            ..Default::default()
        };
        let r1 = Vec3::new(30.0, -50.0, 60.0);
        let r2 = Vec3::new(-70.0, 20.0, 10.0);
        let a = scattered_green_adaptive(&s, &r1, &r2, omega, &opts)
            .unwrap()
            .matrix;
        let b = scattered_green_adaptive(&s, &r2, &r1, omega, &opts)
            .unwrap()
            .matrix;
        assert!(max_abs(&(a - b.transpose())) < 1e-10 * max_abs(&a));
    }

    #[test]
    fn imaginary_axis_tensor_is_real() {
        let env = Environment::Sphere(gold_sphere(60.0));
        let r1 = Vec3::new(0.0, 0.0, 70.0);
        let r2 = Vec3::new(40.0, 0.0, -60.0);
        let g = green_imag_axis(
            &env,
            &r1,
            &r2,
            2e15,
            GreenPart::Total,
            &SeriesOptions::default(),
        )
        .unwrap();
        assert!(g.iter().all(|c| c.im.abs() <= 1e-10 * max_abs(&g)), "{g}");
    }

    #[test]
    fn truncation_order_trends() {
        let s = SphereSystem::new(1.0, DrudeLorentzModel::gold()).unwrap();
        // kR = 0.5
        let omega = 0.5 / (1.0 * NM) * SPEED_OF_LIGHT;
        let s = SphereSystem {
            radius_nm: s.radius_nm,
            ..s
        };
        let far = Vec3::new(0.0, 0.0, 1e4);
        let n = truncation_order(&s, &far, &Vec3::new(1e4, 0.0, 0.0), omega, 1e-8);
        // the Drude model is not meant for this frequency but is analytic there
        let n = n.unwrap();
        assert!(n <= 8, "n = {n}");
        assert_eq!(truncation_order(&s, &far, &far, omega, 1.0).unwrap(), 1);
    }
}
