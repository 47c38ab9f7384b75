//! Figure pipelines. Every grid point is an independent task; results are
//! gathered by index so the worker count cannot change the output.

use nanosqueeze_core::constants::{omega_from_wavelength_nm, DEBYE, EPSILON_0, NM, SPEED_OF_LIGHT};
use nanosqueeze_core::emitter::{
    bloch_steady_state, dressed_rates, normalized_params, squeezing_threshold, BlochState,
    DressedRates, Emitter,
};
use nanosqueeze_core::green::{Environment, Vec3};
use nanosqueeze_core::materials::DrudeLorentzModel;
use nanosqueeze_core::squeeze::{
    field_amplitude, field_variance, AmplitudeMode, Component, FieldAmplitude,
};
use rayon::prelude::*;

use crate::config::{DriveMode, Orientation, Pipeline, ScanConfig};
use crate::error::{PointError, ScanError};
use crate::grid::{
    AmplitudeSummary, Axis, Channel, DistanceCurve, Metadata, PatternSummary, PlotKind, ResultGrid,
    SpatialSummary, Summary, VariancePanel,
};

type PointResult = Result<(f64, Vec<f64>), PointError>;

/// Runs the pipeline named in the config.
pub fn run(cfg: &ScanConfig) -> Result<ResultGrid, ScanError> {
    cfg.validate()?;
    let grid = match cfg.pipeline {
        Pipeline::AmplitudeMap => run_amplitude_map(cfg),
        Pipeline::FarfieldPattern => run_farfield_pattern(cfg),
        Pipeline::VarianceMap => run_variance_map(cfg),
        Pipeline::DistanceScan => run_distance_scan(cfg),
        Pipeline::SpatialMap => run_spatial_map(cfg),
    }?;
    grid.check().map_err(ScanError::Numerical)?;
    Ok(grid)
}

struct Setup {
    model: DrudeLorentzModel,
    mode: AmplitudeMode,
    component: Component,
}

impl Setup {
    fn new(cfg: &ScanConfig) -> Self {
        Self {
            model: cfg.material.model(),
            mode: cfg.mode(),
            component: cfg.component(),
        }
    }

    fn environment(&self, radius_nm: f64) -> Result<Environment, PointError> {
        Environment::with_radius(radius_nm, self.model.clone()).map_err(|e| PointError::from(&e))
    }
}

fn single(cfg_axis: &crate::config::AxisSpec, name: &str) -> Result<f64, ScanError> {
    let s = cfg_axis.samples();
    if s.len() != 1 {
        return Err(ScanError::Config(format!(
            "{name} must be a single value for this pipeline"
        )));
    }
    Ok(s[0])
}

/// Emitter `s_nm` above the north pole of a sphere of radius `radius_nm`.
pub fn build_emitter(
    cfg: &ScanConfig,
    radius_nm: f64,
    s_nm: f64,
    lambda_nm: f64,
) -> Result<Emitter, PointError> {
    let orientation = match cfg.emitter.dipole_orientation {
        Orientation::Radial => Vec3::z(),
        Orientation::Vector { direction } => Vec3::from(direction).normalize(),
    };
    let omega = omega_from_wavelength_nm(lambda_nm);
    let dipole = cfg.emitter.dipole_debye * DEBYE;
    let probe = Emitter::new(
        Vec3::new(0.0, 0.0, radius_nm + s_nm),
        dipole,
        orientation,
        omega,
        0.0,
    )
    .map_err(|e| PointError::from(&e))?;
    let gamma_star = cfg.emitter.gamma_star_over_gamma0 * probe.gamma_0();
    Ok(Emitter {
        gamma_star,
        ..probe
    })
}

fn amplitude(
    cfg: &ScanConfig,
    emitter: &Emitter,
    env: &Environment,
    r: &Vec3,
    mode: AmplitudeMode,
) -> Result<FieldAmplitude, PointError> {
    field_amplitude(emitter, env, r, mode, &cfg.numerics.effective())
        .map_err(|e| PointError::from(&e))
}

fn dress(
    cfg: &ScanConfig,
    emitter: &Emitter,
    env: &Environment,
) -> Result<DressedRates, PointError> {
    if env.sphere().is_none() {
        return Ok(DressedRates::free_space(emitter));
    }
    dressed_rates(emitter, env, &cfg.drive_wave(), &cfg.numerics.dress())
        .map_err(|e| PointError::from(&e))
}

/// Saturation giving the deepest squeezing on resonance, `z² = (1−x)/(3+x)`.
pub fn optimal_saturation(x: f64) -> f64 {
    if x >= 1.0 {
        (1.0f64 / 3.0).sqrt()
    } else {
        ((1.0 - x) / (3.0 + x)).sqrt()
    }
}

/// Normalised `(δ, z)` for one drive sample; `strength` is `z₀` or `Ω/γ₀` by mode.
pub fn drive_point(
    cfg: &ScanConfig,
    delta_0: f64,
    strength: f64,
    dressed: &DressedRates,
) -> (f64, f64) {
    match cfg.drive.mode {
        DriveMode::Incident => {
            normalized_params(delta_0, strength, dressed, cfg.drive.detuning_reference)
        }
        DriveMode::Local => {
            let (delta, _) = normalized_params(delta_0, 0.0, dressed, cfg.drive.detuning_reference);
            let z = std::f64::consts::SQRT_2 * strength
                / (dressed.purcell() * (1.0 + dressed.x).sqrt());
            (delta, z)
        }
        DriveMode::Optimal => (0.0, optimal_saturation(dressed.x)),
    }
}

fn state(delta: f64, z: f64, dressed: &DressedRates) -> Result<BlochState, PointError> {
    bloch_steady_state(delta, z, dressed.x, dressed.laser_phase).map_err(|e| PointError::from(&e))
}

fn evaluate<F>(n: usize, f: F) -> Vec<PointResult>
where
    F: Fn(usize) -> PointResult + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

fn metadata(
    cfg: &ScanConfig,
    convention: &str,
    plot: PlotKind,
    results: &[PointResult],
) -> Metadata {
    let ok = || results.iter().filter_map(|r| r.as_ref().ok().map(|v| v.0));
    Metadata {
        name: cfg.name.clone(),
        pipeline: cfg.pipeline,
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode: cfg.mode(),
        component: cfg.component(),
        convention: convention.into(),
        plot,
        value_min: ok().reduce(f64::min),
        value_max: ok().reduce(f64::max),
        failed_points: results
            .iter()
            .filter(|r| matches!(r, Err(e) if e.is_failure()))
            .count(),
        masked_points: results
            .iter()
            .filter(|r| matches!(r, Err(PointError::Masked)))
            .count(),
    }
}

fn assemble(
    meta: Metadata,
    axes: Vec<Axis>,
    value: (&str, &str),
    extras: &[(&str, &str)],
    results: Vec<PointResult>,
    summary: Summary,
) -> ResultGrid {
    let n = results.len();
    let mut values = Vec::with_capacity(n);
    let mut errors = Vec::with_capacity(n);
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(n); extras.len()];
    for r in results {
        match r {
            Ok((v, ex)) => {
                values.push(Some(v));
                errors.push(None);
                for (c, x) in columns.iter_mut().zip(ex) {
                    c.push(Some(x).filter(|x| x.is_finite()));
                }
            }
            Err(e) => {
                values.push(None);
                errors.push(Some(e));
                for c in columns.iter_mut() {
                    c.push(None);
                }
            }
        }
    }
    ResultGrid {
        metadata: meta,
        axes,
        value: Channel::new(value.0, value.1, values),
        extras: extras
            .iter()
            .zip(columns)
            .map(|((name, unit), c)| Channel::new(name, unit, c))
            .collect(),
        errors,
        summary,
    }
}

fn detector_point(cfg: &ScanConfig, radius_nm: f64, lambda_nm: f64) -> Vec3 {
    Vec3::from(cfg.geometry.detector.position(radius_nm, lambda_nm))
}

/// `|g_i|²/|g_i,0|²` over `(λ_E, R)` at the configured detector.
pub fn run_amplitude_map(cfg: &ScanConfig) -> Result<ResultGrid, ScanError> {
    let setup = Setup::new(cfg);
    let s_nm = single(&cfg.emitter.s_nm, "emitter.s_nm")?;
    let lambdas = cfg.emitter.lambda_nm.samples();
    let radii = cfg.geometry.radius_nm.samples();
    let nr = radii.len();
    let c = setup.component;
    let results = evaluate(lambdas.len() * nr, |i| {
        let (lambda, radius) = (lambdas[i / nr], radii[i % nr]);
        let emitter = build_emitter(cfg, radius, s_nm, lambda)?;
        let r = detector_point(cfg, radius, lambda);
        let env = setup.environment(radius)?;
        let a = amplitude(cfg, &emitter, &env, &r, setup.mode)?;
        let a0 = amplitude(cfg, &emitter, &Environment::FreeSpace, &r, setup.mode)?;
        let ratio = (a.magnitude(c) / a0.magnitude(c)).powi(2);
        if !ratio.is_finite() {
            return Err(PointError::Domain);
        }
        Ok((ratio, vec![a.phase(c)]))
    });
    let mut best: Option<(f64, usize)> = None;
    let mut min = f64::INFINITY;
    for (i, r) in results.iter().enumerate() {
        if let Ok((v, _)) = r {
            min = min.min(*v);
            if best.is_none_or(|b| *v > b.0) {
                best = Some((*v, i));
            }
        }
    }
    let (max, at) = best.ok_or_else(|| ScanError::Numerical("every grid point failed".into()))?;
    let summary = Summary::AmplitudeMap(AmplitudeSummary {
        max,
        max_at: [lambdas[at / nr], radii[at % nr]],
        min,
    });
    let meta = metadata(
        cfg,
        "|g_i/g_i,0|^2, free-space amplitude at the same emitter and detector",
        PlotKind::Heatmap,
        &results,
    );
    let axes = vec![
        Axis::new("lambda", "nm", lambdas),
        Axis::new("radius", "nm", radii),
    ];
    Ok(assemble(
        meta,
        axes,
        ("enhancement", ""),
        &[("phase", "rad")],
        results,
        summary,
    ))
}

fn count_lobes(values: &[f64]) -> usize {
    let n = values.len();
    let max = values.iter().cloned().fold(0.0, f64::max);
    (0..n)
        .filter(|&i| {
            let (prev, next) = (values[(i + n - 1) % n], values[(i + 1) % n]);
            values[i] > prev && values[i] >= next && values[i] > 0.1 * max
        })
        .count()
}

/// `|g_θ|` on a circle of radius `10⁵ λ_E` in the xz plane, relative to the
/// free-space value at `θ = 90°`.
pub fn run_farfield_pattern(cfg: &ScanConfig) -> Result<ResultGrid, ScanError> {
    let setup = Setup::new(cfg);
    let s_nm = single(&cfg.emitter.s_nm, "emitter.s_nm")?;
    let radii = cfg.geometry.radius_nm.samples();
    let lambdas = cfg.emitter.lambda_nm.samples();
    if lambdas.len() != 1 && lambdas.len() != radii.len() {
        return Err(ScanError::Config(
            "emitter.lambda_nm must be a single value or pair one-to-one with the radii".into(),
        ));
    }
    let lambda_of = |k: usize| {
        if lambdas.len() == 1 {
            lambdas[0]
        } else {
            lambdas[k]
        }
    };
    let thetas = cfg
        .geometry
        .theta_deg
        .as_ref()
        .expect("validated")
        .samples();
    let nt = thetas.len();
    let c = setup.component;
    let position = |lambda: f64, theta: f64| {
        let d = crate::config::D1_DISTANCE_IN_WAVELENGTHS * lambda;
        let t = theta.to_radians();
        Vec3::new(d * t.sin(), 0.0, d * t.cos())
    };
    let references: Vec<Result<f64, PointError>> = (0..radii.len())
        .into_par_iter()
        .map(|k| {
            let lambda = lambda_of(k);
            let emitter = build_emitter(cfg, radii[k], s_nm, lambda)?;
            Ok(amplitude(
                cfg,
                &emitter,
                &Environment::FreeSpace,
                &position(lambda, 90.0),
                setup.mode,
            )?
            .magnitude(c))
        })
        .collect();
    let results = evaluate(radii.len() * nt, |i| {
        let (k, theta) = (i / nt, thetas[i % nt]);
        let lambda = lambda_of(k);
        let reference = references[k]?;
        let emitter = build_emitter(cfg, radii[k], s_nm, lambda)?;
        let r = position(lambda, theta);
        let env = setup.environment(radii[k])?;
        let a = amplitude(cfg, &emitter, &env, &r, setup.mode)?;
        let a0 = amplitude(cfg, &emitter, &Environment::FreeSpace, &r, setup.mode)?;
        Ok((
            a.magnitude(c) / reference,
            vec![a0.magnitude(c) / reference, lambda],
        ))
    });
    let mut patterns = Vec::new();
    for (k, radius) in radii.iter().enumerate() {
        let rows = &results[k * nt..(k + 1) * nt];
        if rows.iter().any(|r| r.is_err()) {
            continue;
        }
        let v: Vec<f64> = rows.iter().map(|r| r.as_ref().unwrap().0).collect();
        let free: Vec<f64> = rows.iter().map(|r| r.as_ref().unwrap().1[0]).collect();
        let min_gain = v
            .iter()
            .zip(&free)
            .filter(|(_, f)| **f > 1e-3)
            .map(|(a, f)| a / f)
            .fold(f64::INFINITY, f64::min);
        patterns.push(PatternSummary {
            radius_nm: *radius,
            lambda_nm: lambda_of(k),
            lobes: count_lobes(&v),
            max: v.iter().cloned().fold(0.0, f64::max),
            min_gain,
        });
    }
    let meta = metadata(
        cfg,
        "|g_theta| / |g_theta,0(90 deg)|, same wavelength",
        PlotKind::Lines,
        &results,
    );
    let axes = vec![
        Axis::new("radius", "nm", radii),
        Axis::new("theta", "deg", thetas),
    ];
    Ok(assemble(
        meta,
        axes,
        ("amplitude", ""),
        &[("free_space_amplitude", ""), ("lambda", "nm")],
        results,
        Summary::FarfieldPattern { patterns },
    ))
}

struct Panel {
    dressed: DressedRates,
    amplitude: FieldAmplitude,
    reference: f64,
}

impl Panel {
    fn variance(
        &self,
        cfg: &ScanConfig,
        c: Component,
        delta_0: f64,
        z_0: f64,
    ) -> Result<(f64, f64, f64), PointError> {
        let (delta, z) = drive_point(cfg, delta_0, z_0, &self.dressed);
        let s = state(delta, z, &self.dressed)?;
        let v = field_variance(
            &self.amplitude,
            c,
            Some(self.reference),
            &s,
            cfg.drive.quadrature_phase_rad,
        );
        Ok((v.normalized.expect("reference given"), delta, z))
    }
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn bisect_level<F: Fn(f64) -> f64>(f: F, mut inside: f64, mut outside: f64, level: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if f(mid) <= level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// Normalised variance `(Δ𝓔_i)²/|g_i,0|²` over `(δ₀, z₀)`, one panel per radius.
pub fn run_variance_map(cfg: &ScanConfig) -> Result<ResultGrid, ScanError> {
    let setup = Setup::new(cfg);
    let s_nm = single(&cfg.emitter.s_nm, "emitter.s_nm")?;
    let lambda = single(&cfg.emitter.lambda_nm, "emitter.lambda_nm")?;
    let radii = cfg.geometry.radius_nm.samples();
    let deltas = cfg.drive.delta0.samples();
    let strengths = match (cfg.drive.mode, &cfg.drive.omega_over_gamma0) {
        (DriveMode::Local, Some(o)) => o.samples(),
        _ => cfg.drive.z0.samples(),
    };
    let c = setup.component;
    let panels: Vec<Result<Panel, PointError>> = radii
        .par_iter()
        .map(|&radius| {
            let emitter = build_emitter(cfg, radius, s_nm, lambda)?;
            let env = setup.environment(radius)?;
            let r = detector_point(cfg, radius, lambda);
            let amplitude = amplitude(cfg, &emitter, &env, &r, setup.mode)?;
            let reference =
                self::amplitude(cfg, &emitter, &Environment::FreeSpace, &r, setup.mode)?
                    .magnitude(c);
            Ok(Panel {
                dressed: dress(cfg, &emitter, &env)?,
                amplitude,
                reference,
            })
        })
        .collect();
    let (nd, nz) = (deltas.len(), strengths.len());
    let results = evaluate(radii.len() * nd * nz, |i| {
        let panel = panels[i / (nd * nz)].as_ref().map_err(|e| *e)?;
        let (d0, z0) = (deltas[(i / nz) % nd], strengths[i % nz]);
        let (v, delta, z) = panel.variance(cfg, c, d0, z0)?;
        Ok((v, vec![delta, z]))
    });

    let (d_lo, d_hi) = (
        deltas.iter().cloned().fold(f64::INFINITY, f64::min),
        deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (z_lo, z_hi) = (
        strengths.iter().cloned().fold(f64::INFINITY, f64::min),
        strengths.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let d_step = if nd > 1 {
        (d_hi - d_lo) / (nd - 1) as f64
    } else {
        0.0
    };
    let z_step = if nz > 1 {
        (z_hi - z_lo) / (nz - 1) as f64
    } else {
        0.0
    };
    let mut summaries = Vec::new();
    for (k, panel) in panels.iter().enumerate() {
        let Ok(panel) = panel else { continue };
        let block = &results[k * nd * nz..(k + 1) * nd * nz];
        let Some((grid_min, at)) = block
            .iter()
            .enumerate()
            .filter_map(|(j, r)| r.as_ref().ok().map(|v| (v.0, j)))
            .reduce(|a, b| if b.0 < a.0 { b } else { a })
        else {
            continue;
        };
        let f = |d0: f64, z0: f64| {
            panel
                .variance(cfg, c, d0, z0)
                .map(|v| v.0)
                .unwrap_or(f64::INFINITY)
        };
        let (mut d0, mut z0) = (deltas[at / nz], strengths[at % nz]);
        let mut best = grid_min;
        for _ in 0..8 {
            if nz > 1 {
                let (z, v) = golden_min(
                    |z| f(d0, z),
                    (z0 - z_step).max(z_lo),
                    (z0 + z_step).min(z_hi),
                );
                if v < best {
                    best = v;
                    z0 = z;
                }
            }
            if nd > 1 {
                let (d, v) = golden_min(
                    |d| f(d, z0),
                    (d0 - d_step).max(d_lo),
                    (d0 + d_step).min(d_hi),
                );
                if v < best {
                    best = v;
                    d0 = d;
                }
            }
        }
        // prefer the optimum on the resonant row, δ = 0, when it lies in the window
        let (a, _) = drive_point(cfg, 0.0, 0.0, &panel.dressed);
        let (b, _) = drive_point(cfg, 1.0, 0.0, &panel.dressed);
        if b != a && nz > 1 {
            let d_res = -a / (b - a);
            if (d_lo..=d_hi).contains(&d_res) {
                let (z, v) = golden_min(|z| f(d_res, z), z_lo, z_hi);
                if v <= best + 1e-9 * best.abs() {
                    best = v;
                    d0 = d_res;
                    z0 = z;
                }
            }
        }
        let level = 0.5 * best;
        let edge = |dir: f64| {
            if nd < 2 || best >= 0.0 {
                return d0;
            }
            // the half-depth region may extend past the sampled window
            let reach = 100.0 * (d_hi - d_lo).max(d_step);
            let mut inside = d0;
            loop {
                let next = inside + dir * d_step;
                if (next - d0).abs() > reach {
                    return next;
                }
                if f(next, z0) > level {
                    return bisect_level(|d| f(d, z0), inside, next, level);
                }
                inside = next;
            }
        };
        let extent = edge(1.0) - edge(-1.0);
        let d = &panel.dressed;
        let boundary = deltas
            .iter()
            .map(|&d0| {
                let (delta, _) = drive_point(cfg, d0, 0.0, d);
                let zmax2 = squeezing_threshold(delta, d.x);
                let to_strength = match cfg.drive.mode {
                    DriveMode::Incident => {
                        d.purcell() * (1.0 + d.x).sqrt() / d.rabi_enhancement.norm()
                    }
                    DriveMode::Local => d.purcell() * (1.0 + d.x).sqrt() / std::f64::consts::SQRT_2,
                    DriveMode::Optimal => f64::NAN,
                };
                (
                    d0,
                    Some(zmax2.sqrt() * to_strength).filter(|v| zmax2 > 0.0 && v.is_finite()),
                )
            })
            .collect();
        summaries.push(VariancePanel {
            radius_nm: radii[k],
            purcell: d.purcell(),
            rabi_enhancement: d.rabi_enhancement.norm(),
            shift_over_gamma0: d.shift_over_gamma_0(),
            x: d.x,
            amplitude_ratio: (panel.amplitude.magnitude(c) / panel.reference).powi(2),
            grid_min,
            grid_min_at: [deltas[at / nz], strengths[at % nz]],
            min: best,
            min_at: [d0, z0],
            extent_delta0: extent,
            boundary,
        });
    }
    let strength_axis = match cfg.drive.mode {
        DriveMode::Local => Axis::new("omega_over_gamma0", "", strengths),
        _ => Axis::new("z0", "", strengths),
    };
    let meta = metadata(
        cfg,
        "(Delta E_i)^2 / |g_i,0|^2, free-space amplitude at the same emitter and detector",
        PlotKind::Heatmap,
        &results,
    );
    let axes = vec![
        Axis::new("radius", "nm", radii),
        Axis::new("delta0", "", deltas),
        strength_axis,
    ];
    Ok(assemble(
        meta,
        axes,
        ("variance", ""),
        &[("delta", ""), ("z", "")],
        results,
        Summary::VarianceMap { panels: summaries },
    ))
}

/// Normalised variance against emitter distance, one curve per `(R, Ω/γ₀)`
/// plus an optional free-space reference curve.
pub fn run_distance_scan(cfg: &ScanConfig) -> Result<ResultGrid, ScanError> {
    let setup = Setup::new(cfg);
    let lambda = single(&cfg.emitter.lambda_nm, "emitter.lambda_nm")?;
    let delta_0 = single(&cfg.drive.delta0, "drive.delta0")?;
    let s_values = cfg.emitter.s_nm.samples();
    let radii = cfg.geometry.radius_nm.samples();
    let strengths = cfg
        .drive
        .omega_over_gamma0
        .as_ref()
        .expect("validated")
        .samples();
    let mut curves: Vec<(usize, f64)> = (0..radii.len())
        .flat_map(|k| strengths.iter().map(move |&o| (k, o)))
        .collect();
    let mut curve_radii = radii.clone();
    if let Some(o) = cfg.drive.reference_omega_over_gamma0 {
        curve_radii.push(0.0);
        curves.push((radii.len(), o));
    }
    let ns = s_values.len();
    let c = setup.component;
    let points: Vec<Result<Panel, PointError>> = (0..curve_radii.len() * ns)
        .into_par_iter()
        .map(|i| {
            let (radius, s) = (curve_radii[i / ns], s_values[i % ns]);
            let emitter = build_emitter(cfg, radius, s, lambda)?;
            let env = setup.environment(radius)?;
            let r = detector_point(cfg, radius, lambda);
            let amplitude = amplitude(cfg, &emitter, &env, &r, setup.mode)?;
            let reference =
                self::amplitude(cfg, &emitter, &Environment::FreeSpace, &r, setup.mode)?
                    .magnitude(c);
            Ok(Panel {
                dressed: dress(cfg, &emitter, &env)?,
                amplitude,
                reference,
            })
        })
        .collect();
    let results = evaluate(curves.len() * ns, |i| {
        let (k, omega) = curves[i / ns];
        let panel = points[k * ns + i % ns].as_ref().map_err(|e| *e)?;
        let (v, _, _) = panel.variance(cfg, c, delta_0, omega)?;
        let d = &panel.dressed;
        let ratio = (panel.amplitude.magnitude(c) / panel.reference).powi(2);
        Ok((v, vec![curve_radii[k], omega, d.purcell(), ratio, d.x]))
    });
    let mut summaries = Vec::new();
    for (j, (k, omega)) in curves.iter().enumerate() {
        let rows = &results[j * ns..(j + 1) * ns];
        let v: Vec<Option<f64>> = rows.iter().map(|r| r.as_ref().ok().map(|x| x.0)).collect();
        let Some((min, at)) = v
            .iter()
            .enumerate()
            .filter_map(|(i, x)| x.map(|x| (x, i)))
            .reduce(|a, b| if b.0 < a.0 { b } else { a })
        else {
            continue;
        };
        let onset_s = v.iter().rposition(|x| x.is_some_and(|x| x < 0.0)).map(|i| {
            match (v.get(i + 1).copied().flatten(), v[i]) {
                (Some(hi), Some(lo)) => {
                    s_values[i] + (s_values[i + 1] - s_values[i]) * lo / (lo - hi)
                }
                _ => s_values[i],
            }
        });
        summaries.push(DistanceCurve {
            radius_nm: curve_radii[*k],
            omega_over_gamma0: *omega,
            onset_s,
            min,
            min_at_s: s_values[at],
            non_negative: v.iter().flatten().all(|x| *x >= 0.0),
        });
    }
    let meta = metadata(
        cfg,
        "(Delta E_i)^2 / |g_i,0|^2 at each distance, free-space amplitude at the same emitter and detector",
        PlotKind::Lines,
        &results,
    );
    let axes = vec![
        Axis::new("curve", "", (0..curves.len()).map(|i| i as f64).collect()),
        Axis::new("s", "nm", s_values),
    ];
    Ok(assemble(
        meta,
        axes,
        ("variance", ""),
        &[
            ("radius", "nm"),
            ("omega_over_gamma0", ""),
            ("gamma_over_gamma0", ""),
            ("amplitude_ratio", ""),
            ("x", ""),
        ],
        results,
        Summary::DistanceScan { curves: summaries },
    ))
}

/// `(ε₀c²/ω²)/|d|`: converts an amplitude `g` [V/m] into `G·d̂` [1/nm].
fn dipole_normalization(emitter: &Emitter) -> f64 {
    EPSILON_0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT / (emitter.omega * emitter.omega * emitter.dipole)
        * NM
}

/// Bilinear interpolation of `|value|`; `None` outside the grid or next to an invalid point.
fn interpolate_abs(xs: &[f64], zs: &[f64], values: &[Option<f64>], x: f64, z: f64) -> Option<f64> {
    let i = xs.partition_point(|v| *v <= x).checked_sub(1)?;
    let j = zs.partition_point(|v| *v <= z).checked_sub(1)?;
    if i + 1 >= xs.len() || j + 1 >= zs.len() {
        return None;
    }
    let nz = zs.len();
    let at = |a: usize, b: usize| values[(i + a) * nz + j + b].map(f64::abs);
    let (c00, c01, c10, c11) = (at(0, 0)?, at(0, 1)?, at(1, 0)?, at(1, 1)?);
    let tx = (x - xs[i]) / (xs[i + 1] - xs[i]);
    let tz = (z - zs[j]) / (zs[j + 1] - zs[j]);
    Some((1.0 - tx) * ((1.0 - tz) * c00 + tz * c01) + tx * ((1.0 - tz) * c10 + tz * c11))
}

const RING_SAMPLES: usize = 720;
const PROMINENCE: f64 = 1.01;

/// Indices of circular local maxima that rise `PROMINENCE` above the lowest
/// value between them and the nearest higher sample on each side.
fn prominent_peaks(p: &[f64]) -> Vec<usize> {
    let n = p.len();
    let mut out = Vec::new();
    for k in 0..n {
        let v = p[k];
        if !(v > p[(k + n - 1) % n] && v > p[(k + 1) % n]) {
            continue;
        }
        let side = |step: usize| {
            let mut low = v;
            for m in 1..n / 2 {
                let w = p[(k + step * m) % n];
                if w > v {
                    break;
                }
                low = low.min(w);
            }
            low
        };
        if v >= PROMINENCE * side(1).max(side(n - 1)) {
            out.push(k);
        }
    }
    out
}

/// Maxima of `|value|` along the innermost ring around the sphere that
/// interpolates from valid points only, kept when `|z| < R/2` and `x ≠ 0`.
fn lateral_maxima(xs: &[f64], zs: &[f64], values: &[Option<f64>], radius: f64) -> Vec<[f64; 2]> {
    if xs.len() < 2 || zs.len() < 2 {
        return Vec::new();
    }
    let h = (xs[1] - xs[0]).abs().max((zs[1] - zs[0]).abs());
    let reach = xs
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
        .min(zs.iter().map(|z| z.abs()).fold(0.0, f64::max));
    let mut rho = radius + h;
    while rho < reach {
        let angle = |k: usize| std::f64::consts::TAU * k as f64 / RING_SAMPLES as f64;
        let profile: Option<Vec<f64>> = (0..RING_SAMPLES)
            .map(|k| interpolate_abs(xs, zs, values, rho * angle(k).sin(), rho * angle(k).cos()))
            .collect();
        if let Some(p) = profile {
            return prominent_peaks(&p)
                .into_iter()
                .map(|k| [rho * angle(k).sin(), rho * angle(k).cos()])
                .filter(|[x, z]| x.abs() > 0.5 * h && z.abs() < 0.5 * radius)
                .collect();
        }
        rho += h;
    }
    Vec::new()
}

/// Variance of the chosen component over the xz plane in the `|d|²`-normalised
/// convention, masked inside the sphere, within the surface gap and at the emitter.
pub fn run_spatial_map(cfg: &ScanConfig) -> Result<ResultGrid, ScanError> {
    let setup = Setup::new(cfg);
    let s_nm = single(&cfg.emitter.s_nm, "emitter.s_nm")?;
    let lambda = single(&cfg.emitter.lambda_nm, "emitter.lambda_nm")?;
    let radius = single(&cfg.geometry.radius_nm, "geometry.radius_nm")?;
    let delta_0 = single(&cfg.drive.delta0, "drive.delta0")?;
    let strength = match (cfg.drive.mode, &cfg.drive.omega_over_gamma0) {
        (DriveMode::Local, Some(o)) => single(o, "drive.omega_over_gamma0")?,
        _ => single(&cfg.drive.z0, "drive.z0")?,
    };
    let plane = cfg.geometry.plane.as_ref().expect("validated");
    let (xs, zs) = (plane.x_nm.samples(), plane.z_nm.samples());
    let c = setup.component;
    let env = setup
        .environment(radius)
        .map_err(|e| ScanError::Numerical(format!("environment: {}", e.as_str())))?;
    let emitter = build_emitter(cfg, radius, s_nm, lambda)
        .map_err(|e| ScanError::Config(format!("emitter: {}", e.as_str())))?;
    let dressed = dress(cfg, &emitter, &env)
        .map_err(|e| ScanError::Numerical(format!("dressed rates: {}", e.as_str())))?;
    let (delta, z) = drive_point(cfg, delta_0, strength, &dressed);
    let st = state(delta, z, &dressed)
        .map_err(|e| ScanError::Numerical(format!("steady state: {}", e.as_str())))?;
    let scale = dipole_normalization(&emitter).powi(2);
    let nz = zs.len();
    let results = evaluate(xs.len() * nz, |i| {
        let r = Vec3::new(xs[i / nz], 0.0, zs[i % nz]);
        if r.norm() <= radius + plane.surface_gap_nm || (r - emitter.position_nm).norm() < 1e-9 {
            return Err(PointError::Masked);
        }
        let a = amplitude(cfg, &emitter, &env, &r, setup.mode)?;
        let v = field_variance(&a, c, None, &st, cfg.drive.quadrature_phase_rad);
        Ok((
            v.value * scale,
            vec![a.magnitude(c) * dipole_normalization(&emitter)],
        ))
    });
    let values: Vec<Option<f64>> = results
        .iter()
        .map(|r| r.as_ref().ok().map(|v| v.0))
        .collect();
    let (min, at) = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (v, i)))
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .ok_or_else(|| ScanError::Numerical("every grid point failed".into()))?;
    let summary = SpatialSummary {
        radius_nm: radius,
        atomic_variance: nanosqueeze_core::emitter::atomic_variance(
            &st,
            cfg.drive.quadrature_phase_rad,
        ),
        min,
        min_at: [xs[at / nz], zs[at % nz]],
        negative_points: values.iter().flatten().filter(|v| **v < 0.0).count(),
        lateral_maxima: lateral_maxima(&xs, &zs, &values, radius),
    };
    let meta = metadata(
        cfg,
        "(Delta E_i)^2 (eps0 c^2/omega_E^2)^2 / |d|^2 in nm^-2",
        PlotKind::Heatmap,
        &results,
    );
    let axes = vec![Axis::new("x", "nm", xs), Axis::new("z", "nm", zs)];
    Ok(assemble(
        meta,
        axes,
        ("variance", "nm^-2"),
        &[("amplitude", "nm^-1")],
        results,
        Summary::SpatialMap(summary),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nanosqueeze_core::emitter::optimal_atomic_variance;

    #[test]
    fn optimal_saturation_minimizes() {
        for x in [0.0, 0.2, 0.7] {
            let z = optimal_saturation(x);
            let v = optimal_atomic_variance(0.0, z, x);
            for dz in [-1e-3, 1e-3] {
                assert!(optimal_atomic_variance(0.0, z + dz, x) > v);
            }
        }
        assert!((optimal_atomic_variance(0.0, optimal_saturation(0.0), 0.0) + 0.125).abs() < 1e-15);
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, v) = golden_min(|x| (x - 0.3) * (x - 0.3) - 2.0, -1.0, 1.0);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v + 2.0).abs() < 1e-12);
    }

    #[test]
    fn lobes_on_a_closed_sweep() {
        let v: Vec<f64> = (0..360)
            .map(|i| (i as f64).to_radians().sin().abs())
            .collect();
        assert_eq!(count_lobes(&v), 2);
        let v: Vec<f64> = (0..360)
            .map(|i| (2.0 * (i as f64).to_radians()).sin().abs())
            .collect();
        assert_eq!(count_lobes(&v), 4);
    }

    #[test]
    fn shallow_interpolation_ripples_are_not_peaks() {
        let mut v: Vec<f64> = (0..360)
            .map(|i| 2.0 + (i as f64).to_radians().cos())
            .collect();
        v[100] = v[99] + 1e-6;
        v[200] = 5.0;
        assert_eq!(prominent_peaks(&v), vec![0, 200]);
    }
}
