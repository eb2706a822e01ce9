//! One function per subcommand; all write CSV tables plus a JSON summary
//! into the manifest's output directory.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use serde_json::json;

use effmed_core::analysis::{
    born_focusing_design, convergence_study, far_field_discrete, far_field_effective,
    negative_refraction_bands, recipe_count_compare, solid_angle_target, ConvergenceStudyConfig,
    DispersionSamples,
};
use effmed_core::discrete::{
    assemble_discrete_system_with, solve_discrete_with, SolveMethod, SolveOptions, StorageMode,
    DENSE_AUTO_LIMIT, DENSE_HARD_CAP,
};
use effmed_core::effective::{assemble_ls_system, solve_effective_with, ComplexGridField};
use effmed_core::io;
use effmed_core::kernels::{ball_volume, green};
use effmed_core::medium::{MediumSpec, WaveContext};
use effmed_core::placement::{
    place_inhomogeneities_with, predicted_count, riemann_sum, PlacementMode, PlacementOptions,
};
use effmed_core::quadrature::{midpoint_integral_3d_complex, DirectionSet};
use effmed_core::Domain64;

use crate::error::{CliError, ErrorCode};
use crate::manifest::RunManifest;
use crate::summary::SummaryBuilder;

type Result<T> = std::result::Result<T, CliError>;

fn default_alpha() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn wave_context(k: f64, alpha: [f64; 3]) -> Result<WaveContext<f64>> {
    WaveContext::new(k, alpha).map_err(CliError::from)
}

fn solve_options(manifest: &RunManifest, solver: Option<&str>) -> Result<SolveOptions<f64>> {
    let method = match solver.unwrap_or("auto") {
        "auto" => SolveMethod::Auto,
        "dense" => SolveMethod::DenseLu,
        "iterative" => SolveMethod::Iterative,
        other => {
            return Err(CliError::new(
                ErrorCode::Input,
                format!("unknown solver {other:?} (auto | dense | iterative)"),
            ))
        }
    };
    Ok(SolveOptions {
        method,
        tol_rel: manifest.tolerances.solver_residual,
        max_iter: 2000,
    })
}

fn load_medium(manifest: &RunManifest) -> Result<MediumSpec<f64>> {
    let path = manifest.input("medium")?;
    io::read_medium_file::<f64>(path).map_err(CliError::from)
}

fn ensure_output_dir(manifest: &RunManifest) -> Result<()> {
    std::fs::create_dir_all(&manifest.output_dir).map_err(|e| {
        CliError::new(
            ErrorCode::Input,
            format!(
                "cannot create output directory {}: {e}",
                manifest.output_dir.display()
            ),
        )
    })
}

fn placement_options(manifest: &RunManifest, mode: Option<&str>, p_max: f64) -> Result<PlacementOptions<f64>> {
    let mode = match mode.unwrap_or("lattice") {
        "lattice" => PlacementMode::CenteredPrefix,
        "random" => PlacementMode::Random {
            seed: manifest.seed,
        },
        other => {
            return Err(CliError::new(
                ErrorCode::Input,
                format!("unknown placement mode {other:?} (lattice | random)"),
            ))
        }
    };
    Ok(PlacementOptions { p_max, mode })
}

// ---------------------------------------------------------------------
// design
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct DesignParams {
    a: f64,
    #[serde(default)]
    placement: Option<String>,
}

pub fn design(manifest: &RunManifest, dry_run: bool) -> Result<()> {
    let params: DesignParams = manifest.params()?;
    let mut medium = load_medium(manifest)?;
    let p_max = medium.packing.p_max;
    medium.design().map_err(CliError::from)?;
    let density = medium.density().expect("designed medium has density");
    let amplitude = medium.amplitude().expect("designed medium has amplitude");

    let predicted = predicted_count(&density, params.a, &medium.domain)?;
    if dry_run {
        println!(
            "design: predicted M = {:.0}, config CSV ~ {:.1} MiB",
            predicted,
            predicted * 90.0 / 1.0e6
        );
        return Ok(());
    }
    let summary = SummaryBuilder::start(manifest)?;
    ensure_output_dir(manifest)?;
    let opts = placement_options(manifest, params.placement.as_deref(), p_max)?;
    let config = place_inhomogeneities_with(&density, params.a, &medium.domain, &opts)?
        .with_amplitudes_from(&amplitude);
    let csv = manifest.output_dir.join("config.csv");
    io::write_config_csv(&config, medium.k, &csv)?;
    summary.finish(
        json!({
            "M": config.len(),
            "predicted_M": predicted,
            "volume_fraction": config.len() as f64 * ball_volume(params.a)
                / medium.domain.volume(),
            "config_csv": csv.display().to_string(),
        }),
        &manifest.output_dir,
    )
}

// ---------------------------------------------------------------------
// solve-discrete
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct SolveDiscreteParams {
    #[serde(default = "default_alpha")]
    alpha: [f64; 3],
    #[serde(default)]
    self_term: bool,
    #[serde(default)]
    solver: Option<String>,
    #[serde(default)]
    dump_system: bool,
}

pub fn solve_discrete_cmd(manifest: &RunManifest, dry_run: bool) -> Result<()> {
    let params: SolveDiscreteParams = manifest.params()?;
    let config_path = manifest.input("config")?;
    let (config, k) = io::read_config_csv::<f64>(config_path)?;
    let ctx = wave_context(k, params.alpha)?;
    if dry_run {
        let m = config.len();
        let dense_bytes = (m * m * 16) as f64 / 1.0e6;
        println!(
            "solve-discrete: M = {m}, dense storage {dense_bytes:.1} MB ({})",
            if m <= DENSE_AUTO_LIMIT {
                "dense path"
            } else if m <= DENSE_HARD_CAP {
                "matrix-free path (dense on request)"
            } else {
                "matrix-free only"
            }
        );
        return Ok(());
    }
    let summary = SummaryBuilder::start(manifest)?;
    ensure_output_dir(manifest)?;
    let opts = solve_options(manifest, params.solver.as_deref())?;
    let storage = if params.dump_system {
        StorageMode::Dense
    } else {
        StorageMode::Auto
    };
    let mut system = assemble_discrete_system_with(&config, &ctx, params.self_term, storage)?;
    let sol = solve_discrete_with(&mut system, &opts)?;
    let csv = manifest.output_dir.join("center_field.csv");
    io::write_center_field_csv(&sol.values, &csv)?;
    if params.dump_system {
        let dense = system.ensure_dense()?;
        io::write_system_dump(dense, k, config.a, &manifest.output_dir.join("system.emd"))?;
    }
    summary.finish(
        json!({
            "M": config.len(),
            "method": sol.method,
            "residual_inf": sol.residual_inf,
            "iterations": sol.iterations,
            "center_field_csv": csv.display().to_string(),
        }),
        &manifest.output_dir,
    )
}

// ---------------------------------------------------------------------
// solve-effective
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct SolveEffectiveParams {
    #[serde(default = "default_alpha")]
    alpha: [f64; 3],
    #[serde(default)]
    solver: Option<String>,
    #[serde(default)]
    nvox: Option<[usize; 3]>,
}

pub fn solve_effective_cmd(manifest: &RunManifest, dry_run: bool) -> Result<()> {
    let params: SolveEffectiveParams = manifest.params()?;
    let medium = load_medium(manifest)?;
    let grid = match params.nvox {
        Some(nvox) => medium.domain.with_nvox(nvox)?,
        None => medium.domain.clone(),
    };
    let ctx = wave_context(medium.k, params.alpha)?;
    if dry_run {
        let n = grid.n_voxels();
        println!(
            "solve-effective: n = {n} voxels, dense storage {:.1} MB",
            (n * n * 16) as f64 / 1.0e6
        );
        return Ok(());
    }
    let summary = SummaryBuilder::start(manifest)?;
    ensure_output_dir(manifest)?;
    let opts = solve_options(manifest, params.solver.as_deref())?;
    let q = medium.q();
    let mut system = assemble_ls_system(&q, &grid, &ctx)?;
    let sol = solve_effective_with(&mut system, &opts)?;
    let csv = manifest.output_dir.join("field.csv");
    io::write_grid_field_csv(&sol.field, "u", &csv)?;
    summary.finish(
        json!({
            "n_voxels": grid.n_voxels(),
            "method": sol.method,
            "residual_inf": sol.residual_inf,
            "iterations": sol.iterations,
            "field_csv": csv.display().to_string(),
        }),
        &manifest.output_dir,
    )
}

// ---------------------------------------------------------------------
// farfield
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct FarfieldParams {
    #[serde(default = "default_alpha")]
    alpha: [f64; 3],
    #[serde(default = "default_n_theta")]
    n_theta: usize,
    #[serde(default = "default_n_phi")]
    n_phi: usize,
    #[serde(default)]
    self_term: bool,
    #[serde(default)]
    solver: Option<String>,
}

fn default_n_theta() -> usize {
    16
}

fn default_n_phi() -> usize {
    32
}

pub fn farfield(manifest: &RunManifest, dry_run: bool) -> Result<()> {
    let params: FarfieldParams = manifest.params()?;
    if dry_run {
        println!(
            "farfield: {} directions",
            params.n_theta * params.n_phi
        );
        return Ok(());
    }
    let summary = SummaryBuilder::start(manifest)?;
    ensure_output_dir(manifest)?;
    let opts = solve_options(manifest, params.solver.as_deref())?;

    let pattern = if manifest.inputs.contains_key("config") {
        let (config, k) = io::read_config_csv::<f64>(manifest.input("config")?)?;
        let ctx = wave_context(k, params.alpha)?;
        let set = DirectionSet::product(params.n_theta, params.n_phi).with_direction(ctx.alpha);
        let mut system =
            assemble_discrete_system_with(&config, &ctx, params.self_term, StorageMode::Auto)?;
        let sol = solve_discrete_with(&mut system, &opts)?;
        far_field_discrete(&config, &sol, &ctx, &set)
    } else {
        let medium = load_medium(manifest)?;
        let ctx = wave_context(medium.k, params.alpha)?;
        let set = DirectionSet::product(params.n_theta, params.n_phi).with_direction(ctx.alpha);
        let q = medium.q();
        let mut system = assemble_ls_system(&q, &medium.domain, &ctx)?;
        let sol = solve_effective_with(&mut system, &opts)?;
        far_field_effective(&system, &sol.field, &ctx, &set)
    };
    let csv = manifest.output_dir.join("farfield.csv");
    io::write_farfield_csv(&pattern, &csv)?;
    let forward = pattern.forward_value().unwrap_or(Complex64::new(0.0, 0.0));
    summary.finish(
        json!({
            "directions": pattern.set.len(),
            "forward_re": forward.re,
            "forward_im": forward.im,
            "l2_norm": pattern.l2_norm(),
            "farfield_csv": csv.display().to_string(),
        }),
        &manifest.output_dir,
    )
}

// ---------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct ConvergeParams {
    #[serde(default = "default_alpha")]
    alpha: [f64; 3],
    a_sequence: Vec<f64>,
    #[serde(default = "default_probe_count")]
    probe_count: usize,
    #[serde(default = "default_effective_nvox")]
    effective_nvox: [usize; 3],
    #[serde(default)]
    self_term: bool,
    #[serde(default)]
    placement: Option<String>,
    #[serde(default)]
    solver: Option<String>,
}

fn default_probe_count() -> usize {
    26
}

fn default_effective_nvox() -> [usize; 3] {
    [16, 16, 16]
}

pub fn converge(manifest: &RunManifest, dry_run: bool) -> Result<()> {
    let params: ConvergeParams = manifest.params()?;
    let medium = load_medium(manifest)?;
    let density = medium.density().ok_or_else(|| {
        CliError::new(
            ErrorCode::Validation,
            "converge needs a medium with a number density N",
        )
    })?;
    if dry_run {
        for &a in &params.a_sequence {
            let m = predicted_count(&density, a, &medium.domain)?;
            let dense = m * m * 16.0 / 1.0e6;
            println!(
                "converge: a = {a}: predicted M = {m:.0} ({})",
                if m as usize <= DENSE_AUTO_LIMIT {
                    format!("dense, {dense:.1} MB")
                } else {
                    "matrix-free".to_string()
                }
            );
        }
        return Ok(());
    }
    let summary = SummaryBuilder::start(manifest)?;
    ensure_output_dir(manifest)?;
    let ctx = wave_context(medium.k, params.alpha)?;
    let opts = placement_options(manifest, params.placement.as_deref(), medium.packing.p_max)?;
    let cfg = ConvergenceStudyConfig {
        p_max: medium.packing.p_max,
        probes: effmed_core::analysis::standard_probes(&medium.domain, medium.k, params.probe_count),
        effective_nvox: params.effective_nvox,
        self_term: params.self_term,
        placement: opts.mode,
        solve: solve_options(manifest, params.solver.as_deref())?,
        ..ConvergenceStudyConfig::new(
            medium.q(),
            density,
            ctx,
            medium.domain.clone(),
            params.a_sequence.clone(),
        )
    };
    let report = convergence_study(&cfg)?;
    let csv = manifest.output_dir.join("convergence.csv");
    io::write_convergence_csv(&report, manifest.record_timing, &csv)?;
    summary.finish(
        json!({
            "rows": report.rows.len(),
            "final_sup_err": report.rows.last().map(|r| r.sup_err),
            "final_relative_err": report.final_relative_error(),
            "err_scale": report.err_scale,
            "slope": report.slope,
            "strictly_decreasing": report.strictly_decreasing(),
            "convergence_csv": csv.display().to_string(),
        }),
        &manifest.output_dir,
    )
}

// ---------------------------------------------------------------------
// lemma1
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct Lemma1Params {
    a_sequence: Vec<f64>,
    /// Source point of the Green-kernel integrand; keep it outside the
    /// domain so the integrand stays smooth.
    source: [f64; 3],
    #[serde(default = "default_reference_resolution")]
    reference_resolution: usize,
    #[serde(default)]
    placement: Option<String>,
}

fn default_reference_resolution() -> usize {
    64
}

pub fn lemma1(manifest: &RunManifest, dry_run: bool) -> Result<()> {
    let params: Lemma1Params = manifest.params()?;
    let medium = load_medium(manifest)?;
    let density = medium.density().ok_or_else(|| {
        CliError::new(
            ErrorCode::Validation,
            "lemma1 needs a medium with a number density N",
        )
    })?;
    if dry_run {
        for &a in &params.a_sequence {
            println!(
                "lemma1: a = {a}: predicted M = {:.0}",
                predicted_count(&density, a, &medium.domain)?
            );
        }
        return Ok(());
    }
    let summary = SummaryBuilder::start(manifest)?;
    ensure_output_dir(manifest)?;
    let k = medium.k;
    let z = params.source;
    let f = move |x: [f64; 3]| green(k, x, z);
    let reference = midpoint_integral_3d_complex(
        medium.domain.lo(),
        medium.domain.hi(),
        params.reference_resolution,
        |x| f(x) * density(x),
    );
    let opts = placement_options(manifest, params.placement.as_deref(), medium.packing.p_max)?;
    let mut out = String::from("a,M,sum_re,sum_im,rel_err\n");
    let mut final_rel = 0.0;
    for &a in &params.a_sequence {
        let config = place_inhomogeneities_with(&density, a, &medium.domain, &opts)?;
        let s = riemann_sum(f, &config);
        let rel = (s - reference).norm() / reference.norm().max(1e-300);
        final_rel = rel;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            io::fmt_e12(a),
            config.len(),
            io::fmt_e12(s.re),
            io::fmt_e12(s.im),
            io::fmt_e12(rel)
        ));
    }
    let csv = manifest.output_dir.join("lemma1.csv");
    std::fs::write(&csv, out)
        .map_err(|e| CliError::new(ErrorCode::Input, format!("write lemma1.csv: {e}")))?;
    summary.finish(
        json!({
            "reference_re": reference.re,
            "reference_im": reference.im,
            "final_rel_err": final_rel,
            "lemma1_csv": csv.display().to_string(),
        }),
        &manifest.output_dir,
    )
}

// ---------------------------------------------------------------------
// dispersion
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct DispersionParams {
    #[serde(default)]
    omega: Option<Vec<f64>>,
    #[serde(default)]
    n: Option<Vec<f64>>,
    /// Alternative: analytic index n(omega) with `x` as the frequency.
    #[serde(default)]
    n_expr: Option<String>,
    #[serde(default)]
    omega_range: Option<[f64; 2]>,
    #[serde(default)]
    count: Option<usize>,
    #[serde(default)]
    strictness: Option<f64>,
}

pub fn dispersion(manifest: &RunManifest, dry_run: bool) -> Result<()> {
    let params: DispersionParams = manifest.params()?;
    let (omega, n): (Vec<f64>, Vec<f64>) = match (&params.omega, &params.n, &params.n_expr) {
        (Some(w), Some(n), None) => (w.clone(), n.clone()),
        (None, None, Some(expr)) => {
            let [lo, hi] = params.omega_range.ok_or_else(|| {
                CliError::new(ErrorCode::Input, "n_expr needs omega_range")
            })?;
            let count = params.count.unwrap_or(41).max(3);
            let ast = effmed_core::io::expr::parse(expr).map_err(CliError::from)?;
            let omega: Vec<f64> = (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect();
            let n = omega.iter().map(|&w| ast.eval([w, 0.0, 0.0])).collect();
            (omega, n)
        }
        _ => {
            return Err(CliError::new(
                ErrorCode::Input,
                "dispersion needs either omega + n arrays or n_expr + omega_range",
            ))
        }
    };
    if dry_run {
        println!("dispersion: {} samples", omega.len());
        return Ok(());
    }
    let summary = SummaryBuilder::start(manifest)?;
    ensure_output_dir(manifest)?;
    let samples = DispersionSamples::new(omega, n)?;
    let bands = negative_refraction_bands(&samples, params.strictness);
    let csv = manifest.output_dir.join("bands.csv");
    io::write_bands_csv(&bands, &csv)?;
    summary.finish(
        json!({
            "bands": bands
                .iter()
                .map(|(lo, hi)| json!([lo, hi]))
                .collect::<Vec<_>>(),
            "bands_csv": csv.display().to_string(),
        }),
        &manifest.output_dir,
    )
}

// ---------------------------------------------------------------------
// focus
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct FocusTargetParams {
    kind: String,
    #[serde(default)]
    axis: Option<[f64; 3]>,
    #[serde(default)]
    half_angle_deg: Option<f64>,
}

#[derive(Deserialize)]
struct FocusParams {
    #[serde(default = "default_alpha")]
    alpha: [f64; 3],
    #[serde(default = "default_n_theta")]
    n_theta: usize,
    #[serde(default = "default_n_phi")]
    n_phi: usize,
    regularization: f64,
    target: FocusTargetParams,
    #[serde(default)]
    nvox: Option<[usize; 3]>,
}

pub fn focus(manifest: &RunManifest, dry_run: bool) -> Result<()> {
    let params: FocusParams = manifest.params()?;
    let medium = load_medium(manifest)?;
    let grid = match params.nvox {
        Some(nvox) => medium.domain.with_nvox(nvox)?,
        None => medium.domain.clone(),
    };
    if dry_run {
        println!(
            "focus: {} directions x {} voxels",
            params.n_theta * params.n_phi,
            grid.n_voxels()
        );
        return Ok(());
    }
    let summary = SummaryBuilder::start(manifest)?;
    ensure_output_dir(manifest)?;
    let ctx = wave_context(medium.k, params.alpha)?;
    let set = DirectionSet::product(params.n_theta, params.n_phi);
    let target = match params.target.kind.as_str() {
        "solid_angle" => {
            let axis = params.target.axis.unwrap_or([0.0, 0.0, 1.0]);
            let half = params.target.half_angle_deg.unwrap_or(30.0).to_radians();
            solid_angle_target(&set, axis, half)
        }
        other => {
            return Err(CliError::new(
                ErrorCode::Input,
                format!("unknown focus target kind {other:?}"),
            ))
        }
    };
    let design = born_focusing_design(&target, &set, &grid, &ctx, params.regularization)?;
    let csv = manifest.output_dir.join("q_designed.csv");
    io::write_grid_field_csv(&design.q, "q", &csv)?;
    summary.finish(
        json!({
            "linear_residual": design.linear_residual,
            "nonlinear_residual": design.nonlinear_residual,
            "cond_estimate": design.cond_estimate,
            "q_csv": csv.display().to_string(),
        }),
        &manifest.output_dir,
    )
}

// ---------------------------------------------------------------------
// counts
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct CountsParams {
    a_values: Vec<f64>,
    kappa_values: Vec<f64>,
    n_level: f64,
}

pub fn counts(manifest: &RunManifest, dry_run: bool) -> Result<()> {
    let params: CountsParams = manifest.params()?;
    let medium = load_medium(manifest)?;
    if dry_run {
        println!(
            "counts: {} rows",
            params.a_values.len() * params.kappa_values.len()
        );
        return Ok(());
    }
    let summary = SummaryBuilder::start(manifest)?;
    ensure_output_dir(manifest)?;
    let mut rows = Vec::new();
    for &kappa in &params.kappa_values {
        for &a in &params.a_values {
            let c = recipe_count_compare(a, kappa, params.n_level, &medium.domain)?;
            rows.push((a, kappa, c));
        }
    }
    let csv = manifest.output_dir.join("counts.csv");
    io::write_counts_csv(&rows, &csv)?;
    summary.finish(
        json!({
            "rows": rows.len(),
            "counts_csv": csv.display().to_string(),
        }),
        &manifest.output_dir,
    )
}

/// Evaluate a solved effective field back onto its grid as a sanity table
/// (used by tests needing a `ComplexGridField` from CSV).
#[allow(dead_code)]
pub fn grid_field_from_csv(path: &Path) -> Result<ComplexGridField<f64>> {
    io::read_grid_field_csv::<f64>(path).map_err(CliError::from)
}

/// Shared dispatch used by `run` and the named subcommands.
pub fn dispatch(manifest: &RunManifest, dry_run: bool) -> Result<()> {
    match manifest.subcommand.as_str() {
        "design" => design(manifest, dry_run),
        "solve-discrete" => solve_discrete_cmd(manifest, dry_run),
        "solve-effective" => solve_effective_cmd(manifest, dry_run),
        "farfield" => farfield(manifest, dry_run),
        "converge" => converge(manifest, dry_run),
        "lemma1" => lemma1(manifest, dry_run),
        "dispersion" => dispersion(manifest, dry_run),
        "focus" => focus(manifest, dry_run),
        "counts" => counts(manifest, dry_run),
        other => Err(CliError::new(
            ErrorCode::Input,
            format!("unknown subcommand {other:?}"),
        )),
    }
}

/// Guard against typos: `effmed converge manifest.json` requires the
/// manifest to declare the same subcommand.
pub fn check_subcommand(manifest: &RunManifest, expected: &str) -> Result<()> {
    if manifest.subcommand != expected {
        return Err(CliError::new(
            ErrorCode::Input,
            format!(
                "manifest declares subcommand {:?} but {expected:?} was invoked",
                manifest.subcommand
            ),
        ));
    }
    Ok(())
}

#[allow(dead_code)]
fn _unused_domain_alias(_: &Domain64) {}
