//! Batch experiment layer: scenario configuration, synthetic-data
//! generation with an inverse-crime guard, and the experiment runners
//! behind the command-line verbs (single reconstruction, L-curve,
//! statistical benchmark, mixing-matrix cache).

use crate::diagnostics::{
    add_noise, certificate, error_e1, error_e2, error_e2_flow, optimality_residuals,
    CertificateField,
};
use crate::error::{Error, Result};
use crate::fem::{assemble, FrequencySystem, HeatFlow};
use crate::measure::{DiscreteMeasure, PointSourceList};
use crate::mesh::{
    build_mesh_with_tags, control_node_set, locate_node, BoundaryTag, MeshGrid, SideTags,
};
use crate::obsop::{
    apply_weight, build_mixing, compute_weight, forward, obs_norm, read_mixing, write_mixing,
    MixingMatrix, WeightKind, WeightTable,
};
use crate::solver::{continuation, run, Algorithm, SolveReport, SolverSettings, Termination};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

fn default_extent() -> [f64; 2] {
    [4.0, 4.0]
}

fn default_c() -> f64 {
    345.0
}

fn default_gap_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    10_000
}

fn default_true() -> bool {
    true
}

fn default_sigmas() -> Vec<f64> {
    vec![0.2, 0.05]
}

fn default_algorithm() -> Algorithm {
    Algorithm::Pdap
}

fn default_weight() -> WeightKind {
    WeightKind::Omega2
}

/// Boundary condition names per side; defaults to reflecting walls left and
/// top, absorbing walls bottom and right.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundarySpec {
    pub left: String,
    pub right: String,
    pub bottom: String,
    pub top: String,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            left: "neumann".into(),
            right: "absorbing".into(),
            bottom: "absorbing".into(),
            top: "neumann".into(),
        }
    }
}

fn parse_tag(s: &str) -> Result<BoundaryTag> {
    match s {
        "neumann" => Ok(BoundaryTag::Neumann),
        "absorbing" => Ok(BoundaryTag::Absorbing),
        _ => Err(Error::config(format!("unknown boundary tag '{s}'"))),
    }
}

impl BoundarySpec {
    pub fn to_tags(&self) -> Result<SideTags> {
        Ok(SideTags {
            left: parse_tag(&self.left)?,
            right: parse_tag(&self.right)?,
            bottom: parse_tag(&self.bottom)?,
            top: parse_tag(&self.top)?,
        })
    }
}

/// One exact source: a position and a complex amplitude `[re, im]` per
/// frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceSpec {
    pub position: [f64; 2],
    pub amplitude: Vec<[f64; 2]>,
}

impl SourceSpec {
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.amplitude
            .iter()
            .map(|a| Complex64::new(a[0], a[1]))
            .collect()
    }
}

/// Random-source specification for the statistical benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomSourceSpec {
    /// Source counts to benchmark, e.g. `[1, 2, 3]`.
    pub counts: Vec<usize>,
    /// Draws per count.
    pub draws: usize,
    pub seed: u64,
}

/// Experiment configuration, read from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_extent")]
    pub extent: [f64; 2],
    /// Grid level of the inversion.
    pub level: u32,
    /// Grid level of the synthetic data; defaults to one level finer than
    /// the inversion to avoid an inverse crime.
    pub data_level: Option<u32>,
    #[serde(default)]
    pub boundary: BoundarySpec,
    /// Speed of sound in m/s.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Angular frequencies in rad/s; wavenumbers are `k_n = omega_n / c`
    /// and the impedance parameter is `kappa_n = k_n`.
    pub omega: Vec<f64>,
    pub microphones: Vec<[f64; 2]>,
    /// Axis-aligned control region `[[x0, y0], [x1, y1]]`; defaults to the
    /// whole domain.
    pub control_region: Option<[[f64; 2]; 2]>,
    /// Positions whose nearest nodes are excluded from the control set.
    #[serde(default)]
    pub control_exclusions: Vec<[f64; 2]>,
    #[serde(default = "default_weight")]
    pub weight: WeightKind,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    pub random_sources: Option<RandomSourceSpec>,
    /// Weight kinds compared by the benchmark runner.
    #[serde(default)]
    pub benchmark_weights: Vec<WeightKind>,
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    pub alpha: Option<f64>,
    /// Explicit schedule for L-curve runs; defaults to
    /// `10^{-j/4}, j = 0..=20`.
    pub alpha_schedule: Option<Vec<f64>>,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_true")]
    pub prune: bool,
    /// Heat-kernel widths of the e2 metric.
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let scn: Scenario =
            toml::from_str(text).map_err(|e| Error::config(format!("scenario parse: {e}")))?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.is_empty() {
            return Err(Error::config("no frequencies given"));
        }
        if self.omega.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::config("frequencies must be positive"));
        }
        if !(self.c > 0.0) {
            return Err(Error::config("speed of sound must be positive"));
        }
        if self.microphones.is_empty() {
            return Err(Error::config("no microphones given"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(Error::config("alpha must be positive"));
            }
        }
        if let Some(dl) = self.data_level {
            if dl < self.level {
                return Err(Error::config(
                    "data-generation level must not be coarser than the solve level",
                ));
            }
        }
        for s in &self.sources {
            if s.amplitude.len() != self.omega.len() {
                return Err(Error::config(
                    "source amplitude count must match the frequency count",
                ));
            }
        }
        Ok(())
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w / self.c).collect()
    }

    pub fn data_level(&self) -> u32 {
        self.data_level.unwrap_or(self.level + 1)
    }

    pub fn schedule(&self) -> Vec<f64> {
        self.alpha_schedule
            .clone()
            .unwrap_or_else(|| (0..=20).map(|j| 10f64.powf(-(j as f64) / 4.0)).collect())
    }

    fn settings(&self) -> Result<SolverSettings> {
        let alpha = self
            .alpha
            .ok_or_else(|| Error::config("scenario gives no alpha"))?;
        let mut s = SolverSettings::new(alpha, self.algorithm)?;
        s.gap_tol = self.gap_tol;
        s.max_iter = self.max_iter;
        s.prune = self.prune;
        Ok(s)
    }
}

/// Solve-level discretization of a scenario: mesh, frequency systems,
/// snapped microphone nodes, control set, mixing matrix and weight.
pub struct Context {
    pub mesh: Arc<MeshGrid>,
    pub systems: Vec<FrequencySystem>,
    pub mic_nodes: Vec<usize>,
    pub controls: Vec<usize>,
    /// Unweighted mixing matrix.
    pub mixing: MixingMatrix,
    pub weight: WeightTable,
    /// Column-weighted mixing matrix the solver runs on.
    pub weighted: MixingMatrix,
    pub warnings: Vec<String>,
}

fn snap_nodes(
    mesh: &MeshGrid,
    points: &[[f64; 2]],
    what: &str,
    warnings: &mut Vec<String>,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let (id, snapped) = locate_node(mesh, *p)?;
        if snapped {
            let c = mesh.node_coord(id);
            warnings.push(format!(
                "{what} ({}, {}) snapped to node {id} at ({}, {})",
                p[0], p[1], c[0], c[1]
            ));
        }
        out.push(id);
    }
    Ok(out)
}

/// Builds the solve-level context, optionally reusing a cached mixing
/// matrix (validated against the scenario before use).
pub fn build_context(scn: &Scenario, cache: Option<&Path>) -> Result<Context> {
    scn.validate()?;
    let mesh = Arc::new(build_mesh_with_tags(
        scn.extent,
        scn.level,
        scn.boundary.to_tags()?,
    )?);
    let mut warnings = Vec::new();
    let mic_nodes = snap_nodes(&mesh, &scn.microphones, "microphone", &mut warnings)?;
    let region = scn
        .control_region
        .unwrap_or([[0.0, 0.0], [scn.extent[0], scn.extent[1]]]);
    let exclusions = snap_nodes(&mesh, &scn.control_exclusions, "exclusion", &mut warnings)?;
    let controls = control_node_set(&mesh, region, &exclusions)?;

    let wavenumbers = scn.wavenumbers();
    let systems: Vec<FrequencySystem> = wavenumbers
        .iter()
        .map(|&k| assemble(&mesh, k, k))
        .collect::<Result<_>>()?;

    let mixing = match cache {
        Some(path) if path.exists() => {
            let mut file = std::io::BufReader::new(
                fs::File::open(path).map_err(|e| Error::config(format!("cache open: {e}")))?,
            );
            let m = read_mixing(&mut file)?;
            let k_match = m.wavenumbers.len() == wavenumbers.len()
                && m.wavenumbers
                    .iter()
                    .zip(&wavenumbers)
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs());
            if m.level != scn.level
                || m.weighted
                || !k_match
                || m.microphones != mic_nodes
                || m.controls != controls
            {
                return Err(Error::config(format!(
                    "mixing cache {} does not match the scenario",
                    path.display()
                )));
            }
            m
        }
        _ => build_mixing(&systems, &mic_nodes, &controls)?,
    };
    warnings.extend(mixing.warnings.iter().cloned());

    let weight = compute_weight(scn.weight, &mixing, &mesh)?;
    let weighted = apply_weight(&mixing, &weight)?;
    Ok(Context {
        mesh,
        systems,
        mic_nodes,
        controls,
        mixing,
        weight,
        weighted,
        warnings,
    })
}

/// Exact-source measure on the solve mesh, with a warning when a source
/// falls outside the control set.
pub fn exact_measure(scn: &Scenario, ctx: &Context) -> Result<Option<DiscreteMeasure>> {
    if scn.sources.is_empty() {
        return Ok(None);
    }
    let mut entries = Vec::new();
    for s in &scn.sources {
        let (id, _) = locate_node(&ctx.mesh, s.position)?;
        entries.push((id, s.coefficients()));
    }
    entries.sort_by_key(|&(id, _)| id);
    Ok(Some(DiscreteMeasure::from_entries(
        scn.omega.len(),
        entries,
    )?))
}

/// Synthesizes microphone data by a finite-element solve on the
/// data-generation grid, then perturbs it with seeded noise. Returns the
/// exact and the noisy observation vectors.
pub fn synthesize_data(scn: &Scenario) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    scn.validate()?;
    if scn.sources.is_empty() {
        return Err(Error::config("data synthesis requires exact sources"));
    }
    let data_level = scn.data_level();
    let mesh = Arc::new(build_mesh_with_tags(
        scn.extent,
        data_level,
        scn.boundary.to_tags()?,
    )?);
    let mut warnings = Vec::new();
    let mic_nodes = snap_nodes(&mesh, &scn.microphones, "microphone", &mut warnings)?;
    let n_freq = scn.omega.len();
    let n_mic = mic_nodes.len();
    let mut p_exact = vec![Complex64::ZERO; n_freq * n_mic];
    for (n, &k) in scn.wavenumbers().iter().enumerate() {
        let system = assemble(&mesh, k, k)?;
        let loads: Vec<(usize, Complex64)> = scn
            .sources
            .iter()
            .map(|s| locate_node(&mesh, s.position).map(|(id, _)| (id, s.coefficients()[n])))
            .collect::<Result<_>>()?;
        let field = system.solve_point_sources(&loads)?;
        for (m, &id) in mic_nodes.iter().enumerate() {
            p_exact[n * n_mic + m] = field[id];
        }
    }
    let p_d = add_noise(&p_exact, scn.noise_level, scn.noise_seed)?;
    Ok((p_exact, p_d))
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub e1: f64,
    /// e2 per configured sigma, aligned with `Scenario::sigmas`.
    pub e2: Vec<f64>,
}

pub struct ScenarioOutcome {
    /// Solver report in the weighted variable `v = w u`.
    pub report: SolveReport,
    /// Reconstruction in the source variable `u`.
    pub solution: DiscreteMeasure,
    pub merged: PointSourceList,
    pub residuals: (f64, f64),
    pub certificate: CertificateField,
    pub metrics: Option<Metrics>,
    pub warnings: Vec<String>,
}

fn write_grid_dump(
    path: &Path,
    mesh: &MeshGrid,
    field: &str,
    nodes: &[usize],
    values: &[f64],
) -> Result<()> {
    let mut full = vec![0.0f64; mesh.num_nodes()];
    for (&id, &v) in nodes.iter().zip(values) {
        full[id] = v;
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "nx,ny,extent_x,extent_y,level,field")?;
    let (rows, cols) = (mesh.ny + 1, mesh.nx + 1);
    writeln!(
        out,
        "{},{},{},{},{},{}",
        cols, rows, mesh.extent[0], mesh.extent[1], mesh.level, field
    )?;
    for r in 0..rows {
        let row: Vec<String> = (0..cols)
            .map(|c| format!("{:.17e}", full[r * cols + c]))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_trace(path: &Path, report: &SolveReport) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "iteration,objective,gap,support_size,candidate")?;
    for row in &report.trace {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{},{}",
            row.iteration,
            row.objective,
            row.gap,
            row.support_size,
            row.candidate.map(|c| c.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

fn write_sources(path: &Path, list: &PointSourceList) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    write!(out, "x,y")?;
    for n in 0..list.n_freq {
        write!(out, ",re_{n},im_{n}")?;
    }
    writeln!(out)?;
    for (pos, c) in &list.sources {
        write!(out, "{:.17e},{:.17e}", pos[0], pos[1])?;
        for v in c {
            write!(out, ",{:.17e},{:.17e}", v.re, v.im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn measure_json(u: &DiscreteMeasure, mesh: &MeshGrid) -> serde_json::Value {
    serde_json::json!(u
        .entries
        .iter()
        .map(|(id, c)| {
            let pos = mesh.node_coord(*id);
            serde_json::json!({
                "node": id,
                "x": pos[0],
                "y": pos[1],
                "coefficients": c.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
            })
        })
        .collect::<Vec<_>>())
}

fn metrics_for(
    scn: &Scenario,
    ctx: &Context,
    truth: &DiscreteMeasure,
    solution: &DiscreteMeasure,
) -> Result<Metrics> {
    let e1 = error_e1(truth, solution, &ctx.weight)?;
    let e2 = scn
        .sigmas
        .iter()
        .map(|&s| error_e2(truth, solution, s, &ctx.mesh))
        .collect::<Result<Vec<_>>>()?;
    Ok(Metrics { e1, e2 })
}

/// Runs a single reconstruction and writes all artifacts into `out_dir`:
/// report.json, solution.csv, trace.csv, sources.csv (merged spikes), and
/// grid dumps of the certificate and dual-field magnitudes. Artifacts are
/// written even when the solver stops at its iteration cap; the caller
/// decides how to surface that.
pub fn run_scenario(scn: &Scenario, out_dir: &Path) -> Result<ScenarioOutcome> {
    let ctx = build_context(scn, None)?;
    run_scenario_with(scn, &ctx, out_dir)
}

pub fn run_scenario_with(
    scn: &Scenario,
    ctx: &Context,
    out_dir: &Path,
) -> Result<ScenarioOutcome> {
    fs::create_dir_all(out_dir)?;
    let (_, p_d) = synthesize_data(scn)?;
    let settings = scn.settings()?;
    let report = run(&ctx.weighted, &p_d, &settings)?;
    let solution = report.measure.unweight(&ctx.weight)?;
    let merged = solution.cluster_merge(&ctx.mesh, 1)?;
    let residuals =
        optimality_residuals(&solution, &ctx.mixing, &ctx.weight, settings.alpha, &p_d)?;
    let cert = certificate(
        &solution,
        &ctx.mixing,
        &ctx.weight,
        settings.alpha,
        &p_d,
        &ctx.mesh,
    )?;
    let truth = exact_measure(scn, &ctx)?;
    let mut warnings = ctx.warnings.clone();
    if let Some(t) = &truth {
        for (id, _) in &t.entries {
            if ctx.mixing.control_position(*id).is_none() {
                warnings.push(format!("exact source node {id} lies outside the control set"));
            }
        }
    }
    let metrics = truth
        .as_ref()
        .filter(|t| t.entries.iter().all(|(id, _)| ctx.mixing.control_position(*id).is_some()))
        .map(|t| metrics_for(scn, &ctx, t, &solution))
        .transpose()?;

    let mut sol_file = std::io::BufWriter::new(fs::File::create(out_dir.join("solution.csv"))?);
    solution.write_csv(&ctx.mesh, &mut sol_file)?;
    drop(sol_file);
    write_trace(&out_dir.join("trace.csv"), &report)?;
    write_sources(&out_dir.join("sources.csv"), &merged)?;
    write_grid_dump(
        &out_dir.join("certificate.grid.csv"),
        &ctx.mesh,
        "certificate_magnitude",
        &cert.nodes,
        &cert.magnitude,
    )?;
    let dual_mag: Vec<f64> = cert.magnitude.iter().map(|m| m * settings.alpha).collect();
    write_grid_dump(
        &out_dir.join("dual_field.grid.csv"),
        &ctx.mesh,
        "dual_over_weight_magnitude",
        &cert.nodes,
        &dual_mag,
    )?;

    let report_json = serde_json::json!({
        "scenario": scn,
        "solver": {
            "algorithm": scn.algorithm,
            "alpha": report.alpha,
            "termination": report.termination,
            "iterations": report.iterations,
            "misfit": report.misfit,
            "penalty_norm": report.penalty_norm,
            "subproblem_warnings": report.subproblem_warnings,
            "final_gap": report.trace.last().map(|r| r.gap),
        },
        "residuals": { "r1": residuals.0, "r2": residuals.1 },
        "certificate": {
            "global_max_node": cert.global_max.0,
            "global_max": cert.global_max.1,
            "second_max_node": cert.second_max.map(|s| s.0),
            "second_max": cert.second_max.map(|s| s.1),
        },
        "metrics": metrics,
        "solution": measure_json(&solution, &ctx.mesh),
        "warnings": warnings,
    });
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report_json).map_err(|e| Error::config(e.to_string()))?,
    )?;

    Ok(ScenarioOutcome {
        report,
        solution,
        merged,
        residuals,
        certificate: cert,
        metrics,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LcurveRow {
    pub alpha: f64,
    pub misfit: f64,
    /// Relative misfit `||Su - p_d|| / ||p_d||`.
    pub relative_misfit: f64,
    pub weighted_norm: f64,
    pub support_size: usize,
    pub iterations: usize,
    /// First row whose relative misfit falls below the noise level.
    pub morozov: bool,
}

pub struct LcurveResult {
    pub rows: Vec<LcurveRow>,
    /// Index of the Morozov crossing, when one exists.
    pub morozov_index: Option<usize>,
}

/// Warm-started continuation over the alpha schedule, one row per alpha.
pub fn run_lcurve(scn: &Scenario, out_dir: &Path) -> Result<LcurveResult> {
    let ctx = build_context(scn, None)?;
    fs::create_dir_all(out_dir)?;
    let (_, p_d) = synthesize_data(scn)?;
    let schedule = scn.schedule();
    let mut settings = scn.settings().unwrap_or_else(|_| {
        SolverSettings::new(schedule[0], scn.algorithm).expect("positive schedule")
    });
    settings.gap_tol = scn.gap_tol;
    settings.max_iter = scn.max_iter;
    settings.prune = scn.prune;
    let reports = continuation(&ctx.weighted, &p_d, &schedule, &settings)?;
    let p_norm = obs_norm(&p_d);
    let mut rows: Vec<LcurveRow> = reports
        .iter()
        .map(|r| LcurveRow {
            alpha: r.alpha,
            misfit: r.misfit,
            relative_misfit: r.misfit / p_norm,
            weighted_norm: r.penalty_norm,
            support_size: r.measure.entries.len(),
            iterations: r.iterations,
            morozov: false,
        })
        .collect();
    let morozov_index = if scn.noise_level > 0.0 {
        rows.iter().position(|r| r.relative_misfit <= scn.noise_level)
    } else {
        None
    };
    if let Some(i) = morozov_index {
        rows[i].morozov = true;
    }
    let mut out = std::io::BufWriter::new(fs::File::create(out_dir.join("lcurve.csv"))?);
    writeln!(
        out,
        "alpha,misfit,relative_misfit,weighted_norm,support_size,iterations,morozov"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{},{},{}",
            r.alpha,
            r.misfit,
            r.relative_misfit,
            r.weighted_norm,
            r.support_size,
            r.iterations,
            r.morozov as u8
        )?;
    }
    Ok(LcurveResult { rows, morozov_index })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub draw: usize,
    pub n_sources: usize,
    pub weight: WeightKind,
    pub e1: f64,
    pub e2: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkMean {
    pub n_sources: usize,
    pub weight: WeightKind,
    pub draws: usize,
    pub failures: usize,
    pub mean_e1: f64,
    pub mean_e2: Vec<f64>,
}

pub struct BenchmarkResult {
    pub rows: Vec<BenchmarkRow>,
    pub means: Vec<BenchmarkMean>,
}

/// Statistical benchmark over random sources: for every configured source
/// count and weight kind, draws random supports with complex Gaussian
/// coefficients of unit variance, reconstructs them, and averages the
/// e1/e2 errors. The weight-comparison experiment deliberately generates
/// data with the solve-level forward map (equal grids) so that weights are
/// compared on identical discrete problems. Draws run in parallel.
pub fn run_benchmark(scn: &Scenario, out_dir: &Path) -> Result<BenchmarkResult> {
    let spec = scn
        .random_sources
        .clone()
        .ok_or_else(|| Error::config("benchmark requires a [random_sources] section"))?;
    if spec.draws == 0 {
        return Err(Error::config("benchmark requires at least one draw"));
    }
    if spec.counts.is_empty() {
        return Err(Error::config("benchmark requires at least one source count"));
    }
    let alpha = scn
        .alpha
        .ok_or_else(|| Error::config("benchmark requires alpha"))?;
    let kinds = if scn.benchmark_weights.is_empty() {
        vec![WeightKind::One, WeightKind::Omega2]
    } else {
        scn.benchmark_weights.clone()
    };
    let ctx = build_context(scn, None)?;
    fs::create_dir_all(out_dir)?;
    let n_freq = scn.omega.len();

    // One weight table and weighted mixing per compared kind.
    let weighted: Vec<(WeightKind, WeightTable, MixingMatrix)> = kinds
        .iter()
        .map(|&kind| {
            let w = compute_weight(kind, &ctx.mixing, &ctx.mesh)?;
            let m = apply_weight(&ctx.mixing, &w)?;
            Ok((kind, w, m))
        })
        .collect::<Result<_>>()?;

    // Quarter-decade continuation schedule down to the target alpha.
    let mut sched: Vec<f64> = match &scn.alpha_schedule {
        Some(s) => s.iter().copied().filter(|&a| a > alpha).collect(),
        None => (0..)
            .map(|j| 10f64.powf(-(j as f64) / 4.0))
            .take_while(|&a| a > alpha * 1.0001)
            .collect(),
    };
    sched.push(alpha);

    // One heat-flow factorization per smoothing width, shared by all draws.
    let flows: Vec<HeatFlow> = scn
        .sigmas
        .iter()
        .map(|&sg| {
            if !(sg > 0.0) {
                return Err(Error::config("sigmas must be positive"));
            }
            HeatFlow::new(&ctx.mesh, sg, 5)
        })
        .collect::<Result<_>>()?;

    struct DrawOutcome {
        rows: Vec<BenchmarkRow>,
        failures: Vec<(usize, usize, WeightKind, String)>,
    }

    let jobs: Vec<(usize, usize)> = spec
        .counts
        .iter()
        .flat_map(|&c| (0..spec.draws).map(move |d| (c, d)))
        .collect();
    let outcomes: Vec<DrawOutcome> = jobs
        .par_iter()
        .map(|&(n_src, draw)| {
            // Per-draw seed derived from the master seed, stable under
            // reordering of the parallel schedule.
            let seed = spec
                .seed
                .wrapping_add((n_src as u64) << 32)
                .wrapping_add(draw as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ids = std::collections::BTreeSet::new();
            while ids.len() < n_src {
                ids.insert(ctx.controls[rng.gen_range(0..ctx.controls.len())]);
            }
            let entries: Vec<(usize, Vec<Complex64>)> = ids
                .into_iter()
                .map(|id| {
                    let c: Vec<Complex64> = (0..n_freq)
                        .map(|_| {
                            let s = std::f64::consts::FRAC_1_SQRT_2;
                            Complex64::new(
                                s * rng.sample::<f64, _>(rand_distr::StandardNormal),
                                s * rng.sample::<f64, _>(rand_distr::StandardNormal),
                            )
                        })
                        .collect();
                    (id, c)
                })
                .collect();
            let truth = DiscreteMeasure::from_entries(n_freq, entries).expect("distinct ids");
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            let p_exact = match forward(&ctx.mixing, &truth) {
                Ok(p) => p,
                Err(e) => {
                    for (kind, _, _) in weighted.iter() {
                        failures.push((n_src, draw, *kind, e.to_string()));
                    }
                    return DrawOutcome { rows, failures };
                }
            };
            let p_d = match add_noise(&p_exact, scn.noise_level, seed ^ scn.noise_seed) {
                Ok(p) => p,
                Err(e) => {
                    for (kind, _, _) in weighted.iter() {
                        failures.push((n_src, draw, *kind, e.to_string()));
                    }
                    return DrawOutcome { rows, failures };
                }
            };
            for (kind, w, m) in weighted.iter() {
                let result = (|| -> Result<BenchmarkRow> {
                    let mut s = SolverSettings::new(alpha, scn.algorithm)?;
                    s.gap_tol = scn.gap_tol;
                    s.max_iter = scn.max_iter;
                    s.prune = scn.prune;
                    // Warm-started continuation down to the target alpha:
                    // for small alpha a cold solve stalls long before the
                    // minimum-norm solution, while each warm stage stays
                    // cheap and well conditioned.
                    let report = continuation(m, &p_d, &sched, &s)?
                        .pop()
                        .expect("nonempty schedule");
                    let solution = report.measure.unweight(w)?;
                    let e1 = error_e1(&truth, &solution, w)?;
                    let e2 = flows
                        .iter()
                        .map(|flow| error_e2_flow(&truth, &solution, flow, &ctx.mesh))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(BenchmarkRow {
                        draw,
                        n_sources: n_src,
                        weight: *kind,
                        e1,
                        e2,
                    })
                })();
                match result {
                    Ok(row) => rows.push(row),
                    Err(e) => failures.push((n_src, draw, *kind, e.to_string())),
                }
            }
            DrawOutcome { rows, failures }
        })
        .collect();

    let mut rows: Vec<BenchmarkRow> = Vec::new();
    let mut all_failures = Vec::new();
    for o in outcomes {
        rows.extend(o.rows);
        all_failures.extend(o.failures);
    }
    rows.sort_by(|a, b| {
        (a.n_sources, a.draw, format!("{:?}", a.weight))
            .cmp(&(b.n_sources, b.draw, format!("{:?}", b.weight)))
    });

    let n_sigma = scn.sigmas.len();
    let mut means = Vec::new();
    for &n_src in &spec.counts {
        for (kind, _, _) in weighted.iter() {
            let group: Vec<&BenchmarkRow> = rows
                .iter()
                .filter(|r| r.n_sources == n_src && r.weight == *kind)
                .collect();
            let failures = all_failures
                .iter()
                .filter(|f| f.0 == n_src && f.2 == *kind)
                .count();
            if group.is_empty() {
                continue;
            }
            let count = group.len() as f64;
            let mean_e1 = group.iter().map(|r| r.e1).sum::<f64>() / count;
            let mean_e2: Vec<f64> = (0..n_sigma)
                .map(|i| group.iter().map(|r| r.e2[i]).sum::<f64>() / count)
                .collect();
            means.push(BenchmarkMean {
                n_sources: n_src,
                weight: *kind,
                draws: group.len(),
                failures,
                mean_e1,
                mean_e2,
            });
        }
    }

    let sigma_cols = |prefix: &str| {
        scn.sigmas
            .iter()
            .map(|s| format!("{prefix}_sigma_{s}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut out = std::io::BufWriter::new(fs::File::create(out_dir.join("benchmark.csv"))?);
    writeln!(
        out,
        "scenario,n_sources,draw,weight,e1,{}",
        sigma_cols("e2")
    )?;
    for r in &rows {
        let kind = serde_json::to_string(&r.weight).unwrap();
        write!(
            out,
            "{},{},{},{},{:.17e}",
            scn.name,
            r.n_sources,
            r.draw,
            kind.trim_matches('"'),
            r.e1
        )?;
        for v in &r.e2 {
            write!(out, ",{v:.17e}")?;
        }
        writeln!(out)?;
    }
    drop(out);
    let mut out = std::io::BufWriter::new(fs::File::create(out_dir.join("benchmark_means.csv"))?);
    writeln!(
        out,
        "scenario,n_sources,weight,draws,failures,mean_e1,{}",
        sigma_cols("mean_e2")
    )?;
    for m in &means {
        let kind = serde_json::to_string(&m.weight).unwrap();
        write!(
            out,
            "{},{},{},{},{},{:.17e}",
            scn.name,
            m.n_sources,
            kind.trim_matches('"'),
            m.draws,
            m.failures,
            m.mean_e1
        )?;
        for v in &m.mean_e2 {
            write!(out, ",{v:.17e}")?;
        }
        writeln!(out)?;
    }
    Ok(BenchmarkResult { rows, means })
}

/// Precomputes the unweighted mixing matrix and stores it at `path`.
pub fn run_mixcache(scn: &Scenario, path: &Path) -> Result<()> {
    let ctx = build_context(scn, None)?;
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    write_mixing(&mut out, &ctx.mixing)
}

/// True when the report should be treated as non-convergence.
pub fn non_convergent(report: &SolveReport) -> bool {
    report.termination == Termination::MaxIter
}
