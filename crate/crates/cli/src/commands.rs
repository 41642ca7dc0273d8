use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use arte_core::diagnostics::{
    boundary_rank_study, c2_sweep, pair_grid, posterior_bound, rank_ratio_study, write_boundary_rank_csv,
    write_study_csv,
};
use arte_core::pipeline::{Discretization, PhaseTimings};
use arte_core::problems::{ProblemConfig, ProblemSpec};
use arte_core::slab1d::{solve_slab, SlabProblem};
use arte_core::solution::{error_metric, line_probe, ratio_metric, write_probe_csv, SolutionField};
use clap::Args;
use serde_json::json;

use crate::output::{OutDir, RunManifest};
use crate::{CliError, ProblemArgs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeLine {
    pub segment: [f64; 4],
    pub points: usize,
}

pub fn parse_probe_line(s: &str) -> Result<ProbeLine, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(format!("expected x0,y0,x1,y1,n, got `{s}`"));
    }
    let mut seg = [0.0; 4];
    for (v, p) in seg.iter_mut().zip(&parts) {
        *v = p.parse().map_err(|_| format!("bad coordinate `{p}`"))?;
    }
    let points: usize = parts[4].parse().map_err(|_| format!("bad sample count `{}`", parts[4]))?;
    if points < 2 {
        return Err("need at least 2 samples".into());
    }
    Ok(ProbeLine { segment: seg, points })
}

pub fn parse_g_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected g_minus:g_plus, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad anisotropy `{t}`"));
    Ok((parse(a)?, parse(b)?))
}

fn check_delta(d: f64) -> Result<(), CliError> {
    if (0.0..1.0).contains(&d) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("tolerance must lie in [0, 1), got {d}")))
    }
}

fn resolve(args: &ProblemArgs) -> Result<(ProblemSpec, ProblemConfig), CliError> {
    let (mut config, base) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::File {
                path: path.clone(),
                source,
            })?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (ProblemConfig::from_json(&text)?, base)
        }
        None => (
            ProblemConfig {
                problem: "lattice".into(),
                cells: 8,
                order: 4,
                deltas: Vec::new(),
                outputs: Vec::new(),
                coefficients_csv: None,
                inflow: None,
                medium: None,
            },
            PathBuf::from("."),
        ),
    };
    if let Some(p) = &args.problem {
        config.problem = p.clone();
    }
    if let Some(i) = args.cells {
        config.cells = i;
    }
    if let Some(n) = args.order {
        config.order = n;
    }
    for o in &args.outputs {
        if !config.outputs.contains(o) {
            config.outputs.push(o.clone());
        }
    }
    let spec = config.into_spec(&base)?;
    Ok((spec, config))
}

fn config_json(config: &ProblemConfig) -> Result<serde_json::Value, CliError> {
    Ok(serde_json::to_value(config).map_err(arte_core::Error::from)?)
}

fn wants(config: &ProblemConfig, kind: &str) -> bool {
    config.outputs.iter().any(|o| o == kind)
}

fn write_extras(out: &mut OutDir, config: &ProblemConfig, disc: &Discretization, field: &SolutionField) -> Result<serde_json::Value, CliError> {
    if wants(config, "psi") {
        out.write_io("psi.csv", |w| field.write_psi_csv(w))?;
    }
    if wants(config, "quadrature") {
        out.write_io("quadrature.csv", |w| disc.quad.write_csv(w))?;
    }
    let mut eigen = Vec::new();
    if wants(config, "eigen") {
        for (n, s) in disc.cache.spectra().iter().enumerate() {
            let name = format!("eigen_{}.csv", n + 1);
            out.write_io(&name, |w| s.write_csv(w))?;
            eigen.push(json!({ "file": name, "gamma": s.gamma, "g": s.g }));
        }
    }
    Ok(json!(eigen))
}

pub fn solve(
    args: &ProblemArgs,
    delta: Option<f64>,
    full_only: bool,
    adaptive_only: bool,
    probe: Option<ProbeLine>,
    threads: usize,
) -> Result<(), CliError> {
    let (spec, config) = resolve(args)?;
    let delta = delta.or(config.deltas.first().copied()).unwrap_or(1e-2);
    check_delta(delta)?;
    let run_full = !adaptive_only;
    let run_adaptive = !full_only;
    if probe.is_some() && !(run_full && run_adaptive) {
        return Err(CliError::Usage("--probe-line compares both solutions; drop --full/--adaptive".into()));
    }
    let mut out = OutDir::create(&args.out)?;

    let wall = Instant::now();
    let disc = Discretization::from_problem(&spec)?;
    let mut timings = PhaseTimings {
        eigen: disc.eigen_seconds,
        ..Default::default()
    };
    let full = if run_full { Some(disc.solve_full()?) } else { None };
    let adaptive = if run_adaptive { Some(disc.solve_adaptive(delta)?) } else { None };
    let wall_seconds = wall.elapsed().as_secs_f64();
    if let Some(f) = &full {
        timings.add(&f.timings);
    }
    if let Some(a) = &adaptive {
        timings.add(&a.timings);
    }

    let mut results = serde_json::Map::new();
    results.insert("delta".into(), json!(delta));
    if let Some(f) = &full {
        results.insert("n_full".into(), json!(f.system.dim()));
    }
    if let Some(a) = &adaptive {
        results.insert("n_adaptive".into(), json!(a.system.dim()));
        results.insert("ratio".into(), json!(ratio_metric(&a.selection)));
        let report = posterior_bound(&disc, a)?;
        results.insert("posterior".into(), serde_json::to_value(&report).map_err(arte_core::Error::from)?);
    }
    if let (Some(f), Some(a)) = (&full, &adaptive) {
        results.insert("error".into(), json!(error_metric(&f.field, &a.field)?));
    }

    let (primary_field, primary_system, selection) = match (&full, &adaptive) {
        (_, Some(a)) => (&a.field, &a.system, a.selection.clone()),
        (Some(f), None) => (
            &f.field,
            &f.system,
            arte_core::reduction::Selection::full(disc.mesh.cell_count(), 2 * disc.quad.len()),
        ),
        (None, None) => unreachable!("at least one scheme runs"),
    };
    out.write_io("phi.csv", |w| primary_field.write_phi_csv(w))?;
    if let (Some(f), Some(_)) = (&full, &adaptive) {
        out.write_io("phi_full.csv", |w| f.field.write_phi_csv(w))?;
    }
    out.write_io("selection.csv", |w| selection.write_csv(&disc.mesh, w))?;
    if wants(&config, "matrix") {
        out.write_io("matrix.mtx", |w| primary_system.write_matrix_market(w))?;
        out.write_io("rhs.txt", |w| primary_system.write_rhs(w))?;
    }
    let eigen = write_extras(&mut out, &config, &disc, primary_field)?;
    results.insert("eigen".into(), eigen);
    if let (Some(p), Some(f), Some(a)) = (probe, &full, &adaptive) {
        let samples = line_probe(&f.field, &a.field, p.segment, p.points)?;
        out.write_io("probe.csv", |w| write_probe_csv(&samples, w))?;
    }

    let mut manifest = RunManifest::new("solve", config_json(&config)?, threads);
    manifest.timings = timings;
    manifest.wall_seconds = wall_seconds;
    manifest.results = serde_json::Value::Object(results);
    out.finish(manifest)
}

pub fn compare(args: &ProblemArgs, deltas: &[f64], threads: usize) -> Result<(), CliError> {
    let (spec, config) = resolve(args)?;
    let deltas: Vec<f64> = if !deltas.is_empty() {
        deltas.to_vec()
    } else if !config.deltas.is_empty() {
        config.deltas.clone()
    } else {
        vec![1e-1, 1e-2, 1e-3, 1e-4]
    };
    for &d in &deltas {
        check_delta(d)?;
    }
    let mut out = OutDir::create(&args.out)?;

    let wall = Instant::now();
    let disc = Discretization::from_problem(&spec)?;
    let mut timings = PhaseTimings {
        eigen: disc.eigen_seconds,
        ..Default::default()
    };
    let full = disc.solve_full()?;
    timings.add(&full.timings);
    let mut rows = Vec::with_capacity(deltas.len());
    let mut reports = Vec::with_capacity(deltas.len());
    let mut bound_time = 0.0;
    for &d in &deltas {
        let a = disc.solve_adaptive(d)?;
        timings.add(&a.timings);
        let t = Instant::now();
        let report = posterior_bound(&disc, &a)?;
        bound_time += t.elapsed().as_secs_f64();
        let error = error_metric(&full.field, &a.field)?;
        if report.bound < error {
            log::warn!("delta = {d:e}: bound {:.3e} below measured error {error:.3e}", report.bound);
        }
        rows.push((d, error, ratio_metric(&a.selection), report.bound));
        reports.push(report);
    }
    let wall_seconds = wall.elapsed().as_secs_f64() - bound_time;

    out.write_io("compare.csv", |w| {
        writeln!(w, "delta,error,ratio,bound")?;
        for (d, e, r, b) in &rows {
            writeln!(w, "{d:e},{e:.16e},{r:.16e},{b:.16e}")?;
        }
        Ok(())
    })?;
    out.write_io("phi_full.csv", |w| full.field.write_phi_csv(w))?;
    let eigen = write_extras(&mut out, &config, &disc, &full.field)?;

    let mut manifest = RunManifest::new("compare", config_json(&config)?, threads);
    manifest.timings = timings;
    manifest.wall_seconds = wall_seconds;
    manifest.results = json!({
        "n_full": full.system.dim(),
        "posterior": reports,
        "eigen": eigen,
    });
    out.finish(manifest)
}

pub fn verify_assumptions(m: &[usize], gammas: &[f64], g_pairs: &[(f64, f64)], out_dir: &Path, threads: usize) -> Result<(), CliError> {
    for &g in gammas {
        if !(0.0..1.0).contains(&g) {
            return Err(CliError::Usage(format!("gamma must lie in [0, 1), got {g}")));
        }
    }
    for &(a, b) in g_pairs {
        if a.abs() >= 1.0 || b.abs() >= 1.0 {
            return Err(CliError::Usage(format!("anisotropy must satisfy |g| < 1, got {a}:{b}")));
        }
    }
    let four_ms: Vec<usize> = m.iter().map(|v| 4 * v).collect();
    for (&mv, &fm) in m.iter().zip(&four_ms) {
        if arte_core::diagnostics::order_for_four_m(fm).is_none() {
            return Err(CliError::Usage(format!("M = {mv} is not N(N+2)/8 for an even order N")));
        }
    }
    let mut out = OutDir::create(out_dir)?;
    let wall = Instant::now();
    let grid = pair_grid(gammas, g_pairs, &four_ms);
    let ranks = rank_ratio_study(&grid)?;
    let c2 = c2_sweep(&grid)?;
    let mut gs: Vec<f64> = g_pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    gs.sort_by(f64::total_cmp);
    gs.dedup();
    let boundary = boundary_rank_study(gammas, &gs, &four_ms)?;
    let wall_seconds = wall.elapsed().as_secs_f64();

    out.write("rank_ratio.csv", |w| Ok(write_study_csv(&ranks, "rank_ratio", w)?))?;
    out.write("c2.csv", |w| Ok(write_study_csv(&c2, "max_inv_norm2", w)?))?;
    out.write("rank_ratio_boundary.csv", |w| Ok(write_boundary_rank_csv(&boundary, w)?))?;

    let min_rank = ranks.iter().map(|r| r.value).fold(1.0f64, f64::min);
    let min_boundary = boundary.iter().map(|r| r.rank_ratio).fold(1.0f64, f64::min);
    let max_c2 = c2.iter().map(|r| r.value).fold(0.0f64, f64::max);
    let mut manifest = RunManifest::new(
        "verify-assumptions",
        json!({ "M": m, "gammas": gammas, "g_pairs": g_pairs }),
        threads,
    );
    manifest.wall_seconds = wall_seconds;
    manifest.results = json!({
        "grid_points": grid.len(),
        "min_rank_ratio": min_rank,
        "min_boundary_rank_ratio": min_boundary,
        "max_inv_norm2": max_c2,
    });
    out.finish(manifest)
}

#[derive(Debug, Clone, Args)]
pub struct SlabArgs {
    #[arg(long, default_value_t = 10.0)]
    pub sigma_t: f64,
    #[arg(long, default_value_t = 5.0)]
    pub sigma_s: f64,
    #[arg(long, default_value_t = 0.0)]
    pub q: f64,
    /// Ordinates per hemisphere.
    #[arg(long = "M", default_value_t = 10)]
    pub m: usize,
    /// Slab width; the domain is `[0, length]`.
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
    #[arg(long, default_value_t = 1.0)]
    pub inflow_left: f64,
    #[arg(long, default_value_t = 0.0)]
    pub inflow_right: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3, 1e-4, 1e-5])]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 1001)]
    pub points: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn slab(args: &SlabArgs, threads: usize) -> Result<(), CliError> {
    for &d in &args.deltas {
        check_delta(d)?;
    }
    let mut out = OutDir::create(&args.out)?;
    let wall = Instant::now();
    let s = solve_slab(&SlabProblem {
        sigma_t: args.sigma_t,
        sigma_s: args.sigma_s,
        q: args.q,
        z_l: 0.0,
        z_r: args.length,
        m: args.m,
        inflow_left: vec![args.inflow_left; args.m],
        inflow_right: vec![args.inflow_right; args.m],
    })?;
    let solve_seconds = wall.elapsed().as_secs_f64();

    out.write_io("slab.csv", |w| s.write_profile_csv(w, &args.deltas, args.points))?;
    let center = 0.5 * args.length;
    let amax = s.alpha.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut counts = Vec::new();
    out.write_io("slab_counts.csv", |w| {
        writeln!(w, "delta,retained,center_error,center_bound")?;
        for &d in &args.deltas {
            let kept = s.retained_count(d);
            let err = (s.scalar(center, None) - s.scalar(center, Some(d))).abs();
            let bound = (2 * args.m - kept) as f64 * d * amax;
            writeln!(w, "{d:e},{kept},{err:.16e},{bound:.16e}")?;
            counts.push(kept);
        }
        Ok(())
    })?;

    let mut manifest = RunManifest::new(
        "slab",
        json!({
            "sigma_t": args.sigma_t, "sigma_s": args.sigma_s, "q": args.q, "M": args.m,
            "length": args.length, "inflow_left": args.inflow_left,
            "inflow_right": args.inflow_right, "deltas": args.deltas, "points": args.points,
        }),
        threads,
    );
    manifest.timings.solve = solve_seconds;
    manifest.wall_seconds = solve_seconds;
    manifest.results = json!({ "retained": counts, "max_abs_alpha": amax });
    out.finish(manifest)
}
