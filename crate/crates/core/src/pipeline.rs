//! End-to-end orchestration: sample -> propagate -> estimate -> kernels ->
//! master equation -> long-time analysis, with all artifacts written to disk.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Error;
use crate::estimators::{run_ensemble, AuxCorrSet, EnsembleOpts};
use crate::gqme::{
    cutoff_sweep, ergodic_average, kernel_cumulative_integral, population_trace, qc_thermal_benchmark,
    solve_gqme, stationary_limits, GqmeResult, StationaryResult, SweepResult,
};
use crate::kernels::{build_kernel_set, KernelSet};
use crate::model::{build_bath, coupling_matrices, BathSpec, ModelSpec};
use crate::tensor::{CorrTensor, PAULI_LABELS};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Per-parameter-point summary recorded in the manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSummary {
    pub tag: String,
    pub eps: f64,
    pub xi: f64,
    pub n_traj: u64,
    pub aborted: u64,
    pub max_mc_stderr: f64,
    pub stationary: Option<StationaryResult>,
    pub plateau_fired: Option<bool>,
    pub plateau_value: Option<f64>,
    pub ergodic_p_plus: f64,
    pub benchmark_p_plus: f64,
    pub direct_p_plus_final: f64,
    pub gqme_p_plus_final: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub timings: Vec<StageTiming>,
    pub points: Vec<PointSummary>,
    pub output_files: Vec<PathBuf>,
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), Error> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Correlator/kernel CSV: header row, then t followed by the 16 entries in
/// row-major (mu, nu) order.
pub fn tensor_to_csv(t: &CorrTensor) -> String {
    let mut out = String::from("t");
    for mu in 0..4 {
        for nu in 0..4 {
            write!(out, ",{}{}", PAULI_LABELS[mu], PAULI_LABELS[nu]).unwrap();
        }
    }
    out.push('\n');
    for it in 0..t.len() {
        write!(out, "{}", t.time(it)).unwrap();
        for mu in 0..4 {
            for nu in 0..4 {
                write!(out, ",{}", t.get(it, mu, nu)).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn population_to_csv(dt: f64, p: &[f64], stderr: Option<&[f64]>) -> String {
    let mut out = String::from("t,p_plus,p_plus_stderr\n");
    for (it, v) in p.iter().enumerate() {
        let se = stderr.map(|s| s[it]).unwrap_or(0.0);
        writeln!(out, "{},{},{}", it as f64 * dt, v, se).unwrap();
    }
    out
}

pub fn bath_to_csv(bath: &BathSpec) -> String {
    let mut out = String::from("alpha,omega,c,m\n");
    for a in 0..bath.n_modes() {
        writeln!(out, "{},{},{},{}", a + 1, bath.omega[a], bath.c[a], bath.m[a]).unwrap();
    }
    out
}

pub fn sweep_to_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("t_cut,p_plus_inf,c_ix_inf,c_iz_inf,condition,error\n");
    for p in &sweep.points {
        match (&p.stationary, &p.error) {
            (Some(s), _) => writeln!(
                out,
                "{},{},{},{},{},",
                p.t_cut, s.p_plus_inf, s.c_ix_inf, s.c_iz_inf, s.condition
            )
            .unwrap(),
            (None, Some(e)) => {
                writeln!(out, "{},,,,,\"{}\"", p.t_cut, e.replace('"', "'")).unwrap()
            }
            (None, None) => writeln!(out, "{},,,,,", p.t_cut).unwrap(),
        }
    }
    out
}

/// Parse a reference curve CSV (t,p_plus in the first two columns) and
/// resample it onto a uniform grid by linear interpolation.
pub fn resample_reference(text: &str, dt: f64, n: usize) -> Result<Vec<f64>, Error> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || ln == 0 && line.chars().any(|c| c.is_alphabetic()) {
            continue;
        }
        let mut cols = line.split(',');
        let t: f64 = cols
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("reference curve line {} malformed", ln + 1)))?;
        let p: f64 = cols
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("reference curve line {} malformed", ln + 1)))?;
        pts.push((t, p));
    }
    if pts.len() < 2 {
        return Err(Error::Config("reference curve needs at least two points".into()));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(n);
    for it in 0..n {
        let t = it as f64 * dt;
        let v = if t <= pts[0].0 {
            pts[0].1
        } else if t >= pts[pts.len() - 1].0 {
            pts[pts.len() - 1].1
        } else {
            let j = pts.partition_point(|p| p.0 < t);
            let (t0, p0) = pts[j - 1];
            let (t1, p1) = pts[j];
            p0 + (p1 - p0) * (t - t0) / (t1 - t0)
        };
        out.push(v);
    }
    Ok(out)
}

struct PointOutput {
    aux: AuxCorrSet,
    kernels: Option<KernelSet>,
    gqme: Option<GqmeResult>,
    stationary: Option<StationaryResult>,
    sweep: Option<SweepResult>,
}

fn run_point(
    spec: &ModelSpec,
    bath: &BathSpec,
    cfg: &RunConfig,
    timings: &mut Vec<StageTiming>,
    tag: &str,
) -> Result<PointOutput, Error> {
    let mats = coupling_matrices(spec);
    let e = &cfg.ensemble;
    let opts = EnsembleOpts {
        n_traj: e.n_traj,
        dt: e.dt,
        t_max: e.t_max,
        stride: e.stride,
        seed: e.seed,
        bath_init: e.bath_init,
        rows: e.rows,
        n_blocks: e.n_blocks,
    };
    let t0 = Instant::now();
    let aux = run_ensemble(spec, bath, e.method, &opts)?;
    timings.push(StageTiming {
        stage: format!("ensemble[{tag}]"),
        seconds: t0.elapsed().as_secs_f64(),
    });

    let mut out = PointOutput {
        aux,
        kernels: None,
        gqme: None,
        stationary: None,
        sweep: None,
    };

    if let Some(g) = &cfg.gqme {
        let t0 = Instant::now();
        let kset = build_kernel_set(&out.aux, &mats, g.route)?;
        let res = solve_gqme(&mats.x_mat, &kset.k, g.t_cut, g.t_final)?;
        let kt = kernel_cumulative_integral(&kset.k, g.t_cut)?;
        out.stationary = stationary_limits(&mats.x_mat, &kt).ok();
        if let Some(s) = &cfg.sweep {
            if !s.t_cut.is_empty() {
                out.sweep = Some(cutoff_sweep(&mats.x_mat, &kset.k, &s.t_cut));
            }
        }
        out.kernels = Some(kset);
        out.gqme = Some(res);
        timings.push(StageTiming {
            stage: format!("gqme[{tag}]"),
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

/// Execute a full run.  Deterministic for a fixed seed: output files are
/// bitwise identical regardless of worker count.
pub fn run_pipeline(cfg: &RunConfig, output_dir_override: Option<&Path>) -> Result<RunManifest, Error> {
    cfg.validate()?;
    let out_dir = output_dir_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.io.output_dir.clone());
    std::fs::create_dir_all(&out_dir)?;

    let eps_list = cfg
        .sweep
        .as_ref()
        .map(|s| s.eps.clone())
        .filter(|v| !v.is_empty())
        .unwrap_or_else(|| vec![cfg.model.eps]);
    let xi_list = cfg
        .sweep
        .as_ref()
        .map(|s| s.xi.clone())
        .filter(|v| !v.is_empty())
        .unwrap_or_else(|| vec![cfg.model.xi]);

    let mut timings = Vec::new();
    let mut points = Vec::new();
    let mut files: Vec<PathBuf> = Vec::new();

    let save = |name: String, contents: &str, files: &mut Vec<PathBuf>| -> Result<(), Error> {
        let path = out_dir.join(name);
        write_atomic(&path, contents)?;
        files.push(path);
        Ok(())
    };

    for &eps in &eps_list {
        for &xi in &xi_list {
            let spec = ModelSpec {
                eps,
                xi,
                ..cfg.model.to_spec()
            };
            let bath = build_bath(&spec)?;
            let tag = format!("eps{eps:.3}_xi{xi:.3}");
            let po = run_point(&spec, &bath, cfg, &mut timings, &tag)?;

            if cfg.io.write_bath {
                save(format!("bath_{tag}.csv"), &bath_to_csv(&bath), &mut files)?;
            }
            if cfg.io.write_correlators {
                save(format!("corr_c_{tag}.csv"), &tensor_to_csv(&po.aux.c), &mut files)?;
                save(
                    format!("corr_cvp_{tag}.csv"),
                    &tensor_to_csv(&po.aux.c_vp),
                    &mut files,
                )?;
                save(
                    format!("corr_cvm_{tag}.csv"),
                    &tensor_to_csv(&po.aux.c_vm),
                    &mut files,
                )?;
            }
            // direct-dynamics population with batch-means errors
            let p_direct = population_trace(&po.aux.c);
            let p_err: Vec<f64> = (0..po.aux.c.len())
                .map(|it| 0.5 * po.aux.stderr[0].get(it, 0, 3))
                .collect();
            save(
                format!("population_direct_{tag}.csv"),
                &population_to_csv(po.aux.c.dt, &p_direct, Some(&p_err)),
                &mut files,
            )?;

            if let Some(kset) = &po.kernels {
                if cfg.io.write_kernels {
                    save(format!("kernel_k1_{tag}.csv"), &tensor_to_csv(&kset.k1), &mut files)?;
                    save(format!("kernel_k3_{tag}.csv"), &tensor_to_csv(&kset.k3), &mut files)?;
                    save(format!("kernel_k_{tag}.csv"), &tensor_to_csv(&kset.k), &mut files)?;
                }
            }
            if let Some(res) = &po.gqme {
                save(
                    format!("population_gqme_{tag}.csv"),
                    &population_to_csv(res.c_gqme.dt, &res.p_plus, None),
                    &mut files,
                )?;
                if let Some(refpath) = &cfg.io.reference_curve {
                    let text = std::fs::read_to_string(refpath)
                        .map_err(|e| Error::Config(format!("reference curve: {e}")))?;
                    let reference = resample_reference(&text, res.c_gqme.dt, res.p_plus.len())?;
                    let mut cmp = String::from("t,p_plus,reference,diff\n");
                    for (it, (&p, &r)) in res.p_plus.iter().zip(&reference).enumerate() {
                        writeln!(cmp, "{},{},{},{}", it as f64 * res.c_gqme.dt, p, r, p - r)
                            .unwrap();
                    }
                    save(format!("reference_compare_{tag}.csv"), &cmp, &mut files)?;
                }
            }
            if let Some(sw) = &po.sweep {
                save(format!("cutoff_sweep_{tag}.csv"), &sweep_to_csv(sw), &mut files)?;
            }

            let ergodic = ergodic_average(&spec, &bath, cfg.ensemble.method)?;
            let benchmark = qc_thermal_benchmark(&spec, &bath)?;
            points.push(PointSummary {
                tag,
                eps,
                xi,
                n_traj: po.aux.n_traj,
                aborted: po.aux.aborted,
                max_mc_stderr: po.aux.max_stderr(),
                stationary: po.stationary,
                plateau_fired: po.sweep.as_ref().map(|s| s.plateau_fired),
                plateau_value: po.sweep.as_ref().and_then(|s| s.plateau_value),
                ergodic_p_plus: ergodic,
                benchmark_p_plus: benchmark,
                direct_p_plus_final: *p_direct.last().unwrap(),
                gqme_p_plus_final: po.gqme.as_ref().map(|g| *g.p_plus.last().unwrap()),
            });
        }
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        timings,
        points,
        output_files: files,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    write_atomic(&out_dir.join("manifest.json"), &json)?;
    Ok(manifest)
}
