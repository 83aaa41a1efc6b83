//! Task implementations behind the subcommand-style `task.name` field.

use crate::config::{Params, RunConfig};
use crate::report::{fmt_f, Reporter};
use itespec_core::discretize::{assemble_disk_mode, assemble_interval, SystemKind};
use itespec_core::eigensolve::{
    counting_function, det_roots_report, disk_determinant, find_eigenvalues, interval_determinant,
    winding_multiplicity, GridSpec, Rect, SolveOptions,
};
use itespec_core::halfspace::{convergence_study, ExpProfile, HalfSpaceInstance};
use itespec_core::problem::{build_problem, Geometry, TransmissionProblem};
use itespec_core::resolvent::{
    build_quasimode, quasimode_lower_bound, real_axis_bound_fit, green_random_batch,
    refinement_drift, sigma_min_scan, Potential, QuasimodeDomain,
};
use itespec_core::symbols::{
    parametrix_recursion, verify_parametrix_structure, Poly, Var,
};
use itespec_core::C64;
use std::path::Path;

pub fn dispatch(run: &RunConfig, verify: bool) -> Result<bool, String> {
    let outdir = Path::new(&run.task.output_dir);
    let rep = Reporter::new(outdir, &run.task.name).map_err(|e| e.to_string())?;
    let params = Params(&run.task.params);
    match run.task.name.as_str() {
        "spectrum" => spectrum(run, rep, &params, verify),
        "counting" => counting(run, rep, &params),
        "pseudospectrum" => pseudospectrum(run, rep, &params, verify),
        "bound-fit" => bound_fit(run, rep, &params),
        "quasimode" => quasimode(run, rep, &params),
        "halfspace-verify" => halfspace_verify(rep, &params),
        "symbols-check" => symbols_check(rep, &params),
        "identities-check" => identities_check(run, rep, &params),
        other => Err(format!("task.name: unknown task `{other}`")),
    }
}

fn problem_of(run: &RunConfig) -> Result<TransmissionProblem, String> {
    let block = run
        .problem
        .as_ref()
        .ok_or("problem: block required for this task")?;
    build_problem(&block.to_core()?).map_err(|e| e.to_string())
}

fn system_of(name: &str) -> Result<SystemKind, String> {
    match name {
        "bz" => Ok(SystemKind::Bz),
        "tilde" => Ok(SystemKind::Tilde),
        other => Err(format!("task.params.form: unknown form `{other}`")),
    }
}

fn constant_index(problem: &TransmissionProblem) -> Option<C64> {
    let probe = problem.index.n_principal(&match problem.geometry {
        Geometry::Interval { a, b } => vec![0.5 * (a + b)],
        Geometry::Disk { .. } => vec![0.1, 0.0],
        Geometry::HalfSpaceModel => vec![0.0, 0.5],
    });
    for x in problem.sample_points(200) {
        if (problem.index.n_principal(&x) - probe).norm() > 1e-13 {
            return None;
        }
    }
    Some(probe)
}

fn spectrum(
    run: &RunConfig,
    mut rep: Reporter,
    params: &Params,
    verify: bool,
) -> Result<bool, String> {
    let problem = problem_of(run)?;
    let system = system_of(&params.str_or("form", "tilde")?)?;
    let nodes = params.usize_or("nodes", 96)?;
    let re = params.f64_list_or("re_range", &[0.3, 8.0])?;
    let im = params.f64_list_or("im_range", &[-1.0, 1.0])?;
    let grid = GridSpec {
        nre: params.usize_or("grid_re", 60)?,
        nim: params.usize_or("grid_im", 9)?,
    };
    let region = Rect::new((re[0], re[1]), (im[0], im[1]));
    let opts = SolveOptions::default();

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut all_eigen: Vec<(C64, u32, f64)> = Vec::new();
    let mut oracle_mismatch = 0.0f64;
    let n_const = constant_index(&problem);

    match problem.geometry {
        Geometry::Interval { .. } => {
            let op = assemble_interval(&problem, system, nodes).map_err(|e| e.to_string())?;
            let report = find_eigenvalues(&op, region, grid, &opts).map_err(|e| e.to_string())?;
            if verify {
                // winding stability under radius halving at each root
                let matrix_of = |k: C64| op.matrix_of(k);
                for (idx, &k) in report.eigenvalues.iter().enumerate() {
                    let m1 = winding_multiplicity(&matrix_of, k, 2e-3);
                    let m2 = winding_multiplicity(&matrix_of, k, 1e-3);
                    rep.require(&format!("winding_stable_{idx}"), m1 == m2);
                }
            }
            if let (Some(nc), SystemKind::Tilde) = (n_const, system) {
                let f = |k: C64| interval_determinant(nc, k).unwrap_or(C64::new(f64::NAN, 0.0));
                let oracle = det_roots_report(&f, region, 1e-3, 1e-12, opts.exclude_origin_radius);
                rep.metric("oracle_roots", oracle.eigenvalues.len());
                for (a, b) in report.eigenvalues.iter().zip(&oracle.eigenvalues) {
                    oracle_mismatch = oracle_mismatch.max((a - b).norm() / b.norm());
                }
                rep.require(
                    "oracle_count_matches",
                    report.eigenvalues.len() == oracle.eigenvalues.len(),
                );
            }
            for i in 0..report.eigenvalues.len() {
                all_eigen.push((
                    report.eigenvalues[i],
                    report.multiplicities[i],
                    report.sigma_min_at_root[i],
                ));
            }
        }
        Geometry::Disk { .. } => {
            let mode_max = params.usize_or("mode_max", 10)? as i32;
            for m in 0..=mode_max {
                let op =
                    assemble_disk_mode(&problem, m, system, nodes).map_err(|e| e.to_string())?;
                let report =
                    find_eigenvalues(&op, region, grid, &opts).map_err(|e| e.to_string())?;
                if let (Some(nc), SystemKind::Tilde) = (n_const, system) {
                    let f =
                        |k: C64| disk_determinant(nc, m, k).unwrap_or(C64::new(f64::NAN, 0.0));
                    let oracle =
                        det_roots_report(&f, region, 1e-3, 1e-12, opts.exclude_origin_radius);
                    for (a, b) in report.eigenvalues.iter().zip(&oracle.eigenvalues) {
                        oracle_mismatch = oracle_mismatch.max((a - b).norm() / b.norm());
                    }
                    rep.require(
                        &format!("oracle_count_matches_mode_{m}"),
                        report.eigenvalues.len() == oracle.eigenvalues.len(),
                    );
                }
                let weight = if m == 0 { 1 } else { 2 };
                for i in 0..report.eigenvalues.len() {
                    all_eigen.push((
                        report.eigenvalues[i],
                        report.multiplicities[i] * weight,
                        report.sigma_min_at_root[i],
                    ));
                }
            }
        }
        Geometry::HalfSpaceModel => return Err("spectrum: half-space model has no spectrum task".into()),
    }

    all_eigen.sort_by(|x, y| (x.0.norm(), x.0.re).partial_cmp(&(y.0.norm(), y.0.re)).unwrap());
    for &(k, m, s) in &all_eigen {
        rows.push(vec![fmt_f(k.re), fmt_f(k.im), m.to_string(), fmt_f(s)]);
    }
    rep.csv("spectrum.csv", "re_k,im_k,multiplicity,sigma_min_at_root", &rows)
        .map_err(|e| e.to_string())?;
    if n_const.is_some() {
        rep.metric("max_oracle_mismatch", oracle_mismatch);
        rep.require("oracle_mismatch_below_1e-6", oracle_mismatch < 1e-6);
    }
    rep.metric("eigenvalue_count", all_eigen.len());
    rep.finish().map_err(|e| e.to_string())
}

fn counting(run: &RunConfig, mut rep: Reporter, params: &Params) -> Result<bool, String> {
    let problem = problem_of(run)?;
    let t_max = params.f64_or("t_max", 40.0)?;
    let t_steps = params.usize_or("t_steps", 40)?;
    let im_band = params.f64_or("im_band", 3.0)?;
    let nc = constant_index(&problem)
        .ok_or("counting: the determinant oracle needs a constant index")?;
    let region = Rect::new((0.3, t_max * 1.01), (-im_band, im_band));
    let dim = problem.geometry.dim();
    let mut report = match problem.geometry {
        Geometry::Interval { .. } => {
            let f = |k: C64| interval_determinant(nc, k).unwrap_or(C64::new(f64::NAN, 0.0));
            det_roots_report(&f, region, 1e-3, 1e-12, 0.25)
        }
        Geometry::Disk { .. } => {
            let mode_max = params.usize_or("mode_max", 10)? as i32;
            let mut merged_eigen = Vec::new();
            let mut merged_mult = Vec::new();
            for m in 0..=mode_max {
                let f = |k: C64| disk_determinant(nc, m, k).unwrap_or(C64::new(f64::NAN, 0.0));
                let r = det_roots_report(&f, region, 1e-3, 1e-12, 0.25);
                let weight = if m == 0 { 1 } else { 2 };
                merged_eigen.extend_from_slice(&r.eigenvalues);
                merged_mult.extend(r.multiplicities.iter().map(|&x| x * weight));
            }
            let mut r = det_roots_report(&|_| C64::new(1.0, 0.0), region, 1e-3, 1e-12, 0.25);
            r.eigenvalues = merged_eigen;
            r.multiplicities = merged_mult;
            r
        }
        Geometry::HalfSpaceModel => return Err("counting: unsupported geometry".into()),
    };
    let t_grid: Vec<f64> = (1..=t_steps)
        .map(|i| t_max * i as f64 / t_steps as f64)
        .collect();
    let fit = counting_function(&mut report, &t_grid, dim).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> = fit
        .n_of_t
        .iter()
        .map(|&(t, n)| vec![fmt_f(t), n.to_string()])
        .collect();
    rep.csv("counting.csv", "t,N", &rows).map_err(|e| e.to_string())?;
    rep.json("counting_fit.json", &fit).map_err(|e| e.to_string())?;
    let plot: Vec<(f64, f64)> = fit.n_of_t.iter().map(|&(t, n)| (t, n as f64)).collect();
    rep.plot_data("counting.dat", &plot).map_err(|e| e.to_string())?;
    rep.metric("slope", fit.slope);
    rep.metric("c_upper", fit.c_upper);
    if let Some(s) = fit.slope {
        rep.require("slope_in_dimension_window", (0.7..=1.3).contains(&(s / dim as f64)));
    }
    rep.require("c_upper_finite", fit.c_upper.is_finite());
    rep.finish().map_err(|e| e.to_string())
}

fn pseudospectrum(
    run: &RunConfig,
    mut rep: Reporter,
    params: &Params,
    verify: bool,
) -> Result<bool, String> {
    let problem = problem_of(run)?;
    let system = system_of(&params.str_or("form", "tilde")?)?;
    let nodes = params.usize_or("nodes", 96)?;
    let re = params.f64_list("re_range")?;
    let im = params.f64_list("im_range")?;
    let nre = params.usize_or("grid_re", 40)?;
    let nim = params.usize_or("grid_im", 40)?;
    let op = match problem.geometry {
        Geometry::Interval { .. } => assemble_interval(&problem, system, nodes),
        Geometry::Disk { .. } => {
            assemble_disk_mode(&problem, params.usize_or("mode", 0)? as i32, system, nodes)
        }
        Geometry::HalfSpaceModel => return Err("pseudospectrum: unsupported geometry".into()),
    }
    .map_err(|e| e.to_string())?;
    let field = sigma_min_scan(&op, (re[0], re[1]), (im[0], im[1]), nre, nim)
        .map_err(|e| e.to_string())?;
    let mut rows = Vec::with_capacity(nre * nim);
    for i in 0..nre {
        for j in 0..nim {
            let node = field.node(i, j);
            rows.push(vec![fmt_f(node.re), fmt_f(node.im), fmt_f(field.value(i, j))]);
        }
    }
    rep.csv("pseudospectrum.csv", "re_k2,im_k2,inv_sigma_min", &rows)
        .map_err(|e| e.to_string())?;
    rep.metric("norms_used", field.norms_used.clone());
    if verify {
        // refinement stability at probe nodes
        let fine = match problem.geometry {
            Geometry::Interval { .. } => assemble_interval(&problem, system, nodes * 2),
            Geometry::Disk { .. } => assemble_disk_mode(
                &problem,
                params.usize_or("mode", 0)? as i32,
                system,
                nodes * 2,
            ),
            Geometry::HalfSpaceModel => unreachable!(),
        }
        .map_err(|e| e.to_string())?;
        let probes: Vec<C64> = (0..20)
            .map(|t| {
                let fx = (t % 5) as f64 / 4.0;
                let fy = (t / 5) as f64 / 3.0;
                C64::new(re[0] + (re[1] - re[0]) * fx, im[0] + (im[1] - im[0]) * fy)
            })
            .collect();
        let drift = refinement_drift(&op, &fine, &probes);
        rep.metric("refinement_drift", drift);
        rep.require("refinement_drift_below_5pc", drift < 0.05);
    }
    rep.finish().map_err(|e| e.to_string())
}

fn bound_fit(run: &RunConfig, mut rep: Reporter, params: &Params) -> Result<bool, String> {
    let problem = problem_of(run)?;
    let nodes = params.usize_or("nodes", 128)?;
    let k_min = params.f64_or("k_min", 1.0)?;
    let k_max = params.f64_or("k_max", 30.0)?;
    let k_step = params.f64_or("k_step", 0.1)?;
    let op = assemble_interval(&problem, SystemKind::Tilde, nodes).map_err(|e| e.to_string())?;
    let steps = ((k_max - k_min) / k_step).round() as usize;
    let k_grid: Vec<f64> = (0..=steps).map(|i| k_min + i as f64 * k_step).collect();
    let fit = real_axis_bound_fit(&problem, &op, &k_grid).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> = fit
        .rows
        .iter()
        .map(|&(k, v)| vec![fmt_f(k), fmt_f(v)])
        .collect();
    rep.csv("bound_fit.csv", "k,resolvent_norm", &rows)
        .map_err(|e| e.to_string())?;
    let plot: Vec<(f64, f64)> = fit.rows.iter().map(|&(k, v)| (k, v.ln())).collect();
    rep.plot_data("log_norm.dat", &plot).map_err(|e| e.to_string())?;
    rep.metric("c1", fit.c1);
    rep.metric("c2", fit.c2);
    rep.metric("fit_residual", fit.fit_residual);
    rep.metric("max_violation", fit.max_violation);
    rep.require("envelope_no_violation", fit.max_violation <= 1e-12);
    rep.finish().map_err(|e| e.to_string())
}

fn quasimode(run: &RunConfig, mut rep: Reporter, params: &Params) -> Result<bool, String> {
    // beam orders on V = z0 n(x) derived from the problem index; the
    // problem must use an index with Im <xi0, dn(x0)> != 0
    let problem = problem_of(run)?;
    let Geometry::Interval { a, b } = problem.geometry else {
        return Err("quasimode: interval geometry required".into());
    };
    let x0 = params.f64_or("x0", 0.5 * (a + b))?;
    let xi0 = params.f64_or("xi0", 1.0)?;
    let orders: Vec<usize> = params
        .f64_list_or("orders", &[0.0, 2.0])?
        .into_iter()
        .map(|v| v as usize)
        .collect();
    let h_exps = params.f64_list_or("h_exponents", &[4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0])?;
    let h_grid: Vec<f64> = h_exps.iter().map(|&e| 2f64.powf(-e)).collect();
    let h_max = h_grid.iter().cloned().fold(0.0, f64::max);
    let probe_k = C64::new(1.0, 0.0);
    let n0 = problem.index.n_at(&[x0], probe_k);
    let z0 = -C64::new(xi0 * xi0, 0.0) / n0;
    let nfield = problem.clone();
    let pot = Potential::new(
        1,
        std::sync::Arc::new(move |x: &[f64]| z0 * nfield.index.n_at(x, probe_k)),
    );
    let domain = QuasimodeDomain {
        lo: vec![a],
        hi: vec![b],
    };
    let pts = params.usize_or("quad_points", 2000)?;
    let mut slopes = Vec::new();
    let mut all_rows = Vec::new();
    for &order in &orders {
        let qm = build_quasimode(&pot, &domain, &[x0], &[xi0], order, h_max)
            .map_err(|e| e.to_string())?;
        let ratios: Vec<(f64, f64)> = h_grid
            .iter()
            .map(|&h| (h, qm.residual_ratio(h, pts)))
            .collect();
        let (slope, _) = itespec_core::resolvent::fit_slope(&ratios);
        slopes.push(slope);
        rep.metric(&format!("slope_order_{order}"), slope);
        for &(h, r) in &ratios {
            all_rows.push(serde_json::json!({
                "order": order, "h": h, "residual_ratio": r,
            }));
        }
        rep.plot_data(
            &format!("residual_order_{order}.dat"),
            &ratios,
        )
        .map_err(|e| e.to_string())?;
    }
    // lower-bound consistency on the operator at matched k^2
    let lb_exps = params.f64_list_or("lower_bound_h_exponents", &[4.0, 5.0, 6.0])?;
    let lb_h: Vec<f64> = lb_exps.iter().map(|&e| 2f64.powf(-e)).collect();
    let nodes = params.usize_or("nodes", 160)?;
    let op = assemble_interval(&problem, SystemKind::Tilde, nodes).map_err(|e| e.to_string())?;
    let qm0 = build_quasimode(&pot, &domain, &[x0], &[xi0], orders[0], h_max)
        .map_err(|e| e.to_string())?;
    let lb_rows = quasimode_lower_bound(&qm0, z0, &op, &lb_h, pts).map_err(|e| e.to_string())?;
    let mut consistent = true;
    for r in &lb_rows {
        consistent &= r.lower_bound <= r.scan_value * (1.0 + 0.05) + 1e-9;
        all_rows.push(serde_json::json!({
            "order": orders[0], "h": r.h, "residual_ratio": r.residual_ratio,
            "lower_bound": r.lower_bound, "scan_value": r.scan_value,
        }));
    }
    rep.require("lower_bound_below_scan", consistent);
    if slopes.len() >= 2 {
        rep.require("order_gain_at_least_0.8", slopes[1] - slopes[0] >= 0.8);
    }
    rep.require("order0_slope_first_order", slopes[0] >= 1.0 - 1e-9);
    rep.json("quasimode_report.json", &all_rows).map_err(|e| e.to_string())?;
    rep.finish().map_err(|e| e.to_string())
}

fn halfspace_verify(mut rep: Reporter, params: &Params) -> Result<bool, String> {
    let a_re = params.f64_or("a_re", 0.25)?;
    let a_im = params.f64_or("a_im", 0.0)?;
    let mu_re = params.f64_or("mu_re", -1.0)?;
    let mu_im = params.f64_or("mu_im", 0.0)?;
    let xi_prime = params.f64_or("xi_prime", 0.0)?;
    let h_exps = params.f64_list_or("h_exponents", &[4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0])?;
    let h_grid: Vec<f64> = h_exps.iter().map(|&e| 2f64.powf(-e)).collect();
    let a_val = C64::new(a_re, a_im);
    let v_val = C64::new(1.0, 0.0) - a_val;
    let family = move |h: f64| HalfSpaceInstance {
        a_val,
        v_val,
        mu: C64::new(mu_re, mu_im),
        xi_prime,
        h,
        f_data: ExpProfile::single(C64::new(1.0, 0.0), C64::new(0.0, h)),
        g_data: ExpProfile::single(C64::new(0.5, 0.3), C64::new(0.0, 2.0 * h)),
    };
    let study = convergence_study(&family, &h_grid).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| vec![fmt_f(r.h), fmt_f(r.err_gamma0), fmt_f(r.err_gamma1)])
        .collect();
    rep.csv("halfspace_convergence.csv", "h,err_gamma0,err_gamma1", &rows)
        .map_err(|e| e.to_string())?;
    rep.json(
        "halfspace_fit.json",
        &serde_json::json!({
            "slope0": study.slope0,
            "slope1": study.slope1,
            "residual": study.fit_residual,
        }),
    )
    .map_err(|e| e.to_string())?;
    rep.metric("slope0", study.slope0);
    rep.metric("slope1", study.slope1);
    rep.require("slopes_at_least_0.8", study.slope0 >= 0.8 && study.slope1 >= 0.8);
    rep.finish().map_err(|e| e.to_string())
}

fn symbols_check(mut rep: Reporter, params: &Params) -> Result<bool, String> {
    let depth = params.usize_or("depth", 4)?;
    // generic 1D symbol with jet coefficients
    let jet = |base: u8| Poly::var(Var::Jet { base, order: 0 });
    let xi = Poly::var(Var::Xi(0));
    let p2 = jet(2).mul(&xi).mul(&xi).add(&jet(1).mul(&xi)).add(&jet(0));
    let p1 = jet(4).mul(&xi).add(&jet(3));
    let terms = parametrix_recursion(&p2, &p1, depth).map_err(|e| e.to_string())?;
    let structure = verify_parametrix_structure(&terms).map_err(|e| e.to_string())?;
    rep.json("parametrix_structure.json", &structure)
        .map_err(|e| e.to_string())?;
    for row in &structure {
        rep.require(&format!("structure_nu_{}", row.nu), row.pass);
    }
    // composition cancellation through h^depth
    let mut cancels = true;
    for s in 1..=depth {
        let c = itespec_core::symbols::composition_coefficient(&terms, &p2, &p1, s);
        cancels &= c.is_zero();
    }
    let c0 = itespec_core::symbols::composition_coefficient(&terms, &p2, &p1, 0);
    cancels &= itespec_core::symbols::symbol_is_one(&c0, &p2);
    rep.require("composition_residual_zero", cancels);
    rep.finish().map_err(|e| e.to_string())
}

fn identities_check(run: &RunConfig, mut rep: Reporter, params: &Params) -> Result<bool, String> {
    let instances = params.usize_or("instances", 1000)?;
    let batches = itespec_core::operator_identities::run_identity_batch(run.task.seed, instances)
        .map_err(|e| e.to_string())?;
    rep.json("identities.json", &batches).map_err(|e| e.to_string())?;
    for b in &batches {
        rep.metric(&format!("max_error_{}", b.identity), b.max_error);
        rep.require(&format!("pass_{}", b.identity), b.pass);
    }
    rep.finish().map_err(|e| e.to_string())
}
