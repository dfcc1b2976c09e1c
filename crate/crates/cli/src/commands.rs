//! One function per subcommand. Each writes its artifacts into the output
//! directory and a `results.json`.

use microtop::eps::{gamma_sweep, mm_energy, optimal_profile_1d, SweepInstance, SweepKind};
use microtop::fem::{ScalarField, StructuredGrid};
use microtop::homog::{CellProblem, CoefficientMode};
use microtop::optim::{optimize, ReducedProblem, Termination};
use microtop::sharp::{
    certify_m, certify_phi, shape_derivative, volume_rates, Certificate, ShapeDerivative,
    SharpDesign, SharpProblem,
};
use microtop::state::{eval_j, Caps, CostTerms};
use microtop::tensor::Tensor4Sym;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{cell, OutputDir, VtkData};
use crate::{CliError, Command};

pub fn dispatch(command: Command, cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    match command {
        Command::Homogenize => homogenize(cfg, dir),
        Command::Solve => solve(cfg, dir),
        Command::Optimize => run_optimize(cfg, dir),
        Command::CheckGrad => check_grad(cfg, dir),
        Command::GammaSweep => sweep(cfg, dir),
        Command::MmProfile => mm_profile(cfg, dir),
        Command::SharpDerivative => sharp_derivative(cfg, dir),
    }
}

/// Upper triangle of the Voigt matrix: 11, 12, 13, 22, 23, 33.
fn voigt_upper(c: &Tensor4Sym) -> [f64; 6] {
    let v = c.voigt;
    [v[0][0], v[0][1], v[0][2], v[1][1], v[1][2], v[2][2]]
}

const VOIGT_HEADER: [&str; 6] = ["c11", "c12", "c13", "c22", "c23", "c33"];

/// `err[k−1] / err[k]`, empty for the first step.
fn ratios(errors: &[f64]) -> Vec<Option<f64>> {
    std::iter::once(None)
        .chain(errors.windows(2).map(|w| Some(w[0] / w[1])))
        .collect()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(cell).unwrap_or_default()
}

#[derive(Serialize)]
struct LevelRow {
    s: f64,
    voigt: [[f64; 3]; 3],
}

fn homogenize(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let cell_mesh = cfg.cell_mesh()?;
    let m = cfg.m_field(&cell_mesh);
    let problem = CellProblem::new(cell_mesh, cfg.material()?, &m)?;
    let mut table = Vec::with_capacity(cfg.levels);
    for k in 0..cfg.levels {
        let s = k as f64 / (cfg.levels - 1) as f64;
        let cs = problem.correctors(s)?;
        table.push(LevelRow {
            s,
            voigt: problem.homogenized(s, &cs)?.voigt,
        });
    }
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            let c = voigt_upper(&Tensor4Sym { voigt: r.voigt });
            std::iter::once(cell(r.s))
                .chain(c.iter().map(|v| cell(*v)))
                .collect()
        })
        .collect();
    let mut header = vec!["s"];
    header.extend(VOIGT_HEADER);
    dir.csv("cstar.csv", &header, &rows)?;
    dir.vtk("m.vtk", "microstructure", &[VtkData::Scalar("m", &m)])?;
    dir.json("results.json", &serde_json::json!({ "levels": table }))
}

#[derive(Serialize)]
struct SolveResults {
    compliance: f64,
    energy: f64,
    cost: CostTerms,
    iterations: usize,
    residual: f64,
}

fn solve(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let cell_mesh = cfg.cell_mesh()?;
    let phi = cfg.phi_field(&problem.mesh);
    let m = cfg.m_field(&cell_mesh);
    let coeffs = cfg
        .mode()
        .build(CellProblem::new(cell_mesh, cfg.material()?, &m)?, &phi)?;
    let state = problem.solve_state(&phi, &coeffs)?;
    let cost = eval_j(&phi, &m, state.compliance, &cfg.caps(), &cfg.weights());
    dir.vtk(
        "state.vtk",
        "phase field and displacement",
        &[VtkData::Scalar("phi", &phi), VtkData::Vector("u", &state.u)],
    )?;
    dir.vtk("m.vtk", "microstructure", &[VtkData::Scalar("m", &m)])?;
    dir.json(
        "results.json",
        &SolveResults {
            compliance: state.compliance,
            energy: state.energy,
            cost,
            iterations: state.report.iterations,
            residual: state.report.residual,
        },
    )
}

fn run_optimize(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let cell_mesh = cfg.cell_mesh()?;
    let phi0 = cfg.phi_field(&problem.mesh);
    let m0 = cfg.m_field(&cell_mesh);
    let reduced = ReducedProblem {
        problem,
        cell: cell_mesh,
        material: cfg.material()?,
        caps: cfg.caps(),
        weights: cfg.weights(),
        mode: cfg.mode(),
    };
    let result = optimize(&reduced, &phi0, &m0, &cfg.optim())?;
    let h = &result.history;
    let rows: Vec<Vec<String>> = h
        .records
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                cell(r.objective),
                cell(r.compliance),
                cell(r.reg_phi),
                cell(r.reg_m),
                cell(r.step),
                cell(r.stationarity),
                cell(r.volume_phi),
                cell(r.volume_m),
                r.probes.to_string(),
            ]
        })
        .collect();
    dir.csv(
        "history.csv",
        &[
            "iter",
            "objective",
            "compliance",
            "reg_phi",
            "reg_m",
            "step",
            "stationarity",
            "volume_phi",
            "volume_m",
            "probes",
        ],
        &rows,
    )?;
    dir.vtk(
        "design.vtk",
        "optimized phase field and displacement",
        &[
            VtkData::Scalar("phi", &result.phi),
            VtkData::Vector("u", &result.state.u),
        ],
    )?;
    dir.vtk(
        "m.vtk",
        "optimized microstructure",
        &[VtkData::Scalar("m", &result.m)],
    )?;
    dir.json("results.json", h)?;
    match h.termination {
        Some(Termination::Converged) => Ok(()),
        t => Err(CliError::NonConvergence(format!(
            "optimizer stopped with {t:?} at stationarity {:.3e} (tolerance {:.1e})",
            h.records.last().map_or(f64::NAN, |r| r.stationarity),
            cfg.tol_stationarity
        ))),
    }
}

#[derive(Serialize)]
struct GradCheck {
    direction: usize,
    analytic: f64,
    final_ratio: f64,
    passed: bool,
}

/// Central differences of the reduced objective along seeded random nodal
/// directions. Coefficients are rebuilt exactly at every probe and the caps
/// are lifted, so the check sees the smooth objective.
fn check_grad(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let cell_mesh = cfg.cell_mesh()?;
    let phi = cfg.phi_field(&problem.mesh);
    let m = cfg.m_field(&cell_mesh);
    if cfg.coefficients != crate::config::CoefficientChoice::Exact {
        log::info!("check-grad evaluates coefficients exactly");
    }
    let reduced = ReducedProblem {
        problem,
        cell: cell_mesh,
        material: cfg.material()?,
        caps: Caps {
            volume: f64::INFINITY,
            micro: f64::INFINITY,
        },
        weights: cfg.weights(),
        mode: CoefficientMode::Exact,
    };
    let ev = reduced.evaluate(&phi, &m)?;
    let grad = reduced.gradient(&ev)?;
    let mut rng = rand::rngs::StdRng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for k in 0..cfg.directions {
        let psi: Vec<f64> = (0..phi.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mu: Vec<f64> = (0..m.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = grad.directional(&psi, &mu);
        let at = |t: f64| -> Result<f64, CliError> {
            let p = ScalarField {
                grid: phi.grid,
                values: phi
                    .values
                    .iter()
                    .zip(&psi)
                    .map(|(a, b)| a + t * b)
                    .collect(),
            };
            let q = ScalarField {
                grid: m.grid,
                values: m.values.iter().zip(&mu).map(|(a, b)| a + t * b).collect(),
            };
            Ok(reduced.evaluate(&p, &q)?.cost.total)
        };
        let mut fds = Vec::new();
        for &t in &cfg.fd_steps {
            fds.push((at(t)? - at(-t)?) / (2.0 * t));
        }
        let errors: Vec<f64> = fds.iter().map(|fd| (fd - d).abs()).collect();
        let rs = ratios(&errors);
        let last = rs.last().copied().flatten().unwrap_or(f64::NAN);
        let passed = (cfg.ratio_min..=cfg.ratio_max).contains(&last);
        for (i, &t) in cfg.fd_steps.iter().enumerate() {
            let is_last = i + 1 == cfg.fd_steps.len();
            rows.push(vec![
                k.to_string(),
                cell(t),
                cell(d),
                cell(fds[i]),
                cell(errors[i]),
                opt_cell(rs[i]),
                if is_last {
                    passed.to_string()
                } else {
                    String::new()
                },
            ]);
        }
        summary.push(GradCheck {
            direction: k,
            analytic: d,
            final_ratio: last,
            passed,
        });
    }
    dir.csv(
        "check_grad.csv",
        &[
            "direction",
            "t",
            "analytic",
            "central_difference",
            "error",
            "ratio",
            "pass",
        ],
        &rows,
    )?;
    let all = summary.iter().all(|s| s.passed);
    dir.json("results.json", &serde_json::json!({ "ratio_range": [cfg.ratio_min, cfg.ratio_max], "directions": summary, "all_passed": all }))?;
    if all {
        Ok(())
    } else {
        Err(CliError::NonConvergence(
            "difference quotients do not converge at the expected rate".into(),
        ))
    }
}

fn sweep(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let instance = match cfg.sweep {
        SweepKind::Mm => SweepInstance::Disk {
            center: cfg.disk_center,
            radius: cfg.disk_radius,
            grid_n: cfg.disk_grid,
            well: cfg.well()?,
        },
        SweepKind::Energy | SweepKind::Cost => {
            let problem = cfg.problem()?;
            let cell_mesh = cfg.cell_mesh()?;
            SweepInstance::Homogenization {
                phi: cfg.phi_field(&problem.mesh),
                problem,
                material: cfg.material()?,
                m: cfg.m_field(&cell_mesh),
                n_levels: cfg.n_levels,
                elements_per_cell: cfg.elements_per_cell,
                caps: cfg.caps(),
                weights: cfg.weights(),
            }
        }
    };
    let report = gamma_sweep(cfg.sweep, &instance, &cfg.eps_list)?;
    let gaps: Vec<f64> = report.rows.iter().map(|r| r.gap).collect();
    let rs = ratios(&gaps);
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .zip(&rs)
        .map(|(r, q)| {
            vec![
                cell(r.eps),
                cell(r.value),
                cell(r.reference),
                cell(r.gap),
                opt_cell(*q),
            ]
        })
        .collect();
    dir.csv(
        "sweep.csv",
        &["eps", "value", "reference", "gap", "gap_ratio"],
        &rows,
    )?;
    let shrink = gaps.last().zip(gaps.first()).map(|(l, f)| l / f);
    dir.json(
        "results.json",
        &serde_json::json!({ "report": report, "final_over_first_gap": shrink }),
    )
}

fn mm_profile(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let well = cfg.well()?;
    let (eps, n) = (cfg.profile_eps, cfg.profile_points);
    let p = optimal_profile_1d(eps, &well, 1.0, n)?;
    let rows: Vec<Vec<String>> = p
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = i as f64 / n as f64;
            vec![cell(x), cell(*v), cell(well.profile((x - 0.5) / eps))]
        })
        .collect();
    dir.csv("profile.csv", &["x", "phi", "logistic"], &rows)?;
    // The profile extended constantly across a strip of unit height.
    let grid = StructuredGrid::new(n, 4, 1.0, 1.0, false);
    let values = (0..grid.num_nodes())
        .map(|k| p[grid.node_ij(k).0])
        .collect();
    let energy = mm_energy(&ScalarField::from_values(grid, values)?, eps, &well);
    dir.json(
        "results.json",
        &serde_json::json!({
            "eps": eps,
            "points": n,
            "interface_energy": energy,
            "c_h": well.c_h(),
            "ratio": energy / well.c_h(),
        }),
    )
}

#[derive(Serialize)]
struct SharpResults {
    derivative: ShapeDerivative,
    volume_rate_phi: f64,
    volume_rate_m: f64,
    js: f64,
    certificate_phi: Certificate,
    certificate_m: Certificate,
}

fn sharp_derivative(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let cell_mesh = cfg.cell_mesh()?;
    let design = SharpDesign::new(
        ScalarField::on_macro(&problem.mesh, |x| cfg.phi_level.level(x)),
        ScalarField::on_cell(&cell_mesh, |y| cfg.m_level.level(y)),
    )?;
    let (phi_v, m_v) = (cfg.phi_variation(), cfg.m_variation());
    let certificate_phi = certify_phi(&phi_v, &problem.mesh);
    let certificate_m = certify_m(&m_v);
    for (name, c) in [("Φ", &certificate_phi), ("Ψ", &certificate_m)] {
        if !c.all_passed() {
            log::warn!(
                "{name} fails admissibility checks: {:?}",
                c.checks.iter().filter(|k| !k.passed).collect::<Vec<_>>()
            );
        }
    }
    let sp = SharpProblem {
        problem,
        cell: cell_mesh,
        material: cfg.material()?,
        well: cfg.well()?,
    };
    let state = sp.state(&design)?;
    let dj = shape_derivative(&sp, &design, &state, &phi_v, &m_v)?;
    let mut forward = Vec::new();
    let mut central = Vec::new();
    for &t in &cfg.fd_steps {
        let plus = sp.transported_state(&design, &phi_v, &m_v, t)?.js;
        let minus = sp.transported_state(&design, &phi_v, &m_v, -t)?.js;
        forward.push((plus - state.js) / t);
        central.push((plus - minus) / (2.0 * t));
    }
    let ef: Vec<f64> = forward.iter().map(|v| (v - dj.total).abs()).collect();
    let ec: Vec<f64> = central.iter().map(|v| (v - dj.total).abs()).collect();
    let (rf, rc) = (ratios(&ef), ratios(&ec));
    let rows: Vec<Vec<String>> = (0..cfg.fd_steps.len())
        .map(|i| {
            vec![
                cell(cfg.fd_steps[i]),
                cell(dj.total),
                cell(forward[i]),
                cell(ef[i]),
                opt_cell(rf[i]),
                cell(central[i]),
                cell(ec[i]),
                opt_cell(rc[i]),
            ]
        })
        .collect();
    dir.csv(
        "sharp_derivative.csv",
        &[
            "t",
            "formula",
            "forward",
            "forward_error",
            "forward_ratio",
            "central",
            "central_error",
            "central_ratio",
        ],
        &rows,
    )?;
    let (volume_rate_phi, volume_rate_m) = volume_rates(&design, &phi_v, &m_v);
    dir.vtk(
        "level_sets.vtk",
        "phi level set",
        &[VtkData::Scalar("phi_level", &design.phi_level)],
    )?;
    dir.json(
        "results.json",
        &SharpResults {
            derivative: dj,
            volume_rate_phi,
            volume_rate_m,
            js: state.js,
            certificate_phi,
            certificate_m,
        },
    )
}
