use std::fmt;
use std::path::Path;
use std::time::Instant;

use qbm_core::coefficients::parse_profile;
use qbm_core::ermakov::{
    alpha_first_integral, alpha_from_rho, ermakov_invariant, integrate_ep, linear_basis,
    pinney_from_initial, pinney_superposition, spread, ErmakovProblem,
};
use qbm_core::fields::{gaussian2d, integrate2d, Field1D, Field2D};
use qbm_core::master_solver::{evolve, residual2d, SolverConfig, Trajectory2D};
use qbm_core::reduction::{
    invariant_gradient, reduced_symmetry, verify_reduction, verify_roundtrip, PipelineSetup,
    ReducedCoefficients, ReducedSymmetry, ReducedSymmetryReport, ReducedSymmetrySetup, Verdict,
};
use qbm_core::symmetry::{
    algebra_table, constant_generators, determining_defect, push_forward, sample_times,
    AlgebraTable, BracketStatus, ConstantGenerators, PointGenerator,
};
use qbm_core::time_fn::{Interpolation, QuasiPoly, TimeFn};
use qbm_core::QbmError;
use serde_json::{json, Value};

use crate::config::{parse_config, ConfigErrors, ReducedSymmetryConfig, RunConfig};
use crate::output::{num, resolve_dir, Artifacts};

pub const CONSERVATION_TOLERANCE: f64 = 1e-6;
pub const FLOW_RATIO_LIMIT: f64 = 5.0;
pub const YZ_TOLERANCE: f64 = 1e-12;
pub const PINNEY_TOLERANCE: f64 = 1e-6;
pub const BOUNDARY_WARNING: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
}

impl Outcome {
    fn from_pass(pass: bool) -> Outcome {
        if pass {
            Outcome::Passed
        } else {
            Outcome::Failed
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Outcome::Passed => "passed",
            Outcome::Failed => "failed",
        }
    }
}

#[derive(Debug)]
pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<QbmError> for CliError {
    fn from(e: QbmError) -> Self {
        CliError(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError(format!("i/o error: {e}"))
    }
}

impl From<ConfigErrors> for CliError {
    fn from(e: ConfigErrors) -> Self {
        CliError(format!("invalid configuration:\n{e}"))
    }
}

pub type CmdResult = Result<Outcome, CliError>;

struct Loaded {
    cfg: RunConfig,
    bytes: Vec<u8>,
    name: String,
}

impl Loaded {
    fn open(path: &Path) -> Result<Loaded, CliError> {
        let cfg = parse_config(path)?;
        let bytes = std::fs::read(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Loaded { cfg, bytes, name })
    }

    fn artifacts(&self, out: Option<&Path>) -> Result<Artifacts, CliError> {
        let dir = resolve_dir(out, self.cfg.output.dir.as_deref(), Some(&self.cfg.source));
        Ok(Artifacts::create(dir)?)
    }

    fn finish(&self, arts: Artifacts, command: &str, extra: Value) -> Result<(), CliError> {
        arts.finish(command, Some((&self.name, &self.bytes)), extra)?;
        Ok(())
    }

    fn provenance(&self, command: &str) -> String {
        format!("qbm {command}; {}", self.cfg.coefficients)
    }

    fn snapshot2d(
        &self,
        arts: &mut Artifacts,
        stem: &str,
        f: &Field2D,
        command: &str,
    ) -> Result<Option<String>, CliError> {
        let prov = self.provenance(command);
        let out = &self.cfg.output;
        if out.csv && out.json {
            return Ok(Some(arts.field2d(stem, f, &prov)?));
        }
        if out.csv {
            let csv = format!("{stem}.csv");
            arts.write(&csv, qbm_core::fields::field2d_to_csv(f).as_bytes())?;
            return Ok(Some(csv));
        }
        if out.json {
            arts.write_json(
                &format!("{stem}.json"),
                &qbm_core::fields::sidecar_json_2d(f, &prov),
            )?;
        }
        Ok(None)
    }

    fn snapshot1d(
        &self,
        arts: &mut Artifacts,
        stem: &str,
        f: &Field1D,
        command: &str,
    ) -> Result<Option<String>, CliError> {
        let prov = self.provenance(command);
        let out = &self.cfg.output;
        if out.csv && out.json {
            return Ok(Some(arts.field1d(stem, f, &prov)?));
        }
        if out.csv {
            let csv = format!("{stem}.csv");
            arts.write(&csv, qbm_core::fields::field1d_to_csv(f).as_bytes())?;
            return Ok(Some(csv));
        }
        if out.json {
            arts.write_json(
                &format!("{stem}.json"),
                &qbm_core::fields::sidecar_json_1d(f, &prov),
            )?;
        }
        Ok(None)
    }
}

fn coefficient_json(cfg: &RunConfig) -> Value {
    json!({
        "m": cfg.coefficients.m(),
        "hbar": cfg.coefficients.hbar(),
        "profiles": cfg.coefficient_specs,
        "description": cfg.coefficients.to_string(),
    })
}

fn solve(cfg: &RunConfig, label: &str) -> Result<Trajectory2D, CliError> {
    let f0 = gaussian2d(cfg.grid, &cfg.initial)?;
    let start = Instant::now();
    let traj = evolve(&f0, &cfg.coefficients, &cfg.solver)?;
    eprintln!(
        "{label}: {} snapshots to t = {} in {:.2} s",
        traj.snapshots().len(),
        traj.last().t,
        start.elapsed().as_secs_f64()
    );
    let peak = traj
        .snapshots()
        .iter()
        .map(Field2D::max_abs)
        .fold(0.0, f64::max);
    let edge = traj
        .snapshots()
        .iter()
        .map(Field2D::boundary_max_abs)
        .fold(0.0, f64::max);
    if edge > BOUNDARY_WARNING * peak {
        eprintln!("warning: boundary magnitude {edge:.3e} exceeds {BOUNDARY_WARNING:e} of the peak {peak:.3e}; enlarge the grid");
    }
    Ok(traj)
}

fn mass_report(traj: &Trajectory2D) -> (f64, f64, f64, f64) {
    let masses: Vec<f64> = traj.snapshots().iter().map(integrate2d).collect();
    let m0 = masses[0];
    let m1 = *masses.last().expect("at least one snapshot");
    let worst = masses
        .iter()
        .map(|m| ((m - m0) / m0).abs())
        .fold(0.0, f64::max);
    (m0, m1, ((m1 - m0) / m0).abs(), worst)
}

pub fn solve2d(config: &Path, out: Option<&Path>) -> CmdResult {
    let ld = Loaded::open(config)?;
    let cfg = &ld.cfg;
    let traj = solve(cfg, "solve2d")?;
    let mut arts = ld.artifacts(out)?;
    let mut snapshots = Vec::new();
    for (k, snap) in traj.snapshots().iter().enumerate() {
        let file = ld.snapshot2d(&mut arts, &format!("snapshots/z2d_{k:05}"), snap, "solve2d")?;
        snapshots.push(json!({ "index": k, "t": snap.t, "file": file }));
    }
    let (m0, m1, drift, worst) = mass_report(&traj);
    let report = json!({
        "command": "solve2d",
        "coefficients": coefficient_json(cfg),
        "grid": grid_json(cfg),
        "solver": solver_json(&cfg.solver),
        "snapshots": snapshots,
        "initial_mass": m0,
        "final_mass": m1,
        "relative_drift": drift,
        "max_relative_drift": worst,
        "boundary_max_abs": traj.snapshots().iter().map(Field2D::boundary_max_abs).fold(0.0, f64::max),
    });
    arts.write_json("solve2d.json", &report)?;
    ld.finish(arts, "solve2d", json!({ "snapshots": snapshots.len() }))?;
    Ok(Outcome::Passed)
}

fn grid_json(cfg: &RunConfig) -> Value {
    let g = &cfg.grid;
    json!({
        "x": { "min": g.x.min(), "max": g.x.max(), "n": g.x.n() },
        "y": { "min": g.y.min(), "max": g.y.max(), "n": g.y.n() },
    })
}

fn solver_json(c: &SolverConfig) -> Value {
    json!({ "dt": c.dt, "t_end": c.t_end, "stride": c.snapshot_stride, "cfl_safety": c.cfl_safety })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Conservation,
    Symmetry,
    Roundtrip,
    Reduction,
}

impl Check {
    pub fn parse(s: &str) -> Option<Check> {
        match s {
            "conservation" => Some(Check::Conservation),
            "symmetry" => Some(Check::Symmetry),
            "roundtrip" => Some(Check::Roundtrip),
            "reduction" => Some(Check::Reduction),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Check::Conservation => "conservation",
            Check::Symmetry => "symmetry",
            Check::Roundtrip => "roundtrip",
            Check::Reduction => "reduction",
        }
    }
}

pub fn verify(what: Check, config: &Path, out: Option<&Path>) -> CmdResult {
    let ld = Loaded::open(config)?;
    let (report, outcome) = match what {
        Check::Conservation => verify_conservation(&ld.cfg)?,
        Check::Symmetry => verify_symmetry(&ld.cfg)?,
        Check::Roundtrip => verify_roundtrips(&ld.cfg)?,
        Check::Reduction => {
            let (report, outcome, _) = reduction_report(&ld.cfg)?;
            (report, outcome)
        }
    };
    let mut arts = ld.artifacts(out)?;
    let file = format!("verify_{}.json", what.name());
    arts.write_json(&file, &report)?;
    ld.finish(
        arts,
        &format!("verify {}", what.name()),
        json!({ "verdict": outcome.as_str() }),
    )?;
    Ok(outcome)
}

fn verify_conservation(cfg: &RunConfig) -> Result<(Value, Outcome), CliError> {
    let traj = solve(cfg, "verify conservation")?;
    let (m0, m1, drift, worst) = mass_report(&traj);
    let outcome = Outcome::from_pass(worst < CONSERVATION_TOLERANCE);
    let report = json!({
        "what": "conservation",
        "coefficients": coefficient_json(cfg),
        "grid": grid_json(cfg),
        "solver": solver_json(&cfg.solver),
        "initial_mass": m0,
        "final_mass": m1,
        "relative_drift": drift,
        "max_relative_drift": worst,
        "tolerance": CONSERVATION_TOLERANCE,
        "verdict": outcome.as_str(),
    });
    Ok((report, outcome))
}

fn pick(gens: &ConstantGenerators, name: &str) -> PointGenerator {
    match name {
        "Y1" => gens.y1.clone(),
        "YZ" => gens.yz.clone(),
        "X1" => gens.x1.clone(),
        "X2" => gens.x2.clone(),
        "X3" => gens.x3.clone(),
        _ => gens.x4.clone(),
    }
}

/// Largest `|moved - e^eps Z|` relative to the largest `|Z|`.
fn yz_deviation(eps: f64, traj: &Trajectory2D, moved: &Trajectory2D) -> f64 {
    let scale = eps.exp();
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for (a, b) in traj.snapshots().iter().zip(moved.snapshots()) {
        peak = peak.max(a.max_abs());
        for (u, v) in a.values.iter().zip(b.values.iter()) {
            worst = worst.max((v - scale * u).abs());
        }
    }
    if peak > 0.0 {
        worst / peak
    } else {
        worst
    }
}

fn verify_symmetry(cfg: &RunConfig) -> Result<(Value, Outcome), CliError> {
    let cs = &cfg.coefficients;
    let gens = constant_generators(cs)?;
    let traj = solve(cfg, "verify symmetry")?;
    let base = residual2d(&traj)?;
    let eps = cfg.symmetry.eps;
    let mut flows = Vec::new();
    let mut pass = true;
    for name in &cfg.symmetry.generators {
        let g = pick(&gens, name);
        let moved = push_forward(&g, eps, &traj)?;
        let res = residual2d(&moved)?;
        let ratio = res / base;
        let mut entry = json!({
            "generator": name,
            "residual": num(res),
            "ratio": num(ratio),
            "limit": FLOW_RATIO_LIMIT,
        });
        let ok = if name == "YZ" {
            let dev = yz_deviation(eps, &traj, &moved);
            entry["exact_deviation"] = num(dev);
            entry["exact_tolerance"] = json!(YZ_TOLERANCE);
            dev <= YZ_TOLERANCE
        } else {
            ratio <= FLOW_RATIO_LIMIT
        };
        entry["verdict"] = json!(Outcome::from_pass(ok).as_str());
        pass &= ok;
        flows.push(entry);
    }

    let times = sample_times(0.0, cfg.solver.t_end.max(1.0), cfg.symmetry.sample_times);
    let mut defects = Vec::new();
    for g in gens.all() {
        let mut worst: f64 = 0.0;
        for &t in &times {
            worst = worst.max(determining_defect(&g, cs, t)?.max_abs());
        }
        defects.push(json!({ "generator": g.name, "max_abs": num(worst) }));
    }

    let (wx, wy) = invariant_gradient(cs)?;
    let along = |g: &PointGenerator| {
        let v = g.eval(0.0);
        wx * v.xi_x + wy * v.xi_y
    };
    let invariance = json!({ "X1": num(along(&gens.x1)), "X3": num(along(&gens.x3)) });

    let reduced = reduced_symmetry_check(&cfg.reduced_symmetry)?;
    pass &= reduced.verdict == Verdict::Converged;

    let outcome = Outcome::from_pass(pass);
    let report = json!({
        "what": "symmetry",
        "coefficients": coefficient_json(cfg),
        "lambda": num(gens.lambda),
        "eps": eps,
        "baseline_residual": num(base),
        "flows": flows,
        "determining_defects": defects,
        "invariant_rate_at_t0": invariance,
        "reduced_symmetry": reduced_symmetry_json(&cfg.reduced_symmetry, &reduced),
        "verdict": outcome.as_str(),
    });
    Ok((report, outcome))
}

/// `beta0 L + beta1 L int_0^T L^-2` with `L = e^{RT}` in closed form.
pub fn constant_drift_beta(r: f64, beta0: f64, beta1: f64) -> TimeFn {
    if r == 0.0 {
        return QuasiPoly::constant(beta0)
            .add(&QuasiPoly::monomial(beta1, 1))
            .into();
    }
    let k = beta1 / (2.0 * r);
    TimeFn::exp(beta0 + k, r).add(&TimeFn::exp(-k, -r))
}

fn reduced_symmetry_check(c: &ReducedSymmetryConfig) -> Result<ReducedSymmetryReport, CliError> {
    let rc = ReducedCoefficients::new(
        TimeFn::constant(1.0),
        TimeFn::constant(c.drift),
        TimeFn::constant(c.reaction),
    );
    let two_r = 2.0 * c.drift;
    let [a, b, cc] = c.alpha;
    let alpha = if two_r == 0.0 {
        QuasiPoly::constant(a)
            .add(&QuasiPoly::monomial(b, 1))
            .add(&QuasiPoly::monomial(cc, 2))
            .into()
    } else {
        TimeFn::constant(a)
            .add(&TimeFn::exp(b, two_r))
            .add(&TimeFn::exp(cc, -two_r))
    };
    let rs = ReducedSymmetry {
        alpha,
        beta: constant_drift_beta(c.drift, c.beta0, c.beta1),
        phi0: c.phi0,
    };
    let h = c.grid.spacing();
    let setup = ReducedSymmetrySetup {
        grid: c.grid,
        sigma: c.sigma,
        config: SolverConfig {
            dt: 0.1 * h * h,
            t_end: c.t_end,
            snapshot_stride: 5,
            cfl_safety: 0.4,
        },
    };
    Ok(reduced_symmetry(&rs, &rc, &setup)?)
}

fn reduced_symmetry_json(c: &ReducedSymmetryConfig, r: &ReducedSymmetryReport) -> Value {
    let readings: Vec<Value> = r
        .readings
        .iter()
        .map(|v| {
            json!({
                "phi": v.reading.as_str(),
                "residuals": [num(v.residuals[0]), num(v.residuals[1])],
                "ratios": [num(v.ratios[0]), num(v.ratios[1])],
                "order": num(v.order),
                "verdict": v.verdict.as_str(),
            })
        })
        .collect();
    json!({
        "drift": c.drift,
        "reaction": c.reaction,
        "alpha": c.alpha,
        "beta0": c.beta0,
        "beta1": c.beta1,
        "phi0": c.phi0,
        "profile_residuals": { "alpha": num(r.profiles.alpha_eq), "beta": num(r.profiles.beta_eq) },
        "original_residuals": [num(r.original_residuals[0]), num(r.original_residuals[1])],
        "readings": readings,
        "preserving": r.preserving.iter().map(|p| p.as_str()).collect::<Vec<_>>(),
        "verdict": r.verdict.as_str(),
    })
}

fn verify_roundtrips(cfg: &RunConfig) -> Result<(Value, Outcome), CliError> {
    let rt = &cfg.roundtrip;
    let mut waves = Vec::new();
    let mut pass = true;
    for wave in &rt.waves {
        let r = verify_roundtrip(wave, &cfg.coefficients, rt.mass, rt.tau0, &rt.window)?;
        pass &= r.verdict == Verdict::Converged;
        let levels: Vec<Value> = r
            .levels
            .iter()
            .map(|l| json!({ "nt": l.nt, "nw": l.nw, "residual": num(l.residual), "max_abs_u": num(l.max_abs_u) }))
            .collect();
        waves.push(json!({
            "wave": r.wave,
            "levels": levels,
            "order": num(r.order),
            "plateau": num(r.plateau),
            "consistency_defect": num(r.consistency_defect),
            "verdict": r.verdict.as_str(),
        }));
    }
    let outcome = Outcome::from_pass(pass);
    let w = &rt.window;
    let report = json!({
        "what": "roundtrip",
        "coefficients": coefficient_json(cfg),
        "mass": rt.mass,
        "tau0": [rt.tau0.re, rt.tau0.im],
        "window": { "t0": w.t0, "t1": w.t1, "w_min": w.w0, "w_max": w.w1, "nt": w.nt, "nw": w.nw },
        "min_order": qbm_core::reduction::MIN_ORDER,
        "waves": waves,
        "verdict": outcome.as_str(),
    });
    Ok((report, outcome))
}

fn reduction_report(
    cfg: &RunConfig,
) -> Result<(Value, Outcome, [qbm_core::reduction::PipelineRun; 2]), CliError> {
    let w_grid = cfg.w_grid.ok_or_else(|| {
        CliError("grid.w_min, grid.w_max and grid.nw are required for the reduction".into())
    })?;
    let setup = PipelineSetup {
        grid2d: cfg.grid,
        w_grid,
        sigma: cfg.reduction.sigma,
        config: cfg.solver,
    };
    let start = Instant::now();
    let (r, runs) = verify_reduction(&cfg.coefficients, &setup)?;
    eprintln!(
        "reduction: two levels in {:.2} s",
        start.elapsed().as_secs_f64()
    );
    let outcome = Outcome::from_pass(r.verdict == Verdict::Converged);
    let c = &r.consistency;
    let report = json!({
        "what": "reduction",
        "coefficients": coefficient_json(cfg),
        "s_bar": num(r.s_bar),
        "levels": [
            { "nx": setup.grid2d.x.n(), "nw": w_grid.n(), "dt": setup.config.dt,
              "residual2d": num(r.residuals[0]), "residual1d": num(r.reduced_residuals[0]) },
            { "nx": setup.grid2d.x.n() * 2 - 1, "nw": w_grid.n() * 2 - 1, "dt": setup.config.dt / 4.0,
              "residual2d": num(r.residuals[1]), "residual1d": num(r.reduced_residuals[1]) },
        ],
        "ratio": num(r.residuals[0] / r.residuals[1]),
        "order": num(r.order),
        "min_order": qbm_core::reduction::MIN_ORDER,
        "imag_ratio": num(r.imag_ratio),
        "consistency": {
            "x_mismatch": num(c.x_mismatch),
            "diffusion": { "printed": num(c.diffusion_printed), "substituted": num(c.diffusion_substituted) },
            "drift": { "printed": num(c.drift_printed), "substituted": num(c.drift_substituted) },
            "reaction": { "printed": num(c.reaction_printed), "substituted": num(c.reaction_substituted) },
        },
        "verdict": outcome.as_str(),
    });
    Ok((report, outcome, runs))
}

pub fn reduce(config: &Path, out: Option<&Path>) -> CmdResult {
    let ld = Loaded::open(config)?;
    let (report, outcome, runs) = reduction_report(&ld.cfg)?;
    let mut arts = ld.artifacts(out)?;
    let coarse = &runs[0];
    let mut files = Vec::new();
    for (k, snap) in coarse.reduced.snapshots().iter().enumerate() {
        if let Some(f) = ld.snapshot1d(&mut arts, &format!("reduced/u1d_{k:05}"), snap, "reduce")? {
            files.push(f);
        }
    }
    for (k, snap) in coarse
        .reconstruction
        .trajectory
        .snapshots()
        .iter()
        .enumerate()
    {
        if let Some(f) = ld.snapshot2d(
            &mut arts,
            &format!("reconstructed/z2d_{k:05}"),
            snap,
            "reduce",
        )? {
            files.push(f);
        }
    }
    arts.write_json("reduce.json", &report)?;
    ld.finish(
        arts,
        "reduce",
        json!({ "verdict": outcome.as_str(), "snapshots": files }),
    )?;
    Ok(outcome)
}

pub struct ErmakovArgs {
    pub omega2: String,
    pub k: f64,
    pub rho0: f64,
    pub drho0: f64,
    pub t1: f64,
    pub dt: f64,
}

pub fn ermakov(args: &ErmakovArgs, out: Option<&Path>) -> CmdResult {
    let omega2 = parse_profile(&args.omega2, Some(Path::new(".")), Interpolation::Cubic)?;
    let prob = ErmakovProblem::new(omega2.clone(), args.k, args.rho0, args.drho0)?;
    let direct = integrate_ep(&prob, 0.0, args.t1, args.dt)?;
    let basis = linear_basis(&omega2, 0.0, args.t1, args.dt)?;
    let (a, b, c) = pinney_from_initial(args.k, args.rho0, args.drho0)?;
    let pinney = pinney_superposition(&basis, a, b, c)?;
    let deviation = direct
        .value
        .iter()
        .zip(&pinney.rho.value)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    let alpha = alpha_from_rho(&direct.value)?;
    let integral = alpha_first_integral(&direct.times, &alpha, &omega2)?;
    let invariant = ermakov_invariant(&direct, &basis.sigma1, args.k);
    let outcome = Outcome::from_pass(deviation < PINNEY_TOLERANCE);

    let mut csv = String::from("T,rho,drho\n");
    for i in 0..direct.times.len() {
        csv.push_str(&format!(
            "{:.17e},{:.17e},{:.17e}\n",
            direct.times[i], direct.value[i], direct.deriv[i]
        ));
    }
    let report = json!({
        "omega2": args.omega2,
        "K": args.k,
        "rho0": args.rho0,
        "drho0": args.drho0,
        "t1": args.t1,
        "dt": args.dt,
        "samples": direct.times.len(),
        "final": { "T": direct.times.last(), "rho": direct.value.last(), "drho": direct.deriv.last() },
        "pinney": { "a": a, "b": b, "c": c, "K": pinney.k, "wronskian_drift": num(basis.max_drift) },
        "max_deviation": num(deviation),
        "tolerance": PINNEY_TOLERANCE,
        "first_integral": { "mean": num(integral.iter().sum::<f64>() / integral.len() as f64), "spread": num(spread(&integral)) },
        "invariant_spread": num(spread(&invariant)),
        "verdict": outcome.as_str(),
    });
    let mut arts = Artifacts::create(resolve_dir(out, None, None))?;
    arts.write("ermakov.csv", csv.as_bytes())?;
    arts.write_json("ermakov.json", &report)?;
    arts.finish("ermakov", None, json!({ "verdict": outcome.as_str() }))?;
    Ok(outcome)
}

pub fn bracket_json(gens: &ConstantGenerators, table: &AlgebraTable) -> Value {
    let entries: Vec<Value> = table
        .entries
        .iter()
        .map(|e| {
            let (status, extra) = match &e.status {
                BracketStatus::Zero => ("zero", Value::Null),
                BracketStatus::InSpan => ("in_span", Value::Null),
                BracketStatus::InSpanPlusZ { remainder, constant } => (
                    "in_span_plus_z",
                    json!({ "remainder": remainder.iter().map(|v| num(*v)).collect::<Vec<_>>(), "constant": constant }),
                ),
                BracketStatus::Unresolved { residual } => ("unresolved", json!({ "residual": num(*residual) })),
            };
            json!({
                "left": table.names[e.i],
                "right": table.names[e.j],
                "status": status,
                "coefficients": e.coefficients.iter().map(|v| num(*v)).collect::<Vec<_>>(),
                "pure_z": e.pure_z,
                "detail": extra,
            })
        })
        .collect();
    json!({
        "set": "constant",
        "lambda": num(gens.lambda),
        "names": table.names,
        "sample_times": table.sample_times,
        "entries": entries,
        "unresolved": table.unresolved(),
    })
}

pub fn bracket(set: &str, config: &Path, out: Option<&Path>) -> CmdResult {
    if set != "constant" {
        return Err(CliError(format!(
            "unknown generator set `{set}`; expected `constant`"
        )));
    }
    let ld = Loaded::open(config)?;
    let gens = constant_generators(&ld.cfg.coefficients)?;
    let times = sample_times(0.0, 1.0, ld.cfg.symmetry.sample_times);
    let table = algebra_table(&gens.all(), &times);
    let text = table.to_text();
    print!("{text}");
    let mut report = bracket_json(&gens, &table);
    report["coefficients"] = coefficient_json(&ld.cfg);
    let outcome = Outcome::from_pass(table.unresolved() == 0);
    report["verdict"] = json!(outcome.as_str());
    let mut arts = ld.artifacts(out)?;
    arts.write("bracket.txt", text.as_bytes())?;
    arts.write_json("bracket.json", &report)?;
    ld.finish(arts, "bracket", json!({ "verdict": outcome.as_str() }))?;
    Ok(outcome)
}
