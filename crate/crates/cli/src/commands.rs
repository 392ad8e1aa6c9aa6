//! Subcommand implementations. Each writes its artifacts into the output
//! directory and returns the reports whose verdicts decide the exit status.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use torus_mfg::experiments::{
    default_direction, hminus_bound_study, kernel_regularity_study, refinement_verdicts,
    stability_study, taylor_rate_study, FamilyMember,
};
use torus_mfg::linearized::{freeze_coefficients, negative_norm_trace, solve_linearized};
use torus_mfg::master::{kernel_from_base, master_residual, uniqueness_consistency, Kernel, Probes};
use torus_mfg::mfg::{solve_mfg, PathPair, SolveDiagnostics};
use torus_mfg::model::audit::{audit_assumptions, default_corpus, AuditConfig};
use torus_mfg::report::{fmt_num, StudyReport, Verdict};
use torus_mfg::sampling::{random_zero_mean, rng};
use torus_mfg::spectral::{DistributionalDatum, SpectralField, TorusGrid};

use crate::cache::{key, Cache};
use crate::config::RunConfig;

/// Shared state of one invocation.
pub struct RunContext {
    pub cfg: RunConfig,
    pub hash: String,
    pub out: PathBuf,
    pub cache: Cache,
    pub log: Vec<String>,
}

impl RunContext {
    fn note(&mut self, line: impl Into<String>) {
        self.log.push(line.into());
    }

    /// Writes a report as CSV with the config hash in its metadata.
    fn emit(&mut self, file: &str, report: &mut StudyReport) -> Result<()> {
        report.meta("config_hash", &self.hash);
        let path = self.out.join(file);
        fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        self.note(format!("wrote {}", path.display()));
        Ok(())
    }

    fn write_bytes(&mut self, file: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(file);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.note(format!("wrote {}", path.display()));
        Ok(())
    }
}

/// A converged base solution with its diagnostics.
pub struct Base {
    pub pair: PathPair,
    pub diagnostics: SolveDiagnostics,
}

fn encode_base(b: &Base) -> Vec<u8> {
    let mut out = b.pair.to_bytes();
    let d = &b.diagnostics;
    out.extend((d.picard_iterations as u64).to_le_bytes());
    out.extend(d.final_defect.to_le_bytes());
    out.extend(d.clamp_fraction.to_le_bytes());
    out.push(d.clamp_flagged as u8);
    out.extend((d.defect_history.len() as u64).to_le_bytes());
    for v in &d.defect_history {
        out.extend(v.to_le_bytes());
    }
    out
}

fn decode_base(bytes: &[u8]) -> Result<Base> {
    let mut r = bytes;
    let pair = PathPair::read(&mut r)?;
    let mut take = |n: usize| -> Result<&[u8]> {
        if r.len() < n {
            bail!("truncated diagnostics");
        }
        let (head, tail) = r.split_at(n);
        r = tail;
        Ok(head)
    };
    let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().expect("8 bytes"));
    let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8 bytes"));
    let picard_iterations = u64_at(take(8)?) as usize;
    let final_defect = f64_at(take(8)?);
    let clamp_fraction = f64_at(take(8)?);
    let clamp_flagged = take(1)?[0] != 0;
    let len = u64_at(take(8)?) as usize;
    let defect_history = (0..len).map(|_| take(8).map(f64_at)).collect::<Result<Vec<_>>>()?;
    Ok(Base {
        pair,
        diagnostics: SolveDiagnostics {
            picard_iterations,
            final_defect,
            defect_history,
            clamp_fraction,
            clamp_flagged,
            converged: true,
        },
    })
}

fn base_key(cfg: &RunConfig, n: usize) -> String {
    let c = cfg;
    let parts = [
        format!("{:?}", c.grid.d),
        n.to_string(),
        toml::to_string(&c.time).expect("serializes"),
        toml::to_string(&c.hamiltonian).expect("serializes"),
        toml::to_string(&c.payoff).expect("serializes"),
        toml::to_string(&c.initial).expect("serializes"),
        toml::to_string(&c.picard).expect("serializes"),
        toml::to_string(&c.sobolev).expect("serializes"),
    ];
    let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
    key("path", &refs)
}

/// Solves (or loads) the base MFG solution on the grid with `n` modes.
pub fn base_solution(ctx: &mut RunContext, n: usize) -> Result<Base> {
    let cfg = ctx.cfg.clone();
    let grid = cfg.grid_for(n)?;
    let k = base_key(&cfg, n);
    let base = ctx.cache.get_or_compute(
        &k,
        decode_base,
        encode_base,
        || {
            let m0 = cfg.initial_density(&grid);
            let (pair, diagnostics) = solve_mfg(
                &cfg.hamiltonian()?,
                &cfg.payoff()?,
                &m0,
                &cfg.time_grid()?,
                &cfg.solver(),
            )
            .context("mfg solve")?;
            Ok(Base { pair, diagnostics })
        },
    )?;
    Ok(base)
}

fn probes(cfg: &RunConfig, grid: &TorusGrid) -> Probes {
    match cfg.kernel.probe_count {
        0 => Probes::FullGrid,
        c => Probes::Points(
            (0..c)
                .map(|j| {
                    let mut y = vec![0.0; grid.dim()];
                    y[0] = std::f64::consts::TAU * j as f64 / c as f64;
                    y
                })
                .collect(),
        ),
    }
}

/// Extracts (or loads) the kernel on the grid with `n` modes.
pub fn kernel(ctx: &mut RunContext, n: usize) -> Result<Kernel> {
    let base = base_solution(ctx, n)?;
    let cfg = ctx.cfg.clone();
    let grid = cfg.grid_for(n)?;
    let probes = probes(&cfg, &grid);
    let k = key("kernel", &[&base_key(&cfg, n), &format!("{probes:?}")]);
    ctx.cache.get_or_compute(
        &k,
        |b| Ok(Kernel::read(&mut &b[..])?),
        |k: &Kernel| k.to_bytes(),
        || {
            let ham = cfg.hamiltonian()?;
            let coeffs = freeze_coefficients(&ham, &base.pair)?;
            Ok(kernel_from_base(&coeffs, &cfg.payoff()?, &base.pair, &probes, &cfg.solver())
                .context("kernel extraction")?)
        },
    )
}

fn direction(cfg: &RunConfig, grid: &TorusGrid, scale: f64) -> Result<SpectralField> {
    let amplitude = scale * grid.uniform_density();
    match cfg.direction.kind.as_str() {
        "default" => Ok(default_direction(grid, amplitude)),
        "random" => {
            let f = random_zero_mean(grid, cfg.direction.max_mode, 1.0, &mut rng(cfg.direction.seed));
            let peak = f.sup_norm().max(f64::MIN_POSITIVE);
            // match the sup norm of the default direction
            let reference = default_direction(grid, amplitude).sup_norm();
            Ok(f.scale(reference / peak))
        }
        other => Err(anyhow!("unknown direction kind `{other}` (default, random)")),
    }
}

fn datum(cfg: &RunConfig, grid: &TorusGrid) -> Result<DistributionalDatum> {
    let l = &cfg.linearized;
    let point = || -> Result<Vec<f64>> {
        if l.point.len() != grid.dim() {
            bail!("linearized.point needs {} coordinates", grid.dim());
        }
        Ok(l.point.clone())
    };
    match l.datum.as_str() {
        "dirac" => Ok(DistributionalDatum::DiracAt(point()?)),
        "dirac-gradient" => Ok(DistributionalDatum::DiracGradientAt(point()?, l.axis)),
        "mode" => {
            let k = l.mode as f64;
            Ok(DistributionalDatum::ZeroMeanField(SpectralField::from_fn(grid, |x| (k * x[0]).cos())))
        }
        "direction" => Ok(DistributionalDatum::ZeroMeanField(direction(cfg, grid, 1.0)?)),
        other => Err(anyhow!("unknown datum `{other}` (dirac, dirac-gradient, mode, direction)")),
    }
}

pub fn solve_mfg_cmd(ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    let n = ctx.cfg.grid.n;
    let base = base_solution(ctx, n)?;
    let s = ctx.cfg.sobolev.s;
    let d = &base.diagnostics;
    let mut r = StudyReport::new("solve_mfg", "t", &["mass", "u_hs", "m_hs_minus_1", "u_sup", "m_min"]);
    r.meta("picard_iterations", d.picard_iterations);
    r.meta("final_defect", fmt_num(d.final_defect));
    r.meta("clamp_fraction", fmt_num(d.clamp_fraction));
    r.meta("clamp_flagged", d.clamp_flagged);
    r.meta(
        "defect_history",
        d.defect_history.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(" "),
    );
    let tg = base.pair.time_grid;
    for (i, (u, m)) in base.pair.u_path.iter().zip(&base.pair.m_path).enumerate() {
        let m_min = m.synthesize().into_iter().fold(f64::INFINITY, f64::min);
        r.push(
            tg.time(i),
            "node",
            vec![m.mass(), u.sobolev_norm(s), m.sobolev_norm(s - 1.0), u.sup_norm(), m_min],
        );
    }
    r.verdicts.push(Verdict::at_most("mass_drift", base.pair.mass_drift(), 1e-12));
    ctx.write_bytes("mfg_path.mfgp", &base.pair.to_bytes())?;
    ctx.emit("solve_mfg.csv", &mut r)?;
    Ok(vec![r])
}

pub fn solve_linearized_cmd(ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    let n = ctx.cfg.grid.n;
    let base = base_solution(ctx, n)?;
    let cfg = ctx.cfg.clone();
    let grid = cfg.grid()?;
    let coeffs = freeze_coefficients(&cfg.hamiltonian()?, &base.pair)?;
    let payoff = cfg.payoff()?;
    let (pair, diag) = solve_linearized(&coeffs, &payoff, &base.pair, &datum(&cfg, &grid)?, &cfg.solver())
        .context("linearized solve")?;
    let mut r = negative_norm_trace(&pair, cfg.sobolev.s).to_report(cfg.sobolev.s);
    r.meta("datum", &cfg.linearized.datum);
    for st in &diag.stages {
        r.meta(
            &format!("stage_eps_{}", fmt_num(st.eps)),
            format!("iterations={} defect={}", st.iterations, fmt_num(st.final_defect)),
        );
    }
    let nsteps = pair.time_grid.n_steps();
    let terminal = payoff.dg_dm_apply(base.pair.m_terminal(), &pair.mu_path[nsteps])?;
    let identity = (&pair.v_path[nsteps] - &terminal).sup_norm();
    r.verdicts.push(Verdict::at_most(
        "terminal_identity",
        identity,
        1e-12 * terminal.sup_norm().max(1.0),
    ));
    r.verdicts.push(Verdict::at_most("mass_drift", pair.mass_drift(), 1e-12));
    let mut bytes = Vec::new();
    pair.write(&mut bytes)?;
    ctx.write_bytes("linearized_pair.mfgp", &bytes)?;
    ctx.emit("negative_norm_trace.csv", &mut r)?;
    Ok(vec![r])
}

pub fn extract_kernel_cmd(ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    let n = ctx.cfg.grid.n;
    let k = kernel(ctx, n)?;
    let s = ctx.cfg.sobolev.s;
    let mut r = StudyReport::new("kernel", "probe", &["sup_norm", "hminus_s", "mean"]);
    r.meta("t0", fmt_num(k.t0));
    r.meta("full_grid", k.is_full_grid());
    for (j, (y, c)) in k.probes.iter().zip(&k.columns).enumerate() {
        let label = y.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(" ");
        r.push(j as f64, &format!("y=({label})"), vec![c.sup_norm(), c.sobolev_norm(-s), c.mean()]);
    }
    ctx.write_bytes("kernel.mfgk", &k.to_bytes())?;
    ctx.emit("kernel.csv", &mut r)?;
    Ok(vec![r])
}

pub fn check_master_cmd(ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    let cfg = ctx.cfg.clone();
    let grid = cfg.grid()?;
    let m0 = cfg.initial_density(&grid);
    let ham = cfg.hamiltonian()?;
    let payoff = cfg.payoff()?;
    let solver = cfg.solver();
    let mut r = StudyReport::new(
        "master_residual",
        "n_steps",
        &["sup_norm", "time_derivative", "laplacian", "hamiltonian", "diffusion_term", "drift_term"],
    );
    let tg = cfg.time_grid()?;
    let mut sups = Vec::new();
    for factor in [1, 2] {
        let grid_t = tg.refined(factor)?;
        let res = master_residual(&ham, &payoff, &m0, &grid_t, &solver).context("master residual")?;
        sups.push(res.sup_norm);
        r.push(
            grid_t.n_steps() as f64,
            "residual",
            vec![
                res.sup_norm,
                res.time_derivative.sup_norm(),
                res.laplacian.sup_norm(),
                res.hamiltonian.sup_norm(),
                res.diffusion_term.sup_norm(),
                res.drift_term.sup_norm(),
            ],
        );
        ctx.note(format!("master residual at {} steps: {}", grid_t.n_steps(), fmt_num(res.sup_norm)));
    }
    let floor = 10.0 * solver.picard.tol;
    if sups[0] <= floor {
        r.verdicts.push(Verdict::at_most("residual_at_tolerance", sups[1], floor));
    } else {
        r.verdicts.push(Verdict::at_least(
            "refinement_factor",
            sups[0] / sups[1],
            cfg.master.refinement_factor,
        ));
    }
    if cfg.master.uniqueness {
        let defect = uniqueness_consistency(&ham, &payoff, &m0, &tg, &solver)?;
        r.meta("uniqueness_defect", fmt_num(defect));
    }
    ctx.emit("master_residual.csv", &mut r)?;
    Ok(vec![r])
}

pub fn taylor_cmd(ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    let cfg = ctx.cfg.clone();
    let grid = cfg.grid()?;
    let mut solver = cfg.solver();
    solver.picard.tol = cfg.taylor.tol;
    let chi = direction(&cfg, &grid, cfg.taylor.scale)?;
    let mut r = taylor_rate_study(
        &cfg.hamiltonian()?,
        &cfg.payoff()?,
        &cfg.initial_density(&grid),
        &chi,
        &cfg.taylor.eps,
        &cfg.time_grid()?,
        &solver,
    )?;
    ctx.emit("taylor_rate.csv", &mut r)?;
    Ok(vec![r])
}

pub fn stability_cmd(ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    let cfg = ctx.cfg.clone();
    let grid = cfg.grid()?;
    let chi = direction(&cfg, &grid, cfg.stability.scale)?;
    let mut r = stability_study(
        &cfg.hamiltonian()?,
        &cfg.payoff()?,
        &cfg.initial_density(&grid),
        &chi,
        &cfg.stability.exponents,
        &cfg.time_grid()?,
        &cfg.solver(),
        cfg.stability.spread,
    )?;
    ctx.emit("stability.csv", &mut r)?;
    Ok(vec![r])
}

pub fn hminus_cmd(ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    let cfg = ctx.cfg.clone();
    let grid = cfg.grid()?;
    let h = &cfg.hminus;
    let d = grid.dim();
    let point = |j: usize, count: usize| {
        let mut y = vec![0.0; d];
        y[0] = std::f64::consts::TAU * j as f64 / count as f64;
        y
    };
    let mut family: Vec<FamilyMember> = (2..=h.k_max).map(FamilyMember::Mode).collect();
    family.extend((0..h.diracs).map(|j| FamilyMember::Dirac(point(j, h.diracs))));
    family.extend((0..h.dirac_gradients).map(|j| FamilyMember::DiracGradient(point(j, h.dirac_gradients), 0)));
    let mut r = hminus_bound_study(
        &cfg.hamiltonian()?,
        &cfg.payoff()?,
        &cfg.initial_density(&grid),
        &family,
        &cfg.time_grid()?,
        &cfg.solver(),
        h.spread,
    )?;
    ctx.emit("hminus_bound.csv", &mut r)?;
    Ok(vec![r])
}

pub fn regularity_cmd(ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    let n = ctx.cfg.grid.n;
    let s = ctx.cfg.sobolev.s;
    let spread = ctx.cfg.regularity.spread;
    let coarse = kernel(ctx, n)?;
    let mut r = kernel_regularity_study(&coarse, s, spread)?;
    let mut reports = Vec::new();
    if ctx.cfg.regularity.refine {
        let fine = kernel(ctx, 2 * n)?;
        let mut rf = kernel_regularity_study(&fine, s, spread)?;
        let tol = ctx.cfg.regularity.refine_tolerance;
        r.verdicts.extend(refinement_verdicts(&r, &rf, tol));
        ctx.emit("kernel_regularity_refined.csv", &mut rf)?;
        reports.push(rf);
    }
    ctx.emit("kernel_regularity.csv", &mut r)?;
    reports.insert(0, r);
    Ok(reports)
}

pub fn audit_cmd(ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    let cfg = ctx.cfg.clone();
    let grid = cfg.grid()?;
    let acfg = AuditConfig {
        s: cfg.sobolev.s,
        r: cfg.sobolev.r,
        radius: cfg.picard.radius,
        seed: cfg.audit.seed,
        points: cfg.audit.points,
    };
    let corpus = default_corpus(&grid, cfg.audit.samples, &acfg);
    let mut r = audit_assumptions(&cfg.hamiltonian()?, &cfg.payoff()?, &corpus, &acfg)?;
    ctx.emit("audit_assumptions.csv", &mut r)?;
    Ok(vec![r])
}

pub fn norms_cmd(ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    let cfg = ctx.cfg.clone();
    let grid = cfg.grid()?;
    let f = match cfg.norms.field.as_str() {
        "one" => SpectralField::constant(&grid, 1.0),
        "initial" => cfg.initial_density(&grid),
        "cos" => SpectralField::from_fn(&grid, |x| x[0].cos()),
        "dirac" => DistributionalDatum::DiracAt(vec![0.0; grid.dim()]).synthesize(&grid)?,
        other => bail!("unknown norms.field `{other}` (one, initial, cos, dirac)"),
    };
    let mut r = StudyReport::new("norms", "index", &["norm"]);
    r.meta("field", &cfg.norms.field);
    for &l in &cfg.norms.indices {
        let v = f.sobolev_norm(l);
        println!("H^{l} norm of {}: {v:?}", cfg.norms.field);
        r.push(l, "sobolev", vec![v]);
    }
    r.sort_rows();
    ctx.emit("norms.csv", &mut r)?;
    Ok(vec![r])
}
