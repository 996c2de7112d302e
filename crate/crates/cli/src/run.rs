//! Dispatch of the subcommands and the files each one writes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use forced_kepler::collision::{blow_up, certify_with, detect_collisions_with, energy_continuity_check, surgery, virial_residual, CertifyOptions};
use forced_kepler::fmt::sci12;
use forced_kepler::kepler_arcs::{phi0, s0, solve_arcs, zeta0_action_quadrature};
use forced_kepler::loops::{classify, poincare_constant, poincare_ratio, LoopPath};
use forced_kepler::minimizer::{euler_lagrange_residual, minimize};
use forced_kepler::potentials::Potential;
use forced_kepler::synthetic::{energy_jump_path, radial_kepler_orbit, zeta0_bounce};
use forced_kepler::fourier::FourierLoop;
use forced_kepler::{Error, Vec2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{AnalysisSource, Command, RunConfig};
use crate::error::{CliError, Context};
use crate::summary::{content_hash, ExitStatus, RunSummary};

/// Upper bound on the arc boundary residual and energy drift accepted by `arcs`.
pub const ARC_TOLERANCE: f64 = 1e-8;

struct Output {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|source| CliError::Io { path, source })?;
        self.files.push((name.to_string(), content_hash(content.as_bytes())));
        Ok(())
    }
}

struct Outcome {
    results: Vec<String>,
    status: ExitStatus,
}

fn line(key: impl AsRef<str>, value: impl std::fmt::Display) -> String {
    format!("{} = {}", key.as_ref(), value)
}

fn vec_str(v: Vec2<f64>) -> String {
    format!("{},{}", sci12(v.x), sci12(v.y))
}

/// Runs `cfg.command`, writing CSVs, `summary.txt` and `timing.txt` into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = Output::create(Path::new(&cfg.out))?;
    let config: Vec<(String, String)> =
        cfg.entries().into_iter().filter(|(k, _)| *k != "out").map(|(k, v)| (k.to_string(), v)).collect();
    let mut input = config.iter().map(|(k, v)| format!("{k} = {v}\n")).collect::<String>();
    let u = cfg.potential.build(cfg.period).context("potential")?;
    let needs_path = matches!(cfg.command, Command::Analyze | Command::Surgery);
    let path = if needs_path {
        let (p, raw) = source_path(cfg)?;
        if let Some(raw) = raw {
            input.push_str(&raw);
        }
        Some(p)
    } else {
        None
    };
    let outcome = match cfg.command {
        Command::Minimize => run_minimize(cfg, &u, &mut out)?,
        Command::Arcs => run_arcs(cfg, &mut out)?,
        Command::Analyze => run_analyze(cfg, &u, path.as_ref().unwrap(), &mut out)?,
        Command::Surgery => run_surgery(cfg, &u, path.as_ref().unwrap(), &mut out)?,
        Command::Verify => run_verify()?,
    };
    let mut summary = RunSummary {
        config,
        input_hash: content_hash(input.as_bytes()),
        results: outcome.results,
        files: Vec::new(),
        status: outcome.status,
        wall_clock: 0.0,
    };
    summary.files = out.files.clone();
    out.write("summary.txt", &summary.render())?;
    summary.wall_clock = start.elapsed().as_secs_f64();
    let timing = format!("wall_clock_seconds = {:.3}\n", summary.wall_clock);
    let timing_path = out.dir.join("timing.txt");
    fs::write(&timing_path, timing).map_err(|source| CliError::Io { path: timing_path, source })?;
    Ok(summary)
}

/// The loop analyzed by `analyze` and `surgery`, with the raw file text for
/// file sources.
fn source_path(cfg: &RunConfig) -> Result<(LoopPath<f64>, Option<String>), CliError> {
    let a = &cfg.analysis;
    let (dm, dp) = (a.dir_minus.normalized(), a.dir_plus.normalized());
    let path = match a.source {
        AnalysisSource::Bounce => zeta0_bounce(dm, dp, cfg.period, a.n).context("bounce path")?,
        AnalysisSource::Radial => radial_kepler_orbit(dm, cfg.period, a.n).context("radial orbit")?,
        AnalysisSource::EnergyJump => energy_jump_path(dm, a.jump_factor, cfg.period, a.n).context("energy-jump path")?,
        AnalysisSource::File => {
            let text = fs::read_to_string(&a.path).map_err(|source| CliError::Io { path: PathBuf::from(&a.path), source })?;
            let p = LoopPath::from_csv(&text, Some(cfg.period)).context(&a.path)?;
            return Ok((p, Some(text)));
        }
    };
    Ok((path, None))
}

fn run_minimize(cfg: &RunConfig, u: &Potential<f64>, out: &mut Output) -> Result<Outcome, CliError> {
    let res = minimize(u, &cfg.minimize).context("minimize")?;
    out.write("trajectory.csv", &res.path.to_csv())?;
    let mut r = res.action.summary_lines("minimize.action");
    r.push(line("minimize.class", res.constraint.tag.as_str()));
    r.push(line("minimize.winding", res.constraint.winding));
    r.push(line("minimize.min_radius", sci12(res.constraint.min_radius)));
    r.push(line("minimize.grad_norm", sci12(res.grad_norm)));
    r.push(line("minimize.iterations", res.iterations));
    r.push(line("minimize.start", res.start));
    r.push(line("minimize.converged", res.converged));
    r.push(line("minimize.collided", res.collided));
    r.push(line(
        "minimize.collision_suspects",
        res.collision_suspects.iter().map(|t| sci12(*t)).collect::<Vec<_>>().join(","),
    ));
    let mut status = if res.converged { ExitStatus::Success } else { ExitStatus::CertifiedFailure };
    if res.collided {
        let cert = certify_with(&res.path, u, &certify_options(cfg));
        r.extend(cert.summary_lines("minimize.certificate"));
        if !cert.passed {
            status = ExitStatus::CertifiedFailure;
        }
    } else {
        match euler_lagrange_residual(&res.path, u) {
            Ok(el) => r.push(line("minimize.euler_lagrange_residual", sci12(el))),
            Err(e) => r.push(line("minimize.euler_lagrange_residual", format!("unavailable ({e})"))),
        }
    }
    Ok(Outcome { results: r, status })
}

fn run_arcs(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let (qm, qp) = (cfg.arcs.x_minus.normalized(), cfg.arcs.x_plus.normalized());
    let (direct, indirect) = solve_arcs(qm, qp).context("arcs")?;
    let phi = phi0::<f64>();
    let mut r = vec![line("arcs.x_minus", vec_str(qm)), line("arcs.x_plus", vec_str(qp))];
    let mut ok = true;
    for (name, arc) in [("direct", &direct), ("indirect", &indirect)] {
        out.write(&format!("arc_{name}.csv"), &arc.to_csv())?;
        let p = format!("arcs.{name}");
        r.push(line(format!("{p}.action"), sci12(arc.action)));
        r.push(line(format!("{p}.margin"), sci12(phi - arc.action)));
        r.push(line(format!("{p}.energy"), sci12(arc.energy)));
        r.push(line(format!("{p}.boundary_residual"), sci12(arc.boundary_residual)));
        r.push(line(format!("{p}.energy_drift"), sci12(arc.energy_drift)));
        r.push(line(format!("{p}.sweep"), sci12(arc.sweep)));
        r.push(line(format!("{p}.min_radius"), sci12(arc.min_radius)));
        ok &= arc.action < phi && arc.boundary_residual <= ARC_TOLERANCE && arc.energy_drift <= ARC_TOLERANCE;
    }
    let winding = direct.concatenation_winding(&indirect);
    r.push(line("arcs.concatenation_winding", winding));
    ok &= winding.abs() == 1;
    let status = if ok { ExitStatus::Success } else { ExitStatus::CertifiedFailure };
    Ok(Outcome { results: r, status })
}

fn certify_options(cfg: &RunConfig) -> CertifyOptions<f64> {
    let a = &cfg.analysis;
    CertifyOptions {
        direction_gap_tol: a.direction_gap_tol,
        energy_gap_tol: a.energy_gap_tol,
        equation_tol: a.equation_tol,
        exclusion_cells: a.exclusion_cells,
        ..CertifyOptions::default()
    }
}

fn run_analyze(cfg: &RunConfig, u: &Potential<f64>, path: &LoopPath<f64>, out: &mut Output) -> Result<Outcome, CliError> {
    let opts = certify_options(cfg);
    let cert = certify_with(path, u, &opts);
    let mut r = cert.summary_lines("analyze.certificate");
    let virial = virial_residual(path, u);
    r.push(line("analyze.virial.residual", sci12(virial.max_residual())));
    r.push(line("analyze.virial.potential_form", sci12(virial.max_potential_form())));
    r.push(line("analyze.virial.corrected_form", sci12(virial.max_corrected_form())));
    r.push(line("analyze.virial.skipped", virial.skipped.len()));
    if cert.discrete_set_ok {
        let events = detect_collisions_with(path, &opts.detect).context("detect_collisions")?;
        let energy = energy_continuity_check(path, u, &events, opts.exclusion_cells, opts.energy_gap_tol);
        for (i, (ev, en)) in events.iter().zip(&energy).enumerate() {
            let p = format!("analyze.event{i}");
            r.extend(ev.summary_lines(&p));
            r.push(line(format!("{p}.energy_left"), sci12(en.left)));
            r.push(line(format!("{p}.energy_right"), sci12(en.right)));
            let deltas = if cfg.analysis.deltas.is_empty() { ev.default_deltas(cfg.analysis.delta_terms) } else { cfg.analysis.deltas.clone() };
            let profiles = blow_up(path, u, ev, &deltas).context("blow_up")?;
            for (j, prof) in profiles.iter().enumerate() {
                let q = format!("{p}.blowup{j}");
                out.write(&format!("blowup_e{i}_d{j}.csv"), &prof.to_csv())?;
                r.push(line(format!("{q}.delta"), sci12(prof.delta)));
                r.push(line(format!("{q}.sigma_minus"), sci12(prof.sigma_minus)));
                r.push(line(format!("{q}.sigma_plus"), sci12(prof.sigma_plus)));
                r.push(line(format!("{q}.sup_deviation"), sci12(prof.sup_deviation_from_zeta0)));
                r.push(line(format!("{q}.rescaled_action"), sci12(prof.rescaled_action)));
            }
        }
    }
    let status = if cert.passed { ExitStatus::Success } else { ExitStatus::CertifiedFailure };
    Ok(Outcome { results: r, status })
}

fn run_surgery(cfg: &RunConfig, u: &Potential<f64>, path: &LoopPath<f64>, out: &mut Output) -> Result<Outcome, CliError> {
    let opts = certify_options(cfg);
    let events = detect_collisions_with(path, &opts.detect).context("detect_collisions")?;
    let mut r = vec![line("surgery.events", events.len())];
    let phi = phi0::<f64>();
    let mut ok = true;
    for (i, ev) in events.iter().enumerate() {
        for (j, &delta) in cfg.analysis.surgery_deltas.iter().enumerate() {
            let p = format!("surgery.event{i}.delta{j}");
            r.push(line(format!("{p}.delta"), sci12(delta)));
            let (direct, indirect, rep) = match surgery(path, u, ev, delta) {
                Ok(v) => v,
                Err(Error::CoincidentDirections { gap }) => {
                    r.push(line(format!("{p}.applicable"), false));
                    r.push(line(format!("{p}.direction_gap"), sci12(gap)));
                    ok = false;
                    continue;
                }
                Err(e) => return Err(CliError::Core { context: format!("surgery at delta {delta}"), source: e }),
            };
            r.push(line(format!("{p}.applicable"), true));
            r.push(line(format!("{p}.time_stretch"), sci12(rep.time_stretch)));
            r.push(line(format!("{p}.kinetic_factor"), sci12(rep.kinetic_factor)));
            r.extend(rep.original_window_action.summary_lines(&format!("{p}.original_window")));
            let mut improved = false;
            for cand in [&direct, &indirect] {
                let name = cand.label.as_str();
                let q = format!("{p}.{name}");
                out.write(&format!("surgery_e{i}_d{j}_{name}.csv"), &cand.path.to_csv())?;
                let gap = rep.original_window_action.total - cand.window_action.total;
                r.extend(cand.window_action.summary_lines(&format!("{q}.window")));
                r.push(line(format!("{q}.grid_window_total"), sci12(cand.grid_window_action.total)));
                r.push(line(format!("{q}.total_action"), sci12(cand.total_action.total)));
                r.push(line(format!("{q}.class"), cand.constraint.tag.as_str()));
                r.push(line(format!("{q}.winding"), cand.constraint.winding));
                r.push(line(format!("{q}.gap"), sci12(gap)));
                r.push(line(format!("{q}.gap_rescaled"), sci12(gap / delta.sqrt())));
                r.push(line(format!("{q}.limit_gap"), sci12(phi - cand.arc.action)));
                improved |= cand.in_x() && gap > 0.0;
            }
            r.push(line(format!("{p}.improved_in_x"), improved));
            ok &= improved;
        }
    }
    let status = if ok { ExitStatus::Success } else { ExitStatus::CertifiedFailure };
    Ok(Outcome { results: r, status })
}

/// Number of canned loops in the Poincaré check of `verify`.
const VERIFY_LOOPS: usize = 24;

fn run_verify() -> Result<Outcome, CliError> {
    let mut r = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool, value: f64| {
        r.push(line(format!("verify.{name}"), format!("{} {}", if pass { "pass" } else { "fail" }, sci12(value))));
        ok &= pass;
    };
    let s = s0::<f64>();
    check("s0", (s - 2f64.sqrt() / 3.0).abs() < 1e-15, s);
    let phi = phi0::<f64>();
    check("phi0", (phi - 4.0 * 8f64.powf(1.0 / 6.0)).abs() < 1e-14, phi);
    let q = zeta0_action_quadrature::<f64>(64);
    check("zeta0_action", (q - phi).abs() < 1e-6, q);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let period = std::f64::consts::TAU;
    let mut worst = 0.0f64;
    for i in 0..VERIFY_LOOPS {
        let winding = [1, -1, 2, -3][i % 4];
        let f = FourierLoop::random_with_winding(&mut rng, period, 5, winding, 1.0, 0.8);
        let p = f.sample(256).context("canned loop")?;
        worst = worst.max(poincare_ratio(&p).context("poincare")? / poincare_constant(period));
    }
    check("poincare", worst <= 1.0, worst);
    let circle = LoopPath::from_fn(period, 256, |t| (Vec2::polar(t), Vec2::polar(t).perp())).context("circle")?;
    let el = euler_lagrange_residual(&circle, &Potential::zero(period)).context("circle residual")?;
    check("circle_residual", el <= 1e-2, el);
    let in_x = classify(&circle).context("classify")?.tag.in_x();
    check("circle_class", in_x, 1.0);
    let status = if ok { ExitStatus::Success } else { ExitStatus::CertifiedFailure };
    Ok(Outcome { results: r, status })
}
