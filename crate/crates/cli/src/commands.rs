//! Subcommand implementations. Each returns a report object, and [`run`]
//! turns it into JSON on the chosen output with a matching exit code.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use detline::complex::{barycentric_subdivision, euler_characteristic, orient_closed_manifold, Complex, OrientedManifoldComplex};
use detline::detline::{
    cohomology_element, correspondence_check, correspondence_cohomological, correspondence_hat, subdivide_twisted, Frame, LineBundleIso,
    Twisted,
};
use detline::duality::{DualGeometry, DualityContext};
use detline::families::{self, random_entry, random_gauge};
use detline::io::{build_system, read_complex, read_raw_system, write_complex, write_system, Backend, RawEntry, RawSystem};
use detline::local_system::{twisted_chain_complex, Field, LocalSystem};
use detline::matrix::Matrix;
use detline::oracle::{rs_norm, spectral_report, t_induced_metric, thm53_product_check, InnerProductData};
use detline::pr_metric::{flat_metric, pr_norm, pr_norm_cohomological, pr_norm_recipe, reidemeister_norm};
use detline::scalar::{rel_close, Scalar, C64, Q};
use detline::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::report::{error_report, header, modulus, real, signed};
use crate::{BackendArg, Cli, Command, CorrespondArgs, GenArgs, OracleArgs, PrArgs, TorsionArgs};

type Report = Map<String, Value>;

/// Tolerance for the `equal` flags of oracle reports.
const ORACLE_TOL: f64 = 1e-8;

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gen(_) => "gen",
        Command::Check { .. } => "check",
        Command::Torsion(_) => "torsion",
        Command::PrMetric(_) => "pr-metric",
        Command::RMetric(_) => "r-metric",
        Command::Correspond(_) => "correspond",
        Command::Oracle(_) => "oracle",
    }
}

/// Runs the command and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let name = command_name(&cli.command);
    let start = Instant::now();
    let outcome = if cli.tol > 0.0 && cli.tol.is_finite() {
        dispatch(cli)
    } else {
        Err(Error::Parse(format!("tolerance must be positive, got {}", cli.tol)))
    };
    match outcome {
        Ok(mut report) => {
            report.insert("timing_ms".into(), real(start.elapsed().as_secs_f64() * 1e3));
            match emit(cli, &Value::Object(report)) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("detline: {e}");
                    1
                }
            }
        }
        Err(err) => {
            println!("{}", serde_json::to_string_pretty(&error_report(name, &err)).expect("report serializes"));
            eprintln!("detline {name}: {err}");
            if err.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

fn emit(cli: &Cli, report: &Value) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    match (&cli.out, &cli.command) {
        (Some(path), cmd) if !matches!(cmd, Command::Gen(_)) => fs::write(path, text),
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_complex(path: &Path) -> Result<Complex> {
    read_complex(&read_file(path)?)
}

fn load_raw(path: &Path) -> Result<RawSystem> {
    read_raw_system(&read_file(path)?)
}

fn manifold_of(c: &Complex) -> Result<OrientedManifoldComplex> {
    orient_closed_manifold(c.clone())
}

/// Arithmetic actually used for a job.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Arith {
    Exact,
    Float,
}

fn requested(cli: &Cli, raw: Option<&RawSystem>) -> Result<Backend> {
    Ok(match cli.backend {
        Some(BackendArg::Exact) => Backend::Exact,
        Some(BackendArg::F64) => Backend::F64,
        Some(BackendArg::Hp) => Backend::Hp,
        None => match raw {
            Some(r) => r.backend()?,
            None => Backend::F64,
        },
    })
}

/// `hp` runs exactly when every input is rational and in double precision
/// otherwise.
fn resolve(backend: Backend, raws: &[&RawSystem]) -> Result<Arith> {
    let rational = raws.iter().all(|r| r.all_rational());
    match backend {
        Backend::Exact if rational => Ok(Arith::Exact),
        Backend::Exact => Err(Error::Backend("exact backend needs rational real transports".into())),
        Backend::F64 => Ok(Arith::Float),
        Backend::Hp if rational => Ok(Arith::Exact),
        Backend::Hp => Ok(Arith::Float),
    }
}

fn tol_for(arith: Arith, cli: &Cli) -> f64 {
    match arith {
        Arith::Exact => 0.0,
        Arith::Float => cli.tol,
    }
}

fn start_report(cli: &Cli, name: &str, backend: Backend, arith: Arith) -> Report {
    let mut r = header(name, &backend.to_string(), tol_for(arith, cli), cli.seed);
    r.insert("arithmetic".into(), json!(if arith == Arith::Exact { "exact" } else { "f64" }));
    r
}

fn inputs(paths: &[(&str, &Path)]) -> Value {
    Value::Object(paths.iter().map(|(k, p)| (k.to_string(), json!(p.display().to_string()))).collect())
}

/// Runs `$body` with `$S` bound to the scalar type of `$arith`.
macro_rules! with_scalar {
    ($arith:expr, $S:ident => $body:expr) => {
        match $arith {
            Arith::Exact => {
                type $S = Q;
                $body
            }
            Arith::Float => {
                type $S = C64;
                $body
            }
        }
    };
}

fn dispatch(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Gen(args) => gen(cli, args),
        Command::Check { complex, system } => check(cli, complex, system.as_deref()),
        Command::Torsion(args) => {
            let (c, raw) = (load_complex(&args.input.complex)?, load_raw(&args.input.system)?);
            let backend = requested(cli, Some(&raw))?;
            let arith = resolve(backend, &[&raw])?;
            let mut r = start_report(cli, "torsion", backend, arith);
            r.insert("inputs".into(), inputs(&[("complex", &args.input.complex), ("system", &args.input.system)]));
            with_scalar!(arith, S => torsion::<S>(cli, args, c, &raw, &mut r))?;
            Ok(r)
        }
        Command::PrMetric(args) => {
            let (c, raw) = (load_complex(&args.input.complex)?, load_raw(&args.input.system)?);
            let backend = requested(cli, Some(&raw))?;
            let arith = resolve(backend, &[&raw])?;
            let mut r = start_report(cli, "pr-metric", backend, arith);
            r.insert("inputs".into(), inputs(&[("complex", &args.input.complex), ("system", &args.input.system)]));
            with_scalar!(arith, S => pr_metric::<S>(cli, args, c, &raw, &mut r))?;
            Ok(r)
        }
        Command::RMetric(args) => {
            let (c, raw) = (load_complex(&args.complex)?, load_raw(&args.system)?);
            let backend = requested(cli, Some(&raw))?;
            let arith = resolve(backend, &[&raw])?;
            let mut r = start_report(cli, "r-metric", backend, arith);
            r.insert("inputs".into(), inputs(&[("complex", &args.complex), ("system", &args.system)]));
            with_scalar!(arith, S => r_metric::<S>(cli, c, &raw, &mut r))?;
            Ok(r)
        }
        Command::Correspond(args) => {
            let c = load_complex(&args.complex)?;
            let (re, rf) = (load_raw(&args.system_e)?, load_raw(&args.system_f)?);
            let backend = requested(cli, Some(&re))?;
            let arith = resolve(backend, &[&re, &rf])?;
            let mut r = start_report(cli, "correspond", backend, arith);
            let paths = [("complex", args.complex.as_path()), ("system_e", &args.system_e), ("system_f", &args.system_f)];
            r.insert("inputs".into(), inputs(&paths));
            with_scalar!(arith, S => correspond::<S>(cli, args, c, [&re, &rf], &mut r))?;
            Ok(r)
        }
        Command::Oracle(args) => oracle(cli, args),
    }
}

fn parse_scalar<S: Scalar>(s: &str, what: &str) -> Result<S> {
    S::parse_entry(s).ok_or_else(|| Error::Parse(format!("{what} '{s}' is not valid for backend {}", S::BACKEND)))
}

fn gen(cli: &Cli, args: &GenArgs) -> Result<Report> {
    let p = &args.params;
    let want = |k: usize| -> Result<()> {
        if p.len() == k {
            Ok(())
        } else {
            Err(Error::Parse(format!("family '{}' takes {k} integer parameter(s), got {}", args.family, p.len())))
        }
    };
    let c = match args.family.as_str() {
        "circle" => want(1).and_then(|_| families::circle(p[0] as usize))?,
        "sphere" => want(1).and_then(|_| families::sphere(p[0] as usize))?,
        "lens" => want(2).and_then(|_| families::lens_complex(p[0], p[1]))?,
        "torus2" => want(0).and_then(|_| families::torus2())?,
        other => return Err(Error::Parse(format!("unknown family '{other}' (circle, sphere, lens, torus2)"))),
    };
    if args.rank == 0 {
        return Err(Error::Parse("rank must be positive".into()));
    }
    let nonreal_character = match (args.family.as_str(), args.character) {
        ("lens", Some(k)) => families::root_of_unity(p[0], k).im.abs() > 1e-12,
        _ => false,
    };
    let complex_input = args.angle.is_some() || nonreal_character;
    let backend = match cli.backend {
        Some(BackendArg::Exact) => Backend::Exact,
        Some(BackendArg::F64) => Backend::F64,
        Some(BackendArg::Hp) | None if complex_input => Backend::F64,
        Some(BackendArg::Hp) | None => Backend::Exact,
    };
    if backend == Backend::Exact && complex_input {
        return Err(Error::Backend("exact backend needs a real holonomy".into()));
    }
    let c = Arc::new(c);
    let prefix = match &cli.out {
        Some(path) => path.display().to_string(),
        None => std::iter::once(args.family.clone()).chain(p.iter().map(u32::to_string)).collect::<Vec<_>>().join("_"),
    };
    let system_json = match backend {
        Backend::Exact => write_system(&gen_system::<Q>(cli, args, c.clone(), complex_input)?, backend),
        _ => write_system(&gen_system::<C64>(cli, args, c.clone(), complex_input)?, backend),
    };
    let complex_path = format!("{prefix}.complex.json");
    let system_path = format!("{prefix}.system.json");
    let io_err = |e: std::io::Error| Error::Parse(format!("cannot write output: {e}"));
    fs::write(&complex_path, write_complex(&c) + "\n").map_err(io_err)?;
    fs::write(&system_path, system_json + "\n").map_err(io_err)?;
    let mut r = header("gen", &backend.to_string(), cli.tol, cli.seed);
    r.insert("family".into(), json!(args.family));
    r.insert("params".into(), json!(p));
    r.insert("cells".into(), json!(c.counts()));
    r.insert("files".into(), json!({ "complex": complex_path, "system": system_path }));
    Ok(r)
}

fn gen_system<S: Scalar>(cli: &Cli, args: &GenArgs, c: Arc<Complex>, complex_input: bool) -> Result<LocalSystem<S>> {
    let rank = args.rank;
    let field = if complex_input { Field::Complex } else { Field::Real };
    let scalar_hol = |s: &Option<String>, what: &str| -> Result<Matrix<S>> {
        let v = match s {
            Some(text) => parse_scalar::<S>(text, what)?,
            None => S::one(),
        };
        Ok(Matrix::identity(rank).scale(&v))
    };
    let sys = match args.family.as_str() {
        "circle" => {
            let hol = match args.angle {
                Some(theta) => Matrix::identity(rank).scale(
                    &S::from_c64(C64::from_polar(1.0, theta)).ok_or_else(|| Error::Backend("--angle needs a complex backend".into()))?,
                ),
                None => scalar_hol(&args.holonomy, "holonomy")?,
            };
            families::circle_system(c.clone(), hol, field)?
        }
        "torus2" => {
            let a = scalar_hol(&args.holonomy, "holonomy")?;
            let b = scalar_hol(&args.holonomy_b, "holonomy")?;
            families::torus_system(c.clone(), a, b, field)?
        }
        "lens" => {
            if rank != 1 {
                return Err(Error::Parse("lens systems have rank 1".into()));
            }
            let (p, q) = (args.params[0], args.params[1]);
            let zeta = families::root_of_unity(p, args.character.unwrap_or(0));
            let sys = families::lens_system(c.clone(), p, q, zeta)?;
            if S::EXACT {
                // only the characters ±1 reach here; their values are integers
                sys.convert(|z| S::from_i64(z.re.round() as i64))
            } else {
                sys.convert(|z| S::from_c64(*z).expect("float backend"))
            }
        }
        _ => families::trivial_system(c.clone(), rank, field)?,
    };
    if !args.gauge {
        return Ok(sys);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    sys.regauge(&random_gauge::<S>(c.len(), rank, &mut rng, complex_input))
}

fn check(cli: &Cli, complex: &Path, system: Option<&Path>) -> Result<Report> {
    let c = load_complex(complex)?;
    let raw = system.map(load_raw).transpose()?;
    let backend = requested(cli, raw.as_ref())?;
    let arith = match &raw {
        Some(r) => resolve(backend, &[r])?,
        None => Arith::Float,
    };
    let mut r = start_report(cli, "check", backend, arith);
    let mut paths = vec![("complex", complex)];
    if let Some(s) = system {
        paths.push(("system", s));
    }
    r.insert("inputs".into(), inputs(&paths));
    // ∂∂ = 0 on the integer incidence matrices
    for q in 2..=c.dim() {
        let (a, b) = (c.boundary_matrix(q - 1), c.boundary_matrix(q));
        for row in &a {
            for j in 0..c.count(q) {
                let v: i64 = row.iter().enumerate().map(|(k, x)| x * b[k][j]).sum();
                if v != 0 {
                    return Err(Error::BoundaryMismatch { degree: q, residual: v as f64 });
                }
            }
        }
    }
    let m = manifold_of(&c)?;
    r.insert("mode".into(), json!(c.mode().as_str()));
    r.insert("dimension".into(), json!(m.n));
    r.insert("cells".into(), json!(c.counts()));
    r.insert("boundary_squared_zero".into(), json!(true));
    r.insert("orientable".into(), json!(true));
    r.insert("closed_manifold".into(), json!(true));
    r.insert("euler_characteristic".into(), json!(euler_characteristic(&c)));
    if let Some(raw) = &raw {
        let tol = tol_for(arith, cli);
        let c = Arc::new(c);
        let (flat, unimodular) = with_scalar!(arith, S => {
            let sys = build_system::<S>(raw, c.clone(), tol)?;
            twisted_chain_complex(&sys, tol)?.check_boundary_squared(tol.max(1e-9))?;
            (true, flat_metric(&sys).is_ok())
        });
        r.insert("rank".into(), json!(raw.rank));
        r.insert("field".into(), json!(raw.field));
        r.insert("flat".into(), json!(flat));
        r.insert("unimodular".into(), json!(unimodular));
    }
    r.insert("ok".into(), json!(true));
    Ok(r)
}

fn parse_frame<S: Scalar>(path: &Path, n: usize) -> Result<Frame<S>> {
    let entries: Vec<RawEntry> = serde_json::from_str(&read_file(path)?).map_err(|e| Error::Parse(format!("frame: {e}")))?;
    if entries.len() != n {
        return Err(Error::Parse(format!("frame has {} entries, expected {n}", entries.len())));
    }
    let u = entries
        .iter()
        .map(|e| e.value::<S>().ok_or_else(|| Error::Parse(format!("frame entry {e:?} is not valid for backend {}", S::BACKEND))))
        .collect::<Result<_>>()?;
    Ok(Frame { u })
}

fn betti_report<S: Scalar>(e: &Twisted<S>) -> Value {
    json!(e.homology.betti())
}

fn torsion<S: Scalar>(cli: &Cli, args: &TorsionArgs, c: Complex, raw: &RawSystem, r: &mut Report) -> Result<()> {
    let tol = if S::EXACT { 0.0 } else { cli.tol };
    let c = Arc::new(c);
    let e = Twisted::new(build_system::<S>(raw, c.clone(), tol)?, tol)?;
    let frame = match &args.frame {
        Some(path) => parse_frame::<S>(path, c.len())?,
        None => Frame::unit(c.len()),
    };
    let t = e.torsion(&frame)?;
    r.insert("betti".into(), betti_report(&e));
    r.insert("acyclic".into(), json!(e.homology.is_acyclic()));
    r.insert("torsion_abs".into(), modulus(&t.value));
    r.insert("t_coordinate_abs".into(), modulus(&t.coordinate));
    if cli.signed {
        r.insert("torsion".into(), signed(&t.value));
        r.insert("t_coordinate".into(), signed(&t.coordinate));
    }
    if args.subdivide {
        let m = manifold_of(&c)?;
        let (fine_m, map) = barycentric_subdivision(&m)?;
        let fine = subdivide_twisted(&e, Arc::new(fine_m.base), &map, tol)?;
        let fine_frame = Frame { u: map.carrier.iter().map(|&k| frame.u[k].clone()).collect() };
        let tf = fine.torsion(&fine_frame)?;
        let agree = detline::scalar::approx_eq_mod_sign(&t.value, &tf.value, cli.tol);
        r.insert("subdivided".into(), json!({ "cells": fine.complex().counts(), "torsion_abs": modulus(&tf.value), "agree": agree }));
    }
    Ok(())
}

fn random_frame<S: Scalar>(n: usize, rng: &mut ChaCha8Rng) -> Frame<S> {
    Frame {
        u: (0..n)
            .map(|_| {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                random_entry::<S>(sign * rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0))
            })
            .collect(),
    }
}

fn pr_metric<S: Scalar>(cli: &Cli, args: &PrArgs, c: Complex, raw: &RawSystem, r: &mut Report) -> Result<()> {
    let tol = if S::EXACT { 0.0 } else { cli.tol };
    let m = manifold_of(&c)?;
    let geo = DualGeometry::new(&m)?;
    let ctx = DualityContext::new(&geo, build_system::<S>(raw, Arc::new(c), tol)?, tol)?;
    let x = ctx.e.element(S::one());
    let norm = pr_norm(&ctx, &x)?.value;
    let co = pr_norm_cohomological(&ctx, &cohomology_element(&ctx.estar, S::one()))?.value;
    let d = ctx.homological()?;
    r.insert("betti".into(), betti_report(&ctx.e));
    r.insert("pr_norm".into(), real(norm));
    r.insert("pr_norm_cohomological".into(), real(co));
    r.insert("duality_scalar_abs".into(), modulus(&d));
    if cli.signed {
        r.insert("duality_scalar".into(), signed(&d));
    }
    let (n_primal, n_dual) = (ctx.e.complex().len(), ctx.e_dual.complex().len());
    let (alpha, beta, gamma) = if args.random_frames {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        (random_frame::<S>(n_primal, &mut rng), random_frame::<S>(n_dual, &mut rng), random_frame::<S>(n_dual, &mut rng))
    } else {
        (Frame::unit(n_primal), Frame::unit(n_dual), Frame::unit(n_dual))
    };
    let parts = pr_norm_recipe(&ctx, &alpha, &beta, &gamma)?;
    let t_alpha = pr_norm(&ctx, &ctx.e.element(ctx.e.t_of(&alpha)?))?.value;
    r.insert(
        "recipe".into(),
        json!({
            "frames": if args.random_frames { "random" } else { "unit" },
            "ratio": real(parts.ratio),
            "pairing": real(parts.pairing),
            "duality": real(parts.duality),
            "product": real(parts.product()),
            "pr_norm_squared": real(t_alpha * t_alpha),
            "agree": rel_close(parts.product(), t_alpha * t_alpha, cli.tol),
        }),
    );
    Ok(())
}

fn r_metric<S: Scalar>(cli: &Cli, c: Complex, raw: &RawSystem, r: &mut Report) -> Result<()> {
    let tol = if S::EXACT { 0.0 } else { cli.tol };
    let e = Twisted::new(build_system::<S>(raw, Arc::new(c), tol)?, tol)?;
    let v = reidemeister_norm(&e, &e.element(S::one()))?.value;
    r.insert("betti".into(), betti_report(&e));
    r.insert("r_norm".into(), real(v));
    Ok(())
}

fn correspond<S: Scalar>(cli: &Cli, args: &CorrespondArgs, c: Complex, raws: [&RawSystem; 2], r: &mut Report) -> Result<()> {
    let tol = if S::EXACT { 0.0 } else { cli.tol };
    let c = Arc::new(c);
    let (se, sf) = (build_system::<S>(raws[0], c.clone(), tol)?, build_system::<S>(raws[1], c.clone(), tol)?);
    let e = Twisted::new(se.clone(), tol)?;
    let f = Twisted::new(sf.clone(), tol)?;
    let value = parse_scalar::<S>(&args.value, "iso value")?;
    let phi = LineBundleIso::propagate(&se.det(), &sf.det(), &[value])?;
    let s = correspondence_hat(&phi, &e, &f, tol)?;
    let estar = Twisted::new(se.dual(), tol)?;
    let fstar = Twisted::new(sf.dual(), tol)?;
    let sc = correspondence_cohomological(&phi, &estar, &fstar, tol)?;
    r.insert("euler_characteristic".into(), json!(euler_characteristic(&c)));
    r.insert("scalar_abs".into(), modulus(&s));
    r.insert("scalar_cohomological_abs".into(), modulus(&sc));
    if cli.signed {
        r.insert("scalar".into(), signed(&s));
        r.insert("scalar_cohomological".into(), signed(&sc));
    }
    if args.subdivide {
        let m = manifold_of(&c)?;
        let (fine_m, map) = barycentric_subdivision(&m)?;
        let cmp = correspondence_check(&phi, &e, &f, Arc::new(fine_m.base), &map, tol)?;
        r.insert(
            "subdivided".into(),
            json!({
                "coarse_abs": modulus(&cmp.coarse),
                "fine_abs": modulus(&cmp.fine),
                "quotient_factor_abs": modulus(&cmp.quotient_factor),
                "agree": cmp.agree,
            }),
        );
    }
    Ok(())
}

fn oracle(cli: &Cli, args: &OracleArgs) -> Result<Report> {
    let c = Arc::new(load_complex(&args.input.complex)?);
    let raw = load_raw(&args.input.system)?;
    let backend = requested(cli, Some(&raw))?;
    let mut r = start_report(cli, "oracle", backend, Arith::Float);
    r.insert("inputs".into(), inputs(&[("complex", &args.input.complex), ("system", &args.input.system)]));
    let sys = build_system::<C64>(&raw, c.clone(), cli.tol)?;
    let rank = sys.rank();
    let e = Twisted::new(sys.clone(), cli.tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let ip = InnerProductData::random(c.len(), rank, &mut rng, sys.field() == Field::Complex);
    let report = spectral_report(&e.chains, &ip.degree_grams(&c, rank), &e.homology.cycles)?;
    let list = |v: &[f64]| Value::Array(v.iter().map(|&x| real(x)).collect());
    r.insert(
        "spectrum".into(),
        json!({
            "eigenvalues": report.eigenvalues.iter().map(|v| list(v)).collect::<Vec<_>>(),
            "det_prime": list(&report.det_prime),
            "betti": report.betti,
            "harmonic_volume": list(&report.harmonic_volume),
        }),
    );
    let rs = rs_norm(&e, &ip)?;
    let t = t_induced_metric(&e, &ip)?;
    r.insert("rs_norm".into(), real(rs));
    r.insert("t_induced_norm".into(), real(t));
    r.insert("equal".into(), json!(rel_close(rs, t, ORACLE_TOL)));
    if args.thm53 {
        let estar = Twisted::new(sys.dual(), cli.tol)?;
        let (product, canonical) = thm53_product_check(&e, &estar, &ip, &ip.dual()?)?;
        r.insert(
            "thm53".into(),
            json!({ "product": real(product), "canonical": real(canonical), "equal": rel_close(product, canonical, ORACLE_TOL) }),
        );
    }
    Ok(r)
}
