//! Batch CLI: energy/linking evaluation, conformal transforms, family and
//! sweepout scans, energy minimization, and the `verify` invariant suite.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mobius::curve::TAU;
use mobius::energy::{energy_lower_bound_report, gauss_linking_integral};
use mobius::error::MobiusError;
use mobius::family;
use mobius::optimize::{self, MinimizeOpts};
use mobius::sweepout::{self, MinMaxSurface};
use mobius::vec4::{self, Vec4};
use mobius::{
    hopf_link, hopf_link_r3, linking_number, mobius_energy, perturbed_hopf_link, split_link,
    torus_2_4_link, Link, QuadratureSpec, Result,
};

#[derive(Parser)]
#[command(name = "mobius", version, about = "Möbius cross-energy toolkit for 2-component links")]
struct Cli {
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Link selection shared by most subcommands: a named model link or a JSON file.
#[derive(Args)]
struct LinkArgs {
    /// Built-in link: hopf | hopf-r3 | split | torus-2-4 | perturbed-hopf
    #[arg(long, conflicts_with = "input")]
    link: Option<String>,
    /// Link JSON file ({gamma1, gamma2})
    #[arg(long)]
    input: Option<PathBuf>,
    /// Seed for perturbed-hopf
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Perturbation amplitude for perturbed-hopf
    #[arg(long, default_value_t = 0.1)]
    amp: f64,
    /// Fourier modes for generated links
    #[arg(long, default_value_t = 16)]
    modes: usize,
}

impl LinkArgs {
    fn resolve(&self) -> Result<Link> {
        if let Some(path) = &self.input {
            return mobius::io::read_link(path);
        }
        match self.link.as_deref() {
            Some("hopf") | None => Ok(hopf_link()),
            Some("hopf-r3") => hopf_link_r3(self.modes),
            Some("split") => Ok(split_link(1.0)),
            Some("torus-2-4") => Ok(torus_2_4_link()),
            Some("perturbed-hopf") => perturbed_hopf_link(self.seed, self.amp, self.modes),
            Some(other) => Err(MobiusError::Config(format!("unknown link `{other}`"))),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Möbius cross energy of a link
    Energy {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value_t = 128)]
        quad_n: usize,
    },
    /// Gauss linking integral and the rounded linking number
    Linking {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value_t = 128)]
        quad_n: usize,
    },
    /// Apply a conformal map (JSON description) to a link
    Transform {
        #[command(flatten)]
        link: LinkArgs,
        /// ConformalMap JSON file
        #[arg(long)]
        map: PathBuf,
        /// Output link JSON
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        quad_n: usize,
    },
    /// Scan the canonical family over sampled (v, z)
    FamilyScan {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 96)]
        quad_n: usize,
        /// CSV output (v1..v4, z, areaIntegral, upperIntegrand, maxJac, minContainmentMargin)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the min-max family Φ over I⁵
    SweepoutScan {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        quad_n: usize,
        /// Seed for the (x, t) samples
        #[arg(long, default_value_t = 0)]
        scan_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient descent on the discretized energy
    Minimize {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 96)]
        quad_n: usize,
        /// Trace CSV (iter, energy, alpha, step, gradnorm, lk)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the final link JSON
        #[arg(long)]
        out_link: Option<PathBuf>,
    },
    /// Run the invariant suite and print a pass/fail table
    Verify {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value_t = 128)]
        quad_n: usize,
        /// Report residuals against this tolerance scale factor
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
}

/// 12 significant digits, plain decimal.
fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Energy { link, quad_n } => {
            let link = link.resolve()?;
            let quad = QuadratureSpec::new(quad_n)?;
            let e = mobius_energy(&link, &quad);
            println!("energy = {}", sig12(e));
            println!("|E - 2pi^2| = {}", sig12((e - 2.0 * PI * PI).abs()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Linking { link, quad_n } => {
            let link = link.resolve()?;
            let quad = QuadratureSpec::new(quad_n)?;
            let raw = gauss_linking_integral(&link, &quad)?;
            let lk = linking_number(&link, &quad)?;
            println!("gauss integral = {}", sig12(raw));
            println!("lk = {lk}");
            println!("residual = {}", sig12((raw - lk as f64).abs()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Transform { link, map, out, quad_n } => {
            let link = link.resolve()?;
            let map = mobius::io::read_conformal_map(&map)?;
            let quad = QuadratureSpec::new(quad_n)?;
            let before = mobius_energy(&link, &quad);
            let image = Link::new(
                map.pushforward_curve(&link.gamma1)?,
                map.pushforward_curve(&link.gamma2)?,
            )?;
            let after = mobius_energy(&image, &quad);
            println!("energy before = {}", sig12(before));
            println!("energy after  = {}", sig12(after));
            println!("relative change = {}", sig12(((after - before) / before).abs()));
            if let Some(path) = out {
                mobius::io::write_link(&path, &image)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::FamilyScan { link, count, quad_n, out } => {
            let link = link.resolve()?;
            let link = if link.dim() == 3 { link.to_sphere()? } else { link };
            let quad = QuadratureSpec::new(quad_n)?;
            let energy = mobius_energy(&link, &quad);
            let mut csv = String::from(
                "v1,v2,v3,v4,z,areaIntegral,upperIntegrand,maxJac,minContainmentMargin\n",
            );
            let mut worst_gap = f64::INFINITY;
            let mut max_area = 0.0f64;
            for (v, z) in family::family_sample(count) {
                let fp = family::family_coeffs(&v, z)?;
                let grid = family::family_area(&link, &fp, &quad)?;
                let margin = if fp.boundary {
                    family::support_containment_check(&link, &v, z, &quad)?.min_margin
                } else {
                    f64::NAN
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    sig12(v[0]),
                    sig12(v[1]),
                    sig12(v[2]),
                    sig12(v[3]),
                    sig12(z),
                    sig12(grid.area_integral),
                    sig12(grid.upper_integral),
                    sig12(grid.max_jac()),
                    sig12(margin),
                ));
                worst_gap = worst_gap.min(energy - grid.upper_integral);
                max_area = max_area.max(grid.area_integral);
            }
            if let Some(path) = out {
                std::fs::write(&path, &csv)
                    .map_err(|e| MobiusError::Config(format!("{}: {e}", path.display())))?;
            } else {
                print!("{csv}");
            }
            println!("samples = {count}");
            println!("energy = {}", sig12(energy));
            println!("max areaIntegral = {}", sig12(max_area));
            println!("min (E - upperIntegrand) = {}", sig12(worst_gap));
            Ok(ExitCode::SUCCESS)
        }
        Command::SweepoutScan { link, count, quad_n, scan_seed, out } => {
            let link = link.resolve()?;
            let link = if link.dim() == 3 { link.to_sphere()? } else { link };
            let quad = QuadratureSpec::new(quad_n)?;
            let energy = mobius_energy(&link, &quad);
            let mut rng = ChaCha8Rng::seed_from_u64(scan_seed);
            let mut csv = String::from("x1,x2,x3,x4,t,kind,area,sphereResidual\n");
            let mut sup = 0.0f64;
            for i in 0..count {
                // mix interior points with cube-boundary and t-endpoint samples
                let mut x = [
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                ];
                let mut t = rng.gen_range(0.0..1.0);
                match i % 4 {
                    1 => x[i % 4] = if rng.gen_bool(0.5) { 0.0 } else { 1.0 },
                    2 => t = if rng.gen_bool(0.5) { 0.0 } else { 1.0 },
                    _ => {}
                }
                let surface = sweepout::minmax_surface(&link, &x, t, &quad)?;
                let area = surface.area();
                sup = sup.max(area);
                let residual = match &surface {
                    MinMaxSurface::RoundSphere { radius, area, .. } => {
                        (area - sweepout::geodesic_sphere_area(*radius)).abs()
                    }
                    _ => 0.0,
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    sig12(x[0]),
                    sig12(x[1]),
                    sig12(x[2]),
                    sig12(x[3]),
                    sig12(t),
                    surface.kind(),
                    sig12(area),
                    sig12(residual),
                ));
            }
            if let Some(path) = out {
                std::fs::write(&path, &csv)
                    .map_err(|e| MobiusError::Config(format!("{}: {e}", path.display())))?;
            } else {
                print!("{csv}");
            }
            println!("sup area = {}", sig12(sup));
            println!("energy = {}", sig12(energy));
            println!("sup <= E + 1e-6: {}", sup <= energy + 1e-6);
            Ok(ExitCode::SUCCESS)
        }
        Command::Minimize { link, max_iter, tol, quad_n, out, out_link } => {
            let link = link.resolve()?;
            let quad = QuadratureSpec::new(quad_n)?;
            let lk0 = linking_number(&link, &quad)?;
            if lk0.abs() != 1 {
                eprintln!("warning: |lk| = {} (the 2pi^2 floor needs |lk| = 1)", lk0.abs());
            }
            let result = optimize::minimize(&link, &MinimizeOpts { max_iter, tol, quad })?;
            if let Some(path) = out {
                let mut w = std::io::BufWriter::new(
                    std::fs::File::create(&path)
                        .map_err(|e| MobiusError::Config(format!("{}: {e}", path.display())))?,
                );
                let mut emit = || -> std::io::Result<()> {
                    writeln!(w, "iter,energy,alpha,step,gradnorm,lk")?;
                    for row in &result.trace {
                        writeln!(
                            w,
                            "{},{},{},{},{},{}",
                            row.iter,
                            sig12(row.energy),
                            sig12(row.alpha),
                            sig12(row.step),
                            sig12(row.gradnorm),
                            row.lk.map_or(String::new(), |l| l.to_string()),
                        )?;
                    }
                    Ok(())
                };
                emit().map_err(|e| MobiusError::Config(format!("{}: {e}", path.display())))?;
            }
            if let Some(path) = out_link {
                mobius::io::write_link(&path, &result.link)?;
            }
            println!("iterations = {}", result.trace.len());
            println!("final energy = {}", sig12(result.energy));
            println!("|E - 2pi^2| = {}", sig12((result.energy - 2.0 * PI * PI).abs()));
            println!("lk = {}", result.lk);
            println!("converged = {}", result.converged);
            if result.stalled {
                println!("stalled = true (no decrease at the minimum step)");
                return Ok(ExitCode::from(7));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { link, quad_n, tol_scale } => verify(link, quad_n, tol_scale),
    }
}

struct VerifyTable {
    rows: Vec<(String, f64, f64, bool)>,
}

impl VerifyTable {
    fn check(&mut self, key: &str, residual: f64, tol: f64) {
        self.rows.push((key.to_string(), residual, tol, residual <= tol));
    }

    fn print(&self) -> bool {
        let mut ok = true;
        println!("{:<34} {:>18} {:>12}  result", "check", "residual", "tolerance");
        for (key, residual, tol, pass) in &self.rows {
            println!(
                "{key:<34} {:>18} {:>12}  {}",
                sig12(*residual),
                format!("{tol:.0e}"),
                if *pass { "PASS" } else { "FAIL" }
            );
            ok &= pass;
        }
        ok
    }
}

/// The invariant suite: every numerically checkable lemma-level statement,
/// evaluated on the given link where it applies and on the model links where
/// the statement is link-specific.
fn verify(link: LinkArgs, quad_n: usize, tol_scale: f64) -> Result<ExitCode> {
    let link = link.resolve()?;
    let quad = QuadratureSpec::new(quad_n)?;
    let mut table = VerifyTable { rows: Vec::new() };
    let tol = |t: f64| t * tol_scale;

    // main theorem anchors
    let on_sphere = if link.dim() == 3 { link.to_sphere()? } else { link.clone() };
    let energy = mobius_energy(&on_sphere, &quad);
    let report = energy_lower_bound_report(&link, &quad)?;
    table.check("main: E >= 4pi|lk|", (-report.slack).max(0.0), tol(1e-6));
    let is_hopf = {
        let hopf = hopf_link();
        let probe: Vec<f64> = (0..32).map(|j| TAU * j as f64 / 32.0).collect();
        link.dim() == 4
            && probe.iter().all(|&s| {
                vec4::dist(&link.gamma1.eval(s), &hopf.gamma1.eval(s)) < 1e-12
                    && vec4::dist(&link.gamma2.eval(s), &hopf.gamma2.eval(s)) < 1e-12
            })
    };
    if is_hopf {
        table.check("main: E(hopf) = 2pi^2", (energy - 2.0 * PI * PI).abs(), tol(1e-8));
    }

    // lemma 2.1: jacobian bound at a surface grid of the link's own Gauss map
    let mut worst = f64::NEG_INFINITY;
    for j in 0..128 {
        for k in 0..128 {
            let g = mobius::energy::gauss_map(&on_sphere, TAU * j as f64 / 128.0, TAU * k as f64 / 128.0);
            worst = worst.max(g.jac - g.bound);
        }
    }
    table.check("lemma 2.1: jac <= bound", worst.max(0.0), tol(1e-10));

    // lemma 2.2: conformal derivative-bound ratio
    let ratio = mobius::conformal::derivative_bound_check(&on_sphere.gamma1, &[0.0; 4], 256)?;
    let (_, _, c1) = on_sphere.gamma1.speed_stats(1024);
    table.check("lemma 2.2: |dF[u]| ratio <= 3C", (ratio - 3.0 * c1).max(0.0), tol(1e-10));

    // lemma 2.4: sphere identities on random family samples
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst24 = 0.0f64;
    for _ in 0..2000 {
        let v = loop {
            let v: Vec4 = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            if vec4::norm(&v) < 0.95 {
                break v;
            }
        };
        let z = rng.gen_range(0.05..0.95);
        let s = rng.gen_range(0.0..TAU);
        let t = rng.gen_range(0.0..TAU);
        worst24 = worst24.max(family::sphere_identity_residual(&on_sphere, &v, z, s, t)?);
    }
    table.check("lemma 2.4: sphere identities", worst24, tol(1e-10));

    // lemma 2.5: chain at sampled (v, z)
    let mut chain = 0.0f64;
    for (v, z) in family::family_sample(64) {
        let fp = family::family_coeffs(&v, z)?;
        let grid = family::family_area(&on_sphere, &fp, &quad)?;
        chain = chain
            .max(grid.area_integral - grid.upper_integral)
            .max(grid.upper_integral - energy);
    }
    table.check("lemma 2.5: area <= upper <= E", chain.max(0.0), tol(1e-6));

    // lemma 2.6: uniform jacobian bound from the proof constant
    let scan = family::uniform_jacobian_bound(&on_sphere, 64, &QuadratureSpec::new(64)?)?;
    table.check(
        "lemma 2.6: jac <= 9 C1 C2 / a^2",
        (scan.max_jac - scan.proof_bound).max(0.0),
        tol(1e-10),
    );

    // prop 4.1: r(z) endpoints and support containment
    let alpha = on_sphere.alpha();
    let r_res = (family::support_radius(alpha, 0.0) - PI)
        .abs()
        .max((family::support_radius(alpha, 0.5) - PI / 2.0).abs())
        .max(family::support_radius(alpha, 1.0).abs());
    table.check("prop 4.1: r(z) endpoints", r_res, tol(0.0));
    let p = vec4::normalize(&[0.4, -0.3, 0.6, 0.2]);
    let mut containment = 0.0f64;
    for z in [0.2, 0.5, 0.8] {
        let rep = family::support_containment_check(&on_sphere, &p, z, &QuadratureSpec::new(64)?)?;
        containment = containment.max((-rep.min_margin).max(0.0)).max(rep.identity_residual);
    }
    table.check("prop 4.1: support containment", containment, tol(1e-10));

    // prop 4.2: retraction identity, landing, non-expansion
    let mut retraction = 0.0f64;
    let mut sv_max = 0.0f64;
    for i in 0..64 {
        let p = vec4::normalize(&std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        let lambda = rng.gen_range(0.1..PI / 2.0 - 0.05);
        let d = rng.gen_range(lambda + 0.01..PI / 2.0);
        let raw: Vec4 = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let dir = vec4::normalize(&vec4::axpy(-vec4::dot(&raw, &p), &p, &raw));
        let x = sweepout::sphere_exp(&p, &vec4::scale(&dir, d));
        let r0 = sweepout::Retraction::new(p, lambda, 0.0)?;
        retraction = retraction.max(vec4::dist(&r0.apply(&x)?, &x));
        let r1 = sweepout::Retraction::new(p, lambda, 1.0)?;
        retraction = retraction.max((vec4::sphere_dist(&p, &r1.apply(&x)?) - lambda).abs());
        if i < 32 {
            let rt = sweepout::Retraction::new(p, lambda, rng.gen_range(0.0..1.0))?;
            sv_max = sv_max.max(sweepout::retract_contraction_check(&rt, &[x], 1e-5)?);
        }
    }
    table.check("prop 4.2: identity + landing", retraction, tol(1e-10));
    table.check("prop 4.2: singular values <= 1", (sv_max - 1.0).max(0.0), tol(1e-5));

    // prop 4.3: retracted family areas
    let pr = vec4::normalize(&[0.5, -0.5, 0.5, 0.5]);
    let mut mono = 0.0f64;
    let mut landing = 0.0f64;
    for z in [0.3, 0.7] {
        let mut prev = f64::INFINITY;
        for k in 0..=4 {
            let ra = sweepout::retracted_family_area(&on_sphere, &pr, z, k as f64 / 4.0, &QuadratureSpec::new(64)?)?;
            mono = mono.max(ra.area - prev);
            prev = ra.area;
            if k == 4 {
                landing = landing.max(ra.sphere_residual).max(
                    (ra.area - sweepout::geodesic_sphere_area(family::support_radius(alpha, z))).abs(),
                );
            }
        }
    }
    table.check("prop 4.3: area nonincreasing", mono.max(0.0), tol(1e-6));
    if report.lk.abs() == 1 {
        table.check("prop 4.3: s=1 sphere areas", landing, tol(1e-3));
    }

    // thm 5.2: min-max family endpoints and sup bound
    let mut sup = 0.0f64;
    let mut boundary_res = 0.0f64;
    for i in 0..24 {
        let x: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        let t = rng.gen_range(0.02..0.98);
        let surface = if i % 3 == 0 {
            let mut xb = x;
            xb[0] = 1.0;
            sweepout::minmax_surface(&on_sphere, &xb, t, &QuadratureSpec::new(64)?)?
        } else {
            sweepout::minmax_surface(&on_sphere, &x, t, &QuadratureSpec::new(64)?)?
        };
        sup = sup.max(surface.area());
        if let MinMaxSurface::RoundSphere { radius, area, .. } = surface {
            boundary_res = boundary_res
                .max((radius - family::support_radius(alpha, t)).abs())
                .max((area - sweepout::geodesic_sphere_area(radius)).abs());
        }
    }
    let zero = sweepout::minmax_surface(&on_sphere, &[0.3; 4], 0.0, &quad)?.area();
    table.check("thm 5.2: boundary spheres", boundary_res, tol(1e-10));
    table.check("thm 5.2: zero slices", zero, tol(0.0));
    table.check("thm 5.2: sup <= E", (sup - energy).max(0.0), tol(1e-6));

    let ok = table.print();
    println!("energy = {}", sig12(energy));
    println!("lk = {}", report.lk);
    if ok {
        println!("verify: all checks PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verify: FAIL");
        Ok(ExitCode::FAILURE)
    }
}
