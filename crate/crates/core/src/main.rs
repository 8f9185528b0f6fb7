use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use randabc::bench::{emit_outputs, fit_rates, run_convergence, PARTIAL_FILE};
use randabc::config::ExperimentConfig;
use randabc::correctors::{compute_correctors, corrector_residuals, CorrectorOptions};
use randabc::field::{build_spectrum, coefficient_field, sample_field, torus_extents};
use randabc::io::{write_edge_field, write_node_field};
use randabc::lattice::LatticeBox;
use randabc::multipole::{run_algorithm, BoundaryRecipe, Order, Variant};
use randabc::optimality::{
    conditional_variance, lattice_green, optimality_charge, scaling_fit, CorrelationModel,
};
use randabc::{Error, Result};

#[derive(Parser)]
#[command(name = "randabc", version, about = "Artificial boundary conditions for random elliptic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (key = value); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single seed overriding the configured seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Box half-width(s), comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    half_widths: Vec<i64>,
    /// Recipe(s): zero, nopole, dipole, full.
    #[arg(long, value_delimiter = ',')]
    recipe: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample g and the coefficient field on Q_L.
    Sample(Common),
    /// Correctors and the homogenized coefficient for Q_L.
    Correctors(Common),
    /// Run the algorithm on Q_L for one recipe.
    Solve(Common),
    /// Convergence benchmark over the L grid, recipes and seeds.
    Bench(Common),
    /// Conditional-variance scaling.
    Optimality(Common),
}

struct Run {
    cfg: ExperimentConfig,
    half_width: i64,
}

fn load(common: &Common) -> Result<Run> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    if !common.recipe.is_empty() {
        cfg.recipes = common
            .recipe
            .iter()
            .map(|r| Variant::parse(r))
            .collect::<Result<_>>()?;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    let half_width = common.half_widths.first().copied().unwrap_or(cfg.l_grid[0]);
    if !common.half_widths.is_empty() {
        cfg.l_grid = common.half_widths.clone();
    }
    cfg.validate()?;
    if cfg.threads > 0 {
        // a second initialization only happens in tests; ignore it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    Ok(Run { cfg, half_width })
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(dir)
}

fn sampled_coefficients(cfg: &ExperimentConfig, bx: &LatticeBox) -> Result<randabc::lattice::EdgeField> {
    let spectrum = build_spectrum(&cfg.covariance, &torus_extents(&cfg.covariance, bx), Some(cfg.max_clipped))?;
    let g = sample_field(&spectrum, bx, cfg.seeds[0])?.g;
    Ok(coefficient_field(&g, &cfg.coefficient))
}

fn corrector_options(cfg: &ExperimentConfig) -> CorrectorOptions {
    CorrectorOptions {
        epsilon: cfg.epsilon,
        weight: cfg.weight,
        second_order: Order::for_model(cfg.dim, cfg.covariance.decay_exponent()) == Order::Second,
        solver: cfg.solver,
    }
}

fn cmd_sample(run: Run) -> Result<()> {
    let cfg = &run.cfg;
    let bx = LatticeBox::cube(cfg.dim, run.half_width)?;
    let spectrum = build_spectrum(&cfg.covariance, &torus_extents(&cfg.covariance, &bx), Some(cfg.max_clipped))?;
    let sample = sample_field(&spectrum, &bx, cfg.seeds[0])?;
    let a = coefficient_field(&sample.g, &cfg.coefficient);
    let dir = out_dir(cfg)?;
    write_node_field(dir.join("g.crhf"), &sample.g)?;
    write_edge_field(dir.join("a.crhf"), &a)?;
    let (lo, hi) = a.min_max();
    println!(
        "seed {} on Q_{} (torus {:?}): clipped fraction {:e}, a in [{lo:.4}, {hi:.4}]",
        cfg.seeds[0],
        run.half_width,
        sample.torus,
        spectrum.clipped_fraction()
    );
    Ok(())
}

fn cmd_correctors(run: Run) -> Result<()> {
    let cfg = &run.cfg;
    let bx = LatticeBox::cube(cfg.dim, 2 * run.half_width)?;
    let a = sampled_coefficients(cfg, &bx)?;
    let set = compute_correctors(&a, run.half_width, &corrector_options(cfg))?;
    let dir = out_dir(cfg)?;
    for (i, phi) in set.phi1.iter().enumerate() {
        write_node_field(dir.join(format!("phi1_{i}.crhf")), phi)?;
    }
    let model = &set.homogenized;
    println!("a_hom (L = {}, M = {:.3}):", run.half_width, set.mass);
    for r in 0..cfg.dim {
        let row: Vec<String> = (0..cfg.dim).map(|c| format!("{:.6}", model.raw()[(r, c)])).collect();
        println!("  {}", row.join("  "));
    }
    println!("eigenvalues {:?}", model.eigenvalues());
    println!(
        "solves {}, iterations {}, max residual {:e}",
        set.diagnostics.len(),
        set.total_iterations(),
        corrector_residuals(&a, &set)?
    );
    Ok(())
}

fn cmd_solve(run: Run) -> Result<()> {
    let cfg = &run.cfg;
    let variant = *cfg.recipes.last().expect("validated recipes");
    let bx = LatticeBox::cube(cfg.dim, 2 * run.half_width)?;
    let a = sampled_coefficients(cfg, &bx)?;
    let charge = cfg.charge.edge_charge(cfg.dim)?;
    let recipe = BoundaryRecipe {
        variant,
        order: Order::for_model(cfg.dim, cfg.covariance.decay_exponent()),
    };
    let sol = run_algorithm(&a, &charge, run.half_width, recipe, &corrector_options(cfg), cfg.dipole_sign)?;
    let dir = out_dir(cfg)?;
    write_node_field(dir.join("u.crhf"), &sol.u)?;
    let n = cfg.eval_point.at(cfg.dim, run.half_width);
    let grad: Vec<f64> = (0..cfg.dim)
        .map(|k| {
            let mut m = n;
            m[k] += 1;
            sol.u.at(&m) - sol.u.at(&n)
        })
        .collect();
    println!(
        "{} on Q_{}: grad u({:?}) = {:?}; {} iterations, residual {:e}",
        variant.name(),
        run.half_width,
        &n[..cfg.dim],
        grad,
        sol.diagnostics.iterations,
        sol.diagnostics.final_residual
    );
    Ok(())
}

fn cmd_bench(run: Run) -> Result<()> {
    let cfg = &run.cfg;
    let dir = out_dir(cfg)?;
    let records = run_convergence(cfg, Some(&dir.join(PARTIAL_FILE)))?;
    let (fits, notices) = fit_rates(&records);
    for n in &notices {
        eprintln!("notice: {n}");
    }
    emit_outputs(&records, &fits, cfg, dir)?;
    let _ = fs::remove_file(dir.join(PARTIAL_FILE));
    let failed = records.iter().filter(|r| r.failed()).count();
    println!("{} records ({failed} failed) in {}", records.len(), dir.display());
    for f in &fits {
        println!("{:>7}: slope {:.3} ± {:.3}", f.variant.name(), f.fit.slope, f.fit.stderr);
    }
    Ok(())
}

fn cmd_optimality(run: Run) -> Result<()> {
    let cfg = &run.cfg;
    let o = &cfg.optimality;
    let grid = if cfg.l_grid == ExperimentConfig::default().l_grid {
        o.l_grid.clone()
    } else {
        cfg.l_grid.clone()
    };
    let lmax = *grid.last().expect("nonempty grid");
    let truncation = o.truncation.unwrap_or(4 * lmax);
    let model = CorrelationModel::new(cfg.dim, o.beta)?;
    let charge = optimality_charge(cfg.dim, o.ell)?;
    let green = lattice_green(cfg.dim, truncation + o.ell + 2)?;
    let mut rows = Vec::new();
    for &l in &grid {
        let v = conditional_variance(model, &charge, l, truncation, &green)?;
        if !v.converged {
            eprintln!("notice: L = {l}: tail bound {:e} exceeds 10% of the estimate", v.tail_bound);
        }
        rows.push((l, v));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|(l, v)| (*l as f64, v.estimate.max(0.0).sqrt())).collect();
    let slope = scaling_fit(&pts).map(|f| f.slope).ok();
    let mut csv = String::from("beta,L,ell,estimate,tail_bound,slope\n");
    for (i, (l, v)) in rows.iter().enumerate() {
        let s = match (i + 1 == rows.len(), slope) {
            (true, Some(s)) => s.to_string(),
            _ => String::new(),
        };
        csv.push_str(&format!("{},{l},{},{:e},{:e},{s}\n", o.beta, o.ell, v.estimate, v.tail_bound));
    }
    let dir = out_dir(cfg)?;
    let path = dir.join("optimality.csv");
    fs::write(&path, &csv).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    print!("{csv}");
    if rows.windows(2).any(|w| w[1].1.estimate > w[0].1.estimate) {
        eprintln!("notice: estimate increased with L");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, solver_exit) = match &cli.command {
        Command::Bench(c) | Command::Optimality(c) => (c, false),
        Command::Sample(c) | Command::Correctors(c) | Command::Solve(c) => (c, true),
    };
    let result = load(common).and_then(|run| match cli.command {
        Command::Sample(_) => cmd_sample(run),
        Command::Correctors(_) => cmd_correctors(run),
        Command::Solve(_) => cmd_solve(run),
        Command::Bench(_) => cmd_bench(run),
        Command::Optimality(_) => cmd_optimality(run),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                e if solver_exit && e.is_solver_failure() => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
