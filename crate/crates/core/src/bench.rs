//! Convergence benchmark: `|∇(u^{(2L)} - u^{(L)})(n*)|` across recipes, `L` and seeds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::correctors::CorrectorOptions;
use crate::error::{Error, Result};
use crate::field::{build_spectrum, CoefficientMap, coefficient_field, sample_field, torus_extents};
use crate::lattice::{EdgeField, LatticeBox, NodeField, Point};
use crate::multipole::{solve_variant, BoundaryRecipe, MultipoleContext, Order, Variant};
use crate::optimality::{scaling_fit, ScalingFit};

pub const RECORDS_HEADER: &str = "L,variant,seed,err,iters,residual,wall_ms";
pub const RATES_HEADER: &str = "variant,slope,stderr";
pub const PARTIAL_FILE: &str = "records.partial.csv";

/// Live `f64` arrays of size `(8 L_max + 1)^d` budgeted per realization.
const ARRAYS_PER_NODE: u64 = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub half_width: i64,
    pub variant: Variant,
    pub seed: u64,
    /// `NaN` when either solve failed.
    pub err: f64,
    pub iterations: usize,
    pub residual: f64,
    pub wall_ms: u64,
}

impl ConvergenceRecord {
    pub fn failed(&self) -> bool {
        !self.err.is_finite()
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:e},{},{:e},{}",
            self.half_width,
            self.variant.name(),
            self.seed,
            self.err,
            self.iterations,
            self.residual,
            self.wall_ms
        )
    }

    fn sort_key(&self) -> (Variant, i64, u64) {
        (self.variant, self.half_width, self.seed)
    }
}

/// `MemAvailable` from `/proc/meminfo`, else 4 GiB.
pub fn available_memory() -> u64 {
    fs::read_to_string("/proc/meminfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("MemAvailable:"))
                .and_then(|l| l.split_whitespace().nth(1))
                .and_then(|kb| kb.parse::<u64>().ok())
        })
        .map(|kb| kb * 1024)
        .unwrap_or(4 << 30)
}

/// Rough peak memory of one realization: the field box `Q_{4 L_max}`, the
/// corrector stage on it and the sampling torus.
pub fn estimated_memory(cfg: &ExperimentConfig) -> u64 {
    let lmax = *cfg.l_grid.last().unwrap_or(&1);
    let nodes = ((8 * lmax + 1) as u64).pow(cfg.dim as u32);
    let field_box = LatticeBox::cube(cfg.dim, 4 * lmax).expect("valid box");
    let torus: u64 = torus_extents(&cfg.covariance, &field_box)
        .iter()
        .map(|&t| t as u64)
        .product();
    8 * ARRAYS_PER_NODE * nodes + 2 * 16 * torus
}

pub fn check_memory(cfg: &ExperimentConfig) -> Result<()> {
    let need = estimated_memory(cfg);
    let limit = cfg.memory_limit.unwrap_or_else(available_memory);
    if need > limit {
        return Err(Error::SizeGuard(format!(
            "L_max = {} in dimension {} needs about {} MiB, limit {} MiB",
            cfg.l_grid.last().unwrap_or(&0),
            cfg.dim,
            need >> 20,
            limit >> 20
        )));
    }
    Ok(())
}

fn gradient_at(u: &NodeField, n: &Point) -> Vec<f64> {
    (0..u.lattice_box().dim())
        .map(|k| u.at(&crate::lattice::add(n, &crate::lattice::unit(k))) - u.at(n))
        .collect()
}

/// Gradients of one final solve at the evaluation points of `L = w` and `L = w/2`.
#[derive(Clone, Debug)]
struct CellOutcome {
    grad_own: Vec<f64>,
    grad_half: Option<Vec<f64>>,
    iterations: usize,
    residual: f64,
    wall_ms: u64,
}

/// Runs every seed of the benchmark. Rows are appended to `partial` as each
/// seed finishes; the returned list is sorted by variant, `L`, seed.
pub fn run_convergence(cfg: &ExperimentConfig, partial: Option<&Path>) -> Result<Vec<ConvergenceRecord>> {
    cfg.validate()?;
    check_memory(cfg)?;
    let d = cfg.dim;
    let charge = cfg.charge.edge_charge(d)?;
    let lmax = *cfg.l_grid.last().expect("validated grid");
    let field_box = LatticeBox::cube(d, 4 * lmax)?;
    let torus = torus_extents(&cfg.covariance, &field_box);
    // a constant map ignores the field, so no sampling is needed
    let spectrum = match cfg.coefficient {
        CoefficientMap::Constant(_) => None,
        _ => Some(build_spectrum(&cfg.covariance, &torus, Some(cfg.max_clipped))?),
    };
    let widths: BTreeSet<i64> = cfg.l_grid.iter().flat_map(|&l| [l, 2 * l]).collect();
    let grid: BTreeSet<i64> = cfg.l_grid.iter().copied().collect();
    let order = Order::for_model(d, cfg.covariance.decay_exponent());
    let opts = CorrectorOptions {
        epsilon: cfg.epsilon,
        weight: cfg.weight,
        second_order: false,
        solver: cfg.solver,
    };
    let needs_context = cfg.recipes.iter().any(|&v| v != Variant::Zero);

    let mut sink = match partial {
        Some(path) => {
            let mut f = OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            writeln!(f, "{RECORDS_HEADER}").map_err(|e| Error::io(path, e))?;
            Some((path.to_path_buf(), f))
        }
        None => None,
    };

    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        let a = match (&spectrum, cfg.coefficient) {
            (Some(sp), map) => coefficient_field(&sample_field(sp, &field_box, seed)?.g, &map),
            (None, map) => EdgeField::constant(field_box, map.apply(0.0)),
        };
        let mut cells: BTreeMap<(i64, Variant), Option<CellOutcome>> = BTreeMap::new();
        for &w in &widths {
            let target = LatticeBox::cube(d, w)?;
            let ctx = if needs_context {
                Some(MultipoleContext::build(&a, &charge, w, order, &opts, cfg.dipole_sign))
            } else {
                None
            };
            for &variant in &cfg.recipes {
                let start = Instant::now();
                let boundary = match (variant, &ctx) {
                    (Variant::Zero, _) => Ok(NodeField::zeros(target)),
                    (_, Some(Ok(ctx))) => ctx.boundary(BoundaryRecipe { variant, order }, &target),
                    (_, Some(Err(e))) => Err(Error::InvalidArgument(e.to_string())),
                    (_, None) => unreachable!("context built whenever a non-zero recipe is requested"),
                };
                let outcome = boundary
                    .and_then(|b| solve_variant(&a, &charge, b, &cfg.solver))
                    .ok()
                    .map(|sol| CellOutcome {
                        grad_own: gradient_at(&sol.u, &cfg.eval_point.at(d, w)),
                        grad_half: (w % 2 == 0 && grid.contains(&(w / 2)))
                            .then(|| gradient_at(&sol.u, &cfg.eval_point.at(d, w / 2))),
                        iterations: sol.diagnostics.iterations,
                        residual: sol.diagnostics.final_residual,
                        wall_ms: start.elapsed().as_millis() as u64,
                    });
                cells.insert((w, variant), outcome);
            }
        }
        let mut rows = Vec::new();
        for &l in &cfg.l_grid {
            for &variant in &cfg.recipes {
                let small = cells[&(l, variant)].as_ref();
                let large = cells[&(2 * l, variant)].as_ref();
                let row = match (small, large) {
                    (Some(s), Some(b)) => {
                        let half = b.grad_half.as_ref().expect("evaluation point recorded");
                        let err = s
                            .grad_own
                            .iter()
                            .zip(half)
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum::<f64>()
                            .sqrt();
                        ConvergenceRecord {
                            half_width: l,
                            variant,
                            seed,
                            err,
                            iterations: s.iterations + b.iterations,
                            residual: s.residual.max(b.residual),
                            wall_ms: if cfg.record_timing { s.wall_ms + b.wall_ms } else { 0 },
                        }
                    }
                    _ => ConvergenceRecord {
                        half_width: l,
                        variant,
                        seed,
                        err: f64::NAN,
                        iterations: small.map_or(0, |s| s.iterations) + large.map_or(0, |b| b.iterations),
                        residual: f64::NAN,
                        wall_ms: 0,
                    },
                };
                rows.push(row);
            }
        }
        if let Some((path, f)) = sink.as_mut() {
            for r in &rows {
                writeln!(f, "{}", r.csv_row()).map_err(|e| Error::io(&*path, e))?;
            }
            f.flush().map_err(|e| Error::io(&*path, e))?;
        }
        records.extend(rows);
    }
    records.sort_by_key(|r| r.sort_key());
    Ok(records)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub variant: Variant,
    pub fit: ScalingFit,
    /// `(L, geometric mean over seeds)`
    pub points: Vec<(f64, f64)>,
}

/// Per-variant log-log slopes of the seed-averaged (geometric mean) error.
/// Failed rows are skipped; variants that cannot be fitted are reported in
/// the notices.
pub fn fit_rates(records: &[ConvergenceRecord]) -> (Vec<RateFit>, Vec<String>) {
    let mut by_variant: BTreeMap<Variant, BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.failed()) {
        by_variant
            .entry(r.variant)
            .or_default()
            .entry(r.half_width)
            .or_default()
            .push(r.err);
    }
    let mut fits = Vec::new();
    let mut notices = Vec::new();
    for (variant, cells) in by_variant {
        if let Some((l, _)) = cells.iter().find(|(_, errs)| errs.iter().any(|&e| e <= 0.0)) {
            notices.push(format!(
                "{}: nonpositive error at L = {l}; excluded from fitting",
                variant.name()
            ));
            continue;
        }
        let points: Vec<(f64, f64)> = cells
            .iter()
            .map(|(&l, errs)| {
                let mean_log = errs.iter().map(|e| e.ln()).sum::<f64>() / errs.len() as f64;
                (l as f64, mean_log.exp())
            })
            .collect();
        match scaling_fit(&points) {
            Ok(fit) => fits.push(RateFit { variant, fit, points }),
            Err(e) => notices.push(format!("{}: {e}", variant.name())),
        }
    }
    (fits, notices)
}

pub fn records_csv(records: &[ConvergenceRecord]) -> String {
    let mut sorted: Vec<&ConvergenceRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    let mut s = format!("{RECORDS_HEADER}\n");
    for r in sorted {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn rates_csv(fits: &[RateFit]) -> String {
    let mut s = format!("{RATES_HEADER}\n");
    for f in fits {
        let _ = writeln!(s, "{},{},{}", f.variant.name(), f.fit.slope, f.fit.stderr);
    }
    s
}

/// Gnuplot script drawing the seed-averaged errors and fitted power laws on
/// log-log axes.
pub fn plot_script(fits: &[RateFit], seeds: usize) -> String {
    let mut s = String::new();
    s.push_str("set terminal pngcairo size 900,650\nset output 'convergence.png'\n");
    s.push_str("set logscale xy\nset xlabel 'L'\nset ylabel '|grad(u(2L) - u(L))(n*)|'\nset key bottom left\n");
    let _ = writeln!(s, "set title 'geometric mean over {seeds} seed(s)'");
    for f in fits {
        let _ = writeln!(s, "${} << EOD", f.variant.name());
        for (l, e) in &f.points {
            let _ = writeln!(s, "{l} {e}");
        }
        s.push_str("EOD\n");
    }
    let parts: Vec<String> = fits
        .iter()
        .enumerate()
        .flat_map(|(i, f)| {
            let name = f.variant.name();
            [
                format!(
                    "${name} using 1:2 with linespoints lc {} pt 7 title '{name} (slope {:.2})'",
                    i + 1,
                    f.fit.slope
                ),
                format!(
                    "exp({}) * x**({}) with lines lc {} dt 2 notitle",
                    f.fit.intercept,
                    f.fit.slope,
                    i + 1
                ),
            ]
        })
        .collect();
    if !parts.is_empty() {
        let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    }
    s
}

/// Writes `records.csv`, `rates.csv`, `config.txt` and, when there are
/// records, `plot.gp` into `dir`. Returns the written paths.
pub fn emit_outputs(
    records: &[ConvergenceRecord],
    fits: &[RateFit],
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("records.csv", records_csv(records)),
        ("rates.csv", rates_csv(fits)),
        (
            "config.txt",
            format!(
                "# snapshot; errors are geometric means over seeds before fitting\n{}",
                cfg.to_text()
            ),
        ),
    ];
    if !records.is_empty() {
        files.push(("plot.gp", plot_script(fits, cfg.seeds.len())));
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
