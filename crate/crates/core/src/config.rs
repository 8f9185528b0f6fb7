//! Flat `key = value` experiment configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::correctors::{WeightKind, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::field::{CoefficientMap, CovarianceSpec, DEFAULT_MAX_CLIPPED};
use crate::lattice::{ChargeSpec, Point};
use crate::multipole::Variant;
use crate::solver::{Preconditioner, SolverConfig};

/// Where the benchmark error is read off.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalPoint {
    /// `(⌊L/2⌋, …)`
    Half,
    Origin,
}

impl EvalPoint {
    pub fn at(&self, dim: usize, half_width: i64) -> Point {
        let mut p = [0i64; 3];
        if *self == EvalPoint::Half {
            for c in p.iter_mut().take(dim) {
                *c = half_width / 2;
            }
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityConfig {
    pub beta: f64,
    pub ell: i64,
    pub l_grid: Vec<i64>,
    /// `None` means `4 max(L)`.
    pub truncation: Option<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub l_grid: Vec<i64>,
    pub epsilon: f64,
    pub covariance: CovarianceSpec,
    pub coefficient: CoefficientMap,
    pub charge: ChargeSpec,
    pub recipes: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub solver: SolverConfig,
    pub weight: WeightKind,
    pub output_dir: PathBuf,
    pub eval_point: EvalPoint,
    pub dipole_sign: f64,
    pub max_clipped: f64,
    pub record_timing: bool,
    /// Bytes; `None` reads the available memory of the host.
    pub memory_limit: Option<u64>,
    pub threads: usize,
    pub optimality: OptimalityConfig,
}

/// Neutral five-point node charge used when the config names none.
pub fn default_charge(dim: usize) -> ChargeSpec {
    let charges = if dim == 3 {
        vec![
            ([1, 0, 0], 1.0),
            ([0, 1, 0], 2.0),
            ([-1, -1, 0], -1.0),
            ([0, 0, 1], -1.0),
            ([0, 0, 0], -1.0),
        ]
    } else {
        vec![([1, 0, 0], 1.0), ([0, 1, 0], 2.0), ([-1, -1, 0], -1.0), ([0, 0, 0], -2.0)]
    };
    ChargeSpec::NodeCharge { charges }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 3,
            l_grid: vec![8, 16, 32, 64],
            epsilon: DEFAULT_EPSILON,
            covariance: CovarianceSpec::Gaussian { theta: 8.0 },
            coefficient: CoefficientMap::Logistic,
            charge: default_charge(3),
            recipes: Variant::ALL.to_vec(),
            seeds: (0..8).collect(),
            solver: SolverConfig::default(),
            weight: WeightKind::Bump,
            output_dir: PathBuf::from("out"),
            eval_point: EvalPoint::Half,
            dipole_sign: 1.0,
            max_clipped: DEFAULT_MAX_CLIPPED,
            record_timing: false,
            memory_limit: None,
            threads: 0,
            optimality: OptimalityConfig {
                beta: 20.0,
                ell: 1,
                l_grid: vec![4, 6, 8, 12],
                truncation: None,
            },
        }
    }
}

const KEYS: &[&str] = &[
    "dim",
    "L",
    "epsilon",
    "covariance",
    "theta",
    "beta",
    "coefficient",
    "eta",
    "lambda_min",
    "lambda_max",
    "value",
    "charge",
    "charge_nodes",
    "dipole_base",
    "dipole_direction",
    "recipes",
    "seeds",
    "seed_base",
    "seed_list",
    "tolerance",
    "max_iterations",
    "preconditioner",
    "weight",
    "output",
    "eval_point",
    "dipole_sign",
    "max_clipped",
    "record_timing",
    "memory_limit_mb",
    "threads",
    "opt_beta",
    "opt_ell",
    "opt_L",
    "opt_truncation",
];

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| cfg_err(format!("{key}: cannot parse '{v}'")))
            })
            .transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|_| cfg_err(format!("{key}: cannot parse '{s}'"))))
                    .collect()
            })
            .transpose()
    }
}

fn parse_entries(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(format!("line {}: expected key = value", lineno + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(cfg_err(format!("line {}: unknown key '{k}'", lineno + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(cfg_err(format!("line {}: duplicate key '{k}'", lineno + 1)));
        }
    }
    Ok(Entries(map))
}

fn parse_point(s: &str) -> Result<Point> {
    let coords: Vec<i64> = s
        .split_whitespace()
        .map(|c| c.parse().map_err(|_| cfg_err(format!("bad coordinate '{c}'"))))
        .collect::<Result<_>>()?;
    if coords.is_empty() || coords.len() > 3 {
        return Err(cfg_err(format!("point '{s}' needs 1 to 3 coordinates")));
    }
    let mut p = [0; 3];
    p[..coords.len()].copy_from_slice(&coords);
    Ok(p)
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let e = parse_entries(text)?;
        let mut c = ExperimentConfig::default();
        if let Some(d) = e.parse::<usize>("dim")? {
            c.dim = d;
            c.charge = default_charge(d);
        }
        if let Some(l) = e.list("L")? {
            c.l_grid = l;
        }
        if let Some(v) = e.parse("epsilon")? {
            c.epsilon = v;
        }
        let theta = e.parse::<f64>("theta")?;
        let beta = e.parse::<f64>("beta")?;
        c.covariance = match e.raw("covariance").unwrap_or("gaussian") {
            "gaussian" => CovarianceSpec::Gaussian {
                theta: theta.unwrap_or(8.0),
            },
            "algebraic" => CovarianceSpec::Algebraic {
                theta: theta.unwrap_or(1.0),
                beta: beta.ok_or_else(|| cfg_err("algebraic covariance needs beta"))?,
            },
            "delta" => CovarianceSpec::Delta,
            other => return Err(cfg_err(format!("unknown covariance '{other}'"))),
        };
        c.coefficient = match e.raw("coefficient").unwrap_or("logistic") {
            "logistic" => CoefficientMap::Logistic,
            "affine" => CoefficientMap::Affine {
                eta: e.parse("eta")?.ok_or_else(|| cfg_err("affine map needs eta"))?,
                lambda_min: e.parse("lambda_min")?.unwrap_or(1.0),
                lambda_max: e.parse("lambda_max")?.unwrap_or(4.0),
            },
            "constant" => CoefficientMap::Constant(e.parse("value")?.ok_or_else(|| cfg_err("constant map needs value"))?),
            other => return Err(cfg_err(format!("unknown coefficient map '{other}'"))),
        };
        match e.raw("charge") {
            None | Some("default") => {}
            Some("dipole") => {
                c.charge = ChargeSpec::EdgeDipole {
                    base: e.raw("dipole_base").map(parse_point).transpose()?.unwrap_or([0; 3]),
                    direction: e.parse("dipole_direction")?.unwrap_or(0),
                    weight: 1.0,
                }
            }
            Some("nodes") => {
                let spec = e.raw("charge_nodes").ok_or_else(|| cfg_err("charge = nodes needs charge_nodes"))?;
                let charges = spec
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|item| {
                        let (p, q) = item
                            .split_once(':')
                            .ok_or_else(|| cfg_err(format!("charge entry '{item}' needs point:value")))?;
                        let q: f64 = q.trim().parse().map_err(|_| cfg_err(format!("bad charge '{q}'")))?;
                        Ok((parse_point(p)?, q))
                    })
                    .collect::<Result<Vec<_>>>()?;
                c.charge = ChargeSpec::NodeCharge { charges };
            }
            Some(other) => return Err(cfg_err(format!("unknown charge '{other}'"))),
        }
        if let Some(r) = e.raw("recipes") {
            c.recipes = r
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Variant::parse(s).map_err(|err| cfg_err(err.to_string())))
                .collect::<Result<_>>()?;
        }
        if let Some(list) = e.list::<u64>("seed_list")? {
            if e.raw("seeds").is_some() || e.raw("seed_base").is_some() {
                return Err(cfg_err("seed_list excludes seeds/seed_base"));
            }
            c.seeds = list;
        } else {
            let n = e.parse::<u64>("seeds")?.unwrap_or(8);
            let base = e.parse::<u64>("seed_base")?.unwrap_or(0);
            c.seeds = (base..base + n).collect();
        }
        if let Some(t) = e.parse("tolerance")? {
            c.solver.rel_tolerance = t;
        }
        if let Some(m) = e.parse("max_iterations")? {
            c.solver.max_iterations = Some(m);
        }
        c.solver.preconditioner = match e.raw("preconditioner").unwrap_or("jacobi") {
            "jacobi" => Preconditioner::Jacobi,
            "none" => Preconditioner::None,
            other => return Err(cfg_err(format!("unknown preconditioner '{other}'"))),
        };
        c.weight = match e.raw("weight").unwrap_or("bump") {
            "bump" => WeightKind::Bump,
            "triangular" => WeightKind::Triangular,
            other => return Err(cfg_err(format!("unknown weight '{other}'"))),
        };
        if let Some(o) = e.raw("output") {
            c.output_dir = PathBuf::from(o);
        }
        c.eval_point = match e.raw("eval_point").unwrap_or("half") {
            "half" => EvalPoint::Half,
            "origin" => EvalPoint::Origin,
            other => return Err(cfg_err(format!("unknown eval_point '{other}'"))),
        };
        if let Some(s) = e.parse("dipole_sign")? {
            c.dipole_sign = s;
        }
        if let Some(m) = e.parse("max_clipped")? {
            c.max_clipped = m;
        }
        if let Some(b) = e.parse("record_timing")? {
            c.record_timing = b;
        }
        if let Some(mb) = e.parse::<u64>("memory_limit_mb")? {
            c.memory_limit = Some(mb << 20);
        }
        if let Some(t) = e.parse("threads")? {
            c.threads = t;
        }
        if let Some(b) = e.parse("opt_beta")? {
            c.optimality.beta = b;
        }
        if let Some(l) = e.parse("opt_ell")? {
            c.optimality.ell = l;
        }
        if let Some(g) = e.list("opt_L")? {
            c.optimality.l_grid = g;
        }
        if let Some(t) = e.parse("opt_truncation")? {
            c.optimality.truncation = Some(t);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(cfg_err(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if self.l_grid.is_empty() {
            return Err(cfg_err("empty L grid"));
        }
        if self.l_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err("L grid must be strictly increasing"));
        }
        let support = self.charge.support_radius().max(1);
        if let Some(l) = self.l_grid.iter().find(|&&l| l < 2 * support) {
            return Err(cfg_err(format!("L = {l} is below twice the charge support {support}")));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(cfg_err(format!("epsilon must lie in (0,1), got {}", self.epsilon)));
        }
        if self.dim == 2 {
            let bad = match &self.charge {
                ChargeSpec::EdgeDipole { base, direction, .. } => base[2] != 0 || *direction > 1,
                ChargeSpec::NodeCharge { charges } => charges.iter().any(|(p, _)| p[2] != 0),
            };
            if bad {
                return Err(cfg_err("charge uses a third coordinate in dimension 2"));
            }
        }
        self.charge
            .edge_charge(self.dim)
            .map_err(|e| cfg_err(e.to_string()))?;
        self.covariance.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.coefficient.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.solver.validate().map_err(|e| cfg_err(e.to_string()))?;
        if self.recipes.is_empty() {
            return Err(cfg_err("no recipes requested"));
        }
        if self.seeds.is_empty() {
            return Err(cfg_err("no seeds"));
        }
        if !(self.dipole_sign == 1.0 || self.dipole_sign == -1.0) {
            return Err(cfg_err("dipole_sign must be 1 or -1"));
        }
        if !(self.max_clipped >= 0.0) {
            return Err(cfg_err("max_clipped must be nonnegative"));
        }
        let o = &self.optimality;
        if !(o.beta > 0.0) || o.ell < 1 {
            return Err(cfg_err("opt_beta must be positive and opt_ell at least 1"));
        }
        if o.l_grid.windows(2).any(|w| w[0] >= w[1]) || o.l_grid.first().map_or(false, |&l| l <= o.ell) {
            return Err(cfg_err("opt_L must be strictly increasing and exceed opt_ell"));
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "L = {}", join(&self.l_grid));
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        match self.covariance {
            CovarianceSpec::Gaussian { theta } => {
                let _ = writeln!(s, "covariance = gaussian\ntheta = {theta}");
            }
            CovarianceSpec::Algebraic { theta, beta } => {
                let _ = writeln!(s, "covariance = algebraic\ntheta = {theta}\nbeta = {beta}");
            }
            CovarianceSpec::Delta => {
                let _ = writeln!(s, "covariance = delta");
            }
        }
        match self.coefficient {
            CoefficientMap::Logistic => {
                let _ = writeln!(s, "coefficient = logistic");
            }
            CoefficientMap::Affine {
                eta,
                lambda_min,
                lambda_max,
            } => {
                let _ = writeln!(
                    s,
                    "coefficient = affine\neta = {eta}\nlambda_min = {lambda_min}\nlambda_max = {lambda_max}"
                );
            }
            CoefficientMap::Constant(v) => {
                let _ = writeln!(s, "coefficient = constant\nvalue = {v}");
            }
        }
        let point = |p: &Point| {
            p[..self.dim]
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        match &self.charge {
            ChargeSpec::EdgeDipole { base, direction, .. } => {
                let _ = writeln!(
                    s,
                    "charge = dipole\ndipole_base = {}\ndipole_direction = {direction}",
                    point(base)
                );
            }
            ChargeSpec::NodeCharge { charges } => {
                let items: Vec<String> = charges.iter().map(|(p, q)| format!("{}:{q}", point(p))).collect();
                let _ = writeln!(s, "charge = nodes\ncharge_nodes = {}", items.join("; "));
            }
        }
        let recipes: Vec<&str> = self.recipes.iter().map(|v| v.name()).collect();
        let _ = writeln!(s, "recipes = {}", recipes.join(", "));
        let seeds: Vec<String> = self.seeds.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "seed_list = {}", seeds.join(", "));
        let _ = writeln!(s, "tolerance = {}", self.solver.rel_tolerance);
        if let Some(m) = self.solver.max_iterations {
            let _ = writeln!(s, "max_iterations = {m}");
        }
        let pc = match self.solver.preconditioner {
            Preconditioner::Jacobi => "jacobi",
            Preconditioner::None => "none",
        };
        let _ = writeln!(s, "preconditioner = {pc}");
        let w = match self.weight {
            WeightKind::Bump => "bump",
            WeightKind::Triangular => "triangular",
        };
        let _ = writeln!(s, "weight = {w}");
        let _ = writeln!(s, "output = {}", self.output_dir.display());
        let ep = match self.eval_point {
            EvalPoint::Half => "half",
            EvalPoint::Origin => "origin",
        };
        let _ = writeln!(s, "eval_point = {ep}");
        let _ = writeln!(s, "dipole_sign = {}", self.dipole_sign);
        let _ = writeln!(s, "max_clipped = {}", self.max_clipped);
        let _ = writeln!(s, "record_timing = {}", self.record_timing);
        if let Some(m) = self.memory_limit {
            let _ = writeln!(s, "memory_limit_mb = {}", m >> 20);
        }
        let _ = writeln!(s, "threads = {}", self.threads);
        let o = &self.optimality;
        let _ = writeln!(s, "opt_beta = {}\nopt_ell = {}\nopt_L = {}", o.beta, o.ell, join(&o.l_grid));
        if let Some(t) = o.truncation {
            let _ = writeln!(s, "opt_truncation = {t}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_text() {
        let c = ExperimentConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.seeds.len(), 8);
        assert_eq!(EvalPoint::Half.at(3, 9), [4, 4, 4]);
        assert_eq!(EvalPoint::Half.at(2, 8), [4, 4, 0]);
    }

    #[test]
    fn parses_a_full_file() {
        let text = "dim = 2 # plane\nL = 4, 8\ncovariance = algebraic\ntheta = 2\nbeta = 3.5\n\
                    coefficient = affine\neta = 0.5\nrecipes = zero, full\nseeds = 3\nseed_base = 10\n\
                    charge = dipole\ndipole_base = 1 0\ntolerance = 1e-8\nweight = triangular\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.l_grid, vec![4, 8]);
        assert_eq!(c.covariance, CovarianceSpec::Algebraic { theta: 2.0, beta: 3.5 });
        assert_eq!(c.recipes, vec![Variant::Zero, Variant::Full]);
        assert_eq!(c.seeds, vec![10, 11, 12]);
        assert_eq!(c.solver.rel_tolerance, 1e-8);
        assert_eq!(c.weight, WeightKind::Triangular);
        assert!(matches!(c.charge, ChargeSpec::EdgeDipole { base: [1, 0, 0], .. }));
    }

    #[test]
    fn canonical_text_roundtrips() {
        let mut c = ExperimentConfig::parse("dim = 2\nL = 4, 6, 8\ncoefficient = constant\nvalue = 2.5\n").unwrap();
        c.memory_limit = Some(512 << 20);
        c.optimality.truncation = Some(40);
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "L = 8, 8",
            "L = 16, 8",
            "L = 1",
            "nonsense = 1",
            "dim = 4",
            "dim 3",
            "theta = 1\ntheta = 2",
            "recipes = quadrupole",
            "covariance = algebraic",
            "charge = nodes\ncharge_nodes = 0 0 0:1",
            "dim = 2\ncharge = nodes\ncharge_nodes = 0 0 1:1; 0 0 0:-1",
            "tolerance = 2",
            "seeds = 0",
        ] {
            assert!(
                matches!(ExperimentConfig::parse(bad), Err(Error::Config(_))),
                "accepted {bad:?}"
            );
        }
    }
}
