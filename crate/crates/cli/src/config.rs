//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use uwfosls::linalg::SaddleStrategy;
use uwfosls::spaces::Sign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Pollution,
    Convergence,
    Adapt,
    Solve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pollution => "pollution",
            Command::Convergence => "convergence",
            Command::Adapt => "adapt",
            Command::Solve => "solve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Test order given directly or as an offset from the trial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestOrder {
    Fixed(usize),
    Offset(usize),
}

impl TestOrder {
    pub fn for_trial(self, p: usize) -> usize {
        match self {
            TestOrder::Fixed(t) => t,
            TestOrder::Offset(k) => p + k,
        }
    }
}

impl FromStr for TestOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.replace(' ', "");
        if let Some(k) = s.strip_prefix("p+") {
            return k.parse().map(TestOrder::Offset).map_err(|e| format!("{e}"));
        }
        if s == "p" {
            return Ok(TestOrder::Offset(0));
        }
        s.parse().map(TestOrder::Fixed).map_err(|e| format!("{e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Methods {
    pub fosls: bool,
    pub galerkin: bool,
}

impl FromStr for Methods {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fosls" => Ok(Methods { fosls: true, galerkin: false }),
            "galerkin" => Ok(Methods { fosls: false, galerkin: true }),
            "both" => Ok(Methods { fosls: true, galerkin: true }),
            _ => Err("expected fosls, galerkin or both".into()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub command: Command,
    pub problem: String,
    pub kappa: f64,
    pub sigma: Sign,
    /// Angle of the incident direction, problem default when absent.
    pub direction: Option<f64>,
    pub mesh: Option<PathBuf>,
    pub p: Vec<usize>,
    pub ptilde: TestOrder,
    pub q_enrich: usize,
    pub method: Methods,
    /// Criss-cross subdivisions for the plane wave.
    pub n: Vec<usize>,
    /// Uniform refinement rounds of the initial mesh for scattering problems.
    pub levels: Vec<usize>,
    pub theta: f64,
    pub max_dofs: usize,
    pub max_iterations: usize,
    pub reference_dofs: usize,
    pub output: PathBuf,
    pub quad_degree: Option<usize>,
    pub seed: u64,
    pub eig_tol: f64,
    pub strategy: SaddleStrategy,
    pub jobs: usize,
    pub grid: usize,
    /// Every key that was set, for the CSV metadata line.
    pub given: BTreeMap<String, String>,
}

pub const KEYS: &[&str] = &[
    "problem",
    "kappa",
    "sigma",
    "direction",
    "mesh",
    "p",
    "ptilde",
    "q_enrich",
    "method",
    "n",
    "levels",
    "theta",
    "max_dofs",
    "max_iterations",
    "reference_dofs",
    "output",
    "quad_degree",
    "seed",
    "eig_tol",
    "strategy",
    "jobs",
    "grid",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_pair(line).map_err(|e| ConfigError(format!("line {}: {}", i + 1, e.0)))?);
    }
    Ok(out)
}

pub fn parse_pair(s: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("expected key=value, got `{s}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| ConfigError(format!("{key} = `{v}`: {e}")))
}

fn list(key: &str, v: &str) -> Result<Vec<usize>, ConfigError> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (value(key, a)?, value(key, b)?);
                if a > b {
                    return Err(ConfigError(format!("{key}: empty range `{part}`")));
                }
                out.extend(a..=b);
            }
            None => out.push(value(key, part)?),
        }
    }
    if out.is_empty() {
        return Err(ConfigError(format!("{key} is empty")));
    }
    Ok(out)
}

impl Config {
    pub fn defaults(command: Command) -> Self {
        Config {
            command,
            problem: "plane_wave".into(),
            kappa: 10.0,
            sigma: Sign::Plus,
            direction: None,
            mesh: None,
            p: vec![1],
            ptilde: TestOrder::Offset(2),
            q_enrich: 3,
            method: match command {
                Command::Pollution => "both",
                _ => "fosls",
            }
            .parse()
            .unwrap(),
            n: vec![4, 8, 16, 32],
            levels: vec![0, 1, 2],
            theta: 0.6,
            max_dofs: 50_000,
            max_iterations: 10,
            reference_dofs: 0,
            output: PathBuf::from("out"),
            quad_degree: None,
            seed: 20_240_917,
            eig_tol: 1e-8,
            strategy: SaddleStrategy::Auto,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            grid: 101,
            given: BTreeMap::new(),
        }
    }

    /// Applies the pairs in order, later ones winning.
    pub fn build(command: Command, pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut c = Config::defaults(command);
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        c.check()?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "problem" => self.problem = v.to_string(),
            "kappa" => self.kappa = value(key, v)?,
            "sigma" => self.sigma = value(key, v)?,
            "direction" => self.direction = Some(value(key, v)?),
            "mesh" => self.mesh = Some(PathBuf::from(v)),
            "p" => self.p = list(key, v)?,
            "ptilde" => self.ptilde = value(key, v)?,
            "q_enrich" => self.q_enrich = value(key, v)?,
            "method" => self.method = value(key, v)?,
            "n" => self.n = list(key, v)?,
            "levels" => self.levels = list(key, v)?,
            "theta" => self.theta = value(key, v)?,
            "max_dofs" => self.max_dofs = value(key, v)?,
            "max_iterations" => self.max_iterations = value(key, v)?,
            "reference_dofs" => self.reference_dofs = value(key, v)?,
            "output" => self.output = PathBuf::from(v),
            "quad_degree" => self.quad_degree = Some(value(key, v)?),
            "seed" => self.seed = value(key, v)?,
            "eig_tol" => self.eig_tol = value(key, v)?,
            "strategy" => self.strategy = value(key, v)?,
            "jobs" => self.jobs = value(key, v)?,
            "grid" => self.grid = value(key, v)?,
            _ => return Err(ConfigError(format!("unknown key `{key}` (valid keys: {})", KEYS.join(", ")))),
        }
        self.given.insert(key.to_string(), v.to_string());
        Ok(())
    }

    fn check(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return fail(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return fail(format!("theta must lie in (0, 1], got {}", self.theta));
        }
        if self.p.contains(&0) {
            return fail("p must be at least 1".into());
        }
        if self.n.contains(&0) {
            return fail("n must be at least 1".into());
        }
        if self.jobs == 0 || self.grid < 2 || self.max_iterations == 0 {
            return fail("jobs and max_iterations must be positive and grid at least 2".into());
        }
        if !(self.eig_tol > 0.0) {
            return fail("eig_tol must be positive".into());
        }
        if !matches!(self.problem.as_str(), "plane_wave" | "scatter_nontrap" | "scatter_trap") {
            return fail(format!(
                "unknown problem `{}` (expected plane_wave, scatter_nontrap or scatter_trap)",
                self.problem
            ));
        }
        Ok(())
    }

    /// Pairs `(p, p̃)` of the sweep, warning when `p̃ < p`.
    pub fn orders(&self) -> Vec<(usize, usize)> {
        self.p
            .iter()
            .map(|&p| {
                let pt = self.ptilde.for_trial(p);
                if pt < p {
                    log::warn!("test order {pt} below trial order {p}");
                }
                (p, pt)
            })
            .collect()
    }
}
