//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors so that
//! typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pclm_core::{Metric, PenaltyRule, Rate, TauRule, Variant};

use crate::error::{HarnessError, Result};

/// Which problem to build.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    ScalarQp,
    Qp { n: usize, l: usize },
    TwoBlockQp { n1: usize, n2: usize, l: usize, sigma2: f64 },
    ChainQp { m: usize, dim: usize, l: usize },
    ElasticNet { n: usize, rows: usize, mu: f64, sigma: f64 },
    /// blocks read from matrix files
    Files(FileProblem),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileBlock {
    /// quadratic | l1 | elastic_net | box
    pub kind: String,
    pub a: PathBuf,
    pub p: Option<PathBuf>,
    pub q: Option<PathBuf>,
    pub lo: Option<PathBuf>,
    pub hi: Option<PathBuf>,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileProblem {
    pub blocks: Vec<FileBlock>,
    pub b: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub name: String,
    pub problem: ProblemSpec,
    /// solve a two-block problem with the multi-block methods
    pub multi_block: bool,
    pub seed: u64,
    pub tau_init: f64,
    pub schedule: TauRule,
    pub beta: f64,
    pub beta_rule: PenaltyRule,
    pub gamma: f64,
    pub variant: Variant,
    pub rate: Rate,
    pub sigma: f64,
    pub metric: Metric,
    pub iters: usize,
    /// ρ of the ball gap; default 2‖λ*‖ + 1
    pub rho: Option<f64>,
    pub window: f64,
    pub certify: bool,
    /// acceptance check on the fitted slope of `expect_series`
    pub expect_slope: Option<f64>,
    pub expect_series: String,
    pub min_r_squared: f64,
    pub record_wall_time: bool,
    pub start_x: Option<PathBuf>,
    pub start_lambda: Option<PathBuf>,
}

const SERIES: [&str; 5] = ["gap_ball", "gap_fixed", "feasibility", "min_residue", "ergodic_gap"];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| HarnessError::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(HarnessError::Config(format!("{key}: expected a boolean, got '{v}'"))),
    }
}

/// Splits `key = value` lines into a map, rejecting duplicates.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if out.insert(k.clone(), v).is_some() {
            return Err(HarnessError::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(out)
}

struct Pairs {
    map: BTreeMap<String, String>,
    base: PathBuf,
}

impl Pairs {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            Some(v) => parse_num(key, &v),
            None => Ok(default),
        }
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(|v| self.base.join(v))
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        Self::parse(&text, &base, &name)
    }

    /// Parses config text; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, name: &str) -> Result<Self> {
        let mut p = Pairs {
            map: parse_pairs(text)?,
            base: base.to_path_buf(),
        };
        let beta = match p.take("beta") {
            Some(v) => parse_num("beta", &v)?,
            None => return Err(HarnessError::Validation(vec!["missing required key 'beta'".into()])),
        };
        let rate = match p.take("rate").as_deref() {
            None | Some("k") => Rate::RateK,
            Some("k2") => Rate::RateK2,
            Some(o) => return Err(HarnessError::Config(format!("rate: expected k or k2, got '{o}'"))),
        };
        let schedule = match p.take("schedule").as_deref() {
            None => match rate {
                Rate::RateK => TauRule::C1,
                Rate::RateK2 => TauRule::C2,
            },
            Some("c1") => TauRule::C1,
            Some("c2") => TauRule::C2,
            Some(o) => return Err(HarnessError::Config(format!("schedule: expected c1 or c2, got '{o}'"))),
        };
        let problem = parse_problem(&mut p)?;
        let multi_block = p
            .take("multi_block")
            .map(|v| parse_bool("multi_block", &v))
            .transpose()?
            .unwrap_or(false);
        let multi = multi_block
            || matches!(&problem, ProblemSpec::ChainQp { .. })
            || matches!(&problem, ProblemSpec::Files(f) if f.blocks.len() > 2);
        let beta_rule = match p.take("beta_rule").as_deref() {
            None => match (rate, multi) {
                (Rate::RateK, _) => PenaltyRule::BetaOverTau,
                (Rate::RateK2, true) => PenaltyRule::Constant,
                (Rate::RateK2, false) => PenaltyRule::BetaOverTauSq,
            },
            Some("over_tau") => PenaltyRule::BetaOverTau,
            Some("over_tau_sq") => PenaltyRule::BetaOverTauSq,
            Some("const") => PenaltyRule::Constant,
            Some(o) => {
                return Err(HarnessError::Config(format!(
                    "beta_rule: expected over_tau, over_tau_sq or const, got '{o}'"
                )))
            }
        };
        let variant = match p.take("variant").as_deref() {
            None | Some("once") => Variant::Once,
            Some("twice") => Variant::Twice,
            Some("penalty") => Variant::Penalty,
            Some(o) => {
                return Err(HarnessError::Config(format!(
                    "variant: expected once, twice or penalty, got '{o}'"
                )))
            }
        };
        let metric = match p.take("metric").as_deref() {
            None | Some("gram") => Metric::Gram,
            Some("scaled_identity") => Metric::ScaledIdentity,
            Some(o) => {
                return Err(HarnessError::Config(format!(
                    "metric: expected gram or scaled_identity, got '{o}'"
                )))
            }
        };
        let expect_series = p.take("expect_series").unwrap_or_else(|| "gap_ball".into());
        if !SERIES.contains(&expect_series.as_str()) {
            return Err(HarnessError::Config(format!("expect_series: unknown series '{expect_series}'")));
        }
        let cfg = Config {
            name: p.take("name").unwrap_or_else(|| name.to_string()),
            problem,
            multi_block,
            seed: p.num("seed", 0)?,
            tau_init: p.num("tau_init", pclm_core::schedule::DEFAULT_TAU_INIT)?,
            schedule,
            beta,
            beta_rule,
            gamma: p.num("gamma", 1.0)?,
            variant,
            rate,
            sigma: p.num("sigma", 0.0)?,
            metric,
            iters: p.num("iters", 1000)?,
            rho: p.take("rho").map(|v| parse_num("rho", &v)).transpose()?,
            window: p.num("window", 0.8)?,
            certify: p.take("certify").map(|v| parse_bool("certify", &v)).transpose()?.unwrap_or(true),
            expect_slope: p.take("expect_slope").map(|v| parse_num("expect_slope", &v)).transpose()?,
            expect_series,
            min_r_squared: p.num("min_r_squared", 0.9)?,
            record_wall_time: p
                .take("record_wall_time")
                .map(|v| parse_bool("record_wall_time", &v))
                .transpose()?
                .unwrap_or(false),
            start_x: p.path("start_x"),
            start_lambda: p.path("start_lambda"),
        };
        if let Some(k) = p.map.keys().next() {
            return Err(HarnessError::Config(format!("unknown key '{k}'")));
        }
        if cfg.iters == 0 {
            return Err(HarnessError::Config("iters must be ≥ 1".into()));
        }
        Ok(cfg)
    }
}

fn parse_problem(p: &mut Pairs) -> Result<ProblemSpec> {
    let kind = p.take("problem").unwrap_or_else(|| "scalar_qp".into());
    Ok(match kind.as_str() {
        "scalar_qp" => ProblemSpec::ScalarQp,
        "qp" => ProblemSpec::Qp {
            n: p.num("n", 20)?,
            l: p.num("l", 10)?,
        },
        "two_block_qp" => ProblemSpec::TwoBlockQp {
            n1: p.num("n1", 10)?,
            n2: p.num("n2", 10)?,
            l: p.num("l", 10)?,
            sigma2: p.num("sigma2", 1.0)?,
        },
        "chain_qp" => ProblemSpec::ChainQp {
            m: p.num("m", 3)?,
            dim: p.num("dim", 10)?,
            l: p.num("l", 8)?,
        },
        "elastic_net" => ProblemSpec::ElasticNet {
            n: p.num("n", 30)?,
            rows: p.num("rows", 20)?,
            mu: p.num("mu", 0.1)?,
            sigma: p.num("en_sigma", 1.0)?,
        },
        "files" => {
            let count: usize = p.num("blocks", 0)?;
            if count == 0 {
                return Err(HarnessError::Config("files problem needs blocks ≥ 1".into()));
            }
            let mut blocks = Vec::with_capacity(count);
            for i in 1..=count {
                let key = |s: &str| format!("block{i}.{s}");
                let a = p
                    .path(&key("a"))
                    .ok_or_else(|| HarnessError::Config(format!("missing {}", key("a"))))?;
                blocks.push(FileBlock {
                    kind: p.take(&key("kind")).unwrap_or_else(|| "quadratic".into()),
                    a,
                    p: p.path(&key("p")),
                    q: p.path(&key("q")),
                    lo: p.path(&key("lo")),
                    hi: p.path(&key("hi")),
                    mu: p.num(&key("mu"), 0.0)?,
                    sigma: p.num(&key("sigma"), 0.0)?,
                });
            }
            let b = p
                .path("b")
                .ok_or_else(|| HarnessError::Config("missing b".into()))?;
            ProblemSpec::Files(FileProblem { blocks, b })
        }
        o => return Err(HarnessError::Config(format!("problem: unknown kind '{o}'"))),
    })
}
