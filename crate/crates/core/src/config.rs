//! Plain `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Later assignments override
//! earlier ones, so command-line overrides can be appended to a file.

use serde::Serialize;
use std::fmt;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::hartree::Trap;

/// Upper bound on the critical coupling, used to reject hopeless couplings
/// before anything is solved.
pub const A_STAR_BOUND: f64 = 2.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Gn,
    Hartree,
    Sweep,
    Ed,
    Ineq,
    Spectrum,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Gn => "gn",
            Subcommand::Hartree => "hartree",
            Subcommand::Sweep => "sweep",
            Subcommand::Ed => "ed",
            Subcommand::Ineq => "ineq",
            Subcommand::Spectrum => "spectrum",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "gn" => Subcommand::Gn,
            "hartree" => Subcommand::Hartree,
            "sweep" => Subcommand::Sweep,
            "ed" => Subcommand::Ed,
            "ineq" => Subcommand::Ineq,
            "spectrum" => Subcommand::Spectrum,
            other => return Err(Error::Config(format!("unknown subcommand {other:?}"))),
        })
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    /// Coupling for `hartree`.
    pub a: Option<f64>,
    pub m: f64,
    /// Trap exponent; `None` means `V ≡ 0`.
    pub p: Option<f64>,
    #[serde(rename = "R")]
    pub radius: f64,
    pub n: usize,
    pub seed: u64,
    pub grad_tol: f64,
    pub energy_tol: f64,
    pub max_iter: usize,
    pub multistart: usize,
    pub rescaled_frame: bool,
    pub delta_max: f64,
    pub delta_min: f64,
    pub points: usize,
    /// Particle-number ladder `a_N = a* − N^{−α}` replacing the gap ladder.
    pub alpha: Option<f64>,
    pub ladder_n: Vec<usize>,
    pub levels: Vec<f64>,
    #[serde(rename = "N")]
    pub particles: Vec<usize>,
    /// Couplings for `ed` as fractions of `a*`.
    pub a_fractions: Vec<f64>,
    /// Radial states kept per angular momentum channel.
    pub counts: Vec<usize>,
    pub l_c: Option<usize>,
    pub ed_radius: f64,
    pub ed_n: usize,
    pub gamma1: bool,
    /// Gaps of the moment ladder for `ed`.
    pub moment_deltas: Vec<f64>,
    pub moment_n: usize,
    pub gn_inputs: usize,
    pub hardy_inputs: usize,
    pub pair_inputs: usize,
    pub h_inputs: usize,
    pub ratio_cap: f64,
    pub pair_radius: f64,
    pub pair_n: usize,
    pub cache: bool,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: Subcommand::Hartree,
            a: None,
            m: 1.0,
            p: Some(1.0),
            radius: 40.0,
            n: 4096,
            seed: 0,
            grad_tol: 1e-8,
            energy_tol: 1e-10,
            max_iter: 50_000,
            multistart: 3,
            rescaled_frame: false,
            delta_max: 1e-1,
            delta_min: 1e-3,
            points: 7,
            alpha: None,
            ladder_n: Vec::new(),
            levels: vec![5.0, 10.0, 20.0, 40.0],
            particles: vec![2, 3, 4],
            a_fractions: vec![0.0, 0.5, 0.8],
            counts: vec![6, 3, 2],
            l_c: None,
            ed_radius: 16.0,
            ed_n: 255,
            gamma1: false,
            moment_deltas: vec![0.3, 0.1, 0.03],
            moment_n: 3,
            gn_inputs: 200,
            hardy_inputs: 100,
            pair_inputs: 24,
            h_inputs: 20,
            ratio_cap: 10.0,
            pair_radius: 16.0,
            pair_n: 511,
            cache: true,
            cache_dir: None,
        }
    }
}

impl RunConfig {
    pub fn trap(&self) -> Trap {
        match self.p {
            Some(p) => Trap::Power(p),
            None => Trap::None,
        }
    }

    /// The resolved configuration as `key = value` lines that parse back to `self`.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let flist = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut lines = vec![format!("subcommand = {}", self.subcommand)];
        if let Some(a) = self.a {
            lines.push(format!("a = {a}"));
        }
        lines.push(format!("m = {}", self.m));
        match self.p {
            Some(p) => lines.push(format!("p = {p}")),
            None => lines.push("no_trap = true".into()),
        }
        lines.push(format!("R = {}", self.radius));
        lines.push(format!("n = {}", self.n));
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("grad_tol = {}", self.grad_tol));
        lines.push(format!("energy_tol = {}", self.energy_tol));
        lines.push(format!("max_iter = {}", self.max_iter));
        lines.push(format!("multistart = {}", self.multistart));
        lines.push(format!("rescaled_frame = {}", self.rescaled_frame));
        lines.push(format!("delta_max = {}", self.delta_max));
        lines.push(format!("delta_min = {}", self.delta_min));
        lines.push(format!("points = {}", self.points));
        if let Some(alpha) = self.alpha {
            lines.push(format!("alpha = {alpha}"));
            lines.push(format!("ladder_N = {}", list(&self.ladder_n)));
        }
        lines.push(format!("levels = {}", flist(&self.levels)));
        lines.push(format!("N = {}", list(&self.particles)));
        lines.push(format!("a_fractions = {}", flist(&self.a_fractions)));
        lines.push(format!("counts = {}", list(&self.counts)));
        if let Some(l_c) = self.l_c {
            lines.push(format!("l_c = {l_c}"));
        }
        lines.push(format!("ed_R = {}", self.ed_radius));
        lines.push(format!("ed_n = {}", self.ed_n));
        lines.push(format!("gamma1 = {}", self.gamma1));
        lines.push(format!("moment_deltas = {}", flist(&self.moment_deltas)));
        lines.push(format!("moment_N = {}", self.moment_n));
        lines.push(format!("gn_inputs = {}", self.gn_inputs));
        lines.push(format!("hardy_inputs = {}", self.hardy_inputs));
        lines.push(format!("pair_inputs = {}", self.pair_inputs));
        lines.push(format!("h_inputs = {}", self.h_inputs));
        lines.push(format!("ratio_cap = {}", self.ratio_cap));
        lines.push(format!("pair_R = {}", self.pair_radius));
        lines.push(format!("pair_n = {}", self.pair_n));
        lines.push(format!("cache = {}", self.cache));
        if let Some(dir) = &self.cache_dir {
            lines.push(format!("cache_dir = {}", dir.display()));
        }
        lines.join("\n") + "\n"
    }

    /// Range checks that need no solved quantities.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return bad(format!("m = {} must be nonnegative", self.m));
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("p = {p} must be positive"));
            }
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("R = {} must be positive", self.radius));
        }
        if self.n < 16 {
            return bad(format!("n = {} is below 16", self.n));
        }
        if let Some(a) = self.a {
            if !(a >= 0.0) || a >= A_STAR_BOUND {
                return bad(format!("a = {a} must lie in [0, {A_STAR_BOUND})"));
            }
        }
        if !(self.grad_tol > 0.0 && self.energy_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.multistart == 0 || self.multistart > 3 {
            return bad(format!("multistart = {} must lie in 1..=3", self.multistart));
        }
        if !(self.delta_max > self.delta_min && self.delta_min > 0.0) || self.points < 2 {
            return bad("gap ladder needs 0 < delta_min < delta_max and at least 2 points".into());
        }
        if let Some(alpha) = self.alpha {
            if !(alpha > 0.0 && alpha < 1.0 / 3.0) {
                return bad(format!("alpha = {alpha} must lie in (0, 1/3)"));
            }
            if self.ladder_n.len() < 2 {
                return bad("alpha needs a ladder_N list of at least 2 particle numbers".into());
            }
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return bad("levels must be positive".into());
        }
        if self.particles.iter().any(|&n| !(2..=crate::ed::MAX_PARTICLES).contains(&n)) {
            return bad(format!("N must lie in 2..={}", crate::ed::MAX_PARTICLES));
        }
        if !(2..=crate::ed::MAX_PARTICLES).contains(&self.moment_n) {
            return bad(format!("moment_N must lie in 2..={}", crate::ed::MAX_PARTICLES));
        }
        if self.moment_deltas.iter().any(|d| !(*d > 0.0 && *d < A_STAR_BOUND)) {
            return bad("moment_deltas must be positive".into());
        }
        if self.a_fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
            return bad("a_fractions must lie in [0, 1)".into());
        }
        if self.counts.is_empty() || self.counts.contains(&0) {
            return bad("counts must be positive".into());
        }
        if let Some(l_c) = self.l_c {
            let need = 2 * (self.counts.len() - 1);
            if l_c < need {
                return bad(format!("l_c = {l_c} is below 2*l_max = {need}"));
            }
        }
        if !(self.ed_radius > 0.0 && self.pair_radius > 0.0) || self.ed_n < 16 || self.pair_n < 16 {
            return bad("ED and pair grids need R > 0 and n >= 16".into());
        }
        if !(self.ratio_cap > 0.0) {
            return bad(format!("ratio_cap = {} must be positive", self.ratio_cap));
        }
        Ok(())
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {v:?}")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("cannot parse {key} = {v:?} as a boolean"))),
    }
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

/// Splits a document into `(key, value)` pairs in order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Parses and validates a configuration; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (k, v) in parse_pairs(text)? {
        apply(&mut cfg, &k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, k: &str, v: &str) -> Result<()> {
    match k {
        "subcommand" => cfg.subcommand = Subcommand::parse(v)?,
        "a" => cfg.a = Some(num(k, v)?),
        "m" => cfg.m = num(k, v)?,
        "p" => cfg.p = Some(num(k, v)?),
        "no_trap" => {
            if boolean(k, v)? {
                cfg.p = None;
            }
        }
        "R" => cfg.radius = num(k, v)?,
        "n" => cfg.n = num(k, v)?,
        "seed" => cfg.seed = num(k, v)?,
        "grad_tol" => cfg.grad_tol = num(k, v)?,
        "energy_tol" => cfg.energy_tol = num(k, v)?,
        "max_iter" => cfg.max_iter = num(k, v)?,
        "multistart" => cfg.multistart = num(k, v)?,
        "rescaled_frame" => cfg.rescaled_frame = boolean(k, v)?,
        "delta_max" => cfg.delta_max = num(k, v)?,
        "delta_min" => cfg.delta_min = num(k, v)?,
        "points" => cfg.points = num(k, v)?,
        "alpha" => cfg.alpha = Some(num(k, v)?),
        "ladder_N" => cfg.ladder_n = list(k, v)?,
        "levels" => cfg.levels = list(k, v)?,
        "N" => cfg.particles = list(k, v)?,
        "a_fractions" => cfg.a_fractions = list(k, v)?,
        "counts" => cfg.counts = list(k, v)?,
        "n_max" => {
            let n_max: usize = num(k, v)?;
            let l_max = cfg.counts.len().max(1);
            cfg.counts = vec![n_max; l_max];
        }
        "l_max" => {
            let l_max: usize = num(k, v)?;
            let n_max = cfg.counts.first().copied().unwrap_or(1);
            cfg.counts.resize(l_max + 1, n_max);
        }
        "l_c" => cfg.l_c = Some(num(k, v)?),
        "ed_R" => cfg.ed_radius = num(k, v)?,
        "ed_n" => cfg.ed_n = num(k, v)?,
        "gamma1" => cfg.gamma1 = boolean(k, v)?,
        "moment_deltas" => cfg.moment_deltas = list(k, v)?,
        "moment_N" => cfg.moment_n = num(k, v)?,
        "gn_inputs" => cfg.gn_inputs = num(k, v)?,
        "hardy_inputs" => cfg.hardy_inputs = num(k, v)?,
        "pair_inputs" => cfg.pair_inputs = num(k, v)?,
        "h_inputs" => cfg.h_inputs = num(k, v)?,
        "ratio_cap" => cfg.ratio_cap = num(k, v)?,
        "pair_R" => cfg.pair_radius = num(k, v)?,
        "pair_n" => cfg.pair_n = num(k, v)?,
        "cache" => cfg.cache = boolean(k, v)?,
        "cache_dir" => cfg.cache_dir = Some(PathBuf::from(v)),
        other => return Err(Error::Config(format!("unknown key {other:?}"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("p = 1\na = 2.0\n").unwrap();
        assert_eq!(cfg.m, 1.0);
        assert_eq!(cfg.radius, 40.0);
        assert_eq!(cfg.n, 4096);
        assert_eq!(cfg.a, Some(2.0));
        assert_eq!(cfg.trap(), Trap::Power(1.0));
    }

    #[test]
    fn rejects_negative_trap_exponent() {
        let err = parse_config("p = -1").unwrap_err();
        assert!(err.to_string().contains("p = -1"), "{err}");
    }

    #[test]
    fn rejects_unknown_key_by_name() {
        let err = parse_config("foo = 3").unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
    }

    #[test]
    fn rejects_malformed_lines_and_ranges() {
        assert!(parse_config("just text").is_err());
        assert!(parse_config("a = 2.8").is_err());
        assert!(parse_config("alpha = 0.4\nladder_N = 10,100").is_err());
        assert!(parse_config("alpha = 0.2\nladder_N = 10,100").is_ok());
        assert!(parse_config("n = abc").is_err());
        assert!(parse_config("counts = 6,3,2\nl_c = 2").is_err());
    }

    #[test]
    fn text_round_trip() {
        let cfg = parse_config("subcommand = ed\nno_trap = true\nN = 2,3\ncounts = 4,2\nseed = 9\n# note\n").unwrap();
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(cfg.p, None);
    }

    #[test]
    fn later_assignments_win() {
        let cfg = parse_config("m = 2\nm = 3").unwrap();
        assert_eq!(cfg.m, 3.0);
        let cfg = parse_config("n_max = 4\nl_max = 2").unwrap();
        assert_eq!(cfg.counts, vec![4, 4, 4]);
    }
}
