//! Merged settings: config file values overlaid by command-line flags.

use crate::cascade::{CascadeSpec, DEFAULT_LEAF_BUDGET};
use crate::error::{invalid, Error, Result};
use crate::finite_oracle::FiniteMeasure;
use crate::functionals::{FunctionFamily, IntervalSet, OverlapFn, PairProduct, StepFunction, WeightFn};
use crate::identity_checks::{PairEvent, Target};
use crate::mc_engine::EstimatorConfig;
use crate::measure::DiscreteLaw;
use crate::pd_core::DEFAULT_TRUNCATION;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

type Section = BTreeMap<String, String>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    flat: Section,
    sections: BTreeMap<String, Section>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

fn strip_comment(value: &str) -> &str {
    value.split('#').next().unwrap_or("").trim()
}

impl Settings {
    /// Parses `key = value` lines and `[section]` blocks; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let ini = ini::Ini::load_from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        let mut out = Settings::default();
        for (name, props) in &ini {
            let target = match name {
                None => &mut out.flat,
                Some(n) => out.sections.entry(n.trim().to_string()).or_default(),
            };
            for (k, v) in props.iter() {
                target.insert(normalize(k), strip_comment(v).to_string());
            }
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets a flat key, replacing any config value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.flat.insert(normalize(key), value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.flat.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Parse(format!("{key} = {v:?}: {e}"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| Error::InvalidArgument(format!("missing required setting --{key}")))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            None => Ok(false),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(Error::Parse(format!("{key} = {v:?}: expected true or false"))),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).map(|v| parse_list(key, v)).transpose()
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }

    pub fn estimator(&self) -> Result<EstimatorConfig> {
        let d = EstimatorConfig::default();
        let config = EstimatorConfig {
            n_outer: self.get_or("n-outer", d.n_outer)?,
            n_batches: self.get_or("n-batches", d.n_batches)?,
            seed: self.get_or("seed", d.seed)?,
            workers: self.get_or("workers", d.workers)?,
            z_max: self.get_or("z-max", d.z_max)?,
            truncation: self.get("truncation")?,
            leaf_budget: self.get("leaf-budget")?,
            timing: self.flag("timing")?,
        };
        config.validate()?;
        Ok(config)
    }

    /// `--n` doubles as the sample count for checks without a replica count.
    pub fn estimator_with_n_alias(&self) -> Result<EstimatorConfig> {
        let mut s = self.clone();
        if s.raw("n-outer").is_none() {
            if let Some(n) = s.raw("n").map(str::to_string) {
                s.set("n-outer", n);
            }
        }
        s.estimator()
    }

    pub fn cascade_spec(&self) -> Result<CascadeSpec<f64>> {
        let qs: Option<Vec<f64>> = self.list("qs")?;
        let spec = if let Some(zetas) = self.list::<f64>("zetas")? {
            if let Some(depth) = self.get::<usize>("depth")? {
                if depth != zetas.len() {
                    return invalid(format!("depth {depth} but {} zetas", zetas.len()));
                }
            }
            let qs = qs.ok_or_else(|| Error::InvalidArgument("--zetas needs --qs".into()))?;
            let budget = self.get_or("leaf-budget", DEFAULT_LEAF_BUDGET)?;
            let spec = match self.list::<usize>("branching")? {
                Some(b) => CascadeSpec::new(zetas, qs, b)?,
                None => CascadeSpec::with_default_branching(zetas, qs, budget.min(DEFAULT_LEAF_BUDGET))?,
            };
            spec.with_leaf_budget(budget)?
        } else if let Some(zeta) = self.get::<f64>("zeta")? {
            if self.get::<usize>("depth")?.is_some_and(|d| d != 1) {
                return invalid("--zeta describes a one-level cascade; use --zetas for deeper ones");
            }
            let qs = qs.unwrap_or_else(|| vec![0.0, 1.0]);
            if qs.len() != 2 {
                return invalid("a one-level cascade takes two overlap values");
            }
            let k = match self.list::<usize>("branching")? {
                Some(b) if b.len() == 1 => b[0],
                Some(_) => return invalid("a one-level cascade takes one branching value"),
                None => self.get("truncation")?.unwrap_or(DEFAULT_TRUNCATION),
            };
            let spec = CascadeSpec::single_level(zeta, qs[0], qs[1], k)?;
            match self.get::<usize>("leaf-budget")? {
                Some(b) => spec.with_leaf_budget(b)?,
                None => spec,
            }
        } else {
            return invalid("no cascade given: use --zeta or --zetas with --qs");
        };
        Ok(spec)
    }

    /// A finite measure from `--measure`, otherwise a cascade; `--threshold`
    /// selects the heavy-pair negative control.
    pub fn target(&self) -> Result<Target> {
        if let Some(path) = self.raw("measure") {
            return Ok(Target::Finite(FiniteMeasure::load(path)?));
        }
        let spec = self.cascade_spec()?;
        Ok(match self.get::<f64>("threshold")? {
            Some(threshold) => Target::HeavyPairShareBranch { spec, threshold },
            None => Target::Cascade(spec),
        })
    }

    pub fn overlap_fn(&self, name: &str) -> Result<Option<OverlapFn<f64>>> {
        self.section(name).map(|s| parse_overlap_fn(name, s)).transpose()
    }

    /// `[f1]`, `[f2]`, … as a family; `None` when `[f1]` is absent.
    pub fn family(&self, mu: &DiscreteLaw<f64>) -> Result<Option<FunctionFamily<f64>>> {
        let mut fs = Vec::new();
        while let Some(f) = self.overlap_fn(&format!("f{}", fs.len() + 1))? {
            fs.push(f);
        }
        let stray = self
            .sections
            .keys()
            .filter_map(|k| k.strip_prefix('f')?.parse::<usize>().ok())
            .find(|&l| l > fs.len());
        if let Some(l) = stray {
            return invalid(format!("[f{l}] given without [f{}]", fs.len() + 1));
        }
        Ok((!fs.is_empty()).then(|| FunctionFamily::new(fs, mu)))
    }

    /// `Φ` from `[phi.l.l']` blocks; the constant 1 when there are none.
    pub fn pair_product(&self) -> Result<PairProduct<f64>> {
        let mut factors = Vec::new();
        for (name, sec) in &self.sections {
            if let Some(rest) = name.strip_prefix("phi.") {
                let (l, lp) = rest
                    .split_once('.')
                    .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                    .ok_or_else(|| Error::Parse(format!("[{name}]: expected [phi.l.l'] with replica indices")))?;
                factors.push((l, lp, parse_overlap_fn(name, sec)?));
            }
        }
        PairProduct::new(factors)
    }

    /// `set1`, `set2`, … as interval lists.
    pub fn sets(&self) -> Result<Vec<IntervalSet<f64>>> {
        let mut out = Vec::new();
        while let Some(v) = self.raw(&format!("set{}", out.len() + 1)) {
            out.push(IntervalSet::parse(v)?);
        }
        Ok(out)
    }

    /// `[event]` with keys `l.l' = interval list`.
    pub fn event(&self) -> Result<PairEvent> {
        let sec = self
            .section("event")
            .ok_or_else(|| Error::InvalidArgument("missing [event] block".into()))?;
        let mut conds = Vec::new();
        for (k, v) in sec {
            let (l, lp) = k
                .split_once('.')
                .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                .ok_or_else(|| Error::Parse(format!("[event] key {k:?}: expected l.l'")))?;
            conds.push((l, lp, IntervalSet::parse(v)?));
        }
        PairEvent::new(conds)
    }

    /// `[weight]` block: `kind = one | component | zero | monomial | linear | n2`.
    pub fn weight_fn(&self) -> Result<WeightFn<f64>> {
        let Some(sec) = self.section("weight") else {
            return Ok(WeightFn::One);
        };
        let get = |k: &str| -> Result<&str> {
            sec.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::InvalidArgument(format!("[weight] needs {k}")))
        };
        let num = |k: &str| -> Result<f64> {
            let v = get(k)?;
            v.parse().map_err(|e| Error::Parse(format!("[weight] {k} = {v:?}: {e}")))
        };
        let index = || -> Result<usize> {
            let v = get("index")?;
            v.parse().map_err(|e| Error::Parse(format!("[weight] index = {v:?}: {e}")))
        };
        Ok(match get("kind")? {
            "one" => WeightFn::One,
            "component" => WeightFn::Component(index()?),
            "zero" => WeightFn::ZeroIndicator(index()?),
            "monomial" => WeightFn::Monomial(parse_list("exponents", get("exponents")?)?),
            "linear" => WeightFn::LinearPower {
                coeffs: parse_list("coeffs", get("coeffs")?)?,
                power: num("power")?,
            },
            "n2" => crate::suite::n2_weight_fn(num("s")?),
            other => return Err(Error::Parse(format!("[weight] unknown kind {other:?}"))),
        })
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| Error::Parse(format!("{key}: {s:?}: {e}"))))
        .collect()
}

/// A function block: `breaks`/`vals`, `set` with optional `inside`/`outside`,
/// or `const`.
fn parse_overlap_fn(name: &str, sec: &Section) -> Result<OverlapFn<f64>> {
    let num = |k: &str, default: f64| -> Result<f64> {
        match sec.get(k) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| Error::Parse(format!("[{name}] {k} = {v:?}: {e}"))),
        }
    };
    if let Some(b) = sec.get("breaks") {
        let vals = sec
            .get("vals")
            .ok_or_else(|| Error::Parse(format!("[{name}]: breaks without vals")))?;
        return Ok(OverlapFn::Step(StepFunction::new(parse_list("breaks", b)?, parse_list("vals", vals)?)?));
    }
    if let Some(s) = sec.get("set") {
        return Ok(OverlapFn::Set {
            set: IntervalSet::parse(s)?,
            inside: num("inside", 1.0)?,
            outside: num("outside", 0.0)?,
        });
    }
    if sec.contains_key("const") {
        return Ok(OverlapFn::constant(num("const", 0.0)?));
    }
    Err(Error::Parse(format!("[{name}]: expected breaks/vals, set or const")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "
# two-level target
zetas = 0.3, 0.7
qs = 0, 0.5, 1
branching = 16, 64
n_outer = 640   # samples
set1 = [0.5,1]
set2 = [-1,0.2);[0.5,1]

[f1]
set = [0.5,1]
inside = -0.5

[f2]
breaks = -1, 0.5
vals = 0, 1

[phi.1.2]
set = [1,1]

[event]
1.2 = [0.5,1]

[weight]
kind = linear
coeffs = 1, 2, 0, 0
power = -1
";

    #[test]
    fn parses_blocks_and_flat_keys() {
        let s = Settings::parse(TEXT).unwrap();
        assert_eq!(s.get::<usize>("n-outer").unwrap(), Some(640));
        let spec = s.cascade_spec().unwrap();
        assert_eq!(spec.branching(), &[16, 64]);
        let fam = s.family(&spec.exact_mu()).unwrap().unwrap();
        assert_eq!(fam.n(), 2);
        assert_eq!(fam.functions()[0].eval(0.5), -0.5);
        assert_eq!(fam.functions()[1].eval(0.7), 1.0);
        let phi = s.pair_product().unwrap();
        assert_eq!(phi.max_index(), 2);
        let sets = s.sets().unwrap();
        assert_eq!(sets.len(), 2);
        assert!(sets[1].contains(0.0) && !sets[1].contains(0.3));
        assert_eq!(s.event().unwrap().conds().len(), 1);
        assert!(matches!(s.weight_fn().unwrap(), WeightFn::LinearPower { .. }));
    }

    #[test]
    fn flags_override_and_validate() {
        let mut s = Settings::parse(TEXT).unwrap();
        s.set("n-outer", "64");
        assert_eq!(s.estimator().unwrap().n_outer, 64);
        s.set("depth", "3");
        assert!(s.cascade_spec().is_err());
        s.set("n-outer", "abc");
        assert!(matches!(s.estimator(), Err(Error::Parse(_))));
    }

    #[test]
    fn one_level_defaults() {
        let mut s = Settings::default();
        assert!(s.target().is_err());
        s.set("zeta", "0.5");
        let spec = s.cascade_spec().unwrap();
        assert_eq!(spec.qs(), &[0.0, 1.0]);
        assert_eq!(spec.branching(), &[DEFAULT_TRUNCATION]);
        s.set("n", "96");
        assert_eq!(s.estimator_with_n_alias().unwrap().n_outer, 96);
    }

    #[test]
    fn bad_blocks() {
        assert!(Settings::parse("[f1]\nfoo = 1\n").unwrap().family(&DiscreteLaw::new(vec![0.0], vec![1.0])).is_err());
        assert!(Settings::parse("[f2]\nconst = 1\n").unwrap().family(&DiscreteLaw::new(vec![0.0], vec![1.0])).is_err());
        assert!(Settings::parse("[phi.x]\nconst = 1\n").unwrap().pair_product().is_err());
        assert!(Settings::parse("[weight]\nkind = nope\n").unwrap().weight_fn().is_err());
    }
}
