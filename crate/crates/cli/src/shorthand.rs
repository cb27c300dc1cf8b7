//! Inline specs for flags: `brownian:d=3`, `stable:d=2,alpha=1`,
//! `strip:w=1,d=2`, `ball(0,1)`, `lebesgue:ball(0,1)`, `sphere(0,1)`.

use lpkato::geometry::{Domain, HornProfile, MeasureSpec};
use lpkato::kernels::ProcessSpec;
use std::collections::BTreeMap;

type Res<T> = std::result::Result<T, String>;

struct Parsed<'a> {
    name: &'a str,
    args: Vec<f64>,
    keys: BTreeMap<String, f64>,
}

fn split(s: &str) -> Res<Parsed<'_>> {
    let s = s.trim();
    if let Some(open) = s.find('(') {
        let inner = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| format!("unbalanced parentheses in `{s}`"))?;
        let args = inner
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(|a| a.trim().parse::<f64>().map_err(|_| format!("bad number `{a}` in `{s}`")))
            .collect::<Res<_>>()?;
        return Ok(Parsed {
            name: &s[..open],
            args,
            keys: BTreeMap::new(),
        });
    }
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut keys = BTreeMap::new();
    for kv in rest.split(',').filter(|x| !x.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{kv}`"))?;
        let v = v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}` for `{k}`"))?;
        keys.insert(k.trim().to_string(), v);
    }
    Ok(Parsed {
        name,
        args: Vec::new(),
        keys,
    })
}

impl Parsed<'_> {
    fn get(&self, k: &str) -> Option<f64> {
        self.keys.get(k).copied()
    }

    fn need(&self, k: &str) -> Res<f64> {
        self.get(k).ok_or_else(|| format!("`{}` needs `{k}=`", self.name))
    }

    fn dim(&self, default: Option<usize>) -> Res<usize> {
        match self.get("d") {
            Some(d) if d >= 1.0 && d.fract() == 0.0 => Ok(d as usize),
            Some(d) => Err(format!("bad dimension {d}")),
            None => default.ok_or_else(|| format!("`{}` needs `d=` (no process dimension to inherit)", self.name)),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Res<()> {
        match self.keys.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(format!("unknown key `{k}` for `{}`", self.name)),
            None => Ok(()),
        }
    }
}

pub fn process(s: &str) -> Res<ProcessSpec> {
    let p = split(s)?;
    p.check_keys(&["d", "alpha", "m"])?;
    let d = p.dim(None)?;
    let spec = match p.name {
        "brownian" => Ok(ProcessSpec::brownian(d)),
        "stable" => ProcessSpec::stable(d, p.need("alpha")?),
        "relativistic" => ProcessSpec::relativistic(d, p.need("alpha")?, p.need("m")?),
        other => return Err(format!("unknown process `{other}`")),
    };
    spec.map_err(|e| e.to_string())
}

fn broadcast(c: f64, d: usize) -> Vec<f64> {
    vec![c; d]
}

pub fn domain(s: &str, default_dim: Option<usize>) -> Res<Domain> {
    let p = split(s)?;
    let positional = |n: usize| -> Res<&[f64]> {
        if p.args.len() == n {
            Ok(&p.args)
        } else {
            Err(format!("`{}(…)` takes {n} arguments", p.name))
        }
    };
    let functional = !p.args.is_empty() || s.contains('(');
    let d = || p.dim(default_dim);
    let dom = match p.name {
        "ball" if functional => {
            let a = positional(2)?;
            Domain::ball(broadcast(a[0], d()?), a[1])
        }
        "ball" => {
            p.check_keys(&["d", "r", "c"])?;
            let d = d()?;
            Domain::ball(broadcast(p.get("c").unwrap_or(0.0), d), p.get("r").unwrap_or(1.0))
        }
        "exterior" if functional => {
            let a = positional(2)?;
            Domain::exterior(broadcast(a[0], d()?), a[1])
        }
        "exterior" => {
            p.check_keys(&["d", "r", "c"])?;
            let d = d()?;
            Domain::exterior(broadcast(p.get("c").unwrap_or(0.0), d), p.get("r").unwrap_or(1.0))
        }
        "interval" if functional => {
            let a = positional(2)?;
            Domain::interval(a[0], a[1])
        }
        "interval" => {
            p.check_keys(&["a", "b"])?;
            Domain::interval(p.need("a")?, p.need("b")?)
        }
        "box" | "cube" if functional => {
            let a = positional(2)?;
            let d = d()?;
            Domain::cube(broadcast(a[0], d), broadcast(a[1], d))
        }
        "box" | "cube" => {
            p.check_keys(&["d", "lo", "hi"])?;
            let d = d()?;
            Domain::cube(broadcast(p.get("lo").unwrap_or(0.0), d), broadcast(p.get("hi").unwrap_or(1.0), d))
        }
        "strip" => {
            p.check_keys(&["d", "w", "axis"])?;
            let axis = p.get("axis").unwrap_or(0.0) as usize;
            Domain::strip(d()?, axis, p.need("w")?)
        }
        "horn" => {
            p.check_keys(&["d", "scale", "rate", "exponent", "start"])?;
            let scale = p.get("scale").unwrap_or(1.0);
            let profile = match (p.get("rate"), p.get("exponent")) {
                (Some(rate), None) => HornProfile::Exp { scale, rate },
                (None, Some(exponent)) => HornProfile::Power { scale, exponent },
                (None, None) => HornProfile::Exp { scale, rate: 1.0 },
                _ => return Err("horn takes either `rate=` or `exponent=`".into()),
            };
            Domain::horn(d()?, profile, p.get("start").unwrap_or(0.0))
        }
        "full" | "rd" => {
            p.check_keys(&["d"])?;
            Ok(Domain::full(d()?))
        }
        other => return Err(format!("unknown domain `{other}`")),
    };
    dom.map_err(|e| e.to_string())
}

pub fn measure(s: &str, default_dim: Option<usize>) -> Res<MeasureSpec> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("lebesgue:") {
        return Ok(MeasureSpec::lebesgue(domain(rest, default_dim)?));
    }
    let p = split(s)?;
    match p.name {
        "sphere" if s.contains('(') => {
            if p.args.len() != 2 {
                return Err("`sphere(c,r)` takes 2 arguments".into());
            }
            let d = p.dim(default_dim)?;
            MeasureSpec::sphere(broadcast(p.args[0], d), p.args[1]).map_err(|e| e.to_string())
        }
        "sphere" => {
            p.check_keys(&["d", "r", "c"])?;
            let d = p.dim(default_dim)?;
            MeasureSpec::sphere(broadcast(p.get("c").unwrap_or(0.0), d), p.get("r").unwrap_or(1.0))
                .map_err(|e| e.to_string())
        }
        "zero" => {
            let d = p.dim(default_dim)?;
            MeasureSpec::atoms(d, Vec::new()).map_err(|e| e.to_string())
        }
        other => Err(format!("unknown measure `{other}` (try lebesgue:<domain> or sphere(c,r))")),
    }
}
