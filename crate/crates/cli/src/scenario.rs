//! Scenario files.
//!
//! A scenario is a TOML document with a `[device]` table, an optional
//! `[pulse]` and `[grid]` table, an `[output]` table and exactly one command
//! table named after the command being run. Units are part of the key names.
//!
//! ```toml
//! [device]
//! kappa_per_us = "matched"
//! gamma_r_per_us = 1e-3
//!
//! [device.comb]
//! n = 5
//! spacing_mhz = 13
//! g_mhz = 13
//! gamma_per_us = 1e-3
//!
//! [simulate]
//! ```

use std::path::PathBuf;

use combmem::analytics::{kappa_matched, summarize_comb};
use combmem::design::{CombScaling, FitParam, KappaMode};
use combmem::presets;
use combmem::time::GridPolicy;
use combmem::{build_uniform_comb, Centering, CommonResonator, DeviceConfig, MiniResonator, Pulse, PulseShape};
use toml::{Table, Value};

use crate::error::CliError;

pub const COMMANDS: [&str; 6] = ["spectrum", "simulate", "sweep", "match", "fit", "compare"];

#[derive(Clone, Debug)]
pub struct Scenario {
    pub device: DeviceConfig,
    pub pulse: Pulse,
    pub policy: GridPolicy,
    pub output_dir: Option<PathBuf>,
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Spectrum {
        omega_max: Option<f64>,
        points: usize,
    },
    Simulate,
    Sweep {
        deltas: Vec<f64>,
        reoptimize_kappa: bool,
        scaling: CombScaling,
    },
    Match {
        bounds: Option<(f64, f64)>,
    },
    Fit {
        target_eta: f64,
        target_echo_time: f64,
        free: Vec<FitParam>,
        kappa_mode: KappaMode,
    },
    Compare {
        open_multiplier: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Simulate => "simulate",
            Command::Sweep { .. } => "sweep",
            Command::Match { .. } => "match",
            Command::Fit { .. } => "fit",
            Command::Compare { .. } => "compare",
        }
    }
}

/// Collects every problem found while walking the document.
struct Checker {
    errs: Vec<String>,
}

impl Checker {
    fn bad(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.errs.push(format!("{path}: {msg}"));
    }

    fn only(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.bad(&join(path, k), "unknown key");
            }
        }
    }

    fn table<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a Table> {
        match t.get(key) {
            None => None,
            Some(Value::Table(x)) => Some(x),
            Some(_) => {
                self.bad(&join(path, key), "expected a table");
                None
            }
        }
    }

    fn num(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        match t.get(key) {
            None => None,
            Some(v) => match as_f64(v) {
                Some(x) => Some(x),
                None => {
                    self.bad(&join(path, key), "expected a number");
                    None
                }
            },
        }
    }

    fn req_num(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        if !t.contains_key(key) {
            self.bad(&join(path, key), "missing");
        }
        self.num(t, path, key)
    }

    fn string<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a str> {
        match t.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.bad(&join(path, key), "expected a string");
                None
            }
        }
    }

    fn boolean(&mut self, t: &Table, path: &str, key: &str) -> Option<bool> {
        match t.get(key) {
            None => None,
            Some(Value::Boolean(b)) => Some(*b),
            Some(_) => {
                self.bad(&join(path, key), "expected true or false");
                None
            }
        }
    }

    fn num_list(&mut self, t: &Table, path: &str, key: &str) -> Option<Vec<f64>> {
        let p = join(path, key);
        match t.get(key) {
            None => None,
            Some(Value::Array(a)) => {
                let out: Vec<Option<f64>> = a.iter().map(as_f64).collect();
                if out.iter().any(Option::is_none) {
                    self.bad(&p, "expected an array of numbers");
                    None
                } else {
                    Some(out.into_iter().flatten().collect())
                }
            }
            Some(_) => {
                self.bad(&p, "expected an array of numbers");
                None
            }
        }
    }

    /// Coupling given either as `g_per_us` or as `g_mhz`.
    fn coupling(&mut self, t: &Table, path: &str) -> Option<f64> {
        let per_us = self.num(t, path, "g_per_us");
        let mhz = self.num(t, path, "g_mhz");
        match (t.contains_key("g_per_us"), t.contains_key("g_mhz")) {
            (true, true) => {
                self.bad(path, "give only one of g_per_us and g_mhz");
                None
            }
            (false, false) => {
                self.bad(&join(path, "g_per_us"), "missing (or give g_mhz)");
                None
            }
            _ => per_us.or(mhz.map(presets::coupling_from_mhz)),
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn parse_enum<T: Copy>(c: &mut Checker, path: &str, s: Option<&str>, options: &[(&str, T)], default: T) -> T {
    match s {
        None => default,
        Some(s) => match options.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                c.bad(
                    path,
                    format!("unknown value {s:?} (expected one of {})", names.join(", ")),
                );
                default
            }
        },
    }
}

enum Kappa {
    Value(f64),
    Matched,
}

fn parse_device(c: &mut Checker, root: &Table) -> Option<DeviceConfig> {
    let Some(dev) = c.table(root, "", "device") else {
        if !root.contains_key("device") {
            c.bad("device", "missing");
        }
        return None;
    };
    c.only(
        dev,
        "device",
        &["kappa_per_us", "gamma_r_per_us", "detuning_mhz", "comb", "minis"],
    );
    let kappa = match dev.get("kappa_per_us") {
        None => {
            c.bad("device.kappa_per_us", "missing (give a rate or \"matched\")");
            None
        }
        Some(Value::String(s)) if s == "matched" => Some(Kappa::Matched),
        Some(v) => match as_f64(v) {
            Some(x) => Some(Kappa::Value(x)),
            None => {
                c.bad("device.kappa_per_us", "expected a number or \"matched\"");
                None
            }
        },
    };
    let gamma_r = c.num(dev, "device", "gamma_r_per_us").unwrap_or(0.0);
    let common_detuning = c.num(dev, "device", "detuning_mhz").unwrap_or(0.0);

    let minis = match (dev.get("comb"), dev.get("minis")) {
        (Some(_), Some(_)) => {
            c.bad("device", "give either [device.comb] or [[device.minis]], not both");
            None
        }
        (None, None) => {
            c.bad("device", "missing [device.comb] or [[device.minis]]");
            None
        }
        (Some(_), None) => parse_comb(c, dev),
        (None, Some(_)) => parse_minis(c, dev),
    };

    let (minis, kappa) = (minis?, kappa?);
    let mut cfg = DeviceConfig::new(minis, CommonResonator::new(f64::NAN, common_detuning, gamma_r));
    cfg.common.kappa = match kappa {
        Kappa::Value(k) => k,
        Kappa::Matched => match summarize_comb(&cfg) {
            Ok(s) => kappa_matched(&s, gamma_r),
            Err(e) => {
                c.bad("device.kappa_per_us", format!("\"matched\" needs a comb: {e}"));
                return None;
            }
        },
    };
    if let Err(combmem::Error::Validation(vs)) = cfg.validate() {
        for v in vs {
            c.bad(&format!("device.{}", v.path), v.message);
        }
        return None;
    }
    Some(cfg)
}

fn parse_comb(c: &mut Checker, dev: &Table) -> Option<Vec<MiniResonator>> {
    let path = "device.comb";
    let comb = c.table(dev, "device", "comb")?;
    c.only(
        comb,
        path,
        &["n", "spacing_mhz", "g_per_us", "g_mhz", "gamma_per_us", "centering"],
    );
    let n = match comb.get("n") {
        Some(Value::Integer(n)) if *n >= 1 => Some(*n as usize),
        Some(_) => {
            c.bad("device.comb.n", "expected a positive integer");
            None
        }
        None => {
            c.bad("device.comb.n", "missing");
            None
        }
    };
    let spacing = c.req_num(comb, path, "spacing_mhz");
    let g = c.coupling(comb, path);
    let gamma = c.num(comb, path, "gamma_per_us").unwrap_or(0.0);
    let s = c.string(comb, path, "centering");
    let centering = parse_enum(
        c,
        "device.comb.centering",
        s,
        &[
            ("tooth_at_center", Centering::ToothAtCenter),
            ("midpoint_at_center", Centering::MidpointAtCenter),
        ],
        Centering::ToothAtCenter,
    );
    match build_uniform_comb(n?, spacing?, g?, gamma, centering) {
        Ok(m) => Some(m),
        Err(e) => {
            c.bad(path, e);
            None
        }
    }
}

fn parse_minis(c: &mut Checker, dev: &Table) -> Option<Vec<MiniResonator>> {
    let Some(Value::Array(items)) = dev.get("minis") else {
        c.bad("device.minis", "expected an array of tables");
        return None;
    };
    let mut out = Vec::with_capacity(items.len());
    let mut ok = true;
    for (i, item) in items.iter().enumerate() {
        let path = format!("device.minis[{i}]");
        let Value::Table(t) = item else {
            c.bad(&path, "expected a table");
            ok = false;
            continue;
        };
        c.only(t, &path, &["detuning_mhz", "gamma_per_us", "g_per_us", "g_mhz"]);
        let d = c.req_num(t, &path, "detuning_mhz");
        let gamma = c.num(t, &path, "gamma_per_us").unwrap_or(0.0);
        let g = c.coupling(t, &path);
        match (d, g) {
            (Some(d), Some(g)) => out.push(MiniResonator::new(d, gamma, g)),
            _ => ok = false,
        }
    }
    ok.then_some(out)
}

fn parse_pulse(c: &mut Checker, root: &Table, device: Option<&DeviceConfig>) -> Option<Pulse> {
    let default = device
        .and_then(|d| d.median_spacing().ok())
        .map(presets::reference_pulse);
    let Some(t) = c.table(root, "", "pulse") else {
        if default.is_none() && device.is_some() {
            c.bad("pulse", "missing (no default without a comb spacing)");
        }
        return default;
    };
    let path = "pulse";
    c.only(
        t,
        path,
        &["shape", "amplitude", "center_us", "fwhm_us", "carrier_offset_mhz"],
    );
    let s = c.string(t, path, "shape");
    let shape = parse_enum(
        c,
        "pulse.shape",
        s,
        &[
            ("gaussian", PulseShape::Gaussian),
            ("rectangular", PulseShape::Rectangular),
        ],
        PulseShape::Gaussian,
    );
    let amplitude = c.num(t, path, "amplitude");
    let center = c.num(t, path, "center_us");
    let fwhm = c.num(t, path, "fwhm_us");
    let carrier = c.num(t, path, "carrier_offset_mhz").unwrap_or(0.0);
    let fwhm = match (fwhm, default) {
        (Some(f), _) => f,
        (None, Some(p)) => p.power_fwhm,
        (None, None) => {
            c.bad("pulse.fwhm_us", "missing");
            return None;
        }
    };
    let mut p = match shape {
        PulseShape::Gaussian => Pulse::gaussian(1.0, presets::LEAD_FWHMS * fwhm, fwhm),
        PulseShape::Rectangular => Pulse::rectangular(1.0, presets::LEAD_FWHMS * fwhm, fwhm),
    };
    p.amplitude = amplitude.unwrap_or(1.0);
    if let Some(t0) = center {
        p.center_time = t0;
    }
    p.carrier_offset = carrier;
    if let Err(combmem::Error::Validation(vs)) = p.validate() {
        for v in vs {
            c.bad(&format!("pulse.{}", v.path), v.message);
        }
        return None;
    }
    Some(p)
}

fn parse_grid(c: &mut Checker, root: &Table) -> GridPolicy {
    let mut policy = GridPolicy::default();
    let Some(t) = c.table(root, "", "grid") else {
        return policy;
    };
    c.only(t, "grid", &["dt_us", "lead_fwhms", "trailing_periods"]);
    let positive = |c: &mut Checker, key: &str, v: Option<f64>| {
        if let Some(x) = v {
            if !(x > 0.0) || !x.is_finite() {
                c.bad(&join("grid", key), "must be positive");
            }
        }
        v
    };
    let dt = c.num(t, "grid", "dt_us");
    policy.dt = positive(c, "dt_us", dt);
    let lead = c.num(t, "grid", "lead_fwhms");
    if let Some(x) = positive(c, "lead_fwhms", lead) {
        policy.lead_fwhms = x;
    }
    let trail = c.num(t, "grid", "trailing_periods");
    if let Some(x) = positive(c, "trailing_periods", trail) {
        policy.trailing_periods = x;
    }
    policy
}

fn parse_command(c: &mut Checker, root: &Table, wanted: &str) -> Option<Command> {
    let present: Vec<&str> = COMMANDS.iter().copied().filter(|k| root.contains_key(*k)).collect();
    match present.as_slice() {
        [] => {
            c.bad(wanted, format!("missing [{wanted}] command table"));
            return None;
        }
        [one] if *one == wanted => {}
        [one] => {
            c.bad(one, format!("scenario is for `{one}` but `{wanted}` was requested"));
            return None;
        }
        many => {
            c.bad(
                "",
                format!("exactly one command table allowed, found {}", many.join(", ")),
            );
            return None;
        }
    }
    let t = c.table(root, "", wanted)?;
    let positive = |c: &mut Checker, key: &str, v: Option<f64>| match v {
        Some(x) if !(x > 0.0) || !x.is_finite() => {
            c.bad(&join(wanted, key), "must be positive");
            None
        }
        v => v,
    };
    match wanted {
        "spectrum" => {
            c.only(t, wanted, &["omega_max_rad_per_us", "points"]);
            let w = c.num(t, wanted, "omega_max_rad_per_us");
            let omega_max = positive(c, "omega_max_rad_per_us", w);
            let points = match t.get("points") {
                None => 4001,
                Some(Value::Integer(n)) if *n >= 2 => *n as usize,
                Some(_) => {
                    c.bad("spectrum.points", "expected an integer >= 2");
                    2
                }
            };
            Some(Command::Spectrum { omega_max, points })
        }
        "simulate" => {
            c.only(t, wanted, &[]);
            Some(Command::Simulate)
        }
        "sweep" => {
            c.only(t, wanted, &["deltas_mhz", "reoptimize_kappa", "scaling"]);
            let deltas = c.num_list(t, wanted, "deltas_mhz");
            if !t.contains_key("deltas_mhz") {
                c.bad("sweep.deltas_mhz", "missing");
            }
            if let Some(d) = &deltas {
                if d.is_empty() {
                    c.bad("sweep.deltas_mhz", "needs at least one value");
                }
                for (i, x) in d.iter().enumerate() {
                    if !(*x > 0.0) || !x.is_finite() {
                        c.bad(&format!("sweep.deltas_mhz[{i}]"), "spacing must be positive");
                    }
                }
            }
            let reoptimize_kappa = c.boolean(t, wanted, "reoptimize_kappa").unwrap_or(false);
            let s = c.string(t, wanted, "scaling");
            let scaling = parse_enum(
                c,
                "sweep.scaling",
                s,
                &[
                    ("proportional", CombScaling::Proportional),
                    ("fixed", CombScaling::Fixed),
                ],
                CombScaling::Proportional,
            );
            Some(Command::Sweep {
                deltas: deltas?,
                reoptimize_kappa,
                scaling,
            })
        }
        "match" => {
            c.only(t, wanted, &["kappa_bounds_per_us"]);
            let bounds = match c.num_list(t, wanted, "kappa_bounds_per_us") {
                None => None,
                Some(b) if b.len() == 2 && b[0] > 0.0 && b[1] > b[0] && b[1].is_finite() => Some((b[0], b[1])),
                Some(_) => {
                    c.bad(
                        "match.kappa_bounds_per_us",
                        "expected [lower, upper] with 0 < lower < upper",
                    );
                    None
                }
            };
            Some(Command::Match { bounds })
        }
        "fit" => {
            c.only(t, wanted, &["target_eta", "target_echo_time_ns", "free", "kappa"]);
            let eta = c.req_num(t, wanted, "target_eta");
            if let Some(e) = eta {
                if !(0.0..=1.0).contains(&e) {
                    c.bad("fit.target_eta", "must lie in [0, 1]");
                }
            }
            let te = c.req_num(t, wanted, "target_echo_time_ns");
            let te = positive(c, "target_echo_time_ns", te);
            let free = match t.get("free") {
                Some(Value::Array(a)) if !a.is_empty() => {
                    let mut out = Vec::new();
                    for (i, v) in a.iter().enumerate() {
                        let opts = [
                            ("g", FitParam::G),
                            ("gamma", FitParam::Gamma),
                            ("gamma_r", FitParam::GammaR),
                            ("kappa", FitParam::Kappa),
                        ];
                        match v.as_str().and_then(|s| opts.iter().find(|o| o.0 == s)) {
                            Some((_, p)) => out.push(*p),
                            None => c.bad(
                                &format!("fit.free[{i}]"),
                                "expected one of \"g\", \"gamma\", \"gamma_r\", \"kappa\"",
                            ),
                        }
                    }
                    Some(out)
                }
                Some(_) => {
                    c.bad("fit.free", "expected a non-empty array of parameter names");
                    None
                }
                None => {
                    c.bad("fit.free", "missing");
                    None
                }
            };
            let s = c.string(t, wanted, "kappa");
            let kappa_mode = parse_enum(
                c,
                "fit.kappa",
                s,
                &[("matched", KappaMode::Matched), ("fixed", KappaMode::Fixed)],
                KappaMode::Matched,
            );
            Some(Command::Fit {
                target_eta: eta?,
                target_echo_time: te? * 1e-3,
                free: free?,
                kappa_mode,
            })
        }
        "compare" => {
            c.only(t, wanted, &["open_multiplier"]);
            let m = c.num(t, wanted, "open_multiplier");
            let m = positive(c, "open_multiplier", m);
            Some(Command::Compare {
                open_multiplier: m.unwrap_or(presets::OPEN_KAPPA_MULTIPLIER),
            })
        }
        _ => unreachable!("command names are checked by the caller"),
    }
}

/// Parse and validate a scenario for `command`, reporting every bad field.
pub fn parse(text: &str, command: &str) -> Result<Scenario, CliError> {
    let root: Table = toml::from_str(text).map_err(|e| CliError::Validation(vec![format!("syntax: {e}")]))?;
    let mut c = Checker { errs: Vec::new() };
    let mut allowed: Vec<&str> = vec!["device", "pulse", "grid", "output"];
    allowed.extend(COMMANDS);
    c.only(&root, "", &allowed);

    let device = parse_device(&mut c, &root);
    let pulse = parse_pulse(&mut c, &root, device.as_ref());
    let policy = parse_grid(&mut c, &root);
    let output_dir = c.table(&root, "", "output").and_then(|t| {
        c.only(t, "output", &["dir"]);
        c.string(t, "output", "dir").map(PathBuf::from)
    });
    let command = parse_command(&mut c, &root, command);

    match (device, pulse, command) {
        (Some(device), Some(pulse), Some(command)) if c.errs.is_empty() => Ok(Scenario {
            device,
            pulse,
            policy,
            output_dir,
            command,
        }),
        _ => {
            if c.errs.is_empty() {
                c.errs.push("scenario: incomplete".into());
            }
            Err(CliError::Validation(c.errs))
        }
    }
}
