//! `dotted.key = value` scenario files.
//!
//! ```text
//! # two operators, dynamic sharing
//! scenario.p_linear = 1000
//! utility.family = cobb_douglas
//! traffic.op1.p_high = 0.25
//! scheme.kind = dynamic
//! scheme.trade_mhz = auto
//! scheme.balance_cap_mhz = 50
//! scheme.punishment_T = auto
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::dynamic::{choose_delta, delta_grid, DynamicParams};
use crate::entry::{EntryParams, DEFAULT_ENTRY_CAP};
use crate::error::{Error, Result};
use crate::sim::{default_horizon, Scenario, Scheme, DEFAULT_TAIL_TOLERANCE};
use crate::spectrum::Freq;
use crate::static_sharing::{min_punishment_length, Punishment, StaticParams};
use crate::traffic::{LevelDistribution, TrafficSpec};
use crate::utility::{UtilityFamily, UtilityModel};
use crate::verifier::min_punishment_dynamic;

/// Resolution of the trade-quantum grid scanned for `scheme.trade_mhz = auto`.
pub const AUTO_TRADE_STEP_MHZ: f64 = 1.0;

const FIXED_KEYS: &[&str] = &[
    "scenario.n",
    "scenario.w_mhz",
    "scenario.p_linear",
    "scenario.delta",
    "utility.family",
    "utility.a",
    "utility.s",
    "utility.e",
    "scheme.kind",
    "scheme.trade_mhz",
    "scheme.balance_cap_mhz",
    "scheme.punishment_T",
    "entry.cost",
    "entry.arrival_slots",
    "sim.horizon",
    "sim.seed",
    "sim.replications",
];

struct Entry {
    value: String,
    line: usize,
}

struct Keys {
    map: BTreeMap<String, Entry>,
    /// Line just past the end of the file, used for missing keys.
    eof: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn is_traffic_key(key: &str) -> Option<usize> {
    let rest = key.strip_prefix("traffic.op")?;
    let (idx, field) = rest.split_once('.')?;
    if field != "p_high" && field != "levels" {
        return None;
    }
    idx.parse::<usize>().ok()
}

impl Keys {
    fn read(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut eof = 1;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            eof = line + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected `key = value`, got `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !FIXED_KEYS.contains(&key) && is_traffic_key(key).is_none() {
                return Err(parse_err(line, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(parse_err(line, format!("`{key}` has no value")));
            }
            if let Some(prev) = map.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            ) {
                return Err(parse_err(line, format!("`{key}` already set on line {}", prev.line)));
            }
        }
        Ok(Keys { map, eof })
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.map.get(key)
    }

    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(self.eof, |e| e.line)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| parse_err(e.line, format!("`{key}`: cannot parse `{}`", e.value))),
        }
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&self, key: &str, scheme: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| parse_err(self.eof, format!("`{key}` is required for scheme `{scheme}`")))
    }

    fn check(&self, key: &str, ok: bool, what: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(parse_err(self.line(key), format!("`{key}` {what}")))
        }
    }

    /// Rejects keys the chosen scheme does not use.
    fn forbid(&self, keys: &[&str], scheme: &str) -> Result<()> {
        for key in keys {
            if let Some(e) = self.raw(key) {
                return Err(parse_err(e.line, format!("`{key}` is not used by scheme `{scheme}`")));
            }
        }
        Ok(())
    }

    /// `auto`, or a value of type `T`.
    fn auto_or<T: FromStr>(&self, key: &str) -> Result<Option<Option<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) if e.value == "auto" => Ok(Some(None)),
            Some(_) => Ok(Some(self.get(key)?)),
        }
    }
}

enum PunishmentSetting {
    Auto,
    Fixed(Punishment),
}

fn punishment_setting(keys: &Keys, scheme: &str) -> Result<PunishmentSetting> {
    let key = "scheme.punishment_T";
    let entry = keys
        .raw(key)
        .ok_or_else(|| parse_err(keys.eof, format!("`{key}` is required for scheme `{scheme}`")))?;
    match entry.value.as_str() {
        "auto" => Ok(PunishmentSetting::Auto),
        "grim" => Ok(PunishmentSetting::Fixed(Punishment::Grim)),
        v => {
            let t: u32 = v
                .parse()
                .map_err(|_| parse_err(entry.line, format!("`{key}` must be a positive integer, `auto` or `grim`")))?;
            let p = Punishment::slots(t).map_err(|e| parse_err(entry.line, e.to_string()))?;
            Ok(PunishmentSetting::Fixed(p))
        }
    }
}

/// `"0:0.5, 1:0.5"` as level:probability pairs.
fn parse_levels(value: &str, line: usize) -> Result<LevelDistribution> {
    let mut levels = Vec::new();
    for part in value.split(',') {
        let (l, p) = part
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("level `{}` is not `level:probability`", part.trim())))?;
        let l: f64 = l.trim().parse().map_err(|_| parse_err(line, format!("bad level `{}`", l.trim())))?;
        let p: f64 = p.trim().parse().map_err(|_| parse_err(line, format!("bad probability `{}`", p.trim())))?;
        levels.push((l, p));
    }
    LevelDistribution::finite(levels).map_err(|e| parse_err(line, e.to_string()))
}

fn parse_traffic(keys: &Keys, n: usize) -> Result<TrafficSpec> {
    for (key, e) in &keys.map {
        if let Some(i) = is_traffic_key(key) {
            if i == 0 || i > n {
                return Err(parse_err(e.line, format!("`{key}`: operator index outside 1..={n}")));
            }
        }
    }
    let mut ops = Vec::with_capacity(n);
    for i in 1..=n {
        let p_key = format!("traffic.op{i}.p_high");
        let l_key = format!("traffic.op{i}.levels");
        let dist = match (keys.raw(&p_key), keys.raw(&l_key)) {
            (Some(_), Some(e)) => {
                return Err(parse_err(e.line, format!("operator {i} sets both p_high and levels")));
            }
            (None, Some(e)) => parse_levels(&e.value, e.line)?,
            (_, None) => {
                let p: f64 = keys.get_or(&p_key, 0.5)?;
                keys.check(&p_key, (0.0..=1.0).contains(&p), "must lie in [0, 1]")?;
                LevelDistribution::two_level(p)?
            }
        };
        ops.push(dist);
    }
    TrafficSpec::new(ops)
}

fn parse_family(keys: &Keys) -> Result<UtilityFamily> {
    let family: String = keys.get_or("utility.family", "linear".to_string())?;
    match family.as_str() {
        "linear" => {
            keys.forbid(&["utility.a", "utility.s", "utility.e"], "linear utility")?;
            Ok(UtilityFamily::Linear)
        }
        "cobb_douglas" => {
            let a: f64 = keys.get_or("utility.a", 24.0)?;
            let s: f64 = keys.get_or("utility.s", 0.5)?;
            let e: f64 = keys.get_or("utility.e", 0.9)?;
            keys.check("utility.a", a > 0.0 && a.is_finite(), "must be positive")?;
            keys.check("utility.s", s > 0.0 && s.is_finite(), "must be positive")?;
            keys.check("utility.e", e > 0.0 && e < 1.0, "must lie in (0, 1)")?;
            Ok(UtilityFamily::CobbDouglas { a, s, e })
        }
        other => Err(parse_err(
            keys.line("utility.family"),
            format!("unknown utility family `{other}` (linear, cobb_douglas)"),
        )),
    }
}

/// Parses and validates a scenario. `auto` settings are resolved here, which
/// may run the verifier and surface its errors unchanged.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let keys = Keys::read(text)?;
    let n: usize = keys.get_or("scenario.n", 2)?;
    keys.check("scenario.n", n >= 1, "must be at least 1")?;
    let w: f64 = keys.get_or("scenario.w_mhz", 100.0)?;
    keys.check("scenario.w_mhz", w > 0.0 && w.is_finite(), "must be positive")?;
    let power: f64 = keys.get_or("scenario.p_linear", 100.0)?;
    keys.check("scenario.p_linear", power > 0.0 && power.is_finite(), "must be positive")?;
    let discount: f64 = keys.get_or("scenario.delta", 0.99)?;
    keys.check("scenario.delta", (0.0..1.0).contains(&discount), "must lie in [0, 1)")?;
    let family = parse_family(&keys)?;
    let model = UtilityModel::shannon(w, power, family).map_err(|e| parse_err(keys.line("scenario.w_mhz"), e.to_string()))?;
    let traffic = parse_traffic(&keys, n)?;

    let kind: String = keys
        .get("scheme.kind")?
        .ok_or_else(|| parse_err(keys.eof, "`scheme.kind` is required"))?;
    let scheme = match kind.as_str() {
        "full" => {
            keys.forbid(
                &[
                    "scheme.trade_mhz",
                    "scheme.balance_cap_mhz",
                    "scheme.punishment_T",
                    "entry.cost",
                    "entry.arrival_slots",
                ],
                "full",
            )?;
            Scheme::FullSpectrum
        }
        "static" => {
            keys.forbid(
                &["scheme.trade_mhz", "scheme.balance_cap_mhz", "entry.cost", "entry.arrival_slots"],
                "static",
            )?;
            let punishment = match punishment_setting(&keys, "static")? {
                PunishmentSetting::Fixed(p) => p,
                PunishmentSetting::Auto => {
                    let base = StaticParams::uniform(n, Punishment::Slots(1))?;
                    Punishment::Slots(min_punishment_length(&model, &traffic, &base)?)
                }
            };
            Scheme::Static(StaticParams::uniform(n, punishment)?)
        }
        "entry" => {
            keys.forbid(&["scheme.trade_mhz", "scheme.balance_cap_mhz"], "entry")?;
            let cost: f64 = keys.require("entry.cost", "entry")?;
            keys.check("entry.cost", cost >= 0.0 && cost.is_finite(), "must be non-negative")?;
            let arrivals = match keys.raw("entry.arrival_slots") {
                None => (0..n as u64).collect(),
                Some(e) => e
                    .value
                    .split(',')
                    .map(|s| s.trim().parse::<u64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| parse_err(e.line, "`entry.arrival_slots` must be comma-separated slots"))?,
            };
            keys.check(
                "entry.arrival_slots",
                arrivals.len() == n,
                &format!("must list one slot per operator ({n})"),
            )?;
            let first = traffic.operators[0].clone();
            if traffic.operators.iter().any(|d| *d != first) {
                return Err(parse_err(keys.eof, "entry requires the same traffic for every operator"));
            }
            let punishment = match keys.raw("scheme.punishment_T") {
                None => None,
                Some(_) => match punishment_setting(&keys, "entry")? {
                    PunishmentSetting::Auto => None,
                    PunishmentSetting::Fixed(p) => Some(p),
                },
            };
            Scheme::Entry(EntryParams {
                cost,
                arrivals,
                traffic: first,
                n_cap: DEFAULT_ENTRY_CAP,
                punishment,
            })
        }
        "dynamic" => {
            keys.forbid(&["entry.cost", "entry.arrival_slots"], "dynamic")?;
            keys.check("scenario.n", n >= 2, "must be at least 2 for dynamic sharing")?;
            for i in 1..=n {
                let key = format!("traffic.op{i}.levels");
                if !traffic.operators[i - 1].is_binary() {
                    return Err(parse_err(
                        keys.line(&key),
                        format!("dynamic sharing needs two-level traffic (0 or 1), operator {i} has other levels"),
                    ));
                }
            }
            let cap_mhz: f64 = keys.require("scheme.balance_cap_mhz", "dynamic")?;
            keys.check("scheme.balance_cap_mhz", cap_mhz > 0.0 && cap_mhz.is_finite(), "must be positive")?;
            let cap = Freq::from_mhz(cap_mhz);
            let setting = punishment_setting(&keys, "dynamic")?;
            let trade_setting: Option<f64> = keys
                .auto_or("scheme.trade_mhz")?
                .ok_or_else(|| parse_err(keys.eof, "`scheme.trade_mhz` is required for scheme `dynamic`"))?;
            let bandwidth = model.bandwidth;
            let (trade, cap_steps, auto_t) = match trade_setting {
                None => {
                    let w_min = Freq::from_hz(bandwidth.hz() / n as i64);
                    let grid = delta_grid(w_min, Freq::from_mhz(AUTO_TRADE_STEP_MHZ))?;
                    let choice = choose_delta(&model, &traffic, cap, discount, &grid)?;
                    (choice.trade, choice.cap_steps, Some(choice.punishment))
                }
                Some(d) => {
                    keys.check("scheme.trade_mhz", d > 0.0 && d.is_finite(), "must be positive")?;
                    let trade = Freq::from_mhz(d);
                    let k = cap.hz() / trade.hz().max(1);
                    keys.check("scheme.balance_cap_mhz", k >= 1, "must be at least one trade quantum")?;
                    (trade, k, None)
                }
            };
            let punishment = match setting {
                PunishmentSetting::Fixed(p) => p,
                PunishmentSetting::Auto => match auto_t {
                    Some(t) => Punishment::Slots(t),
                    None => {
                        let w_mhz = Freq::from_hz(bandwidth.hz() / n as i64).mhz();
                        let bound = min_punishment_dynamic(&model, n, w_mhz, trade.mhz(), cap_steps)?;
                        Punishment::Slots(bound.t)
                    }
                },
            };
            let params = DynamicParams::new(n, bandwidth, trade, cap_steps, punishment)
                .map_err(|e| parse_err(keys.line("scheme.trade_mhz"), e.to_string()))?;
            Scheme::Dynamic(params)
        }
        other => {
            return Err(parse_err(
                keys.line("scheme.kind"),
                format!("unknown scheme `{other}` (full, static, entry, dynamic)"),
            ))
        }
    };

    let horizon = match keys.auto_or::<u64>("sim.horizon")? {
        None | Some(None) => default_horizon(discount, DEFAULT_TAIL_TOLERANCE),
        Some(Some(h)) => h,
    };
    keys.check("sim.horizon", horizon >= 1, "must be at least 1")?;
    let seed: u64 = keys.get_or("sim.seed", 1)?;
    let replications: usize = keys.get_or("sim.replications", 1)?;
    keys.check("sim.replications", replications >= 1, "must be at least 1")?;
    let scenario = Scenario {
        model,
        traffic,
        scheme,
        discount,
        horizon,
        seed,
        replications,
    };
    scenario
        .validate()
        .map_err(|e| parse_err(keys.line("scheme.kind"), e.to_string()))?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_full_spectrum() {
        let s = parse_scenario("scheme.kind = full\n").unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.model.bandwidth, Freq::from_mhz(100.0));
        assert_eq!(s.horizon, 1833);
        assert!(matches!(s.scheme, Scheme::FullSpectrum));
        assert_eq!(s.traffic.operators[1].p_high(), 0.5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of(parse_scenario("# c\nscheme.kind = full\nscenario.colour = red\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_scenario("scheme.kind = full\nscenario.delta = 1.5\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_scenario("scenario.n = 2\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_scenario("scheme.kind = full\nscheme.kind = static\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_scenario("scheme.kind = full\ntraffic.op3.p_high = 0.1\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_scenario("scheme.kind = full\nsim.replications = 0\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_scenario("scheme.kind = full\nscheme.trade_mhz = 5\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_scenario("scheme.kind = static\n").unwrap_err()), 2);
    }

    #[test]
    fn dynamic_rejects_multilevel_traffic() {
        let text = "scheme.kind = dynamic\nutility.family = cobb_douglas\ntraffic.op2.levels = 0:0.5, 0.5:0.25, 1:0.25\n\
                    scheme.trade_mhz = 10\nscheme.balance_cap_mhz = 50\nscheme.punishment_T = 5\n";
        assert_eq!(line_of(parse_scenario(text).unwrap_err()), 3);
    }

    #[test]
    fn auto_punishment_with_linear_utility_is_infeasible() {
        let text = "scheme.kind = dynamic\ntraffic.op1.p_high = 0.25\nscheme.trade_mhz = 10\n\
                    scheme.balance_cap_mhz = 50\nscheme.punishment_T = auto\n";
        assert!(matches!(parse_scenario(text), Err(Error::Infeasible(_))));
    }

    #[test]
    fn static_auto_and_grim() {
        let s = parse_scenario("scheme.kind = static\nscheme.punishment_T = auto\n").unwrap();
        match s.scheme {
            Scheme::Static(p) => assert_eq!(p.punishment, Punishment::Slots(3)),
            _ => unreachable!(),
        }
        let s = parse_scenario("scheme.kind = static\nscheme.punishment_T = grim # forever\n").unwrap();
        assert!(matches!(s.scheme, Scheme::Static(StaticParams { punishment: Punishment::Grim, .. })));
    }

    #[test]
    fn dynamic_auto_trade() {
        let text = "scheme.kind = dynamic\nscenario.p_linear = 1000\nutility.family = cobb_douglas\n\
                    traffic.op1.p_high = 0.25\nscheme.trade_mhz = auto\nscheme.balance_cap_mhz = 50\n\
                    scheme.punishment_T = auto\nsim.horizon = 100\n";
        let s = parse_scenario(text).unwrap();
        match s.scheme {
            Scheme::Dynamic(p) => {
                assert_eq!(p.trade, Freq::from_mhz(39.0));
                assert_eq!(p.cap_steps, 1);
            }
            _ => unreachable!(),
        }
        assert_eq!(s.horizon, 100);
    }

    #[test]
    fn entry_file() {
        let text = "scheme.kind = entry\nscenario.n = 3\nentry.cost = 40\nentry.arrival_slots = 0, 5, 9\n";
        let s = parse_scenario(text).unwrap();
        match s.scheme {
            Scheme::Entry(p) => {
                assert_eq!(p.arrivals, vec![0, 5, 9]);
                assert_eq!(p.cost, 40.0);
            }
            _ => unreachable!(),
        }
        let bad = "scheme.kind = entry\nscenario.n = 2\nentry.cost = 40\ntraffic.op2.p_high = 0.3\n";
        assert!(parse_scenario(bad).is_err());
    }
}
