//! Where a subcommand gets its network: a TOML experiment file or a named
//! built-in topology.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fpolicy::config::{ExperimentFile, KSpec, WeightSpec};
use fpolicy::{topologies, NetworkModel};

/// Parses `example`, `single-relay[:p]`, `chain:N[:p]`, `pair[:p_dest[:p_cross]]`
/// and `line:H[:forward[:backward[:skip]]]`.
pub fn builtin(name: &str) -> Result<NetworkModel> {
    let mut parts = name.split(':');
    let kind = parts.next().unwrap_or_default();
    let nums: Vec<f64> = parts
        .map(|p| p.parse::<f64>().with_context(|| format!("bad number {p:?} in network {name:?}")))
        .collect::<Result<_>>()?;
    let arg = |i: usize, default: f64| nums.get(i).copied().unwrap_or(default);
    let prob = |x: f64| -> Result<f64> {
        if x > 0.0 && x <= 1.0 {
            Ok(x)
        } else {
            bail!("link probability {x} outside (0, 1]")
        }
    };
    let count = |x: f64| -> Result<usize> {
        if x >= 1.0 && x.fract() == 0.0 && x <= 16.0 {
            Ok(x as usize)
        } else {
            bail!("relay count {x} must be an integer in 1..=16")
        }
    };
    Ok(match kind {
        "example" => topologies::four_node_example(),
        "single-relay" => topologies::single_relay(prob(arg(0, 0.5))?),
        "chain" if !nums.is_empty() => topologies::chain(count(nums[0])?, prob(arg(1, 0.5))?),
        "pair" => topologies::symmetric_pair(prob(arg(0, 0.5))?, prob(arg(1, 0.5))?),
        "line" if !nums.is_empty() => {
            let (fw, bw, skip) = (arg(1, 0.5), arg(2, 0.3), arg(3, 0.2));
            if !(0.0..=1.0).contains(&bw) || !(0.0..=1.0).contains(&skip) {
                bail!("line probabilities must lie in [0, 1]");
            }
            topologies::line(count(nums[0])?, prob(fw)?, bw, skip)
        }
        _ => bail!("unknown network {name:?}"),
    })
}

/// Loaded network plus whatever else the experiment file carried.
pub struct Setup {
    pub file: Option<ExperimentFile>,
    pub model: NetworkModel,
    pub weight: WeightSpec,
}

pub fn load(config: Option<&Path>, network: Option<&str>, k: Option<f64>) -> Result<Setup> {
    let (file, model, mut weight) = match (config, network) {
        (Some(_), Some(_)) => bail!("--config and --network are mutually exclusive"),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let file = ExperimentFile::parse(&text)?;
            let model = file.model()?;
            let weight = file.weight.clone();
            (Some(file), model, weight)
        }
        (None, name) => (None, builtin(name.unwrap_or("example"))?, WeightSpec::default()),
    };
    if let Some(k) = k {
        weight = WeightSpec {
            family: "geometric".into(),
            k: Some(KSpec::Value(k)),
            table: None,
        };
    }
    Ok(Setup { file, model, weight })
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|x| {
            let v: f64 = x.trim().parse().with_context(|| format!("bad number {x:?}"))?;
            if !v.is_finite() || v < 0.0 {
                bail!("{x:?} must be a nonnegative finite number");
            }
            Ok(v)
        })
        .collect()
}
