//! Named built-in models with default parameters.

use std::collections::BTreeMap;

use serde::Serialize;

use super::PairPotential;
use crate::error::{Error, Result};
use crate::model::{Boundary, IntervalDensity, MarkSpace, ModelSpec, PositionSpace};

#[derive(Debug, Clone, Serialize)]
pub struct RegistryEntry {
    pub name: String,
    pub description: &'static str,
    /// Every parameter after defaults and overrides are merged.
    pub parameters: BTreeMap<String, f64>,
    #[serde(skip)]
    pub model: ModelSpec,
}

const COMMON: &[(&str, f64)] = &[
    ("dimension", 1.0),
    ("side", 1.0),
    ("periodic", 0.0),
    ("z", 0.05),
    ("beta", 1.0),
    ("cutoff", 0.0),
];

struct Builtin {
    name: &'static str,
    description: &'static str,
    defaults: &'static [(&'static str, f64)],
}

const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "ideal-gas",
        description: "phi = 0, spins +-1 with weights 1/2",
        defaults: &[],
    },
    Builtin {
        name: "toy-repulsive-spin",
        description: "phi = amplitude (1 + coupling s t) exp(-(r/length)^2), spins +-1 with weights 1/2, B = 0",
        defaults: &[("amplitude", 1.0), ("coupling", 0.5), ("length", 0.2)],
    },
    Builtin {
        name: "hard-core",
        description: "phi = +inf for r < diameter, spins +-1 with weights 1/2",
        defaults: &[("diameter", 0.05)],
    },
    Builtin {
        name: "ferrofluid",
        description: "phi = a r^-(d+1) + j0 exp(-r/length) s t, marks uniform on [-1, 1] with mass 1",
        defaults: &[("a", 0.05), ("j0", 1.0), ("length", 0.1), ("stability_b", -1.0)],
    },
    Builtin {
        name: "planar-rotator",
        description: "phi = a r^-(d+1) - j0 exp(-r/length) cos(theta - theta'), angles uniform with mass 1",
        defaults: &[("a", 0.05), ("j0", 1.0), ("length", 0.1), ("stability_b", -1.0)],
    },
    Builtin {
        name: "continuum-potts",
        description: "phi = repulsion 1{r < reach}(1 - delta) + hard core below core, q labels with weights 1/q",
        defaults: &[("q", 3.0), ("repulsion", 1.0), ("reach", 0.1), ("core", 0.02)],
    },
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|b| b.name).collect()
}

/// Look up a built-in by name and apply parameter overrides. A `cutoff`
/// above zero truncates the potential at that range; a negative
/// `stability_b` means "derive it".
pub fn builtin(name: &str, overrides: &BTreeMap<String, f64>) -> Result<RegistryEntry> {
    let entry = BUILTINS
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| Error::UnknownModel(name.to_string()))?;
    let mut p: BTreeMap<String, f64> = COMMON
        .iter()
        .chain(entry.defaults)
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    for (k, v) in overrides {
        match p.get_mut(k) {
            Some(slot) => *slot = *v,
            None => {
                return Err(Error::InvalidModel(format!("model `{name}` has no parameter `{k}`")));
            }
        }
    }
    let dim = p["dimension"];
    if !(dim >= 1.0 && dim.fract() == 0.0) {
        return Err(Error::InvalidModel(format!("dimension must be a positive integer, got {dim}")));
    }
    let d = dim as usize;
    let boundary = if p["periodic"] != 0.0 { Boundary::Periodic } else { Boundary::Free };
    let space = PositionSpace::new(vec![p["side"]; d], boundary)?;
    let declared_b = p.get("stability_b").copied().filter(|b| *b >= 0.0);

    let (marks, potential) = match name {
        "ideal-gas" => (MarkSpace::spins(), PairPotential::zero()),
        "toy-repulsive-spin" => (
            MarkSpace::spins(),
            PairPotential::new(
                "toy-repulsive-spin",
                super::Profile::ToyRepulsiveSpin {
                    amplitude: p["amplitude"],
                    coupling: p["coupling"],
                    length: p["length"],
                },
                0.0,
                None,
            )?,
        ),
        "hard-core" => (MarkSpace::spins(), PairPotential::hard_core(p["diameter"])?),
        "ferrofluid" => (
            MarkSpace::Interval {
                lower: -1.0,
                upper: 1.0,
                density: IntervalDensity::Uniform { mass: 1.0 },
            },
            PairPotential::ferrofluid(p["a"], p["j0"], p["length"], d, declared_b)?,
        ),
        "planar-rotator" => (
            MarkSpace::Circle { mass: 1.0 },
            PairPotential::planar_rotator(p["a"], p["j0"], p["length"], d, declared_b)?,
        ),
        "continuum-potts" => {
            let q = p["q"];
            if !(q >= 1.0 && q.fract() == 0.0) {
                return Err(Error::InvalidModel(format!("q must be a positive integer, got {q}")));
            }
            let q = q as i32;
            (
                MarkSpace::Discrete {
                    labels: (1..=q).collect(),
                    weights: vec![1.0 / q as f64; q as usize],
                },
                PairPotential::continuum_potts(p["repulsion"], p["reach"], p["core"])?,
            )
        }
        _ => unreachable!("name checked against the table"),
    };
    if name == "toy-repulsive-spin" && p["coupling"].abs() > 1.0 {
        return Err(Error::InvalidModel("|coupling| > 1 makes the toy potential negative".into()));
    }
    let potential = if p["cutoff"] > 0.0 {
        potential.truncated(p["cutoff"])?
    } else {
        potential
    };
    if let Some(b) = p.get_mut("stability_b") {
        *b = potential.stability_b();
    }
    let model = ModelSpec::new(space, marks, p["z"], p["beta"], potential)?;
    Ok(RegistryEntry {
        name: name.to_string(),
        description: entry.description,
        parameters: p,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_constructs_with_defaults() {
        for n in builtin_names() {
            let e = builtin(n, &BTreeMap::new()).unwrap();
            assert_eq!(e.model.space.dimension(), 1);
            assert!(e.model.potential.stability_b() >= 0.0);
        }
    }

    #[test]
    fn overrides_and_unknowns() {
        let mut o = BTreeMap::new();
        o.insert("cutoff".to_string(), 0.3);
        o.insert("z".to_string(), 0.1);
        let e = builtin("toy-repulsive-spin", &o).unwrap();
        assert_eq!(e.model.potential.range(), Some(0.3));
        assert_eq!(e.model.activity, 0.1);
        o.insert("nonsense".to_string(), 1.0);
        assert!(builtin("toy-repulsive-spin", &o).is_err());
        assert!(matches!(builtin("nope", &BTreeMap::new()), Err(Error::UnknownModel(_))));
    }
}
