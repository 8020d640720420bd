//! Family descriptors such as `ghz:n=3,d=2` and probe specifiers.

use std::collections::BTreeMap;
use std::path::Path;

use ksep_core::states::random_separable;
use ksep_core::{
    canonical_probe, ghz, load_state, product_pure, w_state, white_noise, ComplexVec,
    DensityMatrix, Error, ProbeStyle, ProductProbe, Result,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bad(desc: &str, message: impl Into<String>) -> Error {
    Error::Format {
        context: format!("family `{desc}`"),
        message: message.into(),
    }
}

struct Params<'a> {
    desc: &'a str,
    flags: Vec<&'a str>,
    values: BTreeMap<&'a str, &'a str>,
}

impl<'a> Params<'a> {
    fn parse(desc: &'a str, body: &'a str) -> Result<Self> {
        let mut flags = Vec::new();
        let mut values = BTreeMap::new();
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.split_once('=') {
                Some((k, v)) => {
                    if values.insert(k.trim(), v.trim()).is_some() {
                        return Err(bad(desc, format!("`{k}` given twice")));
                    }
                }
                None => flags.push(item),
            }
        }
        Ok(Self { desc, flags, values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> Result<T> {
        match self.values.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| bad(self.desc, format!("cannot parse `{key}={v}`"))),
            None => default.ok_or_else(|| bad(self.desc, format!("missing `{key}`"))),
        }
    }

    fn allow(&self, keys: &[&str], flags: &[&str]) -> Result<()> {
        if let Some(k) = self.values.keys().find(|k| !keys.contains(k)) {
            return Err(bad(self.desc, format!("unknown parameter `{k}`")));
        }
        if let Some(f) = self.flags.iter().find(|f| !flags.contains(f)) {
            return Err(bad(self.desc, format!("unknown flag `{f}`")));
        }
        Ok(())
    }
}

/// Builds the state named by a family descriptor.
///
/// Supported: `ghz:n=,d=`, `w:n=`, `mixed:I,n=,d=`, `product:n=,d=`,
/// `noisy-ghz:n=,d=,p=`, `noisy-w:n=,p=`, `separable:n=,d=,terms=,seed=`.
pub fn parse_family(desc: &str) -> Result<DensityMatrix> {
    let (name, body) = desc.split_once(':').unwrap_or((desc, ""));
    let params = Params::parse(desc, body)?;
    match name.trim() {
        "ghz" => {
            params.allow(&["n", "d"], &[])?;
            Ok(ghz(params.get("n", None)?, params.get("d", Some(2))?)?.density())
        }
        "w" => {
            params.allow(&["n"], &[])?;
            Ok(w_state(params.get("n", None)?)?.density())
        }
        "mixed" => {
            params.allow(&["n", "d"], &["I"])?;
            let n: usize = params.get("n", None)?;
            let d: usize = params.get("d", Some(2))?;
            DensityMatrix::maximally_mixed(vec![d; n])
        }
        "product" => {
            params.allow(&["n", "d"], &[])?;
            let n: usize = params.get("n", None)?;
            let d: usize = params.get("d", Some(2))?;
            let zero = ComplexVec::basis(d, 0)?;
            Ok(product_pure(&vec![zero; n])?.density())
        }
        "noisy-ghz" => {
            params.allow(&["n", "d", "p"], &[])?;
            let g = ghz(params.get("n", None)?, params.get("d", Some(2))?)?.density();
            white_noise(&g, params.get("p", None)?)
        }
        "noisy-w" => {
            params.allow(&["n", "p"], &[])?;
            let w = w_state(params.get("n", None)?)?.density();
            white_noise(&w, params.get("p", None)?)
        }
        "separable" => {
            params.allow(&["n", "d", "terms", "seed"], &[])?;
            let n: usize = params.get("n", None)?;
            let d: usize = params.get("d", Some(2))?;
            let mut rng = ChaCha8Rng::seed_from_u64(params.get("seed", Some(0))?);
            random_separable(&vec![d; n], params.get("terms", Some(10))?, &mut rng)
        }
        other => Err(bad(desc, format!("unknown family `{other}`"))),
    }
}

/// Loads a state from `--state` or `--family`.
pub fn load_source(state: Option<&Path>, family: Option<&str>) -> Result<DensityMatrix> {
    match (state, family) {
        (Some(path), None) => load_state(path),
        (None, Some(desc)) => parse_family(desc),
        _ => Err(Error::Parameter(
            "exactly one of --state or --family is required".into(),
        )),
    }
}

/// Resolves `ghz-pair`, `random`, `random:SEED`, `basis:I,J` or a probe file.
pub fn parse_probe(spec: &str, dims: &[usize], seed: u64) -> Result<ProductProbe> {
    let style = match spec.split_once(':') {
        None if spec == "ghz-pair" => Some(ProbeStyle::GhzPair),
        None if spec == "random" => Some(ProbeStyle::Random { seed }),
        Some(("random", s)) => Some(ProbeStyle::Random {
            seed: s.trim().parse().map_err(|_| Error::Format {
                context: format!("probe `{spec}`"),
                message: "seed must be an unsigned integer".into(),
            })?,
        }),
        Some(("basis", pair)) => {
            let idx: Vec<usize> = pair
                .split(',')
                .map(|t| t.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Format {
                    context: format!("probe `{spec}`"),
                    message: "expected two basis indices".into(),
                })?;
            match idx.as_slice() {
                [a, b] => Some(ProbeStyle::BasisPair(*a, *b)),
                _ => {
                    return Err(Error::Format {
                        context: format!("probe `{spec}`"),
                        message: "expected two basis indices".into(),
                    })
                }
            }
        }
        _ => None,
    };
    match style {
        Some(style) => canonical_probe(style, dims),
        None => {
            let text = std::fs::read_to_string(spec)?;
            serde_json::from_str(&text).map_err(|e| Error::Format {
                context: format!("probe file `{spec}` line {} column {}", e.line(), e.column()),
                message: e.to_string(),
            })
        }
    }
}
