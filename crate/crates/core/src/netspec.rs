//! Text format for network specs: sections `[regions]`, `[neurons]`,
//! `[synapses]`, `[params]`. Lines are whitespace-separated tokens, `#`
//! starts a comment, unknown keys are rejected.
//!
//! ```text
//! [regions]
//! sensory 0
//! hippocampus
//! midbrain da
//!
//! [neurons]
//! sensory:0 3 excitatory
//!
//! [synapses]
//! 0 1 0.6 driving
//!
//! [params]
//! seed 7
//! ```

use crate::netcore::{NetworkError, NeuronKind, Region, SynapseKind};
use crate::neuromod::ModulatorKind;

/// One `[neurons]` declaration: `count` neurons of `kind` in `region`,
/// assigned dense ids in declaration order.
#[derive(Debug, Clone)]
pub struct NeuronDecl {
    pub region: Region,
    pub count: u32,
    pub kind: NeuronKind,
}

/// Parsed network spec, ready for `build_network`.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub regions: Vec<Region>,
    pub neurons: Vec<NeuronDecl>,
    /// (pre, post, weight, kind) triples as written.
    pub synapses: Vec<(u32, u32, f64, SynapseKind)>,
    /// Seed reserved for randomized wiring extensions; current specs are
    /// fully explicit, so construction ignores it.
    pub seed: u64,
}

/// Tokenized line with its 1-based source line number.
pub(crate) type Line = (usize, Vec<String>);

/// Split text into (section name, lines) pairs, stripping comments.
pub(crate) fn tokenize_sections(text: &str) -> Result<Vec<(String, Vec<Line>)>, NetworkError> {
    let mut sections: Vec<(String, Vec<Line>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(NetworkError::Parse {
                line: line_no,
                message: format!("malformed section header `{line}`"),
            })?;
            if sections.iter().any(|(n, _)| n == name) {
                return Err(NetworkError::Parse {
                    line: line_no,
                    message: format!("duplicate section [{name}]"),
                });
            }
            sections.push((name.to_string(), Vec::new()));
            continue;
        }
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        match sections.last_mut() {
            Some((_, lines)) => lines.push((line_no, tokens)),
            None => {
                return Err(NetworkError::Parse {
                    line: line_no,
                    message: "content before any [section] header".into(),
                })
            }
        }
    }
    Ok(sections)
}

fn parse_err(line: usize, message: impl Into<String>) -> NetworkError {
    NetworkError::Parse {
        line,
        message: message.into(),
    }
}

fn modulator_kind(line: usize, token: &str) -> Result<ModulatorKind, NetworkError> {
    match token {
        "da" => Ok(ModulatorKind::Da),
        "ht5" => Ok(ModulatorKind::Ht5),
        "na" => Ok(ModulatorKind::Na),
        "ach" => Ok(ModulatorKind::Ach),
        other => Err(parse_err(line, format!("unknown modulator `{other}`"))),
    }
}

/// Region reference as used in `[neurons]` lines, e.g. `sensory:2`.
fn region_ref(line: usize, token: &str) -> Result<Region, NetworkError> {
    if let Some(ch) = token.strip_prefix("sensory:") {
        let ch: u8 = ch
            .parse()
            .map_err(|_| parse_err(line, format!("bad sensory channel `{ch}`")))?;
        return Ok(Region::SensoryCortex(ch));
    }
    if let Some(kind) = token.strip_prefix("midbrain:") {
        return Ok(Region::MidbrainNucleus(modulator_kind(line, kind)?));
    }
    match token {
        "motor" => Ok(Region::MotorCortex),
        "thalamus" => Ok(Region::ThalamusRelay),
        "hippocampus" => Ok(Region::Hippocampus),
        "amygdala" => Ok(Region::Amygdala),
        other => Err(parse_err(line, format!("unknown region `{other}`"))),
    }
}

pub fn parse_network_spec(text: &str) -> Result<NetworkSpec, NetworkError> {
    let mut spec = NetworkSpec {
        regions: Vec::new(),
        neurons: Vec::new(),
        synapses: Vec::new(),
        seed: 0,
    };
    for (name, lines) in tokenize_sections(text)? {
        match name.as_str() {
            "regions" => {
                for (ln, toks) in lines {
                    let region = match toks[0].as_str() {
                        "sensory" => {
                            let ch = toks
                                .get(1)
                                .and_then(|t| t.parse::<u8>().ok())
                                .ok_or_else(|| parse_err(ln, "sensory needs a channel number"))?;
                            Region::SensoryCortex(ch)
                        }
                        "motor" => Region::MotorCortex,
                        "thalamus" => Region::ThalamusRelay,
                        "hippocampus" => Region::Hippocampus,
                        "amygdala" => Region::Amygdala,
                        "midbrain" => {
                            let kind = toks
                                .get(1)
                                .ok_or_else(|| parse_err(ln, "midbrain needs a modulator"))?;
                            Region::MidbrainNucleus(modulator_kind(ln, kind)?)
                        }
                        other => return Err(parse_err(ln, format!("unknown region `{other}`"))),
                    };
                    spec.regions.push(region);
                }
            }
            "neurons" => {
                for (ln, toks) in lines {
                    if toks.len() != 3 {
                        return Err(parse_err(ln, "expected `<region> <count> <kind>`"));
                    }
                    let region = region_ref(ln, &toks[0])?;
                    let count: u32 = toks[1]
                        .parse()
                        .map_err(|_| parse_err(ln, format!("bad count `{}`", toks[1])))?;
                    let kind = match toks[2].as_str() {
                        "excitatory" => NeuronKind::Excitatory,
                        "inhibitory" => NeuronKind::Inhibitory,
                        other => {
                            return Err(parse_err(ln, format!("unknown neuron kind `{other}`")))
                        }
                    };
                    spec.neurons.push(NeuronDecl {
                        region,
                        count,
                        kind,
                    });
                }
            }
            "synapses" => {
                for (ln, toks) in lines {
                    if toks.len() != 4 {
                        return Err(parse_err(ln, "expected `<pre> <post> <weight> <kind>`"));
                    }
                    let pre: u32 = toks[0]
                        .parse()
                        .map_err(|_| parse_err(ln, format!("bad neuron id `{}`", toks[0])))?;
                    let post: u32 = toks[1]
                        .parse()
                        .map_err(|_| parse_err(ln, format!("bad neuron id `{}`", toks[1])))?;
                    let weight: f64 = toks[2]
                        .parse()
                        .map_err(|_| parse_err(ln, format!("bad weight `{}`", toks[2])))?;
                    let kind = match toks[3].as_str() {
                        "driving" => SynapseKind::Driving,
                        "apical" => SynapseKind::ApicalInhibitory,
                        "relay" => SynapseKind::Relay,
                        other => {
                            return Err(parse_err(ln, format!("unknown synapse kind `{other}`")))
                        }
                    };
                    spec.synapses.push((pre, post, weight, kind));
                }
            }
            "params" => {
                for (ln, toks) in lines {
                    match toks[0].as_str() {
                        "seed" => {
                            spec.seed = toks
                                .get(1)
                                .and_then(|t| t.parse().ok())
                                .ok_or_else(|| parse_err(ln, "seed needs an integer value"))?;
                        }
                        other => return Err(parse_err(ln, format!("unknown param `{other}`"))),
                    }
                }
            }
            other => {
                return Err(NetworkError::Parse {
                    line: 0,
                    message: format!("unknown section [{other}]"),
                })
            }
        }
    }
    Ok(spec)
}
