//! Weight persistence.
//!
//! File layout: magic `IMNW`, little-endian u16 version, a u32
//! length-prefixed UTF-8 header, then raw little-endian f32 values.
//! The header lists the layer stack and one `name:shape` line per tensor,
//! in payload order. In-memory values are f64; files store f32.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::network::{Activation, LayerParams, LayerSpec, Network, NetworkSpec};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"IMNW";
pub const WEIGHTS_VERSION: u16 = 1;

/// Auxiliary tensor stored alongside the network parameters (input scale,
/// channel snapshots, and similar run metadata).
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn scalar(name: &str, value: f64) -> Self {
        Self { name: name.to_string(), shape: vec![1], data: vec![value] }
    }
}

fn act_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Sigmoid => "sigmoid",
        Activation::Linear => "linear",
    }
}

fn parse_act(s: &str) -> Result<Activation> {
    match s {
        "relu" => Ok(Activation::Relu),
        "sigmoid" => Ok(Activation::Sigmoid),
        "linear" => Ok(Activation::Linear),
        other => Err(Error::WeightsFormat(format!("unknown activation `{other}`"))),
    }
}

fn shape_string(shape: &[usize]) -> String {
    shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
}

fn parse_shape(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|d| d.parse::<usize>().map_err(|_| Error::WeightsFormat(format!("bad shape `{s}`"))))
        .collect()
}

/// Serialize network parameters plus auxiliary tensors.
pub fn save_weights(net: &Network, extras: &[NamedTensor], path: &Path) -> Result<()> {
    let mut header = String::new();
    header.push_str(&format!(
        "input {} {} {}\n",
        net.spec.input[0], net.spec.input[1], net.spec.input[2]
    ));
    for layer in &net.spec.layers {
        match layer {
            LayerSpec::Conv { out_channels, activation } => {
                header.push_str(&format!("layer conv {out_channels} {}\n", act_name(*activation)));
            }
            LayerSpec::MaxPool2 => header.push_str("layer maxpool2\n"),
            LayerSpec::Dense { out_units, activation } => {
                header.push_str(&format!("layer dense {out_units} {}\n", act_name(*activation)));
            }
            LayerSpec::ResidualOutput => header.push_str("layer residual_output\n"),
        }
    }
    let mut payload: Vec<f64> = Vec::new();
    for (i, p) in net.params.iter().enumerate() {
        match p {
            LayerParams::Conv { kernel, bias } => {
                header.push_str(&format!("layer{i}.kernel:{}\n", shape_string(&kernel.shape)));
                header.push_str(&format!("layer{i}.bias:{}\n", bias.len()));
                payload.extend_from_slice(&kernel.data);
                payload.extend_from_slice(bias);
            }
            LayerParams::Dense { weight, bias } => {
                header.push_str(&format!(
                    "layer{i}.weight:{}x{}\n",
                    weight.shape[0], weight.shape[1]
                ));
                header.push_str(&format!("layer{i}.bias:{}\n", bias.len()));
                payload.extend_from_slice(&weight.data);
                payload.extend_from_slice(bias);
            }
            LayerParams::None => {}
        }
    }
    for t in extras {
        if t.data.len() != t.shape.iter().product::<usize>() {
            return Err(Error::WeightsFormat(format!("tensor `{}` data/shape mismatch", t.name)));
        }
        header.push_str(&format!("{}:{}\n", t.name, shape_string(&t.shape)));
        payload.extend_from_slice(&t.data);
    }

    let mut bytes = Vec::with_capacity(4 + 2 + 4 + header.len() + 4 * payload.len());
    bytes.extend_from_slice(WEIGHTS_MAGIC);
    bytes.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
    bytes.extend_from_slice(header.as_bytes());
    for v in payload {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Deserialize a weights file into a network and its auxiliary tensors.
pub fn load_weights(path: &Path) -> Result<(Network, Vec<NamedTensor>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 10 {
        return Err(Error::WeightsFormat("file truncated before header".into()));
    }
    if &bytes[0..4] != WEIGHTS_MAGIC {
        return Err(Error::WeightsFormat("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != WEIGHTS_VERSION {
        return Err(Error::WeightsFormat(format!(
            "unsupported version {version} (expected {WEIGHTS_VERSION})"
        )));
    }
    let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    if bytes.len() < 10 + header_len {
        return Err(Error::WeightsFormat("file truncated inside header".into()));
    }
    let header = std::str::from_utf8(&bytes[10..10 + header_len])
        .map_err(|_| Error::WeightsFormat("header is not UTF-8".into()))?;

    let mut input: Option<[usize; 3]> = None;
    let mut layers: Vec<LayerSpec> = Vec::new();
    let mut tensors: Vec<(String, Vec<usize>)> = Vec::new();
    for line in header.lines() {
        if let Some(rest) = line.strip_prefix("input ") {
            let dims: Vec<usize> = rest
                .split_whitespace()
                .map(|d| d.parse().map_err(|_| Error::WeightsFormat(format!("bad input line `{line}`"))))
                .collect::<Result<_>>()?;
            if dims.len() != 3 {
                return Err(Error::WeightsFormat(format!("bad input line `{line}`")));
            }
            input = Some([dims[0], dims[1], dims[2]]);
        } else if let Some(rest) = line.strip_prefix("layer ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let layer = match parts.as_slice() {
                ["conv", oc, act] => LayerSpec::Conv {
                    out_channels: oc
                        .parse()
                        .map_err(|_| Error::WeightsFormat(format!("bad layer line `{line}`")))?,
                    activation: parse_act(act)?,
                },
                ["maxpool2"] => LayerSpec::MaxPool2,
                ["dense", units, act] => LayerSpec::Dense {
                    out_units: units
                        .parse()
                        .map_err(|_| Error::WeightsFormat(format!("bad layer line `{line}`")))?,
                    activation: parse_act(act)?,
                },
                ["residual_output"] => LayerSpec::ResidualOutput,
                _ => return Err(Error::WeightsFormat(format!("bad layer line `{line}`"))),
            };
            layers.push(layer);
        } else if let Some((name, shape)) = line.split_once(':') {
            tensors.push((name.to_string(), parse_shape(shape)?));
        } else if !line.trim().is_empty() {
            return Err(Error::WeightsFormat(format!("unrecognized header line `{line}`")));
        }
    }
    let input = input.ok_or_else(|| Error::WeightsFormat("missing input line".into()))?;
    let spec = NetworkSpec { input, layers };
    let mut net = Network::zeros(spec).map_err(|e| Error::WeightsFormat(e.to_string()))?;

    let total: usize = tensors.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    let payload_bytes = &bytes[10 + header_len..];
    if payload_bytes.len() != 4 * total {
        return Err(Error::WeightsFormat(format!(
            "payload holds {} bytes, header promises {}",
            payload_bytes.len(),
            4 * total
        )));
    }
    let mut values = Vec::with_capacity(total);
    for chunk in payload_bytes.chunks_exact(4) {
        values.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64);
    }

    let mut cursor = 0usize;
    let mut extras = Vec::new();
    for (name, shape) in tensors {
        let n: usize = shape.iter().product();
        let data = values[cursor..cursor + n].to_vec();
        cursor += n;
        if let Some(idx_str) = name.strip_prefix("layer").and_then(|r| {
            r.split_once('.').map(|(i, field)| (i.to_string(), field.to_string()))
        }) {
            let (idx_s, field) = idx_str;
            if let Ok(idx) = idx_s.parse::<usize>() {
                if idx >= net.params.len() {
                    return Err(Error::WeightsFormat(format!("tensor `{name}` indexes a missing layer")));
                }
                let ok = match (&mut net.params[idx], field.as_str()) {
                    (LayerParams::Conv { kernel, .. }, "kernel") if kernel.data.len() == n => {
                        kernel.data.copy_from_slice(&data);
                        true
                    }
                    (LayerParams::Conv { bias, .. }, "bias") if bias.len() == n => {
                        bias.copy_from_slice(&data);
                        true
                    }
                    (LayerParams::Dense { weight, .. }, "weight") if weight.data.len() == n => {
                        weight.data.copy_from_slice(&data);
                        true
                    }
                    (LayerParams::Dense { bias, .. }, "bias") if bias.len() == n => {
                        bias.copy_from_slice(&data);
                        true
                    }
                    _ => false,
                };
                if !ok {
                    return Err(Error::WeightsFormat(format!(
                        "tensor `{name}` does not match layer {idx}"
                    )));
                }
                continue;
            }
        }
        extras.push(NamedTensor { name, shape, data });
    }
    Ok((net, extras))
}
