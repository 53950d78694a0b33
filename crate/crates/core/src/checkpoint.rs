//! JSON checkpoints for networks.
//!
//! Parameters are written as the 16-hex-digit big-endian image of the IEEE-754
//! bits of each `f64`, flat and row-major per layer, so a round trip is exact
//! down to the sign of zero and NaN payloads.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, LayerGradients, Net};

pub const NET_FORMAT: &str = "datgan-net/1";

pub fn encode_f64(v: f64) -> String {
    hex::encode(v.to_bits().to_be_bytes())
}

pub fn decode_f64(s: &str) -> Result<f64> {
    let bytes = hex::decode(s).map_err(|e| Error::Checkpoint(format!("bad hex float `{s}`: {e}")))?;
    let arr: [u8; 8] = bytes
        .try_into()
        .map_err(|_| Error::Checkpoint(format!("hex float `{s}` is not 8 bytes")))?;
    Ok(f64::from_bits(u64::from_be_bytes(arr)))
}

pub fn encode_slice(vs: &[f64]) -> Vec<String> {
    vs.iter().copied().map(encode_f64).collect()
}

pub fn decode_slice(vs: &[String]) -> Result<Vec<f64>> {
    vs.iter().map(|s| decode_f64(s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<String>,
    pub bias: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetRecord {
    pub dims: Vec<usize>,
    pub layers: Vec<LayerRecord>,
    /// Optimizer accumulators (RMSProp), same layout as the layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Vec<LayerRecord>>,
}

impl NetRecord {
    pub fn from_net(net: &Net) -> Self {
        Self {
            dims: net.dims(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                    weights: encode_slice(&l.weights),
                    bias: encode_slice(&l.bias),
                })
                .collect(),
            optimizer: None,
        }
    }

    pub fn with_optimizer_state(mut self, net: &Net, state: &[LayerGradients]) -> Self {
        if !state.is_empty() {
            self.optimizer = Some(
                net.layers()
                    .iter()
                    .zip(state)
                    .map(|(l, s)| LayerRecord {
                        in_dim: l.in_dim(),
                        out_dim: l.out_dim(),
                        activation: l.activation,
                        weights: encode_slice(&s.weights),
                        bias: encode_slice(&s.bias),
                    })
                    .collect(),
            );
        }
        self
    }

    pub fn to_net(&self) -> Result<Net> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                DenseLayer::new(
                    l.in_dim,
                    l.out_dim,
                    decode_slice(&l.weights)?,
                    decode_slice(&l.bias)?,
                    l.activation,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Net::from_layers(layers)?;
        if net.dims() != self.dims {
            return Err(Error::Checkpoint(format!(
                "declared dims {:?} disagree with layers {:?}",
                self.dims,
                net.dims()
            )));
        }
        Ok(net)
    }

    pub fn optimizer_state(&self) -> Result<Option<Vec<LayerGradients>>> {
        self.optimizer
            .as_ref()
            .map(|layers| {
                layers
                    .iter()
                    .map(|l| {
                        Ok(LayerGradients {
                            weights: decode_slice(&l.weights)?,
                            bias: decode_slice(&l.bias)?,
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedNet {
    pub name: String,
    pub net: NetRecord,
}

/// One bank of networks (all generators, or all discriminators).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankCheckpoint {
    pub format: String,
    pub role: String,
    pub seed: u64,
    pub step: u64,
    pub nets: Vec<NamedNet>,
}

impl BankCheckpoint {
    pub fn new(role: &str, seed: u64, step: u64, nets: Vec<NamedNet>) -> Self {
        Self {
            format: NET_FORMAT.to_string(),
            role: role.to_string(),
            seed,
            step,
            nets,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(s)?;
        if ck.format != NET_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format `{}`", ck.format)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn get(&self, name: &str) -> Option<&NetRecord> {
        self.nets.iter().find(|n| n.name == name).map(|n| &n.net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn hex_float_roundtrip_is_bit_exact(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            let back = decode_f64(&encode_f64(v)).unwrap();
            prop_assert_eq!(back.to_bits(), bits);
        }
    }

    #[test]
    fn net_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Net::init_uniform(&[13, 4, 1], 0.1, &mut rng).unwrap();
        let ck = BankCheckpoint::new(
            "generator",
            11,
            0,
            vec![NamedNet {
                name: "asset0".into(),
                net: NetRecord::from_net(&net),
            }],
        );
        let json = ck.to_json().unwrap();
        let back = BankCheckpoint::from_json(&json).unwrap();
        assert_eq!(back, ck);
        let restored = back.get("asset0").unwrap().to_net().unwrap();
        assert_eq!(restored, net);
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn rejects_unknown_format() {
        let ck = BankCheckpoint {
            format: "something/else".into(),
            role: "x".into(),
            seed: 0,
            step: 0,
            nets: vec![],
        };
        let json = serde_json::to_string(&ck).unwrap();
        assert!(BankCheckpoint::from_json(&json).is_err());
    }
}
