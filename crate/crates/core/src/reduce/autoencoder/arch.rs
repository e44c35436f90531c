use std::fmt;

use crate::error::{Error, Result};

pub const LATENT_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Zero-padded square convolution (`kernel` odd).
    Conv { filters: usize, kernel: usize, stride: usize },
    /// Non-overlapping max pooling.
    Pool { window: usize },
    Dense { units: usize },
    Relu,
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv { filters, kernel, stride } => write!(f, "conv:{filters}:{kernel}:{stride}"),
            LayerSpec::Pool { window } => write!(f, "pool:{window}"),
            LayerSpec::Dense { units } => write!(f, "dense:{units}"),
            LayerSpec::Relu => write!(f, "relu"),
        }
    }
}

/// Encoder layer chain; the decoder is derived by mirroring it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub encoder: Vec<LayerSpec>,
}

impl Default for Architecture {
    fn default() -> Self {
        use LayerSpec::*;
        Self {
            encoder: vec![
                Conv { filters: 8, kernel: 3, stride: 1 },
                Relu,
                Pool { window: 2 },
                Conv { filters: 16, kernel: 3, stride: 1 },
                Relu,
                Pool { window: 2 },
                Dense { units: 64 },
                Relu,
                Dense { units: LATENT_DIM },
            ],
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.encoder.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl Architecture {
    /// One convolution and one fully connected pair.
    pub fn simplified() -> Self {
        use LayerSpec::*;
        Self {
            encoder: vec![
                Conv { filters: 8, kernel: 3, stride: 1 },
                Relu,
                Pool { window: 2 },
                Dense { units: 32 },
                Relu,
                Dense { units: LATENT_DIM },
            ],
        }
    }

    /// A single linear map to the latent space.
    pub fn linear(latent: usize) -> Self {
        Self {
            encoder: vec![LayerSpec::Dense { units: latent }],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "simplified" => Some(Self::simplified()),
            _ => None,
        }
    }

    /// Parses `default`, `simplified`, or a comma list such as
    /// `conv:8:3:1,relu,pool:2,dense:4`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(a) = Self::preset(text) {
            return Ok(a);
        }
        let num = |s: Option<&str>, what: &str, item: &str| -> Result<usize> {
            s.and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Architecture(format!("bad {what} in layer '{item}'")))
        };
        let mut encoder = Vec::new();
        for item in text.split(',') {
            let item = item.trim();
            let mut parts = item.split(':');
            let layer = match parts.next().unwrap_or("") {
                "conv" => LayerSpec::Conv {
                    filters: num(parts.next(), "filter count", item)?,
                    kernel: num(parts.next(), "kernel size", item)?,
                    stride: match parts.next() {
                        Some(s) => num(Some(s), "stride", item)?,
                        None => 1,
                    },
                },
                "pool" => LayerSpec::Pool {
                    window: num(parts.next(), "window", item)?,
                },
                "dense" => LayerSpec::Dense {
                    units: num(parts.next(), "unit count", item)?,
                },
                "relu" => LayerSpec::Relu,
                other => return Err(Error::Architecture(format!("unknown layer '{other}'"))),
            };
            if parts.next().is_some() {
                return Err(Error::Architecture(format!("trailing fields in layer '{item}'")));
            }
            encoder.push(layer);
        }
        Ok(Self { encoder })
    }

    pub fn latent_dim(&self) -> Option<usize> {
        match self.encoder.last() {
            Some(LayerSpec::Dense { units }) => Some(*units),
            _ => None,
        }
    }
}
