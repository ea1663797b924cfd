//! Binary parameter files: one JSON header line, then every parameter as a
//! little-endian `f64` in [`QNetwork::parameters`] order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ArchitectureTemplate, NnError, QNetwork};

const FORMAT: &str = "molsrl-qnet";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkHeader {
    pub format: String,
    pub version: u32,
    pub template: ArchitectureTemplate,
    pub num_actions: usize,
    pub num_objectives: usize,
    pub shapes: Vec<Vec<usize>>,
    pub seed: Option<u64>,
}

impl QNetwork {
    pub fn to_bytes(&self, seed: Option<u64>) -> Vec<u8> {
        let header = NetworkHeader {
            format: FORMAT.into(),
            version: VERSION,
            template: self.template.clone(),
            num_actions: self.num_actions,
            num_objectives: self.num_objectives,
            shapes: self.tensor_shapes(),
            seed,
        };
        let mut out = serde_json::to_vec(&header).expect("header serialises");
        out.push(b'\n');
        for p in self.parameters() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, NetworkHeader), NnError> {
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| NnError::Format("missing header line".into()))?;
        let header: NetworkHeader =
            serde_json::from_slice(&bytes[..split]).map_err(|e| NnError::Format(e.to_string()))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(NnError::Format(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        // Values are overwritten below; the rng only fills the shapes.
        let mut net = QNetwork::new(
            header.template.clone(),
            header.num_actions,
            header.num_objectives,
            &mut ChaCha8Rng::seed_from_u64(0),
        )?;
        if net.tensor_shapes() != header.shapes {
            return Err(NnError::Format(
                "tensor shapes disagree with the template".into(),
            ));
        }
        let body = &bytes[split + 1..];
        if body.len() != net.parameter_count() * 8 {
            return Err(NnError::Format(format!(
                "expected {} parameter bytes, found {}",
                net.parameter_count() * 8,
                body.len()
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        net.set_parameters(&values)?;
        Ok((net, header))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for template in [
            ArchitectureTemplate::mlp(2),
            ArchitectureTemplate::conv(3, 11, 10),
        ] {
            let mut net = QNetwork::new(template, 4, 2, &mut rng).unwrap();
            // Include values that a text format would mangle.
            let mut p = net.parameters();
            p[0] = -0.0;
            p[1] = f64::MIN_POSITIVE / 3.0;
            p[2] = 0.1 + 0.2;
            net.set_parameters(&p).unwrap();
            let bytes = net.to_bytes(Some(42));
            let (back, header) = QNetwork::from_bytes(&bytes).unwrap();
            assert_eq!(header.seed, Some(42));
            assert!(back.same_architecture(&net));
            let q = back.parameters();
            assert!(p.iter().zip(&q).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let net = QNetwork::new(
            ArchitectureTemplate::mlp(2),
            4,
            2,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let bytes = net.to_bytes(None);
        assert!(matches!(
            QNetwork::from_bytes(&bytes[..bytes.len() - 3]),
            Err(NnError::Format(_))
        ));
        assert!(matches!(
            QNetwork::from_bytes(b"nonsense"),
            Err(NnError::Format(_))
        ));
    }
}
