//! Generation-based random linear network coding over GF(2^8).
//!
//! The encoder emits random linear combinations of the `f` source packets of a
//! generation. The decoder keeps its rows in reduced row-echelon form, so a
//! source packet becomes available the moment its row collapses to a unit
//! vector, before full rank is reached.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::RlncError;
use crate::gf256::{axpy, scale, Gf256};

/// A block of `f` equal-length source packets, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    f: usize,
    packet_len: usize,
    data: Vec<u8>,
}

impl Generation {
    pub fn new(packets: Vec<Vec<u8>>) -> Result<Self, RlncError> {
        let f = packets.len();
        if f == 0 {
            return Err(RlncError::EmptyGeneration);
        }
        let packet_len = packets[0].len();
        let mut data = Vec::with_capacity(f * packet_len);
        for p in &packets {
            if p.len() != packet_len {
                return Err(RlncError::LengthMismatch { expected: packet_len, got: p.len() });
            }
            data.extend_from_slice(p);
        }
        Ok(Generation { f, packet_len, data })
    }

    /// Partition a byte stream into `f` packets, row-major, zero-padding the tail.
    pub fn from_stream(bytes: &[u8], f: usize) -> Result<Self, RlncError> {
        if f == 0 {
            return Err(RlncError::EmptyGeneration);
        }
        let packet_len = bytes.len().div_ceil(f).max(1);
        let mut data = vec![0u8; f * packet_len];
        data[..bytes.len()].copy_from_slice(bytes);
        Ok(Generation { f, packet_len, data })
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn packet_len(&self) -> usize {
        self.packet_len
    }

    pub fn packet(&self, i: usize) -> &[u8] {
        &self.data[i * self.packet_len..(i + 1) * self.packet_len]
    }

    /// All source bytes, packet after packet.
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    /// Linear combination of the source packets with the given coefficients.
    pub fn combine(&self, coeffs: &[Gf256]) -> Result<CodedPacket, RlncError> {
        if coeffs.len() != self.f {
            return Err(RlncError::MalformedPacket { expected: self.f, got: coeffs.len() });
        }
        let mut payload = vec![0u8; self.packet_len];
        for (i, &c) in coeffs.iter().enumerate() {
            axpy(&mut payload, c, self.packet(i));
        }
        Ok(CodedPacket { coeffs: coeffs.to_vec(), payload })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub coeffs: Vec<Gf256>,
    pub payload: Vec<u8>,
}

impl CodedPacket {
    /// Wire form: coefficients followed by payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.coeffs.iter().map(|c| c.0).collect();
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8], f: usize) -> Result<Self, RlncError> {
        if bytes.len() < f {
            return Err(RlncError::MalformedPacket { expected: f, got: bytes.len() });
        }
        Ok(CodedPacket {
            coeffs: bytes[..f].iter().map(|&b| Gf256(b)).collect(),
            payload: bytes[f..].to_vec(),
        })
    }
}

/// Seeded source of coded packets for one generation.
pub struct Encoder<'a> {
    gen: &'a Generation,
    rng: ChaCha8Rng,
}

impl<'a> Encoder<'a> {
    pub fn new(gen: &'a Generation, seed: u64) -> Self {
        Encoder { gen, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn next_packet(&mut self) -> CodedPacket {
        let mut raw = vec![0u8; self.gen.f];
        self.rng.fill_bytes(&mut raw);
        let coeffs: Vec<Gf256> = raw.into_iter().map(Gf256).collect();
        self.gen.combine(&coeffs).expect("coefficient length matches f")
    }
}

/// One coded packet with uniformly drawn coefficients.
pub fn encode(gen: &Generation, seed: u64) -> CodedPacket {
    Encoder::new(gen, seed).next_packet()
}

/// Progressive Gauss-Jordan decoder.
///
/// `pivots[c]` holds the row whose leading coefficient sits in column `c`;
/// every stored row is normalized and eliminated from all the others.
#[derive(Debug, Clone)]
pub struct Decoder {
    f: usize,
    packet_len: usize,
    pivots: Vec<Option<(Vec<u8>, Vec<u8>)>>,
    rank: usize,
    decoded: Vec<bool>,
}

impl Decoder {
    pub fn new(f: usize, packet_len: usize) -> Self {
        Decoder { f, packet_len, pivots: vec![None; f], rank: 0, decoded: vec![false; f] }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn is_complete(&self) -> bool {
        self.rank == self.f
    }

    /// `decoded_mask()[i]` is set once source packet `i` has been recovered.
    pub fn decoded_mask(&self) -> &[bool] {
        &self.decoded
    }

    /// Coefficient row with pivot in column `c`, if any.
    pub fn coeff_row(&self, c: usize) -> Option<&[u8]> {
        self.pivots[c].as_ref().map(|(r, _)| r.as_slice())
    }

    /// Recovered source packet `i`, available before full rank when its row is a unit vector.
    pub fn decoded_packet(&self, i: usize) -> Option<&[u8]> {
        if self.decoded[i] {
            self.pivots[i].as_ref().map(|(_, p)| p.as_slice())
        } else {
            None
        }
    }

    /// Absorb one coded packet. Returns `true` if it raised the rank.
    pub fn ingest(&mut self, pkt: &CodedPacket) -> Result<bool, RlncError> {
        if pkt.coeffs.len() != self.f {
            return Err(RlncError::MalformedPacket { expected: self.f, got: pkt.coeffs.len() });
        }
        if pkt.payload.len() != self.packet_len {
            return Err(RlncError::LengthMismatch { expected: self.packet_len, got: pkt.payload.len() });
        }
        if self.rank == self.f {
            return Ok(false);
        }
        let mut row: Vec<u8> = pkt.coeffs.iter().map(|c| c.0).collect();
        let mut payload = pkt.payload.clone();

        // reduce against existing pivots
        for c in 0..self.f {
            if row[c] == 0 {
                continue;
            }
            if let Some((prow, ppay)) = &self.pivots[c] {
                let k = Gf256(row[c]);
                axpy(&mut row, k, prow);
                axpy(&mut payload, k, ppay);
            }
        }
        let Some(p) = row.iter().position(|&b| b != 0) else {
            return Ok(false);
        };
        let inv = Gf256(row[p]).inv().expect("pivot is nonzero");
        scale(&mut row, inv);
        scale(&mut payload, inv);

        // back-substitute the new pivot out of every other row
        for (c, slot) in self.pivots.iter_mut().enumerate() {
            if c == p {
                continue;
            }
            if let Some((orow, opay)) = slot {
                let k = Gf256(orow[p]);
                if !k.is_zero() {
                    axpy(orow, k, &row);
                    axpy(opay, k, &payload);
                }
            }
        }
        self.pivots[p] = Some((row, payload));
        self.rank += 1;
        self.refresh_mask();
        Ok(true)
    }

    fn refresh_mask(&mut self) {
        for (c, slot) in self.pivots.iter().enumerate() {
            self.decoded[c] = match slot {
                Some((r, _)) => r.iter().enumerate().all(|(j, &b)| (j == c) == (b != 0)),
                None => false,
            };
        }
    }

    /// The full generation, packet after packet.
    pub fn decode_generation(&self) -> Result<Vec<u8>, RlncError> {
        if self.rank < self.f {
            return Err(RlncError::InsufficientRank { rank: self.rank, f: self.f });
        }
        let mut out = Vec::with_capacity(self.f * self.packet_len);
        for slot in &self.pivots {
            out.extend_from_slice(&slot.as_ref().expect("full rank").1);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen3() -> Generation {
        Generation::new(vec![vec![1, 2, 3, 4], vec![5, 6, 7, 8], vec![9, 10, 11, 12]]).unwrap()
    }

    fn coded(g: &Generation, c: &[u8]) -> CodedPacket {
        g.combine(&c.iter().map(|&b| Gf256(b)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn unit_coefficients_select_a_packet() {
        let g = gen3();
        assert_eq!(coded(&g, &[1, 0, 0]).payload, g.packet(0));
    }

    #[test]
    fn ones_give_xor() {
        let g = Generation::new(vec![vec![0xF0, 0x0F], vec![0xAA, 0x55]]).unwrap();
        assert_eq!(coded(&g, &[1, 1]).payload, vec![0xF0 ^ 0xAA, 0x0F ^ 0x55]);
    }

    #[test]
    fn identity_rows_decode_progressively() {
        let g = gen3();
        let mut d = Decoder::new(3, 4);
        d.ingest(&coded(&g, &[0, 1, 0])).unwrap();
        assert_eq!(d.decoded_mask(), &[false, true, false]);
        assert_eq!(d.decoded_packet(1).unwrap(), g.packet(1));
        d.ingest(&coded(&g, &[1, 0, 0])).unwrap();
        d.ingest(&coded(&g, &[0, 0, 1])).unwrap();
        assert_eq!(d.rank(), 3);
        assert_eq!(d.decode_generation().unwrap(), g.as_bytes());
    }

    #[test]
    fn scalar_multiple_is_not_innovative() {
        // [2,4,6] = 2 * [1,2,3] in GF(2^8): 2*2 = 4 and 2*3 = 6 without reduction
        let g = gen3();
        let mut d = Decoder::new(3, 4);
        assert!(d.ingest(&coded(&g, &[1, 2, 3])).unwrap());
        assert!(!d.ingest(&coded(&g, &[2, 4, 6])).unwrap());
        assert_eq!(d.rank(), 1);
    }

    #[test]
    fn partial_rank_refuses_to_decode() {
        let g = gen3();
        let mut d = Decoder::new(3, 4);
        d.ingest(&coded(&g, &[1, 1, 0])).unwrap();
        d.ingest(&coded(&g, &[0, 1, 1])).unwrap();
        assert_eq!(d.decode_generation(), Err(RlncError::InsufficientRank { rank: 2, f: 3 }));
    }

    #[test]
    fn malformed_packets_rejected() {
        let mut d = Decoder::new(3, 4);
        let bad = CodedPacket { coeffs: vec![Gf256(1); 2], payload: vec![0; 4] };
        assert!(matches!(d.ingest(&bad), Err(RlncError::MalformedPacket { .. })));
        let bad = CodedPacket { coeffs: vec![Gf256(1); 3], payload: vec![0; 5] };
        assert!(matches!(d.ingest(&bad), Err(RlncError::LengthMismatch { .. })));
    }

    #[test]
    fn stream_partition_pads_and_round_trips() {
        let bytes: Vec<u8> = (0..10).collect();
        let g = Generation::from_stream(&bytes, 3).unwrap();
        assert_eq!(g.packet_len(), 4);
        assert_eq!(g.packet(2), &[8, 9, 0, 0]);
        assert_eq!(&g.as_bytes()[..10], &bytes[..]);
    }

    #[test]
    fn wire_format_round_trips() {
        let g = gen3();
        let p = encode(&g, 7);
        assert_eq!(CodedPacket::from_bytes(&p.to_bytes(), 3).unwrap(), p);
    }
}
