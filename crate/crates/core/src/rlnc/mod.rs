//! Random linear network coding over GF(2^8).

pub mod gf256;

use rand::Rng;
use thiserror::Error;

/// Field symbols per message payload.
pub const PAYLOAD_LEN: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RlncError {
    #[error("inverse of zero")]
    InverseOfZero,
    #[error("cannot encode from an empty span")]
    EmptySpan,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A coded packet: coefficients over the `k` source messages and the
/// matching combination of their payloads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedPacket {
    pub coefficients: Vec<u8>,
    pub payload: Vec<u8>,
}

impl CodedPacket {
    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0)
    }

    /// Hex of the coefficient vector, used as the payload tag in traces.
    pub fn tag(&self) -> String {
        self.coefficients.iter().map(|c| format!("{c:02x}")).collect()
    }
}

/// Row-reduced basis of everything a node has received.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderState {
    k: usize,
    payload_len: usize,
    /// Rows in reduced row-echelon form; `pivots[i]` is the leading column
    /// of `rows[i]`, and every other row is zero in that column.
    rows: Vec<CodedPacket>,
    pivots: Vec<usize>,
}

impl DecoderState {
    pub fn new(k: usize, payload_len: usize) -> Self {
        Self {
            k,
            payload_len,
            rows: Vec::with_capacity(k),
            pivots: Vec::with_capacity(k),
        }
    }

    /// A decoder that already holds the `k` source messages.
    pub fn with_messages(messages: &[Vec<u8>]) -> Result<Self, RlncError> {
        let k = messages.len();
        let payload_len = messages.first().map_or(PAYLOAD_LEN, Vec::len);
        let mut st = Self::new(k, payload_len);
        for (i, m) in messages.iter().enumerate() {
            let mut coefficients = vec![0; k];
            coefficients[i] = 1;
            st.absorb(CodedPacket {
                coefficients,
                payload: m.clone(),
            })?;
        }
        Ok(st)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_complete(&self) -> bool {
        self.rank() == self.k
    }

    pub fn basis(&self) -> &[CodedPacket] {
        &self.rows
    }

    /// Adds a packet to the basis. Returns `true` if it was innovative, i.e.
    /// linearly independent of what was already held.
    pub fn absorb(&mut self, mut pkt: CodedPacket) -> Result<bool, RlncError> {
        if pkt.coefficients.len() != self.k {
            return Err(RlncError::DimensionMismatch {
                expected: self.k,
                found: pkt.coefficients.len(),
            });
        }
        if pkt.payload.len() != self.payload_len {
            return Err(RlncError::DimensionMismatch {
                expected: self.payload_len,
                found: pkt.payload.len(),
            });
        }
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let c = pkt.coefficients[p];
            if c != 0 {
                gf256::axpy(&mut pkt.coefficients, c, &row.coefficients);
                gf256::axpy(&mut pkt.payload, c, &row.payload);
            }
        }
        let Some(pivot) = pkt.coefficients.iter().position(|&c| c != 0) else {
            return Ok(false);
        };
        let norm = gf256::inv(pkt.coefficients[pivot])?;
        gf256::scale(&mut pkt.coefficients, norm);
        gf256::scale(&mut pkt.payload, norm);
        for row in &mut self.rows {
            let c = row.coefficients[pivot];
            if c != 0 {
                gf256::axpy(&mut row.coefficients, c, &pkt.coefficients);
                gf256::axpy(&mut row.payload, c, &pkt.payload);
            }
        }
        let at = self.pivots.partition_point(|&p| p < pivot);
        self.pivots.insert(at, pivot);
        self.rows.insert(at, pkt);
        Ok(true)
    }

    /// A uniformly random nonzero element of the received span.
    ///
    /// Zero combinations are redrawn: they carry no information, and
    /// excluding them keeps a single-message run identical to uncoded
    /// forwarding.
    pub fn encode(&self, rng: &mut impl Rng) -> Result<CodedPacket, RlncError> {
        if self.rows.is_empty() {
            return Err(RlncError::EmptySpan);
        }
        loop {
            let mut out = CodedPacket {
                coefficients: vec![0; self.k],
                payload: vec![0; self.payload_len],
            };
            for row in &self.rows {
                let c: u8 = rng.gen();
                gf256::axpy(&mut out.coefficients, c, &row.coefficients);
                gf256::axpy(&mut out.payload, c, &row.payload);
            }
            if !out.is_zero() {
                return Ok(out);
            }
        }
    }

    /// The decoded messages once the basis has full rank.
    pub fn decoded(&self) -> Option<Vec<Vec<u8>>> {
        // Full rank in reduced form means row i is the unit vector e_i.
        self.is_complete()
            .then(|| self.rows.iter().map(|r| r.payload.clone()).collect())
    }

    /// Whether `coefficients` lies in the row space of the basis.
    pub fn contains(&self, coefficients: &[u8]) -> bool {
        let mut v = coefficients.to_vec();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let c = v[p];
            gf256::axpy(&mut v, c, &row.coefficients);
        }
        v.iter().all(|&c| c == 0)
    }
}
