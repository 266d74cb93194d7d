//! Binary wire formats for the two communication rounds.
//!
//! All messages are little-endian: a 12-byte header (u32 id, u32 tick,
//! u32 record count) followed by `count` records of 4-byte IEEE-754 floats.
//! Bandwidth accounting uses the payload portion only (the information
//! bytes); `encoded_len` includes the header.

use thiserror::Error;

use crate::world::VehicleId;

/// Fixed header size: u32 id, u32 tick, u32 count.
pub const HEADER_BYTES: usize = 12;
/// Key points carried by a round-2 message: 2048 / 16.
pub const KEYPOINT_COUNT: usize = 128;
/// Encoded feature dimensions per key point.
pub const FEATURE_DIMS: usize = 128;
/// Floats per key point record: feature vector plus 3D position.
pub const FLOATS_PER_KEYPOINT: usize = FEATURE_DIMS + 3;
/// Round-2 payload size in bytes: 128 x 131 x 4.
pub const ROUND2_PAYLOAD_BYTES: usize = KEYPOINT_COUNT * FLOATS_PER_KEYPOINT * 4;
/// Round-2 request payload: a single float.
pub const REQUEST_PAYLOAD_BYTES: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("message truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("record count {count} exceeds limit {limit}")]
    CountTooLarge { count: usize, limit: usize },
    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: usize },
}

fn put_header(buf: &mut Vec<u8>, id: u32, tick: u32, count: u32) {
    buf.extend_from_slice(&id.to_le_bytes());
    buf.extend_from_slice(&tick.to_le_bytes());
    buf.extend_from_slice(&count.to_le_bytes());
}

fn read_header(bytes: &[u8]) -> Result<(u32, u32, u32), WireError> {
    if bytes.len() < HEADER_BYTES {
        return Err(WireError::Truncated {
            need: HEADER_BYTES,
            have: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    Ok((word(0), word(4), word(8)))
}

fn read_f32(bytes: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Round-1 payload: 2D center positions of the sender's detected objects,
/// in the sender's sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Round1Message {
    pub source_id: VehicleId,
    pub tick: u32,
    pub centers: Vec<(f32, f32)>,
}

impl Round1Message {
    pub fn payload_len(&self) -> usize {
        self.centers.len() * 8
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES + self.payload_len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.encoded_len());
        put_header(&mut buf, self.source_id, self.tick, self.centers.len() as u32);
        for (x, y) in &self.centers {
            buf.extend_from_slice(&x.to_le_bytes());
            buf.extend_from_slice(&y.to_le_bytes());
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (source_id, tick, count) = read_header(bytes)?;
        let count = count as usize;
        if count > crate::perception::MAX_DETECTIONS {
            return Err(WireError::CountTooLarge {
                count,
                limit: crate::perception::MAX_DETECTIONS,
            });
        }
        let need = HEADER_BYTES + count * 8;
        if bytes.len() < need {
            return Err(WireError::Truncated {
                need,
                have: bytes.len(),
            });
        }
        if bytes.len() > need {
            return Err(WireError::TrailingBytes {
                extra: bytes.len() - need,
            });
        }
        let centers = (0..count)
            .map(|i| {
                let off = HEADER_BYTES + i * 8;
                (read_f32(bytes, off), read_f32(bytes, off + 4))
            })
            .collect();
        Ok(Self {
            source_id,
            tick,
            centers,
        })
    }
}

/// Request for a round-2 point-feature transmission. The payload is the
/// single float the cost model charges for.
#[derive(Debug, Clone, PartialEq)]
pub struct Round2Request {
    pub target_id: VehicleId,
    pub tick: u32,
    pub token: f32,
}

impl Round2Request {
    pub fn payload_len(&self) -> usize {
        REQUEST_PAYLOAD_BYTES
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES + REQUEST_PAYLOAD_BYTES
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.encoded_len());
        put_header(&mut buf, self.target_id, self.tick, 1);
        buf.extend_from_slice(&self.token.to_le_bytes());
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (target_id, tick, _count) = read_header(bytes)?;
        let need = HEADER_BYTES + REQUEST_PAYLOAD_BYTES;
        if bytes.len() < need {
            return Err(WireError::Truncated {
                need,
                have: bytes.len(),
            });
        }
        if bytes.len() > need {
            return Err(WireError::TrailingBytes {
                extra: bytes.len() - need,
            });
        }
        Ok(Self {
            target_id,
            tick,
            token: read_f32(bytes, HEADER_BYTES),
        })
    }
}

/// One encoded key point: feature vector plus sensor-relative 3D position.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub feature: Vec<f32>,
    pub position: [f32; 3],
}

/// Round-2 payload: the sender's encoded point-feature observation, always
/// exactly [`KEYPOINT_COUNT`] key points of [`FLOATS_PER_KEYPOINT`] floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Round2Message {
    pub source_id: VehicleId,
    pub tick: u32,
    pub keypoints: Vec<Keypoint>,
}

impl Round2Message {
    pub fn payload_len(&self) -> usize {
        ROUND2_PAYLOAD_BYTES
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES + ROUND2_PAYLOAD_BYTES
    }

    pub fn encode(&self) -> Vec<u8> {
        debug_assert_eq!(self.keypoints.len(), KEYPOINT_COUNT);
        let mut buf = Vec::with_capacity(self.encoded_len());
        put_header(&mut buf, self.source_id, self.tick, KEYPOINT_COUNT as u32);
        for kp in &self.keypoints {
            debug_assert_eq!(kp.feature.len(), FEATURE_DIMS);
            for f in &kp.feature {
                buf.extend_from_slice(&f.to_le_bytes());
            }
            for p in &kp.position {
                buf.extend_from_slice(&p.to_le_bytes());
            }
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (source_id, tick, count) = read_header(bytes)?;
        if count as usize != KEYPOINT_COUNT {
            return Err(WireError::CountTooLarge {
                count: count as usize,
                limit: KEYPOINT_COUNT,
            });
        }
        let need = HEADER_BYTES + ROUND2_PAYLOAD_BYTES;
        if bytes.len() < need {
            return Err(WireError::Truncated {
                need,
                have: bytes.len(),
            });
        }
        if bytes.len() > need {
            return Err(WireError::TrailingBytes {
                extra: bytes.len() - need,
            });
        }
        let mut keypoints = Vec::with_capacity(KEYPOINT_COUNT);
        let mut off = HEADER_BYTES;
        for _ in 0..KEYPOINT_COUNT {
            let mut feature = Vec::with_capacity(FEATURE_DIMS);
            for _ in 0..FEATURE_DIMS {
                feature.push(read_f32(bytes, off));
                off += 4;
            }
            let position = [
                read_f32(bytes, off),
                read_f32(bytes, off + 4),
                read_f32(bytes, off + 8),
            ];
            off += 12;
            keypoints.push(Keypoint { feature, position });
        }
        Ok(Self {
            source_id,
            tick,
            keypoints,
        })
    }
}
