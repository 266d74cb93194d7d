//! Message delivery backends.
//!
//! The exchange logic is transport-agnostic: a transport moves an encoded
//! message from one simulated vehicle to another and returns the bytes as
//! received. The UDP backend binds one loopback socket per vehicle and must
//! deliver byte-identical payloads to the in-process backend.

use std::collections::HashMap;
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::time::Duration;

use crate::world::VehicleId;

/// Largest UDP datagram chunk; round-2 messages exceed the 64 KiB datagram
/// limit and are fragmented.
const CHUNK_BYTES: usize = 32 * 1024;
const CHUNK_HEADER_BYTES: usize = 8;

pub trait MessageTransport {
    /// Delivers `payload` from one vehicle to another, returning the bytes
    /// as seen by the receiver.
    fn deliver(&mut self, from: VehicleId, to: VehicleId, payload: &[u8]) -> io::Result<Vec<u8>>;

    fn name(&self) -> &'static str;
}

/// Zero-copy in-process delivery.
#[derive(Debug, Default)]
pub struct InprocTransport;

impl MessageTransport for InprocTransport {
    fn deliver(&mut self, _from: VehicleId, _to: VehicleId, payload: &[u8]) -> io::Result<Vec<u8>> {
        Ok(payload.to_vec())
    }

    fn name(&self) -> &'static str {
        "inproc"
    }
}

/// Loopback UDP delivery with one socket per simulated vehicle.
///
/// Messages are fragmented into chunks of at most [`CHUNK_BYTES`], each
/// prefixed with (u32 total message length, u32 chunk offset), and
/// reassembled on the receiving socket.
pub struct UdpTransport {
    sockets: HashMap<VehicleId, UdpSocket>,
    addrs: HashMap<VehicleId, SocketAddr>,
}

impl UdpTransport {
    pub fn new() -> Self {
        Self {
            sockets: HashMap::new(),
            addrs: HashMap::new(),
        }
    }

    fn ensure_socket(&mut self, id: VehicleId) -> io::Result<()> {
        if !self.sockets.contains_key(&id) {
            let socket = UdpSocket::bind(("127.0.0.1", 0))?;
            socket.set_read_timeout(Some(Duration::from_secs(5)))?;
            self.addrs.insert(id, socket.local_addr()?);
            self.sockets.insert(id, socket);
        }
        Ok(())
    }
}

impl Default for UdpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl MessageTransport for UdpTransport {
    fn deliver(&mut self, from: VehicleId, to: VehicleId, payload: &[u8]) -> io::Result<Vec<u8>> {
        self.ensure_socket(from)?;
        self.ensure_socket(to)?;
        let dest = self.addrs[&to];
        let sender = &self.sockets[&from];

        let total = payload.len() as u32;
        let mut offset = 0usize;
        loop {
            let end = (offset + CHUNK_BYTES).min(payload.len());
            let mut datagram = Vec::with_capacity(CHUNK_HEADER_BYTES + end - offset);
            datagram.extend_from_slice(&total.to_le_bytes());
            datagram.extend_from_slice(&(offset as u32).to_le_bytes());
            datagram.extend_from_slice(&payload[offset..end]);
            sender.send_to(&datagram, dest)?;
            offset = end;
            if offset >= payload.len() {
                break;
            }
        }

        let receiver = &self.sockets[&to];
        let mut assembled = vec![0u8; payload.len()];
        let mut received = 0usize;
        let mut buf = vec![0u8; CHUNK_HEADER_BYTES + CHUNK_BYTES];
        while received < payload.len() || (payload.is_empty() && received == 0) {
            let (n, _) = receiver.recv_from(&mut buf)?;
            if n < CHUNK_HEADER_BYTES {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    "short udp chunk",
                ));
            }
            let msg_len = u32::from_le_bytes(buf[0..4].try_into().unwrap()) as usize;
            let chunk_off = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
            if msg_len != payload.len() || chunk_off + n - CHUNK_HEADER_BYTES > msg_len {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    "udp chunk does not match message in flight",
                ));
            }
            assembled[chunk_off..chunk_off + n - CHUNK_HEADER_BYTES]
                .copy_from_slice(&buf[CHUNK_HEADER_BYTES..n]);
            received += n - CHUNK_HEADER_BYTES;
            if payload.is_empty() {
                break;
            }
        }
        Ok(assembled)
    }

    fn name(&self) -> &'static str {
        "udp"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inproc_returns_payload_verbatim() {
        let mut t = InprocTransport;
        let payload = vec![1u8, 2, 3];
        assert_eq!(t.deliver(0, 1, &payload).unwrap(), payload);
    }

    #[test]
    fn udp_delivers_byte_identical_payloads() {
        let mut t = UdpTransport::new();
        let small = vec![7u8; 16];
        assert_eq!(t.deliver(0, 1, &small).unwrap(), small);

        // Larger than one chunk: exercises fragmentation and reassembly.
        let big: Vec<u8> = (0..67_084u32).map(|i| (i % 251) as u8).collect();
        assert_eq!(t.deliver(2, 3, &big).unwrap(), big);
    }
}
