//! Binary frames exchanged with a guidance server.
//!
//! Every frame travels as a little-endian `u32` byte count followed by the body.
//! A body starts with a 16-byte header:
//!
//! | bytes | field                 |
//! |-------|-----------------------|
//! | 0..4  | magic `CPGD`          |
//! | 4..6  | version (`u16`)       |
//! | 6..8  | image height (`u16`)  |
//! | 8..10 | image width (`u16`)   |
//! | 10..12| flags (`u16`)         |
//! | 12..16| reserved, zero        |
//!
//! A request body continues with `Δelevation, Δazimuth, Δradius, step_fraction`
//! as `f32`, then the reference and current images (`H·W·3` `f32` each). A response
//! body continues with an `f32` weight and the gradient image. Flag bit 0 marks an
//! error frame whose payload is a UTF-8 message; flag bit 1 marks a ping/pong frame
//! with no payload. All numbers are little-endian.

use std::io::{Read, Write};

use super::{GuidanceError, GuidanceRequest, GuidanceResponse};
use crate::camera::RelativePose;
use crate::render::{decode_f32_le, encode_f32_le};

pub const MAGIC: [u8; 4] = *b"CPGD";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const FLAG_ERROR: u16 = 1;
pub const FLAG_PING: u16 = 1 << 1;
/// Upper bound on accepted frame bodies (a 1024² request is about 25 MB).
pub const MAX_FRAME_LEN: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub version: u16,
    pub height: u16,
    pub width: u16,
    pub flags: u16,
}

impl Header {
    pub fn new(height: usize, width: usize, flags: u16) -> Self {
        Self { version: VERSION, height: height as u16, width: width as u16, flags }
    }

    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..8].copy_from_slice(&self.height.to_le_bytes());
        b[8..10].copy_from_slice(&self.width.to_le_bytes());
        b[10..12].copy_from_slice(&self.flags.to_le_bytes());
        b
    }

    pub fn decode(body: &[u8]) -> Result<Self, GuidanceError> {
        if body.len() < HEADER_LEN {
            return Err(GuidanceError::Contract(format!("frame of {} bytes is shorter than a header", body.len())));
        }
        if body[0..4] != MAGIC {
            return Err(GuidanceError::Contract(format!("bad magic {:?}", &body[0..4])));
        }
        let u = |o: usize| u16::from_le_bytes([body[o], body[o + 1]]);
        let h = Header { version: u(4), height: u(6), width: u(8), flags: u(10) };
        if h.version != VERSION {
            return Err(GuidanceError::Contract(format!("unsupported protocol version {}", h.version)));
        }
        Ok(h)
    }

    pub fn is_error(&self) -> bool {
        self.flags & FLAG_ERROR != 0
    }

    pub fn is_ping(&self) -> bool {
        self.flags & FLAG_PING != 0
    }

    fn image_len(&self) -> usize {
        3 * self.height as usize * self.width as usize
    }
}

/// A frame body after header parsing.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Ping,
    Error(String),
    Request(GuidanceRequest),
    Response(GuidanceResponse),
}

fn check_dims(width: usize, height: usize) -> Result<(), GuidanceError> {
    if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(GuidanceError::Contract(format!("image size {width}×{height} not representable")));
    }
    Ok(())
}

pub fn encode_request(req: &GuidanceRequest) -> Result<Vec<u8>, GuidanceError> {
    req.validate()?;
    check_dims(req.width, req.height)?;
    let mut body = Header::new(req.height, req.width, 0).encode().to_vec();
    let p = &req.relative_pose;
    body.extend(encode_f32_le(&[p.d_elevation, p.d_azimuth, p.d_radius, req.step_fraction]));
    body.extend(encode_f32_le(&req.reference));
    body.extend(encode_f32_le(&req.current));
    Ok(body)
}

pub fn encode_response(height: usize, width: usize, resp: &GuidanceResponse) -> Result<Vec<u8>, GuidanceError> {
    check_dims(width, height)?;
    if resp.grad_image.len() != 3 * width * height {
        return Err(GuidanceError::Contract("gradient image does not match header size".into()));
    }
    let mut body = Header::new(height, width, 0).encode().to_vec();
    body.extend(encode_f32_le(&[resp.weight]));
    body.extend(encode_f32_le(&resp.grad_image));
    Ok(body)
}

pub fn encode_error(message: &str) -> Vec<u8> {
    let mut body = Header::new(0, 0, FLAG_ERROR).encode().to_vec();
    body.extend_from_slice(message.as_bytes());
    body
}

pub fn encode_ping() -> Vec<u8> {
    Header::new(0, 0, FLAG_PING).encode().to_vec()
}

fn floats(bytes: &[u8]) -> Result<Vec<f64>, GuidanceError> {
    decode_f32_le(bytes).map_err(|e| GuidanceError::Contract(e.to_string()))
}

/// Parses a request body (a server's view of the exchange).
pub fn decode_request(body: &[u8]) -> Result<Frame, GuidanceError> {
    let h = Header::decode(body)?;
    if h.is_ping() {
        return Ok(Frame::Ping);
    }
    let n = h.image_len();
    let expected = HEADER_LEN + 4 * (4 + 2 * n);
    if n == 0 || body.len() != expected {
        return Err(GuidanceError::Contract(format!("request body has {} bytes, expected {expected}", body.len())));
    }
    let v = floats(&body[HEADER_LEN..])?;
    Ok(Frame::Request(GuidanceRequest {
        width: h.width as usize,
        height: h.height as usize,
        relative_pose: RelativePose { d_elevation: v[0], d_azimuth: v[1], d_radius: v[2] },
        step_fraction: v[3],
        reference: v[4..4 + n].to_vec(),
        current: v[4 + n..].to_vec(),
    }))
}

/// Parses a response body (the client's view).
pub fn decode_response(body: &[u8]) -> Result<Frame, GuidanceError> {
    let h = Header::decode(body)?;
    if h.is_error() {
        return Ok(Frame::Error(String::from_utf8_lossy(&body[HEADER_LEN..]).into_owned()));
    }
    if h.is_ping() {
        return Ok(Frame::Ping);
    }
    let n = h.image_len();
    let expected = HEADER_LEN + 4 * (1 + n);
    if body.len() != expected {
        return Err(GuidanceError::Contract(format!("response body has {} bytes, expected {expected}", body.len())));
    }
    let v = floats(&body[HEADER_LEN..])?;
    Ok(Frame::Response(GuidanceResponse { weight: v[0], grad_image: v[1..].to_vec() }))
}

pub fn write_frame(w: &mut impl Write, body: &[u8]) -> std::io::Result<()> {
    w.write_all(&(body.len() as u32).to_le_bytes())?;
    w.write_all(body)?;
    w.flush()
}

pub fn read_frame(r: &mut impl Read) -> Result<Vec<u8>, GuidanceError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_FRAME_LEN {
        return Err(GuidanceError::Contract(format!("frame of {len} bytes exceeds limit")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> GuidanceRequest {
        GuidanceRequest {
            width: 3,
            height: 2,
            reference: (0..18).map(|i| i as f64 * 0.125).collect(),
            current: (0..18).map(|i| 1.0 - i as f64 * 0.0625).collect(),
            relative_pose: RelativePose { d_elevation: -12.5, d_azimuth: 170.0, d_radius: 0.0 },
            step_fraction: 0.25,
        }
    }

    #[test]
    fn request_layout() {
        let body = encode_request(&request()).unwrap();
        assert_eq!(body.len(), 16 + 4 * (4 + 36));
        assert_eq!(&body[0..4], b"CPGD");
        assert_eq!(u16::from_le_bytes([body[6], body[7]]), 2);
        assert_eq!(u16::from_le_bytes([body[8], body[9]]), 3);
        assert_eq!(f32::from_le_bytes(body[16..20].try_into().unwrap()), -12.5);
        assert_eq!(decode_request(&body).unwrap(), Frame::Request(request()));
    }

    #[test]
    fn response_and_control_frames() {
        let resp = GuidanceResponse { grad_image: (0..18).map(|i| i as f64 - 9.0).collect(), weight: 0.5 };
        let body = encode_response(2, 3, &resp).unwrap();
        assert_eq!(decode_response(&body).unwrap(), Frame::Response(resp));
        assert_eq!(decode_response(&encode_error("boom")).unwrap(), Frame::Error("boom".into()));
        assert_eq!(decode_request(&encode_ping()).unwrap(), Frame::Ping);
        let mut bad = encode_ping();
        bad[0] = b'X';
        assert!(matches!(decode_request(&bad), Err(GuidanceError::Contract(_))));
        assert!(decode_request(&encode_request(&request()).unwrap()[..40]).is_err());
    }

    #[test]
    fn framing() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"abc").unwrap();
        assert_eq!(buf, vec![3, 0, 0, 0, b'a', b'b', b'c']);
        assert_eq!(read_frame(&mut buf.as_slice()).unwrap(), b"abc");
        assert!(matches!(read_frame(&mut &buf[..5]), Err(GuidanceError::Transport(_))));
    }
}
