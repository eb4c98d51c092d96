use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::protocol::{self, Frame};
use super::{GuidanceError, GuidanceProvider, GuidanceRequest, GuidanceResponse};

pub const DEFAULT_BRIDGE_PORT: u16 = 7631;
pub const DEFAULT_BRIDGE_ADDR: &str = "127.0.0.1:7631";
const ADDR_ENV: &str = "COMPC_BRIDGE_ADDR";

/// Address from `COMPC_BRIDGE_ADDR`, falling back to the local default port.
pub fn bridge_addr_from_env() -> String {
    std::env::var(ADDR_ENV).ok().filter(|s| !s.trim().is_empty()).unwrap_or_else(|| DEFAULT_BRIDGE_ADDR.to_string())
}

fn resolve(addr: &str) -> Result<SocketAddr, GuidanceError> {
    addr.to_socket_addrs()
        .map_err(|e| GuidanceError::Transport(format!("cannot resolve {addr}: {e}")))?
        .next()
        .ok_or_else(|| GuidanceError::Transport(format!("no address for {addr}")))
}

fn connect(addr: &str, timeout: Duration) -> Result<TcpStream, GuidanceError> {
    let stream = TcpStream::connect_timeout(&resolve(addr)?, timeout)?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    stream.set_nodelay(true)?;
    Ok(stream)
}

/// Sends a ping frame and waits for the pong.
pub fn healthcheck(addr: &str, timeout: Duration) -> bool {
    let Ok(mut stream) = connect(addr, timeout) else {
        return false;
    };
    if protocol::write_frame(&mut stream, &protocol::encode_ping()).is_err() {
        return false;
    }
    matches!(protocol::read_frame(&mut stream).and_then(|b| protocol::decode_response(&b)), Ok(Frame::Ping))
}

/// Client for a guidance server speaking the binary frame protocol.
///
/// One request is in flight at a time. A transport failure drops the connection;
/// the next call reconnects.
#[derive(Debug)]
pub struct BridgeProvider {
    addr: String,
    timeout: Duration,
    stream: Option<TcpStream>,
}

impl BridgeProvider {
    pub fn new(addr: impl Into<String>) -> Self {
        Self { addr: addr.into(), timeout: Duration::from_secs(120), stream: None }
    }

    pub fn from_env() -> Self {
        Self::new(bridge_addr_from_env())
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    fn exchange(&mut self, body: &[u8]) -> Result<Vec<u8>, GuidanceError> {
        if self.stream.is_none() {
            self.stream = Some(connect(&self.addr, self.timeout)?);
        }
        let stream = self.stream.as_mut().expect("connected above");
        let result = protocol::write_frame(stream, body)
            .map_err(GuidanceError::from)
            .and_then(|_| protocol::read_frame(stream));
        if result.is_err() {
            self.stream = None;
        }
        result
    }
}

impl GuidanceProvider for BridgeProvider {
    fn name(&self) -> &str {
        "bridge"
    }

    fn image_gradient(&mut self, req: &GuidanceRequest) -> Result<GuidanceResponse, GuidanceError> {
        let body = protocol::encode_request(req)?;
        let reply = self.exchange(&body)?;
        match protocol::decode_response(&reply)? {
            Frame::Response(resp) => {
                resp.check_against(req)?;
                Ok(resp)
            }
            Frame::Error(msg) => Err(GuidanceError::Remote(msg)),
            other => Err(GuidanceError::Contract(format!("unexpected reply {other:?}"))),
        }
    }
}
