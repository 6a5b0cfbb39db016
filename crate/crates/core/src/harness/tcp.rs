//! One party driven over a byte stream.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use crate::qot::wire::{read_frame, write_frame};
use crate::qot::{Party, Transcript};

use super::HarnessError;

/// Runs `party` until it finishes or the stream fails. The transcript lists
/// frames in the order this side sent or received them, which for a strictly
/// alternating protocol equals the delivery order of the in-process driver.
pub fn drive_stream<R: Read, W: Write>(party: &mut dyn Party, r: &mut R, w: &mut W) -> Transcript {
    let mut transcript = Transcript::new();
    let mut outgoing = party.start();
    loop {
        for m in outgoing.drain(..) {
            transcript.record(party.role(), &m);
            if let Err(e) = write_frame(w, &m) {
                party.transport_failed(&format!("send failed: {e}"));
                return transcript;
            }
        }
        if party.finish().is_some() {
            return transcript;
        }
        match read_frame(r) {
            Ok(m) => {
                transcript.record(party.role().peer(), &m);
                outgoing = party.receive(&m);
            }
            Err(e) => {
                party.transport_failed(&format!("receive failed: {e}"));
                return transcript;
            }
        }
    }
}

pub fn accept_one(addr: &str, timeout: Duration) -> Result<TcpStream, HarnessError> {
    let listener = TcpListener::bind(addr).map_err(|e| HarnessError::Io(format!("bind {addr}: {e}")))?;
    log::info!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
    accept_on(&listener, timeout)
}

pub fn accept_on(listener: &TcpListener, timeout: Duration) -> Result<TcpStream, HarnessError> {
    let (stream, peer) = listener.accept().map_err(|e| HarnessError::Io(format!("accept: {e}")))?;
    log::info!("peer {peer} connected");
    prepare(stream, timeout)
}

/// Retries until the listener is up or the timeout passes.
pub fn connect(addr: &str, timeout: Duration) -> Result<TcpStream, HarnessError> {
    let start = std::time::Instant::now();
    let target = addr
        .to_socket_addrs()
        .map_err(|e| HarnessError::Io(format!("resolve {addr}: {e}")))?
        .next()
        .ok_or_else(|| HarnessError::Io(format!("no address for {addr}")))?;
    loop {
        match TcpStream::connect_timeout(&target, timeout) {
            Ok(s) => return prepare(s, timeout),
            Err(e) if start.elapsed() < timeout => {
                log::debug!("connect {addr}: {e}, retrying");
                std::thread::sleep(Duration::from_millis(50));
            }
            Err(e) => return Err(HarnessError::Io(format!("connect {addr}: {e}"))),
        }
    }
}

fn prepare(stream: TcpStream, timeout: Duration) -> Result<TcpStream, HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(e.to_string());
    stream.set_read_timeout(Some(timeout)).map_err(io)?;
    stream.set_write_timeout(Some(timeout)).map_err(io)?;
    stream.set_nodelay(true).map_err(io)?;
    Ok(stream)
}
