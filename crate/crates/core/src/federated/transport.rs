//! Moving framed client updates to the server.
//!
//! A transport opens one [`Uplink`] per client for a round and an [`Inbox`]
//! on the server side. The inbox only ever yields CRC-verified payloads or an
//! error; a damaged frame never surfaces as a partial payload.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::wire::{decode_single_frame, read_frame};
use crate::error::TransportError;

pub trait Uplink: Send {
    fn send(&mut self, frame: Vec<u8>) -> Result<(), TransportError>;
}

pub trait Inbox: Send {
    /// Next verified payload, waiting at most `timeout`.
    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>, TransportError>;
}

pub struct RoundChannels {
    pub uplinks: Vec<Box<dyn Uplink>>,
    pub inbox: Box<dyn Inbox>,
}

pub trait Transport {
    fn open_round(&mut self, num_clients: usize) -> Result<RoundChannels, TransportError>;
}

/// Channel-backed transport for clients running as threads of one process.
#[derive(Debug, Default, Clone, Copy)]
pub struct InProcessTransport;

struct ChannelUplink(Sender<Vec<u8>>);

impl Uplink for ChannelUplink {
    fn send(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        self.0.send(frame).map_err(|_| TransportError::Closed)
    }
}

struct ChannelInbox(Receiver<Vec<u8>>);

impl Inbox for ChannelInbox {
    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>, TransportError> {
        match self.0.recv_timeout(timeout) {
            Ok(frame) => decode_single_frame(&frame),
            Err(RecvTimeoutError::Timeout) => Err(TransportError::Timeout {
                received: 0,
                expected: 0,
            }),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::Closed),
        }
    }
}

impl Transport for InProcessTransport {
    fn open_round(&mut self, num_clients: usize) -> Result<RoundChannels, TransportError> {
        let (tx, rx) = mpsc::channel();
        let uplinks = (0..num_clients)
            .map(|_| Box::new(ChannelUplink(tx.clone())) as Box<dyn Uplink>)
            .collect();
        Ok(RoundChannels {
            uplinks,
            inbox: Box::new(ChannelInbox(rx)),
        })
    }
}

/// TCP transport over `127.0.0.1`. Each client connects for the round, writes
/// its frames and closes; the server reads every connection on its own thread.
#[derive(Debug, Default, Clone, Copy)]
pub struct LoopbackTransport;

struct SocketUplink {
    addr: std::net::SocketAddr,
    stream: Option<TcpStream>,
}

impl Uplink for SocketUplink {
    fn send(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        if self.stream.is_none() {
            let s = TcpStream::connect(self.addr).map_err(|e| TransportError::Socket(e.to_string()))?;
            s.set_nodelay(true).ok();
            self.stream = Some(s);
        }
        let stream = self.stream.as_mut().expect("connected above");
        stream
            .write_all(&frame)
            .and_then(|_| stream.flush())
            .map_err(|e| TransportError::Socket(e.to_string()))
    }
}

impl Drop for SocketUplink {
    fn drop(&mut self) {
        if let Some(s) = &self.stream {
            let _ = s.shutdown(Shutdown::Write);
        }
    }
}

struct SocketInbox {
    rx: Receiver<Result<Vec<u8>, TransportError>>,
    closed: Arc<AtomicBool>,
}

impl Inbox for SocketInbox {
    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>, TransportError> {
        match self.rx.recv_timeout(timeout) {
            Ok(item) => item,
            Err(RecvTimeoutError::Timeout) => Err(TransportError::Timeout {
                received: 0,
                expected: 0,
            }),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::Closed),
        }
    }
}

impl Drop for SocketInbox {
    fn drop(&mut self) {
        self.closed.store(true, Ordering::SeqCst);
    }
}

fn serve_connection(stream: TcpStream, tx: Sender<Result<Vec<u8>, TransportError>>) {
    let mut stream = stream;
    loop {
        match read_frame(&mut stream) {
            Ok(Some(payload)) => {
                if tx.send(Ok(payload)).is_err() {
                    return;
                }
            }
            Ok(None) => return,
            Err(e) => {
                let _ = tx.send(Err(e));
                return;
            }
        }
    }
}

impl Transport for LoopbackTransport {
    fn open_round(&mut self, num_clients: usize) -> Result<RoundChannels, TransportError> {
        let listener =
            TcpListener::bind("127.0.0.1:0").map_err(|e| TransportError::Socket(e.to_string()))?;
        let addr = listener
            .local_addr()
            .map_err(|e| TransportError::Socket(e.to_string()))?;
        listener
            .set_nonblocking(true)
            .map_err(|e| TransportError::Socket(e.to_string()))?;
        let (tx, rx) = mpsc::channel();
        let closed = Arc::new(AtomicBool::new(false));
        let accept_closed = Arc::clone(&closed);
        thread::spawn(move || {
            let mut accepted = 0;
            while accepted < num_clients && !accept_closed.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        accepted += 1;
                        if stream.set_nonblocking(false).is_err() {
                            continue;
                        }
                        let tx = tx.clone();
                        thread::spawn(move || serve_connection(stream, tx));
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        thread::sleep(Duration::from_millis(1));
                    }
                    Err(e) => {
                        let _ = tx.send(Err(TransportError::Socket(e.to_string())));
                        return;
                    }
                }
            }
        });
        let uplinks = (0..num_clients)
            .map(|_| Box::new(SocketUplink { addr, stream: None }) as Box<dyn Uplink>)
            .collect();
        Ok(RoundChannels {
            uplinks,
            inbox: Box::new(SocketInbox { rx, closed }),
        })
    }
}

/// Damage applied to frames sent by one client.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip one bit of the CRC trailer.
    CorruptChecksum,
    /// Flip one bit inside the payload, leaving the trailer intact.
    CorruptPayload { byte: usize },
    /// Send only the first `keep` bytes of the frame.
    Truncate { keep: usize },
    /// Never send anything.
    Drop,
}

impl Fault {
    pub fn apply(&self, mut frame: Vec<u8>) -> Option<Vec<u8>> {
        match *self {
            Fault::CorruptChecksum => {
                let last = frame.len() - 1;
                frame[last] ^= 0x01;
                Some(frame)
            }
            Fault::CorruptPayload { byte } => {
                let span = frame.len().saturating_sub(8).max(1);
                frame[4 + byte % span] ^= 0x10;
                Some(frame)
            }
            Fault::Truncate { keep } => {
                frame.truncate(keep.min(frame.len().saturating_sub(1)));
                Some(frame)
            }
            Fault::Drop => None,
        }
    }
}

/// Wraps a transport and damages the frames of selected clients (by uplink index).
pub struct FaultyTransport<T> {
    inner: T,
    faults: BTreeMap<usize, Fault>,
}

impl<T: Transport> FaultyTransport<T> {
    pub fn new(inner: T, faults: BTreeMap<usize, Fault>) -> Self {
        Self { inner, faults }
    }
}

struct FaultyUplink {
    inner: Box<dyn Uplink>,
    fault: Fault,
}

impl Uplink for FaultyUplink {
    fn send(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        match self.fault.apply(frame) {
            Some(damaged) => self.inner.send(damaged),
            None => Ok(()),
        }
    }
}

impl<T: Transport> Transport for FaultyTransport<T> {
    fn open_round(&mut self, num_clients: usize) -> Result<RoundChannels, TransportError> {
        let mut channels = self.inner.open_round(num_clients)?;
        channels.uplinks = channels
            .uplinks
            .into_iter()
            .enumerate()
            .map(|(i, inner)| match self.faults.get(&i) {
                Some(&fault) => Box::new(FaultyUplink { inner, fault }) as Box<dyn Uplink>,
                None => inner,
            })
            .collect();
        Ok(channels)
    }
}

/// Wraps a transport and keeps a copy of every frame put on the wire.
pub struct RecordingTransport<T> {
    inner: T,
    log: Arc<Mutex<Vec<Vec<u8>>>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            log: Arc::default(),
        }
    }

    pub fn frames(&self) -> Vec<Vec<u8>> {
        self.log.lock().expect("recording lock").clone()
    }
}

struct RecordingUplink {
    inner: Box<dyn Uplink>,
    log: Arc<Mutex<Vec<Vec<u8>>>>,
}

impl Uplink for RecordingUplink {
    fn send(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        self.log.lock().expect("recording lock").push(frame.clone());
        self.inner.send(frame)
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn open_round(&mut self, num_clients: usize) -> Result<RoundChannels, TransportError> {
        let mut channels = self.inner.open_round(num_clients)?;
        channels.uplinks = channels
            .uplinks
            .into_iter()
            .map(|inner| {
                Box::new(RecordingUplink {
                    inner,
                    log: Arc::clone(&self.log),
                }) as Box<dyn Uplink>
            })
            .collect();
        Ok(channels)
    }
}

/// One item from `inbox`, giving up at `deadline`.
pub(crate) fn recv_until(
    inbox: &mut dyn Inbox,
    deadline: Instant,
) -> Result<Vec<u8>, TransportError> {
    let now = Instant::now();
    let remaining = deadline.saturating_duration_since(now);
    if remaining.is_zero() {
        return Err(TransportError::Timeout {
            received: 0,
            expected: 0,
        });
    }
    inbox.recv(remaining)
}
