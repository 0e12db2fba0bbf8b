//! TCP listener. Each connection gets a reader thread and a heartbeat
//! thread; decoded frames from every peer land on one channel.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use super::codec::{encode, DecodeError, FrameReader};
use super::msg::{Frame, Role};

pub const WIRE_LOG_ENV: &str = "RMFS_WIRE_LOG";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Peer {
    pub role: Role,
    pub id: u32,
}

impl Peer {
    pub fn robot(id: u32) -> Self {
        Self { role: Role::Robot, id }
    }

    pub fn station(id: u32) -> Self {
        Self {
            role: Role::Station,
            id,
        }
    }
}

impl fmt::Display for Peer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.role {
            Role::Robot => "robot",
            Role::Station => "station",
            Role::Feed => "feed",
        };
        write!(f, "{p}:{}", self.id)
    }
}

#[derive(Debug)]
pub enum Incoming {
    Registered(Peer),
    Frame(Peer, Frame),
    Malformed(Peer, DecodeError),
    Disconnected(Peer, String),
}

/// Called with connections that open with an HTTP request instead of a frame.
pub type UpgradeHook = Arc<dyn Fn(TcpStream) + Send + Sync>;

#[derive(Clone)]
pub struct ServerOptions {
    pub heartbeat: Duration,
    pub missed_pongs: u32,
    pub upgrade: Option<UpgradeHook>,
    /// Raw frame tee; defaults to the file named by `RMFS_WIRE_LOG`.
    pub wire_log: Option<PathBuf>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            heartbeat: Duration::from_secs(5),
            missed_pongs: 3,
            upgrade: None,
            wire_log: std::env::var_os(WIRE_LOG_ENV).map(PathBuf::from),
        }
    }
}

struct Conn {
    writer: Arc<Mutex<TcpStream>>,
    token: u64,
}

type Tap = Arc<Mutex<File>>;

struct Shared {
    peers: Mutex<BTreeMap<Peer, Conn>>,
    tx: Mutex<Sender<Incoming>>,
    tap: Option<Tap>,
    stop: AtomicBool,
    tokens: AtomicU64,
    opts: ServerOptions,
}

impl Shared {
    fn post(&self, m: Incoming) {
        let _ = self.tx.lock().expect("channel lock").send(m);
    }

    fn tee(&self, dir: &str, who: &str, text: &str) {
        if let Some(tap) = &self.tap {
            let ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
            let mut f = tap.lock().expect("tap lock");
            let _ = write!(f, "{ms}\t{dir}\t{who}\t{text}");
        }
    }
}

pub struct WireServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    rx: Receiver<Incoming>,
}

impl WireServer {
    /// Binds the listener; an address already in use is an error.
    pub fn bind(addr: impl ToSocketAddrs, opts: ServerOptions) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let tap = match &opts.wire_log {
            Some(p) => Some(Arc::new(Mutex::new(
                OpenOptions::new().create(true).append(true).open(p)?,
            ))),
            None => None,
        };
        let (tx, rx) = mpsc::channel();
        let shared = Arc::new(Shared {
            peers: Mutex::new(BTreeMap::new()),
            tx: Mutex::new(tx),
            tap,
            stop: AtomicBool::new(false),
            tokens: AtomicU64::new(0),
            opts,
        });
        let s = shared.clone();
        thread::Builder::new()
            .name("wire-accept".into())
            .spawn(move || accept_loop(listener, s))?;
        Ok(Self { addr, shared, rx })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn send(&self, peer: Peer, frame: &Frame) -> io::Result<()> {
        let writer = {
            let peers = self.shared.peers.lock().expect("peer lock");
            match peers.get(&peer) {
                Some(c) => c.writer.clone(),
                None => return Err(io::Error::new(io::ErrorKind::NotConnected, format!("{peer} not connected"))),
            }
        };
        let text = encode(frame);
        self.shared.tee(">", &peer.to_string(), &text);
        let mut w = writer.lock().expect("writer lock");
        w.write_all(text.as_bytes())
    }

    pub fn is_connected(&self, peer: Peer) -> bool {
        self.shared.peers.lock().expect("peer lock").contains_key(&peer)
    }

    pub fn peers(&self) -> Vec<Peer> {
        self.shared.peers.lock().expect("peer lock").keys().copied().collect()
    }

    pub fn recv_timeout(&self, d: Duration) -> Option<Incoming> {
        match self.rx.recv_timeout(d) {
            Ok(m) => Some(m),
            Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => None,
        }
    }

    pub fn try_recv(&self) -> Option<Incoming> {
        self.rx.try_recv().ok()
    }

    /// Drops a peer's connection.
    pub fn kick(&self, peer: Peer) {
        if let Some(c) = self.shared.peers.lock().expect("peer lock").get(&peer) {
            let _ = c.writer.lock().expect("writer lock").shutdown(Shutdown::Both);
        }
    }

    pub fn shutdown(&self) {
        if self.shared.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        let _ = TcpStream::connect(self.addr);
        for c in self.shared.peers.lock().expect("peer lock").values() {
            let _ = c.writer.lock().expect("writer lock").shutdown(Shutdown::Both);
        }
    }
}

impl Drop for WireServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    for stream in listener.incoming() {
        if shared.stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let s = shared.clone();
        let _ = thread::Builder::new()
            .name("wire-conn".into())
            .spawn(move || handle_conn(stream, s));
    }
}

fn refuse(stream: &mut TcpStream, id: u32, text: String) {
    let f = Frame::Error {
        robot_id: id,
        msg_id: 0,
        text,
        at: None,
    };
    let _ = stream.write_all(encode(&f).as_bytes());
    let _ = stream.shutdown(Shutdown::Both);
}

fn handle_conn(mut stream: TcpStream, shared: Arc<Shared>) {
    let _ = stream.set_nodelay(true);
    if let Some(hook) = &shared.opts.upgrade {
        let mut head = [0u8; 4];
        let _ = stream.set_read_timeout(Some(Duration::from_secs(10)));
        if matches!(stream.peek(&mut head), Ok(4)) && &head == b"GET " {
            let _ = stream.set_read_timeout(None);
            hook(stream);
            return;
        }
        let _ = stream.set_read_timeout(None);
    }
    let Ok(read_half) = stream.try_clone() else { return };
    let mut reader = FrameReader::new(BufReader::new(read_half));
    let peer = match reader.next_frame() {
        Ok(Some(Ok(Frame::Hello { role, id }))) => Peer { role, id },
        Ok(Some(Ok(other))) => {
            refuse(&mut stream, 0, format!("expected Hello, got {}", other.kind()));
            return;
        }
        Ok(Some(Err(e))) => {
            refuse(&mut stream, 0, format!("expected Hello: {}", e.reason));
            return;
        }
        _ => return,
    };
    let token = shared.tokens.fetch_add(1, Ordering::SeqCst);
    let writer = match stream.try_clone() {
        Ok(w) => Arc::new(Mutex::new(w)),
        Err(_) => return,
    };
    {
        let mut peers = shared.peers.lock().expect("peer lock");
        if peers.contains_key(&peer) {
            drop(peers);
            shared.tee("!", &peer.to_string(), "duplicate registration\n");
            refuse(&mut stream, peer.id, format!("duplicate registration {peer}"));
            return;
        }
        let ack = encode(&Frame::Hello {
            role: peer.role,
            id: peer.id,
        });
        if writer.lock().expect("writer lock").write_all(ack.as_bytes()).is_err() {
            return;
        }
        peers.insert(
            peer,
            Conn {
                writer: writer.clone(),
                token,
            },
        );
    }
    shared.post(Incoming::Registered(peer));

    let last_pong = Arc::new(AtomicU64::new(0));
    let alive = Arc::new(AtomicBool::new(true));
    {
        let (shared, writer, last_pong, alive) = (shared.clone(), writer.clone(), last_pong.clone(), alive.clone());
        let _ = thread::Builder::new()
            .name("wire-heartbeat".into())
            .spawn(move || heartbeat(peer, shared, writer, last_pong, alive));
    }

    let who = peer.to_string();
    let reason = loop {
        match reader.next_frame() {
            Ok(Some(Ok(f))) => {
                if shared.tap.is_some() {
                    shared.tee("<", &who, &encode(&f));
                }
                match f {
                    Frame::Pong { seq } => last_pong.fetch_max(seq, Ordering::SeqCst),
                    Frame::Ping { seq } => {
                        let pong = encode(&Frame::Pong { seq });
                        let _ = writer.lock().expect("writer lock").write_all(pong.as_bytes());
                        0
                    }
                    f => {
                        shared.post(Incoming::Frame(peer, f));
                        0
                    }
                };
            }
            Ok(Some(Err(e))) => {
                shared.tee("<?", &who, &format!("{}\n", e.line));
                shared.post(Incoming::Malformed(peer, e));
            }
            Ok(None) => break "connection closed".to_owned(),
            Err(e) => break e.to_string(),
        }
    };
    alive.store(false, Ordering::SeqCst);
    {
        let mut peers = shared.peers.lock().expect("peer lock");
        if peers.get(&peer).is_some_and(|c| c.token == token) {
            peers.remove(&peer);
        }
    }
    let _ = stream.shutdown(Shutdown::Both);
    shared.post(Incoming::Disconnected(peer, reason));
}

fn heartbeat(peer: Peer, shared: Arc<Shared>, writer: Arc<Mutex<TcpStream>>, last_pong: Arc<AtomicU64>, alive: Arc<AtomicBool>) {
    let period = shared.opts.heartbeat;
    let step = Duration::from_millis(50).min(period);
    let mut seq = 0u64;
    loop {
        let mut slept = Duration::ZERO;
        while slept < period {
            thread::sleep(step);
            slept += step;
            if !alive.load(Ordering::SeqCst) || shared.stop.load(Ordering::SeqCst) {
                return;
            }
        }
        if seq.saturating_sub(last_pong.load(Ordering::SeqCst)) >= u64::from(shared.opts.missed_pongs) {
            shared.tee("!", &peer.to_string(), "missed pongs\n");
            let _ = writer.lock().expect("writer lock").shutdown(Shutdown::Both);
            return;
        }
        seq += 1;
        let ping = encode(&Frame::Ping { seq });
        if writer.lock().expect("writer lock").write_all(ping.as_bytes()).is_err() {
            return;
        }
    }
}
