//! Loopback clients: emulated robots and stations that talk to a
//! [`WireServer`](super::server::WireServer) over TCP.

use std::io::{self, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::thread::{self, JoinHandle};

use super::codec::{encode, FrameReader};
use super::msg::{Frame, Role};
use crate::engine::{EmuRobot, EmuStation};

pub struct Client {
    reader: FrameReader<BufReader<TcpStream>>,
    writer: TcpStream,
}

impl Client {
    /// Connects and registers; fails if the server refuses the role.
    pub fn connect(addr: SocketAddr, role: Role, id: u32) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut c = Self {
            reader: FrameReader::new(BufReader::new(stream.try_clone()?)),
            writer: stream,
        };
        c.send(&Frame::Hello { role, id })?;
        match c.recv()? {
            Some(Frame::Hello { .. }) => Ok(c),
            Some(Frame::Error { text, .. }) => Err(io::Error::new(io::ErrorKind::ConnectionRefused, text)),
            other => Err(io::Error::other(format!("unexpected reply to Hello: {other:?}"))),
        }
    }

    pub fn send(&mut self, f: &Frame) -> io::Result<()> {
        self.writer.write_all(encode(f).as_bytes())
    }

    /// Next well-formed frame, answering pings on the way. `None` at end of stream.
    pub fn recv(&mut self) -> io::Result<Option<Frame>> {
        loop {
            match self.reader.next_frame()? {
                None => return Ok(None),
                Some(Err(_)) => continue,
                Some(Ok(Frame::Ping { seq })) => self.send(&Frame::Pong { seq })?,
                Some(Ok(f)) => return Ok(Some(f)),
            }
        }
    }

    /// Writes a line as is; used by bridges that relay frames untouched.
    pub fn send_raw(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")
    }

    /// Second handle for writing from another thread.
    pub fn try_clone_writer(&self) -> io::Result<TcpStream> {
        self.writer.try_clone()
    }

    pub fn close(&self) {
        let _ = self.writer.shutdown(std::net::Shutdown::Both);
    }
}

/// Serves one emulated robot until the server hangs up, or until
/// `drop_after` commands have been answered.
pub fn run_robot(addr: SocketAddr, mut emu: EmuRobot, drop_after: Option<usize>) -> io::Result<()> {
    let mut c = Client::connect(addr, Role::Robot, emu.id.0)?;
    let mut handled = 0;
    while let Some(f) = c.recv()? {
        if drop_after.is_some_and(|n| handled >= n) {
            c.close();
            return Ok(());
        }
        handled += 1;
        for r in emu.respond(&f) {
            c.send(&r)?;
        }
    }
    Ok(())
}

pub fn run_station(addr: SocketAddr, mut emu: EmuStation) -> io::Result<()> {
    let mut c = Client::connect(addr, Role::Station, emu.id.0)?;
    while let Some(f) = c.recv()? {
        if let Some(r) = emu.respond(&f) {
            c.send(&r)?;
        }
    }
    Ok(())
}

pub fn spawn_robot(addr: SocketAddr, emu: EmuRobot, drop_after: Option<usize>) -> JoinHandle<io::Result<()>> {
    thread::spawn(move || run_robot(addr, emu, drop_after))
}

pub fn spawn_station(addr: SocketAddr, emu: EmuStation) -> JoinHandle<io::Result<()>> {
    thread::spawn(move || run_station(addr, emu))
}
