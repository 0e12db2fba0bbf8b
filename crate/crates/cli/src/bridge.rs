//! Websocket bridge for browser station consoles. A socket opened at
//! `/station/{id}` is relayed line for line to an ordinary wire connection
//! registered as that station, so frames stay byte-identical.

use std::io::{self, ErrorKind};
use std::net::{SocketAddr, TcpStream};
use std::sync::{Arc, Mutex, OnceLock};
use std::thread;
use std::time::Duration;

use rmfs_core::wire::client::Client;
use rmfs_core::wire::server::UpgradeHook;
use rmfs_core::wire::Role;
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::protocol::frame::coding::CloseCode;
use tungstenite::protocol::CloseFrame;
use tungstenite::{Message, WebSocket};

/// Station id from a request path such as `/station/3`.
pub fn station_from_path(path: &str) -> Option<u32> {
    let rest = path.strip_prefix("/station/")?;
    let rest = rest.split(['?', '#']).next()?;
    rest.trim_end_matches('/').parse().ok()
}

/// Upgrade hook for [`WireServer`](rmfs_core::wire::server::WireServer) that
/// relays to the server listening at `wire`, set once the server is bound.
pub fn hook(wire: Arc<OnceLock<SocketAddr>>) -> UpgradeHook {
    Arc::new(move |stream: TcpStream| {
        let Some(&wire) = wire.get() else { return };
        let _ = thread::Builder::new()
            .name("ws-bridge".into())
            .spawn(move || {
                if let Err(e) = relay(stream, wire) {
                    eprintln!("station bridge: {e}");
                }
            });
    })
}

fn not_found(path: &str) -> ErrorResponse {
    let mut r = ErrorResponse::new(Some(format!("no station endpoint at {path}")));
    *r.status_mut() = tungstenite::http::StatusCode::NOT_FOUND;
    r
}

fn relay(stream: TcpStream, wire: SocketAddr) -> io::Result<()> {
    let mut station = None;
    let ws = tungstenite::accept_hdr(stream, |req: &Request, resp: Response| {
        match station_from_path(req.uri().path()) {
            Some(id) => {
                station = Some(id);
                Ok(resp)
            }
            None => Err(not_found(req.uri().path())),
        }
    })
    .map_err(|e| io::Error::other(e.to_string()))?;
    let id = station.expect("set by the handshake");
    let ws = Arc::new(Mutex::new(ws));

    let mut client = match Client::connect(wire, Role::Station, id) {
        Ok(c) => c,
        Err(e) => {
            let mut ws = ws.lock().expect("ws lock");
            let _ = ws.close(Some(CloseFrame {
                code: CloseCode::Policy,
                reason: e.to_string().into(),
            }));
            let _ = ws.flush();
            return Err(e);
        }
    };
    let mut upstream = client.try_clone_writer()?;
    ws.lock()
        .expect("ws lock")
        .get_ref()
        .set_read_timeout(Some(Duration::from_millis(50)))?;

    // engine -> browser
    let down = {
        let ws = ws.clone();
        thread::spawn(move || {
            while let Ok(Some(f)) = client.recv() {
                let text = rmfs_core::wire::encode(&f);
                let mut ws = ws.lock().expect("ws lock");
                if ws.send(Message::text(text.trim_end())).is_err() {
                    break;
                }
            }
            let mut ws = ws.lock().expect("ws lock");
            let _ = ws.close(None);
            let _ = ws.flush();
        })
    };

    // browser -> engine
    loop {
        let msg = {
            let mut ws: std::sync::MutexGuard<'_, WebSocket<TcpStream>> = ws.lock().expect("ws lock");
            ws.read()
        };
        match msg {
            Ok(Message::Text(t)) => {
                let line = t.as_str();
                if line.contains('\n') {
                    continue;
                }
                use std::io::Write;
                upstream.write_all(line.as_bytes())?;
                upstream.write_all(b"\n")?;
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if down.is_finished() {
                    break;
                }
                thread::sleep(Duration::from_millis(5));
            }
            Err(_) => break,
        }
    }
    let _ = upstream.shutdown(std::net::Shutdown::Both);
    let _ = down.join();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths() {
        assert_eq!(station_from_path("/station/3"), Some(3));
        assert_eq!(station_from_path("/station/12/?x=1"), Some(12));
        assert_eq!(station_from_path("/robot/3"), None);
        assert_eq!(station_from_path("/station/"), None);
    }
}
