//! Newline-delimited JSON framing.

use std::io::{self, BufRead};

use thiserror::Error;

use super::msg::Frame;

/// Longest accepted frame, newline excluded.
pub const MAX_FRAME: usize = 1 << 20;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bad frame ({reason}): {line}")]
pub struct DecodeError {
    /// The offending line, kept for logging (truncated for huge frames).
    pub line: String,
    pub reason: String,
}

pub fn encode(frame: &Frame) -> String {
    let mut s = serde_json::to_string(frame).expect("frames always serialize");
    s.push('\n');
    s
}

pub fn decode(line: &str) -> Result<Frame, DecodeError> {
    let trimmed = line.strip_suffix('\n').unwrap_or(line);
    let trimmed = trimmed.strip_suffix('\r').unwrap_or(trimmed);
    serde_json::from_str(trimmed).map_err(|e| DecodeError {
        line: clip(trimmed),
        reason: e.to_string(),
    })
}

fn clip(s: &str) -> String {
    if s.len() <= 200 {
        return s.to_owned();
    }
    let mut end = 200;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &s[..end])
}

/// Reads frames from a byte stream. A bad line yields an error and the
/// reader carries on with the next one.
pub struct FrameReader<R> {
    inner: R,
    buf: Vec<u8>,
}

impl<R: BufRead> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            buf: Vec::new(),
        }
    }

    pub fn get_ref(&self) -> &R {
        &self.inner
    }

    /// `Ok(None)` at end of stream.
    pub fn next_frame(&mut self) -> io::Result<Option<Result<Frame, DecodeError>>> {
        loop {
            self.buf.clear();
            let mut oversized = false;
            loop {
                let chunk = self.inner.fill_buf()?;
                if chunk.is_empty() {
                    break;
                }
                let (take, done) = match chunk.iter().position(|&b| b == b'\n') {
                    Some(i) => (i + 1, true),
                    None => (chunk.len(), false),
                };
                if self.buf.len() + take <= MAX_FRAME + 1 {
                    self.buf.extend_from_slice(&chunk[..take]);
                } else {
                    oversized = true;
                }
                self.inner.consume(take);
                if done {
                    break;
                }
            }
            if self.buf.is_empty() && !oversized {
                return Ok(None);
            }
            if oversized {
                return Ok(Some(Err(DecodeError {
                    line: clip(&String::from_utf8_lossy(&self.buf)),
                    reason: format!("frame longer than {MAX_FRAME} bytes"),
                })));
            }
            let text = match std::str::from_utf8(&self.buf) {
                Ok(t) => t,
                Err(e) => {
                    return Ok(Some(Err(DecodeError {
                        line: clip(&String::from_utf8_lossy(&self.buf)),
                        reason: e.to_string(),
                    })))
                }
            };
            if text.trim().is_empty() {
                continue;
            }
            return Ok(Some(decode(text)));
        }
    }
}

impl<R: BufRead> Iterator for FrameReader<R> {
    type Item = Result<Frame, DecodeError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().ok().flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::WaypointId;

    #[test]
    fn rest_layout_is_canonical() {
        let f = Frame::Rest {
            robot_id: 2,
            msg_id: 7,
            at: None,
        };
        assert_eq!(encode(&f), "{\"type\":\"Rest\",\"robot_id\":2,\"msg_id\":7}\n");
        assert_eq!(decode(&encode(&f)).unwrap(), f);
    }

    #[test]
    fn garbage_then_valid() {
        let input = b"garbage\n{\"type\":\"Ping\",\"seq\":3}\n\n{\"type\":\"Nope\"}\n";
        let mut r = FrameReader::new(&input[..]);
        let e = r.next().unwrap().unwrap_err();
        assert_eq!(e.line, "garbage");
        assert_eq!(r.next().unwrap().unwrap(), Frame::Ping { seq: 3 });
        assert!(r.next().unwrap().is_err());
        assert!(r.next().is_none());
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(decode("{\"type\":\"Ping\",\"seq\":1,\"extra\":0}").is_err());
    }

    #[test]
    fn go_with_time() {
        let f = Frame::Go {
            robot_id: 1,
            msg_id: 3,
            waypoints: vec![WaypointId(4), WaypointId(5)],
            at: Some(12.75),
        };
        let s = encode(&f);
        assert_eq!(
            s,
            "{\"type\":\"Go\",\"robot_id\":1,\"msg_id\":3,\"waypoints\":[4,5],\"at\":12.75}\n"
        );
        assert_eq!(decode(&s).unwrap(), f);
    }

    #[test]
    fn oversized_frame_skipped() {
        let mut input = vec![b'x'; MAX_FRAME + 10];
        input.push(b'\n');
        input.extend_from_slice(b"{\"type\":\"Pong\",\"seq\":1}\n");
        let mut r = FrameReader::new(&input[..]);
        assert!(r.next().unwrap().is_err());
        assert_eq!(r.next().unwrap().unwrap(), Frame::Pong { seq: 1 });
    }

    #[test]
    fn crlf_and_missing_final_newline() {
        let input = b"{\"type\":\"Ping\",\"seq\":1}\r\n{\"type\":\"Ping\",\"seq\":2}";
        let frames: Vec<_> = FrameReader::new(&input[..]).collect();
        assert_eq!(frames.len(), 2);
        assert!(frames.iter().all(Result::is_ok));
    }
}
