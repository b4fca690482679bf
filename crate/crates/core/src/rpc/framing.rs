//! `Content-Length` framing for the stdio transport.

use std::io;

use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncReadExt, AsyncWrite, AsyncWriteExt};

/// Frames larger than this are rejected without reading the body into memory.
pub const MAX_FRAME_BYTES: usize = 16 * 1024 * 1024;

#[derive(Debug, PartialEq, Eq)]
pub enum Frame {
    Message(String),
    /// A frame whose header or body could not be decoded; the stream stays usable.
    Malformed(String),
}

/// Reads one frame. `Ok(None)` means clean EOF between frames.
pub async fn read_frame<R: AsyncBufRead + Unpin>(reader: &mut R) -> io::Result<Option<Frame>> {
    let mut content_length: Option<usize> = None;
    let mut bad_header: Option<String> = None;
    let mut saw_header = false;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line).await?;
        if n == 0 {
            if saw_header {
                return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "EOF inside frame header"));
            }
            return Ok(None);
        }
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() {
            if !saw_header {
                // stray blank line between frames
                continue;
            }
            break;
        }
        saw_header = true;
        let Some((name, value)) = trimmed.split_once(':') else {
            bad_header.get_or_insert_with(|| format!("malformed header line {trimmed:?}"));
            continue;
        };
        if name.trim().eq_ignore_ascii_case("content-length") {
            match value.trim().parse::<usize>() {
                Ok(len) => content_length = Some(len),
                Err(_) => {
                    bad_header.get_or_insert_with(|| format!("invalid Content-Length {:?}", value.trim()));
                }
            }
        }
    }
    let Some(len) = content_length else {
        return Ok(Some(Frame::Malformed(
            bad_header.unwrap_or_else(|| "missing Content-Length header".into()),
        )));
    };
    if len > MAX_FRAME_BYTES {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes exceeds limit")));
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).await?;
    if let Some(reason) = bad_header {
        return Ok(Some(Frame::Malformed(reason)));
    }
    Ok(Some(match String::from_utf8(body) {
        Ok(s) => Frame::Message(s),
        Err(_) => Frame::Malformed("frame body is not UTF-8".into()),
    }))
}

pub async fn write_frame<W: AsyncWrite + Unpin>(writer: &mut W, body: &str) -> io::Result<()> {
    let header = format!("Content-Length: {}\r\n\r\n", body.len());
    writer.write_all(header.as_bytes()).await?;
    writer.write_all(body.as_bytes()).await?;
    writer.flush().await
}
