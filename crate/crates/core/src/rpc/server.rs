//! Transports: `Content-Length` framed stdio and WebSocket text frames.

use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use futures_util::stream::SplitSink;
use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncRead, AsyncWrite, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::WebSocketStream;
use tokio_util::sync::CancellationToken;

use super::connection::{run_session, DaemonOptions, FrameSink, Inbound, SessionStartError, SessionSummary};
use super::framing::{read_frame, write_frame, Frame};

const INBOUND_QUEUE: usize = 64;

pub struct StdioSink<W> {
    writer: W,
}

impl<W: AsyncWrite + Unpin + Send> FrameSink for StdioSink<W> {
    async fn send(&mut self, text: String) -> io::Result<()> {
        write_frame(&mut self.writer, &text).await
    }
}

/// Serves one session over a framed byte stream (normally stdin/stdout).
pub async fn serve_stdio<R, W>(opts: DaemonOptions, reader: R, writer: W) -> Result<SessionSummary, SessionStartError>
where
    R: AsyncRead + Unpin + Send + 'static,
    W: AsyncWrite + Unpin + Send,
{
    let (tx, rx) = mpsc::channel(INBOUND_QUEUE);
    tokio::spawn(async move {
        let mut reader = BufReader::new(reader);
        loop {
            let item = match read_frame(&mut reader).await {
                Ok(Some(Frame::Message(m))) => Inbound::Text(m),
                Ok(Some(Frame::Malformed(reason))) => Inbound::Malformed(reason),
                Ok(None) => break,
                Err(e) => {
                    tracing::warn!(error = %e, "stdio read failed; closing session");
                    break;
                }
            };
            if tx.send(item).await.is_err() {
                break;
            }
        }
    });
    run_session(opts, "stdio-1".to_owned(), rx, StdioSink { writer }).await
}

pub struct WsSink {
    inner: SplitSink<WebSocketStream<TcpStream>, Message>,
}

impl FrameSink for WsSink {
    async fn send(&mut self, text: String) -> io::Result<()> {
        self.inner.send(Message::text(text)).await.map_err(io::Error::other)
    }
}

/// `session.jsonl` → `session.ws-3.jsonl`, so concurrent sessions never share a file.
pub fn per_session_path(path: &Path, session_id: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{session_id}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{session_id}"),
    };
    path.with_file_name(name)
}

async fn ws_connection(opts: DaemonOptions, session_id: String, stream: TcpStream) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            tracing::warn!(error = %e, "websocket handshake failed");
            return;
        }
    };
    let (sink, mut source) = ws.split();
    let (tx, rx) = mpsc::channel(INBOUND_QUEUE);
    tokio::spawn(async move {
        while let Some(msg) = source.next().await {
            let item = match msg {
                Ok(Message::Text(t)) => Inbound::Text(t.to_string()),
                Ok(Message::Binary(_)) => Inbound::Malformed("binary frames are not supported".into()),
                Ok(Message::Close(_)) => break,
                Ok(_) => continue,
                Err(e) => {
                    tracing::warn!(error = %e, "websocket read failed; closing session");
                    break;
                }
            };
            if tx.send(item).await.is_err() {
                break;
            }
        }
    });
    match run_session(opts, session_id, rx, WsSink { inner: sink }).await {
        Ok(summary) => tracing::debug!(?summary.stats.fired, "ws session finished"),
        Err(e) => tracing::error!(error = %e, "ws session could not start"),
    }
}

/// Binds a loopback listener. Port 0 picks a free port.
pub async fn bind_ws(port: u16) -> io::Result<TcpListener> {
    TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], port))).await
}

/// Accepts WebSocket clients until `shutdown` fires. Each connection is an independent session.
pub async fn serve_ws(listener: TcpListener, opts: DaemonOptions, shutdown: CancellationToken) -> io::Result<()> {
    let mut n = 0u64;
    loop {
        let (stream, peer) = tokio::select! {
            _ = shutdown.cancelled() => return Ok(()),
            accepted = listener.accept() => accepted?,
        };
        n += 1;
        let session_id = format!("ws-{n}");
        tracing::info!(%peer, session = %session_id, "websocket client connected");
        let mut conn_opts = opts.clone();
        conn_opts.session_log = opts.session_log.as_deref().map(|p| per_session_path(p, &session_id));
        conn_opts.record = opts.record.as_deref().map(|p| per_session_path(p, &session_id));
        tokio::spawn(ws_connection(conn_opts, session_id, stream));
    }
}
