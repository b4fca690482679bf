//! JSON-RPC 2.0 daemon surface.
//!
//! The same envelope and method set is carried by two transports: stdio with
//! `Content-Length` framing, and WebSocket with one message per text frame.
//! See `docs/protocol.md` for the wire contract.

pub mod connection;
pub mod envelope;
pub mod framing;
pub mod methods;
pub mod server;

pub use connection::{run_session, DaemonOptions, FrameSink, Inbound, SessionSummary, PROTOCOL_VERSION};
pub use server::{bind_ws, serve_stdio, serve_ws};
