//! JSON-RPC 2.0 message shapes and error codes.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const INTERNAL_ERROR: i64 = -32603;
pub const NOT_INITIALIZED: i64 = -32002;

pub const OUT_OF_RANGE: i64 = -32010;
pub const UNKNOWN_DOCUMENT: i64 = -32011;
pub const UNKNOWN_SUGGESTION: i64 = -32012;
pub const ALREADY_RESOLVED: i64 = -32013;
pub const NO_CURRENT_GROUP: i64 = -32014;
pub const EMPTY_TYPE_SET: i64 = -32015;
pub const UNKNOWN_TYPE: i64 = -32016;
pub const TASK_TOO_LONG: i64 = -32017;
pub const STALE_EVENT: i64 = -32018;

/// Request or response id. Numbers and strings are echoed back unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RequestId {
    Number(i64),
    String(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

impl RpcError {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            data: None,
        }
    }

    pub fn invalid_params(message: impl Into<String>) -> Self {
        Self::new(INVALID_PARAMS, message)
    }
}

/// A decoded inbound envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Incoming {
    /// `None` for notifications.
    pub id: Option<RequestId>,
    pub method: String,
    pub params: Value,
}

/// Outcome of decoding a frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    Message(Incoming),
    /// Something the client sent that we must answer with an error.
    Invalid { id: Option<RequestId>, error: RpcError },
    /// A response object from the client; nothing to do.
    Ignored,
}

pub fn decode(text: &str) -> Decoded {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            return Decoded::Invalid {
                id: None,
                error: RpcError::new(PARSE_ERROR, format!("parse error: {e}")),
            }
        }
    };
    let Value::Object(obj) = value else {
        return Decoded::Invalid {
            id: None,
            error: RpcError::new(INVALID_REQUEST, "expected a single JSON-RPC object (batches are not supported)"),
        };
    };
    let id = match obj.get("id") {
        None | Some(Value::Null) => None,
        Some(v) => match serde_json::from_value::<RequestId>(v.clone()) {
            Ok(id) => Some(id),
            Err(_) => {
                return Decoded::Invalid {
                    id: None,
                    error: RpcError::new(INVALID_REQUEST, "id must be an integer or string"),
                }
            }
        },
    };
    if obj.get("jsonrpc") != Some(&Value::String("2.0".into())) {
        return Decoded::Invalid {
            id,
            error: RpcError::new(INVALID_REQUEST, "jsonrpc must be \"2.0\""),
        };
    }
    let Some(method) = obj.get("method").and_then(Value::as_str) else {
        if obj.contains_key("result") || obj.contains_key("error") {
            return Decoded::Ignored;
        }
        return Decoded::Invalid {
            id,
            error: RpcError::new(INVALID_REQUEST, "missing method"),
        };
    };
    let params = match obj.get("params") {
        None | Some(Value::Null) => Value::Object(Default::default()),
        Some(p @ Value::Object(_)) => p.clone(),
        Some(_) => {
            return Decoded::Invalid {
                id,
                error: RpcError::invalid_params("params must be an object"),
            }
        }
    };
    Decoded::Message(Incoming {
        id,
        method: method.to_owned(),
        params,
    })
}

pub fn response(id: &RequestId, result: Value) -> Value {
    json!({ "jsonrpc": "2.0", "id": id, "result": result })
}

pub fn error_response(id: Option<&RequestId>, error: &RpcError) -> Value {
    json!({ "jsonrpc": "2.0", "id": id, "error": error })
}

pub fn notification(method: &str, params: Value) -> Value {
    json!({ "jsonrpc": "2.0", "method": method, "params": params })
}
