use std::path::PathBuf;

use reqwest::blocking::Client;
use reqwest::Method;
use serde_json::Value;
use voselect_core::Workspace;
use voselect_server::{dispatch, router, ErrorBody, Router};

use crate::CliError;

/// Where requests go: an in-process service over a data directory, or a
/// remote one. Both speak the same `/v1` surface, so every subcommand works
/// identically in either mode.
pub enum Backend {
    Local {
        runtime: tokio::runtime::Runtime,
        app: Router,
    },
    Remote {
        client: Client,
        base: String,
    },
}

impl Backend {
    pub fn local(data_dir: PathBuf) -> Result<Self, CliError> {
        let ws = Workspace::open(data_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(Backend::Local { runtime, app: router(ws) })
    }

    pub fn remote(url: &str) -> Self {
        Backend::Remote {
            client: Client::new(),
            base: url.trim_end_matches('/').to_string(),
        }
    }

    pub fn get(&self, path: &str) -> Result<Value, CliError> {
        self.call(Method::GET, path, None)
    }

    pub fn post(&self, path: &str, body: Option<Value>) -> Result<Value, CliError> {
        self.call(Method::POST, path, body)
    }

    fn call(&self, method: Method, path: &str, body: Option<Value>) -> Result<Value, CliError> {
        let (status, value) = match self {
            Backend::Local { runtime, app } => {
                let (s, v) = runtime.block_on(dispatch(app, method, path, body));
                (s.as_u16(), v)
            }
            Backend::Remote { client, base } => {
                let mut req = client.request(method, format!("{base}{path}"));
                if let Some(b) = body {
                    req = req.json(&b);
                }
                let resp = req.send().map_err(|e| CliError::Runtime(e.to_string()))?;
                let status = resp.status().as_u16();
                let text = resp.text().map_err(|e| CliError::Runtime(e.to_string()))?;
                let value = if text.is_empty() {
                    Value::Null
                } else {
                    serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("bad response: {e}")))?
                };
                (status, value)
            }
        };
        if status < 400 {
            return Ok(value);
        }
        let body: ErrorBody = serde_json::from_value(value.clone()).unwrap_or(ErrorBody {
            code: "http".into(),
            message: format!("status {status}"),
            detail: value,
        });
        Err(CliError::Api {
            validation: status == 400 || status == 422,
            body,
        })
    }
}
