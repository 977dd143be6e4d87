//! Config-driven HTTP completion provider.
//!
//! A provider is described by an endpoint, a credential env var, extra
//! headers, a JSON body template and a dotted path to the response text.
//! String values in the template that are exactly `{{prompt}}`, `{{model}}`,
//! `{{temperature}}`, `{{max_tokens}}` or `{{stop}}` are replaced by the
//! corresponding JSON value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::Value;

use super::{now_rfc3339, prompt_digest, Completion, CompletionProvider, GatewayError, GenerationParams};

fn default_auth_header() -> String {
    "Authorization".into()
}

fn default_auth_prefix() -> String {
    "Bearer ".into()
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, Deserialize)]
pub struct ProviderConfig {
    pub name: String,
    pub endpoint: String,
    /// Name of the env var holding the credential. Literal keys are not
    /// accepted in config.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_prefix")]
    pub auth_prefix: String,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    pub body_template: String,
    pub response_path: String,
    #[serde(default)]
    pub default_model: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

/// A `providers.toml` document: one `[[provider]]` table per vendor.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ProvidersFile {
    #[serde(default, rename = "provider")]
    pub providers: Vec<ProviderConfig>,
}

impl ProvidersFile {
    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        let f: ProvidersFile = toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))?;
        for p in &f.providers {
            serde_json::from_str::<Value>(&p.body_template)
                .map_err(|e| GatewayError::Config(format!("provider {}: body_template is not JSON: {e}", p.name)))?;
        }
        Ok(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, name: &str) -> Result<&ProviderConfig, GatewayError> {
        self.providers
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| GatewayError::Config(format!("no provider named {name:?}")))
    }
}

pub struct HttpProvider {
    config: ProviderConfig,
    credential: Option<String>,
    template: Value,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpProvider")
            .field("name", &self.config.name)
            .field("endpoint", &self.config.endpoint)
            .field("credential", &self.credential.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpProvider {
    /// Reads the credential from the configured env var.
    pub fn from_config(config: ProviderConfig) -> Result<Self, GatewayError> {
        let credential = match &config.auth_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| GatewayError::Config(format!("env var {var} is not set for provider {}", config.name)))?,
            ),
            None => None,
        };
        Self::with_credential(config, credential)
    }

    pub fn with_credential(config: ProviderConfig, credential: Option<String>) -> Result<Self, GatewayError> {
        let template = serde_json::from_str(&config.body_template)
            .map_err(|e| GatewayError::Config(format!("body_template: {e}")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(HttpProvider {
            config,
            credential,
            template,
            client,
        })
    }

    /// Request body for a call.
    pub fn render_body(&self, prompt: &str, params: &GenerationParams) -> Value {
        let model = if params.model_id.is_empty() {
            self.config.default_model.clone().unwrap_or_default()
        } else {
            params.model_id.clone()
        };
        let sub = |name: &str| -> Option<Value> {
            Some(match name {
                "prompt" => Value::from(prompt),
                "model" => Value::from(model.clone()),
                "temperature" => Value::from(params.temperature),
                "max_tokens" => Value::from(params.max_tokens),
                "stop" => Value::from(params.stop_sequences.clone()),
                _ => return None,
            })
        };
        fill(&self.template, &sub)
    }
}

fn fill(v: &Value, sub: &dyn Fn(&str) -> Option<Value>) -> Value {
    match v {
        Value::String(s) => s
            .strip_prefix("{{")
            .and_then(|r| r.strip_suffix("}}"))
            .and_then(|k| sub(k.trim()))
            .unwrap_or_else(|| v.clone()),
        Value::Array(a) => Value::Array(a.iter().map(|x| fill(x, sub)).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, x)| (k.clone(), fill(x, sub))).collect()),
        _ => v.clone(),
    }
}

/// Follows a dotted path such as `choices.0.message.content`.
pub(crate) fn extract_path<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(v, |cur, seg| match cur {
        Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
        Value::Object(o) => o.get(seg),
        _ => None,
    })
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, GatewayError> {
        let body = self.render_body(prompt, params);
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        for (k, v) in &self.config.headers {
            req = req.header(k, v);
        }
        if let Some(key) = &self.credential {
            req = req.header(&self.config.auth_header, format!("{}{key}", self.config.auth_prefix));
        }
        log::debug!("POST {} for provider {}", self.config.endpoint, self.config.name);
        let resp = req.send().map_err(|e| GatewayError::Transport(e.without_url().to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| GatewayError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(GatewayError::Provider {
                status: status.as_u16(),
                body: text,
            });
        }
        let json: Value = serde_json::from_str(&text).map_err(|e| GatewayError::Provider {
            status: status.as_u16(),
            body: format!("response is not JSON ({e}): {text}"),
        })?;
        let out = extract_path(&json, &self.config.response_path)
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::Provider {
                status: status.as_u16(),
                body: format!("no text at {}: {text}", self.config.response_path),
            })?;
        Ok(Completion {
            text: out.to_string(),
            prompt_digest: prompt_digest(prompt, params),
            timestamp: now_rfc3339(),
        })
    }

    fn name(&self) -> String {
        self.config.name.clone()
    }
}
