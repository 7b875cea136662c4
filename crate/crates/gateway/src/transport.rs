//! Blocking GET transport used by the external-server clients.

use std::sync::Mutex;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("{url} answered HTTP {code}")]
    Status { code: u16, url: String },
    #[error("network failure: {0}")]
    Network(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Request {
    pub url: String,
    pub query: Vec<(String, String)>,
    pub headers: Vec<(String, String)>,
    pub basic_auth: Option<(String, String)>,
}

impl Request {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            ..Self::default()
        }
    }

    pub fn query(mut self, key: &str, value: impl Into<String>) -> Self {
        self.query.push((key.to_string(), value.into()));
        self
    }

    pub fn header(mut self, key: &str, value: impl Into<String>) -> Self {
        self.headers.push((key.to_string(), value.into()));
        self
    }

    pub fn basic_auth(mut self, user: &str, password: &str) -> Self {
        self.basic_auth = Some((user.to_string(), password.to_string()));
        self
    }

    /// URL with the query string appended, as matched by fixture routes.
    pub fn full_url(&self) -> String {
        if self.query.is_empty() {
            return self.url.clone();
        }
        let q: Vec<String> = self.query.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}?{}", self.url, q.join("&"))
    }
}

pub trait Transport: Send + Sync {
    fn get(&self, request: &Request) -> Result<Vec<u8>, TransportError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, request: &Request) -> Result<Vec<u8>, TransportError> {
        let mut builder = self.client.get(&request.url).query(&request.query);
        for (k, v) in &request.headers {
            builder = builder.header(k, v);
        }
        if let Some((user, password)) = &request.basic_auth {
            builder = builder.basic_auth(user, Some(password));
        }
        let response = builder.send().map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(TransportError::Status {
                code: status.as_u16(),
                url: request.url.clone(),
            });
        }
        response
            .bytes()
            .map(|b| b.to_vec())
            .map_err(|e| TransportError::Network(e.to_string()))
    }
}

/// Offline transport answering from canned responses.
///
/// A route matches when its pattern is a substring of the request's full
/// URL; the longest matching pattern wins. Unmatched requests get a 404.
#[derive(Default)]
pub struct FixtureTransport {
    routes: Vec<(String, Result<Vec<u8>, u16>)>,
    log: Mutex<Vec<Request>>,
}

impl FixtureTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(mut self, pattern: &str, body: impl Into<Vec<u8>>) -> Self {
        self.routes.push((pattern.to_string(), Ok(body.into())));
        self
    }

    pub fn fail(mut self, pattern: &str, status: u16) -> Self {
        self.routes.push((pattern.to_string(), Err(status)));
        self
    }

    /// Requests served so far, in order.
    pub fn requests(&self) -> Vec<Request> {
        self.log.lock().unwrap().clone()
    }
}

impl Transport for FixtureTransport {
    fn get(&self, request: &Request) -> Result<Vec<u8>, TransportError> {
        self.log.lock().unwrap().push(request.clone());
        let url = request.full_url();
        let hit = self
            .routes
            .iter()
            .filter(|(p, _)| url.contains(p.as_str()))
            .max_by_key(|(p, _)| p.len());
        match hit {
            Some((_, Ok(body))) => Ok(body.clone()),
            Some((_, Err(code))) => Err(TransportError::Status { code: *code, url }),
            None => Err(TransportError::Status { code: 404, url }),
        }
    }
}
