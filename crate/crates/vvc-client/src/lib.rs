//! Thin async client for the volt/var control service.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use vvc_core::api::{
    ApiError, CompareRequest, CompareResponse, HealthResponse, InferRequest, InferResponse,
    RunRecord, RunRequest, RunResponse, ValidateRequest, ValidateResponse,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    /// The service answered with an error body; `kind` is one of `config`,
    /// `io`, `runtime`, `not_found`.
    #[error("{kind}: {message}")]
    Api {
        status: u16,
        kind: String,
        message: String,
    },
}

impl ClientError {
    pub fn kind(&self) -> &str {
        match self {
            ClientError::Transport(_) => "transport",
            ClientError::Api { kind, .. } => kind,
        }
    }
}

pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:7071`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    async fn decode<T: DeserializeOwned>(
        response: reqwest::Response,
    ) -> Result<T, ClientError> {
        let status = response.status();
        if status.is_success() {
            Ok(response.json().await?)
        } else {
            let body: ApiError = response.json().await.unwrap_or(ApiError {
                kind: "runtime".into(),
                message: format!("service returned {status} with no error body"),
            });
            Err(ClientError::Api {
                status: status.as_u16(),
                kind: body.kind,
                message: body.message,
            })
        }
    }

    async fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        req: &Req,
    ) -> Result<Resp, ClientError> {
        let response = self
            .http
            .post(format!("{}{path}", self.base))
            .json(req)
            .send()
            .await?;
        Self::decode(response).await
    }

    async fn get<Resp: DeserializeOwned>(&self, path: &str) -> Result<Resp, ClientError> {
        let response = self.http.get(format!("{}{path}", self.base)).send().await?;
        Self::decode(response).await
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        self.get("/health").await
    }

    pub async fn validate(&self, req: &ValidateRequest) -> Result<ValidateResponse, ClientError> {
        self.post("/api/v1/validate", req).await
    }

    pub async fn infer(&self, req: &InferRequest) -> Result<InferResponse, ClientError> {
        self.post("/api/v1/infer", req).await
    }

    pub async fn run(&self, req: &RunRequest) -> Result<RunResponse, ClientError> {
        self.post("/api/v1/run", req).await
    }

    pub async fn runs(&self) -> Result<Vec<RunRecord>, ClientError> {
        self.get("/api/v1/runs").await
    }

    pub async fn compare(&self, req: &CompareRequest) -> Result<CompareResponse, ClientError> {
        self.post("/api/v1/compare", req).await
    }
}
