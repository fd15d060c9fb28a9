//! Line-delimited JSON allocation service over TCP.
//!
//! Each request line is an [`AllocRequest`]; each reply line is either an
//! [`AllocResponse`] or `{"error": "..."}`. A bad line never closes the
//! connection.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentCheckpoint};
use crate::domain::Allocation;
use crate::env::{objective_j, project_action, Observation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocRequest {
    /// Raw demand pairs, most recent first.
    pub demand_history: Vec<(f64, f64)>,
    pub n_r: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocResponse {
    pub n_a: f64,
    pub n_b: f64,
    /// Objective of the allocation against the most recent demand pair.
    pub j_estimate: f64,
}

#[derive(Serialize)]
struct ErrorReply {
    error: String,
}

/// A loaded greedy policy. Never mutated after construction.
#[derive(Debug)]
pub struct AllocationService {
    agent: Agent,
}

impl AllocationService {
    pub fn new(agent: Agent) -> Self {
        Self { agent }
    }

    pub fn from_checkpoint(path: &Path) -> Result<Self> {
        let ck = AgentCheckpoint::load(path)?;
        Ok(Self::new(ck.into_agent()?))
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn handle(&self, req: &AllocRequest) -> Result<AllocResponse> {
        let env = self.agent.env_config();
        if !(req.n_r.is_finite() && req.n_r > 0.0) {
            return Err(Error::MalformedRequest(format!("n_r must be positive, got {}", req.n_r)));
        }
        if !(0.0..=1.0).contains(&req.zeta) {
            return Err(Error::MalformedRequest(format!("zeta must lie in [0, 1], got {}", req.zeta)));
        }
        if req.demand_history.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite())) {
            return Err(Error::MalformedRequest("demand values must be finite".into()));
        }
        let obs = Observation::from_history(&req.demand_history, env.window_n, env.capacity_norm)
            .map_err(|e| Error::MalformedRequest(format!("demand_history: {e}")))?;
        let alloc: Allocation = project_action(self.agent.policy(&obs)?, req.n_r);
        Ok(AllocResponse {
            n_a: alloc.n_a,
            n_b: alloc.n_b,
            j_estimate: objective_j(alloc, req.demand_history[0], req.zeta, env.d_min),
        })
    }

    /// Answers one request line with one reply line (without the newline).
    pub fn handle_line(&self, line: &str) -> String {
        let reply = serde_json::from_str::<AllocRequest>(line)
            .map_err(|e| Error::MalformedRequest(e.to_string()))
            .and_then(|req| self.handle(&req));
        match reply {
            Ok(resp) => serde_json::to_string(&resp),
            Err(e) => serde_json::to_string(&ErrorReply { error: e.to_string() }),
        }
        .expect("reply serialises")
    }

    fn serve_connection(&self, stream: TcpStream) -> std::io::Result<()> {
        let mut writer = stream.try_clone()?;
        for line in BufReader::new(stream).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut reply = self.handle_line(&line);
            reply.push('\n');
            writer.write_all(reply.as_bytes())?;
            writer.flush()?;
        }
        Ok(())
    }
}

pub struct Server {
    listener: TcpListener,
    service: Arc<AllocationService>,
}

impl Server {
    pub fn bind(addr: &str, service: AllocationService) -> Result<Self> {
        let bind_err = |source| Error::BindFailure { addr: addr.to_string(), source };
        let addrs: Vec<SocketAddr> = addr.to_socket_addrs().map_err(bind_err)?.collect();
        let listener = TcpListener::bind(&addrs[..]).map_err(|source| Error::BindFailure { addr: addr.to_string(), source })?;
        Ok(Self { listener, service: Arc::new(service) })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until the listener fails, one thread per connection.
    pub fn run(self) -> Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let service = Arc::clone(&self.service);
            thread::spawn(move || {
                // A dropped client only ends its own connection.
                let _ = service.serve_connection(stream);
            });
        }
        Ok(())
    }
}

/// Loads `checkpoint` and serves it on `bind` until the process exits.
pub fn serve(checkpoint: &Path, bind: &str) -> Result<()> {
    let service = AllocationService::from_checkpoint(checkpoint)?;
    Server::bind(bind, service)?.run()
}
