//! JSON file formats for networks, states, certificates, domains and reports.

use std::fs;
use std::path::Path;

use gasmono_core::certificate::{BisectionStep, DomainCertificate};
use gasmono_core::lmi::LmiWitness;
use gasmono_core::network::{Edge, Network, Node};
use gasmono_core::vi::Residuals;
use gasmono_core::{DomainSpec, GasState, ScalingMatrix};
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Network file: `{"nodes": [...], "edges": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: i64,
    #[serde(default)]
    pub slack: bool,
    /// Injection; missing means zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Squared pressure, required on the slack node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: i64,
    pub to: i64,
    pub lambda: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub r: f64,
}

fn one() -> f64 {
    1.0
}

impl NetworkFile {
    pub fn to_network(&self) -> Result<Network> {
        let slack_pi = self
            .nodes
            .iter()
            .find(|n| n.slack)
            .map(|n| {
                n.pi_sq
                    .ok_or_else(|| CliError::Input(format!("slack node {} has no pi_sq", n.id)))
            })
            .transpose()?
            .unwrap_or(0.0);
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                id: n.id,
                slack: n.slack,
                injection: if n.slack { 0.0 } else { n.q.unwrap_or(0.0) },
                pi_max: n.pi_max,
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                from: e.from,
                to: e.to,
                lambda: e.lambda,
                alpha: e.alpha,
                r: e.r,
            })
            .collect();
        Ok(Network::new(nodes, edges, slack_pi)?)
    }

    pub fn from_network(net: &Network) -> Self {
        let nodes = net
            .nodes()
            .iter()
            .map(|n| NodeRecord {
                id: n.id,
                slack: n.slack,
                q: (!n.slack).then_some(n.injection),
                pi_sq: n.slack.then_some(net.slack_pi()),
                pi_max: n.pi_max,
            })
            .collect();
        let edges = net
            .edges()
            .iter()
            .map(|e| EdgeRecord {
                from: e.from,
                to: e.to,
                lambda: e.lambda,
                alpha: e.alpha,
                r: e.r,
            })
            .collect();
        Self { nodes, edges }
    }
}

/// State file: `pi` over non-slack nodes, `phi` and `psi` over edges, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub pi: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl From<&GasState> for StateFile {
    fn from(z: &GasState) -> Self {
        Self {
            pi: z.pi.as_slice().to_vec(),
            phi: z.phi.as_slice().to_vec(),
            psi: z.psi.as_slice().to_vec(),
        }
    }
}

impl From<&StateFile> for GasState {
    fn from(s: &StateFile) -> Self {
        GasState::from_slices(&s.pi, &s.phi, &s.psi)
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.as_slice().to_vec()
}

/// `{"gamma", "Wa", "Wb", "Wc", "eta", "margin"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessJson {
    pub gamma: f64,
    #[serde(rename = "Wa")]
    pub wa: Vec<Vec<f64>>,
    #[serde(rename = "Wb")]
    pub wb: Vec<Vec<f64>>,
    #[serde(rename = "Wc")]
    pub wc: Vec<f64>,
    pub eta: Vec<f64>,
    pub margin: f64,
}

impl From<&LmiWitness> for WitnessJson {
    fn from(w: &LmiWitness) -> Self {
        Self {
            gamma: w.gamma,
            wa: rows(&w.wa),
            wb: rows(&w.wb),
            wc: vec_of(&w.wc),
            eta: vec_of(&w.eta),
            margin: w.margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceJson {
    pub gamma: f64,
    pub feasible: bool,
    pub outcome: String,
}

impl From<&BisectionStep> for TraceJson {
    fn from(s: &BisectionStep) -> Self {
        Self {
            gamma: s.gamma,
            feasible: s.feasible,
            outcome: s.outcome.to_string(),
        }
    }
}

/// Certificate in witness layout plus kind and search metadata.
/// `gamma` is `null` when no ratio bound is needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CertificateJson {
    pub kind: String,
    pub gamma: Option<f64>,
    pub cap_limited: bool,
    #[serde(rename = "Wa")]
    pub wa: Vec<Vec<f64>>,
    #[serde(rename = "Wb")]
    pub wb: Vec<Vec<f64>>,
    #[serde(rename = "Wc")]
    pub wc: Vec<f64>,
    pub eta: Option<Vec<f64>>,
    pub margin: Option<f64>,
    pub tree_residual: f64,
    pub sampled_min_eigenvalue: f64,
    pub bisection_trace: Vec<TraceJson>,
}

impl From<&DomainCertificate> for CertificateJson {
    fn from(c: &DomainCertificate) -> Self {
        let (wa, wb, wc) = match &c.scaling {
            ScalingMatrix::Block { wa, wb, wc } => (rows(wa), rows(wb), vec_of(wc)),
            // Certificates always carry block scalings; keep the dense form whole.
            ScalingMatrix::Dense(w) => (rows(w), Vec::new(), Vec::new()),
        };
        Self {
            kind: c.kind.as_str().to_string(),
            gamma: c.gamma.is_finite().then_some(c.gamma),
            cap_limited: c.cap_limited,
            wa,
            wb,
            wc,
            eta: c.witness.as_ref().map(|w| vec_of(&w.eta)),
            margin: c.witness.as_ref().map(|w| w.margin),
            tree_residual: c.tree_residual,
            sampled_min_eigenvalue: c.sampled_min_eigenvalue,
            bisection_trace: c.trace.iter().map(TraceJson::from).collect(),
        }
    }
}

/// `{"beta", "gamma", "piMax", "kind"}`; `gamma` is `null` when unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DomainJson {
    pub beta: f64,
    pub gamma: Option<f64>,
    pub pi_max: Vec<f64>,
    pub kind: String,
}

impl From<&DomainSpec> for DomainJson {
    fn from(d: &DomainSpec) -> Self {
        Self {
            beta: d.beta,
            gamma: d.gamma.is_finite().then_some(d.gamma),
            pi_max: vec_of(&d.pi_max),
            kind: d.kind.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualsJson {
    pub vi_residual: f64,
    pub flow_eq_residual: f64,
    pub pressure_ls_residual: f64,
    pub min_pi: f64,
    pub pi_cap_excess: f64,
    pub operator_residual: f64,
}

impl From<&Residuals> for ResidualsJson {
    fn from(r: &Residuals) -> Self {
        Self {
            vi_residual: r.vi_residual,
            flow_eq_residual: r.flow_eq_residual,
            pressure_ls_residual: r.pressure_ls_residual,
            min_pi: r.min_pi,
            pi_cap_excess: r.pi_cap_excess,
            operator_residual: r.operator_residual,
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_network(path: &Path) -> Result<Network> {
    read_json::<NetworkFile>(path)?.to_network()
}

pub fn read_state(path: &Path) -> Result<GasState> {
    Ok(GasState::from(&read_json::<StateFile>(path)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_round_trip() {
        let text = r#"{"nodes":[{"id":0,"slack":true,"pi_sq":10.0},{"id":4,"q":-1.5,"pi_max":50.0},{"id":2}],
            "edges":[{"from":0,"to":4,"lambda":1.0,"alpha":1.0,"r":0.0},{"from":4,"to":2,"lambda":2.0,"alpha":1.3,"r":0.5}]}"#;
        let file: NetworkFile = serde_json::from_str(text).unwrap();
        let net = file.to_network().unwrap();
        assert_eq!(net.slack_pi(), 10.0);
        assert_eq!(net.injections(), vec![-1.5, 0.0]);
        let back = NetworkFile::from_network(&net).to_network().unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn slack_without_pressure_is_rejected() {
        let text = r#"{"nodes":[{"id":0,"slack":true},{"id":1,"q":-1}],"edges":[{"from":0,"to":1,"lambda":1}]}"#;
        let file: NetworkFile = serde_json::from_str(text).unwrap();
        assert!(matches!(file.to_network(), Err(CliError::Input(_))));
    }

    #[test]
    fn state_round_trip() {
        let z = GasState::from_slices(&[9.0, 8.0], &[1.0, -1.0, 2.0], &[1.0, 1.0, 2.0]);
        let text = serde_json::to_string(&StateFile::from(&z)).unwrap();
        assert_eq!(text, r#"{"pi":[9.0,8.0],"phi":[1.0,-1.0,2.0],"psi":[1.0,1.0,2.0]}"#);
        let back: StateFile = serde_json::from_str(&text).unwrap();
        assert_eq!(GasState::from(&back), z);
    }
}
