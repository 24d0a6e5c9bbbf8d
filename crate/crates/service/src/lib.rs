//! Role endpoints over TCP, with one append-only store per stateful role.

pub mod client;
pub mod endpoints;
pub mod parallel;
pub mod server;
pub mod store;
pub mod wire;

use std::path::Path;
use std::sync::Arc;

use evot_core::protocol::{role_seed, Authority, Meter, PublicParams, RoleSecrets};

pub use client::{call, Endpoints, RemoteBoard, RemoteDeployment};
pub use endpoints::{serve_role, Clock, Role, RoleConfig, Running, ServiceError};
pub use parallel::{run_parallel, ParallelError, ParallelReport};
pub use server::{Handler, ServerHandle};
pub use store::{Store, StoreError};
pub use wire::{Frame, WireEnvelope, WireError};

/// All five endpoints on loopback, with manual clocks and stores in `dir`.
pub struct Cluster {
    pub endpoints: Endpoints,
    pub running: Vec<Running>,
}

impl Cluster {
    pub fn deployment(&self) -> RemoteDeployment {
        RemoteDeployment::new(self.endpoints.clone())
    }

    pub fn shutdown(self) {
        for r in self.running {
            r.handle.shutdown();
        }
    }
}

/// Config for one role of a loopback cluster. Role seeds follow the
/// in-process deployment, so both produce the same board.
pub fn cluster_config(
    role: Role,
    bind: &str,
    pp: &Arc<PublicParams>,
    secrets: &RoleSecrets,
    roll: &[String],
    seed: u64,
    dir: &Path,
    meter: &Arc<Meter>,
) -> RoleConfig {
    let authority = match role {
        Role::Board => None,
        Role::Rc => Some(Authority::RegCenter),
        Role::Po => Some(Authority::PollOfficer),
        Role::Vc => Some(Authority::VotCenter),
        Role::Cc => Some(Authority::CountCenter),
    };
    RoleConfig {
        role,
        bind: bind.into(),
        pp: pp.clone(),
        keys: authority.map(|a| secrets[a].clone()),
        roll: if role == Role::Rc { roll.to_vec() } else { Vec::new() },
        store: (role != Role::Cc).then(|| dir.join(format!("{role}.log"))),
        seed: matches!(role, Role::Rc | Role::Po | Role::Vc).then(|| role_seed(seed, role.name())),
        board: None,
        vc: None,
        manual_clock: true,
        meter: meter.clone(),
    }
}

pub fn launch_cluster(
    pp: Arc<PublicParams>,
    secrets: &RoleSecrets,
    roll: &[String],
    seed: u64,
    dir: &Path,
    meter: Arc<Meter>,
) -> Result<Cluster, ServiceError> {
    let cfg = |role| cluster_config(role, "127.0.0.1:0", &pp, secrets, roll, seed, dir, &meter);
    let board = serve_role(cfg(Role::Board))?;
    let board_addr = board.handle.addr().to_string();
    let with_board = |role| RoleConfig {
        board: Some(board_addr.clone()),
        ..cfg(role)
    };
    let vc = serve_role(with_board(Role::Vc))?;
    let vc_addr = vc.handle.addr().to_string();
    let rc = serve_role(with_board(Role::Rc))?;
    let po = serve_role(RoleConfig {
        vc: Some(vc_addr.clone()),
        ..cfg(Role::Po)
    })?;
    let cc = serve_role(with_board(Role::Cc))?;
    let endpoints = Endpoints {
        board: board_addr,
        rc: rc.handle.addr().to_string(),
        po: po.handle.addr().to_string(),
        vc: vc_addr,
        cc: cc.handle.addr().to_string(),
    };
    Ok(Cluster {
        endpoints,
        running: vec![board, rc, po, vc, cc],
    })
}
