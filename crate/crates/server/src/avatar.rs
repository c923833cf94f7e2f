//! Simulated avatar on a wall clock over UDP.

use std::net::SocketAddr;
use std::time::Duration;

use telavatar_core::avatar::{AvatarConfig, AvatarNode, SpeakerScript};
use telavatar_core::pose::Pose;
use telavatar_core::transport::{Endpoint, Transport, UdpTransport};
use tokio::sync::watch;
use tokio::task::JoinHandle;

use crate::{ServerError, WallClock, TICK_MS};

pub struct AvatarRuntime {
    local: SocketAddr,
    shutdown: watch::Sender<bool>,
    task: JoinHandle<Pose>,
}

impl AvatarRuntime {
    /// Binds `bind` and starts talking to the edge at `edge`.
    pub async fn start(
        config: AvatarConfig,
        script: SpeakerScript,
        edge: SocketAddr,
        bind: &str,
        seed: u64,
    ) -> Result<Self, ServerError> {
        let mut transport = UdpTransport::bind(bind)
            .map_err(|source| ServerError::Bind { what: "avatar", addr: bind.to_string(), source })?;
        let local = transport.local_addr();
        let clock = WallClock::start();
        let mut node = AvatarNode::new(config, script, Endpoint::Udp(edge), seed, clock.now());
        log::info!("avatar {local} session {:#010x} -> edge {edge}", node.session_id());

        let (shutdown, mut stop) = watch::channel(false);
        let task = tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_millis(TICK_MS));
            tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                tokio::select! {
                    _ = stop.wait_for(|&s| s) => break,
                    _ = tick.tick() => {}
                }
                let now = clock.now();
                for (bytes, _) in transport.poll_receive(now) {
                    node.handle_datagram(&bytes, now);
                }
                node.tick(now);
                for (to, bytes) in node.take_outbound() {
                    if let Err(e) = transport.send(&to, &bytes, now) {
                        log::warn!("send to {to} failed: {e}");
                    }
                }
                for (t, entry) in node.take_log() {
                    log::info!("t={t} {}", serde_json::to_string(&entry).unwrap_or_default());
                }
            }
            node.pose()
        });
        Ok(Self { local, shutdown, task })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    /// Stops the avatar and returns its final true pose.
    pub async fn shutdown(self) -> Pose {
        let _ = self.shutdown.send(true);
        self.task.await.expect("avatar task panicked")
    }
}
