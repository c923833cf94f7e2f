//! The edge event loop. One task owns the [`EdgeCore`]; HTTP handlers talk
//! to it through [`EdgeHandle`] and wait for the reply.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use telavatar_core::edge::{EdgeConfig, EdgeCore, EdgeError, EdgeEvent, EdgeSnapshot, GoalPlan, Mode, ModeChange};
use telavatar_core::proto::Command;
use telavatar_core::transport::{Transport, UdpTransport};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;

use crate::{http, resolve, ServerError, WallClock, TICK_MS};

const EVENT_BUFFER: usize = 1024;

/// The event loop is gone (shut down or panicked).
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("edge event loop is not running")]
pub struct LoopClosed;

enum Request {
    Snapshot(oneshot::Sender<EdgeSnapshot>),
    SetMode(Mode, oneshot::Sender<ModeChange>),
    Submit(Command, oneshot::Sender<Result<u64, EdgeError>>),
    Goal(f64, f64, oneshot::Sender<Result<GoalPlan, EdgeError>>),
    Stop(oneshot::Sender<Result<u64, EdgeError>>),
}

/// Cloneable client of the edge loop.
#[derive(Clone)]
pub struct EdgeHandle {
    tx: mpsc::Sender<Request>,
    events: broadcast::Sender<EdgeEvent>,
    shutdown: watch::Receiver<bool>,
    map_text: Arc<str>,
}

impl EdgeHandle {
    async fn call<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Request) -> Result<T, LoopClosed> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(make(reply)).await.map_err(|_| LoopClosed)?;
        rx.await.map_err(|_| LoopClosed)
    }

    pub async fn snapshot(&self) -> Result<EdgeSnapshot, LoopClosed> {
        self.call(Request::Snapshot).await
    }

    pub async fn set_mode(&self, mode: Mode) -> Result<ModeChange, LoopClosed> {
        self.call(|r| Request::SetMode(mode, r)).await
    }

    pub async fn submit(&self, cmd: Command) -> Result<Result<u64, EdgeError>, LoopClosed> {
        self.call(|r| Request::Submit(cmd, r)).await
    }

    pub async fn goal(&self, x: f64, y: f64) -> Result<Result<GoalPlan, EdgeError>, LoopClosed> {
        self.call(|r| Request::Goal(x, y, r)).await
    }

    pub async fn stop(&self) -> Result<Result<u64, EdgeError>, LoopClosed> {
        self.call(Request::Stop).await
    }

    /// Events emitted from now on.
    pub fn subscribe(&self) -> broadcast::Receiver<EdgeEvent> {
        self.events.subscribe()
    }

    /// The map file as loaded.
    pub fn map_text(&self) -> &str {
        &self.map_text
    }

    /// Resolves once shutdown has been requested.
    pub fn closed(&self) -> impl Future<Output = ()> + Send + 'static {
        let mut rx = self.shutdown.clone();
        async move {
            let _ = rx.wait_for(|&stop| stop).await;
        }
    }
}

struct EdgeLoop {
    core: EdgeCore,
    transport: UdpTransport,
    clock: WallClock,
    rx: mpsc::Receiver<Request>,
    events: broadcast::Sender<EdgeEvent>,
}

impl EdgeLoop {
    async fn run(mut self, mut shutdown: watch::Receiver<bool>) {
        let mut tick = tokio::time::interval(Duration::from_millis(TICK_MS));
        tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            tokio::select! {
                _ = shutdown.wait_for(|&stop| stop) => break,
                _ = tick.tick() => self.on_tick(),
                req = self.rx.recv() => match req {
                    Some(req) => self.on_request(req),
                    None => break,
                },
            }
        }
        log::info!("edge loop stopped");
    }

    fn on_tick(&mut self) {
        let now = self.clock.now();
        for (bytes, from) in self.transport.poll_receive(now) {
            self.core.handle_datagram(&bytes, from, now);
        }
        self.core.tick(now);
        self.flush(now);
    }

    fn on_request(&mut self, req: Request) {
        let now = self.clock.now();
        // a dropped reply only means the client went away
        match req {
            Request::Snapshot(reply) => {
                let _ = reply.send(self.core.snapshot(now));
            }
            Request::SetMode(mode, reply) => {
                let _ = reply.send(self.core.set_mode(mode, now));
            }
            Request::Submit(cmd, reply) => {
                let _ = reply.send(self.core.submit_manual(cmd, now));
            }
            Request::Goal(x, y, reply) => {
                let _ = reply.send(self.core.submit_goal(x, y, now));
            }
            Request::Stop(reply) => {
                let _ = reply.send(self.core.emergency_stop(now));
            }
        }
        self.flush(now);
    }

    fn flush(&mut self, now: u64) {
        for (to, bytes) in self.core.take_outbound() {
            if let Err(e) = self.transport.send(&to, &bytes, now) {
                log::warn!("send to {to} failed: {e}");
            }
        }
        for event in self.core.take_events() {
            log::debug!("event {} {} {}", event.id, event.kind.as_str(), event.data);
            // no subscribers is fine
            let _ = self.events.send(event);
        }
    }
}

/// A running edge: event loop, UDP protocol endpoint and HTTP server.
pub struct EdgeServer {
    http_addr: SocketAddr,
    proto_addr: SocketAddr,
    handle: EdgeHandle,
    shutdown: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl EdgeServer {
    /// Binds both listeners and starts serving. Port 0 picks a free port.
    pub async fn start(config: EdgeConfig, map_text: String, http: &str, proto: &str) -> Result<Self, ServerError> {
        let core = EdgeCore::new(config, map_text.clone())?;
        let proto_at = resolve(proto)?;
        let transport = UdpTransport::bind(proto_at)
            .map_err(|source| ServerError::Bind { what: "protocol", addr: proto.to_string(), source })?;
        let listener = tokio::net::TcpListener::bind(resolve(http)?)
            .await
            .map_err(|source| ServerError::Bind { what: "http", addr: http.to_string(), source })?;
        let http_addr = listener.local_addr().expect("bound listener has an address");
        let proto_addr = transport.local_addr();

        let (tx, rx) = mpsc::channel(64);
        let (events, _) = broadcast::channel(EVENT_BUFFER);
        let (shutdown, shutdown_rx) = watch::channel(false);
        let handle = EdgeHandle { tx, events: events.clone(), shutdown: shutdown_rx.clone(), map_text: map_text.into() };

        let edge_loop = EdgeLoop { core, transport, clock: WallClock::start(), rx, events };
        let loop_task = tokio::spawn(edge_loop.run(shutdown_rx));
        let app = http::router(handle.clone());
        let closed = handle.closed();
        let http_task = tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(closed).await {
                log::error!("http server failed: {e}");
            }
        });
        log::info!("edge listening: http {http_addr}, protocol udp {proto_addr}");
        Ok(Self { http_addr, proto_addr, handle, shutdown, tasks: vec![loop_task, http_task] })
    }

    pub fn http_addr(&self) -> SocketAddr {
        self.http_addr
    }

    pub fn proto_addr(&self) -> SocketAddr {
        self.proto_addr
    }

    pub fn handle(&self) -> &EdgeHandle {
        &self.handle
    }

    /// Serves until `signal` resolves, then shuts down.
    pub async fn run_until(self, signal: impl Future<Output = ()>) {
        signal.await;
        self.shutdown().await;
    }

    pub async fn shutdown(self) {
        let _ = self.shutdown.send(true);
        for task in self.tasks {
            if let Err(e) = task.await {
                log::error!("edge task ended abnormally: {e}");
            }
        }
    }
}
