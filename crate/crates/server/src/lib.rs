//! HTTP facade over the corpusforge engine.

pub mod app;
pub mod config;

use std::net::SocketAddr;
use std::sync::Arc;

use corpusforge_core::langid::Detector;
use corpusforge_core::store::Store;
use corpusforge_core::types::{Clock, SystemClock};
use corpusforge_core::{Engine, EngineConfig, Result};
use tokio::sync::oneshot;

pub use app::{http_route_table, router, AppState, Route};
pub use config::ServiceConfig;

/// Opens the store, builds the detector and wires up the engine.
pub fn build_state(config: &ServiceConfig) -> Result<AppState> {
    config.validate()?;
    let store = match &config.store_path {
        Some(p) => Store::open(p, config.store_sync)?,
        None => Store::in_memory(),
    };
    let engine = Engine::new(store, config.build_detector()?, Arc::new(SystemClock), config.engine.clone())?;
    Ok(AppState {
        engine: Arc::new(engine),
        requester_token: if config.requester.open { None } else { config.requester.token.as_deref().map(Arc::from) },
    })
}

/// Serves until the process is interrupted.
pub async fn serve(config: &ServiceConfig) -> Result<()> {
    let state = build_state(config)?;
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// A server running on its own thread and runtime, stopped on drop.
pub struct BackgroundServer {
    addr: SocketAddr,
    engine: Arc<Engine>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` (port 0 picks a free port) and serves `state` in the background.
pub fn spawn_background(state: AppState, addr: &str) -> Result<BackgroundServer> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let engine = state.engine.clone();
    let (tx, rx) = oneshot::channel::<()>();
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build()?;
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
            let _ = axum::serve(listener, router(state))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(BackgroundServer { addr: local, engine, shutdown: Some(tx), thread: Some(thread) })
}

/// In-memory engine on the system clock, for tests and one-off runs.
pub fn in_memory_state(detector: Arc<Detector>, config: EngineConfig) -> Result<AppState> {
    in_memory_state_with_clock(detector, config, Arc::new(SystemClock))
}

pub fn in_memory_state_with_clock(detector: Arc<Detector>, config: EngineConfig, clock: Arc<dyn Clock>) -> Result<AppState> {
    let engine = Engine::new(Store::in_memory(), detector, clock, config)?;
    Ok(AppState { engine: Arc::new(engine), requester_token: None })
}
