//! WebSocket front end and the real-time tick loop.

use std::collections::VecDeque;
use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc as std_mpsc, Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::Serialize;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, Notify};
use tokio::time::MissedTickBehavior;

use balance_core::trial::{SessionConfig, TerminationCause, TickRow, TrialEnd, TrialHeader, TrialWriter, FORMAT_VERSION, TRIAL_EXTENSION};

use crate::protocol::{ClientMessage, ServerMessage};
use crate::session::{Session, TickOutcome};
use crate::ServiceError;

/// Rows waiting for the writer thread before the tick loop spills locally.
const WRITER_QUEUE: usize = 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub session: SessionConfig,
    /// Clients must present this code in their hello.
    pub code: String,
    pub out_dir: PathBuf,
    /// Wall-clock speed-up; 1 is real time.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub path: PathBuf,
    pub cause: TerminationCause,
    pub ticks: u64,
    pub subjects: Vec<String>,
}

#[derive(Debug)]
enum Control {
    Joined,
    Left(usize),
    Abort,
}

struct Shared {
    cfg: ServiceConfig,
    slots: Mutex<Vec<Option<String>>>,
    mailboxes: Vec<Mutex<Option<i32>>>,
    frames: broadcast::Sender<ServerMessage>,
    control: mpsc::UnboundedSender<Control>,
    started: AtomicBool,
}

#[derive(Serialize)]
struct Status {
    session: String,
    mode: String,
    connected: usize,
    required: usize,
    started: bool,
}

/// Serves one session on `listener` and returns once its trial file is
/// written. `shutdown` resolving aborts the session.
pub async fn serve(
    listener: TcpListener,
    cfg: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<SessionSummary, ServiceError> {
    cfg.session.validate().map_err(ServiceError::Config)?;
    if !(cfg.speed > 0.0 && cfg.speed.is_finite()) {
        return Err(ServiceError::Config(balance_core::SddeError::InvalidParams(format!(
            "speed must be positive, got {}",
            cfg.speed
        ))));
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| ServiceError::Io(cfg.out_dir.clone(), e))?;
    let n = cfg.session.mode.subjects();
    let (frames, _) = broadcast::channel(256);
    let (control, control_rx) = mpsc::unbounded_channel();
    let shared = Arc::new(Shared {
        cfg,
        slots: Mutex::new(vec![None; n]),
        mailboxes: (0..n).map(|_| Mutex::new(None)).collect(),
        frames,
        control,
        started: AtomicBool::new(false),
    });

    let app = Router::new()
        .route("/ws", get(upgrade))
        .route("/status", get(status))
        .with_state(shared.clone());
    let done = Arc::new(Notify::new());
    let server_done = done.clone();
    let server = tokio::spawn(async move {
        axum::serve(listener, app).with_graceful_shutdown(async move { server_done.notified().await }).await
    });

    let aborted = Arc::new(Notify::new());
    let signal = aborted.clone();
    tokio::spawn(async move {
        shutdown.await;
        signal.notify_one();
    });

    let result = run(shared, control_rx, aborted).await;
    // let the end frames reach the clients before the listener goes away
    tokio::time::sleep(Duration::from_millis(50)).await;
    done.notify_one();
    let _ = server.await;
    result
}

async fn status(State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    let slots = shared.slots.lock().unwrap();
    Json(Status {
        session: shared.cfg.code.clone(),
        mode: shared.cfg.session.mode.to_string(),
        connected: slots.iter().flatten().count(),
        required: slots.len(),
        started: shared.started.load(Ordering::SeqCst),
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, shared))
}

fn text(msg: &ServerMessage) -> Message {
    Message::Text(serde_json::to_string(msg).expect("server messages serialize").into())
}

async fn refuse(mut socket: WebSocket, message: String) {
    let _ = socket.send(text(&ServerMessage::Error { message })).await;
    let _ = socket.close().await;
}

fn claim(shared: &Shared, subject: &str, index: Option<u8>) -> Result<usize, String> {
    if shared.started.load(Ordering::SeqCst) {
        return Err("session already running".into());
    }
    let mut slots = shared.slots.lock().unwrap();
    let slot = match index {
        Some(i) if i >= 1 && (i as usize) <= slots.len() => i as usize - 1,
        Some(i) => return Err(format!("subject index {i} out of range 1..={}", slots.len())),
        None => slots.iter().position(Option::is_none).ok_or("session is full")?,
    };
    if slots[slot].is_some() {
        return Err(format!("subject slot {} already taken", slot + 1));
    }
    slots[slot] = Some(subject.to_string());
    Ok(slot)
}

async fn client(mut socket: WebSocket, shared: Arc<Shared>) {
    let hello = loop {
        match socket.recv().await {
            Some(Ok(Message::Text(t))) => break serde_json::from_str::<ClientMessage>(&t),
            Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
            _ => return,
        }
    };
    let (subject, slot) = match hello {
        Ok(ClientMessage::Hello { subject, session, index }) => {
            if session != shared.cfg.code {
                return refuse(socket, format!("unknown session `{session}`")).await;
            }
            match claim(&shared, &subject, index) {
                Ok(slot) => (subject, slot),
                Err(m) => return refuse(socket, m).await,
            }
        }
        Ok(_) => return refuse(socket, "expected hello".into()).await,
        Err(e) => return refuse(socket, format!("bad message: {e}")).await,
    };
    tracing::info!(subject, slot = slot + 1, "subject joined");
    let mut frames = shared.frames.subscribe();
    let (mut tx, mut rx) = socket.split();
    let welcome = ServerMessage::Welcome { index: slot as u8 + 1, subjects: shared.mailboxes.len() as u8 };
    if tx.send(text(&welcome)).await.is_err() {
        shared.slots.lock().unwrap()[slot] = None;
        return;
    }
    let _ = shared.control.send(Control::Joined);

    let writer = tokio::spawn(async move {
        loop {
            match frames.recv().await {
                Ok(msg) => {
                    let last = matches!(msg, ServerMessage::End { .. });
                    if tx.send(text(&msg)).await.is_err() {
                        break;
                    }
                    if last {
                        let _ = tx.close().await;
                        break;
                    }
                }
                // a slow client skips frames rather than holding the loop back
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    });

    while let Some(msg) = rx.next().await {
        let Ok(msg) = msg else { break };
        match msg {
            Message::Text(t) => match serde_json::from_str::<ClientMessage>(&t) {
                Ok(ClientMessage::Mouse { px, .. }) => *shared.mailboxes[slot].lock().unwrap() = Some(px),
                Ok(ClientMessage::Abort) => {
                    let _ = shared.control.send(Control::Abort);
                }
                Ok(ClientMessage::Hello { .. }) => {}
                Err(e) => tracing::warn!(slot = slot + 1, "ignored message: {e}"),
            },
            Message::Close(_) => break,
            _ => {}
        }
    }
    let _ = shared.control.send(Control::Left(slot));
    if writer.is_finished() {
        return;
    }
    // the session may still want to send the end frame
    let _ = tokio::time::timeout(Duration::from_secs(1), writer).await;
}

enum WriterMsg {
    Row(TickRow),
    End(TrialEnd),
}

fn trial_path(cfg: &ServiceConfig) -> PathBuf {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let stem = format!("{}-{}-{secs}", cfg.code, cfg.session.mode);
    let mut path = cfg.out_dir.join(format!("{stem}.{TRIAL_EXTENSION}"));
    let mut k = 1;
    while path.exists() {
        path = cfg.out_dir.join(format!("{stem}-{k}.{TRIAL_EXTENSION}"));
        k += 1;
    }
    path
}

/// Persists rows on a plain thread so disk latency never reaches the loop.
fn spawn_writer(
    path: PathBuf,
    header: TrialHeader,
) -> Result<(std_mpsc::SyncSender<WriterMsg>, std::thread::JoinHandle<Result<PathBuf, ServiceError>>), ServiceError> {
    let mut writer = TrialWriter::create(&path, &header).map_err(ServiceError::Trial)?;
    let (tx, rx) = std_mpsc::sync_channel::<WriterMsg>(WRITER_QUEUE);
    let handle = std::thread::spawn(move || {
        for msg in rx {
            match msg {
                WriterMsg::Row(row) => writer.write_row(&row).map_err(ServiceError::Trial)?,
                WriterMsg::End(end) => return writer.finish(&end).map_err(ServiceError::Trial),
            }
        }
        Ok(writer.path().to_path_buf())
    });
    Ok((tx, handle))
}

struct Outbox {
    tx: std_mpsc::SyncSender<WriterMsg>,
    spill: VecDeque<WriterMsg>,
}

impl Outbox {
    fn push(&mut self, msg: WriterMsg) {
        self.spill.push_back(msg);
        while let Some(m) = self.spill.pop_front() {
            match self.tx.try_send(m) {
                Ok(()) => {}
                Err(std_mpsc::TrySendError::Full(m)) => {
                    self.spill.push_front(m);
                    break;
                }
                Err(std_mpsc::TrySendError::Disconnected(_)) => break,
            }
        }
    }

    fn close(mut self) {
        for m in self.spill.drain(..) {
            if self.tx.send(m).is_err() {
                break;
            }
        }
    }
}

async fn run(
    shared: Arc<Shared>,
    mut control: mpsc::UnboundedReceiver<Control>,
    aborted: Arc<Notify>,
) -> Result<SessionSummary, ServiceError> {
    let cfg = &shared.cfg;
    let n = cfg.session.mode.subjects();
    let full = |shared: &Shared| shared.slots.lock().unwrap().iter().all(Option::is_some);

    // waiting room
    let mut early_abort = false;
    while !full(&shared) {
        tokio::select! {
            c = control.recv() => match c {
                Some(Control::Left(slot)) => shared.slots.lock().unwrap()[slot] = None,
                Some(Control::Abort) => { early_abort = true; break; }
                Some(Control::Joined) => {}
                None => { early_abort = true; break; }
            },
            _ = aborted.notified() => { early_abort = true; break; }
        }
    }
    shared.started.store(true, Ordering::SeqCst);
    let subjects: Vec<String> = shared
        .slots
        .lock()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, s)| s.clone().unwrap_or_else(|| format!("subject{}", i + 1)))
        .collect();
    let header = TrialHeader {
        format_version: FORMAT_VERSION,
        session: cfg.code.clone(),
        subjects: subjects.clone(),
        config: cfg.session.clone(),
    };
    let (tx, writer) = spawn_writer(trial_path(cfg), header)?;
    let mut out = Outbox { tx, spill: VecDeque::new() };
    let mut session = Session::new(cfg.session.clone()).map_err(ServiceError::Config)?;

    let mut cause = None;
    if early_abort {
        cause = Some(TerminationCause::AbortedBySubject);
    }

    // countdown
    let second = Duration::from_secs_f64(1.0 / cfg.speed);
    let mut n_left = cfg.session.countdown;
    while cause.is_none() && n_left > 0 {
        let _ = shared.frames.send(ServerMessage::Countdown { n: n_left });
        let sleep = tokio::time::sleep(second);
        tokio::pin!(sleep);
        loop {
            tokio::select! {
                _ = &mut sleep => break,
                c = control.recv() => match c {
                    Some(Control::Abort) | None => { cause = Some(TerminationCause::AbortedBySubject); break; }
                    Some(Control::Left(_)) => { cause = Some(TerminationCause::ClientLost); break; }
                    Some(Control::Joined) => {}
                },
                _ = aborted.notified() => { cause = Some(TerminationCause::AbortedBySubject); break; }
            }
        }
        n_left -= 1;
    }
    // tick loop
    let period = Duration::from_secs_f64(1.0 / (cfg.session.tick_rate * cfg.speed));
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
    while cause.is_none() {
        tokio::select! {
            _ = interval.tick() => {}
            _ = aborted.notified() => { cause = Some(TerminationCause::AbortedBySubject); break; }
        }
        while let Ok(c) = control.try_recv() {
            match c {
                Control::Abort => cause = Some(TerminationCause::AbortedBySubject),
                Control::Left(_) => cause = Some(TerminationCause::ClientLost),
                Control::Joined => {}
            }
        }
        if cause.is_some() {
            break;
        }
        let inputs: Vec<Option<i32>> = shared.mailboxes.iter().map(|m| m.lock().unwrap().take()).collect();
        match session.tick(&inputs) {
            Ok(TickOutcome::Row { row, frame, end }) => {
                out.push(WriterMsg::Row(row));
                let _ = shared.frames.send(frame);
                if end.is_some() {
                    cause = end;
                }
            }
            Ok(TickOutcome::Finished(c)) => cause = Some(c),
            Err(e) => {
                tracing::error!("model failure: {e}");
                cause = Some(TerminationCause::AbortedBySubject);
            }
        }
    }
    let cause = cause.expect("loop exits with a cause");
    let end = session.terminate(cause);
    out.push(WriterMsg::End(end.clone()));
    out.close();
    let _ = shared.frames.send(ServerMessage::End { cause: end.cause });
    let path = writer.join().map_err(|_| ServiceError::WriterPanicked)??;
    debug_assert_eq!(n, subjects.len());
    Ok(SessionSummary { path, cause: end.cause, ticks: end.ticks, subjects })
}
