//! TCP front end: one session per connection, newline-delimited JSON.
//!
//! Each session runs on its own thread and owns its trainer. A reader thread
//! per connection forwards decoded client messages over a channel, so the
//! session only sees them between steps. When a connection drops the session
//! pauses and stays in the registry; a new connection can take it over with
//! an `attach` control carrying the session id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender, TryRecvError};
use interrl::config::RunConfig;
use interrl::TeacherQ;
use log::{debug, info, warn};

use crate::error::Result;
use crate::session::{Session, SessionOptions};
use crate::wire::{ControlAction, WireMessage};

enum Event {
    Message(WireMessage),
    /// Undecodable input; answered with an error message.
    Garbage(String),
    /// A connection, by number, now receives this session's output.
    Attach(u64, TcpStream),
    /// The numbered connection went away.
    Detach(u64),
    Shutdown,
}

type Registry = Arc<Mutex<HashMap<u64, Sender<Event>>>>;

pub struct Server {
    listener: TcpListener,
    cfg: RunConfig,
    opts: SessionOptions,
    oracle: Option<Arc<TeacherQ>>,
    registry: Registry,
    next_id: AtomicU64,
}

impl Server {
    /// Validates the configuration up front so a bad one fails before any
    /// client connects.
    pub fn bind<A: ToSocketAddrs>(
        addr: A,
        cfg: RunConfig,
        opts: SessionOptions,
        oracle: Option<Arc<TeacherQ>>,
    ) -> Result<Self> {
        Session::new(0, cfg.clone(), opts.clone(), oracle.clone())?;
        let listener = TcpListener::bind(addr)?;
        Ok(Self {
            listener,
            cfg,
            opts,
            oracle,
            registry: Arc::default(),
            next_id: AtomicU64::new(0),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until the listener fails.
    pub fn run(self) -> Result<()> {
        info!("listening on {}", self.listener.local_addr()?);
        for stream in self.listener.incoming() {
            match stream {
                Ok(stream) => {
                    if let Err(e) = self.accept(stream) {
                        warn!("connection dropped: {e}");
                    }
                }
                Err(e) => warn!("accept failed: {e}"),
            }
        }
        Ok(())
    }

    fn accept(&self, stream: TcpStream) -> Result<()> {
        stream.set_nodelay(true)?;
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let session = Session::new(id, self.cfg.clone(), self.opts.clone(), self.oracle.clone())?;
        let (tx, rx) = unbounded();
        self.registry.lock().expect("registry lock").insert(id, tx.clone());
        tx.send(Event::Attach(id, stream.try_clone()?)).ok();
        let registry = Arc::clone(&self.registry);
        thread::spawn(move || run_session(session, rx, registry));
        let registry = Arc::clone(&self.registry);
        thread::spawn(move || read_client(stream, id, id, tx, registry));
        debug!("session {id} opened");
        Ok(())
    }
}

/// Forwards client lines to the session currently bound to this connection.
fn read_client(stream: TcpStream, conn: u64, mut id: u64, mut tx: Sender<Event>, registry: Registry) {
    let writer = stream.try_clone();
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let event = match WireMessage::decode(&line) {
            Ok(WireMessage::Control {
                action: ControlAction::Attach,
                payload,
                ..
            }) => match attach(payload.as_deref(), id, &registry) {
                Ok((target, target_tx)) => match writer.as_ref().map(TcpStream::try_clone) {
                    Ok(Ok(w)) => {
                        // The session made for this connection is dropped; one
                        // reached by an earlier attach is left paused.
                        let leave = if id == conn { Event::Shutdown } else { Event::Detach(conn) };
                        tx.send(leave).ok();
                        id = target;
                        tx = target_tx;
                        Event::Attach(conn, w)
                    }
                    _ => break,
                },
                Err(message) => Event::Garbage(message),
            },
            Ok(msg) => Event::Message(msg),
            Err(e) => Event::Garbage(e.to_string()),
        };
        if tx.send(event).is_err() {
            break;
        }
    }
    tx.send(Event::Detach(conn)).ok();
    debug!("client of session {id} left");
}

fn attach(payload: Option<&str>, own: u64, registry: &Registry) -> std::result::Result<(u64, Sender<Event>), String> {
    let target: u64 = payload
        .and_then(|p| p.trim().parse().ok())
        .ok_or("attach needs a session id")?;
    if target == own {
        return Err("already attached to this session".into());
    }
    let tx = registry
        .lock()
        .expect("registry lock")
        .get(&target)
        .cloned()
        .ok_or_else(|| format!("no session {target}"))?;
    Ok((target, tx))
}

struct Link {
    conn: u64,
    writer: Option<TcpStream>,
}

impl Link {
    fn send(&mut self, session: &mut Session, msgs: &[WireMessage]) {
        let Some(w) = self.writer.as_mut() else { return };
        let mut buf = String::new();
        for m in msgs {
            buf.push_str(&m.encode());
            buf.push('\n');
        }
        if w.write_all(buf.as_bytes()).and_then(|_| w.flush()).is_err() {
            self.writer = None;
            session.disconnect();
        }
    }
}

fn run_session(mut session: Session, rx: Receiver<Event>, registry: Registry) {
    let mut link = Link { conn: u64::MAX, writer: None };
    let id = session.id();
    loop {
        let alive = if !session.is_running() {
            match rx.recv() {
                Ok(ev) => on_event(&mut session, &mut link, ev),
                Err(_) => false,
            }
        } else if let Some(window) = session.window() {
            let deadline = Instant::now() + window;
            let mut alive = true;
            while alive && session.is_running() {
                let left = deadline.saturating_duration_since(Instant::now());
                match rx.recv_timeout(left) {
                    Ok(ev) => alive = on_event(&mut session, &mut link, ev),
                    Err(RecvTimeoutError::Timeout) => break,
                    Err(RecvTimeoutError::Disconnected) => alive = false,
                }
            }
            alive && step(&mut session, &mut link)
        } else {
            let mut alive = true;
            loop {
                match rx.try_recv() {
                    Ok(ev) => {
                        alive = on_event(&mut session, &mut link, ev);
                        if !alive {
                            break;
                        }
                    }
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => {
                        alive = false;
                        break;
                    }
                }
            }
            alive && step(&mut session, &mut link)
        };
        if !alive {
            break;
        }
    }
    registry.lock().expect("registry lock").remove(&id);
    debug!("session {id} closed");
}

fn step(session: &mut Session, link: &mut Link) -> bool {
    match session.tick() {
        Ok(msgs) => link.send(session, &msgs),
        Err(e) => {
            session.disconnect();
            let msg = session.error_message(e.to_string());
            link.send(session, &[msg]);
        }
    }
    true
}

/// Returns false once the session should end.
fn on_event(session: &mut Session, link: &mut Link, ev: Event) -> bool {
    match ev {
        Event::Message(m) => {
            let replies = session.handle(m);
            link.send(session, &replies);
        }
        Event::Garbage(message) => {
            let msg = session.error_message(message);
            link.send(session, &[msg]);
        }
        Event::Attach(conn, writer) => {
            link.conn = conn;
            link.writer = Some(writer);
            let msg = session.state_message();
            link.send(session, &[msg]);
        }
        Event::Detach(conn) => {
            if conn == link.conn {
                link.writer = None;
                session.disconnect();
            }
        }
        Event::Shutdown => return false,
    }
    true
}
