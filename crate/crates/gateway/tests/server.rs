use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::thread;
use std::time::Duration;

use interrl::config::{Method, RunConfig};
use interrl::{EnvKind, MethodId};
use interrl_gateway::{ControlAction, Mode, Server, SessionOptions, WireMessage};

struct Client {
    out: TcpStream,
    lines: BufReader<TcpStream>,
    seq: u64,
}

impl Client {
    fn connect(addr: std::net::SocketAddr) -> Self {
        let out = TcpStream::connect(addr).unwrap();
        out.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
        let lines = BufReader::new(out.try_clone().unwrap());
        Self { out, lines, seq: 0 }
    }

    fn recv(&mut self) -> WireMessage {
        let mut line = String::new();
        self.lines.read_line(&mut line).expect("server reply");
        WireMessage::decode(&line).unwrap()
    }

    fn recv_until(&mut self, mut pred: impl FnMut(&WireMessage) -> bool) -> WireMessage {
        for _ in 0..10_000 {
            let m = self.recv();
            if pred(&m) {
                return m;
            }
        }
        panic!("expected message never arrived");
    }

    fn raw(&mut self, line: &str) {
        self.out.write_all(line.as_bytes()).unwrap();
        self.out.write_all(b"\n").unwrap();
    }

    fn send(&mut self, build: impl FnOnce(u64) -> WireMessage) {
        self.seq += 1;
        let line = build(self.seq).encode();
        self.raw(&line);
    }

    fn control(&mut self, action: ControlAction, payload: Option<&str>) {
        self.send(|seq| WireMessage::Control {
            seq,
            action,
            payload: payload.map(String::from),
        });
    }
}

fn serve() -> std::net::SocketAddr {
    let cfg = RunConfig {
        method: Method::Fixed(MethodId::AB),
        ..RunConfig::defaults(EnvKind::Cartpole)
    };
    let server = Server::bind("127.0.0.1:0", cfg, SessionOptions::default(), None).unwrap();
    let addr = server.local_addr().unwrap();
    thread::spawn(move || server.run());
    addr
}

fn session_of(m: &WireMessage) -> u64 {
    match m {
        WireMessage::State { session, .. } => *session,
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn scripted_client_round_trip() {
    let addr = serve();
    let mut c = Client::connect(addr);
    let first = c.recv();
    match &first {
        WireMessage::State {
            episode, running, render, ..
        } => {
            assert_eq!(*episode, 0);
            assert!(!running);
            assert!(render.is_some());
        }
        other => panic!("unexpected {other:?}"),
    }

    c.send(|seq| WireMessage::Mode {
        seq,
        target: Mode::HumanInteraction,
    });
    c.control(ControlAction::Pace, Some("50"));
    c.send(|seq| WireMessage::Feedback {
        seq,
        action: "left".into(),
    });
    c.control(ControlAction::Start, None);
    let advised = c.recv_until(|m| matches!(m, WireMessage::State { h, .. } if !h.is_empty()));
    match advised {
        WireMessage::State {
            h, l_counter, mode, window_ms, ..
        } => {
            assert_eq!(h, vec![10.0, -10.0]);
            assert_eq!(l_counter, 1.0);
            assert_eq!(mode, Mode::HumanInteraction);
            assert_eq!(window_ms, 20);
        }
        _ => unreachable!(),
    }

    c.raw("{\"kind\":\"teleport\",\"seq\":99}");
    c.recv_until(|m| matches!(m, WireMessage::Error { .. }));

    c.control(ControlAction::Pause, None);
    c.recv_until(|m| matches!(m, WireMessage::State { running: false, .. }));
}

#[test]
fn sessions_are_independent_and_survive_disconnects() {
    let addr = serve();
    let mut a = Client::connect(addr);
    let mut b = Client::connect(addr);
    let ida = session_of(&a.recv());
    let idb = session_of(&b.recv());
    assert_ne!(ida, idb);

    a.control(ControlAction::Start, None);
    let at = a.recv_until(|m| matches!(m, WireMessage::EpisodeEnd { episode, .. } if *episode >= 3));
    assert!(matches!(at, WireMessage::EpisodeEnd { .. }));
    drop(a);

    // Give the server a moment to notice, then pick the session up again.
    thread::sleep(Duration::from_millis(200));
    b.control(ControlAction::Attach, Some(&ida.to_string()));
    let resumed = b.recv_until(|m| matches!(m, WireMessage::State { session, .. } if *session == ida));
    let paused_at = match resumed {
        WireMessage::State { running, episode, .. } => {
            assert!(!running, "a dropped client pauses its session");
            assert!(episode >= 4);
            episode
        }
        _ => unreachable!(),
    };
    b.control(ControlAction::Start, None);
    let next = b.recv_until(|m| matches!(m, WireMessage::EpisodeEnd { .. }));
    match next {
        WireMessage::EpisodeEnd { episode, .. } => assert_eq!(episode, paused_at),
        _ => unreachable!(),
    }

    b.control(ControlAction::Attach, Some("12345"));
    b.recv_until(|m| matches!(m, WireMessage::Error { .. }));
}
