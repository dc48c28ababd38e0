#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use tintsplat::scene::{generate_synthetic_scene, save_cameras, save_scene_ply, Recipe};
use tintsplat::service::{ClientMessage, ServerMessage};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

pub const BIN: &str = env!("CARGO_BIN_EXE_tintsplat");

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub scene: PathBuf,
    pub cameras: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn fixture(recipe: Recipe, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let (scene, views) = generate_synthetic_scene(seed, &recipe).unwrap();
    let scene_path = dir.path().join("scene.ply");
    let cameras = dir.path().join("cameras.txt");
    save_scene_ply(&scene, &scene_path).unwrap();
    save_cameras(&views, &cameras).unwrap();
    Fixture { dir, scene: scene_path, cameras }
}

pub fn two_blobs(size: usize, views: usize) -> Fixture {
    fixture(Recipe::named("two-blobs").unwrap().with_resolution(size, size).with_views(views), 1)
}

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "warn").output().unwrap()
}

pub fn inputs(f: &Fixture) -> Vec<String> {
    vec!["--scene".into(), f.scene.display().to_string(), "--cameras".into(), f.cameras.display().to_string()]
}

pub struct Server {
    child: Child,
    pub addr: String,
}

impl Server {
    pub fn spawn(f: &Fixture, extra: &[&str]) -> Server {
        let mut cmd = Command::new(BIN);
        cmd.arg("view").args(inputs(f)).args(["--port", "0"]).args(extra);
        let mut child = cmd.env("RUST_LOG", "warn").stdout(Stdio::piped()).spawn().unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").expect("listen banner").to_string();
        Server { child, addr }
    }

    pub fn connect(&self) -> Client {
        let (ws, _) = tungstenite::connect(&self.addr).unwrap();
        if let MaybeTlsStream::Plain(s) = ws.get_ref() {
            s.set_read_timeout(Some(Duration::from_secs(60))).unwrap();
        }
        Client { ws }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub enum Incoming {
    Text(ServerMessage),
    Frame(Vec<u8>),
}

pub struct Client {
    pub ws: WebSocket<MaybeTlsStream<TcpStream>>,
}

impl Client {
    pub fn send(&mut self, msg: &ClientMessage) {
        self.ws.send(Message::text(serde_json::to_string(msg).unwrap())).unwrap();
    }

    pub fn next(&mut self) -> Incoming {
        loop {
            match self.ws.read().unwrap() {
                Message::Text(t) => return Incoming::Text(serde_json::from_str(t.as_str()).unwrap()),
                Message::Binary(b) => return Incoming::Frame(b.to_vec()),
                _ => {}
            }
        }
    }

    /// Next JSON message, skipping frames.
    pub fn next_text(&mut self) -> ServerMessage {
        loop {
            if let Incoming::Text(m) = self.next() {
                return m;
            }
        }
    }

    pub fn next_frame(&mut self) -> Vec<u8> {
        loop {
            if let Incoming::Frame(b) = self.next() {
                return b;
            }
        }
    }

    /// Sends `msg` and returns replies until one satisfies `done`.
    pub fn request(&mut self, msg: &ClientMessage, done: impl Fn(&ServerMessage) -> bool) -> Vec<ServerMessage> {
        self.send(msg);
        let deadline = Instant::now() + Duration::from_secs(120);
        let mut out = Vec::new();
        while Instant::now() < deadline {
            let m = self.next_text();
            let stop = done(&m);
            out.push(m);
            if stop {
                return out;
            }
        }
        panic!("no matching reply to {msg:?}: {out:?}");
    }
}

pub fn is_status(m: &ServerMessage) -> bool {
    matches!(m, ServerMessage::Status { .. })
}

pub fn file_bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}
