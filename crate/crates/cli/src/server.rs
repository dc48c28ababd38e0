//! Websocket transport for a [`Session`]. One client at a time; the session
//! outlives connections.

use std::io::{ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use anyhow::Context;
use tintsplat::service::{EditSettings, RunMode, ServerMessage, Session};
use tintsplat::{Scene, TrainingView};
use tungstenite::{Message, WebSocket};

pub struct ServerOptions {
    pub host: String,
    pub port: u16,
    pub fps: f64,
}

pub fn serve(
    scene: Scene,
    views: Vec<TrainingView>,
    settings: EditSettings,
    mode: RunMode,
    options: &ServerOptions,
) -> anyhow::Result<()> {
    let snapshot_every = settings.optimizer.snapshot_every;
    let mut session = Session::new(scene, views, settings, mode)?;
    let listener = TcpListener::bind((options.host.as_str(), options.port))
        .with_context(|| format!("binding {}:{}", options.host, options.port))?;
    let addr = listener.local_addr()?;
    println!("listening on ws://{addr}");
    std::io::stdout().flush()?;
    log::info!("snapshot every {snapshot_every} iterations, {:?} mode", mode);
    let interval = Duration::from_secs_f64(1.0 / options.fps.clamp(0.5, 240.0));
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().ok();
        log::info!("client connected: {peer:?}");
        match connection(&mut session, stream, interval) {
            Ok(()) => log::info!("client disconnected: {peer:?}"),
            Err(e) => log::warn!("connection {peer:?} ended: {e:#}"),
        }
    }
    Ok(())
}

fn send_json(ws: &mut WebSocket<TcpStream>, msg: &ServerMessage) -> tungstenite::Result<()> {
    ws.send(Message::text(msg.to_json()))
}

/// A peer going away is a normal end of the connection.
fn closed(e: tungstenite::Error) -> anyhow::Result<()> {
    use tungstenite::error::ProtocolError;
    match e {
        tungstenite::Error::ConnectionClosed
        | tungstenite::Error::AlreadyClosed
        | tungstenite::Error::Protocol(ProtocolError::ResetWithoutClosingHandshake) => Ok(()),
        tungstenite::Error::Io(io)
            if matches!(io.kind(), ErrorKind::ConnectionReset | ErrorKind::BrokenPipe | ErrorKind::ConnectionAborted) =>
        {
            Ok(())
        }
        other => Err(other.into()),
    }
}

fn connection(session: &mut Session, stream: TcpStream, interval: Duration) -> anyhow::Result<()> {
    stream.set_nodelay(true)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| anyhow::anyhow!("handshake failed: {e}"))?;
    ws.get_ref().set_read_timeout(Some(interval.min(Duration::from_millis(10))))?;

    send_json(&mut ws, &session.status())?;
    let mut dirty = true;
    let mut next_frame = Instant::now();
    let mut seen_snapshots = session.snapshot_count();
    loop {
        match ws.read() {
            Ok(Message::Text(text)) => {
                for reply in session.handle_text(text.as_str()) {
                    send_json(&mut ws, &reply)?;
                }
                dirty = true;
            }
            Ok(Message::Binary(_)) => send_json(&mut ws, &ServerMessage::error("binary messages are not accepted"))?,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return closed(e),
        }

        let snapshots = session.snapshot_count();
        if snapshots != seen_snapshots {
            seen_snapshots = snapshots;
            if let Err(e) = send_json(&mut ws, &session.status()) {
                return closed(e);
            }
            dirty = true;
        }

        // Frames are only produced once the previous one has been written
        // out, so at most one is ever pending.
        let now = Instant::now();
        if dirty && now >= next_frame {
            let bytes = session.frame_bytes()?;
            if let Err(e) = ws.send(Message::binary(bytes)) {
                return closed(e);
            }
            dirty = false;
            next_frame = now + interval;
        }
    }
}
