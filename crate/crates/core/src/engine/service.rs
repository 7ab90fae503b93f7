//! Threaded runtime around the [`Coordinator`]: control server, per-node
//! data sockets, one processor per channel and the liveness reaper.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{IpAddr, SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender, TrySendError};
use serde_json::Value;
use uuid::Uuid;

use super::config::EngineConfig;
use super::coordinator::{ChannelKey, Coordinator, GlobalCounters, NodePorts};
use super::pipeline::{ChannelPipeline, IngestItem, OutFrame, ProcessOutcome};
use super::view::ChannelView;
use super::EngineError;
use crate::vradio::{enlarge_buffers, host_now_ns, SOCKET_BUFFER};
use crate::wire::{
    decode_envelope, encode_envelope, ControlEnvelope, ControlMessage, Counters, ErrorCode,
    Fragmenter, Reassembly, ReassemblyConfig, ReassemblyTable, SignalFrame, Snapshot, MAX_DATAGRAM,
};

const POLL: Duration = Duration::from_millis(20);
const INGEST_DEPTH: usize = 256;

struct Processor {
    view: Arc<Mutex<Arc<ChannelView>>>,
    input: Sender<IngestItem>,
    handle: JoinHandle<()>,
}

struct NodeRuntime {
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl NodeRuntime {
    fn shutdown(self) {
        self.stop.store(true, Ordering::Release);
        for t in self.threads {
            let _ = t.join();
        }
    }
}

struct Shared {
    config: EngineConfig,
    coord: Mutex<Coordinator>,
    processors: Mutex<HashMap<ChannelKey, Processor>>,
    routes: RwLock<HashMap<u32, Sender<IngestItem>>>,
    nodes: Mutex<HashMap<Uuid, NodeRuntime>>,
    counters: GlobalCounters,
    stop: AtomicBool,
}

/// A running channel engine. Dropping it stops every thread.
pub struct Engine {
    control_addr: SocketAddr,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl Engine {
    pub fn start(config: EngineConfig) -> Result<Engine, EngineError> {
        let coord = Coordinator::new(config.clone())?;
        let listener = TcpListener::bind(config.control_addr.as_str())?;
        listener.set_nonblocking(true)?;
        let control_addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            config,
            coord: Mutex::new(coord),
            processors: Mutex::default(),
            routes: RwLock::default(),
            nodes: Mutex::default(),
            counters: GlobalCounters::default(),
            stop: AtomicBool::new(false),
        });
        let mut threads = Vec::new();
        let s = shared.clone();
        threads.push(
            std::thread::Builder::new()
                .name("control".into())
                .spawn(move || accept_loop(listener, s))?,
        );
        let s = shared.clone();
        threads.push(
            std::thread::Builder::new()
                .name("reaper".into())
                .spawn(move || reaper_loop(s))?,
        );
        log::info!("engine control plane on {control_addr}");
        Ok(Engine {
            control_addr,
            shared,
            threads,
        })
    }

    pub fn control_addr(&self) -> SocketAddr {
        self.control_addr
    }

    pub fn counters(&self) -> Counters {
        self.shared.counters.get()
    }

    pub fn snapshot(&self) -> Snapshot {
        self.shared.snapshot()
    }

    /// Handles a control message in-process, as if it came from a local
    /// connection.
    pub fn request(&self, msg: ControlMessage) -> ControlMessage {
        self.shared
            .handle(msg, IpAddr::from([127, 0, 0, 1]), &mut Vec::new())
    }

    /// Blocks until the engine is stopped from another thread.
    pub fn wait(&self) {
        while !self.shared.stop.load(Ordering::Acquire) {
            std::thread::sleep(Duration::from_millis(100));
        }
    }

    pub fn shutdown(&mut self) {
        if self.shared.stop.swap(true, Ordering::AcqRel) {
            return;
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        let nodes: Vec<NodeRuntime> = self
            .shared
            .nodes
            .lock()
            .unwrap()
            .drain()
            .map(|(_, n)| n)
            .collect();
        nodes.into_iter().for_each(NodeRuntime::shutdown);
        self.shared.routes.write().unwrap().clear();
        let procs: Vec<Processor> = self
            .shared
            .processors
            .lock()
            .unwrap()
            .drain()
            .map(|(_, p)| p)
            .collect();
        for p in procs {
            drop(p.input);
            let _ = p.handle.join();
        }
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl Shared {
    fn snapshot(&self) -> Snapshot {
        self.coord.lock().unwrap().snapshot(self.counters.get())
    }

    /// Brings processors and routes in line with the coordinator.
    fn sync(self: &Arc<Self>, coord: &Coordinator) {
        let mut procs = self.processors.lock().unwrap();
        let keys = coord.channel_keys();
        procs.retain(|k, _| keys.contains(k));
        for k in keys {
            let Some((view, counters)) = coord.view(k) else {
                continue;
            };
            let view = Arc::new(view);
            match procs.get(&k) {
                Some(p) => *p.view.lock().unwrap() = view,
                None => {
                    let (input, rx) = crossbeam_channel::bounded(INGEST_DEPTH);
                    let cell = Arc::new(Mutex::new(view));
                    let (c, s) = (cell.clone(), self.clone());
                    let handle = std::thread::Builder::new()
                        .name(format!("chan-{k}"))
                        .spawn(move || processor_loop(rx, c, ChannelPipeline::new(counters), s))
                        .expect("spawn channel processor");
                    procs.insert(
                        k,
                        Processor {
                            view: cell,
                            input,
                            handle,
                        },
                    );
                }
            }
        }
        let routes = coord
            .tx_routes()
            .into_iter()
            .filter_map(|(id, k)| procs.get(&k).map(|p| (id, p.input.clone())))
            .collect();
        *self.routes.write().unwrap() = routes;
    }

    fn remove_nodes(self: &Arc<Self>, ids: &[Uuid]) {
        let mut coord = self.coord.lock().unwrap();
        let mut any = false;
        for id in ids {
            any |= coord.remove(*id).is_some();
        }
        if any {
            self.sync(&coord);
        }
        drop(coord);
        let gone: Vec<NodeRuntime> = {
            let mut nodes = self.nodes.lock().unwrap();
            ids.iter().filter_map(|id| nodes.remove(id)).collect()
        };
        gone.into_iter().for_each(NodeRuntime::shutdown);
    }

    fn handle(
        self: &Arc<Self>,
        msg: ControlMessage,
        peer: IpAddr,
        owned: &mut Vec<Uuid>,
    ) -> ControlMessage {
        match self.try_handle(msg, peer, owned) {
            Ok(reply) => reply,
            Err(EngineError::Request { code, text }) => ControlMessage::Error { code, text },
            Err(e) => ControlMessage::error(ErrorCode::Internal, e.to_string()),
        }
    }

    fn try_handle(
        self: &Arc<Self>,
        msg: ControlMessage,
        peer: IpAddr,
        owned: &mut Vec<Uuid>,
    ) -> Result<ControlMessage, EngineError> {
        let ack = |applied| ControlMessage::Ack { applied };
        let mut coord = self.coord.lock().unwrap();
        let reply = match msg {
            ControlMessage::RegisterNode { name, port_type } => {
                if coord.name_taken(&name) {
                    return Err(EngineError::Request {
                        code: ErrorCode::DuplicateName,
                        text: format!("node {name} is already registered"),
                    });
                }
                let (socket, rx_port) = allocate_ports(&self.config, &coord)?;
                let tx_port = socket.local_addr()?.port();
                let (egress, out) = crossbeam_channel::bounded(self.config.egress_depth.max(1));
                let uuid = coord.register(
                    &name,
                    port_type,
                    NodePorts {
                        tx_port,
                        rx_port,
                        egress,
                    },
                )?;
                let rt = self.spawn_node(&name, socket, out, SocketAddr::new(peer, rx_port))?;
                self.nodes.lock().unwrap().insert(uuid, rt);
                owned.push(uuid);
                self.sync(&coord);
                ControlMessage::RegisterAck {
                    uuid,
                    tx_port,
                    rx_port,
                }
            }
            ControlMessage::AttachStream {
                uuid,
                stream,
                clock_base_ns,
            } => {
                let center_freq = stream.center_freq;
                let stream_id = coord.attach(uuid, stream, clock_base_ns)?;
                self.sync(&coord);
                ControlMessage::AttachAck {
                    uuid,
                    stream_id,
                    center_freq,
                }
            }
            ControlMessage::DetachStream { uuid, stream_id } => {
                coord.detach(uuid, stream_id)?;
                self.sync(&coord);
                ack(Default::default())
            }
            ControlMessage::UpdateNode { uuid, settings } => {
                coord.touch(uuid)?;
                let applied = coord.update_node(uuid, &settings)?;
                self.sync(&coord);
                ack(applied)
            }
            ControlMessage::Keepalive { uuid } => {
                coord.touch(uuid)?;
                ack(Default::default())
            }
            ControlMessage::SetNodeParam { node, key, value } => {
                let applied = coord.set_node_param(&node, &key, &value)?;
                self.sync(&coord);
                ack(applied)
            }
            ControlMessage::SetChannelParam {
                center_freq,
                key,
                value,
            } => {
                let applied = coord.set_channel_param(center_freq, &key, &value)?;
                self.sync(&coord);
                ack(applied)
            }
            ControlMessage::GetState => ControlMessage::State {
                snapshot: coord.snapshot(self.counters.get()),
            },
            other => {
                return Err(EngineError::Request {
                    code: ErrorCode::Malformed,
                    text: format!("{other:?} is not a request"),
                })
            }
        };
        Ok(reply)
    }

    fn spawn_node(
        self: &Arc<Self>,
        name: &str,
        socket: UdpSocket,
        out: Receiver<OutFrame>,
        dest: SocketAddr,
    ) -> Result<NodeRuntime, EngineError> {
        let stop = Arc::new(AtomicBool::new(false));
        socket.set_read_timeout(Some(POLL))?;
        enlarge_buffers(&socket, SOCKET_BUFFER);
        let bind: SocketAddr = SocketAddr::new(socket.local_addr()?.ip(), 0);
        let send = UdpSocket::bind(bind)?;
        enlarge_buffers(&send, SOCKET_BUFFER);
        let fragmenter = Fragmenter::new(self.config.mtu)?;
        let (st, s) = (stop.clone(), self.clone());
        let ingest = std::thread::Builder::new()
            .name(format!("{name}-ingest"))
            .spawn(move || ingest_loop(socket, s, st))?;
        let (st, s) = (stop.clone(), self.clone());
        let egress = std::thread::Builder::new()
            .name(format!("{name}-egress"))
            .spawn(move || egress_loop(out, send, dest, fragmenter, s, st))?;
        Ok(NodeRuntime {
            stop,
            threads: vec![ingest, egress],
        })
    }
}

/// Binds the node's ingest socket and picks the port the node listens on.
fn allocate_ports(
    config: &EngineConfig,
    coord: &Coordinator,
) -> Result<(UdpSocket, u16), EngineError> {
    let host: IpAddr = config.data_host.parse().map_err(|_| {
        EngineError::Config(format!(
            "data_host {} is not an IP address",
            config.data_host
        ))
    })?;
    if config.port_base == 0 {
        let socket = UdpSocket::bind((host, 0))?;
        // probe a free port for the node; it binds it itself
        let rx_port = UdpSocket::bind((host, 0))?.local_addr()?.port();
        return Ok((socket, rx_port));
    }
    let used: Vec<u16> = coord
        .nodes()
        .flat_map(|n| [n.ports.tx_port, n.ports.rx_port])
        .collect();
    for k in 0..config.port_count / 2 {
        let Some(tx) = config.port_base.checked_add(2 * k) else {
            break;
        };
        let rx = tx + 1;
        if used.contains(&tx) || used.contains(&rx) {
            continue;
        }
        if let Ok(s) = UdpSocket::bind((host, tx)) {
            return Ok((s, rx));
        }
    }
    Err(EngineError::Request {
        code: ErrorCode::PortExhausted,
        text: "no free data port pair".into(),
    })
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    let mut conns = Vec::new();
    while !shared.stop.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let s = shared.clone();
                match std::thread::Builder::new()
                    .name(format!("ctl-{peer}"))
                    .spawn(move || connection_loop(stream, peer, s))
                {
                    Ok(h) => conns.push(h),
                    Err(e) => log::error!("control connection thread: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(POLL),
            Err(e) => {
                log::warn!("accept: {e}");
                std::thread::sleep(POLL);
            }
        }
        conns.retain(|h: &JoinHandle<()>| !h.is_finished());
    }
    for h in conns {
        let _ = h.join();
    }
}

fn reply_line(env: &ControlEnvelope) -> Vec<u8> {
    let mut text = encode_envelope(env);
    text.push('\n');
    text.into_bytes()
}

fn connection_loop(stream: TcpStream, peer: SocketAddr, shared: Arc<Shared>) {
    let _ = stream.set_nodelay(true);
    if stream.set_nonblocking(false).is_err()
        || stream
            .set_read_timeout(Some(Duration::from_millis(100)))
            .is_err()
    {
        return;
    }
    let Ok(mut writer) = stream.try_clone() else {
        return;
    };
    let mut reader = BufReader::new(stream);
    let mut owned: Vec<Uuid> = Vec::new();
    let mut line = Vec::new();
    log::debug!("control connection from {peer}");
    while !shared.stop.load(Ordering::Acquire) {
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => break,
            Ok(_) if line.last() != Some(&b'\n') => continue,
            Ok(_) => {}
            Err(e)
                if matches!(
                    e.kind(),
                    ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted
                ) =>
            {
                continue
            }
            Err(_) => break,
        }
        let text = String::from_utf8_lossy(&line).trim().to_string();
        line.clear();
        if text.is_empty() {
            continue;
        }
        let env = match decode_envelope(&text) {
            Ok(env) => {
                let msg = shared.handle(env.msg, peer.ip(), &mut owned);
                ControlEnvelope { id: env.id, msg }
            }
            Err(e) => {
                shared
                    .counters
                    .protocol_errors
                    .fetch_add(1, Ordering::Relaxed);
                let id = serde_json::from_str::<Value>(&text)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_u64));
                ControlEnvelope {
                    id,
                    msg: ControlMessage::error(ErrorCode::Malformed, e.to_string()),
                }
            }
        };
        if writer.write_all(&reply_line(&env)).is_err() {
            break;
        }
    }
    if !owned.is_empty() {
        log::info!("control connection from {peer} closed; removing its nodes");
        shared.remove_nodes(&owned);
    }
}

fn reaper_loop(shared: Arc<Shared>) {
    let timeout = Duration::from_millis(shared.config.liveness_timeout_ms);
    while !shared.stop.load(Ordering::Acquire) {
        std::thread::sleep(Duration::from_millis(100));
        let gone: Vec<Uuid> = {
            let mut coord = shared.coord.lock().unwrap();
            let gone: Vec<Uuid> = coord
                .expire(Instant::now(), timeout)
                .into_iter()
                .map(|n| n.uuid)
                .collect();
            if !gone.is_empty() {
                log::warn!("{} node(s) missed their keepalive", gone.len());
                shared.sync(&coord);
            }
            gone
        };
        if !gone.is_empty() {
            shared.remove_nodes(&gone);
        }
    }
}

fn ingest_loop(socket: UdpSocket, shared: Arc<Shared>, stop: Arc<AtomicBool>) {
    let mut tables: HashMap<SocketAddr, ReassemblyTable> = HashMap::new();
    let mut buf = vec![0u8; MAX_DATAGRAM];
    let mut last_expire = Instant::now();
    let mut counted = (0u64, 0u64);
    let c = &shared.counters;
    while !stop.load(Ordering::Acquire) {
        let received = socket.recv_from(&mut buf);
        let now = Instant::now();
        if let Ok((len, from)) = received {
            let table = tables
                .entry(from)
                .or_insert_with(|| ReassemblyTable::new(ReassemblyConfig::default()));
            if let Reassembly::Complete(frame) = table.push_datagram(&buf[..len], now) {
                c.frames_ingested.fetch_add(1, Ordering::Relaxed);
                let route = shared.routes.read().unwrap().get(&frame.stream_id).cloned();
                match route {
                    None => {
                        c.frames_ignored.fetch_add(1, Ordering::Relaxed);
                    }
                    Some(r) => {
                        let item = IngestItem {
                            stream_id: frame.stream_id,
                            emulated_tx_time: frame.emulated_tx_time,
                            wallclock_tx_time: frame.wallclock_tx_time,
                            ingest_host_ns: host_now_ns(),
                            num_channels: frame.num_channels,
                            samples: frame.samples(),
                        };
                        if let Err(TrySendError::Full(_)) = r.try_send(item) {
                            c.frames_dropped.fetch_add(1, Ordering::Relaxed);
                        }
                    }
                }
            }
        }
        if now.duration_since(last_expire) > Duration::from_millis(5) {
            last_expire = now;
            let (mut dropped, mut errors) = (0, 0);
            for t in tables.values_mut() {
                t.expire(now);
                dropped += t.stats().dropped;
                errors += t.stats().protocol_errors;
            }
            c.reassembly_dropped
                .fetch_add(dropped - counted.0, Ordering::Relaxed);
            c.protocol_errors
                .fetch_add(errors - counted.1, Ordering::Relaxed);
            counted = (dropped, errors);
        }
    }
}

fn processor_loop(
    input: Receiver<IngestItem>,
    view: Arc<Mutex<Arc<ChannelView>>>,
    mut pipeline: ChannelPipeline,
    shared: Arc<Shared>,
) {
    let threshold_ns = (shared.config.drop_threshold_ms * 1e6) as i64;
    let c = &shared.counters;
    let mut current: Option<Arc<ChannelView>> = None;
    for item in input.iter() {
        let v = view.lock().unwrap().clone();
        if !current.as_ref().is_some_and(|c| Arc::ptr_eq(c, &v)) {
            pipeline.retain_links(&v);
            current = Some(v.clone());
        }
        if host_now_ns() - item.ingest_host_ns > threshold_ns {
            pipeline.drop_frame(&v, &item);
            c.frames_dropped.fetch_add(1, Ordering::Relaxed);
            continue;
        }
        match pipeline.process(&v, &item, None) {
            ProcessOutcome::Ignored => {
                c.frames_ignored.fetch_add(1, Ordering::Relaxed);
            }
            ProcessOutcome::Processed { dropped, .. } => {
                c.frames_dropped
                    .fetch_add(dropped as u64, Ordering::Relaxed);
            }
        }
    }
}

fn egress_loop(
    out: Receiver<OutFrame>,
    socket: UdpSocket,
    dest: SocketAddr,
    mut fragmenter: Fragmenter,
    shared: Arc<Shared>,
    stop: Arc<AtomicBool>,
) {
    let threshold_ns = (shared.config.drop_threshold_ms * 1e6) as i64;
    let c = &shared.counters;
    while !stop.load(Ordering::Acquire) {
        let f = match out.recv_timeout(POLL) {
            Ok(f) => f,
            Err(RecvTimeoutError::Timeout) => continue,
            Err(RecvTimeoutError::Disconnected) => break,
        };
        if host_now_ns() - f.ingest_host_ns > threshold_ns {
            f.counters.dropped.fetch_add(1, Ordering::Relaxed);
            c.frames_dropped.fetch_add(1, Ordering::Relaxed);
            continue;
        }
        let sent = SignalFrame::from_samples(f.otw_format, f.num_channels, &f.samples)
            .map_err(|e| std::io::Error::new(ErrorKind::InvalidData, e))
            .and_then(|mut frame| {
                frame.stream_id = f.rx_stream;
                frame.source_id = f.tx_stream;
                frame.emulated_tx_time = f.emulated_time;
                frame.wallclock_tx_time = f.wallclock_tx_time;
                let datagrams = fragmenter
                    .datagrams(&frame)
                    .map_err(|e| std::io::Error::new(ErrorKind::InvalidData, e))?;
                for d in datagrams {
                    socket.send_to(&d, dest)?;
                }
                Ok(())
            });
        match sent {
            Ok(()) => {
                f.counters.delivered.fetch_add(1, Ordering::Relaxed);
                c.frames_delivered.fetch_add(1, Ordering::Relaxed);
            }
            Err(e) => {
                log::debug!("egress to {dest}: {e}");
                f.counters.dropped.fetch_add(1, Ordering::Relaxed);
                c.frames_dropped.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
}
