use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde_json::{Map, Value};
use uuid::Uuid;

use super::clock::VirtualClock;
use super::rx::{RxIngest, RxStream};
use super::sink::{enlarge_buffers, UdpFrameSink, SOCKET_BUFFER};
use super::tx::TxStream;
use super::{Direction, EndpointConfig, StreamConfig, VradioError};
use crate::propagation::{thermal_noise_power, NoiseSource};
use crate::wire::{
    decode_envelope, encode_envelope, ControlEnvelope, ControlMessage, Reassembly,
    ReassemblyConfig, ReassemblyStats, ReassemblyTable, MAX_DATAGRAM,
};

const KEEPALIVE_EVERY: Duration = Duration::from_secs(2);
const REPLY_TIMEOUT: Duration = Duration::from_secs(5);

/// Blocking request/reply client for the engine's control plane.
pub struct ControlClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
    line: String,
}

impl ControlClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, VradioError> {
        let writer = TcpStream::connect(addr)?;
        writer.set_nodelay(true)?;
        writer.set_read_timeout(Some(REPLY_TIMEOUT))?;
        let reader = BufReader::new(writer.try_clone()?);
        Ok(ControlClient {
            reader,
            writer,
            next_id: 1,
            line: String::new(),
        })
    }

    pub fn peer_addr(&self) -> std::io::Result<SocketAddr> {
        self.writer.peer_addr()
    }

    /// Sends `msg` and waits for the reply carrying the same request id.
    /// Engine `error` replies become [`VradioError::Engine`].
    pub fn request(&mut self, msg: ControlMessage) -> Result<ControlMessage, VradioError> {
        let id = self.next_id;
        self.next_id += 1;
        let mut text = encode_envelope(&ControlEnvelope { id: Some(id), msg });
        text.push('\n');
        self.writer.write_all(text.as_bytes())?;
        loop {
            self.line.clear();
            if self.reader.read_line(&mut self.line)? == 0 {
                return Err(VradioError::Protocol(
                    "engine closed the control connection".into(),
                ));
            }
            let env = decode_envelope(self.line.trim())?;
            if env.id != Some(id) {
                log::debug!("skipping uncorrelated reply {:?}", env.id);
                continue;
            }
            return match env.msg {
                ControlMessage::Error { code, text } => Err(VradioError::Engine { code, text }),
                m => Ok(m),
            };
        }
    }
}

type Routes = Arc<Mutex<HashMap<u32, RxIngest>>>;

/// A virtual radio registered with the engine. Streams created from it share
/// its hardware clock.
pub struct Endpoint {
    config: EndpointConfig,
    uuid: Uuid,
    tx_port: u16,
    rx_port: u16,
    clock: Arc<VirtualClock>,
    control: Arc<Mutex<ControlClient>>,
    engine_data: SocketAddr,
    routes: Routes,
    reassembly: Arc<Mutex<ReassemblyStats>>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl Endpoint {
    pub fn connect(config: EndpointConfig) -> Result<Self, VradioError> {
        Self::with_clock(config, Arc::new(VirtualClock::new()))
    }

    pub fn with_clock(
        config: EndpointConfig,
        clock: Arc<VirtualClock>,
    ) -> Result<Self, VradioError> {
        let mut client = ControlClient::connect(config.engine_addr.as_str())?;
        let reply = client.request(ControlMessage::RegisterNode {
            name: config.node_name.clone(),
            port_type: config.port_type,
        })?;
        let ControlMessage::RegisterAck {
            uuid,
            tx_port,
            rx_port,
        } = reply
        else {
            return Err(VradioError::Protocol(format!(
                "expected register_ack, got {reply:?}"
            )));
        };
        let engine_ip = client.peer_addr()?.ip();
        let engine_data = SocketAddr::new(engine_ip, tx_port);
        let control = Arc::new(Mutex::new(client));
        let stop = Arc::new(AtomicBool::new(false));
        let routes: Routes = Arc::default();
        let reassembly = Arc::new(Mutex::new(ReassemblyStats::default()));
        let mut threads = Vec::new();

        if config.port_type.can_receive() {
            let bind = SocketAddr::new(
                if engine_ip.is_ipv4() {
                    [0, 0, 0, 0].into()
                } else {
                    [0u16; 8].into()
                },
                rx_port,
            );
            let socket = UdpSocket::bind(bind)?;
            enlarge_buffers(&socket, SOCKET_BUFFER);
            socket.set_read_timeout(Some(Duration::from_millis(20)))?;
            let (routes, stop, stats) = (routes.clone(), stop.clone(), reassembly.clone());
            threads.push(
                std::thread::Builder::new()
                    .name(format!("{}-rx", config.node_name))
                    .spawn(move || ingest_loop(socket, routes, stop, stats))?,
            );
        }
        {
            let (control, stop) = (control.clone(), stop.clone());
            threads.push(
                std::thread::Builder::new()
                    .name(format!("{}-keepalive", config.node_name))
                    .spawn(move || keepalive_loop(control, uuid, stop))?,
            );
        }
        let ep = Endpoint {
            config,
            uuid,
            tx_port,
            rx_port,
            clock,
            control,
            engine_data,
            routes,
            reassembly,
            stop,
            threads,
        };
        ep.publish_clock()?;
        Ok(ep)
    }

    pub fn uuid(&self) -> Uuid {
        self.uuid
    }

    pub fn ports(&self) -> (u16, u16) {
        (self.tx_port, self.rx_port)
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn clock(&self) -> Arc<VirtualClock> {
        self.clock.clone()
    }

    pub fn reassembly_stats(&self) -> ReassemblyStats {
        *self.reassembly.lock().unwrap()
    }

    /// Sets the radio time and tells the engine the new timeline origin.
    pub fn set_time(&self, t_ns: i64) -> Result<(), VradioError> {
        self.clock.set_time(t_ns);
        self.publish_clock()
    }

    fn publish_clock(&self) -> Result<(), VradioError> {
        let mut settings = Map::new();
        settings.insert(
            "clock_base_ns".into(),
            Value::from(self.clock.clock_base_ns()),
        );
        self.update(settings).map(|_| ())
    }

    /// Sends node settings (antenna, position, path loss, ...) and returns
    /// what the engine applied.
    pub fn update(&self, settings: Map<String, Value>) -> Result<Map<String, Value>, VradioError> {
        match self.request(ControlMessage::UpdateNode {
            uuid: self.uuid,
            settings,
        })? {
            ControlMessage::Ack { applied } => Ok(applied),
            other => Err(VradioError::Protocol(format!(
                "expected ack, got {other:?}"
            ))),
        }
    }

    pub fn request(&self, msg: ControlMessage) -> Result<ControlMessage, VradioError> {
        self.control.lock().unwrap().request(msg)
    }

    fn attach(&self, cfg: &StreamConfig) -> Result<u32, VradioError> {
        cfg.validate()?;
        let reply = self.request(ControlMessage::AttachStream {
            uuid: self.uuid,
            stream: cfg.clone(),
            clock_base_ns: self.clock.clock_base_ns(),
        })?;
        match reply {
            ControlMessage::AttachAck { stream_id, .. } => Ok(stream_id),
            other => Err(VradioError::Protocol(format!(
                "expected attach_ack, got {other:?}"
            ))),
        }
    }

    fn detacher(&self, stream_id: u32) -> impl FnOnce() + Send + 'static {
        let control = self.control.clone();
        let uuid = self.uuid;
        move || {
            if let Err(e) = control
                .lock()
                .unwrap()
                .request(ControlMessage::DetachStream { uuid, stream_id })
            {
                log::debug!("detach of stream {stream_id} failed: {e}");
            }
        }
    }

    pub fn tx_stream(&self, cfg: StreamConfig) -> Result<TxStream, VradioError> {
        if cfg.direction != Direction::Tx {
            return Err(VradioError::InvalidConfig(
                "tx_stream needs a tx configuration".into(),
            ));
        }
        let stream_id = self.attach(&cfg)?;
        let sink = UdpFrameSink::connect(self.engine_data, self.config.mtu)?;
        let threshold = Duration::from_secs_f64(self.config.buffer_threshold_ms / 1e3);
        let mut tx = TxStream::new(
            stream_id,
            cfg,
            self.clock.clone(),
            Box::new(sink),
            threshold,
        )?;
        tx.set_on_close(self.detacher(stream_id));
        Ok(tx)
    }

    pub fn rx_stream(&self, cfg: StreamConfig) -> Result<RxStream, VradioError> {
        if cfg.direction != Direction::Rx {
            return Err(VradioError::InvalidConfig(
                "rx_stream needs an rx configuration".into(),
            ));
        }
        let stream_id = self.attach(&cfg)?;
        let power = self.config.noise_power.unwrap_or_else(|| {
            thermal_noise_power(
                cfg.sample_rate,
                self.config.noise_figure_db,
                self.config.full_scale_dbm,
            )
        });
        let noise = NoiseSource::new(power, self.config.noise_seed.wrapping_add(stream_id as u64));
        let mut rx = RxStream::new(
            stream_id,
            cfg,
            self.clock.clone(),
            Duration::from_secs_f64(self.config.capacity_ms / 1e3),
            Duration::from_secs_f64(self.config.rx_settle_ms / 1e3),
            noise,
        )?;
        self.routes.lock().unwrap().insert(stream_id, rx.ingest());
        let routes = self.routes.clone();
        let detach = self.detacher(stream_id);
        rx.set_on_close(move || {
            routes.lock().unwrap().remove(&stream_id);
            detach();
        });
        Ok(rx)
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn ingest_loop(
    socket: UdpSocket,
    routes: Routes,
    stop: Arc<AtomicBool>,
    stats: Arc<Mutex<ReassemblyStats>>,
) {
    let mut tables: HashMap<SocketAddr, ReassemblyTable> = HashMap::new();
    let mut buf = vec![0u8; MAX_DATAGRAM];
    let mut last_expire = Instant::now();
    while !stop.load(Ordering::Acquire) {
        let received = socket.recv_from(&mut buf);
        let now = Instant::now();
        if let Ok((len, from)) = received {
            let table = tables
                .entry(from)
                .or_insert_with(|| ReassemblyTable::new(ReassemblyConfig::default()));
            if let Reassembly::Complete(frame) = table.push_datagram(&buf[..len], now) {
                let route = routes.lock().unwrap().get(&frame.stream_id).cloned();
                match route {
                    Some(r) => {
                        r.push(&frame);
                    }
                    None => log::trace!("frame for unknown stream {}", frame.stream_id),
                }
            }
        }
        if now.duration_since(last_expire) > Duration::from_millis(5) {
            last_expire = now;
            let mut total = ReassemblyStats::default();
            for t in tables.values_mut() {
                t.expire(now);
                let s = t.stats();
                total.completed += s.completed;
                total.dropped += s.dropped;
                total.duplicates += s.duplicates;
                total.protocol_errors += s.protocol_errors;
            }
            *stats.lock().unwrap() = total;
        }
    }
}

fn keepalive_loop(control: Arc<Mutex<ControlClient>>, uuid: Uuid, stop: Arc<AtomicBool>) {
    let mut last = Instant::now();
    while !stop.load(Ordering::Acquire) {
        std::thread::sleep(Duration::from_millis(50));
        if last.elapsed() >= KEEPALIVE_EVERY {
            last = Instant::now();
            if let Err(e) = control
                .lock()
                .unwrap()
                .request(ControlMessage::Keepalive { uuid })
            {
                log::warn!("keepalive failed: {e}");
            }
        }
    }
}
