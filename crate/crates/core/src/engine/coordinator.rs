//! Engine state without threads or sockets: nodes, streams, channels and
//! their parameters. The service layer turns this into channel views.

use std::collections::{BTreeMap, HashMap};
use std::net::{SocketAddr, ToSocketAddrs};
use std::sync::atomic::Ordering;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crossbeam_channel::Sender;
use serde_json::{Map, Value};
use uuid::Uuid;

use super::config::{EngineConfig, NoisePlacement};
use super::link::compute_link;
use super::pipeline::OutFrame;
use super::view::{
    ChannelParams, ChannelView, CounterMap, LinkOverride, NodeMobility, NodeView, RxEntry, TxEntry,
};
use super::EngineError;
use crate::mobility::{GeoPose, Geodetic, PoseSlot, Trajectory, VehicleConnector};
use crate::propagation::{load_taps_csv, AntennaPattern, PathLossModel};
use crate::vradio::{host_now_ns, Direction, StreamConfig};
use crate::wire::{
    ChannelInfo, Counters, ErrorCode, LinkInfo, NodeInfo, PortType, Snapshot, StreamInfo,
};
use crate::Cf32;

/// Channels are keyed by center frequency rounded to the hertz.
pub type ChannelKey = u64;

pub fn channel_key(center_freq: f64) -> ChannelKey {
    center_freq.round() as u64
}

/// Data-plane attachments of a node, provided by the service.
#[derive(Clone)]
pub struct NodePorts {
    pub tx_port: u16,
    pub rx_port: u16,
    pub egress: Sender<OutFrame>,
}

pub struct Node {
    pub uuid: Uuid,
    pub name: String,
    pub port_type: PortType,
    pub ports: NodePorts,
    pub last_seen: Instant,
    pub clock_base_ns: i64,
    pub antenna_name: String,
    pub view: NodeView,
    pub streams: BTreeMap<u32, StreamConfig>,
    vehicle: Option<VehicleConnector>,
}

struct Channel {
    center_freq: f64,
    params: ChannelParams,
    self_reception: bool,
    counters: CounterMap,
}

pub struct Coordinator {
    config: EngineConfig,
    nodes: HashMap<Uuid, Node>,
    names: HashMap<String, Uuid>,
    channels: BTreeMap<ChannelKey, Channel>,
    antennas: HashMap<String, Arc<AntennaPattern>>,
    origin: Arc<Mutex<Option<Geodetic>>>,
    next_stream: u32,
}

fn invalid(text: impl Into<String>) -> EngineError {
    EngineError::Request {
        code: ErrorCode::InvalidValue,
        text: text.into(),
    }
}

fn request(code: ErrorCode, text: impl Into<String>) -> EngineError {
    EngineError::Request {
        code,
        text: text.into(),
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64, EngineError> {
    v.as_f64()
        .ok_or_else(|| invalid(format!("{key}: expected a number, got {v}")))
}

fn parse_geodetic(v: &Value) -> Result<Geodetic, EngineError> {
    if let Some(a) = v.as_array() {
        let n: Vec<f64> = a.iter().filter_map(Value::as_f64).collect();
        return match n[..] {
            [lat, lon] => Ok(Geodetic::new(lat, lon, 0.0)),
            [lat, lon, alt] => Ok(Geodetic::new(lat, lon, alt)),
            _ => Err(invalid(format!(
                "position: expected [lat, lon, alt], got {v}"
            ))),
        };
    }
    serde_json::from_value(v.clone()).map_err(|e| invalid(format!("position: {e}")))
}

fn parse_taps(v: &Value) -> Result<Vec<Cf32>, EngineError> {
    match v {
        Value::Null => Ok(Vec::new()),
        Value::String(path) => load_taps_csv(path).map_err(|e| invalid(format!("taps: {e}"))),
        _ => {
            let taps: Vec<[f32; 2]> =
                serde_json::from_value(v.clone()).map_err(|e| invalid(format!("taps: {e}")))?;
            Ok(taps.into_iter().map(|[re, im]| Cf32::new(re, im)).collect())
        }
    }
}

fn parse_path_loss(v: &Value) -> Result<Option<PathLossModel>, EngineError> {
    if v.is_null() {
        return Ok(None);
    }
    let m: PathLossModel =
        serde_json::from_value(v.clone()).map_err(|e| invalid(format!("path_loss: {e}")))?;
    m.validate()
        .map_err(|e| invalid(format!("path_loss: {e}")))?;
    Ok(Some(m))
}

impl Coordinator {
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        let mut antennas = HashMap::new();
        for (name, path) in &config.antennas {
            let p = AntennaPattern::load_csv(name.clone(), path)
                .map_err(|e| EngineError::Config(format!("antenna {name}: {e}")))?;
            antennas.insert(name.clone(), Arc::new(p));
        }
        config
            .default_path_loss
            .validate()
            .map_err(|e| EngineError::Config(e.to_string()))?;
        let mut c = Coordinator {
            config,
            nodes: HashMap::new(),
            names: HashMap::new(),
            channels: BTreeMap::new(),
            antennas,
            origin: Arc::default(),
            next_stream: 1,
        };
        c.antenna(&c.config.default_antenna.clone())
            .map_err(|e| EngineError::Config(format!("default antenna: {e}")))?;
        Ok(c)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn antenna(&mut self, name: &str) -> Result<Arc<AntennaPattern>, EngineError> {
        if let Some(a) = self.antennas.get(name) {
            return Ok(a.clone());
        }
        let a = match AntennaPattern::builtin(name) {
            Some(a) => a,
            None => AntennaPattern::load_csv(name, name)
                .map_err(|e| invalid(format!("antenna {name}: {e}")))?,
        };
        let a = Arc::new(a);
        self.antennas.insert(name.to_string(), a.clone());
        Ok(a)
    }

    pub fn name_taken(&self, name: &str) -> bool {
        self.names.contains_key(name)
    }

    pub fn register(
        &mut self,
        name: &str,
        port_type: PortType,
        ports: NodePorts,
    ) -> Result<Uuid, EngineError> {
        if name.is_empty() {
            return Err(invalid("node name is empty"));
        }
        if self.name_taken(name) {
            return Err(request(
                ErrorCode::DuplicateName,
                format!("node {name} is already registered"),
            ));
        }
        let uuid = Uuid::new_v4();
        let antenna_name = self.config.default_antenna.clone();
        let node = Node {
            uuid,
            name: name.to_string(),
            port_type,
            ports,
            last_seen: Instant::now(),
            clock_base_ns: 0,
            view: NodeView {
                antenna: self.antenna(&antenna_name)?,
                ..Default::default()
            },
            antenna_name,
            streams: BTreeMap::new(),
            vehicle: None,
        };
        self.nodes.insert(uuid, node);
        self.names.insert(name.to_string(), uuid);
        if let Some(profile) = self.config.nodes.get(name).cloned() {
            let mut s = Map::new();
            if let Some(p) = profile.position {
                s.insert("position".into(), serde_json::to_value(p).unwrap());
            }
            if let Some(v) = profile.vehicle {
                s.insert("vehicle".into(), v.into());
            }
            if let Some(t) = profile.trajectory {
                s.insert("trajectory".into(), t.into());
            }
            if let Some(a) = profile.antenna {
                s.insert("antenna".into(), a.into());
            }
            if let Some(p) = profile.path_loss {
                s.insert("path_loss".into(), serde_json::to_value(p).unwrap());
            }
            if let Some(f) = profile.freq_offset_hz {
                s.insert("freq_offset_hz".into(), f.into());
            }
            if let Err(e) = self.update_node(uuid, &s) {
                log::warn!("profile for {name}: {e}");
            }
        }
        log::info!("registered node {name} ({uuid})");
        Ok(uuid)
    }

    pub fn node(&self, uuid: &Uuid) -> Option<&Node> {
        self.nodes.get(uuid)
    }

    pub fn node_by_name(&self, name: &str) -> Option<&Node> {
        self.names.get(name).and_then(|u| self.nodes.get(u))
    }

    fn node_mut(&mut self, uuid: Uuid) -> Result<&mut Node, EngineError> {
        self.nodes
            .get_mut(&uuid)
            .ok_or_else(|| request(ErrorCode::UnknownNode, format!("no node {uuid}")))
    }

    pub fn touch(&mut self, uuid: Uuid) -> Result<(), EngineError> {
        self.node_mut(uuid)?.last_seen = Instant::now();
        Ok(())
    }

    pub fn attach(
        &mut self,
        uuid: Uuid,
        stream: StreamConfig,
        clock_base_ns: i64,
    ) -> Result<u32, EngineError> {
        let node = self
            .nodes
            .get(&uuid)
            .ok_or_else(|| request(ErrorCode::UnknownNode, format!("no node {uuid}")))?;
        stream
            .validate()
            .map_err(|e| request(ErrorCode::InvalidStream, e.to_string()))?;
        let allowed = match stream.direction {
            Direction::Tx => node.port_type.can_transmit(),
            Direction::Rx => node.port_type.can_receive(),
        };
        if !allowed {
            return Err(request(
                ErrorCode::InvalidStream,
                format!(
                    "{:?} stream on a {:?} node",
                    stream.direction, node.port_type
                ),
            ));
        }
        let id = self.next_stream;
        self.next_stream += 1;
        let key = channel_key(stream.center_freq);
        let self_reception = self.config.self_reception;
        self.channels.entry(key).or_insert_with(|| Channel {
            center_freq: stream.center_freq,
            params: ChannelParams::default(),
            self_reception,
            counters: CounterMap::default(),
        });
        let node = self.node_mut(uuid)?;
        node.last_seen = Instant::now();
        if clock_base_ns != 0 {
            node.clock_base_ns = clock_base_ns;
        }
        node.streams.insert(id, stream);
        Ok(id)
    }

    pub fn detach(&mut self, uuid: Uuid, stream_id: u32) -> Result<(), EngineError> {
        let node = self.node_mut(uuid)?;
        let Some(cfg) = node.streams.remove(&stream_id) else {
            return Err(request(
                ErrorCode::UnknownStream,
                format!("node {uuid} has no stream {stream_id}"),
            ));
        };
        self.prune_channel(channel_key(cfg.center_freq));
        Ok(())
    }

    fn prune_channel(&mut self, key: ChannelKey) {
        let used = self.nodes.values().any(|n| {
            n.streams
                .values()
                .any(|s| channel_key(s.center_freq) == key)
        });
        if !used {
            self.channels.remove(&key);
        }
    }

    /// Removes a node and every stream it had attached.
    pub fn remove(&mut self, uuid: Uuid) -> Option<Node> {
        let node = self.nodes.remove(&uuid)?;
        self.names.remove(&node.name);
        for s in node.streams.values() {
            self.prune_channel(channel_key(s.center_freq));
        }
        log::info!("removed node {} ({uuid})", node.name);
        Some(node)
    }

    /// Removes nodes not heard from within `timeout`.
    pub fn expire(&mut self, now: Instant, timeout: Duration) -> Vec<Node> {
        let stale: Vec<Uuid> = self
            .nodes
            .values()
            .filter(|n| now.saturating_duration_since(n.last_seen) > timeout)
            .map(|n| n.uuid)
            .collect();
        stale.into_iter().filter_map(|u| self.remove(u)).collect()
    }

    /// Applies node settings; returns what was applied. Keys are checked
    /// before anything changes.
    pub fn update_node(
        &mut self,
        uuid: Uuid,
        settings: &Map<String, Value>,
    ) -> Result<Map<String, Value>, EngineError> {
        const KEYS: [&str; 8] = [
            "clock_base_ns",
            "antenna",
            "position",
            "path_loss",
            "vehicle",
            "trajectory",
            "freq_offset_hz",
            "noise_power",
        ];
        self.node_mut(uuid)?;
        if let Some(k) = settings.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(request(
                ErrorCode::UnknownKey,
                format!("unknown node setting {k}"),
            ));
        }
        for (k, v) in settings {
            self.set_node_key(uuid, k, v)?;
        }
        Ok(settings.clone())
    }

    pub fn set_node_param(
        &mut self,
        node: &str,
        key: &str,
        value: &Value,
    ) -> Result<Map<String, Value>, EngineError> {
        let uuid = match self.names.get(node) {
            Some(u) => *u,
            None => node
                .parse::<Uuid>()
                .ok()
                .filter(|u| self.nodes.contains_key(u))
                .ok_or_else(|| request(ErrorCode::UnknownNode, format!("no node {node}")))?,
        };
        let mut m = Map::new();
        m.insert(key.to_string(), value.clone());
        self.update_node(uuid, &m)
    }

    fn set_node_key(&mut self, uuid: Uuid, key: &str, v: &Value) -> Result<(), EngineError> {
        match key {
            "clock_base_ns" => {
                let b = v.as_i64().ok_or_else(|| {
                    invalid(format!("clock_base_ns: expected an integer, got {v}"))
                })?;
                self.node_mut(uuid)?.clock_base_ns = b;
            }
            "antenna" => {
                let name = v
                    .as_str()
                    .ok_or_else(|| invalid("antenna: expected a name"))?
                    .to_string();
                let a = self.antenna(&name)?;
                let n = self.node_mut(uuid)?;
                n.view.antenna = a;
                n.antenna_name = name;
            }
            "position" => {
                let mobility = if v.is_null() {
                    NodeMobility::None
                } else {
                    let p = parse_geodetic(v)?;
                    let pose: GeoPose = match v.get("yaw") {
                        Some(_) => serde_json::from_value(v.clone())
                            .map_err(|e| invalid(format!("position: {e}")))?,
                        None => GeoPose::fixed(p.lat, p.lon, p.alt),
                    };
                    self.origin.lock().unwrap().get_or_insert(p);
                    NodeMobility::Fixed(pose)
                };
                let n = self.node_mut(uuid)?;
                n.vehicle = None;
                n.view.mobility = mobility;
            }
            "path_loss" => {
                let m = parse_path_loss(v)?;
                self.node_mut(uuid)?.view.path_loss = m;
            }
            "vehicle" => {
                let n = self.node_mut(uuid)?;
                if v.is_null() {
                    n.vehicle = None;
                    n.view.mobility = NodeMobility::None;
                    return Ok(());
                }
                let text = v
                    .as_str()
                    .ok_or_else(|| invalid("vehicle: expected host:port"))?;
                let addr: SocketAddr = text
                    .to_socket_addrs()
                    .ok()
                    .and_then(|mut a| a.next())
                    .ok_or_else(|| invalid(format!("vehicle: cannot resolve {text}")))?;
                let slot = PoseSlot::new();
                n.vehicle = Some(VehicleConnector::spawn(addr, slot.clone()));
                n.view.mobility = NodeMobility::Vehicle(slot);
            }
            "trajectory" => {
                let t = match v {
                    Value::Null => None,
                    Value::String(path) => Some(
                        Trajectory::load(path).map_err(|e| invalid(format!("trajectory: {e}")))?,
                    ),
                    _ => Some(
                        Trajectory::from_json(&v.to_string())
                            .map_err(|e| invalid(format!("trajectory: {e}")))?,
                    ),
                };
                let n = self.node_mut(uuid)?;
                n.vehicle = None;
                n.view.mobility = match t {
                    Some(t) => NodeMobility::Trajectory {
                        trajectory: Arc::new(t),
                        start_host_ns: host_now_ns(),
                    },
                    None => NodeMobility::None,
                };
            }
            "freq_offset_hz" => {
                let f = as_f64(key, v)?;
                self.node_mut(uuid)?.view.freq_offset_hz = f;
            }
            "noise_power" => {
                let p = if v.is_null() {
                    None
                } else {
                    Some(as_f64(key, v)?)
                };
                if p.is_some_and(|p| p < 0.0) {
                    return Err(invalid("noise_power must be non-negative"));
                }
                self.node_mut(uuid)?.view.noise_power = p;
            }
            _ => {
                return Err(request(
                    ErrorCode::UnknownKey,
                    format!("unknown node setting {key}"),
                ))
            }
        }
        Ok(())
    }

    pub fn set_channel_param(
        &mut self,
        center_freq: f64,
        key: &str,
        v: &Value,
    ) -> Result<Map<String, Value>, EngineError> {
        let ch = self
            .channels
            .get_mut(&channel_key(center_freq))
            .ok_or_else(|| {
                request(
                    ErrorCode::UnknownChannel,
                    format!("no channel at {center_freq} Hz"),
                )
            })?;
        match key {
            "path_loss" => ch.params.path_loss = parse_path_loss(v)?,
            "taps" => ch.params.taps = parse_taps(v)?,
            "freq_offset_hz" => ch.params.freq_offset_hz = as_f64(key, v)?,
            "self_reception" => {
                ch.self_reception = v
                    .as_bool()
                    .ok_or_else(|| invalid("self_reception: expected a bool"))?;
            }
            "link" => {
                let tx = v.get("tx_stream").and_then(Value::as_u64);
                let rx = v.get("rx_stream").and_then(Value::as_u64);
                let (Some(tx), Some(rx)) = (tx, rx) else {
                    return Err(invalid("link: needs tx_stream and rx_stream"));
                };
                let ov: LinkOverride =
                    serde_json::from_value(v.clone()).map_err(|e| invalid(format!("link: {e}")))?;
                if ov.taps.as_ref().is_some_and(Vec::is_empty) {
                    return Err(invalid("link: taps must not be empty"));
                }
                let k = (tx as u32, rx as u32);
                if ov == LinkOverride::default() {
                    ch.params.overrides.remove(&k);
                } else {
                    ch.params.overrides.insert(k, ov);
                }
            }
            "clear_links" => ch.params.overrides.clear(),
            _ => {
                return Err(request(
                    ErrorCode::UnknownKey,
                    format!("unknown channel setting {key}"),
                ))
            }
        }
        let mut m = Map::new();
        m.insert(key.to_string(), v.clone());
        Ok(m)
    }

    pub fn channel_keys(&self) -> Vec<ChannelKey> {
        self.channels.keys().copied().collect()
    }

    /// Builds the processing view of a channel.
    pub fn view(&self, key: ChannelKey) -> Option<(ChannelView, CounterMap)> {
        let ch = self.channels.get(&key)?;
        let mut v = ChannelView::new(ch.center_freq);
        v.params = ch.params.clone();
        v.default_path_loss = self.config.default_path_loss.clone();
        v.self_reception = ch.self_reception;
        v.origin = self.origin.clone();
        v.engine_noise = self.config.noise_placement == NoisePlacement::Engine;
        v.noise_figure_db = self.config.noise_figure_db;
        v.full_scale_dbm = self.config.full_scale_dbm;
        for n in self.nodes.values() {
            let mut on_channel = false;
            for (&id, s) in &n.streams {
                if channel_key(s.center_freq) != key {
                    continue;
                }
                on_channel = true;
                match s.direction {
                    Direction::Tx => {
                        v.tx.insert(
                            id,
                            TxEntry {
                                stream_id: id,
                                node: n.uuid,
                                config: s.clone(),
                                clock_base_ns: n.clock_base_ns,
                            },
                        );
                    }
                    Direction::Rx => v.rx.push(RxEntry {
                        stream_id: id,
                        node: n.uuid,
                        config: s.clone(),
                        clock_base_ns: n.clock_base_ns,
                        egress: n.ports.egress.clone(),
                    }),
                }
            }
            if on_channel {
                v.nodes.insert(n.uuid, n.view.clone());
            }
        }
        v.rx.sort_by_key(|r| r.stream_id);
        Some((v, ch.counters.clone()))
    }

    /// Which channel each TX stream feeds.
    pub fn tx_routes(&self) -> HashMap<u32, ChannelKey> {
        self.nodes
            .values()
            .flat_map(|n| n.streams.iter())
            .filter(|(_, s)| s.direction == Direction::Tx)
            .map(|(&id, s)| (id, channel_key(s.center_freq)))
            .collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn snapshot(&self, counters: Counters) -> Snapshot {
        let now = host_now_ns();
        let mut nodes: Vec<NodeInfo> = self
            .nodes
            .values()
            .map(|n| NodeInfo {
                uuid: n.uuid,
                name: n.name.clone(),
                port_type: n.port_type,
                tx_port: n.ports.tx_port,
                rx_port: n.ports.rx_port,
                antenna: n.antenna_name.clone(),
                mobility: n.view.mobility.describe(),
                path_loss: n
                    .view
                    .path_loss
                    .as_ref()
                    .map(|m| serde_json::to_value(m).unwrap()),
                position: n.view.mobility.pose(now).map(|p| [p.lat, p.lon, p.alt]),
                streams: n
                    .streams
                    .iter()
                    .map(|(&id, c)| StreamInfo {
                        stream_id: id,
                        config: c.clone(),
                    })
                    .collect(),
            })
            .collect();
        nodes.sort_by(|a, b| a.name.cmp(&b.name));
        let channels = self
            .channels
            .keys()
            .filter_map(|&k| {
                let (v, counters) = self.view(k)?;
                let counters = counters.lock().unwrap();
                let mut tx_streams: Vec<u32> = v.tx.keys().copied().collect();
                tx_streams.sort_unstable();
                let mut links = Vec::new();
                for t in &tx_streams {
                    let tx = &v.tx[t];
                    for rx in &v.rx {
                        if !v.self_reception && rx.node == tx.node {
                            continue;
                        }
                        let p = compute_link(&v, tx, rx, now);
                        let (ingested, delivered, dropped) = counters
                            .get(&(*t, rx.stream_id))
                            .map_or((0, 0, 0), |c| c.get());
                        links.push(LinkInfo {
                            tx_stream: *t,
                            rx_stream: rx.stream_id,
                            distance_m: p.geometry.map_or(0.0, |g| g.distance),
                            path_loss_db: p.path_loss_db,
                            delay_samples: p.delay_samples,
                            omega: p.omega,
                            tx_gain: p.tx_gain,
                            rx_gain: p.rx_gain,
                            taps: p.taps.len(),
                            ingested,
                            delivered,
                            dropped,
                        });
                    }
                }
                Some(ChannelInfo {
                    center_freq: v.center_freq,
                    active: v.is_active(),
                    rx_streams: v.rx.iter().map(|r| r.stream_id).collect(),
                    tx_streams,
                    links,
                })
            })
            .collect();
        Snapshot {
            nodes,
            channels,
            counters,
        }
    }
}

/// Totals kept by the service threads.
#[derive(Debug, Default)]
pub struct GlobalCounters {
    pub frames_ingested: std::sync::atomic::AtomicU64,
    pub frames_ignored: std::sync::atomic::AtomicU64,
    pub frames_delivered: std::sync::atomic::AtomicU64,
    pub frames_dropped: std::sync::atomic::AtomicU64,
    pub reassembly_dropped: std::sync::atomic::AtomicU64,
    pub protocol_errors: std::sync::atomic::AtomicU64,
}

impl GlobalCounters {
    pub fn get(&self) -> Counters {
        Counters {
            frames_ingested: self.frames_ingested.load(Ordering::Relaxed),
            frames_ignored: self.frames_ignored.load(Ordering::Relaxed),
            frames_delivered: self.frames_delivered.load(Ordering::Relaxed),
            frames_dropped: self.frames_dropped.load(Ordering::Relaxed),
            reassembly_dropped: self.reassembly_dropped.load(Ordering::Relaxed),
            protocol_errors: self.protocol_errors.load(Ordering::Relaxed),
        }
    }
}
