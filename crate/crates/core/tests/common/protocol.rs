//! Wire formats: frame codec, fragmentation, control messages, telemetry.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use iqtwin::mobility::mavlink::GlobalPositionInt;
use iqtwin::mobility::{MavMessage, MavParser};
use iqtwin::vradio::{Direction, StreamConfig};
use iqtwin::wire::{
    decode_envelope, encode_envelope, ControlEnvelope, ControlMessage, Counters, ErrorCode,
    Fragmenter, PortType, Reassembly, ReassemblyConfig, ReassemblyTable, SampleFormat, SignalFrame,
    Snapshot, FRAME_HEADER_LEN,
};
use iqtwin::Cf32;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use uuid::Uuid;

use super::{all, prop, Check};

fn header(f: &SignalFrame) -> (u32, u32, i64, i64) {
    (
        f.stream_id,
        f.source_id,
        f.emulated_tx_time,
        f.wallclock_tx_time,
    )
}

/// Float frames survive the codec bit for bit, including odd payload
/// values.
pub fn cf32_round_trip(
    (bits, channels, ids, times): (Vec<(u32, u32)>, u16, (u32, u32), (i64, i64)),
) -> Result<(), TestCaseError> {
    let c = channels as usize;
    let n = bits.len() / c * c;
    prop_assume!(n > 0);
    let x: Vec<Cf32> = bits[..n]
        .iter()
        .map(|(a, b)| Cf32::new(f32::from_bits(*a), f32::from_bits(*b)))
        .collect();
    let mut f = SignalFrame::from_samples(SampleFormat::Cf32, channels, &x).unwrap();
    (f.stream_id, f.source_id) = ids;
    (f.emulated_tx_time, f.wallclock_tx_time) = times;
    let bytes = f.encode().unwrap();
    prop_assert_eq!(bytes.len(), FRAME_HEADER_LEN + 8 * n);
    let g = SignalFrame::decode(&bytes).unwrap();
    prop_assert_eq!(header(&g), header(&f));
    prop_assert_eq!(g.num_channels, channels);
    for (a, b) in x.iter().zip(g.samples()) {
        prop_assert_eq!(
            (a.re.to_bits(), a.im.to_bits()),
            (b.re.to_bits(), b.im.to_bits())
        );
    }
    prop_assert_eq!(g.encode().unwrap(), bytes);
    Ok(())
}

/// Integer frames: every representable sample value comes back exactly and
/// the payload carries exactly the little-endian i16 pairs.
pub fn ci16_round_trip((pairs, times): (Vec<(i16, i16)>, (i64, i64))) -> Result<(), TestCaseError> {
    prop_assume!(!pairs.is_empty());
    let pairs: Vec<(i16, i16)> = pairs
        .into_iter()
        .map(|(a, b)| (a.max(-32767), b.max(-32767)))
        .collect();
    let x: Vec<Cf32> = pairs
        .iter()
        .map(|(a, b)| Cf32::new(*a as f32 / 32767.0, *b as f32 / 32767.0))
        .collect();
    let mut f = SignalFrame::from_samples(SampleFormat::Ci16, 1, &x).unwrap();
    (f.emulated_tx_time, f.wallclock_tx_time) = times;
    let bytes = f.encode().unwrap();
    let want: Vec<u8> = pairs
        .iter()
        .flat_map(|(a, b)| a.to_le_bytes().into_iter().chain(b.to_le_bytes()))
        .collect();
    prop_assert_eq!(&bytes[FRAME_HEADER_LEN..], &want[..]);
    let g = SignalFrame::decode(&bytes).unwrap();
    prop_assert_eq!(header(&g), header(&f));
    prop_assert_eq!(g.samples(), x);
    prop_assert_eq!(g.encode().unwrap(), bytes);
    Ok(())
}

/// Fragments arrive shuffled with about one in ten lost. Frames missing any
/// fragment are dropped whole and counted; every other frame comes back
/// exactly.
pub fn fragments_survive_reordering_and_loss(
    (seed, mtu, sizes): (u64, usize, Vec<usize>),
) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frag = Fragmenter::new(mtu).unwrap();
    let mut originals = Vec::new();
    let mut datagrams = Vec::new();
    for (k, n) in sizes.iter().enumerate() {
        let x: Vec<Cf32> = (0..*n)
            .map(|_| Cf32::new(rng.random(), rng.random()))
            .collect();
        let mut f = SignalFrame::from_samples(SampleFormat::Cf32, 1, &x).unwrap();
        f.emulated_tx_time = k as i64;
        datagrams.extend(frag.datagrams(&f).unwrap().into_iter().map(|d| (k, d)));
        originals.push(f.encode().unwrap());
    }
    let mut lost = BTreeSet::new();
    datagrams.retain(|(k, _)| {
        let keep = rng.random::<f64>() >= 0.1;
        if !keep {
            lost.insert(*k);
        }
        keep
    });
    datagrams.shuffle(&mut rng);

    let mut table = ReassemblyTable::new(ReassemblyConfig {
        timeout: Duration::from_secs(3600),
        max_newer_completed: u32::MAX,
    });
    let now = Instant::now();
    let mut complete = BTreeSet::new();
    for (_, d) in &datagrams {
        match table.push_datagram(d, now) {
            Reassembly::Complete(f) => {
                let k = f.emulated_tx_time as usize;
                prop_assert_eq!(&f.encode().unwrap(), &originals[k]);
                prop_assert!(complete.insert(k), "frame {} delivered twice", k);
            }
            Reassembly::Pending => {}
            Reassembly::Dropped => prop_assert!(false, "intact fragment dropped"),
        }
    }
    let expired = table.expire(now + Duration::from_secs(7200));
    // a frame that lost every fragment never reached the table
    let seen: BTreeSet<usize> = datagrams.iter().map(|(k, _)| *k).collect();
    let partial = lost.intersection(&seen).count();
    let intact: BTreeSet<usize> = (0..sizes.len()).filter(|k| !lost.contains(k)).collect();
    prop_assert_eq!(&complete, &intact);
    prop_assert_eq!(expired, partial);
    let s = table.stats();
    prop_assert_eq!(s.completed as usize, intact.len());
    prop_assert_eq!(s.dropped as usize, partial);
    Ok(())
}

pub fn control_messages() -> Vec<ControlMessage> {
    let uuid = Uuid::from_u128(0x1234_5678_9abc_def0_1122_3344_5566_7788);
    let mut settings = serde_json::Map::new();
    settings.insert(
        "position".into(),
        json!({"lat": 35.77, "lon": -78.67, "alt": 6.0}),
    );
    settings.insert("antenna".into(), json!("dipole"));
    vec![
        ControlMessage::RegisterNode {
            name: "ue-1".into(),
            port_type: PortType::RxTx,
        },
        ControlMessage::RegisterAck {
            uuid,
            tx_port: 40000,
            rx_port: 40001,
        },
        ControlMessage::AttachStream {
            uuid,
            stream: StreamConfig::new(Direction::Rx, 3.41e9, 23.04e6, 11520).with_channels(2),
            clock_base_ns: -17,
        },
        ControlMessage::AttachAck {
            uuid,
            stream_id: 9,
            center_freq: 3.41e9,
        },
        ControlMessage::DetachStream { uuid, stream_id: 9 },
        ControlMessage::UpdateNode {
            uuid,
            settings: settings.clone(),
        },
        ControlMessage::Keepalive { uuid },
        ControlMessage::SetNodeParam {
            node: "ue-1".into(),
            key: "path_loss".into(),
            value: json!({"model": "free_space"}),
        },
        ControlMessage::SetChannelParam {
            center_freq: 3.32e9,
            key: "freq_offset_hz".into(),
            value: json!(150.0),
        },
        ControlMessage::GetState,
        ControlMessage::State {
            snapshot: Snapshot {
                nodes: vec![],
                channels: vec![],
                counters: Counters::default(),
            },
        },
        ControlMessage::Ack { applied: settings },
        ControlMessage::error(ErrorCode::UnknownNode, "no node named x"),
    ]
}

pub fn control_round_trip() -> Result<String, String> {
    let msgs = control_messages();
    for (i, m) in msgs.iter().enumerate() {
        for id in [None, Some(i as u64 * 977)] {
            let env = ControlEnvelope { id, msg: m.clone() };
            let text = encode_envelope(&env);
            if text.contains('\n') {
                return Err(format!("newline inside {text}"));
            }
            let back = decode_envelope(&text).map_err(|e| format!("{text}: {e}"))?;
            if back != env {
                return Err(format!("{text} decoded as {back:?}"));
            }
        }
    }
    Ok(format!("{} message kinds, with and without id", msgs.len()))
}

/// Hand-assembled GLOBAL_POSITION_INT with a bitwise reference CRC.
pub fn crafted_global_position() -> Vec<u8> {
    let mut f = vec![0xFE, 28, 42, 1, 1, 33];
    f.extend_from_slice(&987_654u32.to_le_bytes());
    f.extend_from_slice(&357_713_000i32.to_le_bytes());
    f.extend_from_slice(&(-786_749_000i32).to_le_bytes());
    f.extend_from_slice(&88_250i32.to_le_bytes());
    f.extend_from_slice(&(-1_500i32).to_le_bytes());
    f.extend_from_slice(&1234i16.to_le_bytes());
    f.extend_from_slice(&(-567i16).to_le_bytes());
    f.extend_from_slice(&89i16.to_le_bytes());
    f.extend_from_slice(&27_000u16.to_le_bytes());
    let mut crc: u16 = 0xFFFF;
    for &b in f[1..].iter().chain(std::iter::once(&104u8)) {
        crc ^= b as u16;
        for _ in 0..8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ 0x8408
            } else {
                crc >> 1
            };
        }
    }
    f.extend_from_slice(&crc.to_le_bytes());
    f
}

pub fn crafted_decodes_exactly() -> Result<String, String> {
    let msgs = MavParser::new().push(&crafted_global_position());
    let want = GlobalPositionInt {
        time_boot_ms: 987_654,
        lat: 357_713_000.0 * 1e-7,
        lon: -786_749_000.0 * 1e-7,
        alt_msl: 88.25,
        relative_alt: -1.5,
        vel_ned: [12.34, -5.67, 0.89],
        heading: Some(270.0),
    };
    match msgs.as_slice() {
        [MavMessage::GlobalPosition(g)] if *g == want => {
            Ok("crafted GLOBAL_POSITION_INT exact".into())
        }
        other => Err(format!("decoded {other:?}")),
    }
}

/// Random bytes with valid packets mixed in never upset the parser, and the
/// result does not depend on how the stream is chunked.
pub fn parser_survives_fuzz(
    (noise, at, chunk): (Vec<u8>, Vec<usize>, usize),
) -> Result<(), TestCaseError> {
    let packet = crafted_global_position();
    let mut stream = noise;
    for p in at {
        let p = p.min(stream.len());
        stream.splice(p..p, packet.iter().copied());
    }
    let whole = MavParser::new().push(&stream);
    let mut chunked = MavParser::new();
    let mut got = Vec::new();
    for c in stream.chunks(chunk) {
        got.extend(chunked.push(c));
    }
    prop_assert_eq!(&got, &whole);
    prop_assert_eq!(chunked.stats(), {
        let mut p = MavParser::new();
        p.push(&stream);
        p.stats()
    });
    Ok(())
}

pub fn cf32_strategy() -> impl Strategy<Value = (Vec<(u32, u32)>, u16, (u32, u32), (i64, i64))> {
    (
        proptest::collection::vec((any::<u32>(), any::<u32>()), 1..3000),
        1u16..=4,
        (any::<u32>(), any::<u32>()),
        (any::<i64>(), any::<i64>()),
    )
}

pub fn ci16_strategy() -> impl Strategy<Value = (Vec<(i16, i16)>, (i64, i64))> {
    (
        proptest::collection::vec((any::<i16>(), any::<i16>()), 1..3000),
        (any::<i64>(), any::<i64>()),
    )
}

pub fn fragment_strategy() -> impl Strategy<Value = (u64, usize, Vec<usize>)> {
    (
        any::<u64>(),
        64usize..9000,
        proptest::collection::vec(1usize..4000, 1..40),
    )
}

pub fn fuzz_strategy() -> impl Strategy<Value = (Vec<u8>, Vec<usize>, usize)> {
    (
        proptest::collection::vec(any::<u8>(), 0..4096),
        proptest::collection::vec(0usize..4096, 0..6),
        1usize..300,
    )
}

pub fn check_protocol() -> Check {
    all(vec![
        (
            "fc32 codec",
            Box::new(|| prop(128, cf32_strategy(), cf32_round_trip).map(|_| String::new())),
        ),
        (
            "sc16 codec",
            Box::new(|| prop(128, ci16_strategy(), ci16_round_trip).map(|_| String::new())),
        ),
        (
            "fragments (shuffle, 10% loss)",
            Box::new(|| {
                prop(
                    128,
                    fragment_strategy(),
                    fragments_survive_reordering_and_loss,
                )
                .map(|_| String::new())
            }),
        ),
        ("control", Box::new(control_round_trip)),
        (
            "mavlink fuzz",
            Box::new(|| prop(256, fuzz_strategy(), parser_survives_fuzz).map(|_| String::new())),
        ),
        ("mavlink", Box::new(crafted_decodes_exactly)),
    ])
}
