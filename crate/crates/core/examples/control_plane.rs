//! Managing a running engine over its JSON control socket.
//!
//! Each request is one JSON object per line. An `id` field is echoed in the
//! reply so a client can match answers to questions.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

use iqtwin::engine::{Engine, EngineConfig};
use iqtwin::vradio::{Direction, Endpoint, EndpointConfig, StreamConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    iqtwin::init_logging("warn");
    let engine = Engine::start(EngineConfig::local())?;
    let addr = engine.control_addr();

    // two radios on one channel so there is something to manage
    let ue = Endpoint::connect(EndpointConfig::new("ue", addr.to_string()))?;
    let gnb = Endpoint::connect(EndpointConfig::new("gnb", addr.to_string()))?;
    let _tx = ue.tx_stream(StreamConfig::new(Direction::Tx, 3.41e9, 1.92e6, 1920))?;
    let _rx = gnb.rx_stream(StreamConfig::new(Direction::Rx, 3.41e9, 1.92e6, 1920))?;

    let stream = TcpStream::connect(addr)?;
    let mut w = stream.try_clone()?;
    let mut r = BufReader::new(stream);
    let requests = [
        r#"{"id":1,"type":"set_node_param","node":"gnb","key":"position","value":{"lat":35.7713,"lon":-78.6749,"alt":25.0}}"#,
        r#"{"id":2,"type":"set_node_param","node":"ue","key":"position","value":[35.7740,-78.6749,1.5]}"#,
        r#"{"id":3,"type":"set_channel_param","center_freq":3.41e9,"key":"path_loss","value":{"model":"free_space"}}"#,
        r#"{"id":4,"type":"set_node_param","node":"nobody","key":"antenna","value":"dipole"}"#,
        r#"{"id":5,"type":"get_state"}"#,
    ];
    let mut line = String::new();
    for req in requests {
        writeln!(w, "{req}")?;
        line.clear();
        r.read_line(&mut line)?;
        println!("> {req}");
        if req.contains("get_state") {
            let v: serde_json::Value = serde_json::from_str(&line)?;
            println!(
                "< {}",
                serde_json::to_string_pretty(&v["snapshot"]["channels"])?
            );
        } else {
            print!("< {line}");
        }
    }
    Ok(())
}
