use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::{Arc, Mutex};

use crate::wire::{Fragmenter, SignalFrame};

/// Socket buffer size requested for data-plane sockets.
pub const SOCKET_BUFFER: usize = 4 << 20;

/// Asks the kernel for larger send and receive buffers so bursts of
/// fragments are not lost. The kernel may grant less.
pub fn enlarge_buffers(socket: &UdpSocket, bytes: usize) {
    use std::os::fd::AsRawFd;
    let v = bytes.min(i32::MAX as usize) as libc::c_int;
    for opt in [libc::SO_RCVBUF, libc::SO_SNDBUF] {
        // SAFETY: valid fd and a c_int option value of the declared length
        let rc = unsafe {
            libc::setsockopt(
                socket.as_raw_fd(),
                libc::SOL_SOCKET,
                opt,
                &v as *const libc::c_int as *const libc::c_void,
                std::mem::size_of::<libc::c_int>() as libc::socklen_t,
            )
        };
        if rc != 0 {
            log::debug!(
                "setsockopt({opt}) failed: {}",
                std::io::Error::last_os_error()
            );
        }
    }
}

/// Where a TX stream puts its encoded frames.
pub trait FrameSink: Send {
    fn send_frame(&mut self, frame: &SignalFrame) -> io::Result<()>;
}

/// Fragments frames into UDP datagrams addressed to the engine.
pub struct UdpFrameSink {
    socket: UdpSocket,
    fragmenter: Fragmenter,
}

impl UdpFrameSink {
    pub fn connect(dest: SocketAddr, mtu: usize) -> io::Result<Self> {
        let bind: SocketAddr = if dest.is_ipv4() {
            "0.0.0.0:0"
        } else {
            "[::]:0"
        }
        .parse()
        .unwrap();
        let socket = UdpSocket::bind(bind)?;
        enlarge_buffers(&socket, SOCKET_BUFFER);
        socket.connect(dest)?;
        let fragmenter =
            Fragmenter::new(mtu).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        Ok(UdpFrameSink { socket, fragmenter })
    }
}

impl FrameSink for UdpFrameSink {
    fn send_frame(&mut self, frame: &SignalFrame) -> io::Result<()> {
        let datagrams = self
            .fragmenter
            .datagrams(frame)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        for d in datagrams {
            self.socket.send(&d)?;
        }
        Ok(())
    }
}

/// Records every frame handed to it. Cloning shares the record.
#[derive(Clone, Default)]
pub struct CaptureSink {
    frames: Arc<Mutex<Vec<SignalFrame>>>,
}

impl CaptureSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn frames(&self) -> Vec<SignalFrame> {
        self.frames.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.frames.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FrameSink for CaptureSink {
    fn send_frame(&mut self, frame: &SignalFrame) -> io::Result<()> {
        self.frames.lock().unwrap().push(frame.clone());
        Ok(())
    }
}

/// Forwards frames over a crossbeam channel.
pub struct ChannelSink(pub crossbeam_channel::Sender<SignalFrame>);

impl FrameSink for ChannelSink {
    fn send_frame(&mut self, frame: &SignalFrame) -> io::Result<()> {
        self.0
            .send(frame.clone())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "receiver gone"))
    }
}
