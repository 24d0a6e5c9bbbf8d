use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crate::wire::{Frame, WireEnvelope, WireError};

pub trait Handler: Send + Sync + 'static {
    fn handle(&self, req: Frame) -> Frame;
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections and waits for the accept loop to exit.
    pub fn shutdown(mut self) {
        self.stop_now();
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        if let Some(t) = self.accept.take() {
            let _ = t.join();
        }
    }

    fn stop_now(&mut self) {
        if let Some(t) = self.accept.take() {
            self.stop.store(true, Ordering::SeqCst);
            // wake the blocking accept
            let _ = TcpStream::connect(self.addr);
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

pub fn spawn(listener: TcpListener, handler: Arc<dyn Handler>) -> io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let accept = thread::Builder::new().name(format!("accept-{addr}")).spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let h = handler.clone();
            let _ = thread::Builder::new().spawn(move || serve_connection(stream, h.as_ref()));
        }
    })?;
    Ok(ServerHandle {
        addr,
        stop,
        accept: Some(accept),
    })
}

fn serve_connection(mut stream: TcpStream, handler: &dyn Handler) {
    let _ = stream.set_nodelay(true);
    loop {
        let env = match WireEnvelope::read_from(&mut stream) {
            Ok(Some(env)) => env,
            Ok(None) | Err(WireError::Io(_)) => return,
            Err(e) => {
                // framing is lost; answer and hang up
                let _ = Frame::fault(e.to_string()).to_envelope().write_to(&mut stream);
                return;
            }
        };
        let reply = match Frame::from_envelope(&env) {
            Ok(req) => handler.handle(req),
            Err(e) => Frame::fault(e.to_string()),
        };
        if reply.to_envelope().write_to(&mut stream).is_err() {
            return;
        }
    }
}
