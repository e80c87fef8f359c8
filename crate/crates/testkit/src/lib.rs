//! Test support: a tiny threaded HTTP/1.1 server that serves a fixed route
//! table and records every request target it sees.

pub mod oracle;
pub mod site;

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct Route {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Route {
    pub fn html(body: impl Into<String>) -> Self {
        Self { status: 200, headers: vec![("Content-Type".into(), "text/html; charset=utf-8".into())], body: body.into() }
    }

    pub fn text(body: impl Into<String>) -> Self {
        Self { status: 200, headers: vec![("Content-Type".into(), "text/plain".into())], body: body.into() }
    }

    pub fn json(body: impl Into<String>) -> Self {
        Self { status: 200, headers: vec![("Content-Type".into(), "application/json".into())], body: body.into() }
    }

    pub fn redirect(location: impl Into<String>) -> Self {
        Self { status: 302, headers: vec![("Location".into(), location.into())], body: String::new() }
    }

    pub fn status(status: u16) -> Self {
        Self { status, headers: vec![], body: String::new() }
    }
}

/// A request as seen by the server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedRequest {
    pub method: String,
    pub target: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl LoggedRequest {
    pub fn path(&self) -> &str {
        self.target.split('?').next().unwrap_or("")
    }

    /// First header value with this name, case-insensitively.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

type Handler = dyn Fn(&LoggedRequest) -> Option<Route> + Send + Sync;

pub struct FixtureServer {
    addr: SocketAddr,
    log: Arc<Mutex<Vec<LoggedRequest>>>,
    routes: Arc<Mutex<HashMap<String, Route>>>,
    stop: Arc<AtomicBool>,
}

impl FixtureServer {
    /// Serves `routes` keyed by path (query strings are ignored for lookup).
    pub fn start(routes: impl IntoIterator<Item = (impl Into<String>, Route)>) -> Self {
        Self::start_with(routes, None)
    }

    /// Like [`start`](Self::start), with a fallback handler consulted when
    /// no static route matches.
    pub fn start_with(
        routes: impl IntoIterator<Item = (impl Into<String>, Route)>,
        handler: Option<Box<Handler>>,
    ) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind fixture server");
        listener.set_nonblocking(true).expect("nonblocking listener");
        let addr = listener.local_addr().expect("local addr");
        let routes: Arc<Mutex<HashMap<String, Route>>> =
            Arc::new(Mutex::new(routes.into_iter().map(|(p, r)| (p.into(), r)).collect()));
        let log = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Option<Box<Handler>>> = Arc::new(handler);

        let (routes_t, log_t, stop_t) = (routes.clone(), log.clone(), stop.clone());
        thread::spawn(move || {
            while !stop_t.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let (routes, log, handler) = (routes_t.clone(), log_t.clone(), handler.clone());
                        thread::spawn(move || {
                            let _ = serve(stream, &routes, &log, handler.as_ref().as_deref());
                        });
                    }
                    Err(_) => thread::sleep(Duration::from_millis(2)),
                }
            }
        });
        Self { addr, log, routes, stop }
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://127.0.0.1:<port>` followed by `path`.
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.log.lock().unwrap().clone()
    }

    /// Request targets in arrival order.
    pub fn targets(&self) -> Vec<String> {
        self.requests().into_iter().map(|r| r.target).collect()
    }

    pub fn clear_log(&self) {
        self.log.lock().unwrap().clear();
    }

    pub fn set_route(&self, path: impl Into<String>, route: Route) {
        self.routes.lock().unwrap().insert(path.into(), route);
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        301 => "Moved Permanently",
        302 => "Found",
        404 => "Not Found",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    }
}

fn serve(
    stream: TcpStream,
    routes: &Mutex<HashMap<String, Route>>,
    log: &Mutex<Vec<LoggedRequest>>,
    handler: Option<&Handler>,
) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_owned();
    let target = parts.next().unwrap_or("/").to_owned();

    let mut content_length = 0usize;
    let mut headers = Vec::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
            headers.push((name.trim().to_owned(), value.trim().to_owned()));
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let request = LoggedRequest { method, target, headers, body: String::from_utf8_lossy(&body).into_owned() };
    log.lock().unwrap().push(request.clone());

    let route = routes
        .lock()
        .unwrap()
        .get(request.path())
        .cloned()
        .or_else(|| handler.and_then(|h| h(&request)))
        .unwrap_or_else(|| Route::status(404));

    let mut out = stream;
    let mut head = format!("HTTP/1.1 {} {}\r\nContent-Length: {}\r\nConnection: close\r\n", route.status, reason(route.status), route.body.len());
    for (name, value) in &route.headers {
        head.push_str(&format!("{name}: {value}\r\n"));
    }
    head.push_str("\r\n");
    out.write_all(head.as_bytes())?;
    out.write_all(route.body.as_bytes())?;
    out.flush()
}
