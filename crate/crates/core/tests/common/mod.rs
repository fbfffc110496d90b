#![allow(dead_code)]

use serde_json::{json, Value};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

pub type Handler = dyn Fn(usize, &Value) -> (u16, String) + Send + Sync;

/// A tiny HTTP/1.1 server that answers every POST through `handler`, which
/// receives the zero-based request number and the parsed JSON body.
pub struct MockServer {
    pub url: String,
    pub bodies: Arc<Mutex<Vec<Value>>>,
    pub headers: Arc<Mutex<Vec<HashMap<String, String>>>>,
    pub max_in_flight: Arc<AtomicUsize>,
    pub hits: Arc<AtomicUsize>,
}

impl MockServer {
    pub fn start(
        handler: impl Fn(usize, &Value) -> (u16, String) + Send + Sync + 'static,
    ) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let handler: Arc<Handler> = Arc::new(handler);
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let headers = Arc::new(Mutex::new(Vec::new()));
        let max_in_flight = Arc::new(AtomicUsize::new(0));
        let hits = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let server = MockServer {
            url,
            bodies: bodies.clone(),
            headers: headers.clone(),
            max_in_flight: max_in_flight.clone(),
            hits: hits.clone(),
        };
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let (handler, bodies, headers) = (handler.clone(), bodies.clone(), headers.clone());
                let (max_in_flight, hits, in_flight) =
                    (max_in_flight.clone(), hits.clone(), in_flight.clone());
                thread::spawn(move || {
                    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    max_in_flight.fetch_max(now, Ordering::SeqCst);
                    if let Some((head, body)) = read_request(&stream) {
                        let n = hits.fetch_add(1, Ordering::SeqCst);
                        bodies.lock().unwrap().push(body.clone());
                        headers.lock().unwrap().push(head);
                        let (status, text) = handler(n, &body);
                        in_flight.fetch_sub(1, Ordering::SeqCst);
                        let _ = write_response(stream, status, &text);
                    } else {
                        in_flight.fetch_sub(1, Ordering::SeqCst);
                    }
                });
            }
        });
        server
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn read_request(stream: &TcpStream) -> Option<(HashMap<String, String>, Value)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut head = HashMap::new();
    loop {
        line.clear();
        reader.read_line(&mut line).ok()?;
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            head.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let len: usize = head
        .get("content-length")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    Some((head, serde_json::from_slice(&body).unwrap_or(Value::Null)))
}

fn write_response(mut stream: TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

pub fn completion_body(content: &str, finish_reason: &str) -> String {
    json!({
        "id": "cmpl-1",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": finish_reason}],
    })
    .to_string()
}

/// The user message of a chat request.
pub fn prompt_of(body: &Value) -> String {
    body["messages"][0]["content"]
        .as_str()
        .unwrap_or_default()
        .to_string()
}

/// Option lines `X) text` of a prompt, in order.
pub fn prompt_options(prompt: &str) -> Vec<(char, String)> {
    prompt
        .lines()
        .filter_map(|l| {
            let mut cs = l.chars();
            let c = cs.next()?;
            (c.is_ascii_uppercase() && l[1..].starts_with(") ")).then(|| (c, l[3..].to_string()))
        })
        .collect()
}

fn letter_for(prompt: &str, text: &str) -> Result<char, String> {
    let hits: Vec<char> = prompt_options(prompt)
        .into_iter()
        .filter(|(_, t)| t == text)
        .map(|(c, _)| c)
        .collect();
    match hits.as_slice() {
        [c] => Ok(*c),
        _ => Err(format!("{} options read {text:?}", hits.len())),
    }
}

fn table_cells(line: &str) -> Vec<String> {
    let inner = line.trim().trim_start_matches('|').trim_end_matches('|');
    let mut cells = vec![String::new()];
    let mut chars = inner.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' if chars.peek() == Some(&'|') => {
                cells.last_mut().unwrap().push(chars.next().unwrap())
            }
            '|' => cells.push(String::new()),
            _ => cells.last_mut().unwrap().push(c),
        }
    }
    cells.into_iter().map(|c| c.trim().to_string()).collect()
}

/// Solves an Astro prompt from its text alone: reads the table, the initial
/// assignment and the swap lines, replays the swaps one at a time and looks
/// the query value up in the table.
pub fn solve_astro_prompt(prompt: &str) -> Result<char, String> {
    let lines: Vec<&str> = prompt.lines().collect();
    let table: Vec<Vec<String>> = lines
        .iter()
        .take_while(|l| l.starts_with('|'))
        .map(|l| table_cells(l))
        .collect();
    if table.len() < 3 {
        return Err("no table".into());
    }
    let header = &table[0];
    let rows = &table[2..];

    let consider = lines
        .iter()
        .position(|l| l.starts_with("Consider the following ") && l.ends_with(':'))
        .ok_or("no assignment")?;
    let target = lines[consider]
        .trim_start_matches("Consider the following ")
        .trim_end_matches(':');
    let (names, values) = lines[consider + 1]
        .split_once(" = ")
        .ok_or("bad assignment line")?;
    let names: Vec<&str> = names.split(", ").collect();
    let values: Vec<&str> = values.split(", ").collect();
    if names.len() != values.len() {
        return Err("assignment arity".into());
    }
    let mut state: HashMap<String, String> = names
        .iter()
        .zip(&values)
        .map(|(n, v)| (n.to_string(), v.to_string()))
        .collect();

    for l in lines
        .iter()
        .filter(|l| l.starts_with("- ") && l.contains(" = "))
    {
        let (lhs, rhs) = l[2..].split_once(" = ").unwrap();
        let lhs: Vec<&str> = lhs.split(", ").collect();
        let rhs: Vec<&str> = rhs.split(", ").collect();
        let read: Vec<String> = rhs
            .iter()
            .map(|r| state.get(*r).cloned().ok_or(format!("unknown {r}")))
            .collect::<Result<_, _>>()?;
        for (name, value) in lhs.iter().zip(read) {
            if !state.contains_key(*name) {
                return Err(format!("unknown {name}"));
            }
            state.insert(name.to_string(), value);
        }
    }

    let q = lines
        .iter()
        .find(|l| l.starts_with("The ") && l.ends_with(" is"))
        .ok_or("no question")?;
    let (retrieve, rest) = q["The ".len()..]
        .split_once(" with the ")
        .ok_or("bad question")?;
    let rest = rest
        .strip_prefix(target)
        .ok_or("question names another column")?;
    let var = rest.trim_start_matches(" = ").trim_end_matches(" is");
    let value = state.get(var).ok_or("unknown query variable")?;

    let ti = header
        .iter()
        .position(|h| h == target)
        .ok_or("target column missing")?;
    let ri = header
        .iter()
        .position(|h| h == retrieve)
        .ok_or("retrieve column missing")?;
    let matches: Vec<&Vec<String>> = rows.iter().filter(|r| &r[ti] == value).collect();
    if matches.len() != 1 {
        return Err(format!("{} rows hold {value}", matches.len()));
    }
    letter_for(prompt, &matches[0][ri])
}

/// Solves a Collision prompt from its text: velocities travel with the
/// collisions as a pair exchange.
pub fn solve_collision_prompt(prompt: &str) -> Result<char, String> {
    let lines: Vec<&str> = prompt.lines().collect();
    let start = lines
        .iter()
        .position(|l| *l == "Initial velocities:")
        .ok_or("no velocities")?;
    let mut v: HashMap<String, i64> = HashMap::new();
    for l in &lines[start + 1..] {
        let Some((name, val)) = l.split_once(" = ") else {
            break;
        };
        v.insert(name.to_string(), val.parse().map_err(|_| "bad velocity")?);
    }
    for l in &lines {
        if let Some((num, rest)) = l.split_once(". ") {
            if num.chars().all(|c| c.is_ascii_digit()) && !num.is_empty() {
                let (x, y) = rest.split_once(" collides with ").ok_or("bad collision")?;
                let (vx, vy) = (v[x], v[y]);
                v.insert(x.to_string(), vy);
                v.insert(y.to_string(), vx);
            }
        }
    }
    let q = lines
        .iter()
        .find(|l| l.starts_with("- What is the velocity of "))
        .ok_or("no question")?;
    let who = q
        .trim_start_matches("- What is the velocity of ")
        .trim_end_matches('?');
    letter_for(prompt, &v.get(who).ok_or("unknown particle")?.to_string())
}
