//! Simulated ROS-style master and topic bus: node registration, typed
//! publish/subscribe over named topics, and the monitoring subscriber that
//! captures and parses traffic for the data-sharing pipeline.
//!
//! Delivery is in-process and queue-based with unbounded buffering; there
//! is no socket transport at this layer. Per-topic delivery is serialized
//! so each subscriber observes every publisher's messages in publish order.

mod odometry;

pub use odometry::{parse_odometry, OdometryMsg, Stamp, ODOM_MAGIC, ODOM_WIRE_LEN};

use std::collections::HashMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("invalid topic name: {0}")]
    InvalidTopic(String),
    #[error("node id already registered: {0}")]
    DuplicateNode(String),
    #[error("handle lacks the {0} role on this topic")]
    WrongRole(&'static str),
    #[error("message parse error: {0}")]
    Parse(&'static str),
    #[error("invalid message: {0}")]
    InvalidMessage(&'static str),
    #[error("replay line {0} is malformed")]
    Replay(usize),
}

/// A slash-delimited topic name such as `/robot/odom`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TopicName(String);

impl TopicName {
    pub fn new(name: &str) -> Result<Self, BusError> {
        if name.len() < 2 || !name.starts_with('/') || name.contains(char::is_whitespace) {
            return Err(BusError::InvalidTopic(name.to_string()));
        }
        Ok(TopicName(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for TopicName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Role a node holds on its registered topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Publisher,
    Subscriber,
}

/// Message type tag carried on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Odometry,
    CompressedImage,
    Generic,
}

impl MessageKind {
    pub fn code(&self) -> u8 {
        match self {
            MessageKind::Odometry => 0x01,
            MessageKind::CompressedImage => 0x02,
            MessageKind::Generic => 0x03,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0x01 => Some(MessageKind::Odometry),
            0x02 => Some(MessageKind::CompressedImage),
            0x03 => Some(MessageKind::Generic),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MessageKind::Odometry => "odometry",
            MessageKind::CompressedImage => "image",
            MessageKind::Generic => "generic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "odometry" | "odom" => Some(MessageKind::Odometry),
            "image" | "compressed_image" => Some(MessageKind::CompressedImage),
            "generic" | "raw" => Some(MessageKind::Generic),
            _ => None,
        }
    }
}

/// An opaque compressed image payload with a short format tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageMsg {
    pub payload: Vec<u8>,
    pub format_tag: String,
}

impl ImageMsg {
    pub fn new(payload: Vec<u8>, format_tag: &str) -> Result<Self, BusError> {
        if payload.is_empty() {
            return Err(BusError::InvalidMessage("empty image payload"));
        }
        Ok(ImageMsg {
            payload,
            format_tag: format_tag.to_string(),
        })
    }

    /// Wire form: tag length (1 byte) || tag || payload.
    pub fn encode(&self) -> Vec<u8> {
        let tag = self.format_tag.as_bytes();
        let tag_len = tag.len().min(255);
        let mut out = Vec::with_capacity(1 + tag_len + self.payload.len());
        out.push(tag_len as u8);
        out.extend_from_slice(&tag[..tag_len]);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn parse(raw: &[u8]) -> Result<Self, BusError> {
        if raw.is_empty() {
            return Err(BusError::Parse("empty image frame"));
        }
        let tag_len = raw[0] as usize;
        if raw.len() < 1 + tag_len + 1 {
            return Err(BusError::Parse("image frame truncated"));
        }
        let format_tag = String::from_utf8(raw[1..1 + tag_len].to_vec())
            .map_err(|_| BusError::Parse("image tag is not utf-8"))?;
        Ok(ImageMsg {
            payload: raw[1 + tag_len..].to_vec(),
            format_tag,
        })
    }
}

/// A typed message as carried by the bus.
#[derive(Debug, Clone, PartialEq)]
pub struct BusMessage {
    pub kind: MessageKind,
    pub payload: Vec<u8>,
}

impl BusMessage {
    pub fn odometry(msg: &OdometryMsg) -> Result<Self, BusError> {
        Ok(BusMessage {
            kind: MessageKind::Odometry,
            payload: msg.encode()?,
        })
    }

    pub fn image(msg: &ImageMsg) -> Self {
        BusMessage {
            kind: MessageKind::CompressedImage,
            payload: msg.encode(),
        }
    }

    pub fn generic(payload: Vec<u8>) -> Self {
        BusMessage {
            kind: MessageKind::Generic,
            payload,
        }
    }
}

/// A message parsed into its typed form by the monitor.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedMessage {
    Odometry(OdometryMsg),
    Image(ImageMsg),
    Generic(Vec<u8>),
}

/// One monitor capture: parse outcome plus the capture time in UTC ms.
#[derive(Debug, Clone)]
pub struct CaptureEvent {
    pub captured_at_ms: u64,
    pub parsed: Result<ParsedMessage, BusError>,
    pub raw: BusMessage,
}

struct SubscriberSlot {
    node_id: String,
    sender: Sender<BusMessage>,
}

#[derive(Default)]
struct TopicState {
    publishers: Vec<String>,
    subscribers: Vec<SubscriberSlot>,
}

#[derive(Default)]
struct MasterState {
    nodes: HashMap<String, (TopicName, Role)>,
    topics: HashMap<TopicName, TopicState>,
    monitor_seq: u64,
}

/// The ROS-style master: matches publishers to subscribers per topic.
#[derive(Clone, Default)]
pub struct RosMaster {
    state: Arc<Mutex<MasterState>>,
}

impl RosMaster {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a node for one topic with one role.
    pub fn register(
        &self,
        node_id: &str,
        topic: &TopicName,
        role: Role,
    ) -> Result<NodeHandle, BusError> {
        let mut state = self.state.lock().unwrap();
        if state.nodes.contains_key(node_id) {
            return Err(BusError::DuplicateNode(node_id.to_string()));
        }
        state
            .nodes
            .insert(node_id.to_string(), (topic.clone(), role));
        let entry = state.topics.entry(topic.clone()).or_default();
        let receiver = match role {
            Role::Publisher => {
                entry.publishers.push(node_id.to_string());
                None
            }
            Role::Subscriber => {
                let (tx, rx) = channel();
                entry.subscribers.push(SubscriberSlot {
                    node_id: node_id.to_string(),
                    sender: tx,
                });
                Some(rx)
            }
        };
        Ok(NodeHandle {
            master: self.clone(),
            node_id: node_id.to_string(),
            topic: topic.clone(),
            role,
            receiver,
        })
    }

    /// Launch the monitoring subscriber for a topic. Every message published
    /// after this call is captured and parsed as `kind`; parse failures
    /// surface as per-message error events and the stream continues.
    pub fn monitor(&self, topic: &TopicName, kind: MessageKind) -> Result<MonitorStream, BusError> {
        let node_id = {
            let mut state = self.state.lock().unwrap();
            state.monitor_seq += 1;
            format!("authros-monitor-{}", state.monitor_seq)
        };
        let handle = self.register(&node_id, topic, Role::Subscriber)?;
        Ok(MonitorStream { handle, kind })
    }

    fn deliver(&self, node_id: &str, topic: &TopicName, msg: &BusMessage) -> Result<usize, BusError> {
        let mut state = self.state.lock().unwrap();
        match state.nodes.get(node_id) {
            Some((t, Role::Publisher)) if t == topic => {}
            _ => return Err(BusError::WrongRole("publisher")),
        }
        let Some(entry) = state.topics.get_mut(topic) else {
            return Ok(0);
        };
        // Drop subscribers whose receiving end is gone.
        entry.subscribers.retain(|s| s.sender.send(msg.clone()).is_ok());
        Ok(entry.subscribers.len())
    }

    fn unregister(&self, node_id: &str) {
        let mut state = self.state.lock().unwrap();
        if let Some((topic, role)) = state.nodes.remove(node_id) {
            if let Some(entry) = state.topics.get_mut(&topic) {
                match role {
                    Role::Publisher => entry.publishers.retain(|p| p != node_id),
                    Role::Subscriber => entry.subscribers.retain(|s| s.node_id != node_id),
                }
            }
        }
    }
}

/// A registered node; publishers send, subscribers receive.
pub struct NodeHandle {
    master: RosMaster,
    node_id: String,
    topic: TopicName,
    role: Role,
    receiver: Option<Receiver<BusMessage>>,
}

impl NodeHandle {
    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn topic(&self) -> &TopicName {
        &self.topic
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Publish a message; returns the number of subscribers it reached.
    pub fn publish(&self, msg: &BusMessage) -> Result<usize, BusError> {
        self.master.deliver(&self.node_id, &self.topic, msg)
    }

    /// Receive the next message (subscriber role only). Returns `None` once
    /// the topic is gone and the queue is drained.
    pub fn recv(&self) -> Result<Option<BusMessage>, BusError> {
        match &self.receiver {
            Some(rx) => Ok(rx.recv().ok()),
            None => Err(BusError::WrongRole("subscriber")),
        }
    }

    pub fn try_recv(&self) -> Result<Option<BusMessage>, BusError> {
        match &self.receiver {
            Some(rx) => Ok(rx.try_recv().ok()),
            None => Err(BusError::WrongRole("subscriber")),
        }
    }
}

impl Drop for NodeHandle {
    fn drop(&mut self) {
        self.master.unregister(&self.node_id);
    }
}

/// The monitoring node's capture stream.
pub struct MonitorStream {
    handle: NodeHandle,
    kind: MessageKind,
}

impl MonitorStream {
    /// Block for the next capture; `None` when the bus is gone.
    pub fn next(&self) -> Option<CaptureEvent> {
        let msg = self.handle.recv().ok().flatten()?;
        Some(self.capture(msg))
    }

    /// Non-blocking variant of [`next`](Self::next).
    pub fn try_next(&self) -> Option<CaptureEvent> {
        let msg = self.handle.try_recv().ok().flatten()?;
        Some(self.capture(msg))
    }

    fn capture(&self, msg: BusMessage) -> CaptureEvent {
        let parsed = parse_as(self.kind, &msg);
        CaptureEvent {
            captured_at_ms: now_utc_ms(),
            parsed,
            raw: msg,
        }
    }
}

fn parse_as(kind: MessageKind, msg: &BusMessage) -> Result<ParsedMessage, BusError> {
    match kind {
        MessageKind::Odometry => Ok(ParsedMessage::Odometry(parse_odometry(&msg.payload)?)),
        MessageKind::CompressedImage => Ok(ParsedMessage::Image(ImageMsg::parse(&msg.payload)?)),
        MessageKind::Generic => Ok(ParsedMessage::Generic(msg.payload.clone())),
    }
}

fn now_utc_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// One deterministic traffic-injection record: topic, type, payload.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRecord {
    pub topic: TopicName,
    pub kind: MessageKind,
    pub payload: Vec<u8>,
}

/// Parse a replay file: one `<topic> <type> <hex-payload>` triple per line,
/// blank lines and `#` comments skipped.
pub fn parse_replay(text: &str) -> Result<Vec<ReplayRecord>, BusError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (topic, kind, payload) = match (parts.next(), parts.next(), parts.next(), parts.next())
        {
            (Some(t), Some(k), Some(p), None) => (t, k, p),
            _ => return Err(BusError::Replay(idx + 1)),
        };
        out.push(ReplayRecord {
            topic: TopicName::new(topic).map_err(|_| BusError::Replay(idx + 1))?,
            kind: MessageKind::from_name(kind).ok_or(BusError::Replay(idx + 1))?,
            payload: hex::decode(payload).map_err(|_| BusError::Replay(idx + 1))?,
        });
    }
    Ok(out)
}

/// Render records in the replay file format.
pub fn format_replay(records: &[ReplayRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{} {} {}\n",
            r.topic,
            r.kind.name(),
            hex::encode(&r.payload)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topic(name: &str) -> TopicName {
        TopicName::new(name).unwrap()
    }

    #[test]
    fn topic_names_validated() {
        assert!(TopicName::new("/robot/odom").is_ok());
        assert!(TopicName::new("robot/odom").is_err());
        assert!(TopicName::new("/").is_err());
        assert!(TopicName::new("").is_err());
    }

    #[test]
    fn register_and_duplicate_id() {
        let master = RosMaster::new();
        let t = topic("/robot/odom");
        let _h = master.register("node1", &t, Role::Publisher).unwrap();
        assert!(matches!(
            master.register("node1", &t, Role::Subscriber),
            Err(BusError::DuplicateNode(_))
        ));
    }

    #[test]
    fn fan_out_counts() {
        let master = RosMaster::new();
        let t = topic("/robot/odom");
        let publisher = master.register("pub", &t, Role::Publisher).unwrap();
        let s1 = master.register("sub1", &t, Role::Subscriber).unwrap();
        let s2 = master.register("sub2", &t, Role::Subscriber).unwrap();
        let s3 = master.register("sub3", &t, Role::Subscriber).unwrap();

        let msg = BusMessage::generic(vec![1, 2, 3]);
        assert_eq!(publisher.publish(&msg).unwrap(), 3);
        for sub in [&s1, &s2, &s3] {
            assert_eq!(sub.recv().unwrap().unwrap(), msg);
        }
    }

    #[test]
    fn publish_without_subscribers_is_zero() {
        let master = RosMaster::new();
        let publisher = master
            .register("pub", &topic("/lonely"), Role::Publisher)
            .unwrap();
        assert_eq!(
            publisher.publish(&BusMessage::generic(vec![0])).unwrap(),
            0
        );
    }

    #[test]
    fn subscriber_cannot_publish() {
        let master = RosMaster::new();
        let sub = master
            .register("sub", &topic("/robot/odom"), Role::Subscriber)
            .unwrap();
        assert!(matches!(
            sub.publish(&BusMessage::generic(vec![0])),
            Err(BusError::WrongRole(_))
        ));
    }

    #[test]
    fn per_publisher_fifo_order() {
        let master = RosMaster::new();
        let t = topic("/robot/odom");
        let publisher = master.register("pub", &t, Role::Publisher).unwrap();
        let sub = master.register("sub", &t, Role::Subscriber).unwrap();
        for i in 0..20u8 {
            publisher.publish(&BusMessage::generic(vec![i])).unwrap();
        }
        for i in 0..20u8 {
            assert_eq!(sub.recv().unwrap().unwrap().payload, vec![i]);
        }
    }

    #[test]
    fn monitor_captures_and_parses() {
        let master = RosMaster::new();
        let t = topic("/robot/odom");
        let publisher = master.register("pub", &t, Role::Publisher).unwrap();
        let stream = master.monitor(&t, MessageKind::Odometry).unwrap();

        let msg = OdometryMsg::zero_motion(Stamp { sec: 5, nsec: 6 });
        publisher.publish(&BusMessage::odometry(&msg).unwrap()).unwrap();
        let event = stream.next().unwrap();
        assert_eq!(event.parsed.unwrap(), ParsedMessage::Odometry(msg));
    }

    #[test]
    fn monitor_parse_error_keeps_stream_alive() {
        let master = RosMaster::new();
        let t = topic("/robot/odom");
        let publisher = master.register("pub", &t, Role::Publisher).unwrap();
        let stream = master.monitor(&t, MessageKind::Odometry).unwrap();

        publisher.publish(&BusMessage::generic(vec![9, 9, 9])).unwrap();
        let good = OdometryMsg::zero_motion(Stamp { sec: 1, nsec: 2 });
        publisher.publish(&BusMessage::odometry(&good).unwrap()).unwrap();

        assert!(stream.next().unwrap().parsed.is_err());
        assert_eq!(
            stream.next().unwrap().parsed.unwrap(),
            ParsedMessage::Odometry(good)
        );
    }

    #[test]
    fn monitor_sees_only_later_messages() {
        let master = RosMaster::new();
        let t = topic("/robot/odom");
        let publisher = master.register("pub", &t, Role::Publisher).unwrap();
        for i in 0..5u8 {
            publisher.publish(&BusMessage::generic(vec![i])).unwrap();
        }
        let stream = master.monitor(&t, MessageKind::Generic).unwrap();
        publisher.publish(&BusMessage::generic(vec![42])).unwrap();
        assert_eq!(
            stream.next().unwrap().parsed.unwrap(),
            ParsedMessage::Generic(vec![42])
        );
        assert!(stream.try_next().is_none());
    }

    #[test]
    fn monitor_does_not_disturb_other_subscribers() {
        let master = RosMaster::new();
        let t = topic("/robot/odom");
        let publisher = master.register("pub", &t, Role::Publisher).unwrap();
        let sub = master.register("sub", &t, Role::Subscriber).unwrap();

        publisher.publish(&BusMessage::generic(vec![1])).unwrap();
        let _stream = master.monitor(&t, MessageKind::Generic).unwrap();
        publisher.publish(&BusMessage::generic(vec![2])).unwrap();

        assert_eq!(sub.recv().unwrap().unwrap().payload, vec![1]);
        assert_eq!(sub.recv().unwrap().unwrap().payload, vec![2]);
    }

    #[test]
    fn replay_round_trip() {
        let records = vec![
            ReplayRecord {
                topic: topic("/robot/odom"),
                kind: MessageKind::Odometry,
                payload: OdometryMsg::zero_motion(Stamp { sec: 0, nsec: 0 })
                    .encode()
                    .unwrap(),
            },
            ReplayRecord {
                topic: topic("/robot/CompressedImage"),
                kind: MessageKind::CompressedImage,
                payload: ImageMsg::new(vec![1, 2, 3], "jpeg").unwrap().encode(),
            },
        ];
        let text = format_replay(&records);
        assert_eq!(parse_replay(&text).unwrap(), records);
    }

    #[test]
    fn replay_rejects_malformed_lines() {
        assert!(matches!(parse_replay("only-two fields"), Err(BusError::Replay(1))));
        assert!(parse_replay("# comment\n\n/t generic 00ff\n").is_ok());
        assert!(matches!(
            parse_replay("/t generic nothex"),
            Err(BusError::Replay(1))
        ));
    }
}
