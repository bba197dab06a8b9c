use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Wake,
    /// Start of an `L`-slot transmission.
    Transmit,
    Ack,
    Collision,
    Erasure,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Wake => "wake",
            EventKind::Transmit => "tx",
            EventKind::Ack => "ack",
            EventKind::Collision => "collision",
            EventKind::Erasure => "erasure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub slot: u64,
    pub kind: EventKind,
    pub node: usize,
}

/// Slot events of one episode in the order they happened.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub(crate) fn push(&mut self, slot: u64, kind: EventKind, node: usize) {
        self.events.push(Event { slot, kind, node });
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

/// One `slot kind node` line per event.
impl fmt::Display for EventLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "{} {} {}", e.slot, e.kind, e.node)?;
        }
        Ok(())
    }
}
