//! Per-step event logs written as JSON lines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::coingame::{CoinEvent, Colour};
use super::kitchen::{KitchenEvent, KitchenEventKind};
use super::Agent;
use crate::error::Result;

pub fn kitchen_tag(e: &KitchenEvent) -> &'static str {
    match e.kind {
        KitchenEventKind::OnionPicked => "onion_picked",
        KitchenEventKind::OnionReturned => "onion_returned",
        KitchenEventKind::OnionInPot => "onion_in_pot",
        KitchenEventKind::CookStart => "cook_start",
        KitchenEventKind::PlatePicked => "plate_picked",
        KitchenEventKind::PlateReturned => "plate_returned",
        KitchenEventKind::SoupPicked => "soup_picked",
        KitchenEventKind::SoupDelivered => "soup_delivered",
        KitchenEventKind::TaskSet => "task_set",
        KitchenEventKind::TaskToggled => "task_toggled",
    }
}

pub fn coin_tag(e: &CoinEvent) -> &'static str {
    match (e.agent, e.colour) {
        (Agent::Ego, Colour::Red) => "ego_red",
        (Agent::Ego, Colour::Blue) => "ego_blue",
        (Agent::Partner, Colour::Red) => "partner_red",
        (Agent::Partner, Colour::Blue) => "partner_blue",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub episode: u64,
    pub t: u32,
    pub tag: String,
}

/// Streams event records to a writer, one JSON object per line.
pub struct EventLog<W: Write> {
    out: W,
}

impl<W: Write> EventLog<W> {
    pub fn new(out: W) -> Self {
        EventLog { out }
    }

    pub fn record(&mut self, episode: u64, t: u32, tags: &[&str]) -> Result<()> {
        for tag in tags {
            let rec = EventRecord { episode, t, tag: tag.to_string() };
            serde_json::to_writer(&mut self.out, &rec)?;
            self.out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn read_events(input: impl BufRead) -> Result<Vec<EventRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut log = EventLog::new(Vec::new());
        log.record(3, 7, &["cook_start", "onion_in_pot"]).unwrap();
        log.record(4, 0, &[]).unwrap();
        let bytes = log.into_inner();
        let back = read_events(bytes.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], EventRecord { episode: 3, t: 7, tag: "cook_start".into() });
    }
}
