//! On-disk RIR bank: `rirs/<rir_id>.wav` plus `index.jsonl`.

use std::path::Path;

use schoolroom_core::ess::{Origin, Rir};
use schoolroom_core::room::{Point3, RirBank, Room};
use serde::{Deserialize, Serialize};

use crate::manifest::{file_safe, read_jsonl, write_jsonl};
use crate::wav::{read_wav, write_wav, Encoding, RangePolicy};
use crate::{Error, Result};

pub const INDEX_FILE: &str = "index.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankIndexEntry {
    pub rir_id: String,
    pub room_id: String,
    pub source_pos: Point3,
    pub receiver_pos: Point3,
    pub sample_rate: u32,
    pub origin: Origin,
    /// Relative to the bank directory.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<Room>,
}

/// Float32 keeps the taps bit-exact to single precision.
pub fn write_bank(dir: &Path, bank: &RirBank) -> Result<Vec<BankIndexEntry>> {
    let index: Vec<BankIndexEntry> = bank
        .rirs
        .iter()
        .map(|r| BankIndexEntry {
            rir_id: r.id.clone(),
            room_id: r.room_id.clone(),
            source_pos: r.source,
            receiver_pos: r.receiver,
            sample_rate: r.taps.sample_rate(),
            origin: r.origin,
            path: format!("rirs/{}.wav", file_safe(&r.id)),
            room: bank.room(&r.room_id).cloned(),
        })
        .collect();
    for (rir, entry) in bank.rirs.iter().zip(&index) {
        write_wav(&rir.taps, dir.join(&entry.path), Encoding::Float32, RangePolicy::Strict)?;
    }
    write_jsonl(&dir.join(INDEX_FILE), &index)?;
    Ok(index)
}

pub fn read_bank(dir: &Path) -> Result<RirBank> {
    let index: Vec<BankIndexEntry> = read_jsonl(&dir.join(INDEX_FILE))?;
    if index.is_empty() {
        return Err(Error::stage("rir-bank", format!("{} lists no RIRs", dir.display())));
    }
    let mut rooms: Vec<Room> = Vec::new();
    let mut rirs = Vec::with_capacity(index.len());
    for e in index {
        let taps = read_wav(dir.join(&e.path))?;
        if taps.sample_rate() != e.sample_rate {
            return Err(Error::stage(
                "rir-bank",
                format!(
                    "{}: index says {} Hz, file is {} Hz",
                    e.rir_id,
                    e.sample_rate,
                    taps.sample_rate()
                ),
            ));
        }
        if let Some(room) = e.room {
            if !rooms.iter().any(|r| r.id == room.id) {
                rooms.push(room);
            }
        }
        rirs.push(Rir {
            id: e.rir_id,
            taps,
            room_id: e.room_id,
            source: e.source_pos,
            receiver: e.receiver_pos,
            origin: e.origin,
        });
    }
    Ok(RirBank { rooms, rirs })
}
