//! Process-wide memory cap for large dense allocations.
//!
//! The cap defaults to 4 GiB. `LVSK_MEM_CAP` (bytes, with an optional
//! `K`/`M`/`G` binary suffix) overrides it, and [`set_mem_cap`] overrides
//! both when called before the first allocation check.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const DEFAULT_MEM_CAP: u64 = 4 << 30;
pub const MEM_CAP_ENV: &str = "LVSK_MEM_CAP";

static MEM_CAP: OnceLock<u64> = OnceLock::new();

/// Pins the cap for the rest of the process. Returns false if it was already fixed.
pub fn set_mem_cap(bytes: u64) -> bool {
    MEM_CAP.set(bytes).is_ok()
}

pub fn mem_cap() -> u64 {
    *MEM_CAP.get_or_init(|| {
        std::env::var(MEM_CAP_ENV)
            .ok()
            .and_then(|v| parse_bytes(&v))
            .unwrap_or(DEFAULT_MEM_CAP)
    })
}

pub fn parse_bytes(text: &str) -> Option<u64> {
    let text = text.trim();
    let (digits, shift) = match text.chars().last()? {
        'k' | 'K' => (&text[..text.len() - 1], 10),
        'm' | 'M' => (&text[..text.len() - 1], 20),
        'g' | 'G' => (&text[..text.len() - 1], 30),
        _ => (text, 0),
    };
    digits.trim().parse::<u64>().ok()?.checked_mul(1 << shift)
}

/// Checks `count` elements of `elem_bytes` each against `cap`.
pub fn check_against(what: &'static str, count: u128, elem_bytes: u128, cap: u64) -> Result<()> {
    let requested = count.saturating_mul(elem_bytes);
    if requested > cap as u128 {
        return Err(Error::Capacity {
            what,
            requested,
            cap,
        });
    }
    Ok(())
}

pub(crate) fn check_f64s(what: &'static str, count: u128) -> Result<()> {
    check_against(what, count, 8, mem_cap())
}
