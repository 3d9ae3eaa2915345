//! Seeded pseudo-random picks and state fingerprints.

use core::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::kernel::ProcessId;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Counter-based pick source: `pick(pid, counter, len)` depends only on
/// the seed and its arguments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChoiceStream {
    pub seed: u64,
}

impl ChoiceStream {
    pub fn new(seed: u64) -> Self {
        ChoiceStream { seed }
    }

    /// Index into a candidate list of length `len` (> 0).
    pub fn pick(&self, pid: ProcessId, counter: u32, len: usize) -> usize {
        debug_assert!(len > 0);
        let lane = splitmix64(self.seed ^ splitmix64(u64::from(pid.get())));
        let x = splitmix64(lane.wrapping_add(u64::from(counter).wrapping_mul(0xd6e8_feb8_6659_fd93)));
        (x % len as u64) as usize
    }
}

/// Two-lane 64-bit mixer giving 128-bit fingerprints.
#[derive(Clone, Debug)]
pub struct Fingerprinter {
    a: u64,
    b: u64,
}

impl Default for Fingerprinter {
    fn default() -> Self {
        Fingerprinter { a: 0x243f_6a88_85a3_08d3, b: 0x1319_8a2e_0370_7344 }
    }
}

impl Fingerprinter {
    pub fn of<T: Hash + ?Sized>(value: &T) -> u128 {
        let mut h = Fingerprinter::default();
        value.hash(&mut h);
        h.finish128()
    }

    pub fn finish128(&self) -> u128 {
        (u128::from(splitmix64(self.a)) << 64) | u128::from(splitmix64(self.b ^ 0x5851_f42d_4c95_7f2d))
    }
}

impl Hasher for Fingerprinter {
    fn write(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            self.write_u64(u64::from_le_bytes(buf) ^ ((chunk.len() as u64) << 56));
        }
    }

    fn write_u64(&mut self, x: u64) {
        self.a = splitmix64(self.a ^ x);
        self.b = splitmix64(self.b.rotate_left(23) ^ x.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }

    fn write_u8(&mut self, x: u8) {
        self.write_u64(u64::from(x));
    }

    fn write_u16(&mut self, x: u16) {
        self.write_u64(u64::from(x));
    }

    fn write_u32(&mut self, x: u32) {
        self.write_u64(u64::from(x));
    }

    fn write_usize(&mut self, x: usize) {
        self.write_u64(x as u64);
    }

    fn finish(&self) -> u64 {
        (self.finish128() >> 64) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_are_deterministic_and_in_range() {
        let s = ChoiceStream::new(42);
        for c in 0..50 {
            let a = s.pick(ProcessId::new(3), c, 3);
            assert!(a < 3);
            assert_eq!(a, ChoiceStream::new(42).pick(ProcessId::new(3), c, 3));
        }
    }

    #[test]
    fn picks_vary_with_seed() {
        let hits = (0..64u64).filter(|&s| ChoiceStream::new(s).pick(ProcessId::new(1), 0, 2) == 0).count();
        assert!(hits > 10 && hits < 54, "{hits}");
    }

    #[test]
    fn fingerprints_separate_values() {
        assert_ne!(Fingerprinter::of(&(1u32, 2u32)), Fingerprinter::of(&(2u32, 1u32)));
        assert_eq!(Fingerprinter::of(&[1u8, 2, 3][..]), Fingerprinter::of(&[1u8, 2, 3][..]));
    }
}
