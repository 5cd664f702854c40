//! Shadow memory: a type plane with one byte per application byte and a
//! value plane with two bytes per application byte.
//!
//! A value stored at application offset `o` keeps its shadow at value-plane
//! offset `2 * o`. Because the mapping is linear, copying a range of both
//! planes copies exactly the shadows whose bytes lie inside the range.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::extended::{AppFloat, FloatKind, ShadowScalar, F128};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TypeKind {
    Unknown,
    F32,
    F64,
}

/// Per-byte shadow type: which float kind occupies the byte and the byte's
/// position inside that value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShadowTypeByte {
    pub kind: TypeKind,
    pub pos: u8,
}

impl ShadowTypeByte {
    pub const UNKNOWN: ShadowTypeByte = ShadowTypeByte { kind: TypeKind::Unknown, pos: 0 };

    pub fn encode(self) -> u8 {
        match self.kind {
            TypeKind::Unknown => 0,
            TypeKind::F32 => 0x10 | self.pos,
            TypeKind::F64 => 0x20 | self.pos,
        }
    }

    pub fn decode(b: u8) -> ShadowTypeByte {
        let pos = b & 0x0f;
        match b >> 4 {
            1 => ShadowTypeByte { kind: TypeKind::F32, pos },
            2 => ShadowTypeByte { kind: TypeKind::F64, pos },
            _ => ShadowTypeByte::UNKNOWN,
        }
    }

    /// Two-character rendering: `f0`..`f3`, `d0`..`d7`, `__`.
    pub fn render(self) -> String {
        match self.kind {
            TypeKind::Unknown => "__".into(),
            TypeKind::F32 => format!("f{}", self.pos),
            TypeKind::F64 => format!("d{}", self.pos),
        }
    }
}

fn type_kind(kind: FloatKind) -> TypeKind {
    match kind {
        FloatKind::F32 => TypeKind::F32,
        FloatKind::F64 => TypeKind::F64,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// The stored shadow was valid.
    Shadow,
    /// The shadow was rebuilt by extending the application value.
    Extended,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("shadow access to unallocated memory [0x{addr:x}, +{len})")]
pub struct Unallocated {
    pub addr: u64,
    pub len: u64,
}

#[derive(Debug)]
struct Region {
    types: Vec<u8>,
    values: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct ShadowMemory {
    regions: BTreeMap<u64, Region>,
}

impl ShadowMemory {
    pub fn new() -> ShadowMemory {
        ShadowMemory::default()
    }

    pub fn allocate(&mut self, base: u64, size: u64) {
        self.regions.insert(
            base,
            Region { types: vec![0; size as usize], values: vec![0; 2 * size as usize] },
        );
    }

    pub fn free(&mut self, base: u64) -> bool {
        self.regions.remove(&base).is_some()
    }

    /// Bytes held by both shadow planes.
    pub fn shadow_bytes(&self) -> u64 {
        self.regions.values().map(|r| (r.types.len() + r.values.len()) as u64).sum()
    }

    fn locate(&self, addr: u64, len: u64) -> Result<(u64, usize), Unallocated> {
        let err = Unallocated { addr, len };
        let (&base, r) = self.regions.range(..=addr).next_back().ok_or(err.clone())?;
        let off = addr - base;
        if off.checked_add(len).is_none_or(|end| end > r.types.len() as u64) {
            return Err(err);
        }
        Ok((base, off as usize))
    }

    fn region(&self, addr: u64, len: u64) -> Result<(&Region, usize), Unallocated> {
        let (base, off) = self.locate(addr, len)?;
        Ok((&self.regions[&base], off))
    }

    fn region_mut(&mut self, addr: u64, len: u64) -> Result<(&mut Region, usize), Unallocated> {
        let (base, off) = self.locate(addr, len)?;
        Ok((self.regions.get_mut(&base).unwrap(), off))
    }

    pub fn type_at(&self, addr: u64) -> Result<ShadowTypeByte, Unallocated> {
        let (r, off) = self.region(addr, 1)?;
        Ok(ShadowTypeByte::decode(r.types[off]))
    }

    pub fn store(&mut self, addr: u64, shadow: ShadowScalar) -> Result<(), Unallocated> {
        let kind = shadow.app_kind();
        let size = kind.size();
        let (r, off) = self.region_mut(addr, size)?;
        for i in 0..size as usize {
            r.types[off + i] = ShadowTypeByte { kind: type_kind(kind), pos: i as u8 }.encode();
        }
        let v = 2 * off;
        match shadow {
            ShadowScalar::F64(x) => r.values[v..v + 8].copy_from_slice(&x.to_bits().to_le_bytes()),
            ShadowScalar::Ext(x) => r.values[v..v + 16].copy_from_slice(&x.to_bits().to_le_bytes()),
        }
        Ok(())
    }

    /// True iff the type plane holds a complete position sequence for `kind` at `addr`.
    pub fn is_valid(&self, addr: u64, kind: FloatKind) -> Result<bool, Unallocated> {
        let size = kind.size();
        let (r, off) = self.region(addr, size)?;
        Ok((0..size as usize).all(|i| {
            r.types[off + i] == ShadowTypeByte { kind: type_kind(kind), pos: i as u8 }.encode()
        }))
    }

    pub fn load(&self, addr: u64, app: AppFloat) -> Result<(ShadowScalar, Provenance), Unallocated> {
        let kind = app.kind();
        if !self.is_valid(addr, kind)? {
            return Ok((ShadowScalar::extend(app), Provenance::Extended));
        }
        let (r, off) = self.region(addr, kind.size())?;
        let v = 2 * off;
        let s = match kind {
            FloatKind::F32 => ShadowScalar::F64(f64::from_bits(u64::from_le_bytes(r.values[v..v + 8].try_into().unwrap()))),
            FloatKind::F64 => {
                ShadowScalar::Ext(F128::from_bits(u128::from_le_bytes(r.values[v..v + 16].try_into().unwrap())))
            }
        };
        Ok((s, Provenance::Shadow))
    }

    pub fn set_unknown(&mut self, addr: u64, len: u64) -> Result<(), Unallocated> {
        if len == 0 {
            return Ok(());
        }
        let (r, off) = self.region_mut(addr, len)?;
        r.types[off..off + len as usize].fill(0);
        Ok(())
    }

    /// Copies both planes, as if through an intermediate buffer.
    pub fn copy(&mut self, dst: u64, src: u64, len: u64) -> Result<(), Unallocated> {
        if len == 0 {
            return Ok(());
        }
        let (types, values) = {
            let (r, off) = self.region(src, len)?;
            let n = len as usize;
            (r.types[off..off + n].to_vec(), r.values[2 * off..2 * (off + n)].to_vec())
        };
        let (r, off) = self.region_mut(dst, len)?;
        r.types[off..off + types.len()].copy_from_slice(&types);
        r.values[2 * off..2 * off + values.len()].copy_from_slice(&values);
        Ok(())
    }

    /// One line per 8 bytes: address, then each byte's shadow type.
    pub fn dump(&self, addr: u64, len: u64) -> Result<String, Unallocated> {
        let (r, off) = self.region(addr, len)?;
        let mut out = String::new();
        for (row, chunk) in r.types[off..off + len as usize].chunks(8).enumerate() {
            let cells: Vec<String> = chunk.iter().map(|&b| ShadowTypeByte::decode(b).render()).collect();
            let _ = writeln!(out, "0x{:08x}:    {}", addr + 8 * row as u64, cells.join(" "));
        }
        Ok(out)
    }
}
