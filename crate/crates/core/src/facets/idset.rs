//! Container-partitioned compressed sets of `u32` ids.
//!
//! Ids are split by their high 16 bits into chunks; each chunk stores its
//! low 16 bits as a sorted array, a 65536-bit bitmap, or a list of runs,
//! whichever serializes smallest. The byte layout is the portable format
//! used by other roaring bitmap implementations.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

const ARRAY_MAX: usize = 4096;
const BITMAP_WORDS: usize = 1024;
const BITMAP_BYTES: usize = BITMAP_WORDS * 8;
const COOKIE_NO_RUN: u32 = 12346;
const COOKIE_RUN: u32 = 12347;
const NO_OFFSET_THRESHOLD: usize = 4;

type Bits = Box<[u64; BITMAP_WORDS]>;

#[derive(Clone, PartialEq, Eq)]
enum Container {
    Array(Vec<u16>),
    Bitmap(Bits, u32),
    /// (start, length − 1), sorted and non-adjacent.
    Run(Vec<(u16, u16)>),
}

fn empty_bits() -> Bits {
    Box::new([0u64; BITMAP_WORDS])
}

fn set_range(bits: &mut [u64; BITMAP_WORDS], start: u32, end_incl: u32) {
    let (sw, ew) = ((start / 64) as usize, (end_incl / 64) as usize);
    let lo = !0u64 << (start % 64);
    let hi = !0u64 >> (63 - end_incl % 64);
    if sw == ew {
        bits[sw] |= lo & hi;
    } else {
        bits[sw] |= lo;
        for w in &mut bits[sw + 1..ew] {
            *w = !0;
        }
        bits[ew] |= hi;
    }
}

fn bits_to_runs(bits: &[u64; BITMAP_WORDS], capacity: usize) -> Vec<(u16, u16)> {
    let mut out = Vec::with_capacity(capacity);
    let mut i = 0usize;
    'scan: while i < 65536 {
        let mut wi = i / 64;
        let mut w = bits[wi] & (!0u64 << (i % 64));
        while w == 0 {
            wi += 1;
            if wi == BITMAP_WORDS {
                break 'scan;
            }
            w = bits[wi];
        }
        let start = wi * 64 + w.trailing_zeros() as usize;
        let mut wi = start / 64;
        let mut w = !bits[wi] & (!0u64 << (start % 64));
        let end = loop {
            if w != 0 {
                break wi * 64 + w.trailing_zeros() as usize;
            }
            wi += 1;
            if wi == BITMAP_WORDS {
                break 65536;
            }
            w = !bits[wi];
        };
        out.push((start as u16, (end - 1 - start) as u16));
        i = end;
    }
    out
}

fn count_runs(bits: &[u64; BITMAP_WORDS]) -> usize {
    let mut runs = 0usize;
    let mut carry = 0u64;
    for &w in bits.iter() {
        // a run starts at each set bit whose predecessor is clear
        let starts = w & !((w << 1) | carry);
        runs += starts.count_ones() as usize;
        carry = w >> 63;
    }
    runs
}

impl Container {
    fn cardinality(&self) -> u32 {
        match self {
            Container::Array(v) => v.len() as u32,
            Container::Bitmap(_, c) => *c,
            Container::Run(r) => r.iter().map(|&(_, l)| l as u32 + 1).sum(),
        }
    }

    fn contains(&self, low: u16) -> bool {
        match self {
            Container::Array(v) => v.binary_search(&low).is_ok(),
            Container::Bitmap(b, _) => b[(low / 64) as usize] >> (low % 64) & 1 == 1,
            Container::Run(r) => {
                let p = r.partition_point(|&(s, _)| s <= low);
                p > 0 && {
                    let (s, l) = r[p - 1];
                    (low as u32) <= s as u32 + l as u32
                }
            }
        }
    }

    fn to_bits(&self) -> Bits {
        match self {
            Container::Bitmap(b, _) => b.clone(),
            Container::Array(v) => {
                let mut b = empty_bits();
                for &x in v {
                    b[(x / 64) as usize] |= 1 << (x % 64);
                }
                b
            }
            Container::Run(r) => {
                let mut b = empty_bits();
                for &(s, l) in r {
                    set_range(&mut b, s as u32, s as u32 + l as u32);
                }
                b
            }
        }
    }

    fn push_values(&self, out: &mut Vec<u16>) {
        match self {
            Container::Array(v) => out.extend_from_slice(v),
            Container::Run(r) => {
                for &(s, l) in r {
                    out.extend((s as u32..=s as u32 + l as u32).map(|x| x as u16));
                }
            }
            Container::Bitmap(b, _) => {
                for (wi, &w) in b.iter().enumerate() {
                    let mut w = w;
                    while w != 0 {
                        let t = w.trailing_zeros();
                        out.push((wi as u32 * 64 + t) as u16);
                        w &= w - 1;
                    }
                }
            }
        }
    }

    /// Smallest encoding of a bitmap; `None` when empty.
    fn from_bits(bits: Bits) -> Option<Container> {
        let card: u32 = bits.iter().map(|w| w.count_ones()).sum();
        if card == 0 {
            return None;
        }
        let runs = count_runs(&bits);
        let other = if card as usize <= ARRAY_MAX { 2 * card as usize } else { BITMAP_BYTES };
        if 2 + 4 * runs < other {
            Some(Container::Run(bits_to_runs(&bits, runs)))
        } else if card as usize <= ARRAY_MAX {
            let mut v = Vec::with_capacity(card as usize);
            Container::Bitmap(bits, card).push_values(&mut v);
            Some(Container::Array(v))
        } else {
            Some(Container::Bitmap(bits, card))
        }
    }

    /// Smallest encoding of sorted distinct values.
    fn from_sorted(values: &[u16]) -> Option<Container> {
        if values.is_empty() {
            return None;
        }
        let mut runs = 1;
        for w in values.windows(2) {
            if w[1] != w[0] + 1 {
                runs += 1;
            }
        }
        let card = values.len();
        let other = if card <= ARRAY_MAX { 2 * card } else { BITMAP_BYTES };
        if 2 + 4 * runs < other {
            let mut r: Vec<(u16, u16)> = Vec::with_capacity(runs);
            for &v in values {
                match r.last_mut() {
                    Some((s, l)) if *s as u32 + *l as u32 + 1 == v as u32 => *l += 1,
                    _ => r.push((v, 0)),
                }
            }
            Some(Container::Run(r))
        } else if card <= ARRAY_MAX {
            Some(Container::Array(values.to_vec()))
        } else {
            let mut b = empty_bits();
            for &x in values {
                b[(x / 64) as usize] |= 1 << (x % 64);
            }
            Some(Container::Bitmap(b, card as u32))
        }
    }

    fn union(&self, other: &Container) -> Option<Container> {
        if let (Container::Array(a), Container::Array(b)) = (self, other) {
            if a.len() + b.len() <= ARRAY_MAX {
                return Container::from_sorted(&merge_union(a, b));
            }
        }
        let mut bits = self.to_bits();
        let ob = other.to_bits();
        for (x, y) in bits.iter_mut().zip(ob.iter()) {
            *x |= y;
        }
        Container::from_bits(bits)
    }

    fn intersect(&self, other: &Container) -> Option<Container> {
        match (self, other) {
            (Container::Array(a), o) | (o, Container::Array(a)) => {
                let v: Vec<u16> = a.iter().copied().filter(|&x| o.contains(x)).collect();
                Container::from_sorted(&v)
            }
            _ => {
                let mut bits = self.to_bits();
                let ob = other.to_bits();
                for (x, y) in bits.iter_mut().zip(ob.iter()) {
                    *x &= y;
                }
                Container::from_bits(bits)
            }
        }
    }

    fn difference(&self, other: &Container) -> Option<Container> {
        match self {
            Container::Array(a) => {
                let v: Vec<u16> = a.iter().copied().filter(|&x| !other.contains(x)).collect();
                Container::from_sorted(&v)
            }
            _ => {
                let mut bits = self.to_bits();
                let ob = other.to_bits();
                for (x, y) in bits.iter_mut().zip(ob.iter()) {
                    *x &= !y;
                }
                Container::from_bits(bits)
            }
        }
    }

    fn is_run(&self) -> bool {
        matches!(self, Container::Run(_))
    }
}

fn merge_union(a: &[u16], b: &[u16]) -> Vec<u16> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            core::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            core::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Sorted set of `u32` ids in compressed form. Equal sets have equal
/// representations, so equality and serialization are canonical.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct CompressedIdSet {
    keys: Vec<u16>,
    containers: Vec<Container>,
}

impl fmt::Debug for CompressedIdSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CompressedIdSet(len={}, containers={})", self.len(), self.keys.len())
    }
}

impl CompressedIdSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from ids in strictly increasing order.
    pub fn from_sorted_iter<I: IntoIterator<Item = u32>>(ids: I) -> Result<Self> {
        let mut set = Self::new();
        let mut chunk: Vec<u16> = Vec::new();
        let mut key: Option<u16> = None;
        let mut last: Option<u32> = None;
        for id in ids {
            if last.is_some_and(|l| l >= id) {
                return Err(Error::InvalidParameter("ids must be strictly increasing".into()));
            }
            last = Some(id);
            let (hi, lo) = ((id >> 16) as u16, id as u16);
            if key != Some(hi) {
                if let Some(k) = key {
                    set.push_chunk(k, &chunk);
                }
                chunk.clear();
                key = Some(hi);
            }
            chunk.push(lo);
        }
        if let Some(k) = key {
            set.push_chunk(k, &chunk);
        }
        Ok(set)
    }

    fn push_chunk(&mut self, key: u16, values: &[u16]) {
        if let Some(c) = Container::from_sorted(values) {
            self.keys.push(key);
            self.containers.push(c);
        }
    }

    /// Builds from ids in any order, duplicates allowed.
    pub fn from_unsorted(mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self::from_sorted_iter(ids).expect("sorted")
    }

    /// `{0, 1, …, n − 1}`.
    pub fn full(n: u32) -> Self {
        Self::from_sorted_iter(0..n).expect("sorted")
    }

    pub fn len(&self) -> u64 {
        self.containers.iter().map(|c| c.cardinality() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn container_count(&self) -> usize {
        self.keys.len()
    }

    pub fn contains(&self, id: u32) -> bool {
        match self.keys.binary_search(&((id >> 16) as u16)) {
            Ok(p) => self.containers[p].contains(id as u16),
            Err(_) => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.keys.iter().zip(&self.containers).flat_map(|(&k, c)| {
            let mut v = Vec::with_capacity(c.cardinality() as usize);
            c.push_values(&mut v);
            let base = (k as u32) << 16;
            v.into_iter().map(move |lo| base | lo as u32)
        })
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.iter().collect()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = Self::new();
        let (mut i, mut j) = (0, 0);
        while i < self.keys.len() || j < other.keys.len() {
            let ka = self.keys.get(i).copied();
            let kb = other.keys.get(j).copied();
            match (ka, kb) {
                (Some(a), Some(b)) if a == b => {
                    if let Some(c) = self.containers[i].union(&other.containers[j]) {
                        out.keys.push(a);
                        out.containers.push(c);
                    }
                    i += 1;
                    j += 1;
                }
                (Some(a), b) if b.is_none_or(|b| a < b) => {
                    out.keys.push(a);
                    out.containers.push(self.containers[i].clone());
                    i += 1;
                }
                (_, Some(b)) => {
                    out.keys.push(b);
                    out.containers.push(other.containers[j].clone());
                    j += 1;
                }
                _ => unreachable!(),
            }
        }
        out
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Self::new();
        let (mut i, mut j) = (0, 0);
        while i < self.keys.len() && j < other.keys.len() {
            match self.keys[i].cmp(&other.keys[j]) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    if let Some(c) = self.containers[i].intersect(&other.containers[j]) {
                        out.keys.push(self.keys[i]);
                        out.containers.push(c);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut out = Self::new();
        let mut j = 0;
        for (i, &k) in self.keys.iter().enumerate() {
            while j < other.keys.len() && other.keys[j] < k {
                j += 1;
            }
            let c = if j < other.keys.len() && other.keys[j] == k {
                self.containers[i].difference(&other.containers[j])
            } else {
                Some(self.containers[i].clone())
            };
            if let Some(c) = c {
                out.keys.push(k);
                out.containers.push(c);
            }
        }
        out
    }

    /// Union of many sets.
    pub fn union_all<'a, I: IntoIterator<Item = &'a CompressedIdSet>>(sets: I) -> Self {
        sets.into_iter().fold(Self::new(), |acc, s| acc.union(s))
    }

    pub fn serialized_size(&self) -> usize {
        self.serialize().len()
    }

    /// Portable roaring serialization.
    pub fn serialize(&self) -> Vec<u8> {
        let n = self.keys.len();
        let has_run = self.containers.iter().any(Container::is_run);
        let mut out = Vec::new();
        if has_run {
            out.extend_from_slice(&(COOKIE_RUN | (((n - 1) as u32) << 16)).to_le_bytes());
            let mut flags = vec![0u8; n.div_ceil(8)];
            for (i, c) in self.containers.iter().enumerate() {
                if c.is_run() {
                    flags[i / 8] |= 1 << (i % 8);
                }
            }
            out.extend_from_slice(&flags);
        } else {
            out.extend_from_slice(&COOKIE_NO_RUN.to_le_bytes());
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for (k, c) in self.keys.iter().zip(&self.containers) {
            out.extend_from_slice(&k.to_le_bytes());
            out.extend_from_slice(&((c.cardinality() - 1) as u16).to_le_bytes());
        }
        let with_offsets = !has_run || n >= NO_OFFSET_THRESHOLD;
        if with_offsets {
            let mut pos = out.len() + 4 * n;
            for c in &self.containers {
                out.extend_from_slice(&(pos as u32).to_le_bytes());
                pos += container_bytes(c);
            }
        }
        for c in &self.containers {
            match c {
                Container::Array(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                Container::Bitmap(b, _) => b.iter().for_each(|w| out.extend_from_slice(&w.to_le_bytes())),
                Container::Run(r) => {
                    out.extend_from_slice(&(r.len() as u16).to_le_bytes());
                    for &(s, l) in r {
                        out.extend_from_slice(&s.to_le_bytes());
                        out.extend_from_slice(&l.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    /// Parses the portable format; every structural property is checked.
    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { b: bytes, p: 0 };
        let cookie = r.u32()?;
        let (n, run_flags) = if cookie & 0xffff == COOKIE_RUN {
            let n = (cookie >> 16) as usize + 1;
            let flags = r.take(n.div_ceil(8))?.to_vec();
            (n, Some(flags))
        } else if cookie == COOKIE_NO_RUN {
            (r.u32()? as usize, None)
        } else {
            return Err(Error::CorruptIdSet("unknown cookie"));
        };
        if n > 65536 {
            return Err(Error::CorruptIdSet("too many containers"));
        }
        let mut header = Vec::with_capacity(n);
        for _ in 0..n {
            let key = r.u16()?;
            let card = r.u16()? as u32 + 1;
            header.push((key, card));
        }
        if header.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::CorruptIdSet("container keys not increasing"));
        }
        let is_run = |i: usize| run_flags.as_ref().is_some_and(|f| f[i / 8] >> (i % 8) & 1 == 1);
        if run_flags.is_none() || n >= NO_OFFSET_THRESHOLD {
            r.take(4 * n)?;
        }
        let mut set = Self::new();
        for (i, &(key, card)) in header.iter().enumerate() {
            let c = if is_run(i) {
                let nr = r.u16()? as usize;
                let mut runs = Vec::with_capacity(nr);
                let mut next_min = 0u32;
                for _ in 0..nr {
                    let s = r.u16()? as u32;
                    let l = r.u16()? as u32;
                    if s < next_min || s + l > 65535 {
                        return Err(Error::CorruptIdSet("overlapping or overflowing runs"));
                    }
                    next_min = s + l + 1;
                    runs.push((s as u16, l as u16));
                }
                Container::Run(runs)
            } else if card as usize > ARRAY_MAX {
                let raw = r.take(BITMAP_BYTES)?;
                let mut b = empty_bits();
                for (w, chunk) in b.iter_mut().zip(raw.chunks_exact(8)) {
                    *w = u64::from_le_bytes(chunk.try_into().unwrap());
                }
                Container::Bitmap(b, card)
            } else {
                let mut v = Vec::with_capacity(card as usize);
                for _ in 0..card {
                    v.push(r.u16()?);
                }
                if v.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::CorruptIdSet("array container not increasing"));
                }
                Container::Array(v)
            };
            let actual = match &c {
                Container::Bitmap(b, _) => b.iter().map(|w| w.count_ones()).sum(),
                other => other.cardinality(),
            };
            if actual != card || card == 0 {
                return Err(Error::CorruptIdSet("container cardinality mismatch"));
            }
            // store canonically so equal sets compare equal
            let canon = match c {
                Container::Array(v) => Container::from_sorted(&v),
                other => Container::from_bits(other.to_bits()),
            };
            set.keys.push(key);
            set.containers.push(canon.expect("nonempty"));
        }
        if r.p != bytes.len() {
            return Err(Error::CorruptIdSet("trailing bytes"));
        }
        Ok(set)
    }
}

fn container_bytes(c: &Container) -> usize {
    match c {
        Container::Array(v) => 2 * v.len(),
        Container::Bitmap(..) => BITMAP_BYTES,
        Container::Run(r) => 2 + 4 * r.len(),
    }
}

struct Reader<'a> {
    b: &'a [u8],
    p: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.p.checked_add(n).filter(|&e| e <= self.b.len());
        match end {
            Some(e) => {
                let s = &self.b[self.p..e];
                self.p = e;
                Ok(s)
            }
            None => Err(Error::CorruptIdSet("truncated")),
        }
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

impl FromIterator<u32> for CompressedIdSet {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        Self::from_unsorted(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[u32]) -> CompressedIdSet {
        v.iter().copied().collect()
    }

    #[test]
    fn small_algebra() {
        assert_eq!(set(&[1, 3, 5]).intersect(&set(&[3, 5, 7])).to_vec(), vec![3, 5]);
        let a = set(&[1, 70000, 9]);
        assert_eq!(a.union(&CompressedIdSet::new()), a);
        assert_eq!(a.difference(&set(&[9])).to_vec(), vec![1, 70000]);
        assert!(a.contains(70000) && !a.contains(70001));
    }

    #[test]
    fn container_kinds_round_trip() {
        let dense: Vec<u32> = (0..65536).filter(|x| x % 3 != 0).collect();
        let runs: Vec<u32> = (70000..80000).chain(90000..90010).collect();
        let sparse: Vec<u32> = (0..100).map(|x| 200_000 + x * 7).collect();
        for ids in [dense, runs, sparse, vec![], vec![u32::MAX]] {
            let s = CompressedIdSet::from_sorted_iter(ids.iter().copied()).unwrap();
            assert_eq!(s.to_vec(), ids);
            assert_eq!(s.len(), ids.len() as u64);
            let bytes = s.serialize();
            let back = CompressedIdSet::deserialize(&bytes).unwrap();
            assert_eq!(back, s);
            assert_eq!(back.serialize(), bytes);
        }
    }

    #[test]
    fn bitmap_to_runs() {
        let ids: Vec<u32> = (0..65536).collect();
        let s = CompressedIdSet::from_sorted_iter(ids).unwrap();
        // a full chunk is a single run
        assert_eq!(s.serialized_size(), 4 + 1 + 4 + 2 + 4);
        let half = s.difference(&CompressedIdSet::from_sorted_iter(0..100).unwrap());
        assert_eq!(half.len(), 65436);
        assert_eq!(half.iter().next(), Some(100));
    }

    #[test]
    fn empty_set_format() {
        let b = CompressedIdSet::new().serialize();
        assert_eq!(b, [0x3a, 0x30, 0, 0, 0, 0, 0, 0]);
        assert!(CompressedIdSet::deserialize(&b).unwrap().is_empty());
    }

    #[test]
    fn corrupt_inputs() {
        let s = set(&[1, 2, 3, 100]).serialize();
        assert!(CompressedIdSet::deserialize(&s[..s.len() - 1]).is_err());
        let mut bad = s.clone();
        bad[0] = 0;
        assert!(CompressedIdSet::deserialize(&bad).is_err());
        let mut extra = s;
        extra.push(0);
        assert!(CompressedIdSet::deserialize(&extra).is_err());
        assert!(CompressedIdSet::from_sorted_iter([3, 2]).is_err());
    }
}
