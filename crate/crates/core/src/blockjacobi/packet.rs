use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, CVector, ZERO};

/// Finitely supported vector in `l^2(Z)^m`.
///
/// Entries are stored block by block starting at block site `base`. The
/// scalar index `n` refers to block site `floor(n / m)` and component
/// `n mod m`, so the position operator acts as `X delta_n = floor(n/m) delta_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    m: usize,
    base: i64,
    data: Vec<C64>,
}

impl WavePacket {
    pub fn new(m: usize, base: i64, data: Vec<C64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::DimensionMismatch("block dimension must be positive".into()));
        }
        if data.len() % m != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients do not form whole blocks of size {m}",
                data.len()
            )));
        }
        Ok(Self { m, base, data })
    }

    pub fn zero(m: usize) -> Self {
        Self {
            m,
            base: 0,
            data: Vec::new(),
        }
    }

    /// Zero packet covering block sites `lo..=hi`.
    pub fn zeros(m: usize, lo: i64, hi: i64) -> Self {
        let len = (hi - lo + 1).max(0) as usize;
        Self {
            m,
            base: lo,
            data: vec![ZERO; len * m],
        }
    }

    /// `delta_n` for a scalar index `n`.
    pub fn delta(m: usize, n: i64) -> Self {
        let (site, comp) = scalar_to_block(m, n);
        Self::block_delta(m, site, comp)
    }

    pub fn block_delta(m: usize, site: i64, component: usize) -> Self {
        let mut data = vec![ZERO; m];
        data[component] = C64::new(1.0, 0.0);
        Self { m, base: site, data }
    }

    /// Builds a packet from `(scalar index, value)` pairs.
    pub fn from_scalars(m: usize, entries: &[(i64, C64)]) -> Self {
        if entries.is_empty() {
            return Self::zero(m);
        }
        let sites = entries.iter().map(|&(n, _)| n.div_euclid(m as i64));
        let lo = sites.clone().min().unwrap();
        let hi = sites.max().unwrap();
        let mut p = Self::zeros(m, lo, hi);
        for &(n, z) in entries {
            let (s, c) = scalar_to_block(m, n);
            *p.get_mut(s, c) += z;
        }
        p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Block site of the first stored entry.
    pub fn base(&self) -> i64 {
        self.base
    }

    pub fn num_sites(&self) -> usize {
        self.data.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Stored site range `(first, last)`, or `None` when nothing is stored.
    pub fn site_range(&self) -> Option<(i64, i64)> {
        if self.data.is_empty() {
            None
        } else {
            Some((self.base, self.base + self.num_sites() as i64 - 1))
        }
    }

    /// Range of block sites carrying a nonzero entry.
    pub fn support(&self) -> Option<(i64, i64)> {
        let nz = |s: &usize| self.block_at(*s).iter().any(|z| *z != ZERO);
        let first = (0..self.num_sites()).find(nz)?;
        let last = (0..self.num_sites()).rev().find(nz)?;
        Some((self.base + first as i64, self.base + last as i64))
    }

    /// Largest `|site|` over the nonzero support (0 for the zero packet).
    pub fn radius(&self) -> i64 {
        self.support().map_or(0, |(lo, hi)| lo.abs().max(hi.abs()))
    }

    fn block_at(&self, offset: usize) -> &[C64] {
        &self.data[offset * self.m..(offset + 1) * self.m]
    }

    /// Block `u_site` (zero outside the stored range).
    pub fn block(&self, site: i64) -> Vec<C64> {
        match self.offset(site) {
            Some(k) => self.block_at(k).to_vec(),
            None => vec![ZERO; self.m],
        }
    }

    fn offset(&self, site: i64) -> Option<usize> {
        let k = site - self.base;
        (k >= 0 && (k as usize) < self.num_sites()).then_some(k as usize)
    }

    pub fn get(&self, site: i64, component: usize) -> C64 {
        self.offset(site)
            .map_or(ZERO, |k| self.data[k * self.m + component])
    }

    /// Mutable access; the site must lie inside the stored range.
    pub fn get_mut(&mut self, site: i64, component: usize) -> &mut C64 {
        let k = self.offset(site).expect("site outside stored range");
        &mut self.data[k * self.m + component]
    }

    pub fn scalar(&self, n: i64) -> C64 {
        let (s, c) = scalar_to_block(self.m, n);
        self.get(s, c)
    }

    /// Iterates `(site, component, value)` over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (i64, usize, C64)> + '_ {
        self.data.iter().enumerate().map(move |(i, &z)| {
            (self.base + (i / self.m) as i64, i % self.m, z)
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self, other>`, antilinear in the first argument.
    pub fn inner(&self, other: &WavePacket) -> C64 {
        self.entries()
            .map(|(s, c, z)| z.conj() * other.get(s, c))
            .sum()
    }

    pub fn scaled(&self, factor: C64) -> WavePacket {
        Self {
            m: self.m,
            base: self.base,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    /// `self + factor * other` on the union of the stored ranges.
    pub fn axpy(&self, factor: C64, other: &WavePacket) -> WavePacket {
        assert_eq!(self.m, other.m, "block dimensions differ");
        let ranges = [self.site_range(), other.site_range()];
        let lo = ranges.iter().flatten().map(|r| r.0).min();
        let hi = ranges.iter().flatten().map(|r| r.1).max();
        let (Some(lo), Some(hi)) = (lo, hi) else {
            return Self::zero(self.m);
        };
        let mut out = Self::zeros(self.m, lo, hi);
        for (s, c, z) in self.entries() {
            *out.get_mut(s, c) += z;
        }
        for (s, c, z) in other.entries() {
            *out.get_mut(s, c) += factor * z;
        }
        out
    }

    pub fn sub(&self, other: &WavePacket) -> WavePacket {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    /// `X u`, multiplying block site `n` by `n`.
    pub fn position_applied(&self) -> WavePacket {
        let mut out = self.clone();
        for (i, z) in out.data.iter_mut().enumerate() {
            *z *= (self.base + (i / self.m) as i64) as f64;
        }
        out
    }

    /// Drops entries with modulus at most `tol` and trims the stored range to
    /// the remaining support. Returns the packet and the discarded mass.
    pub fn thresholded(&self, tol: f64) -> (WavePacket, f64) {
        let mut dropped = 0.0;
        let mut out = self.clone();
        for z in out.data.iter_mut() {
            if z.norm() <= tol {
                dropped += z.norm_sqr();
                *z = ZERO;
            }
        }
        (out.trimmed(), dropped)
    }

    /// Removes zero blocks at both ends of the stored range.
    pub fn trimmed(&self) -> WavePacket {
        match self.support() {
            None => Self::zero(self.m),
            Some((lo, hi)) => {
                let a = (lo - self.base) as usize * self.m;
                let b = (hi - self.base + 1) as usize * self.m;
                Self {
                    m: self.m,
                    base: lo,
                    data: self.data[a..b].to_vec(),
                }
            }
        }
    }

    /// Dense coordinates on block sites `lo..=hi`; errors when the nonzero
    /// support is not contained in the window.
    pub fn to_window(&self, lo: i64, hi: i64) -> Result<CVector> {
        if let Some((slo, shi)) = self.support() {
            if slo < lo || shi > hi {
                return Err(Error::SupportOutsideWindow {
                    lo: slo,
                    hi: shi,
                    window_lo: lo,
                    window_hi: hi,
                });
            }
        }
        let len = (hi - lo + 1) as usize * self.m;
        let mut v = DVector::from_element(len, ZERO);
        for (s, c, z) in self.entries() {
            if s >= lo && s <= hi {
                v[(s - lo) as usize * self.m + c] = z;
            }
        }
        Ok(v)
    }

    pub fn from_window(m: usize, lo: i64, v: &CVector) -> WavePacket {
        Self {
            m,
            base: lo,
            data: v.iter().copied().collect(),
        }
    }

    /// Scalar-index view: `(n, value)` pairs over stored entries.
    pub fn scalar_entries(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        let m = self.m as i64;
        self.entries().map(move |(s, c, z)| (s * m + c as i64, z))
    }
}

/// `n -> (floor(n / m), n mod m)`.
pub fn scalar_to_block(m: usize, n: i64) -> (i64, usize) {
    let m = m as i64;
    (n.div_euclid(m), n.rem_euclid(m) as usize)
}

pub fn block_to_scalar(m: usize, site: i64, component: usize) -> i64 {
    site * m as i64 + component as i64
}

/// JSON form of a wave packet used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PacketSpec {
    /// `{"delta": n}`: the scalar basis vector `delta_n`.
    Delta { delta: i64 },
    /// `{"base": site, "coeffs": [[re, im], ...]}` with `m` entries per site.
    Coefficients { base: i64, coeffs: Vec<[f64; 2]> },
}

impl PacketSpec {
    pub fn build(&self, m: usize) -> Result<WavePacket> {
        match self {
            PacketSpec::Delta { delta } => Ok(WavePacket::delta(m, *delta)),
            PacketSpec::Coefficients { base, coeffs } => WavePacket::new(
                m,
                *base,
                coeffs.iter().map(|&[re, im]| C64::new(re, im)).collect(),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_index_follows_floor_convention() {
        assert_eq!(scalar_to_block(2, -1), (-1, 1));
        assert_eq!(scalar_to_block(2, -2), (-1, 0));
        assert_eq!(scalar_to_block(2, 3), (1, 1));
        assert_eq!(scalar_to_block(3, -4), (-2, 2));
        for n in -20..20 {
            let (s, c) = scalar_to_block(3, n);
            assert_eq!(block_to_scalar(3, s, c), n);
        }
    }

    #[test]
    fn position_operator_uses_block_site() {
        let p = WavePacket::from_scalars(2, &[(-3, C64::new(1.0, 0.0)), (5, C64::new(2.0, 0.0))]);
        let x = p.position_applied();
        assert_eq!(x.scalar(-3), C64::new(-2.0, 0.0));
        assert_eq!(x.scalar(5), C64::new(4.0, 0.0));
    }

    #[test]
    fn window_round_trip_and_support_check() {
        let p = WavePacket::from_scalars(1, &[(2, C64::new(0.0, 1.0))]);
        let v = p.to_window(-3, 3).unwrap();
        let q = WavePacket::from_window(1, -3, &v);
        assert_eq!(q.trimmed(), p);
        assert!(matches!(
            p.to_window(-1, 1),
            Err(Error::SupportOutsideWindow { .. })
        ));
    }

    #[test]
    fn thresholding_reports_dropped_mass() {
        let p = WavePacket::from_scalars(
            1,
            &[(0, C64::new(1.0, 0.0)), (4, C64::new(1e-13, 0.0))],
        );
        let (q, dropped) = p.thresholded(1e-12);
        assert_eq!(q.site_range(), Some((0, 0)));
        assert!((dropped - 1e-26).abs() < 1e-30);
    }

    #[test]
    fn packet_spec_parses_both_forms() {
        let d: PacketSpec = serde_json::from_str(r#"{"delta": -2}"#).unwrap();
        assert_eq!(d.build(1).unwrap(), WavePacket::delta(1, -2));
        let c: PacketSpec =
            serde_json::from_str(r#"{"base": 1, "coeffs": [[1,0],[0,1]]}"#).unwrap();
        let p = c.build(2).unwrap();
        assert_eq!(p.get(1, 1), C64::new(0.0, 1.0));
        assert!(c.build(3).is_err());
    }
}
