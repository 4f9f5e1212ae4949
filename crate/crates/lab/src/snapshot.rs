//! Binary field snapshots, spin checkpoints and the kernel sidecar record.
//!
//! Snapshot layout: magic `KPL2`, format version (u32), `N` (u32), then `4N²`
//! little-endian f64 in row-major order over `Λ_N`, site `(x₁, x₂)` at
//! `(x₁ + N − 1)·2N + (x₂ + N − 1)`.
//!
//! A checkpoint is a snapshot of `X_γ` followed by the spin bitmap (same site
//! order, LSB first, bit set means `+1`) and a trailer with the clock and the
//! generator state, so a resumed chain continues bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ising_kac_core::glauber::{DynamicsParams, SpinConfiguration};
use ising_kac_core::kernel::KacKernel;
use ising_kac_core::lattice::{periodic_index, TorusField};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, LabResult};

pub const MAGIC: &[u8; 4] = b"KPL2";
pub const FORMAT_VERSION: u32 = 1;

/// Storage index of every site, listed in file order.
fn file_order(n: usize) -> Vec<usize> {
    let side = 2 * n;
    let shift = |a: usize| periodic_index(a as i64 + 1 - n as i64, side);
    (0..side * side).map(|f| shift(f / side) * side + shift(f % side)).collect()
}

fn read_array<const K: usize>(r: &mut impl Read) -> LabResult<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)
        .map_err(|e| LabError::Format(format!("truncated file: {e}")))?;
    Ok(buf)
}

pub fn write_field(w: &mut impl Write, f: &TorusField) -> LabResult<()> {
    if f.dim() != 2 {
        return Err(LabError::Param("snapshots hold two-dimensional fields only".into()));
    }
    let n = u32::try_from(f.n()).map_err(|_| LabError::Param("N too large".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    let v = f.values();
    for i in file_order(f.n()) {
        w.write_all(&v[i].to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field(r: &mut impl Read) -> LabResult<TorusField> {
    if &read_array::<4>(r)? != MAGIC {
        return Err(LabError::Format("missing KPL2 magic".into()));
    }
    let version = u32::from_le_bytes(read_array(r)?);
    if version != FORMAT_VERSION {
        return Err(LabError::Format(format!("unsupported format version {version}")));
    }
    let n = u32::from_le_bytes(read_array(r)?) as usize;
    if n == 0 || n > 1 << 14 {
        return Err(LabError::Format(format!("implausible N = {n}")));
    }
    let order = file_order(n);
    let mut values = vec![0.0; order.len()];
    for i in order {
        values[i] = f64::from_le_bytes(read_array(r)?);
    }
    Ok(TorusField::new(n, values)?)
}

pub fn save_field(path: &Path, f: &TorusField) -> LabResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> LabResult<TorusField> {
    read_field(&mut BufReader::new(File::open(path)?))
}

/// Contents of a chain checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub field: TorusField,
    /// Spins in periodic storage order.
    pub spins: Vec<i8>,
    pub t_micro: f64,
    pub pending_ring: Option<f64>,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
}

impl Checkpoint {
    /// Refreshes the cached local field first, so the live chain and a chain
    /// resumed from this checkpoint hold identical floating-point state.
    pub fn capture(s: &mut SpinConfiguration, p: &DynamicsParams) -> Self {
        s.refresh_local_field();
        let rng = s.rng();
        Self {
            field: s.fluctuation_field(p),
            spins: s.spins().to_vec(),
            t_micro: s.t_micro(),
            pending_ring: s.pending_ring(),
            rng_seed: rng.get_seed(),
            rng_stream: rng.get_stream(),
            rng_word_pos: rng.get_word_pos(),
        }
    }

    pub fn resume(&self, kernel: &KacKernel) -> LabResult<SpinConfiguration> {
        let mut rng = ChaCha8Rng::from_seed(self.rng_seed);
        rng.set_stream(self.rng_stream);
        rng.set_word_pos(self.rng_word_pos);
        Ok(SpinConfiguration::restore(
            kernel,
            self.spins.clone(),
            rng,
            self.t_micro,
            self.pending_ring,
        )?)
    }
}

pub fn write_checkpoint(w: &mut impl Write, c: &Checkpoint) -> LabResult<()> {
    write_field(w, &c.field)?;
    let order = file_order(c.field.n());
    if c.spins.len() != order.len() {
        return Err(LabError::Param("spin count does not match the field".into()));
    }
    let mut bits = vec![0u8; order.len().div_ceil(8)];
    for (f, &i) in order.iter().enumerate() {
        if c.spins[i] > 0 {
            bits[f / 8] |= 1 << (f % 8);
        }
    }
    w.write_all(&bits)?;
    w.write_all(&c.t_micro.to_le_bytes())?;
    w.write_all(&[c.pending_ring.is_some() as u8])?;
    w.write_all(&c.pending_ring.unwrap_or(0.0).to_le_bytes())?;
    w.write_all(&c.rng_seed)?;
    w.write_all(&c.rng_stream.to_le_bytes())?;
    w.write_all(&c.rng_word_pos.to_le_bytes())?;
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> LabResult<Checkpoint> {
    let field = read_field(r)?;
    let order = file_order(field.n());
    let mut bits = vec![0u8; order.len().div_ceil(8)];
    r.read_exact(&mut bits)
        .map_err(|e| LabError::Format(format!("truncated spin bitmap: {e}")))?;
    let mut spins = vec![0i8; order.len()];
    for (f, &i) in order.iter().enumerate() {
        spins[i] = if bits[f / 8] >> (f % 8) & 1 == 1 { 1 } else { -1 };
    }
    let t_micro = f64::from_le_bytes(read_array(r)?);
    let has_pending = read_array::<1>(r)?[0];
    let pending = f64::from_le_bytes(read_array(r)?);
    Ok(Checkpoint {
        field,
        spins,
        t_micro,
        pending_ring: match has_pending {
            0 => None,
            1 => Some(pending),
            b => return Err(LabError::Format(format!("bad pending-ring flag {b}"))),
        },
        rng_seed: read_array(r)?,
        rng_stream: u64::from_le_bytes(read_array(r)?),
        rng_word_pos: u128::from_le_bytes(read_array(r)?),
    })
}

/// Parsed kernel sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRecord {
    pub profile: String,
    pub gamma: f64,
    pub n: usize,
    pub c_gamma: f64,
}

/// `key value` lines; reals carry 17 significant digits.
pub fn kernel_sidecar(k: &KacKernel) -> LabResult<String> {
    Ok(format!(
        "profile {}\ngamma {:.16e}\nN {}\nC_gamma {:.16e}\n",
        k.profile().id(),
        k.gamma(),
        k.n(),
        k.renorm_constant()?
    ))
}

pub fn parse_kernel_sidecar(text: &str) -> LabResult<KernelRecord> {
    let mut profile = None;
    let mut gamma = None;
    let mut n = None;
    let mut c = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| LabError::Format(format!("malformed sidecar line `{line}`")))?;
        let bad = |_| LabError::Format(format!("bad value for {key}: `{value}`"));
        match key {
            "profile" => profile = Some(value.to_string()),
            "gamma" => gamma = Some(value.parse::<f64>().map_err(bad)?),
            "N" => n = Some(value.parse::<usize>().map_err(|_| LabError::Format(format!("bad N `{value}`")))?),
            "C_gamma" => c = Some(value.parse::<f64>().map_err(bad)?),
            other => return Err(LabError::Format(format!("unknown sidecar key `{other}`"))),
        }
    }
    let missing = |k: &str| LabError::Format(format!("sidecar lacks `{k}`"));
    Ok(KernelRecord {
        profile: profile.ok_or_else(|| missing("profile"))?,
        gamma: gamma.ok_or_else(|| missing("gamma"))?,
        n: n.ok_or_else(|| missing("N"))?,
        c_gamma: c.ok_or_else(|| missing("C_gamma"))?,
    })
}

/// Writes `<stem>.kpl2` (the macroscopic kernel `K_γ`) and `<stem>.kernel.txt`.
pub fn dump_kernel(dir: &Path, stem: &str, k: &KacKernel) -> LabResult<()> {
    save_field(&dir.join(format!("{stem}.kpl2")), &k.macroscopic())?;
    std::fs::write(dir.join(format!("{stem}.kernel.txt")), kernel_sidecar(k)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ising_kac_core::kernel::{build_kernel, build_periodized_kernel, Profile};
    use ising_kac_core::rng::replica_rng;

    #[test]
    fn field_round_trip_and_layout() {
        let f = TorusField::from_fn(3, |a, b| a * 10.0 + b);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(&buf[..4], b"KPL2");
        assert_eq!(buf.len(), 12 + 8 * 36);
        // First entry is site (1 − N, 1 − N) = (−2, −2) in lattice units.
        let first = f64::from_le_bytes(buf[12..20].try_into().unwrap());
        assert_eq!(first, f.get([-2, -2]));
        let second = f64::from_le_bytes(buf[20..28].try_into().unwrap());
        assert_eq!(second, f.get([-2, -1]));
        assert_eq!(read_field(&mut buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn corrupt_snapshots_are_rejected() {
        let f = TorusField::constant(2, 1.0);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_field(&mut bad.as_slice()).is_err());
        assert!(read_field(&mut &buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn checkpoint_resumes_bit_for_bit() {
        let k = build_kernel(Profile::default(), 0.25, 16).unwrap();
        let p = DynamicsParams::critical(&k, 0.0).unwrap();
        let mut s = SpinConfiguration::random(&k, replica_rng(40, 1));
        s.advance_macro(0.01, &p);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &Checkpoint::capture(&mut s, &p)).unwrap();
        let mut resumed = read_checkpoint(&mut buf.as_slice()).unwrap().resume(&k).unwrap();
        s.advance_macro(0.01, &p);
        resumed.advance_macro(0.01, &p);
        assert_eq!(s.spins(), resumed.spins());
        assert_eq!(s.t_micro().to_bits(), resumed.t_micro().to_bits());
        assert_eq!(s.local_field(), resumed.local_field());
    }

    #[test]
    fn sidecar_round_trip() {
        let k = build_periodized_kernel(Profile::Bump, 0.5, 4).unwrap();
        let text = kernel_sidecar(&k).unwrap();
        let rec = parse_kernel_sidecar(&text).unwrap();
        assert_eq!(rec.profile, "bump");
        assert_eq!(rec.n, 4);
        assert_eq!(rec.gamma, 0.5);
        assert_eq!(rec.c_gamma, k.renorm_constant().unwrap());
        assert!(parse_kernel_sidecar("profile bump\n").is_err());
    }
}
