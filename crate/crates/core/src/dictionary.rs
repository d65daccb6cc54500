//! Trigonometric dictionaries with closed-form normalization and
//! FFT-accelerated inner products.
//!
//! Three families are supported over a block of `N_b` samples:
//!
//! * a cosine dictionary of `M` atoms, `cos(pi (2i-1)(n-1) / 2M) / w_c(n)`,
//! * a sine dictionary of `M` atoms, `sin(pi (2i-1) n / 2M) / w_s(n)`,
//! * a mixed dictionary whose first `M/2` atoms are the cosine family and
//!   whose last `M/2` atoms are the sine family, each half built with
//!   `M/2` in the argument above.
//!
//! `M = N_b` yields an orthonormal basis for the single-kind families and
//! so does `M = N_b` for the mixed one (halves of size `N_b / 2`).
//! Inner products of a vector with all atoms of a single-kind dictionary
//! take one zero-padded FFT of length `2M`; the mixed dictionary needs a
//! single length-`M` FFT because both the real and imaginary parts are
//! consumed.
//!
//! Atom indices are 1-based throughout the public API.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{PursuitError, Result};

/// Below this threshold the closed-form weight denominator
/// `1 - cos(2 pi a / M)` is treated as vanishing and the weight is taken
/// from the numerically computed norm of the raw sequence instead.
const DEGENERATE_WEIGHT_EPS: f64 = 1e-12;

/// Dictionary family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictKind {
    Cosine,
    Sine,
    CosineSine,
}

impl DictKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DictKind::Cosine => "cosine",
            DictKind::Sine => "sine",
            DictKind::CosineSine => "cosine-sine",
        }
    }
}

/// Which single-kind formula an FFT inner-product call should evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigCase {
    Cos,
    Sin,
}

/// Declarative description of a trigonometric dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionarySpec {
    kind: DictKind,
    block_size: usize,
    atom_count: usize,
}

impl DictionarySpec {
    /// Validates and builds a spec. Single-kind dictionaries must have
    /// `atom_count >= block_size`; the mixed kind additionally requires an
    /// even atom count so both halves have the same size.
    pub fn new(kind: DictKind, block_size: usize, atom_count: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(PursuitError::InvalidSpec("block size must be positive".into()));
        }
        if atom_count == 0 {
            return Err(PursuitError::InvalidSpec("atom count must be positive".into()));
        }
        match kind {
            DictKind::Cosine | DictKind::Sine => {
                if atom_count < block_size {
                    return Err(PursuitError::InvalidSpec(format!(
                        "single-kind dictionary needs atom count >= block size ({atom_count} < {block_size})"
                    )));
                }
            }
            DictKind::CosineSine => {
                if atom_count % 2 != 0 {
                    return Err(PursuitError::InvalidSpec(
                        "mixed dictionary needs an even atom count".into(),
                    ));
                }
                if atom_count < block_size {
                    return Err(PursuitError::InvalidSpec(format!(
                        "mixed dictionary needs atom count >= block size ({atom_count} < {block_size})"
                    )));
                }
            }
        }
        Ok(Self {
            kind,
            block_size,
            atom_count,
        })
    }

    pub fn kind(&self) -> DictKind {
        self.kind
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    /// Atom count over block size; 1, 2 and 4 are the familiar basis,
    /// twice- and four-times redundant families.
    pub fn redundancy(&self) -> f64 {
        self.atom_count as f64 / self.block_size as f64
    }

    /// Short label of the family, e.g. `Bc` for the orthonormal cosine
    /// basis or `Dcs4` for the mixed dictionary with redundancy 4.
    pub fn family_label(&self) -> String {
        let letters = match self.kind {
            DictKind::Cosine => "c",
            DictKind::Sine => "s",
            DictKind::CosineSine => "cs",
        };
        if self.atom_count == self.block_size {
            format!("B{letters}")
        } else {
            let r = self.redundancy();
            if (r - r.round()).abs() < 1e-9 {
                format!("D{letters}{}", r.round() as u64)
            } else {
                format!("D{letters}{r:.2}")
            }
        }
    }

    /// Spec of one half of a mixed dictionary. Halves are allowed to be
    /// smaller than the block size, so this bypasses `new`.
    fn half(&self, case: TrigCase) -> DictionarySpec {
        debug_assert_eq!(self.kind, DictKind::CosineSine);
        DictionarySpec {
            kind: match case {
                TrigCase::Cos => DictKind::Cosine,
                TrigCase::Sin => DictKind::Sine,
            },
            block_size: self.block_size,
            atom_count: self.atom_count / 2,
        }
    }
}

fn raw_entry(case: TrigCase, atom_count: usize, n: usize, i: usize) -> f64 {
    let two_m = 2.0 * atom_count as f64;
    match case {
        TrigCase::Cos => (PI * ((2 * i - 1) * (n - 1)) as f64 / two_m).cos(),
        TrigCase::Sin => (PI * ((2 * i - 1) * n) as f64 / two_m).sin(),
    }
}

fn raw_norm(case: TrigCase, block_size: usize, atom_count: usize, n: usize) -> f64 {
    (1..=block_size)
        .map(|i| {
            let v = raw_entry(case, atom_count, n, i);
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Normalization weight of atom `n` (1-based) of a single-kind family.
///
/// The closed form is used except where its denominator vanishes (the
/// constant cosine atom `n = 1` and the alternating sine atom `n = M`),
/// in which case the norm of the raw sequence is computed directly.
fn weight(case: TrigCase, block_size: usize, atom_count: usize, n: usize) -> f64 {
    let m = atom_count as f64;
    let nb = block_size as f64;
    let a = match case {
        TrigCase::Cos => (n - 1) as f64,
        TrigCase::Sin => n as f64,
    };
    let denom = 1.0 - (2.0 * PI * a / m).cos();
    if denom.abs() < DEGENERATE_WEIGHT_EPS {
        return raw_norm(case, block_size, atom_count, n);
    }
    let corr = (PI * a / m).sin() * (2.0 * PI * a * nb / m).sin() / (2.0 * denom);
    match case {
        TrigCase::Cos => (nb / 2.0 + corr).sqrt(),
        TrigCase::Sin => (nb / 2.0 - corr).sqrt(),
    }
}

/// Normalization weights of all `M` atoms of `spec`, in global atom order
/// (cosine half before sine half for the mixed kind).
pub fn normalization_weights(spec: &DictionarySpec) -> Vec<f64> {
    match spec.kind {
        DictKind::Cosine => (1..=spec.atom_count)
            .map(|n| weight(TrigCase::Cos, spec.block_size, spec.atom_count, n))
            .collect(),
        DictKind::Sine => (1..=spec.atom_count)
            .map(|n| weight(TrigCase::Sin, spec.block_size, spec.atom_count, n))
            .collect(),
        DictKind::CosineSine => {
            let half = spec.atom_count / 2;
            let mut w = Vec::with_capacity(spec.atom_count);
            for n in 1..=half {
                w.push(weight(TrigCase::Cos, spec.block_size, half, n));
            }
            for n in 1..=half {
                w.push(weight(TrigCase::Sin, spec.block_size, half, n));
            }
            w
        }
    }
}

/// Materializes the unit-norm atom `n` (1-based). Intended for tests and
/// for touching a handful of atoms; the pursuit paths never build the
/// whole dictionary.
pub fn atom(spec: &DictionarySpec, n: usize) -> Result<Vec<f64>> {
    if n == 0 || n > spec.atom_count {
        return Err(PursuitError::AtomIndexOutOfRange {
            index: n,
            count: spec.atom_count,
        });
    }
    let (case, m, local) = match spec.kind {
        DictKind::Cosine => (TrigCase::Cos, spec.atom_count, n),
        DictKind::Sine => (TrigCase::Sin, spec.atom_count, n),
        DictKind::CosineSine => {
            let half = spec.atom_count / 2;
            if n <= half {
                (TrigCase::Cos, half, n)
            } else {
                (TrigCase::Sin, half, n - half)
            }
        }
    };
    let w = weight(case, spec.block_size, m, local);
    Ok((1..=spec.block_size)
        .map(|i| raw_entry(case, m, local, i) / w)
        .collect())
}

static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();

fn forward_plan(len: usize) -> Arc<dyn Fft<f64>> {
    let planner = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()));
    planner.lock().unwrap().plan_fft_forward(len)
}

/// Zero-padded forward DFT of a real vector, negative-exponent convention.
fn padded_dft(r: &[f64], len: usize) -> Vec<Complex64> {
    debug_assert!(r.len() <= len);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (slot, &x) in buf.iter_mut().zip(r.iter()) {
        *slot = Complex64::new(x, 0.0);
    }
    forward_plan(len).process(&mut buf);
    buf
}

/// Maps DFT bins to inner products with the raw (unnormalized) sequences.
///
/// For the cosine case: `Re(e^{-i pi (n-1)/2M} t[n-1])` with 0-based bin
/// `n-1`; for the sine case the bins are shifted by one:
/// `-Im(e^{-i pi n/2M} t[n])`.
fn ip_from_dft(t: &[Complex64], atom_count: usize, case: TrigCase, weights: &[f64]) -> Vec<f64> {
    let two_m = 2.0 * atom_count as f64;
    (1..=atom_count)
        .map(|n| {
            let (phase, z) = match case {
                TrigCase::Cos => (-PI * (n - 1) as f64 / two_m, t[n - 1]),
                TrigCase::Sin => (-PI * n as f64 / two_m, t[n]),
            };
            let (sin_p, cos_p) = phase.sin_cos();
            let raw = match case {
                TrigCase::Cos => z.re * cos_p - z.im * sin_p,
                TrigCase::Sin => -(z.re * sin_p + z.im * cos_p),
            };
            raw / weights[n - 1]
        })
        .collect()
}

fn check_len(r: &[f64], spec: &DictionarySpec) -> Result<()> {
    if r.len() != spec.block_size {
        return Err(PursuitError::LengthMismatch {
            expected: spec.block_size,
            got: r.len(),
        });
    }
    Ok(())
}

/// Inner products of `r` with every atom of a single-kind dictionary,
/// via one zero-padded DFT of length `2M`.
pub fn ip_trig_fft(r: &[f64], spec: &DictionarySpec, case: TrigCase) -> Result<Vec<f64>> {
    if spec.kind == DictKind::CosineSine {
        return Err(PursuitError::WrongKind {
            expected: "cosine or sine",
            got: spec.kind.as_str(),
        });
    }
    check_len(r, spec)?;
    let weights: Vec<f64> = (1..=spec.atom_count)
        .map(|n| weight(case, spec.block_size, spec.atom_count, n))
        .collect();
    let t = padded_dft(r, 2 * spec.atom_count);
    Ok(ip_from_dft(&t, spec.atom_count, case, &weights))
}

/// Inner products of `r` with both halves of a mixed dictionary. A single
/// DFT of length `M` serves the cosine and the sine half, using the real
/// and the imaginary part respectively.
pub fn ip_mixed_fft(r: &[f64], spec: &DictionarySpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if spec.kind != DictKind::CosineSine {
        return Err(PursuitError::WrongKind {
            expected: "cosine-sine",
            got: spec.kind.as_str(),
        });
    }
    check_len(r, spec)?;
    let half = spec.atom_count / 2;
    let wc: Vec<f64> = (1..=half)
        .map(|n| weight(TrigCase::Cos, spec.block_size, half, n))
        .collect();
    let ws: Vec<f64> = (1..=half)
        .map(|n| weight(TrigCase::Sin, spec.block_size, half, n))
        .collect();
    let t = padded_dft(r, 2 * half);
    let pc = ip_from_dft(&t, half, TrigCase::Cos, &wc);
    let ps = ip_from_dft(&t, half, TrigCase::Sin, &ws);
    Ok((pc, ps))
}

/// A dictionary with its normalization weights precomputed. This is what
/// the pursuit strategies hold on to; it is immutable and can be shared
/// across threads.
#[derive(Debug, Clone)]
pub struct Dictionary {
    spec: DictionarySpec,
    weights: Vec<f64>,
}

impl Dictionary {
    pub fn new(spec: DictionarySpec) -> Self {
        let weights = normalization_weights(&spec);
        Self { spec, weights }
    }

    pub fn spec(&self) -> &DictionarySpec {
        &self.spec
    }

    pub fn atom_count(&self) -> usize {
        self.spec.atom_count
    }

    pub fn block_size(&self) -> usize {
        self.spec.block_size
    }

    /// Materializes atom `n` (1-based) using the cached weight.
    pub fn atom(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 || n > self.spec.atom_count {
            return Err(PursuitError::AtomIndexOutOfRange {
                index: n,
                count: self.spec.atom_count,
            });
        }
        let (case, m, local) = match self.spec.kind {
            DictKind::Cosine => (TrigCase::Cos, self.spec.atom_count, n),
            DictKind::Sine => (TrigCase::Sin, self.spec.atom_count, n),
            DictKind::CosineSine => {
                let half = self.spec.atom_count / 2;
                if n <= half {
                    (TrigCase::Cos, half, n)
                } else {
                    (TrigCase::Sin, half, n - half)
                }
            }
        };
        let w = self.weights[n - 1];
        Ok((1..=self.spec.block_size)
            .map(|i| raw_entry(case, m, local, i) / w)
            .collect())
    }

    /// Inner products of `r` with all `M` atoms, in global atom order.
    pub fn inner_products(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len(r, &self.spec)?;
        match self.spec.kind {
            DictKind::Cosine => {
                let t = padded_dft(r, 2 * self.spec.atom_count);
                Ok(ip_from_dft(&t, self.spec.atom_count, TrigCase::Cos, &self.weights))
            }
            DictKind::Sine => {
                let t = padded_dft(r, 2 * self.spec.atom_count);
                Ok(ip_from_dft(&t, self.spec.atom_count, TrigCase::Sin, &self.weights))
            }
            DictKind::CosineSine => {
                let half = self.spec.atom_count / 2;
                let t = padded_dft(r, 2 * half);
                let mut p = ip_from_dft(&t, half, TrigCase::Cos, &self.weights[..half]);
                p.extend(ip_from_dft(&t, half, TrigCase::Sin, &self.weights[half..]));
                Ok(p)
            }
        }
    }
}
