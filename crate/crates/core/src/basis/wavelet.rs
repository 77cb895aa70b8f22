//! Daubechies scaling functions on [0, 1] with boundary-corrected edge
//! functions.
//!
//! The interior generator is tabulated on the dyadic grid `2^{-R}` by solving
//! for its integer values (power iteration on the refinement matrix) and then
//! refining dyadically. Edge functions are built from restrictions of shifted
//! generators to the half line: for the left edge, function `k` is
//! `φ(· - k)` restricted to `[0, ∞)` plus the combination of boundary-crossing
//! shifts that makes the family reproduce polynomials of degree `< N`; this
//! gives support `[0, N + k]`. The family is then orthonormalised by
//! Gram–Schmidt in index order on the tabulation grid (trapezoid rule). The
//! right edge is the mirror construction.
//!
//! The generator follows the convention `supp φ = [-N + 1, N]`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use super::UnivariateBasis;
use crate::error::{config_err, Result, SieveError};
use crate::quadrature::QuadRule;

const CACHE_MAGIC: &[u8; 4] = b"SVWT";
const CACHE_VERSION: u32 = 1;
const CASCADE_MAX_ITER: usize = 60;
const CASCADE_TOL: f64 = 1e-8;

/// Daubechies low-pass filters (sum = √2), standard support `[0, 2N-1]`.
pub fn daubechies_filter(n: usize) -> Option<Vec<f64>> {
    let s2 = std::f64::consts::SQRT_2;
    match n {
        1 => Some(vec![1.0 / s2, 1.0 / s2]),
        2 => {
            let s3 = 3f64.sqrt();
            let d = 4.0 * s2;
            Some(vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d])
        }
        3 => {
            let s10 = 10f64.sqrt();
            let a = (5.0 + 2.0 * s10).sqrt();
            let d = 16.0 * s2;
            Some(vec![
                (1.0 + s10 + a) / d,
                (5.0 + s10 + 3.0 * a) / d,
                (10.0 - 2.0 * s10 + 2.0 * a) / d,
                (10.0 - 2.0 * s10 - 2.0 * a) / d,
                (5.0 + s10 - 3.0 * a) / d,
                (1.0 + s10 - a) / d,
            ])
        }
        _ => None,
    }
}

/// Tabulated generator and edge functions for one `(N, R)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DaubechiesTable {
    n: usize,
    depth: u32,
    /// Generator on `[0, 2N-1]` (standard support), spacing `2^{-R}`.
    phi: Vec<f64>,
    /// Left edge functions `k = 0..N`, each on `[0, 2N-1]`.
    left: Vec<Vec<f64>>,
    /// Right edge functions `k = 1..=N` (stored at `k - 1`), each on `[-(2N-1), 0]`.
    right: Vec<Vec<f64>>,
}

impl DaubechiesTable {
    /// Cascade tabulation at depth `R` followed by the edge construction.
    pub fn tabulate(n: usize, depth: u32) -> Result<Self> {
        let h = match daubechies_filter(n) {
            Some(h) => h,
            None => return config_err(format!("vanishing moments N must be in 1..=3, got {n}")),
        };
        if depth < 10 {
            return config_err(format!("tabulation depth R must be at least 10, got {depth}"));
        }
        if depth > 24 {
            return config_err(format!("tabulation depth R must be at most 24, got {depth}"));
        }
        let phi = cascade(&h, depth)?;
        let mut table = DaubechiesTable {
            n,
            depth,
            phi,
            left: Vec::new(),
            right: Vec::new(),
        };
        if n >= 2 {
            table.build_edges(&h);
        }
        Ok(table)
    }

    pub fn vanishing_moments(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    fn steps(&self) -> usize {
        1usize << self.depth
    }

    fn step(&self) -> f64 {
        1.0 / self.steps() as f64
    }

    /// Raw generator samples on `[0, 2N-1]` (standard support convention).
    pub fn generator_samples(&self) -> &[f64] {
        &self.phi
    }

    /// Generator `φ(u)` with support `[-N+1, N]`.
    pub fn phi(&self, u: f64) -> f64 {
        let v = u + (self.n - 1) as f64;
        if self.n == 1 {
            return if (0.0..1.0).contains(&v) { 1.0 } else { 0.0 };
        }
        interp(&self.phi, v * self.steps() as f64)
    }

    /// Left edge function `k` (unscaled), support `[0, N + k]`.
    pub fn left(&self, k: usize, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        interp(&self.left[k], u * self.steps() as f64)
    }

    /// Right edge function `k = 1..=N` (unscaled), support `[-(N + k - 1), 0]`.
    pub fn right(&self, k: usize, u: f64) -> f64 {
        if u > 0.0 {
            return 0.0;
        }
        let span = (2 * self.n - 1) as f64;
        interp(&self.right[k - 1], (u + span) * self.steps() as f64)
    }

    /// Standard-convention moments `∫ x^β φ_std(x) dx` for `β < N`.
    fn moments(h: &[f64], n: usize) -> Vec<f64> {
        let s2 = std::f64::consts::SQRT_2;
        let mut m = vec![1.0];
        for beta in 1..n {
            let mut acc = 0.0;
            for (k, hk) in h.iter().enumerate() {
                for (j, mj) in m.iter().enumerate() {
                    acc += hk * binom(beta, j) * (k as f64).powi((beta - j) as i32) * mj;
                }
            }
            let scale = s2 / 2f64.powi(beta as i32 + 1);
            m.push(scale * acc / (1.0 - 2f64.powi(-(beta as i32))));
        }
        m
    }

    fn build_edges(&mut self, h: &[f64]) {
        let n = self.n;
        let mom = Self::moments(h, n);
        // c_alpha(shift) = ∫ x^alpha φ(x - shift) dx in the [-N+1, N] convention
        let c = |alpha: usize, shift: i64| -> f64 {
            let a = (shift - (n as i64 - 1)) as f64;
            (0..=alpha)
                .map(|b| binom(alpha, b) * a.powi((alpha - b) as i32) * mom[b])
                .sum()
        };
        let steps = self.steps();
        let span = 2 * n - 1;
        let len = span * steps + 1;
        let hstep = self.step();

        // Left edge: rows of S^{-1} with S[alpha][j] = c_alpha(j), j = 0..N.
        let s_left = square(n, |a, j| c(a, j as i64));
        let s_left_inv = invert(&s_left);
        let mut left = Vec::with_capacity(n);
        for k in 0..n {
            let coef: Vec<(i64, f64)> = std::iter::once((k as i64, 1.0))
                .chain((-(n as i64) + 1..0).map(|shift| {
                    let w: f64 = (0..n).map(|a| s_left_inv[k][a] * c(a, shift)).sum();
                    (shift, w)
                }))
                .collect();
            let mut f = vec![0.0; len];
            for (i, fi) in f.iter_mut().enumerate() {
                // φ(u - shift) with u = i h: standard index i + (N-1-shift) steps
                *fi = coef
                    .iter()
                    .map(|&(shift, w)| {
                        let idx = i as i64 + (n as i64 - 1 - shift) * steps as i64;
                        w * sample(&self.phi, idx)
                    })
                    .sum();
            }
            left.push(f);
        }
        // half weight at u = 0 (domain boundary)
        gram_schmidt(&mut left, hstep, 0);

        // Right edge: S[alpha][j] = c_alpha(-(j+1)), function k <-> column k-1.
        let s_right = square(n, |a, j| c(a, -(j as i64) - 1));
        let s_right_inv = invert(&s_right);
        let mut right = Vec::with_capacity(n);
        for k in 1..=n {
            let coef: Vec<(i64, f64)> = std::iter::once((-(k as i64), 1.0))
                .chain((0..n as i64 - 1).map(|shift| {
                    let w: f64 = (0..n).map(|a| s_right_inv[k - 1][a] * c(a, shift)).sum();
                    (shift, w)
                }))
                .collect();
            let mut f = vec![0.0; len];
            for (i, fi) in f.iter_mut().enumerate() {
                // u = -(2N-1) + i h; φ(u - shift) -> standard argument u - shift + N - 1
                *fi = coef
                    .iter()
                    .map(|&(shift, w)| {
                        let idx = i as i64 - (span as i64 - n as i64 + 1 + shift) * steps as i64;
                        w * sample(&self.phi, idx)
                    })
                    .sum();
            }
            right.push(f);
        }
        gram_schmidt(&mut right, hstep, len - 1);

        self.left = left;
        self.right = right;
    }

    /// Trapezoid inner product of two unscaled atoms on the tabulation grid.
    fn atom_inner(&self, a: &Atom, b: &Atom, size: usize) -> f64 {
        let steps = self.steps();
        let total = size * steps;
        let hstep = self.step();
        let mut s = 0.0;
        for i in 0..=total {
            let u = i as f64 * hstep;
            let va = self.atom(a, u, size);
            if va == 0.0 {
                continue;
            }
            let vb = self.atom(b, u, size);
            let w = if i == 0 || i == total { 0.5 } else { 1.0 };
            s += w * va * vb;
        }
        s * hstep
    }

    fn atom(&self, a: &Atom, u: f64, size: usize) -> f64 {
        match *a {
            Atom::Left(k) => self.left(k, u),
            Atom::Right(k) => self.right(k, u - size as f64),
        }
    }

    /// Writes the table to `path` in the versioned binary cache format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.depth.to_le_bytes())?;
        write_vec(&mut w, &self.phi)?;
        for f in self.left.iter().chain(self.right.iter()) {
            write_vec(&mut w, f)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`DaubechiesTable::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(SieveError::Numeric(format!("{}: not a wavelet table", path.display())));
        }
        let version = read_u32(&mut r)?;
        if version != CACHE_VERSION {
            return Err(SieveError::Numeric(format!(
                "{}: unsupported wavelet table version {version}",
                path.display()
            )));
        }
        let n = read_u32(&mut r)? as usize;
        let depth = read_u32(&mut r)?;
        let phi = read_vec(&mut r)?;
        let edges = if n >= 2 { n } else { 0 };
        let mut left = Vec::with_capacity(edges);
        let mut right = Vec::with_capacity(edges);
        for _ in 0..edges {
            left.push(read_vec(&mut r)?);
        }
        for _ in 0..edges {
            right.push(read_vec(&mut r)?);
        }
        Ok(DaubechiesTable { n, depth, phi, left, right })
    }

    /// Cache file name for `(N, R)` inside `dir`.
    pub fn cache_path(dir: &Path, n: usize, depth: u32) -> PathBuf {
        dir.join(format!("daubechies_n{n}_r{depth}.bin"))
    }

    /// Loads from `dir` when a matching file exists; otherwise tabulates and
    /// writes the file.
    pub fn cached(dir: &Path, n: usize, depth: u32) -> Result<Self> {
        let path = Self::cache_path(dir, n, depth);
        if path.exists() {
            let t = Self::load(&path)?;
            if t.n == n && t.depth == depth {
                return Ok(t);
            }
        }
        let t = Self::tabulate(n, depth)?;
        t.save(&path)?;
        Ok(t)
    }
}

/// Process-wide memo of tabulations, keyed by `(N, R)`.
pub fn shared_table(n: usize, depth: u32) -> Result<Arc<DaubechiesTable>> {
    static TABLES: OnceLock<Mutex<HashMap<(usize, u32), Arc<DaubechiesTable>>>> = OnceLock::new();
    let map = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = map.lock().unwrap().get(&(n, depth)) {
        return Ok(t.clone());
    }
    let t = Arc::new(DaubechiesTable::tabulate(n, depth)?);
    map.lock().unwrap().insert((n, depth), t.clone());
    Ok(t)
}

fn write_vec(w: &mut impl Write, v: &[f64]) -> Result<()> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_vec(r: &mut impl Read) -> Result<Vec<f64>> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let len = u64::from_le_bytes(b) as usize;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn square(n: usize, f: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    (0..n).map(|a| (0..n).map(|j| f(a, j)).collect()).collect()
}

/// Gauss–Jordan inverse of a small dense matrix.
fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn sample(table: &[f64], idx: i64) -> f64 {
    if idx < 0 || idx as usize >= table.len() {
        0.0
    } else {
        table[idx as usize]
    }
}

/// Linear interpolation at fractional grid position `pos`; zero outside.
fn interp(table: &[f64], pos: f64) -> f64 {
    let last = (table.len() - 1) as f64;
    if !(0.0..=last).contains(&pos) {
        return 0.0;
    }
    let i = pos.floor();
    let frac = pos - i;
    let i = i as usize;
    if frac == 0.0 || i + 1 >= table.len() {
        table[i]
    } else {
        table[i] + frac * (table[i + 1] - table[i])
    }
}

/// Gram–Schmidt in index order under the trapezoid inner product on a grid of
/// spacing `h`, with half weight at sample `boundary` (the other end of every
/// function is zero).
fn gram_schmidt(fs: &mut [Vec<f64>], h: f64, boundary: usize) {
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        let s: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        (s - 0.5 * a[boundary] * b[boundary]) * h
    };
    for k in 0..fs.len() {
        for j in 0..k {
            let p = inner(&fs[k], &fs[j]);
            let (done, rest) = fs.split_at_mut(k);
            for (x, y) in rest[0].iter_mut().zip(&done[j]) {
                *x -= p * y;
            }
        }
        let norm = inner(&fs[k], &fs[k]).sqrt();
        for x in fs[k].iter_mut() {
            *x /= norm;
        }
    }
}

/// Generator values on `m 2^{-R}`, `m = 0..=(2N-1) 2^R`.
fn cascade(h: &[f64], depth: u32) -> Result<Vec<f64>> {
    let span = h.len() - 1;
    let s2 = std::f64::consts::SQRT_2;
    // integer samples φ(0..=span)
    let mut ints = vec![0.0; span + 1];
    if span == 1 {
        ints[0] = 1.0;
    } else {
        // φ vanishes at 0 and at span; solve on 1..span-1 by power iteration
        let inner = span - 1;
        let mut v = vec![1.0 / inner as f64; inner];
        let mut delta = f64::INFINITY;
        for _ in 0..CASCADE_MAX_ITER {
            let mut next = vec![0.0; inner];
            for (a, nv) in next.iter_mut().enumerate() {
                let k = a + 1;
                for (b, vb) in v.iter().enumerate() {
                    let j = b + 1;
                    let i = 2 * k as i64 - j as i64;
                    if i >= 0 && (i as usize) < h.len() {
                        *nv += s2 * h[i as usize] * vb;
                    }
                }
            }
            let total: f64 = next.iter().sum();
            for x in next.iter_mut() {
                *x /= total;
            }
            delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if delta < 1e-16 {
                break;
            }
        }
        if delta > CASCADE_TOL {
            return Err(SieveError::Numeric(format!(
                "cascade did not converge: iterate change {delta:e} after {CASCADE_MAX_ITER} iterations"
            )));
        }
        ints[1..span].copy_from_slice(&v);
    }
    let mut cur = ints;
    for r in 1..=depth {
        let half = 1usize << (r - 1);
        let len = span * (1usize << r) + 1;
        let mut next = vec![0.0; len];
        for (m, nv) in next.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, hk) in h.iter().enumerate() {
                let idx = m as i64 - (k * half) as i64;
                if idx >= 0 && (idx as usize) < cur.len() {
                    s += hk * cur[idx as usize];
                }
            }
            *nv = s2 * s;
        }
        if span == 1 {
            // right-continuous indicator: φ(1) = 0
            next[len - 1] = 0.0;
        }
        cur = next;
    }
    Ok(cur)
}

/// Building block of a level-`J` function, in unscaled coordinates `u = 2^J x`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Atom {
    Left(usize),
    Right(usize),
}

#[derive(Clone, Debug)]
struct LevelFn {
    atoms: Vec<(Atom, f64)>,
    support: (f64, f64),
}

/// The `2^J` orthonormal scaling functions of level `J` on [0, 1].
#[derive(Clone, Debug)]
pub struct WaveletSystem {
    table: Arc<DaubechiesTable>,
    level: u32,
    size: usize,
    edges: Vec<LevelFn>,
}

impl WaveletSystem {
    pub fn new(table: Arc<DaubechiesTable>, level: u32) -> Result<Self> {
        let n = table.n;
        if level > 20 {
            return config_err(format!("wavelet level J must be at most 20, got {level}"));
        }
        let size = 1usize << level;
        if n >= 2 && size <= 2 * n {
            return config_err(format!(
                "wavelet level must satisfy 2^J > 2N: 2^{level} = {size} <= {}",
                2 * n
            ));
        }
        let mut sys = WaveletSystem { table, level, size, edges: Vec::new() };
        if n >= 2 {
            sys.build_edges();
        }
        Ok(sys)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn vanishing_moments(&self) -> usize {
        self.table.n
    }

    pub fn table(&self) -> &Arc<DaubechiesTable> {
        &self.table
    }

    fn build_edges(&mut self) {
        let n = self.table.n;
        let size = self.size as f64;
        let scale = size;
        let mut edges: Vec<LevelFn> = (0..n)
            .map(|k| LevelFn {
                atoms: vec![(Atom::Left(k), 1.0)],
                support: (0.0, (n + k) as f64 / scale),
            })
            .collect();
        let overlap = 2 * (2 * n - 1) > self.size;
        for k in 1..=n {
            let mut f = LevelFn {
                atoms: vec![(Atom::Right(k), 1.0)],
                support: (1.0 - (n + k - 1) as f64 / scale, 1.0),
            };
            if overlap {
                // orthogonalise against left edges and earlier right edges
                let mut atoms = f.atoms.clone();
                for prev in edges.iter() {
                    let p = self.combo_inner(&f.atoms, &prev.atoms);
                    if p.abs() < 1e-9 {
                        continue;
                    }
                    for &(a, w) in &prev.atoms {
                        atoms.push((a, -p * w));
                    }
                    f.support.0 = f.support.0.min(prev.support.0);
                    f.support.1 = f.support.1.max(prev.support.1);
                }
                let norm = self.combo_inner(&atoms, &atoms).sqrt();
                for a in atoms.iter_mut() {
                    a.1 /= norm;
                }
                f.atoms = atoms;
            }
            edges.push(f);
        }
        self.edges = edges;
    }

    fn combo_inner(&self, a: &[(Atom, f64)], b: &[(Atom, f64)]) -> f64 {
        let mut s = 0.0;
        for &(x, wx) in a {
            for &(y, wy) in b {
                s += wx * wy * self.table.atom_inner(&x, &y, self.size);
            }
        }
        s
    }

    fn edge_index(&self, e: usize) -> usize {
        let n = self.table.n;
        if e < n {
            e
        } else {
            // right edge k = e - n + 1 has index 2^J - k
            self.size - (e - n + 1)
        }
    }

    fn eval_edge(&self, f: &LevelFn, u: f64) -> f64 {
        f.atoms
            .iter()
            .map(|&(a, w)| w * self.table.atom(&a, u, self.size))
            .sum()
    }

    fn eval_unscaled(&self, x: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let n = self.table.n;
        if n == 1 {
            let k = ((x * self.size as f64).floor() as usize).min(self.size - 1);
            out.push((k, 1.0));
            return;
        }
        let u = x * self.size as f64;
        for (e, f) in self.edges.iter().enumerate().take(n) {
            if x >= f.support.0 && x <= f.support.1 {
                out.push((self.edge_index(e), self.eval_edge(f, u)));
            }
        }
        // interior k with u - k in (-N+1, N)
        let ni = n as i64;
        let lo = ((u - n as f64).floor() as i64 + 1).max(ni);
        let hi = ((u + n as f64 - 1.0).ceil() as i64 - 1).min(self.size as i64 - ni - 1);
        for k in lo..=hi {
            let d = u - k as f64;
            if d > -(n as f64) + 1.0 && d < n as f64 {
                out.push((k as usize, self.table.phi(d)));
            }
        }
        for (e, f) in self.edges.iter().enumerate().skip(n) {
            if x >= f.support.0 && x <= f.support.1 {
                out.push((self.edge_index(e), self.eval_edge(f, u)));
            }
        }
    }

    /// Finest grid spacing in `x` on which the functions are tabulated.
    pub fn grid_step(&self) -> f64 {
        1.0 / ((self.size as f64) * (1u64 << self.table.depth) as f64)
    }
}

impl UnivariateBasis for WaveletSystem {
    fn len(&self) -> usize {
        self.size
    }

    fn eval_active(&self, x: f64, out: &mut Vec<(usize, f64)>) {
        self.eval_unscaled(x, out);
        let s = (self.size as f64).sqrt();
        for p in out.iter_mut() {
            p.1 *= s;
        }
    }

    fn deriv_active(&self, x: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        if self.table.n == 1 {
            let k = ((x * self.size as f64).floor() as usize).min(self.size - 1);
            out.push((k, 0.0));
            return;
        }
        let h = self.grid_step();
        let (a, b) = ((x - h).max(0.0), (x + h).min(1.0));
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        self.eval_active(a, &mut lo);
        self.eval_active(b, &mut hi);
        let mut acc: Vec<(usize, f64)> = Vec::with_capacity(lo.len() + hi.len());
        for &(i, v) in &hi {
            acc.push((i, v / (b - a)));
        }
        for &(i, v) in &lo {
            match acc.iter_mut().find(|p| p.0 == i) {
                Some(p) => p.1 -= v / (b - a),
                None => acc.push((i, -v / (b - a))),
            }
        }
        acc.sort_by_key(|p| p.0);
        out.extend(acc);
    }

    fn support(&self, k: usize) -> (f64, f64) {
        let n = self.table.n;
        let s = self.size as f64;
        if n == 1 {
            return (k as f64 / s, (k + 1) as f64 / s);
        }
        if k < n {
            self.edges[k].support
        } else if k >= self.size - n {
            let rk = self.size - k;
            self.edges[n + rk - 1].support
        } else {
            ((k as f64 - n as f64 + 1.0) / s, (k + n) as f64 / s)
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        (0..=self.size).map(|j| j as f64 / self.size as f64).collect()
    }

    fn gram_rule(&self) -> QuadRule {
        if self.table.n == 1 {
            QuadRule::panels(&self.breakpoints(), 0.0, 1.0)
        } else {
            QuadRule::Trapezoid { lo: 0.0, hi: 1.0, step: self.grid_step() }
        }
    }

    fn integration_rule(&self) -> QuadRule {
        if self.table.n == 1 {
            QuadRule::panels(&self.breakpoints(), 0.0, 1.0)
        } else {
            let depth = self.table.depth.min(8);
            QuadRule::Trapezoid {
                lo: 0.0,
                hi: 1.0,
                step: 1.0 / ((self.size as f64) * (1u64 << depth) as f64),
            }
        }
    }

    fn max_active(&self) -> usize {
        2 * self.table.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn filters_are_normalised() {
        for n in 1..=3 {
            let h = daubechies_filter(n).unwrap();
            let s: f64 = h.iter().sum();
            let s2: f64 = h.iter().map(|x| x * x).sum();
            assert_abs_diff_eq!(s, std::f64::consts::SQRT_2, epsilon = 1e-14);
            assert_abs_diff_eq!(s2, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn haar_generator_is_indicator() {
        let t = DaubechiesTable::tabulate(1, 10).unwrap();
        assert_eq!(t.phi(0.0), 1.0);
        assert_eq!(t.phi(0.999), 1.0);
        assert_eq!(t.phi(1.0), 0.0);
        assert_eq!(t.phi(-0.001), 0.0);
        assert!(t.left.is_empty() && t.right.is_empty());
    }

    #[test]
    fn db2_partition_of_unity() {
        let t = DaubechiesTable::tabulate(2, 12).unwrap();
        for i in 0..=4096 {
            let u = i as f64 / 4096.0;
            let s: f64 = (-3..=3).map(|k| t.phi(u - k as f64)).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(DaubechiesTable::tabulate(4, 12).is_err());
        assert!(DaubechiesTable::tabulate(2, 9).is_err());
        let t = shared_table(2, 12).unwrap();
        assert!(WaveletSystem::new(t, 2).is_err());
    }

    #[test]
    fn moments_match_quadrature() {
        for n in 2..=3 {
            let h = daubechies_filter(n).unwrap();
            let m = DaubechiesTable::moments(&h, n);
            let t = DaubechiesTable::tabulate(n, 14).unwrap();
            let hstep = 1.0 / (1u64 << 14) as f64;
            for (beta, mb) in m.iter().enumerate() {
                let q: f64 = t
                    .phi
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (i as f64 * hstep).powi(beta as i32) * v)
                    .sum::<f64>()
                    * hstep;
                assert!((q - mb).abs() < 1e-6, "n={n} beta={beta}: {q} vs {mb}");
            }
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = DaubechiesTable::cached(dir.path(), 2, 10).unwrap();
        let again = DaubechiesTable::load(&DaubechiesTable::cache_path(dir.path(), 2, 10)).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn corrupt_cache_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        std::fs::write(&p, b"NOPE0000").unwrap();
        assert!(DaubechiesTable::load(&p).is_err());
    }
}
