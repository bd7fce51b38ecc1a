//! Branch-free direct interaction of one target with a run of Gaussian
//! blobs, written so the compiler vectorizes it. The exponential is a
//! polynomial after argument reduction; libm calls would serialize the
//! loop.

use crate::kernel::INV_2PI;
use crate::Vec2;

const LANES: usize = 8;

/// Signature of the block kernel: target (x, y), source coordinates and
/// weights, 1/(2ε²). Returns the velocity (u, v).
pub(crate) type BlockKernel = fn(f64, f64, &[f64], &[f64], &[f64], f64) -> (f64, f64);

/// Best available implementation for this CPU.
pub(crate) fn gaussian_block_kernel() -> BlockKernel {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            return gaussian_block_avx512_entry;
        }
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            return gaussian_block_avx2_entry;
        }
    }
    gaussian_block_portable
}

#[cfg(target_arch = "x86_64")]
fn gaussian_block_avx2_entry(x: f64, y: f64, xs: &[f64], ys: &[f64], ws: &[f64], inv_2eps2: f64) -> (f64, f64) {
    // SAFETY: only handed out after the CPU features were detected.
    unsafe { gaussian_block_avx2(x, y, xs, ys, ws, inv_2eps2) }
}

#[cfg(target_arch = "x86_64")]
fn gaussian_block_avx512_entry(x: f64, y: f64, xs: &[f64], ys: &[f64], ws: &[f64], inv_2eps2: f64) -> (f64, f64) {
    // SAFETY: as above.
    unsafe { gaussian_block_avx512(x, y, xs, ys, ws, inv_2eps2) }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,avx2,fma")]
unsafe fn gaussian_block_avx512(x: f64, y: f64, xs: &[f64], ys: &[f64], ws: &[f64], inv_2eps2: f64) -> (f64, f64) {
    gaussian_block(x, y, xs, ys, ws, inv_2eps2)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gaussian_block_avx2(x: f64, y: f64, xs: &[f64], ys: &[f64], ws: &[f64], inv_2eps2: f64) -> (f64, f64) {
    gaussian_block(x, y, xs, ys, ws, inv_2eps2)
}

fn gaussian_block_portable(x: f64, y: f64, xs: &[f64], ys: &[f64], ws: &[f64], inv_2eps2: f64) -> (f64, f64) {
    gaussian_block(x, y, xs, ys, ws, inv_2eps2)
}

#[inline(always)]
fn gaussian_block(x: f64, y: f64, xs: &[f64], ys: &[f64], ws: &[f64], inv_2eps2: f64) -> (f64, f64) {
    let n = xs.len().min(ys.len()).min(ws.len());
    let (xs, ys, ws) = (&xs[..n], &ys[..n], &ws[..n]);
    let mut u = [0.0f64; LANES];
    let mut v = [0.0f64; LANES];
    let cx = xs.chunks_exact(LANES);
    let cy = ys.chunks_exact(LANES);
    let cw = ws.chunks_exact(LANES);
    let (rx, ry, rw) = (cx.remainder(), cy.remainder(), cw.remainder());
    for ((px, py), pw) in cx.zip(cy).zip(cw) {
        let px: &[f64; LANES] = px.try_into().unwrap();
        let py: &[f64; LANES] = py.try_into().unwrap();
        let pw: &[f64; LANES] = pw.try_into().unwrap();
        for l in 0..LANES {
            let (du, dv) = pair(x, y, px[l], py[l], pw[l], inv_2eps2);
            u[l] += du;
            v[l] += dv;
        }
    }
    for ((&px, &py), &pw) in rx.iter().zip(ry).zip(rw) {
        let (du, dv) = pair(x, y, px, py, pw, inv_2eps2);
        u[0] += du;
        v[0] += dv;
    }
    let mut su = 0.0;
    let mut sv = 0.0;
    for l in 0..LANES {
        su += u[l];
        sv += v[l];
    }
    (su, sv)
}

#[inline(always)]
fn pair(x: f64, y: f64, px: f64, py: f64, w: f64, inv_2eps2: f64) -> (f64, f64) {
    let dx = x - px;
    let dy = y - py;
    let r2 = dx * dx + dy * dy;
    let m = 1.0 - exp_neg(r2 * inv_2eps2);
    let inv = if r2 > 0.0 { 1.0 / r2 } else { 0.0 };
    let f = w * m * inv * INV_2PI;
    (-f * dy, f * dx)
}

/// Source columns of a symmetric pair sum.
pub(crate) struct PairColumns<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub fx: &'a [f64],
    pub fy: &'a [f64],
    pub ws: &'a [f64],
}

/// Row of a pair sum: Σ_j w_j a(d)·(f − f_j)/|d|² with d = x − x_j and
/// a(d) = d^⊥ when `ROTATE`, d otherwise; returned together with the same
/// sum weighted by the Gaussian mass fraction 1 − e^{−|d|²/2ε²}.
/// Coincident pairs contribute 0.
pub(crate) type PairKernel = fn(Vec2, Vec2, &PairColumns, bool, f64) -> (f64, f64);

pub(crate) fn pair_kernel() -> PairKernel {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            return pair_row_avx512_entry;
        }
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            return pair_row_avx2_entry;
        }
    }
    pair_row_portable
}

#[cfg(target_arch = "x86_64")]
fn pair_row_avx512_entry(x: Vec2, f: Vec2, c: &PairColumns, rotate: bool, inv_2eps2: f64) -> (f64, f64) {
    // SAFETY: only handed out after the CPU features were detected.
    unsafe { pair_row_avx512(x, f, c, rotate, inv_2eps2) }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,avx2,fma")]
unsafe fn pair_row_avx512(x: Vec2, f: Vec2, c: &PairColumns, rotate: bool, inv_2eps2: f64) -> (f64, f64) {
    pair_row_dispatch(x, f, c, rotate, inv_2eps2)
}

#[cfg(target_arch = "x86_64")]
fn pair_row_avx2_entry(x: Vec2, f: Vec2, c: &PairColumns, rotate: bool, inv_2eps2: f64) -> (f64, f64) {
    // SAFETY: as above.
    unsafe { pair_row_avx2(x, f, c, rotate, inv_2eps2) }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn pair_row_avx2(x: Vec2, f: Vec2, c: &PairColumns, rotate: bool, inv_2eps2: f64) -> (f64, f64) {
    pair_row_dispatch(x, f, c, rotate, inv_2eps2)
}

fn pair_row_portable(x: Vec2, f: Vec2, c: &PairColumns, rotate: bool, inv_2eps2: f64) -> (f64, f64) {
    pair_row_dispatch(x, f, c, rotate, inv_2eps2)
}

#[inline(always)]
fn pair_row_dispatch(x: Vec2, f: Vec2, c: &PairColumns, rotate: bool, inv_2eps2: f64) -> (f64, f64) {
    if rotate {
        pair_row::<true>(x, f, c, inv_2eps2)
    } else {
        pair_row::<false>(x, f, c, inv_2eps2)
    }
}

#[inline(always)]
fn pair_row<const ROTATE: bool>(x: Vec2, f: Vec2, c: &PairColumns, inv_2eps2: f64) -> (f64, f64) {
    let n = c.xs.len();
    let (xs, ys, fx, fy, ws) = (&c.xs[..n], &c.ys[..n], &c.fx[..n], &c.fy[..n], &c.ws[..n]);
    let term = |px: f64, py: f64, qx: f64, qy: f64, w: f64| -> (f64, f64) {
        let dx = x.x1 - px;
        let dy = x.x2 - py;
        let r2 = dx * dx + dy * dy;
        let (ax, ay) = if ROTATE { (-dy, dx) } else { (dx, dy) };
        let inv = if r2 > 0.0 { 1.0 / r2 } else { 0.0 };
        let v = w * (ax * (f.x1 - qx) + ay * (f.x2 - qy)) * inv;
        (v, v * (1.0 - exp_neg(r2 * inv_2eps2)))
    };
    let mut a = [0.0f64; LANES];
    let mut b = [0.0f64; LANES];
    let mut it = xs
        .chunks_exact(LANES)
        .zip(ys.chunks_exact(LANES))
        .zip(fx.chunks_exact(LANES))
        .zip(fy.chunks_exact(LANES))
        .zip(ws.chunks_exact(LANES));
    for ((((px, py), qx), qy), w) in &mut it {
        let px: &[f64; LANES] = px.try_into().unwrap();
        let py: &[f64; LANES] = py.try_into().unwrap();
        let qx: &[f64; LANES] = qx.try_into().unwrap();
        let qy: &[f64; LANES] = qy.try_into().unwrap();
        let w: &[f64; LANES] = w.try_into().unwrap();
        for l in 0..LANES {
            let (u, v) = term(px[l], py[l], qx[l], qy[l], w[l]);
            a[l] += u;
            b[l] += v;
        }
    }
    let done = n / LANES * LANES;
    for k in done..n {
        let (u, v) = term(xs[k], ys[k], fx[k], fy[k], ws[k]);
        a[0] += u;
        b[0] += v;
    }
    (a.iter().sum(), b.iter().sum())
}

/// e^{−a} for a ≥ 0 (arguments beyond 700 give ~0). Relative error below
/// 1e-14.
#[inline(always)]
pub(crate) fn exp_neg(a: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // Adding 1.5·2^52 rounds to an integer held in the low mantissa bits.
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    let a = a.min(700.0);
    let kf = a * std::f64::consts::LOG2_E + SHIFTER;
    let k_bits = kf.to_bits();
    let k = kf - SHIFTER;
    let r = k * LN2_LO - (a - k * LN2_HI);
    // e^r on |r| ≤ ln2/2, degree 12.
    let mut p = 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    // 2^{−k}: the integer k sits in the low bits of k_bits.
    let scale_bits = (1023u64.wrapping_sub(k_bits & 0xFFFF_FFFF)) << 52;
    p * f64::from_bits(scale_bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{MollifierSpec, VortexBlobField};
    use crate::Vec2;

    #[test]
    fn exp_neg_matches_libm() {
        let mut a: f64 = 0.0;
        while a < 60.0 {
            let e = (-a).exp();
            assert!((exp_neg(a) - e).abs() <= 1e-14 * e, "a={a}");
            a += 0.00731;
        }
        assert!(exp_neg(1e4) < 1e-300);
    }

    #[test]
    fn block_matches_blob_kernel() {
        let g = MollifierSpec::gaussian();
        let eps = 0.05;
        let pts: Vec<Vec2> = (0..37).map(|k| Vec2::new((k as f64 * 0.37).sin() * 0.2, (k as f64 * 0.91).cos() * 0.2)).collect();
        let w: Vec<f64> = (0..37).map(|k| 1.0 + (k as f64).sin()).collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.x1).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.x2).collect();
        let target = Vec2::new(0.013, -0.021);
        let f = VortexBlobField::new(pts.clone(), w.clone(), eps, g).unwrap();
        let exact = crate::field::velocity_direct(&f, &[target, pts[3]]);
        for (t, e) in [target, pts[3]].iter().zip(&exact) {
            for k in [gaussian_block_kernel(), gaussian_block_portable as BlockKernel] {
                let (u, v) = k(t.x1, t.x2, &xs, &ys, &w, 0.5 / (eps * eps));
                assert!((u - e.x1).abs() < 1e-12 && (v - e.x2).abs() < 1e-12);
            }
        }
    }
}

#[cfg(test)]
mod bench {
    use super::*;
    #[test]
    #[ignore]
    fn throughput() {
        let n = 24;
        let xs: Vec<f64> = (0..n).map(|k| k as f64 * 0.001).collect();
        let ys = xs.clone();
        let ws = vec![1.0; n];
        for (name, k) in [("best", gaussian_block_kernel()), ("portable", gaussian_block_portable as BlockKernel)] {
            let t = std::time::Instant::now();
            let mut s = 0.0;
            for i in 0..400_000 {
                s += k(i as f64 * 1e-7, 0.0, &xs, &ys, &ws, 1250.0).0;
            }
            let ns = t.elapsed().as_secs_f64() * 1e9 / (400_000.0 * n as f64);
            println!("{name} {ns} ns/pair {s}");
        }
    }
}
