use super::superop::Superop;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// (op ⊗ 1) · m where `op` acts on `modes` (first listed mode is the slowest local index).
pub(crate) fn left_local(m: &DMatrix<C64>, dims: &[usize], modes: &[usize], op: &DMatrix<C64>) -> DMatrix<C64> {
    let n = m.nrows();
    let dl: usize = modes.iter().map(|&k| dims[k]).product();
    debug_assert_eq!(op.nrows(), dl);
    let nrest = n / dl;
    // full[loc * nrest + rest] = flat index
    let mut full = vec![0usize; n];
    let mut occ = vec![0usize; dims.len()];
    for i in 0..n {
        let mut idx = i;
        for k in (0..dims.len()).rev() {
            occ[k] = idx % dims[k];
            idx /= dims[k];
        }
        let loc = modes.iter().fold(0, |acc, &k| acc * dims[k] + occ[k]);
        let rest = (0..dims.len()).filter(|k| !modes.contains(k)).fold(0, |acc, k| acc * dims[k] + occ[k]);
        full[loc * nrest + rest] = i;
    }
    // sparse rows of the operator
    let rows: Vec<Vec<(usize, C64)>> = (0..dl)
        .map(|a| (0..dl).filter_map(|b| (op[(a, b)] != C64::new(0.0, 0.0)).then(|| (b, op[(a, b)]))).collect())
        .collect();
    let mut out = DMatrix::zeros(n, m.ncols());
    let src = m.as_slice();
    let dst = out.as_mut_slice();
    for c in 0..m.ncols() {
        let col = &src[c * n..(c + 1) * n];
        let ocol = &mut dst[c * n..(c + 1) * n];
        for r in 0..nrest {
            for (a, row) in rows.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &(b, v) in row {
                    acc += v * col[full[b * nrest + r]];
                }
                ocol[full[a * nrest + r]] = acc;
            }
        }
    }
    out
}

/// Applies a single-mode superoperator to `mode`; the mode's dimension becomes `s.dout()`.
pub(crate) fn apply_superop(m: &DMatrix<C64>, dims: &[usize], mode: usize, s: &Superop) -> DMatrix<C64> {
    let lo: usize = dims[mode + 1..].iter().product();
    let hi: usize = dims[..mode].iter().product();
    let (din, dout) = (s.din(), s.dout());
    let n_in = hi * din * lo;
    let n_out = hi * dout * lo;
    let mut out = DMatrix::zeros(n_out, n_out);
    let src = m.as_slice();
    let dst = out.as_mut_slice();
    if let Some(sectors) = s.sectors() {
        apply_sectors(src, dst, (hi, lo, din, dout), sectors);
        return out;
    }
    for &(i, j, k, l, c) in s.terms() {
        let (i, j, k, l) = (i as usize, j as usize, k as usize, l as usize);
        for a2 in 0..hi {
            for b2 in 0..lo {
                let col_in = a2 * din * lo + l * lo + b2;
                let col_out = a2 * dout * lo + j * lo + b2;
                let sc = &src[col_in * n_in..(col_in + 1) * n_in];
                let dc = &mut dst[col_out * n_out..(col_out + 1) * n_out];
                for a1 in 0..hi {
                    let ri = a1 * din * lo + k * lo;
                    let ro = a1 * dout * lo + i * lo;
                    for b1 in 0..lo {
                        dc[ro + b1] += c * sc[ri + b1];
                    }
                }
            }
        }
    }
    out
}

/// Phase-covariant path: per context, gather the local block and apply only the
/// coherence orders that are actually populated.
fn apply_sectors(src: &[C64], dst: &mut [C64], (hi, lo, din, dout): (usize, usize, usize, usize), sectors: &[Vec<(u16, u16, C64)>]) {
    let n_in = hi * din * lo;
    let n_out = hi * dout * lo;
    let zero = C64::new(0.0, 0.0);
    let mut block = vec![zero; din * din];
    for a2 in 0..hi {
        for b2 in 0..lo {
            for a1 in 0..hi {
                for b1 in 0..lo {
                    let mut any = false;
                    for l in 0..din {
                        let col = (a2 * din * lo + l * lo + b2) * n_in;
                        for k in 0..din {
                            let v = src[col + a1 * din * lo + k * lo + b1];
                            block[k * din + l] = v;
                            any |= v != zero;
                        }
                    }
                    if !any {
                        continue;
                    }
                    for (o, terms) in sectors.iter().enumerate() {
                        if terms.is_empty() {
                            continue;
                        }
                        let delta = o as i64 - (din as i64 - 1);
                        let k0 = delta.max(0) as usize;
                        let k1 = (din as i64).min(din as i64 + delta) as usize;
                        if (k0..k1).all(|k| block[k * din + (k as i64 - delta) as usize] == zero) {
                            continue;
                        }
                        for &(i, k, c) in terms {
                            let (i, k) = (i as usize, k as usize);
                            let j = (i as i64 - delta) as usize;
                            let l = (k as i64 - delta) as usize;
                            let v = block[k * din + l];
                            if v != zero {
                                dst[(a2 * dout * lo + j * lo + b2) * n_out + a1 * dout * lo + i * lo + b1] += c * v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Matrix of a†^p a^q on a mode of dimension d.
pub(crate) fn ladder_product(d: usize, dag: u32, ann: u32) -> DMatrix<C64> {
    let mut a = DMatrix::<C64>::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let mut op = DMatrix::<C64>::identity(d, d);
    for _ in 0..ann {
        op = &a * op;
    }
    for _ in 0..dag {
        op = &ad * op;
    }
    op
}
