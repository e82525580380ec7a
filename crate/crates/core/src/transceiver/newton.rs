//! Damped Gauss-Newton refinement for a cyclic component of the leakage
//! problem. Every scalar leakage `u_p^H G v_q` is bilinear in `conj(u_p)` and
//! `v_q`, so the minimum-norm step solves `(J J^H + mu I) y = f` by conjugate
//! gradients and moves by `-J^H y`.

use num_complex::Complex64;

use crate::linalg::CMat;

/// One scalar equation `f = w^T a_part + ...` linearized at the current point.
struct Equation {
    /// `G v_q`, coefficients of `conj(u_p)`; empty when the decoder is fixed.
    a: Vec<Complex64>,
    w_offset: Option<usize>,
    /// `u_p^H G` transposed, coefficients of `v_q`; empty when the precoder is fixed.
    b: Vec<Complex64>,
    v_offset: Option<usize>,
    value: Complex64,
}

/// A leakage block `U^H G V` with where its free columns live in the step vector.
pub(super) struct Block<'a> {
    pub u: &'a CMat,
    pub g: &'a CMat,
    pub v: &'a CMat,
    /// Offset of the decoder in the step vector, if it is free.
    pub u_offset: Option<usize>,
    pub v_offset: Option<usize>,
}

pub(super) struct Linearization {
    eqs: Vec<Equation>,
    len: usize,
}

impl Linearization {
    pub fn new(blocks: &[Block<'_>], len: usize) -> Self {
        let mut eqs = Vec::new();
        for blk in blocks {
            let gv = blk.g * blk.v;
            let uhg = blk.u.adjoint() * blk.g;
            let (n, m) = blk.g.shape();
            for p in 0..blk.u.ncols() {
                for q in 0..blk.v.ncols() {
                    let value = (0..n).map(|i| blk.u[(i, p)].conj() * gv[(i, q)]).sum();
                    eqs.push(Equation {
                        a: if blk.u_offset.is_some() { gv.column(q).iter().copied().collect() } else { Vec::new() },
                        w_offset: blk.u_offset.map(|o| o + p * n),
                        b: if blk.v_offset.is_some() { uhg.row(p).iter().copied().collect() } else { Vec::new() },
                        v_offset: blk.v_offset.map(|o| o + q * m),
                        value,
                    });
                }
            }
        }
        Self { eqs, len }
    }

    pub fn residual(&self) -> Vec<Complex64> {
        self.eqs.iter().map(|e| e.value).collect()
    }

    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (e, o) in self.eqs.iter().zip(out.iter_mut()) {
            let mut acc = Complex64::new(0.0, 0.0);
            if let Some(w) = e.w_offset {
                for (i, a) in e.a.iter().enumerate() {
                    acc += a * x[w + i];
                }
            }
            if let Some(v) = e.v_offset {
                for (i, b) in e.b.iter().enumerate() {
                    acc += b * x[v + i];
                }
            }
            *o = acc;
        }
    }

    fn adjoint(&self, y: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (e, &yy) in self.eqs.iter().zip(y) {
            if let Some(w) = e.w_offset {
                for (i, a) in e.a.iter().enumerate() {
                    out[w + i] += a.conj() * yy;
                }
            }
            if let Some(v) = e.v_offset {
                for (i, b) in e.b.iter().enumerate() {
                    out[v + i] += b.conj() * yy;
                }
            }
        }
    }

    /// Damped minimum-norm step in `(conj(u), v)` coordinates.
    pub fn step(&self, mu: f64, max_cg: usize) -> Vec<Complex64> {
        let f = self.residual();
        let m = f.len();
        let fnorm = norm(&f);
        let forcing = (0.1f64).min(fnorm).max(1e-12);
        let mut y = vec![Complex64::new(0.0, 0.0); m];
        let mut r = f.clone();
        let mut p = r.clone();
        let mut rs = dot(&r, &r).re;
        let mut tmp = vec![Complex64::new(0.0, 0.0); self.len];
        let mut ap = vec![Complex64::new(0.0, 0.0); m];
        for _ in 0..max_cg {
            if rs.sqrt() <= forcing * fnorm {
                break;
            }
            self.adjoint(&p, &mut tmp);
            self.apply(&tmp, &mut ap);
            for (a, pp) in ap.iter_mut().zip(&p) {
                *a += pp * mu;
            }
            let curv = dot(&p, &ap).re;
            if curv <= 0.0 {
                break;
            }
            let alpha = rs / curv;
            for i in 0..m {
                y[i] += p[i] * alpha;
                r[i] -= ap[i] * alpha;
            }
            let rs_new = dot(&r, &r).re;
            let beta = rs_new / rs;
            rs = rs_new;
            for i in 0..m {
                p[i] = r[i] + p[i] * beta;
            }
        }
        let mut dx = vec![Complex64::new(0.0, 0.0); self.len];
        self.adjoint(&y, &mut dx);
        dx.iter_mut().for_each(|z| *z = -*z);
        dx
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
