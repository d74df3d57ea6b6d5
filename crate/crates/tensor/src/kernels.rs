use crate::error::{Result, TensorError};
use crate::tensor::{broadcast_map, broadcast_shapes};

#[inline]
pub(crate) fn axpy(dst: &mut [f64], src: &[f64], alpha: f64) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

/// Batched matrix product layout, with per-batch source offsets resolved once.
pub(crate) struct MatMulPlan {
    batch: Vec<usize>,
    m: usize,
    k: usize,
    n: usize,
    a_batch: Vec<usize>,
    b_batch: Vec<usize>,
}

impl MatMulPlan {
    pub(crate) fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() < 2 || b.len() < 2 {
            return Err(TensorError::dim(
                "matmul",
                format!("operands need rank >= 2, got {:?} and {:?}", a, b),
            ));
        }
        let (ab, am) = a.split_at(a.len() - 2);
        let (bb, bm) = b.split_at(b.len() - 2);
        if am[1] != bm[0] {
            return Err(TensorError::dim(
                "matmul",
                format!("inner extents differ: {:?} x {:?}", a, b),
            ));
        }
        let batch = broadcast_shapes("matmul", ab, bb)
            .map_err(|_| TensorError::dim("matmul", format!("batch extents of {:?} and {:?} do not broadcast", a, b)))?;
        let a_batch = batch_map(ab, &batch)?;
        let b_batch = batch_map(bb, &batch)?;
        Ok(MatMulPlan { batch, m: am[0], k: am[1], n: bm[1], a_batch, b_batch })
    }

    pub(crate) fn out_shape(&self) -> Vec<usize> {
        let mut s = self.batch.clone();
        s.push(self.m);
        s.push(self.n);
        s
    }

    pub(crate) fn forward(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let (m, k, n) = (self.m, self.k, self.n);
        let mut out = vec![0.0; self.a_batch.len() * m * n];
        for (bi, o) in out.chunks_mut(m * n).enumerate() {
            let a = &a[self.a_batch[bi] * m * k..][..m * k];
            let b = &b[self.b_batch[bi] * k * n..][..k * n];
            for i in 0..m {
                let orow = &mut o[i * n..(i + 1) * n];
                for p in 0..k {
                    axpy(orow, &b[p * n..(p + 1) * n], a[i * k + p]);
                }
            }
        }
        out
    }

    /// `ga += g · bᵀ`, summed over broadcast batch positions.
    pub(crate) fn grad_a(&self, g: &[f64], b: &[f64], ga: &mut [f64]) {
        let (m, k, n) = (self.m, self.k, self.n);
        // bᵀ per distinct source block, so the inner loop is a contiguous axpy
        let mut bt = vec![0.0; k * n];
        let mut cached = usize::MAX;
        for (bi, gblk) in g.chunks(m * n).enumerate() {
            if self.b_batch[bi] != cached {
                cached = self.b_batch[bi];
                let b = &b[cached * k * n..][..k * n];
                for p in 0..k {
                    for j in 0..n {
                        bt[j * k + p] = b[p * n + j];
                    }
                }
            }
            let ga = &mut ga[self.a_batch[bi] * m * k..][..m * k];
            for i in 0..m {
                let grow = &gblk[i * n..(i + 1) * n];
                let garow = &mut ga[i * k..(i + 1) * k];
                for (j, &gij) in grow.iter().enumerate() {
                    axpy(garow, &bt[j * k..(j + 1) * k], gij);
                }
            }
        }
    }

    /// `gb += aᵀ · g`, summed over broadcast batch positions.
    pub(crate) fn grad_b(&self, g: &[f64], a: &[f64], gb: &mut [f64]) {
        let (m, k, n) = (self.m, self.k, self.n);
        for (bi, gblk) in g.chunks(m * n).enumerate() {
            let a = &a[self.a_batch[bi] * m * k..][..m * k];
            let gb = &mut gb[self.b_batch[bi] * k * n..][..k * n];
            for i in 0..m {
                let grow = &gblk[i * n..(i + 1) * n];
                for p in 0..k {
                    axpy(&mut gb[p * n..(p + 1) * n], grow, a[i * k + p]);
                }
            }
        }
    }
}

fn batch_map(src: &[usize], batch: &[usize]) -> Result<Vec<usize>> {
    if batch.is_empty() {
        return Ok(vec![0]);
    }
    broadcast_map("matmul", src, batch)
}
