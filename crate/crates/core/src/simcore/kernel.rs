//! Bit-masked application of small dense matrices to amplitude buffers.
//!
//! Qubit `q` of an `n`-qubit register lives at bit `n - 1 - q` of the
//! amplitude index, so qubit 0 is the most significant bit.

use num_complex::Complex64;

#[inline]
pub(crate) fn bit_of(n_qubits: usize, qubit: usize) -> usize {
    1usize << (n_qubits - 1 - qubit)
}

/// Applies the `2^k x 2^k` row-major matrix `m` to the listed qubits, in
/// place. The first listed qubit is the most significant index of `m`.
pub(crate) fn apply_matrix(amps: &mut [Complex64], n_qubits: usize, qubits: &[usize], m: &[Complex64]) {
    let k = qubits.len();
    let sub = 1usize << k;
    debug_assert_eq!(amps.len(), 1usize << n_qubits);
    debug_assert_eq!(m.len(), sub * sub);

    let offsets: Vec<usize> = (0..sub)
        .map(|r| {
            (0..k)
                .filter(|&j| r & (1 << (k - 1 - j)) != 0)
                .map(|j| bit_of(n_qubits, qubits[j]))
                .sum()
        })
        .collect();

    let mut positions: Vec<usize> = qubits.iter().map(|&q| n_qubits - 1 - q).collect();
    positions.sort_unstable();

    let mut gathered = vec![Complex64::new(0.0, 0.0); sub];
    for t in 0..(1usize << (n_qubits - k)) {
        // Spread the free bits of `t` around the target bit positions.
        let mut base = t;
        for &p in &positions {
            let low = base & ((1 << p) - 1);
            base = ((base >> p) << (p + 1)) | low;
        }
        for (g, &off) in gathered.iter_mut().zip(&offsets) {
            *g = amps[base + off];
        }
        for (r, &off) in offsets.iter().enumerate() {
            let row = &m[r * sub..(r + 1) * sub];
            amps[base + off] = row.iter().zip(&gathered).map(|(a, b)| a * b).sum();
        }
    }
}

/// Row-major Kronecker product of two square matrices.
pub(crate) fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let da = (a.len() as f64).sqrt().round() as usize;
    let db = (b.len() as f64).sqrt().round() as usize;
    let d = da * db;
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..da {
        for j in 0..da {
            let aij = a[i * da + j];
            for k in 0..db {
                for l in 0..db {
                    out[(i * db + k) * d + j * db + l] = aij * b[k * db + l];
                }
            }
        }
    }
    out
}

/// Row-major product `a * b` of two square matrices of equal size.
pub(crate) fn matmul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let d = (a.len() as f64).sqrt().round() as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

/// Conjugate transpose of a square row-major matrix.
pub(crate) fn adjoint(a: &[Complex64]) -> Vec<Complex64> {
    let d = (a.len() as f64).sqrt().round() as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j].conj();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn x_on_middle_qubit_flips_that_bit() {
        let x = [c(0.0), c(1.0), c(1.0), c(0.0)];
        let mut amps = vec![c(0.0); 8];
        amps[0b000] = c(1.0);
        apply_matrix(&mut amps, 3, &[1], &x);
        assert_eq!(amps[0b010], c(1.0));
        assert_eq!(amps.iter().filter(|a| a.norm() > 0.0).count(), 1);
    }

    #[test]
    fn operand_order_selects_matrix_significance() {
        // CX with control listed first: |10> -> |11>, on qubits (2, 0) of 3.
        let cx = [
            c(1.0), c(0.0), c(0.0), c(0.0),
            c(0.0), c(1.0), c(0.0), c(0.0),
            c(0.0), c(0.0), c(0.0), c(1.0),
            c(0.0), c(0.0), c(1.0), c(0.0),
        ];
        let mut amps = vec![c(0.0); 8];
        amps[0b001] = c(1.0); // qubit 2 set
        apply_matrix(&mut amps, 3, &[2, 0], &cx);
        assert_eq!(amps[0b101], c(1.0));
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = [c(1.0), c(0.0), c(0.0), c(1.0)];
        let k = kron(&i2, &i2);
        for r in 0..4 {
            for col in 0..4 {
                assert_eq!(k[r * 4 + col], c(if r == col { 1.0 } else { 0.0 }));
            }
        }
    }
}
