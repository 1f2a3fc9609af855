//! Lower-triangular Toeplitz input matrices that express discrete Volterra
//! convolution as a linear system in the kernel coefficients.
//!
//! Entry `(i, j)` holds `u(i - j)^p` for `i >= j` and zero above the band,
//! so `y = U_p h_p` is the order-p diagonal convolution
//! `y_i = sum_j h_j u_{i-j}^p`.

use ndarray::{Array1, Array2};

use crate::error::{Result, RomError};
use crate::signals::{TimeGrid, TimeSignal};

/// Identifies the signal an [`InputMatrix`] was assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalFingerprint {
    pub len: usize,
    pub dt_bits: u64,
    pub checksum: u64,
}

impl SignalFingerprint {
    fn of(signal: &TimeSignal) -> Self {
        // FNV-1a over the raw value bits
        let mut hash: u64 = 0xcbf29ce484222325;
        for v in signal.values() {
            for byte in v.to_bits().to_le_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x100000001b3);
            }
        }
        Self {
            len: signal.len(),
            dt_bits: signal.grid().dt().to_bits(),
            checksum: hash,
        }
    }

    pub fn dt(&self) -> f64 {
        f64::from_bits(self.dt_bits)
    }
}

/// Dense `n x m` input matrix of order `p` in {1, 2, 3}.
#[derive(Debug, Clone)]
pub struct InputMatrix {
    data: Array2<f64>,
    order: u8,
    source: SignalFingerprint,
}

/// Assembles the input matrix for `signal` with `memory_depth` columns and
/// entries raised to `power`.
pub fn build_input_matrix(
    signal: &TimeSignal,
    memory_depth: usize,
    power: u8,
) -> Result<InputMatrix> {
    if !(1..=3).contains(&power) {
        return Err(RomError::InvalidArgument(format!(
            "kernel order must be 1, 2 or 3, got {power}"
        )));
    }
    let n = signal.len();
    if memory_depth == 0 || memory_depth > n {
        return Err(RomError::InvalidArgument(format!(
            "memory depth must satisfy 1 <= m <= {n}, got {memory_depth}"
        )));
    }
    let u = signal.values();
    let data = Array2::from_shape_fn((n, memory_depth), |(i, j)| {
        if i >= j {
            u[i - j].powi(i32::from(power))
        } else {
            0.0
        }
    });
    Ok(InputMatrix {
        data,
        order: power,
        source: SignalFingerprint::of(signal),
    })
}

impl InputMatrix {
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn source(&self) -> SignalFingerprint {
        self.source
    }

    pub fn num_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn memory_depth(&self) -> usize {
        self.data.ncols()
    }

    /// Multiplies the matrix into a kernel, producing the response signal on
    /// the source grid.
    pub fn convolve(&self, kernel: &Array1<f64>) -> Result<TimeSignal> {
        if kernel.len() != self.memory_depth() {
            return Err(RomError::DimensionMismatch(format!(
                "kernel has {} entries, matrix has {} columns",
                kernel.len(),
                self.memory_depth()
            )));
        }
        let y = self.data.dot(kernel);
        let grid = TimeGrid::new(self.source.dt(), self.source.len)?;
        TimeSignal::new(grid, y)
    }
}
