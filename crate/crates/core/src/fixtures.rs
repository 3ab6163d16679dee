//! Analytic test fixtures with known spectra, exponents, and kappa values.
//! Everything here is closed-form checkable, which is what makes the
//! acceptance battery property-based rather than snapshot-based.

use nalgebra::DMatrix;

use crate::base::BaseSystem;
use crate::cocycle::{Cocycle, Generator};
use crate::quasicompact::{NoncompactnessModel, WeightForm};

/// diag(2, 1/2) over a one-point base: exponents exactly {log 2, -log 2}.
pub fn constant_diag2() -> Cocycle {
    Cocycle::new(
        BaseSystem::FinitePeriodic { period: 1 },
        Generator::Constant {
            matrix: DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]),
        },
    )
    .expect("valid constant generator")
}

/// diag(4, 2, 1/2, 1/4): four simple exponents.
pub fn constant_diag4() -> Cocycle {
    Cocycle::new(
        BaseSystem::FinitePeriodic { period: 1 },
        Generator::Constant {
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[4.0, 2.0, 0.5, 0.25])),
        },
    )
    .expect("valid constant generator")
}

/// Upper-triangular [[2,1],[0,1/2]]: exponents are the eigenvalue moduli
/// {log 2, -log 2}, not the one-step singular values.
pub fn shear2() -> Cocycle {
    Cocycle::new(
        BaseSystem::FinitePeriodic { period: 1 },
        Generator::Constant {
            matrix: DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]),
        },
    )
    .expect("valid constant generator")
}

/// Scalar cocycle over the full 2-shift with log-values c_0 = 0, c_1 = 1:
/// the spectrum is the interval [0, 1] of attainable symbol frequencies.
pub fn scalar_shift() -> Cocycle {
    Cocycle::new(
        BaseSystem::FullShift { alphabet: 2 },
        Generator::ScalarBlocks {
            alphabet: 2,
            block_len: 1,
            log_values: vec![0.0, 1.0],
        },
    )
    .expect("valid scalar generator")
}

/// [`scalar_shift`] with the value at the 4-symbol window 0111 raised to
/// 1.5. Occurrences of that window cannot overlap, so the top of the
/// spectrum moves to (1.5 + 1 + 1 + 1)/4 = 9/8, attained only by the
/// period-4 orbit of 0111; any measure family missing that orbit cannot
/// realize the top endpoint.
pub fn corrupted_scalar_shift() -> Cocycle {
    let log_values = (0..16)
        .map(|code| {
            if code == 0b0111 {
                1.5
            } else {
                // Leading symbol of the window, as in the clean fixture.
                (code >> 3) as f64
            }
        })
        .collect();
    Cocycle::new(
        BaseSystem::FullShift { alphabet: 2 },
        Generator::ScalarBlocks {
            alphabet: 2,
            block_len: 4,
            log_values,
        },
    )
    .expect("valid scalar generator")
}

/// Truncated diagonal operator diag(2, w_1, ..., w_truncation) with
/// w_k = 1/2 + 1/k, carrying the tail model for everything above the
/// truncation: kappa = log(w_{truncation+1}), top exponent log 2.
pub fn diagonal_tail(truncation: usize) -> Cocycle {
    let mut weights = Vec::with_capacity(truncation + 1);
    weights.push(2.0);
    let form = WeightForm::HalfPlusInvK;
    for k in 1..=truncation {
        weights.push(form.weight(k));
    }
    Cocycle::with_model(
        BaseSystem::FinitePeriodic { period: 1 },
        Generator::Constant {
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&weights)),
        },
        NoncompactnessModel::DiagonalTail { form, truncation },
    )
    .expect("valid diagonal tail generator")
}

/// Constant shear over the golden-mean circle rotation: the base is
/// uniquely ergodic (Lebesgue), exponents still {log 2, -log 2}.
pub fn golden_rotation_shear() -> Cocycle {
    Cocycle::new(
        BaseSystem::CircleRotation {
            rho: (5.0f64.sqrt() - 1.0) / 2.0,
        },
        Generator::Constant {
            matrix: DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]),
        },
    )
    .expect("valid rotation generator")
}

/// The standard battery: every fixture with exactly known structure, used
/// by the blanket invariants (subadditivity, dichotomy soundness, MET
/// structure). The deliberately corrupted fixture is excluded; it exists to
/// exercise failure reporting, not to pass invariants.
pub fn all_fixtures() -> Vec<(&'static str, Cocycle)> {
    vec![
        ("constant_diag2", constant_diag2()),
        ("constant_diag4", constant_diag4()),
        ("shear2", shear2()),
        ("scalar_shift", scalar_shift()),
        ("diagonal_tail_64", diagonal_tail(64)),
        ("golden_rotation_shear", golden_rotation_shear()),
    ]
}
