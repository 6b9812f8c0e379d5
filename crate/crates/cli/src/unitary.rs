//! On-disk interferometer format: the unitary `U` as row-major
//! real/imaginary pairs with the dimension in a header. `W = U Uᵗ` is
//! recomputed on load so the two matrices can never drift apart.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use gbs_core::{ComplexMatrix, InterferometerMatrix};

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
struct UnitaryFile {
    m: usize,
    /// Row-major `[re, im]` pairs, `m * m` of them.
    entries: Vec<[f64; 2]>,
}

pub fn save(path: &str, im: &InterferometerMatrix) -> Result<(), CliError> {
    let m = im.dim;
    let entries: Vec<[f64; 2]> = im.u.entries().iter().map(|z| [z.re, z.im]).collect();
    let file = UnitaryFile { m, entries };
    let text = serde_json::to_string(&file)
        .map_err(|e| CliError::internal(format!("cannot encode unitary: {e}")))?;
    std::fs::write(path, text)
        .map_err(|e| CliError::internal(format!("cannot write {path}: {e}")))
}

pub fn load(path: &str) -> Result<InterferometerMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read unitary {path}: {e}")))?;
    let file: UnitaryFile = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("bad unitary file {path}: {e}")))?;
    if file.entries.len() != file.m * file.m {
        return Err(CliError::usage(format!(
            "unitary file {path} declares m={} but holds {} entries",
            file.m,
            file.entries.len()
        )));
    }
    let u = ComplexMatrix::from_rows(
        file.m,
        file.m,
        file.entries.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
    )
    .map_err(CliError::from)?;
    InterferometerMatrix::from_unitary(u).map_err(CliError::from)
}
