//! Matrix Market files: coordinate or array on input, array on output.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::DMatrix;
use nalgebra_sparse::io::load_coo_from_matrix_market_file;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use stabrad::StateMatrix;

use crate::error::{CliError, Result};

fn parse_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        msg: msg.to_string(),
    }
}

fn load_coo(path: &Path) -> Result<CooMatrix<f64>> {
    if !path.is_file() {
        return Err(parse_err(path, "file not found"));
    }
    load_coo_from_matrix_market_file(path).map_err(|e| parse_err(path, e.message()))
}

fn is_coordinate(path: &Path) -> Result<bool> {
    let file = fs::File::open(path).map_err(|e| parse_err(path, e))?;
    let mut header = String::new();
    BufReader::new(file)
        .read_line(&mut header)
        .map_err(|e| parse_err(path, e))?;
    Ok(header.to_ascii_lowercase().contains("coordinate"))
}

pub fn read_dense(path: &Path) -> Result<DMatrix<f64>> {
    Ok(DMatrix::from(&load_coo(path)?))
}

/// Coordinate files stay sparse; array files become dense.
pub fn read_state_matrix(path: &Path) -> Result<StateMatrix> {
    let coo = load_coo(path)?;
    Ok(if is_coordinate(path)? {
        StateMatrix::Sparse(CsrMatrix::from(&coo))
    } else {
        StateMatrix::Dense(DMatrix::from(&coo))
    })
}

/// Array format, column-major, 17 significant digits.
pub fn dense_to_string(m: &DMatrix<f64>) -> String {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for x in m.iter() {
        let _ = writeln!(s, "{x:.16e}");
    }
    s
}

pub fn write_dense(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    crate::output::write_atomic(path, dense_to_string(m).as_bytes())
}
