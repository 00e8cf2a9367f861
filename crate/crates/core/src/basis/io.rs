//! JSON container for over-complete bases.
//!
//! ```text
//! {
//!   "format": "nfbcs-basis",
//!   "version": 1,
//!   "grid": { "side": 20.0, "height": 7.0, "step": 0.5 },
//!   "rows": 1681,
//!   "cols": 40,
//!   "provenance": [ { "factor": 1, "singular_index": 1, "singular_value": 12.3 }, ... ],
//!   "data": [ [re, im], ... ]        // rows * cols entries, column-major
//! }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CMatrix, ColumnProvenance, OvercompleteBasis};
use crate::error::{Error, Result};
use crate::forward::ScanGrid;

const FORMAT: &str = "nfbcs-basis";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BasisFile {
    format: String,
    version: u32,
    grid: ScanGrid,
    rows: usize,
    cols: usize,
    provenance: Vec<ColumnProvenance>,
    data: Vec<[f64; 2]>,
}

pub fn write_basis<W: Write>(basis: &OvercompleteBasis, writer: W) -> Result<()> {
    let m = basis.matrix();
    let file = BasisFile {
        format: FORMAT.into(),
        version: VERSION,
        grid: *basis.grid(),
        rows: m.nrows(),
        cols: m.ncols(),
        provenance: basis.provenance().to_vec(),
        // nalgebra storage is column-major already
        data: m.iter().map(|z| [z.re, z.im]).collect(),
    };
    serde_json::to_writer(writer, &file)
        .map_err(|e| Error::invalid(format!("basis serialization: {e}")))
}

pub fn read_basis<R: Read>(reader: R, origin: &str) -> Result<OvercompleteBasis> {
    let parse = |message: String| Error::Parse {
        path: origin.to_string(),
        message,
    };
    let file: BasisFile = serde_json::from_reader(reader).map_err(|e| parse(e.to_string()))?;
    if file.format != FORMAT {
        return Err(parse(format!("unexpected format tag `{}`", file.format)));
    }
    if file.version != VERSION {
        return Err(parse(format!("unsupported version {}", file.version)));
    }
    if file.data.len() != file.rows * file.cols {
        return Err(parse(format!(
            "data has {} entries, expected {} x {}",
            file.data.len(),
            file.rows,
            file.cols
        )));
    }
    let grid = file.grid.rebuilt().map_err(|e| parse(e.to_string()))?;
    let matrix = CMatrix::from_iterator(
        file.rows,
        file.cols,
        file.data.iter().map(|&[re, im]| Complex64::new(re, im)),
    );
    OvercompleteBasis::new(grid, matrix, file.provenance).map_err(|e| parse(e.to_string()))
}

pub fn save_basis(basis: &OvercompleteBasis, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_basis(basis, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_basis(path: impl AsRef<Path>) -> Result<OvercompleteBasis> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_basis(BufReader::new(file), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::build_grid;
    use proptest::prelude::*;

    fn arb_basis() -> impl Strategy<Value = OvercompleteBasis> {
        (
            1usize..4,
            prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 9 * 3),
        )
            .prop_map(|(cols, data)| {
                let grid = build_grid(1.0, 2.0, 0.5).unwrap();
                let m = CMatrix::from_iterator(
                    9,
                    cols,
                    data.into_iter()
                        .take(9 * cols)
                        .map(|(a, b)| Complex64::new(a, b)),
                );
                let prov = (0..cols)
                    .map(|q| ColumnProvenance {
                        factor: 1,
                        singular_index: q + 1,
                        singular_value: 1.0 / (q as f64 + 3.0),
                    })
                    .collect();
                OvercompleteBasis::new(grid, m, prov).unwrap()
            })
    }

    proptest! {
        #[test]
        fn roundtrip_is_lossless(basis in arb_basis()) {
            let mut buf = Vec::new();
            write_basis(&basis, &mut buf).unwrap();
            let back = read_basis(buf.as_slice(), "memory").unwrap();
            prop_assert_eq!(back, basis);
        }
    }

    #[test]
    fn rejects_wrong_shape() {
        let text = r#"{"format":"nfbcs-basis","version":1,"grid":{"side":1.0,"height":2.0,"step":0.5},
            "rows":9,"cols":1,"provenance":[{"factor":1,"singular_index":1,"singular_value":1.0}],
            "data":[[1.0,0.0]]}"#;
        assert!(matches!(
            read_basis(text.as_bytes(), "x"),
            Err(Error::Parse { .. })
        ));
        let text = text.replace("nfbcs-basis", "other");
        assert!(read_basis(text.as_bytes(), "x").is_err());
    }
}
