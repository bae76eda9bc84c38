use std::io::{BufRead, BufReader, Read, Write};

use super::grid::{CellField, Grid2D};
use crate::error::{Error, Result};

/// Writes `FLD2 nx ny time\n` followed by the cell values as
/// little-endian `f64`, row-major.
pub fn write_fld<W: Write>(mut w: W, field: &CellField, time: f64) -> Result<()> {
    writeln!(w, "FLD2 {} {} {}", field.grid.nx, field.grid.ny, time)?;
    let mut bytes = Vec::with_capacity(8 * field.data.len());
    for v in &field.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads a field written by [`write_fld`], returning it with its time.
pub fn read_fld<R: Read>(r: R) -> Result<(CellField, f64)> {
    let mut r = BufReader::new(r);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "FLD2" {
        return Err(Error::FieldFormat(format!("bad header `{}`", header.trim_end())));
    }
    let bad = |what: &str| Error::FieldFormat(format!("bad {what} in header"));
    let nx: usize = parts[1].parse().map_err(|_| bad("nx"))?;
    let ny: usize = parts[2].parse().map_err(|_| bad("ny"))?;
    let time: f64 = parts[3].parse().map_err(|_| bad("time"))?;
    let grid = Grid2D::new(nx, ny)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::FieldFormat(format!(
            "expected {} payload bytes, found {}",
            8 * grid.len(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((CellField::new(grid, data)?, time))
}

/// 8-bit binary PGM with `lo ↦ 0`, `hi ↦ 255`; out-of-range values
/// saturate. The top image row is the largest `y`.
pub fn write_pgm<W: Write>(mut w: W, field: &CellField, lo: f64, hi: f64) -> Result<()> {
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!("PGM range [{lo}, {hi}] is empty")));
    }
    let g = field.grid;
    write!(w, "P5\n{} {}\n255\n", g.nx, g.ny)?;
    let mut pixels = Vec::with_capacity(g.len());
    for j in (0..g.ny).rev() {
        for i in 0..g.nx {
            let t = ((field.get(i, j) - lo) / (hi - lo)).clamp(0.0, 1.0);
            pixels.push((t * 255.0).round() as u8);
        }
    }
    w.write_all(&pixels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fld_round_trip_bit_exact() {
        let g = Grid2D::new(5, 3).unwrap();
        let data: Vec<f64> = (0..15).map(|k| (k as f64 * 0.37).sin() / 3.0 - 1e-300).collect();
        let f = CellField::new(g, data).unwrap();
        let mut buf = Vec::new();
        write_fld(&mut buf, &f, 0.1 + 0.2).unwrap();
        let (back, t) = read_fld(&buf[..]).unwrap();
        assert_eq!(t.to_bits(), (0.1f64 + 0.2).to_bits());
        assert!(back.data.iter().zip(&f.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.grid, g);
    }

    #[test]
    fn fld_rejects_garbage() {
        assert!(read_fld(&b"FLD1 2 2 0\n"[..]).is_err());
        assert!(read_fld(&b"FLD2 2 2 0\n\x00\x01"[..]).is_err());
    }

    #[test]
    fn pgm_saturates() {
        let g = Grid2D::new(3, 1).unwrap();
        let f = CellField::new(g, vec![-0.5, 0.5, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &f, 0.0, 1.0).unwrap();
        let header = b"P5\n3 1\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[0, 128, 255]);
    }
}
