//! Binary container for a completed ratings matrix.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes            | content                           |
//! |------------------|-----------------------------------|
//! | 8                | magic `BAICR\0\0\0`               |
//! | 4                | format version (`u32`)            |
//! | 4                | users `U` (`u32`)                 |
//! | 4                | movies `M` (`u32`)                |
//! | 4 * M            | original movie ids (`u32`)        |
//! | 8 * U * M        | ratings (`f64`), movie-major      |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use super::movielens::CompletedRatings;
use crate::error::{Error, Result};

pub const STORE_MAGIC: &[u8; 8] = b"BAICR\0\0\0";
pub const STORE_VERSION: u32 = 1;

pub fn write_completed(path: &Path, completed: &CompletedRatings) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(STORE_MAGIC)?;
    out.write_all(&STORE_VERSION.to_le_bytes())?;
    out.write_all(&(completed.users as u32).to_le_bytes())?;
    out.write_all(&(completed.num_movies() as u32).to_le_bytes())?;
    for id in &completed.movie_ids {
        out.write_all(&id.to_le_bytes())?;
    }
    for col in &completed.columns {
        for v in col.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Parse {
            path: self.path.to_path_buf(),
            line: 0,
            message: format!("truncated at byte {}", self.pos),
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn read_completed(path: &Path) -> Result<CompletedRatings> {
    let bytes = fs::read(path)?;
    let bad = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message,
    };
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if cur.take(8)? != STORE_MAGIC {
        return Err(bad("not a completed-ratings file".into()));
    }
    let version = cur.u32()?;
    if version != STORE_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let users = cur.u32()? as usize;
    let movies = cur.u32()? as usize;
    let movie_ids = (0..movies).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
    let columns = (0..movies)
        .map(|_| {
            let raw = cur.take(users * 8)?;
            Ok(raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect::<Arc<[f64]>>())
        })
        .collect::<Result<Vec<_>>>()?;
    if cur.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    CompletedRatings::from_columns(users, movie_ids, columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CompletedRatings {
        let cols = vec![
            Arc::from(vec![1.0, 2.5, -0.125]),
            Arc::from(vec![f64::MIN_POSITIVE, 4.0, 1e300]),
        ];
        CompletedRatings::from_columns(3, vec![17, 4000], cols).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let c = sample();
        write_completed(&path, &c).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 8 + 12 + 8 + 48);
        assert_eq!(read_completed(&path).unwrap(), c);
    }

    #[test]
    fn rejects_wrong_magic_version_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        write_completed(&path, &sample()).unwrap();
        let good = fs::read(&path).unwrap();

        let mut bytes = good.clone();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(read_completed(&path).is_err());

        let mut bytes = good.clone();
        bytes[8] = 9;
        fs::write(&path, &bytes).unwrap();
        assert!(read_completed(&path).is_err());

        fs::write(&path, &good[..good.len() - 3]).unwrap();
        assert!(read_completed(&path).is_err());
    }
}
