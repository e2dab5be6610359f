//! The IDX container used by the MNIST distribution.

use std::fs;
use std::path::Path;

use super::DataError;

/// Unsigned-byte image stack.
#[derive(Clone, Debug, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn header(bytes: &[u8], path: &Path, dims: usize) -> Result<Vec<usize>, DataError> {
    let bad = |reason: String| DataError::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 4 + 4 * dims {
        return Err(bad("file too short for an IDX header".into()));
    }
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08 {
        return Err(bad(format!("expected unsigned-byte IDX magic, got {:02x?}", &bytes[..4])));
    }
    if bytes[3] as usize != dims {
        return Err(bad(format!("expected {dims} dimensions, found {}", bytes[3])));
    }
    let d: Vec<usize> = (0..dims)
        .map(|i| u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize)
        .collect();
    let expected = 4 + 4 * dims + d.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    Ok(d)
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    let d = header(&bytes, path, 3)?;
    Ok(IdxImages {
        count: d[0],
        rows: d[1],
        cols: d[2],
        pixels: bytes[16..].to_vec(),
    })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    header(&bytes, path, 1)?;
    Ok(bytes[8..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img");
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 1];
        bytes.extend([1, 2, 3, 4]);
        fs::write(&p, &bytes).unwrap();
        let img = read_idx_images(&p).unwrap();
        assert_eq!((img.count, img.rows, img.cols), (2, 2, 1));
        assert_eq!(img.pixels, vec![1, 2, 3, 4]);

        fs::write(&p, &bytes[..18]).unwrap();
        assert!(matches!(read_idx_images(&p), Err(DataError::Format { .. })));
        let l = dir.path().join("lab");
        fs::write(&l, [0, 0, 8, 1, 0, 0, 0, 3, 7, 8, 9]).unwrap();
        assert_eq!(read_idx_labels(&l).unwrap(), vec![7, 8, 9]);
        assert!(matches!(read_idx_images(&l), Err(DataError::Format { .. })));
    }
}
