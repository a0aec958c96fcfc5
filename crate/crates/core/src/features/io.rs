//! Feature matrices on disk: a `DTNS` tensor file plus a `.meta` key=value
//! sidecar holding the session id and frame geometry.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{FeatureMatrix, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_feature_matrix<T: Scalar>(path: &Path, f: &FeatureMatrix<T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f.frames.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
    let meta = format!(
        "session_id={}\nframes={}\ndim={}\nframe_len_ms={}\nframe_shift_ms={}\n",
        f.session_id,
        f.num_frames(),
        FEATURE_DIM,
        f.frame_len_ms,
        f.frame_shift_ms
    );
    let side = sidecar_path(path);
    std::fs::write(&side, meta).map_err(|e| Error::io(side, e))
}

pub fn read_feature_matrix<T: Scalar>(path: &Path) -> Result<FeatureMatrix<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let frames = Tensor::read_from(&mut BufReader::new(file))?;
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let mut session_id = None;
    let mut len_ms = None;
    let mut shift_ms = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key=value in {}", side.display()),
        })?;
        let parse_u32 = |v: &str| {
            v.trim().parse::<u32>().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad integer '{}'", v),
            })
        };
        match k.trim() {
            "session_id" => session_id = Some(v.trim().to_string()),
            "frame_len_ms" => len_ms = Some(parse_u32(v)?),
            "frame_shift_ms" => shift_ms = Some(parse_u32(v)?),
            _ => {}
        }
    }
    let session_id = session_id.ok_or_else(|| Error::Format(format!("{} lacks session_id", side.display())))?;
    let mut f = FeatureMatrix::new(session_id, frames)?;
    f.frame_len_ms = len_ms.unwrap_or(f.frame_len_ms);
    f.frame_shift_ms = shift_ms.unwrap_or(f.frame_shift_ms);
    Ok(f)
}
