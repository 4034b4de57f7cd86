use std::fs::{self, File, OpenOptions, TryLockError};
use std::path::PathBuf;

use super::{DataRoot, StorageError};

pub const LOCK_FILE: &str = ".writer.lock";

/// Advisory exclusive lock held by the single writer of a data root.
/// Released when dropped or when the process exits. The file stays empty so
/// that data roots written from the same inputs are byte-identical.
#[derive(Debug)]
pub struct WriterLock {
    _file: File,
    path: PathBuf,
}

impl WriterLock {
    pub fn acquire(root: &DataRoot) -> Result<Self, StorageError> {
        fs::create_dir_all(root.path()).map_err(StorageError::io(root.path()))?;
        let path = root.path().join(LOCK_FILE);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(StorageError::io(&path))?;
        match file.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => return Err(StorageError::Locked(root.path().to_path_buf())),
            Err(TryLockError::Error(e)) => return Err(StorageError::io(&path)(e)),
        }
        Ok(WriterLock { _file: file, path })
    }

    pub fn path(&self) -> &std::path::Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_writer_is_refused_until_release() {
        let dir = tempfile::tempdir().unwrap();
        let root = DataRoot::new(dir.path());
        let first = WriterLock::acquire(&root).unwrap();
        assert!(matches!(WriterLock::acquire(&root), Err(StorageError::Locked(_))));
        drop(first);
        assert!(WriterLock::acquire(&root).is_ok());
    }
}
