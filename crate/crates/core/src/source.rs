//! Random-access byte sources the reader operates on.

use std::fs::File;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

/// Positioned, cursor-free reads. Implementations must allow concurrent
/// `read_at` calls from several threads.
pub trait ByteSource: Send + Sync {
    fn len(&self) -> u64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fills `buf` from `offset`. Reading past the end is an
    /// [`io::ErrorKind::UnexpectedEof`] error, never a short read.
    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()>;

    fn read_at(&self, offset: u64, len: usize) -> io::Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.read_exact_at(offset, &mut buf)?;
        Ok(buf)
    }
}

impl<S: ByteSource + ?Sized> ByteSource for &S {
    fn len(&self) -> u64 {
        (**self).len()
    }

    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        (**self).read_exact_at(offset, buf)
    }
}

impl<S: ByteSource + ?Sized> ByteSource for Box<S> {
    fn len(&self) -> u64 {
        (**self).len()
    }

    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        (**self).read_exact_at(offset, buf)
    }
}

impl<S: ByteSource + ?Sized> ByteSource for std::sync::Arc<S> {
    fn len(&self) -> u64 {
        (**self).len()
    }

    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        (**self).read_exact_at(offset, buf)
    }
}

fn eof(what: &str) -> io::Error {
    io::Error::new(io::ErrorKind::UnexpectedEof, what.to_owned())
}

/// Local file, read with positioned reads.
#[derive(Debug)]
pub struct FileSource {
    #[cfg(unix)]
    file: File,
    #[cfg(not(unix))]
    file: std::sync::Mutex<File>,
    len: u64,
}

impl FileSource {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        Self::new(File::open(path)?)
    }

    pub fn new(file: File) -> io::Result<Self> {
        let len = file.metadata()?.len();
        Ok(FileSource {
            #[cfg(unix)]
            file,
            #[cfg(not(unix))]
            file: std::sync::Mutex::new(file),
            len,
        })
    }
}

impl ByteSource for FileSource {
    fn len(&self) -> u64 {
        self.len
    }

    #[cfg(unix)]
    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        use std::os::unix::fs::FileExt;
        if offset.saturating_add(buf.len() as u64) > self.len {
            return Err(eof("read past end of file"));
        }
        self.file.read_exact_at(buf, offset)
    }

    #[cfg(not(unix))]
    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        use std::io::{Read, Seek, SeekFrom};
        if offset.saturating_add(buf.len() as u64) > self.len {
            return Err(eof("read past end of file"));
        }
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.seek(SeekFrom::Start(offset))?;
        file.read_exact(buf)
    }
}

/// In-memory buffer.
#[derive(Debug, Clone, Default)]
pub struct MemorySource {
    data: Vec<u8>,
}

impl MemorySource {
    pub fn new(data: Vec<u8>) -> Self {
        MemorySource { data }
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.data
    }
}

impl ByteSource for MemorySource {
    fn len(&self) -> u64 {
        self.data.len() as u64
    }

    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        let start = usize::try_from(offset).map_err(|_| eof("offset beyond end of data"))?;
        let end = start
            .checked_add(buf.len())
            .filter(|&end| end <= self.data.len())
            .ok_or_else(|| eof("read past end of data"))?;
        buf.copy_from_slice(&self.data[start..end]);
        Ok(())
    }
}

/// Wraps a source and counts the bytes and calls that pass through it.
#[derive(Debug)]
pub struct CountingSource<S> {
    inner: S,
    bytes: AtomicU64,
    reads: AtomicU64,
}

impl<S> CountingSource<S> {
    pub fn new(inner: S) -> Self {
        CountingSource {
            inner,
            bytes: AtomicU64::new(0),
            reads: AtomicU64::new(0),
        }
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes.load(Ordering::Relaxed)
    }

    pub fn read_calls(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.bytes.store(0, Ordering::Relaxed);
        self.reads.store(0, Ordering::Relaxed);
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: ByteSource> ByteSource for CountingSource<S> {
    fn len(&self) -> u64 {
        self.inner.len()
    }

    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.bytes.fetch_add(buf.len() as u64, Ordering::Relaxed);
        self.inner.read_exact_at(offset, buf)
    }
}

#[cfg(feature = "http")]
pub use http::HttpSource;

#[cfg(feature = "http")]
mod http {
    use std::io;

    use super::{eof, ByteSource};

    /// Remote file fetched with `Range: bytes=a-b` requests, one request per
    /// read. Plain `http://` only.
    #[derive(Debug)]
    pub struct HttpSource {
        agent: ureq::Agent,
        url: String,
        len: u64,
    }

    fn to_io(e: ureq::Error) -> io::Error {
        io::Error::other(e)
    }

    impl HttpSource {
        /// Issues a `HEAD` request to learn the length.
        pub fn open(url: impl Into<String>) -> io::Result<Self> {
            let url = url.into();
            let agent = ureq::Agent::new_with_defaults();
            let resp = agent.head(&url).call().map_err(to_io)?;
            let len = resp
                .headers()
                .get("content-length")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| io::Error::other("server sent no Content-Length"))?;
            Ok(HttpSource { agent, url, len })
        }

        pub fn url(&self) -> &str {
            &self.url
        }
    }

    impl ByteSource for HttpSource {
        fn len(&self) -> u64 {
            self.len
        }

        fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
            if buf.is_empty() {
                return Ok(());
            }
            let end = offset
                .checked_add(buf.len() as u64)
                .filter(|&end| end <= self.len)
                .ok_or_else(|| eof("read past end of remote file"))?;
            let mut resp = self
                .agent
                .get(&self.url)
                .header("Range", format!("bytes={offset}-{}", end - 1))
                .call()
                .map_err(to_io)?;
            if resp.status().as_u16() != 206 {
                return Err(io::Error::other(format!(
                    "expected 206 Partial Content, got {}",
                    resp.status()
                )));
            }
            let body = resp
                .body_mut()
                .with_config()
                .limit(buf.len() as u64 + 1)
                .read_to_vec()
                .map_err(to_io)?;
            if body.len() != buf.len() {
                return Err(eof("short range response"));
            }
            buf.copy_from_slice(&body);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn memory_source_reads() {
        let src = MemorySource::new(b"hello world".to_vec());
        assert_eq!(src.read_at(6, 5).unwrap(), b"world");
        assert_eq!(src.read_at(11, 0).unwrap(), b"");
        assert_eq!(
            src.read_at(7, 5).unwrap_err().kind(),
            io::ErrorKind::UnexpectedEof
        );
        assert!(src.read_at(u64::MAX, 1).is_err());
    }

    #[test]
    fn file_source_reads() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"abcdef").unwrap();
        let src = FileSource::open(f.path()).unwrap();
        assert_eq!(src.len(), 6);
        assert_eq!(src.read_at(1, 3).unwrap(), b"bcd");
        assert!(src.read_at(4, 3).is_err());
    }

    #[test]
    fn counting_source_counts() {
        let src = CountingSource::new(MemorySource::new(vec![0; 100]));
        src.read_at(0, 10).unwrap();
        src.read_at(50, 5).unwrap();
        assert_eq!(src.bytes_read(), 15);
        assert_eq!(src.read_calls(), 2);
        src.reset();
        assert_eq!(src.bytes_read(), 0);
    }
}
