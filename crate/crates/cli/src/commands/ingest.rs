use std::io::Write;

use qscan_core::corpus;

use super::io_err;
use crate::args::IngestArgs;
use crate::error::CliResult;
use crate::output::{write_sidecar, AtomicFile};

pub fn run(mut a: IngestArgs) -> CliResult<()> {
    let format = a.read.resolve_format(&a.input);
    let mut docs = corpus::ingest(&a.input, format, a.read.options())?;
    let mut out = AtomicFile::create(&a.out)?;
    for doc in docs.by_ref() {
        let doc = doc?;
        let w = out.writer();
        serde_json::to_writer(&mut *w, &doc).map_err(|e| io_err(&a.out)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(&a.out))?;
    }
    let stats = docs.stats().clone();
    out.commit()?;
    write_sidecar(&a.out, "ingest", &a, serde_json::json!(stats))
}
