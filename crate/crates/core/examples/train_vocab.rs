//! Regenerate the bundled BPE merge table.
//!
//! ```text
//! cargo run --release -p factsel-core --example train_vocab -- /usr/lib/python3.10 4000 crates/core/data/bpe-v1.merges
//! ```
//!
//! Reads `*.py` files under the source directory in sorted path order, up to
//! a fixed byte budget, so the output is reproducible for a given tree. The
//! table starts with the run merges from `run_merges`.

use std::path::{Path, PathBuf};

use factsel_core::prompt::tokenizer::{format_merges, run_merges, train_bpe};

const BYTE_BUDGET: usize = 6 << 20;

fn collect(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = std::fs::read_dir(dir) else { return };
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.is_dir() {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name != "test" && name != "tests" && name != "site-packages" && name != "__pycache__" {
                collect(&p, out);
            }
        } else if p.extension().is_some_and(|e| e == "py") {
            out.push(p);
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 4 {
        eprintln!("usage: train_vocab <source dir> <merges> <output file>");
        std::process::exit(2);
    }
    let merges: usize = args[2].parse().expect("merge count");
    let mut files = Vec::new();
    collect(Path::new(&args[1]), &mut files);
    let mut texts = Vec::new();
    let mut total = 0;
    for f in files {
        if let Ok(t) = std::fs::read_to_string(&f) {
            total += t.len();
            texts.push(t);
            if total >= BYTE_BUDGET {
                break;
            }
        }
    }
    eprintln!("training on {} files, {} bytes", texts.len(), total);
    let table = train_bpe(texts.iter().map(String::as_str), &run_merges(), merges);
    std::fs::write(&args[3], format_merges(&table)).expect("write merges");
    eprintln!("wrote {} merges", table.len());
}
