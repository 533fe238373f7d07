//! Writes `<dir>/<name>_train.txt` and `<dir>/<name>_test.txt` from the
//! bibtex-shaped generator.
//!
//! Usage: `synth <dir> [name] [seed]`

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use exmlds::write_xmlc_dataset;
use exmlds_bench::{generate, split, SyntheticSpec};

fn main() -> exmlds::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().expect("usage: synth <dir> [name] [seed]"));
    let name = args.next().unwrap_or_else(|| "bibtex".into());
    let seed = args.next().map_or(7, |s| s.parse().expect("seed"));
    std::fs::create_dir_all(&dir)?;
    let data = generate(&SyntheticSpec::bibtex_like(), seed);
    let (train, test) = split(&data, 1000);
    for (part, d) in [("train", &train), ("test", &test)] {
        let path = dir.join(format!("{name}_{part}.txt"));
        write_xmlc_dataset(d, BufWriter::new(File::create(&path)?))?;
        println!("{} ({} rows)", path.display(), d.len());
    }
    Ok(())
}
