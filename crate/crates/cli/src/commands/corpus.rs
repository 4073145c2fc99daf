use std::fs;
use std::io::BufWriter;

use oodwatch_core::image_io::write_image;
use oodwatch_core::reconstructor::{generate_corpus, CorpusSpec};

use crate::error::{CliError, Result};
use crate::jsonl::{write_line, CorpusEntry};
use crate::manifest::RunManifest;
use crate::CorpusArgs;

pub const MANIFEST_NAME: &str = "manifest.jsonl";

pub fn run(args: &CorpusArgs, quiet: bool) -> Result<()> {
    let spec = CorpusSpec {
        count: args.count as usize,
        width: args.size.0,
        height: args.size.1,
        shift: args.shift,
        seed: args.seed,
    };
    let corpus = generate_corpus(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;

    let manifest_path = args.out.join(MANIFEST_NAME);
    let file = fs::File::create(&manifest_path).map_err(CliError::io(&manifest_path))?;
    let mut lines = BufWriter::new(file);
    let mut index = [0usize; 2];
    for (img, domain) in &corpus {
        let slot = usize::from(*domain != oodwatch_core::reconstructor::IN_DOMAIN);
        let name = format!("{domain}_{:04}.pgm", index[slot]);
        index[slot] += 1;
        write_image(img, args.out.join(&name)).map_err(|e| CliError::Input(e.to_string()))?;
        let entry = CorpusEntry {
            path: name,
            domain: domain.to_string(),
        };
        write_line(&mut lines, &entry).map_err(CliError::io(&manifest_path))?;
    }
    std::io::Write::flush(&mut lines).map_err(CliError::io(&manifest_path))?;

    let mut run = RunManifest::new("corpus", args);
    run.note("images", corpus.len());
    run.write(&args.out.join("run_manifest.json"))?;
    if !quiet {
        eprintln!("wrote {} images to {}", corpus.len(), args.out.display());
    }
    Ok(())
}
