use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sememe_core::config::{Overrides, PipelineConfig};

pub const DIM: usize = 6;

/// Writes a two-topic corpus, 6-d vectors for two languages and a config
/// with a tiny network into `dir`, returning the loaded config.
pub fn tiny_project(dir: &Path, seed: u64) -> PipelineConfig {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let topics: [(&[&str], &[&str]); 2] = [
        (&["bank", "money"], &["cash", "loan", "coin", "debt", "fund"]),
        (&["bank", "river"], &["water", "shore", "fish", "boat", "reed"]),
    ];
    let mut corpus = String::new();
    for i in 0..200 {
        let (hubs, words) = topics[i % 2];
        let mut s: Vec<&str> = hubs.to_vec();
        s.extend(words.choose_multiple(&mut r, 3));
        s.push(["the", "a", "of"].choose(&mut r).unwrap());
        let _ = write!(corpus, "{}. ", s.join(" "));
    }
    fs::write(dir.join("corpus.txt"), corpus).unwrap();
    fs::write(dir.join("stop.txt"), "the\na\nof\n").unwrap();

    let mut vocab: Vec<(&str, Vec<f64>)> = Vec::new();
    let axis = |i: usize| (0..DIM).map(|j| if j == i { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let noisy = |v: Vec<f64>, r: &mut ChaCha8Rng| v.into_iter().map(|x| x + r.random_range(-0.2..0.2)).collect();
    vocab.push(("bank", noisy(axis(0).iter().zip(axis(1)).map(|(a, b)| a + b).collect(), &mut r)));
    vocab.push(("money", noisy(axis(0), &mut r)));
    vocab.push(("river", noisy(axis(1), &mut r)));
    for (t, (_, words)) in topics.iter().enumerate() {
        for w in *words {
            vocab.push((w, noisy(axis(t), &mut r)));
        }
    }
    for w in ["the", "a", "of"] {
        vocab.push((w, noisy(axis(5), &mut r)));
    }
    let write_vec = |name: &str, rows: &[(String, Vec<f64>)]| {
        let mut s = format!("{} {DIM}\n", rows.len());
        for (w, v) in rows {
            let _ = writeln!(s, "{w} {}", v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" "));
        }
        fs::write(dir.join(name), s).unwrap();
    };
    let en: Vec<(String, Vec<f64>)> = vocab.iter().map(|(w, v)| (w.to_string(), v.clone())).collect();
    // the second language swaps two coordinates, an orthogonal map
    let xx: Vec<(String, Vec<f64>)> = vocab
        .iter()
        .map(|(w, v)| {
            let mut u = v.clone();
            u.swap(0, 2);
            (format!("{w}x"), u)
        })
        .collect();
    write_vec("en.vec", &en);
    write_vec("xx.vec", &xx);
    let dict: String = vocab.iter().map(|(w, _)| format!("{w}x\t{w}\n")).collect();
    fs::write(dir.join("dict.txt"), dict).unwrap();

    let config = "seed = 5\n\
        [paths]\ncorpus = [\"corpus.txt\"]\nstopwords = \"stop.txt\"\nworkdir = \"work\"\n\
        [paths.embeddings]\nen = \"en.vec\"\nxx = \"xx.vec\"\n\
        [paths.dictionaries]\n\"xx-en\" = \"dict.txt\"\n\
        [sid]\nlower = 20\nupper = 150\n\
        [dcn]\nlayers = [4, 2, 4]\nclusters = 2\nbatch_size = 8\npretrain_epochs = 3\nfinetune_epochs = 2\nloops = 2\n\
        [report]\nlanguages = [\"en\", \"xx\"]\n";
    fs::write(dir.join("config.toml"), config).unwrap();
    PipelineConfig::load(Some(&dir.join("config.toml")), &Overrides::default()).unwrap()
}
