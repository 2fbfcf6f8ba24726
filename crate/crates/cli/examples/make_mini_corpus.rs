//! Regenerates the bundled mini corpus under `data/mini`.
//!
//! Eight topics, each with three hub words that appear in roughly two thirds
//! of the topic's sentences, so hubs clear the SID lower bound while topic
//! words do not. `bank` and `bass` are hubs of two topics each.
//!
//! English vectors are topic directions plus noise. The `zz` language spells
//! every word backwards with a trailing `o` and rotates its vectors by a
//! fixed random orthogonal map.
//!
//! ```text
//! cargo run -p sememe-cli --example make_mini_corpus [OUT_DIR]
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sememe_core::tensor::{svd, DenseMatrix};

const DIM: usize = 300;
const SENTENCES: usize = 2000;

struct Topic {
    hubs: [&'static str; 3],
    words: &'static str,
}

const TOPICS: [Topic; 8] = [
    Topic {
        hubs: ["bank", "money", "loan"],
        words: "account deposit interest credit cash savings mortgage payment finance investor stock market \
                price debt budget tax fund wallet coin salary teller vault cheque balance profit dividend broker \
                currency inflation lender borrower banker invest rate capital asset insurance pension branch transfer",
    },
    Topic {
        hubs: ["bank", "river", "bass"],
        words: "stream shore flood fish boat canoe reed mud willow bridge delta estuary valley creek pebble rapids \
                waterfall otter heron trout ferry dam lake wetland sand rowing paddle riverside meadow fishing moss \
                frog swan island harbour angler bait rod tackle pike",
    },
    Topic {
        hubs: ["music", "song", "bass"],
        words: "guitar piano melody rhythm drum concert band singer chord orchestra violin tempo album lyric choir \
                jazz rock opera harmony microphone audience composer tune solo chorus symphony trumpet flute record \
                playlist radio dance beat studio amplifier cello verse encore festival",
    },
    Topic {
        hubs: ["food", "kitchen", "dish"],
        words: "recipe oven bread butter garlic onion soup salad pepper salt sugar flour pasta rice sauce cheese \
                chef spoon knife pan bake roast grill dinner lunch breakfast flavor spice herb dessert cake honey \
                vegetable tomato potato noodle fry stew meal",
    },
    Topic {
        hubs: ["game", "team", "match"],
        words: "player coach score goal ball stadium league season tournament referee football tennis soccer \
                basketball champion victory defeat fans trophy training striker keeper pitch whistle penalty \
                midfield sprint athlete medal race final halftime captain jersey rival",
    },
    Topic {
        hubs: ["weather", "rain", "spring"],
        words: "cloud storm sunshine wind snow thunder lightning forecast temperature humid drizzle fog frost \
                breeze summer autumn winter season umbrella sky shower hail climate heat cold warm chilly gust \
                rainbow blossom puddle drought monsoon overcast mild freezing",
    },
    Topic {
        hubs: ["computer", "data", "program"],
        words: "software hardware keyboard screen network server database code algorithm memory processor \
                internet website browser laptop file folder download upload password cloud storage compile bug \
                debug function variable pixel cable router backup encryption terminal kernel script",
    },
    Topic {
        hubs: ["doctor", "health", "patient"],
        words: "hospital nurse medicine clinic surgery disease symptom treatment therapy vaccine fever pain \
                injury diagnosis prescription pharmacy illness recovery infection virus blood heart lung bone \
                ambulance emergency checkup diet exercise vitamin wellness allergy cough wound bandage",
    },
];

/// Used in sentences and listed in the bundled stop-word file.
const STOPWORDS: &str = "the a an of to in on at for with and but or is are was were be been it this that \
                         these those they we you he she his her their our my from by as so very";

const FILLER: &str = "people today always often really thing place time year day new old good great small large \
                      first last many little long right left early late never maybe sometimes usually quite \
                      almost perhaps together around everyone somebody something everything nothing world \
                      kind idea way part week month morning evening city town home friend family story \
                      question answer reason example number group side end case point fact hand eye face \
                      life child woman man country school state problem area moment door road car bus train \
                      street window table chair paper book letter picture color voice word name line level \
                      surprise plan chance choice change result effect order power service support report \
                      simple easy hard quick slow bright dark quiet loud happy busy";

/// Filler words left out of both vector files.
const NO_VECTOR: [&str; 3] = ["question", "answer", "reason"];

fn unit(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn mix(parts: &[(f64, &[f64])]) -> Vec<f64> {
    (0..DIM).map(|i| parts.iter().map(|(w, v)| w * v[i]).sum()).collect()
}

fn vec_file(words: &BTreeMap<String, Vec<f64>>) -> String {
    let mut out = format!("{} {DIM}\n", words.len());
    for (w, v) in words {
        out.push_str(w);
        for x in v {
            let _ = write!(out, " {x:.4}");
        }
        out.push('\n');
    }
    out
}

fn foreign(word: &str) -> String {
    word.chars().rev().collect::<String>() + "o"
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mini")
    });
    fs::create_dir_all(&out).expect("create output directory");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let stop: Vec<&str> = STOPWORDS.split_whitespace().collect();
    let filler: Vec<&str> = FILLER.split_whitespace().collect();
    let topic_words: Vec<Vec<&str>> = TOPICS.iter().map(|t| t.words.split_whitespace().collect()).collect();

    let mut text = String::new();
    for i in 0..SENTENCES {
        let t = i % TOPICS.len();
        let mut tokens: Vec<&str> = TOPICS[t].hubs.choose_multiple(&mut rng, 2).copied().collect();
        let content = rng.random_range(3..=7);
        tokens.extend(topic_words[t].choose_multiple(&mut rng, content));
        let stops = rng.random_range(1..=3);
        tokens.extend((0..stops).map(|_| *stop.choose(&mut rng).expect("non-empty")));
        if rng.random_bool(0.5) {
            tokens.push(filler.choose(&mut rng).expect("non-empty"));
        }
        tokens.shuffle(&mut rng);
        let mut sentence = tokens.join(" ");
        sentence[..1].make_ascii_uppercase();
        let end = [".", ".", ".", "?", "!"].choose(&mut rng).expect("non-empty");
        text.push_str(&sentence);
        text.push_str(end);
        // one-word interjections fall below the minimum sentence length
        if i % 97 == 0 {
            text.push_str(" Indeed!");
        }
        text.push(if i % 5 == 4 { '\n' } else { ' ' });
    }
    fs::write(out.join("corpus.txt"), text).expect("write corpus");

    let directions: Vec<Vec<f64>> = (0..TOPICS.len()).map(|_| unit(&mut rng)).collect();
    let function_dir = unit(&mut rng);
    let mut en: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (t, words) in topic_words.iter().enumerate() {
        for w in words {
            let noise = unit(&mut rng);
            en.entry(w.to_string()).or_insert_with(|| mix(&[(1.0, &directions[t]), (0.7, &noise)]));
        }
    }
    let mut hub_topics: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (t, topic) in TOPICS.iter().enumerate() {
        for h in topic.hubs {
            hub_topics.entry(h).or_default().push(t);
        }
    }
    for (h, ts) in &hub_topics {
        let noise = unit(&mut rng);
        let w = 1.0 / (ts.len() as f64).sqrt();
        let mut parts: Vec<(f64, &[f64])> = ts.iter().map(|&t| (w, directions[t].as_slice())).collect();
        parts.push((0.35, &noise));
        en.insert(h.to_string(), mix(&parts));
    }
    for w in &stop {
        let noise = unit(&mut rng);
        en.insert(w.to_string(), mix(&[(0.5, &function_dir), (0.5, &noise)]));
    }
    for w in filler.iter().filter(|w| !NO_VECTOR.contains(w)) {
        en.insert(w.to_string(), unit(&mut rng));
    }

    let random = DenseMatrix::from_vec(DIM, DIM, (0..DIM * DIM).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("square");
    let d = svd(&random).expect("finite");
    let q = d.u.matmul(&d.v.transpose()).expect("square");
    let mut zz: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut dict = String::new();
    for (w, v) in &en {
        let mut rotated = q.mat_vec(v).expect("matching width");
        for x in &mut rotated {
            *x += rng.random_range(-0.01..0.01);
        }
        zz.insert(foreign(w), rotated);
    }
    for w in en.keys() {
        let _ = writeln!(dict, "{}\t{w}", foreign(w));
    }

    fs::write(out.join("emb.en.vec"), vec_file(&en)).expect("write en vectors");
    fs::write(out.join("emb.zz.vec"), vec_file(&zz)).expect("write zz vectors");
    fs::write(out.join("dict.zz-en.txt"), dict).expect("write dictionary");
    println!("wrote {} sentences and {} words to {}", SENTENCES, en.len(), out.display());
}
