//! Writes the bundled synthetic corpus: ten task families, two variants
//! each, plus a dataset manifest.
//!
//!     cargo run -p metakb-core --example gen_corpus -- data/corpus

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;

use metakb::rng::{rng, EngineRng};
use metakb::{Column, Dataset};
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Sample = (Vec<Column>, Vec<String>);

fn gauss(r: &mut EngineRng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(r)
}

fn columns(rows: &[Vec<f64>]) -> Vec<Column> {
    (0..rows[0].len())
        .map(|j| Column::numeric(format!("x{j}"), rows.iter().map(|r| r[j]).collect()))
        .collect()
}

fn labelled(rows: Vec<Vec<f64>>, y: impl Fn(&[f64]) -> usize) -> Sample {
    let labels = rows.iter().map(|r| format!("c{}", y(r))).collect();
    (columns(&rows), labels)
}

fn uniform(r: &mut EngineRng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..p).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
}

fn linear(r: &mut EngineRng, n: usize) -> Sample {
    let w: Vec<f64> = (0..4).map(|_| gauss(r)).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| gauss(r) * 2.0).collect()).collect();
    labelled(rows, |x| usize::from(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() > 0.0))
}

fn xor(r: &mut EngineRng, n: usize) -> Sample {
    labelled(uniform(r, n, 3), |x| usize::from((x[0] > 0.0) != (x[1] > 0.0)))
}

fn rings(r: &mut EngineRng, n: usize) -> Sample {
    labelled(uniform(r, n, 3), |x| usize::from(x[0] * x[0] + x[1] * x[1] < 0.5))
}

fn rules(r: &mut EngineRng, n: usize) -> Sample {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| r.random_range(0.0..1.0)).collect()).collect();
    labelled(rows, |x| usize::from((x[0] > 0.3 && x[2] < 0.5) || x[4] > 0.8))
}

fn blobs(r: &mut EngineRng, n: usize) -> Sample {
    let centres: Vec<Vec<f64>> = (0..4).map(|_| (0..5).map(|_| gauss(r) * 2.5).collect()).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let c = i % 4;
        rows.push(centres[c].iter().map(|m| m + gauss(r)).collect());
        labels.push(format!("c{c}"));
    }
    (columns(&rows), labels)
}

fn imbalanced(r: &mut EngineRng, n: usize) -> Sample {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let minority = i % 7 == 0;
        let shift = if minority { 1.5 } else { 0.0 };
        rows.push((0..5).map(|j| gauss(r) + if j < 2 { shift } else { 0.0 }).collect());
        labels.push(if minority { "rare" } else { "common" }.to_string());
    }
    (columns(&rows), labels)
}

fn mixed(r: &mut EngineRng, n: usize) -> Sample {
    let colours = ["red", "green", "blue"];
    let sizes = ["s", "m", "l", "xl"];
    let mut num = vec![Vec::new(), Vec::new()];
    let mut colour = Vec::new();
    let mut size = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let a = gauss(r);
        let b = gauss(r);
        let c = r.random_range(0..3);
        let s = r.random_range(0..4);
        let score = a + if c == 0 { 1.5 } else { -0.5 } + 0.4 * s as f64 - 0.6;
        labels.push(if score > 0.0 { "yes" } else { "no" }.to_string());
        let miss = |r: &mut EngineRng| r.random_range(0.0..1.0) < 0.08;
        num[0].push(if miss(r) { f64::NAN } else { a });
        num[1].push(if miss(r) { f64::NAN } else { b });
        colour.push((!miss(r)).then_some(colours[c]));
        size.push((!miss(r)).then_some(sizes[s]));
    }
    let cols = vec![
        Column::numeric("a", num[0].clone()),
        Column::numeric("b", num[1].clone()),
        Column::categorical("colour", &colour),
        Column::categorical("size", &size),
    ];
    (cols, labels)
}

fn noisy(r: &mut EngineRng, n: usize) -> Sample {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| gauss(r)).collect()).collect();
    let flips: Vec<bool> = (0..n).map(|_| r.random_range(0.0..1.0) < 0.2).collect();
    let labels = rows
        .iter()
        .zip(&flips)
        .map(|(x, &f)| format!("c{}", usize::from((x[0] + x[1] > 0.0) != f)))
        .collect();
    (columns(&rows), labels)
}

fn sparse_signal(r: &mut EngineRng, n: usize) -> Sample {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..8).map(|j| if j == 0 { gauss(r) } else { gauss(r) * 3.0 }).collect())
        .collect();
    labelled(rows, |x| usize::from(x[0] > 0.2))
}

fn sine(r: &mut EngineRng, n: usize) -> Sample {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![r.random_range(0.0..2.0 * PI), r.random_range(-1.5..1.5)])
        .collect();
    labelled(rows, |x| usize::from(x[1] > (2.0 * x[0]).sin()))
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/corpus".into()));
    fs::create_dir_all(&out).unwrap();
    let families: [(&str, fn(&mut EngineRng, usize) -> Sample, usize); 10] = [
        ("linear", linear, 120),
        ("xor", xor, 160),
        ("rings", rings, 180),
        ("rules", rules, 150),
        ("blobs", blobs, 140),
        ("imbalanced", imbalanced, 175),
        ("mixed", mixed, 130),
        ("noisy", noisy, 110),
        ("sparse", sparse_signal, 190),
        ("sine", sine, 200),
    ];
    let mut manifest = String::from("id,path,target\n");
    for variant in 0..2 {
        for (f, (name, generate, n)) in families.iter().enumerate() {
            let id = format!("{name}_{}", ["a", "b"][variant]);
            let mut r = rng(1000 + f as u64, variant as u64);
            let (cols, labels) = generate(&mut r, n + 10 * variant);
            let ds = Dataset::new(&id, &id, cols, "class", &labels).unwrap();
            ds.write_csv(out.join(format!("{id}.csv"))).unwrap();
            manifest.push_str(&format!("{id},{id}.csv,class\n"));
        }
    }
    fs::write(out.join("manifest.csv"), &manifest).unwrap();
    // the first variant of every family forms the small bundled set
    let bundled: String = manifest.lines().take(11).map(|l| format!("{l}\n")).collect();
    fs::write(out.join("bundled.csv"), bundled).unwrap();
}
