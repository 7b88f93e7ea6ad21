use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("target column '{0}' not found in header")]
    MissingTarget(String),
    #[error("dataset has no usable rows")]
    NoRows,
    #[error("train fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
}

/// A numeric table split into train and test row indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Feature column names, in file order, without the target.
    pub names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Rows skipped because a cell was missing or not a finite number.
    pub dropped_rows: usize,
}

/// Loads a headed CSV file. `target` names the response column (the last
/// column when `None`). Rows are shuffled with `split_seed` and the first
/// `round(train_fraction * n)` go to training.
pub fn load_csv(
    path: &Path,
    target: Option<&str>,
    split_seed: u64,
    train_fraction: f64,
) -> Result<Dataset, DatasetError> {
    parse_csv(
        std::fs::File::open(path)?,
        target,
        split_seed,
        train_fraction,
    )
}

pub fn parse_csv<R: Read>(
    reader: R,
    target: Option<&str>,
    split_seed: u64,
    train_fraction: f64,
) -> Result<Dataset, DatasetError> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(DatasetError::BadFraction(train_fraction));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let t = match target {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingTarget(name.to_string()))?,
        None => header
            .len()
            .checked_sub(1)
            .ok_or_else(|| DatasetError::MissingTarget("<last column>".into()))?,
    };
    let mut features = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let parsed: Option<Vec<f64>> = if rec.len() == header.len() {
            rec.iter()
                .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect()
        } else {
            None
        };
        match parsed {
            Some(mut row) => {
                ys.push(row.remove(t));
                features.push(row);
            }
            None => dropped += 1,
        }
    }
    if features.is_empty() {
        return Err(DatasetError::NoRows);
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let n_train = ((train_fraction * order.len() as f64).round() as usize).clamp(1, order.len());
    let test = order.split_off(n_train);
    let mut names = header;
    names.remove(t);
    Ok(Dataset {
        names,
        features,
        target: ys,
        train: order,
        test,
        dropped_rows: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: usize) -> String {
        let mut s = String::from("a,b,y\n");
        for i in 0..rows {
            s.push_str(&format!("{i},{},{}\n", i * 2, i * 3));
        }
        s
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let d = parse_csv(table(100).as_bytes(), Some("y"), 4, 0.75).unwrap();
        assert_eq!(d.train.len(), 75);
        assert_eq!(d.test.len(), 25);
        let mut all: Vec<usize> = d.train.iter().chain(&d.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let again = parse_csv(table(100).as_bytes(), Some("y"), 4, 0.75).unwrap();
        assert_eq!(d, again);
        let other = parse_csv(table(100).as_bytes(), Some("y"), 5, 0.75).unwrap();
        assert_ne!(d.train, other.train);
        assert_eq!(d.names, vec!["a", "b"]);
        assert_eq!(d.features[3], vec![3.0, 6.0]);
        assert_eq!(d.target[3], 9.0);
    }

    #[test]
    fn bad_rows_are_dropped_and_counted() {
        let text = "a,y\n1,2\n,3\nx,4\n5,nan\n6,7\n8\n";
        let d = parse_csv(text.as_bytes(), None, 0, 0.5).unwrap();
        assert_eq!(d.features.len(), 2);
        assert_eq!(d.dropped_rows, 4);
    }

    #[test]
    fn missing_target_is_an_error() {
        assert!(matches!(
            parse_csv(table(3).as_bytes(), Some("z"), 0, 0.75),
            Err(DatasetError::MissingTarget(_))
        ));
        assert!(matches!(
            parse_csv("a,y\n".as_bytes(), None, 0, 0.75),
            Err(DatasetError::NoRows)
        ));
        assert!(matches!(
            parse_csv(table(3).as_bytes(), None, 0, 0.0),
            Err(DatasetError::BadFraction(_))
        ));
    }
}
