//! Datasets: row-major matrices, one-hot targets, and a seeded synthetic
//! image-classification task used when no IDX files are available.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Minimal row-major `f64` matrix. Not a linear-algebra type; just a
/// shape-checked container for example rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "Matrix: data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Training or validation set: `inputs` is K x D, `targets` is K x M
/// (one-hot rows for classification).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Matrix,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Matrix) -> Self {
        assert_eq!(
            inputs.rows(),
            targets.rows(),
            "Dataset: example count mismatch between inputs and targets"
        );
        Dataset { inputs, targets }
    }

    /// Number of examples K.
    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input width D.
    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Output width M.
    pub fn output_dim(&self) -> usize {
        self.targets.cols()
    }

    /// Builds a one-hot target matrix from class labels.
    pub fn one_hot(labels: &[u8], classes: usize) -> Matrix {
        let mut m = Matrix::zeros(labels.len(), classes);
        for (i, &label) in labels.iter().enumerate() {
            assert!(
                (label as usize) < classes,
                "one_hot: label {label} out of range for {classes} classes"
            );
            m.row_mut(i)[label as usize] = 1.0;
        }
        m
    }

    /// New dataset containing the given example indices, in order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let d = self.input_dim();
        let m = self.output_dim();
        let mut inputs = Matrix::zeros(idx.len(), d);
        let mut targets = Matrix::zeros(idx.len(), m);
        for (row, &i) in idx.iter().enumerate() {
            inputs.row_mut(row).copy_from_slice(self.inputs.row(i));
            targets.row_mut(row).copy_from_slice(self.targets.row(i));
        }
        Dataset::new(inputs, targets)
    }
}

/// Synthetic 28x28 digit-classification task.
///
/// Each of the 10 classes gets a smooth random template (seeded white
/// noise, box-blurred on the 28x28 grid); examples are a convex blend of
/// their class template and fresh per-example noise, clamped to [0, 1].
/// Classes are balanced and interleaved. The blend keeps the task hard
/// enough that mini-batch training needs tens of epochs, while staying
/// linearly separable enough for a small MLP to fit.
pub fn synthetic_digits(seed: u64, examples: usize) -> Dataset {
    const SIDE: usize = 28;
    const DIM: usize = SIDE * SIDE;
    const CLASSES: usize = 10;
    // Per-example blend of template signal vs noise.
    const SIGNAL: f64 = 0.35;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates: Vec<Vec<f64>> = (0..CLASSES)
        .map(|_| {
            let raw: Vec<f64> = (0..DIM).map(|_| rng.random_range(0.0..1.0)).collect();
            box_blur(&raw, SIDE, 2)
        })
        .collect();

    let mut inputs = Matrix::zeros(examples, DIM);
    let mut labels = Vec::with_capacity(examples);
    for i in 0..examples {
        let class = i % CLASSES;
        labels.push(class as u8);
        let row = inputs.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            let noise: f64 = rng.random_range(0.0..1.0);
            *v = (SIGNAL * templates[class][j] + (1.0 - SIGNAL) * noise).clamp(0.0, 1.0);
        }
    }
    let targets = Dataset::one_hot(&labels, CLASSES);
    Dataset::new(inputs, targets)
}

/// Repeated 3x3 mean filter on a square grid (edge cells use the
/// available neighborhood).
fn box_blur(values: &[f64], side: usize, passes: usize) -> Vec<f64> {
    let mut current = values.to_vec();
    for _ in 0..passes {
        let mut next = vec![0.0; current.len()];
        for r in 0..side {
            for c in 0..side {
                let mut sum = 0.0;
                let mut count = 0.0;
                for dr in -1i32..=1 {
                    for dc in -1i32..=1 {
                        let rr = r as i32 + dr;
                        let cc = c as i32 + dc;
                        if rr >= 0 && rr < side as i32 && cc >= 0 && cc < side as i32 {
                            sum += current[rr as usize * side + cc as usize];
                            count += 1.0;
                        }
                    }
                }
                next[r * side + c] = sum / count;
            }
        }
        current = next;
    }
    current
}
