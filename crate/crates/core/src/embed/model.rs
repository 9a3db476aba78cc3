use rand::Rng;

/// Dense row-major matrix of `rows x dim` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Table {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Sizes of the parameter blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub dim: usize,
    pub locations: usize,
    pub tags: usize,
    pub features: usize,
    pub categories: usize,
}

/// All trainable parameters. Also used for gradients and Adagrad
/// accumulators, which share the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// Location vectors `v_l`.
    pub locations: Table,
    /// Location biases `b_l`, used only by the GloVe objective.
    pub location_bias: Vec<f64>,
    /// Tag context vectors.
    pub tags: Table,
    pub tag_bias: Vec<f64>,
    /// Numerical feature vectors.
    pub features: Table,
    pub feature_bias: Vec<f64>,
    /// Category centroids `w_cat`.
    pub categories: Table,
}

impl Params {
    pub fn zeros(shape: Shape) -> Self {
        Params {
            locations: Table::zeros(shape.locations, shape.dim),
            location_bias: vec![0.0; shape.locations],
            tags: Table::zeros(shape.tags, shape.dim),
            tag_bias: vec![0.0; shape.tags],
            features: Table::zeros(shape.features, shape.dim),
            feature_bias: vec![0.0; shape.features],
            categories: Table::zeros(shape.categories, shape.dim),
        }
    }

    pub fn shape(&self) -> Shape {
        Shape {
            dim: self.locations.dim(),
            locations: self.locations.rows(),
            tags: self.tags.rows(),
            features: self.features.rows(),
            categories: self.categories.rows(),
        }
    }

    /// Uniform initialization in `[-0.5/dim, 0.5/dim]`, block by block in
    /// declaration order.
    pub fn uniform<R: Rng>(shape: Shape, rng: &mut R) -> Self {
        let mut p = Params::zeros(shape);
        let half = 0.5 / shape.dim as f64;
        for block in p.blocks_mut() {
            for x in block.iter_mut() {
                *x = rng.random_range(-half..=half);
            }
        }
        p
    }

    pub fn blocks(&self) -> [&[f64]; 7] {
        [
            self.locations.as_slice(),
            &self.location_bias,
            self.tags.as_slice(),
            &self.tag_bias,
            self.features.as_slice(),
            &self.feature_bias,
            self.categories.as_slice(),
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 7] {
        [
            self.locations.as_mut_slice(),
            &mut self.location_bias,
            self.tags.as_mut_slice(),
            &mut self.tag_bias,
            self.features.as_mut_slice(),
            &mut self.feature_bias,
            self.categories.as_mut_slice(),
        ]
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scalar at flat position `i` across all blocks.
    pub fn get(&self, mut i: usize) -> f64 {
        for b in self.blocks() {
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set(&mut self, mut i: usize, value: f64) {
        for b in self.blocks_mut() {
            if i < b.len() {
                b[i] = value;
                return;
            }
            i -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks().into_iter().flat_map(|b| b.iter().copied())
    }
}

/// A trained (or initialized) embedding model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub params: Params,
    pub accumulators: Params,
    pub location_ids: Vec<String>,
    pub tag_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub category_names: Vec<String>,
}

impl EmbeddingModel {
    pub fn location_vector(&self, loc: usize) -> &[f64] {
        self.params.locations.row(loc)
    }

    /// Location vectors as `f32` rows, in location order.
    pub fn location_vectors_f32(&self) -> Vec<Vec<f32>> {
        (0..self.params.locations.rows())
            .map(|l| self.location_vector(l).iter().map(|&x| x as f32).collect())
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
