use rand::Rng;

use super::{uniform_init, AutodiffError, ConvSpec, Graph, ParamStore, Tensor, Var};

fn check_shape(store: &ParamStore, name: &str, shape: &[usize]) -> Result<(), AutodiffError> {
    let got = store.get(name)?.shape();
    if got != shape {
        return Err(AutodiffError::Shape(format!(
            "parameter `{name}` has shape {got:?}, expected {shape:?}"
        )));
    }
    Ok(())
}

/// Affine layer `x Wᵀ + b` applied to each row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: String,
    pub bias: Option<String>,
    pub n_in: usize,
    pub n_out: usize,
}

impl Dense {
    pub fn new(name: &str, n_in: usize, n_out: usize, bias: bool) -> Self {
        Self {
            weight: format!("{name}.w"),
            bias: bias.then(|| format!("{name}.b")),
            n_in,
            n_out,
        }
    }

    /// Registers uniformly initialized weights and zero biases.
    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) -> Result<(), AutodiffError> {
        store.insert(&self.weight, uniform_init(rng, &[self.n_out, self.n_in], self.n_in))?;
        if let Some(b) = &self.bias {
            store.insert(b, Tensor::zeros(&[self.n_out]))?;
        }
        Ok(())
    }

    pub fn check(&self, store: &ParamStore) -> Result<(), AutodiffError> {
        check_shape(store, &self.weight, &[self.n_out, self.n_in])?;
        if let Some(b) = &self.bias {
            check_shape(store, b, &[self.n_out])?;
        }
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, AutodiffError> {
        let w = g.param(store, &self.weight)?;
        let b = match &self.bias {
            Some(name) => Some(g.param(store, name)?),
            None => None,
        };
        g.dense(x, w, b)
    }
}

/// 1-D convolution over the rows of a `T × C` sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub weight: String,
    pub bias: Option<String>,
    pub c_in: usize,
    pub c_out: usize,
    pub width: usize,
    pub spec: ConvSpec,
}

impl Conv1d {
    pub fn new(name: &str, c_in: usize, c_out: usize, width: usize, spec: ConvSpec, bias: bool) -> Self {
        Self {
            weight: format!("{name}.w"),
            bias: bias.then(|| format!("{name}.b")),
            c_in,
            c_out,
            width,
            spec,
        }
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) -> Result<(), AutodiffError> {
        let shape = [self.c_out, self.c_in, self.width];
        store.insert(&self.weight, uniform_init(rng, &shape, self.c_in * self.width))?;
        if let Some(b) = &self.bias {
            store.insert(b, Tensor::zeros(&[self.c_out]))?;
        }
        Ok(())
    }

    pub fn check(&self, store: &ParamStore) -> Result<(), AutodiffError> {
        check_shape(store, &self.weight, &[self.c_out, self.c_in, self.width])?;
        if let Some(b) = &self.bias {
            check_shape(store, b, &[self.c_out])?;
        }
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, AutodiffError> {
        let w = g.param(store, &self.weight)?;
        let b = match &self.bias {
            Some(name) => Some(g.param(store, name)?),
            None => None,
        };
        g.conv1d(x, w, b, self.spec)
    }
}

/// Gated recurrent cell:
///
/// ```text
/// z = σ(Wz x + Uz h + bz)
/// r = σ(Wr x + Ur h + br)
/// n = tanh(Wn x + Un (r ⊙ h) + bn)
/// h' = h + z ⊙ (n - h)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell {
    input: Dense,
    gates: Dense,
    candidate: Dense,
    pub n_in: usize,
    pub dim: usize,
}

impl GruCell {
    pub fn new(name: &str, n_in: usize, dim: usize) -> Self {
        Self {
            input: Dense::new(&format!("{name}.in"), n_in, 3 * dim, true),
            gates: Dense::new(&format!("{name}.gate"), dim, 2 * dim, false),
            candidate: Dense::new(&format!("{name}.cand"), dim, dim, false),
            n_in,
            dim,
        }
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) -> Result<(), AutodiffError> {
        self.input.init(store, rng)?;
        self.gates.init(store, rng)?;
        self.candidate.init(store, rng)
    }

    pub fn check(&self, store: &ParamStore) -> Result<(), AutodiffError> {
        self.input.check(store)?;
        self.gates.check(store)?;
        self.candidate.check(store)
    }

    /// Parameter names, input projection first.
    pub fn param_names(&self) -> Vec<&str> {
        let mut v = vec![self.input.weight.as_str()];
        v.extend(self.input.bias.as_deref());
        v.push(&self.gates.weight);
        v.push(&self.candidate.weight);
        v
    }

    /// One step from a `1 × n_in` input and `1 × dim` state.
    pub fn step(&self, g: &mut Graph, store: &ParamStore, x: Var, h: Var) -> Result<Var, AutodiffError> {
        let (xs, hs) = (g.value(x).shape().to_vec(), g.value(h).shape().to_vec());
        if xs != [1, self.n_in] || hs != [1, self.dim] {
            return Err(AutodiffError::Shape(format!(
                "recurrent cell expects input [1, {}] and state [1, {}], got {xs:?} and {hs:?}",
                self.n_in, self.dim
            )));
        }
        let d = self.dim;
        let xi = self.input.forward(g, store, x)?;
        let hg = self.gates.forward(g, store, h)?;
        let xz = g.slice_cols(xi, 0, d)?;
        let xr = g.slice_cols(xi, d, d)?;
        let xn = g.slice_cols(xi, 2 * d, d)?;
        let hz = g.slice_cols(hg, 0, d)?;
        let hr = g.slice_cols(hg, d, d)?;
        let z = g.add(xz, hz)?;
        let z = g.sigmoid(z)?;
        let r = g.add(xr, hr)?;
        let r = g.sigmoid(r)?;
        let rh = g.mul(r, h)?;
        let un = self.candidate.forward(g, store, rh)?;
        let n = g.add(xn, un)?;
        let n = g.tanh(n)?;
        let delta = g.sub(n, h)?;
        let delta = g.mul(z, delta)?;
        g.add(h, delta)
    }

    /// Runs over the rows of a `T × n_in` sequence from a zero state (or
    /// `h0`) and stacks the states into `T × dim`. With `reverse` the rows
    /// are visited last to first and the output keeps the input row order.
    pub fn sequence(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: Var,
        h0: Option<Var>,
        reverse: bool,
    ) -> Result<Var, AutodiffError> {
        let t = g.value(x).rows();
        let mut h = match h0 {
            Some(h) => h,
            None => g.constant(Tensor::zeros(&[1, self.dim])),
        };
        let mut states = vec![h; t];
        let order: Vec<usize> = if reverse { (0..t).rev().collect() } else { (0..t).collect() };
        for r in order {
            let xt = g.slice_rows(x, r, 1)?;
            h = self.step(g, store, xt, h)?;
            states[r] = h;
        }
        g.concat_rows(&states)
    }
}
