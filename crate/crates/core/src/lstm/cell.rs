use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LstmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    /// f1, sigmoid.
    Forget,
    /// f2, sigmoid.
    Input,
    /// f3, tanh.
    Candidate,
    /// f4, sigmoid.
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Weights of one LSTM layer. `w` is `4h × d`, `u` is `4h × h` and `b` has
/// `4h` entries, with gate blocks stacked in [`Gate::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub hidden: usize,
    pub input: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            hidden,
            input,
            w: vec![0.0; 4 * hidden * input],
            u: vec![0.0; 4 * hidden * hidden],
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Uniform in `[-1/√h, 1/√h]`, forget-gate bias shifted by +1.
    pub fn random<R: Rng>(hidden: usize, input: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut p = Self::zeros(hidden, input);
        for v in p.w.iter_mut().chain(p.u.iter_mut()).chain(p.b.iter_mut()) {
            *v = rng.gen_range(-bound..=bound);
        }
        for v in p.b_gate_mut(Gate::Forget) {
            *v += 1.0;
        }
        p
    }

    pub fn validate(&self) -> Result<(), LstmError> {
        let (h, d) = (self.hidden, self.input);
        if h == 0 || d == 0 {
            return Err(LstmError::Shape("hidden and input sizes must be positive".into()));
        }
        if self.w.len() != 4 * h * d || self.u.len() != 4 * h * h || self.b.len() != 4 * h {
            return Err(LstmError::Shape(format!(
                "tensor sizes ({}, {}, {}) do not match h={h}, d={d}",
                self.w.len(),
                self.u.len(),
                self.b.len()
            )));
        }
        if !self.w.iter().chain(&self.u).chain(&self.b).all(|v| v.is_finite()) {
            return Err(LstmError::Shape("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn w_gate(&self, g: Gate) -> &[f64] {
        let n = self.hidden * self.input;
        &self.w[g.index() * n..(g.index() + 1) * n]
    }

    pub fn u_gate(&self, g: Gate) -> &[f64] {
        let n = self.hidden * self.hidden;
        &self.u[g.index() * n..(g.index() + 1) * n]
    }

    pub fn b_gate(&self, g: Gate) -> &[f64] {
        &self.b[g.index() * self.hidden..(g.index() + 1) * self.hidden]
    }

    pub fn b_gate_mut(&mut self, g: Gate) -> &mut [f64] {
        let h = self.hidden;
        &mut self.b[g.index() * h..(g.index() + 1) * h]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden: vec![0.0; hidden],
            cell: vec![0.0; hidden],
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One cell update.
pub fn cell_forward(x: &[f64], state: &LstmState, params: &LstmCellParams) -> Result<LstmState, LstmError> {
    params.validate()?;
    let h = params.hidden;
    if x.len() != params.input || state.hidden.len() != h || state.cell.len() != h {
        return Err(LstmError::Shape(format!(
            "input {} / state ({}, {}) vs h={h}, d={}",
            x.len(),
            state.hidden.len(),
            state.cell.len(),
            params.input
        )));
    }
    let step = Step::forward(params, x, &state.hidden, &state.cell);
    Ok(LstmState {
        hidden: step.hidden(),
        cell: step.c,
    })
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Step {
    /// f1 | f2 | f3 | f4, each of length h.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl Step {
    pub fn forward(p: &LstmCellParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Step {
        let (h, d) = (p.hidden, p.input);
        let mut gates = vec![0.0; 4 * h];
        for (r, a) in gates.iter_mut().enumerate() {
            let w = &p.w[r * d..(r + 1) * d];
            let u = &p.u[r * h..(r + 1) * h];
            let mut s = p.b[r];
            for k in 0..d {
                s += w[k] * x[k];
            }
            for k in 0..h {
                s += u[k] * h_prev[k];
            }
            *a = s;
        }
        for (r, a) in gates.iter_mut().enumerate() {
            *a = if r / h == Gate::Candidate.index() { a.tanh() } else { sigmoid(*a) };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        for i in 0..h {
            c[i] = gates[i] * c_prev[i] + gates[h + i] * gates[2 * h + i];
            tanh_c[i] = c[i].tanh();
        }
        Step { gates, c, tanh_c }
    }

    pub fn hidden_into(&self, out: &mut [f64]) {
        let h = self.c.len();
        for i in 0..h {
            out[i] = self.gates[3 * h + i] * self.tanh_c[i];
        }
    }

    pub fn hidden(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.c.len()];
        self.hidden_into(&mut out);
        out
    }

    /// Reverse-mode through one step. `dh` and `dc` are the loss gradients
    /// with respect to this step's hidden and cell outputs. Accumulates
    /// parameter gradients into `grad`, adds the input gradient into `dx`
    /// when given and overwrites `dh_prev` and `dc_prev`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        p: &LstmCellParams,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmCellParams,
        mut dx: Option<&mut [f64]>,
        dh_prev: &mut [f64],
        dc_prev: &mut [f64],
    ) {
        let (h, d) = (p.hidden, p.input);
        let g = &self.gates;
        let mut da = vec![0.0; 4 * h];
        for i in 0..h {
            let (f1, f2, f3, f4) = (g[i], g[h + i], g[2 * h + i], g[3 * h + i]);
            let tc = self.tanh_c[i];
            let dct = dc[i] + dh[i] * f4 * (1.0 - tc * tc);
            da[i] = dct * c_prev[i] * f1 * (1.0 - f1);
            da[h + i] = dct * f3 * f2 * (1.0 - f2);
            da[2 * h + i] = dct * f2 * (1.0 - f3 * f3);
            da[3 * h + i] = dh[i] * tc * f4 * (1.0 - f4);
            dc_prev[i] = dct * f1;
        }
        dh_prev.iter_mut().for_each(|v| *v = 0.0);
        for (r, &a) in da.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            grad.b[r] += a;
            let w = &p.w[r * d..(r + 1) * d];
            let gw = &mut grad.w[r * d..(r + 1) * d];
            for k in 0..d {
                gw[k] += a * x[k];
            }
            if let Some(dx) = dx.as_deref_mut() {
                for k in 0..d {
                    dx[k] += a * w[k];
                }
            }
            let u = &p.u[r * h..(r + 1) * h];
            let gu = &mut grad.u[r * h..(r + 1) * h];
            for k in 0..h {
                gu[k] += a * h_prev[k];
                dh_prev[k] += a * u[k];
            }
        }
    }
}
