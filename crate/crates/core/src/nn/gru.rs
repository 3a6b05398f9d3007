use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{sigmoid, xavier, Params, Tensor2};
use crate::{Error, Result, Rng};

/// Gated recurrent unit in update-gate form:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w_z: Tensor2,
    pub w_r: Tensor2,
    pub w_h: Tensor2,
    pub u_z: Tensor2,
    pub u_r: Tensor2,
    pub u_h: Tensor2,
    pub b_z: Tensor2,
    pub b_r: Tensor2,
    pub b_h: Tensor2,
}

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruCell {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        GruCell {
            w_z: xavier(hidden_dim, input_dim, rng),
            w_r: xavier(hidden_dim, input_dim, rng),
            w_h: xavier(hidden_dim, input_dim, rng),
            u_z: xavier(hidden_dim, hidden_dim, rng),
            u_r: xavier(hidden_dim, hidden_dim, rng),
            u_h: xavier(hidden_dim, hidden_dim, rng),
            b_z: Tensor2::zeros(hidden_dim, 1),
            b_r: Tensor2::zeros(hidden_dim, 1),
            b_h: Tensor2::zeros(hidden_dim, 1),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = Tensor2::zeros(hidden_dim, input_dim);
        let u = Tensor2::zeros(hidden_dim, hidden_dim);
        let b = Tensor2::zeros(hidden_dim, 1);
        GruCell {
            w_z: w.clone(),
            w_r: w.clone(),
            w_h: w,
            u_z: u.clone(),
            u_r: u.clone(),
            u_h: u,
            b_z: b.clone(),
            b_r: b.clone(),
            b_h: b,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u_z.rows()
    }

    pub fn step(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x, h)?.h)
    }

    pub fn forward(&self, x: &[f64], h: &[f64]) -> Result<GruStep> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("GRU input", self.input_dim(), x.len()));
        }
        if h.len() != self.hidden_dim() {
            return Err(Error::shape("GRU hidden state", self.hidden_dim(), h.len()));
        }
        Ok(self.forward_unchecked(x, h))
    }

    fn forward_unchecked(&self, x: &[f64], h: &[f64]) -> GruStep {
        let gate = |w: &Tensor2, u: &Tensor2, b: &Tensor2, hh: &[f64]| {
            let mut a = b.data().to_vec();
            w.matvec_acc(x, &mut a);
            u.matvec_acc(hh, &mut a);
            a
        };
        let z: Vec<f64> = gate(&self.w_z, &self.u_z, &self.b_z, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<f64> = gate(&self.w_r, &self.u_r, &self.b_r, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let candidate: Vec<f64> = gate(&self.w_h, &self.u_h, &self.b_h, &rh)
            .into_iter()
            .map(libm::tanh)
            .collect();
        let h_new = (0..h.len())
            .map(|i| (1.0 - z[i]) * h[i] + z[i] * candidate[i])
            .collect();
        GruStep {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            z,
            r,
            candidate,
            h: h_new,
        }
    }

    /// Runs the cell over `inputs` from `h0`, keeping every step.
    pub fn run<'a, I>(&self, inputs: I, h0: &[f64]) -> Result<Vec<GruStep>>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut steps: Vec<GruStep> = Vec::new();
        for x in inputs {
            let h = steps.last().map_or(h0, |s| s.h.as_slice());
            let step = self.forward(x, h)?;
            steps.push(step);
        }
        Ok(steps)
    }

    /// Backward through one step. Given `dh` = ∂L/∂h', accumulates parameter
    /// gradients into `grad`, adds ∂L/∂x to `dx` and returns ∂L/∂h_prev.
    pub fn backward(&self, step: &GruStep, dh: &[f64], grad: &mut GruCell, dx: &mut [f64]) -> Vec<f64> {
        let n = dh.len();
        let mut dh_prev = vec![0.0; n];
        let mut da_z = vec![0.0; n];
        let mut da_h = vec![0.0; n];
        for i in 0..n {
            let z = step.z[i];
            let c = step.candidate[i];
            dh_prev[i] = dh[i] * (1.0 - z);
            da_z[i] = dh[i] * (c - step.h_prev[i]) * z * (1.0 - z);
            da_h[i] = dh[i] * z * (1.0 - c * c);
        }
        let rh: Vec<f64> = step.r.iter().zip(&step.h_prev).map(|(a, b)| a * b).collect();

        grad.w_h.add_outer(&da_h, &step.x);
        grad.u_h.add_outer(&da_h, &rh);
        add_to(grad.b_h.data_mut(), &da_h);
        self.w_h.matvec_t_acc(&da_h, dx);
        let mut drh = vec![0.0; n];
        self.u_h.matvec_t_acc(&da_h, &mut drh);

        let mut da_r = vec![0.0; n];
        for i in 0..n {
            let r = step.r[i];
            dh_prev[i] += drh[i] * r;
            da_r[i] = drh[i] * step.h_prev[i] * r * (1.0 - r);
        }

        for (da, w, u, gw, gu, gb) in [
            (&da_r, &self.w_r, &self.u_r, &mut grad.w_r, &mut grad.u_r, &mut grad.b_r),
            (&da_z, &self.w_z, &self.u_z, &mut grad.w_z, &mut grad.u_z, &mut grad.b_z),
        ] {
            gw.add_outer(da, &step.x);
            gu.add_outer(da, &step.h_prev);
            add_to(gb.data_mut(), da);
            w.matvec_t_acc(da, dx);
            u.matvec_t_acc(da, &mut dh_prev);
        }
        dh_prev
    }
}

fn add_to(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

impl Params for GruCell {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![
            ("w_z".into(), &self.w_z),
            ("w_r".into(), &self.w_r),
            ("w_h".into(), &self.w_h),
            ("u_z".into(), &self.u_z),
            ("u_r".into(), &self.u_r),
            ("u_h".into(), &self.u_h),
            ("b_z".into(), &self.b_z),
            ("b_r".into(), &self.b_r),
            ("b_h".into(), &self.b_h),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use rand::Rng as _;

    #[test]
    fn zero_cell_halves_state() {
        let cell = GruCell::zeros(3, 4);
        let h = [0.4, -0.2, 1.0, 0.0];
        let out = cell.step(&[1.0, 2.0, 3.0], &h).unwrap();
        for (o, hi) in out.iter().zip(h) {
            assert_eq!(*o, 0.5 * hi);
        }
        assert_eq!(cell.step(&[1.0, 2.0, 3.0], &[0.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn shape_errors_name_dimensions() {
        let cell = GruCell::zeros(3, 4);
        let err = cell.step(&[1.0], &[0.0; 4]).unwrap_err();
        assert!(alloc::format!("{err}").contains("expected 3, got 1"));
        assert!(cell.step(&[1.0; 3], &[0.0; 2]).is_err());
    }

    #[test]
    fn sequence_gradients_match_finite_differences() {
        let mut rng = crate::rng(3);
        let mut cell = GruCell::new(3, 5, &mut rng);
        for t in cell.tensors_mut() {
            for x in t.data_mut() {
                *x += rng.gen_range(-0.3..0.3);
            }
        }
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let h0: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let proj: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();

        // loss = Σ_t proj · h_t
        let f = |c: &GruCell| -> Result<(f64, GruCell)> {
            let steps = c.run(xs.iter().map(Vec::as_slice), &h0)?;
            let loss: f64 = steps.iter().map(|s| crate::nn::dot(&proj, &s.h)).sum();
            let mut g = c.zeros_like();
            let mut dh = vec![0.0; 5];
            for s in steps.iter().rev() {
                for i in 0..5 {
                    dh[i] += proj[i];
                }
                let mut dx = vec![0.0; 3];
                dh = c.backward(s, &dh, &mut g, &mut dx);
            }
            Ok((loss, g))
        };
        let report = grad_check(&cell, f, 1e-3).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.blocks.len(), 9);
    }

    #[test]
    fn input_and_state_gradients() {
        let mut rng = crate::rng(9);
        let cell = GruCell::new(2, 3, &mut rng);
        let x = [0.3, -0.7];
        let h = [0.1, 0.5, -0.4];
        let step = cell.forward(&x, &h).unwrap();
        let mut dx = vec![0.0; 2];
        let mut g = cell.zeros_like();
        let dh_prev = cell.backward(&step, &[1.0, 1.0, 1.0], &mut g, &mut dx);
        let f = |x: &[f64], h: &[f64]| cell.step(x, h).unwrap().iter().sum::<f64>();
        let eps = 1e-5;
        for i in 0..2 {
            let mut a = x;
            a[i] += eps;
            let mut b = x;
            b[i] -= eps;
            let num = (f(&a, &h) - f(&b, &h)) / (2.0 * eps);
            assert!((num - dx[i]).abs() < 1e-7);
        }
        for i in 0..3 {
            let mut a = h;
            a[i] += eps;
            let mut b = h;
            b[i] -= eps;
            let num = (f(&x, &a) - f(&x, &b)) / (2.0 * eps);
            assert!((num - dh_prev[i]).abs() < 1e-7);
        }
    }
}
