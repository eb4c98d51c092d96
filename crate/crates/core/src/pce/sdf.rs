use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis, s};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};

/// A scalar field with an analytic spatial gradient.
pub trait ScalarField: Sync {
    fn values(&self, points: &[Vec3]) -> Vec<f64>;

    fn values_and_gradients(&self, points: &[Vec3]) -> (Vec<f64>, Vec<Vec3>);
}

/// Exact signed distance to a sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSdf {
    pub center: Vec3,
    pub radius: f64,
}

impl ScalarField for SphereSdf {
    fn values(&self, points: &[Vec3]) -> Vec<f64> {
        points.iter().map(|p| (p - self.center).norm() - self.radius).collect()
    }

    fn values_and_gradients(&self, points: &[Vec3]) -> (Vec<f64>, Vec<Vec3>) {
        let grads = points
            .iter()
            .map(|p| {
                let d = p - self.center;
                let n = d.norm();
                if n > 0.0 { d / n } else { Vec3::zeros() }
            })
            .collect();
        (self.values(points), grads)
    }
}

/// Layer layout of the fully connected field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdfArchitecture {
    pub hidden_layers: usize,
    pub width: usize,
    /// Hidden layer that receives the input coordinates again, concatenated.
    pub skip_layer: Option<usize>,
}

impl Default for SdfArchitecture {
    fn default() -> Self {
        Self { hidden_layers: 4, width: 64, skip_layer: Some(2) }
    }
}

impl SdfArchitecture {
    fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.width < 8 {
            return Err(Error::precondition("SDF network needs at least one hidden layer of width ≥ 8"));
        }
        if let Some(k) = self.skip_layer {
            if k == 0 || k >= self.hidden_layers {
                return Err(Error::precondition(format!("skip layer {k} must lie in 1..{}", self.hidden_layers)));
            }
        }
        Ok(())
    }

    /// (in, out) of every linear layer, output layer last.
    fn shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut input = 3;
        for l in 0..self.hidden_layers {
            let out = if self.skip_layer == Some(l + 1) { self.width - 3 } else { self.width };
            shapes.push((input, out));
            input = self.width;
        }
        shapes.push((input, 1));
        shapes
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    /// (out, in)
    w: Array2<f32>,
    b: Array1<f32>,
}

/// Rectified-linear MLP `g: ℝ³ → ℝ` with one optional input skip.
///
/// Inputs are mapped to `(p − center) / half_extent` and the output is scaled back
/// by `half_extent`, so gradients are in world units.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfNetwork {
    arch: SdfArchitecture,
    center: Vec3,
    half_extent: f64,
    layers: Vec<Dense>,
}

const SQRT_HALF: f32 = std::f32::consts::FRAC_1_SQRT_2;
const MAGIC: &[u8; 4] = b"CSDF";
const BLOB_VERSION: u32 = 1;

/// Activations kept for the backward pass. Rows are four stacked streams of `n`
/// points: the value and the three directional derivatives.
pub struct Tape {
    n: usize,
    inputs: Vec<Array2<f32>>,
    masks: Vec<Array2<bool>>,
    out: Array2<f32>,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Field value at point `i`, world units.
    pub fn value(&self, i: usize, half_extent: f64) -> f64 {
        self.out[[i, 0]] as f64 * half_extent
    }

    pub fn gradient(&self, i: usize) -> Vec3 {
        Vec3::new(
            self.out[[self.n + i, 0]] as f64,
            self.out[[2 * self.n + i, 0]] as f64,
            self.out[[3 * self.n + i, 0]] as f64,
        )
    }
}

impl SdfNetwork {
    /// Geometric initialisation: the untrained field approximates the distance to a
    /// sphere of radius `radius · half_extent` around the centre of `bounds`.
    pub fn new(arch: SdfArchitecture, bounds: &Aabb, radius: f64, seed: u64) -> Result<Self> {
        arch.validate()?;
        let half_extent = 0.5 * bounds.max_extent();
        if !(half_extent > 0.0) || !half_extent.is_finite() {
            return Err(Error::DegenerateExtent("SDF bounds have zero extent".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = arch.shapes();
        let last = shapes.len() - 1;
        let layers = shapes
            .iter()
            .enumerate()
            .map(|(l, &(input, out))| {
                let (mean, std, bias) = if l == last {
                    ((std::f64::consts::PI / input as f64).sqrt(), 1e-4, -radius)
                } else {
                    (0.0, (2.0 / out as f64).sqrt(), 0.0)
                };
                let normal = Normal::new(mean, std).expect("finite std");
                let w = Array2::from_shape_fn((out, input), |_| normal.sample(&mut rng) as f32);
                Dense { w, b: Array1::from_elem(out, bias as f32) }
            })
            .collect();
        Ok(Self { arch, center: bounds.center(), half_extent, layers })
    }

    pub fn architecture(&self) -> SdfArchitecture {
        self.arch
    }

    /// Centre of the box the inputs are normalised by.
    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|d| d.w.len() + d.b.len()).sum()
    }

    /// Weights and biases, layer by layer, row-major.
    pub fn parameters(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for d in &self.layers {
            out.extend(d.w.iter());
            out.extend(d.b.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f32]) {
        assert_eq!(params.len(), self.parameter_count());
        let mut k = 0;
        for d in &mut self.layers {
            for v in d.w.iter_mut().chain(d.b.iter_mut()) {
                *v = params[k];
                k += 1;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|d| d.w.iter().chain(d.b.iter()).all(|v| v.is_finite()))
    }

    fn normalized(&self, points: &[Vec3]) -> Array2<f32> {
        let inv = 1.0 / self.half_extent;
        Array2::from_shape_fn((points.len(), 3), |(i, j)| ((points[i][j] - self.center[j]) * inv) as f32)
    }

    fn primal(&self, x: &Array2<f32>) -> Array2<f32> {
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (l, d) in self.layers.iter().enumerate() {
            if self.arch.skip_layer == Some(l) {
                a = ndarray::concatenate![Axis(1), a, x.view()];
                a.mapv_inplace(|v| v * SQRT_HALF);
            }
            let mut z = a.dot(&d.w.t());
            z += &d.b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    /// Field values only, evaluated in parallel chunks.
    pub fn eval(&self, points: &[Vec3]) -> Vec<f64> {
        points
            .par_chunks(4096)
            .flat_map_iter(|chunk| {
                let out = self.primal(&self.normalized(chunk));
                out.column(0).iter().map(|v| *v as f64 * self.half_extent).collect::<Vec<_>>()
            })
            .collect()
    }

    /// Values and input gradients with the activations needed for [`Self::backward`].
    pub fn forward(&self, points: &[Vec3]) -> Tape {
        let n = points.len();
        let x = self.normalized(points);
        // Streams: value, then d/dx, d/dy, d/dz.
        let mut a = Array2::<f32>::zeros((4 * n, 3));
        a.slice_mut(s![..n, ..]).assign(&x);
        let mut seeds = Array2::<f32>::zeros((3 * n, 3));
        for i in 0..n {
            for j in 0..3 {
                seeds[[j * n + i, j]] = 1.0;
            }
        }
        a.slice_mut(s![n.., ..]).assign(&seeds);
        let x_stack = a.clone();

        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(last);
        for (l, d) in self.layers.iter().enumerate() {
            if self.arch.skip_layer == Some(l) {
                a = ndarray::concatenate![Axis(1), a, x_stack.view()];
                a.mapv_inplace(|v| v * SQRT_HALF);
            }
            let mut z = a.dot(&d.w.t());
            z.slice_mut(s![..n, ..]).zip_mut_with(&d.b.view().insert_axis(Axis(0)), |v, b| *v += b);
            inputs.push(a);
            if l < last {
                let mask = z.slice(s![..n, ..]).mapv(|v| v > 0.0);
                for stream in 0..4 {
                    z.slice_mut(s![stream * n..(stream + 1) * n, ..])
                        .zip_mut_with(&mask, |v, m| if !m { *v = 0.0 });
                }
                masks.push(mask);
            }
            a = z;
        }
        Tape { n, inputs, masks, out: a }
    }

    /// Parameter gradient of a loss given its derivatives with respect to the field
    /// values (world units) and the input gradients held in `tape`.
    pub fn backward(&self, tape: &Tape, d_values: &[f64], d_gradients: &[Vec3]) -> Vec<f32> {
        let n = tape.n;
        assert_eq!(d_values.len(), n);
        assert_eq!(d_gradients.len(), n);
        let mut dz = Array2::<f32>::zeros((4 * n, 1));
        for i in 0..n {
            dz[[i, 0]] = (d_values[i] * self.half_extent) as f32;
            for j in 0..3 {
                dz[[(j + 1) * n + i, 0]] = d_gradients[i][j] as f32;
            }
        }
        let mut grads: Vec<(Array2<f32>, Array1<f32>)> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let d = &self.layers[l];
            let dw = dz.t().dot(&tape.inputs[l]);
            let db = dz.slice(s![..n, ..]).sum_axis(Axis(0));
            grads.push((dw, db));
            if l == 0 {
                break;
            }
            let mut da = dz.dot(&d.w);
            if self.arch.skip_layer == Some(l) {
                let keep = da.ncols() - 3;
                da = da.slice(s![.., ..keep]).mapv(|v| v * SQRT_HALF);
            }
            let mask = &tape.masks[l - 1];
            for stream in 0..4 {
                da.slice_mut(s![stream * n..(stream + 1) * n, ..]).zip_mut_with(mask, |v, m| if !m { *v = 0.0 });
            }
            dz = da;
        }
        grads.reverse();
        let mut out = Vec::with_capacity(self.parameter_count());
        for (dw, db) in grads {
            out.extend(dw.iter());
            out.extend(db.iter());
        }
        out
    }

    /// Writes the self-describing little-endian weights blob.
    pub fn write_weights(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        let header = [
            BLOB_VERSION,
            self.arch.hidden_layers as u32,
            self.arch.width as u32,
            self.arch.skip_layer.map_or(0, |k| k as u32),
        ];
        for v in header {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.center.x, self.center.y, self.center.z, self.half_extent] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in self.parameters() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_weights(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("not an SDF weights blob".into()));
        }
        let mut u = [0u8; 4];
        let mut header = [0u32; 4];
        for h in &mut header {
            r.read_exact(&mut u)?;
            *h = u32::from_le_bytes(u);
        }
        if header[0] != BLOB_VERSION {
            return Err(Error::Parse(format!("unsupported SDF blob version {}", header[0])));
        }
        let arch = SdfArchitecture {
            hidden_layers: header[1] as usize,
            width: header[2] as usize,
            skip_layer: (header[3] != 0).then_some(header[3] as usize),
        };
        arch.validate()?;
        let mut f = [0u8; 8];
        let mut geo = [0f64; 4];
        for g in &mut geo {
            r.read_exact(&mut f)?;
            *g = f64::from_le_bytes(f);
        }
        let bounds = Aabb::new(
            Vec3::new(geo[0] - geo[3], geo[1] - geo[3], geo[2] - geo[3]),
            Vec3::new(geo[0] + geo[3], geo[1] + geo[3], geo[2] + geo[3]),
        );
        let mut net = Self::new(arch, &bounds, 0.0, 0)?;
        net.center = Vec3::new(geo[0], geo[1], geo[2]);
        net.half_extent = geo[3];
        let mut params = vec![0f32; net.parameter_count()];
        for p in &mut params {
            r.read_exact(&mut u)?;
            *p = f32::from_le_bytes(u);
        }
        net.set_parameters(&params);
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_weights(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_weights(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

impl ScalarField for SdfNetwork {
    fn values(&self, points: &[Vec3]) -> Vec<f64> {
        self.eval(points)
    }

    fn values_and_gradients(&self, points: &[Vec3]) -> (Vec<f64>, Vec<Vec3>) {
        let mut values = Vec::with_capacity(points.len());
        let mut grads = Vec::with_capacity(points.len());
        for chunk in points.chunks(4096) {
            let tape = self.forward(chunk);
            for i in 0..chunk.len() {
                values.push(tape.value(i, self.half_extent));
                grads.push(tape.gradient(i));
            }
        }
        (values, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn unit_bounds() -> Aabb {
        Aabb::new(Vec3::repeat(-0.5), Vec3::repeat(0.5))
    }

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))).collect()
    }

    fn net() -> SdfNetwork {
        SdfNetwork::new(SdfArchitecture::default(), &unit_bounds(), 0.6, 5).unwrap()
    }

    #[test]
    fn geometric_init_is_roughly_a_sphere() {
        let g = net();
        let pts = random_points(500, 1);
        let vals = g.eval(&pts);
        let mut corr = 0.0;
        for (p, v) in pts.iter().zip(&vals) {
            let exact = p.norm() - 0.3;
            corr += (v - exact).abs();
        }
        assert!(corr / 500.0 < 0.1, "mean deviation {}", corr / 500.0);
    }

    #[test]
    fn eval_and_forward_agree() {
        let g = net();
        let pts = random_points(50, 2);
        let tape = g.forward(&pts);
        for (i, v) in g.eval(&pts).iter().enumerate() {
            assert!((tape.value(i, g.half_extent()) - v).abs() < 1e-6);
        }
    }

    /// Scalar f64 re-evaluation from the flat parameters: value and forward-mode
    /// input gradient.
    fn reference(g: &SdfNetwork, params: &[f64], p: &Vec3) -> (f64, Vec3) {
        let x: Vec<f64> = (0..3).map(|j| (p[j] - g.center[j]) / g.half_extent).collect();
        let mut a = x.clone();
        let mut t: Vec<Vec<f64>> = (0..3).map(|j| (0..3).map(|k| if j == k { 1.0 } else { 0.0 }).collect()).collect();
        let shapes = g.arch.shapes();
        let mut off = 0;
        for (l, &(input, out)) in shapes.iter().enumerate() {
            if g.arch.skip_layer == Some(l) {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                a = a.iter().chain(&x).map(|v| v * r).collect();
                for j in 0..3 {
                    let seed: Vec<f64> = (0..3).map(|k| if j == k { 1.0 } else { 0.0 }).collect();
                    t[j] = t[j].iter().chain(&seed).map(|v| v * r).collect();
                }
            }
            let w = &params[off..off + out * input];
            let b = &params[off + out * input..off + out * input + out];
            off += out * input + out;
            let mut z = vec![0.0; out];
            let mut tz = vec![vec![0.0; out]; 3];
            for o in 0..out {
                z[o] = b[o] + (0..input).map(|i| w[o * input + i] * a[i]).sum::<f64>();
                for j in 0..3 {
                    tz[j][o] = (0..input).map(|i| w[o * input + i] * t[j][i]).sum::<f64>();
                }
            }
            if l + 1 < shapes.len() {
                for o in 0..out {
                    if z[o] <= 0.0 {
                        z[o] = 0.0;
                        for tj in tz.iter_mut() {
                            tj[o] = 0.0;
                        }
                    }
                }
            }
            a = z;
            t = tz;
        }
        (a[0] * g.half_extent, Vec3::new(t[0][0], t[1][0], t[2][0]))
    }

    fn params64(g: &SdfNetwork) -> Vec<f64> {
        g.parameters().iter().map(|v| *v as f64).collect()
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let g = net();
        let params = params64(&g);
        let pts = random_points(100, 3);
        let (values, grads) = g.values_and_gradients(&pts);
        let h = 1e-6;
        let mut good = 0;
        for ((p, v), grad) in pts.iter().zip(&values).zip(&grads) {
            let (rv, _) = reference(&g, &params, p);
            assert!((rv - v).abs() < 1e-5);
            let mut fd = Vec3::zeros();
            for j in 0..3 {
                let mut a = *p;
                let mut b = *p;
                a[j] += h;
                b[j] -= h;
                fd[j] = (reference(&g, &params, &a).0 - reference(&g, &params, &b).0) / (2.0 * h);
            }
            if (fd - grad).norm() <= 1e-3 * fd.norm() {
                good += 1;
            }
        }
        assert_eq!(good, 100);
    }

    #[test]
    fn weight_gradient_matches_finite_differences() {
        let arch = SdfArchitecture { hidden_layers: 3, width: 12, skip_layer: Some(1) };
        let g = SdfNetwork::new(arch, &unit_bounds(), 0.5, 9).unwrap();
        let pts = random_points(8, 4);
        let cv: Vec<f64> = (0..8).map(|i| 0.3 - 0.1 * i as f64).collect();
        let cg: Vec<Vec3> = (0..8).map(|i| Vec3::new(0.2, -0.1 * i as f64, 0.05)).collect();
        let loss = |params: &[f64]| {
            (0..8)
                .map(|i| {
                    let (v, gr) = reference(&g, params, &pts[i]);
                    cv[i] * v + cg[i].dot(&gr)
                })
                .sum::<f64>()
        };
        let tape = g.forward(&pts);
        let analytic = g.backward(&tape, &cv, &cg);
        let base = params64(&g);
        let h = 1e-6;
        let mut good = 0;
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] += h;
            let up = loss(&p);
            p[k] -= 2.0 * h;
            let fd = (up - loss(&p)) / (2.0 * h);
            let a = analytic[k] as f64;
            if (fd - a).abs() <= 1e-2 * fd.abs().max(1e-3) {
                good += 1;
            }
        }
        assert!(good as f64 >= 0.99 * base.len() as f64, "{good}/{}", base.len());
    }

    #[test]
    fn weights_blob_round_trip() {
        let g = net();
        let mut buf = Vec::new();
        g.write_weights(&mut buf).unwrap();
        let back = SdfNetwork::read_weights(&mut buf.as_slice()).unwrap();
        assert_eq!(back, g);
        assert!(SdfNetwork::read_weights(&mut &b"XXXX"[..]).is_err());
    }

    #[test]
    fn sphere_sdf_gradient() {
        let s = SphereSdf { center: Vec3::zeros(), radius: 0.5 };
        let (v, g) = s.values_and_gradients(&[Vec3::new(0.7, 0.0, 0.0)]);
        assert!((v[0] - 0.2).abs() < 1e-15);
        assert_eq!(g[0], Vec3::x());
    }
}
